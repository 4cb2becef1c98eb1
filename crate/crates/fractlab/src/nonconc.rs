//! Affine non-concentration scanners, hyperplane polynomial-decay fits, and
//! the convolution-square transfer check.
//!
//! A measure is affinely non-concentrated when hyperplane neighborhoods
//! capture only a small fraction of ball mass, at most scales, outside a
//! small exceptional set of points. The scanners here estimate the ratio
//! curve empirically: the quantifier over all hyperplanes is replaced by
//! worst-over-samples (seeded random directions plus the principal
//! directions of local mass), and the hyperplane offset is maximized
//! exactly over the projected support at grid resolution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::convolution::convolve;
use crate::dyadic::{ols_line, DyadicMeasure};
use crate::error::{Error, Result};
use crate::par;

/// An affine subspace: a point plus an orthonormal direction basis.
/// Hyperplanes have `d - 1` basis vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSubspace {
    point: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

const ORTHO_TOL: f64 = 1e-10;

impl AffineSubspace {
    /// Validates orthonormality of the basis to 1e-10 and `0 <= m < d`.
    pub fn new(point: Vec<f64>, basis: Vec<Vec<f64>>) -> Result<Self> {
        let d = point.len();
        if d == 0 {
            return Err(Error::Input("affine subspace needs an ambient point".into()));
        }
        if basis.len() >= d {
            return Err(Error::Input(format!(
                "direction basis of size {} is not proper in dimension {d}",
                basis.len()
            )));
        }
        for (i, u) in basis.iter().enumerate() {
            if u.len() != d {
                return Err(Error::Input("basis vector dimension mismatch".into()));
            }
            for (j, v) in basis.iter().enumerate() {
                let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                if (dot - target).abs() > ORTHO_TOL {
                    return Err(Error::Input(format!(
                        "basis is not orthonormal: <b{i}, b{j}> = {dot}"
                    )));
                }
            }
        }
        Ok(AffineSubspace { point, basis })
    }

    /// Hyperplane through `point` orthogonal to `normal`.
    pub fn hyperplane(point: Vec<f64>, normal: &[f64]) -> Result<Self> {
        let d = point.len();
        if normal.len() != d {
            return Err(Error::Input("normal vector dimension mismatch".into()));
        }
        let n = normalize(normal)
            .ok_or_else(|| Error::Input("hyperplane normal must be nonzero".into()))?;
        // complete the normal to an orthonormal frame, keep the complement
        let mut frame = vec![n.clone()];
        for axis in 0..d {
            let mut e = vec![0.0; d];
            e[axis] = 1.0;
            for f in &frame {
                let dot: f64 = e.iter().zip(f).map(|(a, b)| a * b).sum();
                for (ei, fi) in e.iter_mut().zip(f) {
                    *ei -= dot * fi;
                }
            }
            if let Some(u) = normalize(&e) {
                frame.push(u);
                if frame.len() == d {
                    break;
                }
            }
        }
        AffineSubspace::new(point, frame[1..].to_vec())
    }

    /// A linear subspace through the origin spanned by the given directions.
    pub fn linear(d: usize, basis: Vec<Vec<f64>>) -> Result<Self> {
        AffineSubspace::new(vec![0.0; d], basis)
    }

    pub fn ambient_dim(&self) -> usize {
        self.point.len()
    }

    pub fn subspace_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// Same directions through a different anchor point.
    pub fn through(&self, point: Vec<f64>) -> Result<Self> {
        AffineSubspace::new(point, self.basis.clone())
    }

    /// Euclidean distance from `p` to the subspace: the norm of the
    /// component of `p - point` orthogonal to the basis.
    pub fn distance(&self, p: &[f64]) -> f64 {
        let d = self.point.len();
        let mut rel: Vec<f64> = (0..d).map(|i| p[i] - self.point[i]).collect();
        for b in &self.basis {
            let dot: f64 = rel.iter().zip(b).map(|(a, c)| a * c).sum();
            for (r, c) in rel.iter_mut().zip(b) {
                *r -= dot * c;
            }
        }
        rel.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-12 {
        None
    } else {
        Some(v.iter().map(|x| x / norm).collect())
    }
}

/// Mass of `W^{(eps * rho)} ∩ B(x, rho)`: a cell contributes its full mass
/// iff its anchor lies in both regions (closed neighborhoods).
pub fn tube_mass(
    mu: &DyadicMeasure,
    w: &AffineSubspace,
    eps: f64,
    x: &[f64],
    rho: f64,
) -> Result<f64> {
    if !(eps > 0.0) || !(rho > 0.0) {
        return Err(Error::Parameter("tube_mass needs eps > 0 and rho > 0".into()));
    }
    let d = mu.dim();
    if w.ambient_dim() != d || x.len() != d {
        return Err(Error::Input("tube_mass dimension mismatch".into()));
    }
    let (anchors, masses) = mu.flat_support();
    let width = eps * rho;
    Ok(par::tree_sum_fn(masses.len(), &|i| {
        let a = &anchors[i * d..(i + 1) * d];
        let ball: f64 = a.iter().zip(x).map(|(p, c)| (p - c) * (p - c)).sum();
        if ball <= rho * rho && w.distance(a) <= width {
            masses[i]
        } else {
            0.0
        }
    }))
}

/// Mass of the closed ball `B(x, rho)` (anchor membership).
pub fn ball_mass(mu: &DyadicMeasure, x: &[f64], rho: f64) -> f64 {
    let d = mu.dim();
    let (anchors, masses) = mu.flat_support();
    par::tree_sum_fn(masses.len(), &|i| {
        let a = &anchors[i * d..(i + 1) * d];
        let dist2: f64 = a.iter().zip(x).map(|(p, c)| (p - c) * (p - c)).sum();
        if dist2 <= rho * rho {
            masses[i]
        } else {
            0.0
        }
    })
}

/// Mass of the closed slab `W^{(h)}` (absolute half-width, no ball cut).
pub fn slab_mass(mu: &DyadicMeasure, w: &AffineSubspace, h: f64) -> f64 {
    let d = mu.dim();
    let (anchors, masses) = mu.flat_support();
    par::tree_sum_fn(masses.len(), &|i| {
        let a = &anchors[i * d..(i + 1) * d];
        if w.distance(a) <= h {
            masses[i]
        } else {
            0.0
        }
    })
}

/// Parameters of the almost-every-scale non-concentration scan.
#[derive(Debug, Clone)]
pub struct AncScanParams {
    /// Fraction of scales a point may fail before it is exceptional.
    pub theta: f64,
    /// Scale stride: scale `l` probes balls of radius `2^{-r l}`.
    pub r: u32,
    /// Number of scale steps (scales run over `0..=k`).
    pub k: u32,
    /// Seeded random hyperplane directions shared by all points and scales.
    pub direction_samples: u32,
    /// Mass-weighted sampled support points (ball centers).
    pub offset_samples: u32,
    /// Relative tube widths probed.
    pub epsilons: Vec<f64>,
    /// A point whose surviving-scale ratio at the smallest epsilon still
    /// reaches this level is counted into the exceptional set.
    pub exception_threshold: f64,
    pub seed: u64,
}

impl Default for AncScanParams {
    fn default() -> Self {
        AncScanParams {
            theta: 0.2,
            r: 1,
            k: 5,
            direction_samples: 64,
            offset_samples: 32,
            epsilons: vec![0.5, 0.25, 0.125, 0.0625],
            exception_threshold: 0.9,
            seed: 0,
        }
    }
}

/// Result of an [`anc_scan`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct AncReport {
    pub theta: f64,
    pub r: u32,
    pub k: u32,
    /// Per epsilon: the worst tube/ball ratio over non-exceptional points,
    /// after discarding each point's worst `theta` fraction of scales.
    pub delta_curve: Vec<(f64, f64)>,
    /// Mass fraction of sampled points failing more than `theta k` scales.
    pub exceptional_fraction: f64,
    /// Anchor-membership inflation of the relative width at the finest
    /// probed scale: `cell_width / min ball radius`. Reported ratios
    /// correspond to `eps + eps_inflation` tubes of the underlying measure.
    pub eps_inflation: f64,
}

/// Scans tube/ball mass ratios over sampled support points, scales
/// `rho = 2^{-r l}` for `l in 0..=k`, and sampled hyperplanes (seeded random
/// directions plus local principal directions). Per point and epsilon the
/// worst `theta` fraction of scales is discarded; points still at total
/// concentration afterwards form the exceptional set.
pub fn anc_scan(mu: &DyadicMeasure, params: &AncScanParams) -> Result<AncReport> {
    let d = mu.dim();
    if !(params.theta > 0.0 && params.theta < 1.0) {
        return Err(Error::Parameter("theta must lie in (0,1)".into()));
    }
    if params.r < 1 || params.k < 3 {
        return Err(Error::Parameter("need stride r >= 1 and k >= 3 scales".into()));
    }
    if params.offset_samples == 0 || mu.nnz() == 0 {
        return Err(Error::Input("empty support sample".into()));
    }
    let mut epsilons = params.epsilons.clone();
    epsilons.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if epsilons.is_empty() || epsilons[0] <= 0.0 {
        return Err(Error::Parameter("epsilon grid must be positive".into()));
    }
    let rho_min = (-(params.r as f64) * params.k as f64).exp2();
    if epsilons[0] * rho_min < 2.0 * mu.cell_width() {
        return Err(Error::Parameter(format!(
            "finest tube width {} is below twice the cell width {}; raise the measure scale or lower k",
            epsilons[0] * rho_min,
            mu.cell_width()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let centers = sample_support_points(mu, params.offset_samples, &mut rng);
    let directions = if d == 1 {
        vec![vec![1.0]]
    } else {
        random_directions(d, params.direction_samples, &mut rng)
    };

    let (anchors, masses) = mu.flat_support();
    let n_eps = epsilons.len();
    let scales: Vec<f64> = (0..=params.k)
        .map(|l| (-(params.r as f64) * l as f64).exp2())
        .collect();

    // ratios[point][scale][eps]
    let ratios: Vec<Vec<Vec<f64>>> = par::map_indexed(centers.len(), |pi| {
        let x = &centers[pi];
        scales
            .iter()
            .map(|&rho| worst_tube_ratios(&anchors, &masses, d, x, rho, &directions, &epsilons))
            .collect()
    });

    // per point and eps: the value after discarding the worst theta fraction
    let keep = (((1.0 - params.theta) * (params.k + 1) as f64).ceil() as usize)
        .clamp(1, params.k as usize + 1);
    let mut exceptional = 0usize;
    let mut curve = vec![0.0f64; n_eps];
    let mut survivors = 0usize;
    for point_ratios in &ratios {
        let mut per_eps = vec![0.0f64; n_eps];
        for (ei, v) in per_eps.iter_mut().enumerate() {
            let mut over_scales: Vec<f64> =
                point_ratios.iter().map(|scale_row| scale_row[ei]).collect();
            over_scales.sort_by(|a, b| a.partial_cmp(b).unwrap());
            *v = over_scales[keep - 1];
        }
        if per_eps[0] >= params.exception_threshold {
            exceptional += 1;
        } else {
            survivors += 1;
            for (c, v) in curve.iter_mut().zip(&per_eps) {
                *c = c.max(*v);
            }
        }
    }
    if survivors == 0 {
        curve = vec![1.0; n_eps];
    }
    Ok(AncReport {
        theta: params.theta,
        r: params.r,
        k: params.k,
        delta_curve: epsilons.iter().copied().zip(curve).collect(),
        exceptional_fraction: exceptional as f64 / centers.len() as f64,
        eps_inflation: mu.cell_width() / rho_min,
    })
}

/// Worst tube/ball ratio at one center and radius, over the direction set
/// plus the local principal directions; the hyperplane offset is maximized
/// exactly over the projected in-ball anchors per epsilon.
fn worst_tube_ratios(
    anchors: &[f64],
    masses: &[f64],
    d: usize,
    x: &[f64],
    rho: f64,
    directions: &[Vec<f64>],
    epsilons: &[f64],
) -> Vec<f64> {
    let mut in_ball: Vec<(usize, f64)> = Vec::new();
    let mut ball_total = 0.0;
    for (i, &m) in masses.iter().enumerate() {
        let dist2: f64 = (0..d).map(|j| (anchors[i * d + j] - x[j]).powi(2)).sum();
        if dist2 <= rho * rho {
            in_ball.push((i, m));
            ball_total += m;
        }
    }
    if ball_total <= 0.0 {
        return vec![0.0; epsilons.len()];
    }

    let mut candidates: Vec<Vec<f64>> = directions.to_vec();
    if d > 1 {
        candidates.extend(local_principal_directions(&in_ball, anchors, d, ball_total));
    }

    let mut worst = vec![0.0f64; epsilons.len()];
    let mut projected: Vec<(f64, f64)> = Vec::with_capacity(in_ball.len());
    for u in &candidates {
        projected.clear();
        for &(i, m) in &in_ball {
            let t: f64 = (0..d).map(|j| anchors[i * d + j] * u[j]).sum();
            projected.push((t, m));
        }
        projected.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for (ei, &eps) in epsilons.iter().enumerate() {
            let width = 2.0 * eps * rho;
            // sliding window: the max over offsets is attained with the
            // window's left edge at a projected anchor
            let mut best = 0.0f64;
            let mut right = 0usize;
            let mut window = 0.0f64;
            for left in 0..projected.len() {
                if left > 0 {
                    window -= projected[left - 1].1;
                }
                if right < left {
                    right = left;
                    window = 0.0;
                }
                while right < projected.len() && projected[right].0 <= projected[left].0 + width {
                    window += projected[right].1;
                    right += 1;
                }
                best = best.max(window);
            }
            worst[ei] = worst[ei].max(best / ball_total);
        }
    }
    worst
}

/// Eigenvectors of the local mass covariance: candidate hyperplane normals
/// aligned with the flattest and fattest directions of the ball.
fn local_principal_directions(
    in_ball: &[(usize, f64)],
    anchors: &[f64],
    d: usize,
    total: f64,
) -> Vec<Vec<f64>> {
    let mut mean = vec![0.0; d];
    for &(i, m) in in_ball {
        for j in 0..d {
            mean[j] += m * anchors[i * d + j];
        }
    }
    for v in &mut mean {
        *v /= total;
    }
    let mut cov = nalgebra::DMatrix::<f64>::zeros(d, d);
    for &(i, m) in in_ball {
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] +=
                    m * (anchors[i * d + a] - mean[a]) * (anchors[i * d + b] - mean[b]);
            }
        }
    }
    cov /= total;
    let eigen = nalgebra::SymmetricEigen::new(cov);
    (0..d)
        .filter_map(|c| {
            let col: Vec<f64> = eigen.eigenvectors.column(c).iter().copied().collect();
            normalize(&col)
        })
        .collect()
}

fn sample_support_points(mu: &DyadicMeasure, n: u32, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let (anchors, masses) = mu.flat_support();
    let d = mu.dim();
    let mut cumulative = Vec::with_capacity(masses.len());
    let mut acc = 0.0;
    for m in &masses {
        acc += m;
        cumulative.push(acc);
    }
    (0..n)
        .map(|_| {
            let target = rng.gen::<f64>() * acc;
            let idx = cumulative.partition_point(|&c| c < target).min(masses.len() - 1);
            anchors[idx * d..(idx + 1) * d].to_vec()
        })
        .collect()
}

fn random_directions(d: usize, n: u32, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(n as usize);
    while out.len() < n as usize {
        // Box-Muller Gaussians, normalized
        let v: Vec<f64> = (0..d)
            .map(|_| {
                let u1: f64 = rng.gen::<f64>().max(1e-12);
                let u2: f64 = rng.gen();
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        if let Some(u) = normalize(&v) {
            out.push(u);
        }
    }
    out
}

/// Per-hyperplane censored log-log fit of `mu(W^{(eps)})` and the family
/// minimum (the worst hyperplane).
#[derive(Debug, Clone, serde::Serialize)]
pub struct HyperplaneDecayFit {
    /// Minimum fitted exponent over the family; `+inf` means every fit was
    /// degenerate (faster than any polynomial at the sampled widths).
    pub kappa_hat: f64,
    /// Per-hyperplane (slope, stderr, censored point count). Slope is `+inf`
    /// when at least half the grid was censored.
    pub per_hyperplane: Vec<(f64, f64, usize)>,
}

/// Least-squares slope of `log mu(W^{(eps)})` against `log eps` for each
/// hyperplane; zero masses are censored, and a hyperplane with at least half
/// the grid censored reports `+inf`.
pub fn hyperplane_decay_fit(
    mu: &DyadicMeasure,
    family: &[AffineSubspace],
    eps_grid: &[f64],
) -> Result<HyperplaneDecayFit> {
    if eps_grid.len() < 4 {
        return Err(Error::Parameter("decay fit needs >= 4 epsilon values".into()));
    }
    if eps_grid.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Parameter("epsilon grid must be positive".into()));
    }
    if family.is_empty() {
        return Err(Error::Input("empty hyperplane family".into()));
    }
    let mut per = Vec::with_capacity(family.len());
    let mut kappa = f64::INFINITY;
    for w in family {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut censored = 0usize;
        for &eps in eps_grid {
            let mass = slab_mass(mu, w, eps);
            if mass > 0.0 {
                xs.push(eps.ln());
                ys.push(mass.ln());
            } else {
                censored += 1;
            }
        }
        if censored * 2 >= eps_grid.len() {
            per.push((f64::INFINITY, 0.0, censored));
            continue;
        }
        let (slope, _intercept, stderr) = ols_line(&xs, &ys)?;
        kappa = kappa.min(slope);
        per.push((slope, stderr, censored));
    }
    Ok(HyperplaneDecayFit { kappa_hat: kappa, per_hyperplane: per })
}

/// Samples a hyperplane family: seeded random normals through mass-weighted
/// support points, plus the principal directions of the global covariance
/// through the mean.
pub fn sample_hyperplane_family(
    mu: &DyadicMeasure,
    n_random: u32,
    seed: u64,
) -> Result<Vec<AffineSubspace>> {
    let d = mu.dim();
    if d < 2 {
        return Err(Error::Parameter("hyperplane sampling needs dimension >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normals = random_directions(d, n_random, &mut rng);
    let points = sample_support_points(mu, n_random.max(1), &mut rng);
    let mut family = Vec::new();
    for (n, p) in normals.iter().zip(&points) {
        family.push(AffineSubspace::hyperplane(p.clone(), n)?);
    }
    let cov = nalgebra::DMatrix::from_row_slice(d, d, &mu.covariance());
    let eigen = nalgebra::SymmetricEigen::new(cov);
    let mean = mu.mean();
    for c in 0..d {
        let col: Vec<f64> = eigen.eigenvectors.column(c).iter().copied().collect();
        if let Some(n) = normalize(&col) {
            family.push(AffineSubspace::hyperplane(mean.clone(), &n)?);
        }
    }
    Ok(family)
}

/// Outcome of the convolution-square transfer check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SqrtFriendlyReport {
    /// Fitted decay exponent of `nu^{*2}` near `V = W + W`.
    pub alpha_hat: f64,
    /// Smallest constant making the hypothesis bound hold at every grid
    /// point (floored at 1, as the transfer argument requires).
    pub c_hat: f64,
    /// Per grid point: (eps, nu2(V^(eps)), nu(W^(eps/2)), claimed bound).
    pub rows: Vec<(f64, f64, f64, f64)>,
    pub pass: bool,
}

/// Fits `nu^{*2}(V^{(eps)}) <= C eps^alpha` with `V = W + W` and checks the
/// transferred bound `nu(W^{(eps/2)}) <= C eps^{alpha/2}` at every grid
/// point (slack 1e-9). Vacuous when the convolution square never touches
/// the doubled hyperplane.
pub fn sqrt_friendly_check(
    nu: &DyadicMeasure,
    w: &AffineSubspace,
    eps_grid: &[f64],
) -> Result<SqrtFriendlyReport> {
    if w.subspace_dim() + 1 != nu.dim() {
        return Err(Error::Input("sqrt_friendly_check needs a hyperplane".into()));
    }
    if eps_grid.is_empty() || eps_grid.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Parameter("epsilon grid must be positive".into()));
    }
    if !nu.is_probability() {
        return Err(Error::Parameter("sqrt_friendly_check needs a probability measure".into()));
    }
    let nu2 = convolve(nu, nu)?;
    let doubled: Vec<f64> = w.point().iter().map(|p| 2.0 * p).collect();
    let v = w.through(doubled)?;

    let mut hyp: Vec<(f64, f64)> = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        hyp.push((eps, slab_mass(&nu2, &v, eps)));
    }
    let positive: Vec<(f64, f64)> = hyp.iter().copied().filter(|&(_, m)| m > 0.0).collect();
    let alpha_hat = if positive.len() >= 2 {
        let xs: Vec<f64> = positive.iter().map(|&(e, _)| e.ln()).collect();
        let ys: Vec<f64> = positive.iter().map(|&(_, m)| m.ln()).collect();
        ols_line(&xs, &ys)?.0
    } else {
        0.0
    };
    let mut c_hat = 1.0f64;
    for &(eps, mass) in &positive {
        c_hat = c_hat.max(mass / eps.powf(alpha_hat));
    }

    let mut rows = Vec::with_capacity(eps_grid.len());
    let mut pass = true;
    for &(eps, hyp_mass) in &hyp {
        let lhs = slab_mass(nu, w, eps / 2.0);
        let bound = c_hat * eps.powf(alpha_hat / 2.0);
        if lhs > bound + 1e-9 {
            pass = false;
        }
        rows.push((eps, hyp_mass, lhs, bound));
    }
    Ok(SqrtFriendlyReport { alpha_hat, c_hat, rows, pass })
}
