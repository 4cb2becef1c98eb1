//! Generators for test measures: self-similar IFS measures, product and
//! line measures, and Patterson-Sullivan measures of convex cocompact
//! Fuchsian Schottky groups, plus shadow-lemma and doubling validators.

pub mod schottky;

pub use schottky::{
    ps_fixed_point_residual, ps_measure, schottky_delta, schottky_delta_with_nodes,
    shadow_check, DeltaEstimate, Interval, Mobius, SchottkyGroup,
};

use serde::{Deserialize, Serialize};

use crate::dyadic::{ols_line, DyadicMeasure};
use crate::error::{Error, Result};
use crate::report::{ExperimentReport, LineFit};

/// Hard cap on enumerated IFS words.
const WORD_BUDGET: u64 = 100_000_000;

/// One contracting similarity `x -> ratio * R x + translation`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Similitude {
    /// Contraction ratio in (0, 1).
    pub ratio: f64,
    /// Row-major orthogonal matrix (d x d). Empty means identity.
    #[serde(default)]
    pub rotation: Vec<f64>,
    pub translation: Vec<f64>,
}

impl Similitude {
    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        if self.rotation.is_empty() {
            for i in 0..d {
                out[i] = self.ratio * x[i] + self.translation[i];
            }
        } else {
            for i in 0..d {
                let mut acc = 0.0;
                for j in 0..d {
                    acc += self.rotation[i * d + j] * x[j];
                }
                out[i] = self.ratio * acc + self.translation[i];
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::Input(format!(
                "contraction ratio must lie in (0,1), got {}",
                self.ratio
            )));
        }
        let d = self.dim();
        if !self.rotation.is_empty() {
            if self.rotation.len() != d * d {
                return Err(Error::Input("rotation matrix shape mismatch".into()));
            }
            for i in 0..d {
                for j in 0..d {
                    let dot: f64 = (0..d)
                        .map(|k| self.rotation[i * d + k] * self.rotation[j * d + k])
                        .sum();
                    let target = if i == j { 1.0 } else { 0.0 };
                    if (dot - target).abs() > 1e-9 {
                        return Err(Error::Input("rotation matrix is not orthogonal".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Weighted contracting similarities generating a self-similar measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IfsSystem {
    pub maps: Vec<Similitude>,
    pub weights: Vec<f64>,
}

impl IfsSystem {
    pub fn new(maps: Vec<Similitude>, weights: Vec<f64>) -> Result<Self> {
        if maps.is_empty() || maps.len() != weights.len() {
            return Err(Error::Input("need equally many maps and weights".into()));
        }
        let d = maps[0].dim();
        for m in &maps {
            if m.dim() != d {
                return Err(Error::Input("IFS maps have mixed dimensions".into()));
            }
            m.validate()?;
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::Input("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Input(format!("weights must sum to 1, got {total}")));
        }
        Ok(IfsSystem { maps, weights })
    }

    pub fn dim(&self) -> usize {
        self.maps[0].dim()
    }

    /// The middle-third coin-tossing system on [0, 1].
    pub fn middle_third_cantor() -> IfsSystem {
        IfsSystem::new(
            vec![
                Similitude { ratio: 1.0 / 3.0, rotation: vec![], translation: vec![0.0] },
                Similitude { ratio: 1.0 / 3.0, rotation: vec![], translation: vec![2.0 / 3.0] },
            ],
            vec![0.5, 0.5],
        )
        .expect("canonical system is valid")
    }

    /// Approximate fixed point of the first map (the enumeration base point).
    fn base_point(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.dim()];
        for _ in 0..200 {
            p = self.maps[0].apply(&p);
        }
        p
    }
}

/// Enumerates all weight-positive words of the given depth, placing each
/// word's weight at the image of a fixed base point, then discretizes at
/// scale `k`. Requires the atoms to resolve below the cell width:
/// `max_ratio^depth <= 2^{-k}`.
pub fn ifs_measure(sys: &IfsSystem, k: u32, depth: u32) -> Result<DyadicMeasure> {
    let max_ratio = sys.maps.iter().map(|m| m.ratio).fold(0.0, f64::max);
    if max_ratio.powi(depth as i32) > (-(k as f64)).exp2() + 1e-15 {
        return Err(Error::Parameter(format!(
            "depth {depth} does not resolve scale {k}: max ratio^depth = {}",
            max_ratio.powi(depth as i32)
        )));
    }
    let branches = sys.weights.iter().filter(|&&w| w > 0.0).count() as u64;
    if branches.checked_pow(depth).map_or(true, |n| n > WORD_BUDGET) {
        return Err(Error::Budget(format!(
            "{branches}^{depth} words exceed the 10^8 budget"
        )));
    }
    let base = sys.base_point();
    let mut atoms: Vec<(Vec<f64>, f64)> = vec![(base, 1.0)];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(atoms.len() * branches as usize);
        for (p, w) in &atoms {
            for (map, &weight) in sys.maps.iter().zip(&sys.weights) {
                if weight > 0.0 {
                    next.push((map.apply(p), w * weight));
                }
            }
        }
        atoms = next;
    }
    DyadicMeasure::discretize(&atoms, sys.dim(), k)
}

/// Uniform probability measure on `[0,1)^d` at scale `k` (all cells).
pub fn lebesgue(d: usize, k: u32) -> Result<DyadicMeasure> {
    let per_axis = 1u64 << k;
    let n = per_axis.checked_pow(d as u32).filter(|&n| n <= WORD_BUDGET).ok_or_else(|| {
        Error::Budget(format!("2^{}d cells exceed the budget", k))
    })?;
    let mass = 1.0 / n as f64;
    let mut cells = Vec::with_capacity(n as usize);
    for flat in 0..n {
        let mut rem = flat;
        let mut coords = vec![0i64; d];
        for c in coords.iter_mut().rev() {
            *c = (rem % per_axis) as i64;
            rem /= per_axis;
        }
        cells.push((coords, mass));
    }
    DyadicMeasure::from_cells(d, k, cells)
}

/// One-dimensional atom lists for the product and line constructions.
fn atoms_1d(spec: &ZooSpec, k: u32) -> Result<Vec<(f64, f64)>> {
    match spec {
        ZooSpec::Cantor { depth, .. } => {
            let sys = IfsSystem::middle_third_cantor();
            let depth = (*depth).max(resolve_depth(1.0 / 3.0, k));
            let mut atoms = vec![(0.0f64, 1.0f64)];
            for _ in 0..depth {
                let mut next = Vec::with_capacity(atoms.len() * 2);
                for &(p, w) in &atoms {
                    next.push((p / 3.0, w * 0.5));
                    next.push((p / 3.0 + 2.0 / 3.0, w * 0.5));
                }
                atoms = next;
            }
            let _ = sys;
            Ok(atoms)
        }
        ZooSpec::Lebesgue { d: 1, .. } => {
            let n = 1usize << k;
            Ok((0..n).map(|i| (i as f64 / n as f64, 1.0 / n as f64)).collect())
        }
        ZooSpec::Dirac { point, .. } if point.len() == 1 => Ok(vec![(point[0], 1.0)]),
        ZooSpec::Ifs { maps, weights, depth, .. } => {
            let sys = IfsSystem::new(maps.clone(), weights.clone())?;
            if sys.dim() != 1 {
                return Err(Error::Input("product factors must be one-dimensional".into()));
            }
            let max_ratio = sys.maps.iter().map(|m| m.ratio).fold(0.0, f64::max);
            let depth = (*depth).max(resolve_depth(max_ratio, k));
            let base = sys.base_point();
            let mut atoms = vec![(base[0], 1.0f64)];
            for _ in 0..depth {
                let mut next = Vec::with_capacity(atoms.len() * sys.maps.len());
                for &(p, w) in &atoms {
                    for (map, &weight) in sys.maps.iter().zip(&sys.weights) {
                        if weight > 0.0 {
                            next.push((map.apply(&[p])[0], w * weight));
                        }
                    }
                }
                atoms = next;
            }
            Ok(atoms)
        }
        _ => Err(Error::Input("unsupported product factor".into())),
    }
}

/// Smallest depth with `ratio^depth <= 2^{-k}`.
fn resolve_depth(ratio: f64, k: u32) -> u32 {
    let needed = (k as f64) * 2f64.ln() / -ratio.ln();
    needed.ceil() as u32
}

/// Declarative measure recipe used by the CLI and the experiment drivers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ZooSpec {
    /// Middle-third coin-tossing measure on [0, 1].
    Cantor { depth: u32, scale: u32 },
    /// Uniform measure on `[0,1)^d`.
    Lebesgue { d: usize, scale: u32 },
    /// General weighted similarity system.
    Ifs { maps: Vec<Similitude>, weights: Vec<f64>, depth: u32, scale: u32 },
    /// Uniform mass on the segment `point + t * direction`, `0 <= t <= length`.
    Line { point: Vec<f64>, direction: Vec<f64>, length: f64, scale: u32 },
    /// Product of two one-dimensional recipes, optionally rotated about
    /// (1/2, 1/2).
    Product {
        x: Box<ZooSpec>,
        y: Box<ZooSpec>,
        #[serde(default)]
        angle_degrees: f64,
        scale: u32,
    },
    /// A single point mass.
    Dirac { point: Vec<f64>, scale: u32 },
    /// Patterson-Sullivan measure of a Schottky group given by paired
    /// boundary intervals `[[source_lo, source_hi], [target_lo, target_hi]]`.
    Schottky {
        intervals: Vec<[[f64; 2]; 2]>,
        scale: u32,
        depth: u32,
        #[serde(default = "default_tol")]
        tol: f64,
    },
}

fn default_tol() -> f64 {
    1e-6
}

impl ZooSpec {
    pub fn scale(&self) -> u32 {
        match self {
            ZooSpec::Cantor { scale, .. }
            | ZooSpec::Lebesgue { scale, .. }
            | ZooSpec::Ifs { scale, .. }
            | ZooSpec::Line { scale, .. }
            | ZooSpec::Product { scale, .. }
            | ZooSpec::Dirac { scale, .. }
            | ZooSpec::Schottky { scale, .. } => *scale,
        }
    }

    /// Same recipe at a different scale (word depths are re-derived where
    /// they only exist to resolve the scale).
    pub fn at_scale(&self, k: u32) -> ZooSpec {
        let mut spec = self.clone();
        match &mut spec {
            ZooSpec::Cantor { scale, depth } => {
                *scale = k;
                *depth = (*depth).max(resolve_depth(1.0 / 3.0, k));
            }
            ZooSpec::Lebesgue { scale, .. }
            | ZooSpec::Ifs { scale, .. }
            | ZooSpec::Line { scale, .. }
            | ZooSpec::Product { scale, .. }
            | ZooSpec::Dirac { scale, .. }
            | ZooSpec::Schottky { scale, .. } => *scale = k,
        }
        spec
    }
}

/// Builds the measure described by a recipe.
pub fn generate(spec: &ZooSpec) -> Result<DyadicMeasure> {
    match spec {
        ZooSpec::Cantor { depth, scale } => {
            let depth = (*depth).max(resolve_depth(1.0 / 3.0, *scale));
            ifs_measure(&IfsSystem::middle_third_cantor(), *scale, depth)
        }
        ZooSpec::Lebesgue { d, scale } => lebesgue(*d, *scale),
        ZooSpec::Ifs { maps, weights, depth, scale } => {
            let sys = IfsSystem::new(maps.clone(), weights.clone())?;
            ifs_measure(&sys, *scale, *depth)
        }
        ZooSpec::Line { point, direction, length, scale } => {
            let d = point.len();
            if direction.len() != d || d < 1 {
                return Err(Error::Input("line direction dimension mismatch".into()));
            }
            let norm: f64 = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-12 || *length <= 0.0 {
                return Err(Error::Input("line needs a direction and positive length".into()));
            }
            let steps = 1usize << (*scale + 2).min(24);
            let atoms: Vec<(Vec<f64>, f64)> = (0..steps)
                .map(|i| {
                    let t = length * (i as f64 + 0.5) / steps as f64;
                    let p: Vec<f64> =
                        point.iter().zip(direction).map(|(p, u)| p + t * u / norm).collect();
                    (p, 1.0 / steps as f64)
                })
                .collect();
            DyadicMeasure::discretize(&atoms, d, *scale)
        }
        ZooSpec::Product { x, y, angle_degrees, scale } => {
            let ax = atoms_1d(x, *scale)?;
            let ay = atoms_1d(y, *scale)?;
            let pairs = ax.len() as u64 * ay.len() as u64;
            if pairs > WORD_BUDGET {
                return Err(Error::Budget(format!("{pairs} product atoms exceed the budget")));
            }
            let (sin, cos) = angle_degrees.to_radians().sin_cos();
            let mut atoms = Vec::with_capacity(pairs as usize);
            for &(px, wx) in &ax {
                for &(py, wy) in &ay {
                    let (cx, cy) = (px - 0.5, py - 0.5);
                    atoms.push((
                        vec![0.5 + cos * cx - sin * cy, 0.5 + sin * cx + cos * cy],
                        wx * wy,
                    ));
                }
            }
            DyadicMeasure::discretize(&atoms, 2, *scale)
        }
        ZooSpec::Dirac { point, scale } => {
            DyadicMeasure::discretize(&[(point.clone(), 1.0)], point.len(), *scale)
        }
        ZooSpec::Schottky { intervals, scale, depth, tol } => {
            let group = SchottkyGroup::from_interval_pairs(
                &intervals
                    .iter()
                    .map(|p| {
                        (Interval::new(p[0][0], p[0][1]), Interval::new(p[1][0], p[1][1]))
                    })
                    .collect::<Vec<_>>(),
            )?;
            let delta = schottky_delta(&group, *tol)?;
            ps_measure(&group, delta.delta, *scale, *depth)
        }
    }
}

/// Ball-mass doubling experiment: fits `log mu(B(x, sigma r)) / mu(B(x, r))`
/// against `log sigma` on the contracting (`sigma <= 1`) and expanding
/// (`sigma > 1`) branches over mass-weighted sampled centers.
pub fn doubling_check(
    mu: &DyadicMeasure,
    sigma_grid: &[f64],
    r_grid: &[f64],
    n_centers: u32,
    seed: u64,
) -> Result<ExperimentReport> {
    if sigma_grid.is_empty() || r_grid.is_empty() || n_centers == 0 {
        return Err(Error::Parameter("doubling_check needs nonempty grids".into()));
    }
    if sigma_grid.iter().chain(r_grid).any(|&v| !(v > 0.0)) {
        return Err(Error::Parameter("doubling grids must be positive".into()));
    }
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (anchors, masses) = mu.flat_support();
    let d = mu.dim();
    let mut cumulative = Vec::with_capacity(masses.len());
    let mut acc = 0.0;
    for m in &masses {
        acc += m;
        cumulative.push(acc);
    }
    let centers: Vec<Vec<f64>> = (0..n_centers)
        .map(|_| {
            let target = rng.gen::<f64>() * acc;
            let idx = cumulative.partition_point(|&c| c < target).min(masses.len() - 1);
            anchors[idx * d..(idx + 1) * d].to_vec()
        })
        .collect();

    let min_radius = 4.0 * mu.cell_width();
    let mut lower: Vec<(f64, f64)> = Vec::new();
    let mut upper: Vec<(f64, f64)> = Vec::new();
    let mut skipped = 0u64;
    let mut per_sigma: Vec<(f64, Vec<f64>)> =
        sigma_grid.iter().map(|&s| (s, Vec::new())).collect();
    for x in &centers {
        for &r in r_grid {
            let base = crate::nonconc::ball_mass(mu, x, r);
            if base <= 0.0 || r < min_radius {
                skipped += 1;
                continue;
            }
            for (si, &sigma) in sigma_grid.iter().enumerate() {
                if sigma * r < min_radius {
                    skipped += 1;
                    continue;
                }
                let scaled = crate::nonconc::ball_mass(mu, x, sigma * r);
                if scaled <= 0.0 {
                    skipped += 1;
                    continue;
                }
                let point = (sigma.ln(), (scaled / base).ln());
                per_sigma[si].1.push(point.1);
                if sigma <= 1.0 {
                    lower.push(point);
                } else {
                    upper.push(point);
                }
            }
        }
    }

    let fit_branch = |pts: &[(f64, f64)]| -> Option<(f64, f64, f64)> {
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        if xs.iter().any(|&x| x != xs[0]) {
            ols_line(&xs, &ys).ok()
        } else {
            None
        }
    };
    let lower_fit = fit_branch(&lower);
    let upper_fit = fit_branch(&upper);
    let worst_const = |pts: &[(f64, f64)], slope: f64| -> f64 {
        pts.iter()
            .map(|&(x, y)| (y - slope * x).exp())
            .fold(1.0f64, f64::max)
    };

    let grid: Vec<f64> = per_sigma.iter().map(|(s, _)| *s).collect();
    let values: Vec<f64> = per_sigma
        .iter()
        .map(|(_, v)| {
            if v.is_empty() {
                f64::NAN
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        })
        .collect();
    let primary = lower_fit.or(upper_fit).ok_or_else(|| {
        Error::Input("no usable (center, radius, sigma) triples; support too sparse".into())
    })?;
    let metadata = serde_json::json!({
        "exponent_lower": lower_fit.map(|f| f.0),
        "exponent_upper": upper_fit.map(|f| f.0),
        "const_lower": lower_fit.map(|f| worst_const(&lower, f.0)),
        "const_upper": upper_fit.map(|f| worst_const(&upper, f.0)),
        "skipped_balls": skipped,
        "centers": n_centers,
        "seed": seed,
    });
    Ok(ExperimentReport::new(
        "doubling",
        grid,
        values,
        LineFit { slope: primary.0, intercept: primary.1, stderr: primary.2 },
        metadata,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use oracles::{cantor_cell_mass, cantor_lq_pow};

    #[test]
    fn middle_third_has_expected_word_count_and_mass() {
        let sys = IfsSystem::middle_third_cantor();
        let m = ifs_measure(&sys, 10, 10).unwrap();
        assert!((m.total() - 1.0).abs() < 1e-12);
        // 2^10 atoms before merging, support inside [0,1]
        let (lo, hi) = m.coord_bounds().unwrap();
        assert!(lo[0] >= 0 && hi[0] < 1 << 10);
        // depth must resolve the scale
        assert!(matches!(
            ifs_measure(&sys, 10, 5),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn single_map_gives_dirac() {
        let sys = IfsSystem::new(
            vec![Similitude { ratio: 0.5, rotation: vec![], translation: vec![0.25] }],
            vec![1.0],
        )
        .unwrap();
        // fixed point is 0.5
        let m = ifs_measure(&sys, 8, 20).unwrap();
        assert_eq!(m.nnz(), 1);
        let (coords, mass) = m.iter().next().unwrap();
        assert_eq!(coords, vec![128]);
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aligned_quarter_cantor_has_exact_dyadic_masses() {
        // {x/4, x/4 + 3/4}: cell masses are exactly 2^{-n} on surviving
        // base-4 intervals
        let sys = IfsSystem::new(
            vec![
                Similitude { ratio: 0.25, rotation: vec![], translation: vec![0.0] },
                Similitude { ratio: 0.25, rotation: vec![], translation: vec![0.75] },
            ],
            vec![0.5, 0.5],
        )
        .unwrap();
        let k = 8;
        let m = ifs_measure(&sys, k, 6).unwrap();
        for (coords, mass) in m.iter() {
            // surviving iff every base-4 digit is 0 or 3
            let mut c = coords[0];
            for _ in 0..(k / 2) {
                let digit = c & 3;
                assert!(digit == 0 || digit == 3, "cell {coords:?} should not survive");
                c >>= 2;
            }
            assert!((mass - (-(k as f64) / 2.0).exp2()).abs() < 1e-15);
        }
    }

    #[test]
    fn cantor_cell_masses_track_the_exact_recursion() {
        let k = 10;
        let m = generate(&ZooSpec::Cantor { depth: 16, scale: k }).unwrap();
        // atom placement moves at most 3^-16 of mass across each boundary;
        // compare aggregate L^2 masses against the exact CDF recursion
        let lib: f64 = m.iter().map(|(_, mass)| mass * mass).sum();
        let oracle = cantor_lq_pow(k, 2.0);
        assert!(
            (lib - oracle).abs() < 0.02 * oracle,
            "sum m^2: {lib} vs oracle {oracle}"
        );
        for (coords, mass) in m.iter().take(50) {
            let exact = cantor_cell_mass(coords[0], k);
            assert!((mass - exact).abs() < 0.15 * exact + 1e-6);
        }
    }

    #[test]
    fn lebesgue_generator_entropy() {
        let m = lebesgue(2, 5).unwrap();
        assert_eq!(m.nnz(), 1 << 10);
        assert!((m.entropy().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zoo_specs_round_trip_through_json() {
        let spec = ZooSpec::Product {
            x: Box::new(ZooSpec::Cantor { depth: 10, scale: 10 }),
            y: Box::new(ZooSpec::Lebesgue { d: 1, scale: 10 }),
            angle_degrees: 30.0,
            scale: 10,
        };
        let text = serde_json::to_string(&spec).unwrap();
        let back: ZooSpec = serde_json::from_str(&text).unwrap();
        let a = generate(&spec).unwrap();
        let b = generate(&back).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn doubling_of_lebesgue_is_one() {
        // radii small against the support (edge truncation) yet large
        // against the cell width (counting discreteness)
        let m = lebesgue(1, 14).unwrap();
        let report = doubling_check(
            &m,
            &[0.25, 0.5, 1.0],
            &[1.0 / 32.0, 1.0 / 64.0],
            24,
            3,
        )
        .unwrap();
        let exponent = report.metadata["exponent_lower"].as_f64().unwrap();
        assert!((exponent - 1.0).abs() <= 0.02, "exponent {exponent}");
    }

    #[test]
    fn doubling_of_cantor_matches_similarity_dimension() {
        let m = generate(&ZooSpec::Cantor { depth: 16, scale: 14 }).unwrap();
        let report = doubling_check(
            &m,
            &[1.0 / 9.0, 1.0 / 3.0, 1.0],
            &[1.0 / 3.0, 1.0 / 9.0],
            48,
            5,
        )
        .unwrap();
        let exponent = report.metadata["exponent_lower"].as_f64().unwrap();
        let target = 2f64.ln() / 3f64.ln();
        assert!(
            (exponent - target).abs() <= 0.05,
            "exponent {exponent} vs {target}"
        );
    }
}
