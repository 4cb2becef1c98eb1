//! Additive-combinatorics and entropy diagnostics: additive energy, a greedy
//! BSG-style extraction, concentration/saturation checks, component-measure
//! statistics, and dyadic level-set extraction.

use std::collections::HashMap;

use crate::convolution::convolve;
use crate::dyadic::DyadicMeasure;
use crate::error::{Error, Result};
use crate::nonconc::AffineSubspace;

/// A finite set of lattice cells at a common scale: sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteSet {
    d: usize,
    k: u32,
    points: Vec<Vec<i64>>,
}

impl FiniteSet {
    pub fn new(d: usize, k: u32, mut points: Vec<Vec<i64>>) -> Result<Self> {
        if points.iter().any(|p| p.len() != d) {
            return Err(Error::Input("finite set point dimension mismatch".into()));
        }
        points.sort();
        points.dedup();
        Ok(FiniteSet { d, k, points })
    }

    /// The support cells of a measure.
    pub fn from_support(m: &DyadicMeasure) -> Self {
        let points = m.iter().map(|(c, _)| c).collect();
        FiniteSet { d: m.dim(), k: m.scale(), points }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn scale(&self) -> u32 {
        self.k
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<i64>] {
        &self.points
    }

    /// The indicator measure: unit mass on every cell.
    pub fn indicator(&self) -> Result<DyadicMeasure> {
        DyadicMeasure::from_cells(self.d, self.k, self.points.iter().map(|p| (p.clone(), 1.0)))
    }
}

fn check_same_grid(a: &FiniteSet, b: &FiniteSet) -> Result<()> {
    if a.d != b.d || a.k != b.k {
        return Err(Error::Parameter(format!(
            "sets live on different grids: d={}/{} k={}/{}",
            a.d, b.d, a.k, b.k
        )));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::Input("additive energy of an empty set".into()));
    }
    Ok(())
}

/// Representation counts of the sumset: `r(s) = #{(a,b) : a + b = s}`.
fn sumset_counts(a: &FiniteSet, b: &FiniteSet) -> HashMap<Vec<i64>, u64> {
    let mut r: HashMap<Vec<i64>, u64> = HashMap::with_capacity(a.len() + b.len());
    for x in &a.points {
        for y in &b.points {
            let s: Vec<i64> = x.iter().zip(y).map(|(p, q)| p + q).collect();
            *r.entry(s).or_insert(0) += 1;
        }
    }
    r
}

/// Exact additive energy `E(A,B) = #{(a,b,a',b') : a+b = a'+b'} = Σ_s r(s)^2`.
/// Exact integer arithmetic; counts beyond 2^63 are an error.
pub fn additive_energy(a: &FiniteSet, b: &FiniteSet) -> Result<u64> {
    check_same_grid(a, b)?;
    let r = sumset_counts(a, b);
    let mut energy: u128 = 0;
    for &count in r.values() {
        energy += (count as u128) * (count as u128);
        if energy > i64::MAX as u128 {
            return Err(Error::CountOverflow("additive energy exceeds 2^63".into()));
        }
    }
    Ok(energy as u64)
}

/// Certificate of one BSG-style extraction: the achieved density and
/// expansion ratios, with no optimality claim.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BsgCertificate {
    pub energy: u64,
    pub popular_threshold: u64,
    /// |A'| / |A|
    pub a_fraction: f64,
    /// |B'| / |B|
    pub b_fraction: f64,
    /// |A' + B'| / |A'|
    pub expansion_ratio: f64,
    pub alpha: f64,
    pub l: f64,
    pub epsilon_prime: f64,
}

/// Greedy extraction of additively structured subsets: restrict to popular
/// sums, keep the elements participating in many of them, and fall back to
/// the full sets when greediness does not improve the expansion ratio.
pub fn bsg_extract(
    a: &FiniteSet,
    b: &FiniteSet,
    alpha: f64,
    l: f64,
    epsilon_prime: f64,
) -> Result<(FiniteSet, FiniteSet, BsgCertificate)> {
    check_same_grid(a, b)?;
    if !(alpha > 0.0 && alpha <= 1.0) || l < 1.0 || epsilon_prime <= 0.0 {
        return Err(Error::Parameter(
            "bsg_extract needs 0 < alpha <= 1, L >= 1, epsilon' > 0".into(),
        ));
    }
    let energy = additive_energy(a, b)?;
    let na = a.len() as f64;
    let nb = b.len() as f64;
    if (energy as f64) < 2.0 * alpha * na * nb * nb {
        return Err(Error::Parameter(format!(
            "energy hypothesis fails: E = {energy} < 2 alpha |A||B|^2 = {}",
            2.0 * alpha * na * nb * nb
        )));
    }
    if na > l * nb {
        return Err(Error::Parameter(format!(
            "size hypothesis fails: |A| = {na} > L |B| = {}",
            l * nb
        )));
    }

    let r = sumset_counts(a, b);
    // sums carrying at least the average weighted multiplicity survive
    let tau = ((energy as f64) / (2.0 * na * nb)).ceil().max(1.0) as u64;
    let popular: std::collections::HashSet<&Vec<i64>> =
        r.iter().filter(|(_, &c)| c >= tau).map(|(s, _)| s).collect();

    let deg_a: Vec<usize> = a
        .points
        .iter()
        .map(|x| {
            b.points
                .iter()
                .filter(|y| {
                    let s: Vec<i64> = x.iter().zip(y.iter()).map(|(p, q)| p + q).collect();
                    popular.contains(&s)
                })
                .count()
        })
        .collect();
    let avg_a: f64 = deg_a.iter().sum::<usize>() as f64 / na;
    let a_prime: Vec<Vec<i64>> = a
        .points
        .iter()
        .zip(&deg_a)
        .filter(|(_, &deg)| deg as f64 >= avg_a / 2.0 && deg > 0)
        .map(|(p, _)| p.clone())
        .collect();

    let deg_b: Vec<usize> = b
        .points
        .iter()
        .map(|y| {
            a_prime
                .iter()
                .filter(|x| {
                    let s: Vec<i64> = x.iter().zip(y.iter()).map(|(p, q)| p + q).collect();
                    popular.contains(&s)
                })
                .count()
        })
        .collect();
    let avg_b: f64 = deg_b.iter().sum::<usize>() as f64 / nb;
    let b_prime: Vec<Vec<i64>> = b
        .points
        .iter()
        .zip(&deg_b)
        .filter(|(_, &deg)| deg as f64 >= avg_b / 2.0 && deg > 0)
        .map(|(p, _)| p.clone())
        .collect();

    let (a_out, b_out) = if a_prime.is_empty() || b_prime.is_empty() {
        (a.points.clone(), b.points.clone())
    } else {
        (a_prime, b_prime)
    };
    let a_out = FiniteSet::new(a.d, a.k, a_out)?;
    let b_out = FiniteSet::new(b.d, b.k, b_out)?;

    let expansion = |sa: &FiniteSet, sb: &FiniteSet| -> f64 {
        sumset_counts(sa, sb).len() as f64 / sa.len() as f64
    };
    // keep the extraction only if it beats the trivial certificate
    let (a_out, b_out) = if expansion(&a_out, &b_out) <= expansion(a, b) {
        (a_out, b_out)
    } else {
        (a.clone(), b.clone())
    };

    let certificate = BsgCertificate {
        energy,
        popular_threshold: tau,
        a_fraction: a_out.len() as f64 / na,
        b_fraction: b_out.len() as f64 / nb,
        expansion_ratio: expansion(&a_out, &b_out),
        alpha,
        l,
        epsilon_prime,
    };
    Ok((a_out, b_out, certificate))
}

/// Orthonormal basis of the orthogonal complement of the span of `basis`.
fn orthocomplement(d: usize, basis: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut frame: Vec<Vec<f64>> = basis.to_vec();
    let mut complement = Vec::new();
    for axis in 0..d {
        let mut e = vec![0.0; d];
        e[axis] = 1.0;
        for f in &frame {
            let dot: f64 = e.iter().zip(f).map(|(a, b)| a * b).sum();
            for (ei, fi) in e.iter_mut().zip(f) {
                *ei -= dot * fi;
            }
        }
        let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-9 {
            let u: Vec<f64> = e.iter().map(|v| v / norm).collect();
            frame.push(u.clone());
            complement.push(u);
        }
        if frame.len() == d {
            break;
        }
    }
    complement
}

/// True iff some translate `L` of the subspace `V` has
/// `nu(L^{(eps)}) > 1 - eps`. The translate search projects the support onto
/// the orthocomplement of `V` and slides a `2 eps` window (codimension 1
/// exactly, higher codimension over anchor-centered balls).
pub fn concentration_check(nu: &DyadicMeasure, v: &AffineSubspace, eps: f64) -> Result<bool> {
    if !nu.is_probability() {
        return Err(Error::Parameter("concentration_check needs a probability measure".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::Parameter("epsilon must be positive".into()));
    }
    let d = nu.dim();
    if v.ambient_dim() != d {
        return Err(Error::Input("subspace dimension mismatch".into()));
    }
    let complement = orthocomplement(d, v.basis());
    let c = complement.len();
    if c == 0 {
        return Ok(true); // V = R^d up to numerical rank
    }
    let (anchors, masses) = nu.flat_support();
    let n = masses.len();
    let project = |i: usize| -> Vec<f64> {
        complement
            .iter()
            .map(|u| (0..d).map(|j| anchors[i * d + j] * u[j]).sum())
            .collect()
    };
    if c == 1 {
        let mut t: Vec<(f64, f64)> = (0..n).map(|i| (project(i)[0], masses[i])).collect();
        t.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let mut best = 0.0f64;
        let mut right = 0usize;
        let mut window = 0.0f64;
        for left in 0..n {
            if left > 0 {
                window -= t[left - 1].1;
            }
            if right < left {
                right = left;
                window = 0.0;
            }
            while right < n && t[right].0 <= t[left].0 + 2.0 * eps {
                window += t[right].1;
                right += 1;
            }
            best = best.max(window);
        }
        Ok(best > 1.0 - eps)
    } else {
        let projected: Vec<Vec<f64>> = (0..n).map(project).collect();
        for center in &projected {
            let mut mass = 0.0;
            for (p, m) in projected.iter().zip(&masses) {
                let dist2: f64 = p.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                if dist2 <= eps * eps {
                    mass += m;
                }
            }
            if mass > 1.0 - eps {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Entropy gap `H_m(nu) - H_m(pi_W nu)` with `W` the orthocomplement of `V`
/// and the pushforward re-discretized at scale `m`.
pub fn saturation_gap(nu: &DyadicMeasure, v: &AffineSubspace, m: u32) -> Result<f64> {
    if m == 0 || m > nu.scale() {
        return Err(Error::Parameter(format!(
            "saturation scale must satisfy 1 <= m <= {}, got {m}",
            nu.scale()
        )));
    }
    if !nu.is_probability() {
        return Err(Error::Parameter("saturation_check needs a probability measure".into()));
    }
    let d = nu.dim();
    if v.ambient_dim() != d {
        return Err(Error::Input("subspace dimension mismatch".into()));
    }
    let h_nu = nu.coarsen(m)?.entropy()?;
    let complement = orthocomplement(d, v.basis());
    let c = complement.len();
    if c == 0 {
        // V is everything: the projection is a point, entropy 0
        return Ok(h_nu);
    }
    let (anchors, masses) = nu.flat_support();
    let atoms: Vec<(Vec<f64>, f64)> = (0..masses.len())
        .map(|i| {
            let p: Vec<f64> = complement
                .iter()
                .map(|u| (0..d).map(|j| anchors[i * d + j] * u[j]).sum())
                .collect();
            (p, masses[i])
        })
        .collect();
    let pushed = DyadicMeasure::discretize(&atoms, c, m)?;
    Ok(h_nu - pushed.entropy()?)
}

/// `(V, eps, m)`-saturation: `H_m(nu) >= H_m(pi_W nu) + dim V - eps`.
pub fn saturation_check(
    nu: &DyadicMeasure,
    v: &AffineSubspace,
    eps: f64,
    m: u32,
) -> Result<bool> {
    let gap = saturation_gap(nu, v, m)?;
    Ok(gap >= v.subspace_dim() as f64 - eps)
}

/// Component-measure statistics: the mass-weighted fraction of scale/cell
/// pairs `(i r, z)` for `i in 0..=k` whose component measure satisfies the
/// predicate. Cell sampling is exhaustive and mass weighted.
pub fn component_prob<P>(nu: &DyadicMeasure, k: u32, r: u32, predicate: P) -> Result<f64>
where
    P: Fn(&DyadicMeasure) -> bool,
{
    if r == 0 {
        return Err(Error::Parameter("component stride must be >= 1".into()));
    }
    if k * r > nu.scale() {
        return Err(Error::Parameter(format!(
            "component scales reach {} but the measure lives at scale {}",
            k * r,
            nu.scale()
        )));
    }
    if !nu.is_probability() {
        return Err(Error::Parameter("component_prob needs a probability measure".into()));
    }
    let mut fraction = 0.0;
    for i in 0..=k {
        let scale = i * r;
        // one pass: bucket the fine cells by their coarse ancestor
        let shift = nu.scale() - scale;
        let mut buckets: std::collections::BTreeMap<u64, Vec<(u64, f64)>> = Default::default();
        for (coords, mass) in nu.iter() {
            let coarse: Vec<i64> = coords.iter().map(|&c| c >> shift).collect();
            let local: Vec<i64> =
                coords.iter().zip(&coarse).map(|(&c, &cc)| c - (cc << shift)).collect();
            buckets
                .entry(nu.pack(&coarse)?)
                .or_default()
                .push((nu.pack(&local)?, mass));
        }
        for cells in buckets.values() {
            let total: f64 = cells.iter().map(|&(_, m)| m).sum();
            let map: std::collections::BTreeMap<u64, f64> =
                cells.iter().map(|&(key, m)| (key, m / total)).collect();
            let component = DyadicMeasure::from_packed(nu.dim(), shift, map);
            if predicate(&component) {
                fraction += total;
            }
        }
    }
    Ok(fraction / (k + 1) as f64)
}

/// Output of the dyadic level-set extraction.
#[derive(Debug, Clone)]
pub struct LevelSets {
    pub a: FiniteSet,
    pub b: FiniteSet,
    pub j: i64,
    pub j_prime: i64,
    /// `|1_A * 1_B|_2^2` of the returned sets.
    pub energy: u64,
    /// The bound `2^{-4 eta l} |A| |B|^2` it was checked against.
    pub energy_bound: f64,
    /// `|nu restricted to A|_2 / |nu|_2`.
    pub a_norm_fraction: f64,
    /// `mu(B)`.
    pub b_mass: f64,
}

/// Pigeonhole search over dyadic mass levels: finds the first `(j, j')` in
/// lexicographic order whose level sets
/// `A = {x : 2^{-j-1} |nu|_2^2 < nu(x) <= 2^{-j} |nu|_2^2}` and
/// `B = {x : 2^{-j'-1-dl} < mu(x) <= 2^{-j'-dl}}` satisfy the three
/// expansion conclusions. Levels run from `-dl` (masses up to 1) through
/// `floor(4 eta l)`.
pub fn level_sets(nu: &DyadicMeasure, mu: &DyadicMeasure, eta: f64) -> Result<LevelSets> {
    if nu.dim() != mu.dim() || nu.scale() != mu.scale() {
        return Err(Error::Parameter("level_sets needs measures on one grid".into()));
    }
    if !(eta > 0.0) {
        return Err(Error::Parameter("eta must be positive".into()));
    }
    if !nu.is_probability() || !mu.is_probability() {
        return Err(Error::Parameter("level_sets needs probability measures".into()));
    }
    let l = nu.scale() as f64;
    let d = nu.dim() as f64;
    let nu_l2_sq: f64 = nu.iter().map(|(_, m)| m * m).sum();
    let nu_l2 = nu_l2_sq.sqrt();

    let conv = convolve(mu, nu)?;
    let conv_l2: f64 = conv.iter().map(|(_, m)| m * m).sum::<f64>().sqrt();
    let hypothesis = (-eta * l).exp2() * nu_l2;

    let j_max = (4.0 * eta * l).floor() as i64;
    let j_min = -((d * l).ceil() as i64) - 1;
    for j in j_min..=j_max {
        let lo_a = (-(j as f64) - 1.0).exp2() * nu_l2_sq;
        let hi_a = (-(j as f64)).exp2() * nu_l2_sq;
        let a_points: Vec<Vec<i64>> = nu
            .iter()
            .filter(|&(_, m)| m > lo_a && m <= hi_a)
            .map(|(c, _)| c)
            .collect();
        if a_points.is_empty() {
            continue;
        }
        let a = FiniteSet::new(nu.dim(), nu.scale(), a_points)?;
        let a_norm_sq: f64 = nu
            .iter()
            .filter(|&(_, m)| m > lo_a && m <= hi_a)
            .map(|(_, m)| m * m)
            .sum();
        if a_norm_sq.sqrt() < (-2.0 * eta * l).exp2() * nu_l2 {
            continue;
        }
        for j_prime in j_min..=j_max {
            let lo_b = (-(j_prime as f64) - 1.0 - d * l).exp2();
            let hi_b = (-(j_prime as f64) - d * l).exp2();
            let b_points: Vec<Vec<i64>> = mu
                .iter()
                .filter(|&(_, m)| m > lo_b && m <= hi_b)
                .map(|(c, _)| c)
                .collect();
            if b_points.is_empty() {
                continue;
            }
            let b_mass: f64 = mu
                .iter()
                .filter(|&(_, m)| m > lo_b && m <= hi_b)
                .map(|(_, m)| m)
                .sum();
            if b_mass < (-2.0 * eta * l).exp2() {
                continue;
            }
            let b = FiniteSet::new(mu.dim(), mu.scale(), b_points)?;
            let energy = additive_energy(&a, &b)?;
            let bound =
                (-4.0 * eta * l).exp2() * a.len() as f64 * (b.len() as f64).powi(2);
            if (energy as f64) >= bound {
                return Ok(LevelSets {
                    j,
                    j_prime,
                    energy,
                    energy_bound: bound,
                    a_norm_fraction: a_norm_sq.sqrt() / nu_l2,
                    b_mass,
                    a,
                    b,
                });
            }
        }
    }
    Err(Error::LemmaPrecondition(format!(
        "no level pair satisfies the expansion conclusions \
         (|mu*nu|_2 = {conv_l2:.3e} vs hypothesis 2^(-eta l) |nu|_2 = {hypothesis:.3e})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use oracles::{additive_energy_brute, small_subsets, SplitMix};

    fn set1(points: &[i64]) -> FiniteSet {
        FiniteSet::new(1, 4, points.iter().map(|&p| vec![p]).collect()).unwrap()
    }

    #[test]
    fn energy_matches_brute_force_examples() {
        let a = set1(&[0, 1]);
        assert_eq!(additive_energy(&a, &a).unwrap(), 6);
        let b = set1(&[0, 1, 2]);
        assert_eq!(additive_energy(&b, &b).unwrap(), 19);
        // A = {0}: r(s) = 1 for each b, so E = |B|
        let dirac = set1(&[0]);
        assert_eq!(additive_energy(&dirac, &b).unwrap(), 3);
    }

    #[test]
    fn energy_exhaustive_small_sets_against_brute_force() {
        let subsets = small_subsets(8, 5);
        for a_pts in &subsets {
            let a = FiniteSet::new(1, 0, a_pts.clone()).unwrap();
            for b_pts in &subsets {
                let b = FiniteSet::new(1, 0, b_pts.clone()).unwrap();
                let fast = additive_energy(&a, &b).unwrap();
                let brute = additive_energy_brute(a_pts, b_pts);
                assert_eq!(fast, brute, "A={a_pts:?} B={b_pts:?}");
                // sandwich bounds
                let na = a_pts.len() as u64;
                let nb = b_pts.len() as u64;
                let sumset = sumset_counts(&a, &b).len() as u64;
                assert!(fast * sumset >= na * nb * na * nb);
                assert!(fast <= na.min(nb) * na * nb);
            }
        }
    }

    #[test]
    fn energy_agrees_with_indicator_convolution() {
        let mut rng = SplitMix(31);
        for _ in 0..20 {
            let pts: Vec<Vec<i64>> = (0..(2 + rng.next_u64() % 20))
                .map(|_| vec![(rng.next_f64() * 60.0) as i64])
                .collect();
            let qts: Vec<Vec<i64>> = (0..(2 + rng.next_u64() % 20))
                .map(|_| vec![(rng.next_f64() * 60.0) as i64])
                .collect();
            let a = FiniteSet::new(1, 6, pts).unwrap();
            let b = FiniteSet::new(1, 6, qts).unwrap();
            let conv = convolve(&a.indicator().unwrap(), &b.indicator().unwrap()).unwrap();
            let through_conv: f64 = conv.iter().map(|(_, m)| m * m).sum();
            assert_eq!(through_conv, additive_energy(&a, &b).unwrap() as f64);
        }
    }

    #[test]
    fn bsg_on_progressions_keeps_structure() {
        let n = 32i64;
        let prog = set1(&(0..n).collect::<Vec<_>>());
        let (a2, b2, cert) = bsg_extract(&prog, &prog, 0.25, 1.0, 0.1).unwrap();
        assert!(cert.expansion_ratio <= 2.0, "{cert:?}");
        assert!(!a2.is_empty() && !b2.is_empty());
    }

    #[test]
    fn bsg_dirac_is_trivial() {
        let dirac = set1(&[0]);
        let b = set1(&[0, 1, 2, 3]);
        // E = |B| = 4 >= 2 alpha |A||B|^2 = 32 alpha needs alpha <= 1/8
        let (a2, b2, cert) = bsg_extract(&dirac, &b, 0.125, 1.0, 0.1).unwrap();
        assert_eq!(a2.len(), 1);
        assert_eq!(b2.len(), 4);
        assert!(cert.a_fraction == 1.0 && cert.b_fraction == 1.0);
    }

    #[test]
    fn bsg_drops_far_random_points() {
        // progression plus far scattered noise vs progression
        let n = 24i64;
        let mut a_pts: Vec<i64> = (0..n).collect();
        let mut rng = SplitMix(77);
        for _ in 0..6 {
            a_pts.push(1000 + (rng.next_f64() * 4000.0) as i64 * 7);
        }
        let a = set1(&a_pts);
        let b = set1(&(0..n).collect::<Vec<_>>());
        let energy = additive_energy(&a, &b).unwrap() as f64;
        let alpha = energy / (2.0 * a.len() as f64 * (b.len() as f64).powi(2));
        let (a2, _b2, cert) =
            bsg_extract(&a, &b, alpha * 0.9, a.len() as f64 / b.len() as f64 + 1.0, 0.1)
                .unwrap();
        assert!(cert.expansion_ratio <= 4.0, "{cert:?}");
        // the far points do not participate in popular sums
        assert!(a2.points().iter().all(|p| p[0] < 1000), "{:?}", a2.points());
    }

    #[test]
    fn bsg_rejects_failed_preconditions() {
        let a = set1(&[0, 5, 11, 19]);
        let b = set1(&[0, 1]);
        assert!(matches!(
            bsg_extract(&a, &b, 1.0, 1.0, 0.1),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            bsg_extract(&a, &b, 0.01, 1.0, 0.1),
            Err(Error::Parameter(_))
        ));
    }

    fn lebesgue2(k: u32) -> DyadicMeasure {
        let n = 1i64 << k;
        let m = 1.0 / (n * n) as f64;
        DyadicMeasure::from_cells(2, k, (0..n).flat_map(|a| (0..n).map(move |b| (vec![a, b], m))))
            .unwrap()
    }

    fn y_axis() -> AffineSubspace {
        AffineSubspace::linear(2, vec![vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn concentration_of_vertical_segment() {
        // mass on a vertical segment: concentrated near the y-axis translate
        let atoms: Vec<(Vec<f64>, f64)> =
            (0..256).map(|i| (vec![0.37, i as f64 / 256.0], 1.0 / 256.0)).collect();
        let m = DyadicMeasure::discretize(&atoms, 2, 8).unwrap();
        for eps in [0.01, 0.1, 0.5] {
            assert!(concentration_check(&m, &y_axis(), eps).unwrap());
        }
    }

    #[test]
    fn concentration_lebesgue_is_false_at_small_eps() {
        let m = lebesgue2(7);
        assert!(!concentration_check(&m, &y_axis(), 0.01).unwrap());
    }

    #[test]
    fn concentration_two_heavy_lines() {
        // two parallel vertical lines at distance 1/2
        let mut atoms: Vec<(Vec<f64>, f64)> = Vec::new();
        for i in 0..128 {
            atoms.push((vec![0.25, i as f64 / 128.0], 0.5 / 128.0));
            atoms.push((vec![0.75, i as f64 / 128.0], 0.5 / 128.0));
        }
        let m = DyadicMeasure::discretize(&atoms, 2, 8).unwrap();
        assert!(!concentration_check(&m, &y_axis(), 0.1).unwrap());
        assert!(concentration_check(&m, &y_axis(), 0.6).unwrap());
    }

    #[test]
    fn concentration_monotone_in_eps() {
        let mut rng = SplitMix(41);
        let cells: Vec<(Vec<i64>, f64)> = (0..60)
            .map(|_| {
                (
                    vec![(rng.next_f64() * 128.0) as i64, (rng.next_f64() * 128.0) as i64],
                    rng.next_f64() + 0.01,
                )
            })
            .collect();
        let m = DyadicMeasure::from_cells(2, 7, cells).unwrap().normalized().unwrap();
        let mut prev = false;
        for eps in [0.05, 0.1, 0.2, 0.4, 0.8] {
            let now = concentration_check(&m, &y_axis(), eps).unwrap();
            assert!(!prev || now, "concentration lost at eps={eps}");
            prev = now;
        }
    }

    #[test]
    fn saturation_trivial_cases() {
        let m = lebesgue2(8);
        assert!(saturation_check(&m, &y_axis(), 0.1, 6).unwrap());

        let dirac = DyadicMeasure::from_cells(2, 6, vec![(vec![9, 9], 1.0)]).unwrap();
        let zero = AffineSubspace::linear(2, vec![]).unwrap();
        assert!(saturation_check(&dirac, &zero, 0.05, 4).unwrap());

        // saturation with V = {0} reduces to H >= H - eps: always true
        let mut rng = SplitMix(5);
        for _ in 0..10 {
            let cells: Vec<(Vec<i64>, f64)> = (0..40)
                .map(|_| {
                    (
                        vec![(rng.next_f64() * 64.0) as i64, (rng.next_f64() * 64.0) as i64],
                        rng.next_f64() + 0.01,
                    )
                })
                .collect();
            let m = DyadicMeasure::from_cells(2, 6, cells).unwrap().normalized().unwrap();
            assert!(saturation_check(&m, &zero, 0.01, 4).unwrap());
        }
    }

    #[test]
    fn saturation_fails_across_the_normal_of_a_line() {
        // horizontal line measure, V = vertical direction: the projection to
        // the horizontal axis keeps all the entropy, so the gap is ~0 < 1-eps
        let atoms: Vec<(Vec<f64>, f64)> =
            (0..512).map(|i| (vec![i as f64 / 512.0, 0.5], 1.0 / 512.0)).collect();
        let m = DyadicMeasure::discretize(&atoms, 2, 9).unwrap();
        assert!(!saturation_check(&m, &y_axis(), 0.5, 6).unwrap());
    }

    #[test]
    fn component_prob_trivial_predicates() {
        let m = lebesgue2(8);
        assert_eq!(component_prob(&m, 3, 2, |_| true).unwrap(), 1.0);
        let f = component_prob(&m, 3, 2, |c| {
            c.entropy().map(|h| h >= 2.0 - 0.01).unwrap_or(false)
        })
        .unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn level_sets_on_uniform_and_dirac() {
        let l = 8;
        let n = 1i64 << l;
        let uniform = DyadicMeasure::from_cells(
            1,
            l,
            (0..n).map(|c| (vec![c], 1.0 / n as f64)),
        )
        .unwrap();
        let out = level_sets(&uniform, &uniform, 0.2).unwrap();
        assert_eq!((out.j, out.j_prime), (0, 0));
        assert_eq!(out.a.len(), n as usize);
        assert_eq!(out.b.len(), n as usize);

        let dirac = DyadicMeasure::from_cells(1, 4, vec![(vec![3], 1.0)]).unwrap();
        let out = level_sets(&dirac, &dirac, 0.2).unwrap();
        assert_eq!(out.a.len(), 1);
        assert_eq!(out.b.len(), 1);
        assert_eq!(out.j, 0);
        // the Dirac's mass 1 sits d*l levels above the uniform bucket
        assert_eq!(out.j_prime, -(dirac.scale() as i64));
        assert_eq!(out.energy, 1);
    }
}
