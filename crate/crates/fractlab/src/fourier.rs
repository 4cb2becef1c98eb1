//! Fourier transforms of discretized measures, large-frequency bad-set scans
//! with unit-ball covering counts, and moment quadrature.

use rustfft::num_complex::Complex64;

use crate::dyadic::DyadicMeasure;
use crate::error::{Error, Result};
use crate::par;

/// Default frequency sampling step.
pub const DEFAULT_STEP: f64 = 0.25;

/// Hard cap on the number of frequency grid points in one scan.
const GRID_BUDGET: u64 = 100_000_000;

/// Scan of the frequencies below radius `T` where the transform modulus
/// exceeds `T^{-delta}`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BadSetReport {
    /// Frequency radius T.
    pub t: f64,
    /// Decay exponent delta.
    pub delta: f64,
    /// Frequency grid step.
    pub step: f64,
    /// Threshold actually applied: `T^{-delta}` minus the Lipschitz slack
    /// `step/2 * support_radius` (floored at 0), so no unit ball containing a
    /// true bad frequency is missed at this grid resolution.
    pub threshold: f64,
    /// Grid frequencies exceeding the threshold.
    pub bad_count: u64,
    /// Distinct integer-lattice snaps of the bad frequencies: a greedy
    /// unit-ball cover (over-counting by at most 2^d).
    pub cover_count: u64,
}

/// Fourier transform at one frequency: `Σ mass * exp(-i <xi, anchor>)`,
/// accumulated with fixed-shape compensated summation.
pub fn ft(mu: &DyadicMeasure, xi: &[f64]) -> Result<Complex64> {
    if xi.len() != mu.dim() {
        return Err(Error::Input(format!(
            "frequency has {} coordinates in dimension {}",
            xi.len(),
            mu.dim()
        )));
    }
    let (anchors, masses) = mu.flat_support();
    Ok(ft_prepared(&anchors, &masses, mu.dim(), xi))
}

/// Transform evaluation over a prepared flat support (hot path for scans).
pub fn ft_prepared(anchors: &[f64], masses: &[f64], d: usize, xi: &[f64]) -> Complex64 {
    let n = masses.len();
    let re = par::tree_sum_fn(n, &|i| {
        let phase: f64 = (0..d).map(|j| xi[j] * anchors[i * d + j]).sum();
        masses[i] * phase.cos()
    });
    let im = par::tree_sum_fn(n, &|i| {
        let phase: f64 = (0..d).map(|j| xi[j] * anchors[i * d + j]).sum();
        -masses[i] * phase.sin()
    });
    Complex64::new(re, im)
}

/// Row-major multi-index grid over `{-n..=n}^d` scaled by `step`.
struct FreqGrid {
    d: usize,
    n_side: i64,
    step: f64,
    len: u64,
}

impl FreqGrid {
    fn new(d: usize, radius: f64, step: f64) -> Result<FreqGrid> {
        if !(step > 0.0) || step > 0.5 {
            return Err(Error::Parameter(format!("grid step must lie in (0, 1/2], got {step}")));
        }
        let n_side = (radius / step).floor() as i64;
        let per_axis = 2 * n_side as u64 + 1;
        let len = per_axis
            .checked_pow(d as u32)
            .filter(|&l| l <= GRID_BUDGET)
            .ok_or_else(|| {
                Error::Budget(format!(
                    "frequency grid of {per_axis}^{d} points exceeds the 10^8 budget"
                ))
            })?;
        Ok(FreqGrid { d, n_side, step, len })
    }

    fn point(&self, flat: u64, out: &mut [f64]) {
        let per_axis = 2 * self.n_side as u64 + 1;
        let mut rem = flat;
        for i in (0..self.d).rev() {
            let idx = (rem % per_axis) as i64 - self.n_side;
            rem /= per_axis;
            out[i] = idx as f64 * self.step;
        }
    }
}

/// Samples the ball of radius `T` on a grid of the given step, collects the
/// frequencies whose transform modulus beats the (slackened) threshold
/// `T^{-delta}`, and covers them greedily with radius-1 balls centered at
/// their integer snaps.
pub fn bad_set_scan(mu: &DyadicMeasure, t: f64, delta: f64, step: f64) -> Result<BadSetReport> {
    if t < 1.0 {
        return Err(Error::Parameter(format!("frequency radius T must be >= 1, got {t}")));
    }
    if delta <= 0.0 {
        return Err(Error::Parameter(format!("decay exponent must be positive, got {delta}")));
    }
    let d = mu.dim();
    let grid = FreqGrid::new(d, t, step)?;
    let (anchors, masses) = mu.flat_support();
    let radius = mu.support_radius();
    let threshold = (t.powf(-delta) - 0.5 * step * radius).max(0.0);

    let flags: Vec<Option<Vec<i64>>> = par::map_indexed(grid.len as usize, |flat| {
        let mut xi = vec![0.0; d];
        grid.point(flat as u64, &mut xi);
        let norm2: f64 = xi.iter().map(|v| v * v).sum();
        if norm2 > t * t {
            return None;
        }
        let value = ft_prepared(&anchors, &masses, d, &xi).norm();
        if value > threshold {
            Some(xi.iter().map(|v| v.round() as i64).collect())
        } else {
            None
        }
    });
    let mut bad_count = 0u64;
    let mut snapped: std::collections::BTreeSet<Vec<i64>> = Default::default();
    for f in flags.into_iter().flatten() {
        bad_count += 1;
        snapped.insert(f);
    }
    Ok(BadSetReport {
        t,
        delta,
        step,
        threshold,
        bad_count,
        cover_count: snapped.len() as u64,
    })
}

/// Midpoint-rule quadrature of `∫_{|xi| <= T} |mu_hat(xi)|^{2n} d xi`.
pub fn moment(mu: &DyadicMeasure, t: f64, n: u32, step: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Parameter("moment order must be >= 1".into()));
    }
    let d = mu.dim();
    let grid = FreqGrid::new(d, t, step)?;
    let (anchors, masses) = mu.flat_support();
    let cell = step.powi(d as i32);
    // midpoints of the step-cells whose centers lie in the ball
    let value = par::tree_sum_fn(grid.len as usize, &|flat| {
        let mut xi = vec![0.0; d];
        grid.point(flat as u64, &mut xi);
        for v in xi.iter_mut() {
            *v += 0.5 * step;
        }
        let norm2: f64 = xi.iter().map(|v| v * v).sum();
        if norm2 > t * t {
            return 0.0;
        }
        ft_prepared(&anchors, &masses, d, &xi).norm().powi(2 * n as i32)
    });
    Ok(value * cell)
}

/// Both sides of the ball-mass bound
/// `∫_{|xi| <= 1/r} |mu_hat|^2 <= C_d r^{-2d} ∫ mu(B(x,r))^2 dx`,
/// with the x-integral evaluated by quadrature on an r-net over the support.
pub fn l2_ball_bound_check(mu: &DyadicMeasure, r: f64, freq_step: f64) -> Result<(f64, f64)> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Parameter(format!("radius must lie in (0, 1], got {r}")));
    }
    let lhs = moment(mu, 1.0 / r, 1, freq_step)?;

    let d = mu.dim();
    let (anchors, masses) = mu.flat_support();
    let (lo, hi) = mu
        .coord_bounds()
        .ok_or_else(|| Error::Input("empty measure".into()))?;
    let w = mu.cell_width();
    let mins: Vec<f64> = lo.iter().map(|&c| c as f64 * w - 2.0 * r).collect();
    let maxs: Vec<f64> = hi.iter().map(|&c| c as f64 * w + 2.0 * r).collect();
    let counts: Vec<usize> = mins
        .iter()
        .zip(&maxs)
        .map(|(&a, &b)| ((b - a) / r).ceil() as usize + 1)
        .collect();
    let total: usize = counts.iter().product();
    if total as u64 > GRID_BUDGET {
        return Err(Error::Budget(format!("{total} ball centers exceed the budget")));
    }
    let integral = par::tree_sum_fn(total, &|flat| {
        let mut rem = flat;
        let mut x = vec![0.0; d];
        for i in (0..d).rev() {
            let idx = rem % counts[i];
            rem /= counts[i];
            x[i] = mins[i] + (idx as f64 + 0.5) * r;
        }
        let mut mass = 0.0;
        for (ci, m) in masses.iter().enumerate() {
            let dist2: f64 = (0..d)
                .map(|j| (anchors[ci * d + j] - x[j]).powi(2))
                .sum();
            if dist2 <= r * r {
                mass += m;
            }
        }
        mass * mass
    });
    let rhs = r.powi(-2 * (d as i32)) * integral * r.powi(d as i32);
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convolution::convolve;
    use oracles::SplitMix;

    fn lebesgue1(k: u32) -> DyadicMeasure {
        let n = 1i64 << k;
        DyadicMeasure::from_cells(1, k, (0..n).map(|c| (vec![c], 1.0 / n as f64))).unwrap()
    }

    fn random_measure(rng: &mut SplitMix, d: usize, k: u32, n: usize) -> DyadicMeasure {
        let span = 1i64 << k;
        let cells: Vec<(Vec<i64>, f64)> = (0..n)
            .map(|_| {
                let coords = (0..d).map(|_| (rng.next_f64() * span as f64) as i64).collect();
                (coords, rng.next_f64() + 1e-3)
            })
            .collect();
        DyadicMeasure::from_cells(d, k, cells).unwrap().normalized().unwrap()
    }

    #[test]
    fn ft_at_zero_is_total_mass() {
        let mut rng = SplitMix(3);
        let m = random_measure(&mut rng, 2, 6, 40);
        let v = ft(&m, &[0.0, 0.0]).unwrap();
        assert!((v.re - 1.0).abs() < 1e-14 && v.im.abs() < 1e-14);
    }

    #[test]
    fn ft_of_dirac_has_modulus_one() {
        let m = DyadicMeasure::from_cells(1, 8, vec![(vec![37], 1.0)]).unwrap();
        let mut rng = SplitMix(17);
        for _ in 0..50 {
            let xi = [rng.next_range(-100.0, 100.0)];
            assert!((ft(&m, &xi).unwrap().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ft_of_lebesgue_vanishes_at_two_pi() {
        let m = lebesgue1(12);
        let v = ft(&m, &[2.0 * std::f64::consts::PI]).unwrap();
        // oracle: closed-form geometric sum
        let oracle = oracles::lebesgue1_discrete_ft_modulus(2.0 * std::f64::consts::PI, 12);
        assert!(v.norm() <= (-10.0f64).exp2());
        assert!((v.norm() - oracle).abs() < 1e-12);
    }

    #[test]
    fn ft_matches_geometric_sum_oracle() {
        let k = 8;
        let m = lebesgue1(k);
        let mut rng = SplitMix(29);
        for _ in 0..40 {
            let xi = rng.next_range(-300.0, 300.0);
            let oracle = oracles::lebesgue1_discrete_ft_modulus(xi, k);
            assert!(
                (ft(&m, &[xi]).unwrap().norm() - oracle).abs() < 1e-10,
                "xi = {xi}"
            );
        }
    }

    #[test]
    fn modulus_bounded_by_mass_and_lipschitz() {
        let mut rng = SplitMix(41);
        let m = random_measure(&mut rng, 1, 8, 60);
        let radius = m.support_radius();
        for _ in 0..10_000 {
            let xi1 = [rng.next_range(-50.0, 50.0)];
            let xi2 = [rng.next_range(-50.0, 50.0)];
            let f1 = ft(&m, &xi1).unwrap();
            let f2 = ft(&m, &xi2).unwrap();
            assert!(f1.norm() <= 1.0 + 1e-12);
            let bound = radius * (xi1[0] - xi2[0]).abs();
            assert!((f1 - f2).norm() <= bound + 1e-12);
        }
    }

    #[test]
    fn convolution_identity_under_ft() {
        let mut rng = SplitMix(53);
        for _ in 0..100 {
            let a = random_measure(&mut rng, 1, 7, 20);
            let b = random_measure(&mut rng, 1, 7, 25);
            let c = convolve(&a, &b).unwrap();
            let xi = [rng.next_range(-40.0, 40.0)];
            let lhs = ft(&c, &xi).unwrap();
            let rhs = ft(&a, &xi).unwrap() * ft(&b, &xi).unwrap();
            assert!((lhs - rhs).norm() < 1e-10);
        }
    }

    #[test]
    fn dirac_bad_set_is_whole_grid() {
        let m = DyadicMeasure::from_cells(1, 6, vec![(vec![5], 1.0)]).unwrap();
        let t = 64.0;
        let report = bad_set_scan(&m, t, 0.5, DEFAULT_STEP).unwrap();
        let expected_grid = 2 * (t / DEFAULT_STEP) as u64 + 1;
        assert_eq!(report.bad_count, expected_grid);
        // one snap per integer in [-T, T]
        assert_eq!(report.cover_count, 2 * t as u64 + 1);
    }

    #[test]
    fn lebesgue_bad_set_matches_sinc_oracle() {
        // oracle: closed-form geometric-sum modulus evaluated on the same
        // grid with the same slackened threshold and snapping rule
        let k = 12;
        let m = lebesgue1(k);
        let t: f64 = 256.0;
        let delta = 0.5;
        let step = 1.0 / 32.0;
        let radius = 1.0 - (k as f64).exp2().recip();
        let threshold = t.powf(-delta) - 0.5 * step * radius;
        let mut oracle_bad = 0u64;
        let mut oracle_cover = std::collections::BTreeSet::new();
        let n_side = (t / step) as i64;
        for i in -n_side..=n_side {
            let xi = i as f64 * step;
            if oracles::lebesgue1_discrete_ft_modulus(xi, k) > threshold {
                oracle_bad += 1;
                oracle_cover.insert(xi.round() as i64);
            }
        }
        let report = bad_set_scan(&m, t, delta, step).unwrap();
        assert_eq!(report.bad_count, oracle_bad);
        assert_eq!(report.cover_count, oracle_cover.len() as u64);
        // the bad set concentrates near 0: far fewer covers than the Dirac
        assert!(report.cover_count < (2 * t as u64 + 1) / 4);
    }

    #[test]
    fn bad_set_monotone_in_delta() {
        // the threshold T^{-delta} decreases in delta, so the bad set can
        // only grow: smaller delta never yields a larger bad set
        let mut rng = SplitMix(61);
        let m = random_measure(&mut rng, 1, 8, 40);
        let mut previous = 0u64;
        for delta in [0.05, 0.1, 0.2, 0.4] {
            let report = bad_set_scan(&m, 64.0, delta, DEFAULT_STEP).unwrap();
            assert!(report.bad_count >= previous, "delta={delta}");
            previous = report.bad_count;
        }
    }

    #[test]
    fn budget_error_on_oversized_grid() {
        let m = DyadicMeasure::from_cells(2, 4, vec![(vec![0, 0], 1.0)]).unwrap();
        assert!(matches!(
            bad_set_scan(&m, 1e6, 0.1, 0.25),
            Err(Error::Budget(_))
        ));
    }

    #[test]
    fn moment_of_dirac_is_ball_volume() {
        let m = DyadicMeasure::from_cells(1, 4, vec![(vec![3], 1.0)]).unwrap();
        let t = 32.0;
        let v = moment(&m, t, 1, DEFAULT_STEP).unwrap();
        assert!((v - 2.0 * t).abs() <= 2.0 * DEFAULT_STEP, "{v}");
        let v2 = moment(&m, t, 3, DEFAULT_STEP).unwrap();
        assert!((v2 - 2.0 * t).abs() <= 2.0 * DEFAULT_STEP);
    }

    #[test]
    fn symmetric_measure_has_real_transform() {
        // measure symmetric about 0: anchors at +-a with equal mass
        let m = DyadicMeasure::from_cells(
            1,
            4,
            vec![(vec![-8], 0.3), (vec![8], 0.3), (vec![0], 0.4)],
        )
        .unwrap();
        let mut rng = SplitMix(71);
        for _ in 0..50 {
            let xi = [rng.next_range(-30.0, 30.0)];
            let v = ft(&m, &xi).unwrap();
            assert!(v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn l2_ball_bound_dirac_and_lebesgue() {
        // Dirac: lhs = 2/r, rhs = r^{-2} * 2r * r = 2/r in d = 1
        let dirac = DyadicMeasure::from_cells(1, 6, vec![(vec![0], 1.0)]).unwrap();
        for r in [0.25, 0.125] {
            let (lhs, rhs) = l2_ball_bound_check(&dirac, r, 0.05).unwrap();
            assert!(lhs <= 4.0 * rhs, "r={r}: lhs {lhs} rhs {rhs}");
            assert!(lhs >= rhs / 4.0);
        }
        // Lebesgue: ratio bounded over a dyadic range of radii
        let m = lebesgue1(10);
        let mut ratios = Vec::new();
        for e in 4..=8 {
            let r = (-(e as f64)).exp2();
            let (lhs, rhs) = l2_ball_bound_check(&m, r, 0.1).unwrap();
            ratios.push(lhs / rhs);
        }
        for r in &ratios {
            assert!(*r <= 4.0 && *r >= 1.0 / 16.0, "ratio {r}");
        }
    }

    #[test]
    fn cantor_bad_set_matches_product_formula_oracle() {
        // depth-16 coin-tossing atoms discretized at scale 16: the atom
        // transform has the closed product form, and snapping to the lattice
        // perturbs the modulus by at most |xi| 2^{-16}
        let depth = 16u32;
        let k = 16u32;
        let n = 1usize << depth;
        let mut atoms: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n);
        for word in 0..n {
            let mut x = 0.0;
            let mut s = 1.0 / 3.0;
            for j in 0..depth {
                if word >> j & 1 == 1 {
                    x += 2.0 * s;
                }
                s /= 3.0;
            }
            atoms.push((vec![x], 1.0 / n as f64));
        }
        let m = DyadicMeasure::discretize(&atoms, 1, k).unwrap();
        let t: f64 = 1024.0;
        // delta tuned so the slackened threshold sits near 0.3 and the
        // clusters at 2 pi 3^m become visible
        let delta = 0.12;
        let step = 0.25;
        let radius = m.support_radius();
        let threshold = t.powf(-delta) - 0.5 * step * radius;
        let report = bad_set_scan(&m, t, delta, step).unwrap();

        let mut surely_bad = 0u64;
        let mut possibly_bad = 0u64;
        let n_side = (t / step) as i64;
        let margin = |xi: f64| xi.abs() * (-(k as f64)).exp2();
        for i in -n_side..=n_side {
            let xi = i as f64 * step;
            let value = oracles::cantor_ft_modulus(xi, depth);
            if value > threshold + margin(xi) {
                surely_bad += 1;
            }
            if value > threshold - margin(xi) {
                possibly_bad += 1;
            }
        }
        assert!(
            report.bad_count >= surely_bad && report.bad_count <= possibly_bad,
            "bad count {} outside oracle bracket [{surely_bad}, {possibly_bad}]",
            report.bad_count
        );
        // the bad set clusters near 2 pi 3^m: each such frequency is bad
        for m_pow in 0..=4 {
            let xi = 2.0 * std::f64::consts::PI * 3f64.powi(m_pow);
            let value = oracles::cantor_ft_modulus(xi, depth);
            assert!(value > threshold, "2 pi 3^{m_pow} not bad: {value}");
        }
        // and the cover is far sparser than the Dirac's full cover
        assert!(report.cover_count < (2 * t as u64 + 1) / 8, "{}", report.cover_count);
    }

    #[test]
    fn moment_of_cantor_square_stays_below_pinned_bound() {
        // golden pinned at the first quadrature run: value 2.5268 at
        // T = 2^10, i.e. C = value / T^0.1 = 1.264
        let depth = 16u32;
        let n = 1usize << depth;
        let mut atoms: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n);
        for word in 0..n {
            let mut x = 0.0;
            let mut s = 1.0 / 3.0;
            for j in 0..depth {
                if word >> j & 1 == 1 {
                    x += 2.0 * s;
                }
                s /= 3.0;
            }
            atoms.push((vec![x], 1.0 / n as f64));
        }
        let m = DyadicMeasure::discretize(&atoms, 1, 13).unwrap();
        let square = convolve(&m, &m).unwrap();
        let t: f64 = 1024.0;
        let value = moment(&square, t, 2, DEFAULT_STEP).unwrap();
        assert!((value - 2.526787).abs() < 1e-3, "moment drifted: {value}");
        assert!(value <= 1.3 * t.powf(0.1), "moment {value} above pinned C T^0.1");
    }

    #[test]
    fn two_diracs_distance_one_apart() {
        let m = DyadicMeasure::from_cells(1, 4, vec![(vec![0], 0.5), (vec![16], 0.5)]).unwrap();
        let (lhs, rhs) = l2_ball_bound_check(&m, 0.25, 0.05).unwrap();
        let ratio = lhs / rhs;
        assert!(ratio.is_finite() && ratio <= 4.0, "ratio {ratio}");
    }
}
