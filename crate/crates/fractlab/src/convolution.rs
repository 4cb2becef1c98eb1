//! Lattice convolution of discretized measures, self-convolution powers, and
//! the flattening experiment.
//!
//! Two interchangeable paths compute `(mu * nu)(c) = Σ_{a+b=c} mu(a) nu(b)`:
//! direct sparse accumulation, and a real-to-complex FFT on the padded dense
//! bounding window. The direct path is exact up to summation order; the
//! transform path clamps ringing below 1e-14 of the output mass and
//! renormalizes so the total equals `mu.total * nu.total`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::dyadic::{dim_fit, DimEstimate, DyadicMeasure, LqExponent};
use crate::error::{Error, Result};
use crate::par;

/// Default nnz-product threshold below which the direct path runs.
pub const DIRECT_NNZ_PRODUCT: u64 = 1 << 26;

/// Hard cap on the padded dense window used by the transform path.
const FFT_WINDOW_BUDGET: usize = 1 << 24;

/// Relative level (of total output mass) below which transform-path values
/// are treated as ringing and dropped.
const RINGING_LEVEL: f64 = 1e-14;

/// Result of one self-convolution flattening experiment.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FlatteningReport {
    /// None encodes q = infinity.
    pub q: Option<f64>,
    pub n_values: Vec<u32>,
    pub dims: Vec<DimEstimate>,
    /// Measured per-step L^2 contraction exponents at the top scale of the
    /// window: `eta_hat[n] = -(1/K) log2(|mu_K^{*n}|_2 / |mu_K^{*(n-1)}|_2)`.
    pub eta_hat: Vec<f64>,
}

fn check_compatible(a: &DyadicMeasure, b: &DyadicMeasure) -> Result<()> {
    if a.dim() != b.dim() || a.scale() != b.scale() {
        return Err(Error::Parameter(format!(
            "convolution needs matching dimension and scale, got d={}/{} k={}/{}",
            a.dim(),
            b.dim(),
            a.scale(),
            b.scale()
        )));
    }
    Ok(())
}

/// Lattice convolution, choosing the direct path when `nnz(a) * nnz(b)` is
/// at most `threshold` and the dense transform path otherwise.
pub fn convolve_with_threshold(
    a: &DyadicMeasure,
    b: &DyadicMeasure,
    threshold: u64,
) -> Result<DyadicMeasure> {
    check_compatible(a, b)?;
    let products = a.nnz() as u64 * b.nnz() as u64;
    if products <= threshold {
        convolve_direct(a, b)
    } else {
        convolve_fft(a, b)
    }
}

/// Lattice convolution with the default path threshold.
pub fn convolve(a: &DyadicMeasure, b: &DyadicMeasure) -> Result<DyadicMeasure> {
    convolve_with_threshold(a, b, DIRECT_NNZ_PRODUCT)
}

/// Direct sparse accumulation. Exact products, fixed accumulation order.
pub fn convolve_direct(a: &DyadicMeasure, b: &DyadicMeasure) -> Result<DyadicMeasure> {
    check_compatible(a, b)?;
    let d = a.dim();
    let mut out: BTreeMap<u64, f64> = BTreeMap::new();
    let mut ca = vec![0i64; d];
    let mut cb = vec![0i64; d];
    let mut sum = vec![0i64; d];
    for (&ka, &ma) in a.packed() {
        a.unpack(ka, &mut ca);
        for (&kb, &mb) in b.packed() {
            b.unpack(kb, &mut cb);
            for i in 0..d {
                sum[i] = ca[i] + cb[i];
            }
            *out.entry(a.pack(&sum)?).or_insert(0.0) += ma * mb;
        }
    }
    Ok(DyadicMeasure::from_packed(d, a.scale(), out))
}

/// Transform path: zero-padded dense window, real-to-complex FFT along the
/// last axis, complex FFTs along the others.
pub fn convolve_fft(a: &DyadicMeasure, b: &DyadicMeasure) -> Result<DyadicMeasure> {
    check_compatible(a, b)?;
    let d = a.dim();
    let (alo, ahi) = a
        .coord_bounds()
        .ok_or_else(|| Error::Input("cannot convolve an empty measure".into()))?;
    let (blo, bhi) = b
        .coord_bounds()
        .ok_or_else(|| Error::Input("cannot convolve an empty measure".into()))?;

    let mut dims = Vec::with_capacity(d);
    for i in 0..d {
        let need = (ahi[i] - alo[i] + 1) + (bhi[i] - blo[i] + 1) - 1;
        dims.push((need as usize).next_power_of_two());
    }
    let n_total: usize = dims.iter().product();
    if n_total > FFT_WINDOW_BUDGET {
        return Err(Error::Budget(format!(
            "transform window of {n_total} cells exceeds the {FFT_WINDOW_BUDGET} budget"
        )));
    }

    let grid_a = densify(a, &alo, &dims);
    let grid_b = densify(b, &blo, &dims);
    let mut spec_a = forward(&grid_a, &dims)?;
    let spec_b = forward(&grid_b, &dims)?;
    for (sa, sb) in spec_a.iter_mut().zip(&spec_b) {
        *sa *= *sb;
    }
    let values = inverse(spec_a, &dims)?;

    let target_total = a.total() * b.total();
    let floor = RINGING_LEVEL * target_total;
    let mut out: BTreeMap<u64, f64> = BTreeMap::new();
    let mut kept_sum = Vec::new();
    let mut coords = vec![0i64; d];
    for (flat, &v) in values.iter().enumerate() {
        if v <= floor {
            continue;
        }
        let mut rem = flat;
        for i in (0..d).rev() {
            coords[i] = (rem % dims[i]) as i64 + alo[i] + blo[i];
            rem /= dims[i];
        }
        out.insert(a.pack(&coords)?, v);
        kept_sum.push(v);
    }
    if out.is_empty() {
        return Err(Error::Convergence("transform path produced an empty measure".into()));
    }
    let kept = par::tree_sum(&kept_sum);
    let correction = target_total / kept;
    for v in out.values_mut() {
        *v *= correction;
    }
    Ok(DyadicMeasure::from_packed(d, a.scale(), out))
}

fn densify(m: &DyadicMeasure, lo: &[i64], dims: &[usize]) -> Vec<f64> {
    let d = m.dim();
    let n: usize = dims.iter().product();
    let mut grid = vec![0.0; n];
    let mut coords = vec![0i64; d];
    for (&key, &mass) in m.packed() {
        m.unpack(key, &mut coords);
        let mut flat = 0usize;
        for i in 0..d {
            flat = flat * dims[i] + (coords[i] - lo[i]) as usize;
        }
        grid[flat] = mass;
    }
    grid
}

/// Real-to-complex forward transform of a row-major dense array: r2c along
/// the last axis, complex FFT along every other axis. Returns the half
/// spectrum of shape `dims[..last] x (dims[last]/2 + 1)`.
fn forward(grid: &[f64], dims: &[usize]) -> Result<Vec<Complex64>> {
    let d = dims.len();
    let last = dims[d - 1];
    let half = last / 2 + 1;
    let rows: usize = dims[..d - 1].iter().product();

    let mut real_planner = realfft::RealFftPlanner::<f64>::new();
    let r2c = real_planner.plan_fft_forward(last);
    let spec_rows: Vec<Vec<Complex64>> = par::map_indexed(rows, |r| {
        let mut input = grid[r * last..(r + 1) * last].to_vec();
        let mut out = r2c.make_output_vec();
        r2c.process(&mut input, &mut out).expect("realfft forward");
        out
    });
    let mut spec: Vec<Complex64> = spec_rows.into_iter().flatten().collect();

    let mut cdims: Vec<usize> = dims.to_vec();
    cdims[d - 1] = half;
    fft_all_but_last(&mut spec, &cdims, rustfft::FftDirection::Forward);
    Ok(spec)
}

fn inverse(mut spec: Vec<Complex64>, dims: &[usize]) -> Result<Vec<f64>> {
    let d = dims.len();
    let last = dims[d - 1];
    let half = last / 2 + 1;
    let rows: usize = dims[..d - 1].iter().product();

    let mut cdims: Vec<usize> = dims.to_vec();
    cdims[d - 1] = half;
    fft_all_but_last(&mut spec, &cdims, rustfft::FftDirection::Inverse);

    let mut real_planner = realfft::RealFftPlanner::<f64>::new();
    let c2r = real_planner.plan_fft_inverse(last);
    let scale = 1.0 / dims.iter().product::<usize>() as f64;
    let row_out: Vec<Vec<f64>> = par::map_indexed(rows, |r| {
        let mut input = spec[r * half..(r + 1) * half].to_vec();
        let mut out = c2r.make_output_vec();
        // DC/Nyquist bins may carry imaginary dust after the cross-axis FFTs
        input[0].im = 0.0;
        if last % 2 == 0 {
            input[half - 1].im = 0.0;
        }
        c2r.process(&mut input, &mut out).expect("realfft inverse");
        for v in &mut out {
            *v *= scale;
        }
        out
    });
    Ok(row_out.into_iter().flatten().collect())
}

/// In-place complex FFTs along every axis except the last of a row-major
/// array with extents `cdims`.
fn fft_all_but_last(data: &mut [Complex64], cdims: &[usize], dir: rustfft::FftDirection) {
    let d = cdims.len();
    if d == 1 {
        return;
    }
    let mut planner = FftPlanner::new();
    let plans: Vec<Arc<dyn rustfft::Fft<f64>>> =
        cdims[..d - 1].iter().map(|&n| planner.plan_fft(n, dir)).collect();
    let total: usize = cdims.iter().product();
    for axis in 0..d - 1 {
        let n = cdims[axis];
        let stride: usize = cdims[axis + 1..].iter().product();
        let block = n * stride;
        let n_lines = total / n;
        let fft = &plans[axis];
        let lines: Vec<(usize, Vec<Complex64>)> = par::map_indexed(n_lines, |li| {
            let outer = li / stride;
            let inner = li % stride;
            let base = outer * block + inner;
            let mut line: Vec<Complex64> =
                (0..n).map(|j| data[base + j * stride]).collect();
            fft.process(&mut line);
            (base, line)
        });
        for (base, line) in lines {
            for (j, v) in line.into_iter().enumerate() {
                data[base + j * stride] = v;
            }
        }
    }
}

/// `mu^{*n}`: repeated squaring when `n` is a power of two, sequential
/// convolution otherwise. The lattice scale is left untouched, so the
/// support diameter grows n-fold.
pub fn self_power(mu: &DyadicMeasure, n: u32) -> Result<DyadicMeasure> {
    if n == 0 {
        return Err(Error::Parameter("self-convolution power must be >= 1".into()));
    }
    mu.lq_pow(LqExponent::Finite(2.0)).map_err(|_| {
        Error::Parameter("self_power requires a probability measure".into())
    })?;
    if n == 1 {
        return Ok(mu.clone());
    }
    if n.is_power_of_two() {
        let mut acc = mu.clone();
        let mut steps = n.trailing_zeros();
        while steps > 0 {
            acc = convolve(&acc, &acc)?;
            steps -= 1;
        }
        Ok(acc)
    } else {
        let mut acc = mu.clone();
        for _ in 1..n {
            acc = convolve(&acc, mu)?;
        }
        Ok(acc)
    }
}

/// Ratio `|(mu*nu)_k|_q / |mu_k * nu_k|_q`: the numerator discretizes after
/// convolving the atoms exactly, the denominator convolves the
/// discretizations. Convolution and discretization essentially commute, so
/// the ratio stays within dimension-dependent constants of 1.
pub fn commute_check(
    mu_atoms: &[(Vec<f64>, f64)],
    nu_atoms: &[(Vec<f64>, f64)],
    d: usize,
    k: u32,
    q: LqExponent,
) -> Result<f64> {
    for atoms in [mu_atoms, nu_atoms] {
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!(
                "commute_check requires probability atom lists, total {total}"
            )));
        }
    }
    let pairs = mu_atoms.len() as u64 * nu_atoms.len() as u64;
    if pairs > 100_000_000 {
        return Err(Error::Budget(format!("{pairs} atom pairs exceed the budget")));
    }
    let mut conv_atoms = Vec::with_capacity(pairs as usize);
    for (x, wx) in mu_atoms {
        for (y, wy) in nu_atoms {
            let pt: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
            conv_atoms.push((pt, wx * wy));
        }
    }
    let numerator = DyadicMeasure::discretize(&conv_atoms, d, k)?
        .normalized()?
        .lq_norm(q)?;
    let mu_k = DyadicMeasure::discretize(mu_atoms, d, k)?.normalized()?;
    let nu_k = DyadicMeasure::discretize(nu_atoms, d, k)?.normalized()?;
    let denominator = convolve(&mu_k, &nu_k)?.normalized()?.lq_norm(q)?;
    Ok(numerator / denominator)
}

/// Runs the flattening experiment: dimension fits of `mu^{*n}` over a scale
/// window for each `n <= n_max`, plus the measured per-step L^2 contraction
/// exponents at the top scale.
pub fn flattening_experiment<G>(
    generator: G,
    q: LqExponent,
    scales: (u32, u32),
    n_max: u32,
) -> Result<FlatteningReport>
where
    G: Fn(u32) -> Result<DyadicMeasure>,
{
    if n_max == 0 {
        return Err(Error::Parameter("flattening experiment needs n_max >= 1".into()));
    }
    if scales.0 > scales.1 {
        return Err(Error::Parameter("empty scale window".into()));
    }
    let q = q.validate()?;
    let window: Vec<u32> = (scales.0..=scales.1).collect();
    let top = scales.1;

    // powers at every scale of the window, reused across n
    let mut current: Vec<DyadicMeasure> = Vec::with_capacity(window.len());
    for &k in &window {
        let m = generator(k)?;
        if !m.is_probability() {
            return Err(Error::Parameter(format!(
                "generator must yield probability measures, total {} at scale {k}",
                m.total()
            )));
        }
        current.push(m);
    }
    let base = current.clone();

    let mut dims = Vec::with_capacity(n_max as usize);
    let mut eta_hat = Vec::with_capacity(n_max as usize);
    let mut prev_top_l2: f64 = 1.0; // |mu^{*0}|_2 = |Dirac|_2
    for n in 1..=n_max {
        if n > 1 {
            for (acc, b) in current.iter_mut().zip(&base) {
                *acc = convolve(acc, b)?.normalized()?;
            }
        }
        let series: Vec<(u32, f64)> = window
            .iter()
            .zip(&current)
            .map(|(&k, m)| Ok((k, m.lq_pow(q)?)))
            .collect::<Result<_>>()?;
        dims.push(dim_fit(&series, q)?);

        let top_l2 = current.last().unwrap().lq_pow(LqExponent::Finite(2.0))?.sqrt();
        eta_hat.push(-(top_l2 / prev_top_l2).log2() / top as f64);
        prev_top_l2 = top_l2;
    }
    Ok(FlatteningReport {
        q: match q {
            LqExponent::Finite(v) => Some(v),
            LqExponent::Infinity => None,
        },
        n_values: (1..=n_max).collect(),
        dims,
        eta_hat,
    })
}
