//! Dyadic grids, sparse discretized measures, `L^q` norms, entropy at scale,
//! component measures and dimension fitting.
//!
//! The lattice at scale `k` is `2^{-k} Z^d`; the cell with coordinates `c` is
//! the half-open cube `2^{-k}(c + [0,1)^d)`. This half-open convention is
//! fixed globally: a boundary point belongs to the cell whose anchor it is.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::par;

/// Maximum ambient dimension supported by the packed coordinate keys.
pub const MAX_DIM: usize = 4;

/// One cell of the dyadic partition at a given scale.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CellIndex {
    /// Lattice coordinates: the cell is `2^{-scale}(coords + [0,1)^d)`.
    pub coords: Vec<i64>,
    /// Refinement scale `k >= 0`.
    pub scale: u32,
}

impl CellIndex {
    /// Anchor point `coords * 2^{-scale}` (the cell's lattice corner).
    pub fn anchor(&self) -> Vec<f64> {
        let w = (self.scale as f64).exp2().recip();
        self.coords.iter().map(|&c| c as f64 * w).collect()
    }
}

/// `L^q` exponent in `(1, infinity]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LqExponent {
    Finite(f64),
    Infinity,
}

impl LqExponent {
    pub fn validate(self) -> Result<Self> {
        match self {
            LqExponent::Finite(q) if !(q > 1.0 && q.is_finite()) => Err(Error::Parameter(
                format!("L^q exponent must lie in (1, inf], got {q}"),
            )),
            other => Ok(other),
        }
    }
}

// Packed keys: each coordinate is biased to unsigned and stored big-endian in
// a u64, so the natural u64 order equals lexicographic coordinate order.
fn bits_per_coord(d: usize) -> u32 {
    (64 / d) as u32
}

fn pack_coords(coords: &[i64], d: usize) -> Result<u64> {
    let bits = bits_per_coord(d);
    if bits == 64 {
        // flip the sign bit: order-preserving i64 -> u64
        return Ok((coords[0] as u64) ^ (1u64 << 63));
    }
    let bias = 1i64 << (bits - 1);
    let mut key = 0u64;
    for &c in coords {
        let biased = c.checked_add(bias).filter(|&v| v >= 0 && v < (1i64 << bits));
        match biased {
            Some(v) => key = (key << bits) | v as u64,
            None => {
                return Err(Error::Input(format!(
                    "lattice coordinate {c} out of the +-2^{} range supported in dimension {d}",
                    bits - 1
                )))
            }
        }
    }
    Ok(key)
}

fn unpack_coords(key: u64, d: usize, out: &mut [i64]) {
    let bits = bits_per_coord(d);
    if bits == 64 {
        out[0] = (key ^ (1u64 << 63)) as i64;
        return;
    }
    let bias = 1i64 << (bits - 1);
    let mask = (1u64 << bits) - 1;
    for i in 0..d {
        let shift = bits * (d - 1 - i) as u32;
        out[i] = ((key >> shift) & mask) as i64 - bias;
    }
}

/// A finite nonnegative measure on the scale-`k` dyadic lattice in `R^d`.
///
/// Invariants: every stored mass is strictly positive, all cells share the
/// scale `k` and the dimension `d`, and `total` is the (fixed-shape) sum of
/// the masses. Values are immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicMeasure {
    d: usize,
    k: u32,
    cells: BTreeMap<u64, f64>,
    total: f64,
}

/// Tolerance for "is a probability measure" checks.
const PROB_TOL: f64 = 1e-12;

impl DyadicMeasure {
    /// Builds a measure from `(coords, mass)` pairs, accumulating duplicates.
    /// Nonpositive or non-finite masses are rejected.
    pub fn from_cells<I>(d: usize, k: u32, cells: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<i64>, f64)>,
    {
        check_dims(d, k)?;
        let mut map: BTreeMap<u64, f64> = BTreeMap::new();
        for (coords, mass) in cells {
            if coords.len() != d {
                return Err(Error::Input(format!(
                    "cell with {} coordinates in a dimension-{d} measure",
                    coords.len()
                )));
            }
            if !mass.is_finite() || mass <= 0.0 {
                return Err(Error::Input(format!("cell mass {mass} is not strictly positive")));
            }
            *map.entry(pack_coords(&coords, d)?).or_insert(0.0) += mass;
        }
        Ok(Self::from_map(d, k, map))
    }

    fn from_map(d: usize, k: u32, mut map: BTreeMap<u64, f64>) -> Self {
        map.retain(|_, m| *m > 0.0);
        let masses: Vec<f64> = map.values().copied().collect();
        let total = par::tree_sum(&masses);
        DyadicMeasure { d, k, cells: map, total }
    }

    /// Scale-`k` discretization of a finite atomic measure: each atom's
    /// weight is added to the half-open cell containing its point. Total mass
    /// is preserved up to summation order; zero-weight atoms are dropped.
    pub fn discretize(atoms: &[(Vec<f64>, f64)], d: usize, k: u32) -> Result<Self> {
        check_dims(d, k)?;
        let width = (k as f64).exp2();
        let mut map: BTreeMap<u64, f64> = BTreeMap::new();
        let mut coords = vec![0i64; d];
        for (point, weight) in atoms {
            if point.len() != d {
                return Err(Error::Input(format!(
                    "atom with {} coordinates in dimension {d}",
                    point.len()
                )));
            }
            if point.iter().any(|x| !x.is_finite()) || !weight.is_finite() || *weight < 0.0 {
                return Err(Error::Input(
                    "atoms must have finite coordinates and finite nonnegative weights".into(),
                ));
            }
            if *weight == 0.0 {
                continue;
            }
            for (c, x) in coords.iter_mut().zip(point) {
                *c = (x * width).floor() as i64;
            }
            *map.entry(pack_coords(&coords, d)?).or_insert(0.0) += weight;
        }
        Ok(Self::from_map(d, k, map))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn scale(&self) -> u32 {
        self.k
    }

    /// Side length `2^{-k}` of one cell.
    pub fn cell_width(&self) -> f64 {
        (self.k as f64).exp2().recip()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn nnz(&self) -> usize {
        self.cells.len()
    }

    pub fn is_probability(&self) -> bool {
        (self.total - 1.0).abs() <= PROB_TOL
    }

    fn require_probability(&self, op: &str) -> Result<()> {
        if self.is_probability() {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "{op} requires a probability measure, total mass is {}",
                self.total
            )))
        }
    }

    /// Iterates cells in lexicographic coordinate order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<i64>, f64)> + '_ {
        self.cells.iter().map(move |(&key, &m)| {
            let mut coords = vec![0i64; self.d];
            unpack_coords(key, self.d, &mut coords);
            (coords, m)
        })
    }

    /// Cell indices and masses, lexicographic order.
    pub fn cell_indices(&self) -> Vec<(CellIndex, f64)> {
        self.iter()
            .map(|(coords, m)| (CellIndex { coords, scale: self.k }, m))
            .collect()
    }

    /// Anchors flattened into a `d`-strided buffer, plus masses, in cell
    /// order. This is the layout used by the frequency-domain and geometry
    /// scans.
    pub fn flat_support(&self) -> (Vec<f64>, Vec<f64>) {
        let w = self.cell_width();
        let mut anchors = Vec::with_capacity(self.cells.len() * self.d);
        let mut masses = Vec::with_capacity(self.cells.len());
        let mut coords = vec![0i64; self.d];
        for (&key, &m) in &self.cells {
            unpack_coords(key, self.d, &mut coords);
            anchors.extend(coords.iter().map(|&c| c as f64 * w));
            masses.push(m);
        }
        (anchors, masses)
    }

    pub(crate) fn packed(&self) -> &BTreeMap<u64, f64> {
        &self.cells
    }

    pub(crate) fn from_packed(d: usize, k: u32, map: BTreeMap<u64, f64>) -> Self {
        Self::from_map(d, k, map)
    }

    pub(crate) fn pack(&self, coords: &[i64]) -> Result<u64> {
        pack_coords(coords, self.d)
    }

    pub(crate) fn unpack(&self, key: u64, out: &mut [i64]) {
        unpack_coords(key, self.d, out)
    }

    /// Mass of the cell with the given coordinates (0 if absent).
    pub fn mass_at(&self, coords: &[i64]) -> f64 {
        pack_coords(coords, self.d)
            .ok()
            .and_then(|key| self.cells.get(&key).copied())
            .unwrap_or(0.0)
    }

    /// Σ m^q for finite q, max mass for q = infinity. This is `lq_norm^q` in
    /// the finite case and is the quantity dimension fits consume directly.
    pub fn lq_pow(&self, q: LqExponent) -> Result<f64> {
        self.require_probability("lq_norm")?;
        let q = q.validate()?;
        let masses: Vec<f64> = self.cells.values().copied().collect();
        match q {
            LqExponent::Infinity => Ok(masses.iter().copied().fold(0.0, f64::max)),
            LqExponent::Finite(q) => {
                let min = masses.iter().copied().fold(f64::INFINITY, f64::min);
                if q * min.log2() > -996.0 {
                    Ok(par::tree_sum_fn(masses.len(), &|i| masses[i].powf(q)))
                } else {
                    // log-domain accumulation for masses whose q-th power
                    // would underflow
                    let logs: Vec<f64> = masses.iter().map(|m| q * m.log2()).collect();
                    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let sum = par::tree_sum_fn(logs.len(), &|i| (logs[i] - peak).exp2());
                    Ok((peak + sum.log2()).exp2())
                }
            }
        }
    }

    /// `(Σ m^q)^{1/q}` for finite q; the maximal cell mass for q = infinity.
    /// In the q = infinity case ties are irrelevant for the value; the first
    /// cell in lexicographic order attains it.
    pub fn lq_norm(&self, q: LqExponent) -> Result<f64> {
        let pow = self.lq_pow(q)?;
        match q {
            LqExponent::Infinity => Ok(pow),
            LqExponent::Finite(q) => Ok(pow.powf(1.0 / q)),
        }
    }

    /// Entropy at scale: `-(1/k) Σ m log2 m`. Requires a probability measure
    /// and `k >= 1` (the normalization divides by the scale).
    pub fn entropy(&self) -> Result<f64> {
        self.require_probability("entropy")?;
        if self.k == 0 {
            return Err(Error::Parameter("entropy at scale requires k >= 1".into()));
        }
        Ok(self.shannon_entropy_bits() / self.k as f64)
    }

    /// Unnormalized Shannon entropy `-Σ m log2 m` of the cell masses.
    pub fn shannon_entropy_bits(&self) -> f64 {
        let masses: Vec<f64> = self.cells.values().copied().collect();
        -par::tree_sum_fn(masses.len(), &|i| {
            let m = masses[i];
            m * m.log2()
        })
    }

    /// Component measure: the restriction of `self` to the scale-`i` cell
    /// containing `z`, affinely rescaled to `[0,1)^d` and renormalized to a
    /// probability measure. The result lives at scale `k - i`.
    pub fn component(&self, z: &[f64], i: u32) -> Result<DyadicMeasure> {
        if i > self.k {
            return Err(Error::Parameter(format!(
                "component scale {i} exceeds measure scale {}",
                self.k
            )));
        }
        if z.len() != self.d {
            return Err(Error::Input(format!(
                "component point has {} coordinates in dimension {}",
                z.len(),
                self.d
            )));
        }
        let coarse_w = (i as f64).exp2();
        let cz: Vec<i64> = z.iter().map(|x| (x * coarse_w).floor() as i64).collect();
        self.component_at_cell(&cz, i)
    }

    /// Component measure anchored at explicit coarse-cell coordinates.
    pub fn component_at_cell(&self, coarse: &[i64], i: u32) -> Result<DyadicMeasure> {
        let shift = self.k - i;
        let mut map: BTreeMap<u64, f64> = BTreeMap::new();
        let mut coords = vec![0i64; self.d];
        let mut mass_in = Vec::new();
        for (&key, &m) in &self.cells {
            unpack_coords(key, self.d, &mut coords);
            let inside = coords
                .iter()
                .zip(coarse)
                .all(|(&c, &cc)| (c >> shift) == cc);
            if inside {
                let local: Vec<i64> = coords
                    .iter()
                    .zip(coarse)
                    .map(|(&c, &cc)| c - (cc << shift))
                    .collect();
            map.insert(pack_coords(&local, self.d)?, m);
                mass_in.push(m);
            }
        }
        if map.is_empty() {
            return Err(Error::EmptyComponent(format!(
                "cell {coarse:?} at scale {i} carries no mass"
            )));
        }
        let mass = par::tree_sum(&mass_in);
        for v in map.values_mut() {
            *v /= mass;
        }
        Ok(Self::from_map(self.d, shift, map))
    }

    /// Mass of the scale-`i` cell containing `z`.
    pub fn coarse_cell_mass(&self, coarse: &[i64], i: u32) -> f64 {
        let shift = self.k - i;
        let mut coords = vec![0i64; self.d];
        let mut acc = Vec::new();
        for (&key, &m) in &self.cells {
            unpack_coords(key, self.d, &mut coords);
            if coords.iter().zip(coarse).all(|(&c, &cc)| (c >> shift) == cc) {
                acc.push(m);
            }
        }
        par::tree_sum(&acc)
    }

    /// Re-discretizes at a coarser scale `k' <= k` by summing masses per
    /// coarse cell.
    pub fn coarsen(&self, to_k: u32) -> Result<DyadicMeasure> {
        if to_k > self.k {
            return Err(Error::Parameter(format!(
                "cannot coarsen from scale {} to finer scale {to_k}",
                self.k
            )));
        }
        let shift = self.k - to_k;
        let mut map: BTreeMap<u64, f64> = BTreeMap::new();
        let mut coords = vec![0i64; self.d];
        for (&key, &m) in &self.cells {
            unpack_coords(key, self.d, &mut coords);
            let coarse: Vec<i64> = coords.iter().map(|&c| c >> shift).collect();
            *map.entry(pack_coords(&coarse, self.d)?).or_insert(0.0) += m;
        }
        Ok(Self::from_map(self.d, to_k, map))
    }

    /// Keeps the cells whose anchors lie in `[lo, hi)` and renormalizes the
    /// survivors to total mass 1.
    pub fn restrict_normalize(&self, lo: &[f64], hi: &[f64]) -> Result<DyadicMeasure> {
        if lo.len() != self.d || hi.len() != self.d {
            return Err(Error::Input("restriction box dimension mismatch".into()));
        }
        let w = self.cell_width();
        let mut map: BTreeMap<u64, f64> = BTreeMap::new();
        let mut coords = vec![0i64; self.d];
        let mut kept = Vec::new();
        for (&key, &m) in &self.cells {
            unpack_coords(key, self.d, &mut coords);
            let inside = coords
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(&c, (&l, &h))| {
                    let a = c as f64 * w;
                    a >= l && a < h
                });
            if inside {
                map.insert(key, m);
                kept.push(m);
            }
        }
        if map.is_empty() {
            return Err(Error::EmptyRestriction(format!(
                "box [{lo:?}, {hi:?}) carries no mass"
            )));
        }
        let mass = par::tree_sum(&kept);
        for v in map.values_mut() {
            *v /= mass;
        }
        Ok(Self::from_map(self.d, self.k, map))
    }

    /// Rescales all masses by a positive factor.
    pub fn scaled(&self, factor: f64) -> Result<DyadicMeasure> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Parameter(format!("scale factor {factor} must be positive")));
        }
        let map = self.cells.iter().map(|(&k, &m)| (k, m * factor)).collect();
        Ok(Self::from_map(self.d, self.k, map))
    }

    /// Renormalizes to a probability measure by dividing by the exact
    /// current total.
    pub fn normalized(&self) -> Result<DyadicMeasure> {
        if self.total <= 0.0 {
            return Err(Error::EmptyRestriction("cannot normalize a zero measure".into()));
        }
        self.scaled(1.0 / self.total)
    }

    /// Radius of the support: max Euclidean norm over cell anchors.
    pub fn support_radius(&self) -> f64 {
        let w = self.cell_width();
        let mut coords = vec![0i64; self.d];
        let mut r2_max = 0.0f64;
        for &key in self.cells.keys() {
            unpack_coords(key, self.d, &mut coords);
            let r2: f64 = coords.iter().map(|&c| (c as f64 * w).powi(2)).sum();
            r2_max = r2_max.max(r2);
        }
        r2_max.sqrt()
    }

    /// Componentwise bounding box `[lo, hi]` of the cell coordinates.
    pub fn coord_bounds(&self) -> Option<(Vec<i64>, Vec<i64>)> {
        if self.cells.is_empty() {
            return None;
        }
        let mut lo = vec![i64::MAX; self.d];
        let mut hi = vec![i64::MIN; self.d];
        let mut coords = vec![0i64; self.d];
        for &key in self.cells.keys() {
            unpack_coords(key, self.d, &mut coords);
            for i in 0..self.d {
                lo[i] = lo[i].min(coords[i]);
                hi[i] = hi[i].max(coords[i]);
            }
        }
        Some((lo, hi))
    }

    /// Mass-weighted mean anchor.
    pub fn mean(&self) -> Vec<f64> {
        let (anchors, masses) = self.flat_support();
        let mut mean = vec![0.0; self.d];
        for (i, m) in masses.iter().enumerate() {
            for j in 0..self.d {
                mean[j] += m * anchors[i * self.d + j];
            }
        }
        for v in &mut mean {
            *v /= self.total;
        }
        mean
    }

    /// Mass-weighted covariance matrix of the anchors (row-major d x d).
    pub fn covariance(&self) -> Vec<f64> {
        let (anchors, masses) = self.flat_support();
        let mean = self.mean();
        let d = self.d;
        let mut cov = vec![0.0; d * d];
        for (i, m) in masses.iter().enumerate() {
            for a in 0..d {
                let da = anchors[i * d + a] - mean[a];
                for b in 0..d {
                    let db = anchors[i * d + b] - mean[b];
                    cov[a * d + b] += m * da * db;
                }
            }
        }
        for v in &mut cov {
            *v /= self.total;
        }
        cov
    }
}

fn check_dims(d: usize, _k: u32) -> Result<()> {
    if d == 0 || d > MAX_DIM {
        return Err(Error::Parameter(format!(
            "ambient dimension must lie in 1..={MAX_DIM}, got {d}"
        )));
    }
    Ok(())
}

/// A fitted scaling exponent with its least-squares standard error.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DimEstimate {
    /// Exponent the fit was made for (`null` encodes q = infinity).
    pub q: Option<f64>,
    /// Fitted dimension (the slope of the scaling line).
    pub slope: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    /// Inclusive scale window the fit used.
    pub scales_used: (u32, u32),
}

/// Least-squares dimension fit per Def. of the `L^q` dimension: for finite q
/// the input values are `Σ_P μ_k(P)^q` per scale and the slope of
/// `-log2(value)` against `(q-1) k` is returned; for q = infinity the values
/// are maximal cell masses and the regressor is `k` itself. The liminf over
/// all scales is replaced by this finite-window estimator.
pub fn dim_fit(norm_series: &[(u32, f64)], q: LqExponent) -> Result<DimEstimate> {
    let q = q.validate()?;
    if norm_series.len() < 3 {
        return Err(Error::Parameter(format!(
            "dimension fit needs at least 3 scales, got {}",
            norm_series.len()
        )));
    }
    if norm_series.iter().any(|&(_, v)| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Parameter("dimension fit values must be positive and finite".into()));
    }
    let xs: Vec<f64> = norm_series
        .iter()
        .map(|&(k, _)| match q {
            LqExponent::Finite(q) => (q - 1.0) * k as f64,
            LqExponent::Infinity => k as f64,
        })
        .collect();
    let ys: Vec<f64> = norm_series.iter().map(|&(_, v)| -v.log2()).collect();
    let (slope, stderr) = ols_slope(&xs, &ys)?;
    let lo = norm_series.iter().map(|&(k, _)| k).min().unwrap();
    let hi = norm_series.iter().map(|&(k, _)| k).max().unwrap();
    Ok(DimEstimate {
        q: match q {
            LqExponent::Finite(q) => Some(q),
            LqExponent::Infinity => None,
        },
        slope,
        stderr,
        scales_used: (lo, hi),
    })
}

/// Ordinary least squares slope and its standard error.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return Err(Error::Parameter("least squares needs >= 2 paired points".into()));
    }
    let nf = n as f64;
    let xbar = xs.iter().sum::<f64>() / nf;
    let ybar = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Parameter("least squares abscissae are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let stderr = if n > 2 {
        let ss_res: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| {
                let pred = ybar + slope * (x - xbar);
                (y - pred).powi(2)
            })
            .sum();
        (ss_res / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok((slope, stderr))
}

/// Intercept-aware least squares: returns (slope, intercept, stderr of slope).
pub fn ols_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let (slope, stderr) = ols_slope(xs, ys)?;
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    Ok((slope, ybar - slope * xbar, stderr))
}
