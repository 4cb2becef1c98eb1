//! Convex cocompact Fuchsian Schottky groups on the boundary line, their
//! critical exponents via the transfer operator, and Patterson-Sullivan
//! measures with shadow-lemma validation.
//!
//! Model: upper half-plane with boundary `R ∪ {∞}`; all configurations are
//! finite disjoint closed intervals on `R`. A generator maps the exterior of
//! its source interval onto the interior of its target interval, so
//! derivatives are the closed form `1/(cx+d)^2` and no chart switching is
//! needed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dyadic::{ols_line, DyadicMeasure};
use crate::error::{Error, Result};
use crate::report::{ExperimentReport, LineFit};

/// Hard cap on word-tree nodes.
const TREE_BUDGET: u64 = 1 << 24;

/// A closed interval on the boundary line.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Interval {
        Interval { lo, hi }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    fn contains_strictly(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    fn is_proper(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi
    }
}

/// A real Moebius map `x -> (ax + b) / (cx + d)`, stored with determinant
/// normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobius {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mobius {
    /// Normalizes the determinant to 1. Orientation-reversing inputs
    /// (negative determinant) are rejected: they are not isometries of the
    /// upper half-plane.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Mobius> {
        let det = a * d - b * c;
        if !det.is_finite() || det <= 0.0 {
            return Err(Error::Geometry(format!(
                "Moebius matrix must have positive determinant, got {det}"
            )));
        }
        let s = det.sqrt();
        Ok(Mobius { a: a / s, b: b / s, c: c / s, d: d / s })
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn apply(&self, x: f64) -> f64 {
        if x.is_infinite() {
            return if self.c != 0.0 { self.a / self.c } else { f64::INFINITY };
        }
        let den = self.c * x + self.d;
        if den == 0.0 {
            f64::INFINITY
        } else {
            (self.a * x + self.b) / den
        }
    }

    /// `|gamma'(x)| = 1 / (cx + d)^2` for determinant-1 matrices.
    pub fn derivative_abs(&self, x: f64) -> f64 {
        let den = self.c * x + self.d;
        1.0 / (den * den)
    }

    pub fn inverse(&self) -> Mobius {
        Mobius { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    /// Matrix product: `self` applied after `other`.
    pub fn compose(&self, other: &Mobius) -> Mobius {
        Mobius {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    pub fn apply_interval(&self, iv: Interval) -> Interval {
        let u = self.apply(iv.lo);
        let v = self.apply(iv.hi);
        Interval::new(u.min(v), u.max(v))
    }

    /// The Moebius map sending three source points to three target points.
    /// Sources may include infinity; targets must be finite here.
    fn through(sources: [f64; 3], targets: [f64; 3]) -> Result<Mobius> {
        // matrix sending (p, q, r) to (0, 1, infinity)
        fn to_standard(p: f64, q: f64, r: f64) -> (f64, f64, f64, f64) {
            if p.is_infinite() {
                (0.0, q - r, 1.0, -r)
            } else if q.is_infinite() {
                (1.0, -p, 1.0, -r)
            } else if r.is_infinite() {
                (1.0, -p, 0.0, q - p)
            } else {
                (q - r, -p * (q - r), q - p, -r * (q - p))
            }
        }
        let (sa, sb, sc, sd) = to_standard(sources[0], sources[1], sources[2]);
        let (ta, tb, tc, td) = to_standard(targets[0], targets[1], targets[2]);
        // M = T^{-1} S
        let (ia, ib, ic, id) = (td, -tb, -tc, ta);
        let a = ia * sa + ib * sc;
        let b = ia * sb + ib * sd;
        let c = ic * sa + id * sc;
        let d = ic * sb + id * sd;
        Mobius::new(a, b, c, d)
    }
}

/// A Fuchsian Schottky group: `g` Moebius generators pairing `2g` disjoint
/// closed intervals on the boundary line. Letter `i < g` is the generator
/// `gamma_i` (image interval: the pair's target); letter `g + i` is its
/// inverse (image interval: the pair's source).
#[derive(Debug, Clone)]
pub struct SchottkyGroup {
    generators: Vec<Mobius>,
    pairs: Vec<(Interval, Interval)>,
}

impl SchottkyGroup {
    /// Builds the generators from interval pairs: each generator maps the
    /// exterior of the source interval onto the interior of the target,
    /// sending infinity to the target's midpoint.
    pub fn from_interval_pairs(pairs: &[(Interval, Interval)]) -> Result<SchottkyGroup> {
        if pairs.is_empty() {
            return Err(Error::Geometry("a Schottky group needs at least one pair".into()));
        }
        let mut generators = Vec::with_capacity(pairs.len());
        for (source, target) in pairs {
            if !source.is_proper() || !target.is_proper() {
                return Err(Error::Geometry("intervals must be finite and nondegenerate".into()));
            }
            // orientation: the exterior arc from source.hi up through
            // infinity to source.lo sweeps the target from lo to hi
            let m = Mobius::through(
                [source.hi, f64::INFINITY, source.lo],
                [target.lo, target.mid(), target.hi],
            )?;
            generators.push(m);
        }
        let group = SchottkyGroup { generators, pairs: pairs.to_vec() };
        group.validate()?;
        Ok(group)
    }

    /// Wraps explicit generators, verifying determinant and the ping-pong
    /// configuration against the given pairs.
    pub fn from_generators(
        generators: Vec<Mobius>,
        pairs: Vec<(Interval, Interval)>,
    ) -> Result<SchottkyGroup> {
        if generators.len() != pairs.len() {
            return Err(Error::Geometry("one interval pair per generator".into()));
        }
        for m in &generators {
            if (m.determinant() - 1.0).abs() > 1e-10 {
                return Err(Error::Geometry("generator determinant must be 1".into()));
            }
        }
        let group = SchottkyGroup { generators, pairs };
        group.validate()?;
        Ok(group)
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn n_letters(&self) -> usize {
        2 * self.generators.len()
    }

    pub fn generators(&self) -> &[Mobius] {
        &self.generators
    }

    /// The Moebius map of a letter: `0..g` are the generators, `g..2g` the
    /// inverses.
    pub fn letter(&self, i: usize) -> Mobius {
        let g = self.rank();
        if i < g {
            self.generators[i]
        } else {
            self.generators[i - g].inverse()
        }
    }

    /// The interval a letter maps into.
    pub fn letter_interval(&self, i: usize) -> Interval {
        let g = self.rank();
        if i < g {
            self.pairs[i].1
        } else {
            self.pairs[i - g].0
        }
    }

    pub fn inverse_letter(&self, i: usize) -> usize {
        (i + self.rank()) % self.n_letters()
    }

    /// The letter whose interval contains `x`, if any.
    pub fn containing_letter(&self, x: f64) -> Option<usize> {
        (0..self.n_letters()).find(|&i| self.letter_interval(i).contains(x))
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_letters();
        // pairwise disjoint closed intervals
        let mut sorted: Vec<Interval> = (0..n).map(|i| self.letter_interval(i)).collect();
        sorted.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap());
        for w in sorted.windows(2) {
            if w[0].hi >= w[1].lo {
                return Err(Error::Geometry(format!(
                    "intervals [{}, {}] and [{}, {}] are not disjoint",
                    w[0].lo, w[0].hi, w[1].lo, w[1].hi
                )));
            }
        }
        // ping-pong at interval endpoints
        for i in 0..n {
            let map = self.letter(i);
            let own = self.letter_interval(i);
            let source = self.letter_interval(self.inverse_letter(i));
            let scale = own.length().max(1.0);
            let maps_boundary = (map.apply(source.lo) - own.lo).abs() < 1e-9 * scale
                && (map.apply(source.hi) - own.hi).abs() < 1e-9 * scale
                || (map.apply(source.lo) - own.hi).abs() < 1e-9 * scale
                    && (map.apply(source.hi) - own.lo).abs() < 1e-9 * scale;
            if !maps_boundary {
                return Err(Error::Geometry(format!(
                    "letter {i} does not map its source boundary onto its target boundary"
                )));
            }
            if !own.contains_strictly(map.apply(f64::INFINITY)) {
                return Err(Error::Geometry(format!(
                    "letter {i} does not map infinity into its interval"
                )));
            }
            for j in 0..n {
                if j == self.inverse_letter(i) {
                    continue;
                }
                let other = self.letter_interval(j);
                for x in [other.lo, other.hi, other.mid()] {
                    if !own.contains_strictly(map.apply(x)) {
                        return Err(Error::Geometry(format!(
                            "ping-pong fails: letter {i} maps {x} outside its interval"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Converged critical-exponent estimate.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DeltaEstimate {
    pub delta: f64,
    /// Spectral radius of the transfer operator at `delta` (within tol of 1).
    pub spectral_radius: f64,
    pub nodes_per_interval: usize,
    pub bisection_steps: u32,
}

/// Chebyshev collocation nodes (first kind) on an interval.
fn chebyshev_nodes(iv: Interval, n: usize) -> Vec<f64> {
    let mid = iv.mid();
    let rad = 0.5 * iv.length();
    (0..n)
        .map(|i| mid + rad * ((2 * i + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos())
        .collect()
}

/// Barycentric weights for Chebyshev points of the first kind.
fn chebyshev_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign * ((2 * i + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).sin()
        })
        .collect()
}

/// Dense collocation matrix of the transfer operator
/// `(L_s f)(x) = sum_{b != a^{-1}} |b'(x)|^s f(b x)` for `x` in the letter-a
/// interval, with `f` interpolated barycentrically per interval.
fn transfer_matrix(group: &SchottkyGroup, s: f64, nodes_per_interval: usize) -> Vec<f64> {
    let n_letters = group.n_letters();
    let n = n_letters * nodes_per_interval;
    let nodes: Vec<Vec<f64>> = (0..n_letters)
        .map(|a| chebyshev_nodes(group.letter_interval(a), nodes_per_interval))
        .collect();
    let weights = chebyshev_weights(nodes_per_interval);
    let mut matrix = vec![0.0f64; n * n];
    for a in 0..n_letters {
        for (i, &x) in nodes[a].iter().enumerate() {
            let row = a * nodes_per_interval + i;
            for b in 0..n_letters {
                if b == group.inverse_letter(a) {
                    continue;
                }
                let map = group.letter(b);
                let y = map.apply(x);
                let factor = map.derivative_abs(x).powf(s);
                // barycentric Lagrange evaluation at y over interval b
                let mut exact = None;
                let mut denom = 0.0;
                let mut coeffs = vec![0.0f64; nodes_per_interval];
                for (j, &xj) in nodes[b].iter().enumerate() {
                    let diff = y - xj;
                    if diff.abs() < 1e-14 {
                        exact = Some(j);
                        break;
                    }
                    let c = weights[j] / diff;
                    coeffs[j] = c;
                    denom += c;
                }
                match exact {
                    Some(j) => {
                        matrix[row * n + b * nodes_per_interval + j] += factor;
                    }
                    None => {
                        for (j, &c) in coeffs.iter().enumerate() {
                            matrix[row * n + b * nodes_per_interval + j] += factor * c / denom;
                        }
                    }
                }
            }
        }
    }
    matrix
}

/// Dominant eigenvalue by power iteration with Rayleigh quotients,
/// residual-checked to 1e-10.
fn spectral_radius(matrix: &[f64], n: usize) -> Result<f64> {
    let mut v = vec![1.0f64; n];
    for _ in 0..100_000 {
        let mut w = vec![0.0f64; n];
        for i in 0..n {
            let row = &matrix[i * n..(i + 1) * n];
            w[i] = row.iter().zip(&v).map(|(m, x)| m * x).sum();
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Convergence("transfer operator annihilated the iterate".into()));
        }
        for x in &mut w {
            *x /= norm;
        }
        // Rayleigh quotient and residual
        let mut mw = vec![0.0f64; n];
        for i in 0..n {
            let row = &matrix[i * n..(i + 1) * n];
            mw[i] = row.iter().zip(&w).map(|(m, x)| m * x).sum();
        }
        let lambda: f64 = w.iter().zip(&mw).map(|(a, b)| a * b).sum();
        let residual: f64 = mw
            .iter()
            .zip(&w)
            .map(|(m, x)| (m - lambda * x) * (m - lambda * x))
            .sum::<f64>()
            .sqrt();
        if residual <= 1e-10 * lambda.abs().max(1e-300) {
            return Ok(lambda.abs());
        }
        v = w;
    }
    Err(Error::Convergence("power iteration did not reach residual 1e-10".into()))
}

/// Critical exponent as the zero of the pressure: bisection on `s` until the
/// spectral radius of the collocated transfer operator is within `tol` of 1.
pub fn schottky_delta_with_nodes(
    group: &SchottkyGroup,
    tol: f64,
    nodes_per_interval: usize,
) -> Result<DeltaEstimate> {
    if !(tol > 0.0) {
        return Err(Error::Parameter("tolerance must be positive".into()));
    }
    let n = group.n_letters() * nodes_per_interval;
    let radius_at = |s: f64| -> Result<f64> {
        spectral_radius(&transfer_matrix(group, s, nodes_per_interval), n)
    };
    let mut lo = 1e-4;
    let mut hi = 1.2;
    let r_lo = radius_at(lo)?;
    let r_hi = radius_at(hi)?;
    if !(r_lo > 1.0 && r_hi < 1.0) {
        return Err(Error::Convergence(format!(
            "pressure does not bracket zero on [{lo}, {hi}]: radii {r_lo}, {r_hi}"
        )));
    }
    let mut steps = 0u32;
    loop {
        let mid = 0.5 * (lo + hi);
        let r = radius_at(mid)?;
        steps += 1;
        if (r - 1.0).abs() <= tol || hi - lo < 1e-14 {
            return Ok(DeltaEstimate {
                delta: mid,
                spectral_radius: r,
                nodes_per_interval,
                bisection_steps: steps,
            });
        }
        if r > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if steps > 200 {
            return Err(Error::Convergence("bisection exceeded 200 steps".into()));
        }
    }
}

/// [`schottky_delta_with_nodes`] at the default 16 collocation nodes.
pub fn schottky_delta(group: &SchottkyGroup, tol: f64) -> Result<DeltaEstimate> {
    schottky_delta_with_nodes(group, tol, 16)
}

/// Signed quadrature rule for the eigenmeasure: the dominant left
/// eigenvector of the collocation matrix, one weight per Chebyshev node.
/// (The eigenmeasure is singular, so the weights genuinely oscillate in
/// sign; they must not be clamped.)
struct EigenQuadrature {
    /// Per letter: (node position, signed weight).
    atoms: Vec<Vec<(f64, f64)>>,
}

fn eigenmeasure_quadrature(
    group: &SchottkyGroup,
    delta: f64,
    nodes_per_interval: usize,
) -> Result<EigenQuadrature> {
    let n_letters = group.n_letters();
    let n = n_letters * nodes_per_interval;
    let matrix = transfer_matrix(group, delta, nodes_per_interval);
    let mut v = vec![1.0f64; n];
    let mut converged = false;
    for _ in 0..100_000 {
        let mut w = vec![0.0f64; n];
        for i in 0..n {
            let row = &matrix[i * n..(i + 1) * n];
            for (j, &m) in row.iter().enumerate() {
                w[j] += m * v[i];
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Convergence("dual power iteration collapsed".into()));
        }
        for x in &mut w {
            *x /= norm;
        }
        let drift: f64 =
            w.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        v = w;
        if drift < 1e-15 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence("dual power iteration did not settle".into()));
    }
    let total: f64 = v.iter().sum();
    if total.abs() < 1e-12 {
        return Err(Error::Convergence("degenerate eigenmeasure quadrature".into()));
    }
    Ok(EigenQuadrature {
        atoms: (0..n_letters)
            .map(|a| {
                chebyshev_nodes(group.letter_interval(a), nodes_per_interval)
                    .into_iter()
                    .enumerate()
                    .map(|(i, x)| (x, v[a * nodes_per_interval + i] / total))
                    .collect()
            })
            .collect(),
    })
}

/// A cylinder `J_w` of the nested word tree, `w = w_1 ... w_n`: the prefix
/// map is `P = w_1 ∘ ... ∘ w_{n-1}`, the interval is `P(J_{w_n})`, and the
/// eigenmeasure identity `mu(J_w) = ∫_{J_{w_n}} |P'|^delta dmu` evaluates
/// the mass through the base quadrature of the last letter. Children extend
/// the word on the right, so they nest inside their parent.
#[derive(Debug, Clone)]
struct Cylinder {
    prefix: Mobius,
    last: u8,
    iv: Interval,
    mass: f64,
}

/// Width below which refinement stops regardless of the target (float
/// resolution guard).
const WIDTH_FLOOR: f64 = 1e-12;

/// Leaves of the adaptive refinement: every cylinder narrower than
/// `target_width`, masses renormalized to total 1. The leaf family is a
/// disjoint cover of the limit set by word intervals.
fn refine_cylinders(
    group: &SchottkyGroup,
    delta: f64,
    quad: &EigenQuadrature,
    target_width: f64,
) -> Result<Vec<Cylinder>> {
    let target = target_width.max(WIDTH_FLOOR);
    let n_letters = group.n_letters();
    let identity = Mobius { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };
    let mass_of = |prefix: &Mobius, last: usize| -> f64 {
        quad.atoms[last]
            .iter()
            .map(|&(x, m)| m * prefix.derivative_abs(x).powf(delta))
            .sum()
    };
    let mut active: Vec<Cylinder> = (0..n_letters)
        .map(|a| Cylinder {
            prefix: identity,
            last: a as u8,
            iv: group.letter_interval(a),
            mass: mass_of(&identity, a),
        })
        .collect();
    let mut leaves: Vec<Cylinder> = Vec::new();
    while !active.is_empty() {
        if (leaves.len() + active.len()) as u64 > TREE_BUDGET {
            return Err(Error::Budget(format!(
                "cylinder refinement exceeds {TREE_BUDGET} nodes"
            )));
        }
        let mut next = Vec::new();
        for cyl in active {
            if cyl.iv.length() <= target {
                leaves.push(cyl);
                continue;
            }
            let last = cyl.last as usize;
            let new_prefix = cyl.prefix.compose(&group.letter(last));
            let blocked = group.inverse_letter(last);
            for c in 0..n_letters {
                if c == blocked {
                    continue;
                }
                next.push(Cylinder {
                    prefix: new_prefix,
                    last: c as u8,
                    iv: new_prefix.apply_interval(group.letter_interval(c)),
                    mass: mass_of(&new_prefix, c),
                });
            }
        }
        active = next;
    }
    let total: f64 = leaves.iter().map(|c| c.mass).sum();
    if !(total > 0.0) {
        return Err(Error::Convergence("eigenmeasure refinement lost all mass".into()));
    }
    for cyl in &mut leaves {
        cyl.mass /= total;
        if cyl.mass <= 0.0 {
            return Err(Error::Convergence(format!(
                "cylinder [{}, {}] received nonpositive mass {}",
                cyl.iv.lo, cyl.iv.hi, cyl.mass
            )));
        }
    }
    Ok(leaves)
}

/// One positive atom per leaf cylinder (midpoint, mass).
fn collapse_cylinders(leaves: &[Cylinder]) -> Vec<(f64, f64)> {
    leaves.iter().map(|c| (c.iv.mid(), c.mass)).collect()
}

/// Patterson-Sullivan measure at scale `k`: the eigenmeasure quadrature of
/// the dual transfer operator, redistributed down the word tree to cylinders
/// of width at most `2^{-depth}` and discretized. Requires `depth >= k + 2`
/// so cylinders resolve the cells; the caller supplies a converged
/// [`schottky_delta`] value.
pub fn ps_measure(
    group: &SchottkyGroup,
    delta: f64,
    k: u32,
    depth: u32,
) -> Result<DyadicMeasure> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("delta must lie in (0,1), got {delta}")));
    }
    if depth < k + 2 {
        return Err(Error::Parameter(format!(
            "word-tree depth {depth} must be at least scale + 2 = {}",
            k + 2
        )));
    }
    let quad = eigenmeasure_quadrature(group, delta, 16)?;
    let leaves = refine_cylinders(group, delta, &quad, (-(depth as f64)).exp2())?;
    let atoms: Vec<(Vec<f64>, f64)> = collapse_cylinders(&leaves)
        .into_iter()
        .map(|(x, m)| (vec![x], m))
        .collect();
    DyadicMeasure::discretize(&atoms, 1, k)
}

/// All admissible words of a fixed length with their boundary intervals.
fn words_with_intervals(group: &SchottkyGroup, len: u32) -> Vec<(Vec<u8>, Interval)> {
    let n_letters = group.n_letters();
    let mut words: Vec<Vec<u8>> = (0..n_letters as u8).map(|a| vec![a]).collect();
    for _ in 1..len {
        let mut next = Vec::with_capacity(words.len() * (n_letters - 1));
        for w in &words {
            let blocked = group.inverse_letter(*w.last().unwrap() as usize) as u8;
            for b in 0..n_letters as u8 {
                if b != blocked {
                    let mut w2 = w.clone();
                    w2.push(b);
                    next.push(w2);
                }
            }
        }
        words = next;
    }
    words
        .into_iter()
        .map(|w| {
            let mut iv = group.letter_interval(*w.last().unwrap() as usize);
            for &c in w[..w.len() - 1].iter().rev() {
                iv = group.letter(c as usize).apply_interval(iv);
            }
            (w, iv)
        })
        .collect()
}

/// Total atom mass inside closed intervals, via sorted prefix sums.
struct AtomIndex {
    positions: Vec<f64>,
    prefix: Vec<f64>,
}

impl AtomIndex {
    fn new(mut atoms: Vec<(f64, f64)>) -> AtomIndex {
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let positions: Vec<f64> = atoms.iter().map(|a| a.0).collect();
        let mut prefix = Vec::with_capacity(atoms.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for (_, m) in &atoms {
            acc += m;
            prefix.push(acc);
        }
        AtomIndex { positions, prefix }
    }

    fn mass(&self, iv: Interval) -> f64 {
        let lo = self.positions.partition_point(|&p| p < iv.lo);
        let hi = self.positions.partition_point(|&p| p <= iv.hi);
        self.prefix[hi] - self.prefix[lo]
    }
}

/// Fixed-point residual: total variation, measured on the length-`probe_len`
/// word intervals (the natural mesh, free of dyadic boundary snapping),
/// between the refined eigenmeasure and one more application of the dual
/// transfer operator to its atoms.
pub fn ps_fixed_point_residual(
    group: &SchottkyGroup,
    delta: f64,
    depth: u32,
    probe_len: u32,
) -> Result<f64> {
    let quad = eigenmeasure_quadrature(group, delta, 16)?;
    let leaves = refine_cylinders(group, delta, &quad, (-(depth as f64)).exp2())?;
    let atoms = collapse_cylinders(&leaves);

    let n_letters = group.n_letters();
    let mut pushed: Vec<(f64, f64)> = Vec::with_capacity(atoms.len() * (n_letters - 1));
    let mut total = 0.0;
    for &(x, mass) in &atoms {
        let letter = group
            .containing_letter(x)
            .ok_or_else(|| Error::Geometry("leaf atom escaped the intervals".into()))?;
        let blocked = group.inverse_letter(letter);
        for b in 0..n_letters {
            if b == blocked {
                continue;
            }
            let map = group.letter(b);
            let m = mass * map.derivative_abs(x).powf(delta);
            total += m;
            pushed.push((map.apply(x), m));
        }
    }
    for p in &mut pushed {
        p.1 /= total;
    }

    let before = AtomIndex::new(atoms);
    let after = AtomIndex::new(pushed);
    let words = words_with_intervals(group, probe_len);
    Ok(words
        .iter()
        .map(|(_, iv)| (before.mass(*iv) - after.mass(*iv)).abs())
        .sum())
}

/// Conformality ratios `mu(c J_w) / (|c'(x_w)|^delta mu(J_w))` over all
/// length-`word_len` cylinders and admissible prefix letters.
pub fn conformality_ratios(
    group: &SchottkyGroup,
    delta: f64,
    depth: u32,
    word_len: u32,
) -> Result<Vec<f64>> {
    let quad = eigenmeasure_quadrature(group, delta, 16)?;
    // leaves must sit strictly below the probed cylinders, or pushed words
    // would fall between atoms
    let probe_floor = words_with_intervals(group, word_len + 1)
        .iter()
        .map(|(_, iv)| iv.length())
        .fold(f64::INFINITY, f64::min);
    let target = (-(depth as f64)).exp2().min(0.4 * probe_floor);
    let leaves = refine_cylinders(group, delta, &quad, target)?;
    let atoms = AtomIndex::new(collapse_cylinders(&leaves));
    let words = words_with_intervals(group, word_len);
    let mut ratios = Vec::new();
    for (w, iv) in &words {
        let mass = atoms.mass(*iv);
        if mass <= 0.0 {
            continue;
        }
        let first = w[0] as usize;
        for c in 0..group.n_letters() {
            if c == group.inverse_letter(first) {
                continue;
            }
            let map = group.letter(c);
            let pushed = map.apply_interval(*iv);
            let predicted = map.derivative_abs(iv.mid()).powf(delta) * mass;
            let actual = atoms.mass(pushed);
            if predicted > 0.0 {
                ratios.push(actual / predicted);
            }
        }
    }
    Ok(ratios)
}

/// Boundary points deep in the limit set: images of seeded random reduced
/// words of the given depth.
pub fn limit_point_samples(
    group: &SchottkyGroup,
    n: u32,
    depth: u32,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_letters = group.n_letters();
    (0..n)
        .map(|_| {
            let mut letters = Vec::with_capacity(depth as usize);
            let mut last: Option<usize> = None;
            for _ in 0..depth {
                loop {
                    let c = rng.gen_range(0..n_letters);
                    if Some(group.inverse_letter(c)) != last {
                        letters.push(c);
                        last = Some(c);
                        break;
                    }
                }
            }
            let mut composed = group.letter(letters[0]);
            for &c in &letters[1..] {
                composed = composed.compose(&group.letter(c));
            }
            composed.apply(group.letter_interval(*letters.last().unwrap()).mid())
        })
        .collect()
}

/// Recovers the symbolic coding of a limit-set point and returns its nested
/// prefix word intervals, coarsest first. Coding stops once the interval is
/// narrower than `min_width`: the inverse maps expand float error
/// geometrically, so deep codings are unreliable and must not be requested.
fn coding_intervals(
    group: &SchottkyGroup,
    xi: f64,
    max_len: u32,
    min_width: f64,
) -> Result<Vec<Interval>> {
    let mut intervals = Vec::new();
    let mut x = xi;
    let mut composed: Option<Mobius> = None;
    for _ in 0..max_len {
        let letter = group.containing_letter(x).ok_or_else(|| {
            Error::Geometry(format!("point {xi} left the Schottky intervals while coding"))
        })?;
        let iv = group.letter_interval(letter);
        let nested = match &composed {
            None => iv,
            Some(m) => m.apply_interval(iv),
        };
        intervals.push(nested);
        if nested.length() < min_width {
            break;
        }
        composed = Some(match &composed {
            None => group.letter(letter),
            Some(m) => m.compose(&group.letter(letter)),
        });
        x = group.letter(letter).inverse().apply(x);
    }
    Ok(intervals)
}

/// Parameters for [`shadow_check`].
#[derive(Debug, Clone)]
pub struct ShadowParams {
    /// Maximum coding depth used to realize shadows.
    pub max_word_len: u32,
}

impl Default for ShadowParams {
    fn default() -> Self {
        ShadowParams { max_word_len: 40 }
    }
}

/// Shadow-lemma validation: realizes the shadow at geodesic time `t` as the
/// boundary interval of radius `e^{-t}` around the sample (the word-interval
/// neighborhood of the sample's coding at that width), and reports
/// `ln mu(shadow) + delta t` over the grid together with the oscillation
/// constant `C = max(rho, 1/rho)` over all samples.
pub fn shadow_check(
    group: &SchottkyGroup,
    mu: &DyadicMeasure,
    delta: f64,
    xi_samples: &[f64],
    t_grid: &[f64],
    params: &ShadowParams,
) -> Result<ExperimentReport> {
    if mu.dim() != 1 {
        return Err(Error::Input("shadow_check needs a boundary-line measure".into()));
    }
    if xi_samples.is_empty() || t_grid.is_empty() {
        return Err(Error::Parameter("need boundary samples and a t grid".into()));
    }
    let (anchors, masses) = mu.flat_support();
    let atoms = AtomIndex::new(anchors.iter().copied().zip(masses.iter().copied()).collect());

    let mut per_t: Vec<Vec<f64>> = vec![Vec::new(); t_grid.len()];
    let mut c_hat = 1.0f64;
    for &xi in xi_samples {
        // validate that the sample codes a few levels into the limit set
        coding_intervals(group, xi, params.max_word_len.min(4), 1e-9)?;
        for (ti, &t) in t_grid.iter().enumerate() {
            let width = (-t).exp();
            let shadow = Interval::new(xi - width, xi + width);
            let mass = atoms.mass(shadow);
            if mass <= 0.0 {
                return Err(Error::Geometry(format!(
                    "shadow at t = {t} around {xi} carries no mass; deepen the measure"
                )));
            }
            let log_rho = mass.ln() + delta * t;
            per_t[ti].push(log_rho);
            c_hat = c_hat.max(log_rho.exp().max((-log_rho).exp()));
        }
    }
    let values: Vec<f64> =
        per_t.iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
    let (slope, intercept, stderr) = ols_line(t_grid, &values)?;
    let metadata = serde_json::json!({
        "delta_hat": delta,
        "c_hat": c_hat,
        "samples": xi_samples.len(),
        "max_word_len": params.max_word_len,
    });
    Ok(ExperimentReport::new(
        "shadow",
        t_grid.to_vec(),
        values,
        LineFit { slope, intercept, stderr },
        metadata,
    ))
}
