//! Independent reference computations for the test suites.
//!
//! Everything here is deliberately written from first principles (digit
//! recursions, brute-force enumeration, closed-form special functions) and
//! shares no code with the library under test.

/// Exact CDF of the middle-third coin-tossing (Cantor) measure at a dyadic
/// rational `num / 2^log_den`, evaluated through the ternary digit expansion:
/// reading ternary digits of x, digits 0/2 contribute bits 0/1 of F(x) until
/// the first digit 1, which contributes a final 1-bit and stops.
///
/// Arithmetic on the argument is exact (integer numerators); the returned
/// value is correct to f64 roundoff (digits are consumed until their binary
/// weight underflows).
pub fn cantor_cdf_dyadic(num: i64, log_den: u32) -> f64 {
    if num <= 0 {
        return 0.0;
    }
    let den: i128 = 1i128 << log_den;
    let mut n: i128 = num as i128;
    if n >= den {
        return 1.0;
    }
    let mut value = 0.0f64;
    let mut bit = 0.5f64;
    // extract ternary digits of n/den exactly
    for _ in 0..1100 {
        n *= 3;
        let digit = n / den;
        n -= digit * den;
        match digit {
            0 => {}
            1 => {
                value += bit;
                return value;
            }
            _ => value += bit,
        }
        bit *= 0.5;
        if bit == 0.0 || n == 0 {
            return value;
        }
    }
    value
}

/// Cantor measure of the half-open dyadic cell `[c 2^-k, (c+1) 2^-k)`.
/// Endpoint convention does not matter: the Cantor measure is atomless.
pub fn cantor_cell_mass(c: i64, k: u32) -> f64 {
    cantor_cdf_dyadic(c + 1, k) - cantor_cdf_dyadic(c, k)
}

/// Cantor measure of `[0, x]` for arbitrary `x` (float recursion on the
/// self-similarity; ~50 levels bottom out below f64 resolution).
pub fn cantor_cdf(x: f64) -> f64 {
    let mut x = x;
    let mut value = 0.0f64;
    let mut bit = 0.5f64;
    for _ in 0..80 {
        if x <= 0.0 {
            return value;
        }
        if x >= 1.0 {
            return value + 2.0 * bit;
        }
        if x < 1.0 / 3.0 {
            x *= 3.0;
        } else if x <= 2.0 / 3.0 {
            return value + bit;
        } else {
            value += bit;
            x = 3.0 * x - 2.0;
        }
        bit *= 0.5;
    }
    value
}

/// `Σ_P μ(P)^q` over the scale-`k` dyadic cells for the exact Cantor measure.
pub fn cantor_lq_pow(k: u32, q: f64) -> f64 {
    let mut sum = 0.0;
    for c in 0..(1i64 << k) {
        let m = cantor_cell_mass(c, k);
        if m > 0.0 {
            sum += m.powf(q);
        }
    }
    sum
}

/// Maximal dyadic cell mass of the exact Cantor measure at scale `k`.
pub fn cantor_max_cell_mass(k: u32) -> f64 {
    (0..(1i64 << k))
        .map(|c| cantor_cell_mass(c, k))
        .fold(0.0, f64::max)
}

/// Modulus of the Fourier transform of the depth-`n` coin-tossing atom
/// measure (atoms at `Σ eps_j 2/3^j`): `Π_{j=1..n} |cos(xi / 3^j)|`.
/// For large `depth` this converges to the classical Cantor product formula.
pub fn cantor_ft_modulus(xi: f64, depth: u32) -> f64 {
    let mut p = 1.0;
    let mut t = xi / 3.0;
    for _ in 0..depth {
        p *= t.cos().abs();
        if p == 0.0 {
            return 0.0;
        }
        t /= 3.0;
    }
    p
}

/// Modulus of the Fourier transform of Lebesgue on `[0,1)` discretized at
/// scale `k` (atoms of mass `2^-k` at anchors `j 2^-k`): the finite geometric
/// sum `|sin(xi/2) / (2^k sin(xi 2^{-k-1}))|`, with the removable singularity
/// handled.
pub fn lebesgue1_discrete_ft_modulus(xi: f64, k: u32) -> f64 {
    let n = (k as f64).exp2();
    let half = xi / 2.0;
    let tiny = xi / (2.0 * n);
    if tiny.sin().abs() < 1e-300 {
        return 1.0; // xi is a multiple of the full lattice period
    }
    (half.sin() / (n * tiny.sin())).abs()
}

/// Brute-force additive energy: counts quadruples (a, b, a', b') in
/// `A x B x A x B` with `a + b = a' + b'`, by direct enumeration.
pub fn additive_energy_brute(a: &[Vec<i64>], b: &[Vec<i64>]) -> u64 {
    let mut count = 0u64;
    for x in a {
        for y in b {
            for x2 in a {
                for y2 in b {
                    let equal = x
                        .iter()
                        .zip(y)
                        .zip(x2.iter().zip(y2))
                        .all(|((xa, ya), (xb, yb))| xa + ya == xb + yb);
                    if equal {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}

/// All subsets of `0..n` (as 1-d lattice points) with `1 <= size <= max_size`.
pub fn small_subsets(n: u32, max_size: u32) -> Vec<Vec<Vec<i64>>> {
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        if mask.count_ones() <= max_size {
            let pts: Vec<Vec<i64>> = (0..n)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| vec![i as i64])
                .collect();
            out.push(pts);
        }
    }
    out
}

/// Deterministic 64-bit splitmix generator for test fixtures.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform f64 in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}
