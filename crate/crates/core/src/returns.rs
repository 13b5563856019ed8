//! Return probabilities p_m(0) and the expectation E B_n = Σ_{m<n} (n-m) p_m(0).
//!
//! Two routes compute p_m(0):
//!
//! * dynamic programming over the law of S_m on its reachable box (exact,
//!   used for m ≤ [`DP_MAX_STEPS`]);
//! * the periodic trapezoid rule for (2π)^{-2} ∫ φ(u)^m du on a K×K grid.
//!
//! The trapezoid rule on K points integrates e^{i u·x} exactly unless x has a
//! nonzero coordinate divisible by K, so its only error is the aliased mass
//! Σ_{a≠0} P(S_m = K a). Grid sizes are chosen so that this mass is below
//! e^{-45} by a Bernstein bound, or so that K exceeds the reach m·R of the
//! walk, in which case the rule is exact.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::walk::StepDistribution;

/// Largest m handled by the dynamic-programming route.
pub const DP_MAX_STEPS: usize = 64;
/// Doubling stops once successive trapezoid values differ by less than this.
pub const QUAD_DOUBLING_TOL: f64 = 1e-10;
/// Bernstein exponent demanded of the aliased mass.
const ALIAS_EXPONENT: f64 = 45.0;
/// Contributions |φ|^m below this are dropped in table accumulation.
const TABLE_CUTOFF: f64 = 1e-22;
/// Rows per parallel task; fixed so the summation order does not depend on
/// the thread count.
const ROW_BLOCK: usize = 8;

/// Exact p_m(0) by convolving the step law m times.
pub fn return_probability_dp(dist: &StepDistribution, m: usize) -> Result<f64> {
    if m == 0 {
        return Ok(1.0);
    }
    if m > DP_MAX_STEPS {
        return Err(Error::InvalidArgument(format!(
            "dynamic programming route limited to m <= {DP_MAX_STEPS}, got {m}"
        )));
    }
    let r = dist.max_jump() as usize;
    let half = m * r;
    let side = 2 * half + 1;
    let mut cur = vec![0.0f64; side * side];
    let mut next = vec![0.0f64; side * side];
    cur[half * side + half] = 1.0;
    // Only the box reached after k steps can be nonzero.
    for k in 0..m {
        let reach = k * r;
        next.iter_mut().for_each(|v| *v = 0.0);
        for i in half - reach..=half + reach {
            for j in half - reach..=half + reach {
                let v = cur[i * side + j];
                if v == 0.0 {
                    continue;
                }
                for &(p, w) in dist.atoms() {
                    let ii = (i as i64 + p.x as i64) as usize;
                    let jj = (j as i64 + p.y as i64) as usize;
                    next[ii * side + jj] += v * w;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur[half * side + half])
}

/// Per-axis trigonometric tables that make φ and 1 - φ cheap on a grid.
struct GridTrig {
    /// Distinct coordinates used by the atoms.
    coords: Vec<i32>,
    /// `cos(u_j c / 2)` and `sin(u_j c / 2)` for grid index j and coordinate c.
    half_cos: Vec<f64>,
    half_sin: Vec<f64>,
    atoms: Vec<(usize, usize, f64)>,
}

impl GridTrig {
    fn new(dist: &StepDistribution, k: usize) -> Self {
        let mut coords: Vec<i32> = dist.atoms().iter().flat_map(|a| [a.0.x, a.0.y]).collect();
        coords.sort_unstable();
        coords.dedup();
        let nc = coords.len();
        let mut half_cos = vec![0.0; k * nc];
        let mut half_sin = vec![0.0; k * nc];
        for j in 0..k {
            let u = 2.0 * PI * j as f64 / k as f64;
            for (ci, &c) in coords.iter().enumerate() {
                let a = 0.5 * u * c as f64;
                half_cos[j * nc + ci] = a.cos();
                half_sin[j * nc + ci] = a.sin();
            }
        }
        let idx = |c: i32| coords.binary_search(&c).unwrap();
        let atoms = dist.atoms().iter().map(|&(p, w)| (idx(p.x), idx(p.y), w)).collect();
        GridTrig {
            coords,
            half_cos,
            half_sin,
            atoms,
        }
    }

    /// 1 - φ(u) at grid point (i, j), as Σ 2 p sin²(u·a/2).
    #[inline]
    fn one_minus_phi(&self, i: usize, j: usize) -> f64 {
        let nc = self.coords.len();
        let (ci, si) = (&self.half_cos[i * nc..(i + 1) * nc], &self.half_sin[i * nc..(i + 1) * nc]);
        let (cj, sj) = (&self.half_cos[j * nc..(j + 1) * nc], &self.half_sin[j * nc..(j + 1) * nc]);
        let mut acc = 0.0;
        for &(a, b, w) in &self.atoms {
            let s = si[a] * cj[b] + ci[a] * sj[b];
            acc += 2.0 * w * s * s;
        }
        acc
    }
}

/// Trapezoid rule for (2π)^{-2} ∫ φ^m on a K×K periodic grid.
fn trapezoid_return(dist: &StepDistribution, m: usize, k: usize) -> f64 {
    let trig = GridTrig::new(dist, k);
    let m = m as i32;
    let rows: Vec<f64> = (0..k)
        .into_par_iter()
        .map(|i| (0..k).map(|j| (1.0 - trig.one_minus_phi(i, j)).powi(m)).sum::<f64>())
        .collect();
    rows.iter().sum::<f64>() / (k * k) as f64
}

/// Grid size whose aliased mass for walks of up to `m` steps is below
/// e^{-45}; never larger than needed for exactness.
pub fn alias_free_grid(dist: &StepDistribution, m: usize) -> usize {
    let r = dist.max_jump().max(1) as f64;
    let cov = dist.covariance();
    let var = cov[0][0].max(cov[1][1]);
    let m_f = m as f64;
    // Bernstein: P(|S| ≥ t) ≤ 2 exp(-t² / (2(mσ² + R t / 3))).
    let a = ALIAS_EXPONENT;
    let t = (2.0 * a * r / 3.0 + ((2.0 * a * r / 3.0).powi(2) + 8.0 * a * m_f * var).sqrt()) / 2.0;
    let exact = m * dist.max_jump().max(1) as usize + 1;
    (t.ceil() as usize + 1).min(exact).max(8)
}

/// p_m(0) by trapezoid quadrature, doubling the grid until successive values
/// agree to [`QUAD_DOUBLING_TOL`].
pub fn return_probability_quad(dist: &StepDistribution, m: usize) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let mut k = alias_free_grid(dist, m);
    let mut prev = trapezoid_return(dist, m, k);
    loop {
        k *= 2;
        let next = trapezoid_return(dist, m, k);
        if (next - prev).abs() < QUAD_DOUBLING_TOL {
            return next;
        }
        prev = next;
    }
}

/// p_m(0): dynamic programming for m ≤ 64, quadrature beyond.
pub fn return_probability(dist: &StepDistribution, m: usize) -> f64 {
    if m <= DP_MAX_STEPS {
        return_probability_dp(dist, m).expect("m within the dynamic-programming range")
    } else {
        return_probability_quad(dist, m)
    }
}

/// The local-limit asymptote 1 / (2π √det Γ m).
pub fn return_probability_asymptotic(dist: &StepDistribution, m: usize) -> f64 {
    1.0 / (2.0 * PI * dist.det_gamma().sqrt() * m as f64)
}

/// p_1(0) .. p_M(0) from one trapezoid grid.
///
/// Each grid point contributes the geometric sequence φ(u)^m to every m
/// until |φ(u)|^m drops below 1e-22, so the cost is far below K²·M.
#[derive(Debug, Clone)]
pub struct ReturnTable {
    /// `p[m]` is p_m(0); `p[0] = 1`.
    p: Vec<f64>,
    grid: usize,
}

impl ReturnTable {
    pub fn build(dist: &StepDistribution, max_m: usize) -> Self {
        let k = alias_free_grid(dist, max_m.max(1));
        let trig = GridTrig::new(dist, k);
        let blocks: Vec<Vec<f64>> = (0..k.div_ceil(ROW_BLOCK))
            .into_par_iter()
            .map(|b| {
                let mut acc = vec![0.0f64; max_m + 1];
                for i in b * ROW_BLOCK..((b + 1) * ROW_BLOCK).min(k) {
                    for j in 0..k {
                        let phi = 1.0 - trig.one_minus_phi(i, j);
                        let mut pow = 1.0;
                        for slot in acc.iter_mut().skip(1) {
                            pow *= phi;
                            if pow.abs() < TABLE_CUTOFF {
                                break;
                            }
                            *slot += pow;
                        }
                    }
                }
                acc
            })
            .collect();
        let norm = 1.0 / (k * k) as f64;
        let mut p = vec![0.0; max_m + 1];
        for block in &blocks {
            for (dst, v) in p.iter_mut().zip(block) {
                *dst += v;
            }
        }
        p.iter_mut().for_each(|v| *v *= norm);
        p[0] = 1.0;
        ReturnTable { p, grid: k }
    }

    pub fn max_m(&self) -> usize {
        self.p.len() - 1
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    /// p_m(0), or `None` beyond the table.
    pub fn get(&self, m: usize) -> Option<f64> {
        self.p.get(m).copied()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    /// Σ_{m=1}^{n-1} (n - m) p_m(0), for n ≤ max_m + 1.
    pub fn expected_silt(&self, n: usize) -> Option<f64> {
        if n == 0 || n > self.p.len() {
            return None;
        }
        // Summed from large m down so the small late terms are not lost.
        Some((1..n).rev().map(|m| (n - m) as f64 * self.p[m]).sum())
    }
}

/// G_n(x) = Σ_{m=1}^{n-1} (n - m) x^m, given y = 1 - x.
#[inline]
fn silt_generating(n: usize, y: f64) -> f64 {
    let nf = n as f64;
    let x = 1.0 - y;
    if nf * y < 1e-2 {
        // Cancellation regime: sum directly (only a handful of grid points).
        let mut acc = 0.0;
        let mut pow = 1.0;
        for m in 1..n {
            pow *= x;
            acc += (nf - m as f64) * pow;
        }
        return acc;
    }
    let one_minus_xn = if x > 0.5 {
        -(nf * (-y).ln_1p()).exp_m1()
    } else {
        1.0 - x.powi(n as i32)
    };
    x * (nf * y - one_minus_xn) / (y * y)
}

/// E B_n by trapezoid quadrature of the closed-form generating function
/// Σ (n-m) φ^m. Equal to summing the exact p_m(0), up to aliased mass below
/// e^{-45}; used for n beyond the range of a [`ReturnTable`].
pub fn expected_silt_quadrature(dist: &StepDistribution, n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let k = alias_free_grid(dist, n);
    let trig = GridTrig::new(dist, k);
    let rows: Vec<f64> = (0..k)
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for j in 0..k {
                let y = trig.one_minus_phi(i, j);
                s += if y == 0.0 {
                    // u = 0 (or a period point for a periodic law)
                    let nf = n as f64;
                    nf * (nf - 1.0) / 2.0
                } else {
                    silt_generating(n, y)
                };
            }
            s
        })
        .collect();
    rows.iter().sum::<f64>() / (k * k) as f64
}

/// n log n / (2π √det Γ), the leading term of E B_n.
pub fn expected_silt_asymptotic(dist: &StepDistribution, n: usize) -> f64 {
    let nf = n as f64;
    nf * nf.ln() / (2.0 * PI * dist.det_gamma().sqrt())
}

/// E B_n with caching: exact table sums up to the table length, quadrature
/// of the generating function beyond it.
#[derive(Debug, Clone)]
pub struct ExpectedSilt {
    dist: StepDistribution,
    table: ReturnTable,
    large: BTreeMap<usize, f64>,
}

/// Default table length; covers every n used by the tail experiments.
pub const DEFAULT_TABLE_LEN: usize = 1 << 14;

impl ExpectedSilt {
    pub fn new(dist: &StepDistribution) -> Self {
        Self::with_table(dist, DEFAULT_TABLE_LEN)
    }

    pub fn with_table(dist: &StepDistribution, max_m: usize) -> Self {
        ExpectedSilt {
            dist: dist.clone(),
            table: ReturnTable::build(dist, max_m),
            large: BTreeMap::new(),
        }
    }

    pub fn dist(&self) -> &StepDistribution {
        &self.dist
    }

    pub fn table(&self) -> &ReturnTable {
        &self.table
    }

    /// E B_n, computing and caching it if needed.
    pub fn value(&mut self, n: usize) -> f64 {
        if let Some(v) = self.get(n) {
            return v;
        }
        let v = expected_silt_quadrature(&self.dist, n);
        self.large.insert(n, v);
        v
    }

    /// Computes every missing value in `ns`; afterwards [`get`](Self::get)
    /// answers them without mutation.
    pub fn prefetch(&mut self, ns: &[usize]) {
        for &n in ns {
            self.value(n);
        }
    }

    /// Cached or tabulated E B_n.
    pub fn get(&self, n: usize) -> Option<f64> {
        if n <= 1 {
            return Some(0.0);
        }
        self.table.expected_silt(n).or_else(|| self.large.get(&n).copied())
    }

    /// Seeds the cache with externally persisted values.
    pub fn insert(&mut self, n: usize, value: f64) {
        if self.table.expected_silt(n).is_none() {
            self.large.insert(n, value);
        }
    }

    /// Values computed by quadrature so far (the persisted part of the cache).
    pub fn computed(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.large.iter().map(|(&n, &v)| (n, v))
    }
}

/// E B_n for a single n.
pub fn expected_silt(dist: &StepDistribution, n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    if n <= 4096 {
        ReturnTable::build(dist, n - 1).expected_silt(n).unwrap()
    } else {
        expected_silt_quadrature(dist, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn simple_walk_small_returns() {
        let d = StepDistribution::simple();
        assert_eq!(return_probability_dp(&d, 1).unwrap(), 0.0);
        // 16 two-step sequences, 4 of which return.
        assert_abs_diff_eq!(return_probability_dp(&d, 2).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(return_probability_quad(&d, 2), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn lazy_walk_stay_mass() {
        let d = StepDistribution::lazy();
        assert_abs_diff_eq!(return_probability(&d, 1), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn dp_and_quadrature_agree() {
        for d in [StepDistribution::lazy(), StepDistribution::king(), StepDistribution::simple()] {
            let table = ReturnTable::build(&d, DP_MAX_STEPS);
            for m in [1, 2, 3, 5, 8, 17, 33, 64] {
                let a = return_probability_dp(&d, m).unwrap();
                let b = return_probability_quad(&d, m);
                let c = table.get(m).unwrap();
                assert!((a - b).abs() < 1e-9, "m={m}: dp {a} quad {b}");
                assert!((a - c).abs() < 1e-9, "m={m}: dp {a} table {c}");
            }
        }
    }

    #[test]
    fn sticky_walk_dp_matches_quadrature() {
        let d = StepDistribution::sticky_jump(10).unwrap();
        for m in [1, 4, 16] {
            let a = return_probability_dp(&d, m).unwrap();
            let b = return_probability_quad(&d, m);
            assert!((a - b).abs() < 1e-9, "m={m}: {a} vs {b}");
        }
    }

    #[test]
    fn expected_silt_small_cases() {
        assert_eq!(expected_silt(&StepDistribution::lazy(), 1), 0.0);
        // 2 p_1 + p_2 = 0 + 1/4
        assert_abs_diff_eq!(expected_silt(&StepDistribution::simple(), 3), 0.25, epsilon = 1e-12);
        let lazy = StepDistribution::lazy();
        assert_abs_diff_eq!(expected_silt(&lazy, 2), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn generating_function_matches_table() {
        let d = StepDistribution::lazy();
        let table = ReturnTable::build(&d, 4096);
        for n in [2, 3, 10, 100, 1000, 4097] {
            let a = table.expected_silt(n).unwrap();
            let b = expected_silt_quadrature(&d, n);
            assert!((a - b).abs() <= 1e-9 * a.max(1.0), "n={n}: {a} vs {b}");
        }
    }

    #[test]
    fn generating_function_closed_form() {
        for n in [2usize, 3, 7, 50] {
            for y in [0.3, 0.9, 1.5, 1.99, 0.0005] {
                let x: f64 = 1.0 - y;
                let direct: f64 = (1..n).map(|m| (n - m) as f64 * x.powi(m as i32)).sum();
                let closed = silt_generating(n, y);
                assert!((direct - closed).abs() < 1e-9 * direct.abs().max(1.0), "n={n} y={y}");
            }
        }
    }
}
