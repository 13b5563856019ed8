//! Monte Carlo estimators for the moderate deviations of γ_n = B_n - E B_n,
//! exact small-n distributions, and iterated-logarithm traces.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::lattice::Point;
use crate::occupation::OccupationMap;
use crate::returns::{expected_silt, ExpectedSilt};
use crate::rng::derive_seed;
use crate::silt::SiltAccumulator;
use crate::walk::StepDistribution;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;
/// Minimum number of trials behind any reported estimate.
pub const MIN_TRIALS: usize = 100;
/// Batches used for batch-means intervals.
pub const BATCHES: usize = 20;

/// Growth rule for b_n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BRule {
    Log,
    Sqrt,
    Pow(f64),
    Const(f64),
}

/// b_n together with whether it satisfies b_n → ∞ and b_n = o(n).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingSchedule {
    rule: BRule,
    outside_hypotheses: bool,
}

impl ScalingSchedule {
    pub fn log() -> Self {
        ScalingSchedule {
            rule: BRule::Log,
            outside_hypotheses: false,
        }
    }

    pub fn sqrt() -> Self {
        ScalingSchedule {
            rule: BRule::Sqrt,
            outside_hypotheses: false,
        }
    }

    /// b_n = n^α for 0 < α < 1.
    pub fn pow(alpha: f64) -> Result<Self> {
        if alpha >= 1.0 {
            return Err(Error::InvalidSchedule(format!(
                "b_n = n^{alpha} violates the hypothesis b_n = o(n)"
            )));
        }
        if !(alpha > 0.0) {
            return Err(Error::InvalidSchedule(format!("b_n = n^{alpha} does not tend to infinity")));
        }
        Ok(ScalingSchedule {
            rule: BRule::Pow(alpha),
            outside_hypotheses: false,
        })
    }

    /// Constant b_n; refused unless the caller opts out of the hypotheses.
    pub fn constant(c: f64, allow_outside_hypotheses: bool) -> Result<Self> {
        if !allow_outside_hypotheses {
            return Err(Error::InvalidSchedule(format!(
                "constant b_n = {c} is outside theorem hypotheses (b_n must tend to infinity); pass the outside-hypotheses flag to run it anyway"
            )));
        }
        if !(c >= 1.0) {
            return Err(Error::InvalidSchedule(format!("b_n = {c} must be at least 1")));
        }
        Ok(ScalingSchedule {
            rule: BRule::Const(c),
            outside_hypotheses: true,
        })
    }

    pub fn rule(&self) -> BRule {
        self.rule
    }

    pub fn outside_hypotheses(&self) -> bool {
        self.outside_hypotheses
    }

    /// b_n, checked against 1 ≤ b_n < n.
    pub fn b(&self, n: usize) -> Result<f64> {
        let nf = n as f64;
        let b = match self.rule {
            BRule::Log => nf.ln(),
            BRule::Sqrt => nf.sqrt(),
            BRule::Pow(a) => nf.powf(a),
            BRule::Const(c) => c,
        };
        if b >= nf {
            return Err(Error::InvalidSchedule(format!(
                "b_n = {b} at n = {n} is not below n, violating the hypothesis b_n = o(n)"
            )));
        }
        if !(b >= 1.0) {
            return Err(Error::InvalidSchedule(format!("b_n = {b} at n = {n} is below 1")));
        }
        Ok(b)
    }

    /// Short label used in reports: log, sqrt, pow:α, const:c.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ScalingSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.rule {
            BRule::Log => write!(f, "log"),
            BRule::Sqrt => write!(f, "sqrt"),
            BRule::Pow(a) => write!(f, "pow:{a}"),
            BRule::Const(c) => write!(f, "const:{c}"),
        }
    }
}

impl FromStr for ScalingSchedule {
    type Err = Error;

    /// Parses `log`, `sqrt`, `pow:α`, `const:c` (refused) and
    /// `const!:c` (accepted, flagged as outside the hypotheses).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let num = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidSchedule(format!("bad number '{t}' in schedule '{s}'")))
        };
        match s {
            "log" => Ok(Self::log()),
            "sqrt" => Ok(Self::sqrt()),
            "n" | "linear" => Err(Error::InvalidSchedule(
                "b_n = n violates the hypothesis b_n = o(n)".into(),
            )),
            _ => {
                if let Some(a) = s.strip_prefix("pow:") {
                    Self::pow(num(a)?)
                } else if let Some(c) = s.strip_prefix("const!:") {
                    Self::constant(num(c)?, true)
                } else if let Some(c) = s.strip_prefix("const:") {
                    Self::constant(num(c)?, false)
                } else {
                    Err(Error::InvalidSchedule(format!("unknown schedule '{s}'")))
                }
            }
        }
    }
}

/// Constants attached to a walk with covariance determinant det Γ and a
/// value of κ(2,2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationConstants {
    pub kappa: f64,
    pub det_gamma: f64,
}

impl DeviationConstants {
    pub fn new(kappa: f64, det_gamma: f64) -> Self {
        DeviationConstants { kappa, det_gamma }
    }

    /// Ξ = √det Γ κ^{-4}.
    pub fn xi(&self) -> f64 {
        self.det_gamma.sqrt() / self.kappa.powi(4)
    }

    /// Θ = (2π)^{-1} det Γ^{-1/2}.
    pub fn big_theta(&self) -> f64 {
        1.0 / (2.0 * PI * self.det_gamma.sqrt())
    }

    /// Δ = 2π √det Γ.
    pub fn delta(&self) -> f64 {
        2.0 * PI * self.det_gamma.sqrt()
    }

    /// ¼ κ⁴ θ² det Γ^{-1/2}.
    pub fn cumulant(&self, theta: f64) -> f64 {
        0.25 * self.kappa.powi(4) * theta * theta / self.det_gamma.sqrt()
    }

    /// -λ Ξ.
    pub fn upper_tail_rate(&self, lambda: f64) -> f64 {
        -lambda * self.xi()
    }

    /// det Γ^{-1/2} κ⁴.
    pub fn lil_upper(&self) -> f64 {
        self.kappa.powi(4) / self.det_gamma.sqrt()
    }

    /// -(2π)^{-1} det Γ^{-1/2}.
    pub fn lil_lower(&self) -> f64 {
        -self.big_theta()
    }
}

/// Independent samples of B_n, trial i drawn from stream i.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    pub n: usize,
    pub seed: u64,
    pub expected: f64,
    pub silt: Vec<u64>,
}

impl TrialSet {
    /// Simulates `trials` walks of length n; the result does not depend on
    /// the number of threads.
    pub fn simulate(dist: &StepDistribution, n: usize, trials: usize, seed: u64, expected: f64) -> Self {
        let silt = (0..trials as u64)
            .into_par_iter()
            .map_init(
                || SiltAccumulator::with_capacity(n),
                |acc, i| {
                    acc.clear();
                    acc.extend(dist.positions(seed, i).take(n));
                    acc.b()
                },
            )
            .collect();
        TrialSet { n, seed, expected, silt }
    }

    /// Trial sets for several lengths read off prefixes of the same paths:
    /// trial i of every returned set is the same walk, stopped at each n.
    pub fn simulate_prefixes(dist: &StepDistribution, ns: &[usize], trials: usize, seed: u64, expected: &[f64]) -> Result<Vec<Self>> {
        if ns.is_empty() || ns.windows(2).any(|w| w[1] <= w[0]) || expected.len() != ns.len() {
            return Err(Error::InvalidArgument(
                "prefix lengths must be strictly increasing, one expectation each".into(),
            ));
        }
        let n_max = *ns.last().unwrap();
        let rows: Vec<Vec<u64>> = (0..trials as u64)
            .into_par_iter()
            .map_init(
                || SiltAccumulator::with_capacity(n_max),
                |acc, i| {
                    acc.clear();
                    let mut out = Vec::with_capacity(ns.len());
                    let mut next = 0;
                    for p in dist.positions(seed, i).take(n_max) {
                        acc.push(p);
                        if acc.n() as usize == ns[next] {
                            out.push(acc.b());
                            next += 1;
                        }
                    }
                    out
                },
            )
            .collect();
        Ok(ns
            .iter()
            .zip(expected)
            .enumerate()
            .map(|(k, (&n, &e))| TrialSet {
                n,
                seed,
                expected: e,
                silt: rows.iter().map(|r| r[k]).collect(),
            })
            .collect())
    }

    pub fn len(&self) -> usize {
        self.silt.len()
    }

    pub fn is_empty(&self) -> bool {
        self.silt.is_empty()
    }

    pub fn gamma(&self, i: usize) -> f64 {
        self.silt[i] as f64 - self.expected
    }

    pub fn gammas(&self) -> impl Iterator<Item = f64> + '_ {
        self.silt.iter().map(move |&b| b as f64 - self.expected)
    }

    fn check(&self) -> Result<()> {
        if self.len() < MIN_TRIALS {
            return Err(Error::InvalidArgument(format!(
                "{} trials is below the statistical minimum of {MIN_TRIALS}",
                self.len()
            )));
        }
        Ok(())
    }

    /// Cumulant estimate (1/b_n) log mean exp{θ √(b_n/n) |γ_n|^{1/2}}.
    pub fn cumulant(&self, b_n: f64, theta: f64) -> Result<TailEstimate> {
        self.check()?;
        if !(theta >= 0.0) {
            return Err(Error::InvalidArgument(format!("theta must be nonnegative, got {theta}")));
        }
        let scale = theta * (b_n / self.n as f64).sqrt();
        let v: Vec<f64> = self.gammas().map(|g| scale * g.abs().sqrt()).collect();
        let estimate = log_mean_exp(&v) / b_n;
        let batch = self.len() / BATCHES;
        let (mut lo, mut hi) = (estimate, estimate);
        if batch >= 1 {
            let means: Vec<f64> = (0..BATCHES).map(|k| log_mean_exp(&v[k * batch..(k + 1) * batch]) / b_n).collect();
            let m = means.iter().sum::<f64>() / BATCHES as f64;
            let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
            let t = StudentsT::new(0.0, 1.0, (BATCHES - 1) as f64).unwrap().inverse_cdf(0.975);
            let half = t * (var / BATCHES as f64).sqrt();
            lo = estimate - half;
            hi = estimate + half;
        }
        Ok(TailEstimate {
            kind: EstimateKind::Cumulant,
            n: self.n,
            b_n,
            param: theta,
            trials: self.len(),
            successes: None,
            p_hat: None,
            estimate,
            ci: (lo, hi),
            theory: None,
            flagged: false,
            seed: self.seed,
        })
    }

    /// Raw mean of exp{θ √(b_n/n) |γ_n|^{1/2}} and its standard error.
    pub fn moment(&self, b_n: f64, theta: f64) -> (f64, f64) {
        let scale = theta * (b_n / self.n as f64).sqrt();
        let v: Vec<f64> = self.gammas().map(|g| (scale * g.abs().sqrt()).exp()).collect();
        mean_and_se(&v)
    }

    /// Number of trials with γ_n ≥ t.
    pub fn count_upper(&self, t: f64) -> usize {
        self.gammas().filter(|&g| g >= t).count()
    }

    /// Number of trials with -γ_n ≥ t.
    pub fn count_lower(&self, t: f64) -> usize {
        self.gammas().filter(|&g| -g >= t).count()
    }

    /// P{γ_n ≥ λ n b_n}, reported as (1/b_n) log p̂.
    pub fn upper_tail(&self, b_n: f64, lambda: f64) -> Result<TailEstimate> {
        self.check()?;
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
        }
        let k = self.count_upper(lambda * self.n as f64 * b_n);
        Ok(self.bernoulli(EstimateKind::UpperTail, b_n, lambda, k, |p| p.ln() / b_n))
    }

    /// P{E B_n - B_n ≥ θ Θ n log b_n}, reported as b_n^{-θ} log p̂. Here
    /// `big_theta` is Θ = (2π)^{-1} det Γ^{-1/2}.
    pub fn lower_tail(&self, b_n: f64, theta_exp: f64, big_theta: f64) -> Result<TailEstimate> {
        self.check()?;
        let t = theta_exp * big_theta * self.n as f64 * b_n.ln();
        let k = self.count_lower(t);
        let norm = b_n.powf(-theta_exp);
        Ok(self.bernoulli(EstimateKind::LowerTail, b_n, theta_exp, k, |p| norm * p.ln()))
    }

    fn bernoulli(&self, kind: EstimateKind, b_n: f64, param: f64, k: usize, transform: impl Fn(f64) -> f64) -> TailEstimate {
        let t = self.len() as f64;
        let p = k as f64 / t;
        let (estimate, ci, flagged) = if k == 0 {
            // Rule of three: one-sided 95% upper bound 3/T.
            (f64::NEG_INFINITY, (f64::NEG_INFINITY, transform(3.0 / t)), true)
        } else {
            let half = Z95 * (p * (1.0 - p) / t).sqrt();
            let lo = p - half;
            let hi = (p + half).min(1.0);
            let lo_t = if lo > 0.0 { transform(lo) } else { f64::NEG_INFINITY };
            (transform(p), (lo_t, transform(hi)), false)
        };
        TailEstimate {
            kind,
            n: self.n,
            b_n,
            param,
            trials: self.len(),
            successes: Some(k),
            p_hat: Some(p),
            estimate,
            ci,
            theory: None,
            flagged,
            seed: self.seed,
        }
    }
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = pairwise_sum(v) / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Pairwise (tree) summation.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// log((1/N) Σ e^{v_i}) without overflow.
pub fn log_mean_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let shifted: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    m + (pairwise_sum(&shifted) / v.len() as f64).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    Cumulant,
    UpperTail,
    LowerTail,
}

impl EstimateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimateKind::Cumulant => "cumulant",
            EstimateKind::UpperTail => "upper_tail",
            EstimateKind::LowerTail => "lower_tail",
        }
    }
}

/// One Monte Carlo estimate with its interval and theory value.
///
/// For tails, `estimate` and `ci` are on the normalized log scale
/// ((1/b_n) log p̂ for the upper tail, b_n^{-θ} log p̂ for the lower tail);
/// `p_hat` carries the raw frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub kind: EstimateKind,
    pub n: usize,
    pub b_n: f64,
    /// θ, λ or the lower-tail exponent.
    pub param: f64,
    pub trials: usize,
    pub successes: Option<usize>,
    pub p_hat: Option<f64>,
    pub estimate: f64,
    pub ci: (f64, f64),
    pub theory: Option<f64>,
    /// Set when no trial hit the event; only the upper CI bound is meaningful.
    pub flagged: bool,
    pub seed: u64,
}

impl TailEstimate {
    pub fn with_theory(mut self, theory: f64) -> Self {
        self.theory = Some(theory);
        self
    }
}

fn require_aperiodic(dist: &StepDistribution) -> Result<()> {
    if !dist.strongly_aperiodic() {
        return Err(Error::HypothesesViolated(
            "step distribution is not strongly aperiodic".into(),
        ));
    }
    Ok(())
}

fn trial_set(dist: &StepDistribution, n: usize, trials: usize, seed: u64) -> Result<TrialSet> {
    require_aperiodic(dist)?;
    if trials < MIN_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "{trials} trials is below the statistical minimum of {MIN_TRIALS}"
        )));
    }
    Ok(TrialSet::simulate(dist, n, trials, seed, expected_silt(dist, n)))
}

/// Cumulant estimate with theory value ¼ κ⁴ θ² det Γ^{-1/2} attached.
pub fn estimate_cumulant(
    dist: &StepDistribution,
    n: usize,
    schedule: &ScalingSchedule,
    theta: f64,
    trials: usize,
    seed: u64,
    kappa: f64,
) -> Result<TailEstimate> {
    let b = schedule.b(n)?;
    let ts = trial_set(dist, n, trials, seed)?;
    let c = DeviationConstants::new(kappa, dist.det_gamma());
    Ok(ts.cumulant(b, theta)?.with_theory(c.cumulant(theta)))
}

/// Upper-tail estimate with theory value -λΞ attached.
pub fn estimate_upper_tail(
    dist: &StepDistribution,
    n: usize,
    schedule: &ScalingSchedule,
    lambda: f64,
    trials: usize,
    seed: u64,
    kappa: f64,
) -> Result<TailEstimate> {
    let b = schedule.b(n)?;
    let ts = trial_set(dist, n, trials, seed)?;
    let c = DeviationConstants::new(kappa, dist.det_gamma());
    Ok(ts.upper_tail(b, lambda)?.with_theory(c.upper_tail_rate(lambda)))
}

/// Lower-tail estimate. No sharp constant exists, so no theory value is set.
pub fn estimate_lower_tail(
    dist: &StepDistribution,
    n: usize,
    schedule: &ScalingSchedule,
    theta_exp: f64,
    trials: usize,
    seed: u64,
) -> Result<TailEstimate> {
    let b = schedule.b(n)?;
    let ts = trial_set(dist, n, trials, seed)?;
    let c = DeviationConstants::new(1.0, dist.det_gamma());
    ts.lower_tail(b, theta_exp, c.big_theta())
}

/// Exact law of B_n for a short walk.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    pub n: usize,
    /// (value, probability), ascending in value.
    pub table: Vec<(u64, f64)>,
}

impl ExactDistribution {
    pub fn total(&self) -> f64 {
        self.table.iter().map(|e| e.1).sum()
    }

    pub fn mean(&self) -> f64 {
        self.table.iter().map(|&(v, p)| v as f64 * p).sum()
    }

    pub fn prob(&self, value: u64) -> f64 {
        self.table.iter().find(|e| e.0 == value).map_or(0.0, |e| e.1)
    }

    /// E f(B_n).
    pub fn expect(&self, f: impl Fn(u64) -> f64) -> f64 {
        self.table.iter().map(|&(v, p)| p * f(v)).sum()
    }

    /// P(B_n - E B_n ≥ t), with E B_n taken as `expected`.
    pub fn upper_tail(&self, expected: f64, t: f64) -> f64 {
        self.expect(|v| if v as f64 - expected >= t { 1.0 } else { 0.0 })
    }

    /// P(E B_n - B_n ≥ t).
    pub fn lower_tail(&self, expected: f64, t: f64) -> f64 {
        self.expect(|v| if expected - v as f64 >= t { 1.0 } else { 0.0 })
    }
}

/// Paths the exhaustive enumeration is willing to visit.
pub const ENUMERATION_BUDGET: u128 = 10_000_000;

/// Exact distribution of B_n by enumerating every step sequence.
pub fn exhaustive_silt_distribution(dist: &StepDistribution, n: usize) -> Result<ExactDistribution> {
    let k = dist.atoms().len() as u128;
    let count = k.checked_pow(n as u32).unwrap_or(u128::MAX);
    if count > ENUMERATION_BUDGET {
        return Err(Error::EnumerationBudget {
            count,
            budget: ENUMERATION_BUDGET,
        });
    }
    if n == 0 {
        return Ok(ExactDistribution { n, table: vec![(0, 1.0)] });
    }
    // One subtree per first step, merged in atom order.
    let parts: Vec<BTreeMap<u64, f64>> = dist
        .atoms()
        .par_iter()
        .map(|&(first, w)| {
            let mut acc = SiltAccumulator::with_capacity(n);
            acc.push(first);
            let mut out = BTreeMap::new();
            enumerate(dist, n, &mut acc, first, w, &mut out);
            out
        })
        .collect();
    let mut merged: BTreeMap<u64, f64> = BTreeMap::new();
    for part in parts {
        for (v, p) in part {
            *merged.entry(v).or_default() += p;
        }
    }
    Ok(ExactDistribution {
        n,
        table: merged.into_iter().collect(),
    })
}

fn enumerate(dist: &StepDistribution, n: usize, acc: &mut SiltAccumulator, at: Point, weight: f64, out: &mut BTreeMap<u64, f64>) {
    if acc.n() as usize == n {
        *out.entry(acc.b()).or_default() += weight;
        return;
    }
    for &(step, w) in dist.atoms() {
        let next = at + step;
        acc.push(next);
        enumerate(dist, n, acc, next, weight * w, out);
        acc.remove(next);
    }
}

/// Visits every step sequence of length n with its probability.
pub fn for_each_path(dist: &StepDistribution, n: usize, mut f: impl FnMut(&[usize], f64)) -> Result<()> {
    let k = dist.atoms().len();
    let count = (k as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if count > ENUMERATION_BUDGET {
        return Err(Error::EnumerationBudget {
            count,
            budget: ENUMERATION_BUDGET,
        });
    }
    let mut idx = vec![0usize; n];
    loop {
        let w: f64 = idx.iter().map(|&i| dist.atoms()[i].1).product();
        f(&idx, w);
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(());
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < k {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// One estimator setting checked against the exact law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditCheck {
    pub kind: EstimateKind,
    pub param: f64,
    /// Exact value on the raw scale: a probability for tails, E exp{…} for
    /// the cumulant.
    pub exact: f64,
    /// Largest |z| over the repetitions.
    pub max_abs_z: f64,
    /// Repetitions with |z| ≤ 3.
    pub within: usize,
    pub reps: usize,
}

impl AuditCheck {
    pub fn pass_rate(&self) -> f64 {
        self.within as f64 / self.reps as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub n: usize,
    pub b_n: f64,
    pub trials: usize,
    pub seed: u64,
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    /// Whether every setting agreed within 3 standard errors in at least
    /// `rate` of the repetitions.
    pub fn passes(&self, rate: f64) -> bool {
        self.checks.iter().all(|c| c.pass_rate() >= rate)
    }
}

/// Parameters exercised by [`oracle_audit`].
pub const AUDIT_LAMBDAS: [f64; 3] = [0.1, 0.25, 0.5];
pub const AUDIT_LOWER_EXPONENTS: [f64; 3] = [0.5, 1.0, 2.0];
pub const AUDIT_THETAS: [f64; 3] = [0.5, 1.0, 2.0];

/// Runs every Monte Carlo estimator `reps` times at a length small enough to
/// enumerate, and scores each run by its distance from the exact answer in
/// units of the exact binomial (or sample-mean) standard error.
pub fn oracle_audit(dist: &StepDistribution, n: usize, reps: usize, trials: usize, seed: u64) -> Result<AuditReport> {
    require_aperiodic(dist)?;
    if n < 3 {
        return Err(Error::InvalidArgument(format!("audit length must be at least 3, got {n}")));
    }
    let exact = exhaustive_silt_distribution(dist, n)?;
    let expected = expected_silt(dist, n);
    let b_n = ScalingSchedule::log().b(n)?;
    let big_theta = DeviationConstants::new(1.0, dist.det_gamma()).big_theta();
    let nf = n as f64;

    struct Setting {
        kind: EstimateKind,
        param: f64,
        exact: f64,
        sd: f64,
    }
    let mut settings = Vec::new();
    for &lambda in &AUDIT_LAMBDAS {
        let p = exact.upper_tail(expected, lambda * nf * b_n);
        settings.push(Setting { kind: EstimateKind::UpperTail, param: lambda, exact: p, sd: (p * (1.0 - p)).sqrt() });
    }
    for &theta_exp in &AUDIT_LOWER_EXPONENTS {
        let p = exact.lower_tail(expected, theta_exp * big_theta * nf * b_n.ln());
        settings.push(Setting { kind: EstimateKind::LowerTail, param: theta_exp, exact: p, sd: (p * (1.0 - p)).sqrt() });
    }
    for &theta in &AUDIT_THETAS {
        let scale = theta * (b_n / nf).sqrt();
        let f = |v: u64| (scale * (v as f64 - expected).abs().sqrt()).exp();
        let m = exact.expect(f);
        let var = exact.expect(|v| (f(v) - m).powi(2));
        settings.push(Setting { kind: EstimateKind::Cumulant, param: theta, exact: m, sd: var.sqrt() });
    }

    let zs: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| -> Result<Vec<f64>> {
            let ts = TrialSet::simulate(dist, n, trials, derive_seed(seed, rep), expected);
            settings
                .iter()
                .map(|s| {
                    let observed = match s.kind {
                        EstimateKind::UpperTail => ts.upper_tail(b_n, s.param)?.p_hat.unwrap_or(0.0),
                        EstimateKind::LowerTail => ts.lower_tail(b_n, s.param, big_theta)?.p_hat.unwrap_or(0.0),
                        EstimateKind::Cumulant => (ts.cumulant(b_n, s.param)?.estimate * b_n).exp(),
                    };
                    let se = s.sd / (trials as f64).sqrt();
                    let diff = observed - s.exact;
                    Ok(if se > 0.0 {
                        diff / se
                    } else if diff.abs() <= 1e-12 * s.exact.abs().max(1.0) {
                        0.0
                    } else {
                        f64::INFINITY
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let checks = settings
        .iter()
        .enumerate()
        .map(|(j, s)| AuditCheck {
            kind: s.kind,
            param: s.param,
            exact: s.exact,
            max_abs_z: zs.iter().map(|z| z[j].abs()).fold(0.0, f64::max),
            within: zs.iter().filter(|z| z[j].abs() <= 3.0).count(),
            reps,
        })
        .collect();
    Ok(AuditReport { n, b_n, trials, seed, checks })
}

/// Running extremes of the renormalized SILT along one long path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LilTrace {
    pub seed: u64,
    pub checkpoints: Vec<usize>,
    /// γ_n / n at each checkpoint.
    pub gamma_over_n: Vec<f64>,
    /// γ_n / (n log log n).
    pub upper: Vec<f64>,
    /// γ_n / (n log log log n).
    pub lower: Vec<f64>,
    pub running_max: Vec<f64>,
    pub running_min: Vec<f64>,
}

impl LilTrace {
    pub fn max_upper(&self) -> f64 {
        self.upper.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_lower(&self) -> f64 {
        self.lower.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Smallest n at which LIL ratios are recorded (log log log n > 0).
pub const LIL_MIN_N: usize = 16;

/// Geometric checkpoints start, start·2^{1/k}, ... up to n_max (inclusive),
/// rounded and deduplicated.
pub fn geometric_checkpoints(start: usize, n_max: usize, per_octave: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let ratio = 2f64.powf(1.0 / per_octave.max(1) as f64);
    let mut x = start.max(1) as f64;
    while x.round() as usize <= n_max {
        let n = x.round() as usize;
        if out.last() != Some(&n) {
            out.push(n);
        }
        x *= ratio;
    }
    if out.last() != Some(&n_max) {
        out.push(n_max);
    }
    out
}

/// Streams one path of length max(checkpoints) and records the LIL ratios.
/// `expected` must already hold E B_n for every checkpoint.
pub fn lil_trace(dist: &StepDistribution, checkpoints: &[usize], seed: u64, expected: &ExpectedSilt) -> Result<LilTrace> {
    if checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("LIL checkpoints must be strictly increasing".into()));
    }
    if checkpoints.first().is_some_and(|&n| n < LIL_MIN_N) {
        return Err(Error::InvalidArgument(format!("LIL checkpoints must start at n ≥ {LIL_MIN_N}")));
    }
    let eb: Vec<f64> = checkpoints
        .iter()
        .map(|&n| {
            expected
                .get(n)
                .ok_or_else(|| Error::InvalidArgument(format!("E B_n for n = {n} not prefetched")))
        })
        .collect::<Result<_>>()?;
    let n_max = checkpoints.last().copied().unwrap_or(0);
    let mut occ = OccupationMap::with_capacity(n_max);
    let mut b: u64 = 0;
    let mut trace = LilTrace {
        seed,
        checkpoints: checkpoints.to_vec(),
        gamma_over_n: Vec::with_capacity(checkpoints.len()),
        upper: Vec::with_capacity(checkpoints.len()),
        lower: Vec::with_capacity(checkpoints.len()),
        running_max: Vec::with_capacity(checkpoints.len()),
        running_min: Vec::with_capacity(checkpoints.len()),
    };
    let mut next = 0;
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for (t, p) in dist.positions(seed, 0).take(n_max).enumerate() {
        b += occ.increment(p) as u64;
        let n = t + 1;
        if next < checkpoints.len() && checkpoints[next] == n {
            let nf = n as f64;
            let g = (b as f64 - eb[next]) / nf;
            let ll = nf.ln().ln();
            let up = g / ll;
            let down = g / ll.ln();
            hi = hi.max(up);
            lo = lo.min(down);
            trace.gamma_over_n.push(g);
            trace.upper.push(up);
            trace.lower.push(down);
            trace.running_max.push(hi);
            trace.running_min.push(lo);
            next += 1;
        }
    }
    Ok(trace)
}

/// LIL traces for several seeds, run in parallel, in seed order.
pub fn lil_traces(dist: &StepDistribution, checkpoints: &[usize], seeds: &[u64], expected: &ExpectedSilt) -> Result<Vec<LilTrace>> {
    seeds.par_iter().map(|&s| lil_trace(dist, checkpoints, s, expected)).collect()
}

/// Numbers behind the counterexample walk with jumps of size N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleCheck {
    pub n_jump: i32,
    pub eps: f64,
    pub n: usize,
    /// b_n = (1 - ε) n.
    pub b_n: f64,
    pub expected: f64,
    /// n(n-1)/2, attained when every step after the first stays put.
    pub max_silt: f64,
    /// Threshold E B_n + n b_n / 2 that B_n must exceed.
    pub threshold: f64,
    /// log P(S_1 = ... = S_n) = (n-1) log(1 - ε).
    pub log_all_stay: f64,
    /// n log(1 - ε).
    pub claimed_log_bound: f64,
    /// Whether max_silt exceeds the threshold, so that the all-stay event
    /// lies inside {B_n - E B_n > n b_n / 2}.
    pub inclusion_holds: bool,
    /// Best available lower bound on log P(B_n - E B_n > n b_n / 2):
    /// -∞ when the event is empty, otherwise the all-stay bound.
    pub log_event_lower: f64,
    /// Whether the event is empty, making its probability exactly 0.
    pub event_empty: bool,
    pub bound_holds: bool,
}

/// Evaluates the all-stay bound for the counterexample walk at length n.
pub fn counterexample_check(n_jump: i32, n: usize) -> Result<CounterexampleCheck> {
    let dist = StepDistribution::sticky_jump(n_jump)?;
    let eps = 1.0 - dist.atoms().iter().find(|a| a.0 == Point::ORIGIN).map_or(0.0, |a| a.1);
    let nf = n as f64;
    let b_n = (1.0 - eps) * nf;
    let expected = expected_silt(&dist, n);
    let max_silt = nf * (nf - 1.0) / 2.0;
    let threshold = expected + nf * b_n / 2.0;
    let inclusion_holds = max_silt > threshold;
    let log_all_stay = (nf - 1.0) * (1.0 - eps).ln();
    let claimed_log_bound = nf * (1.0 - eps).ln();
    let event_empty = !inclusion_holds;
    let log_event_lower = if inclusion_holds { log_all_stay } else { f64::NEG_INFINITY };
    Ok(CounterexampleCheck {
        n_jump,
        eps,
        n,
        b_n,
        expected,
        max_silt,
        threshold,
        log_all_stay,
        claimed_log_bound,
        inclusion_holds,
        log_event_lower,
        event_empty,
        bound_holds: log_event_lower >= claimed_log_bound,
    })
}

/// Smallest n ≤ n_max at which the all-stay event lies inside the
/// deviation event, found by bisection on the (monotone) margin.
pub fn counterexample_min_n(n_jump: i32, n_max: usize) -> Result<Option<usize>> {
    let holds = |n: usize| counterexample_check(n_jump, n).map(|r| r.inclusion_holds);
    if !holds(n_max)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (2usize, n_max);
    if holds(lo)? {
        return Ok(Some(lo));
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Terms of E exp{C(B_n - E B_n)/n} ≥ exp{-C E B_n/n}(1-ε)^n exp{C(n-1)/2}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentialMomentCheck {
    pub c: f64,
    pub n: usize,
    /// log of the right side, evaluated exactly.
    pub log_rhs: f64,
    /// log of the all-stay contribution P(B_n = max) e^{C(max - E B_n)/n},
    /// a lower bound for the left side.
    pub log_all_stay_term: f64,
    /// log of a Monte Carlo estimate of the left side.
    pub log_lhs_mc: f64,
    pub holds: bool,
}

/// Checks the exponential-moment inequality for the counterexample walk.
pub fn counterexample_exponential_moment(n_jump: i32, n: usize, c: f64, trials: usize, seed: u64) -> Result<ExponentialMomentCheck> {
    let dist = StepDistribution::sticky_jump(n_jump)?;
    let eps = 1.0 - dist.atoms().iter().find(|a| a.0 == Point::ORIGIN).map_or(0.0, |a| a.1);
    let nf = n as f64;
    let expected = expected_silt(&dist, n);
    let log_rhs = -c * expected / nf + nf * (1.0 - eps).ln() + c * (nf - 1.0) / 2.0;
    let max_silt = nf * (nf - 1.0) / 2.0;
    let log_all_stay_term = (nf - 1.0) * (1.0 - eps).ln() + c * (max_silt - expected) / nf;
    let ts = TrialSet::simulate(&dist, n, trials, derive_seed(seed, n as u64), expected);
    let v: Vec<f64> = ts.gammas().map(|g| c * g / nf).collect();
    let log_lhs_mc = log_mean_exp(&v);
    Ok(ExponentialMomentCheck {
        c,
        n,
        log_rhs,
        log_all_stay_term,
        log_lhs_mc,
        holds: log_all_stay_term >= log_rhs,
    })
}
