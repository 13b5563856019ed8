//! Metropolis sampler for the polymer measure dQ_n/dP ∝ e^{ζ B_n / n}.
//!
//! A move picks a start uniformly, draws a window length from a geometric
//! law with mean 8 (clipped at the path end) and resamples the steps in the
//! window from the step law. Because the proposal draws from the step law
//! itself, the Hastings ratio reduces to e^{ζ(B' - B)/n}.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::lattice::Point;
use crate::rng::{stream_rng, StreamRng};
use crate::silt::SiltAccumulator;
use crate::walk::StepDistribution;

/// Mean window length of a move.
pub const MEAN_WINDOW: f64 = 8.0;
/// Burn-in acceptance below this raises the low-acceptance flag.
pub const LOW_ACCEPTANCE: f64 = 0.01;

/// One chain of the polymer sampler.
#[derive(Debug, Clone)]
pub struct PolymerChain {
    dist: StepDistribution,
    zeta: f64,
    /// Atom index of each step.
    steps: Vec<usize>,
    /// S_1..S_n.
    positions: Vec<Point>,
    acc: SiltAccumulator,
    rng: StreamRng,
    scratch_steps: Vec<usize>,
    scratch_pos: Vec<Point>,
    pub sweeps: u64,
    pub proposed: u64,
    pub accepted: u64,
}

impl PolymerChain {
    /// Chain started from a path drawn from the step law (stream 0); moves
    /// use stream 1.
    pub fn new(dist: &StepDistribution, n: usize, zeta: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("polymer length must be positive".into()));
        }
        if !zeta.is_finite() {
            return Err(Error::InvalidArgument(format!("zeta must be finite, got {zeta}")));
        }
        let mut init = stream_rng(seed, 0);
        let steps: Vec<usize> = (0..n).map(|_| dist.sample_index(&mut init)).collect();
        Ok(Self::from_steps(dist, steps, zeta, stream_rng(seed, 1)))
    }

    fn from_steps(dist: &StepDistribution, steps: Vec<usize>, zeta: f64, rng: StreamRng) -> Self {
        let mut positions = Vec::with_capacity(steps.len());
        let mut at = Point::ORIGIN;
        for &s in &steps {
            at += dist.atoms()[s].0;
            positions.push(at);
        }
        let mut acc = SiltAccumulator::with_capacity(steps.len());
        acc.extend(positions.iter().copied());
        PolymerChain {
            dist: dist.clone(),
            zeta,
            steps,
            positions,
            acc,
            rng,
            scratch_steps: Vec::new(),
            scratch_pos: Vec::new(),
            sweeps: 0,
            proposed: 0,
            accepted: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.steps.len()
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn b(&self) -> u64 {
        self.acc.b()
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    /// One window-resample proposal; returns whether it was accepted.
    pub fn propose(&mut self) -> bool {
        let n = self.n();
        let start = self.rng.random_range(0..n);
        // Geometric on {1, 2, ...} with success probability 1/mean.
        let u: f64 = self.rng.random();
        let len = 1 + ((1.0 - u).ln() / (1.0 - 1.0 / MEAN_WINDOW).ln()).floor() as usize;
        let end = (start + len).min(n);

        self.scratch_steps.clear();
        let mut shift = Point::ORIGIN;
        for i in start..end {
            let s = self.dist.sample_index(&mut self.rng);
            shift += self.dist.atoms()[s].0 - self.dist.atoms()[self.steps[i]].0;
            self.scratch_steps.push(s);
        }
        // Positions from `start` change; past the window they move rigidly,
        // so nothing beyond it changes when the window keeps its sum.
        let last = if shift == Point::ORIGIN { end } else { n };
        let mut at = if start == 0 { Point::ORIGIN } else { self.positions[start - 1] };
        self.scratch_pos.clear();
        for i in start..last {
            at += if i < end {
                self.dist.atoms()[self.scratch_steps[i - start]].0
            } else {
                self.dist.atoms()[self.steps[i]].0
            };
            self.scratch_pos.push(at);
        }

        let old_b = self.acc.b();
        for &p in &self.positions[start..last] {
            self.acc.remove(p);
        }
        for &p in &self.scratch_pos {
            self.acc.push(p);
        }
        let delta = self.acc.b() as f64 - old_b as f64;
        self.proposed += 1;
        let accept = delta * self.zeta >= 0.0 || self.rng.random::<f64>() < (self.zeta * delta / n as f64).exp();
        if accept {
            self.steps[start..end].copy_from_slice(&self.scratch_steps);
            self.positions[start..last].copy_from_slice(&self.scratch_pos);
            self.accepted += 1;
        } else {
            for &p in &self.scratch_pos {
                self.acc.remove(p);
            }
            for &p in &self.positions[start..last] {
                self.acc.push(p);
            }
        }
        accept
    }

    /// n proposals.
    pub fn sweep(&mut self) {
        for _ in 0..self.n() {
            self.propose();
        }
        self.sweeps += 1;
        #[cfg(debug_assertions)]
        if self.sweeps.is_multiple_of(100) {
            let exact = crate::silt::silt_exact(&crate::walk::Path::from_points(self.positions.clone())).unwrap();
            debug_assert_eq!(exact, self.acc.b(), "stored B_n drifted from the path");
        }
    }

    pub fn sample(&self) -> PolymerSample {
        let end = *self.positions.last().unwrap();
        PolymerSample {
            sweep: self.sweeps,
            b: self.acc.b(),
            end_sq: end.norm_sq() as u64,
            diameter: diameter(self.acc.occupation().iter().map(|e| e.0)),
        }
    }
}

/// Largest Euclidean distance between two of the given sites.
pub fn diameter(sites: impl Iterator<Item = Point>) -> f64 {
    let pts: Vec<Point> = sites.collect();
    let mut best = 0i64;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            best = best.max((*a - *b).norm_sq());
        }
    }
    (best as f64).sqrt()
}

/// Observables recorded once per sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolymerSample {
    pub sweep: u64,
    pub b: u64,
    /// |S_n|².
    pub end_sq: u64,
    pub diameter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolymerRun {
    pub n: usize,
    pub zeta: f64,
    pub seed: u64,
    pub sweeps: usize,
    pub burn_in: usize,
    pub samples: Vec<PolymerSample>,
    pub acceptance_rate: f64,
    pub burn_in_acceptance: f64,
    /// Burn-in acceptance fell below 1%.
    pub low_acceptance: bool,
}

/// Runs `sweeps` sweeps and keeps one sample per sweep after `burn_in`.
pub fn polymer_mcmc(dist: &StepDistribution, n: usize, zeta: f64, sweeps: usize, burn_in: usize, seed: u64) -> Result<PolymerRun> {
    if !dist.strongly_aperiodic() {
        return Err(Error::HypothesesViolated("step distribution is not strongly aperiodic".into()));
    }
    if sweeps <= burn_in {
        return Err(Error::InvalidArgument(format!("sweeps ({sweeps}) must exceed burn-in ({burn_in})")));
    }
    let mut chain = PolymerChain::new(dist, n, zeta, seed)?;
    for _ in 0..burn_in {
        chain.sweep();
    }
    let burn_in_acceptance = chain.acceptance_rate();
    let (p0, a0) = (chain.proposed, chain.accepted);
    let mut samples = Vec::with_capacity(sweeps - burn_in);
    for _ in burn_in..sweeps {
        chain.sweep();
        samples.push(chain.sample());
    }
    let proposed = chain.proposed - p0;
    Ok(PolymerRun {
        n,
        zeta,
        seed,
        sweeps,
        burn_in,
        samples,
        acceptance_rate: (chain.accepted - a0) as f64 / proposed.max(1) as f64,
        burn_in_acceptance,
        low_acceptance: burn_in > 0 && burn_in_acceptance < LOW_ACCEPTANCE,
    })
}

/// Batch-means mean and 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub half_width: f64,
    pub std_err: f64,
}

impl MeanCi {
    pub fn lo(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.mean + self.half_width
    }
}

/// Batch means over `batches` contiguous batches, which absorbs the
/// autocorrelation of a chain.
pub fn batch_means(values: &[f64], batches: usize) -> MeanCi {
    let batches = batches.max(2).min(values.len().max(2));
    let size = values.len() / batches;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if size == 0 {
        return MeanCi {
            mean,
            half_width: f64::INFINITY,
            std_err: f64::INFINITY,
        };
    }
    let means: Vec<f64> = (0..batches)
        .map(|k| values[k * size..(k + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    let std_err = (var / batches as f64).sqrt();
    let t = StudentsT::new(0.0, 1.0, (batches - 1) as f64).unwrap().inverse_cdf(0.975);
    MeanCi {
        mean,
        half_width: t * std_err,
        std_err,
    }
}

/// Batches used by [`collapse_sweep`].
pub const COLLAPSE_BATCHES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseRow {
    pub zeta: f64,
    pub n: usize,
    pub sweeps: usize,
    pub b_over_n: MeanCi,
    /// Mean |S_n|².
    pub msd: MeanCi,
    pub diameter: MeanCi,
    pub acceptance_rate: f64,
    pub seed: u64,
    pub low_acceptance: bool,
}

/// Diagnostics of one finished run.
pub fn collapse_row(run: &PolymerRun) -> CollapseRow {
    let nf = run.n as f64;
    let b: Vec<f64> = run.samples.iter().map(|s| s.b as f64 / nf).collect();
    let m: Vec<f64> = run.samples.iter().map(|s| s.end_sq as f64).collect();
    let d: Vec<f64> = run.samples.iter().map(|s| s.diameter).collect();
    CollapseRow {
        zeta: run.zeta,
        n: run.n,
        sweeps: run.sweeps,
        b_over_n: batch_means(&b, COLLAPSE_BATCHES),
        msd: batch_means(&m, COLLAPSE_BATCHES),
        diameter: batch_means(&d, COLLAPSE_BATCHES),
        acceptance_rate: run.acceptance_rate,
        seed: run.seed,
        low_acceptance: run.low_acceptance,
    }
}

/// One chain per ζ, all driven by the same seed, with a tenth of the sweeps
/// discarded as burn-in.
pub fn collapse_sweep(dist: &StepDistribution, n: usize, zeta_grid: &[f64], sweeps: usize, seed: u64) -> Result<Vec<CollapseRow>> {
    if let Some(z) = zeta_grid.iter().find(|z| !z.is_finite()) {
        return Err(Error::InvalidArgument(format!("zeta grid contains {z}")));
    }
    let burn_in = sweeps / 10;
    zeta_grid
        .par_iter()
        .map(|&z| polymer_mcmc(dist, n, z, sweeps, burn_in, seed).map(|r| collapse_row(&r)))
        .collect()
}
