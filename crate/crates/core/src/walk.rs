//! Step distributions on Z², path sampling and characteristic functions.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{lattice_index, Point};
use crate::rng::{stream_rng, StreamRng};

/// Absolute tolerance on total mass and on mirror-atom mass agreement.
pub const MASS_TOL: f64 = 1e-12;
/// Resolution of the frequency grid used by the aperiodicity scan.
pub const APERIODICITY_GRID: usize = 512;
/// Off-origin grid points must satisfy `|φ| < 1 - APERIODICITY_TOL`.
pub const APERIODICITY_TOL: f64 = 1e-9;

/// A finite symmetric step law on Z².
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    atoms: Vec<(Point, f64)>,
    covariance: [[f64; 2]; 2],
    det_gamma: f64,
    strongly_aperiodic: bool,
    symmetric: bool,
    generates_lattice: bool,
    alias: AliasTable,
}

/// Text form of a step law: a list of `[dx, dy, mass]` triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSpec {
    pub atoms: Vec<(i32, i32, f64)>,
}

impl StepDistribution {
    /// Validates the law and computes covariance and aperiodicity flags.
    ///
    /// Asymmetric laws and laws whose mass is not 1 are rejected. Laws that
    /// are not strongly aperiodic, or whose support generates a proper
    /// sublattice, are accepted but flagged.
    pub fn new<P: Into<Point>>(spec: impl IntoIterator<Item = (P, f64)>) -> Result<Self> {
        let mut atoms: Vec<(Point, f64)> = spec.into_iter().map(|(p, m)| (p.into(), m)).collect();
        if atoms.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        for &(p, m) in &atoms {
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::NonPositiveMass { x: p.x, y: p.y, mass: m });
            }
        }
        atoms.sort_by_key(|a| a.0);
        let mut merged: Vec<(Point, f64)> = Vec::with_capacity(atoms.len());
        for (p, m) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == p => last.1 += m,
                _ => merged.push((p, m)),
            }
        }
        let atoms = merged;

        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::MassSum(total));
        }
        for &(p, m) in &atoms {
            let mirror = atoms.binary_search_by(|a| a.0.cmp(&-p)).ok().map(|i| atoms[i].1);
            match mirror {
                Some(mm) if (mm - m).abs() <= MASS_TOL => {}
                _ => return Err(Error::Asymmetric { x: p.x, y: p.y }),
            }
        }

        let mut cov = [[0.0; 2]; 2];
        for &(p, m) in &atoms {
            let (x, y) = (p.x as f64, p.y as f64);
            cov[0][0] += m * x * x;
            cov[0][1] += m * x * y;
            cov[1][1] += m * y * y;
        }
        cov[1][0] = cov[0][1];
        let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
        if !(det > 0.0) {
            return Err(Error::DegenerateCovariance(det));
        }

        let support: Vec<Point> = atoms.iter().map(|a| a.0).collect();
        let generates_lattice = lattice_index(&support) == 1;
        let base = support[0];
        let diffs: Vec<Point> = support.iter().map(|&p| p - base).collect();
        let algebraic = lattice_index(&diffs) == 1;

        let alias = AliasTable::new(&atoms.iter().map(|a| a.1).collect::<Vec<_>>());
        let mut dist = StepDistribution {
            atoms,
            covariance: cov,
            det_gamma: det,
            strongly_aperiodic: false,
            symmetric: true,
            generates_lattice,
            alias,
        };
        dist.strongly_aperiodic = algebraic && dist.scan_aperiodicity();
        Ok(dist)
    }

    pub fn from_spec(spec: &StepSpec) -> Result<Self> {
        Self::new(spec.atoms.iter().map(|&(x, y, m)| (Point::new(x, y), m)))
    }

    pub fn to_spec(&self) -> StepSpec {
        StepSpec {
            atoms: self.atoms.iter().map(|&(p, m)| (p.x, p.y, m)).collect(),
        }
    }

    /// Stay put with probability 1/2, otherwise move to one of the four
    /// neighbours.
    pub fn lazy() -> Self {
        Self::new([
            ((0, 0), 0.5),
            ((1, 0), 0.125),
            ((-1, 0), 0.125),
            ((0, 1), 0.125),
            ((0, -1), 0.125),
        ])
        .expect("lazy walk preset")
    }

    /// Nearest-neighbour walk. Periodic, so only useful as an oracle.
    pub fn simple() -> Self {
        Self::new([((1, 0), 0.25), ((-1, 0), 0.25), ((0, 1), 0.25), ((0, -1), 0.25)])
            .expect("simple walk preset")
    }

    /// Uniform over the eight king moves.
    pub fn king() -> Self {
        let mut atoms = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if (dx, dy) != (0, 0) {
                    atoms.push(((dx, dy), 0.125));
                }
            }
        }
        Self::new(atoms).expect("king walk preset")
    }

    /// Walk that stays put with probability `1 - 2/N²` and otherwise jumps
    /// by `N` along an axis. Covariance is the identity.
    pub fn sticky_jump(n_jump: i32) -> Result<Self> {
        if n_jump < 2 {
            return Err(Error::InvalidArgument(format!("jump length {n_jump} must be at least 2")));
        }
        let eps = 2.0 / (n_jump as f64 * n_jump as f64);
        Self::new([
            ((0, 0), 1.0 - eps),
            ((n_jump, 0), eps / 4.0),
            ((-n_jump, 0), eps / 4.0),
            ((0, n_jump), eps / 4.0),
            ((0, -n_jump), eps / 4.0),
        ])
    }

    /// Looks up a preset by name: `lazy`, `simple`, `king`, or `sticky:N`.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "lazy" => Ok(Self::lazy()),
            "simple" => Ok(Self::simple()),
            "king" => Ok(Self::king()),
            _ => match name.strip_prefix("sticky:") {
                Some(n) => {
                    let n: i32 = n.parse().map_err(|_| Error::Parse(format!("bad jump length in preset {name:?}")))?;
                    Self::sticky_jump(n)
                }
                None => Err(Error::InvalidArgument(format!("unknown preset {name:?}"))),
            },
        }
    }

    pub fn atoms(&self) -> &[(Point, f64)] {
        &self.atoms
    }

    pub fn covariance(&self) -> [[f64; 2]; 2] {
        self.covariance
    }

    pub fn det_gamma(&self) -> f64 {
        self.det_gamma
    }

    pub fn strongly_aperiodic(&self) -> bool {
        self.strongly_aperiodic
    }

    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    /// Whether the support generates all of Z² as a group.
    pub fn generates_lattice(&self) -> bool {
        self.generates_lattice
    }

    /// Largest absolute coordinate of any atom.
    pub fn max_jump(&self) -> i32 {
        self.atoms.iter().map(|a| a.0.x.abs().max(a.0.y.abs())).max().unwrap_or(0)
    }

    /// φ(u) = Σ p(a) e^{i u·a}, summed exactly over the atoms.
    pub fn characteristic_function(&self, u: [f64; 2]) -> Complex64 {
        self.atoms
            .iter()
            .map(|&(p, m)| Complex64::from_polar(m, p.dot(u)))
            .sum()
    }

    /// Real part of φ, which is all of it for a symmetric law.
    pub fn phi_real(&self, u: [f64; 2]) -> f64 {
        self.atoms.iter().map(|&(p, m)| m * p.dot(u).cos()).sum()
    }

    /// 1 - φ(u), computed as Σ 2 p sin²(u·a / 2) to avoid cancellation near
    /// the origin.
    pub fn one_minus_phi(&self, u: [f64; 2]) -> f64 {
        self.atoms
            .iter()
            .map(|&(p, m)| {
                let s = (0.5 * p.dot(u)).sin();
                2.0 * m * s * s
            })
            .sum()
    }

    fn scan_aperiodicity(&self) -> bool {
        let k = APERIODICITY_GRID;
        let mid = k / 2;
        let step = 2.0 * PI / k as f64;
        for i in 0..k {
            for j in 0..k {
                if i.abs_diff(mid) <= 1 && j.abs_diff(mid) <= 1 {
                    continue;
                }
                let u = [-PI + i as f64 * step, -PI + j as f64 * step];
                if self.characteristic_function(u).norm() >= 1.0 - APERIODICITY_TOL {
                    return false;
                }
            }
        }
        [[PI, 0.0], [0.0, PI], [PI, PI], [PI, -PI]]
            .iter()
            .all(|&u| self.characteristic_function(u).norm() < 1.0 - APERIODICITY_TOL)
    }

    /// Draws one step index from the law.
    #[inline]
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.alias.sample(rng)
    }

    #[inline]
    pub fn sample_step<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        self.atoms[self.alias.sample(rng)].0
    }

    /// Infinite stream of walk positions S_1, S_2, ... for key `(seed, stream)`.
    pub fn positions(&self, seed: u64, stream: u64) -> Positions<'_> {
        Positions {
            dist: self,
            rng: stream_rng(seed, stream),
            current: Point::ORIGIN,
        }
    }

    /// Stable 64-bit fingerprint of the atom list (FNV-1a over the bit patterns).
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01B3);
            }
        };
        for &(p, m) in &self.atoms {
            eat(&p.x.to_le_bytes());
            eat(&p.y.to_le_bytes());
            eat(&m.to_bits().to_le_bytes());
        }
        h
    }

    /// Largest c with φ(u) ≤ exp(-c|u|²) at every point of a k×k grid on
    /// [-π, π]² (origin excluded). Points where φ ≤ 0 impose no constraint.
    pub fn gaussian_bound_constant(&self, k: usize) -> f64 {
        let step = 2.0 * PI / k as f64;
        let mut c = f64::INFINITY;
        for i in 0..=k {
            for j in 0..=k {
                let u = [-PI + i as f64 * step, -PI + j as f64 * step];
                let r2 = u[0] * u[0] + u[1] * u[1];
                if r2 == 0.0 {
                    continue;
                }
                let phi = 1.0 - self.one_minus_phi(u);
                if phi > 0.0 {
                    c = c.min(-phi.ln() / r2);
                }
            }
        }
        c
    }
}

/// Streaming walk positions.
pub struct Positions<'a> {
    dist: &'a StepDistribution,
    rng: StreamRng,
    current: Point,
}

impl Iterator for Positions<'_> {
    type Item = Point;

    #[inline]
    fn next(&mut self) -> Option<Point> {
        self.current += self.dist.sample_step(&mut self.rng);
        Some(self.current)
    }
}

/// Walker alias table for O(1) sampling of atom indices.
#[derive(Debug, Clone, PartialEq)]
struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    fn new(weights: &[f64]) -> Self {
        let k = weights.len();
        let total: f64 = weights.iter().sum();
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * k as f64 / total).collect();
        let mut prob = vec![1.0; k];
        let mut alias: Vec<usize> = (0..k).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..k).partition(|&i| scaled[i] < 1.0);
        while let (Some(s), Some(&l)) = (small.pop(), large.last()) {
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        AliasTable { prob, alias }
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let k = self.prob.len();
        if k == 1 {
            return 0;
        }
        let r: u64 = rng.random();
        // High half picks the column, low half is the coin.
        let i = (((r >> 32) * k as u64) >> 32) as usize;
        let coin = (r & 0xFFFF_FFFF) as f64 * (1.0 / (1u64 << 32) as f64);
        if coin < self.prob[i] {
            i
        } else {
            self.alias[i]
        }
    }
}

/// A realized walk S_1..S_n. S_0 is the origin and is not stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    points: Vec<Point>,
    seed: Option<(u64, u64)>,
}

impl Path {
    pub fn from_points(points: Vec<Point>) -> Self {
        Path { points, seed: None }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(master seed, stream)` the path was drawn with, if sampled.
    pub fn provenance(&self) -> Option<(u64, u64)> {
        self.seed
    }

    /// Last position S_n.
    pub fn endpoint(&self) -> Point {
        self.points.last().copied().unwrap_or(Point::ORIGIN)
    }

    /// Copy translated by `shift`.
    pub fn shifted(&self, shift: Point) -> Path {
        Path {
            points: self.points.iter().map(|&p| p + shift).collect(),
            seed: self.seed,
        }
    }
}

/// Samples n steps of the walk from stream `(seed, stream)`.
pub fn sample_path(dist: &StepDistribution, n: usize, seed: u64, stream: u64) -> Result<Path> {
    if n == 0 {
        return Err(Error::InvalidArgument("path length must be at least 1".into()));
    }
    Ok(Path {
        points: dist.positions(seed, stream).take(n).collect(),
        seed: Some((seed, stream)),
    })
}
