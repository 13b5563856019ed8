//! Lattice mollifiers, their self-convolutions and mollified occupation
//! functionals.
//!
//! The shipped smooth mollifier is a product of normalized sinc powers,
//! f(x) = g(x₁) g(x₂) with g(t) ∝ (sin(at)/(at))^{2k}. Its transform is the
//! (2k)-fold convolution of boxes, supported in |ω| ≤ 2ka; with 2ka < π the
//! lattice samples of f_r have discrete transform exactly f̂(rλ) on [-π, π]²
//! for every r ≥ 1. Truncation at relative mass 1e-12 is the only error.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::lattice::Point;
use crate::occupation::OccupationMap;
use crate::silt::Window;
use crate::walk::Path;

/// Relative mass discarded when truncating a kernel's support.
pub const TRUNCATION_MASS: f64 = 1e-12;
/// Largest kernel grid (cells) any operation will allocate.
pub const KERNEL_CELL_BUDGET: usize = 1 << 26;

/// Continuous mollifier profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mollifier {
    /// Point mass; its lattice sampling is the Kronecker delta at every scale.
    Delta,
    /// f(x) = g(x₁)g(x₂), g(t) ∝ (sin(at)/(at))^power, power even.
    SincPower { power: u32, bandwidth: f64 },
}

impl Default for Mollifier {
    fn default() -> Self {
        Mollifier::band_limited()
    }
}

impl Mollifier {
    /// sinc¹², transform supported in [-0.95π, 0.95π]².
    pub fn band_limited() -> Self {
        let power = 12;
        Mollifier::SincPower {
            power,
            bandwidth: 0.95 * PI / power as f64,
        }
    }

    /// Half-width of the transform's support along each axis.
    pub fn band_edge(&self) -> f64 {
        match *self {
            Mollifier::Delta => f64::INFINITY,
            Mollifier::SincPower { power, bandwidth } => power as f64 * bandwidth,
        }
    }

    /// One-dimensional factor g(t), normalized to unit integral.
    pub fn profile_1d(&self, t: f64) -> f64 {
        match *self {
            Mollifier::Delta => {
                if t == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Mollifier::SincPower { power, bandwidth } => {
                let z = bandwidth * t;
                let s = if z == 0.0 { 1.0 } else { z.sin() / z };
                s.powi(power as i32) / self.integral_1d()
            }
        }
    }

    /// ∫ (sin(at)/(at))^m dt = 2π · density of a sum of m uniforms on [-a, a] at 0.
    fn integral_1d(&self) -> f64 {
        match *self {
            Mollifier::Delta => 1.0,
            Mollifier::SincPower { power, bandwidth } => {
                let m = power as usize;
                2.0 * PI * irwin_hall_density(m, m as f64 / 2.0) / (2.0 * bandwidth)
            }
        }
    }

    /// ĝ(ω) = ∫ e^{-iωt} g(t) dt for the normalized factor.
    pub fn transform_1d(&self, w: f64) -> f64 {
        match *self {
            Mollifier::Delta => 1.0,
            Mollifier::SincPower { power, bandwidth } => {
                let m = power as usize;
                let x = (w / bandwidth + m as f64) / 2.0;
                irwin_hall_density(m, x) / irwin_hall_density(m, m as f64 / 2.0)
            }
        }
    }

    /// f̂(λ) for the two-dimensional profile.
    pub fn transform(&self, lambda: [f64; 2]) -> f64 {
        self.transform_1d(lambda[0]) * self.transform_1d(lambda[1])
    }

    /// Lattice half-width W such that the samples of g_r beyond |t| > W carry
    /// at most half of [`TRUNCATION_MASS`].
    fn truncation_half_width(&self, r: f64) -> usize {
        match *self {
            Mollifier::Delta => 0,
            Mollifier::SincPower { power, bandwidth } => {
                // g_r(t) ≤ C r^{-1} (a t / r)^{-m}; two tails of a p-series.
                let m = power as f64;
                let c = 1.0 / self.integral_1d();
                let tau = 0.5 * TRUNCATION_MASS;
                let w = (2.0 * c * r.powf(m - 1.0) / (bandwidth.powf(m) * (m - 1.0) * tau)).powf(1.0 / (m - 1.0));
                w.ceil() as usize + 1
            }
        }
    }
}

/// Density of the sum of m independent U(0,1) at x.
fn irwin_hall_density(m: usize, x: f64) -> f64 {
    if x <= 0.0 || x >= m as f64 {
        return 0.0;
    }
    // Symmetric about m/2; evaluate on the lower half.
    let x = x.min(m as f64 - x);
    let mut fact = 1.0;
    for i in 1..m {
        fact *= i as f64;
    }
    let mut binom = 1.0;
    let mut acc = 0.0;
    for j in 0..=(x.floor() as usize) {
        let term = binom * (x - j as f64).powi(m as i32 - 1);
        acc += if j % 2 == 0 { term } else { -term };
        binom = binom * (m - j) as f64 / (j + 1) as f64;
    }
    acc / fact
}

/// Nonnegative symmetric kernel sampled on a square grid of spacing `h`
/// centred at the origin, indices -half..=half on each axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2D {
    h: f64,
    half: usize,
    values: Vec<f64>,
    /// Scale r of f_r(x) = r^{-2} f(x/r), when sampled from a profile.
    r: f64,
    profile: Option<Mollifier>,
    /// One-dimensional factor when the kernel is a product g(x₁)g(x₂).
    factor: Option<Vec<f64>>,
}

impl Kernel2D {
    /// Lattice samples (h = 1) of f_r, truncated at relative mass 1e-12.
    pub fn sample(profile: Mollifier, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!("kernel scale must be positive, got {r}")));
        }
        let half = profile.truncation_half_width(r);
        let side = 2 * half + 1;
        if side * side > KERNEL_CELL_BUDGET {
            return Err(Error::KernelTooLarge {
                required: side * side,
                budget: KERNEL_CELL_BUDGET,
            });
        }
        let factor: Vec<f64> = (0..side)
            .map(|i| {
                let t = i as f64 - half as f64;
                match profile {
                    Mollifier::Delta => profile.profile_1d(t),
                    _ => profile.profile_1d(t / r) / r,
                }
            })
            .collect();
        Ok(Self::from_factor(profile, r, factor))
    }

    pub fn delta() -> Self {
        Self::from_factor(Mollifier::Delta, 1.0, vec![1.0])
    }

    fn from_factor(profile: Mollifier, r: f64, factor: Vec<f64>) -> Self {
        let side = factor.len();
        let mut values = vec![0.0; side * side];
        for (i, &a) in factor.iter().enumerate() {
            for (j, &b) in factor.iter().enumerate() {
                values[i * side + j] = a * b;
            }
        }
        Kernel2D {
            h: 1.0,
            half: side / 2,
            values,
            r,
            profile: Some(profile),
            factor: Some(factor),
        }
    }

    /// Kernel from raw grid values (row-major, x index outer).
    pub fn from_values(h: f64, side: usize, values: Vec<f64>) -> Result<Self> {
        if side.is_multiple_of(2) || values.len() != side * side {
            return Err(Error::InvalidArgument(format!(
                "kernel grid must be odd-sided and square, got side {side} with {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument("kernel values must be nonnegative".into()));
        }
        Ok(Kernel2D {
            h,
            half: side / 2,
            values,
            r: 1.0,
            profile: None,
            factor: None,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn half_width(&self) -> usize {
        self.half
    }

    pub fn side(&self) -> usize {
        2 * self.half + 1
    }

    pub fn scale(&self) -> f64 {
        self.r
    }

    pub fn profile(&self) -> Option<Mollifier> {
        self.profile
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at lattice offset `d` (zero outside the stored support).
    #[inline]
    pub fn at(&self, d: Point) -> f64 {
        let h = self.half as i64;
        let (x, y) = (d.x as i64, d.y as i64);
        if x.abs() > h || y.abs() > h {
            return 0.0;
        }
        self.values[((x + h) as usize) * self.side() + (y + h) as usize]
    }

    /// Σ f h².
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.h * self.h
    }

    /// Max |f(x) - f(-x)| over the grid.
    pub fn asymmetry(&self) -> f64 {
        let n = self.values.len();
        (0..n).map(|i| (self.values[i] - self.values[n - 1 - i]).abs()).fold(0.0, f64::max)
    }

    /// Σ_y e^{-iλ·y} k(y) over the stored lattice support.
    pub fn discrete_transform(&self, lambda: [f64; 2]) -> Complex64 {
        let side = self.side();
        let h = self.half as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..side {
            let mut row = Complex64::new(0.0, 0.0);
            for j in 0..side {
                let v = self.values[i * side + j];
                if v != 0.0 {
                    row += Complex64::from_polar(v, -lambda[1] * (j as f64 - h));
                }
            }
            acc += row * Complex64::from_polar(1.0, -lambda[0] * (i as f64 - h));
        }
        acc
    }
}

/// f_r ⊛ f_r(y) = Σ_{x∈Z²} f_r(x) f_r(y - x), sampled on the lattice.
///
/// Product kernels are convolved factor by factor (exact up to rounding);
/// other kernels go through a zero-padded 2D FFT.
pub fn lattice_self_convolution(kernel: &Kernel2D, r: f64) -> Result<Kernel2D> {
    let scaled = match kernel.profile {
        Some(Mollifier::Delta) => return Ok(Kernel2D::delta()),
        Some(profile) => {
            if r < 1.0 {
                return Err(Error::BelowMollifierRegime(r));
            }
            if r == kernel.r {
                kernel.clone()
            } else {
                Kernel2D::sample(profile, r)?
            }
        }
        None => {
            if (r - 1.0).abs() > 0.0 {
                return Err(Error::InvalidArgument(
                    "a kernel loaded from raw values can only be convolved at its stored scale r = 1".into(),
                ));
            }
            kernel.clone()
        }
    };
    if scaled.h != 1.0 {
        return Err(Error::InvalidArgument(format!("lattice convolution needs h = 1, got {}", scaled.h)));
    }
    let out_side = 2 * scaled.side() - 1;
    if out_side * out_side > KERNEL_CELL_BUDGET {
        return Err(Error::KernelTooLarge {
            required: out_side * out_side,
            budget: KERNEL_CELL_BUDGET,
        });
    }
    let mut out = match &scaled.factor {
        Some(factor) => {
            let conv = convolve_1d(factor, factor);
            Kernel2D::from_factor(scaled.profile.unwrap(), r, conv)
        }
        None => fft_self_convolution(&scaled),
    };
    out.r = r;
    Ok(out)
}

fn convolve_1d(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Linear self-convolution of a general grid kernel through a 2D FFT.
pub fn fft_self_convolution(kernel: &Kernel2D) -> Kernel2D {
    let side = kernel.side();
    let out_side = 2 * side - 1;
    let p = out_side.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(p);
    let inv = planner.plan_fft_inverse(p);
    let mut grid = vec![Complex64::new(0.0, 0.0); p * p];
    for i in 0..side {
        for j in 0..side {
            grid[i * p + j] = Complex64::new(kernel.values[i * side + j], 0.0);
        }
    }
    fft_2d(&mut grid, p, &*fwd);
    grid.iter_mut().for_each(|z| *z = *z * *z);
    fft_2d(&mut grid, p, &*inv);
    let norm = 1.0 / (p * p) as f64;
    let mut values = vec![0.0; out_side * out_side];
    for i in 0..out_side {
        for j in 0..out_side {
            values[i * out_side + j] = (grid[i * p + j].re * norm).max(0.0);
        }
    }
    Kernel2D {
        h: kernel.h,
        half: out_side / 2,
        values,
        r: kernel.r,
        profile: kernel.profile,
        factor: None,
    }
}

fn fft_2d(grid: &mut [Complex64], p: usize, fft: &dyn rustfft::Fft<f64>) {
    for row in grid.chunks_exact_mut(p) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); p];
    for j in 0..p {
        for i in 0..p {
            col[i] = grid[i * p + j];
        }
        fft.process(&mut col);
        for i in 0..p {
            grid[i * p + j] = col[i];
        }
    }
}

/// Max over a k×k grid of λ in [-π, π]² of |Σ_y e^{-iλ·y}(f_r⊛f_r)(y) - f̂(rλ)²|,
/// with the left side summed directly over the convolved lattice kernel.
pub fn fourier_identity_error(profile: Mollifier, r: f64, k: usize) -> Result<f64> {
    let conv = lattice_self_convolution(&Kernel2D::sample(profile, r)?, r)?;
    let side = conv.side();
    let h = conv.half as f64;
    let lambdas: Vec<f64> = (0..k).map(|i| -PI + 2.0 * PI * (i as f64 + 0.5) / k as f64).collect();
    let phases: Vec<Vec<Complex64>> = lambdas
        .iter()
        .map(|&l| (0..side).map(|j| Complex64::from_polar(1.0, -l * (j as f64 - h))).collect())
        .collect();
    let mut worst = 0.0f64;
    for (a, la) in lambdas.iter().enumerate() {
        // partial[j] = Σ_i k(i, j) e^{-iλ₁ x_i}
        let mut partial = vec![Complex64::new(0.0, 0.0); side];
        for i in 0..side {
            let e = phases[a][i];
            for (j, slot) in partial.iter_mut().enumerate() {
                *slot += e * conv.values[i * side + j];
            }
        }
        for (b, lb) in lambdas.iter().enumerate() {
            let lhs: Complex64 = partial.iter().zip(&phases[b]).map(|(p, e)| p * e).sum();
            let fh = profile.transform([r * la, r * lb]);
            worst = worst.max((lhs - fh * fh).norm());
        }
    }
    Ok(worst)
}

/// Σ_{x,x'} l(x) l'(x') K(x' - x) for two occupation fields.
fn occupation_pair_sum(a: &OccupationMap, b: &OccupationMap, kernel: &Kernel2D) -> f64 {
    let support = kernel.side() * kernel.side();
    let (na, nb) = (a.distinct(), b.distinct());
    if na.saturating_mul(nb) <= na.saturating_mul(support) {
        let bl: Vec<(Point, u32)> = b.iter().collect();
        a.iter()
            .map(|(p, ca)| {
                ca as f64 * bl.iter().map(|&(q, cb)| cb as f64 * kernel.at(q - p)).sum::<f64>()
            })
            .sum()
    } else {
        let h = kernel.half as i32;
        a.iter()
            .map(|(p, ca)| {
                let mut s = 0.0;
                for dx in -h..=h {
                    for dy in -h..=h {
                        let d = Point::new(dx, dy);
                        let cb = b.get(p + d);
                        if cb > 0 {
                            s += cb as f64 * kernel.at(d);
                        }
                    }
                }
                ca as f64 * s
            })
            .sum()
    }
}

fn occupation_of(points: &[Point]) -> OccupationMap {
    let mut occ = OccupationMap::with_capacity(points.len());
    for &p in points {
        occ.increment(p);
    }
    occ
}

/// Scale of the mollifier inside l(n, x, ε): r = ε (n / b_n)^{1/2}.
pub fn mollifier_scale(n: usize, eps: f64, b_n: f64) -> f64 {
    eps * (n as f64 / b_n).sqrt()
}

/// Σ_x l(n, x, ε)² = Σ_{j,k} (f_r ⊛ f_r)(S_k - S_j) with r = ε (n/b_n)^{1/2}.
pub fn mollified_l2(path: &Path, kernel: &Kernel2D, eps: f64, b_n: f64) -> Result<f64> {
    if !(eps > 0.0) || !(b_n >= 1.0) {
        return Err(Error::InvalidArgument(format!("need eps > 0 and b_n >= 1, got eps = {eps}, b_n = {b_n}")));
    }
    let r = mollifier_scale(path.len(), eps, b_n);
    let conv = lattice_self_convolution(kernel, r)?;
    let occ = occupation_of(path.points());
    Ok(occupation_pair_sum(&occ, &occ, &conv))
}

/// Matrix of Σ_x ξ_j(x) ξ_k(x), where ξ_i is the mollified occupation of the
/// times in window i. The full functional Σ_x l² equals the trace plus twice
/// the strict upper triangle.
pub fn mollified_block_products(path: &Path, windows: &[Window], kernel: &Kernel2D, eps: f64, b_n: f64) -> Result<Vec<Vec<f64>>> {
    let r = mollifier_scale(path.len(), eps, b_n);
    let conv = lattice_self_convolution(kernel, r)?;
    let pts = path.points();
    for w in windows {
        if w.hi > pts.len() || w.lo > w.hi {
            return Err(Error::MalformedBlock(format!("window ({}, {}] outside (0, {}]", w.lo, w.hi, pts.len())));
        }
    }
    let occs: Vec<OccupationMap> = windows.iter().map(|w| occupation_of(&pts[w.lo..w.hi])).collect();
    let l = windows.len();
    let mut m = vec![vec![0.0; l]; l];
    for j in 0..l {
        for k in j..l {
            let v = occupation_pair_sum(&occs[j], &occs[k], &conv);
            m[j][k] = v;
            m[k][j] = v;
        }
    }
    Ok(m)
}
