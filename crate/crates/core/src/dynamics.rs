//! Exact amplitude dynamics α(t) from the memory kernel, time-dependent
//! rates, density-matrix propagation and the Born–Markov reference.
//!
//! The solver works in the frame rotating at ω₀, β(t) = α(t)e^{iω₀t}, where
//! the equation becomes β̇ = −∫₀ᵗ L(t−s)β(s)ds with L(τ) = K(τ)e^{iω₀τ}.
//! Integrating once gives the second-kind equation
//! β(t) = 1 − ∫₀ᵗ M(t−s)β(s)ds with M(τ) = ∫₀^τ L, and since M(0) = 0
//! every step is explicit.

use std::io::Write;

use num_complex::Complex;
use thiserror::Error;

use crate::kernel::KernelTable;
use crate::scalar::Real;
use crate::table::{fmt_sig, SpectralTable};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DynamicsError {
    #[error("invalid time grid: dt = {dt}, t_max = {t_max}")]
    InvalidGrid { dt: f64, t_max: f64 },
    #[error(
        "time step {dt} too coarse: need dt * max(phase scale {phase_scale} eV, \
         coupling scale {coupling_scale} eV) <= {limit}; largest admissible dt is {max_dt}"
    )]
    StepTooLarge {
        dt: f64,
        phase_scale: f64,
        coupling_scale: f64,
        limit: f64,
        max_dt: f64,
    },
    #[error("kernel spacing {kernel_dt} differs from solver step {dt}")]
    StepMismatch { dt: f64, kernel_dt: f64 },
    #[error("kernel covers {available} nodes, solver needs {needed}")]
    KernelTooShort { needed: usize, available: usize },
    #[error("omega0 = {omega0} lies outside the open table support ({lo}, {hi})")]
    OutsideSupport { omega0: f64, lo: f64, hi: f64 },
    #[error("invalid density matrix: rho_ee = {rho_ee}, |rho_eg| = {coherence}")]
    InvalidDensityMatrix { rho_ee: f64, coherence: f64 },
    #[error("time index {index} outside trajectory of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("io: {0}")]
    Io(String),
}

/// dt·max(phase scale, coupling scale) must not exceed this.
pub const STEP_LIMIT: f64 = 0.05;

/// |α| below this marks a node where the rates are undefined.
pub const RATE_FLAG_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VolterraScheme {
    /// Fourth order: cumulative kernel by cubic quadrature, Gregory end
    /// corrections on the history sum, Taylor start.
    #[default]
    Gregory4,
    /// Second-order trapezoidal product integration.
    Trapezoid,
}

/// α(t) on a uniform grid plus the quantities derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeTrajectory<T> {
    pub dt: T,
    pub omega0: T,
    pub alpha: Vec<Complex<T>>,
    pub pe: Vec<T>,
    /// NaN where `flags` is set.
    pub gamma_t: Vec<T>,
    /// NaN where `flags` is set.
    pub omega_t: Vec<T>,
    pub flags: Vec<bool>,
}

impl<T: Real> AmplitudeTrajectory<T> {
    /// Builds a trajectory from amplitudes and fills the rates.
    pub fn from_alpha(dt: T, omega0: T, alpha: Vec<Complex<T>>) -> Self {
        let pe = alpha.iter().map(|a| a.norm_sqr()).collect();
        let n = alpha.len();
        extract_rates(Self {
            dt,
            omega0,
            alpha,
            pe,
            gamma_t: vec![T::nan(); n],
            omega_t: vec![T::nan(); n],
            flags: vec![false; n],
        })
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn t(&self, i: usize) -> T {
        self.dt * T::from_count(i)
    }

    pub fn t_max(&self) -> T {
        self.t(self.len() - 1)
    }

    /// First index of the final `fraction` of the run.
    pub fn window_start(&self, fraction: T) -> usize {
        let n = self.len();
        let skip = (T::from_count(n) * (T::one() - fraction)).floor();
        skip.to_usize().unwrap_or(0).min(n - 1)
    }

    /// Mean P_e over the final `fraction` of the run.
    pub fn late_mean_pe(&self, fraction: T) -> T {
        mean(&self.pe[self.window_start(fraction)..])
    }

    /// Mean |γ(t)| over unflagged nodes of the final `fraction` of the run.
    pub fn late_mean_abs_gamma(&self, fraction: T) -> T {
        let s = self.window_start(fraction);
        let vals: Vec<T> = self.gamma_t[s..]
            .iter()
            .zip(&self.flags[s..])
            .filter(|(_, f)| !**f)
            .map(|(g, _)| g.abs())
            .collect();
        mean(&vals)
    }

    /// CSV with header `t_inv_ev,re_alpha,im_alpha,pe,gamma_t,omega_t,rate_flag`.
    /// Rates at flagged nodes are written as empty fields.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DynamicsError> {
        let mut wtr = csv::Writer::from_writer(out);
        let err = |e: csv::Error| DynamicsError::Io(e.to_string());
        wtr.write_record([
            "t_inv_ev",
            "re_alpha",
            "im_alpha",
            "pe",
            "gamma_t",
            "omega_t",
            "rate_flag",
        ])
        .map_err(err)?;
        for i in 0..self.len() {
            let rate = |v: T| {
                if self.flags[i] {
                    String::new()
                } else {
                    fmt_sig(v.as_f64())
                }
            };
            wtr.write_record([
                fmt_sig(self.t(i).as_f64()),
                fmt_sig(self.alpha[i].re.as_f64()),
                fmt_sig(self.alpha[i].im.as_f64()),
                fmt_sig(self.pe[i].as_f64()),
                rate(self.gamma_t[i]),
                rate(self.omega_t[i]),
                if self.flags[i] { "1" } else { "0" }.to_string(),
            ])
            .map_err(err)?;
        }
        wtr.flush().map_err(|e| DynamicsError::Io(e.to_string()))
    }
}

fn mean<T: Real>(v: &[T]) -> T {
    if v.is_empty() {
        return T::nan();
    }
    v.iter().fold(T::zero(), |a, &b| a + b) / T::from_count(v.len())
}

fn step_count<T: Real>(t_max: T, dt: T) -> Result<usize, DynamicsError> {
    if !(dt > T::zero()) || !(t_max >= dt) || !t_max.is_finite() {
        return Err(DynamicsError::InvalidGrid {
            dt: dt.as_f64(),
            t_max: t_max.as_f64(),
        });
    }
    Ok((t_max / dt + T::lit(1e-9))
        .floor()
        .to_usize()
        .expect("step count fits usize"))
}

/// Checks dt·max(phase, coupling) ≤ [`STEP_LIMIT`].
pub fn check_step<T: Real>(dt: T, phase_scale: T, coupling_scale: T) -> Result<(), DynamicsError> {
    let scale = phase_scale.max(coupling_scale);
    let limit = T::lit(STEP_LIMIT);
    if dt * scale > limit * T::lit(1.0 + 1e-12) {
        return Err(DynamicsError::StepTooLarge {
            dt: dt.as_f64(),
            phase_scale: phase_scale.as_f64(),
            coupling_scale: coupling_scale.as_f64(),
            limit: STEP_LIMIT,
            max_dt: (limit / scale).as_f64(),
        });
    }
    Ok(())
}

/// Solves for α(t) on {0, dt, ..., t_max} with the default scheme.
pub fn solve_volterra<T: Real>(
    kernel: &KernelTable<T>,
    omega0: T,
    t_max: T,
    dt: T,
) -> Result<AmplitudeTrajectory<T>, DynamicsError> {
    solve_volterra_with(kernel, omega0, t_max, dt, VolterraScheme::default())
}

pub fn solve_volterra_with<T: Real>(
    kernel: &KernelTable<T>,
    omega0: T,
    t_max: T,
    dt: T,
    scheme: VolterraScheme,
) -> Result<AmplitudeTrajectory<T>, DynamicsError> {
    let n = step_count(t_max, dt)?;
    if (kernel.dt() - dt).abs() > dt * T::lit(1e-9) {
        return Err(DynamicsError::StepMismatch {
            dt: dt.as_f64(),
            kernel_dt: kernel.dt().as_f64(),
        });
    }
    if kernel.len() < n + 1 {
        return Err(DynamicsError::KernelTooShort {
            needed: n + 1,
            available: kernel.len(),
        });
    }
    let phase = match kernel.support() {
        Some((lo, hi)) => (hi - omega0).abs().max((omega0 - lo).abs()),
        None => T::zero(),
    };
    check_step(dt, phase, kernel.values()[0].norm().sqrt())?;
    let l = rotate(
        &kernel.values()[..(n + 1).max(6).min(kernel.len())],
        omega0,
        dt,
    );
    let beta = solve_rotating(&l, dt, n, scheme);
    Ok(AmplitudeTrajectory::from_alpha(
        dt,
        omega0,
        to_lab(beta, omega0, dt),
    ))
}

/// Solves with an analytic kernel K(τ) instead of a table.
pub fn solve_volterra_fn<T: Real, F: Fn(T) -> Complex<T>>(
    kernel: F,
    omega0: T,
    t_max: T,
    dt: T,
    scheme: VolterraScheme,
) -> Result<AmplitudeTrajectory<T>, DynamicsError> {
    let n = step_count(t_max, dt)?;
    let k0 = kernel(T::zero());
    check_step(dt, T::zero(), k0.norm().sqrt())?;
    let samples: Vec<Complex<T>> = (0..(n + 1).max(6))
        .map(|k| kernel(dt * T::from_count(k)))
        .collect();
    let l = rotate(&samples, omega0, dt);
    let beta = solve_rotating(&l, dt, n, scheme);
    Ok(AmplitudeTrajectory::from_alpha(
        dt,
        omega0,
        to_lab(beta, omega0, dt),
    ))
}

fn rotate<T: Real>(k: &[Complex<T>], omega0: T, dt: T) -> Vec<Complex<T>> {
    k.iter()
        .enumerate()
        .map(|(i, v)| v * Complex::from_polar(T::one(), omega0 * dt * T::from_count(i)))
        .collect()
}

fn to_lab<T: Real>(beta: Vec<Complex<T>>, omega0: T, dt: T) -> Vec<Complex<T>> {
    beta.into_iter()
        .enumerate()
        .map(|(i, b)| b * Complex::from_polar(T::one(), -omega0 * dt * T::from_count(i)))
        .collect()
}

/// Split real/imaginary storage for the history sums.
struct Split<T> {
    re: Vec<T>,
    im: Vec<T>,
}

impl<T: Real> Split<T> {
    fn with_capacity(n: usize) -> Self {
        Self {
            re: Vec::with_capacity(n),
            im: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, z: Complex<T>) {
        self.re.push(z.re);
        self.im.push(z.im);
    }

    fn get(&self, i: usize) -> Complex<T> {
        Complex::new(self.re[i], self.im[i])
    }
}

/// Σ a_k b_k over equal-length split slices, fixed summation order.
#[inline]
fn dot<T: Real>(ar: &[T], ai: &[T], br: &[T], bi: &[T]) -> Complex<T> {
    const W: usize = 8;
    let n = ar.len();
    let mut sr = [T::zero(); W];
    let mut si = [T::zero(); W];
    let chunks = n / W;
    for c in 0..chunks {
        let o = c * W;
        let (xr, xi, yr, yi) = (&ar[o..o + W], &ai[o..o + W], &br[o..o + W], &bi[o..o + W]);
        for k in 0..W {
            sr[k] += xr[k] * yr[k] - xi[k] * yi[k];
            si[k] += xr[k] * yi[k] + xi[k] * yr[k];
        }
    }
    let mut re = T::zero();
    let mut im = T::zero();
    for k in 0..W {
        re += sr[k];
        im += si[k];
    }
    for k in chunks * W..n {
        re += ar[k] * br[k] - ai[k] * bi[k];
        im += ar[k] * bi[k] + ai[k] * br[k];
    }
    Complex::new(re, im)
}

/// Solves β(t) = 1 − ∫₀ᵗ M(t−s)β(s)ds given L samples (at least n+1 of them).
fn solve_rotating<T: Real>(
    l: &[Complex<T>],
    dt: T,
    n: usize,
    scheme: VolterraScheme,
) -> Vec<Complex<T>> {
    match scheme {
        VolterraScheme::Gregory4 if l.len() >= 6 => gregory4(l, dt, n),
        _ => trapezoid(l, dt, n),
    }
}

/// Cumulative M_k = ∫₀^{k dt} L with cubic local interpolation.
fn cumulative_kernel<T: Real>(l: &[Complex<T>], dt: T) -> Vec<Complex<T>> {
    let n = l.len() - 1;
    let h = dt / T::lit(24.0);
    let c = |x: f64| T::lit(x);
    let mut m = Vec::with_capacity(n + 1);
    m.push(Complex::new(T::zero(), T::zero()));
    for k in 1..=n {
        let inc = if k == 1 {
            l[0] * c(9.0) + l[1] * c(19.0) - l[2] * c(5.0) + l[3]
        } else if k == n {
            l[k - 3] - l[k - 2] * c(5.0) + l[k - 1] * c(19.0) + l[k] * c(9.0)
        } else {
            -l[k - 2] + l[k - 1] * c(13.0) + l[k] * c(13.0) - l[k + 1]
        };
        let prev = m[k - 1];
        m.push(prev + inc * h);
    }
    m
}

fn gregory4<T: Real>(l: &[Complex<T>], dt: T, n: usize) -> Vec<Complex<T>> {
    let m = cumulative_kernel(l, dt);
    let one = Complex::new(T::one(), T::zero());
    let mut beta = Split::with_capacity(n + 1);
    beta.push(one);
    if n == 0 {
        return vec![one];
    }

    // Taylor start: β(0) = 1, β′(0) = 0, β″(0) = −L₀, β‴(0) = −L′₀,
    // β⁗(0) = L₀² − L″₀.
    let c = |x: f64| T::lit(x);
    let d1 = (l[0] * c(-25.0) + l[1] * c(48.0) - l[2] * c(36.0) + l[3] * c(16.0) - l[4] * c(3.0))
        / (c(12.0) * dt);
    let d2 = (l[0] * c(45.0) - l[1] * c(154.0) + l[2] * c(214.0) - l[3] * c(156.0)
        + l[4] * c(61.0)
        - l[5] * c(10.0))
        / (c(12.0) * dt * dt);
    let dt2 = dt * dt;
    let b1 = one - l[0] * (dt2 / c(2.0)) - d1 * (dt2 * dt / c(6.0))
        + (l[0] * l[0] - d2) * (dt2 * dt2 / c(24.0));
    beta.push(b1);

    // Reversed M so that Σ_j M_{k−j}β_j is a contiguous dot product.
    let mut mr: Vec<T> = m[..=n].iter().rev().map(|z| z.re).collect();
    let mut mi: Vec<T> = m[..=n].iter().rev().map(|z| z.im).collect();
    mr.shrink_to_fit();
    mi.shrink_to_fit();
    let mm = |k: usize| m[k];

    for k in 2..=n {
        let b = |j: usize| beta.get(j);
        let s = match k {
            2 => (mm(2) + mm(1) * b(1) * c(4.0)) / c(3.0),
            3 => (mm(3) + (mm(2) * b(1) + mm(1) * b(2)) * c(3.0)) * c(3.0 / 8.0),
            4 => {
                (mm(4) + mm(3) * b(1) * c(4.0) + mm(2) * b(2) * c(2.0) + mm(1) * b(3) * c(4.0))
                    / c(3.0)
            }
            _ => {
                // Unit weights over j = 0..k−1, then Gregory end corrections.
                let off = n - k;
                let full = dot(
                    &mr[off..off + k],
                    &mi[off..off + k],
                    &beta.re[..k],
                    &beta.im[..k],
                );
                full + mm(k) * c(3.0 / 8.0 - 1.0)
                    + mm(k - 1) * b(1) * c(7.0 / 6.0 - 1.0)
                    + mm(k - 2) * b(2) * c(23.0 / 24.0 - 1.0)
                    + mm(2) * b(k - 2) * c(23.0 / 24.0 - 1.0)
                    + mm(1) * b(k - 1) * c(7.0 / 6.0 - 1.0)
            }
        };
        beta.push(one - s * dt);
    }
    (0..=n).map(|j| beta.get(j)).collect()
}

fn trapezoid<T: Real>(l: &[Complex<T>], dt: T, n: usize) -> Vec<Complex<T>> {
    let one = Complex::new(T::one(), T::zero());
    let half = T::lit(0.5);
    let lr: Vec<T> = l[..=n].iter().rev().map(|z| z.re).collect();
    let li: Vec<T> = l[..=n].iter().rev().map(|z| z.im).collect();
    let mut beta = Split::with_capacity(n + 1);
    beta.push(one);
    // I_k = ∫₀^{t_k} L(t_k − s)β(s)ds by the trapezoid rule.
    let mut i_prev = Complex::new(T::zero(), T::zero());
    let denom = one + l[0] * (dt * dt * T::lit(0.25));
    for k in 1..=n {
        // H_k: all trapezoid terms except the implicit j = k one.
        let off = n - k;
        let inner = if k > 1 {
            dot(
                &lr[off + 1..off + k],
                &li[off + 1..off + k],
                &beta.re[1..k],
                &beta.im[1..k],
            )
        } else {
            Complex::new(T::zero(), T::zero())
        };
        let h = (l[k] * beta.get(0) * half + inner) * dt;
        let b = (beta.get(k - 1) - (i_prev + h) * (dt * half)) / denom;
        i_prev = h + l[0] * b * (dt * half);
        beta.push(b);
    }
    (0..=n).map(|j| beta.get(j)).collect()
}

/// Fills γ(t) and ω(t) from γ + iω = −2α̇/α.
///
/// The derivative is taken on the slowly varying β = αe^{iω₀t} with fourth-order
/// differences (centred inside, one-sided at the ends), so the truncation
/// error scales with the envelope frequency rather than ω₀.
pub fn extract_rates<T: Real>(mut traj: AmplitudeTrajectory<T>) -> AmplitudeTrajectory<T> {
    let n = traj.len();
    let dt = traj.dt;
    let w0 = traj.omega0;
    let beta: Vec<Complex<T>> = traj
        .alpha
        .iter()
        .enumerate()
        .map(|(i, a)| a * Complex::from_polar(T::one(), w0 * dt * T::from_count(i)))
        .collect();
    let c = |x: f64| T::lit(x);
    let deriv = |i: usize| -> Complex<T> {
        let b = &beta;
        if n < 5 {
            return if n < 2 {
                Complex::new(T::zero(), T::zero())
            } else if i + 1 < n {
                (b[i + 1] - b[i]) / dt
            } else {
                (b[i] - b[i - 1]) / dt
            };
        }
        let s = c(12.0) * dt;
        match i {
            0 => {
                (b[0] * c(-25.0) + b[1] * c(48.0) - b[2] * c(36.0) + b[3] * c(16.0) - b[4] * c(3.0))
                    / s
            }
            1 => (b[0] * c(-3.0) - b[1] * c(10.0) + b[2] * c(18.0) - b[3] * c(6.0) + b[4]) / s,
            _ if i == n - 2 => {
                -(b[n - 1] * c(-3.0) - b[n - 2] * c(10.0) + b[n - 3] * c(18.0) - b[n - 4] * c(6.0)
                    + b[n - 5])
                    / s
            }
            _ if i == n - 1 => {
                -(b[n - 1] * c(-25.0) + b[n - 2] * c(48.0) - b[n - 3] * c(36.0)
                    + b[n - 4] * c(16.0)
                    - b[n - 5] * c(3.0))
                    / s
            }
            _ => (b[i - 2] - b[i - 1] * c(8.0) + b[i + 1] * c(8.0) - b[i + 2]) / s,
        }
    };
    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        if traj.alpha[i].norm() < T::lit(RATE_FLAG_THRESHOLD) {
            traj.flags[i] = true;
            traj.gamma_t[i] = T::nan();
            traj.omega_t[i] = T::nan();
            continue;
        }
        let r = deriv(i) / beta[i] * c(-2.0);
        traj.flags[i] = false;
        traj.gamma_t[i] = r.re;
        traj.omega_t[i] = r.im + w0 * c(2.0);
    }
    traj
}

/// Reduced emitter state; ρ_gg = 1 − ρ_ee and ρ_ge = conj(ρ_eg).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix<T> {
    pub rho_ee: T,
    pub rho_eg: Complex<T>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn new(rho_ee: T, rho_eg: Complex<T>) -> Result<Self, DynamicsError> {
        let rho = Self { rho_ee, rho_eg };
        rho.validate()?;
        Ok(rho)
    }

    pub fn excited() -> Self {
        Self {
            rho_ee: T::one(),
            rho_eg: Complex::new(T::zero(), T::zero()),
        }
    }

    pub fn ground() -> Self {
        Self {
            rho_ee: T::zero(),
            rho_eg: Complex::new(T::zero(), T::zero()),
        }
    }

    pub fn rho_gg(&self) -> T {
        T::one() - self.rho_ee
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let p = self.rho_ee;
        let ok = p >= T::zero()
            && p <= T::one()
            && self.rho_eg.norm_sqr() <= p * (T::one() - p) + T::lit(1e-10);
        if ok {
            Ok(())
        } else {
            Err(DynamicsError::InvalidDensityMatrix {
                rho_ee: p.as_f64(),
                coherence: self.rho_eg.norm().as_f64(),
            })
        }
    }
}

/// ρ at node `t_index`: the excited amplitude is multiplied by α(t) while the
/// ground amplitude (with the field vacuum) is stationary, so
/// ρ_ee → |α|²ρ_ee and ρ_eg → αρ_eg.
pub fn propagate_density_matrix<T: Real>(
    traj: &AmplitudeTrajectory<T>,
    rho0: DensityMatrix<T>,
    t_index: usize,
) -> Result<DensityMatrix<T>, DynamicsError> {
    rho0.validate()?;
    if t_index >= traj.len() {
        return Err(DynamicsError::IndexOutOfRange {
            index: t_index,
            len: traj.len(),
        });
    }
    if t_index == 0 {
        return Ok(rho0);
    }
    let a = traj.alpha[t_index];
    Ok(DensityMatrix {
        rho_ee: a.norm_sqr() * rho0.rho_ee,
        rho_eg: a * rho0.rho_eg,
    })
}

/// Second-order perturbative solution α = exp[−(γ̄/2 + iω̄)t].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovSolution<T> {
    pub gamma_bar: T,
    pub omega_bar: T,
}

impl<T: Real> MarkovSolution<T> {
    pub fn alpha(&self, t: T) -> Complex<T> {
        Complex::new(-self.gamma_bar * T::lit(0.5) * t, -self.omega_bar * t).exp()
    }
}

/// γ̄ = 2πJ(ω₀) and ω̄ = ω₀ − P∫J(ω)/(ω − ω₀)dω.
///
/// The shift enters with a minus sign: the pole of the Laplace-transformed
/// amplitude sits at s = −iω₀ − ∫J(ω)/(s + iω)dω, whose real-frequency limit
/// gives ω̄ = ω₀ − P∫J/(ω − ω₀) (a mode below ω₀ pushes the level up).
pub fn markov_solution<T: Real>(
    table: &SpectralTable<T>,
    omega0: T,
) -> Result<MarkovSolution<T>, DynamicsError> {
    let (lo, hi) = (table.omega_min(), table.omega_max());
    let pv = if omega0 > lo && omega0 < hi {
        table.cauchy_integral(omega0)
    } else {
        None
    };
    let pv = pv.ok_or(DynamicsError::OutsideSupport {
        omega0: omega0.as_f64(),
        lo: lo.as_f64(),
        hi: hi.as_f64(),
    })?;
    Ok(MarkovSolution {
        gamma_bar: T::TAU() * table.value(omega0),
        omega_bar: omega0 - pv,
    })
}
