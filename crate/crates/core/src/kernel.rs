//! Memory kernel K(τ) = ∫₀^∞ J(ω) e^{−iωτ} dω.
//!
//! Each linear segment of the tabulated J is transformed in closed form,
//! so the only error in K is the tabulation error of J itself. This holds
//! for every τ, including τ·ω far beyond what any sampling rule resolves.

use std::io::Write;

use num_complex::Complex;
use rayon::prelude::*;
use thiserror::Error;

use crate::scalar::Real;
use crate::table::{fmt_sig, SpectralTable};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum KernelError {
    #[error("invalid kernel grid: dt = {dt}, t_max = {t_max}")]
    InvalidGrid { dt: f64, t_max: f64 },
    #[error("|K({tau})| = {magnitude} exceeds K(0) = {k0}")]
    NotBounded { tau: f64, magnitude: f64, k0: f64 },
    #[error("K(0) has a relative imaginary part {ratio:e}")]
    NotRealAtZero { ratio: f64 },
    #[error("kernel is not positive definite: Toeplitz eigenvalue {eigenvalue}")]
    NotPositiveDefinite { eigenvalue: f64 },
    #[error("io: {0}")]
    Io(String),
}

/// K(τ) on the uniform grid τ_k = k·dt, k = 0..=N.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable<T> {
    dt: T,
    values: Vec<Complex<T>>,
    /// Frequency support [lo, hi] of the spectral density the kernel came from.
    support: Option<(T, T)>,
}

impl<T: Real> KernelTable<T> {
    pub fn from_values(
        dt: T,
        values: Vec<Complex<T>>,
        support: Option<(T, T)>,
    ) -> Result<Self, KernelError> {
        if !(dt > T::zero()) || values.is_empty() {
            return Err(KernelError::InvalidGrid {
                dt: dt.as_f64(),
                t_max: f64::NAN,
            });
        }
        Ok(Self {
            dt,
            values,
            support,
        })
    }

    /// Samples an analytic kernel on {0, dt, ..., t_max}.
    pub fn from_fn<F: Fn(T) -> Complex<T>>(f: F, t_max: T, dt: T) -> Result<Self, KernelError> {
        let n = grid_len(t_max, dt)?;
        let values = (0..n).map(|k| f(dt * T::from_count(k))).collect();
        Self::from_values(dt, values, None)
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t_max(&self) -> T {
        self.dt * T::from_count(self.values.len() - 1)
    }

    pub fn tau(&self, k: usize) -> T {
        self.dt * T::from_count(k)
    }

    pub fn support(&self) -> Option<(T, T)> {
        self.support
    }

    /// K(0) = ∫J dω (real part).
    pub fn k0(&self) -> T {
        self.values[0].re
    }

    /// Checks K(0) real and |K(τ)| ≤ K(0).
    pub fn check_invariants(&self) -> Result<(), KernelError> {
        let k0 = self.values[0];
        let scale = k0.norm();
        if scale == T::zero() {
            return Ok(());
        }
        let ratio = k0.im.abs() / scale;
        if ratio > T::lit(1e-9) {
            return Err(KernelError::NotRealAtZero {
                ratio: ratio.as_f64(),
            });
        }
        let limit = k0.re * (T::one() + T::lit(1e-9));
        for (k, v) in self.values.iter().enumerate() {
            if v.norm() > limit {
                return Err(KernelError::NotBounded {
                    tau: self.tau(k).as_f64(),
                    magnitude: v.norm().as_f64(),
                    k0: k0.re.as_f64(),
                });
            }
        }
        Ok(())
    }

    /// CSV with header `tau_inv_ev,re_k,im_k`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), KernelError> {
        let mut wtr = csv::Writer::from_writer(out);
        let err = |e: csv::Error| KernelError::Io(e.to_string());
        wtr.write_record(["tau_inv_ev", "re_k", "im_k"])
            .map_err(err)?;
        for (k, v) in self.values.iter().enumerate() {
            wtr.write_record([
                fmt_sig(self.tau(k).as_f64()),
                fmt_sig(v.re.as_f64()),
                fmt_sig(v.im.as_f64()),
            ])
            .map_err(err)?;
        }
        wtr.flush().map_err(|e| KernelError::Io(e.to_string()))
    }
}

fn grid_len<T: Real>(t_max: T, dt: T) -> Result<usize, KernelError> {
    if !(dt > T::zero()) || !(t_max >= dt) || !t_max.is_finite() {
        return Err(KernelError::InvalidGrid {
            dt: dt.as_f64(),
            t_max: t_max.as_f64(),
        });
    }
    let steps = (t_max / dt + T::lit(1e-9)).floor();
    Ok(steps.to_usize().expect("step count fits usize") + 1)
}

/// ∫₀¹ e^{−ixv} dv and ∫₀¹ v e^{−ixv} dv by power series (small |x|).
fn phi01_series<T: Real>(x: T) -> (Complex<T>, Complex<T>) {
    let mut term = Complex::new(T::one(), T::zero()); // (−ix)^k / k!
    let step = Complex::new(T::zero(), -x);
    let mut p0 = Complex::new(T::zero(), T::zero());
    let mut p1 = Complex::new(T::zero(), T::zero());
    for k in 0..14 {
        let kk = T::from_count(k);
        p0 += term / (kk + T::one());
        p1 += term / (kk + T::lit(2.0));
        term = term * step / (kk + T::one());
    }
    (p0, p1)
}

/// ∫₀¹ v³ e^{−ixv} dv.
fn phi3<T: Real>(x: T) -> Complex<T> {
    if x.abs() < T::lit(4.0) {
        let step = Complex::new(T::zero(), -x);
        let mut term = Complex::new(T::one(), T::zero());
        let mut acc = Complex::new(T::zero(), T::zero());
        for k in 0..48 {
            let kk = T::from_count(k);
            acc += term / (kk + T::lit(4.0));
            term = term * step / (kk + T::one());
        }
        acc
    } else {
        let c = Complex::new(T::zero(), -x);
        let ic = c.inv();
        let ic2 = ic * ic;
        let ic3 = ic2 * ic;
        let ic4 = ic2 * ic2;
        let six = T::lit(6.0);
        c.exp() * (ic - ic2 * T::lit(3.0) + ic3 * six - ic4 * six) + ic4 * six
    }
}

/// Below this value of (segment width)·τ the closed form loses digits and
/// the power series is used instead.
const SERIES_THRESHOLD: f64 = 0.1;

/// Segment-exact K(τ) given the node phases e^{−iω_kτ}.
fn kernel_from_phases<T: Real>(
    table: &SpectralTable<T>,
    tau: T,
    phases: &[Complex<T>],
) -> Complex<T> {
    let omega = table.omega();
    let j = table.values();
    let i = Complex::new(T::zero(), T::one());
    let mut acc = Complex::new(T::zero(), T::zero());

    let amp = table.tail_amplitude();
    if amp != T::zero() {
        let w0 = table.omega_min();
        acc += phi3(w0 * tau) * (amp * w0);
    }

    let thresh = T::lit(SERIES_THRESHOLD);
    let inv_tau = T::one() / tau;
    for k in 0..omega.len() - 1 {
        let h = omega[k + 1] - omega[k];
        let x = h * tau;
        if x < thresh {
            let (p0, p1) = phi01_series(x);
            acc += phases[k] * ((p0 - p1) * j[k] + p1 * j[k + 1]) * h;
        } else {
            let slope = (j[k + 1] - j[k]) / h;
            let (ea, eb) = (phases[k], phases[k + 1]);
            acc +=
                i * (eb * j[k + 1] - ea * j[k]) * inv_tau + (eb - ea) * (slope * inv_tau * inv_tau);
        }
    }
    acc
}

/// K(τ) for a single τ ≥ 0.
pub fn memory_kernel<T: Real>(table: &SpectralTable<T>, tau: T) -> Complex<T> {
    if tau == T::zero() {
        return Complex::new(table.total_weight(), T::zero());
    }
    let phases: Vec<Complex<T>> = table
        .omega()
        .iter()
        .map(|&w| Complex::from_polar(T::one(), -w * tau))
        .collect();
    kernel_from_phases(table, tau, &phases)
}

/// K(τ) on {0, dt, ..., t_max}.
///
/// Work is split into fixed blocks of τ; inside a block the node phases are
/// advanced by multiplication, and every block restarts from exact phases,
/// so results do not depend on the number of worker threads.
pub fn tabulate_kernel<T: Real>(
    table: &SpectralTable<T>,
    t_max: T,
    dt: T,
) -> Result<KernelTable<T>, KernelError> {
    const BLOCK: usize = 128;
    let n = grid_len(t_max, dt)?;
    let omega = table.omega();
    let step: Vec<Complex<T>> = omega
        .iter()
        .map(|&w| Complex::from_polar(T::one(), -w * dt))
        .collect();

    let blocks: Vec<Vec<Complex<T>>> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let start = b * BLOCK;
            let end = (start + BLOCK).min(n);
            let mut phases: Vec<Complex<T>> = omega
                .iter()
                .map(|&w| Complex::from_polar(T::one(), -w * dt * T::from_count(start)))
                .collect();
            let mut out = Vec::with_capacity(end - start);
            for k in start..end {
                if k == 0 {
                    out.push(Complex::new(table.total_weight(), T::zero()));
                } else {
                    out.push(kernel_from_phases(table, dt * T::from_count(k), &phases));
                }
                for (p, s) in phases.iter_mut().zip(&step) {
                    *p *= *s;
                }
            }
            out
        })
        .collect();

    let values: Vec<Complex<T>> = blocks.into_iter().flatten().collect();
    let kt = KernelTable::from_values(dt, values, Some((T::zero(), table.omega_max())))?;
    kt.check_invariants()?;
    Ok(kt)
}

/// g²·e^{−(iω_c + γ/2)τ}: the kernel of a Lorentzian spectral density of
/// weight g²/π extended over the whole real frequency line.
pub fn lorentzian_kernel<T: Real>(g2: T, omega_c: T, gamma: T) -> impl Fn(T) -> Complex<T> + Copy {
    move |tau: T| Complex::new(-gamma * T::lit(0.5) * tau, -omega_c * tau).exp() * g2
}
