//! Lorentzian pseudomode model in its single-excitation reduction.
//!
//! With the emitter excited and the field in vacuum, the Lindblad equation
//! for emitter plus damped mode never leaves the span of |e,0⟩, |g,1⟩ and
//! |g,0⟩, and the jump term only moves population from |g,1⟩ to |g,0⟩.
//! The amplitudes (c_e, c_a) therefore obey
//!
//! ```text
//! i d/dt (c_e, c_a) = [[ω₀, g], [g, ω_c − iγ_p/2]] (c_e, c_a)
//! ```
//!
//! and P_e = |c_e|² exactly. The 2×2 exponential is taken in closed form.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex;

use crate::bound_state::find_bound_state;
use crate::dynamics::{solve_volterra, AmplitudeTrajectory, DynamicsError};
use crate::error::Error;
use crate::kernel::{lorentzian_kernel, tabulate_kernel};
use crate::materials::MaterialSystem;
use crate::scalar::Real;
use crate::spectral::{lorentzian_weight, TableSettings};
use crate::table::fmt_sig;

/// How g² relates to the Lorentzian weight A of the quasistatic density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum Convention {
    /// g² = A.
    AsPrinted,
    /// g² = πA, so that g²e^{−(iω_c+γ_p/2)τ} is the full-line transform of
    /// the Lorentzian density.
    #[default]
    KernelMatched,
}

impl Convention {
    pub const ALL: [Convention; 2] = [Convention::AsPrinted, Convention::KernelMatched];

    pub fn as_str(&self) -> &'static str {
        match self {
            Convention::AsPrinted => "as-printed",
            Convention::KernelMatched => "kernel-matched",
        }
    }
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Convention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "as-printed" => Ok(Convention::AsPrinted),
            "kernel-matched" => Ok(Convention::KernelMatched),
            other => Err(format!(
                "unknown convention '{other}' (expected as-printed or kernel-matched)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudomodeParams<T> {
    pub omega_c: T,
    pub gamma_p: T,
    pub g: T,
    pub convention: Convention,
}

impl<T: Real> PseudomodeParams<T> {
    pub fn g2(&self) -> T {
        self.g * self.g
    }

    /// K(τ) = g²e^{−(iω_c + γ_p/2)τ}.
    pub fn kernel(&self) -> impl Fn(T) -> Complex<T> + Copy {
        lorentzian_kernel(self.g2(), self.omega_c, self.gamma_p)
    }

    /// Full-line density (g²/π)·(γ_p/2)/[(ω − ω_c)² + (γ_p/2)²] whose
    /// transform is [`Self::kernel`].
    pub fn equivalent_density(&self, omega: T) -> T {
        let half = self.gamma_p * T::lit(0.5);
        let d = omega - self.omega_c;
        self.g2() / T::PI() * half / (d * d + half * half)
    }

    /// (c_e(t), c_a(t)) for the initial state (1, 0).
    pub fn amplitudes(&self, omega0: T, t: T) -> (Complex<T>, Complex<T>) {
        let half = T::lit(0.5);
        let wc = Complex::new(self.omega_c, -self.gamma_p * half);
        let w0 = Complex::new(omega0, T::zero());
        let g = Complex::new(self.g, T::zero());
        let sigma = (w0 + wc) * half;
        let d = (w0 - wc) * half;
        let r = (d * d + g * g).sqrt();
        let i = Complex::new(T::zero(), T::one());
        let ph = |lam: Complex<T>| (-i * lam * t).exp();
        if r.norm() >= T::lit(1e-3) {
            let (ep, em) = (ph(sigma + r), ph(sigma - r));
            let one = Complex::new(T::one(), T::zero());
            let ce = (ep * (one + d / r) + em * (one - d / r)) * half;
            let ca = (ep - em) * g / (r * T::lit(2.0));
            (ce, ca)
        } else {
            let z = r * t;
            let sinc = if z.norm() < T::lit(1e-4) {
                Complex::new(T::one(), T::zero()) - z * z / T::lit(6.0)
            } else {
                z.sin() / z
            };
            let e = ph(sigma);
            let ce = e * (z.cos() - i * d * t * sinc);
            let ca = e * (-i * g * t * sinc);
            (ce, ca)
        }
    }
}

/// Pseudomode parameters for a system: ω_c and γ_p from the metal, g from
/// the Lorentzian weight under the chosen convention.
pub fn coupling_g<T: Real>(
    system: &MaterialSystem<T>,
    convention: Convention,
) -> PseudomodeParams<T> {
    let a = lorentzian_weight(system);
    let g2 = match convention {
        Convention::AsPrinted => a,
        Convention::KernelMatched => a * T::PI(),
    };
    PseudomodeParams {
        omega_c: system.spp_cutoff(),
        gamma_p: system.metal.gamma_p,
        g: g2.sqrt(),
        convention,
    }
}

/// Closed-form pseudomode trajectory on {0, dt, ..., t_max}.
pub fn solve_pseudomode<T: Real>(
    params: &PseudomodeParams<T>,
    omega0: T,
    t_max: T,
    dt: T,
) -> Result<AmplitudeTrajectory<T>, DynamicsError> {
    let (alpha, _) = pseudomode_amplitudes(params, omega0, t_max, dt)?;
    Ok(AmplitudeTrajectory::from_alpha(dt, omega0, alpha))
}

/// Emitter and mode amplitude series (c_e, c_a).
pub type AmplitudePair<T> = (Vec<Complex<T>>, Vec<Complex<T>>);

/// (c_e, c_a) sampled on {0, dt, ..., t_max}.
pub fn pseudomode_amplitudes<T: Real>(
    params: &PseudomodeParams<T>,
    omega0: T,
    t_max: T,
    dt: T,
) -> Result<AmplitudePair<T>, DynamicsError> {
    if !(dt > T::zero()) || !(t_max >= dt) || !t_max.is_finite() {
        return Err(DynamicsError::InvalidGrid {
            dt: dt.as_f64(),
            t_max: t_max.as_f64(),
        });
    }
    let n = (t_max / dt + T::lit(1e-9))
        .floor()
        .to_usize()
        .expect("step count fits usize");
    Ok((0..=n)
        .map(|k| params.amplitudes(omega0, dt * T::from_count(k)))
        .unzip())
}

/// Exact and pseudomode runs on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison<T> {
    pub delta_z: T,
    pub convention: Convention,
    pub bound_state: bool,
    pub exact: AmplitudeTrajectory<T>,
    pub pseudomode: AmplitudeTrajectory<T>,
    /// max_t |P_e,exact − P_e,pseudomode|.
    pub max_abs_diff: T,
    /// Mean of |P_e,exact − P_e,pseudomode| over the final 10% of the run.
    pub late_diff: T,
}

impl<T: Real> Comparison<T> {
    /// CSV with header `t_inv_ev,pe_exact,pe_pseudomode`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DynamicsError> {
        let mut wtr = csv::Writer::from_writer(out);
        let err = |e: csv::Error| DynamicsError::Io(e.to_string());
        wtr.write_record(["t_inv_ev", "pe_exact", "pe_pseudomode"])
            .map_err(err)?;
        for i in 0..self.exact.len() {
            wtr.write_record([
                fmt_sig(self.exact.t(i).as_f64()),
                fmt_sig(self.exact.pe[i].as_f64()),
                fmt_sig(self.pseudomode.pe[i].as_f64()),
            ])
            .map_err(err)?;
        }
        wtr.flush().map_err(|e| DynamicsError::Io(e.to_string()))
    }
}

/// Summary CSV with header `delta_z_nm,bound_state,max_abs_diff,late_diff,convention`.
pub fn write_summary_csv<T: Real, W: Write>(
    rows: &[&Comparison<T>],
    out: W,
) -> Result<(), DynamicsError> {
    let mut wtr = csv::Writer::from_writer(out);
    let err = |e: csv::Error| DynamicsError::Io(e.to_string());
    wtr.write_record([
        "delta_z_nm",
        "bound_state",
        "max_abs_diff",
        "late_diff",
        "convention",
    ])
    .map_err(err)?;
    for c in rows {
        wtr.write_record([
            fmt_sig(c.delta_z.as_f64()),
            c.bound_state.to_string(),
            fmt_sig(c.max_abs_diff.as_f64()),
            fmt_sig(c.late_diff.as_f64()),
            c.convention.to_string(),
        ])
        .map_err(err)?;
    }
    wtr.flush().map_err(|e| DynamicsError::Io(e.to_string()))
}

/// Compares two P_e series on a shared grid: (max diff, late-window mean diff).
pub fn pe_discrepancy<T: Real>(a: &AmplitudeTrajectory<T>, b: &AmplitudeTrajectory<T>) -> (T, T) {
    let n = a.len().min(b.len());
    let diffs: Vec<T> = (0..n).map(|i| (a.pe[i] - b.pe[i]).abs()).collect();
    let max = diffs.iter().fold(T::zero(), |m, &d| m.max(d));
    let start = a.window_start(T::lit(0.1)).min(n - 1);
    let tail = &diffs[start..];
    let late = tail.iter().fold(T::zero(), |s, &d| s + d) / T::from_count(tail.len());
    (max, late)
}

/// Runs the exact pipeline (table → kernel → Volterra) and the pseudomode
/// model on the same grid.
pub fn compare_exact_vs_pseudomode<T: Real>(
    system: &MaterialSystem<T>,
    settings: &TableSettings<T>,
    convention: Convention,
    t_max: T,
    dt: T,
) -> Result<Comparison<T>, Error> {
    let table = settings.build(system)?;
    let omega0 = system.emitter.omega0;
    let bound = find_bound_state(&table, omega0)?;
    let kernel = tabulate_kernel(&table, t_max, dt)?;
    let exact = solve_volterra(&kernel, omega0, t_max, dt)?;
    let params = coupling_g(system, convention);
    let pseudomode = solve_pseudomode(&params, omega0, t_max, dt)?;
    let (max_abs_diff, late_diff) = pe_discrepancy(&exact, &pseudomode);
    Ok(Comparison {
        delta_z: system.emitter.delta_z,
        convention,
        bound_state: bound.exists,
        exact,
        pseudomode,
        max_abs_diff,
        late_diff,
    })
}
