//! Interface Green's tensor and the emitter's spectral density.
//!
//! The exact density is the Sommerfeld-type integral over the normalized
//! in-plane wavenumber s = k_ρ/k_d,
//!
//! ```text
//! J(ω) = 3γ₀√ε_d ω³/(4πω₀³) · Re ∫₀^∞ ds s³ (1 − r_p e^{2i k_zd Δz}) / √(1 − s²)
//! ```
//!
//! split at s = 1. On [0, 1) the 1/√(1 − s²) endpoint is removed by
//! substitution; on (1, ∞) only the reflected term is kept because the
//! free-space term is purely imaginary there (it is the divergent vacuum
//! level shift, which never enters J).

use num_complex::Complex;
use rayon::prelude::*;
use thiserror::Error;

use crate::materials::{MaterialError, MaterialSystem};
use crate::quadrature::{
    integrate_finite, integrate_inverse_sqrt_endpoint, integrate_semi_infinite, QuadConfig,
    QuadError, SingularEnd,
};
use crate::scalar::Real;
use crate::table::{LowFrequencyTail, SpectralTable, TableError, NEGATIVE_FLOOR};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SpectralError {
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("quadrature failed at omega = {omega} eV: {source}")]
    Quadrature { omega: f64, source: QuadError },
    #[error("reflection coefficient has a pole at omega = {omega} eV, s = {s}")]
    Pole { omega: f64, s: f64 },
    #[error(
        "evanescent branch violated at omega = {omega} eV, s = {s}: Re(2i k_zd dz) = {exponent}"
    )]
    Branch { omega: f64, s: f64, exponent: f64 },
    #[error("spectral density negative at omega = {omega} eV: {value}")]
    Negative { omega: f64, value: f64 },
    #[error("invalid tabulation request: {0}")]
    InvalidRequest(String),
}

/// Which pieces of the Sommerfeld integrand to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions<T> {
    /// Keep the r_p-independent (direct radiation) term.
    pub include_free_term: bool,
    /// Keep the interface-reflected term. Disabling it gives the
    /// homogeneous-dielectric limit.
    pub include_reflection: bool,
    pub quad: QuadConfig<T>,
}

impl<T: Real> Default for SpectralOptions<T> {
    fn default() -> Self {
        Self {
            include_free_term: true,
            include_reflection: true,
            quad: QuadConfig::default(),
        }
    }
}

/// Principal square root moved onto the branch with non-negative imaginary
/// part; for real non-negative arguments the result is real and non-negative.
#[inline]
pub fn decaying_sqrt<T: Real>(z: Complex<T>) -> Complex<T> {
    let w = z.sqrt();
    if w.im < T::zero() {
        -w
    } else {
        w
    }
}

/// Wave-vector components at a given (ω, s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveComponents<T> {
    pub s: T,
    /// √ε_d ω/c (nm⁻¹).
    pub k_d: T,
    pub k_zd: Complex<T>,
    pub k_zm: Complex<T>,
}

impl<T: Real> WaveComponents<T> {
    pub fn new(system: &MaterialSystem<T>, omega: T, s: T) -> Result<Self, SpectralError> {
        let eps_m = system.eps_m(omega)?;
        let k0 = omega / system.constants.hbar_c;
        let k_d = system.k_d(omega);
        let one = Complex::new(T::one(), T::zero());
        let k_zd = decaying_sqrt(one * (k_d * k_d) * (T::one() - s * s));
        let k_zm = decaying_sqrt(eps_m * (k0 * k0) - one * (s * s * k_d * k_d));
        Ok(Self { s, k_d, k_zd, k_zm })
    }
}

/// r_p = (ε_d k_zm − ε_m k_zd)/(ε_d k_zm + ε_m k_zd) for given permittivities,
/// written in terms of wavenumbers normalized by ω/c.
pub fn fresnel_rp_from_permittivity<T: Real>(
    eps_d: T,
    eps_m: Complex<T>,
    s: T,
) -> Result<Complex<T>, SpectralError> {
    let one = Complex::new(T::one(), T::zero());
    let q_d = decaying_sqrt(one * (eps_d * (T::one() - s * s)));
    let q_m = decaying_sqrt(eps_m - one * (s * s * eps_d));
    rp_from_normalized(eps_d, eps_m, q_d, q_m).ok_or(SpectralError::Pole {
        omega: f64::NAN,
        s: s.as_f64(),
    })
}

#[inline]
fn rp_from_normalized<T: Real>(
    eps_d: T,
    eps_m: Complex<T>,
    q_d: Complex<T>,
    q_m: Complex<T>,
) -> Option<Complex<T>> {
    let a = q_m * eps_d;
    let b = eps_m * q_d;
    let den = a + b;
    if den.norm() <= T::epsilon() * (a.norm() + b.norm()) {
        None
    } else {
        Some((a - b) / den)
    }
}

/// Fresnel p-polarized reflection coefficient of the interface.
pub fn fresnel_rp<T: Real>(
    system: &MaterialSystem<T>,
    omega: T,
    s: T,
) -> Result<Complex<T>, SpectralError> {
    let eps_m = system.eps_m(omega)?;
    fresnel_rp_from_permittivity(system.dielectric.eps_d, eps_m, s).map_err(|e| match e {
        SpectralError::Pole { s, .. } => SpectralError::Pole {
            omega: omega.as_f64(),
            s,
        },
        other => other,
    })
}

/// Pieces of ∫₀^∞ ds s³ (1 − r_p e^{2ik_zdΔz})/√(1 − s²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SommerfeldParts<T> {
    /// Direct term over 0 ≤ s < 1 (2/3 analytically).
    pub free: Complex<T>,
    /// Reflected term over 0 ≤ s < 1.
    pub reflected_propagating: Complex<T>,
    /// Reflected term over s > 1.
    pub reflected_evanescent: Complex<T>,
    pub error_estimate: T,
}

impl<T: Real> SommerfeldParts<T> {
    pub fn reflected(&self) -> Complex<T> {
        self.reflected_propagating + self.reflected_evanescent
    }

    pub fn total(&self) -> Complex<T> {
        self.free + self.reflected()
    }
}

/// Evaluates the s-integral of the Green's tensor, honouring `opts`.
pub fn sommerfeld_integral<T: Real>(
    system: &MaterialSystem<T>,
    omega: T,
    opts: &SpectralOptions<T>,
) -> Result<SommerfeldParts<T>, SpectralError> {
    let eps_m = system.eps_m(omega)?;
    let eps_d = system.dielectric.eps_d;
    let k_d = system.k_d(omega);
    let dz = system.emitter.delta_z;
    let two = T::lit(2.0);
    let one = Complex::new(T::one(), T::zero());
    let zero = Complex::new(T::zero(), T::zero());
    let i = Complex::new(T::zero(), T::one());
    let quad_err = |source: QuadError| SpectralError::Quadrature {
        omega: omega.as_f64(),
        source,
    };

    let mut pole_at: Option<T> = None;
    let mut branch_violation: Option<(T, T)> = None;

    // Propagating window, s = 1 − d: √(1 − s²) = √(d(2 − d)).
    let mut free_err = T::zero();
    let free = if opts.include_free_term {
        let r = integrate_inverse_sqrt_endpoint(
            |s: T, d: T| one * (s * s * s / (d * (two - d)).sqrt()),
            T::zero(),
            T::one(),
            SingularEnd::Upper,
            &opts.quad,
        )
        .map_err(quad_err)?;
        free_err = r.error_estimate;
        r.value
    } else {
        zero
    };

    if !opts.include_reflection {
        return Ok(SommerfeldParts {
            free,
            reflected_propagating: zero,
            reflected_evanescent: zero,
            error_estimate: free_err,
        });
    }

    let mut reflected_term = |s: T, root: Complex<T>| -> Complex<T> {
        // root = √(1 − s²) on the decaying branch; k_zd = k_d·root.
        let q_m = decaying_sqrt(eps_m - one * (s * s * eps_d));
        let q_d = root * eps_d.sqrt();
        let rp = match rp_from_normalized(eps_d, eps_m, q_d, q_m) {
            Some(r) => r,
            None => {
                pole_at.get_or_insert(s);
                return zero;
            }
        };
        let exponent = i * root * (two * k_d * dz);
        (-rp * exponent.exp()) * (s * s * s) / root
    };

    let prop = integrate_inverse_sqrt_endpoint(
        |s: T, d: T| {
            let root = one * (d * (two - d)).sqrt();
            reflected_term(s, root)
        },
        T::zero(),
        T::one(),
        SingularEnd::Upper,
        &opts.quad,
    )
    .map_err(quad_err)?;

    // Evanescent window near s = 1, s = 1 + d: √(1 − s²) = i√(d(2 + d)).
    let s_split = two;
    let mut evanescent = |s: T, root: Complex<T>| -> Complex<T> {
        let exponent_re = -(two * k_d * dz) * root.im;
        if !(exponent_re < T::zero()) {
            branch_violation.get_or_insert((s, exponent_re));
        }
        reflected_term(s, root)
    };
    let near = integrate_inverse_sqrt_endpoint(
        |s: T, d: T| evanescent(s, i * (d * (two + d)).sqrt()),
        T::one(),
        s_split,
        SingularEnd::Lower,
        &opts.quad,
    )
    .map_err(quad_err)?;

    // Tail: the reflected term decays as exp(−2 k_d Δz s).
    let decay = (T::one() / (two * k_d * dz)).max(T::one());
    let tail = integrate_semi_infinite(
        |s: T| evanescent(s, i * (s * s - T::one()).sqrt()),
        s_split,
        decay,
        &opts.quad,
    )
    .map_err(quad_err)?;

    if let Some(s) = pole_at {
        return Err(SpectralError::Pole {
            omega: omega.as_f64(),
            s: s.as_f64(),
        });
    }
    if let Some((s, exponent)) = branch_violation {
        return Err(SpectralError::Branch {
            omega: omega.as_f64(),
            s: s.as_f64(),
            exponent: exponent.as_f64(),
        });
    }

    Ok(SommerfeldParts {
        free,
        reflected_propagating: prop.value,
        reflected_evanescent: near.value + tail.value,
        error_estimate: free_err + prop.error_estimate + near.error_estimate + tail.error_estimate,
    })
}

/// G_zz(r₀, r₀, ω) in nm⁻¹, with the divergent real part of the direct
/// term dropped (Im is complete, Re carries only the reflected field).
pub fn gzz_exact<T: Real>(
    system: &MaterialSystem<T>,
    omega: T,
    opts: &SpectralOptions<T>,
) -> Result<Complex<T>, SpectralError> {
    let parts = sommerfeld_integral(system, omega, opts)?;
    Ok(gzz_prefactor(system, omega) * parts.total())
}

/// Reflected part of G_zz only.
pub fn gzz_reflected<T: Real>(
    system: &MaterialSystem<T>,
    omega: T,
    opts: &SpectralOptions<T>,
) -> Result<Complex<T>, SpectralError> {
    let opts = SpectralOptions {
        include_free_term: false,
        include_reflection: true,
        ..*opts
    };
    let parts = sommerfeld_integral(system, omega, &opts)?;
    Ok(gzz_prefactor(system, omega) * parts.reflected())
}

fn gzz_prefactor<T: Real>(system: &MaterialSystem<T>, omega: T) -> Complex<T> {
    Complex::new(T::zero(), system.k_d(omega) / (T::lit(4.0) * T::PI()))
}

/// 3γ₀√ε_d ω³/(4πω₀³).
fn density_prefactor<T: Real>(system: &MaterialSystem<T>, omega: T) -> T {
    let e = &system.emitter;
    let r = omega / e.omega0;
    T::lit(3.0) * e.gamma0 * system.dielectric.eps_d.sqrt() * r * r * r / (T::lit(4.0) * T::PI())
}

fn clamp_density<T: Real>(omega: T, value: T) -> Result<T, SpectralError> {
    if value >= T::zero() {
        Ok(value)
    } else if value >= T::lit(-NEGATIVE_FLOOR) {
        Ok(T::zero())
    } else {
        Err(SpectralError::Negative {
            omega: omega.as_f64(),
            value: value.as_f64(),
        })
    }
}

/// Exact spectral density J(ω) in eV.
pub fn spectral_density_exact<T: Real>(
    system: &MaterialSystem<T>,
    omega: T,
    opts: &SpectralOptions<T>,
) -> Result<T, SpectralError> {
    let parts = sommerfeld_integral(system, omega, opts)?;
    clamp_density(omega, density_prefactor(system, omega) * parts.total().re)
}

/// Quasistatic (c → ∞) reflected Green's function
/// −c²/(16πω²ε_d Δz³)·(ε_d − ε_m)/(ε_d + ε_m).
pub fn gzz_quasistatic<T: Real>(
    system: &MaterialSystem<T>,
    omega: T,
) -> Result<Complex<T>, SpectralError> {
    let eps_m = system.eps_m(omega)?;
    let eps_d = system.dielectric.eps_d;
    let factor = quasistatic_reflection(eps_d, eps_m).ok_or(SpectralError::Pole {
        omega: omega.as_f64(),
        s: f64::INFINITY,
    })?;
    let c = system.constants.hbar_c;
    let dz = system.emitter.delta_z;
    let pre = c * c / (T::lit(16.0) * T::PI() * omega * omega * eps_d * dz * dz * dz);
    Ok(factor * (-pre))
}

/// (ε_d − ε_m)/(ε_d + ε_m), or `None` at the lossless surface-plasmon pole.
pub fn quasistatic_reflection<T: Real>(eps_d: T, eps_m: Complex<T>) -> Option<Complex<T>> {
    let den = eps_m + eps_d;
    if den.norm() <= T::lit(1e3) * T::epsilon() * eps_d {
        None
    } else {
        Some((-eps_m + eps_d) / den)
    }
}

/// J(ω) built from the quasistatic Green's function: 3γ₀cω²·Im G_zz/ω₀³.
pub fn spectral_density_quasistatic<T: Real>(
    system: &MaterialSystem<T>,
    omega: T,
) -> Result<T, SpectralError> {
    let g = gzz_quasistatic(system, omega)?;
    let e = &system.emitter;
    let w0 = e.omega0;
    let value =
        T::lit(3.0) * e.gamma0 * system.constants.hbar_c * omega * omega * g.im / (w0 * w0 * w0);
    clamp_density(omega, value)
}

/// Weight A = γ₀ω_p(3/16π)(ω_c/ω_p)³(c/(ω₀Δz))³ of the quasistatic Lorentzian (eV²).
pub fn lorentzian_weight<T: Real>(system: &MaterialSystem<T>) -> T {
    let m = &system.metal;
    let e = &system.emitter;
    let ratio = system.spp_cutoff() / m.omega_p;
    let reach = system.constants.hbar_c / (e.omega0 * e.delta_z);
    e.gamma0 * m.omega_p * T::lit(3.0) / (T::lit(16.0) * T::PI())
        * ratio
        * ratio
        * ratio
        * reach
        * reach
        * reach
}

/// Lorentzian approximation A·(γ_p/2)/[(ω − ω_c)² + (γ_p/2)²]. Accepts any real ω.
///
/// Its full-line Fourier transform is πA·e^{−(iω_c + γ_p/2)τ}; the pseudomode
/// coupling convention only decides which g² is paired with it.
pub fn spectral_density_lorentzian<T: Real>(system: &MaterialSystem<T>, omega: T) -> T {
    let half = system.metal.gamma_p * T::lit(0.5);
    let d = omega - system.spp_cutoff();
    lorentzian_weight(system) * half / (d * d + half * half)
}

/// Which spectral-density model to tabulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralModel {
    Exact,
    Quasistatic,
    Lorentzian,
}

/// Grid used by [`tabulate_spectral_density`]: `base_points` uniform nodes on
/// [ω_min, ω_max] merged with nodes of spacing γ_p/50 on [ω_c − 5γ_p, ω_c + 5γ_p]
/// and a node at ω₀, so that J(ω₀) is a sample rather than an interpolation.
pub fn tabulation_grid<T: Real>(
    system: &MaterialSystem<T>,
    omega_min: T,
    omega_max: T,
    base_points: usize,
) -> Vec<T> {
    let mut grid: Vec<T> = (0..base_points)
        .map(|k| {
            omega_min + (omega_max - omega_min) * T::from_count(k) / T::from_count(base_points - 1)
        })
        .collect();
    let gamma = system.metal.gamma_p;
    if gamma > T::zero() {
        let wc = system.spp_cutoff();
        let step = gamma / T::lit(50.0);
        let n = 500usize;
        for k in 0..=n {
            let w = wc - T::lit(5.0) * gamma + step * T::from_count(k);
            if w > omega_min && w < omega_max {
                grid.push(w);
            }
        }
    }
    let w0 = system.emitter.omega0;
    if w0 > omega_min && w0 < omega_max {
        grid.push(w0);
    }
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    let tol = T::lit(1e-9);
    grid.dedup_by(|b, a| (*b - *a).abs() <= tol * a.abs().max(T::one()));
    grid
}

/// Samples J on a refined grid. Node evaluation runs in parallel; the
/// output is identical for any worker count.
pub fn tabulate_spectral_density<T: Real>(
    system: &MaterialSystem<T>,
    omega_min: T,
    omega_max: T,
    base_points: usize,
    model: SpectralModel,
    opts: &SpectralOptions<T>,
) -> Result<SpectralTable<T>, SpectralError> {
    if !(omega_min > T::zero()) || !(omega_max > omega_min) {
        return Err(SpectralError::InvalidRequest(format!(
            "need 0 < omega_min < omega_max, got [{omega_min}, {omega_max}]"
        )));
    }
    if base_points < 2 {
        return Err(SpectralError::InvalidRequest(format!(
            "base_points must be >= 2, got {base_points}"
        )));
    }
    system.validate()?;
    let grid = tabulation_grid(system, omega_min, omega_max, base_points);
    let values: Result<Vec<T>, SpectralError> = grid
        .par_iter()
        .map(|&w| match model {
            SpectralModel::Exact => spectral_density_exact(system, w, opts),
            SpectralModel::Quasistatic => spectral_density_quasistatic(system, w),
            SpectralModel::Lorentzian => Ok(spectral_density_lorentzian(system, w)),
        })
        .collect();
    Ok(SpectralTable::new(grid, values?, LowFrequencyTail::Cubic)?)
}

/// Everything needed to rebuild a table for a modified system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableSettings<T> {
    pub omega_min: T,
    pub omega_max: T,
    pub base_points: usize,
    pub model: SpectralModel,
    pub options: SpectralOptions<T>,
}

impl<T: Real> Default for TableSettings<T> {
    fn default() -> Self {
        Self {
            omega_min: T::lit(0.02),
            omega_max: T::lit(6.0),
            base_points: 600,
            model: SpectralModel::Exact,
            options: SpectralOptions::default(),
        }
    }
}

impl<T: Real> TableSettings<T> {
    pub fn build(&self, system: &MaterialSystem<T>) -> Result<SpectralTable<T>, SpectralError> {
        tabulate_spectral_density(
            system,
            self.omega_min,
            self.omega_max,
            self.base_points,
            self.model,
            &self.options,
        )
    }
}

/// Lorentzian of the given total weight on [lo, hi], normalized so the
/// window integral of the exact Lorentzian equals `weight`, with nodes
/// geometrically graded away from the peak. No low-frequency tail.
pub fn lorentzian_fixture_table<T: Real>(
    omega_c: T,
    weight: T,
    width: T,
    lo: T,
    hi: T,
) -> Result<SpectralTable<T>, SpectralError> {
    if !(lo > T::zero() && lo < omega_c && omega_c < hi && width > T::zero() && weight >= T::zero())
    {
        return Err(SpectralError::InvalidRequest(format!(
            "fixture needs 0 < lo < omega_c < hi and width > 0, got lo={lo}, omega_c={omega_c}, hi={hi}, width={width}"
        )));
    }
    let half = width * T::lit(0.5);
    let window = ((hi - omega_c) / half).atan() + ((omega_c - lo) / half).atan();
    let amp = weight / window;
    let value = |w: T| {
        let d = w - omega_c;
        amp * half / (d * d + half * half)
    };
    let mut grid = vec![omega_c];
    let step = width / T::lit(50.0);
    for k in 1..=250 {
        let d = step * T::from_count(k);
        grid.push(omega_c - d);
        grid.push(omega_c + d);
    }
    let mut d = step * T::lit(250.0);
    let ratio = T::lit(1.01);
    while omega_c - d > lo || omega_c + d < hi {
        d *= ratio;
        grid.push(omega_c - d);
        grid.push(omega_c + d);
    }
    grid.retain(|w| *w > lo && *w < hi);
    grid.push(lo);
    grid.push(hi);
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    grid.dedup();
    let j = grid.iter().map(|&w| value(w)).collect();
    Ok(SpectralTable::new(grid, j, LowFrequencyTail::Zero)?)
}

/// Lossless integrand helper used by tests: ∫₀^∞ of a Lorentzian-like
/// function by adaptive quadrature (independent of any table).
pub fn integrate_density<T: Real, F: Fn(T) -> T>(
    f: F,
    lo: T,
    hi: T,
    cfg: &QuadConfig<T>,
) -> Result<T, QuadError> {
    integrate_finite(|w| Complex::new(f(w), T::zero()), lo, hi, cfg).map(|r| r.value.re)
}
