//! Physical parameters, the unit system, and the Drude permittivity.
//!
//! Units: ħ = 1. Energies, frequencies and rates are in eV, times in eV⁻¹
//! and lengths in nm. The only conversion constant is ħc. The vacuum
//! permittivity and the dipole moment never appear on their own: both are
//! absorbed into the vacuum emission rate γ₀ = ω₀³μ²/(3πħε₀c³).

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Real;

/// ħc in eV·nm.
pub const HBAR_C_EV_NM: f64 = 197.326_980_4;

/// Duration of one time unit (1 eV⁻¹ with ħ = 1) in femtoseconds.
pub const FS_PER_INV_EV: f64 = 0.658_212;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MaterialError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("frequency must be positive, got {omega} eV")]
    NonPositiveFrequency { omega: f64 },
}

fn check<T: Real>(
    ok: bool,
    name: &'static str,
    value: T,
    reason: &'static str,
) -> Result<(), MaterialError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(MaterialError::InvalidParameter {
            name,
            value: value.as_f64(),
            reason,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants<T> {
    /// ħc in eV·nm.
    pub hbar_c: T,
}

impl<T: Real> Default for Constants<T> {
    fn default() -> Self {
        Self {
            hbar_c: T::lit(HBAR_C_EV_NM),
        }
    }
}

/// Drude metal ε(ω) = ε_∞ − ω_p²/[ω(ω + iγ_p)].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrudeMetal<T> {
    pub omega_p: T,
    pub eps_inf: T,
    pub gamma_p: T,
}

impl<T: Real> DrudeMetal<T> {
    pub fn new(omega_p: T, eps_inf: T, gamma_p: T) -> Result<Self, MaterialError> {
        let metal = Self {
            omega_p,
            eps_inf,
            gamma_p,
        };
        metal.validate()?;
        Ok(metal)
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        check(
            self.omega_p > T::zero(),
            "omega_p",
            self.omega_p,
            "must be > 0",
        )?;
        check(
            self.eps_inf >= T::one(),
            "eps_inf",
            self.eps_inf,
            "must be >= 1",
        )?;
        check(
            self.gamma_p >= T::zero(),
            "gamma_p",
            self.gamma_p,
            "must be >= 0",
        )
    }

    /// Complex permittivity at `omega` (eV).
    pub fn permittivity(&self, omega: T) -> Result<Complex<T>, MaterialError> {
        if !(omega > T::zero()) {
            return Err(MaterialError::NonPositiveFrequency {
                omega: omega.as_f64(),
            });
        }
        Ok(self.permittivity_unchecked(omega))
    }

    #[inline]
    pub(crate) fn permittivity_unchecked(&self, omega: T) -> Complex<T> {
        let denom = Complex::new(omega * omega, omega * self.gamma_p);
        Complex::new(self.eps_inf, T::zero()) - denom.inv() * (self.omega_p * self.omega_p)
    }
}

/// Free function form of [`DrudeMetal::permittivity`].
pub fn drude_permittivity<T: Real>(
    metal: &DrudeMetal<T>,
    omega: T,
) -> Result<Complex<T>, MaterialError> {
    metal.permittivity(omega)
}

/// Lossless, non-dispersive, non-magnetic dielectric half-space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dielectric<T> {
    pub eps_d: T,
}

impl<T: Real> Dielectric<T> {
    pub fn new(eps_d: T) -> Result<Self, MaterialError> {
        let d = Self { eps_d };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        check(self.eps_d >= T::one(), "eps_d", self.eps_d, "must be >= 1")
    }
}

/// Dipole orientation. Only the interface-normal dipole is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    #[default]
    Normal,
}

/// Two-level emitter embedded in the dielectric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emitter<T> {
    /// Transition frequency ω₀ (eV).
    pub omega0: T,
    /// Vacuum spontaneous emission rate γ₀ (eV).
    pub gamma0: T,
    /// Emitter–interface distance Δz (nm).
    pub delta_z: T,
    pub orientation: Orientation,
}

impl<T: Real> Emitter<T> {
    pub fn new(omega0: T, gamma0: T, delta_z: T) -> Result<Self, MaterialError> {
        let e = Self {
            omega0,
            gamma0,
            delta_z,
            orientation: Orientation::Normal,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        check(
            self.omega0 > T::zero(),
            "omega0",
            self.omega0,
            "must be > 0",
        )?;
        check(
            self.gamma0 > T::zero(),
            "gamma0",
            self.gamma0,
            "must be > 0",
        )?;
        check(
            self.delta_z > T::zero(),
            "delta_z",
            self.delta_z,
            "must be > 0",
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialSystem<T> {
    pub metal: DrudeMetal<T>,
    pub dielectric: Dielectric<T>,
    pub emitter: Emitter<T>,
    pub constants: Constants<T>,
}

impl<T: Real> MaterialSystem<T> {
    pub fn new(
        metal: DrudeMetal<T>,
        dielectric: Dielectric<T>,
        emitter: Emitter<T>,
    ) -> Result<Self, MaterialError> {
        let sys = Self {
            metal,
            dielectric,
            emitter,
            constants: Constants::default(),
        };
        sys.validate()?;
        Ok(sys)
    }

    /// Silver (ω_p = 9 eV, ε_∞ = 5.7, γ_p = 0.1 eV) against germanium
    /// (ε_d = 25), emitter at ω₀ = 1.2 eV, γ₀ = 10⁻⁴ eV, Δz = 1.2 nm.
    pub fn silver_germanium_default() -> Self {
        Self {
            metal: DrudeMetal {
                omega_p: T::lit(9.0),
                eps_inf: T::lit(5.7),
                gamma_p: T::lit(0.1),
            },
            dielectric: Dielectric {
                eps_d: T::lit(25.0),
            },
            emitter: Emitter {
                omega0: T::lit(1.2),
                gamma0: T::lit(1e-4),
                delta_z: T::lit(1.2),
                orientation: Orientation::Normal,
            },
            constants: Constants::default(),
        }
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        self.metal.validate()?;
        self.dielectric.validate()?;
        self.emitter.validate()
    }

    pub fn with_delta_z(mut self, delta_z: T) -> Self {
        self.emitter.delta_z = delta_z;
        self
    }

    pub fn with_eps_d(mut self, eps_d: T) -> Self {
        self.dielectric.eps_d = eps_d;
        self
    }

    pub fn with_gamma0(mut self, gamma0: T) -> Self {
        self.emitter.gamma0 = gamma0;
        self
    }

    pub fn with_gamma_p(mut self, gamma_p: T) -> Self {
        self.metal.gamma_p = gamma_p;
        self
    }

    /// Metal permittivity ε_m(ω).
    pub fn eps_m(&self, omega: T) -> Result<Complex<T>, MaterialError> {
        self.metal.permittivity(omega)
    }

    /// Dielectric wavenumber k_d = √ε_d ω/c in nm⁻¹.
    pub fn k_d(&self, omega: T) -> T {
        self.dielectric.eps_d.sqrt() * omega / self.constants.hbar_c
    }

    /// SPP cutoff ω_c = ω_p/√(ε_d + ε_∞).
    pub fn spp_cutoff(&self) -> T {
        spp_cutoff_frequency(&self.metal, &self.dielectric)
    }
}

/// Surface-plasmon cutoff (quasistatic resonance) ω_c = ω_p/√(ε_d + ε_∞).
pub fn spp_cutoff_frequency<T: Real>(metal: &DrudeMetal<T>, dielectric: &Dielectric<T>) -> T {
    metal.omega_p / (dielectric.eps_d + metal.eps_inf).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn lossless() -> DrudeMetal<f64> {
        DrudeMetal::new(9.0, 5.7, 0.0).unwrap()
    }

    #[test]
    fn lossless_zero_crossing() {
        let m = lossless();
        let w = 9.0 / 5.7f64.sqrt();
        assert_relative_eq!(w, 3.7697, epsilon = 1e-3);
        let e = m.permittivity(w).unwrap();
        assert!(e.norm() < 1e-12, "{e}");
    }

    #[test]
    fn lossless_at_cutoff_equals_minus_eps_d() {
        let m = lossless();
        let d = Dielectric::new(25.0).unwrap();
        let wc = spp_cutoff_frequency(&m, &d);
        let e = m.permittivity(wc).unwrap();
        assert_relative_eq!(e.re, -25.0, epsilon = 1e-12);
        assert_eq!(e.im, 0.0);
    }

    #[test]
    fn lossy_value_at_emitter_frequency() {
        // 81 / (1.2 (1.2 + 0.1 i)) = 81 (1.2 - 0.1 i) / (1.2 * 1.45)
        let m = DrudeMetal::new(9.0, 5.7, 0.1).unwrap();
        let e = m.permittivity(1.2).unwrap();
        let expected_re = 5.7 - 81.0 * 1.2 / (1.2 * 1.45);
        let expected_im = 81.0 * 0.1 / (1.2 * 1.45);
        assert_relative_eq!(e.re, expected_re, epsilon = 1e-12);
        assert_relative_eq!(e.im, expected_im, epsilon = 1e-12);
        assert_relative_eq!(e.re, -50.16, epsilon = 5e-3);
        assert_relative_eq!(e.im, 4.655, epsilon = 5e-4);
    }

    #[test]
    fn non_positive_frequency_rejected() {
        let m = lossless();
        assert!(matches!(
            m.permittivity(0.0),
            Err(MaterialError::NonPositiveFrequency { .. })
        ));
        assert!(m.permittivity(-1.0).is_err());
    }

    #[test]
    fn cutoff_values() {
        let m = lossless();
        let wc = spp_cutoff_frequency(&m, &Dielectric::new(25.0).unwrap());
        assert!((wc - 1.62433).abs() < 1e-5);
        let wc1 = spp_cutoff_frequency(&m, &Dielectric::new(1.0).unwrap());
        assert!((wc1 - 3.4770).abs() < 1e-4);
        assert!(wc1 < 9.0 / 5.7f64.sqrt());
    }

    #[test]
    fn default_system_parameters() {
        let s = MaterialSystem::<f64>::silver_germanium_default();
        assert_eq!(s.metal.omega_p, 9.0);
        assert_eq!(s.metal.eps_inf, 5.7);
        assert_eq!(s.metal.gamma_p, 0.1);
        assert_eq!(s.dielectric.eps_d, 25.0);
        assert_eq!(s.emitter.omega0, 1.2);
        assert_eq!(s.emitter.gamma0, 1e-4);
        assert_eq!(s.emitter.delta_z, 1.2);
        s.validate().unwrap();
    }

    #[test]
    fn invalid_parameters() {
        assert!(DrudeMetal::new(0.0, 5.7, 0.1).is_err());
        assert!(DrudeMetal::new(9.0, 0.5, 0.1).is_err());
        assert!(DrudeMetal::new(9.0, 5.7, -0.1).is_err());
        assert!(Dielectric::new(0.5).is_err());
        assert!(Emitter::new(1.2, 0.0, 1.0).is_err());
        assert!(Emitter::new(1.2, 1e-4, 0.0).is_err());
        assert!(Emitter::new(1.2, 1e-4, f64::NAN).is_err());
    }

    #[test]
    fn single_precision_matches() {
        let m = DrudeMetal::<f32>::new(9.0, 5.7, 0.1).unwrap();
        let e = m.permittivity(1.2).unwrap();
        assert!((e.re + 50.16).abs() < 1e-2);
    }

    proptest! {
        #[test]
        fn imaginary_part_sign(w in 0.01f64..20.0, g in 0.0f64..1.0) {
            let m = DrudeMetal::new(9.0, 5.7, g).unwrap();
            let e = m.permittivity(w).unwrap();
            if g > 0.0 {
                prop_assert!(e.im > 0.0);
            } else {
                prop_assert_eq!(e.im, 0.0);
            }
        }

        #[test]
        fn real_part_increasing_when_lossless(w in 0.01f64..20.0, dw in 1e-3f64..1.0) {
            let m = lossless();
            prop_assert!(m.permittivity(w + dw).unwrap().re > m.permittivity(w).unwrap().re);
        }

        #[test]
        fn cutoff_scales_with_plasma_frequency(lambda in 0.1f64..10.0, eps_d in 1.0f64..40.0) {
            let m = lossless();
            let d = Dielectric::new(eps_d).unwrap();
            let scaled = DrudeMetal::new(9.0 * lambda, 5.7, 0.0).unwrap();
            let a = spp_cutoff_frequency(&scaled, &d);
            let b = lambda * spp_cutoff_frequency(&m, &d);
            prop_assert!((a - b).abs() <= 1e-12 * b);
        }
    }
}
