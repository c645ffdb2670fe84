//! Adaptive Gauss–Kronrod integration of complex-valued integrands.
//!
//! Three entry points cover everything the rest of the crate needs: finite
//! intervals, intervals with an inverse-square-root endpoint singularity
//! (removed exactly by substitution), and semi-infinite intervals with a
//! decaying integrand (progressive interval doubling).

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum QuadError {
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("invalid quadrature configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("integrand is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error(
        "no convergence after {subdivisions} subdivisions: best estimate {re}{im:+}i, error {error_estimate:e}"
    )]
    NotConverged {
        re: f64,
        im: f64,
        error_estimate: f64,
        subdivisions: usize,
    },
    #[error("integrand does not decay beyond x = {x} (segment contributions not shrinking)")]
    Divergent { x: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_subdivisions: usize,
}

impl<T: Real> Default for QuadConfig<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-9),
            abs_tol: T::lit(1e-12),
            max_subdivisions: 2000,
        }
    }
}

impl<T: Real> QuadConfig<T> {
    pub fn new(rel_tol: T, abs_tol: T, max_subdivisions: usize) -> Result<Self, QuadError> {
        let cfg = Self {
            rel_tol,
            abs_tol,
            max_subdivisions,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), QuadError> {
        if !(self.rel_tol > T::zero()) || !(self.abs_tol > T::zero()) {
            return Err(QuadError::InvalidConfig("tolerances must be > 0"));
        }
        if self.max_subdivisions == 0 {
            return Err(QuadError::InvalidConfig("max_subdivisions must be >= 1"));
        }
        Ok(())
    }

    fn target(&self, value: Complex<T>) -> T {
        self.abs_tol.max(self.rel_tol * value.norm())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: Complex<T>,
    pub error_estimate: T,
    pub evaluations: usize,
}

/// Which end of the interval carries the 1/√|x − c| singularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularEnd {
    Lower,
    Upper,
}

// 21-point Kronrod extension of the 10-point Gauss rule. Odd indices of
// XGK are the Gauss abscissae.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

struct Rule<T> {
    xgk: [T; 11],
    wg: [T; 5],
    wgk: [T; 11],
}

impl<T: Real> Rule<T> {
    fn new() -> Self {
        Self {
            xgk: XGK.map(T::lit),
            wg: WG.map(T::lit),
            wgk: WGK.map(T::lit),
        }
    }

    /// Kronrod estimate and error estimate on [a, b].
    fn apply<F>(&self, f: &mut F, a: T, b: T) -> Result<(Complex<T>, T), QuadError>
    where
        F: FnMut(T) -> Complex<T>,
    {
        let half = T::lit(0.5);
        let center = half * (a + b);
        let half_len = half * (b - a);
        let mut eval = |x: T| -> Result<Complex<T>, QuadError> {
            let v = f(x);
            if v.re.is_finite() && v.im.is_finite() {
                Ok(v)
            } else {
                Err(QuadError::NonFinite { x: x.as_f64() })
            }
        };

        let fc = eval(center)?;
        let mut kron = fc * self.wgk[10];
        let mut gauss = Complex::new(T::zero(), T::zero());
        let mut abs_sum = fc.norm() * self.wgk[10];
        for j in 0..10 {
            let dx = half_len * self.xgk[j];
            let f1 = eval(center - dx)?;
            let f2 = eval(center + dx)?;
            let pair = f1 + f2;
            kron += pair * self.wgk[j];
            abs_sum += (f1.norm() + f2.norm()) * self.wgk[j];
            if j % 2 == 1 {
                gauss += pair * self.wg[j / 2];
            }
        }
        let value = kron * half_len;
        let raw = ((kron - gauss) * half_len).norm();
        let floor = T::lit(50.0) * T::epsilon() * abs_sum * half_len.abs();
        Ok((value, raw.max(floor)))
    }
}

struct Segment<T> {
    a: T,
    b: T,
    value: Complex<T>,
    error: T,
}

/// Adaptive integration of `f` over the finite interval [a, b].
pub fn integrate_finite<T, F>(
    mut f: F,
    a: T,
    b: T,
    cfg: &QuadConfig<T>,
) -> Result<QuadResult<T>, QuadError>
where
    T: Real,
    F: FnMut(T) -> Complex<T>,
{
    cfg.validate()?;
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(QuadError::InvalidInterval {
            a: a.as_f64(),
            b: b.as_f64(),
        });
    }
    let rule = Rule::new();
    let (value, error) = rule.apply(&mut f, a, b)?;
    let mut segments = vec![Segment { a, b, value, error }];
    let mut evaluations = 21;
    let mut total = value;
    let mut total_err = error;

    while total_err > cfg.target(total) {
        if segments.len() >= cfg.max_subdivisions {
            return Err(QuadError::NotConverged {
                re: total.re.as_f64(),
                im: total.im.as_f64(),
                error_estimate: total_err.as_f64(),
                subdivisions: segments.len(),
            });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |acc, (i, s)| {
                if s.error > acc.1 {
                    (i, s.error)
                } else {
                    acc
                }
            });
        let seg = segments.swap_remove(worst);
        let mid = T::lit(0.5) * (seg.a + seg.b);
        if !(seg.a < mid && mid < seg.b) {
            // Interval exhausted at working precision; accept what we have.
            return Err(QuadError::NotConverged {
                re: total.re.as_f64(),
                im: total.im.as_f64(),
                error_estimate: total_err.as_f64(),
                subdivisions: segments.len() + 1,
            });
        }
        let (v1, e1) = rule.apply(&mut f, seg.a, mid)?;
        let (v2, e2) = rule.apply(&mut f, mid, seg.b)?;
        evaluations += 42;
        segments.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
        });
        segments.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
        });
        // Re-summing avoids drift from repeated add/subtract of estimates.
        total = segments
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |s, g| s + g.value);
        total_err = segments.iter().fold(T::zero(), |s, g| s + g.error);
    }

    Ok(QuadResult {
        value: total,
        error_estimate: total_err,
        evaluations,
    })
}

/// Integrates f over [a, b] where f ~ 1/√|x − c| at the singular end c.
///
/// The integrand is called as `f(x, d)` with `d = |x − c|` supplied exactly,
/// so callers can form √d or √(1 − x²)-type factors without cancellation.
/// The substitution x = c ∓ u² turns the integral into ∫ 2u f du, whose
/// integrand is bounded.
pub fn integrate_inverse_sqrt_endpoint<T, F>(
    mut f: F,
    a: T,
    b: T,
    end: SingularEnd,
    cfg: &QuadConfig<T>,
) -> Result<QuadResult<T>, QuadError>
where
    T: Real,
    F: FnMut(T, T) -> Complex<T>,
{
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(QuadError::InvalidInterval {
            a: a.as_f64(),
            b: b.as_f64(),
        });
    }
    let u_max = (b - a).sqrt();
    let two = T::lit(2.0);
    match end {
        SingularEnd::Upper => integrate_finite(
            |u: T| {
                let d = u * u;
                f(b - d, d) * (two * u)
            },
            T::zero(),
            u_max,
            cfg,
        ),
        SingularEnd::Lower => integrate_finite(
            |u: T| {
                let d = u * u;
                f(a + d, d) * (two * u)
            },
            T::zero(),
            u_max,
            cfg,
        ),
    }
}

/// Integrates a decaying f over [a, ∞).
///
/// Segments of length `decay_scale`, `decay_scale`, 2·`decay_scale`, ... are
/// integrated in turn until two consecutive segments each contribute less
/// than max(abs_tol, rel_tol·|running total|).
pub fn integrate_semi_infinite<T, F>(
    mut f: F,
    a: T,
    decay_scale: T,
    cfg: &QuadConfig<T>,
) -> Result<QuadResult<T>, QuadError>
where
    T: Real,
    F: FnMut(T) -> Complex<T>,
{
    cfg.validate()?;
    if !a.is_finite() || !(decay_scale > T::zero()) || !decay_scale.is_finite() {
        return Err(QuadError::InvalidInterval {
            a: a.as_f64(),
            b: f64::INFINITY,
        });
    }
    const MAX_SEGMENTS: usize = 200;
    const STALL_LIMIT: usize = 8;

    let mut total = Complex::new(T::zero(), T::zero());
    let mut total_err = T::zero();
    let mut evaluations = 0;
    let mut lo = a;
    let mut len = decay_scale;
    let mut quiet = 0;
    let mut stalled = 0;
    let mut prev_mag = T::infinity();

    for k in 0..MAX_SEGMENTS {
        let hi = lo + len;
        if !hi.is_finite() || !(hi > lo) {
            break;
        }
        let seg = integrate_finite(&mut f, lo, hi, cfg)?;
        evaluations += seg.evaluations;
        total += seg.value;
        total_err += seg.error_estimate;
        let mag = seg.value.norm();

        if mag < cfg.target(total) {
            quiet += 1;
            if quiet >= 2 {
                return Ok(QuadResult {
                    value: total,
                    error_estimate: total_err + mag,
                    evaluations,
                });
            }
        } else {
            quiet = 0;
        }

        // Segment k+1 is twice as long as segment k; a decaying integrand
        // must eventually make the per-segment contribution shrink.
        if k >= 4 && mag >= prev_mag {
            stalled += 1;
            if stalled >= STALL_LIMIT {
                return Err(QuadError::Divergent { x: hi.as_f64() });
            }
        } else if mag < prev_mag {
            stalled = 0;
        }
        prev_mag = mag;

        lo = hi;
        if k >= 1 {
            len *= T::lit(2.0);
        }
    }
    Err(QuadError::Divergent { x: lo.as_f64() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(x: f64) -> Complex<f64> {
        Complex::new(x, 0.0)
    }

    fn cfg() -> QuadConfig<f64> {
        QuadConfig::default()
    }

    #[test]
    fn constant_and_cubic() {
        let r = integrate_finite(|_| c(1.0), 0.0, 1.0, &cfg()).unwrap();
        assert_relative_eq!(r.value.re, 1.0, epsilon = 1e-14);
        assert_eq!(r.value.im, 0.0);
        assert!(r.evaluations > 0);
        let r = integrate_finite(|x| c(x * x * x), 0.0, 1.0, &cfg()).unwrap();
        assert_relative_eq!(r.value.re, 0.25, epsilon = 1e-14);
    }

    #[test]
    fn oscillatory_exponential() {
        let r = integrate_finite(|x| Complex::new(0.0, x).exp(), 0.0, PI, &cfg()).unwrap();
        assert!((r.value - Complex::new(0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn invalid_interval() {
        assert!(matches!(
            integrate_finite(|_| c(1.0), 1.0, 1.0, &cfg()),
            Err(QuadError::InvalidInterval { .. })
        ));
        assert!(integrate_finite(|_| c(1.0), 2.0, 1.0, &cfg()).is_err());
    }

    #[test]
    fn non_finite_integrand_reported() {
        let r = integrate_finite(|x| c(1.0 / (x - 0.5)), 0.0, 1.0, &cfg());
        // The centre node of the first rule hits the pole exactly.
        assert!(matches!(r, Err(QuadError::NonFinite { .. })));
    }

    #[test]
    fn subdivision_limit_reports_best_estimate() {
        let tight = QuadConfig::new(1e-15, 1e-300, 3).unwrap();
        let r = integrate_finite(|x: f64| c((50.0 * x).sin().abs()), 0.0, 3.0, &tight);
        match r {
            Err(QuadError::NotConverged {
                re, subdivisions, ..
            }) => {
                assert!(re.is_finite());
                assert_eq!(subdivisions, 3);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn inverse_sqrt_endpoint_examples() {
        let r = integrate_inverse_sqrt_endpoint(
            |s, _| c(s.powi(3) / (1.0 - s * s).sqrt()),
            0.0,
            1.0,
            SingularEnd::Upper,
            &cfg(),
        )
        .unwrap();
        assert_relative_eq!(r.value.re, 2.0 / 3.0, epsilon = 1e-12);

        let r = integrate_inverse_sqrt_endpoint(
            |_, d: f64| c(1.0 / (d * (2.0 - d)).sqrt()),
            0.0,
            1.0,
            SingularEnd::Upper,
            &cfg(),
        )
        .unwrap();
        assert_relative_eq!(r.value.re, PI / 2.0, epsilon = 1e-12);

        let r = integrate_inverse_sqrt_endpoint(
            |s, _| c(s / (1.0 - s * s).sqrt()),
            0.0,
            1.0,
            SingularEnd::Upper,
            &cfg(),
        )
        .unwrap();
        assert_relative_eq!(r.value.re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn inverse_sqrt_lower_end() {
        // ∫_1^2 dx / √(x − 1) = 2
        let r = integrate_inverse_sqrt_endpoint(
            |_, d: f64| c(1.0 / d.sqrt()),
            1.0,
            2.0,
            SingularEnd::Lower,
            &cfg(),
        )
        .unwrap();
        assert_relative_eq!(r.value.re, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn semi_infinite_examples() {
        let r = integrate_semi_infinite(|x| c((-x).exp()), 0.0, 1.0, &cfg()).unwrap();
        assert_relative_eq!(r.value.re, 1.0, epsilon = 1e-10);
        let r = integrate_semi_infinite(|x| c((-x).exp() * (10.0 * x).cos()), 0.0, 1.0, &cfg())
            .unwrap();
        assert_relative_eq!(r.value.re, 1.0 / 101.0, epsilon = 1e-10);
        let r = integrate_semi_infinite(|x| c(x * (-x * x).exp()), 0.0, 1.0, &cfg()).unwrap();
        assert_relative_eq!(r.value.re, 0.5, epsilon = 1e-10);
    }

    #[test]
    fn semi_infinite_divergence_detected() {
        let r = integrate_semi_infinite(|_| c(1.0), 0.0, 1.0, &cfg());
        assert!(matches!(r, Err(QuadError::Divergent { .. })));
        let r = integrate_semi_infinite(|x| c(1.0 / (1.0 + x)), 0.0, 1.0, &cfg());
        assert!(matches!(r, Err(QuadError::Divergent { .. })));
    }

    #[test]
    fn error_estimate_bounds_polynomial_error() {
        // Degree up to 19 is integrated exactly by the embedded Gauss rule.
        for deg in 0..=25 {
            let r = integrate_finite(|x| c(x.powi(deg)), 0.0, 1.0, &cfg()).unwrap();
            let exact = 1.0 / (deg as f64 + 1.0);
            let err = (r.value.re - exact).abs();
            assert!(
                err <= r.error_estimate.max(4.0 * f64::EPSILON),
                "deg {deg}: err {err:e} > est {:e}",
                r.error_estimate
            );
        }
    }

    #[test]
    fn single_precision_works() {
        let cfg32 = QuadConfig::<f32>::new(1e-5, 1e-7, 200).unwrap();
        let r = integrate_finite(|x: f32| Complex::new(x * x, 0.0), 0.0, 1.0, &cfg32).unwrap();
        assert!((r.value.re - 1.0 / 3.0).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn linearity(alpha in -3.0f64..3.0, beta in -3.0f64..3.0, k in 0.5f64..8.0) {
            let f = |x: f64| Complex::new(x.sin(), (k * x).cos());
            let g = |x: f64| c((-x * x).exp());
            let lin = integrate_finite(|x| f(x) * alpha + g(x) * beta, -1.0, 2.0, &cfg()).unwrap();
            let fa = integrate_finite(f, -1.0, 2.0, &cfg()).unwrap();
            let gb = integrate_finite(g, -1.0, 2.0, &cfg()).unwrap();
            let combo = fa.value * alpha + gb.value * beta;
            let tol = 1e-9 * (1.0 + combo.norm());
            prop_assert!((lin.value - combo).norm() < tol);
        }

        #[test]
        fn subdivision_invariance(split in 0.01f64..0.99, k in 0.5f64..20.0) {
            let f = |x: f64| Complex::new(0.0, k * x).exp() * (1.0 + x * x);
            let whole = integrate_finite(f, 0.0, 1.0, &cfg()).unwrap().value;
            let left = integrate_finite(f, 0.0, split, &cfg()).unwrap().value;
            let right = integrate_finite(f, split, 1.0, &cfg()).unwrap().value;
            prop_assert!((whole - left - right).norm() <= 10.0 * 1e-9 * whole.norm().max(1e-3));
        }
    }
}
