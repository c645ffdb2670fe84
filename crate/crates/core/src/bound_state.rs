//! Bound-state analysis: the pole condition y(ϖ) = ϖ below the band edge,
//! its residue weight Z, and the trapped population Z².

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::materials::MaterialSystem;
use crate::scalar::Real;
use crate::spectral::{SpectralError, TableSettings};
use crate::table::{fmt_sig, SpectralTable};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BoundStateError {
    #[error("varpi = {varpi} eV lies in the continuum (must be <= 0)")]
    Domain { varpi: f64 },
    #[error("no left bracket for the pole after {expansions} expansions")]
    Pathological { expansions: usize },
    #[error(
        "y(0) has the same sign at delta_z = {low} nm ({y_low} eV) and {high} nm ({y_high} eV)"
    )]
    Bracket {
        low: f64,
        high: f64,
        y_low: f64,
        y_high: f64,
    },
    #[error("y(varpi) - varpi is not decreasing near varpi = {varpi} eV")]
    NotMonotone { varpi: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("io: {0}")]
    Io(String),
}

/// Root tolerance |y(ϖ_b) − ϖ_b|.
pub const ROOT_TOLERANCE: f64 = 1e-9;
/// Tolerance |y(0)| for the existence threshold in Δz.
pub const THRESHOLD_TOLERANCE: f64 = 1e-6;
const MAX_EXPANSIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundStateResult<T> {
    pub exists: bool,
    /// Present iff `exists`; always below the band edge at 0.
    pub varpi_b: Option<T>,
    /// Present iff `exists`; in (0, 1].
    pub z_weight: Option<T>,
    pub y_at_zero: T,
}

/// Σ(ϖ) = ∫ J(ω)/(ω − ϖ) dω for ϖ ≤ 0.
pub fn self_energy<T: Real>(table: &SpectralTable<T>, varpi: T) -> Result<T, BoundStateError> {
    if !(varpi <= T::zero()) {
        return Err(BoundStateError::Domain {
            varpi: varpi.as_f64(),
        });
    }
    table.cauchy_integral(varpi).ok_or(BoundStateError::Domain {
        varpi: varpi.as_f64(),
    })
}

/// dΣ/dϖ = ∫ J(ω)/(ω − ϖ)² dω for ϖ ≤ 0.
pub fn self_energy_derivative<T: Real>(
    table: &SpectralTable<T>,
    varpi: T,
) -> Result<T, BoundStateError> {
    table
        .cauchy_derivative(varpi)
        .ok_or(BoundStateError::Domain {
            varpi: varpi.as_f64(),
        })
}

/// y(ϖ) = ω₀ − Σ(ϖ).
pub fn y_function<T: Real>(
    table: &SpectralTable<T>,
    omega0: T,
    varpi: T,
) -> Result<T, BoundStateError> {
    Ok(omega0 - self_energy(table, varpi)?)
}

/// Z = [1 + ∫J/(ϖ − ω)² dω]⁻¹.
pub fn residue_weight<T: Real>(table: &SpectralTable<T>, varpi: T) -> Result<T, BoundStateError> {
    Ok(T::one() / (T::one() + self_energy_derivative(table, varpi)?))
}

/// Checks that y(ϖ) − ϖ strictly decreases on a uniform scan of [lo, 0].
pub fn check_pole_monotone<T: Real>(
    table: &SpectralTable<T>,
    omega0: T,
    lo: T,
    points: usize,
) -> Result<(), BoundStateError> {
    let mut prev: Option<T> = None;
    for k in 0..points {
        let w = lo - lo * T::from_count(k) / T::from_count(points - 1);
        let f = y_function(table, omega0, w)? - w;
        if let Some(p) = prev {
            if !(f < p) {
                return Err(BoundStateError::NotMonotone { varpi: w.as_f64() });
            }
        }
        prev = Some(f);
    }
    Ok(())
}

/// Locates the discrete root of y(ϖ) = ϖ below 0, if any.
pub fn find_bound_state<T: Real>(
    table: &SpectralTable<T>,
    omega0: T,
) -> Result<BoundStateResult<T>, BoundStateError> {
    let y0 = y_function(table, omega0, T::zero())?;
    if !(y0 < T::zero()) {
        return Ok(BoundStateResult {
            exists: false,
            varpi_b: None,
            z_weight: None,
            y_at_zero: y0,
        });
    }
    let f = |w: T| -> Result<T, BoundStateError> { Ok(y_function(table, omega0, w)? - w) };

    let mut left = -T::one().max(y0.abs());
    let mut expansions = 0;
    while !(f(left)? > T::zero()) {
        expansions += 1;
        if expansions > MAX_EXPANSIONS || !left.is_finite() {
            return Err(BoundStateError::Pathological { expansions });
        }
        left *= T::lit(2.0);
    }
    let mut right = T::zero();
    let tol = T::lit(ROOT_TOLERANCE);
    let mut root = left;
    for _ in 0..400 {
        let mid = (left + right) * T::lit(0.5);
        let fm = f(mid)?;
        root = mid;
        if fm.abs() < tol || mid == left || mid == right {
            break;
        }
        if fm > T::zero() {
            left = mid;
        } else {
            right = mid;
        }
    }
    Ok(BoundStateResult {
        exists: true,
        varpi_b: Some(root),
        z_weight: Some(residue_weight(table, root)?),
        y_at_zero: y0,
    })
}

/// Long-time population Z², or 0 without a bound state.
pub fn steady_population<T: Real>(result: &BoundStateResult<T>) -> T {
    match result.z_weight {
        Some(z) if result.exists => z * z,
        _ => T::zero(),
    }
}

fn y_at_zero_for<T: Real>(
    system: &MaterialSystem<T>,
    delta_z: T,
    settings: &TableSettings<T>,
) -> Result<T, BoundStateError> {
    let sys = (*system).with_delta_z(delta_z);
    let table = settings.build(&sys)?;
    y_function(&table, sys.emitter.omega0, T::zero())
}

/// Critical Δz where y(0) changes sign, by bisection in Δz.
pub fn existence_threshold<T: Real>(
    system: &MaterialSystem<T>,
    delta_z_low: T,
    delta_z_high: T,
    settings: &TableSettings<T>,
) -> Result<T, BoundStateError> {
    let (mut lo, mut hi) = (delta_z_low, delta_z_high);
    let y_lo = y_at_zero_for(system, lo, settings)?;
    let y_hi = y_at_zero_for(system, hi, settings)?;
    if !(y_lo * y_hi < T::zero()) {
        return Err(BoundStateError::Bracket {
            low: lo.as_f64(),
            high: hi.as_f64(),
            y_low: y_lo.as_f64(),
            y_high: y_hi.as_f64(),
        });
    }
    let lo_negative = y_lo < T::zero();
    let tol = T::lit(THRESHOLD_TOLERANCE);
    let mut mid = (lo + hi) * T::lit(0.5);
    for _ in 0..200 {
        mid = (lo + hi) * T::lit(0.5);
        let y = y_at_zero_for(system, mid, settings)?;
        if y.abs() < tol || mid == lo || mid == hi {
            break;
        }
        if (y < T::zero()) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRow<T> {
    pub delta_z: T,
    pub result: BoundStateResult<T>,
}

impl<T: Real> SpectrumRow<T> {
    pub fn bound_energy(&self) -> Option<T> {
        self.result.varpi_b
    }

    /// The continuum starts at ϖ = 0.
    pub fn band_edge(&self) -> T {
        T::zero()
    }
}

/// Bound-state results over a Δz grid, in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumMap<T> {
    pub rows: Vec<SpectrumRow<T>>,
}

impl<T: Real> SpectrumMap<T> {
    /// CSV with header `delta_z_nm,exists,varpi_b_ev,z_weight,z_squared`;
    /// absent values are empty fields.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), BoundStateError> {
        let mut wtr = csv::Writer::from_writer(out);
        let err = |e: csv::Error| BoundStateError::Io(e.to_string());
        wtr.write_record([
            "delta_z_nm",
            "exists",
            "varpi_b_ev",
            "z_weight",
            "z_squared",
        ])
        .map_err(err)?;
        for row in &self.rows {
            let r = &row.result;
            let opt = |v: Option<T>| v.map(|x| fmt_sig(x.as_f64())).unwrap_or_default();
            wtr.write_record([
                fmt_sig(row.delta_z.as_f64()),
                r.exists.to_string(),
                opt(r.varpi_b),
                opt(r.z_weight),
                opt(r.z_weight.map(|z| z * z)),
            ])
            .map_err(err)?;
        }
        wtr.flush().map_err(|e| BoundStateError::Io(e.to_string()))
    }
}

/// Rebuilds the table at every Δz and solves for the bound state.
pub fn spectrum_map<T: Real>(
    system: &MaterialSystem<T>,
    delta_z_grid: &[T],
    settings: &TableSettings<T>,
) -> Result<SpectrumMap<T>, BoundStateError> {
    let rows: Result<Vec<SpectrumRow<T>>, BoundStateError> = delta_z_grid
        .par_iter()
        .map(|&dz| {
            let sys = (*system).with_delta_z(dz);
            let table = settings.build(&sys)?;
            Ok(SpectrumRow {
                delta_z: dz,
                result: find_bound_state(&table, sys.emitter.omega0)?,
            })
        })
        .collect();
    Ok(SpectrumMap { rows: rows? })
}
