//! Tabulated spectral density with a piecewise-linear interpolation contract.

use std::io::{Read, Write};

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TableError {
    #[error("spectral table needs at least two nodes, got {0}")]
    TooShort(usize),
    #[error("grid and value arrays differ in length ({grid} vs {values})")]
    LengthMismatch { grid: usize, values: usize },
    #[error("grid must be positive and strictly increasing (node {index}, omega = {omega})")]
    BadGrid { index: usize, omega: f64 },
    #[error("spectral density must be finite and non-negative (omega = {omega}, J = {value})")]
    BadValue { omega: f64, value: f64 },
    #[error("csv: {0}")]
    Csv(String),
}

/// Values within this distance below zero are numerical noise and are clamped.
pub const NEGATIVE_FLOOR: f64 = 1e-12;

/// How J is continued below the first grid node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowFrequencyTail {
    /// J(ω) = J(ω_min)·(ω/ω_min)³ on [0, ω_min].
    Cubic,
    /// J = 0 below ω_min.
    Zero,
}

/// J(ω) sampled on a strictly increasing grid, linear between nodes and zero
/// above the last node.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTable<T> {
    omega: Vec<T>,
    j: Vec<T>,
    tail: LowFrequencyTail,
}

/// One linear piece of the interpolant: J(ω) = j_lo + slope·(ω − lo) on [lo, hi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<T> {
    pub lo: T,
    pub hi: T,
    pub j_lo: T,
    pub j_hi: T,
}

impl<T: Real> Segment<T> {
    #[inline]
    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    #[inline]
    pub fn slope(&self) -> T {
        (self.j_hi - self.j_lo) / (self.hi - self.lo)
    }
}

impl<T: Real> SpectralTable<T> {
    pub fn new(omega: Vec<T>, mut j: Vec<T>, tail: LowFrequencyTail) -> Result<Self, TableError> {
        if omega.len() != j.len() {
            return Err(TableError::LengthMismatch {
                grid: omega.len(),
                values: j.len(),
            });
        }
        if omega.len() < 2 {
            return Err(TableError::TooShort(omega.len()));
        }
        for (i, w) in omega.iter().enumerate() {
            let bad = !w.is_finite() || !(*w > T::zero()) || (i > 0 && !(*w > omega[i - 1]));
            if bad {
                return Err(TableError::BadGrid {
                    index: i,
                    omega: w.as_f64(),
                });
            }
        }
        let floor = T::lit(-NEGATIVE_FLOOR);
        for (w, v) in omega.iter().zip(j.iter_mut()) {
            if !v.is_finite() || *v < floor {
                return Err(TableError::BadValue {
                    omega: w.as_f64(),
                    value: v.as_f64(),
                });
            }
            if *v < T::zero() {
                *v = T::zero();
            }
        }
        Ok(Self { omega, j, tail })
    }

    /// Table of J ≡ 0 on the given grid.
    pub fn zeros(omega: Vec<T>) -> Result<Self, TableError> {
        let j = vec![T::zero(); omega.len()];
        Self::new(omega, j, LowFrequencyTail::Cubic)
    }

    pub fn omega(&self) -> &[T] {
        &self.omega
    }

    pub fn values(&self) -> &[T] {
        &self.j
    }

    pub fn tail(&self) -> LowFrequencyTail {
        self.tail
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn omega_min(&self) -> T {
        self.omega[0]
    }

    pub fn omega_max(&self) -> T {
        self.omega[self.omega.len() - 1]
    }

    /// Value of J(ω_min) used to scale the cubic tail, or zero when there is no tail.
    pub fn tail_amplitude(&self) -> T {
        match self.tail {
            LowFrequencyTail::Cubic => self.j[0],
            LowFrequencyTail::Zero => T::zero(),
        }
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment<T>> + '_ {
        self.omega
            .windows(2)
            .zip(self.j.windows(2))
            .map(|(w, j)| Segment {
                lo: w[0],
                hi: w[1],
                j_lo: j[0],
                j_hi: j[1],
            })
    }

    /// Interpolated J(ω).
    pub fn value(&self, omega: T) -> T {
        let lo = self.omega_min();
        if !(omega >= T::zero()) || omega > self.omega_max() {
            return T::zero();
        }
        if omega < lo {
            let r = omega / lo;
            return self.tail_amplitude() * r * r * r;
        }
        let idx = self.omega.partition_point(|w| *w <= omega);
        if idx >= self.omega.len() {
            return self.j[self.j.len() - 1];
        }
        let (w0, w1) = (self.omega[idx - 1], self.omega[idx]);
        let (j0, j1) = (self.j[idx - 1], self.j[idx]);
        j0 + (j1 - j0) * (omega - w0) / (w1 - w0)
    }

    /// ∫ J dω over the full support, exact for the interpolant.
    pub fn total_weight(&self) -> T {
        let half = T::lit(0.5);
        let tail = self.tail_amplitude() * self.omega_min() * T::lit(0.25);
        self.segments()
            .fold(tail, |acc, s| acc + half * (s.j_lo + s.j_hi) * s.width())
    }

    /// ∫ J(ω)/(ω − x) dω, exact for the interpolant.
    ///
    /// For x outside (0, ω_max) the integrand is regular. For x strictly inside
    /// (ω_min, ω_max) the result is the principal value; the logarithmic terms
    /// that diverge at a node shared by two segments cancel in pairs and are
    /// dropped. Returns `None` for x in (0, ω_min] with a nonzero tail or x = ω_max.
    pub fn cauchy_integral(&self, x: T) -> Option<T> {
        let amp = self.tail_amplitude();
        let m = self.omega_min();
        if amp != T::zero() && x > T::zero() && x <= m {
            return None;
        }
        if x == self.omega_max() {
            return None;
        }
        let mut acc = amp * cubic_cauchy_scaled(m, x);
        for s in self.segments() {
            let h = s.width();
            let slope = s.slope();
            if x < s.lo || x > s.hi {
                let d = s.lo - x;
                let r = h / d;
                acc += s.j_lo * r.ln_1p() + slope * d * r_minus_ln1p(r);
            } else {
                let c = s.j_lo + slope * (x - s.lo);
                let mut logs = T::zero();
                if s.hi > x {
                    logs += (s.hi - x).ln();
                }
                if x > s.lo {
                    logs -= (x - s.lo).ln();
                }
                acc += slope * h + c * logs;
            }
        }
        Some(acc)
    }

    /// ∫ J(ω)/(ω − x)² dω for x ≤ 0 (x < 0 when the tail is cubic).
    pub fn cauchy_derivative(&self, x: T) -> Option<T> {
        if x > T::zero() {
            return None;
        }
        let m = self.omega_min();
        let mut acc = self.tail_amplitude() * cubic_cauchy_derivative_scaled(m, x);
        for s in self.segments() {
            let h = s.width();
            let d = s.lo - x;
            let r = h / d;
            acc += s.j_lo * h / (d * (s.hi - x)) + s.slope() * ln1p_minus_ratio(r);
        }
        Some(acc)
    }

    /// True when the grid spacing inside [ω_c − 5γ, ω_c + 5γ] (clipped to the
    /// table) never exceeds γ/20.
    pub fn satisfies_refinement(&self, omega_c: T, gamma: T) -> bool {
        if gamma <= T::zero() {
            return true;
        }
        let lo = omega_c - T::lit(5.0) * gamma;
        let hi = omega_c + T::lit(5.0) * gamma;
        let max_step = gamma / T::lit(20.0) * T::lit(1.000_001);
        self.omega
            .windows(2)
            .filter(|w| w[1] > lo && w[0] < hi)
            .all(|w| w[1] - w[0] <= max_step)
    }

    /// CSV with header `omega_ev,j_ev`, 12 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TableError> {
        let mut wtr = csv::Writer::from_writer(out);
        let err = |e: csv::Error| TableError::Csv(e.to_string());
        wtr.write_record(["omega_ev", "j_ev"]).map_err(err)?;
        for (w, j) in self.omega.iter().zip(&self.j) {
            wtr.write_record([fmt_sig(w.as_f64()), fmt_sig(j.as_f64())])
                .map_err(err)?;
        }
        wtr.flush().map_err(|e| TableError::Csv(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R, tail: LowFrequencyTail) -> Result<Self, TableError> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr
            .headers()
            .map_err(|e| TableError::Csv(e.to_string()))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["omega_ev", "j_ev"] {
            return Err(TableError::Csv(format!("unexpected header {headers:?}")));
        }
        let mut omega = Vec::new();
        let mut j = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| TableError::Csv(e.to_string()))?;
            let parse = |i: usize| -> Result<T, TableError> {
                let v: f64 = rec
                    .get(i)
                    .ok_or_else(|| TableError::Csv("short row".into()))?
                    .trim()
                    .parse()
                    .map_err(|e: std::num::ParseFloatError| TableError::Csv(e.to_string()))?;
                Ok(T::lit(v))
            };
            omega.push(parse(0)?);
            j.push(parse(1)?);
        }
        Self::new(omega, j, tail)
    }
}

/// r − ln(1 + r), accurate for small r.
fn r_minus_ln1p<T: Real>(r: T) -> T {
    if r.abs() < T::lit(0.05) {
        // Σ_{k≥2} (−1)^k r^k / k
        let mut term = r * r;
        let mut acc = T::zero();
        for k in 2..24 {
            let v = term / T::from_count(k);
            acc += if k % 2 == 0 { v } else { -v };
            term *= r;
        }
        acc
    } else {
        r - r.ln_1p()
    }
}

/// ln(1 + r) − r/(1 + r), accurate for small r.
fn ln1p_minus_ratio<T: Real>(r: T) -> T {
    if r.abs() < T::lit(0.05) {
        // Σ_{k≥2} (−1)^k (k − 1)/k · r^k
        let mut term = r * r;
        let mut acc = T::zero();
        for k in 2..24 {
            let v = term * T::from_count(k - 1) / T::from_count(k);
            acc += if k % 2 == 0 { v } else { -v };
            term *= r;
        }
        acc
    } else {
        r.ln_1p() - r / (T::one() + r)
    }
}

/// ∫₀^m (ω/m)³/(ω − x) dω for x ∉ (0, m].
fn cubic_cauchy_scaled<T: Real>(m: T, x: T) -> T {
    if x == T::zero() {
        return T::one() / T::lit(3.0);
    }
    let m3 = m * m * m;
    if x.abs() > T::lit(2.0) * m {
        // −Σ_k m^{k+4} / ((k+4) x^{k+1}), divided by m³
        let u = m / x;
        let mut term = u; // (m/x)^{k+1}
        let mut acc = T::zero();
        for k in 0..64 {
            acc += term / T::from_count(k + 4);
            term *= u;
        }
        return -acc;
    }
    let lg = ((m - x) / x).abs().ln();
    (m3 / T::lit(3.0) + x * m * m / T::lit(2.0) + x * x * m + x * x * x * lg) / m3
}

/// ∫₀^m (ω/m)³/(ω − x)² dω for x ≤ 0 or x > m.
fn cubic_cauchy_derivative_scaled<T: Real>(m: T, x: T) -> T {
    let m3 = m * m * m;
    if x.abs() > T::lit(2.0) * m {
        // Σ_k (k+1) m^{k+4} / ((k+4) x^{k+2}), divided by m³
        let u = m / x;
        let mut term = u * u; // (m/x)^{k+2}
        let mut acc = T::zero();
        for k in 0..64 {
            acc += term * T::from_count(k + 1) / T::from_count(k + 4);
            term *= u;
        }
        return acc / m;
    }
    if x == T::zero() {
        return T::lit(0.5) / m;
    }
    let lg = ((m - x) / x).abs().ln();
    (m * m / T::lit(2.0) + T::lit(2.0) * x * m + T::lit(3.0) * x * x * lg
        - x * x
        - x * x * x / (m - x))
        / m3
}

/// Formats with 12 significant digits in scientific notation.
pub fn fmt_sig(x: f64) -> String {
    format!("{x:.11e}")
}
