//! Two unbalanced interferometers driven by a photon pair.
//!
//! Each detector sees `psi(r, t) = psi0(r, t) / 2 + exp(i phase) psi0(r, t - dT) / 2`.
//! The mirrors-in coincidence rate is `R_c = eta1 eta2 R0 cos^2(phi1' - phi2') / 4`.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use thiserror::Error;

use crate::field::{self, CoincidenceBase, FieldError};
use crate::formfactor::Formfactor;
use crate::quadrature::QuadratureSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FransonError {
    #[error("visibility needs at least 2 samples, got {0}")]
    EmptyInput(usize),
    #[error("rates must be finite and nonnegative, got {0}")]
    NegativeRate(f64),
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FransonSettings {
    /// Effective phase of the first interferometer (radians).
    pub phi1: f64,
    /// Effective phase of the second interferometer (radians).
    pub phi2: f64,
    /// Transit-time difference between long and short arms.
    pub delta_t: f64,
    pub eta1: f64,
    pub eta2: f64,
}

impl Default for FransonSettings {
    fn default() -> Self {
        Self {
            phi1: 0.0,
            phi2: 0.0,
            delta_t: 0.0,
            eta1: 1.0,
            eta2: 1.0,
        }
    }
}

impl FransonSettings {
    pub fn validate(&self) -> Result<(), FransonError> {
        for (name, eta) in [("eta1", self.eta1), ("eta2", self.eta2)] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(FransonError::InvalidSettings(format!(
                    "{name} must lie in (0, 1], got {eta}"
                )));
            }
        }
        if !(self.delta_t >= 0.0 && self.delta_t.is_finite()) {
            return Err(FransonError::InvalidSettings(format!(
                "delta_t must be nonnegative, got {}",
                self.delta_t
            )));
        }
        if !(self.phi1.is_finite() && self.phi2.is_finite()) {
            return Err(FransonError::InvalidSettings(
                "phases must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn efficiency(&self) -> f64 {
        self.eta1 * self.eta2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceResult {
    pub rc: f64,
    pub base: CoincidenceBase,
    pub fringe_phase: f64,
}

pub fn coincidence_rate(base: &CoincidenceBase, s: &FransonSettings) -> CoincidenceResult {
    let fringe_phase = s.phi1 - s.phi2;
    let c = fringe_phase.cos();
    CoincidenceResult {
        rc: s.efficiency() * 0.25 * base.r0 * c * c,
        base: *base,
        fringe_phase,
    }
}

/// `phi(r, t) / 2 + exp(i phase) phi(r, t - delta_t) / 2`, the vacuum-level
/// amplitude at a detector behind one interferometer.
pub fn superposed_amplitude(
    f: &Formfactor,
    r: f64,
    t: f64,
    delta_t: f64,
    phase: f64,
    spec: &QuadratureSpec,
) -> Result<Complex64, FransonError> {
    let short = field::phi_radial(f, r, t, spec)?;
    let long = field::phi_radial(f, r, t - delta_t, spec)?;
    Ok(0.5 * short.value + 0.5 * Complex64::from_polar(1.0, phase) * long.value)
}

/// `eta1 eta2 |A(r1, phi1)|^2 |A(r2, phi2)|^2` with `A` the superposed
/// amplitude. The model's vacuum expectation factorizes per detector, so this
/// is a probe of the interferometer formula, not a rederivation of it.
pub fn model_coincidence(
    f: &Formfactor,
    r1: f64,
    r2: f64,
    t: f64,
    s: &FransonSettings,
    spec: &QuadratureSpec,
) -> Result<f64, FransonError> {
    s.validate()?;
    let a1 = superposed_amplitude(f, r1, t, s.delta_t, s.phi1, spec)?;
    let a2 = superposed_amplitude(f, r2, t, s.delta_t, s.phi2, spec)?;
    Ok(s.efficiency() * a1.norm_sqr() * a2.norm_sqr())
}

/// Fringe contrast `(max - min) / (max + min)`; zero when every rate is zero.
pub fn visibility(rates: &[(f64, f64)]) -> Result<f64, FransonError> {
    if rates.len() < 2 {
        return Err(FransonError::EmptyInput(rates.len()));
    }
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for &(_, rate) in rates {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(FransonError::NegativeRate(rate));
        }
        max = max.max(rate);
        min = min.min(rate);
    }
    if max == 0.0 {
        return Ok(0.0);
    }
    Ok((max - min) / (max + min))
}

/// Whether a fringe visibility is high enough to admit a Bell violation
/// (strictly above `1/sqrt(2)`).
pub fn visibility_admits_violation(v: f64) -> bool {
    v > FRAC_1_SQRT_2
}
