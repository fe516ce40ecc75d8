//! Formfactor catalog and the half-line transform
//! `I(alpha) = int_0^inf f(x) exp(-i alpha x) dx`.
//!
//! The step profile is a low-pass cutoff: `f(x) = 1` on `[0, A]`. Written as a
//! Heaviside function of `|p| - A` it would be the complement, whose transform
//! diverges; the closed form `i (exp(-i alpha A) - 1) / alpha` only holds for the
//! cutoff used here.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::quadrature::{self, QuadratureError, QuadratureSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormfactorError {
    #[error("invalid formfactor parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Formfactor {
    /// `f(x) = 1` for `0 <= x <= cutoff`, zero beyond.
    StepCutoff { cutoff: f64 },
    /// `f(x) = exp(-x^2 / width)`.
    Gaussian { width: f64 },
    /// `f(x) = exp(-1 / ((x - lo)(hi - x)))` on `(lo, hi)`, zero elsewhere.
    /// Unnormalized.
    CompactBump { lo: f64, hi: f64 },
}

impl Formfactor {
    pub fn step(cutoff: f64) -> Result<Self, FormfactorError> {
        if !(cutoff > 0.0 && cutoff.is_finite()) {
            return Err(FormfactorError::InvalidParameter(format!(
                "cutoff must be positive, got {cutoff}"
            )));
        }
        Ok(Self::StepCutoff { cutoff })
    }

    pub fn gaussian(width: f64) -> Result<Self, FormfactorError> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(FormfactorError::InvalidParameter(format!(
                "width must be positive, got {width}"
            )));
        }
        Ok(Self::Gaussian { width })
    }

    pub fn bump(lo: f64, hi: f64) -> Result<Self, FormfactorError> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(FormfactorError::InvalidParameter(format!(
                "bump support must satisfy 0 < a < b, got [{lo}, {hi}]"
            )));
        }
        Ok(Self::CompactBump { lo, hi })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::StepCutoff { .. } => "step",
            Self::Gaussian { .. } => "gaussian",
            Self::CompactBump { .. } => "bump",
        }
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        match *self {
            Self::StepCutoff { cutoff } => {
                if (0.0..=cutoff).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Gaussian { width } => (-x * x / width).exp(),
            Self::CompactBump { lo, hi } => {
                if x > lo && x < hi {
                    (-1.0 / ((x - lo) * (hi - x))).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Interval carrying the formfactor's mass. Unbounded profiles are cut
    /// where `f` falls below `truncation_epsilon`.
    pub fn integration_interval(&self, truncation_epsilon: f64) -> (f64, f64) {
        match *self {
            Self::StepCutoff { cutoff } => (0.0, cutoff),
            Self::Gaussian { width } => (0.0, (width * (1.0 / truncation_epsilon).ln()).sqrt()),
            Self::CompactBump { lo, hi } => (lo, hi),
        }
    }

    /// `int_0^inf f(x) dx`, which bounds `|I(alpha)|` for every `alpha`.
    pub fn total_mass(&self) -> f64 {
        match *self {
            Self::StepCutoff { cutoff } => cutoff,
            Self::Gaussian { width } => 0.5 * (PI * width).sqrt(),
            Self::CompactBump { lo, hi } => {
                let spec = QuadratureSpec::default();
                quadrature::integrate_real(|x| self.evaluate(x), lo, hi, (hi - lo) / 8.0, &spec)
                    .map(|(v, _)| v)
                    .unwrap_or(f64::NAN)
            }
        }
    }

    /// Upper bound on `int_0^inf x f(x) dx`.
    pub(crate) fn first_moment_bound(&self) -> f64 {
        match *self {
            Self::StepCutoff { cutoff } => 0.5 * cutoff * cutoff,
            Self::Gaussian { width } => 0.5 * width,
            // The bump never exceeds exp(-4 / (b - a)^2) <= 1.
            Self::CompactBump { lo, hi } => 0.5 * (hi * hi - lo * lo),
        }
    }
}

impl fmt::Display for Formfactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::StepCutoff { cutoff } => write!(f, "step(A={cutoff})"),
            Self::Gaussian { width } => write!(f, "gaussian(A={width})"),
            Self::CompactBump { lo, hi } => write!(f, "bump({lo}, {hi})"),
        }
    }
}

/// Evaluate `f(x)`. Intended for `x >= 0`; negative arguments follow the
/// defining expression of each kind.
pub fn evaluate_formfactor(f: &Formfactor, x: f64) -> f64 {
    f.evaluate(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformMethod {
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformValue {
    pub value: Complex64,
    pub est_error: f64,
    pub method: TransformMethod,
}

// Below this |alpha * A| the closed form switches to its Taylor series.
const STEP_SERIES_THRESHOLD: f64 = 1e-6;

/// Closed-form transform where one is registered (step cutoff only).
pub fn transform_closed_form(f: &Formfactor, alpha: f64) -> Option<TransformValue> {
    match *f {
        Formfactor::StepCutoff { cutoff } => {
            let z = alpha * cutoff;
            let value = if z.abs() < STEP_SERIES_THRESHOLD {
                // A (1 - i z / 2 - z^2 / 6)
                Complex64::new(1.0 - z * z / 6.0, -0.5 * z) * cutoff
            } else {
                // cos z - 1 = -2 sin^2(z / 2) avoids cancellation for small z.
                let half = (0.5 * z).sin();
                let phase = Complex64::new(-2.0 * half * half, -z.sin());
                Complex64::new(0.0, 1.0) * phase / alpha
            };
            Some(TransformValue {
                value,
                est_error: 0.0,
                method: TransformMethod::ClosedForm,
            })
        }
        Formfactor::Gaussian { .. } | Formfactor::CompactBump { .. } => None,
    }
}

/// Transform by panel quadrature over the formfactor's integration interval.
/// Panels are at most a quarter of the half-period `pi / |alpha|`.
pub fn transform_quadrature(
    f: &Formfactor,
    alpha: f64,
    spec: &QuadratureSpec,
) -> Result<TransformValue, FormfactorError> {
    spec.validate()?;
    let (lo, hi) = f.integration_interval(spec.truncation_epsilon);
    let mut panel = (hi - lo) / 8.0;
    if alpha != 0.0 {
        panel = panel.min(PI / (4.0 * alpha.abs()));
    }
    let est = quadrature::integrate(
        |x| Complex64::new(0.0, -alpha * x).exp() * f.evaluate(x),
        lo,
        hi,
        panel,
        spec,
    )?;
    Ok(TransformValue {
        value: est.value,
        est_error: est.error,
        method: TransformMethod::Quadrature,
    })
}

/// Best available transform: closed form when registered, quadrature otherwise.
pub fn transform(
    f: &Formfactor,
    alpha: f64,
    spec: &QuadratureSpec,
) -> Result<TransformValue, FormfactorError> {
    match transform_closed_form(f, alpha) {
        Some(v) => Ok(v),
        None => transform_quadrature(f, alpha, spec),
    }
}
