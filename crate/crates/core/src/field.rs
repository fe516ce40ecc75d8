//! One-point field amplitude `phi(r, t)` of the driven massless field and the
//! mirror-free coincidence rate `R0 = |phi(r1, t)|^2 |phi(r2, t)|^2`.
//!
//! Natural units: hbar = c = 1, so `r` and `t` share one unit (inverse momentum).

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::formfactor::{self, Formfactor, FormfactorError};
use crate::quadrature::{self, QuadratureError, QuadratureSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("radial distance must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("time must be finite, got {0}")]
    InvalidTime(f64),
    #[error(transparent)]
    Formfactor(#[from] FormfactorError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

impl FieldError {
    /// True when the failure is numerical (tolerance not reached) rather than a
    /// domain violation.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Self::Quadrature(QuadratureError::ToleranceNotMet { .. })
                | Self::Formfactor(FormfactorError::Quadrature(
                    QuadratureError::ToleranceNotMet { .. }
                ))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DispersionLaw {
    /// `omega(p) = |p|`.
    #[default]
    Massless,
}

impl DispersionLaw {
    pub fn omega(&self, p: f64) -> f64 {
        match self {
            Self::Massless => p.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmplitudeMethod {
    RadialReduction,
    Direct3D,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldAmplitude {
    pub value: Complex64,
    pub r: f64,
    pub t: f64,
    pub est_error: f64,
    pub method: AmplitudeMethod,
}

impl FieldAmplitude {
    pub fn norm_sqr(&self) -> f64 {
        self.value.norm_sqr()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceBase {
    pub r1: f64,
    pub r2: f64,
    pub t: f64,
    pub r0: f64,
}

fn check_domain(r: f64, t: f64) -> Result<(), FieldError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(FieldError::InvalidRadius(r));
    }
    if !t.is_finite() {
        return Err(FieldError::InvalidTime(t));
    }
    Ok(())
}

/// `phi(r, t) = (2 pi / (i r)) (I(t - r) - I(t + r) + I(r) - I(-r))`, valid for
/// any formfactor depending on `|p|` only.
pub fn phi_radial(
    f: &Formfactor,
    r: f64,
    t: f64,
    spec: &QuadratureSpec,
) -> Result<FieldAmplitude, FieldError> {
    check_domain(r, t)?;
    let i_tm = formfactor::transform(f, t - r, spec)?;
    let i_tp = formfactor::transform(f, t + r, spec)?;
    let i_p = formfactor::transform(f, r, spec)?;
    let i_m = formfactor::transform(f, -r, spec)?;

    // Grouped so that t = 0 cancels exactly.
    let bracket = (i_tm.value - i_m.value) + (i_p.value - i_tp.value);
    let prefactor = 2.0 * PI / r;
    let value = Complex64::new(0.0, -prefactor) * bracket;
    let est_error = prefactor * (i_tm.est_error + i_tp.est_error + i_p.est_error + i_m.est_error);

    Ok(FieldAmplitude {
        value,
        r,
        t,
        est_error,
        method: AmplitudeMethod::RadialReduction,
    })
}

/// Direct quadrature of `int d^3p exp(i p.r) f(|p|)/omega(p) (exp(-i omega t) - 1)`
/// in spherical coordinates. The azimuth contributes `2 pi`; the radial and
/// polar integrals are both done numerically. Independent of [`phi_radial`].
pub fn phi_direct3d(
    f: &Formfactor,
    r: f64,
    t: f64,
    spec: &QuadratureSpec,
) -> Result<FieldAmplitude, FieldError> {
    check_domain(r, t)?;
    spec.validate()?;
    let law = DispersionLaw::Massless;
    let (p_lo, p_hi) = f.integration_interval(spec.truncation_epsilon);

    let inner_error = std::cell::Cell::new(0.0f64);
    let inner_failure = std::cell::RefCell::new(None);

    // Polar integral over mu = cos(theta) in [-1, 1].
    let polar = |p: f64| -> Complex64 {
        let k = p * r;
        let panel = if k > 0.0 {
            (PI / (4.0 * k)).min(0.5)
        } else {
            2.0
        };
        match quadrature::integrate(
            |mu| Complex64::new(0.0, k * mu).exp(),
            -1.0,
            1.0,
            panel,
            spec,
        ) {
            Ok(est) => {
                inner_error.set(inner_error.get().max(est.error));
                est.value
            }
            Err(e) => {
                inner_failure.borrow_mut().get_or_insert(e);
                Complex64::new(0.0, 0.0)
            }
        }
    };

    let integrand = |p: f64| -> Complex64 {
        let omega = law.omega(p);
        if omega == 0.0 {
            // p^2 / omega(p) -> 0 for the massless law.
            return Complex64::new(0.0, 0.0);
        }
        let time_factor = Complex64::new(0.0, -omega * t).exp() - 1.0;
        polar(p) * time_factor * (p * p * f.evaluate(p) / omega)
    };

    let max_freq = r + t.abs();
    let mut panel = (p_hi - p_lo) / 8.0;
    if max_freq > 0.0 {
        panel = panel.min(PI / (4.0 * max_freq));
    }
    let outer = quadrature::integrate(integrand, p_lo, p_hi, panel, spec)?;
    if let Some(e) = inner_failure.into_inner() {
        return Err(e.into());
    }

    let value = outer.value * (2.0 * PI);
    // |exp(-i w t) - 1| <= 2 and the polar error is uniform in p.
    let est_error = 2.0 * PI * (outer.error + 2.0 * inner_error.get() * f.first_moment_bound());

    Ok(FieldAmplitude {
        value,
        r,
        t,
        est_error,
        method: AmplitudeMethod::Direct3D,
    })
}

/// Mirror-free coincidence rate from two radial amplitudes.
pub fn r0(
    f: &Formfactor,
    r1: f64,
    r2: f64,
    t: f64,
    spec: &QuadratureSpec,
) -> Result<CoincidenceBase, FieldError> {
    let phi1 = phi_radial(f, r1, t, spec)?;
    let phi2 = phi_radial(f, r2, t, spec)?;
    Ok(CoincidenceBase {
        r1,
        r2,
        t,
        r0: phi1.norm_sqr() * phi2.norm_sqr(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn zero_time_vanishes() {
        for f in [
            Formfactor::step(1.0).unwrap(),
            Formfactor::gaussian(1.0).unwrap(),
            Formfactor::bump(0.5, 2.0).unwrap(),
        ] {
            let radial = phi_radial(&f, 1.0, 0.0, &spec()).unwrap();
            assert!(radial.value.norm() < 1e-12);
            let direct = phi_direct3d(&f, 1.0, 0.0, &spec()).unwrap();
            assert!(direct.value.norm() < 1e-12);
        }
    }

    #[test]
    fn radial_matches_direct_step() {
        let f = Formfactor::step(1.0).unwrap();
        let a = phi_radial(&f, 2.0, 1.0, &spec()).unwrap();
        let b = phi_direct3d(&f, 2.0, 1.0, &spec()).unwrap();
        assert!(rel(a.value, b.value) < 1e-6, "{a:?} vs {b:?}");
        assert_eq!(a.method, AmplitudeMethod::RadialReduction);
        assert_eq!(b.method, AmplitudeMethod::Direct3D);
    }

    #[test]
    fn radial_matches_direct_gaussian() {
        let f = Formfactor::gaussian(1.0).unwrap();
        let a = phi_radial(&f, 0.5, 5.0, &spec()).unwrap();
        let b = phi_direct3d(&f, 0.5, 5.0, &spec()).unwrap();
        assert!(rel(a.value, b.value) < 1e-6, "{a:?} vs {b:?}");
    }

    #[test]
    fn time_conjugation() {
        let f = Formfactor::gaussian(1.0).unwrap();
        for (r, t) in [(0.5, 1.0), (3.0, 2.5), (10.0, 0.5)] {
            let fwd = phi_radial(&f, r, t, &spec()).unwrap();
            let bwd = phi_radial(&f, r, -t, &spec()).unwrap();
            assert!((bwd.value - fwd.value.conj()).norm() < 1e-10);
        }
    }

    #[test]
    fn r0_symmetry_and_zero_time() {
        let f = Formfactor::step(1.0).unwrap();
        let a = r0(&f, 2.0, 3.0, 1.0, &spec()).unwrap();
        let b = r0(&f, 3.0, 2.0, 1.0, &spec()).unwrap();
        assert_eq!(a.r0, b.r0);
        assert!(a.r0 > 0.0);
        assert_eq!(r0(&f, 1.0, 1.0, 0.0, &spec()).unwrap().r0, 0.0);
    }

    #[test]
    fn r0_matches_direct_composition() {
        let f = Formfactor::step(1.0).unwrap();
        let base = r0(&f, 2.0, 3.0, 1.0, &spec()).unwrap();
        let d2 = phi_direct3d(&f, 2.0, 1.0, &spec()).unwrap().norm_sqr();
        let d3 = phi_direct3d(&f, 3.0, 1.0, &spec()).unwrap().norm_sqr();
        assert!((base.r0 - d2 * d3).abs() / (d2 * d3) < 1e-5);
    }

    #[test]
    fn domain_guard() {
        let f = Formfactor::step(1.0).unwrap();
        assert!(matches!(
            phi_radial(&f, 0.0, 1.0, &spec()),
            Err(FieldError::InvalidRadius(_))
        ));
        assert!(matches!(
            phi_direct3d(&f, -1.0, 1.0, &spec()),
            Err(FieldError::InvalidRadius(_))
        ));
        assert!(matches!(
            r0(&f, 1.0, f64::NAN, 1.0, &spec()),
            Err(FieldError::InvalidRadius(_))
        ));
    }

    #[test]
    fn tolerance_failure_is_numerical() {
        let tight = QuadratureSpec {
            max_panels: 1,
            ..spec()
        };
        let err = phi_radial(&Formfactor::gaussian(1.0).unwrap(), 50.0, 1.0, &tight).unwrap_err();
        assert!(err.is_numerical(), "{err:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn conjugation_in_time(r in 0.05f64..200.0, t in -20.0f64..20.0, kind in 0usize..2) {
            let f = [Formfactor::step(1.3).unwrap(), Formfactor::gaussian(0.7).unwrap()][kind];
            let fwd = phi_radial(&f, r, t, &spec()).unwrap().value;
            let bwd = phi_radial(&f, r, -t, &spec()).unwrap().value;
            prop_assert!((bwd - fwd.conj()).norm() < 1e-10);
        }

        #[test]
        fn r0_exchange_and_sign(r1 in 0.05f64..500.0, r2 in 0.05f64..500.0, t in -10.0f64..10.0) {
            let f = Formfactor::step(1.0).unwrap();
            let a = r0(&f, r1, r2, t, &spec()).unwrap().r0;
            let b = r0(&f, r2, r1, t, &spec()).unwrap().r0;
            prop_assert_eq!(a, b);
            prop_assert!(a >= 0.0);
        }
    }
}
