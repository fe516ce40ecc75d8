//! Large-distance behavior of `|phi(r, t)|^2` and `R0`: envelope extraction
//! for oscillatory decay, log-log power-law fits and a super-polynomial decay
//! certificate for compactly supported formfactors.

use rayon::prelude::*;
use thiserror::Error;

use crate::field::{self, FieldError};
use crate::formfactor::Formfactor;
use crate::quadrature::QuadratureSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AsymptoticsError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("samples must be strictly increasing in r")]
    Unsorted,
    #[error("no interior peaks found")]
    NoPeaksFound,
    #[error("r-values span {decades:.3} decades; at least one is required")]
    DegenerateFit { decades: f64 },
    #[error("non-positive sample y = {y} at r = {r}")]
    NonPositive { r: f64, y: f64 },
    #[error("super-polynomial certificate requires a compactly supported bump formfactor")]
    NotCompactSupport,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Least-squares power law `y = exp(intercept) * r^slope`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_window: (f64, f64),
    pub n_points: usize,
    /// RMS residual in natural-log units.
    pub residual_rms: f64,
    pub used_envelope: bool,
}

fn check_sorted(samples: &[(f64, f64)]) -> Result<(), AsymptoticsError> {
    if samples.windows(2).all(|w| w[1].0 > w[0].0) {
        Ok(())
    } else {
        Err(AsymptoticsError::Unsorted)
    }
}

/// Strict interior local maxima of `y`, in order.
pub fn envelope(samples: &[(f64, f64)]) -> Result<Vec<(f64, f64)>, AsymptoticsError> {
    if samples.len() < 3 {
        return Err(AsymptoticsError::TooFewPoints {
            needed: 3,
            got: samples.len(),
        });
    }
    check_sorted(samples)?;
    let peaks: Vec<(f64, f64)> = samples
        .windows(3)
        .filter(|w| w[1].1 > w[0].1 && w[1].1 > w[2].1)
        .map(|w| w[1])
        .collect();
    if peaks.is_empty() {
        return Err(AsymptoticsError::NoPeaksFound);
    }
    Ok(peaks)
}

fn log_log_regression(points: &[(f64, f64)]) -> Result<(f64, f64, f64), AsymptoticsError> {
    if let Some(&(r, y)) = points.iter().find(|(r, y)| !(*y > 0.0 && *r > 0.0)) {
        return Err(AsymptoticsError::NonPositive { r, y });
    }
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), (r, y)| (sx + r.ln(), sy + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (sxx, sxy) = points.iter().fold((0.0, 0.0), |(sxx, sxy), (r, y)| {
        let dx = r.ln() - mx;
        (sxx + dx * dx, sxy + dx * (y.ln() - my))
    });
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = points
        .iter()
        .map(|(r, y)| {
            let res = y.ln() - (intercept + slope * r.ln());
            res * res
        })
        .sum();
    Ok((slope, intercept, (ss / n).sqrt()))
}

/// Fit `log y` against `log r`. With `use_envelope`, the fit runs through the
/// local maxima and falls back to the raw samples when fewer than four peaks
/// exist.
pub fn fit_decay(samples: &[(f64, f64)], use_envelope: bool) -> Result<DecayFit, AsymptoticsError> {
    if samples.len() < 4 {
        return Err(AsymptoticsError::TooFewPoints {
            needed: 4,
            got: samples.len(),
        });
    }
    check_sorted(samples)?;
    let r_window = (samples[0].0, samples[samples.len() - 1].0);
    if !(r_window.0 > 0.0) {
        return Err(AsymptoticsError::NonPositive {
            r: r_window.0,
            y: samples[0].1,
        });
    }
    let decades = (r_window.1 / r_window.0).log10();
    if decades < 1.0 - 1e-9 {
        return Err(AsymptoticsError::DegenerateFit { decades });
    }

    let peaks = if use_envelope {
        match envelope(samples) {
            Ok(p) if p.len() >= 4 => Some(p),
            Ok(_) | Err(AsymptoticsError::NoPeaksFound) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let used_envelope = peaks.is_some();
    let points = peaks.as_deref().unwrap_or(samples);
    let (slope, intercept, residual_rms) = log_log_regression(points)?;

    Ok(DecayFit {
        slope,
        intercept,
        r_window,
        n_points: points.len(),
        residual_rms,
        used_envelope,
    })
}

/// Samples with `r >= r_max / 10`.
pub fn top_decade(samples: &[(f64, f64)]) -> &[(f64, f64)] {
    let Some(&(r_max, _)) = samples.last() else {
        return samples;
    };
    let cut = r_max / 10.0 * (1.0 - 1e-12);
    let start = samples.partition_point(|(r, _)| *r < cut);
    &samples[start..]
}

/// Oscillatory profiles (sharp cutoff) need the envelope; smooth ones do not.
pub fn default_uses_envelope(f: &Formfactor) -> bool {
    matches!(f, Formfactor::StepCutoff { .. })
}

/// `|phi(r, t)|^2` at every grid point, in grid order.
pub fn sample_abs_phi_sq(
    f: &Formfactor,
    t: f64,
    r_grid: &[f64],
    spec: &QuadratureSpec,
) -> Result<Vec<(f64, f64)>, AsymptoticsError> {
    r_grid
        .par_iter()
        .map(|&r| Ok((r, field::phi_radial(f, r, t, spec)?.norm_sqr())))
        .collect()
}

/// `R0(r, r, t)` at every grid point, in grid order.
pub fn sample_r0_symmetric(
    f: &Formfactor,
    t: f64,
    r_grid: &[f64],
    spec: &QuadratureSpec,
) -> Result<Vec<(f64, f64)>, AsymptoticsError> {
    r_grid
        .par_iter()
        .map(|&r| Ok((r, field::r0(f, r, r, t, spec)?.r0)))
        .collect()
}

/// For each power `k`, whether `r^k |phi(r, t)|^2` trends downward over the top
/// decade of `r_grid` (negative log-log slope through its envelope, or through
/// the raw samples when the envelope is too sparse).
pub fn superpoly_certificate(
    f: &Formfactor,
    t: f64,
    powers: &[u32],
    r_grid: &[f64],
    spec: &QuadratureSpec,
) -> Result<Vec<(u32, bool)>, AsymptoticsError> {
    if !matches!(f, Formfactor::CompactBump { .. }) {
        return Err(AsymptoticsError::NotCompactSupport);
    }
    if r_grid.len() < 3 {
        return Err(AsymptoticsError::TooFewPoints {
            needed: 3,
            got: r_grid.len(),
        });
    }
    if !(r_grid[0] > 0.0) || !r_grid.windows(2).all(|w| w[1] > w[0]) {
        return Err(AsymptoticsError::InvalidGrid(
            "r_grid must be positive and strictly increasing".into(),
        ));
    }
    let decades = (r_grid[r_grid.len() - 1] / r_grid[0]).log10();
    if (r_grid.len() as f64) < 3.0 * decades.max(1.0) {
        return Err(AsymptoticsError::InvalidGrid(format!(
            "{} points over {decades:.2} decades; need at least 3 per decade",
            r_grid.len()
        )));
    }

    let keyed: Vec<(f64, f64)> = r_grid.iter().map(|&r| (r, 0.0)).collect();
    let window: Vec<f64> = top_decade(&keyed).iter().map(|(r, _)| *r).collect();
    let phi_sq = sample_abs_phi_sq(f, t, &window, spec)?;

    Ok(powers
        .iter()
        .map(|&k| {
            let scaled: Vec<(f64, f64)> = phi_sq
                .iter()
                .map(|&(r, y)| (r, r.powi(k as i32) * y))
                .filter(|(_, y)| *y > 0.0)
                .collect();
            let points = match envelope(&scaled) {
                Ok(p) if p.len() >= 4 => p,
                _ => scaled,
            };
            let decreasing = points.len() >= 2
                && log_log_regression(&points).is_ok_and(|(slope, _, _)| slope < 0.0);
            (k, decreasing)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{RadialGrid, Spacing};
    use proptest::prelude::*;

    fn power_law(c: f64, s: f64, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
        RadialGrid::new(lo, hi, n, Spacing::Log)
            .unwrap()
            .points()
            .into_iter()
            .map(|r| (r, c * r.powf(s)))
            .collect()
    }

    #[test]
    fn envelope_of_oscillating_power_law() {
        let samples: Vec<(f64, f64)> = (0..20_000)
            .map(|i| {
                let r = 10.0 + i as f64 * 0.001;
                (r, (5.0 * r).cos().powi(2) / r.powi(4))
            })
            .collect();
        let peaks = envelope(&samples).unwrap();
        assert!(peaks.len() > 20);
        for (r, y) in peaks {
            let target = 1.0 / r.powi(4);
            assert!((y - target).abs() / target < 0.02, "r={r}");
        }
    }

    #[test]
    fn envelope_rejects_monotone_and_flat() {
        let mono = power_law(1.0, -2.0, 1.0, 10.0, 20);
        assert_eq!(envelope(&mono), Err(AsymptoticsError::NoPeaksFound));
        let flat: Vec<(f64, f64)> = (1..20).map(|i| (i as f64, 3.0)).collect();
        assert_eq!(envelope(&flat), Err(AsymptoticsError::NoPeaksFound));
        assert!(matches!(
            envelope(&flat[..2]),
            Err(AsymptoticsError::TooFewPoints { .. })
        ));
        let unsorted = vec![(2.0, 1.0), (1.0, 2.0), (3.0, 1.0)];
        assert_eq!(envelope(&unsorted), Err(AsymptoticsError::Unsorted));
    }

    #[test]
    fn exact_power_laws_recovered() {
        for s in [-1.0, -2.0, -4.0, -8.0] {
            let fit = fit_decay(&power_law(3.0, s, 10.0, 1000.0, 32), false).unwrap();
            assert!((fit.slope - s).abs() < 1e-6, "s={s}: {fit:?}");
            assert!((fit.intercept - 3.0f64.ln()).abs() < 1e-6);
            assert!(fit.residual_rms < 1e-9);
            assert!(!fit.used_envelope);
            assert_eq!(fit.r_window, (10.0, 1000.0));
        }
    }

    #[test]
    fn scale_only_moves_intercept() {
        let base = power_law(1.0, -3.0, 5.0, 500.0, 40);
        let scaled: Vec<(f64, f64)> = base.iter().map(|(r, y)| (*r, 17.5 * y)).collect();
        let a = fit_decay(&base, false).unwrap();
        let b = fit_decay(&scaled, false).unwrap();
        assert!((a.slope - b.slope).abs() < 1e-9);
        assert!((b.intercept - a.intercept - 17.5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn monotone_data_falls_back_to_raw_fit() {
        let fit = fit_decay(&power_law(2.0, -4.0, 10.0, 1000.0, 20), true).unwrap();
        assert!(!fit.used_envelope);
        assert!((fit.slope + 4.0).abs() < 1e-6);
    }

    #[test]
    fn short_window_is_degenerate() {
        let samples = power_law(1.0, -2.0, 100.0, 900.0, 20);
        assert!(matches!(
            fit_decay(&samples, false),
            Err(AsymptoticsError::DegenerateFit { .. })
        ));
    }

    #[test]
    fn non_positive_values_rejected() {
        let mut samples = power_law(1.0, -2.0, 1.0, 100.0, 10);
        samples[3].1 = 0.0;
        assert!(matches!(
            fit_decay(&samples, false),
            Err(AsymptoticsError::NonPositive { .. })
        ));
    }

    #[test]
    fn top_decade_selection() {
        let samples = power_law(1.0, -1.0, 1.0, 1000.0, 31);
        let top = top_decade(&samples);
        assert!((top[0].0 - 100.0).abs() < 1e-9);
        assert_eq!(top.len(), 11);
    }

    #[test]
    fn r0_slope_is_twice_the_amplitude_slope() {
        let spec = QuadratureSpec::default();
        for (f, n, env) in [
            (Formfactor::step(1.0).unwrap(), 4001, true),
            (Formfactor::gaussian(1.0).unwrap(), 17, false),
        ] {
            let grid = RadialGrid::new(100.0, 1000.0, n, Spacing::Linear)
                .unwrap()
                .points();
            let phi = fit_decay(&sample_abs_phi_sq(&f, 1.0, &grid, &spec).unwrap(), env).unwrap();
            let r0 = fit_decay(&sample_r0_symmetric(&f, 1.0, &grid, &spec).unwrap(), env).unwrap();
            assert!(
                (r0.slope - 2.0 * phi.slope).abs() < 0.05,
                "{f}: {r0:?} vs {phi:?}"
            );
            assert!(phi.slope <= -1.9);
        }
    }

    proptest! {
        #[test]
        fn synthetic_power_laws_recovered(s in -10.0f64..-0.5, c in 1e-6f64..1e6, lo in 0.5f64..50.0) {
            let fit = fit_decay(&power_law(c, s, lo, 20.0 * lo, 24), false).unwrap();
            prop_assert!((fit.slope - s).abs() < 1e-6);
        }

        #[test]
        fn scaling_leaves_slope(k in 1e-8f64..1e8) {
            let base = power_law(1.0, -2.5, 3.0, 300.0, 30);
            let scaled: Vec<(f64, f64)> = base.iter().map(|(r, y)| (*r, k * y)).collect();
            let a = fit_decay(&base, false).unwrap();
            let b = fit_decay(&scaled, false).unwrap();
            prop_assert!((a.slope - b.slope).abs() < 1e-9);
        }
    }

    #[test]
    fn certificate_rejects_non_bump() {
        let grid = RadialGrid::new(20.0, 200.0, 12, Spacing::Log)
            .unwrap()
            .points();
        let err = superpoly_certificate(
            &Formfactor::step(1.0).unwrap(),
            1.0,
            &[2],
            &grid,
            &QuadratureSpec::default(),
        );
        assert_eq!(err, Err(AsymptoticsError::NotCompactSupport));
    }

    #[test]
    fn certificate_rejects_sparse_grid() {
        let f = Formfactor::bump(0.5, 2.0).unwrap();
        let grid = [1.0, 10.0, 100.0, 1000.0];
        assert!(matches!(
            superpoly_certificate(&f, 1.0, &[0], &grid, &QuadratureSpec::default()),
            Err(AsymptoticsError::InvalidGrid(_))
        ));
    }

    #[test]
    fn certificate_for_bump() {
        let f = Formfactor::bump(0.5, 2.0).unwrap();
        let grid = RadialGrid::new(20.0, 200.0, 120, Spacing::Log)
            .unwrap()
            .points();
        let cert = superpoly_certificate(&f, 1.0, &[0, 2, 4, 6], &grid, &QuadratureSpec::default())
            .unwrap();
        assert_eq!(cert, vec![(0, true), (2, true), (4, true), (6, true)]);
    }
}
