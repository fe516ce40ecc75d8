//! Adaptive Gauss-Kronrod panel quadrature for complex-valued integrands.
//!
//! The interval is first cut into panels no longer than a caller-supplied
//! length (used to resolve oscillations), then the panel with the largest
//! error estimate is bisected until the total estimate drops below
//! `max(abs_tol, rel_tol * |I|)` or the panel budget is exhausted.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(&'static str),
    #[error("invalid integration interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error(
        "tolerance not met: error estimate {achieved:e} exceeds {requested:e} after {panels} panels"
    )]
    ToleranceNotMet {
        achieved: f64,
        requested: f64,
        panels: usize,
    },
}

/// Accuracy controls shared by every quadrature-backed operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
    /// Relative size of the integrand at which an unbounded support is cut.
    pub truncation_epsilon: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_panels: 200_000,
            truncation_epsilon: 1e-16,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<(), QuadratureError> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(QuadratureError::InvalidSpec("rel_tol must be positive"));
        }
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(QuadratureError::InvalidSpec("abs_tol must be positive"));
        }
        if self.max_panels < 1 {
            return Err(QuadratureError::InvalidSpec(
                "max_panels must be at least 1",
            ));
        }
        if !(self.truncation_epsilon > 0.0 && self.truncation_epsilon < 1.0) {
            return Err(QuadratureError::InvalidSpec(
                "truncation_epsilon must lie in (0, 1)",
            ));
        }
        Ok(())
    }

    /// Same settings with both tolerances replaced by `tol`.
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.rel_tol = tol;
        self.abs_tol = tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
    pub panels: usize,
}

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
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

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    // Ties broken by position so the refinement order is fully deterministic.
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

/// Apply the 21-point Kronrod rule and its embedded 10-point Gauss rule on
/// `[lo, hi]`. The error estimate is `|K21 - G10|`.
#[allow(clippy::needless_range_loop)]
pub fn gauss_kronrod21<F>(f: &F, lo: f64, hi: f64) -> (Complex64, f64)
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);

    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = Complex64::new(0.0, 0.0);

    for j in 0..5 {
        let k = 2 * j + 1;
        let dx = half * XGK[k];
        let pair = f(center - dx) + f(center + dx);
        gauss += pair * WG[j];
        kronrod += pair * WGK[k];
    }
    for j in 0..5 {
        let k = 2 * j;
        let dx = half * XGK[k];
        let pair = f(center - dx) + f(center + dx);
        kronrod += pair * WGK[k];
    }

    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).norm();
    (value, error)
}

/// Integrate `f` over `[lo, hi]` with initial panels no longer than
/// `max_panel_len`, refining adaptively until the tolerance in `spec` holds.
pub fn integrate<F>(
    f: F,
    lo: f64,
    hi: f64,
    max_panel_len: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate, QuadratureError>
where
    F: Fn(f64) -> Complex64,
{
    spec.validate()?;
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(QuadratureError::InvalidInterval { lo, hi });
    }
    if hi == lo {
        return Ok(Estimate {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
            panels: 0,
        });
    }

    let len = hi - lo;
    let n_initial = if max_panel_len.is_finite() && max_panel_len > 0.0 {
        (len / max_panel_len).ceil().max(1.0)
    } else {
        1.0
    };
    if n_initial > spec.max_panels as f64 {
        return Err(QuadratureError::ToleranceNotMet {
            achieved: f64::INFINITY,
            requested: spec.abs_tol,
            panels: spec.max_panels,
        });
    }
    let n_initial = n_initial as usize;

    let mut heap = BinaryHeap::with_capacity(n_initial * 2);
    let width = len / n_initial as f64;
    for i in 0..n_initial {
        let a = lo + width * i as f64;
        let b = if i + 1 == n_initial {
            hi
        } else {
            lo + width * (i + 1) as f64
        };
        let (value, error) = gauss_kronrod21(&f, a, b);
        heap.push(Panel {
            lo: a,
            hi: b,
            value,
            error,
        });
    }

    loop {
        let (value, error) = totals(&heap);
        let tol = spec.abs_tol.max(spec.rel_tol * value.norm());
        if error <= tol {
            return Ok(Estimate {
                value,
                error,
                panels: heap.len(),
            });
        }
        if heap.len() >= spec.max_panels {
            return Err(QuadratureError::ToleranceNotMet {
                achieved: error,
                requested: tol,
                panels: heap.len(),
            });
        }

        // Bisect the worst panels in one sweep before re-summing.
        let batch = (heap.len() / 8).max(1).min(spec.max_panels - heap.len());
        for _ in 0..batch {
            let worst = heap.pop().expect("heap is non-empty");
            let mid = 0.5 * (worst.lo + worst.hi);
            if !(mid > worst.lo && mid < worst.hi) {
                // Panel cannot be split further in floating point.
                heap.push(worst);
                let (value, error) = totals(&heap);
                return Err(QuadratureError::ToleranceNotMet {
                    achieved: error,
                    requested: spec.abs_tol.max(spec.rel_tol * value.norm()),
                    panels: heap.len(),
                });
            }
            for (a, b) in [(worst.lo, mid), (mid, worst.hi)] {
                let (value, error) = gauss_kronrod21(&f, a, b);
                heap.push(Panel {
                    lo: a,
                    hi: b,
                    value,
                    error,
                });
            }
        }
    }
}

/// Sum in interval order so results do not depend on heap layout.
fn totals(heap: &BinaryHeap<Panel>) -> (Complex64, f64) {
    let mut panels: Vec<&Panel> = heap.iter().collect();
    panels.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    for p in panels {
        value += p.value;
        error += p.error;
    }
    (value, error)
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<F>(
    f: F,
    lo: f64,
    hi: f64,
    max_panel_len: f64,
    spec: &QuadratureSpec,
) -> Result<(f64, f64), QuadratureError>
where
    F: Fn(f64) -> f64,
{
    let est = integrate(|x| Complex64::new(f(x), 0.0), lo, hi, max_panel_len, spec)?;
    Ok((est.value.re, est.error))
}
