//! Spatial part of a spin-space product state and the localization factor
//! `g(O1, O2) = int_{O1 x O2} |phi(r1, r2)|^2 dr1 dr2`.
//!
//! Two Gaussian families are provided because their marginals and
//! normalizations are analytic. Widths are standard deviations of the
//! probability density `|phi|^2`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BellError, SingletSystem};
use crate::quadrature::{self, QuadratureSpec};

// Mass beyond this many standard deviations is below f64 resolution.
const GAUSS_CLIP: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    /// Axis-aligned box `[lo, hi]`.
    Box {
        lo: [f64; 3],
        hi: [f64; 3],
    },
    AllSpace,
}

impl Region {
    pub fn new_box(lo: [f64; 3], hi: [f64; 3]) -> Result<Self, BellError> {
        let region = Self::Box { lo, hi };
        region.validate()?;
        Ok(region)
    }

    pub fn cube(center: [f64; 3], half_width: f64) -> Result<Self, BellError> {
        if !(half_width >= 0.0) {
            return Err(BellError::InvalidRegion(format!(
                "half width must be nonnegative, got {half_width}"
            )));
        }
        Self::new_box(
            center.map(|c| c - half_width),
            center.map(|c| c + half_width),
        )
    }

    pub fn validate(&self) -> Result<(), BellError> {
        if let Self::Box { lo, hi } = self {
            for k in 0..3 {
                if !(lo[k].is_finite() && hi[k].is_finite()) {
                    return Err(BellError::InvalidRegion(
                        "box corners must be finite".into(),
                    ));
                }
                if lo[k] > hi[k] {
                    return Err(BellError::InvalidRegion(format!(
                        "lo[{k}] = {} exceeds hi[{k}] = {}",
                        lo[k], hi[k]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Zero-measure box.
    pub fn is_empty(&self) -> bool {
        match self {
            Self::Box { lo, hi } => (0..3).any(|k| lo[k] == hi[k]),
            Self::AllSpace => false,
        }
    }

    pub fn contains_region(&self, other: &Region) -> bool {
        match (self, other) {
            (Self::AllSpace, _) => true,
            (Self::Box { .. }, Self::AllSpace) => false,
            (Self::Box { lo, hi }, Self::Box { lo: lo2, hi: hi2 }) => {
                (0..3).all(|k| lo[k] <= lo2[k] && hi2[k] <= hi[k])
            }
        }
    }
}

/// Spatial probability density of the particle pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WavePacketPair {
    /// Independent isotropic Gaussians around `center1` and `center2`.
    Product {
        center1: [f64; 3],
        sigma1: f64,
        center2: [f64; 3],
        sigma2: f64,
    },
    /// Gaussian in the relative coordinate `r1 - r2` (mean `offset`) times a
    /// Gaussian in the center of mass `(r1 + r2) / 2`.
    Correlated {
        offset: [f64; 3],
        sigma_rel: f64,
        cm_center: [f64; 3],
        sigma_cm: f64,
    },
}

fn check_width(name: &str, sigma: f64) -> Result<(), BellError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(BellError::InvalidPacket(format!(
            "{name} must be positive, got {sigma}"
        )));
    }
    Ok(())
}

fn normal_density(x: f64, mean: f64, sigma: f64) -> f64 {
    let u = (x - mean) / sigma;
    (-0.5 * u * u).exp() / (sigma * (2.0 * PI).sqrt())
}

fn normal_density3(x: [f64; 3], mean: [f64; 3], sigma: f64) -> f64 {
    (0..3)
        .map(|k| normal_density(x[k], mean[k], sigma))
        .product()
}

impl WavePacketPair {
    pub fn product(
        center1: [f64; 3],
        sigma1: f64,
        center2: [f64; 3],
        sigma2: f64,
    ) -> Result<Self, BellError> {
        let pair = Self::Product {
            center1,
            sigma1,
            center2,
            sigma2,
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn correlated(
        offset: [f64; 3],
        sigma_rel: f64,
        cm_center: [f64; 3],
        sigma_cm: f64,
    ) -> Result<Self, BellError> {
        let pair = Self::Correlated {
            offset,
            sigma_rel,
            cm_center,
            sigma_cm,
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<(), BellError> {
        let (centers, widths) = match self {
            Self::Product {
                center1,
                sigma1,
                center2,
                sigma2,
            } => (
                [center1, center2],
                [("sigma1", *sigma1), ("sigma2", *sigma2)],
            ),
            Self::Correlated {
                offset,
                sigma_rel,
                cm_center,
                sigma_cm,
            } => (
                [offset, cm_center],
                [("sigma_rel", *sigma_rel), ("sigma_cm", *sigma_cm)],
            ),
        };
        for (name, s) in widths {
            check_width(name, s)?;
        }
        if centers.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(BellError::InvalidPacket("centers must be finite".into()));
        }
        Ok(())
    }

    /// `|phi(r1, r2)|^2`, normalized to unit mass over all of space.
    pub fn density(&self, r1: [f64; 3], r2: [f64; 3]) -> f64 {
        match *self {
            Self::Product {
                center1,
                sigma1,
                center2,
                sigma2,
            } => normal_density3(r1, center1, sigma1) * normal_density3(r2, center2, sigma2),
            Self::Correlated {
                offset,
                sigma_rel,
                cm_center,
                sigma_cm,
            } => {
                let cm = [0, 1, 2].map(|k| 0.5 * (r1[k] + r2[k]));
                let rel = [0, 1, 2].map(|k| r1[k] - r2[k]);
                // The map (r1, r2) -> (cm, rel) has unit Jacobian per axis.
                normal_density3(cm, cm_center, sigma_cm) * normal_density3(rel, offset, sigma_rel)
            }
        }
    }

    /// Per-axis mean and standard deviation of each particle's marginal density.
    pub fn marginals(&self) -> [([f64; 3], f64); 2] {
        match *self {
            Self::Product {
                center1,
                sigma1,
                center2,
                sigma2,
            } => [(center1, sigma1), (center2, sigma2)],
            Self::Correlated {
                offset,
                sigma_rel,
                cm_center,
                sigma_cm,
            } => {
                let s = (sigma_cm * sigma_cm + 0.25 * sigma_rel * sigma_rel).sqrt();
                [
                    ([0, 1, 2].map(|k| cm_center[k] + 0.5 * offset[k]), s),
                    ([0, 1, 2].map(|k| cm_center[k] - 0.5 * offset[k]), s),
                ]
            }
        }
    }
}

/// `psi = psi_spin * phi(r1, r2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableState {
    pub spin: SingletSystem,
    pub space: WavePacketPair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GFactorMethod {
    Tensorized,
    MonteCarlo,
}

impl GFactorMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Tensorized => "tensorized",
            Self::MonteCarlo => "monte-carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GFactorResult {
    pub g: f64,
    pub est_error: f64,
    pub method: GFactorMethod,
}

/// Probability that a Gaussian marginal lands in `region`, as a product of
/// per-axis quadratures. Returns `(probability, error bound)`.
fn box_probability(region: &Region, mean: [f64; 3], sigma: f64) -> (f64, f64) {
    let (lo, hi) = match region {
        Region::AllSpace => return (1.0, 0.0),
        Region::Box { lo, hi } => (lo, hi),
    };
    let spec = QuadratureSpec::default().with_tol(1e-14);
    let mut prob = 1.0;
    let mut err = 0.0;
    for k in 0..3 {
        let a = lo[k].max(mean[k] - GAUSS_CLIP * sigma);
        let b = hi[k].min(mean[k] + GAUSS_CLIP * sigma);
        if b <= a {
            return (0.0, 0.0);
        }
        let (p, e) =
            quadrature::integrate_real(|x| normal_density(x, mean[k], sigma), a, b, sigma, &spec)
                .expect("smooth Gaussian integrand converges within the default panel budget");
        prob *= p;
        err += e;
    }
    (prob, err)
}

/// `g(O1, O2)`. Product packets and any configuration with an `AllSpace`
/// region reduce to per-axis quadratures of Gaussian marginals; correlated
/// packets on two boxes use stratified Monte Carlo over the 6-D box with at
/// most `budget` samples.
pub fn g_factor(
    pair: &WavePacketPair,
    o1: &Region,
    o2: &Region,
    budget: usize,
    seed: u64,
) -> Result<GFactorResult, BellError> {
    pair.validate()?;
    o1.validate()?;
    o2.validate()?;

    let tensorized = |g: f64, est_error: f64| GFactorResult {
        g,
        est_error,
        method: GFactorMethod::Tensorized,
    };
    let [(m1, s1), (m2, s2)] = pair.marginals();

    match (pair, o1, o2) {
        (WavePacketPair::Product { .. }, _, _)
        | (_, Region::AllSpace, _)
        | (_, _, Region::AllSpace) => {
            if o1.is_empty() || o2.is_empty() {
                return Ok(tensorized(0.0, 0.0));
            }
            // For correlated packets one region is all of space, so only the
            // other particle's marginal matters.
            let (p1, e1) = box_probability(o1, m1, s1);
            let (p2, e2) = box_probability(o2, m2, s2);
            Ok(tensorized(p1 * p2, e1 + e2))
        }
        (
            WavePacketPair::Correlated { .. },
            Region::Box { lo: lo1, hi: hi1 },
            Region::Box { lo: lo2, hi: hi2 },
        ) => {
            if o1.is_empty() || o2.is_empty() {
                return Ok(GFactorResult {
                    g: 0.0,
                    est_error: 0.0,
                    method: GFactorMethod::MonteCarlo,
                });
            }
            let lo = [lo1[0], lo1[1], lo1[2], lo2[0], lo2[1], lo2[2]];
            let hi = [hi1[0], hi1[1], hi1[2], hi2[0], hi2[1], hi2[2]];
            stratified_box_integral(pair, lo, hi, budget, seed)
        }
    }
}

fn stratified_box_integral(
    pair: &WavePacketPair,
    lo: [f64; 6],
    hi: [f64; 6],
    budget: usize,
    seed: u64,
) -> Result<GFactorResult, BellError> {
    if budget < 2 {
        return Err(BellError::BudgetTooSmall {
            g: f64::NAN,
            std_err: f64::INFINITY,
            budget,
        });
    }
    // Largest m with two samples in each of the m^6 strata.
    let mut per_axis = 1usize;
    while 2 * (per_axis + 1).pow(6) <= budget {
        per_axis += 1;
    }
    let strata = per_axis.pow(6);
    let per_stratum = budget / strata;

    let widths: [f64; 6] = std::array::from_fn(|k| (hi[k] - lo[k]) / per_axis as f64);
    let cell_volume: f64 = widths.iter().product();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    let mut variance = 0.0;
    let mut digits = [0usize; 6];
    for _ in 0..strata {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..per_stratum {
            let p: [f64; 6] =
                std::array::from_fn(|k| lo[k] + widths[k] * (digits[k] as f64 + rng.gen::<f64>()));
            let v = pair.density([p[0], p[1], p[2]], [p[3], p[4], p[5]]);
            sum += v;
            sum_sq += v * v;
        }
        let n = per_stratum as f64;
        let mean = sum / n;
        let var = (sum_sq - n * mean * mean).max(0.0) / (n - 1.0);
        total += cell_volume * mean;
        variance += cell_volume * cell_volume * var / n;

        for d in digits.iter_mut() {
            *d += 1;
            if *d < per_axis {
                break;
            }
            *d = 0;
        }
    }

    let std_err = variance.sqrt();
    if std_err > 0.1 * total {
        return Err(BellError::BudgetTooSmall {
            g: total,
            std_err,
            budget,
        });
    }
    Ok(GFactorResult {
        g: total,
        est_error: std_err,
        method: GFactorMethod::MonteCarlo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn product() -> WavePacketPair {
        WavePacketPair::product([-30.0, 0.0, 0.0], 1.0, [30.0, 0.0, 0.0], 1.0).unwrap()
    }

    fn correlated() -> WavePacketPair {
        WavePacketPair::correlated([4.0, 0.0, 0.0], 0.5, [0.0; 3], 1.0).unwrap()
    }

    #[test]
    fn all_space_is_one() {
        for pair in [product(), correlated()] {
            let g = g_factor(&pair, &Region::AllSpace, &Region::AllSpace, 100, 0).unwrap();
            assert_eq!(g.g, 1.0);
            assert_eq!(g.method, GFactorMethod::Tensorized);
        }
    }

    #[test]
    fn wide_boxes_capture_all_mass() {
        let pair = product();
        let o1 = Region::cube([-30.0, 0.0, 0.0], 10.0).unwrap();
        let o2 = Region::cube([30.0, 0.0, 0.0], 10.0).unwrap();
        let g = g_factor(&pair, &o1, &o2, 0, 0).unwrap();
        assert!((g.g - 1.0).abs() < 1e-4);
        assert!(g.g <= 1.0 + 3.0 * g.est_error);
    }

    #[test]
    fn empty_region_gives_zero() {
        let empty = Region::new_box([0.0; 3], [0.0, 1.0, 1.0]).unwrap();
        for pair in [product(), correlated()] {
            let g = g_factor(
                &pair,
                &empty,
                &Region::cube([0.0; 3], 5.0).unwrap(),
                1000,
                0,
            )
            .unwrap();
            assert_eq!(g.g, 0.0);
        }
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(Region::new_box([1.0, 0.0, 0.0], [0.0, 1.0, 1.0]).is_err());
        assert!(Region::new_box([0.0; 3], [f64::INFINITY, 1.0, 1.0]).is_err());
        assert!(WavePacketPair::product([0.0; 3], 0.0, [0.0; 3], 1.0).is_err());
        assert!(WavePacketPair::correlated([0.0; 3], 1.0, [f64::NAN, 0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn correlated_marginal_matches_monte_carlo_normalization() {
        // Boxes of +-4 marginal widths hold all but ~4e-4 of the mass.
        let pair = WavePacketPair::correlated([4.0, 0.0, 0.0], 1.5, [0.0; 3], 1.0).unwrap();
        let [(m1, s1), (m2, s2)] = pair.marginals();
        let o1 = Region::new_box(m1.map(|c| c - 4.0 * s1), m1.map(|c| c + 4.0 * s1)).unwrap();
        let o2 = Region::new_box(m2.map(|c| c - 4.0 * s2), m2.map(|c| c + 4.0 * s2)).unwrap();
        let g = g_factor(&pair, &o1, &o2, 200_000, 9).unwrap();
        assert_eq!(g.method, GFactorMethod::MonteCarlo);
        assert!((g.g - 1.0).abs() < 4.0 * g.est_error + 1e-3, "{g:?}");
        assert!(g.est_error < 0.05, "{g:?}");
    }

    #[test]
    fn one_sided_all_space_uses_marginal() {
        let pair = correlated();
        let [(m1, s1), _] = pair.marginals();
        let o1 = Region::new_box([m1[0], -1e3, -1e3], [1e3, 1e3, 1e3]).unwrap();
        let g = g_factor(&pair, &o1, &Region::AllSpace, 10, 0).unwrap();
        assert_eq!(g.method, GFactorMethod::Tensorized);
        assert!((g.g - 0.5).abs() < 1e-10, "{g:?} (sigma {s1})");
    }

    #[test]
    fn tiny_budget_reports_error() {
        let pair = correlated();
        let o1 = Region::cube([2.0, 0.0, 0.0], 0.3).unwrap();
        let o2 = Region::cube([-2.0, 0.0, 0.0], 0.3).unwrap();
        assert!(matches!(
            g_factor(&pair, &o1, &o2, 1, 0),
            Err(BellError::BudgetTooSmall { .. })
        ));
        let o2_far = Region::cube([-2.0, 3.0, 0.0], 3.0).unwrap();
        assert!(matches!(
            g_factor(&pair, &o1, &o2_far, 128, 0),
            Err(BellError::BudgetTooSmall { .. })
        ));
    }

    #[test]
    fn monte_carlo_is_seed_deterministic() {
        let pair = correlated();
        let o1 = Region::cube([2.0, 0.0, 0.0], 1.5).unwrap();
        let o2 = Region::cube([-2.0, 0.0, 0.0], 1.5).unwrap();
        let a = g_factor(&pair, &o1, &o2, 20_000, 5).unwrap();
        let b = g_factor(&pair, &o1, &o2, 20_000, 5).unwrap();
        assert_eq!(a, b);
    }

    fn normal_box(lo: [f64; 3], hi: [f64; 3], mean: [f64; 3], sigma: f64) -> f64 {
        (0..3)
            .map(|k| {
                let n = Normal::new(mean[k], sigma).unwrap();
                n.cdf(hi[k]) - n.cdf(lo[k])
            })
            .product()
    }

    #[test]
    fn product_boxes_match_normal_cdf() {
        let pair = WavePacketPair::product([-2.0, 0.5, 1.0], 0.8, [3.0, -1.0, 0.0], 1.7).unwrap();
        let (lo1, hi1) = ([-3.0, -0.5, 0.0], [-1.5, 1.0, 3.0]);
        let (lo2, hi2) = ([2.0, -4.0, -1.0], [5.0, 0.0, 0.5]);
        let o1 = Region::new_box(lo1, hi1).unwrap();
        let o2 = Region::new_box(lo2, hi2).unwrap();
        let g = g_factor(&pair, &o1, &o2, 0, 0).unwrap();
        let expected = normal_box(lo1, hi1, [-2.0, 0.5, 1.0], 0.8)
            * normal_box(lo2, hi2, [3.0, -1.0, 0.0], 1.7);
        assert_eq!(g.method, GFactorMethod::Tensorized);
        assert!(
            (g.g - expected).abs() < 1e-10 * expected,
            "{} vs {expected}",
            g.g
        );
    }

    #[test]
    fn correlated_one_sided_matches_normal_cdf() {
        let pair = WavePacketPair::correlated([3.0, 0.0, -1.0], 0.6, [0.5, 0.0, 0.0], 1.2).unwrap();
        let [(m1, s1), _] = pair.marginals();
        let (lo, hi) = ([0.0, -1.0, -2.0], [3.0, 1.5, 0.0]);
        let g = g_factor(
            &pair,
            &Region::new_box(lo, hi).unwrap(),
            &Region::AllSpace,
            0,
            0,
        )
        .unwrap();
        let expected = normal_box(lo, hi, m1, s1);
        assert!(
            (g.g - expected).abs() < 1e-10 * expected,
            "{} vs {expected}",
            g.g
        );
    }

    proptest! {
        #[test]
        fn growing_a_box_never_lowers_g(
            c in prop::array::uniform3(-2.0f64..2.0),
            h in 0.1f64..3.0,
            grow in 0.0f64..2.0,
            sigma in 0.3f64..2.0,
        ) {
            let pair = WavePacketPair::product([0.0; 3], sigma, [4.0, 0.0, 0.0], 1.0).unwrap();
            let o2 = Region::cube([4.0, 0.0, 0.0], 1.0).unwrap();
            let inner = Region::cube(c, h).unwrap();
            let outer = Region::cube(c, h + grow).unwrap();
            let gi = g_factor(&pair, &inner, &o2, 0, 0).unwrap();
            let go = g_factor(&pair, &outer, &o2, 0, 0).unwrap();
            prop_assert!(gi.g <= go.g + 3.0 * (gi.est_error + go.est_error) + 1e-15);
        }
    }

    #[test]
    fn region_containment() {
        let small = Region::cube([0.0; 3], 1.0).unwrap();
        let big = Region::cube([0.0; 3], 2.0).unwrap();
        assert!(big.contains_region(&small));
        assert!(!small.contains_region(&big));
        assert!(Region::AllSpace.contains_region(&big));
        assert!(!big.contains_region(&Region::AllSpace));
    }
}
