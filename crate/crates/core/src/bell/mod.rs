//! Spin correlations of the singlet, the CHSH combination, a local
//! hidden-variable baseline and the localization-weighted correlation
//! `E(a, O1, b, O2) = g(O1, O2) E_spin(a, b)`.

mod space;

pub use space::{g_factor, GFactorMethod, GFactorResult, Region, SeparableState, WavePacketPair};

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BellError {
    #[error("vector is not of unit length (norm {0})")]
    NotUnitVector(f64),
    #[error("expectation value has imaginary part {0:e}")]
    NonHermitianResult(f64),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("invalid wave packet: {0}")]
    InvalidPacket(String),
    #[error("Monte Carlo budget too small: g = {g:e} with standard error {std_err:e} ({budget} samples)")]
    BudgetTooSmall { g: f64, std_err: f64, budget: usize },
    #[error("sample count must be at least 1")]
    NoSamples,
}

const UNIT_TOL: f64 = 1e-12;

/// Measurement direction in space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector3 {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitVector3 {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, BellError> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !((norm - 1.0).abs() <= UNIT_TOL) {
            return Err(BellError::NotUnitVector(norm));
        }
        Ok(Self { x, y, z })
    }

    pub fn normalized(x: f64, y: f64, z: f64) -> Result<Self, BellError> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(BellError::NotUnitVector(norm));
        }
        Ok(Self {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    /// Direction at polar angle `theta` (radians) from `+z`, inside the x-z plane.
    pub fn in_xz_plane(theta: f64) -> Self {
        Self {
            x: theta.sin(),
            y: 0.0,
            z: theta.cos(),
        }
    }

    pub fn from_spherical(theta: f64, phi: f64) -> Self {
        Self {
            x: theta.sin() * phi.cos(),
            y: theta.sin() * phi.sin(),
            z: theta.cos(),
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn neg(&self) -> Self {
        Self {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}

type Mat2 = [[Complex64; 2]; 2];

/// Pauli matrices plus the singlet `(|01> - |10>) / sqrt(2)`, with basis index
/// `2 q1 + q2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingletSystem {
    pub pauli: [Mat2; 3],
    pub state: [Complex64; 4],
}

impl Default for SingletSystem {
    fn default() -> Self {
        Self::new()
    }
}

impl SingletSystem {
    pub fn new() -> Self {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let sx = [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]];
        let sy = [[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]];
        let sz = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]];
        let h = FRAC_1_SQRT_2;
        Self {
            pauli: [sx, sy, sz],
            state: [c(0.0, 0.0), c(h, 0.0), c(-h, 0.0), c(0.0, 0.0)],
        }
    }

    /// `sigma . n`
    pub fn spin_operator(&self, n: &UnitVector3) -> Mat2 {
        let coeffs = n.as_array();
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (sigma, w) in self.pauli.iter().zip(coeffs) {
            for i in 0..2 {
                for j in 0..2 {
                    out[i][j] += sigma[i][j] * w;
                }
            }
        }
        out
    }

    /// Hermitian, traceless and involutive Pauli matrices; normalized and
    /// exchange-antisymmetric state.
    pub fn check_invariants(&self, tol: f64) -> bool {
        let paulis_ok = self.pauli.iter().all(|s| {
            let hermitian =
                (0..2).all(|i| (0..2).all(|j| (s[i][j] - s[j][i].conj()).norm() <= tol));
            let traceless = (s[0][0] + s[1][1]).norm() <= tol;
            let involutive = (0..2).all(|i| {
                (0..2).all(|j| {
                    let sq: Complex64 = (0..2).map(|k| s[i][k] * s[k][j]).sum();
                    let id = if i == j { 1.0 } else { 0.0 };
                    (sq - id).norm() <= tol
                })
            });
            hermitian && traceless && involutive
        });
        let norm: f64 = self.state.iter().map(|a| a.norm_sqr()).sum();
        // Swapping qubits maps basis index 1 <-> 2.
        let antisymmetric = (self.state[0]).norm() <= tol
            && (self.state[3]).norm() <= tol
            && (self.state[1] + self.state[2]).norm() <= tol;
        paulis_ok && (norm - 1.0).abs() <= tol && antisymmetric
    }
}

/// Singlet spin correlation `E_spin(a, b) = -a . b`.
pub fn spin_correlation(a: &UnitVector3, b: &UnitVector3) -> f64 {
    -a.dot(b)
}

/// `<psi|(sigma . a) (x) (sigma . b)|psi>` by explicit 4x4 construction.
pub fn singlet_oracle(
    sys: &SingletSystem,
    a: &UnitVector3,
    b: &UnitVector3,
) -> Result<f64, BellError> {
    let op_a = sys.spin_operator(a);
    let op_b = sys.spin_operator(b);

    let mut kron = [[Complex64::new(0.0, 0.0); 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    kron[2 * i + k][2 * j + l] = op_a[i][j] * op_b[k][l];
                }
            }
        }
    }

    let psi = &sys.state;
    let mut expectation = Complex64::new(0.0, 0.0);
    for (row, bra) in kron.iter().zip(psi) {
        let m_psi: Complex64 = row.iter().zip(psi).map(|(m, ket)| m * ket).sum();
        expectation += bra.conj() * m_psi;
    }

    if expectation.im.abs() > 1e-12 {
        return Err(BellError::NonHermitianResult(expectation.im));
    }
    Ok(expectation.re)
}

/// `C(a, b) - C(a, b') + C(a', b) + C(a', b')`
pub fn chsh<F>(
    a: &UnitVector3,
    a_prime: &UnitVector3,
    b: &UnitVector3,
    b_prime: &UnitVector3,
    correlation: F,
) -> f64
where
    F: Fn(&UnitVector3, &UnitVector3) -> f64,
{
    correlation(a, b) - correlation(a, b_prime)
        + correlation(a_prime, b)
        + correlation(a_prime, b_prime)
}

/// The four analyzer settings of a CHSH experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChshSettings {
    pub a: UnitVector3,
    pub a_prime: UnitVector3,
    pub b: UnitVector3,
    pub b_prime: UnitVector3,
}

impl ChshSettings {
    /// Coplanar settings from angles in degrees.
    pub fn coplanar_degrees(a: f64, a_prime: f64, b: f64, b_prime: f64) -> Self {
        let v = |deg: f64| UnitVector3::in_xz_plane(deg.to_radians());
        Self {
            a: v(a),
            a_prime: v(a_prime),
            b: v(b),
            b_prime: v(b_prime),
        }
    }

    /// `a = 0, a' = 90, b = 45, b' = 135` degrees, which maximize `|S|` for the singlet.
    pub fn canonical() -> Self {
        Self::coplanar_degrees(0.0, 90.0, 45.0, 135.0)
    }

    pub fn evaluate<F>(&self, correlation: F) -> f64
    where
        F: Fn(&UnitVector3, &UnitVector3) -> f64,
    {
        chsh(&self.a, &self.a_prime, &self.b, &self.b_prime, correlation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

fn sample_sphere(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let z: f64 = 2.0 * rng.gen::<f64>() - 1.0;
    let phi: f64 = 2.0 * PI * rng.gen::<f64>();
    let s = (1.0 - z * z).max(0.0).sqrt();
    [s * phi.cos(), s * phi.sin(), z]
}

fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn local_outcome(lambda: &[f64; 3], n: &UnitVector3) -> f64 {
    sign(lambda[0] * n.x + lambda[1] * n.y + lambda[2] * n.z)
}

fn mc_summary(mut draw: impl FnMut() -> f64, samples: usize) -> Result<McEstimate, BellError> {
    if samples == 0 {
        return Err(BellError::NoSamples);
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let v = draw();
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let std_err = if samples > 1 {
        ((sum_sq - n * mean * mean).max(0.0) / (n - 1.0) / n).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(McEstimate {
        mean,
        std_err,
        samples,
    })
}

/// Monte Carlo estimate, with standard error, of the deterministic local model
/// `A(a, l) = sign(l . a)`, `B(b, l) = -sign(l . b)` for `l` uniform on the sphere.
pub fn lhv_estimate(
    a: &UnitVector3,
    b: &UnitVector3,
    samples: usize,
    seed: u64,
) -> Result<McEstimate, BellError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    mc_summary(
        || {
            let l = sample_sphere(&mut rng);
            -local_outcome(&l, a) * local_outcome(&l, b)
        },
        samples,
    )
}

/// Point estimate of the local-hidden-variable correlation. Zero samples yield NaN.
pub fn lhv_baseline(a: &UnitVector3, b: &UnitVector3, samples: usize, seed: u64) -> f64 {
    lhv_estimate(a, b, samples, seed).map_or(f64::NAN, |e| e.mean)
}

/// CHSH value of the local model with the four correlations sharing hidden
/// variables, so the standard error accounts for their covariance.
pub fn lhv_chsh(
    settings: &ChshSettings,
    samples: usize,
    seed: u64,
) -> Result<McEstimate, BellError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    mc_summary(
        || {
            let l = sample_sphere(&mut rng);
            let alice = local_outcome(&l, &settings.a);
            let alice_p = local_outcome(&l, &settings.a_prime);
            let bob = -local_outcome(&l, &settings.b);
            let bob_p = -local_outcome(&l, &settings.b_prime);
            alice * bob - alice * bob_p + alice_p * bob + alice_p * bob_p
        },
        samples,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdVerdict {
    pub max_chsh: f64,
    pub violated: bool,
}

/// Largest reachable `|S|` once correlations carry the spatial weight `g`, and
/// whether it beats the local bound 2. Violation requires `g > 1/sqrt(2)` strictly.
pub fn violation_threshold(g: f64) -> ThresholdVerdict {
    // 2 (g sqrt 2) rounds past 2 at g = FRAC_1_SQRT_2; dividing keeps the
    // boundary exact.
    let max_chsh = 2.0 * (g / FRAC_1_SQRT_2);
    debug_assert!(
        (max_chsh - 2.0 * SQRT_2 * g).abs() <= 4.0 * f64::EPSILON * max_chsh.abs().max(1.0)
    );
    ThresholdVerdict {
        max_chsh,
        violated: max_chsh > 2.0,
    }
}

/// `E(a, O1, b, O2) = g(O1, O2) E_spin(a, b)` for a spin-space product state.
pub fn localized_correlation(
    state: &SeparableState,
    a: &UnitVector3,
    o1: &Region,
    b: &UnitVector3,
    o2: &Region,
    budget: usize,
    seed: u64,
) -> Result<f64, BellError> {
    let g = g_factor(&state.space, o1, o2, budget, seed)?;
    Ok(g.g * spin_correlation(a, b))
}
