//! Observer dynamics: the `(A, B)` pair, its decay envelopes, and the
//! truncation-time bookkeeping used by data generation.
//!
//! `A` is diagonal with distinct negative eigenvalues equally spaced over a
//! configured interval, and `B` is the all-ones column block. Distinct
//! eigenvalues with nonzero `B` rows make the pair controllable, and the
//! diagonal form gives `cond(V) = 1` in the eigenbasis, which keeps every
//! envelope tight.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mat::{spectral_norm, Mat};
use crate::math;

/// The lifted linear filter `ż = Az + By` with its eigen-data.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverMatrices {
    /// Lifted state dimension, `n_y (2 n_x + 1)`.
    pub n_z: usize,
    pub n_y: usize,
    /// Diagonal of `A`: distinct, strictly negative.
    pub eigenvalues: Vec<f64>,
    /// Input matrix, `n_z × n_y`, all ones.
    pub b: Mat,
    /// Condition number of the eigenvector matrix (1 for diagonal `A`).
    pub cond_v: f64,
    /// Eigenvalue of `A` closest to the imaginary axis (the largest one).
    pub lambda_min: f64,
}

impl ObserverMatrices {
    /// Dense `A` (diagonal).
    pub fn a_mat(&self) -> Mat {
        Mat::from_diag(&self.eigenvalues)
    }

    /// Spectral norm of `B`.
    pub fn norm_b(&self) -> f64 {
        spectral_norm(&self.b, 100, 1e-12)
    }

    /// `A z + B u` evaluated componentwise (diagonal fast path).
    pub fn filter_field(&self, z: &[f64], u: &[f64], dz: &mut [f64]) {
        for i in 0..self.n_z {
            let mut acc = self.eigenvalues[i] * z[i];
            for (j, uj) in u.iter().enumerate() {
                acc += self.b.get(i, j) * uj;
            }
            dz[i] = acc;
        }
    }
}

/// Build the observer pair for a plant of dimensions `(n_x, n_y)` with
/// eigenvalues equally spaced over `[lambda_lo, lambda_hi]` inclusive.
pub fn build_observer(
    n_x: usize,
    n_y: usize,
    lambda_lo: f64,
    lambda_hi: f64,
) -> Result<ObserverMatrices> {
    if !(lambda_hi < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "observer eigenvalues must be negative, got upper end {lambda_hi}"
        )));
    }
    if !(lambda_lo < lambda_hi) {
        return Err(Error::InvalidArgument(format!(
            "eigenvalue range must satisfy lo < hi, got [{lambda_lo}, {lambda_hi}]"
        )));
    }
    if n_x == 0 || n_y == 0 {
        return Err(Error::InvalidArgument("plant dimensions must be positive".into()));
    }
    let n_z = n_y * (2 * n_x + 1);
    let span = lambda_hi - lambda_lo;
    let eigenvalues: Vec<f64> =
        (0..n_z).map(|i| lambda_lo + span * i as f64 / (n_z - 1) as f64).collect();
    let mut b = Mat::zeros(n_z, n_y);
    b.fill(1.0);
    let lambda_min = lambda_hi;
    Ok(ObserverMatrices { n_z, n_y, eigenvalues, b, cond_v: 1.0, lambda_min })
}

/// Time `t*` after which `‖exp(At) z0‖ ≤ ε` is guaranteed:
/// `max(0, ln(ε / (cond(V)·‖z0‖)) / λ_min)`.
pub fn truncation_time(eps: f64, z0_norm: f64, cond_v: f64, lambda_min: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if !(z0_norm > 0.0) {
        return Err(Error::InvalidArgument("z0 norm must be positive".into()));
    }
    if !(lambda_min < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda_min must be negative, got {lambda_min}"
        )));
    }
    let t = math::ln(eps / (cond_v * z0_norm)) / lambda_min;
    Ok(t.max(0.0))
}

/// Smallest sample index `k` with `k·dt ≥ t_star_max`.
pub fn truncation_index(t_star_max: f64, dt: f64) -> usize {
    assert!(dt > 0.0, "dt must be positive");
    if t_star_max <= 0.0 {
        return 0;
    }
    math::ceil(t_star_max / dt) as usize
}

/// Decay envelope `cond(V)·e^{λ_min t}` bounding `‖exp(At)‖`.
pub fn exp_envelope(obs: &ObserverMatrices, t: f64) -> f64 {
    obs.cond_v * math::exp(obs.lambda_min * t)
}
