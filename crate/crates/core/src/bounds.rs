//! Closed-form calculators for the learning and robustness guarantees.
//!
//! The chain runs: a finite-sample complexity term per hypothesis class,
//! into a high-probability bound on the true inverse-map error, into bounds
//! on the expected squared steady-state estimation error — noise-free
//! (twice the inverse-map error) and under bounded uncertainty/noise (plus
//! a design-dependent term built from the observer constants).
//!
//! Pseudo-dimensions are user inputs (defaulting to parameter counts) and the
//! loss bounds default to observed per-sample maxima, so every certificate is
//! conditional on those inputs; they are all recorded next to the results.

use alloc::format;

use crate::error::{Error, Result};
use crate::estimate::EstimationRun;
use crate::mat::spectral_norm;
use crate::math;
use crate::rng;
use crate::system::System;

/// Finite-sample complexity term
/// `C = M·√(2d·ln(eN/d)/N) + M·√(ln(1/δ)/(2N))`.
pub fn complexity_term(m: f64, d: f64, n: usize, delta: f64) -> Result<f64> {
    if !(m >= 0.0) {
        return Err(Error::InvalidArgument(format!("loss bound M must be nonnegative, got {m}")));
    }
    if !(d >= 1.0) {
        return Err(Error::InvalidArgument(format!("pseudo-dimension must be >= 1, got {d}")));
    }
    if (n as f64) < d {
        return Err(Error::InvalidArgument(format!(
            "sample count N = {n} must be at least the pseudo-dimension d = {d}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0,1), got {delta}")));
    }
    let n = n as f64;
    let estimation = m * math::sqrt(2.0 * d * math::ln(core::f64::consts::E * n / d) / n);
    let confidence = m * math::sqrt(math::ln(1.0 / delta) / (2.0 * n));
    Ok(estimation + confidence)
}

/// True inverse error from reconstruction and forward risks:
/// `R_{T*} ≤ 2·R₂ + 2·ℓ_η²·R_T`.
pub fn lemma2_chain(r2: f64, ell_eta: f64, r_t: f64) -> f64 {
    2.0 * r2 + 2.0 * ell_eta * ell_eta * r_t
}

/// High-probability bound on the inverse-map error from empirical risks and
/// complexity terms: `2(R̂₂ + 2C_η) + 2ℓ_η²(R̂₁ + 2C_θ)`.
pub fn inverse_error_bound(
    emp_r2: f64,
    comp_eta: f64,
    ell_eta: f64,
    emp_r1: f64,
    comp_theta: f64,
) -> Result<f64> {
    for (name, v) in [
        ("empirical reconstruction risk", emp_r2),
        ("inverse complexity term", comp_eta),
        ("inverse Lipschitz constant", ell_eta),
        ("empirical physics-informed risk", emp_r1),
        ("forward complexity term", comp_theta),
    ] {
        if !(v >= 0.0) {
            return Err(Error::InvalidArgument(format!("{name} must be nonnegative, got {v}")));
        }
    }
    Ok(2.0 * (emp_r2 + 2.0 * comp_eta) + 2.0 * ell_eta * ell_eta * (emp_r1 + 2.0 * comp_theta))
}

/// Expected squared steady-state estimation error under bounded uncertainty
/// and noise:
/// `2·R_{T*} + 2·ℓ_η²·(cond(V)·‖B‖/|λ_min|)²·(ℓ_h·ψ(w̄) + √n_y·v̄)²`.
///
/// With `w̄ = v̄ = 0` this reduces to the noise-free bound `2·R_{T*}`.
#[allow(clippy::too_many_arguments)]
pub fn steady_state_bound(
    r_tstar: f64,
    ell_eta: f64,
    cond_v: f64,
    lambda_min: f64,
    norm_b: f64,
    ell_h: f64,
    psi_wbar: f64,
    n_y: usize,
    vbar: f64,
) -> Result<f64> {
    if !(lambda_min < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda_min must be negative, got {lambda_min}"
        )));
    }
    for (name, v) in [
        ("inverse error", r_tstar),
        ("inverse Lipschitz constant", ell_eta),
        ("cond(V)", cond_v),
        ("‖B‖", norm_b),
        ("output Lipschitz constant", ell_h),
        ("ψ(w̄)", psi_wbar),
        ("v̄", vbar),
    ] {
        if !(v >= 0.0) {
            return Err(Error::InvalidArgument(format!("{name} must be nonnegative, got {v}")));
        }
    }
    let gain = cond_v * norm_b / math::abs(lambda_min);
    let sigma = ell_h * psi_wbar + math::sqrt(n_y as f64) * vbar;
    Ok(2.0 * r_tstar + 2.0 * ell_eta * ell_eta * gain * gain * sigma * sigma)
}

/// Sampled estimate of `ℓ_h = sup σ_max(∂h/∂x)` over a box: running maximum
/// of the output-Jacobian spectral norm at seeded uniform points. For the
/// benchmark selector outputs this is exact at any sample count.
pub fn estimate_ell_h(
    sys: &System,
    lo: &[f64],
    hi: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("ell_h estimation needs at least one sample".into()));
    }
    let mut rng = rng::seeded(seed);
    let points = crate::datagen::sample_box(n_samples, lo, hi, &mut rng)?;
    let mut best = 0.0f64;
    for r in 0..n_samples {
        let j = sys.eval_output_jacobian(points.row(r))?;
        best = best.max(spectral_norm(&j, 100, 1e-12));
    }
    Ok(best)
}

/// Monte-Carlo estimate of the expected squared steady-state error: the mean
/// of `‖x − x̂‖²` over all samples with `t ≥ t_cutoff`, pooled across runs
/// (trajectory-ensemble surrogate for the invariant-measure expectation).
pub fn empirical_steady_state_error(runs: &[EstimationRun], t_cutoff: f64) -> Result<f64> {
    if runs.is_empty() {
        return Err(Error::EmptyInput("steady-state error needs at least one run".into()));
    }
    let mut acc = 0.0;
    let mut count = 0usize;
    for run in runs {
        for k in 0..run.len() {
            if run.times[k] >= t_cutoff {
                acc += math::dist2(run.true_states.row(k), run.est_states.row(k));
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptyInput(format!("no samples at or after t = {t_cutoff}")));
    }
    Ok(acc / count as f64)
}

/// Every input the certificate depends on, gathered in one place.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    /// Loss bound for the forward (physics-informed) class.
    pub m_theta: f64,
    /// Loss bound for the inverse (reconstruction) class.
    pub m_eta: f64,
    /// Pseudo-dimension of the forward loss class (user input).
    pub d_theta: f64,
    /// Pseudo-dimension of the inverse loss class (user input).
    pub d_eta: f64,
    /// Stage-one sample count (`N_data + N_pde`).
    pub n1: usize,
    /// Stage-two sample count.
    pub n2: usize,
    pub delta: f64,
    pub ell_eta: f64,
    pub ell_h: f64,
    pub cond_v: f64,
    pub lambda_min: f64,
    pub norm_b: f64,
    pub n_y: usize,
    /// Empirical stage-one risk at the trained forward parameters.
    pub emp_r1: f64,
    /// Empirical stage-two risk at the trained inverse parameters.
    pub emp_r2: f64,
    /// `ψ(w̄)` for this evaluation's uncertainty realization.
    pub psi_wbar: f64,
    /// Empirical measurement-noise bound.
    pub vbar: f64,
}

impl BoundInputs {
    pub fn c_theta(&self) -> Result<f64> {
        complexity_term(self.m_theta, self.d_theta, self.n1, self.delta)
    }

    pub fn c_eta(&self) -> Result<f64> {
        complexity_term(self.m_eta, self.d_eta, self.n2, self.delta)
    }

    /// High-probability inverse-map error bound.
    pub fn r_tstar_bound(&self) -> Result<f64> {
        inverse_error_bound(self.emp_r2, self.c_eta()?, self.ell_eta, self.emp_r1, self.c_theta()?)
    }

    /// Noise-free steady-state bound, `2·R_{T*}`.
    pub fn noise_free_bound(&self) -> Result<f64> {
        Ok(2.0 * self.r_tstar_bound()?)
    }

    /// Steady-state bound under the recorded noise magnitudes.
    pub fn noisy_bound(&self) -> Result<f64> {
        steady_state_bound(
            self.r_tstar_bound()?,
            self.ell_eta,
            self.cond_v,
            self.lambda_min,
            self.norm_b,
            self.ell_h,
            self.psi_wbar,
            self.n_y,
            self.vbar,
        )
    }
}

/// Names the default `ψ` (identity) so reports can surface the assumption.
pub fn psi_identity(wbar: f64) -> f64 {
    wbar
}
