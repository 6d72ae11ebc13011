//! Physics-informed risk assembly and the two-stage training procedure.
//!
//! Stage one fits the forward map by minimizing
//!
//! ```text
//!   R̂₁(θ) = (1/N_data) Σ ‖z − T̂_θ(x)‖²  +  (ν/N_pde) Σ ‖P_θ(x)‖²
//! ```
//!
//! where `P_θ(x) = ∂T̂_θ/∂x(x)·f(x) − A·T̂_θ(x) − B·h(x)` is the residual of
//! the defining PDE. The Jacobian–vector product in `P_θ` comes from the
//! tangent channel of the network engine; its parameter gradient (a mixed
//! second derivative) comes from reverse mode over that channel — no finite
//! differences anywhere in the training path.
//!
//! Stage two fits the inverse map on frozen-forward features by plain mean
//! squared reconstruction error, optionally with decoupled weight decay to
//! keep the inverse map's Lipschitz constant down.
//!
//! The optimizer is Adam (β₁ = 0.9, β₂ = 0.999, ε = 1e−8) on minibatches.
//! The data-fit and residual terms are batched independently from their own
//! partitions, each normalized by its own batch size, which preserves the
//! risk weighting in expectation. All shuffling and initialization is seeded;
//! reductions run in fixed order, so a training run is a deterministic
//! function of (dataset, config).

use alloc::vec;
use alloc::vec::Vec;

use crate::datagen::{DatasetS1, DatasetS2};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::math;
use crate::nn::{FlatGradient, Mlp};
use crate::observer::ObserverMatrices;
use crate::rng;
use crate::system::System;

/// Hyperparameters shared by both training stages.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden_layers: usize,
    pub layer_size: usize,
    pub learning_rate: f64,
    /// Physics weight ν on the residual term (stage one only).
    pub nu: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Decoupled weight decay on weight matrices (biases excluded).
    pub weight_decay: f64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if !(self.nu >= 0.0) {
            return Err(Error::InvalidArgument("nu must be nonnegative".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument("weight decay must be nonnegative".into()));
        }
        if self.layer_size == 0 && self.hidden_layers > 0 {
            return Err(Error::InvalidArgument("layer size must be positive".into()));
        }
        Ok(())
    }

    /// Network sizes for a map from `n_in` to `n_out`.
    pub fn layer_sizes(&self, n_in: usize, n_out: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden_layers + 2);
        sizes.push(n_in);
        sizes.extend(core::iter::repeat(self.layer_size).take(self.hidden_layers));
        sizes.push(n_out);
        sizes
    }
}

/// Decomposed risk value: `total = data_fit + ν·pde`, computed exactly in
/// that form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskBreakdown {
    pub total: f64,
    pub data_fit: f64,
    pub pde: f64,
}

/// Per-epoch loss traces and summary of one training stage.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean minibatch data-fit loss per epoch.
    pub epoch_data_fit: Vec<f64>,
    /// Mean minibatch PDE loss per epoch.
    pub epoch_pde: Vec<f64>,
    /// `epoch_data_fit + ν·epoch_pde`, per epoch.
    pub epoch_total: Vec<f64>,
    /// Full-dataset risk before the first update.
    pub initial_risk: RiskBreakdown,
    /// Full-dataset risk of the returned parameters.
    pub final_risk: RiskBreakdown,
    /// Largest observed per-sample loss over the training set at the final
    /// parameters (the default loss bound `M` for the generalization terms).
    pub max_sample_loss: f64,
    /// Epoch whose parameters were returned (lowest epoch total).
    pub best_epoch: usize,
    /// Checksum of the returned parameters.
    pub param_checksum: u64,
}

/// PDE residual `P_θ(x)` at a single point.
pub fn pde_residual(
    theta: &Mlp,
    obs: &ObserverMatrices,
    sys: &System,
    x: &[f64],
) -> Result<Vec<f64>> {
    if x.len() != sys.n_x() || theta.n_in() != sys.n_x() || theta.n_out() != obs.n_z {
        return Err(Error::DimensionMismatch(
            "pde_residual: network must map the plant state space to the observer space".into(),
        ));
    }
    let f = sys.eval_dynamics(x)?;
    let h = sys.eval_output(x)?;
    let (y, u) = theta.jvp(x, &f)?;
    let mut p = vec![0.0; obs.n_z];
    for i in 0..obs.n_z {
        let mut bh = 0.0;
        for (j, hj) in h.iter().enumerate() {
            bh += obs.b.get(i, j) * hj;
        }
        p[i] = u[i] - obs.eigenvalues[i] * y[i] - bh;
    }
    Ok(p)
}

/// Batched tangent seeds `f(x)` and outputs `h(x)` for a block of states.
fn dynamics_and_outputs(sys: &System, x: &Mat) -> (Mat, Mat) {
    let mut f = Mat::zeros(x.rows(), sys.n_x());
    let mut h = Mat::zeros(x.rows(), sys.n_y());
    for r in 0..x.rows() {
        sys.dynamics_into(x.row(r), f.row_mut(r));
        sys.output_into(x.row(r), h.row_mut(r));
    }
    (f, h)
}

/// `P = U − Λ⊙Y − H·Bᵀ` rowwise for a diagonal `A`.
fn residual_block(y: &Mat, u: &Mat, obs: &ObserverMatrices, h: &Mat) -> Mat {
    let mut p = Mat::zeros(y.rows(), y.cols());
    for r in 0..y.rows() {
        let (yr, ur, hr, pr) = (y.row(r), u.row(r), h.row(r), r);
        let prow = p.row_mut(pr);
        for i in 0..yr.len() {
            let mut bh = 0.0;
            for (j, hj) in hr.iter().enumerate() {
                bh += obs.b.get(i, j) * hj;
            }
            prow[i] = ur[i] - obs.eigenvalues[i] * yr[i] - bh;
        }
    }
    p
}

/// Full-dataset stage-one risk with the observed per-sample loss maximum.
pub struct RiskEval {
    pub risk: RiskBreakdown,
    pub max_sample_loss: f64,
}

const EVAL_CHUNK: usize = 512;

/// Empirical physics-informed risk over a stage-one dataset.
pub fn empirical_risk_s1(
    theta: &Mlp,
    s1: &DatasetS1,
    obs: &ObserverMatrices,
    sys: &System,
    nu: f64,
) -> Result<RiskBreakdown> {
    Ok(eval_risk_s1(theta, s1, obs, sys, nu)?.risk)
}

pub fn eval_risk_s1(
    theta: &Mlp,
    s1: &DatasetS1,
    obs: &ObserverMatrices,
    sys: &System,
    nu: f64,
) -> Result<RiskEval> {
    let (nd, np) = (s1.n_data(), s1.n_pde());
    if nd == 0 || np == 0 {
        return Err(Error::EmptyInput("stage-one risk needs both dataset partitions".into()));
    }
    let mut sum_data = 0.0;
    let mut max_loss = 0.0f64;
    let mut row = 0;
    while row < nd {
        let chunk = EVAL_CHUNK.min(nd - row);
        let xb = copy_rows_range(&s1.x_data, row, chunk);
        let trace = theta.forward_trace(&xb);
        let y = trace.output();
        for r in 0..chunk {
            let e = math::dist2(y.row(r), s1.z_data.row(row + r));
            sum_data += e;
            max_loss = max_loss.max(e);
        }
        row += chunk;
    }
    let data_fit = sum_data / nd as f64;

    let mut sum_pde = 0.0;
    row = 0;
    while row < np {
        let chunk = EVAL_CHUNK.min(np - row);
        let xb = copy_rows_range(&s1.x_pde, row, chunk);
        let (fb, hb) = dynamics_and_outputs(sys, &xb);
        let trace = theta.forward_trace_dual(&xb, &fb);
        let p = residual_block(trace.output(), trace.output_tangent().unwrap(), obs, &hb);
        for r in 0..chunk {
            let e: f64 = p.row(r).iter().map(|v| v * v).sum();
            sum_pde += e;
            max_loss = max_loss.max(nu * e);
        }
        row += chunk;
    }
    let pde = sum_pde / np as f64;
    let total = data_fit + nu * pde;
    if !total.is_finite() {
        return Err(Error::InvalidArgument("stage-one risk is not finite".into()));
    }
    Ok(RiskEval { risk: RiskBreakdown { total, data_fit, pde }, max_sample_loss: max_loss })
}

/// Empirical mean squared reconstruction risk over a stage-two dataset.
pub fn empirical_risk_s2(eta: &Mlp, s2: &DatasetS2) -> Result<f64> {
    Ok(eval_risk_s2(eta, s2)?.risk.total)
}

pub fn eval_risk_s2(eta: &Mlp, s2: &DatasetS2) -> Result<RiskEval> {
    let n = s2.len();
    if n == 0 {
        return Err(Error::EmptyInput("stage-two risk needs a nonempty dataset".into()));
    }
    let mut sum = 0.0;
    let mut max_loss = 0.0f64;
    let mut row = 0;
    while row < n {
        let chunk = EVAL_CHUNK.min(n - row);
        let zb = copy_rows_range(&s2.z, row, chunk);
        let trace = eta.forward_trace(&zb);
        let xh = trace.output();
        for r in 0..chunk {
            let e = math::dist2(xh.row(r), s2.x.row(row + r));
            sum += e;
            max_loss = max_loss.max(e);
        }
        row += chunk;
    }
    let mse = sum / n as f64;
    if !mse.is_finite() {
        return Err(Error::InvalidArgument("stage-two risk is not finite".into()));
    }
    Ok(RiskEval {
        risk: RiskBreakdown { total: mse, data_fit: mse, pde: 0.0 },
        max_sample_loss: max_loss,
    })
}

fn copy_rows_range(src: &Mat, start: usize, count: usize) -> Mat {
    let mut out = Mat::zeros(count, src.cols());
    for r in 0..count {
        out.row_mut(r).copy_from_slice(src.row(start + r));
    }
    out
}

fn gather_rows(src: &Mat, idx: &[usize]) -> Mat {
    let mut out = Mat::zeros(idx.len(), src.cols());
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).copy_from_slice(src.row(i));
    }
    out
}

/// Adam with optional decoupled weight decay on weight matrices.
struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
    weight_mask: Vec<bool>,
}

impl Adam {
    fn new(n_params: usize, lr: f64, weight_decay: f64, weight_mask: Vec<bool>) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            weight_mask,
        }
    }

    fn step(&mut self, params: &mut Mlp, grad: &FlatGradient) {
        self.t += 1;
        let bc1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        let (m, v) = (&mut self.m, &mut self.v);
        let (b1, b2, eps, lr, wd) = (self.beta1, self.beta2, self.eps, self.lr, self.weight_decay);
        let mask = &self.weight_mask;
        params.visit_params_mut(|i, p| {
            let g = grad.values[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            let mut update = m_hat / (math::sqrt(v_hat) + eps);
            if wd > 0.0 && mask[i] {
                update += wd * *p;
            }
            *p -= lr * update;
        });
    }
}

/// Cyclic minibatch cursor over a per-epoch permutation.
fn batch_indices(perm: &[usize], step: usize, bs: usize) -> Vec<usize> {
    let n = perm.len();
    (0..bs).map(|j| perm[(step * bs + j) % n]).collect()
}

/// Train the forward map on a stage-one dataset.
///
/// Returns the parameters of the epoch with the lowest mean minibatch total
/// loss, together with the loss traces.
pub fn train_forward(
    s1: &DatasetS1,
    obs: &ObserverMatrices,
    sys: &System,
    cfg: &TrainConfig,
) -> Result<(Mlp, TrainReport)> {
    cfg.validate()?;
    let (nd, np) = (s1.n_data(), s1.n_pde());
    if nd == 0 || np == 0 {
        return Err(Error::EmptyInput("training needs both stage-one partitions".into()));
    }

    let sizes = cfg.layer_sizes(sys.n_x(), obs.n_z);
    let mut mlp = Mlp::init(&sizes, cfg.seed)?;
    let initial = eval_risk_s1(&mlp, s1, obs, sys, cfg.nu)?;

    let mut adam =
        Adam::new(mlp.n_params(), cfg.learning_rate, cfg.weight_decay, mlp.weight_mask());
    let mut shuffle_rng = rng::seeded_stream(cfg.seed, 1);

    let bs_d = cfg.batch_size.min(nd);
    let bs_p = cfg.batch_size.min(np);
    let steps = nd.div_ceil(bs_d).max(np.div_ceil(bs_p));

    let mut epoch_data_fit = Vec::with_capacity(cfg.epochs);
    let mut epoch_pde = Vec::with_capacity(cfg.epochs);
    let mut epoch_total = Vec::with_capacity(cfg.epochs);
    let mut best_total = f64::INFINITY;
    let mut best_epoch = 0;
    let mut best_params = mlp.params_to_flat();

    for epoch in 0..cfg.epochs {
        let perm_d = rng::shuffled_indices(&mut shuffle_rng, nd);
        let perm_p = rng::shuffled_indices(&mut shuffle_rng, np);
        let mut acc_data = 0.0;
        let mut acc_pde = 0.0;

        for step in 0..steps {
            let mut grad = FlatGradient::zeros(mlp.n_params());

            // Data-fit term.
            let idx = batch_indices(&perm_d, step, bs_d);
            let xb = gather_rows(&s1.x_data, &idx);
            let zb = gather_rows(&s1.z_data, &idx);
            let trace = mlp.forward_trace(&xb);
            let y = trace.output();
            let mut dy = Mat::zeros(bs_d, y.cols());
            let mut data_loss = 0.0;
            for r in 0..bs_d {
                let (yr, zr) = (y.row(r), zb.row(r));
                let drow = dy.row_mut(r);
                for c in 0..yr.len() {
                    let e = yr[c] - zr[c];
                    data_loss += e * e;
                    drow[c] = 2.0 * e / bs_d as f64;
                }
            }
            data_loss /= bs_d as f64;
            mlp.backward(&trace, &dy, None, &mut grad);

            // Residual term: value always (for the loss trace), gradient only
            // when it carries weight.
            let idx = batch_indices(&perm_p, step, bs_p);
            let xb = gather_rows(&s1.x_pde, &idx);
            let (fb, hb) = dynamics_and_outputs(sys, &xb);
            let trace = mlp.forward_trace_dual(&xb, &fb);
            let p = residual_block(trace.output(), trace.output_tangent().unwrap(), obs, &hb);
            let pde_loss = p.data().iter().map(|v| v * v).sum::<f64>() / bs_p as f64;
            if cfg.nu > 0.0 {
                let scale = 2.0 * cfg.nu / bs_p as f64;
                let mut du = Mat::zeros(bs_p, p.cols());
                let mut dyp = Mat::zeros(bs_p, p.cols());
                for r in 0..bs_p {
                    let prow = p.row(r);
                    let durow = du.row_mut(r);
                    for c in 0..prow.len() {
                        durow[c] = scale * prow[c];
                    }
                    let dyrow = dyp.row_mut(r);
                    for c in 0..prow.len() {
                        dyrow[c] = -obs.eigenvalues[c] * scale * prow[c];
                    }
                }
                mlp.backward(&trace, &dyp, Some(&du), &mut grad);
            }

            let total = data_loss + cfg.nu * pde_loss;
            if !total.is_finite() {
                return Err(Error::TrainDivergence { epoch });
            }
            adam.step(&mut mlp, &grad);
            acc_data += data_loss;
            acc_pde += pde_loss;
        }

        let mean_data = acc_data / steps as f64;
        let mean_pde = acc_pde / steps as f64;
        let mean_total = mean_data + cfg.nu * mean_pde;
        epoch_data_fit.push(mean_data);
        epoch_pde.push(mean_pde);
        epoch_total.push(mean_total);
        if mean_total < best_total {
            best_total = mean_total;
            best_epoch = epoch;
            best_params = mlp.params_to_flat();
        }
    }

    mlp.set_from_flat(&best_params);
    let fin = eval_risk_s1(&mlp, s1, obs, sys, cfg.nu)?;
    let checksum = mlp.checksum();
    Ok((
        mlp,
        TrainReport {
            epoch_data_fit,
            epoch_pde,
            epoch_total,
            initial_risk: initial.risk,
            final_risk: fin.risk,
            max_sample_loss: fin.max_sample_loss,
            best_epoch,
            param_checksum: checksum,
        },
    ))
}

/// Train the inverse map on a stage-two dataset (the forward parameters that
/// produced the dataset are frozen and untouched by construction).
pub fn train_inverse(s2: &DatasetS2, cfg: &TrainConfig) -> Result<(Mlp, TrainReport)> {
    cfg.validate()?;
    let n = s2.len();
    if n == 0 {
        return Err(Error::EmptyInput("training needs a nonempty stage-two dataset".into()));
    }

    let sizes = cfg.layer_sizes(s2.z.cols(), s2.x.cols());
    let mut mlp = Mlp::init(&sizes, cfg.seed)?;
    let initial = eval_risk_s2(&mlp, s2)?;

    let mut adam =
        Adam::new(mlp.n_params(), cfg.learning_rate, cfg.weight_decay, mlp.weight_mask());
    let mut shuffle_rng = rng::seeded_stream(cfg.seed, 1);

    let bs = cfg.batch_size.min(n);
    let steps = n.div_ceil(bs);

    let mut epoch_data_fit = Vec::with_capacity(cfg.epochs);
    let mut best_total = f64::INFINITY;
    let mut best_epoch = 0;
    let mut best_params = mlp.params_to_flat();

    for epoch in 0..cfg.epochs {
        let perm = rng::shuffled_indices(&mut shuffle_rng, n);
        let mut acc = 0.0;
        for step in 0..steps {
            let idx = batch_indices(&perm, step, bs);
            let zb = gather_rows(&s2.z, &idx);
            let xb = gather_rows(&s2.x, &idx);
            let trace = mlp.forward_trace(&zb);
            let y = trace.output();
            let mut dy = Mat::zeros(bs, y.cols());
            let mut loss = 0.0;
            for r in 0..bs {
                let (yr, xr) = (y.row(r), xb.row(r));
                let drow = dy.row_mut(r);
                for c in 0..yr.len() {
                    let e = yr[c] - xr[c];
                    loss += e * e;
                    drow[c] = 2.0 * e / bs as f64;
                }
            }
            loss /= bs as f64;
            if !loss.is_finite() {
                return Err(Error::TrainDivergence { epoch });
            }
            let mut grad = FlatGradient::zeros(mlp.n_params());
            mlp.backward(&trace, &dy, None, &mut grad);
            adam.step(&mut mlp, &grad);
            acc += loss;
        }
        let mean = acc / steps as f64;
        epoch_data_fit.push(mean);
        if mean < best_total {
            best_total = mean;
            best_epoch = epoch;
            best_params = mlp.params_to_flat();
        }
    }

    mlp.set_from_flat(&best_params);
    let fin = eval_risk_s2(&mlp, s2)?;
    let checksum = mlp.checksum();
    let epochs = cfg.epochs;
    Ok((
        mlp,
        TrainReport {
            epoch_total: epoch_data_fit.clone(),
            epoch_data_fit,
            epoch_pde: vec![0.0; epochs],
            initial_risk: initial.risk,
            final_risk: fin.risk,
            max_sample_loss: fin.max_sample_loss,
            best_epoch,
            param_checksum: checksum,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observer::build_observer;

    fn toy_obs() -> ObserverMatrices {
        build_observer(2, 1, -2.0, -0.5).unwrap()
    }

    #[test]
    fn zero_network_residual_is_minus_bh() {
        let sys = System::duffing();
        let obs = toy_obs();
        let mut theta = Mlp::init(&[2, 4, 5], 1).unwrap();
        for w in &mut theta.weights {
            w.fill(0.0);
        }
        let x = [0.7, -0.3];
        let p = pde_residual(&theta, &obs, &sys, &x).unwrap();
        // All θ-terms vanish, leaving −B·h(x) with h = x₁.
        for pi in &p {
            assert!((pi - (-0.7)).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_network_residual_at_lorenz_origin() {
        let sys = System::lorenz();
        let obs = build_observer(3, 1, -2.0, -0.5).unwrap();
        let mut theta = Mlp::init(&[3, 4, 7], 1).unwrap();
        for w in &mut theta.weights {
            w.fill(0.0);
        }
        let p = pde_residual(&theta, &obs, &sys, &[0.0, 0.0, 0.0]).unwrap();
        assert!(p.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_net_residual_matches_hand_evaluation() {
        // θ linear: T̂(x) = Wx, so P(x) = W f(x) − Λ W x − B h(x).
        let sys = System::duffing();
        let obs = toy_obs();
        let w = Mat::from_vec(
            5,
            2,
            alloc::vec![0.5, -0.25, 1.0, 0.75, -0.5, 0.25, 0.0, 1.5, 2.0, -1.0],
        );
        let theta = Mlp {
            layer_sizes: alloc::vec![2, 5],
            weights: alloc::vec![w.clone()],
            biases: alloc::vec![alloc::vec![0.0; 5]],
            activation: crate::nn::Activation::Tanh,
        };
        let x = [1.0, 1.0];
        let f = [1.0, -1.0]; // x₂³, −x₁
        let h = 1.0;
        let p = pde_residual(&theta, &obs, &sys, &x).unwrap();
        for i in 0..5 {
            let wf = w.get(i, 0) * f[0] + w.get(i, 1) * f[1];
            let wx = w.get(i, 0) * x[0] + w.get(i, 1) * x[1];
            let expect = wf - obs.eigenvalues[i] * wx - h;
            assert!((p[i] - expect).abs() < 1e-12, "component {i}");
        }
    }

    fn tiny_s1(n: usize) -> DatasetS1 {
        let mut x = Mat::zeros(n, 2);
        let mut z = Mat::zeros(n, 5);
        for i in 0..n {
            let t = i as f64 / n as f64;
            x.row_mut(i).copy_from_slice(&[t, 1.0 - t]);
            for c in 0..5 {
                z.set(i, c, 0.1 * (i + c) as f64);
            }
        }
        DatasetS1 {
            x_data: x.clone(),
            z_data: z,
            x_pde: x,
            k_star: 0,
            t_star_max: 0.0,
            tau: n - 1,
            n_trajectories: 1,
            n_pde_trajectories: 1,
        }
    }

    #[test]
    fn risk_decomposition_is_exact() {
        let sys = System::duffing();
        let obs = toy_obs();
        let theta = Mlp::init(&[2, 8, 5], 5).unwrap();
        let s1 = tiny_s1(7);
        let r = empirical_risk_s1(&theta, &s1, &obs, &sys, 0.7).unwrap();
        assert_eq!(r.total, r.data_fit + 0.7 * r.pde);
    }

    #[test]
    fn perfect_fit_with_zero_nu_has_zero_risk() {
        let sys = System::duffing();
        let obs = toy_obs();
        let theta = Mlp::init(&[2, 4, 5], 2).unwrap();
        let mut s1 = tiny_s1(6);
        // Relabel so the network is exactly right.
        for i in 0..6 {
            let y = theta.forward(s1.x_data.row(i)).unwrap();
            s1.z_data.row_mut(i).copy_from_slice(&y);
        }
        let r = empirical_risk_s1(&theta, &s1, &obs, &sys, 0.0).unwrap();
        assert_eq!(r.total, 0.0);
        assert_eq!(r.data_fit, 0.0);
    }

    #[test]
    fn single_pair_risk_by_hand() {
        // Zero network, one data pair, one collocation point:
        // total = ‖z‖² + ν‖B h(x)‖².
        let sys = System::duffing();
        let obs = toy_obs();
        let mut theta = Mlp::init(&[2, 3, 5], 3).unwrap();
        for w in &mut theta.weights {
            w.fill(0.0);
        }
        let x = Mat::from_vec(1, 2, alloc::vec![0.5, -0.5]);
        let mut z = Mat::zeros(1, 5);
        for c in 0..5 {
            z.set(0, c, 0.2 * (c + 1) as f64);
        }
        let s1 = DatasetS1 {
            x_data: x.clone(),
            z_data: z.clone(),
            x_pde: x,
            k_star: 0,
            t_star_max: 0.0,
            tau: 0,
            n_trajectories: 1,
            n_pde_trajectories: 1,
        };
        let nu = 2.0;
        let r = empirical_risk_s1(&theta, &s1, &obs, &sys, nu).unwrap();
        let z_sq: f64 = z.data().iter().map(|v| v * v).sum();
        let bh_sq = 5.0 * 0.25; // B h(x) = (0.5, …, 0.5)
        assert!((r.data_fit - z_sq).abs() < 1e-12);
        assert!((r.pde - bh_sq).abs() < 1e-12);
        assert!((r.total - (z_sq + nu * bh_sq)).abs() < 1e-12);
    }

    #[test]
    fn risk_s2_arithmetic() {
        // Two pairs with reconstruction errors of norm 1 and 2 → (1+4)/2.
        let eta = {
            let mut net = Mlp::init(&[2, 2], 1).unwrap();
            for w in &mut net.weights {
                w.fill(0.0);
            }
            net
        };
        let z = Mat::zeros(2, 2);
        let x = Mat::from_rows(&[alloc::vec![1.0, 0.0], alloc::vec![0.0, 2.0]]);
        let s2 = DatasetS2 { z, x };
        let r = empirical_risk_s2(&eta, &s2).unwrap();
        assert!((r - 2.5).abs() < 1e-15);
    }

    #[test]
    fn empty_partitions_are_rejected() {
        let sys = System::duffing();
        let obs = toy_obs();
        let theta = Mlp::init(&[2, 3, 5], 3).unwrap();
        let mut s1 = tiny_s1(4);
        s1.x_pde = Mat::zeros(0, 2);
        assert!(matches!(
            empirical_risk_s1(&theta, &s1, &obs, &sys, 1.0),
            Err(Error::EmptyInput(_))
        ));
        let s2 = DatasetS2 { z: Mat::zeros(0, 5), x: Mat::zeros(0, 2) };
        assert!(empirical_risk_s2(&theta, &s2).is_err());
    }

    #[test]
    fn zero_epochs_is_a_config_error() {
        let cfg = TrainConfig {
            hidden_layers: 1,
            layer_size: 4,
            learning_rate: 1e-3,
            nu: 1.0,
            epochs: 0,
            batch_size: 8,
            seed: 1,
            weight_decay: 0.0,
        };
        assert!(cfg.validate().is_err());
        let s2 = DatasetS2 { z: Mat::zeros(3, 5), x: Mat::zeros(3, 2) };
        assert!(train_inverse(&s2, &cfg).is_err());
    }
}
