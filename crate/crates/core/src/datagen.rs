//! Synthetic training data.
//!
//! Stage one pairs plant states with lifted filter states: sample initial
//! conditions, simulate the plant and the output-driven filter over a long
//! horizon, then drop every filter sample before the truncation index so the
//! surviving pairs satisfy `z(t_k) ≈ T(x(t_k))` — the filter has contracted
//! onto the graph of `T` and the unknowable initial condition no longer
//! matters. Collocation trajectories for the residual term are kept whole:
//! the PDE must hold at every visited state, no labels involved.
//!
//! Stage two is generated *after* the forward net is trained and frozen:
//! inputs `x'` are drawn fresh (points or trajectories) and features are
//! `z' = T̂_θ(x')`, so the inverse net learns against exactly the
//! distribution it will see online.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::math;
use crate::nn::Mlp;
use crate::observer::{truncation_index, truncation_time, ObserverMatrices};
use crate::ode::{integrate_driven, step_count};
use crate::rng::{self, SeededRng};
use crate::system::{output_sequence, simulate_plant, System};

/// Labeled pairs plus collocation points for the first training stage.
#[derive(Debug, Clone)]
pub struct DatasetS1 {
    /// Plant states of the retained pairs, `N_data × n_x`.
    pub x_data: Mat,
    /// Filter states of the retained pairs, `N_data × n_z`.
    pub z_data: Mat,
    /// Collocation points, `N_pde × n_x`.
    pub x_pde: Mat,
    /// Truncation index actually applied.
    pub k_star: usize,
    /// Largest truncation time over the sampled filter initial conditions
    /// (0 when they are all zero).
    pub t_star_max: f64,
    /// Samples per trajectory after index 0 (`τ`): each trajectory carries
    /// `τ + 1` samples.
    pub tau: usize,
    pub n_trajectories: usize,
    pub n_pde_trajectories: usize,
}

impl DatasetS1 {
    pub fn n_data(&self) -> usize {
        self.x_data.rows()
    }

    pub fn n_pde(&self) -> usize {
        self.x_pde.rows()
    }
}

/// Feature/state pairs for the inverse-map stage.
#[derive(Debug, Clone)]
pub struct DatasetS2 {
    /// Features `z' = T̂_θ(x')`, `N₂ × n_z`.
    pub z: Mat,
    /// States `x'`, `N₂ × n_x`.
    pub x: Mat,
}

impl DatasetS2 {
    pub fn len(&self) -> usize {
        self.z.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.z.rows() == 0
    }
}

/// Filter initialization for data generation.
#[derive(Debug, Clone, PartialEq)]
pub enum ZInit {
    /// Start every filter trajectory at the origin. The initial-condition
    /// envelope `‖e^{At}z0‖` is then identically zero.
    Zero,
    /// Sample uniformly from a box.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

/// How the truncation index is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Truncation {
    /// `k* = ⌈max_i t*(ε, z0ⁱ)/dt⌉` from the contraction envelope.
    Formula,
    /// `k*` as a fraction of the trajectory length `τ` (rounded).
    FixedFraction(f64),
    /// Explicit sample index.
    FixedIndex(usize),
}

/// Inputs to stage-one generation.
#[derive(Debug, Clone)]
pub struct DatagenConfig {
    /// Labeled trajectories.
    pub p: usize,
    /// Collocation trajectories.
    pub q: usize,
    pub t_end: f64,
    pub dt: f64,
    /// Internal integrator substeps per sampling interval.
    pub substeps: usize,
    /// Contraction tolerance ε for the truncation-time formula.
    pub eps: f64,
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
    pub z_init: ZInit,
    pub truncation: Truncation,
    pub seed: u64,
}

/// i.i.d. uniform samples from the box `[lo, hi)`, one point per row.
pub fn sample_box(count: usize, lo: &[f64], hi: &[f64], rng: &mut SeededRng) -> Result<Mat> {
    if lo.len() != hi.len() {
        return Err(Error::DimensionMismatch(format!(
            "box bounds have lengths {} and {}",
            lo.len(),
            hi.len()
        )));
    }
    for (i, (l, h)) in lo.iter().zip(hi).enumerate() {
        if !(l < h) {
            return Err(Error::InvalidArgument(format!(
                "degenerate box: lo[{i}] = {l} must be < hi[{i}] = {h}"
            )));
        }
    }
    let mut m = Mat::zeros(count, lo.len());
    for r in 0..count {
        let row = m.row_mut(r);
        for (c, v) in row.iter_mut().enumerate() {
            *v = rng::uniform(rng, lo[c], hi[c]);
        }
    }
    Ok(m)
}

/// Generate the stage-one dataset.
///
/// The filter trajectories are produced by the same sampled-output-driven
/// integration the deployed observer uses, so training labels and online
/// filter states come from one discretization.
pub fn generate_s1(sys: &System, obs: &ObserverMatrices, cfg: &DatagenConfig) -> Result<DatasetS1> {
    if cfg.p == 0 {
        return Err(Error::InvalidArgument("at least one labeled trajectory is required".into()));
    }
    if !(cfg.dt > 0.0) || cfg.t_end < cfg.dt {
        return Err(Error::InvalidArgument(format!(
            "invalid horizon: t_end = {}, dt = {}",
            cfg.t_end, cfg.dt
        )));
    }
    let n_x = sys.n_x();
    if cfg.x_lo.len() != n_x || cfg.x_hi.len() != n_x {
        return Err(Error::DimensionMismatch(format!(
            "state box has dimension {}, system expects {n_x}",
            cfg.x_lo.len()
        )));
    }

    let tau = step_count(cfg.t_end, cfg.dt);
    let mut rng = rng::seeded(cfg.seed);

    // Sampling order is fixed: plant initials, filter initials, collocation
    // initials — so datasets are a pure function of (config, seed).
    let x0s = sample_box(cfg.p, &cfg.x_lo, &cfg.x_hi, &mut rng)?;
    let z0s = match &cfg.z_init {
        ZInit::Zero => Mat::zeros(cfg.p, obs.n_z),
        ZInit::Box { lo, hi } => {
            if lo.len() != obs.n_z || hi.len() != obs.n_z {
                return Err(Error::DimensionMismatch(format!(
                    "filter box has dimension {}, observer expects {}",
                    lo.len(),
                    obs.n_z
                )));
            }
            sample_box(cfg.p, lo, hi, &mut rng)?
        }
    };
    let x0s_pde = sample_box(cfg.q, &cfg.x_lo, &cfg.x_hi, &mut rng)?;

    // Largest truncation time over the drawn filter initial conditions;
    // zero-norm initials need no transient at all.
    let mut t_star_max = 0.0f64;
    for i in 0..cfg.p {
        let nz = math::norm2(z0s.row(i));
        if nz > 0.0 {
            let t = truncation_time(cfg.eps, nz, obs.cond_v, obs.lambda_min)?;
            t_star_max = t_star_max.max(t);
        }
    }
    let k_star = match cfg.truncation {
        Truncation::Formula => truncation_index(t_star_max, cfg.dt),
        Truncation::FixedFraction(f) => {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidArgument(format!(
                    "truncation fraction must lie in [0, 1], got {f}"
                )));
            }
            math::round(f * tau as f64) as usize
        }
        Truncation::FixedIndex(k) => k,
    };
    if k_star > tau {
        return Err(Error::InvalidArgument(format!(
            "horizon too short for truncation: k* = {k_star} exceeds τ = {tau}"
        )));
    }

    let kept = tau - k_star + 1;
    let a = obs.a_mat();
    let mut x_data = Mat::zeros(cfg.p * kept, n_x);
    let mut z_data = Mat::zeros(cfg.p * kept, obs.n_z);
    for i in 0..cfg.p {
        let xt = simulate_plant(sys, x0s.row(i), tau, cfg.dt, cfg.substeps, None)?;
        let y = output_sequence(sys, &xt);
        let zt = integrate_driven(&a, &obs.b, z0s.row(i), &y, cfg.dt)?;
        for (j, k) in (k_star..=tau).enumerate() {
            x_data.row_mut(i * kept + j).copy_from_slice(xt.state(k));
            z_data.row_mut(i * kept + j).copy_from_slice(zt.state(k));
        }
    }

    let mut x_pde = Mat::zeros(cfg.q * tau, n_x);
    for j in 0..cfg.q {
        let xt = simulate_plant(sys, x0s_pde.row(j), tau, cfg.dt, cfg.substeps, None)?;
        for k in 0..tau {
            x_pde.row_mut(j * tau + k).copy_from_slice(xt.state(k));
        }
    }

    Ok(DatasetS1 {
        x_data,
        z_data,
        x_pde,
        k_star,
        t_star_max,
        tau,
        n_trajectories: cfg.p,
        n_pde_trajectories: cfg.q,
    })
}

/// How stage-two inputs are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum S2Mode {
    /// i.i.d. uniform points in the state box.
    IidPoints,
    /// Samples of plant trajectories started uniformly in the state box.
    Trajectories,
}

/// Generate the stage-two dataset from a frozen forward map.
#[allow(clippy::too_many_arguments)]
pub fn generate_s2(
    theta: &Mlp,
    sys: &System,
    n2: usize,
    x_lo: &[f64],
    x_hi: &[f64],
    mode: S2Mode,
    dt: f64,
    t_end: f64,
    substeps: usize,
    seed: u64,
) -> Result<DatasetS2> {
    let n_x = sys.n_x();
    if theta.n_in() != n_x {
        return Err(Error::DimensionMismatch(format!(
            "forward map expects inputs of dimension {}, system has {n_x}",
            theta.n_in()
        )));
    }
    let mut rng = rng::seeded(seed);
    let x = match mode {
        S2Mode::IidPoints => sample_box(n2, x_lo, x_hi, &mut rng)?,
        S2Mode::Trajectories => {
            if n2 == 0 {
                Mat::zeros(0, n_x)
            } else {
                let tau = step_count(t_end, dt);
                let per_traj = tau + 1;
                let n_traj = n2.div_ceil(per_traj);
                let x0s = sample_box(n_traj, x_lo, x_hi, &mut rng)?;
                let mut x = Mat::zeros(n2, n_x);
                let mut filled = 0;
                'outer: for i in 0..n_traj {
                    let traj = simulate_plant(sys, x0s.row(i), tau, dt, substeps, None)?;
                    for k in 0..traj.len() {
                        if filled == n2 {
                            break 'outer;
                        }
                        x.row_mut(filled).copy_from_slice(traj.state(k));
                        filled += 1;
                    }
                }
                x
            }
        }
    };

    let mut z = Mat::zeros(n2, theta.n_out());
    for r in 0..n2 {
        let zr = theta.forward(x.row(r))?;
        z.row_mut(r).copy_from_slice(&zr);
    }
    Ok(DatasetS2 { z, x })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observer::build_observer;
    use alloc::vec;

    #[test]
    fn sample_box_basics() {
        let mut r = rng::seeded(1);
        let m = sample_box(0, &[-1.0], &[1.0], &mut r).unwrap();
        assert_eq!(m.rows(), 0);
        assert!(sample_box(5, &[1.0], &[1.0], &mut r).is_err());
        assert!(sample_box(5, &[2.0], &[1.0], &mut r).is_err());
    }

    #[test]
    fn sample_box_mean() {
        let mut r = rng::seeded(2);
        let m = sample_box(100_000, &[-1.0, -1.0], &[1.0, 1.0], &mut r).unwrap();
        for c in 0..2 {
            let mean: f64 = (0..m.rows()).map(|i| m.get(i, c)).sum::<f64>() / m.rows() as f64;
            assert!(mean.abs() < 0.02, "coordinate {c} mean {mean}");
        }
    }

    fn duffing_cfg(p: usize, q: usize, seed: u64) -> DatagenConfig {
        DatagenConfig {
            p,
            q,
            t_end: 5.0,
            dt: 0.1,
            substeps: 1,
            eps: 1e-4,
            x_lo: vec![-1.0, -1.0],
            x_hi: vec![1.0, 1.0],
            z_init: ZInit::Zero,
            truncation: Truncation::FixedFraction(0.1),
            seed,
        }
    }

    #[test]
    fn counts_follow_the_formula() {
        let sys = System::duffing();
        let obs = build_observer(2, 1, -2.0, -0.5).unwrap();
        let cfg = duffing_cfg(4, 3, 7);
        let ds = generate_s1(&sys, &obs, &cfg).unwrap();
        // τ = 50, k* = 5 → 46 kept per trajectory.
        assert_eq!(ds.tau, 50);
        assert_eq!(ds.k_star, 5);
        assert_eq!(ds.n_data(), 4 * 46);
        assert_eq!(ds.n_pde(), 3 * 50);
    }

    #[test]
    fn formula_truncation_respects_envelope() {
        let sys = System::duffing();
        let obs = build_observer(2, 1, -2.0, -0.5).unwrap();
        let mut cfg = duffing_cfg(3, 1, 11);
        cfg.t_end = 60.0;
        cfg.z_init = ZInit::Box { lo: vec![-1.0; 5], hi: vec![1.0; 5] };
        cfg.truncation = Truncation::Formula;
        let ds = generate_s1(&sys, &obs, &cfg).unwrap();
        assert!(ds.t_star_max > 0.0);
        // Retained samples all sit past the worst-case settling time.
        assert!(ds.k_star as f64 * cfg.dt >= ds.t_star_max);
    }

    #[test]
    fn horizon_too_short_is_an_error() {
        let sys = System::duffing();
        let obs = build_observer(2, 1, -2.0, -0.5).unwrap();
        let mut cfg = duffing_cfg(2, 1, 3);
        cfg.truncation = Truncation::FixedIndex(51);
        assert!(generate_s1(&sys, &obs, &cfg).is_err());
    }

    #[test]
    fn datasets_are_reproducible() {
        let sys = System::duffing();
        let obs = build_observer(2, 1, -2.0, -0.5).unwrap();
        let a = generate_s1(&sys, &obs, &duffing_cfg(3, 2, 13)).unwrap();
        let b = generate_s1(&sys, &obs, &duffing_cfg(3, 2, 13)).unwrap();
        assert_eq!(a.x_data, b.x_data);
        assert_eq!(a.z_data, b.z_data);
        assert_eq!(a.x_pde, b.x_pde);
        let c = generate_s1(&sys, &obs, &duffing_cfg(3, 2, 14)).unwrap();
        assert_ne!(a.x_data, c.x_data);
    }

    #[test]
    fn s2_features_are_forward_images() {
        let sys = System::duffing();
        let theta = Mlp::init(&[2, 8, 5], 3).unwrap();
        let ds =
            generate_s2(&theta, &sys, 50, &[-1.0, -1.0], &[1.0, 1.0], S2Mode::IidPoints, 0.1, 5.0, 1, 9)
                .unwrap();
        assert_eq!(ds.len(), 50);
        for r in 0..ds.len() {
            assert_eq!(ds.z.row(r), theta.forward(ds.x.row(r)).unwrap().as_slice());
        }
        let empty =
            generate_s2(&theta, &sys, 0, &[-1.0, -1.0], &[1.0, 1.0], S2Mode::IidPoints, 0.1, 5.0, 1, 9)
                .unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn s2_trajectory_mode_counts() {
        let sys = System::duffing();
        let theta = Mlp::init(&[2, 8, 5], 3).unwrap();
        let ds = generate_s2(
            &theta,
            &sys,
            75,
            &[-1.0, -1.0],
            &[1.0, 1.0],
            S2Mode::Trajectories,
            0.1,
            5.0,
            1,
            9,
        )
        .unwrap();
        assert_eq!(ds.len(), 75);
    }
}
