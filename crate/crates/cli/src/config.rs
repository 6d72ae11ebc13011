//! Pipeline configuration: JSON schema, per-system defaults, and overrides.
//!
//! Precedence is command line > config file > per-system defaults. The
//! defaults reproduce the benchmark setup: initial conditions uniform in
//! `[-1,1]^{n_x}` (100 trajectories for the planar systems, 200 for the
//! three-dimensional ones), horizon 50 s at 0.1 s sampling, truncation at
//! 10 % of the trajectory length with ε = 1e−4, eigenvalues spread over
//! `[−2, −0.5]` with all-ones `B`, and the published per-system network
//! sizes (learning rate 1e−3, ν = 1, 15 epochs for both maps).
//!
//! `KKL_SEED` in the environment overrides every seed in the run: seed `s`
//! maps to data `s`, stage-two `s+1`, forward training `s+2`, inverse
//! training `s+3`, test initial conditions `s+4`, noise `s+5`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use kkl_core::datagen::{DatagenConfig, S2Mode, Truncation, ZInit};
use kkl_core::observer::{build_observer, ObserverMatrices};
use kkl_core::system::{system_by_name, System};
use kkl_core::train::TrainConfig;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub system: Option<String>,
    #[serde(default)]
    pub params: ParamOverrides,
    #[serde(default)]
    pub observer: ObserverSection,
    #[serde(default)]
    pub datagen: DatagenSection,
    #[serde(default)]
    pub train_forward: TrainSection,
    #[serde(default)]
    pub train_inverse: TrainSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    pub out_dir: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub mu: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub r: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ObserverSection {
    pub lambda_lo: Option<f64>,
    pub lambda_hi: Option<f64>,
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DatagenSection {
    pub p: Option<usize>,
    pub q: Option<usize>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub substeps: Option<usize>,
    /// Per-coordinate `[lo, hi]` pairs for the plant initial-condition box.
    pub x_box: Option<Vec<[f64; 2]>>,
    /// Filter initial-condition box; absent means start the filter at zero.
    pub z_box: Option<Vec<[f64; 2]>>,
    /// Truncation as a fraction of the trajectory length. Mutually exclusive
    /// with `truncation_index`; absent with a `z_box` means the settling-time
    /// formula decides.
    pub truncation_fraction: Option<f64>,
    pub truncation_index: Option<usize>,
    pub seed: Option<u64>,
    /// Stage-two sample count; defaults to `N_data`.
    pub n2: Option<usize>,
    /// `iid_points` or `trajectories`.
    pub s2_mode: Option<String>,
    pub s2_seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub hidden_layers: Option<usize>,
    pub layer_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub nu: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub seed: Option<u64>,
    pub weight_decay: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    pub n_trajectories: Option<usize>,
    pub test_box: Option<Vec<[f64; 2]>>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub substeps: Option<usize>,
    pub w_std: Option<f64>,
    pub v_std: Option<f64>,
    pub noise_seed: Option<u64>,
    pub ic_seed: Option<u64>,
    /// Metric cutoff (default 0: uncut metrics).
    pub t_cutoff: Option<f64>,
    /// Steady-state window start for bound checks (default `t_end/2`).
    pub tail_cutoff: Option<f64>,
    pub delta: Option<f64>,
    /// Gain of the linear uncertainty-effect map ψ (default 1: identity).
    pub psi_gain: Option<f64>,
    /// Pseudo-dimension overrides; default to the parameter counts.
    pub d_theta: Option<f64>,
    pub d_eta: Option<f64>,
    /// Envelope-check burn-in as a fraction of the horizon.
    pub burn_in_frac: Option<f64>,
}

/// Fully resolved configuration (defaults applied, overrides merged).
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub system_name: String,
    #[serde(skip)]
    pub system: System,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub eps: f64,
    pub p: usize,
    pub q: usize,
    pub t_end: f64,
    pub dt: f64,
    pub substeps: usize,
    pub x_box: Vec<[f64; 2]>,
    pub z_box: Option<Vec<[f64; 2]>>,
    pub truncation_fraction: Option<f64>,
    pub truncation_index: Option<usize>,
    pub data_seed: u64,
    pub n2: Option<usize>,
    pub s2_mode: String,
    pub s2_seed: u64,
    pub train_forward: TrainConfig2,
    pub train_inverse: TrainConfig2,
    pub eval: EvalResolved,
    pub out_dir: String,
}

/// Serializable mirror of the core training config.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainConfig2 {
    pub hidden_layers: usize,
    pub layer_size: usize,
    pub learning_rate: f64,
    pub nu: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub weight_decay: f64,
}

impl TrainConfig2 {
    pub fn to_core(&self) -> TrainConfig {
        TrainConfig {
            hidden_layers: self.hidden_layers,
            layer_size: self.layer_size,
            learning_rate: self.learning_rate,
            nu: self.nu,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalResolved {
    pub n_trajectories: usize,
    pub test_box: Vec<[f64; 2]>,
    pub t_end: f64,
    pub dt: f64,
    pub substeps: usize,
    pub w_std: f64,
    pub v_std: f64,
    pub noise_seed: u64,
    pub ic_seed: u64,
    pub t_cutoff: f64,
    pub tail_cutoff: f64,
    pub delta: f64,
    pub psi_gain: f64,
    pub d_theta: Option<f64>,
    pub d_eta: Option<f64>,
    pub burn_in_frac: f64,
}

/// Published per-system training sizes.
fn table_defaults(name: &str) -> (usize, usize, usize) {
    // (hidden layers, layer size, labeled trajectories)
    match name {
        "duffing" => (3, 150, 100),
        "vanderpol" => (2, 350, 100),
        "rossler" => (3, 250, 200),
        "lorenz" => (2, 350, 200),
        _ => (3, 150, 100),
    }
}

fn default_v_std(name: &str) -> f64 {
    match name {
        "lorenz" => 2.0,
        _ => 0.1,
    }
}

fn apply_params(system: System, p: &ParamOverrides) -> Result<System> {
    let reject = |field: &str, sys: &str| {
        Err(CliError::Config(format!("params.{field} does not apply to system '{sys}'")))
    };
    match system {
        System::ReverseDuffing => {
            if p.mu.is_some()
                || p.a.is_some()
                || p.b.is_some()
                || p.c.is_some()
                || p.p.is_some()
                || p.q.is_some()
                || p.r.is_some()
            {
                return reject("*", "duffing");
            }
            Ok(System::ReverseDuffing)
        }
        System::VanDerPol { mu } => {
            if p.a.is_some() || p.b.is_some() || p.c.is_some() {
                return reject("a/b/c", "vanderpol");
            }
            Ok(System::VanDerPol { mu: p.mu.unwrap_or(mu) })
        }
        System::Rossler { a, b, c } => {
            if p.mu.is_some() {
                return reject("mu", "rossler");
            }
            Ok(System::Rossler {
                a: p.a.unwrap_or(a),
                b: p.b.unwrap_or(b),
                c: p.c.unwrap_or(c),
            })
        }
        System::Lorenz { p: pp, q, r } => {
            if p.mu.is_some() {
                return reject("mu", "lorenz");
            }
            Ok(System::Lorenz {
                p: p.p.unwrap_or(pp),
                q: p.q.unwrap_or(q),
                r: p.r.unwrap_or(r),
            })
        }
    }
}

fn unit_box(n: usize) -> Vec<[f64; 2]> {
    vec![[-1.0, 1.0]; n]
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<ConfigFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("cannot parse config {}: {e}", path.display())))
    }

    /// Apply defaults and produce a fully resolved configuration.
    ///
    /// `system_flag` and `seed_flag` come from the command line and take
    /// precedence; `KKL_SEED` (checked here) behaves like `seed_flag`.
    pub fn resolve(
        &self,
        system_flag: Option<&str>,
        out_flag: Option<&str>,
        seed_flag: Option<u64>,
    ) -> Result<Resolved> {
        let name = system_flag
            .map(str::to_owned)
            .or_else(|| self.system.clone())
            .ok_or_else(|| CliError::Config("missing field: system".into()))?;
        let base = system_by_name(&name).ok_or_else(|| {
            CliError::Config(format!(
                "system: unknown name '{name}' (expected duffing | vanderpol | rossler | lorenz)"
            ))
        })?;
        let system = apply_params(base, &self.params)?;
        let n_x = system.n_x();

        let env_seed = match std::env::var("KKL_SEED") {
            Ok(v) => Some(v.parse::<u64>().map_err(|_| {
                CliError::Config(format!("KKL_SEED must be an unsigned integer, got '{v}'"))
            })?),
            Err(_) => None,
        };
        let master = seed_flag.or(env_seed);
        let seed = |offset: u64, fallback: u64| master.map(|s| s + offset).unwrap_or(fallback);

        let (hidden, width, _) = table_defaults(&name);
        let d = &self.datagen;
        let t_end = d.t_end.unwrap_or(50.0);
        let dt = d.dt.unwrap_or(0.1);
        let substeps = d.substeps.unwrap_or_else(|| system.default_substeps());

        if d.truncation_fraction.is_some() && d.truncation_index.is_some() {
            return Err(CliError::Config(
                "datagen.truncation_fraction and datagen.truncation_index are mutually exclusive"
                    .into(),
            ));
        }
        let x_box = d.x_box.clone().unwrap_or_else(|| unit_box(n_x));
        if x_box.len() != n_x {
            return Err(CliError::Config(format!(
                "datagen.x_box has {} coordinates, system '{name}' has {n_x}",
                x_box.len()
            )));
        }

        let train = |sec: &TrainSection, seed_default: u64| TrainConfig2 {
            hidden_layers: sec.hidden_layers.unwrap_or(hidden),
            layer_size: sec.layer_size.unwrap_or(width),
            learning_rate: sec.learning_rate.unwrap_or(1e-3),
            nu: sec.nu.unwrap_or(1.0),
            epochs: sec.epochs.unwrap_or(15),
            batch_size: sec.batch_size.unwrap_or(256),
            seed: sec.seed.unwrap_or(seed_default),
            weight_decay: sec.weight_decay.unwrap_or(0.0),
        };
        let mut train_forward = train(&self.train_forward, seed(2, 2001));
        // The residual weight belongs to stage one; stage two has no
        // collocation term.
        let mut train_inverse = train(&self.train_inverse, seed(3, 2002));
        train_inverse.nu = 0.0;
        if master.is_some() {
            train_forward.seed = seed(2, 0);
            train_inverse.seed = seed(3, 0);
        }

        let e = &self.evaluate;
        let eval_t_end = e.t_end.unwrap_or(t_end);
        let eval = EvalResolved {
            n_trajectories: e.n_trajectories.unwrap_or(100),
            test_box: e.test_box.clone().unwrap_or_else(|| unit_box(n_x)),
            t_end: eval_t_end,
            dt: e.dt.unwrap_or(dt),
            substeps: e.substeps.unwrap_or(substeps),
            w_std: e.w_std.unwrap_or(0.0),
            v_std: e.v_std.unwrap_or_else(|| default_v_std(&name)),
            noise_seed: seed(5, e.noise_seed.unwrap_or(3001)),
            ic_seed: seed(4, e.ic_seed.unwrap_or(3002)),
            t_cutoff: e.t_cutoff.unwrap_or(0.0),
            tail_cutoff: e.tail_cutoff.unwrap_or(eval_t_end / 2.0),
            delta: e.delta.unwrap_or(0.05),
            psi_gain: e.psi_gain.unwrap_or(1.0),
            d_theta: e.d_theta,
            d_eta: e.d_eta,
            burn_in_frac: e.burn_in_frac.unwrap_or(0.1),
        };
        if eval.test_box.len() != n_x {
            return Err(CliError::Config(format!(
                "evaluate.test_box has {} coordinates, system '{name}' has {n_x}",
                eval.test_box.len()
            )));
        }
        if master.is_some() {
            // KKL_SEED/--seed overrides every seed in the run.
            return Ok(Resolved {
                data_seed: seed(0, 0),
                s2_seed: seed(1, 0),
                ..self.resolve_inner(
                    name,
                    system,
                    t_end,
                    dt,
                    substeps,
                    x_box,
                    train_forward,
                    train_inverse,
                    eval,
                    out_flag,
                )?
            });
        }
        let mut resolved = self.resolve_inner(
            name,
            system,
            t_end,
            dt,
            substeps,
            x_box,
            train_forward,
            train_inverse,
            eval,
            out_flag,
        )?;
        resolved.data_seed = d.seed.unwrap_or(1001);
        resolved.s2_seed = d.s2_seed.unwrap_or(1002);
        Ok(resolved)
    }

    #[allow(clippy::too_many_arguments)]
    fn resolve_inner(
        &self,
        name: String,
        system: System,
        t_end: f64,
        dt: f64,
        substeps: usize,
        x_box: Vec<[f64; 2]>,
        train_forward: TrainConfig2,
        train_inverse: TrainConfig2,
        eval: EvalResolved,
        out_flag: Option<&str>,
    ) -> Result<Resolved> {
        let d = &self.datagen;
        let (_, _, p_default) = table_defaults(&name);
        let p = d.p.unwrap_or(p_default);
        let default_out = format!("runs/{name}");
        let s2_mode = d.s2_mode.clone().unwrap_or_else(|| "iid_points".into());
        if s2_mode != "iid_points" && s2_mode != "trajectories" {
            return Err(CliError::Config(format!(
                "datagen.s2_mode: expected 'iid_points' or 'trajectories', got '{s2_mode}'"
            )));
        }
        let truncation_fraction = if d.truncation_fraction.is_none()
            && d.truncation_index.is_none()
            && d.z_box.is_none()
        {
            // Benchmark preset: zero filter initialization with 10 %
            // truncation.
            Some(0.1)
        } else {
            d.truncation_fraction
        };
        Ok(Resolved {
            system_name: name,
            system,
            lambda_lo: self.observer.lambda_lo.unwrap_or(-2.0),
            lambda_hi: self.observer.lambda_hi.unwrap_or(-0.5),
            eps: self.observer.eps.unwrap_or(1e-4),
            p,
            q: d.q.unwrap_or(p),
            t_end,
            dt,
            substeps,
            x_box,
            z_box: d.z_box.clone(),
            truncation_fraction,
            truncation_index: d.truncation_index,
            data_seed: 1001,
            n2: d.n2,
            s2_mode,
            s2_seed: 1002,
            train_forward,
            train_inverse,
            eval,
            out_dir: out_flag
                .map(str::to_owned)
                .or_else(|| self.out_dir.clone())
                .unwrap_or(default_out),
        })
    }
}

impl Resolved {
    pub fn observer(&self) -> Result<ObserverMatrices> {
        Ok(build_observer(self.system.n_x(), self.system.n_y(), self.lambda_lo, self.lambda_hi)?)
    }

    pub fn datagen_config(&self) -> DatagenConfig {
        let (x_lo, x_hi) = split_box(&self.x_box);
        let z_init = match &self.z_box {
            None => ZInit::Zero,
            Some(zb) => {
                let (lo, hi) = split_box(zb);
                ZInit::Box { lo, hi }
            }
        };
        let truncation = if let Some(k) = self.truncation_index {
            Truncation::FixedIndex(k)
        } else if let Some(f) = self.truncation_fraction {
            Truncation::FixedFraction(f)
        } else {
            Truncation::Formula
        };
        DatagenConfig {
            p: self.p,
            q: self.q,
            t_end: self.t_end,
            dt: self.dt,
            substeps: self.substeps,
            eps: self.eps,
            x_lo,
            x_hi,
            z_init,
            truncation,
            seed: self.data_seed,
        }
    }

    pub fn s2_mode(&self) -> S2Mode {
        if self.s2_mode == "trajectories" {
            S2Mode::Trajectories
        } else {
            S2Mode::IidPoints
        }
    }
}

pub fn split_box(pairs: &[[f64; 2]]) -> (Vec<f64>, Vec<f64>) {
    (pairs.iter().map(|p| p[0]).collect(), pairs.iter().map(|p| p[1]).collect())
}
