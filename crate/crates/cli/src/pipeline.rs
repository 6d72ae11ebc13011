//! Command implementations behind the CLI: data generation, the two training
//! stages, observer rollouts, metrics, and bound certificates.
//!
//! Every command is a pure function of (resolved config, input files): given
//! the same inputs it rewrites byte-identical outputs, so any artifact can be
//! regenerated from its recorded seeds.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use kkl_core::bounds::{empirical_steady_state_error, estimate_ell_h, BoundInputs};
use kkl_core::datagen::{generate_s1, generate_s2, sample_box};
use kkl_core::estimate::{rmse, simulate_observer, smape, z_error_envelope_check, EstimationRun};
use kkl_core::rng;
use kkl_core::system::{system_by_name, NoiseSpec, System};
use kkl_core::train::{train_forward, train_inverse};

use crate::config::{split_box, Resolved};
use crate::error::{CliError, Result};
use crate::formats::{
    read_json, read_run_csv, read_s1, read_s2_csv, write_json, write_run_csv, write_s2_csv,
    write_s_data_csv, write_s_pde_csv, ModelFile, ObserverBlock, RiskEcho, S1Meta, TrainReportFile,
    TrainingBlock,
};

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

pub fn data_dir(out_dir: &Path) -> PathBuf {
    out_dir.join("data")
}

/// Generate the stage-one dataset files (`s_data.csv`, `s_pde.csv`,
/// `s1_meta.json`).
pub fn cmd_generate_data(cfg: &Resolved) -> Result<PathBuf> {
    let out = data_dir(Path::new(&cfg.out_dir));
    ensure_dir(&out)?;
    let obs = cfg.observer()?;
    let dg = cfg.datagen_config();
    let ds = generate_s1(&cfg.system, &obs, &dg)?;
    write_s_data_csv(&out.join("s_data.csv"), &ds)?;
    write_s_pde_csv(&out.join("s_pde.csv"), &ds)?;
    let meta = S1Meta {
        system: cfg.system_name.clone(),
        n_x: cfg.system.n_x(),
        n_z: obs.n_z,
        n_data: ds.n_data(),
        n_pde: ds.n_pde(),
        k_star: ds.k_star,
        t_star_max: ds.t_star_max,
        tau: ds.tau,
        p: ds.n_trajectories,
        q: ds.n_pde_trajectories,
        dt: cfg.dt,
        t_end: cfg.t_end,
        substeps: cfg.substeps,
        eps: cfg.eps,
        seed: cfg.data_seed,
        config: serde_json::to_value(cfg)?,
    };
    write_json(&out.join("s1_meta.json"), &meta)?;
    Ok(out)
}

fn observer_blocks_match(a: &ObserverBlock, b: &ObserverBlock) -> bool {
    a == b
}

/// Train the forward map from dataset files, writing `model_forward.json`
/// and `train_report_forward.json`.
pub fn cmd_train_forward(cfg: &Resolved, data: &Path) -> Result<PathBuf> {
    let out_dir = PathBuf::from(&cfg.out_dir);
    ensure_dir(&out_dir)?;
    let (s1, meta) = read_s1(data)?;
    if meta.system != cfg.system_name {
        return Err(CliError::Config(format!(
            "dataset was generated for system '{}', config says '{}'",
            meta.system, cfg.system_name
        )));
    }
    let obs = cfg.observer()?;
    if meta.n_z != obs.n_z {
        return Err(CliError::Config(format!(
            "dataset lifted dimension {} does not match the configured observer ({})",
            meta.n_z, obs.n_z
        )));
    }
    let t0 = Instant::now();
    let (mlp, report) = train_forward(&s1, &obs, &cfg.system, &cfg.train_forward.to_core())?;
    let wall = t0.elapsed().as_secs_f64();

    let training = TrainingBlock {
        role: "forward".into(),
        system: cfg.system_name.clone(),
        config: cfg.train_forward.clone(),
        n_data: Some(s1.n_data()),
        n_pde: Some(s1.n_pde()),
        n2: None,
        initial_risk: report.initial_risk.into(),
        final_risk: report.final_risk.into(),
        max_sample_loss: report.max_sample_loss,
        best_epoch: report.best_epoch,
        param_checksum: format!("{:016x}", report.param_checksum),
    };
    let model_path = out_dir.join("model_forward.json");
    write_json(&model_path, &ModelFile::from_parts(&mlp, &obs, training))?;
    write_json(
        &out_dir.join("train_report_forward.json"),
        &TrainReportFile::new("forward", &report, wall),
    )?;
    Ok(model_path)
}

/// Train the inverse map. When no stage-two file is supplied, one is
/// generated from the frozen forward map (and written next to the model).
pub fn cmd_train_inverse(cfg: &Resolved, forward: &Path, s2_file: Option<&Path>) -> Result<PathBuf> {
    let out_dir = PathBuf::from(&cfg.out_dir);
    ensure_dir(&out_dir)?;
    let fwd: ModelFile = read_json(forward)?;
    let obs = cfg.observer()?;
    if !observer_blocks_match(&fwd.observer, &ObserverBlock::from_core(&obs)) {
        return Err(CliError::Config(
            "forward model's observer block does not match the configured observer".into(),
        ));
    }
    if fwd.training.system != cfg.system_name {
        return Err(CliError::Config(format!(
            "forward model was trained on '{}', config says '{}'",
            fwd.training.system, cfg.system_name
        )));
    }
    let theta = fwd.to_mlp()?;

    let s2 = match s2_file {
        Some(path) => read_s2_csv(path, obs.n_z, cfg.system.n_x())?,
        None => {
            let n_data_hint = fwd.training.n_data.unwrap_or(0);
            let n2 = cfg.n2.unwrap_or(n_data_hint);
            if n2 == 0 {
                return Err(CliError::Config(
                    "cannot infer the stage-two sample count; set datagen.n2".into(),
                ));
            }
            let (x_lo, x_hi) = split_box(&cfg.x_box);
            let ds = generate_s2(
                &theta,
                &cfg.system,
                n2,
                &x_lo,
                &x_hi,
                cfg.s2_mode(),
                cfg.dt,
                cfg.t_end,
                cfg.substeps,
                cfg.s2_seed,
            )?;
            write_s2_csv(&out_dir.join("s2.csv"), &ds)?;
            write_json(
                &out_dir.join("s2_meta.json"),
                &serde_json::json!({
                    "n2": ds.len(),
                    "mode": cfg.s2_mode,
                    "seed": cfg.s2_seed,
                    "forward_checksum": fwd.training.param_checksum,
                }),
            )?;
            ds
        }
    };

    let t0 = Instant::now();
    let (eta, report) = train_inverse(&s2, &cfg.train_inverse.to_core())?;
    let wall = t0.elapsed().as_secs_f64();

    let training = TrainingBlock {
        role: "inverse".into(),
        system: cfg.system_name.clone(),
        config: cfg.train_inverse.clone(),
        n_data: None,
        n_pde: None,
        n2: Some(s2.len()),
        initial_risk: report.initial_risk.into(),
        final_risk: report.final_risk.into(),
        max_sample_loss: report.max_sample_loss,
        best_epoch: report.best_epoch,
        param_checksum: format!("{:016x}", report.param_checksum),
    };
    let model_path = out_dir.join("model_inverse.json");
    write_json(&model_path, &ModelFile::from_parts(&eta, &obs, training))?;
    write_json(
        &out_dir.join("train_report_inverse.json"),
        &TrainReportFile::new("inverse", &report, wall),
    )?;
    Ok(model_path)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunsMeta {
    pub system: String,
    pub n_x: usize,
    pub n_z: usize,
    pub n_y: usize,
    pub n_runs: usize,
    pub t_end: f64,
    pub dt: f64,
    pub substeps: usize,
    pub w_std: f64,
    pub v_std: f64,
    pub noise_seed: u64,
    pub ic_seed: u64,
    pub inverse_checksum: String,
    pub per_run: Vec<RunMeta>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub index: usize,
    pub x0: Vec<f64>,
    pub wbar: f64,
    pub vbar: f64,
}

/// Simulate test rollouts of the learned observer; one CSV per run plus a
/// sidecar with the noise realizations' empirical bounds.
pub fn cmd_simulate(
    cfg: &Resolved,
    inverse: &Path,
    out: &Path,
    emit_plot_data: bool,
) -> Result<Vec<EstimationRun>> {
    ensure_dir(out)?;
    let inv: ModelFile = read_json(inverse)?;
    if inv.training.system != cfg.system_name {
        return Err(CliError::Config(format!(
            "inverse model was trained on '{}', config says '{}'",
            inv.training.system, cfg.system_name
        )));
    }
    let eta = inv.to_mlp()?;
    let obs = inv.observer.to_core();
    let sys = &cfg.system;
    let e = &cfg.eval;

    let (lo, hi) = split_box(&e.test_box);
    let mut ic_rng = rng::seeded(e.ic_seed);
    let x0s = sample_box(e.n_trajectories, &lo, &hi, &mut ic_rng)?;

    let z0 = vec![0.0; obs.n_z];
    let mut runs = Vec::with_capacity(e.n_trajectories);
    let mut per_run = Vec::with_capacity(e.n_trajectories);
    for i in 0..e.n_trajectories {
        let noise = NoiseSpec::uniform(
            sys.n_x(),
            sys.n_y(),
            e.w_std,
            e.v_std,
            e.noise_seed.wrapping_add(i as u64),
        );
        let run = simulate_observer(
            sys,
            &obs,
            &eta,
            x0s.row(i),
            &noise,
            e.t_end,
            e.dt,
            e.substeps,
            &z0,
        )?;
        write_run_csv(&out.join(format!("run_{i:03}.csv")), &run)?;
        per_run.push(RunMeta {
            index: i,
            x0: x0s.row(i).to_vec(),
            wbar: run.wbar,
            vbar: run.vbar,
        });
        runs.push(run);
    }
    let meta = RunsMeta {
        system: cfg.system_name.clone(),
        n_x: sys.n_x(),
        n_z: obs.n_z,
        n_y: sys.n_y(),
        n_runs: runs.len(),
        t_end: e.t_end,
        dt: e.dt,
        substeps: e.substeps,
        w_std: e.w_std,
        v_std: e.v_std,
        noise_seed: e.noise_seed,
        ic_seed: e.ic_seed,
        inverse_checksum: inv.training.param_checksum.clone(),
        per_run,
    };
    write_json(&out.join("runs_meta.json"), &meta)?;

    if emit_plot_data {
        let plots = out.join("plots");
        ensure_dir(&plots)?;
        if let Some(run) = runs.first() {
            for c in 0..sys.n_x() {
                let mut text = String::from("t,true,estimated\n");
                for k in 0..run.len() {
                    use std::fmt::Write as _;
                    let _ = writeln!(
                        text,
                        "{:.16e},{:.16e},{:.16e}",
                        run.times[k],
                        run.true_states.get(k, c),
                        run.est_states.get(k, c)
                    );
                }
                std::fs::write(plots.join(format!("state_{}.csv", c + 1)), text)?;
            }
        }
    }
    Ok(runs)
}

/// Load previously simulated runs (CSV + sidecar).
pub fn read_runs(dir: &Path) -> Result<(Vec<EstimationRun>, RunsMeta)> {
    let meta: RunsMeta = read_json(&dir.join("runs_meta.json"))?;
    let mut runs = Vec::with_capacity(meta.n_runs);
    for i in 0..meta.n_runs {
        let mut run = read_run_csv(
            &dir.join(format!("run_{i:03}.csv")),
            meta.n_x,
            meta.n_z,
            meta.n_y,
        )?;
        run.wbar = meta.per_run[i].wbar;
        run.vbar = meta.per_run[i].vbar;
        runs.push(run);
    }
    Ok((runs, meta))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsFile {
    pub system: String,
    pub n_runs: usize,
    pub t_cutoff: f64,
    pub rmse: f64,
    pub smape: f64,
    pub smape_degenerate_skipped: usize,
    pub tail: TailMetrics,
    pub per_trajectory: Vec<TrajectoryMetrics>,
    pub wbar_max: f64,
    pub vbar_max: f64,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailMetrics {
    pub t_cutoff: f64,
    pub rmse: f64,
    pub smape: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryMetrics {
    pub index: usize,
    pub rmse: f64,
    pub smape: f64,
}

pub fn compute_metrics(
    cfg: &Resolved,
    runs: &[EstimationRun],
) -> Result<MetricsFile> {
    let e = &cfg.eval;
    let mut per_trajectory = Vec::with_capacity(runs.len());
    for (i, run) in runs.iter().enumerate() {
        per_trajectory.push(TrajectoryMetrics {
            index: i,
            rmse: rmse(std::slice::from_ref(run), e.t_cutoff)?,
            smape: smape(std::slice::from_ref(run), e.t_cutoff)?.percent,
        });
    }
    let s = smape(runs, e.t_cutoff)?;
    Ok(MetricsFile {
        system: cfg.system_name.clone(),
        n_runs: runs.len(),
        t_cutoff: e.t_cutoff,
        rmse: rmse(runs, e.t_cutoff)?,
        smape: s.percent,
        smape_degenerate_skipped: s.degenerate_skipped,
        tail: TailMetrics {
            t_cutoff: e.tail_cutoff,
            rmse: rmse(runs, e.tail_cutoff)?,
            smape: smape(runs, e.tail_cutoff)?.percent,
        },
        per_trajectory,
        wbar_max: runs.iter().fold(0.0, |m, r| m.max(r.wbar)),
        vbar_max: runs.iter().fold(0.0, |m, r| m.max(r.vbar)),
        config: serde_json::to_value(cfg)?,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub inputs: CertificateInputs,
    pub bounds: CertificateBounds,
    pub empirical: CertificateEmpirical,
    pub checks: Vec<Check>,
    pub assumptions: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateInputs {
    pub m_theta: f64,
    pub m_eta: f64,
    pub d_theta: f64,
    pub d_eta: f64,
    pub n1: usize,
    pub n2: usize,
    pub delta: f64,
    pub ell_eta: f64,
    pub ell_h: f64,
    pub cond_v: f64,
    pub lambda_min: f64,
    pub norm_b: f64,
    pub n_y: usize,
    pub emp_r1: f64,
    pub emp_r2: f64,
    pub psi_gain: f64,
    pub psi_wbar: f64,
    pub wbar: f64,
    pub vbar: f64,
    pub tail_cutoff: f64,
    pub burn_in_index: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateBounds {
    pub c_theta: f64,
    pub c_eta: f64,
    pub inverse_error: f64,
    pub steady_state_noise_free: f64,
    pub steady_state_noisy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateEmpirical {
    pub tail_mean_squared_error: f64,
    pub envelope_min_margin: f64,
    pub envelope_worst_run: usize,
    pub n_runs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Assemble the bound certificate from the two trained models and a set of
/// evaluation runs.
pub fn build_certificate(
    cfg: &Resolved,
    forward: &ModelFile,
    inverse: &ModelFile,
    runs: &[EstimationRun],
) -> Result<Certificate> {
    let e = &cfg.eval;
    let eta = inverse.to_mlp()?;
    let obs = inverse.observer.to_core();
    let ell_eta = eta.lipschitz_upper_bound();
    let (lo, hi) = split_box(&e.test_box);
    let ell_h = estimate_ell_h(&cfg.system, &lo, &hi, 512, 7)?;

    let n1 = forward.training.n_data.unwrap_or(0) + forward.training.n_pde.unwrap_or(0);
    let n2 = inverse.training.n2.unwrap_or(0);
    if n1 == 0 || n2 == 0 {
        return Err(CliError::Config(
            "model files lack the training sample counts needed for the certificate".into(),
        ));
    }
    let theta_params = forward.to_mlp()?.n_params() as f64;
    let eta_params = eta.n_params() as f64;
    let mut assumptions = vec![
        format!(
            "psi is the linear map psi(w) = {}*w; the uncertainty-effect function is user-supplied and defaults to identity gain",
            e.psi_gain
        ),
        "pseudo-dimensions default to network parameter counts; bounds are conditional on the supplied values".to_string(),
        "loss bounds M default to the observed maximum per-sample training loss".to_string(),
        "the steady-state expectation is approximated by the trajectory-ensemble tail average".to_string(),
    ];
    let clamp_d = |name: &str, d: f64, n: usize, assumptions: &mut Vec<String>| -> f64 {
        if d > n as f64 {
            assumptions.push(format!(
                "{name} = {d} exceeds its sample count {n}; clamped to {n} so the complexity term stays defined"
            ));
            n as f64
        } else {
            d
        }
    };
    let d_theta = clamp_d("d_theta", e.d_theta.unwrap_or(theta_params), n1, &mut assumptions);
    let d_eta = clamp_d("d_eta", e.d_eta.unwrap_or(eta_params), n2, &mut assumptions);

    let wbar = runs.iter().fold(0.0f64, |m, r| m.max(r.wbar));
    let vbar = runs.iter().fold(0.0f64, |m, r| m.max(r.vbar));
    let psi_wbar = e.psi_gain * wbar;

    let inputs = BoundInputs {
        m_theta: forward.training.max_sample_loss,
        m_eta: inverse.training.max_sample_loss,
        d_theta,
        d_eta,
        n1,
        n2,
        delta: e.delta,
        ell_eta,
        ell_h,
        cond_v: obs.cond_v,
        lambda_min: obs.lambda_min,
        norm_b: obs.norm_b(),
        n_y: obs.n_y,
        emp_r1: forward.training.final_risk.total,
        emp_r2: inverse.training.final_risk.total,
        psi_wbar,
        vbar,
    };

    let tail_mse = empirical_steady_state_error(runs, e.tail_cutoff)?;
    let burn_in_index = ((runs[0].len() as f64 - 1.0) * e.burn_in_frac).round() as usize;

    let mut envelope_min = f64::INFINITY;
    let mut envelope_worst = 0usize;
    for (i, run) in runs.iter().enumerate() {
        let check = z_error_envelope_check(
            run,
            &obs,
            ell_h,
            e.psi_gain * run.wbar,
            run.vbar,
            burn_in_index,
            None,
        )?;
        if check.min_margin < envelope_min {
            envelope_min = check.min_margin;
            envelope_worst = i;
        }
    }

    let bounds = CertificateBounds {
        c_theta: inputs.c_theta()?,
        c_eta: inputs.c_eta()?,
        inverse_error: inputs.r_tstar_bound()?,
        steady_state_noise_free: inputs.noise_free_bound()?,
        steady_state_noisy: inputs.noisy_bound()?,
    };

    let mut checks = Vec::new();
    let noise_free = wbar == 0.0 && vbar == 0.0;
    if noise_free {
        checks.push(Check {
            name: "steady_state_noise_free".into(),
            lhs: tail_mse,
            rhs: bounds.steady_state_noise_free,
            margin: bounds.steady_state_noise_free - tail_mse,
            pass: tail_mse <= bounds.steady_state_noise_free,
        });
    }
    checks.push(Check {
        name: "steady_state_noisy".into(),
        lhs: tail_mse,
        rhs: bounds.steady_state_noisy,
        margin: bounds.steady_state_noisy - tail_mse,
        pass: tail_mse <= bounds.steady_state_noisy,
    });
    checks.push(Check {
        name: "lifted_error_envelope".into(),
        lhs: -envelope_min,
        rhs: 0.0,
        margin: envelope_min,
        pass: envelope_min >= 0.0,
    });

    Ok(Certificate {
        inputs: CertificateInputs {
            m_theta: inputs.m_theta,
            m_eta: inputs.m_eta,
            d_theta,
            d_eta,
            n1,
            n2,
            delta: e.delta,
            ell_eta,
            ell_h,
            cond_v: obs.cond_v,
            lambda_min: obs.lambda_min,
            norm_b: inputs.norm_b,
            n_y: obs.n_y,
            emp_r1: inputs.emp_r1,
            emp_r2: inputs.emp_r2,
            psi_gain: e.psi_gain,
            psi_wbar,
            wbar,
            vbar,
            tail_cutoff: e.tail_cutoff,
            burn_in_index,
        },
        bounds,
        empirical: CertificateEmpirical {
            tail_mean_squared_error: tail_mse,
            envelope_min_margin: envelope_min,
            envelope_worst_run: envelope_worst,
            n_runs: runs.len(),
        },
        checks,
        assumptions,
    })
}

/// Simulate (unless given a runs directory), compute metrics, and write the
/// bound certificate. With `strict`, a failed check is an error (exit 4).
#[allow(clippy::too_many_arguments)]
pub fn cmd_evaluate(
    cfg: &Resolved,
    forward: &Path,
    inverse: &Path,
    runs_dir: Option<&Path>,
    strict: bool,
    emit_plot_data: bool,
) -> Result<(MetricsFile, Certificate)> {
    let out_dir = PathBuf::from(&cfg.out_dir);
    let eval_dir = out_dir.join("eval");
    ensure_dir(&eval_dir)?;
    let runs = match runs_dir {
        Some(dir) => read_runs(dir)?.0,
        None => cmd_simulate(cfg, inverse, &eval_dir, emit_plot_data)?,
    };
    let fwd: ModelFile = read_json(forward)?;
    let inv: ModelFile = read_json(inverse)?;
    let metrics = compute_metrics(cfg, &runs)?;
    let certificate = build_certificate(cfg, &fwd, &inv, &runs)?;
    write_json(&eval_dir.join("metrics.json"), &metrics)?;
    write_json(&eval_dir.join("certificate.json"), &certificate)?;
    if strict {
        if let Some(failed) = certificate.checks.iter().find(|c| !c.pass) {
            return Err(CliError::BoundCheck(format!(
                "{} failed: lhs {} vs rhs {} (margin {})",
                failed.name, failed.lhs, failed.rhs, failed.margin
            )));
        }
    }
    Ok((metrics, certificate))
}

/// Standalone certificate from existing models and runs.
pub fn cmd_bounds(
    cfg: &Resolved,
    forward: &Path,
    inverse: &Path,
    runs_dir: &Path,
    out: &Path,
) -> Result<Certificate> {
    let fwd: ModelFile = read_json(forward)?;
    let inv: ModelFile = read_json(inverse)?;
    let (runs, _) = read_runs(runs_dir)?;
    let certificate = build_certificate(cfg, &fwd, &inv, &runs)?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    write_json(out, &certificate)?;
    Ok(certificate)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationReport {
    pub system: String,
    pub seed_note: String,
    pub in_domain_box: Vec<[f64; 2]>,
    pub out_domain_box: Vec<[f64; 2]>,
    pub variants: Vec<AblationVariant>,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationVariant {
    pub nu: f64,
    pub in_domain: BoxMetrics,
    pub out_domain: BoxMetrics,
    pub forward_final_risk: RiskEcho,
    pub inverse_final_risk: RiskEcho,
    pub train_wall_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxMetrics {
    pub rmse: f64,
    pub smape: f64,
}

/// Paired physics-on/physics-off comparison with shared data and seeds.
///
/// Trains both variants on the same stage-one dataset, generates each
/// stage-two set from its own frozen forward map with the same seed, and
/// evaluates both observers on identical in-domain and out-of-domain test
/// ensembles (the out-of-domain box is the training box scaled to ±3).
pub fn cmd_ablate(cfg: &Resolved) -> Result<AblationReport> {
    let out_dir = PathBuf::from(&cfg.out_dir);
    ensure_dir(&out_dir)?;
    let obs = cfg.observer()?;
    let sys = cfg.system.clone();
    let dg = cfg.datagen_config();
    let s1 = generate_s1(&sys, &obs, &dg)?;

    let out_box: Vec<[f64; 2]> = vec![[-3.0, 3.0]; sys.n_x()];
    let (in_lo, in_hi) = split_box(&cfg.eval.test_box);
    let (out_lo, out_hi) = split_box(&out_box);

    // Shared test ensembles.
    let e = &cfg.eval;
    let mut ic_rng = rng::seeded(e.ic_seed);
    let x0_in = sample_box(e.n_trajectories, &in_lo, &in_hi, &mut ic_rng)?;
    let x0_out = sample_box(e.n_trajectories, &out_lo, &out_hi, &mut ic_rng)?;

    let mut variants = Vec::new();
    for &nu in &[cfg.train_forward.nu, 0.0] {
        let t0 = Instant::now();
        let mut fwd_cfg = cfg.train_forward.to_core();
        fwd_cfg.nu = nu;
        let (theta, fwd_report) = train_forward(&s1, &obs, &sys, &fwd_cfg)?;
        let n2 = cfg.n2.unwrap_or(s1.n_data());
        let (x_lo, x_hi) = split_box(&cfg.x_box);
        let s2 = generate_s2(
            &theta,
            &sys,
            n2,
            &x_lo,
            &x_hi,
            cfg.s2_mode(),
            cfg.dt,
            cfg.t_end,
            cfg.substeps,
            cfg.s2_seed,
        )?;
        let (eta, inv_report) = train_inverse(&s2, &cfg.train_inverse.to_core())?;
        let wall = t0.elapsed().as_secs_f64();

        let evaluate_box = |x0s: &kkl_core::mat::Mat| -> Result<BoxMetrics> {
            let z0 = vec![0.0; obs.n_z];
            let mut runs = Vec::with_capacity(x0s.rows());
            for i in 0..x0s.rows() {
                let noise = NoiseSpec::uniform(
                    sys.n_x(),
                    sys.n_y(),
                    e.w_std,
                    e.v_std,
                    e.noise_seed.wrapping_add(i as u64),
                );
                runs.push(simulate_observer(
                    &sys,
                    &obs,
                    &eta,
                    x0s.row(i),
                    &noise,
                    e.t_end,
                    e.dt,
                    e.substeps,
                    &z0,
                )?);
            }
            Ok(BoxMetrics {
                rmse: rmse(&runs, e.t_cutoff)?,
                smape: smape(&runs, e.t_cutoff)?.percent,
            })
        };

        variants.push(AblationVariant {
            nu,
            in_domain: evaluate_box(&x0_in)?,
            out_domain: evaluate_box(&x0_out)?,
            forward_final_risk: fwd_report.final_risk.into(),
            inverse_final_risk: inv_report.final_risk.into(),
            train_wall_s: wall,
        });
    }

    let report = AblationReport {
        system: cfg.system_name.clone(),
        seed_note: "both variants share the stage-one dataset, stage-two seed, initialization seeds, and test ensembles".into(),
        in_domain_box: cfg.eval.test_box.clone(),
        out_domain_box: out_box,
        variants,
        config: serde_json::to_value(cfg)?,
    };
    write_json(&out_dir.join("ablation_report.json"), &report)?;
    Ok(report)
}

/// Resolve a path relative to the out dir when it does not exist as given.
pub fn locate(out_dir: &str, given: Option<&Path>, default_name: &str) -> PathBuf {
    match given {
        Some(p) => p.to_path_buf(),
        None => Path::new(out_dir).join(default_name),
    }
}

/// Parse the system embedded in a model file's training block.
pub fn system_of_model(model: &ModelFile) -> Result<System> {
    system_by_name(&model.training.system).ok_or_else(|| {
        CliError::Config(format!("model references unknown system '{}'", model.training.system))
    })
}

/// Shared observer sanity check between two model files.
pub fn check_model_pair(forward: &ModelFile, inverse: &ModelFile) -> Result<()> {
    if forward.observer != inverse.observer {
        return Err(CliError::Config(
            "forward and inverse models carry different observer blocks".into(),
        ));
    }
    if forward.training.system != inverse.training.system {
        return Err(CliError::Config(
            "forward and inverse models were trained on different systems".into(),
        ));
    }
    Ok(())
}

/// Convenience wrapper running the full pipeline in order.
pub fn run_full_pipeline(cfg: &Resolved, emit_plot_data: bool) -> Result<(MetricsFile, Certificate)> {
    let data = cmd_generate_data(cfg)?;
    let forward = cmd_train_forward(cfg, &data)?;
    let inverse = cmd_train_inverse(cfg, &forward, None)?;
    cmd_evaluate(cfg, &forward, &inverse, None, false, emit_plot_data)
}
