//! On-disk formats: CSV tables and JSON model/report files.
//!
//! Floats in CSV are written with 17 significant digits (`{:.16e}`), which
//! round-trips every finite `f64` bit-exactly. JSON floats use the shortest
//! representation that round-trips exactly. All writers are deterministic:
//! rerunning a command with identical inputs rewrites byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use kkl_core::datagen::{DatasetS1, DatasetS2};
use kkl_core::estimate::EstimationRun;
use kkl_core::mat::Mat;
use kkl_core::nn::{Activation, Mlp};
use kkl_core::observer::ObserverMatrices;
use kkl_core::ode::Trajectory;
use kkl_core::train::{RiskBreakdown, TrainReport};

use crate::config::TrainConfig2;
use crate::error::{CliError, Result};

/// Full-precision decimal form of an `f64` (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_row(out: &mut String, values: impl Iterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(',');
        }
        let _ = write!(out, "{v:.16e}");
        first = false;
    }
    out.push('\n');
}

fn parse_row(line: &str, path: &Path, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|tok| {
            tok.trim().parse::<f64>().map_err(|_| {
                CliError::Config(format!(
                    "{}:{lineno}: cannot parse '{tok}' as a number",
                    path.display()
                ))
            })
        })
        .collect()
}

/// Read a CSV with a header row into (header, row-major matrix).
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Mat)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| CliError::Config(format!("{}: empty file", path.display())))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let n_cols = header.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_row(line, path, i + 2)?;
        if row.len() != n_cols {
            return Err(CliError::Config(format!(
                "{}:{}: expected {} columns, found {}",
                path.display(),
                i + 2,
                n_cols,
                row.len()
            )));
        }
        data.extend(row);
        rows += 1;
    }
    Ok((header, Mat::from_vec(rows, n_cols, data)))
}

/// Trajectory CSV: header `t,x1,…,xn`, one row per sample.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut out = String::from("t");
    for i in 1..=traj.dim() {
        let _ = write!(out, ",x{i}");
    }
    out.push('\n');
    for k in 0..traj.len() {
        push_row(&mut out, std::iter::once(traj.time(k)).chain(traj.state(k).iter().copied()));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    let (header, m) = read_csv(path)?;
    if header.first().map(String::as_str) != Some("t") || header.len() < 2 {
        return Err(CliError::Config(format!("{}: not a trajectory file", path.display())));
    }
    let dim = header.len() - 1;
    let mut times = Vec::with_capacity(m.rows());
    let mut states = Mat::zeros(m.rows(), dim);
    for r in 0..m.rows() {
        times.push(m.get(r, 0));
        states.row_mut(r).copy_from_slice(&m.row(r)[1..]);
    }
    Ok(Trajectory::new(times, states))
}

fn header(prefix: &str, n: usize) -> String {
    (1..=n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().join(",")
}

/// Stage-one labeled pairs: `x1..xn,z1..zm`.
pub fn write_s_data_csv(path: &Path, ds: &DatasetS1) -> Result<()> {
    let mut out = format!("{},{}\n", header("x", ds.x_data.cols()), header("z", ds.z_data.cols()));
    for r in 0..ds.n_data() {
        push_row(&mut out, ds.x_data.row(r).iter().chain(ds.z_data.row(r)).copied());
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Collocation points: `x1..xn`.
pub fn write_s_pde_csv(path: &Path, ds: &DatasetS1) -> Result<()> {
    let mut out = format!("{}\n", header("x", ds.x_pde.cols()));
    for r in 0..ds.n_pde() {
        push_row(&mut out, ds.x_pde.row(r).iter().copied());
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Stage-two pairs: `z1..zm,x1..xn`.
pub fn write_s2_csv(path: &Path, ds: &DatasetS2) -> Result<()> {
    let mut out = format!("{},{}\n", header("z", ds.z.cols()), header("x", ds.x.cols()));
    for r in 0..ds.len() {
        push_row(&mut out, ds.z.row(r).iter().chain(ds.x.row(r)).copied());
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Sidecar describing a generated stage-one dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct S1Meta {
    pub system: String,
    pub n_x: usize,
    pub n_z: usize,
    pub n_data: usize,
    pub n_pde: usize,
    pub k_star: usize,
    pub t_star_max: f64,
    pub tau: usize,
    pub p: usize,
    pub q: usize,
    pub dt: f64,
    pub t_end: f64,
    pub substeps: usize,
    pub eps: f64,
    pub seed: u64,
    pub config: serde_json::Value,
}

pub fn read_s1(dir: &Path) -> Result<(DatasetS1, S1Meta)> {
    let meta: S1Meta = read_json(&dir.join("s1_meta.json"))?;
    let (hdr, pairs) = read_csv(&dir.join("s_data.csv"))?;
    let n_x = hdr.iter().filter(|h| h.starts_with('x')).count();
    let n_z = hdr.len() - n_x;
    if n_x != meta.n_x || n_z != meta.n_z {
        return Err(CliError::Config(format!(
            "{}: dataset dimensions do not match the sidecar",
            dir.display()
        )));
    }
    let mut x_data = Mat::zeros(pairs.rows(), n_x);
    let mut z_data = Mat::zeros(pairs.rows(), n_z);
    for r in 0..pairs.rows() {
        x_data.row_mut(r).copy_from_slice(&pairs.row(r)[..n_x]);
        z_data.row_mut(r).copy_from_slice(&pairs.row(r)[n_x..]);
    }
    let (_, x_pde) = read_csv(&dir.join("s_pde.csv"))?;
    Ok((
        DatasetS1 {
            x_data,
            z_data,
            x_pde,
            k_star: meta.k_star,
            t_star_max: meta.t_star_max,
            tau: meta.tau,
            n_trajectories: meta.p,
            n_pde_trajectories: meta.q,
        },
        meta,
    ))
}

pub fn read_s2_csv(path: &Path, n_z: usize, n_x: usize) -> Result<DatasetS2> {
    let (hdr, m) = read_csv(path)?;
    if hdr.len() != n_z + n_x {
        return Err(CliError::Config(format!(
            "{}: expected {} columns, found {}",
            path.display(),
            n_z + n_x,
            hdr.len()
        )));
    }
    let mut z = Mat::zeros(m.rows(), n_z);
    let mut x = Mat::zeros(m.rows(), n_x);
    for r in 0..m.rows() {
        z.row_mut(r).copy_from_slice(&m.row(r)[..n_z]);
        x.row_mut(r).copy_from_slice(&m.row(r)[n_z..]);
    }
    Ok(DatasetS2 { z, x })
}

/// Observer block embedded in model files so simulation reproduces the
/// training-time matrices exactly.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ObserverBlock {
    pub n_z: usize,
    pub n_y: usize,
    pub eigenvalues: Vec<f64>,
    pub b: Vec<Vec<f64>>,
    pub cond_v: f64,
    pub lambda_min: f64,
}

impl ObserverBlock {
    pub fn from_core(obs: &ObserverMatrices) -> Self {
        ObserverBlock {
            n_z: obs.n_z,
            n_y: obs.n_y,
            eigenvalues: obs.eigenvalues.clone(),
            b: (0..obs.n_z).map(|r| obs.b.row(r).to_vec()).collect(),
            cond_v: obs.cond_v,
            lambda_min: obs.lambda_min,
        }
    }

    pub fn to_core(&self) -> ObserverMatrices {
        let mut b = Mat::zeros(self.n_z, self.n_y);
        for (r, row) in self.b.iter().enumerate() {
            b.row_mut(r).copy_from_slice(row);
        }
        ObserverMatrices {
            n_z: self.n_z,
            n_y: self.n_y,
            eigenvalues: self.eigenvalues.clone(),
            b,
            cond_v: self.cond_v,
            lambda_min: self.lambda_min,
        }
    }
}

/// Scalars from a finished training stage that the bound certificates need.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingBlock {
    /// `forward` or `inverse`.
    pub role: String,
    pub system: String,
    pub config: TrainConfig2,
    /// Sample counts behind the empirical risks: stage one stores
    /// `n_data`/`n_pde`, stage two stores `n2`.
    pub n_data: Option<usize>,
    pub n_pde: Option<usize>,
    pub n2: Option<usize>,
    pub initial_risk: RiskEcho,
    pub final_risk: RiskEcho,
    pub max_sample_loss: f64,
    pub best_epoch: usize,
    pub param_checksum: String,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RiskEcho {
    pub total: f64,
    pub data_fit: f64,
    pub pde: f64,
}

impl From<RiskBreakdown> for RiskEcho {
    fn from(r: RiskBreakdown) -> Self {
        RiskEcho { total: r.total, data_fit: r.data_fit, pde: r.pde }
    }
}

/// A learned map on disk: sizes, activation tag, row-major weights, biases,
/// the observer it was trained against, and the training scalars.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub layer_sizes: Vec<usize>,
    pub activation: String,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    pub observer: ObserverBlock,
    pub training: TrainingBlock,
}

impl ModelFile {
    pub fn from_parts(mlp: &Mlp, obs: &ObserverMatrices, training: TrainingBlock) -> Self {
        ModelFile {
            layer_sizes: mlp.layer_sizes.clone(),
            activation: mlp.activation.tag().to_string(),
            weights: mlp
                .weights
                .iter()
                .map(|w| (0..w.rows()).map(|r| w.row(r).to_vec()).collect())
                .collect(),
            biases: mlp.biases.clone(),
            observer: ObserverBlock::from_core(obs),
            training,
        }
    }

    pub fn to_mlp(&self) -> Result<Mlp> {
        if self.activation != "tanh" {
            return Err(CliError::Config(format!(
                "model activation '{}' is not supported",
                self.activation
            )));
        }
        let mut weights = Vec::new();
        for (l, wm) in self.weights.iter().enumerate() {
            let rows = wm.len();
            let cols = wm.first().map(Vec::len).unwrap_or(0);
            if rows != self.layer_sizes[l + 1] || cols != self.layer_sizes[l] {
                return Err(CliError::Config(format!(
                    "model layer {l}: weight block is {rows}x{cols}, sizes say {}x{}",
                    self.layer_sizes[l + 1],
                    self.layer_sizes[l]
                )));
            }
            let mut m = Mat::zeros(rows, cols);
            for (r, row) in wm.iter().enumerate() {
                if row.len() != cols {
                    return Err(CliError::Config(format!("model layer {l}: ragged weight rows")));
                }
                m.row_mut(r).copy_from_slice(row);
            }
            weights.push(m);
        }
        Ok(Mlp {
            layer_sizes: self.layer_sizes.clone(),
            weights,
            biases: self.biases.clone(),
            activation: Activation::Tanh,
        })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))
}

/// Per-epoch loss traces plus wall time, written next to the model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReportFile {
    pub role: String,
    pub epoch_data_fit: Vec<f64>,
    pub epoch_pde: Vec<f64>,
    pub epoch_total: Vec<f64>,
    pub initial_risk: RiskEcho,
    pub final_risk: RiskEcho,
    pub max_sample_loss: f64,
    pub best_epoch: usize,
    pub param_checksum: String,
    pub wall_time_s: f64,
}

impl TrainReportFile {
    pub fn new(role: &str, report: &TrainReport, wall_time_s: f64) -> Self {
        TrainReportFile {
            role: role.to_string(),
            epoch_data_fit: report.epoch_data_fit.clone(),
            epoch_pde: report.epoch_pde.clone(),
            epoch_total: report.epoch_total.clone(),
            initial_risk: report.initial_risk.into(),
            final_risk: report.final_risk.into(),
            max_sample_loss: report.max_sample_loss,
            best_epoch: report.best_epoch,
            param_checksum: format!("{:016x}", report.param_checksum),
            wall_time_s,
        }
    }
}

/// Run CSV: `t, x*, xhat*, z*, y*, y_noisy*` (single-output systems write
/// plain `y,y_noisy` columns).
pub fn write_run_csv(path: &Path, run: &EstimationRun) -> Result<()> {
    let n_x = run.true_states.cols();
    let n_z = run.z_states.cols();
    let n_y = run.y_clean.cols();
    let mut out = String::from("t");
    for i in 1..=n_x {
        let _ = write!(out, ",x{i}");
    }
    for i in 1..=n_x {
        let _ = write!(out, ",xhat{i}");
    }
    for i in 1..=n_z {
        let _ = write!(out, ",z{i}");
    }
    if n_y == 1 {
        out.push_str(",y,y_noisy");
    } else {
        for i in 1..=n_y {
            let _ = write!(out, ",y{i}");
        }
        for i in 1..=n_y {
            let _ = write!(out, ",y_noisy{i}");
        }
    }
    out.push('\n');
    for k in 0..run.len() {
        push_row(
            &mut out,
            std::iter::once(run.times[k])
                .chain(run.true_states.row(k).iter().copied())
                .chain(run.est_states.row(k).iter().copied())
                .chain(run.z_states.row(k).iter().copied())
                .chain(run.y_clean.row(k).iter().copied())
                .chain(run.y_noisy.row(k).iter().copied()),
        );
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Inverse of [`write_run_csv`]; `wbar`/`vbar` come from the runs sidecar.
pub fn read_run_csv(path: &Path, n_x: usize, n_z: usize, n_y: usize) -> Result<EstimationRun> {
    let (hdr, m) = read_csv(path)?;
    let expected = 1 + 2 * n_x + n_z + 2 * n_y;
    if hdr.len() != expected {
        return Err(CliError::Config(format!(
            "{}: expected {expected} columns for dimensions ({n_x},{n_z},{n_y}), found {}",
            path.display(),
            hdr.len()
        )));
    }
    let rows = m.rows();
    let mut times = Vec::with_capacity(rows);
    let mut xs = Mat::zeros(rows, n_x);
    let mut xh = Mat::zeros(rows, n_x);
    let mut zs = Mat::zeros(rows, n_z);
    let mut yc = Mat::zeros(rows, n_y);
    let mut yn = Mat::zeros(rows, n_y);
    for r in 0..rows {
        let row = m.row(r);
        times.push(row[0]);
        let mut off = 1;
        xs.row_mut(r).copy_from_slice(&row[off..off + n_x]);
        off += n_x;
        xh.row_mut(r).copy_from_slice(&row[off..off + n_x]);
        off += n_x;
        zs.row_mut(r).copy_from_slice(&row[off..off + n_z]);
        off += n_z;
        yc.row_mut(r).copy_from_slice(&row[off..off + n_y]);
        off += n_y;
        yn.row_mut(r).copy_from_slice(&row[off..off + n_y]);
    }
    Ok(EstimationRun {
        times,
        true_states: xs,
        z_states: zs,
        est_states: xh,
        y_clean: yc,
        y_noisy: yn,
        wbar: 0.0,
        vbar: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_roundtrip_is_bit_exact() {
        let values = [
            0.1,
            -3.0e-17,
            std::f64::consts::PI,
            1.0 / 3.0,
            -0.0,
            6.02e23,
            f64::MIN_POSITIVE,
        ];
        for &v in &values {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{v} -> {s}");
        }
    }

    #[test]
    fn trajectory_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let states = Mat::from_rows(&[vec![1.0 / 3.0, -2.0e-9], vec![0.5, 7.25]]);
        let traj = Trajectory::new(vec![0.0, 0.1], states);
        write_trajectory_csv(&path, &traj).unwrap();
        let back = read_trajectory_csv(&path).unwrap();
        assert_eq!(back.times(), traj.times());
        assert_eq!(back.states(), traj.states());
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,x1,x2\n"));
    }

    #[test]
    fn model_json_roundtrip_is_bit_exact() {
        let mlp = Mlp::init(&[2, 7, 5], 9).unwrap();
        let obs = kkl_core::observer::build_observer(2, 1, -2.0, -0.5).unwrap();
        let training = TrainingBlock {
            role: "forward".into(),
            system: "duffing".into(),
            config: crate::config::TrainConfig2 {
                hidden_layers: 1,
                layer_size: 7,
                learning_rate: 1e-3,
                nu: 1.0,
                epochs: 1,
                batch_size: 8,
                seed: 9,
                weight_decay: 0.0,
            },
            n_data: Some(10),
            n_pde: Some(10),
            n2: None,
            initial_risk: RiskEcho { total: 1.0, data_fit: 0.5, pde: 0.5 },
            final_risk: RiskEcho { total: 0.1, data_fit: 0.05, pde: 0.05 },
            max_sample_loss: 0.9,
            best_epoch: 0,
            param_checksum: format!("{:016x}", mlp.checksum()),
        };
        let file = ModelFile::from_parts(&mlp, &obs, training);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        write_json(&path, &file).unwrap();
        let back: ModelFile = read_json(&path).unwrap();
        let mlp2 = back.to_mlp().unwrap();
        assert_eq!(mlp2.checksum(), mlp.checksum());
        assert_eq!(mlp2, mlp);
        assert_eq!(back.observer, file.observer);
    }

    #[test]
    fn malformed_csv_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "t,x1\n0.0,nope\n").unwrap();
        assert!(matches!(read_trajectory_csv(&path), Err(CliError::Config(_))));
    }
}
