//! Fixed-step integration of autonomous and input-driven dynamics.
//!
//! The integrator is the classical fourth-order Runge–Kutta scheme with a
//! fixed step. Driven systems hold the sampled input constant over each step
//! (zero-order hold, evaluated at the left sample), which is the only causal
//! reconstruction available when the input exists as samples.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mat::{matvec, Mat};
use crate::math;

/// Sampled solution on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Mat,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Mat) -> Self {
        assert_eq!(times.len(), states.rows(), "times/states length mismatch");
        Trajectory { times, states }
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.states.cols()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.times[k]
    }

    pub fn state(&self, k: usize) -> &[f64] {
        self.states.row(k)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &Mat {
        &self.states
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.row(self.states.rows() - 1)
    }
}

struct Rk4Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Scratch {
    fn new(dim: usize) -> Self {
        Rk4Scratch {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }
}

/// One classical RK4 update of `x` under the field `f`, written into `out`.
fn rk4_into<F>(f: &F, x: &[f64], dt: f64, out: &mut [f64], s: &mut Rk4Scratch)
where
    F: Fn(&[f64], &mut [f64]) + ?Sized,
{
    let n = x.len();
    f(x, &mut s.k1);
    for i in 0..n {
        s.tmp[i] = x[i] + 0.5 * dt * s.k1[i];
    }
    f(&s.tmp, &mut s.k2);
    for i in 0..n {
        s.tmp[i] = x[i] + 0.5 * dt * s.k2[i];
    }
    f(&s.tmp, &mut s.k3);
    for i in 0..n {
        s.tmp[i] = x[i] + dt * s.k3[i];
    }
    f(&s.tmp, &mut s.k4);
    for i in 0..n {
        out[i] = x[i] + dt / 6.0 * (s.k1[i] + 2.0 * s.k2[i] + 2.0 * s.k3[i] + s.k4[i]);
    }
}

/// Single classical RK4 step.
pub fn rk4_step<F>(f: F, x: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("rk4_step: dt must be positive, got {dt}")));
    }
    let mut s = Rk4Scratch::new(x.len());
    let mut out = vec![0.0; x.len()];
    rk4_into(&f, x, dt, &mut out, &mut s);
    if !math::all_finite(&out) {
        return Err(Error::Divergence { step: 0 });
    }
    Ok(out)
}

/// Number of `dt`-sized steps covering `[0, t_end]`, with a guard against
/// `t_end/dt` landing just below an integer.
pub(crate) fn step_count(t_end: f64, dt: f64) -> usize {
    math::floor(t_end / dt + 1e-9) as usize
}

/// Integrate `ẋ = f(x)` from `x0`, sampling at `t = 0, dt, …, ⌊t_end/dt⌋·dt`.
pub fn integrate<F>(f: F, x0: &[f64], t_end: f64, dt: f64) -> Result<Trajectory>
where
    F: Fn(&[f64], &mut [f64]),
{
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("integrate: dt must be positive, got {dt}")));
    }
    if t_end < dt {
        return Err(Error::InvalidArgument(format!(
            "integrate: t_end ({t_end}) must be at least dt ({dt})"
        )));
    }
    integrate_steps(&f, x0, step_count(t_end, dt), dt, 1)
}

/// Integrate for an explicit number of sample steps, optionally subdividing
/// each sample interval into `substeps` internal RK4 steps. The sample grid
/// stays `t_k = k·dt` regardless of `substeps`.
pub fn integrate_steps<F>(
    f: &F,
    x0: &[f64],
    n_steps: usize,
    dt: f64,
    substeps: usize,
) -> Result<Trajectory>
where
    F: Fn(&[f64], &mut [f64]) + ?Sized,
{
    if substeps == 0 {
        return Err(Error::InvalidArgument("integrate: substeps must be >= 1".into()));
    }
    if !math::all_finite(x0) {
        return Err(Error::Divergence { step: 0 });
    }
    let dim = x0.len();
    let h = dt / substeps as f64;
    let mut s = Rk4Scratch::new(dim);
    let mut states = Mat::zeros(n_steps + 1, dim);
    states.row_mut(0).copy_from_slice(x0);
    let mut cur = x0.to_vec();
    let mut next = vec![0.0; dim];
    for k in 0..n_steps {
        for _ in 0..substeps {
            rk4_into(f, &cur, h, &mut next, &mut s);
            core::mem::swap(&mut cur, &mut next);
        }
        if !math::all_finite(&cur) {
            return Err(Error::Divergence { step: k + 1 });
        }
        states.row_mut(k + 1).copy_from_slice(&cur);
    }
    let times = (0..=n_steps).map(|k| k as f64 * dt).collect();
    Ok(Trajectory::new(times, states))
}

/// Integrate `ż = A z + B u(t)` where `u` is a sampled signal on the `dt`
/// grid, held constant over each step. The trajectory has one sample per
/// input row; step `k` uses input row `k`.
pub fn integrate_driven(a: &Mat, b: &Mat, z0: &[f64], u: &Mat, dt: f64) -> Result<Trajectory> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "integrate_driven: dt must be positive, got {dt}"
        )));
    }
    let n = z0.len();
    if a.rows() != n || a.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "integrate_driven: A is {}x{}, state dimension is {n}",
            a.rows(),
            a.cols()
        )));
    }
    if b.rows() != n || b.cols() != u.cols() {
        return Err(Error::DimensionMismatch(format!(
            "integrate_driven: B is {}x{}, expected {n}x{}",
            b.rows(),
            b.cols(),
            u.cols()
        )));
    }
    if u.rows() == 0 {
        return Err(Error::EmptyInput("integrate_driven: input signal has no samples".into()));
    }

    let n_steps = u.rows() - 1;
    let mut s = Rk4Scratch::new(n);
    let mut states = Mat::zeros(u.rows(), n);
    states.row_mut(0).copy_from_slice(z0);
    let mut cur = z0.to_vec();
    let mut next = vec![0.0; n];
    let mut bu = vec![0.0; n];
    for k in 0..n_steps {
        matvec(b, u.row(k), &mut bu);
        {
            let field = |z: &[f64], dz: &mut [f64]| {
                matvec(a, z, dz);
                for (d, v) in dz.iter_mut().zip(&bu) {
                    *d += v;
                }
            };
            rk4_into(&field, &cur, dt, &mut next, &mut s);
        }
        core::mem::swap(&mut cur, &mut next);
        if !math::all_finite(&cur) {
            return Err(Error::Divergence { step: k + 1 });
        }
        states.row_mut(k + 1).copy_from_slice(&cur);
    }
    let times = (0..=n_steps).map(|k| k as f64 * dt).collect();
    Ok(Trajectory::new(times, states))
}
