//! Integrator convergence and benchmark-system behavior.

use kkl_core::mat::Mat;
use kkl_core::ode::{integrate, integrate_driven, rk4_step};
use kkl_core::system::{simulate_plant, System};

/// Endpoint error of the scalar exponential test at a given step.
fn exp_endpoint_error(dt: f64) -> f64 {
    let traj = integrate(|x, dx| dx[0] = -x[0], &[1.0], 1.0, dt).unwrap();
    (traj.last_state()[0] - (-1.0f64).exp()).abs()
}

#[test]
fn rk4_is_fourth_order() {
    // Halving dt divides the endpoint error by ~16.
    let e1 = exp_endpoint_error(0.1);
    let e2 = exp_endpoint_error(0.05);
    let e3 = exp_endpoint_error(0.025);
    let r12 = e1 / e2;
    let r23 = e2 / e3;
    assert!((12.0..=20.0).contains(&r12), "ratio {r12}");
    assert!((12.0..=20.0).contains(&r23), "ratio {r23}");
}

#[test]
fn identical_inputs_give_bit_identical_trajectories() {
    let sys = System::lorenz();
    let sub = sys.default_substeps();
    let a = simulate_plant(&sys, &[0.3, -0.4, 0.9], 100, 0.1, sub, None).unwrap();
    let b = simulate_plant(&sys, &[0.3, -0.4, 0.9], 100, 0.1, sub, None).unwrap();
    assert_eq!(a.states(), b.states());
    assert_eq!(a.times(), b.times());
}

#[test]
fn zero_order_hold_matches_augmented_affine_field() {
    // With a constant input the driven integrator and the autonomous
    // integrator on ż = Az + Bu must agree.
    let a = Mat::from_diag(&[-1.5, -0.5]);
    let b = Mat::from_vec(2, 1, vec![1.0, 2.0]);
    let u_const = 0.7;
    let mut u = Mat::zeros(51, 1);
    u.fill(u_const);
    let driven = integrate_driven(&a, &b, &[0.2, -0.1], &u, 0.1).unwrap();
    let auto = integrate(
        |z, dz| {
            dz[0] = -1.5 * z[0] + 1.0 * u_const;
            dz[1] = -0.5 * z[1] + 2.0 * u_const;
        },
        &[0.2, -0.1],
        5.0,
        0.1,
    )
    .unwrap();
    assert_eq!(driven.len(), auto.len());
    for k in 0..driven.len() {
        for c in 0..2 {
            assert!(
                (driven.state(k)[c] - auto.state(k)[c]).abs() < 1e-12,
                "sample {k} component {c}"
            );
        }
    }
}

#[test]
fn rk4_step_equals_integrate_single_step() {
    let f = |x: &[f64], dx: &mut [f64]| {
        dx[0] = x[1];
        dx[1] = -x[0];
    };
    let single = rk4_step(f, &[1.0, 0.0], 0.1).unwrap();
    let traj = integrate(f, &[1.0, 0.0], 0.1, 0.1).unwrap();
    assert_eq!(traj.len(), 2);
    assert_eq!(traj.state(1), single.as_slice());
}

/// Trajectories started in the unit box stay bounded over [0, 50] at the
/// benchmark sampling rate (forward-completeness proxy on the attractors).
#[test]
fn benchmark_systems_stay_bounded() {
    let cases = [
        (System::duffing(), 2),
        (System::vanderpol(), 2),
        (System::rossler(), 3),
        (System::lorenz(), 3),
    ];
    for (sys, n) in cases {
        let mut rng = kkl_core::rng::seeded(2024);
        for trial in 0..8 {
            let x0: Vec<f64> =
                (0..n).map(|_| kkl_core::rng::uniform(&mut rng, -1.0, 1.0)).collect();
            let traj = simulate_plant(&sys, &x0, 500, 0.1, sys.default_substeps(), None)
                .unwrap_or_else(|e| panic!("{} trial {trial} diverged: {e}", sys.name()));
            let mut sup = 0.0f64;
            for k in 0..traj.len() {
                for &v in traj.state(k) {
                    sup = sup.max(v.abs());
                }
            }
            assert!(sup < 100.0, "{} trial {trial}: ‖x‖∞ = {sup}", sys.name());
        }
    }
}

#[test]
fn output_jacobian_matches_finite_differences() {
    let systems = [System::duffing(), System::vanderpol(), System::rossler(), System::lorenz()];
    for sys in systems {
        let n = sys.n_x();
        let x: Vec<f64> = (0..n).map(|i| 0.3 * (i as f64 + 1.0)).collect();
        let j = sys.eval_output_jacobian(&x).unwrap();
        let h = 1e-6;
        for c in 0..n {
            let mut xp = x.clone();
            xp[c] += h;
            let mut xm = x.clone();
            xm[c] -= h;
            let fd =
                (sys.eval_output(&xp).unwrap()[0] - sys.eval_output(&xm).unwrap()[0]) / (2.0 * h);
            assert!((j.get(0, c) - fd).abs() < 1e-8, "{} column {c}", sys.name());
        }
    }
}
