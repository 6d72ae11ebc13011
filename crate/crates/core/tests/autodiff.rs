//! Finite-difference oracles for the differentiation services.
//!
//! The engine's derivatives are exact; these tests check them against
//! central finite differences computed through the plain forward/risk
//! evaluation path, which never touches the reverse-mode code.

use kkl_core::datagen::DatasetS1;
use kkl_core::mat::Mat;
use kkl_core::nn::{BatchObjective, FlatGradient, Mlp};
use kkl_core::observer::{build_observer, ObserverMatrices};
use kkl_core::rng;
use kkl_core::system::System;
use kkl_core::train::{empirical_risk_s1, eval_risk_s1};

use rand::Rng;

fn random_points(rng: &mut rng::SeededRng, n: usize, dim: usize, scale: f64) -> Mat {
    let mut m = Mat::zeros(n, dim);
    for v in m.data_mut() {
        *v = scale * (2.0 * rng.gen::<f64>() - 1.0);
    }
    m
}

/// Central finite difference of a scalar function of the flat parameters.
fn fd_gradient(mlp: &Mlp, loss: impl Fn(&Mlp) -> f64, h: f64) -> Vec<f64> {
    let flat = mlp.params_to_flat();
    let mut grad = vec![0.0; flat.len()];
    let mut work = mlp.clone();
    for i in 0..flat.len() {
        let step = h * flat[i].abs().max(1.0);
        let mut plus = flat.clone();
        plus[i] += step;
        work.set_from_flat(&plus);
        let lp = loss(&work);
        let mut minus = flat.clone();
        minus[i] -= step;
        work.set_from_flat(&minus);
        let lm = loss(&work);
        grad[i] = (lp - lm) / (2.0 * step);
    }
    grad
}

/// Relative agreement at the gradient's own scale.
fn assert_grad_close(analytic: &[f64], fd: &[f64], rel: f64, context: &str) {
    let scale = analytic
        .iter()
        .chain(fd)
        .fold(0.0f64, |m, &v| m.max(v.abs()))
        .max(1e-12);
    for (i, (&a, &b)) in analytic.iter().zip(fd).enumerate() {
        let tol = rel * a.abs().max(b.abs()).max(1e-3 * scale);
        assert!(
            (a - b).abs() <= tol,
            "{context}: coordinate {i}: analytic {a} vs fd {b} (tol {tol})"
        );
    }
}

#[test]
fn input_jacobian_matches_finite_differences() {
    let mut seeds = rng::seeded(101);
    for trial in 0..6 {
        let sizes: Vec<usize> = match trial % 3 {
            0 => vec![2, 16, 16, 5],
            1 => vec![3, 24, 24, 24, 4],
            _ => vec![4, 32, 8, 3],
        };
        let net = Mlp::init(&sizes, seeds.gen()).unwrap();
        let x: Vec<f64> = (0..sizes[0]).map(|_| 2.0 * seeds.gen::<f64>() - 1.0).collect();
        let j = net.input_jacobian(&x).unwrap();

        let h = 1e-5;
        for c in 0..sizes[0] {
            let mut xp = x.clone();
            xp[c] += h;
            let yp = net.forward(&xp).unwrap();
            let mut xm = x.clone();
            xm[c] -= h;
            let ym = net.forward(&xm).unwrap();
            for r in 0..net.n_out() {
                let fd = (yp[r] - ym[r]) / (2.0 * h);
                assert!(
                    (j.get(r, c) - fd).abs() < 1e-6,
                    "trial {trial}: J[{r}][{c}] = {} vs fd {fd}",
                    j.get(r, c)
                );
            }
        }
    }
}

#[test]
fn jacobian_row_is_gradient_for_scalar_output() {
    let mut seeds = rng::seeded(55);
    let net = Mlp::init(&[3, 20, 20, 1], seeds.gen()).unwrap();
    let x = [0.2, -0.6, 0.9];
    let j = net.input_jacobian(&x).unwrap();
    let h = 1e-6;
    for c in 0..3 {
        let mut xp = x;
        xp[c] += h;
        let mut xm = x;
        xm[c] -= h;
        let fd = (net.forward(&xp).unwrap()[0] - net.forward(&xm).unwrap()[0]) / (2.0 * h);
        assert!((j.get(0, c) - fd).abs() < 1e-6);
    }
}

struct QuadraticFit<'a> {
    targets: &'a Mat,
}

impl BatchObjective for QuadraticFit<'_> {
    fn evaluate(&mut self, y: &Mat, _: Option<&Mat>, dy: &mut Mat, _: Option<&mut Mat>) -> f64 {
        let n = y.rows() as f64;
        let mut loss = 0.0;
        for r in 0..y.rows() {
            for c in 0..y.cols() {
                let e = y.get(r, c) - self.targets.get(r, c);
                loss += e * e;
                dy.set(r, c, 2.0 * e / n);
            }
        }
        loss / n
    }
}

#[test]
fn linear_least_squares_gradient_is_closed_form() {
    // Single linear layer, quadratic loss: ∇_W = (2/N)(WXᵀ − Zᵀ)X, ∇_b likewise.
    let mut seeds = rng::seeded(7);
    let w = {
        let mut m = Mat::zeros(2, 3);
        for v in m.data_mut() {
            *v = 2.0 * seeds.gen::<f64>() - 1.0;
        }
        m
    };
    let net = Mlp {
        layer_sizes: vec![3, 2],
        weights: vec![w.clone()],
        biases: vec![vec![0.3, -0.2]],
        activation: kkl_core::nn::Activation::Tanh,
    };
    let x = random_points(&mut seeds, 12, 3, 1.0);
    let z = random_points(&mut seeds, 12, 2, 1.0);

    let (_, grad) = net.loss_gradient(&x, None, &mut QuadraticFit { targets: &z }).unwrap();

    // Closed-form gradient.
    let n = x.rows() as f64;
    let mut expect = vec![0.0; net.n_params()];
    for r in 0..x.rows() {
        let mut y = vec![0.0; 2];
        for o in 0..2 {
            y[o] = net.biases[0][o]
                + (0..3).map(|i| net.weights[0].get(o, i) * x.get(r, i)).sum::<f64>();
        }
        for o in 0..2 {
            let e = 2.0 * (y[o] - z.get(r, o)) / n;
            for i in 0..3 {
                expect[o * 3 + i] += e * x.get(r, i);
            }
            expect[6 + o] += e;
        }
    }
    for (i, (&a, &b)) in grad.values.iter().zip(&expect).enumerate() {
        assert!((a - b).abs() < 1e-10, "coordinate {i}: {a} vs {b}");
    }
}

/// Analytic gradient of the stage-one risk, assembled through the engine's
/// reverse pass (full-batch).
fn analytic_s1_gradient(
    theta: &Mlp,
    s1: &DatasetS1,
    obs: &ObserverMatrices,
    sys: &System,
    nu: f64,
) -> FlatGradient {
    let mut grad = FlatGradient::zeros(theta.n_params());

    let nd = s1.x_data.rows();
    let trace = theta.forward_trace(&s1.x_data);
    let y = trace.output();
    let mut dy = Mat::zeros(nd, y.cols());
    for r in 0..nd {
        for c in 0..y.cols() {
            dy.set(r, c, 2.0 * (y.get(r, c) - s1.z_data.get(r, c)) / nd as f64);
        }
    }
    theta.backward(&trace, &dy, None, &mut grad);

    let np = s1.x_pde.rows();
    let mut f = Mat::zeros(np, sys.n_x());
    let mut hm = Mat::zeros(np, sys.n_y());
    for r in 0..np {
        sys.dynamics_into(s1.x_pde.row(r), f.row_mut(r));
        sys.output_into(s1.x_pde.row(r), hm.row_mut(r));
    }
    let trace = theta.forward_trace_dual(&s1.x_pde, &f);
    let (yp, up) = (trace.output(), trace.output_tangent().unwrap());
    let mut du = Mat::zeros(np, obs.n_z);
    let mut dyp = Mat::zeros(np, obs.n_z);
    for r in 0..np {
        for i in 0..obs.n_z {
            let mut bh = 0.0;
            for j in 0..sys.n_y() {
                bh += obs.b.get(i, j) * hm.get(r, j);
            }
            let p = up.get(r, i) - obs.eigenvalues[i] * yp.get(r, i) - bh;
            let seed = 2.0 * nu * p / np as f64;
            du.set(r, i, seed);
            dyp.set(r, i, -obs.eigenvalues[i] * seed);
        }
    }
    theta.backward(&trace, &dyp, Some(&du), &mut grad);
    grad
}

#[test]
fn physics_informed_gradient_matches_finite_differences() {
    let sys = System::duffing();
    let obs = build_observer(2, 1, -2.0, -0.5).unwrap();
    let nu = 0.8;
    let mut seeds = rng::seeded(303);

    for trial in 0..3 {
        let sizes = if trial % 2 == 0 { vec![2, 10, 8, 5] } else { vec![2, 12, 5] };
        let theta = Mlp::init(&sizes, seeds.gen()).unwrap();
        let s1 = DatasetS1 {
            x_data: random_points(&mut seeds, 4, 2, 1.0),
            z_data: random_points(&mut seeds, 4, 5, 0.5),
            x_pde: random_points(&mut seeds, 3, 2, 1.0),
            k_star: 0,
            t_star_max: 0.0,
            tau: 3,
            n_trajectories: 1,
            n_pde_trajectories: 1,
        };

        let grad = analytic_s1_gradient(&theta, &s1, &obs, &sys, nu);
        let fd = fd_gradient(
            &theta,
            |net| empirical_risk_s1(net, &s1, &obs, &sys, nu).unwrap().total,
            1e-6,
        );
        assert_grad_close(&grad.values, &fd, 1e-4, &format!("trial {trial}"));
    }
}

#[test]
fn toy_dataset_gradient_including_pde_term() {
    // Three data pairs, three collocation points, one fixed network.
    let sys = System::duffing();
    let obs = build_observer(2, 1, -2.0, -0.5).unwrap();
    let theta = Mlp::init(&[2, 6, 6, 5], 99).unwrap();
    let mut seeds = rng::seeded(17);
    let s1 = DatasetS1 {
        x_data: random_points(&mut seeds, 3, 2, 1.0),
        z_data: random_points(&mut seeds, 3, 5, 1.0),
        x_pde: random_points(&mut seeds, 3, 2, 1.0),
        k_star: 0,
        t_star_max: 0.0,
        tau: 2,
        n_trajectories: 1,
        n_pde_trajectories: 1,
    };
    let grad = analytic_s1_gradient(&theta, &s1, &obs, &sys, 1.0);
    let fd = fd_gradient(
        &theta,
        |net| eval_risk_s1(net, &s1, &obs, &sys, 1.0).unwrap().risk.total,
        1e-6,
    );
    assert_grad_close(&grad.values, &fd, 1e-4, "toy dataset");
}

#[test]
fn lipschitz_bound_dominates_sampled_difference_quotients() {
    let mut seeds = rng::seeded(4242);
    let net = Mlp::init(&[3, 24, 24, 2], seeds.gen()).unwrap();
    let bound = net.lipschitz_upper_bound();
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let a: Vec<f64> = (0..3).map(|_| 4.0 * seeds.gen::<f64>() - 2.0).collect();
        let b: Vec<f64> = (0..3).map(|_| 4.0 * seeds.gen::<f64>() - 2.0).collect();
        let dist: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        if dist < 1e-9 {
            continue;
        }
        let fa = net.forward(&a).unwrap();
        let fb = net.forward(&b).unwrap();
        let dout: f64 = fa.iter().zip(&fb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        worst = worst.max(dout / dist);
    }
    assert!(worst <= bound, "sampled quotient {worst} exceeds bound {bound}");
}

#[test]
fn lipschitz_bound_is_permutation_invariant() {
    let net = Mlp::init(&[2, 10, 10, 3], 808).unwrap();
    let bound = net.lipschitz_upper_bound();

    // Permute the first hidden layer's units and patch the next layer.
    let mut permuted = net.clone();
    let perm: Vec<usize> = (0..10).rev().collect();
    let w1 = net.weights[0].clone();
    let b1 = net.biases[0].clone();
    let w2 = net.weights[1].clone();
    for (new_i, &old_i) in perm.iter().enumerate() {
        permuted.weights[0].row_mut(new_i).copy_from_slice(w1.row(old_i));
        permuted.biases[0][new_i] = b1[old_i];
        for r in 0..w2.rows() {
            permuted.weights[1].set(r, new_i, w2.get(r, old_i));
        }
    }
    let bound_p = permuted.lipschitz_upper_bound();
    assert!(
        (bound - bound_p).abs() <= 1e-9 * bound.max(1.0),
        "bound changed under permutation: {bound} vs {bound_p}"
    );
    // The permuted network computes the same function.
    let x = [0.3, -0.8];
    let (a, b) = (net.forward(&x).unwrap(), permuted.forward(&x).unwrap());
    for (u, v) in a.iter().zip(&b) {
        assert!((u - v).abs() < 1e-12);
    }
}
