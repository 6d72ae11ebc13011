//! Numeric verification of the observer envelopes and structure.

use kkl_core::mat::{gemm_acc, spectral_norm, Mat};
use kkl_core::observer::{build_observer, exp_envelope};

/// `exp(At)` for the diagonal built observer.
fn diag_expm(eigen: &[f64], t: f64) -> Mat {
    Mat::from_diag(&eigen.iter().map(|l| (l * t).exp()).collect::<Vec<_>>())
}

#[test]
fn envelope_dominates_matrix_exponential() {
    for (nx, ny) in [(2usize, 1usize), (3, 1)] {
        let obs = build_observer(nx, ny, -2.0, -0.5).unwrap();
        let mut t = 0.0;
        while t <= 20.0 {
            let e = diag_expm(&obs.eigenvalues, t);
            let norm = spectral_norm(&e, 200, 1e-13);
            let env = exp_envelope(&obs, t);
            assert!(
                norm <= env + 1e-12,
                "t = {t}: ‖exp(At)‖ = {norm} exceeds envelope {env}"
            );
            t += 0.5;
        }
    }
}

#[test]
fn integral_bound_on_driven_response() {
    // ∫₀ᵗ ‖exp(Aτ)B‖ dτ ≤ (cond(V)/|λ_min|)‖B‖(1 − e^{λ_min t}).
    let obs = build_observer(2, 1, -2.0, -0.5).unwrap();
    let norm_b = obs.norm_b();
    for &t_end in &[0.5f64, 2.0, 10.0] {
        let d_tau = 1e-3f64;
        let steps = (t_end / d_tau).round() as usize;
        let col_norm = |tau: f64| -> f64 {
            obs.eigenvalues.iter().map(|l| (2.0 * l * tau).exp()).sum::<f64>().sqrt()
        };
        let mut integral = 0.5 * (col_norm(0.0) + col_norm(t_end)) * d_tau;
        for k in 1..steps {
            integral += col_norm(k as f64 * d_tau) * d_tau;
        }
        let rhs = obs.cond_v / obs.lambda_min.abs()
            * norm_b
            * (1.0 - (obs.lambda_min * t_end).exp());
        assert!(
            integral <= rhs + 1e-6,
            "t = {t_end}: trapezoid integral {integral} exceeds bound {rhs}"
        );
    }
}

/// Rank of a square matrix by Gaussian elimination with partial pivoting.
fn rank(mut m: Mat, tol: f64) -> usize {
    let n = m.rows();
    let mut rank = 0;
    let mut col = 0;
    while rank < n && col < n {
        let mut pivot = rank;
        for r in rank + 1..n {
            if m.get(r, col).abs() > m.get(pivot, col).abs() {
                pivot = r;
            }
        }
        if m.get(pivot, col).abs() <= tol {
            col += 1;
            continue;
        }
        if pivot != rank {
            for c in 0..n {
                let (a, b) = (m.get(rank, c), m.get(pivot, c));
                m.set(rank, c, b);
                m.set(pivot, c, a);
            }
        }
        for r in rank + 1..n {
            let factor = m.get(r, col) / m.get(rank, col);
            for c in col..n {
                let v = m.get(r, c) - factor * m.get(rank, c);
                m.set(r, c, v);
            }
        }
        rank += 1;
        col += 1;
    }
    rank
}

#[test]
fn built_pairs_are_controllable() {
    for (nx, ny) in [(2usize, 1usize), (3, 1)] {
        let obs = build_observer(nx, ny, -2.0, -0.5).unwrap();
        let n = obs.n_z;
        let a = obs.a_mat();
        // K = [B, AB, …, A^{n−1}B]
        let mut k = Mat::zeros(n, n);
        let mut col = obs.b.clone();
        for j in 0..n {
            for r in 0..n {
                k.set(r, j, col.get(r, 0));
            }
            let mut next = Mat::zeros(n, 1);
            gemm_acc(&mut next, &a, &col);
            col = next;
        }
        assert_eq!(rank(k, 1e-10), n, "controllability matrix rank for n_z = {n}");
    }
}
