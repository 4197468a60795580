//! Independent reference implementations used as test oracles.

#![allow(dead_code)]

use ising_aqc::model::{envelopes, ChainParams, Schedule};
use ising_aqc::{model, propagation};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Cyclic Jacobi eigenvalues of a real symmetric matrix, ascending.
pub fn jacobi_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[(i, j)].powi(2)).sum();
        if off.sqrt() < 1e-14 * (1.0 + m.amax()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenvalues of a complex Hermitian matrix through the real embedding
/// `[[A, −B], [B, A]]`, which doubles every eigenvalue.
pub fn jacobi_hermitian_eigenvalues(h: &DMatrix<Complex64>) -> Vec<f64> {
    let n = h.nrows();
    let mut e = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            e[(i, j)] = z.re;
            e[(i + n, j + n)] = z.re;
            e[(i, j + n)] = -z.im;
            e[(i + n, j)] = z.im;
        }
    }
    jacobi_eigenvalues(&e).into_iter().step_by(2).collect()
}

/// Classical RK4 on `i ψ' = H(t) ψ` with `steps` uniform steps in t.
pub fn rk4_evolve(params: &ChainParams, sched: &Schedule, psi0: &DVector<Complex64>, steps: usize) -> DVector<Complex64> {
    let hi = model::build_initial_hamiltonian(params).unwrap().map(|x| Complex64::new(x, 0.0));
    let hp = model::build_problem_hamiltonian(params).unwrap().map(|x| Complex64::new(x, 0.0));
    let minus_i = Complex64::new(0.0, -1.0);
    let rhs = |t: f64, psi: &DVector<Complex64>| -> DVector<Complex64> {
        let (om, ga) = envelopes((t / sched.t_f).clamp(0.0, 1.0), sched).unwrap();
        (&hi * psi * Complex64::new(om, 0.0) + &hp * psi * Complex64::new(ga, 0.0)) * minus_i
    };
    let dt = sched.t_f / steps as f64;
    let mut psi = psi0.clone();
    for k in 0..steps {
        let t = k as f64 * dt;
        let k1 = rhs(t, &psi);
        let k2 = rhs(t + 0.5 * dt, &(&psi + &k1 * Complex64::new(0.5 * dt, 0.0)));
        let k3 = rhs(t + 0.5 * dt, &(&psi + &k2 * Complex64::new(0.5 * dt, 0.0)));
        let k4 = rhs(t + dt, &(&psi + &k3 * Complex64::new(dt, 0.0)));
        psi += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4) * Complex64::new(dt / 6.0, 0.0);
    }
    psi
}

/// Ground state of `H(0)` by dense diagonalization.
pub fn initial_ground_state(params: &ChainParams) -> DVector<Complex64> {
    let h = model::build_initial_hamiltonian(params).unwrap();
    let eig = nalgebra::SymmetricEigen::new(h);
    let i = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    eig.eigenvectors.column(i).map(|x| Complex64::new(x, 0.0))
}

/// `|⟨target|ψ⟩|²` against the final classical ground state.
pub fn success(params: &ChainParams, psi: &DVector<Complex64>) -> f64 {
    let target = propagation::final_ground_state(params).unwrap();
    target.dotc(psi).norm_sqr()
}
