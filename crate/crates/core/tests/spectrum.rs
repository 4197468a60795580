mod common;

use common::{jacobi_eigenvalues, jacobi_hermitian_eigenvalues};
use ising_aqc::model::{self, ChainParams, IsingOperator, Schedule};
use ising_aqc::spectrum::{self, gap_trace, scan_minimum_gap};
use ising_aqc::stats::loglog_slope;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn sched() -> Schedule {
    Schedule::with_default_epsilon(20.0).unwrap()
}

#[test]
fn eigh_matches_jacobi_on_chain_hamiltonians() {
    let p = ChainParams::new(vec![1.0, 0.7, 1.3], vec![5.0, -2.0, 4.0], vec![2.5, 1.0]).unwrap();
    for &s in &[0.0, 0.1, 0.37, 0.5, 0.9, 1.0] {
        let h = model::hamiltonian_at(s, &p, &sched()).unwrap();
        let (vals, vecs) = spectrum::eigh_lowest_real(&h, 8).unwrap();
        let oracle = jacobi_eigenvalues(&h);
        for (a, b) in vals.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10, "s={s}: {a} vs {b}");
        }
        let resid = &h * &vecs - &vecs * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals.clone()));
        assert!(resid.amax() < 1e-10);
    }
}

#[test]
fn eigh_rejects_bad_input() {
    let mut m = DMatrix::<f64>::identity(3, 3);
    m[(0, 1)] = 1.0;
    assert!(spectrum::eigh_lowest_real(&m, 2).is_err());
    assert!(spectrum::eigh_lowest_real(&DMatrix::identity(3, 3), 4).is_err());
}

#[test]
fn endpoint_energies_closed_form() {
    let n = 4;
    let p = ChainParams::ideal(n).unwrap();
    let sc = sched();
    let tr = gap_trace(&p, &sc, 101, 6).unwrap();
    let e0 = 2.0 * sc.epsilon0;
    // s = 0: −Ω(0) Σ λ_i / 2; s = 1: Γ(1) × classical minimum
    assert!((tr.energies[0][0] + e0 * n as f64 / 2.0).abs() < 1e-10);
    assert!((tr.energies[100][0] - e0 * (-5.0 * n as f64 - 2.5 * (n - 1) as f64)).abs() < 1e-10);
    assert!(tr.tracking_events.is_empty());
}

#[test]
fn trace_invariants() {
    let p = ChainParams::ideal(3).unwrap();
    let sc = sched();
    let mut tr = gap_trace(&p, &sc, 201, 6).unwrap();
    let coarse = tr.gap.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(tr.delta_min, coarse);
    tr.refine(&p, &sc).unwrap();
    assert!(tr.refined);
    assert!(tr.delta_min <= coarse);
    assert!(tr.gap.iter().all(|&g| tr.delta_min <= g));
    let op = IsingOperator::new(&p).unwrap();
    assert!((spectrum::gap_at(&op, tr.s_star, sc.epsilon0).unwrap() - tr.delta_min).abs() < 1e-12);
    for (i, e) in tr.energies.iter().enumerate() {
        assert!(e.windows(2).all(|w| w[0] <= w[1]));
        assert!((tr.gap[i] - (e[1] - e[0])).abs() < 1e-15);
    }
}

#[test]
fn trace_gauge_is_smooth() {
    let p = ChainParams::ideal(3).unwrap();
    let tr = gap_trace(&p, &sched(), 201, 4).unwrap();
    for w in tr.states.windows(2) {
        for j in 0..4 {
            let o = w[0].column(j).dotc(&w[1].column(j));
            assert!(o.re > 0.9 && o.im.abs() < 1e-12, "overlap {o}");
        }
    }
}

#[test]
fn smooth_gauge_removes_phases() {
    let v = DMatrix::<Complex64>::from_fn(4, 2, |i, j| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0));
    let rot = Complex64::from_polar(1.0, 1.234);
    let w = v.map(|x| x * rot);
    let out = spectrum::smooth_gauge(&v, &w).unwrap();
    assert!((&out - &v).norm() < 1e-14);
    let orth = DMatrix::<Complex64>::from_fn(4, 2, |i, j| Complex64::new(if i == j + 2 { 1.0 } else { 0.0 }, 0.0));
    assert!(spectrum::smooth_gauge(&v, &orth).is_err());
}

#[test]
fn minimum_gap_grid_convergence() {
    for n in [2, 4, 6, 8] {
        let p = ChainParams::ideal(n).unwrap();
        let sc = sched();
        let a = scan_minimum_gap(&p, &sc, 1001).unwrap();
        let b = scan_minimum_gap(&p, &sc, 2001).unwrap();
        assert!((a.delta_min - b.delta_min).abs() < 1e-6 * sc.epsilon0, "N={n}");
    }
}

#[test]
fn minimum_gap_decreases_with_n() {
    let gaps: Vec<f64> = (2..=8)
        .map(|n| scan_minimum_gap(&ChainParams::ideal(n).unwrap(), &sched(), 401).unwrap().delta_min)
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!((gaps[0] - 3.8279415687).abs() < 1e-8);
}

#[test]
fn degenerate_problem_reported() {
    // h = J = 0 leaves every level degenerate at s = 1
    let p = ChainParams::new(vec![1.0, 1.0], vec![0.0, 0.0], vec![0.0]).unwrap();
    assert!(scan_minimum_gap(&p, &sched(), 51).is_err());
}

#[test]
fn second_order_shift_for_antisymmetric_h() {
    let sc = sched();
    let d = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let base = scan_minimum_gap(&ChainParams::ideal(5).unwrap(), &sc, 1001).unwrap().delta_min;
    let amps = [0.01, 0.02, 0.04, 0.08];
    let shifts: Vec<f64> = amps
        .iter()
        .map(|&a| {
            let h: Vec<f64> = d.iter().map(|x| 5.0 * (1.0 + a * x)).collect();
            let p = ChainParams::new(vec![1.0; 5], h, vec![2.5; 4]).unwrap();
            (scan_minimum_gap(&p, &sc, 1001).unwrap().delta_min - base).abs()
        })
        .collect();
    let slope = loglog_slope(&amps, &shifts);
    assert!((slope - 2.0).abs() <= 0.3, "slope {slope}");
}

#[test]
fn csv_output_layout() {
    let p = ChainParams::ideal(2).unwrap();
    let tr = gap_trace(&p, &sched(), 11, 3).unwrap();
    let mut buf = Vec::new();
    tr.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s,E0,E1,E2,gap"));
    assert!(lines.next().unwrap().starts_with("0.00000000000e0,"));
    assert_eq!(text.lines().count(), 12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn eigh_matches_jacobi_random_real(vals in proptest::collection::vec(-5.0f64..5.0, 36)) {
        let a = DMatrix::from_vec(6, 6, vals);
        let sym = (&a + a.transpose()) * 0.5;
        let (got, _) = spectrum::eigh_lowest_real(&sym, 6).unwrap();
        for (x, y) in got.iter().zip(jacobi_eigenvalues(&sym)) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn eigh_matches_jacobi_random_hermitian(re in proptest::collection::vec(-3.0f64..3.0, 16), im in proptest::collection::vec(-3.0f64..3.0, 16)) {
        let a = DMatrix::from_fn(4, 4, |i, j| Complex64::new(re[i * 4 + j], im[i * 4 + j]));
        let h = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
        let (got, vecs) = spectrum::eigh_lowest(&h, 4).unwrap();
        for (x, y) in got.iter().zip(jacobi_hermitian_eigenvalues(&h)) {
            prop_assert!((x - y).abs() < 1e-10);
        }
        let gram = vecs.adjoint() * &vecs;
        prop_assert!((gram - DMatrix::<Complex64>::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn delta_min_bounds_trace(h in proptest::collection::vec(3.0f64..6.0, 3), lam in proptest::collection::vec(0.5f64..1.5, 3)) {
        let p = ChainParams::new(lam, h, vec![2.5, 2.5]).unwrap();
        let sc = sched();
        let mut tr = gap_trace(&p, &sc, 61, 4).unwrap();
        tr.refine(&p, &sc).unwrap();
        prop_assert!(tr.gap.iter().all(|&g| tr.delta_min <= g));
        prop_assert!(tr.delta_min > 0.0);
    }
}
