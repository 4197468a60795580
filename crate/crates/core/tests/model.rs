use ising_aqc::model::{self, ChainParams, IsingOperator, Schedule};
use num_complex::Complex64;
use proptest::prelude::*;

fn chain(n: usize) -> impl Strategy<Value = ChainParams> {
    (
        proptest::collection::vec(0.1f64..3.0, n),
        proptest::collection::vec(-6.0f64..6.0, n),
        proptest::collection::vec(-4.0f64..4.0, n - 1),
    )
        .prop_map(|(l, h, j)| ChainParams::new(l, h, j).unwrap())
}

/// Brute-force classical energy by decoding every bit.
fn classical(p: &ChainParams, b: usize) -> f64 {
    let n = p.n_qubits();
    let s = |i: usize| if (b >> (n - 1 - i)) & 1 == 0 { 1.0 } else { -1.0 };
    let mut e = 0.0;
    for i in 0..n {
        e -= p.h[i] * s(i);
    }
    for i in 0..n - 1 {
        e -= p.j[i] * s(i) * s(i + 1);
    }
    e
}

#[test]
fn two_qubit_problem_diagonal() {
    let d = model::problem_diagonal(&ChainParams::ideal(2).unwrap());
    assert_eq!(d, vec![-12.5, 2.5, 2.5, 7.5]);
}

#[test]
fn ideal_ground_state_is_all_up() {
    for n in 2..=8 {
        let d = model::problem_diagonal(&ChainParams::ideal(n).unwrap());
        let min = d.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(d[0], min);
        assert_eq!(d[0], -5.0 * n as f64 - 2.5 * (n - 1) as f64);
        assert_eq!(d.iter().filter(|&&x| x == min).count(), 1);
    }
}

#[test]
fn dimension_cap() {
    let p = ChainParams::ideal(15).unwrap();
    assert!(IsingOperator::new(&p).is_err());
    assert!(model::build_initial_hamiltonian_capped(&ChainParams::ideal(3).unwrap(), 2).is_err());
}

#[test]
fn invalid_inputs() {
    assert!(ChainParams::new(vec![1.0, 1.0], vec![1.0], vec![1.0]).is_err());
    assert!(ChainParams::new(vec![1.0], vec![f64::NAN], vec![]).is_err());
    assert!(Schedule::new(0.0, 1.0).is_err());
    assert!(Schedule::new(1.0, -1.0).is_err());
    let sc = Schedule::with_default_epsilon(1.0).unwrap();
    assert!(model::envelopes(1.5, &sc).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn problem_diagonal_matches_enumeration(p in (2usize..6).prop_flat_map(chain)) {
        let d = model::problem_diagonal(&p);
        for (b, &v) in d.iter().enumerate() {
            prop_assert!((v - classical(&p, b)).abs() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_is_symmetric(p in (2usize..5).prop_flat_map(chain), s in 0.0f64..=1.0) {
        let sc = Schedule::with_default_epsilon(10.0).unwrap();
        let h = model::hamiltonian_at(s, &p, &sc).unwrap();
        prop_assert_eq!(&h, &h.transpose());
    }

    /// H_I is a sum of commuting single-site terms, so its spectrum is every
    /// sign combination of ∓λ_i/2.
    #[test]
    fn initial_spectrum_closed_form(p in (2usize..5).prop_flat_map(chain)) {
        let n = p.n_qubits();
        let h = model::build_initial_hamiltonian(&p).unwrap();
        let mut got: Vec<f64> = nalgebra::SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        got.sort_by(f64::total_cmp);
        let mut want: Vec<f64> = (0..1usize << n)
            .map(|b| (0..n).map(|i| if (b >> i) & 1 == 0 { -p.lambda[i] / 2.0 } else { p.lambda[i] / 2.0 }).sum())
            .collect();
        want.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn envelope_identities(s in 0.0f64..=1.0) {
        let sc = Schedule::with_default_epsilon(7.0).unwrap();
        let (om, ga) = model::envelopes(s, &sc).unwrap();
        prop_assert!((om + ga - 2.0 * sc.epsilon0).abs() < 1e-12);
        prop_assert!(om >= 0.0 && ga >= 0.0);
    }

    #[test]
    fn matrix_free_matches_dense(p in (2usize..5).prop_flat_map(chain), om in 0.0f64..2.0, ga in 0.0f64..2.0, shift in -3.0f64..3.0) {
        let op = IsingOperator::new(&p).unwrap();
        let dim = op.dim();
        let x: Vec<Complex64> = (0..dim).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.7).cos())).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        op.apply(om, ga, shift, &x, &mut out);
        let dense = op.dense_combination(om, ga);
        for r in 0..dim {
            let want: Complex64 = (0..dim).map(|c| x[c] * dense[(r, c)]).sum::<Complex64>() - x[r] * shift;
            prop_assert!((out[r] - want).norm() < 1e-11);
        }
    }
}
