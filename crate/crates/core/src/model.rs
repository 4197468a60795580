//! Disordered transverse-field Ising chain and its cosine-ramp schedule.
//!
//! Units: ħ = 1, time in ns, energies in rad/ns. The dimensionless
//! operators `H_I` and `H_P` are scaled by the envelopes `Ω(s)` and `Γ(s)`.
//!
//! Basis convention: qubit 0 is the most significant bit of the basis
//! index and `σ_z|0⟩ = +|0⟩`, so bit value 0 means spin up (`s_i = +1`).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real-symmetric operator on the 2^N-dimensional chain space.
pub type OperatorMatrix = DMatrix<f64>;

/// Largest chain handled by the dense builders unless a cap is given.
pub const DEFAULT_MAX_QUBITS: usize = 14;

/// ε0 = 2π × 0.3183 rad/ns. The 0.3183 GHz is a device value, not 1/π.
#[allow(clippy::approx_constant)]
pub const DEFAULT_EPSILON0: f64 = 2.0 * PI * 0.3183;

pub const IDEAL_LAMBDA: f64 = 1.0;
pub const IDEAL_H: f64 = 5.0;
pub const IDEAL_J: f64 = 2.5;

/// Per-instance chain parameters: transverse fields `lambda`, longitudinal
/// fields `h` and nearest-neighbour couplings `j` (open boundary).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub lambda: Vec<f64>,
    pub h: Vec<f64>,
    pub j: Vec<f64>,
}

impl ChainParams {
    pub fn new(lambda: Vec<f64>, h: Vec<f64>, j: Vec<f64>) -> Result<Self> {
        let params = Self { lambda, h, j };
        params.validate()?;
        Ok(params)
    }

    /// Homogeneous chain with the same value on every site and bond.
    pub fn uniform(n: usize, lambda: f64, h: f64, j: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("chain needs at least one qubit".into()));
        }
        Self::new(vec![lambda; n], vec![h; n], vec![j; n - 1])
    }

    /// The ideal instance λ̄ = 1, h̄ = 5, J̄ = 2.5.
    pub fn ideal(n: usize) -> Result<Self> {
        Self::uniform(n, IDEAL_LAMBDA, IDEAL_H, IDEAL_J)
    }

    pub fn n_qubits(&self) -> usize {
        self.lambda.len()
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_qubits()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.lambda.len();
        if n == 0 {
            return Err(Error::InvalidParams("chain needs at least one qubit".into()));
        }
        if self.h.len() != n {
            return Err(Error::InvalidParams(format!(
                "expected {n} longitudinal fields, got {}",
                self.h.len()
            )));
        }
        if self.j.len() != n - 1 {
            return Err(Error::InvalidParams(format!(
                "expected {} couplings, got {}",
                n - 1,
                self.j.len()
            )));
        }
        let all = self.lambda.iter().chain(&self.h).chain(&self.j);
        if all.clone().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        Ok(())
    }

    fn check_cap(&self, cap: usize) -> Result<()> {
        self.validate()?;
        let n = self.n_qubits();
        if n > cap || n >= usize::BITS as usize {
            return Err(Error::DimensionOverflow { n, cap });
        }
        Ok(())
    }
}

/// Cosine envelopes `Ω(t) = ε0 (1 + cos αt)`, `Γ(t) = ε0 (1 − cos αt)` with
/// `α t_f = π`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Envelope amplitude in rad/ns.
    pub epsilon0: f64,
    /// Protocol duration in ns.
    pub t_f: f64,
}

impl Schedule {
    pub fn new(epsilon0: f64, t_f: f64) -> Result<Self> {
        if !(epsilon0.is_finite() && epsilon0 > 0.0) {
            return Err(Error::InvalidSchedule(format!("epsilon0 must be positive, got {epsilon0}")));
        }
        if !(t_f.is_finite() && t_f > 0.0) {
            return Err(Error::InvalidSchedule(format!("t_f must be positive, got {t_f}")));
        }
        Ok(Self { epsilon0, t_f })
    }

    pub fn with_default_epsilon(t_f: f64) -> Result<Self> {
        Self::new(DEFAULT_EPSILON0, t_f)
    }

    /// Sweep rate α = π / t_f in rad/ns.
    pub fn alpha(&self) -> f64 {
        PI / self.t_f
    }
}

fn check_s(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::OutOfRange(s))
    }
}

/// `(Ω(s), Γ(s))` in rad/ns.
pub fn envelopes(s: f64, sched: &Schedule) -> Result<(f64, f64)> {
    check_s(s)?;
    Ok(envelopes_unchecked(s, sched.epsilon0))
}

pub(crate) fn envelopes_unchecked(s: f64, epsilon0: f64) -> (f64, f64) {
    let c = (PI * s).cos();
    (epsilon0 * (1.0 + c), epsilon0 * (1.0 - c))
}

/// Scalar prefactors of `H'(s)` and `H''(s)` multiplying `H_P − H_I`.
pub(crate) fn derivative_factors(s: f64, epsilon0: f64) -> (f64, f64) {
    (
        epsilon0 * PI * (PI * s).sin(),
        epsilon0 * PI * PI * (PI * s).cos(),
    )
}

/// Bit mask of qubit `i` in an `n`-qubit basis index.
#[inline]
pub fn qubit_mask(n: usize, i: usize) -> usize {
    1usize << (n - 1 - i)
}

/// Spin value `s_i ∈ {+1, −1}` of qubit `i` in basis state `b`.
#[inline]
pub fn spin(n: usize, b: usize, i: usize) -> f64 {
    if b & qubit_mask(n, i) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Classical Ising energy `−Σ h_i s_i − Σ J s_i s_{i+1}` of basis state `b`.
pub fn classical_energy(params: &ChainParams, b: usize) -> f64 {
    let n = params.n_qubits();
    let field: f64 = (0..n).map(|i| params.h[i] * spin(n, b, i)).sum();
    let bonds: f64 = (0..n.saturating_sub(1))
        .map(|i| params.j[i] * spin(n, b, i) * spin(n, b, i + 1))
        .sum();
    -field - bonds
}

/// Diagonal of `H_P` in the computational basis.
pub fn problem_diagonal(params: &ChainParams) -> Vec<f64> {
    (0..params.dim()).map(|b| classical_energy(params, b)).collect()
}

/// Dimensionless `H_I = −Σ (λ_i / 2) σ_x^(i)`.
pub fn build_initial_hamiltonian(params: &ChainParams) -> Result<OperatorMatrix> {
    build_initial_hamiltonian_capped(params, DEFAULT_MAX_QUBITS)
}

pub fn build_initial_hamiltonian_capped(params: &ChainParams, cap: usize) -> Result<OperatorMatrix> {
    params.check_cap(cap)?;
    let n = params.n_qubits();
    let dim = params.dim();
    let mut m = DMatrix::zeros(dim, dim);
    for b in 0..dim {
        for (i, &l) in params.lambda.iter().enumerate() {
            m[(b ^ qubit_mask(n, i), b)] -= 0.5 * l;
        }
    }
    Ok(m)
}

/// Dimensionless, diagonal `H_P = −Σ h_i σ_z^(i) − Σ J σ_z^(i) σ_z^(i+1)`.
pub fn build_problem_hamiltonian(params: &ChainParams) -> Result<OperatorMatrix> {
    build_problem_hamiltonian_capped(params, DEFAULT_MAX_QUBITS)
}

pub fn build_problem_hamiltonian_capped(params: &ChainParams, cap: usize) -> Result<OperatorMatrix> {
    params.check_cap(cap)?;
    Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(problem_diagonal(params))))
}

/// `H(s) = Ω(s) H_I + Γ(s) H_P` in rad/ns.
pub fn hamiltonian_at(s: f64, params: &ChainParams, sched: &Schedule) -> Result<OperatorMatrix> {
    check_s(s)?;
    IsingOperator::new(params)?.dense_at(s, sched.epsilon0)
}

/// Analytic `(H'(s), H''(s))`, derivatives with respect to `s = t / t_f`.
pub fn hamiltonian_s_derivatives(
    s: f64,
    params: &ChainParams,
    sched: &Schedule,
) -> Result<(OperatorMatrix, OperatorMatrix)> {
    check_s(s)?;
    let diff = IsingOperator::new(params)?.dense_difference();
    let (d1, d2) = derivative_factors(s, sched.epsilon0);
    Ok((&diff * d1, &diff * d2))
}

/// Matrix-free form of the chain Hamiltonian.
///
/// `H_I` only flips single bits and `H_P` is diagonal, so applying
/// `Ω H_I + Γ H_P` to a state costs `O(N 2^N)`.
#[derive(Debug, Clone)]
pub struct IsingOperator {
    n: usize,
    half_lambda: Vec<f64>,
    masks: Vec<usize>,
    diag: Vec<f64>,
}

impl IsingOperator {
    pub fn new(params: &ChainParams) -> Result<Self> {
        Self::with_cap(params, DEFAULT_MAX_QUBITS)
    }

    pub fn with_cap(params: &ChainParams, cap: usize) -> Result<Self> {
        params.check_cap(cap)?;
        let n = params.n_qubits();
        Ok(Self {
            n,
            half_lambda: params.lambda.iter().map(|l| 0.5 * l).collect(),
            masks: (0..n).map(|i| qubit_mask(n, i)).collect(),
            diag: problem_diagonal(params),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Diagonal of the dimensionless `H_P`.
    pub fn problem_diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// `(min, max)` of the `H_P` diagonal.
    pub fn diagonal_range(&self) -> (f64, f64) {
        self.diag
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| (lo.min(d), hi.max(d)))
    }

    /// Row-sum bound on the off-diagonal part `H_I`.
    pub fn transverse_bound(&self) -> f64 {
        self.half_lambda.iter().map(|l| l.abs()).sum()
    }

    /// `out = (omega·H_I + gamma·H_P − shift)·x`.
    pub fn apply(&self, omega: f64, gamma: f64, shift: f64, x: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        for (b, o) in out.iter_mut().enumerate() {
            let mut acc = x[b] * (gamma * self.diag[b] - shift);
            let mut flip = Complex64::new(0.0, 0.0);
            for (&mask, &hl) in self.masks.iter().zip(&self.half_lambda) {
                flip += x[b ^ mask] * hl;
            }
            acc -= flip * omega;
            *o = acc;
        }
    }

    /// `out = (H_P − H_I)·x`, the direction of `H'(s)`.
    pub fn apply_difference(&self, x: &[Complex64], out: &mut [Complex64]) {
        self.apply(-1.0, 1.0, 0.0, x, out);
    }

    /// Dense `Ω(s) H_I + Γ(s) H_P`.
    pub fn dense_at(&self, s: f64, epsilon0: f64) -> Result<OperatorMatrix> {
        check_s(s)?;
        let (omega, gamma) = envelopes_unchecked(s, epsilon0);
        Ok(self.dense_combination(omega, gamma))
    }

    /// Dense `H_P − H_I`.
    pub fn dense_difference(&self) -> OperatorMatrix {
        self.dense_combination(-1.0, 1.0)
    }

    pub fn dense_combination(&self, omega: f64, gamma: f64) -> OperatorMatrix {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for b in 0..dim {
            m[(b, b)] = gamma * self.diag[b];
            for (&mask, &hl) in self.masks.iter().zip(&self.half_lambda) {
                m[(b ^ mask, b)] -= omega * hl;
            }
        }
        m
    }
}
