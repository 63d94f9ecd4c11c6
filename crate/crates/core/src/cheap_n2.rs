//! Reduced-circuit scheme for two qubits.
//!
//! Every `Q^k = i[O^k, H]` is expanded as `Σ_j q_{kj} σ_j` over the 16
//! two-qubit strings. The step cost becomes the regression loss
//! `2^N (𝒱 + 𝒬β)ᵀ(𝒱 + 𝒬β)` with `𝒱_j = v_j`. Each column `q_k` follows
//! classically from the 16 overlaps `e_h = <φ|σ_h ⊗ O^k|φ>` and the
//! structure coefficients, so a step needs only `16·L` circuits.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::ansatz::AnsatzSpec;
use crate::error::{Error, Result};
use crate::estimator::{CircuitCount, LayerSystem, Solution, DEFAULT_CUTOFF};
use crate::models::HamiltonianPair;
use crate::pauli::{PauliString, PauliSum, StructureTable};
use crate::simulator::{measure_pauli, overlap_test, phi_gates, Readout, StateVector};

/// Number of two-qubit Pauli strings.
pub const BASIS: usize = 16;

/// How the 16 overlaps are read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseMeasurement {
    /// Ancilla circuit with `R_y` readout.
    Ancilla,
    /// Parity measurement of `σ_h ⊗ B^k` after undoing `U^k` on the second register.
    Direct,
}

fn require_two(n: usize) -> Result<()> {
    if n != 2 {
        return Err(Error::OnlyTwoQubits(n));
    }
    Ok(())
}

/// `e_h = <φ|σ_h ⊗ U^k B^k U^{k†}|φ>` for the 16 strings `σ_h` (indexed by code).
pub fn base_expectations(spec: &AnsatzSpec, row: &[f64], k: usize, readout: &Readout, how: BaseMeasurement) -> Result<[f64; BASIS]> {
    require_two(spec.n_qubits())?;
    let u = spec.partial_unitary(row, k)?;
    let b = spec.generators()[k - 1];
    let prepared = match how {
        BaseMeasurement::Ancilla => None,
        BaseMeasurement::Direct => {
            let mut s = StateVector::zero(4);
            for g in phi_gates(2, 0, 2) {
                s.apply(&g);
            }
            for g in u.dagger().gates() {
                s.apply(&g.shifted(2));
            }
            Some(s)
        }
    };
    let mut out = [0.0; BASIS];
    for (h, slot) in out.iter_mut().enumerate() {
        let sigma_h = PauliString::from_code(2, h as u64);
        let r = readout.derive(h as u64);
        *slot = match &prepared {
            None => overlap_test(&u, &b, &sigma_h, &r)?,
            Some(s) => {
                let joint = sigma_h.embed(0, 4).mul(&b.embed(2, 4))?.1;
                measure_pauli(s, &joint, &r)?
            }
        };
    }
    Ok(out)
}

/// Column `q_{k·}` of `𝒬` from the overlaps of layer `k`:
/// `q_j = Σ_{l,h} h_l e_h · i F_{hl}` where `[σ_h^T, σ_l] = F_{hl} σ_j`.
pub fn reconstruct_q(base: &[f64; BASIS], table: &StructureTable, h: &PauliSum) -> Result<[f64; BASIS]> {
    if table.n_qubits() != 2 || h.n_qubits() != 2 {
        return Err(Error::OnlyTwoQubits(h.n_qubits()));
    }
    let i = Complex64::new(0.0, 1.0);
    let mut q = [Complex64::new(0.0, 0.0); BASIS];
    for (sigma_l, h_l) in h.iter() {
        for (code, e) in base.iter().enumerate() {
            if *e == 0.0 {
                continue;
            }
            let sigma_h = PauliString::from_code(2, code as u64);
            if let Some((sigma_j, f)) = table.get(&sigma_h, sigma_l) {
                q[sigma_j.code() as usize] += h_l * e * i * f;
            }
        }
    }
    let mut out = [0.0; BASIS];
    for (o, z) in out.iter_mut().zip(q) {
        debug_assert!(z.im.abs() < 1e-9 * (1.0 + z.re.abs()));
        *o = z.re;
    }
    Ok(out)
}

/// Regression data over free parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionSystem {
    /// `𝒱`, Pauli coefficients of `V` by string code.
    pub v_vec: DVector<f64>,
    /// `𝒬`, 16 × (free parameters).
    pub q_mat: DMatrix<f64>,
    /// Per layer, before summing tied columns.
    pub q_layers: DMatrix<f64>,
    pub n_qubits: usize,
    pub count: CircuitCount,
}

impl RegressionSystem {
    /// Normal equations `X = 2^N 𝒬ᵀ𝒬`, `b = −2^N 𝒬ᵀ𝒱` over free parameters.
    pub fn normal_equations(&self) -> (DMatrix<f64>, DVector<f64>) {
        let s = (1u64 << self.n_qubits) as f64;
        (self.q_mat.transpose() * &self.q_mat * s, -(self.q_mat.transpose() * &self.v_vec) * s)
    }

    /// The same system per generator layer.
    pub fn layer_system(&self) -> LayerSystem {
        let s = (1u64 << self.n_qubits) as f64;
        LayerSystem {
            x: self.q_layers.transpose() * &self.q_layers * s,
            b: -(self.q_layers.transpose() * &self.v_vec) * s,
            count: self.count,
            x_noise: 0.0,
        }
    }

    /// `2^N ‖𝒱 + 𝒬β‖²`.
    pub fn cost(&self, beta: &DVector<f64>) -> f64 {
        (&self.v_vec + &self.q_mat * beta).norm_squared() * (1u64 << self.n_qubits) as f64
    }
}

/// Overlaps for every layer, then `𝒬`.
pub fn build_regression(
    pair: &HamiltonianPair,
    spec: &AnsatzSpec,
    row: &[f64],
    mu: f64,
    readout: &Readout,
    how: BaseMeasurement,
) -> Result<RegressionSystem> {
    require_two(pair.n_qubits)?;
    require_two(spec.n_qubits())?;
    let table = StructureTable::build(2)?;
    let h = pair.h_mu(mu);
    let l = spec.n_layers();
    let cols: Vec<[f64; BASIS]> = (1..=l)
        .into_par_iter()
        .map(|k| {
            let base = base_expectations(spec, row, k, &readout.derive(k as u64), how)?;
            reconstruct_q(&base, &table, &h)
        })
        .collect::<Result<_>>()?;
    let q_layers = DMatrix::from_fn(BASIS, l, |j, k| cols[k][j]);
    let mut q_mat = DMatrix::zeros(BASIS, spec.n_params());
    for k in 0..l {
        let mut col = q_mat.column_mut(spec.param_of(k));
        col += q_layers.column(k);
    }
    let v_vec = DVector::from_fn(BASIS, |j, _| pair.v.coefficient(&PauliString::from_code(2, j as u64)).re);
    Ok(RegressionSystem { v_vec, q_mat, q_layers, n_qubits: 2, count: CircuitCount { n_b: 0, n_x: 0, n_base: BASIS * l } })
}

/// Least-squares `β` minimizing `‖𝒱 + 𝒬β‖²`, minimum norm. Singular values
/// below `√DEFAULT_CUTOFF` of the largest are dropped, which matches the
/// eigenvalue cutoff of [`crate::estimator::solve_step`] on `X = 2^N 𝒬ᵀ𝒬`.
pub fn solve_regression(sys: &RegressionSystem) -> Result<Solution> {
    solve_regression_with(sys, DEFAULT_CUTOFF)
}

pub fn solve_regression_with(sys: &RegressionSystem, rel_cutoff: f64) -> Result<Solution> {
    if sys.q_mat.iter().chain(sys.v_vec.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NumericalBreakdown { step: 0, reason: "non-finite regression data".into() });
    }
    let p = sys.q_mat.ncols();
    let svd = sys.q_mat.clone().svd(true, true);
    let (u, vt) = (svd.u.as_ref().expect("requested"), svd.v_t.as_ref().expect("requested"));
    let top = svd.singular_values.iter().fold(0.0f64, |m, s| m.max(*s));
    let cut = rel_cutoff.sqrt() * top;
    let mut beta = DVector::zeros(p);
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            let coef = -u.column(k).dot(&sys.v_vec) / s;
            beta += vt.row(k).transpose() * coef;
            rank += 1;
        }
    }
    let (x, b) = sys.normal_equations();
    let residual = (&x * &beta - &b).norm();
    let min_eigenvalue = if rank < p { 0.0 } else { svd.singular_values.iter().fold(f64::INFINITY, |m, s| m.min(s * s)) * (1u64 << sys.n_qubits) as f64 };
    Ok(Solution { beta, residual, rank, min_eigenvalue })
}
