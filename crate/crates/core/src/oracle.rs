//! Dense linear algebra used as ground truth: Hermitian eigensolves,
//! matrix exponentials and the brute-force step cost.

use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::ansatz::AnsatzSpec;
use crate::error::{Error, Result};
use crate::models::HamiltonianPair;
use crate::pauli::hermitian_deviation;
use crate::CMatrix;

/// Largest register the dense oracle accepts.
pub const MAX_DENSE_QUBITS: usize = 12;

/// Eigenvalues within this relative distance are treated as one cluster.
const CLUSTER_TOL: f64 = 1e-8;

/// Amplitudes below this magnitude are skipped when fixing phases.
const PHASE_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct Eigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `i` is the eigenvector of `values[i]`.
    pub vectors: CMatrix,
}

/// Square, finite and Hermitian; any dimension up to `2^MAX_DENSE_QUBITS`
/// (symmetry sectors need not be powers of two).
fn check_hermitian(h: &CMatrix) -> Result<()> {
    if h.nrows() != h.ncols() || h.nrows() == 0 || h.nrows() > 1 << MAX_DENSE_QUBITS {
        return Err(Error::BadDimension(h.nrows().max(h.ncols())));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Invalid("matrix has non-finite entries".into()));
    }
    let dev = hermitian_deviation(h);
    if dev > 1e-10 * (1.0 + h.norm()) {
        return Err(Error::NonHermitian { deviation: dev });
    }
    Ok(())
}

/// Eigen-decomposition with a reproducible gauge.
///
/// Eigenvalues ascend. Inside a degenerate cluster the basis is rebuilt by
/// projecting computational basis vectors `e_0, e_1, …` onto the cluster and
/// orthonormalizing, so the choice does not depend on the solver. Every
/// vector is then rotated so its first significant amplitude is real and
/// positive.
pub fn eig(h: &CMatrix) -> Result<Eigen> {
    check_hermitian(h)?;
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let dec = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..dec.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| dec.eigenvalues[a].total_cmp(&dec.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| dec.eigenvalues[i]).collect();
    let dim = values.len();
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));

    let mut vectors = CMatrix::zeros(dim, dim);
    let mut start = 0;
    while start < dim {
        let mut end = start + 1;
        while end < dim && values[end] - values[end - 1] <= CLUSTER_TOL * scale {
            end += 1;
        }
        let cols: Vec<DVector<Complex64>> = order[start..end].iter().map(|&i| dec.eigenvectors.column(i).into_owned()).collect();
        let basis = if cols.len() == 1 { cols } else { canonical_cluster_basis(&cols) };
        for (k, mut v) in basis.into_iter().enumerate() {
            fix_phase(&mut v);
            vectors.set_column(start + k, &v);
        }
        start = end;
    }
    Ok(Eigen { values, vectors })
}

fn canonical_cluster_basis(cols: &[DVector<Complex64>]) -> Vec<DVector<Complex64>> {
    let dim = cols[0].len();
    let mut out: Vec<DVector<Complex64>> = Vec::with_capacity(cols.len());
    for i in 0..dim {
        if out.len() == cols.len() {
            break;
        }
        // P e_i = Σ_c c c_i^*
        let mut v = DVector::<Complex64>::zeros(dim);
        for c in cols {
            v += c * c[i].conj();
        }
        for u in &out {
            let overlap = u.dotc(&v);
            v -= u * overlap;
        }
        let norm = v.norm();
        if norm > 1e-6 {
            out.push(v / Complex64::new(norm, 0.0));
        }
    }
    debug_assert_eq!(out.len(), cols.len());
    out
}

fn fix_phase(v: &mut DVector<Complex64>) {
    if let Some(a) = v.iter().find(|a| a.norm() > PHASE_TOL).copied() {
        let phase = a.conj() / a.norm();
        *v *= phase;
    }
}

/// Ascending eigenvalues only.
pub fn eigenvalues(h: &CMatrix) -> Result<Vec<f64>> {
    check_hermitian(h)?;
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let mut v: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `e^{-i t h}` for Hermitian `h`.
pub fn expm(h: &CMatrix, t: f64) -> Result<CMatrix> {
    Ok(expm_from(&eig(h)?, t))
}

/// `e^{-i t h}` from a precomputed decomposition; cheap to call on a time grid.
pub fn expm_from(e: &Eigen, t: f64) -> CMatrix {
    let phases: Vec<Complex64> = e.values.iter().map(|&l| Complex64::from_polar(1.0, -l * t)).collect();
    let mut scaled = e.vectors.clone();
    for (j, p) in phases.iter().enumerate() {
        for z in scaled.column_mut(j).iter_mut() {
            *z *= p;
        }
    }
    scaled * e.vectors.adjoint()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Hilbert-Schmidt norm squared `Tr(A† A)`.
pub fn hs_norm_sq(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// `‖V + Σ_l β_l i[O^l, H_μ]‖²` evaluated densely, with `β` over the free
/// parameters of `spec` and `O^l` built at `row`.
pub fn brute_cost(pair: &HamiltonianPair, spec: &AnsatzSpec, row: &[f64], beta: &[f64], mu: f64) -> Result<f64> {
    if beta.len() != spec.n_params() {
        return Err(Error::SizeMismatch { expected: spec.n_params(), found: beta.len() });
    }
    let h = pair.h_mu(mu).to_dense();
    let mut g = pair.v.to_dense();
    let i = Complex64::new(0.0, 1.0);
    for layer in 1..=spec.n_layers() {
        let w = beta[spec.param_of(layer - 1)];
        if w == 0.0 {
            continue;
        }
        let o = spec.rotated_generator_dense(row, layer)?;
        g += commutator(&o, &h) * (i * w);
    }
    Ok(hs_norm_sq(&g))
}
