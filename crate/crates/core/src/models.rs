//! Benchmark Hamiltonian pairs `H_λ = H_0 + λ V`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::U0;
use crate::error::{Error, Result};
use crate::oracle;
use crate::pauli::{PauliString, PauliSum};
use crate::simulator::{Circuit, Gate};
use crate::CMatrix;

/// Operators of the random two-qubit perturbation, in coefficient order.
pub const RANDOM_2Q_TERMS: [&str; 8] = ["XI", "IX", "YI", "IY", "XX", "XY", "YX", "YY"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianPair {
    pub name: String,
    pub n_qubits: usize,
    pub h0: PauliSum,
    pub v: PauliSum,
    pub lambda: f64,
    /// Named model parameters (including drawn coefficients).
    pub params: BTreeMap<String, f64>,
    pub seed: Option<u64>,
    /// A unitary diagonalizing `H_0`.
    #[serde(skip)]
    pub u0: U0,
}

impl HamiltonianPair {
    /// Pair from explicit operators. `u0` must diagonalize `h0`; pass
    /// [`U0::Identity`] when `h0` is diagonal.
    pub fn custom(name: &str, h0: PauliSum, v: PauliSum, lambda: f64, u0: U0) -> Result<Self> {
        if h0.n_qubits() != v.n_qubits() {
            return Err(Error::SizeMismatch { expected: h0.n_qubits(), found: v.n_qubits() });
        }
        if !h0.is_hermitian() || !v.is_hermitian() {
            return Err(Error::NonHermitian { deviation: f64::NAN });
        }
        if !lambda.is_finite() {
            return Err(Error::Invalid(format!("lambda must be finite, got {lambda}")));
        }
        Ok(HamiltonianPair {
            name: name.to_string(),
            n_qubits: h0.n_qubits(),
            h0,
            v,
            lambda,
            params: BTreeMap::new(),
            seed: None,
            u0,
        })
    }

    /// `H_μ = H_0 + μ V`.
    pub fn h_mu(&self, mu: f64) -> PauliSum {
        self.h0.add(&self.v.scale(Complex64::new(mu, 0.0))).expect("H0 and V share a width")
    }

    pub fn h_lambda(&self) -> PauliSum {
        self.h_mu(self.lambda)
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        HamiltonianPair { lambda, ..self.clone() }
    }

    /// Ascending eigenvalues of `H_μ` for each `μ` of a grid.
    pub fn energy_levels(&self, mus: &[f64]) -> Result<Vec<Vec<f64>>> {
        mus.iter().map(|&mu| oracle::eigenvalues(&self.h_mu(mu).to_dense())).collect()
    }
}

fn pauli_on(n: usize, letters: &[(usize, char)]) -> PauliString {
    let mut s = vec!['I'; n];
    for &(q, c) in letters {
        s[q] = c;
    }
    s.into_iter().collect::<String>().parse().expect("valid letters")
}

fn sum_of(n: usize, terms: Vec<(PauliString, f64)>) -> PauliSum {
    let mut out = PauliSum::zero(n);
    for (p, c) in terms {
        out.add_term(p, Complex64::new(c, 0.0));
    }
    out
}

/// `H = h Z_3 + λ[(σ_1·σ_3 + σ_2·σ_3) − (X_1 + X_2)]` on three qubits.
pub fn model_low_energy(h: f64, lambda: f64) -> HamiltonianPair {
    let h0 = sum_of(3, vec![(pauli_on(3, &[(2, 'Z')]), h)]);
    let mut v = Vec::new();
    for a in [0, 1] {
        for c in ['X', 'Y', 'Z'] {
            v.push((pauli_on(3, &[(a, c), (2, c)]), 1.0));
        }
        v.push((pauli_on(3, &[(a, 'X')]), -1.0));
    }
    let mut pair = HamiltonianPair::custom("low_energy", h0, sum_of(3, v), lambda, U0::Identity).expect("valid model");
    pair.params.insert("h".into(), h);
    pair
}

/// Open chain `Σ_{i<N} (X_i X_{i+1} + Y_i Y_{i+1}) + h Σ_i Z_i + λ Σ_i X_i`.
///
/// The field is uniform over all `N` sites. `H_0` conserves magnetization,
/// so it is already block diagonal in the computational basis and `U_0` is
/// the identity.
pub fn model_spin_chain(n: usize, h: f64, lambda: f64) -> Result<HamiltonianPair> {
    if n < 2 {
        return Err(Error::Invalid(format!("spin chain needs at least 2 sites, got {n}")));
    }
    if n > 10 {
        return Err(Error::BadDimension(1 << n));
    }
    let mut h0 = Vec::new();
    for i in 0..n - 1 {
        h0.push((pauli_on(n, &[(i, 'X'), (i + 1, 'X')]), 1.0));
        h0.push((pauli_on(n, &[(i, 'Y'), (i + 1, 'Y')]), 1.0));
    }
    h0.extend((0..n).map(|i| (pauli_on(n, &[(i, 'Z')]), h)));
    let h0 = sum_of(n, h0);
    let v = sum_of(n, (0..n).map(|i| (pauli_on(n, &[(i, 'X')]), 1.0)).collect());
    let mut pair = HamiltonianPair::custom("spin_chain", h0, v, lambda, U0::Identity)?;
    pair.params.insert("h".into(), h);
    pair.params.insert("n".into(), n as f64);
    Ok(pair)
}

/// Unitary whose columns are eigenvectors of `h`, block by block over
/// Hamming-weight sectors (which `h` must preserve).
pub fn sector_diagonalizer(h: &CMatrix, n: usize) -> Result<CMatrix> {
    let dim = 1usize << n;
    let mut u = CMatrix::zeros(dim, dim);
    for weight in 0..=n as u32 {
        let idx: Vec<usize> = (0..dim).filter(|i| i.count_ones() == weight).collect();
        let block = CMatrix::from_fn(idx.len(), idx.len(), |r, c| h[(idx[r], idx[c])]);
        let e = oracle::eig(&block)?;
        for (k, &col) in idx.iter().enumerate() {
            for (r, &row) in idx.iter().enumerate() {
                u[(row, col)] = e.vectors[(r, k)];
            }
        }
    }
    let off = &u.adjoint() * h * &u;
    let leak: f64 = (0..dim).flat_map(|r| (0..dim).map(move |c| (r, c))).filter(|(r, c)| r != c).map(|(r, c)| off[(r, c)].norm_sqr()).sum();
    if leak.sqrt() > 1e-8 * (1.0 + h.norm()) {
        return Err(Error::Invalid("operator does not conserve magnetization".into()));
    }
    Ok(u)
}

/// `H_0 = Z_1 + Z_2`, `V = Σ_k v_k {XI, IX, YI, IY, XX, XY, YX, YY}_k` with
/// `v_k` uniform on `[0, 1)`.
///
/// `H_0` is degenerate on `{|01>, |10>}`, so `U_0` is [`degenerate_frame_2q`]
/// rather than the identity.
pub fn model_random_2q(seed: u64, lambda: f64) -> HamiltonianPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<f64> = (0..RANDOM_2Q_TERMS.len()).map(|_| rng.random_range(0.0..1.0)).collect();
    let h0 = PauliSum::from_real(2, &[("ZI", 1.0), ("IZ", 1.0)]).expect("valid");
    let terms: Vec<(&str, f64)> = RANDOM_2Q_TERMS.iter().copied().zip(coeffs.iter().copied()).collect();
    let v = PauliSum::from_real(2, &terms).expect("valid");
    let u0 = U0::Circuit(degenerate_frame_2q(&v));
    let mut pair = HamiltonianPair::custom("random_2q", h0, v, lambda, u0).expect("valid model");
    for (name, c) in RANDOM_2Q_TERMS.iter().zip(&coeffs) {
        pair.params.insert(format!("v_{name}"), *c);
    }
    pair.seed = Some(seed);
    pair
}

/// Rotation inside `span{|01>, |10>}` that diagonalizes the block of `v`
/// there. It commutes with `Z_1 + Z_2`, so `U_0† H_0 U_0` stays diagonal, and
/// the flow in `μ` starts from the zeroth-order degenerate eigenbasis.
///
/// On that block `(XX+YY)/2`, `(YX−XY)/2` and `(ZI−IZ)/2` act as `σ^x`,
/// `σ^y`, `σ^z` and vanish on `|00>`, `|11>`.
pub fn degenerate_frame_2q(v: &PauliSum) -> Circuit {
    let dense = v.to_dense();
    let c = dense[(1, 2)];
    let phi = -c.arg();
    let p = |s: &str| s.parse::<PauliString>().expect("valid");
    let rot = |s: &str, theta: f64| Gate::PauliRotation { pauli: p(s), offset: 0, theta };
    let gates = vec![
        rot("YX", std::f64::consts::PI / 8.0),
        rot("XY", -std::f64::consts::PI / 8.0),
        rot("ZI", phi / 4.0),
        rot("IZ", -phi / 4.0),
    ];
    Circuit::from_gates(2, gates).expect("two-qubit gates")
}

/// Total magnetization `Σ_i Z_i`.
pub fn magnetization(n: usize) -> PauliSum {
    sum_of(n, (0..n).map(|i| (pauli_on(n, &[(i, 'Z')]), 1.0)).collect())
}

/// Swap of qubits `a` and `b` as a dense matrix.
pub fn swap_matrix(n: usize, a: usize, b: usize) -> CMatrix {
    let dim = 1usize << n;
    let (ba, bb) = (1usize << (n - 1 - a), 1usize << (n - 1 - b));
    let mut s = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        let (xa, xb) = (i & ba != 0, i & bb != 0);
        let mut j = i & !(ba | bb);
        if xa {
            j |= bb;
        }
        if xb {
            j |= ba;
        }
        s[(j, i)] = Complex64::new(1.0, 0.0);
    }
    s
}

/// Free-fermion spectrum of the open XX+YY chain in a uniform field `h`
/// (Jordan-Wigner): `E = hN + Σ_{occupied} ε_k`, where `ε_k` diagonalize the
/// single-particle matrix with hopping 2 and on-site `−2h`.
pub fn spin_chain_free_fermion_levels(n: usize, h: f64) -> Vec<f64> {
    let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = -2.0 * h;
        if i + 1 < n {
            m[(i, i + 1)] = 2.0;
            m[(i + 1, i)] = 2.0;
        }
    }
    let eps: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    let mut levels: Vec<f64> = (0..1usize << n)
        .map(|occ| h * n as f64 + (0..n).filter(|k| occ & (1 << k) != 0).map(|k| eps[k]).sum::<f64>())
        .collect();
    levels.sort_by(f64::total_cmp);
    levels
}
