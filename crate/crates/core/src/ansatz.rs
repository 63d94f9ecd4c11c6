//! Layered circuit ansatz `U(α) = U_0 ∏_ℓ exp(−i α^ℓ B^ℓ)` and its
//! parameter table.
//!
//! Products are ordered left to right: `U^k = U_0 e^{−iα^1 B^1} ⋯ e^{−iα^{k−1} B^{k−1}}`,
//! so as a gate list the last generator acts first and `U_0` acts last.
//! Layers are numbered from 1. Generators can share a parameter ("ties");
//! the free parameter count is then smaller than the layer count.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::simulator::{Circuit, Gate};
use crate::CMatrix;

/// A unitary that diagonalizes `H_0`.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum U0 {
    #[default]
    Identity,
    Circuit(Circuit),
    /// Only usable by the analytic strategy.
    Dense(CMatrix),
}

impl U0 {
    pub fn is_identity(&self) -> bool {
        matches!(self, U0::Identity)
    }

    pub fn matrix(&self, n_qubits: usize) -> CMatrix {
        match self {
            U0::Identity => CMatrix::identity(1 << n_qubits, 1 << n_qubits),
            U0::Circuit(c) => c.matrix(),
            U0::Dense(m) => m.clone(),
        }
    }

    pub fn circuit(&self, n_qubits: usize) -> Result<Circuit> {
        match self {
            U0::Identity => Ok(Circuit::new(n_qubits)),
            U0::Circuit(c) => Ok(c.clone()),
            U0::Dense(_) => Err(Error::NonCircuitU0),
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        let dim = 1usize << n_qubits;
        match self {
            U0::Identity => Ok(()),
            U0::Circuit(c) if c.n_qubits() != n_qubits => Err(Error::SizeMismatch { expected: n_qubits, found: c.n_qubits() }),
            U0::Circuit(_) => Ok(()),
            U0::Dense(m) => {
                if m.nrows() != dim || m.ncols() != dim {
                    return Err(Error::BadDimension(m.nrows()));
                }
                let dev = (m.adjoint() * m - CMatrix::identity(dim, dim)).norm();
                if dev > 1e-10 {
                    return Err(Error::Invalid(format!("U0 is not unitary (deviation {dev:e})")));
                }
                Ok(())
            }
        }
    }
}

/// Declared symmetry of the ansatz.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    /// Exchange of two qubits (0-based).
    Swap(usize, usize),
}

impl Symmetry {
    pub fn matrix(&self, n_qubits: usize) -> CMatrix {
        match *self {
            Symmetry::Swap(a, b) => crate::models::swap_matrix(n_qubits, a, b),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnsatzSpec {
    name: String,
    n_qubits: usize,
    u0: U0,
    generators: Vec<PauliString>,
    ties: Vec<(usize, usize)>,
    symmetry: Option<Symmetry>,
    param_of: Vec<usize>,
    n_params: usize,
}

/// Symmetry checks build dense matrices; skip them above this width.
const MAX_SYMMETRY_CHECK_QUBITS: usize = 4;

impl AnsatzSpec {
    /// `ties` are pairs of 0-based generator indices driven by one parameter.
    pub fn new(
        name: &str,
        n_qubits: usize,
        u0: U0,
        generators: Vec<PauliString>,
        ties: Vec<(usize, usize)>,
        symmetry: Option<Symmetry>,
    ) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::Invalid("ansatz needs at least one qubit".into()));
        }
        u0.validate(n_qubits)?;
        for g in &generators {
            if g.n_qubits() != n_qubits {
                return Err(Error::SizeMismatch { expected: n_qubits, found: g.n_qubits() });
            }
            if g.weight() == 0 || g.weight() > 2 {
                return Err(Error::Invalid(format!("generator {g} must act on one or two qubits")));
            }
        }
        let l = generators.len();
        let mut parent: Vec<usize> = (0..l).collect();
        fn root(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for &(a, b) in &ties {
            if a >= l || b >= l || a == b {
                return Err(Error::Invalid(format!("tie ({a}, {b}) is not a pair of distinct layers below {l}")));
            }
            if !generators[a].commutes_with(&generators[b]) {
                return Err(Error::Invalid(format!("tied generators {} and {} do not commute", generators[a], generators[b])));
            }
            let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
            parent[ra.max(rb)] = ra.min(rb);
        }
        let mut param_of = vec![usize::MAX; l];
        let mut root_param = vec![usize::MAX; l];
        let mut n_params = 0;
        for i in 0..l {
            let r = root(&mut parent, i);
            if root_param[r] == usize::MAX {
                root_param[r] = n_params;
                n_params += 1;
            }
            param_of[i] = root_param[r];
        }
        let spec = AnsatzSpec { name: name.to_string(), n_qubits, u0, generators, ties, symmetry, param_of, n_params };
        spec.check_groups_commute()?;
        spec.check_symmetry()?;
        Ok(spec)
    }

    fn check_groups_commute(&self) -> Result<()> {
        for p in 0..self.n_params {
            let members = self.layers_of(p);
            for (i, a) in members.iter().enumerate() {
                for b in &members[i + 1..] {
                    if !self.generators[*a].commutes_with(&self.generators[*b]) {
                        return Err(Error::Invalid(format!(
                            "generators {} and {} share a parameter but do not commute",
                            self.generators[*a], self.generators[*b]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_symmetry(&self) -> Result<()> {
        let Some(sym) = self.symmetry else { return Ok(()) };
        let Symmetry::Swap(a, b) = sym;
        if a >= self.n_qubits || b >= self.n_qubits || a == b {
            return Err(Error::Invalid(format!("swap symmetry ({a}, {b}) out of range")));
        }
        if self.n_qubits > MAX_SYMMETRY_CHECK_QUBITS {
            return Ok(());
        }
        let s = sym.matrix(self.n_qubits);
        for p in 0..self.n_params {
            let mut sum = PauliSum::zero(self.n_qubits);
            for l in self.layers_of(p) {
                sum.add_term(self.generators[l], Complex64::new(1.0, 0.0));
            }
            let m = sum.to_dense();
            if (&m * &s - &s * &m).norm() > 1e-10 {
                return Err(Error::Invalid(format!("parameter group {p} ({sum}) breaks the declared symmetry")));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Number of generators (layers).
    pub fn n_layers(&self) -> usize {
        self.generators.len()
    }

    /// Number of free parameters.
    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn generators(&self) -> &[PauliString] {
        &self.generators
    }

    pub fn ties(&self) -> &[(usize, usize)] {
        &self.ties
    }

    pub fn symmetry(&self) -> Option<Symmetry> {
        self.symmetry
    }

    pub fn u0(&self) -> &U0 {
        &self.u0
    }

    pub fn with_u0(mut self, u0: U0) -> Result<Self> {
        u0.validate(self.n_qubits)?;
        self.u0 = u0;
        Ok(self)
    }

    /// Free parameter driving 0-based generator `layer`.
    pub fn param_of(&self, layer: usize) -> usize {
        self.param_of[layer]
    }

    /// 0-based generators driven by parameter `p`.
    pub fn layers_of(&self, p: usize) -> Vec<usize> {
        (0..self.n_layers()).filter(|&l| self.param_of[l] == p).collect()
    }

    /// Per-layer angles from a row of free parameters.
    pub fn expand(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.n_params {
            return Err(Error::SizeMismatch { expected: self.n_params, found: row.len() });
        }
        Ok(self.param_of.iter().map(|&p| row[p]).collect())
    }

    /// Free-parameter vector `Tᵀ v` from a per-layer vector.
    pub fn reduce_vector(&self, per_layer: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_params];
        for (l, v) in per_layer.iter().enumerate() {
            out[self.param_of[l]] += v;
        }
        out
    }

    /// Free-parameter matrix `Tᵀ X T` from a per-layer matrix.
    pub fn reduce_matrix(&self, per_layer: &nalgebra::DMatrix<f64>) -> nalgebra::DMatrix<f64> {
        let mut out = nalgebra::DMatrix::zeros(self.n_params, self.n_params);
        for r in 0..self.n_layers() {
            for c in 0..self.n_layers() {
                out[(self.param_of[r], self.param_of[c])] += per_layer[(r, c)];
            }
        }
        out
    }

    fn check_layer(&self, ell: usize, max: usize) -> Result<()> {
        if ell == 0 || ell > max {
            return Err(Error::LayerOutOfRange { index: ell, max });
        }
        Ok(())
    }

    /// Circuit for `U^ℓ = U_0 ∏_{l<ℓ} exp(−iα^l B^l)`, `1 ≤ ℓ ≤ L + 1`.
    pub fn partial_unitary(&self, row: &[f64], ell: usize) -> Result<Circuit> {
        self.check_layer(ell, self.n_layers() + 1)?;
        let angles = self.expand(row)?;
        let mut c = Circuit::new(self.n_qubits);
        for l in (0..ell - 1).rev() {
            c.push(Gate::PauliRotation { pauli: self.generators[l], offset: 0, theta: angles[l] })?;
        }
        c.append_at(&self.u0.circuit(self.n_qubits)?, 0)?;
        Ok(c)
    }

    pub fn full_unitary(&self, row: &[f64]) -> Result<Circuit> {
        self.partial_unitary(row, self.n_layers() + 1)
    }

    /// Dense `U^ℓ`; works for every kind of `U_0`.
    pub fn partial_matrix(&self, row: &[f64], ell: usize) -> Result<CMatrix> {
        self.check_layer(ell, self.n_layers() + 1)?;
        let angles = self.expand(row)?;
        let mut c = Circuit::new(self.n_qubits);
        for l in (0..ell - 1).rev() {
            c.push(Gate::PauliRotation { pauli: self.generators[l], offset: 0, theta: angles[l] })?;
        }
        Ok(self.u0.matrix(self.n_qubits) * c.matrix())
    }

    pub fn full_matrix(&self, row: &[f64]) -> Result<CMatrix> {
        self.partial_matrix(row, self.n_layers() + 1)
    }

    /// `(U^ℓ)^T` as a circuit, valid for any generator parity.
    pub fn transposed_unitary(&self, row: &[f64], ell: usize) -> Result<Circuit> {
        Ok(self.partial_unitary(row, ell)?.transpose())
    }

    /// `V^ℓ`: the layers of `U^ℓ` taken in reverse order after `U_0^T`.
    /// Equals `(U^ℓ)^T` only when every generator is its own transpose.
    pub fn reversed_unitary(&self, row: &[f64], ell: usize) -> Result<Circuit> {
        self.check_layer(ell, self.n_layers() + 1)?;
        if let Some(g) = self.generators[..ell - 1].iter().find(|g| g.transpose_parity() < 0) {
            return Err(Error::AsymmetricGenerator { generator: g.to_string() });
        }
        let angles = self.expand(row)?;
        let mut c = self.u0.circuit(self.n_qubits)?.transpose();
        for l in 0..ell - 1 {
            c.push(Gate::PauliRotation { pauli: self.generators[l], offset: 0, theta: angles[l] })?;
        }
        Ok(c)
    }

    /// Dense `O^ℓ = U^ℓ B^ℓ U^{ℓ†}`.
    pub fn rotated_generator_dense(&self, row: &[f64], ell: usize) -> Result<CMatrix> {
        self.check_layer(ell, self.n_layers())?;
        let u = self.partial_matrix(row, ell)?;
        Ok(&u * self.generators[ell - 1].to_dense() * u.adjoint())
    }

    /// `O^ℓ` by dense conjugation and Pauli decomposition.
    pub fn rotated_generator(&self, row: &[f64], ell: usize) -> Result<PauliSum> {
        PauliSum::decompose(&self.rotated_generator_dense(row, ell)?)
    }

    /// All `O^ℓ`, `ℓ = 1..=L`, by conjugating through the Pauli rotations in
    /// the Pauli algebra. `U_0`, if present, is applied densely.
    pub fn rotated_generators(&self, row: &[f64]) -> Result<Vec<PauliSum>> {
        let angles = self.expand(row)?;
        let u0 = if self.u0.is_identity() { None } else { Some(self.u0.matrix(self.n_qubits)) };
        (0..self.n_layers())
            .map(|k| {
                let mut op = PauliSum::single(self.generators[k], 1.0);
                for l in (0..k).rev() {
                    op = conjugate_by_rotation(&op, &self.generators[l], angles[l]);
                }
                match &u0 {
                    None => Ok(op),
                    Some(u) => PauliSum::decompose(&(u * op.to_dense() * u.adjoint())),
                }
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// `e^{−iαB} O e^{iαB}` for a Pauli string `B`.
///
/// Terms commuting with `B` are unchanged; anticommuting terms map to
/// `cos 2α σ − i sin 2α Bσ`.
pub fn conjugate_by_rotation(op: &PauliSum, b: &PauliString, alpha: f64) -> PauliSum {
    if alpha == 0.0 {
        return op.clone();
    }
    let (c, s) = ((2.0 * alpha).cos(), (2.0 * alpha).sin());
    let mut out = PauliSum::zero(op.n_qubits());
    for (p, coef) in op.iter() {
        if p.commutes_with(b) {
            out.add_term(*p, *coef);
        } else {
            out.add_term(*p, coef * c);
            let (phase, bp) = b.mul(p).expect("same width");
            out.add_term(bp, coef * phase * Complex64::new(0.0, -s));
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnsatzDoc {
    #[serde(default)]
    name: Option<String>,
    n_qubits: usize,
    #[serde(default)]
    u0: Vec<Gate>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_matrix")]
    u0_dense: Option<CMatrix>,
    generators: Vec<PauliString>,
    #[serde(default)]
    ties: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    symmetry: Option<Symmetry>,
}

mod opt_matrix {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "crate::simulator::matrix_serde")] CMatrix);

    pub fn serialize<S: Serializer>(m: &Option<CMatrix>, s: S) -> std::result::Result<S::Ok, S::Error> {
        m.as_ref().map(|m| Wrap(m.clone())).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<CMatrix>, D::Error> {
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

impl Serialize for AnsatzSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (u0, u0_dense) = match &self.u0 {
            U0::Identity => (Vec::new(), None),
            U0::Circuit(c) => (c.gates().to_vec(), None),
            U0::Dense(m) => (Vec::new(), Some(m.clone())),
        };
        AnsatzDoc {
            name: Some(self.name.clone()),
            n_qubits: self.n_qubits,
            u0,
            u0_dense,
            generators: self.generators.clone(),
            ties: self.ties.iter().map(|&(a, b)| [a, b]).collect(),
            symmetry: self.symmetry,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for AnsatzSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = AnsatzDoc::deserialize(d)?;
        let u0 = match (doc.u0.is_empty(), doc.u0_dense) {
            (true, None) => U0::Identity,
            (false, None) => U0::Circuit(Circuit::from_gates(doc.n_qubits, doc.u0).map_err(D::Error::custom)?),
            (true, Some(m)) => U0::Dense(m),
            (false, Some(_)) => return Err(D::Error::custom("give either u0 gates or u0_dense, not both")),
        };
        AnsatzSpec::new(
            doc.name.as_deref().unwrap_or("custom"),
            doc.n_qubits,
            u0,
            doc.generators,
            doc.ties.into_iter().map(|[a, b]| (a, b)).collect(),
            doc.symmetry,
        )
        .map_err(D::Error::custom)
    }
}

/// Names accepted by [`builtin_ansatz`].
pub const BUILTIN_ANSATZ_NAMES: [&str; 3] = ["lowenergy36", "spinchain140", "universal2q15"];

/// Builtin ansätze, all with `U_0 = 𝟙` (swap in a model's `U_0` with
/// [`AnsatzSpec::with_u0`]).
///
/// * `lowenergy36` (3 qubits), repeated three times:
///   `X1 X2 X3 Y1 Y2 Y3 Z1 Z2 Z3` with `X1~X2`, `Y1~Y2`, `Z1~Z2` tied, then
///   for `PQ ∈ {XY, YX, YZ}`: `P1Q3 P2Q3 P1Q2 Q1P2` with `P1Q3~P2Q3` and
///   `P1Q2~Q1P2` tied. 12 parameters per repetition, swap symmetric in
///   qubits 1 and 2. Every two-qubit generator has one `Y`, so the flow
///   starts with a nonzero gradient for a real `[H_0, V]`.
/// * `spinchain140` (N qubits), repeated ten times: `X_i` on every site,
///   `Y_i` on every site, `Y_iY_{i+1}` and `Z_iZ_{i+1}` on every bond
///   (140 parameters at N = 4).
/// * `universal2q15` (2 qubits): one layer per non-identity string,
///   single-qubit `X Y Z` first, then the nine two-qubit products. The
///   generators span `su(4)`, so the tangent space is full at `α = 0`.
pub fn builtin_ansatz(name: &str, n_qubits: usize) -> Result<AnsatzSpec> {
    let single = |q: usize, p: Pauli| PauliString::single(n_qubits, q, p);
    let pair = |a: usize, b: usize, p: Pauli| PauliString::single(n_qubits, a, p).with_letter(b, p);
    let mut gens = Vec::new();
    let mut ties = Vec::new();
    match name {
        "lowenergy36" => {
            if n_qubits != 3 {
                return Err(Error::SizeMismatch { expected: 3, found: n_qubits });
            }
            for _ in 0..3 {
                for p in [Pauli::X, Pauli::Y, Pauli::Z] {
                    ties.push((gens.len(), gens.len() + 1));
                    gens.extend([single(0, p), single(1, p), single(2, p)]);
                }
                for (p, q) in [(Pauli::X, Pauli::Y), (Pauli::Y, Pauli::X), (Pauli::Y, Pauli::Z)] {
                    let mixed = |a: usize, b: usize, p: Pauli, q: Pauli| single(a, p).with_letter(b, q);
                    let k = gens.len();
                    ties.extend([(k, k + 1), (k + 2, k + 3)]);
                    gens.extend([mixed(0, 2, p, q), mixed(1, 2, p, q), mixed(0, 1, p, q), mixed(0, 1, q, p)]);
                }
            }
            AnsatzSpec::new(name, 3, U0::Identity, gens, ties, Some(Symmetry::Swap(0, 1)))
        }
        "spinchain140" => {
            if n_qubits < 2 {
                return Err(Error::Invalid("spinchain140 needs at least 2 qubits".into()));
            }
            for _ in 0..10 {
                for p in [Pauli::X, Pauli::Y] {
                    gens.extend((0..n_qubits).map(|q| single(q, p)));
                }
                for p in [Pauli::Y, Pauli::Z] {
                    gens.extend((0..n_qubits - 1).map(|q| pair(q, q + 1, p)));
                }
            }
            AnsatzSpec::new(name, n_qubits, U0::Identity, gens, ties, None)
        }
        "universal2q15" => {
            if n_qubits != 2 {
                return Err(Error::SizeMismatch { expected: 2, found: n_qubits });
            }
            for p in [Pauli::X, Pauli::Y, Pauli::Z] {
                gens.extend([single(0, p), single(1, p)]);
            }
            for a in [Pauli::X, Pauli::Y, Pauli::Z] {
                gens.extend([Pauli::X, Pauli::Y, Pauli::Z].map(|b| single(0, a).with_letter(1, b)));
            }
            AnsatzSpec::new(name, 2, U0::Identity, gens, ties, None)
        }
        _ => Err(Error::UnknownAnsatz(name.to_string())),
    }
}

/// The discretized trajectory `α^ℓ_t`, `t = 0..=T`, over free parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamTable {
    pub alpha: Vec<Vec<f64>>,
    pub delta_mu: f64,
    pub lambda: f64,
}

impl ParamTable {
    /// `T + 1` zero rows; `δμ = λ / T`.
    pub fn new(steps: usize, n_params: usize, lambda: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Invalid("at least one step is required".into()));
        }
        if !lambda.is_finite() {
            return Err(Error::Invalid(format!("lambda must be finite, got {lambda}")));
        }
        Ok(ParamTable { alpha: vec![vec![0.0; n_params]; steps + 1], delta_mu: lambda / steps as f64, lambda })
    }

    pub fn steps(&self) -> usize {
        self.alpha.len() - 1
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.alpha[t]
    }

    pub fn last(&self) -> &[f64] {
        &self.alpha[self.steps()]
    }

    pub fn mu(&self, t: usize) -> f64 {
        t as f64 * self.delta_mu
    }

    /// `α_{t+1} = α_t + β δμ`.
    pub fn advance(&mut self, t: usize, beta: &[f64]) {
        let next: Vec<f64> = self.alpha[t].iter().zip(beta).map(|(a, b)| a + b * self.delta_mu).collect();
        self.alpha[t + 1] = next;
    }
}
