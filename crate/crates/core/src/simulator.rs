//! Dense statevector simulation.
//!
//! Amplitude index convention: qubit `q` of an `n`-qubit register is bit
//! `n - 1 - q`, so qubit 0 is the most significant bit (and the leftmost
//! tensor factor, matching [`PauliString`]).
//!
//! Besides plain gate application this module builds the ancilla circuits
//! that turn trace quantities into outcome probabilities:
//!
//! * [`b_test_circuit`]: one ancilla, `p(0) = 1/2 - <σ_j ⊗ i[U B U†, σ_k]>/4`
//! * [`x_test_circuit`]: two ancillas, `p(0) = 1/2 + <i[V† B' V, σ_j] ⊗ i[U B U†, σ_k]>/8`
//! * [`overlap_test_circuit`]: one ancilla, `p(0) = 1/2 + <σ_h ⊗ U B U†>/2`
//!
//! All three act on `|φ>`, the maximally entangled state of two `N`-qubit
//! registers.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{basis_phase, PauliString, PauliSum};
use crate::CMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Largest raw unitary a gate may carry.
pub const MAX_RAW_QUBITS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gate {
    Hadamard { target: usize },
    Rx { target: usize, theta: f64 },
    Ry { target: usize, theta: f64 },
    Rz { target: usize, theta: f64 },
    Cnot { control: usize, target: usize },
    /// The Pauli string itself, placed on qubits `offset..offset + n`.
    Pauli { pauli: PauliString, offset: usize },
    /// `exp(-i θ σ)` with `σ` placed on qubits `offset..offset + n`.
    PauliRotation { pauli: PauliString, offset: usize, theta: f64 },
    Controlled { control: usize, gate: Box<Gate> },
    Unitary { targets: Vec<usize>, #[serde(with = "matrix_serde")] matrix: CMatrix },
}

impl Gate {
    pub fn controlled(control: usize, gate: Gate) -> Gate {
        Gate::Controlled { control, gate: Box::new(gate) }
    }

    /// Qubits the gate touches, controls included.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::Hadamard { target } | Gate::Rx { target, .. } | Gate::Ry { target, .. } | Gate::Rz { target, .. } => {
                vec![*target]
            }
            Gate::Cnot { control, target } => vec![*control, *target],
            Gate::Pauli { pauli, offset } | Gate::PauliRotation { pauli, offset, .. } => {
                (*offset..*offset + pauli.n_qubits()).collect()
            }
            Gate::Controlled { control, gate } => {
                let mut q = gate.qubits();
                q.push(*control);
                q
            }
            Gate::Unitary { targets, .. } => targets.clone(),
        }
    }

    pub fn dagger(&self) -> Gate {
        match self {
            Gate::Rx { target, theta } => Gate::Rx { target: *target, theta: -theta },
            Gate::Ry { target, theta } => Gate::Ry { target: *target, theta: -theta },
            Gate::Rz { target, theta } => Gate::Rz { target: *target, theta: -theta },
            Gate::PauliRotation { pauli, offset, theta } => {
                Gate::PauliRotation { pauli: *pauli, offset: *offset, theta: -theta }
            }
            Gate::Controlled { control, gate } => Gate::controlled(*control, gate.dagger()),
            Gate::Unitary { targets, matrix } => Gate::Unitary { targets: targets.clone(), matrix: matrix.adjoint() },
            g => g.clone(),
        }
    }

    /// Matrix transpose of the gate in the computational basis.
    pub fn transpose(&self) -> Gate {
        match self {
            Gate::Ry { target, theta } => Gate::Ry { target: *target, theta: -theta },
            Gate::Pauli { pauli, offset } if pauli.transpose_parity() < 0 => {
                // σ^T = -σ: a global phase that matters once the gate is controlled.
                Gate::Unitary {
                    targets: (*offset..*offset + pauli.n_qubits()).collect(),
                    matrix: pauli.to_dense().transpose(),
                }
            }
            Gate::PauliRotation { pauli, offset, theta } => Gate::PauliRotation {
                pauli: *pauli,
                offset: *offset,
                theta: theta * pauli.transpose_parity() as f64,
            },
            Gate::Controlled { control, gate } => Gate::controlled(*control, gate.transpose()),
            Gate::Unitary { targets, matrix } => Gate::Unitary { targets: targets.clone(), matrix: matrix.transpose() },
            g => g.clone(),
        }
    }

    /// The same gate moved up by `offset` qubits.
    pub fn shifted(&self, by: usize) -> Gate {
        match self {
            Gate::Hadamard { target } => Gate::Hadamard { target: target + by },
            Gate::Rx { target, theta } => Gate::Rx { target: target + by, theta: *theta },
            Gate::Ry { target, theta } => Gate::Ry { target: target + by, theta: *theta },
            Gate::Rz { target, theta } => Gate::Rz { target: target + by, theta: *theta },
            Gate::Cnot { control, target } => Gate::Cnot { control: control + by, target: target + by },
            Gate::Pauli { pauli, offset } => Gate::Pauli { pauli: *pauli, offset: offset + by },
            Gate::PauliRotation { pauli, offset, theta } => {
                Gate::PauliRotation { pauli: *pauli, offset: offset + by, theta: *theta }
            }
            Gate::Controlled { control, gate } => Gate::controlled(control + by, gate.shifted(by)),
            Gate::Unitary { targets, matrix } => {
                Gate::Unitary { targets: targets.iter().map(|t| t + by).collect(), matrix: matrix.clone() }
            }
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        let qs = self.qubits();
        if let Some(&q) = qs.iter().find(|&&q| q >= n_qubits) {
            return Err(Error::Invalid(format!("gate {self} touches qubit {q} of a {n_qubits}-qubit circuit")));
        }
        let mut sorted = qs.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != qs.len() {
            return Err(Error::Invalid(format!("gate {self} repeats a qubit")));
        }
        if let Gate::Unitary { targets, matrix } = self {
            let dim = 1usize << targets.len();
            if targets.len() > MAX_RAW_QUBITS || matrix.nrows() != dim || matrix.ncols() != dim {
                return Err(Error::Invalid(format!("raw unitary on {} qubits has shape {}x{}", targets.len(), matrix.nrows(), matrix.ncols())));
            }
            let dev = (matrix.adjoint() * matrix - CMatrix::identity(dim, dim)).norm();
            if dev > 1e-10 {
                return Err(Error::Invalid(format!("raw gate is not unitary (deviation {dev:e})")));
            }
        }
        if let Gate::Controlled { gate, .. } = self {
            gate.validate(n_qubits)?;
        }
        Ok(())
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::Hadamard { target } => write!(f, "h q{target}"),
            Gate::Rx { target, theta } => write!(f, "rx({theta:.6}) q{target}"),
            Gate::Ry { target, theta } => write!(f, "ry({theta:.6}) q{target}"),
            Gate::Rz { target, theta } => write!(f, "rz({theta:.6}) q{target}"),
            Gate::Cnot { control, target } => write!(f, "cnot q{control} -> q{target}"),
            Gate::Pauli { pauli, offset } => write!(f, "pauli {pauli} @q{offset}"),
            Gate::PauliRotation { pauli, offset, theta } => write!(f, "exp(-i {theta:.6} {pauli}) @q{offset}"),
            Gate::Controlled { control, gate } => write!(f, "c[q{control}] {gate}"),
            Gate::Unitary { targets, .. } => write!(f, "unitary {targets:?}"),
        }
    }
}

pub(crate) mod matrix_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Repr {
        dim: usize,
        re: Vec<f64>,
        im: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        // Row-major for readability.
        let (mut re, mut im) = (Vec::new(), Vec::new());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                re.push(m[(r, c)].re);
                im.push(m[(r, c)].im);
            }
        }
        Repr { dim: m.nrows(), re, im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMatrix, D::Error> {
        let r = Repr::deserialize(d)?;
        if r.re.len() != r.dim * r.dim || r.im.len() != r.re.len() {
            return Err(serde::de::Error::custom("matrix data does not match its dimension"));
        }
        Ok(CMatrix::from_fn(r.dim, r.dim, |i, j| Complex64::new(r.re[i * r.dim + j], r.im[i * r.dim + j])))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit { n_qubits, gates: Vec::new() }
    }

    pub fn from_gates(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut c = Circuit::new(n_qubits);
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, g: Gate) -> Result<()> {
        g.validate(self.n_qubits)?;
        self.gates.push(g);
        Ok(())
    }

    /// Append `other`, whose qubit 0 lands on qubit `offset` of `self`.
    pub fn append_at(&mut self, other: &Circuit, offset: usize) -> Result<()> {
        for g in &other.gates {
            self.push(g.shifted(offset))?;
        }
        Ok(())
    }

    /// Append `other` with every gate controlled on `control`.
    pub fn append_controlled(&mut self, other: &Circuit, offset: usize, control: usize) -> Result<()> {
        for g in &other.gates {
            self.push(Gate::controlled(control, g.shifted(offset)))?;
        }
        Ok(())
    }

    pub fn dagger(&self) -> Circuit {
        Circuit { n_qubits: self.n_qubits, gates: self.gates.iter().rev().map(Gate::dagger).collect() }
    }

    /// `(G_m ⋯ G_1)^T = G_1^T ⋯ G_m^T`: reversed order, each gate transposed.
    pub fn transpose(&self) -> Circuit {
        Circuit { n_qubits: self.n_qubits, gates: self.gates.iter().rev().map(Gate::transpose).collect() }
    }

    /// Dense matrix of the whole circuit.
    pub fn matrix(&self) -> CMatrix {
        let dim = 1usize << self.n_qubits;
        let mut m = CMatrix::zeros(dim, dim);
        for c in 0..dim {
            let mut s = StateVector::basis(self.n_qubits, c);
            s.apply_circuit(self);
            for (r, a) in s.amplitudes().iter().enumerate() {
                m[(r, c)] = *a;
            }
        }
        m
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "circuit on {} qubits, {} gates", self.n_qubits, self.gates.len())?;
        for g in &self.gates {
            writeln!(f, "  {g}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[index] = ONE;
        StateVector { n_qubits, amps }
    }

    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 1 << n_qubits {
            return Err(Error::BadDimension(amps.len()));
        }
        let s = StateVector { n_qubits, amps };
        if (s.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::Invalid(format!("state has norm {}", s.norm())));
        }
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn bit(&self, q: usize) -> usize {
        1usize << (self.n_qubits - 1 - q)
    }

    pub fn apply_circuit(&mut self, c: &Circuit) {
        assert_eq!(c.n_qubits(), self.n_qubits, "circuit width mismatch");
        for g in c.gates() {
            self.apply(g);
        }
    }

    pub fn apply(&mut self, g: &Gate) {
        self.apply_masked(g, 0);
    }

    /// Apply `g` to the amplitudes whose `cmask` bits are all set.
    fn apply_masked(&mut self, g: &Gate, cmask: usize) {
        use std::f64::consts::FRAC_1_SQRT_2;
        match g {
            Gate::Hadamard { target } => {
                let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
                self.apply_1q(*target, [[h, h], [h, -h]], cmask)
            }
            Gate::Rx { target, theta } => {
                let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
                let (c, ms) = (Complex64::new(c, 0.0), Complex64::new(0.0, -s));
                self.apply_1q(*target, [[c, ms], [ms, c]], cmask)
            }
            Gate::Ry { target, theta } => {
                let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
                let (c, s) = (Complex64::new(c, 0.0), Complex64::new(s, 0.0));
                self.apply_1q(*target, [[c, -s], [s, c]], cmask)
            }
            Gate::Rz { target, theta } => {
                let e = Complex64::from_polar(1.0, -theta / 2.0);
                self.apply_1q(*target, [[e, ZERO], [ZERO, e.conj()]], cmask)
            }
            Gate::Cnot { control, target } => {
                let x = Complex64::new(1.0, 0.0);
                self.apply_1q(*target, [[ZERO, x], [x, ZERO]], cmask | self.bit(*control))
            }
            Gate::Pauli { pauli, offset } => {
                let p = pauli.embed(*offset, self.n_qubits);
                let (xm, zm, ny) = (p.x_mask(), p.z_mask(), p.y_count());
                self.apply_pauli_like(xm, zm, ny, cmask, ZERO, ONE);
            }
            Gate::PauliRotation { pauli, offset, theta } => {
                let p = pauli.embed(*offset, self.n_qubits);
                let (xm, zm, ny) = (p.x_mask(), p.z_mask(), p.y_count());
                let (c, s) = (theta.cos(), theta.sin());
                self.apply_pauli_like(xm, zm, ny, cmask, Complex64::new(c, 0.0), Complex64::new(0.0, -s));
            }
            Gate::Controlled { control, gate } => self.apply_masked(gate, cmask | self.bit(*control)),
            Gate::Unitary { targets, matrix } => self.apply_unitary(targets, matrix, cmask),
        }
    }

    fn apply_1q(&mut self, target: usize, m: [[Complex64; 2]; 2], cmask: usize) {
        let tb = self.bit(target);
        for i in 0..self.amps.len() {
            if i & tb != 0 || i & cmask != cmask {
                continue;
            }
            let (a, b) = (self.amps[i], self.amps[i | tb]);
            self.amps[i] = m[0][0] * a + m[0][1] * b;
            self.amps[i | tb] = m[1][0] * a + m[1][1] * b;
        }
    }

    /// `ψ ← a ψ + b σψ` for the Pauli string with the given masks.
    fn apply_pauli_like(&mut self, xm: usize, zm: usize, ny: usize, cmask: usize, a: Complex64, b: Complex64) {
        debug_assert_eq!(xm & cmask, 0, "controls must lie outside the Pauli support");
        if xm == 0 {
            for c in 0..self.amps.len() {
                if c & cmask == cmask {
                    self.amps[c] *= a + b * basis_phase(ny, zm, c);
                }
            }
            return;
        }
        let top = 1usize << (usize::BITS - 1 - xm.leading_zeros());
        for c in 0..self.amps.len() {
            // Visit each pair (c, c ^ xm) once: the partner has the top flipped bit set.
            if c & top != 0 || c & cmask != cmask {
                continue;
            }
            let d = c ^ xm;
            let (pc, pd) = (basis_phase(ny, zm, c), basis_phase(ny, zm, d));
            let (u, v) = (self.amps[c], self.amps[d]);
            // (σψ)[d] = phase(c) ψ[c],  (σψ)[c] = phase(d) ψ[d]
            self.amps[c] = a * u + b * pd * v;
            self.amps[d] = a * v + b * pc * u;
        }
    }

    fn apply_unitary(&mut self, targets: &[usize], m: &CMatrix, cmask: usize) {
        let bits: Vec<usize> = targets.iter().map(|&t| self.bit(t)).collect();
        let tmask: usize = bits.iter().sum();
        let k = targets.len();
        let mut idx = vec![0usize; 1 << k];
        let mut buf = vec![ZERO; 1 << k];
        for base in 0..self.amps.len() {
            if base & tmask != 0 || base & cmask != cmask {
                continue;
            }
            for (local, slot) in idx.iter_mut().enumerate() {
                // local index: targets[0] is the most significant local bit.
                let mut i = base;
                for (j, b) in bits.iter().enumerate() {
                    if local & (1 << (k - 1 - j)) != 0 {
                        i |= b;
                    }
                }
                *slot = i;
            }
            for (r, out) in buf.iter_mut().enumerate() {
                *out = idx.iter().enumerate().map(|(c, &i)| m[(r, c)] * self.amps[i]).sum();
            }
            for (r, &i) in idx.iter().enumerate() {
                self.amps[i] = buf[r];
            }
        }
    }

    /// `<ψ|σ|ψ>` for a single string (complex in general).
    pub fn expectation_string(&self, p: &PauliString) -> Result<Complex64> {
        if p.n_qubits() != self.n_qubits {
            return Err(Error::SizeMismatch { expected: self.n_qubits, found: p.n_qubits() });
        }
        let (xm, zm, ny) = (p.x_mask(), p.z_mask(), p.y_count());
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(c, a)| self.amps[c ^ xm].conj() * basis_phase(ny, zm, c) * a)
            .sum())
    }

    /// `<ψ|O|ψ>` for a Hermitian sum.
    pub fn expectation(&self, obs: &PauliSum) -> Result<f64> {
        if obs.n_qubits() != self.n_qubits {
            return Err(Error::SizeMismatch { expected: self.n_qubits, found: obs.n_qubits() });
        }
        let mut total = ZERO;
        for (p, c) in obs.iter() {
            total += c * self.expectation_string(p)?;
        }
        if total.im.abs() > 1e-10 * (1.0 + total.re.abs()) {
            return Err(Error::NonHermitian { deviation: total.im.abs() });
        }
        Ok(total.re)
    }

    /// Probability that `qubit` reads 0.
    pub fn prob_zero(&self, qubit: usize) -> f64 {
        let b = self.bit(qubit);
        self.amps.iter().enumerate().filter(|(i, _)| i & b == 0).map(|(_, a)| a.norm_sqr()).sum()
    }

    /// Marginal distribution over `measured` (first listed = most significant outcome bit).
    pub fn marginal(&self, measured: &[usize]) -> Vec<f64> {
        let bits: Vec<usize> = measured.iter().map(|&q| self.bit(q)).collect();
        let mut probs = vec![0.0; 1 << measured.len()];
        for (i, a) in self.amps.iter().enumerate() {
            let outcome = bits.iter().fold(0usize, |acc, b| (acc << 1) | usize::from(i & b != 0));
            probs[outcome] += a.norm_sqr();
        }
        probs
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Seeded finite-shot measurement. Identical seed, circuit and shot count
/// give identical counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotSampler {
    pub seed: u64,
    pub shots: u64,
}

impl ShotSampler {
    pub fn new(seed: u64, shots: u64) -> Self {
        assert!(shots >= 1, "at least one shot is required");
        ShotSampler { seed, shots }
    }

    /// Independent sampler for task `index`; used to keep parallel runs reproducible.
    pub fn derive(&self, index: u64) -> ShotSampler {
        ShotSampler { seed: mix_seed(self.seed, index), shots: self.shots }
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// Multinomial draw of `shots` outcomes from `probs`.
    pub fn draw(&self, probs: &[f64]) -> Vec<u64> {
        let mut rng = self.rng();
        let mut counts = vec![0u64; probs.len()];
        let mut left = self.shots;
        let mut mass = 1.0f64;
        for (i, &p) in probs.iter().enumerate() {
            if left == 0 {
                break;
            }
            if i + 1 == probs.len() {
                counts[i] = left;
                break;
            }
            let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
            let k = Binomial::new(left, q).expect("valid binomial").sample(&mut rng);
            counts[i] = k;
            left -= k;
            mass -= p;
        }
        counts
    }

    /// Estimate a probability from `shots` Bernoulli trials.
    pub fn estimate(&self, p: f64) -> f64 {
        let c = self.draw(&[p.clamp(0.0, 1.0), (1.0 - p).clamp(0.0, 1.0)]);
        c[0] as f64 / self.shots as f64
    }
}

/// SplitMix64 finalizer over `(seed, index)`.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// How an ancilla probability is read out.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Readout {
    /// Infinite shots: the probability itself.
    Exact,
    Shots(ShotSampler),
}

impl Readout {
    pub fn probability(&self, p: f64) -> f64 {
        match self {
            Readout::Exact => p,
            Readout::Shots(s) => s.estimate(p),
        }
    }

    pub fn derive(&self, index: u64) -> Readout {
        match self {
            Readout::Exact => Readout::Exact,
            Readout::Shots(s) => Readout::Shots(s.derive(index)),
        }
    }
}

/// Run `circuit` from `|0…0>` and sample the `measured` qubits.
/// Outcome keys put `measured[0]` in the most significant bit.
pub fn sample(circuit: &Circuit, sampler: &ShotSampler, measured: &[usize]) -> BTreeMap<u64, u64> {
    let mut s = StateVector::zero(circuit.n_qubits());
    s.apply_circuit(circuit);
    sample_state(&s, sampler, measured)
}

pub fn sample_state(state: &StateVector, sampler: &ShotSampler, measured: &[usize]) -> BTreeMap<u64, u64> {
    let probs = state.marginal(measured);
    sampler
        .draw(&probs)
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c > 0)
        .map(|(o, c)| (o as u64, c))
        .collect()
}

/// Prepare `|φ>` pairing qubit `first + i` with `second + i` (Hadamards then CNOTs).
pub fn phi_gates(n: usize, first: usize, second: usize) -> Vec<Gate> {
    let mut g: Vec<Gate> = (0..n).map(|i| Gate::Hadamard { target: first + i }).collect();
    g.extend((0..n).map(|i| Gate::Cnot { control: first + i, target: second + i }));
    g
}

/// `2^{-n/2} Σ_i |i>|i>` on `2n` qubits.
pub fn prepare_phi(n: usize) -> StateVector {
    assert!(n >= 1);
    let mut s = StateVector::zero(2 * n);
    for g in phi_gates(n, 0, n) {
        s.apply(&g);
    }
    s
}

/// Apply `U B U†` controlled on `control`, with `U` acting on `offset..`.
/// Only the middle `B` needs the control: `U U† = 𝟙` on the other branch.
fn push_controlled_conjugate(c: &mut Circuit, u: &Circuit, b: &PauliString, offset: usize, control: usize) -> Result<()> {
    c.append_at(&u.dagger(), offset)?;
    c.push(Gate::controlled(control, Gate::Pauli { pauli: *b, offset }))?;
    c.append_at(u, offset)
}

/// Circuit whose ancilla (qubit 0) satisfies
/// `<φ| σ_j ⊗ i[U B U†, σ_k] |φ> = 2 - 4 p(0)`.
/// Layout: ancilla, register 1 (`1..=N`), register 2 (`N+1..=2N`).
pub fn b_test_circuit(u: &Circuit, b: &PauliString, sigma_j: &PauliString, sigma_k: &PauliString) -> Result<Circuit> {
    let n = u.n_qubits();
    check_widths(n, &[b, sigma_j, sigma_k])?;
    let mut c = Circuit::new(2 * n + 1);
    let (r1, r2) = (1, n + 1);
    for g in phi_gates(n, r1, r2) {
        c.push(g)?;
    }
    c.push(Gate::Hadamard { target: 0 })?;
    // controlled W = σ_j ⊗ (U B U† σ_k)
    c.push(Gate::controlled(0, Gate::Pauli { pauli: *sigma_j, offset: r1 }))?;
    c.push(Gate::controlled(0, Gate::Pauli { pauli: *sigma_k, offset: r2 }))?;
    push_controlled_conjugate(&mut c, u, b, r2, 0)?;
    c.push(Gate::Rx { target: 0, theta: FRAC_PI_2 })?;
    Ok(c)
}

/// Circuit whose first ancilla satisfies
/// `<φ| i[V† B_v V, σ_j] ⊗ i[U B_u U†, σ_k] |φ> = -4 + 8 p(0)`.
/// `v` is applied as given on register 1 (callers pass the transposed ansatz).
/// Layout: ancillas 0 and 1, register 1 (`2..`), register 2 (`N+2..`).
pub fn x_test_circuit(
    v: &Circuit,
    b_v: &PauliString,
    u: &Circuit,
    b_u: &PauliString,
    sigma_j: &PauliString,
    sigma_k: &PauliString,
) -> Result<Circuit> {
    let n = u.n_qubits();
    if v.n_qubits() != n {
        return Err(Error::SizeMismatch { expected: n, found: v.n_qubits() });
    }
    check_widths(n, &[b_v, b_u, sigma_j, sigma_k])?;
    let mut c = Circuit::new(2 * n + 2);
    let (r1, r2) = (2, n + 2);
    for g in phi_gates(n, r1, r2) {
        c.push(g)?;
    }
    c.push(Gate::Hadamard { target: 0 })?;
    c.push(Gate::Hadamard { target: 1 })?;
    // relative phase -i on the second ancilla's |1> branch
    c.push(Gate::Rz { target: 1, theta: -FRAC_PI_2 })?;
    // controlled A1 = (V† B_v V) σ_j on register 1
    c.push(Gate::controlled(0, Gate::Pauli { pauli: *sigma_j, offset: r1 }))?;
    c.append_at(v, r1)?;
    c.push(Gate::controlled(0, Gate::Pauli { pauli: *b_v, offset: r1 }))?;
    c.append_at(&v.dagger(), r1)?;
    // controlled A2 = (U B_u U†) σ_k on register 2
    c.push(Gate::controlled(1, Gate::Pauli { pauli: *sigma_k, offset: r2 }))?;
    push_controlled_conjugate(&mut c, u, b_u, r2, 1)?;
    c.push(Gate::Cnot { control: 0, target: 1 })?;
    c.push(Gate::Rx { target: 0, theta: FRAC_PI_2 })?;
    Ok(c)
}

/// Circuit whose ancilla satisfies `p(0) = 1/2 + <φ| σ_h ⊗ U B U† |φ>/2`
/// (R_y readout).
pub fn overlap_test_circuit(u: &Circuit, b: &PauliString, sigma_h: &PauliString) -> Result<Circuit> {
    let n = u.n_qubits();
    check_widths(n, &[b, sigma_h])?;
    let mut c = Circuit::new(2 * n + 1);
    let (r1, r2) = (1, n + 1);
    for g in phi_gates(n, r1, r2) {
        c.push(g)?;
    }
    c.push(Gate::Hadamard { target: 0 })?;
    // ancilla in |->: the |1> branch carries a relative sign
    c.push(Gate::Rz { target: 0, theta: std::f64::consts::PI })?;
    c.push(Gate::controlled(0, Gate::Pauli { pauli: *sigma_h, offset: r1 }))?;
    push_controlled_conjugate(&mut c, u, b, r2, 0)?;
    c.push(Gate::Ry { target: 0, theta: FRAC_PI_2 })?;
    Ok(c)
}

fn check_widths(n: usize, strings: &[&PauliString]) -> Result<()> {
    for s in strings {
        if s.n_qubits() != n {
            return Err(Error::SizeMismatch { expected: n, found: s.n_qubits() });
        }
    }
    Ok(())
}

fn ancilla_p0(circuit: &Circuit) -> f64 {
    let mut s = StateVector::zero(circuit.n_qubits());
    s.apply_circuit(circuit);
    s.prob_zero(0)
}

/// `<φ| σ_j ⊗ i[U B U†, σ_k] |φ>`, read as `2 - 4 p(0)`.
pub fn hadamard_test_b(
    u: &Circuit,
    b: &PauliString,
    sigma_j: &PauliString,
    sigma_k: &PauliString,
    readout: &Readout,
) -> Result<f64> {
    let p = readout.probability(ancilla_p0(&b_test_circuit(u, b, sigma_j, sigma_k)?));
    Ok(2.0 - 4.0 * p)
}

/// `<φ| i[V† B_v V, σ_j] ⊗ i[U B_u U†, σ_k] |φ>`, read as `-4 + 8 p(0)`.
pub fn hadamard_test_x(
    v: &Circuit,
    b_v: &PauliString,
    u: &Circuit,
    b_u: &PauliString,
    sigma_j: &PauliString,
    sigma_k: &PauliString,
    readout: &Readout,
) -> Result<f64> {
    let p = readout.probability(ancilla_p0(&x_test_circuit(v, b_v, u, b_u, sigma_j, sigma_k)?));
    Ok(-4.0 + 8.0 * p)
}

/// `<φ| σ_h ⊗ U B U† |φ>`, read as `2 p(0) - 1`.
pub fn overlap_test(u: &Circuit, b: &PauliString, sigma_h: &PauliString, readout: &Readout) -> Result<f64> {
    let p = readout.probability(ancilla_p0(&overlap_test_circuit(u, b, sigma_h)?));
    Ok(2.0 * p - 1.0)
}

/// Measure a Pauli string directly: rotate each supported qubit to the Z
/// basis (H for X, R_x(π/2) for Y) and read the parity.
pub fn measure_pauli(state: &StateVector, p: &PauliString, readout: &Readout) -> Result<f64> {
    match readout {
        Readout::Exact => Ok(state.expectation_string(p)?.re),
        Readout::Shots(sampler) => {
            if p.n_qubits() != state.n_qubits() {
                return Err(Error::SizeMismatch { expected: state.n_qubits(), found: p.n_qubits() });
            }
            let support = p.support();
            if support.is_empty() {
                return Ok(1.0);
            }
            let mut s = state.clone();
            for &q in &support {
                match p.letter(q) {
                    crate::pauli::Pauli::X => s.apply(&Gate::Hadamard { target: q }),
                    crate::pauli::Pauli::Y => s.apply(&Gate::Rx { target: q, theta: FRAC_PI_2 }),
                    _ => {}
                }
            }
            let counts = sample_state(&s, sampler, &support);
            let signed: i64 = counts
                .iter()
                .map(|(o, c)| if o.count_ones() % 2 == 0 { *c as i64 } else { -(*c as i64) })
                .sum();
            Ok(signed as f64 / sampler.shots as f64)
        }
    }
}
