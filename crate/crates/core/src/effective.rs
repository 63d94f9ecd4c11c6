//! Low-energy effective Hamiltonians and the dynamics used to judge them.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::Strategy;
use crate::oracle::{self, Eigen};
use crate::pauli::{PauliString, PauliSum};
use crate::simulator::{measure_pauli, Gate, StateVector};
use crate::vagt::VagtResult;
use crate::CMatrix;

/// `P = 𝟙_eff ⊗ |π><π|`: identity on the effective qubits, a fixed
/// computational basis state on the rest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowEnergyProjector {
    pub n_qubits: usize,
    /// Ascending; effective qubit `k` is full qubit `effective[k]`.
    pub effective: Vec<usize>,
    /// Bit of `|π>` on every other qubit, by full qubit index.
    pub pinned: Vec<(usize, bool)>,
}

impl LowEnergyProjector {
    /// Pin `pinned` qubits to the given bits; all remaining qubits are effective.
    pub fn new(n_qubits: usize, pinned: &[(usize, bool)]) -> Result<Self> {
        let mut seen = vec![false; n_qubits];
        for &(q, _) in pinned {
            if q >= n_qubits || seen[q] {
                return Err(Error::Invalid(format!("bad pinned qubit {q}")));
            }
            seen[q] = true;
        }
        let effective: Vec<usize> = (0..n_qubits).filter(|q| !seen[*q]).collect();
        if effective.is_empty() {
            return Err(Error::Invalid("no effective qubits left".into()));
        }
        let mut pinned = pinned.to_vec();
        pinned.sort();
        Ok(LowEnergyProjector { n_qubits, effective, pinned })
    }

    pub fn n_eff(&self) -> usize {
        self.effective.len()
    }

    /// Full basis index of effective index `a` (effective qubit 0 most significant).
    pub fn full_index(&self, a: usize) -> usize {
        let n = self.n_qubits;
        let ne = self.n_eff();
        let mut idx = 0usize;
        for (k, &q) in self.effective.iter().enumerate() {
            if (a >> (ne - 1 - k)) & 1 == 1 {
                idx |= 1 << (n - 1 - q);
            }
        }
        for &(q, bit) in &self.pinned {
            if bit {
                idx |= 1 << (n - 1 - q);
            }
        }
        idx
    }

    /// Full index with effective bits `a` and pinned bits `c` (pinned order as stored).
    fn full_index_with(&self, a: usize, c: usize) -> usize {
        let n = self.n_qubits;
        let ne = self.n_eff();
        let np = self.pinned.len();
        let mut idx = 0usize;
        for (k, &q) in self.effective.iter().enumerate() {
            if (a >> (ne - 1 - k)) & 1 == 1 {
                idx |= 1 << (n - 1 - q);
            }
        }
        for (k, &(q, _)) in self.pinned.iter().enumerate() {
            if (c >> (np - 1 - k)) & 1 == 1 {
                idx |= 1 << (n - 1 - q);
            }
        }
        idx
    }

    /// A full-register string as an effective-register string; it must act
    /// as the identity on every pinned qubit.
    pub fn restrict(&self, s: &PauliString) -> Result<PauliString> {
        if s.n_qubits() != self.n_qubits {
            return Err(Error::SizeMismatch { expected: self.n_qubits, found: s.n_qubits() });
        }
        if let Some(&(q, _)) = self.pinned.iter().find(|(q, _)| s.letter(*q) != crate::pauli::Pauli::I) {
            return Err(Error::BadEffectiveOperator(format!("{s} acts on pinned qubit {q}")));
        }
        let letters: Vec<_> = self.effective.iter().map(|&q| s.letter(q)).collect();
        Ok(PauliString::from_letters(&letters))
    }

    pub fn dense(&self) -> CMatrix {
        let d = 1 << self.n_qubits;
        let mut p = CMatrix::zeros(d, d);
        for a in 0..1 << self.n_eff() {
            let i = self.full_index(a);
            p[(i, i)] = Complex64::new(1.0, 0.0);
        }
        p
    }

    /// `<π| M |π>` as a `2^{N_eff}` square matrix.
    pub fn compress(&self, m: &CMatrix) -> Result<CMatrix> {
        if m.nrows() != 1 << self.n_qubits || m.ncols() != m.nrows() {
            return Err(Error::SizeMismatch { expected: 1 << self.n_qubits, found: m.nrows() });
        }
        let de = 1 << self.n_eff();
        Ok(CMatrix::from_fn(de, de, |a, b| m[(self.full_index(a), self.full_index(b))]))
    }

    /// `|ξ> ⊗ |π>` in the full space.
    pub fn embed_state(&self, xi: &DVector<Complex64>) -> DVector<Complex64> {
        let mut out = DVector::zeros(1 << self.n_qubits);
        for (a, z) in xi.iter().enumerate() {
            out[self.full_index(a)] = *z;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveHamiltonian {
    pub n_eff: usize,
    pub op: PauliSum,
}

impl EffectiveHamiltonian {
    pub fn dense(&self) -> CMatrix {
        self.op.to_dense()
    }

    /// Real coefficient of a Pauli string given as text.
    pub fn coefficient(&self, s: &str) -> Result<f64> {
        let p: PauliString = s.parse()?;
        Ok(self.op.coefficient(&p).re)
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        oracle::eigenvalues(&self.dense())
    }
}

/// `h^eff_j̃ = Tr[H̃ P σ̃_j̃ P] / 2^{N_eff}`.
///
/// Analytic mode reads the block of the dense `H̃`. Circuit modes evaluate
/// `Σ_j h_j <πφ| U†σ_jU ⊗ σ̃*|πφ>`, with `U` applied on the first register
/// and the joint string measured after single-qubit basis rotations.
pub fn extract_heff(result: &VagtResult, projector: &LowEnergyProjector, strategy: &Strategy) -> Result<EffectiveHamiltonian> {
    if projector.n_qubits != result.pair.n_qubits {
        return Err(Error::SizeMismatch { expected: result.pair.n_qubits, found: projector.n_qubits });
    }
    let ne = projector.n_eff();
    let op = match strategy {
        Strategy::Analytic => PauliSum::decompose(&projector.compress(&result.h_tilde_dense)?)?,
        _ => {
            let readout = strategy.readout(0).derive(u64::MAX);
            let u = result.ansatz.full_unitary(result.params.last())?;
            let state = pinned_phi(projector, &u)?;
            let h = result.pair.h_lambda().real_coefficients();
            let n = projector.n_qubits;
            let tilde: Vec<PauliString> = PauliString::all(ne).collect();
            let coeffs: Vec<f64> = tilde
                .par_iter()
                .enumerate()
                .map(|(jt, st)| {
                    let sign = st.transpose_parity() as f64;
                    let mut acc = 0.0;
                    for (j, (sj, hj)) in h.iter().enumerate() {
                        let joint = sj.embed(0, n + ne).mul(&st.embed(n, n + ne))?.1;
                        let r = readout.derive((jt * h.len() + j) as u64);
                        acc += hj * sign * measure_pauli(&state, &joint, &r)?;
                    }
                    Ok(acc)
                })
                .collect::<Result<_>>()?;
            let mut op = PauliSum::zero(ne);
            for (st, c) in tilde.into_iter().zip(coeffs) {
                op.add_term(st, Complex64::new(c, 0.0));
            }
            op
        }
    };
    Ok(EffectiveHamiltonian { n_eff: ne, op })
}

/// `U|π φ>` on `N + N_eff` qubits: effective qubits entangled with the
/// second register, pinned qubits prepared in `|π>`.
fn pinned_phi(projector: &LowEnergyProjector, u: &crate::simulator::Circuit) -> Result<StateVector> {
    let n = projector.n_qubits;
    let ne = projector.n_eff();
    let mut s = StateVector::zero(n + ne);
    for &(q, bit) in &projector.pinned {
        if bit {
            s.apply(&Gate::Pauli { pauli: PauliString::single(1, 0, crate::pauli::Pauli::X), offset: q });
        }
    }
    for (k, &q) in projector.effective.iter().enumerate() {
        s.apply(&Gate::Hadamard { target: q });
        s.apply(&Gate::Cnot { control: q, target: n + k });
    }
    for g in u.gates() {
        s.apply(g);
    }
    Ok(s)
}

/// Mean and normal-approximation 95% interval over samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let half = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            1.96 * (var / n).sqrt()
        } else {
            0.0
        };
        Aggregate { mean, ci_low: mean - half, ci_high: mean + half }
    }
}

/// Which Hamiltonian evolves `|ξ, π>` in the full space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FidelityFrame {
    /// `e^{-itH_λ}`, the original Hamiltonian.
    #[default]
    Lab,
    /// `e^{-itH̃}`, the rotated Hamiltonian in which `H^eff` is defined.
    Rotated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelitySeries {
    pub times: Vec<f64>,
    /// `[state][time]`.
    pub f1: Vec<Vec<f64>>,
    pub f2: Vec<Vec<f64>>,
}

impl FidelitySeries {
    pub fn f1_summary(&self) -> Vec<Aggregate> {
        summarize(&self.f1, self.times.len())
    }

    pub fn f2_summary(&self) -> Vec<Aggregate> {
        summarize(&self.f2, self.times.len())
    }
}

fn summarize(rows: &[Vec<f64>], nt: usize) -> Vec<Aggregate> {
    (0..nt).map(|k| Aggregate::of(&rows.iter().map(|r| r[k]).collect::<Vec<_>>())).collect()
}

/// Haar-random states: normalized complex Gaussian amplitudes.
pub fn random_states(dim: usize, count: usize, seed: u64) -> Vec<DVector<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let v = DVector::from_fn(dim, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im)
            });
            let norm = v.norm();
            v / Complex64::new(norm, 0.0)
        })
        .collect()
}

/// `n` points from `a` to `b`, evenly spaced in `log t`.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n).map(|k| (la + (lb - la) * k as f64 / (n - 1) as f64).exp()).collect()
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linear_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn evolve(e: &Eigen, coeffs: &DVector<Complex64>, t: f64) -> DVector<Complex64> {
    let phased = DVector::from_fn(coeffs.len(), |k, _| coeffs[k] * Complex64::from_polar(1.0, -e.values[k] * t));
    &e.vectors * phased
}

/// `F1(t) = <ψ^eff(t)|ρ(t)|ψ^eff(t)>`, `F2(t) = <ξ|ρ(t)|ξ>`, with `ρ` the
/// reduced state of `e^{-itH}|ξ, π>` on the effective qubits.
pub fn fidelities(
    h_full: &CMatrix,
    heff: &EffectiveHamiltonian,
    projector: &LowEnergyProjector,
    states: &[DVector<Complex64>],
    times: &[f64],
) -> Result<FidelitySeries> {
    if heff.n_eff != projector.n_eff() {
        return Err(Error::SizeMismatch { expected: projector.n_eff(), found: heff.n_eff });
    }
    let full = oracle::eig(h_full)?;
    if full.values.len() != 1 << projector.n_qubits {
        return Err(Error::SizeMismatch { expected: 1 << projector.n_qubits, found: full.values.len() });
    }
    let eff = oracle::eig(&heff.dense())?;
    let de = 1 << projector.n_eff();
    let np = projector.pinned.len();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = states
        .par_iter()
        .map(|xi| {
            let c_full = full.vectors.adjoint() * projector.embed_state(xi);
            let c_eff = eff.vectors.adjoint() * xi;
            let mut f1 = Vec::with_capacity(times.len());
            let mut f2 = Vec::with_capacity(times.len());
            for &t in times {
                let psi = evolve(&full, &c_full, t);
                let phi = evolve(&eff, &c_eff, t);
                let (mut a1, mut a2) = (0.0, 0.0);
                for c in 0..1usize << np {
                    let (mut o1, mut o2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
                    for a in 0..de {
                        let amp = psi[projector.full_index_with(a, c)];
                        o1 += phi[a].conj() * amp;
                        o2 += xi[a].conj() * amp;
                    }
                    a1 += o1.norm_sqr();
                    a2 += o2.norm_sqr();
                }
                f1.push(a1);
                f2.push(a2);
            }
            (f1, f2)
        })
        .collect();
    let (f1, f2) = rows.into_iter().unzip();
    Ok(FidelitySeries { times: times.to_vec(), f1, f2 })
}

/// Fidelities for a finished run in the chosen frame.
pub fn run_fidelities(
    result: &VagtResult,
    heff: &EffectiveHamiltonian,
    projector: &LowEnergyProjector,
    states: &[DVector<Complex64>],
    times: &[f64],
    frame: FidelityFrame,
) -> Result<FidelitySeries> {
    let h = match frame {
        FidelityFrame::Lab => result.pair.h_lambda().to_dense(),
        FidelityFrame::Rotated => result.h_tilde_dense.clone(),
    };
    fidelities(&h, heff, projector, states, times)
}

/// Per-time mean over states of the largest eigenvalue of `ρ(t)`, the
/// reduced state of `e^{-itH}|ξ, π>`. No effective Hamiltonian can give a
/// mean `F1` above it.
pub fn fidelity_ceiling(h_full: &CMatrix, projector: &LowEnergyProjector, states: &[DVector<Complex64>], times: &[f64]) -> Result<Vec<f64>> {
    let full = oracle::eig(h_full)?;
    if full.values.len() != 1 << projector.n_qubits {
        return Err(Error::SizeMismatch { expected: 1 << projector.n_qubits, found: full.values.len() });
    }
    if states.is_empty() {
        return Err(Error::Invalid("no initial states".into()));
    }
    let de = 1 << projector.n_eff();
    let np = projector.pinned.len();
    let rows: Vec<Vec<f64>> = states
        .par_iter()
        .map(|xi| {
            let c_full = full.vectors.adjoint() * projector.embed_state(xi);
            times
                .iter()
                .map(|&t| {
                    let psi = evolve(&full, &c_full, t);
                    let rho = CMatrix::from_fn(de, de, |a, b| {
                        (0..1usize << np).map(|c| psi[projector.full_index_with(a, c)] * psi[projector.full_index_with(b, c)].conj()).sum()
                    });
                    oracle::eigenvalues(&rho).map(|e| e[de - 1])
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..times.len()).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / rows.len() as f64).collect())
}

/// How much of `H̃` the correlation function uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationMode {
    /// The whole reconstructed `H̃`.
    #[default]
    Full,
    /// Only its diagonal, the fully diagonalized form.
    Diagonal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn pauli(self) -> crate::pauli::Pauli {
        match self {
            Axis::X => crate::pauli::Pauli::X,
            Axis::Y => crate::pauli::Pauli::Y,
            Axis::Z => crate::pauli::Pauli::Z,
        }
    }
}

/// Index of the ground state of the diagonal `U_0† H_0 U_0`; the lowest
/// index wins among degenerate minima.
pub fn ground_index(result: &VagtResult) -> Result<usize> {
    let u0 = result.ansatz.u0().matrix(result.pair.n_qubits);
    let d0 = u0.adjoint() * result.pair.h0.to_dense() * &u0;
    let diag: Vec<f64> = d0.diagonal().iter().map(|z| z.re).collect();
    let scale = diag.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(diag.iter().position(|v| *v <= min + 1e-9 * scale).expect("nonempty"))
}

/// `C^α(t) = Re <g_0| σ̃ e^{-itH̃} σ̃ |g_0>` with `σ̃ = U† σ^α_1 U`, evaluated
/// in the rotated frame where `|g_0>` is a basis state.
pub fn correlation(result: &VagtResult, axis: Axis, times: &[f64], mode: CorrelationMode) -> Result<Vec<f64>> {
    let n = result.pair.n_qubits;
    let u = result.unitary_matrix()?;
    let sigma = PauliString::single(n, 0, axis.pauli()).to_dense();
    let sigma_t = u.adjoint() * sigma * &u;
    let h = match mode {
        CorrelationMode::Full => result.h_tilde_dense.clone(),
        CorrelationMode::Diagonal => CMatrix::from_diagonal(&result.h_tilde_dense.diagonal().map(|z| Complex64::new(z.re, 0.0))),
    };
    let e = oracle::eig(&h)?;
    let g = ground_index(result)?;
    let v = sigma_t.column(g).into_owned();
    let c = e.vectors.adjoint() * &v;
    let left = v.adjoint();
    Ok(times.iter().map(|&t| (&left * evolve(&e, &c, t))[(0, 0)].re).collect())
}

/// `Re <g|σ^α_1 e^{-itH} σ^α_1|g>` with `|g>` the ground state of `H_λ`.
pub fn exact_correlation(h: &PauliSum, axis: Axis, times: &[f64]) -> Result<Vec<f64>> {
    let n = h.n_qubits();
    let e = oracle::eig(&h.to_dense())?;
    let g = e.vectors.column(0).into_owned();
    let sigma = PauliString::single(n, 0, axis.pauli()).to_dense();
    let v = sigma * g;
    let c = e.vectors.adjoint() * &v;
    let left = v.adjoint();
    Ok(times.iter().map(|&t| (&left * evolve(&e, &c, t))[(0, 0)].re).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::builtin_ansatz;
    use crate::models::{model_low_energy, model_random_2q, HamiltonianPair};
    use crate::vagt::{ansatz_for, run, VagtConfig};
    use crate::ansatz::{AnsatzSpec, U0};

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn projector_identities() {
        let p = LowEnergyProjector::new(3, &[(2, false)]).unwrap();
        let d = p.dense();
        let q = CMatrix::identity(8, 8) - &d;
        assert!((&d * &d - &d).norm() < 1e-12);
        assert!((&d - d.adjoint()).norm() < 1e-12);
        assert!((&d * &q).norm() < 1e-12);
        assert!((d.trace().re - 4.0).abs() < 1e-12);
        assert_eq!(p.effective, vec![0, 1]);
        let p1 = LowEnergyProjector::new(3, &[(0, true)]).unwrap();
        assert_eq!(p1.full_index(0), 4);
        assert_eq!(p1.full_index(3), 7);
        assert!(LowEnergyProjector::new(2, &[(0, true), (1, false)]).is_err());
        assert!(LowEnergyProjector::new(2, &[(2, true)]).is_err());
        assert_eq!(p.restrict(&ps("XZI")).unwrap(), ps("XZ"));
        assert!(matches!(p.restrict(&ps("XIZ")), Err(Error::BadEffectiveOperator(_))));
    }

    fn trivial_run(pair: &HamiltonianPair) -> VagtResult {
        let spec = AnsatzSpec::new("one", pair.n_qubits, U0::Identity, vec![PauliString::single(pair.n_qubits, 0, crate::pauli::Pauli::X)], vec![], None).unwrap();
        run(&pair.with_lambda(0.0), &spec, &VagtConfig::new(1, Strategy::Analytic)).unwrap()
    }

    #[test]
    fn pinned_expectation_example() {
        let pair = HamiltonianPair::custom("z", PauliSum::from_real(2, &[("IZ", 1.0)]).unwrap(), PauliSum::zero(2), 0.0, U0::Identity).unwrap();
        let r = trivial_run(&pair);
        let p = LowEnergyProjector::new(2, &[(1, false)]).unwrap();
        for s in [Strategy::Analytic, Strategy::CircuitExact] {
            let h = extract_heff(&r, &p, &s).unwrap();
            assert!((h.coefficient("I").unwrap() - 1.0).abs() < 1e-12);
            assert!(h.coefficient("X").unwrap().abs() < 1e-12);
            assert!(h.coefficient("Z").unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn circuit_and_analytic_extraction_agree() {
        let pair = model_low_energy(-5.0, 1.0);
        let spec = ansatz_for(&pair, "lowenergy36").unwrap();
        let r = run(&pair, &spec, &VagtConfig::new(4, Strategy::Analytic)).unwrap();
        let p = LowEnergyProjector::new(3, &[(2, false)]).unwrap();
        let a = extract_heff(&r, &p, &Strategy::Analytic).unwrap();
        let c = extract_heff(&r, &p, &Strategy::CircuitExact).unwrap();
        for s in PauliString::all(2) {
            assert!((a.op.coefficient(&s) - c.op.coefficient(&s)).norm() < 1e-8, "{s}");
        }
        assert!(a.op.is_hermitian());
        // reconstruction of the P block
        let block = p.compress(&r.h_tilde_dense).unwrap();
        assert!((a.dense() - block).norm() < 1e-9);
        // linearity in H̃
        let mut scaled = r.clone();
        scaled.h_tilde_dense *= Complex64::new(2.5, 0.0);
        let s2 = extract_heff(&scaled, &p, &Strategy::Analytic).unwrap();
        for s in PauliString::all(2) {
            assert!((s2.op.coefficient(&s) - a.op.coefficient(&s) * 2.5).norm() < 1e-12);
        }
    }

    #[test]
    fn shot_extraction_is_close() {
        let pair = model_random_2q(3, 1.0);
        let spec = ansatz_for(&pair, "universal2q15").unwrap();
        let r = run(&pair, &spec, &VagtConfig::new(3, Strategy::Analytic)).unwrap();
        let p = LowEnergyProjector::new(2, &[(1, true)]).unwrap();
        let a = extract_heff(&r, &p, &Strategy::Analytic).unwrap();
        let s = extract_heff(&r, &p, &Strategy::CircuitShots { shots: 20000, seed: 1 }).unwrap();
        for st in PauliString::all(1) {
            assert!((a.op.coefficient(&st) - s.op.coefficient(&st)).norm() < 0.1);
        }
    }

    #[test]
    fn fidelity_trivial_cases() {
        // decoupled pinned qubit: H = H_eff ⊗ 𝟙 + Z on the pinned qubit
        let h = PauliSum::from_real(3, &[("XZI", 0.7), ("YYI", -0.3), ("IIZ", 2.0), ("ZII", 0.4)]).unwrap();
        let heff = EffectiveHamiltonian { n_eff: 2, op: PauliSum::from_real(2, &[("XZ", 0.7), ("YY", -0.3), ("ZI", 0.4), ("II", 2.0)]).unwrap() };
        let p = LowEnergyProjector::new(3, &[(2, false)]).unwrap();
        let states = random_states(4, 5, 9);
        let times = [0.0, 0.5, 3.0, 40.0];
        let f = fidelities(&h.to_dense(), &heff, &p, &states, &times).unwrap();
        for s in 0..5 {
            assert!((f.f1[s][0] - 1.0).abs() < 1e-10 && (f.f2[s][0] - 1.0).abs() < 1e-10);
            for k in 0..times.len() {
                assert!((f.f1[s][k] - 1.0).abs() < 1e-10);
                assert!(f.f2[s][k] >= -1e-10 && f.f2[s][k] <= 1.0 + 1e-10);
            }
        }
        let agg = f.f1_summary();
        assert!((agg[2].mean - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fidelities_stay_in_unit_interval() {
        let pair = model_low_energy(-5.0, 1.0);
        let spec = builtin_ansatz("lowenergy36", 3).unwrap();
        let r = run(&pair, &spec, &VagtConfig::new(3, Strategy::Analytic)).unwrap();
        let p = LowEnergyProjector::new(3, &[(2, false)]).unwrap();
        let heff = extract_heff(&r, &p, &Strategy::Analytic).unwrap();
        let states = random_states(4, 4, 1);
        for frame in [FidelityFrame::Lab, FidelityFrame::Rotated] {
            let f = run_fidelities(&r, &heff, &p, &states, &log_grid(1.0, 100.0, 7), frame).unwrap();
            for v in f.f1.iter().chain(&f.f2).flatten() {
                assert!(*v >= -1e-10 && *v <= 1.0 + 1e-10);
            }
        }
    }

    #[test]
    fn ceiling_bounds_mean_f1() {
        let pair = model_low_energy(-5.0, 1.0);
        let spec = builtin_ansatz("lowenergy36", 3).unwrap();
        let r = run(&pair, &spec, &VagtConfig::new(5, Strategy::Analytic)).unwrap();
        let p = LowEnergyProjector::new(3, &[(2, false)]).unwrap();
        let heff = extract_heff(&r, &p, &Strategy::Analytic).unwrap();
        let states = random_states(4, 6, 2);
        let times = log_grid(1.0, 100.0, 9);
        let h = pair.h_lambda().to_dense();
        let cap = fidelity_ceiling(&h, &p, &states, &times).unwrap();
        let f = fidelities(&h, &heff, &p, &states, &times).unwrap();
        for (a, c) in f.f1_summary().iter().zip(&cap) {
            assert!(a.mean <= c + 1e-10 && *c <= 1.0 + 1e-10);
        }
        let decoupled = model_low_energy(-5.0, 0.0).h_lambda().to_dense();
        assert!(fidelity_ceiling(&decoupled, &p, &states, &times).unwrap().iter().all(|c| (c - 1.0).abs() < 1e-10));
    }

    #[test]
    fn random_states_are_normalized_and_seeded() {
        let a = random_states(8, 3, 5);
        assert_eq!(a, random_states(8, 3, 5));
        assert_ne!(a, random_states(8, 3, 6));
        for s in &a {
            assert!((s.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn grids() {
        let g = log_grid(1.0, 1000.0, 4);
        for (a, b) in g.iter().zip([1.0, 10.0, 100.0, 1000.0]) {
            assert!((a - b).abs() < 1e-9 * b);
        }
        assert_eq!(linear_grid(0.0, 10.0, 3), vec![0.0, 5.0, 10.0]);
    }

    #[test]
    fn correlation_examples() {
        let pair = model_random_2q(7, 1.0);
        let spec = ansatz_for(&pair, "universal2q15").unwrap();
        let r = run(&pair, &spec, &VagtConfig::new(10, Strategy::Analytic)).unwrap();
        let times = linear_grid(0.0, 10.0, 41);
        for axis in [Axis::X, Axis::Z] {
            let c = correlation(&r, axis, &times, CorrelationMode::Full).unwrap();
            assert!((c[0] - 1.0).abs() < 1e-10);
            assert!(c.iter().all(|v| v.abs() <= 1.0 + 1e-10));
            let exact = exact_correlation(&pair.h_lambda(), axis, &times).unwrap();
            assert!((exact[0] - 1.0).abs() < 1e-10);
            let sup = c.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(sup < 0.05, "{axis:?}: {sup}");
            let d = correlation(&r, axis, &times, CorrelationMode::Diagonal).unwrap();
            assert!((d[0] - 1.0).abs() < 1e-10);
        }
        assert_eq!(ground_index(&r).unwrap(), 3);
    }

    #[test]
    fn rejects_mismatched_projector() {
        let pair = model_random_2q(7, 0.0);
        let r = trivial_run(&pair);
        let p = LowEnergyProjector::new(3, &[(2, false)]).unwrap();
        assert!(extract_heff(&r, &p, &Strategy::Analytic).is_err());
    }
}
