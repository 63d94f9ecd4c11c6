//! The per-step linear system `X β = b`.
//!
//! With `Q^l = i[O^l, H_μ]` the step cost is
//! `‖V + Σ_l β_l Q^l‖² = ‖V‖² − 2 βᵀb + βᵀXβ` where
//! `b_l = −Tr(V Q^l)` and `X_{lm} = Tr(Q^l Q^m)`.
//! Coefficients are first built per generator layer and then summed over
//! tied layers to give the free-parameter system.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzSpec;
use crate::cheap_n2;
use crate::error::{Error, Result};
use crate::models::HamiltonianPair;
use crate::pauli::{PauliString, PauliSum};
use crate::simulator::{hadamard_test_b, hadamard_test_x, Readout, ShotSampler};

/// Default relative eigenvalue cutoff of the pseudo-inverse.
pub const DEFAULT_CUTOFF: f64 = 1e-10;

/// How `b` and `X` are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", try_from = "StrategyDoc")]
pub enum Strategy {
    /// Traces in the Pauli algebra.
    Analytic,
    /// Hadamard-test circuits read out with infinite shots.
    CircuitExact,
    CircuitShots { shots: u64, seed: u64 },
    /// Two-qubit regression scheme; `shots: None` reads probabilities exactly.
    CheapN2 {
        shots: Option<u64>,
        seed: u64,
        /// Measure `σ_h ⊗ B` directly instead of through an ancilla.
        direct: bool,
    },
}

/// Flat on-disk form; rejects fields that do not belong to the mode.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StrategyDoc {
    mode: String,
    shots: Option<u64>,
    seed: Option<u64>,
    direct: Option<bool>,
}

impl TryFrom<StrategyDoc> for Strategy {
    type Error = String;

    fn try_from(d: StrategyDoc) -> std::result::Result<Self, String> {
        let none_extra = |ok: bool| if ok { Ok(()) } else { Err(format!("unexpected field for mode '{}'", d.mode)) };
        match d.mode.as_str() {
            "analytic" | "circuit-exact" => {
                none_extra(d.shots.is_none() && d.seed.is_none() && d.direct.is_none())?;
                Ok(if d.mode == "analytic" { Strategy::Analytic } else { Strategy::CircuitExact })
            }
            "circuit-shots" => {
                none_extra(d.direct.is_none())?;
                match (d.shots, d.seed) {
                    (Some(shots), Some(seed)) if shots > 0 => Ok(Strategy::CircuitShots { shots, seed }),
                    _ => Err("circuit-shots needs positive 'shots' and a 'seed'".into()),
                }
            }
            "cheap-n2" => {
                if d.shots == Some(0) {
                    return Err("'shots' must be positive".into());
                }
                Ok(Strategy::CheapN2 { shots: d.shots, seed: d.seed.unwrap_or(0), direct: d.direct.unwrap_or(false) })
            }
            other => Err(format!("unknown mode '{other}'")),
        }
    }
}

impl Strategy {
    pub fn is_circuit(&self) -> bool {
        !matches!(self, Strategy::Analytic)
    }

    /// Readout for step `t`; every circuit of the step derives from it.
    pub fn readout(&self, t: usize) -> Readout {
        match *self {
            Strategy::CircuitShots { shots, seed } | Strategy::CheapN2 { shots: Some(shots), seed, .. } => {
                Readout::Shots(ShotSampler::new(seed, shots).derive(t as u64))
            }
            _ => Readout::Exact,
        }
    }

    /// The same strategy with its shot seed replaced (no-op for exact modes).
    pub fn with_seed(self, seed: u64) -> Strategy {
        match self {
            Strategy::CircuitShots { shots, .. } => Strategy::CircuitShots { shots, seed },
            Strategy::CheapN2 { shots, direct, .. } => Strategy::CheapN2 { shots, seed, direct },
            other => other,
        }
    }

    pub fn shots(&self) -> Option<u64> {
        match *self {
            Strategy::CircuitShots { shots, .. } => Some(shots),
            Strategy::CheapN2 { shots, .. } => shots,
            _ => None,
        }
    }

    /// Parse the command-line form: `analytic`, `circuit-exact`,
    /// `circuit-shots:S:SEED`, `cheap-n2[:S:SEED]`, `cheap-n2-direct[:S:SEED]`.
    pub fn parse(text: &str) -> Result<Strategy> {
        let parts: Vec<&str> = text.split(':').collect();
        let num = |s: &str| s.parse::<u64>().map_err(|_| Error::Parse(format!("bad number '{s}' in strategy '{text}'")));
        match parts.as_slice() {
            ["analytic"] => Ok(Strategy::Analytic),
            ["circuit-exact"] => Ok(Strategy::CircuitExact),
            ["circuit-shots", s, seed] => Ok(Strategy::CircuitShots { shots: num(s)?, seed: num(seed)? }),
            ["cheap-n2"] => Ok(Strategy::CheapN2 { shots: None, seed: 0, direct: false }),
            ["cheap-n2", s, seed] => Ok(Strategy::CheapN2 { shots: Some(num(s)?), seed: num(seed)?, direct: false }),
            ["cheap-n2-direct"] => Ok(Strategy::CheapN2 { shots: None, seed: 0, direct: true }),
            ["cheap-n2-direct", s, seed] => Ok(Strategy::CheapN2 { shots: Some(num(s)?), seed: num(seed)?, direct: true }),
            _ => Err(Error::Parse(format!("unknown strategy '{text}'"))),
        }
    }
}

/// Circuits evaluated for one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitCount {
    pub n_b: usize,
    pub n_x: usize,
    /// Base circuits of the two-qubit regression scheme.
    pub n_base: usize,
}

impl CircuitCount {
    pub fn total(&self) -> usize {
        self.n_b + self.n_x + self.n_base
    }

    pub fn add(&mut self, other: &CircuitCount) {
        self.n_b += other.n_b;
        self.n_x += other.n_x;
        self.n_base += other.n_base;
    }
}

/// Closed-form Hadamard-test counts for one step with `gamma_v` terms in
/// `V`, `gamma_h` terms in `H_μ` and `layers` generators. `X` is filled
/// from its upper triangle.
pub fn circuit_budget(gamma_v: usize, gamma_h: usize, layers: usize) -> CircuitCount {
    CircuitCount { n_b: gamma_v * gamma_h * layers, n_x: gamma_h * gamma_h * layers * (layers + 1) / 2, n_base: 0 }
}

/// Per-layer coefficients of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerSystem {
    pub b: DVector<f64>,
    pub x: DMatrix<f64>,
    pub count: CircuitCount,
    /// Rough standard error of one `X` entry under shot noise.
    pub x_noise: f64,
}

impl LayerSystem {
    /// Free-parameter `(X, b)`.
    pub fn reduce(&self, spec: &AnsatzSpec) -> (DMatrix<f64>, DVector<f64>) {
        (spec.reduce_matrix(&self.x), DVector::from_vec(spec.reduce_vector(self.b.as_slice())))
    }
}

/// Non-zero real Pauli coefficients, in string order.
pub fn real_terms(op: &PauliSum) -> Vec<(PauliString, f64)> {
    op.real_coefficients().into_iter().filter(|(_, c)| *c != 0.0).collect()
}

fn check_widths(pair: &HamiltonianPair, spec: &AnsatzSpec) -> Result<()> {
    if pair.n_qubits != spec.n_qubits() {
        return Err(Error::SizeMismatch { expected: pair.n_qubits, found: spec.n_qubits() });
    }
    Ok(())
}

/// `Q^l = i[O^l, H]` for every layer.
pub fn q_operators(spec: &AnsatzSpec, row: &[f64], h: &PauliSum) -> Result<Vec<PauliSum>> {
    let i = Complex64::new(0.0, 1.0);
    spec.rotated_generators(row)?.iter().map(|o| Ok(o.commutator(h)?.scale(i))).collect()
}

/// Pauli-algebra coefficients.
pub fn analytic_layers(pair: &HamiltonianPair, spec: &AnsatzSpec, row: &[f64], mu: f64) -> Result<LayerSystem> {
    check_widths(pair, spec)?;
    let qs = q_operators(spec, row, &pair.h_mu(mu))?;
    let l = qs.len();
    let mut b = DVector::zeros(l);
    for (k, q) in qs.iter().enumerate() {
        b[k] = -pair.v.trace_product(q)?.re;
    }
    let mut x = DMatrix::zeros(l, l);
    for r in 0..l {
        for c in r..l {
            let v = qs[r].trace_product(&qs[c])?.re;
            x[(r, c)] = v;
            x[(c, r)] = v;
        }
    }
    Ok(LayerSystem { b, x, count: CircuitCount::default(), x_noise: 0.0 })
}

/// Hadamard-test coefficients (exact or sampled, per `readout`).
pub fn circuit_layers(pair: &HamiltonianPair, spec: &AnsatzSpec, row: &[f64], mu: f64, readout: &Readout) -> Result<LayerSystem> {
    check_widths(pair, spec)?;
    let n = spec.n_qubits();
    let l = spec.n_layers();
    let scale = (1u64 << n) as f64;
    let us = (1..=l).map(|k| spec.partial_unitary(row, k)).collect::<Result<Vec<_>>>()?;
    let vs: Vec<_> = us.iter().map(|u| u.transpose()).collect();
    let gens = spec.generators();
    let v_terms = real_terms(&pair.v);
    let h_terms = real_terms(&pair.h_mu(mu));
    let parity = |p: &PauliString| p.transpose_parity() as f64;

    let b_readout = readout.derive(0);
    let (nv, nh) = (v_terms.len(), h_terms.len());
    let b_tasks: Vec<(usize, usize, usize)> = (0..l)
        .flat_map(|k| (0..nv).flat_map(move |j| (0..nh).map(move |m| (k, j, m))))
        .collect();
    let b_vals: Vec<f64> = b_tasks
        .par_iter()
        .enumerate()
        .map(|(idx, &(k, j, m))| {
            let (sj, vj) = v_terms[j];
            let (sk, hk) = h_terms[m];
            let val = hadamard_test_b(&us[k], &gens[k], &sj, &sk, &b_readout.derive(idx as u64))?;
            Ok(-vj * hk * scale * parity(&sj) * val)
        })
        .collect::<Result<_>>()?;
    let mut b = DVector::zeros(l);
    for (&(k, _, _), v) in b_tasks.iter().zip(&b_vals) {
        b[k] += v;
    }

    // X_{rc} = Σ_{jk} h_j h_k Tr(i[O^c, σ_j] i[O^r, σ_k]), upper triangle r ≤ c.
    let x_readout = readout.derive(1);
    let x_tasks: Vec<(usize, usize, usize, usize)> = (0..l)
        .flat_map(|r| (r..l).flat_map(move |c| (0..nh).flat_map(move |j| (0..nh).map(move |m| (r, c, j, m)))))
        .collect();
    let x_vals: Vec<f64> = x_tasks
        .par_iter()
        .enumerate()
        .map(|(idx, &(r, c, j, m))| {
            let (sj, hj) = h_terms[j];
            let (sk, hk) = h_terms[m];
            let val = hadamard_test_x(&vs[c], &gens[c], &us[r], &gens[r], &sj, &sk, &x_readout.derive(idx as u64))?;
            Ok(-hj * hk * scale * parity(&sj) * parity(&gens[c]) * val)
        })
        .collect::<Result<_>>()?;
    let mut x = DMatrix::zeros(l, l);
    for (&(r, c, _, _), v) in x_tasks.iter().zip(&x_vals) {
        x[(r, c)] += v;
    }
    for r in 0..l {
        for c in 0..r {
            x[(r, c)] = x[(c, r)];
        }
    }

    let x_noise = match readout {
        Readout::Exact => 0.0,
        Readout::Shots(s) => {
            let h_sq: f64 = h_terms.iter().map(|(_, h)| h * h).sum();
            scale * 4.0 * h_sq / (s.shots as f64).sqrt()
        }
    };
    Ok(LayerSystem { b, x, count: CircuitCount { n_b: b_tasks.len(), n_x: x_tasks.len(), n_base: 0 }, x_noise })
}

/// Per-layer coefficients by the chosen strategy at step `t`, `μ = mu`.
pub fn build_layers(pair: &HamiltonianPair, spec: &AnsatzSpec, row: &[f64], mu: f64, t: usize, strategy: &Strategy) -> Result<LayerSystem> {
    match strategy {
        Strategy::Analytic => analytic_layers(pair, spec, row, mu),
        Strategy::CircuitExact | Strategy::CircuitShots { .. } => circuit_layers(pair, spec, row, mu, &strategy.readout(t)),
        Strategy::CheapN2 { direct, .. } => {
            let how = if *direct { cheap_n2::BaseMeasurement::Direct } else { cheap_n2::BaseMeasurement::Ancilla };
            let reg = cheap_n2::build_regression(pair, spec, row, mu, &strategy.readout(t), how)?;
            Ok(reg.layer_system())
        }
    }
}

/// Free-parameter `b`.
pub fn build_b(pair: &HamiltonianPair, spec: &AnsatzSpec, row: &[f64], mu: f64, t: usize, strategy: &Strategy) -> Result<DVector<f64>> {
    Ok(build_layers(pair, spec, row, mu, t, strategy)?.reduce(spec).1)
}

/// Free-parameter `X`.
pub fn build_x(pair: &HamiltonianPair, spec: &AnsatzSpec, row: &[f64], mu: f64, t: usize, strategy: &Strategy) -> Result<DMatrix<f64>> {
    Ok(build_layers(pair, spec, row, mu, t, strategy)?.reduce(spec).0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub beta: DVector<f64>,
    /// `‖Xβ − b‖`.
    pub residual: f64,
    pub rank: usize,
    pub min_eigenvalue: f64,
}

/// Minimum-norm least-squares solution of `Xβ = b` with the default cutoff.
pub fn solve_step(x: &DMatrix<f64>, b: &DVector<f64>) -> Result<Solution> {
    solve_step_with(x, b, DEFAULT_CUTOFF)
}

/// Pseudo-inverse through the symmetric eigendecomposition: eigenvalues at
/// or below `rel_cutoff · max|λ|` (including all negative ones) are dropped.
pub fn solve_step_with(x: &DMatrix<f64>, b: &DVector<f64>, rel_cutoff: f64) -> Result<Solution> {
    if x.nrows() != x.ncols() || x.nrows() != b.len() {
        return Err(Error::SizeMismatch { expected: x.nrows(), found: b.len() });
    }
    if x.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NumericalBreakdown { step: 0, reason: "non-finite entry in X or b".into() });
    }
    let n = b.len();
    if n == 0 {
        return Ok(Solution { beta: DVector::zeros(0), residual: 0.0, rank: 0, min_eigenvalue: 0.0 });
    }
    let sym = (x + x.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = rel_cutoff * top;
    let mut beta = DVector::zeros(n);
    let mut rank = 0;
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > cut && lam > 0.0 {
            let v = eig.eigenvectors.column(k);
            beta += v * (v.dot(b) / lam);
            rank += 1;
        }
    }
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalBreakdown { step: 0, reason: "non-finite solution".into() });
    }
    let residual = (x * &beta - b).norm();
    let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Solution { beta, residual, rank, min_eigenvalue })
}

/// One solved step, as dumped to JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSystem {
    pub t: usize,
    pub mu: f64,
    #[serde(rename = "X")]
    pub x: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub beta: Vec<f64>,
    pub residual: f64,
    pub rank: usize,
    pub min_eigenvalue: f64,
    pub circuit_count: CircuitCount,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl StepSystem {
    pub fn new(t: usize, mu: f64, x: &DMatrix<f64>, b: &DVector<f64>, sol: &Solution, count: CircuitCount) -> Self {
        StepSystem {
            t,
            mu,
            x: (0..x.nrows()).map(|r| x.row(r).iter().copied().collect()).collect(),
            b: b.iter().copied().collect(),
            beta: sol.beta.iter().copied().collect(),
            residual: sol.residual,
            rank: sol.rank,
            min_eigenvalue: sol.min_eigenvalue,
            circuit_count: count,
            warnings: Vec::new(),
        }
    }

    pub fn x_matrix(&self) -> DMatrix<f64> {
        let n = self.x.len();
        DMatrix::from_fn(n, n, |r, c| self.x[r][c])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }
}

/// `‖V‖² − 2βᵀb + βᵀXβ`.
pub fn quadratic_cost(v_norm_sq: f64, x: &DMatrix<f64>, b: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    v_norm_sq - 2.0 * beta.dot(b) + beta.dot(&(x * beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{builtin_ansatz, U0};
    use crate::models::model_random_2q;
    use crate::oracle;
    use crate::simulator::{Circuit, Gate};
    use crate::CMatrix;
    use rand::{Rng, SeedableRng};

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn random_row(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()
    }

    /// Dense `Q^l` straight from the definition.
    fn dense_q(pair: &HamiltonianPair, spec: &AnsatzSpec, row: &[f64], mu: f64) -> Vec<CMatrix> {
        let h = pair.h_mu(mu).to_dense();
        (1..=spec.n_layers())
            .map(|l| oracle::commutator(&spec.rotated_generator_dense(row, l).unwrap(), &h) * Complex64::new(0.0, 1.0))
            .collect()
    }

    #[test]
    fn diagonal_problem_gives_zero_system() {
        let h0 = PauliSum::from_real(2, &[("ZI", 1.0), ("IZ", 0.5)]).unwrap();
        let v = PauliSum::from_real(2, &[("ZZ", 0.3)]).unwrap();
        let pair = HamiltonianPair::custom("diag", h0, v, 1.0, U0::Identity).unwrap();
        let spec = AnsatzSpec::new("z", 2, U0::Identity, vec![ps("ZI"), ps("IZ"), ps("ZZ")], vec![], None).unwrap();
        for strategy in [Strategy::Analytic, Strategy::CircuitExact] {
            let sys = build_layers(&pair, &spec, &[0.0; 3], 0.0, 0, &strategy).unwrap();
            assert!(sys.b.norm() < 1e-12 && sys.x.norm() < 1e-12);
        }
    }

    #[test]
    fn analytic_matches_dense_traces() {
        let pair = model_random_2q(3, 1.0);
        let spec = builtin_ansatz("universal2q15", 2).unwrap();
        let row = random_row(15, 4);
        let mu = 0.4;
        let sys = analytic_layers(&pair, &spec, &row, mu).unwrap();
        let qs = dense_q(&pair, &spec, &row, mu);
        let v = pair.v.to_dense();
        for l in 0..15 {
            let want_b = -(&v * &qs[l]).trace().re;
            assert!((sys.b[l] - want_b).abs() < 1e-10);
            for m in 0..15 {
                let want_x = (&qs[l] * &qs[m]).trace().re;
                assert!((sys.x[(l, m)] - want_x).abs() < 1e-10);
            }
        }
        assert!((&sys.x - sys.x.transpose()).norm() < 1e-9);
    }

    #[test]
    fn first_step_b_against_brute_force() {
        // t = 0, α = 0, B^1 = XI: b = −Tr(V i[XI, H_0]).
        let pair = model_random_2q(11, 1.0);
        let spec = AnsatzSpec::new("x", 2, U0::Identity, vec![ps("XI")], vec![], None).unwrap();
        let b = build_b(&pair, &spec, &[0.0], 0.0, 0, &Strategy::CircuitExact).unwrap();
        let xi = ps("XI").to_dense();
        let h0 = pair.h0.to_dense();
        let want = -(pair.v.to_dense() * oracle::commutator(&xi, &h0) * Complex64::new(0.0, 1.0)).trace().re;
        assert!((b[0] - want).abs() < 1e-10);
        // i[X, Z] = 2Y on qubit 1, so only the YI term of V contributes
        let v_yi = pair.v.coefficient(&ps("YI")).re;
        assert!((want + 4.0 * 2.0 * v_yi).abs() < 1e-10);
    }

    #[test]
    fn analytic_and_circuit_agree_with_odd_generators_and_u0() {
        let pair = model_random_2q(5, 0.8);
        let u0 = Circuit::from_gates(2, vec![Gate::Ry { target: 0, theta: 0.3 }, Gate::Cnot { control: 0, target: 1 }]).unwrap();
        let spec = AnsatzSpec::new(
            "mixed",
            2,
            U0::Circuit(u0),
            vec![ps("YI"), ps("XY"), ps("ZZ"), ps("IY")],
            vec![(0, 3)],
            None,
        )
        .unwrap();
        let row = random_row(spec.n_params(), 12);
        let a = analytic_layers(&pair, &spec, &row, 0.6).unwrap();
        let c = circuit_layers(&pair, &spec, &row, 0.6, &Readout::Exact).unwrap();
        assert!((&a.b - &c.b).amax() < 1e-8, "b differs by {}", (&a.b - &c.b).amax());
        assert!((&a.x - &c.x).amax() < 1e-8, "X differs by {}", (&a.x - &c.x).amax());
        let (xa, ba) = a.reduce(&spec);
        let (xc, bc) = c.reduce(&spec);
        assert!((xa - xc).amax() < 1e-8 && (ba - bc).amax() < 1e-8);
    }

    #[test]
    fn recorded_counts_match_budget() {
        let pair = model_random_2q(2, 1.0);
        let spec = builtin_ansatz("universal2q15", 2).unwrap();
        let sys = circuit_layers(&pair, &spec, &[0.0; 15], 0.5, &Readout::Exact).unwrap();
        assert_eq!(pair.v.len(), 8);
        assert_eq!(pair.h_mu(0.5).len(), 10);
        assert_eq!(sys.count.n_b, 1200);
        assert_eq!(sys.count, circuit_budget(8, 10, 15));
        assert_eq!(circuit_budget(1, 1, 1).n_b, 1);
        assert_eq!(circuit_budget(3, 4, 5).n_x, 16 * 15);
    }

    #[test]
    fn solve_step_examples() {
        let s = solve_step(&DMatrix::zeros(3, 3), &DVector::zeros(3)).unwrap();
        assert_eq!(s.beta, DVector::zeros(3));
        let s = solve_step(&DMatrix::identity(3, 3), &DVector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
        assert!((s.beta[0] - 1.0).abs() < 1e-15 && s.beta.rows(1, 2).norm() < 1e-15);

        // rank-deficient Gram matrix with consistent right-hand side
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::<f64>::from_fn(5, 3, |_, _| rng.random_range(-1.0..1.0));
        let x = &a * a.transpose();
        let b = &x * DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
        let s = solve_step(&x, &b).unwrap();
        let pinv = x.clone().pseudo_inverse(1e-10).unwrap();
        assert!((&s.beta - pinv * &b).norm() < 1e-8);
        assert_eq!(s.rank, 3);
        assert!(s.residual < 1e-10);

        let mut bad = DMatrix::identity(2, 2);
        bad[(0, 1)] = f64::NAN;
        assert!(matches!(solve_step(&bad, &DVector::zeros(2)), Err(Error::NumericalBreakdown { .. })));
    }

    #[test]
    fn solved_beta_lowers_dense_cost() {
        let pair = model_random_2q(8, 1.0);
        let spec = builtin_ansatz("universal2q15", 2).unwrap();
        let row = random_row(15, 2);
        let mu = 0.3;
        let sys = analytic_layers(&pair, &spec, &row, mu).unwrap();
        let (x, b) = sys.reduce(&spec);
        let sol = solve_step(&x, &b).unwrap();
        let c0 = oracle::brute_cost(&pair, &spec, &row, &[0.0; 15], mu).unwrap();
        let c1 = oracle::brute_cost(&pair, &spec, &row, sol.beta.as_slice(), mu).unwrap();
        assert!((c0 - 4.0 * pair.v.coeff_norm_sq()).abs() < 1e-10);
        assert!(c1 < c0);
        assert!((c1 - quadratic_cost(c0, &x, &b, &sol.beta)).abs() < 1e-8);
        // first-order optimality by central differences
        let h = 1e-5;
        let scale = c0.max(1.0);
        let mut grad = 0.0f64;
        for k in 0..15 {
            let mut p = sol.beta.as_slice().to_vec();
            let mut m = p.clone();
            p[k] += h;
            m[k] -= h;
            let g = (oracle::brute_cost(&pair, &spec, &row, &p, mu).unwrap() - oracle::brute_cost(&pair, &spec, &row, &m, mu).unwrap()) / (2.0 * h);
            grad += g * g;
        }
        assert!(grad.sqrt() < 1e-6 * scale, "gradient {}", grad.sqrt());
    }

    #[test]
    fn shot_estimates_are_unbiased() {
        let pair = model_random_2q(4, 1.0);
        let spec = AnsatzSpec::new("two", 2, U0::Identity, vec![ps("XI"), ps("YY")], vec![], None).unwrap();
        let row = [0.4, -0.2];
        let exact = circuit_layers(&pair, &spec, &row, 0.5, &Readout::Exact).unwrap();
        let runs: Vec<LayerSystem> = (0..200)
            .map(|s| circuit_layers(&pair, &spec, &row, 0.5, &Readout::Shots(ShotSampler::new(s, 100))).unwrap())
            .collect();
        for k in 0..2 {
            let vals: Vec<f64> = runs.iter().map(|r| r.b[k]).collect();
            let mean = vals.iter().sum::<f64>() / 200.0;
            let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 199.0).sqrt();
            assert!((mean - exact.b[k]).abs() < 3.0 * sd / 200f64.sqrt() + 1e-12, "b[{k}] mean {mean} vs {}", exact.b[k]);
            let vals: Vec<f64> = runs.iter().map(|r| r.x[(k, 1)]).collect();
            let mean = vals.iter().sum::<f64>() / 200.0;
            let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 199.0).sqrt();
            assert!((mean - exact.x[(k, 1)]).abs() < 3.0 * sd / 200f64.sqrt() + 1e-12);
        }
    }

    #[test]
    fn strategy_parsing_and_json() {
        assert_eq!(Strategy::parse("analytic").unwrap(), Strategy::Analytic);
        assert_eq!(Strategy::parse("circuit-shots:100:7").unwrap(), Strategy::CircuitShots { shots: 100, seed: 7 });
        assert_eq!(Strategy::parse("cheap-n2:100:7").unwrap(), Strategy::CheapN2 { shots: Some(100), seed: 7, direct: false });
        assert!(Strategy::parse("magic").is_err());
        let s: Strategy = serde_json::from_str(r#"{"mode": "circuit-shots", "shots": 100, "seed": 3}"#).unwrap();
        assert_eq!(s, Strategy::CircuitShots { shots: 100, seed: 3 });
        assert!(serde_json::from_str::<Strategy>(r#"{"mode": "analytic", "x": 1}"#).is_err());
        assert!(serde_json::from_str::<Strategy>(r#"{"mode": "analytic", "shots": 1}"#).is_err());
        assert!(serde_json::from_str::<Strategy>(r#"{"mode": "circuit-shots", "shots": 0, "seed": 1}"#).is_err());
        for s in [
            Strategy::Analytic,
            Strategy::CircuitExact,
            Strategy::CircuitShots { shots: 10, seed: 2 },
            Strategy::CheapN2 { shots: None, seed: 0, direct: true },
        ] {
            let back: Strategy = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn step_dump_round_trip() {
        let x = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, -1.0]);
        let sol = solve_step(&x, &b).unwrap();
        let step = StepSystem::new(3, 0.3, &x, &b, &sol, CircuitCount::default());
        let back: StepSystem = serde_json::from_str(&step.to_json()).unwrap();
        assert_eq!(back, step);
        assert_eq!(back.x_matrix(), x);
        assert!(step.to_json().contains("\"X\""));
    }
}
