//! The outer driver: march `μ` from 0 to `λ`, solving one linear system per step.

use std::time::{Duration, Instant};

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ansatz::{builtin_ansatz, AnsatzSpec, ParamTable, U0};
use crate::cheap_n2::{self, BaseMeasurement};
use crate::error::{Error, Result};
use crate::estimator::{build_layers, quadratic_cost, solve_step_with, CircuitCount, Solution, StepSystem, Strategy, DEFAULT_CUTOFF};
use crate::models::HamiltonianPair;
use crate::oracle;
use crate::pauli::PauliSum;
use crate::simulator::Circuit;
use crate::CMatrix;

fn default_cutoff() -> f64 {
    DEFAULT_CUTOFF
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VagtConfig {
    /// `T`, the number of `μ` steps.
    pub steps: usize,
    pub strategy: Strategy,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    /// Keep every step's `X`, `b` and `β`.
    #[serde(default)]
    pub keep_systems: bool,
    /// Record `H̃` at every `k`-th step (and the last).
    #[serde(default)]
    pub keep_htilde_every: Option<usize>,
}

impl VagtConfig {
    pub fn new(steps: usize, strategy: Strategy) -> Self {
        VagtConfig { steps, strategy, cutoff: DEFAULT_CUTOFF, keep_systems: false, keep_htilde_every: None }
    }
}

/// Per-step diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub mu: f64,
    /// Cost at `β = 0`, i.e. `‖V‖²`.
    pub cost_zero: f64,
    /// Cost at the solved `β`.
    pub cost_solved: f64,
    pub residual: f64,
    pub rank: usize,
    pub min_eigenvalue: f64,
    pub circuit_count: CircuitCount,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HTildeSnapshot {
    pub t: usize,
    pub mu: f64,
    pub h_tilde: PauliSum,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VagtResult {
    pub pair: HamiltonianPair,
    pub ansatz: AnsatzSpec,
    pub config: VagtConfig,
    pub params: ParamTable,
    /// `U† H_λ U`.
    pub h_tilde: PauliSum,
    #[serde(with = "crate::simulator::matrix_serde")]
    pub h_tilde_dense: CMatrix,
    /// Ascending eigenvalues of `H_λ` from the dense oracle.
    pub eigenvalues: Vec<f64>,
    /// Real diagonal of `H̃`, the eigenvalue estimates.
    pub diagonal: Vec<f64>,
    pub steps: Vec<StepRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub systems: Vec<StepSystem>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub h_tilde_steps: Vec<HTildeSnapshot>,
    pub total_count: CircuitCount,
    /// Final circuit; absent when `U_0` is only known as a matrix.
    #[serde(skip)]
    pub unitary: Option<Circuit>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl VagtResult {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Dense `U` at the last row.
    pub fn unitary_matrix(&self) -> Result<CMatrix> {
        self.ansatz.full_matrix(self.params.last())
    }

    /// `‖H̃ − diag H̃‖_F`.
    pub fn off_diagonal_norm(&self) -> f64 {
        off_diagonal_norm(&self.h_tilde_dense)
    }

    /// Diagonal entries sorted ascending.
    pub fn sorted_diagonal(&self) -> Vec<f64> {
        let mut d = self.diagonal.clone();
        d.sort_by(f64::total_cmp);
        d
    }
}

/// Builtin ansatz with the pair's `U_0` installed.
pub fn ansatz_for(pair: &HamiltonianPair, name: &str) -> Result<AnsatzSpec> {
    let spec = builtin_ansatz(name, pair.n_qubits)?;
    if matches!(pair.u0, U0::Identity) {
        Ok(spec)
    } else {
        spec.with_u0(pair.u0.clone())
    }
}

fn with_step(e: Error, t: usize) -> Error {
    match e {
        Error::NumericalBreakdown { reason, .. } => Error::NumericalBreakdown { step: t, reason },
        other => other,
    }
}

struct Solved {
    x: nalgebra::DMatrix<f64>,
    b: DVector<f64>,
    sol: Solution,
    count: CircuitCount,
    x_noise: f64,
}

fn solve_at(pair: &HamiltonianPair, spec: &AnsatzSpec, row: &[f64], mu: f64, t: usize, config: &VagtConfig) -> Result<Solved> {
    match config.strategy {
        Strategy::CheapN2 { direct, .. } => {
            let how = if direct { BaseMeasurement::Direct } else { BaseMeasurement::Ancilla };
            let reg = cheap_n2::build_regression(pair, spec, row, mu, &config.strategy.readout(t), how)?;
            let sol = cheap_n2::solve_regression_with(&reg, config.cutoff)?;
            let (x, b) = reg.normal_equations();
            Ok(Solved { x, b, sol, count: reg.count, x_noise: 0.0 })
        }
        _ => {
            let layers = build_layers(pair, spec, row, mu, t, &config.strategy)?;
            let (x, b) = layers.reduce(spec);
            let sol = solve_step_with(&x, &b, config.cutoff)?;
            Ok(Solved { x, b, sol, count: layers.count, x_noise: layers.x_noise })
        }
    }
}

/// Dense `U† H U`.
pub fn rotate(h: &PauliSum, u: &CMatrix) -> CMatrix {
    u.adjoint() * h.to_dense() * u
}

/// Run the full schedule from `α_0 = 0` to `μ = λ`.
pub fn run(pair: &HamiltonianPair, spec: &AnsatzSpec, config: &VagtConfig) -> Result<VagtResult> {
    let started = Instant::now();
    if spec.n_qubits() != pair.n_qubits {
        return Err(Error::SizeMismatch { expected: pair.n_qubits, found: spec.n_qubits() });
    }
    if !(config.cutoff.is_finite() && config.cutoff >= 0.0) {
        return Err(Error::Invalid(format!("cutoff must be a non-negative number, got {}", config.cutoff)));
    }
    if config.keep_htilde_every == Some(0) {
        return Err(Error::Invalid("keep_htilde_every must be positive".into()));
    }
    let mut params = ParamTable::new(config.steps, spec.n_params(), pair.lambda)?;
    assert!(params.row(0).iter().all(|a| *a == 0.0));
    let v_norm_sq = pair.v.coeff_norm_sq() * (1u64 << pair.n_qubits) as f64;
    let h_lambda = pair.h_lambda();

    let mut steps = Vec::with_capacity(config.steps);
    let mut systems = Vec::new();
    let mut snapshots = Vec::new();
    let mut total = CircuitCount::default();
    let snapshot = |params: &ParamTable, t: usize| -> Result<HTildeSnapshot> {
        let u = spec.full_matrix(params.row(t))?;
        let mu = params.mu(t);
        Ok(HTildeSnapshot { t, mu, h_tilde: PauliSum::decompose(&rotate(&pair.h_mu(mu), &u))? })
    };

    for t in 0..config.steps {
        let mu = params.mu(t);
        if let Some(k) = config.keep_htilde_every {
            if t % k == 0 {
                snapshots.push(snapshot(&params, t)?);
            }
        }
        let s = solve_at(pair, spec, params.row(t), mu, t, config).map_err(|e| with_step(e, t))?;
        let mut warnings = Vec::new();
        let diag_scale = s.x.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if s.sol.min_eigenvalue < -(10.0 * s.x_noise + 1e-9 * diag_scale) {
            warnings.push(format!("X has eigenvalue {:.3e} below the noise floor", s.sol.min_eigenvalue));
        }
        let cost_solved = quadratic_cost(v_norm_sq, &s.x, &s.b, &s.sol.beta);
        let beta: Vec<f64> = s.sol.beta.iter().copied().collect();
        params.advance(t, &beta);
        if params.row(t + 1).iter().any(|a| !a.is_finite()) {
            return Err(Error::NumericalBreakdown { step: t, reason: "non-finite parameters".into() });
        }
        total.add(&s.count);
        if config.keep_systems {
            let mut sys = StepSystem::new(t, mu, &s.x, &s.b, &s.sol, s.count);
            sys.warnings = warnings.clone();
            systems.push(sys);
        }
        steps.push(StepRecord {
            t,
            mu,
            cost_zero: v_norm_sq,
            cost_solved,
            residual: s.sol.residual,
            rank: s.sol.rank,
            min_eigenvalue: s.sol.min_eigenvalue,
            circuit_count: s.count,
            warnings,
        });
    }

    let u = spec.full_matrix(params.last())?;
    let h_tilde_dense = rotate(&h_lambda, &u);
    let h_tilde = PauliSum::decompose(&h_tilde_dense)?;
    if config.keep_htilde_every.is_some() {
        snapshots.push(HTildeSnapshot { t: config.steps, mu: pair.lambda, h_tilde: h_tilde.clone() });
    }
    let eigenvalues = oracle::eigenvalues(&h_lambda.to_dense())?;
    let diagonal = h_tilde_dense.diagonal().iter().map(|z| z.re).collect();
    let unitary = spec.full_unitary(params.last()).ok();
    Ok(VagtResult {
        pair: pair.clone(),
        ansatz: spec.clone(),
        config: config.clone(),
        params,
        h_tilde,
        h_tilde_dense,
        eigenvalues,
        diagonal,
        steps,
        systems,
        h_tilde_steps: snapshots,
        total_count: total,
        unitary,
        elapsed: started.elapsed(),
    })
}

fn check_projector(p: &CMatrix) -> Result<()> {
    if p.nrows() != p.ncols() {
        return Err(Error::BadDimension(p.nrows().max(p.ncols())));
    }
    let dev = (p * p - p).norm().max((p - p.adjoint()).norm());
    if dev > 1e-12 * (1.0 + p.norm()) {
        return Err(Error::NotAProjector(dev));
    }
    Ok(())
}

/// `‖P H (𝟙 − P)‖_F`.
pub fn off_block_residual(h: &CMatrix, p: &CMatrix) -> Result<f64> {
    check_projector(p)?;
    if p.nrows() != h.nrows() || h.nrows() != h.ncols() {
        return Err(Error::SizeMismatch { expected: h.nrows(), found: p.nrows() });
    }
    let q = CMatrix::identity(p.nrows(), p.nrows()) - p;
    Ok((p * h * q).norm())
}

/// `‖H − diag H‖_F`, the residual when every level is its own block.
pub fn off_diagonal_norm(h: &CMatrix) -> f64 {
    let mut s = 0.0;
    for r in 0..h.nrows() {
        for c in 0..h.ncols() {
            if r != c {
                s += h[(r, c)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Frobenius weight of entries whose row and column carry different labels.
pub fn inter_block_norm(h: &CMatrix, labels: &[i64]) -> Result<f64> {
    if labels.len() != h.nrows() {
        return Err(Error::SizeMismatch { expected: h.nrows(), found: labels.len() });
    }
    let mut s = 0.0;
    for r in 0..h.nrows() {
        for c in 0..h.ncols() {
            if labels[r] != labels[c] {
                s += h[(r, c)].norm_sqr();
            }
        }
    }
    Ok(s.sqrt())
}

/// `Σ_i σ^z_i` eigenvalue of each computational basis index.
pub fn magnetization_labels(n: usize) -> Vec<i64> {
    (0..1usize << n).map(|i| n as i64 - 2 * i.count_ones() as i64).collect()
}

/// `A_{μ_t} ≈ Σ_ℓ (α^ℓ_{t+1} − α^ℓ_t)/δμ · O^ℓ_t`.
pub fn gauge_potential(params: &ParamTable, spec: &AnsatzSpec, t: usize) -> Result<PauliSum> {
    if t >= params.steps() {
        return Err(Error::LayerOutOfRange { index: t, max: params.steps() - 1 });
    }
    let n = spec.n_qubits();
    if params.delta_mu == 0.0 {
        return Ok(PauliSum::zero(n));
    }
    let diff: Vec<f64> = params.row(t + 1).iter().zip(params.row(t)).map(|(a, b)| (a - b) / params.delta_mu).collect();
    let rates = spec.expand(&diff)?;
    let ops = spec.rotated_generators(params.row(t))?;
    let mut a = PauliSum::zero(n);
    for (rate, o) in rates.iter().zip(ops) {
        if *rate != 0.0 {
            a = a.add(&o.scale(Complex64::new(*rate, 0.0)))?;
        }
    }
    Ok(a)
}
