//! Run configuration files (JSON). Unknown fields are rejected everywhere.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vagt_core::effective::{CorrelationMode, FidelityFrame, LowEnergyProjector};
use vagt_core::estimator::DEFAULT_CUTOFF;
use vagt_core::models::{model_low_energy, model_random_2q, model_spin_chain};
use vagt_core::vagt::ansatz_for;
use vagt_core::{AnsatzSpec, HamiltonianPair, PauliSum, Strategy, VagtConfig, U0};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", deny_unknown_fields)]
pub enum ModelConfig {
    #[serde(rename = "low_energy")]
    LowEnergy { h: f64 },
    #[serde(rename = "spin_chain")]
    SpinChain { n: usize, h: f64 },
    #[serde(rename = "random_2q")]
    Random2q { seed: u64 },
    /// Real Pauli coefficients, e.g. `{"ZI": 1.0, "IZ": 1.0}`. `h0` must be
    /// diagonal in the computational basis.
    #[serde(rename = "custom")]
    Custom { h0: BTreeMap<String, f64>, v: BTreeMap<String, f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnsatzConfig {
    Builtin(String),
    Inline(AnsatzSpec),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Output {
    HtildeMatrix,
    EnergyLevels,
    Heff,
    Fidelities,
    Correlations,
    StepDumps,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectiveConfig {
    /// `(qubit, bit)` pairs fixing `|π>`; the other qubits are effective.
    pub pinned: Vec<(usize, bool)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FidelityConfig {
    pub states: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub frame: FidelityFrame,
}

impl Default for FidelityConfig {
    fn default() -> Self {
        FidelityConfig { states: 20, t_min: 1.0, t_max: 1000.0, points: 50, frame: FidelityFrame::Lab }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelationConfig {
    pub t_max: f64,
    pub points: usize,
    pub mode: CorrelationMode,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        CorrelationConfig { t_max: 10.0, points: 101, mode: CorrelationMode::Full }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Evenly spaced `μ` from 0 to `λ`, used when `mu` is absent.
    pub points: usize,
    /// Explicit strictly increasing grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { points: 51, mu: None }
    }
}

fn default_cutoff() -> f64 {
    DEFAULT_CUTOFF
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub lambda: f64,
    pub ansatz: AnsatzConfig,
    pub steps: usize,
    pub strategy: Strategy,
    /// Relative eigenvalue cutoff of the step solver.
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    /// Seeds the random initial states; `--seed` also replaces the shot seed.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub outputs: BTreeSet<Output>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effective: Option<EffectiveConfig>,
    #[serde(default)]
    pub fidelity: FidelityConfig,
    #[serde(default)]
    pub correlation: CorrelationConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Apply command-line overrides, then re-validate.
    pub fn with_overrides(mut self, seed: Option<u64>, strategy: Option<&str>, out: Option<&Path>) -> Result<Self> {
        if let Some(s) = strategy {
            self.strategy = Strategy::parse(s).map_err(|e| CliError::Config(e.to_string()))?;
        }
        if let Some(seed) = seed {
            self.seed = seed;
            self.strategy = self.strategy.with_seed(seed);
        }
        if let Some(out) = out {
            self.out_dir = Some(out.to_path_buf());
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !self.lambda.is_finite() {
            return bad(format!("lambda must be finite, got {}", self.lambda));
        }
        if self.steps == 0 {
            return bad("steps must be positive".into());
        }
        if !(self.cutoff.is_finite() && self.cutoff > 0.0 && self.cutoff < 1.0) {
            return bad(format!("cutoff must lie in (0, 1), got {}", self.cutoff));
        }
        let needs_projector = self.outputs.contains(&Output::Heff) || self.outputs.contains(&Output::Fidelities);
        if needs_projector && self.effective.is_none() {
            return bad("outputs 'heff' and 'fidelities' need an 'effective' section".into());
        }
        let f = &self.fidelity;
        if f.states == 0 || f.points == 0 || !(f.t_min > 0.0 && f.t_max >= f.t_min && f.t_max.is_finite()) {
            return bad("fidelity needs states > 0, points > 0 and 0 < t_min <= t_max".into());
        }
        let c = &self.correlation;
        if c.points == 0 || !(c.t_max >= 0.0 && c.t_max.is_finite()) {
            return bad("correlation needs points > 0 and a finite t_max >= 0".into());
        }
        self.mu_grid()?;
        Ok(())
    }

    /// The sweep grid; must be finite and strictly increasing.
    pub fn mu_grid(&self) -> Result<Vec<f64>> {
        let grid = match &self.sweep.mu {
            Some(g) => g.clone(),
            None if self.sweep.points == 0 => return Err(CliError::Config("sweep needs at least one point".into())),
            None if self.sweep.points == 1 => vec![0.0],
            None => {
                let n = self.sweep.points;
                (0..n).map(|k| self.lambda * k as f64 / (n - 1) as f64).collect()
            }
        };
        if grid.is_empty() || grid.iter().any(|m| !m.is_finite()) {
            return Err(CliError::Config("sweep grid must be non-empty and finite".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config("sweep grid must be strictly increasing".into()));
        }
        Ok(grid)
    }

    pub fn pair(&self) -> Result<HamiltonianPair> {
        Ok(match &self.model {
            ModelConfig::LowEnergy { h } => model_low_energy(*h, self.lambda),
            ModelConfig::SpinChain { n, h } => model_spin_chain(*n, *h, self.lambda)?,
            ModelConfig::Random2q { seed } => model_random_2q(*seed, self.lambda),
            ModelConfig::Custom { h0, v } => {
                let h0 = real_sum(h0, "h0")?;
                let v = real_sum(v, "v")?;
                let dense = h0.to_dense();
                let off_diagonal = (0..dense.nrows()).any(|r| (0..dense.ncols()).any(|c| r != c && dense[(r, c)].norm() > 0.0));
                if off_diagonal {
                    return Err(CliError::Config("custom h0 must be diagonal in the computational basis".into()));
                }
                HamiltonianPair::custom("custom", h0, v, self.lambda, U0::Identity)?
            }
        })
    }

    pub fn ansatz(&self, pair: &HamiltonianPair) -> Result<AnsatzSpec> {
        match &self.ansatz {
            AnsatzConfig::Builtin(name) => Ok(ansatz_for(pair, name)?),
            AnsatzConfig::Inline(spec) => Ok(spec.clone()),
        }
    }

    pub fn vagt_config(&self) -> VagtConfig {
        let mut cfg = VagtConfig::new(self.steps, self.strategy);
        cfg.cutoff = self.cutoff;
        cfg.keep_systems = self.outputs.contains(&Output::StepDumps);
        cfg
    }

    pub fn projector(&self, n_qubits: usize) -> Result<Option<LowEnergyProjector>> {
        self.effective.as_ref().map(|e| LowEnergyProjector::new(n_qubits, &e.pinned)).transpose().map_err(CliError::from)
    }
}

fn real_sum(terms: &BTreeMap<String, f64>, what: &str) -> Result<PauliSum> {
    let width = terms.keys().next().map(|k| k.len()).ok_or_else(|| CliError::Config(format!("{what} has no terms")))?;
    let list: Vec<(&str, f64)> = terms.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    PauliSum::from_real(width, &list).map_err(|e| CliError::Config(format!("{what}: {e}")))
}
