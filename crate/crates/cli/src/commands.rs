use std::path::{Path, PathBuf};

use vagt_core::effective::{
    correlation, exact_correlation, extract_heff, linear_grid, log_grid, random_states, run_fidelities, Axis,
};
use vagt_core::{run, VagtResult};

use crate::config::{Output, RunConfig};
use crate::error::{CliError, Result};
use crate::output;

/// Used when neither `--out` nor `out_dir` is given.
pub const DEFAULT_OUT_DIR: &str = "vagt-out";

fn out_dir(config: &RunConfig) -> Result<PathBuf> {
    let dir = config.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    std::fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
    Ok(dir)
}

/// Files written by one command, relative paths included as given.
#[derive(Debug, Default)]
pub struct Written(pub Vec<PathBuf>);

impl Written {
    fn push(&mut self, p: PathBuf) -> &Path {
        self.0.push(p);
        self.0.last().expect("just pushed")
    }
}

/// Run the flow and write `result.json` plus the requested outputs.
pub fn cmd_run(config: &RunConfig) -> Result<Written> {
    let dir = out_dir(config)?;
    let pair = config.pair()?;
    let spec = config.ansatz(&pair)?;
    let result = run(&pair, &spec, &config.vagt_config())?;
    let mut written = Written::default();

    output::write_result(written.push(dir.join("result.json")), config, &result)?;
    if config.outputs.contains(&Output::HtildeMatrix) {
        output::write_htilde(written.push(dir.join("htilde.csv")), &result.h_tilde_dense)?;
    }
    if config.outputs.contains(&Output::EnergyLevels) {
        written.0.extend(sweep_into(config, &dir)?.0);
    }
    if config.outputs.contains(&Output::StepDumps) {
        output::write_steps(written.push(dir.join("steps.jsonl")), &result.systems)?;
    }
    if config.outputs.contains(&Output::Heff) || config.outputs.contains(&Output::Fidelities) {
        effective_outputs(config, &result, &dir, &mut written)?;
    }
    if config.outputs.contains(&Output::Correlations) {
        correlation_outputs(config, &result, &dir, &mut written)?;
    }
    Ok(written)
}

fn effective_outputs(config: &RunConfig, result: &VagtResult, dir: &Path, written: &mut Written) -> Result<()> {
    let pinned = &config.effective.as_ref().expect("validated").pinned;
    let projector = config.projector(result.pair.n_qubits)?.expect("validated");
    let heff = extract_heff(result, &projector, &config.strategy)?;
    if config.outputs.contains(&Output::Heff) {
        output::write_heff(written.push(dir.join("heff.json")), &heff, pinned)?;
    }
    if config.outputs.contains(&Output::Fidelities) {
        let f = &config.fidelity;
        let states = random_states(1 << projector.n_eff(), f.states, config.seed);
        let times = log_grid(f.t_min, f.t_max, f.points);
        let series = run_fidelities(result, &heff, &projector, &states, &times, f.frame)?;
        output::write_aggregates(written.push(dir.join("fidelity_f1.csv")), &times, &series.f1_summary())?;
        output::write_aggregates(written.push(dir.join("fidelity_f2.csv")), &times, &series.f2_summary())?;
    }
    Ok(())
}

fn correlation_outputs(config: &RunConfig, result: &VagtResult, dir: &Path, written: &mut Written) -> Result<()> {
    let c = &config.correlation;
    let times = linear_grid(0.0, c.t_max, c.points);
    let h = result.pair.h_lambda();
    let cx = correlation(result, Axis::X, &times, c.mode)?;
    let cz = correlation(result, Axis::Z, &times, c.mode)?;
    let ex = exact_correlation(&h, Axis::X, &times)?;
    let ez = exact_correlation(&h, Axis::Z, &times)?;
    output::write_correlations(written.push(dir.join("correlation.csv")), &times, [&cx, &cz, &ex, &ez])
}

fn sweep_into(config: &RunConfig, dir: &Path) -> Result<Written> {
    let grid = config.mu_grid()?;
    let levels = config.pair()?.energy_levels(&grid)?;
    let path = dir.join("energy_levels.csv");
    output::write_levels(&path, &grid, &levels)?;
    Ok(Written(vec![path]))
}

/// Dense eigenvalues of `H_μ` along the sweep grid; no flow is run.
pub fn cmd_sweep(config: &RunConfig) -> Result<Written> {
    sweep_into(config, &out_dir(config)?)
}

/// `run` with `heff` and `fidelities` added to the outputs.
pub fn cmd_effective(config: &RunConfig) -> Result<Written> {
    if config.effective.is_none() {
        return Err(CliError::Config("the effective command needs an 'effective' section".into()));
    }
    let mut config = config.clone();
    config.outputs.extend([Output::Heff, Output::Fidelities]);
    cmd_run(&config)
}

/// `run` with `correlations` added to the outputs.
pub fn cmd_correlate(config: &RunConfig) -> Result<Written> {
    let mut config = config.clone();
    config.outputs.insert(Output::Correlations);
    cmd_run(&config)
}
