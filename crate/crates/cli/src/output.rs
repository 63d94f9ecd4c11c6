//! Artifact writers. Floats use the shortest round-trip form so identical
//! runs produce identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use vagt_core::effective::{Aggregate, EffectiveHamiltonian};
use vagt_core::estimator::StepSystem;
use vagt_core::{CMatrix, VagtResult};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(CliError::io(path))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io { path: path.to_path_buf(), source },
        other => CliError::Config(format!("{}: {other:?}", path.display())),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Config(e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(CliError::io(path))
}

/// `result.json`: the resolved configuration followed by the run itself.
/// Per-step systems are left out when they go to `steps.jsonl`.
pub fn write_result(path: &Path, config: &RunConfig, result: &VagtResult) -> Result<()> {
    let mut body = serde_json::to_value(result).map_err(|e| CliError::Config(e.to_string()))?;
    let obj = body.as_object_mut().expect("result serializes to an object");
    obj.remove("systems");
    let mut out = serde_json::Map::new();
    out.insert("run_config".into(), serde_json::to_value(config).expect("config serializes"));
    out.append(obj);
    write_json(path, &Value::Object(out))
}

pub fn write_htilde(path: &Path, m: &CMatrix) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["row", "col", "re", "im"])?;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            w.write_record([r.to_string(), c.to_string(), z.re.to_string(), z.im.to_string()])?;
        }
    }
    w.flush().map_err(CliError::io(path))
}

pub fn write_levels(path: &Path, mus: &[f64], levels: &[Vec<f64>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let width = levels.first().map_or(0, Vec::len);
    let header: Vec<String> = std::iter::once("mu".to_string()).chain((1..=width).map(|k| format!("e_{k}"))).collect();
    w.write_record(&header)?;
    for (mu, row) in mus.iter().zip(levels) {
        w.write_record(std::iter::once(mu).chain(row).map(f64::to_string))?;
    }
    w.flush().map_err(CliError::io(path))
}

#[derive(Serialize)]
struct HeffDoc<'a> {
    pinned: &'a [(usize, bool)],
    n_eff: usize,
    op: &'a vagt_core::PauliSum,
    eigenvalues: Vec<f64>,
}

pub fn write_heff(path: &Path, heff: &EffectiveHamiltonian, pinned: &[(usize, bool)]) -> Result<()> {
    let doc = HeffDoc { pinned, n_eff: heff.n_eff, op: &heff.op, eigenvalues: heff.eigenvalues()? };
    write_json(path, &doc)
}

pub fn write_aggregates(path: &Path, times: &[f64], series: &[Aggregate]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "mean", "ci_low", "ci_high"])?;
    for (t, a) in times.iter().zip(series) {
        w.write_record([t, &a.mean, &a.ci_low, &a.ci_high].map(f64::to_string))?;
    }
    w.flush().map_err(CliError::io(path))
}

/// Columns `t, C_x, C_z` and the exact reference series.
pub fn write_correlations(path: &Path, times: &[f64], cols: [&[f64]; 4]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "C_x", "C_z", "exact_x", "exact_z"])?;
    for (k, t) in times.iter().enumerate() {
        w.write_record([*t, cols[0][k], cols[1][k], cols[2][k], cols[3][k]].map(|v| v.to_string()))?;
    }
    w.flush().map_err(CliError::io(path))
}

pub fn write_steps(path: &Path, systems: &[StepSystem]) -> Result<()> {
    let mut w = create(path)?;
    for s in systems {
        writeln!(w, "{}", s.to_json()).map_err(CliError::io(path))?;
    }
    w.flush().map_err(CliError::io(path))
}
