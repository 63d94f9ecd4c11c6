//! Compact invariant suite behind `vagt validate`.

use std::io::Write;

use num_complex::Complex64;
use vagt_core::estimator::{build_layers, Strategy};
use vagt_core::models::model_random_2q;
use vagt_core::oracle;
use vagt_core::vagt::ansatz_for;
use vagt_core::{run, PauliString, PauliSum, VagtConfig};

use crate::error::Result;

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, worst: f64, tol: f64) -> Check {
    Check { name, pass: worst <= tol, detail: format!("worst {worst:.2e}, tolerance {tol:.0e}") }
}

fn parameter_row(n: usize, seed: u64) -> Vec<f64> {
    (0..n).map(|k| (0.7 * (k as f64 + 1.0) + seed as f64).sin()).collect()
}

fn pauli_products() -> Result<Check> {
    let mut worst = 0.0f64;
    for a in PauliString::all(2) {
        for b in PauliString::all(2) {
            let (phase, p) = a.mul(&b)?;
            let dense = a.to_dense() * b.to_dense();
            let diff = dense - p.to_dense() * phase;
            worst = worst.max(diff.iter().map(|z| z.norm()).fold(0.0, f64::max));
            let tr = a.to_dense().adjoint() * b.to_dense();
            let expected = if a == b { 4.0 } else { 0.0 };
            worst = worst.max((tr.trace() - Complex64::new(expected, 0.0)).norm());
        }
    }
    Ok(check("pauli products and trace orthogonality", worst, 1e-12))
}

fn commutators(seed: u64) -> Result<Check> {
    let mut worst = 0.0f64;
    for k in 0..5 {
        let pair = model_random_2q(seed.wrapping_add(k), 1.0);
        let (a, b) = (&pair.h0, &pair.v);
        let c: PauliSum = a.commutator(b)?;
        let (da, db) = (a.to_dense(), b.to_dense());
        let diff = c.to_dense() - (&da * &db - &db * &da);
        worst = worst.max(diff.iter().map(|z| z.norm()).fold(0.0, f64::max));
        let back = PauliSum::decompose(&pair.h_lambda().to_dense())?;
        let diff = back.to_dense() - pair.h_lambda().to_dense();
        worst = worst.max(diff.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    Ok(check("commutators and decomposition", worst, 1e-12))
}

fn estimators(seed: u64) -> Result<Vec<Check>> {
    let (mut circuit, mut cheap) = (0.0f64, 0.0f64);
    for k in 0..5 {
        let pair = model_random_2q(seed.wrapping_add(k), 1.0);
        let spec = ansatz_for(&pair, "universal2q15")?;
        let row = parameter_row(spec.n_params(), seed.wrapping_add(k));
        let exact = build_layers(&pair, &spec, &row, 0.4, 0, &Strategy::Analytic)?.reduce(&spec);
        for (s, worst) in [
            (Strategy::CircuitExact, &mut circuit),
            (Strategy::CheapN2 { shots: None, seed: 0, direct: false }, &mut cheap),
        ] {
            let (x, b) = build_layers(&pair, &spec, &row, 0.4, 0, &s)?.reduce(&spec);
            *worst = worst.max((&x - &exact.0).amax()).max((&b - &exact.1).amax());
        }
    }
    Ok(vec![
        check("analytic vs circuit-exact b and X", circuit, 1e-8),
        check("analytic vs cheap-n2 b and X", cheap, 1e-8),
    ])
}

fn isospectral(seed: u64) -> Result<Check> {
    let pair = model_random_2q(seed, 1.0);
    let spec = ansatz_for(&pair, "universal2q15")?;
    let result = run(&pair, &spec, &VagtConfig::new(10, Strategy::Analytic))?;
    let rotated = oracle::eigenvalues(&result.h_tilde_dense)?;
    let worst = rotated.iter().zip(&result.eigenvalues).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(check("rotated Hamiltonian is isospectral", worst, 1e-8))
}

fn endpoints(seed: u64) -> Result<Check> {
    let pair = model_random_2q(seed, 1.0);
    let levels = pair.energy_levels(&[0.0])?;
    let worst = levels[0].iter().zip([-2.0, 0.0, 0.0, 2.0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(check("unperturbed levels are (-2, 0, 0, 2)", worst, 1e-12))
}

/// Run every check and print one line each; returns whether all passed.
pub fn run_suite(seed: u64, out: &mut impl Write) -> Result<bool> {
    let mut checks = vec![pauli_products()?, commutators(seed)?];
    checks.extend(estimators(seed)?);
    checks.push(isospectral(seed)?);
    checks.push(endpoints(seed)?);
    for c in &checks {
        let _ = writeln!(out, "{}: {} ({})", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
    }
    Ok(checks.iter().all(|c| c.pass))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let mut buf = Vec::new();
        assert!(run_suite(0, &mut buf).unwrap());
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(!text.contains("FAIL"));
    }
}
