//! Built-in verification suite behind `chlab check`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::potentials::{self, Parameters, PotentialSpec};
use crate::solver::{self, next_v_mean, SchemeConfig, State, StepEvent};
use crate::spectral::{Grid, ScalarField};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn result(suite: &'static str, name: &str, value: f64, tolerance: f64) -> CheckResult {
    CheckResult {
        suite,
        name: name.to_string(),
        passed: value <= tolerance,
        detail: format!("{value:.3e} <= {tolerance:.0e}"),
    }
}

fn failure(suite: &'static str, name: &str, err: impl std::fmt::Display) -> CheckResult {
    CheckResult { suite, name: name.to_string(), passed: false, detail: err.to_string() }
}

fn random_field(grid: &Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    ScalarField::new(grid, (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("finite")
}

fn spectral_suite() -> Vec<CheckResult> {
    const SUITE: &str = "spectral";
    let grid = Grid::new_2d([24, 16], [1.0, 1.5]).expect("valid grid");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut inverse, mut round_trip, mut adjoint) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let f = random_field(&grid, &mut rng);
        let g = random_field(&grid, &mut rng);
        let back = f.laplacian().map(|x| -x).inverse_laplacian_meanzero().expect("mean-free");
        let fluct = f.fluctuation();
        inverse = inverse.max((&back - &fluct).max_abs() / fluct.max_abs());
        let again = f.to_spectral().from_spectral();
        round_trip = round_trip.max((&again - &f).max_abs() / f.max_abs());
        let lhs = f.laplacian().inner(&g).expect("same grid");
        let rhs = f.inner(&g.laplacian()).expect("same grid");
        adjoint = adjoint.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0));
    }
    vec![
        result(SUITE, "inverse of -Lap", inverse, 1e-12),
        result(SUITE, "transform round trip", round_trip, 1e-13),
        result(SUITE, "Lap self-adjoint", adjoint, 1e-12),
    ]
}

fn potential_suite() -> Vec<CheckResult> {
    const SUITE: &str = "potentials";
    let params = Parameters {
        theta_u: 0.4,
        theta_v: 0.7,
        coupling_a: 0.3,
        coupling_b: -0.2,
        coupling_c: 0.15,
        ..Parameters::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let central = |f: &dyn Fn(f64) -> f64, x: f64, h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
    let mut out = Vec::new();
    for (label, spec) in [
        ("Flory-Huggins", PotentialSpec::flory_huggins(params.clone())),
        ("cutoff", PotentialSpec::cutoff(params.clone(), 0.1).expect("valid delta")),
    ] {
        let (mut first, mut second) = (0.0f64, 0.0f64);
        for _ in 0..20 {
            let u = rng.gen_range(-0.95..0.95);
            let v = rng.gen_range(-0.95..0.95);
            let f = |x: f64, y: f64| potentials::f_value(x, y, &spec).expect("interior");
            let du = potentials::f_du(u, v, &spec).expect("interior");
            let dv = potentials::f_dv(u, v, &spec).expect("interior");
            first = first.max(rel(du, central(&|x| f(x, v), u, 1e-6)));
            first = first.max(rel(dv, central(&|y| f(u, y), v, 1e-6)));
            let (fuu, fuv, fvv) = potentials::f_second(u, v, &spec).expect("interior");
            let fu = |x: f64, y: f64| potentials::f_du(x, y, &spec).expect("interior");
            let fv = |x: f64, y: f64| potentials::f_dv(x, y, &spec).expect("interior");
            second = second.max(rel(fuu, central(&|x| fu(x, v), u, 1e-6)));
            second = second.max(rel(fuv, central(&|y| fu(u, y), v, 1e-6)));
            second = second.max(rel(fvv, central(&|y| fv(u, y), v, 1e-6)));
        }
        out.push(result(SUITE, &format!("{label} gradient"), first, 1e-6));
        out.push(result(SUITE, &format!("{label} Hessian"), second, 1e-5));
    }
    out
}

/// A constant state stays constant; `u` keeps its value and `v` follows the
/// scalar mean recursion.
fn scalar_reduction_suite() -> Vec<CheckResult> {
    const SUITE: &str = "scalar step";
    let grid = Grid::new_2d([16, 16], [1.0, 1.0]).expect("valid grid");
    let params = Parameters { sigma: 2.0, c: -0.3, coupling_a: 0.2, ..Parameters::default() };
    let spec = PotentialSpec::flory_huggins(params.clone());
    let cfg = SchemeConfig { tau: 0.01, ..SchemeConfig::default() };
    let (mut state, mut expected) = (
        State::new(0.0, ScalarField::constant(&grid, 0.2), ScalarField::constant(&grid, 0.5)).expect("interior"),
        0.5,
    );
    let mut err = 0.0f64;
    for _ in 0..10 {
        match solver::step(&state, &cfg, &spec) {
            Ok((next, _)) => state = next,
            Err(e) => return vec![failure(SUITE, "constant state", e)],
        }
        expected = next_v_mean(expected, cfg.tau, params.sigma, params.c);
        err = err.max((&state.u - &ScalarField::constant(&grid, 0.2)).max_abs());
        err = err.max((&state.v - &ScalarField::constant(&grid, expected)).max_abs());
    }
    vec![result(SUITE, "constant state", err, 1e-13)]
}

fn mass_law_suite() -> Vec<CheckResult> {
    const SUITE: &str = "mass law";
    let grid = Grid::new_1d(64, 1.0).expect("valid grid");
    let params = Parameters { eps_u: 0.05, eps_v: 0.05, theta_u: 0.6, theta_v: 0.6, sigma: 1.5, c: 0.2, ..Parameters::default() };
    let spec = PotentialSpec::flory_huggins(params.clone());
    let cfg = SchemeConfig { tau: 2e-3, ..SchemeConfig::default() };
    let initial = match solver::initial_state(&grid, &solver::InitKind::ConstantPlusNoise, 1, 0.1, (0.1, -0.4)) {
        Ok(s) => s,
        Err(e) => return vec![failure(SUITE, "initial state", e)],
    };
    let mut records: Vec<DiagnosticsRecord> = Vec::new();
    let mut observer = |ev: &StepEvent<'_>| -> crate::Result<()> {
        records.push(diagnostics::record(None, ev.next, ev.tau, &spec, ev.step, 0)?);
        Ok(())
    };
    if let Err(e) = solver::run(&initial, 0.4, &cfg, &spec, &mut observer) {
        return vec![failure(SUITE, "run", e)];
    }
    let anchor = (0, 0.0, initial.u.mean(), initial.v.mean());
    match diagnostics::mass_law_check(&records, &params, Some(anchor)) {
        Ok(report) => vec![
            result(SUITE, "u mean conserved", report.max_dev_u, 1e-13),
            result(SUITE, "v mean recursion", report.max_dev_v_discrete, 1e-12),
            result(SUITE, "v mean vs continuous law", report.max_dev_v_continuous, 5e-3),
        ],
        Err(e) => vec![failure(SUITE, "mass law", e)],
    }
}

type Suite = fn() -> Vec<CheckResult>;

pub const SUITES: [(&str, Suite); 4] = [
    ("spectral", spectral_suite),
    ("potentials", potential_suite),
    ("scalar step", scalar_reduction_suite),
    ("mass law", mass_law_suite),
];

/// Runs every suite, in parallel when the thread budget allows.
pub fn run_checks() -> Vec<CheckResult> {
    let budget = solver::thread_budget();
    if budget <= 1 {
        return SUITES.iter().flat_map(|(_, suite)| suite()).collect();
    }
    let mut out = Vec::new();
    for chunk in SUITES.chunks(budget) {
        std::thread::scope(|scope| {
            let handles: Vec<_> = chunk.iter().map(|(_, suite)| scope.spawn(suite)).collect();
            for (handle, (name, _)) in handles.into_iter().zip(chunk) {
                match handle.join() {
                    Ok(results) => out.extend(results),
                    Err(_) => out.push(failure(name, "suite", "panicked")),
                }
            }
        });
    }
    out
}

/// Fixed-width pass/fail table.
pub fn format_table(results: &[CheckResult]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<12} {:<28} {:<6} detail", "suite", "check", "status");
    for r in results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "{:<12} {:<28} {:<6} {}", r.suite, r.name, status, r.detail);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        let results = run_checks();
        assert!(results.len() >= 10);
        let table = format_table(&results);
        assert!(results.iter().all(|r| r.passed), "{table}");
    }
}
