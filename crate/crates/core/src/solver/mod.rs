//! Bound-preserving time integration.
//!
//! One step of the first-order convex splitting reads
//!
//! ```text
//! (u+ - u)/tau             = Lap mu+,   mu+  = visc_u - eps_u^2 Lap u+ + S'_u(u+) - theta0_u u + W_u(u, v)
//! (v+ - v)/tau + s(v+ - c) = Lap phi+,  phi+ = visc_v - eps_v^2 Lap v+ + S'_v(v+) - theta0_v v + W_v(u, v)
//! ```
//!
//! with `visc_u = alpha (u+ - u)/tau` in viscous mode. The coupling is
//! explicit, so the two components decouple into independent convex
//! problems with known means.

mod component;
pub(crate) mod krylov;

pub use krylov::{gmres, pcg, KrylovOutcome};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::potentials::{self, Parameters, PotentialKind, PotentialSpec};
use crate::spectral::{Grid, ScalarField};
use component::ComponentProblem;

/// Maximal nesting of step halvings in adaptive mode.
pub const MAX_HALVINGS: u32 = 20;

/// Grids below this many nodes solve the two components on one thread.
const PARALLEL_THRESHOLD: usize = 2048;

/// A point of a trajectory. Both phase fields lie in `(-1, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: ScalarField,
    pub v: ScalarField,
}

impl State {
    pub fn new(t: f64, u: ScalarField, v: ScalarField) -> Result<State> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidParameter { name: "t", reason: format!("must be finite and nonnegative, got {t}") });
        }
        u.ensure_same_grid(&v)?;
        let state = State { t, u, v };
        state.check_bounds()?;
        Ok(state)
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn check_bounds(&self) -> Result<()> {
        for field in [&self.u, &self.v] {
            if let Some(&value) = field.values().iter().find(|x| !(x.abs() < 1.0)) {
                return Err(Error::BoundViolation { value });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeConfig {
    pub tau: f64,
    /// Relative Newton tolerance.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Newton iterates keep `max |.| <= 1 - safeguard_margin`.
    pub safeguard_margin: f64,
    /// Halve the step on Newton failure.
    pub adaptive: bool,
    /// Include `alpha_visc` rate terms in the chemical potentials.
    pub viscous: bool,
    pub cutoff_delta: Option<f64>,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            tau: 1e-3,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            safeguard_margin: 1e-12,
            adaptive: true,
            viscous: false,
            cutoff_delta: None,
        }
    }
}

impl SchemeConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if !(self.tau.is_finite() && self.tau > 0.0) {
            errors.push(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.newton_tol.is_finite() && self.newton_tol > 0.0) {
            errors.push(format!("newton_tol must be positive, got {}", self.newton_tol));
        }
        if self.newton_max_iter == 0 {
            errors.push("newton_max_iter must be at least 1".into());
        }
        if !(self.safeguard_margin > 0.0 && self.safeguard_margin < 0.5) {
            errors.push(format!("safeguard_margin must lie in (0, 1/2), got {}", self.safeguard_margin));
        }
        if let Some(delta) = self.cutoff_delta {
            if !(delta > 0.0 && delta < 1.0) {
                errors.push(format!("cutoff_delta must lie in (0, 1), got {delta}"));
            }
        }
        errors
    }

    pub fn validate(&self) -> Result<()> {
        let errors = self.violations();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    /// The potential this configuration runs with.
    pub fn potential(&self, params: Parameters) -> Result<PotentialSpec> {
        match self.cutoff_delta {
            Some(delta) => PotentialSpec::cutoff(params, delta),
            None => Ok(PotentialSpec::flory_huggins(params)),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    pub newton_iters_u: usize,
    pub newton_iters_v: usize,
    pub krylov_iters: usize,
    /// Number of halved substeps taken in place of the requested one.
    pub halvings: u32,
    pub residual_u: f64,
    pub residual_v: f64,
}

impl StepStats {
    pub fn newton_iters(&self) -> usize {
        self.newton_iters_u + self.newton_iters_v
    }

    fn absorb(&mut self, other: &StepStats) {
        self.newton_iters_u += other.newton_iters_u;
        self.newton_iters_v += other.newton_iters_v;
        self.krylov_iters += other.krylov_iters;
        self.halvings = self.halvings.max(other.halvings);
        self.residual_u = self.residual_u.max(other.residual_u);
        self.residual_v = self.residual_v.max(other.residual_v);
    }
}

/// Mean of `v` after one step: `(m + tau sigma c) / (1 + tau sigma)`.
pub fn next_v_mean(mean: f64, tau: f64, sigma: f64, c: f64) -> f64 {
    (mean + tau * sigma * c) / (1.0 + tau * sigma)
}

/// Upper bound on worker threads, from `CHLAB_THREADS` when set.
pub fn thread_budget() -> usize {
    let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    match std::env::var("CHLAB_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok()) {
        Some(cap) if cap >= 1 => cap.min(available.max(1)),
        _ => available,
    }
}

/// Explicit parts of both chemical potentials at the old state.
fn explicit_parts(u: &ScalarField, v: &ScalarField, spec: &PotentialSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = &spec.params;
    let n = u.values().len();
    let (mut gu, mut gv) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for (&a, &b) in u.values().iter().zip(v.values()) {
        match spec.kind {
            PotentialKind::FloryHuggins => {
                gu.push(-p.theta0_u * a + potentials::w_du(a, b, p));
                gv.push(-p.theta0_v * b + potentials::w_dv(a, b, p));
            }
            PotentialKind::Cutoff { .. } => {
                let (_, iu, _) = potentials::implicit_part(a, p.theta_u, p.theta0_u, spec.kind)?;
                let (_, iv, _) = potentials::implicit_part(b, p.theta_v, p.theta0_v, spec.kind)?;
                gu.push(potentials::f_du(a, b, spec)? - iu);
                gv.push(potentials::f_dv(a, b, spec)? - iv);
            }
        }
    }
    Ok((gu, gv))
}

/// Solves the nonlinear system of one step of length `tau` (no adaptivity).
///
/// Returns the new fields and the iteration counts.
pub fn solve_implicit_system(
    u: &ScalarField,
    v: &ScalarField,
    tau: f64,
    cfg: &SchemeConfig,
    spec: &PotentialSpec,
) -> Result<(ScalarField, ScalarField, StepStats)> {
    u.ensure_same_grid(v)?;
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidParameter { name: "tau", reason: format!("must be positive, got {tau}") });
    }
    let p = &spec.params;
    let grid = u.grid();
    let (gu, gv) = explicit_parts(u, v, spec)?;
    let visc = if cfg.viscous { p.alpha_visc / tau } else { 0.0 };

    let problem_u = ComponentProblem {
        grid,
        old: u.values(),
        target_mean: u.mean(),
        a: 1.0 / tau,
        tau,
        eps2: p.eps_u * p.eps_u,
        visc,
        theta: p.theta_u,
        theta0: p.theta0_u,
        kind: spec.kind,
        explicit: gu,
        tol: cfg.newton_tol,
        max_iter: cfg.newton_max_iter,
        margin: cfg.safeguard_margin,
    };
    let problem_v = ComponentProblem {
        grid,
        old: v.values(),
        target_mean: next_v_mean(v.mean(), tau, p.sigma, p.c),
        a: 1.0 / tau + p.sigma,
        tau,
        eps2: p.eps_v * p.eps_v,
        visc,
        theta: p.theta_v,
        theta0: p.theta0_v,
        kind: spec.kind,
        explicit: gv,
        tol: cfg.newton_tol,
        max_iter: cfg.newton_max_iter,
        margin: cfg.safeguard_margin,
    };

    let (out_u, out_v) = if grid.len() >= PARALLEL_THRESHOLD && thread_budget() > 1 {
        std::thread::scope(|scope| {
            let handle = scope.spawn(|| problem_v.solve());
            let out_u = problem_u.solve();
            let out_v = handle.join().expect("component solve panicked");
            (out_u, out_v)
        })
    } else {
        (problem_u.solve(), problem_v.solve())
    };
    let (wu, su) = out_u?;
    let (wv, sv) = out_v?;

    let stats = StepStats {
        newton_iters_u: su.newton_iters,
        newton_iters_v: sv.newton_iters,
        krylov_iters: su.krylov_iters + sv.krylov_iters,
        halvings: 0,
        residual_u: su.residual,
        residual_v: sv.residual,
    };
    Ok((ScalarField::new(grid, wu)?, ScalarField::new(grid, wv)?, stats))
}

/// One step of length `cfg.tau`.
pub fn step(state: &State, cfg: &SchemeConfig, spec: &PotentialSpec) -> Result<(State, StepStats)> {
    step_with_tau(state, cfg.tau, cfg, spec)
}

/// One step of length `tau`; in adaptive mode a failed solve is replaced by
/// two half steps, recursively.
pub fn step_with_tau(state: &State, tau: f64, cfg: &SchemeConfig, spec: &PotentialSpec) -> Result<(State, StepStats)> {
    let (mut next, stats) = attempt(state, tau, cfg, spec, 0)?;
    next.t = state.t + tau;
    if spec.is_singular() {
        next.check_bounds()?;
    }
    Ok((next, stats))
}

fn attempt(state: &State, tau: f64, cfg: &SchemeConfig, spec: &PotentialSpec, depth: u32) -> Result<(State, StepStats)> {
    match solve_implicit_system(&state.u, &state.v, tau, cfg, spec) {
        Ok((u, v, stats)) => Ok((State { t: state.t + tau, u, v }, stats)),
        Err(Error::NewtonDiverged { .. }) if cfg.adaptive && depth < MAX_HALVINGS => {
            let half = 0.5 * tau;
            let (mid, mut stats) = attempt(state, half, cfg, spec, depth + 1)?;
            let (end, second) = attempt(&mid, half, cfg, spec, depth + 1)?;
            stats.absorb(&second);
            stats.halvings = stats.halvings.max(depth + 1);
            Ok((end, stats))
        }
        Err(e) => Err(e),
    }
}

/// What an observer sees after each accepted step.
#[derive(Debug)]
pub struct StepEvent<'a> {
    /// Index of the accepted step, counting from one.
    pub step: u64,
    pub tau: f64,
    pub prev: &'a State,
    pub next: &'a State,
    pub stats: &'a StepStats,
    pub is_last: bool,
}

pub trait StepObserver {
    fn observe(&mut self, event: &StepEvent<'_>) -> Result<()>;
}

impl<F: FnMut(&StepEvent<'_>) -> Result<()>> StepObserver for F {
    fn observe(&mut self, event: &StepEvent<'_>) -> Result<()> {
        self(event)
    }
}

/// Observer that ignores everything.
pub fn no_observer(_: &StepEvent<'_>) -> Result<()> {
    Ok(())
}

/// Integrates from `initial.t` to `t_end`.
pub fn run(
    initial: &State,
    t_end: f64,
    cfg: &SchemeConfig,
    spec: &PotentialSpec,
    observer: &mut impl StepObserver,
) -> Result<State> {
    Ok(run_from(initial.clone(), 0, t_end, cfg, spec, observer)?.0)
}

/// Like [`run`], numbering steps after `start_step`. Returns the final state
/// and the index of the last accepted step.
///
/// Time advances as `t += tau` with the last step shortened to land on
/// `t_end`, so a run resumed from any intermediate state repeats the same
/// arithmetic.
pub fn run_from(
    initial: State,
    start_step: u64,
    t_end: f64,
    cfg: &SchemeConfig,
    spec: &PotentialSpec,
    observer: &mut impl StepObserver,
) -> Result<(State, u64)> {
    cfg.validate()?;
    if !(t_end.is_finite() && t_end >= initial.t) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            reason: format!("must not precede the start time {}, got {t_end}", initial.t),
        });
    }
    let mut state = initial;
    let mut index = start_step;
    loop {
        let remaining = t_end - state.t;
        if remaining <= 1e-12 * cfg.tau {
            break;
        }
        let last = remaining <= cfg.tau * (1.0 + 1e-9);
        let tau = if last { remaining } else { cfg.tau };
        let (mut next, stats) = step_with_tau(&state, tau, cfg, spec)?;
        if last {
            next.t = t_end;
        }
        index += 1;
        observer.observe(&StepEvent { step: index, tau, prev: &state, next: &next, stats: &stats, is_last: last })?;
        state = next;
        if last {
            break;
        }
    }
    Ok((state, index))
}

/// Deterministic profiles for `InitKind::Function`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    /// `m + A prod cos(pi x_i / L_i)` for `u`, doubled wavenumbers for `v`.
    Cosine,
    /// A smoothed step across the first axis; `v` is reflected.
    Stripe,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Profile> {
        match s {
            "cosine" => Ok(Profile::Cosine),
            "stripe" => Ok(Profile::Stripe),
            other => Err(Error::InvalidParameter { name: "init_kind", reason: format!("unknown profile `{other}`") }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitKind {
    /// Uniform noise of the given amplitude, mean-projected.
    ConstantPlusNoise,
    Function(Profile),
    /// Fields read from a snapshot; taken as they are.
    Fields { u: ScalarField, v: ScalarField },
}

/// Builds the initial state at `t = 0`. For `Fields` the means and amplitude
/// are ignored.
pub fn initial_state(grid: &Grid, kind: &InitKind, seed: u64, amplitude: f64, means: (f64, f64)) -> Result<State> {
    if let InitKind::Fields { u, v } = kind {
        if !u.grid().same_as(grid) {
            return Err(Error::GridMismatch);
        }
        return State::new(0.0, u.clone(), v.clone());
    }
    for m in [means.0, means.1] {
        if !(m.abs() < 1.0) {
            return Err(Error::MeanInfeasible(m));
        }
    }
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(Error::InvalidParameter { name: "amplitude", reason: format!("must be nonnegative, got {amplitude}") });
    }
    let (du, dv): (Vec<f64>, Vec<f64>) = match kind {
        InitKind::ConstantPlusNoise => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let du = (0..grid.len()).map(|_| amplitude * rng.gen_range(-1.0..1.0)).collect();
            let dv = (0..grid.len()).map(|_| amplitude * rng.gen_range(-1.0..1.0)).collect();
            (du, dv)
        }
        InitKind::Function(profile) => {
            let length = grid.length().to_vec();
            let shape = |x: &[f64], wave: f64| -> f64 {
                match profile {
                    Profile::Cosine => x
                        .iter()
                        .zip(&length)
                        .map(|(xi, li)| (wave * std::f64::consts::PI * xi / li).cos())
                        .product(),
                    Profile::Stripe => wave * ((x[0] - 0.5 * length[0]) / (0.05 * length[0])).tanh(),
                }
            };
            let coords = grid.coords();
            let du = coords.iter().map(|x| amplitude * shape(x, 1.0)).collect();
            let dv = coords
                .iter()
                .map(|x| {
                    amplitude
                        * match profile {
                            Profile::Cosine => shape(x, 2.0),
                            Profile::Stripe => shape(x, -1.0),
                        }
                })
                .collect();
            (du, dv)
        }
        InitKind::Fields { .. } => unreachable!(),
    };
    let project = |d: Vec<f64>, m: f64| -> Vec<f64> {
        let mean = grid.mean_of(&d);
        d.into_iter().map(|x| m + (x - mean)).collect()
    };
    let u = ScalarField::new(grid, project(du, means.0))?;
    let v = ScalarField::new(grid, project(dv, means.1))?;
    State::new(0.0, u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy;

    fn params() -> Parameters {
        Parameters { theta_u: 0.6, theta_v: 0.6, eps_u: 0.05, eps_v: 0.05, coupling_a: 0.1, ..Parameters::default() }
    }

    fn noisy(grid: &Grid, seed: u64, means: (f64, f64)) -> State {
        initial_state(grid, &InitKind::ConstantPlusNoise, seed, 0.05, means).unwrap()
    }

    #[test]
    fn constant_state_follows_scalar_recursion() {
        let grid = Grid::new_2d([16, 16], [1.0, 1.0]).unwrap();
        let p = Parameters { sigma: 2.0, c: 0.3, coupling_a: 0.4, coupling_b: -0.2, coupling_c: 0.1, ..params() };
        let spec = PotentialSpec::flory_huggins(p);
        let state = State::new(0.0, ScalarField::constant(&grid, 0.2), ScalarField::constant(&grid, -0.4)).unwrap();
        let cfg = SchemeConfig { tau: 0.05, ..SchemeConfig::default() };
        let (next, _) = step(&state, &cfg, &spec).unwrap();
        let expected = (-0.4 + 0.05 * 2.0 * 0.3) / (1.0 + 0.05 * 2.0);
        for (&a, &b) in next.u.values().iter().zip(next.v.values()) {
            assert!((a - 0.2).abs() < 1e-14);
            assert!((b - expected).abs() < 1e-14);
        }
        assert_eq!(next.t, 0.05);
    }

    #[test]
    fn mass_and_mean_recursion_are_exact() {
        let grid = Grid::new_2d([16, 16], [1.0, 1.0]).unwrap();
        let p = Parameters { sigma: 1.5, c: -0.1, ..params() };
        let spec = PotentialSpec::flory_huggins(p.clone());
        let state = noisy(&grid, 3, (0.1, 0.4));
        let cfg = SchemeConfig { tau: 1e-3, ..SchemeConfig::default() };
        let mut prev = state.clone();
        for _ in 0..5 {
            let (next, stats) = step(&prev, &cfg, &spec).unwrap();
            assert!((next.u.mean() - 0.1).abs() < 1e-13);
            let expected = next_v_mean(prev.v.mean(), cfg.tau, p.sigma, p.c);
            assert!((next.v.mean() - expected).abs() < 1e-13);
            assert!(stats.newton_iters_u >= 1);
            prev = next;
        }
    }

    #[test]
    fn starting_at_solution_needs_no_iteration() {
        let grid = Grid::new_1d(32, 1.0).unwrap();
        let p = Parameters { sigma: 0.0, ..params() };
        let spec = PotentialSpec::flory_huggins(p);
        let state = State::new(0.0, ScalarField::constant(&grid, 0.3), ScalarField::constant(&grid, -0.2)).unwrap();
        let (next, stats) = step(&state, &SchemeConfig::default(), &spec).unwrap();
        assert!(stats.newton_iters() <= 2, "{stats:?}");
        assert_eq!(next.u.values(), state.u.values());
    }

    #[test]
    fn tiny_perturbation_converges_in_two_iterations() {
        let grid = Grid::new_1d(64, 1.0).unwrap();
        let spec = PotentialSpec::cutoff(Parameters { coupling_a: 0.0, ..params() }, 0.1).unwrap();
        let state = initial_state(&grid, &InitKind::ConstantPlusNoise, 1, 1e-7, (0.0, 0.0)).unwrap();
        let cfg = SchemeConfig { tau: 1e-3, cutoff_delta: Some(0.1), ..SchemeConfig::default() };
        let (_, stats) = step(&state, &cfg, &spec).unwrap();
        assert!(stats.newton_iters_u <= 2 && stats.newton_iters_v <= 2, "{stats:?}");
    }

    #[test]
    fn conserved_energy_decreases() {
        let grid = Grid::new_2d([24, 24], [1.0, 1.0]).unwrap();
        let p = Parameters { sigma: 1.0, c: 0.0, ..params() };
        let spec = PotentialSpec::flory_huggins(p);
        let state = noisy(&grid, 11, (0.0, 0.0));
        let cfg = SchemeConfig { tau: 1e-3, ..SchemeConfig::default() };
        let mut last = energy::psi_tilde(&state.u, &state.v, &spec).unwrap().psi_tilde;
        let mut observer = |ev: &StepEvent<'_>| {
            let e = energy::psi_tilde(&ev.next.u, &ev.next.v, &spec)?.psi_tilde;
            assert!(e <= last + 1e-9, "energy rose at step {}: {last} -> {e}", ev.step);
            last = e;
            Ok(())
        };
        run(&state, 0.02, &cfg, &spec, &mut observer).unwrap();
    }

    #[test]
    fn deep_quench_stays_inside() {
        let grid = Grid::new_2d([32, 32], [1.0, 1.0]).unwrap();
        let p = Parameters { theta_u: 0.3, theta_v: 0.3, eps_u: 0.02, eps_v: 0.02, ..params() };
        let spec = PotentialSpec::flory_huggins(p);
        let state = noisy(&grid, 5, (0.0, 0.1));
        let cfg = SchemeConfig { tau: 1e-3, ..SchemeConfig::default() };
        let end = run(&state, 0.05, &cfg, &spec, &mut no_observer).unwrap();
        assert!(end.u.max_abs() < 1.0 && end.v.max_abs() < 1.0);
        assert!(end.u.max_abs() > 0.5, "no separation happened");
    }

    #[test]
    fn run_to_start_time_takes_no_steps() {
        let grid = Grid::new_1d(16, 1.0).unwrap();
        let spec = PotentialSpec::flory_huggins(params());
        let state = noisy(&grid, 1, (0.0, 0.0));
        let mut count = 0;
        let mut observer = |_: &StepEvent<'_>| {
            count += 1;
            Ok(())
        };
        let (end, steps) = run_from(state.clone(), 0, 0.0, &SchemeConfig::default(), &spec, &mut observer).unwrap();
        assert_eq!(end, state);
        assert_eq!((steps, count), (0, 0));
    }

    #[test]
    fn last_step_lands_on_end_time() {
        let grid = Grid::new_1d(16, 1.0).unwrap();
        let spec = PotentialSpec::flory_huggins(params());
        let state = noisy(&grid, 1, (0.0, 0.0));
        let cfg = SchemeConfig { tau: 0.003, ..SchemeConfig::default() };
        let (end, steps) = run_from(state, 0, 0.01, &cfg, &spec, &mut no_observer).unwrap();
        assert_eq!(end.t, 0.01);
        assert_eq!(steps, 4);
    }

    #[test]
    fn initial_state_contract() {
        let grid = Grid::new_2d([16, 16], [1.0, 1.0]).unwrap();
        let a = initial_state(&grid, &InitKind::ConstantPlusNoise, 7, 0.05, (0.1, -0.2)).unwrap();
        let b = initial_state(&grid, &InitKind::ConstantPlusNoise, 7, 0.05, (0.1, -0.2)).unwrap();
        assert_eq!(a, b);
        assert!((a.u.mean() - 0.1).abs() < 1e-14);
        assert!((a.v.mean() + 0.2).abs() < 1e-14);
        let flat = initial_state(&grid, &InitKind::ConstantPlusNoise, 7, 0.0, (0.1, -0.2)).unwrap();
        assert!(flat.u.values().iter().all(|&x| x == 0.1));
        assert!(matches!(
            initial_state(&grid, &InitKind::ConstantPlusNoise, 7, 0.5, (0.9, 0.0)),
            Err(Error::BoundViolation { .. })
        ));
        assert!(matches!(
            initial_state(&grid, &InitKind::ConstantPlusNoise, 7, 0.0, (1.0, 0.0)),
            Err(Error::MeanInfeasible(_))
        ));
        let cosine = initial_state(&grid, &InitKind::Function(Profile::Cosine), 0, 0.2, (0.0, 0.1)).unwrap();
        assert!((cosine.v.mean() - 0.1).abs() < 1e-14);
    }

    #[test]
    fn adaptive_halving_rescues_a_tight_newton_budget() {
        let grid = Grid::new_1d(32, 1.0).unwrap();
        let p = Parameters { theta_u: 0.1, theta_v: 0.1, ..params() };
        let spec = PotentialSpec::flory_huggins(p);
        let state = initial_state(&grid, &InitKind::Function(Profile::Stripe), 0, 0.999, (0.0, 0.0)).unwrap();
        let strict = SchemeConfig { tau: 0.004, newton_max_iter: 11, adaptive: false, ..SchemeConfig::default() };
        assert!(matches!(step(&state, &strict, &spec), Err(Error::NewtonDiverged { .. })));
        let adaptive = SchemeConfig { adaptive: true, ..strict };
        let (next, stats) = step(&state, &adaptive, &spec).unwrap();
        assert!(stats.halvings >= 1);
        assert_eq!(next.t, 0.004);
        assert!(next.u.max_abs() < 1.0);
    }
}
