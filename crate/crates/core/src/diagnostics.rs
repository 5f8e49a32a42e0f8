//! Per-step measurements, the diagnostics CSV, and the long-time probes:
//! mass laws, separation distances, decay fits, the energy envelope and the
//! Lojasiewicz–Simon ratio.

use std::io::{BufRead, Write};

use crate::energy;
use crate::error::{Error, Result};
use crate::potentials::{Parameters, PotentialSpec};
use crate::snapshot::fmt_f64;
use crate::solver::{next_v_mean, State, StepEvent};
use crate::steady::stationary_residual;

pub const CSV_HEADER: &str = "t,step,mass_u,mass_v,psi,psi_hat,psi_tilde,grad_mu_sq,grad_phitilde_sq,oono_source,min_u,max_u,min_v,max_v,newton_iters,energy_residual,steady_res_u,steady_res_v";

const COLUMNS: usize = 18;

/// Everything measured at one time level. `mass_u`, `mass_v` are spatial
/// means; `energy_residual` needs the previous state.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub step: u64,
    pub mass_u: f64,
    pub mass_v: f64,
    pub psi: f64,
    pub psi_hat: f64,
    pub psi_tilde: f64,
    pub grad_mu_sq: f64,
    pub grad_phitilde_sq: f64,
    pub oono_source: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub min_v: f64,
    pub max_v: f64,
    pub newton_iters: u64,
    pub energy_residual: Option<f64>,
    pub steady_res_u: f64,
    pub steady_res_v: f64,
}

/// Measures `next`. With `prev` the discrete energy identity over the step of
/// length `tau` is evaluated too.
pub fn record(
    prev: Option<&State>,
    next: &State,
    tau: f64,
    spec: &PotentialSpec,
    step: u64,
    newton_iters: u64,
) -> Result<DiagnosticsRecord> {
    let p = &spec.params;
    let parts = energy::full_breakdown(&next.u, &next.v, spec, false)?;
    let mu = energy::mu_of(&next.u, &next.v, spec)?;
    let phi = energy::phi_of(&next.u, &next.v, spec, None)?;
    let phi_tilde = phi.add_scaled(p.sigma, &energy::nonlocal_potential(&next.v));
    let measure = next.grid().measure();
    let energy_residual = match prev {
        Some(prev) => Some(energy::energy_balance(prev, next, tau, spec)?.residual),
        None => None,
    };
    let (steady_res_u, steady_res_v) = stationary_residual(next, spec)?;
    Ok(DiagnosticsRecord {
        t: next.t,
        step,
        mass_u: next.u.mean(),
        mass_v: next.v.mean(),
        psi: parts.psi,
        psi_hat: parts.psi_hat,
        psi_tilde: parts.psi + 0.5 * p.sigma * next.v.vstar_sq_unchecked(),
        grad_mu_sq: mu.grad_norm_sq(),
        grad_phitilde_sq: phi_tilde.grad_norm_sq(),
        oono_source: p.sigma * (next.v.mean() - p.c) * phi.mean() * measure,
        min_u: next.u.min(),
        max_u: next.u.max(),
        min_v: next.v.min(),
        max_v: next.v.max(),
        newton_iters,
        energy_residual,
        steady_res_u,
        steady_res_v,
    })
}

/// The record of an accepted solver step.
pub fn record_event(event: &StepEvent<'_>, spec: &PotentialSpec) -> Result<DiagnosticsRecord> {
    record(Some(event.prev), event.next, event.tau, spec, event.step, event.stats.newton_iters() as u64)
}

impl DiagnosticsRecord {
    pub fn to_csv_row(&self) -> String {
        let f = |x: f64| fmt_f64(x);
        [
            f(self.t),
            self.step.to_string(),
            f(self.mass_u),
            f(self.mass_v),
            f(self.psi),
            f(self.psi_hat),
            f(self.psi_tilde),
            f(self.grad_mu_sq),
            f(self.grad_phitilde_sq),
            f(self.oono_source),
            f(self.min_u),
            f(self.max_u),
            f(self.min_v),
            f(self.max_v),
            self.newton_iters.to_string(),
            self.energy_residual.map(f).unwrap_or_default(),
            f(self.steady_res_u),
            f(self.steady_res_v),
        ]
        .join(",")
    }

    pub fn from_csv_row(line: &str) -> Result<DiagnosticsRecord> {
        let cells: Vec<&str> = line.trim_end().split(',').collect();
        if cells.len() != COLUMNS {
            return Err(Error::Format(format!("expected {COLUMNS} columns, found {}", cells.len())));
        }
        let names: Vec<&str> = CSV_HEADER.split(',').collect();
        let num = |i: usize| -> Result<f64> {
            cells[i]
                .parse()
                .map_err(|_| Error::Format(format!("column `{}`: bad number `{}`", names[i], cells[i])))
        };
        let int = |i: usize| -> Result<u64> {
            cells[i]
                .parse()
                .map_err(|_| Error::Format(format!("column `{}`: bad integer `{}`", names[i], cells[i])))
        };
        Ok(DiagnosticsRecord {
            t: num(0)?,
            step: int(1)?,
            mass_u: num(2)?,
            mass_v: num(3)?,
            psi: num(4)?,
            psi_hat: num(5)?,
            psi_tilde: num(6)?,
            grad_mu_sq: num(7)?,
            grad_phitilde_sq: num(8)?,
            oono_source: num(9)?,
            min_u: num(10)?,
            max_u: num(11)?,
            min_v: num(12)?,
            max_v: num(13)?,
            newton_iters: int(14)?,
            energy_residual: if cells[15].is_empty() { None } else { Some(num(15)?) },
            steady_res_u: num(16)?,
            steady_res_v: num(17)?,
        })
    }
}

pub fn write_csv<W: Write>(mut out: W, records: &[DiagnosticsRecord]) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.to_csv_row())?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim_end() != CSV_HEADER {
        let found: Vec<&str> = header.trim_end().split(',').collect();
        let expected: Vec<&str> = CSV_HEADER.split(',').collect();
        let (i, want) = expected
            .iter()
            .enumerate()
            .find(|(i, name)| found.get(*i) != Some(*name))
            .map(|(i, name)| (i, *name))
            .unwrap_or((expected.len(), "<end of header>"));
        let got = found.get(i).copied().unwrap_or("<missing>");
        return Err(Error::Format(format!("diagnostics header column {i}: expected `{want}`, found `{got}`")));
    }
    let mut records = Vec::new();
    for line in lines {
        let line = line?;
        if !line.trim().is_empty() {
            records.push(DiagnosticsRecord::from_csv_row(&line)?);
        }
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// Mass laws

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MassLawReport {
    pub max_dev_u: f64,
    pub max_dev_v_discrete: f64,
    pub max_dev_v_continuous: f64,
}

/// `mean v(t) = v0 e^{-sigma t} + c (1 - e^{-sigma t})`.
pub fn continuous_v_mean(v0: f64, t: f64, sigma: f64, c: f64) -> f64 {
    let decay = (-sigma * t).exp();
    v0 * decay + c * (1.0 - decay)
}

/// Compares the means along a trajectory with the conservation law for `u`,
/// the scheme's exact recursion for `v` and the continuous law for `v`.
///
/// The anchor is `initial = (step, t, mean u, mean v)` when given, else the
/// first record. Between consecutive records `k` solver steps of equal length
/// are assumed, `k` being the difference of step indices.
pub fn mass_law_check(
    records: &[DiagnosticsRecord],
    params: &Parameters,
    initial: Option<(u64, f64, f64, f64)>,
) -> Result<MassLawReport> {
    let (anchor, rest) = match (initial, records.split_first()) {
        (_, None) => return Err(Error::InsufficientData("empty trajectory".into())),
        (Some(anchor), _) => (anchor, records),
        (None, Some((first, rest))) => ((first.step, first.t, first.mass_u, first.mass_v), rest),
    };
    let (mut step_prev, t0, u0, v0) = anchor;
    let mut t_prev = t0;
    let mut report = MassLawReport { max_dev_u: 0.0, max_dev_v_discrete: 0.0, max_dev_v_continuous: 0.0 };
    let mut expected = v0;
    for r in rest {
        let gap = r.step.saturating_sub(step_prev).max(1);
        let tau = (r.t - t_prev) / gap as f64;
        for _ in 0..gap {
            expected = next_v_mean(expected, tau, params.sigma, params.c);
        }
        report.max_dev_u = report.max_dev_u.max((r.mass_u - u0).abs());
        report.max_dev_v_discrete = report.max_dev_v_discrete.max((r.mass_v - expected).abs());
        let exact = continuous_v_mean(v0, r.t - t0, params.sigma, params.c);
        report.max_dev_v_continuous = report.max_dev_v_continuous.max((r.mass_v - exact).abs());
        t_prev = r.t;
        step_prev = r.step;
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Separation

/// `(t, max |u|, max |v|)` of every record.
pub fn extremes(records: &[DiagnosticsRecord]) -> Vec<(f64, f64, f64)> {
    records
        .iter()
        .map(|r| (r.t, r.min_u.abs().max(r.max_u.abs()), r.min_v.abs().max(r.max_v.abs())))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Separation {
    pub delta_u: f64,
    pub delta_v: f64,
    /// Times at which the suprema are attained.
    pub t_u: f64,
    pub t_v: f64,
}

/// `1 - sup_{t >= kappa} max |u|` and likewise for `v`.
pub fn separation_estimate(samples: &[(f64, f64, f64)], kappa: f64) -> Result<Separation> {
    let window: Vec<_> = samples.iter().filter(|s| s.0 >= kappa).collect();
    if window.is_empty() {
        return Err(Error::InsufficientData(format!("no samples at or after kappa = {kappa}")));
    }
    let mut sep = Separation { delta_u: f64::INFINITY, delta_v: f64::INFINITY, t_u: kappa, t_v: kappa };
    for &&(t, mu, mv) in &window {
        if 1.0 - mu < sep.delta_u {
            sep.delta_u = 1.0 - mu;
            sep.t_u = t;
        }
        if 1.0 - mv < sep.delta_v {
            sep.delta_v = 1.0 - mv;
            sep.t_v = t;
        }
    }
    Ok(sep)
}

/// `(t_end, delta_u, delta_v)` with the supremum taken over `[kappa, t_end]`.
pub fn separation_profile(samples: &[(f64, f64, f64)], kappa: f64) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    let (mut su, mut sv) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(t, mu, mv) in samples.iter().filter(|s| s.0 >= kappa) {
        su = su.max(mu);
        sv = sv.max(mv);
        out.push((t, 1.0 - su, 1.0 - sv));
    }
    out
}

/// Least-squares slopes of the profile over `t >= from`.
pub fn plateau_slope(profile: &[(f64, f64, f64)], from: f64) -> Result<(f64, f64)> {
    let pts: Vec<_> = profile.iter().filter(|p| p.0 >= from).collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData("fewer than two profile points in the window".into()));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let su = linear_fit(&xs, &pts.iter().map(|p| p.1).collect::<Vec<_>>()).0;
    let sv = linear_fit(&xs, &pts.iter().map(|p| p.2).collect::<Vec<_>>()).0;
    Ok((su, sv))
}

/// `(slope, intercept, rms residual)` of a least-squares line.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    (slope, intercept, (rss / n).sqrt())
}

// ---------------------------------------------------------------------------
// Decay fits

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayModel {
    /// `y = A e^{-r t}`, reported rate `r`.
    Exponential,
    /// `y = A (1 + t)^p`, reported rate `p`.
    Algebraic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub prefactor: f64,
    /// RMS residual of the fit in log space.
    pub residual: f64,
}

pub const MIN_FIT_SAMPLES: usize = 10;

/// Default fit window `[max(1, t_end/2), t_end]`.
pub fn default_window(t_end: f64) -> (f64, f64) {
    (1f64.max(0.5 * t_end), t_end)
}

/// Log-linear (exponential) or log-log (algebraic) least squares over the
/// samples inside `window`.
pub fn decay_fit(samples: &[(f64, f64)], model: DecayModel, window: (f64, f64)) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = samples.iter().copied().filter(|(t, _)| *t >= window.0 && *t <= window.1).collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples in the fit window, need {MIN_FIT_SAMPLES}",
            pts.len()
        )));
    }
    if let Some(&(t, y)) = pts.iter().find(|(_, y)| !(*y > 0.0 && y.is_finite())) {
        return Err(Error::InsufficientData(format!("nonpositive sample {y} at t = {t}")));
    }
    let xs: Vec<f64> = pts
        .iter()
        .map(|(t, _)| match model {
            DecayModel::Exponential => *t,
            DecayModel::Algebraic => (1.0 + t).ln(),
        })
        .collect();
    let ys: Vec<f64> = pts.iter().map(|(_, y)| y.ln()).collect();
    let (slope, intercept, residual) = linear_fit(&xs, &ys);
    let rate = match model {
        DecayModel::Exponential => -slope,
        DecayModel::Algebraic => slope,
    };
    Ok(DecayFit { rate, prefactor: intercept.exp(), residual })
}

/// `(t, |mean v - c|)` per record.
pub fn v_mean_gap(records: &[DiagnosticsRecord], c: f64) -> Vec<(f64, f64)> {
    records.iter().map(|r| (r.t, (r.mass_v - c).abs())).collect()
}

/// `(t, ||u - u_inf||_{-1} + ||v - v_inf||_{-1})` per snapshot.
pub fn vstar_distance(snapshots: &[State], steady: &State) -> Result<Vec<(f64, f64)>> {
    snapshots
        .iter()
        .map(|s| {
            s.u.ensure_same_grid(&steady.u)?;
            Ok((s.t, (&s.u - &steady.u).norm_minus1() + (&s.v - &steady.v).norm_minus1()))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Energy envelope

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyEnvelope {
    /// Estimated constant in `dPsi_tilde/dt + dissipation <= K1 e^{-sigma t}`.
    pub k1: f64,
    /// `(t, E)` with `E = Psi_tilde + (K1/sigma) e^{-sigma t}`, for `t >= t_min`.
    pub series: Vec<(f64, f64)>,
    /// Largest increase of `E` between consecutive entries (zero if none).
    pub max_increase: f64,
}

/// `K1` is estimated as `max_n max(0, -oono_source_n) e^{sigma t_n}`: the
/// source is the only term that can raise `Psi_tilde`.
pub fn energy_envelope(records: &[DiagnosticsRecord], sigma: f64, t_min: f64) -> Result<EnergyEnvelope> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter { name: "sigma", reason: "the envelope needs sigma > 0".into() });
    }
    if records.is_empty() {
        return Err(Error::InsufficientData("empty trajectory".into()));
    }
    let k1 = records
        .iter()
        .map(|r| (-r.oono_source).max(0.0) * (sigma * r.t).exp())
        .fold(0.0, f64::max);
    let series: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.t >= t_min)
        .map(|r| (r.t, r.psi_tilde + k1 / sigma * (-sigma * r.t).exp()))
        .collect();
    let max_increase = series.windows(2).map(|w| w[1].1 - w[0].1).fold(0.0, f64::max);
    Ok(EnergyEnvelope { k1, series, max_increase })
}

// ---------------------------------------------------------------------------
// Lojasiewicz–Simon probe

/// Default exponent grid `{0.05, 0.10, ..., 0.45}`.
pub fn default_theta_grid() -> Vec<f64> {
    (1..=9).map(|k| 0.05 * k as f64).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LsRow {
    pub t: f64,
    pub theta: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`; `None` when both sides vanish.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LsProbe {
    pub rows: Vec<LsRow>,
    /// `(theta, sup ratio, consistent)`.
    pub summary: Vec<(f64, f64, bool)>,
}

/// A ratio counts as bounded when its supremum over the window exceeds the
/// supremum over the first (farthest) half by at most this factor.
pub const LS_GROWTH_FACTOR: f64 = 100.0;

/// Evaluates both sides of the Lojasiewicz–Simon inequality
/// `|E - E_inf|^{1-theta} <= C (|mu - mean mu|_* + |phi_t - mean phi_t|_* + (|mean u - u0| + |mean v - c|)^{1-theta})`
/// on every snapshot within `radius` (in `H^1`) of `steady`.
pub fn ls_probe(
    snapshots: &[State],
    steady: &State,
    theta_grid: &[f64],
    spec: &PotentialSpec,
    u_mean0: f64,
    radius: f64,
) -> Result<LsProbe> {
    if let Some(&bad) = theta_grid.iter().find(|&&th| !(th > 0.0 && th < 0.5)) {
        return Err(Error::InvalidParameter { name: "theta", reason: format!("must lie in (0, 1/2), got {bad}") });
    }
    let p = &spec.params;
    let e_inf = energy::psi_tilde(&steady.u, &steady.v, spec)?.psi_tilde;
    let mut near: Vec<&State> = Vec::new();
    for s in snapshots {
        s.u.ensure_same_grid(&steady.u)?;
        let dist = (&s.u - &steady.u).norm_h1() + (&s.v - &steady.v).norm_h1();
        if dist <= radius {
            near.push(s);
        }
    }
    if near.is_empty() {
        return Err(Error::InsufficientData(format!("no snapshot within {radius} of the steady state")));
    }
    near.sort_by(|a, b| a.t.total_cmp(&b.t));

    let mut rows = Vec::new();
    for s in &near {
        let gap = (energy::psi_tilde(&s.u, &s.v, spec)?.psi_tilde - e_inf).abs();
        let mu = energy::mu_of(&s.u, &s.v, spec)?;
        let phi_t = energy::phi_tilde_of(&s.u, &s.v, spec)?;
        let gradient = mu.fluctuation().vstar_sq_unchecked().sqrt() + phi_t.fluctuation().vstar_sq_unchecked().sqrt();
        let mass = (s.u.mean() - u_mean0).abs() + (s.v.mean() - p.c).abs();
        for &theta in theta_grid {
            let lhs = gap.powf(1.0 - theta);
            let rhs = gradient + mass.powf(1.0 - theta);
            let ratio = if lhs == 0.0 && rhs == 0.0 {
                None
            } else if rhs == 0.0 {
                Some(f64::INFINITY)
            } else {
                Some(lhs / rhs)
            };
            rows.push(LsRow { t: s.t, theta, lhs, rhs, ratio });
        }
    }

    let half_t = near[(near.len() - 1) / 2].t;
    let summary = theta_grid
        .iter()
        .map(|&theta| {
            let sup = |pred: &dyn Fn(&LsRow) -> bool| {
                rows.iter()
                    .filter(|r| r.theta == theta && pred(r))
                    .filter_map(|r| r.ratio)
                    .fold(0.0, f64::max)
            };
            let all = sup(&|_| true);
            let early = sup(&|r| r.t <= half_t);
            let consistent = all.is_finite() && (all == 0.0 || all <= LS_GROWTH_FACTOR * early.max(f64::MIN_POSITIVE));
            (theta, all, consistent)
        })
        .collect();
    Ok(LsProbe { rows, summary })
}
