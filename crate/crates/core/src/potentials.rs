//! Flory–Huggins entropy, the coupled potential `F(u, v)` and its `C^2`
//! cutoff regularization.

use crate::error::{Error, Result};

/// Model coefficients.
///
/// `alpha_visc` is the viscosity of the regularized chemical potentials;
/// `coupling_a`, `coupling_b`, `coupling_c` are the coefficients of
/// `W(u, v) = a u v + b u^2 v + c u v^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameters {
    pub sigma: f64,
    pub c: f64,
    pub theta_u: f64,
    pub theta0_u: f64,
    pub theta_v: f64,
    pub theta0_v: f64,
    pub eps_u: f64,
    pub eps_v: f64,
    pub coupling_a: f64,
    pub coupling_b: f64,
    pub coupling_c: f64,
    pub alpha_visc: f64,
}

impl Default for Parameters {
    fn default() -> Self {
        Parameters {
            sigma: 1.0,
            c: 0.0,
            theta_u: 0.5,
            theta0_u: 1.0,
            theta_v: 0.5,
            theta0_v: 1.0,
            eps_u: 1.0,
            eps_v: 1.0,
            coupling_a: 0.0,
            coupling_b: 0.0,
            coupling_c: 0.0,
            alpha_visc: 0.0,
        }
    }
}

impl Parameters {
    /// Every violated constraint, one message per violation.
    ///
    /// With `strict` the double-well condition `0 < theta < theta0` is
    /// enforced; otherwise only positivity of the temperatures is required and
    /// a convex-regime configuration yields a warning instead.
    pub fn violations(&self, strict: bool) -> (Vec<String>, Vec<String>) {
        let mut errors = Vec::new();
        let mut warnings = Vec::new();
        let all = [
            ("sigma", self.sigma),
            ("c", self.c),
            ("theta_u", self.theta_u),
            ("theta0_u", self.theta0_u),
            ("theta_v", self.theta_v),
            ("theta0_v", self.theta0_v),
            ("eps_u", self.eps_u),
            ("eps_v", self.eps_v),
            ("coupling_a", self.coupling_a),
            ("coupling_b", self.coupling_b),
            ("coupling_c", self.coupling_c),
            ("alpha_visc", self.alpha_visc),
        ];
        for (name, value) in all {
            if !value.is_finite() {
                errors.push(format!("{name}: must be finite, got {value}"));
            }
        }
        if !(self.c.abs() < 1.0) {
            errors.push(format!("c: requires |c| < 1, got {}", self.c));
        }
        if !(self.sigma >= 0.0) {
            errors.push(format!("sigma: requires sigma >= 0, got {}", self.sigma));
        }
        if !(self.eps_u > 0.0) {
            errors.push(format!("eps_u: requires eps_u > 0, got {}", self.eps_u));
        }
        if !(self.eps_v > 0.0) {
            errors.push(format!("eps_v: requires eps_v > 0, got {}", self.eps_v));
        }
        if !(0.0..1.0).contains(&self.alpha_visc) {
            errors.push(format!("alpha_visc: requires 0 <= alpha_visc < 1, got {}", self.alpha_visc));
        }
        for (which, theta, theta0) in [
            ("u", self.theta_u, self.theta0_u),
            ("v", self.theta_v, self.theta0_v),
        ] {
            if !(theta > 0.0) || !(theta0 > 0.0) {
                errors.push(format!(
                    "theta_{which}, theta0_{which}: temperatures must be positive, got {theta}, {theta0}"
                ));
            } else if theta >= theta0 {
                let msg = format!(
                    "theta_{which}, theta0_{which}: double well requires 0 < theta < theta0, got {theta} >= {theta0}"
                );
                if strict {
                    errors.push(msg);
                } else {
                    warnings.push(format!("{msg} (accepted in relaxed mode: convex regime)"));
                }
            }
        }
        (errors, warnings)
    }

    pub fn validate(&self, strict: bool) -> Result<Vec<String>> {
        let (errors, warnings) = self.violations(strict);
        if errors.is_empty() {
            Ok(warnings)
        } else {
            Err(Error::Config(errors))
        }
    }
}

/// Which bulk potential drives the dynamics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PotentialKind {
    FloryHuggins,
    /// The `C^2` cutoff `F_delta`, equal to `F` on `[-1+delta, 1-delta]^2`.
    Cutoff { delta: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub params: Parameters,
}

impl PotentialSpec {
    pub fn flory_huggins(params: Parameters) -> PotentialSpec {
        PotentialSpec { kind: PotentialKind::FloryHuggins, params }
    }

    pub fn cutoff(params: Parameters, delta: f64) -> Result<PotentialSpec> {
        check_delta(delta)?;
        Ok(PotentialSpec { kind: PotentialKind::Cutoff { delta }, params })
    }

    pub fn is_singular(&self) -> bool {
        matches!(self.kind, PotentialKind::FloryHuggins)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "delta", reason: format!("must lie in (0, 1), got {delta}") })
    }
}

// ---------------------------------------------------------------------------
// Flory–Huggins entropy

/// `(theta/2) [(1+s) ln(1+s) + (1-s) ln(1-s)]`, extended continuously to
/// `theta ln 2` at `s = +-1`.
pub fn fh_hat(s: f64, theta: f64) -> Result<f64> {
    if !(s.abs() <= 1.0) {
        return Err(Error::DomainViolation { value: s });
    }
    if s.abs() == 1.0 {
        return Ok(theta * std::f64::consts::LN_2);
    }
    Ok(0.5 * theta * ((1.0 + s) * s.ln_1p() + (1.0 - s) * (-s).ln_1p()))
}

pub fn fh_hat_d1(s: f64, theta: f64) -> Result<f64> {
    if !(s.abs() < 1.0) {
        return Err(Error::DomainViolation { value: s });
    }
    Ok(0.5 * theta * (s.ln_1p() - (-s).ln_1p()))
}

pub fn fh_hat_d2(s: f64, theta: f64) -> Result<f64> {
    if !(s.abs() < 1.0) {
        return Err(Error::DomainViolation { value: s });
    }
    Ok(theta / ((1.0 - s) * (1.0 + s)))
}

/// `S(s) = fh_hat(s) - theta0 s^2 / 2` and its first two derivatives.
fn s_value(s: f64, theta: f64, theta0: f64) -> Result<f64> {
    Ok(fh_hat(s, theta)? - 0.5 * theta0 * s * s)
}

fn s_d1(s: f64, theta: f64, theta0: f64) -> Result<f64> {
    Ok(fh_hat_d1(s, theta)? - theta0 * s)
}

fn s_d2(s: f64, theta: f64, theta0: f64) -> Result<f64> {
    Ok(fh_hat_d2(s, theta)? - theta0)
}

// ---------------------------------------------------------------------------
// Coupling

pub fn w_value(u: f64, v: f64, p: &Parameters) -> f64 {
    p.coupling_a * u * v + p.coupling_b * u * u * v + p.coupling_c * u * v * v
}

pub fn w_du(u: f64, v: f64, p: &Parameters) -> f64 {
    p.coupling_a * v + 2.0 * p.coupling_b * u * v + p.coupling_c * v * v
}

pub fn w_dv(u: f64, v: f64, p: &Parameters) -> f64 {
    p.coupling_a * u + p.coupling_b * u * u + 2.0 * p.coupling_c * u * v
}

/// `(W_uu, W_uv, W_vv)`.
pub fn w_second(u: f64, v: f64, p: &Parameters) -> (f64, f64, f64) {
    (
        2.0 * p.coupling_b * v,
        p.coupling_a + 2.0 * p.coupling_b * u + 2.0 * p.coupling_c * v,
        2.0 * p.coupling_c * u,
    )
}

// ---------------------------------------------------------------------------
// Cutoff

/// Quintic smoothstep `6t^5 - 15t^4 + 10t^3` with derivatives; `C^2` at both ends.
fn smoothstep(t: f64) -> (f64, f64, f64) {
    let t2 = t * t;
    (
        t2 * t * (10.0 - 15.0 * t + 6.0 * t2),
        30.0 * t2 * (1.0 - t) * (1.0 - t),
        60.0 * t * (1.0 - t) * (1.0 - 2.0 * t),
    )
}

/// The mollified indicator `xi_delta` and its first two derivatives.
///
/// Equal to one on `|s| <= 1 - 3 delta/4`, zero on `|s| >= 1 - delta/4`,
/// monotone in between.
pub fn cutoff_xi(delta: f64, s: f64) -> Result<(f64, f64, f64)> {
    check_delta(delta)?;
    Ok(xi_unchecked(delta, s))
}

fn xi_unchecked(delta: f64, s: f64) -> (f64, f64, f64) {
    let a = s.abs();
    let inner = 1.0 - 0.75 * delta;
    let outer = 1.0 - 0.25 * delta;
    if a <= inner {
        return (1.0, 0.0, 0.0);
    }
    if a >= outer {
        return (0.0, 0.0, 0.0);
    }
    let width = outer - inner;
    let (p, dp, ddp) = smoothstep((a - inner) / width);
    let sign = s.signum();
    (1.0 - p, -sign * dp / width, -ddp / (width * width))
}

/// Cutoff entropy `S_delta = S xi_delta` with first two derivatives.
fn s_delta(s: f64, delta: f64, theta: f64, theta0: f64) -> (f64, f64, f64) {
    let (xi, dxi, ddxi) = xi_unchecked(delta, s);
    if xi == 0.0 && dxi == 0.0 && ddxi == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    // Inside the support |s| < 1 - delta/4, so S is finite.
    let sv = s_value(s, theta, theta0).expect("inside cutoff support");
    let s1 = s_d1(s, theta, theta0).expect("inside cutoff support");
    let s2 = s_d2(s, theta, theta0).expect("inside cutoff support");
    (sv * xi, s1 * xi + sv * dxi, s2 * xi + 2.0 * s1 * dxi + sv * ddxi)
}

fn in_plateau(s: f64, delta: f64) -> bool {
    s.abs() <= 1.0 - delta
}

pub fn f_delta_value(u: f64, v: f64, delta: f64, p: &Parameters) -> f64 {
    if in_plateau(u, delta) && in_plateau(v, delta) {
        return f_fh_value(u, v, p).expect("plateau lies inside (-1, 1)");
    }
    let (su, _, _) = s_delta(u, delta, p.theta_u, p.theta0_u);
    let (sv, _, _) = s_delta(v, delta, p.theta_v, p.theta0_v);
    let (xu, _, _) = xi_unchecked(delta, u);
    let (xv, _, _) = xi_unchecked(delta, v);
    su + sv + w_value(u, v, p) * xu * xv
}

pub fn f_delta_du(u: f64, v: f64, delta: f64, p: &Parameters) -> f64 {
    if in_plateau(u, delta) && in_plateau(v, delta) {
        return f_fh_du(u, v, p).expect("plateau lies inside (-1, 1)");
    }
    let (_, su1, _) = s_delta(u, delta, p.theta_u, p.theta0_u);
    let (xu, dxu, _) = xi_unchecked(delta, u);
    let (xv, _, _) = xi_unchecked(delta, v);
    su1 + (w_du(u, v, p) * xu + w_value(u, v, p) * dxu) * xv
}

pub fn f_delta_dv(u: f64, v: f64, delta: f64, p: &Parameters) -> f64 {
    if in_plateau(u, delta) && in_plateau(v, delta) {
        return f_fh_dv(u, v, p).expect("plateau lies inside (-1, 1)");
    }
    let (_, sv1, _) = s_delta(v, delta, p.theta_v, p.theta0_v);
    let (xu, _, _) = xi_unchecked(delta, u);
    let (xv, dxv, _) = xi_unchecked(delta, v);
    sv1 + (w_dv(u, v, p) * xv + w_value(u, v, p) * dxv) * xu
}

/// Second partials `(F_uu, F_uv, F_vv)` of the cutoff potential.
pub fn f_delta_second(u: f64, v: f64, delta: f64, p: &Parameters) -> (f64, f64, f64) {
    let (_, _, su2) = s_delta(u, delta, p.theta_u, p.theta0_u);
    let (_, _, sv2) = s_delta(v, delta, p.theta_v, p.theta0_v);
    let (xu, dxu, ddxu) = xi_unchecked(delta, u);
    let (xv, dxv, ddxv) = xi_unchecked(delta, v);
    let w = w_value(u, v, p);
    let (wu, wv) = (w_du(u, v, p), w_dv(u, v, p));
    let (wuu, wuv, wvv) = w_second(u, v, p);
    (
        su2 + (wuu * xu + 2.0 * wu * dxu + w * ddxu) * xv,
        wuv * xu * xv + wu * xu * dxv + wv * dxu * xv + w * dxu * dxv,
        sv2 + (wvv * xv + 2.0 * wv * dxv + w * ddxv) * xu,
    )
}

fn f_fh_value(u: f64, v: f64, p: &Parameters) -> Result<f64> {
    Ok(s_value(u, p.theta_u, p.theta0_u)? + s_value(v, p.theta_v, p.theta0_v)? + w_value(u, v, p))
}

fn f_fh_du(u: f64, v: f64, p: &Parameters) -> Result<f64> {
    Ok(s_d1(u, p.theta_u, p.theta0_u)? + w_du(u, v, p))
}

fn f_fh_dv(u: f64, v: f64, p: &Parameters) -> Result<f64> {
    Ok(s_d1(v, p.theta_v, p.theta0_v)? + w_dv(u, v, p))
}

// ---------------------------------------------------------------------------
// The bivariate potential, dispatched on the spec

pub fn f_value(u: f64, v: f64, spec: &PotentialSpec) -> Result<f64> {
    match spec.kind {
        PotentialKind::FloryHuggins => f_fh_value(u, v, &spec.params),
        PotentialKind::Cutoff { delta } => Ok(f_delta_value(u, v, delta, &spec.params)),
    }
}

pub fn f_du(u: f64, v: f64, spec: &PotentialSpec) -> Result<f64> {
    match spec.kind {
        PotentialKind::FloryHuggins => f_fh_du(u, v, &spec.params),
        PotentialKind::Cutoff { delta } => Ok(f_delta_du(u, v, delta, &spec.params)),
    }
}

pub fn f_dv(u: f64, v: f64, spec: &PotentialSpec) -> Result<f64> {
    match spec.kind {
        PotentialKind::FloryHuggins => f_fh_dv(u, v, &spec.params),
        PotentialKind::Cutoff { delta } => Ok(f_delta_dv(u, v, delta, &spec.params)),
    }
}

/// Hessian `(F_uu, F_uv, F_vv)`.
pub fn f_second(u: f64, v: f64, spec: &PotentialSpec) -> Result<(f64, f64, f64)> {
    let p = &spec.params;
    match spec.kind {
        PotentialKind::FloryHuggins => {
            let (wuu, wuv, wvv) = w_second(u, v, p);
            Ok((
                s_d2(u, p.theta_u, p.theta0_u)? + wuu,
                wuv,
                s_d2(v, p.theta_v, p.theta0_v)? + wvv,
            ))
        }
        PotentialKind::Cutoff { delta } => Ok(f_delta_second(u, v, delta, p)),
    }
}

/// Convex part of the splitting: the entropy that the time stepper treats
/// implicitly, as `(value, first, second)` derivatives.
///
/// For Flory–Huggins this is `fh_hat`; for the cutoff it is
/// `S_delta + theta0 s^2 / 2`, which coincides with `fh_hat` on the plateau.
pub(crate) fn implicit_part(s: f64, theta: f64, theta0: f64, kind: PotentialKind) -> Result<(f64, f64, f64)> {
    match kind {
        PotentialKind::FloryHuggins => Ok((fh_hat(s, theta)?, fh_hat_d1(s, theta)?, fh_hat_d2(s, theta)?)),
        PotentialKind::Cutoff { delta } => {
            if in_plateau(s, delta) {
                return Ok((fh_hat(s, theta)?, fh_hat_d1(s, theta)?, fh_hat_d2(s, theta)?));
            }
            let (v, d1, d2) = s_delta(s, delta, theta, theta0);
            Ok((v + 0.5 * theta0 * s * s, d1 + theta0 * s, d2 + theta0))
        }
    }
}

/// Diagnostic for the growth condition on `fh_hat'` near the endpoints:
/// `|ln delta|^rho / fh_hat'(1 - 2 delta)`. Tends to `2/theta` for `rho = 1`.
pub fn h2_ratio(delta: f64, theta: f64, rho: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidParameter { name: "delta", reason: format!("must lie in (0, 1/2), got {delta}") });
    }
    if !(rho > 0.5) {
        return Err(Error::InvalidParameter { name: "rho", reason: format!("must exceed 1/2, got {rho}") });
    }
    if !(theta > 0.0) {
        return Err(Error::InvalidParameter { name: "theta", reason: format!("must be positive, got {theta}") });
    }
    Ok(delta.ln().abs().powf(rho) / fh_hat_d1(1.0 - 2.0 * delta, theta)?)
}
