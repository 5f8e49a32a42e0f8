//! Free energies, chemical potentials and the discrete energy balance.

use crate::error::Result;
use crate::potentials::{self, PotentialSpec};
use crate::solver::State;
use crate::spectral::ScalarField;

/// The parts of `Psi`, `Psi_hat` and `Psi_tilde`. Parts that the requested
/// functional does not contain are zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergyBreakdown {
    /// `eps_u^2 / 2 ||grad u||^2`
    pub gradient_u: f64,
    pub gradient_v: f64,
    /// `int F(u, v)`
    pub potential: f64,
    /// `sigma / 2 ||v - mean v||_*^2`
    pub nonlocal_v: f64,
    /// `1/2 ||u - mean u||_*^2`
    pub fluct_u: f64,
    pub fluct_v: f64,
    /// `alpha_visc (1 + sigma) / 2 ||u - mean u||^2`
    pub visc_u: f64,
    pub visc_v: f64,
    pub psi: f64,
    pub psi_hat: f64,
    pub psi_tilde: f64,
}

impl EnergyBreakdown {
    fn close(mut self) -> Self {
        self.psi = self.gradient_u + self.gradient_v + self.potential;
        self.psi_hat = self.psi + self.fluct_u + self.fluct_v + self.visc_u + self.visc_v;
        self.psi_tilde = self.psi + self.nonlocal_v;
        self
    }

    pub const CSV_HEADER: &'static str = "gradient_u,gradient_v,potential,nonlocal_v,fluct_u,fluct_v,visc_u,visc_v,psi,psi_hat,psi_tilde";

    pub fn csv_row(&self) -> String {
        [
            self.gradient_u,
            self.gradient_v,
            self.potential,
            self.nonlocal_v,
            self.fluct_u,
            self.fluct_v,
            self.visc_u,
            self.visc_v,
            self.psi,
            self.psi_hat,
            self.psi_tilde,
        ]
        .iter()
        .map(|x| crate::snapshot::fmt_f64(*x))
        .collect::<Vec<_>>()
        .join(",")
    }
}

/// Applies `f(u_i, v_i)` nodewise.
pub fn pointwise(
    u: &ScalarField,
    v: &ScalarField,
    f: impl Fn(f64, f64) -> Result<f64>,
) -> Result<ScalarField> {
    u.ensure_same_grid(v)?;
    let values = u
        .values()
        .iter()
        .zip(v.values())
        .map(|(&a, &b)| f(a, b))
        .collect::<Result<Vec<_>>>()?;
    ScalarField::new(u.grid(), values)
}

fn potential_integral(u: &ScalarField, v: &ScalarField, spec: &PotentialSpec) -> Result<f64> {
    let density = pointwise(u, v, |a, b| potentials::f_value(a, b, spec))?;
    Ok(u.grid().cell_volume() * density.values().iter().sum::<f64>())
}

fn base(u: &ScalarField, v: &ScalarField, spec: &PotentialSpec) -> Result<EnergyBreakdown> {
    if spec.is_singular() {
        for field in [u, v] {
            if let Some(&value) = field.values().iter().find(|x| !(x.abs() < 1.0)) {
                return Err(crate::Error::DomainViolation { value });
            }
        }
    }
    let p = &spec.params;
    Ok(EnergyBreakdown {
        gradient_u: 0.5 * p.eps_u * p.eps_u * u.grad_norm_sq(),
        gradient_v: 0.5 * p.eps_v * p.eps_v * v.grad_norm_sq(),
        potential: potential_integral(u, v, spec)?,
        ..EnergyBreakdown::default()
    })
}

pub fn psi(u: &ScalarField, v: &ScalarField, spec: &PotentialSpec) -> Result<EnergyBreakdown> {
    Ok(base(u, v, spec)?.close())
}

pub fn psi_hat(
    u: &ScalarField,
    v: &ScalarField,
    spec: &PotentialSpec,
    include_visc: bool,
) -> Result<EnergyBreakdown> {
    let mut e = base(u, v, spec)?;
    e.fluct_u = 0.5 * u.vstar_sq_unchecked();
    e.fluct_v = 0.5 * v.vstar_sq_unchecked();
    let p = &spec.params;
    if include_visc && p.alpha_visc > 0.0 {
        let weight = 0.5 * p.alpha_visc * (1.0 + p.sigma);
        e.visc_u = weight * u.fluctuation().norm_l2().powi(2);
        e.visc_v = weight * v.fluctuation().norm_l2().powi(2);
    }
    Ok(e.close())
}

pub fn psi_tilde(u: &ScalarField, v: &ScalarField, spec: &PotentialSpec) -> Result<EnergyBreakdown> {
    let mut e = base(u, v, spec)?;
    e.nonlocal_v = 0.5 * spec.params.sigma * v.vstar_sq_unchecked();
    Ok(e.close())
}

/// Every part at once (`Psi_hat` without the viscous terms unless asked).
pub fn full_breakdown(
    u: &ScalarField,
    v: &ScalarField,
    spec: &PotentialSpec,
    include_visc: bool,
) -> Result<EnergyBreakdown> {
    let mut e = psi_hat(u, v, spec, include_visc)?;
    e.nonlocal_v = spec.params.sigma * e.fluct_v;
    Ok(e.close())
}

/// `mu = -eps_u^2 Lap u + dF/du`.
pub fn mu_of(u: &ScalarField, v: &ScalarField, spec: &PotentialSpec) -> Result<ScalarField> {
    mu_of_viscous(u, v, spec, None)
}

/// `mu` of the viscous system: adds `alpha_visc du/dt` when a rate is given.
pub fn mu_of_viscous(
    u: &ScalarField,
    v: &ScalarField,
    spec: &PotentialSpec,
    dudt: Option<&ScalarField>,
) -> Result<ScalarField> {
    let p = &spec.params;
    let df = pointwise(u, v, |a, b| potentials::f_du(a, b, spec))?;
    let mut mu = df.add_scaled(-p.eps_u * p.eps_u, &u.laplacian());
    if let Some(rate) = dudt {
        u.ensure_same_grid(rate)?;
        mu = mu.add_scaled(p.alpha_visc, rate);
    }
    Ok(mu)
}

/// `phi = -eps_v^2 Lap v + dF/dv (+ alpha_visc dv/dt)`.
pub fn phi_of(
    u: &ScalarField,
    v: &ScalarField,
    spec: &PotentialSpec,
    dvdt: Option<&ScalarField>,
) -> Result<ScalarField> {
    let p = &spec.params;
    let df = pointwise(u, v, |a, b| potentials::f_dv(a, b, spec))?;
    let mut phi = df.add_scaled(-p.eps_v * p.eps_v, &v.laplacian());
    if let Some(rate) = dvdt {
        v.ensure_same_grid(rate)?;
        phi = phi.add_scaled(p.alpha_visc, rate);
    }
    Ok(phi)
}

/// `phi_tilde = phi + sigma N(v - mean v)`.
pub fn phi_tilde_of(u: &ScalarField, v: &ScalarField, spec: &PotentialSpec) -> Result<ScalarField> {
    let phi = phi_of(u, v, spec, None)?;
    Ok(phi.add_scaled(spec.params.sigma, &nonlocal_potential(v)))
}

/// `N(v - mean v)`.
pub fn nonlocal_potential(v: &ScalarField) -> ScalarField {
    let grid = v.grid();
    ScalarField::new(grid, grid.inverse_laplacian_values(v.values())).expect("finite input")
}

/// Terms of the discrete energy balance at the end of a step.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyBalance {
    pub psi_tilde_prev: f64,
    pub psi_tilde_next: f64,
    pub grad_mu_sq: f64,
    pub grad_phitilde_sq: f64,
    /// `sigma (mean v - c) int phi`
    pub oono_source: f64,
    pub residual: f64,
}

/// Signed residual of
/// `(Psi_tilde(next) - Psi_tilde(prev)) / tau + ||grad mu||^2 + ||grad phi_tilde||^2
///  + sigma (mean v - c) int phi`, all dissipation terms evaluated at `next`.
pub fn energy_identity_residual(prev: &State, next: &State, tau: f64, spec: &PotentialSpec) -> Result<f64> {
    Ok(energy_balance(prev, next, tau, spec)?.residual)
}

pub fn energy_balance(prev: &State, next: &State, tau: f64, spec: &PotentialSpec) -> Result<EnergyBalance> {
    prev.u.ensure_same_grid(&next.u)?;
    if !(tau > 0.0) {
        return Err(crate::Error::InvalidParameter { name: "tau", reason: format!("must be positive, got {tau}") });
    }
    let p = &spec.params;
    let before = psi_tilde(&prev.u, &prev.v, spec)?.psi_tilde;
    let after = psi_tilde(&next.u, &next.v, spec)?.psi_tilde;
    let mu = mu_of(&next.u, &next.v, spec)?;
    let phi = phi_of(&next.u, &next.v, spec, None)?;
    let phi_tilde = phi.add_scaled(p.sigma, &nonlocal_potential(&next.v));
    let grad_mu_sq = mu.grad_norm_sq();
    let grad_phitilde_sq = phi_tilde.grad_norm_sq();
    let oono_source = p.sigma * (next.v.mean() - p.c) * phi.mean() * next.v.grid().measure();
    Ok(EnergyBalance {
        psi_tilde_prev: before,
        psi_tilde_next: after,
        grad_mu_sq,
        grad_phitilde_sq,
        oono_source,
        residual: (after - before) / tau + grad_mu_sq + grad_phitilde_sq + oono_source,
    })
}

/// Lower bound `-|Omega| (theta0_u + theta0_v)/2 - |Omega| max_{[-1,1]^2} |W|`
/// for `Psi` (`W` is maximized over the corners and a coarse interior sweep).
pub fn psi_lower_bound(spec: &PotentialSpec, measure: f64) -> f64 {
    let p = &spec.params;
    let mut w_max = 0.0f64;
    let k = 64;
    for i in 0..=k {
        for j in 0..=k {
            let u = -1.0 + 2.0 * i as f64 / k as f64;
            let v = -1.0 + 2.0 * j as f64 / k as f64;
            w_max = w_max.max(potentials::w_value(u, v, p).abs());
        }
    }
    // |W| <= |a| + |b| + |c| on the square; take the larger of both bounds.
    let crude = p.coupling_a.abs() + p.coupling_b.abs() + p.coupling_c.abs();
    -measure * 0.5 * (p.theta0_u + p.theta0_v) - measure * w_max.max(crude)
}
