//! Stationary states with mass constraints, and the scalar elliptic problem
//! `-Lap u + S'(u) = f`.

use crate::energy::{nonlocal_potential, pointwise};
use crate::error::{Error, Result};
use crate::potentials::{self, PotentialSpec};
use crate::solver::krylov::scaled_spectral_inverse;
use crate::solver::{gmres, pcg, State};
use crate::spectral::{Grid, ScalarField};

const MAX_NEWTON: usize = 60;
const MAX_BACKTRACK: usize = 40;
const KRYLOV_MAX_ITER: usize = 2000;
const RETREAT: f64 = 0.99;
const MARGIN: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SteadySolution {
    pub state: State,
    /// Mean chemical potentials `(mean mu, mean phi)`.
    pub multipliers: (f64, f64),
    pub iterations: usize,
    pub residual: (f64, f64),
}

fn l2(grid: &Grid, values: &[f64]) -> f64 {
    grid.dot(values, values).sqrt()
}

fn remove_mean(grid: &Grid, values: &mut [f64]) -> f64 {
    let mean = grid.mean_of(values);
    values.iter_mut().for_each(|x| *x -= mean);
    mean
}

/// Fraction of `dir` admissible from `w` (strictly inside `(-1, 1)`).
fn step_limit(w: &[f64], dir: &[f64]) -> f64 {
    let bound = 1.0 - MARGIN;
    let mut limit = f64::INFINITY;
    for (&x, &d) in w.iter().zip(dir) {
        if d > 0.0 {
            limit = limit.min(((bound - x) / d).max(0.0));
        } else if d < 0.0 {
            limit = limit.min(((-bound - x) / d).max(0.0));
        }
    }
    if limit >= 1.0 {
        1.0
    } else {
        RETREAT * limit
    }
}

/// Moves `field` onto the mean `target`, scaling its fluctuation down if that
/// would leave `(-1, 1)`.
fn with_mean(field: &ScalarField, target: f64) -> Result<ScalarField> {
    let mean = field.mean();
    let mut kappa = 1.0f64;
    let bound = 1.0 - MARGIN;
    for &x in field.values() {
        let f = x - mean;
        if f > 0.0 && target + f > bound {
            kappa = kappa.min(RETREAT * (bound - target) / f);
        } else if f < 0.0 && target + f < -bound {
            kappa = kappa.min(RETREAT * (-bound - target) / f);
        }
    }
    ScalarField::new(field.grid(), field.values().iter().map(|x| target + kappa * (x - mean)).collect())
}

/// Mean-free residuals of both stationary equations, with the multipliers.
fn residuals(u: &ScalarField, v: &ScalarField, spec: &PotentialSpec) -> Result<(Vec<f64>, Vec<f64>, f64, f64)> {
    let p = &spec.params;
    let grid = u.grid();
    let fu = pointwise(u, v, |a, b| potentials::f_du(a, b, spec))?;
    let fv = pointwise(u, v, |a, b| potentials::f_dv(a, b, spec))?;
    let lap_u = u.laplacian();
    let lap_v = v.laplacian();
    let nl = nonlocal_potential(v);
    let mut ru: Vec<f64> = (0..grid.len())
        .map(|i| -p.eps_u * p.eps_u * lap_u.values()[i] + fu.values()[i])
        .collect();
    let mut rv: Vec<f64> = (0..grid.len())
        .map(|i| -p.eps_v * p.eps_v * lap_v.values()[i] + fv.values()[i] + p.sigma * nl.values()[i])
        .collect();
    let mu = remove_mean(grid, &mut ru);
    let phi = remove_mean(grid, &mut rv);
    Ok((ru, rv, mu, phi))
}

/// `L^2` norms of the mean-free residuals of
/// `-eps_u^2 Lap u + F_u = const` and `-eps_v^2 Lap v + F_v + sigma N(v - mean v) = const`.
pub fn stationary_residual(state: &State, spec: &PotentialSpec) -> Result<(f64, f64)> {
    let (ru, rv, _, _) = residuals(&state.u, &state.v, spec)?;
    let grid = state.grid();
    Ok((l2(grid, &ru), l2(grid, &rv)))
}

/// Newton on the stationary system with `mean u = u_mean_target` and
/// `mean v = c`, starting from `guess`. Converges to whichever equilibrium
/// the guess leads to.
pub fn solve_stationary(guess: &State, spec: &PotentialSpec, u_mean_target: f64, tol: f64) -> Result<SteadySolution> {
    if !(u_mean_target.abs() < 1.0) {
        return Err(Error::MeanInfeasible(u_mean_target));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter { name: "tol", reason: format!("must be positive, got {tol}") });
    }
    let p = &spec.params;
    if !(p.c.abs() < 1.0) {
        return Err(Error::MeanInfeasible(p.c));
    }
    guess.check_bounds()?;
    let grid = guess.grid().clone();
    let n = grid.len();
    let singular = spec.is_singular();
    let mut u = with_mean(&guess.u, u_mean_target)?;
    let mut v = with_mean(&guess.v, p.c)?;

    let (mut ru, mut rv, mut mu, mut phi) = residuals(&u, &v, spec)?;
    let norm = |ru: &[f64], rv: &[f64]| (l2(&grid, ru).powi(2) + l2(&grid, rv).powi(2)).sqrt();
    let mut res = norm(&ru, &rv);
    let mut iterations = 0;
    let (eu2, ev2, sigma) = (p.eps_u * p.eps_u, p.eps_v * p.eps_v, p.sigma);

    while l2(&grid, &ru) > tol || l2(&grid, &rv) > tol {
        if iterations >= MAX_NEWTON {
            return Err(Error::NewtonDiverged { iterations, residual: res });
        }
        iterations += 1;

        let second = u
            .values()
            .iter()
            .zip(v.values())
            .map(|(&a, &b)| potentials::f_second(a, b, spec))
            .collect::<Result<Vec<_>>>()?;
        let apply = |x: &[f64], y: &mut [f64]| {
            let (xu, xv) = x.split_at(n);
            let su = grid.apply_symbol(xu, |l| eu2 * l);
            let sv = grid.apply_symbol(xv, |l| if l > 0.0 { ev2 * l + sigma / l } else { 0.0 });
            let (yu, yv) = y.split_at_mut(n);
            for i in 0..n {
                let (fuu, fuv, fvv) = second[i];
                yu[i] = fuu * xu[i] + fuv * xv[i];
                yv[i] = fuv * xu[i] + fvv * xv[i];
            }
            let (mu_, mv_) = (grid.mean_of(yu), grid.mean_of(yv));
            for i in 0..n {
                yu[i] += su[i] - mu_;
                yv[i] += sv[i] - mv_;
            }
        };
        let duu: Vec<f64> = second.iter().map(|s| s.0).collect();
        let dvv: Vec<f64> = second.iter().map(|s| s.2).collect();
        let pre_u = scaled_spectral_inverse(&grid, &duu, |l| eu2 * l, true);
        let pre_v = scaled_spectral_inverse(&grid, &dvv, |l| if l > 0.0 { ev2 * l + sigma / l } else { 0.0 }, true);
        let precond = |r: &[f64], z: &mut [f64]| {
            let (zu, zv) = z.split_at_mut(n);
            pre_u(&r[..n], zu);
            pre_v(&r[n..], zv);
        };
        let rhs: Vec<f64> = ru.iter().chain(&rv).map(|x| -x).collect();
        let mut delta = vec![0.0; 2 * n];
        let atol = (1e-8 * res).max(0.01 * tol);
        gmres(apply, precond, &rhs, &mut delta, grid.cell_volume(), atol, 60, KRYLOV_MAX_ITER);
        let (du, dv) = delta.split_at_mut(n);
        remove_mean(&grid, du);
        remove_mean(&grid, dv);

        let mut s = if singular { step_limit(u.values(), du).min(step_limit(v.values(), dv)) } else { 1.0 };
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACK {
            let tu = ScalarField::new(&grid, u.values().iter().zip(&*du).map(|(x, d)| x + s * d).collect())?;
            let tv = ScalarField::new(&grid, v.values().iter().zip(&*dv).map(|(x, d)| x + s * d).collect())?;
            if let Ok((nru, nrv, nmu, nphi)) = residuals(&tu, &tv, spec) {
                let next = norm(&nru, &nrv);
                if next <= (1.0 - 1e-4 * s) * res {
                    (u, v, ru, rv, mu, phi, res) = (tu, tv, nru, nrv, nmu, nphi, next);
                    accepted = true;
                    break;
                }
            }
            s *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDiverged { iterations, residual: res });
        }
    }

    // Pin the means exactly; the updates were mean-free up to roundoff.
    let fix = |f: &ScalarField, m: f64| f.map(|x| x + (m - f.mean()));
    let u = fix(&u, u_mean_target);
    let v = fix(&v, p.c);
    let state = State::new(guess.t, u, v)?;
    let residual = stationary_residual(&state, spec)?;
    Ok(SteadySolution { state, multipliers: (mu, phi), iterations, residual })
}

/// Solves `-Lap u + S'(u) = f` with homogeneous Neumann conditions, where
/// `S'(s) = (theta/2) ln((1+s)/(1-s))`.
///
/// Stops once the `L^2` residual is below `tol`, or below the level that
/// rounding in `S'` allows when that is larger.
pub fn elliptic_solve(f: &ScalarField, theta: f64, tol: f64) -> Result<ScalarField> {
    if !(theta > 0.0) {
        return Err(Error::InvalidParameter { name: "theta", reason: format!("must be positive, got {theta}") });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter { name: "tol", reason: format!("must be positive, got {tol}") });
    }
    let grid = f.grid();
    let h = grid.cell_volume();
    let rhs = f.values();
    // Starting deep inside keeps Newton off the barrier, where its steps stall.
    let mut w: Vec<f64> = rhs.iter().map(|x| (x / theta).tanh().clamp(-0.99, 0.99)).collect();

    struct Eval {
        residual: Vec<f64>,
        norm: f64,
        floor: f64,
        objective: f64,
        curvature: Vec<f64>,
    }
    let evaluate = |w: &[f64]| -> Result<Eval> {
        let coeffs = grid.forward(w);
        let gradient: f64 = coeffs.iter().zip(grid.eigenvalues()).map(|(c, l)| 0.5 * l * c * c).sum();
        let lap = grid.inverse(&coeffs.iter().zip(grid.eigenvalues()).map(|(c, l)| c * l).collect::<Vec<_>>());
        let mut residual = vec![0.0; w.len()];
        let mut curvature = vec![0.0; w.len()];
        let mut integral = 0.0;
        let mut sensitivity = 0.0;
        for i in 0..w.len() {
            let d1 = potentials::fh_hat_d1(w[i], theta)?;
            curvature[i] = potentials::fh_hat_d2(w[i], theta)?;
            residual[i] = lap[i] + d1 - rhs[i];
            integral += potentials::fh_hat(w[i], theta)? - rhs[i] * w[i];
            sensitivity += (curvature[i] * w[i]).powi(2) + d1 * d1 + rhs[i] * rhs[i] + lap[i] * lap[i];
        }
        let norm = (h * residual.iter().map(|r| r * r).sum::<f64>()).sqrt();
        let floor = 64.0 * f64::EPSILON * (h * sensitivity).sqrt();
        Ok(Eval { residual, norm, floor, objective: gradient + h * integral, curvature })
    };

    let mut eval = evaluate(&w)?;
    let mut iterations = 0;
    let mut delta = vec![0.0; w.len()];
    while eval.norm > tol.max(eval.floor) {
        if iterations >= MAX_NEWTON {
            return Err(Error::NewtonDiverged { iterations, residual: eval.norm });
        }
        iterations += 1;
        let curvature = &eval.curvature;
        let apply = |x: &[f64], y: &mut [f64]| {
            let s = grid.apply_symbol(x, |l| l);
            for i in 0..x.len() {
                y[i] = s[i] + curvature[i] * x[i];
            }
        };
        let precond = scaled_spectral_inverse(grid, curvature, |l| l, false);
        let rhs_newton: Vec<f64> = eval.residual.iter().map(|r| -r).collect();
        let atol = (1e-8 * eval.norm).max(0.01 * tol);
        pcg(apply, precond, &rhs_newton, &mut delta, h, atol, KRYLOV_MAX_ITER);

        let slope = grid.dot(&eval.residual, &delta);
        let mut s = step_limit(&w, &delta);
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let trial: Vec<f64> = w.iter().zip(&delta).map(|(x, d)| x + s * d).collect();
            if let Ok(next) = evaluate(&trial) {
                if next.norm <= (1.0 - 1e-4 * s) * eval.norm || next.objective <= eval.objective + 1e-4 * s * slope {
                    accepted = Some((trial, next));
                    break;
                }
            }
            s *= 0.5;
        }
        match accepted {
            Some((trial, next)) => {
                w = trial;
                eval = next;
            }
            None => return Err(Error::NewtonDiverged { iterations, residual: eval.norm }),
        }
    }
    ScalarField::new(grid, w)
}

/// `(||u||_H2, ||S'(u)||_L2)`, the left side of the elliptic estimate.
pub fn elliptic_estimate_terms(u: &ScalarField, theta: f64) -> Result<(f64, f64)> {
    let d1 = u
        .values()
        .iter()
        .map(|&s| potentials::fh_hat_d1(s, theta))
        .collect::<Result<Vec<_>>>()?;
    Ok((u.norm_h2(), l2(u.grid(), &d1)))
}

/// Smallest `C` with `||u||_H2 + ||S'(u)|| <= C (1 + ||f||)` over the
/// ensemble, solving each member to `tol`.
pub fn elliptic_constant(ensemble: &[ScalarField], theta: f64, tol: f64) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(Error::InsufficientData("empty forcing ensemble".into()));
    }
    let mut c = 0.0f64;
    for f in ensemble {
        let u = elliptic_solve(f, theta, tol)?;
        let (h2, sd) = elliptic_estimate_terms(&u, theta)?;
        c = c.max((h2 + sd) / (1.0 + f.norm_l2()));
    }
    Ok(c)
}
