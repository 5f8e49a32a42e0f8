//! Safeguarded Newton for one component of the split step.
//!
//! With the coupling frozen, each component solves a mean-constrained
//! convex problem. Writing it against `N` instead of `-Lap` gives the residual
//!
//! ```text
//! G(w) = a N(w) - N(w_old - m_old)/tau - eps^2 Lap w + P[d(w) + g + visc (w - w_old)]
//! ```
//!
//! on mean-zero perturbations, where `P` removes the mean and `d` is the
//! implicit (convex) derivative. `G` is the `L^2` gradient of
//!
//! ```text
//! J(w) = a/2 |w|_*^2 - <N(w_old - m_old)/tau, w> + eps^2/2 |grad w|^2
//!        + int [D(w) + g w + visc/2 (w - w_old)^2].
//! ```

use crate::error::{Error, Result};
use crate::potentials::{self, PotentialKind};
use crate::spectral::Grid;

use super::krylov::{gmres, pcg, scaled_spectral_inverse};

/// Inputs of one component solve.
pub(crate) struct ComponentProblem<'a> {
    pub grid: &'a Grid,
    pub old: &'a [f64],
    pub target_mean: f64,
    /// Coefficient of `N(w)`: `1/tau`, plus `sigma` for the reactive component.
    pub a: f64,
    pub tau: f64,
    pub eps2: f64,
    /// `alpha_visc / tau`, zero without viscosity.
    pub visc: f64,
    pub theta: f64,
    pub theta0: f64,
    pub kind: PotentialKind,
    /// Explicit part of the chemical potential, nodewise.
    pub explicit: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub margin: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct ComponentOutcome {
    pub newton_iters: usize,
    pub krylov_iters: usize,
    pub residual: f64,
}

struct Eval {
    residual: Vec<f64>,
    norm: f64,
    /// Sum of the norms of the individual terms, for the roundoff floor.
    scale: f64,
    objective: f64,
    /// Nodewise `d'(w) + visc`.
    curvature: Vec<f64>,
}

const MAX_BACKTRACK: usize = 40;
const FRACTION_TO_BOUNDARY: f64 = 0.99;
const KRYLOV_MAX_ITER: usize = 400;

impl ComponentProblem<'_> {
    fn singular(&self) -> bool {
        matches!(self.kind, PotentialKind::FloryHuggins)
    }

    fn evaluate(&self, w: &[f64], n_old: &[f64]) -> Result<Eval> {
        let grid = self.grid;
        let h = grid.cell_volume();
        let mut coeffs = grid.forward(w);
        let mut quadratic = 0.0;
        for (c, &lambda) in coeffs.iter_mut().zip(grid.eigenvalues()) {
            if lambda > 0.0 {
                let symbol = self.a / lambda + self.eps2 * lambda;
                quadratic += 0.5 * symbol * *c * *c;
                *c *= symbol;
            } else {
                *c = 0.0;
            }
        }
        let mut residual = grid.inverse(&coeffs);

        let n = w.len();
        let mut local = vec![0.0; n];
        let mut curvature = vec![0.0; n];
        let mut integrand = 0.0;
        for i in 0..n {
            let (d0, d1, d2) = potentials::implicit_part(w[i], self.theta, self.theta0, self.kind)?;
            let jump = w[i] - self.old[i];
            local[i] = d1 + self.explicit[i] + self.visc * jump;
            curvature[i] = d2 + self.visc;
            integrand += d0 + self.explicit[i] * w[i] + 0.5 * self.visc * jump * jump;
        }
        let local_mean = grid.mean_of(&local);
        // Evaluating d at a rounded w costs about eps |d'(w) w|.
        let sensitivity: Vec<f64> = curvature.iter().zip(w).map(|(c, x)| c * x.abs()).collect();

        // Rounding w itself costs about eps |S| |w| through the linear part.
        let mut scale = l2(grid, &residual)
            + l2(grid, n_old)
            + l2(grid, &local)
            + l2(grid, &sensitivity)
            + self.max_symbol() * l2(grid, w);
        let mut norm_sq = 0.0;
        for i in 0..n {
            residual[i] += local[i] - local_mean - n_old[i];
            norm_sq += residual[i] * residual[i];
        }
        scale += local_mean.abs() * grid.measure().sqrt();
        let objective = quadratic - grid.dot(n_old, w) + h * integrand;
        Ok(Eval { residual, norm: (h * norm_sq).sqrt(), scale, objective, curvature })
    }

    /// Largest value of the linear symbol `a / lambda + eps^2 lambda`.
    fn max_symbol(&self) -> f64 {
        self.grid
            .eigenvalues()
            .iter()
            .filter(|&&l| l > 0.0)
            .map(|&l| self.a / l + self.eps2 * l)
            .fold(0.0, f64::max)
    }

    /// Largest admissible fraction of `dir` from `w`, with the retreat applied.
    fn step_limit(&self, w: &[f64], dir: &[f64]) -> f64 {
        if !self.singular() {
            return 1.0;
        }
        let bound = 1.0 - self.margin;
        let mut limit = f64::INFINITY;
        for (&x, &d) in w.iter().zip(dir) {
            let room = if d > 0.0 {
                (bound - x) / d
            } else if d < 0.0 {
                (-bound - x) / d
            } else {
                continue;
            };
            limit = limit.min(room.max(0.0));
        }
        if limit >= 1.0 {
            1.0
        } else {
            FRACTION_TO_BOUNDARY * limit
        }
    }

    /// Starting iterate: the old fluctuation moved onto the new mean, shrunk
    /// if needed so that it stays admissible.
    fn initial_guess(&self) -> Vec<f64> {
        let grid = self.grid;
        let old_mean = grid.mean_of(self.old);
        let m = self.target_mean;
        let fluct: Vec<f64> = self.old.iter().map(|x| x - old_mean).collect();
        let mut kappa = 1.0f64;
        if self.singular() {
            let bound = 1.0 - self.margin;
            for &f in &fluct {
                if f > 0.0 && m + f > bound {
                    kappa = kappa.min(FRACTION_TO_BOUNDARY * (bound - m) / f);
                } else if f < 0.0 && m + f < -bound {
                    kappa = kappa.min(FRACTION_TO_BOUNDARY * (-bound - m) / f);
                }
            }
        }
        fluct.iter().map(|f| m + kappa * f).collect()
    }

    pub fn solve(&self) -> Result<(Vec<f64>, ComponentOutcome)> {
        let grid = self.grid;
        let old_mean = grid.mean_of(self.old);
        let old_fluct: Vec<f64> = self.old.iter().map(|x| x - old_mean).collect();
        let n_old: Vec<f64> = grid
            .inverse_laplacian_values(&old_fluct)
            .into_iter()
            .map(|x| x / self.tau)
            .collect();

        let mut w = self.initial_guess();
        let mut eval = self.evaluate(&w, &n_old)?;
        let initial_norm = eval.norm;
        let mut outcome = ComponentOutcome::default();
        let target = |eval: &Eval| {
            (self.tol * initial_norm)
                .max(1e-14)
                .max(64.0 * f64::EPSILON * eval.scale)
        };

        let mut delta = vec![0.0; w.len()];
        let mut trial = vec![0.0; w.len()];
        loop {
            if eval.norm <= target(&eval) {
                break;
            }
            if outcome.newton_iters >= self.max_iter {
                return Err(Error::NewtonDiverged { iterations: outcome.newton_iters, residual: eval.norm });
            }
            outcome.newton_iters += 1;

            // Newton direction from J delta = -G on mean-zero fields.
            let rhs: Vec<f64> = eval.residual.iter().map(|r| -r).collect();
            let curvature = &eval.curvature;
            let (a, eps2) = (self.a, self.eps2);
            let apply = |x: &[f64], y: &mut [f64]| {
                let spectral = grid.apply_symbol(x, |l| if l > 0.0 { a / l + eps2 * l } else { 0.0 });
                let mut mean = 0.0;
                for i in 0..x.len() {
                    y[i] = curvature[i] * x[i];
                    mean += y[i];
                }
                mean /= x.len() as f64;
                for i in 0..x.len() {
                    y[i] += spectral[i] - mean;
                }
            };
            let precond = scaled_spectral_inverse(grid, curvature, |l| if l > 0.0 { a / l + eps2 * l } else { 0.0 }, true);
            // Inexact Newton: loose solves far out, tight ones near the root.
            let forcing = (eval.norm / initial_norm).sqrt().clamp(1e-6, 1e-2);
            let atol = (forcing * eval.norm).max(0.1 * target(&eval));
            let krylov = if curvature.iter().all(|&c| c >= 0.0) {
                pcg(apply, precond, &rhs, &mut delta, grid.cell_volume(), atol, KRYLOV_MAX_ITER)
            } else {
                gmres(apply, precond, &rhs, &mut delta, grid.cell_volume(), atol, 40, KRYLOV_MAX_ITER)
            };
            outcome.krylov_iters += krylov.iterations;
            let delta_mean = grid.mean_of(&delta);
            delta.iter_mut().for_each(|d| *d -= delta_mean);

            let slope = grid.dot(&eval.residual, &delta);
            let mut s = self.step_limit(&w, &delta);
            let mut accepted = None;
            for _ in 0..MAX_BACKTRACK {
                for i in 0..w.len() {
                    trial[i] = w[i] + s * delta[i];
                }
                if let Ok(next) = self.evaluate(&trial, &n_old) {
                    let decrease = next.norm <= (1.0 - 1e-4 * s) * eval.norm;
                    let armijo = slope < 0.0 && next.objective <= eval.objective + 1e-4 * s * slope;
                    if decrease || armijo {
                        accepted = Some(next);
                        break;
                    }
                }
                s *= 0.5;
            }
            match accepted {
                Some(next) => {
                    std::mem::swap(&mut w, &mut trial);
                    eval = next;
                }
                None => {
                    return Err(Error::NewtonDiverged { iterations: outcome.newton_iters, residual: eval.norm });
                }
            }
        }

        let drift = self.target_mean - grid.mean_of(&w);
        w.iter_mut().for_each(|x| *x += drift);
        outcome.residual = eval.norm;
        Ok((w, outcome))
    }
}

fn l2(grid: &Grid, values: &[f64]) -> f64 {
    grid.dot(values, values).sqrt()
}
