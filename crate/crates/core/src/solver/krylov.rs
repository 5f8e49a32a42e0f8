//! Preconditioned Krylov solvers on flat node vectors.
//!
//! Norms are the physical `L^2` norm: `weight` is the cell volume.

use crate::spectral::Grid;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovOutcome {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64], weight: f64) -> f64 {
    (weight * dot(a, a)).sqrt()
}

/// Conjugate gradients for a symmetric positive definite operator.
///
/// Starts from `x = 0` and stops once `||b - A x|| <= atol`. Breaks off on
/// non-positive curvature and reports `converged = false`.
pub fn pcg(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    mut precond: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    weight: f64,
    atol: f64,
    max_iter: usize,
) -> KrylovOutcome {
    let n = b.len();
    x.iter_mut().for_each(|v| *v = 0.0);
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut res = norm(&r, weight);
    if res <= atol {
        return KrylovOutcome { iterations: 0, residual: res, converged: true };
    }
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            return KrylovOutcome { iterations: it, residual: res, converged: false };
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm(&r, weight);
        if res <= atol {
            return KrylovOutcome { iterations: it, residual: res, converged: true };
        }
        precond(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    KrylovOutcome { iterations: max_iter, residual: res, converged: false }
}

/// Restarted GMRES with right preconditioning, starting from `x = 0`.
#[allow(clippy::too_many_arguments)]
pub fn gmres(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    mut precond: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    weight: f64,
    atol: f64,
    restart: usize,
    max_iter: usize,
) -> KrylovOutcome {
    let n = b.len();
    x.iter_mut().for_each(|v| *v = 0.0);
    let mut work = vec![0.0; n];
    let mut total = 0;
    let mut r = b.to_vec();
    let mut res = norm(&r, weight);

    while total < max_iter {
        if res <= atol {
            return KrylovOutcome { iterations: total, residual: res, converged: true };
        }
        let m = restart.min(max_iter - total).max(1);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut precond_basis: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = res;
        basis.push(r.iter().map(|v| v / res).collect());

        let mut k = 0;
        while k < m {
            let mut z = vec![0.0; n];
            precond(&basis[k], &mut z);
            apply(&z, &mut work);
            precond_basis.push(z);
            // Modified Gram-Schmidt, weighted inner product.
            for (j, q) in basis.iter().enumerate() {
                let hij = weight * dot(&work, q);
                h[j][k] = hij;
                work.iter_mut().zip(q).for_each(|(w, qv)| *w -= hij * qv);
            }
            let hnext = norm(&work, weight);
            h[k + 1][k] = hnext;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                k += 1;
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k += 1;
            if g[k].abs() <= atol || hnext == 0.0 {
                break;
            }
            basis.push(work.iter().map(|v| v / hnext).collect());
        }

        // Back substitution on the k x k triangle.
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for j in i + 1..k {
                acc -= h[i][j] * y[j];
            }
            y[i] = if h[i][i] != 0.0 { acc / h[i][i] } else { 0.0 };
        }
        for (yj, z) in y.iter().zip(&precond_basis) {
            x.iter_mut().zip(z).for_each(|(xv, zv)| *xv += yj * zv);
        }
        apply(x, &mut work);
        for i in 0..n {
            r[i] = b[i] - work[i];
        }
        let new_res = norm(&r, weight);
        if new_res <= atol {
            return KrylovOutcome { iterations: total, residual: new_res, converged: true };
        }
        if new_res >= res && k < m {
            // Happy breakdown without progress: the true residual is at its floor.
            return KrylovOutcome { iterations: total, residual: new_res, converged: false };
        }
        res = new_res;
    }
    KrylovOutcome { iterations: total, residual: res, converged: res <= atol }
}

/// Preconditioner for `S + diag(d)` where `S` is diagonal in the cosine basis
/// with symbol `symbol(lambda)`.
///
/// Applies `E (S + c)^-1 E` with `E_i = sqrt((s + c) / (d_i + s))`, where `s`
/// is the mean of the symbol and `c = max(min d, 0)`. Nodes dominated by the
/// local term are thereby scaled like a Jacobi step. With `mean_free` the
/// constant mode is dropped and the output projected to mean zero.
pub(crate) fn scaled_spectral_inverse<'a>(
    grid: &'a Grid,
    d: &[f64],
    symbol: impl Fn(f64) -> f64,
    mean_free: bool,
) -> impl Fn(&[f64], &mut [f64]) + 'a {
    let symbols: Vec<f64> = grid.eigenvalues().iter().map(|&l| symbol(l)).collect();
    let active: Vec<f64> = symbols
        .iter()
        .zip(grid.eigenvalues())
        .filter(|(_, &l)| !mean_free || l > 0.0)
        .map(|(s, _)| *s)
        .collect();
    let s_bar = active.iter().sum::<f64>() / active.len().max(1) as f64;
    let shift = d.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0);
    let scale: Vec<f64> = d.iter().map(|&di| ((s_bar + shift) / (di.max(0.0) + s_bar)).sqrt()).collect();
    let inverse: Vec<f64> = symbols
        .iter()
        .zip(grid.eigenvalues())
        .map(|(&s, &l)| if mean_free && l == 0.0 { 0.0 } else { 1.0 / (s + shift) })
        .collect();
    move |r: &[f64], z: &mut [f64]| {
        let scaled: Vec<f64> = r.iter().zip(&scale).map(|(a, b)| a * b).collect();
        let mut coeffs = grid.forward(&scaled);
        coeffs.iter_mut().zip(&inverse).for_each(|(c, m)| *c *= m);
        let out = grid.inverse(&coeffs);
        for i in 0..z.len() {
            z[i] = out[i] * scale[i];
        }
        if mean_free {
            let mean = grid.mean_of(z);
            z.iter_mut().for_each(|x| *x -= mean);
        }
    }
}
