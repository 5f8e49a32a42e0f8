//! Tensor-product Neumann grids and the cosine spectral calculus on them.
//!
//! Nodes sit at cell midpoints `x_i = (i + 1/2) h`. On those points the
//! orthonormal DCT-II / DCT-III pair diagonalizes the homogeneous Neumann
//! Laplacian, whose eigenvalues are taken as the exact continuous values
//! `lambda_k = sum_axes (pi k_axis / L_axis)^2`.
//!
//! Spectral coefficients are normalized against the `L^2(Omega)`-orthonormal
//! cosine basis, so Parseval reads `h^d sum f_i^2 = sum F_k^2`.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

use crate::error::{Error, Result};

/// Relative tolerance on the mean used to gate the inverse operator `N`.
pub const MEAN_ZERO_TOLERANCE: f64 = 1e-10;

pub const MAX_DIM: usize = 3;
pub const MIN_NODES: usize = 8;

struct GridInner {
    n: Vec<usize>,
    length: Vec<f64>,
    spacing: Vec<f64>,
    eigenvalues: Vec<f64>,
    plans: Vec<Arc<dyn TransformType2And3<f64>>>,
}

/// An axis-aligned box `[0, L_0] x ... x [0, L_{d-1}]` with `n_a` midpoint
/// nodes per axis. Cloning is cheap; all clones share the transform plans.
#[derive(Clone)]
pub struct Grid(Arc<GridInner>);

impl Grid {
    pub fn new(n: &[usize], length: &[f64]) -> Result<Grid> {
        if n.is_empty() || n.len() > MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "dimension must be in 1..={MAX_DIM}, got {}",
                n.len()
            )));
        }
        if n.len() != length.len() {
            return Err(Error::InvalidGrid(format!(
                "{} node counts but {} lengths",
                n.len(),
                length.len()
            )));
        }
        if let Some(&bad) = n.iter().find(|&&k| k < MIN_NODES) {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_NODES} nodes per axis, got {bad}"
            )));
        }
        if let Some(&bad) = length.iter().find(|&&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::InvalidGrid(format!("length must be positive, got {bad}")));
        }

        let spacing: Vec<f64> = n.iter().zip(length).map(|(&k, &l)| l / k as f64).collect();
        let mut planner = DctPlanner::new();
        let plans = n.iter().map(|&k| planner.plan_dct2(k)).collect();

        let total: usize = n.iter().product();
        let mut eigenvalues = vec![0.0; total];
        for (flat, lambda) in eigenvalues.iter_mut().enumerate() {
            let mut rem = flat;
            let mut acc = 0.0;
            for axis in (0..n.len()).rev() {
                let k = rem % n[axis];
                rem /= n[axis];
                let wave = std::f64::consts::PI * k as f64 / length[axis];
                acc += wave * wave;
            }
            *lambda = acc;
        }

        Ok(Grid(Arc::new(GridInner {
            n: n.to_vec(),
            length: length.to_vec(),
            spacing,
            eigenvalues,
            plans,
        })))
    }

    pub fn new_1d(n: usize, length: f64) -> Result<Grid> {
        Grid::new(&[n], &[length])
    }

    pub fn new_2d(n: [usize; 2], length: [f64; 2]) -> Result<Grid> {
        Grid::new(&n, &length)
    }

    pub fn dim(&self) -> usize {
        self.0.n.len()
    }

    pub fn n(&self) -> &[usize] {
        &self.0.n
    }

    pub fn length(&self) -> &[f64] {
        &self.0.length
    }

    pub fn spacing(&self) -> &[f64] {
        &self.0.spacing
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.0.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight `h^d` attached to every node.
    pub fn cell_volume(&self) -> f64 {
        self.0.spacing.iter().product()
    }

    /// `|Omega|`.
    pub fn measure(&self) -> f64 {
        self.0.length.iter().product()
    }

    /// Neumann eigenvalues `lambda_k`, laid out like the spectral coefficients.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.0.eigenvalues
    }

    /// Midpoint coordinates along one axis.
    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        let h = self.0.spacing[axis];
        (0..self.0.n[axis]).map(|i| (i as f64 + 0.5) * h).collect()
    }

    /// Coordinates of every node in row-major order (last axis fastest).
    pub fn coords(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dim()).map(|a| self.axis_coords(a)).collect();
        (0..self.len())
            .map(|flat| {
                let mut point = vec![0.0; self.dim()];
                let mut rem = flat;
                for axis in (0..self.dim()).rev() {
                    point[axis] = axes[axis][rem % self.0.n[axis]];
                    rem /= self.0.n[axis];
                }
                point
            })
            .collect()
    }

    /// Same shape and extent; plans are irrelevant to identity.
    pub fn same_as(&self, other: &Grid) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.n == other.0.n && self.0.length == other.0.length)
    }

    /// Orthonormal forward transform of nodal values (DCT-II along every axis).
    pub fn forward(&self, values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.len());
        let mut out = values.to_vec();
        for axis in 0..self.dim() {
            self.transform_axis(&mut out, axis, Direction::Forward);
        }
        let scale = self.cell_volume().sqrt();
        out.iter_mut().for_each(|c| *c *= scale);
        out
    }

    /// Inverse of [`Grid::forward`].
    pub fn inverse(&self, coefficients: &[f64]) -> Vec<f64> {
        debug_assert_eq!(coefficients.len(), self.len());
        let mut out = coefficients.to_vec();
        for axis in 0..self.dim() {
            self.transform_axis(&mut out, axis, Direction::Inverse);
        }
        let scale = 1.0 / self.cell_volume().sqrt();
        out.iter_mut().for_each(|c| *c *= scale);
        out
    }

    /// Applies a diagonal spectral multiplier `m(lambda_k)` to nodal values.
    pub fn apply_symbol(&self, values: &[f64], symbol: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut coeffs = self.forward(values);
        for (c, &lambda) in coeffs.iter_mut().zip(self.eigenvalues()) {
            *c *= symbol(lambda);
        }
        self.inverse(&coeffs)
    }

    /// Neumann Laplacian of nodal values.
    pub fn laplacian_values(&self, values: &[f64]) -> Vec<f64> {
        self.apply_symbol(values, |lambda| -lambda)
    }

    /// `N` applied to nodal values; the mean mode is discarded without checks.
    pub fn inverse_laplacian_values(&self, values: &[f64]) -> Vec<f64> {
        self.apply_symbol(values, |lambda| if lambda > 0.0 { 1.0 / lambda } else { 0.0 })
    }

    /// `h^d sum f g`.
    pub fn dot(&self, f: &[f64], g: &[f64]) -> f64 {
        self.cell_volume() * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn mean_of(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() / values.len() as f64
    }

    fn transform_axis(&self, data: &mut [f64], axis: usize, dir: Direction) {
        let n = self.0.n[axis];
        let stride: usize = self.0.n[axis + 1..].iter().product();
        let outer: usize = self.0.n[..axis].iter().product();
        let plan = &self.0.plans[axis];
        let mut scratch = vec![0.0; plan.get_scratch_len()];
        let s0 = (1.0 / n as f64).sqrt();
        let sk = (2.0 / n as f64).sqrt();

        let run = |lane: &mut [f64], scratch: &mut [f64]| match dir {
            Direction::Forward => {
                plan.process_dct2_with_scratch(lane, scratch);
                lane[0] *= s0;
                lane[1..].iter_mut().for_each(|c| *c *= sk);
            }
            Direction::Inverse => {
                lane[0] *= 2.0 * s0;
                lane[1..].iter_mut().for_each(|c| *c *= sk);
                plan.process_dct3_with_scratch(lane, scratch);
            }
        };

        if stride == 1 {
            for lane in data.chunks_exact_mut(n) {
                run(lane, &mut scratch);
            }
            return;
        }
        let mut lane = vec![0.0; n];
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * n * stride + inner;
                for (i, slot) in lane.iter_mut().enumerate() {
                    *slot = data[base + i * stride];
                }
                run(&mut lane, &mut scratch);
                for (i, &value) in lane.iter().enumerate() {
                    data[base + i * stride] = value;
                }
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Inverse,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.0.n)
            .field("length", &self.0.length)
            .finish()
    }
}

/// Nodal values on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

/// Coefficients in the orthonormal cosine basis.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coefficients: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(ScalarField { grid: grid.clone(), values })
    }

    /// Trusted constructor for values produced by finite arithmetic.
    pub(crate) fn from_parts(grid: &Grid, values: Vec<f64>) -> ScalarField {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid: grid.clone(), values }
    }

    pub fn constant(grid: &Grid, value: f64) -> ScalarField {
        ScalarField::from_parts(grid, vec![value; grid.len()])
    }

    pub fn zeros(grid: &Grid) -> ScalarField {
        ScalarField::constant(grid, 0.0)
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Result<ScalarField> {
        let values = grid.coords().iter().map(|x| f(x)).collect();
        ScalarField::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField::from_parts(&self.grid, self.values.iter().map(|&x| f(x)).collect())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn ensure_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn to_spectral(&self) -> SpectralField {
        SpectralField {
            grid: self.grid.clone(),
            coefficients: self.grid.forward(&self.values),
        }
    }

    pub fn laplacian(&self) -> ScalarField {
        if self.values.iter().all(|&x| x == self.values[0]) {
            return ScalarField::zeros(&self.grid);
        }
        let mut out = self.grid.laplacian_values(&self.values);
        // The transform pair leaves O(eps) residue in the mean mode; the
        // Neumann Laplacian is mean-free by construction.
        let m = self.grid.mean_of(&out);
        out.iter_mut().for_each(|x| *x -= m);
        ScalarField::from_parts(&self.grid, out)
    }

    /// The inverse operator `N` on mean-zero data.
    pub fn inverse_laplacian_meanzero(&self) -> Result<ScalarField> {
        self.check_mean_zero()?;
        Ok(ScalarField::from_parts(
            &self.grid,
            self.grid.inverse_laplacian_values(&self.values),
        ))
    }

    fn check_mean_zero(&self) -> Result<()> {
        let mean = self.mean();
        let tolerance = MEAN_ZERO_TOLERANCE * self.norm_l2() / self.grid.measure().sqrt();
        if mean.abs() > tolerance {
            return Err(Error::NonZeroMean { mean, tolerance });
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.grid.mean_of(&self.values)
    }

    /// The field minus its mean.
    pub fn fluctuation(&self) -> ScalarField {
        let m = self.mean();
        self.map(|x| x - m)
    }

    pub fn inner(&self, other: &ScalarField) -> Result<f64> {
        self.ensure_same_grid(other)?;
        Ok(self.grid.dot(&self.values, &other.values))
    }

    pub fn norm_l2(&self) -> f64 {
        self.grid.dot(&self.values, &self.values).sqrt()
    }

    /// `||grad f||^2`, computed spectrally.
    pub fn grad_norm_sq(&self) -> f64 {
        let coeffs = self.grid.forward(&self.values);
        coeffs
            .iter()
            .zip(self.grid.eigenvalues())
            .map(|(c, lambda)| lambda * c * c)
            .sum()
    }

    pub fn norm_h1(&self) -> f64 {
        (self.norm_l2().powi(2) + self.grad_norm_sq()).sqrt()
    }

    /// `||f||_H2 = (sum (1 + lambda + lambda^2) F_k^2)^(1/2)`.
    pub fn norm_h2(&self) -> f64 {
        let coeffs = self.grid.forward(&self.values);
        coeffs
            .iter()
            .zip(self.grid.eigenvalues())
            .map(|(c, lambda)| (1.0 + lambda + lambda * lambda) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// `||f||_* = <f, N f>^(1/2)` for mean-zero `f`.
    pub fn norm_vstar0(&self) -> Result<f64> {
        self.check_mean_zero()?;
        Ok(self.vstar_sq_unchecked().sqrt())
    }

    /// `||f||_{-1}^2 = ||f - mean||_*^2 + |mean|^2`.
    pub fn norm_minus1(&self) -> f64 {
        let m = self.mean();
        (self.vstar_sq_unchecked() + m * m).sqrt()
    }

    /// `sum_{k != 0} F_k^2 / lambda_k`, i.e. `||f - mean||_*^2`.
    pub(crate) fn vstar_sq_unchecked(&self) -> f64 {
        let coeffs = self.grid.forward(&self.values);
        coeffs
            .iter()
            .zip(self.grid.eigenvalues())
            .filter(|(_, &lambda)| lambda > 0.0)
            .map(|(c, lambda)| c * c / lambda)
            .sum()
    }

    pub fn add_scaled(&self, alpha: f64, other: &ScalarField) -> ScalarField {
        debug_assert!(self.grid.same_as(&other.grid));
        ScalarField::from_parts(
            &self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| a + alpha * b).collect(),
        )
    }
}

impl SpectralField {
    pub fn new(grid: &Grid, coefficients: Vec<f64>) -> Result<SpectralField> {
        if coefficients.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: coefficients.len(),
            });
        }
        Ok(SpectralField { grid: grid.clone(), coefficients })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn from_spectral(&self) -> ScalarField {
        ScalarField::from_parts(&self.grid, self.grid.inverse(&self.coefficients))
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.add_scaled(1.0, rhs)
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.add_scaled(-1.0, rhs)
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.map(|x| x * rhs)
    }
}

pub fn to_spectral(f: &ScalarField) -> SpectralField {
    f.to_spectral()
}

pub fn from_spectral(f: &SpectralField) -> ScalarField {
    f.from_spectral()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: &Grid, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ScalarField::new(grid, (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap()
    }

    /// Textbook O(n^2) orthonormal DCT-II on one axis, scaled like `forward`.
    fn naive_forward_1d(values: &[f64], length: f64) -> Vec<f64> {
        let n = values.len();
        let h = length / n as f64;
        (0..n)
            .map(|k| {
                let norm = if k == 0 { (1.0 / length).sqrt() } else { (2.0 / length).sqrt() };
                values
                    .iter()
                    .enumerate()
                    .map(|(i, &f)| {
                        f * norm * (PI * k as f64 * (i as f64 + 0.5) * h / length).cos() * h
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn forward_matches_naive_quadrature() {
        let grid = Grid::new_1d(24, 3.0).unwrap();
        let f = random_field(&grid, 1);
        let fast = f.to_spectral();
        let slow = naive_forward_1d(f.values(), 3.0);
        for (a, b) in fast.coefficients().iter().zip(&slow) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
    }

    #[test]
    fn constant_maps_to_mode_zero() {
        let grid = Grid::new_2d([16, 8], [2.0, 1.0]).unwrap();
        let c = ScalarField::constant(&grid, 0.3);
        let spec = c.to_spectral();
        assert!((spec.coefficients()[0] - 0.3 * grid.measure().sqrt()).abs() < 1e-14);
        assert!(spec.coefficients()[1..].iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn cosine_is_single_mode() {
        let grid = Grid::new_1d(32, 2.0).unwrap();
        let f = ScalarField::from_fn(&grid, |x| (PI * x[0] / 2.0).cos()).unwrap();
        let spec = f.to_spectral();
        for (k, c) in spec.coefficients().iter().enumerate() {
            if k == 1 {
                // ||cos||_L2 = sqrt(L/2) = 1
                assert!((c - 1.0).abs() < 1e-13);
            } else {
                assert!(c.abs() < 1e-13, "mode {k}: {c}");
            }
        }
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let grid = Grid::new_2d([16, 16], [1.0, 1.0]).unwrap();
        let lap = ScalarField::constant(&grid, 5.0).laplacian();
        assert!(lap.max_abs() < 1e-12);
    }

    #[test]
    fn laplacian_of_eigenfunction() {
        let l = 3.0;
        let grid = Grid::new_1d(64, l).unwrap();
        let f = ScalarField::from_fn(&grid, |x| (PI * x[0] / l).cos()).unwrap();
        let lap = f.laplacian();
        let expect = f.map(|x| -(PI / l).powi(2) * x);
        assert!((&lap - &expect).max_abs() < 1e-12);
    }

    #[test]
    fn laplacian_matches_finite_differences() {
        // Band-limited field; second-order FD with reflected ghosts.
        let l = 1.0;
        let mut errs = Vec::new();
        for n in [32usize, 64, 128] {
            let grid = Grid::new_1d(n, l).unwrap();
            let f = ScalarField::from_fn(&grid, |x| {
                (PI * x[0]).cos() + 0.5 * (3.0 * PI * x[0]).cos()
            })
            .unwrap();
            let h = l / n as f64;
            let v = f.values();
            let fd: Vec<f64> = (0..n)
                .map(|i| {
                    let left = if i == 0 { v[0] } else { v[i - 1] };
                    let right = if i == n - 1 { v[n - 1] } else { v[i + 1] };
                    (left - 2.0 * v[i] + right) / (h * h)
                })
                .collect();
            let lap = f.laplacian();
            let err = lap.values().iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            errs.push(err);
        }
        // Interior O(h^2); reflected ghosts give the boundary cell O(h^2) as well
        // for fields with zero normal derivative.
        assert!(errs[0] / errs[1] > 3.0 && errs[1] / errs[2] > 3.0, "{errs:?}");
    }

    #[test]
    fn inverse_laplacian_of_eigenfunction() {
        let l = 2.5;
        let grid = Grid::new_1d(32, l).unwrap();
        let f = ScalarField::from_fn(&grid, |x| (PI * x[0] / l).cos()).unwrap();
        let nf = f.inverse_laplacian_meanzero().unwrap();
        let expect = f.map(|x| (l / PI).powi(2) * x);
        assert!((&nf - &expect).max_abs() < 1e-12);
        let zero = ScalarField::zeros(&grid).inverse_laplacian_meanzero().unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn inverse_laplacian_rejects_nonzero_mean() {
        let grid = Grid::new_1d(16, 1.0).unwrap();
        let f = ScalarField::constant(&grid, 1.0);
        assert!(matches!(f.inverse_laplacian_meanzero(), Err(Error::NonZeroMean { .. })));
        assert!(matches!(f.norm_vstar0(), Err(Error::NonZeroMean { .. })));
    }

    #[test]
    fn norm_examples() {
        let grid = Grid::new_2d([8, 8], [2.0, 2.0]).unwrap();
        let one = ScalarField::constant(&grid, 1.0);
        assert!((one.norm_l2() - 2.0).abs() < 1e-14);
        assert!((ScalarField::constant(&grid, -0.7).mean() + 0.7).abs() < 1e-15);
        assert!((ScalarField::constant(&grid, -0.7).norm_minus1() - 0.7).abs() < 1e-14);

        let l = 2.0;
        let g1 = Grid::new_1d(32, l).unwrap();
        let c = ScalarField::from_fn(&g1, |x| (PI * x[0] / l).cos()).unwrap();
        let omega = g1.measure();
        assert!((c.grad_norm_sq() - (PI / l).powi(2) * omega / 2.0).abs() < 1e-12);
        let expect = (l / PI) * (omega / 2.0).sqrt();
        assert!((c.norm_vstar0().unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn vstar_norm_equals_gradient_of_n() {
        let grid = Grid::new_2d([16, 32], [1.0, 3.0]).unwrap();
        for seed in 0..5 {
            let f = random_field(&grid, seed).fluctuation();
            let lhs = f.norm_vstar0().unwrap().powi(2);
            let rhs = f.inverse_laplacian_meanzero().unwrap().grad_norm_sq();
            assert!((lhs - rhs).abs() <= 1e-11 * lhs.max(1.0));
        }
    }

    #[test]
    fn rejects_bad_grids_and_fields() {
        assert!(Grid::new_1d(4, 1.0).is_err());
        assert!(Grid::new_1d(16, -1.0).is_err());
        assert!(Grid::new(&[8, 8, 8, 8], &[1.0; 4]).is_err());
        let grid = Grid::new_1d(8, 1.0).unwrap();
        assert!(matches!(
            ScalarField::new(&grid, vec![0.0; 7]),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(matches!(ScalarField::new(&grid, v), Err(Error::NonFinite { index: 3 })));
        let other = Grid::new_1d(8, 2.0).unwrap();
        let a = ScalarField::zeros(&grid);
        let b = ScalarField::zeros(&other);
        assert!(matches!(a.inner(&b), Err(Error::GridMismatch)));
    }

    #[test]
    fn three_dimensional_round_trip() {
        let grid = Grid::new(&[8, 10, 12], &[1.0, 2.0, 3.0]).unwrap();
        let f = random_field(&grid, 3);
        let back = f.to_spectral().from_spectral();
        assert!((&back - &f).max_abs() < 1e-13);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn round_trip_and_parseval(seed in any::<u64>(), n0 in 8usize..40, n1 in 8usize..24, two_d in any::<bool>()) {
            let grid = if two_d {
                Grid::new_2d([n0, n1], [1.3, 0.7]).unwrap()
            } else {
                Grid::new_1d(n0, 2.1).unwrap()
            };
            let f = random_field(&grid, seed);
            let spec = f.to_spectral();
            let energy_nodes = grid.dot(f.values(), f.values());
            let energy_modes: f64 = spec.coefficients().iter().map(|c| c * c).sum();
            prop_assert!((energy_nodes - energy_modes).abs() <= 1e-13 * energy_nodes);
            let back = spec.from_spectral();
            prop_assert!((&back - &f).norm_l2() <= 1e-13 * f.norm_l2());
        }

        #[test]
        fn norms_homogeneous_and_subadditive(seed in any::<u64>(), scale in -5.0f64..5.0) {
            let grid = Grid::new_2d([12, 16], [1.0, 2.0]).unwrap();
            let f = random_field(&grid, seed);
            let g = random_field(&grid, seed.wrapping_add(1));
            let sum = &f + &g;
            let scaled = &f * scale;
            for norm in [
                ScalarField::norm_l2 as fn(&ScalarField) -> f64,
                ScalarField::norm_h1,
                ScalarField::norm_minus1,
            ] {
                prop_assert!((norm(&scaled) - scale.abs() * norm(&f)).abs() <= 1e-12 * (1.0 + norm(&f)));
                prop_assert!(norm(&sum) <= norm(&f) + norm(&g) + 1e-12);
            }
            let (fz, gz) = (f.fluctuation(), g.fluctuation());
            let star = |x: &ScalarField| x.norm_vstar0().unwrap();
            prop_assert!(star(&(&fz + &gz)) <= star(&fz) + star(&gz) + 1e-12);
        }

        #[test]
        fn n_is_self_adjoint_and_inverts_laplacian(seed in any::<u64>()) {
            let grid = Grid::new_2d([16, 16], [2.0, 1.0]).unwrap();
            let f = random_field(&grid, seed).fluctuation();
            let g = random_field(&grid, seed ^ 0xdead).fluctuation();
            let nf = f.inverse_laplacian_meanzero().unwrap();
            let ng = g.inverse_laplacian_meanzero().unwrap();
            let lhs = f.inner(&ng).unwrap();
            let rhs = g.inner(&nf).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
            prop_assert!(f.inner(&nf).unwrap() >= 0.0);
            prop_assert!(nf.mean().abs() < 1e-14);
            let back = (&nf.laplacian() * -1.0).add_scaled(-1.0, &f);
            prop_assert!(back.max_abs() <= 1e-12);
        }
    }
}
