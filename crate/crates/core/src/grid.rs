//! Uniform cell-centred mesh on `(0, L)` with reflective (homogeneous Neumann)
//! boundaries.
//!
//! Node `j` sits at `x_j = (j + 1/2) dx`. The discrete Laplacian uses ghost
//! values `f_{-1} = f_0` and `f_n = f_{n-1}`, which makes it exactly
//! conservative and symmetric with respect to the `dx`-weighted inner product.

use crate::error::SimError;

/// Uniform 1-D grid on `(0, length)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    length: f64,
    n_cells: usize,
    dx: f64,
}

impl Grid1D {
    pub fn new(length: f64, n_cells: usize) -> Result<Self, SimError> {
        if !(length.is_finite() && length > 0.0) {
            return Err(SimError::InvalidGrid(format!(
                "domain length must be positive and finite, got {length}"
            )));
        }
        if n_cells < 2 {
            return Err(SimError::InvalidGrid(format!(
                "n_cells must be at least 2, got {n_cells}"
            )));
        }
        Ok(Self {
            length,
            n_cells,
            dx: length / n_cells as f64,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Coordinate of node `j`.
    pub fn node(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dx
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_cells).map(move |j| self.node(j))
    }

    /// Index of the node closest to `x`, or `None` if `x` lies outside `[0, L]`.
    pub fn nearest_node(&self, x: f64) -> Option<usize> {
        if !(0.0..=self.length).contains(&x) {
            return None;
        }
        let j = (x / self.dx).floor() as usize;
        Some(j.min(self.n_cells - 1))
    }
}

/// One compartment sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid1D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self, SimError> {
        if values.len() != grid.n_cells() {
            return Err(SimError::DimensionMismatch {
                expected: grid.n_cells(),
                found: values.len(),
            });
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(SimError::NonFinite {
                what: "field value",
                index: j,
            });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid1D, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.n_cells()],
        }
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn from_fn(grid: Grid1D, f: impl FnMut(f64) -> f64) -> Self {
        Self {
            grid,
            values: grid.nodes().map(f).collect(),
        }
    }

    pub(crate) fn from_vec_unchecked(grid: Grid1D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_cells());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Discrete Neumann Laplacian.
    pub fn laplacian_neumann(&self) -> Self {
        Self {
            grid: self.grid,
            values: laplacian_neumann(&self.values, self.grid.dx()),
        }
    }

    /// Midpoint rule `sum_j f_j dx`.
    pub fn integrate(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx()
    }

    /// `(l2, sup)` norms.
    pub fn norms(&self) -> (f64, f64) {
        (self.l2_norm(), self.sup_norm())
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.dx()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `dx`-weighted inner product.
    pub fn dot(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.dx()
    }
}

/// Three-point stencil with reflective ghosts, on a raw slice.
pub fn laplacian_neumann(f: &[f64], dx: f64) -> Vec<f64> {
    let n = f.len();
    let inv_dx2 = 1.0 / (dx * dx);
    (0..n)
        .map(|j| {
            let left = if j == 0 { f[0] } else { f[j - 1] };
            let right = if j + 1 == n { f[n - 1] } else { f[j + 1] };
            (left - 2.0 * f[j] + right) * inv_dx2
        })
        .collect()
}

/// The `(S, I, R)` triple at one time instant, all on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub s: ScalarField,
    pub i: ScalarField,
    pub r: ScalarField,
}

impl StateField {
    pub fn new(s: ScalarField, i: ScalarField, r: ScalarField) -> Result<Self, SimError> {
        if s.grid() != i.grid() || s.grid() != r.grid() {
            return Err(SimError::InvalidGrid(
                "S, I and R must share one grid".into(),
            ));
        }
        Ok(Self { s, i, r })
    }

    pub fn constant(grid: Grid1D, s: f64, i: f64, r: f64) -> Self {
        Self {
            s: ScalarField::constant(grid, s),
            i: ScalarField::constant(grid, i),
            r: ScalarField::constant(grid, r),
        }
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self::constant(grid, 0.0, 0.0, 0.0)
    }

    pub fn grid(&self) -> &Grid1D {
        self.s.grid()
    }

    pub fn components(&self) -> [&ScalarField; 3] {
        [&self.s, &self.i, &self.r]
    }

    pub fn components_mut(&mut self) -> [&mut ScalarField; 3] {
        [&mut self.s, &mut self.i, &mut self.r]
    }

    pub fn map_components(&self, mut f: impl FnMut(usize, &ScalarField) -> ScalarField) -> Self {
        Self {
            s: f(0, &self.s),
            i: f(1, &self.i),
            r: f(2, &self.r),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.is_finite())
    }

    /// Componentwise `u ∨ 0`.
    pub fn clipped(&self) -> Self {
        self.map_components(|_, c| c.map(|v| v.max(0.0)))
    }

    /// Largest absolute entry over all three compartments.
    pub fn sup_norm(&self) -> f64 {
        self.components()
            .iter()
            .map(|c| c.sup_norm())
            .fold(0.0, f64::max)
    }

    /// l2 norm on the product space.
    pub fn l2_norm(&self) -> f64 {
        self.components()
            .iter()
            .map(|c| c.l2_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn min_value(&self) -> f64 {
        self.components()
            .iter()
            .flat_map(|c| c.values().iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    /// `self - other` in the product l2 norm.
    pub fn l2_distance(&self, other: &Self) -> f64 {
        let dx = self.grid().dx();
        self.components()
            .iter()
            .zip(other.components())
            .flat_map(|(a, b)| a.values().iter().zip(b.values()).map(|(x, y)| (x - y).powi(2)))
            .map(|d| d * dx)
            .sum::<f64>()
            .sqrt()
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.components()
            .iter()
            .zip(other.components())
            .flat_map(|(a, b)| a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// Domain integral of `S + I + R`.
    pub fn total_mass(&self) -> f64 {
        self.components().iter().map(|c| c.integrate()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: Grid1D, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ScalarField::from_fn(grid, |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid1D::new(6.0, 1).is_err());
        assert!(Grid1D::new(0.0, 10).is_err());
        assert!(Grid1D::new(f64::NAN, 10).is_err());
    }

    #[test]
    fn nodes_are_interior() {
        let g = Grid1D::new(6.0, 60).unwrap();
        assert!((g.dx() * g.n_cells() as f64 - 6.0).abs() < 1e-14);
        assert!(g.nodes().all(|x| x > 0.0 && x < 6.0));
        assert_eq!(g.nearest_node(0.0), Some(0));
        assert_eq!(g.nearest_node(6.0), Some(59));
        assert_eq!(g.nearest_node(-0.1), None);
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let g = Grid1D::new(6.0, 40).unwrap();
        let lap = ScalarField::constant(g, 3.7).laplacian_neumann();
        assert!(lap.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn laplacian_of_cosine_mode_is_second_order() {
        let mut errors = Vec::new();
        for n in [50, 100, 200] {
            let g = Grid1D::new(6.0, n).unwrap();
            let k = std::f64::consts::PI / 6.0;
            let f = ScalarField::from_fn(g, |x| (k * x).cos());
            let lap = f.laplacian_neumann();
            let err = lap
                .values()
                .iter()
                .zip(f.values())
                .map(|(l, v)| (l + k * k * v).abs())
                .fold(0.0, f64::max);
            errors.push(err);
        }
        // halving dx should cut the error roughly by four
        assert!(errors[0] / errors[1] > 3.5 && errors[1] / errors[2] > 3.5, "{errors:?}");
        assert!(errors[2] < 1e-4);
    }

    #[test]
    fn laplacian_sums_to_zero() {
        let g = Grid1D::new(6.0, 97).unwrap();
        for seed in 0..20 {
            let f = random_field(g, seed);
            // brute-force sum, written out independently of `integrate`
            let mut total = 0.0;
            for v in f.laplacian_neumann().values() {
                total += v * g.dx();
            }
            assert!(total.abs() <= 1e-12 * f.sup_norm() / (g.dx() * g.dx()));
        }
    }

    #[test]
    fn integrals_and_norms() {
        let g = Grid1D::new(6.0, 60).unwrap();
        assert!((ScalarField::constant(g, 1.0).integrate() - 6.0).abs() < 1e-12);
        assert_eq!(ScalarField::zeros(g).integrate(), 0.0);
        let (l2, sup) = ScalarField::constant(g, 2.0).norms();
        assert!((l2 - 2.0 * 6f64.sqrt()).abs() < 1e-12);
        assert_eq!(sup, 2.0);
        assert_eq!(ScalarField::zeros(g).norms(), (0.0, 0.0));

        let unit = Grid1D::new(1.0, 1000).unwrap();
        let x = ScalarField::from_fn(unit, |x| x);
        assert!((x.integrate() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn l2_squared_matches_integral_of_square() {
        let g = Grid1D::new(6.0, 73).unwrap();
        let f = random_field(g, 3);
        let sq = f.map(|v| v * v).integrate();
        assert!((f.l2_norm().powi(2) - sq).abs() <= 1e-12 * sq);
    }

    #[test]
    fn field_construction_validates() {
        let g = Grid1D::new(1.0, 4).unwrap();
        assert!(ScalarField::new(g, vec![0.0; 3]).is_err());
        assert!(ScalarField::new(g, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        let other = Grid1D::new(2.0, 4).unwrap();
        assert!(StateField::new(
            ScalarField::zeros(g),
            ScalarField::zeros(other),
            ScalarField::zeros(g)
        )
        .is_err());
    }
}
