//! Heat semigroup, resolvent and Yosida approximation of the discrete
//! Neumann diffusion operator `u ↦ (d1 Δu1, d2 Δu2, d3 Δu3)`.
//!
//! The cell-centred Neumann stencil is diagonalised by the orthonormal
//! DCT-II basis `v_k(j) = c_k cos(π k (j + 1/2) / n)` with eigenvalues
//! `λ_k = -(2/dx²)(1 - cos(π k / n))`. Every operator here is a spectral
//! multiplier in that basis, so the semigroup is exact in time.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{invalid, SimError};
use crate::grid::{Grid1D, ScalarField, StateField};

/// Eigenvalues and orthonormal cosine basis of the discrete Neumann Laplacian.
#[derive(Debug, Clone)]
pub struct SpectralCache {
    grid: Grid1D,
    eigenvalues: Vec<f64>,
    // row k holds basis vector k
    basis: Vec<f64>,
}

impl SpectralCache {
    pub fn new(grid: Grid1D) -> Self {
        let n = grid.n_cells();
        let nf = n as f64;
        let dx2 = grid.dx() * grid.dx();
        let eigenvalues = (0..n)
            .map(|k| -(2.0 / dx2) * (1.0 - (PI * k as f64 / nf).cos()))
            .collect();
        let mut basis = vec![0.0; n * n];
        for k in 0..n {
            let c = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            for j in 0..n {
                basis[k * n + j] = c * (PI * k as f64 * (j as f64 + 0.5) / nf).cos();
            }
        }
        Self {
            grid,
            eigenvalues,
            basis,
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Basis vector `k` sampled on the nodes.
    pub fn eigenvector(&self, k: usize) -> &[f64] {
        let n = self.grid.n_cells();
        &self.basis[k * n..(k + 1) * n]
    }

    /// Cosine coefficients of `f` (DCT-II, orthonormal).
    pub fn forward(&self, f: &[f64]) -> Vec<f64> {
        let n = self.grid.n_cells();
        (0..n)
            .map(|k| {
                self.eigenvector(k)
                    .iter()
                    .zip(f)
                    .map(|(b, v)| b * v)
                    .sum()
            })
            .collect()
    }

    /// Nodal values from cosine coefficients (DCT-III, orthonormal).
    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        let n = self.grid.n_cells();
        let mut out = vec![0.0; n];
        for (k, &c) in coeffs.iter().enumerate() {
            for (o, b) in out.iter_mut().zip(self.eigenvector(k)) {
                *o += c * b;
            }
        }
        out
    }

    /// Applies the multiplier `m(λ_k)` through a forward/inverse transform pair.
    pub fn apply_multiplier(&self, f: &[f64], m: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut coeffs = self.forward(f);
        for (c, &lam) in coeffs.iter_mut().zip(&self.eigenvalues) {
            *c *= m(lam);
        }
        self.inverse(&coeffs)
    }

    /// Assembles the dense matrix `Vᵀ diag(m(λ_k)) V`.
    pub fn dense_multiplier(&self, m: impl Fn(f64) -> f64) -> DenseOperator {
        let n = self.grid.n_cells();
        let weights: Vec<f64> = self.eigenvalues.iter().map(|&l| m(l)).collect();
        let mut matrix = vec![0.0; n * n];
        for (k, w) in weights.iter().enumerate() {
            let v = self.eigenvector(k);
            for i in 0..n {
                let wi = w * v[i];
                let row = &mut matrix[i * n..(i + 1) * n];
                for (entry, vj) in row.iter_mut().zip(v) {
                    *entry += wi * vj;
                }
            }
        }
        DenseOperator { n, matrix }
    }
}

/// Dense `n × n` operator on nodal values, row-major.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    n: usize,
    matrix: Vec<f64>,
}

impl DenseOperator {
    pub fn identity(n: usize) -> Self {
        let mut matrix = vec![0.0; n * n];
        for i in 0..n {
            matrix[i * n + i] = 1.0;
        }
        Self { n, matrix }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n + j]
    }

    pub fn apply_into(&self, f: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.matrix.chunks_exact(self.n)) {
            *o = row.iter().zip(f).map(|(a, b)| a * b).sum();
        }
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply_into(f, &mut out);
        out
    }
}

/// The diffusion part of the model: one positive rate per compartment.
#[derive(Debug, Clone)]
pub struct DiffusionOperator {
    cache: Arc<SpectralCache>,
    rates: [f64; 3],
}

impl DiffusionOperator {
    pub fn new(grid: Grid1D, rates: [f64; 3]) -> Result<Self, SimError> {
        Self::with_cache(Arc::new(SpectralCache::new(grid)), rates)
    }

    pub fn with_cache(cache: Arc<SpectralCache>, rates: [f64; 3]) -> Result<Self, SimError> {
        if rates.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(invalid(
                "diffusion",
                format!("rates must be positive and finite, got {rates:?}"),
            ));
        }
        Ok(Self { cache, rates })
    }

    pub fn grid(&self) -> &Grid1D {
        self.cache.grid()
    }

    pub fn rates(&self) -> [f64; 3] {
        self.rates
    }

    pub fn cache(&self) -> &Arc<SpectralCache> {
        &self.cache
    }

    fn per_component(
        &self,
        u: &StateField,
        m: impl Fn(f64, f64) -> f64,
    ) -> StateField {
        u.map_components(|c, field| {
            let d = self.rates[c];
            let values = self.cache.apply_multiplier(field.values(), |lam| m(d, lam));
            ScalarField::from_vec_unchecked(*field.grid(), values)
        })
    }

    /// `e^{tA} u`, exact for the discrete operator.
    pub fn semigroup_apply(&self, t: f64, u: &StateField) -> Result<StateField, SimError> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid("t", format!("semigroup time must be >= 0, got {t}")));
        }
        Ok(self.per_component(u, |d, lam| (d * lam * t).exp()))
    }

    /// `(-A + θ I)^{-1} u`.
    pub fn resolvent_apply(&self, theta: f64, u: &StateField) -> Result<StateField, SimError> {
        check_theta(theta)?;
        Ok(self.per_component(u, |d, lam| 1.0 / (theta - d * lam)))
    }

    /// `θ (-A + θ I)^{-1} u`.
    pub fn yosida_apply(&self, theta: f64, u: &StateField) -> Result<StateField, SimError> {
        check_theta(theta)?;
        Ok(self.per_component(u, |d, lam| theta / (theta - d * lam)))
    }

    /// `A u` through the three-point stencil.
    pub fn generator_apply(&self, u: &StateField) -> StateField {
        u.map_components(|c, field| {
            field.laplacian_neumann().map(|v| self.rates[c] * v)
        })
    }

    /// Resolvent by a direct tridiagonal solve, independent of the spectral path.
    pub fn resolvent_tridiagonal(
        &self,
        theta: f64,
        u: &StateField,
    ) -> Result<StateField, SimError> {
        check_theta(theta)?;
        let dx2 = self.grid().dx().powi(2);
        Ok(u.map_components(|c, field| {
            let k = self.rates[c] / dx2;
            let n = field.values().len();
            let mut diag = vec![theta + 2.0 * k; n];
            diag[0] = theta + k;
            diag[n - 1] = theta + k;
            let off = vec![-k; n - 1];
            let values = thomas_solve(&off, &diag, &off, field.values());
            ScalarField::from_vec_unchecked(*field.grid(), values)
        }))
    }

    /// Per-compartment dense matrices of `e^{tA}`.
    pub fn propagator(&self, t: f64) -> Result<Propagator, SimError> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid("t", format!("semigroup time must be >= 0, got {t}")));
        }
        Ok(Propagator {
            ops: self
                .rates
                .map(|d| self.cache.dense_multiplier(|lam| (d * lam * t).exp())),
        })
    }

    /// Per-compartment dense matrices of `θ R`.
    pub fn yosida_operator(&self, theta: f64) -> Result<Propagator, SimError> {
        check_theta(theta)?;
        Ok(Propagator {
            ops: self
                .rates
                .map(|d| self.cache.dense_multiplier(|lam| theta / (theta - d * lam))),
        })
    }
}

fn check_theta(theta: f64) -> Result<(), SimError> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(invalid("theta", format!("must be > 0, got {theta}")));
    }
    Ok(())
}

/// Precomputed spectral multiplier applied to each compartment.
#[derive(Debug, Clone)]
pub struct Propagator {
    ops: [DenseOperator; 3],
}

impl Propagator {
    pub fn identity(n: usize) -> Self {
        Self {
            ops: [
                DenseOperator::identity(n),
                DenseOperator::identity(n),
                DenseOperator::identity(n),
            ],
        }
    }

    pub fn component(&self, c: usize) -> &DenseOperator {
        &self.ops[c]
    }

    pub fn apply(&self, u: &StateField) -> StateField {
        u.map_components(|c, field| {
            ScalarField::from_vec_unchecked(*field.grid(), self.ops[c].apply(field.values()))
        })
    }

    /// In-place application using `scratch` as temporary storage.
    pub fn apply_in_place(&self, u: &mut StateField, scratch: &mut Vec<f64>) {
        for (c, field) in u.components_mut().into_iter().enumerate() {
            scratch.clear();
            scratch.extend_from_slice(field.values());
            self.ops[c].apply_into(scratch, field.values_mut());
        }
    }
}

/// Thomas algorithm for a tridiagonal system; `lower[i]` couples rows i+1 and i.
pub fn thomas_solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = if n > 1 { upper[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i - 1] * c[i - 1];
        if i < n - 1 {
            c[i] = upper[i] / denom;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(grid: Grid1D, seed: u64) -> StateField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut field = || ScalarField::from_fn(grid, |_| rng.random_range(-1.0..1.0));
        StateField {
            s: field(),
            i: field(),
            r: field(),
        }
    }

    fn op(n: usize) -> DiffusionOperator {
        DiffusionOperator::new(Grid1D::new(6.0, n).unwrap(), [0.1, 0.2, 0.3]).unwrap()
    }

    /// Dense `exp(t L)` by scaling and squaring of a Taylor series; used as an
    /// independent oracle for small grids.
    fn dense_expm(l: &[f64], n: usize, t: f64) -> Vec<f64> {
        let norm: f64 = l.iter().map(|v| v.abs()).fold(0.0, f64::max) * n as f64 * t;
        let squarings = (norm.max(1.0).log2().ceil() as u32) + 4;
        let h = t / 2f64.powi(squarings as i32);
        let matmul = |a: &[f64], b: &[f64]| {
            let mut c = vec![0.0; n * n];
            for i in 0..n {
                for k in 0..n {
                    let aik = a[i * n + k];
                    for j in 0..n {
                        c[i * n + j] += aik * b[k * n + j];
                    }
                }
            }
            c
        };
        let scaled: Vec<f64> = l.iter().map(|v| v * h).collect();
        let mut result = vec![0.0; n * n];
        let mut term = vec![0.0; n * n];
        for i in 0..n {
            result[i * n + i] = 1.0;
            term[i * n + i] = 1.0;
        }
        for k in 1..30 {
            term = matmul(&term, &scaled).iter().map(|v| v / k as f64).collect();
            for (r, t) in result.iter_mut().zip(&term) {
                *r += t;
            }
        }
        for _ in 0..squarings {
            result = matmul(&result, &result);
        }
        result
    }

    #[test]
    fn eigenvalues_are_ordered() {
        let cache = SpectralCache::new(Grid1D::new(6.0, 33).unwrap());
        let ev = cache.eigenvalues();
        assert_eq!(ev[0], 0.0);
        assert!(ev.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn transform_round_trip() {
        let grid = Grid1D::new(6.0, 45).unwrap();
        let cache = SpectralCache::new(grid);
        let f = random_state(grid, 1).s;
        let back = cache.inverse(&cache.forward(f.values()));
        for (a, b) in back.iter().zip(f.values()) {
            assert!((a - b).abs() <= 1e-12 * f.sup_norm());
        }
    }

    #[test]
    fn basis_vectors_are_stencil_eigenvectors() {
        let grid = Grid1D::new(6.0, 20).unwrap();
        let cache = SpectralCache::new(grid);
        for k in 0..20 {
            let v = cache.eigenvector(k);
            let lap = crate::grid::laplacian_neumann(v, grid.dx());
            for (l, x) in lap.iter().zip(v) {
                assert!((l - cache.eigenvalues()[k] * x).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn semigroup_matches_dense_exponential() {
        for n in [8, 17, 64] {
            let grid = Grid1D::new(6.0, n).unwrap();
            let cache = SpectralCache::new(grid);
            let inv_dx2 = 1.0 / grid.dx().powi(2);
            let mut l = vec![0.0; n * n];
            for i in 0..n {
                if i > 0 {
                    l[i * n + i - 1] = inv_dx2;
                    l[i * n + i] -= inv_dx2;
                }
                if i + 1 < n {
                    l[i * n + i + 1] = inv_dx2;
                    l[i * n + i] -= inv_dx2;
                }
            }
            let expm = dense_expm(&l, n, 1.0);
            let spectral = cache.dense_multiplier(|lam| lam.exp());
            for i in 0..n {
                for j in 0..n {
                    assert!((expm[i * n + j] - spectral.entry(i, j)).abs() < 1e-12);
                }
            }
            // eigenvector k is scaled by exp(λ_k)
            let d = DiffusionOperator::new(grid, [1.0; 3]).unwrap();
            let k = n / 3;
            let v = ScalarField::new(grid, cache.eigenvector(k).to_vec()).unwrap();
            let u = StateField::new(v.clone(), v.clone(), v.clone()).unwrap();
            let out = d.semigroup_apply(1.0, &u).unwrap();
            let scale = cache.eigenvalues()[k].exp();
            for (a, b) in out.s.values().iter().zip(v.values()) {
                assert!((a - scale * b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn semigroup_identity_and_constants() {
        let d = op(30);
        let u = random_state(*d.grid(), 2);
        let same = d.semigroup_apply(0.0, &u).unwrap();
        assert!(same.sup_distance(&u) < 1e-14);
        let c = StateField::constant(*d.grid(), 0.9, 0.1, 0.3);
        let out = d.semigroup_apply(7.5, &c).unwrap();
        assert!(out.sup_distance(&c) < 1e-14);
        assert!(d.semigroup_apply(-1.0, &u).is_err());
    }

    #[test]
    fn resolvent_routes_agree_and_invert() {
        let d = op(50);
        let u = random_state(*d.grid(), 4);
        let theta = 3.0;
        let spectral = d.resolvent_apply(theta, &u).unwrap();
        let direct = d.resolvent_tridiagonal(theta, &u).unwrap();
        assert!(spectral.sup_distance(&direct) <= 1e-12 * u.sup_norm());
        // (-A + θ) v = u
        let av = d.generator_apply(&spectral);
        let mut residual = 0.0f64;
        for (c, comp) in spectral.components().iter().enumerate() {
            for j in 0..50 {
                let lhs = -av.components()[c].values()[j] + theta * comp.values()[j];
                residual = residual.max((lhs - u.components()[c].values()[j]).abs());
            }
        }
        assert!(residual <= 1e-10 * u.sup_norm());
        assert!(d.resolvent_apply(0.0, &u).is_err());
        assert!(d.yosida_apply(-2.0, &u).is_err());
    }

    #[test]
    fn resolvent_of_constant() {
        let d = op(12);
        let c = StateField::constant(*d.grid(), 2.0, 4.0, 6.0);
        let out = d.resolvent_apply(4.0, &c).unwrap();
        assert!(out.sup_distance(&StateField::constant(*d.grid(), 0.5, 1.0, 1.5)) < 1e-14);
        let y = d.yosida_apply(123.0, &c).unwrap();
        assert!(y.sup_distance(&c) < 1e-13);
    }

    #[test]
    fn yosida_acts_diagonally_on_eigenvectors() {
        let grid = Grid1D::new(6.0, 24).unwrap();
        let d = DiffusionOperator::new(grid, [0.5; 3]).unwrap();
        let k = 5;
        let v = ScalarField::new(grid, d.cache().eigenvector(k).to_vec()).unwrap();
        let u = StateField::new(v.clone(), v.clone(), v.clone()).unwrap();
        let theta = 10.0;
        let lam = d.cache().eigenvalues()[k];
        let out = d.yosida_apply(theta, &u).unwrap();
        let factor = theta / (theta - 0.5 * lam);
        for (a, b) in out.i.values().iter().zip(v.values()) {
            assert!((a - factor * b).abs() < 1e-13);
        }
    }

    #[test]
    fn propagator_matches_transform_path() {
        let d = op(40);
        let u = random_state(*d.grid(), 8);
        let p = d.propagator(0.37).unwrap();
        let a = p.apply(&u);
        let b = d.semigroup_apply(0.37, &u).unwrap();
        assert!(a.sup_distance(&b) < 1e-13);
        let mut c = u.clone();
        let mut scratch = Vec::new();
        p.apply_in_place(&mut c, &mut scratch);
        assert_eq!(a, c);
    }

    #[test]
    fn thomas_small_system() {
        // [2 1 0; 1 3 1; 0 1 4] x = [3 5 5] -> x = [1 1 1]
        let x = thomas_solve(&[1.0, 1.0], &[2.0, 3.0, 4.0], &[1.0, 1.0], &[3.0, 5.0, 5.0]);
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }
}
