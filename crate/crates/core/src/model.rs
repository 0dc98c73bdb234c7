//! Epidemic coefficients, incidence functions and the reaction/jump operators.
//!
//! All state-dependent operators clip their input at zero (`u ∨ 0`) before
//! evaluating, so they are well defined on fields that carry small negative
//! round-off.

use crate::error::{invalid, SimError};
use crate::grid::{ScalarField, StateField};

/// Incidence rate `F(S, I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Incidence {
    /// `β s i / (s + i)`, zero at the origin.
    Standard,
    /// `β s i / (1 + a i + b s i)` with `a, b ≥ 0`, `a + b ≠ 0`.
    HollingCrowleyMartin { a: f64, b: f64 },
}

impl Incidence {
    pub fn validate(&self) -> Result<(), SimError> {
        if let Incidence::HollingCrowleyMartin { a, b } = *self {
            if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0) {
                return Err(invalid("incidence", format!("a and b must be >= 0, got a={a}, b={b}")));
            }
            if a + b == 0.0 {
                return Err(invalid("incidence", "Holling/Crowley-Martin requires a + b != 0"));
            }
        }
        Ok(())
    }

    /// Evaluates the rate on already clipped arguments.
    #[inline]
    pub fn rate(&self, s: f64, i: f64, beta: f64) -> f64 {
        debug_assert!(s >= 0.0 && i >= 0.0);
        match *self {
            Incidence::Standard => {
                let total = s + i;
                if total > 0.0 {
                    beta * s * i / total
                } else {
                    0.0
                }
            }
            Incidence::HollingCrowleyMartin { a, b } => beta * s * i / (1.0 + a * i + b * s * i),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Incidence::Standard => "standard",
            Incidence::HollingCrowleyMartin { .. } => "holling",
        }
    }
}

fn check_nonneg(name: &'static str, v: f64) -> Result<(), SimError> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(invalid(name, format!("must be finite and >= 0, got {v}")));
    }
    Ok(())
}

pub fn incidence_standard(s: f64, i: f64, beta: f64) -> Result<f64, SimError> {
    check_nonneg("s", s)?;
    check_nonneg("i", i)?;
    check_nonneg("beta", beta)?;
    Ok(Incidence::Standard.rate(s, i, beta))
}

pub fn incidence_holling(s: f64, i: f64, beta: f64, a: f64, b: f64) -> Result<f64, SimError> {
    check_nonneg("s", s)?;
    check_nonneg("i", i)?;
    check_nonneg("beta", beta)?;
    let inc = Incidence::HollingCrowleyMartin { a, b };
    inc.validate()?;
    Ok(inc.rate(s, i, beta))
}

/// Demographic and epidemic coefficients, stored per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    lambda_birth: Vec<f64>,
    mu: Vec<f64>,
    gamma: Vec<f64>,
    beta: Vec<f64>,
    incidence: Incidence,
    diffusion: [f64; 3],
    lipschitz: f64,
}

impl ModelParams {
    pub fn new(
        lambda_birth: Vec<f64>,
        mu: Vec<f64>,
        gamma: Vec<f64>,
        beta: Vec<f64>,
        incidence: Incidence,
        diffusion: [f64; 3],
    ) -> Result<Self, SimError> {
        let n = lambda_birth.len();
        for (name, profile) in [("lambda", &lambda_birth), ("mu", &mu), ("gamma", &gamma), ("beta", &beta)] {
            if profile.len() != n {
                return Err(SimError::DimensionMismatch {
                    expected: n,
                    found: profile.len(),
                });
            }
            if let Some(v) = profile.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(invalid(name, format!("profile entries must be finite and >= 0, got {v}")));
            }
        }
        if n == 0 {
            return Err(invalid("lambda", "profiles must not be empty"));
        }
        incidence.validate()?;
        if diffusion.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(invalid("diffusion", format!("rates must be > 0, got {diffusion:?}")));
        }
        let max_beta = beta.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            lambda_birth,
            mu,
            gamma,
            beta,
            incidence,
            diffusion,
            lipschitz: 2.0 * max_beta,
        })
    }

    /// Spatially constant coefficients on `n_cells` nodes.
    pub fn homogeneous(
        n_cells: usize,
        lambda_birth: f64,
        mu: f64,
        gamma: f64,
        beta: f64,
        incidence: Incidence,
        diffusion: [f64; 3],
    ) -> Result<Self, SimError> {
        Self::new(
            vec![lambda_birth; n_cells],
            vec![mu; n_cells],
            vec![gamma; n_cells],
            vec![beta; n_cells],
            incidence,
            diffusion,
        )
    }

    /// Overrides the default incidence Lipschitz bound `2 max β`.
    pub fn with_lipschitz(mut self, lf: f64) -> Result<Self, SimError> {
        if !(lf.is_finite() && lf > 0.0) {
            return Err(invalid("lipschitz", format!("must be > 0, got {lf}")));
        }
        self.lipschitz = lf;
        Ok(self)
    }

    pub fn n_cells(&self) -> usize {
        self.lambda_birth.len()
    }

    pub fn lambda_birth(&self) -> &[f64] {
        &self.lambda_birth
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn incidence(&self) -> Incidence {
        self.incidence
    }

    pub fn diffusion(&self) -> [f64; 3] {
        self.diffusion
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn is_homogeneous(&self) -> bool {
        [&self.lambda_birth, &self.mu, &self.gamma, &self.beta]
            .iter()
            .all(|p| p.iter().all(|v| *v == p[0]))
    }

    /// Nodewise reaction terms written into `out`.
    pub fn reaction_into(&self, u: &StateField, out: &mut StateField) {
        let (s_in, i_in, r_in) = (u.s.values(), u.i.values(), u.r.values());
        let [ds, di, dr] = out.components_mut();
        let (ds, di, dr) = (ds.values_mut(), di.values_mut(), dr.values_mut());
        for j in 0..self.n_cells() {
            let s = s_in[j].max(0.0);
            let i = i_in[j].max(0.0);
            let r = r_in[j].max(0.0);
            let mu = self.mu[j];
            let gamma = self.gamma[j];
            let f = self.incidence.rate(s, i, self.beta[j]);
            ds[j] = self.lambda_birth[j] - f - mu * s;
            di[j] = f - (mu + gamma) * i;
            dr[j] = gamma * i - mu * r;
        }
    }
}

/// `(Λ − F(s,i) − μs, F(s,i) − (μ+γ)i, γi − μr)` with `(s,i,r) = u ∨ 0`.
pub fn reaction_rhs(p: &ModelParams, u: &StateField) -> StateField {
    let mut out = StateField::zeros(*u.grid());
    p.reaction_into(u, &mut out);
    out
}

/// Jump amplitudes `C_i(z_k, x_j)`, laid out per compartment as `[mark][node]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpCoefficients {
    n_marks: usize,
    n_cells: usize,
    values: [Vec<f64>; 3],
}

impl JumpCoefficients {
    pub fn new(n_marks: usize, n_cells: usize, values: [Vec<f64>; 3]) -> Result<Self, SimError> {
        for v in &values {
            if v.len() != n_marks * n_cells {
                return Err(SimError::DimensionMismatch {
                    expected: n_marks * n_cells,
                    found: v.len(),
                });
            }
            if let Some(c) = v.iter().find(|c| !(c.is_finite() && 1.0 + **c > 0.0)) {
                return Err(invalid(
                    "jump_coefficients",
                    format!("need finite values with 1 + C > 0, got {c}"),
                ));
            }
        }
        Ok(Self {
            n_marks,
            n_cells,
            values,
        })
    }

    /// Same coefficient for every mark and node.
    pub fn uniform(n_marks: usize, n_cells: usize, c: [f64; 3]) -> Result<Self, SimError> {
        Self::new(n_marks, n_cells, c.map(|ci| vec![ci; n_marks * n_cells]))
    }

    /// One spatially constant triple per mark.
    pub fn per_mark(n_cells: usize, per_mark: &[[f64; 3]]) -> Result<Self, SimError> {
        let values = [0, 1, 2].map(|c| {
            per_mark
                .iter()
                .flat_map(|m| std::iter::repeat_n(m[c], n_cells))
                .collect()
        });
        Self::new(per_mark.len(), n_cells, values)
    }

    pub fn zero(n_marks: usize, n_cells: usize) -> Self {
        Self {
            n_marks,
            n_cells,
            values: [0, 1, 2].map(|_| vec![0.0; n_marks * n_cells]),
        }
    }

    pub fn n_marks(&self) -> usize {
        self.n_marks
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Coefficients of compartment `c` for mark `k`, one per node.
    pub fn mark(&self, c: usize, k: usize) -> &[f64] {
        &self.values[c][k * self.n_cells..(k + 1) * self.n_cells]
    }

    /// `max_i sup |C_i|`.
    pub fn sup_abs(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Spatial mean of `1 + C_i(z_k, ·)` for each compartment.
    pub fn mean_factors(&self, k: usize) -> [f64; 3] {
        [0, 1, 2].map(|c| {
            let m = self.mark(c, k);
            1.0 + m.iter().sum::<f64>() / m.len() as f64
        })
    }
}

/// Increment `C_i(z_k, x) (u_i ∨ 0)` produced when an atom with mark `k` fires.
pub fn jump_multiplier(
    jc: &JumpCoefficients,
    mark_index: usize,
    u: &StateField,
) -> Result<StateField, SimError> {
    if mark_index >= jc.n_marks() {
        return Err(SimError::MarkOutOfRange {
            index: mark_index,
            len: jc.n_marks(),
        });
    }
    if u.grid().n_cells() != jc.n_cells() {
        return Err(SimError::DimensionMismatch {
            expected: jc.n_cells(),
            found: u.grid().n_cells(),
        });
    }
    Ok(u.map_components(|c, field| {
        let coeff = jc.mark(c, mark_index);
        let values = field
            .values()
            .iter()
            .zip(coeff)
            .map(|(v, k)| k * v.max(0.0))
            .collect();
        ScalarField::from_vec_unchecked(*field.grid(), values)
    }))
}

/// Quintic smoothstep cutoff: 1 on `[0, M]`, 0 beyond `2M`, C² in between.
pub fn truncation_factor(m: f64, r: f64) -> f64 {
    if r <= m {
        return 1.0;
    }
    if r >= 2.0 * m {
        return 0.0;
    }
    let t = (r - m) / m;
    (1.0 - t * t * t * (t * (6.0 * t - 15.0) + 10.0)).clamp(0.0, 1.0)
}

/// Truncated drift `F(Π_M(‖u‖_∞) u)`.
pub fn truncate_drift(m: f64, p: &ModelParams, u: &StateField) -> Result<StateField, SimError> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(invalid("M", format!("truncation level must be > 0, got {m}")));
    }
    let factor = truncation_factor(m, u.sup_norm());
    let scaled = u.map_components(|_, f| f.map(|v| v * factor));
    Ok(reaction_rhs(p, &scaled))
}

/// `Λβ / (μ(μ+γ))` for constant coefficients.
pub fn basic_reproduction_number(p: &ModelParams) -> Result<f64, SimError> {
    if !p.is_homogeneous() {
        return Err(SimError::SpatiallyVarying("the basic reproduction number"));
    }
    let (l, b, mu, g) = (p.lambda_birth[0], p.beta[0], p.mu[0], p.gamma[0]);
    Ok(l * b / (mu * (mu + g)))
}

/// `4 (T L_F² + (max_i sup|C_i|)² ν(Z))`.
pub fn contraction_lambda_bound(t: f64, lf: f64, jc: &JumpCoefficients, nu_total: f64) -> f64 {
    let c = jc.sup_abs();
    4.0 * (t * lf * lf + c * c * nu_total)
}
