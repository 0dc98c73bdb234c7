//! Runtime checks for positivity, boundedness and the jump isometry.

use crate::grid::StateField;
use crate::model::JumpCoefficients;
use crate::noise::{sample_jump_events, MarkMeasure, PathSeed};
use crate::error::{invalid, SimError};
use crate::schemes::TrajectoryRecord;

/// Default cutoff width for pathwise positivity checks.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// C² surrogate for the squared negative part.
pub fn eta_eps(epsilon: f64, r: f64) -> f64 {
    if r < -epsilon {
        r * r - epsilon * epsilon / 6.0
    } else if r < 0.0 {
        -(r * r * r / epsilon) * (r / (2.0 * epsilon) + 4.0 / 3.0)
    } else {
        0.0
    }
}

/// C¹ surrogate for the positive part.
pub fn zeta_eps(epsilon: f64, r: f64) -> f64 {
    if r >= epsilon {
        r
    } else if r > 0.0 {
        let e2 = epsilon * epsilon;
        r.powi(4) / (e2 * epsilon) - 3.0 * r.powi(3) / e2 + 3.0 * r * r / epsilon
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityReport {
    /// `Σ_i ∫ η_ε(u_i) dx`.
    pub j_value: f64,
    /// Most negative entry, or 0.
    pub worst_negative: f64,
    pub nodes_negative: usize,
}

pub fn positivity_functional(epsilon: f64, u: &StateField) -> Result<PositivityReport, SimError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid("epsilon", format!("must be > 0, got {epsilon}")));
    }
    let mut j_value = 0.0;
    let mut worst_negative = 0.0f64;
    let mut nodes_negative = 0;
    for field in u.components() {
        j_value += field.map(|v| eta_eps(epsilon, v)).integrate();
        for &v in field.values() {
            if v < 0.0 {
                nodes_negative += 1;
                worst_negative = worst_negative.min(v);
            }
        }
    }
    Ok(PositivityReport {
        j_value,
        worst_negative,
        nodes_negative,
    })
}

/// Largest `J` over all recorded frames.
pub fn max_positivity_functional(epsilon: f64, record: &TrajectoryRecord) -> Result<f64, SimError> {
    record
        .states
        .iter()
        .map(|s| positivity_functional(epsilon, s).map(|r| r.j_value))
        .try_fold(0.0, |m, j| j.map(|j| f64::max(m, j)))
}

/// Earliest recorded time at which `‖u‖_∞ ≥ M`.
pub fn sup_norm_monitor(m: f64, record: &TrajectoryRecord) -> Result<Option<f64>, SimError> {
    if !(m > 0.0) {
        return Err(invalid("M", format!("must be > 0, got {m}")));
    }
    Ok(record
        .times
        .iter()
        .zip(&record.states)
        .find(|(_, s)| s.sup_norm() >= m)
        .map(|(t, _)| *t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsometryCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub z_score: f64,
}

/// Monte Carlo check of `E|∫∫ g dÑ|² = T Σ_k w_k g²` for a constant integrand.
///
/// `jc` supplies the mark dimension only; the integrand is `g_const` for every
/// mark.
pub fn ito_isometry_check(
    measure: &MarkMeasure,
    jc: &JumpCoefficients,
    g_const: f64,
    horizon: f64,
    n_paths: u64,
    seed: u64,
) -> Result<IsometryCheck, SimError> {
    if n_paths < 100 {
        return Err(invalid("n_paths", format!("need at least 100 paths, got {n_paths}")));
    }
    if jc.n_marks() != measure.len() {
        return Err(SimError::DimensionMismatch {
            expected: measure.len(),
            found: jc.n_marks(),
        });
    }
    let rhs = horizon * measure.atoms().iter().map(|(_, w)| w * g_const * g_const).sum::<f64>();
    let compensator = horizon * measure.total() * g_const;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for p in 0..n_paths {
        let events = sample_jump_events(PathSeed::new(seed, p), measure, horizon)?;
        let x = events.len() as f64 * g_const - compensator;
        let y = x * x;
        let delta = y - mean;
        mean += delta / (p + 1) as f64;
        m2 += delta * (y - mean);
    }
    let var = if n_paths > 1 { m2 / (n_paths - 1) as f64 } else { 0.0 };
    let se = (var / n_paths as f64).sqrt();
    let z_score = if se > 0.0 {
        (mean - rhs) / se
    } else if mean == rhs {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(IsometryCheck {
        lhs: mean,
        rhs,
        z_score,
    })
}
