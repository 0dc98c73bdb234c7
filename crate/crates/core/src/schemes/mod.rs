//! Time stepping for the three noise regimes.
//!
//! Every stepper treats diffusion through the exact discrete semigroup over
//! the step (exponential Euler / splitting form), so there is no parabolic
//! step-size restriction.
//!
//! | regime        | scheme                                                   |
//! |---------------|----------------------------------------------------------|
//! | deterministic | Strang: half diffusion, RK4 reaction, half diffusion     |
//! | Gaussian      | diffusion, Euler drift, diagonal Milstein noise          |
//! | Lévy          | diffusion, Euler drift − compensator, exact-time jumps   |
//! | Lévy + Yosida | as Lévy with the reaction smoothed by `θ R`              |

mod ensemble;

pub use ensemble::{run_ensemble, EnsembleStats, MomentAccumulator};

use crate::error::{invalid, SimError};
use crate::grid::{ScalarField, StateField};
use crate::model::{JumpCoefficients, ModelParams};
use crate::noise::{
    compensator_coefficients, sample_jump_events, GaussianStream, JumpEvent, MarkMeasure,
    PathSeed,
};
use crate::semigroup::{DiffusionOperator, Propagator};

/// Stochastic forcing of the model.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    Deterministic,
    /// Multiplicative `σ_i u_i dW_i`; `scale_by_inv_sqrt_dx` multiplies the
    /// per-node increments by `1/sqrt(dx)`.
    Gaussian {
        sigma: [f64; 3],
        scale_by_inv_sqrt_dx: bool,
    },
    Levy {
        measure: MarkMeasure,
        coefficients: JumpCoefficients,
    },
}

impl NoiseSpec {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseSpec::Deterministic => "deterministic",
            NoiseSpec::Gaussian { .. } => "gaussian",
            NoiseSpec::Levy { .. } => "levy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchemeKind {
    DeterministicSplitting,
    GaussianMilstein,
    LevyEuler,
    LevyEulerYosida { theta: f64 },
}

impl SchemeKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::DeterministicSplitting => "splitting",
            SchemeKind::GaussianMilstein => "milstein",
            SchemeKind::LevyEuler => "euler",
            SchemeKind::LevyEulerYosida { .. } => "euler-yosida",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub dt: f64,
    pub t_end: f64,
    pub kind: SchemeKind,
    pub record_every: usize,
    pub clip_negatives: bool,
}

impl SchemeConfig {
    pub fn new(dt: f64, t_end: f64, kind: SchemeKind) -> Self {
        Self {
            dt,
            t_end,
            kind,
            record_every: 1,
            clip_negatives: true,
        }
    }

    pub fn record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn clip_negatives(mut self, clip: bool) -> Self {
        self.clip_negatives = clip;
        self
    }

    /// Number of steps; `t_end / dt` must be an integer up to rounding.
    pub fn n_steps(&self) -> Result<usize, SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(invalid("t_end", format!("must be > 0, got {}", self.t_end)));
        }
        if self.dt > self.t_end {
            return Err(invalid("dt", "must not exceed t_end"));
        }
        if self.record_every == 0 {
            return Err(invalid("record_every", "must be >= 1"));
        }
        if let SchemeKind::LevyEulerYosida { theta } = self.kind {
            if !(theta > 0.0 && theta.is_finite()) {
                return Err(invalid("theta", format!("must be > 0, got {theta}")));
            }
        }
        let n = (self.t_end / self.dt).round();
        if (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(invalid(
                "dt",
                format!("t_end = {} is not an integer multiple of dt = {}", self.t_end, self.dt),
            ));
        }
        Ok(n as usize)
    }

    /// Step size actually used: `t_end / n_steps`.
    pub fn effective_dt(&self) -> Result<f64, SimError> {
        Ok(self.t_end / self.n_steps()? as f64)
    }
}

/// Counters for the positivity clip.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClipStats {
    /// Node values that were negative after a step (and reset to zero when
    /// clipping is on).
    pub count: u64,
    /// Most negative value seen before clipping (0 if none).
    pub worst_undershoot: f64,
}

impl ClipStats {
    pub fn merge(&mut self, other: &ClipStats) {
        self.count += other.count;
        self.worst_undershoot = self.worst_undershoot.min(other.worst_undershoot);
    }
}

/// One simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<StateField>,
    pub jump_log: Vec<JumpEvent>,
    pub clip: ClipStats,
}

impl TrajectoryRecord {
    pub fn final_state(&self) -> &StateField {
        self.states.last().expect("record holds at least the initial state")
    }
}

/// Steppers bound to one model, noise, and step size.
#[derive(Debug, Clone)]
pub struct Stepper {
    params: ModelParams,
    noise: NoiseSpec,
    config: SchemeConfig,
    diffusion: DiffusionOperator,
    dt: f64,
    n_steps: usize,
    full: Propagator,
    half: Propagator,
    yosida: Option<Propagator>,
    compensator: [Vec<f64>; 3],
    noise_scale: f64,
}

impl Stepper {
    pub fn new(
        params: ModelParams,
        noise: NoiseSpec,
        config: SchemeConfig,
        diffusion: DiffusionOperator,
    ) -> Result<Self, SimError> {
        let n = diffusion.grid().n_cells();
        if params.n_cells() != n {
            return Err(SimError::DimensionMismatch {
                expected: n,
                found: params.n_cells(),
            });
        }
        let compatible = matches!(
            (&noise, config.kind),
            (NoiseSpec::Deterministic, SchemeKind::DeterministicSplitting)
                | (NoiseSpec::Gaussian { .. }, SchemeKind::GaussianMilstein)
                | (NoiseSpec::Levy { .. }, SchemeKind::LevyEuler)
                | (NoiseSpec::Levy { .. }, SchemeKind::LevyEulerYosida { .. })
        );
        if !compatible {
            return Err(SimError::IncompatibleScheme {
                noise: noise.name(),
                scheme: config.kind.name(),
            });
        }
        let n_steps = config.n_steps()?;
        let dt = config.t_end / n_steps as f64;
        let compensator = match &noise {
            NoiseSpec::Levy {
                measure,
                coefficients,
            } => {
                if measure.len() != coefficients.n_marks() {
                    return Err(SimError::DimensionMismatch {
                        expected: measure.len(),
                        found: coefficients.n_marks(),
                    });
                }
                if coefficients.n_cells() != n {
                    return Err(SimError::DimensionMismatch {
                        expected: n,
                        found: coefficients.n_cells(),
                    });
                }
                compensator_coefficients(measure, coefficients)
            }
            _ => [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        };
        let mut noise_scale = 1.0;
        if let NoiseSpec::Gaussian {
            sigma,
            scale_by_inv_sqrt_dx,
        } = &noise
        {
            if sigma.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                return Err(invalid("sigma", format!("must be >= 0, got {sigma:?}")));
            }
            if *scale_by_inv_sqrt_dx {
                noise_scale = 1.0 / diffusion.grid().dx().sqrt();
            }
        }
        let yosida = match config.kind {
            SchemeKind::LevyEulerYosida { theta } => Some(diffusion.yosida_operator(theta)?),
            _ => None,
        };
        Ok(Self {
            full: diffusion.propagator(dt)?,
            half: diffusion.propagator(dt / 2.0)?,
            params,
            noise,
            config,
            diffusion,
            dt,
            n_steps,
            yosida,
            compensator,
            noise_scale,
        })
    }

    /// Stepper whose diffusion rates are taken from `params`.
    pub fn from_params(
        params: ModelParams,
        noise: NoiseSpec,
        config: SchemeConfig,
        grid: crate::grid::Grid1D,
    ) -> Result<Self, SimError> {
        let diffusion = DiffusionOperator::new(grid, params.diffusion())?;
        Self::new(params, noise, config, diffusion)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    pub fn diffusion(&self) -> &DiffusionOperator {
        &self.diffusion
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    fn time_of(&self, k: usize) -> f64 {
        self.config.t_end * k as f64 / self.n_steps as f64
    }

    fn finish(&self, mut u: StateField, step: usize, time: f64) -> Result<(StateField, ClipStats), SimError> {
        if !u.is_finite() {
            return Err(SimError::StepFailure { step, time });
        }
        let mut stats = ClipStats::default();
        for field in u.components_mut() {
            for v in field.values_mut() {
                if *v < 0.0 {
                    stats.count += 1;
                    stats.worst_undershoot = stats.worst_undershoot.min(*v);
                    if self.config.clip_negatives {
                        *v = 0.0;
                    }
                }
            }
        }
        Ok((u, stats))
    }

    fn axpy(u: &mut StateField, a: f64, x: &StateField) {
        for (dst, src) in u.components_mut().into_iter().zip(x.components()) {
            for (d, s) in dst.values_mut().iter_mut().zip(src.values()) {
                *d += a * s;
            }
        }
    }

    fn rk4_reaction(&self, u: &StateField, h: f64) -> StateField {
        let grid = *u.grid();
        let mut k1 = StateField::zeros(grid);
        let mut k2 = StateField::zeros(grid);
        let mut k3 = StateField::zeros(grid);
        let mut k4 = StateField::zeros(grid);
        self.params.reaction_into(u, &mut k1);
        let mut tmp = u.clone();
        Self::axpy(&mut tmp, 0.5 * h, &k1);
        self.params.reaction_into(&tmp, &mut k2);
        tmp.clone_from(u);
        Self::axpy(&mut tmp, 0.5 * h, &k2);
        self.params.reaction_into(&tmp, &mut k3);
        tmp.clone_from(u);
        Self::axpy(&mut tmp, h, &k3);
        self.params.reaction_into(&tmp, &mut k4);
        let mut out = u.clone();
        Self::axpy(&mut out, h / 6.0, &k1);
        Self::axpy(&mut out, h / 3.0, &k2);
        Self::axpy(&mut out, h / 3.0, &k3);
        Self::axpy(&mut out, h / 6.0, &k4);
        out
    }

    fn deterministic_raw(&self, u: &StateField) -> StateField {
        let w = self.half.apply(u);
        let w = self.rk4_reaction(&w, self.dt);
        self.half.apply(&w)
    }

    fn lie_raw(&self, u: &StateField) -> StateField {
        let mut v = self.full.apply(u);
        let mut f = StateField::zeros(*u.grid());
        self.params.reaction_into(&v, &mut f);
        Self::axpy(&mut v, self.dt, &f);
        v
    }

    fn milstein_raw(&self, u: &StateField, dw: &[ScalarField; 3]) -> Result<StateField, SimError> {
        let sigma = match &self.noise {
            NoiseSpec::Gaussian { sigma, .. } => *sigma,
            _ => [0.0; 3],
        };
        for inc in dw {
            if inc.values().len() != u.grid().n_cells() {
                return Err(SimError::DimensionMismatch {
                    expected: u.grid().n_cells(),
                    found: inc.values().len(),
                });
            }
        }
        let v = self.full.apply(u);
        let mut f = StateField::zeros(*u.grid());
        self.params.reaction_into(&v, &mut f);
        let dt = self.dt;
        let mut out = v.clone();
        for (c, field) in out.components_mut().into_iter().enumerate() {
            let s = sigma[c];
            let drift = f.components()[c].values();
            let base = v.components()[c].values();
            for (j, value) in field.values_mut().iter_mut().enumerate() {
                let x = base[j].max(0.0);
                let dwj = dw[c].values()[j] * self.noise_scale;
                let noise = s * x * dwj + 0.5 * s * s * x * (dwj * dwj - dt * self.noise_scale.powi(2));
                *value += dt * drift[j] + noise;
            }
        }
        Ok(out)
    }

    fn levy_raw(&self, u: &StateField, t: f64, events: &[JumpEvent]) -> Result<StateField, SimError> {
        let end = t + self.dt;
        // tolerate the rounding of t + dt against the exact grid time
        let slack = 1e-12 * end.abs().max(1.0);
        for e in events {
            if !(e.time > t && e.time <= end + slack) {
                return Err(SimError::EventOutsideWindow {
                    time: e.time,
                    start: t,
                    end,
                });
            }
        }
        let (measure, jc) = match &self.noise {
            NoiseSpec::Levy {
                measure,
                coefficients,
            } => (measure, coefficients),
            _ => {
                if events.is_empty() {
                    return Ok(self.lie_raw(u));
                }
                return Err(SimError::IncompatibleScheme {
                    noise: self.noise.name(),
                    scheme: "euler",
                });
            }
        };
        let mut v = self.full.apply(u);
        let mut f = StateField::zeros(*u.grid());
        self.params.reaction_into(&v, &mut f);
        if let Some(y) = &self.yosida {
            f = y.apply(&f);
        }
        for (c, field) in v.components_mut().into_iter().enumerate() {
            let drift = f.components()[c].values();
            let comp = &self.compensator[c];
            for (j, value) in field.values_mut().iter_mut().enumerate() {
                let x = value.max(0.0);
                *value += self.dt * (drift[j] - comp[j] * x);
            }
        }
        for e in events {
            if e.mark_index >= measure.len() {
                return Err(SimError::MarkOutOfRange {
                    index: e.mark_index,
                    len: measure.len(),
                });
            }
            for (c, field) in v.components_mut().into_iter().enumerate() {
                for (value, coeff) in field.values_mut().iter_mut().zip(jc.mark(c, e.mark_index)) {
                    *value += coeff * value.max(0.0);
                }
            }
        }
        Ok(v)
    }

    /// Strang step: half diffusion, RK4 reaction, half diffusion.
    pub fn step_deterministic(&self, u: &StateField) -> Result<StateField, SimError> {
        Ok(self.finish(self.deterministic_raw(u), 0, self.dt)?.0)
    }

    /// Lie step: full diffusion then one explicit Euler reaction step.
    pub fn step_lie_euler(&self, u: &StateField) -> Result<StateField, SimError> {
        Ok(self.finish(self.lie_raw(u), 0, self.dt)?.0)
    }

    /// Diffusion, Euler drift, and diagonal Milstein terms
    /// `σ x ΔW + ½ σ² x (ΔW² − dt)` with `x = v ∨ 0`.
    pub fn step_gaussian_milstein(
        &self,
        u: &StateField,
        dw: &[ScalarField; 3],
    ) -> Result<StateField, SimError> {
        Ok(self.finish(self.milstein_raw(u, dw)?, 0, self.dt)?.0)
    }

    /// Exponential-Euler step over `(t, t + dt]` with the compensator
    /// subtracted and the multiplicative kicks of `events` applied in order.
    /// When the stepper was built for the Yosida scheme the reaction term is
    /// smoothed by `θ R`.
    pub fn step_levy_euler(
        &self,
        u: &StateField,
        t: f64,
        events: &[JumpEvent],
    ) -> Result<StateField, SimError> {
        Ok(self.finish(self.levy_raw(u, t, events)?, 0, t + self.dt)?.0)
    }

    /// Initial state used by the configured scheme (`θ R u₀` for Yosida).
    pub fn prepare_initial(&self, u0: &StateField) -> Result<StateField, SimError> {
        if u0.grid() != self.diffusion.grid() {
            return Err(SimError::InvalidGrid("initial state lives on a different grid".into()));
        }
        if !u0.is_finite() {
            return Err(invalid("initial", "initial state must be finite"));
        }
        if u0.min_value() < 0.0 {
            return Err(invalid("initial", "initial densities must be >= 0"));
        }
        Ok(match &self.yosida {
            Some(y) => y.apply(u0),
            None => u0.clone(),
        })
    }

    /// Integrates one path from `u0` with the noise streams of `seed`.
    pub fn run_path(&self, u0: &StateField, seed: PathSeed) -> Result<TrajectoryRecord, SimError> {
        let mut u = self.prepare_initial(u0)?;
        let events = match &self.noise {
            NoiseSpec::Levy { measure, .. } => sample_jump_events(seed, measure, self.config.t_end)?,
            _ => Vec::new(),
        };
        let mut gaussian = match &self.noise {
            NoiseSpec::Gaussian { .. } => Some(GaussianStream::new(seed)),
            _ => None,
        };
        let grid = *u.grid();
        let n = grid.n_cells();
        let mut dw_bufs = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];

        let capacity = self.n_steps / self.config.record_every + 2;
        let mut times = Vec::with_capacity(capacity);
        let mut states = Vec::with_capacity(capacity);
        times.push(0.0);
        states.push(u.clone());
        let mut clip = ClipStats::default();
        let mut next_event = 0;

        for k in 0..self.n_steps {
            let t = self.time_of(k);
            let t_next = self.time_of(k + 1);
            let raw = match self.config.kind {
                SchemeKind::DeterministicSplitting => self.deterministic_raw(&u),
                SchemeKind::GaussianMilstein => {
                    let stream = gaussian.as_mut().expect("gaussian stream");
                    stream.fill(self.dt, 1.0, &mut dw_bufs);
                    let dw = dw_bufs
                        .clone()
                        .map(|b| ScalarField::from_vec_unchecked(grid, b));
                    self.milstein_raw(&u, &dw)?
                }
                SchemeKind::LevyEuler | SchemeKind::LevyEulerYosida { .. } => {
                    let start = next_event;
                    let last_step = k + 1 == self.n_steps;
                    while next_event < events.len()
                        && (last_step || events[next_event].time <= t_next)
                    {
                        next_event += 1;
                    }
                    self.levy_raw(&u, t, &events[start..next_event])?
                }
            };
            let (next, stats) = self.finish(raw, k, t_next)?;
            clip.merge(&stats);
            u = next;
            if (k + 1) % self.config.record_every == 0 || k + 1 == self.n_steps {
                times.push(t_next);
                states.push(u.clone());
            }
        }
        Ok(TrajectoryRecord {
            times,
            states,
            jump_log: events,
            clip,
        })
    }
}

/// Builds a stepper from `params` and runs a single path.
pub fn run_path(
    params: &ModelParams,
    noise: &NoiseSpec,
    config: &SchemeConfig,
    u0: &StateField,
    seed: PathSeed,
) -> Result<TrajectoryRecord, SimError> {
    let stepper = Stepper::from_params(params.clone(), noise.clone(), *config, *u0.grid())?;
    stepper.run_path(u0, seed)
}
