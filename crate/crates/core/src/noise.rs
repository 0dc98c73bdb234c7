//! Noise sources: the compound-Poisson skeleton of the jump measure and
//! Gaussian increments for the comparison model.
//!
//! Every stream is derived from `(master_seed, path_index, purpose)` through a
//! ChaCha8 generator with an explicit stream id, so adding a consumer for one
//! purpose never shifts the draws seen by another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::{invalid, SimError};
use crate::grid::{Grid1D, ScalarField, StateField};
use crate::model::JumpCoefficients;

/// Finite atomic intensity measure `ν = Σ_k w_k δ_{z_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkMeasure {
    atoms: Vec<(f64, f64)>,
    total: f64,
}

impl MarkMeasure {
    /// Builds the measure from `(mark, weight)` pairs. An empty list yields the
    /// null measure (no jumps).
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self, SimError> {
        for &(z, w) in &atoms {
            if !z.is_finite() {
                return Err(invalid("marks", format!("mark value must be finite, got {z}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(invalid("marks", format!("atom weight must be > 0, got {w}")));
            }
        }
        let total = atoms.iter().map(|a| a.1).sum();
        Ok(Self { atoms, total })
    }

    /// One atom at `z = 1` carrying mass `total`.
    pub fn single(total: f64) -> Result<Self, SimError> {
        Self::new(vec![(1.0, total)])
    }

    pub fn empty() -> Self {
        Self {
            atoms: Vec::new(),
            total: 0.0,
        }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `ν(Z)`.
    pub fn total(&self) -> f64 {
        self.total
    }

    fn pick(&self, u: f64) -> usize {
        let target = u * self.total;
        let mut acc = 0.0;
        for (k, &(_, w)) in self.atoms.iter().enumerate() {
            acc += w;
            if target < acc {
                return k;
            }
        }
        self.atoms.len() - 1
    }
}

/// One atom of the Poisson random measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub mark_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPurpose {
    JumpTimes = 0,
    Marks = 1,
    Gaussian = 2,
}

/// Identifies the random streams of one sample path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathSeed {
    pub master_seed: u64,
    pub path_index: u64,
}

impl PathSeed {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        Self {
            master_seed,
            path_index,
        }
    }

    /// Generator for one purpose of this path.
    pub fn stream(&self, purpose: StreamPurpose) -> ChaCha8Rng {
        assert!(self.path_index < 1 << 62, "path index too large");
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream((self.path_index << 2) | purpose as u64);
        rng
    }
}

/// Compound-Poisson skeleton on `(0, T]`: exponential inter-arrival times with
/// rate `ν(Z)` and i.i.d. marks drawn with probabilities `w_k / ν(Z)`.
pub fn sample_jump_events(
    seed: PathSeed,
    measure: &MarkMeasure,
    horizon: f64,
) -> Result<Vec<JumpEvent>, SimError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("T", format!("horizon must be > 0, got {horizon}")));
    }
    if measure.is_empty() {
        return Ok(Vec::new());
    }
    let exp = Exp::new(measure.total()).map_err(|e| invalid("marks", e.to_string()))?;
    let mut times = seed.stream(StreamPurpose::JumpTimes);
    let mut marks = seed.stream(StreamPurpose::Marks);
    let mut events = Vec::new();
    let mut t = 0.0;
    loop {
        t += exp.sample(&mut times);
        if t > horizon {
            break;
        }
        let mark_index = if measure.len() == 1 {
            0
        } else {
            measure.pick(marks.random::<f64>())
        };
        events.push(JumpEvent { time: t, mark_index });
    }
    Ok(events)
}

/// `Σ_k w_k C_i(z_k, x) (u_i ∨ 0)`, the continuous compensator rate.
pub fn compensator_drift_rate(
    measure: &MarkMeasure,
    jc: &JumpCoefficients,
    u: &StateField,
) -> Result<StateField, SimError> {
    if measure.len() != jc.n_marks() {
        return Err(SimError::DimensionMismatch {
            expected: measure.len(),
            found: jc.n_marks(),
        });
    }
    if u.grid().n_cells() != jc.n_cells() {
        return Err(SimError::DimensionMismatch {
            expected: jc.n_cells(),
            found: u.grid().n_cells(),
        });
    }
    let rates = compensator_coefficients(measure, jc);
    Ok(u.map_components(|c, field| {
        let values = field
            .values()
            .iter()
            .zip(&rates[c])
            .map(|(v, k)| k * v.max(0.0))
            .collect();
        ScalarField::from_vec_unchecked(*field.grid(), values)
    }))
}

/// `Σ_k w_k C_i(z_k, x)` per compartment and node.
pub fn compensator_coefficients(measure: &MarkMeasure, jc: &JumpCoefficients) -> [Vec<f64>; 3] {
    [0, 1, 2].map(|c| {
        let mut acc = vec![0.0; jc.n_cells()];
        for (k, &(_, w)) in measure.atoms().iter().enumerate() {
            for (a, coeff) in acc.iter_mut().zip(jc.mark(c, k)) {
                *a += w * coeff;
            }
        }
        acc
    })
}

/// Per-node i.i.d. `N(0, dt)` increments for each compartment, drawn in
/// sequence from one path's Gaussian stream.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
}

impl GaussianStream {
    pub fn new(seed: PathSeed) -> Self {
        Self {
            rng: seed.stream(StreamPurpose::Gaussian),
        }
    }

    /// Fills the three buffers with `scale * sqrt(dt) * N(0,1)` draws.
    pub fn fill(&mut self, dt: f64, scale: f64, out: &mut [Vec<f64>; 3]) {
        let sd = scale * dt.sqrt();
        for buf in out.iter_mut() {
            for v in buf.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                *v = sd * z;
            }
        }
    }

    pub fn next_increments(&mut self, grid: &Grid1D, dt: f64) -> [ScalarField; 3] {
        let n = grid.n_cells();
        let mut bufs = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        self.fill(dt, 1.0, &mut bufs);
        bufs.map(|b| ScalarField::from_vec_unchecked(*grid, b))
    }
}

/// First set of Gaussian increments of a path.
pub fn sample_gaussian_increments(
    seed: PathSeed,
    grid: &Grid1D,
    dt: f64,
) -> Result<[ScalarField; 3], SimError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("must be > 0, got {dt}")));
    }
    Ok(GaussianStream::new(seed).next_increments(grid, dt))
}
