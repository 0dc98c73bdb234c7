use rayon::prelude::*;

use super::{ClipStats, Stepper, TrajectoryRecord};
use crate::diagnostics::{max_positivity_functional, DEFAULT_EPSILON};
use crate::error::SimError;
use crate::grid::Grid1D;
use crate::noise::PathSeed;

/// Paths are grouped into fixed blocks by index; each block is reduced
/// serially and the blocks are merged left to right. The reduction tree
/// therefore depends only on `n_paths`, never on the thread count.
const BLOCK: u64 = 8;

/// One-pass mean / second-moment accumulator over vectors of fixed length.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl MomentAccumulator {
    pub fn new(len: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, sample: impl ExactSizeIterator<Item = f64>) {
        debug_assert_eq!(sample.len(), self.mean.len());
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(sample) {
            let delta = x - *m;
            *m += delta / n;
            *s += delta * (x - *m);
        }
    }

    /// Pairwise (Chan et al.) merge.
    pub fn merge(&mut self, other: &MomentAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            self.clone_from(other);
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
        }
        self.count += other.count;
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample variance, zero for fewer than two samples.
    pub fn variance(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![0.0; self.mean.len()];
        }
        let d = (self.count - 1) as f64;
        self.m2.iter().map(|s| s / d).collect()
    }
}

/// Monte Carlo moments per recorded time and node.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub grid: Grid1D,
    pub n_paths: u64,
    /// Indexed `[(frame * 3 + compartment) * n_cells + node]`.
    pub fields: MomentAccumulator,
    /// Domain integrals, indexed `[frame * 3 + compartment]`.
    pub totals: MomentAccumulator,
    pub jump_count: u64,
    pub clip: ClipStats,
    pub sup_max: f64,
    /// Largest positivity functional over all paths and frames, at
    /// [`DEFAULT_EPSILON`].
    pub positivity_max: f64,
}

impl EnsembleStats {
    fn empty(times: Vec<f64>, grid: Grid1D) -> Self {
        let frames = times.len();
        Self {
            fields: MomentAccumulator::new(frames * 3 * grid.n_cells()),
            totals: MomentAccumulator::new(frames * 3),
            times,
            grid,
            n_paths: 0,
            jump_count: 0,
            clip: ClipStats::default(),
            sup_max: 0.0,
            positivity_max: 0.0,
        }
    }

    fn push(&mut self, record: &TrajectoryRecord) -> Result<(), SimError> {
        let fields = record
            .states
            .iter()
            .flat_map(|s| s.components().into_iter().flat_map(|c| c.values().iter().copied()))
            .collect::<Vec<_>>();
        self.fields.push(fields.into_iter());
        let totals = record
            .states
            .iter()
            .flat_map(|s| s.components().map(|c| c.integrate()))
            .collect::<Vec<_>>();
        self.totals.push(totals.into_iter());
        self.n_paths += 1;
        self.jump_count += record.jump_log.len() as u64;
        self.clip.merge(&record.clip);
        self.sup_max = record
            .states
            .iter()
            .map(|s| s.sup_norm())
            .fold(self.sup_max, f64::max);
        self.positivity_max = self
            .positivity_max
            .max(max_positivity_functional(DEFAULT_EPSILON, record)?);
        Ok(())
    }

    fn merge(&mut self, other: &EnsembleStats) {
        self.fields.merge(&other.fields);
        self.totals.merge(&other.totals);
        self.n_paths += other.n_paths;
        self.jump_count += other.jump_count;
        self.clip.merge(&other.clip);
        self.sup_max = self.sup_max.max(other.sup_max);
        self.positivity_max = self.positivity_max.max(other.positivity_max);
    }

    fn range(&self, frame: usize, compartment: usize) -> std::ops::Range<usize> {
        let n = self.grid.n_cells();
        let start = (frame * 3 + compartment) * n;
        start..start + n
    }

    /// Nodewise mean of one compartment at one recorded time.
    pub fn mean(&self, frame: usize, compartment: usize) -> &[f64] {
        &self.fields.mean()[self.range(frame, compartment)]
    }

    pub fn variance(&self, frame: usize, compartment: usize) -> Vec<f64> {
        let r = self.range(frame, compartment);
        if self.fields.count() < 2 {
            return vec![0.0; r.len()];
        }
        let d = (self.fields.count() - 1) as f64;
        self.fields.m2[r].iter().map(|s| s / d).collect()
    }

    /// Mean of the domain integral of one compartment.
    pub fn total_mean(&self, frame: usize, compartment: usize) -> f64 {
        self.totals.mean()[frame * 3 + compartment]
    }

    pub fn total_variance(&self, frame: usize, compartment: usize) -> f64 {
        self.totals.variance()[frame * 3 + compartment]
    }
}

fn run_block(
    stepper: &Stepper,
    u0: &crate::grid::StateField,
    master_seed: u64,
    paths: std::ops::Range<u64>,
) -> Result<Option<EnsembleStats>, SimError> {
    let mut acc: Option<EnsembleStats> = None;
    for p in paths {
        let record = stepper
            .run_path(u0, PathSeed::new(master_seed, p))
            .map_err(|e| SimError::PathFailure {
                path_index: p,
                source: Box::new(e),
            })?;
        acc.get_or_insert_with(|| EnsembleStats::empty(record.times.clone(), *u0.grid()))
            .push(&record)?;
    }
    Ok(acc)
}

/// Runs paths `0..n_paths` and accumulates their moments. Serial and parallel
/// execution produce bit-identical statistics.
pub fn run_ensemble(
    stepper: &Stepper,
    u0: &crate::grid::StateField,
    master_seed: u64,
    n_paths: u64,
    parallel: bool,
) -> Result<EnsembleStats, SimError> {
    if n_paths == 0 {
        return Err(crate::error::invalid("n_paths", "must be >= 1"));
    }
    let blocks: Vec<_> = (0..n_paths.div_ceil(BLOCK))
        .map(|b| b * BLOCK..((b + 1) * BLOCK).min(n_paths))
        .collect();
    let partials: Vec<Result<Option<EnsembleStats>, SimError>> = if parallel {
        blocks
            .into_par_iter()
            .map(|r| run_block(stepper, u0, master_seed, r))
            .collect()
    } else {
        blocks
            .into_iter()
            .map(|r| run_block(stepper, u0, master_seed, r))
            .collect()
    };
    let mut total: Option<EnsembleStats> = None;
    for part in partials {
        if let Some(stats) = part? {
            match total.as_mut() {
                Some(t) => t.merge(&stats),
                None => total = Some(stats),
            }
        }
    }
    Ok(total.expect("at least one path"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_single_pass() {
        let data: Vec<[f64; 2]> = (0..37)
            .map(|i| [(i as f64 * 0.37).sin(), (i as f64).sqrt()])
            .collect();
        let mut whole = MomentAccumulator::new(2);
        for d in &data {
            whole.push(d.iter().copied());
        }
        let mut left = MomentAccumulator::new(2);
        let mut right = MomentAccumulator::new(2);
        for d in &data[..15] {
            left.push(d.iter().copied());
        }
        for d in &data[15..] {
            right.push(d.iter().copied());
        }
        left.merge(&right);
        for k in 0..2 {
            assert!((left.mean()[k] - whole.mean()[k]).abs() < 1e-14);
            assert!((left.variance()[k] - whole.variance()[k]).abs() < 1e-13);
            // two-pass reference
            let m = data.iter().map(|d| d[k]).sum::<f64>() / 37.0;
            let v = data.iter().map(|d| (d[k] - m).powi(2)).sum::<f64>() / 36.0;
            assert!((whole.variance()[k] - v).abs() < 1e-13);
        }
    }

    #[test]
    fn single_sample_has_zero_variance() {
        let mut acc = MomentAccumulator::new(3);
        acc.push([1.0, 2.0, 3.0].into_iter());
        assert_eq!(acc.variance(), vec![0.0; 3]);
        assert_eq!(acc.mean(), &[1.0, 2.0, 3.0]);
    }
}
