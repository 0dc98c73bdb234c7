use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use levy_sir::model::{basic_reproduction_number, contraction_lambda_bound};
use levy_sir::noise::sample_jump_events;
use levy_sir::schemes::run_ensemble;
use levy_sir::{JumpCoefficients, JumpEvent, NoiseSpec, PathSeed, Stepper, TrajectoryRecord};

use crate::config::{noise_for, scheme_kind_for, ExperimentConfig, NoiseKind};
use crate::output::{self, RunSummary, Staging, SummaryFile};
use crate::CliError;

/// Relative change between adjacent samples that counts as a jump.
pub const DISCONTINUITY_THRESHOLD: f64 = 0.05;

pub const SUMMARY_FILE: &str = "summary.json";

fn lambda_bound(cfg: &ExperimentConfig, noise: &NoiseSpec) -> f64 {
    let t = cfg.scheme.t_end;
    let lf = cfg.params.lipschitz();
    match noise {
        NoiseSpec::Levy {
            measure,
            coefficients,
        } => contraction_lambda_bound(t, lf, coefficients, measure.total()),
        _ => contraction_lambda_bound(t, lf, &JumpCoefficients::zero(1, cfg.grid.n_cells()), 0.0),
    }
}

fn coefficients(noise: &NoiseSpec) -> Option<&JumpCoefficients> {
    match noise {
        NoiseSpec::Levy { coefficients, .. } => Some(coefficients),
        _ => None,
    }
}

fn stepper_for(cfg: &ExperimentConfig, kind: NoiseKind) -> Result<Stepper, CliError> {
    let noise = noise_for(&cfg.raw, kind, cfg.grid.n_cells())?;
    let mut scheme = cfg.scheme;
    scheme.kind = scheme_kind_for(&cfg.raw, kind)?;
    Ok(Stepper::from_params(cfg.params.clone(), noise, scheme, cfg.grid)?)
}

/// Runs the configured regime: path 0 as a trajectory plus `paths` paths of
/// ensemble statistics. Returns the output directory.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let clock = Instant::now();
    let stepper = stepper_for(cfg, cfg.noise_kind)?;
    let paths = if cfg.noise_kind == NoiseKind::Deterministic { 1 } else { cfg.paths };
    let record = stepper.run_path(&cfg.initial, PathSeed::new(cfg.seed, 0))?;
    let stats = run_ensemble(&stepper, &cfg.initial, cfg.seed, paths, cfg.parallel)?;

    let mut logs: Vec<(u64, Vec<JumpEvent>)> = Vec::new();
    if let NoiseSpec::Levy { measure, .. } = stepper.noise() {
        for p in 0..paths {
            logs.push((p, sample_jump_events(PathSeed::new(cfg.seed, p), measure, cfg.scheme.t_end)?));
        }
    }

    let last = stats.times.len() - 1;
    let summary = RunSummary {
        regime: cfg.noise_kind.label().into(),
        scheme: stepper.config().kind.name().into(),
        incidence: cfg.params.incidence().name().into(),
        seed: cfg.seed,
        paths,
        dt: stepper.dt(),
        t_end: cfg.scheme.t_end,
        n_cells: cfg.grid.n_cells(),
        r0: basic_reproduction_number(&cfg.params).ok(),
        lambda_bound: lambda_bound(cfg, stepper.noise()),
        jump_count: stats.jump_count,
        clip_count: stats.clip.count,
        worst_undershoot: stats.clip.worst_undershoot,
        sup_norm_max: stats.sup_max,
        positivity_j_max: stats.positivity_max,
        final_totals_mean: [0, 1, 2].map(|c| stats.total_mean(last, c)),
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        discontinuities: Vec::new(),
    };

    let staging = Staging::new(&cfg.output_dir)?;
    output::write_trajectory(&staging.path("trajectory.csv"), &record)?;
    output::write_ensemble(&staging.path("ensemble.csv"), &stats)?;
    output::write_jumps(
        &staging.path("jumps.csv"),
        logs.iter().map(|(p, e)| (*p, e.as_slice())),
        coefficients(stepper.noise()),
    )?;
    output::write_summary(&staging.path(SUMMARY_FILE), &SummaryFile { runs: vec![summary] })?;
    staging.commit()
}

/// Times `t_{k+1}` at which `values` changes by more than `threshold`
/// relative to `values[k]` and a logged event lies within `window` of
/// `(t_k, t_{k+1}]`.
pub fn detect_discontinuities(
    times: &[f64],
    values: &[f64],
    events: &[JumpEvent],
    threshold: f64,
    window: f64,
) -> Vec<f64> {
    let mut found = Vec::new();
    for k in 0..times.len().saturating_sub(1) {
        let (a, b) = (values[k], values[k + 1]);
        let scale = a.abs();
        if scale == 0.0 || (b - a).abs() <= threshold * scale {
            continue;
        }
        let lo = times[k] - window;
        let hi = times[k + 1] + window;
        if events.iter().any(|e| e.time > lo && e.time <= hi) {
            found.push(times[k + 1]);
        }
    }
    found
}

/// Single-path runs of several regimes on shared parameters and seed.
pub fn cmd_compare(cfg: &ExperimentConfig, regimes: &[NoiseKind]) -> Result<PathBuf, CliError> {
    let regimes: Vec<NoiseKind> = if regimes.is_empty() {
        vec![cfg.noise_kind]
    } else {
        regimes.to_vec()
    };
    let steppers = regimes
        .iter()
        .map(|&k| stepper_for(cfg, k))
        .collect::<Result<Vec<_>, _>>()?;

    let probe = cfg.grid.nearest_node(0.0).unwrap_or(0);
    let window = cfg.scheme.dt * cfg.scheme.record_every as f64;
    let mut runs: Vec<(String, TrajectoryRecord)> = Vec::new();
    let mut summaries = Vec::new();
    let mut levy_log: Option<(Vec<JumpEvent>, Option<JumpCoefficients>)> = None;
    for (kind, stepper) in regimes.iter().zip(&steppers) {
        let clock = Instant::now();
        let record = stepper.run_path(&cfg.initial, PathSeed::new(cfg.seed, 0))?;
        let label = kind.label().to_string();
        let infected: Vec<f64> = record.states.iter().map(|s| s.i.values()[probe]).collect();
        let discontinuities = detect_discontinuities(
            &record.times,
            &infected,
            &record.jump_log,
            DISCONTINUITY_THRESHOLD,
            window,
        );
        let fin = record.final_state();
        summaries.push(RunSummary {
            regime: label.clone(),
            scheme: stepper.config().kind.name().into(),
            incidence: cfg.params.incidence().name().into(),
            seed: cfg.seed,
            paths: 1,
            dt: stepper.dt(),
            t_end: cfg.scheme.t_end,
            n_cells: cfg.grid.n_cells(),
            r0: basic_reproduction_number(&cfg.params).ok(),
            lambda_bound: lambda_bound(cfg, stepper.noise()),
            jump_count: record.jump_log.len() as u64,
            clip_count: record.clip.count,
            worst_undershoot: record.clip.worst_undershoot,
            sup_norm_max: record.states.iter().map(|s| s.sup_norm()).fold(0.0, f64::max),
            positivity_j_max: levy_sir::diagnostics::max_positivity_functional(
                levy_sir::diagnostics::DEFAULT_EPSILON,
                &record,
            )?,
            final_totals_mean: fin.components().map(|c| c.integrate()),
            wall_clock_seconds: clock.elapsed().as_secs_f64(),
            discontinuities,
        });
        if *kind == NoiseKind::Levy {
            levy_log = Some((record.jump_log.clone(), coefficients(stepper.noise()).cloned()));
        }
        runs.push((label, record));
    }

    let staging = Staging::new(&cfg.output_dir)?;
    output::write_compare(&staging.path("compare.csv"), &runs)?;
    output::write_paths_at(&staging.path("paths_x0.csv"), &runs, probe)?;
    for (label, record) in &runs {
        output::write_trajectory(&staging.path(&format!("trajectory_{label}.csv")), record)?;
    }
    if let Some((events, jc)) = &levy_log {
        output::write_jumps(&staging.path("jumps.csv"), [(0, events.as_slice())], jc.as_ref())?;
    }
    output::write_summary(&staging.path(SUMMARY_FILE), &SummaryFile { runs: summaries })?;
    staging.commit()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "n/a".into())
}

/// Human-readable rendering of a run directory's summary.
pub fn cmd_print_summary(dir: &Path) -> Result<String, CliError> {
    let summary = output::read_summary(&dir.join(SUMMARY_FILE))?;
    let mut out = String::new();
    for r in &summary.runs {
        let _ = writeln!(out, "regime            {} ({}, {} incidence)", r.regime, r.scheme, r.incidence);
        let _ = writeln!(out, "seed / paths      {} / {}", r.seed, r.paths);
        let _ = writeln!(out, "dt / t_end / n    {} / {} / {}", r.dt, r.t_end, r.n_cells);
        let _ = writeln!(out, "R0                {}", opt(r.r0));
        let _ = writeln!(out, "lambda bound      {:.6}", r.lambda_bound);
        let _ = writeln!(out, "jumps             {}", r.jump_count);
        let _ = writeln!(out, "clip activations  {} (worst {:e})", r.clip_count, r.worst_undershoot);
        let _ = writeln!(out, "sup-norm max      {:.6}", r.sup_norm_max);
        let _ = writeln!(out, "positivity J max  {:e}", r.positivity_j_max);
        let _ = writeln!(
            out,
            "final mean mass   S={:.6e} I={:.6e} R={:.6e}",
            r.final_totals_mean[0], r.final_totals_mean[1], r.final_totals_mean[2]
        );
        if !r.discontinuities.is_empty() {
            let _ = writeln!(out, "discontinuities   {} detected at x=0", r.discontinuities.len());
        }
        let _ = writeln!(out, "wall clock        {:.3} s", r.wall_clock_seconds);
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discontinuity_requires_jump_and_event() {
        let times = [0.0, 0.1, 0.2, 0.3, 0.4];
        let values = [1.0, 1.01, 1.2, 1.21, 1.5];
        let events = [JumpEvent {
            time: 0.15,
            mark_index: 0,
        }];
        assert_eq!(detect_discontinuities(&times, &values, &events, 0.05, 0.1), vec![0.2]);
        assert!(detect_discontinuities(&times, &values, &[], 0.05, 0.1).is_empty());
        let far = [JumpEvent {
            time: 0.05,
            mark_index: 0,
        }];
        // 0.05 is within one interval of (0.1, 0.2] but not of (0.3, 0.4]
        assert_eq!(detect_discontinuities(&times, &values, &far, 0.05, 0.1), vec![0.2]);
    }
}
