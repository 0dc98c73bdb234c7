//! CSV and JSON writers for run artefacts.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use levy_sir::{EnsembleStats, JumpCoefficients, JumpEvent, TrajectoryRecord};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const TRAJECTORY_HEADER: &str = "t,x,S,I,R";
pub const ENSEMBLE_HEADER: &str = "t,x,mean_S,var_S,mean_I,var_I,mean_R,var_R";
pub const JUMPS_HEADER: &str = "path,t,mark,compartment_factors";
pub const COMPARE_HEADER: &str = "regime,t,x,S,I,R";
pub const PATHS_HEADER: &str = "regime,t,x,S,I,R";

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_lines(path: &Path, header: &str, body: impl FnOnce(&mut String)) -> Result<(), CliError> {
    let mut text = String::with_capacity(1 << 16);
    text.push_str(header);
    text.push('\n');
    body(&mut text);
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(text.as_bytes()).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

fn push_row(out: &mut String, prefix: Option<&str>, cols: &[f64]) {
    if let Some(p) = prefix {
        out.push_str(p);
        out.push(',');
    }
    for (k, v) in cols.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push_str(&fmt_f64(*v));
    }
    out.push('\n');
}

fn trajectory_rows(out: &mut String, prefix: Option<&str>, record: &TrajectoryRecord, nodes: &[usize]) {
    for (t, state) in record.times.iter().zip(&record.states) {
        let grid = state.grid();
        for &j in nodes {
            push_row(
                out,
                prefix,
                &[
                    *t,
                    grid.node(j),
                    state.s.values()[j],
                    state.i.values()[j],
                    state.r.values()[j],
                ],
            );
        }
    }
}

pub fn write_trajectory(path: &Path, record: &TrajectoryRecord) -> Result<(), CliError> {
    let n = record.states[0].grid().n_cells();
    let nodes: Vec<usize> = (0..n).collect();
    write_lines(path, TRAJECTORY_HEADER, |out| trajectory_rows(out, None, record, &nodes))
}

pub fn write_ensemble(path: &Path, stats: &EnsembleStats) -> Result<(), CliError> {
    write_lines(path, ENSEMBLE_HEADER, |out| {
        for (f, t) in stats.times.iter().enumerate() {
            let means = [stats.mean(f, 0), stats.mean(f, 1), stats.mean(f, 2)];
            let vars = [stats.variance(f, 0), stats.variance(f, 1), stats.variance(f, 2)];
            for j in 0..stats.grid.n_cells() {
                push_row(
                    out,
                    None,
                    &[
                        *t,
                        stats.grid.node(j),
                        means[0][j],
                        vars[0][j],
                        means[1][j],
                        vars[1][j],
                        means[2][j],
                        vars[2][j],
                    ],
                );
            }
        }
    })
}

/// `1 + C_i` for one mark; the spatial mean when `C_i` varies in space.
fn factors(jc: &JumpCoefficients, mark: usize) -> [f64; 3] {
    let means = jc.mean_factors(mark);
    [0, 1, 2].map(|c| {
        let v = jc.mark(c, mark);
        if v.iter().all(|x| *x == v[0]) {
            1.0 + v[0]
        } else {
            means[c]
        }
    })
}

/// One row per event with the factors `1 + C_i` of its mark, separated by
/// `;`.
pub fn write_jumps<'a>(
    path: &Path,
    logs: impl IntoIterator<Item = (u64, &'a [JumpEvent])>,
    coefficients: Option<&JumpCoefficients>,
) -> Result<(), CliError> {
    write_lines(path, JUMPS_HEADER, |out| {
        for (p, events) in logs {
            for e in events {
                let factors = coefficients
                    .map(|jc| factors(jc, e.mark_index))
                    .unwrap_or([1.0; 3]);
                let _ = writeln!(
                    out,
                    "{p},{},{},{};{};{}",
                    fmt_f64(e.time),
                    e.mark_index,
                    fmt_f64(factors[0]),
                    fmt_f64(factors[1]),
                    fmt_f64(factors[2])
                );
            }
        }
    })
}

/// Long-format rows for several regimes.
pub fn write_compare(path: &Path, runs: &[(String, TrajectoryRecord)]) -> Result<(), CliError> {
    write_lines(path, COMPARE_HEADER, |out| {
        for (label, record) in runs {
            let n = record.states[0].grid().n_cells();
            let nodes: Vec<usize> = (0..n).collect();
            trajectory_rows(out, Some(label), record, &nodes);
        }
    })
}

/// Rows at a single node for several regimes.
pub fn write_paths_at(path: &Path, runs: &[(String, TrajectoryRecord)], node: usize) -> Result<(), CliError> {
    write_lines(path, PATHS_HEADER, |out| {
        for (label, record) in runs {
            trajectory_rows(out, Some(label), record, &[node]);
        }
    })
}

/// Reads a numeric CSV, checking its header. Leading text columns are kept
/// separately.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_csv(path: &Path, expected_header: &str, label_columns: usize) -> Result<CsvTable, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != expected_header {
        return Err(CliError::Io {
            path: path.to_path_buf(),
            message: format!("expected header `{expected_header}`, found `{header}`"),
        });
    }
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let mut cells = line.split(',');
        for _ in 0..label_columns {
            labels.push(cells.next().unwrap_or_default().to_string());
        }
        let row = cells
            .map(|c| c.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Io {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", k + 2),
            })?;
        rows.push(row);
    }
    Ok(CsvTable {
        header: header.split(',').map(str::to_string).collect(),
        labels,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub regime: String,
    pub scheme: String,
    pub incidence: String,
    pub seed: u64,
    pub paths: u64,
    pub dt: f64,
    pub t_end: f64,
    pub n_cells: usize,
    /// Absent for spatially varying coefficients.
    pub r0: Option<f64>,
    pub lambda_bound: f64,
    pub jump_count: u64,
    pub clip_count: u64,
    pub worst_undershoot: f64,
    pub sup_norm_max: f64,
    pub positivity_j_max: f64,
    /// Ensemble means of the domain integrals of S, I, R at the final time.
    pub final_totals_mean: [f64; 3],
    pub wall_clock_seconds: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub discontinuities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub runs: Vec<RunSummary>,
}

pub fn write_summary(path: &Path, summary: &SummaryFile) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(summary).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

pub fn read_summary(path: &Path) -> Result<SummaryFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Scratch directory whose contents are moved into `target` on
/// [`Staging::commit`] and deleted otherwise.
pub struct Staging {
    dir: PathBuf,
    target: PathBuf,
    committed: bool,
}

impl Staging {
    pub fn new(target: &Path) -> Result<Self, CliError> {
        let parent = target.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        let name = target
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into());
        let dir = parent.join(format!(".{name}.partial-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(Self {
            dir,
            target: target.to_path_buf(),
            committed: false,
        })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    pub fn commit(mut self) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.target).map_err(|e| io_err(&self.target, e))?;
        let entries = fs::read_dir(&self.dir).map_err(|e| io_err(&self.dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| io_err(&self.dir, e))?;
            let dest = self.target.join(entry.file_name());
            fs::rename(entry.path(), &dest).map_err(|e| io_err(&dest, e))?;
        }
        fs::remove_dir_all(&self.dir).map_err(|e| io_err(&self.dir, e))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, -7.25e12, 0.0, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
    }

    #[test]
    fn staging_cleans_up_unless_committed() {
        let tmp = tempfile::tempdir().unwrap();
        let target = tmp.path().join("run");
        {
            let st = Staging::new(&target).unwrap();
            fs::write(st.path("a.csv"), "x").unwrap();
        }
        assert!(!target.exists());
        assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);

        let st = Staging::new(&target).unwrap();
        fs::write(st.path("a.csv"), "x").unwrap();
        st.commit().unwrap();
        assert_eq!(fs::read_to_string(target.join("a.csv")).unwrap(), "x");
        assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 1);
    }
}
