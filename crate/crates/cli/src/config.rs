//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use levy_sir::{
    Grid1D, Incidence, JumpCoefficients, MarkMeasure, ModelParams, NoiseSpec, ScalarField,
    SchemeConfig, SchemeKind, StateField,
};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub incidence: IncidenceSection,
    #[serde(default)]
    pub noise: NoiseSection,
    pub scheme: SchemeSection,
    #[serde(default)]
    pub grid: GridSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
    pub beta: f64,
    #[serde(default = "default_diffusion")]
    pub diffusion: [f64; 3],
    pub lipschitz: Option<f64>,
}

fn default_diffusion() -> [f64; 3] {
    [0.1; 3]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IncidenceKind {
    Standard,
    Holling,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncidenceSection {
    pub kind: IncidenceKind,
    pub a: Option<f64>,
    pub b: Option<f64>,
}

impl Default for IncidenceSection {
    fn default() -> Self {
        Self {
            kind: IncidenceKind::Standard,
            a: None,
            b: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Deterministic,
    Gaussian,
    Levy,
}

impl NoiseKind {
    pub fn label(self) -> &'static str {
        match self {
            NoiseKind::Deterministic => "det",
            NoiseKind::Gaussian => "gauss",
            NoiseKind::Levy => "levy",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "det" | "deterministic" => Some(NoiseKind::Deterministic),
            "gauss" | "gaussian" => Some(NoiseKind::Gaussian),
            "levy" => Some(NoiseKind::Levy),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub kind: NoiseKind,
    pub gaussian: Option<GaussianSection>,
    pub levy: Option<LevySection>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            kind: NoiseKind::Deterministic,
            gaussian: None,
            levy: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSection {
    pub sigma: [f64; 3],
    #[serde(default)]
    pub scale_by_inv_sqrt_dx: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevySection {
    pub marks: Vec<MarkEntry>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkEntry {
    #[serde(default = "one")]
    pub z: f64,
    pub weight: f64,
    pub c: [f64; 3],
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    Splitting,
    Milstein,
    Euler,
    EulerYosida,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub kind: Option<SchemeName>,
    pub dt: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_record_interval")]
    pub record_interval: f64,
    pub theta: Option<f64>,
    #[serde(default = "yes")]
    pub clip_negatives: bool,
}

fn default_t_end() -> f64 {
    80.0
}

fn default_record_interval() -> f64 {
    0.1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_cells")]
    pub n_cells: usize,
}

fn default_length() -> f64 {
    6.0
}

fn default_cells() -> usize {
    60
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            length: default_length(),
            n_cells: default_cells(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub s: Profile,
    pub i: Profile,
    pub r: Profile,
}

/// A constant density or one value per cell.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Profile {
    Constant(f64),
    Table(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_paths")]
    pub paths: u64,
    #[serde(default = "yes")]
    pub parallel: bool,
}

fn default_paths() -> u64 {
    1
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            paths: default_paths(),
            parallel: true,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<u64>,
    pub dt: Option<f64>,
}

/// Validated configuration with core types built.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub raw: RawConfig,
    pub grid: Grid1D,
    pub params: ModelParams,
    pub initial: StateField,
    pub scheme: SchemeConfig,
    pub noise: NoiseSpec,
    pub noise_kind: NoiseKind,
    pub seed: u64,
    pub paths: u64,
    pub parallel: bool,
    pub output_dir: PathBuf,
}

fn bad(key: &str, reason: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn require(key: &str, ok: bool, reason: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(bad(key, reason))
    }
}

fn nonneg(key: &str, v: f64) -> Result<(), CliError> {
    require(key, v.is_finite() && v >= 0.0, "must be a finite number >= 0")
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    require(key, v.is_finite() && v > 0.0, "must be a finite number > 0")
}

pub fn load_config(path: &Path, overrides: Overrides) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| bad("<file>", format!("{}: {e}", path.display())))?;
    parse_config(&text, overrides)
}

/// Parses and validates a TOML document. Relative output paths resolve
/// against the working directory.
pub fn parse_config(text: &str, overrides: Overrides) -> Result<ExperimentConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let key = e
            .span()
            .map(|s| text[s].lines().next().unwrap_or_default().to_string())
            .unwrap_or_default();
        bad(if key.is_empty() { "<toml>" } else { &key }, e.message().to_string())
    })?;
    build(raw, overrides)
}

fn build_profile(key: &str, grid: Grid1D, p: &Profile) -> Result<ScalarField, CliError> {
    let field = match p {
        Profile::Constant(v) => {
            nonneg(key, *v)?;
            ScalarField::constant(grid, *v)
        }
        Profile::Table(values) => {
            require(
                key,
                values.len() == grid.n_cells(),
                &format!("needs one value per cell ({})", grid.n_cells()),
            )?;
            for v in values {
                nonneg(key, *v)?;
            }
            ScalarField::new(grid, values.clone()).map_err(|e| bad(key, e.to_string()))?
        }
    };
    Ok(field)
}

/// Noise specification for one regime, using the matching `[noise.*]` table.
pub fn noise_for(raw: &RawConfig, kind: NoiseKind, n_cells: usize) -> Result<NoiseSpec, CliError> {
    Ok(match kind {
        NoiseKind::Deterministic => NoiseSpec::Deterministic,
        NoiseKind::Gaussian => {
            let g = raw
                .noise
                .gaussian
                .as_ref()
                .ok_or_else(|| bad("noise.gaussian", "required for gaussian noise"))?;
            for s in g.sigma {
                nonneg("noise.gaussian.sigma", s)?;
            }
            NoiseSpec::Gaussian {
                sigma: g.sigma,
                scale_by_inv_sqrt_dx: g.scale_by_inv_sqrt_dx,
            }
        }
        NoiseKind::Levy => {
            let l = raw
                .noise
                .levy
                .as_ref()
                .ok_or_else(|| bad("noise.levy", "required for levy noise"))?;
            require("noise.levy.marks", !l.marks.is_empty(), "needs at least one mark")?;
            for m in &l.marks {
                require("noise.levy.marks.z", m.z.is_finite() && m.z > 0.0, "must be > 0")?;
                positive("noise.levy.marks.weight", m.weight)?;
                for c in m.c {
                    require(
                        "noise.levy.marks.c",
                        c.is_finite() && 1.0 + c > 0.0,
                        "needs 1 + c > 0",
                    )?;
                }
            }
            let measure = MarkMeasure::new(l.marks.iter().map(|m| (m.z, m.weight)).collect())
                .map_err(|e| bad("noise.levy.marks", e.to_string()))?;
            let per_mark: Vec<[f64; 3]> = l.marks.iter().map(|m| m.c).collect();
            let coefficients = JumpCoefficients::per_mark(n_cells, &per_mark)
                .map_err(|e| bad("noise.levy.marks.c", e.to_string()))?;
            NoiseSpec::Levy {
                measure,
                coefficients,
            }
        }
    })
}

/// Scheme used for a regime: the configured one if it fits, else the natural
/// default for that noise.
pub fn scheme_kind_for(raw: &RawConfig, kind: NoiseKind) -> Result<SchemeKind, CliError> {
    let configured = raw.scheme.kind;
    let theta = || -> Result<f64, CliError> {
        let t = raw
            .scheme
            .theta
            .ok_or_else(|| bad("scheme.theta", "required for euler-yosida"))?;
        positive("scheme.theta", t)?;
        Ok(t)
    };
    Ok(match (kind, configured) {
        (NoiseKind::Levy, Some(SchemeName::EulerYosida)) => SchemeKind::LevyEulerYosida { theta: theta()? },
        (NoiseKind::Levy, _) => SchemeKind::LevyEuler,
        (NoiseKind::Gaussian, _) => SchemeKind::GaussianMilstein,
        (NoiseKind::Deterministic, _) => SchemeKind::DeterministicSplitting,
    })
}

fn check_scheme_matches(kind: NoiseKind, scheme: Option<SchemeName>) -> Result<(), CliError> {
    let Some(s) = scheme else { return Ok(()) };
    let ok = matches!(
        (kind, s),
        (NoiseKind::Deterministic, SchemeName::Splitting)
            | (NoiseKind::Gaussian, SchemeName::Milstein)
            | (NoiseKind::Levy, SchemeName::Euler)
            | (NoiseKind::Levy, SchemeName::EulerYosida)
    );
    require("scheme.kind", ok, "does not match noise.kind")
}

pub fn build(mut raw: RawConfig, overrides: Overrides) -> Result<ExperimentConfig, CliError> {
    if let Some(seed) = overrides.seed {
        raw.run.seed = seed;
    }
    if let Some(paths) = overrides.paths {
        raw.run.paths = paths;
    }
    if let Some(dt) = overrides.dt {
        raw.scheme.dt = dt;
    }

    let m = &raw.model;
    nonneg("model.lambda", m.lambda)?;
    nonneg("model.mu", m.mu)?;
    nonneg("model.gamma", m.gamma)?;
    nonneg("model.beta", m.beta)?;
    for d in m.diffusion {
        positive("model.diffusion", d)?;
    }
    if let Some(lf) = m.lipschitz {
        positive("model.lipschitz", lf)?;
    }

    let incidence = match raw.incidence.kind {
        IncidenceKind::Standard => {
            require(
                "incidence.a",
                raw.incidence.a.is_none() && raw.incidence.b.is_none(),
                "a and b only apply to holling incidence",
            )?;
            Incidence::Standard
        }
        IncidenceKind::Holling => {
            let a = raw.incidence.a.unwrap_or(0.0);
            let b = raw.incidence.b.unwrap_or(0.0);
            nonneg("incidence.a", a)?;
            nonneg("incidence.b", b)?;
            require("incidence.a", a + b != 0.0, "holling incidence needs a + b != 0")?;
            Incidence::HollingCrowleyMartin { a, b }
        }
    };

    require(
        "grid.length",
        raw.grid.length.is_finite() && raw.grid.length > 0.0,
        "must be > 0",
    )?;
    require("grid.n_cells", raw.grid.n_cells >= 2, "must be >= 2")?;
    let grid = Grid1D::new(raw.grid.length, raw.grid.n_cells).map_err(|e| bad("grid", e.to_string()))?;

    let mut params = ModelParams::homogeneous(
        grid.n_cells(),
        m.lambda,
        m.mu,
        m.gamma,
        m.beta,
        incidence,
        m.diffusion,
    )
    .map_err(|e| bad("model", e.to_string()))?;
    if let Some(lf) = m.lipschitz {
        params = params.with_lipschitz(lf).map_err(|e| bad("model.lipschitz", e.to_string()))?;
    }

    let initial = StateField::new(
        build_profile("initial.s", grid, &raw.initial.s)?,
        build_profile("initial.i", grid, &raw.initial.i)?,
        build_profile("initial.r", grid, &raw.initial.r)?,
    )
    .map_err(|e| bad("initial", e.to_string()))?;

    let sc = &raw.scheme;
    positive("scheme.dt", sc.dt)?;
    positive("scheme.t_end", sc.t_end)?;
    positive("scheme.record_interval", sc.record_interval)?;
    require("scheme.dt", sc.dt <= sc.t_end, "must not exceed scheme.t_end")?;
    let ratio = sc.record_interval / sc.dt;
    let record_every = ratio.round();
    require(
        "scheme.record_interval",
        record_every >= 1.0 && (ratio - record_every).abs() <= 1e-9 * ratio,
        "must be a positive multiple of scheme.dt",
    )?;
    check_scheme_matches(raw.noise.kind, sc.kind)?;
    require(
        "scheme.theta",
        sc.theta.is_none() || sc.kind == Some(SchemeName::EulerYosida),
        "only used by the euler-yosida scheme",
    )?;
    let kind = scheme_kind_for(&raw, raw.noise.kind)?;
    let scheme = SchemeConfig::new(sc.dt, sc.t_end, kind)
        .record_every(record_every as usize)
        .clip_negatives(sc.clip_negatives);
    scheme.n_steps().map_err(|e| bad("scheme.dt", e.to_string()))?;

    let noise = noise_for(&raw, raw.noise.kind, grid.n_cells())?;
    require("run.paths", raw.run.paths >= 1, "must be >= 1")?;

    Ok(ExperimentConfig {
        grid,
        params,
        initial,
        scheme,
        noise,
        noise_kind: raw.noise.kind,
        seed: raw.run.seed,
        paths: raw.run.paths,
        parallel: raw.run.parallel,
        output_dir: raw.output.dir.clone(),
        raw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[model]
lambda = 0.5
mu = 0.3
gamma = 0.2
beta = 0.2

[scheme]
dt = 0.01

[initial]
s = 0.9
i = 0.1
r = 0.0
"#;

    fn key_of(err: CliError) -> String {
        match err {
            CliError::Config { key, .. } => key,
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = parse_config(MINIMAL, Overrides::default()).unwrap();
        assert_eq!(cfg.grid.n_cells(), 60);
        assert_eq!(cfg.grid.length(), 6.0);
        assert_eq!(cfg.scheme.record_every, 10);
        assert_eq!(cfg.scheme.kind, SchemeKind::DeterministicSplitting);
        assert_eq!(cfg.paths, 1);
        assert!(matches!(cfg.noise, NoiseSpec::Deterministic));
    }

    #[test]
    fn overrides_take_precedence() {
        let o = Overrides {
            seed: Some(9),
            paths: Some(12),
            dt: Some(0.05),
        };
        let cfg = parse_config(MINIMAL, o).unwrap();
        assert_eq!((cfg.seed, cfg.paths, cfg.scheme.dt), (9, 12, 0.05));
        assert_eq!(cfg.scheme.record_every, 2);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("beta = 0.2", "beta = 0.2\nbta = 1.0");
        let err = parse_config(&text, Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("bta"), "{err}");
    }

    #[test]
    fn missing_key_is_reported() {
        let text = MINIMAL.replace("gamma = 0.2\n", "");
        let err = parse_config(&text, Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("gamma"), "{err}");
    }

    #[test]
    fn holling_needs_nonzero_sum() {
        let text = format!("{MINIMAL}\n[incidence]\nkind = \"holling\"\na = 0.0\nb = 0.0\n");
        assert_eq!(key_of(parse_config(&text, Overrides::default()).unwrap_err()), "incidence.a");
    }

    #[test]
    fn scheme_must_match_noise() {
        let text = MINIMAL.replace("dt = 0.01", "dt = 0.01\nkind = \"milstein\"");
        assert_eq!(key_of(parse_config(&text, Overrides::default()).unwrap_err()), "scheme.kind");
    }

    #[test]
    fn noise_tables_required_by_kind() {
        let text = format!("{MINIMAL}\n[noise]\nkind = \"levy\"\n");
        assert_eq!(key_of(parse_config(&text, Overrides::default()).unwrap_err()), "noise.levy");
        let text = format!(
            "{MINIMAL}\n[noise]\nkind = \"levy\"\n[[noise.levy.marks]]\nweight = 1.0\nc = [0.2, -1.0, 0.2]\n"
        );
        assert_eq!(
            key_of(parse_config(&text, Overrides::default()).unwrap_err()),
            "noise.levy.marks.c"
        );
    }

    #[test]
    fn record_interval_must_divide() {
        let text = MINIMAL.replace("dt = 0.01", "dt = 0.01\nrecord_interval = 0.015");
        assert_eq!(
            key_of(parse_config(&text, Overrides::default()).unwrap_err()),
            "scheme.record_interval"
        );
    }

    #[test]
    fn tabulated_profiles() {
        let text = MINIMAL
            .replace("[initial]", "[grid]\nn_cells = 3\n\n[initial]")
            .replace("i = 0.1", "i = [0.1, 0.2, 0.3]");
        let cfg = parse_config(&text, Overrides::default()).unwrap();
        assert_eq!(cfg.initial.i.values(), &[0.1, 0.2, 0.3]);
        let short = text.replace("[0.1, 0.2, 0.3]", "[0.1, 0.2]");
        assert_eq!(key_of(parse_config(&short, Overrides::default()).unwrap_err()), "initial.i");
        let neg = text.replace("s = 0.9", "s = -0.9");
        assert_eq!(key_of(parse_config(&neg, Overrides::default()).unwrap_err()), "initial.s");
    }
}
