//! Run configuration: CLI flags layered over an optional TOML config
//! file, validated into a [`RunConfig`] before any computation starts.
//!
//! Precedence is flag > config file > environment (`WILLMORE_OUT` for the
//! output directory) > built-in default. Config keys mirror the long flag
//! names one-to-one; unknown keys are rejected.

use clap::ValueEnum;
use serde::Deserialize;
use std::path::{Path, PathBuf};
use willmore::gallery::{self, Poly, SurfaceSpec};
use willmore::quat::Quat;
use willmore::tol::Tolerances;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TransformKind {
    /// Integrate `dg♯ = −2⟨β, Aψ⟩` (the two-step composite in one stroke).
    OneStep,
    /// `f̃ = ker A`, the forward Bäcklund transform.
    Forward,
    /// `f̂ = im Q`, the backward Bäcklund transform.
    Backward,
    /// The dual surface `g⊥ = −ḡ⁻¹` of a minimal chart.
    Dual,
}

impl TransformKind {
    pub fn name(self) -> &'static str {
        match self {
            TransformKind::OneStep => "one-step",
            TransformKind::Forward => "forward",
            TransformKind::Backward => "backward",
            TransformKind::Dual => "dual",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Obj,
    Csv,
    Json,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Obj => "obj",
            ExportFormat::Csv => "csv",
            ExportFormat::Json => "json",
        }
    }
}

/// The config-file schema. Every key mirrors a long CLI flag (plus the
/// surface-generator parameters of [`SurfaceSpec`]); all keys optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub surface: Option<String>,
    pub res: Option<usize>,
    pub kind: Option<String>,
    pub max_steps: Option<usize>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    pub tol_scale: Option<f64>,
    pub seed: Option<u64>,
    /// Quaternion `[1, i, j, k]` to invert the input surface at.
    pub invert: Option<[f64; 4]>,
    pub umax: Option<f64>,
    pub poly: Option<Poly>,
    pub twistor: Option<[Poly; 4]>,
    pub j_left: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("config: cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("config: {e}"))
    }
}

/// Everything a command needs, validated.
#[derive(Debug)]
pub struct RunConfig {
    pub spec: SurfaceSpec,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
    pub tol: Tolerances,
    pub kind: Option<TransformKind>,
    pub format: Option<ExportFormat>,
    pub max_steps: usize,
    pub invert: Option<Quat>,
}

/// Flag-side inputs, already parsed by clap. `None` means "not given".
#[derive(Debug, Default)]
pub struct FlagInputs {
    pub surface: Option<String>,
    pub res: Option<usize>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub tol_scale: Option<f64>,
    pub seed: Option<u64>,
    pub kind: Option<TransformKind>,
    pub format: Option<ExportFormat>,
    pub max_steps: Option<usize>,
    pub invert: Option<Quat>,
}

fn parse_kind(s: &str) -> Result<TransformKind, String> {
    TransformKind::from_str(s, false)
        .map_err(|_| format!("kind: unknown value '{s}' (expected one-step | forward | backward | dual)"))
}

fn parse_format(s: &str) -> Result<ExportFormat, String> {
    ExportFormat::from_str(s, false)
        .map_err(|_| format!("format: unknown value '{s}' (expected obj | csv | json)"))
}

/// Merge flags over the config file, fill defaults, and validate. Error
/// strings name the offending field first, so failures are scriptable.
pub fn resolve(flags: FlagInputs, file: FileConfig) -> Result<RunConfig, String> {
    let surface = flags
        .surface
        .or(file.surface)
        .ok_or_else(|| "surface: required (positional argument, --surface, or config key)".to_string())?;
    if !gallery::NAMES.contains(&surface.as_str()) {
        return Err(format!(
            "surface: unknown name '{surface}' (expected one of {})",
            gallery::NAMES.join(" | ")
        ));
    }
    let res = flags.res.or(file.res).unwrap_or(64);
    if res < 8 {
        return Err(format!("res: must be at least 8 (got {res})"));
    }
    if res > 256 {
        return Err(format!("res: must be at most 256 (got {res})"));
    }
    let max_steps = flags.max_steps.or(file.max_steps).unwrap_or(3);
    if max_steps == 0 {
        return Err("max_steps: must be at least 1 (got 0)".to_string());
    }
    let tol_scale = flags.tol_scale.or(file.tol_scale).unwrap_or(1.0);
    if !(tol_scale.is_finite() && tol_scale > 0.0) {
        return Err(format!("tol_scale: must be a positive number (got {tol_scale})"));
    }
    if let Some(u) = file.umax {
        if !(u.is_finite() && u > 0.0) {
            return Err(format!("umax: must be a positive number (got {u})"));
        }
    }
    let kind = match (flags.kind, &file.kind) {
        (Some(k), _) => Some(k),
        (None, Some(s)) => Some(parse_kind(s)?),
        (None, None) => None,
    };
    let format = match (flags.format, &file.format) {
        (Some(f), _) => Some(f),
        (None, Some(s)) => Some(parse_format(s)?),
        (None, None) => None,
    };
    let out = flags
        .out
        .or(file.out)
        .or_else(|| std::env::var_os("WILLMORE_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let invert = flags
        .invert
        .or_else(|| file.invert.map(|c| Quat::new(c[0], c[1], c[2], c[3])));
    if let Some(q) = invert {
        if !q.is_finite() {
            return Err("invert: components must be finite".to_string());
        }
    }

    let mut spec = SurfaceSpec::new(&surface, res);
    spec.umax = file.umax;
    spec.poly = file.poly;
    spec.twistor = file.twistor;
    spec.j_left = file.j_left;

    Ok(RunConfig {
        spec,
        out,
        seed: flags.seed.or(file.seed).unwrap_or(7),
        threads: flags.threads.or(file.threads),
        tol: Tolerances::new(tol_scale),
        kind,
        format,
        max_steps,
        invert,
    })
}

/// Parse `--invert w,x,y,z`.
pub fn parse_invert(s: &str) -> Result<Quat, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err(format!(
            "invert: expected four comma-separated components 'w,x,y,z' (got '{s}')"
        ));
    }
    let mut c = [0.0f64; 4];
    for (slot, part) in c.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|e| format!("invert: bad component '{part}': {e}"))?;
    }
    Ok(Quat::new(c[0], c[1], c[2], c[3]))
}
