//! Experiment configuration: TOML documents, preset defaults, dotted
//! overrides and validation.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::presets::{preset, DecayPrediction, Geometry, Preset, PresetParams};
use crate::spectral::OperatorKind;

/// Largest cutoff accepted for damping that assembles into a dense matrix.
pub const MAX_DENSE_CUTOFF: usize = 2048;
/// Largest number of time steps in one trajectory.
pub const MAX_STEPS: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    pub kind: OperatorKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingSection {
    /// Preset name.
    pub variant: String,
    #[serde(default)]
    pub params: PresetParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub lambda_min: f64,
    /// Clipped to the truncation guard at run time.
    pub lambda_max: f64,
    pub per_decade: usize,
    pub peaks: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySection {
    /// `h` runs over `2^{-j}`, `j = h_min_exp..=h_max_exp`.
    pub h_min_exp: u32,
    pub h_max_exp: u32,
    /// Also run the randomized inequality suite.
    #[serde(default)]
    pub lemma: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(rename = "T")]
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
    /// Evolve `𝒜^{-1}x` and fit a power law instead of an exponential.
    pub smoothed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Time window for decay fits.
    pub window: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    #[serde(default)]
    pub plots: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: Geometry,
    pub operator: OperatorSection,
    pub damping: DampingSection,
    pub scan: ScanSection,
    pub certify: CertifySection,
    pub sim: SimSection,
    pub fit: FitSection,
    pub output: OutputSection,
}

fn field(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{path}: {msg}"))
}

impl ExperimentConfig {
    /// Full configuration for a preset with its default experiment.
    pub fn for_preset(name: &str, params: &PresetParams) -> Result<Self> {
        let p = preset(name, params)?;
        let (lambda_min, lambda_max) = match name {
            "dw-fractional" => (8.0 * PI, 128.0 * PI),
            "pdo-anisotropic" => (PI, 16.0 * PI),
            _ => (PI, 256.0 * PI),
        };
        let smoothed = matches!(p.prediction.decay, DecayPrediction::Polynomial { .. });
        Ok(Self {
            geometry: p.geometry,
            operator: OperatorSection { kind: p.kind },
            damping: DampingSection { variant: p.name.clone(), params: p.params.clone() },
            scan: ScanSection { lambda_min, lambda_max, per_decade: 40, peaks: true },
            certify: CertifySection { h_min_exp: 3, h_max_exp: 7, lemma: false },
            sim: SimSection { t_end: 100.0, dt: 0.1, seed: 1, smoothed },
            fit: FitSection { window: if smoothed { [10.0, 100.0] } else { [50.0, 100.0] } },
            output: OutputSection { directory: PathBuf::from(format!("out/{name}")), plots: false },
        })
    }

    /// Strict parse of a complete document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Assembles a configuration from an optional file, an optional preset
    /// name and `key=value` overrides, in increasing precedence. Sections
    /// left out take the defaults of the selected preset.
    pub fn load(file: Option<&Path>, preset_name: Option<&str>, overrides: &[String]) -> Result<Self> {
        let mut user = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                parse_partial(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => Table::new(),
        };
        for o in overrides {
            apply_override(&mut user, o)?;
        }
        if let Some(name) = preset_name {
            set_path(&mut user, &["damping", "variant"], Value::String(name.to_string()))?;
        }
        let variant = match lookup(&user, &["damping", "variant"]) {
            Some(Value::String(s)) => s.clone(),
            Some(other) => return Err(field("damping.variant", format!("expected a preset name, got {other}"))),
            None => return Err(Error::Config("no preset selected: pass --preset or set damping.variant".into())),
        };
        let params: PresetParams = match lookup(&user, &["damping", "params"]) {
            Some(v) => v.clone().try_into().map_err(|e| field("damping.params", e))?,
            None => PresetParams::default(),
        };
        let defaults = Self::for_preset(&variant, &params)?;
        let mut merged = Table::try_from(&defaults).expect("config serializes");
        merge(&mut merged, user);
        let cfg: Self = Value::Table(merged).try_into().map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn preset(&self) -> Result<Preset> {
        Ok(preset(&self.damping.variant, &self.damping.params)?.with_geometry(self.geometry))
    }

    /// Range checks; every error names the offending field.
    pub fn validate(&self) -> Result<()> {
        let p = preset(&self.damping.variant, &self.damping.params)?;
        let g = &self.geometry;
        if g.d != p.geometry.d {
            return Err(field("geometry.d", format!("preset {} lives in d = {}, got {}", p.name, p.geometry.d, g.d)));
        }
        if g.cutoff < 1 {
            return Err(field("geometry.K", "must be at least 1"));
        }
        if g.oversample < 2 {
            return Err(field("geometry.oversample", format!("must be at least 2, got {}", g.oversample)));
        }
        if p.spec.assembles_dense() && g.cutoff > MAX_DENSE_CUTOFF {
            return Err(field(
                "geometry.K",
                format!("{} assembles a dense matrix; K ≤ {MAX_DENSE_CUTOFF} required, got {}", p.name, g.cutoff),
            ));
        }
        if self.operator.kind != p.kind {
            return Err(field(
                "operator.kind",
                format!("preset {} requires {}, got {}", p.name, p.kind, self.operator.kind),
            ));
        }
        let s = &self.scan;
        if !(s.lambda_min > 0.0 && s.lambda_min.is_finite()) {
            return Err(field("scan.lambda_min", format!("must be positive, got {}", s.lambda_min)));
        }
        if !(s.lambda_max > s.lambda_min) {
            return Err(field("scan.lambda_max", format!("must exceed lambda_min = {}, got {}", s.lambda_min, s.lambda_max)));
        }
        if s.per_decade == 0 && !s.peaks {
            return Err(field("scan.per_decade", "is 0 and peaks is off: the grid would be empty"));
        }
        let c = &self.certify;
        if c.h_min_exp > c.h_max_exp {
            return Err(field("certify.h_min_exp", format!("exceeds h_max_exp ({} > {})", c.h_min_exp, c.h_max_exp)));
        }
        if c.h_max_exp > 20 {
            return Err(field("certify.h_max_exp", format!("must be at most 20, got {}", c.h_max_exp)));
        }
        let sim = &self.sim;
        if !(sim.dt > 0.0 && sim.dt.is_finite()) {
            return Err(field("sim.dt", format!("must be positive, got {}", sim.dt)));
        }
        if !(sim.t_end >= sim.dt && sim.t_end.is_finite()) {
            return Err(field("sim.T", format!("must be at least dt = {}, got {}", sim.dt, sim.t_end)));
        }
        if sim.t_end / sim.dt > MAX_STEPS {
            return Err(field("sim.T", format!("T/dt = {:.0} exceeds {MAX_STEPS:.0} steps", sim.t_end / sim.dt)));
        }
        if sim.seed > i64::MAX as u64 {
            return Err(field("sim.seed", format!("must be below 2^63, got {}", sim.seed)));
        }
        let [lo, hi] = self.fit.window;
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(field("fit.window", format!("need 0 ≤ lo < hi, got [{lo}, {hi}]")));
        }
        Ok(())
    }

    /// Fit window clipped to the simulated horizon.
    pub fn fit_window(&self) -> (f64, f64) {
        (self.fit.window[0], self.fit.window[1].min(self.sim.t_end))
    }
}

/// Parses a possibly partial document, rejecting unknown keys with their
/// location.
fn parse_partial(text: &str) -> std::result::Result<Table, toml::de::Error> {
    toml::from_str::<PartialConfig>(text)?;
    toml::from_str(text)
}

/// Mirror of [`ExperimentConfig`] with every field optional, used only to
/// report unknown or mistyped keys against the source text.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct PartialConfig {
    geometry: Option<PartialGeometry>,
    operator: Option<PartialOperator>,
    damping: Option<PartialDamping>,
    scan: Option<PartialScan>,
    certify: Option<PartialCertify>,
    sim: Option<PartialSim>,
    fit: Option<PartialFit>,
    output: Option<PartialOutput>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct PartialGeometry {
    d: Option<usize>,
    #[serde(rename = "K")]
    cutoff: Option<usize>,
    oversample: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct PartialOperator {
    kind: Option<OperatorKind>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct PartialDamping {
    variant: Option<String>,
    params: Option<PresetParams>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct PartialScan {
    lambda_min: Option<f64>,
    lambda_max: Option<f64>,
    per_decade: Option<usize>,
    peaks: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct PartialCertify {
    h_min_exp: Option<u32>,
    h_max_exp: Option<u32>,
    lemma: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct PartialSim {
    #[serde(rename = "T")]
    t_end: Option<f64>,
    dt: Option<f64>,
    seed: Option<u64>,
    smoothed: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct PartialFit {
    window: Option<[f64; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct PartialOutput {
    directory: Option<PathBuf>,
    plots: Option<bool>,
}

/// Applies `a.b.c=value`. The value is read as a TOML literal, or as a bare
/// string when it is not one.
pub fn apply_override(table: &mut Table, text: &str) -> Result<()> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--set {text}: expected key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let path: Vec<&str> = key.split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("--set {text}: malformed key `{key}`")));
    }
    let value = match toml::from_str::<Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    let mut probe = Table::new();
    set_path(&mut probe, &path, value.clone())?;
    let doc = toml::to_string(&probe).map_err(|e| Error::Config(format!("--set {text}: {e}")))?;
    parse_partial(&doc).map_err(|e| Error::Config(format!("--set {text}: {}", e.message())))?;
    set_path(table, &path, value)
}

fn set_path(table: &mut Table, path: &[&str], value: Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(Error::Config(format!("{}: `{p}` is not a section", path.join(".")))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn lookup<'a>(table: &'a Table, path: &[&str]) -> Option<&'a Value> {
    let (last, parents) = path.split_last()?;
    let mut cur = table;
    for p in parents {
        cur = cur.get(*p)?.as_table()?;
    }
    cur.get(*last)
}

/// Recursive overlay of `top` onto `base`.
fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
