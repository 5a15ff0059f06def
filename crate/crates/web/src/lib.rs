//! JSON entry points for the browser page. Each call builds the preset at
//! the requested cutoff, runs one stage and returns plot-ready arrays.

use dampwave::certify::{self, CertificateReport, CertifyOptions};
use dampwave::config::ExperimentConfig;
use dampwave::generator::build_generator;
use dampwave::presets::{list_presets, Preset};
use dampwave::scan;
use dampwave::semigroup::{self, InitialData, Propagator};
use dampwave::spectral::SpectralModel;
use dampwave::damping::DampingOperator;
use dampwave::generator::GeneratorMatrix;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Cutoffs above these make a browser tab unresponsive.
pub const MAX_K_1D: usize = 1024;
pub const MAX_K_2D: usize = 16;
pub const MAX_STEPS: usize = 20_000;

type Res<T> = std::result::Result<T, String>;

struct Setup {
    cfg: ExperimentConfig,
    preset: Preset,
    model: SpectralModel,
    g: DampingOperator,
    gen: GeneratorMatrix,
}

fn setup(preset: &str, k: usize, s: Option<f64>) -> Res<Setup> {
    let mut sets = vec![format!("geometry.K={k}")];
    if let Some(s) = s {
        sets.push(format!("damping.params.s={s:?}"));
    }
    let cfg = ExperimentConfig::load(None, Some(preset), &sets).map_err(|e| e.to_string())?;
    let cap = if cfg.geometry.d == 1 { MAX_K_1D } else { MAX_K_2D };
    if k > cap {
        return Err(format!("K = {k} is too large for the browser (at most {cap} in {}D)", cfg.geometry.d));
    }
    let preset = cfg.preset().map_err(|e| e.to_string())?;
    let model = preset.model().map_err(|e| e.to_string())?;
    let g = preset.assemble(&model).map_err(|e| e.to_string())?;
    let gen = build_generator(&model, &g).map_err(|e| e.to_string())?;
    Ok(Setup { cfg, preset, model, g, gen })
}

#[derive(Debug, Serialize)]
pub struct ScanOut {
    pub guard: f64,
    pub lambda: Vec<f64>,
    pub u: Vec<f64>,
    pub predicted: Vec<f64>,
    pub peak_lambda: Vec<f64>,
    pub peak_u: Vec<f64>,
    pub alpha: Option<f64>,
    pub predicted_exponent: Option<f64>,
}

pub fn run_scan(preset: &str, k: usize, s: Option<f64>, per_decade: usize) -> Res<ScanOut> {
    let b = setup(preset, k, s)?;
    let lo = b.cfg.scan.lambda_min.min(b.gen.guard() / 4.0);
    let grid = scan::default_grid(&b.gen, lo, b.gen.guard(), per_decade, true).map_err(|e| e.to_string())?;
    let table = scan::scan(&b.gen, &grid).map_err(|e| e.to_string())?;
    let alpha = scan::fit_exponent(&table, lo, b.gen.guard()).ok().map(|f| f.slope);
    let finite: Vec<_> = table.rows.iter().filter(|r| r.u.is_finite()).collect();
    Ok(ScanOut {
        guard: b.gen.guard(),
        lambda: finite.iter().map(|r| r.lambda).collect(),
        u: finite.iter().map(|r| r.u).collect(),
        predicted: finite.iter().map(|r| r.predicted).collect(),
        peak_lambda: finite.iter().filter(|r| r.peak).map(|r| r.lambda).collect(),
        peak_u: finite.iter().filter(|r| r.peak).map(|r| r.u).collect(),
        alpha,
        predicted_exponent: b.preset.prediction.resolvent_exponent,
    })
}

#[derive(Debug, Serialize)]
pub struct DecayOut {
    pub t: Vec<f64>,
    pub norm: Vec<f64>,
    pub smoothed: bool,
    /// Energy rate for raw data.
    pub rate: Option<f64>,
    /// Power-law exponent of `‖z‖` for smoothed data.
    pub beta: Option<f64>,
    pub window: [f64; 2],
    pub fit_error: Option<String>,
}

pub fn run_decay(preset: &str, k: usize, s: Option<f64>, t_end: f64, dt: f64, seed: u64, smoothed: bool) -> Res<DecayOut> {
    if !(dt > 0.0 && t_end >= dt) || t_end / dt > MAX_STEPS as f64 {
        return Err(format!("need 0 < dt ≤ T and at most {MAX_STEPS} steps"));
    }
    let b = setup(preset, k, s)?;
    let modes: Vec<Vec<i32>> = (0..b.model.len()).map(|i| b.model.mode(i).to_vec()).collect();
    let (lo, hi) = (t_end / 2.0, t_end);
    let mut out = DecayOut { t: vec![], norm: vec![], smoothed, rate: None, beta: None, window: [lo, hi], fit_error: None };
    let traj = if smoothed {
        let (lo, hi) = (t_end / 10.0, t_end);
        let (fit, traj) = semigroup::fit_polynomial_rate(&b.gen, &modes, seed, t_end, dt, lo, hi).map_err(|e| e.to_string())?;
        out.beta = Some(fit.beta);
        out.window = [fit.window.0, fit.window.1];
        traj
    } else {
        let z = semigroup::random_state(&b.gen, &modes, seed, None).map_err(|e| e.to_string())?;
        let prop = Propagator::new(&b.gen, dt).map_err(|e| e.to_string())?;
        let steps = (t_end / dt).round() as usize;
        let data = InitialData { seed: Some(seed), max_mode: None, smoothed: false };
        let traj = semigroup::evolve_with(&b.gen, &prop, &z, steps, data).map_err(|e| e.to_string())?;
        match semigroup::fit_exponential_rate(&traj, lo, hi) {
            Ok(r) => out.rate = Some(r.rate),
            Err(e) => out.fit_error = Some(e.to_string()),
        }
        traj
    };
    out.norm = traj.norm().collect();
    out.t = traj.times;
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct CertOut {
    pub h: Vec<f64>,
    pub ratio: Vec<Option<f64>>,
    pub pass: bool,
    pub c: f64,
    pub big_c: f64,
    pub worst_drift: f64,
    pub m: String,
}

impl CertOut {
    fn from(r: &CertificateReport) -> Self {
        Self {
            h: r.rows.iter().map(|x| x.h).collect(),
            ratio: r.rows.iter().map(|x| x.ratio).collect(),
            pass: r.pass,
            c: r.c,
            big_c: r.big_c,
            worst_drift: r.worst_drift,
            m: format!("{:?}", r.m),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CertifyOut {
    pub ellipticity: Option<CertOut>,
    pub boundedness: CertOut,
}

pub fn run_certify(preset: &str, k: usize, s: Option<f64>, j_min: u32, j_max: u32) -> Res<CertifyOut> {
    if j_min > j_max || j_max > 12 {
        return Err("need j_min ≤ j_max ≤ 12".into());
    }
    let b = setup(preset, k, s)?;
    let grid = certify::dyadic_grid(j_min, j_max);
    let opts = CertifyOptions::default();
    let p = &b.preset.prediction;
    let ellipticity = p
        .claimed_m
        .map(|m| certify::certify_ellipticity(&b.model, &b.g, m, &grid, opts))
        .transpose()
        .map_err(|e| e.to_string())?;
    let boundedness = certify::certify_boundedness(&b.model, &b.g, p.bounded_m, &grid, opts).map_err(|e| e.to_string())?;
    Ok(CertifyOut { ellipticity: ellipticity.as_ref().map(CertOut::from), boundedness: CertOut::from(&boundedness) })
}

fn json<T: Serialize>(r: Res<T>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

/// NaN from the page means "preset default".
fn param(s: f64) -> Option<f64> {
    (!s.is_nan()).then_some(s)
}

#[wasm_bindgen]
pub fn presets() -> Result<String, JsError> {
    json(Ok(list_presets()))
}

#[wasm_bindgen]
pub fn resolvent_scan(preset: &str, k: usize, s: f64, per_decade: usize) -> Result<String, JsError> {
    json(run_scan(preset, k, param(s), per_decade))
}

#[wasm_bindgen]
pub fn energy_decay(preset: &str, k: usize, s: f64, t_end: f64, dt: f64, seed: u32, smoothed: bool) -> Result<String, JsError> {
    json(run_decay(preset, k, param(s), t_end, dt, seed as u64, smoothed))
}

#[wasm_bindgen]
pub fn certificates(preset: &str, k: usize, s: f64, j_min: u32, j_max: u32) -> Result<String, JsError> {
    json(run_certify(preset, k, param(s), j_min, j_max))
}
