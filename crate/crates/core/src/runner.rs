//! Experiment orchestration: runs the requested stages for a configuration,
//! writes CSV tables and a TOML manifest, and collects verdicts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::certify::{self, CertificateReport, CertifyOptions, LemmaSuiteOptions};
use crate::config::ExperimentConfig;
use crate::damping::DampingOperator;
use crate::error::{Error, Result};
use crate::fit::LineFit;
use crate::generator::{build_generator, GeneratorMatrix};
use crate::plot::{self, Axes};
use crate::presets::{DecayPrediction, Prediction, Preset};
use crate::scan::{self, BoundsVerdict, ScanRow, ScanTable};
use crate::semigroup::{self, InitialData, Propagator, Trajectory};
use crate::spectral::SpectralModel;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const TRUNCATION_NOTE: &str =
    "empirical constants (C, c, lambda0, fitted exponents) are artifacts of the finite truncation, not the existential constants of the estimates";

/// Floor for the lower-bound verdict `inf U(ρ_k)·m(ρ_k)`.
pub const LOWER_FLOOR: f64 = 0.01;
/// Allowed shortfall of a fitted polynomial exponent against the prediction.
pub const BETA_TOLERANCE: f64 = 0.25;
/// Relative energy drift tolerated for undamped runs.
pub const CONSERVATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Scan,
    Certify,
    Simulate,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Scan, Stage::Certify, Stage::Simulate];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationInfo {
    #[serde(rename = "K")]
    pub cutoff: usize,
    pub n_modes: usize,
    pub generator_dim: usize,
    pub max_frequency: f64,
    pub guard: f64,
    pub sectors: usize,
    pub largest_sector: usize,
    pub dropped_coupling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub rows: usize,
    pub peaks: usize,
    /// Range actually scanned, after clipping to the guard.
    pub range: [f64; 2],
    /// Peak rows used by the exponent fit.
    pub fit_window: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<LineFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_exponent: Option<f64>,
    pub max_u: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<BoundsVerdict>,
    pub lower: BoundsVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaSummary {
    pub seed: u64,
    pub samples: usize,
    /// Largest consecutive ratio per inequality.
    pub growth: BTreeMap<String, f64>,
    pub max_constant: BTreeMap<String, f64>,
    pub microlocality_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifySummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ellipticity: Option<CertificateReport>,
    pub boundedness: CertificateReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma: Option<LemmaSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub steps: usize,
    pub seed: u64,
    pub smoothed: bool,
    /// `(E(T) − E(0))/E(0)`.
    pub energy_change: f64,
    pub max_energy_rise: f64,
    pub spectral_abscissa: f64,
    pub window: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    /// `−2·abscissa`, the decay rate of `E` predicted by the spectrum.
    pub spectral_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_law: Option<LineFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponential: Option<LineFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_error: Option<String>,
    /// Power-law fit of `‖e^{t𝒜}𝒜^{-1}‖` itself on the same window, when
    /// every sector is small enough to invert densely.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operator_beta: Option<f64>,
}

/// Largest sector for which the operator-norm curve is computed.
pub const OPERATOR_CURVE_MAX_BLOCK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub stages: Vec<Stage>,
    pub note: String,
    pub preset: String,
    pub description: String,
    pub verdicts: BTreeMap<String, Verdict>,
    /// Seconds per stage.
    pub runtimes: BTreeMap<String, f64>,
    pub truncation: TruncationInfo,
    pub prediction: Prediction,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certify: Option<CertifySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSummary>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn all_pass(&self) -> bool {
        self.verdicts.values().all(|v| v.pass)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Argument(format!("manifest serialization: {e}")))
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub directory: PathBuf,
    pub manifest: Manifest,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    /// 0 when every verdict passes, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        i32::from(!self.manifest.all_pass())
    }
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let res = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, &target)
    })();
    if let Err(e) = res {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::Io(std::io::Error::new(e.kind(), format!("writing {}: {e}", target.display()))));
    }
    Ok(target)
}

pub fn certificates_csv(reports: &[&CertificateReport]) -> String {
    let mut s = String::from("kind,h,value,m,ratio,window_modes,certified\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    for r in reports {
        let kind = match r.kind {
            certify::CertificateKind::Ellipticity => "ellipticity",
            certify::CertificateKind::Boundedness => "boundedness",
        };
        for row in &r.rows {
            let _ = writeln!(
                s,
                "{kind},{:.16e},{},{:.16e},{},{},{}",
                row.h,
                opt(row.value),
                row.m,
                opt(row.ratio),
                row.window_modes,
                u8::from(row.certified)
            );
        }
    }
    s
}

/// Parses a table written by [`ScanTable::to_csv`].
pub fn read_scan_csv(text: &str) -> Result<ScanTable> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Argument(format!("scan csv line {}: expected lambda,U,predicted,peak,singular", i + 1));
        if f.len() != 5 {
            return Err(bad());
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        rows.push(ScanRow {
            lambda: num(f[0])?,
            u: num(f[1])?,
            predicted: num(f[2])?,
            peak: f[3].trim() == "1",
            singular: f[4].trim() == "1",
        });
    }
    Ok(ScanTable { rows, guard: f64::INFINITY, n_modes: 0 })
}

/// Parses `(t, E)` from a table written by [`Trajectory::to_csv`].
pub fn read_trajectory_csv(text: &str) -> Result<Trajectory> {
    let (mut times, mut energy) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Argument(format!("trajectory csv line {}: expected t,E,norm", i + 1));
        if f.len() != 3 {
            return Err(bad());
        }
        times.push(f[0].trim().parse::<f64>().map_err(|_| bad())?);
        energy.push(f[1].trim().parse::<f64>().map_err(|_| bad())?);
    }
    if times.is_empty() {
        return Err(Error::Argument("trajectory csv has no rows".into()));
    }
    let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
    Ok(Trajectory {
        dt,
        times,
        energy,
        data: InitialData { seed: None, max_mode: None, smoothed: false },
        final_state: Vec::new(),
    })
}

struct Built {
    preset: Preset,
    model: SpectralModel,
    g: DampingOperator,
    gen: GeneratorMatrix,
}

fn build(cfg: &ExperimentConfig) -> Result<Built> {
    let preset = cfg.preset()?;
    let model = preset.model()?;
    let g = preset.assemble(&model)?;
    let gen = build_generator(&model, &g)?;
    Ok(Built { preset, model, g, gen })
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

/// Runs `stages` for `cfg` and writes the artifacts into
/// `cfg.output.directory`.
pub fn run(cfg: &ExperimentConfig, stages: &[Stage]) -> Result<RunOutcome> {
    cfg.validate()?;
    let dir = cfg.output.directory.clone();
    std::fs::create_dir_all(&dir)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("creating {}: {e}", dir.display()))))?;

    let mut runtimes = BTreeMap::new();
    let t0 = Instant::now();
    let b = build(cfg)?;
    runtimes.insert("assemble".to_string(), t0.elapsed().as_secs_f64());
    let d = b.gen.decomposition();
    let truncation = TruncationInfo {
        cutoff: b.model.cutoff(),
        n_modes: b.model.len(),
        generator_dim: b.gen.dim(),
        max_frequency: b.model.max_frequency(),
        guard: b.gen.guard(),
        sectors: d.sectors().len(),
        largest_sector: d.largest_sector(),
        dropped_coupling: d.dropped_coupling,
    };
    let prediction = b.preset.prediction.clone();
    let mut verdicts = BTreeMap::new();
    let mut files = Vec::new();
    let mut manifest_scan = None;
    let mut manifest_cert = None;
    let mut manifest_sim = None;

    if stages.contains(&Stage::Scan) {
        let t = Instant::now();
        let (summary, table) = run_scan(cfg, &b)?;
        if let Some(u) = &summary.upper {
            verdicts.insert(
                "scan.upper".into(),
                verdict(u.upper_ok, format!("sup U·min(m,1) = {:.4e}, octave growth {:.3}", u.upper_constant, u.octave_growth)),
            );
        }
        verdicts.insert(
            "scan.lower".into(),
            verdict(summary.lower.lower_ok, format!("inf U(ρ_k)·m_b(ρ_k) = {:.4e} (floor {LOWER_FLOOR})", summary.lower.lower_constant)),
        );
        files.push(write_atomic(&dir, "scan.csv", table.to_csv().as_bytes())?);
        if cfg.output.plots {
            let x: Vec<f64> = table.rows.iter().map(|r| r.lambda).collect();
            let y: Vec<f64> = table.rows.iter().map(|r| r.u).collect();
            let svg = plot::line_plot(&format!("{}: resolvent norm", b.preset.name), "λ", "U(λ)", &x, &y, Axes { log_x: true, log_y: true });
            files.push(write_atomic(&dir, "scan.svg", svg.as_bytes())?);
        }
        manifest_scan = Some(summary);
        runtimes.insert("scan".into(), t.elapsed().as_secs_f64());
    }

    if stages.contains(&Stage::Certify) {
        let t = Instant::now();
        let summary = run_certify(cfg, &b)?;
        if let Some(e) = &summary.ellipticity {
            verdicts.insert(
                "certify.ellipticity".into(),
                verdict(e.pass, format!("c = {:.4e}, drift {:.3}, λ0 = {:.3}", e.c, e.worst_drift, e.lambda0)),
            );
        }
        let bd = &summary.boundedness;
        verdicts.insert(
            "certify.boundedness".into(),
            verdict(bd.pass, format!("C = {:.4e}, drift {:.3}", bd.big_c, bd.worst_drift)),
        );
        let reports: Vec<&CertificateReport> = summary.ellipticity.iter().chain([bd]).collect();
        files.push(write_atomic(&dir, "certificates.csv", certificates_csv(&reports).as_bytes())?);
        manifest_cert = Some(summary);
        runtimes.insert("certify".into(), t.elapsed().as_secs_f64());
    }

    if stages.contains(&Stage::Simulate) {
        let t = Instant::now();
        let (summary, traj) = run_sim(cfg, &b)?;
        if let Some(v) = sim_verdict(&prediction, &summary) {
            verdicts.insert("sim.decay".into(), v);
        }
        files.push(write_atomic(&dir, "trajectory.csv", traj.to_csv().as_bytes())?);
        if cfg.output.plots {
            let svg = plot::line_plot(
                &format!("{}: energy", b.preset.name),
                "t",
                "E(t)",
                &traj.times,
                &traj.energy,
                Axes { log_x: false, log_y: true },
            );
            files.push(write_atomic(&dir, "trajectory.svg", svg.as_bytes())?);
        }
        manifest_sim = Some(summary);
        runtimes.insert("simulate".into(), t.elapsed().as_secs_f64());
    }

    runtimes.insert("total".into(), t0.elapsed().as_secs_f64());
    let mut stages_sorted = stages.to_vec();
    stages_sorted.sort();
    stages_sorted.dedup();
    let manifest = Manifest {
        version: VERSION.to_string(),
        stages: stages_sorted,
        note: TRUNCATION_NOTE.to_string(),
        preset: b.preset.name.clone(),
        description: b.preset.description.clone(),
        verdicts,
        runtimes,
        truncation,
        prediction,
        scan: manifest_scan,
        certify: manifest_cert,
        sim: manifest_sim,
        config: cfg.clone(),
    };
    files.push(write_atomic(&dir, "manifest.toml", manifest.to_toml_string()?.as_bytes())?);
    Ok(RunOutcome { directory: dir, manifest, files })
}

fn run_scan(cfg: &ExperimentConfig, b: &Built) -> Result<(ScanSummary, ScanTable)> {
    let s = &cfg.scan;
    let grid = scan::default_grid(&b.gen, s.lambda_min, s.lambda_max, s.per_decade, s.peaks)?;
    let table = scan::scan(&b.gen, &grid)?;
    let range = [grid[0], *grid.last().expect("non-empty grid")];
    let (alpha, fit_error) = match scan::fit_exponent(&table, range[0], range[1]) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let p = &b.preset.prediction;
    let upper = p.claimed_m.map(|m| scan::check_bounds(&table, m, LOWER_FLOOR)).transpose()?;
    let lower = scan::check_bounds(&table, p.bounded_m, LOWER_FLOOR)?;
    Ok((
        ScanSummary {
            rows: table.rows.len(),
            peaks: table.peaks().count(),
            range,
            fit_window: range,
            alpha,
            fit_error,
            predicted_exponent: p.resolvent_exponent,
            max_u: table.max_u(),
            upper,
            lower,
        },
        table,
    ))
}

fn run_certify(cfg: &ExperimentConfig, b: &Built) -> Result<CertifySummary> {
    let grid = certify::dyadic_grid(cfg.certify.h_min_exp, cfg.certify.h_max_exp);
    let opts = CertifyOptions::default();
    let p = &b.preset.prediction;
    let ellipticity = p
        .claimed_m
        .map(|m| certify::certify_ellipticity(&b.model, &b.g, m, &grid, opts))
        .transpose()?;
    let boundedness = certify::certify_boundedness(&b.model, &b.g, p.bounded_m, &grid, opts)?;
    let lemma = if cfg.certify.lemma {
        let opts = LemmaSuiteOptions { conversion_order: p.conversion_order(), ..Default::default() };
        let r = certify::lemma_suite(&b.model, &b.g, certify::DEFAULT_SEED, opts)?;
        Some(LemmaSummary {
            seed: r.seed,
            samples: r.samples,
            growth: r.series.iter().map(|s| (s.name.clone(), s.max_growth())).collect(),
            max_constant: r.series.iter().map(|s| (s.name.clone(), s.max_constant())).collect(),
            microlocality_max: r.microlocality.iter().filter_map(|x| x.1).fold(0.0, f64::max),
        })
    } else {
        None
    };
    Ok(CertifySummary { ellipticity, boundedness, lemma })
}

fn run_sim(cfg: &ExperimentConfig, b: &Built) -> Result<(SimSummary, Trajectory)> {
    let sim = &cfg.sim;
    let modes: Vec<Vec<i32>> = (0..b.model.len()).map(|i| b.model.mode(i).to_vec()).collect();
    let (lo, hi) = cfg.fit_window();
    let steps = (sim.t_end / sim.dt).round() as usize;
    let mut summary = SimSummary {
        steps,
        seed: sim.seed,
        smoothed: sim.smoothed,
        energy_change: 0.0,
        max_energy_rise: 0.0,
        spectral_abscissa: 0.0,
        window: [lo, hi],
        rate: None,
        spectral_rate: 0.0,
        beta: None,
        power_law: None,
        exponential: None,
        fit_error: None,
        operator_beta: None,
    };
    let traj = if sim.smoothed {
        let (fit, traj) = semigroup::fit_polynomial_rate(&b.gen, &modes, sim.seed, sim.t_end, sim.dt, lo, hi)?;
        summary.spectral_abscissa = fit.abscissa;
        summary.window = [fit.window.0, fit.window.1];
        summary.beta = Some(fit.beta);
        summary.power_law = Some(fit.power_law);
        summary.exponential = Some(fit.exponential);
        if b.gen.decomposition().largest_sector() <= OPERATOR_CURVE_MAX_BLOCK {
            let curve = semigroup::operator_norm_curve(&b.gen, sim.dt, steps, 2 * OPERATOR_CURVE_MAX_BLOCK)?;
            let (t, n): (Vec<f64>, Vec<f64>) = curve.into_iter().unzip();
            if let Ok((p, _)) = semigroup::fit_power_law(&t, &n, fit.window.0, fit.window.1) {
                summary.operator_beta = Some(-p.slope);
            }
        }
        traj
    } else {
        summary.spectral_abscissa = b.gen.spectral_abscissa()?;
        let z = semigroup::random_state(&b.gen, &modes, sim.seed, None)?;
        let prop = Propagator::new(&b.gen, sim.dt)?;
        let data = InitialData { seed: Some(sim.seed), max_mode: None, smoothed: false };
        let traj = semigroup::evolve_with(&b.gen, &prop, &z, steps, data)?;
        match semigroup::fit_exponential_rate(&traj, lo, hi) {
            Ok(r) => {
                summary.rate = Some(r.rate);
                summary.exponential = Some(r.fit);
            }
            Err(e) => summary.fit_error = Some(e.to_string()),
        }
        traj
    };
    summary.spectral_rate = -2.0 * summary.spectral_abscissa;
    let e0 = traj.energy[0];
    summary.energy_change = (traj.energy.last().copied().unwrap_or(e0) - e0) / e0;
    summary.max_energy_rise = traj.energy.windows(2).map(|w| (w[1] - w[0]) / w[0]).fold(0.0, f64::max);
    Ok((summary, traj))
}

fn sim_verdict(p: &Prediction, s: &SimSummary) -> Option<Verdict> {
    match (p.decay, s.smoothed) {
        (DecayPrediction::Polynomial { beta }, true) => {
            let got = s.beta?;
            let preferred = match (s.power_law, s.exponential) {
                (Some(a), Some(b)) => a.residual < b.residual,
                _ => false,
            };
            Some(verdict(
                got >= beta - BETA_TOLERANCE && preferred,
                format!("β = {got:.4} (predicted {beta}, tolerance {BETA_TOLERANCE}); power law preferred: {preferred}"),
            ))
        }
        (DecayPrediction::Exponential, false) => Some(match (s.rate, &s.fit_error) {
            (Some(r), _) => verdict(r > 0.0, format!("rate {r:.6e} (spectral {:.6e})", s.spectral_rate)),
            (None, Some(e)) => verdict(false, e.clone()),
            (None, None) => verdict(false, "no fit"),
        }),
        (DecayPrediction::None, false) => Some(verdict(
            s.energy_change.abs() <= CONSERVATION_TOL,
            format!("relative energy change {:.3e}", s.energy_change),
        )),
        _ => None,
    }
}

/// Fit summary for existing CSV outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<LineFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan_window: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_law: Option<LineFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponential: Option<LineFit>,
    pub window: [f64; 2],
}

/// Refits `scan.csv` and `trajectory.csv` found in `dir` with the windows of
/// `cfg`, without recomputing anything.
pub fn refit(cfg: &ExperimentConfig, dir: &Path) -> Result<FitReport> {
    let (lo, hi) = cfg.fit_window();
    let mut report =
        FitReport { alpha: None, scan_window: None, scan_error: None, rate: None, beta: None, power_law: None, exponential: None, window: [lo, hi] };
    let scan_path = dir.join("scan.csv");
    let traj_path = dir.join("trajectory.csv");
    if !scan_path.exists() && !traj_path.exists() {
        return Err(Error::Argument(format!("no scan.csv or trajectory.csv in {}", dir.display())));
    }
    if scan_path.exists() {
        let table = read_scan_csv(&std::fs::read_to_string(&scan_path)?)?;
        let w = [cfg.scan.lambda_min, cfg.scan.lambda_max];
        match scan::fit_exponent(&table, w[0], w[1]) {
            Ok(f) => report.alpha = Some(f),
            Err(e) => report.scan_error = Some(e.to_string()),
        }
        report.scan_window = Some(w);
    }
    if traj_path.exists() {
        let traj = read_trajectory_csv(&std::fs::read_to_string(&traj_path)?)?;
        if cfg.sim.smoothed {
            let norm: Vec<f64> = traj.norm().collect();
            let (p, e) = semigroup::fit_power_law(&traj.times, &norm, lo, hi)?;
            report.beta = Some(-p.slope);
            report.power_law = Some(p);
            report.exponential = Some(e);
        } else {
            let r = semigroup::fit_exponential_rate(&traj, lo, hi)?;
            report.rate = Some(r.rate);
            report.exponential = Some(r.fit);
        }
    }
    Ok(report)
}
