//! Numerical certificates for `m`-ellipticity and `m`-boundedness, and the
//! randomized inequality suite.

use std::f64::consts::PI;

use faer::{Mat, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::damping::{DampingOperator, MFunction};
use crate::error::Result;
use crate::generator::build_generator;
use crate::linalg::{self, C64, ZERO};
use crate::spectral::{OperatorKind, SpectralModel};

/// Spectral window `[WINDOW_LO, WINDOW_HI]` for `h²P`.
pub const WINDOW_LO: f64 = 0.5;
pub const WINDOW_HI: f64 = 1.5;
pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    /// Ellipticity passes when the smallest ratio exceeds this.
    pub floor: f64,
    /// Boundedness passes when the largest ratio stays below this.
    pub ceiling: f64,
    /// Allowed ratio change per halving of `h`, in the unfavourable direction.
    pub drift: f64,
    /// Rows with `h` above this are reported but not certified.
    pub h_threshold: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { floor: 0.01, ceiling: 100.0, drift: 0.2, h_threshold: 0.125 }
    }
}

/// `h_j = 2^{-j}` for `j` in `j_min..=j_max`.
pub fn dyadic_grid(j_min: u32, j_max: u32) -> Vec<f64> {
    (j_min..=j_max).map(|j| 0.5f64.powi(j as i32)).collect()
}

/// Smallest cutoff `K` whose model contains every mode with `h²ρ² ≤ x_max`
/// along each axis.
pub fn cutoff_for_window(kind: OperatorKind, h: f64, x_max: f64) -> usize {
    let k = match kind {
        OperatorKind::Laplacian => x_max.sqrt() / (PI * h),
        OperatorKind::HalfLaplacian => x_max / (PI * h * h),
    };
    k.floor() as usize + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateKind {
    Ellipticity,
    Boundedness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateRow {
    pub h: f64,
    /// `μ(h)` or `ν(h)`; `None` when the window is empty.
    pub value: Option<f64>,
    /// `m(1/h)`.
    pub m: f64,
    pub ratio: Option<f64>,
    pub window_modes: usize,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub kind: CertificateKind,
    pub m: MFunction,
    pub rows: Vec<CertificateRow>,
    /// Smallest certified ratio.
    pub c: f64,
    /// Largest certified ratio.
    pub big_c: f64,
    /// Largest ratio change factor between consecutive certified rows, in
    /// the direction that would break the verdict.
    pub worst_drift: f64,
    /// Smallest certified frequency `1/max h`.
    pub lambda0: f64,
    pub skipped: Vec<f64>,
    pub options: CertifyOptions,
    pub pass: bool,
}

impl CertificateReport {
    fn finish(kind: CertificateKind, m: MFunction, rows: Vec<CertificateRow>, options: CertifyOptions) -> Self {
        let skipped: Vec<f64> = rows.iter().filter(|r| r.value.is_none()).map(|r| r.h).collect();
        let used: Vec<&CertificateRow> = rows.iter().filter(|r| r.certified && r.ratio.is_some()).collect();
        let ratios: Vec<f64> = used.iter().map(|r| r.ratio.unwrap()).collect();
        let c = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let big_c = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // rows run from large h to small h
        let mut worst: f64 = 1.0;
        for w in used.windows(2) {
            let (a, b) = (w[0].ratio.unwrap(), w[1].ratio.unwrap());
            let step = if a == b { 1.0 } else { match kind {
                CertificateKind::Ellipticity => a / b,
                CertificateKind::Boundedness => b / a,
            } };
            worst = worst.max(if step.is_finite() { step } else { f64::INFINITY });
        }
        let lambda0 = used.iter().map(|r| 1.0 / r.h).fold(f64::INFINITY, f64::min);
        let stable = worst <= 1.0 + options.drift;
        let pass = !ratios.is_empty()
            && stable
            && match kind {
                CertificateKind::Ellipticity => c > options.floor,
                CertificateKind::Boundedness => big_c < options.ceiling,
            };
        Self { kind, m, rows, c, big_c, worst_drift: worst, lambda0, skipped, options, pass }
    }

    /// Ratio spread `max/min` over certified rows.
    pub fn spread(&self) -> f64 {
        self.big_c / self.c
    }

    /// Largest two-sided change factor between consecutive certified rows.
    pub fn two_sided_drift(&self) -> f64 {
        let used: Vec<f64> = self.rows.iter().filter(|r| r.certified).filter_map(|r| r.ratio).collect();
        used.windows(2).map(|w| (w[1] / w[0]).max(w[0] / w[1])).fold(1.0, f64::max)
    }
}

/// `μ(h) = λ_min(Π_h G Π_h |_{ran Π_h})`.
/// Window modes, or `None` when the cutoff does not cover the whole window.
fn full_window(model: &SpectralModel, h: f64) -> Result<Option<Vec<usize>>> {
    let win = model.window_modes(h, WINDOW_LO, WINDOW_HI)?;
    let covered = cutoff_for_window(model.kind(), h, WINDOW_HI) <= model.cutoff();
    Ok((covered && !win.is_empty()).then_some(win))
}

pub fn ellipticity_value(model: &SpectralModel, g: &DampingOperator, h: f64) -> Result<(Option<f64>, usize)> {
    let Some(win) = full_window(model, h)? else {
        return Ok((None, 0));
    };
    let v = if g.is_diagonal() {
        win.iter().map(|&i| g.get(i, i).re).fold(f64::INFINITY, f64::min)
    } else {
        linalg::hermitian_eigenvalues(g.submatrix(&win, &win).as_ref())?[0]
    };
    Ok((Some(v), win.len()))
}

/// `ν(h) = σ_max(Λ_h^{-1/2} G Π_h Λ_h^{-1/2})`.
pub fn boundedness_value(model: &SpectralModel, g: &DampingOperator, h: f64) -> Result<(Option<f64>, usize)> {
    let Some(win) = full_window(model, h)? else {
        return Ok((None, 0));
    };
    let eig = model.eigenvalues();
    let d = |i: usize| (1.0 + h * h * eig[i]).powf(-0.5);
    let v = if g.is_diagonal() {
        win.iter().map(|&i| g.get(i, i).re * d(i) * d(i)).fold(0.0, f64::max)
    } else {
        // Gram matrix of the M × |W| block keeps the eigenproblem small.
        let n = model.len();
        let b = Mat::from_fn(n, win.len(), |i, j| g.get(i, win[j]) * (d(i) * d(win[j])));
        let gram = b.adjoint() * &b;
        let top = linalg::hermitian_eigenvalues(gram.as_ref())?;
        top[top.len() - 1].max(0.0).sqrt()
    };
    Ok((Some(v), win.len()))
}

fn certify(
    kind: CertificateKind,
    model: &SpectralModel,
    g: &DampingOperator,
    m: MFunction,
    h_grid: &[f64],
    options: CertifyOptions,
) -> Result<CertificateReport> {
    let mut rows = Vec::with_capacity(h_grid.len());
    for &h in h_grid {
        let (value, window_modes) = match kind {
            CertificateKind::Ellipticity => ellipticity_value(model, g, h)?,
            CertificateKind::Boundedness => boundedness_value(model, g, h)?,
        };
        let mh = m.eval(1.0 / h);
        rows.push(CertificateRow {
            h,
            value,
            m: mh,
            ratio: value.map(|v| v / mh),
            window_modes,
            certified: h <= options.h_threshold && value.is_some(),
        });
    }
    Ok(CertificateReport::finish(kind, m, rows, options))
}

pub fn certify_ellipticity(
    model: &SpectralModel,
    g: &DampingOperator,
    m: MFunction,
    h_grid: &[f64],
    options: CertifyOptions,
) -> Result<CertificateReport> {
    certify(CertificateKind::Ellipticity, model, g, m, h_grid, options)
}

pub fn certify_boundedness(
    model: &SpectralModel,
    g: &DampingOperator,
    m: MFunction,
    h_grid: &[f64],
    options: CertifyOptions,
) -> Result<CertificateReport> {
    certify(CertificateKind::Boundedness, model, g, m, h_grid, options)
}

/// Minimal `C` with `‖Λ^s u‖² ≤ C(⟨Gu,u⟩ + ‖Λ^{-N}u‖²)` on the truncated
/// space; infinite when `G + Λ^{-2N}` is numerically singular.
pub fn estimate_classical_ellipticity(model: &SpectralModel, g: &DampingOperator, s: f64, n: f64) -> Result<f64> {
    if s > 0.5 {
        return Err(crate::Error::Argument(format!("order s must be at most 1/2, got {s}")));
    }
    if n <= -s {
        return Err(crate::Error::Argument(format!("need N > -s, got N = {n}, s = {s}")));
    }
    let eig = model.eigenvalues();
    let lam = |i: usize, p: f64| (1.0 + eig[i]).powf(p);
    if g.is_diagonal() {
        let c = (0..model.len())
            .map(|i| lam(i, 2.0 * s) / (g.get(i, i).re + lam(i, -2.0 * n)))
            .fold(0.0, f64::max);
        return Ok(c);
    }
    let dim = model.len();
    let b = Mat::from_fn(dim, dim, |i, j| {
        let mut z = g.get(i, j);
        if i == j {
            z += lam(i, -2.0 * n);
        }
        z
    });
    let Ok(llt) = b.llt(Side::Lower) else {
        return Ok(f64::INFINITY);
    };
    // largest eigenvalue of L^{-1} D² L^{-*} with D = Λ^s
    let mut x = Mat::from_fn(dim, dim, |i, j| if i == j { C64::new(lam(i, s), 0.0) } else { ZERO });
    llt.L().solve_lower_triangular_in_place(x.as_mut());
    let m = &x * x.adjoint();
    let e = linalg::hermitian_eigenvalues(m.as_ref())?;
    let top = e[e.len() - 1];
    Ok(if top.is_finite() { top } else { f64::INFINITY })
}

/// Empirical constants of one inequality over the `h` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantSeries {
    pub name: String,
    pub h: Vec<f64>,
    /// `None` where the model cannot resolve the sampled modes.
    pub constant: Vec<Option<f64>>,
}

impl ConstantSeries {
    fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), h: Vec::new(), constant: Vec::new() }
    }

    /// Largest `C(h/2)/C(h)` over consecutive resolved rows.
    pub fn max_growth(&self) -> f64 {
        let vals: Vec<f64> = self.constant.iter().flatten().copied().collect();
        vals.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max)
    }

    pub fn max_constant(&self) -> f64 {
        self.constant.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.constant.iter().flatten().all(|c| c.is_finite())
    }

    /// Bounded in the sense of the suite: finite and `C(h/2)/C(h) ≤ limit`.
    pub fn bounded(&self, limit: f64) -> bool {
        self.all_finite() && self.max_growth() <= limit
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaSuiteReport {
    pub seed: u64,
    pub samples: usize,
    pub series: Vec<ConstantSeries>,
    /// `‖φ(h²P) G ψ(h²P)‖` per `h` for `φ = 1_{[0,1/4]}`, `ψ = 1_{[3/4,3/2]}`;
    /// `None` when the cutoff does not cover `ψ`.
    pub microlocality: Vec<(f64, Option<f64>)>,
    /// Order `s` used for the boundedness conversion, from the claimed `m`.
    pub conversion_order: Option<f64>,
}

impl LemmaSuiteReport {
    pub fn get(&self, name: &str) -> Option<&ConstantSeries> {
        self.series.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LemmaSuiteOptions {
    pub h_grid_j: (u32, u32),
    pub samples: usize,
    /// Random vectors live on modes with `h²ρ² ≤ band`.
    pub band: f64,
    /// `s` for the boundedness conversion, when `G` is known to be
    /// `λ^{4s}`-bounded with `s ∈ [0, 1/2]`.
    pub conversion_order: Option<f64>,
}

impl Default for LemmaSuiteOptions {
    fn default() -> Self {
        Self { h_grid_j: (1, 7), samples: 50, band: 4.0, conversion_order: None }
    }
}

fn window_indicator(eig: &[f64], h: f64, lo: f64, hi: f64) -> Vec<bool> {
    eig.iter().map(|&r| (lo..=hi).contains(&(h * h * r))).collect()
}

fn norm_weighted(u: &[C64], w: impl Fn(usize) -> f64) -> f64 {
    u.iter().enumerate().map(|(i, z)| z.norm_sqr() * w(i).powi(2)).sum::<f64>().sqrt()
}

/// Runs the randomized inequality checks and reports all empirical constants.
pub fn lemma_suite(model: &SpectralModel, g: &DampingOperator, seed: u64, opts: LemmaSuiteOptions) -> Result<LemmaSuiteReport> {
    let eig = model.eigenvalues();
    let n = model.len();
    let h_grid = dyadic_grid(opts.h_grid_j.0, opts.h_grid_j.1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let orders = [0.25, 0.5, 1.0];

    let mut equiv: Vec<ConstantSeries> = orders.iter().map(|s| ConstantSeries::new(format!("norm-equivalence s={s}"))).collect();
    let mut upper: Vec<ConstantSeries> = orders.iter().map(|s| ConstantSeries::new(format!("windowed-upper s={s}"))).collect();
    let mut lower: Vec<ConstantSeries> = orders.iter().map(|s| ConstantSeries::new(format!("windowed-lower s={s}"))).collect();
    let mut compact: Vec<ConstantSeries> = [0.5, 1.0].iter().map(|nn| ConstantSeries::new(format!("compact-error N={nn}"))).collect();
    // same bound with the spectral integral of |h²ρ² − 1| in place of its absolute value
    let mut compact_abs: Vec<ConstantSeries> =
        [0.5, 1.0].iter().map(|nn| ConstantSeries::new(format!("compact-error-integrand N={nn}"))).collect();
    let mut opnorm = ConstantSeries::new("operator-norm");
    let conv_order = opts.conversion_order;
    if let Some(s) = conv_order {
        if !(0.0..=0.5).contains(&s) {
            return Err(crate::Error::Argument(format!("conversion order must lie in [0, 1/2], got {s}")));
        }
    }
    let mut conversion = ConstantSeries::new("boundedness-conversion");
    let mut microlocality = Vec::new();
    let gen = build_generator(model, g)?;

    for &h in &h_grid {
        let band: Vec<usize> = (0..n).filter(|&i| h * h * eig[i] <= opts.band).collect();
        let resolved = cutoff_for_window(model.kind(), h, opts.band) <= model.cutoff();
        let chi = window_indicator(eig, h, WINDOW_LO, WINDOW_HI);

        let mut c_equiv = [0.0f64; 3];
        let mut c_upper = [0.0f64; 3];
        let mut c_lower = [0.0f64; 3];
        let mut c_compact = [0.0f64; 2];
        let mut c_compact_abs = [0.0f64; 2];
        let mut c_conv: f64 = 0.0;
        for _ in 0..opts.samples {
            let draws = linalg::complex_gaussian(&mut rng, band.len());
            if !resolved {
                continue;
            }
            let mut u = vec![ZERO; n];
            for (&i, z) in band.iter().zip(draws) {
                u[i] = z;
            }
            let chiu: Vec<C64> = u.iter().zip(&chi).map(|(z, &c)| if c { *z } else { ZERO }).collect();
            let has_chi = chiu.iter().any(|z| *z != ZERO);
            for (t, &s) in orders.iter().enumerate() {
                let lam = norm_weighted(&u, |i| (1.0 + eig[i]).powf(s));
                let lam_h = norm_weighted(&u, |i| (1.0 + h * h * eig[i]).powf(s));
                c_equiv[t] = c_equiv[t].max(lam_h / lam).max(h.powf(2.0 * s) * lam / lam_h);
                if has_chi {
                    let a = norm_weighted(&chiu, |i| (1.0 + h * h * eig[i]).powf(s));
                    let b = norm_weighted(&chiu, |i| (1.0 + eig[i]).powf(s));
                    c_upper[t] = c_upper[t].max(a / (h.powf(2.0 * s) * b));
                    let a = norm_weighted(&chiu, |i| (1.0 + eig[i]).powf(-s));
                    let b = norm_weighted(&chiu, |i| (1.0 + h * h * eig[i]).powf(-s));
                    c_lower[t] = c_lower[t].max(h.powf(-2.0 * s) * a / b);
                }
            }
            let u2 = linalg::vec_norm(&u).powi(2);
            let hp = norm_weighted(&u, |i| h * eig[i].sqrt()).powi(2);
            let spread = norm_weighted(&u, |i| (h * h * eig[i] - 1.0).abs().sqrt()).powi(2);
            for (t, &nn) in [0.5, 1.0].iter().enumerate() {
                let lhs = norm_weighted(&u, |i| (1.0 + eig[i]).powf(-nn)).powi(2);
                let small = h.powf(4.0 * nn) * u2;
                c_compact[t] = c_compact[t].max(lhs / (small + (hp - u2).abs()));
                c_compact_abs[t] = c_compact_abs[t].max(lhs / (small + spread));
            }
            if let (Some(s), true) = (conv_order, has_chi) {
                let mut gu = vec![ZERO; n];
                g.apply(&chiu, &mut gu);
                let lhs = norm_weighted(&gu, |i| (1.0 + h * h * eig[i]).powf(-0.5));
                let rhs = h.powf(-4.0 * s) * norm_weighted(&u, |i| (1.0 + h * h * eig[i]).powf(0.5));
                c_conv = c_conv.max(lhs / rhs);
            }
        }
        let keep = |v: f64| if resolved { Some(v) } else { None };
        // an empty window gives no information about the windowed bounds
        let any_chi = band.iter().any(|&i| chi[i]);
        let keep_chi = |v: f64| if resolved && any_chi { Some(v) } else { None };
        for t in 0..3 {
            equiv[t].h.push(h);
            equiv[t].constant.push(keep(c_equiv[t]));
            for (series, val) in [(&mut upper[t], c_upper[t]), (&mut lower[t], c_lower[t])] {
                series.h.push(h);
                series.constant.push(keep_chi(val));
            }
        }
        for t in 0..2 {
            compact[t].h.push(h);
            compact[t].constant.push(keep(c_compact[t]));
            compact_abs[t].h.push(h);
            compact_abs[t].constant.push(keep(c_compact_abs[t]));
        }
        if conv_order.is_some() {
            conversion.h.push(h);
            conversion.constant.push(keep_chi(c_conv));
        }

        // ‖P_h^{-1}‖_{H→H^h_{1/2}} ≤ C(1 + ‖P_h^{-1}‖)
        opnorm.h.push(h);
        if cutoff_for_window(model.kind(), h, WINDOW_HI) <= model.cutoff() {
            let pencil = gen.pencil(h)?;
            let plain = pencil.inverse_norm()?;
            let weighted = pencil.weighted_inverse_norm(0.5)?;
            opnorm.constant.push(Some(if plain.singular { f64::INFINITY } else { weighted.value / (1.0 + plain.value) }));
        } else {
            opnorm.constant.push(None);
        }

        let phi: Vec<usize> = (0..n).filter(|&i| h * h * eig[i] <= 0.25).collect();
        let psi: Vec<usize> = (0..n).filter(|&i| (0.75..=1.5).contains(&(h * h * eig[i]))).collect();
        let val = if cutoff_for_window(model.kind(), h, 1.5) > model.cutoff() {
            None
        } else if phi.is_empty() || psi.is_empty() || g.is_diagonal() {
            Some(0.0)
        } else {
            let block = g.submatrix(&phi, &psi);
            Some(linalg::singular_values(block.as_ref())?[0])
        };
        microlocality.push((h, val));
    }

    let mut series = Vec::new();
    series.extend(equiv);
    series.extend(upper);
    series.extend(lower);
    series.extend(compact);
    series.extend(compact_abs);
    series.push(opnorm);
    if conv_order.is_some() {
        series.push(conversion);
    }
    Ok(LemmaSuiteReport { seed, samples: opts.samples, series, microlocality, conversion_order: conv_order })
}
