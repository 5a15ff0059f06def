//! Resolvent norm scans along the imaginary axis, peak sampling and
//! power-law fits.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::damping::MFunction;
use crate::error::{Error, Result};
use crate::fit::{self, LineFit};
use crate::generator::GeneratorMatrix;

/// Relative distance under which a grid point counts as an eigenfrequency.
const PEAK_MATCH: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub lambda: f64,
    /// `‖(𝒜 + iλ)^{-1}‖`; infinite when singular.
    pub u: f64,
    /// `max{1/m(λ), 1}`.
    pub predicted: f64,
    pub peak: bool,
    pub singular: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
    pub guard: f64,
    pub n_modes: usize,
}

impl ScanTable {
    pub fn peaks(&self) -> impl Iterator<Item = &ScanRow> {
        self.rows.iter().filter(|r| r.peak)
    }

    pub fn max_u(&self) -> f64 {
        self.rows.iter().map(|r| r.u).fold(0.0, f64::max)
    }

    /// Value at `λ` if it is a grid point.
    pub fn at(&self, lambda: f64) -> Option<&ScanRow> {
        self.rows.iter().find(|r| (r.lambda - lambda).abs() <= PEAK_MATCH * lambda)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,U,predicted,peak,singular\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{},{}",
                r.lambda,
                r.u,
                r.predicted,
                u8::from(r.peak),
                u8::from(r.singular)
            );
        }
        s
    }
}

fn is_peak(gen: &GeneratorMatrix, lambda: f64) -> bool {
    let f = gen.frequencies();
    let i = f.partition_point(|&x| x < lambda * (1.0 - PEAK_MATCH));
    i < f.len() && (f[i] - lambda).abs() <= PEAK_MATCH * lambda
}

/// `U(λ)` at each grid point. The grid must be strictly increasing, positive
/// and inside the truncation guard.
pub fn scan(gen: &GeneratorMatrix, grid: &[f64]) -> Result<ScanTable> {
    if let Some(&bad) = grid.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::Argument(format!("scan frequencies must be positive, got {bad}")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("scan grid must be strictly increasing".into()));
    }
    let guard = gen.guard();
    if let Some(&top) = grid.last() {
        if top > guard {
            return Err(Error::Guard { guard, requested: top });
        }
    }
    let m = gen.claimed_m;
    let rows = grid
        .par_iter()
        .map(|&lambda| {
            let r = gen.resolvent_norm(lambda)?;
            Ok(ScanRow {
                lambda,
                u: if r.singular { f64::INFINITY } else { r.value },
                predicted: (1.0 / m.eval(lambda)).max(1.0),
                peak: is_peak(gen, lambda),
                singular: r.singular,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanTable { rows, guard, n_modes: gen.n_modes() })
}

/// Log-spaced grid on `[lo, hi]` with `per_decade` points per decade, plus
/// every eigenfrequency in range when `peaks` is set. `hi` is clipped to the
/// guard.
pub fn default_grid(gen: &GeneratorMatrix, lo: f64, hi: f64, per_decade: usize, peaks: bool) -> Result<Vec<f64>> {
    let hi = hi.min(gen.guard());
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::Argument(format!("empty scan range [{lo}, {hi}] (guard {})", gen.guard())));
    }
    let mut grid = Vec::new();
    if per_decade > 0 {
        let n = ((hi / lo).log10() * per_decade as f64).ceil().max(1.0) as usize;
        for i in 0..=n {
            grid.push(lo * (hi / lo).powf(i as f64 / n as f64));
        }
        grid[n] = hi;
    }
    if peaks {
        grid.extend(gen.frequencies().iter().copied().filter(|&f| f >= lo && f <= hi));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() <= PEAK_MATCH * *b);
    Ok(grid)
}

/// Scan restricted to the eigenfrequencies in `[lo, hi] ∩ (0, guard]`.
pub fn peak_sample(gen: &GeneratorMatrix, lo: f64, hi: f64) -> Result<ScanTable> {
    let hi = hi.min(gen.guard());
    let grid: Vec<f64> = gen.frequencies().iter().copied().filter(|&f| f >= lo && f <= hi).collect();
    scan(gen, &grid)
}

/// Fits `log U = α log λ + β` over the finite peak rows with `λ ∈ [lo, hi]`.
pub fn fit_exponent(table: &ScanTable, lo: f64, hi: f64) -> Result<LineFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = table
        .peaks()
        .filter(|r| r.lambda >= lo && r.lambda <= hi && !r.singular && r.u.is_finite())
        .map(|r| (r.lambda.ln(), r.u.ln()))
        .unzip();
    fit::line(&x, &y, 5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsVerdict {
    pub upper_ok: bool,
    pub lower_ok: bool,
    /// `sup U(λ)·min{m(λ), 1}`.
    pub upper_constant: f64,
    /// `inf` over peaks of `U(ρ_k)·m(ρ_k)`.
    pub lower_constant: f64,
    /// Largest ratio of octave-wise suprema of `U·min{m, 1}`.
    pub octave_growth: f64,
}

/// Allowed growth of the normalized upper envelope per octave.
pub const OCTAVE_GROWTH: f64 = 1.2;

pub fn check_bounds(table: &ScanTable, m: MFunction, lower_floor: f64) -> Result<BoundsVerdict> {
    if table.rows.is_empty() {
        return Err(Error::Argument("empty scan table".into()));
    }
    let lo = table.rows[0].lambda;
    let mut octaves: Vec<f64> = Vec::new();
    let mut upper: f64 = 0.0;
    for r in &table.rows {
        let y = r.u * m.eval(r.lambda).min(1.0);
        upper = upper.max(y);
        let j = (r.lambda / lo).log2().floor().max(0.0) as usize;
        if octaves.len() <= j {
            octaves.resize(j + 1, 0.0);
        }
        octaves[j] = octaves[j].max(y);
    }
    let filled: Vec<f64> = octaves.into_iter().filter(|&v| v > 0.0).collect();
    let growth = filled.windows(2).map(|w| w[1] / w[0]).fold(1.0, f64::max);
    let lower = table.peaks().map(|r| r.u * m.eval(r.lambda)).fold(f64::INFINITY, f64::min);
    Ok(BoundsVerdict {
        upper_ok: upper.is_finite() && growth.is_finite() && growth <= OCTAVE_GROWTH,
        lower_ok: table.peaks().next().is_some() && lower >= lower_floor,
        upper_constant: upper,
        lower_constant: lower,
        octave_growth: growth,
    })
}
