//! Time evolution by `e^{t𝒜}` and decay-rate fits.

use std::fmt::Write as _;

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{self, LineFit};
use crate::generator::GeneratorMatrix;
use crate::linalg::{self, C64, ZERO};

/// Allowed relative energy increase per step.
pub const ENERGY_TOL: f64 = 1e-9;
/// Energies below this fraction of `E(0)` are at the numeric floor.
pub const ENERGY_FLOOR: f64 = 1e-280;
/// Smallest admissible `σ_min(𝒜)` for smoothed data.
pub const INVERTIBLE_MIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub seed: Option<u64>,
    /// Highest `|k|_∞` carrying data, if filtered.
    pub max_mode: Option<i32>,
    /// Whether the data is `𝒜^{-1}x`.
    pub smoothed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    /// `E(t) = ‖z(t)‖²`.
    pub energy: Vec<f64>,
    pub data: InitialData,
    #[serde(skip)]
    pub final_state: Vec<C64>,
}

impl Trajectory {
    pub fn norm(&self) -> impl Iterator<Item = f64> + '_ {
        self.energy.iter().map(|e| e.sqrt())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,E,norm\n");
        for (t, e) in self.times.iter().zip(&self.energy) {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", t, e, e.sqrt());
        }
        s
    }

    fn window(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.energy.iter().copied()).filter(move |&(t, _)| t >= lo && t <= hi)
    }
}

/// `e^{dt·𝒜}` per sector.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub dt: f64,
    blocks: Vec<Mat<C64>>,
}

impl Propagator {
    pub fn new(gen: &GeneratorMatrix, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Argument(format!("dt must be positive, got {dt}")));
        }
        let blocks = gen
            .blocks()
            .into_par_iter()
            .map(|a| {
                if a.nrows() == 0 {
                    return Ok(a);
                }
                let scaled = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * dt);
                linalg::expm(scaled.as_ref())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dt, blocks })
    }

    fn step(&self, parts: &mut [Vec<C64>], scratch: &mut Vec<C64>) {
        for (s, x) in self.blocks.iter().zip(parts.iter_mut()) {
            if x.is_empty() {
                continue;
            }
            scratch.resize(x.len(), ZERO);
            linalg::matvec(s.as_ref(), x, scratch);
            x.copy_from_slice(scratch);
        }
    }
}

fn energy(parts: &[Vec<C64>]) -> f64 {
    parts.iter().flatten().map(|z| z.norm_sqr()).sum()
}

/// Number of `dt` steps to reach `t_end`.
fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && t_end >= dt && t_end.is_finite()) {
        return Err(Error::Argument(format!("need dt > 0 and T ≥ dt, got dt = {dt}, T = {t_end}")));
    }
    Ok((t_end / dt).round() as usize)
}

pub fn evolve(gen: &GeneratorMatrix, z0: &[C64], t_end: f64, dt: f64) -> Result<Trajectory> {
    let steps = step_count(t_end, dt)?;
    let prop = Propagator::new(gen, dt)?;
    evolve_with(gen, &prop, z0, steps, InitialData { seed: None, max_mode: None, smoothed: false })
}

pub fn evolve_with(gen: &GeneratorMatrix, prop: &Propagator, z0: &[C64], steps: usize, data: InitialData) -> Result<Trajectory> {
    let mut parts = gen.to_sectors(z0)?;
    let e0 = energy(&parts);
    if !(e0 > 0.0) {
        return Err(Error::Argument("initial energy must be positive".into()));
    }
    let mut times = Vec::with_capacity(steps + 1);
    let mut en = Vec::with_capacity(steps + 1);
    times.push(0.0);
    en.push(e0);
    let mut scratch = Vec::new();
    for n in 1..=steps {
        prop.step(&mut parts, &mut scratch);
        let e = energy(&parts);
        let before = en[n - 1];
        if !(e <= before * (1.0 + ENERGY_TOL)) {
            return Err(Error::Integrator { step: n, time: n as f64 * prop.dt, before, after: e });
        }
        times.push(n as f64 * prop.dt);
        en.push(e);
    }
    Ok(Trajectory { dt: prop.dt, times, energy: en, data, final_state: gen.from_sectors(&parts) })
}

/// Random state with unit energy. Coordinates are drawn mode by mode, so a
/// larger truncation extends the draw of a smaller one.
pub fn random_state(gen: &GeneratorMatrix, modes: &[Vec<i32>], seed: u64, max_mode: Option<i32>) -> Result<Vec<C64>> {
    if modes.len() != gen.n_modes() {
        return Err(Error::Dimension { expected: gen.n_modes(), got: modes.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nw = gen.n_modes() - 1;
    let mut z = vec![ZERO; gen.dim()];
    let mut draw = || {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    };
    for (i, k) in modes.iter().enumerate() {
        let (w, v) = (draw(), draw());
        if max_mode.is_some_and(|km| k.iter().any(|c| c.abs() > km)) {
            continue;
        }
        if i > 0 {
            z[i - 1] = w;
        }
        if gen.keeps_zero_velocity() {
            z[nw + i] = v;
        } else if i > 0 {
            z[nw + i - 1] = v;
        }
    }
    let n = linalg::vec_norm(&z);
    if n == 0.0 {
        return Err(Error::Argument("filter removed every mode".into()));
    }
    z.iter_mut().for_each(|c| *c /= n);
    Ok(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// `E ≈ E₀ e^{−rt}`.
    pub rate: f64,
    pub fit: LineFit,
    pub window: (f64, f64),
}

/// Least-squares slope of `log E` on `[lo, hi]`.
pub fn fit_exponential_rate(traj: &Trajectory, lo: f64, hi: f64) -> Result<RateFit> {
    let e0 = traj.energy[0];
    let pts: Vec<(f64, f64)> = traj.window(lo, hi).collect();
    if let Some(&(t, e)) = pts.iter().find(|&&(_, e)| !(e >= ENERGY_FLOOR * e0)) {
        return Err(Error::Argument(format!("energy {e:e} at t = {t} is at the numeric floor")));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().map(|(t, e)| (t, e.ln())).unzip();
    let fit = fit::line(&x, &y, 2)?;
    Ok(RateFit { rate: -fit.slope, fit, window: (lo, hi) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialFit {
    /// `‖z(t)‖ ≈ C (1 + t)^{−β}`.
    pub beta: f64,
    pub power_law: LineFit,
    /// Fit of `log ‖z‖` against `t` on the same window.
    pub exponential: LineFit,
    pub window: (f64, f64),
    /// Spectral abscissa that set the upper end of the admissible window.
    pub abscissa: f64,
    pub power_law_preferred: bool,
}

/// Fits `log ‖z‖ = −β log(1 + t) + c` on the rows of `(t, ‖z‖)` in `[lo, hi]`.
pub fn fit_power_law(t: &[f64], norm: &[f64], lo: f64, hi: f64) -> Result<(LineFit, LineFit)> {
    let (mut lx, mut x, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for (&ti, &ni) in t.iter().zip(norm) {
        if ti >= lo && ti <= hi && ti > 0.0 && ni > 0.0 {
            lx.push(ti.ln_1p());
            x.push(ti);
            y.push(ni.ln());
        }
    }
    Ok((fit::line(&lx, &y, 5)?, fit::line(&x, &y, 5)?))
}

/// Upper end of the admissible polynomial window: a quarter of the time
/// scale `1/|abscissa|` after which the truncation's exponential tail takes
/// over.
pub fn polynomial_window(abscissa: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let cap = if abscissa < 0.0 { 0.25 / -abscissa } else { f64::INFINITY };
    let top = hi.min(cap);
    if !(top > lo) {
        return Err(Error::WindowExhausted(format!(
            "requested [{lo}, {hi}] but the exponential tail starts near t = {cap:.4e}; raise the cutoff"
        )));
    }
    Ok((lo, top))
}

/// Evolves `𝒜^{-1}x` for random unit-energy `x` and fits the polynomial
/// decay exponent of `‖z(t)‖` on the admissible part of `[lo, hi]`.
pub fn fit_polynomial_rate(
    gen: &GeneratorMatrix,
    modes: &[Vec<i32>],
    seed: u64,
    t_end: f64,
    dt: f64,
    lo: f64,
    hi: f64,
) -> Result<(PolynomialFit, Trajectory)> {
    let r0 = gen.resolvent_norm(0.0)?;
    if r0.singular || !(1.0 / r0.value > INVERTIBLE_MIN) {
        return Err(Error::Linalg(format!("generator not invertible on the quotient (‖𝒜^{{-1}}‖ = {:e})", r0.value)));
    }
    let abscissa = gen.spectral_abscissa()?;
    let window = polynomial_window(abscissa, lo, hi.min(t_end))?;
    let x = random_state(gen, modes, seed, None)?;
    let y = gen.solve(&x)?;
    let steps = step_count(t_end, dt)?;
    let prop = Propagator::new(gen, dt)?;
    let traj = evolve_with(gen, &prop, &y, steps, InitialData { seed: Some(seed), max_mode: None, smoothed: true })?;
    let norm: Vec<f64> = traj.norm().collect();
    let (power_law, exponential) = fit_power_law(&traj.times, &norm, window.0, window.1)?;
    Ok((
        PolynomialFit {
            beta: -power_law.slope,
            power_law,
            exponential,
            window,
            abscissa,
            power_law_preferred: power_law.residual < exponential.residual,
        },
        traj,
    ))
}

/// `‖e^{t𝒜}𝒜^{-1}‖` at `t = n·dt` for `n = 0..=steps`. Every sector must have
/// at most `max_block` rows.
pub fn operator_norm_curve(gen: &GeneratorMatrix, dt: f64, steps: usize, max_block: usize) -> Result<Vec<(f64, f64)>> {
    let prop = Propagator::new(gen, dt)?;
    let blocks = gen.blocks();
    if let Some(b) = blocks.iter().find(|b| b.nrows() > max_block) {
        return Err(Error::Argument(format!("sector of size {} exceeds {max_block}", b.nrows())));
    }
    let per_sector: Vec<Vec<f64>> = blocks
        .par_iter()
        .zip(&prop.blocks)
        .filter(|(a, _)| a.nrows() > 0)
        .map(|(a, s)| {
            let mut x = a.partial_piv_lu_inverse()?;
            let mut out = Vec::with_capacity(steps + 1);
            for n in 0..=steps {
                if n > 0 {
                    x = s * &x;
                }
                out.push(linalg::singular_values(x.as_ref())?[0]);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..=steps)
        .map(|n| (n as f64 * dt, per_sector.iter().map(|v| v[n]).fold(0.0, f64::max)))
        .collect())
}

trait Inverse {
    fn partial_piv_lu_inverse(&self) -> Result<Mat<C64>>;
}

impl Inverse for Mat<C64> {
    fn partial_piv_lu_inverse(&self) -> Result<Mat<C64>> {
        use faer::linalg::solvers::DenseSolveCore;
        let inv = self.partial_piv_lu().inverse();
        if inv.col_iter().flat_map(|c| c.iter().copied().collect::<Vec<_>>()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Linalg("singular sector".into()));
        }
        Ok(inv)
    }
}
