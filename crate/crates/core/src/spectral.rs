//! Truncated Fourier eigenbasis of `P` on the flat torus `[-1,1]^d`.
//!
//! Eigenfunctions are `e^{iπk·x} / 2^{d/2}` for multi-indices `|k_i| ≤ K`.
//! Every function of `P` is diagonal in this basis, so the calculus is exact.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    /// `ρ_k² = |πk|²`.
    Laplacian,
    /// `ρ_k² = |πk|`, i.e. `P = Δ^{1/2}`.
    HalfLaplacian,
}

impl OperatorKind {
    pub fn eigenvalue(self, k: &[i32]) -> f64 {
        let r2: f64 = k.iter().map(|&ki| (PI * ki as f64).powi(2)).sum();
        match self {
            OperatorKind::Laplacian => r2,
            OperatorKind::HalfLaplacian => r2.sqrt(),
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorKind::Laplacian => "laplacian",
            OperatorKind::HalfLaplacian => "half-laplacian",
        })
    }
}

#[derive(Clone)]
pub struct SpectralModel {
    dimension: usize,
    cutoff: usize,
    kind: OperatorKind,
    oversample: usize,
    /// Flattened multi-indices, `dimension` entries per mode.
    modes: Vec<i32>,
    eigenvalues: Vec<f64>,
    /// Lattice position (row-major over `[-K, K]^d`) to mode index.
    lattice: Vec<usize>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralModel")
            .field("dimension", &self.dimension)
            .field("cutoff", &self.cutoff)
            .field("kind", &self.kind)
            .field("oversample", &self.oversample)
            .finish()
    }
}

/// Complex coefficients over the modes of one [`SpectralModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub coeffs: Vec<C64>,
}

impl StateVector {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
    /// `‖u‖_H`.
    pub fn norm(&self) -> f64 {
        crate::linalg::vec_norm(&self.coeffs)
    }
}

impl SpectralModel {
    pub fn new(dimension: usize, cutoff: usize, kind: OperatorKind, oversample: usize) -> Result<Self> {
        if !(1..=2).contains(&dimension) {
            return Err(Error::Argument(format!("dimension must be 1 or 2, got {dimension}")));
        }
        if cutoff < 1 {
            return Err(Error::Argument("cutoff K must be at least 1".into()));
        }
        if oversample < 2 {
            return Err(Error::Argument(format!("oversample must be at least 2, got {oversample}")));
        }
        let side = 2 * cutoff + 1;
        let count = side.pow(dimension as u32);
        let kk = cutoff as i32;
        let mut ks: Vec<Vec<i32>> = (0..count)
            .map(|p| lattice_to_k(p, dimension, side, kk))
            .collect();
        ks.sort_by(|a, b| {
            let na: i64 = a.iter().map(|&x| (x as i64) * (x as i64)).sum();
            let nb: i64 = b.iter().map(|&x| (x as i64) * (x as i64)).sum();
            na.cmp(&nb).then_with(|| a.cmp(b))
        });
        let mut lattice = vec![usize::MAX; count];
        for (i, k) in ks.iter().enumerate() {
            lattice[k_to_lattice(k, side, kk)] = i;
        }
        let eigenvalues = ks.iter().map(|k| kind.eigenvalue(k)).collect();
        let n = oversample * side;
        let mut planner = FftPlanner::new();
        Ok(Self {
            dimension,
            cutoff,
            kind,
            oversample,
            modes: ks.into_iter().flatten().collect(),
            eigenvalues,
            lattice,
            fft: planner.plan_fft_forward(n),
            ifft: planner.plan_fft_inverse(n),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }
    pub fn oversample(&self) -> usize {
        self.oversample
    }
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }
    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
    pub fn mode(&self, i: usize) -> &[i32] {
        &self.modes[i * self.dimension..(i + 1) * self.dimension]
    }
    /// `ρ_k²` in mode order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
    pub fn index_of(&self, k: &[i32]) -> Option<usize> {
        if k.len() != self.dimension || k.iter().any(|&x| x.unsigned_abs() as usize > self.cutoff) {
            return None;
        }
        Some(self.lattice[k_to_lattice(k, 2 * self.cutoff + 1, self.cutoff as i32)])
    }
    /// Index of the mode `-k`.
    pub fn mirror(&self, i: usize) -> usize {
        let neg: Vec<i32> = self.mode(i).iter().map(|x| -x).collect();
        self.index_of(&neg).expect("lattice is symmetric")
    }

    /// Largest frequency `ρ` such that every mode with `ρ_k ≤ ρ` is retained.
    pub fn max_frequency(&self) -> f64 {
        let mut k = vec![0; self.dimension];
        k[0] = self.cutoff as i32;
        self.kind.eigenvalue(&k).sqrt()
    }

    /// Largest `|λ|` at which resolvent quantities are reported.
    pub fn guard(&self) -> f64 {
        0.5 * self.max_frequency()
    }

    pub fn zeros(&self) -> StateVector {
        StateVector { coeffs: vec![ZERO; self.len()] }
    }

    pub fn basis(&self, k: &[i32]) -> Result<StateVector> {
        let i = self
            .index_of(k)
            .ok_or_else(|| Error::Argument(format!("mode {k:?} is outside the truncation")))?;
        let mut u = self.zeros();
        u.coeffs[i] = C64::new(1.0, 0.0);
        Ok(u)
    }

    pub fn state(&self, coeffs: Vec<C64>) -> Result<StateVector> {
        self.check_len(coeffs.len())?;
        Ok(StateVector { coeffs })
    }

    fn check(&self, u: &StateVector) -> Result<()> {
        self.check_len(u.len())
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(Error::Dimension { expected: self.len(), got: n });
        }
        Ok(())
    }

    fn scale(&self, u: &StateVector, factor: impl Fn(f64) -> f64) -> StateVector {
        StateVector {
            coeffs: u
                .coeffs
                .iter()
                .zip(&self.eigenvalues)
                .map(|(c, &r2)| c * factor(r2))
                .collect(),
        }
    }

    /// `f(P) u`.
    pub fn apply_borel(&self, f: impl Fn(f64) -> f64, u: &StateVector) -> Result<StateVector> {
        self.check(u)?;
        let mut out = u.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            let r2 = self.eigenvalues[i];
            let v = f(r2);
            if !v.is_finite() {
                return Err(Error::Domain { mode: self.mode(i).to_vec(), eigenvalue: r2, value: v });
            }
            *c *= v;
        }
        Ok(out)
    }

    /// `Λ^s u = (1+P)^s u`.
    pub fn lambda_power(&self, s: f64, u: &StateVector) -> Result<StateVector> {
        self.check(u)?;
        Ok(self.scale(u, |r2| (1.0 + r2).powf(s)))
    }

    /// `Λ_h^s u = (1+h²P)^s u`.
    pub fn lambda_h_power(&self, s: f64, h: f64, u: &StateVector) -> Result<StateVector> {
        check_h(h)?;
        self.check(u)?;
        Ok(self.scale(u, |r2| (1.0 + h * h * r2).powf(s)))
    }

    pub fn norm_hs(&self, s: f64, u: &StateVector) -> Result<f64> {
        Ok(self.lambda_power(s, u)?.norm())
    }

    pub fn norm_hs_h(&self, s: f64, h: f64, u: &StateVector) -> Result<f64> {
        Ok(self.lambda_h_power(s, h, u)?.norm())
    }

    /// Mode mask of `1_{[lo,hi]}(h²P)`.
    pub fn window_mask(&self, h: f64, lo: f64, hi: f64) -> Result<Vec<bool>> {
        check_h(h)?;
        if !(lo < 1.0 && 1.0 < hi) {
            return Err(Error::Argument(format!("window [{lo}, {hi}] must contain 1 in its interior")));
        }
        Ok(self
            .eigenvalues
            .iter()
            .map(|&r2| {
                let x = h * h * r2;
                lo <= x && x <= hi
            })
            .collect())
    }

    /// Indices of the modes with `h²ρ_k² ∈ [lo, hi]`.
    pub fn window_modes(&self, h: f64, lo: f64, hi: f64) -> Result<Vec<usize>> {
        let mask = self.window_mask(h, lo, hi)?;
        Ok(mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect())
    }

    pub fn spectral_window(&self, h: f64, lo: f64, hi: f64, u: &StateVector) -> Result<StateVector> {
        self.check(u)?;
        let mask = self.window_mask(h, lo, hi)?;
        let coeffs = u
            .coeffs
            .iter()
            .zip(mask)
            .map(|(&c, keep)| if keep { c } else { ZERO })
            .collect();
        Ok(StateVector { coeffs })
    }

    /// Grid points per axis.
    pub fn grid_size(&self) -> usize {
        self.oversample * (2 * self.cutoff + 1)
    }

    /// Grid nodes `x_j = -1 + 2j/n` along one axis.
    pub fn grid_nodes(&self) -> Vec<f64> {
        let n = self.grid_size();
        (0..n).map(|j| -1.0 + 2.0 * j as f64 / n as f64).collect()
    }

    /// Samples of `Σ c_k e^{iπk·x}/2^{d/2}` on the grid, row-major with the
    /// first coordinate outermost.
    pub fn to_grid(&self, u: &StateVector) -> Result<Vec<C64>> {
        self.check(u)?;
        let n = self.grid_size();
        let mut buf = vec![ZERO; n.pow(self.dimension as u32)];
        let norm = 2f64.powf(-(self.dimension as f64) / 2.0);
        for (i, &c) in u.coeffs.iter().enumerate() {
            let k = self.mode(i);
            let sign = if k.iter().sum::<i32>() % 2 == 0 { 1.0 } else { -1.0 };
            buf[self.fft_index(k)] = c * (sign * norm);
        }
        self.transform(&mut buf, &self.ifft);
        Ok(buf)
    }

    pub fn from_grid(&self, samples: &[C64]) -> Result<StateVector> {
        let n = self.grid_size();
        let total = n.pow(self.dimension as u32);
        if samples.len() != total {
            return Err(Error::Argument(format!(
                "grid has {} samples, expected {total} = ({n})^{}",
                samples.len(),
                self.dimension
            )));
        }
        let mut buf = samples.to_vec();
        self.transform(&mut buf, &self.fft);
        let d = self.dimension as f64;
        let norm = (2.0 / n as f64).powf(d) * 2f64.powf(-d / 2.0);
        let coeffs = (0..self.len())
            .map(|i| {
                let k = self.mode(i);
                let sign = if k.iter().sum::<i32>() % 2 == 0 { 1.0 } else { -1.0 };
                buf[self.fft_index(k)] * (sign * norm)
            })
            .collect();
        Ok(StateVector { coeffs })
    }

    /// `2^{-d} ∫ a e^{-iπn·x}` for all `|n_i| ≤ 2K`, from samples of `a` on the
    /// grid. Returned on the lattice `[-2K, 2K]^d`, row-major.
    pub fn grid_fourier_coefficients(&self, samples: &[f64]) -> Result<Vec<C64>> {
        let n = self.grid_size();
        let total = n.pow(self.dimension as u32);
        if samples.len() != total {
            return Err(Error::Argument(format!("grid has {} samples, expected {total}", samples.len())));
        }
        let mut buf: Vec<C64> = samples.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.transform(&mut buf, &self.fft);
        let scale = (n as f64).powi(-(self.dimension as i32));
        let k2 = 2 * self.cutoff as i32;
        let side = (2 * k2 + 1) as usize;
        let count = side.pow(self.dimension as u32);
        Ok((0..count)
            .map(|p| {
                let m = lattice_to_k(p, self.dimension, side, k2);
                let sign = if m.iter().sum::<i32>() % 2 == 0 { 1.0 } else { -1.0 };
                buf[self.fft_index(&m)] * (sign * scale)
            })
            .collect())
    }

    fn fft_index(&self, k: &[i32]) -> usize {
        let n = self.grid_size() as i32;
        k.iter().fold(0usize, |acc, &ki| acc * n as usize + ki.rem_euclid(n) as usize)
    }

    fn transform(&self, buf: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid_size();
        match self.dimension {
            1 => plan.process(buf),
            _ => {
                // rows are contiguous; columns through a scratch line
                for row in buf.chunks_mut(n) {
                    plan.process(row);
                }
                let mut line = vec![ZERO; n];
                for col in 0..n {
                    for r in 0..n {
                        line[r] = buf[r * n + col];
                    }
                    plan.process(&mut line);
                    for r in 0..n {
                        buf[r * n + col] = line[r];
                    }
                }
            }
        }
    }
}

fn check_h(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Argument(format!("h must be positive and finite, got {h}")));
    }
    Ok(())
}

pub(crate) fn lattice_to_k(mut p: usize, d: usize, side: usize, k: i32) -> Vec<i32> {
    let mut out = vec![0; d];
    for slot in out.iter_mut().rev() {
        *slot = (p % side) as i32 - k;
        p /= side;
    }
    out
}

pub(crate) fn k_to_lattice(k: &[i32], side: usize, kmax: i32) -> usize {
    k.iter().fold(0usize, |acc, &ki| acc * side + (ki + kmax) as usize)
}
