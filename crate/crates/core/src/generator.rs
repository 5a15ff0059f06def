//! The first-order generator `𝒜` in energy coordinates and the
//! semiclassical pencil `P_h = h²P − ihG − I`.
//!
//! Coordinates are `z = (w, v)` with `w = P^{1/2}u` on the nonzero modes and
//! `v = ∂_t u`. In them the energy norm is Euclidean and
//! `𝒜(w, v) = (Rv, −Rᵀw − Gv)` with `R = diag(ρ_k)`.
//!
//! Both operators are block diagonal after the unitary change to the parity
//! basis `(e_k ± e_{−k})/√2` and a split of that basis into the connected
//! components of the coupling graph of `G`. Every norm, spectrum and
//! exponential is computed block by block.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use faer::Mat;

use crate::damping::{DampingOperator, MFunction};
use crate::error::{Error, Result};
use crate::linalg::{self, DenseLu, InverseOperator, C64, I, ZERO};
use crate::spectral::SpectralModel;

/// Blocks up to this many rows use a full SVD; larger ones use LU plus Lanczos.
pub const SVD_MAX_ROWS: usize = 256;
/// Couplings below this fraction of `max|G|` do not join sectors.
pub const COUPLING_DROP: f64 = 1e-14;
/// `σ_min < SINGULAR_RTOL·σ_max` is reported as singular.
pub const SINGULAR_RTOL: f64 = 1e-14;

const LANCZOS_SEED: u64 = 0x5eed_0f_1a9c;

/// `1/σ_min` of an operator, or a singular flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseNorm {
    pub value: f64,
    pub singular: bool,
}

impl InverseNorm {
    fn from_extremes(smin: f64, smax: f64) -> Self {
        let singular = !(smin >= SINGULAR_RTOL * smax) || smin == 0.0;
        InverseNorm { value: if smin > 0.0 { 1.0 / smin } else { f64::INFINITY }, singular }
    }
}

/// One element of the parity basis.
#[derive(Debug, Clone, Copy)]
enum ParityVec {
    Zero(usize),
    Even(usize, usize),
    Odd(usize, usize),
}

impl ParityVec {
    /// `(mode index, coefficient)` pairs.
    fn entries(self) -> [(usize, f64); 2] {
        match self {
            ParityVec::Zero(i) => [(i, 1.0), (i, 0.0)],
            ParityVec::Even(i, j) => [(i, FRAC_1_SQRT_2), (j, FRAC_1_SQRT_2)],
            ParityVec::Odd(i, j) => [(i, FRAC_1_SQRT_2), (j, -FRAC_1_SQRT_2)],
        }
    }
    fn mode(self) -> usize {
        match self {
            ParityVec::Zero(i) | ParityVec::Even(i, _) | ParityVec::Odd(i, _) => i,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sector {
    /// Parity-basis indices.
    pub members: Vec<usize>,
    /// Positions in `members` carrying a `w` coordinate (`ρ > 0`).
    w_pos: Vec<usize>,
    /// Positions in `members` carrying a `v` coordinate.
    v_pos: Vec<usize>,
    /// `ρ` per member.
    rho: Vec<f64>,
    /// `G` in the parity basis restricted to the members.
    g: Mat<C64>,
    g_diagonal: bool,
}

impl Sector {
    pub fn generator_dim(&self) -> usize {
        self.w_pos.len() + self.v_pos.len()
    }

    /// `𝒜` on this sector, `w` block first.
    pub fn generator_block(&self) -> Mat<C64> {
        let nw = self.w_pos.len();
        let n = nw + self.v_pos.len();
        let mut a = Mat::<C64>::zeros(n, n);
        for (wi, &p) in self.w_pos.iter().enumerate() {
            if let Some(vj) = self.v_pos.iter().position(|&q| q == p) {
                a[(wi, nw + vj)] = C64::new(self.rho[p], 0.0);
                a[(nw + vj, wi)] = C64::new(-self.rho[p], 0.0);
            }
        }
        for (vi, &p) in self.v_pos.iter().enumerate() {
            for (vj, &q) in self.v_pos.iter().enumerate() {
                a[(nw + vi, nw + vj)] = -self.g[(p, q)];
            }
        }
        a
    }

    /// `diag(h²ρ² − 1)·D − ih·G·D` with `D = diag(weight)` over all members.
    fn pencil_block(&self, h: f64, weight: &[f64]) -> Mat<C64> {
        let n = self.members.len();
        Mat::from_fn(n, n, |i, j| {
            let mut z = C64::new(0.0, -h) * self.g[(i, j)];
            if i == j {
                z += h * h * self.rho[i] * self.rho[i] - 1.0;
            }
            z * weight[j]
        })
    }

    /// `P − iλG − λ²` on the `v` coordinates (`P` vanishes on a kept zero mode).
    fn schur_matrix(&self, lambda: f64) -> Mat<C64> {
        let n = self.v_pos.len();
        Mat::from_fn(n, n, |i, j| {
            let (p, q) = (self.v_pos[i], self.v_pos[j]);
            let mut z = C64::new(0.0, -lambda) * self.g[(p, q)];
            if i == j {
                z += self.rho[p] * self.rho[p] - lambda * lambda;
            }
            z
        })
    }

    /// For each `w` position, its index among the `v` coordinates.
    fn w_to_v(&self) -> Vec<usize> {
        self.w_pos
            .iter()
            .map(|p| self.v_pos.iter().position(|q| q == p).expect("nonzero modes keep v"))
            .collect()
    }

    fn g_norm_bound(&self) -> f64 {
        let n = self.g.nrows();
        (0..n)
            .map(|i| (0..n).map(|j| self.g[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// `(𝒜 + iλ)` on one sector, inverted through the Schur complement on `v`.
struct SchurResolvent<'a> {
    sector: &'a Sector,
    lambda: f64,
    lu: DenseLu,
    w_to_v: Vec<usize>,
}

impl InverseOperator for SchurResolvent<'_> {
    fn dim(&self) -> usize {
        self.sector.generator_dim()
    }

    fn solve(&self, x: &mut [C64]) {
        let s = self.sector;
        let nw = s.w_pos.len();
        let il = C64::new(0.0, self.lambda);
        let (f, g) = x.split_at_mut(nw);
        // v = L^{-1}(iλg + Rᵀf)
        let mut v: Vec<C64> = g.iter().map(|gi| il * gi).collect();
        for (wi, &vi) in self.w_to_v.iter().enumerate() {
            v[vi] += s.rho[s.w_pos[wi]] * f[wi];
        }
        self.lu.solve(&mut v);
        for (wi, &vi) in self.w_to_v.iter().enumerate() {
            f[wi] = (f[wi] - s.rho[s.w_pos[wi]] * v[vi]) / il;
        }
        g.copy_from_slice(&v);
    }

    fn solve_adjoint(&self, x: &mut [C64]) {
        let s = self.sector;
        let nw = s.w_pos.len();
        let il = C64::new(0.0, self.lambda);
        let (f, g) = x.split_at_mut(nw);
        // v = L^{-*}(−iλg − Rᵀf)
        let mut v: Vec<C64> = g.iter().map(|gi| -il * gi).collect();
        for (wi, &vi) in self.w_to_v.iter().enumerate() {
            v[vi] -= s.rho[s.w_pos[wi]] * f[wi];
        }
        self.lu.solve_adjoint(&mut v);
        for (wi, &vi) in self.w_to_v.iter().enumerate() {
            f[wi] = -(f[wi] + s.rho[s.w_pos[wi]] * v[vi]) / il;
        }
        g.copy_from_slice(&v);
    }
}

/// Parity basis, sector split and the bookkeeping shared by `𝒜` and `P_h`.
#[derive(Debug)]
pub struct Decomposition {
    basis: Vec<ParityVec>,
    sectors: Vec<Sector>,
    /// Parity index to (sector, position).
    locate: Vec<(usize, usize)>,
    n_modes: usize,
    /// Whether `v` keeps the zero mode.
    keeps_zero_velocity: bool,
    /// Largest coupling ignored by the sector split, absolute.
    pub dropped_coupling: f64,
    pub g_max: f64,
    rho_max: f64,
    g_bound: f64,
}

impl Decomposition {
    pub fn new(model: &SpectralModel, g: &DampingOperator) -> Result<Self> {
        let n = model.len();
        if g.dim() != n {
            return Err(Error::Dimension { expected: n, got: g.dim() });
        }
        let mut basis = Vec::with_capacity(n);
        basis.push(ParityVec::Zero(0));
        let mut seen = vec![false; n];
        seen[0] = true;
        for i in 1..n {
            if seen[i] {
                continue;
            }
            let j = model.mirror(i);
            seen[i] = true;
            seen[j] = true;
            basis.push(ParityVec::Even(i, j));
            basis.push(ParityVec::Odd(i, j));
        }

        // G in the parity basis: G'_{ab} = Σ U_{ia} G_{ij} U_{jb} (U real).
        let entry = |a: ParityVec, b: ParityVec| -> C64 {
            let mut z = ZERO;
            for (i, ci) in a.entries() {
                if ci == 0.0 {
                    continue;
                }
                for (j, cj) in b.entries() {
                    if cj == 0.0 {
                        continue;
                    }
                    z += g.get(i, j) * (ci * cj);
                }
            }
            z
        };

        let g_max = g.max_abs();
        let threshold = COUPLING_DROP * g_max;
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut dropped: f64 = 0.0;
        let mut gp: Option<Mat<C64>> = None;
        if g.is_diagonal() {
            // Only the two members of a parity pair can couple.
            for a in 1..n {
                if let ParityVec::Even(..) = basis[a] {
                    let c = entry(basis[a], basis[a + 1]).norm();
                    if c > threshold {
                        let (ra, rb) = (find(&mut parent, a), find(&mut parent, a + 1));
                        parent[ra] = rb;
                    } else {
                        dropped = dropped.max(c);
                    }
                }
            }
        } else {
            let m = Mat::from_fn(n, n, |a, b| if a <= b { entry(basis[a], basis[b]) } else { ZERO });
            let m = Mat::from_fn(n, n, |a, b| if a <= b { m[(a, b)] } else { m[(b, a)].conj() });
            for a in 0..n {
                for b in a + 1..n {
                    let c = m[(a, b)].norm();
                    if c > threshold {
                        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                        if ra != rb {
                            parent[ra] = rb;
                        }
                    } else {
                        dropped = dropped.max(c);
                    }
                }
            }
            gp = Some(m);
        }

        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut root_slot = vec![usize::MAX; n];
        for a in 0..n {
            let r = find(&mut parent, a);
            if root_slot[r] == usize::MAX {
                root_slot[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[root_slot[r]].push(a);
        }

        let keeps_zero_velocity = (0..n).any(|j| g.get(0, j) != ZERO);
        let eig = model.eigenvalues();
        let mut locate = vec![(0, 0); n];
        let mut sectors = Vec::with_capacity(groups.len());
        for (si, members) in groups.into_iter().enumerate() {
            let rho: Vec<f64> = members.iter().map(|&a| eig[basis[a].mode()].sqrt()).collect();
            let w_pos: Vec<usize> = (0..members.len()).filter(|&p| rho[p] > 0.0).collect();
            let v_pos: Vec<usize> = (0..members.len())
                .filter(|&p| rho[p] > 0.0 || keeps_zero_velocity)
                .collect();
            let gs = Mat::from_fn(members.len(), members.len(), |p, q| match &gp {
                Some(m) => m[(members[p], members[q])],
                None => entry(basis[members[p]], basis[members[q]]),
            });
            for (p, &a) in members.iter().enumerate() {
                locate[a] = (si, p);
            }
            sectors.push(Sector { members, w_pos, v_pos, rho, g: gs, g_diagonal: g.is_diagonal() });
        }
        let g_bound = sectors.iter().map(Sector::g_norm_bound).fold(0.0, f64::max);
        let rho_max = eig.iter().fold(0.0f64, |a, &b| a.max(b)).sqrt();
        Ok(Self {
            basis,
            sectors,
            locate,
            n_modes: n,
            keeps_zero_velocity,
            dropped_coupling: dropped,
            g_max,
            rho_max,
            g_bound,
        })
    }

    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    pub fn largest_sector(&self) -> usize {
        self.sectors.iter().map(|s| s.members.len()).max().unwrap_or(0)
    }
}

/// `𝒜` on the quotient energy space.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    decomposition: Arc<Decomposition>,
    pub claimed_m: MFunction,
    /// Blocks with more rows than this use the iterative path.
    pub svd_max_rows: usize,
    guard: f64,
    frequencies: Vec<f64>,
}

/// Assembles the generator for `model` and damping `g`.
pub fn build_generator(model: &SpectralModel, g: &DampingOperator) -> Result<GeneratorMatrix> {
    Ok(GeneratorMatrix {
        decomposition: Arc::new(Decomposition::new(model, g)?),
        claimed_m: g.claimed_m,
        svd_max_rows: SVD_MAX_ROWS,
        guard: model.guard(),
        frequencies: eigenfrequencies(model),
    })
}

/// Distinct positive `ρ_k`, increasing.
pub fn eigenfrequencies(model: &SpectralModel) -> Vec<f64> {
    let mut f: Vec<f64> = model.eigenvalues().iter().filter(|&&e| e > 0.0).map(|e| e.sqrt()).collect();
    f.sort_by(f64::total_cmp);
    f.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * *b);
    f
}

/// `‖(𝒜 + iλ)^{-1}‖`.
pub fn resolvent_norm_a(gen: &GeneratorMatrix, lambda: f64) -> Result<InverseNorm> {
    gen.resolvent_norm(lambda)
}

/// `‖P_h^{-1}‖` on `H`.
pub fn pencil_inverse_norm(model: &SpectralModel, g: &DampingOperator, h: f64) -> Result<InverseNorm> {
    build_generator(model, g)?.pencil(h)?.inverse_norm()
}

impl GeneratorMatrix {
    pub fn decomposition(&self) -> &Decomposition {
        &self.decomposition
    }

    pub fn with_svd_max_rows(mut self, rows: usize) -> Self {
        self.svd_max_rows = rows;
        self
    }

    /// Size `(M − 1) + M`, or `2(M − 1)` when the zero velocity is quotiented out.
    pub fn dim(&self) -> usize {
        let d = &self.decomposition;
        (d.n_modes - 1) + d.n_modes - usize::from(!d.keeps_zero_velocity)
    }

    /// Largest `λ` the truncation represents faithfully.
    pub fn guard(&self) -> f64 {
        self.guard
    }

    /// Distinct positive eigenfrequencies `ρ_k` of the model.
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn keeps_zero_velocity(&self) -> bool {
        self.decomposition.keeps_zero_velocity
    }

    /// Number of modes of the underlying model.
    pub fn n_modes(&self) -> usize {
        self.decomposition.n_modes
    }

    /// Bound for `‖𝒜‖`.
    pub fn norm_bound(&self) -> f64 {
        self.decomposition.rho_max + self.decomposition.g_bound
    }

    pub fn resolvent_norm(&self, lambda: f64) -> Result<InverseNorm> {
        if !lambda.is_finite() {
            return Err(Error::Argument(format!("λ must be finite, got {lambda}")));
        }
        let mut smin = f64::INFINITY;
        let mut smax: f64 = 0.0;
        for s in &self.decomposition.sectors {
            let n = s.generator_dim();
            if n == 0 {
                continue;
            }
            let (lo, hi) = if n <= self.svd_max_rows || lambda == 0.0 && n <= 4 * self.svd_max_rows {
                let mut a = s.generator_block();
                for i in 0..n {
                    a[(i, i)] += C64::new(0.0, lambda);
                }
                let sv = linalg::singular_values(a.as_ref())?;
                (sv[n - 1], sv[0])
            } else {
                let inv = if lambda == 0.0 {
                    linalg::inverse_norm(&DenseLu::new(s.generator_block().as_ref()), LANCZOS_SEED)
                } else {
                    let resolvent = SchurResolvent {
                        sector: s,
                        lambda,
                        lu: DenseLu::new(s.schur_matrix(lambda).as_ref()),
                        w_to_v: s.w_to_v(),
                    };
                    linalg::inverse_norm(&resolvent, LANCZOS_SEED)
                };
                let lo = if inv.is_finite() && inv > 0.0 { 1.0 / inv } else { 0.0 };
                (lo, self.decomposition.rho_max + s.g_norm_bound() + lambda.abs())
            };
            smin = smin.min(lo);
            smax = smax.max(hi);
        }
        Ok(InverseNorm::from_extremes(smin, smax))
    }

    pub fn pencil(&self, h: f64) -> Result<SemiclassicalPencil> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Argument(format!("h must be positive and finite, got {h}")));
        }
        Ok(SemiclassicalPencil { decomposition: self.decomposition.clone(), h, svd_max_rows: self.svd_max_rows })
    }

    /// Eigenvalues of `𝒜`, sector by sector.
    pub fn spectrum(&self) -> Result<Vec<C64>> {
        let mut out = Vec::with_capacity(self.dim());
        for s in &self.decomposition.sectors {
            if s.generator_dim() == 0 {
                continue;
            }
            out.extend(linalg::eigenvalues(s.generator_block().as_ref())?);
        }
        Ok(out)
    }

    /// `max Re σ(𝒜)`.
    pub fn spectral_abscissa(&self) -> Result<f64> {
        Ok(self.spectrum()?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
    }

    /// Sector blocks of `𝒜`.
    pub fn blocks(&self) -> Vec<Mat<C64>> {
        self.decomposition.sectors.iter().map(Sector::generator_block).collect()
    }

    /// Mode-coordinate layout: `w` over modes `1..M`, then `v` over modes
    /// `0..M` (or `1..M` without zero velocity).
    fn v_offset(&self) -> usize {
        self.decomposition.n_modes - 1
    }

    fn v_mode_slot(&self, mode: usize) -> Option<usize> {
        if self.decomposition.keeps_zero_velocity {
            Some(self.v_offset() + mode)
        } else if mode == 0 {
            None
        } else {
            Some(self.v_offset() + mode - 1)
        }
    }

    /// Splits a mode-coordinate state into per-sector parity coordinates.
    pub fn to_sectors(&self, z: &[C64]) -> Result<Vec<Vec<C64>>> {
        if z.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: z.len() });
        }
        let d = &self.decomposition;
        let mut out: Vec<Vec<C64>> = d.sectors.iter().map(|s| vec![ZERO; s.generator_dim()]).collect();
        for (si, s) in d.sectors.iter().enumerate() {
            let nw = s.w_pos.len();
            for (wi, &p) in s.w_pos.iter().enumerate() {
                let b = d.basis[s.members[p]];
                out[si][wi] = b
                    .entries()
                    .iter()
                    .filter(|(_, c)| *c != 0.0)
                    .map(|&(i, c)| z[i - 1] * c)
                    .sum();
            }
            for (vi, &p) in s.v_pos.iter().enumerate() {
                let b = d.basis[s.members[p]];
                out[si][nw + vi] = b
                    .entries()
                    .iter()
                    .filter(|(_, c)| *c != 0.0)
                    .map(|&(i, c)| z[self.v_mode_slot(i).expect("kept")] * c)
                    .sum();
            }
        }
        Ok(out)
    }

    /// Inverse of [`Self::to_sectors`].
    pub fn from_sectors(&self, parts: &[Vec<C64>]) -> Vec<C64> {
        let d = &self.decomposition;
        let mut z = vec![ZERO; self.dim()];
        for (si, s) in d.sectors.iter().enumerate() {
            let nw = s.w_pos.len();
            for (wi, &p) in s.w_pos.iter().enumerate() {
                for (i, c) in d.basis[s.members[p]].entries() {
                    if c != 0.0 {
                        z[i - 1] += parts[si][wi] * c;
                    }
                }
            }
            for (vi, &p) in s.v_pos.iter().enumerate() {
                for (i, c) in d.basis[s.members[p]].entries() {
                    if c != 0.0 {
                        z[self.v_mode_slot(i).expect("kept")] += parts[si][nw + vi] * c;
                    }
                }
            }
        }
        z
    }

    /// `𝒜` as a dense matrix in mode coordinates.
    pub fn dense(&self) -> Mat<C64> {
        let n = self.dim();
        let mut out = Mat::<C64>::zeros(n, n);
        let mut unit = vec![ZERO; n];
        for j in 0..n {
            unit.fill(ZERO);
            unit[j] = C64::new(1.0, 0.0);
            let col = self.apply(&unit).expect("dimension matches");
            for i in 0..n {
                out[(i, j)] = col[i];
            }
        }
        out
    }

    /// `𝒜z` in mode coordinates.
    pub fn apply(&self, z: &[C64]) -> Result<Vec<C64>> {
        let parts = self.to_sectors(z)?;
        let out: Vec<Vec<C64>> = self
            .decomposition
            .sectors
            .iter()
            .zip(&parts)
            .map(|(s, x)| {
                let a = s.generator_block();
                let mut y = vec![ZERO; x.len()];
                linalg::matvec(a.as_ref(), x, &mut y);
                y
            })
            .collect();
        Ok(self.from_sectors(&out))
    }

    /// Solves `𝒜x = y` in mode coordinates.
    pub fn solve(&self, y: &[C64]) -> Result<Vec<C64>> {
        let parts = self.to_sectors(y)?;
        let mut out = Vec::with_capacity(parts.len());
        for (s, mut x) in self.decomposition.sectors.iter().zip(parts) {
            if !x.is_empty() {
                DenseLu::new(s.generator_block().as_ref()).solve(&mut x);
                if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::Linalg("generator is singular".into()));
                }
            }
            out.push(x);
        }
        Ok(self.from_sectors(&out))
    }

    /// Parity index and sign structure of the mode `i`, for callers that need
    /// to locate peaks by sector.
    pub fn sector_of_mode(&self, mode: usize) -> usize {
        let d = &self.decomposition;
        let a = d
            .basis
            .iter()
            .position(|b| b.entries().iter().any(|&(i, c)| i == mode && c != 0.0))
            .expect("every mode is in the basis");
        d.locate[a].0
    }
}

/// `P_h = h²P − ihG − I` on all modes.
#[derive(Debug, Clone)]
pub struct SemiclassicalPencil {
    decomposition: Arc<Decomposition>,
    pub h: f64,
    svd_max_rows: usize,
}

impl SemiclassicalPencil {
    /// `‖P_h^{-1}‖_{L(H)}`.
    pub fn inverse_norm(&self) -> Result<InverseNorm> {
        self.weighted_inverse_norm(0.0)
    }

    /// `‖Λ_h^{s} P_h^{-1}‖_{L(H)}`, i.e. the inverse norm measured into `H_s^h`.
    pub fn weighted_inverse_norm(&self, s: f64) -> Result<InverseNorm> {
        let h = self.h;
        let mut smin = f64::INFINITY;
        let mut smax: f64 = 0.0;
        for sec in &self.decomposition.sectors {
            let n = sec.members.len();
            let weight: Vec<f64> = sec.rho.iter().map(|r| (1.0 + h * h * r * r).powf(-s)).collect();
            let b = sec.pencil_block(h, &weight);
            let (lo, hi) = if n <= self.svd_max_rows || sec.g_diagonal && n <= 2 {
                let sv = linalg::singular_values(b.as_ref())?;
                (sv[n - 1], sv[0])
            } else {
                let inv = linalg::inverse_norm(&DenseLu::new(b.as_ref()), LANCZOS_SEED);
                let lo = if inv.is_finite() && inv > 0.0 { 1.0 / inv } else { 0.0 };
                let wmax = weight.iter().fold(0.0f64, |a, &b| a.max(b));
                let rmax = sec.rho.iter().fold(0.0f64, |a, &b| a.max(b));
                (lo, (h * h * rmax * rmax + 1.0 + h * sec.g_norm_bound()) * wmax)
            };
            smin = smin.min(lo);
            smax = smax.max(hi);
        }
        Ok(InverseNorm::from_extremes(smin, smax))
    }

    /// `P_h` as a dense matrix over the modes.
    pub fn dense(&self, g: &DampingOperator, model: &SpectralModel) -> Mat<C64> {
        let h = self.h;
        let eig = model.eigenvalues();
        Mat::from_fn(model.len(), model.len(), |i, j| {
            let mut z = -I * h * g.get(i, j);
            if i == j {
                z += h * h * eig[i] - 1.0;
            }
            z
        })
    }
}
