//! Damping operators `G = Q*Q` assembled as Hermitian matrices over the modes.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, C64, ZERO};
use crate::quadrature;
use crate::spectral::{k_to_lattice, lattice_to_k, OperatorKind, SpectralModel};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type FieldFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type SymbolFn = Arc<dyn Fn(&[i32]) -> f64 + Send + Sync>;

/// Absolute tolerance for quadrature-computed Fourier coefficients.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// A real coefficient field on the torus.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    /// `mean + amplitude·cos(π n x_1)`.
    Cosine { mean: f64, amplitude: f64, wavenumber: i32 },
    /// `|x|^exponent`, Euclidean norm on `[-1,1]^d`.
    AbsPower { exponent: f64 },
    /// Arbitrary field. Non-smooth fields are integrated by quadrature,
    /// split at `breaks` along every axis.
    Custom { label: String, f: FieldFn, smooth: bool, breaks: Vec<f64> },
}

impl Coefficient {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Cosine { mean, amplitude, wavenumber } => {
                mean + amplitude * (PI * *wavenumber as f64 * x[0]).cos()
            }
            Coefficient::AbsPower { exponent } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                r.powf(*exponent)
            }
            Coefficient::Custom { f, .. } => f(x),
        }
    }

    /// Even in every coordinate, so its Fourier coefficients are real and even.
    pub fn is_even(&self) -> bool {
        match self {
            Coefficient::Constant(_) | Coefficient::Cosine { .. } | Coefficient::AbsPower { .. } => true,
            Coefficient::Custom { .. } => false,
        }
    }

    /// Lower bound of the field, exact where a closed form exists.
    pub fn infimum(&self, model: &SpectralModel) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Cosine { mean, amplitude, .. } => mean - amplitude.abs(),
            Coefficient::AbsPower { exponent } => {
                if *exponent == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Coefficient::Custom { .. } => grid_samples(self, model).into_iter().fold(f64::INFINITY, f64::min),
        }
    }

    fn scaled(&self, factor: f64) -> Coefficient {
        match self {
            Coefficient::Constant(c) => Coefficient::Constant(c * factor),
            Coefficient::Cosine { mean, amplitude, wavenumber } => Coefficient::Cosine {
                mean: mean * factor,
                amplitude: amplitude * factor,
                wavenumber: *wavenumber,
            },
            other => {
                let inner = other.clone();
                let smooth = !matches!(other, Coefficient::AbsPower { .. })
                    && !matches!(other, Coefficient::Custom { smooth: false, .. });
                let breaks = match other {
                    Coefficient::AbsPower { .. } => vec![0.0],
                    Coefficient::Custom { breaks, .. } => breaks.clone(),
                    _ => Vec::new(),
                };
                Coefficient::Custom {
                    label: format!("{factor}*{other}"),
                    f: Arc::new(move |x| factor * inner.eval(x)),
                    smooth,
                    breaks,
                }
            }
        }
    }

    /// `self · factor` as a new coefficient.
    pub fn times(&self, factor: f64) -> Coefficient {
        self.scaled(factor)
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "{c}"),
            Coefficient::Cosine { mean, amplitude, wavenumber } => {
                write!(f, "{mean}+{amplitude}cos({wavenumber}πx)")
            }
            Coefficient::AbsPower { exponent } => write!(f, "|x|^{exponent}"),
            Coefficient::Custom { label, .. } => f.write_str(label),
        }
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Coefficient({self})")
    }
}

/// Diagonal symbol on the mode lattice.
#[derive(Clone)]
pub enum Symbol {
    /// `(1 + Σ w_i (πk_i)²)^exponent`.
    Anisotropic { weights: Vec<f64>, exponent: f64 },
    Custom { label: String, q: SymbolFn },
}

impl Symbol {
    pub fn eval(&self, k: &[i32]) -> f64 {
        match self {
            Symbol::Anisotropic { weights, exponent } => {
                let s: f64 = k
                    .iter()
                    .zip(weights.iter().chain(std::iter::repeat(&1.0)))
                    .map(|(&ki, w)| w * (PI * ki as f64).powi(2))
                    .sum();
                (1.0 + s).powf(*exponent)
            }
            Symbol::Custom { q, .. } => q(k),
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Anisotropic { weights, exponent } => write!(f, "(1+Σw·(πk)²)^{exponent}, w={weights:?}"),
            Symbol::Custom { label, .. } => f.write_str(label),
        }
    }
}

/// Function of `P` with a label for reports.
#[derive(Clone)]
pub struct BorelFn {
    pub label: String,
    pub f: ScalarFn,
}

impl BorelFn {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { label: label.into(), f: Arc::new(f) }
    }
    pub fn zero() -> Self {
        Self::new("0", |_| 0.0)
    }
    pub fn constant(c: f64) -> Self {
        Self::new(format!("{c}"), move |_| c)
    }
}

#[derive(Clone)]
pub enum DampingSpec {
    FunctionalCalculus(BorelFn),
    Multiplication(Coefficient),
    /// `Δ^{1/4} a Δ^{1/4}`; needs a half-Laplacian model.
    WaterWave(Coefficient),
    /// `∇* b ∇`.
    KelvinVoigt(Coefficient),
    /// `W_s a W_s` with `W_s = (1+ρ⁴)^{s/2}`.
    FourierWeight { order: f64, coefficient: Coefficient },
    FourierMultiplier(Symbol),
}

impl DampingSpec {
    pub fn zero() -> Self {
        DampingSpec::FunctionalCalculus(BorelFn::zero())
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            DampingSpec::FunctionalCalculus(_) => "functional-calculus",
            DampingSpec::Multiplication(_) => "multiplication",
            DampingSpec::WaterWave(_) => "water-wave",
            DampingSpec::KelvinVoigt(_) => "kelvin-voigt",
            DampingSpec::FourierWeight { .. } => "fourier-weight",
            DampingSpec::FourierMultiplier(_) => "fourier-multiplier",
        }
    }

    /// Whether assembly produces a dense matrix rather than a diagonal.
    pub fn assembles_dense(&self) -> bool {
        let varying = |a: &Coefficient| !matches!(a, Coefficient::Constant(_));
        match self {
            DampingSpec::FunctionalCalculus(_) | DampingSpec::FourierMultiplier(_) => false,
            DampingSpec::Multiplication(a) | DampingSpec::WaterWave(a) | DampingSpec::KelvinVoigt(a) => varying(a),
            DampingSpec::FourierWeight { coefficient, .. } => varying(coefficient),
        }
    }

    /// `c·G` for the same family.
    pub fn scaled(&self, c: f64) -> DampingSpec {
        match self {
            DampingSpec::FunctionalCalculus(b) => {
                let f = b.f.clone();
                DampingSpec::FunctionalCalculus(BorelFn::new(format!("{c}*({})", b.label), move |x| c * f(x)))
            }
            DampingSpec::Multiplication(a) => DampingSpec::Multiplication(a.times(c)),
            DampingSpec::WaterWave(a) => DampingSpec::WaterWave(a.times(c)),
            DampingSpec::KelvinVoigt(a) => DampingSpec::KelvinVoigt(a.times(c)),
            DampingSpec::FourierWeight { order, coefficient } => DampingSpec::FourierWeight {
                order: *order,
                coefficient: coefficient.times(c),
            },
            DampingSpec::FourierMultiplier(q) => {
                let q = q.clone();
                DampingSpec::FourierMultiplier(Symbol::Custom {
                    label: format!("{c}*({q})"),
                    q: Arc::new(move |k| c * q.eval(k)),
                })
            }
        }
    }
}

impl fmt::Display for DampingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DampingSpec::FunctionalCalculus(b) => write!(f, "functional-calculus(f={})", b.label),
            DampingSpec::Multiplication(a) => write!(f, "multiplication(a={a})"),
            DampingSpec::WaterWave(a) => write!(f, "water-wave(a={a})"),
            DampingSpec::KelvinVoigt(b) => write!(f, "kelvin-voigt(b={b})"),
            DampingSpec::FourierWeight { order, coefficient } => {
                write!(f, "fourier-weight(s={order}, a={coefficient})")
            }
            DampingSpec::FourierMultiplier(q) => write!(f, "fourier-multiplier(q={q})"),
        }
    }
}

impl fmt::Debug for DampingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DampingSpec({self})")
    }
}

/// A positive frequency function `m(λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum MFunction {
    Constant { value: f64 },
    /// `coeff · λ^exponent`.
    Power { coeff: f64, exponent: f64 },
}

impl MFunction {
    pub const ONE: MFunction = MFunction::Constant { value: 1.0 };

    pub fn power(exponent: f64) -> Self {
        MFunction::Power { coeff: 1.0, exponent }
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        match *self {
            MFunction::Constant { value } => value,
            MFunction::Power { coeff, exponent } => coeff * lambda.abs().powf(exponent),
        }
    }

    /// Large-λ exponent of `m`.
    pub fn exponent(&self) -> f64 {
        match *self {
            MFunction::Constant { .. } => 0.0,
            MFunction::Power { exponent, .. } => exponent,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        match *self {
            MFunction::Constant { value } => MFunction::Constant { value: value * c },
            MFunction::Power { coeff, exponent } => MFunction::Power { coeff: coeff * c, exponent },
        }
    }

    /// Exponent of the resolvent bound `max{1/m(λ), 1}`.
    pub fn resolvent_exponent(&self) -> f64 {
        (-self.exponent()).max(0.0)
    }
}

impl fmt::Display for MFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            MFunction::Constant { value } => write!(f, "{value}"),
            MFunction::Power { coeff, exponent } if coeff == 1.0 => write!(f, "λ^{exponent}"),
            MFunction::Power { coeff, exponent } => write!(f, "{coeff}·λ^{exponent}"),
        }
    }
}

#[derive(Clone)]
pub enum Storage {
    Diagonal(Vec<f64>),
    Dense(Mat<C64>),
}

#[derive(Clone)]
pub struct DampingOperator {
    storage: Storage,
    pub spec: DampingSpec,
    pub claimed_m: MFunction,
}

impl fmt::Debug for DampingOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DampingOperator")
            .field("dim", &self.dim())
            .field("diagonal", &self.is_diagonal())
            .field("spec", &self.spec)
            .field("claimed_m", &self.claimed_m)
            .finish()
    }
}

impl DampingOperator {
    pub fn from_diagonal(diag: Vec<f64>, spec: DampingSpec, claimed_m: MFunction) -> Self {
        Self { storage: Storage::Diagonal(diag), spec, claimed_m }
    }

    pub fn from_dense(matrix: Mat<C64>, spec: DampingSpec, claimed_m: MFunction) -> Self {
        Self { storage: Storage::Dense(matrix), spec, claimed_m }
    }

    pub fn with_claimed_m(mut self, m: MFunction) -> Self {
        self.claimed_m = m;
        self
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn dim(&self) -> usize {
        match &self.storage {
            Storage::Diagonal(d) => d.len(),
            Storage::Dense(m) => m.nrows(),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.storage, Storage::Diagonal(_))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        match &self.storage {
            Storage::Diagonal(d) => {
                if i == j {
                    C64::new(d[i], 0.0)
                } else {
                    ZERO
                }
            }
            Storage::Dense(m) => m[(i, j)],
        }
    }

    pub fn dense(&self) -> Mat<C64> {
        match &self.storage {
            Storage::Diagonal(d) => Mat::from_fn(d.len(), d.len(), |i, j| if i == j { C64::new(d[i], 0.0) } else { ZERO }),
            Storage::Dense(m) => m.clone(),
        }
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Mat<C64> {
        Mat::from_fn(rows.len(), cols.len(), |a, b| self.get(rows[a], cols[b]))
    }

    /// `y = G x`.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        match &self.storage {
            Storage::Diagonal(d) => {
                for ((yi, xi), di) in y.iter_mut().zip(x).zip(d) {
                    *yi = xi * di;
                }
            }
            Storage::Dense(m) => linalg::matvec(m.as_ref(), x, y),
        }
    }

    /// `⟨Gx, x⟩`.
    pub fn quadratic_form(&self, x: &[C64]) -> f64 {
        let mut y = vec![ZERO; x.len()];
        self.apply(x, &mut y);
        linalg::dot(x, &y).re
    }

    /// Max relative deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        match &self.storage {
            Storage::Diagonal(_) => 0.0,
            Storage::Dense(m) => {
                let n = m.nrows();
                let scale = m.norm_max().max(f64::MIN_POSITIVE);
                let mut worst: f64 = 0.0;
                for j in 0..n {
                    for i in 0..=j {
                        worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
                    }
                }
                worst / scale
            }
        }
    }

    /// Smallest and largest eigenvalues.
    pub fn eigen_range(&self) -> Result<(f64, f64)> {
        match &self.storage {
            Storage::Diagonal(d) => Ok((
                d.iter().copied().fold(f64::INFINITY, f64::min),
                d.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )),
            Storage::Dense(m) => {
                let e = linalg::hermitian_eigenvalues(m.as_ref())?;
                Ok((e[0], e[e.len() - 1]))
            }
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        match &self.storage {
            Storage::Diagonal(d) => d.iter().fold(0.0, |a, b| a.max(b.abs())),
            Storage::Dense(m) => m.norm_max(),
        }
    }
}

/// Samples of `a` on the model's grid, first coordinate outermost.
pub fn grid_samples(a: &Coefficient, model: &SpectralModel) -> Vec<f64> {
    let nodes = model.grid_nodes();
    match model.dimension() {
        1 => nodes.iter().map(|&x| a.eval(&[x])).collect(),
        _ => nodes
            .iter()
            .flat_map(|&x| nodes.iter().map(move |&y| (x, y)))
            .map(|(x, y)| a.eval(&[x, y]))
            .collect(),
    }
}

fn check_nonnegative(what: &str, values: impl IntoIterator<Item = f64>) -> Result<()> {
    let v: Vec<f64> = values.into_iter().collect();
    let scale = v.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1.0);
    if let Some(bad) = v.iter().find(|x| !x.is_finite() || **x < -1e-12 * scale) {
        return Err(Error::Spec(format!("{what} must be nonnegative and finite, found {bad}")));
    }
    Ok(())
}

/// Fourier coefficients `â(n) = 2^{-d}∫ a e^{-iπn·x}` on the lattice `|n_i| ≤ 2K`.
pub struct CoefficientLattice {
    kmax: i32,
    dim: usize,
    values: Vec<C64>,
}

impl CoefficientLattice {
    pub fn get(&self, n: &[i32]) -> C64 {
        self.values[k_to_lattice(n, (2 * self.kmax + 1) as usize, self.kmax)]
    }
}

/// Whether `n` is the representative of `{n, -n}` (first nonzero entry positive, or zero).
fn is_canonical(n: &[i32]) -> bool {
    n.iter().find(|&&x| x != 0).is_none_or(|&x| x > 0)
}

pub fn fourier_coefficients(a: &Coefficient, model: &SpectralModel) -> Result<CoefficientLattice> {
    let d = model.dimension();
    let kmax = 2 * model.cutoff() as i32;
    let side = (2 * kmax + 1) as usize;
    let count = side.pow(d as u32);
    let mut values = vec![ZERO; count];
    match a {
        Coefficient::Constant(c) => {
            values[k_to_lattice(&vec![0; d], side, kmax)] = C64::new(*c, 0.0);
        }
        Coefficient::Cosine { mean, amplitude, wavenumber } => {
            values[k_to_lattice(&vec![0; d], side, kmax)] += C64::new(*mean, 0.0);
            if *wavenumber != 0 && wavenumber.abs() <= kmax {
                for sign in [-1, 1] {
                    let mut n = vec![0; d];
                    n[0] = sign * wavenumber;
                    values[k_to_lattice(&n, side, kmax)] += C64::new(0.5 * amplitude, 0.0);
                }
            } else if *wavenumber == 0 {
                values[k_to_lattice(&vec![0; d], side, kmax)] += C64::new(*amplitude, 0.0);
            }
        }
        Coefficient::Custom { smooth: true, .. } => {
            values = model.grid_fourier_coefficients(&grid_samples(a, model))?;
        }
        Coefficient::AbsPower { .. } | Coefficient::Custom { smooth: false, .. } => {
            let breaks = match a {
                Coefficient::Custom { breaks, .. } => breaks.clone(),
                _ => vec![0.0],
            };
            let canon: Vec<usize> = (0..count)
                .filter(|&p| is_canonical(&lattice_to_k(p, d, side, kmax)))
                .collect();
            let computed: Vec<(usize, C64)> = canon
                .par_iter()
                .map(|&p| {
                    let n = lattice_to_k(p, d, side, kmax);
                    (p, quadrature_coefficient(a, &n, &breaks, QUADRATURE_TOL))
                })
                .collect();
            for (p, v) in computed {
                values[p] = v;
            }
        }
    }
    // Real field: â(-n) = conj â(n), enforced exactly.
    if a.is_even() {
        values.iter_mut().for_each(|v| v.im = 0.0);
    }
    for p in 0..count {
        let n = lattice_to_k(p, d, side, kmax);
        if !is_canonical(&n) {
            let neg: Vec<i32> = n.iter().map(|x| -x).collect();
            values[p] = values[k_to_lattice(&neg, side, kmax)].conj();
        } else if n.iter().all(|&x| x == 0) {
            values[p].im = 0.0;
        }
    }
    Ok(CoefficientLattice { kmax, dim: d, values })
}

/// `2^{-d}∫ a e^{-iπn·x}` by adaptive quadrature. Even fields only integrate
/// the cosine part over the positive half of each axis.
pub fn quadrature_coefficient(a: &Coefficient, n: &[i32], breaks: &[f64], tol: f64) -> C64 {
    let panel = |m: i32| (1.0 / (m.unsigned_abs().max(1) as f64)).min(0.25);
    let even = a.is_even();
    let (lo, scale) = if even { (0.0, 2.0) } else { (-1.0, 1.0) };
    let phase = |k: f64, x: f64| {
        if even {
            C64::new((PI * k * x).cos(), 0.0)
        } else {
            C64::from_polar(1.0, -PI * k * x)
        }
    };
    match n.len() {
        1 => {
            let k = n[0] as f64;
            let v = quadrature::integrate_panels(
                |x| phase(k, x) * a.eval(&[x]),
                lo,
                1.0,
                breaks,
                panel(n[0]),
                2.0 * tol / scale,
            );
            v * (0.5 * scale)
        }
        _ => {
            let (k1, k2) = (n[0] as f64, n[1] as f64);
            let v = quadrature::integrate_panels(
                |x| {
                    let row = quadrature::integrate_panels(
                        |y| phase(k2, y) * a.eval(&[x, y]),
                        lo,
                        1.0,
                        breaks,
                        panel(n[1]),
                        tol / scale,
                    );
                    row * phase(k1, x)
                },
                lo,
                1.0,
                breaks,
                panel(n[0]),
                4.0 * tol / (scale * scale),
            );
            v * (0.25 * scale * scale)
        }
    }
}

/// Matrix of `M_a`: `G_{jk} = â(k_j − k_k)`.
fn multiplication_matrix(lat: &CoefficientLattice, model: &SpectralModel, weight: impl Fn(usize, usize) -> f64 + Sync) -> Mat<C64> {
    let n = model.len();
    let d = lat.dim;
    let mut diff = vec![0i32; d];
    Mat::from_fn(n, n, |i, j| {
        let (ki, kj) = (model.mode(i), model.mode(j));
        for t in 0..d {
            diff[t] = ki[t] - kj[t];
        }
        lat.get(&diff) * weight(i, j)
    })
}

/// Builds `G` for `spec` on `model`.
pub fn assemble(spec: &DampingSpec, model: &SpectralModel) -> Result<DampingOperator> {
    let eig = model.eigenvalues();
    let n = model.len();
    let check_field = |what: &str, a: &Coefficient| check_nonnegative(what, grid_samples(a, model));

    let op = match spec {
        DampingSpec::FunctionalCalculus(b) => {
            let diag: Vec<f64> = eig.iter().map(|&x| (b.f)(x)).collect();
            check_nonnegative("f", diag.iter().copied())?;
            let m = if diag.iter().all(|&x| x == 0.0) { MFunction::ONE } else { functional_m(&diag, eig) };
            DampingOperator::from_diagonal(diag, spec.clone(), m)
        }
        DampingSpec::FourierMultiplier(q) => {
            let diag: Vec<f64> = (0..n).map(|i| q.eval(model.mode(i))).collect();
            check_nonnegative("q", diag.iter().copied())?;
            let m = match q {
                Symbol::Anisotropic { exponent, .. } => MFunction::power(2.0 * exponent),
                Symbol::Custom { .. } => functional_m(&diag, eig),
            };
            DampingOperator::from_diagonal(diag, spec.clone(), m)
        }
        DampingSpec::Multiplication(a) => {
            check_field("a", a)?;
            let m = MFunction::ONE;
            match a {
                Coefficient::Constant(c) => DampingOperator::from_diagonal(vec![*c; n], spec.clone(), m),
                _ => {
                    let lat = fourier_coefficients(a, model)?;
                    DampingOperator::from_dense(multiplication_matrix(&lat, model, |_, _| 1.0), spec.clone(), m)
                }
            }
        }
        DampingSpec::WaterWave(a) => {
            if model.kind() != OperatorKind::HalfLaplacian {
                return Err(Error::Config(format!(
                    "water-wave damping needs a half-laplacian model, got {}",
                    model.kind()
                )));
            }
            check_field("a", a)?;
            // Δ^{1/4} eigenvalue |πk|^{1/2} = ρ_k for P = Δ^{1/2}.
            let root: Vec<f64> = eig.iter().map(|x| x.sqrt()).collect();
            let m = water_m(a);
            match a {
                Coefficient::Constant(c) => {
                    DampingOperator::from_diagonal(eig.iter().map(|x| c * x).collect(), spec.clone(), m)
                }
                _ => {
                    let lat = fourier_coefficients(a, model)?;
                    let g = multiplication_matrix(&lat, model, |i, j| root[i] * root[j]);
                    DampingOperator::from_dense(g, spec.clone(), m)
                }
            }
        }
        DampingSpec::KelvinVoigt(b) => {
            check_field("b", b)?;
            let m = MFunction::power(2.0);
            let grad = |i: usize, j: usize| -> f64 {
                let (ki, kj) = (model.mode(i), model.mode(j));
                PI * PI * ki.iter().zip(kj).map(|(&x, &y)| (x * y) as f64).sum::<f64>()
            };
            match b {
                Coefficient::Constant(c) => {
                    DampingOperator::from_diagonal((0..n).map(|i| c * grad(i, i)).collect(), spec.clone(), m)
                }
                _ => {
                    let lat = fourier_coefficients(b, model)?;
                    DampingOperator::from_dense(multiplication_matrix(&lat, model, grad), spec.clone(), m)
                }
            }
        }
        DampingSpec::FourierWeight { order, coefficient } => {
            check_field("a", coefficient)?;
            let w: Vec<f64> = eig.iter().map(|x| (1.0 + x * x).powf(0.5 * order)).collect();
            let m = MFunction::power(4.0 * order);
            match coefficient {
                Coefficient::Constant(c) => {
                    DampingOperator::from_diagonal(w.iter().map(|x| c * x * x).collect(), spec.clone(), m)
                }
                _ => {
                    let lat = fourier_coefficients(coefficient, model)?;
                    let g = multiplication_matrix(&lat, model, |i, j| w[i] * w[j]);
                    DampingOperator::from_dense(g, spec.clone(), m)
                }
            }
        }
    };
    Ok(op)
}

/// `m` for water-wave damping: constant when `a` is bounded below, and
/// `λ^{1-d/p}` in the limit `p → d/exponent` for `a = |x|^exponent`.
fn water_m(a: &Coefficient) -> MFunction {
    match a {
        Coefficient::AbsPower { exponent } if *exponent > 0.0 => MFunction::power(1.0 - exponent),
        _ => MFunction::ONE,
    }
}

/// Best power law through a diagonal `f(ρ²)` at the two largest eigenvalues.
fn functional_m(diag: &[f64], eig: &[f64]) -> MFunction {
    let n = diag.len();
    if n < 3 || diag[n - 1] <= 0.0 || diag[n / 2] <= 0.0 {
        return MFunction::ONE;
    }
    let (l1, l2) = (eig[n / 2].sqrt(), eig[n - 1].sqrt());
    let e = (diag[n - 1] / diag[n / 2]).ln() / (l2 / l1).ln();
    if e.abs() < 1e-9 {
        MFunction::Constant { value: diag[n - 1] }
    } else {
        MFunction::power(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lap1(k: usize) -> SpectralModel {
        SpectralModel::new(1, k, OperatorKind::Laplacian, 4).unwrap()
    }

    fn half1(k: usize) -> SpectralModel {
        SpectralModel::new(1, k, OperatorKind::HalfLaplacian, 4).unwrap()
    }

    #[test]
    fn constant_multiplication_is_identity() {
        let m = lap1(6);
        let g = assemble(&DampingSpec::Multiplication(Coefficient::Constant(1.0)), &m).unwrap();
        let dense = g.dense();
        for i in 0..m.len() {
            for j in 0..m.len() {
                assert_eq!(dense[(i, j)], if i == j { C64::new(1.0, 0.0) } else { ZERO });
            }
        }
        assert_eq!(g.claimed_m, MFunction::ONE);
    }

    #[test]
    fn cosine_multiplication() {
        let m = lap1(5);
        let a = Coefficient::Cosine { mean: 1.0, amplitude: 1.0, wavenumber: 1 };
        let g = assemble(&DampingSpec::Multiplication(a.clone()), &m).unwrap();
        // same matrix through the grid path
        let smooth = Coefficient::Custom {
            label: "1+cos".into(),
            f: Arc::new(|x| 1.0 + (PI * x[0]).cos()),
            smooth: true,
            breaks: vec![],
        };
        let g2 = assemble(&DampingSpec::Multiplication(smooth), &m).unwrap();
        for i in 0..m.len() {
            for j in 0..m.len() {
                let dk = (m.mode(i)[0] - m.mode(j)[0]).abs();
                let want = match dk {
                    0 => 1.0,
                    1 => 0.5,
                    _ => 0.0,
                };
                assert_eq!(g.get(i, j), C64::new(want, 0.0));
                assert!((g2.get(i, j) - C64::new(want, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn water_constant_equals_p() {
        let m = half1(8);
        let g = assemble(&DampingSpec::WaterWave(Coefficient::Constant(1.0)), &m).unwrap();
        for i in 0..m.len() {
            assert!((g.get(i, i).re - m.eigenvalues()[i]).abs() < 1e-14);
        }
        assert_eq!(g.claimed_m, MFunction::ONE);
        let err = assemble(&DampingSpec::WaterWave(Coefficient::Constant(1.0)), &lap1(3)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn water_dense_path_matches_diagonal() {
        let m = half1(6);
        let flat = Coefficient::Custom { label: "one".into(), f: Arc::new(|_| 1.0), smooth: false, breaks: vec![0.0] };
        let g = assemble(&DampingSpec::WaterWave(flat), &m).unwrap();
        for i in 0..m.len() {
            for j in 0..m.len() {
                let want = if i == j { m.eigenvalues()[i] } else { 0.0 };
                assert!((g.get(i, j) - C64::new(want, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn kelvin_voigt_constant_is_scaled_laplacian() {
        let m = lap1(7);
        let g = assemble(&DampingSpec::KelvinVoigt(Coefficient::Constant(2.0)), &m).unwrap();
        for i in 0..m.len() {
            assert!((g.get(i, i).re - 2.0 * m.eigenvalues()[i]).abs() < 1e-12);
        }
        assert_eq!(g.claimed_m, MFunction::power(2.0));
    }

    #[test]
    fn negative_coefficients_rejected() {
        let m = lap1(3);
        let bad = Coefficient::Cosine { mean: 0.5, amplitude: 1.0, wavenumber: 1 };
        assert!(matches!(assemble(&DampingSpec::Multiplication(bad), &m), Err(Error::Spec(_))));
        let f = BorelFn::new("-1", |_| -1.0);
        assert!(matches!(assemble(&DampingSpec::FunctionalCalculus(f), &m), Err(Error::Spec(_))));
    }

    #[test]
    fn claimed_m_values() {
        let m = half1(4);
        let g = assemble(&DampingSpec::WaterWave(Coefficient::AbsPower { exponent: 0.5 }), &m).unwrap();
        assert_eq!(g.claimed_m, MFunction::power(0.5));
        let l = lap1(4);
        let g = assemble(
            &DampingSpec::FourierWeight { order: -0.25, coefficient: Coefficient::Constant(1.0) },
            &l,
        )
        .unwrap();
        assert_eq!(g.claimed_m, MFunction::power(-1.0));
        assert_eq!(g.claimed_m.resolvent_exponent(), 1.0);
    }

    #[test]
    fn two_dimensional_cosine() {
        let m = SpectralModel::new(2, 3, OperatorKind::Laplacian, 2).unwrap();
        let a = Coefficient::Cosine { mean: 2.0, amplitude: 1.0, wavenumber: 2 };
        let g = assemble(&DampingSpec::Multiplication(a), &m).unwrap();
        for i in 0..m.len() {
            for j in 0..m.len() {
                let (ki, kj) = (m.mode(i), m.mode(j));
                let want = if ki == kj {
                    2.0
                } else if ki[1] == kj[1] && (ki[0] - kj[0]).abs() == 2 {
                    0.5
                } else {
                    0.0
                };
                assert_eq!(g.get(i, j).re, want);
            }
        }
    }

    #[test]
    fn deterministic_assembly() {
        let m = half1(16);
        let spec = DampingSpec::WaterWave(Coefficient::AbsPower { exponent: 0.5 });
        let a = assemble(&spec, &m).unwrap().dense();
        let b = assemble(&spec, &m).unwrap().dense();
        assert!(a == b);
    }
}
