//! Dense kernels on top of faer: spectra, the matrix exponential, and
//! inverse norms by Lanczos on `B^{-1} B^{-*}`.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Mat, MatMut, MatRef, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub use num_complex::Complex64 as C64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Singular values in nonincreasing order.
pub fn singular_values(a: MatRef<'_, C64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    a.singular_values()
        .map_err(|e| Error::Linalg(format!("svd did not converge: {e:?}")))
}

/// Eigenvalues of a Hermitian matrix in nondecreasing order.
pub fn hermitian_eigenvalues(a: MatRef<'_, C64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Linalg(format!("hermitian eigensolver failed: {e:?}")))
}

pub fn eigenvalues(a: MatRef<'_, C64>) -> Result<Vec<C64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    a.eigenvalues()
        .map_err(|e| Error::Linalg(format!("eigensolver failed: {e:?}")))
}

pub fn norm1(a: MatRef<'_, C64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn vec_norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// `y = A x`.
pub fn matvec(a: MatRef<'_, C64>, x: &[C64], y: &mut [C64]) {
    debug_assert_eq!(a.ncols(), x.len());
    debug_assert_eq!(a.nrows(), y.len());
    y.fill(ZERO);
    for (j, &xj) in x.iter().enumerate() {
        if xj == ZERO {
            continue;
        }
        let col = a.col(j);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += col[i] * xj;
        }
    }
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with the degree-13 Padé approximant.
pub fn expm(a: MatRef<'_, C64>) -> Result<Mat<C64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let nrm = norm1(a);
    if !nrm.is_finite() {
        return Err(Error::Linalg("expm of a non-finite matrix".into()));
    }
    let s = if nrm > THETA13 {
        (nrm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scale = C64::from(0.5f64.powi(s));
    let a = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);
    let eye = Mat::<C64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = PADE13;
    let comb = |terms: &[(&Mat<C64>, f64)]| -> Mat<C64> {
        Mat::from_fn(n, n, |i, j| terms.iter().map(|(m, c)| m[(i, j)] * *c).sum())
    };

    let inner_u = &a6 * comb(&[(&a6, b[13]), (&a4, b[11]), (&a2, b[9])]);
    let u = &a * (inner_u + comb(&[(&a6, b[7]), (&a4, b[5]), (&a2, b[3]), (&eye, b[1])]));
    let inner_v = &a6 * comb(&[(&a6, b[12]), (&a4, b[10]), (&a2, b[8])]);
    let v = inner_v + comb(&[(&a6, b[6]), (&a4, b[4]), (&a2, b[2]), (&eye, b[0])]);

    let denom = &v - &u;
    let mut r = &v + &u;
    denom.partial_piv_lu().solve_in_place(r.as_mut());
    for _ in 0..s {
        r = &r * &r;
    }
    if r.col_iter().any(|c| c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
        return Err(Error::Linalg("expm produced non-finite entries".into()));
    }
    Ok(r)
}

/// A linear map that can apply `B^{-1}` and `B^{-*}` in place.
pub trait InverseOperator {
    fn dim(&self) -> usize;
    fn solve(&self, x: &mut [C64]);
    fn solve_adjoint(&self, x: &mut [C64]);
}

pub struct DenseLu {
    lu: PartialPivLu<C64>,
    n: usize,
}

impl DenseLu {
    pub fn new(a: MatRef<'_, C64>) -> Self {
        Self {
            lu: a.partial_piv_lu(),
            n: a.nrows(),
        }
    }
}

fn as_col(x: &mut [C64]) -> MatMut<'_, C64> {
    let n = x.len();
    MatMut::from_column_major_slice_mut(x, n, 1)
}

impl InverseOperator for DenseLu {
    fn dim(&self) -> usize {
        self.n
    }
    fn solve(&self, x: &mut [C64]) {
        self.lu.solve_in_place(as_col(x));
    }
    fn solve_adjoint(&self, x: &mut [C64]) {
        self.lu.solve_adjoint_in_place(as_col(x));
    }
}

/// Deterministic complex Gaussian vector with `E|z_i|^2 = 1`.
pub fn complex_gaussian(rng: &mut impl rand::Rng, n: usize) -> Vec<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(s * re, s * im)
        })
        .collect()
}

/// Relative residual target for the Ritz value in [`lanczos_largest`].
pub const LANCZOS_TOL: f64 = 1e-11;

/// Largest eigenvalue of a Hermitian positive semidefinite operator given
/// only through `apply`. Full reorthogonalization; the start vector is
/// fixed by `seed` so results are reproducible.
pub fn lanczos_largest<F>(n: usize, mut apply: F, seed: u64) -> f64
where
    F: FnMut(&[C64], &mut [C64]),
{
    if n == 0 {
        return 0.0;
    }
    let max_iter = n.min(300);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q0 = complex_gaussian(&mut rng, n);
    let nrm = vec_norm(&q0);
    q0.iter_mut().for_each(|z| *z /= nrm);

    let mut basis: Vec<Vec<C64>> = vec![q0];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![ZERO; n];
    let mut theta = 0.0;

    for k in 0..max_iter {
        apply(&basis[k], &mut w);
        let a = dot(&basis[k], &w).re;
        if !a.is_finite() {
            return f64::INFINITY;
        }
        alpha.push(a);
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
            }
        }
        let b = vec_norm(&w);
        let check = k < 24 || k % 4 == 3 || b == 0.0 || k + 1 == max_iter;
        if check {
            let (t, last) = tridiagonal_top(&alpha, &beta);
            theta = t;
            if b * last.abs() <= LANCZOS_TOL * theta || b <= 1e-15 * theta || k + 1 == max_iter {
                return theta;
            }
        }
        if b == 0.0 {
            return theta;
        }
        beta.push(b);
        let next: Vec<C64> = w.iter().map(|z| z / b).collect();
        basis.push(next);
    }
    theta
}

/// Top eigenvalue of the symmetric tridiagonal matrix and the last
/// component of its eigenvector.
fn tridiagonal_top(alpha: &[f64], beta: &[f64]) -> (f64, f64) {
    let k = alpha.len();
    let t = Mat::<f64>::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 {
            beta[j]
        } else if j == i + 1 {
            beta[i]
        } else {
            0.0
        }
    });
    match t.self_adjoint_eigen(Side::Lower) {
        Ok(eig) => {
            let top = eig.S().column_vector()[k - 1];
            let last = eig.U()[(k - 1, k - 1)];
            (top, last)
        }
        Err(_) => (f64::NAN, 1.0),
    }
}

/// `‖B^{-1}‖` in the Euclidean operator norm.
pub fn inverse_norm(op: &impl InverseOperator, seed: u64) -> f64 {
    let n = op.dim();
    let theta = lanczos_largest(
        n,
        |x, y| {
            y.copy_from_slice(x);
            op.solve_adjoint(y);
            op.solve(y);
        },
        seed,
    );
    if theta.is_finite() {
        theta.max(0.0).sqrt()
    } else {
        f64::INFINITY
    }
}
