//! Dense oracles assembled directly from the definitions, in the plain
//! Fourier basis, without the sector decomposition used by the library.
#![allow(dead_code)]

use dampwave::damping::DampingOperator;
use dampwave::linalg::C64;
use dampwave::spectral::SpectralModel;
use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;

/// `𝒜` on `(w, v)` with `w = P^{1/2}u` over nonzero modes. The zero velocity
/// is kept unless `G` annihilates it, matching the quotient by `ker 𝒜`.
pub fn dense_generator(model: &SpectralModel, g: &DampingOperator) -> Mat<C64> {
    let n = model.len();
    let gd = g.dense();
    let rho: Vec<f64> = model.eigenvalues().iter().map(|x| x.sqrt()).collect();
    let nz: Vec<usize> = (0..n).filter(|&i| rho[i] > 0.0).collect();
    let zero: Vec<usize> = (0..n).filter(|&i| rho[i] == 0.0).collect();
    let keep_zero = zero.iter().any(|&z| (0..n).any(|j| gd[(z, j)].norm() > 0.0 || gd[(j, z)].norm() > 0.0));
    let vmodes: Vec<usize> = if keep_zero { (0..n).collect() } else { nz.clone() };
    let nw = nz.len();
    let dim = nw + vmodes.len();
    let mut a = Mat::<C64>::zeros(dim, dim);
    for (p, &i) in nz.iter().enumerate() {
        let q = vmodes.iter().position(|&j| j == i).unwrap();
        a[(p, nw + q)] = C64::new(rho[i], 0.0);
        a[(nw + q, p)] = C64::new(-rho[i], 0.0);
    }
    for (p, &i) in vmodes.iter().enumerate() {
        for (q, &j) in vmodes.iter().enumerate() {
            a[(nw + p, nw + q)] -= gd[(i, j)];
        }
    }
    a
}

/// `‖B^{-1}‖` from an explicit inverse.
pub fn inverse_norm(b: &Mat<C64>) -> f64 {
    let inv = b.partial_piv_lu().inverse();
    inv.singular_values().unwrap()[0]
}

pub fn resolvent_oracle(a: &Mat<C64>, lambda: f64) -> f64 {
    let mut b = a.clone();
    for i in 0..b.nrows() {
        b[(i, i)] += C64::new(0.0, lambda);
    }
    inverse_norm(&b)
}

/// `‖(h²P − ihG − 1)^{-1}‖`.
pub fn pencil_oracle(model: &SpectralModel, g: &DampingOperator, h: f64) -> f64 {
    let n = model.len();
    let gd = g.dense();
    let eig = model.eigenvalues();
    let b = Mat::<C64>::from_fn(n, n, |i, j| {
        let d = if i == j { C64::new(h * h * eig[i] - 1.0, 0.0) } else { C64::new(0.0, 0.0) };
        d - C64::new(0.0, h) * gd[(i, j)]
    });
    inverse_norm(&b)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
