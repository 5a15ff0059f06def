//! Least-squares line fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    pub points: usize,
}

/// Fits `y ≈ slope·x + intercept`.
pub fn line(x: &[f64], y: &[f64], min_points: usize) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::Dimension { expected: n, got: y.len() });
    }
    if n < min_points.max(2) {
        return Err(Error::TooFewRows { needed: min_points.max(2), have: n });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Argument("fit abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    Ok(LineFit { slope, intercept, residual: (ss / nf).sqrt(), points: n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 5.0];
        let y: Vec<f64> = x.iter().map(|t| 3.0 - 0.5 * t).collect();
        let f = line(&x, &y, 2).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-15 && (f.intercept - 3.0).abs() < 1e-15);
        assert!(f.residual < 1e-15);
    }

    #[test]
    fn too_few() {
        assert!(matches!(line(&[1.0], &[1.0], 5), Err(Error::TooFewRows { needed: 5, have: 1 })));
    }
}
