//! Endmember-count estimation from the PCA eigenvalue spectrum.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_THRESHOLD: f64 = 0.995;

/// Descending covariance eigenvalues and their cumulative explained fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaSpectrum {
    pub eigenvalues: Vec<f64>,
    pub explained: Vec<f64>,
    pub centered: bool,
}

/// Eigenvalues of a symmetric matrix (ascending), by Householder reduction to
/// tridiagonal form followed by implicit QL iterations.
pub fn symmetric_eigenvalues<T: Scalar>(a: &Array2<T>) -> Result<Vec<T>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix is not square",
            n,
            a.ncols()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut v = a.clone();
    let mut d: Vec<T> = (0..n).map(|j| v[[n - 1, j]]).collect();
    let mut e = vec![T::zero(); n];
    let zero = T::zero();

    // Householder tridiagonalization (eigenvalues only; no vector accumulation).
    for i in (1..n).rev() {
        let scale: T = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = zero;
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[[i - 1, j]];
                v[[i, j]] = zero;
                v[[j, i]] = zero;
            }
        } else {
            for dk in d[..i].iter_mut() {
                *dk /= scale;
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let g = if f > zero { -h.sqrt() } else { h.sqrt() };
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e[..i].iter_mut() {
                *ej = zero;
            }
            for j in 0..i {
                let f = d[j];
                v[[j, i]] = f;
                let mut g = e[j] + v[[j, j]] * f;
                for k in j + 1..i {
                    g += v[[k, j]] * d[k];
                    e[k] += v[[k, j]] * f;
                }
                e[j] = g;
            }
            let mut f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    let updated = v[[k, j]] - (f * e[k] + g * d[k]);
                    v[[k, j]] = updated;
                }
                d[j] = v[[i - 1, j]];
                v[[i, j]] = zero;
            }
        }
        d[i] = h;
    }
    for j in 0..n {
        d[j] = v[[j, j]];
    }
    // After the loop above the diagonal lives in v; the off-diagonal in e[1..].
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;

    // Implicit QL on the tridiagonal (d, e).
    let eps = T::epsilon();
    let mut f = zero;
    let mut tst1 = zero;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iterations = 0;
            loop {
                iterations += 1;
                if iterations > 60 {
                    return Err(Error::InvalidArgument(
                        "eigenvalue iteration failed to converge".into(),
                    ));
                }
                let mut g = d[l];
                let two = T::of(2.0);
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(T::one());
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d[l + 2..].iter_mut() {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(d)
}

/// Eigenvalues of the band covariance (centered) or second-moment matrix
/// (uncentered) of the pixel spectra, largest first.
pub fn pca_spectrum<T: Scalar>(x: &DataMatrix<T>, centered: bool) -> Result<PcaSpectrum> {
    let n = x.pixels();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "PCA needs at least 2 pixels, got {n}"
        )));
    }
    let mut data = x.as_array().mapv(|v| v.as_f64());
    // Eigenvalues below this are round-off (e.g. left over from centering).
    let floor = x.bands() as f64 * f64::EPSILON * data.mapv(|v| v * v).sum() / n as f64;
    if centered {
        let mean = data.mean_axis(Axis(1)).expect("non-empty");
        data -= &mean.insert_axis(Axis(1));
    }
    let denom = if centered { (n - 1) as f64 } else { n as f64 };
    let cov = data.dot(&data.t()) / denom;
    let mut eigenvalues: Vec<f64> = symmetric_eigenvalues(&cov)?
        .into_iter()
        .rev()
        .map(|l| if l < floor { 0.0 } else { l })
        .collect();
    eigenvalues.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let total: f64 = eigenvalues.iter().sum();
    let mut running = 0.0;
    let mut explained: Vec<f64> = eigenvalues
        .iter()
        .map(|&l| {
            running += l;
            if total > 0.0 {
                (running / total).min(1.0)
            } else {
                1.0
            }
        })
        .collect();
    if let Some(last) = explained.last_mut() {
        *last = 1.0;
    }
    Ok(PcaSpectrum {
        eigenvalues,
        explained,
        centered,
    })
}

impl PcaSpectrum {
    /// Smallest number of leading components whose cumulative share reaches
    /// `threshold` (zero when the spectrum carries no variance at all).
    pub fn components_for(&self, threshold: f64) -> usize {
        if self.eigenvalues.iter().all(|&l| l == 0.0) {
            return 0;
        }
        self.explained
            .iter()
            .position(|&f| f >= threshold)
            .map_or(self.explained.len(), |i| i + 1)
    }
}

/// Endmember count from the PCA spectrum.
///
/// Sum-to-one mixtures of `P` signatures lie in a `(P − 1)`-dimensional affine
/// set, so the centered count gets `+1`. The result is clamped to
/// `1..=min(L, N)`.
pub fn estimate_endmember_count<T: Scalar>(
    x: &DataMatrix<T>,
    threshold: f64,
    centered: bool,
) -> Result<(usize, PcaSpectrum)> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be in (0, 1], got {threshold}"
        )));
    }
    let spectrum = pca_spectrum(x, centered)?;
    let m = spectrum.components_for(threshold);
    let p = if centered { m + 1 } else { m };
    Ok((p.clamp(1, x.bands().min(x.pixels())), spectrum))
}

/// Convenience wrapper for the descending eigenvalues as an array.
pub fn eigenvalue_array(spectrum: &PcaSpectrum) -> Array1<f64> {
    Array1::from(spectrum.eigenvalues.clone())
}
