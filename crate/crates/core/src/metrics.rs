//! Spectral angle distance (SAD) between signatures, abundance angle distance
//! (AAD) between per-pixel abundance vectors, and their RMS aggregates after
//! optimally pairing estimated with true endmembers.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simulate::SimulatedScene;
use crate::solver::Factorization;

/// Largest endmember count matched by exhaustive search.
const EXHAUSTIVE_LIMIT: usize = 8;

fn norm<T: Scalar>(a: &ArrayView1<'_, T>) -> T {
    a.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Angle between two nonzero vectors as `2·atan2(‖â − b̂‖, ‖â + b̂‖)`.
/// Equal to `arccos(cos θ)` but keeps full precision near 0 and π, where
/// `acos` of a rounded cosine is off by ~1e-8.
fn angle<T: Scalar>(a: &ArrayView1<'_, T>, b: &ArrayView1<'_, T>, na: T, nb: T) -> T {
    let (diff, sum) = a
        .iter()
        .zip(b.iter())
        .fold((T::zero(), T::zero()), |(d, s), (&x, &y)| {
            let (x, y) = (x / na, y / nb);
            (d + (x - y) * (x - y), s + (x + y) * (x + y))
        });
    T::of(2.0) * diff.sqrt().atan2(sum.sqrt())
}

/// Angle in radians between two signatures.
pub fn sad<T: Scalar>(m: &ArrayView1<'_, T>, m_hat: &ArrayView1<'_, T>) -> Result<T> {
    if m.len() != m_hat.len() {
        return Err(Error::DimensionMismatch(format!(
            "signatures of length {} and {}",
            m.len(),
            m_hat.len()
        )));
    }
    let (na, nb) = (norm(m), norm(m_hat));
    if na == T::zero() || nb == T::zero() {
        return Err(Error::ZeroNorm);
    }
    Ok(angle(m, m_hat, na, nb))
}

/// Angle in radians between two abundance vectors. Two zero vectors are at
/// angle 0; a zero and a nonzero vector at `π/2`.
pub fn aad<T: Scalar>(a: &ArrayView1<'_, T>, a_hat: &ArrayView1<'_, T>) -> T {
    aad_flagged(a, a_hat).0
}

/// [`aad`] plus whether the degenerate rule was applied.
pub fn aad_flagged<T: Scalar>(a: &ArrayView1<'_, T>, a_hat: &ArrayView1<'_, T>) -> (T, bool) {
    let (na, nb) = (norm(a), norm(a_hat));
    match (na == T::zero(), nb == T::zero()) {
        (true, true) => (T::zero(), false),
        (true, false) | (false, true) => (T::FRAC_PI_2(), true),
        (false, false) => (angle(a, a_hat, na, nb), false),
    }
}

fn check_same_p<T>(a: &ArrayView2<'_, T>, b: &ArrayView2<'_, T>, what: &str) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: true is {}x{}, estimate is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

/// `cost[[j, i]]` = SAD between estimated column `j` and true column `i`.
fn sad_costs<T: Scalar>(
    u_true: &ArrayView2<'_, T>,
    u_est: &ArrayView2<'_, T>,
) -> Result<Array2<f64>> {
    let p = u_true.ncols();
    let mut cost = Array2::zeros((p, p));
    for j in 0..p {
        for i in 0..p {
            cost[[j, i]] = sad(&u_true.column(i), &u_est.column(j))?.as_f64();
        }
    }
    Ok(cost)
}

/// Visits every permutation of `0..n` in lexicographic order.
fn for_each_permutation(n: usize, mut visit: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        visit(&perm);
        let Some(i) = (1..n).rev().find(|&i| perm[i - 1] < perm[i]) else {
            return;
        };
        let j = (i..n)
            .rev()
            .find(|&j| perm[j] > perm[i - 1])
            .expect("successor exists");
        perm.swap(i - 1, j);
        perm[i..].reverse();
    }
}

/// Minimum-cost assignment by exhaustive search; ties keep the
/// lexicographically first permutation.
pub fn assign_exhaustive(cost: &Array2<f64>) -> Vec<usize> {
    let n = cost.nrows();
    let mut best = (f64::INFINITY, (0..n).collect::<Vec<_>>());
    for_each_permutation(n, |perm| {
        let total: f64 = perm.iter().enumerate().map(|(j, &i)| cost[[j, i]]).sum();
        if total < best.0 {
            best = (total, perm.to_vec());
        }
    });
    best.1
}

/// Minimum-cost assignment by the O(n³) Hungarian method with potentials.
pub fn assign_hungarian(cost: &Array2<f64>) -> Vec<usize> {
    let n = cost.nrows();
    // 1-based rows/cols; column 0 is the virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[[r0 - 1, col - 1]] - u[r0] - v[col];
                if reduced < minv[col] {
                    minv[col] = reduced;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for col in 1..=n {
        assignment[owner[col] - 1] = col - 1;
    }
    assignment
}

/// Pairs estimated endmembers with true ones minimizing the total SAD.
/// Entry `j` of the result is the true index matched to estimated column `j`.
pub fn match_endmembers<T: Scalar>(
    u_true: &ArrayView2<'_, T>,
    u_est: &ArrayView2<'_, T>,
) -> Result<Vec<usize>> {
    check_same_p(u_true, u_est, "endmember matrices")?;
    let cost = sad_costs(u_true, u_est)?;
    Ok(if cost.nrows() <= EXHAUSTIVE_LIMIT {
        assign_exhaustive(&cost)
    } else {
        assign_hungarian(&cost)
    })
}

fn check_permutation(perm: &[usize], p: usize) -> Result<()> {
    let mut seen = vec![false; p];
    if perm.len() != p
        || perm
            .iter()
            .any(|&i| i >= p || std::mem::replace(&mut seen[i], true))
    {
        return Err(Error::InvalidArgument(format!(
            "{perm:?} is not a permutation of 0..{p}"
        )));
    }
    Ok(())
}

/// Per-endmember SAD in radians, indexed by estimated column.
pub fn matched_sads<T: Scalar>(
    u_true: &ArrayView2<'_, T>,
    u_est: &ArrayView2<'_, T>,
    perm: &[usize],
) -> Result<Vec<f64>> {
    check_same_p(u_true, u_est, "endmember matrices")?;
    check_permutation(perm, u_est.ncols())?;
    perm.iter()
        .enumerate()
        .map(|(j, &i)| Ok(sad(&u_true.column(i), &u_est.column(j))?.as_f64()))
        .collect()
}

fn rms_degrees(angles: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = angles.len() as f64;
    (angles.map(|a| a * a).sum::<f64>() / n).sqrt().to_degrees()
}

/// Root-mean-square matched SAD, in degrees.
pub fn rms_sad<T: Scalar>(
    u_true: &ArrayView2<'_, T>,
    u_est: &ArrayView2<'_, T>,
    perm: &[usize],
) -> Result<f64> {
    Ok(rms_degrees(matched_sads(u_true, u_est, perm)?.into_iter()))
}

/// Per-pixel AAD in radians after moving estimated column `j` to `perm[j]`,
/// plus the number of pixels that hit the degenerate rule.
pub fn matched_aads<T: Scalar>(
    v_true: &ArrayView2<'_, T>,
    v_est: &ArrayView2<'_, T>,
    perm: &[usize],
) -> Result<(Vec<f64>, usize)> {
    check_same_p(v_true, v_est, "abundance matrices")?;
    check_permutation(perm, v_est.ncols())?;
    let mut aligned = Array2::zeros(v_est.dim());
    for (j, &i) in perm.iter().enumerate() {
        aligned.column_mut(i).assign(&v_est.column(j));
    }
    let mut degenerate = 0;
    let angles = v_true
        .rows()
        .into_iter()
        .zip(aligned.rows())
        .map(|(a, b)| {
            let (angle, flagged) = aad_flagged(&a, &b);
            degenerate += usize::from(flagged);
            angle.as_f64()
        })
        .collect();
    Ok((angles, degenerate))
}

/// Root-mean-square per-pixel AAD, in degrees.
pub fn rms_aad<T: Scalar>(
    v_true: &ArrayView2<'_, T>,
    v_est: &ArrayView2<'_, T>,
    perm: &[usize],
) -> Result<f64> {
    Ok(rms_degrees(
        matched_aads(v_true, v_est, perm)?.0.into_iter(),
    ))
}

/// Matched SAD/AAD summary for one method on one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `permutation[j]` is the true endmember paired with estimated column `j`.
    pub permutation: Vec<usize>,
    pub per_endmember_sad_deg: Vec<f64>,
    pub rms_sad_deg: f64,
    pub rms_aad_deg: f64,
    pub method_label: String,
    /// Pixels whose AAD used the zero-vector rule.
    pub degenerate_aad_pixels: usize,
}

/// Scores ground-truth factors against estimates.
pub fn evaluate_factors<T: Scalar>(
    u_true: &ArrayView2<'_, T>,
    v_true: &ArrayView2<'_, T>,
    u_est: &ArrayView2<'_, T>,
    v_est: &ArrayView2<'_, T>,
    label: &str,
) -> Result<EvalReport> {
    let permutation = match_endmembers(u_true, u_est)?;
    let sads = matched_sads(u_true, u_est, &permutation)?;
    let (aads, degenerate) = matched_aads(v_true, v_est, &permutation)?;
    Ok(EvalReport {
        per_endmember_sad_deg: sads.iter().map(|s| s.to_degrees()).collect(),
        rms_sad_deg: rms_degrees(sads.into_iter()),
        rms_aad_deg: rms_degrees(aads.into_iter()),
        permutation,
        method_label: label.to_string(),
        degenerate_aad_pixels: degenerate,
    })
}

pub fn evaluate<T: Scalar>(
    scene: &SimulatedScene<T>,
    fact: &Factorization<T>,
    label: &str,
) -> Result<EvalReport> {
    evaluate_factors(
        &scene.true_endmembers.as_array().view(),
        &scene.true_abundances.as_array().view(),
        &fact.endmembers.as_array().view(),
        &fact.abundances.as_array().view(),
        label,
    )
}

/// Two-row comparison table, one column per report, degrees with two decimals.
pub fn format_table(reports: &[EvalReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.method_label.len())
        .max()
        .unwrap_or(0)
        .max(8);
    let mut out = String::new();
    write!(out, "{:<18}", "").expect("string write");
    for r in reports {
        write!(out, "  {:>width$}", r.method_label).expect("string write");
    }
    out.push('\n');
    for (name, pick) in [
        (
            "rms_SAD (degrees)",
            (|r: &EvalReport| r.rms_sad_deg) as fn(&EvalReport) -> f64,
        ),
        ("rms_AAD (degrees)", |r: &EvalReport| r.rms_aad_deg),
    ] {
        write!(out, "{name:<18}").expect("string write");
        for r in reports {
            write!(out, "  {:>width$.2}", pick(r)).expect("string write");
        }
        out.push('\n');
    }
    out
}
