//! NMF and graph-regularized NMF by multiplicative updates.
//!
//! The model is `X (L x N) ≈ U (L x P) · V (N x P)ᵀ`. Each iteration updates
//! `U` and then `V`:
//!
//! ```text
//! U ← U ⊙ (X V) ⊘ (U VᵀV + ε)
//! V ← V ⊙ (XᵀU + λ W V) ⊘ (V UᵀU + λ D V + ε)
//! ```
//!
//! which does not increase `‖X − UVᵀ‖² + λ Tr(Vᵀ L V)`. With `asc` enabled
//! every pixel's abundance row is rescaled to sum to one after the updates;
//! `U` is left as is, so the objective is then no longer guaranteed monotone.

use ndarray::{Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{AbundanceMatrix, DataMatrix, EndmemberMatrix};
use crate::error::{Error, Result};
use crate::graph::{regularizer_value, Laplacian};
use crate::scalar::Scalar;

pub const DEFAULT_MAX_ITER: usize = 1000;
pub const DEFAULT_REL_TOL: f64 = 1e-6;
pub const DEFAULT_EPSILON_GUARD: f64 = 1e-12;
/// Regularization weight used for GNMF when none is given.
pub const DEFAULT_GNMF_LAMBDA: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub p_endmembers: usize,
    /// Graph regularization weight; zero gives plain NMF.
    pub lambda: f64,
    pub max_iter: usize,
    /// Stop once the objective decreases by less than `rel_tol · O_{t−1}`.
    pub rel_tol: f64,
    pub seed: u64,
    /// Rescale abundance rows to sum to one after every iteration.
    pub asc: bool,
    pub epsilon_guard: f64,
}

impl SolverOptions {
    pub fn new(p_endmembers: usize) -> Self {
        SolverOptions {
            p_endmembers,
            lambda: 0.0,
            max_iter: DEFAULT_MAX_ITER,
            rel_tol: DEFAULT_REL_TOL,
            seed: 0,
            asc: true,
            epsilon_guard: DEFAULT_EPSILON_GUARD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_endmembers == 0 {
            return Err(Error::InvalidArgument(
                "p_endmembers must be at least 1".into(),
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        if self.rel_tol.is_nan() || self.rel_tol <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        if !(self.epsilon_guard > 0.0 && self.epsilon_guard.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon_guard must be positive, got {}",
                self.epsilon_guard
            )));
        }
        Ok(())
    }
}

/// Result of a solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization<T> {
    pub endmembers: EndmemberMatrix<T>,
    pub abundances: AbundanceMatrix<T>,
    /// Objective after each completed iteration (after ASC rescaling).
    pub objective_trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    /// Abundance rows that summed to zero and were reset to uniform.
    pub degenerate_rows: usize,
}

fn shape_check<T>(
    x: &ArrayView2<'_, T>,
    u: &ArrayView2<'_, T>,
    v: &ArrayView2<'_, T>,
) -> Result<()> {
    if u.nrows() != x.nrows() || v.nrows() != x.ncols() || u.ncols() != v.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "X is {}x{}, U is {}x{}, V is {}x{}",
            x.nrows(),
            x.ncols(),
            u.nrows(),
            u.ncols(),
            v.nrows(),
            v.ncols()
        )));
    }
    Ok(())
}

/// Squared Frobenius reconstruction error `‖X − UVᵀ‖²`.
pub fn objective_nmf<T: Scalar>(
    x: &ArrayView2<'_, T>,
    u: &ArrayView2<'_, T>,
    v: &ArrayView2<'_, T>,
) -> Result<T> {
    shape_check(x, u, v)?;
    let recon = u.dot(&v.t());
    Ok(Zip::from(x)
        .and(&recon)
        .fold(T::zero(), |acc, &a, &b| acc + (a - b) * (a - b)))
}

/// `‖X − UVᵀ‖² + λ Tr(Vᵀ L V)`.
pub fn objective_gnmf<T: Scalar>(
    x: &ArrayView2<'_, T>,
    u: &ArrayView2<'_, T>,
    v: &ArrayView2<'_, T>,
    lap: &Laplacian<T>,
    lambda: T,
) -> Result<T> {
    let fit = objective_nmf(x, u, v)?;
    Ok(fit + lambda * regularizer_value(v, lap)?)
}

/// Uniform `(0, 1]` factors from a seeded stream (`U` row-major first, then
/// `V`), with `V` rows rescaled to sum to one.
pub fn init_factors<T: Scalar>(
    bands: usize,
    pixels: usize,
    p: usize,
    seed: u64,
) -> Result<(Array2<T>, Array2<T>)> {
    if p == 0 || p > bands.min(pixels) {
        return Err(Error::InvalidArgument(format!(
            "P = {p} must be in 1..={} for a {bands}x{pixels} matrix",
            bands.min(pixels)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // 1 - [0, 1) lies in (0, 1].
    let mut draw = || T::of(1.0 - rng.random::<f64>());
    let u = Array2::from_shape_simple_fn((bands, p), &mut draw);
    let v = Array2::from_shape_simple_fn((pixels, p), &mut draw);
    let (v, _) = asc_normalize(v);
    Ok((u, v))
}

/// Divides every abundance row by its sum. Rows summing to zero become the
/// uniform vector; their count is returned.
pub fn asc_normalize<T: Scalar>(mut v: Array2<T>) -> (Array2<T>, usize) {
    let p = v.ncols();
    let uniform = T::one() / T::of(p as f64);
    let mut degenerate = 0;
    for mut row in v.axis_iter_mut(Axis(0)) {
        let s: T = row.sum();
        if s > T::zero() {
            row.mapv_inplace(|a| a / s);
        } else {
            row.fill(uniform);
            degenerate += 1;
        }
    }
    (v, degenerate)
}

/// `target ← target ⊙ numer ⊘ (denom + eps)`.
fn multiplicative<T: Scalar>(target: &mut Array2<T>, numer: &Array2<T>, denom: &Array2<T>, eps: T) {
    Zip::from(target)
        .and(numer)
        .and(denom)
        .for_each(|t, &n, &d| *t = *t * n / (d + eps));
}

/// One multiplicative update of `U` then `V`. With `lambda == 0` or no graph,
/// this is the plain Euclidean NMF update.
pub fn gnmf_step<T: Scalar>(
    x: &ArrayView2<'_, T>,
    u: &ArrayView2<'_, T>,
    v: &ArrayView2<'_, T>,
    graph: Option<&Laplacian<T>>,
    lambda: T,
    eps: T,
) -> Result<(Array2<T>, Array2<T>)> {
    shape_check(x, u, v)?;
    let graph = graph.filter(|_| lambda != T::zero());
    if let Some(lap) = graph {
        if lap.n() != v.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "graph has {} nodes, V has {} rows",
                lap.n(),
                v.nrows()
            )));
        }
    }

    let mut u_next = u.to_owned();
    let xv = x.dot(v);
    let u_vtv = u.dot(&v.t().dot(v));
    multiplicative(&mut u_next, &xv, &u_vtv, eps);

    let mut v_next = v.to_owned();
    let mut numer = x.t().dot(&u_next);
    let mut denom = v.dot(&u_next.t().dot(&u_next));
    if let Some(lap) = graph {
        numer.scaled_add(lambda, &lap.adjacency().mul_dense(v));
        let dv = v.to_owned() * lap.degree().view().insert_axis(Axis(1));
        denom.scaled_add(lambda, &dv);
    }
    multiplicative(&mut v_next, &numer, &denom, eps);
    Ok((u_next, v_next))
}

/// Plain NMF step; shares the [`gnmf_step`] code path.
pub fn nmf_step<T: Scalar>(
    x: &ArrayView2<'_, T>,
    u: &ArrayView2<'_, T>,
    v: &ArrayView2<'_, T>,
    eps: T,
) -> Result<(Array2<T>, Array2<T>)> {
    gnmf_step(x, u, v, None, T::zero(), eps)
}

/// Runs the update loop from seeded random factors.
pub fn solve<T: Scalar>(
    x: &DataMatrix<T>,
    lap: Option<&Laplacian<T>>,
    opts: &SolverOptions,
) -> Result<Factorization<T>> {
    opts.validate()?;
    if !x.is_nonnegative() {
        return Err(Error::InvalidArgument(
            "data matrix has negative entries".into(),
        ));
    }
    if opts.lambda > 0.0 {
        match lap {
            None => {
                return Err(Error::InvalidArgument(
                    "lambda > 0 requires a graph Laplacian".into(),
                ))
            }
            Some(l) if l.n() != x.pixels() => {
                return Err(Error::DimensionMismatch(format!(
                    "graph has {} nodes, data has {} pixels",
                    l.n(),
                    x.pixels()
                )))
            }
            _ => {}
        }
    }
    let (u, v) = init_factors::<T>(x.bands(), x.pixels(), opts.p_endmembers, opts.seed)?;
    solve_from(x, lap, opts, u, v)
}

/// Runs the update loop from caller-supplied nonnegative factors.
pub fn solve_from<T: Scalar>(
    x: &DataMatrix<T>,
    lap: Option<&Laplacian<T>>,
    opts: &SolverOptions,
    mut u: Array2<T>,
    mut v: Array2<T>,
) -> Result<Factorization<T>> {
    opts.validate()?;
    let xv = x.view();
    shape_check(&xv, &u.view(), &v.view())?;
    let lambda = T::of(opts.lambda);
    let eps = T::of(opts.epsilon_guard);
    let graph = lap.filter(|_| opts.lambda > 0.0);
    let objective = |u: &Array2<T>, v: &Array2<T>| -> Result<T> {
        match graph {
            Some(l) => objective_gnmf(&xv, &u.view(), &v.view(), l, lambda),
            None => objective_nmf(&xv, &u.view(), &v.view()),
        }
    };

    let mut trace = Vec::new();
    let mut converged = false;
    let mut degenerate_rows = 0;
    let mut previous = objective(&u, &v)?.as_f64();
    for iteration in 0..opts.max_iter {
        let (u_next, v_next) = gnmf_step(&xv, &u.view(), &v.view(), graph, lambda, eps)?;
        u = u_next;
        v = v_next;
        if opts.asc {
            let (normalized, degenerate) = asc_normalize(v);
            v = normalized;
            degenerate_rows += degenerate;
        }
        if u.iter().chain(v.iter()).any(|a| !a.is_finite()) {
            return Err(Error::NonFinite { iteration });
        }
        let current = objective(&u, &v)?.as_f64();
        if !current.is_finite() {
            return Err(Error::NonFinite { iteration });
        }
        trace.push(current);
        // Only a stalled descent counts: with ASC the objective can turn back
        // up, and a turning point would otherwise look like a tiny change.
        let decrease = previous - current;
        let settled =
            current == 0.0 || (decrease >= 0.0 && decrease < opts.rel_tol * previous.abs());
        previous = current;
        if settled {
            converged = true;
            break;
        }
    }
    Ok(Factorization {
        endmembers: EndmemberMatrix::new(u)?,
        abundances: AbundanceMatrix::new(v)?,
        iterations_run: trace.len(),
        objective_trace: trace,
        converged,
        degenerate_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    use crate::data::DataMatrix;
    use crate::graph::{build_knn_graph, laplacian, regularizer_pairwise, Weighting};

    fn random(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((rows, cols), || rng.random::<f64>())
    }

    #[test]
    fn objective_nmf_examples() {
        let u = array![[1.0, 2.0], [0.5, 0.0]];
        let v = array![[1.0, 1.0], [0.0, 3.0], [2.0, 0.5]];
        let x = u.dot(&v.t());
        assert_eq!(objective_nmf(&x.view(), &u.view(), &v.view()).unwrap(), 0.0);
        let one = array![[1.0]];
        let two = array![[2.0]];
        assert_eq!(
            objective_nmf(&one.view(), &two.view(), &one.view()).unwrap(),
            1.0
        );
        assert!(objective_nmf(&x.view(), &v.view(), &u.view()).is_err());
    }

    #[test]
    fn objective_nmf_matches_elementwise_sum() {
        let (x, u, v) = (random(5, 7, 1), random(5, 2, 2), random(7, 2, 3));
        let mut expected = 0.0;
        for i in 0..5 {
            for j in 0..7 {
                let mut r = x[[i, j]];
                for k in 0..2 {
                    r -= u[[i, k]] * v[[j, k]];
                }
                expected += r * r;
            }
        }
        let got = objective_nmf(&x.view(), &u.view(), &v.view()).unwrap();
        assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
    }

    #[test]
    fn objective_gnmf_is_sum_of_terms() {
        let (x, u, v) = (random(6, 12, 4), random(6, 3, 5), random(12, 3, 6));
        let g =
            build_knn_graph(&DataMatrix::new(x.clone()).unwrap(), 3, Weighting::Binary).unwrap();
        let lap = laplacian(&g);
        let fit = objective_nmf(&x.view(), &u.view(), &v.view()).unwrap();
        assert_eq!(
            objective_gnmf(&x.view(), &u.view(), &v.view(), &lap, 0.0).unwrap(),
            fit
        );
        let expected = fit + 0.7 * regularizer_pairwise(&v.view(), &g).unwrap();
        let got = objective_gnmf(&x.view(), &u.view(), &v.view(), &lap, 0.7).unwrap();
        assert_abs_diff_eq!(got, expected, epsilon = 1e-10 * expected);

        let flat = Array2::from_shape_fn((12, 3), |(_, k)| [0.2, 0.3, 0.5][k]);
        let fit = objective_nmf(&x.view(), &u.view(), &flat.view()).unwrap();
        let reg = objective_gnmf(&x.view(), &u.view(), &flat.view(), &lap, 5.0).unwrap();
        assert_abs_diff_eq!(reg, fit, epsilon = 1e-12);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let (u1, v1) = init_factors::<f64>(6, 9, 3, 42).unwrap();
        let (u2, v2) = init_factors::<f64>(6, 9, 3, 42).unwrap();
        assert_eq!((&u1, &v1), (&u2, &v2));
        let (u3, v3) = init_factors::<f64>(6, 9, 3, 43).unwrap();
        assert!(u1 != u3 || v1 != v3);
        assert!(u1.iter().all(|&a| a > 0.0 && a <= 1.0));
        for row in v1.rows() {
            assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-12);
        }
        assert!(init_factors::<f64>(6, 9, 6, 0).is_ok());
        assert!(init_factors::<f64>(6, 9, 7, 0).is_err());
        assert!(init_factors::<f64>(6, 9, 0, 0).is_err());
    }

    #[test]
    fn asc_normalize_examples() {
        let (v, d) = asc_normalize(array![[2.0, 2.0], [1.0, 3.0]]);
        assert_eq!(v, array![[0.5, 0.5], [0.25, 0.75]]);
        assert_eq!(d, 0);
        let (v, d) = asc_normalize(array![[0.0, 0.0, 0.0]]);
        assert_eq!(v, array![[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]]);
        assert_eq!(d, 1);
        let (v, _) = asc_normalize(random(50, 4, 9));
        for row in v.rows() {
            assert!((row.sum() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn asc_normalize_ignores_per_pixel_scale() {
        let v = random(20, 3, 10);
        let scales = random(20, 1, 11).mapv(|s| 0.1 + 10.0 * s);
        let (a, _) = asc_normalize(v.clone());
        let (b, _) = asc_normalize(&v * &scales);
        for (x, y) in a.iter().zip(b.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-15);
        }
    }

    #[test]
    fn objective_invariant_to_joint_column_rescaling() {
        let (x, u, v) = (random(8, 15, 12), random(8, 3, 13), random(15, 3, 14));
        let c = array![[0.5, 4.0, 1.5]];
        let o1 = objective_nmf(&x.view(), &u.view(), &v.view()).unwrap();
        let o2 = objective_nmf(&x.view(), &(&u / &c).view(), &(&v * &c).view()).unwrap();
        assert_abs_diff_eq!(o1, o2, epsilon = 1e-12 * o1);
    }

    #[test]
    fn zero_lambda_step_is_the_nmf_step() {
        let (x, u, v) = (random(10, 30, 20), random(10, 3, 21), random(30, 3, 22));
        let g =
            build_knn_graph(&DataMatrix::new(x.clone()).unwrap(), 3, Weighting::Binary).unwrap();
        let lap = laplacian(&g);
        let plain = nmf_step(&x.view(), &u.view(), &v.view(), 1e-12).unwrap();
        let with_graph =
            gnmf_step(&x.view(), &u.view(), &v.view(), Some(&lap), 0.0, 1e-12).unwrap();
        assert_eq!(plain, with_graph);

        // Classic Lee–Seung updates written out directly.
        let u_ls = &u * &x.dot(&v) / &(u.dot(&v.t().dot(&v)) + 1e-12);
        let v_ls = &v * &x.t().dot(&u_ls) / &(v.dot(&u_ls.t().dot(&u_ls)) + 1e-12);
        assert_eq!(plain.0, u_ls);
        assert_eq!(plain.1, v_ls);
    }

    #[test]
    fn exact_factorization_is_a_fixed_point() {
        let (u, v) = (random(6, 2, 30), random(9, 2, 31));
        let x = u.dot(&v.t());
        let (u2, v2) = nmf_step(&x.view(), &u.view(), &v.view(), 1e-12).unwrap();
        let rel = |a: &Array2<f64>, b: &Array2<f64>| {
            (a - b).mapv(|d| d * d).sum().sqrt() / b.mapv(|d| d * d).sum().sqrt()
        };
        assert!(rel(&u2, &u) <= 1e-9);
        assert!(rel(&v2, &v) <= 1e-9);
    }

    #[test]
    fn gnmf_step_does_not_increase_objective() {
        let (x, u, v) = (random(10, 30, 40), random(10, 3, 41), random(30, 3, 42));
        let g =
            build_knn_graph(&DataMatrix::new(x.clone()).unwrap(), 3, Weighting::Binary).unwrap();
        let lap = laplacian(&g);
        let before = objective_gnmf(&x.view(), &u.view(), &v.view(), &lap, 1.0).unwrap();
        let (u2, v2) = gnmf_step(&x.view(), &u.view(), &v.view(), Some(&lap), 1.0, 1e-12).unwrap();
        let after = objective_gnmf(&x.view(), &u2.view(), &v2.view(), &lap, 1.0).unwrap();
        assert!(after <= before + 1e-10);
        assert!(u2.iter().chain(v2.iter()).all(|&a| a >= 0.0));
    }

    #[test]
    fn solve_with_zero_iterations_returns_initial_factors() {
        let x = DataMatrix::new(random(5, 8, 50)).unwrap();
        let mut opts = SolverOptions::new(2);
        opts.max_iter = 0;
        opts.seed = 3;
        let f = solve(&x, None, &opts).unwrap();
        let (u, v) = init_factors::<f64>(5, 8, 2, 3).unwrap();
        assert_eq!(f.endmembers.as_array(), &u);
        assert_eq!(f.abundances.as_array(), &v);
        assert!(!f.converged);
        assert_eq!(f.iterations_run, 0);
        assert!(f.objective_trace.is_empty());
    }

    #[test]
    fn solve_recovers_rank_one_data() {
        let (u, v) = (random(12, 1, 60), random(20, 1, 61));
        let x = u.dot(&v.t());
        let mut opts = SolverOptions::new(1);
        opts.asc = false;
        opts.max_iter = 2000;
        opts.rel_tol = 1e-14;
        let f = solve(&DataMatrix::new(x.clone()).unwrap(), None, &opts).unwrap();
        let fit = objective_nmf(
            &x.view(),
            &f.endmembers.as_array().view(),
            &f.abundances.as_array().view(),
        )
        .unwrap();
        assert!(fit.sqrt() / x.mapv(|a| a * a).sum().sqrt() <= 1e-3);
    }

    #[test]
    fn solve_validates_inputs() {
        let x = DataMatrix::new(random(5, 8, 70)).unwrap();
        let mut opts = SolverOptions::new(2);
        opts.lambda = 1.0;
        assert!(solve(&x, None, &opts).is_err());
        opts.lambda = -1.0;
        assert!(solve(&x, None, &opts).is_err());
        let neg = DataMatrix::new(array![[1.0, -1.0], [0.5, 0.5]]).unwrap();
        assert!(solve(&neg, None, &SolverOptions::new(1)).is_err());
        let g = build_knn_graph(
            &DataMatrix::new(random(2, 6, 71)).unwrap(),
            2,
            Weighting::Binary,
        )
        .unwrap();
        let mut opts = SolverOptions::new(2);
        opts.lambda = 1.0;
        assert!(matches!(
            solve(&x, Some(&laplacian(&g)), &opts),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn solve_reports_non_finite_factors() {
        let x = DataMatrix::new(array![[f64::MAX, f64::MAX], [f64::MAX, f64::MAX]]).unwrap();
        let mut opts = SolverOptions::new(1);
        opts.asc = false;
        assert!(matches!(
            solve(&x, None, &opts),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn solve_is_deterministic_and_generic() {
        let x = random(6, 20, 80);
        let mut opts = SolverOptions::new(2);
        opts.max_iter = 50;
        let a = solve(&DataMatrix::new(x.clone()).unwrap(), None, &opts).unwrap();
        let b = solve(&DataMatrix::new(x.clone()).unwrap(), None, &opts).unwrap();
        assert_eq!(a, b);
        let single = solve(&DataMatrix::new(x.mapv(|a| a as f32)).unwrap(), None, &opts).unwrap();
        for row in single.abundances.as_array().rows() {
            assert!((row.sum() - 1.0).abs() < 1e-5);
        }
    }
}
