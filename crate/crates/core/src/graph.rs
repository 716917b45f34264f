//! Pixel similarity graphs and their Laplacians.
//!
//! Weights are stored in compressed sparse rows holding both `(j, l)` and
//! `(l, j)`; column indices within a row are sorted. Node `n` is pixel `n` of
//! the row-major order used by [`crate::data::flatten`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default neighbour count for spectral kNN graphs.
pub const DEFAULT_KNN_P: usize = 5;

/// Square sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds from `(row, col) -> value` entries; keys outside `n` are a bug.
    fn from_map(n: usize, entries: &BTreeMap<(usize, usize), T>) -> Self {
        let mut indptr = vec![0; n + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        for (&(r, c), &v) in entries {
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix {
            n,
            indptr,
            indices,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(col, value)` pairs of row `r`, ascending in `col`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(i) => self.values[span.start + i],
            Err(_) => T::zero(),
        }
    }

    /// Sparse-dense product `self · rhs`.
    pub fn mul_dense(&self, rhs: &ArrayView2<'_, T>) -> Array2<T> {
        assert_eq!(rhs.nrows(), self.n, "sparse product dimension mismatch");
        let mut out = Array2::zeros((self.n, rhs.ncols()));
        for r in 0..self.n {
            let mut dst = out.row_mut(r);
            for (c, w) in self.row(r) {
                dst.scaled_add(w, &rhs.row(c));
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<T> {
        let mut out = Array2::zeros((self.n, self.n));
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                out[[r, c]] = v;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Neighbourhood {
    Four,
    Eight,
}

/// Edge weighting rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Weighting {
    /// Weight 1 on every edge.
    Binary,
    /// `exp(-‖x_j − x_l‖² / sigma_h)`; `None` picks the mean squared edge length.
    HeatKernel(Option<f64>),
    /// Cosine similarity clamped at zero.
    DotProduct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Construction {
    SpatialAdjacency {
        neighbourhood: Neighbourhood,
        rows: usize,
        cols: usize,
    },
    SpectralKnn {
        p: usize,
    },
}

/// Symmetric nonnegative weight matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightGraph<T> {
    weights: CsrMatrix<T>,
    /// Rule used; for heat kernels the resolved `sigma_h` is recorded.
    weighting: Weighting,
    construction: Construction,
}

impl<T: Scalar> WeightGraph<T> {
    pub fn n(&self) -> usize {
        self.weights.n
    }

    pub fn weights(&self) -> &CsrMatrix<T> {
        &self.weights
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    /// Undirected edges `(j, l, w)` with `j < l`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n()).flat_map(move |j| {
            self.weights
                .row(j)
                .filter(move |&(l, _)| l > j)
                .map(move |(l, w)| (j, l, w))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn degree_of(&self, j: usize) -> usize {
        self.weights.row(j).count()
    }

    /// Text edge list, one `j,l,weight` line per edge with `j < l`.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (j, l, w) in self.edges() {
            writeln!(out, "{j},{l},{w}").expect("writing to a String");
        }
        out
    }
}

fn from_edges<T: Scalar>(
    n: usize,
    edges: &BTreeMap<(usize, usize), T>,
    weighting: Weighting,
    construction: Construction,
) -> WeightGraph<T> {
    let mut both = BTreeMap::new();
    for (&(j, l), &w) in edges {
        debug_assert!(j < l);
        both.insert((j, l), w);
        both.insert((l, j), w);
    }
    WeightGraph {
        weights: CsrMatrix::from_map(n, &both),
        weighting,
        construction,
    }
}

/// 0-1 weighted 4- or 8-neighbourhood graph over a `rows x cols` image.
pub fn build_spatial_graph<T: Scalar>(
    rows: usize,
    cols: usize,
    neighbourhood: Neighbourhood,
) -> Result<WeightGraph<T>> {
    if rows.saturating_mul(cols) < 2 {
        return Err(Error::InvalidArgument(format!(
            "a {rows}x{cols} image has no pixel pairs"
        )));
    }
    let offsets: &[(isize, isize)] = match neighbourhood {
        Neighbourhood::Four => &[(0, 1), (1, 0)],
        Neighbourhood::Eight => &[(0, 1), (1, -1), (1, 0), (1, 1)],
    };
    let mut edges = BTreeMap::new();
    for r in 0..rows {
        for c in 0..cols {
            for &(dr, dc) in offsets {
                let (rr, cc) = (r as isize + dr, c as isize + dc);
                if rr < rows as isize && cc >= 0 && cc < cols as isize {
                    let (j, l) = (r * cols + c, rr as usize * cols + cc as usize);
                    edges.insert((j.min(l), j.max(l)), T::one());
                }
            }
        }
    }
    Ok(from_edges(
        rows * cols,
        &edges,
        Weighting::Binary,
        Construction::SpatialAdjacency {
            neighbourhood,
            rows,
            cols,
        },
    ))
}

fn squared_distance<T: Scalar>(x: &ArrayView2<'_, T>, j: usize, l: usize) -> T {
    x.column(j)
        .iter()
        .zip(x.column(l).iter())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum()
}

/// Union-symmetrized `p`-nearest-neighbour graph over the pixel spectra
/// (columns of `x`). Distance ties go to the lower pixel index.
pub fn build_knn_graph<T: Scalar>(
    x: &DataMatrix<T>,
    p: usize,
    weighting: Weighting,
) -> Result<WeightGraph<T>> {
    let n = x.pixels();
    if p == 0 || p >= n {
        return Err(Error::InvalidArgument(format!(
            "knn p must satisfy 0 < p < N = {n}, got {p}"
        )));
    }
    let view = x.view();
    let norms: Vec<T> = (0..n)
        .map(|j| view.column(j).iter().map(|&v| v * v).sum::<T>().sqrt())
        .collect();
    if matches!(weighting, Weighting::DotProduct) {
        if let Some(j) = norms.iter().position(|&v| v == T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "pixel {j} has zero norm; dot-product weighting is undefined"
            )));
        }
    }
    if let Weighting::HeatKernel(Some(s)) = weighting {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma_h must be positive, got {s}"
            )));
        }
    }

    // Squared distance of every retained (j < l) edge.
    let mut edges: BTreeMap<(usize, usize), T> = BTreeMap::new();
    let mut candidates: Vec<(T, usize)> = Vec::with_capacity(n - 1);
    for j in 0..n {
        candidates.clear();
        candidates.extend(
            (0..n)
                .filter(|&l| l != j)
                .map(|l| (squared_distance(&view, j, l), l)),
        );
        candidates.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .expect("finite distances")
                .then(a.1.cmp(&b.1))
        });
        for &(d, l) in &candidates[..p] {
            edges.insert((j.min(l), j.max(l)), d);
        }
    }

    let (weighting, weighted) = match weighting {
        Weighting::Binary => (
            weighting,
            edges
                .keys()
                .map(|&k| (k, T::one()))
                .collect::<BTreeMap<_, _>>(),
        ),
        Weighting::HeatKernel(sigma) => {
            let sigma = sigma.unwrap_or_else(|| {
                let mean = edges.values().map(|d| d.as_f64()).sum::<f64>() / edges.len() as f64;
                // All retained edges of zero length: any positive scale gives weight 1.
                if mean > 0.0 {
                    mean
                } else {
                    1.0
                }
            });
            let s = T::of(sigma);
            (
                Weighting::HeatKernel(Some(sigma)),
                edges.iter().map(|(&k, &d)| (k, (-d / s).exp())).collect(),
            )
        }
        Weighting::DotProduct => (
            weighting,
            edges
                .keys()
                .map(|&(j, l)| {
                    let dot: T = view
                        .column(j)
                        .iter()
                        .zip(view.column(l).iter())
                        .map(|(&a, &b)| a * b)
                        .sum();
                    ((j, l), (dot / (norms[j] * norms[l])).max(T::zero()))
                })
                .collect(),
        ),
    };
    Ok(from_edges(
        n,
        &weighted,
        weighting,
        Construction::SpectralKnn { p },
    ))
}

/// Degree vector `D_jj = Σ_l W_jl` and Laplacian `L = D − W`.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian<T> {
    degree: Array1<T>,
    matrix: CsrMatrix<T>,
    adjacency: CsrMatrix<T>,
}

impl<T: Scalar> Laplacian<T> {
    pub fn n(&self) -> usize {
        self.degree.len()
    }

    pub fn degree(&self) -> &Array1<T> {
        &self.degree
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.matrix
    }

    /// The weight matrix `W` the Laplacian was built from.
    pub fn adjacency(&self) -> &CsrMatrix<T> {
        &self.adjacency
    }
}

pub fn laplacian<T: Scalar>(g: &WeightGraph<T>) -> Laplacian<T> {
    let n = g.n();
    let degree = Array1::from_iter((0..n).map(|j| g.weights.row(j).map(|(_, w)| w).sum::<T>()));
    let mut entries = BTreeMap::new();
    for j in 0..n {
        entries.insert((j, j), degree[j]);
        for (l, w) in g.weights.row(j) {
            entries.insert((j, l), -w);
        }
    }
    Laplacian {
        degree,
        matrix: CsrMatrix::from_map(n, &entries),
        adjacency: g.weights.clone(),
    }
}

fn check_rows<T: Scalar>(v: &ArrayView2<'_, T>, n: usize) -> Result<()> {
    if v.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "abundances have {} rows, graph has {n} nodes",
            v.nrows()
        )));
    }
    Ok(())
}

/// Graph smoothness penalty `Tr(Vᵀ L V)`.
pub fn regularizer_value<T: Scalar>(v: &ArrayView2<'_, T>, lap: &Laplacian<T>) -> Result<T> {
    check_rows(v, lap.n())?;
    let lv = lap.matrix.mul_dense(v);
    Ok((&lv * v).sum())
}

/// The same penalty as the half sum over ordered pairs `½ Σ_{j,l} ‖z_j − z_l‖² W_jl`,
/// with `z_j` the rows of `v`.
pub fn regularizer_pairwise<T: Scalar>(v: &ArrayView2<'_, T>, g: &WeightGraph<T>) -> Result<T> {
    check_rows(v, g.n())?;
    let half = T::of(0.5);
    let mut total = T::zero();
    for j in 0..g.n() {
        for (l, w) in g.weights.row(j) {
            let d: T = v
                .row(j)
                .iter()
                .zip(v.row(l).iter())
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum();
            total += half * d * w;
        }
    }
    Ok(total)
}
