//! Shared fixtures for the acceptance checks: seeded random instances and
//! the location of the bundled scene data.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unmix_core::data::LabelMap;
use unmix_core::graph::{
    build_knn_graph, build_spatial_graph, Neighbourhood, WeightGraph, Weighting,
};
use unmix_core::DataMatrix;

/// Directory holding the bundled `scene.json`, `library.csv` and `labels.csv`.
pub fn bundled_data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/data")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform on `[0, 1)`.
pub fn uniform(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| r.random::<f64>())
}

/// Nonnegative rows summing to one.
pub fn simplex_rows(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let mut v = uniform(r, rows, cols);
    for mut row in v.rows_mut() {
        let s = row.sum();
        row /= s;
    }
    v
}

/// One graph per construction/weighting family, at random sizes up to `n_max` nodes.
pub fn graph_zoo(r: &mut ChaCha8Rng, n_max: usize) -> Vec<(String, WeightGraph<f64>)> {
    let mut out = Vec::new();
    let rows = r.random_range(2..=10usize);
    let cols = r.random_range(2..=(n_max / rows).max(2));
    for nb in [Neighbourhood::Four, Neighbourhood::Eight] {
        out.push((
            format!("spatial {nb:?} {rows}x{cols}"),
            build_spatial_graph(rows, cols, nb).expect("spatial graph"),
        ));
    }
    let n = r.random_range(10..=n_max);
    let x = DataMatrix::new(uniform(r, 8, n)).expect("finite data");
    let p = r.random_range(1..=6usize);
    for w in [
        Weighting::Binary,
        Weighting::HeatKernel(None),
        Weighting::DotProduct,
    ] {
        out.push((
            format!("knn p={p} {w:?} N={n}"),
            build_knn_graph(&x, p, w).expect("knn graph"),
        ));
    }
    out
}

/// Random Voronoi label map in which every one of `classes` labels occurs.
pub fn random_label_map(r: &mut ChaCha8Rng, classes: usize) -> LabelMap {
    let rows = r.random_range(9..=45usize);
    let cols = r.random_range(9..=45usize);
    let sites: Vec<(f64, f64)> = (0..classes * 3)
        .map(|_| {
            (
                r.random::<f64>() * rows as f64,
                r.random::<f64>() * cols as f64,
            )
        })
        .collect();
    let mut labels = Array2::from_shape_fn((rows, cols), |(i, j)| {
        let d = |s: (f64, f64)| (s.0 - i as f64).powi(2) + (s.1 - j as f64).powi(2);
        let nearest = (0..sites.len())
            .min_by(|&a, &b| d(sites[a]).total_cmp(&d(sites[b])))
            .expect("at least one site");
        nearest % classes
    });
    for c in 0..classes {
        labels[[0, c]] = c;
    }
    LabelMap::with_classes(labels, classes).expect("every class present")
}

/// All permutations of `0..p`.
pub fn permutations(p: usize) -> Vec<Vec<usize>> {
    if p == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for perm in permutations(p - 1) {
        for pos in 0..=perm.len() {
            let mut next = perm.clone();
            next.insert(pos, p - 1);
            out.push(next);
        }
    }
    out
}
