//! Synthetic mixed-pixel scenes with known ground truth.
//!
//! A high-resolution label map is painted with library signatures, blurred
//! with a normalized `k x k` Gaussian, block-averaged by `k`, and finally
//! perturbed with white Gaussian noise at a target SNR. Ground-truth
//! abundances are the class indicator images pushed through the same linear
//! blur + block-average, so the clean low-resolution data equals `U Vᵀ`.

use std::path::PathBuf;

use ndarray::{Array2, Array3, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{
    flatten, AbundanceMatrix, DataMatrix, EndmemberMatrix, HyperCube, LabelMap, SpectralLibrary,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_FILTER_SIGMA: f64 = 0.5;
pub const DEFAULT_SCALE_FACTOR: usize = 3;

/// Scene generation parameters, serialized with exactly these keys.
///
/// `snr_db = null` disables noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub scale_factor: usize,
    pub filter_sigma: f64,
    pub snr_db: Option<f64>,
    pub seed: u64,
    pub material_names: Vec<String>,
    pub label_map_path: PathBuf,
}

impl SceneConfig {
    /// Checks the numeric fields. Errors carry the offending key name first.
    pub fn validate(&self) -> Result<()> {
        if self.scale_factor == 0 || self.scale_factor.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "scale_factor: must be a positive odd integer (the blur kernel is scale_factor x scale_factor), got {}",
                self.scale_factor
            )));
        }
        if !(self.filter_sigma > 0.0 && self.filter_sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "filter_sigma: must be positive, got {}",
                self.filter_sigma
            )));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::InvalidArgument(
                    "snr_db: must be finite or null (noise disabled)".into(),
                ));
            }
        }
        if self.material_names.is_empty() {
            return Err(Error::InvalidArgument(
                "material_names: must not be empty".into(),
            ));
        }
        Ok(())
    }

    fn snr_or_infinite(&self) -> f64 {
        self.snr_db.unwrap_or(f64::INFINITY)
    }
}

/// Square, odd-sized, normalized filter kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel<T> {
    weights: Array2<T>,
}

impl<T: Scalar> Kernel<T> {
    pub fn size(&self) -> usize {
        self.weights.nrows()
    }

    pub fn radius(&self) -> usize {
        self.size() / 2
    }

    pub fn weights(&self) -> &Array2<T> {
        &self.weights
    }
}

/// `k x k` Gaussian kernel with spread `sigma` (pixels), normalized to sum to one.
pub fn gaussian_kernel<T: Scalar>(k: usize, sigma: f64) -> Result<Kernel<T>> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "kernel size must be odd, got {k}"
        )));
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let h = (k / 2) as f64;
    let raw = Array2::from_shape_fn((k, k), |(i, j)| {
        let dr = i as f64 - h;
        let dc = j as f64 - h;
        (-(dr * dr + dc * dc) / (2.0 * sigma * sigma)).exp()
    });
    let total = raw.sum();
    Ok(Kernel {
        weights: raw.mapv(|w| T::of(w / total)),
    })
}

/// Mirror index into `[0, n)` without repeating the edge sample.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

fn filter_plane<T: Scalar>(plane: ndarray::ArrayView2<'_, T>, kernel: &Kernel<T>) -> Array2<T> {
    let (rows, cols) = plane.dim();
    let h = kernel.radius() as isize;
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        let mut acc = T::zero();
        for (i, krow) in kernel.weights.rows().into_iter().enumerate() {
            let rr = reflect(r as isize + i as isize - h, rows);
            for (j, &w) in krow.iter().enumerate() {
                let cc = reflect(c as isize + j as isize - h, cols);
                acc += w * plane[[rr, cc]];
            }
        }
        acc
    })
}

/// Per-band 2-D correlation with `kernel`, reflect-padded borders.
pub fn filter_cube<T: Scalar>(cube: &HyperCube<T>, kernel: &Kernel<T>) -> Result<HyperCube<T>> {
    if kernel.size() > cube.rows().min(cube.cols()) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} kernel larger than {}x{} image",
            kernel.size(),
            kernel.size(),
            cube.rows(),
            cube.cols()
        )));
    }
    let mut out = Array3::zeros(cube.values().dim());
    for (b, band) in cube.values().axis_iter(Axis(2)).enumerate() {
        out.index_axis_mut(Axis(2), b)
            .assign(&filter_plane(band, kernel));
    }
    HyperCube::new(out)
}

fn low_res_dims(rows: usize, cols: usize, k: usize) -> Result<(usize, usize)> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "scale factor must be at least 1".into(),
        ));
    }
    let (lr, lc) = (rows / k, cols / k);
    if lr == 0 || lc == 0 {
        return Err(Error::DimensionMismatch(format!(
            "downsampling {rows}x{cols} by {k} leaves an empty image"
        )));
    }
    Ok((lr, lc))
}

/// Non-overlapping `k x k` block means; incomplete trailing blocks are dropped.
pub fn downsample<T: Scalar>(cube: &HyperCube<T>, k: usize) -> Result<HyperCube<T>> {
    let (lr, lc) = low_res_dims(cube.rows(), cube.cols(), k)?;
    let area = T::of((k * k) as f64);
    let v = cube.values();
    let out = Array3::from_shape_fn((lr, lc, cube.bands()), |(r, c, b)| {
        let mut acc = T::zero();
        for i in 0..k {
            for j in 0..k {
                acc += v[[r * k + i, c * k + j, b]];
            }
        }
        acc / area
    });
    HyperCube::new(out)
}

/// Replaces each pixel's class label by the reflectance of the matching material.
pub fn assign_signatures<T: Scalar>(
    labels: &LabelMap,
    lib: &SpectralLibrary,
    names: &[String],
) -> Result<HyperCube<T>> {
    if labels.classes() != names.len() {
        return Err(Error::InvalidArgument(format!(
            "material_names: label map has {} classes but {} material names were given",
            labels.classes(),
            names.len()
        )));
    }
    let signatures = lib.endmembers::<T>(names)?;
    let u = signatures.as_array();
    let values = Array3::from_shape_fn((labels.rows(), labels.cols(), lib.bands()), |(r, c, b)| {
        u[[b, labels.labels()[[r, c]]]]
    });
    HyperCube::new(values)
}

/// Ground-truth abundances: each class indicator image run through the same
/// filter and block-average as the data. Rows follow row-major low-res pixel order.
pub fn reference_abundances<T: Scalar>(
    labels: &LabelMap,
    kernel: &Kernel<T>,
    k: usize,
) -> Result<AbundanceMatrix<T>> {
    let indicators = Array3::from_shape_fn(
        (labels.rows(), labels.cols(), labels.classes()),
        |(r, c, class)| {
            if labels.labels()[[r, c]] == class {
                T::one()
            } else {
                T::zero()
            }
        },
    );
    let low = downsample(&filter_cube(&HyperCube::new(indicators)?, kernel)?, k)?;
    // Flattened indicators are `classes x pixels`; abundances are the transpose.
    let v = flatten(&low).into_array().reversed_axes();
    AbundanceMatrix::new(v.as_standard_layout().into_owned())
}

/// What the noise stage did to the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseStats {
    /// `None` when noise was disabled.
    pub target_snr_db: Option<f64>,
    pub realized_snr_db: Option<f64>,
    pub clamped_fraction: f64,
}

/// Adds i.i.d. zero-mean Gaussian noise with variance `ΣX² / (L·N·10^(snr/10))`,
/// then clamps negatives to zero. An infinite `snr_db` disables noise.
pub fn add_noise_snr<T: Scalar>(
    x: &DataMatrix<T>,
    snr_db: f64,
    seed: u64,
) -> Result<(DataMatrix<T>, NoiseStats)> {
    let signal: f64 = x.as_array().iter().map(|v| v.as_f64().powi(2)).sum();
    if signal == 0.0 {
        return Err(Error::ZeroSignal);
    }
    if snr_db.is_nan() {
        return Err(Error::InvalidArgument("snr_db is NaN".into()));
    }
    if snr_db == f64::INFINITY {
        return Ok((
            x.clone(),
            NoiseStats {
                target_snr_db: None,
                realized_snr_db: None,
                clamped_fraction: 0.0,
            },
        ));
    }
    let count = x.as_array().len();
    let sigma = (signal / (count as f64 * 10f64.powf(snr_db / 10.0))).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_power = 0.0;
    let mut clamped = 0usize;
    let mut out = x.as_array().clone();
    for v in out.iter_mut() {
        let e: f64 = StandardNormal.sample(&mut rng);
        let e = sigma * e;
        noise_power += e * e;
        let noisy = v.as_f64() + e;
        if noisy < 0.0 {
            clamped += 1;
            *v = T::zero();
        } else {
            *v = T::of(noisy);
        }
    }
    let stats = NoiseStats {
        target_snr_db: Some(snr_db),
        realized_snr_db: Some(10.0 * (signal / noise_power).log10()),
        clamped_fraction: clamped as f64 / count as f64,
    };
    Ok((DataMatrix::new(out)?, stats))
}

/// A generated low-resolution scene and its ground truth.
#[derive(Debug, Clone)]
pub struct SimulatedScene<T> {
    /// Noisy, clamped observation.
    pub observed: DataMatrix<T>,
    /// Noiseless observation (`true_endmembers · true_abundancesᵀ` up to rounding).
    pub clean: DataMatrix<T>,
    pub true_endmembers: EndmemberMatrix<T>,
    pub true_abundances: AbundanceMatrix<T>,
    pub config: SceneConfig,
    pub noise_stats: NoiseStats,
    /// Low-resolution image height.
    pub rows: usize,
    /// Low-resolution image width.
    pub cols: usize,
}

/// Runs the full generation recipe: paint, blur, block-average, flatten, add noise.
pub fn simulate<T: Scalar>(
    config: &SceneConfig,
    lib: &SpectralLibrary,
    labels: &LabelMap,
) -> Result<SimulatedScene<T>> {
    config.validate()?;
    let k = config.scale_factor;
    let kernel = gaussian_kernel::<T>(k, config.filter_sigma)?;
    let painted = assign_signatures::<T>(labels, lib, &config.material_names)?;
    let low = downsample(&filter_cube(&painted, &kernel)?, k)?;
    let (rows, cols) = (low.rows(), low.cols());
    let clean = flatten(&low);
    let true_endmembers = lib.endmembers::<T>(&config.material_names)?;
    let true_abundances = reference_abundances(labels, &kernel, k)?;
    let (observed, noise_stats) = add_noise_snr(&clean, config.snr_or_infinite(), config.seed)?;
    Ok(SimulatedScene {
        observed,
        clean,
        true_endmembers,
        true_abundances,
        config: config.clone(),
        noise_stats,
        rows,
        cols,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    use crate::data::Material;

    fn lib2() -> SpectralLibrary {
        SpectralLibrary::new(
            vec![0.4, 0.5],
            vec![
                Material {
                    name: "m0".into(),
                    reflectance: vec![0.1, 0.2],
                },
                Material {
                    name: "m1".into(),
                    reflectance: vec![0.7, 0.3],
                },
            ],
        )
        .unwrap()
    }

    fn names(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    /// Independent 2-D correlation with explicit mirror padding.
    fn oracle_filter(plane: &Array2<f64>, kernel: &Array2<f64>) -> Array2<f64> {
        let (rows, cols) = plane.dim();
        let h = kernel.nrows() / 2;
        let mut padded = Array2::zeros((rows + 2 * h, cols + 2 * h));
        let mirror = |i: isize, n: usize| -> usize {
            if i < 0 {
                (-i) as usize
            } else if i as usize >= n {
                2 * (n - 1) - i as usize
            } else {
                i as usize
            }
        };
        for pr in 0..rows + 2 * h {
            for pc in 0..cols + 2 * h {
                let r = mirror(pr as isize - h as isize, rows);
                let c = mirror(pc as isize - h as isize, cols);
                padded[[pr, pc]] = plane[[r, c]];
            }
        }
        let mut out = Array2::zeros((rows, cols));
        for r in 0..rows {
            for c in 0..cols {
                let mut s = 0.0;
                for i in 0..kernel.nrows() {
                    for j in 0..kernel.ncols() {
                        s += kernel[[i, j]] * padded[[r + i, c + j]];
                    }
                }
                out[[r, c]] = s;
            }
        }
        out
    }

    fn oracle_block_mean(plane: &Array2<f64>, k: usize) -> Array2<f64> {
        let (lr, lc) = (plane.nrows() / k, plane.ncols() / k);
        let mut out = Array2::zeros((lr, lc));
        for r in 0..lr {
            for c in 0..lc {
                let block = plane.slice(ndarray::s![r * k..(r + 1) * k, c * k..(c + 1) * k]);
                out[[r, c]] = block.sum() / (k * k) as f64;
            }
        }
        out
    }

    #[test]
    fn kernel_trivial_cases() {
        let k1 = gaussian_kernel::<f64>(1, 0.3).unwrap();
        assert_eq!(k1.weights(), &array![[1.0]]);
        let wide = gaussian_kernel::<f64>(3, 1e6).unwrap();
        for &w in wide.weights() {
            assert_abs_diff_eq!(w, 1.0 / 9.0, epsilon = 1e-10);
        }
        assert!(gaussian_kernel::<f64>(4, 1.0).is_err());
        assert!(gaussian_kernel::<f64>(3, 0.0).is_err());
    }

    #[test]
    fn kernel_sigma_half_matches_hand_evaluation() {
        // Unnormalized: center 1, edge e^-2, corner e^-4.
        let (e2, e4) = ((-2.0f64).exp(), (-4.0f64).exp());
        let total = 1.0 + 4.0 * e2 + 4.0 * e4;
        let k = gaussian_kernel::<f64>(3, 0.5).unwrap();
        let w = k.weights();
        assert_abs_diff_eq!(w[[1, 1]], 1.0 / total, epsilon = 1e-14);
        assert_abs_diff_eq!(w[[0, 1]], e2 / total, epsilon = 1e-14);
        assert_abs_diff_eq!(w[[0, 0]], e4 / total, epsilon = 1e-14);
        assert_abs_diff_eq!(w[[1, 1]], 0.61934, epsilon = 1e-5);
        assert_abs_diff_eq!(w[[1, 0]], 0.08382, epsilon = 1e-5);
        assert_abs_diff_eq!(w[[2, 2]], 0.01134, epsilon = 1e-5);
        assert_abs_diff_eq!(w.sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kernel_is_symmetric_under_rotation_and_reflection() {
        for (size, sigma) in [(3, 0.5), (5, 1.3), (7, 2.0)] {
            let k = gaussian_kernel::<f64>(size, sigma).unwrap();
            let w = k.weights();
            let n = size - 1;
            for i in 0..size {
                for j in 0..size {
                    assert!(w[[i, j]] > 0.0);
                    assert_eq!(w[[i, j]], w[[j, n - i]]);
                    assert_eq!(w[[i, j]], w[[i, n - j]]);
                    assert_eq!(w[[i, j]], w[[j, i]]);
                }
            }
            assert_abs_diff_eq!(w.sum(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn reflect_skips_the_edge_sample() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(-2, 5), 2);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(6, 5), 2);
        assert_eq!(reflect(0, 1), 0);
    }

    #[test]
    fn filter_constant_and_identity() {
        let kernel = gaussian_kernel::<f64>(3, 0.8).unwrap();
        let cube = HyperCube::new(Array3::from_elem((4, 5, 2), 0.37)).unwrap();
        let out = filter_cube(&cube, &kernel).unwrap();
        for &v in out.values() {
            assert_abs_diff_eq!(v, 0.37, epsilon = 1e-15);
        }
        let ramp = HyperCube::new(Array3::from_shape_fn((4, 5, 2), |(r, c, b)| {
            (r + 2 * c + b) as f64
        }))
        .unwrap();
        let id = gaussian_kernel::<f64>(1, 1.0).unwrap();
        assert_eq!(filter_cube(&ramp, &id).unwrap(), ramp);
        let big = gaussian_kernel::<f64>(5, 1.0).unwrap();
        assert!(filter_cube(&ramp, &big).is_err());
    }

    #[test]
    fn filter_impulse_reproduces_kernel() {
        let kernel = gaussian_kernel::<f64>(3, 0.5).unwrap();
        let mut plane = Array3::zeros((5, 5, 1));
        plane[[2, 2, 0]] = 1.0;
        let out = filter_cube(&HyperCube::new(plane.clone()).unwrap(), &kernel).unwrap();
        let expected = oracle_filter(&plane.index_axis(Axis(2), 0).to_owned(), kernel.weights());
        for r in 0..5 {
            for c in 0..5 {
                assert_abs_diff_eq!(out.values()[[r, c, 0]], expected[[r, c]], epsilon = 1e-15);
                let inside = (1..=3).contains(&r) && (1..=3).contains(&c);
                let want = if inside {
                    kernel.weights()[[r - 1, c - 1]]
                } else {
                    0.0
                };
                assert_abs_diff_eq!(out.values()[[r, c, 0]], want, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn filter_matches_oracle_near_borders() {
        let kernel = gaussian_kernel::<f64>(5, 1.1).unwrap();
        let plane = Array2::from_shape_fn((6, 7), |(r, c)| ((r * 7 + c) as f64).sin().abs());
        let cube = HyperCube::new(plane.clone().insert_axis(Axis(2))).unwrap();
        let out = filter_cube(&cube, &kernel).unwrap();
        let expected = oracle_filter(&plane, kernel.weights());
        for ((r, c), &e) in expected.indexed_iter() {
            assert_abs_diff_eq!(out.values()[[r, c, 0]], e, epsilon = 1e-14);
        }
    }

    #[test]
    fn downsample_cases() {
        let cube = HyperCube::new(Array3::from_elem((3, 3, 1), 2.5)).unwrap();
        assert_eq!(
            downsample(&cube, 3).unwrap().values(),
            &Array3::from_elem((1, 1, 1), 2.5)
        );
        let ramp = Array2::from_shape_fn((6, 6), |(r, c)| (r * 6 + c) as f64);
        let cube = HyperCube::new(ramp.clone().insert_axis(Axis(2))).unwrap();
        assert_eq!(downsample(&cube, 1).unwrap(), cube);
        let out = downsample(&cube, 3).unwrap();
        let expected = oracle_block_mean(&ramp, 3);
        for ((r, c), &e) in expected.indexed_iter() {
            assert_abs_diff_eq!(out.values()[[r, c, 0]], e, epsilon = 1e-12);
        }
        // Trailing rows/cols dropped.
        let cube = HyperCube::new(Array3::from_elem((7, 8, 1), 1.0)).unwrap();
        assert_eq!(downsample(&cube, 3).unwrap().values().dim(), (2, 2, 1));
        let tiny = HyperCube::new(Array3::from_elem((2, 2, 1), 1.0)).unwrap();
        assert!(downsample(&tiny, 3).is_err());
    }

    #[test]
    fn assign_signatures_looks_up_labels() {
        let lib = lib2();
        let one = LabelMap::new(array![[0]]).unwrap();
        let cube = assign_signatures::<f64>(&one, &lib, &names(&["m0"])).unwrap();
        assert_eq!(cube.values(), &array![[[0.1, 0.2]]]);

        let two = LabelMap::new(array![[0, 1]]).unwrap();
        let cube = assign_signatures::<f64>(&two, &lib, &names(&["m0", "m1"])).unwrap();
        assert_eq!(cube.values(), &array![[[0.1, 0.2], [0.7, 0.3]]]);

        let checker = LabelMap::new(Array2::from_shape_fn((6, 6), |(r, c)| (r + c) % 2)).unwrap();
        let cube = assign_signatures::<f64>(&checker, &lib, &names(&["m1", "m0"])).unwrap();
        for r in 0..6 {
            for c in 0..6 {
                let m = if (r + c) % 2 == 0 { "m1" } else { "m0" };
                let sig = &lib.material(m).unwrap().reflectance;
                for (b, &expected) in sig.iter().enumerate() {
                    assert_eq!(cube.values()[[r, c, b]], expected);
                }
            }
        }

        assert!(assign_signatures::<f64>(&two, &lib, &names(&["m0"])).is_err());
        assert!(matches!(
            assign_signatures::<f64>(&two, &lib, &names(&["m0", "zz"])),
            Err(Error::UnknownMaterial(_))
        ));
    }

    #[test]
    fn reference_abundances_cases() {
        let uniform = LabelMap::with_classes(Array2::from_elem((6, 6), 1), 2);
        // Class 0 never occurs, so the map is rejected; use a single-class map instead.
        assert!(uniform.is_err());
        let single = LabelMap::new(Array2::from_elem((6, 6), 0)).unwrap();
        let k3 = gaussian_kernel::<f64>(3, 0.5).unwrap();
        let v = reference_abundances(&single, &k3, 3).unwrap();
        assert_eq!(v.as_array().dim(), (4, 1));
        for &a in v.as_array() {
            assert_abs_diff_eq!(a, 1.0, epsilon = 1e-15);
        }

        // Block of 6 class-0 and 3 class-1 pixels with an identity kernel.
        let labels = LabelMap::new(array![[0, 0, 0], [0, 0, 0], [1, 1, 1]]).unwrap();
        let id = gaussian_kernel::<f64>(1, 1.0).unwrap();
        let v = reference_abundances(&labels, &id, 3).unwrap();
        assert_abs_diff_eq!(v.as_array()[[0, 0]], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.as_array()[[0, 1]], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn reference_abundances_match_indicator_oracle() {
        let mut state = 12345u64;
        let labels = Array2::from_shape_fn((9, 9), |_| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 33) % 2) as usize
        });
        let map = LabelMap::new(labels.clone()).unwrap();
        let kernel = gaussian_kernel::<f64>(3, 0.5).unwrap();
        let v = reference_abundances(&map, &kernel, 3).unwrap();
        for class in 0..2 {
            let indicator = labels.mapv(|l| if l == class { 1.0 } else { 0.0 });
            let expected = oracle_block_mean(&oracle_filter(&indicator, kernel.weights()), 3);
            for ((r, c), &e) in expected.indexed_iter() {
                assert_abs_diff_eq!(v.as_array()[[r * 3 + c, class]], e, epsilon = 1e-14);
            }
        }
        assert!(v.max_row_sum_error() <= 1e-9);
    }

    #[test]
    fn noise_disabled_and_zero_signal() {
        let x = DataMatrix::new(Array2::from_elem((2, 3), 0.5)).unwrap();
        let (y, stats) = add_noise_snr(&x, f64::INFINITY, 1).unwrap();
        assert_eq!(y, x);
        assert_eq!(stats.clamped_fraction, 0.0);
        assert_eq!(stats.target_snr_db, None);
        let zero = DataMatrix::new(Array2::<f64>::zeros((2, 3))).unwrap();
        assert!(matches!(
            add_noise_snr(&zero, 30.0, 1),
            Err(Error::ZeroSignal)
        ));
    }

    #[test]
    fn noise_hits_target_snr_and_is_reproducible() {
        let x = DataMatrix::new(Array2::<f64>::ones((100, 1000))).unwrap();
        for seed in [0, 7, 99] {
            let (y, stats) = add_noise_snr(&x, 30.0, seed).unwrap();
            // Independent realized-SNR estimate from the output (no clamping at 30 dB on ones).
            let noise: f64 = y.as_array().iter().map(|v| (v - 1.0).powi(2)).sum();
            let realized = 10.0 * (1e5 / noise).log10();
            assert!((realized - 30.0).abs() <= 0.2, "realized {realized}");
            assert_abs_diff_eq!(stats.realized_snr_db.unwrap(), realized, epsilon = 1e-9);
            assert_eq!(stats.clamped_fraction, 0.0);
            let (y2, _) = add_noise_snr(&x, 30.0, seed).unwrap();
            assert_eq!(y, y2);
        }
        let (a, _) = add_noise_snr(&x, 30.0, 1).unwrap();
        let (b, _) = add_noise_snr(&x, 30.0, 2).unwrap();
        assert_ne!(a, b);
    }

    fn config(names: Vec<String>, snr: Option<f64>) -> SceneConfig {
        SceneConfig {
            scale_factor: 3,
            filter_sigma: 0.5,
            snr_db: snr,
            seed: 4,
            material_names: names,
            label_map_path: PathBuf::from("unused.csv"),
        }
    }

    #[test]
    fn single_class_scene_is_pure() {
        let labels = LabelMap::new(Array2::from_elem((6, 9), 0)).unwrap();
        let scene = simulate::<f64>(&config(names(&["m1"]), None), &lib2(), &labels).unwrap();
        assert_eq!((scene.rows, scene.cols), (2, 3));
        for px in scene.observed.as_array().columns() {
            assert_abs_diff_eq!(px[0], 0.7, epsilon = 1e-15);
            assert_abs_diff_eq!(px[1], 0.3, epsilon = 1e-15);
        }
        for &a in scene.true_abundances.as_array() {
            assert_abs_diff_eq!(a, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn noiseless_two_class_scene_obeys_linear_mixing() {
        let labels = LabelMap::new(Array2::from_shape_fn((9, 9), |(r, c)| {
            usize::from(r * r + c > 20)
        }))
        .unwrap();
        let scene = simulate::<f64>(&config(names(&["m0", "m1"]), None), &lib2(), &labels).unwrap();
        let product = scene
            .true_endmembers
            .as_array()
            .dot(&scene.true_abundances.as_array().t());
        let diff = (&product - scene.observed.as_array())
            .mapv(|v| v * v)
            .sum()
            .sqrt();
        let norm = scene.observed.as_array().mapv(|v| v * v).sum().sqrt();
        assert!(diff / norm <= 1e-9);
        assert!(scene.true_abundances.max_row_sum_error() <= 1e-9);
    }

    #[test]
    fn config_validation_names_keys() {
        let mut c = config(names(&["m0", "m1"]), Some(30.0));
        c.filter_sigma = -1.0;
        assert!(c
            .validate()
            .unwrap_err()
            .to_string()
            .contains("filter_sigma"));
        c.filter_sigma = 0.5;
        c.scale_factor = 2;
        assert!(c
            .validate()
            .unwrap_err()
            .to_string()
            .contains("scale_factor"));
    }

    #[test]
    fn config_json_uses_exact_keys() {
        let c = config(names(&["m0", "m1"]), None);
        let value = serde_json::to_value(&c).unwrap();
        let mut keys: Vec<&str> = value
            .as_object()
            .unwrap()
            .keys()
            .map(String::as_str)
            .collect();
        keys.sort_unstable();
        assert_eq!(
            keys,
            [
                "filter_sigma",
                "label_map_path",
                "material_names",
                "scale_factor",
                "seed",
                "snr_db"
            ]
        );
        let back: SceneConfig = serde_json::from_value(value).unwrap();
        assert_eq!(back, c);
        let extra = r#"{"scale_factor":3,"filter_sigma":0.5,"snr_db":30,"seed":1,
            "material_names":["a","b"],"label_map_path":"x","bogus":1}"#;
        assert!(serde_json::from_str::<SceneConfig>(extra).is_err());
    }
}
