//! Regenerates the bundled fixtures under `crates/cli/data/`:
//! a four-material synthetic reflectance library, a Voronoi label map and a
//! scene config.
//!
//! cargo run -p unmix-core --example make_fixtures -- <out_dir>

use std::f64::consts::PI;
use std::path::PathBuf;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unmix_core::data::{LabelMap, Material, SpectralLibrary};
use unmix_core::io::{save_label_map, save_spectral_library};

const BANDS: usize = 224;
const MAP_SIZE: usize = 90;
const REGIONS: usize = 40;

fn gauss(w: f64, center: f64, width: f64) -> f64 {
    (-(w - center).powi(2) / (2.0 * width * width)).exp()
}

fn logistic(w: f64, center: f64, width: f64) -> f64 {
    1.0 / (1.0 + (-(w - center) / width).exp())
}

/// Smooth analytic stand-ins for four common library classes.
fn spectra(w: f64) -> [f64; 4] {
    let vegetation = 0.04 + 0.06 * gauss(w, 0.55, 0.04) + 0.46 * logistic(w, 0.71, 0.015)
        - 0.18 * logistic(w, 1.3, 0.08)
        - 0.12 * gauss(w, 1.45, 0.05)
        - 0.16 * gauss(w, 1.94, 0.07)
        - 0.05 * logistic(w, 2.3, 0.1);
    let soil = 0.08 + 0.30 * (1.0 - (-(w - 0.4) / 0.6).exp())
        - 0.04 * gauss(w, 1.41, 0.03)
        - 0.06 * gauss(w, 1.91, 0.04)
        - 0.03 * gauss(w, 2.21, 0.03);
    let clay = 0.55 + 0.2 * logistic(w, 0.6, 0.08)
        - 0.2 * gauss(w, 1.4, 0.02)
        - 0.15 * gauss(w, 1.91, 0.03)
        - 0.3 * gauss(w, 2.165, 0.015)
        - 0.32 * gauss(w, 2.205, 0.015);
    let dark = 0.02 + 0.09 * (-(w - 0.4) / 0.25).exp() + 0.01 * (2.0 * PI * w).sin().abs() * 0.5;
    [vegetation, soil, clay, dark].map(|r| r.clamp(0.0, 1.0))
}

fn main() {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "crates/cli/data".into()),
    );
    std::fs::create_dir_all(&out).expect("create output directory");

    let wavelengths: Vec<f64> = (0..BANDS)
        .map(|b| {
            let w = 0.4 + 2.1 * b as f64 / (BANDS - 1) as f64;
            (w * 1e6).round() / 1e6
        })
        .collect();
    let names = ["vegetation", "soil", "clay", "dark"];
    let mut columns: Vec<Vec<f64>> = (0..4).map(|_| Vec::with_capacity(BANDS)).collect();
    for &w in &wavelengths {
        for (col, r) in columns.iter_mut().zip(spectra(w)) {
            col.push((r * 1e6).round() / 1e6);
        }
    }
    let materials = names
        .iter()
        .zip(columns)
        .map(|(n, reflectance)| Material {
            name: format!("synthetic_{n}"),
            reflectance,
        })
        .collect();
    let lib = SpectralLibrary::new(wavelengths, materials).expect("valid library");
    save_spectral_library(out.join("library.csv"), &lib).expect("write library");

    let mut rng = ChaCha8Rng::seed_from_u64(2012);
    let sites: Vec<(f64, f64, usize)> = (0..REGIONS)
        .map(|i| {
            let r = rng.random::<f64>() * MAP_SIZE as f64;
            let c = rng.random::<f64>() * MAP_SIZE as f64;
            (r, c, if i < 4 { i } else { rng.random_range(0..4) })
        })
        .collect();
    let labels = Array2::from_shape_fn((MAP_SIZE, MAP_SIZE), |(r, c)| {
        let (r, c) = (r as f64 + 0.5, c as f64 + 0.5);
        sites
            .iter()
            .min_by(|a, b| {
                let da = (a.0 - r).powi(2) + (a.1 - c).powi(2);
                let db = (b.0 - r).powi(2) + (b.1 - c).powi(2);
                da.partial_cmp(&db).unwrap()
            })
            .unwrap()
            .2
    });
    let map = LabelMap::with_classes(labels, 4).expect("every class present");
    save_label_map(out.join("labels.csv"), &map).expect("write labels");
}
