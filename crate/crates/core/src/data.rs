//! Domain containers for spectra, image cubes, label maps and factor matrices,
//! plus the cube <-> data-matrix layout conversion.
//!
//! Pixels are always ordered row-major: pixel `(r, c)` of a `rows x cols`
//! image is column `r * cols + c` of the data matrix and row `r * cols + c`
//! of an abundance matrix. Graph construction relies on the same order.

use std::collections::HashSet;

use ndarray::{Array2, Array3, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One named reflectance spectrum of a library.
#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub name: String,
    pub reflectance: Vec<f64>,
}

/// Wavelength grid (micrometers) with reflectance spectra sampled on it.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralLibrary {
    wavelengths: Vec<f64>,
    materials: Vec<Material>,
}

impl SpectralLibrary {
    pub fn new(wavelengths: Vec<f64>, materials: Vec<Material>) -> Result<Self> {
        if wavelengths.is_empty() {
            return Err(Error::InvalidLibrary("no wavelengths".into()));
        }
        if let Some(w) = wavelengths.iter().find(|w| !w.is_finite()) {
            return Err(Error::InvalidLibrary(format!("non-finite wavelength {w}")));
        }
        if let Some(i) = wavelengths.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidLibrary(format!(
                "wavelengths not strictly increasing at index {}",
                i + 1
            )));
        }
        let mut seen = HashSet::new();
        for m in &materials {
            if !seen.insert(m.name.as_str()) {
                return Err(Error::InvalidLibrary(format!(
                    "duplicate material name {:?}",
                    m.name
                )));
            }
            if m.reflectance.len() != wavelengths.len() {
                return Err(Error::InvalidLibrary(format!(
                    "material {:?} has {} samples, expected {}",
                    m.name,
                    m.reflectance.len(),
                    wavelengths.len()
                )));
            }
            if let Some(r) = m.reflectance.iter().find(|r| !(0.0..=1.0).contains(*r)) {
                return Err(Error::InvalidLibrary(format!(
                    "material {:?} has reflectance {r} outside [0, 1]",
                    m.name
                )));
            }
        }
        Ok(SpectralLibrary {
            wavelengths,
            materials,
        })
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn materials(&self) -> &[Material] {
        &self.materials
    }

    pub fn bands(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn material(&self, name: &str) -> Option<&Material> {
        self.materials.iter().find(|m| m.name == name)
    }

    /// Stacks the named signatures as the columns of an `L x P` matrix.
    pub fn endmembers<T: Scalar>(&self, names: &[String]) -> Result<EndmemberMatrix<T>> {
        let mut u = Array2::zeros((self.bands(), names.len()));
        for (j, name) in names.iter().enumerate() {
            let m = self
                .material(name)
                .ok_or_else(|| Error::UnknownMaterial(name.clone()))?;
            for (b, &r) in m.reflectance.iter().enumerate() {
                u[[b, j]] = T::of(r);
            }
        }
        EndmemberMatrix::new(u)
    }
}

/// Image cube indexed `[row][col][band]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube<T> {
    values: Array3<T>,
}

impl<T: Scalar> HyperCube<T> {
    pub fn new(values: Array3<T>) -> Result<Self> {
        let (r, c, b) = values.dim();
        if r == 0 || c == 0 || b == 0 {
            return Err(Error::DimensionMismatch(format!(
                "cube dimensions must be positive, got {r}x{c}x{b}"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "cube contains non-finite values".into(),
            ));
        }
        Ok(HyperCube { values })
    }

    pub fn rows(&self) -> usize {
        self.values.dim().0
    }

    pub fn cols(&self) -> usize {
        self.values.dim().1
    }

    pub fn bands(&self) -> usize {
        self.values.dim().2
    }

    pub fn values(&self) -> &Array3<T> {
        &self.values
    }

    pub fn into_values(self) -> Array3<T> {
        self.values
    }
}

/// Observation matrix `X`, one column per pixel (`bands x pixels`).
///
/// Entries are finite; solvers additionally require them to be nonnegative
/// and check that on entry.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix<T> {
    x: Array2<T>,
}

impl<T: Scalar> DataMatrix<T> {
    pub fn new(x: Array2<T>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::DimensionMismatch(
                "data matrix must be non-empty".into(),
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "data matrix contains non-finite values".into(),
            ));
        }
        Ok(DataMatrix { x })
    }

    pub fn bands(&self) -> usize {
        self.x.nrows()
    }

    pub fn pixels(&self) -> usize {
        self.x.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, T> {
        self.x.view()
    }

    pub fn pixel(&self, n: usize) -> ArrayView1<'_, T> {
        self.x.column(n)
    }

    pub fn as_array(&self) -> &Array2<T> {
        &self.x
    }

    pub fn into_array(self) -> Array2<T> {
        self.x
    }

    pub fn is_nonnegative(&self) -> bool {
        self.x.iter().all(|&v| v >= T::zero())
    }
}

/// Integer class map of a high-resolution scene.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    labels: Array2<usize>,
    classes: usize,
}

impl LabelMap {
    /// Builds a label map; the class count is `max(label) + 1` and every class
    /// below it must occur.
    pub fn new(labels: Array2<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidLabels("empty label map".into()));
        }
        let classes = labels.iter().copied().max().unwrap_or(0) + 1;
        Self::with_classes(labels, classes)
    }

    pub fn with_classes(labels: Array2<usize>, classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidLabels("empty label map".into()));
        }
        let mut present = vec![false; classes];
        for &l in labels.iter() {
            if l >= classes {
                return Err(Error::InvalidLabels(format!(
                    "label {l} out of range for {classes} classes"
                )));
            }
            present[l] = true;
        }
        if let Some(missing) = present.iter().position(|p| !p) {
            return Err(Error::InvalidLabels(format!(
                "class {missing} never occurs"
            )));
        }
        Ok(LabelMap { labels, classes })
    }

    pub fn rows(&self) -> usize {
        self.labels.nrows()
    }

    pub fn cols(&self) -> usize {
        self.labels.ncols()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> &Array2<usize> {
        &self.labels
    }
}

/// Abundance fractions `V`, one row per pixel and one column per endmember.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceMatrix<T> {
    v: Array2<T>,
}

impl<T: Scalar> AbundanceMatrix<T> {
    pub fn new(v: Array2<T>) -> Result<Self> {
        if v.iter().any(|&a| !a.is_finite() || a < T::zero()) {
            return Err(Error::InvalidArgument(
                "abundances must be finite and nonnegative".into(),
            ));
        }
        Ok(AbundanceMatrix { v })
    }

    pub fn pixels(&self) -> usize {
        self.v.nrows()
    }

    pub fn endmembers(&self) -> usize {
        self.v.ncols()
    }

    pub fn as_array(&self) -> &Array2<T> {
        &self.v
    }

    pub fn into_array(self) -> Array2<T> {
        self.v
    }

    /// Largest deviation of a row sum from one.
    pub fn max_row_sum_error(&self) -> T {
        self.v
            .sum_axis(Axis(1))
            .iter()
            .fold(T::zero(), |acc, &s| acc.max((s - T::one()).abs()))
    }
}

/// Endmember signatures `U`, one column per endmember (`bands x P`).
#[derive(Debug, Clone, PartialEq)]
pub struct EndmemberMatrix<T> {
    u: Array2<T>,
}

impl<T: Scalar> EndmemberMatrix<T> {
    pub fn new(u: Array2<T>) -> Result<Self> {
        if u.iter().any(|&a| !a.is_finite() || a < T::zero()) {
            return Err(Error::InvalidArgument(
                "endmembers must be finite and nonnegative".into(),
            ));
        }
        Ok(EndmemberMatrix { u })
    }

    pub fn bands(&self) -> usize {
        self.u.nrows()
    }

    pub fn endmembers(&self) -> usize {
        self.u.ncols()
    }

    pub fn as_array(&self) -> &Array2<T> {
        &self.u
    }

    pub fn into_array(self) -> Array2<T> {
        self.u
    }
}

/// Lays the cube out as `bands x (rows * cols)`, pixels in row-major order.
pub fn flatten<T: Scalar>(cube: &HyperCube<T>) -> DataMatrix<T> {
    let (rows, cols, bands) = cube.values.dim();
    let x = Array2::from_shape_fn((bands, rows * cols), |(b, n)| {
        cube.values[[n / cols, n % cols, b]]
    });
    DataMatrix { x }
}

/// Inverse of [`flatten`].
pub fn unflatten<T: Scalar>(x: &DataMatrix<T>, rows: usize, cols: usize) -> Result<HyperCube<T>> {
    if rows == 0 || cols == 0 || rows.checked_mul(cols) != Some(x.pixels()) {
        return Err(Error::DimensionMismatch(format!(
            "{rows}x{cols} image does not hold {} pixels",
            x.pixels()
        )));
    }
    let values = Array3::from_shape_fn((rows, cols, x.bands()), |(r, c, b)| x.x[[b, r * cols + c]]);
    Ok(HyperCube { values })
}
