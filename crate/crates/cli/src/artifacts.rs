//! On-disk layouts of scene directories, run directories and manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use unmix_core::io::{load_matrix, save_matrix};
use unmix_core::simulate::{NoiseStats, SceneConfig};
use unmix_core::solver::SolverOptions;
use unmix_core::{AbundanceMatrix, DataMatrix, EndmemberMatrix, SimulatedScene};

use crate::failure::{from_core, CmdResult, Failure};

pub const OBSERVED: &str = "observed.f64m";
pub const ENDMEMBERS: &str = "endmembers.f64m";
pub const ABUNDANCES: &str = "abundances.f64m";
pub const SCENE_JSON: &str = "scene.json";
pub const U_FILE: &str = "U.f64m";
pub const V_FILE: &str = "V.f64m";
pub const TRACE_CSV: &str = "trace.csv";
pub const RUN_JSON: &str = "run.json";
pub const MANIFEST: &str = "manifest.json";

/// `scene.json`: generation config, noise outcome and image geometry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneMeta {
    pub config: SceneConfig,
    pub noise_stats: NoiseStats,
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
    pub wavelengths: Vec<f64>,
}

/// A scene directory loaded back from disk.
pub struct SceneDir {
    pub meta: SceneMeta,
    pub observed: DataMatrix,
    pub endmembers: EndmemberMatrix,
    pub abundances: AbundanceMatrix,
}

/// Graph settings as recorded in `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub kind: String,
    pub knn_p: Option<usize>,
    pub weighting: String,
    pub sigma_h: Option<f64>,
    pub edges: usize,
}

/// `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub options: SolverOptions,
    /// `"flag"`, `"pca"` or `"scene"`.
    pub p_source: String,
    pub graph: Option<GraphRecord>,
    pub iterations_run: usize,
    pub converged: bool,
    pub final_objective: Option<f64>,
    pub degenerate_rows: usize,
}

/// `manifest.json`, written once per successful command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub version: String,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir)
        .map_err(|e| Failure::usage(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_text(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text)
        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::usage(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CmdResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn save(path: PathBuf, m: &Array2<f64>) -> CmdResult {
    save_matrix(&path, m).map_err(|e| from_core(&path.display().to_string(), e))
}

fn load(path: PathBuf) -> CmdResult<Array2<f64>> {
    load_matrix(&path).map_err(|e| from_core(&path.display().to_string(), e))
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> CmdResult {
    write_json(&dir.join(MANIFEST), manifest)
}

pub fn write_scene(dir: &Path, scene: &SimulatedScene, wavelengths: &[f64]) -> CmdResult {
    create_dir(dir)?;
    save(dir.join(OBSERVED), scene.observed.as_array())?;
    save(dir.join(ENDMEMBERS), scene.true_endmembers.as_array())?;
    save(dir.join(ABUNDANCES), scene.true_abundances.as_array())?;
    write_json(
        &dir.join(SCENE_JSON),
        &SceneMeta {
            config: scene.config.clone(),
            noise_stats: scene.noise_stats,
            rows: scene.rows,
            cols: scene.cols,
            bands: scene.observed.bands(),
            wavelengths: wavelengths.to_vec(),
        },
    )
}

pub fn read_scene(dir: &Path) -> CmdResult<SceneDir> {
    if !dir.is_dir() {
        return Err(Failure::usage(format!(
            "scene directory {} does not exist",
            dir.display()
        )));
    }
    let meta: SceneMeta = read_json(&dir.join(SCENE_JSON))?;
    let observed =
        DataMatrix::new(load(dir.join(OBSERVED))?).map_err(|e| from_core("observed data", e))?;
    let endmembers = EndmemberMatrix::new(load(dir.join(ENDMEMBERS))?)
        .map_err(|e| from_core("scene endmembers", e))?;
    let abundances = AbundanceMatrix::new(load(dir.join(ABUNDANCES))?)
        .map_err(|e| from_core("scene abundances", e))?;
    if observed.pixels() != meta.rows * meta.cols || observed.bands() != endmembers.bands() {
        return Err(Failure::usage(format!(
            "scene {} is inconsistent: {}x{} data for a {}x{} image with {} bands",
            dir.display(),
            observed.bands(),
            observed.pixels(),
            meta.rows,
            meta.cols,
            endmembers.bands()
        )));
    }
    Ok(SceneDir {
        meta,
        observed,
        endmembers,
        abundances,
    })
}

pub fn write_run(
    dir: &Path,
    u: &Array2<f64>,
    v: &Array2<f64>,
    trace: &[f64],
    record: &RunRecord,
) -> CmdResult {
    create_dir(dir)?;
    save(dir.join(U_FILE), u)?;
    save(dir.join(V_FILE), v)?;
    let mut csv = String::from("iteration,objective\n");
    for (i, o) in trace.iter().enumerate() {
        csv.push_str(&format!("{},{o:e}\n", i + 1));
    }
    write_text(&dir.join(TRACE_CSV), &csv)?;
    write_json(&dir.join(RUN_JSON), record)
}

pub struct RunDir {
    pub record: RunRecord,
    pub u: Array2<f64>,
    pub v: Array2<f64>,
}

pub fn read_run(dir: &Path) -> CmdResult<RunDir> {
    if !dir.is_dir() {
        return Err(Failure::usage(format!(
            "run directory {} does not exist",
            dir.display()
        )));
    }
    Ok(RunDir {
        record: read_json(&dir.join(RUN_JSON))?,
        u: load(dir.join(U_FILE))?,
        v: load(dir.join(V_FILE))?,
    })
}
