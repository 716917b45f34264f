//! Implementations of the subcommands. Each `run_*` stage is reused by
//! `pipeline`; the `cmd_*` wrappers add printing and the manifest.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use unmix_core::graph::{
    build_knn_graph, build_spatial_graph, laplacian, Neighbourhood, WeightGraph, Weighting,
};
use unmix_core::io::{load_label_map, load_spectral_library};
use unmix_core::metrics::{evaluate_factors, format_table, EvalReport};
use unmix_core::simulate::{simulate, SceneConfig};
use unmix_core::solver::{solve, SolverOptions};
use unmix_core::subspace::estimate_endmember_count;
use unmix_core::SimulatedScene;

use crate::args::{
    EstimateArgs, EvaluateArgs, GraphKind, Method, PipelineArgs, SimulateArgs, SolverFlags,
    UnmixArgs, WeightingKind,
};
use crate::artifacts::{
    self, read_json, read_run, read_scene, unix_now, write_json, write_manifest, write_run,
    write_scene, GraphRecord, RunManifest, RunRecord,
};
use crate::failure::{from_core, CmdResult, Failure};

/// Writes to stdout unless silenced, ignoring a closed pipe (`unmix ... | head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        if !crate::quiet() {
            let _ = write!(std::io::stdout(), $($arg)*);
        }
    }};
}

macro_rules! sayln {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        if !crate::quiet() {
            let _ = writeln!(std::io::stdout(), $($arg)*);
        }
    }};
}

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn manifest(
    command: &str,
    config: Option<&Path>,
    out: &Path,
    seeds: Vec<u64>,
    started: u64,
) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        config_path: config.map(Path::to_path_buf),
        output_dir: out.to_path_buf(),
        seeds,
        version: format!("unmix {VERSION}"),
        started_unix_s: started,
        finished_unix_s: unix_now(),
    }
}

// ---------------------------------------------------------------- simulate

/// Reads and validates a scene config. Relative paths inside it resolve
/// against the config file's directory.
pub fn load_config(path: &Path) -> CmdResult<SceneConfig> {
    let config: SceneConfig = read_json(path)?;
    config
        .validate()
        .map_err(|e| from_core(&path.display().to_string(), e))?;
    Ok(config)
}

fn beside(config_path: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config_path.parent().unwrap_or(Path::new(".")).join(p)
    }
}

/// Generates a scene from `config` and writes it to `out`.
pub fn run_simulate(
    config_path: &Path,
    config: &SceneConfig,
    library: Option<&Path>,
    out: &Path,
) -> CmdResult<SimulatedScene> {
    let lib_path = library
        .map(Path::to_path_buf)
        .unwrap_or_else(|| beside(config_path, Path::new("library.csv")));
    let lib =
        load_spectral_library(&lib_path).map_err(|e| Failure::usage(format!("library: {e}")))?;
    let labels = load_label_map(beside(config_path, &config.label_map_path))
        .map_err(|e| Failure::usage(format!("label_map_path: {e}")))?;
    let scene = simulate::<f64>(config, &lib, &labels).map_err(|e| match e {
        unmix_core::Error::UnknownMaterial(_) => from_core("material_names", e),
        _ => from_core("simulate", e),
    })?;
    write_scene(out, &scene, lib.wavelengths())?;
    Ok(scene)
}

pub fn cmd_simulate(args: &SimulateArgs) -> CmdResult {
    let started = unix_now();
    let config = load_config(&args.config)?;
    let scene = run_simulate(&args.config, &config, args.library.as_deref(), &args.out)?;
    sayln!(
        "simulated {}x{} scene, {} bands, {} materials -> {}",
        scene.rows,
        scene.cols,
        scene.observed.bands(),
        scene.true_endmembers.endmembers(),
        args.out.display()
    );
    write_manifest(
        &args.out,
        &manifest(
            "simulate",
            Some(&args.config),
            &args.out,
            vec![config.seed],
            started,
        ),
    )
}

// -------------------------------------------------------------- estimate-p

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Estimate {
    pub estimated_p: usize,
    pub threshold: f64,
    pub centered: bool,
    pub eigenvalues_head: Vec<f64>,
}

pub const ESTIMATE_JSON: &str = "estimate_p.json";

pub fn cmd_estimate_p(args: &EstimateArgs) -> CmdResult {
    let started = unix_now();
    let scene = read_scene(&args.scene)?;
    let (p, spectrum) = estimate_endmember_count(&scene.observed, args.threshold, args.centered)
        .map_err(|e| from_core("threshold", e))?;
    let estimate = Estimate {
        estimated_p: p,
        threshold: args.threshold,
        centered: args.centered,
        eigenvalues_head: spectrum.eigenvalues.iter().take(10).copied().collect(),
    };
    sayln!(
        "{}",
        serde_json::to_string_pretty(&estimate).expect("estimate serializes")
    );
    artifacts::create_dir(&args.out)?;
    write_json(&args.out.join(ESTIMATE_JSON), &estimate)?;
    write_manifest(
        &args.out,
        &manifest("estimate-p", None, &args.out, vec![], started),
    )
}

// ------------------------------------------------------------------- unmix

/// Fully resolved solver and graph settings for one run.
#[derive(Debug, Clone)]
pub struct UnmixPlan {
    pub options: SolverOptions,
    pub p_source: &'static str,
    pub graph: Option<(GraphKind, usize, WeightingKind, Option<f64>)>,
}

impl UnmixPlan {
    /// Combines command-line flags with defaults; rejects graph or λ flags
    /// on plain NMF and a heat-kernel bandwidth on other weightings.
    pub fn from_flags(method: Method, flags: &SolverFlags, scene_p: usize) -> CmdResult<Self> {
        let graph_flags = flags.lambda.is_some()
            || flags.graph.is_some()
            || flags.knn_p.is_some()
            || flags.weighting.is_some()
            || flags.sigma_h.is_some();
        if method == Method::Nmf && graph_flags {
            let which = if flags.lambda.is_some() {
                "--lambda"
            } else {
                "graph flags (--graph/--knn-p/--weighting/--sigma-h)"
            };
            return Err(Failure::usage(format!(
                "{which} cannot be used with --method nmf; use --method gnmf"
            )));
        }
        let weighting = flags.weighting.unwrap_or(WeightingKind::Binary);
        if flags.sigma_h.is_some() && weighting != WeightingKind::Heat {
            return Err(Failure::usage("--sigma-h requires --weighting heat"));
        }
        let graph_kind = flags.graph.unwrap_or(GraphKind::Knn);
        if flags.knn_p.is_some() && graph_kind != GraphKind::Knn {
            return Err(Failure::usage("--knn-p requires --graph knn"));
        }
        let (p, p_source) = match flags.endmembers {
            Some(p) => (p, "flag"),
            None => (scene_p, "scene"),
        };
        if p < 2 {
            return Err(Failure::usage(format!(
                "--endmembers must be at least 2, got {p}"
            )));
        }
        let mut options = SolverOptions::new(p);
        options.seed = flags.seed;
        options.max_iter = flags.max_iter;
        options.rel_tol = flags.tol;
        options.asc = !flags.no_asc;
        let graph = match method {
            Method::Nmf => None,
            Method::Gnmf => {
                options.lambda = flags
                    .lambda
                    .unwrap_or(unmix_core::solver::DEFAULT_GNMF_LAMBDA);
                let knn_p = flags.knn_p.unwrap_or(unmix_core::graph::DEFAULT_KNN_P);
                Some((graph_kind, knn_p, weighting, flags.sigma_h))
            }
        };
        options
            .validate()
            .map_err(|e| Failure::usage(format!("solver options: {e}")))?;
        Ok(UnmixPlan {
            options,
            p_source,
            graph,
        })
    }
}

fn build_graph(
    scene: &artifacts::SceneDir,
    kind: GraphKind,
    knn_p: usize,
    weighting: WeightingKind,
    sigma_h: Option<f64>,
) -> CmdResult<WeightGraph<f64>> {
    let w = match weighting {
        WeightingKind::Binary => Weighting::Binary,
        WeightingKind::Heat => Weighting::HeatKernel(sigma_h),
        WeightingKind::Dot => Weighting::DotProduct,
    };
    let (rows, cols) = (scene.meta.rows, scene.meta.cols);
    let built = match kind {
        GraphKind::Spatial4 | GraphKind::Spatial8 if w != Weighting::Binary => {
            return Err(Failure::usage(
                "spatial graphs use binary weights; drop --weighting",
            ))
        }
        GraphKind::Spatial4 => build_spatial_graph(rows, cols, Neighbourhood::Four),
        GraphKind::Spatial8 => build_spatial_graph(rows, cols, Neighbourhood::Eight),
        GraphKind::Knn => build_knn_graph(&scene.observed, knn_p, w),
    };
    built.map_err(|e| from_core("graph", e))
}

/// Factorizes the scene in `scene_dir` and writes a run directory to `out`.
pub fn run_unmix(
    scene_dir: &Path,
    method: Method,
    flags: &SolverFlags,
    out: &Path,
) -> CmdResult<RunRecord> {
    let scene = read_scene(scene_dir)?;
    let plan = UnmixPlan::from_flags(method, flags, scene.meta.config.material_names.len())?;
    let (lap, graph_record) = match plan.graph {
        None => (None, None),
        Some((kind, knn_p, weighting, sigma_h)) => {
            let g = build_graph(&scene, kind, knn_p, weighting, sigma_h)?;
            let record = GraphRecord {
                kind: kind.name().to_string(),
                knn_p: (kind == GraphKind::Knn).then_some(knn_p),
                weighting: weighting.name().to_string(),
                sigma_h,
                edges: g.edge_count(),
            };
            (Some(laplacian(&g)), Some(record))
        }
    };
    let fact = solve(&scene.observed, lap.as_ref(), &plan.options)
        .map_err(|e| from_core(&format!("{} solve", method.label()), e))?;
    let record = RunRecord {
        method: method.name().to_string(),
        options: plan.options.clone(),
        p_source: plan.p_source.to_string(),
        graph: graph_record,
        iterations_run: fact.iterations_run,
        converged: fact.converged,
        final_objective: fact.objective_trace.last().copied(),
        degenerate_rows: fact.degenerate_rows,
    };
    write_run(
        out,
        fact.endmembers.as_array(),
        fact.abundances.as_array(),
        &fact.objective_trace,
        &record,
    )?;
    Ok(record)
}

pub fn cmd_unmix(args: &UnmixArgs) -> CmdResult {
    let started = unix_now();
    let record = run_unmix(&args.scene, args.method, &args.flags, &args.out)?;
    sayln!(
        "{}: {} iterations, converged={}, objective={:.6e} -> {}",
        args.method.label(),
        record.iterations_run,
        record.converged,
        record.final_objective.unwrap_or(f64::NAN),
        args.out.display()
    );
    write_manifest(
        &args.out,
        &manifest("unmix", None, &args.out, vec![args.flags.seed], started),
    )
}

// ---------------------------------------------------------------- evaluate

/// Scores each run directory against the scene's ground truth.
pub fn run_evaluate(scene_dir: &Path, run_dirs: &[PathBuf]) -> CmdResult<Vec<EvalReport>> {
    let scene = read_scene(scene_dir)?;
    let mut reports = Vec::with_capacity(run_dirs.len());
    for dir in run_dirs {
        let run = read_run(dir)?;
        let label = Method::from_name(&run.record.method)
            .map(Method::label)
            .unwrap_or(run.record.method.as_str())
            .to_string();
        let report = evaluate_factors(
            &scene.endmembers.as_array().view(),
            &scene.abundances.as_array().view(),
            &run.u.view(),
            &run.v.view(),
            &label,
        )
        .map_err(|e| Failure::usage(format!("{} does not fit the scene: {e}", dir.display())))?;
        reports.push(report);
    }
    // Disambiguate repeated method labels by directory name.
    for i in 0..reports.len() {
        let dup = reports
            .iter()
            .enumerate()
            .any(|(j, r)| j != i && r.method_label == reports[i].method_label);
        if dup {
            let name = dir_name(&run_dirs[i]);
            reports[i].method_label = format!("{}:{name}", reports[i].method_label);
        }
    }
    Ok(reports)
}

fn dir_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".to_string())
}

pub const TABLE_TXT: &str = "table.txt";

pub fn cmd_evaluate(args: &EvaluateArgs) -> CmdResult {
    let started = unix_now();
    if args.runs.is_empty() {
        return Err(Failure::usage("evaluate needs at least one run directory"));
    }
    let reports = run_evaluate(&args.scene, &args.runs)?;
    let table = format_table(&reports);
    say!("{table}");
    artifacts::create_dir(&args.out)?;
    for (i, (report, dir)) in reports.iter().zip(&args.runs).enumerate() {
        let file = format!("eval_{}_{}.json", i + 1, dir_name(dir));
        write_json(&args.out.join(file), report)?;
    }
    artifacts::write_text(&args.out.join(TABLE_TXT), &table)?;
    write_manifest(
        &args.out,
        &manifest("evaluate", None, &args.out, vec![], started),
    )
}

// ---------------------------------------------------------------- pipeline

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub rms_sad_deg: f64,
    pub rms_aad_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub entries: Vec<SeedResult>,
    pub median_rms_sad_deg: Option<f64>,
    pub median_rms_aad_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub seeds: Vec<u64>,
    pub methods: Vec<MethodSummary>,
    pub failures: Vec<SeedFailure>,
}

pub const AGGREGATE_JSON: &str = "aggregate.json";
pub const EVAL_JSON: &str = "eval.json";

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

fn run_seed(
    args: &PipelineArgs,
    config: &SceneConfig,
    seed: u64,
) -> Result<[EvalReport; 2], SeedFailure> {
    let fail = |stage: &str, f: Failure| SeedFailure {
        seed,
        stage: stage.to_string(),
        message: f.message,
    };
    let root = args.out.join(format!("seed_{seed}"));
    let scene_dir = root.join("scene");
    let mut cfg = config.clone();
    cfg.seed = seed;
    run_simulate(&args.config, &cfg, args.library.as_deref(), &scene_dir)
        .map_err(|f| fail("simulate", f))?;

    let mut nmf_flags = args.solver.clone();
    nmf_flags.seed = seed;
    let gnmf_flags = nmf_flags.clone();
    nmf_flags.strip_graph();
    let nmf_dir = root.join("nmf");
    let gnmf_dir = root.join("gnmf");
    run_unmix(&scene_dir, Method::Nmf, &nmf_flags, &nmf_dir).map_err(|f| fail("unmix-nmf", f))?;
    run_unmix(&scene_dir, Method::Gnmf, &gnmf_flags, &gnmf_dir)
        .map_err(|f| fail("unmix-gnmf", f))?;

    let reports =
        run_evaluate(&scene_dir, &[nmf_dir, gnmf_dir]).map_err(|f| fail("evaluate", f))?;
    write_json(&root.join(EVAL_JSON), &reports).map_err(|f| fail("evaluate", f))?;
    let [nmf, gnmf]: [EvalReport; 2] = reports
        .try_into()
        .map_err(|_| fail("evaluate", Failure::experiment("expected two reports")))?;
    Ok([nmf, gnmf])
}

fn thread_cap() -> CmdResult<Option<usize>> {
    match std::env::var("UNMIX_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::usage(format!(
                "UNMIX_THREADS: expected a positive integer, got {s:?}"
            ))),
        },
    }
}

pub fn cmd_pipeline(args: &PipelineArgs) -> CmdResult {
    let started = unix_now();
    let seeds = crate::args::parse_seeds(&args.seeds)?;
    let config = load_config(&args.config)?;
    // Catch flag mistakes once, before any seed runs.
    UnmixPlan::from_flags(Method::Gnmf, &args.solver, config.material_names.len())?;
    artifacts::create_dir(&args.out)?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Failure::experiment(format!("thread pool: {e}")))?;
    let outcomes: Vec<(u64, Result<[EvalReport; 2], SeedFailure>)> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| (s, run_seed(args, &config, s)))
            .collect()
    });

    let mut methods = [Method::Nmf, Method::Gnmf].map(|m| MethodSummary {
        method: m.label().to_string(),
        entries: Vec::new(),
        median_rms_sad_deg: None,
        median_rms_aad_deg: None,
    });
    let mut failures = Vec::new();
    for (seed, outcome) in outcomes {
        match outcome {
            Ok(reports) => {
                for (summary, r) in methods.iter_mut().zip(reports) {
                    summary.entries.push(SeedResult {
                        seed,
                        rms_sad_deg: r.rms_sad_deg,
                        rms_aad_deg: r.rms_aad_deg,
                    });
                }
            }
            Err(f) => {
                if !crate::quiet() {
                    eprintln!("seed {}: {} failed: {}", f.seed, f.stage, f.message);
                }
                failures.push(f);
            }
        }
    }
    for m in &mut methods {
        let sad: Vec<f64> = m.entries.iter().map(|e| e.rms_sad_deg).collect();
        let aad: Vec<f64> = m.entries.iter().map(|e| e.rms_aad_deg).collect();
        m.median_rms_sad_deg = median(&sad);
        m.median_rms_aad_deg = median(&aad);
    }
    let aggregate = Aggregate {
        seeds: seeds.clone(),
        methods: methods.to_vec(),
        failures,
    };
    write_json(&args.out.join(AGGREGATE_JSON), &aggregate)?;

    sayln!("median over {} seed(s):", methods[0].entries.len());
    say!("{}", median_table(&aggregate));
    if !aggregate.failures.is_empty() {
        return Err(Failure::experiment(format!(
            "{} of {} seed(s) failed",
            aggregate.failures.len(),
            seeds.len()
        )));
    }
    write_manifest(
        &args.out,
        &manifest("pipeline", Some(&args.config), &args.out, seeds, started),
    )
}

fn median_table(aggregate: &Aggregate) -> String {
    let reports: Vec<EvalReport> = aggregate
        .methods
        .iter()
        .map(|m| EvalReport {
            permutation: vec![],
            per_endmember_sad_deg: vec![],
            rms_sad_deg: m.median_rms_sad_deg.unwrap_or(f64::NAN),
            rms_aad_deg: m.median_rms_aad_deg.unwrap_or(f64::NAN),
            method_label: m.method.clone(),
            degenerate_aad_pixels: 0,
        })
        .collect();
    format_table(&reports)
}
