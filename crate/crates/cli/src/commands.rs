use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use l1ssl::bow::{co_refine, BowMatrix, RefineConfig, Refinement};
use l1ssl::datasets::two_moons;
use l1ssl::experiments::{ci95_half_width, mean, median, run_moons, run_seed, MoonsConfig, MoonsRun};
use l1ssl::graph::{gaussian_knn_graph, normalized_laplacian, FeatureMatrix, GraphConfig, Symmetrization};
use l1ssl::io;
use l1ssl::linalg::{smallest_eigenpairs, SparseSymMatrix};
use l1ssl::solver::{SolverOptions, SolverReport};
use l1ssl::spectral::{SmoothnessReport, SpectralBasis, EIGEN_TOL};
use l1ssl::ssl::{
    choose_labeled, encode_labels, evaluate, inject_label_noise, l1_ssl_fit, l2_ssl_fit, prepare, unlabeled_mask,
    NoiseScope, NoiseSpec,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{ClassifyArgs, EigenArgs, MoonsArgs, RefineArgs, SweepArgs};
use crate::config::{refine_configs, Params};
use crate::output::Outputs;

const SCHEMA_VERSION: u32 = 1;
const MOONS_NOISE_SD: f64 = 0.1;
const DEFAULT_LAMBDA_L2: f64 = 10.0;

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn load<T>(path: &Path, parse: impl FnOnce(BufReader<File>) -> l1ssl::Result<T>) -> Result<T> {
    parse(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn check_params(p: &Params, n: usize) -> Result<()> {
    p.graph.validate(n)?;
    ensure!(
        p.m >= 1 && p.m <= n,
        "basis size m = {} must satisfy 1 <= m <= n = {n}",
        p.m
    );
    SolverOptions::with_lambda(p.lambda).validate()?;
    Ok(())
}

fn check_lambda_l2(lambda: f64) -> Result<()> {
    ensure!(
        lambda >= 0.0 && lambda.is_finite(),
        "lambda-l2 must be >= 0, got {lambda}"
    );
    Ok(())
}

/// TOML integers are signed 64-bit, so seeds are written as decimal strings.
fn seed_string<S: serde::Serializer>(seed: &u64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(seed)
}

#[derive(Serialize)]
struct ParamsDoc {
    k: usize,
    sigma: f64,
    symmetrization: Symmetrization,
    m: usize,
    lambda: f64,
}

impl From<&Params> for ParamsDoc {
    fn from(p: &Params) -> Self {
        Self {
            k: p.graph.k,
            sigma: p.graph.sigma,
            symmetrization: p.graph.symmetrization,
            m: p.m,
            lambda: p.lambda,
        }
    }
}

#[derive(Serialize)]
struct MoonsMetrics {
    command: &'static str,
    schema_version: u32,
    #[serde(serialize_with = "seed_string")]
    seed: u64,
    runs: usize,
    config: MoonsConfig,
    summary: MoonsSummary,
    run: Vec<MoonsRunDoc>,
}

#[derive(Serialize)]
struct MoonsSummary {
    l1_median_accuracy: f64,
    l1_mean_accuracy: f64,
    l1_ci95_half_width: f64,
    l2_median_accuracy: f64,
    l2_mean_accuracy: f64,
    l2_ci95_half_width: f64,
    /// Runs where the L1 solution has smaller `‖Bf‖₁` than L2 at matched λ.
    l1_smoother_runs: usize,
}

#[derive(Serialize)]
struct MoonsRunDoc {
    index: usize,
    #[serde(serialize_with = "seed_string")]
    seed: u64,
    l1_accuracy: f64,
    l2_accuracy: f64,
    l1_smoothness: SmoothnessReport,
    l2_smoothness: SmoothnessReport,
    l2_matched_smoothness: SmoothnessReport,
}

pub fn moons_demo(args: &MoonsArgs) -> Result<()> {
    let base = MoonsConfig::default();
    let p = Params::resolve(Params::moons(), &args.graph, args.lambda)?;
    let cfg = MoonsConfig {
        n: args.n,
        noise_sd: MOONS_NOISE_SD,
        graph: p.graph,
        m: p.m,
        lambda_l1: p.lambda,
        lambda_l2: args.lambda_l2.unwrap_or(base.lambda_l2),
        labels_per_class: args.labels_per_class,
        noise_fraction: args.noise_fraction,
    };
    cfg.validate()?;
    ensure!(args.runs >= 1, "runs must be at least 1");

    let runs: Vec<MoonsRun> = (0..args.runs)
        .into_par_iter()
        .map(|i| run_moons(&cfg, run_seed(args.seed, i as u64)))
        .collect::<l1ssl::Result<_>>()?;

    let a1: Vec<f64> = runs.iter().map(|r| r.accuracy_l1).collect();
    let a2: Vec<f64> = runs.iter().map(|r| r.accuracy_l2).collect();
    let summary = MoonsSummary {
        l1_median_accuracy: median(&a1),
        l1_mean_accuracy: mean(&a1),
        l1_ci95_half_width: ci95_half_width(&a1),
        l2_median_accuracy: median(&a2),
        l2_mean_accuracy: mean(&a2),
        l2_ci95_half_width: ci95_half_width(&a2),
        l1_smoother_runs: runs
            .iter()
            .filter(|r| r.smoothness_l1.l1_smoothness < r.smoothness_l2_matched.l1_smoothness)
            .count(),
    };
    let mut out = Outputs::default();
    if let Some(dir) = &args.output {
        out.file(dir.join("points.csv"), points_csv(&runs[0]));
    }
    out.metrics(&MoonsMetrics {
        command: "moons-demo",
        schema_version: SCHEMA_VERSION,
        seed: args.seed,
        runs: args.runs,
        config: cfg,
        summary,
        run: runs
            .iter()
            .enumerate()
            .map(|(index, r)| MoonsRunDoc {
                index,
                seed: r.seed,
                l1_accuracy: r.accuracy_l1,
                l2_accuracy: r.accuracy_l2,
                l1_smoothness: r.smoothness_l1,
                l2_smoothness: r.smoothness_l2,
                l2_matched_smoothness: r.smoothness_l2_matched,
            })
            .collect(),
    })?;
    out.commit(args.output.as_deref())
}

fn points_csv(run: &MoonsRun) -> Vec<u8> {
    let p = &run.points;
    let mut s = String::from("x,y,truth,given,l1,l2\n");
    for i in 0..p.coords.len() {
        let given = p.given[i].map(|c| c.to_string()).unwrap_or_default();
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.coords[i][0], p.coords[i][1], p.truth[i], given, p.l1_labels[i], p.l2_labels[i]
        ));
    }
    s.into_bytes()
}

#[derive(Serialize)]
struct ClassifyMetrics {
    command: &'static str,
    schema_version: u32,
    #[serde(serialize_with = "seed_string")]
    seed: u64,
    n: usize,
    classes: usize,
    labeled: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy_unlabeled: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy_all: Option<f64>,
    config: ParamsDoc,
    solver: Vec<SolverDoc>,
}

#[derive(Serialize)]
struct SolverDoc {
    class: usize,
    iterations: usize,
    final_objective: f64,
    kkt_residual: f64,
    converged: bool,
}

impl SolverDoc {
    fn new(class: usize, r: &SolverReport) -> Self {
        Self {
            class,
            iterations: r.iterations,
            final_objective: r.final_objective,
            kkt_residual: r.kkt_residual,
            converged: r.converged,
        }
    }
}

pub fn classify(args: &ClassifyArgs) -> Result<()> {
    let p = Params::resolve(Params::mnist_style(), &args.graph, args.lambda)?;
    let x = load(&args.input, io::read_features)?;
    let labels = load(&args.labels, io::read_labels)?;
    let truth = args.truth.as_deref().map(|t| load(t, io::read_classes)).transpose()?;
    let n = x.n();
    check_params(&p, n)?;
    ensure!(
        !labels.is_empty(),
        "label file {} has no entries",
        args.labels.display()
    );
    if let Some(t) = &truth {
        ensure!(t.len() == n, "ground truth has {} rows, features have {n}", t.len());
    }
    let classes = labels
        .iter()
        .map(|&(_, c)| c)
        .chain(truth.iter().flatten().copied())
        .max()
        .map_or(0, |c| c + 1);
    let y = encode_labels(&labels, n, classes)?;

    let (_, basis) = prepare(&x, &p.graph, p.m, args.seed)?;
    let solution = l1_ssl_fit(&basis, &y, &SolverOptions::with_lambda(p.lambda))?;

    let (accuracy_unlabeled, accuracy_all) = match &truth {
        Some(t) => {
            let mask = unlabeled_mask(n, &labels);
            let unl = if mask.iter().any(|&m| m) {
                Some(evaluate(&solution.labels, t, &mask)?)
            } else {
                None
            };
            (unl, Some(evaluate(&solution.labels, t, &vec![true; n])?))
        }
        None => (None, None),
    };
    let mut predictions = Vec::new();
    io::write_classes(&mut predictions, &solution.labels)?;
    let mut out = Outputs::default();
    out.file(args.output.join("predictions.txt"), predictions);
    out.metrics(&ClassifyMetrics {
        command: "classify",
        schema_version: SCHEMA_VERSION,
        seed: args.seed,
        n,
        classes,
        labeled: labels.len(),
        accuracy_unlabeled,
        accuracy_all,
        config: (&p).into(),
        solver: solution
            .reports
            .iter()
            .enumerate()
            .map(|(c, r)| SolverDoc::new(c, r))
            .collect(),
    })?;
    out.commit(Some(&args.output))
}

#[derive(Serialize)]
struct SweepMetrics {
    command: &'static str,
    schema_version: u32,
    #[serde(serialize_with = "seed_string")]
    seed: u64,
    runs: usize,
    dataset: &'static str,
    n: usize,
    classes: usize,
    labels_per_class: usize,
    noise_scope: NoiseScope,
    lambda_l2: f64,
    config: ParamsDoc,
    cell: Vec<CellDoc>,
}

#[derive(Serialize)]
struct CellDoc {
    noise_fraction: f64,
    l1_mean_accuracy: f64,
    l1_ci95_half_width: f64,
    l2_mean_accuracy: f64,
    l2_ci95_half_width: f64,
    l1_accuracy: Vec<f64>,
    l2_accuracy: Vec<f64>,
}

struct SweepData {
    x: FeatureMatrix,
    truth: Vec<usize>,
    classes: usize,
}

pub fn noise_sweep(args: &SweepArgs) -> Result<()> {
    let base = if args.input.is_some() {
        Params::mnist_style()
    } else {
        Params::moons()
    };
    let p = Params::resolve(base, &args.graph, args.lambda)?;
    let lambda_l2 = args.lambda_l2.unwrap_or(DEFAULT_LAMBDA_L2);
    check_lambda_l2(lambda_l2)?;
    ensure!(args.runs >= 1, "runs must be at least 1");
    ensure!(!args.noise_fraction.is_empty(), "noise-fraction grid is empty");
    for &f in &args.noise_fraction {
        ensure!((0.0..=1.0).contains(&f), "noise fraction must lie in [0, 1], got {f}");
    }
    ensure!(args.labels_per_class >= 1, "labels-per-class must be at least 1");

    let fixed = match (&args.input, &args.truth) {
        (Some(input), Some(truth)) => {
            let x = load(input, io::read_features)?;
            let truth = load(truth, io::read_classes)?;
            ensure!(
                truth.len() == x.n(),
                "ground truth has {} rows, features have {}",
                truth.len(),
                x.n()
            );
            let classes = truth.iter().max().map_or(0, |c| c + 1);
            Some(SweepData { x, truth, classes })
        }
        _ => None,
    };
    let (n, classes) = match &fixed {
        Some(d) => (d.x.n(), d.classes),
        None => {
            ensure!(
                args.n >= 4 && args.n.is_multiple_of(2),
                "two-moons needs an even n >= 4, got {}",
                args.n
            );
            (args.n, 2)
        }
    };
    check_params(&p, n)?;
    if fixed.is_none() {
        ensure!(
            args.labels_per_class <= n / 2,
            "labels-per-class {} exceeds the class size {}",
            args.labels_per_class,
            n / 2
        );
    }

    let shared = fixed
        .as_ref()
        .map(|d| prepare(&d.x, &p.graph, p.m, args.seed))
        .transpose()?;

    let per_run: Vec<Vec<(f64, f64)>> = (0..args.runs)
        .into_par_iter()
        .map(|r| -> Result<Vec<(f64, f64)>> {
            let seed = run_seed(args.seed, r as u64);
            let generated;
            let (truth, (laplacian, basis)) = match (&fixed, &shared) {
                (Some(d), Some(s)) => (&d.truth, (&s.0, &s.1)),
                _ => {
                    let (x, t) = two_moons(n, MOONS_NOISE_SD, seed)?;
                    generated = (t, prepare(&x, &p.graph, p.m, seed)?);
                    (&generated.0, (&generated.1 .0, &generated.1 .1))
                }
            };
            let labeled = choose_labeled(truth, classes, args.labels_per_class, seed)?;
            args.noise_fraction
                .iter()
                .map(|&fraction| {
                    let spec = NoiseSpec {
                        labeled_per_class: args.labels_per_class,
                        noise_fraction: fraction,
                        seed,
                        scope: NoiseScope::Global,
                    };
                    accuracy_pair(laplacian, basis, truth, classes, &labeled, &spec, p.lambda, lambda_l2)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let cell = args
        .noise_fraction
        .iter()
        .enumerate()
        .map(|(j, &noise_fraction)| {
            let l1: Vec<f64> = per_run.iter().map(|r| r[j].0).collect();
            let l2: Vec<f64> = per_run.iter().map(|r| r[j].1).collect();
            CellDoc {
                noise_fraction,
                l1_mean_accuracy: mean(&l1),
                l1_ci95_half_width: ci95_half_width(&l1),
                l2_mean_accuracy: mean(&l2),
                l2_ci95_half_width: ci95_half_width(&l2),
                l1_accuracy: l1,
                l2_accuracy: l2,
            }
        })
        .collect();
    let mut out = Outputs::default();
    out.metrics(&SweepMetrics {
        command: "noise-sweep",
        schema_version: SCHEMA_VERSION,
        seed: args.seed,
        runs: args.runs,
        dataset: if fixed.is_some() { "input" } else { "two-moons" },
        n,
        classes,
        labels_per_class: args.labels_per_class,
        noise_scope: NoiseScope::Global,
        lambda_l2,
        config: (&p).into(),
        cell,
    })?;
    out.commit(args.output.as_deref())
}

#[allow(clippy::too_many_arguments)]
fn accuracy_pair(
    laplacian: &SparseSymMatrix,
    basis: &SpectralBasis,
    truth: &[usize],
    classes: usize,
    labeled: &[(usize, usize)],
    spec: &NoiseSpec,
    lambda_l1: f64,
    lambda_l2: f64,
) -> Result<(f64, f64)> {
    let given = inject_label_noise(labeled, spec, classes)?;
    let y = encode_labels(&given, truth.len(), classes)?;
    let mask = unlabeled_mask(truth.len(), &given);
    let l1 = l1_ssl_fit(basis, &y, &SolverOptions::with_lambda(lambda_l1))?;
    let l2 = l2_ssl_fit(laplacian, &y, lambda_l2)?;
    Ok((evaluate(&l1.labels, truth, &mask)?, evaluate(&l2.labels, truth, &mask)?))
}

#[derive(Serialize)]
struct RefineMetrics {
    command: &'static str,
    schema_version: u32,
    #[serde(serialize_with = "seed_string")]
    seed: u64,
    n: usize,
    visual: ModalityDoc,
    textual: ModalityDoc,
}

#[derive(Serialize)]
struct ModalityDoc {
    vocabulary: usize,
    changed_entries: usize,
    total_entries: usize,
    columns_solved: usize,
    converged_columns: usize,
    max_iterations: usize,
    max_kkt_residual: f64,
    config: RefineConfig,
}

impl ModalityDoc {
    fn new(input: &BowMatrix, r: &Refinement, config: RefineConfig) -> Self {
        let changed = input
            .matrix()
            .data()
            .iter()
            .zip(r.refined.matrix().data())
            .filter(|(a, b)| a != b)
            .count();
        Self {
            vocabulary: input.vocabulary(),
            changed_entries: changed,
            total_entries: input.n() * input.vocabulary(),
            columns_solved: r.reports.len(),
            converged_columns: r.reports.iter().filter(|s| s.converged).count(),
            max_iterations: r.reports.iter().map(|s| s.iterations).max().unwrap_or(0),
            max_kkt_residual: r.reports.iter().map(|s| s.kkt_residual).fold(0.0, f64::max),
            config,
        }
    }
}

pub fn refine_bow(args: &RefineArgs) -> Result<()> {
    if args.input.len() != 2 {
        bail!(
            "refine-bow needs exactly two --input files (visual, then textual), got {}",
            args.input.len()
        );
    }
    let (cfg_v, cfg_t) = refine_configs(args)?;
    let visual = load(&args.input[0], io::read_bow)?;
    let textual = load(&args.input[1], io::read_bow)?;
    let n = visual.n();
    ensure!(
        textual.n() == n,
        "document counts differ: visual has {n}, textual has {}",
        textual.n()
    );
    for (name, c) in [("visual", &cfg_v), ("textual", &cfg_t)] {
        if c.lambda > 0.0 {
            ensure!(c.k < n, "{name}: k = {} must be smaller than n = {n}", c.k);
            ensure!(c.m <= n, "{name}: m = {} exceeds document count {n}", c.m);
        }
    }

    let result = co_refine(&visual, &textual, &cfg_v, &cfg_t, args.seed)?;

    let mut out = Outputs::default();
    for (name, r) in [("visual", &result.visual), ("textual", &result.textual)] {
        let mut buf = Vec::new();
        io::write_bow(&mut buf, &r.refined)?;
        out.file(args.output.join(format!("{name}_refined.bow")), buf);
    }
    out.metrics(&RefineMetrics {
        command: "refine-bow",
        schema_version: SCHEMA_VERSION,
        seed: args.seed,
        n,
        visual: ModalityDoc::new(&visual, &result.visual, cfg_v),
        textual: ModalityDoc::new(&textual, &result.textual, cfg_t),
    })?;
    out.commit(Some(&args.output))
}

#[derive(Serialize)]
struct EigenMetrics {
    command: &'static str,
    schema_version: u32,
    #[serde(serialize_with = "seed_string")]
    seed: u64,
    source: &'static str,
    n: usize,
    m: usize,
    edges: usize,
    max_residual: f64,
    eigenvalues: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    graph: Option<GraphConfig>,
}

pub fn eigen_dump(args: &EigenArgs) -> Result<()> {
    let p = Params::resolve(Params::mnist_style(), &args.graph, None)?;
    let (w, source, graph) = match (&args.input, &args.edges) {
        (_, Some(edges)) => (load(edges, io::read_edges)?, "edges", None),
        (Some(input), None) => {
            let x = load(input, io::read_features)?;
            p.graph.validate(x.n())?;
            (gaussian_knn_graph(&x, &p.graph)?, "features", Some(p.graph))
        }
        (None, None) => bail!("either --input or --edges is required"),
    };
    let n = w.n();
    ensure!(
        p.m >= 1 && p.m <= n,
        "basis size m = {} must satisfy 1 <= m <= n = {n}",
        p.m
    );

    let laplacian = normalized_laplacian(&w)?;
    let pairs = smallest_eigenpairs(&laplacian, p.m, EIGEN_TOL, args.seed)?;
    let max_residual = pairs.max_residual(&laplacian)?;

    let mut csv = String::new();
    for i in 0..n {
        let row: Vec<String> = (0..p.m).map(|j| pairs.vectors.get(i, j).to_string()).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    let mut out = Outputs::default();
    out.file(args.output.join("eigenvectors.csv"), csv.into_bytes());
    out.metrics(&EigenMetrics {
        command: "eigen-dump",
        schema_version: SCHEMA_VERSION,
        seed: args.seed,
        source,
        n,
        m: p.m,
        edges: w.edge_count(),
        max_residual,
        eigenvalues: pairs.values.clone(),
        graph,
    })?;
    out.commit(Some(&args.output))
}
