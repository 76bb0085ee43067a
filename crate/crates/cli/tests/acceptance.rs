//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line
//! straight to stdout (bypassing the test harness capture) and then asserts.
//! Tests take a shared lock so timings are not skewed by each other.

#![allow(clippy::needless_range_loop)]

#[path = "../../core/tests/common/mod.rs"]
mod oracles;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use l1ssl::bow::{apply_error_sparsity, co_refine, refine, RefineConfig};
use l1ssl::datasets::{gaussian_blobs, two_block_corpus, two_moons};
use l1ssl::experiments::{median, run_moons, run_seed, MoonsConfig};
use l1ssl::graph::{normalized_laplacian, GraphConfig, WeightMatrix};
use l1ssl::io;
use l1ssl::linalg::{DenseMatrix, SparseSymMatrix};
use l1ssl::solver::{fista_weighted_l1, kkt_residual, l2_ssl_solve, SolverOptions};
use l1ssl::spectral::{b_norm2, build_basis, l2_smoothness, SpectralBasis};
use l1ssl::ssl::{choose_labeled, encode_labels, l1_ssl_fit, prepare};
use oracles::{dense_laplacian, dense_matvec, grid_argmin_1d, grid_min_2d, random_connected_graph, random_vec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn report(id: u32, title: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {id}: {verdict}  {title}  ({detail})\n");
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(pass, "criterion {id} failed: {detail}");
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The shared graph set of criteria 1 and 2: 20 connected graphs, n <= 64.
fn graph_set() -> Vec<WeightMatrix> {
    (0..20u64)
        .map(|s| random_connected_graph(4 + 3 * s as usize, 2 * (4 + 3 * s as usize), 100 + s))
        .collect()
}

fn full_basis(w: &WeightMatrix) -> (SparseSymMatrix, SpectralBasis) {
    let l = normalized_laplacian(w).unwrap();
    let basis = build_basis(&l, w.n(), 0).unwrap();
    (l, basis)
}

#[test]
fn criterion_1_smoothness_relations() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (mut worst_i, mut worst_ii, mut worst_iii) = (f64::NEG_INFINITY, 0.0f64, 0.0f64);
    let mut checked = 0;
    for (g, w) in graph_set().iter().enumerate() {
        let n = w.n();
        let (l, basis) = full_basis(w);
        let dense_l = dense_laplacian(&w.matrix().to_dense());
        let mut rng = ChaCha8Rng::seed_from_u64(g as u64);
        for _ in 0..500 {
            // (i): scale a random f so that Ω̃(f) lies in (0, 1]
            let f = random_vec(&mut rng, n);
            let t = basis.l1_smoothness(&f).unwrap();
            let scale = rng.random_range(0.05..=1.0) / t;
            let f: Vec<f64> = f.iter().map(|v| v * scale).collect();
            let omega_tilde = basis.l1_smoothness(&f).unwrap();
            let omega: f64 = f.iter().zip(dense_matvec(&dense_l, &f)).map(|(a, b)| a * b).sum();
            assert!(omega_tilde <= 1.0 + 1e-12);
            worst_i = worst_i.max(omega - omega_tilde);

            // (iii): f = Vα
            let alpha = random_vec(&mut rng, n);
            let f: Vec<f64> = (0..n)
                .map(|r| (0..n).map(|c| basis.vectors().get(r, c) * alpha[c]).sum())
                .collect();
            let expected: f64 = alpha
                .iter()
                .zip(basis.eigenvalues())
                .map(|(a, s)| a.abs() * s.sqrt())
                .sum();
            worst_iii = worst_iii.max((basis.l1_smoothness(&f).unwrap() - expected).abs());
            checked += 1;
        }
        // (ii): every eigenvector
        for i in 0..n {
            let v = basis.vectors().column(i);
            worst_ii = worst_ii.max((basis.l1_smoothness(&v).unwrap() - basis.eigenvalues()[i].sqrt()).abs());
        }
        assert!(l2_smoothness(&l, &[0.0; 1].repeat(n)).unwrap() == 0.0);
    }
    let elapsed = start.elapsed();
    let pass = worst_i <= 1e-8 && worst_ii <= 1e-8 && worst_iii <= 1e-8 && elapsed < Duration::from_secs(10);
    report(
        1,
        "Ω vs Ω̃ relations (i)-(iii), 20 graphs x 500 vectors",
        pass,
        &format!(
            "{checked} vectors; max Ω-Ω̃ {worst_i:.2e}; (ii) err {worst_ii:.2e}; (iii) err {worst_iii:.2e}; {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_2_decomposition_identities() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (mut worst_btb, mut worst_quad) = (0.0f64, 0.0f64);
    for (g, w) in graph_set().iter().enumerate() {
        let n = w.n();
        let (_, basis) = full_basis(w);
        let dense_l = dense_laplacian(&w.matrix().to_dense());
        let b = basis.b_matrix().unwrap();
        for i in 0..n {
            for j in 0..n {
                let btb: f64 = (0..n).map(|r| b.get(r, i) * b.get(r, j)).sum();
                worst_btb = worst_btb.max((btb - dense_l.get(i, j)).abs());
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(50 + g as u64);
        for _ in 0..500 {
            let f = random_vec(&mut rng, n);
            let quad: f64 = f.iter().zip(dense_matvec(&dense_l, &f)).map(|(a, b)| a * b).sum();
            worst_quad = worst_quad.max((b_norm2(&basis, &f).unwrap().powi(2) - quad).abs());
        }
    }
    report(
        2,
        "BᵀB = 𝓛 and ‖Bf‖₂² = fᵀ𝓛f",
        worst_btb <= 1e-6 && worst_quad <= 1e-8,
        &format!("max |BᵀB - 𝓛| {worst_btb:.2e}; max |‖Bf‖₂² - fᵀ𝓛f| {worst_quad:.2e}"),
    );
}

/// Grid minimum over `[-1.5, 1.5]^m` with spacing 1e-3.
fn grid_minimum(f: impl Fn(&[f64]) -> f64, m: usize) -> f64 {
    if m == 1 {
        let a = grid_argmin_1d(|a| f(&[a]), -1.5, 1.5, 1e-3);
        f(&[a])
    } else {
        grid_min_2d(|a, b| f(&[a, b]), -1.5, 1.5, 1e-3).0
    }
}

#[test]
fn criterion_3_solver_optimality() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (mut worst_gap, mut worst_kkt, mut worst_zero) = (f64::NEG_INFINITY, 0.0f64, 0.0f64);
    let mut converged = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n = rng.random_range(3..30);
        let m = 1 + (seed % 2) as usize;
        let l = normalized_laplacian(&random_connected_graph(n, n, seed)).unwrap();
        let basis = build_basis(&l, m, seed).unwrap();
        // unit-norm y keeps every coefficient, and so the minimizer, inside the grid
        let y = random_vec(&mut rng, n);
        let y: Vec<f64> = y.iter().map(|v| v / norm(&y)).collect();
        let lambda = rng.random_range(0.0..0.6);
        let (alpha, rep) = fista_weighted_l1(&basis, &y, &SolverOptions::with_lambda(lambda)).unwrap();

        let v = basis.vectors();
        let sqrt_sigma: Vec<f64> = basis.eigenvalues().iter().map(|s| s.max(0.0).sqrt()).collect();
        // ‖Va - y‖² = aᵀGa - 2aᵀc + yᵀy, with G = VᵀV formed explicitly (not assumed to be I)
        let gram: Vec<Vec<f64>> = (0..m)
            .map(|a| {
                (0..m)
                    .map(|b| (0..n).map(|r| v.get(r, a) * v.get(r, b)).sum())
                    .collect()
            })
            .collect();
        let c: Vec<f64> = (0..m).map(|a| (0..n).map(|r| v.get(r, a) * y[r]).sum()).collect();
        let yy: f64 = y.iter().map(|x| x * x).sum();
        let objective = |a: &[f64]| {
            let mut fit = yy;
            for i in 0..m {
                fit -= 2.0 * a[i] * c[i];
                for j in 0..m {
                    fit += a[i] * gram[i][j] * a[j];
                }
            }
            0.5 * fit + lambda * a.iter().zip(&sqrt_sigma).map(|(x, w)| x.abs() * w).sum::<f64>()
        };
        worst_gap = worst_gap.max(rep.final_objective - grid_minimum(objective, m));
        if rep.converged {
            converged += 1;
            worst_kkt = worst_kkt.max(kkt_residual(&basis, &y, lambda, &alpha).unwrap());
        }

        let (a0, _) = fista_weighted_l1(&basis, &y, &SolverOptions::with_lambda(0.0)).unwrap();
        for c in 0..m {
            let proj: f64 = (0..n).map(|r| v.get(r, c) * y[r]).sum();
            worst_zero = worst_zero.max((a0[c] - proj).abs());
        }
    }
    let elapsed = start.elapsed();
    let pass = worst_gap <= 1e-4 && worst_kkt <= 1e-6 && worst_zero <= 1e-10 && elapsed < Duration::from_secs(30);
    report(
        3,
        "FISTA vs grid oracle on 50 instances with m <= 2",
        pass,
        &format!(
            "max objective - grid {worst_gap:.2e}; {converged}/50 converged, max KKT {worst_kkt:.2e}; λ=0 err {worst_zero:.2e}; {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_4_l2_baseline_exactness() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..80);
        let w = random_connected_graph(n, 2 * n, 200 + seed);
        let l = normalized_laplacian(&w).unwrap();
        let dense_l = dense_laplacian(&w.matrix().to_dense());
        let lambda = 10f64.powf(rng.random_range(-2.0..2.0));
        let y = random_vec(&mut rng, n);
        let f = l2_ssl_solve(&l, &y, lambda).unwrap();
        let lf = dense_matvec(&dense_l, &f);
        let r: Vec<f64> = (0..n).map(|i| f[i] + lambda * lf[i] - y[i]).collect();
        worst = worst.max(norm(&r) / norm(&y));
    }
    let two = WeightMatrix::precomputed(SparseSymMatrix::from_triplets(2, [(0, 1, 1.0)]).unwrap()).unwrap();
    let f = l2_ssl_solve(&normalized_laplacian(&two).unwrap(), &[1.0, 0.0], 1.0).unwrap();
    let literal = (f[0] - 0.6).abs() <= 1e-10 && (f[1] - 0.4).abs() <= 1e-10;
    report(
        4,
        "(I + λ𝓛)f = y residual and the 2-node instance",
        worst <= 1e-8 && literal,
        &format!(
            "max relative residual {worst:.2e} (clause {}); 2-node λ=1 y=[1,0] gives [{:.12}, {:.12}], expected [0.6, 0.4] (clause {})",
            if worst <= 1e-8 { "holds" } else { "violated" },
            f[0],
            f[1],
            if literal { "holds" } else { "violated" },
        ),
    );
}

#[test]
fn criterion_5_two_moons_noise_robustness() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let cfg = MoonsConfig::default();
    let runs: Vec<_> = (0..25).map(|i| run_moons(&cfg, run_seed(0, i)).unwrap()).collect();
    let elapsed = start.elapsed();
    let flips_ok = runs.iter().all(|r| {
        let p = &r.points;
        (0..2).all(|c| {
            let wrong = (0..p.truth.len())
                .filter(|&i| p.truth[i] == c && p.given[i].is_some_and(|g| g != c))
                .count();
            let labeled = (0..p.truth.len())
                .filter(|&i| p.truth[i] == c && p.given[i].is_some())
                .count();
            wrong == 1 && labeled == 5
        })
    });
    let l1: Vec<f64> = runs.iter().map(|r| r.accuracy_l1).collect();
    let l2: Vec<f64> = runs.iter().map(|r| r.accuracy_l2).collect();
    let smoother = runs
        .iter()
        .filter(|r| r.smoothness_l1.l1_smoothness < r.smoothness_l2_matched.l1_smoothness)
        .count();
    let (m1, m2) = (median(&l1), median(&l2));
    let pass =
        flips_ok && cfg.n == 200 && m1 >= 0.95 && m1 >= m2 && smoother >= 20 && elapsed < Duration::from_secs(120);
    report(
        5,
        "two-moons, 5 labels/class, 1 flipped per class, 25 seeds",
        pass,
        &format!(
            "L1 median {m1:.4}, L2 median {m2:.4}; L1 smoother in {smoother}/25; flips exact: {flips_ok}; {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_6_clean_label_sanity() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let cfg = MoonsConfig {
        noise_fraction: 0.0,
        ..MoonsConfig::default()
    };
    let runs: Vec<_> = (0..25).map(|i| run_moons(&cfg, run_seed(0, i)).unwrap()).collect();
    let l1: Vec<f64> = runs.iter().map(|r| r.accuracy_l1).collect();
    let l2: Vec<f64> = runs.iter().map(|r| r.accuracy_l2).collect();
    let (m1, m2) = (median(&l1), median(&l2));
    report(
        6,
        "clean two-moons, 5 labels/class, 25 seeds",
        m1 >= 0.98 && m2 >= 0.98,
        &format!("L1 median {m1:.4}, L2 median {m2:.4}"),
    );
}

#[test]
fn criterion_7_bow_refinement() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    // error-sparsity step against a scalar grid search
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_grid = 0.0f64;
    for _ in 0..1000 {
        let y: f64 = rng.random_range(0.0..1.0);
        let y_star: f64 = rng.random_range(-0.5..1.5);
        let gamma: f64 = rng.random_range(0.0..0.5);
        let s = |v: f64| DenseMatrix::from_vec(1, 1, vec![v]).unwrap();
        let f = apply_error_sparsity(&s(y_star), &s(y), gamma).unwrap().get(0, 0);
        let g = grid_argmin_1d(|x| 0.5 * (x - y_star).powi(2) + gamma * (x - y).abs(), -1.0, 2.0, 1e-4);
        worst_grid = worst_grid.max((f - g).abs());
    }

    // λ = γ = 0 round trip
    let c = two_block_corpus(60, 40, 30, 0.1, 0.3, 1).unwrap();
    let zero = RefineConfig {
        lambda: 0.0,
        gamma: 0.0,
        ..RefineConfig::table2_textual()
    };
    let r = co_refine(&c.corrupted, &c.companion, &zero, &zero, 0).unwrap();
    let round_trip = r.visual.refined == c.corrupted && r.textual.refined == c.companion;

    // constructed two-block corpus
    let cfg = RefineConfig {
        m: 2,
        ..RefineConfig::table2_textual()
    };
    let mut details = Vec::new();
    let mut corpus_ok = true;
    for seed in [11u64, 12, 13] {
        let c = two_block_corpus(60, 40, 30, 0.1, 0.3, seed).unwrap();
        let out = refine(&c.corrupted, &c.companion, &cfg, 0).unwrap();
        let (mut toward, mut corrupted, mut kept, mut clean) = (0, 0, 0, 0);
        for i in 0..60 {
            for j in 0..40 {
                let (y, f, target) = (c.corrupted.get(i, j), out.refined.get(i, j), c.consensus(i, j));
                if c.corrupted_mask[i * 40 + j] {
                    corrupted += 1;
                    toward += usize::from((f - target).abs() < (y - target).abs());
                } else {
                    clean += 1;
                    kept += usize::from(f == y);
                }
            }
        }
        let (moved, unchanged) = (toward as f64 / corrupted as f64, kept as f64 / clean as f64);
        corpus_ok &= corrupted == 240 && moved >= 0.8 && unchanged >= 0.95;
        details.push(format!("seed {seed}: moved {moved:.3}, unchanged {unchanged:.3}"));
    }
    report(
        7,
        "BOW refinement",
        worst_grid <= 1e-3 && round_trip && corpus_ok,
        &format!(
            "grid err {worst_grid:.2e} on 1000 scalars; λ=γ=0 round trip: {round_trip}; {}",
            details.join("; ")
        ),
    );
}

fn pipeline_seconds(n: usize) -> f64 {
    let (x, truth) = gaussian_blobs(n, 10, 2, 1.5, n as u64).unwrap();
    let start = Instant::now();
    let graph = GraphConfig {
        sigma: 1.0,
        k: 4,
        ..Default::default()
    };
    let (_, basis) = prepare(&x, &graph, 20, 0).unwrap();
    let labeled = choose_labeled(&truth, 10, 5, 0).unwrap();
    let y = encode_labels(&labeled, n, 10).unwrap();
    l1_ssl_fit(&basis, &y, &SolverOptions::with_lambda(0.01)).unwrap();
    start.elapsed().as_secs_f64()
}

#[test]
fn criterion_8_scalability() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let sizes = [1000usize, 2000, 4000, 7000, 10000];
    // best of two to damp scheduler noise
    let times: Vec<f64> = sizes
        .iter()
        .map(|&n| pipeline_seconds(n).min(pipeline_seconds(n)))
        .collect();
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 5.0, ys.iter().sum::<f64>() / 5.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let largest = times[4];
    let timings: Vec<String> = sizes
        .iter()
        .zip(&times)
        .map(|(n, t)| format!("n={n}: {t:.3}s"))
        .collect();
    report(
        8,
        "pipeline scaling with k = 4, m = 20",
        slope < 1.6 && largest < 60.0,
        &format!("fit exponent {slope:.3}; {}", timings.join(", ")),
    );
}

struct Inputs {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Inputs {
    fn new() -> Self {
        let dir = tempfile::TempDir::new().unwrap();
        let root = dir.path().to_path_buf();
        let (x, truth) = two_moons(120, 0.1, 3).unwrap();
        let mut buf = Vec::new();
        io::write_features(&mut buf, &x).unwrap();
        fs::write(root.join("x.csv"), buf).unwrap();
        let mut buf = Vec::new();
        io::write_classes(&mut buf, &truth).unwrap();
        fs::write(root.join("truth.txt"), buf).unwrap();
        let mut buf = Vec::new();
        io::write_labels(&mut buf, &choose_labeled(&truth, 2, 4, 3).unwrap()).unwrap();
        fs::write(root.join("labels.csv"), buf).unwrap();
        let c = two_block_corpus(40, 20, 16, 0.1, 0.3, 3).unwrap();
        for (name, m) in [("v.bow", &c.corrupted), ("t.bow", &c.companion)] {
            let mut buf = Vec::new();
            io::write_bow(&mut buf, m).unwrap();
            fs::write(root.join(name), buf).unwrap();
        }
        fs::write(root.join("edges.csv"), "0,1,1\n1,2,0.5\n2,3,2\n3,0,1\n0,2,0.25\n").unwrap();
        Self { _dir: dir, root }
    }

    fn p(&self, name: &str) -> String {
        self.root.join(name).to_str().unwrap().to_owned()
    }
}

/// Runs a command writing to `out` and returns stdout plus every output file.
fn invoke(args: &[String], out: &Path, workers: &str) -> Vec<(String, Vec<u8>)> {
    let mut full: Vec<String> = vec!["--workers".into(), workers.into()];
    full.extend_from_slice(args);
    full.extend(["--output".into(), out.to_str().unwrap().into()]);
    let o = Command::new(env!("CARGO_BIN_EXE_l1ssl")).args(&full).output().unwrap();
    assert!(o.status.success(), "{full:?}: {}", String::from_utf8_lossy(&o.stderr));
    let mut files = vec![("<stdout>".to_owned(), o.stdout)];
    let mut names: Vec<_> = fs::read_dir(out)
        .map(|d| d.map(|e| e.unwrap().file_name().into_string().unwrap()).collect())
        .unwrap_or_default();
    names.sort();
    for name in names {
        files.push((name.clone(), fs::read(out.join(&name)).unwrap()));
    }
    files
}

#[test]
fn criterion_9_determinism() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let inp = Inputs::new();
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let commands: Vec<(&str, Vec<String>)> = vec![
        ("moons-demo", s(&["moons-demo", "--runs", "6", "--seed", "9"])),
        (
            "classify",
            s(&[
                "classify",
                "--input",
                &inp.p("x.csv"),
                "--labels",
                &inp.p("labels.csv"),
                "--truth",
                &inp.p("truth.txt"),
                "--seed",
                "9",
            ]),
        ),
        (
            "noise-sweep",
            s(&["noise-sweep", "--runs", "4", "--noise-fraction", "0,0.2", "--seed", "9"]),
        ),
        (
            "refine-bow",
            s(&[
                "refine-bow",
                "--input",
                &inp.p("v.bow"),
                "--input",
                &inp.p("t.bow"),
                "--k",
                "8",
                "--m",
                "6",
                "--seed",
                "9",
            ]),
        ),
        (
            "eigen-dump",
            s(&["eigen-dump", "--input", &inp.p("x.csv"), "--m", "5", "--seed", "9"]),
        ),
        (
            "eigen-dump --edges",
            s(&["eigen-dump", "--edges", &inp.p("edges.csv"), "--m", "3", "--seed", "9"]),
        ),
    ];
    let mut differing = Vec::new();
    for (i, (name, args)) in commands.iter().enumerate() {
        let a = invoke(args, &inp.root.join(format!("a{i}")), "0");
        let b = invoke(args, &inp.root.join(format!("b{i}")), "3");
        if a != b || a.len() < 2 {
            differing.push(*name);
        }
    }
    report(
        9,
        "byte-identical outputs across two invocations",
        differing.is_empty(),
        &if differing.is_empty() {
            format!("{} commands identical (default vs 3 workers)", commands.len())
        } else {
            format!("differing: {differing:?}")
        },
    );
}
