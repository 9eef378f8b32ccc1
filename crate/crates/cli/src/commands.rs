//! Subcommand implementations. Each one computes its results, writes the
//! data file(s) and the run manifest, prints a short summary, and maps
//! outcomes onto the exit-code contract.

use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use lrga_core::alloc_track;
use lrga_core::graph::random_graph;
use lrga_core::graph6::parse_graph6_lines;
use lrga_core::kernels::phi_homogeneous;
use lrga_core::lrga::{dense_attention_oracle, lrga_forward, LrgaParams};
use lrga_core::mlp::{sample_complexity_experiment, MonomialTask, TrainConfig};
use lrga_core::multi_index::{multi_indices_up_to, MultiIndex};
use lrga_core::pair_tensor::iso_type_tensor;
use lrga_core::rgnn::{
    extended_factorization, factorization_error, feature_rng, sample_features,
    FeatureDistribution, RandomFeatureConfig,
};
use lrga_core::vandermonde::{build_vandermonde, power_basis_eval, solve_monomial_coeffs};
use lrga_core::wl::{iso_test, IsoVerdict};

use crate::output::{fmt_float, write_csv, write_json, CliError, ReportFormat, RunContext};
use crate::{DistKind, FactorizeArgs, IsoArgs, KernelCheckArgs, LearnArgs, LrgaBenchArgs};

const KERNEL_TOLERANCE: f64 = 1e-9;
const DECOMPOSITION_TOLERANCE: f64 = 1e-6;
/// (degree, dimension) pairs covered by the monomial-decomposition suite.
const DECOMPOSITION_SYSTEMS: [(u32, usize); 5] = [(2, 1), (3, 1), (4, 1), (2, 2), (3, 2)];

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::usage(e.to_string())
}

pub fn run_iso(ctx: &RunContext, args: &IsoArgs) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct GraphEntry {
        file: String,
        record: usize,
        nodes: usize,
    }
    #[derive(Serialize)]
    struct Pair {
        left: usize,
        right: usize,
        #[serde(flatten)]
        verdict: IsoVerdict,
    }
    #[derive(Serialize)]
    struct Report {
        algorithm: &'static str,
        graphs: Vec<GraphEntry>,
        pairs: Vec<Pair>,
    }

    let mut graphs = Vec::new();
    let mut entries = Vec::new();
    for file in &args.files {
        let text = std::fs::read_to_string(file)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", file.display())))?;
        let records = parse_graph6_lines(&text)
            .map_err(|e| CliError::usage(format!("{}: {e}", file.display())))?;
        if records.is_empty() {
            return Err(CliError::usage(format!(
                "{}: no graph6 records",
                file.display()
            )));
        }
        for (record, g) in records.into_iter().enumerate() {
            entries.push(GraphEntry {
                file: file.display().to_string(),
                record,
                nodes: g.n(),
            });
            graphs.push(g);
        }
    }
    if graphs.len() < 2 {
        return Err(CliError::usage(format!(
            "need at least two graphs to compare, got {}",
            graphs.len()
        )));
    }

    let mut pairs = Vec::new();
    for i in 0..graphs.len() {
        for j in i + 1..graphs.len() {
            let verdict = iso_test(&graphs[i], &graphs[j], args.algorithm.kind(), None);
            pairs.push(Pair {
                left: i,
                right: j,
                verdict,
            });
        }
    }

    let format = ctx.format_or(ReportFormat::Json);
    let path = ctx.data_path("iso", format);
    match format {
        ReportFormat::Json => {
            let report = Report {
                algorithm: args.algorithm.name(),
                graphs: entries,
                pairs,
            };
            write_json(&path, &report)?;
            for p in &report.pairs {
                println!("{} vs {}: {}", p.left, p.right, verdict_word(&p.verdict));
            }
        }
        ReportFormat::Csv => {
            let rows: Vec<Vec<String>> = pairs
                .iter()
                .map(|p| {
                    let (word, round) = match p.verdict {
                        IsoVerdict::Distinguished { round } => ("distinguished", round.to_string()),
                        IsoVerdict::Indistinguishable => ("indistinguishable", String::new()),
                    };
                    vec![p.left.to_string(), p.right.to_string(), word.to_string(), round]
                })
                .collect();
            write_csv(&path, &["left", "right", "verdict", "round"], &rows)?;
            for p in &pairs {
                println!("{} vs {}: {}", p.left, p.right, verdict_word(&p.verdict));
            }
        }
    }
    println!("report: {}", path.display());
    ctx.write_manifest(
        "iso",
        json!({
            "algorithm": args.algorithm.name(),
            "files": args.files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>(),
        }),
        &[&path],
    )
}

fn verdict_word(v: &IsoVerdict) -> String {
    match v {
        IsoVerdict::Distinguished { round } => format!("distinguished (round {round})"),
        IsoVerdict::Indistinguishable => "indistinguishable".to_string(),
    }
}

#[derive(Serialize, Clone)]
struct IdentityResult {
    name: &'static str,
    cases: usize,
    max_error: f64,
    tolerance: f64,
    pass: bool,
}

pub fn run_kernel_check(ctx: &RunContext, args: &KernelCheckArgs) -> Result<(), CliError> {
    if args.kernel_cases == 0 || args.lemma_points == 0 {
        return Err(CliError::usage("case counts must be positive"));
    }

    // Suite 1: ⟨φ(x), φ(y)⟩ must equal ⟨x, y⟩^degree.
    let mut rng = feature_rng(ctx.seed, 0);
    let mut kernel_max = 0.0f64;
    for case in 0..args.kernel_cases {
        let dim = rng.random_range(1..=args.max_dim.max(1));
        let degree = rng.random_range(0..=args.max_degree);
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
        let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
        let fx = phi_homogeneous(&x, degree, None).map_err(usage)?;
        let fy = phi_homogeneous(&y, degree, None).map_err(usage)?;
        let mut lhs: f64 = fx.iter().zip(&fy).map(|(a, b)| a * b).sum();
        let rhs = x
            .iter()
            .zip(&y)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            .powi(degree as i32);
        if args.inject_perturbation && case == 0 {
            // Negative control: a visible corruption the suite must flag.
            lhs += 1e-3 * rhs.abs().max(1.0);
        }
        kernel_max = kernel_max.max((lhs - rhs).abs() / rhs.abs().max(1.0));
    }

    // Suite 2: every monomial must decompose into shifted powers with the
    // solved coefficients, whose 1-norm stays under the conditioning bound.
    let mut rng = feature_rng(ctx.seed, 1);
    let mut decomp_max = 0.0f64;
    let mut decomp_cases = 0usize;
    let mut norm_excess = f64::NEG_INFINITY;
    let mut norm_cases = 0usize;
    for (degree, dim) in DECOMPOSITION_SYSTEMS {
        let system = build_vandermonde(degree, dim, None).map_err(usage)?;
        let c = system.conditioning_constant();
        for delta in multi_indices_up_to(dim, degree, usize::MAX).map_err(usage)? {
            let coeffs = solve_monomial_coeffs(&system, &delta).map_err(usage)?;
            let l1: f64 = coeffs.iter().map(|v| v.abs()).sum();
            norm_excess = norm_excess.max(l1 - c);
            norm_cases += 1;
            for _ in 0..args.lemma_points {
                let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                let target = delta.eval(&x);
                let got = power_basis_eval(&system, &coeffs, &x);
                decomp_max = decomp_max.max((got - target).abs() / target.abs().max(1.0));
                decomp_cases += 1;
            }
        }
    }

    let identities = vec![
        IdentityResult {
            name: "polynomial_kernel",
            cases: args.kernel_cases,
            max_error: kernel_max,
            tolerance: KERNEL_TOLERANCE,
            pass: kernel_max <= KERNEL_TOLERANCE,
        },
        IdentityResult {
            name: "monomial_decomposition",
            cases: decomp_cases,
            max_error: decomp_max,
            tolerance: DECOMPOSITION_TOLERANCE,
            pass: decomp_max <= DECOMPOSITION_TOLERANCE,
        },
        IdentityResult {
            name: "coefficient_norm_bound",
            cases: norm_cases,
            max_error: norm_excess,
            tolerance: DECOMPOSITION_TOLERANCE,
            pass: norm_excess <= DECOMPOSITION_TOLERANCE,
        },
    ];
    let pass = identities.iter().all(|i| i.pass);

    #[derive(Serialize)]
    struct Report {
        identities: Vec<IdentityResult>,
        pass: bool,
    }

    let format = ctx.format_or(ReportFormat::Json);
    let path = ctx.data_path("kernel-check", format);
    match format {
        ReportFormat::Json => write_json(&path, &Report { identities: identities.clone(), pass })?,
        ReportFormat::Csv => {
            let rows: Vec<Vec<String>> = identities
                .iter()
                .map(|i| {
                    vec![
                        i.name.to_string(),
                        i.cases.to_string(),
                        fmt_float(i.max_error),
                        fmt_float(i.tolerance),
                        i.pass.to_string(),
                    ]
                })
                .collect();
            write_csv(&path, &["identity", "cases", "max_error", "tolerance", "pass"], &rows)?;
        }
    }
    for i in &identities {
        println!(
            "{}: max error {:.3e} over {} cases (tolerance {:.0e}) {}",
            i.name,
            i.max_error,
            i.cases,
            i.tolerance,
            if i.pass { "ok" } else { "VIOLATED" }
        );
    }
    println!("report: {}", path.display());
    ctx.write_manifest(
        "kernel-check",
        json!({
            "kernel_cases": args.kernel_cases,
            "max_degree": args.max_degree,
            "max_dim": args.max_dim,
            "lemma_points": args.lemma_points,
            "inject_perturbation": args.inject_perturbation,
        }),
        &[&path],
    )?;
    if pass {
        Ok(())
    } else {
        let failed: Vec<&str> = identities.iter().filter(|i| !i.pass).map(|i| i.name).collect();
        Err(CliError::Violation(format!(
            "identity check failed: {}",
            failed.join(", ")
        )))
    }
}

pub fn run_lrga_bench(ctx: &RunContext, args: &LrgaBenchArgs) -> Result<(), CliError> {
    for pair in args.n_list.windows(2) {
        if pair[1] <= pair[0] {
            return Err(CliError::usage("--n-list must be strictly ascending"));
        }
    }
    if args.trials == 0 {
        return Err(CliError::usage("--trials must be positive"));
    }
    let params = LrgaParams::random_init(args.d_in, args.kappa, ctx.seed).map_err(usage)?;

    #[derive(Serialize)]
    struct BenchRow {
        n: usize,
        kappa: usize,
        d_in: usize,
        forward_ms: f64,
        peak_bytes: usize,
        dense_ms: Option<f64>,
    }

    let mut rows = Vec::with_capacity(args.n_list.len());
    for &n in &args.n_list {
        let mut rng = feature_rng(ctx.seed, n as u64);
        let x = Array2::from_shape_fn((n, args.d_in), |_| rng.random_range(-1.0..1.0));
        let live_before = alloc_track::current_bytes();
        alloc_track::reset_peak();
        let mut times = Vec::with_capacity(args.trials);
        for _ in 0..args.trials {
            let t0 = Instant::now();
            let out = lrga_forward(&x, &params).map_err(usage)?;
            times.push(t0.elapsed().as_secs_f64() * 1e3);
            std::hint::black_box(&out);
        }
        let peak_bytes = alloc_track::peak_bytes().saturating_sub(live_before);
        let dense_ms = if n <= 256 {
            let mut dense_times = Vec::with_capacity(args.trials);
            for _ in 0..args.trials {
                let t0 = Instant::now();
                let out = dense_attention_oracle(&x, &params).map_err(usage)?;
                dense_times.push(t0.elapsed().as_secs_f64() * 1e3);
                std::hint::black_box(&out);
            }
            Some(median(dense_times))
        } else {
            None
        };
        rows.push(BenchRow {
            n,
            kappa: args.kappa,
            d_in: args.d_in,
            forward_ms: median(times),
            peak_bytes,
            dense_ms,
        });
    }

    let format = ctx.format_or(ReportFormat::Csv);
    let path = ctx.data_path("lrga-bench", format);
    match format {
        ReportFormat::Json => write_json(&path, &rows)?,
        ReportFormat::Csv => {
            let csv_rows: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        r.kappa.to_string(),
                        r.d_in.to_string(),
                        fmt_float(r.forward_ms),
                        r.peak_bytes.to_string(),
                        r.dense_ms.map(fmt_float).unwrap_or_default(),
                    ]
                })
                .collect();
            write_csv(
                &path,
                &["n", "kappa", "d_in", "forward_ms", "peak_bytes", "dense_ms"],
                &csv_rows,
            )?;
        }
    }
    for r in &rows {
        println!(
            "n={}: forward {:.3} ms, peak {} bytes{}",
            r.n,
            r.forward_ms,
            r.peak_bytes,
            r.dense_ms
                .map(|d| format!(", dense {d:.3} ms"))
                .unwrap_or_default()
        );
    }
    println!("report: {}", path.display());
    ctx.write_manifest(
        "lrga-bench",
        json!({
            "n_list": args.n_list,
            "kappa": args.kappa,
            "d_in": args.d_in,
            "trials": args.trials,
        }),
        &[&path],
    )
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

pub fn run_factorize(ctx: &RunContext, args: &FactorizeArgs) -> Result<(), CliError> {
    if args.n == 0 {
        return Err(CliError::usage("--n must be positive"));
    }
    if args.trials == 0 {
        return Err(CliError::usage("--trials must be positive"));
    }
    if !(0.0..=1.0).contains(&args.edge_prob) {
        return Err(CliError::usage("--edge-prob must lie in [0, 1]"));
    }
    let distribution = match args.dist {
        DistKind::Uniform => FeatureDistribution::Uniform {
            half_width: 3.0f64.sqrt(),
        },
        DistKind::Gaussian => FeatureDistribution::Gaussian { variance: 1.0 },
    };
    let g = random_graph(args.n, args.edge_prob, ctx.seed);
    let adjacency = g.adjacency().to_owned();
    let target = iso_type_tensor(&g);

    #[derive(Serialize)]
    struct FactorizeRow {
        n: usize,
        d: usize,
        trial: u64,
        statistic: &'static str,
        value: f64,
    }

    let mut rows = Vec::new();
    for &d in &args.d_list {
        for trial in 0..args.trials {
            let cfg = RandomFeatureConfig {
                dim: d,
                distribution: distribution.clone(),
                seed: ctx.seed,
            };
            let r = sample_features(args.n, &cfg, trial).map_err(usage)?;
            let dev = factorization_error(&adjacency, &r).map_err(usage)?;
            let recon_dev = extended_factorization(&g, &r)
                .map_err(usage)?
                .reconstruct()
                .max_abs_diff(&target);
            for (statistic, value) in [
                ("gram_dev", dev.gram_dev),
                ("adj_dev", dev.adj_dev),
                ("recon_dev", recon_dev),
            ] {
                rows.push(FactorizeRow {
                    n: args.n,
                    d,
                    trial,
                    statistic,
                    value,
                });
            }
        }
    }

    let format = ctx.format_or(ReportFormat::Csv);
    let path = ctx.data_path("factorize", format);
    match format {
        ReportFormat::Json => write_json(&path, &rows)?,
        ReportFormat::Csv => {
            let csv_rows: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        r.d.to_string(),
                        r.trial.to_string(),
                        r.statistic.to_string(),
                        fmt_float(r.value),
                    ]
                })
                .collect();
            write_csv(&path, &["n", "d", "trial", "statistic", "value"], &csv_rows)?;
        }
    }
    for &d in &args.d_list {
        let grams: Vec<f64> = rows
            .iter()
            .filter(|r| r.d == d && r.statistic == "gram_dev")
            .map(|r| r.value)
            .collect();
        println!("d={d}: median gram_dev {:.3e}", median(grams));
    }
    println!("report: {}", path.display());
    ctx.write_manifest(
        "factorize",
        json!({
            "n": args.n,
            "d_list": args.d_list,
            "dist": match args.dist { DistKind::Uniform => "uniform", DistKind::Gaussian => "gaussian" },
            "trials": args.trials,
            "edge_prob": args.edge_prob,
        }),
        &[&path],
    )
}

pub fn run_learn(ctx: &RunContext, args: &LearnArgs) -> Result<(), CliError> {
    let task = MonomialTask::new(MultiIndex(args.delta.clone()));
    let cfg = TrainConfig {
        learning_rate: args.learning_rate,
        steps: args.steps,
        batch: args.batch,
        init_scale: args.init_scale,
        seed: ctx.seed,
    };
    let table = sample_complexity_experiment(&task, &args.m_grid, &args.seeds, args.width, &cfg)
        .map_err(usage)?;

    let format = ctx.format_or(ReportFormat::Csv);
    let mut outputs: Vec<std::path::PathBuf> = Vec::new();
    match format {
        ReportFormat::Json => {
            let path = ctx.data_path("learn", format);
            write_json(&path, &table)?;
            outputs.push(path);
        }
        ReportFormat::Csv => {
            let path = ctx.data_path("learn", format);
            let rows: Vec<Vec<String>> = table
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.m.to_string(),
                        fmt_float(r.median_test_mse),
                        r.bound.map(fmt_float).unwrap_or_default(),
                    ]
                })
                .collect();
            write_csv(&path, &["m", "median_test_mse", "bound"], &rows)?;
            outputs.push(path);
            let cells_path = ctx.sibling_path("learn_cells.csv");
            let cell_rows: Vec<Vec<String>> = table
                .cells
                .iter()
                .map(|c| {
                    vec![
                        c.m.to_string(),
                        c.seed.to_string(),
                        fmt_float(c.train_mse),
                        fmt_float(c.test_mse),
                        c.diverged.to_string(),
                    ]
                })
                .collect();
            write_csv(
                &cells_path,
                &["m", "seed", "train_mse", "test_mse", "diverged"],
                &cell_rows,
            )?;
            outputs.push(cells_path);
        }
    }
    for r in &table.rows {
        println!("m={}: median test MSE {:.6e}", r.m, r.median_test_mse);
    }
    for path in &outputs {
        println!("report: {}", path.display());
    }
    let output_refs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
    ctx.write_manifest(
        "learn",
        json!({
            "delta": args.delta,
            "m_grid": args.m_grid,
            "seeds": args.seeds,
            "width": args.width,
            "learning_rate": args.learning_rate,
            "steps": args.steps,
            "batch": args.batch,
            "init_scale": args.init_scale,
        }),
        &output_refs,
    )?;
    // With a zero step budget this is an initial-loss-only report; the
    // monotonicity property only applies to trained runs.
    if args.steps > 0 && !table.monotone_ok {
        return Err(CliError::Violation(format!(
            "median test MSE is not weakly monotone over the sample grid ({} inversions)",
            table.inversions
        )));
    }
    Ok(())
}
