use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};

use fedgraph::baselines::{avg_sq_error, subgradient_observed, SubgradientConfig};
use fedgraph::edge_select::{local_es_candidate_graph, select_edges};
use fedgraph::experiment::{
    self, accuracy_split, cross_validate, ingest_dataset, load_problem, parse_config, run_experiment, trace_run,
    write_error_trace, write_objective_trace, write_summary_file, LambdaChoice, Problem, RunConfig,
};
use fedgraph::fedadmm::{reference_minimizer, run_observed, ReferenceOptions, SolverConfig};
use fedgraph::models::NewtonOptions;
use fedgraph::synth::{generate, write_param_csv, SynthConfig};
use fedgraph::Error;

#[derive(Parser)]
#[command(name = "fedgraph", version, about = "Federated M-estimation on device graphs")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one synthetic replication (graphs, true parameters, device CSVs).
    Synth {
        #[arg(long, default_value_t = 0)]
        cell: usize,
        #[arg(long, default_value_t = 0)]
        rep: usize,
    },
    /// Fit the fused objective once and write the estimate.
    Solve {
        #[arg(long, default_value_t = 0)]
        cell: usize,
        /// Use the deterministic reference solver instead of the stochastic engine.
        #[arg(long)]
        reference: bool,
        /// Choose lambda by cross-validation.
        #[arg(long)]
        cv: bool,
        /// Record learning-curve traces every N iterations (0 disables).
        #[arg(long, default_value_t = 0)]
        trace_every: usize,
    },
    /// Test the edges of the given graph (or of all pairs) and write the report.
    SelectEdges {
        #[arg(long, default_value_t = 0)]
        cell: usize,
        #[arg(long)]
        all_pairs: bool,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Run the full sweep; resumes from completed cells.
    Sweep,
    /// Compare convergence of the engine against GD and SGD.
    Bench {
        #[arg(long, default_value_t = 0)]
        cell: usize,
        #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000,4000")]
        checkpoints: Vec<usize>,
    },
    /// Load a directory of device CSVs, report exclusions, optionally score methods on splits.
    Ingest {
        /// Directory of device files (defaults to `data_dir`).
        dir: Option<PathBuf>,
        #[arg(long)]
        min_samples: Option<usize>,
        /// Number of random 2/3-1/3 splits to score (0 skips scoring).
        #[arg(long, default_value_t = 0)]
        repeats: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for configuration problems, 3 for numeric failures, 1 for I/O.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(fe) = cause.downcast_ref::<Error>() {
            return match fe {
                Error::Io(_) | Error::Csv(_) => 1,
                _ if fe.is_config_error() => 2,
                _ => 3,
            };
        }
        if cause.downcast_ref::<ConfigProblem>().is_some() {
            return 2;
        }
    }
    1
}

#[derive(Debug)]
struct ConfigProblem(String);

impl std::fmt::Display for ConfigProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigProblem {}

fn config_problem(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(ConfigProblem(msg.into()))
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| config_problem("this command needs --config"))?;
    let mut cfg = parse_config(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(config_problem("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let cfg = load_config(&cli)?;
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    match &cli.command {
        Command::Synth { cell, rep } => synth(&cfg, *cell, *rep, &out),
        Command::Solve {
            cell,
            reference,
            cv,
            trace_every,
        } => solve(&cfg, *cell, *reference, *cv, *trace_every, &out),
        Command::SelectEdges { cell, all_pairs, alpha } => {
            let problem = load_problem(&cfg, *cell, 0)?;
            let fits = problem.data.local_fits(&NewtonOptions::default())?;
            let alpha = alpha.unwrap_or(cfg.selection.alpha);
            let report = if *all_pairs {
                local_es_candidate_graph(&fits, alpha)?
            } else {
                select_edges(&problem.graph, &fits, alpha)?
            };
            report.write_csv(create(&out.join("edge_tests.csv"))?)?;
            report.selected.write_text(create(&out.join("selected_graph.txt"))?)?;
            println!(
                "kept {} of {} edges (threshold {:.4}), {} components",
                report.selected.num_edges(),
                report.num_candidates(),
                report.threshold,
                report.selected.num_components()
            );
            Ok(())
        }
        Command::Sweep => {
            let summary = run_experiment(&cfg)?;
            write_summary_file(&summary.rows, &out.join("summary.csv"))?;
            println!(
                "{} rows in {} ({} cells run, {} reused)",
                summary.rows.len(),
                summary.results_path.display(),
                summary.cells_run,
                summary.cells_skipped
            );
            Ok(())
        }
        Command::Bench { cell, checkpoints } => bench(&cfg, *cell, checkpoints, &out),
        Command::Ingest {
            dir,
            min_samples,
            repeats,
        } => ingest(&cfg, dir.as_deref(), *min_samples, *repeats, &out),
    }
}

fn synth(cfg: &RunConfig, cell: usize, rep: usize, out: &Path) -> Result<()> {
    let cells = experiment::cells(cfg);
    let c = cells
        .get(cell)
        .ok_or_else(|| config_problem(format!("cell {cell} out of range (have {})", cells.len())))?;
    let clusters = cfg
        .synth
        .as_ref()
        .ok_or_else(|| config_problem("synth needs a `synth` block"))?
        .clusters;
    let sc = SynthConfig {
        num_devices: c.num_devices,
        clusters,
        dim: cfg.model.dim,
        samples_per_device: c.samples_per_device,
        family: cfg.model.family,
        corruption: c.corruption,
        sigma: cfg.model.sigma,
        seed: fedgraph::rng::derive_seed(cfg.seed, fedgraph::rng::Domain::Experiment, cell as u64, rep as u64),
    };
    let inst = generate(&sc)?;
    inst.write_dir(out)?;
    println!(
        "wrote {} devices, {} edges ({} true) to {}",
        sc.num_devices,
        inst.graph.num_edges(),
        inst.graph0.num_edges(),
        out.display()
    );
    Ok(())
}

fn chosen_lambda(cfg: &RunConfig, problem: &Problem, use_cv: bool) -> Result<f64> {
    let wants_cv = use_cv || matches!(cfg.sweep.lambda.first(), Some(LambdaChoice::Keyword(_)));
    match cfg.sweep.lambda.first() {
        Some(LambdaChoice::Value(v)) if !use_cv => Ok(*v),
        _ if wants_cv => {
            let solver = cfg.solver.clamped_to(&problem.data);
            Ok(cross_validate(&problem.graph, &problem.data, solver.norm, &cfg.cv, &solver, cfg.seed)?.lambda)
        }
        _ => Ok(cfg.solver.lambda),
    }
}

fn solve(cfg: &RunConfig, cell: usize, reference: bool, use_cv: bool, trace_every: usize, out: &Path) -> Result<()> {
    let problem = load_problem(cfg, cell, 0)?;
    let lambda = chosen_lambda(cfg, &problem, use_cv)?;
    let solver = SolverConfig {
        lambda,
        seed: cfg.seed,
        ..cfg.solver.clamped_to(&problem.data)
    };
    let start = Instant::now();
    let theta = if reference {
        let fit = reference_minimizer(
            &problem.graph,
            &problem.data,
            lambda,
            solver.norm,
            &ReferenceOptions::default(),
        )?;
        println!("reference: {} iterations, KKT residual {:.2e}", fit.iterations, fit.kkt_residual);
        fit.theta
    } else if let Some(a) = &cfg.availability {
        let model = a.model(problem.data.num_devices())?;
        fedgraph::availability::run_with_availability(&problem.graph, &problem.data, &solver, model)?
            .0
            .theta_bar
    } else if trace_every > 0 {
        let points = trace_run(
            &problem.graph,
            &problem.data,
            &solver,
            trace_every,
            problem.theta_star.as_ref(),
        )?;
        write_objective_trace(&points, create(&out.join("trace_objective.csv"))?)?;
        if problem.theta_star.is_some() {
            write_error_trace(&points, create(&out.join("trace_error.csv"))?)?;
        }
        fedgraph::fedadmm::run(&problem.graph, &problem.data, &solver)?.theta_bar
    } else {
        fedgraph::fedadmm::run(&problem.graph, &problem.data, &solver)?.theta_bar
    };
    if theta.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence {
            iterations: solver.iterations,
            residual: f64::NAN,
        }
        .into());
    }
    write_param_csv(&theta, &out.join("theta_hat.csv"))?;
    let f = fedgraph::penalty::objective(&problem.graph, &problem.data, &theta, lambda, solver.norm)?;
    print!("lambda {lambda:.6e}, objective {f:.6}");
    if let Some(t) = &problem.theta_star {
        print!(", error {:.6}", avg_sq_error(&theta, t)?);
    }
    println!(" ({:.2?})", start.elapsed());
    Ok(())
}

fn bench(cfg: &RunConfig, cell: usize, checkpoints: &[usize], out: &Path) -> Result<()> {
    let mut checkpoints = checkpoints.to_vec();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let last = *checkpoints
        .last()
        .ok_or_else(|| config_problem("--checkpoints must list at least one T"))?;
    if checkpoints[0] == 0 {
        return Err(config_problem("checkpoints must be positive"));
    }
    let problem = load_problem(cfg, cell, 0)?;
    let (g, data) = (&problem.graph, &problem.data);
    let lambda = chosen_lambda(cfg, &problem, false)?;
    let solver = SolverConfig {
        lambda,
        iterations: last,
        seed: cfg.seed,
        ..cfg.solver.clamped_to(data)
    };
    let reference = reference_minimizer(g, data, lambda, solver.norm, &ReferenceOptions::default())?.theta;
    let mut rows: Vec<(String, usize, f64, f64)> = Vec::new();
    let start = Instant::now();
    run_observed(g, data, &solver, |st| {
        if checkpoints.binary_search(&st.t).is_ok() {
            let a = st.theta_bar().dist_sq(&reference) / data.num_devices() as f64;
            rows.push(("fed_admm".into(), st.t, a, start.elapsed().as_secs_f64()));
        }
    })?;
    for (name, batch) in [("gd", None), ("sgd", Some(solver.batch_size))] {
        let sub = SubgradientConfig {
            iterations: last,
            batch_size: batch,
            seed: cfg.seed,
            ..cfg.subgradient
        };
        let start = Instant::now();
        subgradient_observed(g, data, lambda, solver.norm, &sub, |t, th| {
            if checkpoints.binary_search(&t).is_ok() {
                let a = th.dist_sq(&reference) / data.num_devices() as f64;
                rows.push((name.into(), t, a, start.elapsed().as_secs_f64()));
            }
        })?;
    }
    let mut w = create(&out.join("bench.csv"))?;
    use std::io::Write;
    writeln!(w, "method,T,a_T,seconds")?;
    for (m, t, a, s) in &rows {
        writeln!(w, "{m},{t},{a},{s}")?;
        println!("{m:>9} T={t:<6} a_T={a:.3e}");
    }
    w.flush()?;
    Ok(())
}

fn ingest(cfg: &RunConfig, dir: Option<&Path>, min_samples: Option<usize>, repeats: usize, out: &Path) -> Result<()> {
    let dir = dir
        .map(Path::to_path_buf)
        .or_else(|| cfg.data_dir.clone())
        .ok_or_else(|| config_problem("ingest needs a directory argument or `data_dir`"))?;
    let min_samples = min_samples.unwrap_or(cfg.min_samples);
    let ing = ingest_dataset(&dir, &cfg.model_spec()?, min_samples)?;
    let mut w = create(&out.join("devices.csv"))?;
    use std::io::Write;
    writeln!(w, "device,samples,status")?;
    for (name, d) in ing.names.iter().zip(&ing.dataset.devices) {
        writeln!(w, "{name},{},kept", d.len())?;
    }
    for (name, n) in &ing.excluded {
        eprintln!("warning: excluding {name} ({n} samples < {min_samples})");
        writeln!(w, "{name},{n},excluded")?;
    }
    w.flush()?;
    println!(
        "loaded {} devices ({} excluded) from {}",
        ing.dataset.num_devices(),
        ing.excluded.len(),
        dir.display()
    );
    if repeats > 0 {
        let graph = ing
            .graph
            .clone()
            .unwrap_or_else(|| fedgraph::DeviceGraph::empty(ing.dataset.num_devices()));
        let summary = accuracy_split(cfg, &ing.dataset, &graph, repeats, cfg.seed)?;
        let mut w = create(&out.join("accuracy.csv"))?;
        writeln!(w, "method,metric,mean,sd,repeats")?;
        for s in &summary {
            writeln!(w, "{},{},{},{},{repeats}", s.method, s.metric, s.mean, s.sd)?;
            println!("{:>18} {} {:.4} ({:.4})", s.method.name(), s.metric, s.mean, s.sd);
        }
        w.flush()?;
    }
    Ok(())
}
