//! Command-line shell: `test` runs the structured-null test on a CSV,
//! `simulate` sweeps simulated scenarios, `mapper` exports the graph, and
//! `oracle` prints numerical checks of the theoretical guarantees.
//!
//! Exit codes: 0 success, 2 config or schema error, 3 numeric failure
//! (the message names the stage).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use covmapper::config::{RunConfig, ScenarioConfig};
use covmapper::csvio::read_csv;
use covmapper::error::Error;
use covmapper::nulltest::{run_pipeline, run_structured_null_test, NullTestResult};
use covmapper::report::{
    communities_csv, dgp_label, histogram_svg, mapper_report, report_json, scenario_csv,
    summary_csv, ScenarioRow,
};
use covmapper::rng::{derive_seed, stream_rng, OBSERVED_STREAM};
use covmapper::simulation::run_scenario;
use covmapper::teststat::make_split;
use covmapper::theory::{
    finite_population_variance_check, permutation_decay_check, population_dissociation_mc,
    IntervalPartition,
};
use covmapper::{CovModel, DgpKind, SplitMode};

#[derive(Parser)]
#[command(
    name = "covmapper",
    version,
    about = "Tests Mapper-graph community structure against covariance-matched Gaussian nulls"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the structured-null test on a CSV dataset.
    Test(RunArgs),
    /// Run simulated scenarios and tabulate rejection rates.
    Simulate(RunArgs),
    /// Build the Mapper graph and export it with its community overlay.
    Mapper(RunArgs),
    /// Print bound-vs-estimate tables for the theoretical guarantees.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Directory for output files (created if absent).
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct OracleArgs {
    /// Monte Carlo samples for the population-bound check.
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

/// An error tagged with the stage it happened in.
struct StageError {
    stage: &'static str,
    error: Error,
}

trait Stage<T> {
    fn stage(self, name: &'static str) -> Result<T, StageError>;
}

impl<T> Stage<T> for covmapper::Result<T> {
    fn stage(self, name: &'static str) -> Result<T, StageError> {
        self.map_err(|error| StageError { stage: name, error })
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::InvalidData(_)
        | Error::InvalidParameter(_)
        | Error::Config(_)
        | Error::Io(_)
        | Error::Csv(_)
        | Error::Json(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Mapper(args) => cmd_mapper(args),
        Command::Oracle(args) => cmd_oracle(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(StageError { stage, error }) => {
            eprintln!("error [{stage}]: {error}");
            ExitCode::from(exit_code_for(&error))
        }
    }
}

fn init_workers(workers: Option<usize>) -> Result<(), StageError> {
    let Some(w) = workers else { return Ok(()) };
    if w == 0 {
        return Err(StageError {
            stage: "config",
            error: Error::Config("--workers must be at least 1".into()),
        });
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(w)
        .build_global()
        .map_err(|e| StageError {
            stage: "config",
            error: Error::Config(format!("worker pool: {e}")),
        })
}

fn load_run_config(args: &RunArgs) -> Result<RunConfig, StageError> {
    let mut config = RunConfig::load(&args.config).stage("config")?;
    if let Some(seed) = args.seed {
        config.null.base_seed = seed;
    }
    Ok(config)
}

fn write_file(dir: &std::path::Path, name: &str, content: &str) -> covmapper::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, content)?;
    Ok(path)
}

fn print_test_summary(config: &RunConfig, result: &NullTestResult) {
    let com = &result.observed.communities;
    let modularity = com
        .modularity
        .map(|q| format!("{q:.4}"))
        .unwrap_or_else(|| "undefined (no edges)".into());
    println!(
        "graph: {} vertices, {} edges; communities: K = {} (sizes {:?}, modularity {})",
        result.observed.graph.n_vertices(),
        result.observed.graph.n_edges(),
        com.n_communities,
        com.sizes,
        modularity
    );
    let fmt_z = |z: Option<f64>| {
        z.map(|z| format!("{z:.4}"))
            .unwrap_or_else(|| "undefined (degenerate null)".into())
    };
    println!(
        "structured null (B = {}): D = {:.6}, z = {}, p_hat = {:.6}",
        result.all.null_samples.len(),
        result.all.d_obs,
        fmt_z(result.all.z),
        result.all.p_hat
    );
    if let Some(excl) = &result.excl_singletons {
        println!(
            "  singletons excluded: D = {:.6}, z = {}, p_hat = {:.6}",
            excl.d_obs,
            fmt_z(excl.z),
            excl.p_hat
        );
    }
    if config.report.d_max {
        println!(
            "per-feature maximum: D_max = {:.6}, z = {}, p_hat = {:.6}",
            result.d_max.d_obs,
            fmt_z(result.d_max.z),
            result.d_max.p_hat
        );
        if let Some(excl) = &result.d_max_excl_singletons {
            println!(
                "  singletons excluded: D_max = {:.6}, z = {}, p_hat = {:.6}",
                excl.d_obs,
                fmt_z(excl.z),
                excl.p_hat
            );
        }
    }
    if let Some(perm) = &result.permutation {
        println!(
            "permutation baseline ({} draws): mean = {:.6}, sd = {:.6}, z = {:.4}",
            perm.samples.len(),
            perm.mean,
            perm.sd,
            perm.z
        );
    }
    if config.report.null_modularity {
        let qs: Vec<f64> = result
            .replicates
            .iter()
            .filter_map(|r| r.modularity)
            .collect();
        if !qs.is_empty() {
            let mean = qs.iter().sum::<f64>() / qs.len() as f64;
            println!(
                "null modularity over {} replicates with edges: mean = {mean:.4}",
                qs.len()
            );
        }
    }
}

fn cmd_test(args: RunArgs) -> Result<(), StageError> {
    init_workers(args.workers)?;
    let config = load_run_config(&args)?;
    let table = read_csv(&config.input).stage("input")?;
    let (x, pipeline) = config.resolve(&table).stage("config")?;
    let result = run_structured_null_test(&x, &pipeline).stage("structured null test")?;

    let json = report_json(&result).stage("report")?;
    write_file(&args.out_dir, "report.json", &json).stage("report")?;
    write_file(&args.out_dir, "summary.csv", &summary_csv(&result)).stage("report")?;
    let communities =
        communities_csv(x.row_ids(), &result.observed.communities).stage("report")?;
    write_file(&args.out_dir, "communities.csv", &communities).stage("report")?;
    let mut written = vec!["report.json", "summary.csv", "communities.csv"];
    if config.report.histogram_svg {
        let svg = histogram_svg(&result.all.null_samples, result.all.d_obs);
        write_file(&args.out_dir, "null_histogram.svg", &svg).stage("report")?;
        written.push("null_histogram.svg");
    }

    print_test_summary(&config, &result);
    println!("wrote {} in {}", written.join(", "), args.out_dir.display());
    Ok(())
}

fn cmd_mapper(args: RunArgs) -> Result<(), StageError> {
    init_workers(args.workers)?;
    let config = load_run_config(&args)?;
    let table = read_csv(&config.input).stage("input")?;
    let (x, pipeline) = config.resolve(&table).stage("config")?;

    let split = make_split(x.p(), pipeline.split).stage("config")?;
    let mut rng = stream_rng(pipeline.base_seed, OBSERVED_STREAM);
    let run = run_pipeline(&x, &pipeline, &split, &mut rng).stage("mapper")?;
    let report = mapper_report(&run.graph, &run.communities, x.row_ids()).stage("report")?;
    let mut json = serde_json::to_string_pretty(&report)
        .map_err(Error::from)
        .stage("report")?;
    json.push('\n');
    write_file(&args.out_dir, "mapper_graph.json", &json).stage("report")?;

    println!(
        "graph: {} vertices, {} edges, K = {} communities over {} points",
        report.n_vertices, report.n_edges, report.n_communities, report.n_points
    );
    println!("wrote mapper_graph.json in {}", args.out_dir.display());
    Ok(())
}

fn cmd_simulate(args: RunArgs) -> Result<(), StageError> {
    init_workers(args.workers)?;
    let mut config = ScenarioConfig::load(&args.config).stage("config")?;
    if let Some(seed) = args.seed {
        config.base_seed = seed;
    }

    let mut rows = Vec::with_capacity(config.scenarios.len());
    for (i, scenario) in config.scenarios.iter().enumerate() {
        let seed = derive_seed(config.base_seed, i as u64);
        let result =
            run_scenario(&scenario.dgp, scenario.r, scenario.b, seed).stage("simulation")?;
        eprintln!(
            "scenario {i} ({}): rejection rate {:.4}, mean z {:+.4}, {:.1}s",
            scenario
                .label
                .clone()
                .unwrap_or_else(|| dgp_label(&scenario.dgp.kind)),
            result.rejection_rate,
            result.mean_z,
            result.runtime_seconds
        );
        rows.push(ScenarioRow::new(
            scenario.label.as_deref(),
            &scenario.dgp,
            &result,
        ));
    }
    let csv = scenario_csv(&rows);
    write_file(&args.out_dir, "scenario_results.csv", &csv).stage("report")?;
    print!("{csv}");
    println!("wrote scenario_results.csv in {}", args.out_dir.display());
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<(), StageError> {
    init_workers(args.workers)?;

    println!("population dissociation bound (Sigma = diag(4,1), split at 0):");
    let sigma = {
        let mut m = nalgebra::DMatrix::zeros(2, 2);
        m[(0, 0)] = 4.0;
        m[(1, 1)] = 1.0;
        CovModel::from_matrix(m).stage("oracle")?
    };
    let partition = IntervalPartition::new(vec![0.0]).stage("oracle")?;
    let split = make_split(2, SplitMode::OddEven).stage("oracle")?;
    let mut rng = stream_rng(derive_seed(args.seed, 0), 0);
    let check = population_dissociation_mc(&sigma, &partition, &split, args.samples, &mut rng)
        .stage("oracle")?;
    println!(
        "  samples = {}, estimate = {:.6} (se {:.6}), bound = {:.6}",
        check.samples, check.estimate, check.standard_error, check.bound
    );
    println!(
        "  estimate >= bound - 3se: {}",
        check.estimate >= check.bound - 3.0 * check.standard_error
    );

    println!("permutation decay (spherical data, fractions 0.5/0.3/0.2):");
    let decay = permutation_decay_check(
        &[400, 1600, 6400],
        &[0.5, 0.3, 0.2],
        DgpKind::Spherical,
        4,
        200,
        derive_seed(args.seed, 1),
    )
    .stage("oracle")?;
    for (n, median) in decay.n_grid.iter().zip(&decay.medians) {
        println!("  n = {n}: median permuted D = {median:.6}");
    }
    println!(
        "  log-log slope = {:.4} (target window [-0.65, -0.35]): {}",
        decay.slope,
        (-0.65..=-0.35).contains(&decay.slope)
    );

    println!("finite-population variance (n = 2000, community 300, 4000 draws):");
    let fp = finite_population_variance_check(2000, 300, 4000, derive_seed(args.seed, 2))
        .stage("oracle")?;
    println!(
        "  empirical = {:.6e}, formula = {:.6e}, ratio = {:.4} (within 10%: {})",
        fp.empirical_variance,
        fp.formula_variance,
        fp.ratio,
        (0.9..=1.1).contains(&fp.ratio)
    );
    Ok(())
}
