use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use varhom::cli::{
    parse_config, read_data_csv, render_critical, render_pivot, render_report, write_cells_csv,
    ConfigDefaults, Format, TestFailure, TestReport,
};
use varhom::dirichlet::{calibrate_c, DirichletParams};
use varhom::error::{Error, Result};
use varhom::homogeneity::{run_all, BootstrapConfig};
use varhom::rng::new_stream;
use varhom::simulation::run_grid_with_threads;

/// Tests for homogeneity of variances and a Monte Carlo size/power harness.
///
/// Exit codes: 0 success, 2 input error, 3 numeric failure.
#[derive(Parser)]
#[command(name = "varhom", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run Levene, Shoemaker, bootstrap Levene and the box-type T test on a
    /// `group,value` CSV file.
    Test {
        data: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long = "bootstrap-b", default_value_t = 500)]
        bootstrap_b: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// text, csv or json
        #[arg(long, default_value = "text")]
        format: String,
        /// Use the (eta* - eta) / lambda* pivot for the T test.
        #[arg(long = "pivot-variant")]
        pivot_variant: bool,
    },
    /// Estimate rejection rates for the experiments in a JSON config.
    Simulate {
        config: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Seed for entries that do not set one.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Default level for entries that do not set one.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Default bootstrap size for entries that do not set one.
        #[arg(long = "bootstrap-b", default_value_t = 500)]
        bootstrap_b: usize,
        /// Render markdown tables instead of long-format CSV.
        #[arg(long)]
        pivot: bool,
        #[arg(long = "pivot-variant")]
        pivot_variant: bool,
    },
    /// Calibrate the normal-theory box half-width c for given sample sizes.
    Critical {
        /// Comma-separated group sizes, e.g. 10,10
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 1_000_000)]
        draws: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "text")]
        format: String,
    },
}

fn read_file(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Usage(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::Usage(format!("stdout: {e}"))),
    }
}

fn cmd_test(
    data: &PathBuf,
    alpha: f64,
    bootstrap_b: usize,
    seed: u64,
    format: &str,
    pivot_variant: bool,
) -> Result<i32> {
    let format: Format = format.parse()?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "--alpha must lie in (0, 1], got {alpha}"
        )));
    }
    let file = read_data_csv(read_file(data)?.as_bytes())?;
    let cfg =
        BootstrapConfig::new(bootstrap_b, new_stream(seed, 0))?.with_pivot_variant(pivot_variant);
    let mut report = TestReport {
        groups: file.labels.clone(),
        sizes: file.sample.sizes(),
        results: Vec::new(),
        errors: Vec::new(),
    };
    let mut code = 0;
    for (method, outcome) in run_all(&file.sample, alpha, &cfg) {
        match outcome {
            Ok(r) => report.results.push(r),
            Err(e) => {
                eprintln!("varhom: {method}: {e}");
                code = code.max(e.exit_code());
                report.errors.push(TestFailure {
                    method,
                    message: e.to_string(),
                });
            }
        }
    }
    emit(&render_report(&report, format)?, None)?;
    Ok(code)
}

fn cmd_simulate(
    config: &PathBuf,
    out: Option<&PathBuf>,
    threads: usize,
    defaults: ConfigDefaults,
    pivot: bool,
) -> Result<i32> {
    let cells = parse_config(&read_file(config)?, &defaults)?;
    let mut estimates = Vec::with_capacity(cells.len());
    for (i, r) in run_grid_with_threads(&cells, threads)?
        .into_iter()
        .enumerate()
    {
        match r {
            Ok(c) => estimates.push(c),
            Err(e) => return Err(Error::InvalidInput(format!("experiment {}: {e}", i + 1))),
        }
    }
    let text = if pivot {
        render_pivot(&estimates)
    } else {
        let mut buf = Vec::new();
        write_cells_csv(&estimates, &mut buf)?;
        String::from_utf8(buf).expect("csv output is utf-8")
    };
    emit(&text, out)?;
    Ok(0)
}

fn cmd_critical(sizes: &[usize], alpha: f64, draws: usize, seed: u64, format: &str) -> Result<i32> {
    let format: Format = format.parse()?;
    let params = DirichletParams::from_sizes(sizes)?;
    let mut rng = new_stream(seed, 0);
    let b = calibrate_c(&params, alpha, draws, &mut rng)?;
    emit(&render_critical(sizes, alpha, &b, format)?, None)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Test {
            data,
            alpha,
            bootstrap_b,
            seed,
            format,
            pivot_variant,
        } => cmd_test(data, *alpha, *bootstrap_b, *seed, format, *pivot_variant),
        Command::Simulate {
            config,
            out,
            threads,
            seed,
            alpha,
            bootstrap_b,
            pivot,
            pivot_variant,
        } => cmd_simulate(
            config,
            out.as_ref(),
            *threads,
            ConfigDefaults {
                alpha: *alpha,
                bootstrap_b: *bootstrap_b,
                seed: *seed,
                pivot_variant: *pivot_variant,
            },
            *pivot,
        ),
        Command::Critical {
            sizes,
            alpha,
            draws,
            seed,
            format,
        } => cmd_critical(sizes, *alpha, *draws, *seed, format),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("varhom: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
