use std::path::PathBuf;
use std::process::ExitCode;

use chemotaxis_core::diagnostics::{default_k, thresholds};
use clap::{Parser, Subcommand};

use chemotaxis_experiments::check;
use chemotaxis_experiments::presets;
use chemotaxis_experiments::runner::{ExperimentError, OutputTarget};
use chemotaxis_experiments::scenario::{load_sweep, resolve_scenario};
use chemotaxis_experiments::{run_scenario_to, run_sweep, RunSummary};

/// Finite-volume simulations of chemotaxis with consumed signals
#[derive(Parser, Debug)]
#[command(name = "chemotaxis", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario file or a built-in preset
    Run {
        /// path to a scenario JSON file, or a preset name
        scenario: String,
        /// output directory (default: the scenario's output_dir or out/<name>)
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// keep results in memory and write nothing
        #[arg(long, conflicts_with = "out")]
        no_output: bool,
    },
    /// Run every member of a parameter sweep
    Sweep {
        sweep: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Print the coefficient thresholds for a dimension and signal bounds
    Thresholds {
        #[arg(long)]
        n: usize,
        /// sup of v0
        #[arg(long)]
        vsup: f64,
        /// sup of w0 (attraction-repulsion model)
        #[arg(long)]
        wsup: Option<f64>,
        /// exponent for the k-dependent bounds (default n/2 + 0.5)
        #[arg(long)]
        k: Option<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Re-check the invariants recorded in a series.csv
    Check { csv: PathBuf },
    /// List the built-in presets
    Presets,
}

fn print_summary(s: &RunSummary) {
    println!("scenario     {}", s.name);
    println!("status       {:?}", s.status);
    println!("steps        {} ({} CFL-limited)", s.steps, s.clamped_steps);
    println!("peak max u   {:.6e} at t = {:.6e}", s.peak_max_u, s.peak_time);
    println!("final max u  {:.6e} at t = {:.6e}", s.final_record.max_u, s.final_record.t);
    println!("wall time    {:.1} s", s.wall_seconds);
    if let Some(out) = &s.outputs {
        println!("outputs      {}", out.dir.display());
    }
}

fn fail(err: &ExperimentError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, out, no_output } => {
            let s = match resolve_scenario(&scenario) {
                Ok(s) => s,
                Err(e) => return fail(&e.into()),
            };
            let target = match (out, no_output) {
                (_, true) => OutputTarget::Discard,
                (Some(dir), _) => OutputTarget::Dir(dir),
                (None, _) => OutputTarget::Default,
            };
            match run_scenario_to(&s, &target) {
                Ok(run) => {
                    print_summary(&run.summary);
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Sweep { sweep, out } => {
            let spec = match load_sweep(&sweep) {
                Ok(s) => s,
                Err(e) => return fail(&e.into()),
            };
            let target = out.map_or(OutputTarget::Default, OutputTarget::Dir);
            let result = match run_sweep(&spec, &target) {
                Ok(r) => r,
                Err(e) => return fail(&e),
            };
            let mut code = 0;
            for m in &result.members {
                match &m.result {
                    Ok(run) => println!(
                        "{:<10} peak max u {:.6e} at t = {:.6e}",
                        m.label, run.summary.peak_max_u, run.summary.peak_time
                    ),
                    Err(e) => {
                        println!("{:<10} FAILED: {e}", m.label);
                        if code == 0 {
                            code = e.exit_code();
                        }
                    }
                }
            }
            if let Some(p) = &result.combined_csv {
                println!("combined   {}", p.display());
            }
            ExitCode::from(code as u8)
        }
        Command::Thresholds { n, vsup, wsup, k, json } => {
            let report = match thresholds(n, vsup, wsup) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let k = k.unwrap_or_else(|| default_k(n));
            if json {
                let mut value = serde_json::to_value(report).expect("report serializes");
                value["k"] = k.into();
                value["chi_max_lemma"] = report.chi_max_lemma(k).into();
                value["xi_max_lemma"] = report.xi_max_lemma(k).into();
                value["ordering_holds"] = report.ordering_holds().into();
                println!("{}", serde_json::to_string_pretty(&value).expect("json"));
                return ExitCode::SUCCESS;
            }
            let opt = |x: Option<f64>| x.map_or("-".to_string(), |x| format!("{x:.6e}"));
            println!("n = {n}, sup v0 = {vsup}, sup w0 = {}", opt(wsup));
            println!("chi_max_theorem               {:.6e}", report.chi_max_theorem);
            println!("xi_max_theorem                {}", opt(report.xi_max_theorem));
            println!("chi_sup_limit_attr_rep        {:.6e}", report.chi_sup_limit_attr_rep);
            println!("chi_interval_attraction_only  {:.6e}", report.chi_interval_attraction_only);
            println!("reference_taoboun             {:.6e}", report.reference_taoboun);
            println!("reference_baghaei             {:.6e}", report.reference_baghaei);
            println!("chi_max_lemma (k = {k})      {:.6e}", report.chi_max_lemma(k));
            println!("xi_max_lemma (k = {k})       {}", opt(report.xi_max_lemma(k)));
            println!("ordering holds                {}", report.ordering_holds());
            ExitCode::SUCCESS
        }
        Command::Check { csv } => match check::check_file(&csv) {
            Ok(report) => {
                for v in &report.violations {
                    println!("row {} t = {:.6e}: {}", v.row, v.t, v.what);
                }
                for v in &report.lyapunov_increases {
                    println!("note: row {} t = {:.6e}: {}", v.row, v.t, v.what);
                }
                println!(
                    "{} rows, {} violations",
                    report.rows,
                    report.violations.len()
                );
                if report.passed() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(3)
                }
            }
            Err(e) => {
                eprintln!("error: {}: {e}", csv.display());
                ExitCode::from(2)
            }
        },
        Command::Presets => {
            for name in presets::NAMES {
                println!("{name:<12} {}", presets::describe(name).unwrap_or(""));
            }
            ExitCode::SUCCESS
        }
    }
}
