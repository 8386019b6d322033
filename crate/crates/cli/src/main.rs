use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use semiflow_cli::{
    build_setup, parse_scenario, run_flows, run_scenario, run_sweep, write_flows, write_sweep,
    CliError, CliResult, Scenario, SweepAxis,
};
use semiflow_core::space::{load_graph_space, validate_metric};

#[derive(Parser)]
#[command(name = "semiflow", version, about = "Gradient flows on finite metric measure spaces")]
struct Cli {
    /// Output directory (default: <output root>/<scenario name>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
    /// Root for default output directories.
    #[arg(long, global = true, env = "SEMIFLOW_OUT", default_value = "out")]
    out_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Metric-space utilities.
    Space {
        #[command(subcommand)]
        command: SpaceCommand,
    },
    /// Generate flows.
    Flow {
        #[command(subcommand)]
        command: FlowCommand,
    },
    /// Parameter sweeps.
    Sweep {
        #[command(subcommand)]
        command: SweepCommand,
    },
    /// Verification suites.
    Verify {
        #[command(subcommand)]
        command: VerifyCommand,
    },
}

#[derive(Subcommand)]
enum SpaceCommand {
    /// Check the metric axioms of an edge-list graph.
    Validate { file: PathBuf },
}

#[derive(Subcommand)]
enum FlowCommand {
    /// Run every flow a scenario defines and write trajectories.
    Run { config: PathBuf },
}

#[derive(Subcommand)]
enum SweepCommand {
    /// Sweep one parameter axis and write an aggregated table.
    Run {
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
    },
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Run flows and the configured checks; exit status 1 if any fails.
    Suite { config: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    #[value(name = "n_list")]
    N,
    #[value(name = "tau_list")]
    Tau,
    #[value(name = "h_list")]
    H,
}

fn output_dir(cli: &Cli, scenario: &Scenario) -> PathBuf {
    if let Some(out) = &cli.out {
        return out.clone();
    }
    match &scenario.output {
        Some(dir) => dir.clone(),
        None => cli.out_root.join(&scenario.name),
    }
}

fn say(cli: &Cli, msg: impl AsRef<str>) {
    if !cli.quiet {
        println!("{}", msg.as_ref());
    }
}

fn space_validate(cli: &Cli, file: &Path) -> CliResult<bool> {
    let space = load_graph_space(file)?;
    let report = validate_metric(&space, cli.seed.unwrap_or(0));
    let status = if report.passed { "PASS" } else { "FAIL" };
    let detail = match report.violation {
        Some(v) => format!(
            " {v} by {:.3e} at {:?}",
            report.worst_violation, report.witness
        ),
        None => String::new(),
    };
    say(
        cli,
        format!(
            "{status} metric axioms on {} points ({} triples{}){detail}",
            space.len(),
            report.triples_checked,
            if report.sampled { ", sampled" } else { "" },
        ),
    );
    Ok(report.passed)
}

fn flow_run(cli: &Cli, config: &Path) -> CliResult<bool> {
    let scenario = parse_scenario(config)?;
    let setup = build_setup(&scenario, cli.seed)?;
    let flows = run_flows(&setup, true)?;
    let dir = output_dir(cli, &scenario);
    for path in write_flows(&dir, &setup, &flows)? {
        say(cli, format!("wrote {}", path.display()));
    }
    Ok(true)
}

fn sweep_run(cli: &Cli, config: &Path, axis: Axis) -> CliResult<bool> {
    let scenario = parse_scenario(config)?;
    let axis = match axis {
        Axis::N => SweepAxis::NList,
        Axis::Tau => SweepAxis::TauList,
        Axis::H => SweepAxis::HList,
    };
    let table = run_sweep(&scenario, axis, cli.seed)?;
    let path = write_sweep(&output_dir(cli, &scenario), &table)?;
    say(cli, format!("wrote {}", path.display()));
    match table.monotone {
        Some(true) => say(cli, "PASS column monotonicity"),
        Some(false) => say(cli, "FAIL column monotonicity"),
        None => {}
    }
    Ok(table.monotone != Some(false))
}

fn verify_suite(cli: &Cli, config: &Path) -> CliResult<bool> {
    let scenario = parse_scenario(config)?;
    let dir = output_dir(cli, &scenario);
    let suite = run_scenario(&scenario, cli.seed, Some(&dir))?;
    for o in &suite.outcomes {
        let r = &o.report;
        say(
            cli,
            format!(
                "{} {:<20} residual {:>12.4e}  tolerance {:.1e}  ({:.2?})",
                if r.pass { "PASS" } else { "FAIL" },
                r.check,
                r.max_residual,
                o.tolerance,
                o.runtime
            ),
        );
    }
    say(cli, format!("reports in {}", dir.display()));
    Ok(suite.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<bool, CliError> = match &cli.command {
        Command::Space { command: SpaceCommand::Validate { file } } => space_validate(&cli, file),
        Command::Flow { command: FlowCommand::Run { config } } => flow_run(&cli, config),
        Command::Sweep { command: SweepCommand::Run { config, axis } } => sweep_run(&cli, config, *axis),
        Command::Verify { command: VerifyCommand::Suite { config } } => verify_suite(&cli, config),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
