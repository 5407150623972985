use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ns1d::harness::{self, load_config, output_dir, RunStatus, SweepParam};
use ns1d::{Error, Result};

#[derive(Parser)]
#[command(name = "ns1d", version, about = "1D viscous heat-conducting gas in Lagrangian coordinates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config file.
    #[arg(long)]
    config: PathBuf,
    /// Override a config key, e.g. `--set gas.alpha=0.1`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration (sweep presets run their sweep).
    Run(ConfigArgs),
    /// Run one configuration per parameter value.
    Sweep {
        #[command(flatten)]
        args: ConfigArgs,
        /// alpha, gamma or amplitude.
        #[arg(long)]
        param: String,
        /// Comma-separated values; may be empty.
        #[arg(long, allow_hyphen_values = true, default_value = "")]
        values: String,
    },
    /// Manufactured-solution convergence study.
    Mms(ConfigArgs),
    /// Check the growth conditions on the configured h.
    ValidateH(ConfigArgs),
}

fn parse_values(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Error::Argument(format!("'{s}' is not a number"))))
        .collect()
}

fn load(args: &ConfigArgs) -> Result<harness::RunConfig> {
    let loaded = load_config(&args.config, &args.overrides)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    Ok(loaded.config)
}

fn report_sweep(entries: &[harness::SweepEntry], dir: &std::path::Path) {
    let failed = entries.iter().filter(|e| e.summary.status == RunStatus::Failed).count();
    println!("sweep: {} runs, {failed} failed; {}", entries.len(), dir.join("sweep.json").display());
}

fn main_inner(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let config = load(&args)?;
            let dir = output_dir(&config);
            if let Some(s) = &config.sweep {
                let entries = harness::sweep(&config, s.param, &s.values, &dir)?;
                report_sweep(&entries, &dir);
                return Ok(());
            }
            let summary = harness::run(&config, &dir)?;
            println!("run completed: {} records; {}", summary.records, dir.display());
        }
        Command::Sweep { args, param, values } => {
            let config = load(&args)?;
            let dir = output_dir(&config);
            let entries = harness::sweep(&config, SweepParam::parse(&param)?, &parse_values(&values)?, &dir)?;
            report_sweep(&entries, &dir);
        }
        Command::Mms(args) => {
            let config = load(&args)?;
            let dir = output_dir(&config);
            let report = harness::mms(&config, &dir)?;
            let show = |o: ns1d::verification::Order| o.value().map_or("indeterminate".to_string(), |p| format!("{p:.3}"));
            println!(
                "L2 orders: v {}, u {}, theta {}; {}",
                show(report.orders_v.fitted_l2),
                show(report.orders_u.fitted_l2),
                show(report.orders_theta.fitted_l2),
                dir.join("mms.json").display()
            );
        }
        Command::ValidateH(args) => {
            let config = load(&args)?;
            let report = harness::validate_h_cli(&config, &output_dir(&config))?;
            let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Argument(e.to_string()))?;
            println!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
