use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use potatoes::harness::{
    box_plot_csv, box_plot_data, report_tables, run_experiment, sine_demo, EvalReport, ExperimentConfig, WORKERS_ENV,
};
use potatoes::metrics::Metric;
use potatoes::Error;

#[derive(Parser)]
#[command(name = "potatoes", version, about = "Outlier detection with partitioning overfitting autoencoder ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write report.json, report.csv and timings.json.
    Run {
        config: PathBuf,
        /// Worker threads [default: $POTATOES_WORKERS, else all CPUs].
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory [default: output_dir from the config].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plot regularized AE, AE_r0 and POTATOES on 2-D sine data (SVG + CSV).
    SineDemo {
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print mean and p-value tables for one or more reports.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Emit CSV instead of aligned text.
        #[arg(long)]
        csv: bool,
        /// Print box-plot data of this metric instead of the tables.
        #[arg(long)]
        box_plot: Option<Metric>,
    },
}

fn load_config(path: &PathBuf, workers: Option<usize>, out: Option<PathBuf>) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    if workers.is_some() {
        cfg.workers = workers;
    }
    if out.is_some() {
        cfg.output_dir = out;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_tables(reports: &[EvalReport], csv: bool) -> Result<(), Error> {
    for t in report_tables(reports) {
        if csv {
            println!("# {}\n{}", t.title, t.to_csv()?);
        } else {
            println!("{}", t.to_text());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, workers, out } => {
            let cfg = load_config(&config, workers, out)?;
            eprintln!("running '{}' with {} workers", cfg.name, cfg.worker_count()?);
            let report = run_experiment(&cfg)?;
            for m in report.methods.iter().filter(|m| m.failed()) {
                eprintln!("{} failed: {}", m.method, m.error.as_deref().unwrap_or_default());
            }
            print_tables(std::slice::from_ref(&report), false)?;
            if let Some(dir) = &cfg.output_dir {
                eprintln!("wrote {}", dir.join("report.json").display());
            }
        }
        Command::SineDemo { config, workers, out } => {
            let cfg = load_config(&config, workers, out)?;
            let demo = sine_demo(&cfg)?;
            for p in demo.panels.iter().filter(|p| !p.top3.is_empty()) {
                let tops: Vec<String> = p
                    .top3
                    .iter()
                    .map(|&i| format!("{i}{}", if demo.labels[i] == 1 { " (outlier)" } else { "" }))
                    .collect();
                println!("{}: top 3 = {}", p.title, tops.join(", "));
            }
            let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
            demo.write(&dir)?;
            eprintln!("wrote {}", dir.join("sine_demo.svg").display());
        }
        Command::Report { reports, csv, box_plot } => {
            let reports = reports.iter().map(EvalReport::load).collect::<Result<Vec<_>, _>>()?;
            match box_plot {
                Some(metric) => {
                    for r in &reports {
                        println!("# {}\n{}", r.name, box_plot_csv(&box_plot_data(r, metric)?)?);
                    }
                }
                None => print_tables(&reports, csv)?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Config(_)) && e.to_string().contains(WORKERS_ENV) {
                eprintln!("hint: unset {WORKERS_ENV} or set it to a positive integer");
            }
            ExitCode::from(match e {
                Error::Config(_) | Error::Serde(_) | Error::Format(_) | Error::Truncated { .. } | Error::Io { .. } => 2,
                _ => 1,
            })
        }
    }
}
