use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use plm_cli::{cmd_ablate, cmd_dump_recall, cmd_eval, cmd_plot, cmd_run, CliError};
use plm_core::ErrorRates;

#[derive(Parser)]
#[command(name = "plm", version, about = "Perpetual learning machine on MNIST")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file of `key = value` lines.
    config: PathBuf,
    /// Override a config key; repeatable, the last one wins.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Shorthand for `--set seed=N`, applied after every `--set`.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn overrides(&self) -> Vec<String> {
        let mut o = self.set.clone();
        if let Some(seed) = self.seed {
            o.push(format!("seed={seed}"));
        }
        o
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment and write the metrics CSV.
    Run(ConfigArgs),
    /// Run with unregularized PSGD.
    Ablate {
        #[command(flatten)]
        args: ConfigArgs,
        /// Regularized run's CSV to compare against.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Render a metrics CSV as SVG.
    Plot { csv: PathBuf, svg: PathBuf },
    /// Write every class's recalled image as a PGM.
    DumpRecall {
        #[command(flatten)]
        args: ConfigArgs,
        /// Saved model; retrains in-process when absent.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Output directory; defaults to the config's dump_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a saved model on the configured images.
    Eval {
        #[command(flatten)]
        args: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
    },
}

fn print_rates(e: &ErrorRates) {
    println!("{:<8} {:>8} {:>8}", "", "direct", "recall");
    for (name, d, r) in [
        ("train50", e.train_direct, e.train_recall),
        ("new25", e.new_direct, e.new_recall),
        ("all75", e.all_direct, e.all_recall),
    ] {
        println!("{name:<8} {d:>8.4} {r:>8.4}");
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let out = cmd_run(&args.config, &args.overrides())?;
            println!("wrote {}", out.config.out_csv.display());
            if let Some(e) = &out.initial {
                println!("after initial training ({:.1} s)", out.initial_duration.as_secs_f64());
                print_rates(e);
            }
            if let Some(row) = out.last {
                println!("iteration {} ({})", row.iteration, row.phase);
                print_rates(&row.errors);
            }
        }
        Command::Ablate { args, baseline } => {
            let out = cmd_ablate(&args.config, &args.overrides(), baseline.as_deref())?;
            println!("wrote {}", out.config.out_csv.display());
            if let Some(e) = &out.explosion {
                println!("stopped: {e}");
            }
            if let Some(row) = out.last {
                println!("iteration {} ({})", row.iteration, row.phase);
                print_rates(&row.errors);
            }
            if let Some((base, abl)) = out.comparison {
                let (b, a) = (base.errors.all_recall, abl.errors.all_recall);
                println!("err_all_recall at iteration {}: regularized {b:.4}, ablated {a:.4}", base.iteration);
                if b > 0.0 {
                    println!("ablated / regularized = {:.3}", a / b);
                }
            }
        }
        Command::Plot { csv, svg } => {
            cmd_plot(&csv, &svg)?;
            println!("wrote {}", svg.display());
        }
        Command::DumpRecall { args, model, out } => {
            let (dir, n) = cmd_dump_recall(&args.config, &args.overrides(), model.as_deref(), out.as_deref())?;
            println!("wrote {n} images to {}", dir.display());
        }
        Command::Eval { args, model } => print_rates(&cmd_eval(&args.config, &args.overrides(), &model)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
