use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use mergeforge::benchmark::{make_instance, BenchmarkInstance, BenchmarkParams};
use mergeforge::driver::{
    eval_program, report, run, task_arithmetic_baseline, RunConfig, CATEGORY_CSV, HISTOGRAM_CSV, TOKEN_CSV,
    TASK_ARITHMETIC_GRID,
};
use mergeforge::dsl::{GeneratorKind, MergeProgram, Provenance};

#[derive(Parser)]
#[command(name = "mergeforge", version, about = "Search for model-merging programs on a synthetic benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the generate / filter / refine loop from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score a merge program on an instance's dev and test probes.
    Eval {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        instance: PathBuf,
    },
    /// Score a reference merge method.
    Baseline {
        #[command(subcommand)]
        method: Baseline,
    },
    /// Rebuild the CSV tables of a finished run from its logs.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
    /// Write a benchmark instance file.
    MakeInstance {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        d: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum Baseline {
    /// Grid search over per-model mixing ratios, tuned on dev.
    TaskArithmetic {
        #[arg(long, value_delimiter = ',', default_values_t = TASK_ARITHMETIC_GRID)]
        grid: Vec<f64>,
        #[arg(long)]
        instance: PathBuf,
    },
}

fn load_instance(path: &Path) -> Result<BenchmarkInstance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    BenchmarkInstance::from_json(&text).with_context(|| format!("loading instance {}", path.display()))
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            let rep = run(&cfg)?;
            for it in &rep.iterations {
                log::info!("iteration {}: s_best {:?}", it.iteration, it.s_best);
            }
            print_json(&serde_json::json!({
                "output_dir": cfg.output_dir,
                "s_best": rep.s_best,
                "best": rep.best.as_ref().map(|b| &b.source),
                "best_test": rep.best.as_ref().map(|b| b.test_score),
                "task_arithmetic_test": rep.baselines.task_arithmetic.test,
            }))
        }
        Command::Eval { program, instance } => {
            let src = fs::read_to_string(&program).with_context(|| format!("reading {}", program.display()))?;
            let prog = MergeProgram::compile(
                src,
                Provenance {
                    iteration: 0,
                    generator: GeneratorKind::Fixture,
                },
            )
            .with_context(|| format!("compiling {}", program.display()))?;
            print_json(&eval_program(&prog, &load_instance(&instance)?)?)
        }
        Command::Baseline {
            method: Baseline::TaskArithmetic { grid, instance },
        } => print_json(&task_arithmetic_baseline(&load_instance(&instance)?, &grid)?),
        Command::Report { run } => {
            report(&run)?;
            for f in [HISTOGRAM_CSV, CATEGORY_CSV, TOKEN_CSV] {
                println!("{}", run.join(f).display());
            }
            Ok(())
        }
        Command::MakeInstance { seed, d, k, out } => {
            let params = BenchmarkParams {
                d,
                k,
                ..Default::default()
            };
            let inst = make_instance(seed, &params)?;
            fs::write(&out, inst.to_json()).with_context(|| format!("writing {}", out.display()))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
