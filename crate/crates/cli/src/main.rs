use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use twostage::logicreg::Family;
use twostage_cli::commands;
use twostage_cli::config::ExperimentConfig;
use twostage_cli::error::{CliError, CliResult, ExitStatus};
use twostage_cli::randomization::RandKind;
use twostage_cli::report::ReportFormat;

#[derive(Parser)]
#[command(name = "twostage", version, about = "Two-stage ensemble prediction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Text,
    Both,
}

impl FormatArg {
    fn formats(self) -> Vec<ReportFormat> {
        match self {
            FormatArg::Csv => vec![ReportFormat::Csv],
            FormatArg::Text => vec![ReportFormat::Text],
            FormatArg::Both => vec![ReportFormat::Csv, ReportFormat::Text],
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    NullSignal,
    ModelSize,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Logistic,
    Classification,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic heterogeneous dataset and its schema.
    Simulate {
        /// Generator settings (TOML); defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV; the schema goes to `<out>.schema.toml`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the configured recipes and write the report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        format: FormatArg,
    },
    /// Permutation tests for signal and model size.
    Randtest {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "null-signal")]
        kind: KindArg,
        #[arg(long, value_enum, default_value = "logistic")]
        family: FamilyArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Metrics of a prediction CSV against a labelled dataset.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pretty-print a saved model.
    Inspect { model: PathBuf },
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn emit(text: &str, out: Option<&PathBuf>) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate { config, seed, out } => {
            let mut cfg = commands::load_synthetic_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let schema = commands::simulate(&cfg, &out)?;
            eprintln!("wrote {} and {}", out.display(), schema.display());
            Ok(())
        }
        Command::Run { config, seed, out, format } => {
            let cfg = load_config(&config, seed)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let outcome = commands::run(&cfg, &dir, &format.formats())?;
            eprintln!("report written to {}", dir.display());
            let failed = outcome.report.failures();
            if failed > 0 {
                return Err(CliError::RecipesFailed {
                    failed,
                    total: outcome.report.entries.len(),
                });
            }
            Ok(())
        }
        Command::Randtest { config, kind, family, seed, out } => {
            let cfg = load_config(&config, seed)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let kind = match kind {
                KindArg::NullSignal => RandKind::NullSignal,
                KindArg::ModelSize => RandKind::ModelSize,
            };
            let family = match family {
                FamilyArg::Logistic => Family::Logistic,
                FamilyArg::Classification => Family::Classification,
            };
            let outcome = commands::randtest(&cfg, kind, family, &dir)?;
            for r in &outcome.results {
                let label = r.k.map(|k| format!("size {k}")).unwrap_or_else(|| "null signal".into());
                println!("{label}: p = {:.4}", r.p_value);
            }
            if let Some(k) = outcome.chosen_size {
                println!("chosen model size: {k}");
            }
            Ok(())
        }
        Command::Evaluate { predictions, data, schema, format, out } => {
            let m = commands::evaluate(&predictions, &data, schema.as_deref())?;
            let format = match format {
                FormatArg::Csv => ReportFormat::Csv,
                _ => ReportFormat::Text,
            };
            emit(&commands::format_metrics(&m, format), out.as_ref())
        }
        Command::Inspect { model } => emit(&commands::inspect(&model)?, None),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(ExitStatus::ConfigError as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_status() as u8)
        }
    }
}
