use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use csipca::bench::{
    emit_comparison_table, emit_variance_spectrum, load_references, read_results_csv, results_to_csv,
    run_experiment, spectrum_to_csv, ExperimentConfig,
};
use csipca::chanforge::{generate_dataset, save_dataset, GeneratorConfig};
use csipca::Error;

/// PCA-based CSI compression toolkit.
#[derive(Debug, Parser)]
#[command(name = "csipca", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Generate a CFR1 dataset.
    Gen {
        /// Stock profile name or path to a profile file.
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Generator config file; --profile/--seed/--count override it.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run an experiment and write results.csv and results.md.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Published reference constants to append to results.md.
        #[arg(long)]
        refs: Option<PathBuf>,
    },
    /// Write the per-component variance spectrum as spectrum.csv.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Render a markdown comparison table from a results CSV.
    Table {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        refs: Option<PathBuf>,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_file(dir: &Path, name: &str, text: &str) -> csipca::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let p = dir.join(name);
    fs::write(&p, text)?;
    Ok(p)
}

fn gen_config(
    config: Option<PathBuf>,
    profile: Option<String>,
    seed: Option<u64>,
    count: Option<usize>,
) -> csipca::Result<GeneratorConfig> {
    let mut cfg = match config {
        Some(p) => {
            let text = fs::read_to_string(&p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            GeneratorConfig::from_toml(&text)?
        }
        None => {
            let missing = |f: &str| Error::Config(format!("--{f} is required without --config"));
            GeneratorConfig::new(
                profile.clone().ok_or_else(|| missing("profile"))?,
                seed.ok_or_else(|| missing("seed"))?,
                count.ok_or_else(|| missing("count"))?,
            )
        }
    };
    if let Some(p) = profile {
        cfg.profile = p;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(c) = count {
        cfg.count = c;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> csipca::Result<()> {
    match cli.cmd {
        Cmd::Gen {
            profile,
            seed,
            count,
            out,
            config,
        } => {
            let cfg = gen_config(config, profile, seed, count)?;
            let ds = generate_dataset(&cfg)?;
            save_dataset(&ds, &out)?;
            eprintln!(
                "wrote {} samples ({}x{}) to {}",
                ds.len(),
                ds.dims.0,
                ds.dims.1,
                out.display()
            );
        }
        Cmd::Run {
            config,
            out_dir,
            refs,
        } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let dir = out_dir.unwrap_or_else(|| cfg.output_dir.clone());
            let refs = refs.map(load_references).transpose()?.unwrap_or_default();
            let rows = run_experiment(&cfg)?;
            let csv = write_file(&dir, "results.csv", &results_to_csv(&rows)?)?;
            let md = write_file(&dir, "results.md", &emit_comparison_table(&rows, &refs)?)?;
            eprintln!("wrote {} and {}", csv.display(), md.display());
        }
        Cmd::Spectrum { config, out_dir } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let dir = out_dir.unwrap_or_else(|| cfg.output_dir.clone());
            let rows = emit_variance_spectrum(&cfg)?;
            let p = write_file(&dir, "spectrum.csv", &spectrum_to_csv(&rows)?)?;
            eprintln!("wrote {}", p.display());
        }
        Cmd::Table { results, refs, out } => {
            let rows = read_results_csv(&results)?;
            let refs = refs.map(load_references).transpose()?.unwrap_or_default();
            let md = emit_comparison_table(&rows, &refs)?;
            match out {
                Some(p) => fs::write(p, md)?,
                None => print!("{md}"),
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
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
