//! `qprogan`: cohort preparation, training, generation and evaluation.
//!
//! Exit codes: 0 success, 1 user error, 2 numeric failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qprogan::genomics::Strain;

#[derive(Parser, Debug)]
#[command(name = "qprogan", version, about = "Quantum progressive style-based GAN for spike variation prediction")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; required here or in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Built-in configuration used when no config file is given.
    #[arg(long, global = true, value_enum, default_value_t = Preset::Full)]
    preset: Preset,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 10 qubits, 3500 steps.
    Full,
    /// 6 qubits, 600 steps.
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    /// Superfidelity, cheap and exact for pure states.
    Super,
    /// Uhlmann fidelity via matrix square roots.
    Uhlmann,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrainArg {
    Delta,
    Omicron,
}

impl From<StrainArg> for Strain {
    fn from(s: StrainArg) -> Self {
        match s {
            StrainArg::Delta => Strain::Delta,
            StrainArg::Omicron => Strain::Omicron,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded synthetic aligned cohort with planted hotspots as FASTA.
    Synth {
        #[arg(long, default_value_t = 200)]
        sequences: usize,
        /// Omit the reference record, for cohorts split across files.
        #[arg(long)]
        no_reference: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the compressed spike cohort from aligned FASTA files.
    Prep {
        /// Aligned FASTA files, read in order; the reference is the first record unless named.
        #[arg(required = true)]
        fasta: Vec<PathBuf>,
        #[arg(long)]
        reference_id: Option<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Train with the progressive schedule, writing checkpoints and the loss CSV.
    Train {
        #[arg(long)]
        cohort: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        steps: Option<u64>,
        /// Continue from a checkpoint written under the same model config.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Sample variation structures and map them onto strain fragments.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, value_enum)]
        strain: Option<StrainArg>,
        #[arg(long)]
        cohort: Option<PathBuf>,
        /// Spike fragments to mutate; defaults to the cohort's.
        #[arg(long)]
        fragments: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Also write each generated state as a QDM1 file.
        #[arg(long)]
        dump_states: bool,
    },
    /// Fidelity heatmap between generated and cohort states as CSV.
    Fidelity {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        cohort: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        n_gen: usize,
        #[arg(long, default_value_t = 10)]
        n_real: usize,
        #[arg(long, value_enum, default_value_t = Metric::Super)]
        metric: Metric,
        /// Compare generated states against themselves instead of the cohort.
        #[arg(long)]
        self_compare: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-position mutation counts in four spike sections as CSV.
    Freq {
        /// Spike fragments as FASTA, or variation structures as JSON.
        input: PathBuf,
        /// Reference as FASTA (spike fragment or aligned genome) or a cohort JSON.
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
