use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use vchunk::pipeline::{
    run_eval, run_gen, run_grow, run_plot, run_predict, run_train_grower, run_train_list,
    run_verify, GrowMode, PipelineError, PredictMode, RunConfig, VerifySizes,
};

/// Visual chunking experiments: synthetic scenes, candidate growing, list
/// prediction, evaluation, and verification suites.
#[derive(Parser)]
#[command(name = "vchunk", version)]
struct Cli {
    /// TOML config file; flags override file values, which override defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Number of scenes to generate / process.
    #[arg(long, global = true)]
    n_scenes: Option<u32>,
    /// List budget k.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Master RNG seed for scene generation.
    #[arg(long, global = true)]
    master_seed: Option<u64>,
    /// Scene width in pixels.
    #[arg(long, global = true)]
    width: Option<u32>,
    /// Scene height in pixels.
    #[arg(long, global = true)]
    height: Option<u32>,
    /// Superpixels per scene.
    #[arg(long, global = true)]
    n_superpixels: Option<u32>,
    /// Probability that each instance is placed touching an earlier one.
    #[arg(long, global = true)]
    adjacency_pressure: Option<f64>,
    /// Perturbation level for the perturbed grow mode.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Forest size.
    #[arg(long, global = true)]
    n_trees: Option<usize>,
    /// Forest training seed.
    #[arg(long, global = true)]
    forest_seed: Option<u64>,
}

impl Overrides {
    fn apply(&self, config: &mut RunConfig) {
        if let Some(v) = self.n_scenes {
            config.n_scenes = v;
        }
        if let Some(v) = self.k {
            config.list_budget = v;
        }
        if let Some(v) = self.master_seed {
            config.synth.master_seed = v;
        }
        if let Some(v) = self.width {
            config.synth.width = v;
        }
        if let Some(v) = self.height {
            config.synth.height = v;
        }
        if let Some(v) = self.n_superpixels {
            config.synth.n_superpixels = v;
        }
        if let Some(v) = self.adjacency_pressure {
            config.synth.adjacency_pressure = v;
        }
        if let Some(v) = self.eps {
            config.eps = v;
        }
        if let Some(v) = self.n_trees {
            config.forest.n_trees = v;
        }
        if let Some(v) = self.forest_seed {
            config.forest.seed = v;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its manifest.
    Gen {
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Grow candidate chunk pools for every scene of a dataset.
    Grow {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// oracle | perturbed | learned
        #[arg(long, default_value = "oracle")]
        mode: GrowMode,
        /// Grower forest file (required for learned mode).
        #[arg(long)]
        forest: Option<PathBuf>,
    },
    /// Collect grower imitation data and fit the 𝒢 forest.
    TrainGrower {
        #[arg(long)]
        data: PathBuf,
        /// Output forest file.
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV dump of the training rows.
        #[arg(long)]
        dump_csv: Option<PathBuf>,
    },
    /// Collect list imitation data and fit the list-predictor forest.
    TrainList {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dump_csv: Option<PathBuf>,
    },
    /// Build prediction lists over precomputed candidates.
    Predict {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// learned | oracle
        #[arg(long, default_value = "learned")]
        mode: PredictMode,
        #[arg(long)]
        forest: Option<PathBuf>,
    },
    /// Compute metrics across methods; writes results.csv and summary.csv.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        lists: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run all randomized verification suites; nonzero exit on violation.
    Verify {
        /// Reduced case counts for quick runs.
        #[arg(long)]
        fast: bool,
        /// Suite seed.
        #[arg(long, default_value_t = 17)]
        seed: u64,
        /// Directory for the textual report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render SVG charts from a results.csv.
    Plot {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<bool, PipelineError> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    cli.overrides.apply(&mut config);
    match cli.command {
        Command::Gen { out } => run_gen(&config, &out).map(|()| true),
        Command::Grow {
            data,
            out,
            mode,
            forest,
        } => run_grow(&config, &data, &out, mode, forest.as_deref()).map(|()| true),
        Command::TrainGrower {
            data,
            out,
            dump_csv,
        } => run_train_grower(&config, &data, &out, dump_csv.as_deref()).map(|()| true),
        Command::TrainList {
            data,
            candidates,
            out,
            dump_csv,
        } => run_train_list(&config, &data, &candidates, &out, dump_csv.as_deref()).map(|()| true),
        Command::Predict {
            data,
            candidates,
            out,
            mode,
            forest,
        } => run_predict(&config, &data, &candidates, &out, mode, forest.as_deref())
            .map(|()| true),
        Command::Eval {
            data,
            candidates,
            lists,
            out,
        } => run_eval(&config, &data, &candidates, &lists, &out).map(|()| true),
        Command::Verify { fast, seed, out } => {
            let sizes = if fast {
                VerifySizes::fast()
            } else {
                VerifySizes::full()
            };
            run_verify(&sizes, seed, out.as_deref())
        }
        Command::Plot { results, out } => run_plot(&results, &out).map(|()| true),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
