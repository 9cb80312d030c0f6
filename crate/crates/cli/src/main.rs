//! Command line driver: scene synthesis, tracking, training,
//! evaluation and solver benchmarks over text files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use quadtrack_core::error::Error;
use quadtrack_core::graph::GraphParams;
use quadtrack_core::learning::InferenceMethod;
use quadtrack_core::pipeline::{
    run_bench, run_eval, run_synth, run_track, run_train, TrackOptions, TrainOptions,
};
use quadtrack_core::solvers::TrackMethod;
use quadtrack_core::synth::SynthConfig;

#[derive(Parser)]
#[command(
    name = "quadtrack",
    about = "Multi-object tracking via min-cost flow with quadratic track interactions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Ssp,
    Dp1,
    Dp2,
    Dp1q,
    Dp2q,
    Lp,
}

impl From<MethodArg> for TrackMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ssp => TrackMethod::Ssp,
            MethodArg::Dp1 => TrackMethod::Dp1,
            MethodArg::Dp2 => TrackMethod::Dp2,
            MethodArg::Dp1q => TrackMethod::Dp1q,
            MethodArg::Dp2q => TrackMethod::Dp2q,
            MethodArg::Lp => TrackMethod::Lp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainMethodArg {
    /// Greedy DP inference (undergenerating).
    Dp,
    /// LP relaxation inference with fractional constraints
    /// (overgenerating).
    Lp,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene: detections.txt and gt.txt.
    Synth {
        /// TOML scene configuration.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Overrides the seed in the configuration file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Track a detection file under a weight file.
    Track {
        #[arg(long)]
        dets: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        out: PathBuf,
        /// Cubic B-spline smoothing of the output trajectories.
        #[arg(long)]
        smooth: bool,
        #[arg(long, default_value_t = 8)]
        max_gap: u32,
        #[arg(long, default_value_t = 0.3)]
        link_thresh: f64,
        #[arg(long, default_value_t = -0.5)]
        score_thresh: f64,
    },
    /// Learn a weight vector from sequence directories.
    Train {
        /// Directory of sequence subdirectories (detections.txt + gt.txt).
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.0078125)]
        c: f64,
        #[arg(long, value_enum, default_value = "dp")]
        method: TrainMethodArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        num_classes: usize,
        #[arg(long, default_value_t = 8)]
        max_gap: u32,
    },
    /// Score a track file against ground truth labels.
    Eval {
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        #[arg(long, default_value_t = 3)]
        num_classes: usize,
        /// Also write the report as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Compare solver cost and runtime over a suite of sequences.
    Bench {
        /// Suite directory; the shipped synthetic suite when omitted.
        #[arg(long)]
        suite: Option<PathBuf>,
        /// Comma-separated methods (default: all).
        #[arg(long, value_delimiter = ',')]
        methods: Vec<MethodArg>,
        #[arg(long)]
        weights: Option<PathBuf>,
        /// CSV output; an SVG plot lands next to it.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Synth {
            config,
            out_dir,
            seed,
        } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Error::Io {
                    path: config.display().to_string(),
                    source: e,
                })?;
            let mut cfg = SynthConfig::from_toml(&text)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let (dets, gt) = run_synth(&cfg, &out_dir)?;
            println!("wrote {} and {}", dets.display(), gt.display());
        }
        Command::Track {
            dets,
            weights,
            method,
            out,
            smooth,
            max_gap,
            link_thresh,
            score_thresh,
        } => {
            let params = GraphParams {
                max_gap,
                link_threshold: link_thresh,
                score_threshold: score_thresh,
                ..GraphParams::learned(1)
            };
            let opts = TrackOptions {
                method: method.into(),
                smooth,
                params,
            };
            let summary = run_track(&dets, &weights, &opts, &out)?;
            match summary.lower_bound {
                Some(lb) => println!(
                    "{} tracks, objective {:.6}, lower bound {:.6}",
                    summary.num_tracks, summary.objective, lb
                ),
                None => println!(
                    "{} tracks, objective {:.6}",
                    summary.num_tracks, summary.objective
                ),
            }
        }
        Command::Train {
            data,
            c,
            method,
            out,
            num_classes,
            max_gap,
        } => {
            let mut opts = TrainOptions::new(num_classes);
            opts.c = c;
            opts.method = match method {
                TrainMethodArg::Dp => InferenceMethod::GreedyDp,
                TrainMethodArg::Lp => InferenceMethod::Lp,
            };
            opts.params.max_gap = max_gap;
            let outcome = run_train(&data, &opts, &out)?;
            let iters = outcome.trace.iterations.len();
            let last = outcome.trace.iterations.last();
            println!(
                "trained in {iters} iterations, final master objective {:.6}",
                last.map_or(0.0, |s| s.master_objective)
            );
            println!("wrote {}", out.display());
        }
        Command::Eval {
            tracks,
            gt,
            iou,
            num_classes,
            csv,
        } => {
            let outcome = run_eval(&tracks, &gt, iou, num_classes)?;
            print!("{}", outcome.table());
            if let Some(csv_path) = csv {
                quadtrack_core::formats::write_file(&csv_path, &outcome.to_csv())?;
                println!("wrote {}", csv_path.display());
            }
        }
        Command::Bench {
            suite,
            methods,
            weights,
            out,
        } => {
            let methods: Vec<TrackMethod> = if methods.is_empty() {
                TrackMethod::ALL.to_vec()
            } else {
                methods.into_iter().map(TrackMethod::from).collect()
            };
            let report = run_bench(suite.as_deref(), &methods, weights.as_deref(), &out)?;
            for &m in &methods {
                let total = report.total_time(m);
                let objective: f64 = report.of_method(m).iter().map(|r| r.objective).sum();
                println!(
                    "{:<5} total objective {:>12.4}  total time {:>9.1} ms",
                    m.name(),
                    objective,
                    total.as_secs_f64() * 1e3
                );
            }
            println!("wrote {} and {}", out.display(), out.with_extension("svg").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
