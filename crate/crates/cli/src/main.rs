use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use bounce_cli::commands::{self, CmdResult, ExtractArgs, GenerateArgs};
use bounce_cli::service::{self, AppState};
use bounce_cli::store::{write_json, LATEST_EVALUATION};
use bounce_cli::CliError;
use bounce_core::classifier::Provenance;
use bounce_core::synth::NoiseSpec;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bounce", version, about = "Trampoline skill identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Body extraction and bounce segmentation over a clip.
    Extract {
        /// PNG directory or raw planar RGB stream (with a .json sidecar).
        #[arg(long)]
        frames: PathBuf,
        /// Routine directory to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the frame rate from the source.
        #[arg(long)]
        fps: Option<f64>,
        /// Trampoline line row; skips detection.
        #[arg(long)]
        line: Option<usize>,
        /// Routine id; defaults to the output directory name.
        #[arg(long)]
        id: Option<String>,
        /// Skip writing athlete crops.
        #[arg(long)]
        no_crops: bool,
    },
    /// Pose smoothing and feature extraction per routine jump.
    Features {
        #[arg(long)]
        poses: PathBuf,
        #[arg(long)]
        segments: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Nearest-reference classification of one feature trajectory.
    Classify {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        refs: PathBuf,
        /// Write the result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Appends a labelled trajectory to a reference set.
    Label {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        code: String,
        #[arg(long)]
        refs: PathBuf,
        #[arg(long)]
        routine_id: Option<String>,
        #[arg(long)]
        athlete_id: Option<String>,
    },
    /// Repeated random sub-sampling evaluation over labelled trajectories.
    Evaluate {
        /// Reference-set file or directory of labelled trajectory files.
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the evaluation seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Confusion counts CSV; a `_normalised` sibling is written too.
        #[arg(long)]
        confusion: Option<PathBuf>,
        /// Also store the report as the service's latest evaluation.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Synthetic poses (and frames) from the built-in skill models.
    Generate {
        /// Skill codes; with --routine, the routine's skills in order.
        codes: Vec<String>,
        #[arg(long)]
        routine: bool,
        #[arg(long, default_value_t = 3)]
        in_bounces: usize,
        #[arg(long, default_value_t = 1)]
        out_bounces: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        angle_sigma: f64,
        #[arg(long, default_value_t = 0.0)]
        keypoint_sigma: f64,
        #[arg(long, default_value_t = 0.0)]
        timing_sigma: f64,
        /// Samples per code.
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Also write labelled feature trajectories.
        #[arg(long)]
        features: bool,
        /// Render routine frames to PNG.
        #[arg(long)]
        render: bool,
        /// Empty-stage frames before a rendered routine.
        #[arg(long, default_value_t = 5)]
        lead_in: usize,
        /// JSON list of skill models overriding the built-ins.
        #[arg(long)]
        models: Option<PathBuf>,
        /// Frame width; the stage scales with it.
        #[arg(long)]
        width: Option<usize>,
    },
    /// Prints the default configuration file.
    Config,
    /// HTTP API over a data directory.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn print_json<T: serde::Serialize>(value: &T) -> CmdResult<()> {
    println!(
        "{}",
        serde_json::to_string_pretty(value).context("serialising output")?
    );
    Ok(())
}

fn run(cli: Cli) -> CmdResult<()> {
    match cli.command {
        Command::Extract {
            frames,
            out,
            config,
            fps,
            line,
            id,
            no_crops,
        } => {
            let args = ExtractArgs {
                frames,
                out,
                config: commands::load_config(config.as_deref())?,
                fps,
                line,
                id,
                crops: !no_crops,
            };
            let outcome = commands::extract(&args)?;
            eprintln!(
                "{}: {} frames, line {}, {} segments ({} routine jumps), {} crops",
                outcome.record.id,
                outcome.record.frame_count,
                outcome.record.trampoline_line.top_row,
                outcome.segments.len(),
                outcome
                    .segments
                    .iter()
                    .filter(|s| s.is_routine_jump)
                    .count(),
                outcome.crops
            );
        }
        Command::Features {
            poses,
            segments,
            out,
            config,
        } => {
            let cfg = commands::load_config(config.as_deref())?;
            let outcome = commands::features(&poses, &segments, &out, &cfg)?;
            for (k, msg) in &outcome.failed {
                eprintln!("segment {k}: {msg}");
            }
            eprintln!("{} trajectories written", outcome.written.len());
        }
        Command::Classify {
            features,
            refs,
            out,
        } => {
            let result = commands::classify(&features, &refs)?;
            match out {
                Some(p) => write_json(&p, &result)?,
                None => print_json(&result)?,
            }
        }
        Command::Label {
            features,
            code,
            refs,
            routine_id,
            athlete_id,
        } => {
            let provenance = Provenance {
                routine_id,
                athlete_id,
                created_at: None,
            };
            println!("{}", commands::label(&features, &code, &refs, provenance)?);
        }
        Command::Evaluate {
            dataset,
            config,
            seed,
            out,
            confusion,
            data_dir,
        } => {
            let mut cfg = commands::load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.evaluation.rng_seed = s;
            }
            let report = commands::evaluate(&dataset, &cfg, out.as_deref(), confusion.as_deref())?;
            if let Some(dir) = data_dir {
                write_json(&dir.join(LATEST_EVALUATION), &report)?;
            }
            if out.is_none() {
                print_json(&report)?;
            }
            eprintln!("mean accuracy {:.4}", report.mean_accuracy);
        }
        Command::Generate {
            codes,
            routine,
            in_bounces,
            out_bounces,
            seed,
            fps,
            out,
            angle_sigma,
            keypoint_sigma,
            timing_sigma,
            count,
            features,
            render,
            lead_in,
            models,
            width,
        } => {
            let args = GenerateArgs {
                codes,
                routine,
                in_bounces,
                out_bounces,
                seed,
                fps,
                out,
                noise: NoiseSpec {
                    keypoint_sigma,
                    angle_sigma,
                    timing_sigma,
                    seed,
                },
                count,
                features,
                render,
                lead_in,
                models,
                width,
            };
            for p in commands::generate(&args)? {
                println!("{}", p.display());
            }
        }
        Command::Config => print_json(&bounce_core::PipelineConfig::default())?,
        Command::Serve {
            port,
            host,
            data_dir,
            config,
        } => {
            let cfg = commands::load_config(config.as_deref())?;
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .with_context(|| format!("bad listen address {host}:{port}"))?;
            let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
            runtime
                .block_on(service::serve(addr, AppState::new(data_dir, cfg)))
                .map_err(CliError::pipeline)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
