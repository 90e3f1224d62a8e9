use std::fs::File;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde_json::json;
use trainer::offline;
use trainer_core::marker_tracking::augment_dataset;
use trainer_core::service::{Pipeline, PipelineConfig, RunSummary};
use trainer_core::session_io::SessionReader;
use trainer_core::slippage_analysis::{read_trials_csv, summarize};
use trainer_core::stream_sync::{SourceSpec, StubHub};
use trainer_core::tongue_contour::{ExtractionMethod, DEFAULT_MAX_GAP};
use trainer_core::{Point2, Rect};

#[derive(Parser)]
#[command(name = "trainer", version, about = "Ultrasound tongue feedback pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the live pipeline, serving frames over WebSocket unless headless.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Process without a server and exit when the sources end.
        #[arg(long)]
        headless: bool,
        /// Record from startup into this session directory.
        #[arg(long)]
        record: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8765")]
        listen: SocketAddr,
        #[arg(long)]
        rgb_source: Option<SourceSpec>,
        #[arg(long)]
        us_source: Option<SourceSpec>,
        #[arg(long)]
        audio_source: Option<SourceSpec>,
    },
    /// Write augmented copies of a labelled marker dataset.
    Augment {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON array or JSON lines of augmentation specs.
        #[arg(long)]
        spec: PathBuf,
    },
    /// Build a calibration profile from a frame showing both markers.
    Calibrate {
        #[arg(long)]
        from_frame: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Ultrasound crop as x,y,width,height.
        #[arg(long, default_value = "0,0,320,240", value_parser = parse_rect)]
        us_crop: Rect,
        /// Anchor offset in marker-distance units as x,y.
        #[arg(long, default_value = "0.5,-1.0", value_parser = parse_point, allow_hyphen_values = true)]
        anchor_offset: Point2,
        /// Take detector settings from this pipeline config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Extract contours from a recorded session's ultrasound frames.
    ExtractContours {
        session: PathBuf,
        #[arg(long, default_value = "top")]
        method: ExtractionMethod,
        #[arg(long, default_value_t = 0.5)]
        threshold: f32,
        #[arg(long, default_value_t = DEFAULT_MAX_GAP)]
        max_gap: usize,
        /// Defaults to `<session>/extracted`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a recorded session back through the pipeline.
    Replay {
        session: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Record the replayed output into a new session.
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Check a session's checksums and structure.
    Verify { session: PathBuf },
    /// Summarize headset slippage trials from a CSV file.
    AnalyzeSlippage {
        csv: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_numbers<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    parts.try_into().map_err(|_| format!("expected {N} comma-separated numbers, got {s:?}"))
}

fn parse_rect(s: &str) -> Result<Rect, String> {
    let [x, y, w, h] = parse_numbers::<4>(s)?;
    if [x, y, w, h].iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
        return Err(format!("crop values must be non-negative integers, got {s:?}"));
    }
    Ok(Rect::new(x as u32, y as u32, w as u32, h as u32))
}

fn parse_point(s: &str) -> Result<Point2, String> {
    let [x, y] = parse_numbers::<2>(s)?;
    Ok(Point2::new(x, y))
}

fn load_config(path: Option<&Path>) -> anyhow::Result<PipelineConfig> {
    Ok(match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    })
}

fn print_json(v: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

async fn run_pipeline(config: PipelineConfig, listen: Option<SocketAddr>) -> anyhow::Result<RunSummary> {
    config.validate()?;
    let queue = config.publish_queue;
    let listener = match listen {
        Some(addr) => {
            let l = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
            log::info!("listening on ws://{}", l.local_addr()?);
            Some(l)
        }
        None => None,
    };
    let handle = Arc::new(Pipeline::start(config, StubHub::new())?);
    let done = {
        let h = handle.clone();
        tokio::task::spawn_blocking(move || h.wait())
    };
    let server = listener.map(|l| tokio::spawn(trainer::server::serve(l, handle.clone(), queue)));
    tokio::select! {
        _ = tokio::signal::ctrl_c() => {
            log::info!("interrupted, stopping");
            handle.stop();
        }
        _ = async { while !handle.is_finished() { tokio::time::sleep(std::time::Duration::from_millis(50)).await } } => {}
    }
    let summary = done.await??;
    if let Some(s) = server {
        s.abort();
    }
    Ok(summary)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            headless,
            record,
            listen,
            rgb_source,
            us_source,
            audio_source,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = rgb_source {
                cfg.sources.rgb = s;
            }
            if let Some(s) = us_source {
                cfg.sources.us = s;
            }
            if audio_source.is_some() {
                cfg.sources.audio = audio_source;
            }
            if record.is_some() {
                cfg.record.dir = record;
            }
            let rt = tokio::runtime::Runtime::new()?;
            let summary = rt.block_on(run_pipeline(cfg, (!headless).then_some(listen)))?;
            print_json(&summary)?;
        }
        Command::Augment { input, out, spec } => {
            let specs = offline::read_augment_specs(&spec)?;
            if specs.is_empty() {
                bail!("{} holds no specs", spec.display());
            }
            let summary = augment_dataset(&input, &out, &specs)?;
            print_json(&summary)?;
        }
        Command::Calibrate {
            from_frame,
            out,
            us_crop,
            anchor_offset,
            config,
        } => {
            let cfg = load_config(config.as_deref())?;
            let profile = offline::calibrate_from_frame(&from_frame, &cfg.detector.color_blob, anchor_offset, us_crop)?;
            profile.save(&out)?;
            print_json(&profile)?;
        }
        Command::ExtractContours {
            session,
            method,
            threshold,
            max_gap,
            out,
        } => {
            let out = out.unwrap_or_else(|| session.join("extracted"));
            let s = offline::extract_session_contours(&session, &out, method, threshold, max_gap)?;
            print_json(&json!({"frames": s.frames, "empty": s.empty, "csv": s.csv, "jsonl": s.jsonl}))?;
        }
        Command::Replay { session, config, record } => {
            SessionReader::open(&session)?;
            let mut cfg = load_config(config.as_deref())?;
            cfg.sources.rgb = SourceSpec::Replay(session.clone());
            cfg.sources.us = SourceSpec::Replay(session);
            cfg.sources.audio = None;
            cfg.record.dir = record;
            let rt = tokio::runtime::Runtime::new()?;
            let summary = rt.block_on(run_pipeline(cfg, None))?;
            print_json(&summary)?;
        }
        Command::Verify { session } => {
            let report = SessionReader::open(&session).and_then(|r| r.verify());
            match report {
                Ok(r) => print_json(&json!({"ok": true, "report": r}))?,
                Err(e) => {
                    print_json(&json!({"ok": false, "error": e.to_string()}))?;
                    return Ok(ExitCode::FAILURE);
                }
            }
        }
        Command::AnalyzeSlippage { csv, out } => {
            let file = File::open(&csv).with_context(|| format!("opening {}", csv.display()))?;
            let table = summarize(&read_trials_csv(file)?)?;
            if let Some(out) = out {
                std::fs::write(&out, serde_json::to_string_pretty(&table)?)
                    .with_context(|| format!("writing {}", out.display()))?;
            }
            print_json(&table)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
