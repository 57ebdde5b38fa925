//! Command line entry points.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use truthy_core::analytics::MemeStats;
use truthy_core::generator::{generate, GenConfig};
use truthy_core::ingest::Pacer;
use truthy_core::pipeline::DEFAULT_SNAPSHOT_EVERY;
use truthy_core::storage::ExportFormat;
use truthy_core::{MemeKey, Pipeline, PipelineOptions};

use crate::config::EngineArgs;
use crate::serve::{serve, ServeOptions};

pub const DEFAULT_STATE_DIR: &str = "truthy-state";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "truthy", version, about = "Track memes and their diffusion networks in a tweet stream")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the pipeline and serve the HTTP API until SIGTERM or Ctrl-C.
    Serve {
        #[command(flatten)]
        engine: EngineArgs,
        /// HTTP port for the API.
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// JSONL corpus to replay into the pipeline.
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
        /// Replay speed relative to event time; 0 replays as fast as possible.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Accept JSONL records on this TCP port.
        #[arg(long, value_name = "PORT")]
        listen: Option<u16>,
        #[arg(long, value_name = "ORIGIN")]
        cors_origin: Option<String>,
        #[arg(long, value_name = "DIR", default_value = DEFAULT_STATE_DIR)]
        state: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SNAPSHOT_EVERY)]
        snapshot_every: u64,
    },
    /// Replay a corpus into the state directory and print a summary line.
    Replay {
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        speed: f64,
        #[arg(long, value_name = "DIR", default_value = DEFAULT_STATE_DIR)]
        state: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SNAPSHOT_EVERY)]
        snapshot_every: u64,
    },
    /// Generate a synthetic corpus and its ledger.
    Gen {
        #[arg(long)]
        tweets: u64,
        #[arg(long, default_value_t = 2000)]
        users: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "FILE")]
        themes: PathBuf,
        /// Corpus path; the ledger goes next to it as `<stem>.ledger.json`.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Write one meme network from the state directory.
    Export {
        #[arg(long, value_name = "KIND:VALUE")]
        meme: String,
        #[arg(long, value_name = "F")]
        format: String,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long, value_name = "DIR", default_value = DEFAULT_STATE_DIR)]
        state: PathBuf,
    },
    /// Print statistics of one meme from the state directory.
    Stats {
        #[arg(long, value_name = "KIND:VALUE")]
        meme: String,
        #[arg(long, value_name = "DIR", default_value = DEFAULT_STATE_DIR)]
        state: PathBuf,
    },
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("truthy: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Serve { engine, port, host, input, speed, listen, cors_origin, state, snapshot_every } => {
            let config = engine.load(true)?;
            if let Some(path) = &input {
                File::open(path)
                    .map_err(|e| CliError::Config(format!("cannot read input file `{}`: {e}", path.display())))?;
            }
            let pacer = Pacer::new(speed).map_err(|e| CliError::Usage(e.to_string()))?;
            let cors_origin = cors_origin
                .map(|o| o.parse().map_err(|_| CliError::Usage(format!("invalid --cors-origin `{o}`"))))
                .transpose()?;
            let pipeline = open_state(&state, config, snapshot_every)?;
            serve(pipeline, ServeOptions { host, port, input, pacer, listen, cors_origin })
        }
        Command::Replay { engine, input, speed, state, snapshot_every } => {
            let config = engine.load(true)?;
            let source = File::open(&input)
                .map_err(|e| CliError::Config(format!("cannot read input file `{}`: {e}", input.display())))?;
            let pacer = Pacer::new(speed).map_err(|e| CliError::Usage(e.to_string()))?;
            let mut pipeline = open_state(&state, config, snapshot_every)?;
            pipeline.run(BufReader::new(source), Some(pacer)).map_err(CliError::runtime)?;
            pipeline.checkpoint().map_err(CliError::runtime)?;
            let engine = pipeline.engine();
            let counters = pipeline.ingest_counters();
            let summary = json!({
                "records": counters.records,
                "errors": counters.errors(),
                "late": counters.late,
                "duplicates": counters.duplicates,
                "routed": engine.counters().routed,
                "memes": engine.meme_count(),
                "log_len": pipeline.log_len(),
                "state_digest": engine.state_digest().map_err(CliError::runtime)?,
            });
            println!("{summary}");
            Ok(())
        }
        Command::Gen { tweets, users, seed, themes, out } => {
            let themes = truthy_core::theme::load_themes_file(&themes)
                .map_err(|e| CliError::Config(format!("themes file `{}`: {e}", themes.display())))?;
            let config = GenConfig { tweets, users, seed, ..GenConfig::default() };
            let corpus = generate(&config, &themes).map_err(|e| CliError::Usage(e.to_string()))?;
            let ledger_path = ledger_path(&out);
            let create = |p: &Path| {
                File::create(p)
                    .map(BufWriter::new)
                    .map_err(|e| CliError::Runtime(format!("cannot create `{}`: {e}", p.display())))
            };
            let mut w = create(&out)?;
            corpus.write_jsonl(&mut w).map_err(CliError::runtime)?;
            w.flush().map_err(CliError::runtime)?;
            let mut w = create(&ledger_path)?;
            corpus.ledger.write_json(&mut w).map_err(CliError::runtime)?;
            w.flush().map_err(CliError::runtime)?;
            eprintln!(
                "wrote {} tweets to {} ({} routed), ledger {}",
                corpus.tweets.len(),
                out.display(),
                corpus.ledger.routed,
                ledger_path.display()
            );
            Ok(())
        }
        Command::Export { meme, format, out, state } => {
            let key = parse_meme(&meme)?;
            let format: ExportFormat = format.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
            let pipeline = open_existing(&state)?;
            let bytes = pipeline.engine().export_network(&key, format).map_err(CliError::runtime)?;
            std::fs::write(&out, bytes)
                .map_err(|e| CliError::Runtime(format!("cannot write `{}`: {e}", out.display())))
        }
        Command::Stats { meme, state } => {
            let key = parse_meme(&meme)?;
            let pipeline = open_existing(&state)?;
            let stats = pipeline.engine().stats(&key).map_err(CliError::runtime)?;
            print!("{}", render_stats(&stats));
            println!("{}", serde_json::to_string(&stats).map_err(CliError::runtime)?);
            Ok(())
        }
    }
}

/// `corpus.jsonl` -> `corpus.ledger.json`, in the same directory.
pub fn ledger_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "corpus".into());
    out.with_file_name(format!("{stem}.ledger.json"))
}

fn parse_meme(raw: &str) -> Result<MemeKey, CliError> {
    if raw.trim().is_empty() {
        return Err(CliError::Usage("--meme must not be empty".into()));
    }
    raw.parse().map_err(|e| CliError::Usage(format!("--meme `{raw}`: {e}")))
}

fn open_state(dir: &Path, config: truthy_core::EngineConfig, snapshot_every: u64) -> Result<Pipeline, CliError> {
    if snapshot_every == 0 {
        return Err(CliError::Usage("--snapshot-every must be at least 1".into()));
    }
    let options = PipelineOptions { snapshot_every, ..PipelineOptions::default() };
    let pipeline = Pipeline::open(dir, config, options).map_err(CliError::runtime)?;
    for w in &pipeline.recovery().warnings {
        tracing::warn!("{w}");
    }
    Ok(pipeline)
}

fn open_existing(dir: &Path) -> Result<Pipeline, CliError> {
    if !dir.join("log").is_dir() {
        return Err(CliError::Config(format!("`{}` is not a state directory", dir.display())));
    }
    open_state(dir, truthy_core::EngineConfig::default(), DEFAULT_SNAPSHOT_EVERY)
}

fn render_stats(s: &MemeStats) -> String {
    let ts = |t: Option<chrono::DateTime<chrono::Utc>>| t.map_or("-".to_string(), |t| truthy_core::tweet::format_timestamp(&t));
    let rows = [
        ("meme", s.meme.to_string()),
        ("n_tweets", s.n_tweets.to_string()),
        ("n_users", s.n_users.to_string()),
        ("n_retweet_edges", s.n_retweet_edges.to_string()),
        ("n_mention_edges", s.n_mention_edges.to_string()),
        ("mean_degree", format!("{:.6}", s.mean_degree)),
        ("lcc_size", s.lcc_size.to_string()),
        ("first_seen", ts(s.lifespan.first_seen)),
        ("last_seen", ts(s.lifespan.last_seen)),
    ];
    rows.iter().map(|(k, v)| format!("{k:<16}{v}\n")).collect()
}
