//! Command-line verbs: `fetch`, `build`, `integrity` and `serve`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::ingest::{self, ActId, Cache, FetchPolicy, Fetcher, IngestError, Source};
use crate::integrity::{self, IntegrityError};
use crate::parser::{self, ParseDiagnostics, ParseError};
use crate::refs::{self, ExtractOptions};
use crate::transform::{self, EmissionLog, TransformError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("missing build artifact {0}; run `legisgraph build` first")]
    MissingArtifacts(PathBuf),
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("server error: {0}")]
    Server(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Integrity(#[from] IntegrityError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Integrity(IntegrityError::InvalidPattern { .. }) => 2,
            CliError::Ingest(IngestError::InvalidActId(..)) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "legisgraph",
    version,
    about = "UK legislation XML to citation graphs and hyperlinked HTML"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download the full-data XML and every per-section XML into the cache.
    Fetch(CommonArgs),
    /// Parse, extract references and write graphs, ToC and section fragments.
    Build(CommonArgs),
    /// Regex survey, structural tallies and parsed-vs-original pages.
    Integrity {
        #[command(flatten)]
        common: CommonArgs,
        /// Extra survey regexes, one per line; `#` starts a comment.
        #[arg(long, value_name = "FILE")]
        patterns: Option<PathBuf>,
        /// Sections to write compare pages for.
        #[arg(long = "section", value_name = "LABEL")]
        sections: Vec<String>,
    },
    /// Serve the artifact directory (and an optional UI bundle) read-only.
    Serve {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 8000)]
        port: u16,
        /// Directory with the web UI bundle, served after the artifacts.
        #[arg(long, value_name = "DIR")]
        ui: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Act as class/year/number.
    #[arg(long, default_value = "ukpga/2004/34")]
    pub act: ActId,
    /// Never touch the network; only cached documents are used.
    #[arg(long)]
    pub offline: bool,
    /// Artifact directory [default: out/<class>-<year>-<number>].
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Emit every label inside numeric section ranges.
    #[arg(long)]
    pub expand_ranges: bool,
    /// Cache root.
    #[arg(long, env = ingest::CACHE_ENV, value_name = "DIR")]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub act: ActId,
    pub policy: FetchPolicy,
    pub out_dir: PathBuf,
    pub expand_ranges: bool,
    pub patterns_file: Option<PathBuf>,
    pub cache_root: PathBuf,
}

impl RunConfig {
    pub fn new(act: ActId, cache_root: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            act,
            policy: FetchPolicy::CacheFirst,
            out_dir: out_dir.into(),
            expand_ranges: false,
            patterns_file: None,
            cache_root: cache_root.into(),
        }
    }

    pub fn from_args(args: &CommonArgs) -> Self {
        let out = args
            .out
            .clone()
            .unwrap_or_else(|| default_out_dir(&args.act));
        let cache = args.cache.clone().unwrap_or_else(Cache::default_root);
        let mut config = RunConfig::new(args.act.clone(), cache, out);
        if args.offline {
            config.policy = FetchPolicy::FixtureOnly;
        }
        config.expand_ranges = args.expand_ranges;
        config
    }

    pub fn options(&self) -> ExtractOptions {
        ExtractOptions {
            expand_ranges: self.expand_ranges,
        }
    }

    fn fetcher(&self) -> Result<Fetcher, CliError> {
        Ok(Fetcher::new(Cache::open(&self.cache_root)?))
    }
}

pub fn default_out_dir(act: &ActId) -> PathBuf {
    Path::new("out").join(act.path().replace('/', "-"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FetchSummary {
    pub act: String,
    pub full_data_source: Source,
    pub sections_listed: usize,
    pub sections_cached: usize,
    pub network_calls: usize,
    pub failures: Vec<(String, String)>,
}

pub fn cmd_fetch(config: &RunConfig) -> Result<FetchSummary, CliError> {
    let mut fetcher = config.fetcher()?;
    let full = fetcher.fetch(&ingest::act_data_url(&config.act), config.policy)?;
    let (model, _) = parser::contents(&full)?;
    let refs: Vec<String> = model.section_refs().map(|r| r.number.clone()).collect();
    let mut summary = FetchSummary {
        act: config.act.path(),
        full_data_source: full.source,
        sections_listed: refs.len(),
        sections_cached: 0,
        network_calls: 0,
        failures: Vec::new(),
    };
    for label in refs {
        match fetcher.fetch(
            &ingest::section_data_url(&config.act, &label),
            config.policy,
        ) {
            Ok(_) => summary.sections_cached += 1,
            Err(e) => {
                log::warn!("section {label}: {e}");
                summary.failures.push((label, e.to_string()));
            }
        }
    }
    summary.network_calls = fetcher.network_calls();
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildSummary {
    pub out_dir: PathBuf,
    pub emission: EmissionLog,
    pub diagnostics: ParseDiagnostics,
    pub elapsed: Duration,
}

pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";

pub fn cmd_build(config: &RunConfig) -> Result<BuildSummary, CliError> {
    let started = Instant::now();
    let mut fetcher = config.fetcher()?;
    let (model, diagnostics) = parser::parse_act(&config.act, config.policy, &mut fetcher)?;
    let records = refs::extract_all(&model, config.options());
    let artifacts = transform::emit_site(&model, &records, config.options(), &config.out_dir)?;
    let path = config.out_dir.join(DIAGNOSTICS_FILE);
    let mut body = serde_json::to_string_pretty(&diagnostics).expect("diagnostics serialize");
    body.push('\n');
    fs::write(&path, body).map_err(io_err(&path))?;
    Ok(BuildSummary {
        out_dir: config.out_dir.clone(),
        emission: artifacts.log,
        diagnostics,
        elapsed: started.elapsed(),
    })
}

pub const INTEGRITY_DIR: &str = "integrity";
pub const REPORT_FILE: &str = "report.json";
pub const SUMMARY_FILE: &str = "summary.txt";

/// Artifacts that must exist before `integrity` or `serve` run.
pub fn require_artifacts(out_dir: &Path) -> Result<(), CliError> {
    for name in [
        transform::INBOUND_FILE,
        transform::OUTBOUND_FILE,
        transform::TOC_FILE,
        transform::SECTIONS_DIR,
    ] {
        let path = out_dir.join(name);
        if !path.exists() {
            return Err(CliError::MissingArtifacts(path));
        }
    }
    Ok(())
}

pub fn read_patterns(path: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

#[derive(Debug, Clone)]
pub struct IntegritySummary {
    pub report: integrity::IntegrityReport,
    pub report_path: PathBuf,
    pub compare_pages: Vec<PathBuf>,
}

pub fn cmd_integrity(
    config: &RunConfig,
    sections: &[String],
) -> Result<IntegritySummary, CliError> {
    require_artifacts(&config.out_dir)?;
    let extra = match &config.patterns_file {
        Some(p) => read_patterns(p)?,
        None => Vec::new(),
    };
    let mut fetcher = config.fetcher()?;
    let (model, _) = parser::parse_act(&config.act, config.policy, &mut fetcher)?;
    let records = refs::extract_all(&model, config.options());
    let report = integrity::build_report(&model, &records, &extra)?;
    let dir = config.out_dir.join(INTEGRITY_DIR);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let report_path = dir.join(REPORT_FILE);
    let mut body = serde_json::to_string_pretty(&report).expect("report serializes");
    body.push('\n');
    fs::write(&report_path, body).map_err(io_err(&report_path))?;
    let summary_path = dir.join(SUMMARY_FILE);
    fs::write(&summary_path, report.summary()).map_err(io_err(&summary_path))?;
    let mut compare_pages = Vec::new();
    for label in sections {
        let html = integrity::compare_view(&model, label, fetcher.cache())?;
        let path = dir.join(format!(
            "compare-{}.html",
            transform::section_node_id(label)
        ));
        fs::write(&path, html).map_err(io_err(&path))?;
        compare_pages.push(path);
    }
    Ok(IntegritySummary {
        report,
        report_path,
        compare_pages,
    })
}

// ---------------------------------------------------------------------------
// serve

/// A running read-only static server.
pub struct ServerHandle {
    pub port: u16,
    server: Arc<tiny_http::Server>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    /// Blocks until the server stops.
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    pub fn shutdown(mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => "application/json",
        Some("html") => "text/html; charset=utf-8",
        Some("js") | Some("mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("svg") => "image/svg+xml",
        Some("txt") => "text/plain; charset=utf-8",
        _ => "application/octet-stream",
    }
}

/// Maps a request path onto a file below one of `roots`, refusing anything
/// that would leave them.
pub fn resolve_request(roots: &[PathBuf], raw_url: &str) -> Option<PathBuf> {
    let path = raw_url.split(['?', '#']).next().unwrap_or("");
    let mut rel = PathBuf::new();
    for seg in path.split('/').filter(|s| !s.is_empty()) {
        let seg = percent_encoding::percent_decode_str(seg)
            .decode_utf8()
            .ok()?;
        if seg == "." || seg == ".." || seg.contains(['/', '\\']) {
            return None;
        }
        rel.push(seg.as_ref());
    }
    if rel.as_os_str().is_empty() {
        rel.push("index.html");
    }
    roots.iter().map(|r| r.join(&rel)).find(|p| p.is_file())
}

fn handle(roots: &[PathBuf], request: tiny_http::Request) {
    use tiny_http::{Header, Method, Response};
    let reply = match request.method() {
        Method::Get | Method::Head => {
            match resolve_request(roots, request.url()).map(|p| (fs::read(&p), p)) {
                Some((Ok(bytes), path)) => {
                    let header = Header::from_bytes("Content-Type", content_type(&path))
                        .expect("static header");
                    Response::from_data(bytes).with_header(header)
                }
                _ => Response::from_string("not found").with_status_code(404),
            }
        }
        _ => Response::from_string("method not allowed").with_status_code(405),
    };
    if let Err(e) = request.respond(reply) {
        log::warn!("response failed: {e}");
    }
}

/// Starts serving `out_dir`, then `ui_dir`, on 127.0.0.1. Port 0 picks a
/// free port.
pub fn cmd_serve(
    out_dir: &Path,
    ui_dir: Option<&Path>,
    port: u16,
) -> Result<ServerHandle, CliError> {
    require_artifacts(out_dir)?;
    let server = tiny_http::Server::http(("127.0.0.1", port)).map_err(|e| {
        match e.downcast_ref::<io::Error>() {
            Some(io) if io.kind() == io::ErrorKind::AddrInUse => CliError::PortInUse(port),
            _ => CliError::Server(e.to_string()),
        }
    })?;
    let bound = server.server_addr().to_ip().map_or(port, |a| a.port());
    let server = Arc::new(server);
    let mut roots = vec![out_dir.to_path_buf()];
    roots.extend(ui_dir.map(Path::to_path_buf));
    let worker = Arc::clone(&server);
    let thread = std::thread::spawn(move || {
        for request in worker.incoming_requests() {
            handle(&roots, request);
        }
    });
    Ok(ServerHandle {
        port: bound,
        server,
        thread: Some(thread),
    })
}

/// Runs a parsed command line, printing summaries to stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fetch(args) => {
            let summary = cmd_fetch(&RunConfig::from_args(&args))?;
            println!(
                "{}: full data from {:?}, {}/{} sections cached, {} network calls",
                summary.act,
                summary.full_data_source,
                summary.sections_cached,
                summary.sections_listed,
                summary.network_calls
            );
            for (label, reason) in &summary.failures {
                println!("  section {label}: {reason}");
            }
        }
        Command::Build(args) => {
            let s = cmd_build(&RunConfig::from_args(&args))?;
            let e = &s.emission;
            println!(
                "{}: {} sections ({} without content, {} failed) in {:.1?}",
                e.act,
                e.sections_total,
                e.sections_contentless,
                s.diagnostics.sections_failed.len(),
                s.elapsed
            );
            println!(
                "inbound: {} nodes, {} links ({} mentions); outbound: {} nodes, {} links, {} external Acts",
                e.inbound_nodes, e.inbound_links, e.inbound_mentions, e.outbound_nodes, e.outbound_links, e.external_acts
            );
            println!("artifacts written to {}", s.out_dir.display());
        }
        Command::Integrity {
            common,
            patterns,
            sections,
        } => {
            let mut config = RunConfig::from_args(&common);
            config.patterns_file = patterns;
            let s = cmd_integrity(&config, &sections)?;
            print!("{}", s.report.summary());
            println!("report written to {}", s.report_path.display());
            for p in &s.compare_pages {
                println!("compare page written to {}", p.display());
            }
        }
        Command::Serve { common, port, ui } => {
            let config = RunConfig::from_args(&common);
            let handle = cmd_serve(&config.out_dir, ui.as_deref(), port)?;
            println!(
                "serving {} on http://127.0.0.1:{}/",
                config.out_dir.display(),
                handle.port
            );
            handle.join();
        }
    }
    Ok(())
}
