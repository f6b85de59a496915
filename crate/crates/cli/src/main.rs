use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use qsched_core::bench::{run_bench, BenchConfig};
use qsched_core::NoiseConfig;
use qsched_service::ServiceConfig;
use serde_json::{json, Value};
use tracing_subscriber::EnvFilter;

const PLACEHOLDER_NOISE: f64 = 0.01;

/// Multiprogramming scheduler for quantum circuits.
#[derive(Debug, Parser)]
#[command(name = "qsched", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the scheduler service.
    Serve(ServeArgs),
    /// Submit a circuit file; prints the job id.
    Submit(SubmitArgs),
    /// Fetch a job's status and counts as JSON.
    Result(ResultArgs),
    /// Show the waiting jobs in FIFO order.
    Queue(ServerArg),
    /// Compare scheduled and individual runs over a corpus directory.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct ServerArg {
    #[arg(long, env = "QSCHED_SERVER", default_value = "http://127.0.0.1:8080")]
    server: String,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// TOML configuration file; QSCHED_* variables override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    listen: Option<String>,
    #[arg(long)]
    journal: Option<PathBuf>,
    #[arg(long)]
    capacity: Option<usize>,
    #[arg(long)]
    cycle_ms: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Qasm,
    Quirk,
}

#[derive(Debug, Args)]
struct SubmitArgs {
    file: PathBuf,
    /// Defaults to the file extension (`.quirk` is Quirk, anything else QASM).
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long, default_value_t = 1024)]
    shots: u64,
    #[command(flatten)]
    server: ServerArg,
}

#[derive(Debug, Args)]
struct ResultArgs {
    job_id: String,
    /// Downsample to the shot count requested at submission.
    #[arg(long)]
    requested: bool,
    /// Poll for up to this many seconds until the job finishes.
    #[arg(long, value_name = "SECS")]
    wait: Option<u64>,
    #[command(flatten)]
    server: ServerArg,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(default_value = "corpus")]
    corpus: PathBuf,
    #[arg(long, default_value_t = 12)]
    capacity: usize,
    #[arg(long, default_value_t = 10_000)]
    shots: u64,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Per-gate depolarizing probability on the scheduled runs.
    #[arg(long, default_value_t = 0.0)]
    depolarizing: f64,
    /// Per-bit readout flip probability on the scheduled runs.
    #[arg(long, default_value_t = 0.0)]
    readout: f64,
    /// Use the placeholder rates depolarizing 0.01, readout 0.01. They are
    /// not calibrated to any hardware.
    #[arg(long, conflicts_with_all = ["depolarizing", "readout"])]
    placeholder_noise: bool,
    /// Apply the noise to the individual runs too.
    #[arg(long)]
    noise_on_individual: bool,
    #[arg(long)]
    parallel: bool,
    /// Write the CSV report here.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Failure talking to the server, kept apart from API rejections so the
/// exit code tells them apart.
#[derive(Debug)]
enum ClientError {
    Connect(String),
    Api { status: u16, body: Value },
    Other(anyhow::Error),
}

impl From<anyhow::Error> for ClientError {
    fn from(e: anyhow::Error) -> Self {
        ClientError::Other(e)
    }
}

impl From<reqwest::Error> for ClientError {
    fn from(e: reqwest::Error) -> Self {
        if e.is_connect() || e.is_timeout() {
            ClientError::Connect(e.to_string())
        } else {
            ClientError::Other(e.into())
        }
    }
}

fn request(rb: reqwest::blocking::RequestBuilder) -> Result<Value, ClientError> {
    let resp = rb.send()?;
    let status = resp.status().as_u16();
    let text = resp.text()?;
    let body: Value = serde_json::from_str(&text).unwrap_or(Value::String(text));
    if status >= 400 {
        return Err(ClientError::Api { status, body });
    }
    Ok(body)
}

fn client() -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(30))
        .build()
        .expect("http client")
}

fn url(server: &ServerArg, path: &str) -> String {
    format!("{}{path}", server.server.trim_end_matches('/'))
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json"));
}

fn submit(args: SubmitArgs) -> Result<(), ClientError> {
    let payload = std::fs::read_to_string(&args.file)
        .with_context(|| format!("reading {}", args.file.display()))?;
    let format = args.format.unwrap_or(match args.file.extension().and_then(|e| e.to_str()) {
        Some("quirk") => Format::Quirk,
        _ => Format::Qasm,
    });
    let name = args.file.file_stem().and_then(|s| s.to_str());
    let body = json!({
        "format": match format { Format::Qasm => "qasm", Format::Quirk => "quirk" },
        "payload": payload,
        "shots": args.shots,
        "name": name,
    });
    let resp = request(client().post(url(&args.server, "/circuits")).json(&body))?;
    println!("{}", resp["job_id"].as_str().unwrap_or_default());
    Ok(())
}

fn result(args: ResultArgs) -> Result<(), ClientError> {
    let path = format!(
        "/results/{}{}",
        args.job_id,
        if args.requested { "?shots=requested" } else { "" }
    );
    let deadline = args.wait.map(|s| Instant::now() + Duration::from_secs(s));
    let http = client();
    loop {
        let view = request(http.get(url(&args.server, &path)))?;
        let finished = matches!(view["status"].as_str(), Some("DONE" | "FAILED"));
        match deadline {
            Some(d) if !finished && Instant::now() < d => std::thread::sleep(Duration::from_millis(100)),
            _ => {
                print_json(&view);
                return Ok(());
            }
        }
    }
}

fn queue(args: ServerArg) -> Result<(), ClientError> {
    print_json(&request(client().get(url(&args, "/queue")))?);
    Ok(())
}

fn bench(args: BenchArgs) -> anyhow::Result<()> {
    let noise = if args.placeholder_noise {
        NoiseConfig::new(PLACEHOLDER_NOISE, PLACEHOLDER_NOISE)?
    } else {
        NoiseConfig::new(args.depolarizing, args.readout)?
    };
    let config = BenchConfig {
        corpus_dir: args.corpus,
        capacity: args.capacity,
        shots: args.shots,
        seed: args.seed,
        noise: (!noise.is_noiseless()).then_some(noise),
        noise_on_individual: args.noise_on_individual,
        parallel: args.parallel,
        output: args.output.clone(),
    };
    let outcome = run_bench(&config)?;
    let report = &outcome.report;
    for d in &report.per_job {
        println!(
            "{:<24} width {:>2}  hellinger {:.6}  wasserstein {:.6}",
            d.job_id.as_str(),
            d.width,
            d.hellinger,
            d.wasserstein
        );
    }
    println!(
        "{} circuits, {} batches, mean hellinger {:.4}%, mean wasserstein {:.4}% ({})",
        report.per_job.len(),
        outcome.batches.len(),
        report.mean_hellinger_pct,
        report.mean_wasserstein_pct,
        report.wasserstein_embedding
    );
    if let Some(p) = &args.output {
        println!("report written to {}", p.display());
    }
    Ok(())
}

fn serve(args: ServeArgs) -> anyhow::Result<()> {
    let mut config = ServiceConfig::load(args.config.as_deref())?;
    if let Some(v) = args.listen {
        config.listen = v;
    }
    if let Some(v) = args.journal {
        config.journal_path = v;
    }
    if let Some(v) = args.capacity {
        config.scheduler.capacity = v;
    }
    if let Some(v) = args.cycle_ms {
        config.scheduler.cycle_duration = Duration::from_millis(v);
    }
    if args.seed.is_some() {
        config.seed = args.seed;
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(qsched_service::serve(config))?;
    Ok(())
}

fn client_exit(r: Result<(), ClientError>) -> ExitCode {
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(ClientError::Api { status, body }) => {
            match (body["code"].as_str(), body["message"].as_str()) {
                (Some(code), Some(msg)) => eprintln!("error {status} {code}: {msg}"),
                _ => eprintln!("error {status}: {body}"),
            }
            if !body["detail"].is_null() {
                eprintln!("detail: {}", body["detail"]);
            }
            ExitCode::from(1)
        }
        Err(ClientError::Connect(e)) => {
            eprintln!("cannot reach server: {e}");
            ExitCode::from(3)
        }
        Err(ClientError::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let local = |r: anyhow::Result<()>| match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    };
    match cli.command {
        Command::Serve(a) => local(serve(a)),
        Command::Submit(a) => client_exit(submit(a)),
        Command::Result(a) => client_exit(result(a)),
        Command::Queue(a) => client_exit(queue(a)),
        Command::Bench(a) => local(bench(a)),
    }
}
