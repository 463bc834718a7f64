use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use manipbench_core::bus::schema::{parse_contract, DESCRIBE_OP};
use manipbench_core::bus::{
    ComponentDescriptor, ComponentServer, Registry, SocketClient, Transport,
};
use manipbench_core::components::{default_registry, reference_component};
use manipbench_core::config::Experiment;
use manipbench_core::conformance::{run_conformance, Endpoint};
use manipbench_core::harness::{
    compare, read_records, HarnessError, JsonlSink, RunOptions, TRIALS_FILE,
};

const OK: u8 = 0;
const DOMAIN: u8 = 1;
const CONFIG: u8 = 2;
const TRANSPORT: u8 = 3;

/// A failed command: exit code and a one-line message.
struct Failure(u8, String);

type CmdResult = Result<u8, Failure>;

fn domain(msg: impl ToString) -> Failure {
    Failure(DOMAIN, msg.to_string())
}

fn config(msg: impl ToString) -> Failure {
    Failure(CONFIG, msg.to_string())
}

#[derive(Parser)]
#[command(
    name = "manipbench",
    version,
    about = "Run and compare manipulation benchmark protocols"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a run config, its behaviors and bindings.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Execute a protocol and write trials.jsonl, traces.jsonl, report.json and report.txt.
    Run(RunArgs),
    /// List components or run the conformance suite.
    Components {
        #[command(subcommand)]
        action: ComponentsAction,
    },
    /// Render a comparison report from a trial log.
    Report {
        #[arg(long)]
        trials: PathBuf,
        /// Comma-separated grouping keys: factor names, `planner`, `component:<slot>`.
        #[arg(long, value_delimiter = ',')]
        by: Vec<String>,
        /// Print JSON instead of the aligned table.
        #[arg(long)]
        json: bool,
    },
    /// Serve a reference component over the socket transport.
    Serve {
        #[arg(long)]
        id: String,
        #[arg(long, default_value = "127.0.0.1:0")]
        listen: String,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config and the protocol.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Zero every duration and trace timestamp.
    #[arg(long)]
    no_timestamps: bool,
    /// Stop at the first failed reset.
    #[arg(long)]
    fail_fast: bool,
    /// Do not contact socket components before the first trial.
    #[arg(long)]
    lazy: bool,
}

#[derive(Subcommand)]
enum ComponentsAction {
    /// Print component descriptors.
    List {
        /// Include the simulated devices and the components of this config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the conformance suite on one component.
    Conformance {
        #[arg(
            long,
            conflicts_with = "endpoint",
            required_unless_present = "endpoint"
        )]
        id: Option<String>,
        #[arg(long)]
        endpoint: Option<String>,
        /// Resolve `--id` among this config's components as well.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MANIPBENCH_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { config } => cmd_validate(&config),
        Command::Run(args) => cmd_run(&args),
        Command::Components {
            action: ComponentsAction::List { config },
        } => cmd_list(config.as_deref()),
        Command::Components {
            action:
                ComponentsAction::Conformance {
                    id,
                    endpoint,
                    config,
                },
        } => cmd_conformance(id.as_deref(), endpoint.as_deref(), config.as_deref()),
        Command::Report { trials, by, json } => cmd_report(&trials, &by, json),
        Command::Serve { id, listen } => cmd_serve(&id, &listen),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("ERROR {code}: {}", msg.replace('\n', " "));
            ExitCode::from(code)
        }
    }
}

fn load(path: &Path) -> Result<Experiment, Failure> {
    Experiment::load(path).map_err(config)
}

fn cmd_validate(path: &Path) -> CmdResult {
    let e = load(path)?;
    let findings = e.validate();
    for f in &findings {
        println!("FINDING {f}");
    }
    if findings.is_empty() {
        println!("ok: {}", path.display());
        Ok(OK)
    } else {
        Err(domain(format!(
            "{} finding(s) in {}",
            findings.len(),
            path.display()
        )))
    }
}

fn harness_failure(e: HarnessError) -> Failure {
    match e {
        HarnessError::Io(_) => config(e),
        other => domain(other),
    }
}

fn cmd_run(args: &RunArgs) -> CmdResult {
    let e = load(&args.config)?;
    let findings = e.validate();
    if let Some(f) = findings.first() {
        return Err(domain(format!("config does not validate: {f}")));
    }
    let bench = e.bench().map_err(domain)?;
    if !args.lazy {
        e.probe_endpoints(&bench).map_err(|(id, why)| {
            Failure(TRANSPORT, format!("component `{id}` unreachable: {why}"))
        })?;
    }
    let external = bench
        .bindings()
        .values()
        .filter_map(|b| bench.registry().resolve(&b.component))
        .any(|d| matches!(d.transport, Transport::Socket { .. }));
    let options = RunOptions {
        fail_fast: args.fail_fast,
        timestamps: !args.no_timestamps,
        conformance_verified: !external,
        ..RunOptions::default()
    };
    let out = args.out.clone().unwrap_or_else(|| e.output_dir());
    let protocol = e.protocol_with_seed(args.seed);
    let mut sink = JsonlSink::create(&out).map_err(config)?;
    let records = bench
        .run_protocol(&protocol, &mut sink, &options)
        .map_err(harness_failure)?;
    let by: Vec<String> = protocol.factors.keys().cloned().collect();
    let report = compare(&records, &by).map_err(domain)?;
    let write = |name: &str, text: &str| {
        std::fs::write(out.join(name), text)
            .map_err(|err| config(format!("{}: {err}", out.join(name).display())))
    };
    write("report.json", &report.to_json())?;
    write("report.txt", &report.render_text())?;
    let successes = records.iter().filter(|r| r.outcome.is_success()).count();
    println!(
        "{} trials, {successes} successes; log in {}",
        records.len(),
        out.join(TRIALS_FILE).display()
    );
    Ok(OK)
}

fn list_rows(registry: &Registry) {
    let rows: Vec<[String; 5]> = registry
        .descriptors()
        .iter()
        .map(|d| {
            let inputs: Vec<String> = d
                .accepted_inputs
                .iter()
                .map(|k| k.field().to_owned())
                .collect();
            [
                d.id.clone(),
                d.interface.to_string(),
                if inputs.is_empty() {
                    "-".into()
                } else {
                    inputs.join(",")
                },
                d.output_kind.map_or("-".into(), |k| k.to_string()),
                d.transport.to_string(),
            ]
        })
        .collect();
    let header = ["id", "interface", "inputs", "output", "transport"].map(String::from);
    let widths: Vec<usize> = (0..5)
        .map(|c| {
            rows.iter()
                .chain([&header])
                .map(|r| r[c].len())
                .max()
                .unwrap_or(0)
        })
        .collect();
    for r in [&header].into_iter().chain(rows.iter()) {
        let cells: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(s, w)| format!("{s:<w$}"))
            .collect();
        println!("{}", cells.join("  ").trim_end());
    }
}

fn cmd_list(config_path: Option<&Path>) -> CmdResult {
    match config_path {
        None => list_rows(&default_registry()),
        Some(p) => {
            let bench = load(p)?.bench().map_err(domain)?;
            list_rows(bench.registry());
        }
    }
    Ok(OK)
}

fn fetch_descriptor(endpoint: &str) -> Result<ComponentDescriptor, Failure> {
    let mut client = SocketClient::new(endpoint);
    let reply = client
        .call(
            DESCRIBE_OP,
            &serde_json::json!({}),
            Duration::from_secs(10),
            None,
        )
        .map_err(|e| Failure(TRANSPORT, format!("`{endpoint}`: {e}")))?;
    let contract = parse_contract(&reply).map_err(|e| domain(format!("`{endpoint}`: {e}")))?;
    let d: ComponentDescriptor = serde_json::from_value(contract).map_err(domain)?;
    Ok(d.with_transport(Transport::Socket {
        endpoint: endpoint.to_owned(),
    }))
}

fn cmd_conformance(
    id: Option<&str>,
    endpoint: Option<&str>,
    config_path: Option<&Path>,
) -> CmdResult {
    let (descriptor, target) = match (id, endpoint) {
        (_, Some(ep)) => (fetch_descriptor(ep)?, Endpoint::Socket(ep.to_owned())),
        (Some(id), None) => match reference_component(id) {
            Some(c) => (c.descriptor().clone(), Endpoint::InProcess(c)),
            None => {
                let declared = match config_path {
                    Some(p) => load(p)?.config.components.into_iter().find(|d| d.id == id),
                    None => None,
                };
                match declared {
                    Some(d) => {
                        let Transport::Socket { endpoint } = d.transport.clone() else {
                            return Err(domain(format!("component `{id}` has no socket endpoint")));
                        };
                        (d, Endpoint::Socket(endpoint))
                    }
                    None => return Err(domain(format!("unknown component `{id}`"))),
                }
            }
        },
        (None, None) => return Err(config("give --id or --endpoint")),
    };
    let report = run_conformance(&descriptor, &target);
    println!("{report}");
    if report.passed() {
        Ok(OK)
    } else {
        Err(domain(format!(
            "`{}` failed {} conformance check(s)",
            report.component,
            report.failures().count()
        )))
    }
}

fn cmd_report(trials: &Path, by: &[String], json: bool) -> CmdResult {
    let records = read_records(trials).map_err(|e| match e {
        HarnessError::Log { .. } => domain(format!("{}: {e}", trials.display())),
        other => config(other),
    })?;
    let report = compare(&records, by).map_err(domain)?;
    if json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.render_text());
    }
    Ok(OK)
}

fn cmd_serve(id: &str, listen: &str) -> CmdResult {
    let component =
        reference_component(id).ok_or_else(|| domain(format!("unknown component `{id}`")))?;
    let server = ComponentServer::bind(listen, component)
        .map_err(|e| Failure(TRANSPORT, format!("{listen}: {e}")))?;
    let addr = server
        .local_addr()
        .map_err(|e| Failure(TRANSPORT, e.to_string()))?;
    println!("serving `{id}` on {addr}");
    let stop = Arc::new(AtomicBool::new(false));
    server
        .serve(&stop)
        .map_err(|e| Failure(TRANSPORT, e.to_string()))?;
    Ok(OK)
}
