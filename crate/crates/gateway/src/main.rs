use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use edgearm::dynamics::{run_scenario, ScenarioConfig};
use edgearm::model::OrchestratorConfig;
use edgearm::reconciler::{AppOutcome, Strategy};
use edgearm_gateway::control::{self, DaemonLock};
use edgearm_gateway::{router, ApiState, Daemon, GatewayError, Session, Target};

const DEFAULT_CONFIG: &str = "edge-arm.yml";

#[derive(Parser)]
#[command(name = "edge-arm", version, about = "Continuous QoS-aware placement for Cloud-Edge applications")]
struct Cli {
    /// Configuration file (default: ./edge-arm.yml when present)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Register the application in PATH (default: current directory) and deploy it
    Add { path: Option<PathBuf> },
    /// Run a reasoning step for one application or all of them
    Exec(TargetArg),
    /// Remove one application or all of them
    Rm(TargetArg),
    /// Show desired and current placement of every application
    Status {
        #[arg(long)]
        json: bool,
    },
    /// Control the background watcher
    Watcher {
        #[arg(value_enum)]
        action: WatcherAction,
    },
    /// Run a seeded simulation and write its log
    Scenario(ScenarioArgs),
}

#[derive(Args)]
struct TargetArg {
    /// Application id or repository path
    #[arg(required_unless_present = "all", conflicts_with = "all")]
    app: Option<String>,
    #[arg(long)]
    all: bool,
}

impl TargetArg {
    fn target(&self) -> Target {
        match &self.app {
            Some(a) if !self.all => Target::One(a.clone()),
            _ => Target::All,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum WatcherAction {
    Start,
    Stop,
    Restart,
    Status,
    /// Run in the foreground (what `start` spawns)
    Run,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Cr,
    Ex,
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long, default_value_t = 15)]
    nodes: usize,
    #[arg(long, default_value_t = 10)]
    apps: usize,
    #[arg(long, default_value_t = 300)]
    ticks: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "cr")]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 3)]
    regions: usize,
    /// Record decision wall times (logs stop being reproducible)
    #[arg(long)]
    wall_clock: bool,
    /// Directory for the JSON-lines log and the CSV summary
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<(OrchestratorConfig, Option<PathBuf>), GatewayError> {
    let path = match path {
        Some(p) => Some(p.to_owned()),
        None => Path::new(DEFAULT_CONFIG).is_file().then(|| PathBuf::from(DEFAULT_CONFIG)),
    };
    match path {
        Some(p) => {
            let abs = p.canonicalize()?;
            Ok((OrchestratorConfig::load(&abs)?, Some(abs)))
        }
        None => Ok((OrchestratorConfig::default(), None)),
    }
}

fn print_outcome(o: &AppOutcome) {
    if let Some(u) = &o.unplaceable {
        println!("{}: unplaceable ({})", o.app_id, u);
        return;
    }
    if o.plan.remove_stack {
        match &o.error {
            None => println!("{}: removed", o.app_id),
            Some(e) => println!("{}: removal failed: {e:?}", o.app_id),
        }
        return;
    }
    if o.plan.is_empty() {
        println!("{}: no actions", o.app_id);
    } else {
        println!(
            "{}: {} deployed, {} migrated, {} removed",
            o.app_id,
            o.plan.deploy.len(),
            o.plan.migrate.len(),
            o.plan.remove.len()
        );
        for (s, n) in &o.plan.deploy {
            println!("  deploy  {s} -> {n}");
        }
        for m in &o.plan.migrate {
            println!("  migrate {} {} -> {}", m.service, m.from, m.to);
        }
        for s in &o.plan.remove {
            println!("  remove  {s}");
        }
    }
    if let Some(e) = &o.error {
        println!("{}: not applied: {e:?}", o.app_id);
    }
}

fn placement_text(p: &edgearm::model::Placement) -> String {
    if p.assignment.is_empty() {
        return "-".into();
    }
    p.assignment.iter().map(|(s, n)| format!("{s}@{n}")).collect::<Vec<_>>().join(" ")
}

fn run_daemon(config: OrchestratorConfig, config_path: Option<PathBuf>) -> Result<(), GatewayError> {
    let _lock = DaemonLock::acquire(&config.state_dir)?;
    let addr = config.http_addr.clone();
    let mut daemon = Daemon::open(config, config_path)?;
    let api = ApiState {
        view: daemon.view(),
        queue: daemon.queue(),
    };
    let stop = Arc::new(AtomicBool::new(false));
    let worker = {
        let stop = stop.clone();
        std::thread::spawn(move || daemon.run(&stop))
    };
    let runtime = tokio::runtime::Runtime::new()?;
    let served = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&addr).await?;
        log::info!("watcher running, HTTP on {}", listener.local_addr()?);
        axum::serve(listener, router(api))
            .with_graceful_shutdown(async {
                let mut term = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate())
                    .expect("SIGTERM handler");
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = term.recv() => {}
                }
            })
            .await
    });
    stop.store(true, Ordering::Relaxed);
    let _ = worker.join();
    log::info!("watcher stopped");
    served.map_err(GatewayError::from)
}

fn watcher(action: WatcherAction, config: OrchestratorConfig, config_path: Option<PathBuf>) -> Result<(), GatewayError> {
    let dir = config.state_dir.clone();
    let args: Vec<String> = config_path
        .iter()
        .flat_map(|p| ["--config".to_owned(), p.display().to_string()])
        .collect();
    let exe = std::env::current_exe()?;
    match action {
        WatcherAction::Start => {
            let pid = control::start(&exe, &args, &dir)?;
            println!("watcher started (pid {pid})");
        }
        WatcherAction::Stop => {
            let pid = control::stop(&dir)?;
            println!("watcher stopped (pid {pid})");
        }
        WatcherAction::Restart => {
            match control::stop(&dir) {
                Ok(pid) => println!("watcher stopped (pid {pid})"),
                Err(GatewayError::WatcherNotRunning) => {}
                Err(e) => return Err(e),
            }
            let pid = control::start(&exe, &args, &dir)?;
            println!("watcher started (pid {pid})");
        }
        WatcherAction::Status => match control::running(&dir)? {
            Some(pid) => println!("watcher running (pid {pid})"),
            None => println!("watcher stopped"),
        },
        WatcherAction::Run => run_daemon(config, config_path)?,
    }
    Ok(())
}

fn scenario(args: &ScenarioArgs) -> Result<(), GatewayError> {
    let (strategy, tag) = match args.strategy {
        StrategyArg::Cr => (Strategy::Continuous, "cr"),
        StrategyArg::Ex => (Strategy::ExhaustiveRestart, "ex"),
    };
    let config = ScenarioConfig {
        nodes: args.nodes,
        regions: args.regions,
        apps: args.apps,
        duration_ticks: args.ticks,
        seed: args.seed,
        strategy,
        wall_clock: args.wall_clock,
        ..ScenarioConfig::default()
    };
    let log = run_scenario(&config).map_err(|e| GatewayError::State(e.to_string()))?;
    std::fs::create_dir_all(&args.out)?;
    let stem = format!("scenario-{tag}-n{}-a{}-t{}-s{}", args.nodes, args.apps, args.ticks, args.seed);
    let jsonl = args.out.join(format!("{stem}.jsonl"));
    let csv = args.out.join(format!("{stem}.csv"));
    std::fs::write(&jsonl, log.to_jsonl())?;
    let summary = log.summary_csv();
    std::fs::write(&csv, &summary)?;
    print!("{summary}");
    eprintln!("wrote {} and {}", jsonl.display(), csv.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), GatewayError> {
    if let Cmd::Scenario(args) = &cli.command {
        return scenario(args);
    }
    let (config, config_path) = load_config(cli.config.as_deref())?;
    match cli.command {
        Cmd::Add { path } => {
            let path = path.unwrap_or_else(|| PathBuf::from("."));
            let mut session = Session::open(config)?;
            let (app, outcomes) = session.add(&path)?;
            if outcomes.is_empty() {
                println!("{app}: registered, waiting for an infrastructure report");
            }
            outcomes.iter().for_each(print_outcome);
        }
        Cmd::Exec(t) => {
            let mut session = Session::open(config)?;
            let outcomes = session.exec(&t.target())?;
            if outcomes.iter().all(|o| o.plan.is_empty() && o.unplaceable.is_none()) {
                println!("no actions");
            }
            outcomes.iter().filter(|o| !o.plan.is_empty() || o.unplaceable.is_some()).for_each(print_outcome);
        }
        Cmd::Rm(t) => {
            let mut session = Session::open(config)?;
            session.rm(&t.target())?.iter().for_each(print_outcome);
        }
        Cmd::Status { json } => {
            let session = Session::open(config)?;
            let statuses = session.status();
            if json {
                println!("{}", serde_json::to_string_pretty(&statuses).expect("status serializes"));
            } else {
                for s in statuses {
                    println!(
                        "{}\tmatch={}\tdegraded={}\tdesired: {}\tcurrent: {}",
                        s.app_id,
                        if s.matches { "yes" } else { "no" },
                        if s.degraded { "yes" } else { "no" },
                        placement_text(&s.desired),
                        placement_text(&s.current)
                    );
                }
            }
        }
        Cmd::Watcher { action } => watcher(action, config, config_path)?,
        Cmd::Scenario(_) => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let daemon = matches!(cli.command, Cmd::Watcher { action: WatcherAction::Run });
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if daemon { "info" } else { "warn" }))
        .format_timestamp_millis()
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("edge-arm: {e}");
            ExitCode::FAILURE
        }
    }
}
