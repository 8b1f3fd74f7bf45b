mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use tooldex_core::agent::{Limits, Planner, RemotePlanner, ScriptedPlanner, SuiteRunner};
use tooldex_core::dataset::{
    bundled_base_queries, bundled_question_bank, load_base_queries, load_csv, load_question_bank, standard_roster,
    CompanyService, Dataset, DatasetError, GenerateOptions, COMPANIES_FILE, FLEET_FILE, INSTANCES_FILE, MANIFEST_FILE,
    QUESTIONS_FILE,
};
use tooldex_core::embedding::{ComponentWeights, EmbeddingProvider, EmbeddingStrategy, RemoteProvider, StrategyKind, TokenHashProvider};
use tooldex_core::eval::{build_corpora, render_table, run_retrieval_experiment, ContainmentJudge, Judge, RemoteJudge};
use tooldex_core::index::{IdentityReranker, RemoteReranker, Reranker, Retriever};
use tooldex_core::mcp::{
    serve_http, serve_stdio, Gateway, HttpTransport, InProcessTransport, McpClient, McpServer, MessageHandler,
    RetrievalService, RetrievalSettings, Sidecar, StdioTransport,
};
use tooldex_core::retrieval::{search, SearchOptions};
use tooldex_core::sync::{full_sync, SharedStore, ToolSource, ToolStore};
use tooldex_core::tool_model::ToolHash;
use tooldex_core::workbench::{owners, Workbench};

use config::{Config, ProviderName, ServerConfig, ServerTransport, StrategyName};

const API_KEY_ENV: &str = "TOOLDEX_API_KEY";

#[derive(Parser)]
#[command(name = "tooldex", version, about = "Auto-synchronized MCP tool registry with retrieval and evaluation")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// TOML configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Index directory
    #[arg(long, global = true)]
    index: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    strategy: Option<StrategyName>,
    /// TDWA weights as w1,w2,w3,w4 (name, description, parameters, questions)
    #[arg(long, global = true)]
    weights: Option<String>,
    /// Synthetic questions per tool: 0, 5 or 10
    #[arg(long, global = true)]
    sq: Option<usize>,
    /// vector, bm25, hybrid or rerank
    #[arg(long, global = true)]
    retriever: Option<Retriever>,
    /// Hybrid fusion weight of the vector side
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Number of tools to return
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Seed for dataset generation
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate companies, tool fleet, synthetic questions and query instances
    Generate(GenerateArgs),
    /// Sync the index with the configured servers or a generated fleet
    Sync(SyncArgs),
    /// Serve the retrieval tool over MCP
    Serve(ServeArgs),
    /// Search the index
    Search(SearchArgs),
    /// Run the retrieval grid and optionally the agent suite
    Eval(EvalArgs),
    /// Run the generated company MCP servers
    Fleet(FleetArgs),
    /// Print the effective configuration
    Config,
}

#[derive(Args)]
struct GenerateArgs {
    /// CSV with header name,ticker,aliases; the bundled roster is used otherwise
    #[arg(long)]
    companies: Option<PathBuf>,
    /// Roster size when no CSV is given
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// Output directory (defaults to the configured dataset directory)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    max_per_template: usize,
    #[arg(long)]
    base_queries: Option<PathBuf>,
    #[arg(long)]
    question_bank: Option<PathBuf>,
}

#[derive(Args)]
struct SyncArgs {
    /// Generated dataset to serve in process when no servers are configured
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Re-embed every tool
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8765")]
    listen: String,
    /// Speak MCP on stdin/stdout instead of HTTP
    #[arg(long)]
    stdio: bool,
    /// Re-sync from the configured sources every SECS seconds
    #[arg(long, value_name = "SECS")]
    resync: Option<u64>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    workers: usize,
}

#[derive(Args)]
struct SearchArgs {
    query: String,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Grid {
    /// {concat, tdwa-var-1, tdwa-var-2} x every retriever
    Full,
    /// Only the configured strategy and retriever
    Single,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum PlannerKind {
    Scripted,
    Remote,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, default_value = "tooldex-eval")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Grid::Full)]
    grid: Grid,
    /// Cut-offs, comma separated
    #[arg(long, default_value = "1,5,10", value_delimiter = ',')]
    ks: Vec<usize>,
    /// Use only the first N instances
    #[arg(long)]
    limit: Option<usize>,
    /// Also run agent episodes over the first N instances
    #[arg(long, value_name = "N")]
    agent: Option<usize>,
    #[arg(long, value_enum, default_value_t = PlannerKind::Scripted)]
    planner: PlannerKind,
}

#[derive(Args)]
struct FleetArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8700")]
    listen: String,
    /// Serve one company on stdin/stdout
    #[arg(long, requires = "server")]
    stdio: bool,
    /// Company server id (its slug)
    #[arg(long)]
    server: Option<String>,
    /// Write a config file listing every served endpoint
    #[arg(long)]
    emit_config: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    workers: usize,
}

enum CliError {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

fn usage(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Usage(e.into())
}

fn dataset_error(e: DatasetError) -> CliError {
    match e {
        DatasetError::Io(_) => CliError::Runtime(e.into()),
        _ => CliError::Usage(e.into()),
    }
}

type CliResult = Result<(), CliError>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = effective_config(&cli.global).and_then(|config| run(cli.command, &config));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn effective_config(g: &GlobalArgs) -> Result<Config, CliError> {
    let mut c = match &g.config {
        Some(path) => Config::load(path).map_err(usage)?,
        None => Config::default(),
    };
    if let Some(v) = &g.index {
        c.index = v.clone();
    }
    if let Some(v) = g.strategy {
        c.embedding.strategy = v;
    }
    if let Some(v) = &g.weights {
        c.embedding.weights = v.parse::<ComponentWeights>().map_err(usage)?.as_array();
    }
    if let Some(v) = g.sq {
        c.embedding.sq = v;
    }
    if let Some(v) = g.retriever {
        c.retrieval.retriever = v;
    }
    if let Some(v) = g.alpha {
        c.retrieval.alpha = v;
    }
    if let Some(v) = g.k {
        c.retrieval.k = v;
    }
    if let Some(v) = g.seed {
        c.seed = v;
    }
    c.validate().map_err(usage)?;
    Ok(c)
}

fn run(command: Command, config: &Config) -> CliResult {
    match command {
        Command::Generate(a) => cmd_generate(a, config),
        Command::Sync(a) => cmd_sync(a, config),
        Command::Serve(a) => cmd_serve(a, config),
        Command::Search(a) => cmd_search(a, config),
        Command::Eval(a) => cmd_eval(a, config),
        Command::Fleet(a) => cmd_fleet(a, config),
        Command::Config => {
            print!("{}", config.to_toml());
            Ok(())
        }
    }
}

fn api_key() -> Option<String> {
    std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty())
}

fn provider(config: &Config) -> Arc<dyn EmbeddingProvider> {
    let e = &config.embedding;
    match e.provider {
        ProviderName::TokenHash => Arc::new(TokenHashProvider::new(e.dimension)),
        ProviderName::Remote => Arc::new(RemoteProvider::new(
            e.endpoint.clone().unwrap_or_default(),
            e.model.clone().unwrap_or_default(),
            e.dimension,
            api_key(),
        )),
    }
}

fn strategy(config: &Config) -> Result<EmbeddingStrategy, CliError> {
    Ok(EmbeddingStrategy::new(config.embedding.kind().map_err(usage)?, provider(config)))
}

fn reranker(config: &Config) -> Arc<dyn Reranker> {
    match &config.retrieval.reranker_endpoint {
        Some(url) => Arc::new(RemoteReranker::new(url.clone(), api_key())),
        None => Arc::new(IdentityReranker),
    }
}

fn search_options(config: &Config) -> SearchOptions {
    SearchOptions { retriever: config.retrieval.retriever, alpha: config.retrieval.alpha, ..SearchOptions::default() }
}

fn file_digest(path: &Path) -> anyhow::Result<String> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ToolHash::of_text(&text).to_hex())
}

fn cmd_generate(a: GenerateArgs, config: &Config) -> CliResult {
    let companies = match &a.companies {
        Some(path) => load_csv(path).map_err(dataset_error)?,
        None => standard_roster(a.n, config.seed),
    };
    let bank = match &a.question_bank {
        Some(p) => load_question_bank(p).map_err(dataset_error)?,
        None => bundled_question_bank(),
    };
    let base = match &a.base_queries {
        Some(p) => load_base_queries(p).map_err(dataset_error)?,
        None => bundled_base_queries(),
    };
    let options = GenerateOptions { seed: config.seed, sq: config.embedding.sq, max_per_template: a.max_per_template };
    let ds = Dataset::generate(companies, &bank, &base, options).map_err(dataset_error)?;
    let out = a.out.unwrap_or_else(|| config.dataset.clone());
    ds.write(&out).map_err(dataset_error)?;
    let questions: usize = ds.tools().map(|t| t.synthetic_questions.len()).sum();
    println!("companies: {}", ds.manifest.companies);
    println!("tools: {}", ds.manifest.tools);
    println!("synthetic questions: {questions}");
    println!("instances: {}", ds.manifest.instances);
    println!("average calls per instance: {:.3}", ds.manifest.average_hops);
    for f in [COMPANIES_FILE, FLEET_FILE, QUESTIONS_FILE, INSTANCES_FILE, MANIFEST_FILE] {
        println!("{f} sha256={}", file_digest(&out.join(f))?);
    }
    Ok(())
}

fn load_dataset(dir: &Path) -> Result<Dataset, CliError> {
    Dataset::load(dir).map_err(|e| CliError::Runtime(anyhow!("loading dataset {}: {e}", dir.display())))
}

fn sidecar_for(config: &Config, dataset: Option<&Path>) -> Arc<Sidecar> {
    let path = dataset.unwrap_or(&config.dataset).join(QUESTIONS_FILE);
    Arc::new(Sidecar::load(&path).unwrap_or_default())
}

fn connect(server: &ServerConfig, sidecar: &Arc<Sidecar>) -> anyhow::Result<McpClient> {
    let timeout = Duration::from_secs(30);
    let transport: Box<dyn tooldex_core::mcp::Transport> = match server.transport {
        ServerTransport::Http => Box::new(HttpTransport::new(server.url.clone().unwrap_or_default(), timeout)),
        ServerTransport::Stdio => {
            let (program, args) = server.command.split_first().ok_or_else(|| anyhow!("empty command"))?;
            Box::new(StdioTransport::spawn(program, args, timeout).map_err(|e| anyhow!("{}: {e}", server.id))?)
        }
    };
    Ok(McpClient::new(&server.id, transport).with_sidecar(Arc::clone(sidecar)))
}

/// Configured servers, or the dataset's companies served in process.
fn sources(config: &Config, dataset: Option<&Path>) -> Result<Gateway, CliError> {
    let mut gateway = Gateway::new();
    if !config.servers.is_empty() {
        let sidecar = sidecar_for(config, dataset);
        for s in &config.servers {
            match connect(s, &sidecar) {
                Ok(client) => gateway.register(client).map_err(|e| CliError::Usage(e.into()))?,
                Err(e) => {
                    eprintln!("warning: skipping server {}: {e:#}", s.id);
                    continue;
                }
            };
        }
        return Ok(gateway);
    }
    let dir = dataset.unwrap_or(&config.dataset);
    if !dir.join(MANIFEST_FILE).exists() {
        return Err(usage(anyhow!(
            "no servers configured and no dataset at {}; run `tooldex generate` or add [[servers]]",
            dir.display()
        )));
    }
    let ds = load_dataset(dir)?;
    let sidecar = Arc::new(ds.sidecar());
    for service in ds.services() {
        let id = service.server().server_id.clone();
        let handler: Arc<dyn MessageHandler> = Arc::new(McpServer::new(service));
        let client = McpClient::new(&id, Box::new(InProcessTransport::new(&id, handler))).with_sidecar(Arc::clone(&sidecar));
        gateway.register(client).map_err(|e| CliError::Usage(e.into()))?;
    }
    Ok(gateway)
}

fn sync_once(gateway: &Gateway, store: &SharedStore, embedder: &EmbeddingStrategy, force: bool) -> anyhow::Result<String> {
    let list: Vec<&dyn ToolSource> = gateway.clients().iter().map(|c| c.as_ref() as &dyn ToolSource).collect();
    let report = full_sync(&list, store, embedder, force)?;
    for s in &report.skipped_servers {
        eprintln!("warning: server {s} unreachable; kept its indexed tools");
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for (tool, e) in &report.errors {
        eprintln!("error: {tool}: {e}");
    }
    Ok(report.to_string())
}

fn cmd_sync(a: SyncArgs, config: &Config) -> CliResult {
    let embedder = strategy(config)?;
    let gateway = sources(config, a.dataset.as_deref())?;
    let store = SharedStore::persistent(&config.index, embedder.dimension()).context("opening index")?;
    println!("{}", sync_once(&gateway, &store, &embedder, a.force)?);
    Ok(())
}

fn open_index(config: &Config, embedder: &EmbeddingStrategy) -> Result<ToolStore, CliError> {
    let store = ToolStore::load(&config.index)
        .map_err(|e| CliError::Runtime(anyhow!("no usable index at {} ({e}); run `tooldex sync`", config.index.display())))?;
    let want = embedder.fingerprint();
    if store.embedding.as_deref() != Some(want.as_str()) {
        return Err(CliError::Runtime(anyhow!(
            "index was built with {}, not {want}; run `tooldex sync` with these settings",
            store.embedding.as_deref().unwrap_or("an unknown strategy")
        )));
    }
    Ok(store)
}

fn cmd_search(a: SearchArgs, config: &Config) -> CliResult {
    let embedder = strategy(config)?;
    let store = open_index(config, &embedder)?;
    let rr = reranker(config);
    let ranked = search(&store.index, &embedder, rr.as_ref(), &a.query, config.retrieval.k, &search_options(config))
        .map_err(|e| CliError::Runtime(e.into()))?;
    let rows: Vec<[String; 4]> = ranked
        .items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let server = store.index.get_by_tool_id(&item.tool_id).map(|e| e.to_document().origin_server).unwrap_or_default();
            [(i + 1).to_string(), format!("{:.6}", item.score), item.tool_id.clone(), server]
        })
        .collect();
    let header = ["rank", "score", "tool", "server"].map(String::from);
    let widths: Vec<usize> =
        (0..4).map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0)).collect();
    for row in std::iter::once(&header).chain(&rows) {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(v, w)| format!("{v:<w$}")).collect();
        println!("{}", cells.join("  ").trim_end());
    }
    Ok(())
}

fn cmd_serve(a: ServeArgs, config: &Config) -> CliResult {
    let embedder = strategy(config)?;
    let store = Arc::new(SharedStore::persistent(&config.index, embedder.dimension()).context("opening index")?);
    if let Some(secs) = a.resync {
        let gateway = sources(config, a.dataset.as_deref())?;
        let (store, embedder) = (Arc::clone(&store), embedder.clone());
        std::thread::spawn(move || loop {
            match sync_once(&gateway, &store, &embedder, false) {
                Ok(line) => eprintln!("sync: {line}"),
                Err(e) => eprintln!("sync failed: {e:#}"),
            }
            std::thread::sleep(Duration::from_secs(secs.max(1)));
        });
    }
    let settings = RetrievalSettings { k: config.retrieval.k, options: search_options(config) };
    let service = RetrievalService::new(Arc::clone(&store), embedder, settings).with_reranker(reranker(config));
    let handler: Arc<dyn MessageHandler> = Arc::new(McpServer::new(service));
    if a.stdio {
        let stdin = std::io::stdin();
        serve_stdio(handler.as_ref(), stdin.lock(), std::io::stdout()).context("stdio session")?;
        return Ok(());
    }
    let server = serve_http(&a.listen, vec![("/mcp".into(), handler)], a.workers).context("binding HTTP listener")?;
    println!("serving get_mcp_servers at {}", server.url("/mcp"));
    std::io::stdout().flush().ok();
    server.join();
    Ok(())
}

fn cmd_fleet(a: FleetArgs, config: &Config) -> CliResult {
    let dir = a.dataset.as_deref().unwrap_or(&config.dataset);
    let ds = load_dataset(dir)?;
    let seed = ds.manifest.seed;
    if a.stdio {
        let id = a.server.as_deref().unwrap_or_default();
        let server = ds
            .fleet
            .iter()
            .find(|s| s.server_id == id)
            .ok_or_else(|| usage(anyhow!("dataset has no server `{id}`")))?;
        let handler = McpServer::new(CompanyService::new(server.clone(), seed));
        let stdin = std::io::stdin();
        serve_stdio(&handler, stdin.lock(), std::io::stdout()).context("stdio session")?;
        return Ok(());
    }
    let selected: Vec<_> = ds.fleet.iter().filter(|s| a.server.as_deref().is_none_or(|id| id == s.server_id)).collect();
    if selected.is_empty() {
        return Err(usage(anyhow!("dataset has no server `{}`", a.server.unwrap_or_default())));
    }
    let routes: Vec<(String, Arc<dyn MessageHandler>)> = selected
        .iter()
        .map(|s| {
            let handler: Arc<dyn MessageHandler> = Arc::new(McpServer::new(CompanyService::new((*s).clone(), seed)));
            (format!("/servers/{}", s.server_id), handler)
        })
        .collect();
    let http = serve_http(&a.listen, routes, a.workers).context("binding HTTP listener")?;
    if let Some(path) = &a.emit_config {
        let mut out = config.clone();
        out.dataset = std::path::absolute(dir).unwrap_or_else(|_| dir.to_path_buf());
        out.servers = selected
            .iter()
            .map(|s| ServerConfig {
                id: s.server_id.clone(),
                transport: ServerTransport::Http,
                url: Some(http.url(&format!("/servers/{}", s.server_id))),
                command: vec![],
            })
            .collect();
        std::fs::write(path, out.to_toml()).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("listening on {}", http.url(""));
    println!("serving {} servers at {}", selected.len(), http.url("/servers/<id>"));
    std::io::stdout().flush().ok();
    http.join();
    Ok(())
}

fn cmd_eval(a: EvalArgs, config: &Config) -> CliResult {
    if a.ks.contains(&0) || a.ks.is_empty() {
        return Err(usage(anyhow!("--ks must list positive cut-offs")));
    }
    let dir = a.dataset.as_deref().unwrap_or(&config.dataset);
    let ds = load_dataset(dir)?;
    let mut instances = ds.instances.clone();
    if let Some(n) = a.limit {
        instances.truncate(n);
    }
    if instances.is_empty() {
        return Err(usage(anyhow!("dataset has no query instances")));
    }
    let (kinds, retrievers): (Vec<StrategyKind>, Vec<Retriever>) = match a.grid {
        Grid::Full => (
            vec![StrategyKind::Concat, StrategyKind::Tdwa(ComponentWeights::VAR_1), StrategyKind::Tdwa(ComponentWeights::VAR_2)],
            Retriever::ALL.to_vec(),
        ),
        Grid::Single => (vec![config.embedding.kind().map_err(usage)?], vec![config.retrieval.retriever]),
    };
    let corpora = build_corpora(&ds.fleet, &bundled_question_bank(), &[config.embedding.sq], &kinds, provider(config))
        .map_err(|e| CliError::Runtime(e.into()))?;
    let rr = reranker(config);
    let reports = run_retrieval_experiment(&instances, &corpora, &retrievers, &a.ks, search_options(config), rr.as_ref());
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let table = render_table(&reports);
    std::fs::write(a.out.join("retrieval.json"), serde_json::to_string_pretty(&reports).context("serializing report")?)
        .context("writing retrieval.json")?;
    std::fs::write(a.out.join("retrieval.txt"), &table).context("writing retrieval.txt")?;
    println!("instances: {}", instances.len());
    print!("{table}");
    for r in reports.iter().filter(|r| r.error.is_some()) {
        eprintln!("cell {} failed: {}", r.fingerprint, r.error.as_deref().unwrap_or_default());
    }

    if let Some(n) = a.agent {
        let embedder = strategy(config)?;
        let settings = RetrievalSettings { k: config.retrieval.k, options: search_options(config) };
        let wb = Workbench::in_process(&ds, embedder, settings, Some(rr));
        println!("agent index: {}", wb.sync(false).context("syncing agent index")?);
        let judge: Box<dyn Judge> = match &config.endpoints.judge {
            Some(url) => Box::new(RemoteJudge::new(url.clone(), Duration::from_secs(60))),
            None => Box::new(ContainmentJudge),
        };
        let owner_map = owners(&ds);
        let tool_server = |t: &str| owner_map.get(t).cloned();
        let runner = SuiteRunner {
            retrieval: &wb.retrieval,
            gateway: &wb.gateway,
            judge: judge.as_ref(),
            limits: Limits::default(),
            tool_server: &tool_server,
        };
        let subset = &ds.instances[..n.min(ds.instances.len())];
        let report = match a.planner {
            PlannerKind::Scripted => runner.run(subset, |i| Box::new(ScriptedPlanner::new(i.expected_calls.clone())) as Box<dyn Planner>),
            PlannerKind::Remote => {
                let url = config.endpoints.planner.clone().ok_or_else(|| usage(anyhow!("endpoints.planner is not set")))?;
                let model = config.endpoints.planner_model.clone().unwrap_or_else(|| "gpt-4o".into());
                runner.run(subset, |_| {
                    Box::new(RemotePlanner::new(url.clone(), model.clone(), api_key(), Duration::from_secs(120))) as Box<dyn Planner>
                })
            }
        };
        let transcripts = a.out.join("transcripts");
        std::fs::create_dir_all(&transcripts).context("creating transcripts directory")?;
        for e in &report.episodes {
            e.transcript.save(&transcripts.join(format!("{}.json", e.instance_id))).context("writing transcript")?;
        }
        std::fs::write(a.out.join("agent.json"), serde_json::to_string_pretty(&report).context("serializing agent report")?)
            .context("writing agent.json")?;
        let completion = report.mean_task_completion.map_or("n/a".to_owned(), |v| format!("{v:.3}"));
        println!(
            "agent episodes: {} tool correctness: {:.3} task completion: {completion} (judge: {}) failures: {}",
            report.episodes.len(),
            report.mean_tool_correctness,
            judge.id(),
            report.failures.len()
        );
    }
    Ok(())
}
