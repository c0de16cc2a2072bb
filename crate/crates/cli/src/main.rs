//! `netsemantic` — network fault diagnosis from the command line.
//!
//! Subcommands mirror the workflow stages: `simulate` generates labeled
//! synthetic datasets, `semanticize` and `symbolize` expose the intermediate
//! representations, `kg` manages the knowledge graph, `diagnose` runs the
//! full pipeline, and `eval` scores predictions or ablation variants.
//!
//! Exit codes: 0 success, 1 provider failure, 2 usage error. Output files are
//! written to a temporary name and renamed on success, so failures never
//! leave partial files behind.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use netsemantic_core::datamodel::{
    load_dataset, save_dataset, FaultCategory, TimeWindow, TopologyKind,
};
use netsemantic_core::diagnose::{
    run_pipeline, LlmProvider, MockProvider, PipelineConfig, PipelineError, RemoteProvider,
};
use netsemantic_core::nkg::{
    builtin_graph, index_entities, load_graph, parse_graph_text, save_graph, serialize_graph,
    token_economy, update_graph, Entity, EntityKind, FactStatement, KnowledgeGraph, Observation,
    RetrievalResult,
};
use netsemantic_core::semgen::{
    build_semantic_prompt, build_symbolic_prompt, mean_centrality, render_table, sample_semantics,
    select_best, similarity_matrix, Demonstration, Embedder, HashEmbedder, PromptVariant,
};
use netsemantic_core::simeval::{
    compute_confusion, compute_metrics, generate_scenario, run_ablation, AblationVariant,
    FaultInjection, NetworkType, SampleLabel, ScenarioSpec,
};
use netsemantic_core::symgen::{
    anomalous_entities, derive_rules, evaluate_rules, extract_facts, kpi_vector,
    observe_connectivity, Aggregation, FactSet, Rule,
};

#[derive(Parser)]
#[command(name = "netsemantic", version, about = "Semantic and symbolic network fault diagnosis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset
    Simulate(SimulateArgs),
    /// Run the full diagnosis pipeline over a dataset
    Diagnose(DiagnoseArgs),
    /// Build, update, or query the network knowledge graph
    Kg(KgArgs),
    /// Score predictions against labels, or run ablation variants
    Eval(EvalArgs),
    /// Render the semantic table, prompt, and selected sample
    Semanticize(SemanticizeArgs),
    /// Render facts, rules, findings, and the symbolic prompt
    Symbolize(SymbolizeArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// star | ring | mesh
    #[arg(long, default_value = "star")]
    topology: String,
    #[arg(long, default_value_t = 9)]
    nodes: usize,
    /// mobile | vanet | uav | cellular
    #[arg(long = "type", default_value = "uav")]
    network_type: String,
    #[arg(long, default_value_t = 10_000)]
    duration: i64,
    #[arg(long, default_value_t = 1_000)]
    period: i64,
    /// Fault injection `<category>:<device>:<start>-<end>` (repeatable)
    #[arg(long = "fault")]
    faults: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct ProviderArgs {
    /// mock | remote
    #[arg(long, default_value = "mock")]
    provider: String,
    /// Sampling/synthesis temperature (default 0 mock, 0.7 remote)
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    provider: ProviderArgs,
    /// Semantic sampling count n
    #[arg(long, default_value_t = 5)]
    samples: usize,
    #[arg(long = "top-k", default_value_t = 5)]
    top_k: usize,
    #[arg(long, default_value_t = 2)]
    hops: usize,
    /// zero_shot | general_info | expertise | self_heuristic
    #[arg(long, default_value = "self_heuristic")]
    variant: String,
    /// Analysis window `<start>-<end>` in ms (default: full span)
    #[arg(long)]
    window: Option<String>,
    /// last | mean | max
    #[arg(long, default_value = "last")]
    aggregation: String,
    /// Knowledge graph file (default: builtin seed graph)
    #[arg(long)]
    kg: Option<PathBuf>,
    /// Ablation: omit the knowledge component, skip retrieval
    #[arg(long = "no-kg")]
    no_kg: bool,
    /// Ablation: omit the symbolic component, skip rule evaluation
    #[arg(long = "no-symbolic")]
    no_symbolic: bool,
    /// Ablation: semantic description only (implies --no-kg --no-symbolic)
    #[arg(long = "semantic-only")]
    semantic_only: bool,
    /// Write the post-report adaptive knowledge graph update here
    #[arg(long = "update-kg")]
    update_kg: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct KgArgs {
    #[command(subcommand)]
    command: KgCommand,
}

#[derive(Subcommand)]
enum KgCommand {
    /// Build a graph file from triples (E/R/F records or bare triples)
    Build {
        #[arg(long)]
        triples: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply timestamped entity/fact observations (last writer wins)
    Update {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        observations: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank entities against a query and print the expanded subgraph
    Query {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        query: String,
        #[arg(long = "top-k", default_value_t = 5)]
        top_k: usize,
        #[arg(long, default_value_t = 2)]
        hops: usize,
    },
}

#[derive(Args)]
struct EvalArgs {
    /// CSV `sample_id,0|1` predictions
    #[arg(long, requires = "labels")]
    predictions: Option<PathBuf>,
    /// CSV `sample_id,0|1` ground truth
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Comma-separated ablation variants (full,no_kg,no_symbolic,semantic_only,provider_swap)
    #[arg(long)]
    ablation: Option<String>,
    /// Labeled dataset directory (required with --ablation)
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[command(flatten)]
    provider: ProviderArgs,
    /// Write machine-readable metric rows here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SemanticizeArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    provider: ProviderArgs,
    #[arg(long, default_value_t = 5)]
    samples: usize,
    #[arg(long, default_value = "self_heuristic")]
    variant: String,
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    kg: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SymbolizeArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    window: Option<String>,
    #[arg(long, default_value = "last")]
    aggregation: String,
    #[arg(long)]
    kg: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// A failure carrying its process exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

type CliResult = std::result::Result<(), Failure>;

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure { code: 2, error: e.into() }
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure { code: 1, error: e.into() }
}

fn pipeline_failure(e: PipelineError) -> Failure {
    if e.is_provider_error() {
        runtime(e)
    } else {
        usage(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::Kg(args) => cmd_kg(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Semanticize(args) => cmd_semanticize(args),
        Command::Symbolize(args) => cmd_symbolize(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

// ============================================================================
// Shared parsing and output helpers
// ============================================================================

fn parse_window(text: &str) -> Result<TimeWindow> {
    let (start, end) = text
        .split_once('-')
        .ok_or_else(|| anyhow!("window must be <start>-<end>, got {text:?}"))?;
    let window = TimeWindow::new(start.trim().parse()?, end.trim().parse()?);
    if window.is_empty() {
        bail!("window {text:?} is empty");
    }
    Ok(window)
}

fn parse_category(text: &str) -> Result<FaultCategory> {
    let category = match text {
        "app_crash" | "application_crash" => FaultCategory::ApplicationCrash,
        "malicious" | "malicious_traffic" => FaultCategory::MaliciousTraffic,
        "congestion" | "network_congestion" => FaultCategory::NetworkCongestion,
        "node_crash" | "network_node_crash" => FaultCategory::NetworkNodeCrash,
        "out_of_range" | "out_of_communication_range" => FaultCategory::OutOfCommunicationRange,
        "obstacles" | "communication_obstacles" => FaultCategory::CommunicationObstacles,
        other => bail!("unknown fault category {other:?}"),
    };
    Ok(category)
}

fn parse_fault(text: &str) -> Result<FaultInjection> {
    let parts: Vec<&str> = text.splitn(3, ':').collect();
    if parts.len() != 3 {
        bail!("fault must be <category>:<device>:<start>-<end>, got {text:?}");
    }
    Ok(FaultInjection {
        category: parse_category(parts[0])?,
        target: parts[1].to_string(),
        window: parse_window(parts[2])?,
    })
}

fn parse_variant(text: &str) -> Result<PromptVariant> {
    PromptVariant::from_str_opt(text).ok_or_else(|| anyhow!("unknown prompt variant {text:?}"))
}

fn parse_aggregation(text: &str) -> Result<Aggregation> {
    Aggregation::from_str_opt(text).ok_or_else(|| anyhow!("unknown aggregation {text:?}"))
}

fn make_provider(args: &ProviderArgs) -> Result<(Box<dyn LlmProvider>, f64)> {
    match args.provider.as_str() {
        "mock" => Ok((Box::new(MockProvider::new()), args.temperature.unwrap_or(0.0))),
        "remote" => {
            let provider = RemoteProvider::from_env().map_err(|e| anyhow!(e.to_string()))?;
            Ok((Box::new(provider), args.temperature.unwrap_or(0.7)))
        }
        other => bail!("unknown provider {other:?} (expected mock or remote)"),
    }
}

fn load_kg(path: &Option<PathBuf>, embedder: &dyn Embedder) -> Result<KnowledgeGraph> {
    let mut kg = match path {
        Some(p) => load_graph(p).with_context(|| format!("loading graph {}", p.display()))?,
        None => builtin_graph(),
    };
    index_entities(&mut kg, embedder)?;
    Ok(kg)
}

/// Write via a temporary sibling and rename, so failures leave no partial file.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

// ============================================================================
// simulate
// ============================================================================

fn cmd_simulate(args: SimulateArgs) -> CliResult {
    let topology_kind = match args.topology.as_str() {
        "star" => TopologyKind::Star,
        "ring" => TopologyKind::Ring,
        "mesh" => TopologyKind::Mesh,
        other => return Err(usage(anyhow!("unknown topology {other:?}"))),
    };
    let network_type = NetworkType::from_str_opt(&args.network_type)
        .ok_or_else(|| usage(anyhow!("unknown network type {:?}", args.network_type)))?;
    let fault_injections = args
        .faults
        .iter()
        .map(|f| parse_fault(f))
        .collect::<Result<Vec<_>>>()
        .map_err(usage)?;
    let spec = ScenarioSpec {
        topology_kind,
        node_count: args.nodes,
        network_type,
        duration_ms: args.duration,
        sample_period_ms: args.period,
        fault_injections,
        seed: args.seed,
    };
    let dataset = generate_scenario(&spec).map_err(usage)?;

    // Stage into a sibling temp directory, then swap in.
    let staging = args.out.with_extension("tmp");
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(runtime)?;
    }
    save_dataset(&dataset, &staging).map_err(runtime)?;
    if args.out.exists() {
        if args.out.join("profiles.json").is_file() {
            fs::remove_dir_all(&args.out).map_err(runtime)?;
        } else {
            return Err(usage(anyhow!(
                "output {} exists and is not a dataset directory",
                args.out.display()
            )));
        }
    }
    fs::rename(&staging, &args.out).map_err(runtime)?;
    println!(
        "wrote dataset: {} devices, {} labels, {}",
        dataset.profiles.len(),
        dataset.labels.len(),
        args.out.display()
    );
    Ok(())
}

// ============================================================================
// diagnose
// ============================================================================

fn cmd_diagnose(args: DiagnoseArgs) -> CliResult {
    let dataset = load_dataset(&args.dataset).map_err(usage)?;
    let embedder = HashEmbedder::default();
    let kg = load_kg(&args.kg, &embedder).map_err(usage)?;
    let (provider, temperature) = make_provider(&args.provider).map_err(usage)?;

    let no_kg = args.no_kg || args.semantic_only;
    let no_symbolic = args.no_symbolic || args.semantic_only;
    let window = match &args.window {
        Some(w) => Some(parse_window(w).map_err(usage)?),
        None => None,
    };
    let config = PipelineConfig {
        samples: args.samples,
        temperature,
        top_k: args.top_k,
        hops: args.hops,
        seed: args.provider.seed,
        window,
        aggregation: parse_aggregation(&args.aggregation).map_err(usage)?,
        variant: parse_variant(&args.variant).map_err(usage)?,
        no_kg,
        no_symbolic,
    };

    let out = run_pipeline(&dataset, &kg, provider.as_ref(), &embedder, &config)
        .map_err(pipeline_failure)?;

    write_atomic(&args.out.join("report.json"), &to_json(&out.report).map_err(runtime)?)
        .map_err(runtime)?;
    write_atomic(&args.out.join("report.txt"), &out.report.render_text()).map_err(runtime)?;
    write_atomic(&args.out.join("findings.json"), &to_json(&out.findings).map_err(runtime)?)
        .map_err(runtime)?;
    write_atomic(&args.out.join("context.txt"), &out.context.render()).map_err(runtime)?;
    write_atomic(&args.out.join("audit.json"), &to_json(&out.audit).map_err(runtime)?)
        .map_err(runtime)?;

    // Adaptive knowledge update happens only after the report is emitted.
    if let Some(update_path) = &args.update_kg {
        let (updated, summary) = update_graph(kg, &out.kg_observations).map_err(runtime)?;
        save_graph(&updated, update_path).map_err(runtime)?;
        println!(
            "kg update: {} applied, {} stale -> {}",
            summary.applied,
            summary.stale,
            update_path.display()
        );
    }

    println!(
        "fault_type: {} | findings: {} | blueprints: {} | report: {}",
        out.report.fault_type,
        out.findings.len(),
        out.blueprints.len(),
        args.out.join("report.txt").display()
    );
    Ok(())
}

// ============================================================================
// kg
// ============================================================================

fn parse_observations(text: &str) -> Result<Vec<Observation>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            ["E", id, name, kind, ts] => {
                let kind = EntityKind::from_str_opt(kind)
                    .ok_or_else(|| anyhow!("line {}: unknown kind {kind:?}", i + 1))?;
                out.push(Observation::Entity(Entity::new(id, name, kind).at(ts.parse()?)));
            }
            ["F", entity, attr, value, ts] => {
                out.push(Observation::Fact(
                    FactStatement::new(entity, attr, value).at(ts.parse()?),
                ));
            }
            _ => bail!(
                "line {}: observations must be E or F records with timestamps",
                i + 1
            ),
        }
    }
    Ok(out)
}

fn cmd_kg(args: KgArgs) -> CliResult {
    match args.command {
        KgCommand::Build { triples, out } => {
            let text = fs::read_to_string(&triples)
                .with_context(|| format!("reading {}", triples.display()))
                .map_err(usage)?;
            let graph = parse_graph_text(&text).map_err(usage)?;
            write_atomic(&out, &serialize_graph(&graph)).map_err(runtime)?;
            let economy = token_economy(&graph);
            println!(
                "graph: {} entities, {} relations, {} facts | triple form {} chars, prose form {} chars",
                graph.entity_count(),
                graph.relation_count(),
                graph.fact_count(),
                economy.triple_chars,
                economy.prose_chars
            );
            Ok(())
        }
        KgCommand::Update { graph, observations, out } => {
            let g = load_graph(&graph).map_err(usage)?;
            let obs_text = fs::read_to_string(&observations)
                .with_context(|| format!("reading {}", observations.display()))
                .map_err(usage)?;
            let obs = parse_observations(&obs_text).map_err(usage)?;
            let (updated, summary) = update_graph(g, &obs).map_err(runtime)?;
            write_atomic(&out, &serialize_graph(&updated)).map_err(runtime)?;
            println!("{} applied, {} stale", summary.applied, summary.stale);
            Ok(())
        }
        KgCommand::Query { graph, query, top_k, hops } => {
            let embedder = HashEmbedder::default();
            let kg = load_kg(&graph, &embedder).map_err(usage)?;
            let result: RetrievalResult =
                netsemantic_core::nkg::retrieve(&kg, &embedder, &query, top_k, hops)
                    .map_err(usage)?;
            println!("candidates:");
            for (id, score) in &result.candidates {
                println!("  {id} {score:.4}");
            }
            println!("subgraph:");
            for line in result.subgraph.render_snippets() {
                println!("  {line}");
            }
            Ok(())
        }
    }
}

// ============================================================================
// eval
// ============================================================================

fn read_label_file(path: &Path) -> Result<Vec<SampleLabel>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() || (i == 0 && line.starts_with("sample_id")) {
            continue;
        }
        let (id, value) = line
            .split_once(',')
            .ok_or_else(|| anyhow!("line {}: expected sample_id,0|1", i + 1))?;
        let positive = match value.trim() {
            "0" => false,
            "1" => true,
            other => bail!("line {}: label must be 0 or 1, got {other:?}", i + 1),
        };
        out.push(SampleLabel::new(id.trim(), positive));
    }
    out.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    Ok(out)
}

fn cmd_eval(args: EvalArgs) -> CliResult {
    if let Some(spec) = &args.ablation {
        let dataset_path = args
            .dataset
            .as_ref()
            .ok_or_else(|| usage(anyhow!("--ablation requires --dataset")))?;
        let dataset = load_dataset(dataset_path).map_err(usage)?;
        let variants = spec
            .split(',')
            .map(|v| {
                AblationVariant::from_str_opt(v.trim())
                    .ok_or_else(|| anyhow!("unknown ablation variant {v:?}"))
            })
            .collect::<Result<Vec<_>>>()
            .map_err(usage)?;
        let embedder = HashEmbedder::default();
        let mut kg = builtin_graph();
        index_entities(&mut kg, &embedder).map_err(usage)?;
        let (provider, _) = make_provider(&args.provider).map_err(usage)?;
        let rows = run_ablation(
            &dataset,
            &kg,
            &embedder,
            provider.as_ref(),
            None,
            &variants,
            args.provider.seed,
        )
        .map_err(runtime)?;

        let mut machine = String::from("variant,accuracy,recall,fnr,fpr\n");
        println!("{:<16} {:>8} {:>8} {:>8} {:>8}", "variant", "accuracy", "recall", "fnr", "fpr");
        for row in &rows {
            println!(
                "{:<16} {:>8} {:>8} {:>8} {:>8}",
                row.variant.as_str(),
                row.metrics.accuracy.to_string(),
                row.metrics.recall.to_string(),
                row.metrics.fnr.to_string(),
                row.metrics.fpr.to_string()
            );
            let _ = writeln!(machine, "{}", row.csv_row());
        }
        if let Some(out) = &args.out {
            write_atomic(out, &machine).map_err(runtime)?;
        }
        return Ok(());
    }

    let (predictions_path, labels_path) = match (&args.predictions, &args.labels) {
        (Some(p), Some(l)) => (p, l),
        _ => return Err(usage(anyhow!("provide --predictions and --labels, or --ablation"))),
    };
    let predictions = read_label_file(predictions_path).map_err(usage)?;
    let labels = read_label_file(labels_path).map_err(usage)?;
    let cm = compute_confusion(&predictions, &labels).map_err(usage)?;
    let metrics = compute_metrics(&cm).map_err(usage)?;
    println!(
        "acc={} recall={} fnr={} fpr={}",
        metrics.accuracy, metrics.recall, metrics.fnr, metrics.fpr
    );
    if let Some(out) = &args.out {
        write_atomic(
            out,
            &format!("accuracy,recall,fnr,fpr\n{}\n", metrics.csv_row()),
        )
        .map_err(runtime)?;
    }
    Ok(())
}

// ============================================================================
// semanticize
// ============================================================================

fn cmd_semanticize(args: SemanticizeArgs) -> CliResult {
    let dataset = load_dataset(&args.dataset).map_err(usage)?;
    let embedder = HashEmbedder::default();
    let kg = load_kg(&args.kg, &embedder).map_err(usage)?;
    let (provider, temperature) = make_provider(&args.provider).map_err(usage)?;
    let window = match &args.window {
        Some(w) => Some(parse_window(w).map_err(usage)?),
        None => None,
    };
    let variant = parse_variant(&args.variant).map_err(usage)?;

    let (_, table_text) = render_table(&dataset, window).map_err(usage)?;
    let context_phrase = netsemantic_core::diagnose::pipeline::device_context(&dataset);
    let snippets: Vec<String> = if variant == PromptVariant::SelfHeuristic {
        let query = format!("{context_phrase} metrics thresholds");
        netsemantic_core::nkg::retrieve(&kg, &embedder, &query, 5, 2)
            .map_err(usage)?
            .subgraph
            .render_snippets()
    } else {
        Vec::new()
    };
    let prompt =
        build_semantic_prompt(variant, &table_text, &snippets, &context_phrase).map_err(usage)?;
    let samples = sample_semantics(
        &prompt,
        provider.as_ref(),
        args.samples,
        args.provider.seed,
        temperature,
    )
    .map_err(|e| match e {
        netsemantic_core::semgen::SemGenError::Provider { .. } => runtime(e),
        other => usage(other),
    })?;
    let (selected, best) = select_best(&samples, &embedder).map_err(usage)?;
    let best_text = best.text.clone();

    write_atomic(&args.out.join("table.txt"), &table_text).map_err(runtime)?;
    write_atomic(&args.out.join("prompt.txt"), &prompt.render()).map_err(runtime)?;
    for s in &samples {
        write_atomic(
            &args.out.join(format!("sample_{}.txt", s.sample_index)),
            &s.text,
        )
        .map_err(runtime)?;
    }
    write_atomic(&args.out.join("selected.txt"), &best_text).map_err(runtime)?;

    // Selector scores (only defined for n >= 2).
    let mut scores = String::from("sample_index,mean_centrality\n");
    if samples.len() >= 2 {
        let vectors: Vec<_> = samples
            .iter()
            .map(|s| embedder.embed(&s.text))
            .collect::<std::result::Result<_, _>>()
            .map_err(runtime)?;
        let matrix = similarity_matrix(&vectors).map_err(runtime)?;
        let mu = mean_centrality(&matrix).map_err(runtime)?;
        for (i, m) in mu.0.iter().enumerate() {
            let _ = writeln!(scores, "{i},{m:.4}");
        }
    }
    write_atomic(&args.out.join("scores.csv"), &scores).map_err(runtime)?;

    println!(
        "selected sample {selected} -> {}",
        args.out.join("selected.txt").display()
    );
    Ok(())
}

// ============================================================================
// symbolize
// ============================================================================

fn cmd_symbolize(args: SymbolizeArgs) -> CliResult {
    let dataset = load_dataset(&args.dataset).map_err(usage)?;
    let embedder = HashEmbedder::default();
    let kg = load_kg(&args.kg, &embedder).map_err(usage)?;
    let window = match &args.window {
        Some(w) => parse_window(w).map_err(usage)?,
        None => dataset
            .span()
            .ok_or_else(|| usage(anyhow!("dataset has no samples")))?,
    };
    let aggregation = parse_aggregation(&args.aggregation).map_err(usage)?;

    let (ports, link_facts) = observe_connectivity(&dataset, window);
    let base = extract_facts(&dataset.topology, &dataset.profiles, &ports).map_err(usage)?;
    let facts = FactSet::from_atoms(base.atoms().iter().cloned().chain(link_facts));

    let mut rules: Vec<Rule> = Vec::new();
    let mut warnings = Vec::new();
    let mut classes = BTreeSet::new();
    for profile in dataset.profiles.values() {
        if classes.insert(profile.device_class) {
            let derivation = derive_rules(profile, &kg);
            warnings.extend(derivation.warnings);
            rules.extend(derivation.rules);
        }
    }
    rules.sort_by(|a, b| a.rule_id.cmp(&b.rule_id));
    rules.dedup_by(|a, b| a.rule_id == b.rule_id);

    let mut vectors = Vec::new();
    for series in dataset.series.values() {
        if series.rows_in(Some(window)).next().is_some() {
            vectors.push(kpi_vector(series, window, aggregation).map_err(usage)?);
        }
    }
    let findings = evaluate_rules(&rules, &facts, &vectors).map_err(usage)?;
    let entities = anomalous_entities(&findings);

    // Demonstration prompt showing the expected first-order output format.
    let demo = Demonstration {
        input: "device a is connected to device b. the radio port of device c is down.".into(),
        output: "connected(a,b)\nport_down(c,radio0)".into(),
    };
    let topology_prose: String = dataset
        .topology
        .edges
        .iter()
        .map(|(a, b)| format!("device {a} is connected to device {b}."))
        .collect::<Vec<_>>()
        .join(" ");
    let symbolic_prompt = build_symbolic_prompt(&[demo], &topology_prose).map_err(usage)?;

    let mut rules_text = String::new();
    for r in &rules {
        rules_text.push_str(&r.render());
        rules_text.push('\n');
    }
    for w in &warnings {
        rules_text.push_str(&format!("# warning: {w}\n"));
    }

    write_atomic(&args.out.join("facts.txt"), &facts.render()).map_err(runtime)?;
    write_atomic(&args.out.join("rules.txt"), &rules_text).map_err(runtime)?;
    write_atomic(&args.out.join("findings.json"), &to_json(&findings).map_err(runtime)?)
        .map_err(runtime)?;
    write_atomic(&args.out.join("symbolic_prompt.txt"), &symbolic_prompt.render())
        .map_err(runtime)?;

    println!(
        "facts: {} | rules: {} | findings: {} | anomalous entities: {}",
        facts.len(),
        rules.len(),
        findings.len(),
        entities.ids().join(", ")
    );
    Ok(())
}
