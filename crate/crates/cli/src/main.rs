//! `ckmrag`: channel-knowledge GraphRAG pipeline CLI.
//!
//! Subcommands mirror the pipeline stages: `synth` writes a seeded synthetic
//! CKM, `ingest` labels stations and renders the knowledge document, `build`
//! constructs the knowledge graph, `stats`/`query`/`export` operate on a
//! graph file, and `evaluate` runs the predictor comparison.
//!
//! Parameter precedence: built-in defaults, then the `--config` file, then
//! CLI flags. Every config-file key has a matching flag on every subcommand.
//!
//! Exit codes: 0 success, 2 config error, 3 I/O or input-data error,
//! 4 backend error, 5 empty-result error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use ckmrag_core::config::ExtractBackendKind;
use ckmrag_core::error::ErrorCategory;
use ckmrag_core::extract::GraphDelta;
use ckmrag_core::{
    backend::HttpChatClient, chunk_document, docline, emit_plot_data, evaluate, extract_llm,
    flat_retrieve, generate_synthetic_ckm, global_search, label_stations, local_search,
    merge_extractions, parse_ckm, predict, render_document, split_pairs, write_ckm, Chunk, Error,
    GainQuery, KnowledgeGraph, LabeledPair, Point3, Result, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "ckmrag",
    version,
    about = "Channel-knowledge GraphRAG: build a knowledge graph from CKM data, query channel gains, and compare against flat RAG and a path-loss baseline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; each overrides one config-file key.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// Config file with `key = value` lines (e.g. `retrieval.k_anchor = 4`)
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Input CKM CSV [config: paths.input_ckm]
    #[arg(long, value_name = "FILE")]
    input_ckm: Option<PathBuf>,
    /// Working directory for outputs [config: paths.workdir]
    #[arg(long, value_name = "DIR")]
    workdir: Option<PathBuf>,
    /// Top-level seed; stage sub-seeds derive from it [config: seed]
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread cap, 0 = all cores [config: threads]
    #[arg(long)]
    threads: Option<usize>,
    /// Chunk size in whitespace tokens [config: chunk.size]
    #[arg(long)]
    chunk_size: Option<usize>,
    /// Extraction mode: rule|llm [config: extract.mode]
    #[arg(long, value_name = "MODE")]
    extract_mode: Option<String>,
    /// Comma-separated entity types [config: extract.entity_types]
    #[arg(long, value_name = "LIST")]
    entity_types: Option<String>,
    /// Emit separate channel-gain entities [config: extract.reified]
    #[arg(long, value_name = "BOOL")]
    reified: Option<bool>,
    /// Embedding dimension [config: embed.dim]
    #[arg(long)]
    embed_dim: Option<usize>,
    /// Leiden resolution [config: leiden.resolution]
    #[arg(long, allow_negative_numbers = true)]
    leiden_resolution: Option<f64>,
    /// Max community size before re-partitioning [config: leiden.max_community_size]
    #[arg(long)]
    leiden_max_community_size: Option<usize>,
    /// Max Leiden improvement sweeps [config: leiden.max_sweeps]
    #[arg(long)]
    leiden_max_sweeps: Option<usize>,
    /// Anchor stations per role in local search [config: retrieval.k_anchor]
    #[arg(long)]
    k_anchor: Option<usize>,
    /// Relationship hops from the anchors [config: retrieval.hops]
    #[arg(long)]
    hops: Option<usize>,
    /// Max gain triples returned by local search [config: retrieval.m]
    #[arg(long)]
    m: Option<usize>,
    /// Chunks returned by flat retrieval [config: retrieval.top_k]
    #[arg(long)]
    top_k: Option<usize>,
    /// Community reports returned by global search [config: retrieval.r]
    #[arg(long)]
    report_count: Option<usize>,
    /// Token budget per retrieval [config: retrieval.budget]
    #[arg(long)]
    budget: Option<usize>,
    /// Generation backend: mock|remote [config: backend.kind]
    #[arg(long, value_name = "KIND")]
    backend: Option<String>,
    /// Chat-completion base URL [config: backend.base_url]
    #[arg(long, value_name = "URL")]
    base_url: Option<String>,
    /// Remote model name [config: backend.model]
    #[arg(long, value_name = "NAME")]
    model: Option<String>,
    /// Remote request timeout in seconds [config: backend.timeout_s]
    #[arg(long)]
    timeout_s: Option<u64>,
    /// Remote retry count [config: backend.max_retries]
    #[arg(long)]
    max_retries: Option<u32>,
    /// Exact-match threshold in meters for the mock generator [config: generation.eps]
    #[arg(long, allow_negative_numbers = true)]
    eps: Option<f64>,
    /// Comma-separated transmit powers in dBm [config: eval.power_levels_dbm]
    #[arg(long, value_name = "LIST", allow_hyphen_values = true)]
    power_levels: Option<String>,
    /// Noise power in dBm [config: eval.noise_dbm]
    #[arg(long, allow_negative_numbers = true)]
    noise_dbm: Option<f64>,
    /// Train fraction in (0,1) [config: eval.train_fraction]
    #[arg(long, allow_negative_numbers = true)]
    train_fraction: Option<f64>,
    /// Synthetic CKM pair count [config: synth.n_pairs]
    #[arg(long)]
    synth_pairs: Option<usize>,
    /// Synthetic area x0,y0,z0,x1,y1,z1 in meters [config: synth.area]
    #[arg(long, value_name = "BOX", allow_hyphen_values = true)]
    synth_area: Option<String>,
    /// Path-loss intercept in dB at 1 m [config: synth.pl_intercept_db]
    #[arg(long, allow_negative_numbers = true)]
    pl_intercept: Option<f64>,
    /// Path-loss exponent [config: synth.pl_exponent]
    #[arg(long, allow_negative_numbers = true)]
    pl_exponent: Option<f64>,
    /// Shadowing standard deviation in dB [config: synth.shadowing_sigma_db]
    #[arg(long, allow_negative_numbers = true)]
    shadowing_sigma: Option<f64>,
    /// Shadowing correlation length in meters [config: synth.shadowing_correlation_m]
    #[arg(long, allow_negative_numbers = true)]
    shadowing_correlation: Option<f64>,
    /// Probability of reusing an existing station [config: synth.station_reuse_prob]
    #[arg(long, allow_negative_numbers = true)]
    station_reuse_prob: Option<f64>,
    /// Station dedup tolerance in meters [config: ingest.dedup_tol]
    #[arg(long, allow_negative_numbers = true)]
    dedup_tol: Option<f64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.load_file(path)?;
        }
        let mut issues = Vec::new();
        {
            let mut apply = |key: &str, value: Option<String>| {
                if let Some(v) = value {
                    if let Err(issue) = cfg.apply_kv(key, &v) {
                        issues.push(issue);
                    }
                }
            };
            let path_str = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
            apply("paths.input_ckm", path_str(&self.input_ckm));
            apply("paths.workdir", path_str(&self.workdir));
            apply("seed", self.seed.map(|v| v.to_string()));
            apply("threads", self.threads.map(|v| v.to_string()));
            apply("chunk.size", self.chunk_size.map(|v| v.to_string()));
            apply("extract.mode", self.extract_mode.clone());
            apply("extract.entity_types", self.entity_types.clone());
            apply("extract.reified", self.reified.map(|v| v.to_string()));
            apply("embed.dim", self.embed_dim.map(|v| v.to_string()));
            apply(
                "leiden.resolution",
                self.leiden_resolution.map(|v| v.to_string()),
            );
            apply(
                "leiden.max_community_size",
                self.leiden_max_community_size.map(|v| v.to_string()),
            );
            apply(
                "leiden.max_sweeps",
                self.leiden_max_sweeps.map(|v| v.to_string()),
            );
            apply("retrieval.k_anchor", self.k_anchor.map(|v| v.to_string()));
            apply("retrieval.hops", self.hops.map(|v| v.to_string()));
            apply("retrieval.m", self.m.map(|v| v.to_string()));
            apply("retrieval.top_k", self.top_k.map(|v| v.to_string()));
            apply("retrieval.r", self.report_count.map(|v| v.to_string()));
            apply("retrieval.budget", self.budget.map(|v| v.to_string()));
            apply("backend.kind", self.backend.clone());
            apply("backend.base_url", self.base_url.clone());
            apply("backend.model", self.model.clone());
            apply("backend.timeout_s", self.timeout_s.map(|v| v.to_string()));
            apply(
                "backend.max_retries",
                self.max_retries.map(|v| v.to_string()),
            );
            apply("generation.eps", self.eps.map(|v| v.to_string()));
            apply("eval.power_levels_dbm", self.power_levels.clone());
            apply("eval.noise_dbm", self.noise_dbm.map(|v| v.to_string()));
            apply(
                "eval.train_fraction",
                self.train_fraction.map(|v| v.to_string()),
            );
            apply("synth.n_pairs", self.synth_pairs.map(|v| v.to_string()));
            apply("synth.area", self.synth_area.clone());
            apply(
                "synth.pl_intercept_db",
                self.pl_intercept.map(|v| v.to_string()),
            );
            apply(
                "synth.pl_exponent",
                self.pl_exponent.map(|v| v.to_string()),
            );
            apply(
                "synth.shadowing_sigma_db",
                self.shadowing_sigma.map(|v| v.to_string()),
            );
            apply(
                "synth.shadowing_correlation_m",
                self.shadowing_correlation.map(|v| v.to_string()),
            );
            apply(
                "synth.station_reuse_prob",
                self.station_reuse_prob.map(|v| v.to_string()),
            );
            apply("ingest.dedup_tol", self.dedup_tol.map(|v| v.to_string()));
        }
        if !issues.is_empty() {
            return Err(Error::config(issues));
        }
        cfg.validate()?;
        ckmrag_core::configure_threads(cfg.threads);
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic CKM and write it as CSV
    Synth {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output CSV path (default: <workdir>/ckm.csv)
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Parse a CKM, label stations, and write labeled pairs + the document
    Ingest {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Build the knowledge graph: chunk, extract, merge, communities, reports
    Build {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output graph path (default: <workdir>/graph.json)
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Print statistics of a graph file as a table and JSON
    Stats {
        /// Graph JSON file
        graph: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Predict the channel gain for a transmitter/receiver coordinate pair
    Query {
        /// Graph JSON file
        graph: PathBuf,
        /// Transmitter position "x,y,z" (meters; z defaults to 0)
        #[arg(long, value_name = "POS")]
        tx: String,
        /// Receiver position "x,y,z" (meters; z defaults to 0)
        #[arg(long, value_name = "POS")]
        rx: String,
        /// Retrieval mode: local|global|flat
        #[arg(long, default_value = "local", value_name = "MODE")]
        mode: String,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train/test comparison of graphrag-local, vanilla-flat, and pl-model
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Re-export a graph file with canonical ordering
    Export {
        /// Graph JSON file to read
        graph: PathBuf,
        /// Destination path
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn parse_position(raw: &str) -> Result<Point3> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 2 && parts.len() != 3 {
        return Err(Error::config(vec![format!(
            "position {raw:?} must be x,y or x,y,z"
        )]));
    }
    let mut values = [0.0f64; 3];
    for (i, part) in parts.iter().enumerate() {
        values[i] = part.trim().parse().map_err(|_| {
            Error::config(vec![format!("position component {part:?} is not a number")])
        })?;
        if !values[i].is_finite() {
            return Err(Error::config(vec![format!(
                "position component {part:?} must be finite"
            )]));
        }
    }
    Ok(Point3::new(values[0], values[1], values[2]))
}

fn require_input(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.input_ckm.clone().ok_or_else(|| {
        Error::config(vec![
            "paths.input_ckm (or --input-ckm) is required for this command".to_string(),
        ])
    })
}

fn ensure_workdir(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.workdir).map_err(|e| Error::io(&cfg.workdir, e))
}

fn write_pairs_csv(path: &Path, pairs: &[LabeledPair]) -> Result<()> {
    let mut out = String::from("tx_label,rx_label,tx_x,tx_y,tx_z,rx_x,rx_y,rx_z,gain_db\n");
    for p in pairs {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            p.tx_label,
            p.rx_label,
            p.tx_pos.x,
            p.tx_pos.y,
            p.tx_pos.z,
            p.rx_pos.x,
            p.rx_pos.y,
            p.rx_pos.z,
            p.gain_db
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn ingest_pairs(cfg: &RunConfig) -> Result<Vec<LabeledPair>> {
    let input = require_input(cfg)?;
    let records = parse_ckm(&input)?;
    Ok(label_stations(&records, cfg.dedup_tol).2)
}

fn extract_delta(cfg: &RunConfig, chunks: &[Chunk]) -> Result<GraphDelta> {
    match cfg.extract_mode {
        ExtractBackendKind::Rule => {
            let deltas = ckmrag_core::extract_all_rule_based(
                chunks,
                &cfg.entity_types,
                cfg.extraction_mode(),
            )?;
            merge_extractions(&deltas)
        }
        ExtractBackendKind::Llm => {
            let ckmrag_core::GenerationBackend::Remote(remote) = cfg.generation_backend() else {
                return Err(Error::config(vec![
                    "extract.mode = llm requires backend.kind = remote".to_string(),
                ]));
            };
            let client = HttpChatClient::new(remote)?;
            let mut deltas = Vec::with_capacity(chunks.len());
            let mut dropped_total = 0usize;
            for chunk in chunks {
                let (delta, dropped) = extract_llm(chunk, &cfg.entity_types, &client)?;
                dropped_total += dropped;
                deltas.push(delta);
            }
            if dropped_total > 0 {
                eprintln!("warning: dropped {dropped_total} unparseable extraction record(s)");
            }
            merge_extractions(&deltas)
        }
    }
}

fn build_graph_from_pairs(cfg: &RunConfig, pairs: &[LabeledPair]) -> Result<KnowledgeGraph> {
    let document = render_document(pairs);
    let chunks = chunk_document(&document, cfg.chunk_size)?;
    let delta = extract_delta(cfg, &chunks)?;
    let mut graph = KnowledgeGraph::build(&delta, &chunks, cfg.embed_dim)?;
    graph.finalize_communities(&cfg.leiden_params());
    Ok(graph)
}

fn cmd_synth(cfg: &RunConfig, out: Option<PathBuf>) -> Result<()> {
    ensure_workdir(cfg)?;
    let records = generate_synthetic_ckm(&cfg.synth_config())?;
    let path = out.unwrap_or_else(|| cfg.workdir.join("ckm.csv"));
    write_ckm(&path, &records)?;
    println!("wrote {} records to {}", records.len(), path.display());
    Ok(())
}

fn cmd_ingest(cfg: &RunConfig) -> Result<()> {
    ensure_workdir(cfg)?;
    let pairs = ingest_pairs(cfg)?;
    let pairs_path = cfg.workdir.join("pairs.csv");
    write_pairs_csv(&pairs_path, &pairs)?;
    let document = render_document(&pairs);
    let doc_path = cfg.workdir.join("document.txt");
    fs::write(&doc_path, &document).map_err(|e| Error::io(&doc_path, e))?;
    let tx_count = pairs.iter().map(|p| p.tx_label).max().unwrap_or(0);
    let rx_count = pairs.iter().map(|p| p.rx_label).max().unwrap_or(0);
    println!(
        "labeled {} pairs ({} transmitters, {} receivers); wrote {} and {}",
        pairs.len(),
        tx_count,
        rx_count,
        pairs_path.display(),
        doc_path.display()
    );
    Ok(())
}

fn cmd_build(cfg: &RunConfig, out: Option<PathBuf>) -> Result<()> {
    ensure_workdir(cfg)?;
    let pairs = ingest_pairs(cfg)?;
    write_pairs_csv(&cfg.workdir.join("pairs.csv"), &pairs)?;
    let doc_path = cfg.workdir.join("document.txt");
    fs::write(&doc_path, render_document(&pairs)).map_err(|e| Error::io(&doc_path, e))?;

    let graph = build_graph_from_pairs(cfg, &pairs)?;
    let path = out.unwrap_or_else(|| cfg.workdir.join("graph.json"));
    graph.export(&path)?;
    let stats = graph.stats();
    println!(
        "built graph: {} entities, {} relationships, {} communities, {} chunks -> {}",
        stats.entity_count,
        stats.relationship_count,
        stats.community_count_total,
        stats.chunk_count,
        path.display()
    );
    Ok(())
}

fn cmd_stats(graph_path: &Path) -> Result<()> {
    let graph = KnowledgeGraph::import(graph_path)?;
    let stats = graph.stats();
    println!("{:<22} {}", "entities", stats.entity_count);
    println!("{:<22} {}", "relationships", stats.relationship_count);
    println!(
        "{:<22} {}",
        "communities (total)", stats.community_count_total
    );
    for (level, count) in stats.community_count_per_level.iter().enumerate() {
        println!("{:<22} {}", format!("  level {level}"), count);
    }
    println!("{:<22} {}", "chunks", stats.chunk_count);
    println!(
        "{}",
        serde_json::to_string_pretty(&stats).expect("stats serialize")
    );
    Ok(())
}

fn cmd_query(cfg: &RunConfig, graph_path: &Path, tx: &str, rx: &str, mode: &str) -> Result<()> {
    let graph = KnowledgeGraph::import(graph_path)?;
    let query = GainQuery {
        tx_pos: parse_position(tx)?,
        rx_pos: parse_position(rx)?,
    };
    let ctx = match mode {
        "local" => local_search(&graph, &query, cfg.k_anchor, cfg.hops, cfg.m, cfg.budget)?,
        "global" => {
            let query_text = docline::render_query_line(&query.tx_pos, &query.rx_pos);
            global_search(&graph, &query_text, cfg.report_count, cfg.budget)?
        }
        "flat" => flat_retrieve(&graph, &query, cfg.top_k, cfg.budget)?,
        other => {
            return Err(Error::config(vec![format!(
                "mode must be local|global|flat, found {other:?}"
            )]))
        }
    };
    let answer = predict(&ctx, &query, &cfg.generation_backend(), cfg.eps)?;
    let output = serde_json::json!({
        "query": query,
        "mode": mode,
        "context": ctx,
        "answer": answer,
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&output).expect("query output serialize")
    );
    Ok(())
}

fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    ensure_workdir(cfg)?;
    let pairs = ingest_pairs(cfg)?;
    let eval_cfg = cfg.eval_config();
    // the graph must see only the train split
    let (train, _) = split_pairs(&pairs, eval_cfg.train_fraction, eval_cfg.split_seed);
    let graph = build_graph_from_pairs(cfg, &train)?;

    let report = evaluate(&graph, &pairs, &eval_cfg)?;
    let json_path = cfg.workdir.join("eval.json");
    let mut serialized = serde_json::to_string_pretty(&report).expect("eval report serialize");
    serialized.push('\n');
    fs::write(&json_path, serialized).map_err(|e| Error::io(&json_path, e))?;
    let csv_path = cfg.workdir.join("plot.csv");
    emit_plot_data(&report, &csv_path)?;

    println!(
        "evaluated {} test pairs (train {})",
        report.test_count, report.train_count
    );
    for p in &report.predictors {
        let rmse = p
            .rmse_db
            .map(|v| format!("{v:.3}"))
            .unwrap_or_else(|| "n/a".to_string());
        let last = p.sum_rate_curve.last();
        println!(
            "{:<16} rmse {} dB, sum rate {} bits/s/Hz at {} dBm ({} failures)",
            p.predictor.to_string(),
            rmse,
            last.map(|pt| format!("{:.3}", pt.sum_rate_bps_hz))
                .unwrap_or_default(),
            last.map(|pt| pt.power_dbm.to_string()).unwrap_or_default(),
            p.failures
        );
    }
    println!("wrote {} and {}", json_path.display(), csv_path.display());
    Ok(())
}

fn cmd_export(graph_path: &Path, out: &Path) -> Result<()> {
    let graph = KnowledgeGraph::import(graph_path)?;
    graph.export(out)?;
    println!("exported canonical graph to {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { cfg, out } => cmd_synth(&cfg.resolve()?, out),
        Command::Ingest { cfg } => cmd_ingest(&cfg.resolve()?),
        Command::Build { cfg, out } => cmd_build(&cfg.resolve()?, out),
        Command::Stats { graph, cfg } => {
            cfg.resolve()?;
            cmd_stats(&graph)
        }
        Command::Query {
            graph,
            tx,
            rx,
            mode,
            cfg,
        } => cmd_query(&cfg.resolve()?, &graph, &tx, &rx, &mode),
        Command::Evaluate { cfg } => cmd_evaluate(&cfg.resolve()?),
        Command::Export { graph, out, cfg } => {
            cfg.resolve()?;
            cmd_export(&graph, &out)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(error) = run(cli) {
        let code = match error.category() {
            ErrorCategory::Config => 2,
            ErrorCategory::Io | ErrorCategory::Data => 3,
            ErrorCategory::Backend => 4,
            ErrorCategory::Empty => 5,
        };
        let line = serde_json::json!({
            "error": {
                "code": code,
                "category": format!("{:?}", error.category()).to_lowercase(),
                "message": error.to_string(),
            }
        });
        eprintln!("{line}");
        std::process::exit(code);
    }
}
