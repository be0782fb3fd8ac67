//! Channel-knowledge GraphRAG engine.
//!
//! Builds a knowledge graph from device-to-device channel knowledge map
//! (CKM) data (transmitter/receiver locations with channel gains) and
//! answers gain queries against it. The pipeline:
//!
//! 1. [`ingest`]: parse or synthesize CKM records, deduplicate station
//!    locations into labeled identities, render the knowledge document.
//! 2. [`chunk`] + [`extract`]: split the document into token chunks and
//!    extract typed entities and relationships (deterministic grammar-based
//!    extractor by default, remote LLM extractor optional), merged into one
//!    graph delta.
//! 3. [`graph`]: build the immutable knowledge graph with hashed
//!    bag-of-words embeddings, hierarchical Leiden communities
//!    ([`community`]), and per-community reports.
//! 4. [`retrieval`]: entity-anchored local search, report-based global
//!    search, and the flat-chunk vanilla-RAG baseline.
//! 5. [`generation`]: deterministic mock predictor (inverse-distance
//!    weighting with an exact-match rule) or a remote chat-completion
//!    backend ([`backend`]).
//! 6. [`eval`]: path-loss baseline fit, Shannon sum rates, and the
//!    three-way predictor comparison over a seeded train/test split.
//!
//! Batch stages (per-chunk extraction, chunk embedding, per-pair
//! evaluation) run on rayon when the `parallel` feature (default) is
//! enabled and fall back to sequential iteration without it; results are
//! byte-identical either way.

pub mod backend;
pub mod chunk;
pub mod community;
pub mod config;
pub mod docline;
pub mod embed;
pub mod error;
pub mod eval;
pub mod extract;
pub mod generation;
pub mod geom;
pub mod graph;
pub mod ingest;
pub mod par;
pub mod retrieval;
pub mod seeding;

pub use backend::{ChatClient, GenerationBackend, RemoteConfig, AUTH_TOKEN_ENV};
pub use chunk::{chunk_document, count_tokens, Chunk};
pub use community::{hierarchical_leiden, leiden_flat, modularity, LeidenParams};
pub use config::{BackendKind, ExtractBackendKind, RunConfig, CONFIG_KEYS};
pub use embed::{cosine_similarity, embed_text, Embedding, DEFAULT_EMBEDDING_DIM};
pub use error::{Error, ErrorCategory, Result};
pub use eval::{
    emit_plot_data, evaluate, fit_path_loss, predict_pl, split_pairs, sum_rate, EvalConfig,
    EvalReport, PathLossModel, PredictorKind,
};
pub use extract::{
    extract_all_rule_based, extract_llm, extract_rule_based, merge_extractions, EntityType,
    ExtractionMode, GraphDelta,
};
pub use generation::{
    build_prompt, generate_remote, generate_with_client, mock_predict_gain, parse_gain_response,
    predict, GainAnswer, DEFAULT_EXACT_MATCH_EPS,
};
pub use geom::{Aabb, Point3};
pub use par::configure_threads;
pub use graph::{
    Community, CommunityReport, GraphStats, KnowledgeGraph, StationInfo, GRAPH_FORMAT_VERSION,
};
pub use ingest::{
    generate_synthetic_ckm, label_stations, parse_ckm, path_loss_db, render_document, write_ckm,
    LabeledPair, RawCkmRecord, StationRegistry, StationRole, SyntheticCkmConfig,
    DEFAULT_DEDUP_TOL,
};
pub use retrieval::{
    flat_retrieve, global_search, local_search, GainQuery, GainTriple, RetrievalContext,
    RetrievalMode, DEFAULT_TOKEN_BUDGET,
};
