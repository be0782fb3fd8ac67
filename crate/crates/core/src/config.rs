//! Run configuration: one flat key-value file with section prefixes
//! (`retrieval.k_anchor = 4`) capturing every parameter of a run. CLI flags
//! override config values; config values override defaults. Unknown keys
//! are rejected, and all validation failures are reported at once.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backend::{GenerationBackend, RemoteConfig};
use crate::community::LeidenParams;
use crate::embed::DEFAULT_EMBEDDING_DIM;
use crate::error::{Error, Result};
use crate::eval::{EvalConfig, PredictorKind};
use crate::extract::{EntityType, ExtractionMode};
use crate::generation::DEFAULT_EXACT_MATCH_EPS;
use crate::geom::{Aabb, Point3};
use crate::ingest::{SyntheticCkmConfig, DEFAULT_DEDUP_TOL};
use crate::retrieval::DEFAULT_TOKEN_BUDGET;
use crate::seeding::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractBackendKind {
    Rule,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Mock,
    Remote,
}

/// Every knob of a run. Field comments carry the config-file key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// paths.input_ckm
    pub input_ckm: Option<PathBuf>,
    /// paths.workdir
    pub workdir: PathBuf,
    /// seed
    pub seed: u64,
    /// threads (0 = all cores)
    pub threads: usize,
    /// chunk.size
    pub chunk_size: usize,
    /// extract.mode
    pub extract_mode: ExtractBackendKind,
    /// extract.entity_types
    pub entity_types: Vec<EntityType>,
    /// extract.reified
    pub reified: bool,
    /// embed.dim
    pub embed_dim: usize,
    /// leiden.resolution
    pub leiden_resolution: f64,
    /// leiden.max_community_size
    pub leiden_max_community_size: usize,
    /// leiden.max_sweeps
    pub leiden_max_sweeps: usize,
    /// retrieval.k_anchor
    pub k_anchor: usize,
    /// retrieval.hops
    pub hops: usize,
    /// retrieval.m
    pub m: usize,
    /// retrieval.top_k
    pub top_k: usize,
    /// retrieval.r
    pub report_count: usize,
    /// retrieval.budget
    pub budget: usize,
    /// backend.kind
    pub backend_kind: BackendKind,
    /// backend.base_url
    pub base_url: String,
    /// backend.model
    pub model: String,
    /// backend.timeout_s
    pub timeout_s: u64,
    /// backend.max_retries
    pub max_retries: u32,
    /// generation.eps
    pub eps: f64,
    /// eval.power_levels_dbm
    pub power_levels_dbm: Vec<f64>,
    /// eval.noise_dbm
    pub noise_dbm: f64,
    /// eval.train_fraction
    pub train_fraction: f64,
    /// synth.n_pairs
    pub synth_pairs: usize,
    /// synth.area (x0,y0,z0,x1,y1,z1)
    pub synth_area: Aabb,
    /// synth.pl_intercept_db
    pub pl_intercept_db: f64,
    /// synth.pl_exponent
    pub pl_exponent: f64,
    /// synth.shadowing_sigma_db
    pub shadowing_sigma_db: f64,
    /// synth.shadowing_correlation_m
    pub shadowing_correlation_m: f64,
    /// synth.station_reuse_prob
    pub station_reuse_prob: f64,
    /// ingest.dedup_tol
    pub dedup_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input_ckm: None,
            workdir: PathBuf::from("ckmrag-out"),
            seed: 42,
            threads: 0,
            chunk_size: 1000,
            extract_mode: ExtractBackendKind::Rule,
            entity_types: EntityType::ALL.to_vec(),
            reified: false,
            embed_dim: DEFAULT_EMBEDDING_DIM,
            leiden_resolution: 1.0,
            leiden_max_community_size: 50,
            leiden_max_sweeps: 10,
            k_anchor: 4,
            hops: 1,
            m: 8,
            top_k: 4,
            report_count: 5,
            budget: DEFAULT_TOKEN_BUDGET,
            backend_kind: BackendKind::Mock,
            base_url: String::new(),
            model: "gpt-3.5-turbo".to_string(),
            timeout_s: 30,
            max_retries: 3,
            eps: DEFAULT_EXACT_MATCH_EPS,
            power_levels_dbm: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            noise_dbm: -90.0,
            train_fraction: 0.8,
            synth_pairs: 500,
            synth_area: Aabb::new(Point3::new(0.0, 0.0, 1.5), Point3::new(200.0, 200.0, 30.0)),
            pl_intercept_db: -40.0,
            pl_exponent: 3.0,
            shadowing_sigma_db: 6.0,
            shadowing_correlation_m: 30.0,
            station_reuse_prob: 0.5,
            dedup_tol: DEFAULT_DEDUP_TOL,
        }
    }
}

/// All accepted config-file keys, each with the CLI flag that overrides it.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("paths.input_ckm", "--input-ckm"),
    ("paths.workdir", "--workdir"),
    ("seed", "--seed"),
    ("threads", "--threads"),
    ("chunk.size", "--chunk-size"),
    ("extract.mode", "--extract-mode"),
    ("extract.entity_types", "--entity-types"),
    ("extract.reified", "--reified"),
    ("embed.dim", "--embed-dim"),
    ("leiden.resolution", "--leiden-resolution"),
    ("leiden.max_community_size", "--leiden-max-community-size"),
    ("leiden.max_sweeps", "--leiden-max-sweeps"),
    ("retrieval.k_anchor", "--k-anchor"),
    ("retrieval.hops", "--hops"),
    ("retrieval.m", "--m"),
    ("retrieval.top_k", "--top-k"),
    ("retrieval.r", "--report-count"),
    ("retrieval.budget", "--budget"),
    ("backend.kind", "--backend"),
    ("backend.base_url", "--base-url"),
    ("backend.model", "--model"),
    ("backend.timeout_s", "--timeout-s"),
    ("backend.max_retries", "--max-retries"),
    ("generation.eps", "--eps"),
    ("eval.power_levels_dbm", "--power-levels"),
    ("eval.noise_dbm", "--noise-dbm"),
    ("eval.train_fraction", "--train-fraction"),
    ("synth.n_pairs", "--synth-pairs"),
    ("synth.area", "--synth-area"),
    ("synth.pl_intercept_db", "--pl-intercept"),
    ("synth.pl_exponent", "--pl-exponent"),
    ("synth.shadowing_sigma_db", "--shadowing-sigma"),
    ("synth.shadowing_correlation_m", "--shadowing-correlation"),
    ("synth.station_reuse_prob", "--station-reuse-prob"),
    ("ingest.dedup_tol", "--dedup-tol"),
];

fn parse_scalar<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .trim()
        .parse()
        .map_err(|_| format!("{key}: cannot parse {value:?}"))
}

fn parse_float_list(key: &str, value: &str) -> std::result::Result<Vec<f64>, String> {
    let items: std::result::Result<Vec<f64>, String> = value
        .split(',')
        .map(|v| parse_scalar::<f64>(key, v))
        .collect();
    items
}

pub fn parse_area(key: &str, value: &str) -> std::result::Result<Aabb, String> {
    let values = parse_float_list(key, value)?;
    if values.len() != 6 {
        return Err(format!("{key}: expected 6 comma-separated numbers (x0,y0,z0,x1,y1,z1)"));
    }
    Ok(Aabb::new(
        Point3::new(values[0], values[1], values[2]),
        Point3::new(values[3], values[4], values[5]),
    ))
}

pub fn parse_entity_types(key: &str, value: &str) -> std::result::Result<Vec<EntityType>, String> {
    value
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<EntityType>()
                .map_err(|e| format!("{key}: {e}"))
        })
        .collect()
}

impl RunConfig {
    /// Apply one config-file key. Unknown keys and unparseable values are
    /// reported as strings so the caller can collect every problem at once.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "paths.input_ckm" => self.input_ckm = Some(PathBuf::from(value.trim())),
            "paths.workdir" => self.workdir = PathBuf::from(value.trim()),
            "seed" => self.seed = parse_scalar(key, value)?,
            "threads" => self.threads = parse_scalar(key, value)?,
            "chunk.size" => self.chunk_size = parse_scalar(key, value)?,
            "extract.mode" => {
                self.extract_mode = match value.trim() {
                    "rule" => ExtractBackendKind::Rule,
                    "llm" => ExtractBackendKind::Llm,
                    other => return Err(format!("{key}: expected rule|llm, found {other:?}")),
                }
            }
            "extract.entity_types" => self.entity_types = parse_entity_types(key, value)?,
            "extract.reified" => self.reified = parse_scalar(key, value)?,
            "embed.dim" => self.embed_dim = parse_scalar(key, value)?,
            "leiden.resolution" => self.leiden_resolution = parse_scalar(key, value)?,
            "leiden.max_community_size" => {
                self.leiden_max_community_size = parse_scalar(key, value)?
            }
            "leiden.max_sweeps" => self.leiden_max_sweeps = parse_scalar(key, value)?,
            "retrieval.k_anchor" => self.k_anchor = parse_scalar(key, value)?,
            "retrieval.hops" => self.hops = parse_scalar(key, value)?,
            "retrieval.m" => self.m = parse_scalar(key, value)?,
            "retrieval.top_k" => self.top_k = parse_scalar(key, value)?,
            "retrieval.r" => self.report_count = parse_scalar(key, value)?,
            "retrieval.budget" => self.budget = parse_scalar(key, value)?,
            "backend.kind" => {
                self.backend_kind = match value.trim() {
                    "mock" => BackendKind::Mock,
                    "remote" => BackendKind::Remote,
                    other => return Err(format!("{key}: expected mock|remote, found {other:?}")),
                }
            }
            "backend.base_url" => self.base_url = value.trim().to_string(),
            "backend.model" => self.model = value.trim().to_string(),
            "backend.timeout_s" => self.timeout_s = parse_scalar(key, value)?,
            "backend.max_retries" => self.max_retries = parse_scalar(key, value)?,
            "generation.eps" => self.eps = parse_scalar(key, value)?,
            "eval.power_levels_dbm" => self.power_levels_dbm = parse_float_list(key, value)?,
            "eval.noise_dbm" => self.noise_dbm = parse_scalar(key, value)?,
            "eval.train_fraction" => self.train_fraction = parse_scalar(key, value)?,
            "synth.n_pairs" => self.synth_pairs = parse_scalar(key, value)?,
            "synth.area" => self.synth_area = parse_area(key, value)?,
            "synth.pl_intercept_db" => self.pl_intercept_db = parse_scalar(key, value)?,
            "synth.pl_exponent" => self.pl_exponent = parse_scalar(key, value)?,
            "synth.shadowing_sigma_db" => self.shadowing_sigma_db = parse_scalar(key, value)?,
            "synth.shadowing_correlation_m" => {
                self.shadowing_correlation_m = parse_scalar(key, value)?
            }
            "synth.station_reuse_prob" => self.station_reuse_prob = parse_scalar(key, value)?,
            "ingest.dedup_tol" => self.dedup_tol = parse_scalar(key, value)?,
            unknown => return Err(format!("unknown config key {unknown:?}")),
        }
        Ok(())
    }

    /// Load a config file over the current values, collecting every
    /// offending line into one error.
    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut issues = Vec::new();
        for (line_no, line) in raw.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                issues.push(format!("line {}: expected `key = value`", line_no + 1));
                continue;
            };
            if let Err(issue) = self.apply_kv(key.trim(), value.trim()) {
                issues.push(format!("line {}: {}", line_no + 1, issue));
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::config(issues))
        }
    }

    /// Check every module precondition the config feeds, reporting all
    /// violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        if self.chunk_size < 1 {
            issues.push("chunk.size must be >= 1".to_string());
        }
        if self.embed_dim < 1 {
            issues.push("embed.dim must be >= 1".to_string());
        }
        if !(self.leiden_resolution > 0.0 && self.leiden_resolution.is_finite()) {
            issues.push("leiden.resolution must be positive".to_string());
        }
        if self.leiden_max_community_size < 1 {
            issues.push("leiden.max_community_size must be >= 1".to_string());
        }
        if self.leiden_max_sweeps < 1 {
            issues.push("leiden.max_sweeps must be >= 1".to_string());
        }
        if self.k_anchor < 1 {
            issues.push("retrieval.k_anchor must be >= 1".to_string());
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            issues.push("generation.eps must be positive".to_string());
        }
        if self.power_levels_dbm.is_empty() {
            issues.push("eval.power_levels_dbm must be nonempty".to_string());
        }
        if self.power_levels_dbm.iter().any(|p| !p.is_finite()) {
            issues.push("eval.power_levels_dbm must be finite".to_string());
        }
        if !self.noise_dbm.is_finite() {
            issues.push("eval.noise_dbm must be finite".to_string());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            issues.push("eval.train_fraction must be in (0, 1)".to_string());
        }
        if self.dedup_tol.is_nan() || self.dedup_tol < 0.0 {
            issues.push("ingest.dedup_tol must be >= 0".to_string());
        }
        if self.timeout_s < 1 {
            issues.push("backend.timeout_s must be >= 1".to_string());
        }
        if self.entity_types.is_empty() {
            issues.push("extract.entity_types must be nonempty".to_string());
        }
        if !self.entity_types.contains(&EntityType::Transmitter)
            || !self.entity_types.contains(&EntityType::Receiver)
        {
            issues.push(
                "extract.entity_types must include transmitter and receiver".to_string(),
            );
        }
        if self.reified && !self.entity_types.contains(&EntityType::ChannelGain) {
            issues.push(
                "extract.reified requires \"channel gain\" in extract.entity_types".to_string(),
            );
        }
        if self.backend_kind == BackendKind::Remote && self.base_url.is_empty() {
            issues.push("backend.kind = remote requires backend.base_url".to_string());
        }
        if self.extract_mode == ExtractBackendKind::Llm && self.backend_kind != BackendKind::Remote
        {
            issues.push("extract.mode = llm requires backend.kind = remote".to_string());
        }
        for issue in self.synth_config().validate() {
            issues.push(issue);
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::config(issues))
        }
    }

    pub fn synth_config(&self) -> SyntheticCkmConfig {
        SyntheticCkmConfig {
            n_pairs: self.synth_pairs,
            area: self.synth_area,
            pl_intercept_db: self.pl_intercept_db,
            pl_exponent: self.pl_exponent,
            shadowing_sigma_db: self.shadowing_sigma_db,
            shadowing_correlation_m: self.shadowing_correlation_m,
            station_reuse_prob: self.station_reuse_prob,
            seed: derive_seed(self.seed, "synth"),
        }
    }

    pub fn leiden_params(&self) -> LeidenParams {
        LeidenParams {
            resolution: self.leiden_resolution,
            max_community_size: self.leiden_max_community_size,
            max_sweeps: self.leiden_max_sweeps,
            seed: derive_seed(self.seed, "communities"),
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            power_levels_dbm: self.power_levels_dbm.clone(),
            noise_dbm: self.noise_dbm,
            train_fraction: self.train_fraction,
            split_seed: derive_seed(self.seed, "split"),
            predictors: PredictorKind::ALL.to_vec(),
            k_anchor: self.k_anchor,
            hops: self.hops,
            m: self.m,
            top_k: self.top_k,
            budget: self.budget,
            eps: self.eps,
        }
    }

    pub fn generation_backend(&self) -> GenerationBackend {
        match self.backend_kind {
            BackendKind::Mock => GenerationBackend::Mock,
            BackendKind::Remote => GenerationBackend::Remote(RemoteConfig {
                base_url: self.base_url.clone(),
                model: self.model.clone(),
                timeout_s: self.timeout_s,
                max_retries: self.max_retries,
            }),
        }
    }

    pub fn extraction_mode(&self) -> ExtractionMode {
        if self.reified {
            ExtractionMode::Reified
        } else {
            ExtractionMode::Attribute
        }
    }
}
