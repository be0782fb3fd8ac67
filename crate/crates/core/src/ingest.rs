//! CKM ingestion: parse raw channel-knowledge records, deduplicate station
//! locations into labeled transmitter/receiver identities, render the
//! formatted knowledge document, and generate seeded synthetic CKMs for
//! desk-scale experiments.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::docline;
use crate::error::{Error, Result};
use crate::geom::{Aabb, Point3};

/// Default tolerance (meters) under which two station positions are treated
/// as the same station.
pub const DEFAULT_DEDUP_TOL: f64 = 1e-6;

/// Columns of the CKM CSV interchange format.
pub const CKM_CSV_HEADER: [&str; 7] = ["tx_x", "tx_y", "tx_z", "rx_x", "rx_y", "rx_z", "gain_db"];

/// One raw transmitter/receiver pair with its channel gain: the atomic CKM fact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawCkmRecord {
    pub tx_pos: Point3,
    pub rx_pos: Point3,
    pub gain_db: f64,
}

/// A CKM fact after station labeling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub tx_label: u32,
    pub rx_label: u32,
    pub tx_pos: Point3,
    pub rx_pos: Point3,
    pub gain_db: f64,
}

impl LabeledPair {
    pub fn distance(&self) -> f64 {
        self.tx_pos.distance(&self.rx_pos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationRole {
    Transmitter,
    Receiver,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub label: u32,
    pub position: Point3,
}

/// Ordered registry of deduplicated stations for one role. Labels are
/// contiguous `1..=N` in first-appearance order.
#[derive(Debug, Clone, PartialEq)]
pub struct StationRegistry {
    pub role: StationRole,
    entries: Vec<Station>,
}

impl StationRegistry {
    pub fn new(role: StationRole) -> Self {
        StationRegistry {
            role,
            entries: Vec::new(),
        }
    }

    /// Label for `pos`: an existing label if some canonical position lies
    /// within `tol` (lowest label wins), otherwise the next integer.
    pub fn assign(&mut self, pos: Point3, tol: f64) -> u32 {
        for station in &self.entries {
            if station.position.distance(&pos) <= tol {
                return station.label;
            }
        }
        let label = self.entries.len() as u32 + 1;
        self.entries.push(Station {
            label,
            position: pos,
        });
        label
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Station] {
        &self.entries
    }
}

/// Parse a CKM CSV file. One record per data row, order preserved.
pub fn parse_ckm(path: &Path) -> Result<Vec<RawCkmRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);

    let headers = reader
        .headers()
        .map_err(|e| Error::BadHeader(e.to_string()))?;
    let found: Vec<&str> = headers.iter().collect();
    if found != CKM_CSV_HEADER {
        return Err(Error::BadHeader(format!(
            "expected {:?}, found {:?}",
            CKM_CSV_HEADER.join(","),
            found.join(",")
        )));
    }

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| Error::MalformedRow {
            row: row_no,
            reason: e.to_string(),
        })?;
        if row.len() != CKM_CSV_HEADER.len() {
            return Err(Error::MalformedRow {
                row: row_no,
                reason: format!("expected 7 fields, found {}", row.len()),
            });
        }
        let mut values = [0.0f64; 7];
        for (j, raw) in row.iter().enumerate() {
            let value: f64 = raw.trim().parse().map_err(|_| Error::MalformedRow {
                row: row_no,
                reason: format!("field {:?} is not a number: {:?}", CKM_CSV_HEADER[j], raw),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    row: row_no,
                    column: CKM_CSV_HEADER[j].to_string(),
                });
            }
            values[j] = value;
        }
        records.push(RawCkmRecord {
            tx_pos: Point3::new(values[0], values[1], values[2]),
            rx_pos: Point3::new(values[3], values[4], values[5]),
            gain_db: values[6],
        });
    }
    Ok(records)
}

/// Write records in the CKM CSV interchange format (LF line endings,
/// shortest round-trip float formatting).
pub fn write_ckm(path: &Path, records: &[RawCkmRecord]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&CKM_CSV_HEADER.join(","));
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.tx_pos.x, r.tx_pos.y, r.tx_pos.z, r.rx_pos.x, r.rx_pos.y, r.rx_pos.z, r.gain_db
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Deduplicate station locations into labeled identities, first-appearance
/// order. A position within `tol` (Euclidean) of an existing canonical
/// position reuses that label.
pub fn label_stations(
    records: &[RawCkmRecord],
    tol: f64,
) -> (StationRegistry, StationRegistry, Vec<LabeledPair>) {
    let mut tx_registry = StationRegistry::new(StationRole::Transmitter);
    let mut rx_registry = StationRegistry::new(StationRole::Receiver);
    let mut pairs = Vec::with_capacity(records.len());
    for r in records {
        let tx_label = tx_registry.assign(r.tx_pos, tol);
        let rx_label = rx_registry.assign(r.rx_pos, tol);
        pairs.push(LabeledPair {
            tx_label,
            rx_label,
            tx_pos: r.tx_pos,
            rx_pos: r.rx_pos,
            gain_db: r.gain_db,
        });
    }
    (tx_registry, rx_registry, pairs)
}

/// Render the formatted knowledge document: one grammar line per pair, joined
/// by single newlines, no trailing newline.
pub fn render_document(pairs: &[LabeledPair]) -> String {
    let lines: Vec<String> = pairs
        .iter()
        .map(|p| docline::render_line(p.tx_label, &p.tx_pos, p.rx_label, &p.rx_pos, p.gain_db))
        .collect();
    lines.join("\n")
}

/// Configuration for seeded synthetic CKM generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCkmConfig {
    pub n_pairs: usize,
    pub area: Aabb,
    /// Path-loss intercept in dB at 1 m.
    pub pl_intercept_db: f64,
    pub pl_exponent: f64,
    pub shadowing_sigma_db: f64,
    pub shadowing_correlation_m: f64,
    /// Probability that a new pair reuses an existing station position exactly.
    pub station_reuse_prob: f64,
    pub seed: u64,
}

impl SyntheticCkmConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut issues = Vec::new();
        if self.n_pairs < 1 {
            issues.push("synth.n_pairs must be >= 1".to_string());
        }
        if !self.area.has_positive_volume() {
            issues.push("synth.area must have positive volume".to_string());
        }
        if self.shadowing_sigma_db.is_nan() || self.shadowing_sigma_db < 0.0 {
            issues.push("synth.shadowing_sigma_db must be >= 0".to_string());
        }
        if self.shadowing_correlation_m.is_nan() || self.shadowing_correlation_m <= 0.0 {
            issues.push("synth.shadowing_correlation_m must be > 0".to_string());
        }
        if !(0.0..=1.0).contains(&self.station_reuse_prob) {
            issues.push("synth.station_reuse_prob must be in [0, 1]".to_string());
        }
        if !self.pl_intercept_db.is_finite() || !self.pl_exponent.is_finite() {
            issues.push("synth path-loss parameters must be finite".to_string());
        }
        issues
    }
}

/// Closed-form log-distance path loss: `intercept - 10 * exponent * log10(d)`.
pub fn path_loss_db(intercept_db: f64, exponent: f64, distance_m: f64) -> f64 {
    intercept_db - 10.0 * exponent * distance_m.log10()
}

const SHADOWING_FEATURES: usize = 64;

/// Spatially correlated shadowing field approximated by a sum of seeded
/// random cosine features. Frequencies are drawn from a Gaussian with scale
/// `1 / correlation_m`, so the field decorrelates over roughly one
/// correlation length; the marginal standard deviation is `sigma_db`.
#[derive(Debug, Clone)]
pub struct ShadowingField {
    amplitude: f64,
    omegas: Vec<[f64; 3]>,
    phases: Vec<f64>,
}

impl ShadowingField {
    pub fn new(rng: &mut ChaCha8Rng, sigma_db: f64, correlation_m: f64) -> Self {
        let freq = Normal::new(0.0, 1.0 / correlation_m).expect("valid normal");
        let mut omegas = Vec::with_capacity(SHADOWING_FEATURES);
        let mut phases = Vec::with_capacity(SHADOWING_FEATURES);
        for _ in 0..SHADOWING_FEATURES {
            omegas.push([freq.sample(rng), freq.sample(rng), freq.sample(rng)]);
            phases.push(rng.gen_range(0.0..std::f64::consts::TAU));
        }
        ShadowingField {
            amplitude: sigma_db * (2.0 / SHADOWING_FEATURES as f64).sqrt(),
            omegas,
            phases,
        }
    }

    pub fn sample(&self, p: &Point3) -> f64 {
        let mut acc = 0.0;
        for (w, b) in self.omegas.iter().zip(&self.phases) {
            acc += (w[0] * p.x + w[1] * p.y + w[2] * p.z + b).cos();
        }
        self.amplitude * acc
    }
}

fn sample_point(rng: &mut ChaCha8Rng, area: &Aabb) -> Point3 {
    Point3::new(
        rng.gen_range(area.min.x..=area.max.x),
        rng.gen_range(area.min.y..=area.max.y),
        rng.gen_range(area.min.z..=area.max.z),
    )
}

fn draw_station(
    rng: &mut ChaCha8Rng,
    pool: &[Point3],
    area: &Aabb,
    reuse_prob: f64,
) -> (Point3, bool) {
    if !pool.is_empty() && rng.gen_bool(reuse_prob) {
        (pool[rng.gen_range(0..pool.len())], false)
    } else {
        (sample_point(rng, area), true)
    }
}

/// Generate a seeded synthetic CKM. Gain is the closed-form path loss at
/// the pair distance plus the shadowing field sampled at the pair midpoint.
/// Deterministic for a fixed config.
///
/// Records are emitted in transmitter scan order (lexicographic tx then rx
/// position), the way ray-tracing exports sweep the map, so consecutive
/// document lines cover nearby transmitters.
pub fn generate_synthetic_ckm(cfg: &SyntheticCkmConfig) -> Result<Vec<RawCkmRecord>> {
    let issues = cfg.validate();
    if !issues.is_empty() {
        return Err(Error::config(issues));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let field = ShadowingField::new(&mut rng, cfg.shadowing_sigma_db, cfg.shadowing_correlation_m);

    let mut tx_pool: Vec<Point3> = Vec::new();
    let mut rx_pool: Vec<Point3> = Vec::new();
    let mut records = Vec::with_capacity(cfg.n_pairs);

    for _ in 0..cfg.n_pairs {
        let mut attempts = 0;
        let (tx, tx_fresh, rx, rx_fresh, distance) = loop {
            let (tx, tx_fresh) = draw_station(&mut rng, &tx_pool, &cfg.area, cfg.station_reuse_prob);
            let (rx, rx_fresh) = draw_station(&mut rng, &rx_pool, &cfg.area, cfg.station_reuse_prob);
            let distance = tx.distance(&rx);
            if distance >= 1e-6 {
                break (tx, tx_fresh, rx, rx_fresh, distance);
            }
            attempts += 1;
            if attempts > 1000 {
                return Err(Error::Degenerate(
                    "could not sample a non-degenerate tx/rx pair after 1000 attempts".to_string(),
                ));
            }
        };
        if tx_fresh {
            tx_pool.push(tx);
        }
        if rx_fresh {
            rx_pool.push(rx);
        }
        let gain_db = path_loss_db(cfg.pl_intercept_db, cfg.pl_exponent, distance)
            + field.sample(&tx.midpoint(&rx));
        records.push(RawCkmRecord {
            tx_pos: tx,
            rx_pos: rx,
            gain_db,
        });
    }
    records.sort_by(|a, b| {
        (a.tx_pos.x, a.tx_pos.y, a.tx_pos.z, a.rx_pos.x, a.rx_pos.y, a.rx_pos.z).partial_cmp(&(
            b.tx_pos.x,
            b.tx_pos.y,
            b.tx_pos.z,
            b.rx_pos.x,
            b.rx_pos.y,
            b.rx_pos.z,
        ))
        .expect("finite coordinates are totally ordered")
    });
    Ok(records)
}
