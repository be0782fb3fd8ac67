//! Evaluation harness: fit the log-distance path-loss baseline, compute
//! noise-limited Shannon sum rates, and compare graph retrieval, flat
//! retrieval, and the fitted model over a seeded train/test split and a
//! sweep of transmit powers.
//!
//! Predictions are computed in a separate phase that only sees test-pair
//! positions; an instrumentation counter proves that no test-split ground
//! truth gain is read until the error phase.

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generation::mock_predict_gain;
use crate::graph::KnowledgeGraph;
use crate::ingest::LabeledPair;
use crate::par;
use crate::retrieval::{flat_retrieve, local_search, GainQuery};

/// Fitted log-distance model: `gain = intercept_db - 10 * exponent * log10(d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub intercept_db: f64,
    pub exponent: f64,
}

/// Ordinary least squares of gain against `-10 * log10(distance)`.
pub fn fit_path_loss(pairs: &[LabeledPair]) -> Result<PathLossModel> {
    if pairs.len() < 2 {
        return Err(Error::Degenerate(
            "path-loss fit needs at least 2 pairs".to_string(),
        ));
    }
    let mut regressors = Vec::with_capacity(pairs.len());
    for p in pairs {
        let d = p.distance();
        if d <= 0.0 {
            return Err(Error::Degenerate(
                "path-loss fit encountered a zero tx-rx distance".to_string(),
            ));
        }
        regressors.push((-10.0 * d.log10(), p.gain_db));
    }
    let n = regressors.len() as f64;
    let mean_u = regressors.iter().map(|(u, _)| u).sum::<f64>() / n;
    let mean_g = regressors.iter().map(|(_, g)| g).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (u, g) in &regressors {
        cov += (u - mean_u) * (g - mean_g);
        var += (u - mean_u) * (u - mean_u);
    }
    if var < 1e-12 {
        return Err(Error::Degenerate(
            "all pair distances are equal; the fit is singular".to_string(),
        ));
    }
    let exponent = cov / var;
    Ok(PathLossModel {
        intercept_db: mean_g - exponent * mean_u,
        exponent,
    })
}

/// Closed-form model evaluation at the query's tx-rx distance.
pub fn predict_pl(model: &PathLossModel, query: &GainQuery) -> Result<f64> {
    let d = query.tx_pos.distance(&query.rx_pos);
    if d <= 0.0 {
        return Err(Error::Degenerate(
            "path-loss prediction at zero distance".to_string(),
        ));
    }
    Ok(model.intercept_db - 10.0 * model.exponent * d.log10())
}

/// Noise-limited Shannon rate summed over pairs, in bits/s/Hz:
/// `sum_i log2(1 + 10^((p_dbm + g_i - noise_dbm) / 10))`.
pub fn sum_rate(gains_db: &[f64], p_dbm: f64, noise_dbm: f64) -> f64 {
    gains_db
        .iter()
        .map(|g| (1.0 + 10f64.powf((p_dbm + g - noise_dbm) / 10.0)).log2())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    GraphragLocal,
    VanillaFlat,
    PlModel,
}

impl PredictorKind {
    pub const ALL: [PredictorKind; 3] = [
        PredictorKind::GraphragLocal,
        PredictorKind::VanillaFlat,
        PredictorKind::PlModel,
    ];
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PredictorKind::GraphragLocal => "graphrag-local",
            PredictorKind::VanillaFlat => "vanilla-flat",
            PredictorKind::PlModel => "pl-model",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub power_levels_dbm: Vec<f64>,
    pub noise_dbm: f64,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub predictors: Vec<PredictorKind>,
    pub k_anchor: usize,
    pub hops: usize,
    pub m: usize,
    pub top_k: usize,
    pub budget: usize,
    pub eps: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            power_levels_dbm: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            noise_dbm: -90.0,
            train_fraction: 0.8,
            split_seed: 0,
            predictors: PredictorKind::ALL.to_vec(),
            k_anchor: 4,
            hops: 1,
            m: 8,
            top_k: 4,
            budget: crate::retrieval::DEFAULT_TOKEN_BUDGET,
            eps: crate::generation::DEFAULT_EXACT_MATCH_EPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumRatePoint {
    pub power_dbm: f64,
    pub sum_rate_bps_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorReport {
    pub predictor: PredictorKind,
    /// RMSE/MAE over evaluated pairs; absent when every pair failed.
    pub rmse_db: Option<f64>,
    pub mae_db: Option<f64>,
    pub evaluated: usize,
    pub failures: usize,
    pub sum_rate_curve: Vec<SumRatePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pair_count: usize,
    pub train_count: usize,
    pub test_count: usize,
    pub test_gain_reads_during_prediction: usize,
    pub predictors: Vec<PredictorReport>,
    pub config: EvalConfig,
}

/// Seeded uniform split preserving the original pair order inside each side.
pub fn split_pairs(
    pairs: &[LabeledPair],
    train_fraction: f64,
    seed: u64,
) -> (Vec<LabeledPair>, Vec<LabeledPair>) {
    let mut indices: Vec<usize> = (0..pairs.len()).collect();
    indices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut n_train = (pairs.len() as f64 * train_fraction).floor() as usize;
    if pairs.len() >= 2 {
        n_train = n_train.clamp(1, pairs.len() - 1);
    }
    let mut train_idx: Vec<usize> = indices[..n_train].to_vec();
    let mut test_idx: Vec<usize> = indices[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    (
        train_idx.into_iter().map(|i| pairs[i]).collect(),
        test_idx.into_iter().map(|i| pairs[i]).collect(),
    )
}

/// Ground-truth access with a read counter, proving the prediction phase
/// never touches test gains.
struct InstrumentedGains<'a> {
    test: &'a [LabeledPair],
    reads: AtomicUsize,
}

impl<'a> InstrumentedGains<'a> {
    fn gain(&self, i: usize) -> f64 {
        self.reads.fetch_add(1, Ordering::Relaxed);
        self.test[i].gain_db
    }
}

/// Run the predictor comparison. The graph must have been built from the
/// train split of the same `pairs` under the same `split_seed` and
/// `train_fraction`; `evaluate` re-derives the split to find the test pairs.
pub fn evaluate(
    graph: &KnowledgeGraph,
    pairs: &[LabeledPair],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let mut issues = Vec::new();
    if cfg.power_levels_dbm.is_empty() {
        issues.push("eval.power_levels_dbm must be nonempty".to_string());
    }
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        issues.push("eval.train_fraction must be in (0, 1)".to_string());
    }
    if cfg.predictors.is_empty() {
        issues.push("eval.predictors must be nonempty".to_string());
    }
    if !issues.is_empty() {
        return Err(Error::config(issues));
    }

    let (train, test) = split_pairs(pairs, cfg.train_fraction, cfg.split_seed);
    if test.is_empty() {
        return Err(Error::Empty("test split is empty".to_string()));
    }

    let pl_model = if cfg.predictors.contains(&PredictorKind::PlModel) {
        Some(fit_path_loss(&train)?)
    } else {
        None
    };

    // phase 1: predictions from positions only
    let queries: Vec<GainQuery> = test
        .iter()
        .map(|p| GainQuery {
            tx_pos: p.tx_pos,
            rx_pos: p.rx_pos,
        })
        .collect();
    let truth = InstrumentedGains {
        test: &test,
        reads: AtomicUsize::new(0),
    };
    let predictions: Vec<Vec<Option<f64>>> = par::map_slice(&queries, |q| {
        cfg.predictors
            .iter()
            .map(|kind| match kind {
                PredictorKind::GraphragLocal => {
                    local_search(graph, q, cfg.k_anchor, cfg.hops, cfg.m, cfg.budget)
                        .and_then(|ctx| mock_predict_gain(&ctx, q, cfg.eps))
                        .map(|a| a.predicted_gain_db)
                        .ok()
                }
                PredictorKind::VanillaFlat => flat_retrieve(graph, q, cfg.top_k, cfg.budget)
                    .and_then(|ctx| mock_predict_gain(&ctx, q, cfg.eps))
                    .map(|a| a.predicted_gain_db)
                    .ok(),
                PredictorKind::PlModel => pl_model
                    .as_ref()
                    .and_then(|model| predict_pl(model, q).ok()),
            })
            .collect()
    });
    let test_gain_reads_during_prediction = truth.reads.load(Ordering::Relaxed);

    // phase 2: errors against ground truth and sum-rate curves
    let mut reports = Vec::with_capacity(cfg.predictors.len());
    for (pi, &kind) in cfg.predictors.iter().enumerate() {
        let mut sq_sum = 0.0;
        let mut abs_sum = 0.0;
        let mut evaluated = 0usize;
        let mut failures = 0usize;
        let mut predicted_gains = Vec::with_capacity(test.len());
        for (ti, row) in predictions.iter().enumerate() {
            match row[pi] {
                Some(pred) => {
                    let err = pred - truth.gain(ti);
                    sq_sum += err * err;
                    abs_sum += err.abs();
                    evaluated += 1;
                    predicted_gains.push(pred);
                }
                None => failures += 1,
            }
        }
        let (rmse_db, mae_db) = if evaluated > 0 {
            let n = evaluated as f64;
            (Some((sq_sum / n).sqrt()), Some(abs_sum / n))
        } else {
            (None, None)
        };
        let sum_rate_curve = cfg
            .power_levels_dbm
            .iter()
            .map(|&p| SumRatePoint {
                power_dbm: p,
                sum_rate_bps_hz: sum_rate(&predicted_gains, p, cfg.noise_dbm),
            })
            .collect();
        reports.push(PredictorReport {
            predictor: kind,
            rmse_db,
            mae_db,
            evaluated,
            failures,
            sum_rate_curve,
        });
    }

    Ok(EvalReport {
        pair_count: pairs.len(),
        train_count: train.len(),
        test_count: test.len(),
        test_gain_reads_during_prediction,
        predictors: reports,
        config: cfg.clone(),
    })
}

/// Write the plot-data CSV: one row per (predictor, power level).
pub fn emit_plot_data(report: &EvalReport, path: &Path) -> Result<()> {
    let mut out = String::from("predictor,power_dbm,sum_rate_bps_hz,rmse_db\n");
    for p in &report.predictors {
        let rmse = match p.rmse_db {
            Some(v) => format!("{v:.6}"),
            None => "nan".to_string(),
        };
        for point in &p.sum_rate_curve {
            out.push_str(&format!(
                "{},{},{:.6},{}\n",
                p.predictor, point.power_dbm, point.sum_rate_bps_hz, rmse
            ));
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
