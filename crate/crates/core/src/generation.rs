//! Answer generation: a deterministic mock predictor for offline operation
//! and tests, and a remote chat-completion path with prompt templates and
//! strict response parsing. When the generator returns several candidates,
//! the highest predicted channel gain wins.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::backend::{ChatClient, GenerationBackend, HttpChatClient, RemoteConfig};
use crate::error::{Error, Result};
use crate::retrieval::{GainQuery, RetrievalContext, RetrievalMode};

/// Default exact-match threshold in meters. Distinct from the labeling
/// tolerance: queries arrive at full float precision while documents carry
/// two decimals.
pub const DEFAULT_EXACT_MATCH_EPS: f64 = 1e-3;

pub const SYSTEM_PROMPT: &str =
    "You are a wireless channel expert. Use ONLY the provided channel knowledge.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainAnswer {
    pub query: GainQuery,
    pub predicted_gain_db: f64,
    pub candidates: Vec<f64>,
    pub evidence_count: usize,
    pub raw_text: Option<String>,
}

/// Deterministic surrogate for the LLM generator. If any triple lies within
/// `eps` of the query, its stored gain is returned; otherwise the
/// inverse-distance-weighted mean with weights `1 / (distance + eps)`.
pub fn mock_predict_gain(
    ctx: &RetrievalContext,
    query: &GainQuery,
    eps: f64,
) -> Result<GainAnswer> {
    if ctx.triples.is_empty() {
        return Err(Error::Empty(
            "no gain evidence in retrieval context".to_string(),
        ));
    }
    let exact = ctx
        .triples
        .iter()
        .filter(|t| t.combined_distance < eps)
        .min_by(|a, b| a.combined_distance.total_cmp(&b.combined_distance));
    let predicted = match exact {
        Some(t) => t.gain_db,
        None => {
            let mut num = 0.0;
            let mut den = 0.0;
            for t in &ctx.triples {
                let w = 1.0 / (t.combined_distance + eps);
                num += w * t.gain_db;
                den += w;
            }
            num / den
        }
    };
    Ok(GainAnswer {
        query: *query,
        predicted_gain_db: predicted,
        candidates: vec![predicted],
        evidence_count: ctx.triples.len(),
        raw_text: None,
    })
}

/// Prompt template: evidence lines followed by the fixed instruction.
pub fn build_prompt(ctx: &RetrievalContext, query: &GainQuery) -> (String, String) {
    let mut evidence: Vec<String> = Vec::new();
    if !ctx.triples.is_empty() {
        evidence.extend(ctx.triples.iter().map(|t| t.rendered_line()));
    } else if !ctx.reports.is_empty() {
        evidence.extend(ctx.reports.iter().map(|r| r.rendered_text.clone()));
    } else {
        evidence.extend(ctx.chunks.iter().map(|c| c.text.clone()));
    }
    let user = format!(
        "{}\n\nPredict the channel gain in dB for transmitter at ({}, {}, {}) and receiver at ({}, {}, {}). Reply with one line: PREDICTED_GAIN_DB: <value>",
        evidence.join("\n"),
        query.tx_pos.x,
        query.tx_pos.y,
        query.tx_pos.z,
        query.rx_pos.x,
        query.rx_pos.y,
        query.rx_pos.z,
    );
    (SYSTEM_PROMPT.to_string(), user)
}

fn gain_marker_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"PREDICTED_GAIN_DB:\s*(-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)")
            .expect("gain marker regex is valid")
    })
}

/// Every line containing `PREDICTED_GAIN_DB: <float>` yields one candidate,
/// in textual order. Zero matches yield an empty list; the caller decides.
pub fn parse_gain_response(text: &str) -> Vec<f64> {
    let re = gain_marker_regex();
    text.lines()
        .filter_map(|line| {
            let caps = re.captures(line)?;
            caps.get(1)?.as_str().parse::<f64>().ok().filter(|g| g.is_finite())
        })
        .collect()
}

fn evidence_count(ctx: &RetrievalContext) -> usize {
    match ctx.mode {
        RetrievalMode::Local | RetrievalMode::Flat => ctx.triples.len(),
        RetrievalMode::Global => ctx.reports.len(),
    }
}

/// Generate through an injected chat client (fixture or HTTP).
pub fn generate_with_client(
    ctx: &RetrievalContext,
    query: &GainQuery,
    client: &dyn ChatClient,
) -> Result<GainAnswer> {
    let evidence = evidence_count(ctx);
    if evidence == 0 {
        return Err(Error::Empty(
            "no evidence in retrieval context".to_string(),
        ));
    }
    let (system, user) = build_prompt(ctx, query);
    let raw = client.complete(&system, &user)?;
    let candidates = parse_gain_response(&raw);
    let predicted = candidates
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if candidates.is_empty() {
        return Err(Error::Backend(format!(
            "unparseable response, no PREDICTED_GAIN_DB line: {raw:?}"
        )));
    }
    Ok(GainAnswer {
        query: *query,
        predicted_gain_db: predicted,
        candidates,
        evidence_count: evidence,
        raw_text: Some(raw),
    })
}

/// Generate against a remote chat-completion backend.
pub fn generate_remote(
    ctx: &RetrievalContext,
    query: &GainQuery,
    cfg: &RemoteConfig,
) -> Result<GainAnswer> {
    let client = HttpChatClient::new(cfg.clone())?;
    generate_with_client(ctx, query, &client)
}

/// Dispatch on the configured backend.
pub fn predict(
    ctx: &RetrievalContext,
    query: &GainQuery,
    backend: &GenerationBackend,
    eps: f64,
) -> Result<GainAnswer> {
    match backend {
        GenerationBackend::Mock => mock_predict_gain(ctx, query, eps),
        GenerationBackend::Remote(cfg) => generate_remote(ctx, query, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point3;
    use crate::retrieval::GainTriple;

    fn query() -> GainQuery {
        GainQuery {
            tx_pos: Point3::new(0.0, 0.0, 10.0),
            rx_pos: Point3::new(50.0, 0.0, 1.5),
        }
    }

    fn triple(tx: u32, rx: u32, gain: f64, distance: f64) -> GainTriple {
        GainTriple {
            tx_label: tx,
            rx_label: rx,
            tx_pos: Point3::new(0.0, 0.0, 10.0),
            rx_pos: Point3::new(50.0, 0.0, 1.5),
            gain_db: gain,
            combined_distance: distance,
        }
    }

    fn ctx_of(triples: Vec<GainTriple>) -> RetrievalContext {
        RetrievalContext {
            mode: RetrievalMode::Local,
            triples,
            reports: Vec::new(),
            chunks: Vec::new(),
            budget_used: 0,
        }
    }

    #[test]
    fn exact_match_returns_stored_gain() {
        let ctx = ctx_of(vec![triple(1, 2, -72.4, 0.0), triple(3, 4, -60.0, 10.0)]);
        let answer = mock_predict_gain(&ctx, &query(), DEFAULT_EXACT_MATCH_EPS).unwrap();
        assert_eq!(answer.predicted_gain_db, -72.4);
        assert_eq!(answer.evidence_count, 2);
    }

    #[test]
    fn equal_distances_average_symmetrically() {
        let ctx = ctx_of(vec![triple(1, 1, -60.0, 5.0), triple(2, 2, -80.0, 5.0)]);
        let answer = mock_predict_gain(&ctx, &query(), 1e-3).unwrap();
        assert!((answer.predicted_gain_db - -70.0).abs() < 1e-12);
    }

    #[test]
    fn idw_matches_reimplemented_formula() {
        let distances = [0.7, 1.3, 2.9, 4.2, 8.8, 13.1, 21.5, 40.0];
        let gains = [-55.0, -57.5, -61.2, -66.0, -70.3, -75.8, -80.1, -90.9];
        let triples: Vec<GainTriple> = distances
            .iter()
            .zip(&gains)
            .enumerate()
            .map(|(i, (&d, &g))| triple(i as u32, i as u32, g, d))
            .collect();
        let eps = 1e-3;
        let ctx = ctx_of(triples);
        let answer = mock_predict_gain(&ctx, &query(), eps).unwrap();

        // independent inverse-distance weighting
        let weights: Vec<f64> = distances.iter().map(|d| (d + eps).recip()).collect();
        let expected: f64 = weights
            .iter()
            .zip(&gains)
            .map(|(w, g)| w * g)
            .sum::<f64>()
            / weights.iter().sum::<f64>();
        assert!((answer.predicted_gain_db - expected).abs() < 1e-9);
    }

    #[test]
    fn empty_triples_is_no_evidence_error() {
        let ctx = ctx_of(vec![]);
        assert!(matches!(
            mock_predict_gain(&ctx, &query(), 1e-3),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn prediction_is_bounded_by_context_gains() {
        let ctx = ctx_of(vec![
            triple(1, 1, -62.0, 1.0),
            triple(2, 2, -75.5, 3.0),
            triple(3, 3, -58.1, 7.0),
        ]);
        let answer = mock_predict_gain(&ctx, &query(), 1e-3).unwrap();
        assert!(answer.predicted_gain_db <= -58.1 + 1e-12);
        assert!(answer.predicted_gain_db >= -75.5 - 1e-12);
    }

    #[test]
    fn prediction_is_continuous_away_from_eps() {
        // perturbing the query by delta shifts combined distances by at most
        // 2 * delta; the prediction must move by less than 0.1 dB
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let stations: Vec<(Point3, Point3, f64)> = (0..8)
            .map(|i| {
                (
                    Point3::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0), 10.0),
                    Point3::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0), 1.5),
                    -55.0 - i as f64 * 3.3,
                )
            })
            .collect();
        let ctx_for = |q: &GainQuery| {
            ctx_of(
                stations
                    .iter()
                    .enumerate()
                    .map(|(i, (tx, rx, g))| GainTriple {
                        tx_label: i as u32,
                        rx_label: i as u32,
                        tx_pos: *tx,
                        rx_pos: *rx,
                        gain_db: *g,
                        combined_distance: q.tx_pos.distance(tx) + q.rx_pos.distance(rx),
                    })
                    .collect(),
            )
        };
        for _ in 0..5 {
            let q = GainQuery {
                tx_pos: Point3::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0), 9.0),
                rx_pos: Point3::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0), 2.0),
            };
            let delta = 1e-4;
            let q2 = GainQuery {
                tx_pos: Point3::new(q.tx_pos.x + delta, q.tx_pos.y, q.tx_pos.z),
                rx_pos: q.rx_pos,
            };
            let a = mock_predict_gain(&ctx_for(&q), &q, 1e-3).unwrap();
            let b = mock_predict_gain(&ctx_for(&q2), &q2, 1e-3).unwrap();
            assert!(
                (a.predicted_gain_db - b.predicted_gain_db).abs() < 0.1,
                "prediction jumped under a {delta} m perturbation"
            );
        }
    }

    struct FixedResponse(&'static str);

    impl ChatClient for FixedResponse {
        fn complete(&self, _system: &str, _user: &str) -> Result<String> {
            Ok(self.0.to_string())
        }
    }

    #[test]
    fn fixture_single_marker() {
        let ctx = ctx_of(vec![triple(1, 2, -72.4, 0.5)]);
        let answer =
            generate_with_client(&ctx, &query(), &FixedResponse("PREDICTED_GAIN_DB: -71.25"))
                .unwrap();
        assert_eq!(answer.predicted_gain_db, -71.25);
        assert_eq!(answer.candidates, vec![-71.25]);
        assert!(answer.raw_text.is_some());
    }

    #[test]
    fn fixture_highest_candidate_wins() {
        let ctx = ctx_of(vec![triple(1, 2, -72.4, 0.5)]);
        let answer = generate_with_client(
            &ctx,
            &query(),
            &FixedResponse("PREDICTED_GAIN_DB: -71.25\nPREDICTED_GAIN_DB: -69.00"),
        )
        .unwrap();
        assert_eq!(answer.predicted_gain_db, -69.0);
        assert_eq!(answer.candidates, vec![-71.25, -69.0]);
    }

    #[test]
    fn fixture_prose_is_unparseable_error() {
        let ctx = ctx_of(vec![triple(1, 2, -72.4, 0.5)]);
        let err = generate_with_client(
            &ctx,
            &query(),
            &FixedResponse("The gain is hard to say without more information."),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Backend(_)));
    }

    #[test]
    fn parse_gain_response_basics() {
        assert_eq!(parse_gain_response("PREDICTED_GAIN_DB: -72.4"), vec![-72.4]);
        assert_eq!(
            parse_gain_response("PREDICTED_GAIN_DB: -1\nx\nPREDICTED_GAIN_DB: -2\nPREDICTED_GAIN_DB: -3"),
            vec![-1.0, -2.0, -3.0]
        );
        assert!(parse_gain_response("nothing to see").is_empty());
    }

    /// Reference matcher written independently of the regex: scan for the
    /// marker substring and parse the float that follows.
    fn reference_candidates(text: &str) -> Vec<f64> {
        let mut out = Vec::new();
        for line in text.lines() {
            if let Some(pos) = line.find("PREDICTED_GAIN_DB:") {
                let rest = &line[pos + "PREDICTED_GAIN_DB:".len()..];
                let rest = rest.trim_start();
                let end = rest
                    .char_indices()
                    .take_while(|(i, c)| {
                        c.is_ascii_digit()
                            || *c == '.'
                            || (*i == 0 && *c == '-')
                            || *c == 'e'
                            || *c == 'E'
                            || (*i > 0
                                && (*c == '+' || *c == '-')
                                && matches!(rest.as_bytes()[*i - 1], b'e' | b'E'))
                    })
                    .last()
                    .map(|(i, c)| i + c.len_utf8());
                if let Some(end) = end {
                    if let Ok(v) = rest[..end].parse::<f64>() {
                        if v.is_finite() {
                            out.push(v);
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn parser_agrees_with_reference_matcher_on_corpus() {
        let corpus = [
            "PREDICTED_GAIN_DB: -72.4",
            "PREDICTED_GAIN_DB:-60",
            "PREDICTED_GAIN_DB:  -60.125",
            "The model says PREDICTED_GAIN_DB: -71.25 with high confidence.",
            "prefix PREDICTED_GAIN_DB: 3.5 suffix",
            "PREDICTED_GAIN_DB: -1e2",
            "PREDICTED_GAIN_DB: -1.5E-2",
            "PREDICTED_GAIN_DB: 12",
            "no marker here",
            "PREDICTED_GAIN_DB:",
            "PREDICTED_GAIN_DB: abc",
            "PREDICTED_GAIN_DB: --5",
            "PREDICTED_GAIN_DB: -72.4\nPREDICTED_GAIN_DB: -69.0",
            "line one\nPREDICTED_GAIN_DB: -80.0\nline three",
            "  PREDICTED_GAIN_DB: -44.44  ",
            "PREDICTED_GAIN_DB: 0",
            "PREDICTED_GAIN_DB: -0.00",
            "a PREDICTED_GAIN_DB: -5.5 b PREDICTED_GAIN_DB: -6.6",
            "PREDICTED_GAIN_DB: 1e999",
            "PREDICTED_GAIN_DB: -  5",
        ];
        for case in corpus {
            assert_eq!(
                parse_gain_response(case),
                reference_candidates(case),
                "case {case:?}"
            );
        }
    }

    #[test]
    fn prompt_carries_evidence_and_instruction() {
        let ctx = ctx_of(vec![triple(1, 2, -72.4, 0.5)]);
        let (system, user) = build_prompt(&ctx, &query());
        assert_eq!(
            system,
            "You are a wireless channel expert. Use ONLY the provided channel knowledge."
        );
        assert!(user.contains("transmitter_1"));
        assert!(user.contains("Reply with one line: PREDICTED_GAIN_DB: <value>"));
    }
}
