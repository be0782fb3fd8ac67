//! Query answering against the graph: entity-anchored Local Search,
//! report-based Global Search, and the flat-chunk vanilla-RAG baseline.
//! All operations are read-only over the immutable graph.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::chunk::count_tokens;
use crate::docline;
pub use crate::embed::cosine_similarity;
use crate::embed::embed_text;
use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::graph::{CommunityReport, KnowledgeGraph};

/// Default token budget per retrieval; lowest-ranked items are dropped first.
pub const DEFAULT_TOKEN_BUDGET: usize = 2500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainQuery {
    pub tx_pos: Point3,
    pub rx_pos: Point3,
}

/// One unit of gain evidence: a stored pair with its combined anchor
/// distance `|tx_q - tx_i| + |rx_q - rx_j|` relative to the query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainTriple {
    pub tx_label: u32,
    pub rx_label: u32,
    pub tx_pos: Point3,
    pub rx_pos: Point3,
    pub gain_db: f64,
    pub combined_distance: f64,
}

impl GainTriple {
    pub fn rendered_line(&self) -> String {
        docline::render_line(
            self.tx_label,
            &self.tx_pos,
            self.rx_label,
            &self.rx_pos,
            self.gain_db,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalMode {
    Local,
    Global,
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedChunk {
    pub index: usize,
    pub similarity: f64,
    pub token_count: usize,
    pub text: String,
}

/// Ranked evidence passed from retriever to generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalContext {
    pub mode: RetrievalMode,
    pub triples: Vec<GainTriple>,
    pub reports: Vec<CommunityReport>,
    pub chunks: Vec<RetrievedChunk>,
    pub budget_used: usize,
}

fn sort_triples(triples: &mut [GainTriple]) {
    triples.sort_by(|a, b| {
        a.combined_distance
            .total_cmp(&b.combined_distance)
            .then(a.tx_label.cmp(&b.tx_label))
            .then(a.rx_label.cmp(&b.rx_label))
    });
}

/// Keep the highest-ranked prefix whose summed token cost fits the budget.
fn truncate_to_budget<T>(items: Vec<T>, cost: impl Fn(&T) -> usize, budget: usize) -> (Vec<T>, usize) {
    let mut kept = Vec::with_capacity(items.len());
    let mut used = 0usize;
    for item in items {
        let c = cost(&item);
        if used + c > budget {
            break;
        }
        used += c;
        kept.push(item);
    }
    (kept, used)
}

/// Entity-anchored local search: anchor at the `k_anchor` nearest
/// transmitters and receivers, expand `hops` steps along relationships, and
/// rank every gain relationship inside the expanded set by combined
/// distance (ties by tx then rx label).
pub fn local_search(
    graph: &KnowledgeGraph,
    query: &GainQuery,
    k_anchor: usize,
    hops: usize,
    m: usize,
    budget: usize,
) -> Result<RetrievalContext> {
    if graph.entities().is_empty() {
        return Err(Error::Empty("graph has no entities".to_string()));
    }

    let nearest = |station_ids: &[usize], target: &Point3| -> Vec<usize> {
        let mut ranked: Vec<(f64, &str, usize)> = station_ids
            .iter()
            .map(|&i| {
                let e = &graph.entities()[i];
                let pos = e.station.as_ref().expect("station entity").position;
                (pos.distance(target), e.name.as_str(), i)
            })
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
        ranked.into_iter().take(k_anchor).map(|(_, _, i)| i).collect()
    };

    let mut frontier: Vec<usize> = nearest(graph.transmitter_indices(), &query.tx_pos);
    frontier.extend(nearest(graph.receiver_indices(), &query.rx_pos));
    let mut visited: BTreeSet<usize> = frontier.iter().copied().collect();

    for _ in 0..hops {
        let mut next = Vec::new();
        for &v in &frontier {
            for &rel in graph.incident_relationships(v) {
                let (a, b) = graph.relationship_endpoints(rel);
                for u in [a, b] {
                    if visited.insert(u) {
                        next.push(u);
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }

    let mut triples = Vec::new();
    for (ri, rel) in graph.relationships().iter().enumerate() {
        let Some(gain_db) = rel.gain_db else {
            continue;
        };
        let (src, dst) = graph.relationship_endpoints(ri);
        if !visited.contains(&src) || !visited.contains(&dst) {
            continue;
        }
        let (Some(tx), Some(rx)) = (
            graph.entities()[src].station.as_ref(),
            graph.entities()[dst].station.as_ref(),
        ) else {
            continue;
        };
        triples.push(GainTriple {
            tx_label: tx.label,
            rx_label: rx.label,
            tx_pos: tx.position,
            rx_pos: rx.position,
            gain_db,
            combined_distance: query.tx_pos.distance(&tx.position)
                + query.rx_pos.distance(&rx.position),
        });
    }
    sort_triples(&mut triples);
    triples.truncate(m);
    let (triples, budget_used) =
        truncate_to_budget(triples, |t| count_tokens(&t.rendered_line()), budget);

    Ok(RetrievalContext {
        mode: RetrievalMode::Local,
        triples,
        reports: Vec::new(),
        chunks: Vec::new(),
        budget_used,
    })
}

/// Community-report retrieval: rank all reports by cosine similarity to the
/// query text embedding and return the top `r`.
pub fn global_search(
    graph: &KnowledgeGraph,
    query_text: &str,
    r: usize,
    budget: usize,
) -> Result<RetrievalContext> {
    if graph.reports().is_empty() {
        return Err(Error::Empty("graph has no community reports".to_string()));
    }
    let query_embedding = embed_text(query_text, graph.embedding_dim());
    let mut ranked: Vec<(f64, &CommunityReport)> = graph
        .reports()
        .iter()
        .map(|report| {
            let sim = cosine_similarity(&query_embedding, &report.embedding)
                .expect("report embeddings share the graph dimension");
            (sim, report)
        })
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.community.cmp(&b.1.community)));
    let reports: Vec<CommunityReport> =
        ranked.into_iter().take(r).map(|(_, r)| r.clone()).collect();
    let (reports, budget_used) =
        truncate_to_budget(reports, |r| count_tokens(&r.rendered_text), budget);

    Ok(RetrievalContext {
        mode: RetrievalMode::Global,
        triples: Vec::new(),
        reports,
        chunks: Vec::new(),
        budget_used,
    })
}

/// Vanilla-RAG baseline: embed the query as a gain-free document line, rank
/// chunks by cosine similarity, and parse every grammar line in the kept
/// chunks into gain evidence.
pub fn flat_retrieve(
    graph: &KnowledgeGraph,
    query: &GainQuery,
    top_k: usize,
    budget: usize,
) -> Result<RetrievalContext> {
    if graph.chunks().is_empty() {
        return Err(Error::Empty("chunk store is empty".to_string()));
    }
    let query_text = docline::render_query_line(&query.tx_pos, &query.rx_pos);
    let query_embedding = embed_text(&query_text, graph.embedding_dim());

    let mut ranked: Vec<(f64, usize)> = graph
        .chunks()
        .iter()
        .enumerate()
        .map(|(i, chunk)| {
            let sim = cosine_similarity(&query_embedding, &chunk.embedding)
                .expect("chunk embeddings share the graph dimension");
            (sim, i)
        })
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let hits: Vec<RetrievedChunk> = ranked
        .into_iter()
        .take(top_k)
        .map(|(similarity, i)| {
            let chunk = &graph.chunks()[i];
            RetrievedChunk {
                index: chunk.index,
                similarity,
                token_count: chunk.token_count,
                text: chunk.text.clone(),
            }
        })
        .collect();
    let (hits, budget_used) = truncate_to_budget(hits, |c| c.token_count, budget);

    let mut triples = Vec::new();
    let mut seen = BTreeSet::new();
    for hit in &hits {
        for line in hit.text.split('\n') {
            let Some(parsed) = docline::parse_line(line) else {
                continue;
            };
            if !seen.insert((parsed.tx_label, parsed.rx_label, parsed.gain_db.to_bits())) {
                continue;
            }
            triples.push(GainTriple {
                tx_label: parsed.tx_label,
                rx_label: parsed.rx_label,
                tx_pos: parsed.tx_pos,
                rx_pos: parsed.rx_pos,
                gain_db: parsed.gain_db,
                combined_distance: query.tx_pos.distance(&parsed.tx_pos)
                    + query.rx_pos.distance(&parsed.rx_pos),
            });
        }
    }
    sort_triples(&mut triples);

    Ok(RetrievalContext {
        mode: RetrievalMode::Flat,
        triples,
        reports: Vec::new(),
        chunks: hits,
        budget_used,
    })
}
