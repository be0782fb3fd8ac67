//! Typed entity and relationship extraction from document chunks, plus the
//! merge of per-chunk results into one graph delta.
//!
//! The default extractor is deterministic and grammar-based: every document
//! line yields its station entities and a `transmits_to` relationship
//! carrying the channel gain. The LLM extractor prompts a chat backend and
//! parses a strict delimited record format, so it can be exercised offline
//! with fixture backends.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backend::ChatClient;
use crate::chunk::Chunk;
use crate::docline;
use crate::error::{Error, Result};
use crate::par;

pub const REL_TRANSMITS_TO: &str = "transmits_to";
pub const REL_HAS_CHANNEL_GAIN: &str = "has_channel_gain";
pub const REL_TO_RECEIVER: &str = "to_receiver";

pub const COORDINATE_ATTR: &str = "coordinate";
pub const GAIN_ATTR: &str = "gain_db";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityType {
    #[serde(rename = "transmitter")]
    Transmitter,
    #[serde(rename = "receiver")]
    Receiver,
    #[serde(rename = "channel gain")]
    ChannelGain,
    #[serde(rename = "coordinate")]
    Coordinate,
    #[serde(rename = "value")]
    Value,
}

impl EntityType {
    pub const ALL: [EntityType; 5] = [
        EntityType::Transmitter,
        EntityType::Receiver,
        EntityType::ChannelGain,
        EntityType::Coordinate,
        EntityType::Value,
    ];
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EntityType::Transmitter => "transmitter",
            EntityType::Receiver => "receiver",
            EntityType::ChannelGain => "channel gain",
            EntityType::Coordinate => "coordinate",
            EntityType::Value => "value",
        };
        f.write_str(s)
    }
}

impl FromStr for EntityType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "transmitter" => Ok(EntityType::Transmitter),
            "receiver" => Ok(EntityType::Receiver),
            "channel gain" => Ok(EntityType::ChannelGain),
            "coordinate" => Ok(EntityType::Coordinate),
            "value" => Ok(EntityType::Value),
            other => Err(format!("unknown entity type {other:?}")),
        }
    }
}

/// Extraction schema: coordinates and gains as attributes (compact), or with
/// separate "channel gain" entities linked to both stations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMode {
    Attribute,
    Reified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedEntity {
    pub name: String,
    pub entity_type: EntityType,
    pub attributes: BTreeMap<String, String>,
    pub source_chunks: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedRelationship {
    pub source: String,
    pub target: String,
    pub rel_type: String,
    pub gain_db: Option<f64>,
    pub source_chunks: BTreeSet<usize>,
}

impl ExtractedRelationship {
    pub fn key(&self) -> (String, String, String) {
        (
            self.source.clone(),
            self.target.clone(),
            self.rel_type.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GraphDelta {
    pub entities: Vec<ExtractedEntity>,
    pub relationships: Vec<ExtractedRelationship>,
}

/// Accumulates entities and relationships with dedup semantics: entities
/// merge by name (attributes first-writer-wins, chunks unioned),
/// relationships merge by (source, target, rel_type) with gain conflicts
/// beyond 1e-9 dB rejected.
#[derive(Default)]
struct DeltaBuilder {
    entities: BTreeMap<String, ExtractedEntity>,
    relationships: BTreeMap<(String, String, String), ExtractedRelationship>,
}

impl DeltaBuilder {
    fn add_entity(&mut self, entity: ExtractedEntity) {
        match self.entities.get_mut(&entity.name) {
            None => {
                self.entities.insert(entity.name.clone(), entity);
            }
            Some(existing) => {
                for (key, value) in entity.attributes {
                    existing.attributes.entry(key).or_insert(value);
                }
                existing.source_chunks.extend(entity.source_chunks);
            }
        }
    }

    fn add_relationship(&mut self, rel: ExtractedRelationship) -> Result<()> {
        match self.relationships.get_mut(&rel.key()) {
            None => {
                self.relationships.insert(rel.key(), rel);
            }
            Some(existing) => {
                match (existing.gain_db, rel.gain_db) {
                    (Some(a), Some(b)) if (a - b).abs() > 1e-9 => {
                        return Err(Error::GainConflict(Box::new(
                            crate::error::GainConflict {
                                from: rel.source,
                                to: rel.target,
                                rel_type: rel.rel_type,
                                gain_a: a,
                                gain_b: b,
                                chunks_a: existing.source_chunks.iter().copied().collect(),
                                chunks_b: rel.source_chunks.iter().copied().collect(),
                            },
                        )));
                    }
                    (None, Some(b)) => existing.gain_db = Some(b),
                    _ => {}
                }
                existing.source_chunks.extend(rel.source_chunks);
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<GraphDelta> {
        // every relationship endpoint must resolve to an entity
        for rel in self.relationships.values() {
            for endpoint in [&rel.source, &rel.target] {
                if !self.entities.contains_key(endpoint) {
                    return Err(Error::DanglingRelationship {
                        from: rel.source.clone(),
                        to: rel.target.clone(),
                        missing: endpoint.clone(),
                    });
                }
            }
        }
        Ok(GraphDelta {
            entities: self.entities.into_values().collect(),
            relationships: self.relationships.into_values().collect(),
        })
    }
}

pub fn transmitter_name(label: u32) -> String {
    format!("transmitter_{label}")
}

pub fn receiver_name(label: u32) -> String {
    format!("receiver_{label}")
}

fn gain_entity_name(tx_label: u32, rx_label: u32) -> String {
    format!("channel_gain_{tx_label}_{rx_label}")
}

/// Deterministic grammar-based extraction of one chunk.
pub fn extract_rule_based(
    chunk: &Chunk,
    types: &[EntityType],
    mode: ExtractionMode,
) -> Result<GraphDelta> {
    let mut builder = DeltaBuilder::default();
    let emit = |t: EntityType| types.contains(&t);

    for (line_no, line) in chunk.text.split('\n').enumerate() {
        let parsed = docline::parse_line(line).ok_or_else(|| Error::GrammarMismatch {
            chunk: chunk.index,
            line: line_no + 1,
            text: line.to_string(),
        })?;

        let tx_name = transmitter_name(parsed.tx_label);
        let rx_name = receiver_name(parsed.rx_label);
        let chunks = BTreeSet::from([chunk.index]);

        if emit(EntityType::Transmitter) {
            builder.add_entity(ExtractedEntity {
                name: tx_name.clone(),
                entity_type: EntityType::Transmitter,
                attributes: BTreeMap::from([(
                    COORDINATE_ATTR.to_string(),
                    docline::render_coordinate(&parsed.tx_pos),
                )]),
                source_chunks: chunks.clone(),
            });
        }
        if emit(EntityType::Receiver) {
            builder.add_entity(ExtractedEntity {
                name: rx_name.clone(),
                entity_type: EntityType::Receiver,
                attributes: BTreeMap::from([(
                    COORDINATE_ATTR.to_string(),
                    docline::render_coordinate(&parsed.rx_pos),
                )]),
                source_chunks: chunks.clone(),
            });
        }

        let stations_emitted = emit(EntityType::Transmitter) && emit(EntityType::Receiver);
        if stations_emitted {
            builder.add_relationship(ExtractedRelationship {
                source: tx_name.clone(),
                target: rx_name.clone(),
                rel_type: REL_TRANSMITS_TO.to_string(),
                gain_db: Some(parsed.gain_db),
                source_chunks: chunks.clone(),
            })?;
        }

        if mode == ExtractionMode::Reified && stations_emitted && emit(EntityType::ChannelGain) {
            let gain_name = gain_entity_name(parsed.tx_label, parsed.rx_label);
            builder.add_entity(ExtractedEntity {
                name: gain_name.clone(),
                entity_type: EntityType::ChannelGain,
                attributes: BTreeMap::from([(
                    GAIN_ATTR.to_string(),
                    format!("{:.2}", parsed.gain_db),
                )]),
                source_chunks: chunks.clone(),
            });
            builder.add_relationship(ExtractedRelationship {
                source: tx_name.clone(),
                target: gain_name.clone(),
                rel_type: REL_HAS_CHANNEL_GAIN.to_string(),
                gain_db: None,
                source_chunks: chunks.clone(),
            })?;
            builder.add_relationship(ExtractedRelationship {
                source: gain_name,
                target: rx_name,
                rel_type: REL_TO_RECEIVER.to_string(),
                gain_db: None,
                source_chunks: chunks,
            })?;
        }
    }
    builder.finish()
}

/// Rule-based extraction over all chunks, one delta per chunk. Chunks are
/// processed in parallel when the `parallel` feature is enabled; results are
/// collected in chunk order either way.
pub fn extract_all_rule_based(
    chunks: &[Chunk],
    types: &[EntityType],
    mode: ExtractionMode,
) -> Result<Vec<GraphDelta>> {
    par::map_slice(chunks, |chunk| extract_rule_based(chunk, types, mode))
        .into_iter()
        .collect()
}

const EXTRACTION_SYSTEM_PROMPT: &str = "You extract entities and relationships from channel \
knowledge documents. Reply only with records, one per line, in exactly this format:\n\
ENTITY|<name>|<type>|<attributes as key=value;...>\n\
REL|<source>|<target>|<type>|<gain_db or ->";

pub fn extraction_prompt(chunk: &Chunk, types: &[EntityType]) -> (String, String) {
    let type_list = types
        .iter()
        .map(|t| format!("\"{t}\""))
        .collect::<Vec<_>>()
        .join(", ");
    let user = format!(
        "Entity types: {type_list}.\nExtract all entities and relationships from the following text.\n\n{}",
        chunk.text
    );
    (EXTRACTION_SYSTEM_PROMPT.to_string(), user)
}

fn parse_attributes(raw: &str) -> Option<BTreeMap<String, String>> {
    let mut attributes = BTreeMap::new();
    for part in raw.split(';') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (key, value) = part.split_once('=')?;
        if key.trim().is_empty() {
            return None;
        }
        attributes.insert(key.trim().to_string(), value.trim().to_string());
    }
    Some(attributes)
}

/// Prompt the backend with one chunk and parse its response in the delimited
/// record format. Returns the delta and the number of dropped (unparseable)
/// records. A response with zero parseable records is a distinct error.
pub fn extract_llm(
    chunk: &Chunk,
    types: &[EntityType],
    client: &dyn ChatClient,
) -> Result<(GraphDelta, usize)> {
    let (system, user) = extraction_prompt(chunk, types);
    let response = client.complete(&system, &user)?;

    let mut builder = DeltaBuilder::default();
    let mut parsed = 0usize;
    let mut dropped = 0usize;
    let chunks = BTreeSet::from([chunk.index]);

    for line in response.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("ENTITY|") {
            let fields: Vec<&str> = rest.splitn(3, '|').collect();
            let record = (|| -> Option<ExtractedEntity> {
                let name = fields.first()?.trim();
                let entity_type: EntityType = fields.get(1)?.trim().parse().ok()?;
                if name.is_empty() || !types.contains(&entity_type) {
                    return None;
                }
                let attributes = parse_attributes(fields.get(2).copied().unwrap_or(""))?;
                Some(ExtractedEntity {
                    name: name.to_string(),
                    entity_type,
                    attributes,
                    source_chunks: chunks.clone(),
                })
            })();
            match record {
                Some(entity) => {
                    builder.add_entity(entity);
                    parsed += 1;
                }
                None => dropped += 1,
            }
        } else if let Some(rest) = line.strip_prefix("REL|") {
            let fields: Vec<&str> = rest.split('|').collect();
            let record = (|| -> Option<ExtractedRelationship> {
                if fields.len() != 4 {
                    return None;
                }
                let source = fields[0].trim();
                let target = fields[1].trim();
                let rel_type = fields[2].trim();
                if source.is_empty() || target.is_empty() || rel_type.is_empty() || source == target
                {
                    return None;
                }
                let gain_db = match fields[3].trim() {
                    "-" => None,
                    raw => Some(raw.parse::<f64>().ok().filter(|g| g.is_finite())?),
                };
                Some(ExtractedRelationship {
                    source: source.to_string(),
                    target: target.to_string(),
                    rel_type: rel_type.to_string(),
                    gain_db,
                    source_chunks: chunks.clone(),
                })
            })();
            match record {
                Some(rel) => {
                    builder.add_relationship(rel)?;
                    parsed += 1;
                }
                None => dropped += 1,
            }
        }
    }

    if parsed == 0 {
        return Err(Error::NoParseableRecords);
    }
    // endpoint validation is deferred to merge: a relationship may reference
    // entities extracted from another chunk
    Ok((
        GraphDelta {
            entities: builder.entities.into_values().collect(),
            relationships: builder.relationships.into_values().collect(),
        },
        dropped,
    ))
}

/// Merge per-chunk deltas into one canonical delta: entities by name,
/// relationships by (source, target, rel_type), chunk sets unioned, output
/// sorted for determinism.
pub fn merge_extractions(deltas: &[GraphDelta]) -> Result<GraphDelta> {
    let mut builder = DeltaBuilder::default();
    for delta in deltas {
        for entity in &delta.entities {
            builder.add_entity(entity.clone());
        }
        for rel in &delta.relationships {
            builder.add_relationship(rel.clone())?;
        }
    }
    builder.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunk::chunk_document;
    use crate::geom::Point3;
    use crate::ingest::{label_stations, render_document, RawCkmRecord};

    fn single_chunk(text: &str) -> Chunk {
        Chunk {
            index: 0,
            text: text.to_string(),
            token_count: crate::chunk::count_tokens(text),
        }
    }

    fn line(tx: u32, rx: u32, gain: f64) -> String {
        docline::render_line(
            tx,
            &Point3::new(tx as f64, 0.0, 10.0),
            rx,
            &Point3::new(rx as f64, 5.0, 1.5),
            gain,
        )
    }

    #[test]
    fn one_line_attribute_mode_counts() {
        let chunk = single_chunk(&line(1, 2, -72.4));
        let delta = extract_rule_based(&chunk, &EntityType::ALL, ExtractionMode::Attribute).unwrap();
        assert_eq!(delta.entities.len(), 2);
        assert_eq!(delta.relationships.len(), 1);
        let rel = &delta.relationships[0];
        assert_eq!(rel.source, "transmitter_1");
        assert_eq!(rel.target, "receiver_2");
        assert_eq!(rel.rel_type, REL_TRANSMITS_TO);
        assert_eq!(rel.gain_db, Some(-72.4));
        let tx = delta
            .entities
            .iter()
            .find(|e| e.name == "transmitter_1")
            .unwrap();
        assert_eq!(
            tx.attributes.get(COORDINATE_ATTR).unwrap(),
            "(1.00, 0.00, 10.00)"
        );
    }

    #[test]
    fn reified_mode_counts() {
        let chunk = single_chunk(&line(1, 2, -72.4));
        let delta = extract_rule_based(&chunk, &EntityType::ALL, ExtractionMode::Reified).unwrap();
        assert_eq!(delta.entities.len(), 3);
        assert_eq!(delta.relationships.len(), 3);
        let types: Vec<&str> = delta
            .relationships
            .iter()
            .map(|r| r.rel_type.as_str())
            .collect();
        assert!(types.contains(&REL_TRANSMITS_TO));
        assert!(types.contains(&REL_HAS_CHANNEL_GAIN));
        assert!(types.contains(&REL_TO_RECEIVER));
    }

    #[test]
    fn dedup_within_chunk_matches_set_oracle() {
        // 10 lines over 6 distinct stations (3 tx, 3 rx)
        let mut lines = Vec::new();
        for k in 0..10u32 {
            lines.push(line(k % 3 + 1, k % 3 + 1, -60.0 - (k % 3) as f64));
        }
        let text = lines.join("\n");
        let chunk = single_chunk(&text);
        let delta = extract_rule_based(&chunk, &EntityType::ALL, ExtractionMode::Attribute).unwrap();

        let mut expected_names = std::collections::BTreeSet::new();
        let mut expected_rels = std::collections::BTreeSet::new();
        for l in text.lines() {
            let p = docline::parse_line(l).unwrap();
            expected_names.insert(format!("transmitter_{}", p.tx_label));
            expected_names.insert(format!("receiver_{}", p.rx_label));
            expected_rels.insert((p.tx_label, p.rx_label));
        }
        assert_eq!(delta.entities.len(), expected_names.len());
        assert_eq!(delta.entities.len(), 6);
        assert_eq!(delta.relationships.len(), expected_rels.len());
        assert!(delta.relationships.len() <= 10);
    }

    #[test]
    fn grammar_error_reports_chunk_and_line() {
        let text = format!("{}\nnot a grammar line", line(1, 1, -50.0));
        let chunk = Chunk {
            index: 3,
            text,
            token_count: 0,
        };
        match extract_rule_based(&chunk, &EntityType::ALL, ExtractionMode::Attribute) {
            Err(Error::GrammarMismatch { chunk, line, .. }) => {
                assert_eq!(chunk, 3);
                assert_eq!(line, 2);
            }
            other => panic!("expected grammar error, got {other:?}"),
        }
    }

    #[test]
    fn merge_single_delta_is_identity_up_to_ordering() {
        let chunk = single_chunk(&[line(2, 1, -61.0), line(1, 2, -62.0)].join("\n"));
        let delta = extract_rule_based(&chunk, &EntityType::ALL, ExtractionMode::Attribute).unwrap();
        let merged = merge_extractions(std::slice::from_ref(&delta)).unwrap();
        assert_eq!(merged, delta); // extractor output is already canonical
    }

    #[test]
    fn merge_unions_source_chunks() {
        let c0 = Chunk {
            index: 0,
            text: line(1, 1, -50.0),
            token_count: 0,
        };
        let c1 = Chunk {
            index: 1,
            text: line(1, 2, -55.0),
            token_count: 0,
        };
        let d0 = extract_rule_based(&c0, &EntityType::ALL, ExtractionMode::Attribute).unwrap();
        let d1 = extract_rule_based(&c1, &EntityType::ALL, ExtractionMode::Attribute).unwrap();
        let merged = merge_extractions(&[d0, d1]).unwrap();
        let tx = merged
            .entities
            .iter()
            .find(|e| e.name == "transmitter_1")
            .unwrap();
        assert_eq!(
            tx.source_chunks.iter().copied().collect::<Vec<_>>(),
            vec![0, 1]
        );
        assert_eq!(
            merged.entities.iter().filter(|e| e.name == "transmitter_1").count(),
            1
        );
    }

    #[test]
    fn merge_is_idempotent_and_order_independent() {
        let records: Vec<RawCkmRecord> = (0..20)
            .map(|i| RawCkmRecord {
                tx_pos: Point3::new((i % 5) as f64, 0.0, 10.0),
                rx_pos: Point3::new((i % 7) as f64, 9.0, 1.5),
                gain_db: -60.0 - ((i % 5) * 7 + i % 7) as f64 / 10.0,
            })
            .collect();
        let (_, _, pairs) = label_stations(&records, 1e-6);
        let doc = render_document(&pairs);
        let chunks = chunk_document(&doc, 40).unwrap();
        let deltas = extract_all_rule_based(&chunks, &EntityType::ALL, ExtractionMode::Attribute)
            .unwrap();
        assert!(chunks.len() > 2);

        let merged = merge_extractions(&deltas).unwrap();
        let remerged =
            merge_extractions(&[merged.clone(), merged.clone()]).unwrap();
        assert_eq!(merged, remerged);

        let mut reversed = deltas.clone();
        reversed.reverse();
        let merged_reversed = merge_extractions(&reversed).unwrap();
        assert_eq!(merged.entities, merged_reversed.entities);
        assert_eq!(
            merged.relationships.len(),
            merged_reversed.relationships.len()
        );
        // gain payloads and keys agree; only source-chunk attribution is
        // order-sensitive in the inputs, and union makes it equal too
        assert_eq!(merged, merged_reversed);
    }

    #[test]
    fn conflicting_gain_is_an_error() {
        let a = GraphDelta {
            entities: vec![
                ExtractedEntity {
                    name: "transmitter_1".into(),
                    entity_type: EntityType::Transmitter,
                    attributes: BTreeMap::new(),
                    source_chunks: BTreeSet::from([0]),
                },
                ExtractedEntity {
                    name: "receiver_1".into(),
                    entity_type: EntityType::Receiver,
                    attributes: BTreeMap::new(),
                    source_chunks: BTreeSet::from([0]),
                },
            ],
            relationships: vec![ExtractedRelationship {
                source: "transmitter_1".into(),
                target: "receiver_1".into(),
                rel_type: REL_TRANSMITS_TO.into(),
                gain_db: Some(-60.0),
                source_chunks: BTreeSet::from([0]),
            }],
        };
        let mut b = a.clone();
        b.relationships[0].gain_db = Some(-61.0);
        b.relationships[0].source_chunks = BTreeSet::from([4]);
        match merge_extractions(&[a, b]) {
            Err(Error::GainConflict(conflict)) => {
                assert_eq!(conflict.chunks_a, vec![0]);
                assert_eq!(conflict.chunks_b, vec![4]);
            }
            other => panic!("expected gain conflict, got {other:?}"),
        }
    }

    struct FixtureClient {
        responses: std::cell::RefCell<std::collections::VecDeque<String>>,
    }

    impl FixtureClient {
        fn new<I: IntoIterator<Item = S>, S: Into<String>>(responses: I) -> Self {
            FixtureClient {
                responses: std::cell::RefCell::new(
                    responses.into_iter().map(Into::into).collect(),
                ),
            }
        }
    }

    impl ChatClient for FixtureClient {
        fn complete(&self, _system: &str, _user: &str) -> crate::error::Result<String> {
            self.responses
                .borrow_mut()
                .pop_front()
                .ok_or_else(|| Error::Backend("fixture exhausted".to_string()))
        }
    }

    #[test]
    fn llm_extraction_parses_well_formed_records() {
        let client = FixtureClient::new([
            "ENTITY|transmitter_1|transmitter|coordinate=(0.00, 0.00, 10.00)\n\
             ENTITY|receiver_2|receiver|coordinate=(50.00, 0.00, 1.50)\n\
             REL|transmitter_1|receiver_2|transmits_to|-72.4",
        ]);
        let chunk = single_chunk(&line(1, 2, -72.4));
        let (delta, dropped) = extract_llm(&chunk, &EntityType::ALL, &client).unwrap();
        assert_eq!(delta.entities.len(), 2);
        assert_eq!(delta.relationships.len(), 1);
        assert_eq!(delta.relationships[0].gain_db, Some(-72.4));
        assert_eq!(dropped, 0);
    }

    #[test]
    fn llm_prose_response_is_zero_parseable_error() {
        let client = FixtureClient::new(["The channel gain depends on many factors."]);
        let chunk = single_chunk(&line(1, 2, -72.4));
        match extract_llm(&chunk, &EntityType::ALL, &client) {
            Err(Error::NoParseableRecords) => {}
            other => panic!("expected zero-parseable error, got {other:?}"),
        }
    }

    #[test]
    fn llm_drops_bad_records_with_count() {
        let client = FixtureClient::new([
            "ENTITY|transmitter_1|transmitter|\n\
             ENTITY||receiver|\n\
             ENTITY|x_1|not-a-type|\n\
             REL|transmitter_1|transmitter_1|self|-\n\
             REL|transmitter_1|receiver_9|transmits_to|not_a_number\n\
             REL|transmitter_1|receiver_9|transmits_to|-70.5",
        ]);
        let chunk = single_chunk(&line(1, 9, -70.5));
        let (delta, dropped) = extract_llm(&chunk, &EntityType::ALL, &client).unwrap();
        assert_eq!(delta.entities.len(), 1);
        assert_eq!(delta.relationships.len(), 1);
        assert_eq!(dropped, 4);
    }

    #[test]
    fn llm_scripted_fixture_merged_counts() {
        // five scripted responses; hand-counted totals: 6 distinct entities,
        // 4 distinct relationships
        let client = FixtureClient::new([
            "ENTITY|transmitter_1|transmitter|\nENTITY|receiver_1|receiver|\nREL|transmitter_1|receiver_1|transmits_to|-60.0",
            "ENTITY|transmitter_1|transmitter|\nENTITY|receiver_2|receiver|\nREL|transmitter_1|receiver_2|transmits_to|-61.0",
            "ENTITY|transmitter_2|transmitter|\nENTITY|receiver_1|receiver|\nREL|transmitter_2|receiver_1|transmits_to|-62.0",
            "ENTITY|transmitter_2|transmitter|\nENTITY|receiver_2|receiver|\nREL|transmitter_2|receiver_2|transmits_to|-63.0",
            "ENTITY|transmitter_3|transmitter|\nENTITY|receiver_3|receiver|\nREL|transmitter_2|receiver_2|transmits_to|-63.0",
        ]);
        let chunks: Vec<Chunk> = (0..5)
            .map(|i| Chunk {
                index: i,
                text: format!("chunk {i}"),
                token_count: 2,
            })
            .collect();
        let mut deltas = Vec::new();
        for c in &chunks {
            deltas.push(extract_llm(c, &EntityType::ALL, &client).unwrap().0);
        }
        let merged = merge_extractions(&deltas).unwrap();
        assert_eq!(merged.entities.len(), 6);
        assert_eq!(merged.relationships.len(), 4);
    }

    #[test]
    fn merge_rejects_dangling_relationship() {
        let delta = GraphDelta {
            entities: vec![ExtractedEntity {
                name: "transmitter_1".into(),
                entity_type: EntityType::Transmitter,
                attributes: BTreeMap::new(),
                source_chunks: BTreeSet::from([0]),
            }],
            relationships: vec![ExtractedRelationship {
                source: "transmitter_1".into(),
                target: "receiver_404".into(),
                rel_type: REL_TRANSMITS_TO.into(),
                gain_db: Some(-50.0),
                source_chunks: BTreeSet::from([0]),
            }],
        };
        assert!(matches!(
            merge_extractions(&[delta]),
            Err(Error::DanglingRelationship { .. })
        ));
    }
}
