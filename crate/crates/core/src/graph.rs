//! The knowledge graph: merged entities and relationships with parsed
//! station payloads, embedded chunks, hierarchical Leiden communities, and
//! deterministic per-community reports. Built once, immutable afterwards;
//! all retrieval is read-only.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chunk::Chunk;
use crate::community::{hierarchical_leiden, Adjacency, LeidenParams};
use crate::embed::{embed_text, Embedding, DEFAULT_EMBEDDING_DIM};
use crate::error::{Error, Result};
use crate::extract::{EntityType, GraphDelta};
use crate::geom::{Aabb, Point3};
use crate::ingest::StationRole;
use crate::par;

pub const GRAPH_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationInfo {
    pub role: StationRole,
    pub label: u32,
    pub position: Point3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEntity {
    pub name: String,
    pub entity_type: EntityType,
    pub attributes: BTreeMap<String, String>,
    pub source_chunks: BTreeSet<usize>,
    pub station: Option<StationInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRelationship {
    pub source: String,
    pub target: String,
    pub rel_type: String,
    pub gain_db: Option<f64>,
    pub source_chunks: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredChunk {
    pub index: usize,
    pub text: String,
    pub token_count: usize,
    pub embedding: Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Community {
    pub id: usize,
    pub level: usize,
    pub members: BTreeSet<String>,
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityReport {
    pub community: usize,
    pub station_count: usize,
    pub pair_count: usize,
    pub bounding_box: Option<Aabb>,
    pub gain_stats: GainStats,
    pub rendered_text: String,
    pub embedding: Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub entity_count: usize,
    pub relationship_count: usize,
    pub community_count_total: usize,
    pub community_count_per_level: Vec<usize>,
    pub chunk_count: usize,
}

/// On-disk layout of a graph file.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    entities: Vec<GraphEntity>,
    relationships: Vec<GraphRelationship>,
    communities: Vec<Community>,
    reports: Vec<CommunityReport>,
    chunks: Vec<StoredChunk>,
    format_version: u32,
}

#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: Vec<GraphEntity>,
    relationships: Vec<GraphRelationship>,
    chunks: Vec<StoredChunk>,
    communities: Vec<Community>,
    reports: Vec<CommunityReport>,
    // derived
    name_index: HashMap<String, usize>,
    rel_endpoints: Vec<(usize, usize)>,
    incident: Vec<Vec<usize>>,
    transmitters: Vec<usize>,
    receivers: Vec<usize>,
    embedding_dim: usize,
}

fn parse_station_label(name: &str) -> Option<u32> {
    name.rsplit_once('_')?.1.parse().ok()
}

fn parse_coordinate_attr(raw: &str) -> Option<Point3> {
    let inner = raw.trim().strip_prefix('(')?.strip_suffix(')')?;
    let parts: Vec<&str> = inner.split(',').collect();
    if parts.len() != 3 {
        return None;
    }
    let mut values = [0.0f64; 3];
    for (i, p) in parts.iter().enumerate() {
        values[i] = p.trim().parse().ok().filter(|v: &f64| v.is_finite())?;
    }
    Some(Point3::new(values[0], values[1], values[2]))
}

fn station_from_entity(entity: &GraphEntity) -> Result<Option<StationInfo>> {
    let role = match entity.entity_type {
        EntityType::Transmitter => StationRole::Transmitter,
        EntityType::Receiver => StationRole::Receiver,
        _ => return Ok(None),
    };
    let raw = entity
        .attributes
        .get(crate::extract::COORDINATE_ATTR)
        .ok_or_else(|| Error::BadCoordinate {
            name: entity.name.clone(),
            value: "<missing>".to_string(),
        })?;
    let position = parse_coordinate_attr(raw).ok_or_else(|| Error::BadCoordinate {
        name: entity.name.clone(),
        value: raw.clone(),
    })?;
    let label = parse_station_label(&entity.name).ok_or_else(|| Error::BadCoordinate {
        name: entity.name.clone(),
        value: format!("station name {:?} has no numeric label suffix", entity.name),
    })?;
    Ok(Some(StationInfo {
        role,
        label,
        position,
    }))
}

impl KnowledgeGraph {
    /// Build the graph from a merged delta and the chunk store. Station
    /// coordinates are parsed from attributes; chunk embeddings are computed
    /// here. Communities are attached by [`KnowledgeGraph::finalize_communities`].
    pub fn build(delta: &GraphDelta, chunks: &[Chunk], embedding_dim: usize) -> Result<Self> {
        let mut entities: Vec<GraphEntity> = Vec::with_capacity(delta.entities.len());
        for e in &delta.entities {
            let mut entity = GraphEntity {
                name: e.name.clone(),
                entity_type: e.entity_type,
                attributes: e.attributes.clone(),
                source_chunks: e.source_chunks.clone(),
                station: None,
            };
            entity.station = station_from_entity(&entity)?;
            entities.push(entity);
        }
        entities.sort_by(|a, b| a.name.cmp(&b.name));

        let mut relationships: Vec<GraphRelationship> = delta
            .relationships
            .iter()
            .map(|r| GraphRelationship {
                source: r.source.clone(),
                target: r.target.clone(),
                rel_type: r.rel_type.clone(),
                gain_db: r.gain_db,
                source_chunks: r.source_chunks.clone(),
            })
            .collect();
        relationships.sort_by(|a, b| {
            (&a.source, &a.target, &a.rel_type).cmp(&(&b.source, &b.target, &b.rel_type))
        });

        let stored_chunks: Vec<StoredChunk> = par::map_slice(chunks, |c| StoredChunk {
            index: c.index,
            text: c.text.clone(),
            token_count: c.token_count,
            embedding: embed_text(&c.text, embedding_dim),
        });

        let mut graph = KnowledgeGraph {
            entities,
            relationships,
            chunks: stored_chunks,
            communities: Vec::new(),
            reports: Vec::new(),
            name_index: HashMap::new(),
            rel_endpoints: Vec::new(),
            incident: Vec::new(),
            transmitters: Vec::new(),
            receivers: Vec::new(),
            embedding_dim,
        };
        graph.rebuild_derived()?;
        Ok(graph)
    }

    fn rebuild_derived(&mut self) -> Result<()> {
        self.name_index = self
            .entities
            .iter()
            .enumerate()
            .map(|(i, e)| (e.name.clone(), i))
            .collect();
        self.rel_endpoints = Vec::with_capacity(self.relationships.len());
        self.incident = vec![Vec::new(); self.entities.len()];
        for (ri, rel) in self.relationships.iter().enumerate() {
            let source = *self.name_index.get(&rel.source).ok_or_else(|| {
                Error::DanglingRelationship {
                    from: rel.source.clone(),
                    to: rel.target.clone(),
                    missing: rel.source.clone(),
                }
            })?;
            let target = *self.name_index.get(&rel.target).ok_or_else(|| {
                Error::DanglingRelationship {
                    from: rel.source.clone(),
                    to: rel.target.clone(),
                    missing: rel.target.clone(),
                }
            })?;
            self.rel_endpoints.push((source, target));
            self.incident[source].push(ri);
            self.incident[target].push(ri);
        }
        self.transmitters = Vec::new();
        self.receivers = Vec::new();
        for (i, e) in self.entities.iter().enumerate() {
            match e.station.as_ref().map(|s| s.role) {
                Some(StationRole::Transmitter) => self.transmitters.push(i),
                Some(StationRole::Receiver) => self.receivers.push(i),
                None => {}
            }
        }
        Ok(())
    }

    /// Detect hierarchical communities over the relationship topology (edge
    /// weight 1 per relationship) and return them with graph-wide ids.
    pub fn detect_communities(&self, params: &LeidenParams) -> Vec<Community> {
        let adjacency = self.community_adjacency();
        let levels = hierarchical_leiden(&adjacency, params);
        let mut communities = Vec::new();
        let mut level_start = Vec::new();
        let mut next_id = 0usize;
        for (level, level_comms) in levels.iter().enumerate() {
            level_start.push(next_id);
            for c in level_comms {
                let parent = c.parent.map(|p| level_start[level - 1] + p);
                communities.push(Community {
                    id: next_id,
                    level,
                    members: c
                        .members
                        .iter()
                        .map(|&v| self.entities[v].name.clone())
                        .collect(),
                    parent,
                });
                next_id += 1;
            }
        }
        communities
    }

    fn community_adjacency(&self) -> Adjacency {
        let mut weight = vec![BTreeMap::<usize, f64>::new(); self.entities.len()];
        for &(u, v) in &self.rel_endpoints {
            if u == v {
                continue;
            }
            *weight[u].entry(v).or_insert(0.0) += 1.0;
            *weight[v].entry(u).or_insert(0.0) += 1.0;
        }
        weight
            .into_iter()
            .map(|row| row.into_iter().collect())
            .collect()
    }

    /// Deterministic report for one community: counts, bounding region, and
    /// gain statistics over member relationships, rendered to a fixed
    /// template and embedded.
    pub fn summarize_community(&self, community: &Community) -> CommunityReport {
        let member_ids: BTreeSet<usize> = community
            .members
            .iter()
            .filter_map(|name| self.name_index.get(name).copied())
            .collect();

        let mut station_count = 0usize;
        let mut bounding_box: Option<Aabb> = None;
        for &i in &member_ids {
            if let Some(station) = &self.entities[i].station {
                station_count += 1;
                match &mut bounding_box {
                    None => bounding_box = Some(Aabb::around(&station.position)),
                    Some(bb) => bb.expand(&station.position),
                }
            }
        }

        let mut gains = Vec::new();
        for (ri, rel) in self.relationships.iter().enumerate() {
            let (u, v) = self.rel_endpoints[ri];
            if member_ids.contains(&u) && member_ids.contains(&v) {
                if let Some(g) = rel.gain_db {
                    gains.push(g);
                }
            }
        }
        let pair_count = gains.len();
        let gain_stats = if gains.is_empty() {
            GainStats {
                mean: 0.0,
                min: 0.0,
                max: 0.0,
                stddev: 0.0,
            }
        } else {
            let n = gains.len() as f64;
            let mean = gains.iter().sum::<f64>() / n;
            let var = gains.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / n;
            GainStats {
                mean,
                min: gains.iter().copied().fold(f64::INFINITY, f64::min),
                max: gains.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                stddev: var.sqrt(),
            }
        };

        let bb = bounding_box.unwrap_or(Aabb {
            min: Point3::new(0.0, 0.0, 0.0),
            max: Point3::new(0.0, 0.0, 0.0),
        });
        let rendered_text = format!(
            "Community {} (level {}): {} stations, {} pairs, region x:[{:.2},{:.2}] y:[{:.2},{:.2}] z:[{:.2},{:.2}], gain dB mean {:.2} min {:.2} max {:.2} std {:.2}.",
            community.id,
            community.level,
            station_count,
            pair_count,
            bb.min.x,
            bb.max.x,
            bb.min.y,
            bb.max.y,
            bb.min.z,
            bb.max.z,
            gain_stats.mean,
            gain_stats.min,
            gain_stats.max,
            gain_stats.stddev,
        );
        let embedding = embed_text(&rendered_text, self.embedding_dim);
        CommunityReport {
            community: community.id,
            station_count,
            pair_count,
            bounding_box,
            gain_stats,
            rendered_text,
            embedding,
        }
    }

    /// Run community detection and summarization, attaching the results.
    /// After this the graph is complete and treated as immutable.
    pub fn finalize_communities(&mut self, params: &LeidenParams) {
        let communities = self.detect_communities(params);
        let reports = communities
            .iter()
            .map(|c| self.summarize_community(c))
            .collect();
        self.communities = communities;
        self.reports = reports;
    }

    pub fn stats(&self) -> GraphStats {
        let max_level = self.communities.iter().map(|c| c.level).max();
        let mut per_level = vec![0usize; max_level.map_or(0, |l| l + 1)];
        for c in &self.communities {
            per_level[c.level] += 1;
        }
        GraphStats {
            entity_count: self.entities.len(),
            relationship_count: self.relationships.len(),
            community_count_total: self.communities.len(),
            community_count_per_level: per_level,
            chunk_count: self.chunks.len(),
        }
    }

    pub fn to_json_string(&self) -> String {
        let file = GraphFile {
            entities: self.entities.clone(),
            relationships: self.relationships.clone(),
            communities: self.communities.clone(),
            reports: self.reports.clone(),
            chunks: self.chunks.clone(),
            format_version: GRAPH_FORMAT_VERSION,
        };
        let mut out = serde_json::to_string_pretty(&file).expect("graph serializes");
        out.push('\n');
        out
    }

    pub fn export(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    pub fn import(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&raw).map_err(|e| Error::Corrupt(e.to_string()))?;
        let version = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Corrupt("missing format_version".to_string()))?;
        if version != u64::from(GRAPH_FORMAT_VERSION) {
            return Err(Error::Version {
                found: version as u32,
                expected: GRAPH_FORMAT_VERSION,
            });
        }
        let file: GraphFile =
            serde_json::from_value(value).map_err(|e| Error::Corrupt(e.to_string()))?;

        let embedding_dim = file
            .chunks
            .first()
            .map(|c| c.embedding.dim())
            .or_else(|| file.reports.first().map(|r| r.embedding.dim()))
            .unwrap_or(DEFAULT_EMBEDDING_DIM);
        for c in &file.chunks {
            if c.embedding.dim() != embedding_dim {
                return Err(Error::Corrupt(format!(
                    "chunk {} embedding dimension {} != {}",
                    c.index,
                    c.embedding.dim(),
                    embedding_dim
                )));
            }
        }
        for r in &file.reports {
            if r.embedding.dim() != embedding_dim {
                return Err(Error::Corrupt(format!(
                    "report {} embedding dimension {} != {}",
                    r.community,
                    r.embedding.dim(),
                    embedding_dim
                )));
            }
        }

        let mut graph = KnowledgeGraph {
            entities: file.entities,
            relationships: file.relationships,
            chunks: file.chunks,
            communities: file.communities,
            reports: file.reports,
            name_index: HashMap::new(),
            rel_endpoints: Vec::new(),
            incident: Vec::new(),
            transmitters: Vec::new(),
            receivers: Vec::new(),
            embedding_dim,
        };
        graph.entities.sort_by(|a, b| a.name.cmp(&b.name));
        graph.relationships.sort_by(|a, b| {
            (&a.source, &a.target, &a.rel_type).cmp(&(&b.source, &b.target, &b.rel_type))
        });
        graph.rebuild_derived()?;
        Ok(graph)
    }

    pub fn entities(&self) -> &[GraphEntity] {
        &self.entities
    }

    pub fn relationships(&self) -> &[GraphRelationship] {
        &self.relationships
    }

    pub fn chunks(&self) -> &[StoredChunk] {
        &self.chunks
    }

    pub fn communities(&self) -> &[Community] {
        &self.communities
    }

    pub fn reports(&self) -> &[CommunityReport] {
        &self.reports
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding_dim
    }

    pub fn entity_index(&self, name: &str) -> Option<usize> {
        self.name_index.get(name).copied()
    }

    pub fn relationship_endpoints(&self, rel: usize) -> (usize, usize) {
        self.rel_endpoints[rel]
    }

    pub fn incident_relationships(&self, entity: usize) -> &[usize] {
        &self.incident[entity]
    }

    pub fn transmitter_indices(&self) -> &[usize] {
        &self.transmitters
    }

    pub fn receiver_indices(&self) -> &[usize] {
        &self.receivers
    }
}

/// Equality for round-trip checks: equal canonical content.
impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.entities == other.entities
            && self.relationships == other.relationships
            && self.chunks == other.chunks
            && self.communities == other.communities
            && self.reports == other.reports
    }
}
