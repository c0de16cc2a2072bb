//! Triple-based network knowledge graph: entities, relations, facts, an
//! embedding index, and semantic retrieval with multi-hop expansion.
//!
//! Entity attributes are not duplicated on the entity record; the fact table
//! is the single source of truth (one current value per entity/attribute
//! pair) and `attributes_of` exposes the view.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnose::provider::ProviderError;
use crate::semgen::embed::{Embedder, UnitVector};

mod extract;
mod io;
mod seed;

pub use extract::{extract_triples, TripleExtraction};
pub use io::{load_graph, parse_graph_text, save_graph, serialize_graph};
pub use seed::builtin_graph;

#[derive(Debug, Error)]
pub enum NkgError {
    #[error("knowledge graph is empty")]
    EmptyGraph,

    #[error("embedding index does not cover the entity set; run index_entities first")]
    IndexNotBuilt,

    #[error("identifier {0:?} contains tab or newline")]
    BadIdentifier(String),

    #[error("malformed graph line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Provider(#[from] ProviderError),

    #[error(transparent)]
    Embedding(#[from] crate::semgen::SemGenError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Device,
    Metric,
    FaultType,
    State,
    Protocol,
    Step,
    DeviceClass,
}

impl EntityKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EntityKind::Device => "device",
            EntityKind::Metric => "metric",
            EntityKind::FaultType => "fault_type",
            EntityKind::State => "state",
            EntityKind::Protocol => "protocol",
            EntityKind::Step => "step",
            EntityKind::DeviceClass => "device_class",
        }
    }

    pub fn from_str_opt(s: &str) -> Option<Self> {
        match s {
            "device" => Some(EntityKind::Device),
            "metric" => Some(EntityKind::Metric),
            "fault_type" => Some(EntityKind::FaultType),
            "state" => Some(EntityKind::State),
            "protocol" => Some(EntityKind::Protocol),
            "step" => Some(EntityKind::Step),
            "device_class" => Some(EntityKind::DeviceClass),
            _ => None,
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub name: String,
    pub kind: EntityKind,
    pub updated_at: i64,
}

impl Entity {
    pub fn new(id: &str, name: &str, kind: EntityKind) -> Self {
        Self {
            id: id.to_string(),
            name: name.to_string(),
            kind,
            updated_at: 0,
        }
    }

    pub fn at(mut self, updated_at: i64) -> Self {
        self.updated_at = updated_at;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationEdge {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl RelationEdge {
    pub fn new(subject: &str, predicate: &str, object: &str) -> Self {
        Self {
            subject: subject.to_string(),
            predicate: predicate.to_string(),
            object: object.to_string(),
        }
    }
}

/// A plain (subject, predicate, object) triple before graph insertion.
pub type Triple = (String, String, String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactStatement {
    pub entity: String,
    pub attribute: String,
    pub value: String,
    pub updated_at: i64,
}

impl FactStatement {
    pub fn new(entity: &str, attribute: &str, value: &str) -> Self {
        Self {
            entity: entity.to_string(),
            attribute: attribute.to_string(),
            value: value.to_string(),
            updated_at: 0,
        }
    }

    pub fn at(mut self, updated_at: i64) -> Self {
        self.updated_at = updated_at;
        self
    }
}

/// An incoming piece of knowledge for [`update_graph`].
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    Entity(Entity),
    Fact(FactStatement),
}

/// Result of applying a batch of observations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UpdateSummary {
    pub applied: usize,
    pub stale: usize,
    pub inserted_entities: usize,
}

/// The network knowledge graph `G = {E, R, F}` plus an optional embedding
/// index over the entities.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeGraph {
    entities: BTreeMap<String, Entity>,
    relations: BTreeSet<RelationEdge>,
    facts: BTreeMap<(String, String), FactStatement>,
    index: BTreeMap<String, UnitVector>,
}

fn check_id(id: &str) -> Result<(), NkgError> {
    if id.is_empty() || id.contains('\t') || id.contains('\n') {
        return Err(NkgError::BadIdentifier(id.to_string()));
    }
    Ok(())
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn fact_count(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn relations(&self) -> impl Iterator<Item = &RelationEdge> {
        self.relations.iter()
    }

    pub fn facts(&self) -> impl Iterator<Item = &FactStatement> {
        self.facts.values()
    }

    pub fn fact(&self, entity: &str, attribute: &str) -> Option<&FactStatement> {
        self.facts.get(&(entity.to_string(), attribute.to_string()))
    }

    /// Current attribute view of one entity, derived from the fact table.
    pub fn attributes_of(&self, id: &str) -> BTreeMap<&str, &str> {
        self.facts
            .range((id.to_string(), String::new())..)
            .take_while(|((e, _), _)| e == id)
            .map(|((_, a), f)| (a.as_str(), f.value.as_str()))
            .collect()
    }

    /// Insert or replace an entity record. Invalidates its index entry.
    pub fn insert_entity(&mut self, entity: Entity) -> Result<(), NkgError> {
        check_id(&entity.id)?;
        if entity.name.contains('\t') || entity.name.contains('\n') || entity.name.is_empty() {
            return Err(NkgError::BadIdentifier(entity.name.clone()));
        }
        self.index.remove(&entity.id);
        self.entities.insert(entity.id.clone(), entity);
        Ok(())
    }

    fn ensure_entity(&mut self, id: &str, updated_at: i64) -> Result<(), NkgError> {
        check_id(id)?;
        if !self.entities.contains_key(id) {
            self.entities.insert(
                id.to_string(),
                Entity::new(id, id, EntityKind::State).at(updated_at),
            );
        }
        Ok(())
    }

    /// Insert a relation, auto-creating unseen endpoints as bare `state`
    /// entities. Exact duplicates are ignored.
    pub fn insert_relation(&mut self, relation: RelationEdge) -> Result<(), NkgError> {
        check_id(&relation.predicate)?;
        self.ensure_entity(&relation.subject, 0)?;
        self.ensure_entity(&relation.object, 0)?;
        self.relations.insert(relation);
        Ok(())
    }

    /// Insert or overwrite a fact (one current value per entity/attribute).
    /// The owning entity is auto-created when unseen and the entity's index
    /// entry is invalidated.
    pub fn insert_fact(&mut self, fact: FactStatement) -> Result<(), NkgError> {
        check_id(&fact.attribute)?;
        if fact.value.contains('\t') || fact.value.contains('\n') {
            return Err(NkgError::BadIdentifier(fact.value.clone()));
        }
        self.ensure_entity(&fact.entity, fact.updated_at)?;
        self.index.remove(&fact.entity);
        self.facts
            .insert((fact.entity.clone(), fact.attribute.clone()), fact);
        Ok(())
    }

    /// Undirected neighbors over relation edges.
    fn neighbors(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let mut adj: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for r in &self.relations {
            adj.entry(r.subject.as_str()).or_default().insert(r.object.as_str());
            adj.entry(r.object.as_str()).or_default().insert(r.subject.as_str());
        }
        adj
    }

    /// True when the embedding index covers exactly the entity set.
    pub fn index_complete(&self) -> bool {
        self.index.len() == self.entities.len()
            && self.index.keys().all(|id| self.entities.contains_key(id))
    }

    /// Text an entity is embedded from: name, kind, and attribute keys.
    pub fn embedding_text(&self, entity: &Entity) -> String {
        let mut parts = vec![entity.name.clone(), entity.kind.to_string()];
        parts.extend(self.attributes_of(&entity.id).keys().map(|k| k.to_string()));
        parts.join(" ")
    }
}

/// Build a graph from plain triples and fact statements. Endpoints are
/// auto-created as bare `state` entities; iteration order is sorted, so any
/// permutation of the input produces an identical graph.
pub fn build_graph(triples: &[Triple], facts: &[FactStatement]) -> Result<KnowledgeGraph, NkgError> {
    let mut g = KnowledgeGraph::new();
    for (s, p, o) in triples {
        g.insert_relation(RelationEdge::new(s, p, o))?;
    }
    for f in facts {
        g.insert_fact(f.clone())?;
    }
    Ok(g)
}

/// Apply observations with last-writer-wins semantics per entity and per
/// (entity, attribute), keyed on `updated_at`. Strictly newer wins; equal or
/// older timestamps are counted as stale and ignored. Touched entities lose
/// their embedding index entry.
pub fn update_graph(
    mut g: KnowledgeGraph,
    observations: &[Observation],
) -> Result<(KnowledgeGraph, UpdateSummary), NkgError> {
    let mut summary = UpdateSummary::default();
    for obs in observations {
        match obs {
            Observation::Entity(e) => match g.entities.get(&e.id) {
                Some(current) if current.updated_at >= e.updated_at => summary.stale += 1,
                existing => {
                    if existing.is_none() {
                        summary.inserted_entities += 1;
                    }
                    g.insert_entity(e.clone())?;
                    summary.applied += 1;
                }
            },
            Observation::Fact(f) => {
                let key = (f.entity.clone(), f.attribute.clone());
                match g.facts.get(&key) {
                    Some(current) if current.updated_at >= f.updated_at => summary.stale += 1,
                    _ => {
                        if !g.entities.contains_key(&f.entity) {
                            summary.inserted_entities += 1;
                        }
                        g.insert_fact(f.clone())?;
                        summary.applied += 1;
                    }
                }
            }
        }
    }
    Ok((g, summary))
}

/// Compute embedding index entries for every entity that lacks one and drop
/// entries for entities that no longer exist. Idempotent.
pub fn index_entities(g: &mut KnowledgeGraph, embedder: &dyn Embedder) -> Result<(), NkgError> {
    let ids: Vec<String> = g.entities.keys().cloned().collect();
    g.index.retain(|id, _| g.entities.contains_key(id));
    for id in ids {
        if !g.index.contains_key(&id) {
            let entity = g.entities.get(&id).expect("listed id");
            let vector = embedder.embed(&g.embedding_text(entity))?;
            g.index.insert(id, vector);
        }
    }
    Ok(())
}

/// Direct access to one indexed vector (diff tests).
pub fn indexed_vector<'g>(g: &'g KnowledgeGraph, id: &str) -> Option<&'g UnitVector> {
    g.index.get(id)
}

/// The subgraph reached by multi-hop expansion: visited entities, relations
/// with both endpoints visited, and all facts of visited entities.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Subgraph {
    pub entities: Vec<Entity>,
    pub relations: Vec<RelationEdge>,
    pub facts: Vec<FactStatement>,
}

impl Subgraph {
    pub fn contains_entity(&self, id: &str) -> bool {
        self.entities.iter().any(|e| e.id == id)
    }

    /// Line-per-item rendering used as knowledge snippets in prompts.
    pub fn render_snippets(&self) -> Vec<String> {
        let mut out = Vec::new();
        for e in &self.entities {
            out.push(format!("entity {} {} {}", e.id, e.kind, e.name));
        }
        for r in &self.relations {
            out.push(format!("triple {} {} {}", r.subject, r.predicate, r.object));
        }
        for f in &self.facts {
            out.push(format!("fact {} {} {}", f.entity, f.attribute, f.value));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    /// Top-K entity ids with cosine scores, non-increasing.
    pub candidates: Vec<(String, f64)>,
    pub subgraph: Subgraph,
}

/// Rank entities by cosine similarity to the query, take the top K (ties
/// break by entity id), and expand the candidates' undirected neighborhood
/// to `hops` relation edges.
pub fn retrieve(
    g: &KnowledgeGraph,
    embedder: &dyn Embedder,
    query: &str,
    k: usize,
    hops: usize,
) -> Result<RetrievalResult, NkgError> {
    if g.entities.is_empty() {
        return Err(NkgError::EmptyGraph);
    }
    if !g.index_complete() {
        return Err(NkgError::IndexNotBuilt);
    }
    let query_vec = embedder.embed(query)?;
    let mut scored: Vec<(String, f64)> = Vec::with_capacity(g.entities.len());
    for (id, vector) in &g.index {
        scored.push((id.clone(), query_vec.dot(vector)?));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k.max(1));

    let subgraph = expand(g, scored.iter().map(|(id, _)| id.as_str()), hops);
    Ok(RetrievalResult {
        candidates: scored,
        subgraph,
    })
}

/// Multi-source BFS over undirected relation edges up to `hops`.
fn expand<'a>(g: &KnowledgeGraph, seeds: impl Iterator<Item = &'a str>, hops: usize) -> Subgraph {
    let adj = g.neighbors();
    let mut dist: BTreeMap<&str, usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    for seed in seeds {
        if g.entities.contains_key(seed) && !dist.contains_key(seed) {
            dist.insert(seed, 0);
            queue.push_back(seed);
        }
    }
    while let Some(v) = queue.pop_front() {
        let d = dist[v];
        if d == hops {
            continue;
        }
        if let Some(next) = adj.get(v) {
            for n in next {
                if !dist.contains_key(n) && g.entities.contains_key(*n) {
                    dist.insert(n, d + 1);
                    queue.push_back(n);
                }
            }
        }
    }

    let visited: BTreeSet<&str> = dist.keys().copied().collect();
    let entities: Vec<Entity> = visited
        .iter()
        .filter_map(|id| g.entities.get(*id).cloned())
        .collect();
    let relations: Vec<RelationEdge> = g
        .relations
        .iter()
        .filter(|r| visited.contains(r.subject.as_str()) && visited.contains(r.object.as_str()))
        .cloned()
        .collect();
    let facts: Vec<FactStatement> = g
        .facts
        .values()
        .filter(|f| visited.contains(f.entity.as_str()))
        .cloned()
        .collect();
    Subgraph {
        entities,
        relations,
        facts,
    }
}

/// Character-count comparison of the triple serialization against a prose
/// rendering of the same content. Informational: the triple form should not
/// be longer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenEconomyReport {
    pub triple_chars: usize,
    pub prose_chars: usize,
}

pub fn token_economy(g: &KnowledgeGraph) -> TokenEconomyReport {
    TokenEconomyReport {
        triple_chars: io::serialize_graph(g).chars().count(),
        prose_chars: prose_rendering(g).chars().count(),
    }
}

/// Verbose sentence-per-item rendering of the whole graph.
pub fn prose_rendering(g: &KnowledgeGraph) -> String {
    let mut out = String::new();
    for e in g.entities() {
        out.push_str(&format!(
            "The entity {} is a {} that was last updated at {}.\n",
            e.name, e.kind, e.updated_at
        ));
    }
    for r in g.relations() {
        out.push_str(&format!(
            "The entity {} has the relationship {} with the entity {}.\n",
            r.subject, r.predicate, r.object
        ));
    }
    for f in g.facts() {
        out.push_str(&format!(
            "The {} of {} is {} as of {}.\n",
            f.attribute, f.entity, f.value, f.updated_at
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semgen::HashEmbedder;

    fn fact(e: &str, a: &str, v: &str, t: i64) -> FactStatement {
        FactStatement::new(e, a, v).at(t)
    }

    #[test]
    fn empty_input_builds_empty_graph() {
        let g = build_graph(&[], &[]).unwrap();
        assert!(g.is_empty());
        assert_eq!(g.relation_count(), 0);
        assert_eq!(g.fact_count(), 0);
    }

    #[test]
    fn triples_plus_fact_create_entities() {
        let triples = vec![("uav".to_string(), "has_metric".to_string(), "delay_ms".to_string())];
        let facts = vec![fact("delay_ms", "threshold", "within[0,100]", 0)];
        let g = build_graph(&triples, &facts).unwrap();
        assert_eq!(g.entity_count(), 2);
        assert_eq!(g.relation_count(), 1);
        assert_eq!(g.fact_count(), 1);
        assert_eq!(g.entity("uav").unwrap().kind, EntityKind::State);
    }

    #[test]
    fn build_is_permutation_invariant() {
        use rand::{seq::SliceRandom, Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x9a9a);
        let mut triples: Vec<Triple> = (0..500)
            .map(|_| {
                (
                    format!("e{}", rng.gen_range(0..60)),
                    format!("p{}", rng.gen_range(0..5)),
                    format!("e{}", rng.gen_range(0..60)),
                )
            })
            .collect();
        let g1 = build_graph(&triples, &[]).unwrap();
        triples.shuffle(&mut rng);
        let g2 = build_graph(&triples, &[]).unwrap();
        triples.shuffle(&mut rng);
        let g3 = build_graph(&triples, &[]).unwrap();
        assert_eq!(io::serialize_graph(&g1), io::serialize_graph(&g2));
        assert_eq!(io::serialize_graph(&g1), io::serialize_graph(&g3));
    }

    #[test]
    fn stale_update_is_ignored_and_counted() {
        let mut g = KnowledgeGraph::new();
        g.insert_fact(fact("d1", "state", "ok", 100)).unwrap();
        let (g, summary) =
            update_graph(g, &[Observation::Fact(fact("d1", "state", "degraded", 50))]).unwrap();
        assert_eq!(summary.stale, 1);
        assert_eq!(summary.applied, 0);
        assert_eq!(g.fact("d1", "state").unwrap().value, "ok");
    }

    #[test]
    fn new_entity_is_inserted_and_retrievable() {
        let g = KnowledgeGraph::new();
        let obs = Observation::Entity(Entity::new("d7", "d7", EntityKind::Device).at(5));
        let (mut g, summary) = update_graph(g, &[obs]).unwrap();
        assert_eq!(summary.inserted_entities, 1);
        let embedder = HashEmbedder::default();
        index_entities(&mut g, &embedder).unwrap();
        let result = retrieve(&g, &embedder, "d7 device", 1, 0).unwrap();
        assert_eq!(result.candidates[0].0, "d7");
    }

    #[test]
    fn interleaved_updates_converge_regardless_of_order() {
        let observations = vec![
            Observation::Fact(fact("d1", "state", "ok", 10)),
            Observation::Fact(fact("d1", "state", "faulty", 30)),
            Observation::Fact(fact("d1", "state", "degraded", 20)),
            Observation::Entity(Entity::new("d1", "node-one", EntityKind::Device).at(15)),
            Observation::Entity(Entity::new("d1", "node-1", EntityKind::Device).at(25)),
        ];
        let mut reversed = observations.clone();
        reversed.reverse();
        let (g1, _) = update_graph(KnowledgeGraph::new(), &observations).unwrap();
        let (g2, _) = update_graph(KnowledgeGraph::new(), &reversed).unwrap();
        assert_eq!(io::serialize_graph(&g1), io::serialize_graph(&g2));
        assert_eq!(g1.fact("d1", "state").unwrap().value, "faulty");
        assert_eq!(g1.entity("d1").unwrap().name, "node-1");
    }

    #[test]
    fn index_is_idempotent_and_diffs_per_entity() {
        let embedder = HashEmbedder::default();
        let mut g = build_graph(
            &[("a".to_string(), "p".to_string(), "b".to_string())],
            &[fact("a", "k1", "v1", 0)],
        )
        .unwrap();
        index_entities(&mut g, &embedder).unwrap();
        let before_a = indexed_vector(&g, "a").unwrap().clone();
        let before_b = indexed_vector(&g, "b").unwrap().clone();

        // Re-running without changes is byte-identical.
        let mut again = g.clone();
        index_entities(&mut again, &embedder).unwrap();
        assert_eq!(g, again);

        // Touching only `a` changes only a's vector.
        let (mut g, _) =
            update_graph(g, &[Observation::Fact(fact("a", "k2", "v2", 10))]).unwrap();
        index_entities(&mut g, &embedder).unwrap();
        assert_ne!(indexed_vector(&g, "a").unwrap(), &before_a);
        assert_eq!(indexed_vector(&g, "b").unwrap(), &before_b);
    }

    #[test]
    fn empty_graph_indexes_to_empty() {
        let mut g = KnowledgeGraph::new();
        index_entities(&mut g, &HashEmbedder::default()).unwrap();
        assert!(g.index_complete());
        assert!(matches!(
            retrieve(&g, &HashEmbedder::default(), "q", 1, 0),
            Err(NkgError::EmptyGraph)
        ));
    }

    #[test]
    fn hops_zero_returns_only_candidate_facts() {
        let embedder = HashEmbedder::default();
        let mut g = KnowledgeGraph::new();
        g.insert_entity(Entity::new("delay_ms", "delay_ms", EntityKind::Metric)).unwrap();
        g.insert_entity(Entity::new("congestion", "network congestion", EntityKind::FaultType))
            .unwrap();
        g.insert_relation(RelationEdge::new("delay_ms", "indicates", "congestion")).unwrap();
        g.insert_fact(fact("delay_ms", "threshold", "within[0,100]", 0)).unwrap();
        index_entities(&mut g, &embedder).unwrap();

        let r = retrieve(&g, &embedder, "delay_ms metric threshold", 1, 0).unwrap();
        assert_eq!(r.candidates.len(), 1);
        assert_eq!(r.candidates[0].0, "delay_ms");
        assert_eq!(r.subgraph.entities.len(), 1);
        assert!(r.subgraph.relations.is_empty());
        assert_eq!(r.subgraph.facts.len(), 1);
    }

    #[test]
    fn k_larger_than_entity_count_ranks_everything() {
        let embedder = HashEmbedder::default();
        let mut g = build_graph(
            &[("a".to_string(), "p".to_string(), "b".to_string())],
            &[],
        )
        .unwrap();
        index_entities(&mut g, &embedder).unwrap();
        let r = retrieve(&g, &embedder, "anything", 10, 1).unwrap();
        assert_eq!(r.candidates.len(), 2);
        assert!(r.candidates[0].1 >= r.candidates[1].1);
    }

    #[test]
    fn retrieval_matches_brute_force_oracle() {
        use rand::{Rng, SeedableRng};
        let embedder = HashEmbedder::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x1ee7);
        for _ in 0..40 {
            let n = rng.gen_range(2..=40);
            let mut g = KnowledgeGraph::new();
            for i in 0..n {
                let kind = match rng.gen_range(0..3) {
                    0 => EntityKind::Metric,
                    1 => EntityKind::Device,
                    _ => EntityKind::FaultType,
                };
                g.insert_entity(Entity::new(
                    &format!("e{i}"),
                    &format!("name{} tok{}", i, rng.gen_range(0..20)),
                    kind,
                ))
                .unwrap();
            }
            for _ in 0..rng.gen_range(0..100) {
                let a = format!("e{}", rng.gen_range(0..n));
                let b = format!("e{}", rng.gen_range(0..n));
                g.insert_relation(RelationEdge::new(&a, "rel", &b)).unwrap();
            }
            index_entities(&mut g, &embedder).unwrap();
            let query = format!("tok{} name{}", rng.gen_range(0..20), rng.gen_range(0..40));
            let k = rng.gen_range(1..=8);
            let hops = rng.gen_range(0..=3);
            let got = retrieve(&g, &embedder, &query, k, hops).unwrap();

            // Brute force: full ranking + per-candidate BFS union.
            let qv = embedder.embed(&query).unwrap();
            let mut ranked: Vec<(String, f64)> = g
                .entities()
                .map(|e| {
                    let v = embedder.embed(&g.embedding_text(e)).unwrap();
                    (e.id.clone(), qv.dot(&v).unwrap())
                })
                .collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            ranked.truncate(k);
            assert_eq!(got.candidates, ranked);

            let mut visited: BTreeSet<String> = BTreeSet::new();
            for (seed, _) in &ranked {
                let mut frontier = vec![seed.clone()];
                let mut local: BTreeSet<String> = frontier.iter().cloned().collect();
                for _ in 0..hops {
                    let mut next = Vec::new();
                    for v in &frontier {
                        for r in g.relations() {
                            for (x, y) in [(&r.subject, &r.object), (&r.object, &r.subject)] {
                                if x == v && !local.contains(y) {
                                    local.insert(y.clone());
                                    next.push(y.clone());
                                }
                            }
                        }
                    }
                    frontier = next;
                }
                visited.extend(local);
            }
            let got_ids: BTreeSet<String> =
                got.subgraph.entities.iter().map(|e| e.id.clone()).collect();
            assert_eq!(got_ids, visited);
        }
    }

    #[test]
    fn retrieval_is_deterministic() {
        let embedder = HashEmbedder::default();
        let mut g = builtin_graph();
        index_entities(&mut g, &embedder).unwrap();
        let a = retrieve(&g, &embedder, "delay congestion", 5, 2).unwrap();
        let b = retrieve(&g, &embedder, "delay congestion", 5, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn subgraph_closure_holds() {
        let embedder = HashEmbedder::default();
        let mut g = builtin_graph();
        index_entities(&mut g, &embedder).unwrap();
        let hops = 2;
        let r = retrieve(&g, &embedder, "throughput node crash", 3, hops).unwrap();
        // Independent BFS from the candidates must reach every subgraph entity.
        let mut dist: BTreeMap<String, usize> =
            r.candidates.iter().map(|(id, _)| (id.clone(), 0)).collect();
        let mut frontier: Vec<String> = dist.keys().cloned().collect();
        for d in 1..=hops {
            let mut next = Vec::new();
            for rel in g.relations() {
                for (x, y) in [(&rel.subject, &rel.object), (&rel.object, &rel.subject)] {
                    if frontier.contains(x) && !dist.contains_key(y) {
                        dist.insert(y.clone(), d);
                        next.push(y.clone());
                    }
                }
            }
            frontier = next;
        }
        for e in &r.subgraph.entities {
            assert!(
                dist.contains_key(&e.id),
                "{} not reachable within {hops} hops",
                e.id
            );
        }
    }

    #[test]
    fn referential_integrity_survives_fuzzed_operations() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xf00d);
        let mut g = KnowledgeGraph::new();
        for step in 0..500 {
            match rng.gen_range(0..3) {
                0 => {
                    let id = format!("e{}", rng.gen_range(0..30));
                    g.insert_entity(Entity::new(&id, &id, EntityKind::State).at(step)).unwrap();
                }
                1 => {
                    let a = format!("e{}", rng.gen_range(0..40));
                    let b = format!("e{}", rng.gen_range(0..40));
                    g.insert_relation(RelationEdge::new(&a, "p", &b)).unwrap();
                }
                _ => {
                    let e = format!("e{}", rng.gen_range(0..40));
                    let (g2, _) = update_graph(
                        g,
                        &[Observation::Fact(fact(&e, "attr", "v", step))],
                    )
                    .unwrap();
                    g = g2;
                }
            }
            for r in g.relations() {
                assert!(g.entity(&r.subject).is_some() && g.entity(&r.object).is_some());
            }
            for f in g.facts() {
                assert!(g.entity(&f.entity).is_some());
            }
        }
    }

    #[test]
    fn token_economy_triple_form_is_not_longer() {
        let g = builtin_graph();
        let report = token_economy(&g);
        assert!(
            report.triple_chars <= report.prose_chars,
            "triple {} > prose {}",
            report.triple_chars,
            report.prose_chars
        );
    }
}
