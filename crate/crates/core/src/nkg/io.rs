//! Knowledge graph persistence: one record per line, tab-separated, sorted
//! within each section.
//!
//! ```text
//! E\t<id>\t<name>\t<kind>\t<updated_at>
//! R\t<subject>\t<predicate>\t<object>
//! F\t<entity>\t<attribute>\t<value>\t<updated_at>
//! ```
//!
//! The writer is canonical, so write→read→write is byte-identical. The parser
//! also accepts bare `subject\tpredicate\tobject` lines as relations, which
//! keeps hand-written triple files simple.

use std::fs;
use std::path::Path;

use super::{Entity, EntityKind, FactStatement, KnowledgeGraph, NkgError, RelationEdge};

pub fn serialize_graph(g: &KnowledgeGraph) -> String {
    let mut out = String::new();
    for e in g.entities() {
        out.push_str(&format!("E\t{}\t{}\t{}\t{}\n", e.id, e.name, e.kind, e.updated_at));
    }
    for r in g.relations() {
        out.push_str(&format!("R\t{}\t{}\t{}\n", r.subject, r.predicate, r.object));
    }
    for f in g.facts() {
        out.push_str(&format!(
            "F\t{}\t{}\t{}\t{}\n",
            f.entity, f.attribute, f.value, f.updated_at
        ));
    }
    out
}

pub fn parse_graph_text(text: &str) -> Result<KnowledgeGraph, NkgError> {
    let mut g = KnowledgeGraph::new();
    let mut pending_relations = Vec::new();
    let mut pending_facts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let malformed = |message: &str| NkgError::Malformed {
            line: lineno,
            message: message.to_string(),
        };
        match fields.as_slice() {
            ["E", id, name, kind, updated_at] => {
                let kind = EntityKind::from_str_opt(kind)
                    .ok_or_else(|| malformed(&format!("unknown entity kind {kind:?}")))?;
                let updated_at: i64 = updated_at
                    .parse()
                    .map_err(|_| malformed("bad entity timestamp"))?;
                g.insert_entity(Entity::new(id, name, kind).at(updated_at))?;
            }
            ["R", s, p, o] => pending_relations.push(RelationEdge::new(s, p, o)),
            ["F", e, a, v, updated_at] => {
                let updated_at: i64 =
                    updated_at.parse().map_err(|_| malformed("bad fact timestamp"))?;
                pending_facts.push(FactStatement::new(e, a, v).at(updated_at));
            }
            ["F", e, a, v] => pending_facts.push(FactStatement::new(e, a, v)),
            [s, p, o] => pending_relations.push(RelationEdge::new(s, p, o)),
            _ => return Err(malformed("expected E/R/F record or bare triple")),
        }
    }
    // Relations and facts go in after all declared entities so kinds stick.
    for r in pending_relations {
        g.insert_relation(r)?;
    }
    for f in pending_facts {
        g.insert_fact(f)?;
    }
    Ok(g)
}

pub fn save_graph(g: &KnowledgeGraph, path: impl AsRef<Path>) -> Result<(), NkgError> {
    let path = path.as_ref();
    fs::write(path, serialize_graph(g)).map_err(|source| NkgError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<KnowledgeGraph, NkgError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| NkgError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_graph_text(&text)
}
