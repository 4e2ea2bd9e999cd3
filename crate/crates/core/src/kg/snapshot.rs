//! Reloadable store snapshot.
//!
//! Layout (UTF-8, `\n` line endings):
//!
//! ```text
//! qaexplain-kg-snapshot 1
//! label <label-predicate-iri>
//! alt-label <iri>                      (zero or more)
//! synonym <TAB> surface <TAB> <iri>    (zero or more, sorted)
//! triples <count>
//! <canonical N-Triples, sorted>
//! ```
//!
//! Writing is canonical, so `write(read(write(s))) == write(s)` byte for byte.

use std::fmt::Write as _;

use super::{parse_ntriples, Graph, GraphOptions, Iri, KgError};

pub const SNAPSHOT_MAGIC: &str = "qaexplain-kg-snapshot";
const VERSION: u32 = 1;

/// A graph plus the relation synonym lexicon shipped alongside it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub graph: Graph,
    pub relation_synonyms: Vec<(String, Iri)>,
}

pub fn write_snapshot(snapshot: &Snapshot) -> String {
    let graph = &snapshot.graph;
    let mut out = String::new();
    writeln!(out, "{SNAPSHOT_MAGIC} {VERSION}").expect("write to String");
    writeln!(out, "label {}", graph.options().label_predicate).expect("write to String");
    for alt in &graph.options().alt_label_predicates {
        writeln!(out, "alt-label {alt}").expect("write to String");
    }
    let mut synonyms = snapshot.relation_synonyms.clone();
    synonyms.sort();
    synonyms.dedup();
    for (surface, iri) in &synonyms {
        writeln!(out, "synonym\t{surface}\t{iri}").expect("write to String");
    }
    writeln!(out, "triples {}", graph.len()).expect("write to String");
    out.push_str(&graph.to_ntriples());
    out
}

/// Reads either a snapshot or plain N-Triples (with no synonyms).
pub fn read_store(text: &str) -> Result<Snapshot, KgError> {
    if text.starts_with(SNAPSHOT_MAGIC) {
        read_snapshot(text)
    } else {
        Ok(Snapshot { graph: Graph::load_ntriples(text)?, relation_synonyms: Vec::new() })
    }
}

pub fn read_snapshot(text: &str) -> Result<Snapshot, KgError> {
    let err = |m: String| KgError::Snapshot(m);
    let mut lines = text.split_inclusive('\n');
    let mut consumed = 0usize;
    let mut next_line = |consumed: &mut usize| -> Option<&str> {
        let l = lines.next()?;
        *consumed += l.len();
        Some(l.trim_end_matches('\n'))
    };

    let header = next_line(&mut consumed).ok_or_else(|| err("empty snapshot".into()))?;
    match header.split_once(' ') {
        Some((SNAPSHOT_MAGIC, v)) if v == VERSION.to_string() => {}
        Some((SNAPSHOT_MAGIC, v)) => return Err(err(format!("unsupported version {v}"))),
        _ => return Err(err("missing snapshot header".into())),
    }

    let parse_iri = |s: &str| -> Result<Iri, KgError> {
        let inner = s
            .strip_prefix('<')
            .and_then(|s| s.strip_suffix('>'))
            .ok_or_else(|| err(format!("expected <iri>, found {s:?}")))?;
        Iri::new(inner)
    };

    let mut label = None;
    let mut alts = Vec::new();
    let mut synonyms = Vec::new();
    let count: usize = loop {
        let line = next_line(&mut consumed).ok_or_else(|| err("missing triples section".into()))?;
        if let Some(rest) = line.strip_prefix("label ") {
            label = Some(parse_iri(rest)?);
        } else if let Some(rest) = line.strip_prefix("alt-label ") {
            alts.push(parse_iri(rest)?);
        } else if let Some(rest) = line.strip_prefix("synonym\t") {
            let (surface, iri) = rest.split_once('\t').ok_or_else(|| err(format!("bad synonym record {rest:?}")))?;
            synonyms.push((surface.to_string(), parse_iri(iri)?));
        } else if let Some(rest) = line.strip_prefix("triples ") {
            break rest.parse().map_err(|_| err(format!("bad triple count {rest:?}")))?;
        } else {
            return Err(err(format!("unexpected header line {line:?}")));
        }
    };
    let label_predicate = label.ok_or_else(|| err("missing label predicate".into()))?;
    let body = &text[consumed..];
    let triples = parse_ntriples(body)?;
    let graph = Graph::from_triples(triples, GraphOptions { label_predicate, alt_label_predicates: alts });
    if graph.len() != count {
        return Err(err(format!("expected {count} triples, found {}", graph.len())));
    }
    Ok(Snapshot { graph, relation_synonyms: synonyms })
}
