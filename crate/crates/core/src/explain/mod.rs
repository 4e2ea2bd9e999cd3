//! Template repository and rendering of natural-language explanations.
//!
//! Templates are data. A template is chosen by task, outcome class, the
//! number of output items and the dominant part of speech of the matched
//! words; its placeholders are then filled from the component output.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::components::{ComponentOutput, Task, TokenSpan};
use crate::kg::PrefixTable;
use crate::outcome::OutcomeClass;
use crate::question::PosTag;

/// The repository shipped with the crate.
pub const DEFAULT_TEMPLATES: &str = include_str!("../../templates/default.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Arity {
    Exactly(usize),
    Any,
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arity::Exactly(n) => write!(f, "{n}"),
            Arity::Any => f.write_str("*"),
        }
    }
}

impl Serialize for Arity {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Arity::Exactly(n) => s.serialize_u64(*n as u64),
            Arity::Any => s.serialize_str("*"),
        }
    }
}

impl<'de> Deserialize<'de> for Arity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(usize),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) => Ok(Arity::Exactly(n)),
            Raw::S(s) if s == "*" => Ok(Arity::Any),
            Raw::S(s) => Err(serde::de::Error::custom(format!("invalid arity {s:?}"))),
        }
    }
}

/// Part-of-speech variant of a template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "PROPN")]
    Propn,
    #[serde(rename = "NOUN")]
    Noun,
}

impl Variant {
    pub fn from_tag(tag: PosTag) -> Option<Self> {
        match tag {
            PosTag::Propn => Some(Variant::Propn),
            PosTag::Noun => Some(Variant::Noun),
            _ => None,
        }
    }

    fn of_spans<'a>(spans: impl IntoIterator<Item = &'a TokenSpan>, tags: &[PosTag]) -> Option<Self> {
        let mut merged: Vec<PosTag> = Vec::new();
        for s in spans {
            merged.extend(tags.get(s.start..s.end.min(tags.len())).unwrap_or(&[]));
        }
        let whole = TokenSpan { start: 0, end: merged.len(), text: String::new() };
        whole.dominant_pos(&merged).and_then(Variant::from_tag)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanationTemplate {
    pub id: String,
    pub task: Task,
    pub outcome_class: OutcomeClass,
    pub arity: Arity,
    pub variant: Option<Variant>,
    pub pattern: String,
}

impl ExplanationTemplate {
    pub fn placeholders(&self) -> Vec<&str> {
        segments(&self.pattern)
            .into_iter()
            .filter_map(|s| match s {
                Segment::Slot(name) => Some(name),
                Segment::Text(_) => None,
            })
            .collect()
    }
}

/// Placeholders each task may use.
pub fn placeholder_vocabulary(task: Task) -> &'static [&'static str] {
    match task {
        Task::Ned => &["surface", "entity", "stage"],
        Task::Rl => &["surface", "predicate", "stage"],
        Task::Qb => &["query", "stage"],
    }
}

/// Placeholders that need at least one output item.
const ITEM_PLACEHOLDERS: [&str; 4] = ["surface", "entity", "predicate", "query"];

enum Segment<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn is_slot_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_lowercase() || c == '_')
}

fn segments(pattern: &str) -> Vec<Segment<'_>> {
    let mut out = Vec::new();
    let mut rest = pattern;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_slot_name(&after[..close]) => {
                if open > 0 {
                    out.push(Segment::Text(&rest[..open]));
                }
                out.push(Segment::Slot(&after[..close]));
                rest = &after[close + 1..];
            }
            _ => {
                out.push(Segment::Text(&rest[..open + 1]));
                rest = after;
            }
        }
    }
    if !rest.is_empty() {
        out.push(Segment::Text(rest));
    }
    out
}

/// True when `text` still contains a `{name}` placeholder.
pub fn has_unresolved_placeholder(text: &str) -> bool {
    segments(text).iter().any(|s| matches!(s, Segment::Slot(_)))
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("template {id}: duplicate id")]
    DuplicateId { id: String },
    #[error("template {id}: unknown placeholder {{{placeholder}}} for task {task}")]
    UnknownPlaceholder { id: String, placeholder: String, task: Task },
    #[error("template {id}: arity 0 cannot use {{{placeholder}}}")]
    ItemPlaceholderWithoutItems { id: String, placeholder: String },
    #[error("missing templates for {}", format_pairs(.0))]
    Coverage(Vec<(Task, OutcomeClass)>),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

fn format_pairs(pairs: &[(Task, OutcomeClass)]) -> String {
    pairs.iter().map(|(t, c)| format!("({t}, {c})")).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RenderError {
    #[error(
        "template {template}: no value for {{{placeholder}}}; predicted class disagrees with the component output"
    )]
    Unfillable { template: String, placeholder: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    pub task: Task,
    pub outcome_class: OutcomeClass,
    pub template_id: String,
    pub text: String,
    /// Set when the classifier's prediction was overruled by the output.
    pub mismatch: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TemplateRepository {
    templates: Vec<ExplanationTemplate>,
}

const KEYS: [&str; 6] = ["id", "task", "class", "arity", "variant", "text"];

fn parse_record(lines: &[(usize, &str)]) -> Result<ExplanationTemplate, TemplateError> {
    let mut fields: BTreeMap<&str, (usize, String)> = BTreeMap::new();
    let mut in_text = false;
    for &(line, raw) in lines {
        let err = |message: String| TemplateError::Syntax { line, message };
        let header = raw.split_once(':').map(|(k, v)| (k.trim(), v.trim())).filter(|(k, _)| KEYS.contains(k));
        match header {
            Some((key, value)) if !raw.starts_with(char::is_whitespace) => {
                if fields.insert(key, (line, value.to_string())).is_some() {
                    return Err(err(format!("duplicate field {key:?}")));
                }
                in_text = key == "text";
            }
            _ if in_text => {
                let text = &mut fields.get_mut("text").expect("text field open").1;
                if !text.is_empty() {
                    text.push(' ');
                }
                text.push_str(raw.trim());
            }
            _ => return Err(err(format!("expected `key: value`, found {raw:?}"))),
        }
    }
    let first = lines[0].0;
    let get = |key: &str| {
        fields.get(key).ok_or_else(|| TemplateError::Syntax { line: first, message: format!("record lacks {key:?}") })
    };
    let bad = |(line, _): &(usize, String), message: String| TemplateError::Syntax { line: *line, message };

    let id = get("id")?;
    if id.1.is_empty() {
        return Err(bad(id, "empty id".into()));
    }
    let task = get("task")?;
    let task_value = task.1.parse::<Task>().map_err(|e| bad(task, e))?;
    let class = get("class")?;
    let class_value = class.1.parse::<OutcomeClass>().map_err(|e| bad(class, e))?;
    let arity = get("arity")?;
    let arity_value = match arity.1.as_str() {
        "*" => Arity::Any,
        n => Arity::Exactly(n.parse().map_err(|_| bad(arity, format!("invalid arity {n:?}")))?),
    };
    let variant = match fields.get("variant") {
        None => None,
        Some(v) => Some(match v.1.to_ascii_uppercase().as_str() {
            "PROPN" => Variant::Propn,
            "NOUN" => Variant::Noun,
            other => return Err(bad(v, format!("unknown variant {other:?} (expected PROPN or NOUN)"))),
        }),
    };
    let text = get("text")?;
    if text.1.is_empty() {
        return Err(bad(text, "empty text".into()));
    }
    Ok(ExplanationTemplate {
        id: id.1.clone(),
        task: task_value,
        outcome_class: class_value,
        arity: arity_value,
        variant,
        pattern: text.1.clone(),
    })
}

impl TemplateRepository {
    /// Parses the template file format; see `templates/default.txt`.
    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        let mut records: Vec<Vec<(usize, &str)>> = vec![Vec::new()];
        for (i, line) in text.lines().enumerate() {
            if line.trim_start().starts_with('#') {
                continue;
            }
            if line.trim().is_empty() {
                if !records.last().expect("non-empty").is_empty() {
                    records.push(Vec::new());
                }
                continue;
            }
            records.last_mut().expect("non-empty").push((i + 1, line));
        }
        let templates =
            records.iter().filter(|r| !r.is_empty()).map(|r| parse_record(r)).collect::<Result<Vec<_>, _>>()?;
        Self::from_templates(templates)
    }

    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TemplateError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text)
    }

    pub fn shipped() -> Self {
        Self::parse(DEFAULT_TEMPLATES).expect("shipped templates are valid")
    }

    pub fn from_templates(templates: Vec<ExplanationTemplate>) -> Result<Self, TemplateError> {
        let mut ids = BTreeSet::new();
        for t in &templates {
            if !ids.insert(t.id.as_str()) {
                return Err(TemplateError::DuplicateId { id: t.id.clone() });
            }
            let vocabulary = placeholder_vocabulary(t.task);
            for p in t.placeholders() {
                if !vocabulary.contains(&p) {
                    return Err(TemplateError::UnknownPlaceholder {
                        id: t.id.clone(),
                        placeholder: p.to_string(),
                        task: t.task,
                    });
                }
                if t.arity == Arity::Exactly(0) && ITEM_PLACEHOLDERS.contains(&p) {
                    return Err(TemplateError::ItemPlaceholderWithoutItems { id: t.id.clone(), placeholder: p.into() });
                }
            }
        }
        let missing: Vec<(Task, OutcomeClass)> = Task::ALL
            .iter()
            .flat_map(|&task| OutcomeClass::ALL.iter().map(move |&class| (task, class)))
            .filter(|&(task, class)| !templates.iter().any(|t| t.task == task && t.outcome_class == class))
            .collect();
        if !missing.is_empty() {
            return Err(TemplateError::Coverage(missing));
        }
        Ok(TemplateRepository { templates })
    }

    pub fn templates(&self) -> &[ExplanationTemplate] {
        &self.templates
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ExplanationTemplate> {
        self.templates.iter().find(|t| t.id == id)
    }

    /// Among the templates for `(task, class)`: exact arity beats a
    /// one-item template (rendered per item) which beats a wildcard; a
    /// matching variant beats no variant, a conflicting variant is never
    /// taken; remaining ties go to the smallest id.
    pub fn select(
        &self,
        task: Task,
        class: OutcomeClass,
        arity: usize,
        variant: Option<Variant>,
    ) -> &ExplanationTemplate {
        let pair = || self.templates.iter().filter(|t| t.task == task && t.outcome_class == class);
        pair()
            .filter_map(|t| {
                let arity_rank = match t.arity {
                    Arity::Exactly(n) if n == arity => 0,
                    Arity::Exactly(1) if arity >= 2 => 1,
                    Arity::Any => 2,
                    Arity::Exactly(_) => return None,
                };
                let variant_rank = match (t.variant, variant) {
                    (None, _) => 1,
                    (Some(a), Some(b)) if a == b => 0,
                    (Some(_), _) => return None,
                };
                Some(((arity_rank, variant_rank, t.id.as_str()), t))
            })
            .min_by(|a, b| a.0.cmp(&b.0))
            .map(|(_, t)| t)
            .or_else(|| pair().min_by(|a, b| a.id.cmp(&b.id)))
            .expect("coverage guarantees a template for every task and class")
    }

    /// Explanations for one stage. Success for NED and RL yields one
    /// explanation per linked item unless the chosen template is written for
    /// the exact item count; everything else yields a single explanation.
    pub fn explain(
        &self,
        class: OutcomeClass,
        output: &ComponentOutput,
        tags: &[PosTag],
        prefixes: &PrefixTable,
        mismatch: bool,
    ) -> Result<Vec<Explanation>, RenderError> {
        let task = output.task();
        let arity = output.arity();
        let spans = output.spans();
        let chosen = self.select(task, class, arity, Variant::of_spans(spans.iter().copied(), tags));
        let per_item =
            class == OutcomeClass::Success && task != Task::Qb && arity >= 1 && chosen.arity != Arity::Exactly(arity);
        let wrap = |t: &ExplanationTemplate, text: String| Explanation {
            task,
            outcome_class: class,
            template_id: t.id.clone(),
            text,
            mismatch,
        };
        if !per_item {
            let text = render(chosen, &Slots::for_output(output, None, prefixes))?;
            return Ok(vec![wrap(chosen, text)]);
        }
        (0..arity)
            .map(|i| {
                let t = self.select(task, class, 1, Variant::of_spans([spans[i]], tags));
                Ok(wrap(t, render(t, &Slots::for_output(output, Some(i), prefixes))?))
            })
            .collect()
    }
}

/// Placeholder values; `None` means the output cannot supply it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Slots {
    pub surface: Option<String>,
    pub entity: Option<String>,
    pub predicate: Option<String>,
    pub query: Option<String>,
    pub stage: Option<String>,
}

/// "a", "a and b", "a, b and c".
fn join_list(items: Vec<String>) -> Option<String> {
    match items.len() {
        0 => None,
        1 => items.into_iter().next(),
        n => Some(format!("{} and {}", items[..n - 1].join(", "), items[n - 1])),
    }
}

impl Slots {
    /// Values for the whole output, or for item `item` only.
    pub fn for_output(output: &ComponentOutput, item: Option<usize>, prefixes: &PrefixTable) -> Self {
        let pick = |n: usize| -> Vec<usize> {
            match item {
                Some(i) if i < n => vec![i],
                Some(_) => Vec::new(),
                None => (0..n).collect(),
            }
        };
        let ents = output.entity_links();
        let rels = output.relation_links();
        let surfaces: Vec<String> = match output.task() {
            Task::Ned => pick(ents.len()).into_iter().map(|i| ents[i].span.text.clone()).collect(),
            Task::Rl => pick(rels.len()).into_iter().map(|i| rels[i].span.text.clone()).collect(),
            Task::Qb => Vec::new(),
        };
        Slots {
            surface: join_list(surfaces),
            entity: join_list(pick(ents.len()).into_iter().map(|i| prefixes.compact(&ents[i].entity)).collect()),
            predicate: join_list(pick(rels.len()).into_iter().map(|i| prefixes.compact(&rels[i].predicate)).collect()),
            query: output.built_query().map(|q| prefixes.render_query(q)),
            stage: Some(output.task().stage_name().to_string()),
        }
    }

    fn value(&self, name: &str) -> Option<&str> {
        match name {
            "surface" => self.surface.as_deref(),
            "entity" => self.entity.as_deref(),
            "predicate" => self.predicate.as_deref(),
            "query" => self.query.as_deref(),
            "stage" => self.stage.as_deref(),
            _ => None,
        }
    }
}

/// Substitutes every placeholder in one pass, so values are never
/// re-scanned for braces.
pub fn render(template: &ExplanationTemplate, slots: &Slots) -> Result<String, RenderError> {
    let mut out = String::with_capacity(template.pattern.len() + 32);
    for seg in segments(&template.pattern) {
        match seg {
            Segment::Text(t) => out.push_str(t),
            Segment::Slot(name) => out.push_str(slots.value(name).ok_or_else(|| RenderError::Unfillable {
                template: template.id.clone(),
                placeholder: name.to_string(),
            })?),
        }
    }
    Ok(out)
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "PROPN" => Ok(Variant::Propn),
            "NOUN" => Ok(Variant::Noun),
            _ => Err(format!("unknown variant {s:?}")),
        }
    }
}
