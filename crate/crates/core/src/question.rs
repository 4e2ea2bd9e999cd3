//! Tokenization, rule-based POS tagging and the binary question features the
//! outcome classifiers are trained on.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
}

impl Question {
    /// `None` for blank text.
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Option<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return None;
        }
        let tokens = tokenize(&text);
        Some(Question { id: id.into(), text, tokens })
    }

    /// Id derived from the text (FNV-1a), for ad-hoc questions.
    pub fn from_text(text: impl Into<String>) -> Option<Self> {
        let text = text.into();
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        Question::new(format!("q{hash:016x}"), text)
    }

    pub fn pos_tags(&self) -> Vec<PosTag> {
        pos_tag(&self.tokens)
    }
}

fn is_punct_char(c: char) -> bool {
    c.is_ascii_punctuation() || matches!(c, '“' | '”' | '‘' | '’' | '…' | '¿' | '¡')
}

/// Whitespace split with trailing punctuation detached, one token per mark.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let body = chunk.trim_end_matches(is_punct_char);
        if body.is_empty() {
            out.extend(chunk.chars().map(String::from));
            continue;
        }
        out.push(body.to_string());
        out.extend(chunk[body.len()..].chars().map(String::from));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Noun,
    Propn,
    Verb,
    Adj,
    Adv,
    Pron,
    Det,
    Adp,
    Num,
    Aux,
    Wh,
    Punct,
    Other,
}

impl PosTag {
    pub const ALL: [PosTag; 13] = [
        PosTag::Noun,
        PosTag::Propn,
        PosTag::Verb,
        PosTag::Adj,
        PosTag::Adv,
        PosTag::Pron,
        PosTag::Det,
        PosTag::Adp,
        PosTag::Num,
        PosTag::Aux,
        PosTag::Wh,
        PosTag::Punct,
        PosTag::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PosTag::Noun => "NOUN",
            PosTag::Propn => "PROPN",
            PosTag::Verb => "VERB",
            PosTag::Adj => "ADJ",
            PosTag::Adv => "ADV",
            PosTag::Pron => "PRON",
            PosTag::Det => "DET",
            PosTag::Adp => "ADP",
            PosTag::Num => "NUM",
            PosTag::Aux => "AUX",
            PosTag::Wh => "WH",
            PosTag::Punct => "PUNCT",
            PosTag::Other => "OTHER",
        }
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const WH_WORDS: &[&str] = &["who", "whom", "whose", "what", "which", "when", "where", "why", "how"];
const AUXILIARIES: &[&str] = &[
    "is", "are", "was", "were", "am", "be", "been", "being", "do", "does", "did", "has", "have", "had", "can", "could",
    "will", "would", "shall", "should", "may", "might", "must",
];
const DETERMINERS: &[&str] =
    &["a", "an", "the", "this", "that", "these", "those", "all", "any", "some", "each", "every", "no"];
const ADPOSITIONS: &[&str] = &[
    "in", "of", "on", "at", "by", "for", "with", "from", "to", "into", "about", "as", "through", "after", "before",
    "under", "over", "between", "during", "near", "since", "than", "within",
];
const PRONOUNS: &[&str] = &[
    "i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them", "his", "its", "their", "our", "my",
    "your", "me", "someone", "anyone",
];
// Verbs that carry KG relations in typical factoid questions.
const VERBS: &[&str] = &[
    "win",
    "won",
    "wins",
    "play",
    "played",
    "write",
    "wrote",
    "written",
    "direct",
    "directed",
    "found",
    "founded",
    "born",
    "die",
    "died",
    "marry",
    "married",
    "star",
    "starred",
    "starring",
    "produce",
    "produced",
    "live",
    "lived",
    "lead",
    "led",
    "locate",
    "located",
    "list",
    "give",
    "show",
    "name",
    "tell",
    "study",
    "studied",
    "work",
    "worked",
    "own",
    "owns",
    "owned",
    "speak",
    "spoken",
    "flow",
    "flows",
    "receive",
    "received",
    "create",
    "created",
    "develop",
    "developed",
    "design",
    "designed",
    "invent",
    "invented",
    "discover",
    "discovered",
    "belong",
    "belongs",
];
const ADJECTIVES: &[&str] = &[
    "big", "bigger", "biggest", "large", "larger", "largest", "small", "smaller", "smallest", "high", "higher",
    "highest", "long", "longer", "longest", "old", "older", "oldest", "new", "first", "last", "official", "famous",
    "current", "total", "many", "much", "former",
];
const NOT_ADVERBS: &[&str] = &["family", "italy", "july", "fly", "supply", "reply", "assembly", "ally"];

fn is_number(token: &str) -> bool {
    let digits = token.chars().filter(char::is_ascii_digit).count();
    digits > 0 && token.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | ',' | '-'))
}

fn starts_upper(token: &str) -> bool {
    token.chars().next().is_some_and(char::is_uppercase)
}

/// Lexicon-first deterministic tagger.
///
/// Order: punctuation, closed-class lists, digits, capitalization (not for
/// the first token), verb lexicon, `-ing`/`-ed` after an auxiliary, the
/// content verb of a do-support question, adjective lexicon and suffixes,
/// `-ly`, and finally `NOUN`.
pub fn pos_tag(tokens: &[String]) -> Vec<PosTag> {
    let mut tags = Vec::with_capacity(tokens.len());
    let mut seen_aux = false;
    let do_support = tokens.first().is_some_and(|t| matches!(t.to_lowercase().as_str(), "do" | "does" | "did"));
    let mut do_verb_assigned = false;
    for (i, token) in tokens.iter().enumerate() {
        let lower = token.to_lowercase();
        let w = lower.as_str();
        let tag = if token.chars().all(is_punct_char) {
            PosTag::Punct
        } else if !token.chars().any(char::is_alphanumeric) {
            PosTag::Other
        } else if WH_WORDS.contains(&w) {
            PosTag::Wh
        } else if AUXILIARIES.contains(&w) {
            PosTag::Aux
        } else if DETERMINERS.contains(&w) {
            PosTag::Det
        } else if ADPOSITIONS.contains(&w) {
            PosTag::Adp
        } else if PRONOUNS.contains(&w) {
            PosTag::Pron
        } else if is_number(token) {
            PosTag::Num
        } else if i > 0 && starts_upper(token) {
            PosTag::Propn
        } else if VERBS.contains(&w) || (seen_aux && w.len() > 4 && (w.ends_with("ing") || w.ends_with("ed"))) {
            PosTag::Verb
        } else if do_support && !do_verb_assigned && i > 1 && tags.last() == Some(&PosTag::Propn) {
            // "Did Tesla win ..."
            PosTag::Verb
        } else if ADJECTIVES.contains(&w)
            || (w.len() > 5 && (w.ends_with("est") || w.ends_with("ous") || w.ends_with("ful")))
        {
            PosTag::Adj
        } else if w.len() > 3 && w.ends_with("ly") && !NOT_ADVERBS.contains(&w) {
            PosTag::Adv
        } else {
            PosTag::Noun
        };
        if tag == PosTag::Aux {
            seen_aux = true;
        }
        if do_support && tag == PosTag::Verb && i > 1 {
            do_verb_assigned = true;
        }
        tags.push(tag);
    }
    tags
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Headword {
    Who,
    What,
    Which,
    When,
    Where,
    How,
    BooleanAux,
    Other,
}

impl Headword {
    pub const ALL: [Headword; 8] = [
        Headword::Who,
        Headword::What,
        Headword::Which,
        Headword::When,
        Headword::Where,
        Headword::How,
        Headword::BooleanAux,
        Headword::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Headword::Who => "who",
            Headword::What => "what",
            Headword::Which => "which",
            Headword::When => "when",
            Headword::Where => "where",
            Headword::How => "how",
            Headword::BooleanAux => "boolean_aux",
            Headword::Other => "other",
        }
    }
}

const BOOLEAN_AUX: &[&str] = &[
    "is", "are", "was", "were", "am", "do", "does", "did", "has", "have", "had", "can", "could", "will", "would",
    "should", "shall", "may", "might", "must",
];

pub fn headword(question: &Question) -> Headword {
    let Some(first) = question.tokens.first() else {
        return Headword::Other;
    };
    match first.to_lowercase().as_str() {
        "who" | "whom" | "whose" => Headword::Who,
        "what" => Headword::What,
        "which" => Headword::Which,
        "when" => Headword::When,
        "where" => Headword::Where,
        "how" => Headword::How,
        w if BOOLEAN_AUX.contains(&w) => Headword::BooleanAux,
        _ => Headword::Other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerType {
    Boolean,
    Number,
    List,
    Other,
}

impl AnswerType {
    pub const ALL: [AnswerType; 4] = [AnswerType::Boolean, AnswerType::Number, AnswerType::List, AnswerType::Other];

    pub fn name(self) -> &'static str {
        match self {
            AnswerType::Boolean => "boolean",
            AnswerType::Number => "number",
            AnswerType::List => "list",
            AnswerType::Other => "other",
        }
    }
}

fn is_plural_noun(word: &str) -> bool {
    let w = word.to_lowercase();
    w.len() > 3 && w.ends_with('s') && !(w.ends_with("ss") || w.ends_with("us") || w.ends_with("is"))
}

/// Precedence: boolean > number > list > other.
pub fn answer_type(question: &Question) -> AnswerType {
    let head = headword(question);
    if head == Headword::BooleanAux {
        return AnswerType::Boolean;
    }
    let lower: Vec<String> = question.tokens.iter().map(|t| t.to_lowercase()).collect();
    let first = lower.first().map(String::as_str);
    let second = lower.get(1).map(String::as_str);
    match (first, second) {
        (Some("how"), Some("many" | "much")) | (Some("total"), Some("number")) | (Some("count"), _) => {
            return AnswerType::Number
        }
        _ => {}
    }
    if matches!(first, Some("list" | "give" | "show" | "name")) {
        return AnswerType::List;
    }
    if matches!(head, Headword::Who | Headword::What | Headword::Which) {
        let tags = question.pos_tags();
        let head_noun = question
            .tokens
            .iter()
            .zip(&tags)
            .skip(1)
            .find(|(_, t)| !matches!(t, PosTag::Aux | PosTag::Det | PosTag::Adj));
        if let Some((token, PosTag::Noun)) = head_noun {
            if is_plural_noun(token) {
                return AnswerType::List;
            }
        }
    }
    AnswerType::Other
}

/// Ordered feature names plus a version; stored with every trained model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub version: u32,
    pub names: Vec<String>,
}

impl FeatureSchema {
    pub const LENGTH_BUCKETS: [&'static str; 3] = ["len_le_5", "len_6_8", "len_ge_9"];

    /// 3 length buckets, 8 headwords, 4 answer types, 13 POS presence flags.
    pub fn v1() -> Arc<FeatureSchema> {
        static SCHEMA: OnceLock<Arc<FeatureSchema>> = OnceLock::new();
        SCHEMA
            .get_or_init(|| {
                let mut names: Vec<String> = Self::LENGTH_BUCKETS.iter().map(|s| s.to_string()).collect();
                names.extend(Headword::ALL.iter().map(|h| format!("headword_{}", h.name())));
                names.extend(AnswerType::ALL.iter().map(|a| format!("answer_{}", a.name())));
                names.extend(PosTag::ALL.iter().map(|p| format!("pos_{}", p.name())));
                Arc::new(FeatureSchema { version: 1, names })
            })
            .clone()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub schema: Arc<FeatureSchema>,
    pub values: Vec<u8>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<u8> {
        self.schema.index_of(name).map(|i| self.values[i])
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }
}

/// Number of tokens ignoring trailing punctuation.
pub fn word_count(tokens: &[String]) -> usize {
    let trailing = tokens.iter().rev().take_while(|t| t.chars().all(is_punct_char)).count();
    tokens.len() - trailing
}

pub fn extract_features(question: &Question) -> FeatureVector {
    let schema = FeatureSchema::v1();
    let mut values = Vec::with_capacity(schema.len());

    let words = word_count(&question.tokens);
    values.extend([u8::from(words <= 5), u8::from((6..=8).contains(&words)), u8::from(words >= 9)]);

    let head = headword(question);
    values.extend(Headword::ALL.iter().map(|&h| u8::from(h == head)));

    let answer = answer_type(question);
    values.extend(AnswerType::ALL.iter().map(|&a| u8::from(a == answer)));

    let tags = question.pos_tags();
    values.extend(PosTag::ALL.iter().map(|p| u8::from(tags.contains(p))));

    debug_assert_eq!(values.len(), schema.len());
    FeatureVector { schema, values }
}
