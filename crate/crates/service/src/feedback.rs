//! Survey ratings and the append-only log that stores them.
//!
//! One JSON object per line, each carrying a sequential `id`. A record is
//! acknowledged only after its line has been written and synced.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ServiceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Justification,
    Education,
    Involvement,
    Acceptance,
}

impl Dimension {
    pub const ALL: [Dimension; 4] =
        [Dimension::Justification, Dimension::Education, Dimension::Involvement, Dimension::Acceptance];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Justification => "justification",
            Dimension::Education => "education",
            Dimension::Involvement => "involvement",
            Dimension::Acceptance => "acceptance",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Whether the rated answer was shown with its explanation flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    WithExplanation,
    WithoutExplanation,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::WithExplanation, Mode::WithoutExplanation];
}

pub const MIN_RATING: u8 = 1;
pub const MAX_RATING: u8 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub timestamp: String,
    pub session_id: String,
    pub question_id: String,
    pub mode: Mode,
    /// Always holds all four dimensions, each rated 1 to 5.
    pub ratings: BTreeMap<Dimension, u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredFeedback {
    pub id: u64,
    #[serde(flatten)]
    pub record: FeedbackRecord,
}

/// Validates a submitted record. `now` fills in a missing timestamp.
pub fn parse_feedback(body: &[u8], now: impl FnOnce() -> String) -> Result<FeedbackRecord, String> {
    let value: Value = serde_json::from_slice(body).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = value.as_object().ok_or("feedback must be a JSON object")?;
    let text = |key: &str| -> Result<String, String> {
        match obj.get(key) {
            Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.clone()),
            Some(_) => Err(format!("{key} must be a non-empty string")),
            None => Err(format!("missing field {key}")),
        }
    };
    let session_id = text("session_id")?;
    let question_id = text("question_id")?;
    let timestamp = if obj.contains_key("timestamp") { text("timestamp")? } else { now() };
    let mode: Mode = obj.get("mode").ok_or("missing field mode").and_then(|m| {
        serde_json::from_value(m.clone()).map_err(|_| "mode must be with_explanation or without_explanation")
    })?;
    let raw = obj.get("ratings").and_then(Value::as_object).ok_or("ratings must be an object")?;

    let mut ratings = BTreeMap::new();
    for (key, v) in raw {
        let dim: Dimension =
            serde_json::from_value(Value::String(key.clone())).map_err(|_| format!("unknown dimension {key:?}"))?;
        let r = v
            .as_u64()
            .filter(|r| (u64::from(MIN_RATING)..=u64::from(MAX_RATING)).contains(r))
            .ok_or_else(|| format!("rating for {dim} must be an integer from {MIN_RATING} to {MAX_RATING}, got {v}"))?;
        ratings.insert(dim, r as u8);
    }
    if let Some(missing) = Dimension::ALL.iter().find(|d| !ratings.contains_key(d)) {
        return Err(format!("missing rating for {missing}"));
    }
    Ok(FeedbackRecord { timestamp, session_id, question_id, mode, ratings })
}

/// RFC 3339 time of day in UTC.
pub fn now_rfc3339() -> String {
    time::OffsetDateTime::now_utc()
        .format(&time::format_description::well_known::Rfc3339)
        .expect("current time formats")
}

struct LogState {
    file: File,
    len: u64,
    records: Vec<StoredFeedback>,
}

/// The single writer for the feedback log.
pub struct FeedbackLog {
    path: PathBuf,
    state: Mutex<LogState>,
}

impl FeedbackLog {
    /// Opens or creates the log and reloads existing records. An unterminated
    /// last line was never acknowledged and is cut off.
    pub fn open(path: &Path) -> Result<Self, ServiceError> {
        let io = |e| ServiceError::Io { path: path.to_path_buf(), source: e };
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(io(e)),
        };
        let complete = text.rfind('\n').map_or(0, |i| i + 1);
        let records = parse_log(&text[..complete]).map_err(|(line, message)| ServiceError::CorruptLog {
            path: path.to_path_buf(),
            line,
            message,
        })?;
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        if complete < text.len() {
            file.set_len(complete as u64).map_err(io)?;
        }
        Ok(FeedbackLog {
            path: path.to_path_buf(),
            state: Mutex::new(LogState { file, len: complete as u64, records }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes and syncs the record, then returns it with its new id.
    pub fn append(&self, record: FeedbackRecord) -> Result<StoredFeedback, ServiceError> {
        let mut state = self.state.lock().unwrap_or_else(|p| p.into_inner());
        let id = state.records.last().map_or(1, |r| r.id + 1);
        let stored = StoredFeedback { id, record };
        let mut line = serde_json::to_string(&stored).expect("feedback serializes");
        line.push('\n');

        let written = state
            .file
            .write_all(line.as_bytes())
            .and_then(|()| state.file.flush())
            .and_then(|()| state.file.sync_data());
        if let Err(source) = written {
            // Keep the log line-aligned for the next writer.
            let _ = state.file.set_len(state.len);
            return Err(ServiceError::Io { path: self.path.clone(), source });
        }
        state.len += line.len() as u64;
        state.records.push(stored.clone());
        Ok(stored)
    }

    pub fn records(&self) -> Vec<StoredFeedback> {
        self.state.lock().unwrap_or_else(|p| p.into_inner()).records.clone()
    }

    pub fn summary(&self) -> SurveySummary {
        let state = self.state.lock().unwrap_or_else(|p| p.into_inner());
        summarize(state.records.iter().map(|r| &r.record))
    }
}

fn parse_log(text: &str) -> Result<Vec<StoredFeedback>, (usize, String)> {
    let mut records: Vec<StoredFeedback> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: StoredFeedback = serde_json::from_str(line).map_err(|e| (i + 1, e.to_string()))?;
        let valid = Dimension::ALL
            .iter()
            .all(|d| r.record.ratings.get(d).is_some_and(|v| (MIN_RATING..=MAX_RATING).contains(v)));
        if !valid {
            return Err((i + 1, "ratings must cover all four dimensions with values 1 to 5".into()));
        }
        if let Some(last) = records.last() {
            if r.id <= last.id {
                return Err((i + 1, format!("id {} does not follow {}", r.id, last.id)));
            }
        }
        records.push(r);
    }
    Ok(records)
}

/// Ratings for one dimension under one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingSummary {
    /// Counts for ratings 1 through 5.
    pub histogram: [u64; 5],
    pub count: u64,
    /// Absent when there are no ratings.
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveySummary {
    pub records: u64,
    pub dimensions: BTreeMap<Dimension, BTreeMap<Mode, RatingSummary>>,
}

pub fn summarize<'a>(records: impl IntoIterator<Item = &'a FeedbackRecord>) -> SurveySummary {
    let mut histograms: BTreeMap<(Dimension, Mode), [u64; 5]> = BTreeMap::new();
    let mut n = 0;
    for r in records {
        n += 1;
        for (&dim, &rating) in &r.ratings {
            histograms.entry((dim, r.mode)).or_default()[usize::from(rating - MIN_RATING)] += 1;
        }
    }
    let dimensions = Dimension::ALL
        .into_iter()
        .map(|dim| {
            let modes = Mode::ALL
                .into_iter()
                .map(|mode| {
                    let histogram = histograms.get(&(dim, mode)).copied().unwrap_or_default();
                    let count: u64 = histogram.iter().sum();
                    let total: u64 = histogram.iter().zip(1..).map(|(c, r)| c * r).sum();
                    let mean = (count > 0).then(|| total as f64 / count as f64);
                    (mode, RatingSummary { histogram, count, mean })
                })
                .collect();
            (dim, modes)
        })
        .collect();
    SurveySummary { records: n, dimensions }
}
