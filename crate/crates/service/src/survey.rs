//! The fixed question set shown during a survey session.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ServiceError;

/// The bundled ten-question set.
pub const DEFAULT_QUESTIONS: &str = include_str!("../data/survey_questions.json");

/// What the pipeline is expected to do with a survey question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expected {
    Correct,
    Incorrect,
    NoAnswer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveyQuestion {
    pub id: String,
    pub question: String,
    pub expected: Expected,
}

pub fn parse_questions(text: &str) -> Result<Vec<SurveyQuestion>, ServiceError> {
    let bad = |m: String| ServiceError::Questions(m);
    let questions: Vec<SurveyQuestion> = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    if questions.is_empty() {
        return Err(bad("question set is empty".into()));
    }
    let mut ids = BTreeSet::new();
    for q in &questions {
        if q.id.trim().is_empty() || q.question.trim().is_empty() {
            return Err(bad(format!("question {:?} has an empty id or text", q.id)));
        }
        if !ids.insert(q.id.as_str()) {
            return Err(bad(format!("duplicate question id {:?}", q.id)));
        }
    }
    Ok(questions)
}

pub fn default_questions() -> Vec<SurveyQuestion> {
    parse_questions(DEFAULT_QUESTIONS).expect("bundled question set is valid")
}
