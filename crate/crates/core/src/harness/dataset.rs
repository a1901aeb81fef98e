//! Line-delimited JSON datasets of questions with pre-retrieved documents.
//!
//! One object per line:
//! `{"id", "question", "task_kind", "choices"?: [{"label", "text"}], "answers": [..], "documents": [{"id", "title", "text"}]}`

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{Error, Result};
use crate::model::{Choice, Document, Query, Question, TaskKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetRecord {
    pub query: Query,
    /// Ranked retrieval results, best first.
    pub documents: Vec<Document>,
}

impl DatasetRecord {
    /// Fewer documents than the configured retrieval depth.
    pub fn is_short(&self, top_n: usize) -> bool {
        self.documents.len() < top_n
    }

    pub fn top_documents(&self, top_n: usize) -> &[Document] {
        &self.documents[..self.documents.len().min(top_n)]
    }
}

/// Serialized form of one dataset line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetLine {
    pub id: String,
    pub question: String,
    pub task_kind: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<Vec<Choice>>,
    pub answers: Vec<String>,
    pub documents: Vec<Document>,
}

impl DatasetLine {
    pub fn into_record(self) -> Result<DatasetRecord, String> {
        let question = Question {
            id: self.id,
            text: self.question,
            task_kind: self.task_kind,
            choices: self.choices,
        };
        question.validate()?;
        let mut seen = HashSet::new();
        for d in &self.documents {
            if d.text.is_empty() {
                return Err(format!("document {:?} has empty text", d.id));
            }
            if !seen.insert(d.id.as_str()) {
                return Err(format!("duplicate document id {:?}", d.id));
            }
        }
        Ok(DatasetRecord {
            query: Query::new(question, self.answers),
            documents: self.documents,
        })
    }
}

impl From<&DatasetRecord> for DatasetLine {
    fn from(r: &DatasetRecord) -> Self {
        let q = r.query.question();
        Self {
            id: q.id.clone(),
            question: q.text.clone(),
            task_kind: q.task_kind,
            choices: q.choices.clone(),
            answers: r.query.gold_answers().to_vec(),
            documents: r.documents.clone(),
        }
    }
}

/// Parses dataset text; errors carry 1-based line numbers. Blank lines are
/// skipped.
pub fn parse_dataset(text: &str) -> Result<Vec<DatasetRecord>> {
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: DatasetLine = serde_json::from_str(line).map_err(|e| Error::Dataset {
            line: line_no,
            message: e.to_string(),
        })?;
        let record = parsed.into_record().map_err(|message| Error::Dataset {
            line: line_no,
            message,
        })?;
        if !ids.insert(record.query.id().to_string()) {
            return Err(Error::Dataset {
                line: line_no,
                message: format!("duplicate query id {:?}", record.query.id()),
            });
        }
        records.push(record);
    }
    if records.is_empty() {
        warn!("dataset contains no records");
    }
    Ok(records)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_dataset(&text)
}

pub fn write_dataset(path: impl AsRef<Path>, records: &[DatasetRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&DatasetLine::from(r))?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
