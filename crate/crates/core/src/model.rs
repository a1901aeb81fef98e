//! Domain types shared across the pipeline.
//!
//! A [`Query`] carries gold answers for evaluation; drafting and verification
//! only ever receive the gold-free [`Question`] view of it.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    FreeForm,
    ClosedSetBoolean,
    ClosedSetChoice,
}

/// One labelled option of a multiple-choice question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub label: String,
    pub text: String,
}

/// The posed task without any evaluation data attached.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    pub task_kind: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<Vec<Choice>>,
}

impl Question {
    /// Instruction text as shown to models: the question followed by the
    /// choice list for multiple-choice tasks.
    pub fn instruction(&self) -> String {
        match &self.choices {
            Some(choices) if !choices.is_empty() => {
                let mut out = self.text.clone();
                for c in choices {
                    out.push(' ');
                    out.push_str(&c.label);
                    out.push_str(". ");
                    out.push_str(&c.text);
                }
                out
            }
            _ => self.text.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("query id must be non-empty".into());
        }
        let has_choices = self.choices.as_ref().is_some_and(|c| !c.is_empty());
        match (self.task_kind, has_choices) {
            (TaskKind::ClosedSetChoice, false) => {
                Err(format!("query {}: closed_set_choice requires choices", self.id))
            }
            (TaskKind::ClosedSetChoice, true) => Ok(()),
            (_, true) => Err(format!(
                "query {}: choices are only allowed for closed_set_choice",
                self.id
            )),
            (_, false) => Ok(()),
        }
    }
}

/// A question together with its gold answers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    question: Question,
    gold_answers: Vec<String>,
}

impl Query {
    pub fn new(question: Question, gold_answers: Vec<String>) -> Self {
        Self {
            question,
            gold_answers,
        }
    }

    pub fn question(&self) -> &Question {
        &self.question
    }

    pub fn id(&self) -> &str {
        &self.question.id
    }

    pub fn task_kind(&self) -> TaskKind {
        self.question.task_kind
    }

    pub fn gold_answers(&self) -> &[String] {
        &self.gold_answers
    }
}

/// A retrieved passage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
}

impl Document {
    /// String handed to the embedding model.
    pub fn embedding_input(&self) -> String {
        format!("{}\n{}", self.title, self.text)
    }
}

/// Wall-clock time spent in each pipeline stage, in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub embed_ms: f64,
    pub cluster_ms: f64,
    pub sample_ms: f64,
    pub draft_ms: f64,
    pub verify_ms: f64,
    pub total_ms: f64,
}

impl StageTimings {
    pub fn stages(&self) -> [(&'static str, f64); 5] {
        [
            ("embed", self.embed_ms),
            ("cluster", self.cluster_ms),
            ("sample", self.sample_ms),
            ("draft", self.draft_ms),
            ("verify", self.verify_ms),
        ]
    }

    pub fn is_consistent(&self) -> bool {
        let all = self
            .stages()
            .iter()
            .map(|(_, v)| *v)
            .chain(std::iter::once(self.total_ms))
            .all(|v| v.is_finite() && v >= 0.0);
        all && self.stages().iter().all(|(_, v)| *v <= self.total_ms)
    }
}
