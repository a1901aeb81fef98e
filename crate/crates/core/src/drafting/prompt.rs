//! Drafter and baseline prompt layouts, and parsing of drafter completions.

use super::score::ByteSpan;
use crate::error::{DraftParseError, Error, Result};
use crate::model::{Document, Question};
use crate::sampling::DocumentSubset;

pub const DRAFT_HEADER: &str = "Response to the instruction. Also provide rationale for your response.";
pub const RATIONALE_MARKER: &str = "## Rationale:";
pub const RESPONSE_MARKER: &str = "## Response:";

const BASELINE_HEADER: &str = "Below is an instruction that describes a task. \
Write a response that appropriately completes the request. ";

/// Looks up the subset's documents by id, in subset order.
pub fn resolve_subset<'a>(subset: &DocumentSubset, docs: &'a [Document]) -> Result<Vec<&'a Document>> {
    subset
        .member_doc_ids
        .iter()
        .map(|id| {
            docs.iter()
                .find(|d| &d.id == id)
                .ok_or_else(|| Error::Data(format!("subset references unknown document {id:?}")))
        })
        .collect()
}

/// `"## Evidence: "` followed by one `[i] title` / `text` pair per document.
pub(crate) fn push_evidence(out: &mut String, docs: &[&Document]) {
    out.push_str("## Evidence: \n");
    for (i, d) in docs.iter().enumerate() {
        out.push_str(&format!("[{}] {}\n{}\n", i + 1, d.title, d.text));
    }
}

pub fn build_draft_prompt(question: &Question, subset: &DocumentSubset, docs: &[Document]) -> Result<String> {
    let members = resolve_subset(subset, docs)?;
    let mut out = String::new();
    out.push_str(DRAFT_HEADER);
    out.push('\n');
    out.push_str("## Instruction: ");
    out.push_str(&question.instruction());
    out.push('\n');
    push_evidence(&mut out, &members);
    Ok(out)
}

/// Single prompt carrying every retrieved document, for the standard
/// retrieval-augmented baseline.
pub fn build_baseline_prompt(question: &Question, docs: &[Document]) -> String {
    let mut out = String::new();
    out.push_str(BASELINE_HEADER);
    out.push_str("\n\n### Evidence:\n");
    for (i, d) in docs.iter().enumerate() {
        out.push_str(&format!("[{}] {}\n{}\n\n", i + 1, d.title, d.text));
    }
    out.push_str("### Instruction: ");
    out.push_str(&question.instruction());
    out.push_str("\n\n### Response:\n");
    out
}

/// Rationale and answer located inside a completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedDraft {
    pub rationale: String,
    pub answer: String,
    pub rationale_span: ByteSpan,
    pub answer_span: ByteSpan,
}

fn trimmed_span(text: &str, start: usize, end: usize) -> ByteSpan {
    let slice = &text[start..end];
    let lead = slice.len() - slice.trim_start().len();
    let trimmed = slice.trim();
    ByteSpan::new(start + lead, start + lead + trimmed.len())
}

/// Splits a completion into rationale (between the first rationale marker
/// and the following response marker) and answer (everything after it).
pub fn parse_draft(raw: &str) -> Result<ParsedDraft, DraftParseError> {
    let r = raw.find(RATIONALE_MARKER).ok_or(DraftParseError {
        marker: RATIONALE_MARKER,
    })?;
    let body = r + RATIONALE_MARKER.len();
    let a = raw[body..]
        .find(RESPONSE_MARKER)
        .map(|i| body + i)
        .ok_or(DraftParseError {
            marker: RESPONSE_MARKER,
        })?;
    let rationale_span = trimmed_span(raw, body, a);
    let answer_span = trimmed_span(raw, a + RESPONSE_MARKER.len(), raw.len());
    Ok(ParsedDraft {
        rationale: rationale_span.slice(raw).to_string(),
        answer: answer_span.slice(raw).to_string(),
        rationale_span,
        answer_span,
    })
}
