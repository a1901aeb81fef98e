//! Answer correctness: containment for free-form questions, verdict or label
//! match for closed-set ones. Text is compared after lowercasing and
//! collapsing whitespace.

use crate::model::{Query, TaskKind};

const TRUE_WORDS: &[&str] = &["true", "yes", "supported", "supports", "correct", "right"];
const FALSE_WORDS: &[&str] = &[
    "false",
    "no",
    "refuted",
    "refutes",
    "unsupported",
    "incorrect",
    "wrong",
];

pub fn normalize_text(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn words(s: &str) -> impl Iterator<Item = String> + '_ {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

fn verdict(s: &str) -> Option<bool> {
    words(s).find_map(|w| {
        if TRUE_WORDS.contains(&w.as_str()) {
            Some(true)
        } else if FALSE_WORDS.contains(&w.as_str()) {
            Some(false)
        } else {
            None
        }
    })
}

fn choice_label(s: &str, labels: &[String]) -> Option<String> {
    words(s).find(|w| labels.contains(w))
}

pub fn evaluate_answer(prediction: &str, query: &Query) -> bool {
    let gold = query.gold_answers();
    match query.task_kind() {
        TaskKind::FreeForm => {
            let pred = normalize_text(prediction);
            gold.iter()
                .map(|g| normalize_text(g))
                .any(|g| !g.is_empty() && pred.contains(&g))
        }
        TaskKind::ClosedSetBoolean => match verdict(prediction) {
            Some(v) => gold.iter().any(|g| verdict(g) == Some(v)),
            None => false,
        },
        TaskKind::ClosedSetChoice => {
            let choices = query.question().choices.as_deref().unwrap_or_default();
            let labels: Vec<String> = choices.iter().map(|c| c.label.to_lowercase()).collect();
            let Some(predicted) = choice_label(prediction, &labels) else {
                return false;
            };
            gold.iter().any(|g| {
                let g = normalize_text(g);
                g == predicted
                    || choices
                        .iter()
                        .any(|c| normalize_text(&c.text) == g && c.label.to_lowercase() == predicted)
            })
        }
    }
}
