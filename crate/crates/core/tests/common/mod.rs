#![allow(dead_code)]

use specrag_core::backend::{MockScript, MockServer, TokenScript};
use specrag_core::drafting::{build_draft_prompt, DraftCandidate};
use specrag_core::harness::DatasetRecord;
use specrag_core::sampling::DocumentSubset;
use specrag_core::verification::{build_verify_prompt, ReflectionStatement};
use specrag_core::config::DEFAULT_REFLECTION_STATEMENT;
use specrag_core::{Document, PipelineConfig, Query, Question, TaskKind, VerificationContextMode};

pub const GOOD_LOGPROB: f64 = -0.05;
pub const BAD_LOGPROB: f64 = -0.7;

pub fn doc(id: &str, title: &str, text: &str) -> Document {
    Document {
        id: id.into(),
        title: title.into(),
        text: text.into(),
    }
}

pub fn free_form(id: &str, text: &str, gold: &[&str]) -> Query {
    Query::new(
        Question {
            id: id.into(),
            text: text.into(),
            task_kind: TaskKind::FreeForm,
            choices: None,
        },
        gold.iter().map(|s| s.to_string()).collect(),
    )
}

pub fn gold_answer(i: usize) -> String {
    format!("Aurelia{i} Stone")
}

pub fn wrong_answer(i: usize) -> String {
    format!("Bertram{i} Vale")
}

fn completion(answer: &str) -> String {
    format!("## Rationale: The archive entry names {answer} as the keeper. ## Response: {answer}")
}

/// Four documents per record. `d0`/`d1` embed close together, as do
/// `d2`/`d3`, so two clusters form and four one-per-cluster subsets exist.
/// Subsets holding `d0` produce the gold draft, scored better than the
/// distractor on the draft, consistency and reflection terms alike.
pub fn rigged_record(i: usize) -> (DatasetRecord, MockScript) {
    let docs: Vec<Document> = (0..4)
        .map(|j| {
            doc(
                &format!("r{i}d{j}"),
                &format!("Ledger {i}.{j}"),
                &format!("Entry {j} of the ledger for case {i}."),
            )
        })
        .collect();
    let query = free_form(
        &format!("q{i}"),
        &format!("Who kept the archive in case {i}?"),
        &[&gold_answer(i)],
    );
    let record = DatasetRecord {
        query,
        documents: docs.clone(),
    };

    let mut script = MockScript {
        embedding_dims: 2,
        ..MockScript::default()
    };
    let coords = [[1.0, 0.05], [1.0, -0.05], [0.05, 1.0], [-0.05, 1.0]];
    for (d, c) in docs.iter().zip(coords) {
        script.add_embedding(&d.embedding_input(), c.to_vec());
    }

    let question = record.query.question();
    let reflection = ReflectionStatement::new(DEFAULT_REFLECTION_STATEMENT).unwrap();
    for a in 0..4 {
        for b in 0..4 {
            if a == b || (a < 2) == (b < 2) {
                continue;
            }
            let subset = DocumentSubset {
                subset_index: 0,
                member_doc_ids: vec![docs[a].id.clone(), docs[b].id.clone()],
                source_clusters: vec![0, 1],
            };
            let prompt = build_draft_prompt(question, &subset, &docs).unwrap();
            let gold = a == 0 || b == 0;
            let (answer, lp) = if gold {
                (gold_answer(i), GOOD_LOGPROB)
            } else {
                (wrong_answer(i), BAD_LOGPROB)
            };
            let text = completion(&answer);
            script.add_completion(&prompt, text.clone(), TokenScript::uniform(lp));

            let candidate = DraftCandidate::from_completion(&subset, text, Vec::new(), false).unwrap();
            let members = [&docs[a], &docs[b]];
            for mode in [
                VerificationContextMode::RationaleOnly,
                VerificationContextMode::DocumentsOnly,
                VerificationContextMode::RationaleAndDocuments,
            ] {
                let vp = build_verify_prompt(question, &candidate, &members, mode, &reflection);
                script.add_echo(&vp.text, TokenScript::uniform(lp));
            }
        }
    }
    (record, script)
}

pub fn rigged_dataset(n: usize) -> (Vec<DatasetRecord>, MockScript) {
    let mut all = MockScript {
        embedding_dims: 2,
        ..MockScript::default()
    };
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let (r, s) = rigged_record(i);
        records.push(r);
        all.merge(s);
    }
    (records, all)
}

/// Config pointing every role at one mock server, sized for rigged records.
pub fn rigged_config(server: &MockServer, seed: u64) -> PipelineConfig {
    PipelineConfig {
        num_drafts: 4,
        num_clusters: 2,
        top_n: 4,
        rng_seed: seed,
        request_timeout_ms: 5_000,
        ..PipelineConfig::default()
    }
    .with_endpoints(vec![server.generate_url()], server.generate_url(), server.embed_url())
}

/// Ten plain documents; the mock falls back to its deterministic rules for
/// every request.
pub fn plain_record(id: &str, gold: &str) -> DatasetRecord {
    DatasetRecord {
        query: free_form(id, &format!("What is described in {id}?"), &[gold]),
        documents: (0..10)
            .map(|j| {
                doc(
                    &format!("{id}-d{j}"),
                    &format!("Title {j}"),
                    &format!("Passage number {j} about topic {}.", j % 3),
                )
            })
            .collect(),
    }
}

pub fn mock_config(server: &MockServer) -> PipelineConfig {
    PipelineConfig {
        request_timeout_ms: 5_000,
        ..PipelineConfig::default()
    }
    .with_endpoints(vec![server.generate_url()], server.generate_url(), server.embed_url())
}
