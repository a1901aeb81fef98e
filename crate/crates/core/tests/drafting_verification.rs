mod common;

use std::collections::BTreeSet;

use specrag_core::backend::{
    Endpoint, EndpointPool, EndpointRole, LmClient, MockScript, MockServer, RequestKind, TokenScript,
};
use specrag_core::config::DEFAULT_REFLECTION_STATEMENT;
use specrag_core::drafting::{build_draft_prompt, generate_drafts, parse_draft};
use specrag_core::sampling::DocumentSubset;
use specrag_core::verification::{verify_candidates, ReflectionStatement, VerifySettings};
use specrag_core::{Choice, Document, Error, Question, ScoreTerm, TaskKind, VerificationContextMode};

const REFERENCE_PROMPT: &str = include_str!("fixtures/buddhism_prompt.txt");
const REFERENCE_COMPLETION: &str = include_str!("fixtures/buddhism_completion.txt");

fn buddhism() -> (Question, Vec<Document>) {
    let lines: Vec<&str> = REFERENCE_PROMPT.lines().collect();
    let question = Question {
        id: "nirvana".into(),
        text: "In Buddhism, what is the state of blissful repose or absolute existence by someone relieved of the necessity of rebirth?".into(),
        task_kind: TaskKind::FreeForm,
        choices: None,
    };
    let docs = vec![
        common::doc("b1", "Buddhism", lines[4]),
        common::doc("b2", "Salvation", lines[6]),
    ];
    (question, docs)
}

fn subset(index: usize, ids: &[&str]) -> DocumentSubset {
    DocumentSubset {
        subset_index: index,
        member_doc_ids: ids.iter().map(|s| s.to_string()).collect(),
        source_clusters: (0..ids.len()).collect(),
    }
}

#[test]
fn draft_prompt_matches_reference_layout() {
    let (question, docs) = buddhism();
    let prompt = build_draft_prompt(&question, &subset(0, &["b1", "b2"]), &docs).unwrap();
    assert_eq!(prompt, REFERENCE_PROMPT);
}

#[test]
fn draft_prompt_edge_cases() {
    let (question, docs) = buddhism();
    let single = build_draft_prompt(&question, &subset(0, &["b2"]), &docs).unwrap();
    assert!(single.contains("[1] Salvation\n"));
    assert!(!single.contains("[2]"));

    let untitled = vec![common::doc("u", "", "body")];
    let p = build_draft_prompt(&question, &subset(0, &["u"]), &untitled).unwrap();
    assert!(p.ends_with("## Evidence: \n[1] \nbody\n"));

    let err = build_draft_prompt(&question, &subset(0, &["missing"]), &docs).unwrap_err();
    assert!(matches!(err, Error::Data(_)), "{err:?}");

    let choice = Question {
        id: "c".into(),
        text: "Which colour?".into(),
        task_kind: TaskKind::ClosedSetChoice,
        choices: Some(vec![
            Choice { label: "A".into(), text: "red".into() },
            Choice { label: "B".into(), text: "blue".into() },
        ]),
    };
    let p = build_draft_prompt(&choice, &subset(0, &["b1"]), &docs).unwrap();
    let instruction = p.lines().nth(1).unwrap();
    assert!(instruction.starts_with("## Instruction: Which colour?"));
    assert!(instruction.contains("A. red") && instruction.contains("B. blue"));
}

#[test]
fn reference_completion_parses() {
    let parsed = parse_draft(REFERENCE_COMPLETION).unwrap();
    assert!(parsed.rationale.starts_with("Nirvana literally means"));
    assert!(parsed.answer.starts_with("In Buddhism, the state"));
    assert_eq!(parsed.rationale_span.slice(REFERENCE_COMPLETION), parsed.rationale);
    assert_eq!(parsed.answer_span.slice(REFERENCE_COMPLETION), parsed.answer);
    assert!(parsed.rationale_span.end <= parsed.answer_span.start);
}

#[tokio::test]
async fn scripted_prompt_returns_reference_completion() {
    let (question, docs) = buddhism();
    let prompt = build_draft_prompt(&question, &subset(0, &["b1", "b2"]), &docs).unwrap();
    let mut script = MockScript::default();
    script.add_completion(&prompt, REFERENCE_COMPLETION, TokenScript::uniform(-0.2));
    let server = MockServer::start(script, 0, None).await.unwrap();
    let pool = EndpointPool::new(&[server.generate_url()], EndpointRole::Drafter);

    let out = generate_drafts(
        &LmClient::new(2_000),
        &pool,
        &question,
        &[subset(0, &["b1", "b2"])],
        &docs,
        256,
        false,
    )
    .await
    .unwrap();
    assert_eq!(out.candidates.len(), 1);
    let c = &out.candidates[0];
    assert_eq!(c.raw_completion, REFERENCE_COMPLETION);
    assert!(c.answer.ends_with("is called Nirvana."));
    // Both spans at -0.2 per token: ln(exp(-0.2 nβ) + exp(-0.2 nα)).
    let n_beta = c.rationale.split_whitespace().count() as f64;
    let n_alpha = c.answer.split_whitespace().count() as f64;
    let want = ((-0.2 * n_beta).exp() + (-0.2 * n_alpha).exp()).ln();
    assert!((c.rho_draft_log - want).abs() < 1e-12);
}

fn five_doc_setup() -> (Question, Vec<Document>, Vec<DocumentSubset>) {
    let question = Question {
        id: "q".into(),
        text: "Which entry?".into(),
        task_kind: TaskKind::FreeForm,
        choices: None,
    };
    let docs: Vec<Document> = (0..5)
        .map(|i| common::doc(&format!("d{i}"), &format!("T{i}"), &format!("entry {i}")))
        .collect();
    let subsets = (0..5).map(|i| subset(i, &[&format!("d{i}")])).collect();
    (question, docs, subsets)
}

#[tokio::test]
async fn marker_free_completion_is_dropped_and_order_kept() {
    let (question, docs, subsets) = five_doc_setup();
    let mut script = MockScript::default();
    let broken = build_draft_prompt(&question, &subsets[2], &docs).unwrap();
    script.add_completion(&broken, "no markers here", TokenScript::uniform(-0.1));
    let server = MockServer::start(script, 0, None).await.unwrap();
    let pool = EndpointPool::new(&[server.generate_url(), server.generate_url()], EndpointRole::Drafter);

    let out = generate_drafts(&LmClient::new(2_000), &pool, &question, &subsets, &docs, 64, false)
        .await
        .unwrap();
    let kept: Vec<usize> = out.candidates.iter().map(|c| c.subset_index).collect();
    assert_eq!(kept, [0, 1, 3, 4]);
    assert_eq!(out.dropped.len(), 1);
    assert_eq!(out.dropped[0].subset_index, 2);
    assert!(out.dropped[0].reason.contains("## Rationale:"));
    for c in &out.candidates {
        // Fallback drafts repeat the last evidence line.
        assert_eq!(c.answer, format!("entry {}.", c.subset_index));
    }
}

#[tokio::test]
async fn all_drafts_dropped_is_an_error() {
    let (question, docs, subsets) = five_doc_setup();
    let mut script = MockScript::default();
    for s in &subsets {
        let p = build_draft_prompt(&question, s, &docs).unwrap();
        script.add_completion(&p, "nothing useful", TokenScript::uniform(-0.1));
    }
    let server = MockServer::start(script, 0, None).await.unwrap();
    let pool = EndpointPool::new(&[server.generate_url()], EndpointRole::Drafter);
    let err = generate_drafts(&LmClient::new(2_000), &pool, &question, &subsets, &docs, 64, false)
        .await
        .unwrap_err();
    assert!(matches!(err, Error::NoValidDrafts), "{err:?}");
}

#[tokio::test]
async fn verification_sends_one_echo_per_candidate() {
    let (question, docs, subsets) = five_doc_setup();
    let server = MockServer::start(MockScript::default(), 0, None).await.unwrap();
    let client = LmClient::new(2_000);
    let pool = EndpointPool::new(&[server.generate_url()], EndpointRole::Drafter);
    let drafted = generate_drafts(&client, &pool, &question, &subsets, &docs, 64, false)
        .await
        .unwrap();

    let verifier = Endpoint::new(server.generate_url(), EndpointRole::Verifier);
    for mode in [
        VerificationContextMode::RationaleOnly,
        VerificationContextMode::DocumentsOnly,
        VerificationContextMode::RationaleAndDocuments,
    ] {
        let before = server.request_log().len();
        let settings = VerifySettings {
            mode,
            reflection: ReflectionStatement::new(DEFAULT_REFLECTION_STATEMENT).unwrap(),
            score_terms: ScoreTerm::ALL.into_iter().collect::<BTreeSet<_>>(),
            normalize: false,
        };
        let results = verify_candidates(&client, &verifier, &question, &drafted.candidates, &docs, &settings)
            .await
            .unwrap();
        let log = server.request_log();
        let new: Vec<_> = log[before..].iter().collect();
        assert_eq!(new.len(), drafted.candidates.len());
        assert!(new.iter().all(|e| e.kind == RequestKind::Echo));
        for (r, c) in results.iter().zip(&drafted.candidates) {
            assert_eq!(r.subset_index, c.subset_index);
            assert!(!r.dropped);
            // "Yes" under the byte-sum rule.
            assert_eq!(r.rho_sr_log, -0.5);
            assert!((r.rho_final_log - (c.rho_draft_log + r.rho_sc_log + r.rho_sr_log)).abs() < 1e-12);
        }
        let has_evidence = new.iter().all(|e| e.content.contains("## Evidence:"));
        let has_rationale = new.iter().all(|e| e.content.contains("## Rationale:"));
        match mode {
            VerificationContextMode::RationaleOnly => assert!(!has_evidence && has_rationale),
            VerificationContextMode::DocumentsOnly => assert!(has_evidence && !has_rationale),
            VerificationContextMode::RationaleAndDocuments => assert!(has_evidence && has_rationale),
        }
    }
}

#[tokio::test]
async fn failed_echo_drops_only_that_candidate() {
    let (question, docs, subsets) = five_doc_setup();
    let server = MockServer::start(MockScript::default(), 0, None).await.unwrap();
    let client = LmClient::new(2_000);
    let pool = EndpointPool::new(&[server.generate_url()], EndpointRole::Drafter);
    let drafted = generate_drafts(&client, &pool, &question, &subsets[..2], &docs, 64, false)
        .await
        .unwrap();
    let verifier = Endpoint::new(format!("{}/missing", server.base_url()), EndpointRole::Verifier);
    let settings = VerifySettings {
        mode: VerificationContextMode::RationaleOnly,
        reflection: ReflectionStatement::new(DEFAULT_REFLECTION_STATEMENT).unwrap(),
        score_terms: ScoreTerm::ALL.into_iter().collect(),
        normalize: false,
    };
    let results = verify_candidates(&client, &verifier, &question, &drafted.candidates, &docs, &settings)
        .await
        .unwrap();
    assert!(results.iter().all(|r| r.dropped && r.drop_reason.is_some()));
}
