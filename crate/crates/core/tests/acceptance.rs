//! Acceptance checks. Each test prints one PASS/FAIL line before asserting.

mod common;

use std::collections::{BTreeSet, HashSet};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use specrag_core::backend::mock::whitespace_tokens;
use specrag_core::backend::{Backends, MockLm, MockScript, MockServer, RequestKind, TokenScript};
use specrag_core::config::DEFAULT_REFLECTION_STATEMENT;
use specrag_core::drafting::{parse_draft, sequence_logprob, DraftCandidate};
use specrag_core::harness::{
    ablation_grid, run_experiment, run_grid, run_speculative, write_run, AblationGrid, ExperimentRun,
    RunMode, Variant,
};
use specrag_core::sampling::{kmeans_cluster, sample_subsets, DocumentSubset, EmbeddingVector};
use specrag_core::verification::{
    build_verify_prompt, combine_scores, scores_from_tokens, select_best, ReflectionStatement,
};
use specrag_core::{
    PipelineConfig, Question, SamplingMode, ScoreTerm, SelectionMode, TaskKind,
    VerificationContextMode,
};

fn verdict(id: u32, name: &str, ok: bool, detail: &str, elapsed: Duration, limit: Duration) {
    let in_time = elapsed < limit;
    let status = if ok && in_time { "PASS" } else { "FAIL" };
    println!(
        "[{status}] criterion {id}: {name} ({detail}; {:.1} ms, limit {} ms)",
        elapsed.as_secs_f64() * 1e3,
        limit.as_millis()
    );
    assert!(ok, "criterion {id} failed: {detail}");
    assert!(in_time, "criterion {id} exceeded {} ms", limit.as_millis());
}

fn rel_err(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}

#[test]
fn c1_case_study_scores_select_the_correct_draft() {
    let t = Instant::now();
    // (draft, self-consistency, self-reflection) for drafts A and B.
    let a = (0.6594_f64, 0.3417_f64, 0.5238_f64);
    let b = (0.71_f64, 0.4346_f64, 0.7449_f64);
    // Exact decimal products.
    let want_a = 0.118021034124_f64;
    let want_b = 0.2298508134_f64;

    let terms: BTreeSet<ScoreTerm> = ScoreTerm::ALL.into_iter().collect();
    let log_a = combine_scores(a.0.ln(), a.1.ln(), a.2.ln(), &terms);
    let log_b = combine_scores(b.0.ln(), b.1.ln(), b.2.ln(), &terms);
    let winner = select_best(&[(0, log_a), (1, log_b)], SelectionMode::Argmax, 0).unwrap();

    let err_a = rel_err(log_a.exp(), want_a);
    let err_b = rel_err(log_b.exp(), want_b);
    let ok = winner == 1 && err_a <= 1e-9 && err_b <= 1e-9;
    verdict(
        1,
        "case-study triples pick draft B",
        ok,
        &format!(
            "winner={} A={:.10} B={:.10} rel_err=({err_a:.2e}, {err_b:.2e})",
            ["A", "B"][winner],
            log_a.exp(),
            log_b.exp()
        ),
        t.elapsed(),
        Duration::from_secs(1),
    );
}

fn random_words(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> Vec<String> {
    let n = rng.random_range(lo..=hi);
    (0..n)
        .map(|_| {
            let len = rng.random_range(1..=8);
            (0..len).map(|_| rng.random_range(b'a'..=b'z') as char).collect()
        })
        .collect()
}

fn random_logprobs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| -rng.random_range(0.0..4.0)).collect()
}

fn prob_product(lps: &[f64]) -> f64 {
    lps.iter().map(|lp| lp.exp()).product()
}

#[test]
fn c2_scoring_matches_brute_force_products() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let reflection = ReflectionStatement::new(DEFAULT_REFLECTION_STATEMENT).unwrap();
    let reflection_tokens = DEFAULT_REFLECTION_STATEMENT.split_whitespace().count();
    let mut worst: f64 = 0.0;
    let trials = 200;

    for trial in 0..trials {
        let q_words = random_words(&mut rng, 1, 10);
        let beta = random_words(&mut rng, 1, 12);
        let alpha = random_words(&mut rng, 1, 6);
        let question = Question {
            id: format!("t{trial}"),
            text: q_words.join(" "),
            task_kind: TaskKind::FreeForm,
            choices: None,
        };

        // Completion tokens: "##", "Rationale:", beta..., "##", "Response:", alpha...
        let text = format!("## Rationale: {} ## Response: {}", beta.join(" "), alpha.join(" "));
        let draft_lps = random_logprobs(&mut rng, 4 + beta.len() + alpha.len());
        let beta_lps = &draft_lps[2..2 + beta.len()];
        let alpha_lps = &draft_lps[4 + beta.len()..];

        let prompt = format!("draft prompt {trial}");
        let mut script = MockScript::default();
        script.add_completion(&prompt, text.clone(), TokenScript::per_token(draft_lps.clone()));
        let lm = MockLm::new(script);
        let response = lm.generate(&prompt);

        let parsed = parse_draft(&response.text).unwrap();
        let got_alpha = sequence_logprob(&response.tokens, parsed.answer_span, false).exp();
        let got_beta = sequence_logprob(&response.tokens, parsed.rationale_span, false).exp();
        let subset = DocumentSubset {
            subset_index: 0,
            member_doc_ids: vec![],
            source_clusters: vec![],
        };
        let candidate = DraftCandidate::from_completion(&subset, response.text.clone(), response.tokens, false).unwrap();
        let want_draft = (prob_product(beta_lps) + prob_product(alpha_lps)).ln();

        // Verifier prompt tokens: "##", "Instruction:", q..., "##", "Response:",
        // alpha..., "##", "Rationale:", beta..., reflection..., "Yes".
        let vp = build_verify_prompt(
            &question,
            &candidate,
            &[],
            VerificationContextMode::RationaleOnly,
            &reflection,
        );
        let n_echo = whitespace_tokens(&vp.text).len();
        assert_eq!(
            n_echo,
            2 + q_words.len() + 2 + alpha.len() + 2 + beta.len() + reflection_tokens + 1
        );
        let echo_lps = random_logprobs(&mut rng, n_echo);
        let a0 = 2 + q_words.len() + 2;
        let b0 = a0 + alpha.len() + 2;
        let echo_alpha = &echo_lps[a0..a0 + alpha.len()];
        let echo_beta = &echo_lps[b0..b0 + beta.len()];
        let echo_yes = echo_lps[n_echo - 1];

        let mut echo_script = MockScript::default();
        echo_script.add_echo(&vp.text, TokenScript::per_token(echo_lps.clone()));
        lm.replace_script(echo_script);
        let echoed = lm.echo(&vp.text);
        let (sc, sr) = scores_from_tokens(&echoed.tokens, &vp, false);
        let got_echo_alpha = sequence_logprob(&echoed.tokens, vp.answer_span, false).exp();
        let got_echo_beta = sequence_logprob(&echoed.tokens, vp.rationale_span.unwrap(), false).exp();

        let errs = [
            rel_err(got_alpha, prob_product(alpha_lps)),
            rel_err(got_beta, prob_product(beta_lps)),
            rel_err(candidate.rho_draft_log.exp(), want_draft.exp()),
            rel_err(got_echo_alpha, prob_product(echo_alpha)),
            rel_err(got_echo_beta, prob_product(echo_beta)),
            rel_err(sc.exp(), prob_product(echo_alpha) * prob_product(echo_beta)),
            rel_err(sr.exp(), echo_yes.exp()),
        ];
        worst = errs.iter().copied().fold(worst, f64::max);
    }

    verdict(
        2,
        "sequence scores equal brute-force token products",
        worst <= 1e-9,
        &format!("{trials} scripts, worst relative error {worst:.2e}"),
        t.elapsed(),
        Duration::from_secs(10),
    );
}

fn partition_sse(points: &[[f64; 2]], labels: &[usize]) -> f64 {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut total = 0.0;
    for c in 0..k {
        let members: Vec<&[f64; 2]> = points.iter().zip(labels).filter(|(_, l)| **l == c).map(|(p, _)| p).collect();
        if members.is_empty() {
            continue;
        }
        let n = members.len() as f64;
        let cx = members.iter().map(|p| p[0]).sum::<f64>() / n;
        let cy = members.iter().map(|p| p[1]).sum::<f64>() / n;
        total += members.iter().map(|p| (p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sum::<f64>();
    }
    total
}

/// Minimum SSE over every partition into at most `k` blocks, enumerated as
/// restricted growth strings.
fn exhaustive_best(points: &[[f64; 2]], k: usize) -> f64 {
    fn rec(points: &[[f64; 2]], k: usize, labels: &mut Vec<usize>, used: usize, best: &mut f64) {
        if labels.len() == points.len() {
            *best = best.min(partition_sse(points, labels));
            return;
        }
        for l in 0..(used + 1).min(k) {
            labels.push(l);
            rec(points, k, labels, used.max(l + 1), best);
            labels.pop();
        }
    }
    let mut best = f64::INFINITY;
    rec(points, k, &mut Vec::new(), 0, &mut best);
    best
}

/// Relabels in first-seen order so equal partitions compare equal.
fn canonical_labels(assignments: &[usize]) -> Vec<usize> {
    let mut map = Vec::new();
    assignments
        .iter()
        .map(|a| match map.iter().position(|m| m == a) {
            Some(i) => i,
            None => {
                map.push(*a);
                map.len() - 1
            }
        })
        .collect()
}

#[test]
fn c3_kmeans_against_exhaustive_partitions() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut worst = [0.0_f64; 3];
    let mut failures = Vec::new();
    for instance in 0..50 {
        let n = rng.random_range(2..=8);
        let points: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let vectors: Vec<EmbeddingVector> = points.iter().map(|p| EmbeddingVector::new(p.to_vec()).unwrap()).collect();
        for (slot, (k, tol)) in [(1, 1.0), (2, 1.2), (n, 1.0)].into_iter().enumerate() {
            let clusters = kmeans_cluster(&vectors, k, instance as u64).unwrap();
            let got = partition_sse(&points, &canonical_labels(&clusters.assignments));
            let best = exhaustive_best(&points, k);
            let ratio = if best == 0.0 {
                if got == 0.0 { 1.0 } else { f64::INFINITY }
            } else {
                got / best
            };
            worst[slot] = worst[slot].max(ratio);
            if got > best * tol {
                failures.push(format!("instance {instance} n={n} k={k}: {got} vs {best}"));
            }
        }
    }
    verdict(
        3,
        "k-means SSE within tolerance of exhaustive optimum",
        failures.is_empty(),
        &format!(
            "50 instances, worst ratio k=1 {:.4}, k=2 {:.4}, k=n {:.4}{}",
            worst[0],
            worst[1],
            worst[2],
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
        t.elapsed(),
        Duration::from_secs(30),
    );
}

fn mean_intra_distance(subsets: &[DocumentSubset], ids: &[String], vectors: &[EmbeddingVector]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for s in subsets {
        let members: Vec<&EmbeddingVector> = s
            .member_doc_ids
            .iter()
            .map(|id| &vectors[ids.iter().position(|x| x == id).unwrap()])
            .collect();
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                total += members[i].squared_distance(members[j]).sqrt();
                pairs += 1;
            }
        }
    }
    if pairs == 0 { 0.0 } else { total / pairs as f64 }
}

#[test]
fn c4_multi_perspective_sampling_properties() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let (groups, per_group, dims, m) = (3, 4, 8, 5);
    let mut property_violations = Vec::new();
    let mut wins = 0;
    let trials = 100;
    for trial in 0..trials {
        let mut vectors = Vec::new();
        for g in 0..groups {
            for _ in 0..per_group {
                let mut v: Vec<f64> = (0..dims).map(|_| rng.random_range(-0.1..0.1)).collect();
                v[g] += 10.0;
                vectors.push(EmbeddingVector::new(v).unwrap());
            }
        }
        let docs: Vec<_> = (0..vectors.len())
            .map(|i| common::doc(&format!("d{i}"), "t", &format!("text {i}")))
            .collect();
        let ids: Vec<String> = docs.iter().map(|d| d.id.clone()).collect();
        let clusters = kmeans_cluster(&vectors, groups, trial).unwrap();

        let multi = sample_subsets(&clusters, &docs, m, SamplingMode::MultiPerspective, trial).unwrap();
        let random = sample_subsets(&clusters, &docs, m, SamplingMode::RandomNoCluster, trial).unwrap();

        let as_sets: HashSet<BTreeSet<&String>> =
            multi.subsets.iter().map(|s| s.member_doc_ids.iter().collect()).collect();
        if as_sets.len() != multi.subsets.len() || multi.subsets.len() != m {
            property_violations.push(format!("trial {trial}: subsets not pairwise distinct"));
        }
        for s in &multi.subsets {
            let clusters_hit: BTreeSet<usize> = s
                .member_doc_ids
                .iter()
                .map(|id| clusters.assignments[ids.iter().position(|x| x == id).unwrap()])
                .collect();
            if s.member_doc_ids.len() != clusters.nonempty_count || clusters_hit.len() != clusters.nonempty_count {
                property_violations.push(format!("trial {trial}: subset {} not one per cluster", s.subset_index));
            }
        }
        if mean_intra_distance(&multi.subsets, &ids, &vectors) > mean_intra_distance(&random.subsets, &ids, &vectors) {
            wins += 1;
        }
    }
    let ok = property_violations.is_empty() && wins * 100 >= trials * 95;
    verdict(
        4,
        "multi-perspective subsets are distinct, one per cluster, and more diverse",
        ok,
        &format!(
            "diversity wins {wins}/{trials}, property violations {}",
            property_violations.len()
        ),
        t.elapsed(),
        Duration::from_secs(10),
    );
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn c5_drafts_run_in_parallel() {
    let t = Instant::now();
    let mut drafters = Vec::new();
    for _ in 0..5 {
        drafters.push(MockServer::start(MockScript::default(), 0, Some(100)).await.unwrap());
    }
    let utility = MockServer::start(MockScript::default(), 0, None).await.unwrap();
    let cfg = PipelineConfig {
        num_drafts: 5,
        request_timeout_ms: 5_000,
        ..PipelineConfig::default()
    }
    .with_endpoints(
        drafters.iter().map(|s| s.generate_url()).collect(),
        utility.generate_url(),
        utility.embed_url(),
    );
    let backends = Backends::from_config(&cfg);
    let record = common::plain_record("par", "nothing");
    let result = run_speculative(&record, &cfg, &backends).await.unwrap();

    let per_server: Vec<usize> = drafters
        .iter()
        .map(|s| s.request_log().iter().filter(|e| e.kind == RequestKind::Generate).count())
        .collect();
    let draft_ms = result.timings.draft_ms;
    let ok = draft_ms < 200.0 && result.candidates.len() == 5 && per_server.iter().all(|&c| c == 1);
    verdict(
        5,
        "five delayed drafters finish in parallel",
        ok,
        &format!("draft stage {draft_ms:.1} ms (serial bound 500 ms), requests per drafter {per_server:?}"),
        t.elapsed(),
        Duration::from_secs(5),
    );
}

async fn rigged_run(seed: u64, selection: SelectionMode) -> ExperimentRun {
    let (records, script) = common::rigged_dataset(20);
    let server = MockServer::start(script, 0, None).await.unwrap();
    let cfg = PipelineConfig {
        selection_mode: selection,
        ..common::rigged_config(&server, seed)
    };
    let variant = Variant::new("rigged", RunMode::Speculative, cfg);
    let backends = Backends::from_config(&variant.config);
    run_experiment(&records, &variant, &backends, 1).await.unwrap()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn c6_rigged_dataset_is_fully_solved_by_verification() {
    let t = Instant::now();
    let argmax = rigged_run(7, SelectionMode::Argmax).await;
    let mut random_acc = Vec::new();
    for seed in [7, 8, 9] {
        random_acc.push(rigged_run(seed, SelectionMode::Random).await.summary.accuracy);
    }
    let s = &argmax.summary;
    let ok = s.evaluated == 20 && s.accuracy == 1.0 && random_acc.iter().all(|a| *a < 1.0);
    verdict(
        6,
        "rigged dataset: argmax 100%, random selection below",
        ok,
        &format!(
            "argmax {}/{} = {:.2}, random over seeds {random_acc:?}",
            s.correct, s.evaluated, s.accuracy
        ),
        t.elapsed(),
        Duration::from_secs(30),
    );
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn c7_ablation_grid_summaries() {
    let t = Instant::now();
    let (records, script) = common::rigged_dataset(6);
    let server = MockServer::start(script, 0, None).await.unwrap();
    let base = common::rigged_config(&server, 11);
    let variants = ablation_grid(&base, AblationGrid::All);

    let first = run_grid(&records, &variants, 1).await.unwrap();
    let second = run_grid(&records, &variants, 1).await.unwrap();

    let expected: BTreeSet<&str> = [
        "sampling_random_no_cluster",
        "sampling_same_cluster",
        "without_draft_score",
        "without_self_consistency",
        "without_self_reflection",
        "random_selection",
        "context_rationale_only",
        "context_documents_only",
        "context_rationale_and_documents",
    ]
    .into_iter()
    .collect();
    let names: BTreeSet<&str> = first.iter().map(|r| r.summary.variant.as_str()).collect();
    let snapshots: HashSet<String> = first
        .iter()
        .map(|r| serde_json::to_string(&r.summary.config_snapshot.config).unwrap())
        .collect();
    let deterministic = first.iter().zip(&second).all(|(a, b)| {
        a.summary.records == b.summary.records
            && a.summary.accuracy == b.summary.accuracy
            && serde_json::to_string(&a.results).unwrap() == serde_json::to_string(&b.results).unwrap()
    });
    let all_evaluated = first.iter().all(|r| r.summary.evaluated == records.len());
    let ok = first.len() == 9 && names == expected && snapshots.len() == 9 && deterministic && all_evaluated;
    let accuracies: Vec<String> = first
        .iter()
        .map(|r| format!("{}={:.2}", r.summary.variant, r.summary.accuracy))
        .collect();
    verdict(
        7,
        "ablation grid yields distinct, deterministic summaries",
        ok,
        &format!(
            "{} summaries, {} distinct configs, deterministic={deterministic}; {}",
            first.len(),
            snapshots.len(),
            accuracies.join(" ")
        ),
        t.elapsed(),
        Duration::from_secs(60),
    );
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn c8_repeated_runs_write_identical_results() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for name in ["first", "second"] {
        let run = rigged_run(7, SelectionMode::Argmax).await;
        let out = dir.path().join(name);
        write_run(&out, &run).unwrap();
        files.push(std::fs::read(out.join("results.jsonl")).unwrap());
    }
    let ok = files[0] == files[1] && !files[0].is_empty();
    verdict(
        8,
        "same seed gives byte-identical results.jsonl",
        ok,
        &format!("{} bytes each, identical={}", files[0].len(), files[0] == files[1]),
        t.elapsed(),
        Duration::from_secs(60),
    );
}
