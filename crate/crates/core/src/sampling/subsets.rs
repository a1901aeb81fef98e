//! Drawing the document subsets that drafts are conditioned on.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kmeans::ClusterSet;
use crate::config::SamplingMode;
use crate::error::{Error, Result};
use crate::model::Document;
use crate::rng::{seeded_rng, SeededRng};

/// Resampling attempts allowed per requested subset before giving up.
pub const ATTEMPTS_PER_SUBSET: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentSubset {
    pub subset_index: usize,
    pub member_doc_ids: Vec<String>,
    /// Cluster of each member, parallel to `member_doc_ids`.
    pub source_clusters: Vec<usize>,
}

/// Fewer distinct subsets were produced than requested.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationNotice {
    pub requested: usize,
    pub produced: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingOutcome {
    pub subsets: Vec<DocumentSubset>,
    pub truncation: Option<TruncationNotice>,
}

/// Samples up to `m` pairwise-distinct subsets.
///
/// Members are stored in canonical order: by cluster index, then by retrieval
/// rank. When the number of distinct subsets the mode can produce does not
/// exceed `m`, all of them are enumerated instead of sampled.
pub fn sample_subsets(
    clusters: &ClusterSet,
    docs: &[Document],
    m: usize,
    mode: SamplingMode,
    seed: u64,
) -> Result<SamplingOutcome> {
    if m == 0 {
        return Err(Error::Argument("m must be ≥ 1".into()));
    }
    if clusters.assignments.len() != docs.len() {
        return Err(Error::Argument(format!(
            "{} cluster assignments for {} documents",
            clusters.assignments.len(),
            docs.len()
        )));
    }
    let groups = clusters.groups();
    if groups.is_empty() {
        return Err(Error::Argument("cluster set has no members".into()));
    }
    let mut rng = seeded_rng(seed);
    let picks = match mode {
        SamplingMode::MultiPerspective => multi_perspective(&groups, m, &mut rng),
        SamplingMode::RandomNoCluster => {
            let all: Vec<usize> = (0..docs.len()).collect();
            combinations_from(&all, groups.len(), m, &mut rng)
        }
        SamplingMode::SameCluster => {
            let (_, members) = &groups[rng.random_range(0..groups.len())];
            let size = groups.len().min(members.len());
            combinations_from(members, size, m, &mut rng)
        }
    };

    let truncation = (picks.len() < m).then_some(TruncationNotice {
        requested: m,
        produced: picks.len(),
    });
    let subsets = picks
        .into_iter()
        .enumerate()
        .map(|(subset_index, positions)| {
            let canonical = canonical(clusters, positions);
            DocumentSubset {
                subset_index,
                member_doc_ids: canonical.iter().map(|&p| docs[p].id.clone()).collect(),
                source_clusters: canonical.iter().map(|&p| clusters.assignments[p]).collect(),
            }
        })
        .collect();
    Ok(SamplingOutcome {
        subsets,
        truncation,
    })
}

fn canonical(clusters: &ClusterSet, mut positions: Vec<usize>) -> Vec<usize> {
    positions.sort_by_key(|&p| (clusters.assignments[p], p));
    positions
}

fn multi_perspective(groups: &[(usize, Vec<usize>)], m: usize, rng: &mut SeededRng) -> Vec<Vec<usize>> {
    let distinct = groups
        .iter()
        .try_fold(1usize, |acc, (_, members)| acc.checked_mul(members.len()));
    if distinct.is_some_and(|u| u <= m) {
        return cross_product(groups);
    }
    draw_distinct(m, rng, |rng| {
        groups
            .iter()
            .map(|(_, members)| members[rng.random_range(0..members.len())])
            .collect()
    })
}

fn cross_product(groups: &[(usize, Vec<usize>)]) -> Vec<Vec<usize>> {
    groups.iter().fold(vec![Vec::new()], |acc, (_, members)| {
        acc.into_iter()
            .flat_map(|prefix| {
                members.iter().map(move |&p| {
                    let mut next = prefix.clone();
                    next.push(p);
                    next
                })
            })
            .collect()
    })
}

fn binomial(n: usize, r: usize) -> Option<usize> {
    if r > n {
        return Some(0);
    }
    let r = r.min(n - r);
    let mut acc: usize = 1;
    for i in 0..r {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Distinct `size`-element subsets of `pool`; all of them when there are at
/// most `m`, otherwise `m` uniform draws (subject to the attempt cap).
fn combinations_from(pool: &[usize], size: usize, m: usize, rng: &mut SeededRng) -> Vec<Vec<usize>> {
    if binomial(pool.len(), size).is_some_and(|u| u <= m) {
        return combinations(pool, size);
    }
    let mut scratch = pool.to_vec();
    draw_distinct(m, rng, |rng| {
        let (chosen, _) = scratch.partial_shuffle(rng, size);
        let mut pick = chosen.to_vec();
        pick.sort_unstable();
        pick
    })
}

fn combinations(pool: &[usize], size: usize) -> Vec<Vec<usize>> {
    fn go(pool: &[usize], size: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..pool.len() {
            cur.push(pool[i]);
            go(pool, size, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(pool, size, 0, &mut Vec::new(), &mut out);
    out
}

fn draw_distinct(
    m: usize,
    rng: &mut SeededRng,
    mut draw: impl FnMut(&mut SeededRng) -> Vec<usize>,
) -> Vec<Vec<usize>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for _ in 0..ATTEMPTS_PER_SUBSET * m {
        if out.len() == m {
            break;
        }
        let pick = draw(rng);
        let mut key = pick.clone();
        key.sort_unstable();
        if seen.insert(key) {
            out.push(pick);
        }
    }
    out
}
