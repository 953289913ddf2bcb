//! Random-walk sampling over the reverse-closed bi-level graph, relation
//! sequence extraction, confidence scoring, and mining of the augmented
//! triple set.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kg::{AugView, BaseTriplet, BiLevelKG, EntityId, RelationId, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Base,
    Higher,
}

/// One step label in a relation sequence: a base or higher relation,
/// possibly traversed against its direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationToken {
    pub kind: TokenKind,
    pub id: u32,
    pub inverse: bool,
}

impl RelationToken {
    pub fn base(id: RelationId, inverse: bool) -> Self {
        RelationToken {
            kind: TokenKind::Base,
            id: id.0,
            inverse,
        }
    }

    pub fn higher(id: u32, inverse: bool) -> Self {
        RelationToken {
            kind: TokenKind::Higher,
            id,
            inverse,
        }
    }

    pub fn inverted(self) -> Self {
        RelationToken {
            inverse: !self.inverse,
            ..self
        }
    }

    pub fn label(&self, kg: &BiLevelKG) -> String {
        let name = match self.kind {
            TokenKind::Base => kg.relations.label(self.id),
            TokenKind::Higher => kg.higher_relations.label(self.id),
        };
        if self.inverse {
            format!("{name}^-1")
        } else {
            name.to_owned()
        }
    }
}

/// The relation sequence p_k: a walk's token list with all entities removed.
pub type RelationSequence = Vec<RelationToken>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkPath {
    pub start: EntityId,
    /// Visited entities in order, excluding the start.
    pub visited: Vec<EntityId>,
    pub tokens: Vec<RelationToken>,
}

impl WalkPath {
    /// Walk length: the number of entities in the sequence except the start.
    pub fn length(&self) -> usize {
        self.visited.len()
    }

    pub fn end(&self) -> EntityId {
        *self.visited.last().expect("walk has at least one step")
    }

    pub fn record(&self) -> WalkRecord {
        WalkRecord {
            start: self.start,
            tokens: self.tokens.clone(),
            end: self.end(),
        }
    }
}

/// A deduplicated (h, p_k, t) record.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WalkRecord {
    pub start: EntityId,
    pub tokens: RelationSequence,
    pub end: EntityId,
}

/// Set of deduplicated walk records, ordered for deterministic iteration.
pub type WalkSet = BTreeSet<WalkRecord>;

/// One candidate move from an entity: the emitted token sequence (one token
/// for a base move, three for a higher move) and the landing entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepCandidate {
    pub tokens: Vec<RelationToken>,
    pub next: EntityId,
}

/// Enumerates every legal move from `current` given the visited set.
///
/// Base moves follow one view edge. Higher moves hop through a higher-level
/// edge between two train triples: the emitted tokens are the first triple's
/// relation oriented away from `current`, the higher relation (inverted when
/// traversed against its direction), and the second triple's relation
/// oriented toward the landing entity. A higher move consumes one length
/// unit; only the landing entity becomes visited.
pub fn step_candidates(
    view: &AugView<'_>,
    current: EntityId,
    visited: &HashSet<EntityId>,
) -> Vec<StepCandidate> {
    let kg = view.kg;
    let mut out = Vec::new();
    for &(r, inverse, next) in view.base_edges(current) {
        if !visited.contains(&next) {
            out.push(StepCandidate {
                tokens: vec![RelationToken::base(r, inverse)],
                next,
            });
        }
    }
    for &tid in view.member_triplets(current) {
        let t = kg.triplet(tid);
        let first = RelationToken::base(t.r, current != t.h);
        for &(rhat, against, other_id) in view.higher_edges(tid) {
            let mid = RelationToken::higher(rhat.0, against);
            let other = kg.triplet(other_id);
            // land on the tail (relation forward) or the head (inverted)
            for (y, last_inverse) in [(other.t, false), (other.h, true)] {
                if visited.contains(&y) {
                    continue;
                }
                out.push(StepCandidate {
                    tokens: vec![first, mid, RelationToken::base(other.r, last_inverse)],
                    next: y,
                });
            }
        }
    }
    out
}

/// Samples one walk of exactly `length_target` entities beyond the start.
/// Returns `None` when the walk dead-ends before reaching the target length.
pub fn sample_walk<R: Rng>(
    view: &AugView<'_>,
    length_target: usize,
    rng: &mut R,
) -> Option<WalkPath> {
    let n = view.num_entities();
    if n == 0 {
        return None;
    }
    let start = EntityId(rng.gen_range(0..n as u32));
    let mut visited: HashSet<EntityId> = HashSet::from([start]);
    let mut path = WalkPath {
        start,
        visited: Vec::with_capacity(length_target),
        tokens: Vec::new(),
    };
    let mut current = start;
    for _ in 0..length_target {
        let candidates = step_candidates(view, current, &visited);
        let chosen = candidates.choose(rng)?;
        path.tokens.extend_from_slice(&chosen.tokens);
        path.visited.push(chosen.next);
        visited.insert(chosen.next);
        current = chosen.next;
    }
    Some(path)
}

/// Runs `n` walk attempts for every length 2..=L and collects the
/// deduplicated (start, p_k, end) records. Deterministic for a fixed seed.
pub fn run_walks(view: &AugView<'_>, max_length: usize, attempts: u64, seed: u64) -> WalkSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = WalkSet::new();
    for length in 2..=max_length {
        for _ in 0..attempts {
            if let Some(path) = sample_walk(view, length, &mut rng) {
                set.insert(path.record());
            }
        }
    }
    set
}

/// Enumerates every simple path of length 2..=L instead of sampling.
/// Intended for small graphs and oracle tests; paper-scale runs sample.
pub fn exhaustive_walks(view: &AugView<'_>, max_length: usize) -> WalkSet {
    let mut set = WalkSet::new();
    let n = view.num_entities() as u32;
    for start in 0..n {
        let start = EntityId(start);
        let mut visited = HashSet::from([start]);
        let mut tokens = Vec::new();
        extend_all(view, start, start, 0, max_length, &mut visited, &mut tokens, &mut set);
    }
    set
}

#[allow(clippy::too_many_arguments)]
fn extend_all(
    view: &AugView<'_>,
    start: EntityId,
    current: EntityId,
    depth: usize,
    max_length: usize,
    visited: &mut HashSet<EntityId>,
    tokens: &mut Vec<RelationToken>,
    set: &mut WalkSet,
) {
    if depth == max_length {
        return;
    }
    for cand in step_candidates(view, current, visited) {
        tokens.extend_from_slice(&cand.tokens);
        visited.insert(cand.next);
        if depth + 1 >= 2 {
            set.insert(WalkRecord {
                start,
                tokens: tokens.clone(),
                end: cand.next,
            });
        }
        extend_all(view, start, cand.next, depth + 1, max_length, visited, tokens, set);
        visited.remove(&cand.next);
        tokens.truncate(tokens.len() - cand.tokens.len());
    }
}

/// Support/total counts and confidence per (p_k, r) pair. Keys are
/// materialized only for pairs with support >= 1; totals are kept for every
/// observed p_k. Candidate relations range over forward base relations only.
#[derive(Debug, Clone, Default)]
pub struct ConfidenceTable {
    totals: BTreeMap<RelationSequence, u32>,
    support: BTreeMap<(RelationSequence, RelationId), u32>,
}

impl ConfidenceTable {
    pub fn total(&self, seq: &RelationSequence) -> u32 {
        self.totals.get(seq).copied().unwrap_or(0)
    }

    pub fn support(&self, seq: &RelationSequence, r: RelationId) -> u32 {
        self.support.get(&(seq.clone(), r)).copied().unwrap_or(0)
    }

    pub fn confidence(&self, seq: &RelationSequence, r: RelationId) -> f64 {
        let total = self.total(seq);
        if total == 0 {
            return 0.0;
        }
        f64::from(self.support(seq, r)) / f64::from(total)
    }

    /// Number of materialized (p_k, r) pairs (support >= 1).
    pub fn num_pairs(&self) -> usize {
        self.support.len()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&RelationSequence, RelationId, u32)> {
        self.support.iter().map(|((seq, r), &s)| (seq, *r, s))
    }
}

/// Builds the confidence table from a deduplicated walk set: for each record
/// (h, p_k, t), every train triple (h, r, t) contributes one unit of support
/// to (p_k, r); the denominator is the record count of p_k.
pub fn confidence_table(walkset: &WalkSet, kg: &BiLevelKG) -> ConfidenceTable {
    // (h, t) -> forward train relations
    let mut pair_rels: HashMap<(EntityId, EntityId), Vec<RelationId>> = HashMap::new();
    for triple in kg.base_split(Split::Train) {
        pair_rels.entry((triple.h, triple.t)).or_default().push(triple.r);
    }
    let mut table = ConfidenceTable::default();
    for rec in walkset {
        *table.totals.entry(rec.tokens.clone()).or_insert(0) += 1;
        if let Some(rels) = pair_rels.get(&(rec.start, rec.end)) {
            for &r in rels {
                *table.support.entry((rec.tokens.clone(), r)).or_insert(0) += 1;
            }
        }
    }
    table
}

/// The mined augmented set S, stored in canonical forward direction and
/// ordered for deterministic output.
pub type AugmentedSet = BTreeSet<BaseTriplet>;

/// Emits S: every (h, r, t) justified by a record (h, p_k, t) with
/// c(p_k, r) >= tau and absent from the train split.
pub fn mine_augmented(
    table: &ConfidenceTable,
    walkset: &WalkSet,
    kg: &BiLevelKG,
    tau: f64,
) -> AugmentedSet {
    assert!(tau > 0.0 && tau <= 1.0, "tau must lie in (0, 1]");
    // qualifying relations per sequence
    let mut qualified: HashMap<&RelationSequence, Vec<RelationId>> = HashMap::new();
    for (seq, r, _) in table.pairs() {
        if table.confidence(seq, r) >= tau {
            qualified.entry(seq).or_default().push(r);
        }
    }
    let mut set = AugmentedSet::new();
    for rec in walkset {
        if let Some(rels) = qualified.get(&rec.tokens) {
            for &r in rels {
                let triple = BaseTriplet {
                    h: rec.start,
                    r,
                    t: rec.end,
                };
                if !kg.train_base_set.contains(&triple) {
                    set.insert(triple);
                }
            }
        }
    }
    set
}

/// The four counters of the augmentation summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugReport {
    /// Distinct (p_k, r) pairs with support >= 1.
    pub unique_pairs: usize,
    /// Pairs whose confidence meets the threshold.
    pub pairs_above_tau: usize,
    /// |S|.
    pub augmented_triplets: usize,
    /// |S ∩ E_valid| + |S ∩ E_test|.
    pub overlap_valid_test: usize,
}

pub fn augment_report(
    table: &ConfidenceTable,
    set: &AugmentedSet,
    kg: &BiLevelKG,
    tau: f64,
) -> AugReport {
    let pairs_above_tau = table
        .pairs()
        .filter(|(seq, r, _)| table.confidence(seq, *r) >= tau)
        .count();
    let valid: HashSet<&BaseTriplet> = kg.base_split(Split::Valid).iter().collect();
    let test: HashSet<&BaseTriplet> = kg.base_split(Split::Test).iter().collect();
    let overlap = set
        .iter()
        .filter(|t| valid.contains(t) || test.contains(t))
        .count();
    AugReport {
        unique_pairs: table.num_pairs(),
        pairs_above_tau,
        augmented_triplets: set.len(),
        overlap_valid_test: overlap,
    }
}

/// Renders the confidence table as TSV:
/// `p_k_tokens<TAB>r<TAB>support<TAB>total<TAB>confidence`.
pub fn confidence_table_tsv(table: &ConfidenceTable, kg: &BiLevelKG) -> String {
    let mut out = String::new();
    for (seq, r, support) in table.pairs() {
        let tokens: Vec<String> = seq.iter().map(|tok| tok.label(kg)).collect();
        let total = table.total(seq);
        let conf = table.confidence(seq, r);
        fmt::Write::write_fmt(
            &mut out,
            format_args!(
                "{}\t{}\t{}\t{}\t{}\n",
                tokens.join(","),
                kg.relations.label(r.0),
                support,
                total,
                conf
            ),
        )
        .expect("string write");
    }
    out
}
