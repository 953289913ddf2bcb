//! Filtered ranking evaluation: triplet prediction, conditional link
//! prediction, and base-level link prediction.
//!
//! All ranks are filtered mid-ranks: known true answers other than the query
//! target are removed from the candidate pool, and ties with the target score
//! count half.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::kg::{BaseTriplet, BaseTripletId, BiLevelKG, EntityId, HigherRelationId, HigherTriplet, Split};
use crate::model::{score_quat, triplet_embed, triplet_embed_of, ModelParams};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("query target index {target} is in the filter set")]
    TargetFiltered { target: usize },
    #[error("no ranks to aggregate")]
    Empty,
}

/// Filtered mid-rank of `target` among `scores` (higher score is better).
/// `filter` holds candidate indices to ignore; it must not contain the
/// target.
pub fn filtered_rank(
    scores: &[f64],
    target: usize,
    filter: &HashSet<usize>,
) -> Result<f64, EvalError> {
    if filter.contains(&target) {
        return Err(EvalError::TargetFiltered { target });
    }
    let s_t = scores[target];
    let mut above = 0usize;
    let mut tied = 0usize;
    for (i, &s) in scores.iter().enumerate() {
        if i == target || filter.contains(&i) {
            continue;
        }
        if s > s_t {
            above += 1;
        } else if s == s_t {
            tied += 1;
        }
    }
    Ok(1.0 + above as f64 + tied as f64 / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregates {
    pub mr: f64,
    pub mrr: f64,
    pub hits10: f64,
}

pub fn aggregate(ranks: &[f64]) -> Result<Aggregates, EvalError> {
    if ranks.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = ranks.len() as f64;
    Ok(Aggregates {
        mr: ranks.iter().sum::<f64>() / n,
        mrr: ranks.iter().map(|r| 1.0 / r).sum::<f64>() / n,
        hits10: ranks.iter().filter(|&&r| r <= 10.0).count() as f64 / n,
    })
}

/// One ranked query. `rhat` is set for queries tied to a higher triple so the
/// per-relation breakdown can group them.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QueryRank {
    pub rank: f64,
    pub rhat: Option<HigherRelationId>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RankReport {
    pub ranks: Vec<QueryRank>,
    /// Queries dropped because the gold answer was outside the candidate
    /// pool.
    pub skipped: usize,
}

impl RankReport {
    pub fn aggregates(&self) -> Result<Aggregates, EvalError> {
        let ranks: Vec<f64> = self.ranks.iter().map(|q| q.rank).collect();
        aggregate(&ranks)
    }

    /// Aggregates grouped by higher relation, with query counts.
    pub fn per_relation(&self) -> Vec<(HigherRelationId, usize, Aggregates)> {
        let mut groups: BTreeMap<HigherRelationId, Vec<f64>> = BTreeMap::new();
        for q in &self.ranks {
            if let Some(r) = q.rhat {
                groups.entry(r).or_default().push(q.rank);
            }
        }
        groups
            .into_iter()
            .map(|(r, ranks)| (r, ranks.len(), aggregate(&ranks).expect("non-empty group")))
            .collect()
    }
}

fn higher_eval_context(
    params: &ModelParams,
    kg: &BiLevelKG,
) -> (Vec<BaseTripletId>, BTreeMap<BaseTripletId, usize>, Vec<Vec<f64>>) {
    let candidates: Vec<BaseTripletId> = kg
        .base_split(Split::Train)
        .iter()
        .map(|t| kg.triplet_ids[t])
        .collect();
    let index: BTreeMap<BaseTripletId, usize> = candidates
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i))
        .collect();
    let embeds: Vec<Vec<f64>> = candidates
        .iter()
        .map(|&id| triplet_embed(params, &kg.triplet(id)))
        .collect();
    (candidates, index, embeds)
}

/// Triplet prediction: for each higher triple in `split`, rank the true
/// tail triplet among all train triplets given (T_i, r_hat, ?), and the true
/// head triplet given (?, r_hat, T_j). Queries whose gold triplet is not a
/// train triplet are counted in `skipped`.
pub fn eval_triplet_prediction(
    params: &ModelParams,
    kg: &BiLevelKG,
    split: Split,
) -> Result<RankReport, EvalError> {
    let (candidates, index, embeds) = higher_eval_context(params, kg);
    let d_hat = params.dims.d_hat;
    let mut report = RankReport::default();
    for ht in kg.higher_split(split) {
        let rhat = params.higher_relation(ht.rhat.0);
        for (gold, fixed, predict_tail) in [(ht.tj, ht.ti, true), (ht.ti, ht.tj, false)] {
            let Some(&target) = index.get(&gold) else {
                report.skipped += 1;
                continue;
            };
            let fixed_emb = match index.get(&fixed) {
                Some(&i) => embeds[i].clone(),
                None => triplet_embed(params, &kg.triplet(fixed)),
            };
            let scores: Vec<f64> = embeds
                .iter()
                .map(|cand| {
                    if predict_tail {
                        score_quat(&fixed_emb, rhat, cand, d_hat)
                    } else {
                        score_quat(cand, rhat, &fixed_emb, d_hat)
                    }
                })
                .collect();
            let mut filter = HashSet::new();
            for (i, &cand_id) in candidates.iter().enumerate() {
                if i == target {
                    continue;
                }
                let known = if predict_tail {
                    HigherTriplet {
                        ti: fixed,
                        rhat: ht.rhat,
                        tj: cand_id,
                    }
                } else {
                    HigherTriplet {
                        ti: cand_id,
                        rhat: ht.rhat,
                        tj: fixed,
                    }
                };
                if kg.all_higher_set.contains(&known) {
                    filter.insert(i);
                }
            }
            report.ranks.push(QueryRank {
                rank: filtered_rank(&scores, target, &filter)?,
                rhat: Some(ht.rhat),
            });
        }
    }
    Ok(report)
}

/// Conditional link prediction: for each higher triple in `split`, four
/// queries, one per entity slot of the two member triplets. A candidate
/// entity x is scored by the base-level score of the completed triple plus
/// `lambda1` times the higher-level score with the completed triple embedded
/// in place. The filter removes entities whose completed base triple is a
/// known true triple other than the gold one.
pub fn eval_conditional_lp(
    params: &ModelParams,
    kg: &BiLevelKG,
    split: Split,
    lambda1: f64,
) -> Result<RankReport, EvalError> {
    let n = kg.entities.len();
    let d = params.dims.d;
    let d_hat = params.dims.d_hat;
    let mut report = RankReport::default();
    for ht in kg.higher_split(split) {
        let ti = kg.triplet(ht.ti);
        let tj = kg.triplet(ht.tj);
        let rhat = params.higher_relation(ht.rhat.0);
        let ti_emb = triplet_embed(params, &ti);
        let tj_emb = triplet_embed(params, &tj);
        // (completing triple, conditioning embedding, completed side is T_j)
        let queries = [
            (tj, &ti_emb, true, true),   // tail of T_j
            (tj, &ti_emb, true, false),  // head of T_j
            (ti, &tj_emb, false, true),  // tail of T_i
            (ti, &tj_emb, false, false), // head of T_i
        ];
        for (triple, cond_emb, completes_tj, predict_tail) in queries {
            let target = if predict_tail { triple.t.0 } else { triple.h.0 } as usize;
            let mut scores = Vec::with_capacity(n);
            let mut filter = HashSet::new();
            for x in 0..n as u32 {
                let completed = if predict_tail {
                    BaseTriplet {
                        t: EntityId(x),
                        ..triple
                    }
                } else {
                    BaseTriplet {
                        h: EntityId(x),
                        ..triple
                    }
                };
                if x as usize != target && kg.all_base_set.contains(&completed) {
                    filter.insert(x as usize);
                }
                let base = score_quat(
                    params.entity(completed.h.0),
                    params.relation(completed.r.0),
                    params.entity(completed.t.0),
                    d,
                );
                let cand_emb = triplet_embed_of(
                    params,
                    params.entity(completed.h.0),
                    params.relation(completed.r.0),
                    params.entity(completed.t.0),
                );
                let high = if completes_tj {
                    score_quat(cond_emb, rhat, &cand_emb, d_hat)
                } else {
                    score_quat(&cand_emb, rhat, cond_emb, d_hat)
                };
                scores.push(base + lambda1 * high);
            }
            report.ranks.push(QueryRank {
                rank: filtered_rank(&scores, target, &filter)?,
                rhat: Some(ht.rhat),
            });
        }
    }
    Ok(report)
}

/// Base-level link prediction: head and tail queries over all entities for
/// each base triple in `split`, filtered against all known base triples.
pub fn eval_base_lp(
    params: &ModelParams,
    kg: &BiLevelKG,
    split: Split,
) -> Result<RankReport, EvalError> {
    let n = kg.entities.len();
    let d = params.dims.d;
    let mut report = RankReport::default();
    for triple in kg.base_split(split) {
        for predict_tail in [true, false] {
            let target = if predict_tail { triple.t.0 } else { triple.h.0 } as usize;
            let mut scores = Vec::with_capacity(n);
            let mut filter = HashSet::new();
            for x in 0..n as u32 {
                let completed = if predict_tail {
                    BaseTriplet {
                        t: EntityId(x),
                        ..*triple
                    }
                } else {
                    BaseTriplet {
                        h: EntityId(x),
                        ..*triple
                    }
                };
                if x as usize != target && kg.all_base_set.contains(&completed) {
                    filter.insert(x as usize);
                }
                scores.push(score_quat(
                    params.entity(completed.h.0),
                    params.relation(completed.r.0),
                    params.entity(completed.t.0),
                    d,
                ));
            }
            report.ranks.push(QueryRank {
                rank: filtered_rank(&scores, target, &filter)?,
                rhat: None,
            });
        }
    }
    Ok(report)
}
