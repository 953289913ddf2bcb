//! Negative sampling, Adagrad updates, and the training loop over the three
//! loss streams (base, higher, augmented).

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{BaseTriplet, BaseTripletId, BiLevelKG, EntityId, HigherTriplet, Split};
use crate::model::{
    loss_base, loss_high, Gradients, LossVariant, ModelDims, ModelParams, Regularization,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at epoch {epoch}, {stream} batch {batch}")]
    NonFiniteLoss {
        epoch: usize,
        stream: &'static str,
        batch: usize,
    },
    #[error("training set is empty")]
    EmptyTrainSet,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Adagrad learning rate.
    pub alpha: f64,
    /// L2 regularization weight.
    pub beta: f64,
    /// Weight of the higher-level loss.
    pub lambda1: f64,
    /// Weight of the augmented-triple loss.
    pub lambda2: f64,
    /// Negatives per positive.
    pub neg_ratio: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// Validate (and snapshot on improvement) every this many epochs;
    /// 0 disables validation.
    pub valid_every: usize,
    pub seed: u64,
    pub d: usize,
    pub d_hat: usize,
    pub variant: LossVariant,
    /// Ablation switch for the higher-level loss stream.
    pub use_high: bool,
    /// Ablation switch for the augmented-triple loss stream.
    pub use_aug: bool,
    /// Whether beta also regularizes the projection matrix W.
    pub reg_w: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.1,
            beta: 0.01,
            lambda1: 1.0,
            lambda2: 0.2,
            neg_ratio: 10,
            epochs: 500,
            batch_size: 512,
            valid_every: 50,
            seed: 0,
            d: 200,
            d_hat: 200,
            variant: LossVariant::Separate,
            use_high: true,
            use_aug: true,
            reg_w: true,
        }
    }
}

const CORRUPT_RETRIES: usize = 100;

/// Draws one corrupted base triple: coin flip for head or tail, uniform
/// replacement entity, filtered against `filter` and the positive itself.
/// After bounded retries (degenerate graphs where filtered resampling cannot
/// succeed) the last candidate is accepted unfiltered.
pub fn corrupt_base<R: Rng>(
    positive: &BaseTriplet,
    n_entities: usize,
    filter: &HashSet<BaseTriplet>,
    rng: &mut R,
) -> BaseTriplet {
    debug_assert!(n_entities > 0);
    let mut candidate = *positive;
    for _ in 0..CORRUPT_RETRIES {
        let e = EntityId(rng.gen_range(0..n_entities as u32));
        candidate = if rng.gen_bool(0.5) {
            BaseTriplet { h: e, ..*positive }
        } else {
            BaseTriplet { t: e, ..*positive }
        };
        if candidate != *positive && !filter.contains(&candidate) {
            return candidate;
        }
    }
    candidate
}

/// Draws one corrupted higher triple by replacing one side with a uniform
/// train base triple, filtered against known higher triples and the positive.
pub fn corrupt_higher<R: Rng>(
    positive: &HigherTriplet,
    train_triplet_ids: &[BaseTripletId],
    filter: &HashSet<HigherTriplet>,
    rng: &mut R,
) -> HigherTriplet {
    debug_assert!(!train_triplet_ids.is_empty());
    let mut candidate = *positive;
    for _ in 0..CORRUPT_RETRIES {
        let id = train_triplet_ids[rng.gen_range(0..train_triplet_ids.len())];
        candidate = if rng.gen_bool(0.5) {
            HigherTriplet { ti: id, ..*positive }
        } else {
            HigherTriplet { tj: id, ..*positive }
        };
        if candidate != *positive && !filter.contains(&candidate) {
            return candidate;
        }
    }
    candidate
}

/// Sparse Adagrad: acc += g^2, theta -= lr * g / (sqrt(acc) + eps).
#[derive(Debug, Clone)]
pub struct Adagrad {
    pub lr: f64,
    pub eps: f64,
    acc_entities: Vec<f64>,
    acc_relations: Vec<f64>,
    acc_higher: Vec<f64>,
    acc_w: Vec<f64>,
}

impl Adagrad {
    pub fn new(dims: ModelDims, lr: f64) -> Self {
        Adagrad {
            lr,
            eps: 1e-10,
            acc_entities: vec![0.0; dims.n_entities * dims.entity_row()],
            acc_relations: vec![0.0; dims.n_relations * dims.entity_row()],
            acc_higher: vec![0.0; dims.n_higher_relations * dims.higher_row()],
            acc_w: vec![0.0; dims.w_len()],
        }
    }

    fn step(lr: f64, eps: f64, theta: &mut [f64], acc: &mut [f64], grad: &[f64], scale: f64) {
        for ((t, a), g) in theta.iter_mut().zip(acc.iter_mut()).zip(grad) {
            let g = scale * g;
            if g == 0.0 {
                continue;
            }
            *a += g * g;
            *t -= lr * g / (a.sqrt() + eps);
        }
    }

    /// Applies `scale * grads` to the touched rows only.
    pub fn apply(&mut self, params: &mut ModelParams, grads: &Gradients, scale: f64) {
        let row = params.dims.entity_row();
        for (&id, g) in &grads.entities {
            let s = id as usize * row;
            Self::step(
                self.lr,
                self.eps,
                &mut params.entities[s..s + row],
                &mut self.acc_entities[s..s + row],
                g,
                scale,
            );
        }
        for (&id, g) in &grads.relations {
            let s = id as usize * row;
            Self::step(
                self.lr,
                self.eps,
                &mut params.relations[s..s + row],
                &mut self.acc_relations[s..s + row],
                g,
                scale,
            );
        }
        let hrow = params.dims.higher_row();
        for (&id, g) in &grads.higher_relations {
            let s = id as usize * hrow;
            Self::step(
                self.lr,
                self.eps,
                &mut params.higher_relations[s..s + hrow],
                &mut self.acc_higher[s..s + hrow],
                g,
                scale,
            );
        }
        if let Some(gw) = &grads.w {
            Self::step(self.lr, self.eps, &mut params.w, &mut self.acc_w, gw, scale);
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub valid_metric: Option<f64>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// Best validation snapshot when validation ran, else the final state.
    pub params: ModelParams,
    pub final_params: ModelParams,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_metric: Option<f64>,
}

/// Trains from a fresh initialization. `validate` maps parameters to a
/// higher-is-better metric (validation MRR in the CLI); when present it runs
/// on the initialization and every `valid_every` epochs, and the returned
/// `params` is the best-scoring snapshot.
///
/// Ablation: a stream with a zero weight or a disabled switch is skipped
/// before any sampling, so `lambda1 = 0` and `use_high = false` produce
/// bit-identical runs (same for the augmented stream).
pub fn train(
    kg: &BiLevelKG,
    aug: &[BaseTriplet],
    cfg: &TrainConfig,
    mut validate: Option<&mut dyn FnMut(&ModelParams) -> f64>,
) -> Result<TrainOutcome, TrainError> {
    let train_base = kg.base_split(Split::Train);
    if train_base.is_empty() {
        return Err(TrainError::EmptyTrainSet);
    }
    let dims = ModelDims {
        n_entities: kg.entities.len(),
        n_relations: kg.relations.len(),
        n_higher_relations: kg.higher_relations.len().max(1),
        d: cfg.d,
        d_hat: cfg.d_hat,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::init(dims, cfg.seed, &mut rng);

    let run_high = cfg.use_high && cfg.lambda1 != 0.0 && !kg.higher_split(Split::Train).is_empty();
    let run_aug = cfg.use_aug && cfg.lambda2 != 0.0 && !aug.is_empty();
    let train_higher = kg.higher_split(Split::Train);
    let train_tids: Vec<BaseTripletId> =
        train_base.iter().map(|t| kg.triplet_ids[t]).collect();

    let reg = Regularization {
        beta: cfg.beta,
        include_w: false,
    };
    let reg_high = Regularization {
        beta: cfg.beta,
        include_w: cfg.reg_w,
    };

    let mut opt = Adagrad::new(dims, cfg.alpha);
    let mut log = Vec::new();
    let mut best = params.clone();
    let mut best_metric = validate.as_mut().map(|v| v(&params));
    let mut best_epoch = 0usize;

    let mut base_order: Vec<usize> = (0..train_base.len()).collect();
    let mut high_order: Vec<usize> = (0..train_higher.len()).collect();
    let mut aug_order: Vec<usize> = (0..aug.len()).collect();

    for epoch in 1..=cfg.epochs {
        let mut epoch_loss = 0.0;

        base_order.shuffle(&mut rng);
        for (batch_no, chunk) in base_order.chunks(cfg.batch_size).enumerate() {
            let positives: Vec<BaseTriplet> = chunk.iter().map(|&i| train_base[i]).collect();
            let negatives: Vec<BaseTriplet> = positives
                .iter()
                .flat_map(|p| {
                    (0..cfg.neg_ratio)
                        .map(|_| corrupt_base(p, dims.n_entities, &kg.train_base_set, &mut rng))
                        .collect::<Vec<_>>()
                })
                .collect();
            let mut grads = Gradients::default();
            let loss = loss_base(&params, &positives, &negatives, cfg.variant, reg, &mut grads);
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    stream: "base",
                    batch: batch_no,
                });
            }
            epoch_loss += loss;
            opt.apply(&mut params, &grads, 1.0);
        }

        if run_high {
            high_order.shuffle(&mut rng);
            for (batch_no, chunk) in high_order.chunks(cfg.batch_size).enumerate() {
                let positives: Vec<HigherTriplet> =
                    chunk.iter().map(|&i| train_higher[i]).collect();
                let negatives: Vec<HigherTriplet> = positives
                    .iter()
                    .flat_map(|p| {
                        (0..cfg.neg_ratio)
                            .map(|_| {
                                corrupt_higher(p, &train_tids, &kg.all_higher_set, &mut rng)
                            })
                            .collect::<Vec<_>>()
                    })
                    .collect();
                let mut grads = Gradients::default();
                let loss = loss_high(
                    &params,
                    &positives,
                    &negatives,
                    &kg.triplets,
                    cfg.variant,
                    reg_high,
                    &mut grads,
                );
                if !loss.is_finite() {
                    return Err(TrainError::NonFiniteLoss {
                        epoch,
                        stream: "higher",
                        batch: batch_no,
                    });
                }
                epoch_loss += cfg.lambda1 * loss;
                opt.apply(&mut params, &grads, cfg.lambda1);
            }
        }

        if run_aug {
            aug_order.shuffle(&mut rng);
            for (batch_no, chunk) in aug_order.chunks(cfg.batch_size).enumerate() {
                let positives: Vec<BaseTriplet> = chunk.iter().map(|&i| aug[i]).collect();
                let negatives: Vec<BaseTriplet> = positives
                    .iter()
                    .flat_map(|p| {
                        (0..cfg.neg_ratio)
                            .map(|_| {
                                corrupt_base(p, dims.n_entities, &kg.train_base_set, &mut rng)
                            })
                            .collect::<Vec<_>>()
                    })
                    .collect();
                let mut grads = Gradients::default();
                let loss =
                    loss_base(&params, &positives, &negatives, cfg.variant, reg, &mut grads);
                if !loss.is_finite() {
                    return Err(TrainError::NonFiniteLoss {
                        epoch,
                        stream: "augmented",
                        batch: batch_no,
                    });
                }
                epoch_loss += cfg.lambda2 * loss;
                opt.apply(&mut params, &grads, cfg.lambda2);
            }
        }

        let mut entry = EpochLog {
            epoch,
            loss: epoch_loss,
            valid_metric: None,
        };
        if cfg.valid_every > 0 && epoch % cfg.valid_every == 0 {
            if let Some(v) = validate.as_mut() {
                let metric = v(&params);
                entry.valid_metric = Some(metric);
                if best_metric.is_none_or(|b| metric > b) {
                    best_metric = Some(metric);
                    best = params.clone();
                    best_epoch = epoch;
                }
            }
        }
        log.push(entry);
    }

    let params_out = if best_metric.is_some() {
        best
    } else {
        params.clone()
    };
    Ok(TrainOutcome {
        params: params_out,
        final_params: params,
        log,
        best_epoch,
        best_metric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{GraphBuilder, RelationId};
    use crate::model::score_base;

    fn triple(h: u32, r: u32, t: u32) -> BaseTriplet {
        BaseTriplet {
            h: EntityId(h),
            r: RelationId(r),
            t: EntityId(t),
        }
    }

    fn chain_kg(n: u32) -> BiLevelKG {
        let mut b = GraphBuilder::new();
        for i in 0..n {
            b.entities.intern(&format!("e{i}"));
        }
        b.relations.intern("r");
        let triples: Vec<BaseTriplet> = (0..n - 1).map(|i| triple(i, 0, i + 1)).collect();
        b.add_base_split(Split::Train, triples);
        b.index_base_universe();
        b.build().unwrap()
    }

    #[test]
    fn corrupt_base_never_returns_positive_or_train_triple() {
        let kg = chain_kg(10);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pos = triple(0, 0, 1);
        for _ in 0..1000 {
            let neg = corrupt_base(&pos, 10, &kg.train_base_set, &mut rng);
            assert_ne!(neg, pos);
            assert!(!kg.train_base_set.contains(&neg));
            assert!(neg.h == pos.h || neg.t == pos.t);
        }
    }

    #[test]
    fn corrupt_base_degenerate_single_entity_terminates() {
        let mut filter = HashSet::new();
        filter.insert(triple(0, 0, 0));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // only one entity: every corruption equals the positive, so the
        // bounded-retry fallback must fire instead of looping forever
        let neg = corrupt_base(&triple(0, 0, 0), 1, &filter, &mut rng);
        assert_eq!(neg, triple(0, 0, 0));
    }

    #[test]
    fn corrupt_base_corrupts_both_sides() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pos = triple(0, 0, 1);
        let empty = HashSet::new();
        let mut heads = 0;
        let mut tails = 0;
        for _ in 0..500 {
            let neg = corrupt_base(&pos, 20, &empty, &mut rng);
            if neg.h != pos.h {
                heads += 1;
            } else {
                tails += 1;
            }
        }
        assert!(heads > 100 && tails > 100, "heads {heads}, tails {tails}");
    }

    #[test]
    fn corrupt_higher_respects_filter() {
        use crate::kg::HigherRelationId;
        let tids: Vec<BaseTripletId> = (0..5).map(BaseTripletId).collect();
        let pos = HigherTriplet {
            ti: BaseTripletId(0),
            rhat: HigherRelationId(0),
            tj: BaseTripletId(1),
        };
        let mut filter = HashSet::new();
        filter.insert(pos);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..500 {
            let neg = corrupt_higher(&pos, &tids, &filter, &mut rng);
            assert_ne!(neg, pos);
            assert!(neg.ti == pos.ti || neg.tj == pos.tj);
        }
    }

    #[test]
    fn adagrad_single_step_matches_hand_computation() {
        let dims = ModelDims {
            n_entities: 1,
            n_relations: 1,
            n_higher_relations: 1,
            d: 1,
            d_hat: 1,
        };
        let mut params = ModelParams {
            dims,
            entities: vec![1.0, 2.0, 3.0, 4.0],
            relations: vec![0.0; 4],
            higher_relations: vec![0.0; 4],
            w: vec![0.0; 3],
            seed: 0,
        };
        let mut opt = Adagrad::new(dims, 0.5);
        let mut grads = Gradients::default();
        grads.entity_mut(0, 4).copy_from_slice(&[2.0, 0.0, -1.0, 0.5]);
        opt.apply(&mut params, &grads, 1.0);
        // theta -= lr * g / (|g| + eps) so the first step is roughly a
        // signed lr step
        let expect = |theta: f64, g: f64| {
            if g == 0.0 {
                theta
            } else {
                theta - 0.5 * g / (g.abs() + 1e-10)
            }
        };
        assert!((params.entities[0] - expect(1.0, 2.0)).abs() < 1e-9);
        assert_eq!(params.entities[1], 2.0);
        assert!((params.entities[2] - expect(3.0, -1.0)).abs() < 1e-9);
        assert!((params.entities[3] - expect(4.0, 0.5)).abs() < 1e-9);
    }

    #[test]
    fn adagrad_accumulator_shrinks_effective_step() {
        let dims = ModelDims {
            n_entities: 1,
            n_relations: 1,
            n_higher_relations: 1,
            d: 1,
            d_hat: 1,
        };
        let mut params = ModelParams {
            dims,
            entities: vec![0.0; 4],
            relations: vec![0.0; 4],
            higher_relations: vec![0.0; 4],
            w: vec![0.0; 3],
            seed: 0,
        };
        let mut opt = Adagrad::new(dims, 1.0);
        let mut grads = Gradients::default();
        grads.entity_mut(0, 4)[0] = 1.0;
        opt.apply(&mut params, &grads, 1.0);
        let first = -params.entities[0];
        let before = params.entities[0];
        opt.apply(&mut params, &grads, 1.0);
        let second = before - params.entities[0];
        assert!(second < first, "second step {second} not smaller than {first}");
        // acc = 2 after two unit gradients: step = 1/sqrt(2)
        assert!((second - 1.0 / 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn zero_epochs_returns_initialization_unchanged() {
        let kg = chain_kg(6);
        let cfg = TrainConfig {
            epochs: 0,
            d: 2,
            d_hat: 2,
            seed: 9,
            ..TrainConfig::default()
        };
        let out = train(&kg, &[], &cfg, None).unwrap();
        let dims = out.params.dims;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let fresh = ModelParams::init(dims, 9, &mut rng);
        assert_eq!(out.params, fresh);
        assert!(out.log.is_empty());
    }

    #[test]
    fn training_is_deterministic_given_seed() {
        let kg = chain_kg(8);
        let cfg = TrainConfig {
            epochs: 3,
            d: 2,
            d_hat: 2,
            seed: 11,
            batch_size: 4,
            neg_ratio: 2,
            ..TrainConfig::default()
        };
        let a = train(&kg, &[], &cfg, None).unwrap();
        let b = train(&kg, &[], &cfg, None).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.log.len(), b.log.len());
        for (x, y) in a.log.iter().zip(&b.log) {
            assert_eq!(x.loss.to_bits(), y.loss.to_bits());
        }
    }

    #[test]
    fn lambda_zero_and_switch_off_are_bit_identical() {
        let kg = chain_kg(8);
        let aug = vec![triple(0, 0, 3), triple(1, 0, 4)];
        let base_cfg = TrainConfig {
            epochs: 3,
            d: 2,
            d_hat: 2,
            seed: 12,
            batch_size: 4,
            neg_ratio: 2,
            ..TrainConfig::default()
        };
        let via_lambda = TrainConfig {
            lambda2: 0.0,
            ..base_cfg.clone()
        };
        let via_switch = TrainConfig {
            use_aug: false,
            ..base_cfg
        };
        let a = train(&kg, &aug, &via_lambda, None).unwrap();
        let b = train(&kg, &aug, &via_switch, None).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn loss_decreases_on_small_graph() {
        let kg = chain_kg(10);
        let cfg = TrainConfig {
            epochs: 30,
            d: 4,
            d_hat: 4,
            seed: 13,
            batch_size: 16,
            neg_ratio: 4,
            alpha: 0.2,
            beta: 0.0,
            ..TrainConfig::default()
        };
        let out = train(&kg, &[], &cfg, None).unwrap();
        let first = out.log.first().unwrap().loss;
        let last = out.log.last().unwrap().loss;
        assert!(last < first, "loss went {first} -> {last}");
        assert!(out.params.all_finite());
    }

    #[test]
    fn trained_scores_separate_positives_from_negatives() {
        let kg = chain_kg(10);
        let cfg = TrainConfig {
            epochs: 60,
            d: 4,
            d_hat: 4,
            seed: 14,
            batch_size: 16,
            neg_ratio: 4,
            alpha: 0.2,
            beta: 0.0,
            ..TrainConfig::default()
        };
        let out = train(&kg, &[], &cfg, None).unwrap();
        let mean_pos: f64 = kg
            .base_split(Split::Train)
            .iter()
            .map(|t| score_base(&out.params, t))
            .sum::<f64>()
            / kg.base_split(Split::Train).len() as f64;
        // unseen random-ish pairs
        let negs = [triple(0, 0, 5), triple(2, 0, 8), triple(7, 0, 1)];
        let mean_neg: f64 =
            negs.iter().map(|t| score_base(&out.params, t)).sum::<f64>() / negs.len() as f64;
        assert!(
            mean_pos > mean_neg,
            "positives {mean_pos} not above negatives {mean_neg}"
        );
    }

    #[test]
    fn validation_snapshot_tracks_best_metric() {
        let kg = chain_kg(8);
        let cfg = TrainConfig {
            epochs: 4,
            valid_every: 1,
            d: 2,
            d_hat: 2,
            seed: 15,
            batch_size: 8,
            neg_ratio: 2,
            ..TrainConfig::default()
        };
        // deliberately adversarial metric that peaks at epoch 2
        let mut calls = 0;
        let mut validate = |_p: &ModelParams| {
            calls += 1;
            match calls {
                3 => 10.0,
                _ => 1.0,
            }
        };
        let out = train(&kg, &[], &cfg, Some(&mut validate)).unwrap();
        assert_eq!(out.best_epoch, 2);
        assert_eq!(out.best_metric, Some(10.0));
        assert_ne!(out.params, out.final_params);
    }

    #[test]
    fn empty_train_split_is_an_error() {
        let kg = GraphBuilder::new().build().unwrap();
        let cfg = TrainConfig {
            d: 2,
            d_hat: 2,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&kg, &[], &cfg, None),
            Err(TrainError::EmptyTrainSet)
        ));
    }
}
