//! Quaternion embedding parameters, scoring at both levels, the loss terms
//! with both averaging variants, and hand-derived gradients.
//!
//! Layout: every embedding row stores `dim` quaternion components as four
//! consecutive reals (a, b, c, d), so a row holds `4 * dim` values. The
//! projection matrix `W` is a real `d_hat x 3d` matrix applied independently
//! to each of the four component planes of the concatenated (head, relation,
//! tail) vector.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{BaseTriplet, HigherTriplet};
use crate::quat::Quaternion;

pub const NORM_EPSILON: f64 = 1e-12;

/// Backbone tag recorded in checkpoints. Only the QuatE scorer is built in;
/// the scoring surface takes plain (lhs, rel, rhs) slices so another backbone
/// can slot in behind the same signatures.
pub const BACKBONE_QUATE: &str = "quate";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("non-finite loss in {context}")]
    NonFiniteLoss { context: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub n_entities: usize,
    pub n_relations: usize,
    pub n_higher_relations: usize,
    /// Quaternion components per entity/relation embedding.
    pub d: usize,
    /// Quaternion components per higher-relation and triplet embedding.
    pub d_hat: usize,
}

impl ModelDims {
    pub fn entity_row(&self) -> usize {
        4 * self.d
    }

    pub fn higher_row(&self) -> usize {
        4 * self.d_hat
    }

    pub fn w_len(&self) -> usize {
        self.d_hat * 3 * self.d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub entities: Vec<f64>,
    pub relations: Vec<f64>,
    pub higher_relations: Vec<f64>,
    /// Row-major d_hat x 3d.
    pub w: Vec<f64>,
    pub seed: u64,
}

impl ModelParams {
    /// Uniform init in [-1/sqrt(4d), 1/sqrt(4d)] per real component; W uses
    /// 3d as fan-in.
    pub fn init<R: Rng>(dims: ModelDims, seed: u64, rng: &mut R) -> Self {
        let bound = 1.0 / ((4 * dims.d) as f64).sqrt();
        let bound_hat = 1.0 / ((4 * dims.d_hat) as f64).sqrt();
        let bound_w = 1.0 / ((3 * dims.d) as f64).sqrt();
        let uniform = |rng: &mut R, n: usize, b: f64| -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(-b..=b)).collect()
        };
        ModelParams {
            dims,
            entities: uniform(rng, dims.n_entities * dims.entity_row(), bound),
            relations: uniform(rng, dims.n_relations * dims.entity_row(), bound),
            higher_relations: uniform(rng, dims.n_higher_relations * dims.higher_row(), bound_hat),
            w: uniform(rng, dims.w_len(), bound_w),
            seed,
        }
    }

    pub fn entity(&self, id: u32) -> &[f64] {
        let row = self.dims.entity_row();
        &self.entities[id as usize * row..(id as usize + 1) * row]
    }

    pub fn relation(&self, id: u32) -> &[f64] {
        let row = self.dims.entity_row();
        &self.relations[id as usize * row..(id as usize + 1) * row]
    }

    pub fn higher_relation(&self, id: u32) -> &[f64] {
        let row = self.dims.higher_row();
        &self.higher_relations[id as usize * row..(id as usize + 1) * row]
    }

    pub fn all_finite(&self) -> bool {
        self.entities
            .iter()
            .chain(&self.relations)
            .chain(&self.higher_relations)
            .chain(&self.w)
            .all(|v| v.is_finite())
    }
}

fn quat_at(row: &[f64], c: usize) -> Quaternion {
    Quaternion::new(row[c * 4], row[c * 4 + 1], row[c * 4 + 2], row[c * 4 + 3])
}

fn add_quat(buf: &mut [f64], c: usize, q: Quaternion, coeff: f64) {
    buf[c * 4] += coeff * q.a;
    buf[c * 4 + 1] += coeff * q.b;
    buf[c * 4 + 2] += coeff * q.c;
    buf[c * 4 + 3] += coeff * q.d;
}

/// QuatE score of generic quaternion vectors: sum over components of
/// <lhs_c (x) normalize(rel_c), rhs_c>. Higher is more plausible.
pub fn score_quat(lhs: &[f64], rel: &[f64], rhs: &[f64], dim: usize) -> f64 {
    debug_assert_eq!(lhs.len(), 4 * dim);
    debug_assert_eq!(rel.len(), 4 * dim);
    debug_assert_eq!(rhs.len(), 4 * dim);
    (0..dim)
        .map(|c| {
            let u = quat_at(rel, c).normalized();
            quat_at(lhs, c).hamilton(u).dot(quat_at(rhs, c))
        })
        .sum()
}

/// Accumulates `coeff * d(score)/d(param)` for the generic quaternion score
/// into the three gradient buffers.
///
/// With u = r/|r| (unit relation component):
///   d/d(rhs) = lhs (x) u
///   d/d(lhs) = rhs (x) conj(u)
///   d/d(u)   = conj(lhs) (x) rhs, chained through the normalization
///   d/d(r)   = (g_u - <g_u, u> u) / |r|
/// Components under the epsilon floor are treated as the constant identity,
/// contributing no relation gradient.
#[allow(clippy::too_many_arguments)]
pub fn score_quat_grad(
    lhs: &[f64],
    rel: &[f64],
    rhs: &[f64],
    dim: usize,
    coeff: f64,
    g_lhs: &mut [f64],
    g_rel: &mut [f64],
    g_rhs: &mut [f64],
) {
    for c in 0..dim {
        let l = quat_at(lhs, c);
        let r = quat_at(rel, c);
        let t = quat_at(rhs, c);
        let n = r.norm();
        let u = if n < NORM_EPSILON {
            Quaternion::IDENTITY
        } else {
            r.scale(1.0 / n)
        };
        add_quat(g_rhs, c, l.hamilton(u), coeff);
        add_quat(g_lhs, c, t.hamilton(u.conjugate()), coeff);
        if n >= NORM_EPSILON {
            let g_u = l.conjugate().hamilton(t);
            let radial = g_u.dot(u);
            let g_r = (g_u - u.scale(radial)).scale(1.0 / n);
            add_quat(g_rel, c, g_r, coeff);
        }
    }
}

/// Base-level triple score from the parameter tables.
pub fn score_base(params: &ModelParams, triple: &BaseTriplet) -> f64 {
    score_quat(
        params.entity(triple.h.0),
        params.relation(triple.r.0),
        params.entity(triple.t.0),
        params.dims.d,
    )
}

/// Projects the concatenated (h, r, t) embedding into d_hat quaternion
/// components: plane-wise T[j] = sum_k W[j,k] x[k].
pub fn triplet_embed(params: &ModelParams, triple: &BaseTriplet) -> Vec<f64> {
    triplet_embed_of(params, params.entity(triple.h.0), params.relation(triple.r.0), params.entity(triple.t.0))
}

/// Same projection for an arbitrary (head, relation, tail) embedding choice,
/// used by conditional link prediction to embed candidate triples on the fly.
pub fn triplet_embed_of(params: &ModelParams, h: &[f64], r: &[f64], t: &[f64]) -> Vec<f64> {
    let d = params.dims.d;
    let d_hat = params.dims.d_hat;
    let mut out = vec![0.0; 4 * d_hat];
    for j in 0..d_hat {
        let w_row = &params.w[j * 3 * d..(j + 1) * 3 * d];
        for p in 0..4 {
            let mut acc = 0.0;
            for k in 0..d {
                acc += w_row[k] * h[k * 4 + p];
                acc += w_row[d + k] * r[k * 4 + p];
                acc += w_row[2 * d + k] * t[k * 4 + p];
            }
            out[j * 4 + p] = acc;
        }
    }
    out
}

/// Backpropagates a gradient on the triplet embedding through W into the
/// three source rows and into W itself.
#[allow(clippy::too_many_arguments)]
pub fn triplet_embed_backprop(
    params: &ModelParams,
    h: &[f64],
    r: &[f64],
    t: &[f64],
    g_out: &[f64],
    g_h: &mut [f64],
    g_r: &mut [f64],
    g_t: &mut [f64],
    g_w: &mut [f64],
) {
    let d = params.dims.d;
    let d_hat = params.dims.d_hat;
    for j in 0..d_hat {
        let w_row = &params.w[j * 3 * d..(j + 1) * 3 * d];
        let gw_row = &mut g_w[j * 3 * d..(j + 1) * 3 * d];
        for p in 0..4 {
            let g = g_out[j * 4 + p];
            if g == 0.0 {
                continue;
            }
            for k in 0..d {
                g_h[k * 4 + p] += w_row[k] * g;
                g_r[k * 4 + p] += w_row[d + k] * g;
                g_t[k * 4 + p] += w_row[2 * d + k] * g;
                gw_row[k] += g * h[k * 4 + p];
                gw_row[d + k] += g * r[k * 4 + p];
                gw_row[2 * d + k] += g * t[k * 4 + p];
            }
        }
    }
}

/// Higher-level score f(T_i, r_hat, T_j) at dimension d_hat.
pub fn score_higher(params: &ModelParams, ti: &BaseTriplet, rhat: u32, tj: &BaseTriplet) -> f64 {
    let ei = triplet_embed(params, ti);
    let ej = triplet_embed(params, tj);
    score_quat(&ei, params.higher_relation(rhat), &ej, params.dims.d_hat)
}

/// Numerically stable log(1 + exp(x)).
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic sigmoid, the softplus derivative.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Loss averaging scheme: `Separate` averages positives and negatives
/// independently and adds the two means; `Joint` takes a single mean over
/// the union.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossVariant {
    Separate,
    Joint,
}

/// Sparse gradient accumulator mirroring the parameter tables.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    pub entities: HashMap<u32, Vec<f64>>,
    pub relations: HashMap<u32, Vec<f64>>,
    pub higher_relations: HashMap<u32, Vec<f64>>,
    pub w: Option<Vec<f64>>,
}

impl Gradients {
    pub fn entity_mut(&mut self, id: u32, row: usize) -> &mut Vec<f64> {
        self.entities.entry(id).or_insert_with(|| vec![0.0; row])
    }

    pub fn relation_mut(&mut self, id: u32, row: usize) -> &mut Vec<f64> {
        self.relations.entry(id).or_insert_with(|| vec![0.0; row])
    }

    pub fn higher_mut(&mut self, id: u32, row: usize) -> &mut Vec<f64> {
        self.higher_relations.entry(id).or_insert_with(|| vec![0.0; row])
    }

    pub fn w_mut(&mut self, len: usize) -> &mut Vec<f64> {
        self.w.get_or_insert_with(|| vec![0.0; len])
    }
}

fn variant_weights(variant: LossVariant, n_pos: usize, n_neg: usize) -> (f64, f64) {
    match variant {
        LossVariant::Separate => (
            if n_pos > 0 { 1.0 / n_pos as f64 } else { 0.0 },
            if n_neg > 0 { 1.0 / n_neg as f64 } else { 0.0 },
        ),
        LossVariant::Joint => {
            let n = (n_pos + n_neg) as f64;
            if n == 0.0 {
                (0.0, 0.0)
            } else {
                (1.0 / n, 1.0 / n)
            }
        }
    }
}

/// Regularization config for a batch loss.
#[derive(Debug, Clone, Copy)]
pub struct Regularization {
    pub beta: f64,
    /// Whether beta also applies to W (only relevant to the higher loss).
    pub include_w: bool,
}

/// Softplus loss over base-level positives and negatives, with beta-weighted
/// L2 on the distinct touched rows. Gradients accumulate into `grads`.
pub fn loss_base(
    params: &ModelParams,
    positives: &[BaseTriplet],
    negatives: &[BaseTriplet],
    variant: LossVariant,
    reg: Regularization,
    grads: &mut Gradients,
) -> f64 {
    if positives.is_empty() && negatives.is_empty() {
        return 0.0;
    }
    let d = params.dims.d;
    let row = params.dims.entity_row();
    let (w_pos, w_neg) = variant_weights(variant, positives.len(), negatives.len());
    let mut loss = 0.0;
    let mut per_triple = |triple: &BaseTriplet, sign: f64, weight: f64, grads: &mut Gradients| {
        let f = score_base(params, triple);
        loss += weight * softplus(sign * f);
        // d/df softplus(sign * f) = sign * sigmoid(sign * f)
        let coeff = weight * sign * sigmoid(sign * f);
        let mut gh = vec![0.0; row];
        let mut gr = vec![0.0; row];
        let mut gt = vec![0.0; row];
        score_quat_grad(
            params.entity(triple.h.0),
            params.relation(triple.r.0),
            params.entity(triple.t.0),
            d,
            coeff,
            &mut gh,
            &mut gr,
            &mut gt,
        );
        axpy(grads.entity_mut(triple.h.0, row), &gh);
        axpy(grads.relation_mut(triple.r.0, row), &gr);
        axpy(grads.entity_mut(triple.t.0, row), &gt);
    };
    for t in positives {
        per_triple(t, -1.0, w_pos, grads);
    }
    for t in negatives {
        per_triple(t, 1.0, w_neg, grads);
    }
    loss + regularize_base(params, positives.iter().chain(negatives), reg.beta, grads)
}

fn axpy(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Adds beta * ||row||^2 over distinct entity/relation rows touched by the
/// batch, with matching gradients.
fn regularize_base<'a>(
    params: &ModelParams,
    triples: impl Iterator<Item = &'a BaseTriplet>,
    beta: f64,
    grads: &mut Gradients,
) -> f64 {
    if beta == 0.0 {
        return 0.0;
    }
    let row = params.dims.entity_row();
    let mut ents = std::collections::HashSet::new();
    let mut rels = std::collections::HashSet::new();
    for t in triples {
        ents.insert(t.h.0);
        ents.insert(t.t.0);
        rels.insert(t.r.0);
    }
    let mut loss = 0.0;
    for id in ents {
        let row_vals = params.entity(id);
        loss += beta * row_vals.iter().map(|v| v * v).sum::<f64>();
        let g = grads.entity_mut(id, row);
        for (gi, v) in g.iter_mut().zip(row_vals) {
            *gi += 2.0 * beta * v;
        }
    }
    for id in rels {
        let row_vals = params.relation(id);
        loss += beta * row_vals.iter().map(|v| v * v).sum::<f64>();
        let g = grads.relation_mut(id, row);
        for (gi, v) in g.iter_mut().zip(row_vals) {
            *gi += 2.0 * beta * v;
        }
    }
    loss
}

/// Softplus loss over higher-level positives and negatives. Gradients flow
/// into the entity and relation tables (through W), the higher-relation
/// table, and W itself. `triplets` is the id-indexed triplet universe.
pub fn loss_high(
    params: &ModelParams,
    positives: &[HigherTriplet],
    negatives: &[HigherTriplet],
    triplets: &[BaseTriplet],
    variant: LossVariant,
    reg: Regularization,
    grads: &mut Gradients,
) -> f64 {
    if positives.is_empty() && negatives.is_empty() {
        return 0.0;
    }
    let d_hat = params.dims.d_hat;
    let row = params.dims.entity_row();
    let hrow = params.dims.higher_row();
    let w_len = params.dims.w_len();
    let (w_pos, w_neg) = variant_weights(variant, positives.len(), negatives.len());
    let mut loss = 0.0;
    let mut per_triple = |ht: &HigherTriplet, sign: f64, weight: f64, grads: &mut Gradients| {
        let ti = triplets[ht.ti.0 as usize];
        let tj = triplets[ht.tj.0 as usize];
        let ei = triplet_embed(params, &ti);
        let ej = triplet_embed(params, &tj);
        let rhat = params.higher_relation(ht.rhat.0);
        let f = score_quat(&ei, rhat, &ej, d_hat);
        loss += weight * softplus(sign * f);
        let coeff = weight * sign * sigmoid(sign * f);
        let mut g_ei = vec![0.0; 4 * d_hat];
        let mut g_rhat = vec![0.0; 4 * d_hat];
        let mut g_ej = vec![0.0; 4 * d_hat];
        score_quat_grad(&ei, rhat, &ej, d_hat, coeff, &mut g_ei, &mut g_rhat, &mut g_ej);
        axpy(grads.higher_mut(ht.rhat.0, hrow), &g_rhat);
        for (triple, g_emb) in [(&ti, &g_ei), (&tj, &g_ej)] {
            let mut gh = vec![0.0; row];
            let mut gr = vec![0.0; row];
            let mut gt = vec![0.0; row];
            let gw = grads.w_mut(w_len);
            triplet_embed_backprop(
                params,
                params.entity(triple.h.0),
                params.relation(triple.r.0),
                params.entity(triple.t.0),
                g_emb,
                &mut gh,
                &mut gr,
                &mut gt,
                gw,
            );
            axpy(grads.entity_mut(triple.h.0, row), &gh);
            axpy(grads.relation_mut(triple.r.0, row), &gr);
            axpy(grads.entity_mut(triple.t.0, row), &gt);
        }
    };
    for ht in positives {
        per_triple(ht, -1.0, w_pos, grads);
    }
    for ht in negatives {
        per_triple(ht, 1.0, w_neg, grads);
    }

    // regularization over touched rows: base rows of the involved triples,
    // higher-relation rows, and W when enabled
    if reg.beta != 0.0 {
        let touched: Vec<BaseTriplet> = positives
            .iter()
            .chain(negatives)
            .flat_map(|ht| [triplets[ht.ti.0 as usize], triplets[ht.tj.0 as usize]])
            .collect();
        loss += regularize_base(params, touched.iter(), reg.beta, grads);
        let mut hrels = std::collections::HashSet::new();
        for ht in positives.iter().chain(negatives) {
            hrels.insert(ht.rhat.0);
        }
        for id in hrels {
            let row_vals = params.higher_relation(id);
            loss += reg.beta * row_vals.iter().map(|v| v * v).sum::<f64>();
            let g = grads.higher_mut(id, hrow);
            for (gi, v) in g.iter_mut().zip(row_vals) {
                *gi += 2.0 * reg.beta * v;
            }
        }
        if reg.include_w {
            loss += reg.beta * params.w.iter().map(|v| v * v).sum::<f64>();
            let gw = grads.w_mut(w_len);
            for (gi, v) in gw.iter_mut().zip(&params.w) {
                *gi += 2.0 * reg.beta * v;
            }
        }
    }
    loss
}

/// The augmented-triple loss has the same functional form as the base loss.
pub fn loss_aug(
    params: &ModelParams,
    positives: &[BaseTriplet],
    negatives: &[BaseTriplet],
    variant: LossVariant,
    reg: Regularization,
    grads: &mut Gradients,
) -> f64 {
    loss_base(params, positives, negatives, variant, reg, grads)
}

/// Weighted combination of the three loss terms. Ablation switches zero out
/// the higher and augmented terms.
pub fn total_loss(
    base: f64,
    high: f64,
    aug: f64,
    lambda1: f64,
    lambda2: f64,
    use_high: bool,
    use_aug: bool,
) -> f64 {
    let l1 = if use_high { lambda1 } else { 0.0 };
    let l2 = if use_aug { lambda2 } else { 0.0 };
    base + l1 * high + l2 * aug
}

// ---------------------------------------------------------------------------
// finite-difference gradient checking

/// Worst coordinate of a finite-difference comparison.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: String,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error <= tolerance
    }
}

/// Compares analytic gradients against central finite differences of `f`
/// over every coordinate touched by `grads`. Intended for small dimensions.
pub fn grad_check<F: Fn(&ModelParams) -> f64>(
    params: &ModelParams,
    grads: &Gradients,
    f: F,
    epsilon: f64,
) -> GradCheckReport {
    #[derive(Debug, Clone, Copy)]
    enum Table {
        Entity,
        Relation,
        Higher,
        W,
    }

    fn slot(w: &mut ModelParams, table: Table, offset: usize) -> &mut f64 {
        match table {
            Table::Entity => &mut w.entities[offset],
            Table::Relation => &mut w.relations[offset],
            Table::Higher => &mut w.higher_relations[offset],
            Table::W => &mut w.w[offset],
        }
    }

    let mut work = params.clone();
    let mut max_rel = 0.0;
    let mut worst = String::from("none");
    let mut checked = 0;
    let check = |work: &mut ModelParams,
                 table: Table,
                 id: u32,
                 offset: usize,
                 analytic: f64,
                 max_rel: &mut f64,
                 worst: &mut String,
                 checked: &mut usize| {
        let orig = *slot(work, table, offset);
        *slot(work, table, offset) = orig + epsilon;
        let plus = f(work);
        *slot(work, table, offset) = orig - epsilon;
        let minus = f(work);
        *slot(work, table, offset) = orig;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let scale = analytic.abs().max(numeric.abs()).max(1e-8);
        let rel = (analytic - numeric).abs() / scale;
        *checked += 1;
        if rel > *max_rel {
            *max_rel = rel;
            *worst = format!(
                "{table:?}[{id}+{offset}]: analytic {analytic:.6e}, numeric {numeric:.6e}"
            );
        }
    };

    let row = params.dims.entity_row();
    for (&id, g) in &grads.entities {
        for (k, &a) in g.iter().enumerate() {
            check(&mut work, Table::Entity, id, id as usize * row + k, a, &mut max_rel, &mut worst, &mut checked);
        }
    }
    for (&id, g) in &grads.relations {
        for (k, &a) in g.iter().enumerate() {
            check(&mut work, Table::Relation, id, id as usize * row + k, a, &mut max_rel, &mut worst, &mut checked);
        }
    }
    let hrow = params.dims.higher_row();
    for (&id, g) in &grads.higher_relations {
        for (k, &a) in g.iter().enumerate() {
            check(&mut work, Table::Higher, id, id as usize * hrow + k, a, &mut max_rel, &mut worst, &mut checked);
        }
    }
    if let Some(gw) = &grads.w {
        for (k, &a) in gw.iter().enumerate() {
            check(&mut work, Table::W, 0, k, a, &mut max_rel, &mut worst, &mut checked);
        }
    }
    GradCheckReport {
        max_rel_error: max_rel,
        worst,
        checked,
    }
}

// ---------------------------------------------------------------------------
// checkpoint format

const CHECKPOINT_MAGIC: &[u8; 4] = b"BKGE";
const CHECKPOINT_VERSION: u32 = 1;

/// Writes a checkpoint: magic, version, shape header, backbone tag, seed,
/// then the four parameter blocks as little-endian f64 in declared order.
pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<(), ModelError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [
        params.dims.n_entities as u64,
        params.dims.n_relations as u64,
        params.dims.n_higher_relations as u64,
        params.dims.d as u64,
        params.dims.d_hat as u64,
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let tag = BACKBONE_QUATE.as_bytes();
    buf.extend_from_slice(&(tag.len() as u32).to_le_bytes());
    buf.extend_from_slice(tag);
    buf.extend_from_slice(&params.seed.to_le_bytes());
    for block in [&params.entities, &params.relations, &params.higher_relations, &params.w] {
        for v in block.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let tmp = path.with_extension("tmp");
    std::fs::File::create(&tmp)?.write_all(&buf)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams, ModelError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8], ModelError> {
        if *pos + n > bytes.len() {
            return Err(ModelError::BadCheckpoint("truncated file".into()));
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    if take(&mut pos, 4)? != CHECKPOINT_MAGIC {
        return Err(ModelError::BadCheckpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(ModelError::BadCheckpoint(format!("unsupported version {version}")));
    }
    let read_u64 = |pos: &mut usize| -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(take(pos, 8)?.try_into().unwrap()))
    };
    let n_entities = read_u64(&mut pos)? as usize;
    let n_relations = read_u64(&mut pos)? as usize;
    let n_higher_relations = read_u64(&mut pos)? as usize;
    let d = read_u64(&mut pos)? as usize;
    let d_hat = read_u64(&mut pos)? as usize;
    let tag_len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
    let tag = String::from_utf8(take(&mut pos, tag_len)?.to_vec())
        .map_err(|_| ModelError::BadCheckpoint("bad backbone tag".into()))?;
    if tag != BACKBONE_QUATE {
        return Err(ModelError::BadCheckpoint(format!("unknown backbone {tag}")));
    }
    let seed = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
    let dims = ModelDims {
        n_entities,
        n_relations,
        n_higher_relations,
        d,
        d_hat,
    };
    let read_block = |pos: &mut usize, n: usize| -> Result<Vec<f64>, ModelError> {
        let raw = take(pos, n * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let entities = read_block(&mut pos, n_entities * 4 * d)?;
    let relations = read_block(&mut pos, n_relations * 4 * d)?;
    let higher_relations = read_block(&mut pos, n_higher_relations * 4 * d_hat)?;
    let w = read_block(&mut pos, d_hat * 3 * d)?;
    if pos != bytes.len() {
        return Err(ModelError::BadCheckpoint("trailing bytes".into()));
    }
    Ok(ModelParams {
        dims,
        entities,
        relations,
        higher_relations,
        w,
        seed,
    })
}
