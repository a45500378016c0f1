//! Batch loss and analytic gradients for every trainable model kind.
//!
//! Two objectives are supported, both summed over the positives in a batch
//! and their sampled corruptions:
//!
//! * log-likelihood (`ll`): softmax-style, per corruption direction,
//!   `logsumexp(corruption scores) - score(positive)`. By default the
//!   positive is *excluded* from the denominator
//!   ([`TrainConfig::ll_denominator_includes_positive`] restores the textbook
//!   softmax); with the positive excluded the loss can go negative once the
//!   positive outscores every corruption, which is fine — optimization only
//!   cares about the gradient. A direction with no eligible corruptions
//!   contributes nothing.
//! * max-margin (`mm`): `sum over corruptions of
//!   max(0, margin + score(corruption) - score(positive))`.
//!
//! Jointly-scored combinations (`*-as`) put the *sum* of constituent scores
//! through the objective; separately-trained combinations (`dm+f-al`,
//! `dm+f-ral`) evaluate each constituent's objective on its own corruption
//! sample, and `dm+f-ral` adds the `f` weight penalty once per batch.

use crate::kb::{Dataset, Triple};
use crate::models::{
    pair_ref, score, score_gradients, BaseModel, EmbeddingStore, ERef, GradMap, ModelParams, PRef,
    ResolvedTriple,
};

use super::negatives::NegSamples;
use super::{Loss, TrainConfig};

/// Negatives for one positive triple: one [`NegSamples`] per sampling plan —
/// a single entry for single models and jointly-scored kinds, one entry per
/// constituent (in `constituents()` order) for separately-trained kinds.
#[derive(Debug, Clone)]
pub struct TripleNegs {
    pub per: Vec<NegSamples>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Objects,
    Subjects,
    Pairs,
}

/// Loss and per-store gradients for one batch. `batch` holds indices into
/// `triples`/`negs`, which stay in dataset order; the caller shuffles indices.
///
/// Returns the summed loss and one [`GradMap`] per store in
/// `params.stores` order. The gradients are exact for the returned loss, so a
/// finite-difference probe of this function against its own gradient output
/// must agree to O(h^2).
pub fn batch_loss(
    params: &ModelParams,
    ds: &Dataset,
    triples: &[Triple],
    negs: &[TripleNegs],
    batch: &[usize],
    cfg: &TrainConfig,
) -> (f64, Vec<GradMap>) {
    let kind = params.kind;
    let loss = cfg.loss_for(kind);
    let mut grads: Vec<GradMap> = params.stores.iter().map(|_| GradMap::new()).collect();
    let mut total = 0.0;

    if kind.is_single() || kind.trains_on_sum() {
        // One group containing every store, one corruption sample per triple.
        let group: Vec<(usize, &EmbeddingStore)> =
            params.stores.iter().enumerate().map(|(i, s)| (i, s)).collect();
        let dirs = if kind == crate::models::ModelKind::F {
            &[Direction::Pairs][..]
        } else {
            &[Direction::Objects, Direction::Subjects][..]
        };
        for &i in batch {
            total += triple_loss(&group, ds, &triples[i], &negs[i].per[0], dirs, loss, cfg, &mut grads);
        }
    } else {
        // Separately-trained constituents: each store sees its own sample.
        for (c, base) in params.kind.constituents().iter().enumerate() {
            let group = vec![(c, &params.stores[c])];
            let dirs = match base {
                BaseModel::F => &[Direction::Pairs][..],
                _ => &[Direction::Objects, Direction::Subjects][..],
            };
            for &i in batch {
                total +=
                    triple_loss(&group, ds, &triples[i], &negs[i].per[c], dirs, loss, cfg, &mut grads);
            }
        }
        if kind.regularizes_f() {
            let f_idx = params
                .stores
                .iter()
                .position(|s| s.model() == BaseModel::F)
                .expect("ral kind has an f constituent");
            total += weight_penalty(
                &params.stores[f_idx],
                cfg.reg_lambda,
                cfg.ral_penalty_squared,
                &mut grads[f_idx],
            );
        }
    }
    (total, grads)
}

fn group_score(group: &[(usize, &EmbeddingStore)], rt: &ResolvedTriple) -> f64 {
    group.iter().map(|(_, s)| score(s, rt)).sum()
}

fn group_gradients(
    group: &[(usize, &EmbeddingStore)],
    rt: &ResolvedTriple,
    coeff: f64,
    grads: &mut [GradMap],
) {
    for (gi, s) in group {
        score_gradients(s, rt, coeff, &mut grads[*gi]);
    }
}

/// The corrupted triples for one direction, resolved for scoring. Entity
/// corruptions re-resolve the ordered pair (an `f` constituent in the group
/// must read the corrupted pair's row, or the OOV row if that pair was never
/// trained); pair corruptions leave the entity slots alone, since only `f`
/// reads the pair anyway.
fn corruptions(
    ds: &Dataset,
    t: &Triple,
    ns: &NegSamples,
    dir: Direction,
    needs_pair: bool,
) -> Vec<ResolvedTriple> {
    let resolve_pair = |a: ERef, b: ERef| -> PRef {
        if !needs_pair {
            return PRef::Oov;
        }
        match (a, b) {
            (ERef::Id(x), ERef::Id(y)) => pair_ref(ds, x, y),
            _ => PRef::Oov,
        }
    };
    match dir {
        Direction::Objects => ns
            .objects
            .iter()
            .map(|&c| ResolvedTriple {
                e1: ERef::Id(t.e1),
                r: t.r,
                e2: c,
                pair: resolve_pair(ERef::Id(t.e1), c),
            })
            .collect(),
        Direction::Subjects => ns
            .subjects
            .iter()
            .map(|&c| ResolvedTriple {
                e1: c,
                r: t.r,
                e2: ERef::Id(t.e2),
                pair: resolve_pair(c, ERef::Id(t.e2)),
            })
            .collect(),
        Direction::Pairs => ns
            .pairs
            .iter()
            .map(|&p| ResolvedTriple {
                e1: ERef::Id(t.e1),
                r: t.r,
                e2: ERef::Id(t.e2),
                pair: p,
            })
            .collect(),
    }
}

#[allow(clippy::too_many_arguments)]
fn triple_loss(
    group: &[(usize, &EmbeddingStore)],
    ds: &Dataset,
    t: &Triple,
    ns: &NegSamples,
    dirs: &[Direction],
    loss: Loss,
    cfg: &TrainConfig,
    grads: &mut [GradMap],
) -> f64 {
    let needs_pair = group.iter().any(|(_, s)| s.model() == BaseModel::F);
    let rt_pos = ResolvedTriple::from_train(ds, t);
    let pos_score = group_score(group, &rt_pos);
    let mut total = 0.0;

    match loss {
        Loss::LogLikelihood => {
            for &dir in dirs {
                let corr = corruptions(ds, t, ns, dir, needs_pair);
                if corr.is_empty() {
                    continue;
                }
                let scores: Vec<f64> = corr.iter().map(|rt| group_score(group, rt)).collect();
                let include_pos = cfg.ll_denominator_includes_positive;
                let mut m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if include_pos {
                    m = m.max(pos_score);
                }
                let mut z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
                if include_pos {
                    z += (pos_score - m).exp();
                }
                let lse = m + z.ln();
                total += lse - pos_score;

                for (rt, s) in corr.iter().zip(&scores) {
                    group_gradients(group, rt, (s - lse).exp(), grads);
                }
                let w_pos = if include_pos { (pos_score - lse).exp() } else { 0.0 };
                group_gradients(group, &rt_pos, w_pos - 1.0, grads);
            }
        }
        Loss::MaxMargin => {
            for &dir in dirs {
                for rt in corruptions(ds, t, ns, dir, needs_pair) {
                    let term = cfg.margin + group_score(group, &rt) - pos_score;
                    if term > 0.0 {
                        total += term;
                        group_gradients(group, &rt, 1.0, grads);
                        group_gradients(group, &rt_pos, -1.0, grads);
                    }
                }
            }
        }
    }
    total
}

/// `lambda * |theta|^2` (or `lambda * |theta|` when `squared` is false) over
/// every parameter of the given store, with matching gradients. Applied once
/// per batch.
fn weight_penalty(store: &EmbeddingStore, lambda: f64, squared: bool, grad: &mut GradMap) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let sq = store.squared_norm();
    if squared {
        for block in store.blocks() {
            let pb = store.block(block).unwrap();
            for row in 0..pb.rows() {
                grad.add(block, row, 2.0 * lambda, pb.row(row));
            }
        }
        lambda * sq
    } else {
        let norm = sq.sqrt();
        if norm > 0.0 {
            let c = lambda / norm;
            for block in store.blocks() {
                let pb = store.block(block).unwrap();
                for row in 0..pb.rows() {
                    grad.add(block, row, c, pb.row(row));
                }
            }
        }
        lambda * norm
    }
}
