use std::collections::HashMap;

use super::store::{Block, EmbeddingStore};
use super::BaseModel;
use crate::kb::{Dataset, EntityId, PairId, RelationId, Triple};

/// An entity reference for scoring: a vocabulary row or the shared OOV row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ERef {
    Id(EntityId),
    Oov,
}

/// A pair reference for scoring: a trained pair row or the shared OOV row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PRef {
    Id(PairId),
    Oov,
}

/// A triple with its embedding rows pinned down.
///
/// Scoring never guesses which row to use: the caller decides, through one
/// of the constructors, how untrained entities and pairs resolve. Entity
/// models read `e1`/`e2`, the pair model reads `pair`; each ignores the
/// fields it does not use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolvedTriple {
    pub e1: ERef,
    pub r: RelationId,
    pub e2: ERef,
    pub pair: PRef,
}

impl ResolvedTriple {
    /// Training-time view: entities keep their own rows (every vocabulary
    /// entity has one), the pair resolves against the train-split pair index.
    pub fn from_train(ds: &Dataset, t: &Triple) -> ResolvedTriple {
        ResolvedTriple {
            e1: ERef::Id(t.e1),
            r: t.r,
            e2: ERef::Id(t.e2),
            pair: pair_ref(ds, t.e1, t.e2),
        }
    }

    /// Ranking-time view: entities never seen in training fall back to the
    /// OOV entity row, untrained pairs to the OOV pair row. For combined
    /// kinds this is exactly the backed-off sum: each constituent uses its
    /// trained rows where they exist and its placeholder where they don't.
    pub fn for_eval(ds: &Dataset, t: &Triple) -> ResolvedTriple {
        ResolvedTriple {
            e1: eval_entity_ref(ds, t.e1),
            r: t.r,
            e2: eval_entity_ref(ds, t.e2),
            pair: pair_ref(ds, t.e1, t.e2),
        }
    }
}

/// OOV-aware entity reference: entities with no training occurrence share
/// the OOV entity row.
pub fn eval_entity_ref(ds: &Dataset, e: EntityId) -> ERef {
    if ds.entity_trained(e) {
        ERef::Id(e)
    } else {
        ERef::Oov
    }
}

/// Pair reference against the train-split pair index.
pub fn pair_ref(ds: &Dataset, e1: EntityId, e2: EntityId) -> PRef {
    match ds.vocab.pair_id(e1, e2) {
        Some(id) => PRef::Id(id),
        None => PRef::Oov,
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn entity_row(store: &EmbeddingStore, r: ERef) -> &[f64] {
    let idx = match r {
        ERef::Id(e) => e.index(),
        ERef::Oov => store.oov_entity_row(),
    };
    store.block(Block::Entity).expect("entity block").row(idx)
}

fn entity_row_index(store: &EmbeddingStore, r: ERef) -> usize {
    match r {
        ERef::Id(e) => e.index(),
        ERef::Oov => store.oov_entity_row(),
    }
}

fn pair_row(store: &EmbeddingStore, p: PRef) -> &[f64] {
    let idx = match p {
        PRef::Id(id) => id.index(),
        PRef::Oov => store.oov_pair_row(),
    };
    store.block(Block::Pair).expect("pair block").row(idx)
}

fn pair_row_index(store: &EmbeddingStore, p: PRef) -> usize {
    match p {
        PRef::Id(id) => id.index(),
        PRef::Oov => store.oov_pair_row(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Score of one resolved triple under one base model's parameters.
pub fn score(store: &EmbeddingStore, rt: &ResolvedTriple) -> f64 {
    match store.model() {
        BaseModel::TransE => {
            let e1 = entity_row(store, rt.e1);
            let r = store.block(Block::Relation).unwrap().row(rt.r.index());
            let e2 = entity_row(store, rt.e2);
            let mut sq = 0.0;
            for i in 0..store.dim() {
                let d = e1[i] + r[i] - e2[i];
                sq += d * d;
            }
            -sq.sqrt()
        }
        BaseModel::DistMult => {
            let e1 = entity_row(store, rt.e1);
            let r = store.block(Block::Relation).unwrap().row(rt.r.index());
            let e2 = entity_row(store, rt.e2);
            // Grouping the entity product keeps the score exactly symmetric
            // in (e1, e2), not just symmetric up to rounding.
            (0..store.dim()).map(|i| r[i] * (e1[i] * e2[i])).sum()
        }
        BaseModel::E => {
            let e1 = entity_row(store, rt.e1);
            let e2 = entity_row(store, rt.e2);
            let r_subj = store.block(Block::Relation).unwrap().row(rt.r.index());
            let r_obj = store.block(Block::RelationObj).unwrap().row(rt.r.index());
            dot(e1, r_subj) + dot(e2, r_obj)
        }
        BaseModel::F => {
            let r = store.block(Block::Relation).unwrap().row(rt.r.index());
            dot(r, pair_row(store, rt.pair))
        }
    }
}

/// Per-(block, row) gradient accumulator for one store over one batch.
#[derive(Debug, Default, Clone)]
pub struct GradMap {
    map: HashMap<(Block, usize), Vec<f64>>,
}

impl GradMap {
    pub fn new() -> GradMap {
        GradMap::default()
    }

    /// `g[block][row] += coeff * v`
    pub fn add(&mut self, block: Block, row: usize, coeff: f64, v: &[f64]) {
        let g = self
            .map
            .entry((block, row))
            .or_insert_with(|| vec![0.0; v.len()]);
        for (gi, vi) in g.iter_mut().zip(v) {
            *gi += coeff * vi;
        }
    }

    /// `g[block][row] += coeff * (a ∘ b)` (elementwise product)
    pub fn add_mul(&mut self, block: Block, row: usize, coeff: f64, a: &[f64], b: &[f64]) {
        let g = self
            .map
            .entry((block, row))
            .or_insert_with(|| vec![0.0; a.len()]);
        for i in 0..a.len() {
            g[i] += coeff * a[i] * b[i];
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(Block, usize), &Vec<f64>)> {
        self.map.iter()
    }

    pub fn get(&self, block: Block, row: usize) -> Option<&[f64]> {
        self.map.get(&(block, row)).map(Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }
}

/// Accumulates `coeff * d(score)/d(row)` for every row the triple touches.
///
/// When a row participates twice (say `e1 == e2` under `distmult`) both
/// contributions land on it, which is what the chain rule wants.
pub fn score_gradients(store: &EmbeddingStore, rt: &ResolvedTriple, coeff: f64, out: &mut GradMap) {
    match store.model() {
        BaseModel::TransE => {
            let dim = store.dim();
            let e1 = entity_row(store, rt.e1);
            let r = store.block(Block::Relation).unwrap().row(rt.r.index());
            let e2 = entity_row(store, rt.e2);
            let mut u = vec![0.0; dim];
            let mut sq = 0.0;
            for i in 0..dim {
                u[i] = e1[i] + r[i] - e2[i];
                sq += u[i] * u[i];
            }
            let norm = sq.sqrt();
            if norm == 0.0 {
                // Kink of the norm; take the zero subgradient.
                return;
            }
            let scale = -coeff / norm;
            for v in &mut u {
                *v *= scale;
            }
            out.add(Block::Entity, entity_row_index(store, rt.e1), 1.0, &u);
            out.add(Block::Relation, rt.r.index(), 1.0, &u);
            out.add(Block::Entity, entity_row_index(store, rt.e2), -1.0, &u);
        }
        BaseModel::DistMult => {
            let e1 = entity_row(store, rt.e1);
            let r = store.block(Block::Relation).unwrap().row(rt.r.index());
            let e2 = entity_row(store, rt.e2);
            out.add_mul(Block::Entity, entity_row_index(store, rt.e1), coeff, r, e2);
            out.add_mul(Block::Entity, entity_row_index(store, rt.e2), coeff, r, e1);
            out.add_mul(Block::Relation, rt.r.index(), coeff, e1, e2);
        }
        BaseModel::E => {
            let e1 = entity_row(store, rt.e1);
            let e2 = entity_row(store, rt.e2);
            let r_subj = store.block(Block::Relation).unwrap().row(rt.r.index());
            let r_obj = store.block(Block::RelationObj).unwrap().row(rt.r.index());
            out.add(Block::Entity, entity_row_index(store, rt.e1), coeff, r_subj);
            out.add(Block::Relation, rt.r.index(), coeff, e1);
            out.add(Block::Entity, entity_row_index(store, rt.e2), coeff, r_obj);
            out.add(Block::RelationObj, rt.r.index(), coeff, e2);
        }
        BaseModel::F => {
            let r = store.block(Block::Relation).unwrap().row(rt.r.index());
            let p = pair_row(store, rt.pair);
            out.add(Block::Pair, pair_row_index(store, rt.pair), coeff, r);
            out.add(Block::Relation, rt.r.index(), coeff, p);
        }
    }
}
