use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::score::GradMap;
use super::BaseModel;
use crate::error::{Error, Result};
use crate::kb::Dataset;

pub const ADAGRAD_EPS: f64 = 1e-8;

/// Addresses one parameter matrix inside an [`EmbeddingStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Block {
    /// Entity rows; the extra last row is the shared OOV entity row.
    Entity,
    /// Relation rows (for the `e` model: the subject-side vectors).
    Relation,
    /// Object-side relation rows (`e` model only).
    RelationObj,
    /// Ordered-pair rows; the extra last row is the shared OOV pair row.
    Pair,
}

impl Block {
    pub fn name(self) -> &'static str {
        match self {
            Block::Entity => "entity",
            Block::Relation => "relation",
            Block::RelationObj => "relation_obj",
            Block::Pair => "pair",
        }
    }
}

/// A dense `rows x dim` matrix plus its AdaGrad squared-gradient
/// accumulator.
#[derive(Debug, Clone)]
pub struct ParamBlock {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
    accum: Vec<f64>,
}

impl ParamBlock {
    fn zeros(rows: usize, dim: usize) -> ParamBlock {
        ParamBlock {
            rows,
            dim,
            data: vec![0.0; rows * dim],
            accum: vec![0.0; rows * dim],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Raw parameter storage, row-major. Exposed for persistence and for
    /// finite-difference checks that need to perturb single coordinates.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// AdaGrad squared-gradient accumulator, same layout as `data`.
    pub fn accum(&self) -> &[f64] {
        &self.accum
    }
}

/// Draws every coordinate uniformly from `[-0.5/dim, 0.5/dim]`.
fn fill_uniform(block: &mut ParamBlock, rng: &mut ChaCha8Rng) {
    let half = 0.5 / block.dim as f64;
    for v in &mut block.data {
        *v = rng.gen_range(-half..=half);
    }
}

fn unit_normalize(row: &mut [f64], rng: &mut ChaCha8Rng) {
    loop {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in row.iter_mut() {
                *v /= norm;
            }
            return;
        }
        // Degenerate row: replace with a fresh random direction.
        let half = 0.5 / row.len() as f64;
        for v in row.iter_mut() {
            *v = rng.gen_range(-half..=half);
        }
    }
}

/// The parameters of one base model over one dataset's vocabulary.
///
/// Which blocks exist depends on the model: entity models carry an entity
/// block (with a trailing OOV row) and one relation block (`e` carries two);
/// the pair model `f` carries a relation block and a pair block (with a
/// trailing OOV row) and no entity block at all.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    model: BaseModel,
    dim: usize,
    n_entities: usize,
    n_pairs: usize,
    entity: Option<ParamBlock>,
    relation: ParamBlock,
    relation_obj: Option<ParamBlock>,
    pair: Option<ParamBlock>,
}

impl EmbeddingStore {
    /// All-zero parameters with the shapes this model needs over `ds`'s
    /// vocabulary. Checkpoint loading starts here and overwrites every
    /// coordinate.
    pub fn zeros(model: BaseModel, dim: usize, ds: &Dataset) -> EmbeddingStore {
        let n_entities = ds.vocab.n_entities();
        let n_relations = ds.vocab.n_relations();
        let n_pairs = ds.vocab.n_pairs();
        EmbeddingStore {
            model,
            dim,
            n_entities,
            n_pairs,
            entity: match model.family() {
                super::Family::Tensor => Some(ParamBlock::zeros(n_entities + 1, dim)),
                super::Family::Matrix => None,
            },
            relation: ParamBlock::zeros(n_relations, dim),
            relation_obj: match model {
                BaseModel::E => Some(ParamBlock::zeros(n_relations, dim)),
                _ => None,
            },
            pair: match model {
                BaseModel::F => Some(ParamBlock::zeros(n_pairs + 1, dim)),
                _ => None,
            },
        }
    }

    /// Initializes all coordinates uniformly in `[-0.5/dim, 0.5/dim]`, then
    /// scales entity and pair rows (including the OOV rows) to unit L2 norm.
    /// Relation rows stay unnormalized, here and throughout training.
    pub fn init(model: BaseModel, dim: usize, ds: &Dataset, rng: &mut ChaCha8Rng) -> EmbeddingStore {
        let mut store = EmbeddingStore::zeros(model, dim, ds);
        if let Some(b) = &mut store.entity {
            fill_uniform(b, rng);
        }
        fill_uniform(&mut store.relation, rng);
        if let Some(b) = &mut store.relation_obj {
            fill_uniform(b, rng);
        }
        if let Some(b) = &mut store.pair {
            fill_uniform(b, rng);
        }
        store.renormalize(rng);
        store
    }

    pub fn model(&self) -> BaseModel {
        self.model
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    pub fn n_pairs(&self) -> usize {
        self.n_pairs
    }

    /// Row index of the shared OOV entity row.
    pub fn oov_entity_row(&self) -> usize {
        self.n_entities
    }

    /// Row index of the shared OOV pair row.
    pub fn oov_pair_row(&self) -> usize {
        self.n_pairs
    }

    pub fn block(&self, b: Block) -> Option<&ParamBlock> {
        match b {
            Block::Entity => self.entity.as_ref(),
            Block::Relation => Some(&self.relation),
            Block::RelationObj => self.relation_obj.as_ref(),
            Block::Pair => self.pair.as_ref(),
        }
    }

    pub fn block_mut(&mut self, b: Block) -> Option<&mut ParamBlock> {
        match b {
            Block::Entity => self.entity.as_mut(),
            Block::Relation => Some(&mut self.relation),
            Block::RelationObj => self.relation_obj.as_mut(),
            Block::Pair => self.pair.as_mut(),
        }
    }

    /// The blocks this store actually carries, in a fixed order.
    pub fn blocks(&self) -> Vec<Block> {
        [Block::Entity, Block::Relation, Block::RelationObj, Block::Pair]
            .into_iter()
            .filter(|b| self.block(*b).is_some())
            .collect()
    }

    /// One AdaGrad update from accumulated batch gradients: per coordinate,
    /// `G += g^2; theta -= lr * g / sqrt(G + eps)`. Only touched rows move.
    /// A non-finite parameter after the update aborts with the offending
    /// block named.
    pub fn adagrad_step(&mut self, grads: &GradMap, lr: f64) -> Result<()> {
        let dim = self.dim;
        for ((block, row), g) in grads.entries() {
            let b = self
                .block_mut(*block)
                .unwrap_or_else(|| panic!("gradient for absent block {block:?}"));
            let start = row * dim;
            for i in 0..dim {
                let gi = g[i];
                let a = &mut b.accum[start + i];
                *a += gi * gi;
                let accum_ok = a.is_finite();
                let v = &mut b.data[start + i];
                *v -= lr * gi / (*a + ADAGRAD_EPS).sqrt();
                if !v.is_finite() || !accum_ok {
                    return Err(Error::Divergence(format!(
                        "non-finite update in {} block, row {row}",
                        block.name()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Scales every entity row and pair row — the OOV rows included — back
    /// to unit L2 norm. Relation rows are left free. A row that became
    /// exactly zero is replaced by a fresh random direction drawn from
    /// `refresh`.
    pub fn renormalize(&mut self, refresh: &mut ChaCha8Rng) {
        for block in [Block::Entity, Block::Pair] {
            let dim = self.dim;
            if let Some(b) = self.block_mut(block) {
                for r in 0..b.rows {
                    unit_normalize(&mut b.data[r * dim..(r + 1) * dim], refresh);
                }
            }
        }
    }

    /// Largest deviation of any entity/pair row norm from 1. Zero blocks
    /// yield 0 (nothing to check).
    pub fn max_unit_norm_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for block in [Block::Entity, Block::Pair] {
            if let Some(b) = self.block(block) {
                for r in 0..b.rows {
                    let norm = b.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
                    worst = worst.max((norm - 1.0).abs());
                }
            }
        }
        worst
    }

    /// True when every parameter is a normal/zero float. Relation rows are
    /// never renormalized, so this is the cheap backstop that catches a blown
    /// run even when the loss happens to come out finite (e.g. a max-margin
    /// hinge comparing two infinite scores evaluates to NaN and is skipped).
    pub fn all_finite(&self) -> bool {
        self.blocks()
            .iter()
            .all(|&b| self.block(b).unwrap().data.iter().all(|v| v.is_finite()))
    }

    /// Sum of squares over the trainable parameters of this store.
    pub fn squared_norm(&self) -> f64 {
        self.blocks()
            .iter()
            .map(|&b| {
                self.block(b)
                    .unwrap()
                    .data
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
            })
            .sum()
    }
}
