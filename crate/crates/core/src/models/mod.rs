//! Embedding models: parameter stores, model kinds, scoring and gradients.
//!
//! Four base models, named as usual in the link-prediction literature:
//!
//! | model      | score of `(e1, r, e2)`                                  |
//! |------------|---------------------------------------------------------|
//! | `transe`   | `-||v(e1) + v(r) - v(e2)||_2`                           |
//! | `distmult` | `sum_i v(r)_i * v(e1)_i * v(e2)_i`                      |
//! | `e`        | `v(e1) . v_subj(r) + v(e2) . v_obj(r)`                  |
//! | `f`        | `v(r) . v(e1, e2)` over a per-entity-*pair* embedding   |
//!
//! The first three embed entities ([`Family::Tensor`]); `f` embeds ordered
//! entity pairs ([`Family::Matrix`]) and therefore cannot score a pair it
//! never saw in training except through a designated shared placeholder row
//! (the "OOV row", stored as the extra last row of the entity/pair blocks).
//!
//! Combined kinds sum constituent scores at ranking time. The `-as` kinds
//! are also *trained* on the summed score; the `-al`/`-ral` kinds train each
//! constituent on its own loss and only combine when ranking.

mod score;
mod store;

pub use score::{
    eval_entity_ref, pair_ref, score, score_gradients, sigmoid, ERef, GradMap, PRef,
    ResolvedTriple,
};
pub use store::{Block, EmbeddingStore, ParamBlock, ADAGRAD_EPS};

use crate::error::{Error, Result};
use crate::kb::Dataset;
use crate::rng::substream;

/// One of the four base scoring functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseModel {
    E,
    F,
    TransE,
    DistMult,
}

/// Whether a model embeds entities or entity pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Per-entity embeddings; negatives corrupt entities.
    Tensor,
    /// Per-entity-pair embeddings; negatives corrupt pairs.
    Matrix,
}

impl BaseModel {
    pub fn name(self) -> &'static str {
        match self {
            BaseModel::E => "e",
            BaseModel::F => "f",
            BaseModel::TransE => "transe",
            BaseModel::DistMult => "distmult",
        }
    }

    pub fn family(self) -> Family {
        match self {
            BaseModel::F => Family::Matrix,
            _ => Family::Tensor,
        }
    }
}

impl std::fmt::Display for BaseModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A trainable model: a base model or a combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    E,
    F,
    TransE,
    DistMult,
    /// `e` + `f`, trained on the summed score.
    AsEF,
    /// `distmult` + `f`, trained on the summed score.
    AsDmF,
    /// `distmult` + `e` + `f`, trained on the summed score.
    AsDmEF,
    /// `distmult` + `f`, constituents trained on their own losses.
    AlDmF,
    /// [`ModelKind::AlDmF`] plus an L2 penalty on the `f` parameters.
    RalDmF,
}

impl ModelKind {
    pub const ALL: [ModelKind; 9] = [
        ModelKind::E,
        ModelKind::F,
        ModelKind::TransE,
        ModelKind::DistMult,
        ModelKind::AsEF,
        ModelKind::AsDmF,
        ModelKind::AsDmEF,
        ModelKind::AlDmF,
        ModelKind::RalDmF,
    ];

    pub fn constituents(self) -> &'static [BaseModel] {
        match self {
            ModelKind::E => &[BaseModel::E],
            ModelKind::F => &[BaseModel::F],
            ModelKind::TransE => &[BaseModel::TransE],
            ModelKind::DistMult => &[BaseModel::DistMult],
            ModelKind::AsEF => &[BaseModel::E, BaseModel::F],
            ModelKind::AsDmF | ModelKind::AlDmF | ModelKind::RalDmF => {
                &[BaseModel::DistMult, BaseModel::F]
            }
            ModelKind::AsDmEF => &[BaseModel::DistMult, BaseModel::E, BaseModel::F],
        }
    }

    /// True for the `-as` kinds: a single loss over the summed score.
    /// The `-al`/`-ral` kinds (and single models) train per constituent.
    pub fn trains_on_sum(self) -> bool {
        matches!(self, ModelKind::AsEF | ModelKind::AsDmF | ModelKind::AsDmEF)
    }

    /// True when an L2 penalty on the `f` constituent applies.
    pub fn regularizes_f(self) -> bool {
        self == ModelKind::RalDmF
    }

    pub fn is_single(self) -> bool {
        self.constituents().len() == 1
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::E => "e",
            ModelKind::F => "f",
            ModelKind::TransE => "transe",
            ModelKind::DistMult => "distmult",
            ModelKind::AsEF => "e+f-as",
            ModelKind::AsDmF => "dm+f-as",
            ModelKind::AsDmEF => "dm+e+f-as",
            ModelKind::AlDmF => "dm+f-al",
            ModelKind::RalDmF => "dm+f-ral",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = ModelKind::ALL.iter().map(|k| k.name()).collect();
                Error::Config(format!(
                    "unknown model {s:?} (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// Full parameter set of a model: one [`EmbeddingStore`] per constituent,
/// in [`ModelKind::constituents`] order.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub stores: Vec<EmbeddingStore>,
}

impl ModelParams {
    /// Initializes every constituent from its own named substream of
    /// `root_seed`, so a constituent's starting point does not depend on
    /// which combination it is part of.
    pub fn init(kind: ModelKind, dim: usize, ds: &Dataset, root_seed: u64) -> ModelParams {
        let stores = kind
            .constituents()
            .iter()
            .map(|&m| {
                let mut rng = substream(root_seed, &format!("init/{}", m.name()));
                EmbeddingStore::init(m, dim, ds, &mut rng)
            })
            .collect();
        ModelParams { kind, stores }
    }

    pub fn dim(&self) -> usize {
        self.stores[0].dim()
    }

    /// Model score: the sum of constituent scores.
    ///
    /// Untrained entities/pairs are scored through whatever rows the
    /// `ResolvedTriple` points at; build it with [`ResolvedTriple::for_eval`]
    /// to fall back to the shared OOV rows.
    pub fn score(&self, rt: &ResolvedTriple) -> f64 {
        self.stores.iter().map(|s| score(s, rt)).sum()
    }

    /// Squashed score for kinds used as probability-like outputs. Monotone,
    /// so rankings are unchanged relative to [`ModelParams::score`].
    pub fn probability(&self, rt: &ResolvedTriple) -> f64 {
        sigmoid(self.score(rt))
    }

    pub fn store(&self, m: BaseModel) -> Option<&EmbeddingStore> {
        self.stores.iter().find(|s| s.model() == m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_roundtrip() {
        for kind in ModelKind::ALL {
            let back: ModelKind = kind.name().parse().unwrap();
            assert_eq!(kind, back);
        }
        assert!("frobnicate".parse::<ModelKind>().is_err());
    }

    #[test]
    fn constituents_are_consistent() {
        assert_eq!(ModelKind::AsDmEF.constituents().len(), 3);
        assert!(ModelKind::AsDmF.trains_on_sum());
        assert!(!ModelKind::AlDmF.trains_on_sum());
        assert!(ModelKind::RalDmF.regularizes_f());
        assert!(!ModelKind::AlDmF.regularizes_f());
    }
}
