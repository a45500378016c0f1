//! Negative sampling for training.
//!
//! Negatives are corruptions of a positive triple that are *not* in the
//! training set. Entity corruptions replace one slot of `(e1, r, e2)` with a
//! uniformly drawn entity; pair corruptions replace the ordered pair with a
//! uniformly drawn trained pair. Candidates whose corrupted triple already
//! appears in training are rejected and redrawn.
//!
//! When at least `k` distinct eligible corruptions exist, rejection sampling
//! yields exactly `k` distinct ones. When fewer exist, we fall back to `k`
//! draws with replacement over the eligible set (still uniform) and flag the
//! shortage; with zero eligible corruptions the list is empty. Either way the
//! caller sees a well-defined, reproducible sample.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::kb::{Dataset, EntityId, PairId, RelationId, Triple};
use crate::models::{ERef, Family, PRef};

/// Per-relation / per-slot occurrence counts over the training split, used to
/// compute exactly how many corruptions are eligible (so sampling can decide
/// between rejection and with-replacement modes without scanning).
#[derive(Debug)]
pub struct TrainIndex {
    /// (e1, r) -> number of distinct objects e2 with (e1, r, e2) in train.
    objects_of: HashMap<(EntityId, RelationId), u32>,
    /// (r, e2) -> number of distinct subjects e1 with (e1, r, e2) in train.
    subjects_of: HashMap<(RelationId, EntityId), u32>,
    /// r -> number of distinct trained pairs p with (p.0, r, p.1) in train.
    pairs_of: HashMap<RelationId, u32>,
}

impl TrainIndex {
    pub fn build(ds: &Dataset) -> TrainIndex {
        let mut objects_of: HashMap<(EntityId, RelationId), u32> = HashMap::new();
        let mut subjects_of: HashMap<(RelationId, EntityId), u32> = HashMap::new();
        let mut pairs_of: HashMap<RelationId, u32> = HashMap::new();
        // The train split is deduplicated on load, so each triple counts once.
        for t in &ds.train {
            *objects_of.entry((t.e1, t.r)).or_default() += 1;
            *subjects_of.entry((t.r, t.e2)).or_default() += 1;
            *pairs_of.entry(t.r).or_default() += 1;
        }
        TrainIndex {
            objects_of,
            subjects_of,
            pairs_of,
        }
    }

    fn known_objects(&self, e1: EntityId, r: RelationId) -> usize {
        self.objects_of.get(&(e1, r)).copied().unwrap_or(0) as usize
    }

    fn known_subjects(&self, r: RelationId, e2: EntityId) -> usize {
        self.subjects_of.get(&(r, e2)).copied().unwrap_or(0) as usize
    }

    fn known_pairs(&self, r: RelationId) -> usize {
        self.pairs_of.get(&r).copied().unwrap_or(0) as usize
    }
}

/// The negatives drawn for one positive triple. Entity-based models fill
/// `objects` and `subjects`; the pair-based model fills `pairs`.
#[derive(Debug, Clone, Default)]
pub struct NegSamples {
    /// Corrupted objects: e2' such that (e1, r, e2') is not in train.
    pub objects: Vec<ERef>,
    /// Corrupted subjects: e1' such that (e1', r, e2) is not in train.
    pub subjects: Vec<ERef>,
    /// Corrupted trained pairs p such that (p.0, r, p.1) is not in train.
    pub pairs: Vec<PRef>,
    /// True when any direction had fewer eligible corruptions than requested.
    pub shortage: bool,
}

/// Draws negatives for `t` according to the model family. With
/// `append_oov = true` (the trained-OOV regimen) each non-empty list also
/// gets the shared OOV sentinel appended, so the OOV row is trained as one
/// extra always-negative candidate.
pub fn sample_negatives(
    ds: &Dataset,
    idx: &TrainIndex,
    t: &Triple,
    k: usize,
    family: Family,
    append_oov: bool,
    rng: &mut ChaCha8Rng,
) -> NegSamples {
    let mut out = NegSamples::default();
    match family {
        Family::Tensor => {
            let (objects, short_o) = sample_entities(ds, idx, t, k, true, rng);
            let (subjects, short_s) = sample_entities(ds, idx, t, k, false, rng);
            out.objects = objects.into_iter().map(ERef::Id).collect();
            out.subjects = subjects.into_iter().map(ERef::Id).collect();
            out.shortage = short_o || short_s;
            if append_oov {
                out.objects.push(ERef::Oov);
                out.subjects.push(ERef::Oov);
            }
        }
        Family::Matrix => {
            let (pairs, short) = sample_pairs(ds, idx, t, k, rng);
            out.pairs = pairs.into_iter().map(PRef::Id).collect();
            out.shortage = short;
            if append_oov {
                out.pairs.push(PRef::Oov);
            }
        }
    }
    out
}

fn sample_entities(
    ds: &Dataset,
    idx: &TrainIndex,
    t: &Triple,
    k: usize,
    corrupt_object: bool,
    rng: &mut ChaCha8Rng,
) -> (Vec<EntityId>, bool) {
    let n = ds.vocab.n_entities();
    let known = if corrupt_object {
        idx.known_objects(t.e1, t.r)
    } else {
        idx.known_subjects(t.r, t.e2)
    };
    let eligible = n - known;
    let accepts = |cand: EntityId| {
        let corrupted = if corrupt_object {
            Triple::new(t.e1, t.r, cand)
        } else {
            Triple::new(cand, t.r, t.e2)
        };
        !ds.in_train(&corrupted)
    };
    draw(k, eligible, rng, n, |rng| EntityId(rng.gen_range(0..n as u32)), accepts)
}

fn sample_pairs(
    ds: &Dataset,
    idx: &TrainIndex,
    t: &Triple,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<PairId>, bool) {
    let n = ds.vocab.n_pairs();
    let eligible = n - idx.known_pairs(t.r);
    let accepts = |cand: PairId| {
        let (e1, e2) = ds.vocab.pair(cand);
        !ds.in_train(&Triple::new(e1, t.r, e2))
    };
    draw(k, eligible, rng, n, |rng| PairId(rng.gen_range(0..n as u32)), accepts)
}

/// Shared draw loop. `eligible` decides the mode: distinct via rejection when
/// it can supply `k`, with replacement otherwise (flagged), empty when zero.
fn draw<T: Copy + Eq + std::hash::Hash>(
    k: usize,
    eligible: usize,
    rng: &mut ChaCha8Rng,
    universe: usize,
    mut propose: impl FnMut(&mut ChaCha8Rng) -> T,
    accepts: impl Fn(T) -> bool,
) -> (Vec<T>, bool) {
    debug_assert!(eligible <= universe);
    if eligible == 0 {
        return (Vec::new(), true);
    }
    let mut out = Vec::with_capacity(k);
    if eligible < k {
        while out.len() < k {
            let cand = propose(rng);
            if accepts(cand) {
                out.push(cand);
            }
        }
        (out, true)
    } else {
        let mut seen = HashSet::with_capacity(k);
        while out.len() < k {
            let cand = propose(rng);
            if accepts(cand) && seen.insert(cand) {
                out.push(cand);
            }
        }
        (out, false)
    }
}
