//! Synthetic corpora with controlled out-of-vocabulary structure.
//!
//! Three regimes, each isolating one failure mode of entity-pair models:
//!
//! * [`Regime::LatentType`] — entities carry latent types and each relation
//!   only holds between fixed type combinations. A quarter of the entities
//!   never occur in subject position during training (they still occur as
//!   objects, so their embeddings are trained); evaluation queries use those
//!   subjects, making the test split 100% pair-OOV by construction: entity
//!   models can generalize through the types, pair models see nothing but
//!   untrained pairs. Evaluation queries additionally come in clusters that
//!   exhaust all valid objects of their (subject, relation) slot, so
//!   filtered ranking removes the gold's siblings and leaves a uniquely
//!   correct answer for an entity model to find.
//! * [`Regime::Synonym`] — relations come in pairs `(r, r')` applied to the
//!   same entity pairs. Test tuples use `r'` on pairs whose `r`-tuple is in
//!   training, so the test split is 0% pair-OOV and pair models shine.
//! * [`Regime::TwoHopPath`] — training holds `(x, r0, y)` and `(y, r1, z)`;
//!   the composed fact `(x, r2, z)` is split across train and test. Neither
//!   family has an explicit mechanism for the composition.
//!
//! Type compatibility in the latent-type regime is symmetric (relation `j`
//! links types whose index difference is `±(j+1)` mod the type count). That
//! keeps every relation's compatibility matrix a symmetric circulant, which
//! matters: a multiplicative entity model scores `(e1, r, e2)` and
//! `(e2, r, e1)` identically, so an asymmetric type scheme would be
//! unlearnable by construction rather than merely hard.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::kb::Dataset;
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    LatentType,
    Synonym,
    TwoHopPath,
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "latent-type" => Ok(Regime::LatentType),
            "synonym" => Ok(Regime::Synonym),
            "two-hop-path" => Ok(Regime::TwoHopPath),
            other => Err(Error::Config(format!(
                "unknown regime {other:?} (expected latent-type, synonym or two-hop-path)"
            ))),
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::LatentType => "latent-type",
            Regime::Synonym => "synonym",
            Regime::TwoHopPath => "two-hop-path",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub regime: Regime,
    pub entities: usize,
    pub relations: usize,
    /// Number of latent types (latent-type regime only).
    pub types: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(regime: Regime, seed: u64) -> Self {
        SynthConfig {
            regime,
            entities: 60,
            relations: match regime {
                Regime::TwoHopPath => 3,
                _ => 6,
            },
            types: 15,
            train: 2000,
            valid: 50,
            test: 200,
            seed,
        }
    }
}

type Names = Vec<(String, String, String)>;

fn entity_name(i: usize) -> String {
    format!("e{i}")
}

fn relation_name(i: usize) -> String {
    format!("r{i}")
}

/// Generates a dataset under the configured regime.
pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    if cfg.entities < 3 {
        return Err(Error::Config("need at least 3 entities".into()));
    }
    if cfg.relations == 0 {
        return Err(Error::Config("need at least 1 relation".into()));
    }
    match cfg.regime {
        Regime::LatentType => latent_type(cfg),
        Regime::Synonym => synonym(cfg),
        Regime::TwoHopPath => two_hop_path(cfg),
    }
}

fn latent_type(cfg: &SynthConfig) -> Result<Dataset> {
    let k = cfg.types;
    if k < 2 {
        return Err(Error::Config(format!(
            "latent-type regime needs at least 2 types, got {k}"
        )));
    }
    if cfg.relations > k / 2 {
        return Err(Error::Config(format!(
            "latent-type regime supports at most types/2 = {} relations for {} types (each relation needs a distinct type offset), got {}",
            k / 2,
            k,
            cfg.relations
        )));
    }
    let mut rng = substream(cfg.seed, "synth/latent-type");
    let ty = |e: usize| e % k;

    // Entities [subjects, entities) are held out of the subject position in
    // training. Every evaluation pair therefore has no trained pair row,
    // while the held-out entities still collect plenty of object-side
    // occurrences for their entity embeddings.
    let held_out = (cfg.entities / 4).max(1);
    let subjects = cfg.entities - held_out;

    // Relation j holds between entities whose type indices differ by
    // ±(j+1) mod k. Distinct offsets mean every ordered pair is valid for at
    // most one relation, so held-out evaluation pairs can never leak into
    // training through another relation.
    let compatibles = |a: usize, j: usize| -> Vec<usize> {
        let s = j + 1;
        (0..cfg.entities)
            .filter(|&b| {
                b != a && {
                    let d = (ty(b) + k - ty(a)) % k;
                    d == s || d == k - s
                }
            })
            .collect()
    };

    // Evaluation queries come in clusters exhausting one (held-out subject,
    // relation) slot: with every valid object of the slot present in the
    // evaluation splits, filtered ranking removes the gold's siblings and
    // the gold is the only type-compatible candidate left.
    let mut eval_slots: Vec<(usize, usize)> = (subjects..cfg.entities)
        .flat_map(|a| (0..cfg.relations).map(move |j| (a, j)))
        .collect();
    eval_slots.shuffle(&mut rng);

    let mut test: Names = Vec::with_capacity(cfg.test);
    let mut valid: Names = Vec::with_capacity(cfg.valid);
    'slots: for (a, j) in eval_slots {
        let mut objects = compatibles(a, j);
        objects.shuffle(&mut rng);
        for b in objects {
            let t = (entity_name(a), relation_name(j), entity_name(b));
            if test.len() < cfg.test {
                test.push(t);
            } else if valid.len() < cfg.valid {
                valid.push(t);
            } else {
                break 'slots;
            }
        }
    }
    if test.len() < cfg.test || valid.len() < cfg.valid {
        return Err(Error::Config(format!(
            "latent-type regime can seat only {} evaluation triples on {held_out} held-out \
             subjects; requested {}",
            test.len() + valid.len(),
            cfg.valid + cfg.test
        )));
    }

    let mut pool: Vec<(usize, usize, usize)> = Vec::new();
    for a in 0..subjects {
        for j in 0..cfg.relations {
            pool.extend(compatibles(a, j).into_iter().map(|b| (a, j, b)));
        }
    }
    pool.shuffle(&mut rng);
    if pool.len() < cfg.train {
        log::warn!(
            "latent-type regime: requested {} training triples but only {} slots exist; emitting {}",
            cfg.train,
            pool.len(),
            pool.len()
        );
    }
    let train: Names = pool
        .into_iter()
        .take(cfg.train)
        .map(|(a, j, b)| (entity_name(a), relation_name(j), entity_name(b)))
        .collect();

    Ok(Dataset::from_names(&train, &valid, &test))
}

fn synonym(cfg: &SynthConfig) -> Result<Dataset> {
    if cfg.relations % 2 != 0 || cfg.relations < 2 {
        return Err(Error::Config(format!(
            "synonym regime needs an even, positive relation count (relations come in (r, r') pairs), got {}",
            cfg.relations
        )));
    }
    let n_eval = cfg.valid + cfg.test;
    if cfg.train < n_eval {
        return Err(Error::Config(format!(
            "synonym regime needs train >= valid + test (every evaluation tuple rides on a trained pair); got {} < {}",
            cfg.train, n_eval
        )));
    }
    // Triple budget: every evaluation pair contributes one training tuple
    // (p, r); "both" pairs contribute two; the remainder is filled with
    // r-only pairs.
    let n_both = (cfg.train - n_eval) / 2;
    let n_r_only = cfg.train - n_eval - 2 * n_both;
    let n_pairs = n_eval + n_both + n_r_only;
    let capacity = cfg.entities * (cfg.entities - 1);
    if n_pairs > capacity / 2 {
        return Err(Error::Config(format!(
            "synonym regime needs {n_pairs} distinct entity pairs but only {capacity} exist for {} entities; \
             increase entities or decrease split sizes",
            cfg.entities
        )));
    }

    let mut rng = substream(cfg.seed, "synth/synonym");
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(n_pairs);
    while pairs.len() < n_pairs {
        let a = rng.gen_range(0..cfg.entities);
        let b = rng.gen_range(0..cfg.entities);
        if a != b && seen.insert((a, b)) {
            pairs.push((a, b));
        }
    }

    let groups = cfg.relations / 2;
    let rel = |g: usize| relation_name(2 * g);
    let syn = |g: usize| relation_name(2 * g + 1);

    let mut train: Names = Vec::with_capacity(cfg.train);
    let mut valid: Names = Vec::with_capacity(cfg.valid);
    let mut test: Names = Vec::with_capacity(cfg.test);
    for (i, &(a, b)) in pairs.iter().enumerate() {
        let g = i % groups;
        let (e1, e2) = (entity_name(a), entity_name(b));
        train.push((e1.clone(), rel(g), e2.clone()));
        if i < cfg.test {
            test.push((e1, syn(g), e2));
        } else if i < n_eval {
            valid.push((e1, syn(g), e2));
        } else if i < n_eval + n_both {
            train.push((e1, syn(g), e2));
        }
    }

    Ok(Dataset::from_names(&train, &valid, &test))
}

fn two_hop_path(cfg: &SynthConfig) -> Result<Dataset> {
    if cfg.relations != 3 {
        return Err(Error::Config(format!(
            "two-hop-path regime uses exactly 3 relations (hop, hop, composed), got {}",
            cfg.relations
        )));
    }
    let n_eval = cfg.valid + cfg.test;
    if cfg.train < 2 * n_eval {
        return Err(Error::Config(format!(
            "two-hop-path regime needs train >= 2*(valid+test) to hold every evaluation path's hops; got {} < {}",
            cfg.train,
            2 * n_eval
        )));
    }
    // Each chain costs two hop triples plus one composed endpoint; solve for
    // how many endpoints stay in train.
    let train_endpoints = (cfg.train - 2 * n_eval) / 3;
    let chains = n_eval + train_endpoints;

    let mut rng = substream(cfg.seed, "synth/two-hop-path");
    let mut train: Names = Vec::new();
    let mut valid: Names = Vec::new();
    let mut test: Names = Vec::new();
    let mut endpoints: HashSet<(usize, usize)> = HashSet::new();

    let mut attempts = 0usize;
    let max_attempts = chains * 1000;
    let mut built = 0usize;
    while built < chains {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Config(
                "two-hop-path regime: entity space too small for the requested chain count".into(),
            ));
        }
        let x = rng.gen_range(0..cfg.entities);
        let y = rng.gen_range(0..cfg.entities);
        let z = rng.gen_range(0..cfg.entities);
        if x == y || y == z || x == z {
            continue;
        }
        // One composed fact per (x, z): keeps the three splits disjoint.
        if !endpoints.insert((x, z)) {
            continue;
        }
        train.push((entity_name(x), relation_name(0), entity_name(y)));
        train.push((entity_name(y), relation_name(1), entity_name(z)));
        let endpoint = (entity_name(x), relation_name(2), entity_name(z));
        if built < cfg.test {
            test.push(endpoint);
        } else if built < n_eval {
            valid.push(endpoint);
        } else {
            train.push(endpoint);
        }
        built += 1;
    }

    Ok(Dataset::from_names(&train, &valid, &test))
}
