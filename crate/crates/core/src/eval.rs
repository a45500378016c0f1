//! Ranking evaluation with exact tie handling.
//!
//! Every evaluation here is *filtered*: when ranking completions of
//! `(e1, r, ?)`, other entities known to be correct (in any split) are
//! removed from the candidate list, the gold itself excepted.
//!
//! Ranks are never decided by sort order. For each query we count the
//! candidates scoring strictly above the gold (`above`) and those scoring
//! exactly equal, gold included (`tied`), and report the expectation of the
//! metric over a uniformly random ordering of that tie group:
//!
//! * reciprocal rank: `(1/tied) * sum_{i=1..tied} 1/(above + i)`
//! * hits@k: `clamp(k - above, 0, tied) / tied`
//!
//! This matters because models that fall back to a shared OOV row give large
//! groups of candidates *bitwise identical* scores; breaking those ties by
//! sort order would grossly over- or under-credit them.
//!
//! Two protocols:
//!
//! * [`Protocol::Kbi`]: anything without a trained row scores through the
//!   shared OOV rows. Deterministic, parallelized over queries.
//! * [`Protocol::Standard`]: the legacy convention this work corrects. The
//!   pair-based model ranks only the object entities observed with `e1` in
//!   train or test (leaking test pairs into the candidate set) and draws a
//!   *fresh random vector* for every untrained pair; entity-based models
//!   treat every entity as in-vocabulary and read its (possibly untrained)
//!   row directly. Sequential, because the random draws must happen in a
//!   reproducible order.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::kb::{Dataset, EntityId, RelationId, Triple};
use crate::models::{
    eval_entity_ref, pair_ref, score, BaseModel, ERef, ModelKind, ModelParams, PRef,
    ResolvedTriple,
};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Standard,
    Kbi,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Standard => "standard",
            Protocol::Kbi => "kbi",
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Protocol::Standard),
            "kbi" => Ok(Protocol::Kbi),
            _ => Err(Error::Config(format!(
                "unknown protocol {s:?} (expected standard or kbi)"
            ))),
        }
    }
}

/// Where the gold landed for one query, before tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankOutcome {
    /// Candidates scoring strictly above the gold.
    pub above: usize,
    /// Candidates scoring exactly the gold's score, the gold included
    /// (always >= 1).
    pub tied: usize,
    /// Total candidates ranked (after filtering).
    pub candidates: usize,
    /// Whether the query's gold entity pair has no trained pair row.
    pub gold_oov: bool,
}

impl RankOutcome {
    /// Expected reciprocal rank over a uniform shuffle of the tie group.
    pub fn expected_rr(&self) -> f64 {
        assert!(self.tied >= 1, "the gold is always in its own tie group");
        let m = self.above as f64;
        let sum: f64 = (1..=self.tied).map(|i| 1.0 / (m + i as f64)).sum();
        sum / self.tied as f64
    }

    /// Expected hits@k over a uniform shuffle of the tie group: the fraction
    /// of tie-group positions that land within the top k.
    pub fn expected_hits(&self, k: usize) -> f64 {
        let room = k.saturating_sub(self.above).min(self.tied);
        room as f64 / self.tied as f64
    }
}

/// One evaluated query, with the expectation-based metrics attached.
#[derive(Debug, Clone)]
pub struct QueryRecord {
    pub triple: Triple,
    pub outcome: RankOutcome,
    pub rr: f64,
    pub hits10: f64,
}

/// Mean metrics over a set of queries, in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mrr: f64,
    pub hits: f64,
    pub n: usize,
}

fn aggregate<'a>(records: impl Iterator<Item = &'a QueryRecord>) -> Aggregate {
    let (mut rr, mut hits, mut n) = (0.0, 0.0, 0usize);
    for r in records {
        rr += r.rr;
        hits += r.hits10;
        n += 1;
    }
    if n == 0 {
        Aggregate {
            mrr: 0.0,
            hits: 0.0,
            n: 0,
        }
    } else {
        Aggregate {
            mrr: 100.0 * rr / n as f64,
            hits: 100.0 * hits / n as f64,
            n,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub model: String,
    pub protocol: Protocol,
    pub all: Aggregate,
    /// Queries whose gold pair is untrained; None when there are none.
    pub oov: Option<Aggregate>,
    /// Queries whose gold pair has a trained row; None when there are none.
    pub non_oov: Option<Aggregate>,
    pub queries: Vec<QueryRecord>,
}

impl EvalReport {
    pub(crate) fn build(model: String, protocol: Protocol, queries: Vec<QueryRecord>) -> EvalReport {
        let all = aggregate(queries.iter());
        let oov = aggregate(queries.iter().filter(|q| q.outcome.gold_oov));
        let non_oov = aggregate(queries.iter().filter(|q| !q.outcome.gold_oov));
        EvalReport {
            model,
            protocol,
            all,
            oov: (oov.n > 0).then_some(oov),
            non_oov: (non_oov.n > 0).then_some(non_oov),
            queries,
        }
    }

    /// The summary report as JSON. Percentages are rounded to two decimals;
    /// empty partitions render as "n/a".
    pub fn to_json(&self) -> Value {
        fn part(a: &Option<Aggregate>) -> Value {
            match a {
                Some(a) => json!({
                    "n": a.n,
                    "mrr": round2(a.mrr),
                    "hits10": round2(a.hits),
                }),
                None => json!("n/a"),
            }
        }
        json!({
            "model": self.model,
            "protocol": self.protocol.name(),
            "filtered": true,
            "n_queries": self.all.n,
            "mrr": if self.all.n == 0 { json!("n/a") } else { json!(round2(self.all.mrr)) },
            "hits10": if self.all.n == 0 { json!("n/a") } else { json!(round2(self.all.hits)) },
            "oov": part(&self.oov),
            "non_oov": part(&self.non_oov),
        })
    }

    /// Per-query detail as TSV (one header line, full-precision metrics).
    pub fn per_query_tsv(&self, ds: &Dataset) -> String {
        let mut out =
            String::from("e1\trelation\te2\tgold_oov\tabove\ttied\tcandidates\trr\thits10\n");
        for q in &self.queries {
            let t = &q.triple;
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                ds.vocab.entity_name(t.e1),
                ds.vocab.relation_name(t.r),
                ds.vocab.entity_name(t.e2),
                q.outcome.gold_oov as u8,
                q.outcome.above,
                q.outcome.tied,
                q.outcome.candidates,
                q.rr,
                q.hits10,
            ));
        }
        out
    }
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Object candidates for `(e1, r, ?)`: every entity, minus those forming a
/// known fact with `(e1, r)` in any split — except the gold itself, which is
/// always ranked.
pub fn filter_candidates(ds: &Dataset, e1: EntityId, r: RelationId, gold: EntityId) -> Vec<EntityId> {
    (0..ds.vocab.n_entities() as u32)
        .map(EntityId)
        .filter(|&c| c == gold || !ds.contains(&Triple::new(e1, r, c)))
        .collect()
}

fn record_from_scores(t: &Triple, gold_oov: bool, scores: &[f64], gold_score: f64) -> QueryRecord {
    let above = scores.iter().filter(|&&s| s > gold_score).count();
    let tied = scores.iter().filter(|&&s| s == gold_score).count();
    debug_assert!(tied >= 1);
    let outcome = RankOutcome {
        above,
        tied,
        candidates: scores.len(),
        gold_oov,
    };
    QueryRecord {
        triple: *t,
        outcome,
        rr: outcome.expected_rr(),
        hits10: outcome.expected_hits(10),
    }
}

/// OOV-aware evaluation of one query: every reference without a trained row
/// resolves to the shared OOV row. Candidates that share the identical
/// resolved view (unseen entities; for the pure pair model, untrained pairs)
/// are scored once, which both saves work and makes their ties exact by
/// construction.
fn kbi_query(params: &ModelParams, ds: &Dataset, t: &Triple) -> QueryRecord {
    let cands = filter_candidates(ds, t.e1, t.r, t.e2);
    let e1 = eval_entity_ref(ds, t.e1);
    let pure_pair = params.kind == ModelKind::F;
    let mut unseen_entity_score: Option<f64> = None;
    let mut oov_pair_score: Option<f64> = None;
    let mut gold_score = f64::NAN;
    let mut scores = Vec::with_capacity(cands.len());
    for &c in &cands {
        let e2 = eval_entity_ref(ds, c);
        let pair = pair_ref(ds, t.e1, c);
        let rt = ResolvedTriple {
            e1,
            r: t.r,
            e2,
            pair,
        };
        let s = if pure_pair && pair == PRef::Oov {
            *oov_pair_score.get_or_insert_with(|| params.score(&rt))
        } else if e2 == ERef::Oov {
            // An entity unseen in training also has no trained pair with
            // anything, so the whole resolved view is shared.
            *unseen_entity_score.get_or_insert_with(|| params.score(&rt))
        } else {
            params.score(&rt)
        };
        if c == t.e2 {
            gold_score = s;
        }
        scores.push(s);
    }
    let gold_oov = pair_ref(ds, t.e1, t.e2) == PRef::Oov;
    record_from_scores(t, gold_oov, &scores, gold_score)
}

pub fn evaluate_kbi_queries(params: &ModelParams, ds: &Dataset, queries: &[Triple]) -> EvalReport {
    let records: Vec<QueryRecord> = queries
        .par_iter()
        .map(|t| kbi_query(params, ds, t))
        .collect();
    EvalReport::build(params.kind.name().to_string(), Protocol::Kbi, records)
}

pub fn evaluate_kbi(params: &ModelParams, ds: &Dataset) -> EvalReport {
    evaluate_kbi_queries(params, ds, &ds.test)
}

/// Draws a random direction the way initialization does: uniform in
/// `[-0.5/dim, 0.5/dim]` per coordinate, scaled to unit norm.
fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let half = 0.5 / dim as f64;
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-half..=half)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

/// Legacy evaluation. See the module docs for the exact conventions; the
/// random vectors for untrained pairs come from one stream seeded off
/// `seed`, consumed in query order then candidate order.
pub fn evaluate_standard(params: &ModelParams, ds: &Dataset, seed: u64) -> EvalReport {
    let mut rng = substream(seed, "legacy-random-vector");
    let dim = params.dim();
    let pure_pair = params.kind == ModelKind::F;

    // Observed objects per subject over train + test: the legacy candidate
    // set for the pair-based model.
    let mut observed: HashMap<EntityId, BTreeSet<EntityId>> = HashMap::new();
    if pure_pair {
        for t in ds.train.iter().chain(&ds.test) {
            observed.entry(t.e1).or_default().insert(t.e2);
        }
    }

    let mut records = Vec::with_capacity(ds.test.len());
    for t in &ds.test {
        let cands: Vec<EntityId> = if pure_pair {
            observed
                .get(&t.e1)
                .map(|s| {
                    s.iter()
                        .copied()
                        .filter(|&c| c == t.e2 || !ds.contains(&Triple::new(t.e1, t.r, c)))
                        .collect()
                })
                .unwrap_or_default()
        } else {
            filter_candidates(ds, t.e1, t.r, t.e2)
        };

        let mut gold_score = f64::NAN;
        let mut scores = Vec::with_capacity(cands.len());
        for &c in &cands {
            let pair = pair_ref(ds, t.e1, c);
            let mut s = 0.0;
            for store in &params.stores {
                if store.model() == BaseModel::F {
                    match pair {
                        PRef::Id(_) => {
                            s += score(
                                store,
                                &ResolvedTriple {
                                    e1: ERef::Id(t.e1),
                                    r: t.r,
                                    e2: ERef::Id(c),
                                    pair,
                                },
                            );
                        }
                        PRef::Oov => {
                            // Fresh random pair vector per untrained pair.
                            let v = random_unit(dim, &mut rng);
                            let r_row = store
                                .block(crate::models::Block::Relation)
                                .unwrap()
                                .row(t.r.index());
                            s += r_row.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
                        }
                    }
                } else {
                    // Entity-based constituents read raw rows: an untrained
                    // entity keeps its random initialization and is scored
                    // like any other. That is the legacy leak.
                    s += score(
                        store,
                        &ResolvedTriple {
                            e1: ERef::Id(t.e1),
                            r: t.r,
                            e2: ERef::Id(c),
                            pair: PRef::Oov,
                        },
                    );
                }
            }
            if c == t.e2 {
                gold_score = s;
            }
            scores.push(s);
        }
        let gold_oov = pair_ref(ds, t.e1, t.e2) == PRef::Oov;
        records.push(record_from_scores(t, gold_oov, &scores, gold_score));
    }
    EvalReport::build(params.kind.name().to_string(), Protocol::Standard, records)
}

pub fn evaluate(
    params: &ModelParams,
    ds: &Dataset,
    protocol: Protocol,
    seed: u64,
) -> EvalReport {
    match protocol {
        Protocol::Kbi => evaluate_kbi(params, ds),
        Protocol::Standard => evaluate_standard(params, ds, seed),
    }
}

/// Per-query best of two models: for every test query, keep whichever
/// model's outcome has the higher expected reciprocal rank. An upper bound
/// on what a perfect per-query switch between the two could achieve.
pub fn evaluate_oracle(a: &ModelParams, b: &ModelParams, ds: &Dataset) -> EvalReport {
    let ra = evaluate_kbi(a, ds);
    let rb = evaluate_kbi(b, ds);
    let queries: Vec<QueryRecord> = ra
        .queries
        .into_iter()
        .zip(rb.queries)
        .map(|(qa, qb)| if qa.rr >= qb.rr { qa } else { qb })
        .collect();
    EvalReport::build(
        format!("oracle({},{})", a.kind.name(), b.kind.name()),
        Protocol::Kbi,
        queries,
    )
}
