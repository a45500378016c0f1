//! Frequency baselines: rank candidate objects by how often they appear as
//! the object in training, either per relation (`mfreq-rel`) or per subject
//! (`mfreq-ent`). No parameters, no randomness — just counts — yet they set
//! a surprisingly competitive floor on datasets with popular answers, which
//! is exactly why they belong next to the learned models in any comparison.
//!
//! Evaluation reuses the filtered candidate machinery and the expected-rank
//! tie handling: counts collide constantly (most candidates have count 0),
//! so sort-order ranks would be meaningless here.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::eval::{filter_candidates, EvalReport, Protocol, QueryRecord, RankOutcome};
use crate::kb::{Dataset, EntityId};
use crate::models::{pair_ref, PRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMode {
    /// Count objects per relation: score(e2 | e1, r) = #train facts (?, r, e2).
    ByRelation,
    /// Count objects per subject: score(e2 | e1, r) = #train facts (e1, ?, e2).
    BySubject,
}

impl BaselineMode {
    pub fn name(self) -> &'static str {
        match self {
            BaselineMode::ByRelation => "mfreq-rel",
            BaselineMode::BySubject => "mfreq-ent",
        }
    }
}

impl std::fmt::Display for BaselineMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BaselineMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mfreq-rel" => Ok(BaselineMode::ByRelation),
            "mfreq-ent" => Ok(BaselineMode::BySubject),
            _ => Err(Error::Config(format!(
                "unknown baseline {s:?} (expected mfreq-rel or mfreq-ent)"
            ))),
        }
    }
}

pub fn evaluate_mfreq(ds: &Dataset, mode: BaselineMode) -> EvalReport {
    // Keys are dense ids; which id space depends on the mode.
    let key_of = |e1: EntityId, r: crate::kb::RelationId| -> u32 {
        match mode {
            BaselineMode::ByRelation => r.0,
            BaselineMode::BySubject => e1.0,
        }
    };
    let mut counts: HashMap<(u32, EntityId), u32> = HashMap::new();
    for t in &ds.train {
        *counts.entry((key_of(t.e1, t.r), t.e2)).or_default() += 1;
    }

    let records: Vec<QueryRecord> = ds
        .test
        .iter()
        .map(|t| {
            let key = key_of(t.e1, t.r);
            let count_of = |c: EntityId| counts.get(&(key, c)).copied().unwrap_or(0);
            let cands = filter_candidates(ds, t.e1, t.r, t.e2);
            let gold = count_of(t.e2);
            let above = cands.iter().filter(|&&c| count_of(c) > gold).count();
            let tied = cands.iter().filter(|&&c| count_of(c) == gold).count();
            let outcome = RankOutcome {
                above,
                tied,
                candidates: cands.len(),
                gold_oov: pair_ref(ds, t.e1, t.e2) == PRef::Oov,
            };
            QueryRecord {
                triple: *t,
                outcome,
                rr: outcome.expected_rr(),
                hits10: outcome.expected_hits(10),
            }
        })
        .collect();
    EvalReport::build(mode.name().to_string(), Protocol::Kbi, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::name_triples;

    #[test]
    fn by_relation_ranks_frequent_objects_first() {
        // Under r, object b has count 3 and c has count 1. The test subject
        // d is fresh, so nothing is filtered: candidates {a, b, c, d}.
        let train = name_triples(&[
            ("a", "r", "b"),
            ("c", "r", "b"),
            ("b", "r", "b"),
            ("a", "r", "c"),
        ]);
        let test = name_triples(&[("d", "r", "c")]);
        let ds = Dataset::from_names(&train, &[], &test);
        let report = evaluate_mfreq(&ds, BaselineMode::ByRelation);
        assert_eq!(report.model, "mfreq-rel");
        let q = &report.queries[0];
        assert_eq!(q.outcome.candidates, 4);
        // b (count 3) above the gold; the gold alone at count 1; a and d at 0.
        assert_eq!(q.outcome.above, 1);
        assert_eq!(q.outcome.tied, 1);
        assert_eq!(q.rr, 0.5);
        assert_eq!(q.hits10, 1.0);
        // The gold pair (d, c) was never trained.
        assert!(q.outcome.gold_oov);
        assert!(report.non_oov.is_none());
    }

    #[test]
    fn unseen_relation_ties_everything() {
        let train = name_triples(&[
            ("a", "r", "b"),
            ("b", "r", "c"),
            ("c", "r", "d"),
            ("d", "r", "e"),
        ]);
        // s never occurs in training: all five entities count 0.
        let test = name_triples(&[("a", "s", "b")]);
        let ds = Dataset::from_names(&train, &[], &test);
        let report = evaluate_mfreq(&ds, BaselineMode::ByRelation);
        let q = &report.queries[0];
        assert_eq!(q.outcome.above, 0);
        assert_eq!(q.outcome.tied, 5);
        assert!((q.rr - 0.45666666666666667).abs() < 1e-15);
        assert_eq!(q.hits10, 1.0);
    }

    #[test]
    fn by_subject_counts_ignore_the_relation() {
        // Subject a: b twice (under r and s), c once.
        let train = name_triples(&[("a", "r", "b"), ("a", "s", "b"), ("a", "r", "c")]);
        // Relation t is new, so no filtering applies; candidates {a, b, c}.
        let test = name_triples(&[("a", "t", "c")]);
        let ds = Dataset::from_names(&train, &[], &test);
        let report = evaluate_mfreq(&ds, BaselineMode::BySubject);
        assert_eq!(report.model, "mfreq-ent");
        let q = &report.queries[0];
        assert_eq!(q.outcome.candidates, 3);
        assert_eq!(q.outcome.above, 1); // b with count 2
        assert_eq!(q.outcome.tied, 1); // the gold c at count 1; a at 0
        assert_eq!(q.rr, 0.5);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!(
            "mfreq-rel".parse::<BaselineMode>().unwrap(),
            BaselineMode::ByRelation
        );
        assert_eq!(
            "mfreq-ent".parse::<BaselineMode>().unwrap(),
            BaselineMode::BySubject
        );
        assert!("mfreq".parse::<BaselineMode>().is_err());
    }
}
