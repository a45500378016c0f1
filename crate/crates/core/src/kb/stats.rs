use std::collections::HashMap;

use serde_json::{json, Value};

use super::Dataset;

/// Corpus statistics relevant to how hard a dataset is for pair-embedding
/// models: how much of test is out-of-vocabulary, and how heavy the tail of
/// rarely-seen pairs is.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub entities: usize,
    pub relations: usize,
    /// Fraction of test triples whose ordered pair is absent from the pair
    /// index (i.e. never observed in training). `None` when test is empty.
    pub pair_oov_rate: Option<f64>,
    /// Fraction of distinct ordered pairs in train+test occurring exactly
    /// once. `None` when there are no pairs at all.
    pub singleton_rate: Option<f64>,
    /// Same, for pairs occurring exactly twice.
    pub doubleton_rate: Option<f64>,
}

impl DatasetStats {
    /// JSON object with `"n/a"` in place of undefined rates.
    pub fn to_json(&self) -> Value {
        fn rate(v: Option<f64>) -> Value {
            match v {
                Some(x) => json!(x),
                None => json!("n/a"),
            }
        }
        json!({
            "entities": self.entities,
            "relations": self.relations,
            "pair_oov_rate": rate(self.pair_oov_rate),
            "singleton_rate": rate(self.singleton_rate),
            "doubleton_rate": rate(self.doubleton_rate),
        })
    }
}

/// Computes [`DatasetStats`] for a dataset.
///
/// Pair occurrence counts are taken over the train and test triples (one
/// occurrence per triple); singleton/doubleton rates are fractions of the
/// *distinct* pairs seen there.
pub fn compute_stats(ds: &Dataset) -> DatasetStats {
    let pair_oov_rate = if ds.test.is_empty() {
        None
    } else {
        let oov = ds
            .test
            .iter()
            .filter(|t| !ds.pair_trained(t.e1, t.e2))
            .count();
        Some(oov as f64 / ds.test.len() as f64)
    };

    let mut occurrences: HashMap<(u32, u32), u32> = HashMap::new();
    for t in ds.train.iter().chain(ds.test.iter()) {
        *occurrences.entry((t.e1.0, t.e2.0)).or_insert(0) += 1;
    }
    let distinct = occurrences.len();
    let (singleton_rate, doubleton_rate) = if distinct == 0 {
        (None, None)
    } else {
        let once = occurrences.values().filter(|&&c| c == 1).count();
        let twice = occurrences.values().filter(|&&c| c == 2).count();
        (
            Some(once as f64 / distinct as f64),
            Some(twice as f64 / distinct as f64),
        )
    };

    DatasetStats {
        entities: ds.vocab.n_entities(),
        relations: ds.vocab.n_relations(),
        pair_oov_rate,
        singleton_rate,
        doubleton_rate,
    }
}
