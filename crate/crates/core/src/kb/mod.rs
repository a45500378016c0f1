//! Datasets: triples, dense vocabularies, the train-split pair index,
//! loading/writing the on-disk layout, and corpus statistics.
//!
//! On disk a dataset is a directory holding `train.txt`, `test.txt` and
//! optionally `valid.txt`, each line `e1<TAB>relation<TAB>e2`, UTF-8,
//! LF-terminated. Names are opaque strings; ids are dense and stable for a
//! loaded dataset (assigned in file order: train, then valid, then test).
//!
//! The *pair index* enumerates the ordered entity pairs observed in the
//! training split only. A pair that appears only in valid/test has no id —
//! that is what makes a query's gold pair "out of vocabulary" (OOV) for the
//! matrix-factorization models.

mod stats;
pub mod synth;

pub use stats::{compute_stats, DatasetStats};

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Dense entity id, `0..n_entities`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(pub u32);

/// Dense relation id, `0..n_relations`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationId(pub u32);

/// Dense id of an ordered entity pair observed in the training split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl PairId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One `(e1, r, e2)` fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triple {
    pub e1: EntityId,
    pub r: RelationId,
    pub e2: EntityId,
}

impl Triple {
    pub fn new(e1: EntityId, r: RelationId, e2: EntityId) -> Self {
        Triple { e1, r, e2 }
    }

    /// The ordered entity pair of this triple.
    pub fn pair(&self) -> (EntityId, EntityId) {
        (self.e1, self.e2)
    }
}

/// Bidirectional name/id tables for entities and relations, plus the pair
/// index over the training split.
#[derive(Debug, Clone, Default)]
pub struct Vocab {
    entities: Vec<String>,
    entity_ids: HashMap<String, EntityId>,
    relations: Vec<String>,
    relation_ids: HashMap<String, RelationId>,
    pairs: Vec<(EntityId, EntityId)>,
    pair_ids: HashMap<(EntityId, EntityId), PairId>,
}

impl Vocab {
    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    /// Number of trained entity pairs (the pair index covers train only).
    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        &self.entities[id.index()]
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        &self.relations[id.index()]
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entity_ids.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relation_ids.get(name).copied()
    }

    /// Id of an ordered pair, if it was observed in training.
    pub fn pair_id(&self, e1: EntityId, e2: EntityId) -> Option<PairId> {
        self.pair_ids.get(&(e1, e2)).copied()
    }

    pub fn pair(&self, id: PairId) -> (EntityId, EntityId) {
        self.pairs[id.index()]
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entities
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relations
    }

    fn intern_entity(&mut self, name: &str) -> EntityId {
        if let Some(id) = self.entity_ids.get(name) {
            return *id;
        }
        let id = EntityId(self.entities.len() as u32);
        self.entities.push(name.to_owned());
        self.entity_ids.insert(name.to_owned(), id);
        id
    }

    fn intern_relation(&mut self, name: &str) -> RelationId {
        if let Some(id) = self.relation_ids.get(name) {
            return *id;
        }
        let id = RelationId(self.relations.len() as u32);
        self.relations.push(name.to_owned());
        self.relation_ids.insert(name.to_owned(), id);
        id
    }

    fn intern_pair(&mut self, e1: EntityId, e2: EntityId) -> PairId {
        if let Some(id) = self.pair_ids.get(&(e1, e2)) {
            return *id;
        }
        let id = PairId(self.pairs.len() as u32);
        self.pairs.push((e1, e2));
        self.pair_ids.insert((e1, e2), id);
        id
    }

    /// Order-sensitive fingerprint of the name tables, used to detect
    /// checkpoint/dataset mismatches.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |s: &str| {
            for b in s.as_bytes() {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
            h ^= 0xff; // separator so that table boundaries matter
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        };
        for name in &self.entities {
            eat(name);
        }
        eat("|");
        for name in &self.relations {
            eat(name);
        }
        format!("{h:016x}")
    }
}

/// A loaded dataset: vocabulary, the three splits, and membership sets.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub vocab: Vocab,
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
    known: HashSet<Triple>,
    train_set: HashSet<Triple>,
    entity_in_train: Vec<bool>,
}

impl Dataset {
    /// Builds a dataset from name triples. Duplicates within a split are
    /// dropped (with a warning); ids are assigned in encounter order.
    pub fn from_names(
        train: &[(String, String, String)],
        valid: &[(String, String, String)],
        test: &[(String, String, String)],
    ) -> Dataset {
        let mut vocab = Vocab::default();
        let intern_split = |vocab: &mut Vocab, raw: &[(String, String, String)], split: &str| {
            let mut seen = HashSet::new();
            let mut out = Vec::with_capacity(raw.len());
            for (e1, r, e2) in raw {
                let t = Triple::new(
                    vocab.intern_entity(e1),
                    vocab.intern_relation(r),
                    vocab.intern_entity(e2),
                );
                if seen.insert(t) {
                    out.push(t);
                }
            }
            let dropped = raw.len() - out.len();
            if dropped > 0 {
                log::warn!("{split} split: dropped {dropped} duplicate triple(s)");
            }
            out
        };
        let train = intern_split(&mut vocab, train, "train");
        let valid = intern_split(&mut vocab, valid, "valid");
        let test = intern_split(&mut vocab, test, "test");

        for t in &train {
            vocab.intern_pair(t.e1, t.e2);
        }

        let mut entity_in_train = vec![false; vocab.n_entities()];
        for t in &train {
            entity_in_train[t.e1.index()] = true;
            entity_in_train[t.e2.index()] = true;
        }
        let train_set: HashSet<Triple> = train.iter().copied().collect();
        let mut known = train_set.clone();
        known.extend(valid.iter().copied());
        known.extend(test.iter().copied());

        Dataset {
            vocab,
            train,
            valid,
            test,
            known,
            train_set,
            entity_in_train,
        }
    }

    /// Whether the triple is a known fact in any split (used for filtering).
    pub fn contains(&self, t: &Triple) -> bool {
        self.known.contains(t)
    }

    /// Whether the triple is in the training split (used to reject negatives).
    pub fn in_train(&self, t: &Triple) -> bool {
        self.train_set.contains(t)
    }

    /// Whether the entity occurs in at least one training triple.
    pub fn entity_trained(&self, e: EntityId) -> bool {
        self.entity_in_train[e.index()]
    }

    /// Whether the ordered pair has a trained pair embedding.
    pub fn pair_trained(&self, e1: EntityId, e2: EntityId) -> bool {
        self.vocab.pair_id(e1, e2).is_some()
    }
}

fn parse_split(path: &Path, required: bool) -> Result<Vec<(String, String, String)>> {
    if !path.is_file() {
        if required {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        let mut fields = line.split('\t');
        match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(e1), Some(r), Some(e2), None) if !e1.is_empty() && !r.is_empty() && !e2.is_empty() => {
                out.push((e1.to_owned(), r.to_owned(), e2.to_owned()));
            }
            _ => {
                return Err(Error::MalformedLine {
                    path: path.to_path_buf(),
                    line: i + 1,
                    text: line.to_owned(),
                })
            }
        }
    }
    Ok(out)
}

/// Loads `train.txt` / `valid.txt` / `test.txt` from `dir`.
///
/// `valid.txt` may be absent (training then holds out its own validation
/// slice); `train.txt` and `test.txt` must exist, and the train split must be
/// non-empty.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let train_path = dir.join("train.txt");
    let train = parse_split(&train_path, true)?;
    if train.is_empty() {
        return Err(Error::EmptyTrain(train_path));
    }
    let valid = parse_split(&dir.join("valid.txt"), false)?;
    let test = parse_split(&dir.join("test.txt"), true)?;
    Ok(Dataset::from_names(&train, &valid, &test))
}

fn write_split(path: &Path, ds: &Dataset, triples: &[Triple]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for t in triples {
        writeln!(
            w,
            "{}\t{}\t{}",
            ds.vocab.entity_name(t.e1),
            ds.vocab.relation_name(t.r),
            ds.vocab.entity_name(t.e2)
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the three split files under `dir` (created if missing).
/// `load_dataset(write_dataset(ds))` reproduces the same splits.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_split(&dir.join("train.txt"), ds, &ds.train)?;
    write_split(&dir.join("valid.txt"), ds, &ds.valid)?;
    write_split(&dir.join("test.txt"), ds, &ds.test)?;
    Ok(())
}

/// Convenience for tests and generators.
pub fn name_triples(raw: &[(&str, &str, &str)]) -> Vec<(String, String, String)> {
    raw.iter()
        .map(|(a, b, c)| ((*a).to_owned(), (*b).to_owned(), (*c).to_owned()))
        .collect()
}

pub fn dataset_paths(dir: &Path) -> [PathBuf; 3] {
    [
        dir.join("train.txt"),
        dir.join("valid.txt"),
        dir.join("test.txt"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Dataset {
        Dataset::from_names(
            &name_triples(&[
                ("alice", "knows", "bob"),
                ("bob", "knows", "carol"),
                ("alice", "likes", "carol"),
            ]),
            &name_triples(&[("carol", "knows", "alice")]),
            &name_triples(&[("alice", "knows", "dave")]),
        )
    }

    #[test]
    fn ids_are_dense_and_cover_all_splits() {
        let ds = small();
        assert_eq!(ds.vocab.n_entities(), 4); // alice, bob, carol, dave
        assert_eq!(ds.vocab.n_relations(), 2);
        for name in ["alice", "bob", "carol", "dave"] {
            let id = ds.vocab.entity_id(name).unwrap();
            assert_eq!(ds.vocab.entity_name(id), name);
        }
        // dave appears only in test: indexed, but not trained
        assert!(!ds.entity_trained(ds.vocab.entity_id("dave").unwrap()));
        assert!(ds.entity_trained(ds.vocab.entity_id("alice").unwrap()));
    }

    #[test]
    fn pair_index_covers_train_only() {
        let ds = small();
        let id = |n: &str| ds.vocab.entity_id(n).unwrap();
        assert_eq!(ds.vocab.n_pairs(), 3);
        assert!(ds.pair_trained(id("alice"), id("bob")));
        assert!(!ds.pair_trained(id("bob"), id("alice"))); // pairs are ordered
        assert!(!ds.pair_trained(id("carol"), id("alice"))); // valid-only pair
        assert!(!ds.pair_trained(id("alice"), id("dave"))); // test-only pair
    }

    #[test]
    fn duplicate_triples_are_dropped() {
        let ds = Dataset::from_names(
            &name_triples(&[("a", "r", "b"), ("a", "r", "b"), ("a", "r", "c")]),
            &[],
            &name_triples(&[("a", "r", "d")]),
        );
        assert_eq!(ds.train.len(), 2);
    }

    #[test]
    fn membership_sets() {
        let ds = small();
        let t = |a: &str, r: &str, b: &str| {
            Triple::new(
                ds.vocab.entity_id(a).unwrap(),
                ds.vocab.relation_id(r).unwrap(),
                ds.vocab.entity_id(b).unwrap(),
            )
        };
        assert!(ds.in_train(&t("alice", "knows", "bob")));
        assert!(!ds.in_train(&t("carol", "knows", "alice")));
        assert!(ds.contains(&t("carol", "knows", "alice"))); // valid split
        assert!(ds.contains(&t("alice", "knows", "dave"))); // test split
        assert!(!ds.contains(&t("bob", "likes", "alice")));
    }

    #[test]
    fn roundtrip_write_load() {
        let ds = small();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(ds.train, back.train);
        assert_eq!(ds.valid, back.valid);
        assert_eq!(ds.test, back.test);
        assert_eq!(ds.vocab.entity_names(), back.vocab.entity_names());
        assert_eq!(ds.vocab.fingerprint(), back.vocab.fingerprint());
    }

    #[test]
    fn missing_train_file_is_an_error_naming_the_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("test.txt"), "a\tr\tb\n").unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        match err {
            Error::MissingFile(p) => assert!(p.ends_with("train.txt")),
            other => panic!("expected MissingFile, got {other:?}"),
        }
    }

    #[test]
    fn missing_valid_file_is_fine() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("train.txt"), "a\tr\tb\n").unwrap();
        std::fs::write(dir.path().join("test.txt"), "a\tr\tc\n").unwrap();
        let ds = load_dataset(dir.path()).unwrap();
        assert!(ds.valid.is_empty());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("train.txt"), "a\tr\tb\nbroken line\n").unwrap();
        std::fs::write(dir.path().join("test.txt"), "a\tr\tc\n").unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        match err {
            Error::MalformedLine { line, .. } => assert_eq!(line, 2),
            other => panic!("expected MalformedLine, got {other:?}"),
        }
    }

    #[test]
    fn empty_train_split_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("train.txt"), "").unwrap();
        std::fs::write(dir.path().join("test.txt"), "a\tr\tc\n").unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::EmptyTrain(_))));
    }

    #[test]
    fn exit_codes_by_class() {
        assert_eq!(Error::Config("x".into()).exit_code(), 1);
        assert_eq!(Error::MissingFile("f".into()).exit_code(), 2);
        assert_eq!(Error::Divergence("x".into()).exit_code(), 3);
    }
}
