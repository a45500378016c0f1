//! Checkpoint save/load.
//!
//! A checkpoint is a directory: `manifest.json` plus one subdirectory per
//! constituent model, each holding one TSV per parameter block
//! (`entity.tsv`, `relation.tsv`, `relation_obj.tsv`, `pair.tsv` as
//! applicable). Rows carry their dense id in the first column; the shared
//! OOV row is written last with the id `__oov__`. Values are printed with
//! `{:.16e}`, which round-trips f64 exactly, so a save/load cycle is
//! bitwise lossless.
//!
//! Saves go to `<dir>.partial` first and are renamed into place, so an
//! interrupted run never leaves a half-written checkpoint under the final
//! name.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::Dataset;
use crate::models::{Block, EmbeddingStore, ModelKind, ModelParams};

pub const OOV_ROW_ID: &str = "__oov__";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct VocabCounts {
    pub entities: usize,
    pub relations: usize,
    pub pairs: usize,
}

impl VocabCounts {
    pub fn of(ds: &Dataset) -> VocabCounts {
        VocabCounts {
            entities: ds.vocab.n_entities(),
            relations: ds.vocab.n_relations(),
            pairs: ds.vocab.n_pairs(),
        }
    }
}

/// Metadata stored alongside the parameter TSVs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub model: String,
    pub dim: usize,
    pub loss: String,
    /// Epoch the saved parameters come from (the best validation epoch).
    pub epoch: usize,
    /// Validation MRR (percent) of the saved parameters; None when the run
    /// had no validation queries.
    pub valid_mrr: Option<f64>,
    pub counts: VocabCounts,
    /// Fingerprint of the vocabulary the model was trained against. Loading
    /// against a dataset with a different fingerprint is refused: dense ids
    /// would silently point at the wrong names.
    pub vocab_fingerprint: String,
}

pub fn save_checkpoint(dir: &Path, params: &ModelParams, manifest: &Manifest) -> Result<()> {
    let partial = partial_path(dir);
    if partial.exists() {
        fs::remove_dir_all(&partial)?;
    }
    fs::create_dir_all(&partial)?;

    let manifest_json = serde_json::to_string_pretty(manifest)?;
    fs::write(partial.join("manifest.json"), manifest_json + "\n")?;

    for store in &params.stores {
        let sub = partial.join(store.model().name());
        fs::create_dir_all(&sub)?;
        for block in store.blocks() {
            let pb = store.block(block).expect("listed block present");
            let file = fs::File::create(sub.join(format!("{}.tsv", block.name())))?;
            let mut w = BufWriter::new(file);
            let oov_from = oov_row(store, block);
            for row in 0..pb.rows() {
                match oov_from {
                    Some(o) if row == o => write!(w, "{OOV_ROW_ID}")?,
                    _ => write!(w, "{row}")?,
                }
                for v in pb.row(row) {
                    write!(w, "\t{v:.16e}")?;
                }
                writeln!(w)?;
            }
            w.flush()?;
        }
    }

    if dir.exists() {
        fs::remove_dir_all(dir)?;
    }
    fs::rename(&partial, dir)?;
    Ok(())
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|_| Error::MissingFile(path))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Checkpoint(format!("bad manifest.json: {e}")))?;
    Ok(manifest)
}

/// Loads a checkpoint and verifies it belongs to `ds`: the vocabulary
/// fingerprint and the entity/relation/pair counts must all match.
pub fn load_checkpoint(dir: &Path, ds: &Dataset) -> Result<(ModelParams, Manifest)> {
    let manifest = load_manifest(dir)?;
    let kind: ModelKind = manifest.model.parse()?;

    let fp = ds.vocab.fingerprint();
    if manifest.vocab_fingerprint != fp {
        return Err(Error::VocabMismatch(format!(
            "checkpoint was trained on vocabulary {} but this dataset has {}",
            manifest.vocab_fingerprint, fp
        )));
    }
    let counts = VocabCounts::of(ds);
    if manifest.counts != counts {
        return Err(Error::VocabMismatch(format!(
            "checkpoint counts {:?} do not match dataset counts {:?}",
            manifest.counts, counts
        )));
    }

    let mut stores = Vec::new();
    for &base in kind.constituents() {
        let mut store = EmbeddingStore::zeros(base, manifest.dim, ds);
        let sub = dir.join(base.name());
        for block in store.blocks() {
            let path = sub.join(format!("{}.tsv", block.name()));
            let oov_from = oov_row(&store, block);
            let pb = store.block_mut(block).expect("block listed but missing");
            let file = fs::File::open(&path).map_err(|_| Error::MissingFile(path.clone()))?;
            let mut rows_seen = 0usize;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line?;
                let mut fields = line.split('\t');
                let id = fields.next().unwrap_or("");
                let expected = match oov_from {
                    Some(o) if i == o => OOV_ROW_ID.to_string(),
                    _ => i.to_string(),
                };
                if id != expected {
                    return Err(Error::Checkpoint(format!(
                        "{}: row {} has id {:?}, expected {:?}",
                        path.display(),
                        i + 1,
                        id,
                        expected
                    )));
                }
                if i >= pb.rows() {
                    return Err(Error::Checkpoint(format!(
                        "{}: more rows than expected ({})",
                        path.display(),
                        pb.rows()
                    )));
                }
                let row = pb.row_mut(i);
                let mut filled = 0usize;
                for field in fields {
                    if filled >= row.len() {
                        filled += 1;
                        continue;
                    }
                    row[filled] = field.parse::<f64>().map_err(|_| {
                        Error::Checkpoint(format!(
                            "{}: row {} column {}: not a float: {:?}",
                            path.display(),
                            i + 1,
                            filled + 2,
                            field
                        ))
                    })?;
                    filled += 1;
                }
                if filled != row.len() {
                    return Err(Error::Checkpoint(format!(
                        "{}: row {} has {} values, expected {}",
                        path.display(),
                        i + 1,
                        filled,
                        row.len()
                    )));
                }
                rows_seen += 1;
            }
            if rows_seen != pb.rows() {
                return Err(Error::Checkpoint(format!(
                    "{}: {} rows, expected {}",
                    path.display(),
                    rows_seen,
                    pb.rows()
                )));
            }
        }
        stores.push(store);
    }
    Ok((ModelParams { kind, stores }, manifest))
}

fn partial_path(dir: &Path) -> std::path::PathBuf {
    let mut name = dir.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    dir.with_file_name(name)
}

/// Row index of the shared OOV row within `block`, if that block has one.
fn oov_row(store: &EmbeddingStore, block: Block) -> Option<usize> {
    match block {
        Block::Entity => Some(store.oov_entity_row()),
        Block::Pair => Some(store.oov_pair_row()),
        Block::Relation | Block::RelationObj => None,
    }
}
