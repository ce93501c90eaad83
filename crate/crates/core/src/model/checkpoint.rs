//! Text checkpoints: a JSON header line, then one line per tensor
//! (`name rows cols v...`). Values use the shortest round-trip form, so a
//! load reproduces the saved model bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::encoder::Encoder;
use super::matrix::Matrix;
use super::objective::{ProjectionHead, TaskHead};
use super::subword::SubwordVocab;
use super::train::{Model, ModelConfig};
use super::{ModelError, ParamStore};

const FORMAT: &str = "cori-checkpoint-v1";

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    config: ModelConfig,
    vocab: SubwordVocab,
    tensors: usize,
}

pub fn to_string(model: &Model) -> String {
    let header = Header {
        format: FORMAT.to_string(),
        config: model.config,
        vocab: model.vocab.clone(),
        tensors: model.store.len(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for (name, t) in model.store.iter() {
        out.push_str(&format!("{name} {} {}", t.rows(), t.cols()));
        for v in t.data() {
            out.push_str(&format!(" {v:?}"));
        }
        out.push('\n');
    }
    out
}

pub fn from_str(s: &str) -> Result<Model, ModelError> {
    let bad = |m: String| ModelError::Checkpoint(m);
    let mut lines = s.lines();
    let header: Header = serde_json::from_str(lines.next().ok_or_else(|| bad("empty checkpoint".into()))?)
        .map_err(|e| bad(format!("header: {e}")))?;
    if header.format != FORMAT {
        return Err(bad(format!("unsupported format {:?}", header.format)));
    }
    let mut store = ParamStore::new();
    for (i, line) in lines.enumerate() {
        let mut parts = line.split(' ');
        let name = parts.next().filter(|n| !n.is_empty()).ok_or_else(|| bad(format!("tensor {i}: no name")))?;
        let mut dim = || -> Result<usize, ModelError> {
            parts
                .next()
                .and_then(|d| d.parse().ok())
                .ok_or_else(|| bad(format!("tensor {name}: bad shape")))
        };
        let (rows, cols) = (dim()?, dim()?);
        let data = parts
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("tensor {name}: {e}")))?;
        if data.len() != rows * cols {
            return Err(bad(format!("tensor {name}: {} values for {rows}x{cols}", data.len())));
        }
        store.add(name, Matrix::from_vec(rows, cols, data));
    }
    if store.len() != header.tensors {
        return Err(bad(format!("expected {} tensors, found {}", header.tensors, store.len())));
    }
    let mut vocab = header.vocab;
    vocab.rebuild_index();
    let config = header.config;
    Ok(Model {
        encoder: Encoder::from_store(config.encoder, &store)?,
        projection: ProjectionHead::from_store(&store)?,
        head: TaskHead::from_store(&store, config.task)?,
        config,
        store,
        vocab,
    })
}

pub fn save(model: &Model, path: &Path) -> Result<(), ModelError> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp)?;
    f.write_all(to_string(model).as_bytes())?;
    f.sync_all()?;
    fs::rename(tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Model, ModelError> {
    from_str(&fs::read_to_string(path)?)
}
