//! Versioned binary model container.
//!
//! Layout (all integers little-endian; see docs/MODEL_FORMAT.md):
//!
//! ```text
//! magic    b"VCGB"
//! version  u32 (currently 1)
//! hdr_len  u32, then hdr_len bytes of JSON header
//!          { base_score, feature_names, config, metadata }
//! n_trees  u32
//! per tree: n_nodes u32, then nodes in preorder:
//!   tag u8: 0 = leaf  -> weight f64, cover f64
//!           1 = split -> feature u32, threshold f64, default_left u8,
//!                        left u32, right u32, cover f64
//! sha256   32-byte digest of every preceding byte
//! ```
//!
//! Round trips are bit-exact: saving a loaded model reproduces the file.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::tree::{Node, Tree};
use super::{GbdtError, Model, ModelMetadata, TrainConfig};

const MAGIC: &[u8; 4] = b"VCGB";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    base_score: f64,
    feature_names: Vec<String>,
    config: TrainConfig,
    metadata: ModelMetadata,
}

/// Serialize a model. The byte stream is a pure function of the model.
pub fn model_to_bytes(model: &Model) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());

    let header = Header {
        base_score: model.base_score,
        feature_names: model.feature_names.clone(),
        config: model.config.clone(),
        metadata: model.metadata.clone(),
    };
    let header_json = serde_json::to_vec(&header).expect("header serializes");
    buf.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header_json);

    buf.extend_from_slice(&(model.trees.len() as u32).to_le_bytes());
    for tree in &model.trees {
        let nodes = preorder(tree);
        buf.extend_from_slice(&(nodes.len() as u32).to_le_bytes());
        for node in &nodes {
            match node {
                Node::Leaf { weight, cover } => {
                    buf.push(0);
                    buf.extend_from_slice(&weight.to_le_bytes());
                    buf.extend_from_slice(&cover.to_le_bytes());
                }
                Node::Split { feature, threshold, default_left, left, right, cover } => {
                    buf.push(1);
                    buf.extend_from_slice(&feature.to_le_bytes());
                    buf.extend_from_slice(&threshold.to_le_bytes());
                    buf.push(u8::from(*default_left));
                    buf.extend_from_slice(&left.to_le_bytes());
                    buf.extend_from_slice(&right.to_le_bytes());
                    buf.extend_from_slice(&cover.to_le_bytes());
                }
            }
        }
    }

    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

/// Nodes re-indexed in preorder; child indices refer to the new order.
fn preorder(tree: &Tree) -> Vec<Node> {
    fn walk(nodes: &[Node], idx: usize, out: &mut Vec<Node>) -> u32 {
        let my_idx = out.len() as u32;
        out.push(nodes[idx].clone());
        if let Node::Split { left, right, .. } = nodes[idx] {
            let new_left = walk(nodes, left as usize, out);
            let new_right = walk(nodes, right as usize, out);
            if let Node::Split { left, right, .. } = &mut out[my_idx as usize] {
                *left = new_left;
                *right = new_right;
            }
        }
        my_idx
    }
    let mut out = Vec::with_capacity(tree.nodes.len());
    if !tree.nodes.is_empty() {
        walk(&tree.nodes, 0, &mut out);
    }
    out
}

pub fn save_model(model: &Model, path: &Path) -> Result<(), GbdtError> {
    fs::write(path, model_to_bytes(model))?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], GbdtError> {
        if self.pos + n > self.buf.len() {
            return Err(GbdtError::CorruptModel("unexpected end of file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, GbdtError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, GbdtError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, GbdtError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn model_from_bytes(buf: &[u8]) -> Result<Model, GbdtError> {
    const DIGEST_LEN: usize = 32;
    if buf.len() < MAGIC.len() + 4 + DIGEST_LEN {
        return Err(GbdtError::CorruptModel("file too short".into()));
    }
    let (body, stored_digest) = buf.split_at(buf.len() - DIGEST_LEN);
    let digest = Sha256::digest(body);
    if digest.as_slice() != stored_digest {
        return Err(GbdtError::CorruptModel("checksum mismatch".into()));
    }

    let mut r = Reader { buf: body, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(GbdtError::CorruptModel("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(GbdtError::FormatVersionMismatch { expected: FORMAT_VERSION, got: version });
    }
    let header_len = r.u32()? as usize;
    let header: Header = serde_json::from_slice(r.take(header_len)?)
        .map_err(|e| GbdtError::CorruptModel(format!("bad header: {e}")))?;

    let n_features = header.feature_names.len() as u32;
    let n_trees = r.u32()? as usize;
    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let n_nodes = r.u32()? as usize;
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let node = match r.u8()? {
                0 => Node::Leaf { weight: r.f64()?, cover: r.f64()? },
                1 => {
                    let feature = r.u32()?;
                    let threshold = r.f64()?;
                    let default_left = r.u8()? != 0;
                    let left = r.u32()?;
                    let right = r.u32()?;
                    let cover = r.f64()?;
                    if feature >= n_features {
                        return Err(GbdtError::CorruptModel(format!(
                            "split feature {feature} out of range"
                        )));
                    }
                    Node::Split { feature, threshold, default_left, left, right, cover }
                }
                tag => return Err(GbdtError::CorruptModel(format!("unknown node tag {tag}"))),
            };
            nodes.push(node);
        }
        for node in &nodes {
            if let Node::Split { left, right, .. } = node {
                if *left as usize >= nodes.len() || *right as usize >= nodes.len() {
                    return Err(GbdtError::CorruptModel("child index out of range".into()));
                }
            }
        }
        trees.push(Tree { nodes });
    }
    if r.pos != body.len() {
        return Err(GbdtError::CorruptModel("trailing bytes".into()));
    }

    Ok(Model {
        trees,
        base_score: header.base_score,
        feature_names: header.feature_names,
        config: header.config,
        metadata: header.metadata,
    })
}

pub fn load_model(path: &Path) -> Result<Model, GbdtError> {
    model_from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::super::train::{default_feature_names, train};
    use super::super::{Dataset, TrainConfig};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trained() -> Model {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut ds = Dataset::new(3);
        for _ in 0..300 {
            let row = [
                rng.gen_range(-1.0..1.0),
                if rng.gen_bool(0.2) { f64::NAN } else { rng.gen_range(-1.0..1.0) },
                rng.gen_range(-1.0..1.0),
            ];
            ds.push_row(&row, u8::from(row[0] + row[2] > 0.2));
        }
        let cfg = TrainConfig { n_trees: 10, ..TrainConfig::default() };
        train(&ds, &Dataset::new(3), &cfg, &default_feature_names(3), Default::default())
            .unwrap()
            .model
    }

    #[test]
    fn round_trip_is_bit_exact_and_prediction_identical() {
        let model = trained();
        let bytes = model_to_bytes(&model);
        let loaded = model_from_bytes(&bytes).unwrap();
        assert_eq!(model_to_bytes(&loaded), bytes);

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let row = [
                rng.gen_range(-2.0..2.0),
                if rng.gen_bool(0.3) { f64::NAN } else { rng.gen_range(-2.0..2.0) },
                rng.gen_range(-2.0..2.0),
            ];
            let a = model.predict_proba(&row).unwrap();
            let b = loaded.predict_proba(&row).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn truncated_or_tampered_files_are_corrupt() {
        let bytes = model_to_bytes(&trained());
        for cut in [1, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(
                model_from_bytes(&bytes[..cut]),
                Err(GbdtError::CorruptModel(_))
            ));
        }
        let mut tampered = bytes.clone();
        let mid = tampered.len() / 2;
        tampered[mid] ^= 0xff;
        assert!(matches!(model_from_bytes(&tampered), Err(GbdtError::CorruptModel(_))));
    }

    #[test]
    fn future_version_is_rejected() {
        let mut bytes = model_to_bytes(&trained());
        bytes[4..8].copy_from_slice(&99u32.to_le_bytes());
        let body_len = bytes.len() - 32;
        let digest = Sha256::digest(&bytes[..body_len]);
        bytes[body_len..].copy_from_slice(&digest);
        assert!(matches!(
            model_from_bytes(&bytes),
            Err(GbdtError::FormatVersionMismatch { got: 99, .. })
        ));
    }

    #[test]
    fn save_and_load_via_files() {
        let model = trained();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.vcgb");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(model_to_bytes(&loaded), model_to_bytes(&model));
        assert_eq!(loaded.metadata, model.metadata);
    }
}
