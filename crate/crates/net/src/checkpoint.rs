//! Checkpoint files: every named parameter tensor plus the configs that
//! shaped them.
//!
//! A checkpoint is a single JSON document with a format version, both model
//! configs, a hash of those configs (so a checkpoint cannot be loaded into
//! a mismatched architecture by accident), and the flat data of every
//! tensor under its registration name. Loading reconstructs both models
//! from the embedded configs and overwrites each tensor by name, refusing
//! files with unknown names, missing tensors, or shape drift.

use crate::error::{Error, Result};
use crate::model::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    config_hash: String,
    generator_config: GeneratorConfig,
    discriminator_config: DiscriminatorConfig,
    params: Vec<ParamEntry>,
}

/// FNV-1a over the serialized config pair; cheap, stable, and good enough
/// to catch architecture mismatches.
pub fn config_hash(gen: &GeneratorConfig, disc: &DiscriminatorConfig) -> Result<String> {
    let text = serde_json::to_string(&(gen, disc))
        .map_err(|e| Error::InvalidInput(format!("config serialization failed: {e}")))?;
    Ok(format!("{:016x}", fnv1a64(text.as_bytes())))
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn save_checkpoint(path: &Path, gen: &Generator, disc: &Discriminator) -> Result<()> {
    let mut params = Vec::with_capacity(gen.store().len() + disc.store().len());
    for store in [gen.store(), disc.store()] {
        for i in 0..store.len() {
            params.push(ParamEntry {
                name: store.name(i).to_string(),
                shape: store.shape(i).to_vec(),
                data: store.data(i).to_vec(),
            });
        }
    }
    let file = CheckpointFile {
        version: CHECKPOINT_FORMAT_VERSION,
        config_hash: config_hash(gen.config(), disc.config())?,
        generator_config: gen.config().clone(),
        discriminator_config: disc.config().clone(),
        params,
    };
    let text = serde_json::to_string(&file)
        .map_err(|e| Error::InvalidInput(format!("checkpoint serialization failed: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(Generator, Discriminator)> {
    let text = std::fs::read_to_string(path)?;
    let file: CheckpointFile = serde_json::from_str(&text).map_err(|e| {
        Error::InvalidInput(format!("checkpoint {} is not parseable: {e}", path.display()))
    })?;
    if file.version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::InvalidInput(format!(
            "checkpoint {} has format version {}, this build reads {}",
            path.display(),
            file.version,
            CHECKPOINT_FORMAT_VERSION
        )));
    }
    let expected = config_hash(&file.generator_config, &file.discriminator_config)?;
    if file.config_hash != expected {
        return Err(Error::InvalidInput(format!(
            "checkpoint {} config hash {} does not match its configs (expected {expected})",
            path.display(),
            file.config_hash
        )));
    }

    // seed is irrelevant here: every tensor is overwritten below
    let mut gen = Generator::new(file.generator_config.clone(), 0)?;
    let mut disc = Discriminator::new(file.discriminator_config.clone(), 0)?;
    let total = gen.store().len() + disc.store().len();
    if file.params.len() != total {
        return Err(Error::InvalidInput(format!(
            "checkpoint {} carries {} tensors, models declare {total}",
            path.display(),
            file.params.len()
        )));
    }
    for entry in &file.params {
        let store = if entry.name.starts_with("g.") {
            gen.store_mut()
        } else {
            disc.store_mut()
        };
        let idx = store.index_of(&entry.name).ok_or_else(|| {
            Error::InvalidInput(format!("checkpoint tensor {} is unknown to the model", entry.name))
        })?;
        if store.shape(idx) != entry.shape.as_slice() {
            return Err(Error::InvalidInput(format!(
                "checkpoint tensor {} has shape {:?}, model expects {:?}",
                entry.name,
                entry.shape,
                store.shape(idx)
            )));
        }
        if entry.data.len() != store.data(idx).len() {
            return Err(Error::InvalidInput(format!(
                "checkpoint tensor {} has {} values, model expects {}",
                entry.name,
                entry.data.len(),
                store.data(idx).len()
            )));
        }
        store.data_mut(idx).copy_from_slice(&entry.data);
    }
    Ok((gen, disc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generator_predict;

    fn tiny_models() -> (Generator, Discriminator) {
        let gcfg = GeneratorConfig {
            m_antennas: 2,
            spatial: 4,
            base_channels: 2,
            depth: 1,
            transformer_dim: 4,
            transformer_heads: 2,
            transformer_layers: 1,
            gsa_reduction: 2,
            ..Default::default()
        };
        let dcfg = DiscriminatorConfig {
            m_antennas: 2,
            spatial: 4,
            channels: vec![2, 3, 4, 5, 6],
        };
        (Generator::new(gcfg, 101).unwrap(), Discriminator::new(dcfg, 102).unwrap())
    }

    #[test]
    fn a_checkpoint_round_trip_preserves_every_prediction() {
        let (gen, disc) = tiny_models();
        let dir = std::env::temp_dir().join("superdir-ckpt-roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");
        save_checkpoint(&path, &gen, &disc).unwrap();
        let (gen2, disc2) = load_checkpoint(&path).unwrap();

        let x: Vec<f64> = (0..8).map(|i| (i as f64 * 0.8).sin()).collect();
        assert_eq!(
            generator_predict(&gen, &x).unwrap(),
            generator_predict(&gen2, &x).unwrap(),
            "loaded generator is bit-identical"
        );
        assert_eq!(gen2.config(), gen.config());
        assert_eq!(disc2.config(), disc.config());
        for i in 0..disc.store().len() {
            assert_eq!(disc.store().data(i), disc2.store().data(i));
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn version_and_hash_tampering_are_rejected() {
        let (gen, disc) = tiny_models();
        let dir = std::env::temp_dir().join("superdir-ckpt-tamper");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");
        save_checkpoint(&path, &gen, &disc).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();

        let bad_version = text.replacen("\"version\":1", "\"version\":99", 1);
        assert_ne!(bad_version, text, "the version field is where we expect");
        std::fs::write(&path, &bad_version).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(format!("{err}").contains("version"), "got: {err}");

        let hash = config_hash(gen.config(), disc.config()).unwrap();
        let bad_hash = text.replacen(&hash, "0000000000000000", 1);
        assert_ne!(bad_hash, text);
        std::fs::write(&path, &bad_hash).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(format!("{err}").contains("hash"), "got: {err}");
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn the_config_hash_separates_architectures() {
        let (gen, disc) = tiny_models();
        let h1 = config_hash(gen.config(), disc.config()).unwrap();
        let mut other = gen.config().clone();
        other.base_channels = 4;
        let h2 = config_hash(&other, disc.config()).unwrap();
        assert_ne!(h1, h2, "different architectures, different hashes");
        assert_eq!(h1.len(), 16, "fixed-width hex rendering");
    }
}
