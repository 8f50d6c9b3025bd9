//! Model persistence: a `model.json` manifest plus `weights.bin` holding
//! one tensor blob per line in manifest stage order.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{build_model, EpochStats, ModelSpec, Network, TrainedModel};
use crate::datasets::{FeatureSchema, ScalerState};
use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct StageEntry {
    name: String,
    weights_shape: Vec<usize>,
    bias_shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelManifest {
    spec: ModelSpec,
    schema: FeatureSchema,
    schema_hash: String,
    scaler: Option<ScalerState>,
    history: Vec<EpochStats>,
    stages: Vec<StageEntry>,
}

/// FNV-1a hash of the canonical schema JSON.
pub fn schema_hash(schema: &FeatureSchema) -> String {
    let json = serde_json::to_string(schema).expect("schema serializes");
    let mut h: u64 = 0xcbf29ce484222325;
    for b in json.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

fn stage_pairs(net: &mut Network) -> (Vec<String>, Vec<(&mut Tensor, &mut Tensor)>) {
    match net {
        Network::Cnn(m) => (m.stage_names(), m.params_mut()),
        Network::Mlp(m) => (m.stage_names(), m.params_mut()),
    }
}

/// Writes `model.json` and `weights.bin` into `dir`.
pub fn save_model(model: &TrainedModel, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut clone = model.clone();
    let (names, params) = stage_pairs(&mut clone.net);
    let stages: Vec<StageEntry> = names
        .iter()
        .zip(&params)
        .map(|(name, (w, b))| StageEntry {
            name: name.clone(),
            weights_shape: w.shape().to_vec(),
            bias_shape: b.shape().to_vec(),
        })
        .collect();
    let manifest = ModelManifest {
        spec: model.spec.clone(),
        schema: model.schema.clone(),
        schema_hash: schema_hash(&model.schema),
        scaler: model.scaler.clone(),
        history: model.history.clone(),
        stages,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(dir.join("model.json"), manifest_json + "\n")?;

    let mut blob = Vec::new();
    for (w, b) in &params {
        serde_json::to_writer(&mut blob, w)?;
        blob.push(b'\n');
        serde_json::to_writer(&mut blob, b)?;
        blob.push(b'\n');
    }
    let mut f = std::fs::File::create(dir.join("weights.bin"))?;
    f.write_all(&blob)?;
    Ok(())
}

/// Rebuilds the network from the manifest spec and loads the stored
/// tensors in stage order, verifying shapes.
pub fn load_model(dir: &Path) -> Result<TrainedModel> {
    let manifest: ModelManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join("model.json"))?)?;
    if schema_hash(&manifest.schema) != manifest.schema_hash {
        return Err(Error::Data("schema hash mismatch in model manifest".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut model = build_model(&manifest.spec, &manifest.schema, &mut rng)?;
    model.history = manifest.history;
    model.scaler = manifest.scaler;

    let file = std::fs::File::open(dir.join("weights.bin"))?;
    let mut lines = BufReader::new(file).lines();
    let mut read_tensor = || -> Result<Tensor> {
        let line = lines
            .next()
            .ok_or_else(|| Error::Data("weights.bin has fewer blobs than stages".into()))??;
        Ok(serde_json::from_str(&line)?)
    };
    let (_, params) = stage_pairs(&mut model.net);
    if params.len() != manifest.stages.len() {
        return Err(Error::Data(format!(
            "manifest lists {} stages, model has {}",
            manifest.stages.len(),
            params.len()
        )));
    }
    for ((w, b), entry) in params.into_iter().zip(&manifest.stages) {
        let loaded_w = read_tensor()?;
        let loaded_b = read_tensor()?;
        if loaded_w.shape() != entry.weights_shape || loaded_b.shape() != entry.bias_shape {
            return Err(Error::Data(format!(
                "stage {} shape mismatch on load",
                entry.name
            )));
        }
        if loaded_w.shape() != w.shape() || loaded_b.shape() != b.shape() {
            return Err(Error::Data(format!(
                "stage {} does not fit the rebuilt model",
                entry.name
            )));
        }
        *w = loaded_w;
        *b = loaded_b;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::small_dataset;
    use crate::model::{ModelKind, TrainOptions};

    #[test]
    fn save_load_round_trip_preserves_predictions() {
        let ds = small_dataset(7);
        let spec = ModelSpec::default_for(ModelKind::Cnn, &ds.schema);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = build_model(&spec, &ds.schema, &mut rng).unwrap();
        let trained = crate::model::train(
            model,
            &ds,
            &TrainOptions {
                max_epochs: 2,
                patience: 2,
                ..Default::default()
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_model(&trained, dir.path()).unwrap();
        let loaded = load_model(dir.path()).unwrap();
        for i in [0usize, 3, 11] {
            assert_eq!(
                trained.predict(&ds.instances[i]).unwrap(),
                loaded.predict(&ds.instances[i]).unwrap()
            );
        }
        assert_eq!(trained.history.len(), loaded.history.len());
    }
}
