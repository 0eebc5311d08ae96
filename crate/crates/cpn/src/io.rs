//! Files on disk: `CPNT` tensors, JSON documents and the corpus layout.
//!
//! ```text
//! corpus/
//!   manifest.json          written last
//!   ground_truth.json
//!   scene_00000/
//!     tl_heat.cpnt br_heat.cpnt tl_off.cpnt br_off.cpnt
//!     box_feat.cpnt cat_feat.cpnt
//!     weights/binary_kernel.cpnt binary_bias.cpnt class_kernel.cpnt class_bias.cpnt
//!     gt.json
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use cpn_core::synth::OracleBundle;
use cpn_core::{FeatureMaps, HeadWeights, HeatmapSet, Tensor};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::formats::{Manifest, ManifestEntry};

pub const MANIFEST: &str = "manifest.json";
pub const GROUND_TRUTH: &str = "ground_truth.json";
pub const SCENE_GT: &str = "gt.json";
pub const WEIGHTS_DIR: &str = "weights";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Tensor::decode(&bytes).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    fs::write(path, t.encode()).map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)).map_err(io_err(path))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(io_err(path))
}

pub fn scene_dir_name(index: usize) -> String {
    format!("scene_{index:05}")
}

pub fn write_weights(dir: &Path, w: &HeadWeights) -> Result<()> {
    create_dir(dir)?;
    write_tensor(&dir.join("binary_kernel.cpnt"), &w.binary_kernel)?;
    write_tensor(&dir.join("binary_bias.cpnt"), &Tensor::new(vec![1], vec![w.binary_bias])?)?;
    write_tensor(&dir.join("class_kernel.cpnt"), &w.class_kernel)?;
    let n = w.class_bias.len();
    write_tensor(&dir.join("class_bias.cpnt"), &Tensor::new(vec![n], w.class_bias.clone())?)
}

pub fn read_weights(dir: &Path) -> Result<HeadWeights> {
    let binary_bias = read_tensor(&dir.join("binary_bias.cpnt"))?;
    if binary_bias.len() != 1 {
        return Err(CliError::Data(format!(
            "{}: binary_bias must hold one value",
            dir.display()
        )));
    }
    let w = HeadWeights::new(
        read_tensor(&dir.join("binary_kernel.cpnt"))?,
        binary_bias.data()[0],
        read_tensor(&dir.join("class_kernel.cpnt"))?,
        read_tensor(&dir.join("class_bias.cpnt"))?.into_data(),
    );
    w.map_err(|source| CliError::File {
        path: dir.to_path_buf(),
        source,
    })
}

/// Inputs of one image.
pub struct SceneInputs {
    pub heatmaps: HeatmapSet,
    pub features: FeatureMaps,
    pub weights: HeadWeights,
}

pub fn write_scene(dir: &Path, bundle: &OracleBundle) -> Result<()> {
    create_dir(dir)?;
    let hm = &bundle.heatmaps;
    write_tensor(&dir.join("tl_heat.cpnt"), &hm.tl_heat)?;
    write_tensor(&dir.join("br_heat.cpnt"), &hm.br_heat)?;
    write_tensor(&dir.join("tl_off.cpnt"), &hm.tl_off)?;
    write_tensor(&dir.join("br_off.cpnt"), &hm.br_off)?;
    write_tensor(&dir.join("box_feat.cpnt"), &bundle.features.box_feat)?;
    write_tensor(&dir.join("cat_feat.cpnt"), &bundle.features.cat_feat)?;
    write_weights(&dir.join(WEIGHTS_DIR), &bundle.weights)
}

pub fn read_scene(dir: &Path) -> Result<SceneInputs> {
    let tensor = |name: &str| read_tensor(&dir.join(name));
    let in_dir = |source| CliError::File {
        path: dir.to_path_buf(),
        source,
    };
    let heatmaps = HeatmapSet::new(
        tensor("tl_heat.cpnt")?,
        tensor("br_heat.cpnt")?,
        tensor("tl_off.cpnt")?,
        tensor("br_off.cpnt")?,
    )
    .map_err(in_dir)?;
    let features = FeatureMaps::new(tensor("box_feat.cpnt")?, tensor("cat_feat.cpnt")?).map_err(in_dir)?;
    Ok(SceneInputs {
        heatmaps,
        features,
        weights: read_weights(&dir.join(WEIGHTS_DIR))?,
    })
}

/// Scenes of a corpus as `(image_id, directory)`: from the manifest when
/// present, otherwise every `scene_<n>` subdirectory in name order.
pub fn list_scenes(corpus: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let manifest = corpus.join(MANIFEST);
    if manifest.exists() {
        let m: Manifest = read_json(&manifest)?;
        return Ok(m
            .scenes
            .into_iter()
            .map(|ManifestEntry { image_id, dir, .. }| (image_id, corpus.join(dir)))
            .collect());
    }
    let mut found = Vec::new();
    for entry in fs::read_dir(corpus).map_err(io_err(corpus))? {
        let entry = entry.map_err(io_err(corpus))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(id) = name.strip_prefix("scene_").and_then(|n| n.parse::<u64>().ok()) {
            if entry.path().is_dir() {
                found.push((id, entry.path()));
            }
        }
    }
    found.sort();
    Ok(found)
}
