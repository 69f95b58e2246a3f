//! Checkpoint I/O.
//!
//! Tensor file layout (little-endian, version tag in the magic):
//!
//! ```text
//! magic   b"CCLABCK1"
//! u32     tensor count
//! repeat: u32 name_len, name bytes, u32 ndim, u64 dims..., f64 data...
//! u32     vocab entry count
//! repeat: u32 len, utf8 bytes
//! ```
//!
//! A checkpoint directory holds `params.bin`, `ref_params.bin`,
//! `adam.bin`, `curriculum.json`, `config.json`, and `manifest.json`
//! (version, seed, next update index, params content hash). Values are
//! exact f64 bits, so restoring reproduces the run bit for bit.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::curriculum::CurriculumState;
use crate::optim::AdamState;
use crate::policy::{ModelConfig, PolicyParams};
use crate::trainer::RunConfig;
use crate::vocab::Vocab;

const MAGIC: &[u8; 8] = b"CCLABCK1";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Format(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

type Result<T> = std::result::Result<T, CheckpointError>;

fn write_tensor_file(
    path: &Path,
    tensors: &[(&str, &[f64], Vec<usize>)],
    vocab_entries: &[String],
) -> Result<()> {
    let mut w = Vec::new();
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(tensors.len() as u32)?;
    for (name, data, shape) in tensors {
        w.write_u32::<LittleEndian>(name.len() as u32)?;
        w.write_all(name.as_bytes())?;
        w.write_u32::<LittleEndian>(shape.len() as u32)?;
        for &d in shape {
            w.write_u64::<LittleEndian>(d as u64)?;
        }
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        for &v in *data {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    w.write_u32::<LittleEndian>(vocab_entries.len() as u32)?;
    for e in vocab_entries {
        w.write_u32::<LittleEndian>(e.len() as u32)?;
        w.write_all(e.as_bytes())?;
    }
    fs::write(path, w)?;
    Ok(())
}

#[allow(clippy::type_complexity)]
fn read_tensor_file(path: &Path) -> Result<(Vec<(String, Vec<f64>, Vec<usize>)>, Vec<String>)> {
    let bytes = fs::read(path)?;
    let mut r = bytes.as_slice();
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::Format(format!(
            "{}: bad magic",
            path.display()
        )));
    }
    let count = r.read_u32::<LittleEndian>()?;
    let mut tensors = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let name_len = r.read_u32::<LittleEndian>()? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| CheckpointError::Format("tensor name not utf8".into()))?;
        let ndim = r.read_u32::<LittleEndian>()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.read_u64::<LittleEndian>()? as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(r.read_f64::<LittleEndian>()?);
        }
        tensors.push((name, data, shape));
    }
    let vcount = r.read_u32::<LittleEndian>()? as usize;
    let mut vocab_entries = Vec::with_capacity(vcount);
    for _ in 0..vcount {
        let len = r.read_u32::<LittleEndian>()? as usize;
        let mut s = vec![0u8; len];
        r.read_exact(&mut s)?;
        vocab_entries.push(
            String::from_utf8(s)
                .map_err(|_| CheckpointError::Format("vocab entry not utf8".into()))?,
        );
    }
    Ok((tensors, vocab_entries))
}

pub fn save_params(path: &Path, params: &PolicyParams, vocab: &Vocab) -> Result<()> {
    let shapes = params.shapes();
    let views = params.flat_views();
    let tensors: Vec<(&str, &[f64], Vec<usize>)> = views
        .iter()
        .zip(&shapes)
        .map(|((name, data), (_, shape))| (*name, *data, shape.clone()))
        .collect();
    write_tensor_file(path, &tensors, vocab.entries())
}

pub fn load_params(path: &Path) -> Result<(PolicyParams, Vec<String>)> {
    let (tensors, vocab_entries) = read_tensor_file(path)?;
    let get = |name: &str| -> Result<&(String, Vec<f64>, Vec<usize>)> {
        tensors
            .iter()
            .find(|(n, _, _)| n == name)
            .ok_or_else(|| CheckpointError::Format(format!("missing tensor {name}")))
    };
    let embed = get("embed")?;
    let uz = get("uz")?;
    let cfg = ModelConfig {
        vocab: embed.2[0],
        embed: embed.2[1],
        hidden: uz.2[0],
    };
    let arr2 = |t: &(String, Vec<f64>, Vec<usize>)| {
        Array2::from_shape_vec((t.2[0], t.2[1]), t.1.clone())
            .map_err(|e| CheckpointError::Format(e.to_string()))
    };
    let arr1 = |t: &(String, Vec<f64>, Vec<usize>)| {
        Ok::<_, CheckpointError>(Array1::from_vec(t.1.clone()))
    };
    let params = PolicyParams {
        cfg,
        embed: arr2(embed)?,
        wz: arr2(get("wz")?)?,
        uz: arr2(uz)?,
        bz: arr1(get("bz")?)?,
        wh: arr2(get("wh")?)?,
        uh: arr2(get("uh")?)?,
        bh: arr1(get("bh")?)?,
        w_out: arr2(get("w_out")?)?,
        b_out: arr1(get("b_out")?)?,
        w_val: arr1(get("w_val")?)?,
        b_val: arr1(get("b_val")?)?,
    };
    Ok((params, vocab_entries))
}

pub fn save_adam(path: &Path, state: &AdamState, params: &PolicyParams) -> Result<()> {
    let shapes = params.shapes();
    let mut tensors: Vec<(String, &[f64], Vec<usize>)> = Vec::new();
    for (i, (name, _)) in params.flat_views().iter().enumerate() {
        tensors.push((format!("m.{name}"), &state.m[i], vec![state.m[i].len()]));
        tensors.push((format!("v.{name}"), &state.v[i], vec![state.v[i].len()]));
        let _ = &shapes;
    }
    let t_scalar = [state.t as f64];
    let mut all: Vec<(&str, &[f64], Vec<usize>)> = tensors
        .iter()
        .map(|(n, d, s)| (n.as_str(), *d, s.clone()))
        .collect();
    all.push(("t", &t_scalar, vec![1]));
    write_tensor_file(path, &all, &[])
}

pub fn load_adam(path: &Path, params: &PolicyParams) -> Result<AdamState> {
    let (tensors, _) = read_tensor_file(path)?;
    let get = |name: String| -> Result<Vec<f64>> {
        tensors
            .iter()
            .find(|(n, _, _)| *n == name)
            .map(|(_, d, _)| d.clone())
            .ok_or_else(|| CheckpointError::Format(format!("missing tensor {name}")))
    };
    let mut m = Vec::new();
    let mut v = Vec::new();
    for (name, data) in params.flat_views() {
        let mm = get(format!("m.{name}"))?;
        let vv = get(format!("v.{name}"))?;
        if mm.len() != data.len() || vv.len() != data.len() {
            return Err(CheckpointError::Format(format!(
                "adam moment size mismatch for {name}"
            )));
        }
        m.push(mm);
        v.push(vv);
    }
    let t = get("t".to_string())?[0] as u64;
    Ok(AdamState { m, v, t })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    /// Next update index to run (updates completed so far).
    pub update: u64,
    pub params_sha256: String,
}

/// Everything needed to resume a run.
pub struct Checkpoint {
    pub params: PolicyParams,
    pub ref_params: PolicyParams,
    pub adam: AdamState,
    pub curriculum: Vec<CurriculumState>,
    pub config: RunConfig,
    pub manifest: Manifest,
}

pub fn save_checkpoint(
    dir: &Path,
    params: &PolicyParams,
    ref_params: &PolicyParams,
    adam: &AdamState,
    curriculum: &[CurriculumState],
    config: &RunConfig,
    vocab: &Vocab,
    update: u64,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    save_params(&dir.join("params.bin"), params, vocab)?;
    save_params(&dir.join("ref_params.bin"), ref_params, vocab)?;
    save_adam(&dir.join("adam.bin"), adam, params)?;
    fs::write(
        dir.join("curriculum.json"),
        serde_json::to_string_pretty(curriculum)?,
    )?;
    fs::write(
        dir.join("config.json"),
        serde_json::to_string_pretty(config)?,
    )?;
    let manifest = Manifest {
        version: 1,
        seed: config.seed,
        update,
        params_sha256: params.content_hash(),
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let (params, _) = load_params(&dir.join("params.bin"))?;
    let (ref_params, _) = load_params(&dir.join("ref_params.bin"))?;
    let adam = load_adam(&dir.join("adam.bin"), &params)?;
    let curriculum: Vec<CurriculumState> =
        serde_json::from_str(&fs::read_to_string(dir.join("curriculum.json"))?)?;
    let config: RunConfig =
        serde_json::from_str(&fs::read_to_string(dir.join("config.json"))?)?;
    let manifest: Manifest =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    if manifest.params_sha256 != params.content_hash() {
        return Err(CheckpointError::Format(
            "params content hash does not match manifest".into(),
        ));
    }
    Ok(Checkpoint {
        params,
        ref_params,
        adam,
        curriculum,
        config,
        manifest,
    })
}

pub fn checkpoint_dir(out_dir: &Path) -> PathBuf {
    out_dir.join("checkpoint")
}
