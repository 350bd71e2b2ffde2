//! Named-tensor checkpoint files (magic `PSRM`).
//!
//! Layout, all little-endian:
//!
//! ```text
//!   magic   4 bytes  "PSRM"
//!   version u32      currently 1
//!   count   u32      number of tensors
//!   then per tensor:
//!     name_len u32, name bytes (UTF-8)
//!     rank     u32  (1 = vector, 2 = matrix)
//!     dims     u32 x rank   (rows, cols for matrices)
//!     data     f64 x prod(dims), column-major for matrices
//! ```
//!
//! Tensor names mirror the parameter structure (`observer.a`,
//! `observer.g.weight0`, `predictor.gru.w_update`, ...), so files are
//! self-describing and loading validates that exactly the expected tensors
//! are present with consistent shapes.  Writes are atomic (temporary file +
//! rename).

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::dataset::atomic_write;
use crate::error::{CoreError, Result};
use crate::model::{ModelParams, ObserverParams, PredictorParams};
use crate::nn::{GruParams, MlpParams};

/// File magic for checkpoints.
const CHECKPOINT_MAGIC: &[u8; 4] = b"PSRM";
/// Current checkpoint format version.
const CHECKPOINT_VERSION: u32 = 1;

/// A named tensor loaded from or destined for a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    /// Rank-1 tensor.
    Vector(DVector<f64>),
    /// Rank-2 tensor.
    Matrix(DMatrix<f64>),
}

impl TensorData {
    fn matrix(self, name: &str) -> Result<DMatrix<f64>> {
        match self {
            TensorData::Matrix(m) => Ok(m),
            TensorData::Vector(_) => Err(CoreError::MalformedFile {
                kind: "checkpoint",
                detail: format!("tensor {name} should be a matrix"),
            }),
        }
    }

    fn vector(self, name: &str) -> Result<DVector<f64>> {
        match self {
            TensorData::Vector(v) => Ok(v),
            TensorData::Matrix(_) => Err(CoreError::MalformedFile {
                kind: "checkpoint",
                detail: format!("tensor {name} should be a vector"),
            }),
        }
    }
}

/// Writes named tensors to `path`.
pub fn write_tensors(path: &Path, tensors: &[(String, TensorData)]) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, data) in tensors {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        match data {
            TensorData::Vector(v) => {
                buf.extend_from_slice(&1u32.to_le_bytes());
                buf.extend_from_slice(&(v.len() as u32).to_le_bytes());
                for e in v.iter() {
                    buf.extend_from_slice(&e.to_le_bytes());
                }
            }
            TensorData::Matrix(m) => {
                buf.extend_from_slice(&2u32.to_le_bytes());
                buf.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
                buf.extend_from_slice(&(m.ncols() as u32).to_le_bytes());
                // Column-major, matching the in-memory layout.
                for e in m.as_slice() {
                    buf.extend_from_slice(&e.to_le_bytes());
                }
            }
        }
    }
    atomic_write(path, &buf)
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| CoreError::MalformedFile {
        kind: "checkpoint",
        detail: format!("truncated while reading {what}"),
    })?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64_block(r: &mut impl Read, len: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; len * 8];
    r.read_exact(&mut bytes).map_err(|_| CoreError::MalformedFile {
        kind: "checkpoint",
        detail: format!("truncated while reading {len} f64 values"),
    })?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Reads every named tensor from `path`.
pub fn read_tensors(path: &Path) -> Result<BTreeMap<String, TensorData>> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic).map_err(|_| CoreError::MalformedFile {
        kind: "checkpoint",
        detail: "file shorter than header".into(),
    })?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(CoreError::MalformedFile {
            kind: "checkpoint",
            detail: format!("bad magic {magic:?}"),
        });
    }
    let version = read_u32(&mut f, "version")?;
    if version != CHECKPOINT_VERSION {
        return Err(CoreError::MalformedFile {
            kind: "checkpoint",
            detail: format!("unsupported version {version}"),
        });
    }
    let count = read_u32(&mut f, "tensor count")? as usize;
    let mut out = BTreeMap::new();
    for _ in 0..count {
        let name_len = read_u32(&mut f, "name length")? as usize;
        let mut name_bytes = vec![0u8; name_len];
        f.read_exact(&mut name_bytes)
            .map_err(|_| CoreError::MalformedFile {
                kind: "checkpoint",
                detail: "truncated tensor name".into(),
            })?;
        let name = String::from_utf8(name_bytes).map_err(|_| CoreError::MalformedFile {
            kind: "checkpoint",
            detail: "tensor name is not UTF-8".into(),
        })?;
        let rank = read_u32(&mut f, "rank")?;
        let data = match rank {
            1 => {
                let len = read_u32(&mut f, "vector length")? as usize;
                TensorData::Vector(DVector::from_vec(read_f64_block(&mut f, len)?))
            }
            2 => {
                let rows = read_u32(&mut f, "rows")? as usize;
                let cols = read_u32(&mut f, "cols")? as usize;
                TensorData::Matrix(DMatrix::from_vec(
                    rows,
                    cols,
                    read_f64_block(&mut f, rows * cols)?,
                ))
            }
            other => {
                return Err(CoreError::MalformedFile {
                    kind: "checkpoint",
                    detail: format!("unsupported tensor rank {other} for {name}"),
                })
            }
        };
        if out.insert(name.clone(), data).is_some() {
            return Err(CoreError::MalformedFile {
                kind: "checkpoint",
                detail: format!("duplicate tensor {name}"),
            });
        }
    }
    let mut rest = [0u8; 1];
    if f.read(&mut rest)? != 0 {
        return Err(CoreError::MalformedFile {
            kind: "checkpoint",
            detail: "trailing bytes after final tensor".into(),
        });
    }
    Ok(out)
}

fn mlp_entries(prefix: &str, mlp: &MlpParams, out: &mut Vec<(String, TensorData)>) {
    for (i, w) in mlp.weights.iter().enumerate() {
        out.push((format!("{prefix}.weight{i}"), TensorData::Matrix(w.clone())));
    }
    for (i, b) in mlp.biases.iter().enumerate() {
        out.push((format!("{prefix}.bias{i}"), TensorData::Vector(b.clone())));
    }
}

fn take(map: &mut BTreeMap<String, TensorData>, name: &str) -> Result<TensorData> {
    map.remove(name).ok_or_else(|| CoreError::MalformedFile {
        kind: "checkpoint",
        detail: format!("missing tensor {name}"),
    })
}

fn take_mlp(map: &mut BTreeMap<String, TensorData>, prefix: &str) -> Result<MlpParams> {
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    let mut i = 0;
    while map.contains_key(&format!("{prefix}.weight{i}")) {
        weights.push(take(map, &format!("{prefix}.weight{i}"))?.matrix(prefix)?);
        biases.push(take(map, &format!("{prefix}.bias{i}"))?.vector(prefix)?);
        i += 1;
    }
    if weights.is_empty() {
        return Err(CoreError::MalformedFile {
            kind: "checkpoint",
            detail: format!("no layers found under {prefix}"),
        });
    }
    Ok(MlpParams { weights, biases })
}

/// All named tensors of a model, in serialization order.
pub fn model_tensors(model: &ModelParams) -> Vec<(String, TensorData)> {
    let mut out = vec![
        ("observer.a".into(), TensorData::Matrix(model.observer.a.clone())),
        ("observer.k".into(), TensorData::Matrix(model.observer.k.clone())),
        (
            "observer.c_y".into(),
            TensorData::Matrix(model.observer.c_y.clone()),
        ),
    ];
    mlp_entries("observer.g", &model.observer.g, &mut out);
    let gru = &model.predictor.gru;
    for (name, m) in [
        ("w_update", &gru.w_update),
        ("u_update", &gru.u_update),
        ("w_reset", &gru.w_reset),
        ("u_reset", &gru.u_reset),
        ("w_cand", &gru.w_cand),
        ("u_cand", &gru.u_cand),
    ] {
        out.push((
            format!("predictor.gru.{name}"),
            TensorData::Matrix(m.clone()),
        ));
    }
    for (name, v) in [
        ("b_update", &gru.b_update),
        ("b_reset", &gru.b_reset),
        ("b_cand_input", &gru.b_cand_input),
        ("b_cand_hidden", &gru.b_cand_hidden),
    ] {
        out.push((
            format!("predictor.gru.{name}"),
            TensorData::Vector(v.clone()),
        ));
    }
    out.push((
        "predictor.c_u".into(),
        TensorData::Matrix(model.predictor.c_u.clone()),
    ));
    out
}

/// Saves a full model checkpoint.
pub fn save_model(path: &Path, model: &ModelParams) -> Result<()> {
    model.validate()?;
    write_tensors(path, &model_tensors(model))
}

/// Loads a model checkpoint, validating structure and shapes.
pub fn load_model(path: &Path) -> Result<ModelParams> {
    let mut map = read_tensors(path)?;
    let observer = ObserverParams {
        a: take(&mut map, "observer.a")?.matrix("observer.a")?,
        k: take(&mut map, "observer.k")?.matrix("observer.k")?,
        c_y: take(&mut map, "observer.c_y")?.matrix("observer.c_y")?,
        g: take_mlp(&mut map, "observer.g")?,
    };
    let gru = GruParams {
        w_update: take(&mut map, "predictor.gru.w_update")?.matrix("w_update")?,
        u_update: take(&mut map, "predictor.gru.u_update")?.matrix("u_update")?,
        b_update: take(&mut map, "predictor.gru.b_update")?.vector("b_update")?,
        w_reset: take(&mut map, "predictor.gru.w_reset")?.matrix("w_reset")?,
        u_reset: take(&mut map, "predictor.gru.u_reset")?.matrix("u_reset")?,
        b_reset: take(&mut map, "predictor.gru.b_reset")?.vector("b_reset")?,
        w_cand: take(&mut map, "predictor.gru.w_cand")?.matrix("w_cand")?,
        u_cand: take(&mut map, "predictor.gru.u_cand")?.matrix("u_cand")?,
        b_cand_input: take(&mut map, "predictor.gru.b_cand_input")?.vector("b_cand_input")?,
        b_cand_hidden: take(&mut map, "predictor.gru.b_cand_hidden")?.vector("b_cand_hidden")?,
    };
    let predictor = PredictorParams {
        gru,
        c_u: take(&mut map, "predictor.c_u")?.matrix("predictor.c_u")?,
    };
    if let Some(extra) = map.keys().next() {
        return Err(CoreError::MalformedFile {
            kind: "checkpoint",
            detail: format!("unexpected tensor {extra}"),
        });
    }
    let model = ModelParams {
        observer,
        predictor,
    };
    model.validate()?;
    Ok(model)
}

/// Saves a standalone network (used for the occupancy decoder).
pub fn save_mlp(path: &Path, mlp: &MlpParams) -> Result<()> {
    let mut out = Vec::new();
    mlp_entries("mlp", mlp, &mut out);
    write_tensors(path, &out)
}

/// Loads a standalone network saved by [`save_mlp`].
pub fn load_mlp(path: &Path) -> Result<MlpParams> {
    let mut map = read_tensors(path)?;
    let mlp = take_mlp(&mut map, "mlp")?;
    if let Some(extra) = map.keys().next() {
        return Err(CoreError::MalformedFile {
            kind: "checkpoint",
            detail: format!("unexpected tensor {extra}"),
        });
    }
    Ok(mlp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_model(seed: u64) -> ModelParams {
        let cfg = ModelConfig {
            state_dim: 12,
            g_hidden: vec![10, 10],
        };
        ModelParams::init(&cfg, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn model_round_trips_bit_exactly() {
        let model = small_model(0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.psrm");
        save_model(&path, &model).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn missing_tensor_is_detected() {
        let model = small_model(1);
        let mut tensors = model_tensors(&model);
        tensors.retain(|(name, _)| name != "observer.k");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.psrm");
        write_tensors(&path, &tensors).unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(err.to_string().contains("observer.k"), "{err}");
    }

    #[test]
    fn extra_tensor_is_detected() {
        let model = small_model(2);
        let mut tensors = model_tensors(&model);
        tensors.push(("mystery".into(), TensorData::Vector(DVector::zeros(3))));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.psrm");
        write_tensors(&path, &tensors).unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(err.to_string().contains("mystery"), "{err}");
    }

    #[test]
    fn shape_corruption_is_detected() {
        let model = small_model(3);
        let mut tensors = model_tensors(&model);
        for (name, data) in tensors.iter_mut() {
            if name == "observer.k" {
                *data = TensorData::Matrix(DMatrix::zeros(12, 13));
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.psrm");
        write_tensors(&path, &tensors).unwrap();
        assert!(load_model(&path).is_err());
    }

    #[test]
    fn bad_magic_and_truncation_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.psrm");
        std::fs::write(&path, b"NOPE\x01\x00\x00\x00\x00\x00\x00\x00").unwrap();
        assert!(read_tensors(&path).is_err());

        let model = small_model(4);
        save_model(&path, &model).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(read_tensors(&path).is_err());
    }

    #[test]
    fn standalone_mlp_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mlp = MlpParams::init(12, &[64, 128], 30, 1.0, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.psrm");
        save_mlp(&path, &mlp).unwrap();
        assert_eq!(load_mlp(&path).unwrap(), mlp);
    }

    #[test]
    fn duplicate_tensor_names_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup.psrm");
        let v = TensorData::Vector(DVector::zeros(2));
        write_tensors(&path, &[("x".into(), v.clone()), ("x".into(), v)]).unwrap();
        assert!(read_tensors(&path).is_err());
    }
}
