//! Binary dataset artifact. Layout (all integers and floats little-endian):
//!
//! ```text
//! magic            8 bytes  "QBWINDS\0"
//! version          u32      1
//! N, T, F, W       4 x u64  samples, window_in, features, window_out
//! feature names    F x (u32 byte length, UTF-8 bytes)
//! feature scaler   F x (f64 x_min, f64 x_max)
//! target scaler    f64 x_min, f64 x_max
//! inputs           N*T*F x f64, row-major (sample, step, feature)
//! targets          N*W x f64, row-major
//! input end times  N x i64 (ms)
//! target times     N x i64 (ms)
//! ```

use std::io::{Read, Write};

use super::{MarketDataError, NormalizationParams, Result, Timestamp, WindowedDataset};

pub const DATASET_MAGIC: [u8; 8] = *b"QBWINDS\0";
pub const DATASET_VERSION: u32 = 1;

// Guards against allocating from a corrupt header.
const MAX_ELEMENTS: u64 = 1 << 32;

pub fn write_dataset<W: Write>(mut w: W, ds: &WindowedDataset) -> Result<()> {
    w.write_all(&DATASET_MAGIC)?;
    w.write_all(&DATASET_VERSION.to_le_bytes())?;
    for dim in [ds.num_samples, ds.window_in, ds.num_features, ds.window_out] {
        w.write_all(&(dim as u64).to_le_bytes())?;
    }
    for name in &ds.feature_names {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
    }
    for k in 0..ds.num_features {
        w.write_all(&ds.norm.x_min[k].to_le_bytes())?;
        w.write_all(&ds.norm.x_max[k].to_le_bytes())?;
    }
    w.write_all(&ds.target_norm.x_min[0].to_le_bytes())?;
    w.write_all(&ds.target_norm.x_max[0].to_le_bytes())?;
    for v in ds.inputs.iter().chain(&ds.targets) {
        w.write_all(&v.to_le_bytes())?;
    }
    for t in ds.input_end_times.iter().chain(&ds.target_times) {
        w.write_all(&t.millis().to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(mut r: R) -> Result<WindowedDataset> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if magic != DATASET_MAGIC {
        return Err(MarketDataError::InvalidArtifact("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != DATASET_VERSION {
        return Err(MarketDataError::InvalidArtifact(format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 4];
    for d in &mut dims {
        let v = u64::from_le_bytes(read_array(&mut r)?);
        if v > MAX_ELEMENTS {
            return Err(MarketDataError::InvalidArtifact(format!("dimension {v} too large")));
        }
        *d = v as usize;
    }
    let [n, t, f, wout] = dims;
    if (n as u64) * (t as u64) * (f as u64) > MAX_ELEMENTS {
        return Err(MarketDataError::InvalidArtifact("tensor too large".into()));
    }

    let mut feature_names = Vec::with_capacity(f);
    for _ in 0..f {
        let len = u32::from_le_bytes(read_array(&mut r)?) as usize;
        if len > 1024 {
            return Err(MarketDataError::InvalidArtifact("feature name too long".into()));
        }
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        feature_names.push(
            String::from_utf8(buf).map_err(|_| MarketDataError::InvalidArtifact("feature name not UTF-8".into()))?,
        );
    }
    let mut x_min = Vec::with_capacity(f);
    let mut x_max = Vec::with_capacity(f);
    for _ in 0..f {
        x_min.push(read_f64(&mut r)?);
        x_max.push(read_f64(&mut r)?);
    }
    let norm = NormalizationParams::new(x_min, x_max)?;
    let target_norm = NormalizationParams::new(vec![read_f64(&mut r)?], vec![read_f64(&mut r)?])?;

    let inputs = (0..n * t * f).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    let targets = (0..n * wout).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    let mut read_times = || {
        (0..n)
            .map(|_| read_array(&mut r).map(|b| Timestamp(i64::from_le_bytes(b))))
            .collect::<Result<Vec<_>>>()
    };
    let input_end_times = read_times()?;
    let target_times = read_times()?;

    Ok(WindowedDataset {
        num_samples: n,
        window_in: t,
        num_features: f,
        window_out: wout,
        inputs,
        targets,
        feature_names,
        norm,
        target_norm,
        input_end_times,
        target_times,
    })
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}
