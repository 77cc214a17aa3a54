//! QPF1 binary field files.
//!
//! Layout: magic `QPF1`, little-endian u32 dim, u32 component count, one
//! u32 size per axis, then the values as little-endian f64, components
//! outermost and row-major over the axes. A JSON sidecar next to the file
//! (`<file>.json`) carries the grid box, the time stamp and provenance.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid, SampledField};

const MAGIC: &[u8; 4] = b"QPF1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub t: f64,
    pub origin: Vec<f64>,
    pub extent: Vec<f64>,
    #[serde(default)]
    pub provenance: serde_json::Value,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn encode(field: &SampledField) -> Vec<u8> {
    let mut buf = Vec::with_capacity(12 + 4 * field.grid.dim() + 8 * field.values.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(field.grid.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(field.components as u32).to_le_bytes());
    for &n in &field.grid.shape {
        buf.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for v in &field.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

/// Decodes the binary part onto a torus grid.
pub fn decode(bytes: &[u8]) -> Result<SampledField> {
    let mut r = bytes;
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| Error::Format("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut word = || -> Result<u32> {
        let mut b = [0u8; 4];
        r.read_exact(&mut b).map_err(|_| Error::Format("truncated header".into()))?;
        Ok(u32::from_le_bytes(b))
    };
    let d = word()? as usize;
    let c = word()? as usize;
    if d == 0 || d > 16 || c == 0 {
        return Err(Error::Format(format!("implausible header d={d} c={c}")));
    }
    let shape = (0..d).map(|_| word().map(|n| n as usize)).collect::<Result<Vec<_>>>()?;
    let n: usize = shape.iter().product::<usize>() * c;
    let header = 12 + 4 * d;
    let body = &bytes[header..];
    if body.len() != 8 * n {
        return Err(Error::Format(format!("expected {} value bytes, found {}", 8 * n, body.len())));
    }
    let values = body.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
    SampledField::new(Grid::torus(&shape), c, values)
}

pub fn write(path: &Path, field: &SampledField, t: f64, provenance: serde_json::Value) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(field))?;
    let side = Sidecar { t, origin: field.grid.origin.clone(), extent: field.grid.extent.clone(), provenance };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)? + "\n")?;
    Ok(())
}

/// Reads a field and its sidecar; a missing sidecar means a torus grid at t = 0.
pub fn read(path: &Path) -> Result<(SampledField, Option<Sidecar>)> {
    let mut field = decode(&fs::read(path)?)?;
    let side = sidecar_path(path);
    if !side.exists() {
        return Ok((field, None));
    }
    let meta: Sidecar = serde_json::from_str(&fs::read_to_string(side)?)?;
    if meta.origin.len() != field.grid.dim() || meta.extent.len() != field.grid.dim() {
        return Err(Error::Format("sidecar box does not match dimension".into()));
    }
    field.grid.origin = meta.origin.clone();
    field.grid.extent = meta.extent.clone();
    field.grid.validate()?;
    Ok((field, Some(meta)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_bytes() {
        let f = SampledField::new(Grid::torus(&[2, 3]), 2, (0..12).map(f64::from).collect()).unwrap();
        let b = encode(&f);
        assert_eq!(&b[..4], b"QPF1");
        assert_eq!(&b[4..8], &[2, 0, 0, 0]);
        assert_eq!(&b[8..12], &[2, 0, 0, 0]);
        assert_eq!(&b[12..16], &[2, 0, 0, 0]);
        assert_eq!(&b[16..20], &[3, 0, 0, 0]);
        assert_eq!(b.len(), 20 + 96);
        assert_eq!(&b[20 + 8..20 + 16], &1.0f64.to_le_bytes());
        assert_eq!(decode(&b).unwrap(), f);
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode(b"QPF2\0\0\0\0").is_err());
        let f = SampledField::zeros(Grid::torus(&[4]), 1);
        let mut b = encode(&f);
        b.pop();
        assert!(decode(&b).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = std::env::temp_dir().join(format!("qpf-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("box.qpf");
        let g = Grid::centered_box(3, 4, 0.5);
        let f = SampledField::from_fn(g, |x| x[0] - x[2]);
        write(&p, &f, 0.25, serde_json::json!({"source": "test"})).unwrap();
        let (back, meta) = read(&p).unwrap();
        assert_eq!(back, f);
        assert_eq!(meta.unwrap().t, 0.25);
        std::fs::remove_dir_all(&dir).ok();
    }
}
