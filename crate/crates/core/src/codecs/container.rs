//! `SCBM1` binary persistence for linear codecs, plus a JSON sidecar.
//!
//! Layout (little-endian): magic `SCBM1`, `K H W r` as `u32`, `delta` as
//! `f64`, then `mu` (`D` values), `W1` (`r x D`) and `W2` (`D x r`) as `f64`,
//! then the two masks as bitsets (LSB first, padded to whole bytes).

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::LinearAECodec;
use crate::error::{Error, Result};
use crate::image::Shape;

pub const MAGIC: &[u8; 5] = b"SCBM1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub kind: String,
    pub shape: Shape,
    pub r: usize,
    pub delta: f64,
    pub sparsity: f64,
    pub sha256: String,
    #[serde(default)]
    pub trained_on: Option<String>,
    #[serde(default)]
    pub singular_values: Vec<f64>,
}

fn bitset(mask: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; mask.len().div_ceil(8)];
    for (i, &m) in mask.iter().enumerate() {
        if m {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

fn unbitset(bytes: &[u8], n: usize) -> Vec<bool> {
    (0..n).map(|i| bytes[i / 8] & (1 << (i % 8)) != 0).collect()
}

pub fn to_bytes(codec: &LinearAECodec) -> Vec<u8> {
    let shape = codec.shape();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for v in [shape.channels, shape.height, shape.width, codec.r()] {
        out.write_u32::<LittleEndian>(v as u32).unwrap();
    }
    out.write_f64::<LittleEndian>(codec.delta()).unwrap();
    for v in codec.mean().iter().chain(codec.w1()).chain(codec.w2()) {
        out.write_f64::<LittleEndian>(*v).unwrap();
    }
    let (m1, m2) = codec.masks();
    out.extend(bitset(m1));
    out.extend(bitset(m2));
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<LinearAECodec> {
    let truncated = |_| Error::Container("truncated codec container".into());
    let mut cur = Cursor::new(bytes);
    let mut magic = [0u8; 5];
    cur.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(Error::Container("bad magic; not an SCBM1 file".into()));
    }
    let mut dims = [0usize; 4];
    for d in dims.iter_mut() {
        *d = cur.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    }
    let [k, h, w, r] = dims;
    let shape = Shape::new(k, h, w);
    let d = shape.len();
    let delta = cur.read_f64::<LittleEndian>().map_err(truncated)?;
    let mut read_vec = |n: usize| -> Result<Vec<f64>> {
        let mut v = vec![0.0; n];
        cur.read_f64_into::<LittleEndian>(&mut v).map_err(truncated)?;
        Ok(v)
    };
    let mean = read_vec(d)?;
    let w1 = read_vec(r * d)?;
    let w2 = read_vec(r * d)?;
    let nbytes = (r * d).div_ceil(8);
    let pos = cur.position() as usize;
    if bytes.len() != pos + 2 * nbytes {
        return Err(Error::Container(format!(
            "expected {} bytes, found {}",
            pos + 2 * nbytes,
            bytes.len()
        )));
    }
    let m1 = unbitset(&bytes[pos..pos + nbytes], r * d);
    let m2 = unbitset(&bytes[pos + nbytes..], r * d);
    LinearAECodec::from_parts(shape, r, delta, mean, w1, w2, m1, m2)
}

/// Path of the JSON sidecar next to a container file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

/// Writes `path` and `path.json`.
pub fn save(codec: &LinearAECodec, path: impl AsRef<Path>, trained_on: Option<&str>) -> Result<Sidecar> {
    let path = path.as_ref();
    let bytes = to_bytes(codec);
    let sidecar = Sidecar {
        kind: "linear_ae".into(),
        shape: codec.shape(),
        r: codec.r(),
        delta: codec.delta(),
        sparsity: codec.sparsity(),
        sha256: crate::image::sha256_hex(&bytes),
        trained_on: trained_on.map(str::to_owned),
        singular_values: codec.singular_values().to_vec(),
    };
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&serde_json::to_value(&sidecar)?)?;
    fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))?;
    Ok(sidecar)
}

/// Reads a container, checking it against its sidecar when one exists.
pub fn load(path: impl AsRef<Path>) -> Result<LinearAECodec> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    if side.exists() {
        let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let meta: Sidecar = serde_json::from_str(&text)?;
        if meta.sha256 != crate::image::sha256_hex(&bytes) {
            return Err(Error::Container(format!("{} does not match its sidecar checksum", path.display())));
        }
    }
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codecs::{fit_linear_ae, prune_linear_ae, PruneSteps};
    use crate::image::{Dataset, Image};

    #[test]
    fn round_trip_preserves_everything() {
        let items = (0..6)
            .map(|k| {
                let data = (0..12).map(|i| (((i * 3 + k * 5) % 7) as f64) / 7.0).collect();
                (format!("{k}"), Image::new(3, 2, 2, data).unwrap())
            })
            .collect();
        let ds = Dataset::new("t", items).unwrap();
        let codec = fit_linear_ae(&ds, 3).unwrap().with_delta(0.01).unwrap();
        let (pruned, _) = prune_linear_ae(&codec, 0.3, PruneSteps::default(), None).unwrap();
        let back = from_bytes(&to_bytes(&pruned)).unwrap();
        assert_eq!(back.w1(), pruned.w1());
        assert_eq!(back.w2(), pruned.w2());
        assert_eq!(back.masks(), pruned.masks());
        assert_eq!(back.mean(), pruned.mean());
        assert_eq!(back.delta(), 0.01);

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.scbm");
        save(&pruned, &p, Some("t")).unwrap();
        assert_eq!(load(&p).unwrap().w1(), pruned.w1());
        let mut bytes = fs::read(&p).unwrap();
        bytes[20] ^= 1;
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(load(&p), Err(Error::Container(_))));
    }

    #[test]
    fn rejects_garbage() {
        assert!(from_bytes(b"SCBM0").is_err());
        assert!(from_bytes(b"SCBM1\x01\x00").is_err());
    }
}
