use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{read_image, write_image, BitDepth, Image, Shape};
use crate::error::{Error, Result};

const IMAGE_EXTENSIONS: &[&str] = &["png", "ppm", "pgm", "pnm"];

/// An ordered, id-unique collection of images sharing a channel count.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    items: Vec<(String, Image)>,
    sources: Vec<Option<String>>,
    common_size: Option<(usize, usize)>,
}

impl Dataset {
    /// Builds a dataset, sorting items lexicographically by id.
    pub fn new(name: impl Into<String>, items: Vec<(String, Image)>) -> Result<Self> {
        let n = items.len();
        Self::with_sources(name.into(), items, vec![None; n])
    }

    fn with_sources(
        name: String,
        items: Vec<(String, Image)>,
        sources: Vec<Option<String>>,
    ) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Dataset(format!("dataset `{name}` is empty")));
        }
        let mut paired: Vec<_> = items.into_iter().zip(sources).collect();
        paired.sort_by(|a, b| a.0 .0.cmp(&b.0 .0));
        let mut seen = BTreeSet::new();
        for ((id, _), _) in &paired {
            if !seen.insert(id.as_str()) {
                return Err(Error::Dataset(format!("duplicate item id `{id}`")));
            }
        }
        let k = paired[0].0 .1.channels();
        if let Some(((id, img), _)) = paired.iter().find(|((_, img), _)| img.channels() != k) {
            return Err(Error::Item {
                id: id.clone(),
                reason: format!("has {} channels, dataset has {k}", img.channels()),
            });
        }
        let first = (paired[0].0 .1.height(), paired[0].0 .1.width());
        let common_size = paired
            .iter()
            .all(|((_, img), _)| (img.height(), img.width()) == first)
            .then_some(first);
        let (items, sources) = paired.into_iter().unzip();
        Ok(Dataset {
            name,
            items,
            sources,
            common_size,
        })
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[(String, Image)] {
        &self.items
    }

    pub fn images(&self) -> impl Iterator<Item = &Image> {
        self.items.iter().map(|(_, img)| img)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|(id, _)| id.as_str())
    }

    pub fn channels(&self) -> usize {
        self.items[0].1.channels()
    }

    pub fn common_size(&self) -> Option<(usize, usize)> {
        self.common_size
    }

    /// The shared image shape, or an error naming the first odd item.
    pub fn common_shape(&self) -> Result<Shape> {
        let expected = self.items[0].1.shape();
        for (id, img) in &self.items {
            if img.shape() != expected {
                return Err(Error::ShapeMismatch {
                    id: id.clone(),
                    expected: expected.to_string(),
                    actual: img.shape().to_string(),
                });
            }
        }
        Ok(expected)
    }

    /// Same ids and order, new images. `f` receives the ordinal and the item.
    pub fn map_images<F>(&self, name: impl Into<String>, f: F) -> Result<Dataset>
    where
        F: Fn(usize, &str, &Image) -> Result<Image> + Sync,
    {
        let mapped: Vec<(String, Image)> = self
            .items
            .par_iter()
            .enumerate()
            .map(|(k, (id, img))| f(k, id, img).map(|out| (id.clone(), out)).map_err(|e| e.for_item(id)))
            .collect::<Result<_>>()?;
        Self::with_sources(name.into(), mapped, vec![None; self.len()])
    }

    /// Digest of ids and pixel data in dataset order.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (id, img) in &self.items {
            h.update(id.as_bytes());
            h.update([0]);
            h.update(img.digest().as_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Writes every item as `<id>.png` into `dir` and returns the manifest.
    pub fn write_dir(
        &self,
        dir: impl AsRef<Path>,
        depth: BitDepth,
        provenance: Option<&Provenance>,
    ) -> Result<Manifest> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let items = self
            .items
            .par_iter()
            .map(|(id, img)| {
                let rel = format!("{id}.png");
                let path = dir.join(&rel);
                write_image(img, &path, depth).map_err(|e| e.for_item(id))?;
                let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
                Ok(ManifestItem::new(id, rel, Some(&bytes), img, provenance))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Manifest {
            name: self.name.clone(),
            source: dir.display().to_string(),
            crop: None,
            items,
        })
    }

    /// Manifest of an in-memory dataset: pixel digests only, paths as they
    /// would be written by [`Dataset::write_dir`].
    pub fn manifest(&self, provenance: Option<&Provenance>) -> Manifest {
        Manifest {
            name: self.name.clone(),
            source: String::new(),
            crop: None,
            items: self
                .items
                .iter()
                .map(|(id, img)| ManifestItem::new(id, format!("{id}.png"), None, img, provenance))
                .collect(),
        }
    }

    /// Manifest describing the files this dataset was loaded from.
    pub fn manifest_from_source(&self, dir: impl AsRef<Path>, crop: Option<(usize, usize)>) -> Result<Manifest> {
        let dir = dir.as_ref();
        let items = self
            .items
            .iter()
            .zip(&self.sources)
            .map(|((id, img), src)| {
                let rel = src.clone().ok_or_else(|| Error::Item {
                    id: id.clone(),
                    reason: "item was not loaded from disk".into(),
                })?;
                let path = dir.join(&rel);
                let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
                Ok(ManifestItem::new(id, rel, Some(&bytes), img, None))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Manifest {
            name: self.name.clone(),
            source: dir.display().to_string(),
            crop,
            items,
        })
    }
}

/// Loads every PNG/PPM/PGM in `directory`, ordered by id (the file stem).
///
/// With `crop`, every image is centre-cropped to `(h, w)`; smaller images are
/// rejected with an item-level error.
pub fn load_dataset(directory: impl AsRef<Path>, crop: Option<(usize, usize)>) -> Result<Dataset> {
    let dir = directory.as_ref();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if path.is_file() && ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            files.push(path);
        }
    }
    if files.is_empty() {
        return Err(Error::Dataset(format!(
            "no PNG/PPM/PGM images in {}",
            dir.display()
        )));
    }
    files.sort();
    let loaded: Vec<(String, Image, String)> = files
        .par_iter()
        .map(|path| {
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            let image = read_image(path).map_err(|e| e.for_item(&id))?;
            let image = match crop {
                Some((h, w)) if image.height() < h || image.width() < w => {
                    return Err(Error::Item {
                        id,
                        reason: format!(
                            "image smaller than crop: {}x{} < {h}x{w}",
                            image.height(),
                            image.width()
                        ),
                    })
                }
                Some((h, w)) => image.center_crop(h, w)?,
                None => image,
            };
            let rel = path.file_name().unwrap().to_string_lossy().into_owned();
            Ok((id, image, rel))
        })
        .collect::<Result<_>>()?;
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let (items, sources) = loaded
        .into_iter()
        .map(|(id, img, rel)| ((id, img), Some(rel)))
        .unzip();
    Dataset::with_sources(name, items, sources)
}

/// Where a corrupted dataset came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub corruption: String,
    pub severity: u8,
    pub seed: u64,
}

/// JSON description of a dataset directory. Keys serialize sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub crop: Option<(usize, usize)>,
    pub items: Vec<ManifestItem>,
    pub name: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestItem {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corruption: Option<String>,
    pub h: usize,
    pub id: String,
    pub k: usize,
    pub path: String,
    /// Digest of the decoded samples (see [`Image::digest`]).
    pub pixels: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<u8>,
    /// Checksum of the file at `path`; absent for in-memory datasets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
    pub w: usize,
}

impl ManifestItem {
    fn new(id: &str, path: String, bytes: Option<&[u8]>, image: &Image, prov: Option<&Provenance>) -> Self {
        let shape = image.shape();
        ManifestItem {
            corruption: prov.map(|p| p.corruption.clone()),
            h: shape.height,
            id: id.to_string(),
            k: shape.channels,
            path,
            pixels: image.digest(),
            seed: prov.map(|p| p.seed),
            severity: prov.map(|p| p.severity),
            sha256: bytes.map(sha256_hex),
            w: shape.width,
        }
    }
}

impl Manifest {
    /// UTF-8 JSON with lexicographically sorted keys.
    pub fn to_json(&self) -> Result<String> {
        // serde_json's Map is a BTreeMap, so a round trip through Value sorts keys.
        let value = serde_json::to_value(self)?;
        let mut s = serde_json::to_string_pretty(&value)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks that every listed file exists under `root` and matches its checksum.
    pub fn verify(&self, root: impl AsRef<Path>) -> Result<()> {
        let root = root.as_ref();
        for item in &self.items {
            let path = root.join(&item.path);
            let bytes = fs::read(&path).map_err(|e| Error::Item {
                id: item.id.clone(),
                reason: format!("missing file {}: {e}", path.display()),
            })?;
            if item.sha256.as_deref() != Some(sha256_hex(&bytes).as_str()) {
                return Err(Error::Item {
                    id: item.id.clone(),
                    reason: "checksum mismatch".into(),
                });
            }
        }
        Ok(())
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::ValueRange;

    fn gradient(h: usize, w: usize, k: usize, phase: f64) -> Image {
        let shape = Shape::new(k, h, w);
        let data = (0..shape.len())
            .map(|i| (i as f64 * 0.37 + phase).sin() * 0.5 + 0.5)
            .collect();
        Image::with_range(shape, data, ValueRange::Unit).unwrap()
    }

    fn write_set(dir: &Path, sizes: &[(usize, usize)]) {
        for (n, &(h, w)) in sizes.iter().enumerate() {
            let img = gradient(h, w, 3, n as f64);
            write_image(&img, dir.join(format!("img{n}.png")), BitDepth::Eight).unwrap();
        }
    }

    #[test]
    fn loads_and_crops_in_id_order() {
        let dir = tempfile::tempdir().unwrap();
        write_set(dir.path(), &[(256, 256), (256, 256), (256, 256)]);
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let ds = load_dataset(dir.path(), Some((128, 128))).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.ids().collect::<Vec<_>>(), ["img0", "img1", "img2"]);
        assert_eq!(ds.common_size(), Some((128, 128)));
        assert!(ds.images().all(|i| i.shape() == Shape::new(3, 128, 128)));
    }

    #[test]
    fn undersized_image_is_an_item_error() {
        let dir = tempfile::tempdir().unwrap();
        write_set(dir.path(), &[(100, 100)]);
        let err = load_dataset(dir.path(), Some((128, 128))).unwrap_err();
        match err {
            Error::Item { id, reason } => {
                assert_eq!(id, "img0");
                assert!(reason.contains("image smaller than crop"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_directory_and_unreadable_file() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_dataset(dir.path(), None), Err(Error::Dataset(_))));
        fs::write(dir.path().join("broken.png"), b"not a png").unwrap();
        match load_dataset(dir.path(), None) {
            Err(Error::Item { id, .. }) => assert_eq!(id, "broken"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn repeated_loads_are_identical() {
        let dir = tempfile::tempdir().unwrap();
        write_set(dir.path(), &[(40, 30), (40, 30), (50, 30), (40, 44)]);
        let a = load_dataset(dir.path(), None).unwrap();
        let b = load_dataset(dir.path(), None).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.common_size(), None);
        assert!(a.common_shape().is_err());
    }

    #[test]
    fn manifest_keys_are_sorted_and_checksums_verify() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset::new(
            "t",
            vec![("b".into(), gradient(4, 4, 1, 0.0)), ("a".into(), gradient(4, 4, 1, 1.0))],
        )
        .unwrap();
        let prov = Provenance {
            corruption: "gaussian_noise".into(),
            severity: 2,
            seed: 9,
        };
        let m = ds.write_dir(dir.path(), BitDepth::Eight, Some(&prov)).unwrap();
        m.verify(dir.path()).unwrap();
        let json = m.to_json().unwrap();
        let keys = ["\"crop\"", "\"items\"", "\"name\"", "\"source\""];
        let pos: Vec<usize> = keys.iter().map(|k| json.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        let item_keys = ["corruption", "h", "id", "k", "path", "pixels", "seed", "severity", "sha256", "w"];
        let first = &json[json.find('{').unwrap() + 1..];
        let first_item = &first[first.find('{').unwrap()..first.find('}').unwrap()];
        let pos: Vec<usize> = item_keys
            .iter()
            .map(|k| first_item.find(&format!("\"{k}\"")).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{first_item}");
        assert_eq!(Manifest::from_json(&json).unwrap(), m);

        fs::write(dir.path().join("a.png"), b"tampered").unwrap();
        assert!(m.verify(dir.path()).is_err());
    }

    #[test]
    fn duplicate_ids_and_mixed_channels_rejected() {
        let a = gradient(4, 4, 1, 0.0);
        let c = gradient(4, 4, 3, 0.0);
        assert!(Dataset::new("d", vec![("x".into(), a.clone()), ("x".into(), a.clone())]).is_err());
        assert!(Dataset::new("d", vec![("x".into(), a), ("y".into(), c)]).is_err());
    }
}
