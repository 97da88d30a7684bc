use proptest::prelude::*;

use scb_core::image::{load_dataset, read_image, write_image, BitDepth, Dataset, DeadLeaves, Image, Manifest, Shape};

fn quantized(x: &Image, depth: BitDepth) -> Vec<f64> {
    let m = depth.max_value();
    x.data().iter().map(|v| (v * m + 0.5).floor() / m).collect()
}

#[test]
fn png_and_pnm_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let ds = DeadLeaves { channels: 3, ..DeadLeaves::new(1, 9, 13, 4) }.generate().unwrap();
    let gray = DeadLeaves { channels: 1, ..DeadLeaves::new(1, 9, 13, 4) }.generate().unwrap();
    for x in [&ds.items()[0].1, &gray.items()[0].1] {
        for (ext, depth) in [("png", BitDepth::Eight), ("png", BitDepth::Sixteen), (if x.channels() == 1 { "pgm" } else { "ppm" }, BitDepth::Eight)] {
            let path = dir.path().join(format!("x{}.{ext}", x.channels()));
            write_image(x, &path, depth).unwrap();
            let y = read_image(&path).unwrap();
            assert_eq!(y.shape(), x.shape());
            let q = quantized(x, depth);
            let err = y.data().iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-12, "{ext} {depth:?}: {err}");
        }
    }
    let bad = Image::unbounded(Shape::new(1, 2, 2), vec![0.0, 1.5, 0.2, 0.3]).unwrap();
    assert!(write_image(&bad, dir.path().join("bad.png"), BitDepth::Eight).is_err());
    assert!(write_image(&ds.items()[0].1, dir.path().join("x.bmp"), BitDepth::Eight).is_err());
}

#[test]
fn directory_roundtrip_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let ds = DeadLeaves::new(4, 20, 18, 8).generate().unwrap();
    let manifest = ds.write_dir(dir.path(), BitDepth::Sixteen, None).unwrap();
    manifest.write(dir.path().join("manifest.json")).unwrap();
    let back = Manifest::read(dir.path().join("manifest.json")).unwrap();
    assert_eq!(back, manifest);
    back.verify(dir.path()).unwrap();

    let loaded = load_dataset(dir.path(), None).unwrap();
    assert_eq!(loaded.ids().collect::<Vec<_>>(), ds.ids().collect::<Vec<_>>());
    let cropped = load_dataset(dir.path(), Some((16, 10))).unwrap();
    assert_eq!(cropped.common_size(), Some((16, 10)));
    let direct = loaded.items()[1].1.center_crop(16, 10).unwrap();
    assert_eq!(cropped.items()[1].1, direct);
    assert!(load_dataset(dir.path(), Some((32, 32))).is_err());

    std::fs::write(dir.path().join("dl_002.png"), b"garbage").unwrap();
    assert!(back.verify(dir.path()).is_err());
    let err = load_dataset(dir.path(), None).unwrap_err().to_string();
    assert!(err.contains("dl_002"), "{err}");
}

#[test]
fn dataset_rejects_mismatched_or_duplicate_items() {
    let a = Image::filled(Shape::new(1, 4, 4), 0.1).unwrap();
    let b = Image::filled(Shape::new(1, 4, 5), 0.1).unwrap();
    assert!(Dataset::new("d", vec![("a".into(), a.clone()), ("a".into(), a.clone())]).is_err());
    let mixed = Dataset::new("d", vec![("a".into(), a), ("b".into(), b)]);
    if let Ok(ds) = mixed {
        assert!(ds.common_shape().is_err());
    }
    assert!(Image::new(1, 2, 2, vec![0.0, 0.1, 0.2, 1.1]).is_err());
}

proptest! {
    #[test]
    fn center_crop_picks_the_middle(h in 2usize..20, w in 2usize..20, ch in 2usize..20, cw in 2usize..20) {
        prop_assume!(ch <= h && cw <= w);
        let data: Vec<f64> = (0..3 * h * w).map(|k| k as f64 / (3 * h * w) as f64).collect();
        let x = Image::new(3, h, w, data).unwrap();
        let y = x.center_crop(ch, cw).unwrap();
        let (top, left) = ((h - ch) / 2, (w - cw) / 2);
        for c in 0..3 {
            for r in 0..ch {
                for q in 0..cw {
                    prop_assert_eq!(y.get(c, r, q), x.get(c, r + top, q + left));
                }
            }
        }
    }
}
