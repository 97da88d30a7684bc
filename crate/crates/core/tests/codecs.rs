mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Normal};

use scb_core::codecs::entropy::{decode_symbols, encode_symbols, shannon_bits};
use scb_core::codecs::{
    container, dct_matrix, fit_linear_ae, gmp_schedule, prune_linear_ae, BlockDctCodec, Codec, IdentityCodec,
    LinearAECodec, PruneSteps,
};
use scb_core::harness::{psnr_from_mse, PSNR_CAP};
use scb_core::image::{Dataset, Image, Shape};

#[test]
fn linear_ae_matches_eigen_oracle() {
    // One case on each side of N = D, so both fitting routes are covered.
    for (shape, n) in [(Shape::new(1, 8, 8), 300), (Shape::new(1, 6, 6), 20), (Shape::new(3, 4, 4), 120)] {
        let ds = common::anisotropic(shape, n, 9);
        for r in [1, 3, 8] {
            let codec = fit_linear_ae(&ds, r).unwrap();
            let p = codec.projection();
            let q = common::oracle_projector(&ds, r);
            // For equal-rank orthogonal projectors, ||P - Q||_2 = sin(largest principal angle).
            let angle = common::spectral_norm(&(&p - &q)).min(1.0).asin();
            assert!(angle < 1e-6, "{shape} n={n} r={r}: angle {angle}");
            let idem = (&p * &p - &p).abs().max();
            let sym = (&p - p.transpose()).abs().max();
            assert!(idem < 1e-8 && sym < 1e-8, "idempotence {idem}, symmetry {sym}");
        }
    }
}

fn natural_like(n: usize, seed: u64) -> Dataset {
    scb_core::image::DeadLeaves::new(n, 16, 16, seed).generate().unwrap()
}

fn mean_psnr(codec: &dyn Codec, ds: &Dataset) -> (f64, f64) {
    let mut mse = 0.0;
    let mut bits = 0.0;
    for x in ds.images() {
        let (y, blob) = codec.roundtrip(x).unwrap();
        mse += x.mse(&y).unwrap();
        bits += blob.bpp();
    }
    (psnr_from_mse(mse / ds.len() as f64, PSNR_CAP), bits / ds.len() as f64)
}

#[test]
fn linear_ae_rate_distortion_is_monotone() {
    let ds = natural_like(60, 2);
    let mut last = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for r in [2, 8, 16, 32] {
        let codec = fit_linear_ae(&ds, r).unwrap().with_delta(1e-4).unwrap();
        let (p, b) = mean_psnr(&codec, &ds);
        assert!(p > last.0 && b > last.1, "r={r}: psnr {p} bpp {b} after {last:?}");
        last = (p, b);
    }
    let base = fit_linear_ae(&ds, 16).unwrap();
    let mut last = (f64::INFINITY, f64::INFINITY);
    for delta in [1e-3, 4e-3, 1.6e-2, 6.4e-2] {
        let (p, b) = mean_psnr(&base.clone().with_delta(delta).unwrap(), &ds);
        assert!(p < last.0 && b < last.1, "delta={delta}: psnr {p} bpp {b} after {last:?}");
        last = (p, b);
    }
}

#[test]
fn block_dct_rate_distortion_is_monotone() {
    let ds = natural_like(6, 3);
    let mut last = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for q in [5, 10, 25, 50, 75, 90, 100] {
        let (p, b) = mean_psnr(&BlockDctCodec::new(q).unwrap(), &ds);
        assert!(p > last.0 && b > last.1, "q={q}: psnr {p} bpp {b} after {last:?}");
        last = (p, b);
    }
}

#[test]
fn dct_basis_is_orthonormal() {
    for b in [2, 4, 8, 16] {
        let m = DMatrix::from_row_slice(b, b, &dct_matrix(b));
        let err = (&m * m.transpose() - DMatrix::identity(b, b)).abs().max();
        assert!(err < 1e-12, "{b}: {err}");
    }
    let codec = BlockDctCodec::new(50).unwrap();
    let block: Vec<f64> = (0..64).map(|k| (k as f64 * 0.37).sin()).collect();
    let back = codec.inverse(&codec.forward(&block));
    assert!(block.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-12));
}

#[test]
fn identity_codec_bit_accounting() {
    let img = Image::filled(Shape::new(3, 8, 4), 0.25).unwrap();
    let (out, blob) = IdentityCodec.roundtrip(&img).unwrap();
    assert_eq!(out, img);
    assert_eq!(blob.bpp_entropy(), 24.0);
}

fn geometric_stream(n: usize, p: f64, seed: u64) -> Vec<i64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Geometric::new(p).unwrap();
    (0..n).map(|_| g.sample(&mut rng) as i64 * if rng.random() { 1 } else { -1 }).collect()
}

#[test]
fn range_coder_close_to_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let gauss = Normal::new(0.0, 6.0).unwrap();
    let streams: Vec<(&str, Vec<i64>)> = vec![
        ("geometric 0.3", geometric_stream(4096, 0.3, 1)),
        ("geometric 0.05", geometric_stream(20000, 0.05, 2)),
        ("gaussian", (0..8192).map(|_| Distribution::<f64>::sample(&gauss, &mut rng).round() as i64).collect()),
        ("uniform 16", (0..5000).map(|_| rng.random_range(0..16)).collect()),
        ("skewed binary", (0..10000).map(|_| i64::from(rng.random_bool(0.1))).collect()),
    ];
    for (name, s) in streams {
        let enc = encode_symbols(&s);
        let h = shannon_bits(&s);
        let bits = enc.bits() as f64;
        assert!(bits <= 1.05 * h, "{name}: {bits} bits vs entropy {h}");
        assert_eq!(decode_symbols(&enc, s.len()).unwrap(), s);
    }
}

proptest! {
    #[test]
    fn range_coder_roundtrips(s in prop::collection::vec(-300i64..300, 0..600)) {
        let enc = encode_symbols(&s);
        prop_assert_eq!(decode_symbols(&enc, s.len()).unwrap(), s);
    }

    #[test]
    fn range_coder_roundtrips_wide(s in prop::collection::vec(any::<i32>().prop_map(i64::from), 1..50)) {
        let enc = encode_symbols(&s);
        prop_assert_eq!(decode_symbols(&enc, s.len()).unwrap(), s);
    }
}

#[test]
fn gmp_schedule_values() {
    assert_eq!(gmp_schedule(0.1, 0.8, 5, 2, 4, 5).unwrap(), 0.1);
    assert_eq!(gmp_schedule(0.1, 0.8, 5, 2, 4, 13).unwrap(), 0.8);
    assert!((gmp_schedule(0.0, 0.8, 0, 1, 2, 1).unwrap() - 0.7).abs() < 1e-15);
    assert!(gmp_schedule(0.0, 0.8, 0, 1, 2, 3).is_err());
    assert!(gmp_schedule(0.0, 0.8, 0, 2, 2, 1).is_err());
    assert!(gmp_schedule(0.5, 0.2, 0, 1, 2, 1).is_err());
    assert!(gmp_schedule(0.0, 1.0, 0, 1, 2, 1).is_err());
}

fn zeros(c: &LinearAECodec) -> usize {
    c.w1().iter().chain(c.w2()).filter(|&&w| w == 0.0).count()
}

#[test]
fn pruning_tracks_schedule() {
    let ds = natural_like(40, 4);
    let codec = fit_linear_ae(&ds, 12).unwrap();
    let steps = PruneSteps { t0: 0, dt: 1, n: 8 };
    for refit in [None, Some(&ds)] {
        let (pruned, audit) = prune_linear_ae(&codec, 0.8, steps, refit).unwrap();
        assert_eq!(audit.len(), 9);
        for step in &audit {
            let s = gmp_schedule(0.0, 0.8, 0, 1, 8, step.t).unwrap();
            assert!((step.scheduled - s).abs() < 1e-15);
            let wanted = s * step.total as f64;
            assert!((step.zeros as f64 - wanted).abs() <= 1.0, "t={}: {} vs {wanted}", step.t, step.zeros);
        }
        let last = audit.last().unwrap();
        assert_eq!(zeros(&pruned), last.zeros);
        assert!(pruned.is_pruned());
        assert!((pruned.sparsity() - 0.8).abs() <= 1.0 / last.total as f64);
        let (dense, _) = mean_psnr(&codec, &ds);
        let (sparse, _) = mean_psnr(&pruned, &ds);
        assert!(sparse < dense);
    }
}

#[test]
fn container_roundtrip() {
    let ds = natural_like(10, 6);
    let codec = fit_linear_ae(&ds, 5).unwrap().with_delta(0.01).unwrap();
    let (codec, _) = prune_linear_ae(&codec, 0.3, PruneSteps::default(), None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.scbm");
    let side = container::save(&codec, &path, Some("demo")).unwrap();
    assert_eq!(side.r, 5);
    assert_eq!(side.trained_on.as_deref(), Some("demo"));
    let back = container::load(&path).unwrap();
    assert_eq!(container::to_bytes(&back), container::to_bytes(&codec));
    let x = &ds.items()[0].1;
    assert_eq!(back.roundtrip(x).unwrap().0, codec.roundtrip(x).unwrap().0);

    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] ^= 0xff;
    assert!(container::from_bytes(&bytes).is_err());
    let bytes = container::to_bytes(&codec);
    assert!(container::from_bytes(&bytes[..bytes.len() - 3]).is_err());
}
