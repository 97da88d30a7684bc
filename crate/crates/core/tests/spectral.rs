mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scb_core::image::{Image, Shape};
use scb_core::spectral::fft::{
    centered_to_offset, fftshift, ifftshift, offset_to_centered, offset_to_raw, raw_to_offset,
};
use scb_core::spectral::{
    classify_band, dft2, idft2, mean_psd, psd, radial_profile, triangle_audit, Band, Spectrum, SpectrumTag,
};

fn random_plane(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn fft_matches_naive_dft() {
    let sizes = [2, 3, 4, 8, 16];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for &h in &sizes {
        for &w in &sizes {
            let x = random_plane(&mut rng, h * w);
            let fast = dft2(&x, h, w).unwrap();
            let slow = common::naive_dft(&x, h, w);
            let err = fast.iter().zip(&slow).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-6, "{h}x{w}: {err}");

            let energy: f64 = x.iter().map(|v| v * v).sum();
            let spectral: f64 = fast.iter().map(|z| z.norm_sqr()).sum::<f64>() / (h * w) as f64;
            assert!((energy - spectral).abs() <= 1e-6 * energy, "{h}x{w} Parseval");

            let back = idft2(&fast, h, w).unwrap();
            let err = back.iter().zip(&x).map(|(z, v)| (z - v).norm()).fold(0.0, f64::max);
            assert!(err < 1e-9, "{h}x{w} inverse");
        }
    }
}

#[test]
fn degenerate_dims_rejected() {
    assert!(dft2(&[1.0], 1, 1).is_err());
    assert!(dft2(&[1.0; 6], 2, 2).is_err());
}

#[test]
fn shift_index_maps() {
    for n in [2usize, 3, 4, 5, 8, 9] {
        let offsets: Vec<isize> = (0..n).map(|c| centered_to_offset(c, n)).collect();
        assert_eq!(offsets.first().copied(), Some(-((n / 2) as isize)));
        assert_eq!(offsets.last().copied(), Some(((n - 1) / 2) as isize));
        for u in 0..n {
            let i = raw_to_offset(u, n);
            assert_eq!(offset_to_raw(i, n), u);
            assert_eq!(centered_to_offset(offset_to_centered(i, n), n), i);
        }
    }
    let plane: Vec<usize> = (0..12).collect();
    assert_eq!(ifftshift(&fftshift(&plane, 3, 4), 3, 4), plane);
    // DC lands at (floor(H/2), floor(W/2)).
    assert_eq!(fftshift(&plane, 3, 4)[4 + 2], 0);
}

#[test]
fn psd_of_constant_is_dc_only() {
    let img = Image::filled(Shape::new(3, 6, 5), 0.5).unwrap();
    let s = psd(&img).unwrap();
    assert!(s.centered());
    let dc = s.at_offset(0, 0);
    assert!((dc - 0.5 * 30.0).abs() < 1e-12);
    assert!((s.sum() - dc).abs() < 1e-9);
}

#[test]
fn radial_profile_conserves_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let vals = random_plane(&mut rng, 17 * 12).into_iter().map(f64::abs).collect();
    let s = Spectrum::new(17, 12, vals, SpectrumTag::RawPsd, 1).unwrap();
    let p = radial_profile(&s, 40).unwrap();
    let direct: f64 = s.values().iter().map(|v| v * v).sum();
    assert!((p.total_energy() - direct).abs() < 1e-9 * direct);
    assert_eq!(p.counts.iter().sum::<usize>(), 17 * 12);
    assert!((p.energy_below(2.0) - 1.0).abs() < 1e-12);
}

#[test]
fn band_of_synthetic_spectra() {
    let (h, w) = (32, 32);
    let make = |f: &dyn Fn(f64) -> f64| {
        let vals = (0..h * w)
            .map(|k| {
                let (i, j) = (centered_to_offset(k / w, h) as f64, centered_to_offset(k % w, w) as f64);
                f((i * i + j * j).sqrt() / (16f64 * 2f64.sqrt()))
            })
            .collect();
        Spectrum::new(h, w, vals, SpectrumTag::RawPsd, 1).unwrap()
    };
    let low = make(&|rho| if rho < 0.1 { 1.0 } else { 0.0 });
    let high = make(&|rho| if rho > 0.7 { 1.0 } else { 0.0 });
    let mid = make(&|rho| if (0.3..0.5).contains(&rho) { 1.0 } else { 0.0 });
    assert_eq!(classify_band(&radial_profile(&low, 40).unwrap()), Band::Low);
    assert_eq!(classify_band(&radial_profile(&high, 40).unwrap()), Band::High);
    assert_eq!(classify_band(&radial_profile(&mid, 40).unwrap()), Band::Medium);
}

fn image(k: usize, h: usize, w: usize, data: Vec<f64>) -> Image {
    Image::unbounded(Shape::new(k, h, w), data).unwrap()
}

fn dims() -> impl Strategy<Value = (usize, usize, usize)> {
    (prop::sample::select(vec![1usize, 3]), 2usize..=9, 2usize..=9)
}

fn image_strategy() -> impl Strategy<Value = Image> {
    dims().prop_flat_map(|(k, h, w)| {
        prop::collection::vec(-1.0f64..1.0, k * h * w).prop_map(move |d| image(k, h, w, d))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psd_is_absolutely_homogeneous(x in image_strategy(), a in -3.0f64..3.0) {
        let scaled = image(x.channels(), x.height(), x.width(), x.data().iter().map(|v| a * v).collect());
        let p = psd(&x).unwrap();
        let q = psd(&scaled).unwrap();
        for (u, v) in p.values().iter().zip(q.values()) {
            prop_assert!((a.abs() * u - v).abs() <= 1e-9 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn psd_of_real_input_is_conjugate_symmetric(x in image_strategy()) {
        let s = psd(&x).unwrap();
        prop_assert!(s.conjugate_asymmetry(1e-9) < 1e-9);
    }

    #[test]
    fn psd_ignores_circular_shift(x in image_strategy(), dy in 0usize..9, dx in 0usize..9) {
        let (k, h, w) = (x.channels(), x.height(), x.width());
        let mut shifted = vec![0.0; k * h * w];
        for c in 0..k {
            for y in 0..h {
                for xx in 0..w {
                    shifted[c * h * w + ((y + dy) % h) * w + (xx + dx) % w] = x.get(c, y, xx);
                }
            }
        }
        let p = psd(&x).unwrap();
        let q = psd(&image(k, h, w, shifted)).unwrap();
        for (u, v) in p.values().iter().zip(q.values()) {
            prop_assert!((u - v).abs() <= 1e-9 * (1.0 + u.abs()));
        }
    }

    #[test]
    fn psd_triangle_inequality(
        (k, h, w, a, b) in dims().prop_flat_map(|(k, h, w)| {
            let n = k * h * w;
            (Just(k), Just(h), Just(w), prop::collection::vec(-1.0f64..1.0, n), prop::collection::vec(-1.0f64..1.0, n))
        })
    ) {
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let pa = psd(&image(k, h, w, a)).unwrap();
        let pb = psd(&image(k, h, w, b)).unwrap();
        let ps = psd(&image(k, h, w, sum)).unwrap();
        // A single image is a one-sample mean, so the audit applies directly.
        let audit = triangle_audit(&pa, &pb, &ps).unwrap();
        prop_assert!(audit.passed(), "{audit:?}");
    }

    #[test]
    fn mean_psd_averages(xs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3 * 4 * 5), 1..5)) {
        let imgs: Vec<Image> = xs.into_iter().map(|d| image(3, 4, 5, d)).collect();
        let m = mean_psd(imgs.iter()).unwrap();
        prop_assert_eq!(m.samples(), imgs.len());
        for idx in 0..20 {
            let direct = imgs.iter().map(|x| psd(x).unwrap().values()[idx]).sum::<f64>() / imgs.len() as f64;
            prop_assert!((m.values()[idx] - direct).abs() < 1e-12 * (1.0 + direct));
        }
    }
}
