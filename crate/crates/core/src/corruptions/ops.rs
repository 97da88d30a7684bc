use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::filters::{bilinear, convolve, gaussian_blur, splat_rect, Kernel};
use super::table::SeverityTable;
use super::CorruptionKind;
use crate::image::Image;

/// Unclamped corrupted samples, channel-major like the input.
pub(super) fn corrupt(
    kind: CorruptionKind,
    s: usize,
    table: &SeverityTable,
    image: &Image,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let (h, w) = (image.height(), image.width());
    match kind {
        CorruptionKind::Identity => image.data().to_vec(),
        CorruptionKind::GaussianNoise => {
            let sigma = table.gaussian_noise[s];
            image
                .data()
                .iter()
                .map(|&x| {
                    let z: f64 = StandardNormal.sample(rng);
                    x + sigma * z
                })
                .collect()
        }
        CorruptionKind::ShotNoise => {
            let lambda = table.shot_noise[s];
            image
                .data()
                .iter()
                .map(|&x| {
                    let mean = x * lambda;
                    if mean > 0.0 {
                        Poisson::new(mean).map(|p| p.sample(rng)).unwrap_or(mean) / lambda
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        CorruptionKind::ImpulseNoise => impulse(image, table.impulse_noise[s], rng),
        CorruptionKind::DefocusBlur => per_plane(image, |p| convolve(p, h, w, &Kernel::disk(table.defocus_blur[s]))),
        CorruptionKind::MotionBlur => {
            let theta = rng.random_range(0.0..PI);
            let kernel = Kernel::line(table.motion_blur[s], theta);
            per_plane(image, |p| convolve(p, h, w, &kernel))
        }
        CorruptionKind::GlassBlur => glass(image, table, s, rng),
        CorruptionKind::Pixelate => per_plane(image, |p| pixelate(p, h, w, table.pixelate[s])),
        CorruptionKind::ElasticTransform => elastic(image, table, s, rng),
        CorruptionKind::Brightness => image.data().iter().map(|&x| x + table.brightness[s]).collect(),
        CorruptionKind::Contrast => {
            let gamma = table.contrast[s];
            per_plane(image, |p| {
                let m = p.iter().sum::<f64>() / p.len() as f64;
                p.iter().map(|&x| (x - m) * gamma + m).collect()
            })
        }
        CorruptionKind::Fog => {
            let p = table.fog[s];
            let field = plasma(h, w, p.decay, rng);
            per_plane(image, |plane| {
                plane
                    .iter()
                    .zip(&field)
                    .map(|(&x, &f)| x * (1.0 - p.blend) + p.blend * f)
                    .collect()
            })
        }
        CorruptionKind::SnowOverlay => snow(image, table, s, rng),
    }
}

fn per_plane(image: &Image, f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    image.channels_iter().flat_map(f).collect()
}

fn impulse(image: &Image, rate: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    image
        .data()
        .iter()
        .map(|&x| {
            let u: f64 = rng.random();
            if u < rate / 2.0 {
                0.0
            } else if u < rate {
                1.0
            } else {
                x
            }
        })
        .collect()
}

/// Box average over `f x f` blocks (partial blocks at the far edges), then
/// nearest-neighbour upsampling.
fn pixelate(plane: &[f64], h: usize, w: usize, f: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for by in (0..h).step_by(f) {
        for bx in (0..w).step_by(f) {
            let (ey, ex) = ((by + f).min(h), (bx + f).min(w));
            let mut sum = 0.0;
            for y in by..ey {
                sum += plane[y * w + bx..y * w + ex].iter().sum::<f64>();
            }
            let mean = sum / ((ey - by) * (ex - bx)) as f64;
            for y in by..ey {
                out[y * w + bx..y * w + ex].iter_mut().for_each(|v| *v = mean);
            }
        }
    }
    out
}

fn glass(image: &Image, table: &SeverityTable, s: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let p = table.glass_blur[s];
    let (k, h, w) = (image.channels(), image.height(), image.width());
    let mut planes: Vec<Vec<f64>> = image.channels_iter().map(|c| gaussian_blur(c, h, w, p.sigma)).collect();
    let d = p.radius as i64;
    for _ in 0..p.rounds {
        for y in 0..h {
            for x in 0..w {
                let dy = rng.random_range(-d..=d);
                let dx = rng.random_range(-d..=d);
                let (ty, tx) = (y as i64 + dy, x as i64 + dx);
                if ty < 0 || tx < 0 || ty >= h as i64 || tx >= w as i64 {
                    continue;
                }
                let (a, b) = (y * w + x, ty as usize * w + tx as usize);
                for plane in planes.iter_mut().take(k) {
                    plane.swap(a, b);
                }
            }
        }
    }
    planes.into_iter().flat_map(|c| gaussian_blur(&c, h, w, p.sigma)).collect()
}

/// Smooth random displacement with the given RMS amplitude.
fn displacement(h: usize, w: usize, amplitude: f64, smoothness: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let noise: Vec<f64> = (0..h * w).map(|_| StandardNormal.sample(rng)).collect();
    let mut field = gaussian_blur(&noise, h, w, smoothness);
    let rms = (field.iter().map(|v| v * v).sum::<f64>() / field.len() as f64).sqrt();
    if rms > 0.0 {
        field.iter_mut().for_each(|v| *v *= amplitude / rms);
    }
    field
}

fn elastic(image: &Image, table: &SeverityTable, s: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let p = table.elastic_transform[s];
    let (h, w) = (image.height(), image.width());
    let dy = displacement(h, w, p.amplitude, p.smoothness, rng);
    let dx = displacement(h, w, p.amplitude, p.smoothness, rng);
    per_plane(image, |plane| {
        (0..h * w)
            .map(|k| bilinear(plane, h, w, (k / w) as f64 + dy[k], (k % w) as f64 + dx[k]))
            .collect()
    })
}

/// Diamond-square plasma on the smallest `2^n + 1` grid covering `h x w`,
/// cropped to the top-left corner and rescaled to `[0, 1]`.
fn plasma(h: usize, w: usize, decay: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut n = 1;
    while n + 1 < h.max(w) {
        n *= 2;
    }
    let side = n + 1;
    let mut g = vec![0.0; side * side];
    let mut amp = 1.0;
    let mut step = n;
    let jitter = |rng: &mut ChaCha8Rng, amp: f64| amp * (rng.random::<f64>() - 0.5);
    while step > 1 {
        let half = step / 2;
        for y in (half..side).step_by(step) {
            for x in (half..side).step_by(step) {
                let avg = (g[(y - half) * side + x - half]
                    + g[(y - half) * side + x + half]
                    + g[(y + half) * side + x - half]
                    + g[(y + half) * side + x + half])
                    / 4.0;
                g[y * side + x] = avg + jitter(rng, amp);
            }
        }
        for y in (0..side).step_by(half) {
            let start = if (y / half) % 2 == 0 { half } else { 0 };
            for x in (start..side).step_by(step) {
                let mut sum = 0.0;
                let mut cnt = 0.0;
                for (oy, ox) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                    let (yy, xx) = (y as isize + oy * half as isize, x as isize + ox * half as isize);
                    if yy >= 0 && xx >= 0 && (yy as usize) < side && (xx as usize) < side {
                        sum += g[yy as usize * side + xx as usize];
                        cnt += 1.0;
                    }
                }
                g[y * side + x] = sum / cnt + jitter(rng, amp);
            }
        }
        amp /= decay;
        step = half;
    }
    let mut out: Vec<f64> = (0..h * w).map(|k| g[(k / w) * side + k % w]).collect();
    let lo = out.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        out.iter_mut().for_each(|v| *v = (*v - lo) / (hi - lo));
    }
    out
}

fn snow(image: &Image, table: &SeverityTable, s: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let p = table.snow_overlay[s];
    let (k, h, w) = (image.channels(), image.height(), image.width());
    let gray: Vec<f64> = if k == 3 {
        let (r, g, b) = (image.channel(0), image.channel(1), image.channel(2));
        (0..h * w).map(|i| 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i]).collect()
    } else {
        image.channel(0).to_vec()
    };
    // streak layer: all flakes share one wind direction
    let theta = PI / 2.0 + rng.random_range(-0.4..0.4);
    let flakes = (p.density * (h * w) as f64).round() as usize;
    let mut layer = vec![0.0; h * w];
    let steps = (p.length * 2.0).ceil().max(1.0) as usize;
    for _ in 0..flakes {
        let (cy, cx) = (rng.random_range(0.0..h as f64), rng.random_range(0.0..w as f64));
        let len = p.length * rng.random_range(0.5..1.0);
        for t in 0..=steps {
            let u = (t as f64 / steps as f64 - 0.5) * len;
            splat_rect(&mut layer, h, w, cy + u * theta.sin(), cx + u * theta.cos(), 1.0);
        }
    }
    layer.iter_mut().for_each(|a| *a = (*a * p.weight).min(1.0));
    image
        .channels_iter()
        .flat_map(|plane| {
            plane
                .iter()
                .zip(&gray)
                .zip(&layer)
                .map(|((&x, &g), &a)| {
                    let base = (1.0 - p.whiten) * x + p.whiten * x.max(1.5 * g + 0.5);
                    base * (1.0 - a) + a
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn pixelate_averages_blocks() {
        let plane: Vec<f64> = (0..16).map(|v| v as f64).collect();
        let out = pixelate(&plane, 4, 4, 2);
        assert_eq!(out[0], 2.5);
        assert_eq!(out[5], 2.5);
        assert_eq!(out[15], 12.5);
        let odd = pixelate(&(0..9).map(|v| v as f64).collect::<Vec<_>>(), 3, 3, 2);
        assert_eq!(odd[8], 8.0);
    }

    #[test]
    fn plasma_spans_unit_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = plasma(20, 33, 2.0, &mut rng);
        assert_eq!(f.len(), 20 * 33);
        let lo = f.iter().copied().fold(1.0, f64::min);
        let hi = f.iter().copied().fold(0.0, f64::max);
        assert_eq!((lo, hi), (0.0, 1.0));
    }

    #[test]
    fn displacement_has_requested_rms() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = displacement(32, 32, 1.5, 3.0, &mut rng);
        let rms = (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt();
        assert!((rms - 1.5).abs() < 1e-9);
    }
}
