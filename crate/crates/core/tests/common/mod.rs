#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scb_core::image::{Dataset, Image, Shape};

/// Direct O((HW)^2) evaluation of the unnormalized forward transform.
pub fn naive_dft(x: &[f64], h: usize, w: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); h * w];
    for u in 0..h {
        for v in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..h {
                for b in 0..w {
                    let phase = -2.0 * std::f64::consts::PI * ((u * a) as f64 / h as f64 + (v * b) as f64 / w as f64);
                    acc += x[a * w + b] * Complex64::from_polar(1.0, phase);
                }
            }
            out[u * w + v] = acc;
        }
    }
    out
}

/// Cyclic Jacobi rotations on a symmetric matrix; returns eigenvalues and
/// eigenvectors (as columns).
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let vals = (0..n).map(|i| a[i][i]).collect();
    (vals, v)
}

/// Images whose pixel coordinates have well-separated variances.
pub fn anisotropic(shape: Shape, n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = shape.len();
    // Fixed random rotation so the principal axes are not the pixel axes.
    let mixing: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let items = (0..n)
        .map(|k| {
            let z: Vec<f64> = (0..d).map(|i| rng.random_range(-1.0..1.0) * 0.8f64.powi(i as i32)).collect();
            let x: Vec<f64> = (0..d).map(|i| 0.3 + (0..d).map(|j| mixing[i * d + j] * z[j]).sum::<f64>() * 0.05).collect();
            (format!("a{k:03}"), Image::unbounded(shape, x).unwrap())
        })
        .collect();
    Dataset::new("aniso", items).unwrap()
}

pub fn oracle_projector(ds: &Dataset, r: usize) -> DMatrix<f64> {
    let d = ds.common_shape().unwrap().len();
    let n = ds.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| ds.images().map(|x| x.data()[j]).sum::<f64>() / n).collect();
    let mut cov = vec![vec![0.0; d]; d];
    for x in ds.images() {
        let c: Vec<f64> = x.data().iter().zip(&mean).map(|(a, m)| a - m).collect();
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += c[i] * c[j] / n;
            }
        }
    }
    let (vals, vecs) = jacobi_eigen(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let u = DMatrix::from_fn(d, r, |i, k| vecs[i][order[k]]);
    &u * u.transpose()
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}
