//! Unnormalized 2-D DFT on row-major `H x W` planes, plus the shift helpers
//! that map raw DFT indices to centred frequency offsets.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Inverse,
}

fn check_dims(len: usize, h: usize, w: usize) -> Result<()> {
    if h < 2 || w < 2 {
        return Err(Error::Dimension(format!("DFT needs H, W >= 2, got {h}x{w}")));
    }
    if len != h * w {
        return Err(Error::Dimension(format!(
            "plane has {len} samples, expected {h}x{w}"
        )));
    }
    Ok(())
}

fn transform(buf: &mut [Complex64], h: usize, w: usize, dir: Direction) {
    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        let (row, col) = match dir {
            Direction::Forward => (planner.plan_fft_forward(w), planner.plan_fft_forward(h)),
            Direction::Inverse => (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h)),
        };
        row.process(buf);
        let mut t = transpose(buf, h, w);
        col.process(&mut t);
        buf.copy_from_slice(&transpose(&t, w, h));
    });
}

fn transpose<T: Copy>(src: &[T], h: usize, w: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(src.len());
    for x in 0..w {
        for y in 0..h {
            out.push(src[y * w + x]);
        }
    }
    out
}

/// `Y[u,v] = sum_{a,b} x[a,b] exp(-2 pi i (ua/H + vb/W))`.
pub fn dft2(plane: &[f64], h: usize, w: usize) -> Result<Vec<Complex64>> {
    check_dims(plane.len(), h, w)?;
    let mut buf: Vec<Complex64> = plane.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(&mut buf, h, w, Direction::Forward);
    Ok(buf)
}

/// Forward transform of an already complex plane.
pub fn dft2_complex(plane: &[Complex64], h: usize, w: usize) -> Result<Vec<Complex64>> {
    check_dims(plane.len(), h, w)?;
    let mut buf = plane.to_vec();
    transform(&mut buf, h, w, Direction::Forward);
    Ok(buf)
}

/// Inverse of [`dft2`], including the `1/(HW)` factor.
pub fn idft2(spectrum: &[Complex64], h: usize, w: usize) -> Result<Vec<Complex64>> {
    check_dims(spectrum.len(), h, w)?;
    let mut buf = spectrum.to_vec();
    transform(&mut buf, h, w, Direction::Inverse);
    let scale = 1.0 / (h * w) as f64;
    buf.iter_mut().for_each(|z| *z *= scale);
    Ok(buf)
}

/// Moves the zero frequency from `(0, 0)` to `(H/2, W/2)` (floor division).
pub fn fftshift<T: Copy>(plane: &[T], h: usize, w: usize) -> Vec<T> {
    let mut out = plane.to_vec();
    let (ch, cw) = (h / 2, w / 2);
    for u in 0..h {
        for v in 0..w {
            out[((u + ch) % h) * w + (v + cw) % w] = plane[u * w + v];
        }
    }
    out
}

/// Inverse of [`fftshift`].
pub fn ifftshift<T: Copy>(plane: &[T], h: usize, w: usize) -> Vec<T> {
    let mut out = plane.to_vec();
    let (ch, cw) = (h / 2, w / 2);
    for u in 0..h {
        for v in 0..w {
            out[u * w + v] = plane[((u + ch) % h) * w + (v + cw) % w];
        }
    }
    out
}

/// Signed frequency offset of raw DFT index `u` on an axis of length `n`.
#[inline]
pub fn raw_to_offset(u: usize, n: usize) -> isize {
    if u < n.div_ceil(2) {
        u as isize
    } else {
        u as isize - n as isize
    }
}

/// Raw DFT index for a signed offset; offsets wrap modulo `n`.
#[inline]
pub fn offset_to_raw(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// Position of the centred row/column with offset `i`.
#[inline]
pub fn offset_to_centered(i: isize, n: usize) -> usize {
    (offset_to_raw(i, n) + n / 2) % n
}

/// Signed offset of the centred row/column `c`.
#[inline]
pub fn centered_to_offset(c: usize, n: usize) -> isize {
    c as isize - (n / 2) as isize
}

/// Centred coordinate of the conjugate-symmetric partner of centred `c`.
#[inline]
pub fn conjugate_centered(c: usize, n: usize) -> usize {
    let u = offset_to_raw(centered_to_offset(c, n), n);
    let u_conj = (n - u) % n;
    (u_conj + n / 2) % n
}
