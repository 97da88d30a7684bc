//! Planar filtering and resampling helpers shared by the corruptions.
//! All boundaries use half-sample symmetric reflection (`d c b a | a b c d`).

/// Reflects an integer coordinate into `0..n`.
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Dense 2-D kernel centred at `(radius, radius)`.
#[derive(Debug, Clone)]
pub(crate) struct Kernel {
    pub radius: usize,
    pub weights: Vec<f64>,
}

impl Kernel {
    fn side(&self) -> usize {
        2 * self.radius + 1
    }

    fn normalized(mut self) -> Self {
        let s: f64 = self.weights.iter().sum();
        if s > 0.0 {
            self.weights.iter_mut().for_each(|w| *w /= s);
        }
        self
    }

    /// Uniform disk of radius `r` with a one-pixel minimum footprint.
    pub fn disk(r: f64) -> Self {
        let radius = r.ceil().max(0.0) as usize;
        let side = 2 * radius + 1;
        let weights = (0..side * side)
            .map(|k| {
                let (y, x) = ((k / side) as f64 - radius as f64, (k % side) as f64 - radius as f64);
                if x * x + y * y <= r * r + 1e-9 {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        Kernel { radius, weights }.normalized()
    }

    /// Centred line segment of length `len` at angle `theta`, drawn by
    /// bilinear splatting of points spaced a quarter pixel apart.
    pub fn line(len: f64, theta: f64) -> Self {
        let radius = (len / 2.0).ceil() as usize + 1;
        let side = 2 * radius + 1;
        let mut weights = vec![0.0; side * side];
        let steps = (len * 4.0).ceil().max(1.0) as usize;
        let (dx, dy) = (theta.cos(), theta.sin());
        for s in 0..=steps {
            let t = (s as f64 / steps as f64 - 0.5) * len;
            splat(&mut weights, side, radius as f64 + t * dy, radius as f64 + t * dx, 1.0);
        }
        Kernel { radius, weights }.normalized()
    }
}

/// Adds `v` at fractional `(y, x)` spread bilinearly over the four
/// neighbouring cells of a `side x side` grid; out-of-grid parts are dropped.
pub(crate) fn splat(grid: &mut [f64], side: usize, y: f64, x: f64, v: f64) {
    splat_rect(grid, side, side, y, x, v);
}

pub(crate) fn splat_rect(grid: &mut [f64], h: usize, w: usize, y: f64, x: f64, v: f64) {
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    for (oy, wy) in [(0.0, 1.0 - fy), (1.0, fy)] {
        for (ox, wx) in [(0.0, 1.0 - fx), (1.0, fx)] {
            let (yy, xx) = (y0 + oy, x0 + ox);
            if yy >= 0.0 && xx >= 0.0 && (yy as usize) < h && (xx as usize) < w {
                grid[yy as usize * w + xx as usize] += v * wy * wx;
            }
        }
    }
}

/// Correlation of one plane with `kernel` (kernels used here are symmetric
/// under the relevant flips, so this equals convolution).
pub(crate) fn convolve(plane: &[f64], h: usize, w: usize, kernel: &Kernel) -> Vec<f64> {
    let r = kernel.radius as isize;
    let side = kernel.side();
    let taps: Vec<(isize, isize, f64)> = kernel
        .weights
        .iter()
        .enumerate()
        .filter(|(_, &wt)| wt != 0.0)
        .map(|(k, &wt)| ((k / side) as isize - r, (k % side) as isize - r, wt))
        .collect();
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = taps
                .iter()
                .map(|&(dy, dx, wt)| {
                    wt * plane[reflect(y as isize + dy, h) * w + reflect(x as isize + dx, w)]
                })
                .sum();
        }
    }
    out
}

fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|t| (-(t * t) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / s).collect()
}

/// Separable Gaussian blur; `sigma <= 0` is the identity.
pub(crate) fn gaussian_blur(plane: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return plane.to_vec();
    }
    let taps = gaussian_taps(sigma);
    let r = (taps.len() / 2) as isize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * plane[y * w + reflect(x as isize + k as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * tmp[reflect(y as isize + k as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

/// Bilinear sample at fractional `(y, x)` with reflected borders.
pub(crate) fn bilinear(plane: &[f64], h: usize, w: usize, y: f64, x: f64) -> f64 {
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    let (y0, x0) = (y0 as isize, x0 as isize);
    let at = |yy: isize, xx: isize| plane[reflect(yy, h) * w + reflect(xx, w)];
    (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x0 + 1))
        + fy * ((1.0 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1))
}
