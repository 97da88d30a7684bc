use nalgebra::{DMatrix, SymmetricEigen};

use super::entropy::{decode_symbols, encode_symbols, shannon_bits};
use super::{BlobHeader, Codec, CodecKind, CompressedBlob, RateParam};
use crate::error::{Error, Result};
use crate::image::{Dataset, Image, Shape};

/// Quantization step used when none is given (one 8-bit level).
pub const DEFAULT_DELTA: f64 = 1.0 / 255.0;

/// Rank-`r` linear autoencoder: `C(x) = W2 q(W1 (x - mu)) + mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearAECodec {
    shape: Shape,
    r: usize,
    delta: f64,
    mean: Vec<f64>,
    /// `r x D`, row-major; rows are principal directions when unpruned.
    w1: Vec<f64>,
    /// `D x r`, row-major.
    w2: Vec<f64>,
    m1: Vec<bool>,
    m2: Vec<bool>,
    singular_values: Vec<f64>,
}

/// Fits the optimal rank-`r` projection (top-`r` principal subspace of the
/// centred data). `r` above the data rank is clipped with a warning.
pub fn fit_linear_ae(dataset: &Dataset, r: usize) -> Result<LinearAECodec> {
    let shape = dataset.common_shape()?;
    let d = shape.len();
    let n = dataset.len();
    if r > d {
        return Err(Error::InvalidArgument(format!("latent dimension {r} exceeds input dimension {d}")));
    }
    let mut mean = vec![0.0; d];
    for img in dataset.images() {
        for (m, v) in mean.iter_mut().zip(img.data()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let x = DMatrix::from_fn(n, d, |k, j| dataset.items()[k].1.data()[j] - mean[j]);
    let (values, vectors) = principal_directions(&x, r.min(n.min(d)));
    let s_max = values.first().copied().unwrap_or(0.0);
    let rank = values.iter().take_while(|&&s| s > 0.0 && s > s_max * 1e-6).count();
    let kept = r.min(rank);
    if kept < r {
        log::warn!("latent dimension {r} exceeds data rank {rank}; clipped to {kept}");
    }
    let mut w1 = Vec::with_capacity(kept * d);
    for v in vectors.iter().take(kept) {
        w1.extend_from_slice(v);
    }
    let w2 = transpose(&w1, kept, d);
    Ok(LinearAECodec {
        shape,
        r: kept,
        delta: DEFAULT_DELTA,
        mean,
        m1: vec![true; kept * d],
        m2: vec![true; kept * d],
        w1,
        w2,
        singular_values: values.into_iter().take(kept).collect(),
    })
}

/// Singular values (descending) and right singular vectors of `x` (`N x D`),
/// at most `want` of them, orthonormalized and sign-normalized so that each
/// vector's largest-magnitude entry is positive.
fn principal_directions(x: &DMatrix<f64>, want: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (n, d) = x.shape();
    if want == 0 {
        return (Vec::new(), Vec::new());
    }
    let (mut values, mut vectors): (Vec<f64>, Vec<Vec<f64>>) = if n <= d {
        let gram = x * x.transpose();
        let eig = SymmetricEigen::new(gram);
        let order = descending(eig.eigenvalues.as_slice());
        order
            .into_iter()
            .take(want)
            .map(|k| {
                let s = eig.eigenvalues[k].max(0.0).sqrt();
                let u = eig.eigenvectors.column(k);
                let v = x.transpose() * u;
                let v: Vec<f64> = if s > 0.0 { v.iter().map(|e| e / s).collect() } else { v.iter().copied().collect() };
                (s, v)
            })
            .unzip()
    } else {
        let cov = x.transpose() * x;
        let eig = SymmetricEigen::new(cov);
        let order = descending(eig.eigenvalues.as_slice());
        order
            .into_iter()
            .take(want)
            .map(|k| (eig.eigenvalues[k].max(0.0).sqrt(), eig.eigenvectors.column(k).iter().copied().collect()))
            .unzip()
    };
    // modified Gram-Schmidt restores orthonormality lost to the Gram route
    for i in 0..vectors.len() {
        for j in 0..i {
            let dot: f64 = vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum();
            let (head, tail) = vectors.split_at_mut(i);
            tail[0].iter_mut().zip(&head[j]).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = vectors[i].iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 0.0 {
            vectors[i].iter_mut().for_each(|a| *a /= norm);
        } else {
            values[i] = 0.0;
        }
        let pivot = vectors[i]
            .iter()
            .copied()
            .fold(0.0f64, |best, a| if a.abs() > best.abs() { a } else { best });
        if pivot < 0.0 {
            vectors[i].iter_mut().for_each(|a| *a = -*a);
        }
    }
    (values, vectors)
}

fn descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

pub(crate) fn transpose(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; m.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = m[i * cols + j];
        }
    }
    out
}

impl LinearAECodec {
    /// Assembles a codec from explicit parts (used by the container reader).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        shape: Shape,
        r: usize,
        delta: f64,
        mean: Vec<f64>,
        w1: Vec<f64>,
        w2: Vec<f64>,
        m1: Vec<bool>,
        m2: Vec<bool>,
    ) -> Result<Self> {
        let d = shape.len();
        if mean.len() != d || w1.len() != r * d || w2.len() != r * d || m1.len() != r * d || m2.len() != r * d {
            return Err(Error::Container("linear codec parts have inconsistent sizes".into()));
        }
        if !(delta > 0.0) {
            return Err(Error::InvalidArgument(format!("quantization step must be > 0, got {delta}")));
        }
        Ok(LinearAECodec {
            shape,
            r,
            delta,
            mean,
            w1,
            w2,
            m1,
            m2,
            singular_values: Vec::new(),
        })
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidArgument(format!("quantization step must be > 0, got {delta}")));
        }
        self.delta = delta;
        Ok(self)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn w1(&self) -> &[f64] {
        &self.w1
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    pub fn masks(&self) -> (&[bool], &[bool]) {
        (&self.m1, &self.m2)
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Fraction of pruned entries across both matrices.
    pub fn sparsity(&self) -> f64 {
        let total = self.m1.len() + self.m2.len();
        if total == 0 {
            return 0.0;
        }
        let pruned = self.m1.iter().chain(&self.m2).filter(|m| !**m).count();
        pruned as f64 / total as f64
    }

    pub fn is_pruned(&self) -> bool {
        self.m1.iter().chain(&self.m2).any(|m| !*m)
    }

    pub(crate) fn weights_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [bool], &mut [bool]) {
        (&mut self.w1, &mut self.w2, &mut self.m1, &mut self.m2)
    }

    /// `W2 W1` as a dense `D x D` matrix.
    pub fn projection(&self) -> DMatrix<f64> {
        let d = self.dim();
        let w1 = DMatrix::from_row_slice(self.r, d, &self.w1);
        let w2 = DMatrix::from_row_slice(d, self.r, &self.w2);
        w2 * w1
    }

    fn check_shape(&self, image: &Image) -> Result<()> {
        if image.shape() != self.shape {
            return Err(Error::Dimension(format!(
                "codec expects {}, image is {}",
                self.shape,
                image.shape()
            )));
        }
        Ok(())
    }

    /// `W1 (x - mu)`.
    pub fn encode_latent(&self, image: &Image) -> Result<Vec<f64>> {
        self.check_shape(image)?;
        let centred: Vec<f64> = image.data().iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        let d = self.dim();
        Ok((0..self.r)
            .map(|j| self.w1[j * d..(j + 1) * d].iter().zip(&centred).map(|(w, x)| w * x).sum())
            .collect())
    }

    /// `W2 y + mu`, unclamped.
    pub fn decode_latent(&self, latent: &[f64]) -> Vec<f64> {
        let r = self.r;
        self.mean
            .iter()
            .enumerate()
            .map(|(i, m)| m + self.w2[i * r..(i + 1) * r].iter().zip(latent).map(|(w, y)| w * y).sum::<f64>())
            .collect()
    }

    /// Projection without quantization, clamped to the input's range.
    pub fn project(&self, image: &Image) -> Result<Image> {
        let y = self.encode_latent(image)?;
        Ok(Image::clamped_from(self.shape, self.decode_latent(&y), image.range())?.0)
    }

    fn quantize(&self, latent: &[f64]) -> Result<Vec<i64>> {
        latent
            .iter()
            .map(|&y| {
                let q = (y / self.delta).round();
                if q.abs() < 4.0e18 {
                    Ok(q as i64)
                } else {
                    Err(Error::Codec(format!("latent {y} overflows the symbol range at step {}", self.delta)))
                }
            })
            .collect()
    }
}

impl Codec for LinearAECodec {
    fn kind(&self) -> CodecKind {
        CodecKind::LinearAe
    }

    fn id(&self) -> String {
        if self.is_pruned() {
            format!("linear_ae_sp{:.2}", self.sparsity())
        } else {
            "linear_ae".into()
        }
    }

    fn rate_param(&self) -> RateParam {
        RateParam::LinearAe {
            r: self.r,
            delta: self.delta,
        }
    }

    fn roundtrip(&self, image: &Image) -> Result<(Image, CompressedBlob)> {
        let symbols = self.quantize(&self.encode_latent(image)?)?;
        let stream = encode_symbols(&symbols);
        let decoded = decode_symbols(&stream, self.r)?;
        let latent: Vec<f64> = decoded.iter().map(|&q| q as f64 * self.delta).collect();
        let (out, _) = Image::clamped_from(self.shape, self.decode_latent(&latent), image.range())?;
        let header = BlobHeader {
            kind: CodecKind::LinearAe,
            shape: self.shape,
            rate_param: self.rate_param(),
            tool: None,
        };
        Ok((out, CompressedBlob::from_streams(header, vec![stream], shannon_bits(&symbols))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(points: &[Vec<f64>], k: usize, h: usize, w: usize) -> Dataset {
        let items = points
            .iter()
            .enumerate()
            .map(|(i, p)| (format!("{i:03}"), Image::unbounded(Shape::new(k, h, w), p.clone()).unwrap()))
            .collect();
        Dataset::new("pts", items).unwrap()
    }

    #[test]
    fn two_dimensional_subspace_is_reconstructed_exactly() {
        let a: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..12).map(|i| (i as f64 * 0.4).cos()).collect();
        let pts: Vec<Vec<f64>> = (0..6)
            .map(|k| a.iter().zip(&b).map(|(x, y)| 0.2 + (k as f64 - 2.0) * x + (k * k) as f64 * 0.1 * y).collect())
            .collect();
        let ds = dataset(&pts, 1, 3, 4);
        let codec = fit_linear_ae(&ds, 2).unwrap();
        for img in ds.images() {
            let out = codec.project(img).unwrap();
            let mse = out.mse(img).unwrap();
            assert!(mse < 1e-18, "{mse}");
        }
        let clipped = fit_linear_ae(&ds, 4).unwrap();
        assert_eq!(clipped.r(), 2);
    }

    #[test]
    fn rank_zero_returns_mean() {
        let pts = vec![vec![0.5; 4], vec![0.5; 4], vec![0.5; 4]];
        let ds = dataset(&pts, 1, 2, 2);
        let codec = fit_linear_ae(&ds, 3).unwrap();
        assert_eq!(codec.r(), 0);
        let probe = Image::unbounded(Shape::new(1, 2, 2), vec![9.0, -1.0, 2.0, 0.0]).unwrap();
        let (out, blob) = codec.roundtrip(&probe).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.5).abs() < 1e-15));
        assert_eq!(blob.exact_bits, 64);
        let r0 = fit_linear_ae(&dataset(&[vec![0.0, 1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0, 0.0]], 1, 2, 2), 0).unwrap();
        assert_eq!(r0.r(), 0);
    }

    #[test]
    fn vanishing_step_matches_projection() {
        let pts: Vec<Vec<f64>> = (0..10).map(|k| (0..16).map(|i| ((i * k) as f64 * 0.37).sin()).collect()).collect();
        let ds = dataset(&pts, 1, 4, 4);
        let codec = fit_linear_ae(&ds, 3).unwrap().with_delta(1e-9).unwrap();
        for img in ds.images() {
            let (out, _) = codec.roundtrip(img).unwrap();
            let proj = codec.project(img).unwrap();
            for (a, b) in out.data().iter().zip(proj.data()) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn unpruned_product_is_orthogonal_projection() {
        let pts: Vec<Vec<f64>> = (0..9).map(|k| (0..12).map(|i| ((i * 7 + k * 11) % 13) as f64 + (i * k) as f64 * 0.1).collect()).collect();
        let codec = fit_linear_ae(&dataset(&pts, 3, 2, 2), 4).unwrap();
        let p = codec.projection();
        let scale = p.norm();
        assert!((&p * &p - &p).norm() / scale < 1e-8);
        assert!((p.transpose() - &p).norm() / scale < 1e-8);
        assert!((p.trace() - 4.0).abs() < 1e-8);
    }
}
