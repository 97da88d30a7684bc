use crate::error::Result;
use crate::image::Image;

/// Ceiling that stands in for the infinite PSNR of identical images.
pub const PSNR_CAP: f64 = 100.0;

/// `-10 log10(MSE)` for unit-peak images, capped at [`PSNR_CAP`].
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    psnr_capped(a, b, PSNR_CAP)
}

pub fn psnr_capped(a: &Image, b: &Image, cap: f64) -> Result<f64> {
    Ok(psnr_from_mse(a.mse(b)?, cap))
}

pub fn psnr_from_mse(mse: f64, cap: f64) -> f64 {
    if mse <= 0.0 {
        cap
    } else {
        (-10.0 * mse.log10()).min(cap)
    }
}
