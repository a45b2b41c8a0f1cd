//! Full-reference image quality (PSNR, SSIM) and depth-estimation
//! metrics, plus the distance-band error profile.
//!
//! All statistics accumulate in f64. PSNR of identical images is capped
//! at 99 dB so reports stay finite; SSIM uses the standard 11x11
//! Gaussian window (sigma 1.5) with `C1 = 0.01^2`, `C2 = 0.03^2` for
//! unit dynamic range, averaged over window centers where the full
//! window fits.

use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, DepthMap, ImagePlane, RgbImage};
use crate::scalar::Real;
use serde::Serialize;

/// Cap reported for a zero-MSE (identical) pair.
pub const PSNR_CAP_DB: f64 = 99.0;

const SSIM_RADIUS: usize = 5;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// Peak signal-to-noise ratio in dB over all pixels and channels,
/// assuming a `[0,1]` dynamic range.
pub fn psnr<T: Real>(a: &RgbImage<T>, b: &RgbImage<T>) -> Result<f64> {
    ensure_same_dims(a.dims(), b.dims(), "psnr operands")?;
    let mut sum = 0.0f64;
    for c in 0..3 {
        for (x, y) in a.channel(c).iter().zip(b.channel(c).iter()) {
            let d = (x - y).as_f64();
            sum += d * d;
        }
    }
    let mse = sum / (3 * a.width() * a.height()) as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

/// Windowed SSIM between two planes with values in `[0,1]`.
///
/// Returns the mean over valid window centers and the per-center map
/// (its dimensions shrink by the window radius on each side).
pub fn ssim<T: Real>(a: &ImagePlane<T>, b: &ImagePlane<T>) -> Result<(f64, ImagePlane<T>)> {
    ensure_same_dims(a.dims(), b.dims(), "ssim operands")?;
    let (w, h) = a.dims();
    let win = 2 * SSIM_RADIUS + 1;
    if w < win || h < win {
        return Err(Error::Config(format!(
            "ssim needs at least {win}x{win} pixels, got {w}x{h}"
        )));
    }

    let kernel = gaussian_kernel(SSIM_RADIUS, SSIM_SIGMA);
    let out_w = w - 2 * SSIM_RADIUS;
    let out_h = h - 2 * SSIM_RADIUS;
    let mut map = Vec::with_capacity(out_w * out_h);
    let mut sum = 0.0f64;

    for cy in 0..out_h {
        for cx in 0..out_w {
            let mut mu_a = 0.0f64;
            let mut mu_b = 0.0f64;
            let mut aa = 0.0f64;
            let mut bb = 0.0f64;
            let mut ab = 0.0f64;
            for ky in 0..win {
                for kx in 0..win {
                    let wgt = kernel[ky * win + kx];
                    let va = a.get(cx + kx, cy + ky).as_f64();
                    let vb = b.get(cx + kx, cy + ky).as_f64();
                    mu_a += wgt * va;
                    mu_b += wgt * vb;
                    aa += wgt * (va * va);
                    bb += wgt * (vb * vb);
                    // va*vb is commutative, so the whole statistic stays
                    // bit-symmetric under operand swap.
                    ab += wgt * (va * vb);
                }
            }
            let var_a = aa - mu_a * mu_a;
            let var_b = bb - mu_b * mu_b;
            let cov = ab - mu_a * mu_b;
            let s = ((2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2));
            sum += s;
            map.push(T::of(s));
        }
    }

    let mean = sum / (out_w * out_h) as f64;
    Ok((mean, ImagePlane::new(out_w, out_h, map)?))
}

/// SSIM of two RGB images, computed on luminance.
pub fn ssim_rgb<T: Real>(a: &RgbImage<T>, b: &RgbImage<T>) -> Result<f64> {
    Ok(ssim(&a.luminance(), &b.luminance())?.0)
}

fn gaussian_kernel(radius: usize, sigma: f64) -> Vec<f64> {
    let win = 2 * radius + 1;
    let mut k = Vec::with_capacity(win * win);
    let denom = 2.0 * sigma * sigma;
    for y in 0..win {
        for x in 0..win {
            let dx = x as f64 - radius as f64;
            let dy = y as f64 - radius as f64;
            k.push((-(dx * dx + dy * dy) / denom).exp());
        }
    }
    let total: f64 = k.iter().sum();
    for v in &mut k {
        *v /= total;
    }
    k
}

/// Standard monocular depth-estimation error suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DepthMetrics {
    /// Fraction of pixels with max(pred/gt, gt/pred) < 1.25
    pub delta1: f64,
    /// ... < 1.25^2
    pub delta2: f64,
    /// ... < 1.25^3
    pub delta3: f64,
    /// Mean |pred - gt| / gt
    pub rel: f64,
    /// Mean (pred - gt)^2 / gt
    pub sq_rel: f64,
    /// Root mean squared error, meters
    pub rms: f64,
    /// Mean |log10 pred - log10 gt|
    pub log10: f64,
}

impl DepthMetrics {
    pub const CSV_HEADER: &'static str = "delta1,delta2,delta3,rel,sq_rel,rms,log10";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.delta1, self.delta2, self.delta3, self.rel, self.sq_rel, self.rms, self.log10
        )
    }
}

/// Computes the depth metric suite over the shared valid pixels.
/// Both maps must be strictly positive wherever they are valid.
pub fn depth_metrics<T: Real>(pred: &DepthMap<T>, gt: &DepthMap<T>) -> Result<DepthMetrics> {
    ensure_same_dims(pred.dims(), gt.dims(), "pred vs gt depth")?;
    let w = pred.dims().0;
    let mut n = 0usize;
    let mut hits = [0usize; 3];
    let thresholds = [1.25, 1.25 * 1.25, 1.25 * 1.25 * 1.25];
    let mut rel = 0.0f64;
    let mut sq_rel = 0.0f64;
    let mut sq = 0.0f64;
    let mut log10 = 0.0f64;

    for (i, (p, g)) in pred
        .plane()
        .iter()
        .zip(gt.plane().iter())
        .enumerate()
        .filter(|(i, _)| pred.is_valid(*i) && gt.is_valid(*i))
        .map(|(i, v)| (i, v))
    {
        let (p, g) = (p.as_f64(), g.as_f64());
        if p <= 0.0 || g <= 0.0 {
            return Err(Error::Domain(format!(
                "non-positive depth at pixel ({}, {}): pred {p}, gt {g}",
                i % w,
                i / w
            )));
        }
        let ratio = (p / g).max(g / p);
        for (k, &t) in thresholds.iter().enumerate() {
            if ratio < t {
                hits[k] += 1;
            }
        }
        let d = p - g;
        rel += d.abs() / g;
        sq_rel += d * d / g;
        sq += d * d;
        log10 += (p.log10() - g.log10()).abs();
        n += 1;
    }

    if n == 0 {
        return Err(Error::Domain("no valid pixels for depth metrics".into()));
    }
    let nf = n as f64;
    Ok(DepthMetrics {
        delta1: hits[0] as f64 / nf,
        delta2: hits[1] as f64 / nf,
        delta3: hits[2] as f64 / nf,
        rel: rel / nf,
        sq_rel: sq_rel / nf,
        rms: (sq / nf).sqrt(),
        log10: log10 / nf,
    })
}

/// Mean absolute depth error per ground-truth distance band.
///
/// Band `k` covers gt depths in `((k-1)·width, k·width]` meters. Errors
/// are reported in meters. Empty bands keep their row with a zero count
/// (and a zero error) rather than being dropped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandErrorProfile {
    pub bands: Vec<BandError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandError {
    /// Upper edge of the band, meters.
    pub band_upper_d: f64,
    /// Mean |pred - gt| over the band, meters; 0 when the band is empty.
    pub mean_abs_error: f64,
    pub pixel_count: usize,
}

impl BandErrorProfile {
    pub const CSV_HEADER: &'static str = "band_upper_m,mean_abs_error_m,pixel_count";

    /// Count-weighted recombination of the band means; equals the global
    /// mean absolute error over the bucketed pixels.
    pub fn weighted_mean(&self) -> f64 {
        let total: usize = self.bands.iter().map(|b| b.pixel_count).sum();
        if total == 0 {
            return 0.0;
        }
        let sum: f64 = self
            .bands
            .iter()
            .map(|b| b.mean_abs_error * b.pixel_count as f64)
            .sum();
        sum / total as f64
    }
}

/// Buckets shared valid pixels by ground-truth depth and averages the
/// absolute prediction error per band. Pixels deeper than `max_depth`
/// are not bucketed.
pub fn band_abs_error<T: Real>(
    pred: &DepthMap<T>,
    gt: &DepthMap<T>,
    band_width: f64,
    max_depth: f64,
) -> Result<BandErrorProfile> {
    ensure_same_dims(pred.dims(), gt.dims(), "pred vs gt depth")?;
    if !band_width.is_finite() || band_width <= 0.0 {
        return Err(Error::Config(format!(
            "band width must be positive, got {band_width}"
        )));
    }
    if !max_depth.is_finite() || max_depth <= 0.0 {
        return Err(Error::Config(format!(
            "max depth must be positive, got {max_depth}"
        )));
    }

    let n_bands = (max_depth / band_width).ceil() as usize;
    let mut sums = vec![0.0f64; n_bands];
    let mut counts = vec![0usize; n_bands];

    for (i, (p, g)) in pred.plane().iter().zip(gt.plane().iter()).enumerate() {
        if !(pred.is_valid(i) && gt.is_valid(i)) {
            continue;
        }
        let g = g.as_f64();
        if g <= 0.0 || g > max_depth {
            continue;
        }
        // Band (lo, hi]: depth exactly on an edge belongs to the lower band.
        let band = ((g / band_width).ceil() as usize).clamp(1, n_bands) - 1;
        sums[band] += (p.as_f64() - g).abs();
        counts[band] += 1;
    }

    let bands = (0..n_bands)
        .map(|k| BandError {
            band_upper_d: band_width * (k + 1) as f64,
            mean_abs_error: if counts[k] > 0 {
                sums[k] / counts[k] as f64
            } else {
                0.0
            },
            pixel_count: counts[k],
        })
        .collect();
    Ok(BandErrorProfile { bands })
}
