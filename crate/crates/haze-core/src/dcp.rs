//! Dark Channel Prior dehazing.
//!
//! The dark channel of a haze-free natural patch is close to zero, so the
//! residual brightness of `min_channels(I/A)` over a patch measures the
//! airlight fraction and hence the transmission. The pipeline is:
//! dark channel → atmospheric light from the brightest dark-channel
//! pixels → raw transmission `1 − ω·dark(I/A)` → guided-filter
//! refinement against the hazy luminance → scattering-model inversion.

use crate::error::{Error, Result};
use crate::filters::{guided_filter, min_filter_fast, FilterRadius};
use crate::raster::{ImagePlane, RgbImage, TransmissionMap};
use crate::scalar::Real;
use crate::scattering::{check_t_floor, dehaze_with, AtmosphericLight};

/// Parameters of the DCP pipeline. The classical defaults below are the
/// standard choices for this family of dehazers; all of them are plain
/// fields so callers can override per run.
#[derive(Debug, Clone, Copy)]
pub struct DcpConfig<T: Real> {
    /// Patch radius of the dark-channel spatial minimum (15x15 window).
    pub patch_radius: FilterRadius,
    /// Haze retention factor in (0,1]; keeps a trace of haze for depth cues.
    pub omega: T,
    /// Fraction of brightest dark-channel pixels used to estimate A.
    pub top_fraction: T,
    /// Guided-filter radius for transmission refinement.
    pub guided_radius: FilterRadius,
    /// Guided-filter regularizer.
    pub guided_eps: T,
    /// Lower clamp for the refined transmission.
    pub t_floor: T,
}

impl<T: Real> Default for DcpConfig<T> {
    fn default() -> Self {
        Self {
            patch_radius: FilterRadius::new(7).expect("static radius"),
            omega: T::of(0.95),
            top_fraction: T::of(0.001),
            guided_radius: FilterRadius::new(20).expect("static radius"),
            guided_eps: T::of(1e-3),
            t_floor: T::of(0.05),
        }
    }
}

impl<T: Real> DcpConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.omega <= T::zero() || self.omega > T::one() {
            return Err(Error::Config(format!(
                "omega must lie in (0,1], got {}",
                self.omega
            )));
        }
        if self.top_fraction <= T::zero() || self.top_fraction >= T::one() {
            return Err(Error::Config(format!(
                "top_fraction must lie in (0,1), got {}",
                self.top_fraction
            )));
        }
        if self.guided_eps <= T::zero() {
            return Err(Error::Config(format!(
                "guided_eps must be positive, got {}",
                self.guided_eps
            )));
        }
        check_t_floor(self.t_floor)
    }
}

/// Dark channel: per-pixel channel minimum followed by a spatial minimum.
pub fn dark_channel<T: Real>(img: &RgbImage<T>, r: FilterRadius) -> Result<ImagePlane<T>> {
    min_filter_fast(&img.channel_min(), r)
}

/// Estimates the atmospheric light as the mean color of the
/// `ceil(top_fraction * N)` pixels with the largest dark-channel value.
/// Ties break by row-major pixel index, which keeps the result
/// deterministic; averaging (rather than taking the single maximum) is
/// robust to specular outliers.
pub fn estimate_atmospheric_light<T: Real>(
    img: &RgbImage<T>,
    dark: &ImagePlane<T>,
    top_fraction: T,
) -> Result<AtmosphericLight<T>> {
    crate::raster::ensure_same_dims(img.dims(), dark.dims(), "image vs dark channel")?;
    if top_fraction <= T::zero() || top_fraction >= T::one() {
        return Err(Error::Config(format!(
            "top_fraction must lie in (0,1), got {top_fraction}"
        )));
    }
    let n = dark.len();
    let take = (top_fraction.as_f64() * n as f64).ceil().max(1.0) as usize;

    let mut order: Vec<usize> = (0..n).collect();
    // Descending by dark value; stable sort keeps row-major order on ties.
    order.sort_by(|&i, &j| {
        dark.as_slice()[j]
            .partial_cmp(&dark.as_slice()[i])
            .expect("finite dark channel")
    });

    let w = img.width();
    let mut sums = [0.0f64; 3];
    for &idx in order.iter().take(take) {
        let (x, y) = (idx % w, idx / w);
        for (c, sum) in sums.iter_mut().enumerate() {
            *sum += img.channel(c).get(x, y).as_f64();
        }
    }
    let k = take as f64;
    AtmosphericLight::new(
        T::of(sums[0] / k),
        T::of(sums[1] / k),
        T::of(sums[2] / k),
    )
}

/// Transmission estimate `t = 1 − ω·dark(I/A)`, refined with a guided
/// filter using the hazy luminance as guide and clamped to `[t_floor, 1]`.
pub fn dcp_transmission<T: Real>(
    img: &RgbImage<T>,
    a: AtmosphericLight<T>,
    cfg: &DcpConfig<T>,
) -> Result<TransmissionMap<T>> {
    cfg.validate()?;
    for c in 0..3 {
        if a.channel(c) <= T::zero() {
            return Err(Error::Domain(format!(
                "atmospheric light channel {c} is zero; cannot normalize"
            )));
        }
    }
    let (w, h) = img.dims();
    let normalized_min = ImagePlane::from_fn(w, h, |x, y| {
        let r = img.red().get(x, y) / a.channel(0);
        let g = img.green().get(x, y) / a.channel(1);
        let b = img.blue().get(x, y) / a.channel(2);
        r.min(g).min(b)
    });
    let dark = min_filter_fast(&normalized_min, cfg.patch_radius)?;
    let raw = dark.map(|v| T::one() - cfg.omega * v);
    let refined = guided_filter(&img.luminance(), &raw, cfg.guided_radius, cfg.guided_eps)?;
    let clamped = refined.map(|v| v.max(cfg.t_floor).min(T::one()));
    TransmissionMap::new(clamped)
}

/// Full DCP pipeline. Returns the dehazed image together with the
/// transmission map and atmospheric light it used.
pub fn dcp_dehaze<T: Real>(
    img: &RgbImage<T>,
    cfg: &DcpConfig<T>,
) -> Result<(RgbImage<T>, TransmissionMap<T>, AtmosphericLight<T>)> {
    cfg.validate()?;
    let dark = dark_channel(img, cfg.patch_radius)?;
    let a = estimate_atmospheric_light(img, &dark, cfg.top_fraction)?;
    let t = dcp_transmission(img, a, cfg)?;
    let dehazed = dehaze_with(img, &t, a, cfg.t_floor)?;
    Ok((dehazed, t, a))
}
