//! The atmospheric scattering model.
//!
//! A hazy observation is the convex blend `I = J·t + A·(1−t)` of the
//! scene radiance `J` and the airlight `A`, where the transmission
//! `t = exp(−β·d)` decays exponentially with scene depth under a
//! homogeneous atmosphere. This module implements the blend in both
//! directions plus the depth↔transmission exponential map.

use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, DepthMap, ImagePlane, RgbImage, TransmissionMap};
use crate::scalar::Real;

/// Global airlight color. The model assumes it is spatially homogeneous;
/// estimation may still produce slightly different per-channel values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtmosphericLight<T: Real> {
    r: T,
    g: T,
    b: T,
}

impl<T: Real> AtmosphericLight<T> {
    pub fn new(r: T, g: T, b: T) -> Result<Self> {
        for (name, v) in [("r", r), ("g", g), ("b", b)] {
            if !v.is_finite() || v < T::zero() || v > T::one() {
                return Err(Error::Domain(format!(
                    "atmospheric light channel {name}={v} outside [0,1]"
                )));
            }
        }
        Ok(Self { r, g, b })
    }

    /// Gray airlight with all channels equal.
    pub fn homogeneous(a: T) -> Result<Self> {
        Self::new(a, a, a)
    }

    pub fn channel(&self, c: usize) -> T {
        match c {
            0 => self.r,
            1 => self.g,
            2 => self.b,
            _ => panic!("channel index {c} out of range"),
        }
    }

    pub fn channels(&self) -> [T; 3] {
        [self.r, self.g, self.b]
    }
}

/// Per-meter exponential attenuation rate of the atmosphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringCoefficient<T: Real> {
    beta: T,
}

impl<T: Real> ScatteringCoefficient<T> {
    pub fn new(beta: T) -> Result<Self> {
        if !beta.is_finite() || beta <= T::zero() {
            return Err(Error::Domain(format!(
                "scattering coefficient must be positive and finite, got {beta}"
            )));
        }
        Ok(Self { beta })
    }

    pub fn value(&self) -> T {
        self.beta
    }
}

/// `t(x) = exp(−β·d(x))` per valid pixel. Invalid pixels map to full
/// transmission so they stay inert under later blends.
pub fn transmission_from_depth<T: Real>(
    depth: &DepthMap<T>,
    beta: ScatteringCoefficient<T>,
) -> Result<TransmissionMap<T>> {
    let b = beta.value();
    let (w, h) = depth.dims();
    let mut data = Vec::with_capacity(w * h);
    for (i, d) in depth.plane().iter().enumerate() {
        if depth.is_valid(i) {
            data.push((-b * d).exp());
        } else {
            data.push(T::one());
        }
    }
    TransmissionMap::new(ImagePlane::new(w, h, data)?)
}

/// Inverts the exponential map: `d(x) = −ln(max(t(x), t_floor)) / β`.
///
/// The floor keeps the inversion finite where the transmission has
/// decayed to zero; outputs are finite and ≥ 0.
pub fn depth_from_transmission<T: Real>(
    t: &TransmissionMap<T>,
    beta: ScatteringCoefficient<T>,
    t_floor: T,
) -> Result<DepthMap<T>> {
    check_t_floor(t_floor)?;
    let b = beta.value();
    let plane = t.plane().map(|v| {
        let clamped = v.max(t_floor);
        // ln of a value in (0,1] is ≤ 0; negate and guard the t=1 case
        // against a negative zero.
        (-clamped.ln() / b).max(T::zero())
    });
    DepthMap::new(plane)
}

pub(crate) fn check_t_floor<T: Real>(t_floor: T) -> Result<()> {
    if !t_floor.is_finite() || t_floor <= T::zero() || t_floor > T::one() {
        return Err(Error::Config(format!(
            "t_floor must lie in (0,1], got {t_floor}"
        )));
    }
    Ok(())
}

/// Forward synthesis `I_c = J_c·t + A_c·(1−t)` per channel.
///
/// The output is a per-pixel convex combination of `J` and `A`, clamped
/// against float dust so it stays inside `[0,1]`.
pub fn hazify<T: Real>(
    clear: &RgbImage<T>,
    t: &TransmissionMap<T>,
    a: AtmosphericLight<T>,
) -> Result<RgbImage<T>> {
    ensure_same_dims(clear.dims(), t.dims(), "clear image vs transmission")?;
    let (w, h) = clear.dims();
    let blend = |plane: &ImagePlane<T>, ac: T| {
        ImagePlane::from_fn(w, h, |x, y| {
            let tv = t.get(x, y);
            let v = plane.get(x, y) * tv + ac * (T::one() - tv);
            v.max(T::zero()).min(T::one())
        })
    };
    RgbImage::new(
        blend(clear.red(), a.channel(0)),
        blend(clear.green(), a.channel(1)),
        blend(clear.blue(), a.channel(2)),
    )
}

/// Inverts the scattering model:
/// `J_c = (I_c − A_c) / max(t, t_floor) + A_c`, clamped to `[0,1]`.
pub fn dehaze_with<T: Real>(
    hazy: &RgbImage<T>,
    t: &TransmissionMap<T>,
    a: AtmosphericLight<T>,
    t_floor: T,
) -> Result<RgbImage<T>> {
    ensure_same_dims(hazy.dims(), t.dims(), "hazy image vs transmission")?;
    check_t_floor(t_floor)?;
    let (w, h) = hazy.dims();
    let invert = |plane: &ImagePlane<T>, ac: T| {
        ImagePlane::from_fn(w, h, |x, y| {
            let tv = t.get(x, y).max(t_floor);
            let v = (plane.get(x, y) - ac) / tv + ac;
            v.max(T::zero()).min(T::one())
        })
    };
    RgbImage::new(
        invert(hazy.red(), a.channel(0)),
        invert(hazy.green(), a.channel(1)),
        invert(hazy.blue(), a.channel(2)),
    )
}

/// Self-supervision residual: mean absolute difference between the
/// recomposed observation `J·t + A·(1−t)` and the actual hazy input,
/// over all pixels and channels.
pub fn reconstruction_residual<T: Real>(
    dehazed: &RgbImage<T>,
    t: &TransmissionMap<T>,
    a: AtmosphericLight<T>,
    hazy: &RgbImage<T>,
) -> Result<T> {
    ensure_same_dims(dehazed.dims(), hazy.dims(), "dehazed vs hazy")?;
    ensure_same_dims(dehazed.dims(), t.dims(), "dehazed vs transmission")?;
    let (w, h) = dehazed.dims();
    let mut sum = 0.0f64;
    for c in 0..3 {
        let ac = a.channel(c);
        let j = dehazed.channel(c);
        let i = hazy.channel(c);
        for y in 0..h {
            for x in 0..w {
                let tv = t.get(x, y);
                let recomposed = j.get(x, y) * tv + ac * (T::one() - tv);
                sum += (recomposed - i.get(x, y)).abs().as_f64();
            }
        }
    }
    Ok(T::of(sum / (3 * w * h) as f64))
}
