//! Foundational raster types: dense float planes, RGB images, depth and
//! transmission maps.
//!
//! All types are immutable after construction and hold row-major data.
//! Constructors validate shape and finiteness; range invariants that
//! depend on the producing operation (e.g. RGB values in `[0,1]`) are
//! maintained by those operations and by [`clamp_unit`].

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense single-channel raster. Units depend on context: reflectance in
/// `[0,1]`, meters, reciprocal meters, or dimensionless transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane<T: Real> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Real> ImagePlane<T> {
    /// Builds a plane from row-major data, validating shape and finiteness.
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "plane dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite value {} at pixel ({}, {})",
                data[i],
                i % width,
                i / width
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Constant-valued plane.
    pub fn filled(width: usize, height: usize, value: T) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds a plane by evaluating `f(x, y)` at every pixel. The closure
    /// must produce finite values.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = T> + '_ {
        self.data.iter().copied()
    }

    /// Elementwise map preserving shape. The closure must produce finite
    /// values; this is the workhorse for internal pure transforms.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two same-shaped planes.
    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        ensure_same_dims(self.dims(), other.dims(), "zip_map operands")?;
        Ok(Self {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Mean of all samples, accumulated in f64.
    pub fn mean(&self) -> f64 {
        let sum: f64 = self.data.iter().map(|v| v.as_f64()).sum();
        sum / self.data.len() as f64
    }
}

pub(crate) fn ensure_same_dims(
    a: (usize, usize),
    b: (usize, usize),
    what: &str,
) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(format!(
            "{what}: {}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}

/// Three-channel image with reflectance values, nominally in `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage<T: Real> {
    r: ImagePlane<T>,
    g: ImagePlane<T>,
    b: ImagePlane<T>,
}

impl<T: Real> RgbImage<T> {
    pub fn new(r: ImagePlane<T>, g: ImagePlane<T>, b: ImagePlane<T>) -> Result<Self> {
        ensure_same_dims(r.dims(), g.dims(), "rgb planes r/g")?;
        ensure_same_dims(r.dims(), b.dims(), "rgb planes r/b")?;
        Ok(Self { r, g, b })
    }

    pub fn filled(width: usize, height: usize, r: T, g: T, b: T) -> Result<Self> {
        Ok(Self {
            r: ImagePlane::filled(width, height, r)?,
            g: ImagePlane::filled(width, height, g)?,
            b: ImagePlane::filled(width, height, b)?,
        })
    }

    pub fn width(&self) -> usize {
        self.r.width()
    }

    pub fn height(&self) -> usize {
        self.r.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.r.dims()
    }

    pub fn channel(&self, c: usize) -> &ImagePlane<T> {
        match c {
            0 => &self.r,
            1 => &self.g,
            2 => &self.b,
            _ => panic!("channel index {c} out of range"),
        }
    }

    pub fn red(&self) -> &ImagePlane<T> {
        &self.r
    }

    pub fn green(&self) -> &ImagePlane<T> {
        &self.g
    }

    pub fn blue(&self) -> &ImagePlane<T> {
        &self.b
    }

    /// Applies `f` to each channel, preserving shape.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            r: self.r.map(&f),
            g: self.g.map(&f),
            b: self.b.map(&f),
        }
    }

    /// Per-pixel minimum over the three channels.
    pub fn channel_min(&self) -> ImagePlane<T> {
        ImagePlane::from_fn(self.width(), self.height(), |x, y| {
            self.r.get(x, y).min(self.g.get(x, y)).min(self.b.get(x, y))
        })
    }

    /// Rec.601 luminance, `0.299 R + 0.587 G + 0.114 B`.
    pub fn luminance(&self) -> ImagePlane<T> {
        let (wr, wg, wb) = (T::of(0.299), T::of(0.587), T::of(0.114));
        ImagePlane::from_fn(self.width(), self.height(), |x, y| {
            wr * self.r.get(x, y) + wg * self.g.get(x, y) + wb * self.b.get(x, y)
        })
    }
}

/// Clamps every channel into `[0,1]`. Values already inside are unchanged.
pub fn clamp_unit<T: Real>(img: &RgbImage<T>) -> Result<RgbImage<T>> {
    for c in 0..3 {
        if let Some(i) = img.channel(c).iter().position(|v| v.is_nan()) {
            return Err(Error::Domain(format!(
                "NaN in channel {c} at linear index {i}"
            )));
        }
    }
    Ok(img.map(|v| v.max(T::zero()).min(T::one())))
}

/// Per-pixel scene depth in meters, optionally masked. Pixels outside the
/// mask carry no information and are excluded from every statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap<T: Real> {
    plane: ImagePlane<T>,
    mask: Option<Vec<bool>>,
}

impl<T: Real> DepthMap<T> {
    /// All-valid depth map. Values must be finite and non-negative;
    /// operations that require strict positivity check it themselves.
    pub fn new(plane: ImagePlane<T>) -> Result<Self> {
        Self::with_mask(plane, None)
    }

    /// Depth map with an explicit validity mask (`true` = has ground truth).
    pub fn with_mask(plane: ImagePlane<T>, mask: Option<Vec<bool>>) -> Result<Self> {
        if let Some(m) = &mask {
            if m.len() != plane.len() {
                return Err(Error::Dimension(format!(
                    "mask length {} does not match plane length {}",
                    m.len(),
                    plane.len()
                )));
            }
        }
        for (i, v) in plane.iter().enumerate() {
            let valid = mask.as_ref().map_or(true, |m| m[i]);
            if valid && v < T::zero() {
                return Err(Error::Domain(format!(
                    "negative depth {} at pixel ({}, {})",
                    v,
                    i % plane.width(),
                    i / plane.width()
                )));
            }
        }
        Ok(Self { plane, mask })
    }

    pub fn plane(&self) -> &ImagePlane<T> {
        &self.plane
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.plane.dims()
    }

    #[inline]
    pub fn is_valid(&self, idx: usize) -> bool {
        self.mask.as_ref().map_or(true, |m| m[idx])
    }

    /// Iterator over `(linear index, depth)` for valid pixels.
    pub fn valid_samples(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.plane
            .iter()
            .enumerate()
            .filter(|(i, _)| self.is_valid(*i))
    }

    pub fn valid_count(&self) -> usize {
        match &self.mask {
            Some(m) => m.iter().filter(|&&v| v).count(),
            None => self.plane.len(),
        }
    }

    /// Reciprocal per valid pixel, preserving the mask.
    pub fn reciprocal(&self) -> Result<InverseDepthMap<T>> {
        let plane = reciprocal_plane(&self.plane, self.mask.as_deref())?;
        Ok(InverseDepthMap {
            plane,
            mask: self.mask.clone(),
        })
    }
}

/// Per-pixel reciprocal depth in 1/m — the numerically stable regression
/// space for the depth losses.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseDepthMap<T: Real> {
    plane: ImagePlane<T>,
    mask: Option<Vec<bool>>,
}

impl<T: Real> InverseDepthMap<T> {
    pub fn new(plane: ImagePlane<T>) -> Result<Self> {
        Self::with_mask(plane, None)
    }

    pub fn with_mask(plane: ImagePlane<T>, mask: Option<Vec<bool>>) -> Result<Self> {
        if let Some(m) = &mask {
            if m.len() != plane.len() {
                return Err(Error::Dimension(format!(
                    "mask length {} does not match plane length {}",
                    m.len(),
                    plane.len()
                )));
            }
        }
        Ok(Self { plane, mask })
    }

    pub fn plane(&self) -> &ImagePlane<T> {
        &self.plane
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.plane.dims()
    }

    #[inline]
    pub fn is_valid(&self, idx: usize) -> bool {
        self.mask.as_ref().map_or(true, |m| m[idx])
    }

    /// Inverts back to metric depth; `reciprocal` composed with itself is
    /// the identity up to rounding.
    pub fn reciprocal(&self) -> Result<DepthMap<T>> {
        let plane = reciprocal_plane(&self.plane, self.mask.as_deref())?;
        DepthMap::with_mask(plane, self.mask.clone())
    }
}

/// Computes the reciprocal of a [`DepthMap`].
///
/// Free-function form of [`DepthMap::reciprocal`]; errors identify the
/// offending pixel when a valid sample is not strictly positive.
pub fn reciprocal<T: Real>(depth: &DepthMap<T>) -> Result<InverseDepthMap<T>> {
    depth.reciprocal()
}

fn reciprocal_plane<T: Real>(plane: &ImagePlane<T>, mask: Option<&[bool]>) -> Result<ImagePlane<T>> {
    let mut data = Vec::with_capacity(plane.len());
    for (i, v) in plane.iter().enumerate() {
        let valid = mask.map_or(true, |m| m[i]);
        if valid {
            if v <= T::zero() {
                return Err(Error::Domain(format!(
                    "non-positive value {} at pixel ({}, {})",
                    v,
                    i % plane.width(),
                    i / plane.width()
                )));
            }
            data.push(T::one() / v);
        } else {
            // Invalid pixels keep a harmless placeholder.
            data.push(T::zero());
        }
    }
    ImagePlane::new(plane.width(), plane.height(), data)
}

/// Per-pixel light transmission in `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionMap<T: Real> {
    plane: ImagePlane<T>,
}

impl<T: Real> TransmissionMap<T> {
    pub fn new(plane: ImagePlane<T>) -> Result<Self> {
        if let Some((i, v)) = plane
            .iter()
            .enumerate()
            .find(|(_, v)| *v < T::zero() || *v > T::one())
        {
            return Err(Error::Domain(format!(
                "transmission {} outside [0,1] at pixel ({}, {})",
                v,
                i % plane.width(),
                i / plane.width()
            )));
        }
        Ok(Self { plane })
    }

    pub fn plane(&self) -> &ImagePlane<T> {
        &self.plane
    }

    pub fn dims(&self) -> (usize, usize) {
        self.plane.dims()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.plane.get(x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_rejects_mismatched_length() {
        assert!(ImagePlane::new(3, 2, vec![0.0f32; 5]).is_err());
        assert!(ImagePlane::new(0, 2, Vec::<f32>::new()).is_err());
    }

    #[test]
    fn plane_rejects_non_finite() {
        assert!(ImagePlane::new(2, 1, vec![0.5f32, f32::NAN]).is_err());
        assert!(ImagePlane::new(2, 1, vec![0.5f32, f32::INFINITY]).is_err());
    }

    #[test]
    fn rgb_rejects_mismatched_planes() {
        let a = ImagePlane::filled(4, 4, 0.5f32).unwrap();
        let b = ImagePlane::filled(4, 3, 0.5f32).unwrap();
        assert!(RgbImage::new(a.clone(), a.clone(), b).is_err());
    }

    #[test]
    fn clamp_unit_examples() {
        let img = RgbImage::filled(2, 2, 1.3f64, -0.2, 0.5).unwrap();
        let out = clamp_unit(&img).unwrap();
        assert_eq!(out.red().get(0, 0), 1.0);
        assert_eq!(out.green().get(0, 0), 0.0);
        assert_eq!(out.blue().get(0, 0), 0.5);
    }

    #[test]
    fn reciprocal_constant_examples() {
        let d = DepthMap::new(ImagePlane::filled(3, 3, 2.0f64).unwrap()).unwrap();
        let inv = reciprocal(&d).unwrap();
        assert!(inv.plane().iter().all(|v| v == 0.5));

        let d1 = DepthMap::new(ImagePlane::filled(3, 3, 1.0f64).unwrap()).unwrap();
        assert!(reciprocal(&d1).unwrap().plane().iter().all(|v| v == 1.0));
    }

    #[test]
    fn reciprocal_is_involution() {
        // Deterministic pseudo-random valid map.
        let plane = ImagePlane::from_fn(8, 8, |x, y| {
            0.3 + ((x * 31 + y * 17) % 97) as f64 * 0.1
        });
        let d = DepthMap::new(plane.clone()).unwrap();
        let back = d.reciprocal().unwrap().reciprocal().unwrap();
        for (a, b) in plane.iter().zip(back.plane().iter()) {
            assert!(((a - b) / a).abs() <= 1e-6);
        }
    }

    #[test]
    fn reciprocal_rejects_nonpositive_and_names_pixel() {
        let plane = ImagePlane::new(2, 2, vec![1.0f64, 0.0, 2.0, 3.0]).unwrap();
        let err = DepthMap::new(plane).unwrap().reciprocal().unwrap_err();
        assert!(err.to_string().contains("(1, 0)"), "{err}");
    }

    #[test]
    fn reciprocal_skips_masked_pixels() {
        let plane = ImagePlane::new(2, 1, vec![0.0f64, 4.0]).unwrap();
        let d = DepthMap::with_mask(plane, Some(vec![false, true])).unwrap();
        let inv = d.reciprocal().unwrap();
        assert_eq!(inv.plane().get(1, 0), 0.25);
        assert_eq!(inv.mask().unwrap(), &[false, true]);
    }

    #[test]
    fn transmission_rejects_out_of_range() {
        assert!(TransmissionMap::new(ImagePlane::filled(2, 2, 1.2f32).unwrap()).is_err());
        assert!(TransmissionMap::new(ImagePlane::filled(2, 2, -0.1f32).unwrap()).is_err());
    }
}
