//! Training-objective numerics, evaluated on inverse-depth maps.
//!
//! These are pure evaluations: the per-stage depth objective combines a
//! pixel-wise L1 term, a forward-difference gradient term and an SSIM
//! term; stage transmission and atmospheric-light discrepancies are
//! plain mean-L1; the total sums per-stage terms plus the airlight and
//! recomposition terms. The L1 and gradient terms also return analytic
//! gradients so finite-difference checks can pin them down.

use crate::error::{Error, Result};
use crate::metrics::ssim;
use crate::raster::{ensure_same_dims, ImagePlane, InverseDepthMap, TransmissionMap};
use crate::scalar::Real;
use crate::scattering::AtmosphericLight;

/// Weighting of the pixel-wise depth term inside the combined loss.
#[derive(Debug, Clone, Copy)]
pub struct LossWeights<T: Real> {
    pub lambda: T,
}

impl<T: Real> LossWeights<T> {
    pub fn new(lambda: T) -> Result<Self> {
        if !lambda.is_finite() || lambda < T::zero() {
            return Err(Error::Config(format!(
                "lambda must be non-negative, got {lambda}"
            )));
        }
        Ok(Self { lambda })
    }
}

impl<T: Real> Default for LossWeights<T> {
    fn default() -> Self {
        Self { lambda: T::of(0.1) }
    }
}

/// Itemized objective values. `None` marks terms that were not
/// applicable for the run that produced the breakdown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown<T: Real> {
    pub l_depth: Option<T>,
    pub l_grad: Option<T>,
    pub l_ssim: Option<T>,
    pub l_combined: T,
    pub l_transmission: T,
    pub l_atmosphere: T,
    pub l_dhaze: T,
    pub total: T,
}

fn shared_mask<'a, T: Real>(
    pred: &'a InverseDepthMap<T>,
    gt: &'a InverseDepthMap<T>,
) -> Result<impl Fn(usize) -> bool + 'a> {
    ensure_same_dims(pred.dims(), gt.dims(), "pred vs gt inverse depth")?;
    Ok(move |i: usize| pred.is_valid(i) && gt.is_valid(i))
}

/// Pixel-wise L1 depth loss with its analytic gradient
/// `sign(pred − gt)/n` (zero at exact ties and outside the mask).
pub fn l_depth<T: Real>(
    pred: &InverseDepthMap<T>,
    gt: &InverseDepthMap<T>,
) -> Result<(T, ImagePlane<T>)> {
    let valid = shared_mask(pred, gt)?;
    let (w, h) = pred.dims();
    let p = pred.plane().as_slice();
    let g = gt.plane().as_slice();

    let n = (0..p.len()).filter(|&i| valid(i)).count();
    if n == 0 {
        return Err(Error::Domain("no valid pixels in depth loss".into()));
    }
    let inv_n = 1.0 / n as f64;

    let mut sum = 0.0f64;
    let mut grad = vec![T::zero(); p.len()];
    for i in 0..p.len() {
        if !valid(i) {
            continue;
        }
        let d = p[i] - g[i];
        sum += d.abs().as_f64();
        grad[i] = T::of(d.as_f64().signum() * inv_n);
        if d == T::zero() {
            grad[i] = T::zero();
        }
    }
    Ok((T::of(sum * inv_n), ImagePlane::new(w, h, grad)?))
}

/// Gradient-matching loss: mean of |∂x(pred−gt)| + |∂y(pred−gt)| using
/// forward differences, with the last column/row difference defined as
/// zero. Returns the analytic gradient with respect to `pred`.
///
/// A difference term is counted only when both of its endpoints are
/// valid; the normalizer is the valid-pixel count, matching [`l_depth`].
pub fn l_grad<T: Real>(
    pred: &InverseDepthMap<T>,
    gt: &InverseDepthMap<T>,
) -> Result<(T, ImagePlane<T>)> {
    let valid = shared_mask(pred, gt)?;
    let (w, h) = pred.dims();
    let p = pred.plane().as_slice();
    let g = gt.plane().as_slice();

    let n = (0..p.len()).filter(|&i| valid(i)).count();
    if n == 0 {
        return Err(Error::Domain("no valid pixels in gradient loss".into()));
    }
    let inv_n = 1.0 / n as f64;

    let diff = |i: usize| (p[i] - g[i]).as_f64();
    let mut sum = 0.0f64;
    let mut grad = vec![0.0f64; p.len()];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !valid(i) {
                continue;
            }
            if x + 1 < w && valid(i + 1) {
                let s = (diff(i + 1) - diff(i)).signum();
                sum += (diff(i + 1) - diff(i)).abs();
                grad[i + 1] += s;
                grad[i] -= s;
            }
            if y + 1 < h && valid(i + w) {
                let s = (diff(i + w) - diff(i)).signum();
                sum += (diff(i + w) - diff(i)).abs();
                grad[i + w] += s;
                grad[i] -= s;
            }
        }
    }
    let grad = grad.into_iter().map(|v| T::of(v * inv_n)).collect();
    Ok((T::of(sum * inv_n), ImagePlane::new(w, h, grad)?))
}

/// Structural term `(1 − mean SSIM)/2` on the pair of inverse-depth maps
/// after a joint min-max rescale to `[0,1]`. Evaluation-only: no
/// gradient is provided for this term.
pub fn l_ssim<T: Real>(pred: &InverseDepthMap<T>, gt: &InverseDepthMap<T>) -> Result<T> {
    ensure_same_dims(pred.dims(), gt.dims(), "pred vs gt inverse depth")?;
    let (lo, hi) = joint_range(pred.plane(), gt.plane());
    let range = hi - lo;
    let rescale = |plane: &ImagePlane<T>| {
        if range <= T::zero() {
            // Zero dynamic range: both maps are the same constant.
            plane.map(|_| T::zero())
        } else {
            plane.map(|v| (v - lo) / range)
        }
    };
    let (mean, _) = ssim(&rescale(pred.plane()), &rescale(gt.plane()))?;
    Ok(T::of((1.0 - mean) / 2.0))
}

fn joint_range<T: Real>(a: &ImagePlane<T>, b: &ImagePlane<T>) -> (T, T) {
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for v in a.iter().chain(b.iter()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Per-stage depth objective `λ·l_depth + l_grad + l_ssim`.
pub fn l_combined<T: Real>(
    pred: &InverseDepthMap<T>,
    gt: &InverseDepthMap<T>,
    w: LossWeights<T>,
) -> Result<T> {
    let (depth, _) = l_depth(pred, gt)?;
    let (grad, _) = l_grad(pred, gt)?;
    let ssim_term = l_ssim(pred, gt)?;
    Ok(w.lambda * depth + grad + ssim_term)
}

/// Mean-L1 discrepancy between two transmission maps (the per-stage
/// transmission objective).
pub fn transmission_loss<T: Real>(
    est: &TransmissionMap<T>,
    reference: &TransmissionMap<T>,
) -> Result<T> {
    ensure_same_dims(est.dims(), reference.dims(), "estimated vs reference t")?;
    let sum: f64 = est
        .plane()
        .iter()
        .zip(reference.plane().iter())
        .map(|(a, b)| (a - b).abs().as_f64())
        .sum();
    Ok(T::of(sum / est.plane().len() as f64))
}

/// Mean-L1 discrepancy between two airlight estimates.
pub fn atmosphere_loss<T: Real>(est: AtmosphericLight<T>, reference: AtmosphericLight<T>) -> T {
    let sum: f64 = (0..3)
        .map(|c| (est.channel(c) - reference.channel(c)).abs().as_f64())
        .sum();
    T::of(sum / 3.0)
}

/// Aggregates the framework objective: the sum over stages of the
/// combined depth loss and the transmission loss, plus the airlight and
/// recomposition terms.
pub fn total_objective<T: Real>(
    stage_depth_losses: &[T],
    stage_transmission_losses: &[T],
    l_a: T,
    l_dhaze: T,
) -> Result<LossBreakdown<T>> {
    if stage_depth_losses.len() != stage_transmission_losses.len() {
        return Err(Error::Dimension(format!(
            "stage lists differ in length: {} vs {}",
            stage_depth_losses.len(),
            stage_transmission_losses.len()
        )));
    }
    let combined: f64 = stage_depth_losses.iter().map(|v| v.as_f64()).sum();
    let transmission: f64 = stage_transmission_losses.iter().map(|v| v.as_f64()).sum();
    let total = combined + transmission + l_a.as_f64() + l_dhaze.as_f64();
    Ok(LossBreakdown {
        l_depth: None,
        l_grad: None,
        l_ssim: None,
        l_combined: T::of(combined),
        l_transmission: T::of(transmission),
        l_atmosphere: l_a,
        l_dhaze,
        total: T::of(total),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inv_map(plane: ImagePlane<f64>) -> InverseDepthMap<f64> {
        InverseDepthMap::new(plane).unwrap()
    }

    fn wavy(w: usize, h: usize, k: u64) -> ImagePlane<f64> {
        ImagePlane::from_fn(w, h, |x, y| {
            0.2 + 0.6 * ((x as f64 * 0.7 + y as f64 * 1.3 + k as f64).sin() * 0.5 + 0.5)
        })
    }

    #[test]
    fn l_depth_zero_at_coincidence() {
        let a = inv_map(wavy(12, 12, 1));
        let (v, grad) = l_depth(&a, &a).unwrap();
        assert_eq!(v, 0.0);
        assert!(grad.iter().all(|g| g == 0.0));
    }

    #[test]
    fn l_depth_constant_offset() {
        let gt = inv_map(wavy(10, 10, 2));
        let pred = inv_map(gt.plane().map(|v| v + 0.1));
        let (v, grad) = l_depth(&pred, &gt).unwrap();
        assert!((v - 0.1).abs() < 1e-12);
        let expect = 1.0 / 100.0;
        assert!(grad.iter().all(|g| (g - expect).abs() < 1e-15));
    }

    #[test]
    fn l_depth_respects_mask() {
        let plane = ImagePlane::new(2, 1, vec![1.0f64, 5.0]).unwrap();
        let gt =
            InverseDepthMap::with_mask(plane.clone(), Some(vec![true, false])).unwrap();
        let pred_plane = ImagePlane::new(2, 1, vec![1.5f64, 100.0]).unwrap();
        let pred =
            InverseDepthMap::with_mask(pred_plane, Some(vec![true, false])).unwrap();
        let (v, _) = l_depth(&pred, &gt).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn l_depth_empty_mask_is_domain_error() {
        let plane = ImagePlane::filled(2, 2, 1.0f64).unwrap();
        let m = InverseDepthMap::with_mask(plane, Some(vec![false; 4])).unwrap();
        assert!(matches!(l_depth(&m, &m), Err(Error::Domain(_))));
    }

    #[test]
    fn l_grad_zero_for_constant_offsets() {
        let gt = inv_map(wavy(10, 10, 3));
        let pred = inv_map(gt.plane().map(|v| v + 0.25));
        let (v, _) = l_grad(&pred, &gt).unwrap();
        assert!(v.abs() < 1e-12);

        let (same, _) = l_grad(&gt, &gt).unwrap();
        assert_eq!(same, 0.0);
    }

    #[test]
    fn l_ssim_zero_at_coincidence_and_symmetric() {
        let a = inv_map(wavy(16, 16, 4));
        let b = inv_map(wavy(16, 16, 9));
        assert!(l_ssim(&a, &a).unwrap().abs() < 1e-12);
        assert_eq!(l_ssim(&a, &b).unwrap(), l_ssim(&b, &a).unwrap());
    }

    #[test]
    fn l_ssim_dissimilar_constants() {
        // Constants rescale to 0 vs 1; SSIM collapses to C1/(1+C1).
        let a = inv_map(ImagePlane::filled(16, 16, 2.0f64).unwrap());
        let b = inv_map(ImagePlane::filled(16, 16, 7.0f64).unwrap());
        let v = l_ssim(&a, &b).unwrap();
        let c1 = 1e-4;
        let expect = 0.5 * (1.0 - c1 / (1.0 + c1));
        assert!((v - expect).abs() < 1e-9, "{v} vs {expect}");
    }

    #[test]
    fn l_combined_structure() {
        let gt = inv_map(wavy(16, 16, 5));
        let pred = inv_map(gt.plane().map(|v| v + 0.2));

        // Zero at coincidence for any lambda.
        for lambda in [0.0, 0.1, 2.0] {
            let w = LossWeights::new(lambda).unwrap();
            assert!(l_combined(&gt, &gt, w).unwrap().abs() < 1e-12);
        }

        // lambda = 0 drops the depth term.
        let w0 = LossWeights::new(0.0).unwrap();
        let (grad, _) = l_grad(&pred, &gt).unwrap();
        let ssim_term = l_ssim(&pred, &gt).unwrap();
        let combined0 = l_combined(&pred, &gt, w0).unwrap();
        assert!((combined0 - (grad + ssim_term)).abs() < 1e-12);

        // Term-by-term cross-check at lambda = 0.1 with constant offset:
        // depth term is exactly 0.1 * 0.2, gradient term vanishes.
        let w = LossWeights::new(0.1).unwrap();
        let combined = l_combined(&pred, &gt, w).unwrap();
        assert!((combined - (0.1 * 0.2 + ssim_term)).abs() < 1e-9);

        // Monotone in lambda when the depth term is positive.
        let w2 = LossWeights::new(0.5).unwrap();
        assert!(l_combined(&pred, &gt, w2).unwrap() > combined);
    }

    #[test]
    fn total_objective_arithmetic() {
        let b = total_objective(&[0.5f64], &[0.25], 0.1, 0.05).unwrap();
        assert!((b.total - 0.9).abs() < 1e-12);
        assert_eq!(b.l_combined, 0.5);
        assert_eq!(b.l_transmission, 0.25);

        let zero = total_objective::<f64>(&[0.0, 0.0], &[0.0, 0.0], 0.0, 0.0).unwrap();
        assert_eq!(zero.total, 0.0);

        // Stage order does not change the total.
        let ab = total_objective(&[0.3f64, 0.7], &[0.1, 0.2], 0.0, 0.0).unwrap();
        let ba = total_objective(&[0.7f64, 0.3], &[0.2, 0.1], 0.0, 0.0).unwrap();
        assert_eq!(ab.total, ba.total);
    }

    #[test]
    fn total_objective_length_mismatch() {
        assert!(matches!(
            total_objective(&[0.5f64], &[0.25, 0.1], 0.0, 0.0),
            Err(Error::Dimension(_))
        ));
    }
}
