//! Progressive depth↔transmission refinement.
//!
//! The cascade alternates between the two coupled unknowns of the
//! scattering model. Each stage refines the optical depth `β·d` under
//! the hazy luminance as guide (the luminance of a hazy image is itself
//! a depth cue: far regions wash out toward the airlight), maps it
//! through the exponential decay to a transmission map, inverts back to
//! metric depth and smooths it under the same guide. Refinement happens
//! in the optical-depth domain rather than on raw transmission values:
//! far-field transmissions occupy a vanishing slice of `[0,1]`, so
//! filtering them directly lets nearby pixels swamp the distant signal,
//! while optical depth keeps the far field well spread.
//!
//! Stages run coarse to fine: each successive stage halves the guided
//! radii and tightens the regularizers, so a blurry first estimate is
//! progressively re-aligned to the guide's structure. Each stage
//! records its transmission, the refined depth it hands to the next
//! stage, and the recomposition residual of the scattering model, which
//! monitors whether the refinement stays consistent with the
//! observation.

use crate::dcp::{dark_channel, dcp_transmission, estimate_atmospheric_light, DcpConfig};
use crate::error::{Error, Result};
use crate::filters::{guided_filter, FilterRadius};
use crate::raster::{ensure_same_dims, DepthMap, RgbImage, TransmissionMap};
use crate::scalar::Real;
use crate::scattering::{
    check_t_floor, dehaze_with, depth_from_transmission, reconstruction_residual,
    AtmosphericLight, ScatteringCoefficient,
};

/// One cascade stage: the transmission it estimated, the refined depth
/// it produced for the next stage, and the recomposition residual.
#[derive(Debug, Clone)]
pub struct StageEstimate<T: Real> {
    /// 1-based stage number.
    pub stage_index: usize,
    /// Refined depth produced by this stage.
    pub depth: DepthMap<T>,
    /// Transmission estimated by this stage, in `[t_floor, 1]`.
    pub transmission: TransmissionMap<T>,
    /// Mean absolute recomposition error against the hazy input.
    pub residual: T,
}

/// How the cascade obtains its scattering coefficient.
#[derive(Debug, Clone, Copy)]
pub enum BetaHat<T: Real> {
    /// Use this value.
    Fixed(ScatteringCoefficient<T>),
    /// Regress against external depth when available, else fall back
    /// to 1.0 /m.
    Estimate,
}

/// Guided-filter parameters for the between-stage depth smoothing.
#[derive(Debug, Clone, Copy)]
pub struct DepthSmooth<T: Real> {
    pub radius: FilterRadius,
    pub eps: T,
}

#[derive(Debug, Clone, Copy)]
pub struct CascadeConfig<T: Real> {
    /// Number of refinement stages, at least 1.
    pub stages: usize,
    pub beta_hat: BetaHat<T>,
    /// Stage-1 parameters of the between-stage depth smoothing; later
    /// stages follow the coarse-to-fine schedule.
    pub depth_smooth: DepthSmooth<T>,
    /// Initialization parameters; `guided_radius`/`guided_eps` also act
    /// as the stage-1 parameters of the optical-depth refinement.
    pub dcp: DcpConfig<T>,
    /// Division applied to both guided-filter regularizers per stage.
    pub eps_decay: T,
    /// Lower transmission clamp used throughout the cascade.
    pub t_floor: T,
}

impl<T: Real> Default for CascadeConfig<T> {
    fn default() -> Self {
        Self {
            stages: 2,
            beta_hat: BetaHat::Estimate,
            depth_smooth: DepthSmooth {
                radius: FilterRadius::new(8).expect("static radius"),
                eps: T::of(1e-2),
            },
            dcp: DcpConfig::default(),
            eps_decay: T::of(10.0),
            t_floor: T::of(0.05),
        }
    }
}

impl<T: Real> CascadeConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.stages == 0 {
            return Err(Error::Config("cascade needs at least one stage".into()));
        }
        if self.depth_smooth.eps <= T::zero() {
            return Err(Error::Config(format!(
                "depth smoothing eps must be positive, got {}",
                self.depth_smooth.eps
            )));
        }
        if self.eps_decay < T::one() {
            return Err(Error::Config(format!(
                "eps_decay must be at least 1, got {}",
                self.eps_decay
            )));
        }
        self.dcp.validate()?;
        check_t_floor(self.t_floor)
    }

    /// Guided radius for stage `k` (1-based): halves per stage, floor 1.
    fn stage_radius(&self, base: FilterRadius, stage_index: usize) -> FilterRadius {
        let r = (base.get() >> (stage_index - 1)).max(1);
        FilterRadius::new(r).expect("radius at least 1")
    }

    /// Guided regularizer for stage `k`: divides by `eps_decay` per stage.
    fn stage_eps(&self, base: T, stage_index: usize) -> T {
        let mut eps = base;
        for _ in 1..stage_index {
            eps = eps / self.eps_decay;
        }
        eps.max(T::of(1e-8))
    }
}

/// Full cascade output.
#[derive(Debug, Clone)]
pub struct DehazeResult<T: Real> {
    pub dehazed: RgbImage<T>,
    pub atmospheric_light: AtmosphericLight<T>,
    /// All stages in order; the dehazed image uses the last stage's
    /// transmission.
    pub stages: Vec<StageEstimate<T>>,
}

fn dcp_front_end<T: Real>(
    hazy: &RgbImage<T>,
    cfg: &DcpConfig<T>,
) -> Result<(AtmosphericLight<T>, TransmissionMap<T>)> {
    let dark = dark_channel(hazy, cfg.patch_radius)?;
    let a = estimate_atmospheric_light(hazy, &dark, cfg.top_fraction)?;
    let t = dcp_transmission(hazy, a, cfg)?;
    Ok((a, t))
}

/// Depth used to seed the cascade: an externally supplied map when
/// available, otherwise the inversion of the DCP transmission estimate.
pub fn initial_depth<T: Real>(
    hazy: &RgbImage<T>,
    cfg: &CascadeConfig<T>,
    external: Option<&DepthMap<T>>,
) -> Result<DepthMap<T>> {
    cfg.validate()?;
    if let Some(d) = external {
        ensure_same_dims(hazy.dims(), d.dims(), "hazy image vs external depth")?;
        return Ok(d.clone());
    }
    let (_, t) = dcp_front_end(hazy, &cfg.dcp)?;
    let beta = resolve_beta(cfg, &t, None)?;
    depth_from_transmission(&t, beta, cfg.dcp.t_floor)
}

/// Least-squares fit of `−ln t(x) = β · d(x)` through the origin over
/// pixels with `t < 1` and `d > 0`.
pub fn estimate_beta<T: Real>(
    t: &TransmissionMap<T>,
    depth_prior: &DepthMap<T>,
) -> Result<ScatteringCoefficient<T>> {
    ensure_same_dims(t.dims(), depth_prior.dims(), "transmission vs depth prior")?;
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    let mut used = 0usize;
    for (i, d) in depth_prior.plane().iter().enumerate() {
        if !depth_prior.is_valid(i) {
            continue;
        }
        let tv = t.plane().as_slice()[i].as_f64();
        let dv = d.as_f64();
        if dv <= 0.0 || tv >= 1.0 {
            continue;
        }
        let neg_ln_t = -tv.max(f64::MIN_POSITIVE).ln();
        num += dv * neg_ln_t;
        den += dv * dv;
        used += 1;
    }
    if used == 0 || den == 0.0 {
        return Err(Error::Estimation(
            "no usable pixels (need t < 1 and depth > 0)".into(),
        ));
    }
    let beta = num / den;
    if beta <= 0.0 {
        return Err(Error::Estimation(format!(
            "regression produced non-positive beta {beta}"
        )));
    }
    ScatteringCoefficient::new(T::of(beta))
}

/// Resolution order for the cascade's scattering coefficient:
/// explicit config value, then regression against external depth,
/// then the 1.0 /m fallback.
pub fn resolve_beta<T: Real>(
    cfg: &CascadeConfig<T>,
    t: &TransmissionMap<T>,
    external_depth: Option<&DepthMap<T>>,
) -> Result<ScatteringCoefficient<T>> {
    match cfg.beta_hat {
        BetaHat::Fixed(b) => Ok(b),
        BetaHat::Estimate => match external_depth {
            Some(d) => estimate_beta(t, d),
            None => ScatteringCoefficient::new(T::one()),
        },
    }
}

/// One refinement cycle: depth → guided optical-depth refinement →
/// transmission → residual → smoothed depth for the next stage.
///
/// `stage_index` (1-based) selects the stage's position in the
/// coarse-to-fine schedule.
pub fn refine_stage<T: Real>(
    hazy: &RgbImage<T>,
    depth_k: &DepthMap<T>,
    a: AtmosphericLight<T>,
    beta: ScatteringCoefficient<T>,
    cfg: &CascadeConfig<T>,
    stage_index: usize,
) -> Result<StageEstimate<T>> {
    ensure_same_dims(hazy.dims(), depth_k.dims(), "hazy image vs stage depth")?;
    if stage_index == 0 {
        return Err(Error::Config("stage_index is 1-based".into()));
    }
    let lum = hazy.luminance();
    let b = beta.value();

    // Refine in the optical-depth domain, then map to transmission.
    let optical = depth_k.plane().map(|d| d * b);
    let refined = guided_filter(
        &lum,
        &optical,
        cfg.stage_radius(cfg.dcp.guided_radius, stage_index),
        cfg.stage_eps(cfg.dcp.guided_eps, stage_index),
    )?;
    let transmission = TransmissionMap::new(
        refined.map(|u| (-u).exp().max(cfg.t_floor).min(T::one())),
    )?;

    let dehazed = dehaze_with(hazy, &transmission, a, cfg.t_floor)?;
    let residual = reconstruction_residual(&dehazed, &transmission, a, hazy)?;

    // The next depth estimate is guided by the luminance of the stage's
    // dehazed image — the hazy observation fused with the current
    // transmission. Inverting the scattering model restores contrast in
    // regions the raw hazy luminance has already washed out, which is
    // what lets a later stage recover structure an earlier one blurred.
    let fused_guide = dehazed.luminance();
    let d_raw = depth_from_transmission(&transmission, beta, cfg.t_floor)?;
    let smoothed = guided_filter(
        &fused_guide,
        d_raw.plane(),
        cfg.stage_radius(cfg.depth_smooth.radius, stage_index),
        cfg.stage_eps(cfg.depth_smooth.eps, stage_index),
    )?;
    // Guided smoothing can overshoot below zero next to hard edges.
    let depth = DepthMap::new(smoothed.map(|v| v.max(T::zero())))?;

    Ok(StageEstimate {
        stage_index,
        depth,
        transmission,
        residual,
    })
}

/// Runs the full progressive cascade: airlight and transmission from
/// the dark-channel front end, a depth seed (external or DCP-derived),
/// `K` refinement stages, and a final inversion using the last stage's
/// transmission. Residual regressions between stages are logged.
pub fn cascade_dehaze<T: Real>(
    hazy: &RgbImage<T>,
    cfg: &CascadeConfig<T>,
    external_depth: Option<&DepthMap<T>>,
) -> Result<DehazeResult<T>> {
    cfg.validate()?;
    if let Some(d) = external_depth {
        ensure_same_dims(hazy.dims(), d.dims(), "hazy image vs external depth")?;
    }

    let (a, t_dcp) = dcp_front_end(hazy, &cfg.dcp)?;
    let beta = resolve_beta(cfg, &t_dcp, external_depth)?;
    let mut depth = match external_depth {
        Some(d) => d.clone(),
        None => depth_from_transmission(&t_dcp, beta, cfg.dcp.t_floor)?,
    };

    let mut stages: Vec<StageEstimate<T>> = Vec::with_capacity(cfg.stages);
    for k in 1..=cfg.stages {
        let est = refine_stage(hazy, &depth, a, beta, cfg, k)?;
        if let Some(prev) = stages.last() {
            if est.residual > prev.residual + T::of(1e-4) {
                log::warn!(
                    "stage {k} recomposition residual regressed: {} -> {}",
                    prev.residual,
                    est.residual
                );
            }
        }
        depth = est.depth.clone();
        stages.push(est);
    }

    let last_t = &stages.last().expect("at least one stage").transmission;
    let dehazed = dehaze_with(hazy, last_t, a, cfg.t_floor)?;
    Ok(DehazeResult {
        dehazed,
        atmospheric_light: a,
        stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::ImagePlane;
    use crate::scattering::transmission_from_depth;

    fn small_cascade_cfg() -> CascadeConfig<f64> {
        CascadeConfig {
            dcp: DcpConfig {
                patch_radius: FilterRadius::new(2).unwrap(),
                guided_radius: FilterRadius::new(3).unwrap(),
                ..DcpConfig::default()
            },
            depth_smooth: DepthSmooth {
                radius: FilterRadius::new(3).unwrap(),
                eps: 1e-3,
            },
            ..CascadeConfig::default()
        }
    }

    fn textured_hazy(w: usize, h: usize) -> RgbImage<f64> {
        RgbImage::new(
            ImagePlane::from_fn(w, h, |x, y| {
                0.4 + 0.3 * ((x as f64 * 0.8 + y as f64 * 0.3).sin() * 0.5 + 0.5)
            }),
            ImagePlane::from_fn(w, h, |x, y| {
                0.35 + 0.35 * ((x as f64 * 0.5 - y as f64 * 0.7).cos() * 0.5 + 0.5)
            }),
            ImagePlane::from_fn(w, h, |x, y| {
                0.3 + 0.4 * ((x as f64 * 0.2 + y as f64 * 0.9).sin() * 0.5 + 0.5)
            }),
        )
        .unwrap()
    }

    #[test]
    fn estimate_beta_recovers_noiseless_generator() {
        let depth = DepthMap::new(ImagePlane::from_fn(16, 16, |x, y| {
            0.5 + ((x * 16 + y) % 40) as f64 * 0.1
        }))
        .unwrap();
        let beta = ScatteringCoefficient::new(1.2).unwrap();
        let t = transmission_from_depth(&depth, beta).unwrap();
        let est = estimate_beta(&t, &depth).unwrap();
        assert!((est.value() - 1.2).abs() <= 1e-6, "{}", est.value());
    }

    #[test]
    fn estimate_beta_one_point_fit() {
        let depth = DepthMap::new(ImagePlane::filled(4, 4, 2.5f64).unwrap()).unwrap();
        let t = TransmissionMap::new(ImagePlane::filled(4, 4, 0.3f64).unwrap()).unwrap();
        let est = estimate_beta(&t, &depth).unwrap();
        let expect = -(0.3f64.ln()) / 2.5;
        assert!((est.value() - expect).abs() < 1e-12);
    }

    #[test]
    fn estimate_beta_needs_usable_pixels() {
        let depth = DepthMap::new(ImagePlane::filled(4, 4, 2.0f64).unwrap()).unwrap();
        let t_one = TransmissionMap::new(ImagePlane::filled(4, 4, 1.0f64).unwrap()).unwrap();
        assert!(matches!(
            estimate_beta(&t_one, &depth),
            Err(Error::Estimation(_))
        ));
    }

    #[test]
    fn initial_depth_passes_external_through() {
        let hazy = textured_hazy(32, 32);
        let cfg = small_cascade_cfg();
        let ext = DepthMap::new(ImagePlane::from_fn(32, 32, |x, _| 1.0 + x as f64 * 0.1)).unwrap();
        let d0 = initial_depth(&hazy, &cfg, Some(&ext)).unwrap();
        assert_eq!(d0.plane().as_slice(), ext.plane().as_slice());

        let wrong = DepthMap::new(ImagePlane::filled(16, 16, 1.0f64).unwrap()).unwrap();
        assert!(matches!(
            initial_depth(&hazy, &cfg, Some(&wrong)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn initial_depth_constant_transmission_gives_constant_depth() {
        // A constant image saturates the dark channel, so the DCP
        // transmission and the derived depth are constant.
        let hazy = RgbImage::filled(32, 32, 0.8f64, 0.8, 0.8).unwrap();
        let cfg = small_cascade_cfg();
        let d0 = initial_depth(&hazy, &cfg, None).unwrap();
        let first = d0.plane().get(0, 0);
        for v in d0.plane().iter() {
            assert!((v - first).abs() <= 1e-6);
        }
    }

    #[test]
    fn refine_stage_constant_depth_is_fixed_point() {
        let hazy = textured_hazy(32, 32);
        let cfg = small_cascade_cfg();
        let a = AtmosphericLight::homogeneous(0.85).unwrap();
        let beta = ScatteringCoefficient::new(1.0).unwrap();
        // exp(-1.0 * 1.0) ≈ 0.37 stays above the transmission floor.
        let d = DepthMap::new(ImagePlane::filled(32, 32, 1.0f64).unwrap()).unwrap();
        let stage = refine_stage(&hazy, &d, a, beta, &cfg, 1).unwrap();
        for v in stage.depth.plane().iter() {
            assert!((v - 1.0).abs() <= 1e-3, "depth drifted to {v}");
        }
    }

    #[test]
    fn cascade_single_stage_matches_refine_stage() {
        let hazy = textured_hazy(32, 32);
        let mut cfg = small_cascade_cfg();
        cfg.stages = 1;
        cfg.beta_hat = BetaHat::Fixed(ScatteringCoefficient::new(0.9).unwrap());

        let result = cascade_dehaze(&hazy, &cfg, None).unwrap();
        assert_eq!(result.stages.len(), 1);

        let (a, t_dcp) = dcp_front_end(&hazy, &cfg.dcp).unwrap();
        let beta = resolve_beta(&cfg, &t_dcp, None).unwrap();
        let d0 = depth_from_transmission(&t_dcp, beta, cfg.dcp.t_floor).unwrap();
        let stage = refine_stage(&hazy, &d0, a, beta, &cfg, 1).unwrap();
        let dehazed = dehaze_with(&hazy, &stage.transmission, a, cfg.t_floor).unwrap();

        assert_eq!(
            result.stages[0].transmission.plane().as_slice(),
            stage.transmission.plane().as_slice()
        );
        for c in 0..3 {
            assert_eq!(
                result.dehazed.channel(c).as_slice(),
                dehazed.channel(c).as_slice()
            );
        }
    }

    #[test]
    fn cascade_stage_invariants_hold() {
        let hazy = textured_hazy(32, 32);
        let cfg = small_cascade_cfg();
        let result = cascade_dehaze(&hazy, &cfg, None).unwrap();
        assert_eq!(result.stages.len(), cfg.stages);
        for (i, s) in result.stages.iter().enumerate() {
            assert_eq!(s.stage_index, i + 1);
            assert!(s.residual >= 0.0);
            for v in s.transmission.plane().iter() {
                assert!((cfg.t_floor..=1.0).contains(&v));
            }
            for v in s.depth.plane().iter() {
                assert!(v.is_finite() && v >= 0.0);
            }
        }
    }

    #[test]
    fn cascade_rejects_zero_stages() {
        let mut cfg = small_cascade_cfg();
        cfg.stages = 0;
        let hazy = textured_hazy(32, 32);
        assert!(matches!(
            cascade_dehaze(&hazy, &cfg, None),
            Err(Error::Config(_))
        ));
    }
}
