//! Low-level raster operators: morphological minimum, box mean, and the
//! guided filter.
//!
//! The minimum filter ships in two forms: a brute-force reference and a
//! separable streaming implementation whose cost per pixel does not
//! depend on the window radius. Both use replicate (clamp) borders and
//! produce bit-identical output, which the test suite checks
//! exhaustively. The box mean runs on a summed-area table with
//! compensated f64 accumulation, and the guided filter composes box
//! means in f64 working buffers.

use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, ImagePlane};
use crate::scalar::Real;

/// Half-width of a square filter window; the window spans
/// `(2r+1) x (2r+1)` pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterRadius {
    r: usize,
}

impl FilterRadius {
    pub fn new(r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::Config("filter radius must be at least 1".into()));
        }
        Ok(Self { r })
    }

    pub fn get(&self) -> usize {
        self.r
    }

    pub fn window(&self) -> usize {
        2 * self.r + 1
    }

    fn check_fits(&self, dims: (usize, usize)) -> Result<()> {
        let w = self.window();
        if w > dims.0 || w > dims.1 {
            return Err(Error::Config(format!(
                "window {w}x{w} does not fit a {}x{} plane",
                dims.0, dims.1
            )));
        }
        Ok(())
    }
}

/// Reference minimum filter: scans the full window per pixel.
pub fn min_filter_naive<T: Real>(src: &ImagePlane<T>, r: FilterRadius) -> Result<ImagePlane<T>> {
    r.check_fits(src.dims())?;
    let (w, h) = src.dims();
    let rad = r.get() as isize;
    Ok(ImagePlane::from_fn(w, h, |x, y| {
        let mut m = src.get(x, y);
        for dy in -rad..=rad {
            let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
            for dx in -rad..=rad {
                let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                m = m.min(src.get(xx, yy));
            }
        }
        m
    }))
}

/// Streaming minimum filter, bit-identical to [`min_filter_naive`].
///
/// Separates the square window into a horizontal and a vertical pass;
/// each 1-D pass uses the block prefix/suffix running-minimum technique,
/// which costs three comparisons per element regardless of the radius.
pub fn min_filter_fast<T: Real>(src: &ImagePlane<T>, r: FilterRadius) -> Result<ImagePlane<T>> {
    r.check_fits(src.dims())?;
    let (w, h) = src.dims();
    let rad = r.get();

    let mut horiz = vec![T::zero(); w * h];
    let mut scratch = RowMinScratch::new(w.max(h), rad);
    let mut line = vec![T::zero(); w.max(h)];
    let mut out_line = vec![T::zero(); w.max(h)];

    for y in 0..h {
        let row = &src.as_slice()[y * w..(y + 1) * w];
        scratch.sliding_min(row, &mut out_line[..w]);
        horiz[y * w..(y + 1) * w].copy_from_slice(&out_line[..w]);
    }

    let mut data = vec![T::zero(); w * h];
    for x in 0..w {
        for y in 0..h {
            line[y] = horiz[y * w + x];
        }
        scratch.sliding_min(&line[..h], &mut out_line[..h]);
        for y in 0..h {
            data[y * w + x] = out_line[y];
        }
    }

    ImagePlane::new(w, h, data)
}

/// Reusable buffers for the 1-D block running-minimum pass.
struct RowMinScratch<T: Real> {
    rad: usize,
    padded: Vec<T>,
    prefix: Vec<T>,
    suffix: Vec<T>,
}

impl<T: Real> RowMinScratch<T> {
    fn new(max_len: usize, rad: usize) -> Self {
        let m = max_len + 2 * rad;
        Self {
            rad,
            padded: vec![T::zero(); m],
            prefix: vec![T::zero(); m],
            suffix: vec![T::zero(); m],
        }
    }

    /// Sliding window minimum with replicate borders, window `2*rad+1`.
    fn sliding_min(&mut self, src: &[T], out: &mut [T]) {
        let n = src.len();
        let rad = self.rad;
        let win = 2 * rad + 1;
        let m = n + 2 * rad;
        let padded = &mut self.padded[..m];

        padded[..rad].fill(src[0]);
        padded[rad..rad + n].copy_from_slice(src);
        padded[rad + n..].fill(src[n - 1]);

        let prefix = &mut self.prefix[..m];
        let suffix = &mut self.suffix[..m];

        let mut start = 0;
        while start < m {
            let end = (start + win).min(m);
            let mut run = padded[start];
            for i in start..end {
                run = run.min(padded[i]);
                prefix[i] = run;
            }
            let mut run = padded[end - 1];
            for i in (start..end).rev() {
                run = run.min(padded[i]);
                suffix[i] = run;
            }
            start = end;
        }

        for (j, o) in out.iter_mut().enumerate().take(n) {
            *o = suffix[j].min(prefix[j + win - 1]);
        }
    }
}

/// Box mean over the clamped window, f64 summed-area table inside.
pub fn box_filter<T: Real>(src: &ImagePlane<T>, r: FilterRadius) -> Result<ImagePlane<T>> {
    r.check_fits(src.dims())?;
    let (w, h) = src.dims();
    let means = box_mean_f64(
        &src.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
        w,
        h,
        r.get(),
    );
    ImagePlane::new(w, h, means.into_iter().map(T::of).collect())
}

/// Box mean on raw f64 data. The summed-area table is built with
/// Kahan-compensated row sums so drift stays bounded on large planes.
fn box_mean_f64(data: &[f64], w: usize, h: usize, rad: usize) -> Vec<f64> {
    let sw = w + 1;
    let mut sat = vec![0.0f64; sw * (h + 1)];
    for y in 0..h {
        let mut run = 0.0f64;
        let mut comp = 0.0f64;
        for x in 0..w {
            let v = data[y * w + x];
            let t = run + (v + comp);
            comp = (v + comp) - (t - run);
            run = t;
            sat[(y + 1) * sw + x + 1] = sat[y * sw + x + 1] + run;
        }
    }

    let mut out = vec![0.0f64; w * h];
    for y in 0..h {
        let y0 = y.saturating_sub(rad);
        let y1 = (y + rad + 1).min(h);
        for x in 0..w {
            let x0 = x.saturating_sub(rad);
            let x1 = (x + rad + 1).min(w);
            let sum = sat[y1 * sw + x1] - sat[y0 * sw + x1] - sat[y1 * sw + x0]
                + sat[y0 * sw + x0];
            out[y * w + x] = sum / ((y1 - y0) * (x1 - x0)) as f64;
        }
    }
    out
}

/// Edge-preserving smoothing via the local linear model
/// `out = mean_a · guide + mean_b` with
/// `a = cov(guide, src) / (var(guide) + eps)` and
/// `b = mean(src) − a · mean(guide)` per window.
pub fn guided_filter<T: Real>(
    guide: &ImagePlane<T>,
    src: &ImagePlane<T>,
    r: FilterRadius,
    eps: T,
) -> Result<ImagePlane<T>> {
    ensure_same_dims(guide.dims(), src.dims(), "guide vs src")?;
    r.check_fits(src.dims())?;
    if !eps.is_finite() || eps <= T::zero() {
        return Err(Error::Config(format!(
            "guided filter eps must be positive, got {eps}"
        )));
    }
    let (w, h) = src.dims();
    let rad = r.get();
    let epsf = eps.as_f64();

    let g: Vec<f64> = guide.iter().map(|v| v.as_f64()).collect();
    let s: Vec<f64> = src.iter().map(|v| v.as_f64()).collect();
    let gs: Vec<f64> = g.iter().zip(&s).map(|(a, b)| a * b).collect();
    let gg: Vec<f64> = g.iter().map(|a| a * a).collect();

    let mean_g = box_mean_f64(&g, w, h, rad);
    let mean_s = box_mean_f64(&s, w, h, rad);
    let corr_gs = box_mean_f64(&gs, w, h, rad);
    let corr_gg = box_mean_f64(&gg, w, h, rad);

    let n = w * h;
    let mut a = vec![0.0f64; n];
    let mut b = vec![0.0f64; n];
    for i in 0..n {
        let var_g = corr_gg[i] - mean_g[i] * mean_g[i];
        let cov_gs = corr_gs[i] - mean_g[i] * mean_s[i];
        a[i] = cov_gs / (var_g + epsf);
        b[i] = mean_s[i] - a[i] * mean_g[i];
    }

    let mean_a = box_mean_f64(&a, w, h, rad);
    let mean_b = box_mean_f64(&b, w, h, rad);

    let data = (0..n)
        .map(|i| T::of(mean_a[i] * g[i] + mean_b[i]))
        .collect();
    ImagePlane::new(w, h, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_plane(w: usize, h: usize, seed: u64) -> ImagePlane<f64> {
        // Small deterministic LCG, good enough for filter tests.
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        ImagePlane::from_fn(w, h, |_, _| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        })
    }

    #[test]
    fn radius_validation() {
        assert!(FilterRadius::new(0).is_err());
        let r = FilterRadius::new(3).unwrap();
        let p = ImagePlane::filled(5, 5, 1.0f64).unwrap();
        assert!(matches!(min_filter_naive(&p, r), Err(Error::Config(_))));
        assert!(matches!(min_filter_fast(&p, r), Err(Error::Config(_))));
        assert!(matches!(box_filter(&p, r), Err(Error::Config(_))));
    }

    #[test]
    fn min_filter_constant_plane() {
        let p = ImagePlane::filled(8, 8, 0.7f64).unwrap();
        let r = FilterRadius::new(2).unwrap();
        assert!(min_filter_naive(&p, r).unwrap().iter().all(|v| v == 0.7));
        assert!(min_filter_fast(&p, r).unwrap().iter().all(|v| v == 0.7));
    }

    #[test]
    fn min_filter_single_zero_spreads() {
        let mut data = vec![1.0f64; 49];
        data[3 * 7 + 3] = 0.0;
        let p = ImagePlane::new(7, 7, data).unwrap();
        let r = FilterRadius::new(1).unwrap();
        let out = min_filter_fast(&p, r).unwrap();
        for y in 0..7 {
            for x in 0..7 {
                let in_block = (2..=4).contains(&x) && (2..=4).contains(&y);
                assert_eq!(out.get(x, y), if in_block { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn min_filter_bounded_by_source() {
        let p = noise_plane(16, 16, 3);
        let r = FilterRadius::new(2).unwrap();
        let out = min_filter_naive(&p, r).unwrap();
        for (o, s) in out.iter().zip(p.iter()) {
            assert!(o <= s);
        }
    }

    #[test]
    fn min_filter_monotone_ramp() {
        // Increasing row ramp: the window minimum sits at column max(0, x-r).
        let p = ImagePlane::from_fn(10, 5, |x, _| x as f64 * 0.1);
        let r = FilterRadius::new(2).unwrap();
        let out = min_filter_fast(&p, r).unwrap();
        for y in 0..5 {
            for x in 0..10 {
                assert_eq!(out.get(x, y), p.get(x.saturating_sub(2), y));
            }
        }
    }

    #[test]
    fn fast_equals_naive_on_noise() {
        for seed in 0..20u64 {
            let p = noise_plane(17, 13, seed);
            for rad in [1usize, 2, 3, 5] {
                let r = FilterRadius::new(rad).unwrap();
                let a = min_filter_naive(&p, r).unwrap();
                let b = min_filter_fast(&p, r).unwrap();
                assert_eq!(a.as_slice(), b.as_slice(), "seed {seed} r {rad}");
            }
        }
    }

    #[test]
    fn box_filter_constant_plane() {
        let p = ImagePlane::filled(9, 9, 0.3f64).unwrap();
        let r = FilterRadius::new(3).unwrap();
        for v in box_filter(&p, r).unwrap().iter() {
            assert!((v - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn box_filter_impulse_interior() {
        let mut data = vec![0.0f64; 81];
        data[4 * 9 + 4] = 1.0;
        let p = ImagePlane::new(9, 9, data).unwrap();
        let out = box_filter(&p, FilterRadius::new(1).unwrap()).unwrap();
        for y in 3..=5 {
            for x in 3..=5 {
                assert!((out.get(x, y) - 1.0 / 9.0).abs() < 1e-12);
            }
        }
        assert_eq!(out.get(7, 7), 0.0);
    }

    #[test]
    fn box_filter_matches_direct_mean() {
        let p = noise_plane(12, 12, 11);
        let rad = 2usize;
        let out = box_filter(&p, FilterRadius::new(rad).unwrap()).unwrap();
        for y in 0..12usize {
            for x in 0..12usize {
                let y0 = y.saturating_sub(rad);
                let y1 = (y + rad + 1).min(12);
                let x0 = x.saturating_sub(rad);
                let x1 = (x + rad + 1).min(12);
                let mut sum = 0.0;
                for yy in y0..y1 {
                    for xx in x0..x1 {
                        sum += p.get(xx, yy);
                    }
                }
                let mean = sum / ((y1 - y0) * (x1 - x0)) as f64;
                assert!((out.get(x, y) - mean).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn box_filter_preserves_mass_of_interior_content() {
        // Content confined to pixels at least 2r from the border sees no
        // window truncation, so the total mass is preserved exactly.
        let rad = 3usize;
        let p = ImagePlane::from_fn(24, 24, |x, y| {
            if (2 * rad..24 - 2 * rad).contains(&x) && (2 * rad..24 - 2 * rad).contains(&y) {
                ((x * 7 + y * 13) % 29) as f64 / 28.0
            } else {
                0.0
            }
        });
        let out = box_filter(&p, FilterRadius::new(rad).unwrap()).unwrap();
        let sum_in: f64 = p.iter().sum();
        let sum_out: f64 = out.iter().sum();
        assert!((sum_in - sum_out).abs() / sum_in <= 1e-5);
    }

    #[test]
    fn guided_filter_rejects_bad_eps() {
        let p = ImagePlane::filled(8, 8, 0.5f64).unwrap();
        let r = FilterRadius::new(2).unwrap();
        assert!(matches!(
            guided_filter(&p, &p, r, 0.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            guided_filter(&p, &p, r, -1.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn guided_filter_constant_src_passthrough() {
        let guide = noise_plane(16, 16, 5);
        let src = ImagePlane::filled(16, 16, 0.42f64).unwrap();
        let out = guided_filter(&guide, &src, FilterRadius::new(3).unwrap(), 1e-3).unwrap();
        for v in out.iter() {
            assert!((v - 0.42).abs() <= 1e-5);
        }
    }

    #[test]
    fn guided_filter_identity_limit() {
        let p = noise_plane(16, 16, 9); // high-variance plane
        let out = guided_filter(&p, &p, FilterRadius::new(2).unwrap(), 1e-8).unwrap();
        let mad: f64 =
            out.iter().zip(p.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>() / 256.0;
        assert!(mad <= 1e-3, "mean abs deviation {mad}");
    }

    #[test]
    fn guided_filter_constant_in_constant_out() {
        let c = ImagePlane::filled(12, 12, 0.65f64).unwrap();
        let out = guided_filter(&c, &c, FilterRadius::new(3).unwrap(), 1e-3).unwrap();
        for v in out.iter() {
            assert!((v - 0.65).abs() <= 1e-6);
        }
    }
}
