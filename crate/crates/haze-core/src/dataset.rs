//! Procedural RGB-D scenes, haze synthesis, and file-backed datasets.
//!
//! Scenes are generated deterministically from a seed: a receding
//! background ramp plus textured boxes, ramps and bands, each with its
//! own albedo pattern so depth edges coincide with color edges. Haze
//! parameters follow the synthesis protocol (homogeneous airlight in
//! `[0.7, 1.0]`, scattering coefficient in `[0.5, 1.5]`, three draws per
//! image by default). Datasets persist as 8-bit RGB PNGs, 16-bit
//! millimeter depth PNGs (zero = invalid), and a CSV manifest; the hazy
//! image is synthesized from the *quantized* clear/depth values, so a
//! manifest entry can be re-verified bit-exactly from its files.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{DepthMap, ImagePlane, RgbImage, TransmissionMap};
use crate::scalar::Real;
use crate::scattering::{hazify, transmission_from_depth, AtmosphericLight, ScatteringCoefficient};

/// Draws per clear image used by the synthesis protocol.
pub const DEFAULT_HAZE_DRAWS: usize = 3;

/// Airlight range sampled by the protocol.
pub const AIRLIGHT_RANGE: (f64, f64) = (0.7, 1.0);
/// Scattering-coefficient range sampled by the protocol.
pub const BETA_RANGE: (f64, f64) = (0.5, 1.5);

/// One haze draw: homogeneous airlight, scattering coefficient, and the
/// seed that identifies the draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazeParams {
    /// Homogeneous airlight intensity.
    pub a: f64,
    /// Scattering coefficient, 1/m.
    pub beta: f64,
    /// Seed identifying this draw.
    pub seed: u64,
}

impl HazeParams {
    pub fn airlight<T: Real>(&self) -> Result<AtmosphericLight<T>> {
        AtmosphericLight::homogeneous(T::of(self.a))
    }

    pub fn scattering<T: Real>(&self) -> Result<ScatteringCoefficient<T>> {
        ScatteringCoefficient::new(T::of(self.beta))
    }
}

/// splitmix64-style mixing so every (seed, index) pair addresses an
/// independent stream.
fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform, independent protocol draws; deterministic per (seed, index).
pub fn sample_haze_params(seed: u64, count_per_image: usize) -> Vec<HazeParams> {
    (0..count_per_image)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, i as u64));
            let a = rng.gen_range(AIRLIGHT_RANGE.0..=AIRLIGHT_RANGE.1);
            let beta = rng.gen_range(BETA_RANGE.0..=BETA_RANGE.1);
            let draw_seed = rng.gen::<u64>();
            HazeParams {
                a,
                beta,
                seed: draw_seed,
            }
        })
        .collect()
}

/// Parameters of one procedural scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    /// Nearest scene depth, meters.
    pub min_depth_m: f64,
    /// Farthest scene depth, meters.
    pub max_depth_m: f64,
    /// Number of foreground primitives (boxes, ramps, bands).
    pub primitive_count: usize,
    /// Albedo stripe frequency, cycles across the image.
    pub texture_frequency: f64,
    /// Amplitude of the per-pixel albedo noise.
    pub texture_noise: f64,
    pub seed: u64,
}

impl SceneSpec {
    /// 64x64 textured scene with the given depth range.
    pub fn with_depth_range(seed: u64, min_depth_m: f64, max_depth_m: f64) -> Self {
        Self {
            width: 64,
            height: 64,
            min_depth_m,
            max_depth_m,
            primitive_count: 6,
            texture_frequency: 6.0,
            texture_noise: 0.08,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("scene dimensions must be positive".into()));
        }
        if !(self.min_depth_m > 0.0 && self.min_depth_m < self.max_depth_m) {
            return Err(Error::Config(format!(
                "degenerate depth range [{}, {}]",
                self.min_depth_m, self.max_depth_m
            )));
        }
        if self.texture_frequency <= 0.0 || self.texture_noise < 0.0 {
            return Err(Error::Config("texture parameters out of range".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum PrimitiveKind {
    Box,
    Ramp,
    Band,
}

struct Primitive {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
    d_top: f64,
    d_bottom: f64,
    base: [f64; 3],
    omega_x: f64,
    omega_y: f64,
    phase: [f64; 3],
}

impl Primitive {
    fn mean_depth(&self) -> f64 {
        0.5 * (self.d_top + self.d_bottom)
    }
}

/// Deterministic textured RGB-D scene. Depths lie in the spec's range,
/// albedos in `[0.02, 0.98]` with enough per-channel structure that a
/// patch minimum carries signal.
pub fn gen_scene<T: Real>(spec: &SceneSpec) -> Result<(RgbImage<T>, DepthMap<T>)> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let span = spec.max_depth_m - spec.min_depth_m;
    let mid = spec.min_depth_m + 0.5 * span;

    // Background: vertical ramp receding from mid depth at the bottom of
    // the frame to the maximum depth at the top.
    let mut prims = vec![Primitive {
        x0: 0,
        y0: 0,
        x1: w,
        y1: h,
        d_top: spec.max_depth_m,
        d_bottom: mid,
        base: random_base(&mut rng),
        omega_x: tex_omega(&mut rng, spec.texture_frequency, w),
        omega_y: tex_omega(&mut rng, spec.texture_frequency, h),
        phase: random_phases(&mut rng),
    }];

    for k in 0..spec.primitive_count {
        let kind = match k % 3 {
            0 => PrimitiveKind::Box,
            1 => PrimitiveKind::Ramp,
            _ => PrimitiveKind::Band,
        };
        let (x0, y0, x1, y1) = match kind {
            PrimitiveKind::Band => {
                let bh = rng.gen_range(h / 8..=(h / 4).max(h / 8 + 1));
                let y0 = rng.gen_range(0..h.saturating_sub(bh).max(1));
                (0, y0, w, (y0 + bh).min(h))
            }
            _ => {
                let pw = rng.gen_range(w / 6..=(w / 2).max(w / 6 + 1));
                let ph = rng.gen_range(h / 6..=(h / 2).max(h / 6 + 1));
                let x0 = rng.gen_range(0..w.saturating_sub(pw).max(1));
                let y0 = rng.gen_range(0..h.saturating_sub(ph).max(1));
                (x0, y0, (x0 + pw).min(w), (y0 + ph).min(h))
            }
        };
        // Foreground depths stay clear of the background maximum.
        let d_lo = spec.min_depth_m;
        let d_hi = spec.min_depth_m + 0.75 * span;
        let (d_top, d_bottom) = match kind {
            PrimitiveKind::Ramp => {
                let a = rng.gen_range(d_lo..d_hi);
                let b = rng.gen_range(d_lo..d_hi);
                (a.max(b), a.min(b))
            }
            _ => {
                let d = rng.gen_range(d_lo..d_hi);
                (d, d)
            }
        };
        prims.push(Primitive {
            x0,
            y0,
            x1,
            y1,
            d_top,
            d_bottom,
            base: random_base(&mut rng),
            omega_x: tex_omega(&mut rng, spec.texture_frequency, w),
            omega_y: tex_omega(&mut rng, spec.texture_frequency, h),
            phase: random_phases(&mut rng),
        });
    }

    // Far-to-near painter's order; the background stays first.
    prims[1..].sort_by(|a, b| {
        b.mean_depth()
            .partial_cmp(&a.mean_depth())
            .expect("finite depths")
    });

    let mut depth = vec![0.0f64; w * h];
    let mut albedo = [vec![0.0f64; w * h], vec![0.0f64; w * h], vec![0.0f64; w * h]];

    for p in &prims {
        let rows = (p.y1 - p.y0).max(1) as f64;
        for y in p.y0..p.y1 {
            let frac = (y - p.y0) as f64 / rows;
            let d = p.d_top + (p.d_bottom - p.d_top) * frac;
            for x in p.x0..p.x1 {
                let i = y * w + x;
                depth[i] = d.clamp(spec.min_depth_m, spec.max_depth_m);
                let s = p.omega_x * x as f64 + p.omega_y * y as f64;
                for c in 0..3 {
                    let tex = 0.55 + 0.45 * (s + p.phase[c]).sin();
                    albedo[c][i] = p.base[c] * tex;
                }
            }
        }
    }

    // Per-pixel, per-channel value noise keeps the patch minima busy.
    for plane in albedo.iter_mut() {
        for v in plane.iter_mut() {
            let n: f64 = rng.gen_range(-1.0..1.0);
            *v = (*v + spec.texture_noise * n).clamp(0.02, 0.98);
        }
    }

    let to_plane = |data: &Vec<f64>| {
        ImagePlane::new(w, h, data.iter().map(|&v| T::of(v)).collect())
    };
    let rgb = RgbImage::new(to_plane(&albedo[0])?, to_plane(&albedo[1])?, to_plane(&albedo[2])?)?;
    let depth_plane = ImagePlane::new(w, h, depth.iter().map(|&v| T::of(v)).collect())?;
    Ok((rgb, DepthMap::new(depth_plane)?))
}

fn random_base(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [
        rng.gen_range(0.25..0.95),
        rng.gen_range(0.25..0.95),
        rng.gen_range(0.25..0.95),
    ]
}

fn random_phases(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let tau = std::f64::consts::TAU;
    [
        rng.gen_range(0.0..tau),
        rng.gen_range(0.0..tau),
        rng.gen_range(0.0..tau),
    ]
}

fn tex_omega(rng: &mut ChaCha8Rng, frequency: f64, extent: usize) -> f64 {
    let cycles = frequency * rng.gen_range(0.5..1.5);
    std::f64::consts::TAU * cycles / extent as f64
}

// ---------------------------------------------------------------------
// Quantization and PNG I/O
// ---------------------------------------------------------------------

/// Snaps reflectance values onto the 8-bit grid (round(v*255)/255).
pub fn quantize_unit<T: Real>(img: &RgbImage<T>) -> RgbImage<T> {
    img.map(|v| {
        let q = (v.as_f64().clamp(0.0, 1.0) * 255.0).round() / 255.0;
        T::of(q)
    })
}

/// Snaps depths onto the 16-bit millimeter grid used by depth files.
pub fn quantize_depth_mm<T: Real>(depth: &DepthMap<T>) -> Result<DepthMap<T>> {
    let plane = depth.plane().map(|v| {
        let mm = (v.as_f64() * 1000.0).round().clamp(0.0, 65535.0);
        T::of(mm / 1000.0)
    });
    DepthMap::with_mask(plane, depth.mask().map(|m| m.to_vec()))
}

/// Writes an RGB image as an 8-bit PNG.
pub fn save_rgb<T: Real>(img: &RgbImage<T>, path: &Path) -> Result<()> {
    let (w, h) = img.dims();
    let mut buf = image::RgbImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let px = [
                unit_to_u8(img.red().get(x, y)),
                unit_to_u8(img.green().get(x, y)),
                unit_to_u8(img.blue().get(x, y)),
            ];
            buf.put_pixel(x as u32, y as u32, image::Rgb(px));
        }
    }
    buf.save(path).map_err(|e| Error::image(path, e))
}

fn unit_to_u8<T: Real>(v: T) -> u8 {
    (v.as_f64().clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Reads an 8-bit RGB PNG into unit-range planes.
pub fn load_rgb<T: Real>(path: &Path) -> Result<RgbImage<T>> {
    let dynimg = image::open(path).map_err(|e| Error::image(path, e))?;
    let rgb = match dynimg {
        image::DynamicImage::ImageRgb8(buf) => buf,
        other => {
            return Err(Error::Format(format!(
                "{}: expected 8-bit RGB PNG, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let mut planes = [
        Vec::with_capacity(w * h),
        Vec::with_capacity(w * h),
        Vec::with_capacity(w * h),
    ];
    for px in rgb.pixels() {
        for c in 0..3 {
            planes[c].push(T::of(px.0[c] as f64 / 255.0));
        }
    }
    let [r, g, b] = planes;
    RgbImage::new(
        ImagePlane::new(w, h, r)?,
        ImagePlane::new(w, h, g)?,
        ImagePlane::new(w, h, b)?,
    )
}

/// Writes a depth map as a 16-bit grayscale PNG in millimeters.
/// Invalid pixels are stored as the zero sentinel.
pub fn save_depth<T: Real>(depth: &DepthMap<T>, path: &Path) -> Result<()> {
    let (w, h) = depth.dims();
    let mut buf: image::ImageBuffer<image::Luma<u16>, Vec<u16>> =
        image::ImageBuffer::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let mm = if depth.is_valid(i) {
                (depth.plane().get(x, y).as_f64() * 1000.0)
                    .round()
                    .clamp(0.0, 65535.0) as u16
            } else {
                0
            };
            buf.put_pixel(x as u32, y as u32, image::Luma([mm]));
        }
    }
    buf.save(path).map_err(|e| Error::image(path, e))
}

/// Reads a 16-bit grayscale millimeter PNG; zero pixels become invalid.
pub fn load_depth<T: Real>(path: &Path) -> Result<DepthMap<T>> {
    let dynimg = image::open(path).map_err(|e| Error::image(path, e))?;
    let gray = match dynimg {
        image::DynamicImage::ImageLuma16(buf) => buf,
        other => {
            return Err(Error::Format(format!(
                "{}: expected 16-bit grayscale PNG depth, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let mut data = Vec::with_capacity(w * h);
    let mut mask = Vec::with_capacity(w * h);
    let mut any_invalid = false;
    for px in gray.pixels() {
        let mm = px.0[0];
        if mm == 0 {
            any_invalid = true;
            mask.push(false);
            data.push(T::zero());
        } else {
            mask.push(true);
            data.push(T::of(mm as f64 / 1000.0));
        }
    }
    let plane = ImagePlane::new(w, h, data)?;
    DepthMap::with_mask(plane, any_invalid.then_some(mask))
}

/// Loads a clear/depth pair and checks that the rasters agree in size.
pub fn load_rgbd<T: Real>(clear_path: &Path, depth_path: &Path) -> Result<(RgbImage<T>, DepthMap<T>)> {
    let rgb = load_rgb(clear_path)?;
    let depth = load_depth(depth_path)?;
    if rgb.dims() != depth.dims() {
        return Err(Error::Format(format!(
            "{} is {}x{} but {} is {}x{}",
            clear_path.display(),
            rgb.width(),
            rgb.height(),
            depth_path.display(),
            depth.dims().0,
            depth.dims().1
        )));
    }
    Ok((rgb, depth))
}

/// Writes a unit-range plane as a 16-bit grayscale PNG (value * 65535).
/// Used for emitted transmission maps.
pub fn save_unit_plane16<T: Real>(plane: &ImagePlane<T>, path: &Path) -> Result<()> {
    let (w, h) = plane.dims();
    let mut buf: image::ImageBuffer<image::Luma<u16>, Vec<u16>> =
        image::ImageBuffer::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let v = (plane.get(x, y).as_f64().clamp(0.0, 1.0) * 65535.0).round() as u16;
            buf.put_pixel(x as u32, y as u32, image::Luma([v]));
        }
    }
    buf.save(path).map_err(|e| Error::image(path, e))
}

// ---------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------

/// One synthesized hazy observation and the files backing it. Paths are
/// stored relative to the manifest they came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub clear_path: PathBuf,
    pub depth_path: PathBuf,
    pub hazy_path: PathBuf,
    pub params: HazeParams,
}

/// Formats with the given number of significant digits, plain decimal.
pub fn format_sig(x: f64, sig: u32) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (sig as i32 - 1 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

pub const MANIFEST_HEADER: &str = "clear,depth,hazy,A,beta,seed";

/// Serializes entries as the manifest CSV (UTF-8, LF line endings,
/// floats with 6 significant digits).
pub fn manifest_to_csv(entries: &[ManifestEntry]) -> String {
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for e in entries {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e.clear_path.display(),
            e.depth_path.display(),
            e.hazy_path.display(),
            format_sig(e.params.a, 6),
            format_sig(e.params.beta, 6),
            e.params.seed
        ));
    }
    out
}

pub fn write_manifest(entries: &[ManifestEntry], path: &Path) -> Result<()> {
    fs::write(path, manifest_to_csv(entries)).map_err(|e| Error::io(path, e))
}

/// Parses a manifest CSV. Relative paths are resolved against the
/// manifest's parent directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == MANIFEST_HEADER => {}
        other => {
            return Err(Error::Format(format!(
                "{}: expected manifest header `{MANIFEST_HEADER}`, got {:?}",
                path.display(),
                other
            )))
        }
    }
    let mut entries = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Format(format!(
                "{}: line {} has {} fields, expected 6",
                path.display(),
                lineno + 2,
                fields.len()
            )));
        }
        let resolve = |s: &str| {
            let p = PathBuf::from(s);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let parse_f64 = |s: &str, what: &str| {
            s.parse::<f64>().map_err(|_| {
                Error::Format(format!(
                    "{}: line {}: bad {what} value `{s}`",
                    path.display(),
                    lineno + 2
                ))
            })
        };
        let seed = fields[5].trim().parse::<u64>().map_err(|_| {
            Error::Format(format!(
                "{}: line {}: bad seed `{}`",
                path.display(),
                lineno + 2,
                fields[5]
            ))
        })?;
        entries.push(ManifestEntry {
            clear_path: resolve(fields[0]),
            depth_path: resolve(fields[1]),
            hazy_path: resolve(fields[2]),
            params: HazeParams {
                a: parse_f64(fields[3], "A")?,
                beta: parse_f64(fields[4], "beta")?,
                seed,
            },
        });
    }
    Ok(entries)
}

/// Synthesizes hazy observations for each clear/depth pair and persists
/// everything under `out_dir` with a manifest. Returns the entries with
/// paths relative to `out_dir`.
///
/// The stored clear and depth images are quantized first and the hazy
/// image is computed from those quantized values, so re-running the
/// synthesis from the files reproduces the stored hazy image exactly.
pub fn synthesize_dataset<T: Real>(
    pairs: &[(RgbImage<T>, DepthMap<T>)],
    count_per_image: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<Vec<ManifestEntry>> {
    if count_per_image == 0 {
        return Err(Error::Config("count_per_image must be at least 1".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut entries = Vec::with_capacity(pairs.len() * count_per_image);
    for (i, (clear, depth)) in pairs.iter().enumerate() {
        let clear_q = quantize_unit(clear);
        let depth_q = quantize_depth_mm(depth)?;

        let clear_name = PathBuf::from(format!("scene{i:03}_clear.png"));
        let depth_name = PathBuf::from(format!("scene{i:03}_depth.png"));
        save_rgb(&clear_q, &out_dir.join(&clear_name))?;
        save_depth(&depth_q, &out_dir.join(&depth_name))?;

        for (j, params) in sample_haze_params(mix(seed, i as u64), count_per_image)
            .into_iter()
            .enumerate()
        {
            let hazy = synthesize_hazy(&clear_q, &depth_q, &params)?;
            let hazy_name = PathBuf::from(format!("scene{i:03}_hazy{j}.png"));
            save_rgb(&hazy, &out_dir.join(&hazy_name))?;
            entries.push(ManifestEntry {
                clear_path: clear_name.clone(),
                depth_path: depth_name.clone(),
                hazy_path: hazy_name,
                params,
            });
        }
    }

    write_manifest(&entries, &out_dir.join("manifest.csv"))?;
    Ok(entries)
}

/// One haze draw applied to a clear/depth pair.
pub fn synthesize_hazy<T: Real>(
    clear: &RgbImage<T>,
    depth: &DepthMap<T>,
    params: &HazeParams,
) -> Result<RgbImage<T>> {
    let t: TransmissionMap<T> = transmission_from_depth(depth, params.scattering()?)?;
    hazify(clear, &t, params.airlight()?)
}

/// Checks that a manifest entry's stored hazy file is reproduced by
/// re-synthesizing from its clear/depth files. Returns the maximum
/// per-channel absolute difference in 8-bit steps.
pub fn verify_entry(entry: &ManifestEntry) -> Result<u8> {
    let (clear, depth) = load_rgbd::<f32>(&entry.clear_path, &entry.depth_path)?;
    let expected = quantize_unit(&synthesize_hazy(&clear, &depth, &entry.params)?);
    let stored = load_rgb::<f32>(&entry.hazy_path)?;
    if expected.dims() != stored.dims() {
        return Err(Error::Format(format!(
            "{}: hazy size differs from clear/depth",
            entry.hazy_path.display()
        )));
    }
    let mut max_steps = 0u8;
    for c in 0..3 {
        for (a, b) in expected.channel(c).iter().zip(stored.channel(c).iter()) {
            let steps = ((a - b).abs() * 255.0).round() as u8;
            max_steps = max_steps.max(steps);
        }
    }
    Ok(max_steps)
}
