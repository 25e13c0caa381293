//! Benchmark harness: annotation ingestion, synthetic pair generation
//! with known transformations, overlap-rate scoring, success curves and
//! AUC comparisons across measures.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::config::MatchConfig;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::io::{load_image, save_image};
use crate::matcher::{match_template_with, MatchOptions};
use crate::statlab::derive_rng;
use crate::window::{ScaleGrid, Window};

/// One benchmark item: a template cropped from a reference image and the
/// annotated ground-truth box in the target image.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchPair {
    pub id: String,
    pub reference: PathBuf,
    pub template_box: Window,
    pub target: PathBuf,
    pub ground_truth: Window,
    pub tag: String,
}

/// Pixel-count intersection over union of two windows.
pub fn overlap_rate(a: &Window, b: &Window) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Success rate per overlap threshold, with the curve's mean as AUC.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessCurve {
    pub thresholds: Vec<f64>,
    pub success_rate: Vec<f64>,
    pub auc: f64,
}

impl SuccessCurve {
    pub fn from_overlaps(overlaps: &[f64], thresholds: &[f64]) -> SuccessCurve {
        let n = overlaps.len().max(1) as f64;
        let success_rate: Vec<f64> = thresholds
            .iter()
            .map(|t| overlaps.iter().filter(|o| **o >= *t).count() as f64 / n)
            .collect();
        let auc = success_rate.iter().sum::<f64>() / success_rate.len().max(1) as f64;
        SuccessCurve {
            thresholds: thresholds.to_vec(),
            success_rate,
            auc,
        }
    }

    /// Success rates never increase as the threshold grows.
    pub fn is_monotone(&self) -> bool {
        self.success_rate.windows(2).all(|w| w[0] >= w[1])
    }
}

/// Overlap thresholds 0.05..=0.95 step 0.05.
pub fn default_thresholds() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

const ANNOTATION_HEADER: &str = "ref_path,tx,ty,tw,th,target_path,gx,gy,gw,gh,tag";

/// Reads an annotation CSV (one row per pair, with or without the
/// header line).
pub fn read_annotations(path: &Path) -> Result<Vec<BenchPair>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Format {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
    let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
    let mut pairs = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        if record.len() < 10 {
            return Err(Error::Format {
                path: path.display().to_string(),
                reason: format!("row {row_idx}: expected >= 10 fields, got {}", record.len()),
            });
        }
        // Header detection: the numeric fields fail to parse.
        if row_idx == 0 && record[1].parse::<usize>().is_err() {
            continue;
        }
        let num = |i: usize| -> Result<usize> {
            record[i].trim().parse().map_err(|_| Error::Format {
                path: path.display().to_string(),
                reason: format!("row {row_idx}: field {i} is not a number: '{}'", &record[i]),
            })
        };
        let resolve = |p: &str| -> PathBuf {
            let pb = PathBuf::from(p);
            if pb.is_absolute() {
                pb
            } else {
                base.join(pb)
            }
        };
        pairs.push(BenchPair {
            id: format!("pair_{:04}", pairs.len()),
            reference: resolve(&record[0]),
            template_box: Window::new(num(1)?, num(2)?, num(3)?, num(4)?),
            target: resolve(&record[5]),
            ground_truth: Window::new(num(6)?, num(7)?, num(8)?, num(9)?),
            tag: record.get(10).unwrap_or("").to_string(),
        });
    }
    Ok(pairs)
}

/// Writes the annotation CSV with paths relative to its directory when
/// possible.
pub fn write_annotations(pairs: &[BenchPair], path: &Path) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new(""));
    let mut out = fs::File::create(path)?;
    writeln!(out, "{ANNOTATION_HEADER}")?;
    for p in pairs {
        let rel = |pb: &Path| -> String {
            pb.strip_prefix(base)
                .unwrap_or(pb)
                .display()
                .to_string()
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            rel(&p.reference),
            p.template_box.x,
            p.template_box.y,
            p.template_box.w,
            p.template_box.h,
            rel(&p.target),
            p.ground_truth.x,
            p.ground_truth.y,
            p.ground_truth.w,
            p.ground_truth.h,
            p.tag
        )?;
    }
    Ok(())
}

/// Per-pair outcome of one measure run.
#[derive(Debug, Clone, PartialEq)]
pub struct PairOutcome {
    pub pair_id: String,
    pub measure: String,
    pub window: Window,
    pub scale: (f64, f64),
    pub score: f64,
    pub overlap: f64,
    pub tag: String,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    /// One labeled curve per config, in input order.
    pub curves: Vec<(String, SuccessCurve)>,
    pub per_pair: Vec<PairOutcome>,
    pub skipped: usize,
    pub total: usize,
}

impl BenchReport {
    /// threshold, then one success-rate column per labeled curve.
    pub fn write_curves_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "threshold")?;
        for (label, _) in &self.curves {
            write!(out, ",{label}")?;
        }
        writeln!(out)?;
        if let Some((_, first)) = self.curves.first() {
            for (i, t) in first.thresholds.iter().enumerate() {
                write!(out, "{t}")?;
                for (_, curve) in &self.curves {
                    write!(out, ",{}", curve.success_rate[i])?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }

    pub fn write_auc_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "measure,auc")?;
        for (label, curve) in &self.curves {
            writeln!(out, "{label},{}", curve.auc)?;
        }
        Ok(())
    }

    pub fn write_per_pair_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "pair_id,measure,x,y,w,h,sx,sy,score,overlap,tag")?;
        for o in &self.per_pair {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                o.pair_id,
                o.measure,
                o.window.x,
                o.window.y,
                o.window.w,
                o.window.h,
                o.scale.0,
                o.scale.1,
                o.score,
                o.overlap,
                o.tag
            )?;
        }
        Ok(())
    }
}

/// Runs every (pair, config) combination and assembles success curves.
/// Unreadable pairs are skipped with a warning; more than 20% skipped
/// aborts the run.
pub fn run_benchmark(
    pairs: &[BenchPair],
    cfgs: &[MatchConfig],
    grid: &ScaleGrid,
    thresholds: &[f64],
) -> Result<BenchReport> {
    run_benchmark_with(pairs, cfgs, grid, thresholds, None)
}

pub fn run_benchmark_with(
    pairs: &[BenchPair],
    cfgs: &[MatchConfig],
    grid: &ScaleGrid,
    thresholds: &[f64],
    cache_dir: Option<&Path>,
) -> Result<BenchReport> {
    if pairs.is_empty() || cfgs.is_empty() {
        return Err(Error::Parameter("need pairs and at least one config".into()));
    }
    let labels = curve_labels(cfgs);
    // Load each distinct reference image once.
    let mut references: HashMap<PathBuf, Option<Image>> = HashMap::new();
    for p in pairs {
        references
            .entry(p.reference.clone())
            .or_insert_with(|| load_image(&p.reference).ok());
    }

    let opts = MatchOptions {
        keep_per_scale_maps: false,
        cache_dir: cache_dir.map(|d| d.to_path_buf()),
    };
    let results: Vec<Option<Vec<PairOutcome>>> = pairs
        .par_iter()
        .map(|pair| {
            let reference = references.get(&pair.reference)?.as_ref()?;
            let template = reference.crop(&pair.template_box).ok()?;
            let target = match load_image(&pair.target) {
                Ok(img) => img,
                Err(e) => {
                    log::warn!("skipping {}: {e}", pair.id);
                    return None;
                }
            };
            let mut outcomes = Vec::with_capacity(cfgs.len());
            for (cfg, label) in cfgs.iter().zip(&labels) {
                let result = match match_template_with(&template, &target, cfg, grid, &opts) {
                    Ok(r) => r,
                    Err(e) => {
                        log::warn!("skipping {} ({label}): {e}", pair.id);
                        return None;
                    }
                };
                outcomes.push(PairOutcome {
                    pair_id: pair.id.clone(),
                    measure: label.clone(),
                    window: result.best,
                    scale: result.best_scale,
                    score: result.best_score,
                    overlap: overlap_rate(&result.best, &pair.ground_truth),
                    tag: pair.tag.clone(),
                });
            }
            Some(outcomes)
        })
        .collect();

    let skipped = results.iter().filter(|r| r.is_none()).count();
    if skipped * 5 > pairs.len() {
        return Err(Error::Run(format!(
            "{skipped} of {} pairs failed to load (> 20%)",
            pairs.len()
        )));
    }
    let per_pair: Vec<PairOutcome> = results.into_iter().flatten().flatten().collect();
    let curves = labels
        .iter()
        .map(|label| {
            let overlaps: Vec<f64> = per_pair
                .iter()
                .filter(|o| &o.measure == label)
                .map(|o| o.overlap)
                .collect();
            (label.clone(), SuccessCurve::from_overlaps(&overlaps, thresholds))
        })
        .collect();
    Ok(BenchReport {
        curves,
        per_pair,
        skipped,
        total: pairs.len(),
    })
}

fn curve_labels(cfgs: &[MatchConfig]) -> Vec<String> {
    let mut labels = Vec::with_capacity(cfgs.len());
    for cfg in cfgs {
        let base = cfg.measure.name().to_string();
        let mut label = base.clone();
        let mut suffix = 1;
        while labels.contains(&label) {
            suffix += 1;
            label = format!("{base}_{suffix}");
        }
        labels.push(label);
    }
    labels
}

/// Fixed-scale performance ceiling: template-sized boxes centered on the
/// ground-truth centroids.
pub fn ngt_curve(pairs: &[BenchPair], thresholds: &[f64]) -> SuccessCurve {
    let overlaps: Vec<f64> = pairs
        .iter()
        .map(|p| overlap_rate(&ngt_box(p), &p.ground_truth))
        .collect();
    SuccessCurve::from_overlaps(&overlaps, thresholds)
}

/// Template-sized box centered at the ground-truth centroid (clamped at
/// the image origin).
pub fn ngt_box(pair: &BenchPair) -> Window {
    let cx = pair.ground_truth.x as i64 * 2 + pair.ground_truth.w as i64;
    let cy = pair.ground_truth.y as i64 * 2 + pair.ground_truth.h as i64;
    let x = (cx - pair.template_box.w as i64) / 2;
    let y = (cy - pair.template_box.h as i64) / 2;
    Window::new(
        x.max(0) as usize,
        y.max(0) as usize,
        pair.template_box.w,
        pair.template_box.h,
    )
}

/// Pastes a rotated and scaled copy of `template` into `bg`, with
/// optional occlusion and pixel noise. Returns the composited target,
/// the tight ground-truth box of the pasted region, and the parameter
/// tag. The paste position is drawn at random, snapped to multiples of
/// `align` so the ground truth stays on the match grid.
#[allow(clippy::too_many_arguments)]
pub fn generate_synthetic_pair(
    bg: &Image,
    template: &Image,
    sx: f64,
    sy: f64,
    theta_deg: f64,
    occlusion_frac: f64,
    noise_sigma: f64,
    align: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Image, Window, String)> {
    if sx <= 0.0 || sy <= 0.0 || !(0.0..1.0).contains(&occlusion_frac) || noise_sigma < 0.0 {
        return Err(Error::Parameter("bad synthetic transform parameters".into()));
    }
    if bg.channels() != template.channels() {
        return Err(Error::Dimension(
            "background and template channel counts differ".into(),
        ));
    }
    let align = align.max(1);
    let sw = (sx * template.width() as f64).round().max(1.0) as usize;
    let sh = (sy * template.height() as f64).round().max(1.0) as usize;
    let theta = theta_deg.to_radians();
    let (sin, cos) = theta.sin_cos();
    // Bounding box of the rotated scaled rectangle.
    let bw = (sw as f64 * cos.abs() + sh as f64 * sin.abs()).round().max(1.0) as usize;
    let bh = (sw as f64 * sin.abs() + sh as f64 * cos.abs()).round().max(1.0) as usize;
    if bw > bg.width() || bh > bg.height() {
        return Err(Error::Parameter(format!(
            "transformed template {bw}x{bh} does not fit background {}x{}",
            bg.width(),
            bg.height()
        )));
    }
    let max_x = (bg.width() - bw) / align;
    let max_y = (bg.height() - bh) / align;
    let paste_x = rng.random_range(0..=max_x) * align;
    let paste_y = rng.random_range(0..=max_y) * align;

    let mut target = bg.clone();
    let cx_out = bw as f64 / 2.0;
    let cy_out = bh as f64 / 2.0;
    let cx_s = sw as f64 / 2.0;
    let cy_s = sh as f64 / 2.0;
    let mut min_x = usize::MAX;
    let mut min_y = usize::MAX;
    let mut max_px = 0usize;
    let mut max_py = 0usize;
    for oy in 0..bh {
        for ox in 0..bw {
            // Inverse map: bbox pixel -> unrotate about the scaled
            // center -> unscale -> nearest template pixel.
            let dx = ox as f64 + 0.5 - cx_out;
            let dy = oy as f64 + 0.5 - cy_out;
            let ux = cos * dx + sin * dy + cx_s;
            let uy = -sin * dx + cos * dy + cy_s;
            let tx = (ux / sx - 0.5).round();
            let ty = (uy / sy - 0.5).round();
            if tx < 0.0 || ty < 0.0 || tx >= template.width() as f64 || ty >= template.height() as f64
            {
                continue;
            }
            let (px, py) = (paste_x + ox, paste_y + oy);
            for c in 0..target.channels() {
                target.set(px, py, c, template.get(tx as usize, ty as usize, c));
            }
            min_x = min_x.min(px);
            min_y = min_y.min(py);
            max_px = max_px.max(px);
            max_py = max_py.max(py);
        }
    }
    if min_x == usize::MAX {
        return Err(Error::Parameter("empty paste region".into()));
    }
    let gt = Window::new(min_x, min_y, max_px - min_x + 1, max_py - min_y + 1);

    if occlusion_frac > 0.0 {
        let side = occlusion_frac.sqrt();
        let ow = ((gt.w as f64 * side).round() as usize).clamp(1, gt.w);
        let oh = ((gt.h as f64 * side).round() as usize).clamp(1, gt.h);
        let ox = gt.x + rng.random_range(0..=gt.w - ow);
        let oy = gt.y + rng.random_range(0..=gt.h - oh);
        let color: Vec<f64> = (0..target.channels()).map(|_| rng.random()).collect();
        for y in oy..oy + oh {
            for x in ox..ox + ow {
                for (c, v) in color.iter().enumerate() {
                    target.set(x, y, c, *v);
                }
            }
        }
    }
    if noise_sigma > 0.0 {
        let (w, h, ch) = (target.width(), target.height(), target.channels());
        for y in 0..h {
            for x in 0..w {
                for c in 0..ch {
                    let z: f64 = rng.sample(StandardNormal);
                    target.set(x, y, c, target.get(x, y, c) + noise_sigma * z);
                }
            }
        }
    }
    let tag = format!(
        "synthetic;theta={theta_deg};sx={sx};sy={sy};occ={occlusion_frac};noise={noise_sigma}"
    );
    Ok((target, gt, tag))
}

/// Procedural background: a smooth random low-frequency color field.
pub fn make_background(width: usize, height: usize, seed: u64) -> Image {
    let mut rng = derive_rng(seed, 0xb6);
    let channels = 3;
    let mut waves = Vec::new();
    for _ in 0..channels {
        let comps: Vec<(f64, f64, f64, f64)> = (0..3)
            .map(|_| {
                (
                    rng.random_range(0.3..2.5) / width as f64,
                    rng.random_range(0.3..2.5) / height as f64,
                    rng.random_range(0.0..std::f64::consts::TAU),
                    rng.random_range(0.05..0.2),
                )
            })
            .collect();
        waves.push(comps);
    }
    let mut data = Vec::with_capacity(width * height * channels);
    for y in 0..height {
        for x in 0..width {
            for comps in &waves {
                let mut v = 0.5;
                for (fx, fy, phase, amp) in comps {
                    v += amp
                        * (std::f64::consts::TAU * (fx * x as f64 + fy * y as f64) + phase).sin();
                }
                data.push(v.clamp(0.0, 1.0));
            }
        }
    }
    Image::new(width, height, channels, data).expect("values clamped")
}

/// Procedural template textures: a color mosaic, oriented stripes, or
/// rings with an off-center highlight. All three carry enough local
/// structure for rank features and are deliberately non-symmetric.
pub fn make_template(kind: usize, width: usize, height: usize, seed: u64) -> Image {
    let mut rng = derive_rng(seed, 0x7e + kind as u64);
    let channels = 3;
    let mut data = Vec::with_capacity(width * height * channels);
    match kind % 3 {
        0 => {
            // Mosaic of random color cells plus a diagonal ramp.
            let cell = (width / 4).max(2);
            let colors: Vec<[f64; 3]> = (0..64).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
            for y in 0..height {
                for x in 0..width {
                    let idx = (y / cell) * 8 + (x / cell);
                    let ramp = 0.25 * (x + y) as f64 / (width + height) as f64;
                    for c in 0..channels {
                        data.push((colors[idx % colors.len()][c] * 0.75 + ramp).clamp(0.0, 1.0));
                    }
                }
            }
        }
        1 => {
            // Oriented stripes with a cross gradient.
            let angle = rng.random_range(0.2..1.3);
            let (sin, cos) = (angle as f64).sin_cos();
            let period = rng.random_range(4.0..8.0);
            for y in 0..height {
                for x in 0..width {
                    let t = (cos * x as f64 + sin * y as f64) / period;
                    let stripe = 0.5 + 0.35 * (std::f64::consts::TAU * t).sin();
                    let grad = 0.3 * x as f64 / width as f64;
                    data.push(stripe.clamp(0.0, 1.0));
                    data.push((stripe * 0.6 + grad).clamp(0.0, 1.0));
                    data.push((0.9 - stripe * 0.5).clamp(0.0, 1.0));
                }
            }
        }
        _ => {
            // Rings about an off-center pole plus a corner highlight.
            let pole_x = width as f64 * rng.random_range(0.3..0.7);
            let pole_y = height as f64 * rng.random_range(0.3..0.7);
            let period = rng.random_range(3.5..6.5);
            for y in 0..height {
                for x in 0..width {
                    let r = ((x as f64 - pole_x).powi(2) + (y as f64 - pole_y).powi(2)).sqrt();
                    let ring = 0.5 + 0.4 * (std::f64::consts::TAU * r / period).sin();
                    let corner = (1.0 - (x + y) as f64 / (width + height) as f64) * 0.3;
                    data.push(ring.clamp(0.0, 1.0));
                    data.push((ring * 0.5 + corner).clamp(0.0, 1.0));
                    data.push((1.0 - ring * 0.7).clamp(0.0, 1.0));
                }
            }
        }
    }
    Image::new(width, height, channels, data).expect("values clamped")
}

/// Parameters of the generated synthetic suite.
#[derive(Debug, Clone)]
pub struct SuiteSpec {
    pub backgrounds: usize,
    pub templates: usize,
    pub bg_size: usize,
    pub template_size: usize,
    pub thetas_deg: Vec<f64>,
    pub scales: Vec<f64>,
    pub occlusions: Vec<f64>,
    pub noise_sigma: f64,
    /// Paste positions snap to this grid (the default patch size).
    pub align: usize,
}

impl Default for SuiteSpec {
    /// 3 backgrounds x 3 templates x 4 rotations x 4 scales x
    /// 2 occlusion levels = 288 pairs.
    fn default() -> Self {
        Self {
            backgrounds: 3,
            templates: 3,
            bg_size: 120,
            template_size: 24,
            thetas_deg: vec![0.0, 30.0, 60.0, 90.0],
            scales: vec![0.6, 1.0, 1.5, 1.9],
            occlusions: vec![0.0, 0.2],
            noise_sigma: 0.0,
            align: 2,
        }
    }
}

impl SuiteSpec {
    pub fn pair_count(&self) -> usize {
        self.backgrounds
            * self.templates
            * self.thetas_deg.len()
            * self.scales.len()
            * self.occlusions.len()
    }
}

/// Generates the synthetic suite under `dir`: template and target
/// images plus `annotations.csv`. Pair tags record the transform so
/// benchmark reports can slice by subset.
pub fn generate_suite(dir: &Path, spec: &SuiteSpec, seed: u64) -> Result<Vec<BenchPair>> {
    fs::create_dir_all(dir)?;
    let mut templates = Vec::new();
    for t in 0..spec.templates {
        let img = make_template(t, spec.template_size, spec.template_size, seed ^ (t as u64) << 8);
        let path = dir.join(format!("template_{t}.png"));
        save_image(&img, &path)?;
        templates.push((img, path));
    }
    let backgrounds: Vec<Image> = (0..spec.backgrounds)
        .map(|b| make_background(spec.bg_size, spec.bg_size, seed ^ 0xbb00 ^ (b as u64) << 16))
        .collect();

    let mut pairs = Vec::new();
    let mut pair_idx = 0usize;
    for (b, bg) in backgrounds.iter().enumerate() {
        for (t, (tpl, tpl_path)) in templates.iter().enumerate() {
            for &theta in &spec.thetas_deg {
                for &scale in &spec.scales {
                    for &occ in &spec.occlusions {
                        let mut rng = derive_rng(seed, 0xfa17 + pair_idx as u64);
                        let (target, gt, tag) = generate_synthetic_pair(
                            bg,
                            tpl,
                            scale,
                            scale,
                            theta,
                            occ,
                            spec.noise_sigma,
                            spec.align,
                            &mut rng,
                        )?;
                        let target_path = dir.join(format!("target_{pair_idx:04}.png"));
                        save_image(&target, &target_path)?;
                        pairs.push(BenchPair {
                            id: format!("pair_{pair_idx:04}"),
                            reference: tpl_path.clone(),
                            template_box: tpl.full_window(),
                            target: target_path,
                            ground_truth: gt,
                            tag: format!("{tag};bg={b};tpl={t}"),
                        });
                        pair_idx += 1;
                    }
                }
            }
        }
    }
    write_annotations(&pairs, &dir.join("annotations.csv"))?;
    Ok(pairs)
}

/// Parses a `key=value` entry out of a pair tag.
pub fn tag_value(tag: &str, key: &str) -> Option<f64> {
    tag.split(';')
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .and_then(|v| v.parse().ok())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn overlap_examples() {
        let a = Window::new(3, 4, 5, 6);
        assert_eq!(overlap_rate(&a, &a), 1.0);
        assert_eq!(overlap_rate(&a, &Window::new(30, 40, 5, 6)), 0.0);
        // Two 2x2 windows offset by 1 in x share a 1x2 strip: 2/6.
        let b = Window::new(0, 0, 2, 2);
        let c = Window::new(1, 0, 2, 2);
        assert!((overlap_rate(&b, &c) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(overlap_rate(&b, &c), overlap_rate(&c, &b));
    }

    #[test]
    fn success_curve_hand_count() {
        let overlaps = [0.2, 0.4, 0.6, 0.8];
        let curve = SuccessCurve::from_overlaps(&overlaps, &[0.25, 0.5, 0.75]);
        assert_eq!(curve.success_rate, vec![0.75, 0.5, 0.25]);
        assert!((curve.auc - 0.5).abs() < 1e-15);
        assert!(curve.is_monotone());
    }

    #[test]
    fn success_curve_flat_extremes() {
        let ones = [1.0; 5];
        let curve = SuccessCurve::from_overlaps(&ones, &default_thresholds());
        assert!(curve.success_rate.iter().all(|r| *r == 1.0));
        assert_eq!(curve.auc, 1.0);
        let zeros = [0.0; 5];
        let curve = SuccessCurve::from_overlaps(&zeros, &default_thresholds());
        assert!(curve.success_rate.iter().all(|r| *r == 0.0));
        assert_eq!(curve.auc, 0.0);
    }

    #[test]
    fn ngt_box_examples() {
        let mut pair = BenchPair {
            id: "p".into(),
            reference: PathBuf::new(),
            template_box: Window::new(0, 0, 10, 10),
            target: PathBuf::new(),
            ground_truth: Window::new(5, 5, 10, 10),
            tag: String::new(),
        };
        // Same size: NGT recovers the ground truth exactly.
        assert_eq!(overlap_rate(&ngt_box(&pair), &pair.ground_truth), 1.0);
        // Ground truth twice the template size, concentric: IoU = 1/4.
        pair.ground_truth = Window::new(5, 5, 20, 20);
        assert!((overlap_rate(&ngt_box(&pair), &pair.ground_truth) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn synthetic_identity_paste_is_exact() {
        let bg = make_background(60, 60, 5);
        let tpl = make_template(0, 16, 16, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (target, gt, _) =
            generate_synthetic_pair(&bg, &tpl, 1.0, 1.0, 0.0, 0.0, 0.0, 2, &mut rng).unwrap();
        assert_eq!((gt.w, gt.h), (16, 16));
        assert_eq!(gt.x % 2, 0);
        assert_eq!(gt.y % 2, 0);
        let cropped = target.crop(&gt).unwrap();
        assert_eq!(cropped, tpl);
    }

    #[test]
    fn synthetic_right_angle_transposes() {
        let bg = make_background(60, 60, 6);
        let tpl = make_template(1, 20, 12, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (_, gt, _) =
            generate_synthetic_pair(&bg, &tpl, 1.0, 1.0, 90.0, 0.0, 0.0, 2, &mut rng).unwrap();
        assert_eq!((gt.w, gt.h), (12, 20));
    }

    #[test]
    fn synthetic_scale_rounds_dims() {
        let bg = make_background(80, 80, 7);
        let tpl = make_template(2, 16, 16, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (_, gt, _) =
            generate_synthetic_pair(&bg, &tpl, 1.5, 1.5, 0.0, 0.0, 0.0, 2, &mut rng).unwrap();
        assert_eq!((gt.w, gt.h), (24, 24));
    }

    #[test]
    fn synthetic_fit_failure_is_parameter_error() {
        let bg = make_background(20, 20, 8);
        let tpl = make_template(0, 16, 16, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert!(matches!(
            generate_synthetic_pair(&bg, &tpl, 2.0, 2.0, 0.0, 0.0, 0.0, 2, &mut rng),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn annotations_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let pairs = vec![
            BenchPair {
                id: "pair_0000".into(),
                reference: dir.path().join("t0.png"),
                template_box: Window::new(0, 0, 8, 8),
                target: dir.path().join("q0.png"),
                ground_truth: Window::new(4, 6, 10, 12),
                tag: "synthetic;theta=30".into(),
            },
            BenchPair {
                id: "pair_0001".into(),
                reference: dir.path().join("t1.png"),
                template_box: Window::new(1, 2, 3, 4),
                target: dir.path().join("q1.png"),
                ground_truth: Window::new(0, 0, 5, 5),
                tag: String::new(),
            },
        ];
        let path = dir.path().join("annotations.csv");
        write_annotations(&pairs, &path).unwrap();
        let loaded = read_annotations(&path).unwrap();
        assert_eq!(loaded, pairs);
    }

    #[test]
    fn tag_values_parse() {
        let tag = "synthetic;theta=30;sx=1.5;sy=1.5;occ=0.2;noise=0;bg=1;tpl=2";
        assert_eq!(tag_value(tag, "theta"), Some(30.0));
        assert_eq!(tag_value(tag, "sx"), Some(1.5));
        assert_eq!(tag_value(tag, "missing"), None);
    }

    #[test]
    fn benchmark_errors_on_too_many_skips() {
        let dir = tempfile::tempdir().unwrap();
        // Five pairs, all pointing at missing files.
        let pairs: Vec<BenchPair> = (0..5)
            .map(|i| BenchPair {
                id: format!("pair_{i:04}"),
                reference: dir.path().join("missing.png"),
                template_box: Window::new(0, 0, 8, 8),
                target: dir.path().join("missing.png"),
                ground_truth: Window::new(0, 0, 8, 8),
                tag: String::new(),
            })
            .collect();
        let cfgs = [MatchConfig::default()];
        let grid = ScaleGrid::fixed(2);
        assert!(matches!(
            run_benchmark(&pairs, &cfgs, &grid, &default_thresholds()),
            Err(Error::Run(_))
        ));
    }

    #[test]
    fn small_benchmark_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SuiteSpec {
            backgrounds: 1,
            templates: 1,
            bg_size: 48,
            template_size: 12,
            thetas_deg: vec![0.0],
            scales: vec![1.0],
            occlusions: vec![0.0],
            noise_sigma: 0.0,
            align: 2,
        };
        let pairs = generate_suite(dir.path(), &spec, 9).unwrap();
        assert_eq!(pairs.len(), 1);
        let cfgs = [
            MatchConfig::with_measure(crate::config::Measure::Nsds),
            MatchConfig::with_measure(crate::config::Measure::Ssd),
        ];
        let grid = ScaleGrid::fixed(2);
        let report = run_benchmark(&pairs, &cfgs, &grid, &default_thresholds()).unwrap();
        assert_eq!(report.curves.len(), 2);
        assert_eq!(report.per_pair.len(), 2);
        // An exact pasted copy must be found exactly by both measures.
        for outcome in &report.per_pair {
            assert!(outcome.overlap > 0.99, "{outcome:?}");
        }
        for (_, curve) in &report.curves {
            assert!(curve.is_monotone());
        }
        // Determinism: regenerating and rerunning reproduces the report.
        let report2 = run_benchmark(&pairs, &cfgs, &grid, &default_thresholds()).unwrap();
        assert_eq!(report.per_pair, report2.per_pair);
    }
}
