//! Multi-scale sliding-window engine: candidate generation, per-window
//! scoring with the configured measure, likelihood maps and the argmax
//! window.
//!
//! Windows are generated on the target's patch grid so the precomputed
//! per-patch NN assignments and ANN table apply to every candidate. Per
//! window the fast paths below reproduce exactly what the standalone
//! functions in [`measures`](crate::measures) compute on a materialized
//! window view; an invariant test pins that equivalence.

use std::collections::HashSet;
use std::path::PathBuf;

use rayon::prelude::*;

use crate::config::{DistanceMode, MatchConfig, Measure};
use crate::error::{Error, Result};
use crate::features::{patchify, sq_l2, PatchSet};
use crate::image::{Field, Image};
use crate::measures;
use crate::nn::{self, build_ann_table, build_index, AnnTable};
use crate::window::{ScaleGrid, Window};

/// One candidate placement: a pixel-space window plus the scale pair
/// that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub window: Window,
    pub sx: f64,
    pub sy: f64,
}

/// Outcome of a matching run.
#[derive(Debug, Clone)]
pub struct MatchResult {
    pub best: Window,
    pub best_scale: (f64, f64),
    pub best_score: f64,
    /// Max-over-scales score per patch-grid anchor; NaN where no window
    /// fits.
    pub score_map: Field,
    pub per_scale_maps: Option<Vec<((f64, f64), Field)>>,
}

impl MatchResult {
    /// Plain-text record of the best window, scale and score.
    pub fn record(&self) -> String {
        format!(
            "x={} y={} w={} h={} sx={} sy={} score={:.17e}\n",
            self.best.x,
            self.best.y,
            self.best.w,
            self.best.h,
            self.best_scale.0,
            self.best_scale.1,
            self.best_score
        )
    }
}

/// Extra knobs for [`match_template_with`].
#[derive(Debug, Clone, Default)]
pub struct MatchOptions {
    /// Keep one likelihood map per scale pair in addition to the merged
    /// max map.
    pub keep_per_scale_maps: bool,
    /// Directory for the ANN-table cache; None disables caching.
    pub cache_dir: Option<PathBuf>,
}

fn round_to_patch(v: f64, p: usize) -> usize {
    let units = (v / p as f64).round() as i64;
    (units.max(1) as usize) * p
}

/// Enumerates the candidate windows for every scale pair: window extents
/// are the template's scaled dims rounded to whole patches, positions
/// slide at `spatial_stride` and stay aligned to the patch grid. Scale
/// pairs that collapse to the same rounded extents are deduplicated
/// (first pair in grid order wins).
pub fn generate_candidates(
    target_dims: (usize, usize),
    template_dims: (usize, usize),
    grid: &ScaleGrid,
    patch_size: usize,
) -> Result<Vec<Candidate>> {
    let mut out = Vec::new();
    for entry in scale_entries(target_dims, template_dims, grid, patch_size)? {
        for (x, y) in entry.anchors_px(target_dims, grid.spatial_stride) {
            out.push(Candidate {
                window: Window::new(x, y, entry.w_px, entry.h_px),
                sx: entry.sx,
                sy: entry.sy,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyResult(
            "no candidate window fits the target at any scale".into(),
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct ScaleEntry {
    sx: f64,
    sy: f64,
    w_px: usize,
    h_px: usize,
}

impl ScaleEntry {
    fn anchors_px(
        &self,
        target_dims: (usize, usize),
        stride: usize,
    ) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (tw, th) = target_dims;
        let (w, h) = (self.w_px, self.h_px);
        let ys = (0..=th.saturating_sub(h)).step_by(stride);
        ys.flat_map(move |y| {
            (0..=tw.saturating_sub(w))
                .step_by(stride)
                .map(move |x| (x, y))
        })
        .filter(move |&(x, y)| x + w <= tw && y + h <= th)
    }
}

fn scale_entries(
    target_dims: (usize, usize),
    template_dims: (usize, usize),
    grid: &ScaleGrid,
    patch_size: usize,
) -> Result<Vec<ScaleEntry>> {
    grid.validate()?;
    if grid.spatial_stride % patch_size != 0 {
        return Err(Error::Parameter(format!(
            "spatial stride {} must be a multiple of the patch size {} so windows stay on the patch grid",
            grid.spatial_stride, patch_size
        )));
    }
    if template_dims.0 < patch_size || template_dims.1 < patch_size {
        return Err(Error::Size("template smaller than one patch".into()));
    }
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (sx, sy) in grid.pairs() {
        let w_px = round_to_patch(sx * template_dims.0 as f64, patch_size);
        let h_px = round_to_patch(sy * template_dims.1 as f64, patch_size);
        if w_px > target_dims.0 || h_px > target_dims.1 {
            continue;
        }
        if seen.insert((w_px, h_px)) {
            entries.push(ScaleEntry { sx, sy, w_px, h_px });
        }
    }
    Ok(entries)
}

/// Runs the full pipeline: patchify both images, precompute the NN
/// structures once, score every candidate and return the argmax window
/// (ties: first in scan order) plus the merged score map.
pub fn match_template(
    template: &Image,
    target: &Image,
    cfg: &MatchConfig,
    grid: &ScaleGrid,
) -> Result<MatchResult> {
    match_template_with(template, target, cfg, grid, &MatchOptions::default())
}

pub fn match_template_with(
    template: &Image,
    target: &Image,
    cfg: &MatchConfig,
    grid: &ScaleGrid,
    opts: &MatchOptions,
) -> Result<MatchResult> {
    cfg.validate()?;
    let template_ps = patchify(template, cfg.patch_size, cfg.rank_radius)?;
    let target_ps = patchify(target, cfg.patch_size, cfg.rank_radius)?;
    // Fixed-scale measures always run on the {1.0} grid.
    let effective = if cfg.measure.multi_scale() {
        grid.clone()
    } else {
        ScaleGrid::fixed(grid.spatial_stride)
    };
    let entries = scale_entries(
        (target.width(), target.height()),
        (template.width(), template.height()),
        &effective,
        cfg.patch_size,
    )?;
    if entries.is_empty() {
        return Err(Error::EmptyResult(
            "template larger than target at every scale".into(),
        ));
    }
    let engine = Engine::new(&template_ps, &target_ps, cfg, opts)?;
    let stride = effective.spatial_stride / cfg.patch_size;
    let (gw, gh) = (target_ps.grid_w(), target_ps.grid_h());

    let per_scale: Vec<ScaleOutcome> = entries
        .par_iter()
        .enumerate()
        .map(|(scale_idx, entry)| engine.run_scale(scale_idx, entry, stride, gw, gh))
        .collect();

    let mut score_map = Field::filled(gw, gh, f64::NAN);
    let mut per_scale_maps = opts.keep_per_scale_maps.then(Vec::new);
    let mut best: Option<(f64, u64, Window, (f64, f64))> = None;
    let mut scored_any = false;
    for (entry, outcome) in entries.iter().zip(per_scale) {
        score_map.merge_max(&outcome.map);
        if let Some(b) = outcome.best {
            scored_any = true;
            let replace = match &best {
                None => true,
                // Higher score wins; ties go to the first candidate in
                // scan order.
                Some((score, rank, _, _)) => {
                    b.0 > *score || (b.0 == *score && b.1 < *rank)
                }
            };
            if replace {
                best = Some(b);
            }
        }
        if let Some(maps) = per_scale_maps.as_mut() {
            maps.push(((entry.sx, entry.sy), outcome.map));
        }
    }
    if !scored_any {
        return Err(Error::EmptyResult("no candidate window was scored".into()));
    }
    let (best_score, _, window, scale) = best.expect("scored_any implies a best candidate");
    Ok(MatchResult {
        best: window,
        best_scale: scale,
        best_score,
        score_map,
        per_scale_maps,
    })
}

struct ScaleOutcome {
    map: Field,
    best: Option<(f64, u64, Window, (f64, f64))>,
}

/// Precomputed per-(template, target, config) scoring state.
struct Engine<'a> {
    template: &'a PatchSet,
    target: &'a PatchSet,
    cfg: &'a MatchConfig,
    /// Per global target patch: template NN index under `mode`
    /// (window-independent for the rank/appearance-only modes).
    nn_of_target: Vec<u32>,
    rho_template: Vec<f64>,
    /// Location of each target patch's template NN (DDIS weighting).
    nn_loc: Vec<[f64; 2]>,
    /// tau(q) != 0 per global target patch.
    tau_nonzero: Vec<bool>,
    ann: Option<AnnTable>,
    /// BBS: appearance-term distances, template-major n x M.
    app_dist: Vec<f64>,
    t_loc: Vec<[f64; 2]>,
    /// Forced appearance+location NN makes epsilon window-dependent;
    /// fall back to materialized window views.
    window_dependent_nn: bool,
}

impl<'a> Engine<'a> {
    fn new(
        template: &'a PatchSet,
        target: &'a PatchSet,
        cfg: &'a MatchConfig,
        opts: &MatchOptions,
    ) -> Result<Engine<'a>> {
        let measure = cfg.measure;
        let mode = cfg.resolved_distance_mode(measure);
        let uses_epsilon = matches!(
            measure,
            Measure::Sds | Measure::Nsds | Measure::Dis | Measure::Ddis | Measure::Sddis
        );
        let window_dependent_nn = uses_epsilon && mode == DistanceMode::AppearanceLocation;

        let mut nn_of_target = Vec::new();
        let mut nn_loc = Vec::new();
        if uses_epsilon && !window_dependent_nn {
            let index = build_index(template, cfg.lambda, mode)?;
            nn_of_target.reserve(target.len());
            for g in 0..target.len() {
                let (i, _) = index.nn_patch(&target.patch(g))?;
                nn_of_target.push(i as u32);
                nn_loc.push(template.location(i));
            }
        }

        let mut ann = None;
        let mut tau_nonzero = Vec::new();
        if matches!(measure, Measure::Sds | Measure::Nsds) {
            let table = load_or_build_ann(template, target, cfg, mode, opts)?;
            tau_nonzero = (0..target.len()).map(|g| table.tau(g) != 0).collect();
            ann = Some(table);
        }

        let mut app_dist = Vec::new();
        let mut t_loc = Vec::new();
        if measure == Measure::Bbs {
            app_dist.reserve(template.len() * target.len());
            for i in 0..template.len() {
                let ta = template.appearance(i);
                for g in 0..target.len() {
                    app_dist.push(sq_l2(ta, target.appearance(g)));
                }
            }
            t_loc = (0..template.len()).map(|i| template.location(i)).collect();
        }

        let rho_template = (0..template.len())
            .map(|i| template.polar_radius(i))
            .collect();

        Ok(Engine {
            template,
            target,
            cfg,
            nn_of_target,
            rho_template,
            nn_loc,
            tau_nonzero,
            ann,
            app_dist,
            t_loc,
            window_dependent_nn,
        })
    }

    fn run_scale(&self, scale_idx: usize, entry: &ScaleEntry, stride: usize, gw: usize, gh: usize) -> ScaleOutcome {
        let p = self.cfg.patch_size;
        let (wg, wh) = (entry.w_px / p, entry.h_px / p);
        let m = wg * wh;
        let n = self.template.len();
        let s = m as f64 / n as f64;
        let rscale = measures::radius_scale(s, self.cfg);

        // Window-local geometry shared by every anchor at this scale.
        let pole = [(wg as f64 - 1.0) / 2.0, (wh as f64 - 1.0) / 2.0];
        let mut rho_w = Vec::with_capacity(m);
        let mut loc_w = Vec::with_capacity(m);
        for ly in 0..wh {
            for lx in 0..wg {
                let dx = lx as f64 - pole[0];
                let dy = ly as f64 - pole[1];
                rho_w.push((dx * dx + dy * dy).sqrt());
                loc_w.push([(lx as f64 + 0.5) / wg as f64, (ly as f64 + 0.5) / wh as f64]);
            }
        }
        // Scaled template radius of each target patch's NN.
        let s_rho_nn: Vec<f64> = self
            .nn_of_target
            .iter()
            .map(|&i| rscale * self.rho_template[i as usize])
            .collect();

        let mut scratch = Scratch::new(n, m);
        let mut map = Field::filled(gw, gh, f64::NAN);
        let mut best: Option<(f64, u64, Window, (f64, f64))> = None;
        let mut pos_idx = 0u64;
        let mut y = 0usize;
        while y + wh <= gh {
            let mut x = 0usize;
            while x + wg <= gw {
                let score = self.score_window(x, y, wg, wh, s, &rho_w, &loc_w, &s_rho_nn, &mut scratch);
                map.set(x, y, score);
                let rank = ((scale_idx as u64) << 40) | pos_idx;
                let better = match &best {
                    None => true,
                    Some((bs, br, _, _)) => score > *bs || (score == *bs && rank < *br),
                };
                if better {
                    best = Some((
                        score,
                        rank,
                        Window::new(x * p, y * p, entry.w_px, entry.h_px),
                        (entry.sx, entry.sy),
                    ));
                }
                pos_idx += 1;
                x += stride;
            }
            y += stride;
        }
        ScaleOutcome { map, best }
    }

    #[allow(clippy::too_many_arguments)]
    fn score_window(
        &self,
        x0: usize,
        y0: usize,
        wg: usize,
        wh: usize,
        s: f64,
        rho_w: &[f64],
        loc_w: &[[f64; 2]],
        s_rho_nn: &[f64],
        scratch: &mut Scratch,
    ) -> f64 {
        if self.window_dependent_nn {
            return self.score_window_slow(x0, y0, wg, wh);
        }
        let gw = self.target.grid_w();
        match self.cfg.measure {
            Measure::Sds | Measure::Nsds => {
                let mut tau_cnt = 0usize;
                let mut penalty = 0.0;
                let mut local = 0usize;
                for ly in 0..wh {
                    let row = (y0 + ly) * gw + x0;
                    for lx in 0..wg {
                        let g = row + lx;
                        let nn = self.nn_of_target[g] as usize;
                        if scratch.eps[nn] == 0 {
                            scratch.touched.push(nn as u32);
                        }
                        scratch.eps[nn] += 1;
                        if self.tau_nonzero[g] {
                            tau_cnt += 1;
                        }
                        penalty += (rho_w[local] - s_rho_nn[g]).abs();
                        local += 1;
                    }
                }
                let eps_cnt = scratch.touched.len();
                let mut u = 0.0;
                for &i in &scratch.touched {
                    let ratio = s / scratch.eps[i as usize] as f64;
                    let exponent = if ratio >= 1.0 { 1.0 } else { ratio } - 1.0;
                    u += exponent.exp();
                }
                scratch.reset();
                measures::compose_sds(tau_cnt, eps_cnt, u, penalty, s, self.cfg)
            }
            Measure::Dis => {
                for ly in 0..wh {
                    let row = (y0 + ly) * gw + x0;
                    for lx in 0..wg {
                        let nn = self.nn_of_target[row + lx] as usize;
                        if scratch.eps[nn] == 0 {
                            scratch.touched.push(nn as u32);
                        }
                        scratch.eps[nn] += 1;
                    }
                }
                let kinds = scratch.touched.len();
                scratch.reset();
                kinds as f64 / self.template.len().min(wg * wh) as f64
            }
            Measure::Ddis | Measure::Sddis => {
                // First pass: epsilon histogram.
                for ly in 0..wh {
                    let row = (y0 + ly) * gw + x0;
                    for lx in 0..wg {
                        let nn = self.nn_of_target[row + lx] as usize;
                        if scratch.eps[nn] == 0 {
                            scratch.touched.push(nn as u32);
                        }
                        scratch.eps[nn] += 1;
                    }
                }
                // Second pass: deformation-weighted diversity.
                let mut acc = 0.0;
                let mut local = 0usize;
                for ly in 0..wh {
                    let row = (y0 + ly) * gw + x0;
                    for lx in 0..wg {
                        let g = row + lx;
                        let nn = self.nn_of_target[g] as usize;
                        let weight = if self.cfg.ddis_deformation {
                            let d = sq_l2(&loc_w[local], &self.nn_loc[g]).sqrt();
                            1.0 / (1.0 + d)
                        } else {
                            1.0
                        };
                        acc += weight / scratch.eps[nn] as f64;
                        local += 1;
                    }
                }
                scratch.reset();
                acc / self.template.len().min(wg * wh) as f64
            }
            Measure::Bbs => {
                let n = self.template.len();
                let m = wg * wh;
                let big = self.target.len();
                scratch.nn_t.truncate(0);
                scratch.nn_t.resize(n, (f64::INFINITY, u32::MAX));
                scratch.nn_q.truncate(0);
                scratch.nn_q.resize(m, (f64::INFINITY, u32::MAX));
                for i in 0..n {
                    let base = i * big;
                    let tl = self.t_loc[i];
                    let mut local = 0usize;
                    for ly in 0..wh {
                        let row = (y0 + ly) * gw + x0;
                        for lx in 0..wg {
                            let g = row + lx;
                            let d = self.app_dist[base + g]
                                + self.cfg.lambda * sq_l2(&tl, &loc_w[local]);
                            if d < scratch.nn_t[i].0 {
                                scratch.nn_t[i] = (d, local as u32);
                            }
                            if d < scratch.nn_q[local].0 {
                                scratch.nn_q[local] = (d, i as u32);
                            }
                            local += 1;
                        }
                    }
                }
                let mut mutual = 0usize;
                for (j, &(_, i)) in scratch.nn_q.iter().enumerate() {
                    if scratch.nn_t[i as usize].1 == j as u32 {
                        mutual += 1;
                    }
                }
                mutual as f64 / n.min(m) as f64
            }
            Measure::Ssd | Measure::Sad => {
                // Fixed-scale: window grid equals the template grid.
                let mut acc = 0.0;
                let mut i = 0usize;
                for ly in 0..wh {
                    let row = (y0 + ly) * gw + x0;
                    for lx in 0..wg {
                        let a = self.template.appearance(i);
                        let b = self.target.appearance(row + lx);
                        if self.cfg.measure == Measure::Ssd {
                            acc += sq_l2(a, b);
                        } else {
                            for (x, y) in a.iter().zip(b) {
                                acc += (x - y).abs();
                            }
                        }
                        i += 1;
                    }
                }
                -acc
            }
        }
    }

    /// Correct-by-construction path for window-dependent NN modes:
    /// materialize the window and call the standalone measures.
    fn score_window_slow(&self, x0: usize, y0: usize, wg: usize, wh: usize) -> f64 {
        let win = Window::new(x0, y0, wg, wh);
        let (view, ids) = self
            .target
            .window_view(&win)
            .expect("anchor iteration stays in bounds");
        let result = match self.cfg.measure {
            Measure::Sds | Measure::Nsds => measures::sds_score(
                self.template,
                &view,
                &ids,
                self.ann.as_ref().expect("diversity path built the table"),
                self.cfg,
            ),
            Measure::Dis => measures::dis_score(self.template, &view, self.cfg),
            Measure::Ddis | Measure::Sddis => measures::ddis_score(self.template, &view, self.cfg),
            Measure::Bbs => measures::bbs_score(self.template, &view, self.cfg),
            Measure::Ssd => measures::ssd_score(self.template, &view),
            Measure::Sad => measures::sad_score(self.template, &view),
        };
        result.expect("window view matches template feature layout")
    }
}

fn load_or_build_ann(
    template: &PatchSet,
    target: &PatchSet,
    cfg: &MatchConfig,
    mode: DistanceMode,
    opts: &MatchOptions,
) -> Result<AnnTable> {
    if let Some(dir) = &opts.cache_dir {
        let key = nn::ann_cache_key(template, target, cfg.lambda, mode, cfg.ann_k);
        if let Some(table) = nn::load_cached_ann(dir, &key) {
            return Ok(table);
        }
        let table = build_ann_table(template, target, cfg.lambda, mode, cfg.ann_k)?;
        nn::store_cached_ann(dir, &key, &table)?;
        return Ok(table);
    }
    build_ann_table(template, target, cfg.lambda, mode, cfg.ann_k)
}

struct Scratch {
    eps: Vec<u32>,
    touched: Vec<u32>,
    nn_t: Vec<(f64, u32)>,
    nn_q: Vec<(f64, u32)>,
}

impl Scratch {
    fn new(n: usize, m: usize) -> Self {
        Self {
            eps: vec![0; n],
            touched: Vec::with_capacity(n.min(m)),
            nn_t: Vec::new(),
            nn_q: Vec::new(),
        }
    }

    #[inline]
    fn reset(&mut self) {
        for &i in &self.touched {
            self.eps[i as usize] = 0;
        }
        self.touched.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise_image(rng: &mut ChaCha8Rng, w: usize, h: usize, channels: usize) -> Image {
        let data = (0..w * h * channels).map(|_| rng.random()).collect();
        Image::new(w, h, channels, data).unwrap()
    }

    #[test]
    fn candidate_count_single_scale() {
        let grid = ScaleGrid::new(vec![1.0], vec![1.0], 100).unwrap();
        let candidates = generate_candidates((100, 100), (20, 20), &grid, 2).unwrap();
        // stride = target width: a single column of anchors.
        assert_eq!(candidates.len(), 1);
        let grid = ScaleGrid::new(vec![1.0], vec![1.0], 2).unwrap();
        let candidates = generate_candidates((100, 100), (20, 20), &grid, 2).unwrap();
        let per_axis = (100 - 20) / 2 + 1;
        assert_eq!(candidates.len(), per_axis * per_axis);
    }

    #[test]
    fn candidate_count_full_grid_matches_closed_form() {
        let grid = ScaleGrid::uniform(0.5, 2.0, 0.1, 2).unwrap();
        let candidates = generate_candidates((100, 100), (20, 20), &grid, 2).unwrap();
        // Independent count: distinct rounded extents, then the anchor
        // arithmetic per extent.
        let mut seen = std::collections::HashSet::new();
        let mut expected = 0usize;
        for (sx, sy) in grid.pairs() {
            let w = ((sx * 20.0 / 2.0).round() as usize).max(1) * 2;
            let h = ((sy * 20.0 / 2.0).round() as usize).max(1) * 2;
            if w > 100 || h > 100 || !seen.insert((w, h)) {
                continue;
            }
            expected += ((100 - w) / 2 + 1) * ((100 - h) / 2 + 1);
        }
        assert_eq!(candidates.len(), expected);
    }

    #[test]
    fn no_fit_is_empty_result_error() {
        let grid = ScaleGrid::uniform(0.5, 2.0, 0.5, 2).unwrap();
        assert!(matches!(
            generate_candidates((10, 10), (40, 40), &grid, 2),
            Err(Error::EmptyResult(_))
        ));
    }

    #[test]
    fn misaligned_stride_rejected() {
        let grid = ScaleGrid::new(vec![1.0], vec![1.0], 3).unwrap();
        assert!(matches!(
            generate_candidates((50, 50), (10, 10), &grid, 2),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn self_match_recovers_template_location() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let target = noise_image(&mut rng, 40, 40, 3);
        let template = target.crop(&Window::new(12, 8, 16, 16)).unwrap();
        let cfg = MatchConfig::default();
        let grid = ScaleGrid::default();
        let result = match_template(&template, &target, &cfg, &grid).unwrap();
        assert_eq!(result.best, Window::new(12, 8, 16, 16));
        assert_eq!(result.best_scale, (1.0, 1.0));
    }

    #[test]
    fn ssd_matches_naive_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let target = noise_image(&mut rng, 8, 8, 1);
        let template = target.crop(&Window::new(2, 4, 4, 4)).unwrap();
        let cfg = MatchConfig::with_measure(Measure::Ssd);
        let grid = ScaleGrid::fixed(2);
        let result = match_template(&template, &target, &cfg, &grid).unwrap();
        // Naive exhaustive SSD over pixel-aligned anchors (stride 2).
        let mut best = (f64::NEG_INFINITY, Window::new(0, 0, 4, 4));
        for y in (0..=4).step_by(2) {
            for x in (0..=4).step_by(2) {
                let mut acc = 0.0;
                for dy in 0..4 {
                    for dx in 0..4 {
                        let d = target.get(x + dx, y + dy, 0) - template.get(dx, dy, 0);
                        acc -= d * d;
                    }
                }
                if acc > best.0 {
                    best = (acc, Window::new(x, y, 4, 4));
                }
            }
        }
        assert_eq!(result.best, best.1);
        assert!((result.best_score - best.0).abs() < 1e-12);
    }

    #[test]
    fn engine_scores_equal_standalone_measures() {
        // The fast paths must reproduce the standalone measure functions
        // applied to materialized window views.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let target = noise_image(&mut rng, 24, 20, 3);
        let template = target.crop(&Window::new(4, 2, 8, 8)).unwrap();
        let grid = ScaleGrid::new(vec![0.75, 1.0, 1.5], vec![1.0, 1.25], 2).unwrap();
        for measure in [
            Measure::Sds,
            Measure::Dis,
            Measure::Ddis,
            Measure::Bbs,
            Measure::Ssd,
            Measure::Sad,
        ] {
            let cfg = MatchConfig::with_measure(measure);
            let opts = MatchOptions {
                keep_per_scale_maps: true,
                cache_dir: None,
            };
            let result = match_template_with(&template, &target, &cfg, &grid, &opts).unwrap();
            let template_ps = patchify(&template, cfg.patch_size, cfg.rank_radius).unwrap();
            let target_ps = patchify(&target, cfg.patch_size, cfg.rank_radius).unwrap();
            let mode = cfg.resolved_distance_mode(measure);
            let table = if matches!(measure, Measure::Sds | Measure::Nsds) {
                Some(
                    build_ann_table(&template_ps, &target_ps, cfg.lambda, mode, cfg.ann_k)
                        .unwrap(),
                )
            } else {
                None
            };
            // Compare through the candidate list, which carries extents.
            let effective = if measure.multi_scale() {
                grid.clone()
            } else {
                ScaleGrid::fixed(grid.spatial_stride)
            };
            let candidates = generate_candidates(
                (target.width(), target.height()),
                (template.width(), template.height()),
                &effective,
                cfg.patch_size,
            )
            .unwrap();
            for c in candidates.iter().step_by(7) {
                let p = cfg.patch_size;
                let patch_win = Window::new(c.window.x / p, c.window.y / p, c.window.w / p, c.window.h / p);
                let (view, ids) = target_ps.window_view(&patch_win).unwrap();
                let want = match measure {
                    Measure::Sds | Measure::Nsds => measures::sds_score(
                        &template_ps,
                        &view,
                        &ids,
                        table.as_ref().unwrap(),
                        &cfg,
                    )
                    .unwrap(),
                    Measure::Dis => measures::dis_score(&template_ps, &view, &cfg).unwrap(),
                    Measure::Ddis | Measure::Sddis => {
                        measures::ddis_score(&template_ps, &view, &cfg).unwrap()
                    }
                    Measure::Bbs => measures::bbs_score(&template_ps, &view, &cfg).unwrap(),
                    Measure::Ssd => measures::ssd_score(&template_ps, &view).unwrap(),
                    Measure::Sad => measures::sad_score(&template_ps, &view).unwrap(),
                };
                // Find the per-scale map holding this candidate.
                let maps = result.per_scale_maps.as_ref().unwrap();
                let map = maps
                    .iter()
                    .find(|((sx, sy), _)| (*sx - c.sx).abs() < 1e-12 && (*sy - c.sy).abs() < 1e-12)
                    .map(|(_, m)| m)
                    .unwrap();
                let got = map.get(patch_win.x, patch_win.y);
                assert!(
                    (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                    "{measure:?}: engine {got} vs standalone {want}"
                );
            }
        }
    }

    #[test]
    fn determinism_across_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let target = noise_image(&mut rng, 30, 30, 3);
        let template = target.crop(&Window::new(10, 10, 10, 10)).unwrap();
        let cfg = MatchConfig::default();
        let grid = ScaleGrid::uniform(0.5, 1.5, 0.25, 2).unwrap();
        let a = match_template(&template, &target, &cfg, &grid).unwrap();
        let b = match_template(&template, &target, &cfg, &grid).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.best_score, b.best_score);
        assert!(a.score_map.bits_eq(&b.score_map));
    }

    #[test]
    fn score_map_is_max_over_scales() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let target = noise_image(&mut rng, 24, 24, 1);
        let template = target.crop(&Window::new(8, 8, 8, 8)).unwrap();
        let cfg = MatchConfig::default();
        let grid = ScaleGrid::uniform(0.75, 1.25, 0.25, 2).unwrap();
        let opts = MatchOptions {
            keep_per_scale_maps: true,
            cache_dir: None,
        };
        let result = match_template_with(&template, &target, &cfg, &grid, &opts).unwrap();
        let maps = result.per_scale_maps.as_ref().unwrap();
        for gy in 0..result.score_map.height() {
            for gx in 0..result.score_map.width() {
                let merged = result.score_map.get(gx, gy);
                let max = maps
                    .iter()
                    .map(|(_, m)| m.get(gx, gy))
                    .filter(|v| !v.is_nan())
                    .fold(f64::NAN, f64::max);
                if merged.is_nan() {
                    assert!(max.is_nan());
                } else {
                    assert_eq!(merged, max);
                }
            }
        }
    }

    #[test]
    fn nsds_forces_fixed_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let target = noise_image(&mut rng, 24, 24, 1);
        let template = target.crop(&Window::new(4, 4, 8, 8)).unwrap();
        let cfg = MatchConfig::with_measure(Measure::Nsds);
        let grid = ScaleGrid::default();
        let opts = MatchOptions {
            keep_per_scale_maps: true,
            cache_dir: None,
        };
        let result = match_template_with(&template, &target, &cfg, &grid, &opts).unwrap();
        assert_eq!(result.per_scale_maps.as_ref().unwrap().len(), 1);
        assert_eq!(result.best_scale, (1.0, 1.0));
        assert_eq!(result.best.w, 8);
    }
}
