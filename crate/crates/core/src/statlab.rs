//! Monte-Carlo validation of the similarity measures on synthetic
//! Gaussian point sets: 1D expectation maps over (mu, sigma), scale
//! estimation by similarity maximization, and 2D rotation-robustness
//! maps.
//!
//! Point sets are cast as patch sets with one patch per point. Appearance
//! is the point's value (1D), its coordinates (2D Cartesian casting) or
//! its radius from the set centroid (2D polar casting, which is what the
//! rank-and-radius machinery of SDS amounts to for abstract points);
//! ranks are the 1D index-neighborhood analogue of the circular pixel
//! rank; the polar-radius pole is the centroid of the point positions.
//! Cells of every map draw from RNG streams derived from (seed, cell),
//! so results are independent of worker count, and cells that are
//! compared against each other share draws (common random numbers).

use rayon::prelude::*;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{MatchConfig, Measure};
use crate::error::{Error, Result};
use crate::features::PatchSet;
use crate::measures;
use crate::nn::{build_ann_table, AnnTable};

/// Gaussian model points are drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GaussianSpec {
    OneD {
        mu: f64,
        sigma: f64,
    },
    /// Axis-aligned 2D Gaussian rotated by `theta` radians.
    TwoD {
        mu: [f64; 2],
        sigma1: f64,
        sigma2: f64,
        theta: f64,
    },
}

impl GaussianSpec {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            GaussianSpec::OneD { sigma, .. } => *sigma >= 0.0 && sigma.is_finite(),
            GaussianSpec::TwoD { sigma1, sigma2, .. } => {
                *sigma1 > 0.0 && *sigma2 > 0.0 && sigma1.is_finite() && sigma2.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter("Gaussian sigma must be positive".into()))
        }
    }
}

/// Deterministic per-stream RNG (splitmix64 expansion of seed and
/// stream id).
pub fn derive_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut x = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^= x >> 31;
    ChaCha8Rng::seed_from_u64(x)
}

/// Draws `count` i.i.d. points; 1D draws land on the x axis.
pub fn sample_point_set(spec: &GaussianSpec, count: usize, seed: u64) -> Result<Vec<[f64; 2]>> {
    if count == 0 {
        return Err(Error::Parameter("sample count must be >= 1".into()));
    }
    spec.validate()?;
    let mut rng = derive_rng(seed, 0);
    Ok(sample_with(spec, count, &mut rng))
}

fn sample_with(spec: &GaussianSpec, count: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(count);
    match *spec {
        GaussianSpec::OneD { mu, sigma } => {
            for _ in 0..count {
                let z: f64 = rng.sample(StandardNormal);
                out.push([mu + sigma * z, 0.0]);
            }
        }
        GaussianSpec::TwoD {
            mu,
            sigma1,
            sigma2,
            theta,
        } => {
            let (sin, cos) = theta.sin_cos();
            for _ in 0..count {
                let zx: f64 = rng.sample(StandardNormal);
                let zy: f64 = rng.sample(StandardNormal);
                let x = sigma1 * zx;
                let y = sigma2 * zy;
                out.push([mu[0] + cos * x - sin * y, mu[1] + sin * x + cos * y]);
            }
        }
    }
    out
}

/// Rank of each value among the values within `r` index steps, divided
/// by r^2 (the index-line analogue of the circular pixel rank).
fn index_ranks(values: &[f64], r: usize) -> Vec<f64> {
    let n = values.len();
    let inv_r2 = 1.0 / (r * r) as f64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(r);
        let hi = (i + r).min(n - 1);
        let mut count = 0usize;
        for j in lo..=hi {
            if values[i] >= values[j] {
                count += 1;
            }
        }
        out.push(count as f64 * inv_r2);
    }
    out
}

/// 1D casting: appearance = the scalar value, appearance ranks over the
/// sampling-order index line, locations on the unit line. Geometric
/// positions use the value as sort key, so each point's polar radius is
/// its distance from the median rank.
pub fn cast_points_1d(points: &[[f64; 2]], rank_radius: usize) -> Result<PatchSet> {
    let values: Vec<f64> = points.iter().map(|p| p[0]).collect();
    let ranks = index_ranks(&values, rank_radius);
    let position: Vec<f64> = values.iter().flat_map(|v| [*v, 0.0]).collect();
    PatchSet::from_points(values, 1, ranks, 1, position)
}

/// 2D Cartesian casting: appearance = the raw coordinates (the
/// convention the BBS-style baselines use), per-coordinate index ranks,
/// locations on a unit-square index grid.
pub fn cast_points_2d_cartesian(points: &[[f64; 2]], rank_radius: usize) -> Result<PatchSet> {
    let n = points.len();
    let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = points.iter().map(|p| p[1]).collect();
    let rx = index_ranks(&xs, rank_radius);
    let ry = index_ranks(&ys, rank_radius);
    let appearance: Vec<f64> = points.iter().flat_map(|p| [p[0], p[1]]).collect();
    let rank: Vec<f64> = (0..n).flat_map(|i| [rx[i], ry[i]]).collect();
    let position: Vec<f64> = centroid_radii(points).iter().flat_map(|r| [*r, 0.0]).collect();
    // Unit-square locations: indices arranged row-major on the smallest
    // square grid that holds them.
    let side = (n as f64).sqrt().ceil() as usize;
    let mut location = Vec::with_capacity(n * 2);
    for i in 0..n {
        location.push(((i % side) as f64 + 0.5) / side as f64);
        location.push(((i / side) as f64 + 0.5) / side as f64);
    }
    PatchSet::from_points_with_locations(appearance, 2, rank, 2, location, position)
}

fn centroid_radii(points: &[[f64; 2]]) -> Vec<f64> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / n;
    points
        .iter()
        .map(|p| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt())
        .collect()
}

/// 2D polar casting used by the diversity measures: the point's feature
/// is its radius from the set centroid (with the matching index ranks),
/// which is what the rotation-invariant rank + polar-radius machinery
/// measures in image space. All features are invariant under a joint
/// rotation of the set.
pub fn cast_points_2d_polar(points: &[[f64; 2]], rank_radius: usize) -> Result<PatchSet> {
    let radii = centroid_radii(points);
    let ranks = index_ranks(&radii, rank_radius);
    let position: Vec<f64> = radii.iter().flat_map(|r| [*r, 0.0]).collect();
    PatchSet::from_points(radii, 1, ranks, 1, position)
}

/// Casting used for a measure in the 2D experiments.
fn cast_2d_for(measure: Measure, points: &[[f64; 2]], rank_radius: usize) -> Result<PatchSet> {
    match measure {
        Measure::Sds | Measure::Nsds | Measure::Dis | Measure::Ddis | Measure::Sddis => {
            cast_points_2d_polar(points, rank_radius)
        }
        Measure::Bbs | Measure::Ssd | Measure::Sad => {
            cast_points_2d_cartesian(points, rank_radius)
        }
    }
}

fn score_point_sets(
    measure: Measure,
    template: &PatchSet,
    q: &PatchSet,
    q_ids: &[usize],
    table: Option<&AnnTable>,
    cfg: &MatchConfig,
) -> Result<f64> {
    match measure {
        Measure::Sds | Measure::Nsds => {
            let table = table.ok_or_else(|| {
                Error::Parameter("SDS over point sets requires an ANN table".into())
            })?;
            measures::sds_score(template, q, q_ids, table, cfg)
        }
        Measure::Bbs => measures::bbs_score(template, q, cfg),
        Measure::Dis => measures::dis_score(template, q, cfg),
        Measure::Ddis | Measure::Sddis => measures::ddis_score(template, q, cfg),
        Measure::Ssd => measures::ssd_score(template, q),
        Measure::Sad => measures::sad_score(template, q),
    }
}

fn needs_table(measure: Measure) -> bool {
    matches!(measure, Measure::Sds | Measure::Nsds)
}

/// Monte-Carlo estimates over a 2-axis parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationMap {
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    /// Row-major over (axis1, axis2).
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub trials: usize,
}

impl ExpectationMap {
    #[inline]
    pub fn idx(&self, i1: usize, i2: usize) -> usize {
        i1 * self.axis2.len() + i2
    }

    pub fn mean_at(&self, i1: usize, i2: usize) -> f64 {
        self.mean[self.idx(i1, i2)]
    }

    pub fn stderr_at(&self, i1: usize, i2: usize) -> f64 {
        self.stderr[self.idx(i1, i2)]
    }

    /// Cell with the largest mean (first in row-major order on ties).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_v = f64::NEG_INFINITY;
        for i1 in 0..self.axis1.len() {
            for i2 in 0..self.axis2.len() {
                let v = self.mean_at(i1, i2);
                if v > best_v {
                    best_v = v;
                    best = (i1, i2);
                }
            }
        }
        best
    }

    /// Pearson correlation of cell means with another map over the same
    /// grid.
    pub fn correlation(&self, other: &ExpectationMap) -> f64 {
        assert_eq!(self.mean.len(), other.mean.len());
        let n = self.mean.len() as f64;
        let ma = self.mean.iter().sum::<f64>() / n;
        let mb = other.mean.iter().sum::<f64>() / n;
        let mut cov = 0.0;
        let mut va = 0.0;
        let mut vb = 0.0;
        for (a, b) in self.mean.iter().zip(&other.mean) {
            cov += (a - ma) * (b - mb);
            va += (a - ma) * (a - ma);
            vb += (b - mb) * (b - mb);
        }
        cov / (va.sqrt() * vb.sqrt())
    }

    /// CSV rows: axis1, axis2, mean, stderr, trials.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "axis1,axis2,mean,stderr,trials")?;
        for i1 in 0..self.axis1.len() {
            for i2 in 0..self.axis2.len() {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    self.axis1[i1],
                    self.axis2[i2],
                    self.mean_at(i1, i2),
                    self.stderr_at(i1, i2),
                    self.trials
                )?;
            }
        }
        Ok(())
    }

    /// Means as a field (axis1 along y, axis2 along x), for PGM dumps.
    pub fn heatmap(&self) -> crate::image::Field {
        let mut field = crate::image::Field::filled(self.axis2.len(), self.axis1.len(), 0.0);
        for i1 in 0..self.axis1.len() {
            for i2 in 0..self.axis2.len() {
                field.set(i2, i1, self.mean_at(i1, i2));
            }
        }
        field
    }
}

fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Default (mu, sigma) grids bracketing the matched model.
pub fn default_mu_grid() -> Vec<f64> {
    (0..=16).map(|i| i as f64 * 0.25).collect()
}

pub fn default_sigma_grid() -> Vec<f64> {
    (1..=16).map(|i| i as f64 * 0.25).collect()
}

/// Scale sweep 0.5..2.0 step 0.1.
pub fn default_s_grid() -> Vec<f64> {
    (0..=15).map(|i| 0.5 + 0.1 * i as f64).collect()
}

pub fn default_sigma2_grid() -> Vec<f64> {
    vec![0.25, 1.0, 4.0, 10.0]
}

pub fn default_theta_grid() -> Vec<f64> {
    use std::f64::consts::PI;
    vec![0.0, -PI / 4.0, -PI / 2.0, -3.0 * PI / 4.0, -PI]
}

/// Expectation map of `measure` between T ~ N(0,1)^t_count and
/// Q ~ N(mu,sigma)^q_count over the (mu, sigma) grid. The candidate set
/// equals the window (the whole of Q). Cells share draws per trial via
/// common random numbers: Q is mu + sigma * z with z shared across
/// cells, which makes cross-cell comparisons paired.
#[allow(clippy::too_many_arguments)]
pub fn expectation_map_1d(
    measure: Measure,
    t_count: usize,
    q_count: usize,
    mu_grid: &[f64],
    sigma_grid: &[f64],
    trials: usize,
    seed: u64,
    cfg: &MatchConfig,
) -> Result<ExpectationMap> {
    if mu_grid.is_empty() || sigma_grid.is_empty() {
        return Err(Error::Parameter("parameter grids must be non-empty".into()));
    }
    if trials == 0 || t_count == 0 || q_count == 0 {
        return Err(Error::Parameter("counts and trials must be >= 1".into()));
    }
    if matches!(measure, Measure::Ssd | Measure::Sad) && t_count != q_count {
        return Err(Error::Parameter(
            "SSD/SAD need equally sized point sets".into(),
        ));
    }
    cfg.validate()?;
    // Per-trial base draws, shared by every cell.
    let draws: Vec<(Vec<f64>, Vec<f64>)> = (0..trials)
        .map(|t| {
            let mut rng = derive_rng(seed, t as u64);
            let t_points: Vec<f64> = (0..t_count).map(|_| rng.sample(StandardNormal)).collect();
            let z: Vec<f64> = (0..q_count).map(|_| rng.sample(StandardNormal)).collect();
            (t_points, z)
        })
        .collect();

    let n_cells = mu_grid.len() * sigma_grid.len();
    let cells: Vec<(f64, f64)> = (0..n_cells)
        .into_par_iter()
        .map(|cell| {
            let mu = mu_grid[cell / sigma_grid.len()];
            let sigma = sigma_grid[cell % sigma_grid.len()];
            let mut samples = Vec::with_capacity(trials);
            for (t_points, z) in &draws {
                let t_pts: Vec<[f64; 2]> = t_points.iter().map(|x| [*x, 0.0]).collect();
                let q_pts: Vec<[f64; 2]> = z.iter().map(|v| [mu + sigma * v, 0.0]).collect();
                let t_ps = cast_points_1d(&t_pts, cfg.rank_radius).expect("non-empty");
                let q_ps = cast_points_1d(&q_pts, cfg.rank_radius).expect("non-empty");
                let ids = q_ps.identity_ids();
                let table = if needs_table(measure) {
                    let mode = cfg.resolved_distance_mode(measure);
                    Some(
                        build_ann_table(&t_ps, &q_ps, cfg.lambda, mode, cfg.ann_k)
                            .expect("table over non-empty sets"),
                    )
                } else {
                    None
                };
                let score = score_point_sets(measure, &t_ps, &q_ps, &ids, table.as_ref(), cfg)
                    .expect("point-set scoring");
                samples.push(score);
            }
            mean_stderr(&samples)
        })
        .collect();

    let (mean, stderr) = cells.into_iter().unzip();
    Ok(ExpectationMap {
        axis1: mu_grid.to_vec(),
        axis2: sigma_grid.to_vec(),
        mean,
        stderr,
        trials,
    })
}

/// Histogram of scale estimates from similarity maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleHistogram {
    pub gt_s: f64,
    pub s_values: Vec<f64>,
    pub counts: Vec<u32>,
    pub trials: usize,
}

impl ScaleHistogram {
    /// Scale value of the most frequent bin (lowest scale on ties).
    pub fn mode_s(&self) -> f64 {
        let mut best = 0usize;
        for (i, c) in self.counts.iter().enumerate() {
            if *c > self.counts[best] {
                best = i;
            }
        }
        self.s_values[best]
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|c| *c as f64 / self.trials as f64)
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "s,count,frequency")?;
        for (s, c) in self.s_values.iter().zip(&self.counts) {
            writeln!(out, "{},{},{}", s, c, *c as f64 / self.trials as f64)?;
        }
        Ok(())
    }
}

/// Nearest-neighbor resampling of a sequence to `m` entries, the 1D
/// analogue of rescaling an image row.
fn nn_resample_indices(n: usize, m: usize) -> Vec<usize> {
    (0..m)
        .map(|j| (((j as f64 + 0.5) * n as f64 / m as f64) as usize).min(n - 1))
        .collect()
}

/// Scale estimation: the full point set is the template resampled
/// nearest-neighbor style to `gt_s * t_count` foreground points, plus
/// background points from a random Gaussian (mu, sigma ~ U[0, 10] per
/// trial). Windows Q of size `s * t_count` sample the foreground
/// preferentially (resampling it when smaller, filling from the
/// background when larger); the estimate is the scale maximizing the
/// measure.
#[allow(clippy::too_many_arguments)]
pub fn scale_estimation_trials(
    measure: Measure,
    gt_s: f64,
    t_count: usize,
    script_count: usize,
    s_grid: &[f64],
    trials: usize,
    seed: u64,
    cfg: &MatchConfig,
) -> Result<ScaleHistogram> {
    let fg_count = (gt_s * t_count as f64).round() as usize;
    if fg_count == 0 || fg_count > script_count {
        return Err(Error::Parameter(format!(
            "infeasible gt_s {gt_s}: foreground {fg_count} must lie in 1..={script_count}"
        )));
    }
    if s_grid.is_empty() || trials == 0 {
        return Err(Error::Parameter("need a scale grid and trials >= 1".into()));
    }
    cfg.validate()?;
    let mode = cfg.resolved_distance_mode(measure);

    let estimates: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = derive_rng(seed, 0x5ca1e + trial as u64);
            let template: Vec<[f64; 2]> = (0..t_count)
                .map(|_| [rng.sample::<f64, _>(StandardNormal), 0.0])
                .collect();
            // The scaled object: the template itself, NN-resampled.
            let foreground: Vec<f64> = nn_resample_indices(t_count, fg_count)
                .into_iter()
                .map(|i| template[i][0])
                .collect();
            let mu_b: f64 = rng.random_range(0.0..10.0);
            let sigma_b: f64 = rng.random_range(0.0..10.0);
            let background: Vec<f64> = (0..script_count - fg_count)
                .map(|_| mu_b + sigma_b * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let mut script: Vec<[f64; 2]> = Vec::with_capacity(script_count);
            script.extend(foreground.iter().map(|x| [*x, 0.0]));
            script.extend(background.iter().map(|x| [*x, 0.0]));

            let t_ps = cast_points_1d(&template, cfg.rank_radius).expect("non-empty");
            let script_ps = cast_points_1d(&script, cfg.rank_radius).expect("non-empty");
            let table = needs_table(measure).then(|| {
                build_ann_table(&t_ps, &script_ps, cfg.lambda, mode, cfg.ann_k)
                    .expect("table over non-empty sets")
            });

            let mut best = (0usize, f64::NEG_INFINITY);
            for (si, &s) in s_grid.iter().enumerate() {
                let q_size = ((s * t_count as f64).round() as usize).clamp(1, script_count);
                // A window smaller than the object crops it (sequence
                // prefix); a larger one covers it and takes in
                // background.
                let ids: Vec<usize> = (0..q_size.min(fg_count))
                    .chain(fg_count..fg_count + q_size.saturating_sub(fg_count))
                    .collect();
                let (q_ps, gids) = script_ps.subset(&ids).expect("ids in range");
                let score = score_point_sets(measure, &t_ps, &q_ps, &gids, table.as_ref(), cfg)
                    .expect("point-set scoring");
                if score > best.1 {
                    best = (si, score);
                }
            }
            best.0
        })
        .collect();

    let mut counts = vec![0u32; s_grid.len()];
    for e in estimates {
        counts[e] += 1;
    }
    Ok(ScaleHistogram {
        gt_s,
        s_values: s_grid.to_vec(),
        counts,
        trials,
    })
}

/// Rotation-robustness map: E[measure(T, rotate(Q, theta))] with T and Q
/// drawn from the same axis-aligned anisotropic Gaussian. Rows (fixed
/// sigma2) share draws across theta, so only the rotation varies within
/// a row.
#[allow(clippy::too_many_arguments)]
pub fn rotation_map_2d(
    measure: Measure,
    sigma2_grid: &[f64],
    theta_grid: &[f64],
    point_count: usize,
    trials: usize,
    seed: u64,
    cfg: &MatchConfig,
) -> Result<ExpectationMap> {
    if sigma2_grid.is_empty() || theta_grid.is_empty() {
        return Err(Error::Parameter("parameter grids must be non-empty".into()));
    }
    if sigma2_grid.iter().any(|s| *s <= 0.0) {
        return Err(Error::Parameter("sigma2 must be positive".into()));
    }
    if trials == 0 || point_count == 0 {
        return Err(Error::Parameter("counts and trials must be >= 1".into()));
    }
    cfg.validate()?;

    let n_rows = sigma2_grid.len();
    let rows: Vec<Vec<(f64, f64)>> = (0..n_rows)
        .into_par_iter()
        .map(|row| {
            let sigma2 = sigma2_grid[row];
            let mut per_theta: Vec<Vec<f64>> = vec![Vec::with_capacity(trials); theta_grid.len()];
            for trial in 0..trials {
                let mut rng = derive_rng(seed, ((row as u64) << 32) | trial as u64);
                let t_spec = GaussianSpec::TwoD {
                    mu: [0.0, 0.0],
                    sigma1: 1.0,
                    sigma2,
                    theta: 0.0,
                };
                let t_points = sample_with(&t_spec, point_count, &mut rng);
                let q_base = sample_with(&t_spec, point_count, &mut rng);
                let t_ps = cast_2d_for(measure, &t_points, cfg.rank_radius).expect("non-empty");
                for (ti, &theta) in theta_grid.iter().enumerate() {
                    let (sin, cos) = theta.sin_cos();
                    let q_points: Vec<[f64; 2]> = q_base
                        .iter()
                        .map(|p| [cos * p[0] - sin * p[1], sin * p[0] + cos * p[1]])
                        .collect();
                    let q_ps =
                        cast_2d_for(measure, &q_points, cfg.rank_radius).expect("non-empty");
                    let ids = q_ps.identity_ids();
                    let table = needs_table(measure).then(|| {
                        let mode = cfg.resolved_distance_mode(measure);
                        build_ann_table(&t_ps, &q_ps, cfg.lambda, mode, cfg.ann_k)
                            .expect("table over non-empty sets")
                    });
                    let score = score_point_sets(measure, &t_ps, &q_ps, &ids, table.as_ref(), cfg)
                        .expect("point-set scoring");
                    per_theta[ti].push(score);
                }
            }
            per_theta.iter().map(|s| mean_stderr(s)).collect()
        })
        .collect();

    let mut mean = Vec::with_capacity(n_rows * theta_grid.len());
    let mut stderr = Vec::with_capacity(n_rows * theta_grid.len());
    for row in rows {
        for (m, se) in row {
            mean.push(m);
            stderr.push(se);
        }
    }
    Ok(ExpectationMap {
        axis1: sigma2_grid.to_vec(),
        axis2: theta_grid.to_vec(),
        mean,
        stderr,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_seed_deterministic() {
        let spec = GaussianSpec::OneD { mu: 1.0, sigma: 2.0 };
        let a = sample_point_set(&spec, 50, 7).unwrap();
        let b = sample_point_set(&spec, 50, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_point_set(&spec, 50, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_rotation_is_identity() {
        let base = GaussianSpec::TwoD {
            mu: [0.5, -0.5],
            sigma1: 1.0,
            sigma2: 3.0,
            theta: 0.0,
        };
        let pts = sample_point_set(&base, 20, 3).unwrap();
        let again = sample_point_set(&base, 20, 3).unwrap();
        assert_eq!(pts, again);
    }

    #[test]
    fn sample_mean_close_to_zero() {
        let spec = GaussianSpec::OneD { mu: 0.0, sigma: 1.0 };
        let n = 100_000;
        let pts = sample_point_set(&spec, n, 11).unwrap();
        let mean = pts.iter().map(|p| p[0]).sum::<f64>() / n as f64;
        // 3 sigma / sqrt(N) < 0.01; allow 0.02 per the standard-error bound.
        assert!(mean.abs() < 0.02, "sample mean {mean}");
    }

    #[test]
    fn index_ranks_match_direct_count() {
        let values = [0.3, 0.1, 0.4, 0.1, 0.5];
        let r = 2;
        let ranks = index_ranks(&values, r);
        // i = 2: window 0..=4: 0.4 >= {0.3, 0.1, 0.4, 0.1} but not 0.5.
        assert_eq!(ranks[2], 4.0 / 4.0);
        // i = 0: window 0..=2: 0.3 >= {0.3, 0.1}.
        assert_eq!(ranks[0], 2.0 / 4.0);
    }

    #[test]
    fn polar_casting_is_rotation_invariant() {
        let spec = GaussianSpec::TwoD {
            mu: [0.0, 0.0],
            sigma1: 1.0,
            sigma2: 5.0,
            theta: 0.0,
        };
        let pts = sample_point_set(&spec, 40, 5).unwrap();
        let theta = -1.1f64;
        let (sin, cos) = theta.sin_cos();
        let rotated: Vec<[f64; 2]> = pts
            .iter()
            .map(|p| [cos * p[0] - sin * p[1], sin * p[0] + cos * p[1]])
            .collect();
        let a = cast_points_2d_polar(&pts, 3).unwrap();
        let b = cast_points_2d_polar(&rotated, 3).unwrap();
        for i in 0..a.len() {
            assert!((a.appearance(i)[0] - b.appearance(i)[0]).abs() < 1e-9);
            assert!((a.polar_radius(i) - b.polar_radius(i)).abs() < 1e-9);
            assert_eq!(a.rank(i), b.rank(i));
        }
    }

    #[test]
    fn expectation_map_reproducible() {
        let cfg = MatchConfig::default();
        let a = expectation_map_1d(Measure::Sds, 20, 20, &[0.0, 1.0], &[0.5, 1.0], 3, 42, &cfg)
            .unwrap();
        let b = expectation_map_1d(Measure::Sds, 20, 20, &[0.0, 1.0], &[0.5, 1.0], 3, 42, &cfg)
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mean.len(), 4);
        assert!(a.mean.iter().all(|m| m.is_finite()));
    }

    #[test]
    fn expectation_map_single_trial_has_zero_stderr() {
        let cfg = MatchConfig::default();
        let map = expectation_map_1d(Measure::Bbs, 10, 10, &[0.0], &[1.0], 1, 9, &cfg).unwrap();
        assert_eq!(map.stderr, vec![0.0]);
    }

    #[test]
    fn scale_histogram_counts_sum_to_trials() {
        let cfg = MatchConfig::default();
        let hist =
            scale_estimation_trials(Measure::Sds, 1.0, 20, 40, &default_s_grid(), 10, 3, &cfg)
                .unwrap();
        assert_eq!(hist.counts.iter().sum::<u32>(), 10);
        assert_eq!(hist.s_values.len(), 16);
    }

    #[test]
    fn degenerate_background_does_not_crash() {
        let cfg = MatchConfig::default();
        let hist =
            scale_estimation_trials(Measure::Sds, 1.0, 10, 20, &[0.5, 1.0, 1.5, 2.0], 5, 77, &cfg)
                .unwrap();
        assert_eq!(hist.trials, 5);
    }

    #[test]
    fn infeasible_scale_is_parameter_error() {
        let cfg = MatchConfig::default();
        assert!(matches!(
            scale_estimation_trials(Measure::Sds, 3.0, 100, 200, &[1.0], 5, 1, &cfg),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn rotation_map_shape_and_determinism() {
        let cfg = MatchConfig::default();
        let sigma2 = [1.0, 4.0];
        let theta = [0.0, -std::f64::consts::FRAC_PI_2];
        let a = rotation_map_2d(Measure::Sds, &sigma2, &theta, 30, 4, 5, &cfg).unwrap();
        let b = rotation_map_2d(Measure::Sds, &sigma2, &theta, 30, 4, 5, &cfg).unwrap();
        assert_eq!(a, b);
        // Polar casting + shared row draws: SDS rows are exactly flat.
        for row in 0..sigma2.len() {
            let first = a.mean_at(row, 0);
            for col in 0..theta.len() {
                assert!((a.mean_at(row, col) - first).abs() < 1e-9 * first.abs().max(1.0));
            }
        }
    }

    #[test]
    fn stderr_shrinks_with_trials() {
        let cfg = MatchConfig::default();
        let small =
            expectation_map_1d(Measure::Dis, 30, 30, &[0.5], &[1.0], 100, 13, &cfg).unwrap();
        let large =
            expectation_map_1d(Measure::Dis, 30, 30, &[0.5], &[1.0], 200, 13, &cfg).unwrap();
        let ratio = large.stderr[0] / small.stderr[0];
        // Doubling trials shrinks SE by about 1/sqrt(2), +-20%.
        assert!(
            (ratio - 0.7071).abs() < 0.2 * 0.7071,
            "SE ratio {ratio} not close to 1/sqrt(2)"
        );
    }
}
