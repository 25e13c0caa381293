//! Similarity measures between a template patch set and a candidate
//! window: scalable diversity similarity (SDS) with its epsilon/tau/U
//! diversity statistics and polar-radius penalty, and the BBS, DIS,
//! DDIS, SSD and SAD baselines.

use crate::config::{DistanceMode, MatchConfig};
use crate::error::{Error, Result};
use crate::features::{sq_l2, PatchSet};
use crate::nn::{build_index, AnnTable, NNIndex};

/// Bidirectional diversity statistics of one (template, window) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DiversityStats {
    /// Per template patch: how many window patches pick it as their NN.
    pub epsilon: Vec<u32>,
    /// Per window patch: how many template ANN sets contain it. Empty
    /// when computed without an ANN table.
    pub tau: Vec<u32>,
    /// Window-to-template patch-count ratio m/n.
    pub scale: f64,
    /// Per window patch: the template index of its NN.
    pub nn_of_q: Vec<usize>,
}

/// Distance convention for the epsilon direction: appearance+rank unless
/// explicitly overridden.
fn epsilon_mode(cfg: &MatchConfig) -> DistanceMode {
    cfg.distance_mode.unwrap_or(DistanceMode::AppearanceRank)
}

fn check_nonempty(template: &PatchSet, q: &PatchSet) -> Result<()> {
    if template.is_empty() || q.is_empty() {
        return Err(Error::Size("patch sets must be non-empty".into()));
    }
    Ok(())
}

/// Counts, for every template patch, the window patches whose NN it is.
/// `sum(epsilon) == q.len()` always holds.
pub fn epsilon_counts(template: &PatchSet, q: &PatchSet, cfg: &MatchConfig) -> Result<DiversityStats> {
    let index = build_index(template, cfg.lambda, epsilon_mode(cfg))?;
    epsilon_counts_indexed(&index, template.len(), q)
}

/// Epsilon direction against a prebuilt template index.
pub fn epsilon_counts_indexed(
    index: &NNIndex,
    template_len: usize,
    q: &PatchSet,
) -> Result<DiversityStats> {
    if q.is_empty() {
        return Err(Error::Size("window patch set must be non-empty".into()));
    }
    let mut epsilon = vec![0u32; template_len];
    let mut nn_of_q = Vec::with_capacity(q.len());
    for j in 0..q.len() {
        let (i, _) = index.nn_patch(&q.patch(j))?;
        epsilon[i] += 1;
        nn_of_q.push(i);
    }
    Ok(DiversityStats {
        epsilon,
        tau: Vec::new(),
        scale: q.len() as f64 / template_len as f64,
        nn_of_q,
    })
}

/// Looks up tau for each window patch: the length of the inverted ANN
/// list at its global target index.
pub fn tau_counts(table: &AnnTable, global_ids: &[usize]) -> Result<Vec<u32>> {
    let mut tau = Vec::with_capacity(global_ids.len());
    for &g in global_ids {
        if g >= table.target_len() {
            return Err(Error::Alignment(format!(
                "window patch index {g} outside the target grid ({} patches) the ANN table was built over",
                table.target_len()
            )));
        }
        tau.push(table.tau(g));
    }
    Ok(tau)
}

/// Full bidirectional statistics for a window with known global indices.
pub fn diversity_stats(
    template: &PatchSet,
    q: &PatchSet,
    global_ids: &[usize],
    table: &AnnTable,
    cfg: &MatchConfig,
) -> Result<DiversityStats> {
    check_nonempty(template, q)?;
    if global_ids.len() != q.len() {
        return Err(Error::Dimension(
            "global id list must match the window patch count".into(),
        ));
    }
    let mut stats = epsilon_counts(template, q, cfg)?;
    stats.tau = tau_counts(table, global_ids)?;
    Ok(stats)
}

/// Distance from patch `i` to its set's geometric center.
pub fn polar_radius(ps: &PatchSet, i: usize) -> f64 {
    ps.polar_radius(i)
}

/// Scale-aware normalization over the nonzero epsilon entries:
/// `sum exp(I(s/e >= 1) + I(s/e < 1) * (s/e) - 1)`.
pub fn u_term(epsilon: &[u32], s: f64) -> f64 {
    let mut acc = 0.0;
    for &e in epsilon {
        if e == 0 {
            continue;
        }
        let ratio = s / e as f64;
        let exponent = if ratio >= 1.0 { 1.0 } else { ratio } - 1.0;
        acc += exponent.exp();
    }
    acc
}

/// Assembles the SDS score from its pieces. Shared by the standalone
/// scorer and the sliding-window engine so both produce the same
/// arithmetic.
#[inline]
pub(crate) fn compose_sds(
    tau_nonzero: usize,
    eps_nonzero: usize,
    u: f64,
    radius_penalty: f64,
    s: f64,
    cfg: &MatchConfig,
) -> f64 {
    let lambda1 = 1.0 / s;
    lambda1 * (tau_nonzero as f64 * eps_nonzero as f64) * u / (cfg.denom_guard + radius_penalty)
}

#[inline]
pub(crate) fn radius_scale(s: f64, cfg: &MatchConfig) -> f64 {
    if cfg.sqrt_radius_scaling {
        s.sqrt()
    } else {
        s
    }
}

/// Scalable diversity similarity of a window `q` (with `global_ids`
/// mapping its patches into the target set the `table` was built over).
///
/// `lambda_1 * [sum_j I(tau_j != 0) * sum_i I(eps_i != 0)] * U /
///  (guard + sum_j |rho(q_j) - s * rho(NN(q_j))|)` with `lambda_1 = 1/s`.
pub fn sds_score(
    template: &PatchSet,
    q: &PatchSet,
    global_ids: &[usize],
    table: &AnnTable,
    cfg: &MatchConfig,
) -> Result<f64> {
    let stats = diversity_stats(template, q, global_ids, table, cfg)?;
    Ok(sds_from_stats(template, q, &stats, cfg))
}

/// SDS from precomputed diversity statistics.
pub fn sds_from_stats(
    template: &PatchSet,
    q: &PatchSet,
    stats: &DiversityStats,
    cfg: &MatchConfig,
) -> f64 {
    let s = stats.scale;
    let rscale = radius_scale(s, cfg);
    let tau_nonzero = stats.tau.iter().filter(|t| **t != 0).count();
    let eps_nonzero = stats.epsilon.iter().filter(|e| **e != 0).count();
    let u = u_term(&stats.epsilon, s);
    let mut penalty = 0.0;
    for (j, &nn) in stats.nn_of_q.iter().enumerate() {
        penalty += (q.polar_radius(j) - rscale * template.polar_radius(nn)).abs();
    }
    compose_sds(tau_nonzero, eps_nonzero, u, penalty, s, cfg)
}

/// Best-buddies similarity: the normalized count of mutual NN pairs,
/// under appearance+location distance unless overridden.
pub fn bbs_score(template: &PatchSet, q: &PatchSet, cfg: &MatchConfig) -> Result<f64> {
    check_nonempty(template, q)?;
    let mode = cfg.distance_mode.unwrap_or(DistanceMode::AppearanceLocation);
    let t_index = build_index(template, cfg.lambda, mode)?;
    let q_index = build_index(q, cfg.lambda, mode)?;
    let n = template.len();
    let m = q.len();
    let mut nn_of_t = Vec::with_capacity(n);
    for i in 0..n {
        nn_of_t.push(q_index.nn_patch(&template.patch(i))?.0);
    }
    let mut mutual = 0usize;
    for j in 0..m {
        let (i, _) = t_index.nn_patch(&q.patch(j))?;
        if nn_of_t[i] == j {
            mutual += 1;
        }
    }
    Ok(mutual as f64 / n.min(m) as f64)
}

/// Diversity similarity: the normalized count of template patches that
/// attract at least one window patch's NN.
pub fn dis_score(template: &PatchSet, q: &PatchSet, cfg: &MatchConfig) -> Result<f64> {
    check_nonempty(template, q)?;
    let stats = epsilon_counts(template, q, cfg)?;
    let kinds = stats.epsilon.iter().filter(|e| **e != 0).count();
    Ok(kinds as f64 / template.len().min(q.len()) as f64)
}

/// Deformable diversity similarity: each window patch contributes its
/// deformation weight `1/(1 + ||L(q_j) - L(NN(q_j))||)` divided by its
/// NN's epsilon count. NN search runs on appearance only unless
/// overridden. With deformation weighting disabled this reduces exactly
/// to [`dis_score`].
pub fn ddis_score(template: &PatchSet, q: &PatchSet, cfg: &MatchConfig) -> Result<f64> {
    check_nonempty(template, q)?;
    let mode = cfg.distance_mode.unwrap_or(DistanceMode::AppearanceOnly);
    let index = build_index(template, cfg.lambda, mode)?;
    let stats = epsilon_counts_indexed(&index, template.len(), q)?;
    let mut acc = 0.0;
    for (j, &nn) in stats.nn_of_q.iter().enumerate() {
        let weight = if cfg.ddis_deformation {
            let d = sq_l2(&q.location(j), &template.location(nn)).sqrt();
            1.0 / (1.0 + d)
        } else {
            1.0
        };
        acc += weight / stats.epsilon[nn] as f64;
    }
    Ok(acc / template.len().min(q.len()) as f64)
}

/// Negated sum of squared pixel differences between two equally shaped
/// patch sets (larger = more similar).
pub fn ssd_score(a: &PatchSet, b: &PatchSet) -> Result<f64> {
    check_same_shape(a, b)?;
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += sq_l2(a.appearance(i), b.appearance(i));
    }
    Ok(-acc)
}

/// Negated sum of absolute pixel differences.
pub fn sad_score(a: &PatchSet, b: &PatchSet) -> Result<f64> {
    check_same_shape(a, b)?;
    let mut acc = 0.0;
    for i in 0..a.len() {
        for (x, y) in a.appearance(i).iter().zip(b.appearance(i)) {
            acc += (x - y).abs();
        }
    }
    Ok(-acc)
}

fn check_same_shape(a: &PatchSet, b: &PatchSet) -> Result<()> {
    check_nonempty(a, b)?;
    if a.len() != b.len() || a.app_dim() != b.app_dim() {
        return Err(Error::Size(format!(
            "patch sets differ in shape: {}x{} vs {}x{}",
            a.len(),
            a.app_dim(),
            b.len(),
            b.app_dim()
        )));
    }
    Ok(())
}
