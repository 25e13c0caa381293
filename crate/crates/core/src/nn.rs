//! Exact nearest-neighbor search over patch features, and the
//! precomputed ANN^k table of template patches against the full target.
//!
//! All queries are deterministic: ties are broken by the lowest patch
//! index, and the k-d tree returns exactly what an exhaustive scan
//! ordered by (distance, index) would.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::DistanceMode;
use crate::error::{Error, Result};
use crate::features::{sq_l2, PatchRef, PatchSet};

/// Dimensions above which the k-d tree stops paying off and the index
/// falls back to exhaustive scans.
const KDTREE_MAX_DIM: usize = 20;
const LEAF_SIZE: usize = 16;

/// Queryable index over one patch set's features. Rows are the
/// concatenation of the appearance vector and the mode's secondary
/// feature (rank, location, or nothing); distances weight the secondary
/// block by lambda, matching the patch distance functions exactly.
#[derive(Debug, Clone)]
pub struct NNIndex {
    rows: Vec<f64>,
    dim: usize,
    app_dim: usize,
    lambda: f64,
    mode: DistanceMode,
    len: usize,
    tree: Option<KdTree>,
}

#[inline]
fn row_distance(a: &[f64], b: &[f64], app_dim: usize, lambda: f64) -> f64 {
    sq_l2(&a[..app_dim], &b[..app_dim]) + lambda * sq_l2(&a[app_dim..], &b[app_dim..])
}

/// Builds an exact-NN index over `ps` under the given distance mode.
pub fn build_index(ps: &PatchSet, lambda: f64, mode: DistanceMode) -> Result<NNIndex> {
    if ps.is_empty() {
        return Err(Error::Size("cannot index an empty patch set".into()));
    }
    let app_dim = ps.app_dim();
    let extra_dim = match mode {
        DistanceMode::AppearanceRank => ps.rank_dim(),
        DistanceMode::AppearanceLocation => 2,
        DistanceMode::AppearanceOnly => 0,
    };
    let dim = app_dim + extra_dim;
    let mut rows = Vec::with_capacity(ps.len() * dim);
    for i in 0..ps.len() {
        push_row(&mut rows, &ps.patch(i), mode);
    }
    let tree = if dim <= KDTREE_MAX_DIM {
        let mut weights = vec![1.0; dim];
        for w in weights[app_dim..].iter_mut() {
            *w = lambda;
        }
        Some(KdTree::build(&rows, dim, &weights))
    } else {
        None
    };
    Ok(NNIndex {
        rows,
        dim,
        app_dim,
        lambda,
        mode,
        len: ps.len(),
        tree,
    })
}

fn push_row(rows: &mut Vec<f64>, patch: &PatchRef<'_>, mode: DistanceMode) {
    rows.extend_from_slice(patch.appearance);
    match mode {
        DistanceMode::AppearanceRank => rows.extend_from_slice(patch.rank),
        DistanceMode::AppearanceLocation => rows.extend_from_slice(&patch.location),
        DistanceMode::AppearanceOnly => {}
    }
}

impl NNIndex {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn mode(&self) -> DistanceMode {
        self.mode
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    /// Assembles the query row for a patch, checking feature dimensions.
    pub fn query_row(&self, patch: &PatchRef<'_>) -> Result<Vec<f64>> {
        let mut row = Vec::with_capacity(self.dim);
        push_row(&mut row, patch, self.mode);
        if row.len() != self.dim {
            return Err(Error::Dimension(format!(
                "query feature length {} does not match index dim {}",
                row.len(),
                self.dim
            )));
        }
        Ok(row)
    }

    /// Exact 1-NN; ties broken by the lowest row index.
    pub fn nn(&self, row: &[f64]) -> (usize, f64) {
        debug_assert_eq!(row.len(), self.dim);
        match &self.tree {
            Some(tree) => {
                let mut best = KBest::new(1);
                tree.search(&self.rows, self.dim, self.app_dim, self.lambda, row, &mut best);
                let (idx, d) = best.into_sorted()[0];
                (idx as usize, d)
            }
            None => {
                let mut best = (0usize, f64::INFINITY);
                for i in 0..self.len {
                    let d = row_distance(row, self.row(i), self.app_dim, self.lambda);
                    if d < best.1 {
                        best = (i, d);
                    }
                }
                best
            }
        }
    }

    /// Exact 1-NN of a patch.
    pub fn nn_patch(&self, patch: &PatchRef<'_>) -> Result<(usize, f64)> {
        Ok(self.nn(&self.query_row(patch)?))
    }

    /// Exact k-NN sorted ascending by (distance, index). Returns
    /// min(k, len) entries.
    pub fn knn(&self, row: &[f64], k: usize) -> Vec<(u32, f64)> {
        debug_assert_eq!(row.len(), self.dim);
        let k = k.min(self.len);
        match &self.tree {
            Some(tree) => {
                let mut best = KBest::new(k);
                tree.search(&self.rows, self.dim, self.app_dim, self.lambda, row, &mut best);
                best.into_sorted()
            }
            None => {
                let mut all: Vec<(u32, f64)> = (0..self.len)
                    .map(|i| {
                        (
                            i as u32,
                            row_distance(row, self.row(i), self.app_dim, self.lambda),
                        )
                    })
                    .collect();
                all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                all.truncate(k);
                all
            }
        }
    }
}

/// Max-heap of the k best (distance, index) pairs seen so far.
struct KBest {
    k: usize,
    heap: BinaryHeap<HeapItem>,
}

#[derive(PartialEq)]
struct HeapItem(f64, u32);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl KBest {
    fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    #[inline]
    fn offer(&mut self, d: f64, idx: u32) {
        if self.heap.len() < self.k {
            self.heap.push(HeapItem(d, idx));
        } else if let Some(worst) = self.heap.peek() {
            if HeapItem(d, idx) < *worst {
                self.heap.pop();
                self.heap.push(HeapItem(d, idx));
            }
        }
    }

    /// Worst accepted distance, or None while the heap is not full.
    #[inline]
    fn bound(&self) -> Option<f64> {
        if self.heap.len() < self.k {
            None
        } else {
            self.heap.peek().map(|item| item.0)
        }
    }

    fn into_sorted(self) -> Vec<(u32, f64)> {
        let mut out: Vec<(u32, f64)> = self
            .heap
            .into_sorted_vec()
            .into_iter()
            .map(|HeapItem(d, i)| (i, d))
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }
}

#[derive(Debug, Clone)]
enum KdNode {
    Leaf {
        start: u32,
        len: u32,
    },
    Split {
        dim: u16,
        value: f64,
        // Left child is nodes[node + 1]; right child is this index.
        right: u32,
    },
}

#[derive(Debug, Clone)]
struct KdTree {
    nodes: Vec<KdNode>,
    order: Vec<u32>,
    weights: Vec<f64>,
}

impl KdTree {
    fn build(rows: &[f64], dim: usize, weights: &[f64]) -> KdTree {
        let n = rows.len() / dim;
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut tree = KdTree {
            nodes: Vec::new(),
            order: Vec::new(),
            weights: weights.to_vec(),
        };
        tree.build_node(rows, dim, &mut order, 0);
        tree.order = order;
        tree
    }

    fn build_node(&mut self, rows: &[f64], dim: usize, order: &mut [u32], offset: u32) -> u32 {
        let coord = |i: u32, d: usize| rows[i as usize * dim + d];
        let node_id = self.nodes.len() as u32;
        if order.len() <= LEAF_SIZE {
            self.nodes.push(KdNode::Leaf {
                start: offset,
                len: order.len() as u32,
            });
            return node_id;
        }
        // Split on the dim with the largest weighted squared spread.
        let mut best_dim = 0usize;
        let mut best_spread = -1.0f64;
        for d in 0..dim {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &i in order.iter() {
                let v = coord(i, d);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            let spread = self.weights[d] * (hi - lo) * (hi - lo);
            if spread > best_spread {
                best_spread = spread;
                best_dim = d;
            }
        }
        if best_spread <= 0.0 {
            // All remaining points identical under the metric.
            self.nodes.push(KdNode::Leaf {
                start: offset,
                len: order.len() as u32,
            });
            return node_id;
        }
        order.sort_by(|a, b| {
            coord(*a, best_dim)
                .total_cmp(&coord(*b, best_dim))
                .then(a.cmp(b))
        });
        let mid = order.len() / 2;
        let value = coord(order[mid], best_dim);
        self.nodes.push(KdNode::Split {
            dim: best_dim as u16,
            value,
            right: 0,
        });
        let (left, right) = order.split_at_mut(mid);
        self.build_node(rows, dim, left, offset);
        let right_id = self.build_node(rows, dim, right, offset + mid as u32);
        if let KdNode::Split { right: slot, .. } = &mut self.nodes[node_id as usize] {
            *slot = right_id;
        }
        node_id
    }

    fn search(
        &self,
        rows: &[f64],
        dim: usize,
        app_dim: usize,
        lambda: f64,
        query: &[f64],
        best: &mut KBest,
    ) {
        self.search_node(0, rows, dim, app_dim, lambda, query, best);
    }

    fn search_node(
        &self,
        node: u32,
        rows: &[f64],
        dim: usize,
        app_dim: usize,
        lambda: f64,
        query: &[f64],
        best: &mut KBest,
    ) {
        match &self.nodes[node as usize] {
            KdNode::Leaf { start, len } => {
                for &i in &self.order[*start as usize..(*start + *len) as usize] {
                    let row = &rows[i as usize * dim..(i as usize + 1) * dim];
                    best.offer(row_distance(query, row, app_dim, lambda), i);
                }
            }
            KdNode::Split { dim: d, value, right } => {
                let diff = query[*d as usize] - value;
                let (near, far) = if diff < 0.0 {
                    (node + 1, *right)
                } else {
                    (*right, node + 1)
                };
                self.search_node(near, rows, dim, app_dim, lambda, query, best);
                let plane = self.weights[*d as usize] * diff * diff;
                // <= so equal-distance candidates on the far side still get
                // visited; the lowest-index tie rule needs them.
                match best.bound() {
                    Some(bound) if plane > bound => {}
                    _ => self.search_node(far, rows, dim, app_dim, lambda, query, best),
                }
            }
        }
    }
}

/// For each template patch, the `k` nearest target patches over the whole
/// target image, plus the inverted map used for tau lookups.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnTable {
    k: usize,
    template_len: usize,
    target_len: usize,
    /// `template_len * k` global target indices, each row sorted
    /// ascending by (distance, index).
    forward: Vec<u32>,
    /// Per global target patch: the template indices whose ANN set
    /// contains it, ascending.
    inverted: Vec<Vec<u32>>,
}

impl AnnTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn template_len(&self) -> usize {
        self.template_len
    }

    pub fn target_len(&self) -> usize {
        self.target_len
    }

    pub fn forward(&self, template_idx: usize) -> &[u32] {
        &self.forward[template_idx * self.k..(template_idx + 1) * self.k]
    }

    pub fn inverted(&self, target_idx: usize) -> &[u32] {
        &self.inverted[target_idx]
    }

    /// Number of template patches whose ANN set contains `target_idx`.
    #[inline]
    pub fn tau(&self, target_idx: usize) -> u32 {
        self.inverted[target_idx].len() as u32
    }

    fn from_forward(k: usize, template_len: usize, target_len: usize, forward: Vec<u32>) -> Self {
        let mut inverted = vec![Vec::new(); target_len];
        for (i, row) in forward.chunks_exact(k).enumerate() {
            for &j in row {
                inverted[j as usize].push(i as u32);
            }
        }
        AnnTable {
            k,
            template_len,
            target_len,
            forward,
            inverted,
        }
    }
}

/// Builds the exact k-NN table of every template patch over all target
/// patches. `k` larger than the target patch count is clamped with a
/// warning.
pub fn build_ann_table(
    template: &PatchSet,
    target: &PatchSet,
    lambda: f64,
    mode: DistanceMode,
    k: usize,
) -> Result<AnnTable> {
    if template.is_empty() || target.is_empty() {
        return Err(Error::Size("patch sets must be non-empty".into()));
    }
    if k == 0 {
        return Err(Error::Parameter("ann_k must be >= 1".into()));
    }
    let k = if k > target.len() {
        log::warn!(
            "ann_k {} exceeds target patch count {}; clamping",
            k,
            target.len()
        );
        target.len()
    } else {
        k
    };
    let index = build_index(target, lambda, mode)?;
    let mut forward = Vec::with_capacity(template.len() * k);
    for i in 0..template.len() {
        let row = index.query_row(&template.patch(i))?;
        for (j, _) in index.knn(&row, k) {
            forward.push(j);
        }
    }
    Ok(AnnTable::from_forward(
        k,
        template.len(),
        target.len(),
        forward,
    ))
}

/// Cache key binding the table to its inputs and parameters.
pub fn ann_cache_key(
    template: &PatchSet,
    target: &PatchSet,
    lambda: f64,
    mode: DistanceMode,
    k: usize,
) -> String {
    let mut hasher = Sha256::new();
    for ps in [template, target] {
        hasher.update((ps.len() as u64).to_le_bytes());
        for i in 0..ps.len() {
            for v in ps.appearance(i) {
                hasher.update(v.to_le_bytes());
            }
            for v in ps.rank(i) {
                hasher.update(v.to_le_bytes());
            }
            for v in ps.location(i) {
                hasher.update(v.to_le_bytes());
            }
        }
    }
    hasher.update(lambda.to_le_bytes());
    hasher.update([mode as u8]);
    hasher.update((k as u64).to_le_bytes());
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

const CACHE_MAGIC: &[u8; 8] = b"SDSANN1\n";

fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.ann"))
}

/// Writes the table to `<dir>/<key>.ann`.
pub fn store_cached_ann(dir: &Path, key: &str, table: &AnnTable) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut buf = Vec::with_capacity(32 + table.forward.len() * 4);
    buf.extend_from_slice(CACHE_MAGIC);
    for v in [
        table.k as u64,
        table.template_len as u64,
        table.target_len as u64,
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in &table.forward {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(cache_path(dir, key))?;
    file.write_all(&buf)?;
    Ok(())
}

/// Loads a previously stored table; None on miss or corruption.
pub fn load_cached_ann(dir: &Path, key: &str) -> Option<AnnTable> {
    let bytes = fs::read(cache_path(dir, key)).ok()?;
    if bytes.len() < 32 || &bytes[..8] != CACHE_MAGIC {
        return None;
    }
    let word = |at: usize| -> u64 { u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()) };
    let k = word(8) as usize;
    let template_len = word(16) as usize;
    let target_len = word(24) as usize;
    let need = 32 + template_len * k * 4;
    if bytes.len() != need {
        return None;
    }
    let mut forward = Vec::with_capacity(template_len * k);
    for chunk in bytes[32..].chunks_exact(4) {
        let v = u32::from_le_bytes(chunk.try_into().unwrap());
        if v as usize >= target_len {
            return None;
        }
        forward.push(v);
    }
    Some(AnnTable::from_forward(k, template_len, target_len, forward))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::patchify;
    use crate::image::Image;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(rng: &mut ChaCha8Rng, n: usize, app_dim: usize, rank_dim: usize) -> PatchSet {
        let appearance = (0..n * app_dim).map(|_| rng.random::<f64>()).collect();
        let rank = (0..n * rank_dim).map(|_| rng.random::<f64>() * 3.0).collect();
        let position = (0..n * 2).map(|_| rng.random::<f64>() * 10.0).collect();
        PatchSet::from_points(appearance, app_dim, rank, rank_dim, position).unwrap()
    }

    fn brute_knn(
        ps: &PatchSet,
        row: &[f64],
        lambda: f64,
        mode: DistanceMode,
        k: usize,
    ) -> Vec<(u32, f64)> {
        let idx = build_index(ps, lambda, mode).unwrap();
        let mut all: Vec<(u32, f64)> = (0..ps.len())
            .map(|i| {
                let mut stored = Vec::new();
                push_row(&mut stored, &ps.patch(i), mode);
                (i as u32, row_distance(row, &stored, ps.app_dim(), lambda))
            })
            .collect();
        all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        all.truncate(k.min(ps.len()));
        drop(idx);
        all
    }

    #[test]
    fn single_patch_always_wins() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ps = random_set(&mut rng, 1, 4, 2);
        let idx = build_index(&ps, 1.0, DistanceMode::AppearanceRank).unwrap();
        let probe = random_set(&mut rng, 1, 4, 2);
        let (i, _) = idx.nn_patch(&probe.patch(0)).unwrap();
        assert_eq!(i, 0);
    }

    #[test]
    fn stored_row_is_its_own_nn() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ps = random_set(&mut rng, 25, 4, 2);
        let idx = build_index(&ps, 1.0, DistanceMode::AppearanceRank).unwrap();
        for i in 0..ps.len() {
            let (j, d) = idx.nn_patch(&ps.patch(i)).unwrap();
            assert_eq!(j, i);
            assert_eq!(d, 0.0);
        }
    }

    #[test]
    fn equidistant_tie_prefers_lowest_index() {
        // Rows 3 and 7 are identical; queries equidistant to both must
        // return row 3.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut appearance: Vec<f64> = (0..10 * 2).map(|_| rng.random()).collect();
        let (a0, a1) = (appearance[3 * 2], appearance[3 * 2 + 1]);
        appearance[7 * 2] = a0;
        appearance[7 * 2 + 1] = a1;
        let ps = PatchSet::from_points(appearance, 2, vec![0.0; 10], 1, vec![0.0; 20]).unwrap();
        let idx = build_index(&ps, 1.0, DistanceMode::AppearanceOnly).unwrap();
        let (i, d) = idx.nn(&[a0, a1]);
        assert_eq!(i, 3);
        assert_eq!(d, 0.0);
        let knn = idx.knn(&[a0, a1], 2);
        assert_eq!(knn[0].0, 3);
        assert_eq!(knn[1].0, 7);
    }

    #[test]
    fn knn_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for mode in [
            DistanceMode::AppearanceRank,
            DistanceMode::AppearanceLocation,
            DistanceMode::AppearanceOnly,
        ] {
            let ps = random_set(&mut rng, 50, 5, 3);
            let idx = build_index(&ps, 0.7, mode).unwrap();
            for _ in 0..20 {
                let probe = random_set(&mut rng, 1, 5, 3);
                let row = idx.query_row(&probe.patch(0)).unwrap();
                for k in [1, 3, 7, 50] {
                    let got = idx.knn(&row, k);
                    let want = brute_knn(&ps, &row, 0.7, mode, k);
                    assert_eq!(got, want, "mode {mode:?} k {k}");
                }
            }
        }
    }

    #[test]
    fn high_dim_falls_back_to_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ps = random_set(&mut rng, 30, 25, 4);
        let idx = build_index(&ps, 1.0, DistanceMode::AppearanceRank).unwrap();
        assert!(idx.tree.is_none());
        let probe = random_set(&mut rng, 1, 25, 4);
        let row = idx.query_row(&probe.patch(0)).unwrap();
        assert_eq!(idx.knn(&row, 5), brute_knn(&ps, &row, 1.0, DistanceMode::AppearanceRank, 5));
    }

    #[test]
    fn empty_set_is_an_error() {
        let img = Image::filled(4, 4, 1, 0.5).unwrap();
        let ps = patchify(&img, 2, 2).unwrap();
        let (sub, _) = ps.window_view(&crate::window::Window::new(0, 0, 1, 1)).unwrap();
        assert!(build_index(&sub, 1.0, DistanceMode::AppearanceRank).is_ok());
        assert!(PatchSet::from_points(vec![], 1, vec![], 1, vec![]).is_err());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ps = random_set(&mut rng, 5, 4, 2);
        let idx = build_index(&ps, 1.0, DistanceMode::AppearanceRank).unwrap();
        let other = random_set(&mut rng, 1, 3, 2);
        assert!(idx.query_row(&other.patch(0)).is_err());
    }

    #[test]
    fn ann_table_self_match_and_inversion() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let target = random_set(&mut rng, 40, 4, 2);
        // Template = the same features (distinct rows).
        let (template, _) = target.subset(&(0..40).collect::<Vec<_>>()).unwrap();
        let table =
            build_ann_table(&template, &target, 1.0, DistanceMode::AppearanceRank, 3).unwrap();
        for i in 0..40 {
            assert_eq!(table.forward(i)[0] as usize, i, "identical patch at rank 1");
        }
        // Inverted map is the exact transpose.
        for i in 0..template.len() {
            for &j in table.forward(i) {
                assert!(table.inverted(j as usize).contains(&(i as u32)));
            }
        }
        for j in 0..target.len() {
            for &i in table.inverted(j) {
                assert!(table.forward(i as usize).contains(&(j as u32)));
            }
        }
    }

    #[test]
    fn ann_table_k_equals_m_lists_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let template = random_set(&mut rng, 6, 3, 1);
        let target = random_set(&mut rng, 9, 3, 1);
        let table =
            build_ann_table(&template, &target, 1.0, DistanceMode::AppearanceRank, 9).unwrap();
        for j in 0..9 {
            assert_eq!(table.tau(j) as usize, template.len());
        }
        // k > M clamps.
        let clamped =
            build_ann_table(&template, &target, 1.0, DistanceMode::AppearanceRank, 100).unwrap();
        assert_eq!(clamped.k(), 9);
    }

    #[test]
    fn ann_table_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let template = random_set(&mut rng, 20, 4, 2);
        let target = random_set(&mut rng, 30, 4, 2);
        let k = 5;
        let table =
            build_ann_table(&template, &target, 1.3, DistanceMode::AppearanceRank, k).unwrap();
        for i in 0..template.len() {
            let idx = build_index(&target, 1.3, DistanceMode::AppearanceRank).unwrap();
            let row = idx.query_row(&template.patch(i)).unwrap();
            let want: Vec<u32> = brute_knn(&target, &row, 1.3, DistanceMode::AppearanceRank, k)
                .into_iter()
                .map(|(j, _)| j)
                .collect();
            assert_eq!(table.forward(i), &want[..]);
        }
    }

    #[test]
    fn repeated_builds_are_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let template = random_set(&mut rng, 15, 4, 2);
        let target = random_set(&mut rng, 25, 4, 2);
        let a = build_ann_table(&template, &target, 1.0, DistanceMode::AppearanceRank, 4).unwrap();
        let b = build_ann_table(&template, &target, 1.0, DistanceMode::AppearanceRank, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cache_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let template = random_set(&mut rng, 10, 4, 2);
        let target = random_set(&mut rng, 20, 4, 2);
        let table =
            build_ann_table(&template, &target, 1.0, DistanceMode::AppearanceRank, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let key = ann_cache_key(&template, &target, 1.0, DistanceMode::AppearanceRank, 3);
        assert!(load_cached_ann(dir.path(), &key).is_none());
        store_cached_ann(dir.path(), &key, &table).unwrap();
        let loaded = load_cached_ann(dir.path(), &key).unwrap();
        assert_eq!(loaded, table);
        // Different lambda yields a different key.
        let other = ann_cache_key(&template, &target, 2.0, DistanceMode::AppearanceRank, 3);
        assert_ne!(key, other);
    }
}
