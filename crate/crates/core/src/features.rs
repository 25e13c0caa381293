//! Patchification and per-patch features: appearance, normalized
//! location, and the rotation-invariant appearance rank.

use crate::error::{Error, Result};
use crate::image::{Field, Image};
use crate::window::Window;

/// A set of non-overlapped patches with their feature vectors. Image
/// grids carry `grid_h` rows of `grid_w` patches; abstract point sets
/// (one patch per point) use a single row.
///
/// Per patch:
/// - `appearance`: the patch's pixel values (p^2 * channels floats), or a
///   point's feature vector;
/// - `rank`: per-pixel appearance ranks within a radius-r circle;
/// - `location`: patch center normalized to [0, 1] within the set;
/// - `position`: coordinates in the geometry the polar radius lives in
///   (patch-grid units for images, raw point coordinates for point sets).
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    patch_size: usize,
    channels: usize,
    grid_w: usize,
    grid_h: usize,
    app_dim: usize,
    rank_dim: usize,
    appearance: Vec<f64>,
    rank: Vec<f64>,
    location: Vec<f64>,
    position: Vec<f64>,
    pole: [f64; 2],
}

/// Borrowed feature view of one patch.
#[derive(Debug, Clone, Copy)]
pub struct PatchRef<'a> {
    pub appearance: &'a [f64],
    pub rank: &'a [f64],
    pub location: [f64; 2],
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.grid_w * self.grid_h
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn grid_w(&self) -> usize {
        self.grid_w
    }

    pub fn grid_h(&self) -> usize {
        self.grid_h
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn app_dim(&self) -> usize {
        self.app_dim
    }

    pub fn rank_dim(&self) -> usize {
        self.rank_dim
    }

    pub fn pole(&self) -> [f64; 2] {
        self.pole
    }

    #[inline]
    pub fn appearance(&self, i: usize) -> &[f64] {
        &self.appearance[i * self.app_dim..(i + 1) * self.app_dim]
    }

    #[inline]
    pub fn rank(&self, i: usize) -> &[f64] {
        &self.rank[i * self.rank_dim..(i + 1) * self.rank_dim]
    }

    #[inline]
    pub fn location(&self, i: usize) -> [f64; 2] {
        [self.location[i * 2], self.location[i * 2 + 1]]
    }

    #[inline]
    pub fn position(&self, i: usize) -> [f64; 2] {
        [self.position[i * 2], self.position[i * 2 + 1]]
    }

    #[inline]
    pub fn patch(&self, i: usize) -> PatchRef<'_> {
        PatchRef {
            appearance: self.appearance(i),
            rank: self.rank(i),
            location: self.location(i),
        }
    }

    /// Euclidean distance from patch `i` to the set's geometric center,
    /// in the set's position units.
    #[inline]
    pub fn polar_radius(&self, i: usize) -> f64 {
        let p = self.position(i);
        let dx = p[0] - self.pole[0];
        let dy = p[1] - self.pole[1];
        (dx * dx + dy * dy).sqrt()
    }

    /// Builds a point set directly from per-point feature rows. Locations
    /// are spread along the unit line in index order; the pole defaults
    /// to the centroid of `position`.
    pub fn from_points(
        appearance: Vec<f64>,
        app_dim: usize,
        rank: Vec<f64>,
        rank_dim: usize,
        position: Vec<f64>,
    ) -> Result<PatchSet> {
        let n = if app_dim == 0 { 0 } else { appearance.len() / app_dim };
        let mut location = Vec::with_capacity(n * 2);
        for i in 0..n {
            location.push((i as f64 + 0.5) / n as f64);
            location.push(0.5);
        }
        Self::from_points_with_locations(appearance, app_dim, rank, rank_dim, location, position)
    }

    /// As [`from_points`](Self::from_points) but with explicit per-point
    /// locations (values in [0, 1]).
    ///
    /// `position` entries act as geometric sort keys: points are placed
    /// on an index line at the rank of their key (ordered by x, then y,
    /// then input index), which is the patch-grid analogue for
    /// exchangeable points and keeps polar radii of differently sized
    /// sets commensurate under scale factors.
    pub fn from_points_with_locations(
        appearance: Vec<f64>,
        app_dim: usize,
        rank: Vec<f64>,
        rank_dim: usize,
        location: Vec<f64>,
        position: Vec<f64>,
    ) -> Result<PatchSet> {
        if app_dim == 0 || appearance.len() % app_dim != 0 {
            return Err(Error::Dimension("bad appearance layout".into()));
        }
        let n = appearance.len() / app_dim;
        if n == 0 {
            return Err(Error::Size("point set must be non-empty".into()));
        }
        if rank.len() != n * rank_dim || position.len() != n * 2 || location.len() != n * 2 {
            return Err(Error::Dimension("bad rank/location/position layout".into()));
        }
        let position = rank_line(&position);
        let pole = centroid(&position);
        Ok(PatchSet {
            patch_size: 1,
            channels: 1,
            grid_w: n,
            grid_h: 1,
            app_dim,
            rank_dim,
            appearance,
            rank,
            location,
            position,
            pole,
        })
    }

    /// Materializes the patches inside a window of the patch grid
    /// (`win` in patch units). Appearance and rank rows are inherited
    /// from this set; locations are re-normalized within the window and
    /// positions become window-local grid coordinates. Also returns each
    /// window patch's index into this set, used for ANN-table lookups.
    pub fn window_view(&self, win: &Window) -> Result<(PatchSet, Vec<usize>)> {
        if win.w == 0 || win.h == 0 {
            return Err(Error::Size("empty window".into()));
        }
        if !win.fits_in(self.grid_w, self.grid_h) {
            return Err(Error::Bounds(format!(
                "patch window {win:?} exceeds grid {}x{}",
                self.grid_w, self.grid_h
            )));
        }
        let m = win.w * win.h;
        let mut appearance = Vec::with_capacity(m * self.app_dim);
        let mut rank = Vec::with_capacity(m * self.rank_dim);
        let mut location = Vec::with_capacity(m * 2);
        let mut position = Vec::with_capacity(m * 2);
        let mut global_ids = Vec::with_capacity(m);
        for ly in 0..win.h {
            for lx in 0..win.w {
                let g = (win.y + ly) * self.grid_w + (win.x + lx);
                global_ids.push(g);
                appearance.extend_from_slice(self.appearance(g));
                rank.extend_from_slice(self.rank(g));
                location.push((lx as f64 + 0.5) / win.w as f64);
                location.push((ly as f64 + 0.5) / win.h as f64);
                position.push(lx as f64);
                position.push(ly as f64);
            }
        }
        let view = PatchSet {
            patch_size: self.patch_size,
            channels: self.channels,
            grid_w: win.w,
            grid_h: win.h,
            app_dim: self.app_dim,
            rank_dim: self.rank_dim,
            appearance,
            rank,
            location,
            position,
            pole: [(win.w as f64 - 1.0) / 2.0, (win.h as f64 - 1.0) / 2.0],
        };
        Ok((view, global_ids))
    }

    /// Point-set analogue of [`window_view`](Self::window_view): keeps the
    /// rows selected by `indices` (feature rows inherited, locations
    /// respread on the unit line). Positions are re-ranked onto the
    /// subset's own index line, preserving their relative order, the way
    /// an image window re-bases patch coordinates onto the window grid.
    pub fn subset(&self, indices: &[usize]) -> Result<(PatchSet, Vec<usize>)> {
        if indices.is_empty() {
            return Err(Error::Size("empty subset".into()));
        }
        let m = indices.len();
        let mut appearance = Vec::with_capacity(m * self.app_dim);
        let mut rank = Vec::with_capacity(m * self.rank_dim);
        let mut location = Vec::with_capacity(m * 2);
        for (slot, &g) in indices.iter().enumerate() {
            if g >= self.len() {
                return Err(Error::Bounds(format!("subset index {g} out of range")));
            }
            appearance.extend_from_slice(self.appearance(g));
            rank.extend_from_slice(self.rank(g));
            location.push((slot as f64 + 0.5) / m as f64);
            location.push(0.5);
        }
        let mut keys = Vec::with_capacity(m * 2);
        for &g in indices {
            let p = self.position(g);
            keys.push(p[0]);
            keys.push(p[1]);
        }
        let position = rank_line(&keys);
        let pole = centroid(&position);
        Ok((
            PatchSet {
                patch_size: self.patch_size,
                channels: self.channels,
                grid_w: m,
                grid_h: 1,
                app_dim: self.app_dim,
                rank_dim: self.rank_dim,
                appearance,
                rank,
                location,
                position,
                pole,
            },
            indices.to_vec(),
        ))
    }

    /// Identity mapping 0..n, for treating a whole set as its own window.
    pub fn identity_ids(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }
}

/// Places each (x, y) key at (rank, 0) on an index line, ordering by
/// (x, y, input index).
fn rank_line(keys: &[f64]) -> Vec<f64> {
    let n = keys.len() / 2;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| {
        keys[a * 2]
            .total_cmp(&keys[b * 2])
            .then(keys[a * 2 + 1].total_cmp(&keys[b * 2 + 1]))
            .then(a.cmp(b))
    });
    let mut position = vec![0.0; n * 2];
    for (rank, i) in order.into_iter().enumerate() {
        position[i * 2] = rank as f64;
    }
    position
}

fn centroid(position: &[f64]) -> [f64; 2] {
    let n = (position.len() / 2) as f64;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for p in position.chunks_exact(2) {
        cx += p[0];
        cy += p[1];
    }
    [cx / n, cy / n]
}

/// Offsets of the discrete circle of radius `r` (Euclidean distance <= r,
/// center included), in row-major scan order.
pub fn circle_offsets(r: usize) -> Vec<(isize, isize)> {
    let r = r as isize;
    let r2 = r * r;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r2 {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Per-pixel appearance rank: the number of pixels within the radius-`r`
/// circle (clipped to the image) whose value the center is >= to, divided
/// by r^2. The center always counts itself, so every value is >= 1/r^2.
pub fn rank_map(intensity: &Image, r: usize) -> Result<Field> {
    if intensity.channels() != 1 {
        return Err(Error::Dimension(
            "rank_map expects a single-channel image".into(),
        ));
    }
    if r == 0 {
        return Err(Error::Parameter("rank radius must be >= 1".into()));
    }
    let (w, h) = (intensity.width(), intensity.height());
    let offsets = circle_offsets(r);
    let inv_r2 = 1.0 / (r * r) as f64;
    let mut out = Field::filled(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            let center = intensity.get(x, y, 0);
            let mut count = 0usize;
            for &(dx, dy) in &offsets {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                if center >= intensity.get(nx as usize, ny as usize, 0) {
                    count += 1;
                }
            }
            out.set(x, y, count as f64 * inv_r2);
        }
    }
    Ok(out)
}

/// Cuts `img` into non-overlapped p x p patches (trailing pixels beyond
/// the last full patch are dropped) and extracts per-patch features. The
/// rank channel is computed on the intensity image over the full input.
pub fn patchify(img: &Image, patch_size: usize, rank_radius: usize) -> Result<PatchSet> {
    let p = patch_size;
    if p == 0 {
        return Err(Error::Parameter("patch size must be >= 1".into()));
    }
    if img.width() < p || img.height() < p {
        return Err(Error::Size(format!(
            "image {}x{} smaller than one {p}x{p} patch",
            img.width(),
            img.height()
        )));
    }
    let grid_w = img.width() / p;
    let grid_h = img.height() / p;
    let channels = img.channels();
    let ranks = rank_map(&img.to_intensity(), rank_radius)?;
    let n = grid_w * grid_h;
    let app_dim = p * p * channels;
    let rank_dim = p * p;
    let mut appearance = Vec::with_capacity(n * app_dim);
    let mut rank = Vec::with_capacity(n * rank_dim);
    let mut location = Vec::with_capacity(n * 2);
    let mut position = Vec::with_capacity(n * 2);
    for gy in 0..grid_h {
        for gx in 0..grid_w {
            for py in 0..p {
                for px in 0..p {
                    let (x, y) = (gx * p + px, gy * p + py);
                    appearance.extend_from_slice(img.pixel(x, y));
                    rank.push(ranks.get(x, y));
                }
            }
            location.push((gx as f64 + 0.5) / grid_w as f64);
            location.push((gy as f64 + 0.5) / grid_h as f64);
            position.push(gx as f64);
            position.push(gy as f64);
        }
    }
    Ok(PatchSet {
        patch_size: p,
        channels,
        grid_w,
        grid_h,
        app_dim,
        rank_dim,
        appearance,
        rank,
        location,
        position,
        pole: [(grid_w as f64 - 1.0) / 2.0, (grid_h as f64 - 1.0) / 2.0],
    })
}

/// Squared L2 distance between equal-length slices.
#[inline]
pub fn sq_l2(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Appearance + location distance:
/// `||a_A - b_A||^2 + lambda * ||a_L - b_L||^2`.
pub fn distance_al(a: &PatchRef<'_>, b: &PatchRef<'_>, lambda: f64) -> Result<f64> {
    if a.appearance.len() != b.appearance.len() {
        return Err(Error::Dimension(format!(
            "appearance length mismatch {} vs {}",
            a.appearance.len(),
            b.appearance.len()
        )));
    }
    Ok(sq_l2(a.appearance, b.appearance) + lambda * sq_l2(&a.location, &b.location))
}

/// Appearance + rank distance:
/// `||a_A - b_A||^2 + lambda * ||a_R - b_R||^2`.
pub fn distance_ar(a: &PatchRef<'_>, b: &PatchRef<'_>, lambda: f64) -> Result<f64> {
    if a.appearance.len() != b.appearance.len() || a.rank.len() != b.rank.len() {
        return Err(Error::Dimension(format!(
            "feature length mismatch: appearance {} vs {}, rank {} vs {}",
            a.appearance.len(),
            b.appearance.len(),
            a.rank.len(),
            b.rank.len()
        )));
    }
    Ok(sq_l2(a.appearance, b.appearance) + lambda * sq_l2(a.rank, b.rank))
}

/// Appearance-only distance.
pub fn distance_ao(a: &PatchRef<'_>, b: &PatchRef<'_>) -> Result<f64> {
    if a.appearance.len() != b.appearance.len() {
        return Err(Error::Dimension("appearance length mismatch".into()));
    }
    Ok(sq_l2(a.appearance, b.appearance))
}
