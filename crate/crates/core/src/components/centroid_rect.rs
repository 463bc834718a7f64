use super::plane::principal_angle;
use crate::types::{DepthImage, GraspRectangle, QualityKind, ScoredRectangle};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentroidRectConfig {
    pub max_candidates: usize,
    pub min_quality: f64,
    /// Pixels this much nearer than the table are foreground.
    pub foreground_margin: f64,
    /// Bin width of the table depth search.
    pub depth_bin: f64,
}

impl Default for CentroidRectConfig {
    fn default() -> Self {
        CentroidRectConfig {
            max_candidates: 1,
            min_quality: 0.0,
            foreground_margin: 0.02,
            depth_bin: 0.01,
        }
    }
}

/// Largest 4-connected region of `mask`; ties go to the region found first
/// in row-major order.
fn largest_region(mask: &[bool], w: usize, h: usize) -> Vec<(usize, usize)> {
    let mut seen = vec![false; mask.len()];
    let mut best: Vec<(usize, usize)> = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        let mut region = Vec::new();
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            let (u, v) = (i % w, i / w);
            region.push((u, v));
            let mut push = |j: usize| {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if u > 0 {
                push(i - 1);
            }
            if u + 1 < w {
                push(i + 1);
            }
            if v > 0 {
                push(i - w);
            }
            if v + 1 < h {
                push(i + w);
            }
        }
        if region.len() > best.len() {
            best = region;
        }
    }
    best
}

/// One grasp rectangle on the largest foreground blob of a depth image.
///
/// The table depth is the modal depth. The rectangle sits at the blob's
/// pixel centroid, is turned along its principal axis and spans its
/// extents; its score is the fraction of the rectangle the blob fills.
pub fn centroid_rect_plan(depth: &DepthImage, cfg: &CentroidRectConfig) -> Vec<ScoredRectangle> {
    let (w, h) = (depth.width(), depth.height());
    let valid = depth
        .data()
        .iter()
        .filter(|d| **d != crate::types::INVALID_DEPTH)
        .map(|d| *d as f64);
    let Some(table) = super::plane::support_plane_height(valid, cfg.depth_bin) else {
        return Vec::new();
    };
    let mask: Vec<bool> = (0..w * h)
        .map(|i| {
            depth
                .at(i % w, i / w)
                .is_some_and(|d| d < table - cfg.foreground_margin)
        })
        .collect();
    let region = largest_region(&mask, w, h);
    if region.is_empty() {
        return Vec::new();
    }
    let n = region.len() as f64;
    let mu = region
        .iter()
        .fold((0.0, 0.0), |(a, b), &(u, v)| (a + u as f64, b + v as f64));
    let (cu, cv) = (mu.0 / n, mu.1 / n);
    let (mut s20, mut s02, mut s11) = (0.0, 0.0, 0.0);
    for &(u, v) in &region {
        let (du, dv) = (u as f64 - cu, v as f64 - cv);
        s20 += du * du;
        s02 += dv * dv;
        s11 += du * dv;
    }
    let angle = principal_angle(s20 / n, s02 / n, s11 / n);
    let (s, c) = angle.sin_cos();
    let (mut lo_a, mut hi_a, mut lo_b, mut hi_b) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(u, v) in &region {
        let (du, dv) = (u as f64 - cu, v as f64 - cv);
        let (a, b) = (du * c + dv * s, -du * s + dv * c);
        lo_a = lo_a.min(a);
        hi_a = hi_a.max(a);
        lo_b = lo_b.min(b);
        hi_b = hi_b.max(b);
    }
    let (width, height) = (hi_a - lo_a + 1.0, hi_b - lo_b + 1.0);
    let quality = (n / (width * height)).clamp(0.0, 1.0);
    if quality < cfg.min_quality || cfg.max_candidates == 0 {
        return Vec::new();
    }
    GraspRectangle::new(cu, cv, width, height, angle)
        .and_then(|r| ScoredRectangle::new(r, Some(quality), QualityKind::SuccessProbability))
        .map(|r| vec![r])
        .unwrap_or_default()
}
