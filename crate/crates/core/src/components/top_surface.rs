use std::collections::HashMap;

use super::plane::{principal_angle, support_plane_height};
use crate::types::{GraspCandidate, PointCloud, Pose6DoF, QualityKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopSurfaceConfig {
    pub max_candidates: usize,
    pub min_quality: f64,
    /// Points closer than this are connected.
    pub cluster_radius: f64,
    /// Points must rise this far above the support plane.
    pub plane_margin: f64,
    /// Bin width of the plane search.
    pub plane_bin: f64,
}

impl Default for TopSurfaceConfig {
    fn default() -> Self {
        TopSurfaceConfig {
            max_candidates: 10,
            min_quality: 0.0,
            cluster_radius: 0.02,
            plane_margin: 0.02,
            plane_bin: 0.01,
        }
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Euclidean clusters under `radius` connectivity, each in input order,
/// ordered by first member.
pub fn cluster_points(points: &[[f64; 3]], radius: f64) -> Vec<Vec<usize>> {
    let cell = |p: &[f64; 3]| {
        [
            (p[0] / radius).floor() as i64,
            (p[1] / radius).floor() as i64,
            (p[2] / radius).floor() as i64,
        ]
    };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }
    let mut parent: Vec<usize> = (0..points.len()).collect();
    let r2 = radius * radius;
    for (i, p) in points.iter().enumerate() {
        let c = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) else {
                        continue;
                    };
                    for &j in bucket.iter().filter(|&&j| j > i) {
                        let q = &points[j];
                        let d2 =
                            (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                        if d2 <= r2 {
                            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
            }
        }
    }
    let mut by_root: Vec<Vec<usize>> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    for i in 0..points.len() {
        let r = find(&mut parent, i);
        let k = *slot.entry(r).or_insert_with(|| {
            by_root.push(Vec::new());
            by_root.len() - 1
        });
        by_root[k].push(i);
    }
    by_root
}

/// Top-down grasps on the clusters standing above the support plane.
///
/// Each cluster yields one candidate at its XY centroid and top height,
/// yawed along its principal axis, scored by its share of the elevated
/// points. Sorted by score, ties in cluster order.
pub fn top_surface_plan(cloud: &PointCloud, cfg: &TopSurfaceConfig) -> Vec<GraspCandidate> {
    let pts = cloud.points();
    let Some(plane) = support_plane_height(pts.iter().map(|p| p[2]), cfg.plane_bin) else {
        return Vec::new();
    };
    let above: Vec<[f64; 3]> = pts
        .iter()
        .filter(|p| p[2] > plane + cfg.plane_margin)
        .copied()
        .collect();
    if above.is_empty() {
        return Vec::new();
    }
    let total = above.len() as f64;
    let mut out: Vec<GraspCandidate> = cluster_points(&above, cfg.cluster_radius)
        .into_iter()
        .filter_map(|members| {
            let n = members.len() as f64;
            let (mut mx, mut my, mut top) = (0.0, 0.0, f64::MIN);
            for &i in &members {
                mx += above[i][0];
                my += above[i][1];
                top = top.max(above[i][2]);
            }
            let (mx, my) = (mx / n, my / n);
            let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
            for &i in &members {
                let (dx, dy) = (above[i][0] - mx, above[i][1] - my);
                sxx += dx * dx;
                syy += dy * dy;
                sxy += dx * dy;
            }
            let yaw = principal_angle(sxx / n, syy / n, sxy / n);
            let quality = n / total;
            let pose = Pose6DoF::top_down(mx, my, top, yaw).ok()?;
            GraspCandidate::new(pose, Some(quality), QualityKind::Heuristic).ok()
        })
        .filter(|c| c.quality().unwrap_or(0.0) >= cfg.min_quality)
        .collect();
    out.sort_by(|a, b| {
        b.quality()
            .unwrap_or(0.0)
            .total_cmp(&a.quality().unwrap_or(0.0))
    });
    out.truncate(cfg.max_candidates);
    out
}
