//! Summary statistics of a particle set.

use std::collections::HashMap;

use super::{angle_diff, normalize_angle, LocError, Particle, Pose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterConfig {
    /// Single-linkage distance in cells.
    pub threshold: f64,
    /// Clusters lighter than this do not count as modes.
    pub min_mode_weight: f64,
    /// Only the heaviest particles holding this much of the weight are
    /// clustered, so a thin tail of unlikely poses cannot bridge two modes.
    pub support_mass: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            threshold: 1.0,
            min_mode_weight: 0.05,
            support_mass: 0.99,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseEstimate {
    pub mean: Pose,
    /// Over `(x, y, theta)`, with heading deviations wrapped to `[-pi, pi)`.
    pub covariance: [[f64; 3]; 3],
    pub modes: usize,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Total weight of each single-linkage cluster over particle positions.
pub fn cluster_weights(particles: &[Particle], weights: &[f64], threshold: f64) -> Vec<f64> {
    let n = particles.len();
    let mut parent: Vec<usize> = (0..n).collect();
    let key = |p: &Pose| ((p.x / threshold).floor() as i64, (p.y / threshold).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in particles.iter().enumerate() {
        grid.entry(key(&p.pose)).or_default().push(i);
    }
    let t2 = threshold * threshold;
    for (i, p) in particles.iter().enumerate() {
        let (kx, ky) = key(&p.pose);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(cell) = grid.get(&(kx + dx, ky + dy)) else {
                    continue;
                };
                for &j in cell {
                    if j >= i {
                        continue;
                    }
                    let q = &particles[j].pose;
                    let d2 = (p.pose.x - q.x).powi(2) + (p.pose.y - q.y).powi(2);
                    if d2 <= t2 {
                        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                        if ri != rj {
                            parent[ri] = rj;
                        }
                    }
                }
            }
        }
    }
    let mut totals: HashMap<usize, f64> = HashMap::new();
    for (i, w) in weights.iter().enumerate().take(n) {
        let r = find(&mut parent, i);
        *totals.entry(r).or_default() += w;
    }
    let mut out: Vec<f64> = totals.into_values().collect();
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

/// The fewest particles, heaviest first, whose weights reach `mass`.
fn heaviest(particles: &[Particle], weights: &[f64], mass: f64) -> (Vec<Particle>, Vec<f64>) {
    let mut order: Vec<usize> = (0..particles.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
    let mut acc = 0.0;
    let mut keep = 0;
    for &i in &order {
        keep += 1;
        acc += weights[i];
        if acc >= mass {
            break;
        }
    }
    order.truncate(keep);
    order.sort_unstable();
    (order.iter().map(|&i| particles[i]).collect(), order.iter().map(|&i| weights[i]).collect())
}

/// Weighted mean (circular in heading), covariance and mode count.
pub fn estimate_pose(particles: &[Particle], cluster: &ClusterConfig) -> Result<PoseEstimate, LocError> {
    let Some(first) = particles.first() else {
        return Err(LocError::Empty);
    };
    let total: f64 = particles.iter().map(|p| p.weight).sum();
    let weights: Vec<f64> = if total > 0.0 {
        particles.iter().map(|p| p.weight / total).collect()
    } else {
        vec![1.0 / particles.len() as f64; particles.len()]
    };
    // offsets from the first pose keep identical sets exact
    let (x0, y0) = (first.pose.x, first.pose.y);
    let (mut mx, mut my, mut s, mut c) = (0.0, 0.0, 0.0, 0.0);
    for (p, w) in particles.iter().zip(&weights) {
        mx += w * (p.pose.x - x0);
        my += w * (p.pose.y - y0);
        s += w * p.pose.theta.sin();
        c += w * p.pose.theta.cos();
    }
    let same_heading = particles.iter().all(|p| p.pose.theta == first.pose.theta);
    let theta = if same_heading || (s.abs() < 1e-12 && c.abs() < 1e-12) {
        first.pose.theta
    } else {
        normalize_angle(s.atan2(c))
    };
    let mean = Pose::new(x0 + mx, y0 + my, theta);
    let mut cov = [[0.0; 3]; 3];
    for (p, w) in particles.iter().zip(&weights) {
        let d = [p.pose.x - mean.x, p.pose.y - mean.y, angle_diff(p.pose.theta, mean.theta)];
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += w * d[i] * d[j];
            }
        }
    }
    let (support, support_weights) = heaviest(particles, &weights, cluster.support_mass);
    let clusters = cluster_weights(&support, &support_weights, cluster.threshold);
    let modes = clusters.iter().filter(|&&w| w >= cluster.min_mode_weight).count().max(1);
    Ok(PoseEstimate {
        mean,
        covariance: cov,
        modes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(x: f64, y: f64, theta: f64) -> Particle {
        Particle {
            pose: Pose::new(x, y, theta),
            weight: 1.0,
        }
    }

    #[test]
    fn identical_particles() {
        let ps = vec![p(1.3, 2.7, 0.4); 25];
        let e = estimate_pose(&ps, &ClusterConfig::default()).unwrap();
        assert_eq!(e.mean, Pose::new(1.3, 2.7, 0.4));
        assert_eq!(e.covariance, [[0.0; 3]; 3]);
        assert_eq!(e.modes, 1);
    }

    #[test]
    fn two_distant_clusters() {
        let mut ps = Vec::new();
        for i in 0..20 {
            let o = i as f64 * 0.05;
            ps.push(p(1.0 + o, 1.0, 0.0));
            ps.push(p(11.0 + o, 1.0, 0.0));
        }
        let cfg = ClusterConfig {
            threshold: 2.0,
            ..Default::default()
        };
        assert_eq!(estimate_pose(&ps, &cfg).unwrap().modes, 2);
    }

    #[test]
    fn light_clusters_are_not_modes() {
        let mut ps: Vec<_> = (0..99).map(|i| p(1.0 + i as f64 * 0.01, 1.0, 0.0)).collect();
        ps.push(p(20.0, 20.0, 0.0));
        assert_eq!(estimate_pose(&ps, &ClusterConfig::default()).unwrap().modes, 1);
    }

    #[test]
    fn unlikely_bridge_does_not_merge_modes() {
        let mut ps: Vec<_> = (0..40).map(|i| p(if i < 20 { 1.0 } else { 9.0 }, 1.0, 0.0)).collect();
        for i in 0..17 {
            let mut q = p(1.5 + i as f64 * 0.45, 1.0, 0.0);
            q.weight = 1e-4;
            ps.push(q);
        }
        let cfg = ClusterConfig::default();
        assert_eq!(estimate_pose(&ps, &cfg).unwrap().modes, 2);
        let all = ClusterConfig { support_mass: 1.0, ..cfg };
        assert_eq!(estimate_pose(&ps, &all).unwrap().modes, 1);
    }

    #[test]
    fn heading_mean_wraps() {
        let ps = vec![p(0.0, 0.0, 0.1), p(0.0, 0.0, -0.1)];
        let e = estimate_pose(&ps, &ClusterConfig::default()).unwrap();
        assert!(angle_diff(e.mean.theta, 0.0).abs() < 1e-12);
        assert!((e.covariance[2][2] - 0.01).abs() < 1e-12);
    }

    #[test]
    fn empty_set() {
        assert_eq!(estimate_pose(&[], &ClusterConfig::default()), Err(LocError::Empty));
    }

    fn naive_cluster_count(ps: &[Particle], threshold: f64) -> usize {
        let n = ps.len();
        let mut parent: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for j in 0..i {
                if ps[i].pose.distance(&ps[j].pose) <= threshold {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
        (0..n).filter(|&i| find(&mut parent, i) == i).count()
    }

    proptest! {
        #[test]
        fn grid_clustering_matches_all_pairs(
            pts in prop::collection::vec((0.0f64..12.0, 0.0f64..12.0), 1..80),
            threshold in 0.3f64..3.0,
        ) {
            let ps: Vec<_> = pts.iter().map(|&(x, y)| p(x, y, 0.0)).collect();
            let w = vec![1.0 / ps.len() as f64; ps.len()];
            prop_assert_eq!(cluster_weights(&ps, &w, threshold).len(), naive_cluster_count(&ps, threshold));
        }
    }
}
