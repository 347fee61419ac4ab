use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

const MAX_ITERATIONS: usize = 100;

/// Partition of K users into G nonempty groups whose sizes differ by at most one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grouping {
    assignments: Vec<usize>,
    sizes: Vec<usize>,
}

impl Grouping {
    pub fn new(assignments: Vec<usize>, group_count: usize) -> Result<Self> {
        if group_count == 0 || group_count > assignments.len() {
            return Err(Error::validation(
                "hrs.groups",
                format!("{group_count} must lie in [1, {}]", assignments.len()),
            ));
        }
        let mut sizes = vec![0usize; group_count];
        for &g in &assignments {
            if g >= group_count {
                return Err(Error::validation("grouping", format!("group index {g} out of range")));
            }
            sizes[g] += 1;
        }
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        if *lo == 0 || hi - lo > 1 {
            return Err(Error::validation(
                "grouping",
                format!("group sizes {sizes:?} must be nonempty and within one of each other"),
            ));
        }
        Ok(Grouping { assignments, sizes })
    }

    pub fn single_group(users: usize) -> Self {
        Grouping {
            assignments: vec![0; users],
            sizes: vec![users],
        }
    }

    pub fn group_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn user_count(&self) -> usize {
        self.assignments.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn group_of(&self, user: usize) -> usize {
        self.assignments[user]
    }

    /// Users of group `g` in ascending index order.
    pub fn members(&self, g: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&k| self.assignments[k] == g)
            .collect()
    }
}

fn dist2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Capacity-constrained assignment: pairs are visited by ascending distance,
/// then user index, then centroid index. Every group takes `K / G` users and
/// the first `K % G` groups to fill up take one more.
fn balanced_assign(points: &[[f64; 2]], centroids: &[[f64; 2]]) -> Vec<usize> {
    let (k, g) = (points.len(), centroids.len());
    let (base, extra) = (k / g, k % g);
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(k * g);
    for (u, p) in points.iter().enumerate() {
        for (c, q) in centroids.iter().enumerate() {
            pairs.push((dist2(p, q), u, c));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assignment = vec![usize::MAX; k];
    let mut counts = vec![0usize; g];
    let mut extras_used = 0;
    for (_, u, c) in pairs {
        if assignment[u] != usize::MAX {
            continue;
        }
        if counts[c] < base {
            assignment[u] = c;
            counts[c] += 1;
        } else if counts[c] == base && extras_used < extra {
            assignment[u] = c;
            counts[c] += 1;
            extras_used += 1;
        }
    }
    assignment
}

/// Seeded k-means++ initialization.
fn initial_centroids(points: &[[f64; 2]], g: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let mut centroids = vec![points[rng.random_range(0..points.len())]];
    while centroids.len() < g {
        let weights: Vec<f64> = points
            .iter()
            .map(|p| centroids.iter().map(|c| dist2(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = points.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if target < *w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[pick]);
    }
    centroids
}

/// Groups users by proximity on the floor with balanced k-means.
///
/// Group labels are renumbered by each group's smallest user index, so the
/// result depends only on the positions, `groups` and `seed`.
pub fn group_users(positions: &[Vec3], groups: usize, seed: u64) -> Result<Grouping> {
    let k = positions.len();
    if groups == 0 || groups > k {
        return Err(Error::validation(
            "hrs.groups",
            format!("{groups} groups requested for {k} users"),
        ));
    }
    let points: Vec<[f64; 2]> = positions.iter().map(|p| [p.x, p.y]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = initial_centroids(&points, groups, &mut rng);
    let mut assignment = balanced_assign(&points, &centroids);
    for _ in 0..MAX_ITERATIONS {
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
            for (p, _) in points.iter().zip(&assignment).filter(|(_, a)| **a == c) {
                sx += p[0];
                sy += p[1];
                n += 1;
            }
            *centroid = [sx / n as f64, sy / n as f64];
        }
        let next = balanced_assign(&points, &centroids);
        if next == assignment {
            break;
        }
        assignment = next;
    }
    let mut relabel = vec![usize::MAX; groups];
    let mut next_label = 0;
    for &a in &assignment {
        if relabel[a] == usize::MAX {
            relabel[a] = next_label;
            next_label += 1;
        }
    }
    Grouping::new(assignment.iter().map(|a| relabel[*a]).collect(), groups)
}
