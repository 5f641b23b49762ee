use nalgebra::{DMatrix, SymmetricEigen};

/// Hard cluster ids, one per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    /// Number of clusters actually produced (may be below the request).
    pub k: usize,
    pub ids: Vec<u32>,
}

impl ClusterAssignment {
    /// A single cluster covering `n` pixels.
    pub fn uniform(n: usize) -> Self {
        Self {
            k: 1,
            ids: vec![0; n],
        }
    }
}

struct Leaf {
    members: Vec<u32>,
    sse: f64,
    created: usize,
    splittable: bool,
}

/// Spread below this (per point) counts as no variance at all.
const FLAT_SSE_PER_POINT: f64 = 1e-10;

fn mean_and_sse(points: &[f64], dim: usize, members: &[u32]) -> (Vec<f64>, f64) {
    let mut mean = vec![0.0; dim];
    for &m in members {
        let p = &points[m as usize * dim..(m as usize + 1) * dim];
        for (acc, v) in mean.iter_mut().zip(p) {
            *acc += v;
        }
    }
    let n = members.len().max(1) as f64;
    mean.iter_mut().for_each(|v| *v /= n);
    let mut sse = 0.0;
    for &m in members {
        let p = &points[m as usize * dim..(m as usize + 1) * dim];
        sse += p
            .iter()
            .zip(&mean)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    (mean, sse)
}

/// First principal axis with its largest-magnitude component made positive.
fn principal_axis(points: &[f64], dim: usize, members: &[u32], mean: &[f64]) -> Vec<f64> {
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for &m in members {
        let p = &points[m as usize * dim..(m as usize + 1) * dim];
        for i in 0..dim {
            let di = p[i] - mean[i];
            for j in i..dim {
                cov[(i, j)] += di * (p[j] - mean[j]);
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut top = 0;
    for i in 1..dim {
        if eig.eigenvalues[i] > eig.eigenvalues[top] {
            top = i;
        }
    }
    let mut axis: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
    let mut lead = 0;
    for i in 1..dim {
        if axis[i].abs() > axis[lead].abs() {
            lead = i;
        }
    }
    if axis[lead] < 0.0 {
        axis.iter_mut().for_each(|v| *v = -*v);
    }
    axis
}

/// Divisive PCA-tree clustering of `points` (row-major, `dim` values each).
///
/// The leaf with the largest total squared deviation is split at its mean
/// projection onto its first principal axis until there are `k` leaves or no
/// leaf has any spread left. Points projecting at or below the mean stay in
/// the split leaf's slot; the rest form a new leaf appended at the end.
/// Cluster ids are leaf slots.
pub fn pca_tree_cluster(points: &[f64], dim: usize, k: usize) -> ClusterAssignment {
    assert!(dim > 0 && points.len().is_multiple_of(dim));
    let n = points.len() / dim;
    let all: Vec<u32> = (0..n as u32).collect();
    let (_, sse) = mean_and_sse(points, dim, &all);
    let mut leaves = vec![Leaf {
        members: all,
        sse,
        created: 0,
        splittable: true,
    }];
    let mut created = 1;
    while leaves.len() < k {
        let mut pick: Option<usize> = None;
        for (i, leaf) in leaves.iter().enumerate() {
            if !leaf.splittable || leaf.sse <= FLAT_SSE_PER_POINT * leaf.members.len() as f64 {
                continue;
            }
            pick = match pick {
                Some(j)
                    if leaves[j].sse > leaf.sse
                        || (leaves[j].sse == leaf.sse && leaves[j].created < leaf.created) =>
                {
                    Some(j)
                }
                _ => Some(i),
            };
        }
        let Some(slot) = pick else { break };
        let members = &leaves[slot].members;
        let (mean, _) = mean_and_sse(points, dim, members);
        let axis = principal_axis(points, dim, members, &mean);
        let (low, high): (Vec<u32>, Vec<u32>) = members.iter().partition(|&&m| {
            let p = &points[m as usize * dim..(m as usize + 1) * dim];
            let proj: f64 = p
                .iter()
                .zip(&mean)
                .zip(&axis)
                .map(|((a, b), v)| (a - b) * v)
                .sum();
            proj <= 0.0
        });
        if low.is_empty() || high.is_empty() {
            leaves[slot].splittable = false;
            continue;
        }
        let (_, low_sse) = mean_and_sse(points, dim, &low);
        let (_, high_sse) = mean_and_sse(points, dim, &high);
        leaves[slot] = Leaf {
            members: low,
            sse: low_sse,
            created,
            splittable: true,
        };
        leaves.push(Leaf {
            members: high,
            sse: high_sse,
            created: created + 1,
            splittable: true,
        });
        created += 2;
    }
    let mut ids = vec![0u32; n];
    for (slot, leaf) in leaves.iter().enumerate() {
        for &m in &leaf.members {
            ids[m as usize] = slot as u32;
        }
    }
    ClusterAssignment {
        k: leaves.len(),
        ids,
    }
}
