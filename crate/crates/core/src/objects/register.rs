//! Outlier-robust rigid registration from putative correspondences.
//!
//! Pairwise compatibility (rigid transforms preserve distances) builds a
//! consistency graph; a maximum clique of mutually compatible
//! correspondences seeds a centroid-aligned SVD estimate, refined once on
//! the recovered inlier set.

use nalgebra::Matrix3;
use thiserror::Error;

use super::{fit_centroid_aabb, harris_keypoints_3d, CadModel, HarrisConfig, PointCluster};
use crate::graph::ObjectAttr;
use crate::math::{Aabb, Pose, Quat, Vec3};

/// Exact maximum clique is used up to this many correspondences; above it a
/// degree-ordered greedy heuristic with multiple starts takes over.
pub const EXACT_CLIQUE_LIMIT: usize = 60;

#[derive(Error, Debug)]
pub enum RegisterError {
    #[error("need at least 3 correspondences, got {0}")]
    TooFewCorrespondences(usize),
    #[error("fewer than 3 mutually compatible correspondences (best clique {0})")]
    NotEnoughConsensus(usize),
    #[error("degenerate correspondence geometry")]
    Degenerate,
}

#[derive(Clone, Debug)]
pub struct Registration {
    /// Maps model-frame points into the scene frame.
    pub pose: Pose,
    /// Indices into the correspondence list with residual <= beta.
    pub inliers: Vec<usize>,
    pub converged: bool,
}

/// All-pairs putative matching: the full Cartesian product of index pairs,
/// model-major then scene-minor.
pub fn match_all(model_kp: &[Vec3], scene_kp: &[Vec3]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(model_kp.len() * scene_kp.len());
    for m in 0..model_kp.len() {
        for s in 0..scene_kp.len() {
            out.push((m, s));
        }
    }
    out
}

/// Bitset adjacency rows.
fn build_compat(
    correspondences: &[(usize, usize)],
    model: &[Vec3],
    scene: &[Vec3],
    beta: f64,
) -> Vec<Vec<u64>> {
    let n = correspondences.len();
    let words = n.div_ceil(64);
    let mut adj = vec![vec![0u64; words]; n];
    for i in 0..n {
        let (mi, si) = correspondences[i];
        for j in i + 1..n {
            let (mj, sj) = correspondences[j];
            let dm = (model[mi] - model[mj]).norm();
            let ds = (scene[si] - scene[sj]).norm();
            if (dm - ds).abs() <= 2.0 * beta {
                adj[i][j / 64] |= 1 << (j % 64);
                adj[j][i / 64] |= 1 << (i % 64);
            }
        }
    }
    adj
}

fn bit(adj: &[Vec<u64>], i: usize, j: usize) -> bool {
    adj[i][j / 64] >> (j % 64) & 1 == 1
}

/// Maximum clique of the compatibility graph: exact (Bron-Kerbosch with
/// pivoting) up to `EXACT_CLIQUE_LIMIT` vertices, degree-ordered greedy with
/// multiple starts beyond. Ties resolve to the lexicographically smallest
/// member list, so the result is deterministic.
pub fn max_clique(adj: &[Vec<u64>]) -> Vec<usize> {
    candidate_cliques(adj).into_iter().next().unwrap_or_default()
}

/// Candidate consensus sets ordered by (size desc, lexicographic): the
/// maximum clique first, then near-maximum maximal cliques. Distance
/// compatibility alone cannot tell a mirror assignment from the true one, so
/// registration scores a handful of candidates by fit quality.
fn candidate_cliques(adj: &[Vec<u64>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    if n == 0 {
        return Vec::new();
    }
    let mut cliques = if n <= EXACT_CLIQUE_LIMIT {
        bron_kerbosch(adj)
    } else {
        greedy_cliques(adj)
    };
    cliques.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    cliques.dedup();
    let max_len = cliques.first().map_or(0, |c| c.len());
    cliques.retain(|c| c.len() + 1 >= max_len);
    cliques.truncate(32);
    cliques
}

fn bron_kerbosch(adj: &[Vec<u64>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let words = n.div_ceil(64);
    struct Found {
        cliques: Vec<Vec<usize>>,
        best_len: usize,
        expansions: usize,
    }
    let mut found = Found { cliques: Vec::new(), best_len: 0, expansions: 0 };

    fn popcount(set: &[u64]) -> u32 {
        set.iter().map(|w| w.count_ones()).sum()
    }
    fn iter_bits(set: &[u64]) -> Vec<usize> {
        let mut out = Vec::new();
        for (wi, &w) in set.iter().enumerate() {
            let mut w = w;
            while w != 0 {
                let b = w.trailing_zeros() as usize;
                out.push(wi * 64 + b);
                w &= w - 1;
            }
        }
        out
    }

    fn expand(
        adj: &[Vec<u64>],
        r: &mut Vec<usize>,
        p: Vec<u64>,
        x: Vec<u64>,
        found: &mut Found,
    ) {
        found.expansions += 1;
        if found.expansions > 200_000 {
            return;
        }
        if popcount(&p) == 0 && popcount(&x) == 0 {
            let mut cand = r.clone();
            cand.sort_unstable();
            found.best_len = found.best_len.max(cand.len());
            found.cliques.push(cand);
            return;
        }
        // Prune branches that cannot reach within one of the best size;
        // near-maximum maximal cliques stay live for fit scoring.
        if r.len() + (popcount(&p) as usize) + 1 < found.best_len {
            return;
        }
        // Pivot: vertex in P u X with the most neighbors in P.
        let mut pivot = None;
        let mut pivot_deg = -1i64;
        for u in iter_bits(&p).into_iter().chain(iter_bits(&x)) {
            let deg: u32 = p
                .iter()
                .zip(&adj[u])
                .map(|(pw, aw)| (pw & aw).count_ones())
                .sum();
            if deg as i64 > pivot_deg {
                pivot_deg = deg as i64;
                pivot = Some(u);
            }
        }
        let ext: Vec<usize> = match pivot {
            Some(u) => iter_bits(&p).into_iter().filter(|&v| !bit(adj, u, v)).collect(),
            None => iter_bits(&p),
        };
        let mut p = p;
        let mut x = x;
        for v in ext {
            let mut p_next: Vec<u64> = p.iter().zip(&adj[v]).map(|(a, b)| a & b).collect();
            let mut x_next: Vec<u64> = x.iter().zip(&adj[v]).map(|(a, b)| a & b).collect();
            r.push(v);
            expand(adj, r, std::mem::take(&mut p_next), std::mem::take(&mut x_next), found);
            r.pop();
            p[v / 64] &= !(1 << (v % 64));
            x[v / 64] |= 1 << (v % 64);
        }
    }

    let mut p = vec![0u64; words];
    for i in 0..n {
        p[i / 64] |= 1 << (i % 64);
    }
    let mut r = Vec::new();
    expand(adj, &mut r, p, vec![0u64; words], &mut found);
    found.cliques
}

fn greedy_cliques(adj: &[Vec<u64>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let degree: Vec<u32> = adj.iter().map(|row| row.iter().map(|w| w.count_ones()).sum()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| degree[b].cmp(&degree[a]).then(a.cmp(&b)));

    let mut out: Vec<Vec<usize>> = Vec::new();
    for &start in order.iter().take(16) {
        let mut clique = vec![start];
        let mut cands: Vec<u64> = adj[start].clone();
        loop {
            // Next member: candidate with the most connections into the
            // remaining candidate set, ties to the smaller index.
            let mut pick = None;
            let mut pick_score = (0u32, usize::MAX);
            for wi in 0..cands.len() {
                let mut w = cands[wi];
                while w != 0 {
                    let v = wi * 64 + w.trailing_zeros() as usize;
                    w &= w - 1;
                    let score: u32 =
                        cands.iter().zip(&adj[v]).map(|(c, a)| (c & a).count_ones()).sum();
                    if pick.is_none() || score > pick_score.0 || (score == pick_score.0 && v < pick_score.1)
                    {
                        pick = Some(v);
                        pick_score = (score, v);
                    }
                }
            }
            let Some(v) = pick else { break };
            clique.push(v);
            for (c, a) in cands.iter_mut().zip(&adj[v]) {
                *c &= a;
            }
        }
        clique.sort_unstable();
        out.push(clique);
    }
    out
}

/// Centroid-aligned SVD estimate of the rigid transform mapping model points
/// onto scene points (Arun/Horn).
fn svd_fit(pairs: &[(Vec3, Vec3)]) -> Result<Pose, RegisterError> {
    let n = pairs.len() as f64;
    let m_centroid = pairs.iter().map(|(m, _)| m).sum::<Vec3>() / n;
    let s_centroid = pairs.iter().map(|(_, s)| s).sum::<Vec3>() / n;
    let mut h = Matrix3::zeros();
    for (m, s) in pairs {
        h += (m - m_centroid) * (s - s_centroid).transpose();
    }
    let svd = h.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else { return Err(RegisterError::Degenerate) };
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant();
    let mut correction = Matrix3::identity();
    correction[(2, 2)] = if d < 0.0 { -1.0 } else { 1.0 };
    let r = v * correction * u.transpose();
    let rotation = Quat::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(r));
    let translation = s_centroid - r * m_centroid;
    Ok(Pose { rotation, translation })
}

/// Robust registration: compatibility graph, maximum clique, SVD estimate,
/// one inlier re-estimation pass. The returned pose maps model points into
/// the scene with every reported inlier residual at most `beta`.
pub fn robust_register(
    correspondences: &[(usize, usize)],
    model: &[Vec3],
    scene: &[Vec3],
    beta: f64,
) -> Result<Registration, RegisterError> {
    if correspondences.len() < 3 {
        return Err(RegisterError::TooFewCorrespondences(correspondences.len()));
    }
    let adj = build_compat(correspondences, model, scene, beta);
    let cliques = candidate_cliques(&adj);
    let top_len = cliques.first().map_or(0, |c| c.len());
    if top_len < 3 {
        return Err(RegisterError::NotEnoughConsensus(top_len));
    }

    let pairs_of = |idx: &[usize]| -> Vec<(Vec3, Vec3)> {
        idx.iter()
            .map(|&i| {
                let (m, s) = correspondences[i];
                (model[m], scene[s])
            })
            .collect()
    };
    let inliers_of = |pose: &Pose| -> Vec<usize> {
        correspondences
            .iter()
            .enumerate()
            .filter(|(_, (m, s))| (pose.transform_point(&model[*m]) - scene[*s]).norm() <= beta)
            .map(|(i, _)| i)
            .collect()
    };

    // Candidate consensus sets: maximal cliques first, then mutually
    // compatible triples drawn from the highest-degree vertices. Distance
    // compatibility alone cannot reject mirror assignments on symmetric
    // keypoint sets, so every candidate is scored by how many
    // correspondences its fitted pose actually explains.
    let mut candidate_sets = cliques;
    let n = correspondences.len();
    let mut degree: Vec<(u32, usize)> = (0..n)
        .map(|i| (adj[i].iter().map(|w| w.count_ones()).sum::<u32>(), i))
        .collect();
    degree.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let seeds: Vec<usize> = degree.iter().take(24).map(|&(_, i)| i).collect();
    let mut budget = 2000usize;
    'outer: for (a, &i) in seeds.iter().enumerate() {
        for (b, &j) in seeds.iter().enumerate().skip(a + 1) {
            if !bit(&adj, i, j) {
                continue;
            }
            for &k in seeds.iter().skip(b + 1) {
                if bit(&adj, i, k) && bit(&adj, j, k) {
                    candidate_sets.push(vec![i, j, k]);
                    budget -= 1;
                    if budget == 0 {
                        break 'outer;
                    }
                }
            }
        }
    }

    // Fit each candidate set (SVD estimate + one inlier re-estimation) and
    // keep the pose explaining the most correspondences.
    let mut best: Option<Registration> = None;
    for clique in &candidate_sets {
        if clique.len() < 3 {
            continue;
        }
        let Ok(pose0) = svd_fit(&pairs_of(clique)) else { continue };
        let inliers0 = inliers_of(&pose0);
        if inliers0.len() < 3 {
            continue;
        }
        let (pose, inliers) = match svd_fit(&pairs_of(&inliers0)) {
            Ok(pose1) => {
                let inliers1 = inliers_of(&pose1);
                if inliers1.len() >= 3 {
                    (pose1, inliers1)
                } else {
                    (pose0, inliers0)
                }
            }
            Err(_) => (pose0, inliers0),
        };
        let n = inliers.len();
        if best.as_ref().is_none_or(|b| n > b.inliers.len()) {
            best = Some(Registration { pose, inliers, converged: true });
        }
        if n == correspondences.len() {
            break;
        }
    }
    best.ok_or(RegisterError::NotEnoughConsensus(top_len))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FitOutcome {
    Registered,
    /// Registration failed; the centroid/box fallback was used.
    Fallback(String),
}

/// Fit a known shape to a cluster via keypoints + robust registration. On
/// success the object pose is the registration pose and the box is the
/// axis-aligned hull of the transformed model bounds; on failure the
/// unknown-shape path is used.
pub fn fit_known_shape(
    cad: &CadModel,
    cluster: &PointCluster,
    beta: f64,
    harris: &HarrisConfig,
) -> (ObjectAttr, FitOutcome) {
    let fallback = |reason: String| {
        let mut attr = fit_centroid_aabb(cluster);
        attr.known_shape = None;
        (attr, FitOutcome::Fallback(reason))
    };

    let model_kp_idx = harris_keypoints_3d(&cad.points, harris);
    let scene_kp_idx = harris_keypoints_3d(&cluster.points, harris);
    if model_kp_idx.len() < 3 || scene_kp_idx.len() < 3 {
        return fallback(format!(
            "too few keypoints (model {}, scene {})",
            model_kp_idx.len(),
            scene_kp_idx.len()
        ));
    }
    let model_kp: Vec<Vec3> = model_kp_idx.iter().map(|&i| cad.points[i]).collect();
    let scene_kp: Vec<Vec3> = scene_kp_idx.iter().map(|&i| cluster.points[i]).collect();
    let correspondences = match_all(&model_kp, &scene_kp);
    match robust_register(&correspondences, &model_kp, &scene_kp, beta) {
        Ok(reg) => {
            let model_box = Aabb::from_points(cad.points.iter()).expect("cad has points");
            let mut aabb: Option<Aabb> = None;
            for b in 0..8 {
                let corner = Vec3::new(
                    if b & 1 == 0 { model_box.min.x } else { model_box.max.x },
                    if b & 2 == 0 { model_box.min.y } else { model_box.max.y },
                    if b & 4 == 0 { model_box.min.z } else { model_box.max.z },
                );
                let p = reg.pose.transform_point(&corner);
                aabb = Some(match aabb {
                    None => Aabb::from_point(p),
                    Some(mut a) => {
                        a.expand_point(&p);
                        a
                    }
                });
            }
            let attr = ObjectAttr {
                pose: reg.pose,
                aabb: aabb.expect("eight corners"),
                class: cluster.class,
                known_shape: Some(cad.id.clone()),
                vertices: Vec::new(),
            };
            (attr, FitOutcome::Registered)
        }
        Err(e) => fallback(e.to_string()),
    }
}
