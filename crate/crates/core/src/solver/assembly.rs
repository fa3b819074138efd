//! Placement-aware merging.
//!
//! The aggregate carries a pose for every member piece. A loop joins only if
//! its new pieces, fitted onto the placed ones through the loop's matings,
//! keep every mating short and do not sit on top of placed pieces.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::constraints::{EdgeRef, Mating};
use crate::dynamics::{make_bodies, relax, springs_from_matings, CollisionMode, RelaxConfig};
use crate::eval::weighted_rigid_fit;
use crate::geometry::{convex_hull, intersection_area, ConvexPolygon, Point2, Pose};

use super::{chain_poses, sub_puzzle, Aggregate, LoopNode};

/// Acceptance thresholds for adding pieces to a placed aggregate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitTolerance {
    /// Largest allowed distance between paired mate vertices.
    pub residual: f64,
    /// Overlap allowed per unit of a new piece's perimeter.
    pub overlap_per_length: f64,
}

/// The two vertex pairs a mating ties together: `(piece, vertex)` on each side.
pub fn vertex_pairs(pieces: &[ConvexPolygon], m: &Mating) -> [((usize, usize), (usize, usize)); 2] {
    let (e, f) = (m.a(), m.b());
    let ne = pieces[e.piece].len();
    let nf = pieces[f.piece].len();
    [
        ((e.piece, e.edge), (f.piece, (f.edge + 1) % nf)),
        ((e.piece, (e.edge + 1) % ne), (f.piece, f.edge)),
    ]
}

fn world(pieces: &[ConvexPolygon], poses: &BTreeMap<usize, Pose>, (p, v): (usize, usize)) -> Point2 {
    poses[&p].apply(pieces[p].vertex(v))
}

/// Largest vertex gap of a mating whose pieces are both placed.
pub fn mating_residual(pieces: &[ConvexPolygon], poses: &BTreeMap<usize, Pose>, m: &Mating) -> f64 {
    vertex_pairs(pieces, m)
        .iter()
        .map(|&(a, b)| world(pieces, poses, a).dist(world(pieces, poses, b)))
        .fold(0.0, f64::max)
}

/// Least-squares pose of piece `q` from its matings to placed pieces.
fn fit_piece(pieces: &[ConvexPolygon], poses: &BTreeMap<usize, Pose>, q: usize, matings: &[Mating]) -> Option<Pose> {
    let mut src = Vec::new();
    let mut dst = Vec::new();
    for m in matings {
        for (a, b) in vertex_pairs(pieces, m) {
            let (mine, other) = if a.0 == q {
                (a, b)
            } else if b.0 == q {
                (b, a)
            } else {
                continue;
            };
            if !poses.contains_key(&other.0) {
                continue;
            }
            src.push(pieces[q].vertex(mine.1));
            dst.push(world(pieces, poses, other));
        }
    }
    let w = vec![1.0; src.len()];
    weighted_rigid_fit(&src, &dst, &w).ok()
}

/// Places `novel` pieces one at a time, always taking the piece with the
/// most matings to already placed pieces. Fails if some piece has none.
pub fn place_novel(
    pieces: &[ConvexPolygon],
    poses: &mut BTreeMap<usize, Pose>,
    matings: &[Mating],
    novel: &BTreeSet<usize>,
) -> bool {
    let mut left: BTreeSet<usize> = novel.clone();
    while !left.is_empty() {
        let best = left
            .iter()
            .map(|&q| {
                let links = matings
                    .iter()
                    .filter(|m| {
                        let [p, r] = m.pieces();
                        (p == q && poses.contains_key(&r)) || (r == q && poses.contains_key(&p))
                    })
                    .count();
                (links, q)
            })
            .max_by(|x, y| x.0.cmp(&y.0).then(y.1.cmp(&x.1)));
        let Some((links, q)) = best else { return false };
        if links == 0 {
            return false;
        }
        let Some(pose) = fit_piece(pieces, poses, q, matings) else {
            return false;
        };
        poses.insert(q, pose);
        left.remove(&q);
    }
    true
}

fn perimeter(p: &ConvexPolygon) -> f64 {
    (0..p.len()).map(|j| p.edge_length(j)).sum()
}

/// Checks that every mating among placed pieces is short and that each new
/// piece overlaps the others by no more than the allowance.
pub fn fits(
    pieces: &[ConvexPolygon],
    poses: &BTreeMap<usize, Pose>,
    matings: &[Mating],
    novel: &BTreeSet<usize>,
    tol: &FitTolerance,
) -> bool {
    if matings
        .iter()
        .any(|m| m.pieces().iter().all(|p| poses.contains_key(p)) && mating_residual(pieces, poses, m) > tol.residual)
    {
        return false;
    }
    let placed: BTreeMap<usize, ConvexPolygon> = poses.iter().map(|(&i, p)| (i, pieces[i].transformed(p))).collect();
    novel.iter().all(|q| {
        let mine = &placed[q];
        let (lo, hi) = mine.bounding_box();
        let overlap: f64 = placed
            .iter()
            .filter(|(i, _)| *i != q)
            .filter(|(_, o)| {
                let (olo, ohi) = o.bounding_box();
                olo.x < hi.x && lo.x < ohi.x && olo.y < hi.y && lo.y < ohi.y
            })
            .map(|(_, o)| intersection_area(mine, o))
            .sum();
        overlap <= tol.overlap_per_length * perimeter(&pieces[*q])
    })
}

/// Relaxes the placed aggregate without collisions, starting from its poses.
pub fn settle(
    pieces: &[ConvexPolygon],
    poses: &mut BTreeMap<usize, Pose>,
    matings: &BTreeSet<Mating>,
    cfg: &RelaxConfig,
) {
    let ids: Vec<usize> = poses.keys().copied().collect();
    let ms: Vec<Mating> = matings.iter().copied().collect();
    let (sub, local) = sub_puzzle(pieces, &ids, &ms);
    let Ok(springs) = springs_from_matings(&sub, &local) else {
        return;
    };
    let init: Vec<Pose> = ids.iter().map(|i| poses[i]).collect();
    let mut bodies = make_bodies(&sub, &init);
    let c = RelaxConfig {
        collisions: CollisionMode::Off,
        ..*cfg
    };
    if let Ok(out) = relax(&mut bodies, &springs, &c, 1, None) {
        for (i, p) in ids.iter().zip(out.poses) {
            poses.insert(*i, p);
        }
    }
}

/// Seed placement of one loop: chained poses settled by a relaxation.
pub fn place_loop(pieces: &[ConvexPolygon], node: &LoopNode, cfg: &RelaxConfig) -> BTreeMap<usize, Pose> {
    let ids: Vec<usize> = node.pieces.iter().copied().collect();
    let (sub, local) = sub_puzzle(pieces, &ids, &node.matings);
    let mut poses: BTreeMap<usize, Pose> = ids.iter().copied().zip(chain_poses(&sub, &local)).collect();
    let ms: BTreeSet<Mating> = node.matings.iter().copied().collect();
    settle(pieces, &mut poses, &ms, cfg);
    poses
}

/// Trial score: the worse of the largest mating gap and the largest overlap of
/// a new piece, each as a fraction of its allowance. `None` if over budget.
fn fit_score(
    pieces: &[ConvexPolygon],
    world: &BTreeMap<usize, ConvexPolygon>,
    trial: &BTreeMap<usize, Pose>,
    matings: &[Mating],
    novel: &BTreeSet<usize>,
    tol: &FitTolerance,
) -> Option<f64> {
    let mut worst = 0.0f64;
    for m in matings {
        let r = mating_residual(pieces, trial, m) / tol.residual;
        if r > 1.0 {
            return None;
        }
        worst = worst.max(r);
    }
    let fresh: BTreeMap<usize, ConvexPolygon> = novel.iter().map(|&q| (q, pieces[q].transformed(&trial[&q]))).collect();
    for (q, mine) in &fresh {
        let (lo, hi) = mine.bounding_box();
        let overlap: f64 = world
            .iter()
            .chain(fresh.iter().filter(|(i, _)| *i != q))
            .filter(|(_, o)| {
                let (olo, ohi) = o.bounding_box();
                olo.x < hi.x && lo.x < ohi.x && olo.y < hi.y && lo.y < ohi.y
            })
            .map(|(_, o)| intersection_area(mine, o))
            .sum();
        let r = overlap / (tol.overlap_per_length * perimeter(&pieces[*q]));
        if r > 1.0 {
            return None;
        }
        worst = worst.max(r);
    }
    Some(worst)
}

#[derive(PartialEq)]
struct Entry {
    score: f64,
    idx: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        o.score.total_cmp(&self.score).then_with(|| o.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

/// Best-first merge from `seed`. Every 0-loop touching the aggregate is
/// keyed by `prior_weight * prior` plus its fit score against the current
/// placement, and the lowest key joins next. Keys are refreshed lazily when
/// a loop reaches the front of the queue.
pub fn assemble(
    seed: &LoopNode,
    zero: &[LoopNode],
    pieces: &[ConvexPolygon],
    tol: &FitTolerance,
    prior_weight: f64,
    cfg: &RelaxConfig,
) -> (Aggregate, BTreeMap<usize, Pose>) {
    let mut by_piece: Vec<Vec<usize>> = vec![Vec::new(); pieces.len()];
    for (i, l) in zero.iter().enumerate() {
        for &p in &l.pieces {
            by_piece[p].push(i);
        }
    }
    let mut agg = Aggregate {
        pieces: seed.pieces.clone(),
        matings: seed.matings.iter().copied().collect(),
    };
    let mut poses = place_loop(pieces, seed, cfg);
    let mut used: BTreeMap<EdgeRef, Mating> = agg.matings.iter().flat_map(|m| m.edges().map(|x| (x, *m))).collect();
    let mut world = world_polygons(pieces, &poses);
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    let mut heap: BinaryHeap<Entry> = BinaryHeap::new();

    let try_loop = |l: &LoopNode,
                    agg: &Aggregate,
                    poses: &BTreeMap<usize, Pose>,
                    used: &BTreeMap<EdgeRef, Mating>,
                    world: &BTreeMap<usize, ConvexPolygon>|
     -> Option<(f64, BTreeMap<usize, Pose>)> {
        if l.pieces.is_subset(&agg.pieces) || l.matings.iter().any(|m| super::contradicts(m, used)) {
            return None;
        }
        let novel: BTreeSet<usize> = l.pieces.difference(&agg.pieces).copied().collect();
        let mut trial = poses.clone();
        if !place_novel(pieces, &mut trial, &l.matings, &novel) {
            return None;
        }
        let s = fit_score(pieces, world, &trial, &l.matings, &novel, tol)?;
        Some((prior_weight * l.prior + s, trial))
    };

    let mut frontier: Vec<usize> = agg.pieces.iter().copied().collect();
    loop {
        for p in frontier.drain(..) {
            for &i in &by_piece[p] {
                if seen.insert(i) {
                    if let Some((score, _)) = try_loop(&zero[i], &agg, &poses, &used, &world) {
                        heap.push(Entry { score, idx: i });
                    }
                }
            }
        }
        let Some(top) = heap.pop() else { break };
        let l = &zero[top.idx];
        let Some((score, trial)) = try_loop(l, &agg, &poses, &used, &world) else {
            continue;
        };
        if heap.peek().is_some_and(|next| next.score < score) {
            heap.push(Entry { score, ..top });
            continue;
        }
        frontier = l.pieces.difference(&agg.pieces).copied().collect();
        agg.pieces.extend(l.pieces.iter().copied());
        agg.matings.extend(l.matings.iter().copied());
        used.extend(l.matings.iter().flat_map(|m| m.edges().map(|x| (x, *m))));
        poses = trial;
        settle(pieces, &mut poses, &agg.matings, cfg);
        world = world_polygons(pieces, &poses);
    }
    (agg, poses)
}

fn world_polygons(pieces: &[ConvexPolygon], poses: &BTreeMap<usize, Pose>) -> BTreeMap<usize, ConvexPolygon> {
    poses.iter().map(|(&i, p)| (i, pieces[i].transformed(p))).collect()
}

/// Convex hull area of the placed pieces over their summed area.
pub fn compactness(pieces: &[ConvexPolygon], poses: &BTreeMap<usize, Pose>) -> f64 {
    let world = world_polygons(pieces, poses);
    let pts: Vec<Point2> = world.values().flat_map(|w| w.vertices().iter().copied()).collect();
    let sum: f64 = world.values().map(ConvexPolygon::area).sum();
    match convex_hull(&pts) {
        Ok(h) if sum > 0.0 => h.area() / sum,
        _ => f64::INFINITY,
    }
}

/// Attaches pieces that no merged loop covers. A candidate mating from a free
/// placed edge to a free edge of an unplaced piece is taken when the piece,
/// fitted through it alone, fits, and no other fitting candidate uses either
/// edge. Repeats until nothing attaches; returns the matings added.
pub fn attach_leftovers(
    agg: &mut Aggregate,
    poses: &mut BTreeMap<usize, Pose>,
    pieces: &[ConvexPolygon],
    candidates: &[Mating],
    tol: &FitTolerance,
) -> usize {
    let mut used: BTreeSet<EdgeRef> = agg.matings.iter().flat_map(|m| m.edges()).collect();
    let mut added = 0;
    loop {
        let world = world_polygons(pieces, poses);
        let mut options: Vec<(Mating, usize, Pose)> = Vec::new();
        for m in candidates {
            let [p, r] = m.pieces();
            let q = match (poses.contains_key(&p), poses.contains_key(&r)) {
                (true, false) => r,
                (false, true) => p,
                _ => continue,
            };
            if m.edges().iter().any(|e| used.contains(e)) {
                continue;
            }
            let mut trial = poses.clone();
            let Some(pose) = fit_piece(pieces, &trial, q, std::slice::from_ref(m)) else {
                continue;
            };
            trial.insert(q, pose);
            let novel = BTreeSet::from([q]);
            if fit_score(pieces, &world, &trial, std::slice::from_ref(m), &novel, tol).is_some() {
                options.push((*m, q, pose));
            }
        }
        let mut count: BTreeMap<EdgeRef, usize> = BTreeMap::new();
        for (m, _, _) in &options {
            for e in m.edges() {
                *count.entry(e).or_insert(0) += 1;
            }
        }
        let mut taken = 0;
        for (m, q, pose) in options {
            if poses.contains_key(&q) || m.edges().iter().any(|e| count[e] != 1) {
                continue;
            }
            poses.insert(q, pose);
            agg.pieces.insert(q);
            agg.matings.insert(m);
            used.extend(m.edges());
            taken += 1;
        }
        if taken == 0 {
            break;
        }
        added += taken;
    }
    added
}

/// Adds candidate matings between placed pieces whose edges are both free and
/// whose vertex gaps are within the residual tolerance, shortest first.
pub fn complete_placed(
    agg: &mut Aggregate,
    poses: &BTreeMap<usize, Pose>,
    pieces: &[ConvexPolygon],
    candidates: &[Mating],
    tol: &FitTolerance,
) -> usize {
    let mut used: BTreeSet<EdgeRef> = agg.matings.iter().flat_map(|m| m.edges()).collect();
    let mut close: Vec<(f64, Mating)> = candidates
        .iter()
        .filter(|m| m.pieces().iter().all(|p| poses.contains_key(p)))
        .filter(|m| m.edges().iter().all(|e| !used.contains(e)))
        .map(|m| (mating_residual(pieces, poses, m), *m))
        .filter(|(r, _)| *r <= tol.residual)
        .collect();
    close.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let mut added = 0;
    for (_, m) in close {
        if m.edges().iter().any(|e| used.contains(e)) {
            continue;
        }
        used.extend(m.edges());
        agg.matings.insert(m);
        added += 1;
    }
    added
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::puzzlegen::gen_polygon_puzzle;

    #[test]
    fn truth_fits_and_completes() {
        let g = gen_polygon_puzzle(6, 0.0, 21).unwrap();
        let b = &g.bundle;
        let pieces = b.polygons();
        let gt = b.ground_truth.as_ref().unwrap();
        let tol = FitTolerance {
            residual: 1e-6 * b.diameter(),
            overlap_per_length: 1e-6 * b.diameter(),
        };
        for m in &gt.matings {
            assert!(mating_residual(&pieces, &gt.poses, m) < 1e-9 * b.diameter());
        }
        let all: BTreeSet<usize> = (0..pieces.len()).collect();
        assert!(fits(&pieces, &gt.poses, &gt.matings, &all, &tol));
        let mut agg = Aggregate {
            pieces: all,
            matings: BTreeSet::new(),
        };
        let added = complete_placed(&mut agg, &gt.poses, &pieces, &gt.matings, &tol);
        assert_eq!(added, gt.matings.len());
    }

    #[test]
    fn leftover_piece_attaches_through_unique_candidate() {
        let g = gen_polygon_puzzle(6, 0.0, 21).unwrap();
        let b = &g.bundle;
        let pieces = b.polygons();
        let gt = b.ground_truth.as_ref().unwrap();
        let tol = FitTolerance {
            residual: 1e-6 * b.diameter(),
            overlap_per_length: 1e-6 * b.diameter(),
        };
        let mut poses = BTreeMap::from([(0, gt.poses[&0])]);
        let mut agg = Aggregate {
            pieces: BTreeSet::from([0]),
            matings: BTreeSet::new(),
        };
        let added = attach_leftovers(&mut agg, &mut poses, &pieces, &gt.matings, &tol);
        assert_eq!(agg.pieces.len(), pieces.len());
        assert_eq!(added, pieces.len() - 1);
        for (i, p) in &poses {
            let t = gt.poses[i];
            assert!((p.tx - t.tx).hypot(p.ty - t.ty) < 1e-6 * b.diameter());
        }
    }

    #[test]
    fn placement_recovers_neighbour() {
        let g = gen_polygon_puzzle(5, 0.0, 3).unwrap();
        let b = &g.bundle;
        let pieces = b.polygons();
        let gt = b.ground_truth.as_ref().unwrap();
        let m = gt.matings[0];
        let [p, q] = m.pieces();
        let mut poses = BTreeMap::from([(p, gt.poses[&p])]);
        assert!(place_novel(&pieces, &mut poses, &[m], &BTreeSet::from([q])));
        let got = pieces[q].transformed(&poses[&q]);
        let want = pieces[q].transformed(&gt.poses[&q]);
        for (a, b) in got.vertices().iter().zip(want.vertices()) {
            assert!(a.dist(*b) < 1e-9 * b.norm().max(1.0));
        }
    }

    #[test]
    fn overlapping_piece_rejected() {
        let g = gen_polygon_puzzle(5, 0.0, 3).unwrap();
        let b = &g.bundle;
        let pieces = b.polygons();
        let gt = b.ground_truth.as_ref().unwrap();
        let mut poses = gt.poses.clone();
        // drop piece 1 onto piece 0
        poses.insert(1, gt.poses[&0]);
        let tol = FitTolerance {
            residual: f64::INFINITY,
            overlap_per_length: 1e-3,
        };
        assert!(!fits(&pieces, &poses, &[], &BTreeSet::from([1]), &tol));
    }
}
