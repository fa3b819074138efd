//! Puzzle reconstruction.
//!
//! The clean solver walks the unique exact matches outward from one piece.
//! The noisy pipeline finds 0-loops (four matings closing around an interior
//! junction) among candidate matings, grows them into hierarchical loops,
//! ranks every loop by relaxing it as a small known-matings puzzle, merges
//! the ranked loops into one aggregate and places it with a final relaxation.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{c1, c2, candidate_matings, check_unique_edges, EdgeGeom, EdgeRef, Mating, Tolerance};
use crate::dynamics::{
    make_bodies, run_two_phase, run_two_phase_from, spring_length_sq, springs_from_matings, RelaxConfig, Tracer,
    TwoPhaseOutcome,
};
use crate::error::SolveError;
use crate::geometry::{difference_convex, ConvexPolygon, Pose};
use crate::puzzlegen::{derive_seed, rng_from_seed};

pub mod assembly;

pub use assembly::FitTolerance;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub relax: RelaxConfig,
    /// Ranking runs get `relax.max_steps / rank_budget_divisor` steps.
    pub rank_budget_divisor: usize,
    /// Convergence tolerance of ranking runs relative to `relax.energy_tol`.
    pub rank_tol_factor: f64,
    /// Parents kept per level during growth.
    pub beam_width: usize,
    /// Growth alternatives kept per parent.
    pub states_per_parent: usize,
    pub max_level: usize,
    pub w_overlap: f64,
    pub w_dist: f64,
    /// Independent phase-1 starts for known-matings placement; the lowest energy wins.
    pub restarts: usize,
    /// Most specific 0-loops ranked by relaxation; the rest stay unranked.
    pub rank_pool: usize,
    /// Mate vertex gap allowed during merging, in units of the noise bound.
    pub residual_factor: f64,
    /// Overlap allowed per unit perimeter of a merged piece, in units of the noise bound.
    pub overlap_factor: f64,
    /// Weight of a loop's prior against its fit score during assembly.
    pub prior_weight: f64,
    /// Most specific 0-loops used as assembly seeds, besides the top grown loop.
    pub starts: usize,
    pub seed: u64,
}

impl SolverConfig {
    pub fn for_diameter(d: f64, seed: u64) -> Self {
        SolverConfig {
            relax: RelaxConfig::for_diameter(d),
            rank_budget_divisor: 10,
            rank_tol_factor: 1.0,
            beam_width: 4,
            states_per_parent: 2,
            max_level: 32,
            w_overlap: 1.0,
            w_dist: 1.0,
            restarts: 3,
            rank_pool: 64,
            residual_factor: 4.0,
            overlap_factor: 1.0,
            prior_weight: 0.03,
            starts: 8,
            seed,
        }
    }

    /// Merge thresholds for noise bound `eps` on a puzzle of diameter `d`.
    pub fn fit_tolerance(&self, eps: f64, d: f64) -> FitTolerance {
        let floor = 1e-6 * d;
        FitTolerance {
            residual: self.residual_factor * eps + floor,
            overlap_per_length: self.overlap_factor * eps + floor,
        }
    }

    pub fn rank_relax(&self) -> RelaxConfig {
        RelaxConfig {
            max_steps: (self.relax.max_steps / self.rank_budget_divisor.max(1)).max(1),
            energy_tol: self.relax.energy_tol * self.rank_tol_factor,
            ..self.relax
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub n_candidates: usize,
    pub n_zero_loops: usize,
    /// Highest loop level reached.
    pub x_max: Option<usize>,
    pub loops_per_level: Vec<usize>,
    /// Matings added after merging: attachments of pieces outside every merged
    /// loop plus links between placed pieces.
    pub completed_matings: usize,
    pub unplaced: Vec<usize>,
    pub final_energy: f64,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutput {
    pub matings: Vec<Mating>,
    pub poses: BTreeMap<usize, Pose>,
    pub report: SolverReport,
}

/// Pose that lays edge `f` of `q` antiparallel onto the world segment `e`
/// (`e_start`, `e_end`).
fn mate_pose(q: &ConvexPolygon, f: usize, e_start: crate::geometry::Point2, e_end: crate::geometry::Point2) -> Pose {
    let (a, b) = q.edge(f);
    // f runs from e_end to e_start once placed
    let theta = (e_start - e_end).angle() - (b - a).angle();
    let mid_local = (a + b) * 0.5;
    let mid_world = (e_start + e_end) * 0.5;
    Pose::new(theta, mid_world - mid_local.rotate(theta))
}

/// Greedy exact reconstruction of a clean puzzle.
pub fn solve_clean<R: Rng>(pieces: &[ConvexPolygon], tol: &Tolerance, rng: &mut R) -> Result<SolveOutput, SolveError> {
    if pieces.is_empty() {
        return Err(SolveError::Empty);
    }
    let geoms = EdgeGeom::all(pieces);
    let mut by_len: Vec<(f64, EdgeRef)> = geoms
        .iter()
        .enumerate()
        .flat_map(|(p, gs)| gs.iter().enumerate().map(move |(j, g)| (g.length, EdgeRef::new(p, j))))
        .collect();
    by_len.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let mut partner: HashMap<EdgeRef, EdgeRef> = HashMap::new();
    for i in 0..by_len.len() {
        let (li, ei) = by_len[i];
        let ge = &geoms[ei.piece][ei.edge];
        let mut found = Vec::new();
        for dir in [-1isize, 1] {
            let mut j = i as isize + dir;
            while j >= 0 && (j as usize) < by_len.len() {
                let (lj, ej) = by_len[j as usize];
                if (lj - li).abs() > tol.length {
                    break;
                }
                let gf = &geoms[ej.piece][ej.edge];
                if ej.piece != ei.piece && c1(ge, gf, tol) && c2(ge, gf, tol) {
                    found.push(ej);
                }
                j += dir;
            }
        }
        match found.len() {
            0 => {}
            1 => {
                partner.insert(ei, found[0]);
            }
            n => return Err(SolveError::Ambiguous { edge: ei, count: n }),
        }
    }

    let n = pieces.len();
    let mut poses: Vec<Option<Pose>> = vec![None; n];
    let place_tol = 1e3 * tol.length.max(f64::MIN_POSITIVE);
    let start = rng.gen_range(0..n);
    let order: Vec<usize> = (start..n).chain(0..start).collect();
    for &root in &order {
        if poses[root].is_some() {
            continue;
        }
        poses[root] = Some(Pose::IDENTITY);
        let mut queue = VecDeque::from([root]);
        while let Some(p) = queue.pop_front() {
            let pose_p = poses[p].unwrap();
            for j in 0..pieces[p].len() {
                let e = EdgeRef::new(p, j);
                let Some(&f) = partner.get(&e) else { continue };
                let (a, b) = pieces[p].edge(j);
                let (wa, wb) = (pose_p.apply(a), pose_p.apply(b));
                let q = f.piece;
                match poses[q] {
                    None => {
                        poses[q] = Some(mate_pose(&pieces[q], f.edge, wa, wb));
                        queue.push_back(q);
                    }
                    Some(pose_q) => {
                        let (c, d) = pieces[q].edge(f.edge);
                        if pose_q.apply(c).dist(wb) > place_tol || pose_q.apply(d).dist(wa) > place_tol {
                            return Err(SolveError::Inconsistent(e));
                        }
                    }
                }
            }
        }
    }
    let mut matings: Vec<Mating> = partner
        .iter()
        .filter(|(e, f)| e < f)
        .map(|(e, f)| Mating::new(*e, *f))
        .collect::<Result<_, _>>()?;
    matings.sort();
    check_unique_edges(&matings, Some(pieces))?;
    Ok(SolveOutput {
        matings,
        poses: poses.into_iter().enumerate().map(|(i, p)| (i, p.unwrap())).collect(),
        report: SolverReport {
            converged: true,
            ..SolverReport::default()
        },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopNode {
    pub level: usize,
    /// Sorted matings. Level 0 loops also keep their cyclic order in `cycle`.
    pub matings: Vec<Mating>,
    pub cycle: Option<[Mating; 4]>,
    pub pieces: BTreeSet<usize>,
    /// Edges of member pieces not used by any member mating.
    pub boundary: Vec<EdgeRef>,
    pub quality: f64,
    /// Specificity of the member matings; lower is more specific.
    pub prior: f64,
    pub parent: Option<usize>,
}

impl LoopNode {
    fn from_matings(
        level: usize,
        matings: Vec<Mating>,
        cycle: Option<[Mating; 4]>,
        pieces: &[ConvexPolygon],
        parent: Option<usize>,
    ) -> Self {
        let mut matings = matings;
        matings.sort();
        matings.dedup();
        let member: BTreeSet<usize> = matings.iter().flat_map(|m| m.pieces()).collect();
        let used: BTreeSet<EdgeRef> = matings.iter().flat_map(|m| m.edges()).collect();
        let boundary = member
            .iter()
            .flat_map(|&p| (0..pieces[p].len()).map(move |j| EdgeRef::new(p, j)))
            .filter(|e| !used.contains(e))
            .collect();
        LoopNode {
            level,
            matings,
            cycle,
            pieces: member,
            boundary,
            quality: f64::INFINITY,
            prior: 0.0,
            parent,
        }
    }

    fn key(&self) -> (Vec<usize>, Vec<Mating>) {
        (self.pieces.iter().copied().collect(), self.matings.clone())
    }
}

/// Index from each edge to its candidate mates.
pub fn candidate_index(matings: &[Mating]) -> BTreeMap<EdgeRef, Vec<EdgeRef>> {
    let mut idx: BTreeMap<EdgeRef, Vec<EdgeRef>> = BTreeMap::new();
    for m in matings {
        idx.entry(m.a()).or_default().push(m.b());
        idx.entry(m.b()).or_default().push(m.a());
    }
    for v in idx.values_mut() {
        v.sort();
        v.dedup();
    }
    idx
}

fn prev_edge(pieces: &[ConvexPolygon], e: EdgeRef) -> EdgeRef {
    let n = pieces[e.piece].len();
    EdgeRef::new(e.piece, (e.edge + n - 1) % n)
}

fn next_edge(pieces: &[ConvexPolygon], e: EdgeRef) -> EdgeRef {
    let n = pieces[e.piece].len();
    EdgeRef::new(e.piece, (e.edge + 1) % n)
}

/// All 0-loops over the candidate set.
///
/// A loop leaves piece A through edge `x`, enters B at its mate `y` and leaves
/// B through `y - 1`, and so on through four distinct pieces, arriving back
/// at A through edge `x + 1`. Each loop is reported once, rotated so its first
/// exit edge is the smallest of the four.
pub fn enumerate_zero_loops(candidates: &[Mating], pieces: &[ConvexPolygon]) -> Vec<LoopNode> {
    let idx = candidate_index(candidates);
    let empty = Vec::new();
    let mates = |e: EdgeRef| idx.get(&e).unwrap_or(&empty);
    let mut out = Vec::new();
    for &x in idx.keys() {
        let a = x.piece;
        let back = next_edge(pieces, x);
        // backward half: D's exit edge d_exit mates `back`; D's entry is d_exit + 1
        // whose mate is C's exit edge.
        let mut by_c_exit: BTreeMap<EdgeRef, Vec<(EdgeRef, EdgeRef)>> = BTreeMap::new();
        for &d_exit in mates(back) {
            if d_exit.piece == a {
                continue;
            }
            let d_entry = next_edge(pieces, d_exit);
            for &c_exit in mates(d_entry) {
                if c_exit.piece == a || c_exit.piece == d_exit.piece {
                    continue;
                }
                by_c_exit.entry(c_exit).or_default().push((d_entry, d_exit));
            }
        }
        if by_c_exit.is_empty() {
            continue;
        }
        for &b_entry in mates(x) {
            if b_entry.piece == a {
                continue;
            }
            let b_exit = prev_edge(pieces, b_entry);
            for &c_entry in mates(b_exit) {
                let c = c_entry.piece;
                if c == a || c == b_entry.piece {
                    continue;
                }
                let c_exit = prev_edge(pieces, c_entry);
                let Some(list) = by_c_exit.get(&c_exit) else { continue };
                for &(d_entry, d_exit) in list {
                    let d = d_entry.piece;
                    if d == b_entry.piece || d == c {
                        continue;
                    }
                    let exits = [x, b_exit, c_exit, d_exit];
                    if exits[1..].iter().any(|&e| e < x) {
                        continue;
                    }
                    let cyc = [
                        Mating::new(x, b_entry).unwrap(),
                        Mating::new(b_exit, c_entry).unwrap(),
                        Mating::new(c_exit, d_entry).unwrap(),
                        Mating::new(d_exit, back).unwrap(),
                    ];
                    out.push(LoopNode::from_matings(0, cyc.to_vec(), Some(cyc), pieces, None));
                }
            }
        }
    }
    out.sort_by_key(|p| p.cycle);
    out.dedup_by(|p, q| p.cycle == q.cycle);
    out
}

fn contradicts(m: &Mating, used: &BTreeMap<EdgeRef, Mating>) -> bool {
    m.edges().iter().any(|e| used.get(e).is_some_and(|other| other != m))
}

/// Grows every parent by attaching overlapping 0-loops around its boundary.
///
/// For each boundary edge of the parent, in order, every partial state that
/// still leaves the edge unmated forks over the 0-loops that contain the
/// edge, share at least one mating with the state, add at least one mating
/// and contradict none. Partial states are kept by the mean prior of the
/// 0-loops they absorbed.
pub fn grow_loops(
    parents: &[LoopNode],
    zero: &[LoopNode],
    pieces: &[ConvexPolygon],
    states_per_parent: usize,
) -> Vec<LoopNode> {
    grow(parents, zero, pieces, states_per_parent, None)
}

/// [`grow_loops`] where every state also carries a placement and a fork is
/// kept only if the absorbed loop fits it.
pub fn grow_loops_placed(
    parents: &[LoopNode],
    zero: &[LoopNode],
    pieces: &[ConvexPolygon],
    states_per_parent: usize,
    fit: &FitTolerance,
    settle: &RelaxConfig,
) -> Vec<LoopNode> {
    grow(parents, zero, pieces, states_per_parent, Some((fit, settle)))
}

#[derive(Clone)]
struct GrowState {
    prior_sum: f64,
    added: usize,
    matings: BTreeSet<Mating>,
    pieces: BTreeSet<usize>,
    poses: BTreeMap<usize, Pose>,
}

impl GrowState {
    fn mean_prior(&self) -> f64 {
        if self.added == 0 {
            f64::INFINITY
        } else {
            self.prior_sum / self.added as f64
        }
    }
}

fn grow(
    parents: &[LoopNode],
    zero: &[LoopNode],
    pieces: &[ConvexPolygon],
    states_per_parent: usize,
    placed: Option<(&FitTolerance, &RelaxConfig)>,
) -> Vec<LoopNode> {
    let mut by_edge: BTreeMap<EdgeRef, Vec<usize>> = BTreeMap::new();
    for (i, l) in zero.iter().enumerate() {
        for m in &l.matings {
            for e in m.edges() {
                by_edge.entry(e).or_default().push(i);
            }
        }
    }
    let grown: Vec<Vec<LoopNode>> = parents
        .par_iter()
        .enumerate()
        .map(|(pi, parent)| {
            let poses = match placed {
                Some((_, cfg)) => assembly::place_loop(pieces, parent, cfg),
                None => BTreeMap::new(),
            };
            let mut states = vec![GrowState {
                prior_sum: 0.0,
                added: 0,
                matings: parent.matings.iter().copied().collect(),
                pieces: parent.pieces.clone(),
                poses,
            }];
            for &e in &parent.boundary {
                let Some(loops) = by_edge.get(&e) else { continue };
                let mut next: Vec<GrowState> = Vec::new();
                for st in &states {
                    let used: BTreeMap<EdgeRef, Mating> =
                        st.matings.iter().flat_map(|m| m.edges().map(|x| (x, *m))).collect();
                    if used.contains_key(&e) {
                        next.push(st.clone());
                        continue;
                    }
                    let mut forked = false;
                    for &li in loops {
                        let l = &zero[li];
                        let shared = l.matings.iter().filter(|m| st.matings.contains(m)).count();
                        if shared == 0 || shared == l.matings.len() {
                            continue;
                        }
                        if l.matings.iter().any(|m| contradicts(m, &used)) {
                            continue;
                        }
                        let mut poses = st.poses.clone();
                        if let Some((fit, _)) = placed {
                            let novel: BTreeSet<usize> = l.pieces.difference(&st.pieces).copied().collect();
                            if !assembly::place_novel(pieces, &mut poses, &l.matings, &novel)
                                || !assembly::fits(pieces, &poses, &l.matings, &novel, fit)
                            {
                                continue;
                            }
                        }
                        let mut s2 = GrowState {
                            prior_sum: st.prior_sum + l.prior,
                            added: st.added + 1,
                            matings: st.matings.clone(),
                            pieces: st.pieces.clone(),
                            poses,
                        };
                        s2.matings.extend(l.matings.iter().copied());
                        s2.pieces.extend(l.pieces.iter().copied());
                        next.push(s2);
                        forked = true;
                    }
                    if !forked {
                        next.push(st.clone());
                    }
                }
                next.sort_by(|x, y| {
                    x.mean_prior()
                        .total_cmp(&y.mean_prior())
                        .then_with(|| y.matings.len().cmp(&x.matings.len()))
                        .then_with(|| x.matings.cmp(&y.matings))
                });
                next.dedup_by(|x, y| x.matings == y.matings);
                next.truncate(states_per_parent.max(1));
                states = next;
            }
            states
                .into_iter()
                .filter(|st| st.matings.len() > parent.matings.len())
                .map(|st| {
                    let prior = st.mean_prior();
                    let mut node = LoopNode::from_matings(
                        parent.level + 1,
                        st.matings.into_iter().collect(),
                        None,
                        pieces,
                        Some(pi),
                    );
                    node.prior = prior;
                    node
                })
                .collect()
        })
        .collect();
    let mut seen = BTreeSet::new();
    grown.into_iter().flatten().filter(|n| seen.insert(n.key())).collect()
}

/// Fraction of each piece covered by the others, summed over pieces.
pub fn overlap_quality(placed: &[ConvexPolygon]) -> f64 {
    let mut q = 0.0;
    for (i, p) in placed.iter().enumerate() {
        let (plo, phi) = p.bounding_box();
        let mut rest = vec![p.clone()];
        for (j, o) in placed.iter().enumerate() {
            if i == j {
                continue;
            }
            let (olo, ohi) = o.bounding_box();
            if olo.x >= phi.x || plo.x >= ohi.x || olo.y >= phi.y || plo.y >= ohi.y {
                continue;
            }
            rest = rest.iter().flat_map(|r| difference_convex(r, o)).collect();
            if rest.is_empty() {
                break;
            }
        }
        let free: f64 = rest.iter().map(|r| r.area()).sum();
        q += ((p.area() - free) / p.area()).max(0.0);
    }
    q
}

/// Sub-puzzle of the given pieces with matings renumbered to local ids.
fn sub_puzzle(pieces: &[ConvexPolygon], ids: &[usize], matings: &[Mating]) -> (Vec<ConvexPolygon>, Vec<Mating>) {
    let local: BTreeMap<usize, usize> = ids.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let sub: Vec<ConvexPolygon> = ids.iter().map(|&p| pieces[p].clone()).collect();
    let ms = matings
        .iter()
        .map(|m| {
            let (a, b) = (m.a(), m.b());
            Mating::new(
                EdgeRef::new(local[&a.piece], a.edge),
                EdgeRef::new(local[&b.piece], b.edge),
            )
            .expect("distinct pieces stay distinct")
        })
        .collect();
    (sub, ms)
}

/// Poses that chain pieces together along the matings by breadth-first
/// search from piece 0, laying each mate antiparallel onto its placed
/// partner. Pieces not reached stay at the identity.
pub fn chain_poses(pieces: &[ConvexPolygon], matings: &[Mating]) -> Vec<Pose> {
    let mut adj: BTreeMap<usize, Vec<(EdgeRef, EdgeRef)>> = BTreeMap::new();
    for m in matings {
        let (a, b) = (m.a(), m.b());
        adj.entry(a.piece).or_default().push((a, b));
        adj.entry(b.piece).or_default().push((b, a));
    }
    let mut poses: Vec<Option<Pose>> = vec![None; pieces.len()];
    for root in 0..pieces.len() {
        if poses[root].is_some() {
            continue;
        }
        poses[root] = Some(Pose::IDENTITY);
        let mut queue = VecDeque::from([root]);
        while let Some(p) = queue.pop_front() {
            let pose_p = poses[p].unwrap();
            for &(e, f) in adj.get(&p).map(Vec::as_slice).unwrap_or(&[]) {
                if poses[f.piece].is_some() {
                    continue;
                }
                let (a, b) = pieces[p].edge(e.edge);
                poses[f.piece] = Some(mate_pose(&pieces[f.piece], f.edge, pose_p.apply(a), pose_p.apply(b)));
                queue.push_back(f.piece);
            }
        }
    }
    poses.into_iter().map(|p| p.unwrap_or(Pose::IDENTITY)).collect()
}

/// Quality of a loop: overlap after phase 1 plus normalized squared spring
/// lengths after phase 2. Non-converged runs score infinity.
pub fn rank_loop(node: &LoopNode, pieces: &[ConvexPolygon], diameter: f64, cfg: &SolverConfig) -> f64 {
    let ids: Vec<usize> = node.pieces.iter().copied().collect();
    let (sub, ms) = sub_puzzle(pieces, &ids, &node.matings);
    let rcfg = cfg.rank_relax();
    let init = chain_poses(&sub, &ms);
    let Ok(out) = run_two_phase_from(&sub, &ms, &init, &rcfg, None) else {
        return f64::INFINITY;
    };
    if !out.converged() {
        return f64::INFINITY;
    }
    let placed1: Vec<ConvexPolygon> = sub
        .iter()
        .zip(&out.phase1.poses)
        .map(|(p, s)| p.transformed(s))
        .collect();
    let q_overlap = overlap_quality(&placed1);
    let q_dist = 2.0 * out.phase2.energy / (rcfg.k * diameter * diameter);
    cfg.w_overlap * q_overlap + cfg.w_dist * q_dist
}

fn rank_all(nodes: &mut [LoopNode], pieces: &[ConvexPolygon], diameter: f64, cfg: &SolverConfig) {
    let qs: Vec<f64> = nodes.par_iter().map(|n| rank_loop(n, pieces, diameter, cfg)).collect();
    for (n, q) in nodes.iter_mut().zip(qs) {
        n.quality = q;
    }
}

fn by_rank(a: &LoopNode, b: &LoopNode) -> std::cmp::Ordering {
    a.quality
        .total_cmp(&b.quality)
        .then_with(|| a.prior.total_cmp(&b.prior))
        .then_with(|| a.matings.cmp(&b.matings))
}

/// Sets each loop's prior to the sum, over the edges of its matings, of the
/// log of the edge's candidate count. Loops built from edges with few
/// plausible mates come first.
pub fn assign_priors(nodes: &mut [LoopNode], candidates: &[Mating]) {
    let mut count: HashMap<EdgeRef, usize> = HashMap::new();
    for m in candidates {
        for e in m.edges() {
            *count.entry(e).or_default() += 1;
        }
    }
    for n in nodes.iter_mut() {
        n.prior = n
            .matings
            .iter()
            .flat_map(|m| m.edges())
            .map(|e| (count.get(&e).copied().unwrap_or(1) as f64).ln())
            .sum();
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Aggregate {
    pub pieces: BTreeSet<usize>,
    pub matings: BTreeSet<Mating>,
}

/// Merges ranked loops, seeded by the best loop of the highest level.
pub fn merge_loops(loops: &[LoopNode]) -> Aggregate {
    let mut order: Vec<&LoopNode> = loops.iter().filter(|l| l.quality.is_finite()).collect();
    order.sort_by(|a, b| b.level.cmp(&a.level).then_with(|| by_rank(a, b)));
    let Some(seed) = order.first() else {
        return Aggregate::default();
    };
    let mut agg = Aggregate {
        pieces: seed.pieces.clone(),
        matings: seed.matings.iter().copied().collect(),
    };
    loop {
        let before = agg.matings.len();
        for l in &order[1..] {
            if l.pieces.is_disjoint(&agg.pieces) || l.pieces.is_subset(&agg.pieces) {
                continue;
            }
            let used: BTreeMap<EdgeRef, Mating> = agg.matings.iter().flat_map(|m| m.edges().map(|x| (x, *m))).collect();
            if l.matings.iter().any(|m| contradicts(m, &used)) {
                continue;
            }
            agg.pieces.extend(l.pieces.iter().copied());
            agg.matings.extend(l.matings.iter().copied());
        }
        if agg.matings.len() == before {
            break;
        }
    }
    agg
}

/// Places pieces given their matings; returns poses keyed by piece id.
/// The tracer sees the first restart.
pub fn place_known(
    pieces: &[ConvexPolygon],
    ids: &[usize],
    matings: &[Mating],
    cfg: &SolverConfig,
    mut tracer: Option<&mut Tracer<'_>>,
) -> Result<(BTreeMap<usize, Pose>, TwoPhaseOutcome), SolveError> {
    let (sub, ms) = sub_puzzle(pieces, ids, matings);
    let restarts = cfg.restarts.max(1);
    let mut best: Option<TwoPhaseOutcome> = None;
    for r in 0..restarts {
        let mut rng = rng_from_seed(derive_seed(cfg.seed, r as u64));
        let out = if r == 0 {
            run_two_phase(&sub, &ms, &cfg.relax, &mut rng, tracer.as_deref_mut())?
        } else {
            run_two_phase(&sub, &ms, &cfg.relax, &mut rng, None)?
        };
        let better = best.as_ref().is_none_or(|b| out.phase2.energy < b.phase2.energy);
        if better {
            best = Some(out);
        }
        if best.as_ref().unwrap().phase2.energy <= cfg.relax.energy_tol {
            break;
        }
    }
    let best = best.expect("at least one run");
    let poses = ids.iter().copied().zip(best.phase2.poses.iter().copied()).collect();
    Ok((poses, best))
}

/// Known-matings reconstruction: relaxation only.
pub fn solve_known(
    pieces: &[ConvexPolygon],
    matings: &[Mating],
    cfg: &SolverConfig,
    tracer: Option<&mut Tracer<'_>>,
) -> Result<SolveOutput, SolveError> {
    if pieces.is_empty() {
        return Err(SolveError::Empty);
    }
    check_unique_edges(matings, Some(pieces))?;
    let ids: Vec<usize> = (0..pieces.len()).collect();
    let (poses, out) = place_known(pieces, &ids, matings, cfg, tracer)?;
    let mut ms = matings.to_vec();
    ms.sort();
    Ok(SolveOutput {
        matings: ms,
        poses,
        report: SolverReport {
            final_energy: out.phase2.energy,
            converged: out.converged(),
            ..SolverReport::default()
        },
    })
}

/// Full noisy pipeline.
pub fn solve_noisy(
    pieces: &[ConvexPolygon],
    eps: f64,
    diameter: f64,
    cfg: &SolverConfig,
    tracer: Option<&mut Tracer<'_>>,
) -> Result<SolveOutput, SolveError> {
    if pieces.is_empty() {
        return Err(SolveError::Empty);
    }
    let tol = Tolerance::for_diameter(diameter);
    let candidates = candidate_matings(pieces, eps, &tol);
    let mut report = SolverReport {
        n_candidates: candidates.len(),
        ..SolverReport::default()
    };
    let mut zero = enumerate_zero_loops(&candidates, pieces);
    report.n_zero_loops = zero.len();
    let fit = cfg.fit_tolerance(eps, diameter);
    let (agg, agg_poses) = if zero.is_empty() {
        // no junctions to close a loop: grow from the largest piece by attachment alone
        let first = (0..pieces.len())
            .max_by(|&a, &b| pieces[a].area().total_cmp(&pieces[b].area()).then(b.cmp(&a)))
            .expect("pieces is non-empty");
        let mut agg = Aggregate {
            pieces: BTreeSet::from([first]),
            matings: BTreeSet::new(),
        };
        let mut poses = BTreeMap::from([(first, Pose::IDENTITY)]);
        report.completed_matings = assembly::attach_leftovers(&mut agg, &mut poses, pieces, &candidates, &fit)
            + assembly::complete_placed(&mut agg, &poses, pieces, &candidates, &fit);
        report.diagnostic = Some("no 0-loops under the noise bounds; pieces placed by unique attachment only".into());
        (agg, poses)
    } else {
        assemble_from_loops(&mut zero, pieces, &candidates, diameter, &fit, cfg, &mut report)
    };
    let matings: Vec<Mating> = agg.matings.iter().copied().collect();
    check_unique_edges(&matings, Some(pieces))?;
    report.unplaced = (0..pieces.len()).filter(|p| !agg.pieces.contains(p)).collect();
    if agg.pieces.is_empty() {
        report.diagnostic = Some("no loop converged during ranking".into());
        return Ok(SolveOutput {
            matings,
            poses: BTreeMap::new(),
            report,
        });
    }
    let ids: Vec<usize> = agg.pieces.iter().copied().collect();
    let (sub, local) = sub_puzzle(pieces, &ids, &matings);
    let init: Vec<Pose> = ids.iter().map(|i| agg_poses[i]).collect();
    let out = run_two_phase_from(&sub, &local, &init, &cfg.relax, tracer)?;
    report.final_energy = out.phase2.energy;
    report.converged = out.converged();
    Ok(SolveOutput {
        matings,
        poses: ids.iter().copied().zip(out.phase2.poses).collect(),
        report,
    })
}

/// Loop growth and best-first assembly over the 0-loops.
fn assemble_from_loops(
    zero: &mut [LoopNode],
    pieces: &[ConvexPolygon],
    candidates: &[Mating],
    diameter: f64,
    fit: &FitTolerance,
    cfg: &SolverConfig,
    report: &mut SolverReport,
) -> (Aggregate, BTreeMap<usize, Pose>) {
    assign_priors(zero, candidates);
    zero.sort_by(|a, b| a.prior.total_cmp(&b.prior).then_with(|| a.cycle.cmp(&b.cycle)));
    let pool = cfg.rank_pool.min(zero.len());
    rank_all(&mut zero[..pool], pieces, diameter, cfg);
    report.loops_per_level.push(zero.len());
    let settle_cfg = cfg.rank_relax();
    let mut grown_all: Vec<LoopNode> = Vec::new();
    let mut parents = beam(&zero[..pool], cfg.beam_width);
    let mut level = 0;
    while !parents.is_empty() && level < cfg.max_level {
        let mut grown = grow_loops_placed(&parents, zero, pieces, cfg.states_per_parent, fit, &settle_cfg);
        if grown.is_empty() {
            break;
        }
        rank_all(&mut grown, pieces, diameter, cfg);
        level += 1;
        report.loops_per_level.push(grown.len());
        parents = beam(&grown, cfg.beam_width);
        grown_all.extend(grown);
    }
    report.x_max = Some(level);

    let top = grown_all
        .iter()
        .filter(|l| l.quality.is_finite())
        .max_by(|a, b| a.level.cmp(&b.level).then_with(|| by_rank(b, a)));
    let seeds: Vec<&LoopNode> = top.into_iter().chain(zero.iter().take(cfg.starts)).collect();
    let tries: Vec<(Aggregate, BTreeMap<usize, Pose>, usize, f64)> = seeds
        .par_iter()
        .map(|seed| {
            let (mut agg, mut poses) = assembly::assemble(seed, zero, pieces, fit, cfg.prior_weight, &settle_cfg);
            let added = assembly::attach_leftovers(&mut agg, &mut poses, pieces, candidates, fit)
                + assembly::complete_placed(&mut agg, &poses, pieces, candidates, fit);
            let c = assembly::compactness(pieces, &poses);
            (agg, poses, added, c)
        })
        .collect();
    let best = tries.into_iter().min_by(|a, b| {
        b.0.pieces
            .len()
            .cmp(&a.0.pieces.len())
            .then_with(|| a.3.total_cmp(&b.3))
    });
    match best {
        Some((agg, poses, added, _)) => {
            report.completed_matings = added;
            (agg, poses)
        }
        None => (Aggregate::default(), BTreeMap::new()),
    }
}

/// Best `k` finite-quality loops.
fn beam(nodes: &[LoopNode], k: usize) -> Vec<LoopNode> {
    let mut v: Vec<LoopNode> = nodes.iter().filter(|n| n.quality.is_finite()).cloned().collect();
    v.sort_by(by_rank);
    v.truncate(k);
    v
}

/// Squared spring length of a placement, normalized by the squared diameter.
pub fn placement_residual(pieces: &[ConvexPolygon], matings: &[Mating], poses: &[Pose], diameter: f64) -> f64 {
    let springs = springs_from_matings(pieces, matings).unwrap_or_default();
    spring_length_sq(&make_bodies(pieces, poses), &springs) / (diameter * diameter)
}
