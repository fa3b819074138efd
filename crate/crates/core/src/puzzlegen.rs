//! Puzzle synthesis.
//!
//! A shape `S` and its cuts are combined into one line set; pairwise
//! intersections inside `S` become the nodes of a planar graph whose links
//! join consecutive nodes on a common line. Bounded faces are traced with
//! wedges (angularly consecutive link pairs at a node) and become the
//! pieces. Pieces are then moved to local frames and optionally eroded.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::{EdgeRef, Mating};
use crate::error::GenError;
use crate::geometry::{
    convex_hull, intersect_lines, regular_polygon, signed_area, ConvexPolygon, Line2, Point2, Pose, TAU_REL,
};
use crate::io::{Piece, PuzzleBundle, ShapeDescriptor, ShapeKind, FORMAT_VERSION};

/// Nodes closer than this fraction of the diameter along a line make a
/// configuration non-generic.
pub const GENERIC_SEPARATION: f64 = 1e-6;
/// Shortest admissible chord of a cut inside the shape, relative to the diameter.
pub const MIN_CHORD: f64 = 1e-3;
/// Noise resamples per vertex before a piece is declared failed.
pub const NOISE_RETRIES: usize = 16;
/// Sides of the circle approximation.
pub const CIRCLE_SIDES: usize = 32;
/// Work-space extent for random polygon shapes.
pub const WORKSPACE: f64 = 100.0;

const MAX_ATTEMPTS: usize = 10_000;

pub type Rng64 = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Deterministic per-item seed derived from a base seed (splitmix64).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub xi: f64,
    pub epsilon: f64,
    pub diameter: f64,
}

impl NoiseSpec {
    pub fn new(xi: f64, diameter: f64) -> Result<Self, GenError> {
        if !(0.0..1.0).contains(&xi) || !xi.is_finite() {
            return Err(GenError::InvalidNoise(xi));
        }
        Ok(NoiseSpec {
            xi,
            epsilon: xi * diameter,
            diameter,
        })
    }

    pub fn clean(diameter: f64) -> Self {
        NoiseSpec {
            xi: 0.0,
            epsilon: 0.0,
            diameter,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutSet {
    pub shape: ConvexPolygon,
    pub cuts: Vec<Line2>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub poses: BTreeMap<usize, Pose>,
    pub matings: Vec<Mating>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Link {
    pub a: usize,
    pub b: usize,
    pub line: usize,
}

#[derive(Clone, Debug)]
pub struct PlanarGraph {
    pub nodes: Vec<Point2>,
    /// The two lines crossing at each node; cuts come first in line numbering.
    pub node_lines: Vec<[usize; 2]>,
    pub links: Vec<Link>,
    /// Neighbours of each node sorted by increasing direction angle.
    pub adjacency: Vec<Vec<usize>>,
    pub n_cuts: usize,
}

impl PlanarGraph {
    /// Nodes where two cuts cross (interior junctions).
    pub fn n_intersections(&self) -> usize {
        self.node_lines
            .iter()
            .filter(|l| l[0] < self.n_cuts && l[1] < self.n_cuts)
            .count()
    }

    /// Links lying on cuts rather than on the shape border.
    pub fn cut_links(&self) -> impl Iterator<Item = &Link> {
        self.links.iter().filter(move |l| l.line < self.n_cuts)
    }
}

/// Builds the planar graph of the shape border and the cuts.
pub fn build_planar_graph(cs: &CutSet) -> Result<PlanarGraph, GenError> {
    let shape = &cs.shape;
    let m = shape.len();
    let a = cs.cuts.len();
    let d = shape.diameter();
    let tol = TAU_REL * d;
    let min_sep = GENERIC_SEPARATION * d;

    let mut lines: Vec<Line2> = cs.cuts.clone();
    for j in 0..m {
        let (p, q) = shape.edge(j);
        lines.push(Line2::through(p, q)?);
    }

    let mut nodes = Vec::new();
    let mut node_lines = Vec::new();
    // shape vertex j sits between border edges j-1 and j
    for j in 0..m {
        let prev = a + (j + m - 1) % m;
        let cur = a + j;
        nodes.push(shape.vertex(j));
        node_lines.push([prev.min(cur), prev.max(cur)]);
    }
    for i in 0..a {
        for j in (i + 1)..lines.len() {
            if let Some(p) = intersect_lines(&lines[i], &lines[j]) {
                if shape.contains(p, tol) {
                    nodes.push(p);
                    node_lines.push([i, j]);
                }
            }
        }
    }

    let mut on_line: Vec<Vec<(f64, usize)>> = vec![Vec::new(); lines.len()];
    for (n, ls) in node_lines.iter().enumerate() {
        for &l in ls {
            on_line[l].push((lines[l].param(nodes[n]), n));
        }
    }
    let mut links = Vec::new();
    for (l, list) in on_line.iter_mut().enumerate() {
        list.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        if l < a {
            if list.len() < 2 {
                return Err(GenError::CutMissesShape(l));
            }
            let chord = nodes[list[0].1].dist(nodes[list[list.len() - 1].1]);
            if chord < MIN_CHORD * d {
                return Err(GenError::CutMissesShape(l));
            }
        }
        for w in list.windows(2) {
            let (n1, n2) = (w[0].1, w[1].1);
            let sep = nodes[n1].dist(nodes[n2]);
            if sep < min_sep {
                let o1 = other_line(&node_lines[n1], l);
                let o2 = other_line(&node_lines[n2], l);
                return Err(GenError::NonGeneric {
                    lines: [l, o1, o2],
                    separation: sep,
                });
            }
            links.push(Link { a: n1, b: n2, line: l });
        }
    }

    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for lk in &links {
        adjacency[lk.a].push(lk.b);
        adjacency[lk.b].push(lk.a);
    }
    for (n, adj) in adjacency.iter_mut().enumerate() {
        let c = nodes[n];
        adj.sort_by(|&x, &y| (nodes[x] - c).angle().total_cmp(&(nodes[y] - c).angle()));
    }
    Ok(PlanarGraph {
        nodes,
        node_lines,
        links,
        adjacency,
        n_cuts: a,
    })
}

fn other_line(ls: &[usize; 2], l: usize) -> usize {
    if ls[0] == l {
        ls[1]
    } else {
        ls[0]
    }
}

/// Traces all bounded faces of the graph as node cycles (clockwise).
pub fn extract_faces(g: &PlanarGraph) -> Result<Vec<Vec<usize>>, GenError> {
    // directed half-edge (u, v) -> slot of v in u's adjacency
    let mut used: Vec<Vec<bool>> = g.adjacency.iter().map(|a| vec![false; a.len()]).collect();
    let mut faces = Vec::new();
    for u0 in 0..g.nodes.len() {
        for s0 in 0..g.adjacency[u0].len() {
            if used[u0][s0] {
                continue;
            }
            let mut cycle = Vec::new();
            let (mut u, mut s) = (u0, s0);
            loop {
                if used[u][s] {
                    if u == u0 && s == s0 {
                        break;
                    }
                    return Err(GenError::Faces(format!("half-edge reuse at node {u}")));
                }
                used[u][s] = true;
                cycle.push(u);
                let v = g.adjacency[u][s];
                // wedge at v: the link following (v -> u) counterclockwise keeps the face on the right
                let back = g.adjacency[v]
                    .iter()
                    .position(|&w| w == u)
                    .ok_or_else(|| GenError::Faces(format!("asymmetric link {u}-{v}")))?;
                let deg = g.adjacency[v].len();
                u = v;
                s = (back + 1) % deg;
                if cycle.len() > g.links.len() * 2 {
                    return Err(GenError::Faces("runaway face".into()));
                }
            }
            let pts: Vec<Point2> = cycle.iter().map(|&n| g.nodes[n]).collect();
            if signed_area(&pts) < 0.0 {
                let k = (0..cycle.len()).min_by_key(|&i| cycle[i]).unwrap();
                cycle.rotate_left(k);
                faces.push(cycle);
            }
        }
    }
    Ok(faces)
}

/// All pieces of the planar subdivision, in solved position.
pub fn extract_pieces(g: &PlanarGraph) -> Result<Vec<ConvexPolygon>, GenError> {
    extract_faces(g)?
        .into_iter()
        .map(|f| {
            let pts = f.iter().map(|&n| g.nodes[n]).collect();
            ConvexPolygon::new(pts).map_err(GenError::from)
        })
        .collect()
}

/// Matings of a solved puzzle: coincident antiparallel edges of distinct pieces.
pub fn extract_ground_truth_matings(pieces: &[ConvexPolygon], tol: f64) -> Vec<Mating> {
    struct E {
        key: f64,
        r: EdgeRef,
        a: Point2,
        b: Point2,
    }
    let mut edges: Vec<E> = pieces
        .iter()
        .enumerate()
        .flat_map(|(i, p)| {
            (0..p.len()).map(move |j| {
                let (a, b) = p.edge(j);
                E {
                    key: 0.5 * (a.x + b.x),
                    r: EdgeRef::new(i, j),
                    a,
                    b,
                }
            })
        })
        .collect();
    edges.sort_by(|x, y| x.key.total_cmp(&y.key).then(x.r.cmp(&y.r)));
    let mut out = Vec::new();
    for i in 0..edges.len() {
        for j in (i + 1)..edges.len() {
            if edges[j].key - edges[i].key > tol {
                break;
            }
            let (e, f) = (&edges[i], &edges[j]);
            if e.r.piece != f.r.piece && e.a.dist(f.b) <= tol && e.b.dist(f.a) <= tol {
                out.push(Mating::new(e.r, f.r).expect("distinct pieces"));
            }
        }
    }
    out.sort();
    out
}

/// Moves each piece to a local frame centred at its vertex mean and rotated
/// by a uniform random angle. Returns the local pieces and the poses that map
/// them back.
pub fn canonicalize<R: Rng>(pieces: &[ConvexPolygon], rng: &mut R) -> (Vec<ConvexPolygon>, Vec<Pose>) {
    let mut local = Vec::with_capacity(pieces.len());
    let mut poses = Vec::with_capacity(pieces.len());
    for p in pieces {
        let c = p.vertex_mean();
        let theta = rng.gen_range(0.0..2.0 * PI);
        let pose = Pose::new(theta, c);
        let inv = pose.inverse();
        let pts = inv.apply_all(p.vertices());
        local.push(ConvexPolygon::new(pts).expect("rigid motion keeps validity"));
        poses.push(pose);
    }
    (local, poses)
}

/// Erodes a piece: every vertex moves inward by a uniform distance in
/// `[0, eps)` along a uniform direction inside its interior wedge.
pub fn apply_noise<R: Rng>(piece: &ConvexPolygon, eps: f64, rng: &mut R) -> Result<ConvexPolygon, GenError> {
    erode(piece, eps, rng, false).map(|(p, _)| p)
}

/// Like [`apply_noise`] but a vertex whose retries are exhausted stays put.
/// Returns the eroded piece and the number of vertices left in place.
pub fn apply_noise_lenient<R: Rng>(
    piece: &ConvexPolygon,
    eps: f64,
    rng: &mut R,
) -> Result<(ConvexPolygon, usize), GenError> {
    erode(piece, eps, rng, true)
}

fn erode<R: Rng>(
    piece: &ConvexPolygon,
    eps: f64,
    rng: &mut R,
    keep_stuck: bool,
) -> Result<(ConvexPolygon, usize), GenError> {
    if eps == 0.0 {
        return Ok((piece.clone(), 0));
    }
    let n = piece.len();
    let tol = TAU_REL * piece.diameter();
    let mut ring: Vec<Point2> = piece.vertices().to_vec();
    let mut stuck = 0;
    for j in 0..n {
        let v = piece.vertex(j);
        let towards_next = (piece.vertex(j + 1) - v).angle();
        let interior = piece.interior_angle(j);
        let mut ok = false;
        for _ in 0..NOISE_RETRIES {
            // clockwise ring: the interior wedge opens clockwise from the next edge
            let dir = towards_next - rng.gen_range(0.0..interior);
            let r = rng.gen_range(0.0..eps);
            let cand = v + Point2::from_polar(r, dir);
            ring[j] = cand;
            if piece.contains(cand, tol) && signed_area(&ring) < 0.0 && ConvexPolygon::new(ring.clone()).is_ok() {
                ok = true;
                break;
            }
        }
        if !ok {
            if !keep_stuck {
                return Err(GenError::NoiseFailed {
                    piece: usize::MAX,
                    retries: NOISE_RETRIES,
                });
            }
            ring[j] = v;
            stuck += 1;
        }
    }
    Ok((ConvexPolygon::new(ring)?, stuck))
}

/// Bookkeeping from synthesis used by the statistics suite.
#[derive(Clone, Debug, PartialEq)]
pub struct GenInfo {
    pub a: usize,
    pub n_intersections: usize,
    /// Links on cuts; each becomes exactly one mating.
    pub n_cut_edges: usize,
    pub cut_length_total: f64,
    pub diameter: f64,
    /// Vertices left unperturbed after exhausting noise retries.
    pub noise_stuck: usize,
}

#[derive(Clone, Debug)]
pub struct Generated {
    pub bundle: PuzzleBundle,
    /// Clean pieces in solved position, indexed like the bundle's pieces.
    pub solved: Vec<ConvexPolygon>,
    pub info: GenInfo,
}

/// Full pipeline from a fixed shape and cut set.
pub fn synthesize<R: Rng>(
    cs: &CutSet,
    kind: ShapeKind,
    xi: f64,
    seed: u64,
    rng: &mut R,
) -> Result<Generated, GenError> {
    let g = build_planar_graph(cs)?;
    let solved = extract_pieces(&g)?;
    let d = cs.shape.diameter();
    let noise = NoiseSpec::new(xi, d)?;
    let matings = extract_ground_truth_matings(&solved, GENERIC_SEPARATION * d * 0.5);
    let (local, poses) = canonicalize(&solved, rng);
    let mut pieces = Vec::with_capacity(local.len());
    let mut noise_stuck = 0;
    for (id, p) in local.iter().enumerate() {
        let (noisy, stuck) = apply_noise_lenient(p, noise.epsilon, rng)?;
        noise_stuck += stuck;
        pieces.push(Piece { id, polygon: noisy });
    }
    let info = GenInfo {
        a: cs.cuts.len(),
        n_intersections: g.n_intersections(),
        n_cut_edges: g.cut_links().count(),
        cut_length_total: g.cut_links().map(|l| g.nodes[l.a].dist(g.nodes[l.b])).sum(),
        diameter: d,
        noise_stuck,
    };
    let bundle = PuzzleBundle {
        format_version: FORMAT_VERSION.to_string(),
        seed,
        shape: ShapeDescriptor {
            kind,
            vertices: cs.shape.vertices().to_vec(),
        },
        cuts: Some(cs.cuts.clone()),
        pieces,
        noise,
        ground_truth: Some(GroundTruth {
            poses: poses.into_iter().enumerate().collect(),
            matings,
        }),
    };
    Ok(Generated { bundle, solved, info })
}

/// Repairs `cuts` until the arrangement is generic, redrawing only the
/// offending cut each time with `sample_cut`.
fn generic_cuts<R: Rng>(
    shape: &ConvexPolygon,
    mut cuts: Vec<Line2>,
    rng: &mut R,
    mut sample_cut: impl FnMut(&mut R) -> Option<Line2>,
) -> Result<Vec<Line2>, GenError> {
    let a = cuts.len();
    let mut draw = |rng: &mut R| -> Result<Line2, GenError> {
        for _ in 0..MAX_ATTEMPTS {
            if let Some(l) = sample_cut(rng) {
                return Ok(l);
            }
        }
        Err(GenError::TooManyAttempts(MAX_ATTEMPTS))
    };
    for _ in 0..MAX_ATTEMPTS {
        let cs = CutSet {
            shape: shape.clone(),
            cuts: cuts.clone(),
        };
        match build_planar_graph(&cs) {
            Ok(g) => {
                // faces must trace cleanly as well
                match extract_pieces(&g) {
                    Ok(_) => return Ok(cuts),
                    Err(GenError::Geometry(_)) | Err(GenError::Faces(_)) => {
                        let k = rng.gen_range(0..a.max(1));
                        if a > 0 {
                            cuts[k] = draw(rng)?;
                        }
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(GenError::NonGeneric { lines, .. }) => {
                let k = lines.iter().copied().filter(|&l| l < a).max();
                match k {
                    Some(k) => cuts[k] = draw(rng)?,
                    None => return Err(GenError::TooManyAttempts(0)),
                }
            }
            Err(GenError::CutMissesShape(k)) => cuts[k] = draw(rng)?,
            Err(e) => return Err(e),
        }
    }
    Err(GenError::TooManyAttempts(MAX_ATTEMPTS))
}

/// Puzzle on the 32-gon inscribed in the unit circle with `a` random chords.
/// A chord whose two angles fall between the same pair of adjacent vertices
/// misses the 32-gon and is redrawn.
pub fn gen_circle_puzzle(a: usize, xi: f64, seed: u64) -> Result<Generated, GenError> {
    let mut rng = rng_from_seed(seed);
    let shape = regular_polygon(CIRCLE_SIDES, 1.0);
    let chord = |rng: &mut Rng64| -> Option<Line2> {
        let p1 = Point2::from_polar(1.0, rng.gen_range(0.0..2.0 * PI));
        let p2 = Point2::from_polar(1.0, rng.gen_range(0.0..2.0 * PI));
        if p1.dist(p2) < 1e-9 {
            return None;
        }
        Line2::through(p1, p2).ok()
    };
    let mut initial = Vec::with_capacity(a);
    while initial.len() < a {
        if let Some(l) = chord(&mut rng) {
            initial.push(l);
        }
    }
    let cuts = generic_cuts(&shape, initial, &mut rng, chord)?;
    let cs = CutSet { shape, cuts };
    synthesize(&cs, ShapeKind::Circle, xi, seed, &mut rng)
}

/// Random convex shape (hull of 4..=50 points in the work space) with `a`
/// cuts, each through two random interior points.
pub fn gen_polygon_puzzle(a: usize, xi: f64, seed: u64) -> Result<Generated, GenError> {
    let mut rng = rng_from_seed(seed);
    let shape = random_convex_shape(&mut rng)?;
    let (lo, hi) = shape.bounding_box();
    let interior_point = |rng: &mut Rng64| -> Point2 {
        loop {
            let p = Point2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
            if shape.contains(p, 0.0) {
                return p;
            }
        }
    };
    let d = shape.diameter();
    let cut = |rng: &mut Rng64| -> Option<Line2> {
        let p1 = interior_point(rng);
        let p2 = interior_point(rng);
        if p1.dist(p2) < 1e-6 * d {
            return None;
        }
        Line2::through(p1, p2).ok()
    };
    let mut initial = Vec::with_capacity(a);
    while initial.len() < a {
        if let Some(l) = cut(&mut rng) {
            initial.push(l);
        }
    }
    let cuts = generic_cuts(&shape, initial, &mut rng, cut)?;
    let cs = CutSet { shape, cuts };
    synthesize(&cs, ShapeKind::Polygon, xi, seed, &mut rng)
}

pub fn random_convex_shape<R: Rng>(rng: &mut R) -> Result<ConvexPolygon, GenError> {
    for _ in 0..MAX_ATTEMPTS {
        let n = rng.gen_range(4..=50);
        let pts: Vec<Point2> = (0..n)
            .map(|_| Point2::new(rng.gen_range(0.0..WORKSPACE), rng.gen_range(0.0..WORKSPACE)))
            .collect();
        if let Ok(h) = convex_hull(&pts) {
            // reject slivers whose pieces would be numerically fragile
            if h.area() > 1e-2 * WORKSPACE * WORKSPACE {
                return Ok(h);
            }
        }
    }
    Err(GenError::TooManyAttempts(MAX_ATTEMPTS))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeFamily {
    Circle,
    Polygon,
}

pub fn generate(family: ShapeFamily, a: usize, xi: f64, seed: u64) -> Result<Generated, GenError> {
    match family {
        ShapeFamily::Circle => gen_circle_puzzle(a, xi, seed),
        ShapeFamily::Polygon => gen_polygon_puzzle(a, xi, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{c1, c2, EdgeGeom, Tolerance};
    use approx::assert_abs_diff_eq;

    fn unit_square() -> ConvexPolygon {
        ConvexPolygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn square_without_cuts() {
        let cs = CutSet {
            shape: unit_square(),
            cuts: vec![],
        };
        let g = build_planar_graph(&cs).unwrap();
        assert_eq!(g.nodes.len(), 4);
        assert_eq!(g.links.len(), 4);
        let pieces = extract_pieces(&g).unwrap();
        assert_eq!(pieces.len(), 1);
        assert_abs_diff_eq!(pieces[0].area(), 1.0, epsilon = 1e-12);
        assert!(extract_ground_truth_matings(&pieces, 1e-9).is_empty());
    }

    #[test]
    fn square_with_bisecting_cut() {
        // hand count: 4 corners + 2 cut ends; 4 border links become 6, plus the cut
        let cs = CutSet {
            shape: unit_square(),
            cuts: vec![Line2::new(0.0, 1.0, -0.5).unwrap()],
        };
        let g = build_planar_graph(&cs).unwrap();
        assert_eq!(g.nodes.len(), 6);
        assert_eq!(g.links.len(), 7);
        let pieces = extract_pieces(&g).unwrap();
        assert_eq!(pieces.len(), 2);
        for p in &pieces {
            assert_abs_diff_eq!(p.area(), 0.5, epsilon = 1e-12);
        }
        assert_eq!(extract_ground_truth_matings(&pieces, 1e-9).len(), 1);
    }

    /// Quadrilateral with three pairwise crossing cuts, one crossing outside.
    #[test]
    fn quadrilateral_with_three_cuts() {
        let shape = ConvexPolygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 1.0),
            Point2::new(9.0, 8.0),
            Point2::new(1.0, 9.0),
        ])
        .unwrap();
        // two cuts cross inside; the third crosses one of them outside S
        let cuts = vec![
            Line2::through(Point2::new(0.0, 3.0), Point2::new(10.0, 6.0)).unwrap(),
            Line2::through(Point2::new(3.0, 0.0), Point2::new(6.0, 10.0)).unwrap(),
            Line2::through(Point2::new(0.0, 6.5), Point2::new(10.0, 7.5)).unwrap(),
        ];
        let cs = CutSet { shape, cuts };
        let g = build_planar_graph(&cs).unwrap();
        // 4 corners + 6 cut ends + inner crossings
        let inner = g.n_intersections();
        assert_eq!(g.nodes.len(), 4 + 6 + inner);
        assert_eq!(inner, 2);
        assert_eq!(g.nodes.len(), 12);
        let pieces = extract_pieces(&g).unwrap();
        assert_eq!(pieces.len(), inner + 3 + 1);
    }

    #[test]
    fn concurrent_cuts_rejected() {
        let shape = regular_polygon(32, 1.0);
        // two diameters meeting at the centre with a third through the same point
        let cuts = vec![
            Line2::new(0.0, 1.0, 0.0).unwrap(),
            Line2::new(1.0, 0.0, 0.0).unwrap(),
            Line2::new(1.0, 1.0, 0.0).unwrap(),
        ];
        let err = build_planar_graph(&CutSet { shape, cuts }).unwrap_err();
        assert!(matches!(err, GenError::NonGeneric { .. }), "{err:?}");
    }

    #[test]
    fn two_crossing_chords_make_four_pieces() {
        let shape = regular_polygon(32, 1.0);
        let cuts = vec![
            Line2::new(0.1, 1.0, -0.05).unwrap(),
            Line2::new(1.0, -0.2, 0.03).unwrap(),
        ];
        let g = build_planar_graph(&CutSet { shape, cuts }).unwrap();
        assert_eq!(extract_pieces(&g).unwrap().len(), 4);
    }

    #[test]
    fn circle_generation_identities() {
        for seed in 0..20 {
            for &a in &[0usize, 1, 5, 12] {
                let gen = gen_circle_puzzle(a, 0.0, seed).unwrap();
                let n = gen.bundle.pieces.len();
                assert_eq!(n, gen.info.n_intersections + a + 1);
                assert_eq!(gen.info.n_cut_edges, a + 2 * gen.info.n_intersections);
                let gt = gen.bundle.ground_truth.as_ref().unwrap();
                assert_eq!(gt.matings.len(), gen.info.n_cut_edges);
                let area: f64 = gen.solved.iter().map(|p| p.area()).sum();
                let shape = regular_polygon(32, 1.0);
                assert!((area - shape.area()).abs() < 1e-6 * shape.area());
            }
        }
    }

    #[test]
    fn zero_cuts_give_one_piece() {
        let gen = gen_circle_puzzle(0, 0.0, 3).unwrap();
        assert_eq!(gen.bundle.pieces.len(), 1);
        assert!(gen.bundle.ground_truth.unwrap().matings.is_empty());
    }

    #[test]
    fn ground_truth_satisfies_exact_constraints() {
        for seed in 0..10 {
            let gen = gen_polygon_puzzle(8, 0.0, seed).unwrap();
            let pieces: Vec<_> = gen.bundle.pieces.iter().map(|p| p.polygon.clone()).collect();
            let tol = Tolerance::for_diameter(gen.info.diameter);
            for m in &gen.bundle.ground_truth.as_ref().unwrap().matings {
                let e = EdgeGeom::of(&pieces[m.a().piece], m.a().edge);
                let f = EdgeGeom::of(&pieces[m.b().piece], m.b().edge);
                assert!(c1(&e, &f, &tol), "C1 failed on {m}");
                assert!(c2(&e, &f, &tol), "C2 failed on {m}");
            }
        }
    }

    #[test]
    fn canonical_frames_roundtrip() {
        let gen = gen_polygon_puzzle(6, 0.0, 42).unwrap();
        let gt = gen.bundle.ground_truth.as_ref().unwrap();
        let tol = TAU_REL * gen.info.diameter * 10.0;
        for piece in &gen.bundle.pieces {
            let mean = piece.polygon.vertex_mean();
            assert!(mean.norm() < tol);
            let placed = piece.polygon.transformed(&gt.poses[&piece.id]);
            let solved = &gen.solved[piece.id];
            for (p, q) in placed.vertices().iter().zip(solved.vertices()) {
                assert!(p.dist(*q) < tol, "{p} vs {q}");
            }
        }
        let other = gen_polygon_puzzle(6, 0.0, 43).unwrap();
        assert_ne!(other.bundle.pieces[0].polygon, gen.bundle.pieces[0].polygon);
    }

    #[test]
    fn different_seeds_rotate_identical_shapes_differently() {
        let gen = gen_polygon_puzzle(4, 0.0, 5).unwrap();
        let mut rng = rng_from_seed(99);
        let (local, poses) = canonicalize(&gen.solved, &mut rng);
        let gt = gen.bundle.ground_truth.as_ref().unwrap();
        for (i, p) in local.iter().enumerate() {
            assert_ne!(poses[i].angle, gt.poses[&i].angle);
            assert_abs_diff_eq!(p.area(), gen.bundle.pieces[i].polygon.area(), epsilon = 1e-9);
        }
    }

    #[test]
    fn noise_zero_is_identity_and_bounds_hold() {
        let mut rng = rng_from_seed(1);
        let sq = ConvexPolygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 10.0),
            Point2::new(10.0, 10.0),
            Point2::new(10.0, 0.0),
        ])
        .unwrap();
        assert_eq!(apply_noise(&sq, 0.0, &mut rng).unwrap(), sq);
        let eps = 0.5;
        for _ in 0..2_500 {
            let noisy = apply_noise(&sq, eps, &mut rng).unwrap();
            assert_eq!(noisy.len(), 4);
            for (v, w) in sq.vertices().iter().zip(noisy.vertices()) {
                assert!(v.dist(*w) <= eps);
                assert!(sq.contains(*w, 1e-9));
            }
            for j in 0..4 {
                let l = sq.edge_length(j);
                let lt = noisy.edge_length(j);
                assert!(lt >= l - 2.0 * eps && lt <= l + 2.0 * eps);
            }
        }
    }

    #[test]
    fn polygon_generation_reasonable() {
        let gen = gen_polygon_puzzle(5, 0.01, 17).unwrap();
        let n = gen.bundle.pieces.len();
        assert!((6..=16).contains(&n), "{n} pieces");
        assert_eq!(n, gen.info.n_intersections + 5 + 1);
        assert_abs_diff_eq!(gen.bundle.noise.epsilon, 0.01 * gen.info.diameter);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_polygon_puzzle(7, 0.005, 123).unwrap();
        let b = gen_polygon_puzzle(7, 0.005, 123).unwrap();
        assert_eq!(a.bundle, b.bundle);
    }

    #[test]
    fn derived_seeds_differ() {
        let s: std::collections::BTreeSet<u64> = (0..1000).map(|i| derive_seed(5, i)).collect();
        assert_eq!(s.len(), 1000);
    }
}
