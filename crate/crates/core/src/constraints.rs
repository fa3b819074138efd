//! Mating predicates for clean and eroded pieces, and enumeration of the
//! candidate mating set.
//!
//! Two mates always run antiparallel: edge `j` of piece A goes from vertex
//! `j` to `j + 1`, and its mate on piece B is traversed the other way, so
//! A's start vertex meets B's end vertex ("joint 1") and A's end vertex
//! meets B's start vertex ("joint 2").

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::MatingError;
use crate::geometry::{ConvexPolygon, TAU_REL};

/// Default angular tolerance (radians) for exact supplementary-angle tests.
pub const TAU_ANG: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeRef {
    pub piece: usize,
    pub edge: usize,
}

impl EdgeRef {
    pub const fn new(piece: usize, edge: usize) -> Self {
        EdgeRef { piece, edge }
    }
}

impl fmt::Display for EdgeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e[{}:{}]", self.piece, self.edge)
    }
}

/// Unordered edge pair, stored with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "[EdgeRef; 2]", into = "[EdgeRef; 2]")]
pub struct Mating {
    a: EdgeRef,
    b: EdgeRef,
}

impl Mating {
    pub fn new(x: EdgeRef, y: EdgeRef) -> Result<Self, MatingError> {
        if x.piece == y.piece {
            return Err(MatingError::SamePiece(x.piece));
        }
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        Ok(Mating { a, b })
    }

    #[inline]
    pub fn a(&self) -> EdgeRef {
        self.a
    }

    #[inline]
    pub fn b(&self) -> EdgeRef {
        self.b
    }

    #[inline]
    pub fn edges(&self) -> [EdgeRef; 2] {
        [self.a, self.b]
    }

    #[inline]
    pub fn contains(&self, e: EdgeRef) -> bool {
        self.a == e || self.b == e
    }

    /// The edge paired with `e`, if `e` belongs to this mating.
    pub fn other(&self, e: EdgeRef) -> Option<EdgeRef> {
        if self.a == e {
            Some(self.b)
        } else if self.b == e {
            Some(self.a)
        } else {
            None
        }
    }

    pub fn pieces(&self) -> [usize; 2] {
        [self.a.piece, self.b.piece]
    }
}

impl TryFrom<[EdgeRef; 2]> for Mating {
    type Error = MatingError;
    fn try_from(v: [EdgeRef; 2]) -> Result<Self, Self::Error> {
        Mating::new(v[0], v[1])
    }
}

impl From<Mating> for [EdgeRef; 2] {
    fn from(m: Mating) -> Self {
        [m.a, m.b]
    }
}

impl fmt::Display for Mating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}, {}}}", self.a, self.b)
    }
}

/// Checks that no edge appears in two matings and that all refs are valid.
pub fn check_unique_edges<'a>(
    matings: impl IntoIterator<Item = &'a Mating>,
    pieces: Option<&[ConvexPolygon]>,
) -> Result<(), MatingError> {
    let mut seen = BTreeSet::new();
    for m in matings {
        for e in m.edges() {
            if let Some(ps) = pieces {
                if ps.get(e.piece).is_none_or(|p| e.edge >= p.len()) {
                    return Err(MatingError::BadEdge(e));
                }
            }
            if !seen.insert(e) {
                return Err(MatingError::SharedEdge(e));
            }
        }
    }
    Ok(())
}

/// Lengths and endpoint angles of one piece edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeGeom {
    pub length: f64,
    pub prev_length: f64,
    pub next_length: f64,
    /// Interior angle at the edge's start vertex.
    pub angle_start: f64,
    /// Interior angle at the edge's end vertex.
    pub angle_end: f64,
}

impl EdgeGeom {
    pub fn of(poly: &ConvexPolygon, j: usize) -> Self {
        let n = poly.len();
        EdgeGeom {
            length: poly.edge_length(j),
            prev_length: poly.edge_length((j + n - 1) % n),
            next_length: poly.edge_length((j + 1) % n),
            angle_start: poly.interior_angle(j),
            angle_end: poly.interior_angle((j + 1) % n),
        }
    }

    pub fn all(pieces: &[ConvexPolygon]) -> Vec<Vec<EdgeGeom>> {
        pieces
            .iter()
            .map(|p| (0..p.len()).map(|j| EdgeGeom::of(p, j)).collect())
            .collect()
    }
}

/// Absolute tolerances for the exact predicates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub length: f64,
    pub angle: f64,
}

impl Tolerance {
    pub fn for_diameter(d: f64) -> Self {
        Tolerance {
            length: TAU_REL * d,
            angle: TAU_ANG,
        }
    }
}

pub fn c1(e: &EdgeGeom, f: &EdgeGeom, tol: &Tolerance) -> bool {
    (e.length - f.length).abs() <= tol.length
}

pub fn c2(e: &EdgeGeom, f: &EdgeGeom, tol: &Tolerance) -> bool {
    let (d1, d2) = joint_defects(e, f);
    d1 <= tol.angle && d2 <= tol.angle
}

/// `|π - α - β|` at both joints of the antiparallel pairing of `e` and `f`.
fn joint_defects(e: &EdgeGeom, f: &EdgeGeom) -> (f64, f64) {
    let d1 = (PI - e.angle_start - f.angle_end).abs();
    let d2 = (PI - e.angle_end - f.angle_start).abs();
    (d1, d2)
}

/// Worst-case rotation of an edge of clean length `len` whose endpoints are
/// each moved inward by at most `eps`. Infinite when `len <= 2*eps`.
pub fn delta_theta(len: f64, eps: f64) -> f64 {
    if eps == 0.0 {
        return if len > 0.0 { 0.0 } else { f64::INFINITY };
    }
    if len <= 2.0 * eps {
        return f64::INFINITY;
    }
    (eps / (len - eps)).asin()
}

/// [`delta_theta`] evaluated at the smallest clean length compatible with a
/// measured length `len_measured`, i.e. `len_measured - 2*eps`.
pub fn delta_theta_measured(len_measured: f64, eps: f64) -> f64 {
    delta_theta(len_measured - 2.0 * eps, eps)
}

pub fn c1_noisy(len_e: f64, len_f: f64, eps: f64, tol: &Tolerance) -> bool {
    (len_e - len_f).abs() <= 4.0 * eps + tol.length
}

/// Right-hand sides of the two joint inequalities.
pub fn angle_bounds(e: &EdgeGeom, f: &EdgeGeom, eps: f64) -> (f64, f64) {
    let de = delta_theta_measured(e.length, eps);
    let df = delta_theta_measured(f.length, eps);
    // joint 1 joins e's start (prev edge) with f's end (next edge)
    let b1 = de + delta_theta_measured(e.prev_length, eps) + df + delta_theta_measured(f.next_length, eps);
    let b2 = de + delta_theta_measured(e.next_length, eps) + df + delta_theta_measured(f.prev_length, eps);
    (b1, b2)
}

pub fn c2_noisy(e: &EdgeGeom, f: &EdgeGeom, eps: f64, tol: &Tolerance) -> bool {
    let (d1, d2) = joint_defects(e, f);
    let (b1, b2) = angle_bounds(e, f, eps);
    // an infinite bound makes its inequality hold trivially
    d1 <= b1 + tol.angle && d2 <= b2 + tol.angle
}

/// Both noisy predicates.
pub fn plausible(e: &EdgeGeom, f: &EdgeGeom, eps: f64, tol: &Tolerance) -> bool {
    c1_noisy(e.length, f.length, eps, tol) && c2_noisy(e, f, eps, tol)
}

/// All cross-piece edge pairs passing both noisy predicates, sorted.
pub fn candidate_matings(pieces: &[ConvexPolygon], eps: f64, tol: &Tolerance) -> Vec<Mating> {
    let geoms = EdgeGeom::all(pieces);
    let mut edges: Vec<(f64, EdgeRef)> = geoms
        .iter()
        .enumerate()
        .flat_map(|(p, gs)| gs.iter().enumerate().map(move |(j, g)| (g.length, EdgeRef::new(p, j))))
        .collect();
    edges.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let window = 4.0 * eps + tol.length;
    let mut out: Vec<Mating> = (0..edges.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let (li, ei) = edges[i];
            let gi = &geoms[ei.piece][ei.edge];
            let geoms = &geoms;
            edges[i + 1..]
                .iter()
                .take_while(move |(lj, _)| lj - li <= window)
                .filter(move |(_, ej)| ej.piece != ei.piece && plausible(gi, &geoms[ej.piece][ej.edge], eps, tol))
                .map(move |&(_, ej)| Mating::new(ei, ej).expect("distinct pieces"))
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn geom(len: f64, a_start: f64, a_end: f64) -> EdgeGeom {
        EdgeGeom {
            length: len,
            prev_length: 10.0,
            next_length: 10.0,
            angle_start: a_start,
            angle_end: a_end,
        }
    }

    const TOL: Tolerance = Tolerance {
        length: 1e-9,
        angle: TAU_ANG,
    };

    #[test]
    fn mating_is_canonical_and_rejects_same_piece() {
        let m = Mating::new(EdgeRef::new(3, 1), EdgeRef::new(1, 2)).unwrap();
        assert_eq!(m.a(), EdgeRef::new(1, 2));
        assert_eq!(m, Mating::new(EdgeRef::new(1, 2), EdgeRef::new(3, 1)).unwrap());
        assert!(matches!(
            Mating::new(EdgeRef::new(2, 0), EdgeRef::new(2, 1)),
            Err(MatingError::SamePiece(2))
        ));
    }

    #[test]
    fn exact_length_constraint() {
        let h = PI / 2.0;
        assert!(c1(&geom(2.0, h, h), &geom(2.0, h, h), &TOL));
        assert!(!c1(&geom(2.0, h, h), &geom(2.1, h, h), &TOL));
    }

    #[test]
    fn exact_angle_constraint() {
        let h = PI / 2.0;
        assert!(c2(&geom(1.0, h, h), &geom(1.0, h, h), &TOL));
        assert!(!c2(&geom(1.0, 1.0, h), &geom(1.0, h, 2.0), &TOL));
        // joint 1 pairs e.start with f.end
        assert!(c2(&geom(1.0, 1.0, 2.5), &geom(1.0, PI - 2.5, PI - 1.0), &TOL));
        assert!(!c2(&geom(1.0, 1.0, 2.5), &geom(1.0, PI - 1.0, PI - 2.5), &TOL));
    }

    #[test]
    fn delta_theta_values() {
        assert_eq!(delta_theta(3.0, 0.0), 0.0);
        assert_abs_diff_eq!(delta_theta(0.3, 0.1), PI / 6.0, epsilon = 1e-12);
        assert!(delta_theta(0.2, 0.1).is_infinite());
        assert_eq!(delta_theta_measured(0.5, 0.0), 0.0);
        assert_abs_diff_eq!(delta_theta_measured(0.7, 0.1), 0.25f64.asin(), epsilon = 1e-12);
        assert_abs_diff_eq!(delta_theta_measured(0.7, 0.1), 0.25268, epsilon = 1e-5);
        assert!(delta_theta_measured(0.4, 0.1).is_infinite());
    }

    #[test]
    fn noisy_length_constraint() {
        assert!(c1_noisy(1.0, 1.39, 0.1, &TOL));
        assert!(!c1_noisy(1.0, 1.5, 0.1, &TOL));
    }

    #[test]
    fn noisy_angle_constraint() {
        let h = PI / 2.0;
        // eps = 0 reduces to the exact predicate
        assert!(c2_noisy(&geom(1.0, h, h), &geom(1.0, h, h), 0.0, &TOL));
        assert!(!c2_noisy(&geom(1.0, 1.0, h), &geom(1.0, h, 2.0), 0.0, &TOL));
        // grossly non-supplementary with long edges and small eps
        let q = PI / 4.0;
        assert!(!c2_noisy(&geom(10.0, q, q), &geom(10.0, q, q), 0.01, &TOL));
        // short edges make the bound vacuous
        let mut short = geom(0.03, q, q);
        short.prev_length = 0.03;
        short.next_length = 0.03;
        assert!(c2_noisy(&short, &short, 0.01, &TOL));
    }

    proptest! {
        #[test]
        fn delta_theta_monotone(l in 0.01..100.0f64, e in 0.0..1.0f64, de in 0.0..0.5f64, dl in 0.0..5.0f64) {
            let base = delta_theta(l, e);
            prop_assume!(base.is_finite());
            prop_assert!(delta_theta(l, e + de) >= base);
            prop_assert!(delta_theta(l + dl, e) <= base);
        }

        #[test]
        fn noisy_predicates_symmetric(
            l1 in 0.1..10.0f64, l2 in 0.1..10.0f64,
            a in 0.1..3.0f64, b in 0.1..3.0f64, c in 0.1..3.0f64, d in 0.1..3.0f64,
            eps in 0.0..0.2f64,
        ) {
            let e = EdgeGeom { length: l1, prev_length: l2, next_length: l1 + l2, angle_start: a, angle_end: b };
            let f = EdgeGeom { length: l2, prev_length: l1, next_length: 2.0 * l2, angle_start: c, angle_end: d };
            prop_assert_eq!(plausible(&e, &f, eps, &TOL), plausible(&f, &e, eps, &TOL));
        }
    }
}
