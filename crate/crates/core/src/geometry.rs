//! Planar primitives shared by every other module.
//!
//! Orientation convention: y points up and every [`ConvexPolygon`] stores its
//! vertices clockwise, so its signed (shoelace) area is negative. All
//! constructors normalize to that order.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Cross-product magnitude below which two lines are treated as parallel.
pub const TAU_PAR: f64 = 1e-12;
/// Relative tolerance used for areas (times a bounding-box area) and
/// lengths (times a diameter).
pub const TAU_REL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    #[inline]
    pub fn from_polar(r: f64, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Point2::new(r * c, r * s)
    }

    #[inline]
    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z component of the 3D cross product.
    #[inline]
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    #[inline]
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Counterclockwise rotation by `angle` radians about the origin.
    #[inline]
    pub fn rotate(self, angle: f64) -> Point2 {
        let (s, c) = angle.sin_cos();
        self.rotate_sc(s, c)
    }

    #[inline]
    pub fn rotate_sc(self, s: f64, c: f64) -> Point2 {
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// The vector rotated by +90 degrees.
    #[inline]
    pub fn perp(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    #[inline]
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point2 {
    #[inline]
    fn add_assign(&mut self, o: Point2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point2 {
    type Output = Point2;
    #[inline]
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Point2 {
    #[inline]
    fn sub_assign(&mut self, o: Point2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    #[inline]
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    #[inline]
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Line `a1*x + a2*y + a3 = 0` with unit normal `(a1, a2)` whose first
/// nonzero component is positive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line2 {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl Line2 {
    pub fn new(a1: f64, a2: f64, a3: f64) -> Result<Self, GeometryError> {
        let n = a1.hypot(a2);
        if !(n > 0.0) || !a3.is_finite() || !n.is_finite() {
            return Err(GeometryError::DegenerateLine);
        }
        let (mut a1, mut a2, mut a3) = (a1 / n, a2 / n, a3 / n);
        if a1 < 0.0 || (a1 == 0.0 && a2 < 0.0) {
            a1 = -a1;
            a2 = -a2;
            a3 = -a3;
        }
        // avoid negative zero so equal lines compare and serialize identically
        Ok(Line2 {
            a1: a1 + 0.0,
            a2: a2 + 0.0,
            a3: a3 + 0.0,
        })
    }

    pub fn through(p: Point2, q: Point2) -> Result<Self, GeometryError> {
        let d = q - p;
        Line2::new(d.y, -d.x, d.x * p.y - d.y * p.x)
    }

    /// Signed distance of `p` from the line.
    #[inline]
    pub fn eval(&self, p: Point2) -> f64 {
        self.a1 * p.x + self.a2 * p.y + self.a3
    }

    #[inline]
    pub fn normal(&self) -> Point2 {
        Point2::new(self.a1, self.a2)
    }

    /// Unit direction vector (normal rotated by -90 degrees).
    #[inline]
    pub fn direction(&self) -> Point2 {
        Point2::new(self.a2, -self.a1)
    }

    /// The point of the line closest to the origin.
    #[inline]
    pub fn anchor(&self) -> Point2 {
        self.normal() * (-self.a3)
    }

    /// Coordinate of `p`'s projection along [`Line2::direction`].
    #[inline]
    pub fn param(&self, p: Point2) -> f64 {
        p.dot(self.direction())
    }
}

/// Intersection of two lines, or `None` when they are (nearly) parallel.
pub fn intersect_lines(l1: &Line2, l2: &Line2) -> Option<Point2> {
    let det = l1.a1 * l2.a2 - l1.a2 * l2.a1;
    if det.abs() <= TAU_PAR {
        return None;
    }
    let x = (l1.a2 * l2.a3 - l2.a2 * l1.a3) / det;
    let y = (l2.a1 * l1.a3 - l1.a1 * l2.a3) / det;
    Some(Point2::new(x, y))
}

/// Rigid motion `p -> R(angle) * p + t`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub angle: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        angle: 0.0,
        tx: 0.0,
        ty: 0.0,
    };

    pub fn new(angle: f64, t: Point2) -> Self {
        Pose {
            angle: wrap_angle(angle),
            tx: t.x,
            ty: t.y,
        }
    }

    #[inline]
    pub fn translation(&self) -> Point2 {
        Point2::new(self.tx, self.ty)
    }

    #[inline]
    pub fn apply(&self, p: Point2) -> Point2 {
        p.rotate(self.angle) + self.translation()
    }

    pub fn apply_all(&self, pts: &[Point2]) -> Vec<Point2> {
        let (s, c) = self.angle.sin_cos();
        let t = self.translation();
        pts.iter().map(|p| p.rotate_sc(s, c) + t).collect()
    }

    /// `self ∘ other`: first apply `other`, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        let t = other.translation().rotate(self.angle) + self.translation();
        Pose::new(self.angle + other.angle, t)
    }

    pub fn inverse(&self) -> Pose {
        let t = (-self.translation()).rotate(-self.angle);
        Pose::new(-self.angle, t)
    }

    /// Rotation matrix rows `[[c, -s], [s, c]]`.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.angle.sin_cos();
        [[c, -s], [s, c]]
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    if !a.is_finite() {
        return a;
    }
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Axis-aligned bounding box `(min, max)` of a point set.
pub fn bounding_box(pts: &[Point2]) -> (Point2, Point2) {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

/// Shoelace signed area, positive for counterclockwise rings.
pub fn signed_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    // shift to the first vertex to reduce cancellation far from the origin
    let o = pts[0];
    let mut acc = 0.0;
    for i in 1..n - 1 {
        acc += (pts[i] - o).cross(pts[i + 1] - o);
    }
    0.5 * acc
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point2>", into = "Vec<Point2>")]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
}

impl TryFrom<Vec<Point2>> for ConvexPolygon {
    type Error = GeometryError;
    fn try_from(v: Vec<Point2>) -> Result<Self, Self::Error> {
        ConvexPolygon::from_clockwise(v)
    }
}

impl From<ConvexPolygon> for Vec<Point2> {
    fn from(p: ConvexPolygon) -> Self {
        p.vertices
    }
}

impl ConvexPolygon {
    /// Validates and normalizes a vertex ring to clockwise order.
    ///
    /// Rejects rings with fewer than 3 vertices, non-finite coordinates,
    /// area below `TAU_REL` times the bounding-box area, or a reflex turn
    /// beyond `TAU_REL` times the ring diameter.
    pub fn new(mut vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let (lo, hi) = bounding_box(&vertices);
        let bbox_area = (hi.x - lo.x) * (hi.y - lo.y);
        let area = signed_area(&vertices);
        if !(area.abs() > TAU_REL * bbox_area) || area == 0.0 {
            return Err(GeometryError::Degenerate { area: area.abs() });
        }
        if area > 0.0 {
            vertices.reverse();
        }
        let scale = (hi - lo).norm();
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            let e1 = b - a;
            let e2 = c - b;
            let len = e1.norm().max(e2.norm());
            if len <= 0.0 {
                return Err(GeometryError::DuplicateVertex((i + 1) % n));
            }
            // clockwise rings turn right: cross <= 0; allow TAU_REL*scale of slack
            if e1.cross(e2) / len > TAU_REL * scale {
                return Err(GeometryError::NotConvex((i + 1) % n));
            }
        }
        Ok(ConvexPolygon { vertices })
    }

    /// Like [`ConvexPolygon::new`] but rejects counterclockwise input instead
    /// of reversing it.
    pub fn from_clockwise(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        if vertices.len() >= 3 && signed_area(&vertices) > 0.0 {
            return Err(GeometryError::CounterClockwise);
        }
        ConvexPolygon::new(vertices)
    }

    /// Builds a polygon from the output of clipping, dropping near-duplicate
    /// and collinear vertices first. Returns `None` if nothing with positive
    /// area remains.
    fn from_clipped(pts: Vec<Point2>, scale: f64) -> Option<Self> {
        let tol = TAU_REL * scale.max(f64::MIN_POSITIVE);
        let mut ring: Vec<Point2> = Vec::with_capacity(pts.len());
        for p in pts {
            if ring.last().is_none_or(|q| q.dist(p) > tol) {
                ring.push(p);
            }
        }
        while ring.len() > 1 && ring[0].dist(*ring.last().unwrap()) <= tol {
            ring.pop();
        }
        // remove collinear vertices
        let mut changed = true;
        while changed && ring.len() >= 3 {
            changed = false;
            let n = ring.len();
            for i in 0..n {
                let a = ring[(i + n - 1) % n];
                let b = ring[i];
                let c = ring[(i + 1) % n];
                let base = c - a;
                let bl = base.norm();
                if bl <= tol || (b - a).cross(base).abs() / bl <= tol {
                    ring.remove(i);
                    changed = true;
                    break;
                }
            }
        }
        if ring.len() < 3 {
            return None;
        }
        ConvexPolygon::new(ring).ok()
    }

    #[inline]
    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    /// Always false: a valid polygon has at least three vertices.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    #[inline]
    pub fn vertex(&self, i: usize) -> Point2 {
        self.vertices[i % self.vertices.len()]
    }

    /// Edge `j` runs from vertex `j` to vertex `j + 1` (cyclically).
    #[inline]
    pub fn edge(&self, j: usize) -> (Point2, Point2) {
        let n = self.vertices.len();
        (self.vertices[j % n], self.vertices[(j + 1) % n])
    }

    #[inline]
    pub fn edge_length(&self, j: usize) -> f64 {
        let (a, b) = self.edge(j);
        a.dist(b)
    }

    /// Interior angle at vertex `i`, in `(0, π)`.
    pub fn interior_angle(&self, i: usize) -> f64 {
        let n = self.vertices.len();
        let v = self.vertices[i % n];
        let prev = self.vertices[(i + n - 1) % n] - v;
        let next = self.vertices[(i + 1) % n] - v;
        // angle from `next` clockwise to `prev` is the interior angle for cw rings
        next.cross(prev).abs().atan2(next.dot(prev))
    }

    pub fn area(&self) -> f64 {
        -signed_area(&self.vertices)
    }

    /// Mean of the vertices.
    pub fn vertex_mean(&self) -> Point2 {
        let n = self.vertices.len() as f64;
        let s = self.vertices.iter().fold(Point2::ORIGIN, |acc, &p| acc + p);
        s * (1.0 / n)
    }

    /// Area centroid.
    pub fn centroid(&self) -> Point2 {
        let o = self.vertices[0];
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut a2 = 0.0;
        for i in 1..self.vertices.len() - 1 {
            let p = self.vertices[i] - o;
            let q = self.vertices[i + 1] - o;
            let w = p.cross(q);
            a2 += w;
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        o + Point2::new(cx / (3.0 * a2), cy / (3.0 * a2))
    }

    /// Polar second moment of area about `c`.
    pub fn polar_moment(&self, c: Point2) -> f64 {
        let n = self.vertices.len();
        let mut acc = 0.0;
        for i in 0..n {
            let p = self.vertices[i] - c;
            let q = self.vertices[(i + 1) % n] - c;
            let w = p.cross(q);
            acc += w * (p.dot(p) + p.dot(q) + q.dot(q));
        }
        (acc / 12.0).abs()
    }

    pub fn diameter(&self) -> f64 {
        diameter(&self.vertices)
    }

    /// Largest distance from `c` to a vertex.
    pub fn radius_about(&self, c: Point2) -> f64 {
        self.vertices.iter().map(|p| p.dist(c)).fold(0.0, f64::max)
    }

    pub fn bounding_box(&self) -> (Point2, Point2) {
        bounding_box(&self.vertices)
    }

    /// True if `p` lies inside or within `tol` of the boundary.
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let e = b - a;
            // interior is to the right of a clockwise edge
            e.cross(p - a) / e.norm() <= tol
        })
    }

    pub fn transformed(&self, pose: &Pose) -> ConvexPolygon {
        ConvexPolygon {
            vertices: pose.apply_all(&self.vertices),
        }
    }

    pub fn translated(&self, d: Point2) -> ConvexPolygon {
        ConvexPolygon {
            vertices: self.vertices.iter().map(|&p| p + d).collect(),
        }
    }

    /// Same ring with vertex `start` moved to index 0.
    pub fn rotated_start(&self, start: usize) -> ConvexPolygon {
        let n = self.vertices.len();
        ConvexPolygon {
            vertices: (0..n).map(|i| self.vertices[(start + i) % n]).collect(),
        }
    }

    /// Splits `self` by `line`, returning the parts with `eval <= 0` and `eval >= 0`.
    fn split(&self, line_p: Point2, line_d: Point2, scale: f64) -> (Option<Self>, Option<Self>) {
        let side = |p: Point2| line_d.cross(p - line_p);
        let n = self.vertices.len();
        let mut left = Vec::with_capacity(n + 2);
        let mut right = Vec::with_capacity(n + 2);
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let sa = side(a);
            let sb = side(b);
            if sa <= 0.0 {
                right.push(a);
            }
            if sa >= 0.0 {
                left.push(a);
            }
            if (sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0) {
                let t = sa / (sa - sb);
                let x = a + (b - a) * t;
                right.push(x);
                left.push(x);
            }
        }
        (
            ConvexPolygon::from_clipped(right, scale),
            ConvexPolygon::from_clipped(left, scale),
        )
    }
}

/// Shoelace area of a valid polygon.
pub fn polygon_area(p: &ConvexPolygon) -> f64 {
    p.area()
}

/// Intersection of two convex polygons by successive half-plane clipping.
pub fn clip_convex(p: &ConvexPolygon, q: &ConvexPolygon) -> Option<ConvexPolygon> {
    // cheap rejection on bounding boxes
    let (plo, phi) = p.bounding_box();
    let (qlo, qhi) = q.bounding_box();
    if plo.x > qhi.x || qlo.x > phi.x || plo.y > qhi.y || qlo.y > phi.y {
        return None;
    }
    let scale = (phi - plo).norm().max((qhi - qlo).norm());
    let mut out: Vec<Point2> = p.vertices.clone();
    let m = q.vertices.len();
    for j in 0..m {
        if out.is_empty() {
            return None;
        }
        let a = q.vertices[j];
        let d = q.vertices[(j + 1) % m] - a;
        let inside = |x: Point2| d.cross(x - a) <= 0.0;
        let input = std::mem::take(&mut out);
        let k = input.len();
        for i in 0..k {
            let cur = input[i];
            let nxt = input[(i + 1) % k];
            let cin = inside(cur);
            let nin = inside(nxt);
            if cin {
                out.push(cur);
            }
            if cin != nin {
                let sc = d.cross(cur - a);
                let sn = d.cross(nxt - a);
                let t = sc / (sc - sn);
                out.push(cur + (nxt - cur) * t);
            }
        }
    }
    ConvexPolygon::from_clipped(out, scale)
}

/// Area of `p ∩ q`, zero when disjoint.
pub fn intersection_area(p: &ConvexPolygon, q: &ConvexPolygon) -> f64 {
    clip_convex(p, q).map_or(0.0, |r| r.area())
}

/// `p \ q` as a list of disjoint convex parts.
pub fn difference_convex(p: &ConvexPolygon, q: &ConvexPolygon) -> Vec<ConvexPolygon> {
    let (plo, phi) = p.bounding_box();
    let (qlo, qhi) = q.bounding_box();
    if plo.x >= qhi.x || qlo.x >= phi.x || plo.y >= qhi.y || qlo.y >= phi.y {
        return vec![p.clone()];
    }
    let scale = (phi - plo).norm().max((qhi - qlo).norm());
    let mut parts = Vec::new();
    let mut rest = Some(p.clone());
    let m = q.vertices.len();
    for j in 0..m {
        let Some(cur) = rest.take() else { break };
        let a = q.vertices[j];
        let d = q.vertices[(j + 1) % m] - a;
        // right side (cross <= 0) is inside q's half-plane
        let (inside, outside) = cur.split(a, d, scale);
        if let Some(o) = outside {
            parts.push(o);
        }
        rest = inside;
    }
    parts
}

/// Area of the union of convex polygons.
pub fn union_area(polys: &[ConvexPolygon]) -> f64 {
    let mut total = 0.0;
    for (k, pk) in polys.iter().enumerate() {
        let mut fragments = vec![pk.clone()];
        for pl in &polys[..k] {
            fragments = fragments.iter().flat_map(|f| difference_convex(f, pl)).collect();
            if fragments.is_empty() {
                break;
            }
        }
        total += fragments.iter().map(|f| f.area()).sum::<f64>();
    }
    total
}

/// Convex hull by monotone chain, returned clockwise.
pub fn convex_hull(points: &[Point2]) -> Result<ConvexPolygon, GeometryError> {
    if points.len() < 3 {
        return Err(GeometryError::TooFewVertices(points.len()));
    }
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return Err(GeometryError::Collinear);
    }
    let (lo, hi) = bounding_box(&pts);
    let tol = TAU_REL * (hi - lo).norm();
    // keeps only strict turns; `tol` absorbs near-collinear noise
    let turn = |o: Point2, a: Point2, b: Point2| {
        let e = b - o;
        (a - o).cross(e) / e.norm().max(f64::MIN_POSITIVE)
    };
    let mut lower: Vec<Point2> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && turn(lower[lower.len() - 2], lower[lower.len() - 1], p) >= -tol {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point2> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && turn(upper[upper.len() - 2], upper[upper.len() - 1], p) >= -tol {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return Err(GeometryError::Collinear);
    }
    // monotone chain yields counterclockwise; ConvexPolygon::new flips it
    ConvexPolygon::new(lower).map_err(|e| match e {
        GeometryError::Degenerate { .. } => GeometryError::Collinear,
        other => other,
    })
}

/// Largest pairwise distance between points; zero for fewer than two.
pub fn diameter(points: &[Point2]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let candidates: Vec<Point2> = if points.len() > 64 {
        convex_hull(points)
            .map(|h| h.vertices)
            .unwrap_or_else(|_| points.to_vec())
    } else {
        points.to_vec()
    };
    let mut best = 0.0f64;
    for i in 0..candidates.len() {
        for j in i + 1..candidates.len() {
            best = best.max(candidates[i].dist(candidates[j]));
        }
    }
    best
}

/// Diameter over all vertices of a set of polygons.
pub fn diameter_of(polys: &[ConvexPolygon]) -> f64 {
    let pts: Vec<Point2> = polys.iter().flat_map(|p| p.vertices.iter().copied()).collect();
    diameter(&pts)
}

/// Regular `n`-gon with circumradius `r` centred at the origin, clockwise.
pub fn regular_polygon(n: usize, r: f64) -> ConvexPolygon {
    let pts: Vec<Point2> = (0..n)
        .map(|i| Point2::from_polar(r, -2.0 * PI * i as f64 / n as f64))
        .collect();
    ConvexPolygon::new(pts).expect("regular polygon is valid")
}

/// Minimum translation separating two overlapping convex polygons.
///
/// Returns `(normal, depth)` with `normal` pointing from `a` towards `b`, or
/// `None` when a separating axis exists.
pub fn sat_penetration(a: &[Point2], b: &[Point2]) -> Option<(Point2, f64)> {
    let mut best_depth = f64::INFINITY;
    let mut best_axis = Point2::ORIGIN;
    for poly in [a, b] {
        let n = poly.len();
        for i in 0..n {
            let e = poly[(i + 1) % n] - poly[i];
            let len = e.norm();
            if len <= 0.0 {
                continue;
            }
            let axis = e.perp() * (1.0 / len);
            let (amin, amax) = project(a, axis);
            let (bmin, bmax) = project(b, axis);
            let overlap = amax.min(bmax) - amin.max(bmin);
            if overlap <= 0.0 {
                return None;
            }
            if overlap < best_depth {
                best_depth = overlap;
                best_axis = axis;
            }
        }
    }
    let ca = a.iter().fold(Point2::ORIGIN, |s, &p| s + p) * (1.0 / a.len() as f64);
    let cb = b.iter().fold(Point2::ORIGIN, |s, &p| s + p) * (1.0 / b.len() as f64);
    if (cb - ca).dot(best_axis) < 0.0 {
        best_axis = -best_axis;
    }
    Some((best_axis, best_depth))
}

fn project(pts: &[Point2], axis: Point2) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in pts {
        let d = p.dot(axis);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square(x0: f64, y0: f64, s: f64) -> ConvexPolygon {
        ConvexPolygon::new(vec![
            Point2::new(x0, y0),
            Point2::new(x0 + s, y0),
            Point2::new(x0 + s, y0 + s),
            Point2::new(x0, y0 + s),
        ])
        .unwrap()
    }

    #[test]
    fn line_intersections() {
        let xaxis = Line2::new(0.0, 1.0, 0.0).unwrap();
        let yaxis = Line2::new(1.0, 0.0, 0.0).unwrap();
        let p = intersect_lines(&xaxis, &yaxis).unwrap();
        assert_abs_diff_eq!(p.x, 0.0);
        assert_abs_diff_eq!(p.y, 0.0);

        let h2 = Line2::new(0.0, 1.0, -1.0).unwrap();
        assert!(intersect_lines(&xaxis, &h2).is_none());

        let d1 = Line2::through(Point2::new(0.0, 0.0), Point2::new(2.0, 2.0)).unwrap();
        let d2 = Line2::through(Point2::new(0.0, 2.0), Point2::new(2.0, 0.0)).unwrap();
        let p = intersect_lines(&d1, &d2).unwrap();
        assert_abs_diff_eq!(p.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn line_canonical_sign() {
        let l = Line2::new(-2.0, 0.0, 4.0).unwrap();
        assert_eq!((l.a1, l.a2, l.a3), (1.0, 0.0, -2.0));
        let l = Line2::new(0.0, -3.0, 3.0).unwrap();
        assert_eq!((l.a1, l.a2, l.a3), (0.0, 1.0, -1.0));
        assert!(Line2::new(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn intersect_matches_parametric_solver() {
        // brute-force oracle: solve p + s*d = q + t*e by Cramer's rule on points
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        for _ in 0..10_000 {
            let p0 = Point2::new(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0));
            let p1 = Point2::new(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0));
            let q0 = Point2::new(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0));
            let q1 = Point2::new(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0));
            let d = p1 - p0;
            let e = q1 - q0;
            let den = d.cross(e);
            if (den / (d.norm() * e.norm())).abs() < 1e-3 {
                continue;
            }
            let s = (q0 - p0).cross(e) / den;
            let oracle = p0 + d * s;
            let l1 = Line2::through(p0, p1).unwrap();
            let l2 = Line2::through(q0, q1).unwrap();
            let got = intersect_lines(&l1, &l2).unwrap();
            // well-conditioned pairs only; the intersection can lie far away
            let tol = 1e-9 * oracle.norm().max(1.0);
            assert!(got.dist(oracle) <= tol, "{got} vs {oracle}");
            checked += 1;
        }
        assert!(checked > 9_000);
    }

    #[test]
    fn areas() {
        assert_abs_diff_eq!(polygon_area(&square(0.0, 0.0, 1.0)), 1.0);
        let tri = ConvexPolygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ])
        .unwrap();
        assert_abs_diff_eq!(tri.area(), 0.5);
        // counterclockwise input got flipped to clockwise
        assert!(signed_area(tri.vertices()) < 0.0);
    }

    #[test]
    fn regular_32gon_area_matches_shoelace_oracle() {
        // oracle: independent shoelace sum over the generated vertices
        let n = 32;
        let pts: Vec<Point2> = (0..n)
            .map(|i| Point2::from_polar(1.0, 2.0 * PI * i as f64 / n as f64))
            .collect();
        let mut s = 0.0;
        for i in 0..n {
            let a = pts[i];
            let b = pts[(i + 1) % n];
            s += a.x * b.y - b.x * a.y;
        }
        let oracle = 0.5 * s;
        assert_abs_diff_eq!(oracle, 3.121_445_152_258_052, epsilon = 1e-12);
        let poly = regular_polygon(32, 1.0);
        assert_abs_diff_eq!(poly.area(), oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(poly.diameter(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_polygons_rejected() {
        let flat = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(2.0, 0.0)];
        assert!(matches!(
            ConvexPolygon::new(flat),
            Err(GeometryError::Degenerate { .. })
        ));
        let reflex = vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(1.0, 0.5),
            Point2::new(2.0, 2.0),
            Point2::new(0.0, 2.0),
        ];
        assert!(matches!(ConvexPolygon::new(reflex), Err(GeometryError::NotConvex(_))));
        assert!(ConvexPolygon::new(vec![Point2::ORIGIN; 2]).is_err());
    }

    #[test]
    fn clipping_examples() {
        let a = square(0.0, 0.0, 1.0);
        let same = clip_convex(&a, &a).unwrap();
        assert_abs_diff_eq!(same.area(), 1.0, epsilon = 1e-12);
        let b = square(0.5, 0.0, 1.0);
        assert_abs_diff_eq!(intersection_area(&a, &b), 0.5, epsilon = 1e-12);
        let far = square(5.0, 5.0, 1.0);
        assert!(clip_convex(&a, &far).is_none());
        // touching squares share only an edge
        let touching = square(1.0, 0.0, 1.0);
        assert_abs_diff_eq!(intersection_area(&a, &touching), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn hull_examples() {
        let pts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
            Point2::new(0.5, 0.5),
        ];
        let h = convex_hull(&pts).unwrap();
        assert_eq!(h.len(), 4);
        assert_abs_diff_eq!(h.area(), 1.0);
        let tri = convex_hull(&pts[..3]).unwrap();
        assert_eq!(tri.len(), 3);
        let line: Vec<Point2> = (0..5).map(|i| Point2::new(i as f64, 2.0 * i as f64)).collect();
        assert!(matches!(convex_hull(&line), Err(GeometryError::Collinear)));
    }

    #[test]
    fn hull_of_random_points_has_few_sides() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut sides = Vec::new();
        for _ in 0..200 {
            let pts: Vec<Point2> = (0..50)
                .map(|_| Point2::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)))
                .collect();
            sides.push(convex_hull(&pts).unwrap().len());
        }
        let mean = sides.iter().sum::<usize>() as f64 / sides.len() as f64;
        assert!((3.0..=14.0).contains(&mean), "mean hull size {mean}");
        assert!(*sides.iter().min().unwrap() >= 3);
    }

    #[test]
    fn diameters() {
        assert_abs_diff_eq!(square(0.0, 0.0, 1.0).diameter(), 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(diameter(&[Point2::new(0.0, 0.0), Point2::new(3.0, 4.0)]), 5.0);
    }

    #[test]
    fn union_area_of_overlapping_squares() {
        let a = square(0.0, 0.0, 2.0);
        let b = square(1.0, 1.0, 2.0);
        let c = square(0.5, 0.5, 0.5);
        // inclusion-exclusion by hand: 4 + 4 - 1, c is inside a
        assert_abs_diff_eq!(union_area(&[a.clone(), b.clone(), c]), 7.0, epsilon = 1e-9);
        let parts = difference_convex(&a, &b);
        let s: f64 = parts.iter().map(|p| p.area()).sum();
        assert_abs_diff_eq!(s, 3.0, epsilon = 1e-9);
    }

    #[test]
    fn pose_roundtrip() {
        let p = Pose::new(0.7, Point2::new(3.0, -2.0));
        let q = Pose::new(-2.1, Point2::new(-1.0, 5.0));
        let x = Point2::new(1.5, 2.5);
        let y = p.compose(&q).apply(x);
        let z = p.apply(q.apply(x));
        assert!(y.dist(z) < 1e-12);
        assert!(p.inverse().apply(p.apply(x)).dist(x) < 1e-12);
    }

    #[test]
    fn sat_detects_overlap_depth() {
        let a = square(0.0, 0.0, 1.0);
        let b = square(0.75, 0.0, 1.0);
        let (n, d) = sat_penetration(a.vertices(), b.vertices()).unwrap();
        assert_abs_diff_eq!(d, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(n.x, 1.0, epsilon = 1e-12);
        assert!(sat_penetration(a.vertices(), square(2.0, 0.0, 1.0).vertices()).is_none());
    }

    fn arb_convex() -> impl Strategy<Value = ConvexPolygon> {
        (
            -50.0..50.0f64,
            -50.0..50.0f64,
            1.0..30.0f64,
            3usize..9,
            0.0..6.3f64,
            prop::collection::vec(0.2..1.0f64, 9),
        )
            .prop_map(|(cx, cy, r, n, phase, radii)| {
                // vertices on a circle (jittered in angle) are always convex
                let pts: Vec<Point2> = (0..n)
                    .map(|i| {
                        let t = phase + 2.0 * PI * (i as f64 + 0.45 * radii[i]) / n as f64;
                        Point2::new(cx, cy) + Point2::from_polar(r, t)
                    })
                    .collect();
                ConvexPolygon::new(pts).unwrap()
            })
    }

    proptest! {
        #[test]
        fn clip_area_symmetric_and_bounded(p in arb_convex(), q in arb_convex()) {
            let a = intersection_area(&p, &q);
            let b = intersection_area(&q, &p);
            let (lo, hi) = p.bounding_box();
            let tol = 1e-9 * ((hi.x - lo.x) * (hi.y - lo.y)).max(1.0);
            prop_assert!((a - b).abs() <= tol);
            prop_assert!(a <= p.area().min(q.area()) + tol);
        }

        #[test]
        fn hull_idempotent(p in arb_convex(), q in arb_convex()) {
            let pts: Vec<Point2> = p.vertices().iter().chain(q.vertices()).copied().collect();
            let h = convex_hull(&pts).unwrap();
            let hh = convex_hull(h.vertices()).unwrap();
            prop_assert_eq!(h.len(), hh.len());
            prop_assert!((h.area() - hh.area()).abs() < 1e-9 * h.area());
        }

        #[test]
        fn union_area_matches_inclusion_exclusion(p in arb_convex(), q in arb_convex()) {
            let u = union_area(&[p.clone(), q.clone()]);
            let ie = p.area() + q.area() - intersection_area(&p, &q);
            prop_assert!((u - ie).abs() <= 1e-7 * ie.max(1.0));
        }
    }
}
