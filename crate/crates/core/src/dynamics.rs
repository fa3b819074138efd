//! Spring-mass relaxation of rigid convex pieces.
//!
//! Mated edges are tied by zero-length springs between their antiparallel
//! endpoints. Bodies are integrated with semi-implicit Euler and a constant
//! per-step velocity decay. Collision handling projects overlapping pairs
//! apart along the separating-axis minimum translation.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::{check_unique_edges, Mating};
use crate::error::DynamicsError;
use crate::geometry::{sat_penetration, wrap_angle, ConvexPolygon, Point2, Pose};

/// A zero-rest-length spring between vertex `a.1` of piece `a.0` and vertex
/// `b.1` of piece `b.0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Spring {
    pub a: (usize, usize),
    pub b: (usize, usize),
}

/// Two springs per mating, joining `e` start to `f` end and `e` end to `f` start.
pub fn springs_from_matings(pieces: &[ConvexPolygon], matings: &[Mating]) -> Result<Vec<Spring>, DynamicsError> {
    check_unique_edges(matings, Some(pieces))?;
    let mut out = Vec::with_capacity(2 * matings.len());
    for m in matings {
        let (e, f) = (m.a(), m.b());
        let ne = pieces[e.piece].len();
        let nf = pieces[f.piece].len();
        out.push(Spring {
            a: (e.piece, e.edge),
            b: (f.piece, (f.edge + 1) % nf),
        });
        out.push(Spring {
            a: (e.piece, (e.edge + 1) % ne),
            b: (f.piece, f.edge),
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Body {
    pub piece: usize,
    /// Vertices relative to the centre of mass.
    pub local: Vec<Point2>,
    /// Centre of mass in the piece's own frame.
    pub com_local: Point2,
    pub mass: f64,
    pub inertia: f64,
    pub pos: Point2,
    pub angle: f64,
    pub vel: Point2,
    pub omega: f64,
    pub radius: f64,
}

impl Body {
    pub fn pose(&self) -> Pose {
        let r = self.com_local.rotate(self.angle);
        Pose::new(self.angle, self.pos - r)
    }

    pub fn set_pose(&mut self, p: &Pose) {
        self.angle = p.angle;
        self.pos = p.apply(self.com_local);
    }

    #[inline]
    pub fn world_vertex(&self, i: usize) -> Point2 {
        self.pos + self.local[i].rotate(self.angle)
    }

    pub fn world_vertices(&self) -> Vec<Point2> {
        let (s, c) = self.angle.sin_cos();
        self.local.iter().map(|&p| self.pos + p.rotate_sc(s, c)).collect()
    }
}

/// Bodies with uniform density, scaled so the mean body mass is 1.
pub fn make_bodies(pieces: &[ConvexPolygon], poses: &[Pose]) -> Vec<Body> {
    let total: f64 = pieces.iter().map(|p| p.area()).sum();
    let density = pieces.len() as f64 / total;
    pieces
        .iter()
        .zip(poses)
        .enumerate()
        .map(|(i, (p, pose))| {
            let c = p.centroid();
            let local: Vec<Point2> = p.vertices().iter().map(|&v| v - c).collect();
            let radius = p.radius_about(c);
            let mut b = Body {
                piece: i,
                local,
                com_local: c,
                mass: density * p.area(),
                inertia: density * p.polar_moment(c),
                pos: Point2::ORIGIN,
                angle: 0.0,
                vel: Point2::ORIGIN,
                omega: 0.0,
                radius,
            };
            b.set_pose(pose);
            b
        })
        .collect()
}

pub fn potential_energy(bodies: &[Body], springs: &[Spring], k: f64) -> f64 {
    springs
        .iter()
        .map(|s| {
            let d = bodies[s.a.0].world_vertex(s.a.1) - bodies[s.b.0].world_vertex(s.b.1);
            0.5 * k * d.norm_sq()
        })
        .sum()
}

/// Sum of squared spring lengths.
pub fn spring_length_sq(bodies: &[Body], springs: &[Spring]) -> f64 {
    2.0 * potential_energy(bodies, springs, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CollisionMode {
    Off,
    On,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxConfig {
    pub dt: f64,
    pub damping: f64,
    pub k: f64,
    pub max_steps: usize,
    pub energy_tol: f64,
    pub window: usize,
    pub collisions: CollisionMode,
    /// Penetration depth tolerated without correction.
    pub contact_slop: f64,
    /// Radius of the disk from which initial positions are drawn.
    pub arena_radius: f64,
}

impl RelaxConfig {
    pub fn for_diameter(d: f64) -> Self {
        let k = 1.0;
        RelaxConfig {
            dt: 1.0 / 120.0,
            damping: 0.98,
            k,
            max_steps: 200_000,
            energy_tol: 1e-9 * k * d * d,
            window: 500,
            collisions: CollisionMode::Off,
            contact_slop: 1e-6 * d,
            arena_radius: 2.0 * d,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: &str| Err(DynamicsError::Config(m.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return bad("damping must lie in (0, 1)");
        }
        if !(self.energy_tol > 0.0) {
            return bad("energy_tol must be positive");
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return bad("k must be positive");
        }
        if self.window == 0 {
            return bad("window must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelaxOutcome {
    pub poses: Vec<Pose>,
    pub energy: f64,
    pub converged: bool,
    pub steps: usize,
}

/// One trace sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRecord<'a> {
    pub phase: u8,
    pub step: usize,
    pub energy: f64,
    pub poses: &'a [Pose],
}

pub type TraceFn<'t> = dyn FnMut(&TraceRecord<'_>) + 't;

pub struct Tracer<'t> {
    pub every: usize,
    pub sink: &'t mut TraceFn<'t>,
}

/// Integrates until the energy changes by less than `energy_tol` over one
/// window, or `max_steps` is reached.
pub fn relax(
    bodies: &mut [Body],
    springs: &[Spring],
    cfg: &RelaxConfig,
    phase: u8,
    mut tracer: Option<&mut Tracer<'_>>,
) -> Result<RelaxOutcome, DynamicsError> {
    cfg.validate()?;
    if bodies.is_empty() {
        return Err(DynamicsError::Empty);
    }
    let (inv_m, inv_i) = stable_inverse_masses(bodies, springs, cfg);
    let n = bodies.len();
    let mut force = vec![Point2::ORIGIN; n];
    let mut torque = vec![0.0; n];
    let mut world = Vec::new();
    let mut trig = vec![(0.0, 1.0); n];
    let mut history = Vec::with_capacity(cfg.max_steps / cfg.window + 2);
    let mut energy = potential_energy(bodies, springs, cfg.k);
    history.push(energy);
    let mut converged = springs.is_empty() && cfg.collisions == CollisionMode::Off;
    let mut steps = 0;
    emit(&mut tracer, bodies, springs, cfg.k, phase, 0, true);
    while !converged && steps < cfg.max_steps {
        force.iter_mut().for_each(|f| *f = Point2::ORIGIN);
        torque.iter_mut().for_each(|t| *t = 0.0);
        for (t, b) in trig.iter_mut().zip(bodies.iter()) {
            *t = b.angle.sin_cos();
        }
        for s in springs {
            let (ba, bb) = (&bodies[s.a.0], &bodies[s.b.0]);
            let (sa, ca) = trig[s.a.0];
            let (sb, cb) = trig[s.b.0];
            let ra = ba.local[s.a.1].rotate_sc(sa, ca);
            let rb = bb.local[s.b.1].rotate_sc(sb, cb);
            let d = (bb.pos + rb) - (ba.pos + ra);
            let f = d * cfg.k;
            force[s.a.0] += f;
            torque[s.a.0] += ra.cross(f);
            force[s.b.0] -= f;
            torque[s.b.0] -= rb.cross(f);
        }
        for (i, b) in bodies.iter_mut().enumerate() {
            b.vel = (b.vel + force[i] * (inv_m[i] * cfg.dt)) * cfg.damping;
            b.omega = (b.omega + torque[i] * inv_i[i] * cfg.dt) * cfg.damping;
            b.pos += b.vel * cfg.dt;
            b.angle = wrap_angle(b.angle + b.omega * cfg.dt);
            if !(b.pos.is_finite() && b.angle.is_finite()) {
                return Err(DynamicsError::NonFinite { step: steps, body: i });
            }
        }
        if cfg.collisions == CollisionMode::On {
            resolve_contacts(bodies, &inv_m, cfg.contact_slop, &mut world);
        }
        steps += 1;
        if steps % cfg.window == 0 {
            energy = potential_energy(bodies, springs, cfg.k);
            let prev = *history.last().unwrap();
            history.push(energy);
            converged = (prev - energy).abs() < cfg.energy_tol;
        }
        emit(&mut tracer, bodies, springs, cfg.k, phase, steps, false);
    }
    energy = potential_energy(bodies, springs, cfg.k);
    emit(&mut tracer, bodies, springs, cfg.k, phase, steps, true);
    Ok(RelaxOutcome {
        poses: bodies.iter().map(Body::pose).collect(),
        energy,
        converged,
        steps,
    })
}

fn emit(
    tracer: &mut Option<&mut Tracer<'_>>,
    bodies: &[Body],
    springs: &[Spring],
    k: f64,
    phase: u8,
    step: usize,
    force_emit: bool,
) {
    if let Some(t) = tracer {
        if force_emit || (t.every > 0 && step.is_multiple_of(t.every)) {
            let poses: Vec<Pose> = bodies.iter().map(Body::pose).collect();
            let energy = potential_energy(bodies, springs, k);
            (t.sink)(&TraceRecord {
                phase,
                step,
                energy,
                poses: &poses,
            });
        }
    }
}

/// Inverse mass and inertia, with floors that keep the explicit update
/// stable for very small pieces.
fn stable_inverse_masses(bodies: &[Body], springs: &[Spring], cfg: &RelaxConfig) -> (Vec<f64>, Vec<f64>) {
    let n = bodies.len();
    let mut stiff = vec![0.0; n];
    let mut rot_stiff = vec![0.0; n];
    for s in springs {
        for (p, v) in [s.a, s.b] {
            stiff[p] += cfg.k;
            rot_stiff[p] += cfg.k * bodies[p].local[v].norm_sq();
        }
    }
    // keep omega*dt well below the explicit limit of 2
    let c = 4.0 * cfg.dt * cfg.dt;
    let inv_m = bodies
        .iter()
        .enumerate()
        .map(|(i, b)| 1.0 / b.mass.max(c * stiff[i]))
        .collect();
    let inv_i = bodies
        .iter()
        .enumerate()
        .map(|(i, b)| 1.0 / b.inertia.max(c * rot_stiff[i]))
        .collect();
    (inv_m, inv_i)
}

/// Candidate contact pairs from a uniform grid over bounding circles.
fn broad_phase(bodies: &[Body]) -> Vec<(usize, usize)> {
    let rmax = bodies.iter().map(|b| b.radius).fold(0.0, f64::max);
    if rmax <= 0.0 {
        return Vec::new();
    }
    let cell = 2.0 * rmax;
    let key = |p: Point2| ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, b) in bodies.iter().enumerate() {
        grid.entry(key(b.pos)).or_default().push(i);
    }
    let mut pairs = Vec::new();
    for (i, b) in bodies.iter().enumerate() {
        let (cx, cy) = key(b.pos);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = grid.get(&(cx + dx, cy + dy)) {
                    for &j in list {
                        if j > i && b.pos.dist(bodies[j].pos) < b.radius + bodies[j].radius {
                            pairs.push((i, j));
                        }
                    }
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Same pair set as [`broad_phase`], by direct scan; used for small scenes.
fn all_pairs(bodies: &[Body]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..bodies.len() {
        for j in (i + 1)..bodies.len() {
            if bodies[i].pos.dist(bodies[j].pos) < bodies[i].radius + bodies[j].radius {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

const SMALL_SCENE: usize = 24;

fn resolve_contacts(bodies: &mut [Body], inv_m: &[f64], slop: f64, world: &mut Vec<Vec<Point2>>) {
    let pairs = if bodies.len() <= SMALL_SCENE {
        all_pairs(bodies)
    } else {
        broad_phase(bodies)
    };
    if pairs.is_empty() {
        return;
    }
    world.resize_with(bodies.len(), Vec::new);
    for (w, b) in world.iter_mut().zip(bodies.iter()) {
        let (s, c) = b.angle.sin_cos();
        w.clear();
        w.extend(b.local.iter().map(|&p| b.pos + p.rotate_sc(s, c)));
    }
    for (i, j) in pairs {
        let Some((n, depth)) = sat_penetration(&world[i], &world[j]) else {
            continue;
        };
        if depth <= slop {
            continue;
        }
        let (wi, wj) = (inv_m[i], inv_m[j]);
        let sum = wi + wj;
        let corr = depth - slop;
        bodies[i].pos -= n * (corr * wi / sum);
        bodies[j].pos += n * (corr * wj / sum);
        let vn = (bodies[j].vel - bodies[i].vel).dot(n);
        if vn < 0.0 {
            let jimp = -vn / sum;
            bodies[i].vel -= n * (jimp * wi);
            bodies[j].vel += n * (jimp * wj);
        }
    }
}

/// Uniform random poses in a disk of radius `radius`.
pub fn random_poses<R: Rng>(n: usize, radius: f64, rng: &mut R) -> Vec<Pose> {
    (0..n)
        .map(|_| {
            let r = radius * rng.gen::<f64>().sqrt();
            let phi = rng.gen_range(0.0..2.0 * PI);
            let theta = rng.gen_range(0.0..2.0 * PI);
            Pose::new(theta, Point2::from_polar(r, phi))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoPhaseOutcome {
    pub phase1: RelaxOutcome,
    pub phase2: RelaxOutcome,
}

impl TwoPhaseOutcome {
    pub fn converged(&self) -> bool {
        self.phase1.converged && self.phase2.converged
    }
}

/// Phase 1 from random poses with overlaps allowed, then phase 2 with
/// collisions on, starting from the phase-1 result.
pub fn run_two_phase<R: Rng>(
    pieces: &[ConvexPolygon],
    matings: &[Mating],
    cfg: &RelaxConfig,
    rng: &mut R,
    tracer: Option<&mut Tracer<'_>>,
) -> Result<TwoPhaseOutcome, DynamicsError> {
    let init = random_poses(pieces.len(), cfg.arena_radius, rng);
    run_two_phase_from(pieces, matings, &init, cfg, tracer)
}

pub fn run_two_phase_from(
    pieces: &[ConvexPolygon],
    matings: &[Mating],
    init: &[Pose],
    cfg: &RelaxConfig,
    mut tracer: Option<&mut Tracer<'_>>,
) -> Result<TwoPhaseOutcome, DynamicsError> {
    if pieces.is_empty() {
        return Err(DynamicsError::Empty);
    }
    let springs = springs_from_matings(pieces, matings)?;
    let mut bodies = make_bodies(pieces, init);
    let c1 = RelaxConfig {
        collisions: CollisionMode::Off,
        ..*cfg
    };
    let phase1 = relax(&mut bodies, &springs, &c1, 1, tracer.as_deref_mut())?;
    for b in bodies.iter_mut() {
        b.vel = Point2::ORIGIN;
        b.omega = 0.0;
    }
    let c2 = RelaxConfig {
        collisions: CollisionMode::On,
        ..*cfg
    };
    let phase2 = relax(&mut bodies, &springs, &c2, 2, tracer)?;
    Ok(TwoPhaseOutcome { phase1, phase2 })
}

/// Total pairwise overlap area of placed pieces.
pub fn pairwise_overlap(placed: &[ConvexPolygon]) -> f64 {
    let mut acc = 0.0;
    for i in 0..placed.len() {
        for j in (i + 1)..placed.len() {
            acc += crate::geometry::intersection_area(&placed[i], &placed[j]);
        }
    }
    acc
}
