//! Closed-form expectations for random circle cuts and the empirical
//! suite that checks them.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::constraints::{candidate_matings, Tolerance};
use crate::error::GenError;
use crate::geometry::Point2;
use crate::io::ShapeKind;
use crate::puzzlegen::{derive_seed, generate, Generated, ShapeFamily};

pub fn analytic_expected_cut_length() -> f64 {
    4.0 / PI
}

pub fn analytic_intersection_probability() -> f64 {
    1.0 / 3.0
}

pub fn expected_intersections(a: usize) -> f64 {
    let a = a as f64;
    a * (a - 1.0) / 6.0
}

pub fn expected_edges(a: usize) -> f64 {
    let a = a as f64;
    (a * a + 2.0 * a) / 3.0
}

pub fn expected_avg_edge_length(a: usize) -> f64 {
    12.0 / (PI * (a as f64 + 2.0))
}

pub fn expected_pieces(a: usize) -> f64 {
    let a = a as f64;
    a * a / 6.0 + 5.0 * a / 6.0 + 1.0
}

/// Lazy caterer's number.
pub fn max_pieces(a: usize) -> usize {
    (a * a + a) / 2 + 1
}

/// Length of the unit-circle chord between angles `phi1` and `phi2`.
pub fn chord_length(phi1: f64, phi2: f64) -> f64 {
    2.0 * ((phi1 - phi2) * 0.5).sin().abs()
}

/// Sample mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo mean chord length over `n` random chords.
pub fn mc_chord_length<R: Rng>(n: usize, rng: &mut R) -> (f64, f64) {
    let xs: Vec<f64> = (0..n)
        .map(|_| chord_length(rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI)))
        .collect();
    mean_se(&xs)
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

/// Proper crossing of segments `pq` and `rs`.
pub fn segments_cross(p: Point2, q: Point2, r: Point2, s: Point2) -> bool {
    let d1 = orient(p, q, r);
    let d2 = orient(p, q, s);
    let d3 = orient(r, s, p);
    let d4 = orient(r, s, q);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Monte Carlo frequency with which two random chords cross.
pub fn mc_intersection_probability<R: Rng>(n: usize, rng: &mut R) -> (f64, f64) {
    let pt = |rng: &mut R| Point2::from_polar(1.0, rng.gen_range(0.0..2.0 * PI));
    let xs: Vec<f64> = (0..n)
        .map(|_| {
            let (p, q, r, s) = (pt(rng), pt(rng), pt(rng), pt(rng));
            if segments_cross(p, q, r, s) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    mean_se(&xs)
}

/// Counts from one generated puzzle.
#[derive(Clone, Debug, PartialEq)]
pub struct PuzzleCounts {
    pub n_pieces: usize,
    pub n_edges: usize,
    pub n_intersections: usize,
    pub avg_edge_length: f64,
    /// Number of pieces with each edge count.
    pub edges_per_piece: BTreeMap<usize, usize>,
    /// Number of pieces with each side count. On the circle a run of
    /// boundary edges is one arc side.
    pub sides_per_piece: BTreeMap<usize, usize>,
    pub mates_per_edge: f64,
}

/// Side count of every piece: mated edges plus one side per maximal run of
/// unmated edges when `merge_boundary` is set.
fn side_counts(g: &Generated, merge_boundary: bool) -> Vec<usize> {
    let pieces = &g.bundle.pieces;
    let mut mated: Vec<Vec<bool>> = pieces.iter().map(|p| vec![false; p.polygon.len()]).collect();
    if let Some(gt) = &g.bundle.ground_truth {
        for m in &gt.matings {
            for e in m.edges() {
                mated[e.piece][e.edge] = true;
            }
        }
    }
    mated
        .iter()
        .map(|flags| {
            let n = flags.len();
            if !merge_boundary {
                return n;
            }
            let cut = flags.iter().filter(|f| **f).count();
            let runs = (0..n).filter(|&j| !flags[j] && flags[(j + n - 1) % n]).count();
            // a piece with no mated edge is the whole shape
            cut + if cut == 0 { 1 } else { runs }
        })
        .collect()
}

pub fn puzzle_counts(g: &Generated, xi: f64) -> PuzzleCounts {
    let pieces = g.bundle.polygons();
    let mut hist = BTreeMap::new();
    for p in &pieces {
        *hist.entry(p.len()).or_insert(0) += 1;
    }
    let total_edges: usize = pieces.iter().map(|p| p.len()).sum();
    let mut sides = BTreeMap::new();
    for k in side_counts(g, g.bundle.shape.kind == ShapeKind::Circle) {
        *sides.entry(k).or_insert(0) += 1;
    }
    let eps = xi * g.info.diameter;
    let cand = candidate_matings(&pieces, eps, &Tolerance::for_diameter(g.info.diameter));
    PuzzleCounts {
        n_pieces: pieces.len(),
        n_edges: g.info.n_cut_edges,
        n_intersections: g.info.n_intersections,
        avg_edge_length: if g.info.n_cut_edges > 0 {
            g.info.cut_length_total / g.info.n_cut_edges as f64
        } else {
            f64::NAN
        },
        edges_per_piece: hist,
        sides_per_piece: sides,
        // every mating is counted once for each of its two edges
        mates_per_edge: 2.0 * cand.len() as f64 / total_edges as f64,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatsReport {
    pub family: ShapeFamily,
    pub a: usize,
    pub xi: f64,
    pub n_puzzles: usize,
    pub n_pieces_mean: f64,
    pub n_pieces_se: f64,
    pub n_pieces_expected: f64,
    pub n_pieces_max: usize,
    pub n_edges_mean: f64,
    pub n_edges_se: f64,
    pub n_edges_expected: f64,
    pub n_intersections_mean: f64,
    pub n_intersections_se: f64,
    pub n_intersections_expected: f64,
    pub avg_edge_length_mean: f64,
    pub avg_edge_length_se: f64,
    pub avg_edge_length_expected: f64,
    pub mates_per_edge_mean: f64,
    pub mates_per_edge_se: f64,
    /// Fraction of all pieces having each edge count.
    #[serde(skip)]
    pub edges_per_piece: BTreeMap<usize, f64>,
    /// Fraction of all pieces having each side count.
    #[serde(skip)]
    pub sides_per_piece: BTreeMap<usize, f64>,
    pub frac_3_sides: f64,
    pub frac_4_sides: f64,
    pub frac_5_sides: f64,
    pub frac_over_5_sides: f64,
    /// Identities held for every puzzle.
    pub identities_hold: bool,
}

/// Aggregates `count` puzzles with the given cut count and noise level.
pub fn stats_for(
    family: ShapeFamily,
    a: usize,
    xi: f64,
    count: usize,
    base_seed: u64,
) -> Result<StatsReport, GenError> {
    let runs: Vec<(PuzzleCounts, bool)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let g = generate(family, a, xi, derive_seed(base_seed, i as u64))?;
            let c = puzzle_counts(&g, xi);
            let ok = c.n_pieces == c.n_intersections + a + 1 && c.n_edges == a + 2 * c.n_intersections;
            Ok((c, ok))
        })
        .collect::<Result<_, GenError>>()?;
    let col = |f: &dyn Fn(&PuzzleCounts) -> f64| -> (f64, f64) {
        let xs: Vec<f64> = runs.iter().map(|(c, _)| f(c)).filter(|x| x.is_finite()).collect();
        mean_se(&xs)
    };
    let (np, np_se) = col(&|c| c.n_pieces as f64);
    let (ne, ne_se) = col(&|c| c.n_edges as f64);
    let (ni, ni_se) = col(&|c| c.n_intersections as f64);
    let (al, al_se) = col(&|c| c.avg_edge_length);
    let (mp, mp_se) = col(&|c| c.mates_per_edge);
    let freq = |get: &dyn Fn(&PuzzleCounts) -> &BTreeMap<usize, usize>| -> BTreeMap<usize, f64> {
        let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
        for (c, _) in &runs {
            for (k, v) in get(c) {
                *hist.entry(*k).or_insert(0) += v;
            }
        }
        let total: usize = hist.values().sum();
        hist.iter()
            .map(|(k, v)| (*k, *v as f64 / total.max(1) as f64))
            .collect()
    };
    let edge_freq = freq(&|c| &c.edges_per_piece);
    let side_freq = freq(&|c| &c.sides_per_piece);
    let f = |k: usize| side_freq.get(&k).copied().unwrap_or(0.0);
    let (f3, f4, f5) = (f(3), f(4), f(5));
    let over5 = side_freq.iter().filter(|(k, _)| **k > 5).map(|(_, v)| v).sum();
    // shape diameter scales lengths for polygon shapes; circle lengths are on the unit circle
    Ok(StatsReport {
        family,
        a,
        xi,
        n_puzzles: count,
        n_pieces_mean: np,
        n_pieces_se: np_se,
        n_pieces_expected: expected_pieces(a),
        n_pieces_max: max_pieces(a),
        n_edges_mean: ne,
        n_edges_se: ne_se,
        n_edges_expected: expected_edges(a),
        n_intersections_mean: ni,
        n_intersections_se: ni_se,
        n_intersections_expected: expected_intersections(a),
        avg_edge_length_mean: al,
        avg_edge_length_se: al_se,
        avg_edge_length_expected: expected_avg_edge_length(a),
        mates_per_edge_mean: mp,
        mates_per_edge_se: mp_se,
        edges_per_piece: edge_freq,
        sides_per_piece: side_freq,
        frac_3_sides: f3,
        frac_4_sides: f4,
        frac_5_sides: f5,
        frac_over_5_sides: over5,
        identities_hold: runs.iter().all(|(_, ok)| *ok),
    })
}

/// One report per (a, xi) pair, each from `count` puzzles with derived seeds.
pub fn run_stats_suite(
    family: ShapeFamily,
    a_values: &[usize],
    count: usize,
    xi_values: &[f64],
    base_seed: u64,
) -> Result<Vec<StatsReport>, GenError> {
    let mut out = Vec::new();
    for (i, &a) in a_values.iter().enumerate() {
        for (j, &xi) in xi_values.iter().enumerate() {
            let seed = derive_seed(base_seed, (i * xi_values.len() + j) as u64);
            out.push(stats_for(family, a, xi, count, seed)?);
        }
    }
    Ok(out)
}

/// CSV with one row per report.
pub fn to_csv(reports: &[StatsReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in reports {
        w.serialize(r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}
