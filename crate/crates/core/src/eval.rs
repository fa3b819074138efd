//! Solution scoring: global alignment, position score, mating precision and recall.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::constraints::Mating;
use crate::error::EvalError;
use crate::geometry::{intersection_area, ConvexPolygon, Point2, Pose};
use crate::io::{PuzzleBundle, SolutionBundle};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatingWeight {
    /// Mean area of the two pieces.
    #[default]
    MeanArea,
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub q_positions: f64,
    pub precision: f64,
    /// `None` when the truth has no matings.
    pub recall: Option<f64>,
    /// Maps solution coordinates onto ground-truth coordinates.
    pub global_alignment: Pose,
    /// Overlap ratio per placed piece.
    pub per_piece: BTreeMap<usize, f64>,
    pub n_pieces: usize,
    pub n_placed: usize,
    pub weighting: MatingWeight,
}

/// Area weights normalized to sum 1.
pub fn area_weights(pieces: &[ConvexPolygon]) -> Vec<f64> {
    let total: f64 = pieces.iter().map(|p| p.area()).sum();
    pieces.iter().map(|p| p.area() / total).collect()
}

/// Weighted least-squares rigid motion taking `src[i]` onto `dst[i]`.
pub fn weighted_rigid_fit(src: &[Point2], dst: &[Point2], w: &[f64]) -> Result<Pose, EvalError> {
    let distinct: BTreeSet<(u64, u64)> = src.iter().map(|p| (p.x.to_bits(), p.y.to_bits())).collect();
    if distinct.len() < 2 {
        return Err(EvalError::Underdetermined(distinct.len()));
    }
    let wsum: f64 = w.iter().sum();
    let mut cs = Point2::ORIGIN;
    let mut cd = Point2::ORIGIN;
    for i in 0..src.len() {
        cs += src[i] * w[i];
        cd += dst[i] * w[i];
    }
    cs = cs * (1.0 / wsum);
    cd = cd * (1.0 / wsum);
    // the 2x2 SVD with det +1 reduces to this angle
    let (mut sdot, mut scross) = (0.0, 0.0);
    for i in 0..src.len() {
        let a = src[i] - cs;
        let b = dst[i] - cd;
        sdot += w[i] * a.dot(b);
        scross += w[i] * a.cross(b);
    }
    let theta = scross.atan2(sdot);
    let t = cd - cs.rotate(theta);
    Ok(Pose::new(theta, t))
}

/// Value of the alignment objective for `align` applied to solution poses.
pub fn alignment_objective(
    align: &Pose,
    sol: &BTreeMap<usize, Pose>,
    truth: &BTreeMap<usize, Pose>,
    pieces: &[ConvexPolygon],
) -> f64 {
    let w = area_weights(pieces);
    sol.iter()
        .filter_map(|(id, ps)| truth.get(id).map(|pt| (*id, ps, pt)))
        .map(|(id, ps, pt)| {
            pieces[id]
                .vertices()
                .iter()
                .map(|&v| w[id] * (align.apply(ps.apply(v)) - pt.apply(v)).norm_sq())
                .sum::<f64>()
        })
        .sum()
}

/// Global rigid motion minimizing the area-weighted vertex distances between
/// the solution and the ground truth over their common pieces.
pub fn align_global(
    sol: &BTreeMap<usize, Pose>,
    truth: &BTreeMap<usize, Pose>,
    pieces: &[ConvexPolygon],
) -> Result<Pose, EvalError> {
    let w = area_weights(pieces);
    let mut src = Vec::new();
    let mut dst = Vec::new();
    let mut ws = Vec::new();
    for (id, ps) in sol {
        let Some(pt) = truth.get(id) else { continue };
        for &v in pieces[*id].vertices() {
            src.push(ps.apply(v));
            dst.push(pt.apply(v));
            ws.push(w[*id]);
        }
    }
    weighted_rigid_fit(&src, &dst, &ws)
}

/// Area-weighted overlap between aligned solution pieces and their
/// ground-truth placements. Unplaced pieces contribute zero.
pub fn q_positions(
    aligned: &BTreeMap<usize, Pose>,
    truth: &BTreeMap<usize, Pose>,
    pieces: &[ConvexPolygon],
) -> (f64, BTreeMap<usize, f64>) {
    let w = area_weights(pieces);
    let mut per = BTreeMap::new();
    let mut q = 0.0;
    for (id, ps) in aligned {
        let Some(pt) = truth.get(id) else { continue };
        let p = &pieces[*id];
        let r = intersection_area(&p.transformed(pt), &p.transformed(ps)) / p.area();
        let r = r.clamp(0.0, 1.0);
        per.insert(*id, r);
        q += w[*id] * r;
    }
    (q.clamp(0.0, 1.0), per)
}

fn mating_weight(m: &Mating, areas: &[f64], scheme: MatingWeight) -> f64 {
    match scheme {
        MatingWeight::Uniform => 1.0,
        MatingWeight::MeanArea => {
            let [a, b] = m.pieces();
            0.5 * (areas[a] + areas[b])
        }
    }
}

/// Weighted precision and recall. Precision of an empty set is 1; recall
/// against an empty truth is `None`.
pub fn mating_precision_recall(
    found: &[Mating],
    truth: &[Mating],
    areas: &[f64],
    scheme: MatingWeight,
) -> (f64, Option<f64>) {
    let f: BTreeSet<Mating> = found.iter().copied().collect();
    let t: BTreeSet<Mating> = truth.iter().copied().collect();
    let ratio = |num: &BTreeSet<Mating>, den: &BTreeSet<Mating>| -> Option<f64> {
        if den.is_empty() {
            return None;
        }
        let hit: f64 = den
            .iter()
            .filter(|m| num.contains(m))
            .map(|m| mating_weight(m, areas, scheme))
            .sum();
        let all: f64 = den.iter().map(|m| mating_weight(m, areas, scheme)).sum();
        Some(hit / all)
    };
    (ratio(&t, &f).unwrap_or(1.0), ratio(&f, &t))
}

/// Scores a solution against the bundle's ground truth.
pub fn evaluate(puzzle: &PuzzleBundle, sol: &SolutionBundle, scheme: MatingWeight) -> Result<EvalReport, EvalError> {
    let gt = puzzle.ground_truth.as_ref().ok_or(EvalError::NoGroundTruth)?;
    let n = puzzle.pieces.len();
    let unknown: Vec<usize> = sol
        .poses
        .keys()
        .copied()
        .chain(sol.matings.iter().flat_map(|m| m.pieces()))
        .filter(|&i| i >= n)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if !unknown.is_empty() {
        return Err(EvalError::UnknownPieces(unknown));
    }
    let pieces = puzzle.polygons();
    let areas: Vec<f64> = pieces.iter().map(|p| p.area()).collect();
    let align = if sol.poses.is_empty() {
        Pose::IDENTITY
    } else {
        align_global(&sol.poses, &gt.poses, &pieces)?
    };
    let aligned: BTreeMap<usize, Pose> = sol.poses.iter().map(|(id, p)| (*id, align.compose(p))).collect();
    let (q, per_piece) = q_positions(&aligned, &gt.poses, &pieces);
    let (precision, recall) = mating_precision_recall(&sol.matings, &gt.matings, &areas, scheme);
    Ok(EvalReport {
        q_positions: q,
        precision,
        recall,
        global_alignment: align,
        per_piece,
        n_pieces: n,
        n_placed: sol.poses.len(),
        weighting: scheme,
    })
}
