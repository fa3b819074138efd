//! Puzzle and solution files.
//!
//! Both are single JSON documents. Floats are written in shortest
//! round-trip form, so `read(write(b)) == b` bit for bit.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::constraints::{check_unique_edges, Mating};
use crate::error::IoError;
use crate::eval::EvalReport;
use crate::geometry::{ConvexPolygon, Line2, Point2, Pose};
use crate::puzzlegen::{GroundTruth, NoiseSpec};
use crate::solver::SolverReport;

pub mod svg;

pub const FORMAT_VERSION: &str = "1";
pub const PUZZLE_EXT: &str = "ccpuzzle";
pub const SOLUTION_EXT: &str = "ccsol";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Circle,
    Polygon,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeDescriptor {
    pub kind: ShapeKind,
    pub vertices: Vec<Point2>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub id: usize,
    #[serde(rename = "vertices")]
    pub polygon: ConvexPolygon,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PuzzleBundle {
    pub format_version: String,
    pub seed: u64,
    pub shape: ShapeDescriptor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cuts: Option<Vec<Line2>>,
    pub pieces: Vec<Piece>,
    pub noise: NoiseSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruth>,
}

impl PuzzleBundle {
    /// Piece polygons indexed by id.
    pub fn polygons(&self) -> Vec<ConvexPolygon> {
        self.pieces.iter().map(|p| p.polygon.clone()).collect()
    }

    pub fn diameter(&self) -> f64 {
        self.noise.diameter
    }

    /// Drops the ground-truth sections, leaving pure solver input.
    pub fn without_ground_truth(&self) -> PuzzleBundle {
        PuzzleBundle {
            cuts: None,
            ground_truth: None,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), IoError> {
        check_version(&self.format_version)?;
        if self.shape.vertices.len() < 3 {
            return Err(invalid("shape.vertices", "fewer than 3 vertices"));
        }
        for (i, p) in self.pieces.iter().enumerate() {
            if p.id != i {
                return Err(invalid(
                    &format!("pieces[{i}].id"),
                    &format!("expected {i}, found {} (ids must be 0..n in order)", p.id),
                ));
            }
        }
        if let Some(cuts) = &self.cuts {
            for (i, c) in cuts.iter().enumerate() {
                if Line2::new(c.a1, c.a2, c.a3).is_err() || !c.a3.is_finite() {
                    return Err(invalid(&format!("cuts[{i}]"), "degenerate line"));
                }
            }
        }
        let ns = &self.noise;
        if !(ns.diameter > 0.0 && ns.diameter.is_finite()) {
            return Err(invalid("noise.diameter", "must be positive and finite"));
        }
        if !(0.0..1.0).contains(&ns.xi) {
            return Err(invalid("noise.xi", "must satisfy 0 <= xi < 1"));
        }
        if ns.epsilon != ns.xi * ns.diameter {
            return Err(invalid("noise.epsilon", "must equal xi * diameter"));
        }
        if let Some(gt) = &self.ground_truth {
            let polys = self.polygons();
            check_unique_edges(&gt.matings, Some(&polys))
                .map_err(|e| invalid("ground_truth.matings", &e.to_string()))?;
            let keys: BTreeSet<usize> = gt.poses.keys().copied().collect();
            let ids: BTreeSet<usize> = (0..self.pieces.len()).collect();
            if keys != ids {
                return Err(invalid("ground_truth.poses", "must hold one pose per piece id"));
            }
            check_poses(&gt.poses, "ground_truth.poses")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMode {
    Clean,
    Noisy,
    KnownMatings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionBundle {
    pub format_version: String,
    pub mode: SolveMode,
    /// Seed of the source puzzle.
    pub seed: u64,
    pub matings: Vec<Mating>,
    pub poses: BTreeMap<usize, Pose>,
    pub report: SolverReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalReport>,
}

impl SolutionBundle {
    pub fn validate(&self) -> Result<(), IoError> {
        check_version(&self.format_version)?;
        check_unique_edges(&self.matings, None).map_err(|e| invalid("matings", &e.to_string()))?;
        check_poses(&self.poses, "poses")
    }

    /// Checks that every id refers to a piece of `puzzle`.
    pub fn validate_against(&self, puzzle: &PuzzleBundle) -> Result<(), IoError> {
        let n = puzzle.pieces.len();
        let bad: Vec<usize> = self
            .poses
            .keys()
            .copied()
            .chain(self.matings.iter().flat_map(|m| m.pieces()))
            .filter(|&id| id >= n)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if !bad.is_empty() {
            return Err(invalid("poses", &format!("unknown piece ids {bad:?}")));
        }
        let polys = puzzle.polygons();
        check_unique_edges(&self.matings, Some(&polys)).map_err(|e| invalid("matings", &e.to_string()))
    }
}

fn check_version(v: &str) -> Result<(), IoError> {
    if v != FORMAT_VERSION {
        return Err(IoError::Version {
            found: v.to_string(),
            expected: FORMAT_VERSION.to_string(),
        });
    }
    Ok(())
}

fn check_poses(poses: &BTreeMap<usize, Pose>, path: &str) -> Result<(), IoError> {
    for (id, p) in poses {
        if !(p.angle.is_finite() && p.tx.is_finite() && p.ty.is_finite()) {
            return Err(invalid(&format!("{path}.{id}"), "non-finite pose"));
        }
    }
    Ok(())
}

fn invalid(path: &str, msg: &str) -> IoError {
    IoError::Invalid {
        path: path.to_string(),
        msg: msg.to_string(),
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("bundle types serialize infallibly");
    s.push('\n');
    s
}

fn from_json<T: DeserializeOwned>(s: &str) -> Result<T, IoError> {
    // peek at the version first so old files get a clear message
    #[derive(Deserialize)]
    struct Head {
        format_version: Option<String>,
    }
    if let Ok(Head {
        format_version: Some(v),
    }) = serde_json::from_str::<Head>(s)
    {
        check_version(&v)?;
    }
    Ok(serde_json::from_str(s)?)
}

pub fn puzzle_from_str(s: &str) -> Result<PuzzleBundle, IoError> {
    let b: PuzzleBundle = from_json(s)?;
    b.validate()?;
    Ok(b)
}

pub fn solution_from_str(s: &str) -> Result<SolutionBundle, IoError> {
    let b: SolutionBundle = from_json(s)?;
    b.validate()?;
    Ok(b)
}

pub fn read_puzzle_from<R: Read>(mut r: R) -> Result<PuzzleBundle, IoError> {
    let mut s = String::new();
    r.read_to_string(&mut s).map_err(|e| io_err("<stream>", e))?;
    puzzle_from_str(&s)
}

pub fn write_to<W: Write, T: Serialize>(mut w: W, v: &T) -> Result<(), IoError> {
    w.write_all(to_json(v).as_bytes()).map_err(|e| io_err("<stream>", e))
}

pub fn read_puzzle(path: &Path) -> Result<PuzzleBundle, IoError> {
    puzzle_from_str(&read_text(path)?)
}

pub fn read_solution(path: &Path) -> Result<SolutionBundle, IoError> {
    solution_from_str(&read_text(path)?)
}

pub fn write_puzzle(path: &Path, b: &PuzzleBundle) -> Result<(), IoError> {
    write_text(path, &to_json(b))
}

pub fn write_solution(path: &Path, b: &SolutionBundle) -> Result<(), IoError> {
    write_text(path, &to_json(b))
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| io_err(&path.display().to_string(), e))
}

pub fn write_text(path: &Path, s: &str) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(&dir.display().to_string(), e))?;
    }
    fs::write(path, s).map_err(|e| io_err(&path.display().to_string(), e))
}

fn io_err(path: &str, source: std::io::Error) -> IoError {
    IoError::Io {
        path: path.to_string(),
        source,
    }
}
