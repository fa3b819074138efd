//! Synthesis, analysis and reconstruction of crossing cuts puzzles: convex
//! shapes sliced by straight lines into convex pieces.

pub mod constraints;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod puzzlegen;
pub mod solver;
pub mod stats;

pub use constraints::{EdgeRef, Mating};
pub use error::{DynamicsError, EvalError, GenError, GeometryError, IoError, MatingError, SolveError};
pub use geometry::{ConvexPolygon, Line2, Point2, Pose};
pub use io::{PuzzleBundle, SolutionBundle};
