//! SVG rendering of puzzles and solutions.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::geometry::{bounding_box, ConvexPolygon, Point2, Pose};

use super::{PuzzleBundle, SolutionBundle};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum View {
    /// Pieces in their local frames laid out on a grid.
    Bag,
    /// Pieces at ground-truth poses.
    Solved,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvgOptions {
    pub view: View,
    pub width: f64,
    pub show_ids: bool,
    /// Draw ground-truth outlines beneath a solution.
    pub overlay_truth: bool,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions {
            view: View::Solved,
            width: 800.0,
            show_ids: true,
            overlay_truth: false,
        }
    }
}

const PALETTE: [&str; 10] = [
    "#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462", "#b3de69", "#fccde5", "#d9d9d9", "#bc80bd",
];

struct Scene {
    filled: Vec<(usize, ConvexPolygon)>,
    outlines: Vec<ConvexPolygon>,
}

pub fn render_puzzle(b: &PuzzleBundle, opts: &SvgOptions) -> String {
    let filled = match (opts.view, &b.ground_truth) {
        (View::Solved, Some(gt)) => b
            .pieces
            .iter()
            .map(|p| (p.id, p.polygon.transformed(&gt.poses[&p.id])))
            .collect(),
        _ => bag_layout(b),
    };
    render(
        &Scene {
            filled,
            outlines: Vec::new(),
        },
        opts,
    )
}

pub fn render_solution(b: &PuzzleBundle, sol: &SolutionBundle, opts: &SvgOptions) -> String {
    let filled = sol
        .poses
        .iter()
        .filter_map(|(id, pose)| b.pieces.get(*id).map(|p| (*id, p.polygon.transformed(pose))))
        .collect();
    let outlines = match (&b.ground_truth, opts.overlay_truth) {
        (Some(gt), true) => {
            let align = sol.eval.as_ref().map(|e| e.global_alignment).unwrap_or(Pose::IDENTITY);
            // draw truth in the solution frame
            let inv = align.inverse();
            b.pieces
                .iter()
                .map(|p| p.polygon.transformed(&inv.compose(&gt.poses[&p.id])))
                .collect()
        }
        _ => Vec::new(),
    };
    render(&Scene { filled, outlines }, opts)
}

/// Renders a set of placed polygons keyed by piece id.
pub fn render_placed(placed: &BTreeMap<usize, ConvexPolygon>, opts: &SvgOptions) -> String {
    let filled = placed.iter().map(|(i, p)| (*i, p.clone())).collect();
    render(
        &Scene {
            filled,
            outlines: Vec::new(),
        },
        opts,
    )
}

fn bag_layout(b: &PuzzleBundle) -> Vec<(usize, ConvexPolygon)> {
    let n = b.pieces.len().max(1);
    let cols = (n as f64).sqrt().ceil() as usize;
    let cell = b
        .pieces
        .iter()
        .map(|p| 2.0 * p.polygon.radius_about(Point2::ORIGIN))
        .fold(0.0, f64::max)
        * 1.1;
    b.pieces
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let (r, c) = (k / cols, k % cols);
            let d = Point2::new(c as f64 * cell, -(r as f64) * cell);
            (p.id, p.polygon.translated(d))
        })
        .collect()
}

fn render(scene: &Scene, opts: &SvgOptions) -> String {
    let all: Vec<Point2> = scene
        .filled
        .iter()
        .flat_map(|(_, p)| p.vertices().iter().copied())
        .chain(scene.outlines.iter().flat_map(|p| p.vertices().iter().copied()))
        .collect();
    let (lo, hi) = if all.is_empty() {
        (Point2::ORIGIN, Point2::new(1.0, 1.0))
    } else {
        bounding_box(&all)
    };
    let span = (hi - lo).norm().max(1e-12);
    let margin = 0.03 * span;
    let w = (hi.x - lo.x) + 2.0 * margin;
    let h = (hi.y - lo.y) + 2.0 * margin;
    let height = opts.width * h / w;
    let stroke = 0.002 * span;
    // flip y so the drawing is y-up
    let map = |p: Point2| (p.x - lo.x + margin, hi.y - p.y + margin);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.1}" height="{:.1}" viewBox="0 0 {} {}">"#,
        opts.width,
        height,
        fmt(w),
        fmt(h)
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for p in &scene.outlines {
        let _ = writeln!(
            s,
            r#"<polygon class="truth" points="{}" fill="none" stroke="grey" stroke-dasharray="{} {}" stroke-width="{}"/>"#,
            points(p, &map),
            fmt(4.0 * stroke),
            fmt(2.0 * stroke),
            fmt(stroke)
        );
    }
    for (id, p) in &scene.filled {
        let _ = writeln!(
            s,
            r#"<polygon class="piece" data-id="{}" points="{}" fill="{}" fill-opacity="0.8" stroke="black" stroke-width="{}"/>"#,
            id,
            points(p, &map),
            PALETTE[id % PALETTE.len()],
            fmt(stroke)
        );
    }
    if opts.show_ids {
        for (id, p) in &scene.filled {
            let (x, y) = map(p.vertex_mean());
            let size = (0.5 * p.area().sqrt()).min(0.04 * span).max(0.005 * span);
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-size="{}" text-anchor="middle" dominant-baseline="middle">{}</text>"#,
                fmt(x),
                fmt(y),
                fmt(size),
                id
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn points(p: &ConvexPolygon, map: &impl Fn(Point2) -> (f64, f64)) -> String {
    p.vertices()
        .iter()
        .map(|v| {
            let (x, y) = map(*v);
            format!("{},{}", fmt(x), fmt(y))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn fmt(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::puzzlegen::gen_circle_puzzle;

    #[test]
    fn single_piece_single_polygon() {
        let b = gen_circle_puzzle(0, 0.0, 1).unwrap().bundle;
        let svg = render_puzzle(&b, &SvgOptions::default());
        assert_eq!(svg.matches("<polygon").count(), 1);
    }

    #[test]
    fn deterministic_output() {
        let b = gen_circle_puzzle(6, 0.01, 4).unwrap().bundle;
        for view in [View::Bag, View::Solved] {
            let o = SvgOptions {
                view,
                ..SvgOptions::default()
            };
            assert_eq!(render_puzzle(&b, &o), render_puzzle(&b, &o));
        }
    }

    #[test]
    fn solved_view_tiles_shape() {
        let g = gen_circle_puzzle(7, 0.0, 9).unwrap();
        let b = &g.bundle;
        let svg = render_puzzle(b, &SvgOptions::default());
        assert_eq!(svg.matches("class=\"piece\"").count(), b.pieces.len());
        let gt = b.ground_truth.as_ref().unwrap();
        let area: f64 = b
            .pieces
            .iter()
            .map(|p| p.polygon.transformed(&gt.poses[&p.id]).area())
            .sum();
        let shape = ConvexPolygon::new(b.shape.vertices.clone()).unwrap();
        assert!((area - shape.area()).abs() < 1e-9);
        let placed: Vec<ConvexPolygon> = b
            .pieces
            .iter()
            .map(|p| p.polygon.transformed(&gt.poses[&p.id]))
            .collect();
        let union = crate::geometry::union_area(&placed);
        assert!((union - shape.area()).abs() < 1e-6);
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt(1.0), "1");
        assert_eq!(fmt(-0.00001), "0");
        assert_eq!(fmt(2.5), "2.5");
    }
}
