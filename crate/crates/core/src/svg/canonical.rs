use alloc::vec::Vec;

use super::leaf_id;
use super::write::has_leaves;
use crate::geom::{CubicSegment, Point, Rect, Shape};
use crate::math::{normalize_angle, round2};
use crate::types::{LayoutTree, Polygon, TreeNode};

/// Smallest dimension representable after two-digit rounding.
const MIN_DIM: f64 = 0.01;

fn dim(v: f64) -> f64 {
    round2(v).max(MIN_DIM)
}

fn pt(p: Point) -> Point {
    Point::new(round2(p.x), round2(p.y))
}

pub(crate) fn canonical_shape(shape: &Shape) -> Shape {
    match shape {
        Shape::Rect(r) => Shape::Rect(Rect::new(round2(r.x), round2(r.y), dim(r.w), dim(r.h))),
        Shape::RotatedRect {
            x,
            y,
            w,
            h,
            angle_deg,
        } => Shape::RotatedRect {
            x: round2(*x),
            y: round2(*y),
            w: dim(*w),
            h: dim(*h),
            angle_deg: normalize_angle(round2(normalize_angle(*angle_deg))),
        },
        Shape::Ellipse { cx, cy, rx, ry } => Shape::Ellipse {
            cx: round2(*cx),
            cy: round2(*cy),
            rx: dim(*rx),
            ry: dim(*ry),
        },
        Shape::Path {
            start,
            segments,
            closed,
        } => Shape::Path {
            start: pt(*start),
            segments: segments
                .iter()
                .map(|s| CubicSegment::new(pt(s.c1), pt(s.c2), pt(s.end)))
                .collect(),
            closed: *closed,
        },
    }
}

fn canonical_nodes(nodes: &[TreeNode], index: &mut usize) -> Vec<TreeNode> {
    let mut out = Vec::with_capacity(nodes.len());
    for n in nodes {
        match n {
            TreeNode::Group { x, y, children } => {
                if !has_leaves(children) {
                    continue;
                }
                let children = canonical_nodes(children, index);
                out.push(TreeNode::Group {
                    x: round2(*x),
                    y: round2(*y),
                    children,
                });
            }
            TreeNode::Leaf {
                category, shape, ..
            } => {
                out.push(TreeNode::Leaf {
                    id: Some(leaf_id(*category, *index)),
                    category: *category,
                    shape: canonical_shape(shape),
                });
                *index += 1;
            }
        }
    }
    out
}

/// Renumbers leaf ids depth-first, rounds numbers to two fraction digits,
/// and drops groups without leaves.
pub fn canonicalize(tree: &LayoutTree) -> LayoutTree {
    let mut index = 0;
    LayoutTree {
        canvas: tree.canvas,
        intents: tree
            .intents
            .iter()
            .map(|p| Polygon(p.0.iter().map(|q| pt(*q)).collect()))
            .collect(),
        elements: canonical_nodes(&tree.elements, &mut index),
    }
}
