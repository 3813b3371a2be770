use alloc::format;
use alloc::string::String;
use core::fmt::Write;

use super::canonical::canonical_shape;
use super::{leaf_id, SVG_NS};
use crate::geom::Shape;
use crate::math::round2;
use crate::types::{Canvas, LayoutTree, Polygon, TreeNode};

/// Shortest round-trip decimal with at most two fraction digits.
pub fn fmt_num(v: f64) -> String {
    format!("{}", round2(v))
}

/// Serializes a tree in the canonical dialect form.
///
/// Leaf ids are emitted from the category and depth-first position, so
/// stored ids do not affect the output. Groups holding no leaves are
/// omitted.
pub fn serialize_tree(tree: &LayoutTree) -> String {
    let mut out = opening_tag(tree.canvas, &tree.intents);
    let mut index = 0;
    write_nodes(&mut out, &tree.elements, &mut index);
    out.push_str("</svg>");
    out
}

/// Root opening tag followed by the intent polygons; the prefix every
/// serialized tree starts with.
pub fn opening_tag(canvas: Canvas, intents: &[Polygon]) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "<svg width=\"{}\" height=\"{}\" xmlns=\"{}\">",
        canvas.width, canvas.height, SVG_NS
    );
    for p in intents {
        write_polygon(&mut out, p);
    }
    out
}

pub(crate) fn write_polygon(out: &mut String, p: &Polygon) {
    out.push_str("<polygon points=\"");
    for (i, pt) in p.0.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{},{}", fmt_num(pt.x), fmt_num(pt.y));
    }
    out.push_str("\"/>");
}

pub(crate) fn has_leaves(nodes: &[TreeNode]) -> bool {
    nodes.iter().any(|n| match n {
        TreeNode::Leaf { .. } => true,
        TreeNode::Group { children, .. } => has_leaves(children),
    })
}

fn write_nodes(out: &mut String, nodes: &[TreeNode], index: &mut usize) {
    for n in nodes {
        match n {
            TreeNode::Group { x, y, children } => {
                if !has_leaves(children) {
                    continue;
                }
                let _ = write!(out, "<svg x=\"{}\" y=\"{}\">", fmt_num(*x), fmt_num(*y));
                write_nodes(out, children, index);
                out.push_str("</svg>");
            }
            TreeNode::Leaf {
                category, shape, ..
            } => {
                write_shape(out, shape, &leaf_id(*category, *index), "");
                *index += 1;
            }
        }
    }
}

/// Path data `M x y C ... [Z]` for a path shape; empty for other shapes.
pub fn path_data(shape: &Shape) -> String {
    let mut d = String::new();
    if let Shape::Path {
        start,
        segments,
        closed,
    } = shape
    {
        let _ = write!(d, "M {} {}", fmt_num(start.x), fmt_num(start.y));
        for s in segments {
            let _ = write!(
                d,
                " C {} {} {} {} {} {}",
                fmt_num(s.c1.x),
                fmt_num(s.c1.y),
                fmt_num(s.c2.x),
                fmt_num(s.c2.y),
                fmt_num(s.end.x),
                fmt_num(s.end.y)
            );
        }
        if *closed {
            d.push_str(" Z");
        }
    }
    d
}

/// Writes one shape element: geometry attributes, transform, id, then
/// `extra` (raw attribute text, may be empty).
pub fn write_shape(out: &mut String, shape: &Shape, id: &str, extra: &str) {
    let shape = &canonical_shape(shape);
    match shape {
        Shape::Rect(r) => {
            let _ = write!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"",
                fmt_num(r.x),
                fmt_num(r.y),
                fmt_num(r.w),
                fmt_num(r.h)
            );
        }
        Shape::RotatedRect {
            x,
            y,
            w,
            h,
            angle_deg,
        } => {
            let (x, y, w, h) = (*x, *y, *w, *h);
            let _ = write!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" transform=\"rotate({} {} {})\"",
                fmt_num(x),
                fmt_num(y),
                fmt_num(w),
                fmt_num(h),
                fmt_num(*angle_deg),
                fmt_num(x + w / 2.0),
                fmt_num(y + h / 2.0)
            );
        }
        Shape::Ellipse { cx, cy, rx, ry } => {
            let _ = write!(
                out,
                "<ellipse cx=\"{}\" cy=\"{}\" rx=\"{}\" ry=\"{}\"",
                fmt_num(*cx),
                fmt_num(*cy),
                fmt_num(*rx),
                fmt_num(*ry)
            );
        }
        Shape::Path { .. } => {
            let _ = write!(out, "<path d=\"{}\"", path_data(shape));
        }
    }
    if !id.is_empty() {
        let _ = write!(out, " id=\"{}\"", id);
    }
    if !extra.is_empty() {
        out.push(' ');
        out.push_str(extra);
    }
    out.push_str("/>");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{CubicSegment, Point};
    use crate::types::{Canvas, ElementCategory};
    use alloc::vec;

    #[test]
    fn single_text_rect() {
        let mut t = LayoutTree::new(Canvas::new(513, 750).unwrap());
        t.elements
            .push(TreeNode::leaf(ElementCategory::TEXT, Shape::rect(10.0, 20.0, 100.0, 30.0)));
        assert_eq!(
            serialize_tree(&t),
            "<svg width=\"513\" height=\"750\" xmlns=\"http://www.w3.org/2000/svg\"><rect x=\"10\" y=\"20\" width=\"100\" height=\"30\" id=\"text_0\"/></svg>"
        );
    }

    #[test]
    fn tiny_dimensions_match_canonical_form() {
        let mut t = LayoutTree::new(Canvas::new(10, 10).unwrap());
        t.elements
            .push(TreeNode::leaf(ElementCategory::TEXT, Shape::rect(0.0, 0.0, 0.001, 1.0)));
        let s = serialize_tree(&t);
        assert!(s.contains("width=\"0.01\""), "{s}");
        assert_eq!(crate::svg::parse_tree(&s, None).unwrap(), crate::svg::canonicalize(&t));
    }

    #[test]
    fn empty_tree() {
        let t = LayoutTree::new(Canvas::new(100, 100).unwrap());
        assert_eq!(
            serialize_tree(&t),
            "<svg width=\"100\" height=\"100\" xmlns=\"http://www.w3.org/2000/svg\"></svg>"
        );
    }

    #[test]
    fn numbers_are_short() {
        assert_eq!(fmt_num(10.0), "10");
        assert_eq!(fmt_num(10.5), "10.5");
        assert_eq!(fmt_num(10.256), "10.26");
        assert_eq!(fmt_num(-0.001), "0");
        assert_eq!(fmt_num(-1.23456), "-1.23");
    }

    #[test]
    fn every_shape_kind() {
        let mut t = LayoutTree::new(Canvas::new(200, 200).unwrap());
        t.intents.push(Polygon(vec![
            Point::new(0.0, 0.0),
            Point::new(50.5, 0.0),
            Point::new(50.5, 40.0),
        ]));
        t.elements.push(TreeNode::leaf(
            ElementCategory::text(crate::TextVariant::Rotated),
            Shape::RotatedRect {
                x: 10.0,
                y: 10.0,
                w: 40.0,
                h: 20.0,
                angle_deg: -30.0,
            },
        ));
        t.elements.push(TreeNode::leaf(
            ElementCategory::EMBELLISHMENT,
            Shape::Ellipse {
                cx: 100.0,
                cy: 100.0,
                rx: 20.0,
                ry: 10.0,
            },
        ));
        t.elements.push(TreeNode::leaf(
            ElementCategory::text(crate::TextVariant::Curve),
            Shape::Path {
                start: Point::new(0.0, 150.0),
                segments: vec![CubicSegment::new(
                    Point::new(50.0, 100.0),
                    Point::new(100.0, 200.0),
                    Point::new(150.0, 150.0),
                )],
                closed: true,
            },
        ));
        assert_eq!(
            serialize_tree(&t),
            concat!(
                "<svg width=\"200\" height=\"200\" xmlns=\"http://www.w3.org/2000/svg\">",
                "<polygon points=\"0,0 50.5,0 50.5,40\"/>",
                "<rect x=\"10\" y=\"10\" width=\"40\" height=\"20\" transform=\"rotate(-30 30 20)\" id=\"textr_0\"/>",
                "<ellipse cx=\"100\" cy=\"100\" rx=\"20\" ry=\"10\" id=\"embellishment_1\"/>",
                "<path d=\"M 0 150 C 50 100 100 200 150 150 Z\" id=\"textc_2\"/>",
                "</svg>"
            )
        );
    }

    #[test]
    fn nested_group_is_wrapped() {
        let mut t = LayoutTree::new(Canvas::new(300, 300).unwrap());
        t.elements.push(TreeNode::Group {
            x: 10.0,
            y: 10.0,
            children: vec![
                TreeNode::leaf(ElementCategory::UNDERLAY, Shape::rect(0.0, 0.0, 100.0, 50.0)),
                TreeNode::leaf(ElementCategory::TEXT, Shape::rect(2.0, 2.0, 96.0, 46.0)),
            ],
        });
        t.elements.push(TreeNode::Group {
            x: 0.0,
            y: 0.0,
            children: vec![],
        });
        let s = serialize_tree(&t);
        assert!(s.contains("<svg x=\"10\" y=\"10\"><rect x=\"0\" y=\"0\" width=\"100\" height=\"50\" id=\"underlay_0\"/><rect x=\"2\" y=\"2\" width=\"96\" height=\"46\" id=\"text_1\"/></svg>"));
        assert!(!s.contains("<svg x=\"0\""));
    }
}
