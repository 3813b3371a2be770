use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::path_data::parse_path_data;
use super::xml::{attr, Scanner, Token};
use super::{category_from_id, leaf_id, DialectError, DEFAULT_MAX_DEPTH};
use crate::geom::{Point, Rect, Shape};
use crate::math;
use crate::types::{Canvas, ElementCategory, LayoutTree, Polygon, TreeNode};

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    /// Canvas to use instead of the root element's width/height.
    pub expected_canvas: Option<Canvas>,
    /// Maximum number of nested `<svg>` elements, including the root.
    pub max_depth: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            expected_canvas: None,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome {
    pub tree: LayoutTree,
    /// Skipped or approximated constructs.
    pub warnings: usize,
}

/// Parses the first `<svg>` block in `text` with default options.
pub fn parse_tree(text: &str, expected_canvas: Option<Canvas>) -> Result<LayoutTree, DialectError> {
    parse_tree_with(
        text,
        ParseOptions {
            expected_canvas,
            ..ParseOptions::default()
        },
    )
    .map(|o| o.tree)
}

enum Frame {
    Group { x: f64, y: f64, children: Vec<TreeNode> },
    /// Unknown container; its children belong to the enclosing group.
    Transparent(String),
}

fn malformed(msg: String) -> DialectError {
    DialectError::MalformedGeometry(msg)
}

fn num(attrs: &[(&str, &str)], key: &str, default: Option<f64>) -> Result<f64, DialectError> {
    match attr(attrs, key) {
        None => default.ok_or_else(|| malformed(format!("missing attribute {key}"))),
        Some(raw) => {
            let t = raw.trim();
            let t = t.strip_suffix("px").unwrap_or(t).trim();
            match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(malformed(format!("attribute {key}={raw:?} is not a number"))),
            }
        }
    }
}

fn dim(attrs: &[(&str, &str)], key: &str) -> Result<f64, DialectError> {
    let v = num(attrs, key, None)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(malformed(format!("attribute {key}={v} must be positive")))
    }
}

fn numbers(s: &str) -> Option<Vec<f64>> {
    s.split(|c: char| c.is_ascii_whitespace() || c == ',' || c == '(' || c == ')')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect()
}

struct Transform {
    dx: f64,
    dy: f64,
    /// (angle, pivot)
    rotate: Option<(f64, Point)>,
    unsupported: bool,
}

fn parse_transform(s: &str) -> Transform {
    let mut t = Transform {
        dx: 0.0,
        dy: 0.0,
        rotate: None,
        unsupported: false,
    };
    let mut rest = s.trim();
    while !rest.is_empty() {
        let Some(open) = rest.find('(') else {
            t.unsupported = true;
            break;
        };
        let Some(close) = rest[open..].find(')').map(|c| c + open) else {
            t.unsupported = true;
            break;
        };
        let name = rest[..open].trim().trim_start_matches(',').trim();
        let args = numbers(&rest[open + 1..close]);
        match (name, args.as_deref()) {
            ("rotate", Some([a])) if t.rotate.is_none() => t.rotate = Some((*a, Point::default())),
            ("rotate", Some([a, cx, cy])) if t.rotate.is_none() => {
                t.rotate = Some((*a, Point::new(*cx, *cy)))
            }
            ("translate", Some([x])) if t.rotate.is_none() => t.dx += x,
            ("translate", Some([x, y])) if t.rotate.is_none() => {
                t.dx += x;
                t.dy += y;
            }
            _ => t.unsupported = true,
        }
        rest = rest[close + 1..].trim_start();
    }
    t
}

struct Parser {
    warnings: usize,
    leaf_index: usize,
    seen_element: bool,
    intents: Vec<Polygon>,
}

impl Parser {
    fn leaf(&mut self, name: &str, attrs: &[(&str, &str)]) -> Result<Option<TreeNode>, DialectError> {
        let shape = match name {
            "rect" => {
                let x = num(attrs, "x", Some(0.0))?;
                let y = num(attrs, "y", Some(0.0))?;
                let w = dim(attrs, "width")?;
                let h = dim(attrs, "height")?;
                match attr(attrs, "transform") {
                    None => Shape::Rect(Rect::new(x, y, w, h)),
                    Some(raw) => {
                        let t = parse_transform(raw);
                        if t.unsupported {
                            self.warnings += 1;
                        }
                        let (x, y) = (x + t.dx, y + t.dy);
                        match t.rotate {
                            None => Shape::Rect(Rect::new(x, y, w, h)),
                            Some((angle, pivot)) => {
                                let c = Point::new(x + w / 2.0, y + h / 2.0);
                                let (mut nx, mut ny) = (x, y);
                                // canonical output pivots on the center up to rounding
                                if math::abs(pivot.x - c.x) > 0.006 || math::abs(pivot.y - c.y) > 0.006 {
                                    let (s, co) = math::sin_cos_deg(angle);
                                    let (vx, vy) = (c.x - pivot.x, c.y - pivot.y);
                                    let moved = Point::new(pivot.x + vx * co - vy * s, pivot.y + vx * s + vy * co);
                                    nx += moved.x - c.x;
                                    ny += moved.y - c.y;
                                }
                                Shape::RotatedRect {
                                    x: nx,
                                    y: ny,
                                    w,
                                    h,
                                    angle_deg: math::normalize_angle(angle),
                                }
                            }
                        }
                    }
                }
            }
            "ellipse" => Shape::Ellipse {
                cx: num(attrs, "cx", Some(0.0))?,
                cy: num(attrs, "cy", Some(0.0))?,
                rx: dim(attrs, "rx")?,
                ry: dim(attrs, "ry")?,
            },
            "circle" => {
                let r = dim(attrs, "r")?;
                Shape::Ellipse {
                    cx: num(attrs, "cx", Some(0.0))?,
                    cy: num(attrs, "cy", Some(0.0))?,
                    rx: r,
                    ry: r,
                }
            }
            "path" => {
                let d = attr(attrs, "d").ok_or_else(|| malformed("path without d".to_string()))?;
                let p = parse_path_data(d)?;
                self.warnings += p.warnings;
                Shape::Path {
                    start: p.start,
                    segments: p.segments,
                    closed: p.closed,
                }
            }
            _ => return Ok(None),
        };
        let index = self.leaf_index;
        self.leaf_index += 1;
        self.seen_element = true;
        let (id, category) = match attr(attrs, "id").and_then(|id| category_from_id(id).map(|c| (id, c))) {
            Some((id, c)) => (id.to_string(), c),
            None => {
                self.warnings += 1;
                (leaf_id(ElementCategory::TEXT, index), ElementCategory::TEXT)
            }
        };
        Ok(Some(TreeNode::Leaf {
            id: Some(id),
            category,
            shape,
        }))
    }

    fn polygon(&mut self, attrs: &[(&str, &str)], at_root: bool) {
        if self.seen_element || !at_root {
            self.warnings += 1;
            return;
        }
        let pts = attr(attrs, "points").and_then(numbers).unwrap_or_default();
        let verts: Vec<Point> = pts.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect();
        if !pts.len().is_multiple_of(2) {
            self.warnings += 1;
        }
        match Polygon::new(verts) {
            Ok(p) => self.intents.push(p),
            Err(_) => self.warnings += 1,
        }
    }
}

fn canvas_from_root(attrs: &[(&str, &str)]) -> Option<Canvas> {
    let w = num(attrs, "width", None).ok()?;
    let h = num(attrs, "height", None).ok()?;
    let (w, h) = (math::round(w), math::round(h));
    if w >= 1.0 && h >= 1.0 && w <= u32::MAX as f64 && h <= u32::MAX as f64 {
        Canvas::new(w as u32, h as u32).ok()
    } else {
        None
    }
}

fn push_node(stack: &mut [Frame], root: &mut Vec<TreeNode>, node: TreeNode) {
    for f in stack.iter_mut().rev() {
        if let Frame::Group { children, .. } = f {
            children.push(node);
            return;
        }
    }
    root.push(node);
}

fn svg_depth(stack: &[Frame]) -> usize {
    1 + stack.iter().filter(|f| matches!(f, Frame::Group { .. })).count()
}

/// Parses the first `<svg>` block in `text`.
pub fn parse_tree_with(text: &str, opts: ParseOptions) -> Result<ParseOutcome, DialectError> {
    let mut sc = Scanner::new(text);
    let root_attrs = loop {
        match sc.next_tag() {
            None => return Err(DialectError::NoSvgBlock),
            Some(t) => {
                if let Token::Start {
                    name,
                    attrs,
                    self_closing,
                } = t.token
                {
                    if name.eq_ignore_ascii_case("svg") {
                        if self_closing {
                            break (attrs, true);
                        }
                        break (attrs, false);
                    }
                }
            }
        }
    };
    let (root_attrs, root_closed) = root_attrs;
    let mut p = Parser {
        warnings: 0,
        leaf_index: 0,
        seen_element: false,
        intents: Vec::new(),
    };
    let parsed_canvas = canvas_from_root(&root_attrs);
    let canvas = match (opts.expected_canvas, parsed_canvas) {
        (Some(e), parsed) => {
            if parsed != Some(e) {
                p.warnings += 1;
            }
            e
        }
        (None, Some(c)) => c,
        (None, None) => return Err(malformed("root <svg> lacks a usable width/height".to_string())),
    };
    if opts.max_depth < 1 {
        return Err(DialectError::DepthExceeded(opts.max_depth));
    }

    let mut root: Vec<TreeNode> = Vec::new();
    let mut stack: Vec<Frame> = Vec::new();
    let mut closed = root_closed;
    while !closed {
        let Some(t) = sc.next_tag() else {
            // truncated response: close everything
            p.warnings += 1;
            break;
        };
        match t.token {
            Token::Start {
                name,
                attrs,
                self_closing,
            } => {
                if name.eq_ignore_ascii_case("svg") {
                    if svg_depth(&stack) + 1 > opts.max_depth {
                        return Err(DialectError::DepthExceeded(opts.max_depth));
                    }
                    let x = num(&attrs, "x", Some(0.0))?;
                    let y = num(&attrs, "y", Some(0.0))?;
                    if self_closing {
                        push_node(&mut stack, &mut root, TreeNode::Group { x, y, children: Vec::new() });
                    } else {
                        stack.push(Frame::Group {
                            x,
                            y,
                            children: Vec::new(),
                        });
                    }
                    continue;
                }
                if name == "polygon" {
                    p.polygon(&attrs, stack.iter().all(|f| matches!(f, Frame::Transparent(_))));
                    if !self_closing {
                        stack.push(Frame::Transparent(name.to_string()));
                    }
                    continue;
                }
                match p.leaf(name, &attrs)? {
                    Some(node) => push_node(&mut stack, &mut root, node),
                    None => p.warnings += 1,
                }
                if !self_closing {
                    stack.push(Frame::Transparent(name.to_string()));
                }
            }
            Token::End { name } => {
                let is_svg = name.eq_ignore_ascii_case("svg");
                let matches_frame = |f: &Frame| match f {
                    Frame::Group { .. } => is_svg,
                    Frame::Transparent(n) => n == name,
                };
                let Some(pos) = stack.iter().rposition(matches_frame) else {
                    if is_svg {
                        closed = true;
                    } else {
                        p.warnings += 1;
                    }
                    continue;
                };
                if pos + 1 != stack.len() {
                    p.warnings += 1;
                }
                while stack.len() > pos {
                    pop_frame(&mut stack, &mut root);
                }
            }
        }
    }
    while !stack.is_empty() {
        pop_frame(&mut stack, &mut root);
    }
    Ok(ParseOutcome {
        tree: LayoutTree {
            canvas,
            intents: p.intents,
            elements: root,
        },
        warnings: p.warnings,
    })
}

fn pop_frame(stack: &mut Vec<Frame>, root: &mut Vec<TreeNode>) {
    if let Some(Frame::Group { x, y, children }) = stack.pop() {
        push_node(stack, root, TreeNode::Group { x, y, children });
    }
}
