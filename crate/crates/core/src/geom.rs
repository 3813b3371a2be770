//! Element geometry: points, boxes, the five poster shape kinds, and
//! curve flattening.

use alloc::vec::Vec;

use crate::math;

/// Flatness bound, in pixels, used whenever curves are turned into polylines.
pub const FLATTEN_TOLERANCE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(from = "[f64; 2]", into = "[f64; 2]"))]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn translate(self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }

    pub fn distance(self, other: Point) -> f64 {
        math::hypot(self.x - other.x, self.y - other.y)
    }

    fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Axis-aligned box `(x, y, w, h)` in pixels, top-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_extents(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(x0, y0, x1 - x0, y1 - y0)
    }

    #[inline]
    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    #[inline]
    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        if self.w <= 0.0 || self.h <= 0.0 {
            0.0
        } else {
            self.w * self.h
        }
    }

    pub fn center(&self) -> Point {
        Point::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn intersection_area(&self, other: &Rect) -> f64 {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    /// Intersection over union; 0 when both boxes are empty.
    pub fn iou(&self, other: &Rect) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x < other.right()
            && other.x < self.right()
            && self.y < other.bottom()
            && other.y < self.bottom()
    }

    pub fn inflate(&self, by: f64) -> Rect {
        Rect::new(self.x - by, self.y - by, self.w + 2.0 * by, self.h + 2.0 * by)
    }

    /// Tightest box around a non-empty point set.
    pub fn enclosing<I: IntoIterator<Item = Point>>(points: I) -> Option<Rect> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
        for p in it {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        Some(Rect::from_extents(x0, y0, x1, y1))
    }
}

/// One cubic Bézier segment; its start is the previous segment's end.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CubicSegment {
    pub c1: Point,
    pub c2: Point,
    pub end: Point,
}

impl CubicSegment {
    pub const fn new(c1: Point, c2: Point, end: Point) -> Self {
        Self { c1, c2, end }
    }

    /// A straight line expressed as a cubic.
    pub fn line(from: Point, to: Point) -> Self {
        Self::new(from.lerp(to, 1.0 / 3.0), from.lerp(to, 2.0 / 3.0), to)
    }

    fn translate(self, dx: f64, dy: f64) -> Self {
        Self::new(
            self.c1.translate(dx, dy),
            self.c2.translate(dx, dy),
            self.end.translate(dx, dy),
        )
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ShapeError {
    #[error("shape dimension must be positive and finite, got {0}")]
    NonPositiveDimension(f64),
    #[error("shape coordinate is not finite")]
    NonFinite,
    #[error("rotation angle {0} outside (-180, 180]")]
    AngleOutOfRange(f64),
    #[error("path needs at least one segment")]
    EmptyPath,
}

/// Element geometry.
///
/// Vertical text shares the `Rect` geometry; the distinction lives in the
/// element category. `RotatedRect` rotates about the rect center.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Shape {
    Rect(Rect),
    RotatedRect {
        x: f64,
        y: f64,
        w: f64,
        h: f64,
        angle_deg: f64,
    },
    Ellipse {
        cx: f64,
        cy: f64,
        rx: f64,
        ry: f64,
    },
    Path {
        start: Point,
        segments: Vec<CubicSegment>,
        #[cfg_attr(feature = "serde", serde(default))]
        closed: bool,
    },
}

fn positive(v: f64) -> Result<(), ShapeError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ShapeError::NonPositiveDimension(v))
    }
}

fn finite(vals: &[f64]) -> Result<(), ShapeError> {
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ShapeError::NonFinite)
    }
}

impl Shape {
    pub fn rect(x: f64, y: f64, w: f64, h: f64) -> Self {
        Shape::Rect(Rect::new(x, y, w, h))
    }

    pub fn validate(&self) -> Result<(), ShapeError> {
        match self {
            Shape::Rect(r) => {
                finite(&[r.x, r.y])?;
                positive(r.w)?;
                positive(r.h)
            }
            Shape::RotatedRect {
                x,
                y,
                w,
                h,
                angle_deg,
            } => {
                finite(&[*x, *y])?;
                positive(*w)?;
                positive(*h)?;
                if !(angle_deg.is_finite() && *angle_deg > -180.0 && *angle_deg <= 180.0) {
                    return Err(ShapeError::AngleOutOfRange(*angle_deg));
                }
                Ok(())
            }
            Shape::Ellipse { cx, cy, rx, ry } => {
                finite(&[*cx, *cy])?;
                positive(*rx)?;
                positive(*ry)
            }
            Shape::Path {
                start, segments, ..
            } => {
                if segments.is_empty() {
                    return Err(ShapeError::EmptyPath);
                }
                finite(&[start.x, start.y])?;
                for s in segments {
                    finite(&[s.c1.x, s.c1.y, s.c2.x, s.c2.y, s.end.x, s.end.y])?;
                }
                Ok(())
            }
        }
    }

    /// Tightest axis-aligned box containing the shape.
    ///
    /// Paths use the extrema of the curve flattened at
    /// [`FLATTEN_TOLERANCE`].
    pub fn bounding_box(&self) -> Rect {
        match self {
            Shape::Rect(r) => *r,
            Shape::RotatedRect { .. } => {
                Rect::enclosing(self.rotated_corners().unwrap_or_default()).unwrap_or_default()
            }
            Shape::Ellipse { cx, cy, rx, ry } => Rect::new(cx - rx, cy - ry, 2.0 * rx, 2.0 * ry),
            Shape::Path { .. } => Rect::enclosing(self.outline(FLATTEN_TOLERANCE)).unwrap_or_default(),
        }
    }

    /// Corners of a rotated rect in drawing order; `None` for other shapes.
    pub fn rotated_corners(&self) -> Option<[Point; 4]> {
        let Shape::RotatedRect {
            x,
            y,
            w,
            h,
            angle_deg,
        } = *self
        else {
            return None;
        };
        let (s, c) = math::sin_cos_deg(angle_deg);
        let (cx, cy) = (x + w / 2.0, y + h / 2.0);
        let rot = |px: f64, py: f64| {
            let (dx, dy) = (px - cx, py - cy);
            Point::new(cx + dx * c - dy * s, cy + dx * s + dy * c)
        };
        Some([rot(x, y), rot(x + w, y), rot(x + w, y + h), rot(x, y + h)])
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Shape {
        match self {
            Shape::Rect(r) => Shape::Rect(Rect::new(r.x + dx, r.y + dy, r.w, r.h)),
            Shape::RotatedRect {
                x,
                y,
                w,
                h,
                angle_deg,
            } => Shape::RotatedRect {
                x: x + dx,
                y: y + dy,
                w: *w,
                h: *h,
                angle_deg: *angle_deg,
            },
            Shape::Ellipse { cx, cy, rx, ry } => Shape::Ellipse {
                cx: cx + dx,
                cy: cy + dy,
                rx: *rx,
                ry: *ry,
            },
            Shape::Path {
                start,
                segments,
                closed,
            } => Shape::Path {
                start: start.translate(dx, dy),
                segments: segments.iter().map(|s| s.translate(dx, dy)).collect(),
                closed: *closed,
            },
        }
    }

    /// Applies `p -> origin + (p - origin) * (sx, sy)` to every coordinate.
    ///
    /// Rotated rects scale their width and height by the mean factor so the
    /// rotation stays rigid.
    pub fn scale_about(&self, origin: Point, sx: f64, sy: f64) -> Shape {
        let map = |p: Point| Point::new(origin.x + (p.x - origin.x) * sx, origin.y + (p.y - origin.y) * sy);
        match self {
            Shape::Rect(r) => {
                let p = map(Point::new(r.x, r.y));
                Shape::Rect(Rect::new(p.x, p.y, r.w * sx, r.h * sy))
            }
            Shape::RotatedRect {
                x,
                y,
                w,
                h,
                angle_deg,
            } => {
                let k = sx.min(sy);
                let c = map(Point::new(x + w / 2.0, y + h / 2.0));
                let (nw, nh) = (w * k, h * k);
                Shape::RotatedRect {
                    x: c.x - nw / 2.0,
                    y: c.y - nh / 2.0,
                    w: nw,
                    h: nh,
                    angle_deg: *angle_deg,
                }
            }
            Shape::Ellipse { cx, cy, rx, ry } => {
                let c = map(Point::new(*cx, *cy));
                Shape::Ellipse {
                    cx: c.x,
                    cy: c.y,
                    rx: rx * sx,
                    ry: ry * sy,
                }
            }
            Shape::Path {
                start,
                segments,
                closed,
            } => Shape::Path {
                start: map(*start),
                segments: segments
                    .iter()
                    .map(|s| CubicSegment::new(map(s.c1), map(s.c2), map(s.end)))
                    .collect(),
                closed: *closed,
            },
        }
    }

    /// Polyline approximation of the shape outline with chord error at
    /// most `tolerance`. Closed outlines repeat their first point at the end.
    pub fn outline(&self, tolerance: f64) -> Vec<Point> {
        match self {
            Shape::Rect(r) => {
                let mut v = Vec::with_capacity(5);
                v.extend_from_slice(&[
                    Point::new(r.x, r.y),
                    Point::new(r.right(), r.y),
                    Point::new(r.right(), r.bottom()),
                    Point::new(r.x, r.bottom()),
                    Point::new(r.x, r.y),
                ]);
                v
            }
            Shape::RotatedRect { .. } => {
                let c = self.rotated_corners().unwrap_or_default();
                let mut v = Vec::with_capacity(5);
                v.extend_from_slice(&c);
                v.push(c[0]);
                v
            }
            Shape::Ellipse { cx, cy, rx, ry } => flatten_ellipse(*cx, *cy, *rx, *ry, tolerance),
            Shape::Path {
                start,
                segments,
                closed,
            } => {
                let mut pts = Vec::new();
                pts.push(*start);
                let mut from = *start;
                for seg in segments {
                    flatten_cubic(from, *seg, tolerance, &mut pts);
                    from = seg.end;
                }
                if *closed && from != *start {
                    pts.push(*start);
                }
                pts
            }
        }
    }

    /// `true` when the shape is drawn as a filled region in element maps
    /// (rects), `false` when it is stroked (ellipses and paths).
    pub fn is_filled(&self) -> bool {
        matches!(self, Shape::Rect(_) | Shape::RotatedRect { .. })
    }
}

/// Appends the flattened points of `seg` (excluding `from`) to `out`.
pub fn flatten_cubic(from: Point, seg: CubicSegment, tolerance: f64, out: &mut Vec<Point>) {
    subdivide(from, seg.c1, seg.c2, seg.end, tolerance.max(1e-6), 0, out);
}

fn subdivide(p0: Point, p1: Point, p2: Point, p3: Point, tol: f64, depth: u32, out: &mut Vec<Point>) {
    // Control points within `tol` of the chord bound the curve's deviation.
    if depth >= 18 || (dist_to_segment(p1, p0, p3) <= tol && dist_to_segment(p2, p0, p3) <= tol) {
        out.push(p3);
        return;
    }
    let p01 = p0.lerp(p1, 0.5);
    let p12 = p1.lerp(p2, 0.5);
    let p23 = p2.lerp(p3, 0.5);
    let p012 = p01.lerp(p12, 0.5);
    let p123 = p12.lerp(p23, 0.5);
    let mid = p012.lerp(p123, 0.5);
    subdivide(p0, p01, p012, mid, tol, depth + 1, out);
    subdivide(mid, p123, p23, p3, tol, depth + 1, out);
}

/// Evaluates a cubic at parameter `t`.
pub fn cubic_point(p0: Point, seg: &CubicSegment, t: f64) -> Point {
    let u = 1.0 - t;
    let (a, b, c, d) = (u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t);
    Point::new(
        a * p0.x + b * seg.c1.x + c * seg.c2.x + d * seg.end.x,
        a * p0.y + b * seg.c1.y + c * seg.c2.y + d * seg.end.y,
    )
}

/// Distance from `p` to the segment `a`–`b`.
pub fn dist_to_segment(p: Point, a: Point, b: Point) -> f64 {
    math::sqrt(dist2_to_segment(p, a, b))
}

#[inline]
pub fn dist2_to_segment(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a.x + t * dx - p.x, a.y + t * dy - p.y);
    qx * qx + qy * qy
}

fn flatten_ellipse(cx: f64, cy: f64, rx: f64, ry: f64, tol: f64) -> Vec<Point> {
    let r = rx.max(ry);
    // Sagitta of a chord spanning angle `2π/n` on radius `r` is r(1 - cos(π/n)).
    let n = if r <= tol {
        8
    } else {
        let half = libm::acos(1.0 - tol / r);
        (math::ceil(core::f64::consts::PI / half) as usize).clamp(8, 4096)
    };
    let mut pts = Vec::with_capacity(n + 1);
    for i in 0..n {
        let t = core::f64::consts::TAU * i as f64 / n as f64;
        let (s, c) = libm::sincos(t);
        pts.push(Point::new(cx + rx * c, cy + ry * s));
    }
    pts.push(pts[0]);
    pts
}

/// Shoelace signed area; positive for counter-clockwise in a y-up frame.
pub fn signed_area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        acc += a.x * b.y - b.x * a.y;
    }
    acc / 2.0
}
