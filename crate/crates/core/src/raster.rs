//! Deterministic CPU rasterization and binary map algebra.
//!
//! A pixel belongs to a shape when its center is covered; there is no
//! anti-aliasing. Rects are filled, ellipses and paths are stroked with a
//! fixed-width pen measured in output pixels.

use alloc::vec;
use alloc::vec::Vec;

use crate::geom::{dist2_to_segment, Point, Shape, FLATTEN_TOLERANCE};
use crate::math;
use crate::types::{Canvas, Layout, LayoutElement, Polygon};

/// Output width of element maps used for every content metric.
pub const ELEMENT_MAP_WIDTH: u32 = 513;
/// Pen width for stroked shapes, in output pixels.
pub const STROKE_WIDTH: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RasterError {
    #[error("map dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("map has {got} values, expected {expected}")]
    BadLength { got: usize, expected: usize },
    #[error("map value {0} outside [0, 1]")]
    ValueOutOfRange(f32),
    #[error("map must be at least 1x1")]
    Empty,
}

/// Grayscale map with values in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayMap {
    width: u32,
    height: u32,
    values: Vec<f32>,
}

impl GrayMap {
    pub fn new(width: u32, height: u32, values: Vec<f32>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::Empty);
        }
        let expected = width as usize * height as usize;
        if values.len() != expected {
            return Err(RasterError::BadLength {
                got: values.len(),
                expected,
            });
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(RasterError::ValueOutOfRange(*v));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: u32, height: u32, value: f32) -> Self {
        Self {
            width,
            height,
            values: vec![value.clamp(0.0, 1.0); width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    /// Nearest-neighbour resampling to a new size.
    pub fn resize_nearest(&self, width: u32, height: u32) -> GrayMap {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let mut values = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            let sy = (((y as u64 * 2 + 1) * self.height as u64) / (height as u64 * 2)) as u32;
            for x in 0..width {
                let sx = (((x as u64 * 2 + 1) * self.width as u64) / (width as u64 * 2)) as u32;
                values.push(self.get(sx.min(self.width - 1), sy.min(self.height - 1)));
            }
        }
        GrayMap {
            width,
            height,
            values,
        }
    }
}

impl From<&BinMap> for GrayMap {
    fn from(b: &BinMap) -> Self {
        GrayMap {
            width: b.width,
            height: b.height,
            values: b.bits.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect(),
        }
    }
}

/// Binary map, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinMap {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinMap {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self, RasterError> {
        let expected = width as usize * height as usize;
        if bits.len() != expected {
            return Err(RasterError::BadLength {
                got: bits.len(),
                expected,
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    fn check_dims(&self, other: &BinMap) -> Result<(), RasterError> {
        if self.width != other.width || self.height != other.height {
            return Err(RasterError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    fn zip(&self, other: &BinMap, f: impl Fn(bool, bool) -> bool) -> Result<BinMap, RasterError> {
        self.check_dims(other)?;
        Ok(BinMap {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    pub fn and(&self, other: &BinMap) -> Result<BinMap, RasterError> {
        self.zip(other, |a, b| a && b)
    }

    pub fn or(&self, other: &BinMap) -> Result<BinMap, RasterError> {
        self.zip(other, |a, b| a || b)
    }

    pub fn not(&self) -> BinMap {
        BinMap {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn or_assign(&mut self, other: &BinMap) -> Result<(), RasterError> {
        self.check_dims(other)?;
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
        Ok(())
    }

    /// `|self ∧ other|` without allocating.
    pub fn and_count(&self, other: &BinMap) -> Result<usize, RasterError> {
        self.check_dims(other)?;
        Ok(self.bits.iter().zip(&other.bits).filter(|(a, b)| **a && **b).count())
    }

    /// Intersection over union; 0 when both maps are empty.
    pub fn iou(&self, other: &BinMap) -> Result<f64, RasterError> {
        self.check_dims(other)?;
        let (mut inter, mut union) = (0usize, 0usize);
        for (a, b) in self.bits.iter().zip(&other.bits) {
            inter += (*a && *b) as usize;
            union += (*a || *b) as usize;
        }
        Ok(if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        })
    }

    /// Set pixels in columns `[x0, x1)` of row `y`, clipped to the map.
    fn fill_span(&mut self, y: i64, x0: i64, x1: i64) {
        if y < 0 || y >= self.height as i64 {
            return;
        }
        let (a, b) = (x0.max(0), x1.min(self.width as i64));
        if a >= b {
            return;
        }
        let row = y as usize * self.width as usize;
        for v in &mut self.bits[row + a as usize..row + b as usize] {
            *v = true;
        }
    }
}

/// `bit = value >= threshold`.
pub fn binarize(map: &GrayMap, threshold: f32) -> BinMap {
    BinMap {
        width: map.width,
        height: map.height,
        bits: map.values.iter().map(|v| *v >= threshold).collect(),
    }
}

/// Output dimensions and scale for rendering `canvas` at `target_width`.
pub fn output_size(canvas: Canvas, target_width: u32) -> (u32, u32, f64) {
    let w = target_width.max(1);
    let h = math::round(w as f64 * canvas.height as f64 / canvas.width as f64).max(1.0) as u32;
    (w, h, w as f64 / canvas.width as f64)
}

/// Union of every element, scaled uniformly to `target_width`.
pub fn render_element_map(layout: &Layout, target_width: u32) -> BinMap {
    render_elements(layout.canvas, layout.elements.iter(), target_width)
}

/// Union of an arbitrary subset of elements.
pub fn render_elements<'a>(
    canvas: Canvas,
    elements: impl IntoIterator<Item = &'a LayoutElement>,
    target_width: u32,
) -> BinMap {
    let (w, h, s) = output_size(canvas, target_width);
    let mut map = BinMap::new(w, h);
    for e in elements {
        draw_shape(&mut map, &e.shape, s);
    }
    map
}

/// One layer per non-underlay element, in element order.
pub fn render_layers(layout: &Layout, target_width: u32) -> Vec<BinMap> {
    let (w, h, s) = output_size(layout.canvas, target_width);
    layout
        .non_underlays()
        .map(|e| {
            let mut m = BinMap::new(w, h);
            draw_shape(&mut m, &e.shape, s);
            m
        })
        .collect()
}

/// Even-odd fill of each polygon, unioned, at `target_width`.
pub fn rasterize_polygons(polygons: &[Polygon], canvas: Canvas, target_width: u32) -> BinMap {
    let (w, h, s) = output_size(canvas, target_width);
    let mut map = BinMap::new(w, h);
    for poly in polygons {
        let pts: Vec<Point> = poly.0.iter().map(|p| Point::new(p.x * s, p.y * s)).collect();
        fill_polygon(&mut map, &pts);
    }
    map
}

/// Rasterizes `shape` (canvas coordinates) into `map` with scale `s`.
pub fn draw_shape(map: &mut BinMap, shape: &Shape, s: f64) {
    let scaled = shape.scale_about(Point::default(), s, s);
    match &scaled {
        Shape::Rect(r) => {
            let x0 = math::ceil(r.x - 0.5) as i64;
            let x1 = math::ceil(r.right() - 0.5) as i64;
            let y0 = math::ceil(r.y - 0.5) as i64;
            let y1 = math::ceil(r.bottom() - 0.5) as i64;
            let (y0, y1) = (y0.max(0), y1.min(map.height as i64));
            for y in y0..y1 {
                map.fill_span(y, x0, x1);
            }
        }
        Shape::RotatedRect { .. } => {
            if let Some(c) = scaled.rotated_corners() {
                fill_polygon(map, &c);
            }
        }
        Shape::Ellipse { .. } | Shape::Path { .. } => {
            let pts = scaled.outline(FLATTEN_TOLERANCE);
            stroke_polyline(map, &pts, STROKE_WIDTH / 2.0);
        }
    }
}

/// Even-odd scanline fill of a closed polygon given in output pixels.
pub fn fill_polygon(map: &mut BinMap, pts: &[Point]) {
    if pts.len() < 3 {
        return;
    }
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        ymin = ymin.min(p.y);
        ymax = ymax.max(p.y);
    }
    if !ymin.is_finite() || !ymax.is_finite() {
        return;
    }
    let row0 = (math::ceil(ymin - 0.5) as i64).max(0);
    let row1 = (math::ceil(ymax - 0.5) as i64).min(map.height as i64);
    let mut xs: Vec<f64> = Vec::new();
    for row in row0..row1 {
        let yc = row as f64 + 0.5;
        xs.clear();
        for i in 0..pts.len() {
            let a = pts[i];
            let b = pts[(i + 1) % pts.len()];
            // half-open in y so shared vertices count once
            if (a.y <= yc && yc < b.y) || (b.y <= yc && yc < a.y) {
                let t = (yc - a.y) / (b.y - a.y);
                xs.push(a.x + t * (b.x - a.x));
            }
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        for pair in xs.chunks_exact(2) {
            let x0 = math::ceil(pair[0] - 0.5) as i64;
            let x1 = math::ceil(pair[1] - 0.5) as i64;
            map.fill_span(row, x0, x1);
        }
    }
}

/// Marks every pixel whose center lies within `radius` of the polyline.
pub fn stroke_polyline(map: &mut BinMap, pts: &[Point], radius: f64) {
    let r2 = radius * radius;
    let mut stamp = |a: Point, b: Point| {
        let x0 = (math::floor(a.x.min(b.x) - radius) as i64).max(0);
        let x1 = (math::ceil(a.x.max(b.x) + radius) as i64).min(map.width as i64 - 1);
        let y0 = (math::floor(a.y.min(b.y) - radius) as i64).max(0);
        let y1 = (math::ceil(a.y.max(b.y) + radius) as i64).min(map.height as i64 - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let c = Point::new(x as f64 + 0.5, y as f64 + 0.5);
                if dist2_to_segment(c, a, b) <= r2 {
                    map.set(x as u32, y as u32, true);
                }
            }
        }
    };
    match pts.len() {
        0 => {}
        1 => stamp(pts[0], pts[0]),
        _ => {
            for w in pts.windows(2) {
                if w.iter().all(|p| p.x.is_finite() && p.y.is_finite()) {
                    stamp(w[0], w[1]);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{ElementCategory, LayoutElement};

    fn canvas(w: u32, h: u32) -> Canvas {
        Canvas::new(w, h).unwrap()
    }

    #[test]
    fn empty_layout_renders_blank() {
        let m = render_element_map(&Layout::new(canvas(100, 100), vec![]), 100);
        assert_eq!((m.width(), m.height()), (100, 100));
        assert_eq!(m.count(), 0);
    }

    #[test]
    fn full_rect_renders_full() {
        let l = Layout::new(
            canvas(100, 100),
            vec![LayoutElement::new(ElementCategory::TEXT, Shape::rect(0.0, 0.0, 100.0, 100.0))],
        );
        assert_eq!(render_element_map(&l, 100).count(), 100 * 100);
    }

    #[test]
    fn height_follows_aspect() {
        let (w, h, s) = output_size(canvas(1026, 1500), ELEMENT_MAP_WIDTH);
        assert_eq!((w, h), (513, 750));
        assert_eq!(s, 0.5);
    }

    #[test]
    fn layers_skip_underlays_and_union_matches() {
        let l = Layout::new(
            canvas(60, 40),
            vec![
                LayoutElement::new(ElementCategory::UNDERLAY, Shape::rect(0.0, 0.0, 60.0, 40.0)),
                LayoutElement::new(ElementCategory::TEXT, Shape::rect(1.0, 1.0, 10.0, 10.0)),
                LayoutElement::new(ElementCategory::LOGO, Shape::rect(20.0, 5.0, 10.0, 10.0)),
                LayoutElement::new(
                    ElementCategory::EMBELLISHMENT,
                    Shape::Ellipse {
                        cx: 40.0,
                        cy: 20.0,
                        rx: 8.0,
                        ry: 6.0,
                    },
                ),
            ],
        );
        let layers = render_layers(&l, 60);
        assert_eq!(layers.len(), 3);
        let mut union = BinMap::new(60, 40);
        for layer in &layers {
            union.or_assign(layer).unwrap();
        }
        let direct = render_elements(l.canvas, l.non_underlays(), 60);
        assert_eq!(union, direct);
        // disjoint rects give disjoint layers
        assert_eq!(layers[0].and_count(&layers[1]).unwrap(), 0);
    }

    #[test]
    fn binarize_checkerboard_is_half() {
        let vals: Vec<f32> = (0..64)
            .map(|i| if (i % 8 + i / 8) % 2 == 0 { 0.4 } else { 0.6 })
            .collect();
        let g = GrayMap::new(8, 8, vals).unwrap();
        assert_eq!(binarize(&g, 0.5).count(), 32);
        assert_eq!(binarize(&GrayMap::filled(4, 4, 0.0), 0.5).count(), 0);
        assert_eq!(binarize(&GrayMap::filled(4, 4, 1.0), 0.5).count(), 16);
    }

    #[test]
    fn polygon_fill_full_and_empty() {
        let c = canvas(50, 30);
        let full = Polygon(vec![
            Point::new(0.0, 0.0),
            Point::new(50.0, 0.0),
            Point::new(50.0, 30.0),
            Point::new(0.0, 30.0),
        ]);
        assert_eq!(rasterize_polygons(&[full], c, 50).count(), 1500);
        assert_eq!(rasterize_polygons(&[], c, 50).count(), 0);
    }

    #[test]
    fn gray_map_rejects_out_of_range() {
        assert_eq!(
            GrayMap::new(1, 1, vec![1.5]),
            Err(RasterError::ValueOutOfRange(1.5))
        );
        assert!(GrayMap::new(2, 1, vec![0.5]).is_err());
    }

    #[test]
    fn resize_nearest_keeps_blocks() {
        let g = GrayMap::new(2, 1, vec![0.0, 1.0]).unwrap();
        let r = g.resize_nearest(4, 2);
        assert_eq!(r.values(), &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
    }
}
