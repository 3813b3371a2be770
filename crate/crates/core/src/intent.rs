//! Turns a grayscale intent map into `<polygon>`-ready regions.
//!
//! Pipeline: threshold, morphological open then close with a disc,
//! 8-connected component labelling, Moore boundary following of each outer
//! contour, Douglas–Peucker simplification, half-pixel outward offset (the
//! traced contour runs through pixel centers), area filtering and scaling
//! into canvas pixels.

use alloc::vec;
use alloc::vec::Vec;

use crate::geom::{dist2_to_segment, signed_area, Point};
use crate::math;
use crate::raster::{binarize, BinMap, GrayMap};
use crate::types::{Canvas, Polygon};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct IntentVectorizeParams {
    pub threshold: f32,
    pub morph_radius_px: u32,
    /// Douglas–Peucker tolerance in canvas pixels.
    pub simplify_tolerance_px: f64,
    /// Regions smaller than this fraction of the canvas area are dropped.
    pub min_area_fraction: f64,
}

impl Default for IntentVectorizeParams {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            morph_radius_px: 2,
            simplify_tolerance_px: 2.0,
            min_area_fraction: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IntentError {
    #[error("intent map aspect {map:.4} differs from canvas aspect {canvas:.4} by more than 1%")]
    BadAspect { map: f64, canvas: f64 },
    #[error("threshold {0} outside (0, 1)")]
    BadThreshold(f32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorizedIntent {
    pub polygons: Vec<Polygon>,
    /// No pixel reached the threshold.
    pub empty_map: bool,
}

pub fn vectorize_intent(
    map: &GrayMap,
    canvas: Canvas,
    params: &IntentVectorizeParams,
) -> Result<VectorizedIntent, IntentError> {
    if !(params.threshold > 0.0 && params.threshold < 1.0) {
        return Err(IntentError::BadThreshold(params.threshold));
    }
    let map_aspect = map.width() as f64 / map.height() as f64;
    let canvas_aspect = canvas.width as f64 / canvas.height as f64;
    if math::abs(map_aspect - canvas_aspect) > 0.01 * canvas_aspect {
        return Err(IntentError::BadAspect {
            map: map_aspect,
            canvas: canvas_aspect,
        });
    }
    let bin = binarize(map, params.threshold);
    if bin.count() == 0 {
        return Ok(VectorizedIntent {
            polygons: Vec::new(),
            empty_map: true,
        });
    }
    let r = params.morph_radius_px;
    let cleaned = close(&open(&bin, r), r);

    let sx = canvas.width as f64 / map.width() as f64;
    let sy = canvas.height as f64 / map.height() as f64;
    // tolerance in map pixels
    let tol = params.simplify_tolerance_px / sx.max(sy);
    let min_area = params.min_area_fraction * canvas.area();

    let mut polygons = Vec::new();
    for comp in components(&cleaned) {
        let contour = trace_component(&comp, cleaned.width(), cleaned.height());
        let centers: Vec<Point> = contour
            .iter()
            .map(|&(x, y)| Point::new(x as f64 + 0.5, y as f64 + 0.5))
            .collect();
        let simplified = simplify_closed(&centers, tol);
        let outline = if simplified.len() >= 3 && math::abs(signed_area(&simplified)) > 0.0 {
            offset_outward(&simplified, 0.5)
        } else {
            comp.bbox_outline()
        };
        let scaled: Vec<Point> = outline
            .iter()
            .map(|p| {
                Point::new(
                    (p.x * sx).clamp(0.0, canvas.width as f64),
                    (p.y * sy).clamp(0.0, canvas.height as f64),
                )
            })
            .collect();
        let poly = Polygon(scaled);
        if poly.area() >= min_area && poly.0.len() >= 3 {
            polygons.push(poly);
        }
    }
    Ok(VectorizedIntent {
        polygons,
        empty_map: false,
    })
}

/// Erosion (`all = true`) or dilation (`all = false`) with a
/// `(2r+1)²` square, done as two 1-D passes; out-of-bounds neighbours are
/// ignored.
fn morph(m: &BinMap, r: u32, all: bool) -> BinMap {
    if r == 0 {
        return m.clone();
    }
    let r = r as i64;
    let (w, h) = (m.width() as i64, m.height() as i64);
    let pass = |src: &BinMap, horizontal: bool| {
        let mut out = BinMap::new(src.width(), src.height());
        for y in 0..h {
            for x in 0..w {
                let mut inb = (-r..=r).filter_map(|d| {
                    let (nx, ny) = if horizontal { (x + d, y) } else { (x, y + d) };
                    (nx >= 0 && ny >= 0 && nx < w && ny < h).then(|| src.get(nx as u32, ny as u32))
                });
                let v = if all { inb.all(|b| b) } else { inb.any(|b| b) };
                if v {
                    out.set(x as u32, y as u32, true);
                }
            }
        }
        out
    };
    pass(&pass(m, true), false)
}

pub fn open(m: &BinMap, r: u32) -> BinMap {
    morph(&morph(m, r, true), r, false)
}

pub fn close(m: &BinMap, r: u32) -> BinMap {
    morph(&morph(m, r, false), r, true)
}

const DIRS: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

fn dir_of(dx: i64, dy: i64) -> usize {
    DIRS.iter().position(|&d| d == (dx, dy)).unwrap_or(4)
}

/// One 8-connected component.
pub struct Component {
    pub label: u32,
    /// First pixel in raster order.
    pub start: (u32, u32),
    labels: alloc::rc::Rc<Vec<u32>>,
    x0: u32,
    y0: u32,
    x1: u32,
    y1: u32,
}

impl Component {
    fn bbox_outline(&self) -> Vec<Point> {
        let (x0, y0, x1, y1) = (self.x0 as f64, self.y0 as f64, self.x1 as f64 + 1.0, self.y1 as f64 + 1.0);
        vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ]
    }

    pub fn pixel_count(&self) -> usize {
        self.labels.iter().filter(|l| **l == self.label).count()
    }
}

/// 8-connected components in raster order of their first pixel.
pub fn components(m: &BinMap) -> Vec<Component> {
    let (w, h) = (m.width() as usize, m.height() as usize);
    let mut labels = vec![0u32; w * h];
    let mut found: Vec<((u32, u32), [u32; 4])> = Vec::new();
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !m.get(x as u32, y as u32) || labels[y * w + x] != 0 {
                continue;
            }
            let label = found.len() as u32 + 1;
            let mut bb = [x as u32, y as u32, x as u32, y as u32];
            labels[y * w + x] = label;
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                bb[0] = bb[0].min(cx as u32);
                bb[1] = bb[1].min(cy as u32);
                bb[2] = bb[2].max(cx as u32);
                bb[3] = bb[3].max(cy as u32);
                for (dx, dy) in DIRS {
                    let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if m.get(nx as u32, ny as u32) && labels[ny * w + nx] == 0 {
                        labels[ny * w + nx] = label;
                        stack.push((nx, ny));
                    }
                }
            }
            found.push(((x as u32, y as u32), bb));
        }
    }
    let labels = alloc::rc::Rc::new(labels);
    found
        .into_iter()
        .enumerate()
        .map(|(i, (start, bb))| Component {
            label: i as u32 + 1,
            start,
            labels: labels.clone(),
            x0: bb[0],
            y0: bb[1],
            x1: bb[2],
            y1: bb[3],
        })
        .collect()
}

/// Moore-neighbour boundary following, clockwise on screen, from the
/// component's first raster pixel. Stops when the first move repeats.
pub fn trace_outer(mask: &BinMap, start: (u32, u32)) -> Vec<(u32, u32)> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    trace_with(w, h, start, |x, y| mask.get(x as u32, y as u32))
}

fn trace_component(comp: &Component, width: u32, height: u32) -> Vec<(u32, u32)> {
    let w = width as i64;
    trace_with(w, height as i64, comp.start, |x, y| {
        comp.labels[(y * w + x) as usize] == comp.label
    })
}

fn trace_with(w: i64, h: i64, start: (u32, u32), member: impl Fn(i64, i64) -> bool) -> Vec<(u32, u32)> {
    let inside = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && member(x, y);
    let (sx, sy) = (start.0 as i64, start.1 as i64);
    let mut contour = vec![start];
    // the west neighbour of the first raster pixel is background
    let step = |cx: i64, cy: i64, back: usize| -> Option<(i64, i64, usize)> {
        for k in 1..=8 {
            let d = (back + k) % 8;
            let (nx, ny) = (cx + DIRS[d].0, cy + DIRS[d].1);
            if inside(nx, ny) {
                let pd = (back + k - 1) % 8;
                let (bx, by) = (cx + DIRS[pd].0, cy + DIRS[pd].1);
                return Some((nx, ny, dir_of(bx - nx, by - ny)));
            }
        }
        None
    };
    let Some(first) = step(sx, sy, 4) else {
        return contour;
    };
    let (mut cx, mut cy, mut back) = first;
    let limit = 4 * (w * h) as usize + 16;
    for _ in 0..limit {
        if (cx, cy) == (sx, sy) {
            // Jacob's criterion: stop when the next move equals the first one
            if let Some(next) = step(cx, cy, back) {
                if (next.0, next.1) == (first.0, first.1) {
                    break;
                }
            }
        }
        contour.push((cx as u32, cy as u32));
        match step(cx, cy, back) {
            Some((nx, ny, nb)) => {
                cx = nx;
                cy = ny;
                back = nb;
            }
            None => break,
        }
    }
    contour
}

/// Douglas–Peucker over an open polyline, keeping both endpoints.
pub fn simplify_open(pts: &[Point], tol: f64) -> Vec<Point> {
    let keep = dp_mask(pts, tol);
    pts.iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| *p).collect()
}

fn dp_mask(pts: &[Point], tol: f64) -> Vec<bool> {
    if pts.len() <= 2 {
        return vec![true; pts.len()];
    }
    let mut keep = vec![false; pts.len()];
    keep[0] = true;
    keep[pts.len() - 1] = true;
    let mut stack = vec![(0usize, pts.len() - 1)];
    let tol2 = tol * tol;
    while let Some((a, b)) = stack.pop() {
        if b <= a + 1 {
            continue;
        }
        let (mut best, mut best_d) = (a, -1.0);
        for (i, p) in pts.iter().enumerate().take(b).skip(a + 1) {
            let d = dist2_to_segment(*p, pts[a], pts[b]);
            if d > best_d {
                best_d = d;
                best = i;
            }
        }
        if best_d > tol2 {
            keep[best] = true;
            stack.push((a, best));
            stack.push((best, b));
        }
    }
    keep
}

/// Douglas–Peucker over a closed ring (no repeated endpoint), split at the
/// vertex farthest from the anchor, followed by a corner-snapping pass that
/// moves each kept vertex to the ring point farthest from its neighbours'
/// chord.
pub fn simplify_closed(ring: &[Point], tol: f64) -> Vec<Point> {
    let n = ring.len();
    if n <= 3 {
        return ring.to_vec();
    }
    let p0 = ring[0];
    let far = (1..n)
        .max_by(|&a, &b| p0.distance(ring[a]).total_cmp(&p0.distance(ring[b])).then(b.cmp(&a)))
        .unwrap_or(1);
    let mut kept = dp_indices(ring, 0, far, tol);
    let mut second = dp_indices_wrapping(ring, far, tol);
    kept.pop();
    second.pop();
    kept.extend(second);

    for _ in 0..3 {
        let m = kept.len();
        if m < 3 {
            break;
        }
        let mut changed = false;
        for i in 0..m {
            let a = kept[(i + m - 1) % m];
            let b = kept[(i + 1) % m];
            let mut best = kept[i];
            let mut best_d = dist2_to_segment(ring[best], ring[a], ring[b]);
            let mut j = (a + 1) % n;
            while j != b {
                let d = dist2_to_segment(ring[j], ring[a], ring[b]);
                if d > best_d + 1e-12 {
                    best_d = d;
                    best = j;
                }
                j = (j + 1) % n;
            }
            if best != kept[i] {
                kept[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    kept.into_iter().map(|i| ring[i]).collect()
}

fn dp_indices(ring: &[Point], a: usize, b: usize, tol: f64) -> Vec<usize> {
    let idx: Vec<usize> = (a..=b).collect();
    dp_over(ring, &idx, tol)
}

fn dp_indices_wrapping(ring: &[Point], from: usize, tol: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (from..ring.len()).collect();
    idx.push(0);
    dp_over(ring, &idx, tol)
}

fn dp_over(ring: &[Point], idx: &[usize], tol: f64) -> Vec<usize> {
    let pts: Vec<Point> = idx.iter().map(|&i| ring[i]).collect();
    let keep = dp_mask(&pts, tol);
    idx.iter().zip(keep).filter(|(_, k)| *k).map(|(i, _)| *i).collect()
}

/// Moves every edge of a simple polygon outward by `d` (miter joins,
/// capped at `3d` per vertex).
pub fn offset_outward(poly: &[Point], d: f64) -> Vec<Point> {
    let n = poly.len();
    // y-down frame: positive shoelace area means clockwise on screen
    let sign = if signed_area(poly) > 0.0 { 1.0 } else { -1.0 };
    let normal = |a: Point, b: Point| {
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let len = math::hypot(dx, dy);
        if len == 0.0 {
            Point::default()
        } else {
            // outward normal of a clockwise (screen) ring is (dy, -dx)
            Point::new(sign * dy / len, -sign * dx / len)
        }
    };
    (0..n)
        .map(|i| {
            let prev = poly[(i + n - 1) % n];
            let cur = poly[i];
            let next = poly[(i + 1) % n];
            let n1 = normal(prev, cur);
            let n2 = normal(cur, next);
            let m = Point::new(n1.x + n2.x, n1.y + n2.y);
            let denom = 1.0 + n1.x * n2.x + n1.y * n2.y;
            let (mut ox, mut oy) = if denom > 1e-9 {
                (m.x * d / denom, m.y * d / denom)
            } else {
                (n1.x * d, n1.y * d)
            };
            let len = math::hypot(ox, oy);
            if len > 3.0 * d {
                ox *= 3.0 * d / len;
                oy *= 3.0 * d / len;
            }
            Point::new(cur.x + ox, cur.y + oy)
        })
        .collect()
}
