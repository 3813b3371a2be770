//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use postree_core::generation::validate_tree;
use postree_core::geom::{CubicSegment, Point, Rect, Shape};
use postree_core::metrics::{
    avg, evaluate_sample, ove_numeric, ove_pixel, standardize, AvgInputs, EvalOptions, ReferenceStats, SampleMaps,
};
use postree_core::raster::{render_element_map, render_elements, render_layers, STROKE_WIDTH};
use postree_core::retrieval::{select_examples, Distance, IndexEntry, IntentIndex, Query, SelectOptions, Strategy};
use postree_core::svg::{canonicalize, parse_tree, parse_tree_with, serialize_tree, ParseOptions};
use postree_core::tree::{build_tree, envelops, flatten_tree, BuildOptions, NestParams};
use postree_core::{
    Canvas, DatasetRecord, DesignIntent, ElementCategory, GrayMap, Layout, LayoutElement, LayoutTree, Polygon,
    TextVariant, TreeNode,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

// random inputs

const CATEGORIES: [ElementCategory; 8] = [
    ElementCategory::TEXT,
    ElementCategory::text(TextVariant::Vertical),
    ElementCategory::text(TextVariant::Rotated),
    ElementCategory::text(TextVariant::Ellipse),
    ElementCategory::text(TextVariant::Curve),
    ElementCategory::LOGO,
    ElementCategory::UNDERLAY,
    ElementCategory::EMBELLISHMENT,
];

fn rand_point(rng: &mut ChaCha8Rng, w: f64, h: f64) -> Point {
    Point::new(rng.random_range(-8.0..w + 8.0), rng.random_range(-8.0..h + 8.0))
}

fn rand_shape(rng: &mut ChaCha8Rng, kind: u32, w: f64, h: f64) -> Shape {
    let size = |rng: &mut ChaCha8Rng, side: f64| rng.random_range(0.5..(side * 0.6).max(1.0));
    match kind {
        0 => Shape::Rect(Rect::new(
            rng.random_range(-8.0..w),
            rng.random_range(-8.0..h),
            size(rng, w),
            size(rng, h),
        )),
        1 => Shape::RotatedRect {
            x: rng.random_range(-8.0..w),
            y: rng.random_range(-8.0..h),
            w: size(rng, w),
            h: size(rng, h),
            angle_deg: 180.0 - rng.random_range(0.0..360.0),
        },
        2 => Shape::Ellipse {
            cx: rng.random_range(0.0..w),
            cy: rng.random_range(0.0..h),
            rx: size(rng, w) / 2.0,
            ry: size(rng, h) / 2.0,
        },
        _ => {
            let n = rng.random_range(1..=3);
            Shape::Path {
                start: rand_point(rng, w, h),
                segments: (0..n)
                    .map(|_| CubicSegment::new(rand_point(rng, w, h), rand_point(rng, w, h), rand_point(rng, w, h)))
                    .collect(),
                closed: rng.random_bool(0.3),
            }
        }
    }
}

fn rand_element(rng: &mut ChaCha8Rng, w: f64, h: f64) -> LayoutElement {
    let category = CATEGORIES[rng.random_range(0..CATEGORIES.len())];
    let kind = rng.random_range(0..4);
    LayoutElement::new(category, rand_shape(rng, kind, w, h))
}

fn rand_canvas(rng: &mut ChaCha8Rng, lo: u32, hi: u32) -> Canvas {
    Canvas::new(rng.random_range(lo..=hi), rng.random_range(lo..=hi)).unwrap()
}

fn rand_layout(rng: &mut ChaCha8Rng, max_side: u32, max_elements: usize) -> Layout {
    let canvas = rand_canvas(rng, 16, max_side);
    let (w, h) = (canvas.width as f64, canvas.height as f64);
    let n = rng.random_range(0..=max_elements);
    Layout::new(canvas, (0..n).map(|_| rand_element(rng, w, h)).collect())
}

// Avg and Int/Sal standardization

fn avg_pku() -> Result<String, String> {
    let inputs = AvgInputs {
        ove: Some(0.0010),
        ali: Some(0.0038),
        und_l: Some(0.9942),
        und_s: Some(0.9903),
        int_metric: Some(0.0289),
        sal_metric: Some(0.0368),
        rea: Some(0.0109),
    };
    let t = Instant::now();
    let v = avg(&inputs).map_err(|e| e.to_string())?;
    let took = t.elapsed();
    ensure((v - 0.0138).abs() <= 5e-4, || format!("avg = {v}"))?;
    ensure(took.as_secs_f64() < 1e-3, || format!("took {took:?}"))?;
    Ok(format!("avg = {v:.6} in {took:?}"))
}

fn avg_cgl() -> Result<String, String> {
    let v = avg(&AvgInputs {
        ove: Some(0.0003),
        ali: Some(0.0024),
        und_l: Some(0.9963),
        und_s: Some(0.9880),
        int_metric: Some(0.0088),
        sal_metric: Some(0.0097),
        rea: Some(0.0119),
    })
    .map_err(|e| e.to_string())?;
    ensure((v - 0.0070).abs() <= 5e-4, || format!("avg = {v}"))?;
    Ok(format!("avg = {v:.6}"))
}

fn standardization() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut cases = vec![
        ReferenceStats { cov_l: 0.0, con_l: 0.0, uti_l: 0.0, occ_l: 0.0 },
        ReferenceStats { cov_l: 1.0, con_l: 1.0, uti_l: 1.0, occ_l: 1.0 },
    ];
    for _ in 0..1000 {
        cases.push(ReferenceStats {
            cov_l: rng.random(),
            con_l: rng.random(),
            uti_l: rng.random(),
            occ_l: rng.random(),
        });
    }
    for x in &cases {
        let s = standardize(x, x);
        ensure(s == (0.0, 0.0), || format!("standardize(x, x) = {s:?} for {x:?}"))?;
    }
    let reference = ReferenceStats { cov_l: 0.4, con_l: 0.1, uti_l: 0.5, occ_l: 0.5 };
    let gen = ReferenceStats { cov_l: 0.3, con_l: 0.15, ..reference };
    let (int, _) = standardize(&gen, &reference);
    ensure((int - 1.0 / 3.0).abs() <= 1e-6, || format!("hand case Int = {int}"))?;
    Ok(format!("{} self-standardizations are (0, 0); hand case Int = {int:.7}", cases.len()))
}

// rasterizer oracle

struct OracleLayer {
    bits: Vec<bool>,
    /// Pixels within 1 px of the boundary, where either answer is fine.
    band: Vec<bool>,
}

fn pixel_center(i: usize, w: usize) -> (f64, f64) {
    ((i % w) as f64 + 0.5, (i / w) as f64 + 0.5)
}

/// Minimum distance from each pixel center to a dense point sampling of
/// the curve, limited to pixels near the curve.
fn distance_field(samples: &[Point], w: usize, h: usize, reach: f64) -> Vec<f64> {
    let mut d = vec![f64::INFINITY; w * h];
    for p in samples {
        let x0 = ((p.x - reach).floor().max(0.0)) as usize;
        let y0 = ((p.y - reach).floor().max(0.0)) as usize;
        let x1 = ((p.x + reach).ceil().min(w as f64 - 1.0)).max(-1.0);
        let y1 = ((p.y + reach).ceil().min(h as f64 - 1.0)).max(-1.0);
        if x1 < 0.0 || y1 < 0.0 {
            continue;
        }
        for y in y0..=y1 as usize {
            for x in x0..=x1 as usize {
                let (dx, dy) = (x as f64 + 0.5 - p.x, y as f64 + 0.5 - p.y);
                let v = (dx * dx + dy * dy).sqrt();
                let slot = &mut d[y * w + x];
                if v < *slot {
                    *slot = v;
                }
            }
        }
    }
    d
}

fn sample_segment(out: &mut Vec<Point>, p0: Point, c1: Point, c2: Point, p3: Point) {
    let hull = p0.distance(c1) + c1.distance(c2) + c2.distance(p3);
    let n = (hull / 0.2).ceil().max(1.0) as usize;
    for i in 0..=n {
        let t = i as f64 / n as f64;
        let u = 1.0 - t;
        let (a, b, c, d) = (u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t);
        out.push(Point::new(
            a * p0.x + b * c1.x + c * c2.x + d * p3.x,
            a * p0.y + b * c1.y + c * c2.y + d * p3.y,
        ));
    }
}

fn oracle(shape: &Shape, w: usize, h: usize) -> OracleLayer {
    let n = w * h;
    match *shape {
        Shape::Rect(r) => OracleLayer {
            bits: (0..n)
                .map(|i| {
                    let (cx, cy) = pixel_center(i, w);
                    cx >= r.x && cx < r.x + r.w && cy >= r.y && cy < r.y + r.h
                })
                .collect(),
            band: vec![false; n],
        },
        Shape::RotatedRect { x, y, w: rw, h: rh, angle_deg } => {
            let (s, c) = angle_deg.to_radians().sin_cos();
            let (mx, my) = (x + rw / 2.0, y + rh / 2.0);
            let local = |i: usize| {
                let (px, py) = pixel_center(i, w);
                let (dx, dy) = (px - mx, py - my);
                ((dx * c + dy * s).abs(), (-dx * s + dy * c).abs())
            };
            let inside = |u: f64, v: f64, grow: f64| u < rw / 2.0 + grow && v < rh / 2.0 + grow;
            let mut bits = Vec::with_capacity(n);
            let mut band = Vec::with_capacity(n);
            for i in 0..n {
                let (u, v) = local(i);
                bits.push(inside(u, v, 0.0));
                band.push(inside(u, v, 1.0) && !inside(u, v, -1.0));
            }
            OracleLayer { bits, band }
        }
        Shape::Ellipse { cx, cy, rx, ry } => {
            let steps = ((std::f64::consts::TAU * rx.max(ry)) / 0.2).ceil().max(64.0) as usize;
            let pts: Vec<Point> = (0..steps)
                .map(|i| {
                    let t = std::f64::consts::TAU * i as f64 / steps as f64;
                    Point::new(cx + rx * t.cos(), cy + ry * t.sin())
                })
                .collect();
            stroke_oracle(&pts, w, h)
        }
        Shape::Path { start, ref segments, closed } => {
            let mut pts = Vec::new();
            let mut from = start;
            for s in segments {
                sample_segment(&mut pts, from, s.c1, s.c2, s.end);
                from = s.end;
            }
            if closed {
                sample_segment(&mut pts, from, from, start, start);
            }
            stroke_oracle(&pts, w, h)
        }
    }
}

fn stroke_oracle(samples: &[Point], w: usize, h: usize) -> OracleLayer {
    let r = STROKE_WIDTH / 2.0;
    let d = distance_field(samples, w, h, r + 2.0);
    OracleLayer {
        bits: d.iter().map(|v| *v <= r).collect(),
        band: d.iter().map(|v| (v - r).abs() <= 1.0).collect(),
    }
}

fn rasterizer_oracle() -> Result<String, String> {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let (mut rect_px, mut curved_px, mut disagree) = (0usize, 0usize, 0usize);
    let mut elements = 0;
    for case in 0..200 {
        let layout = rand_layout(&mut rng, 128, 8);
        let (w, h) = (layout.canvas.width as usize, layout.canvas.height as usize);
        let full = render_element_map(&layout, layout.canvas.width);
        ensure((full.width() as usize, full.height() as usize) == (w, h), || {
            format!("case {case}: map is {}x{}, canvas {w}x{h}", full.width(), full.height())
        })?;
        let mut union = vec![false; w * h];
        for (k, e) in layout.elements.iter().enumerate() {
            elements += 1;
            let got = render_elements(layout.canvas, [e], layout.canvas.width);
            let want = oracle(&e.shape, w, h);
            for (i, (g, o)) in got.bits().iter().zip(&want.bits).enumerate() {
                union[i] |= *g;
                if g == o {
                    continue;
                }
                if matches!(e.shape, Shape::Rect(_)) {
                    let (x, y) = pixel_center(i, w);
                    return Err(format!("case {case} element {k}: rect pixel ({x}, {y}) differs: {:?}", e.shape));
                }
                if !want.band[i] {
                    let (x, y) = pixel_center(i, w);
                    return Err(format!("case {case} element {k}: pixel ({x}, {y}) differs off the boundary band: {:?}", e.shape));
                }
                disagree += 1;
            }
            let count = want.bits.iter().filter(|b| **b).count();
            if matches!(e.shape, Shape::Rect(_)) {
                rect_px += count;
            } else {
                curved_px += count;
            }
        }
        ensure(full.bits() == union.as_slice(), || format!("case {case}: element map is not the union of its elements"))?;

        let layers = render_layers(&layout, layout.canvas.width);
        let mut brute = 0usize;
        for i in 0..w * h {
            let c = layers.iter().filter(|l| l.bits()[i]).count();
            brute += c.saturating_sub(1);
        }
        let want = if layers.is_empty() { 0.0 } else { brute as f64 / (w * h) as f64 };
        let got = ove_pixel(&layers).map_err(|e| e.to_string())?;
        ensure(got == want, || format!("case {case}: ove_pixel {got} != brute force {want}"))?;
    }
    let rate = disagree as f64 / curved_px.max(1) as f64;
    ensure(rate <= 0.02, || format!("boundary disagreement {:.3}% > 2%", rate * 100.0))?;
    let took = t.elapsed();
    ensure(took.as_secs() < 30, || format!("took {took:?}"))?;
    Ok(format!(
        "{elements} elements: rects exact over {rect_px} px, other shapes {:.3}% band disagreement, ove_pixel exact, {took:.2?}",
        rate * 100.0
    ))
}

// round trip

fn rand_nodes(rng: &mut ChaCha8Rng, w: f64, h: f64, level: usize) -> Vec<TreeNode> {
    let n = rng.random_range(1..=4);
    (0..n)
        .map(|_| {
            if level < 4 && rng.random_bool(0.25) {
                TreeNode::Group {
                    x: rng.random_range(0.0..w / 2.0),
                    y: rng.random_range(0.0..h / 2.0),
                    children: rand_nodes(rng, w / 2.0, h / 2.0, level + 1),
                }
            } else {
                let mut e = rand_element(rng, w, h);
                // tiny sizes exercise the dimension floor
                if let Shape::Rect(r) = &mut e.shape {
                    if rng.random_bool(0.05) {
                        r.w = 0.001;
                    }
                }
                TreeNode::Leaf {
                    id: rng.random_bool(0.5).then(|| format!("junk_{}", rng.random::<u16>())),
                    category: e.category,
                    shape: e.shape,
                }
            }
        })
        .collect()
}

fn rand_tree(rng: &mut ChaCha8Rng) -> LayoutTree {
    let canvas = rand_canvas(rng, 16, 1024);
    let (w, h) = (canvas.width as f64, canvas.height as f64);
    let intents = (0..rng.random_range(0..3))
        .map(|_| Polygon((0..rng.random_range(3..7)).map(|_| rand_point(rng, w, h)).collect()))
        .collect();
    LayoutTree {
        canvas,
        intents,
        elements: rand_nodes(rng, w, h, 1),
    }
}

fn mutate(rng: &mut ChaCha8Rng, base: &str) -> String {
    const TOKENS: [&str; 24] = [
        "<svg", "</svg>", "<rect", "<ellipse", "<path d=\"", "<polygon points=\"", "x=\"", "\"", ">", "/>", "NaN", "1e308",
        "-", "M", "C", "Z", "A 1 1 0 1 1", "transform=\"rotate(", "<!--", "<![CDATA[", "&amp;", "\u{00e9}", "<g>", "id=\"",
    ];
    let mut bytes = base.as_bytes().to_vec();
    for _ in 0..rng.random_range(1..6) {
        let len = bytes.len();
        let at = if len == 0 { 0 } else { rng.random_range(0..=len) };
        match rng.random_range(0..5) {
            0 if len > 0 => {
                let end = (at + rng.random_range(1..40)).min(len);
                bytes.drain(at.min(len)..end);
            }
            1 => {
                let tok = TOKENS[rng.random_range(0..TOKENS.len())];
                bytes.splice(at..at, tok.bytes());
            }
            2 if len > 0 => {
                let end = (at + rng.random_range(1..80)).min(len);
                let chunk = bytes[at.min(len)..end].to_vec();
                let to = rng.random_range(0..=len);
                bytes.splice(to..to, chunk);
            }
            3 if len > 0 => {
                let i = rng.random_range(0..len);
                bytes[i] = rng.random();
            }
            _ => bytes.truncate(at),
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

fn round_trip() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut corpus = Vec::new();
    for case in 0..1000 {
        let tree = rand_tree(&mut rng);
        let s1 = serialize_tree(&tree);
        let parsed = parse_tree(&s1, None).map_err(|e| format!("case {case}: {e}\n{s1}"))?;
        let canon = canonicalize(&tree);
        ensure(parsed == canon, || format!("case {case}: parse(serialize(t)) != canonicalize(t)\n{s1}"))?;
        let s2 = serialize_tree(&parsed);
        ensure(s1 == s2, || format!("case {case}: serialize is not stable\n{s1}\n{s2}"))?;
        if case < 100 {
            corpus.push(s1);
        }
    }
    corpus.push("Sure! <svg width=\"100\" height=\"80\"><rect x=\"1\" y=\"2\" width=\"3\" height=\"4\" id=\"logo_0\"/></svg> done".into());

    let mut parsed_ok = 0;
    for case in 0..10_000 {
        let input = if case % 10 == 9 {
            let n = rng.random_range(0..200);
            String::from_utf8_lossy(&(0..n).map(|_| rng.random::<u8>()).collect::<Vec<_>>()).into_owned()
        } else {
            let base = corpus[rng.random_range(0..corpus.len())].clone();
            mutate(&mut rng, &base)
        };
        let expected_canvas = rng.random_bool(0.3).then(|| rand_canvas(&mut rng, 1, 2000));
        let outcome = catch_unwind(AssertUnwindSafe(|| {
            let opts = ParseOptions {
                expected_canvas,
                ..ParseOptions::default()
            };
            parse_tree_with(&input, opts).map(|o| {
                let s = serialize_tree(&o.tree);
                (o.tree, s)
            })
        }));
        match outcome {
            Err(_) => return Err(format!("fuzz case {case} panicked on {input:?}")),
            Ok(Ok((tree, s))) => {
                parsed_ok += 1;
                let again = parse_tree(&s, None).map_err(|e| format!("fuzz case {case}: own output rejected: {e}\n{s}"))?;
                ensure(again == canonicalize(&tree), || format!("fuzz case {case}: reparse differs\n{input:?}\n{s}"))?;
            }
            Ok(Err(_)) => {}
        }
    }
    Ok(format!("1000 random trees round-trip; 10000 fuzz inputs, {parsed_ok} parsed, no panics"))
}

// nesting

fn quarter(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo..hi) * 4.0).round() / 4.0
}

fn rand_record(rng: &mut ChaCha8Rng, id: usize) -> DatasetRecord {
    let canvas = rand_canvas(rng, 64, 1024);
    let (w, h) = (canvas.width as f64, canvas.height as f64);
    let eps = 0.01 * w.max(h);
    let mut elements = Vec::new();
    for _ in 0..rng.random_range(0..4) {
        let mut b = Rect::new(
            quarter(rng, 0.0, w * 0.7),
            quarter(rng, 0.0, h * 0.7),
            quarter(rng, 8.0, w * 0.3),
            quarter(rng, 8.0, h * 0.3),
        );
        elements.push(LayoutElement::new(ElementCategory::UNDERLAY, Shape::Rect(b)));
        // a chain of boxes that each fit their predecessor within eps
        for _ in 0..rng.random_range(0..4) {
            let step = |rng: &mut ChaCha8Rng| quarter(rng, 0.0, eps * 0.45);
            let (dl, dt, dr, db) = (step(rng), step(rng), step(rng), step(rng));
            b = Rect::new(b.x + dl, b.y + dt, (b.w - dl - dr).max(0.25), (b.h - dt - db).max(0.25));
            let category = if rng.random_bool(0.4) {
                ElementCategory::UNDERLAY
            } else {
                CATEGORIES[rng.random_range(0..CATEGORIES.len())]
            };
            let shape = if rng.random_bool(0.8) {
                Shape::Rect(b)
            } else {
                Shape::Ellipse {
                    cx: b.x + b.w / 2.0,
                    cy: b.y + b.h / 2.0,
                    rx: b.w / 2.0,
                    ry: b.h / 2.0,
                }
            };
            elements.push(LayoutElement::new(category, shape));
        }
    }
    for _ in 0..rng.random_range(0..5) {
        let mut e = rand_element(rng, w, h);
        e.shape = match e.shape {
            Shape::Rect(_) => Shape::Rect(Rect::new(
                quarter(rng, -4.0, w),
                quarter(rng, -4.0, h),
                quarter(rng, 1.0, w / 2.0),
                quarter(rng, 1.0, h / 2.0),
            )),
            Shape::RotatedRect { .. } => Shape::RotatedRect {
                x: quarter(rng, 0.0, w),
                y: quarter(rng, 0.0, h),
                w: quarter(rng, 1.0, w / 2.0),
                h: quarter(rng, 1.0, h / 2.0),
                angle_deg: quarter(rng, -179.0, 180.0),
            },
            Shape::Ellipse { .. } => Shape::Ellipse {
                cx: quarter(rng, 0.0, w),
                cy: quarter(rng, 0.0, h),
                rx: quarter(rng, 1.0, w / 4.0),
                ry: quarter(rng, 1.0, h / 4.0),
            },
            Shape::Path { segments, closed, .. } => Shape::Path {
                start: Point::new(quarter(rng, 0.0, w), quarter(rng, 0.0, h)),
                segments: segments
                    .iter()
                    .map(|_| {
                        let mut p = || Point::new(quarter(rng, 0.0, w), quarter(rng, 0.0, h));
                        CubicSegment::new(p(), p(), p())
                    })
                    .collect(),
                closed,
            },
        };
        elements.push(e);
    }
    elements.shuffle(rng);
    DatasetRecord {
        record_id: format!("r{id}"),
        canvas,
        elements,
        intent: DesignIntent::default(),
        image_path: None,
        saliency_path: None,
    }
}

fn element_keys(elements: &[LayoutElement]) -> Vec<String> {
    let mut v: Vec<String> = elements.iter().map(|e| format!("{e:?}")).collect();
    v.sort();
    v
}

/// Checks every non-wrapper child of every group against the group's
/// wrapper (its first child) in absolute coordinates.
fn check_wrapped(nodes: &[TreeNode], origin: Point, eps: f64, wrapped: &mut usize) -> Result<(), String> {
    for n in nodes {
        let TreeNode::Group { x, y, children } = n else {
            continue;
        };
        let at = Point::new(origin.x + x, origin.y + y);
        let Some(TreeNode::Leaf { category, shape, .. }) = children.first() else {
            return Err("group does not start with its wrapper".into());
        };
        ensure(category.is_underlay(), || format!("wrapper is {category:?}"))?;
        let wrapper = shape.translate(at.x, at.y).bounding_box();
        ensure(wrapper.x == at.x && wrapper.y == at.y, || "group offset is not the wrapper's top-left".into())?;
        for c in &children[1..] {
            let b = match c {
                TreeNode::Leaf { shape, .. } => shape.translate(at.x, at.y).bounding_box(),
                TreeNode::Group { x, y, children } => match children.first() {
                    Some(TreeNode::Leaf { shape, .. }) => shape.translate(at.x + x, at.y + y).bounding_box(),
                    _ => return Err("nested group without a wrapper".into()),
                },
            };
            ensure(envelops(&wrapper, &b, eps), || format!("{b:?} is not enveloped by {wrapper:?} (eps {eps})"))?;
            *wrapped += 1;
        }
        check_wrapped(children, at, eps, wrapped)?;
    }
    Ok(())
}

fn cli(args: &[&str]) -> Result<std::process::Output, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_postree"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("postree {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out)
}

fn nesting() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let opts = BuildOptions::default();
    let (mut wrapped, mut deepest) = (0, 0);
    for i in 0..500 {
        let rec = rand_record(&mut rng, i);
        let tree = build_tree(&rec, &opts);
        let flat = flatten_tree(&tree);
        ensure(element_keys(&flat.elements) == element_keys(&rec.elements), || {
            format!("record {i}: flatten(build(r)) changed the elements")
        })?;
        let eps = NestParams::default().epsilon_for(rec.canvas);
        check_wrapped(&tree.elements, Point::new(0.0, 0.0), eps, &mut wrapped).map_err(|e| format!("record {i}: {e}"))?;
        deepest = deepest.max(tree.depth());
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fixture = workspace().join("fixtures/depth3.json");
    let fixture = fixture.to_str().unwrap();
    let depth = |sub: &str, extra: &[&str]| -> Result<usize, String> {
        let out = dir.path().join(sub);
        let mut args = vec!["build-trees", "--dataset", fixture, "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        cli(&args)?;
        let text = std::fs::read_to_string(out.join("nested_panel.svg")).map_err(|e| e.to_string())?;
        Ok(parse_tree(&text, None).map_err(|e| e.to_string())?.depth())
    };
    let nested = depth("nested", &[])?;
    let flat = depth("flat", &["--flat-trees"])?;
    ensure(nested == 3, || format!("depth-3 fixture built to depth {nested}"))?;
    ensure(flat == 1, || format!("--flat-trees built depth {flat}"))?;
    Ok(format!(
        "500 records flatten exactly, {wrapped} wrapped children are enveloped by their wrapper (max depth {deepest}); fixture depth 3, flat depth 1"
    ))
}

// retrieval

fn retrieval() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let vectors: Vec<Vec<f64>> = (0..100)
        .map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let index_for = |scale: f64| {
        IntentIndex::from_entries(
            vectors
                .iter()
                .enumerate()
                .map(|(i, v)| IndexEntry {
                    record_id: format!("r{i:03}"),
                    embedding: v.iter().map(|x| (x * scale) as f32).collect(),
                    intent_bboxes: vec![],
                    category_multiset: Default::default(),
                })
                .collect(),
        )
        .unwrap()
    };
    let base = index_for(1.0);
    let mut queries = 0;
    for _ in 0..20 {
        let q: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut all: Vec<(f64, &str)> = base
            .entries()
            .iter()
            .map(|e| {
                let d: f64 = e.embedding.iter().zip(&q).map(|(a, b)| (*a as f64 - b).powi(2)).sum();
                (d, e.record_id.as_str())
            })
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
        for k in [1, 5, 10] {
            let opts = SelectOptions {
                k,
                strategy: Strategy::FAligned,
                seed: 0,
                distance: Distance::Euclidean,
            };
            let got = select_examples(&base, &Query::Embedding(q.clone()), &opts).map_err(|e| e.to_string())?;
            let want: Vec<&str> = all[..k].iter().map(|(_, id)| *id).collect();
            ensure(got == want, || format!("k = {k}: {got:?} != {want:?}"))?;
            for scale in [0.25, 3.0, 17.5] {
                let scaled = index_for(scale);
                let sq: Vec<f64> = q.iter().map(|x| x * scale).collect();
                let s = select_examples(&scaled, &Query::Embedding(sq), &opts).map_err(|e| e.to_string())?;
                ensure(s == got, || format!("scale {scale}, k = {k}: {s:?} != {got:?}"))?;
            }
            queries += 1;
        }
    }
    Ok(format!("{queries} top-k queries match exhaustive sort and survive scaling by 0.25, 3, 17.5"))
}

// end to end

fn end_to_end() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fixture = workspace().join("fixtures/posters20");
    let dataset = fixture.join("dataset.json");
    let maps = fixture.join("maps");
    let run = |name: &str, jobs: &str| -> Result<PathBuf, String> {
        let out = dir.path().join(name);
        cli(&[
            "generate",
            "--dataset",
            dataset.to_str().unwrap(),
            "--maps",
            maps.to_str().unwrap(),
            "--backend",
            "mock",
            "--seed",
            "7",
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
        ])?;
        Ok(out)
    };
    let a = run("a", "4")?;
    let b = run("b", "1")?;
    let text = std::fs::read_to_string(&dataset).map_err(|e| e.to_string())?;
    let records: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let records = records["records"].as_array().ok_or("no records")?;
    ensure(records.len() == 20, || format!("fixture has {} records", records.len()))?;
    let mut leaves = 0;
    for r in records {
        let id = r["record_id"].as_str().ok_or("record without id")?;
        let file = format!("{id}.svg");
        let x = std::fs::read(a.join(&file)).map_err(|e| format!("{file}: {e}"))?;
        let y = std::fs::read(b.join(&file)).map_err(|e| format!("{file}: {e}"))?;
        ensure(x == y, || format!("{file} differs between runs"))?;
        let tree = parse_tree(std::str::from_utf8(&x).map_err(|e| e.to_string())?, None).map_err(|e| e.to_string())?;
        let canvas = tree.canvas;
        let mut ids = BTreeSet::new();
        for l in tree.leaves() {
            let id = l.id.ok_or_else(|| format!("{file}: leaf without id"))?;
            ensure(ids.insert(id.to_owned()), || format!("{file}: duplicate id {id}"))?;
            let bb = l.absolute_shape().bounding_box();
            let tol = 1e-6;
            ensure(
                bb.x >= -tol && bb.y >= -tol && bb.right() <= canvas.width as f64 + tol && bb.bottom() <= canvas.height as f64 + tol,
                || format!("{file}: {id} at {bb:?} leaves the {}x{} canvas", canvas.width, canvas.height),
            )?;
            leaves += 1;
        }
        let (_, report) = validate_tree(&tree, canvas).map_err(|e| e.to_string())?;
        ensure(report.clamped == 0 && report.dropped == 0, || format!("{file}: not a fixed point of validate_tree: {report:?}"))?;
    }
    Ok(format!("20 chosen layouts byte-identical across runs; {leaves} leaves, ids unique, all inside their canvas"))
}

// metric ranges

fn rand_gray(rng: &mut ChaCha8Rng) -> GrayMap {
    let (w, h) = (rng.random_range(1..40), rng.random_range(1..40));
    GrayMap::new(w, h, (0..w * h).map(|_| rng.random::<f32>()).collect()).unwrap()
}

fn metric_ranges() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut with_und = 0;
    for case in 0..1000 {
        let layout = rand_layout(&mut rng, 96, 8);
        let (sal, int, img) = (rand_gray(&mut rng), rand_gray(&mut rng), rand_gray(&mut rng));
        let maps = SampleMaps {
            saliency: rng.random_bool(0.8).then_some(&sal),
            intent: rng.random_bool(0.8).then_some(&int),
            image_gray: rng.random_bool(0.8).then_some(&img),
        };
        let opts = EvalOptions {
            target_width: layout.canvas.width,
            ..EvalOptions::default()
        };
        let r = evaluate_sample(&layout, &maps, &opts).map_err(|e| e.to_string())?;
        for (name, v) in [("und_l", r.und_l), ("und_s", r.und_s), ("uti", r.uti), ("occ", r.occ), ("cov", r.cov), ("con", r.con), ("ali", r.ali)] {
            if let Some(v) = v {
                ensure((0.0..=1.0).contains(&v), || format!("case {case}: {name} = {v}"))?;
            }
        }
        for (name, v) in [("ove", r.ove), ("rea", r.rea)] {
            if let Some(v) = v {
                ensure(v >= 0.0 && v.is_finite(), || format!("case {case}: {name} = {v}"))?;
            }
        }
        let has_underlay = layout.underlays().next().is_some();
        ensure(r.und_l.is_some() == has_underlay && r.und_s.is_some() == has_underlay, || {
            format!("case {case}: und presence {:?} with underlay = {has_underlay}", r.und_l)
        })?;
        with_und += has_underlay as usize;

        let mut shuffled = layout.clone();
        shuffled.elements.shuffle(&mut rng);
        let w = layout.canvas.width;
        let (p0, p1) = (
            ove_pixel(&render_layers(&layout, w)).unwrap(),
            ove_pixel(&render_layers(&shuffled, w)).unwrap(),
        );
        ensure(p0 == p1, || format!("case {case}: ove_pixel {p0} vs {p1} after shuffling"))?;
        let (n0, n1) = (ove_numeric(&layout), ove_numeric(&shuffled));
        ensure((n0 - n1).abs() <= 1e-12, || format!("case {case}: ove_numeric {n0} vs {n1} after shuffling"))?;
    }
    Ok(format!("1000 layouts in range, ove permutation-invariant, und present exactly for the {with_und} with underlays"))
}

fn main() {
    let checks: [(&str, Check); 9] = [
        ("avg_identity_pku", avg_pku),
        ("avg_identity_cgl", avg_cgl),
        ("standardization", standardization),
        ("rasterizer_oracle", rasterizer_oracle),
        ("round_trip_and_fuzz", round_trip),
        ("nesting", nesting),
        ("retrieval_oracle", retrieval),
        ("end_to_end_determinism", end_to_end),
        ("metric_ranges", metric_ranges),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in checks {
        let result = catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
