//! Prompt assembly, backend driving, sanitation and ranking of generated
//! layout trees.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::geom::{Point, Rect, Shape};
use crate::math::round2;
use crate::metrics::{ali, ove_numeric};
use crate::raster::{binarize, render_element_map, BinMap, GrayMap};
use crate::svg::{canonicalize, fmt_num, opening_tag, parse_tree_with, serialize_tree, ParseOptions};
use crate::tree::flatten_tree;
use crate::types::{Canvas, ElementCategory, LayoutTree, Polygon, TreeNode};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenError {
    #[error("prompt template lacks `{{{0}}}` in its {1} section")]
    TemplateFieldMissing(&'static str, &'static str),
    #[error("prompt template section `{0}` is missing")]
    TemplateSectionMissing(&'static str),
    #[error("at least one example is required")]
    NoExamples,
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("backend timed out")]
    Timeout,
    #[error("all {0} candidates were malformed after retries")]
    AllCandidatesMalformed(usize),
    #[error("nothing left after sanitation")]
    EmptyAfterSanitation,
    #[error("no candidates to rank")]
    NoCandidates,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct GenParams {
    pub k: usize,
    pub temperature: f64,
    pub candidates: usize,
    pub max_retries: usize,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            k: 10,
            temperature: 0.7,
            candidates: 4,
            max_retries: 3,
            max_tokens: 1024,
            seed: None,
        }
    }
}

/// Three text sections with `{name}` placeholders.
///
/// `example` is rendered once per example with `{j}`, `{width}`,
/// `{height}`, `{intents}`, `{ids}` and `{tree}`; `postscript` once for the
/// test input with the same fields minus `{j}`/`{tree}` plus `{prefix}`, the
/// opening tag the backend is asked to complete.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub preface: String,
    pub example: String,
    pub postscript: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            preface: "You design poster layouts. A layout is an SVG document. \
<polygon> nodes mark design intent regions where elements belong. \
Every other shape is a layout element whose id names its category \
(text, logo, underlay, embellishment). A nested <svg x y> holds an underlay \
and the elements it decorates, with child coordinates relative to x and y.\n\n"
                .to_owned(),
            example: "Example {j}: a {width}x{height} poster with design intents {intents} and elements {ids}.\n{tree}\n\n"
                .to_owned(),
            postscript: "Now create the layout of a {width}x{height} poster with design intents {intents} and elements {ids}.\n{prefix}"
                .to_owned(),
        }
    }
}

impl PromptTemplate {
    /// Parses `[preface]`, `[example]`, `[postscript]` sections. Section
    /// bodies run until the next header line; one trailing newline of each
    /// body is dropped so that a file can end sections on their own line.
    pub fn parse(text: &str) -> Result<Self, GenError> {
        let mut sections: [Option<String>; 3] = [None, None, None];
        let mut current: Option<usize> = None;
        for line in text.split_inclusive('\n') {
            let header = match line.trim_end() {
                "[preface]" => Some(0),
                "[example]" => Some(1),
                "[postscript]" => Some(2),
                _ => None,
            };
            if let Some(h) = header {
                sections[h] = Some(String::new());
                current = Some(h);
            } else if let Some(c) = current {
                if let Some(s) = sections[c].as_mut() {
                    s.push_str(line);
                }
            }
        }
        let take = |i: usize, name: &'static str, s: &mut [Option<String>; 3]| {
            let mut v = s[i].take().ok_or(GenError::TemplateSectionMissing(name))?;
            if v.ends_with('\n') {
                v.pop();
            }
            Ok::<String, GenError>(v)
        };
        let t = Self {
            preface: take(0, "preface", &mut sections)?,
            example: take(1, "example", &mut sections)?,
            postscript: take(2, "postscript", &mut sections)?,
        };
        t.check()?;
        Ok(t)
    }

    pub fn check(&self) -> Result<(), GenError> {
        if !self.example.contains("{tree}") {
            return Err(GenError::TemplateFieldMissing("tree", "example"));
        }
        if !self.postscript.contains("{prefix}") {
            return Err(GenError::TemplateFieldMissing("prefix", "postscript"));
        }
        Ok(())
    }
}

fn fill(template: &str, fields: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let name = &after[..close];
            fields.iter().find(|(k, _)| *k == name).map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, v)) => {
                out.push_str(v);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// `[x, y, w, h]` boxes of the polygons, or `none`.
pub fn intent_summary(intents: &[Polygon]) -> String {
    if intents.is_empty() {
        return "none".to_owned();
    }
    intents
        .iter()
        .map(|p| {
            let b = p.bbox();
            format!("[{}, {}, {}, {}]", fmt_num(b.x), fmt_num(b.y), fmt_num(b.w), fmt_num(b.h))
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn id_list(ids: impl Iterator<Item = String>) -> String {
    let v: Vec<String> = ids.collect();
    if v.is_empty() {
        "none".to_owned()
    } else {
        v.join(", ")
    }
}

/// What the backend is asked to lay out.
#[derive(Debug, Clone, PartialEq)]
pub struct TestInput {
    pub canvas: Canvas,
    pub intents: Vec<Polygon>,
    /// Requested elements in order; `None` leaves the choice to the backend.
    pub requested: Option<Vec<ElementCategory>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub text: String,
    pub example_ids: Vec<String>,
    pub test: TestInput,
    /// Opening tag ending the prompt.
    pub prefix: String,
}

/// Renders the preface, one block per example in order, and the
/// postscript ending with the test's opening tag.
pub fn assemble_prompt(
    examples: &[(&str, &LayoutTree)],
    test: &TestInput,
    template: &PromptTemplate,
) -> Result<PromptBundle, GenError> {
    template.check()?;
    if examples.is_empty() {
        return Err(GenError::NoExamples);
    }
    let mut text = template.preface.clone();
    for (j, (_, tree)) in examples.iter().enumerate() {
        let canonical = canonicalize(tree);
        let ids = id_list(canonical.leaves().iter().filter_map(|l| l.id.map(str::to_owned)));
        let j = (j + 1).to_string();
        text.push_str(&fill(
            &template.example,
            &[
                ("j", &j),
                ("width", &canonical.canvas.width.to_string()),
                ("height", &canonical.canvas.height.to_string()),
                ("intents", &intent_summary(&canonical.intents)),
                ("ids", &ids),
                ("tree", &serialize_tree(&canonical)),
            ],
        ));
    }
    let intents: Vec<Polygon> = canonicalize(&LayoutTree {
        canvas: test.canvas,
        intents: test.intents.clone(),
        elements: Vec::new(),
    })
    .intents;
    let prefix = opening_tag(test.canvas, &intents);
    let ids = match &test.requested {
        Some(cats) => id_list(cats.iter().enumerate().map(|(i, c)| crate::svg::leaf_id(*c, i))),
        None => "of your choice".to_owned(),
    };
    text.push_str(&fill(
        &template.postscript,
        &[
            ("width", &test.canvas.width.to_string()),
            ("height", &test.canvas.height.to_string()),
            ("intents", &intent_summary(&intents)),
            ("ids", &ids),
            ("prefix", &prefix),
        ],
    ));
    Ok(PromptBundle {
        text,
        example_ids: examples.iter().map(|(id, _)| (*id).to_owned()).collect(),
        test: TestInput {
            intents,
            ..test.clone()
        },
        prefix,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub n: u32,
    pub stop: Vec<String>,
    pub seed: Option<u64>,
    /// Global index of the first requested sample across retries, so that
    /// seeded backends never repeat a sample.
    pub sample_index: u32,
    /// Identifies the test input, for fixture lookups.
    pub query_id: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend timed out")]
    Timeout,
}

impl From<BackendError> for GenError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Unavailable(m) => GenError::BackendUnavailable(m),
            BackendError::Timeout => GenError::Timeout,
        }
    }
}

/// A text-generation service. Returns up to `n` completions; fewer count
/// as failed samples.
pub trait Backend {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, BackendError>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, BackendError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    /// Parsed candidates in sample order, test intents attached.
    pub candidates: Vec<LayoutTree>,
    /// Raw responses of the kept candidates, same order.
    pub responses: Vec<String>,
    pub requests: usize,
    pub malformed: usize,
}

fn svg_tags(text: &str) -> impl Iterator<Item = &str> {
    text.match_indices("<svg").filter_map(move |(i, _)| {
        let rest = &text[i + 4..];
        let b = *rest.as_bytes().first()?;
        if !(b.is_ascii_whitespace() || b == b'>') {
            return None;
        }
        Some(&rest[..rest.find('>').unwrap_or(rest.len())])
    })
}

/// Completes a response into a parseable document: a continuation without
/// a root tag gets the prefix, and every `<svg>` level left open is closed.
/// Root tags carry `width`; group tags never do.
pub fn complete_response(prefix: &str, response: &str) -> String {
    let has_root = svg_tags(response).any(|attrs| attrs.contains("width"));
    let mut text = if has_root {
        response.to_owned()
    } else {
        format!("{prefix}{response}")
    };
    let opened = svg_tags(&text).count();
    let closed = text.matches("</svg>").count();
    for _ in closed..opened {
        text.push_str("</svg>");
    }
    text
}

fn parse_candidate(bundle: &PromptBundle, response: &str) -> Option<LayoutTree> {
    let text = complete_response(&bundle.prefix, response);
    let opts = ParseOptions {
        expected_canvas: Some(bundle.test.canvas),
        ..ParseOptions::default()
    };
    let mut tree = parse_tree_with(&text, opts).ok()?.tree;
    if tree.leaf_count() == 0 {
        return None;
    }
    tree.intents = bundle.test.intents.clone();
    Some(tree)
}

/// Requests `candidates` completions and re-requests the malformed ones up
/// to `max_retries` times.
pub fn generate_layout<B: Backend + ?Sized>(
    backend: &B,
    bundle: &PromptBundle,
    params: &GenParams,
    query_id: &str,
) -> Result<Generated, GenError> {
    let wanted = params.candidates.max(1);
    let mut out = Generated {
        candidates: Vec::new(),
        responses: Vec::new(),
        requests: 0,
        malformed: 0,
    };
    let mut next_index = 0u32;
    let mut pending = wanted;
    for _ in 0..=params.max_retries {
        if pending == 0 {
            break;
        }
        let req = CompletionRequest {
            prompt: bundle.text.clone(),
            temperature: params.temperature,
            max_tokens: params.max_tokens,
            n: pending as u32,
            // group closes look exactly like the root close, so a `</svg>`
            // stop string would truncate nested trees
            stop: Vec::new(),
            seed: params.seed,
            sample_index: next_index,
            query_id: query_id.to_owned(),
        };
        next_index += pending as u32;
        out.requests += 1;
        let responses = backend.complete(&req)?;
        let mut ok = 0;
        for r in responses.into_iter().take(pending) {
            if let Some(t) = parse_candidate(bundle, &r) {
                out.candidates.push(t);
                out.responses.push(r);
                ok += 1;
            }
        }
        // missing responses count as malformed too
        out.malformed += pending - ok;
        pending -= ok;
    }
    if out.candidates.is_empty() {
        return Err(GenError::AllCandidatesMalformed(wanted));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SanitationReport {
    pub clamped: usize,
    pub dropped: usize,
    pub ids_renumbered: bool,
}

fn within(b: &Rect, canvas: Canvas) -> bool {
    const TOL: f64 = 1e-6;
    b.x >= -TOL && b.y >= -TOL && b.right() <= canvas.width as f64 + TOL && b.bottom() <= canvas.height as f64 + TOL
}

/// Shift into `[lo, hi]`, shrinking when the extent does not fit.
fn fit_axis(start: f64, len: f64, lo: f64, hi: f64) -> (f64, f64) {
    let room = hi - lo;
    if len <= room {
        (start.clamp(lo, hi - len), 1.0)
    } else {
        (lo, room / len)
    }
}

/// Moves, then scales, a shape so its box lies within `[inset, size − inset]`.
fn clamp_shape(shape: &Shape, canvas: Canvas, inset: f64) -> Shape {
    let b = shape.bounding_box();
    let (cw, ch) = (canvas.width as f64, canvas.height as f64);
    let (x, sx) = fit_axis(b.x, b.w, inset, cw - inset);
    let (y, sy) = fit_axis(b.y, b.h, inset, ch - inset);
    let mut s = shape.translate(x - b.x, y - b.y);
    if sx < 1.0 || sy < 1.0 {
        s = s.scale_about(Point::new(x, y), sx, sy);
    }
    s
}

struct AbsLeaf {
    category: ElementCategory,
    shape: Shape,
}

fn collect(nodes: &[TreeNode], offset: Point, out: &mut Vec<AbsLeaf>) {
    for n in nodes {
        match n {
            TreeNode::Group { x, y, children } => collect(children, offset.translate(*x, *y), out),
            TreeNode::Leaf { category, shape, .. } => out.push(AbsLeaf {
                category: *category,
                shape: shape.translate(offset.x, offset.y),
            }),
        }
    }
}

fn rebuild(nodes: &[TreeNode], offset: Point, leaves: &mut impl Iterator<Item = Option<AbsLeaf>>) -> Vec<TreeNode> {
    let mut out = Vec::new();
    for n in nodes {
        match n {
            TreeNode::Group { x, y, children } => {
                let o = offset.translate(*x, *y);
                out.push(TreeNode::Group {
                    x: *x,
                    y: *y,
                    children: rebuild(children, o, leaves),
                });
            }
            TreeNode::Leaf { .. } => {
                if let Some(Some(l)) = leaves.next() {
                    out.push(TreeNode::Leaf {
                        id: None,
                        category: l.category,
                        shape: l.shape.translate(-offset.x, -offset.y),
                    });
                }
            }
        }
    }
    out
}

fn ids_of(tree: &LayoutTree) -> Vec<Option<String>> {
    tree.leaves().iter().map(|l| l.id.map(str::to_owned)).collect()
}

fn round_offsets(nodes: &[TreeNode]) -> Vec<TreeNode> {
    nodes
        .iter()
        .map(|n| match n {
            TreeNode::Group { x, y, children } => TreeNode::Group {
                x: round2(*x),
                y: round2(*y),
                children: round_offsets(children),
            },
            leaf => leaf.clone(),
        })
        .collect()
}

/// Clamps every leaf into the canvas (shift first, shrink when it still
/// does not fit), drops degenerate leaves and renumbers ids. Every leaf box
/// of the result lies within the canvas.
pub fn validate_tree(tree: &LayoutTree, canvas: Canvas) -> Result<(LayoutTree, SanitationReport), GenError> {
    let intents: Vec<Polygon> = tree.intents.iter().map(|p| p.clamped(canvas)).collect();
    // leaves are rebuilt against these offsets, which survive canonicalization
    let skeleton = round_offsets(&tree.elements);
    let mut leaves = Vec::new();
    collect(&skeleton, Point::default(), &mut leaves);

    let mut report = SanitationReport::default();
    let mut inset = 0.0;
    let mut result = None;
    // two-decimal rounding can push an edge just past the canvas; retry
    // with a small inset
    for _ in 0..4 {
        report.clamped = 0;
        report.dropped = 0;
        let mut kept = Vec::with_capacity(leaves.len());
        for l in &leaves {
            let b = l.shape.bounding_box();
            if l.shape.validate().is_err() || !(b.w > 0.0 && b.h > 0.0) {
                report.dropped += 1;
                kept.push(None);
                continue;
            }
            let shape = if inset == 0.0 && within(&b, canvas) {
                l.shape.clone()
            } else {
                let s = clamp_shape(&l.shape, canvas, inset);
                if s != l.shape {
                    report.clamped += 1;
                }
                s
            };
            kept.push(Some(AbsLeaf {
                category: l.category,
                shape,
            }));
        }
        let candidate = canonicalize(&LayoutTree {
            canvas,
            intents: intents.clone(),
            elements: rebuild(&skeleton, Point::default(), &mut kept.into_iter()),
        });
        let fits = candidate
            .leaves()
            .iter()
            .all(|l| within(&l.absolute_shape().bounding_box(), canvas));
        result = Some(candidate);
        if fits {
            break;
        }
        inset += 0.01;
    }
    let result = result.unwrap_or_else(|| LayoutTree::new(canvas));
    if result.leaf_count() == 0 {
        return Err(GenError::EmptyAfterSanitation);
    }
    report.ids_renumbered = ids_of(tree) != ids_of(&result);
    Ok((result, report))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RankWeights {
    pub w_ali: f64,
    pub w_ove: f64,
}

impl Default for RankWeights {
    fn default() -> Self {
        Self { w_ali: 1.0, w_ove: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub best: usize,
    pub scores: Vec<f64>,
}

/// `IoU(element map, intent map) − w_ali·Ali − w_ove·Ove`; the highest
/// score wins, ties go to the lowest index.
pub fn rank_candidates(candidates: &[LayoutTree], intent_map: &BinMap, weights: &RankWeights) -> Result<Ranking, GenError> {
    if candidates.is_empty() {
        return Err(GenError::NoCandidates);
    }
    let mut resized: Option<BinMap> = None;
    let mut scores = Vec::with_capacity(candidates.len());
    for c in candidates {
        let layout = flatten_tree(c);
        let map = render_element_map(&layout, intent_map.width());
        let target = if (map.width(), map.height()) == (intent_map.width(), intent_map.height()) {
            intent_map
        } else {
            resized.get_or_insert_with(|| binarize(&GrayMap::from(intent_map).resize_nearest(map.width(), map.height()), 0.5))
        };
        let iou = map.iou(target).unwrap_or(0.0);
        scores.push(iou - weights.w_ali * ali(&layout) - weights.w_ove * ove_numeric(&layout));
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    Ok(Ranking { best, scores })
}
