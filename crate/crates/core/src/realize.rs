//! Mockups and material synthesis.
//!
//! `mockup` turns a layout tree into a plain SVG poster skeleton: text
//! leaves become empty `<text>` elements, logos and embellishments become
//! `<image>` placeholders and underlays become filled shapes. `synthesize`
//! then fills placeholders by id. `llm_realize` asks a backend for a styled
//! version and falls back to the deterministic pair.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::generation::{Backend, CompletionRequest};
use crate::geom::Shape;
use crate::math;
use crate::svg::xml::{attr, escape, Scanner, Token};
use crate::svg::{canonicalize, fmt_num, path_data, serialize_tree, write_shape, SVG_NS};
use crate::types::{BaseCategory, ElementCategory, LayoutTree, TextVariant, TreeNode};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RealizeError {
    #[error("no element with id `{0}`")]
    UnknownId(String),
    #[error("material for `{0}` does not fit its element")]
    KindMismatch(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockupOptions {
    /// Font size as a fraction of the box height (box width for vertical
    /// text).
    pub font_scale: f64,
    pub min_font_size: f64,
    pub underlay_fill: String,
}

impl Default for MockupOptions {
    fn default() -> Self {
        Self {
            font_scale: 0.7,
            min_font_size: 8.0,
            underlay_fill: "#d9d9d9".to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TextMaterial {
    pub text: String,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub font_family: Option<String>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub font_weight: Option<String>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub font_size: Option<f64>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub fill: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(untagged))]
pub enum Material {
    Text(TextMaterial),
    Image { href: String },
}

impl Material {
    pub fn text(s: &str) -> Self {
        Material::Text(TextMaterial {
            text: s.to_owned(),
            ..TextMaterial::default()
        })
    }

    pub fn image(href: &str) -> Self {
        Material::Image { href: href.to_owned() }
    }
}

/// Leaf id to content.
pub type Materials = BTreeMap<String, Material>;

fn font_size(extent: f64, opts: &MockupOptions) -> f64 {
    math::round2((opts.font_scale * extent).max(opts.min_font_size).min(extent.max(0.01)))
}

fn ellipse_path(cx: f64, cy: f64, rx: f64, ry: f64) -> String {
    let (x0, x1, y, rx, ry) = (fmt_num(cx - rx), fmt_num(cx + rx), fmt_num(cy), fmt_num(rx), fmt_num(ry));
    format!("M {x0} {y} A {rx} {ry} 0 1 1 {x1} {y} A {rx} {ry} 0 1 1 {x0} {y}")
}

fn write_text(out: &mut String, id: &str, category: ElementCategory, shape: &Shape, opts: &MockupOptions) {
    match shape {
        Shape::Rect(r) if category.text_variant() == TextVariant::Vertical => {
            let fs = font_size(r.w, opts);
            let _ = write!(
                out,
                "<text id=\"{id}\" x=\"{}\" y=\"{}\" font-size=\"{}\" writing-mode=\"vertical-rl\"></text>",
                fmt_num(r.x + r.w / 2.0),
                fmt_num(r.y),
                fmt_num(fs)
            );
        }
        Shape::Rect(r) => {
            let fs = font_size(r.h, opts);
            let _ = write!(
                out,
                "<text id=\"{id}\" x=\"{}\" y=\"{}\" font-size=\"{}\"></text>",
                fmt_num(r.x),
                fmt_num(r.y + fs),
                fmt_num(fs)
            );
        }
        Shape::RotatedRect {
            x,
            y,
            w,
            h,
            angle_deg,
        } => {
            let fs = font_size(*h, opts);
            let _ = write!(
                out,
                "<text id=\"{id}\" x=\"{}\" y=\"{}\" font-size=\"{}\" transform=\"rotate({} {} {})\"></text>",
                fmt_num(*x),
                fmt_num(y + fs),
                fmt_num(fs),
                fmt_num(*angle_deg),
                fmt_num(x + w / 2.0),
                fmt_num(y + h / 2.0)
            );
        }
        Shape::Ellipse { .. } | Shape::Path { .. } => {
            let d = match shape {
                Shape::Ellipse { cx, cy, rx, ry } => ellipse_path(*cx, *cy, *rx, *ry),
                _ => path_data(shape),
            };
            let b = shape.bounding_box();
            // text along a curve: size from the curve's extent
            let fs = math::round2((0.1 * b.w.max(b.h)).clamp(opts.min_font_size, 64.0));
            let _ = write!(
                out,
                "<defs><path id=\"{id}-path\" d=\"{d}\"/></defs><text id=\"{id}\" font-size=\"{}\"><textPath href=\"#{id}-path\"></textPath></text>",
                fmt_num(fs)
            );
        }
    }
}

fn write_image(out: &mut String, id: &str, shape: &Shape) {
    match shape {
        Shape::RotatedRect {
            x,
            y,
            w,
            h,
            angle_deg,
        } => {
            let _ = write!(
                out,
                "<image id=\"{id}\" href=\"\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" transform=\"rotate({} {} {})\"/>",
                fmt_num(*x),
                fmt_num(*y),
                fmt_num(*w),
                fmt_num(*h),
                fmt_num(*angle_deg),
                fmt_num(x + w / 2.0),
                fmt_num(y + h / 2.0)
            );
        }
        _ => {
            let b = shape.bounding_box();
            let _ = write!(
                out,
                "<image id=\"{id}\" href=\"\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/>",
                fmt_num(b.x),
                fmt_num(b.y),
                fmt_num(b.w),
                fmt_num(b.h)
            );
        }
    }
}

fn write_nodes(out: &mut String, nodes: &[TreeNode], opts: &MockupOptions) {
    let is_underlay = |n: &&TreeNode| matches!(n, TreeNode::Leaf { category, .. } if category.is_underlay());
    let ordered = nodes.iter().filter(is_underlay).chain(nodes.iter().filter(|n| !is_underlay(n)));
    for n in ordered {
        match n {
            TreeNode::Group { x, y, children } => {
                let _ = write!(out, "<svg x=\"{}\" y=\"{}\" overflow=\"visible\">", fmt_num(*x), fmt_num(*y));
                write_nodes(out, children, opts);
                out.push_str("</svg>");
            }
            TreeNode::Leaf {
                id,
                category,
                shape,
            } => {
                let id = id.as_deref().unwrap_or("");
                match category.base() {
                    BaseCategory::Text => write_text(out, id, *category, shape, opts),
                    BaseCategory::Underlay => {
                        write_shape(out, shape, id, &format!("fill=\"{}\"", escape(&opts.underlay_fill)))
                    }
                    BaseCategory::Logo | BaseCategory::Embellishment => write_image(out, id, shape),
                }
            }
        }
    }
}

pub fn mockup(tree: &LayoutTree) -> String {
    mockup_with(tree, &MockupOptions::default())
}

/// Mockup of the canonical form of `tree`; underlays are drawn before
/// their siblings.
pub fn mockup_with(tree: &LayoutTree, opts: &MockupOptions) -> String {
    let t = canonicalize(tree);
    let (w, h) = (t.canvas.width, t.canvas.height);
    let mut out = format!("<svg width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" xmlns=\"{SVG_NS}\">");
    write_nodes(&mut out, &t.elements, opts);
    out.push_str("</svg>");
    out
}

/// Ids of all elements outside `<defs>`, in document order.
pub fn element_ids(svg: &str) -> Vec<String> {
    let mut sc = Scanner::new(svg);
    let mut defs = 0usize;
    let mut out = Vec::new();
    while let Some(t) = sc.next_tag() {
        match t.token {
            Token::Start {
                name,
                attrs,
                self_closing,
            } => {
                if name == "defs" {
                    if !self_closing {
                        defs += 1;
                    }
                    continue;
                }
                if defs == 0 {
                    if let Some(id) = attr(&attrs, "id") {
                        out.push(id.to_owned());
                    }
                }
            }
            Token::End { name } => {
                if name == "defs" {
                    defs = defs.saturating_sub(1);
                }
            }
        }
    }
    out
}

/// Whether start and end tags nest properly and one root element spans
/// the document.
pub fn is_well_formed(svg: &str) -> bool {
    let mut sc = Scanner::new(svg);
    let mut stack: Vec<&str> = Vec::new();
    let mut roots = 0;
    while let Some(t) = sc.next_tag() {
        match t.token {
            Token::Start {
                name, self_closing, ..
            } => {
                if stack.is_empty() {
                    roots += 1;
                }
                if !self_closing {
                    stack.push(name);
                }
            }
            Token::End { name } => {
                if stack.pop() != Some(name) {
                    return false;
                }
            }
        }
    }
    stack.is_empty() && roots == 1
}

fn rewrite_start(name: &str, attrs: &[(&str, &str)], set: &[(&str, String)], self_closing: bool) -> String {
    let mut out = format!("<{name}");
    for (k, v) in attrs {
        if set.iter().any(|(s, _)| s == k) {
            continue;
        }
        let _ = write!(out, " {k}=\"{v}\"");
    }
    for (k, v) in set {
        let _ = write!(out, " {k}=\"{}\"", escape(v));
    }
    out.push_str(if self_closing { "/>" } else { ">" });
    out
}

struct Edit {
    start: usize,
    end: usize,
    text: String,
}

/// Fills placeholders: text content (and font hints) for `<text>` ids,
/// `href` for `<image>` ids. Replaces rather than appends, so applying
/// the same materials twice gives the same document.
pub fn synthesize(mockup_svg: &str, materials: &Materials) -> Result<String, RealizeError> {
    let mut sc = Scanner::new(mockup_svg);
    let mut edits: Vec<Edit> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut defs = 0usize;
    while let Some(t) = sc.next_tag() {
        let (name, attrs, self_closing) = match t.token {
            Token::Start {
                name,
                attrs,
                self_closing,
            } => (name, attrs, self_closing),
            Token::End { name } => {
                if name == "defs" {
                    defs = defs.saturating_sub(1);
                }
                continue;
            }
        };
        if name == "defs" {
            if !self_closing {
                defs += 1;
            }
            continue;
        }
        if defs > 0 {
            continue;
        }
        let Some(id) = attr(&attrs, "id") else { continue };
        let Some(material) = materials.get(id) else { continue };
        seen.insert(id.to_owned());
        match (name, material) {
            ("image", Material::Image { href }) => edits.push(Edit {
                start: t.start,
                end: t.end,
                text: rewrite_start(name, &attrs, &[("href", href.clone())], self_closing),
            }),
            ("text", Material::Text(m)) => {
                let mut set: Vec<(&str, String)> = Vec::new();
                if let Some(f) = &m.font_family {
                    set.push(("font-family", f.clone()));
                }
                if let Some(f) = &m.font_weight {
                    set.push(("font-weight", f.clone()));
                }
                if let Some(f) = m.font_size {
                    set.push(("font-size", fmt_num(f)));
                }
                if let Some(f) = &m.fill {
                    set.push(("fill", f.clone()));
                }
                edits.push(Edit {
                    start: t.start,
                    end: t.end,
                    text: rewrite_start(name, &attrs, &set, false),
                });
                if self_closing {
                    edits.push(Edit {
                        start: t.end,
                        end: t.end,
                        text: format!("{}</text>", escape(&m.text)),
                    });
                    continue;
                }
                // content runs to `</text>`, or sits inside a textPath
                let mut content_start = t.end;
                let mut content_end = mockup_svg.len();
                let mut in_path = false;
                while let Some(inner) = sc.next_tag() {
                    match inner.token {
                        Token::Start { name: "textPath", .. } if !in_path => {
                            in_path = true;
                            content_start = inner.end;
                        }
                        Token::End { name: "textPath" } if in_path => {
                            content_end = inner.start;
                            break;
                        }
                        Token::End { name: "text" } => {
                            content_end = inner.start;
                            break;
                        }
                        _ => {}
                    }
                }
                edits.push(Edit {
                    start: content_start,
                    end: content_end,
                    text: escape(&m.text),
                });
            }
            _ => return Err(RealizeError::KindMismatch(id.to_owned())),
        }
    }
    if let Some(k) = materials.keys().find(|k| !seen.contains(*k)) {
        return Err(RealizeError::UnknownId(k.clone()));
    }
    let mut out = String::with_capacity(mockup_svg.len() + 64);
    let mut pos = 0;
    for e in &edits {
        out.push_str(&mockup_svg[pos..e.start]);
        out.push_str(&e.text);
        pos = e.end;
    }
    out.push_str(&mockup_svg[pos..]);
    Ok(out)
}

fn content_table(materials: &Materials) -> String {
    let mut out = String::new();
    for (id, m) in materials {
        match m {
            Material::Text(t) => {
                let _ = writeln!(out, "{id}: text \"{}\"", t.text);
            }
            Material::Image { href } => {
                let _ = writeln!(out, "{id}: image {href}");
            }
        }
    }
    if out.is_empty() {
        out.push_str("(none)\n");
    }
    out
}

/// Follow-up prompt asking a backend to style the mockup.
pub fn realization_prompt(tree: &LayoutTree, materials: &Materials, style_hint: &str) -> String {
    format!(
        "Turn this poster layout into a finished SVG poster.\nLayout:\n{}\nContents by element id:\n{}Style: {}\nReturn one complete <svg> document that keeps every element id and position.\n",
        serialize_tree(&canonicalize(tree)),
        content_table(materials),
        style_hint
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Realized {
    pub svg: String,
    /// The deterministic path was used.
    pub fallback: bool,
}

fn extract_svg(response: &str) -> Option<&str> {
    let start = response.find("<svg")?;
    let end = response.rfind("</svg>")? + "</svg>".len();
    (end > start).then(|| &response[start..end])
}

/// Backend realization, accepted only when the response is a well-formed
/// SVG carrying every leaf id; otherwise `mockup` + `synthesize`.
pub fn llm_realize<B: Backend + ?Sized>(
    backend: &B,
    tree: &LayoutTree,
    materials: &Materials,
    style_hint: &str,
    temperature: f64,
    max_tokens: u32,
) -> Result<Realized, RealizeError> {
    let deterministic = synthesize(&mockup(tree), materials)?;
    let req = CompletionRequest {
        prompt: realization_prompt(tree, materials, style_hint),
        temperature,
        max_tokens,
        n: 1,
        stop: vec![],
        seed: None,
        sample_index: 0,
        query_id: String::new(),
    };
    let wanted: BTreeSet<String> = canonicalize(tree)
        .leaves()
        .iter()
        .filter_map(|l| l.id.map(str::to_owned))
        .collect();
    if let Ok(responses) = backend.complete(&req) {
        if let Some(svg) = responses.first().and_then(|r| extract_svg(r)) {
            let ids: BTreeSet<String> = element_ids(svg).into_iter().collect();
            if is_well_formed(svg) && wanted.is_subset(&ids) {
                return Ok(Realized {
                    svg: svg.to_owned(),
                    fallback: false,
                });
            }
        }
    }
    Ok(Realized {
        svg: deterministic,
        fallback: true,
    })
}
