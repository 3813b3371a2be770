//! Offline backend.
//!
//! Fixture mode answers a query id with canned responses, cycling by
//! sample index. Every other query is answered by echoing the first
//! example tree of the prompt, scaled to the test canvas, with each
//! top-level node shifted by a small seeded offset. Responses are bodies
//! only (no root tag, no intents), as a completion of the prompt's
//! trailing opening tag would be.

use std::collections::BTreeMap;
use std::path::Path;

use postree_core::generation::{Backend, BackendError, CompletionRequest};
use postree_core::svg::{opening_tag, parse_tree, serialize_tree};
use postree_core::{Canvas, LayoutTree, Point, TreeNode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::{fsio, seed, Error};

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    fixtures: BTreeMap<String, Vec<String>>,
    seed: u64,
    /// Largest shift in test-canvas pixels.
    pub jitter_px: f64,
}

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        Self {
            fixtures: BTreeMap::new(),
            seed,
            jitter_px: 4.0,
        }
    }

    pub fn with_fixtures(mut self, fixtures: BTreeMap<String, Vec<String>>) -> Self {
        self.fixtures = fixtures;
        self
    }

    /// Fixture file: `{"<query id>": "response" | ["response", ...]}`.
    pub fn load_fixtures(path: &Path) -> Result<BTreeMap<String, Vec<String>>, Error> {
        let raw: BTreeMap<String, OneOrMany> = fsio::read_json(path)?;
        Ok(raw
            .into_iter()
            .map(|(k, v)| {
                let v = match v {
                    OneOrMany::One(s) => vec![s],
                    OneOrMany::Many(v) => v,
                };
                (k, v)
            })
            .collect())
    }

    fn echo(&self, prompt: &str, query_id: &str, sample: u32) -> String {
        let Some(example) = documents(prompt).next() else {
            return String::new();
        };
        let Some(canvas) = test_canvas(prompt) else {
            return String::new();
        };
        let Ok(tree) = parse_tree(example, None) else {
            return String::new();
        };
        let sx = canvas.width as f64 / tree.canvas.width as f64;
        let sy = canvas.height as f64 / tree.canvas.height as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(self.seed, &format!("mock/{query_id}/{sample}")));
        let j = self.jitter_px;
        let elements = tree
            .elements
            .iter()
            .map(|n| {
                let n = scale(n, sx, sy);
                let dx = if j > 0.0 { rng.random_range(-j..=j) } else { 0.0 };
                let dy = if j > 0.0 { rng.random_range(-j..=j) } else { 0.0 };
                shift(n, dx, dy)
            })
            .collect();
        let out = LayoutTree {
            canvas,
            intents: Vec::new(),
            elements,
        };
        let text = serialize_tree(&out);
        let head = opening_tag(canvas, &[]).len();
        text[head..text.len() - "</svg>".len()].to_owned()
    }
}

fn scale(n: &TreeNode, sx: f64, sy: f64) -> TreeNode {
    match n {
        TreeNode::Group { x, y, children } => TreeNode::Group {
            x: x * sx,
            y: y * sy,
            children: children.iter().map(|c| scale(c, sx, sy)).collect(),
        },
        TreeNode::Leaf { id, category, shape } => TreeNode::Leaf {
            id: id.clone(),
            category: *category,
            shape: shape.scale_about(Point::new(0.0, 0.0), sx, sy),
        },
    }
}

fn shift(n: TreeNode, dx: f64, dy: f64) -> TreeNode {
    match n {
        TreeNode::Group { x, y, children } => TreeNode::Group {
            x: x + dx,
            y: y + dy,
            children,
        },
        TreeNode::Leaf { id, category, shape } => TreeNode::Leaf {
            id,
            category,
            shape: shape.translate(dx, dy),
        },
    }
}

/// Root tags (those with a `width`) with their byte offsets.
fn root_tags(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.match_indices("<svg").filter_map(move |(i, _)| {
        let rest = &text[i + 4..];
        let b = *rest.as_bytes().first()?;
        if !(b.is_ascii_whitespace() || b == b'>') {
            return None;
        }
        let tag = &rest[..rest.find('>')?];
        tag.contains("width").then_some((i, tag))
    })
}

/// Complete root documents in order of appearance.
fn documents(text: &str) -> impl Iterator<Item = &str> {
    root_tags(text).filter_map(move |(start, _)| {
        let mut depth = 0usize;
        let mut pos = start;
        loop {
            let rest = &text[pos..];
            let open = rest.find("<svg");
            let close = rest.find("</svg>")?;
            match open {
                Some(o) if o < close => {
                    depth += 1;
                    pos += o + 4;
                }
                _ => {
                    depth -= 1;
                    pos += close + "</svg>".len();
                    if depth == 0 {
                        return Some(&text[start..pos]);
                    }
                }
            }
        }
    })
}

/// Canvas of the last root tag, the test prefix that ends the prompt.
fn test_canvas(prompt: &str) -> Option<Canvas> {
    let (_, tag) = root_tags(prompt).last()?;
    let attr = |name: &str| -> Option<u32> {
        let key = format!("{name}=\"");
        let at = tag.find(&key)? + key.len();
        let end = tag[at..].find('"')? + at;
        tag[at..end].trim().parse::<f64>().ok().map(|v| v.round() as u32)
    };
    Canvas::new(attr("width")?, attr("height")?).ok()
}

impl Backend for MockBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<String>, BackendError> {
        Ok((0..req.n)
            .map(|i| {
                let sample = req.sample_index + i;
                match self.fixtures.get(&req.query_id) {
                    Some(list) if !list.is_empty() => list[sample as usize % list.len()].clone(),
                    _ => self.echo(&req.prompt, &req.query_id, sample),
                }
            })
            .collect())
    }
}
