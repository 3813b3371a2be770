//! Hierarchical layout-tree construction and flattening.
//!
//! Underlays that closely envelop later elements become wrappers: the
//! wrapper and everything it envelops are moved into a nested group whose
//! offset is the wrapper's top-left corner, with child geometry made
//! relative to that offset.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::geom::Rect;
use crate::math::abs;
use crate::svg::leaf_id;
use crate::types::{Canvas, DatasetRecord, Layout, LayoutElement, LayoutTree, Polygon, TreeNode};

/// Tolerance and depth limits for underlay nesting.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct NestParams {
    /// Envelope tolerance in pixels; `None` means `0.01 * max(w, h)`.
    pub epsilon_px: Option<f64>,
    /// Maximum tree depth; a flat tree has depth 1.
    pub max_depth: usize,
}

impl Default for NestParams {
    fn default() -> Self {
        Self {
            epsilon_px: None,
            max_depth: 4,
        }
    }
}

impl NestParams {
    pub fn epsilon_for(&self, canvas: Canvas) -> f64 {
        self.epsilon_px.unwrap_or(0.01 * canvas.max_side())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    pub nest: NestParams,
    /// `false` keeps every element at top level.
    pub hierarchical: bool,
    /// `false` omits intent polygons from the tree.
    pub include_intents: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            nest: NestParams::default(),
            hierarchical: true,
            include_intents: true,
        }
    }
}

/// Envelope condition between a wrapper box `a` and a candidate box `b`:
/// all four edges agree within `eps`.
pub fn envelops(a: &Rect, b: &Rect, eps: f64) -> bool {
    abs(a.x - b.x) <= eps
        && abs(a.y - b.y) <= eps
        && abs(a.right() - b.right()) <= eps
        && abs(a.bottom() - b.bottom()) <= eps
}

struct Item {
    element: LayoutElement,
    bbox: Rect,
}

enum Abs {
    Leaf(LayoutElement),
    Group { x: f64, y: f64, children: Vec<Abs> },
}

/// Underlays first by descending box area, then the rest in reading order.
fn sort_items(elements: &[LayoutElement]) -> Vec<Item> {
    let mut idx: Vec<(usize, Rect, bool)> = elements
        .iter()
        .enumerate()
        .map(|(i, e)| (i, e.bbox(), e.category.is_underlay()))
        .collect();
    idx.sort_by(|a, b| match (a.2, b.2) {
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (true, true) => b.1.area().total_cmp(&a.1.area()).then(a.0.cmp(&b.0)),
        (false, false) => a
            .1
            .y
            .total_cmp(&b.1.y)
            .then(a.1.x.total_cmp(&b.1.x))
            .then(a.0.cmp(&b.0)),
    });
    idx.into_iter()
        .map(|(i, bbox, _)| Item {
            element: elements[i].clone(),
            bbox,
        })
        .collect()
}

fn nest(items: Vec<Item>, level: usize, eps: f64, max_depth: usize) -> Vec<Abs> {
    let n = items.len();
    let mut consumed = vec![false; n];
    let mut slots: Vec<Option<Item>> = items.into_iter().map(Some).collect();
    let mut out = Vec::new();
    for i in 0..n {
        if consumed[i] {
            continue;
        }
        let Some(item) = slots[i].take() else { continue };
        consumed[i] = true;
        if item.element.category.is_underlay() && level < max_depth {
            let members: Vec<usize> = (i + 1..n)
                .filter(|&j| {
                    !consumed[j]
                        && slots[j].as_ref().is_some_and(|m| envelops(&item.bbox, &m.bbox, eps))
                })
                .collect();
            if !members.is_empty() {
                let inner: Vec<Item> = members
                    .iter()
                    .filter_map(|&j| {
                        consumed[j] = true;
                        slots[j].take()
                    })
                    .collect();
                let (x, y) = (item.bbox.x, item.bbox.y);
                let mut children = vec![Abs::Leaf(item.element)];
                children.extend(nest(inner, level + 1, eps, max_depth));
                out.push(Abs::Group { x, y, children });
                continue;
            }
        }
        out.push(Abs::Leaf(item.element));
    }
    out
}

fn relativize(nodes: Vec<Abs>, px: f64, py: f64) -> Vec<TreeNode> {
    nodes
        .into_iter()
        .map(|n| match n {
            Abs::Leaf(e) => TreeNode::Leaf {
                id: None,
                category: e.category,
                shape: if px == 0.0 && py == 0.0 {
                    e.shape
                } else {
                    e.shape.translate(-px, -py)
                },
            },
            Abs::Group { x, y, children } => TreeNode::Group {
                x: x - px,
                y: y - py,
                children: relativize(children, x, y),
            },
        })
        .collect()
}

/// Assigns `{category}_{i}` ids in depth-first order.
pub fn assign_ids(nodes: &mut [TreeNode]) {
    fn walk(nodes: &mut [TreeNode], index: &mut usize) {
        for n in nodes {
            match n {
                TreeNode::Leaf { id, category, .. } => {
                    *id = Some(leaf_id(*category, *index));
                    *index += 1;
                }
                TreeNode::Group { children, .. } => walk(children, index),
            }
        }
    }
    let mut index = 0;
    walk(nodes, &mut index);
}

/// Builds a layout tree from elements and intent polygons.
pub fn build_tree_from(
    canvas: Canvas,
    elements: &[LayoutElement],
    intents: &[Polygon],
    opts: &BuildOptions,
) -> LayoutTree {
    let items = sort_items(elements);
    let abs_nodes = if opts.hierarchical {
        nest(items, 1, opts.nest.epsilon_for(canvas), opts.nest.max_depth.max(1))
    } else {
        items.into_iter().map(|i| Abs::Leaf(i.element)).collect()
    };
    let mut nodes = relativize(abs_nodes, 0.0, 0.0);
    assign_ids(&mut nodes);
    LayoutTree {
        canvas,
        intents: if opts.include_intents {
            intents.iter().map(|p| p.clamped(canvas)).collect()
        } else {
            Vec::new()
        },
        elements: nodes,
    }
}

/// Builds the layout tree of an annotated record.
pub fn build_tree(record: &DatasetRecord, opts: &BuildOptions) -> LayoutTree {
    build_tree_from(record.canvas, &record.elements, &record.intent.polygons, opts)
}

/// Absolute-coordinate elements in depth-first order; intents excluded.
pub fn flatten_tree(tree: &LayoutTree) -> Layout {
    Layout::new(
        tree.canvas,
        tree.leaves()
            .iter()
            .map(|l| LayoutElement::new(l.category, l.absolute_shape()))
            .collect(),
    )
}
