//! Domain values shared by every module.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::geom::{Point, Rect, Shape, ShapeError};
use crate::raster::GrayMap;

/// Image resolution a layout is drawn against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TypeError {
    #[error("canvas must be at least 1x1, got {0}x{1}")]
    EmptyCanvas(u32, u32),
    #[error("unknown element category token {0:?}")]
    UnknownCategory(String),
    #[error("text variant given for non-text category")]
    VariantOnNonText,
    #[error("intent polygon has {0} vertices, needs at least 3")]
    DegeneratePolygon(usize),
    #[error("invalid shape: {0}")]
    Shape(#[from] ShapeError),
}

impl Canvas {
    pub fn new(width: u32, height: u32) -> Result<Self, TypeError> {
        if width == 0 || height == 0 {
            return Err(TypeError::EmptyCanvas(width, height));
        }
        Ok(Self { width, height })
    }

    pub fn rect(&self) -> Rect {
        Rect::new(0.0, 0.0, self.width as f64, self.height as f64)
    }

    pub fn area(&self) -> f64 {
        self.width as f64 * self.height as f64
    }

    pub fn max_side(&self) -> f64 {
        self.width.max(self.height) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BaseCategory {
    Text,
    Logo,
    Underlay,
    Embellishment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum TextVariant {
    #[default]
    General,
    Vertical,
    Rotated,
    Ellipse,
    Curve,
}

/// Element category; `text_variant` is only meaningful for text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "String", into = "String"))]
pub struct ElementCategory {
    base: BaseCategory,
    text_variant: TextVariant,
}

impl ElementCategory {
    pub const TEXT: Self = Self::plain(BaseCategory::Text);
    pub const LOGO: Self = Self::plain(BaseCategory::Logo);
    pub const UNDERLAY: Self = Self::plain(BaseCategory::Underlay);
    pub const EMBELLISHMENT: Self = Self::plain(BaseCategory::Embellishment);

    /// All printable category tokens, in a fixed order.
    pub const TOKENS: [&'static str; 8] = [
        "text",
        "textv",
        "textr",
        "texts",
        "textc",
        "logo",
        "underlay",
        "embellishment",
    ];

    pub const fn plain(base: BaseCategory) -> Self {
        Self {
            base,
            text_variant: TextVariant::General,
        }
    }

    pub fn new(base: BaseCategory, text_variant: TextVariant) -> Result<Self, TypeError> {
        if base != BaseCategory::Text && text_variant != TextVariant::General {
            return Err(TypeError::VariantOnNonText);
        }
        Ok(Self { base, text_variant })
    }

    pub const fn text(variant: TextVariant) -> Self {
        Self {
            base: BaseCategory::Text,
            text_variant: variant,
        }
    }

    pub fn base(&self) -> BaseCategory {
        self.base
    }

    pub fn text_variant(&self) -> TextVariant {
        self.text_variant
    }

    pub fn is_underlay(&self) -> bool {
        self.base == BaseCategory::Underlay
    }

    pub fn is_text(&self) -> bool {
        self.base == BaseCategory::Text
    }

    /// Token used in leaf ids and dataset files.
    pub fn token(&self) -> &'static str {
        match (self.base, self.text_variant) {
            (BaseCategory::Text, TextVariant::General) => "text",
            (BaseCategory::Text, TextVariant::Vertical) => "textv",
            (BaseCategory::Text, TextVariant::Rotated) => "textr",
            (BaseCategory::Text, TextVariant::Ellipse) => "texts",
            (BaseCategory::Text, TextVariant::Curve) => "textc",
            (BaseCategory::Logo, _) => "logo",
            (BaseCategory::Underlay, _) => "underlay",
            (BaseCategory::Embellishment, _) => "embellishment",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Some(match token {
            "text" => Self::TEXT,
            "textv" => Self::text(TextVariant::Vertical),
            "textr" => Self::text(TextVariant::Rotated),
            "texts" => Self::text(TextVariant::Ellipse),
            "textc" => Self::text(TextVariant::Curve),
            "logo" => Self::LOGO,
            "underlay" => Self::UNDERLAY,
            "embellishment" => Self::EMBELLISHMENT,
            _ => return None,
        })
    }
}

impl fmt::Display for ElementCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for ElementCategory {
    type Err = TypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_token(s).ok_or_else(|| TypeError::UnknownCategory(s.to_string()))
    }
}

impl TryFrom<String> for ElementCategory {
    type Error = TypeError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ElementCategory> for String {
    fn from(c: ElementCategory) -> Self {
        c.token().to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayoutElement {
    pub category: ElementCategory,
    pub shape: Shape,
}

impl LayoutElement {
    pub fn new(category: ElementCategory, shape: Shape) -> Self {
        Self { category, shape }
    }

    pub fn bbox(&self) -> Rect {
        self.shape.bounding_box()
    }
}

/// A flat, absolute-coordinate layout.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Layout {
    pub canvas: Canvas,
    pub elements: Vec<LayoutElement>,
}

impl Layout {
    pub fn new(canvas: Canvas, elements: Vec<LayoutElement>) -> Self {
        Self { canvas, elements }
    }

    pub fn non_underlays(&self) -> impl Iterator<Item = &LayoutElement> {
        self.elements.iter().filter(|e| !e.category.is_underlay())
    }

    pub fn underlays(&self) -> impl Iterator<Item = &LayoutElement> {
        self.elements.iter().filter(|e| e.category.is_underlay())
    }
}

/// Closed polygon; the closing edge is implicit.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Polygon(pub Vec<Point>);

impl Polygon {
    pub fn new(points: Vec<Point>) -> Result<Self, TypeError> {
        if points.len() < 3 {
            return Err(TypeError::DegeneratePolygon(points.len()));
        }
        Ok(Self(points))
    }

    pub fn points(&self) -> &[Point] {
        &self.0
    }

    pub fn bbox(&self) -> Rect {
        Rect::enclosing(self.0.iter().copied()).unwrap_or_default()
    }

    pub fn area(&self) -> f64 {
        crate::math::abs(crate::geom::signed_area(&self.0))
    }

    /// Clamps every vertex into the canvas rectangle.
    pub fn clamped(&self, canvas: Canvas) -> Polygon {
        let (w, h) = (canvas.width as f64, canvas.height as f64);
        Polygon(
            self.0
                .iter()
                .map(|p| Point::new(p.x.clamp(0.0, w), p.y.clamp(0.0, h)))
                .collect(),
        )
    }
}

/// Design intent of an image: vectorized regions, the raw intent map, and
/// the latent embedding used for example retrieval.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DesignIntent {
    #[cfg_attr(feature = "serde", serde(default))]
    pub polygons: Vec<Polygon>,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub map: Option<GrayMap>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub embedding: Option<Vec<f64>>,
}

/// Element node of a layout tree.
///
/// Group offsets are relative to the enclosing group; leaf geometry is
/// relative to the innermost group (absolute at top level).
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Group {
        x: f64,
        y: f64,
        children: Vec<TreeNode>,
    },
    Leaf {
        id: Option<String>,
        category: ElementCategory,
        shape: Shape,
    },
}

impl TreeNode {
    pub fn leaf(category: ElementCategory, shape: Shape) -> Self {
        TreeNode::Leaf {
            id: None,
            category,
            shape,
        }
    }

    /// Levels below and including this node; a leaf has depth 1.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Group { children, .. } => {
                1 + children.iter().map(TreeNode::depth).max().unwrap_or(0)
            }
        }
    }
}

/// Hierarchical layout: intent polygons followed by (possibly nested)
/// element nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutTree {
    pub canvas: Canvas,
    pub intents: Vec<Polygon>,
    pub elements: Vec<TreeNode>,
}

/// A leaf visited in depth-first order with its absolute offset.
#[derive(Debug, Clone, Copy)]
pub struct LeafRef<'a> {
    pub id: Option<&'a str>,
    pub category: ElementCategory,
    /// Geometry as stored in the tree (relative to `offset`).
    pub shape: &'a Shape,
    pub offset: Point,
}

impl LeafRef<'_> {
    pub fn absolute_shape(&self) -> Shape {
        if self.offset.x == 0.0 && self.offset.y == 0.0 {
            self.shape.clone()
        } else {
            self.shape.translate(self.offset.x, self.offset.y)
        }
    }
}

impl LayoutTree {
    pub fn new(canvas: Canvas) -> Self {
        Self {
            canvas,
            intents: Vec::new(),
            elements: Vec::new(),
        }
    }

    /// Tree depth where a flat tree has depth 1 (0 when there are no
    /// element nodes).
    pub fn depth(&self) -> usize {
        self.elements.iter().map(TreeNode::depth).max().unwrap_or(0)
    }

    /// Leaves in depth-first order.
    pub fn leaves(&self) -> Vec<LeafRef<'_>> {
        fn walk<'a>(nodes: &'a [TreeNode], offset: Point, out: &mut Vec<LeafRef<'a>>) {
            for n in nodes {
                match n {
                    TreeNode::Group { x, y, children } => {
                        walk(children, offset.translate(*x, *y), out)
                    }
                    TreeNode::Leaf {
                        id,
                        category,
                        shape,
                    } => out.push(LeafRef {
                        id: id.as_deref(),
                        category: *category,
                        shape,
                        offset,
                    }),
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.elements, Point::default(), &mut out);
        out
    }

    pub fn leaf_count(&self) -> usize {
        fn count(nodes: &[TreeNode]) -> usize {
            nodes
                .iter()
                .map(|n| match n {
                    TreeNode::Leaf { .. } => 1,
                    TreeNode::Group { children, .. } => count(children),
                })
                .sum()
        }
        count(&self.elements)
    }

    pub fn validate(&self) -> Result<(), TypeError> {
        for p in &self.intents {
            if p.0.len() < 3 {
                return Err(TypeError::DegeneratePolygon(p.0.len()));
            }
        }
        for leaf in self.leaves() {
            leaf.shape.validate()?;
        }
        Ok(())
    }
}

/// One image/layout pair from a dataset file.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetRecord {
    pub record_id: String,
    pub canvas: Canvas,
    #[cfg_attr(feature = "serde", serde(default))]
    pub elements: Vec<LayoutElement>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub intent: DesignIntent,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub image_path: Option<String>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub saliency_path: Option<String>,
}

impl DatasetRecord {
    pub fn layout(&self) -> Layout {
        Layout::new(self.canvas, self.elements.clone())
    }

    pub fn is_annotated(&self) -> bool {
        !self.elements.is_empty()
    }
}
