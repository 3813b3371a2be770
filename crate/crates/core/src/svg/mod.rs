//! The layout-tree SVG dialect.
//!
//! ```text
//! tree     = "<svg" canvas xmlns ">" intent* node* "</svg>"
//! intent   = "<polygon points=\"" pair (" " pair)* "\"/>"
//! node     = group | rect | ellipse | path
//! group    = "<svg x=\"" num "\" y=\"" num "\">" node* "</svg>"
//! rect     = "<rect x y width height [transform=\"rotate(a cx cy)\"] id/>"
//! ellipse  = "<ellipse cx cy rx ry id/>"
//! path     = "<path d=\"M x y (C x y x y x y)+ [Z]\" id/>"
//! id       = category "_" index
//! ```
//!
//! Serialization is canonical: numbers are rounded to two fraction digits
//! and printed in shortest form, attribute order is fixed, and leaf ids are
//! renumbered depth-first. The parser is tolerant: it extracts the first
//! `<svg>` block from surrounding prose and skips constructs it does not
//! understand, counting each as a warning.

mod canonical;
mod parse;
mod path_data;
mod write;
pub(crate) mod xml;

pub use canonical::canonicalize;
pub use parse::{parse_tree, parse_tree_with, ParseOptions, ParseOutcome};
pub use path_data::parse_path_data;
pub use write::{fmt_num, opening_tag, path_data, serialize_tree, write_shape};

pub const SVG_NS: &str = "http://www.w3.org/2000/svg";

/// Default limit on nested `<svg>` elements, including the root.
pub const DEFAULT_MAX_DEPTH: usize = 6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DialectError {
    #[error("no <svg> block found")]
    NoSvgBlock,
    #[error("malformed geometry: {0}")]
    MalformedGeometry(alloc::string::String),
    #[error("nesting deeper than {0} levels")]
    DepthExceeded(usize),
}

/// Leaf id `{token}_{index}`.
pub fn leaf_id(category: crate::ElementCategory, index: usize) -> alloc::string::String {
    alloc::format!("{}_{}", category.token(), index)
}

/// Splits `{token}_{index}` into its category; `None` when malformed.
pub fn category_from_id(id: &str) -> Option<crate::ElementCategory> {
    let (token, index) = id.rsplit_once('_')?;
    if index.is_empty() || !index.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    crate::ElementCategory::from_token(token)
}
