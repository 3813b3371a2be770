//! Graphic, content and standardized layout metrics.
//!
//! Graphic metrics (`ove`, `ali`, `und`) work on bounding boxes or on
//! per-element layers. Content metrics compare the rendered element map
//! against saliency and design-intent maps. `standardize` turns the
//! content means of a generated set into distances from train-split
//! statistics, and `avg` folds everything into one lower-is-better score.

use alloc::vec::Vec;

use crate::math;
use crate::raster::{
    binarize, render_element_map, render_elements, render_layers, BinMap, GrayMap, RasterError,
    ELEMENT_MAP_WIDTH,
};
use crate::types::Layout;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("avg needs `{0}`, which is absent")]
    MissingComponent(&'static str),
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricReport {
    pub ove: Option<f64>,
    pub ali: Option<f64>,
    pub und_l: Option<f64>,
    pub und_s: Option<f64>,
    pub uti: Option<f64>,
    pub occ: Option<f64>,
    pub rea: Option<f64>,
    pub cov: Option<f64>,
    pub con: Option<f64>,
}

/// Content means of the train split.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReferenceStats {
    pub cov_l: f64,
    pub con_l: f64,
    pub uti_l: f64,
    pub occ_l: f64,
}

impl ReferenceStats {
    /// Means over `reports`; `None` if any of the four has no value at all.
    pub fn from_reports(reports: &[MetricReport]) -> Option<Self> {
        Some(Self {
            cov_l: mean_of(reports, |r| r.cov)?,
            con_l: mean_of(reports, |r| r.con)?,
            uti_l: mean_of(reports, |r| r.uti)?,
            occ_l: mean_of(reports, |r| r.occ)?,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AggregateReport {
    pub ove: Option<f64>,
    pub ali: Option<f64>,
    pub und_l: Option<f64>,
    pub und_s: Option<f64>,
    pub uti: Option<f64>,
    pub occ: Option<f64>,
    pub rea: Option<f64>,
    pub cov: Option<f64>,
    pub con: Option<f64>,
    pub int_metric: Option<f64>,
    pub sal_metric: Option<f64>,
    pub avg: Option<f64>,
    /// Number of reports folded in.
    pub samples: usize,
}

/// Mean pairwise box IoU over non-underlay elements.
pub fn ove_numeric(layout: &Layout) -> f64 {
    let boxes: Vec<_> = layout.non_underlays().map(|e| e.bbox()).collect();
    if boxes.len() < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            sum += boxes[i].iou(&boxes[j]);
            pairs += 1;
        }
    }
    sum / pairs as f64
}

/// `(Σ|ℓ_j| − |⋁ℓ_j|) / (h·w)`.
pub fn ove_pixel(layers: &[BinMap]) -> Result<f64, RasterError> {
    let Some(first) = layers.first() else {
        return Ok(0.0);
    };
    let mut union = BinMap::new(first.width(), first.height());
    let mut total = 0usize;
    for l in layers {
        union.or_assign(l)?;
        total += l.count();
    }
    Ok((total - union.count()) as f64 / first.len() as f64)
}

/// Mean over elements of the smallest normalized edge or center offset to
/// any other element.
pub fn ali(layout: &Layout) -> f64 {
    let n = layout.elements.len();
    if n < 2 {
        return 0.0;
    }
    let (cw, ch) = (layout.canvas.width as f64, layout.canvas.height as f64);
    let keys: Vec<[f64; 6]> = layout
        .elements
        .iter()
        .map(|e| {
            let b = e.bbox();
            [
                b.x / cw,
                (b.x + b.w / 2.0) / cw,
                b.right() / cw,
                b.y / ch,
                (b.y + b.h / 2.0) / ch,
                b.bottom() / ch,
            ]
        })
        .collect();
    let mut sum = 0.0;
    for (i, a) in keys.iter().enumerate() {
        let mut best = f64::INFINITY;
        for (j, b) in keys.iter().enumerate() {
            if i == j {
                continue;
            }
            for k in 0..6 {
                best = best.min(math::abs(a[k] - b[k]));
            }
        }
        sum += best;
    }
    sum / n as f64
}

/// Loose and strict underlay effectiveness; both `None` without underlays.
pub fn und(layout: &Layout) -> (Option<f64>, Option<f64>) {
    let others: Vec<_> = layout.non_underlays().map(|e| e.bbox()).collect();
    let mut loose = 0.0;
    let mut strict = 0.0;
    let mut n = 0usize;
    for u in layout.underlays() {
        let ub = u.bbox();
        let best = others
            .iter()
            .map(|e| {
                let a = e.area();
                if a > 0.0 {
                    (e.intersection_area(&ub) / a).min(1.0)
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max);
        loose += best;
        if best >= 1.0 - EPS {
            strict += 1.0;
        }
        n += 1;
    }
    if n == 0 {
        (None, None)
    } else {
        (Some(loose / n as f64), Some(strict / n as f64))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ContentMetrics {
    pub uti: Option<f64>,
    pub occ: Option<f64>,
    pub rea: Option<f64>,
    pub cov: Option<f64>,
    pub con: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn check(a: (u32, u32), b: (u32, u32)) -> Result<(), RasterError> {
    if a != b {
        return Err(RasterError::DimensionMismatch(a.0, a.1, b.0, b.1));
    }
    Ok(())
}

/// Mean normalized gradient magnitude of `image` over `mask`.
pub fn readability(image: &GrayMap, mask: &BinMap) -> Result<Option<f64>, RasterError> {
    check((image.width(), image.height()), (mask.width(), mask.height()))?;
    let (w, h) = (image.width(), image.height());
    let px = |x: i64, y: i64| image.get(x.clamp(0, w as i64 - 1) as u32, y.clamp(0, h as i64 - 1) as u32) as f64;
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let (xi, yi) = (x as i64, y as i64);
            let gx = (px(xi + 1, yi) - px(xi - 1, yi)) / 2.0;
            let gy = (px(xi, yi + 1) - px(xi, yi - 1)) / 2.0;
            sum += math::sqrt(gx * gx + gy * gy) / core::f64::consts::SQRT_2;
            n += 1;
        }
    }
    Ok((n > 0).then(|| sum / n as f64))
}

/// Uti/Occ against saliency, Cov/Con against intent, Rea of the image under
/// the text mask. Each value is absent when its input is absent or its
/// denominator is zero.
pub fn content_metrics(
    element_map: &BinMap,
    saliency: Option<&BinMap>,
    intent: Option<&BinMap>,
    image_gray: Option<&GrayMap>,
    text_mask: &BinMap,
) -> Result<ContentMetrics, RasterError> {
    let dims = (element_map.width(), element_map.height());
    check(dims, (text_mask.width(), text_mask.height()))?;
    let mut out = ContentMetrics::default();
    if let Some(s) = saliency {
        let inside = element_map.and_count(s)?;
        let sal = s.count();
        out.occ = ratio(inside, sal);
        out.uti = ratio(element_map.count() - inside, s.len() - sal);
    }
    if let Some(d) = intent {
        let inside = element_map.and_count(d)?;
        let den = d.count();
        out.cov = ratio(inside, den);
        out.con = ratio(element_map.count() - inside, d.len() - den);
    }
    if let Some(img) = image_gray {
        check(dims, (img.width(), img.height()))?;
        out.rea = readability(img, text_mask)?;
    }
    Ok(out)
}

fn std_term(gen: f64, reference: f64, den: f64) -> f64 {
    let num = math::abs(gen - reference);
    if num < EPS && den < EPS {
        0.0
    } else {
        num / den.max(EPS)
    }
}

/// `(Int, Sal)`: mean relative deviations of the generated content means
/// from the reference.
pub fn standardize(gen: &ReferenceStats, reference: &ReferenceStats) -> (f64, f64) {
    let int = (std_term(gen.cov_l, reference.cov_l, 1.0 - reference.cov_l)
        + std_term(gen.con_l, reference.con_l, reference.con_l))
        / 2.0;
    let sal = (std_term(gen.uti_l, reference.uti_l, 1.0 - reference.uti_l)
        + std_term(gen.occ_l, reference.occ_l, reference.occ_l))
        / 2.0;
    (int, sal)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AvgInputs {
    pub ove: Option<f64>,
    pub ali: Option<f64>,
    pub und_l: Option<f64>,
    pub und_s: Option<f64>,
    pub int_metric: Option<f64>,
    pub sal_metric: Option<f64>,
    pub rea: Option<f64>,
}

/// Mean of `Ove, Ali, 1−Und_l, 1−Und_s, Int, Sal, Rea`.
pub fn avg(i: &AvgInputs) -> Result<f64, MetricError> {
    let need = |v: Option<f64>, name| v.ok_or(MetricError::MissingComponent(name));
    let terms = [
        need(i.ove, "ove")?,
        need(i.ali, "ali")?,
        1.0 - need(i.und_l, "und_l")?,
        1.0 - need(i.und_s, "und_s")?,
        need(i.int_metric, "int_metric")?,
        need(i.sal_metric, "sal_metric")?,
        need(i.rea, "rea")?,
    ];
    Ok(terms.iter().sum::<f64>() / 7.0)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OveMode {
    /// Layer-count formula on rendered element layers.
    #[default]
    Pixel,
    /// Mean pairwise box IoU.
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub target_width: u32,
    pub ove: OveMode,
    pub threshold: f32,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            target_width: ELEMENT_MAP_WIDTH,
            ove: OveMode::Pixel,
            threshold: 0.5,
        }
    }
}

/// Maps available for one sample, at any resolution.
#[derive(Debug, Clone, Copy, Default)]
pub struct SampleMaps<'a> {
    pub saliency: Option<&'a GrayMap>,
    pub intent: Option<&'a GrayMap>,
    pub image_gray: Option<&'a GrayMap>,
}

/// Every per-sample metric. Maps are resized to the element-map resolution
/// with nearest-neighbour sampling; saliency and intent are binarized.
pub fn evaluate_sample(
    layout: &Layout,
    maps: &SampleMaps<'_>,
    opts: &EvalOptions,
) -> Result<MetricReport, MetricError> {
    let element_map = render_element_map(layout, opts.target_width);
    let (w, h) = (element_map.width(), element_map.height());
    let text_mask = render_elements(
        layout.canvas,
        layout.elements.iter().filter(|e| e.category.is_text()),
        opts.target_width,
    );
    let sal = maps.saliency.map(|m| binarize(&m.resize_nearest(w, h), opts.threshold));
    let int = maps.intent.map(|m| binarize(&m.resize_nearest(w, h), opts.threshold));
    let img = maps.image_gray.map(|m| m.resize_nearest(w, h));
    let c = content_metrics(&element_map, sal.as_ref(), int.as_ref(), img.as_ref(), &text_mask)?;
    let ove = match opts.ove {
        OveMode::Pixel => ove_pixel(&render_layers(layout, opts.target_width))?,
        OveMode::Numeric => ove_numeric(layout),
    };
    let (und_l, und_s) = und(layout);
    Ok(MetricReport {
        ove: Some(ove),
        ali: Some(ali(layout)),
        und_l,
        und_s,
        uti: c.uti,
        occ: c.occ,
        rea: c.rea,
        cov: c.cov,
        con: c.con,
    })
}

fn mean_of(reports: &[MetricReport], f: impl Fn(&MetricReport) -> Option<f64>) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in reports.iter().filter_map(f) {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Per-metric means skipping absent values; Int/Sal need all four content
/// means, Avg needs all seven components.
pub fn aggregate(reports: &[MetricReport], reference: &ReferenceStats) -> AggregateReport {
    let mut a = AggregateReport {
        ove: mean_of(reports, |r| r.ove),
        ali: mean_of(reports, |r| r.ali),
        und_l: mean_of(reports, |r| r.und_l),
        und_s: mean_of(reports, |r| r.und_s),
        uti: mean_of(reports, |r| r.uti),
        occ: mean_of(reports, |r| r.occ),
        rea: mean_of(reports, |r| r.rea),
        cov: mean_of(reports, |r| r.cov),
        con: mean_of(reports, |r| r.con),
        samples: reports.len(),
        ..AggregateReport::default()
    };
    if let (Some(cov_l), Some(con_l)) = (a.cov, a.con) {
        let gen = ReferenceStats {
            cov_l,
            con_l,
            ..*reference
        };
        a.int_metric = Some(standardize(&gen, reference).0);
    }
    if let (Some(uti_l), Some(occ_l)) = (a.uti, a.occ) {
        let gen = ReferenceStats {
            uti_l,
            occ_l,
            ..*reference
        };
        a.sal_metric = Some(standardize(&gen, reference).1);
    }
    a.avg = avg(&AvgInputs {
        ove: a.ove,
        ali: a.ali,
        und_l: a.und_l,
        und_s: a.und_s,
        int_metric: a.int_metric,
        sal_metric: a.sal_metric,
        rea: a.rea,
    })
    .ok();
    a
}
