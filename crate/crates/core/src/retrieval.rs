//! In-context example selection over a flat design-intent index.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::Rect;
use crate::math;
use crate::types::{DatasetRecord, LayoutElement};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RetrievalError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("record `{0}` has no embedding")]
    MissingEmbedding(String),
    #[error("record `{record_id}` has embedding dim {got}, expected {expected}")]
    DimMismatch {
        record_id: String,
        expected: usize,
        got: usize,
    },
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("k = {k} is outside 1..={size}")]
    KTooLarge { k: usize, size: usize },
    #[error("query kind does not match strategy {0:?}")]
    StrategyQueryMismatch(Strategy),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Strategy {
    FAligned,
    DAligned,
    EAligned,
    Random,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::FAligned => "f_aligned",
            Strategy::DAligned => "d_aligned",
            Strategy::EAligned => "e_aligned",
            Strategy::Random => "random",
        }
    }
}

impl core::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "f_aligned" => Ok(Strategy::FAligned),
            "d_aligned" => Ok(Strategy::DAligned),
            "e_aligned" => Ok(Strategy::EAligned),
            "random" => Ok(Strategy::Random),
            _ => Err(alloc::format!("unknown strategy `{s}`")),
        }
    }
}

/// Embedding distance used by `f_aligned`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Distance {
    #[default]
    Euclidean,
    Cosine,
}

/// Category token to element count.
pub type CategoryMultiset = BTreeMap<String, u32>;

pub fn category_multiset(elements: &[LayoutElement]) -> CategoryMultiset {
    let mut m = CategoryMultiset::new();
    for e in elements {
        *m.entry(String::from(e.category.token())).or_default() += 1;
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IndexEntry {
    pub record_id: String,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub embedding: Vec<f32>,
    pub intent_bboxes: Vec<Rect>,
    pub category_multiset: CategoryMultiset,
}

/// Flat index; entries are kept sorted by `record_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntentIndex {
    entries: Vec<IndexEntry>,
    dim: usize,
}

impl IntentIndex {
    /// Validates dimensions and id uniqueness, then sorts by id.
    pub fn from_entries(mut entries: Vec<IndexEntry>) -> Result<Self, RetrievalError> {
        let Some(first) = entries.first() else {
            return Err(RetrievalError::EmptyDataset);
        };
        let dim = first.embedding.len();
        for e in &entries {
            if e.embedding.len() != dim {
                return Err(RetrievalError::DimMismatch {
                    record_id: e.record_id.clone(),
                    expected: dim,
                    got: e.embedding.len(),
                });
            }
        }
        entries.sort_by(|a, b| a.record_id.cmp(&b.record_id));
        if let Some(w) = entries.windows(2).find(|w| w[0].record_id == w[1].record_id) {
            return Err(RetrievalError::DuplicateId(w[0].record_id.clone()));
        }
        Ok(Self { entries, dim })
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, record_id: &str) -> Option<&IndexEntry> {
        self.entries
            .binary_search_by(|e| e.record_id.as_str().cmp(record_id))
            .ok()
            .map(|i| &self.entries[i])
    }
}

/// Index over records that carry an embedding in their design intent.
pub fn build_index(records: &[DatasetRecord]) -> Result<IntentIndex, RetrievalError> {
    if records.is_empty() {
        return Err(RetrievalError::EmptyDataset);
    }
    let entries = records
        .iter()
        .map(|r| {
            let emb = r
                .intent
                .embedding
                .as_ref()
                .ok_or_else(|| RetrievalError::MissingEmbedding(r.record_id.clone()))?;
            Ok(IndexEntry {
                record_id: r.record_id.clone(),
                embedding: emb.iter().map(|v| *v as f32).collect(),
                intent_bboxes: r.intent.polygons.iter().map(|p| p.bbox()).collect(),
                category_multiset: category_multiset(&r.elements),
            })
        })
        .collect::<Result<Vec<_>, RetrievalError>>()?;
    IntentIndex::from_entries(entries)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    Embedding(Vec<f64>),
    IntentBoxes(Vec<Rect>),
    Categories(CategoryMultiset),
    None,
}

fn l2(a: &[f32], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = *x as f64 - y;
            d * d
        })
        .sum::<f64>()
}

fn cosine_distance(a: &[f32], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let x = *x as f64;
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    1.0 - dot / (math::sqrt(na) * math::sqrt(nb))
}

/// Greedy one-to-one matching by descending IoU; the matched IoU sum is
/// divided by the larger set size. Two empty sets score 1.
pub fn bbox_set_similarity(a: &[Rect], b: &[Rect]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, ra) in a.iter().enumerate() {
        for (j, rb) in b.iter().enumerate() {
            let v = ra.iou(rb);
            if v > 0.0 {
                pairs.push((v, i, j));
            }
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = alloc::vec![false; a.len()];
    let mut used_b = alloc::vec![false; b.len()];
    let mut sum = 0.0;
    for (v, i, j) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            sum += v;
        }
    }
    sum / a.len().max(b.len()) as f64
}

/// `Σ min / Σ max` over category counts; two empty multisets score 1.
pub fn multiset_jaccard(a: &CategoryMultiset, b: &CategoryMultiset) -> f64 {
    let mut inter = 0u64;
    let mut union = 0u64;
    for (k, &va) in a {
        let vb = b.get(k).copied().unwrap_or(0);
        inter += va.min(vb) as u64;
        union += va.max(vb) as u64;
    }
    for (k, &vb) in b {
        if !a.contains_key(k) {
            union += vb as u64;
        }
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectOptions {
    pub k: usize,
    pub strategy: Strategy,
    pub seed: u64,
    pub distance: Distance,
}

/// Record ids of the `k` selected examples, most similar first.
pub fn select_examples(
    index: &IntentIndex,
    query: &Query,
    opts: &SelectOptions,
) -> Result<Vec<String>, RetrievalError> {
    let size = index.len();
    if size == 0 {
        return Err(RetrievalError::EmptyDataset);
    }
    let k = opts.k;
    if k == 0 || k > size {
        return Err(RetrievalError::KTooLarge { k, size });
    }
    let mismatch = || RetrievalError::StrategyQueryMismatch(opts.strategy);
    // lower key is better
    let keys: Vec<f64> = match (opts.strategy, query) {
        (Strategy::FAligned, Query::Embedding(q)) => {
            if q.len() != index.dim {
                return Err(RetrievalError::DimMismatch {
                    record_id: String::from("<query>"),
                    expected: index.dim,
                    got: q.len(),
                });
            }
            index
                .entries
                .iter()
                .map(|e| match opts.distance {
                    Distance::Euclidean => l2(&e.embedding, q),
                    Distance::Cosine => cosine_distance(&e.embedding, q),
                })
                .collect()
        }
        (Strategy::DAligned, Query::IntentBoxes(q)) => index
            .entries
            .iter()
            .map(|e| -bbox_set_similarity(&e.intent_bboxes, q))
            .collect(),
        (Strategy::EAligned, Query::Categories(q)) => index
            .entries
            .iter()
            .map(|e| -multiset_jaccard(&e.category_multiset, q))
            .collect(),
        (Strategy::Random, _) => return Ok(random_sample(index, k, opts.seed)),
        _ => return Err(mismatch()),
    };
    let mut order: Vec<usize> = (0..size).collect();
    // entries are sorted by id, so index order is the id tie-break
    let cmp = |a: &usize, b: &usize| keys[*a].total_cmp(&keys[*b]).then(a.cmp(b));
    if k < size {
        order.select_nth_unstable_by(k - 1, cmp);
        order.truncate(k);
    }
    order.sort_by(cmp);
    Ok(order.into_iter().map(|i| index.entries[i].record_id.clone()).collect())
}

fn random_sample(index: &IntentIndex, k: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..index.len()).collect();
    for i in 0..k {
        let j = rng.random_range(i..order.len());
        order.swap(i, j);
    }
    order[..k].iter().map(|&i| index.entries[i].record_id.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Canvas, DesignIntent, ElementCategory, Polygon};
    use crate::{Point, Shape};
    use alloc::format;
    use alloc::vec;

    fn entry(id: &str, emb: &[f32]) -> IndexEntry {
        IndexEntry {
            record_id: id.into(),
            embedding: emb.to_vec(),
            intent_bboxes: vec![],
            category_multiset: CategoryMultiset::new(),
        }
    }

    fn opts(k: usize, strategy: Strategy) -> SelectOptions {
        SelectOptions {
            k,
            strategy,
            seed: 0,
            distance: Distance::Euclidean,
        }
    }

    #[test]
    fn euclidean_ordering() {
        let idx = IntentIndex::from_entries(vec![
            entry("a", &[0.0, 0.0]),
            entry("b", &[1.0, 0.0]),
            entry("c", &[5.0, 5.0]),
        ])
        .unwrap();
        let got = select_examples(&idx, &Query::Embedding(vec![0.9, 0.1]), &opts(2, Strategy::FAligned)).unwrap();
        assert_eq!(got, ["b", "a"]);
    }

    #[test]
    fn errors() {
        assert_eq!(IntentIndex::from_entries(vec![]), Err(RetrievalError::EmptyDataset));
        assert!(matches!(
            IntentIndex::from_entries(vec![entry("a", &[0.0]), entry("b", &[0.0, 1.0])]),
            Err(RetrievalError::DimMismatch { .. })
        ));
        assert!(matches!(
            IntentIndex::from_entries(vec![entry("a", &[0.0]), entry("a", &[1.0])]),
            Err(RetrievalError::DuplicateId(_))
        ));
        let idx = IntentIndex::from_entries(vec![entry("a", &[0.0])]).unwrap();
        let q = Query::Embedding(vec![0.0]);
        assert!(matches!(
            select_examples(&idx, &q, &opts(2, Strategy::FAligned)),
            Err(RetrievalError::KTooLarge { k: 2, size: 1 })
        ));
        assert!(matches!(
            select_examples(&idx, &q, &opts(0, Strategy::FAligned)),
            Err(RetrievalError::KTooLarge { .. })
        ));
        assert_eq!(
            select_examples(&idx, &q, &opts(1, Strategy::DAligned)),
            Err(RetrievalError::StrategyQueryMismatch(Strategy::DAligned))
        );
    }

    #[test]
    fn build_index_from_records() {
        let canvas = Canvas::new(10, 10).unwrap();
        let tri = |o: f64| Polygon(vec![Point::new(o, o), Point::new(o + 2.0, o), Point::new(o, o + 2.0)]);
        let recs: Vec<DatasetRecord> = (0..3)
            .map(|i| DatasetRecord {
                record_id: format!("r{i}"),
                canvas,
                elements: vec![LayoutElement::new(ElementCategory::TEXT, Shape::rect(0.0, 0.0, 1.0, 1.0))],
                intent: DesignIntent {
                    polygons: if i == 0 { vec![tri(0.0), tri(5.0)] } else { vec![] },
                    map: None,
                    embedding: Some(vec![i as f64; 4]),
                },
                image_path: None,
                saliency_path: None,
            })
            .collect();
        let idx = build_index(&recs).unwrap();
        assert_eq!((idx.len(), idx.dim()), (3, 4));
        assert_eq!(idx.get("r0").unwrap().intent_bboxes.len(), 2);
        assert_eq!(idx.get("r1").unwrap().category_multiset["text"], 1);

        let mut bad = recs.clone();
        bad[2].intent.embedding = Some(vec![0.0; 3]);
        assert!(matches!(build_index(&bad), Err(RetrievalError::DimMismatch { .. })));
        bad[2].intent.embedding = None;
        assert!(matches!(build_index(&bad), Err(RetrievalError::MissingEmbedding(_))));
        assert_eq!(build_index(&[]), Err(RetrievalError::EmptyDataset));
    }

    #[test]
    fn full_k_is_a_permutation_for_every_strategy() {
        let mut es: Vec<IndexEntry> = (0..6).map(|i| entry(&format!("e{i}"), &[i as f32])).collect();
        for (i, e) in es.iter_mut().enumerate() {
            e.intent_bboxes = vec![Rect::new(i as f64, 0.0, 2.0, 2.0)];
            e.category_multiset.insert("text".into(), i as u32);
        }
        let idx = IntentIndex::from_entries(es).unwrap();
        let queries = [
            (Strategy::FAligned, Query::Embedding(vec![2.0])),
            (Strategy::DAligned, Query::IntentBoxes(vec![Rect::new(0.0, 0.0, 2.0, 2.0)])),
            (Strategy::EAligned, Query::Categories([("text".into(), 3)].into())),
            (Strategy::Random, Query::None),
        ];
        for (s, q) in queries {
            let mut got = select_examples(&idx, &q, &opts(6, s)).unwrap();
            got.sort();
            assert_eq!(got, ["e0", "e1", "e2", "e3", "e4", "e5"], "{s:?}");
        }
    }

    #[test]
    fn ties_break_by_id() {
        let idx = IntentIndex::from_entries(vec![entry("z", &[1.0]), entry("m", &[1.0]), entry("a", &[1.0])]).unwrap();
        let got = select_examples(&idx, &Query::Embedding(vec![0.0]), &opts(2, Strategy::FAligned)).unwrap();
        assert_eq!(got, ["a", "m"]);
    }

    #[test]
    fn similarity_conventions() {
        let r = Rect::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(bbox_set_similarity(&[], &[]), 1.0);
        assert_eq!(bbox_set_similarity(&[r], &[]), 0.0);
        assert_eq!(bbox_set_similarity(&[r], &[r]), 1.0);
        // one box matched, the other unmatched
        assert_eq!(bbox_set_similarity(&[r, Rect::new(50.0, 50.0, 1.0, 1.0)], &[r]), 0.5);

        let a: CategoryMultiset = [("text".into(), 2), ("logo".into(), 1)].into();
        let b: CategoryMultiset = [("text".into(), 1), ("underlay".into(), 1)].into();
        assert_eq!(multiset_jaccard(&a, &b), 1.0 / 4.0);
        assert_eq!(multiset_jaccard(&CategoryMultiset::new(), &CategoryMultiset::new()), 1.0);
    }

    #[test]
    fn random_is_seeded() {
        let idx = IntentIndex::from_entries((0..20).map(|i| entry(&format!("e{i:02}"), &[0.0])).collect()).unwrap();
        let mut o = opts(5, Strategy::Random);
        let a = select_examples(&idx, &Query::None, &o).unwrap();
        assert_eq!(a, select_examples(&idx, &Query::None, &o).unwrap());
        o.seed = 1;
        assert_ne!(a, select_examples(&idx, &Query::None, &o).unwrap());
    }

    #[test]
    fn random_is_roughly_uniform() {
        let n = 10usize;
        let k = 3usize;
        let draws = 1000u64;
        let idx = IntentIndex::from_entries((0..n).map(|i| entry(&format!("e{i}"), &[0.0])).collect()).unwrap();
        let mut counts = vec![0u32; n];
        for seed in 0..draws {
            let mut o = opts(k, Strategy::Random);
            o.seed = seed;
            for id in select_examples(&idx, &Query::None, &o).unwrap() {
                counts[id[1..].parse::<usize>().unwrap()] += 1;
            }
        }
        let p = k as f64 / n as f64;
        let mean = draws as f64 * p;
        let sd = math::sqrt(draws as f64 * p * (1.0 - p));
        for c in counts {
            assert!((c as f64 - mean).abs() <= 3.0 * sd, "{c} vs {mean}");
        }
    }

    #[test]
    fn cosine_ignores_magnitude() {
        let idx = IntentIndex::from_entries(vec![entry("a", &[10.0, 0.0]), entry("b", &[0.5, 0.5])]).unwrap();
        let mut o = opts(1, Strategy::FAligned);
        o.distance = Distance::Cosine;
        assert_eq!(select_examples(&idx, &Query::Embedding(vec![1.0, 0.1]), &o).unwrap(), ["a"]);
        o.distance = Distance::Euclidean;
        assert_eq!(select_examples(&idx, &Query::Embedding(vec![1.0, 0.1]), &o).unwrap(), ["b"]);
    }
}
