//! The commands behind the CLI, as library functions over a resolved
//! [`RunConfig`].

use std::path::{Path, PathBuf};

use postree_core::generation::{
    assemble_prompt, generate_layout, rank_candidates, validate_tree, GenError, GenParams, PromptTemplate,
    SanitationReport, TestInput,
};
use postree_core::intent::vectorize_intent;
use postree_core::metrics::{aggregate, evaluate_sample, AggregateReport, EvalOptions, MetricReport, ReferenceStats, SampleMaps};
use postree_core::raster::{binarize, output_size, rasterize_polygons, render_element_map, ELEMENT_MAP_WIDTH};
use postree_core::realize::{llm_realize, mockup, synthesize, Materials, Realized};
use postree_core::retrieval::{
    build_index, category_multiset, select_examples, IntentIndex, Query, RetrievalError, SelectOptions, Strategy,
};
use postree_core::svg::{parse_tree, serialize_tree};
use postree_core::tree::{build_tree_from, flatten_tree, BuildOptions, NestParams};
use postree_core::{BinMap, DatasetRecord, GrayMap, LayoutTree, Polygon};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{AnyBackend, HttpBackend, HttpOptions, MockBackend};
use crate::config::{BackendKind, RunConfig};
use crate::dataset::{image_gray, Dataset, MapsDir};
use crate::error::ErrorBody;
use crate::{fsio, index_file, seed, Error};

/// Runs `f` over `items` on `jobs` threads, keeping input order.
pub fn par_map<T: Sync, R: Send>(jobs: Option<usize>, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .expect("thread pool");
    pool.install(|| items.par_iter().map(f).collect())
}

fn first_err<T>(results: Vec<Result<T, Error>>) -> Result<Vec<T>, Error> {
    results.into_iter().collect()
}

pub fn maps(cfg: &RunConfig) -> MapsDir {
    MapsDir(cfg.maps_dir.clone())
}

pub fn load_dataset(path: &Path, maps: &MapsDir) -> Result<Dataset, Error> {
    let mut ds = Dataset::load(path)?;
    maps.attach(&mut ds.records)?;
    Ok(ds)
}

/// Inline polygons, else the vectorized intent map, else none.
pub fn record_intents(rec: &DatasetRecord, cfg: &RunConfig) -> Result<Vec<Polygon>, Error> {
    if !rec.intent.polygons.is_empty() {
        return Ok(rec.intent.polygons.clone());
    }
    match &rec.intent.map {
        Some(m) => vectorize_intent(m, rec.canvas, &cfg.vectorize)
            .map(|v| v.polygons)
            .map_err(|source| Error::Intent {
                record_id: rec.record_id.clone(),
                source,
            }),
        None => Ok(Vec::new()),
    }
}

/// The intent map, else the rasterized polygons.
pub fn intent_gray(rec: &DatasetRecord, polygons: &[Polygon]) -> Option<GrayMap> {
    rec.intent.map.clone().or_else(|| {
        (!polygons.is_empty()).then(|| GrayMap::from(&rasterize_polygons(polygons, rec.canvas, ELEMENT_MAP_WIDTH)))
    })
}

pub fn build_options(cfg: &RunConfig) -> BuildOptions {
    BuildOptions {
        nest: cfg.nest,
        hierarchical: !cfg.flat_trees,
        include_intents: !cfg.no_intent,
    }
}

pub fn record_tree(rec: &DatasetRecord, cfg: &RunConfig) -> Result<LayoutTree, Error> {
    let intents = if cfg.no_intent {
        Vec::new()
    } else {
        record_intents(rec, cfg)?
    };
    Ok(build_tree_from(rec.canvas, &rec.elements, &intents, &build_options(cfg)))
}

pub fn read_tree(path: &Path) -> Result<LayoutTree, Error> {
    parse_tree(&fsio::read_to_string(path)?, None).map_err(|source| Error::Dialect {
        context: path.display().to_string(),
        source,
    })
}

// build-trees

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub record_id: String,
    pub file: String,
    pub leaves: usize,
    pub depth: usize,
    pub intents: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub hierarchical: bool,
    pub include_intents: bool,
    pub nest: NestParams,
    pub trees: Vec<ManifestEntry>,
    /// Records without elements.
    pub skipped: Vec<String>,
}

/// One `<id>.svg` per annotated record plus `manifest.json`.
pub fn build_trees(cfg: &RunConfig, out_dir: &Path) -> Result<Manifest, Error> {
    let ds = load_dataset(cfg.require("dataset", &cfg.dataset)?, &maps(cfg))?;
    let (annotated, skipped): (Vec<&DatasetRecord>, Vec<&DatasetRecord>) =
        ds.records.iter().partition(|r| r.is_annotated());
    let trees = first_err(par_map(cfg.jobs, &annotated, |rec| {
        let tree = record_tree(rec, cfg)?;
        let file = format!("{}.svg", rec.record_id);
        fsio::write_atomic(&out_dir.join(&file), serialize_tree(&tree).as_bytes())?;
        Ok(ManifestEntry {
            record_id: rec.record_id.clone(),
            file,
            leaves: tree.leaf_count(),
            depth: tree.depth(),
            intents: tree.intents.len(),
        })
    }))?;
    let manifest = Manifest {
        hierarchical: !cfg.flat_trees,
        include_intents: !cfg.no_intent,
        nest: cfg.nest,
        trees,
        skipped: skipped.iter().map(|r| r.record_id.clone()).collect(),
    };
    fsio::write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

// stats / evaluate

fn eval_options(cfg: &RunConfig) -> EvalOptions {
    EvalOptions {
        ove: cfg.ove,
        ..EvalOptions::default()
    }
}

fn evaluate_record(
    ds: &Dataset,
    maps: &MapsDir,
    rec: &DatasetRecord,
    layout: &postree_core::Layout,
    cfg: &RunConfig,
    with_image: bool,
) -> Result<MetricReport, Error> {
    let saliency = maps.saliency(ds, rec)?;
    let polygons = record_intents(rec, cfg)?;
    let intent = intent_gray(rec, &polygons);
    let image = if with_image { image_gray(ds, rec)? } else { None };
    let sample = SampleMaps {
        saliency: saliency.as_ref(),
        intent: intent.as_ref(),
        image_gray: image.as_ref(),
    };
    Ok(evaluate_sample(layout, &sample, &eval_options(cfg))?)
}

/// Content means of the annotated records against their own maps.
pub fn stats(cfg: &RunConfig) -> Result<ReferenceStats, Error> {
    let maps = maps(cfg);
    let ds = load_dataset(cfg.require("dataset", &cfg.dataset)?, &maps)?;
    let annotated: Vec<&DatasetRecord> = ds.records.iter().filter(|r| r.is_annotated()).collect();
    let reports = first_err(par_map(cfg.jobs, &annotated, |rec| {
        evaluate_record(&ds, &maps, rec, &rec.layout(), cfg, false)
    }))?;
    ReferenceStats::from_reports(&reports).ok_or_else(|| {
        Error::Config("stats need saliency and intent maps (or polygons) for at least one annotated record".into())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub record_id: String,
    #[serde(flatten)]
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub reference: ReferenceStats,
    pub samples: Vec<SampleReport>,
    pub aggregate: AggregateReport,
}

/// Scores every `<id>.svg` in `generated` whose id is in the dataset.
pub fn evaluate(cfg: &RunConfig, generated: &Path) -> Result<Evaluation, Error> {
    let maps = maps(cfg);
    let ds = load_dataset(cfg.require("dataset", &cfg.dataset)?, &maps)?;
    let reference: ReferenceStats = fsio::read_json(cfg.require("reference_stats", &cfg.reference_stats)?)?;
    let present: Vec<(&DatasetRecord, PathBuf)> = ds
        .records
        .iter()
        .map(|r| (r, generated.join(format!("{}.svg", r.record_id))))
        .filter(|(_, p)| p.is_file())
        .collect();
    if present.is_empty() {
        return Err(Error::Usage(format!("no layouts for dataset records in {}", generated.display())));
    }
    let samples = first_err(par_map(cfg.jobs, &present, |(rec, path)| {
        let layout = flatten_tree(&read_tree(path)?);
        Ok(SampleReport {
            record_id: rec.record_id.clone(),
            report: evaluate_record(&ds, &maps, rec, &layout, cfg, true)?,
        })
    }))?;
    let reports: Vec<MetricReport> = samples.iter().map(|s| s.report).collect();
    Ok(Evaluation {
        aggregate: aggregate(&reports, &reference),
        reference,
        samples,
    })
}

// index / select

/// Index over the dataset; missing polygons come from the intent maps.
pub fn index(cfg: &RunConfig) -> Result<IntentIndex, Error> {
    let ds = load_dataset(cfg.require("dataset", &cfg.dataset)?, &maps(cfg))?;
    let records = first_err(par_map(cfg.jobs, &ds.records, |rec| {
        let mut r = rec.clone();
        r.intent.polygons = record_intents(rec, cfg)?;
        r.intent.map = None;
        Ok(r)
    }))?;
    Ok(build_index(&records)?)
}

pub fn load_or_build_index(cfg: &RunConfig, examples: &Dataset) -> Result<IntentIndex, Error> {
    match &cfg.index {
        Some(p) => index_file::read(p),
        None => {
            let records = examples
                .records
                .iter()
                .map(|rec| {
                    let mut r = rec.clone();
                    r.intent.polygons = record_intents(rec, cfg)?;
                    Ok(r)
                })
                .collect::<Result<Vec<_>, Error>>()?;
            Ok(build_index(&records)?)
        }
    }
}

pub fn query_for(strategy: Strategy, rec: &DatasetRecord, intents: &[Polygon]) -> Result<Query, Error> {
    Ok(match strategy {
        Strategy::FAligned => Query::Embedding(
            rec.intent
                .embedding
                .clone()
                .ok_or_else(|| RetrievalError::MissingEmbedding(rec.record_id.clone()))?,
        ),
        Strategy::DAligned => Query::IntentBoxes(intents.iter().map(|p| p.bbox()).collect()),
        Strategy::EAligned => Query::Categories(category_multiset(&rec.elements)),
        Strategy::Random => Query::None,
    })
}

/// `select_examples` with `exclude` removed from the candidates.
pub fn select_excluding(
    index: &IntentIndex,
    query: &Query,
    exclude: Option<&str>,
    opts: &SelectOptions,
) -> Result<Vec<String>, Error> {
    let has_self = exclude.is_some_and(|id| index.get(id).is_some());
    let size = index.len() - has_self as usize;
    if opts.k == 0 || opts.k > size {
        return Err(RetrievalError::KTooLarge { k: opts.k, size }.into());
    }
    let wide = SelectOptions {
        k: opts.k + has_self as usize,
        ..*opts
    };
    let mut ids = select_examples(index, query, &wide)?;
    ids.retain(|id| Some(id.as_str()) != exclude);
    ids.truncate(opts.k);
    Ok(ids)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub strategy: Strategy,
    pub k: usize,
    pub query: Option<String>,
    pub ids: Vec<String>,
}

pub enum QuerySource<'a> {
    Record(&'a str),
    Embedding(Vec<f64>),
    Unconstrained,
}

pub fn select(cfg: &RunConfig, index: &IntentIndex, source: QuerySource<'_>, k: usize) -> Result<Selection, Error> {
    let (query, query_id) = match source {
        QuerySource::Record(id) => {
            let ds = load_dataset(cfg.require("dataset", &cfg.dataset)?, &maps(cfg))?;
            let rec = ds
                .get(id)
                .ok_or_else(|| Error::Usage(format!("record `{id}` is not in the dataset")))?;
            let intents = record_intents(rec, cfg)?;
            (query_for(cfg.strategy, rec, &intents)?, Some(id.to_owned()))
        }
        QuerySource::Embedding(v) => (Query::Embedding(v), None),
        QuerySource::Unconstrained => (Query::None, None),
    };
    let opts = SelectOptions {
        k,
        strategy: cfg.strategy,
        seed: seed::derive(cfg.seed, &format!("select/{}", query_id.as_deref().unwrap_or(""))),
        distance: cfg.distance,
    };
    let ids = select_excluding(index, &query, query_id.as_deref(), &opts)?;
    Ok(Selection {
        strategy: cfg.strategy,
        k,
        query: query_id,
        ids,
    })
}

// generate

pub fn make_backend(cfg: &RunConfig) -> Result<AnyBackend, Error> {
    let b = &cfg.backend;
    match b.kind {
        BackendKind::Mock => {
            let mut m = MockBackend::new(seed::derive(cfg.seed, "mock"));
            if let Some(p) = &b.fixture_path {
                m = m.with_fixtures(MockBackend::load_fixtures(p)?);
            }
            Ok(AnyBackend::Mock(m))
        }
        BackendKind::Http => {
            let url = b
                .endpoint_url
                .as_deref()
                .ok_or_else(|| Error::Config("http backend needs backend.endpoint_url".into()))?;
            let model = b
                .model_name
                .as_deref()
                .ok_or_else(|| Error::Config("http backend needs backend.model_name".into()))?;
            let api_token = match &b.api_token_env_var {
                Some(var) => Some(
                    std::env::var(var).map_err(|_| Error::Config(format!("environment variable {var} is not set")))?,
                ),
                None => None,
            };
            if !(b.timeout_s > 0.0 && b.timeout_s.is_finite()) {
                return Err(Error::Config(format!("backend.timeout_s must be positive, got {}", b.timeout_s)));
            }
            let opts = HttpOptions {
                api_token,
                timeout: std::time::Duration::from_secs_f64(b.timeout_s),
                max_attempts: b.max_attempts.max(1),
                ..HttpOptions::new(url, model)
            };
            Ok(AnyBackend::Http(HttpBackend::new(opts).map_err(GenError::from)?))
        }
    }
}

pub fn load_template(cfg: &RunConfig) -> Result<PromptTemplate, Error> {
    match &cfg.prompt_template {
        Some(p) => Ok(PromptTemplate::parse(&fsio::read_to_string(p)?)?),
        None => Ok(PromptTemplate::default()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub file: String,
    pub score: f64,
    pub sanitation: SanitationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub record_id: String,
    pub examples: Vec<String>,
    pub requests: usize,
    pub malformed: usize,
    /// Parsed candidates that did not survive sanitation.
    pub rejected: usize,
    pub candidates: Vec<CandidateReport>,
    pub chosen: usize,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordStatus {
    pub record_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub seed: u64,
    pub backend: BackendKind,
    pub strategy: Strategy,
    pub k: usize,
    pub candidates: usize,
    pub records: Vec<RecordStatus>,
}

impl GenerateSummary {
    pub fn failures(&self) -> impl Iterator<Item = &RecordStatus> {
        self.records.iter().filter(|r| r.error.is_some())
    }
}

struct GenContext<'a> {
    cfg: &'a RunConfig,
    examples: &'a Dataset,
    index: &'a IntentIndex,
    template: &'a PromptTemplate,
    backend: &'a AnyBackend,
    out_dir: &'a Path,
    request_elements: bool,
}

fn generate_one(ctx: &GenContext<'_>, rec: &DatasetRecord) -> Result<GenerationReport, Error> {
    let cfg = ctx.cfg;
    let id = &rec.record_id;
    let polygons = record_intents(rec, cfg)?;
    let query = query_for(cfg.strategy, rec, &polygons)?;
    let opts = SelectOptions {
        k: cfg.generation.k,
        strategy: cfg.strategy,
        seed: seed::derive(cfg.seed, &format!("select/{id}")),
        distance: cfg.distance,
    };
    let example_ids = select_excluding(ctx.index, &query, Some(id), &opts)?;
    let trees = example_ids
        .iter()
        .map(|eid| {
            let r = ctx
                .examples
                .get(eid)
                .ok_or_else(|| Error::Config(format!("index entry `{eid}` is not in the example dataset")))?;
            record_tree(r, cfg)
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let pairs: Vec<(&str, &LayoutTree)> = example_ids.iter().map(String::as_str).zip(&trees).collect();
    let test = TestInput {
        canvas: rec.canvas,
        intents: if cfg.no_intent { Vec::new() } else { polygons.clone() },
        requested: (ctx.request_elements && rec.is_annotated()).then(|| rec.elements.iter().map(|e| e.category).collect()),
    };
    let bundle = assemble_prompt(&pairs, &test, ctx.template)?;
    let params = GenParams {
        seed: Some(seed::derive(cfg.seed, &format!("generate/{id}"))),
        ..cfg.generation.clone()
    };
    let generated = generate_layout(ctx.backend, &bundle, &params, id)?;

    let mut kept = Vec::new();
    let mut reports = Vec::new();
    for c in &generated.candidates {
        if let Ok((tree, report)) = validate_tree(c, rec.canvas) {
            kept.push(tree);
            reports.push(report);
        }
    }
    if kept.is_empty() {
        return Err(GenError::EmptyAfterSanitation.into());
    }
    let intent_map = match intent_gray(rec, &polygons) {
        Some(m) => binarize(&m, 0.5),
        None => {
            let (w, h, _) = output_size(rec.canvas, ELEMENT_MAP_WIDTH);
            BinMap::new(w, h)
        }
    };
    let ranking = rank_candidates(&kept, &intent_map, &cfg.rank)?;

    let dir = ctx.out_dir.join(id);
    let mut candidates = Vec::new();
    for (i, (tree, sanitation)) in kept.iter().zip(reports).enumerate() {
        let file = format!("{id}/candidate_{i}.svg");
        fsio::write_atomic(&ctx.out_dir.join(&file), serialize_tree(tree).as_bytes())?;
        candidates.push(CandidateReport {
            file,
            score: ranking.scores[i],
            sanitation,
        });
    }
    fsio::write_atomic(&dir.join("prompt.txt"), bundle.text.as_bytes())?;
    let file = format!("{id}.svg");
    fsio::write_atomic(&ctx.out_dir.join(&file), serialize_tree(&kept[ranking.best]).as_bytes())?;
    let report = GenerationReport {
        record_id: id.clone(),
        examples: example_ids,
        requests: generated.requests,
        malformed: generated.malformed,
        rejected: generated.candidates.len() - kept.len(),
        candidates,
        chosen: ranking.best,
        file,
    };
    fsio::write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}

/// Generates a layout for each selected record of `dataset` (all when
/// `only` is empty), drawing examples from `train_dataset`. A record's
/// failure is kept in the summary; the other records still run.
pub fn generate(cfg: &RunConfig, out_dir: &Path, only: &[String], request_elements: bool) -> Result<GenerateSummary, Error> {
    let maps = maps(cfg);
    let queries = load_dataset(cfg.require("dataset", &cfg.dataset)?, &maps)?;
    let examples = match &cfg.train_dataset {
        Some(p) => load_dataset(p, &maps)?,
        None => queries.clone(),
    };
    let index = load_or_build_index(cfg, &examples)?;
    let template = load_template(cfg)?;
    let backend = make_backend(cfg)?;
    let selected: Vec<&DatasetRecord> = if only.is_empty() {
        queries.records.iter().collect()
    } else {
        only.iter()
            .map(|id| {
                queries
                    .get(id)
                    .ok_or_else(|| Error::Usage(format!("record `{id}` is not in the dataset")))
            })
            .collect::<Result<_, _>>()?
    };
    let ctx = GenContext {
        cfg,
        examples: &examples,
        index: &index,
        template: &template,
        backend: &backend,
        out_dir,
        request_elements,
    };
    let results = par_map(cfg.jobs, &selected, |rec| generate_one(&ctx, rec));
    let summary = GenerateSummary {
        seed: cfg.seed,
        backend: cfg.backend.kind,
        strategy: cfg.strategy,
        k: cfg.generation.k,
        candidates: cfg.generation.candidates,
        records: selected
            .iter()
            .zip(&results)
            .map(|(rec, r)| RecordStatus {
                record_id: rec.record_id.clone(),
                error: r.as_ref().err().map(ErrorBody::from),
            })
            .collect(),
    };
    fsio::write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

// render-map / realize

pub fn render_map(layout: &Path, width: u32) -> Result<BinMap, Error> {
    Ok(render_element_map(&flatten_tree(&read_tree(layout)?), width))
}

/// Deterministic mockup and synthesis, or the backend path with that as
/// its fallback.
pub fn realize(
    layout: &Path,
    materials: &Materials,
    backend: Option<(&AnyBackend, &str)>,
    params: &GenParams,
) -> Result<Realized, Error> {
    let tree = read_tree(layout)?;
    match backend {
        Some((b, style)) => Ok(llm_realize(b, &tree, materials, style, params.temperature, params.max_tokens)?),
        None => Ok(Realized {
            svg: synthesize(&mockup(&tree), materials)?,
            fallback: false,
        }),
    }
}
