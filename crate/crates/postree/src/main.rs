use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use postree::backend::AnyBackend;
use postree::config::{BackendKind, RunConfig};
use postree::{embed, fsio, index_file, pgm, pipeline, Error, ErrorBody};
use postree_core::metrics::OveMode;
use postree_core::realize::Materials;
use postree_core::retrieval::{Distance, Strategy};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "postree", version, about = "Content-aware poster layout trees")]
struct Cli {
    /// Run configuration JSON; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed every command derives its own seeds from.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Directory of <id>.intent.pgm, <id>.saliency.pgm and <id>.embed.json.
    #[arg(long)]
    maps: Option<PathBuf>,
}

#[derive(Args)]
struct TreeArgs {
    /// Keep every element at top level.
    #[arg(long)]
    flat_trees: bool,
    /// Leave design intent polygons out of the trees.
    #[arg(long)]
    no_intent: bool,
    /// Envelope tolerance in pixels (default 1% of the longer side).
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_depth: Option<usize>,
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// Mock responses keyed by record id.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Environment variable holding the API token.
    #[arg(long)]
    api_token_env: Option<String>,
    #[arg(long)]
    timeout_s: Option<f64>,
}

#[derive(Args)]
struct RetrievalArgs {
    /// f_aligned, d_aligned, e_aligned or random.
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long, value_parser = parse_distance)]
    distance: Option<Distance>,
}

#[derive(Subcommand)]
enum Command {
    /// One layout-tree SVG per annotated record, plus manifest.json.
    BuildTrees {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        tree: TreeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reference content statistics of a (train) dataset.
    Stats {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Binary retrieval index over the dataset's embeddings.
    Index {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Example record ids for a query.
    Select {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        retrieval: RetrievalArgs,
        #[arg(long)]
        index: Option<PathBuf>,
        /// Query record (excluded from the result).
        #[arg(long, conflicts_with = "query_embedding")]
        query_id: Option<String>,
        /// Query embedding file for f_aligned.
        #[arg(long)]
        query_embedding: Option<PathBuf>,
        #[arg(short, long)]
        k: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate, sanitize and rank layouts for the dataset's records.
    Generate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        tree: TreeArgs,
        #[command(flatten)]
        retrieval: RetrievalArgs,
        #[command(flatten)]
        backend: BackendArgs,
        /// Example pool (default: --dataset).
        #[arg(long)]
        train_dataset: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        template: Option<PathBuf>,
        /// Only these records (repeatable).
        #[arg(long = "record")]
        records: Vec<String>,
        /// Ask for the record's annotated elements instead of leaving the
        /// choice to the backend.
        #[arg(long)]
        request_elements: bool,
        #[arg(short, long)]
        k: Option<usize>,
        #[arg(long)]
        candidates: Option<usize>,
        #[arg(long)]
        temperature: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Metric reports for generated layouts.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        /// Directory holding <id>.svg layouts.
        #[arg(long)]
        generated: PathBuf,
        /// ReferenceStats JSON from `stats`.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Overlap formula.
        #[arg(long, value_parser = parse_ove)]
        ove: Option<OveMode>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Binary element map of a layout as PGM.
    RenderMap {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long, default_value_t = postree_core::raster::ELEMENT_MAP_WIDTH)]
        width: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Poster SVG from a layout and its materials.
    Realize {
        #[arg(long)]
        layout: PathBuf,
        /// JSON map from leaf id to {"text": ...} or {"href": ...}.
        #[arg(long)]
        materials: Option<PathBuf>,
        /// Style hint for the backend path.
        #[arg(long)]
        style: Option<String>,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_distance(s: &str) -> Result<Distance, String> {
    match s {
        "euclidean" => Ok(Distance::Euclidean),
        "cosine" => Ok(Distance::Cosine),
        _ => Err(format!("unknown distance `{s}` (euclidean, cosine)")),
    }
}

fn parse_ove(s: &str) -> Result<OveMode, String> {
    match s {
        "pixel" => Ok(OveMode::Pixel),
        "numeric" => Ok(OveMode::Numeric),
        _ => Err(format!("unknown ove mode `{s}` (pixel, numeric)")),
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_path(slot: &mut Option<PathBuf>, v: Option<PathBuf>) {
    if v.is_some() {
        *slot = v;
    }
}

impl DataArgs {
    fn apply(self, cfg: &mut RunConfig) {
        set_path(&mut cfg.dataset, self.dataset);
        set_path(&mut cfg.maps_dir, self.maps);
    }
}

impl TreeArgs {
    fn apply(self, cfg: &mut RunConfig) {
        cfg.flat_trees |= self.flat_trees;
        cfg.no_intent |= self.no_intent;
        if self.epsilon.is_some() {
            cfg.nest.epsilon_px = self.epsilon;
        }
        set(&mut cfg.nest.max_depth, self.max_depth);
    }
}

impl BackendArgs {
    fn apply(self, cfg: &mut RunConfig) {
        let b = &mut cfg.backend;
        set(&mut b.kind, self.backend);
        set_path(&mut b.fixture_path, self.fixtures);
        if self.endpoint.is_some() {
            b.endpoint_url = self.endpoint;
        }
        if self.model.is_some() {
            b.model_name = self.model;
        }
        if self.api_token_env.is_some() {
            b.api_token_env_var = self.api_token_env;
        }
        set(&mut b.timeout_s, self.timeout_s);
    }

    fn given(&self) -> bool {
        self.backend.is_some() || self.fixtures.is_some() || self.endpoint.is_some()
    }
}

impl RetrievalArgs {
    fn apply(self, cfg: &mut RunConfig) {
        set(&mut cfg.strategy, self.strategy);
        set(&mut cfg.distance, self.distance);
    }
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), Error> {
    match out {
        Some(p) => fsio::write_json(p, value),
        None => {
            let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
            println!("{text}");
            Ok(())
        }
    }
}

fn emit_text(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => fsio::write_atomic(p, text.as_bytes()),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    if cli.jobs.is_some() {
        cfg.jobs = cli.jobs;
    }

    match cli.command {
        Command::BuildTrees { data, tree, out } => {
            data.apply(&mut cfg);
            tree.apply(&mut cfg);
            set_path(&mut cfg.out_dir, out);
            cfg.check_paths()?;
            let out = cfg.require("out", &cfg.out_dir)?.to_path_buf();
            let manifest = pipeline::build_trees(&cfg, &out)?;
            eprintln!("wrote {} trees to {}", manifest.trees.len(), out.display());
            Ok(())
        }
        Command::Stats { data, out } => {
            data.apply(&mut cfg);
            cfg.check_paths()?;
            emit(out.as_deref(), &pipeline::stats(&cfg)?)
        }
        Command::Index { data, out } => {
            data.apply(&mut cfg);
            cfg.check_paths()?;
            let index = pipeline::index(&cfg)?;
            index_file::write(&out, &index)?;
            eprintln!("indexed {} records ({}-dim) into {}", index.len(), index.dim(), out.display());
            Ok(())
        }
        Command::Select {
            data,
            retrieval,
            index,
            query_id,
            query_embedding,
            k,
            out,
        } => {
            data.apply(&mut cfg);
            retrieval.apply(&mut cfg);
            set_path(&mut cfg.index, index);
            cfg.check_paths()?;
            let idx = index_file::read(cfg.require("index", &cfg.index)?)?;
            let source = match (&query_id, query_embedding) {
                (Some(id), _) => pipeline::QuerySource::Record(id),
                (None, Some(p)) => pipeline::QuerySource::Embedding(embed::read(&p)?),
                (None, None) => pipeline::QuerySource::Unconstrained,
            };
            let sel = pipeline::select(&cfg, &idx, source, k.unwrap_or(cfg.generation.k))?;
            emit(out.as_deref(), &sel)
        }
        Command::Generate {
            data,
            tree,
            retrieval,
            backend,
            train_dataset,
            index,
            template,
            records,
            request_elements,
            k,
            candidates,
            temperature,
            out,
        } => {
            data.apply(&mut cfg);
            tree.apply(&mut cfg);
            retrieval.apply(&mut cfg);
            backend.apply(&mut cfg);
            set_path(&mut cfg.train_dataset, train_dataset);
            set_path(&mut cfg.index, index);
            set_path(&mut cfg.prompt_template, template);
            set_path(&mut cfg.out_dir, out);
            set(&mut cfg.generation.k, k);
            set(&mut cfg.generation.candidates, candidates);
            set(&mut cfg.generation.temperature, temperature);
            cfg.check_paths()?;
            let out = cfg.require("out", &cfg.out_dir)?.to_path_buf();
            let summary = pipeline::generate(&cfg, &out, &records, request_elements)?;
            let failed: Vec<_> = summary.failures().collect();
            eprintln!(
                "generated {} of {} layouts into {}",
                summary.records.len() - failed.len(),
                summary.records.len(),
                out.display()
            );
            match failed.first().and_then(|r| r.error.clone()) {
                Some(body) => Err(Error::Format(format!(
                    "{} record(s) failed; first: {}: {} ({})",
                    failed.len(),
                    failed[0].record_id,
                    body.message,
                    body.kind
                ))),
                None => Ok(()),
            }
        }
        Command::Evaluate {
            data,
            generated,
            reference,
            ove,
            out,
        } => {
            data.apply(&mut cfg);
            set_path(&mut cfg.reference_stats, reference);
            set(&mut cfg.ove, ove);
            cfg.check_paths()?;
            emit(out.as_deref(), &pipeline::evaluate(&cfg, &generated)?)
        }
        Command::RenderMap { layout, width, out } => {
            if width == 0 {
                return Err(Error::Usage("--width must be positive".into()));
            }
            let map = pipeline::render_map(&layout, width)?;
            fsio::write_atomic(&out, &pgm::encode_bin(&map))
        }
        Command::Realize {
            layout,
            materials,
            style,
            backend,
            out,
        } => {
            let use_backend = backend.given() || style.is_some();
            backend.apply(&mut cfg);
            cfg.check_paths()?;
            let materials: Materials = match materials {
                Some(p) => fsio::read_json(&p)?,
                None => Materials::new(),
            };
            let b: Option<AnyBackend> = if use_backend {
                Some(pipeline::make_backend(&cfg)?)
            } else {
                None
            };
            let style = style.unwrap_or_default();
            let realized = pipeline::realize(&layout, &materials, b.as_ref().map(|b| (b, style.as_str())), &cfg.generation)?;
            if use_backend && realized.fallback {
                eprintln!("backend response unusable; wrote the deterministic poster");
            }
            emit_text(out.as_deref(), &realized.svg)
        }
    }
}

#[derive(Serialize)]
struct ErrorOut {
    error: ErrorBody,
}

fn report(body: ErrorBody) {
    let text = serde_json::to_string(&ErrorOut { error: body }).unwrap_or_else(|_| "{\"error\":{}}".into());
    eprintln!("{text}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report(ErrorBody {
                kind: "usage".into(),
                message: e.to_string().trim().to_owned(),
            });
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = if matches!(e, Error::Usage(_)) { 2 } else { 1 };
            report(ErrorBody::from(&e));
            ExitCode::from(code)
        }
    }
}
