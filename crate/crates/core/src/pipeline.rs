//! The artifact pipeline behind the command-line tool: prepare, train,
//! recommend and evaluate, all under one output directory with a manifest.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bm25::{Bm25Params, Bm25Recommender, InvertedIndex};
use crate::corpus::{
    build_cited_pseudo_fulltext, build_pseudo_fulltext, extract_test_queries, filter_min_citations, load_corpus,
    split_train_test, CitationCounts, Document, Orientation, TestQuery, TrainingDocument, YearRange,
};
use crate::embed::{train_doc2vec, train_hd2v, EmbeddingRecommender, EmbeddingSpace, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::{comparison_csv, curve_data, run_evaluation, EvalReport, DEFAULT_CUTOFFS};
use crate::hybrid::{FusedList, FusionConfig, HybridRecommender};
use crate::jsonl;
use crate::lda::{train_lda, LdaConfig, LdaModel, LdaRecommender};
use crate::ranking::{RankedList, Recommender};
use crate::textproc::{query_terms, remove_stopwords, StopwordSet};

/// Offsets added to the global seed for each seeded component.
pub const HD2V_SEED_OFFSET: u64 = 1;
pub const DOC2VEC_SEED_OFFSET: u64 = 2;
pub const LDA_SEED_OFFSET: u64 = 3;
pub const FUSION_SEED_OFFSET: u64 = 4;

/// Number of recommendations printed by `recommend` unless overridden.
pub const DEFAULT_RECOMMENDATIONS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Raw corpus in JSONL; needed by `prepare` only.
    pub corpus: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub out_dir: PathBuf,
    pub train_years: YearRange,
    pub test_years: YearRange,
    pub min_citations: usize,
    /// Stop-word file; the bundled list is used when absent.
    pub stopwords: Option<PathBuf>,
    pub seed: u64,
    pub cutoffs: Vec<usize>,
    pub bm25: Bm25Params,
    pub embed: TrainConfig,
    pub lda: LdaConfig,
    pub fusion: FusionConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus: None,
            out_dir: PathBuf::from("out"),
            train_years: YearRange::new(1991, 2016).expect("valid range"),
            test_years: YearRange::new(2017, 2017).expect("valid range"),
            min_citations: 0,
            stopwords: None,
            seed: 1,
            cutoffs: DEFAULT_CUTOFFS.to_vec(),
            bm25: Bm25Params::default(),
            embed: TrainConfig::default(),
            lda: LdaConfig::default(),
            fusion: FusionConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_years.overlaps(&self.test_years) {
            return Err(Error::Config(format!(
                "train years {} and test years {} overlap",
                self.train_years, self.test_years
            )));
        }
        if self.cutoffs.is_empty() || self.cutoffs.contains(&0) {
            return Err(Error::Config("cutoffs must be a non-empty list of positive integers".into()));
        }
        self.bm25.validate()?;
        self.embed.validate()?;
        self.lda.validate()?;
        self.fusion.validate()
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.out_dir)
    }

    pub fn stopword_set(&self) -> Result<StopwordSet> {
        match &self.stopwords {
            Some(path) => StopwordSet::load(path),
            None => Ok(StopwordSet::bundled()),
        }
    }

    pub fn hd2v_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed.wrapping_add(HD2V_SEED_OFFSET),
            ..self.embed.clone()
        }
    }

    pub fn doc2vec_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed.wrapping_add(DOC2VEC_SEED_OFFSET),
            ..self.embed.clone()
        }
    }

    pub fn lda_config(&self) -> LdaConfig {
        LdaConfig {
            seed: self.seed.wrapping_add(LDA_SEED_OFFSET),
            ..self.lda.clone()
        }
    }

    pub fn fusion_config(&self) -> FusionConfig {
        FusionConfig {
            seed: self.seed.wrapping_add(FUSION_SEED_OFFSET),
            ..self.fusion.clone()
        }
    }
}

/// File locations under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Layout { root: root.to_path_buf() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn corpus(&self, orientation: Orientation) -> PathBuf {
        self.root.join("corpus").join(format!("{orientation}.jsonl"))
    }

    pub fn test_queries(&self) -> PathBuf {
        self.root.join("test_queries.jsonl")
    }

    pub fn model(&self, model: ModelType, orientation: Orientation) -> PathBuf {
        self.root.join("models").join(format!("{model}-{orientation}.json"))
    }

    pub fn report(&self, spec: &AlgorithmSpec) -> PathBuf {
        self.root.join("reports").join(format!("{}.json", spec.file_stem()))
    }

    pub fn comparison(&self) -> PathBuf {
        self.root.join("reports").join("comparison.csv")
    }

    pub fn curves(&self) -> PathBuf {
        self.root.join("reports").join("curves.tsv")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    fn relative(&self, path: &Path) -> String {
        path.strip_prefix(&self.root)
            .unwrap_or(path)
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/")
    }
}

/// Trainable model families; each is stored per orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelType {
    Bm25,
    Hd2v,
    Doc2vec,
    Lda,
}

impl ModelType {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelType::Bm25 => "bm25",
            ModelType::Hd2v => "hd2v",
            ModelType::Doc2vec => "doc2vec",
            ModelType::Lda => "lda",
        }
    }
}

impl fmt::Display for ModelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bm25" => Ok(ModelType::Bm25),
            "hd2v" => Ok(ModelType::Hd2v),
            "doc2vec" => Ok(ModelType::Doc2vec),
            "lda" => Ok(ModelType::Lda),
            other => Err(Error::Config(format!(
                "unknown model {other:?} (expected bm25, hd2v, doc2vec or lda)"
            ))),
        }
    }
}

/// Recommendation algorithms, including the fused ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    Bm25,
    Hd2vOut,
    Hd2vInOut,
    Doc2vec,
    Lda,
    /// BM25 and hd2vOUT over the citing orientation.
    Hybrid,
    /// hd2vOUT and BM25 over the cited orientation plus BM25 over the citing one.
    Hybrid23,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Bm25,
        Algorithm::Hd2vOut,
        Algorithm::Hd2vInOut,
        Algorithm::Doc2vec,
        Algorithm::Lda,
        Algorithm::Hybrid,
        Algorithm::Hybrid23,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Bm25 => "bm25",
            Algorithm::Hd2vOut => "hd2vout",
            Algorithm::Hd2vInOut => "hd2vinout",
            Algorithm::Doc2vec => "doc2vec",
            Algorithm::Lda => "lda",
            Algorithm::Hybrid => "hybrid",
            Algorithm::Hybrid23 => "hybrid23",
        }
    }

    pub fn is_fused(self) -> bool {
        matches!(self, Algorithm::Hybrid | Algorithm::Hybrid23)
    }

    fn model_type(self) -> Option<ModelType> {
        match self {
            Algorithm::Bm25 => Some(ModelType::Bm25),
            Algorithm::Hd2vOut | Algorithm::Hd2vInOut => Some(ModelType::Hd2v),
            Algorithm::Doc2vec => Some(ModelType::Doc2vec),
            Algorithm::Lda => Some(ModelType::Lda),
            Algorithm::Hybrid | Algorithm::Hybrid23 => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let name = if lower == "hybrid12" { "hybrid" } else { lower.as_str() };
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == name)
            .ok_or_else(|| {
                let names: Vec<&str> = Algorithm::ALL.iter().map(|a| a.as_str()).collect();
                Error::Config(format!("unknown algorithm {s:?} (expected one of {})", names.join(", ")))
            })
    }
}

/// `name` or `name@orientation`; single models default to citing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AlgorithmSpec {
    pub algorithm: Algorithm,
    pub orientation: Orientation,
}

impl AlgorithmSpec {
    pub fn new(algorithm: Algorithm, orientation: Orientation) -> Result<Self> {
        if algorithm.is_fused() && orientation != Orientation::Citing {
            return Err(Error::Config(format!(
                "{algorithm} fixes its own corpus orientations and takes no @orientation"
            )));
        }
        Ok(AlgorithmSpec { algorithm, orientation })
    }

    pub fn label(&self) -> String {
        match self.orientation {
            Orientation::Citing => self.algorithm.to_string(),
            Orientation::Cited => format!("{}@cited", self.algorithm),
        }
    }

    fn file_stem(&self) -> String {
        self.label().replace('@', "-")
    }
}

impl FromStr for AlgorithmSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, orientation) = match s.split_once('@') {
            Some((name, o)) => (name, o.parse::<Orientation>()?),
            None => (s, Orientation::Citing),
        };
        AlgorithmSpec::new(name.trim().parse()?, orientation)
    }
}

impl fmt::Display for AlgorithmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// In-memory result of preparation, before anything is written.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Vec<Document>,
    pub citing: Vec<TrainingDocument>,
    pub cited: Vec<TrainingDocument>,
    pub queries: Vec<TestQuery>,
    pub test_source_documents: usize,
}

impl Prepared {
    pub fn corpus(&self, orientation: Orientation) -> &[TrainingDocument] {
        match orientation {
            Orientation::Citing => &self.citing,
            Orientation::Cited => &self.cited,
        }
    }
}

fn strip_stopwords(docs: Vec<TrainingDocument>, stopwords: &StopwordSet) -> Vec<TrainingDocument> {
    docs.into_iter()
        .map(|d| TrainingDocument {
            tokens: remove_stopwords(&d.tokens, stopwords),
            ..d
        })
        .collect()
}

/// Split by year, filter training papers by citation count, build both
/// training orientations and extract test queries.
///
/// Citation counts come from every loaded paper, so the filter is a pure
/// threshold on a fixed count.
pub fn prepare_documents(
    docs: &[Document],
    train_years: YearRange,
    test_years: YearRange,
    min_citations: usize,
    stopwords: &StopwordSet,
) -> Result<Prepared> {
    let counts = CitationCounts::from_documents(docs);
    let (train, test) = split_train_test(docs, train_years, test_years)?;
    let train = filter_min_citations(&train, &counts, min_citations);
    if train.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no training papers left for years {train_years} with at least {min_citations} citations"
        )));
    }
    let train_ids: HashSet<String> = train.iter().map(|d| d.id.clone()).collect();
    let queries = extract_test_queries(&test, &train_ids, stopwords);
    Ok(Prepared {
        citing: strip_stopwords(build_pseudo_fulltext(&train), stopwords),
        cited: strip_stopwords(build_cited_pseudo_fulltext(&train), stopwords),
        queries,
        test_source_documents: test.len(),
        train,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub model: String,
    pub orientation: Orientation,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
}

/// `manifest.json`: counts, configuration echoes and checksums of every
/// artifact, keyed by path relative to the output directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Manifest {
    pub seed: u64,
    pub corpus: Option<String>,
    pub corpus_sha256: Option<String>,
    pub counts: BTreeMap<String, usize>,
    pub models: BTreeMap<String, ModelRecord>,
    pub reports: Vec<String>,
    pub artifacts: BTreeMap<String, ArtifactEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        jsonl::read_json(path)
    }

    fn load_or_default(path: &Path) -> Result<Self> {
        if path.exists() {
            Self::load(path)
        } else {
            Ok(Manifest::default())
        }
    }

    fn record(&mut self, layout: &Layout, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        self.artifacts.insert(
            layout.relative(path),
            ArtifactEntry {
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            },
        );
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn require(path: PathBuf, hint: impl Into<String>) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact { path, hint: hint.into() })
    }
}

fn require_corpus(layout: &Layout, orientation: Orientation) -> Result<PathBuf> {
    require(layout.corpus(orientation), "run `citerec prepare` first")
}

fn require_model(layout: &Layout, model: ModelType, orientation: Orientation) -> Result<PathBuf> {
    require(
        layout.model(model, orientation),
        format!("run `citerec train --algorithm {model} --orientation {orientation}` first"),
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrepareSummary {
    pub counts: BTreeMap<String, usize>,
}

/// Load the raw corpus and write both training corpora, the test queries
/// and a fresh manifest.
pub fn cmd_prepare(config: &PipelineConfig) -> Result<PrepareSummary> {
    config.validate()?;
    let corpus_path = config
        .corpus
        .as_deref()
        .ok_or_else(|| Error::Config("no corpus given; pass --corpus or set `corpus` in the config file".into()))?;
    let stopwords = config.stopword_set()?;
    let report = load_corpus(corpus_path)?;
    for r in &report.rejected {
        log::warn!("{}:{}: {}", corpus_path.display(), r.line, r.reason);
    }
    if report.dropped_contexts > 0 {
        log::warn!("dropped {} contexts without cited ids", report.dropped_contexts);
    }
    let prepared = prepare_documents(
        &report.documents,
        config.train_years,
        config.test_years,
        config.min_citations,
        &stopwords,
    )?;
    if prepared.queries.is_empty() {
        log::warn!("no test contexts survived filtering; evaluation will fail");
    }

    let layout = config.layout();
    let mut manifest = Manifest {
        seed: config.seed,
        corpus: Some(corpus_path.display().to_string()),
        corpus_sha256: Some(sha256_hex(
            &std::fs::read(corpus_path).map_err(|e| Error::io(corpus_path, e))?,
        )),
        ..Manifest::default()
    };
    for orientation in [Orientation::Citing, Orientation::Cited] {
        let path = layout.corpus(orientation);
        jsonl::write_jsonl(&path, prepared.corpus(orientation))?;
        manifest.record(&layout, &path)?;
    }
    jsonl::write_jsonl(&layout.test_queries(), &prepared.queries)?;
    manifest.record(&layout, &layout.test_queries())?;

    let markers = |docs: &[TrainingDocument]| docs.iter().map(|d| d.markers().count()).sum::<usize>();
    let counts = BTreeMap::from([
        ("documents_loaded".to_string(), report.documents.len()),
        ("rejected_lines".to_string(), report.rejected.len()),
        ("dropped_contexts".to_string(), report.dropped_contexts),
        ("dangling_references".to_string(), report.dangling_refs),
        ("training_papers".to_string(), prepared.train.len()),
        ("test_source_papers".to_string(), prepared.test_source_documents),
        ("test_contexts".to_string(), prepared.queries.len()),
        ("citing_markers".to_string(), markers(&prepared.citing)),
        ("cited_markers".to_string(), markers(&prepared.cited)),
    ]);
    for (k, v) in &counts {
        log::info!("{k}: {v}");
    }
    manifest.counts = counts.clone();
    jsonl::write_json(&layout.manifest(), &manifest)?;
    Ok(PrepareSummary { counts })
}

fn to_value<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).unwrap_or(serde_json::Value::Null)
}

/// Train one model family on one prepared orientation and persist it.
pub fn cmd_train(config: &PipelineConfig, model: ModelType, orientation: Orientation) -> Result<PathBuf> {
    config.validate()?;
    let layout = config.layout();
    let docs: Vec<TrainingDocument> = jsonl::read_jsonl(&require_corpus(&layout, orientation)?)?;
    let out = layout.model(model, orientation);
    let (seed, echo) = match model {
        ModelType::Bm25 => {
            InvertedIndex::build(&docs)?.save(&out)?;
            (None, to_value(&config.bm25))
        }
        ModelType::Hd2v => {
            let cfg = config.hd2v_config();
            log::info!("training hd2v on {} {orientation} papers, seed {}", docs.len(), cfg.seed);
            train_hd2v(&docs, &cfg)?.save(&out)?;
            (Some(cfg.seed), to_value(&cfg))
        }
        ModelType::Doc2vec => {
            let cfg = config.doc2vec_config();
            log::info!("training doc2vec on {} {orientation} papers, seed {}", docs.len(), cfg.seed);
            train_doc2vec(&docs, &cfg)?.save(&out)?;
            (Some(cfg.seed), to_value(&cfg))
        }
        ModelType::Lda => {
            let cfg = config.lda_config();
            log::info!("training lda with {} topics on {} {orientation} papers, seed {}", cfg.topics, docs.len(), cfg.seed);
            train_lda(&docs, &cfg)?.save(&out)?;
            (Some(cfg.seed), to_value(&cfg))
        }
    };
    log::info!("wrote {}", out.display());

    let mut manifest = Manifest::load_or_default(&layout.manifest())?;
    manifest.record(&layout, &out)?;
    manifest.models.insert(
        layout.relative(&out),
        ModelRecord {
            model: model.to_string(),
            orientation,
            seed,
            config: echo,
        },
    );
    jsonl::write_json(&layout.manifest(), &manifest)?;
    Ok(out)
}

/// Loaded recommenders for one output directory, cached per artifact.
struct Components<'a> {
    config: &'a PipelineConfig,
    layout: Layout,
    bm25: BTreeMap<Orientation, Arc<InvertedIndex>>,
    spaces: BTreeMap<(ModelType, Orientation), Arc<EmbeddingSpace>>,
    lda: BTreeMap<Orientation, Arc<LdaModel>>,
}

impl<'a> Components<'a> {
    fn new(config: &'a PipelineConfig) -> Self {
        Components {
            config,
            layout: config.layout(),
            bm25: BTreeMap::new(),
            spaces: BTreeMap::new(),
            lda: BTreeMap::new(),
        }
    }

    /// Check every artifact `spec` needs so a missing one is named before
    /// any loading starts.
    fn check(&self, spec: AlgorithmSpec) -> Result<()> {
        for (model, orientation) in requirements(spec) {
            require_model(&self.layout, model, orientation)?;
        }
        Ok(())
    }

    fn index(&mut self, orientation: Orientation) -> Result<Arc<InvertedIndex>> {
        if let Some(ix) = self.bm25.get(&orientation) {
            return Ok(ix.clone());
        }
        let path = require_model(&self.layout, ModelType::Bm25, orientation)?;
        let ix = Arc::new(InvertedIndex::load(&path)?);
        self.bm25.insert(orientation, ix.clone());
        Ok(ix)
    }

    fn space(&mut self, model: ModelType, orientation: Orientation) -> Result<Arc<EmbeddingSpace>> {
        if let Some(s) = self.spaces.get(&(model, orientation)) {
            return Ok(s.clone());
        }
        let path = require_model(&self.layout, model, orientation)?;
        let s = Arc::new(EmbeddingSpace::load(&path)?);
        self.spaces.insert((model, orientation), s.clone());
        Ok(s)
    }

    fn lda_model(&mut self, orientation: Orientation) -> Result<Arc<LdaModel>> {
        if let Some(m) = self.lda.get(&orientation) {
            return Ok(m.clone());
        }
        let path = require_model(&self.layout, ModelType::Lda, orientation)?;
        let m = Arc::new(LdaModel::load(&path)?);
        self.lda.insert(orientation, m.clone());
        Ok(m)
    }

    fn single(&mut self, algorithm: Algorithm, orientation: Orientation) -> Result<Box<dyn Recommender>> {
        let label = AlgorithmSpec { algorithm, orientation }.label();
        Ok(match algorithm {
            Algorithm::Bm25 => Box::new(Bm25Recommender {
                label,
                index: (*self.index(orientation)?).clone(),
                params: self.config.bm25,
            }),
            Algorithm::Hd2vOut => Box::new(EmbeddingRecommender::hd2v_out(label, self.space(ModelType::Hd2v, orientation)?)),
            Algorithm::Hd2vInOut => {
                Box::new(EmbeddingRecommender::hd2v_inout(label, self.space(ModelType::Hd2v, orientation)?))
            }
            Algorithm::Doc2vec => {
                Box::new(EmbeddingRecommender::doc2vec(label, self.space(ModelType::Doc2vec, orientation)?))
            }
            Algorithm::Lda => {
                let cfg = self.config.lda_config();
                Box::new(LdaRecommender {
                    label,
                    model: self.lda_model(orientation)?,
                    infer_iterations: cfg.infer_iterations,
                    infer_average: cfg.infer_average,
                    seed: cfg.seed,
                })
            }
            Algorithm::Hybrid | Algorithm::Hybrid23 => unreachable!("fused algorithms are built by `hybrid`"),
        })
    }

    fn hybrid(&mut self, algorithm: Algorithm) -> Result<HybridRecommender<Box<dyn Recommender>>> {
        let parts = match algorithm {
            Algorithm::Hybrid => vec![(Algorithm::Bm25, Orientation::Citing), (Algorithm::Hd2vOut, Orientation::Citing)],
            Algorithm::Hybrid23 => vec![
                (Algorithm::Hd2vOut, Orientation::Cited),
                (Algorithm::Bm25, Orientation::Cited),
                (Algorithm::Bm25, Orientation::Citing),
            ],
            _ => unreachable!("not a fused algorithm"),
        };
        let components = parts
            .into_iter()
            .map(|(a, o)| self.single(a, o))
            .collect::<Result<Vec<_>>>()?;
        Ok(HybridRecommender::new(algorithm.as_str(), components, self.config.fusion_config()))
    }

    fn recommender(&mut self, spec: AlgorithmSpec) -> Result<Box<dyn Recommender>> {
        self.check(spec)?;
        if spec.algorithm.is_fused() {
            Ok(Box::new(self.hybrid(spec.algorithm)?))
        } else {
            self.single(spec.algorithm, spec.orientation)
        }
    }
}

/// Model artifacts an algorithm reads.
pub fn requirements(spec: AlgorithmSpec) -> Vec<(ModelType, Orientation)> {
    match spec.algorithm {
        Algorithm::Hybrid => vec![(ModelType::Bm25, Orientation::Citing), (ModelType::Hd2v, Orientation::Citing)],
        Algorithm::Hybrid23 => vec![
            (ModelType::Hd2v, Orientation::Cited),
            (ModelType::Bm25, Orientation::Cited),
            (ModelType::Bm25, Orientation::Citing),
        ],
        single => vec![(single.model_type().expect("single model"), spec.orientation)],
    }
}

/// Output of `recommend`: a plain ranking, or a fused list with draw counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Recommendation {
    Ranked(RankedList),
    Fused(FusedList),
}

impl Recommendation {
    pub fn ids(&self) -> Vec<String> {
        match self {
            Recommendation::Ranked(r) => r.id_vec(),
            Recommendation::Fused(f) => f.ids().map(str::to_string).collect(),
        }
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        match self {
            Recommendation::Ranked(r) => {
                out.push_str(&format!("{:>4}  {:<20} {:>12}\n", "rank", "paper", "score"));
                for (i, (id, score)) in r.entries.iter().enumerate() {
                    out.push_str(&format!("{:>4}  {:<20} {:>12.6}\n", i + 1, id, score));
                }
            }
            Recommendation::Fused(f) => {
                out.push_str(&format!("{:>4}  {:<20} {:>10} {:>12}\n", "rank", "paper", "draws", "p"));
                for (i, e) in f.entries.iter().enumerate() {
                    out.push_str(&format!("{:>4}  {:<20} {:>10} {:>12.6}\n", i + 1, e.id, e.count, e.probability));
                }
            }
        }
        out
    }
}

/// Recommend `k` papers for a raw citation context.
pub fn cmd_recommend(config: &PipelineConfig, context: &str, spec: AlgorithmSpec, k: usize) -> Result<Recommendation> {
    config.validate()?;
    if k == 0 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    let query = query_terms(context, &config.stopword_set()?);
    let mut components = Components::new(config);
    components.check(spec)?;
    if spec.algorithm.is_fused() {
        let mut fused = components.hybrid(spec.algorithm)?.fuse_query(&query)?;
        fused.entries.truncate(k);
        Ok(Recommendation::Fused(fused))
    } else {
        let rec = components.single(spec.algorithm, spec.orientation)?;
        Ok(Recommendation::Ranked(rec.recommend(&query, k)?))
    }
}

/// Evaluate each algorithm on the prepared test queries and write one report
/// per algorithm plus the comparison table and curve data.
pub fn cmd_evaluate(config: &PipelineConfig, specs: &[AlgorithmSpec]) -> Result<Vec<EvalReport>> {
    config.validate()?;
    if specs.is_empty() {
        return Err(Error::Config("no algorithms to evaluate".into()));
    }
    let layout = config.layout();
    let queries_path = require(layout.test_queries(), "run `citerec prepare` first")?;
    let queries: Vec<TestQuery> = jsonl::read_jsonl(&queries_path)?;
    let mut components = Components::new(config);
    for &spec in specs {
        components.check(spec)?;
    }

    let mut manifest = Manifest::load_or_default(&layout.manifest())?;
    let mut reports = Vec::with_capacity(specs.len());
    for &spec in specs {
        let rec = components.recommender(spec)?;
        let report = run_evaluation(&rec, &queries, &config.cutoffs)?;
        let path = layout.report(&spec);
        report.save(&path)?;
        manifest.record(&layout, &path)?;
        let rel = layout.relative(&path);
        if !manifest.reports.contains(&rel) {
            manifest.reports.push(rel);
        }
        if let Some(m) = report.at(*config.cutoffs.iter().max().unwrap_or(&10)) {
            log::info!(
                "{}: n={} map={:.4} recall={:.4} mrr={:.4} ndcg={:.4}",
                report.algorithm,
                report.n,
                m.map,
                m.recall,
                m.mrr,
                m.ndcg
            );
        }
        reports.push(report);
    }

    for (path, text) in [
        (layout.comparison(), comparison_csv(&reports)),
        (layout.curves(), curve_data(&reports)),
    ] {
        jsonl::create_parent(&path)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        manifest.record(&layout, &path)?;
    }
    jsonl::write_json(&layout.manifest(), &manifest)?;
    Ok(reports)
}
