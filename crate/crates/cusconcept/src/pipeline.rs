//! End-to-end orchestration: resolve a configuration into live components,
//! run the two training stages (or a baseline), and drive the benchmark.

use std::path::Path;

use crate::config::RunConfig;
use crate::diffusion::{DiffusionBackend, ImageTensor, TinyBackend};
use crate::embedding::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::eval::{
    clip_i, ingest_dataset, prompt_similarity, retrieval_acc, sim_emb, BenchmarkRecord,
    CandidateLists, LabelSets, MetricReport, PromptTemplateSet, RecordMetrics,
};
use crate::features::{MeanPoolText, PooledImageFeatures, ProjectionScorer, WordImageScorer};
use crate::generation::{self, GenerationMode, GenerationRequest, DEFAULT_TEMPLATE};
use crate::image_io::load_image;
use crate::logging::RunLogger;
use crate::math::{DetRng, Fingerprint};
use crate::stage1::{
    predict_vocabulary, train_stage1, Stage1Output, VocabEmbeddings, WeightTable,
};
use crate::stage2::bundle::{BundleInputs, BundleSeeds, LossHistory};
use crate::stage2::{
    init_tokens, init_tokens_baseline, save_bundle, train_stage2, BaselineMode, ConceptBundle,
};
use crate::vocab::{
    build_object_vocabulary, build_openset_attribute_vocabulary, now_iso8601,
    query_axis_vocabulary, FixtureLlm, HttpLlm, LexiconTagger, LlmClient, VocabCacheStore,
    VocabularyCache,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Ours,
    TiAlpha,
    TiBeta,
    OursWoJcr,
    OursWoAa,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::TiAlpha => "ti_alpha",
            Method::TiBeta => "ti_beta",
            Method::OursWoJcr => "ours_wo_jcr",
            Method::OursWoAa => "ours_wo_aa",
        }
    }

    pub fn all() -> [Method; 5] {
        [Method::Ours, Method::TiAlpha, Method::TiBeta, Method::OursWoJcr, Method::OursWoAa]
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ours" => Ok(Method::Ours),
            "ti_alpha" => Ok(Method::TiAlpha),
            "ti_beta" => Ok(Method::TiBeta),
            "ours_wo_jcr" => Ok(Method::OursWoJcr),
            "ours_wo_aa" => Ok(Method::OursWoAa),
            other => Err(Error::InvalidRequest { reason: format!("unknown method {other:?}") }),
        }
    }
}

/// Everything a run needs, resolved once from the configuration.
pub struct Session {
    pub config: RunConfig,
    pub config_hash: String,
    pub space: EmbeddingSpace,
    pub backend: Box<dyn DiffusionBackend>,
    pub store: VocabCacheStore,
    pub llm: Box<dyn LlmClient>,
    pub tagger: LexiconTagger,
    pub templates: PromptTemplateSet,
    pub candidates: CandidateLists,
    pub labels: LabelSets,
    pub logger: RunLogger,
}

impl Session {
    pub fn new(config: RunConfig) -> Result<Session> {
        let config_hash = config.hash();
        let space = build_embedding_space(&config)?;
        let backend = build_backend(&config, space.dim())?;
        let store = VocabCacheStore::new(config.cache_dir());
        let llm: Box<dyn LlmClient> = match config.llm.provider.as_str() {
            "fixture" => Box::new(FixtureLlm { dir: config.llm.fixtures_dir.clone() }),
            "http" => Box::new(HttpLlm::from_env(&config.llm.base_url, &config.llm.model)?),
            other => {
                return Err(Error::Config { reason: format!("unknown llm provider {other:?}") })
            }
        };
        let templates = match (&config.eval.templates_attr_path, &config.eval.templates_obj_path) {
            (Some(a), Some(o)) => PromptTemplateSet::from_files(a, o)?,
            _ => PromptTemplateSet::standin_v1(),
        };
        let candidates = match (&config.eval.candidates_attr_path, &config.eval.candidates_obj_path)
        {
            (Some(a), Some(o)) => CandidateLists::from_files(a, o)?,
            _ => CandidateLists::bundled(),
        };
        let labels = match &config.eval.labels_path {
            Some(p) => LabelSets::from_file(p)?,
            None => LabelSets::bundled(),
        };
        let logger = RunLogger::new(config.log_every, config.paths.log_jsonl.as_deref())?;
        Ok(Session {
            config,
            config_hash,
            space,
            backend,
            store,
            llm,
            tagger: LexiconTagger::bundled(),
            templates,
            candidates,
            labels,
            logger,
        })
    }
}

pub fn build_embedding_space(config: &RunConfig) -> Result<EmbeddingSpace> {
    if let Some(path) = &config.encoder.table_path {
        return EmbeddingSpace::clip_from_table_file(path);
    }
    if config.text_encoder_id.starts_with("clip-synthetic") {
        return Ok(EmbeddingSpace::clip_synthetic(config.encoder.dim, config.encoder.seed));
    }
    Err(Error::BackendUnavailable {
        reason: format!(
            "text encoder {:?} needs encoder.table_path pointing at an exported table",
            config.text_encoder_id
        ),
    })
}

pub fn build_backend(config: &RunConfig, embed_dim: usize) -> Result<Box<dyn DiffusionBackend>> {
    match config.backend.kind.as_str() {
        "tiny" => Ok(Box::new(TinyBackend::new(config.backend.seed, embed_dim))),
        "pretrained" => {
            crate::diffusion::PretrainedBackend::load(Path::new(&config.backend.model_id))?;
            unreachable!("pretrained loader currently always reports unavailability")
        }
        other => Err(Error::Config { reason: format!("unknown backend kind {other:?}") }),
    }
}

/// Result of training one image by any method.
pub struct TrainedConcepts {
    pub bundle: ConceptBundle,
    /// Stage-1 weight tables (attribute axes then object); empty for the
    /// textual-inversion baselines.
    pub attr_tables: Vec<WeightTable>,
    pub object_table: Option<WeightTable>,
    /// Concept embedding per axis for retrieval metrics: the stage-1
    /// centroid for the decomposition methods, the learned token otherwise.
    pub attr_concepts: Vec<Vec<f64>>,
    pub object_concept: Vec<f64>,
    /// Ranked top-word predictions per axis plus the object row.
    pub predictions: Vec<(String, Vec<(String, f64)>)>,
}

pub struct TrainOptions {
    pub axes: Vec<String>,
    pub skip_refinement: bool,
    pub no_attribute_axes: bool,
}

fn image_sha(image: &ImageTensor) -> String {
    let mut fp = Fingerprint::new();
    fp.add_f64s(image.data());
    fp.finish()[..16].to_string()
}

fn stream_seed(base: u64, label: &str) -> u64 {
    DetRng::derive(base, label).next_u64()
}

/// Vocabulary-guided decomposition (stage 1) plus optional joint refinement.
pub fn train_ours(
    session: &mut Session,
    image: &ImageTensor,
    options: &TrainOptions,
) -> Result<TrainedConcepts> {
    let config = session.config.clone();
    let scorer = ProjectionScorer::new(&session.space, config.vocab.scorer_seed);

    // object vocabulary, cached by image content
    let sha = image_sha(image);
    let object_words = {
        let cached = match session.store.load("object_vocab", &sha, &scorer.id(), &scorer.template)
        {
            Ok(hit) => hit,
            Err(Error::CacheCorrupt { .. }) => None,
            Err(e) => return Err(e),
        };
        match cached {
            Some(hit) => hit.words,
            None => {
                let vocab = build_object_vocabulary(
                    image,
                    session.space.token_universe(),
                    &scorer,
                    &session.tagger,
                    config.vocab.m_obj,
                )?;
                session.store.save(&VocabularyCache {
                    kind: "object_vocab".into(),
                    key: sha.clone(),
                    provider: scorer.id(),
                    prompt: scorer.template.clone(),
                    words: vocab.words.clone(),
                    scores: Some(vocab.scores.clone()),
                    created_at: now_iso8601(),
                })?;
                vocab.words
            }
        }
    };

    // attribute vocabularies: per user axis, or open-set for the ablation
    let axis_word_lists: Vec<(String, Vec<String>)> = if options.no_attribute_axes {
        let open = build_openset_attribute_vocabulary(
            image,
            session.space.token_universe(),
            &scorer,
            &session.tagger,
            config.vocab.m_attr_open,
        )?;
        vec![(open.name, open.words)]
    } else {
        if options.axes.is_empty() {
            return Err(Error::InvalidRequest {
                reason: "at least one --axis is required (or --no-attribute-axes)".into(),
            });
        }
        let mut lists = Vec::with_capacity(options.axes.len());
        for axis in &options.axes {
            let acquired = query_axis_vocabulary(
                axis,
                session.llm.as_ref(),
                &session.space,
                config.vocab.n_attr,
                &session.store,
            )?;
            if acquired.short {
                session.logger.event(&format!(
                    "warning: axis {axis:?} vocabulary is short ({} words)",
                    acquired.words.len()
                ));
            }
            lists.push((acquired.name, acquired.words));
        }
        lists
    };

    let mut axes_emb = Vec::with_capacity(axis_word_lists.len());
    for (name, words) in &axis_word_lists {
        axes_emb.push(VocabEmbeddings::gather(&session.space, name, words)?);
    }
    let object_emb = VocabEmbeddings::gather(&session.space, "object", &object_words)?;

    let logger = &mut session.logger;
    let mut observe = |e: crate::stage1::StepEvent| logger.step("stage1", &e);
    let stage1 = train_stage1(
        image,
        &axes_emb,
        &object_emb,
        session.backend.as_ref(),
        &session.space,
        DEFAULT_TEMPLATE,
        &config.stage1_config(),
        Some(&mut observe),
    )?;

    let state = init_tokens(&stage1.centroids, &stage1.object_centroid)?;
    let (tokens, stage, stage2_history) = if options.skip_refinement {
        (state.tokens, 1u8, Vec::new())
    } else {
        let logger = &mut session.logger;
        let mut observe = |e: crate::stage1::StepEvent| logger.step("stage2", &e);
        let refined = train_stage2(
            image,
            state,
            session.backend.as_ref(),
            &session.space,
            DEFAULT_TEMPLATE,
            &config.stage2_config(),
            Some(&mut observe),
        )?;
        (refined.tokens, 2u8, refined.loss_history)
    };

    let mut tables = stage1.tables.clone();
    tables.push(stage1.object_table.clone());
    let bundle = ConceptBundle::build(BundleInputs {
        tokens: &tokens,
        stage,
        seeds: BundleSeeds {
            stage1: config.stage1.seed,
            stage2: (!options.skip_refinement).then_some(config.stage2.seed),
        },
        config_hash: session.config_hash.clone(),
        encoder_id: session.space.encoder_id().to_string(),
        backend_id: session.backend.id(),
        weight_tables: Some(tables),
        loss_history: LossHistory { stage1: stage1.loss_history.clone(), stage2: stage2_history },
    });

    let predictions = predictions_of(&stage1);
    Ok(TrainedConcepts {
        bundle,
        attr_tables: stage1.tables,
        object_table: Some(stage1.object_table),
        attr_concepts: stage1.centroids.iter().map(|c| c.values.clone()).collect(),
        object_concept: stage1.object_centroid.values,
        predictions,
    })
}

fn predictions_of(stage1: &Stage1Output) -> Vec<(String, Vec<(String, f64)>)> {
    let mut out: Vec<(String, Vec<(String, f64)>)> = stage1
        .tables
        .iter()
        .map(|t| (t.axis.clone(), predict_vocabulary(t, 5)))
        .collect();
    out.push(("object".into(), predict_vocabulary(&stage1.object_table, 5)));
    out
}

/// Multi-token textual-inversion baseline (labels or random init).
pub fn train_baseline(
    session: &mut Session,
    image: &ImageTensor,
    mode: BaselineMode,
) -> Result<TrainedConcepts> {
    let config = session.config.clone();
    let state = init_tokens_baseline(&session.space, mode)?;
    let logger = &mut session.logger;
    let mut observe = |e: crate::stage1::StepEvent| logger.step("baseline", &e);
    let refined = train_stage2(
        image,
        state,
        session.backend.as_ref(),
        &session.space,
        DEFAULT_TEMPLATE,
        &config.stage2_config(),
        Some(&mut observe),
    )?;

    let attr_concepts: Vec<Vec<f64>> = refined
        .tokens
        .iter()
        .filter(|t| matches!(t.role, crate::stage2::TokenRole::Attribute { .. }))
        .map(|t| t.values.clone())
        .collect();
    let object_concept = refined
        .tokens
        .iter()
        .find(|t| t.role == crate::stage2::TokenRole::Object)
        .map(|t| t.values.clone())
        .unwrap_or_default();

    let bundle = ConceptBundle::build(BundleInputs {
        tokens: &refined.tokens,
        stage: 2,
        seeds: BundleSeeds { stage1: 0, stage2: Some(config.stage2.seed) },
        config_hash: session.config_hash.clone(),
        encoder_id: session.space.encoder_id().to_string(),
        backend_id: session.backend.id(),
        weight_tables: None,
        loss_history: LossHistory { stage1: Vec::new(), stage2: refined.loss_history },
    });
    Ok(TrainedConcepts {
        bundle,
        attr_tables: Vec::new(),
        object_table: None,
        attr_concepts,
        object_concept,
        predictions: Vec::new(),
    })
}

/// Train one benchmark record with the given method.
pub fn train_method(
    session: &mut Session,
    image: &ImageTensor,
    record: &BenchmarkRecord,
    method: Method,
) -> Result<TrainedConcepts> {
    match method {
        Method::Ours => train_ours(
            session,
            image,
            &TrainOptions {
                axes: vec![record.axis.clone()],
                skip_refinement: false,
                no_attribute_axes: false,
            },
        ),
        Method::OursWoJcr => train_ours(
            session,
            image,
            &TrainOptions {
                axes: vec![record.axis.clone()],
                skip_refinement: true,
                no_attribute_axes: false,
            },
        ),
        Method::OursWoAa => train_ours(
            session,
            image,
            &TrainOptions { axes: Vec::new(), skip_refinement: false, no_attribute_axes: true },
        ),
        Method::TiAlpha => train_baseline(
            session,
            image,
            BaselineMode::GtLabels {
                attr_labels: vec![record.attribute.clone()],
                object_label: record.object.clone(),
            },
        ),
        Method::TiBeta => train_baseline(
            session,
            image,
            BaselineMode::Random {
                n_attrs: 1,
                seed: stream_seed(session.config.stage2.seed, &record.image),
            },
        ),
    }
}

/// Train, generate the three prompt modes, and compute all metrics for one
/// record.
pub fn evaluate_record(
    session: &mut Session,
    dataset_root: &Path,
    record: &BenchmarkRecord,
    method: Method,
    out_dir: &Path,
) -> Result<RecordMetrics> {
    let geometry = session.backend.image_geometry();
    let reference = load_image(&dataset_root.join(&record.image), geometry)?;
    let trained = train_method(session, &reference, record, method)?;

    let stem = record
        .image
        .replace(['/', '\\'], "_")
        .trim_end_matches(".png")
        .trim_end_matches(".jpg")
        .to_string();
    let bundle_id = format!("{stem}__{}", method.as_str());
    save_bundle(&out_dir.join("bundles").join(&bundle_id), &trained.bundle)?;

    // generation for the three prompt modes, fixed seeds per record
    let mut gen_space = session.space.fresh();
    let registered = generation::register_bundles(
        &mut gen_space,
        &[(bundle_id.clone(), trained.bundle.clone())],
    )?;
    let extractor = PooledImageFeatures::default();
    let mut clip_scores = [0.0; 3];
    for (i, mode) in [GenerationMode::APlusO, GenerationMode::AOnly, GenerationMode::OOnly]
        .into_iter()
        .enumerate()
    {
        let request = GenerationRequest {
            mode,
            bundles: vec![bundle_id.clone()],
            attr_from: None,
            obj_from: None,
            template: DEFAULT_TEMPLATE.into(),
            count: session.config.eval.images_per_mode,
            seed: stream_seed(
                session.config.eval.seed,
                &format!("{}-{}", record.image, mode.as_str()),
            ),
            steps: session.config.backend.steps,
            config_hash: session.config_hash.clone(),
        };
        let paths = generation::generate(
            session.backend.as_ref(),
            &gen_space,
            &registered,
            &request,
            &out_dir.join("gen"),
        )?;
        let mut generated = Vec::with_capacity(paths.len());
        for path in &paths {
            generated.push(load_image(path, geometry)?);
        }
        clip_scores[i] = clip_i(&extractor, &reference, &generated)?;
    }

    // text-side metrics
    let text_model = MeanPoolText;
    let (sim_a, sim_o) = match (&trained.attr_tables.first(), &trained.object_table) {
        (Some(attr_table), Some(object_table)) => (
            sim_emb(
                &session.space,
                &text_model,
                &session.templates.attribute,
                &record.attribute,
                attr_table,
            )?,
            sim_emb(
                &session.space,
                &text_model,
                &session.templates.object,
                &record.object,
                object_table,
            )?,
        ),
        _ => (
            prompt_similarity(
                &session.space,
                &text_model,
                &session.templates.attribute,
                &record.attribute,
                &trained.attr_concepts[0],
            )?,
            prompt_similarity(
                &session.space,
                &text_model,
                &session.templates.object,
                &record.object,
                &trained.object_concept,
            )?,
        ),
    };

    let retrieval_a = retrieval_acc(
        &session.space,
        &text_model,
        &session.templates.attribute,
        &trained.attr_concepts[0],
        &session.candidates.attributes,
        &record.attribute,
    )?;
    let retrieval_o = retrieval_acc(
        &session.space,
        &text_model,
        &session.templates.object,
        &trained.object_concept,
        &session.candidates.objects,
        &record.object,
    )?;

    Ok(RecordMetrics {
        image: record.image.clone(),
        method: method.as_str().into(),
        clip_i_ao: clip_scores[0],
        clip_i_a: clip_scores[1],
        clip_i_o: clip_scores[2],
        sim_emb_a: sim_a,
        sim_emb_o: sim_o,
        acc_a: if retrieval_a.hit { 1.0 } else { 0.0 },
        acc_o: if retrieval_o.hit { 1.0 } else { 0.0 },
        retrieved_a: retrieval_a.retrieved,
        retrieved_o: retrieval_o.retrieved,
        config_hash: session.config_hash.clone(),
    })
}

/// Run a whole dataset with one method. Per-record failures are recorded and
/// the run continues; completed rows are reused on re-runs with the same
/// configuration.
pub fn run_benchmark(
    session: &mut Session,
    dataset_root: &Path,
    method: Method,
    out_dir: &Path,
) -> Result<MetricReport> {
    let records = ingest_dataset(dataset_root, &session.labels, true)?;
    let rows_dir = out_dir.join("rows");
    std::fs::create_dir_all(&rows_dir)?;

    let mut rows = Vec::new();
    let mut incomplete = Vec::new();
    for record in &records {
        let stem = record.image.replace(['/', '\\'], "_");
        let row_path = rows_dir.join(format!("{stem}__{}.json", method.as_str()));
        if row_path.is_file() {
            if let Ok(existing) = serde_json::from_str::<RecordMetrics>(
                &std::fs::read_to_string(&row_path)?,
            ) {
                if existing.config_hash == session.config_hash {
                    rows.push(existing);
                    continue;
                }
            }
        }
        match evaluate_record(session, dataset_root, record, method, out_dir) {
            Ok(row) => {
                std::fs::write(&row_path, serde_json::to_string_pretty(&row)?)?;
                rows.push(row);
            }
            Err(e) => {
                session
                    .logger
                    .event(&format!("record {} failed: {e}", record.image));
                incomplete.push((record.image.clone(), e.to_string()));
            }
        }
    }

    let report = MetricReport::assemble(
        method.as_str(),
        &session.templates.version,
        &session.config_hash,
        rows,
        incomplete,
    );
    report.write(out_dir)?;
    Ok(report)
}
