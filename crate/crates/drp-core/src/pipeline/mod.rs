//! Difference-aware personalization pipeline: representative comparison,
//! reasoning-based difference extraction, reflective validation,
//! summarize-then-generate — plus the plain retrieval and non-personalized
//! baseline modes.
//!
//! A run executes user clustering and representative selection once, then
//! per temperature and per test sample: one extractor and one validator
//! call per representative, one summarizer call, one generator call.
//! Failing samples are recorded in the manifest and skipped; the run
//! continues.

pub mod mockgen;
mod parse;
pub mod prompts;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cluster::{
    kmeans_fit_restarts, select_representatives, ClusterError, ClusterModel, KmeansParams,
    RepresentativeSet,
};
use crate::corpus::{Corpus, CorpusError, ReviewSample};
use crate::embed::{
    profile_embedding, EmbedError, EmbeddingProvider, HashEmbeddingProvider,
    RemoteEmbeddingProvider, UserProfileEmbedding,
};
use crate::gateway::{Gateway, GatewayError, GatewayStats, ProviderSpec};
use crate::retrieve::{retrieve_key_history, RetrievalMode, RetrieveError, RetrievedHistory};

pub use parse::{parse_difference_output, parse_verdicts, Verdict};
pub use prompts::PromptSet;

/// Summary text emitted when validation leaves nothing to summarize; the
/// summarizer is not called on this path.
pub const NO_DIFFERENCES_SENTINEL: &str = "NO_DISTINCTIVE_DIFFERENCES";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Retrieve(#[from] RetrieveError),
    #[error("extraction output unparseable: {reason}")]
    ExtractionParse { raw_output: String, reason: String },
    #[error("validator output unparseable: {reason}")]
    ValidationParse { raw_output: String, reason: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("I/O at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Comparative direction of a difference feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    TargetHigher,
    TargetLower,
    Qualitative,
}

/// A model-discovered difference dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DifferenceDimension {
    pub name: String,
    pub definition: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DifferenceFeature {
    pub dimension: DifferenceDimension,
    pub description: String,
    pub direction: Direction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<String>,
}

/// Raw extraction result for one (target, representative) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceReport {
    pub target_user: String,
    pub representative_user: String,
    pub features: Vec<DifferenceFeature>,
    pub raw_output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_trace: Option<String>,
    pub extractor_model: String,
    pub temperature: f64,
}

/// Extraction result after reflective validation. kept + dropped features
/// always equal the source features as multisets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedReport {
    pub source: DifferenceReport,
    pub kept: Vec<DifferenceFeature>,
    pub dropped: Vec<(DifferenceFeature, String)>,
    pub validator_model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserDifferenceSummary {
    pub target_user: String,
    pub text: String,
    pub source_report_count: usize,
}

/// Pipeline mode: the full difference-aware flow or one of the baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Drp,
    Rag,
    NonP,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Drp => write!(f, "drp"),
            Mode::Rag => write!(f, "rag"),
            Mode::NonP => write!(f, "non_p"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedReview {
    pub target_user: String,
    pub item_id: String,
    pub text: String,
    pub mode: Mode,
    pub temperature: f64,
    pub prompt_digest: String,
}

/// Embedding backend selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbeddingSpec {
    Hash {
        dim: usize,
        seed: u64,
    },
    Remote {
        base_url: String,
        model: String,
        dim: usize,
    },
}

impl EmbeddingSpec {
    pub fn provider(&self) -> Box<dyn EmbeddingProvider> {
        match self {
            EmbeddingSpec::Hash { dim, seed } => Box::new(HashEmbeddingProvider::new(*dim, *seed)),
            EmbeddingSpec::Remote {
                base_url,
                model,
                dim,
            } => Box::new(RemoteEmbeddingProvider::new(base_url, model, *dim, 120)),
        }
    }
}

/// Provider specs for the five LLM roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleSpecs {
    pub extractor: ProviderSpec,
    pub validator: ProviderSpec,
    pub summarizer: ProviderSpec,
    pub generator: ProviderSpec,
    pub judge: ProviderSpec,
}

impl RoleSpecs {
    /// All mock roles rooted under one fixture directory, one subdir per role.
    pub fn all_mock(fixture_root: &Path) -> Self {
        RoleSpecs {
            extractor: ProviderSpec::mock("mock-extractor", fixture_root.join("extractor")),
            validator: ProviderSpec::mock("mock-validator", fixture_root.join("validator")),
            summarizer: ProviderSpec::mock("mock-summarizer", fixture_root.join("summarizer")),
            generator: ProviderSpec::mock("mock-generator", fixture_root.join("generator")),
            judge: ProviderSpec::mock("mock-judge", fixture_root.join("judge")),
        }
    }
}

/// Full configuration of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    /// M: representatives compared against each target user.
    #[serde(default = "default_m")]
    pub m_representatives: usize,
    #[serde(default = "default_cluster_k")]
    pub cluster_k: usize,
    #[serde(default = "default_restarts")]
    pub cluster_restarts: usize,
    #[serde(default = "default_retrieval_k")]
    pub retrieval_k: usize,
    #[serde(default = "default_retrieval_mode")]
    pub retrieval_mode: RetrievalMode,
    #[serde(default = "default_temperatures")]
    pub temperatures: Vec<f64>,
    pub seed: u64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_max_concurrency")]
    pub max_concurrency: usize,
    pub embedding: EmbeddingSpec,
    pub roles: RoleSpecs,
    #[serde(default)]
    pub uvq_aggregation: crate::uvq::UvqAggregation,
    #[serde(default)]
    pub prompts: PromptSet,
}

fn default_m() -> usize {
    4
}

fn default_cluster_k() -> usize {
    5
}

fn default_retrieval_k() -> usize {
    4
}

fn default_restarts() -> usize {
    10
}

fn default_retrieval_mode() -> RetrievalMode {
    RetrievalMode::Similarity
}

fn default_temperatures() -> Vec<f64> {
    vec![0.0, 0.8]
}

fn default_max_tokens() -> u32 {
    512
}

fn default_max_concurrency() -> usize {
    4
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.temperatures.is_empty() {
            return Err(PipelineError::Config(
                "temperatures must be nonempty".into(),
            ));
        }
        for &t in &self.temperatures {
            if !t.is_finite() || !(0.0..=2.0).contains(&t) {
                return Err(PipelineError::Config(format!(
                    "temperature {t} outside [0, 2]"
                )));
            }
        }
        let labels: std::collections::BTreeSet<String> = self
            .temperatures
            .iter()
            .map(|t| temperature_label(*t))
            .collect();
        if labels.len() != self.temperatures.len() {
            return Err(PipelineError::Config(
                "temperatures must be distinct".into(),
            ));
        }
        if self.m_representatives == 0 {
            return Err(PipelineError::Config(
                "m_representatives must be >= 1".into(),
            ));
        }
        if self.cluster_k == 0 || self.retrieval_k == 0 || self.max_tokens == 0 {
            return Err(PipelineError::Config(
                "cluster_k, retrieval_k and max_tokens must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Stable digest of the resolved config + dataset, used to name run
    /// directories.
    pub fn digest(&self, dataset_name: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(self).expect("config serializes"));
        hasher.update(dataset_name.as_bytes());
        hex::encode(hasher.finalize())
    }
}

/// Filename label for a temperature: `0`, `0.8`, ...
pub fn temperature_label(t: f64) -> String {
    format!("{t}")
}

/// The retrieval query for a target item.
pub fn item_query(item: &ReviewSample) -> String {
    format!("{} {}", item.item_title, item.item_description)
        .trim()
        .to_string()
}

/// Extract difference features between a target and one representative
/// (one extractor call).
pub fn extract_differences(
    gateway: &Gateway,
    target_ctx: &RetrievedHistory,
    rep_ctx: &RetrievedHistory,
    cfg: &RunConfig,
    temperature: f64,
) -> Result<DifferenceReport, PipelineError> {
    if target_ctx.entries.is_empty() || rep_ctx.entries.is_empty() {
        return Err(PipelineError::Config(
            "extraction contexts must be nonempty".into(),
        ));
    }
    let request = prompts::build_extract_request(
        &cfg.prompts,
        &cfg.roles.extractor,
        target_ctx,
        rep_ctx,
        temperature,
        cfg.max_tokens,
    );
    let response = gateway.cached_complete(&request, &cfg.roles.extractor)?;
    let features = parse_difference_output(&response.content)?;
    Ok(DifferenceReport {
        target_user: target_ctx.user_id.clone(),
        representative_user: rep_ctx.user_id.clone(),
        features,
        raw_output: response.content,
        reasoning_trace: response.reasoning_trace,
        extractor_model: cfg.roles.extractor.model_id.clone(),
        temperature,
    })
}

/// Reflectively validate one report (one validator call; zero calls for
/// an empty feature list). Verdict indices the validator does not answer
/// default to KEEP.
pub fn validate_differences(
    gateway: &Gateway,
    report: &DifferenceReport,
    cfg: &RunConfig,
    temperature: f64,
) -> Result<ValidatedReport, PipelineError> {
    if report.features.is_empty() {
        return Ok(ValidatedReport {
            source: report.clone(),
            kept: Vec::new(),
            dropped: Vec::new(),
            validator_model: cfg.roles.validator.model_id.clone(),
        });
    }
    let request = prompts::build_validate_request(
        &cfg.prompts,
        &cfg.roles.validator,
        report,
        temperature,
        cfg.max_tokens,
    );
    let response = gateway.cached_complete(&request, &cfg.roles.validator)?;
    let verdicts = parse_verdicts(&response.content, report.features.len())?;
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (index, feature) in report.features.iter().enumerate() {
        match verdicts.iter().find(|v| v.0 == index) {
            Some((_, false, reason)) => dropped.push((feature.clone(), reason.clone())),
            _ => kept.push(feature.clone()),
        }
    }
    Ok(ValidatedReport {
        source: report.clone(),
        kept,
        dropped,
        validator_model: cfg.roles.validator.model_id.clone(),
    })
}

/// Summarize all validated reports for one target (one summarizer call,
/// or none when nothing survived validation).
pub fn summarize_differences(
    gateway: &Gateway,
    target_ctx: &RetrievedHistory,
    validated: &[ValidatedReport],
    cfg: &RunConfig,
    temperature: f64,
) -> Result<UserDifferenceSummary, PipelineError> {
    if validated.len() != cfg.m_representatives {
        return Err(PipelineError::Config(format!(
            "expected {} validated reports, got {}",
            cfg.m_representatives,
            validated.len()
        )));
    }
    if validated.iter().all(|v| v.kept.is_empty()) {
        return Ok(UserDifferenceSummary {
            target_user: target_ctx.user_id.clone(),
            text: NO_DIFFERENCES_SENTINEL.to_string(),
            source_report_count: validated.len(),
        });
    }
    let request = prompts::build_summarize_request(
        &cfg.prompts,
        &cfg.roles.summarizer,
        target_ctx,
        validated,
        temperature,
        cfg.max_tokens,
    );
    let response = gateway.cached_complete(&request, &cfg.roles.summarizer)?;
    Ok(UserDifferenceSummary {
        target_user: target_ctx.user_id.clone(),
        text: response.content,
        source_report_count: validated.len(),
    })
}

/// Generate the review for one test item (one generator call). The prompt
/// contents depend on the mode: item only (non_p), plus history (rag),
/// plus the difference summary (drp).
pub fn generate_review(
    gateway: &Gateway,
    target_user: &str,
    item: &ReviewSample,
    target_ctx: &RetrievedHistory,
    summary: Option<&UserDifferenceSummary>,
    cfg: &RunConfig,
    temperature: f64,
) -> Result<GeneratedReview, PipelineError> {
    if target_ctx.entries.is_empty() {
        return Err(PipelineError::Config(
            "generation context must be nonempty".into(),
        ));
    }
    if cfg.mode == Mode::Drp && summary.is_none() {
        return Err(PipelineError::Config(
            "drp mode requires a difference summary".into(),
        ));
    }
    let request = prompts::build_generate_request(
        &cfg.prompts,
        &cfg.roles.generator,
        cfg.mode,
        item,
        target_ctx,
        summary,
        temperature,
        cfg.max_tokens,
    );
    let digest = crate::gateway::canonical_request_hash(&request);
    let response = gateway.cached_complete(&request, &cfg.roles.generator)?;
    Ok(GeneratedReview {
        target_user: target_user.to_string(),
        item_id: item.item_id.clone(),
        text: response.content,
        mode: cfg.mode,
        temperature,
        prompt_digest: digest,
    })
}

/// Per-stage LLM invocation counts (cached and uncached alike).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub extractor: u64,
    pub validator: u64,
    pub summarizer: u64,
    pub generator: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleError {
    pub user_id: String,
    pub item_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureRun {
    pub temperature: f64,
    pub counts: StageCounts,
    pub samples_ok: usize,
    pub errors: Vec<SampleError>,
}

/// Run manifest. `created_at` and the `gateway` call stats are excluded
/// from [`RunManifest::digest`] so the digest is identical between a cold
/// run and a warm-cache rerun.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub created_at: u64,
    pub dataset_name: String,
    pub config: RunConfig,
    pub temperature_runs: Vec<TemperatureRun>,
    pub output_digests: BTreeMap<String, String>,
    pub gateway: GatewayStats,
}

#[derive(Serialize)]
struct ManifestCore<'a> {
    dataset_name: &'a str,
    config: &'a RunConfig,
    temperature_runs: &'a [TemperatureRun],
    output_digests: &'a BTreeMap<String, String>,
}

impl RunManifest {
    pub fn digest(&self) -> String {
        let core = ManifestCore {
            dataset_name: &self.dataset_name,
            config: &self.config,
            temperature_runs: &self.temperature_runs,
            output_digests: &self.output_digests,
        };
        hex::encode(Sha256::digest(
            serde_json::to_vec(&core).expect("manifest serializes"),
        ))
    }

    pub fn load(run_dir: &Path) -> Result<RunManifest, PipelineError> {
        let path = run_dir.join("manifest.json");
        let bytes = std::fs::read(&path).map_err(|e| io_err(&path, e))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| PipelineError::Config(format!("manifest.json: {e}")))
    }
}

/// A difference report attributed to the test item it was extracted for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub item_id: String,
    pub report: ValidatedReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub item_id: String,
    pub summary: UserDifferenceSummary,
}

#[derive(Debug)]
pub struct RunArtifact {
    pub run_dir: PathBuf,
    pub manifest: RunManifest,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        out.extend_from_slice(
            serde_json::to_string(item)
                .expect("serializable")
                .as_bytes(),
        );
        out.push(b'\n');
    }
    out
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
        })
        .collect()
}

fn invocations(gateway: &Gateway) -> u64 {
    let stats = gateway.stats();
    stats.provider_calls + stats.cache_hits
}

/// Step 0 artifacts: profile points, the fitted model, and one
/// representative set per test user.
pub struct Step0 {
    pub points: Vec<UserProfileEmbedding>,
    pub model: ClusterModel,
    pub representatives: BTreeMap<String, RepresentativeSet>,
}

/// Cluster train users and select representatives for every test user.
pub fn run_step0(
    corpus: &Corpus,
    cfg: &RunConfig,
    provider: &dyn EmbeddingProvider,
) -> Result<Step0, PipelineError> {
    let mut points = Vec::new();
    for user in corpus.all_users() {
        let history = corpus.user_history(&user)?;
        points.push(profile_embedding(&history, provider)?);
    }
    let params = KmeansParams {
        k: cfg.cluster_k,
        seed: cfg.seed,
        restarts: cfg.cluster_restarts,
        ..Default::default()
    };
    let model = kmeans_fit_restarts(&points, &params)?;
    let mut representatives = BTreeMap::new();
    let test_users: std::collections::BTreeSet<&str> =
        corpus.test.iter().map(|s| s.user_id.as_str()).collect();
    for user in test_users {
        let reps = select_representatives(&model, &points, user, cfg.m_representatives, cfg.seed)?;
        representatives.insert(user.to_string(), reps);
    }
    Ok(Step0 {
        points,
        model,
        representatives,
    })
}

struct SampleOutput {
    generation: GeneratedReview,
    reports: Vec<ReportRecord>,
    summary: Option<SummaryRecord>,
}

#[allow(clippy::too_many_arguments)]
fn run_sample(
    gateway: &Gateway,
    corpus: &Corpus,
    cfg: &RunConfig,
    step0: Option<&Step0>,
    provider: &dyn EmbeddingProvider,
    sample: &ReviewSample,
    temperature: f64,
    counts: &mut StageCounts,
) -> Result<SampleOutput, PipelineError> {
    let history = corpus.user_history(&sample.user_id)?;
    let query = item_query(sample);
    let target_ctx = retrieve_key_history(
        &history,
        &query,
        cfg.retrieval_k,
        cfg.retrieval_mode,
        provider,
    )?;

    let mut reports = Vec::new();
    let mut summary = None;
    if cfg.mode == Mode::Drp {
        let step0 = step0.expect("step0 runs in drp mode");
        let reps = step0.representatives.get(&sample.user_id).ok_or_else(|| {
            PipelineError::Config(format!("no representatives for {}", sample.user_id))
        })?;
        let mut validated = Vec::new();
        for rep_user in &reps.members {
            let rep_history = corpus.user_history(rep_user)?;
            let rep_ctx = retrieve_key_history(
                &rep_history,
                &query,
                cfg.retrieval_k,
                cfg.retrieval_mode,
                provider,
            )?;
            let before = invocations(gateway);
            let report = extract_differences(gateway, &target_ctx, &rep_ctx, cfg, temperature)?;
            counts.extractor += invocations(gateway) - before;

            let before = invocations(gateway);
            let checked = validate_differences(gateway, &report, cfg, temperature)?;
            counts.validator += invocations(gateway) - before;
            validated.push(checked);
        }
        let before = invocations(gateway);
        let summarized = summarize_differences(gateway, &target_ctx, &validated, cfg, temperature)?;
        counts.summarizer += invocations(gateway) - before;

        reports = validated
            .into_iter()
            .map(|report| ReportRecord {
                item_id: sample.item_id.clone(),
                report,
            })
            .collect();
        summary = Some(summarized);
    }

    let before = invocations(gateway);
    let generation = generate_review(
        gateway,
        &sample.user_id,
        sample,
        &target_ctx,
        summary.as_ref(),
        cfg,
        temperature,
    )?;
    counts.generator += invocations(gateway) - before;

    Ok(SampleOutput {
        generation,
        reports,
        summary: summary.map(|summary| SummaryRecord {
            item_id: sample.item_id.clone(),
            summary,
        }),
    })
}

/// Execute a full run and write the artifact bundle.
///
/// The bundle directory is named by the config digest, so rerunning the
/// same config overwrites the same files; with a warm cache the rewrite
/// is byte-identical.
pub fn run_pipeline(
    corpus: &Corpus,
    cfg: &RunConfig,
    output_root: &Path,
    cache_dir: Option<&Path>,
) -> Result<RunArtifact, PipelineError> {
    cfg.validate()?;
    let gateway = Gateway::new(cache_dir.map(Path::to_path_buf), cfg.max_concurrency)?;
    let provider = cfg.embedding.provider();

    let step0 = if cfg.mode == Mode::Drp {
        Some(run_step0(corpus, cfg, provider.as_ref())?)
    } else {
        None
    };

    let mut test: Vec<&ReviewSample> = corpus.test.iter().collect();
    test.sort_by(|a, b| (&a.user_id, &a.item_id).cmp(&(&b.user_id, &b.item_id)));

    let run_dir = output_root.join(format!("run-{}", &cfg.digest(&corpus.dataset_name)[..12]));
    std::fs::create_dir_all(&run_dir).map_err(|e| io_err(&run_dir, e))?;

    let mut temperature_runs = Vec::new();
    let mut output_digests = BTreeMap::new();
    for &temperature in &cfg.temperatures {
        let mut counts = StageCounts::default();
        let mut errors = Vec::new();
        let mut generations = Vec::new();
        let mut reports = Vec::new();
        let mut summaries = Vec::new();
        for sample in &test {
            match run_sample(
                &gateway,
                corpus,
                cfg,
                step0.as_ref(),
                provider.as_ref(),
                sample,
                temperature,
                &mut counts,
            ) {
                Ok(output) => {
                    generations.push(output.generation);
                    reports.extend(output.reports);
                    summaries.extend(output.summary);
                }
                Err(e) => errors.push(SampleError {
                    user_id: sample.user_id.clone(),
                    item_id: sample.item_id.clone(),
                    message: e.to_string(),
                }),
            }
        }

        let label = temperature_label(temperature);
        for (name, bytes) in [
            (format!("generations.{label}.jsonl"), jsonl(&generations)),
            (format!("reports.{label}.jsonl"), jsonl(&reports)),
            (format!("summaries.{label}.jsonl"), jsonl(&summaries)),
        ] {
            let path = run_dir.join(&name);
            write_atomic(&path, &bytes)?;
            output_digests.insert(name, hex::encode(Sha256::digest(&bytes)));
        }

        temperature_runs.push(TemperatureRun {
            temperature,
            counts,
            samples_ok: generations.len(),
            errors,
        });
    }

    if let Some(step0) = &step0 {
        let model_json = step0.model.to_json();
        let path = run_dir.join("cluster.json");
        write_atomic(&path, model_json.as_bytes())?;
        output_digests.insert(
            "cluster.json".into(),
            hex::encode(Sha256::digest(model_json.as_bytes())),
        );

        let reps_json =
            serde_json::to_vec_pretty(&step0.representatives).expect("representatives serialize");
        let path = run_dir.join("representatives.json");
        write_atomic(&path, &reps_json)?;
        output_digests.insert(
            "representatives.json".into(),
            hex::encode(Sha256::digest(&reps_json)),
        );
    }

    let manifest = RunManifest {
        created_at: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        dataset_name: corpus.dataset_name.clone(),
        config: cfg.clone(),
        temperature_runs,
        output_digests,
        gateway: gateway.stats(),
    };
    write_atomic(
        &run_dir.join("manifest.json"),
        &serde_json::to_vec_pretty(&manifest).expect("manifest serializes"),
    )?;

    Ok(RunArtifact { run_dir, manifest })
}
