//! The pipeline stages behind the CLI subcommands.
//!
//! Every stage reads its inputs from disk (original files or artifacts of
//! earlier stages), computes, and writes its artifacts into the configured
//! output directory. `run_pipeline` simply calls the same stage functions in
//! order, so subcommands composed by hand produce byte-identical artifacts.
//!
//! Determinism rules: artifacts never contain timestamps or absolute paths;
//! every report embeds the master seed and a hash of the parameters that
//! shaped it; files are written atomically (temp file + rename) and a failed
//! stage removes whatever it had already written.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use epinet::accumulation::{accumulate_corpus, pair_of, CooccurrenceMode, UnitNetwork};
use epinet::autocoder::{
    apply_classifier, cohen_kappa, shaffer_rho, ConfusionMatrix, McSettings, PatternClassifier,
};
use epinet::corpus::{segment_stanzas, Codebook, Corpus, CsvSchema, SegmentOptions};
use epinet::features::audio::{mfcc, AudioBuffer, MfccConfig};
use epinet::features::pose::{rotate_pose, standardize_pose, PoseSequence};
use epinet::networks::{
    group_network, sorted_edges, subtract_networks, Edge, GroupMode, GroupNetwork,
    SubtractedNetwork,
};
use epinet::projection::{
    fit_model, layout_objective, optimize_node_positions, EnaScore, LabeledVector, NodeLayout,
};
use epinet::render::{render_comparison_svg, render_network_svg, PlotStyle};
use epinet::stats::{compare_groups, StatReport};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;

pub const CORPUS_JSON: &str = "corpus.json";
pub const CODED_CORPUS_JSON: &str = "coded_corpus.json";
pub const IRR_JSON: &str = "irr_report.json";
pub const UNIT_NETWORKS_JSON: &str = "unit_networks.json";
pub const MODEL_JSON: &str = "model.json";
pub const GROUPS_JSON: &str = "groups.json";
pub const SUBTRACTED_JSON: &str = "subtracted.json";
pub const STATS_JSON: &str = "stats.json";
pub const COMPARISON_SVG: &str = "comparison.svg";
pub const MFCC_INDEX_JSON: &str = "features/mfcc_index.json";
pub const POSE_INDEX_JSON: &str = "features/pose_index.json";

/// Recorded in every JSON artifact: the master seed and a digest of the
/// parameters that shaped this artifact (never file paths, so runs against
/// copies of the same inputs hash identically).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub params_sha256: String,
}

fn provenance<P: Serialize>(seed: u64, params: &P) -> Result<Provenance> {
    let canonical = serde_json::to_vec(params).context("hashing stage parameters")?;
    let digest = Sha256::digest(&canonical);
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(Provenance {
        seed,
        params_sha256: hex,
    })
}

/// Tracks files written during one invocation so a failure can remove them.
/// Each file lands via temp-file + rename, never half-written.
pub struct ArtifactSet {
    out_dir: PathBuf,
    written: Vec<PathBuf>,
}

impl ArtifactSet {
    pub fn new(out_dir: &Path) -> Result<Self> {
        fs::create_dir_all(out_dir)
            .with_context(|| format!("creating output directory {}", out_dir.display()))?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out_dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
        let mut tmp = path.clone().into_os_string();
        tmp.push(".partial");
        let tmp = PathBuf::from(tmp);
        fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, &path)
            .with_context(|| format!("moving {} into place", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text =
            serde_json::to_string_pretty(value).with_context(|| format!("serializing {name}"))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Removes everything this set has written (used when a stage fails).
    pub fn discard(&mut self) {
        for path in self.written.drain(..) {
            let _ = fs::remove_file(&path);
        }
    }

    pub fn into_written(self) -> Vec<PathBuf> {
        self.written
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, hint: &str) -> Result<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {} ({hint})", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_codebook(config: &PipelineConfig) -> Result<Codebook> {
    Codebook::from_json_path(&config.codebook)
        .with_context(|| format!("reading codebook {}", config.codebook.display()))
}

fn load_classifier(config: &PipelineConfig) -> Result<PatternClassifier> {
    let Some(path) = &config.classifier else {
        bail!("this stage needs a classifier, but the config does not set one");
    };
    PatternClassifier::from_json_path(path)
        .with_context(|| format!("reading classifier {}", path.display()))
}

fn load_style(config: &PipelineConfig) -> Result<PlotStyle> {
    let style = match &config.style {
        Some(path) => read_json::<PlotStyle>(path, "plot style")?,
        None => PlotStyle::default(),
    };
    style.validate()?;
    Ok(style)
}

/// Codes the classifier is asked to recode: the configured list, or every
/// code the classifier carries patterns for when the list is empty.
fn resolved_targets(config: &PipelineConfig, classifier: &PatternClassifier) -> Vec<String> {
    if config.target_codes.is_empty() {
        classifier.code_ids().map(str::to_string).collect()
    } else {
        config.target_codes.clone()
    }
}

#[derive(Serialize, Deserialize)]
pub struct CorpusArtifact {
    pub provenance: Provenance,
    pub corpus: Corpus,
}

fn read_corpus_artifact(out_dir: &Path, name: &str, produced_by: &str) -> Result<Corpus> {
    let artifact: CorpusArtifact = read_json(
        &out_dir.join(name),
        &format!("produced by the `{produced_by}` stage"),
    )?;
    Ok(artifact.corpus)
}

/// Stage 1: read the transcript CSV, segment it into stanzas, and store the
/// validated corpus (still carrying its original hand codes).
pub fn stage_ingest(config: &PipelineConfig, artifacts: &mut ArtifactSet) -> Result<()> {
    #[derive(Serialize)]
    struct Params<'a> {
        schema: &'a CsvSchema,
        segmentation: &'a SegmentOptions,
    }

    let codebook = load_codebook(config)?;
    let raw = Corpus::from_csv_path(&config.corpus_csv, &config.schema, &codebook)
        .with_context(|| format!("reading corpus {}", config.corpus_csv.display()))?;
    let corpus = segment_stanzas(&raw, &config.segmentation).context("segmenting stanzas")?;

    artifacts.write_json(
        CORPUS_JSON,
        &CorpusArtifact {
            provenance: provenance(
                config.seed,
                &Params {
                    schema: &config.schema,
                    segmentation: &config.segmentation,
                },
            )?,
            corpus,
        },
    )
}

/// Stage 2: recode the target codes with the pattern classifier. Without a
/// classifier the hand codes pass through unchanged, so downstream stages
/// always read `coded_corpus.json`.
pub fn stage_code(config: &PipelineConfig, artifacts: &mut ArtifactSet) -> Result<()> {
    #[derive(Serialize)]
    struct Params<'a> {
        target_codes: &'a [String],
        classifier_used: bool,
    }

    let corpus = read_corpus_artifact(artifacts.out_dir(), CORPUS_JSON, "ingest")?;
    let (coded, targets) = match &config.classifier {
        Some(_) => {
            let classifier = load_classifier(config)?;
            let targets = resolved_targets(config, &classifier);
            let coded = apply_classifier(&classifier, &corpus, &targets)
                .context("applying the classifier")?;
            (coded, targets)
        }
        None => (corpus, Vec::new()),
    };

    artifacts.write_json(
        CODED_CORPUS_JSON,
        &CorpusArtifact {
            provenance: provenance(
                config.seed,
                &Params {
                    target_codes: &targets,
                    classifier_used: config.classifier.is_some(),
                },
            )?,
            corpus: coded,
        },
    )
}

/// Agreement numbers for one code (or for all codes pooled).
#[derive(Debug, Serialize, Deserialize)]
pub struct AgreementReport {
    pub code: String,
    /// Confusion counts over the handset: `[hand rating][classifier rating]`.
    pub confusion: [[u64; 2]; 2],
    pub kappa: f64,
    pub percent_agreement: f64,
    /// Set when both ratings are constant over the handset and kappa's
    /// defining ratio is 0/0.
    pub degenerate: bool,
    /// Base rate fed into the Monte-Carlo simulation.
    pub baserate: f64,
    /// Estimated risk that corpus-level kappa falls below the threshold
    /// despite the observed handset kappa.
    pub rho: f64,
}

#[derive(Serialize, Deserialize)]
pub struct IrrArtifact {
    pub provenance: Provenance,
    pub handset_size: usize,
    /// 1-based record rows (in corpus order) that form the handset.
    pub handset_rows: Vec<usize>,
    pub threshold_kappa: f64,
    pub mc_replicates: u32,
    pub overall: AgreementReport,
    pub codes: Vec<AgreementReport>,
}

fn agreement_report(
    code: String,
    hand: &[u8],
    machine: &[u8],
    baserate: f64,
    config: &PipelineConfig,
) -> Result<AgreementReport> {
    let matrix = ConfusionMatrix::from_ratings(hand, machine)?;
    let kappa = cohen_kappa(&matrix);
    let rho = shaffer_rho(
        kappa.kappa,
        hand.len(),
        baserate,
        config.irr.threshold_kappa,
        &McSettings {
            replicates: config.mc_replicates,
            seed: config.seed,
        },
    )?;
    Ok(AgreementReport {
        code,
        confusion: *matrix.counts(),
        kappa: kappa.kappa,
        percent_agreement: kappa.percent_agreement,
        degenerate: kappa.degenerate,
        baserate,
        rho,
    })
}

/// Observed positive rate of a code in the hand-coded corpus, falling back
/// to the configured rate when the observed one would be degenerate.
fn usable_baserate(positives: usize, total: usize, fallback: f64) -> f64 {
    let rate = positives as f64 / total as f64;
    if rate > 0.0 && rate < 1.0 {
        rate
    } else {
        fallback
    }
}

/// Stage 3: draw a seeded handset and compare the hand codes against the
/// classifier's codes, per target code and pooled.
pub fn stage_irr(config: &PipelineConfig, artifacts: &mut ArtifactSet) -> Result<()> {
    #[derive(Serialize)]
    struct Params<'a> {
        target_codes: &'a [String],
        handset_size: usize,
        threshold_kappa: f64,
        fallback_baserate: f64,
        mc_replicates: u32,
        seed: u64,
    }

    let hand = read_corpus_artifact(artifacts.out_dir(), CORPUS_JSON, "ingest")?;
    let machine = read_corpus_artifact(artifacts.out_dir(), CODED_CORPUS_JSON, "code")?;
    if hand.len() != machine.len() {
        bail!(
            "corpus.json has {} records but coded_corpus.json has {}; re-run `ingest` and `code`",
            hand.len(),
            machine.len()
        );
    }
    let classifier = load_classifier(config)?;
    let targets = resolved_targets(config, &classifier);
    if targets.is_empty() {
        bail!("the classifier defines no codes to validate");
    }

    let handset_size = config.irr.handset_size;
    if handset_size > hand.len() {
        bail!(
            "irr.handset_size ({handset_size}) exceeds the corpus size ({})",
            hand.len()
        );
    }

    // Partial Fisher-Yates over the record indexes, seeded by the master
    // seed; the same config always checks the same lines.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut indexes: Vec<usize> = (0..hand.len()).collect();
    for i in 0..handset_size {
        let j = rng.random_range(i..indexes.len());
        indexes.swap(i, j);
    }
    let mut handset = indexes[..handset_size].to_vec();
    handset.sort_unstable();

    let codebook = hand.codebook().clone();
    let mut codes = Vec::new();
    let mut pooled_hand = Vec::new();
    let mut pooled_machine = Vec::new();
    let mut pooled_positives = 0usize;
    for code_id in &targets {
        let index = codebook
            .index_of(code_id)
            .ok_or_else(|| epinet::Error::UnknownCode(code_id.clone()))?;
        let hand_ratings: Vec<u8> = handset
            .iter()
            .map(|&row| hand.records()[row].code_values[index])
            .collect();
        let machine_ratings: Vec<u8> = handset
            .iter()
            .map(|&row| machine.records()[row].code_values[index])
            .collect();
        let positives = hand
            .records()
            .iter()
            .filter(|r| r.code_values[index] == 1)
            .count();
        pooled_positives += positives;
        let baserate = usable_baserate(positives, hand.len(), config.irr.fallback_baserate);
        codes.push(agreement_report(
            code_id.clone(),
            &hand_ratings,
            &machine_ratings,
            baserate,
            config,
        )?);
        pooled_hand.extend_from_slice(&hand_ratings);
        pooled_machine.extend_from_slice(&machine_ratings);
    }
    let pooled_baserate = usable_baserate(
        pooled_positives,
        hand.len() * targets.len(),
        config.irr.fallback_baserate,
    );
    let overall = agreement_report(
        "(all target codes)".to_string(),
        &pooled_hand,
        &pooled_machine,
        pooled_baserate,
        config,
    )?;

    artifacts.write_json(
        IRR_JSON,
        &IrrArtifact {
            provenance: provenance(
                config.seed,
                &Params {
                    target_codes: &targets,
                    handset_size,
                    threshold_kappa: config.irr.threshold_kappa,
                    fallback_baserate: config.irr.fallback_baserate,
                    mc_replicates: config.mc_replicates,
                    seed: config.seed,
                },
            )?,
            handset_size,
            handset_rows: handset.iter().map(|i| i + 1).collect(),
            threshold_kappa: config.irr.threshold_kappa,
            mc_replicates: config.mc_replicates,
            overall,
            codes,
        },
    )
}

/// One nonzero edge of a unit's cumulative network.
#[derive(Debug, Serialize, Deserialize)]
pub struct EdgeCount {
    pub i: String,
    pub j: String,
    pub count: u32,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct UnitNetworkSummary {
    pub unit: String,
    pub condition: String,
    pub stanza_count: u32,
    /// Stanzas each code appears in, keyed by code id.
    pub code_counts: BTreeMap<String, u32>,
    /// Full cumulative pair counts in row-major upper-triangle order.
    pub counts: Vec<u32>,
    /// The nonzero entries of `counts`, labeled with code ids.
    pub edges: Vec<EdgeCount>,
    /// Spherically normalized network vector.
    pub normalized: Vec<f64>,
    /// True when the unit has no co-occurrences at all.
    pub zero_network: bool,
}

#[derive(Serialize, Deserialize)]
pub struct UnitNetworksArtifact {
    pub provenance: Provenance,
    pub units: Vec<UnitNetworkSummary>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NodePosition {
    pub code: String,
    pub position: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
pub struct ModelArtifact {
    pub provenance: Provenance,
    pub requested_dims: usize,
    pub retained_dims: usize,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// Fraction of total variance captured by each singular direction.
    pub variance_explained: Vec<f64>,
    pub grand_mean: Vec<f64>,
    /// Projection basis, one column per retained dimension.
    pub basis: Vec<Vec<f64>>,
    pub scores: Vec<EnaScore>,
    /// Co-registered node positions, in codebook order.
    pub nodes: Vec<NodePosition>,
    /// Residual of the node placement: sum over units of squared distance
    /// between the unit's score and its network centroid.
    pub layout_objective: f64,
}

fn unit_summaries(units: &[UnitNetwork], codebook: &Codebook) -> Vec<UnitNetworkSummary> {
    units
        .iter()
        .map(|unit| {
            let k = unit.cumulative.size();
            let code_counts = codebook
                .codes()
                .iter()
                .zip(unit.cumulative.code_counts())
                .map(|(code, &count)| (code.id.clone(), count))
                .collect();
            let edges = unit
                .cumulative
                .counts()
                .iter()
                .enumerate()
                .filter(|(_, &count)| count > 0)
                .map(|(pair, &count)| {
                    let (i, j) = pair_of(pair, k);
                    EdgeCount {
                        i: codebook.codes()[i].id.clone(),
                        j: codebook.codes()[j].id.clone(),
                        count,
                    }
                })
                .collect();
            UnitNetworkSummary {
                unit: unit.unit_id().to_string(),
                condition: unit.condition().to_string(),
                stanza_count: unit.cumulative.stanza_count,
                code_counts,
                counts: unit.cumulative.counts().to_vec(),
                edges,
                normalized: unit.normalized.values().to_vec(),
                zero_network: unit.normalized.zero_flag,
            }
        })
        .collect()
}

/// Stage 4: accumulate per-unit networks, fit the projection, and place the
/// nodes. Writes `unit_networks.json` and `model.json`.
pub fn stage_model(config: &PipelineConfig, artifacts: &mut ArtifactSet) -> Result<()> {
    #[derive(Serialize)]
    struct Params {
        cooccurrence_mode: CooccurrenceMode,
        dims: usize,
    }

    let corpus = read_corpus_artifact(artifacts.out_dir(), CODED_CORPUS_JSON, "code")?;
    let units = accumulate_corpus(&corpus, config.cooccurrence_mode)?;
    let codebook = corpus.codebook();

    let stage_provenance = provenance(
        config.seed,
        &Params {
            cooccurrence_mode: config.cooccurrence_mode,
            dims: config.dims,
        },
    )?;

    artifacts.write_json(
        UNIT_NETWORKS_JSON,
        &UnitNetworksArtifact {
            provenance: stage_provenance.clone(),
            units: unit_summaries(&units, codebook),
        },
    )?;

    let labeled: Vec<LabeledVector> = units.iter().map(LabeledVector::from).collect();
    let (model, scores) = fit_model(&labeled, config.dims).context("fitting the model")?;
    let normalized: Vec<_> = units.iter().map(|u| u.normalized.clone()).collect();
    let layout =
        optimize_node_positions(&scores, &normalized).context("placing network nodes")?;
    let objective = layout_objective(&scores, &normalized, &layout);

    artifacts.write_json(
        MODEL_JSON,
        &ModelArtifact {
            provenance: stage_provenance,
            requested_dims: model.requested_dims,
            retained_dims: model.retained_dims(),
            rank: model.rank,
            singular_values: model.singular_values.clone(),
            variance_explained: model.variance_explained.clone(),
            grand_mean: model.grand_mean.clone(),
            basis: model.basis.clone(),
            scores,
            nodes: codebook
                .codes()
                .iter()
                .zip(&layout.positions)
                .map(|(code, position)| NodePosition {
                    code: code.id.clone(),
                    position: position.clone(),
                })
                .collect(),
            layout_objective: objective,
        },
    )
}

#[derive(Serialize, Deserialize)]
pub struct GroupsArtifact {
    pub provenance: Provenance,
    pub mode: GroupMode,
    pub networks: Vec<GroupNetwork>,
    /// Per condition, edges sorted by |weight| descending.
    pub edges: BTreeMap<String, Vec<Edge>>,
}

#[derive(Serialize, Deserialize)]
pub struct SubtractedArtifact {
    pub provenance: Provenance,
    pub network: SubtractedNetwork,
    pub edges: Vec<Edge>,
}

#[derive(Serialize, Deserialize)]
pub struct StatsArtifact {
    pub provenance: Provenance,
    pub reports: Vec<StatReport>,
}

/// The two condition labels of a comparison corpus, sorted.
fn comparison_conditions(corpus: &Corpus) -> Result<(String, String)> {
    let conditions = corpus.conditions();
    if conditions.len() != 2 {
        bail!(
            "comparison needs exactly two conditions, found {}: {}",
            conditions.len(),
            conditions.join(", ")
        );
    }
    Ok((conditions[0].clone(), conditions[1].clone()))
}

/// Stage 5: collapse units into two group networks, subtract them, and test
/// the score distributions per dimension. Writes `groups.json`,
/// `subtracted.json`, and `stats.json`.
pub fn stage_compare(config: &PipelineConfig, artifacts: &mut ArtifactSet) -> Result<()> {
    #[derive(Serialize)]
    struct Params {
        cooccurrence_mode: CooccurrenceMode,
        group_mode: GroupMode,
        dims: usize,
    }

    let corpus = read_corpus_artifact(artifacts.out_dir(), CODED_CORPUS_JSON, "code")?;
    let (condition_a, condition_b) = comparison_conditions(&corpus)?;
    let units = accumulate_corpus(&corpus, config.cooccurrence_mode)?;
    let codebook = corpus.codebook();

    let units_of = |condition: &str| -> Vec<UnitNetwork> {
        units
            .iter()
            .filter(|u| u.condition() == condition)
            .cloned()
            .collect()
    };
    let group_a = group_network(&units_of(&condition_a), &condition_a, config.group_mode)?;
    let group_b = group_network(&units_of(&condition_b), &condition_b, config.group_mode)?;
    let subtracted = subtract_networks(&group_a, &group_b)?;

    let stage_provenance = provenance(
        config.seed,
        &Params {
            cooccurrence_mode: config.cooccurrence_mode,
            group_mode: config.group_mode,
            dims: config.dims,
        },
    )?;

    let mut edges = BTreeMap::new();
    for group in [&group_a, &group_b] {
        edges.insert(
            group.condition.clone(),
            sorted_edges(group.weights(), codebook),
        );
    }
    artifacts.write_json(
        GROUPS_JSON,
        &GroupsArtifact {
            provenance: stage_provenance.clone(),
            mode: config.group_mode,
            networks: vec![group_a, group_b],
            edges,
        },
    )?;
    artifacts.write_json(
        SUBTRACTED_JSON,
        &SubtractedArtifact {
            provenance: stage_provenance.clone(),
            edges: sorted_edges(subtracted.weights(), codebook),
            network: subtracted,
        },
    )?;

    let model: ModelArtifact = read_json(
        &artifacts.out_dir().join(MODEL_JSON),
        "produced by the `model` stage",
    )?;
    let mut reports = Vec::new();
    for dim in 0..model.retained_dims {
        let coordinates = |condition: &str| -> Vec<f64> {
            model
                .scores
                .iter()
                .filter(|s| s.condition == condition)
                .map(|s| s.coordinates[dim])
                .collect()
        };
        reports.push(
            compare_groups(
                &format!("SVD{}", dim + 1),
                &condition_a,
                &coordinates(&condition_a),
                &condition_b,
                &coordinates(&condition_b),
            )
            .with_context(|| format!("comparing scores on dimension {}", dim + 1))?,
        );
    }
    artifacts.write_json(
        STATS_JSON,
        &StatsArtifact {
            provenance: stage_provenance,
            reports,
        },
    )
}

/// Filesystem-safe version of a condition label.
fn safe_name(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn network_svg_name(condition: &str) -> String {
    format!("network_{}.svg", safe_name(condition))
}

/// Stage 6: render each group network and the comparison plot.
pub fn stage_plot(config: &PipelineConfig, artifacts: &mut ArtifactSet) -> Result<()> {
    let style = load_style(config)?;
    let codebook = load_codebook(config)?;
    let model: ModelArtifact = read_json(
        &artifacts.out_dir().join(MODEL_JSON),
        "produced by the `model` stage",
    )?;
    let groups: GroupsArtifact = read_json(
        &artifacts.out_dir().join(GROUPS_JSON),
        "produced by the `compare` stage",
    )?;
    let subtracted: SubtractedArtifact = read_json(
        &artifacts.out_dir().join(SUBTRACTED_JSON),
        "produced by the `compare` stage",
    )?;
    let stats: StatsArtifact = read_json(
        &artifacts.out_dir().join(STATS_JSON),
        "produced by the `compare` stage",
    )?;

    let layout = NodeLayout {
        dims: model.retained_dims.max(1),
        positions: model.nodes.iter().map(|n| n.position.clone()).collect(),
    };

    for network in &groups.networks {
        let svg = render_network_svg(
            network,
            &layout,
            &codebook,
            &model.variance_explained,
            &style,
        )?;
        artifacts.write_bytes(&network_svg_name(&network.condition), svg.as_bytes())?;
    }

    let svg = render_comparison_svg(
        &subtracted.network,
        &model.scores,
        &stats.reports,
        &layout,
        &codebook,
        &model.variance_explained,
        &style,
    )?;
    artifacts.write_bytes(COMPARISON_SVG, svg.as_bytes())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FeatureFile {
    /// Input file name (not its directory, which may differ between runs).
    pub input: String,
    /// Artifact paths relative to the output directory.
    pub outputs: Vec<String>,
    pub rows: usize,
    pub columns: usize,
}

#[derive(Serialize, Deserialize)]
pub struct FeatureIndexArtifact {
    pub provenance: Provenance,
    pub files: Vec<FeatureFile>,
}

/// Files directly inside `dir` with the given extension (case-insensitive),
/// sorted by name for reproducible processing order.
fn files_with_extension(dir: &Path, extension: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|path| {
            path.is_file()
                && path
                    .extension()
                    .is_some_and(|e| e.eq_ignore_ascii_case(extension))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "unnamed".to_string())
}

fn matrix_csv(header_prefix: &str, rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    if let Some(first) = rows.first() {
        let header: Vec<String> = (0..first.len())
            .map(|c| format!("{header_prefix}{c}"))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
    }
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Stage 7: extract MFCC matrices for every WAV in the audio directory.
/// Without an audio directory the stage is a no-op.
pub fn stage_mfcc(config: &PipelineConfig, artifacts: &mut ArtifactSet) -> Result<()> {
    #[derive(Serialize)]
    struct Params<'a> {
        mfcc: &'a Option<MfccConfig>,
    }

    let Some(dir) = &config.audio_dir else {
        return Ok(());
    };
    let mut files = Vec::new();
    for path in files_with_extension(dir, "wav")? {
        let audio = AudioBuffer::from_wav_path(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        let mfcc_config = config
            .mfcc
            .clone()
            .unwrap_or_else(|| MfccConfig::for_sample_rate(audio.sample_rate()));
        let matrix = mfcc(&audio, &mfcc_config)
            .with_context(|| format!("extracting MFCCs from {}", path.display()))?;
        let name = format!("features/{}.mfcc.csv", file_stem(&path));
        artifacts.write_bytes(&name, matrix_csv("c", &matrix).as_bytes())?;
        files.push(FeatureFile {
            input: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            outputs: vec![name],
            rows: matrix.len(),
            columns: mfcc_config.coefficients,
        });
    }
    artifacts.write_json(
        MFCC_INDEX_JSON,
        &FeatureIndexArtifact {
            provenance: provenance(config.seed, &Params { mfcc: &config.mfcc })?,
            files,
        },
    )
}

/// Stage 8: standardize every pose CSV to the target length and write the
/// configured rotational augmentations. No pose directory, no-op.
pub fn stage_pose(config: &PipelineConfig, artifacts: &mut ArtifactSet) -> Result<()> {
    let Some(dir) = &config.pose_dir else {
        return Ok(());
    };
    let mut files = Vec::new();
    for path in files_with_extension(dir, "csv")? {
        let sequence = PoseSequence::from_csv_path(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        let standardized = standardize_pose(&sequence, config.pose.target_len)
            .with_context(|| format!("standardizing {}", path.display()))?;
        let stem = file_stem(&path);
        let mut outputs = Vec::new();

        let mut buffer = Vec::new();
        standardized.write_csv(&mut buffer)?;
        let name = format!("features/{stem}.pose_std.csv");
        artifacts.write_bytes(&name, &buffer)?;
        outputs.push(name);

        for &degrees in &config.pose.rotations {
            let rotated = rotate_pose(
                &standardized,
                degrees,
                config.pose.axis,
                config.pose.root_joint,
            )
            .with_context(|| format!("rotating {}", path.display()))?;
            let mut buffer = Vec::new();
            rotated.write_csv(&mut buffer)?;
            let name = format!("features/{stem}.pose_rot{degrees}.csv");
            artifacts.write_bytes(&name, &buffer)?;
            outputs.push(name);
        }

        files.push(FeatureFile {
            input: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            outputs,
            rows: config.pose.target_len,
            columns: standardized.joints() * 3,
        });
    }
    artifacts.write_json(
        POSE_INDEX_JSON,
        &FeatureIndexArtifact {
            provenance: provenance(config.seed, &config.pose)?,
            files,
        },
    )
}

/// Runs one stage with rollback: on failure every file the stage wrote is
/// removed again.
pub fn run_stage<F>(config: &PipelineConfig, stage: F) -> Result<Vec<PathBuf>>
where
    F: FnOnce(&PipelineConfig, &mut ArtifactSet) -> Result<()>,
{
    let mut artifacts = ArtifactSet::new(&config.out_dir)?;
    match stage(config, &mut artifacts) {
        Ok(()) => Ok(artifacts.into_written()),
        Err(error) => {
            artifacts.discard();
            Err(error)
        }
    }
}

/// Runs every stage in order. On failure all files written during this run
/// are removed. The IRR stage only runs when a classifier is configured.
pub fn run_pipeline(config: &PipelineConfig) -> Result<Vec<PathBuf>> {
    run_stage(config, |config, artifacts| {
        stage_ingest(config, artifacts)?;
        stage_code(config, artifacts)?;
        if config.classifier.is_some() {
            stage_irr(config, artifacts)?;
        }
        stage_model(config, artifacts)?;
        stage_compare(config, artifacts)?;
        stage_plot(config, artifacts)?;
        stage_mfcc(config, artifacts)?;
        stage_pose(config, artifacts)?;
        Ok(())
    })
}
