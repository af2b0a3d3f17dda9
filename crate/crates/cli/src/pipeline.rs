//! The stages behind each subcommand. Every artifact lives under the run
//! directory and is recorded, with its content hash, in a run manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};

use candle_core::{DType, Tensor};
use glyphtag_core::amt::{amt_eval, build_amt_groups_for, AmtGroups, AmtSummary, ParameterOracle};
use glyphtag_core::metrics::{evaluate_query_set, EvaluationReport, FontScorer};
use glyphtag_core::queries::{build_query_sets_for, QueryKind, QuerySet, TOP_K};
use glyphtag_core::scoring::ScoreTable;
use glyphtag_core::synth::synthesize;
use glyphtag_core::{pngio, DatasetManifest, GlyphSpec, Split, GLYPH_COUNT, GLYPH_SET};
use glyphtag_model::attention::{train_stage3, AttendedRecognizer};
use glyphtag_model::checkpoint::{self, CheckpointMeta, Models};
use glyphtag_model::data::{GlyphBank, TrainingData};
use glyphtag_model::gan::{masked_reconstruction, per_sample_l1, train_stage2, GanModels, MaskMode};
use glyphtag_model::recognizer::{glyph_probabilities, train_font_classifier, train_stage1, FontClassifier, Recognizer};
use glyphtag_model::retrieval::{train_stage4, GlyphProbs};
use glyphtag_model::tables::{score_table, Variant};
use glyphtag_model::train::TrainLog;
use glyphtag_model::ParamStore;
use glyphtag_service::FontIndex;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::{io, CliError, Result};

pub const DTYPE: DType = DType::F32;

pub const MANIFEST: &str = "manifest.json";
pub const AMT_GROUPS: &str = "amt_groups.json";
pub const INDEX: &str = "index.gtix";

pub fn checkpoint_name(stage: u8) -> String {
    format!("stage{stage}.ckpt")
}

pub fn query_file(kind: QueryKind) -> String {
    format!("queries/{}.jsonl", kind.name())
}

fn stage_command(stage: u8) -> &'static str {
    ["synth", "train-stage1", "train-stage2", "train-stage3", "train-stage4"][stage as usize]
}

/// Seed for everything a stage draws after loading its predecessor.
fn stage_seed(seed: u64, stage: u8) -> u64 {
    seed.wrapping_mul(31).wrapping_add(stage as u64)
}

/// Content hash in git's object form: sha256 over `blob <len>\0<bytes>`.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Exclusive hold on a run directory for the life of the value.
pub struct RunLock {
    path: PathBuf,
    _file: File,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let path = dir.join(".lock");
        let file = OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                CliError::Locked(dir.to_path_buf())
            } else {
                CliError::Io {
                    path: path.clone(),
                    source: e,
                }
            }
        })?;
        Ok(RunLock { path, _file: file })
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub args: Vec<String>,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

/// One subcommand's view of the run directory.
pub struct Workspace {
    pub cfg: PipelineConfig,
    inputs: BTreeSet<PathBuf>,
    outputs: BTreeSet<PathBuf>,
}

impl Workspace {
    pub fn new(cfg: PipelineConfig) -> Self {
        Workspace {
            cfg,
            inputs: BTreeSet::new(),
            outputs: BTreeSet::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.cfg.out
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.cfg.out.join(rel)
    }

    /// Path of a prerequisite artifact, recorded as an input.
    fn need(&mut self, rel: &str, stage: &'static str) -> Result<PathBuf> {
        let p = self.path(rel);
        if !p.is_file() {
            return Err(CliError::MissingPrerequisite { artifact: p, stage });
        }
        self.inputs.insert(PathBuf::from(rel));
        Ok(p)
    }

    fn wrote(&mut self, rel: &str) {
        self.outputs.insert(PathBuf::from(rel));
    }

    fn write(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let p = self.path(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(io(parent))?;
        }
        std::fs::write(&p, bytes).map_err(io(&p))?;
        self.wrote(rel);
        Ok(p)
    }

    pub fn manifest(&mut self) -> Result<DatasetManifest> {
        let p = self.need(MANIFEST, "synth")?;
        Ok(DatasetManifest::load(&p)?)
    }

    fn load_checkpoint(&mut self, stage: u8, manifest: &DatasetManifest) -> Result<(ParamStore, CheckpointMeta)> {
        let p = self.need(&checkpoint_name(stage), stage_command(stage))?;
        let (mut store, meta) = checkpoint::load(&p, manifest, DTYPE)?;
        if meta.stage < stage {
            return Err(CliError::MissingPrerequisite {
                artifact: p,
                stage: stage_command(stage),
            });
        }
        store.reseed(stage_seed(self.cfg.seed, stage + 1));
        Ok((store, meta))
    }

    /// The most trained checkpoint present, at least `min` and at most `max`.
    pub fn latest_stage(&self, min: u8, max: u8) -> Option<u8> {
        (min..=max).rev().find(|&s| self.path(&checkpoint_name(s)).is_file())
    }

    fn save_checkpoint(&mut self, store: &ParamStore, meta: &CheckpointMeta, log: &TrainLog) -> Result<PathBuf> {
        let rel = checkpoint_name(meta.stage);
        let p = self.path(&rel);
        checkpoint::save(&p, store, meta)?;
        self.wrote(&rel);
        self.write(&format!("stage{}.log.csv", meta.stage), log.to_csv())?;
        Ok(p)
    }

    /// Writes the resolved config and the run manifest for `subcommand`.
    pub fn finish(&mut self, subcommand: &str, args: &[String]) -> Result<PathBuf> {
        let config_rel = format!("runs/{subcommand}.config.toml");
        self.write(&config_rel, self.cfg.to_toml()?)?;
        let hash_all = |set: &BTreeSet<PathBuf>| -> Result<BTreeMap<String, String>> {
            set.iter()
                .map(|rel| {
                    let p = self.cfg.out.join(rel);
                    let bytes = std::fs::read(&p).map_err(io(&p))?;
                    Ok((rel.display().to_string(), content_hash(&bytes)))
                })
                .collect()
        };
        let run = RunManifest {
            subcommand: subcommand.to_string(),
            args: args.to_vec(),
            config_hash: self.cfg.hash()?,
            seed: self.cfg.seed,
            inputs: hash_all(&self.inputs)?,
            outputs: hash_all(&self.outputs)?,
        };
        let json = serde_json::to_string_pretty(&run).map_err(|e| CliError::Usage(e.to_string()))?;
        self.write(&format!("runs/{subcommand}.json"), json)
    }
}

pub fn synth(ws: &mut Workspace) -> Result<DatasetManifest> {
    let manifest = synthesize(&ws.cfg.synth_config())?;
    ws.write(MANIFEST, manifest.to_json()?)?;
    let split = ws.cfg.eval.split;
    let sets = build_query_sets_for(&manifest, split, ws.cfg.seed, TOP_K)?;
    for set in sets.iter() {
        let rel = query_file(set.kind);
        let mut buf = Vec::new();
        set.write_jsonl(&mut buf)?;
        ws.write(&rel, buf)?;
    }
    let groups = build_amt_groups_for(&manifest, split, ws.cfg.corpus.amt_groups, ws.cfg.seed)?;
    let json = serde_json::to_string_pretty(&groups).map_err(glyphtag_core::Error::from)?;
    ws.write(AMT_GROUPS, json)?;
    Ok(manifest)
}

/// Writes `glyphs/<size>/<font_id>_<codepoint>.png` for the selected fonts
/// (all fonts when `fonts` is empty).
pub fn render(ws: &mut Workspace, fonts: &[String], size: Option<usize>) -> Result<usize> {
    let manifest = ws.manifest()?;
    let size = size.unwrap_or(ws.cfg.backbone.image_size);
    let ids: Vec<String> = if fonts.is_empty() {
        manifest.fonts.iter().map(|f| f.font_id.clone()).collect()
    } else {
        fonts.to_vec()
    };
    let mut n = 0;
    for id in &ids {
        manifest.font(id)?;
        for c in GLYPH_SET {
            let spec = GlyphSpec::new(id.clone(), c);
            let img = manifest.render_glyph(&spec, size)?;
            ws.write(&format!("glyphs/{size}/{}", spec.file_name()), img.to_png()?)?;
            n += 1;
        }
    }
    Ok(n)
}

pub fn train_stage_1(ws: &mut Workspace) -> Result<TrainLog> {
    let manifest = ws.manifest()?;
    let cfg = ws.cfg.clone();
    let data = TrainingData::new(&manifest, cfg.backbone.image_size, DTYPE)?;
    let mut store = ParamStore::new(DTYPE, stage_seed(cfg.seed, 1));
    let log = train_stage1(&mut store, &data, &cfg.backbone, &cfg.train, cfg.seed)?;
    let meta = CheckpointMeta::new(&manifest, &cfg.backbone, cfg.seed);
    ws.save_checkpoint(&store, &meta, &log)?;
    Ok(log)
}

pub fn train_stage_2(ws: &mut Workspace) -> Result<TrainLog> {
    let manifest = ws.manifest()?;
    let (mut store, mut meta) = ws.load_checkpoint(1, &manifest)?;
    let cfg = ws.cfg.clone();
    let data = TrainingData::new(&manifest, meta.backbone.image_size, DTYPE)?;
    cfg.gan.validate(meta.backbone.image_size)?;
    let rec = Recognizer::new(&mut store, &meta.backbone, meta.n_tags)?;
    let models = GanModels::new(&mut store, rec, &cfg.gan)?;
    let log = train_stage2(&mut store, &data, &models, &cfg.train, cfg.seed)?;
    meta.stage = 2;
    meta.gan = Some(cfg.gan.clone());
    drop(models);
    ws.save_checkpoint(&store, &meta, &log)?;
    Ok(log)
}

/// Font classifier, then the attention module over the frozen recognizer.
pub fn train_stage_3(ws: &mut Workspace) -> Result<TrainLog> {
    let manifest = ws.manifest()?;
    let (mut store, mut meta) = ws.load_checkpoint(2, &manifest)?;
    let cfg = ws.cfg.clone();
    let data = TrainingData::new(&manifest, meta.backbone.image_size, DTYPE)?;
    let rec = Recognizer::new(&mut store, &meta.backbone, meta.n_tags)?;
    let (mut log, acc) = train_font_classifier(&mut store, &data, &meta.backbone, &cfg.train, cfg.seed)?;
    log::info!("font classifier probe accuracy {acc:.4}");
    let cls = FontClassifier::new(&mut store, &meta.backbone, data.train.len())?;
    let (_, att_log) = train_stage3(&mut store, &data, &rec, &cls, &cfg.attention, &cfg.train, cfg.seed)?;
    log.extend(att_log);
    meta.stage = 3;
    meta.attention = Some(cfg.attention.clone());
    ws.save_checkpoint(&store, &meta, &log)?;
    Ok(log)
}

/// Retrieval head over the attended glyph probabilities of the training
/// fonts.
pub fn train_stage_4(ws: &mut Workspace) -> Result<TrainLog> {
    let manifest = ws.manifest()?;
    let (mut store, mut meta) = ws.load_checkpoint(3, &manifest)?;
    let cfg = ws.cfg.clone();
    let probs = {
        let models = Models::from_store(&mut store, meta.clone())?;
        let (Some(cls), Some(att)) = (&models.classifier, &models.attention) else {
            return Err(CliError::MissingPrerequisite {
                artifact: ws.path(&checkpoint_name(3)),
                stage: "train-stage3",
            });
        };
        let attended = AttendedRecognizer::new(&models.recognizer, cls, att);
        let fonts = manifest.split(Split::Train).to_vec();
        let bank = GlyphBank::new(&manifest, &fonts, meta.backbone.image_size)?;
        let probs = (0..bank.len())
            .map(|f| glyph_probabilities(&attended, &bank, f, DTYPE))
            .collect::<glyphtag_model::Result<Vec<_>>>()?;
        GlyphProbs { fonts, probs }
    };
    let t = &cfg.train;
    let (_, log) = train_stage4(
        &mut store,
        &manifest,
        &probs,
        &cfg.retrieval,
        t.head(),
        t.stage4_steps,
        t.stage4_batch,
        cfg.seed,
    )?;
    meta.stage = 4;
    meta.retrieval = Some(cfg.retrieval);
    ws.save_checkpoint(&store, &meta, &log)?;
    Ok(log)
}

/// Scorers `evaluate`, `amt-eval` and `score` can use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelChoice {
    /// Ground truth: labels for `evaluate`, generating parameters for
    /// `amt-eval`.
    Oracle,
    /// Stage-1 recognizer with the product rule.
    Basic,
    /// Most trained checkpoint, head included.
    Full,
    /// Most trained checkpoint's probabilities with the product rule.
    FullProduct,
    /// Uniform random scores (`amt-eval` only).
    Random,
}

impl std::str::FromStr for ModelChoice {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "oracle" => ModelChoice::Oracle,
            "basic" => ModelChoice::Basic,
            "full" => ModelChoice::Full,
            "full-product" => ModelChoice::FullProduct,
            "random" => ModelChoice::Random,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown model `{other}` (oracle, basic, full, full-product, random)"
                )))
            }
        })
    }
}

impl ModelChoice {
    pub fn name(self) -> &'static str {
        match self {
            ModelChoice::Oracle => "oracle",
            ModelChoice::Basic => "basic",
            ModelChoice::Full => "full",
            ModelChoice::FullProduct => "full-product",
            ModelChoice::Random => "random",
        }
    }
}

/// Score table of a trained model over `fonts`.
pub fn model_table(ws: &mut Workspace, manifest: &DatasetManifest, choice: ModelChoice, fonts: &[String]) -> Result<ScoreTable> {
    let (stage, variant) = match choice {
        ModelChoice::Basic => (1, Variant::Basic),
        ModelChoice::Full | ModelChoice::FullProduct => (ws.latest_stage(1, 4).unwrap_or(1), Variant::Full),
        _ => return Err(CliError::Usage(format!("`{}` is not a trained model", choice.name()))),
    };
    let (mut store, meta) = ws.load_checkpoint(stage, manifest)?;
    let models = Models::from_store(&mut store, meta)?;
    let table = score_table(&models, manifest, fonts, DTYPE, variant)?;
    Ok(if choice == ModelChoice::FullProduct {
        table.without_head()
    } else {
        table
    })
}

fn label_oracle(manifest: &DatasetManifest) -> impl Fn(&[usize], &str) -> std::result::Result<f64, String> + '_ {
    move |query: &[usize], font_id: &str| {
        let labels = manifest.labels(font_id).map_err(|e| e.to_string())?;
        Ok(if query.iter().all(|&t| labels.contains(t)) { 1.0 } else { 0.0 })
    }
}

fn load_query_sets(ws: &mut Workspace) -> Result<Vec<QuerySet>> {
    let split = ws.cfg.eval.split;
    QueryKind::ALL
        .iter()
        .map(|&kind| {
            let p = ws.need(&query_file(kind), "synth")?;
            let set = QuerySet::load(&p, kind, split)?;
            Ok(set)
        })
        .collect()
}

/// Metrics of one scorer over the three query sets, written as JSON, a
/// table and per-query CSV under `reports/`.
pub fn evaluate(ws: &mut Workspace, choice: ModelChoice) -> Result<EvaluationReport> {
    let manifest = ws.manifest()?;
    let sets = load_query_sets(ws)?;
    let fonts = manifest.split(ws.cfg.eval.split).to_vec();
    let report = match choice {
        ModelChoice::Oracle => run_sets(&sets, &label_oracle(&manifest), &manifest, choice)?,
        ModelChoice::Random => return Err(CliError::Usage("`random` is only defined for amt-eval".into())),
        _ => {
            let table = model_table(ws, &manifest, choice, &fonts)?;
            run_sets(&sets, &table, &manifest, choice)?
        }
    };
    let name = choice.name();
    ws.write(&format!("reports/{name}.json"), report.to_json()?)?;
    ws.write(&format!("reports/{name}.txt"), report.to_table())?;
    ws.write(&format!("reports/{name}.csv"), report.to_csv())?;
    Ok(report)
}

fn run_sets(sets: &[QuerySet], scorer: &impl FontScorer, manifest: &DatasetManifest, choice: ModelChoice) -> Result<EvaluationReport> {
    Ok(EvaluationReport {
        variant: choice.name().to_string(),
        sets: sets
            .iter()
            .map(|s| evaluate_query_set(s, scorer, manifest))
            .collect::<glyphtag_core::Result<_>>()?,
        amt: None,
    })
}

/// Uniform random scorer over `trials` group evaluations.
pub fn amt_random(groups: &AmtGroups, manifest: &DatasetManifest, trials: usize, seed: u64) -> Result<AmtSummary> {
    if groups.groups.is_empty() {
        return Ok(AmtSummary {
            n_groups: 0,
            accuracy: 0.0,
            average_rank: 0.0,
        });
    }
    let rng = std::cell::RefCell::new(rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    let scorer = |_: &[usize], _: &str| -> std::result::Result<f64, String> { Ok(rng.borrow_mut().random::<f64>()) };
    let (mut n, mut acc, mut rank) = (0usize, 0.0, 0.0);
    while n < trials {
        let take = (trials - n).min(groups.groups.len());
        let s = amt_eval(&groups.groups[..take], &manifest.vocabulary, &scorer)?;
        acc += s.accuracy * take as f64;
        rank += s.average_rank * take as f64;
        n += take;
    }
    Ok(AmtSummary {
        n_groups: n,
        accuracy: acc / n as f64,
        average_rank: rank / n as f64,
    })
}

pub fn amt(ws: &mut Workspace, choice: ModelChoice) -> Result<AmtSummary> {
    let manifest = ws.manifest()?;
    let p = ws.need(AMT_GROUPS, "synth")?;
    let text = std::fs::read_to_string(&p).map_err(io(&p))?;
    let groups: AmtGroups = serde_json::from_str(&text).map_err(glyphtag_core::Error::from)?;
    let summary = match choice {
        ModelChoice::Oracle => amt_eval(&groups.groups, &manifest.vocabulary, &ParameterOracle { manifest: &manifest })?,
        ModelChoice::Random => amt_random(&groups, &manifest, ws.cfg.eval.amt_random_trials, ws.cfg.seed)?,
        _ => {
            let fonts: BTreeSet<String> = groups.groups.iter().flat_map(|g| g.candidates.iter().cloned()).collect();
            let fonts: Vec<String> = fonts.into_iter().collect();
            let table = model_table(ws, &manifest, choice, &fonts)?;
            amt_eval(&groups.groups, &manifest.vocabulary, &table)?
        }
    };
    let json = serde_json::to_string_pretty(&summary).map_err(glyphtag_core::Error::from)?;
    ws.write(&format!("reports/amt_{}.json", choice.name()), json)?;
    Ok(summary)
}

pub fn build_index(ws: &mut Workspace) -> Result<FontIndex> {
    let manifest = ws.manifest()?;
    let basic = ws.need(&checkpoint_name(1), "train-stage1")?;
    let full = match ws.latest_stage(2, 4) {
        Some(s) => Some(ws.need(&checkpoint_name(s), "train-stage2")?),
        None => None,
    };
    let index = glyphtag_service::build_index(&manifest, &basic, full.as_deref(), DTYPE)?;
    ws.write(INDEX, index.to_bytes()?)?;
    Ok(index)
}

pub fn load_index(ws: &mut Workspace) -> Result<FontIndex> {
    let p = ws.need(INDEX, "build-index")?;
    Ok(FontIndex::load(&p)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredFont {
    pub rank: usize,
    pub font_id: String,
    pub score: f64,
}

/// Every manifest font ranked for `tags` by a checkpoint.
pub fn score(manifest: &DatasetManifest, checkpoint_path: &Path, tags: &[String]) -> Result<Vec<ScoredFont>> {
    let query = manifest.vocabulary.encode(tags)?;
    let (mut store, meta) = checkpoint::load(checkpoint_path, manifest, DTYPE)?;
    let models = Models::from_store(&mut store, meta)?;
    let fonts: Vec<String> = manifest.fonts.iter().map(|f| f.font_id.clone()).collect();
    let table = score_table(&models, manifest, &fonts, DTYPE, Variant::Full)?;
    let mut scored = table
        .fonts
        .iter()
        .enumerate()
        .map(|(i, f)| Ok((f.clone(), table.score_at(i, &query)?)))
        .collect::<glyphtag_core::Result<Vec<_>>>()?;
    scored.sort_by(glyphtag_core::metrics::rank_order);
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(r, (font_id, score))| ScoredFont {
            rank: r + 1,
            font_id,
            score,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionSummary {
    pub k: usize,
    pub feature_dim: usize,
    pub glyphs: usize,
    pub mean_l1_full: f64,
    pub mean_l1_top: f64,
    pub mean_l1_bottom: f64,
    pub mean_l1_cross: f64,
    /// Fraction of glyphs whose top-k reconstruction is closer to the
    /// original than the bottom-k one.
    pub top_beats_bottom: f64,
}

fn to_u8(t: &Tensor) -> Result<Vec<u8>> {
    let v = t.flatten_all()?.to_dtype(DType::F32)?.to_vec1::<f32>()?;
    Ok(v.iter().map(|&x| (x.clamp(0.0, 1.0) * 255.0).round() as u8).collect())
}

/// Masked reconstructions of every glyph of the evaluated split. Each
/// glyph's own attention map picks the top and bottom `k` nodes; cross mode
/// uses the map of the same character in the next font. Strips
/// (original, unmasked, top, bottom, cross) are written for the first
/// `images` fonts.
pub fn reconstruct(ws: &mut Workspace, k: Option<usize>, images: usize) -> Result<ReconstructionSummary> {
    let manifest = ws.manifest()?;
    let (mut store, meta) = ws.load_checkpoint(3, &manifest)?;
    let size = meta.backbone.image_size;
    let d = meta.backbone.feature_dim;
    let k = k.unwrap_or(d / 2);
    if k > d {
        return Err(CliError::Usage(format!("k = {k} exceeds the feature dimension {d}")));
    }
    let models = Models::from_store(&mut store, meta)?;
    let (Some(gen), Some(cls), Some(att)) = (&models.generator, &models.classifier, &models.attention) else {
        return Err(CliError::MissingPrerequisite {
            artifact: ws.path(&checkpoint_name(3)),
            stage: "train-stage3",
        });
    };
    let attended = AttendedRecognizer::new(&models.recognizer, cls, att);
    let fonts = manifest.split(ws.cfg.eval.split).to_vec();
    let bank = GlyphBank::new(&manifest, &fonts, size)?;
    let nf = bank.len();
    let mut feats = Vec::with_capacity(nf);
    let mut maps = Vec::with_capacity(nf);
    for f in 0..nf {
        let x = bank.font_batch(f, DTYPE)?;
        feats.push(models.recognizer.features(&x)?.to_dtype(DType::F64)?.to_vec2::<f64>()?);
        maps.push(attended.maps(&x)?.to_dtype(DType::F64)?.to_vec2::<f64>()?);
    }
    let (mut full, mut top, mut bottom, mut cross, mut wins) = (0.0, 0.0, 0.0, 0.0, 0usize);
    for f in 0..nf {
        let other = (f + 1) % nf;
        for g in 0..GLYPH_COUNT {
            let standard = bank.standard_batch(&[g], DTYPE)?;
            let target = bank.batch(&[(f, g)], DTYPE)?;
            let own = &maps[f][g];
            let run = |mode: MaskMode, kk: usize| {
                masked_reconstruction(gen, &feats[f][g], &standard, own, Some(&maps[other][g]), kk, mode)
            };
            let outs = [run(MaskMode::Top, d)?, run(MaskMode::Top, k)?, run(MaskMode::Bottom, k)?, run(MaskMode::Cross, k)?];
            let l1: Vec<f64> = outs
                .iter()
                .map(|o| Ok(per_sample_l1(o, &target)?[0]))
                .collect::<glyphtag_model::Result<_>>()?;
            full += l1[0];
            top += l1[1];
            bottom += l1[2];
            cross += l1[3];
            if l1[1] < l1[2] {
                wins += 1;
            }
            if f < images {
                let mut strip = vec![0u8; size * size * 5];
                let tiles = [to_u8(&target)?, to_u8(&outs[0])?, to_u8(&outs[1])?, to_u8(&outs[2])?, to_u8(&outs[3])?];
                for (t, tile) in tiles.iter().enumerate() {
                    for r in 0..size {
                        strip[r * size * 5 + t * size..r * size * 5 + (t + 1) * size]
                            .copy_from_slice(&tile[r * size..(r + 1) * size]);
                    }
                }
                let png = pngio::encode_gray(&strip, size * 5, size)?;
                let c = GLYPH_SET[g];
                ws.write(&format!("reconstruct/{}_{}_k{k}.png", bank.fonts[f], c as u32), png)?;
            }
        }
    }
    let n = (nf * GLYPH_COUNT) as f64;
    let summary = ReconstructionSummary {
        k,
        feature_dim: d,
        glyphs: nf * GLYPH_COUNT,
        mean_l1_full: full / n,
        mean_l1_top: top / n,
        mean_l1_bottom: bottom / n,
        mean_l1_cross: cross / n,
        top_beats_bottom: wins as f64 / n,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(glyphtag_core::Error::from)?;
    ws.write(&format!("reconstruct/summary_k{k}.json"), json)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_hash_matches_git_object_form() {
        // `printf 'hello\n' | git hash-object --object-format=sha256 --stdin`
        assert_eq!(
            content_hash(b"hello\n"),
            "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4"
        );
    }

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let a = RunLock::acquire(dir.path()).unwrap();
        assert!(matches!(RunLock::acquire(dir.path()), Err(CliError::Locked(_))));
        drop(a);
        RunLock::acquire(dir.path()).unwrap();
    }

    #[test]
    fn model_names_roundtrip() {
        for m in [
            ModelChoice::Oracle,
            ModelChoice::Basic,
            ModelChoice::Full,
            ModelChoice::FullProduct,
            ModelChoice::Random,
        ] {
            assert_eq!(m.name().parse::<ModelChoice>().unwrap(), m);
        }
        assert!("x".parse::<ModelChoice>().is_err());
    }
}
