use candle_core::{DType, Device, Tensor};
use glyphtag_core::affinity::RetrievalConfig;
use glyphtag_core::synth::{synthesize, SynthConfig};
use glyphtag_core::DatasetManifest;
use glyphtag_model::attention::{attended_probs, train_stage3, AttendedRecognizer, FrozenInputs};
use glyphtag_model::checkpoint::{self, CheckpointMeta, Models};
use glyphtag_model::data::TrainingData;
use glyphtag_model::gan::{train_stage2, GanModels, Stage2Trainer};
use glyphtag_model::recognizer::{
    train_font_classifier, train_stage1, FontClassifier, Recognizer, TagPredictor, BACKBONE, FONT_CLS, TAG_HEAD,
};
use glyphtag_model::retrieval::{train_stage4, GlyphProbs};
use glyphtag_model::{AttentionConfig, BackboneConfig, GanConfig, ModelError, ParamStore, TrainConfig};

const SIZE: usize = 16;

fn corpus() -> DatasetManifest {
    synthesize(&SynthConfig::standard(20, 5).with_min_count(2)).unwrap()
}

fn backbone() -> BackboneConfig {
    BackboneConfig {
        image_size: SIZE,
        widths: vec![4, 8],
        feature_dim: 8,
        ..Default::default()
    }
}

fn gan() -> GanConfig {
    GanConfig {
        patch_grid: 2,
        gen_base: 4,
        gen_max: 8,
        disc_base: 4,
        disc_max: 8,
        ..Default::default()
    }
}

fn train() -> TrainConfig {
    TrainConfig {
        glyphs_per_font: 2,
        stage1_epochs: 2,
        classifier_epochs: 2,
        phase_a_max_epochs: 1,
        phase_b_epochs: 1,
        stage3_epochs: 1,
        stage4_steps: 5,
        stage4_batch: 4,
        ..Default::default()
    }
}

fn stage1(manifest: &DatasetManifest, seed: u64) -> (ParamStore, Vec<f64>) {
    let data = TrainingData::new(manifest, SIZE, DType::F32).unwrap();
    let mut store = ParamStore::new(DType::F32, seed);
    let log = train_stage1(&mut store, &data, &backbone(), &train(), seed).unwrap();
    (store, log.losses("stage1", "train"))
}

#[test]
fn stage1_is_deterministic() {
    let m = corpus();
    let (a, la) = stage1(&m, 9);
    let (b, lb) = stage1(&m, 9);
    assert_eq!(la, lb);
    assert_eq!(a.fingerprint("").unwrap(), b.fingerprint("").unwrap());
    let (_, lc) = stage1(&m, 10);
    assert_ne!(la, lc);
}

#[test]
fn empty_train_split_fails_before_training() {
    let mut m = corpus();
    m.splits.train.clear();
    assert!(matches!(
        TrainingData::new(&m, SIZE, DType::F32),
        Err(ModelError::EmptyDataset(_))
    ));
}

#[test]
fn stage2_frozen_contracts() {
    let m = corpus();
    let data = TrainingData::new(&m, SIZE, DType::F32).unwrap();
    let (mut store, _) = stage1(&m, 1);
    let rec = Recognizer::new(&mut store, &backbone(), data.n_tags()).unwrap();
    let models = GanModels::new(&mut store, rec, &gan()).unwrap();
    let mut trainer = Stage2Trainer::new(&store, &models.cfg, &train(), 1).unwrap();

    let (bb, head, g) = (
        store.fingerprint(BACKBONE).unwrap(),
        store.fingerprint(TAG_HEAD).unwrap(),
        store.fingerprint("gen.").unwrap(),
    );
    trainer.phase_a_epoch(&models, &data, &train()).unwrap();
    assert_eq!(store.fingerprint(BACKBONE).unwrap(), bb);
    assert_eq!(store.fingerprint(TAG_HEAD).unwrap(), head);
    assert_ne!(store.fingerprint("gen.").unwrap(), g);

    trainer.sub_epoch_gan(&models, &data, &train()).unwrap();
    assert_eq!(store.fingerprint(TAG_HEAD).unwrap(), head);
    assert_ne!(store.fingerprint(BACKBONE).unwrap(), bb);

    let (bb, d) = (store.fingerprint(BACKBONE).unwrap(), store.fingerprint("disc.").unwrap());
    trainer.sub_epoch_tags(&models, &data, &train()).unwrap();
    assert_ne!(store.fingerprint(TAG_HEAD).unwrap(), head);
    assert_ne!(store.fingerprint(BACKBONE).unwrap(), bb);
    assert_eq!(store.fingerprint("disc.").unwrap(), d);
}

struct Full {
    manifest: DatasetManifest,
    store: ParamStore,
    meta: CheckpointMeta,
}

fn full_pipeline(seed: u64) -> Full {
    let manifest = corpus();
    let data = TrainingData::new(&manifest, SIZE, DType::F32).unwrap();
    let mut store = ParamStore::new(DType::F32, seed);
    let mut meta = CheckpointMeta::new(&manifest, &backbone(), seed);
    train_stage1(&mut store, &data, &backbone(), &train(), seed).unwrap();

    let rec = Recognizer::new(&mut store, &backbone(), data.n_tags()).unwrap();
    let models = GanModels::new(&mut store, rec, &gan()).unwrap();
    train_stage2(&mut store, &data, &models, &train(), seed).unwrap();
    meta.stage = 2;
    meta.gan = Some(gan());

    train_font_classifier(&mut store, &data, &backbone(), &train(), seed).unwrap();
    let cls = FontClassifier::new(&mut store, &backbone(), data.train.len()).unwrap();
    let bb = store.fingerprint(BACKBONE).unwrap();
    let fc = store.fingerprint(FONT_CLS).unwrap();
    let att = AttentionConfig::default();
    let (attention, _) = train_stage3(&mut store, &data, &models.recognizer, &cls, &att, &train(), seed).unwrap();
    assert_eq!(store.fingerprint(BACKBONE).unwrap(), bb, "stage 3 touched the backbone");
    assert_eq!(store.fingerprint(FONT_CLS).unwrap(), fc, "stage 3 touched the font classifier");
    meta.stage = 3;
    meta.attention = Some(att);

    let attended = AttendedRecognizer::new(&models.recognizer, &cls, &attention);
    let probs = (0..data.train.len())
        .map(|f| glyphtag_model::recognizer::glyph_probabilities(&attended, &data.train, f, DType::F32).unwrap())
        .collect();
    let gp = GlyphProbs {
        fonts: data.train.fonts.clone(),
        probs,
    };
    let frozen = |s: &ParamStore| -> Vec<String> {
        [BACKBONE, TAG_HEAD, FONT_CLS, "attention", "gen", "disc"]
            .iter()
            .map(|p| s.fingerprint(p).unwrap())
            .collect()
    };
    let before = frozen(&store);
    let rc = RetrievalConfig::default();
    let t = train();
    train_stage4(&mut store, &manifest, &gp, &rc, t.head(), t.stage4_steps, t.stage4_batch, seed).unwrap();
    assert_eq!(frozen(&store), before, "stage 4 touched recognition parameters");
    meta.stage = 4;
    meta.retrieval = Some(rc);
    drop(models);
    Full { manifest, store, meta }
}

#[test]
fn later_stages_freeze_recognition_and_are_deterministic() {
    let a = full_pipeline(4);
    let b = full_pipeline(4);
    assert_eq!(a.store.fingerprint("").unwrap(), b.store.fingerprint("").unwrap());
    assert_eq!(
        a.store.fingerprint("attention").unwrap(),
        b.store.fingerprint("attention").unwrap()
    );
}

#[test]
fn stage4_only_moves_the_head() {
    let manifest = corpus();
    let mut store = ParamStore::new(DType::F64, 0);
    let n = manifest.vocabulary.len();
    store.constant("backbone.probe", &[3], 0.5).unwrap();
    let fonts = manifest.split(glyphtag_core::Split::Train).to_vec();
    let gp = GlyphProbs {
        probs: fonts
            .iter()
            .map(|f| {
                let bits = manifest.labels(f).unwrap().bits;
                vec![bits.iter().map(|&b| 0.1 + 0.8 * b as f64).collect::<Vec<_>>(); 52]
            })
            .collect(),
        fonts,
    };
    let bb = store.fingerprint(BACKBONE).unwrap();
    let (head, log) = train_stage4(&mut store, &manifest, &gp, &RetrievalConfig::default(), 5e-3, 20, 8, 1).unwrap();
    assert_eq!(store.fingerprint(BACKBONE).unwrap(), bb);
    assert_eq!(head.n(), n);
    assert!(log.losses("stage4", "train").iter().all(|l| l.is_finite()));
}

#[test]
fn checkpoint_roundtrip_and_vocabulary_guard() {
    let mut full = full_pipeline(2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stage4.safetensors");
    checkpoint::save(&path, &full.store, &full.meta).unwrap();
    let (mut loaded, meta) = checkpoint::load(&path, &full.manifest, DType::F32).unwrap();
    assert_eq!(meta, full.meta);
    assert_eq!(loaded.fingerprint("").unwrap(), full.store.fingerprint("").unwrap());
    let models = Models::from_store(&mut loaded, meta).unwrap();
    assert!(models.generator.is_some() && models.attention.is_some() && models.retrieval.is_some());

    // Same input, same probabilities through the rebuilt models.
    let data = TrainingData::new(&full.manifest, SIZE, DType::F32).unwrap();
    let x = data.train.font_batch(0, DType::F32).unwrap();
    let orig = Recognizer::new(&mut full.store, &backbone(), data.n_tags()).unwrap();
    let a = orig.predict(&x).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
    let b = models.recognizer.predict(&x).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
    assert_eq!(a, b);

    let other = synthesize(&SynthConfig::standard(40, 77).with_min_count(2)).unwrap();
    assert_ne!(other.vocabulary.hash(), full.manifest.vocabulary.hash());
    assert!(matches!(
        checkpoint::load(&path, &other, DType::F32),
        Err(ModelError::VocabularyMismatch { .. })
    ));
}

#[test]
fn attention_contracts() {
    let m = corpus();
    let data = TrainingData::new(&m, SIZE, DType::F64).unwrap();
    let mut store = ParamStore::new(DType::F64, 3);
    let rec = Recognizer::new(&mut store, &backbone(), data.n_tags()).unwrap();
    let cls = FontClassifier::new(&mut store, &backbone(), data.train.len()).unwrap();
    let att = glyphtag_model::attention::AttentionModule::new(
        &mut store,
        data.train.len(),
        8,
        &AttentionConfig::default(),
    )
    .unwrap();
    let attended = AttendedRecognizer::new(&rec, &cls, &att);
    let x = data.train.batch(&[(0, 0), (1, 5), (2, 9)], DType::F64).unwrap();

    // One font-model pass per image in inference mode.
    let p = attended.predict(&x).unwrap();
    assert_eq!(attended.font_model_images(), 3);
    let v = p.flatten_all().unwrap().to_vec1::<f64>().unwrap();
    assert!(v.iter().all(|&q| q > 0.0 && q < 1.0));

    // All-ones map reproduces the plain recognizer.
    let f = rec.features(&x).unwrap();
    let ones = Tensor::ones(f.dims(), DType::F64, &Device::Cpu).unwrap();
    let a = attended.probs_with_map(&f, &ones).unwrap().to_vec2::<f64>().unwrap();
    let b = rec.predict(&x).unwrap().to_vec2::<f64>().unwrap();
    assert_eq!(a, b);

    // Training-mode output does not depend on the order of the glyph set.
    let inputs = FrozenInputs::compute(&rec, &cls, &data.train, DType::F64).unwrap();
    let pairs = [(0, 3), (1, 4)];
    let s1 = vec![vec![1, 7, 20, 40], vec![0, 2, 4, 6]];
    let s2 = vec![vec![40, 20, 7, 1], vec![6, 4, 2, 0]];
    let a = attended_probs(&rec, &att, &inputs, &pairs, Some(&s1)).unwrap().to_vec2::<f64>().unwrap();
    let b = attended_probs(&rec, &att, &inputs, &pairs, Some(&s2)).unwrap().to_vec2::<f64>().unwrap();
    for (ra, rb) in a.iter().zip(&b) {
        for (x, y) in ra.iter().zip(rb) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
