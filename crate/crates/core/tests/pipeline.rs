//! Harness-level integration tests: identify / simulate / evaluate over a
//! small generated corpus, plus the condition invariants.

use ovtf::harness::{assign_talkers, cmd_evaluate, cmd_identify, cmd_simulate, Condition};
use ovtf::manifest::{load_manifest, Manifest, Split};
use ovtf::nlms::nlms_identify_and_simulate;
use ovtf::stft::FrameParams;
use ovtf::strategy::Settings;
use ovtf::synth::{generate, SynthSpec};
use ovtf::wav::read_wav;
use std::path::Path;

fn small_corpus(dir: &Path, seed: u64, talkers: usize) -> (Manifest, Settings) {
    let params = FrameParams::new(128, 5000).unwrap();
    let mut spec = SynthSpec::default_with(params);
    spec.rng_seed = seed;
    spec.num_talkers = talkers;
    spec.utterances_per_talker = 4;
    spec.utterance_length = 12_000;
    spec.phoneme_count = 3;
    let (manifest_path, _) = generate(&spec, dir).unwrap();
    let manifest = load_manifest(&manifest_path).unwrap();
    (manifest, Settings::new(params))
}

#[test]
fn matched_pipeline_produces_report() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, settings) = small_corpus(&dir.path().join("corpus"), 11, 2);
    let models = dir.path().join("models");
    let sims = dir.path().join("sims");

    for kind in ["si", "sd"] {
        let written = cmd_identify(&manifest, kind, &settings, &models).unwrap();
        assert_eq!(written.len(), 2, "one {kind} model per talker");
        cmd_simulate(
            &manifest,
            &models,
            kind,
            Condition::Matched,
            0,
            &settings,
            &sims,
        )
        .unwrap();
    }

    let report = cmd_evaluate(&manifest, &sims, &["si", "sd"], Condition::Matched, &settings)
        .unwrap();

    // 2 talkers x 2 identify utterances x 2 kinds.
    assert_eq!(report.rows.len(), 8);
    assert!(report.rows.iter().all(|r| r.lsd.is_finite() && r.mcd.is_finite()));
    assert_eq!(report.aggregates.len(), 2);
    for agg in &report.aggregates {
        let rows: Vec<f64> = report
            .rows
            .iter()
            .filter(|r| r.kind == agg.kind)
            .map(|r| r.lsd)
            .collect();
        let mean = rows.iter().sum::<f64>() / rows.len() as f64;
        assert!((agg.mean_lsd - mean).abs() < 1e-12, "aggregate recomputes from rows");
    }

    // Planted per-phoneme filters make the speech-independent model
    // provably suboptimal on the identify split.
    let sd = report.mean_lsd("matched", "sd").unwrap();
    let si = report.mean_lsd("matched", "si").unwrap();
    assert!(sd < si, "sd ({sd}) should beat si ({si}) when filters differ per phoneme");
}

#[test]
fn averaged_kinds_only_under_talker_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, settings) = small_corpus(&dir.path().join("corpus"), 3, 2);
    let models = dir.path().join("models");
    cmd_identify(&manifest, "sd-avg", &settings, &models).unwrap();

    for condition in [Condition::Matched, Condition::UtteranceMismatch] {
        let err = cmd_simulate(
            &manifest,
            &models,
            "sd-avg",
            condition,
            0,
            &settings,
            &dir.path().join("sims"),
        )
        .unwrap_err();
        assert!(err.to_string().contains("not defined"), "{err}");
    }

    cmd_simulate(
        &manifest,
        &models,
        "sd-avg",
        Condition::TalkerMismatch,
        0,
        &settings,
        &dir.path().join("sims"),
    )
    .unwrap();
}

#[test]
fn averaged_identify_needs_two_talkers() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, settings) = small_corpus(&dir.path().join("corpus"), 5, 1);
    let err = cmd_identify(&manifest, "si-avg", &settings, &dir.path().join("models"))
        .unwrap_err();
    assert!(err.to_string().contains("two talkers"), "{err}");
}

#[test]
fn matched_adaptive_equals_adaptation_output() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, settings) = small_corpus(&dir.path().join("corpus"), 17, 2);
    let models = dir.path().join("models");
    let sims = dir.path().join("sims");
    cmd_identify(&manifest, "adaptive", &settings, &models).unwrap();
    let record = cmd_simulate(
        &manifest,
        &models,
        "adaptive",
        Condition::Matched,
        0,
        &settings,
        &sims,
    )
    .unwrap();

    for sim in &record.outputs {
        let entry = manifest
            .entries
            .iter()
            .find(|u| u.talker == sim.talker && u.utterance == sim.utterance)
            .unwrap();
        assert_eq!(entry.split, Split::Identify);
        let (outer, _) = read_wav(&entry.outer).unwrap();
        let (inear, _) = read_wav(&entry.inear).unwrap();
        let direct = nlms_identify_and_simulate(&outer, &inear, &outer, &settings.nlms).unwrap();
        let (written, _) = read_wav(&sim.output).unwrap();
        assert_eq!(written.len(), direct.adaptation_output.len());
        // The persisted file is float32, so compare at that precision.
        for (w, d) in written.iter().zip(&direct.adaptation_output) {
            assert_eq!(*w, *d as f32 as f64);
        }
    }
}

#[test]
fn talker_assignment_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = small_corpus(&dir.path().join("corpus"), 23, 3);

    let a = assign_talkers(&manifest, Condition::TalkerMismatch, 9);
    let b = assign_talkers(&manifest, Condition::TalkerMismatch, 9);
    assert_eq!(a, b, "same seed, same assignment");

    let eval: Vec<&str> = manifest
        .entries
        .iter()
        .filter(|u| u.split == Split::Evaluate)
        .map(|u| u.talker.as_str())
        .collect();
    assert_eq!(a.len(), eval.len());
    for (assigned, own) in a.iter().zip(&eval) {
        assert_ne!(assigned, own, "assignment must never map a talker to itself");
    }

    // Non-mismatch conditions keep the identity assignment.
    let matched = assign_talkers(&manifest, Condition::Matched, 9);
    let identify: Vec<&str> = manifest
        .entries
        .iter()
        .filter(|u| u.split == Split::Identify)
        .map(|u| u.talker.as_str())
        .collect();
    assert_eq!(matched, identify);
}

#[test]
fn evaluate_rejects_missing_simulations() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, settings) = small_corpus(&dir.path().join("corpus"), 29, 2);
    let err = cmd_evaluate(
        &manifest,
        &dir.path().join("empty"),
        &["sd"],
        Condition::Matched,
        &settings,
    )
    .unwrap_err();
    assert!(!err.to_string().is_empty());
}
