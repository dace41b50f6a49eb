mod support;

use jvm_testgen::llm_gateway::{Recorder, ReplayGateway, Transcript};
use jvm_testgen::prompts::Templates;

use support::*;

/// Rewrites the shop transcript and golden outputs from the scripted
/// author. Run with `cargo test --test golden -- --ignored` after changing
/// prompts or the pipeline.
#[test]
#[ignore]
fn regenerate_shop_golden() {
    let recorder = Recorder::new(author(shop_corpus()), Transcript::new(MODEL, Templates::default().version()));
    let scratch = tempfile::tempdir().unwrap();
    run_shop(&recorder, scratch.path());
    let transcript = fixtures().join("shop_transcript.json");
    recorder.save(&transcript).unwrap();

    let replay = ReplayGateway::load(&transcript).unwrap();
    let golden = golden_dir();
    let _ = std::fs::remove_dir_all(&golden);
    run_shop(&replay, &golden);
    std::fs::remove_dir_all(golden.join("work")).unwrap();
}

#[test]
fn replay_matches_golden() {
    let replay = ReplayGateway::load(&fixtures().join("shop_transcript.json")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let got = run_shop(&replay, dir.path());
    let want = collect_outputs(&golden_dir());
    assert_eq!(got.keys().collect::<Vec<_>>(), want.keys().collect::<Vec<_>>());
    for (k, v) in &want {
        assert!(got[k] == *v, "{k} differs from golden");
    }
}
