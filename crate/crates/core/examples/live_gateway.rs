//! One completion against an OpenAI-compatible endpoint, recorded to a
//! transcript that can be replayed offline afterwards.
//!
//!     LLM_API_KEY=... cargo run --example live_gateway -- https://api.openai.com/v1 gpt-4o-mini

use std::path::PathBuf;

use jvm_testgen::llm_gateway::{
    CompletionRequest, Gateway, LiveConfig, LiveGateway, Purpose, Recorder, ReplayGateway, Transcript,
};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(base_url) = args.next() else {
        eprintln!("usage: live_gateway <base-url> [model] [transcript.json]");
        eprintln!("the API key is read from LLM_API_KEY");
        return Ok(());
    };
    let model = args.next().unwrap_or_else(|| "gpt-4o-mini".into());
    let path = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("jtg-live.json"));

    let live = LiveGateway::new(LiveConfig { base_url, max_attempts: 2, ..LiveConfig::default() })?;
    let recorder = Recorder::new(live, Transcript::new(&model, "example"));
    let req = CompletionRequest::prompt(
        &model,
        "You write JUnit 4 tests.",
        "Write one JUnit 4 test method for `Math.abs(int)` with a negative input.",
        Purpose::TestGenerate,
    )
    .with_max_tokens(300);
    let resp = recorder.complete(&req)?;
    println!("{}", resp.content);
    recorder.save(&path)?;

    let replay = ReplayGateway::load(&path)?;
    assert_eq!(replay.complete(&req)?.content, resp.content);
    println!("\nrecorded to {} and replayed", path.display());
    Ok(())
}
