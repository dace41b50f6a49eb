//! Builds the steer prompt for one method without a model: branch points
//! get mechanical intentions and the prefix is the template seed.

use std::path::Path;

use jvm_testgen::branch_steer::{
    assemble_steer_prompt, extract_branch_points, mechanical_intention, parse_function_intention, BranchIntention,
};
use jvm_testgen::code_model::parse_compilation_unit;
use jvm_testgen::llm_gateway::StubGateway;
use jvm_testgen::prompts::{LlmEnv, Templates, DEFAULT_PROMPT_BUDGET};
use jvm_testgen::seed_miner::template_prefix;

const SOURCE: &str = r#"package demo;

public class Grader {
    public String grade(int score, boolean curve) {
        if (curve) {
            score += 5;
        }
        if (score < 0 || score > 100) {
            throw new IllegalArgumentException("score " + score);
        }
        for (int cut : new int[] {90, 80, 70}) {
            if (score >= cut) {
                return String.valueOf((char) ('A' + (90 - cut) / 10));
            }
        }
        return "F";
    }
}
"#;

fn main() -> anyhow::Result<()> {
    let cls = parse_compilation_unit(SOURCE, Path::new("demo/Grader.java"))?.remove(0);
    let focal = &cls.methods[0];

    let intentions: Vec<BranchIntention> = extract_branch_points(focal)
        .into_iter()
        .map(|p| BranchIntention { description: mechanical_intention(&p), branch: p })
        .collect();
    for b in &intentions {
        println!("line {:>2} {:?}: {}", b.branch.location.line, b.branch.kind, b.description);
    }

    let func = parse_function_intention(
        "Purpose: maps a numeric score to a letter grade.\nCorner cases: scores outside 0..100 are rejected.",
        focal,
    );
    let prefix = template_prefix(focal, &cls, &[], "Grader_grade_Test");
    let templates = Templates::default();
    let offline = StubGateway::sequence(Vec::<String>::new());
    let llm = LlmEnv {
        gateway: &offline,
        model_id: "none",
        templates: &templates,
        prompt_budget: DEFAULT_PROMPT_BUDGET,
        max_tokens: 0,
    };
    let steer = assemble_steer_prompt(&llm, focal, &prefix, &intentions, &func, "Grader_grade_Test")?;
    println!("\n{} intention(s) kept, {} dropped\n", steer.branch_intentions.len(), steer.dropped_intentions);
    println!("{}", steer.rendered);
    Ok(())
}
