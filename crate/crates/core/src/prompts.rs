//! Prompt templates with `{{name}}` placeholders.
//!
//! The shipped templates live in `templates/` and are compiled in. A
//! directory holding files with the same names overrides them one by one.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::code_model::{ClassKind, MethodInfo, SourceClass};
use crate::llm_gateway::{estimate_tokens, CompletionRequest, Gateway, GatewayError, Message, Purpose};

/// Bumped whenever a shipped template changes meaning.
pub const TEMPLATE_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateName {
    System,
    Seed,
    SeedRepair,
    BranchIntentions,
    FunctionIntention,
    Steer,
    TestRepair,
}

impl TemplateName {
    pub const ALL: [TemplateName; 7] = [
        TemplateName::System,
        TemplateName::Seed,
        TemplateName::SeedRepair,
        TemplateName::BranchIntentions,
        TemplateName::FunctionIntention,
        TemplateName::Steer,
        TemplateName::TestRepair,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            TemplateName::System => "system.txt",
            TemplateName::Seed => "seed.txt",
            TemplateName::SeedRepair => "seed_repair.txt",
            TemplateName::BranchIntentions => "branch_intentions.txt",
            TemplateName::FunctionIntention => "function_intention.txt",
            TemplateName::Steer => "steer.txt",
            TemplateName::TestRepair => "test_repair.txt",
        }
    }

    fn builtin(self) -> &'static str {
        match self {
            TemplateName::System => include_str!("../templates/system.txt"),
            TemplateName::Seed => include_str!("../templates/seed.txt"),
            TemplateName::SeedRepair => include_str!("../templates/seed_repair.txt"),
            TemplateName::BranchIntentions => include_str!("../templates/branch_intentions.txt"),
            TemplateName::FunctionIntention => include_str!("../templates/function_intention.txt"),
            TemplateName::Steer => include_str!("../templates/steer.txt"),
            TemplateName::TestRepair => include_str!("../templates/test_repair.txt"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PromptError {
    #[error("template {template} has no value for {{{{{name}}}}}")]
    MissingValue { template: &'static str, name: String },
    #[error("template {template} has an unterminated placeholder")]
    Unterminated { template: &'static str },
    #[error("cannot read template {0}: {1}")]
    Io(String, String),
    #[error("prompt needs {needed} tokens but the budget is {budget}")]
    PromptOverflow { needed: usize, budget: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    texts: [String; 7],
}

impl Default for Templates {
    fn default() -> Self {
        Self { texts: TemplateName::ALL.map(|t| t.builtin().to_string()) }
    }
}

impl Templates {
    /// Built-in templates with any same-named files in `dir` taking over.
    pub fn load(dir: Option<&Path>) -> Result<Self, PromptError> {
        let mut t = Self::default();
        let Some(dir) = dir else { return Ok(t) };
        for (i, name) in TemplateName::ALL.iter().enumerate() {
            let path = dir.join(name.file_name());
            if path.is_file() {
                t.texts[i] = std::fs::read_to_string(&path)
                    .map_err(|e| PromptError::Io(path.display().to_string(), e.to_string()))?;
            }
        }
        Ok(t)
    }

    pub fn get(&self, name: TemplateName) -> &str {
        let i = TemplateName::ALL.iter().position(|t| *t == name).expect("listed");
        &self.texts[i]
    }

    /// `TEMPLATE_VERSION` plus a short digest of the template texts, so
    /// transcripts record exactly which prompts they answer.
    pub fn version(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.texts {
            h.update(t.as_bytes());
            h.update([0]);
        }
        format!("{TEMPLATE_VERSION}+{}", &hex::encode(h.finalize())[..12])
    }

    /// Substitutes placeholders in one pass; substituted text is never
    /// rescanned.
    pub fn render(&self, name: TemplateName, values: &[(&str, &str)]) -> Result<String, PromptError> {
        let template = self.get(name);
        let mut out = String::with_capacity(template.len());
        let mut rest = template;
        while let Some(open) = rest.find("{{") {
            out.push_str(&rest[..open]);
            let after = &rest[open + 2..];
            let close = after.find("}}").ok_or(PromptError::Unterminated { template: name.file_name() })?;
            let key = after[..close].trim();
            let value = values
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| PromptError::MissingValue { template: name.file_name(), name: key.to_string() })?;
            out.push_str(value);
            rest = &after[close + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

impl Prompt {
    pub fn tokens(&self) -> usize {
        estimate_tokens(&self.system) + estimate_tokens(&self.user)
    }
}

/// Gateway access shared by every prompting step.
pub struct LlmEnv<'a> {
    pub gateway: &'a dyn Gateway,
    pub model_id: &'a str,
    pub templates: &'a Templates,
    /// Upper bound on estimated prompt tokens.
    pub prompt_budget: usize,
    pub max_tokens: u32,
}

impl LlmEnv<'_> {
    pub fn prompt(&self, name: TemplateName, values: &[(&str, &str)]) -> Result<Prompt, PromptError> {
        Ok(Prompt {
            system: self.templates.get(TemplateName::System).trim_end().to_string(),
            user: self.templates.render(name, values)?,
        })
    }

    pub fn request(&self, prompt: &Prompt, purpose: Purpose) -> CompletionRequest {
        CompletionRequest::new(
            self.model_id,
            vec![Message::system(prompt.system.clone()), Message::user(prompt.user.clone())],
            purpose,
        )
        .expect("a user message is present")
        .with_max_tokens(self.max_tokens)
    }

    pub fn ask(&self, prompt: &Prompt, purpose: Purpose) -> Result<String, GatewayError> {
        Ok(self.gateway.complete(&self.request(prompt, purpose))?.content)
    }
}

/// Outline of a class for prompts: package, declaration line, fields,
/// constructors and static factories, without bodies.
pub fn class_context(cls: &SourceClass) -> String {
    let mut out = String::new();
    if let Some(p) = &cls.package {
        out.push_str(&format!("package {p};\n\n"));
    }
    let mods: Vec<&str> = cls.modifiers.iter().map(|m| m.keyword()).collect();
    let keyword = match cls.kind {
        ClassKind::Interface => "interface",
        ClassKind::Enum => "enum",
        ClassKind::Abstract | ClassKind::Concrete => "class",
    };
    let mut decl = mods.join(" ");
    if !decl.is_empty() {
        decl.push(' ');
    }
    decl.push_str(&format!("{keyword} {}", cls.name));
    if let Some(sup) = &cls.superclass {
        decl.push_str(&format!(" extends {sup}"));
    }
    out.push_str(&decl);
    out.push_str(" {\n");
    for f in &cls.fields {
        let mods: Vec<&str> = f.modifiers.iter().map(|m| m.keyword()).collect();
        let prefix = if mods.is_empty() { String::new() } else { format!("{} ", mods.join(" ")) };
        out.push_str(&format!("    {prefix}{} {};\n", f.declared_type, f.name));
    }
    let factory =
        |m: &&MethodInfo| m.is_static() && m.is_public() && m.return_type.split('<').next() == Some(cls.name.as_str());
    for m in cls.methods.iter().filter(|m| m.is_constructor).chain(cls.methods.iter().filter(factory)) {
        out.push_str(&format!("    {};\n", m.header()));
    }
    out.push_str("}\n");
    out
}

/// Fenced code blocks in order, each flagged when tagged `java`.
pub fn fenced_blocks(text: &str) -> Vec<(bool, String)> {
    let mut blocks: Vec<(bool, String)> = Vec::new();
    let mut current: Option<(bool, Vec<&str>)> = None;
    for line in text.lines() {
        let t = line.trim_start();
        if let Some(tag) = t.strip_prefix("```") {
            match current.take() {
                Some((java, lines)) => blocks.push((java, lines.join("\n") + "\n")),
                None => current = Some((tag.trim().eq_ignore_ascii_case("java"), Vec::new())),
            }
        } else if let Some((_, lines)) = current.as_mut() {
            lines.push(line);
        }
    }
    if let Some((java, lines)) = current {
        blocks.push((java, lines.join("\n") + "\n"));
    }
    blocks
}

/// Body of the first fenced code block, preferring one tagged `java`;
/// the whole reply when there is none.
pub fn extract_code(reply: &str) -> String {
    let blocks = fenced_blocks(reply);
    blocks
        .iter()
        .find(|(java, _)| *java)
        .or(blocks.first())
        .map(|(_, b)| b.clone())
        .unwrap_or_else(|| reply.to_string())
}

/// Default prompt budget in estimated tokens. The reference model accepts
/// 16K tokens of context; the rest is left for the reply.
pub const DEFAULT_PROMPT_BUDGET: usize = 12_000;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_substitutes_once() {
        let t = Templates::default();
        let out = t
            .render(
                TemplateName::SeedRepair,
                &[("attempt", "2"), ("focal_signature", "a.B#c()"), ("diagnostics", "{{code}}"), ("code", "X")],
            )
            .unwrap();
        assert!(out.contains("repair attempt 2"));
        assert!(out.contains("{{code}}"), "substituted values are not rescanned");
        assert!(out.contains("```java\nX\n```"));
    }

    #[test]
    fn missing_value_is_an_error() {
        let t = Templates::default();
        let err = t.render(TemplateName::Steer, &[]).unwrap_err();
        assert!(matches!(err, PromptError::MissingValue { .. }));
    }

    #[test]
    fn directory_override_and_version() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("steer.txt"), "P={{prefix}}").unwrap();
        let t = Templates::load(Some(dir.path())).unwrap();
        assert_eq!(t.render(TemplateName::Steer, &[("prefix", "p")]).unwrap(), "P=p");
        assert_eq!(t.get(TemplateName::Seed), Templates::default().get(TemplateName::Seed));
        assert_ne!(t.version(), Templates::default().version());
        assert!(Templates::default().version().starts_with("1+"));
    }

    #[test]
    fn code_extraction_prefers_java_blocks() {
        assert_eq!(extract_code("Sure:\n```text\nx\n```\n```java\nclass A {}\n```\n"), "class A {}\n");
        assert_eq!(extract_code("```\nclass B {}\n```"), "class B {}\n");
        assert_eq!(extract_code("class C {}"), "class C {}");
    }

    #[test]
    fn class_outline_lists_construction_points() {
        let src = "package p;\npublic class Box extends Base {\n  private final int size;\n  public Box(int size) { this.size = size; }\n  public static Box of(int s) { return new Box(s); }\n  public int size() { return size; }\n}\n";
        let cls = &crate::code_model::parse_compilation_unit(src, std::path::Path::new("Box.java")).unwrap()[0];
        assert_eq!(
            class_context(cls),
            "package p;\n\npublic class Box extends Base {\n    private final int size;\n    public Box(int size);\n    public static Box of(int s);\n}\n"
        );
    }

    #[test]
    fn shipped_templates_mention_their_placeholders() {
        let t = Templates::default();
        let steer = t.get(TemplateName::Steer);
        for p in ["{{prefix}}", "{{branch_intentions}}", "{{function_intention}}", "{{focal_body}}"] {
            assert!(steer.contains(p), "{p}");
        }
        assert!(t.get(TemplateName::Seed).contains("// TODO: assert here"));
    }
}
