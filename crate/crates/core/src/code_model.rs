//! Structured class and method model of a Java project.
//!
//! Every `.java` file is parsed with tree-sitter into [`SourceClass`]
//! records (one per top-level or member type declaration). Methods carry
//! their call sites and a canonical, type-erased signature that lines up
//! with coverage-report method identifiers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use globset::{Glob, GlobSet, GlobSetBuilder};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tree_sitter::Node;

use crate::java::{self, Fragment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassKind {
    Interface,
    Abstract,
    Concrete,
    Enum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modifier {
    Public,
    Protected,
    Private,
    Static,
    Abstract,
    Final,
    Default,
    Synchronized,
    Native,
    Strictfp,
    Transient,
    Volatile,
}

impl Modifier {
    pub fn keyword(self) -> &'static str {
        match self {
            Self::Public => "public",
            Self::Protected => "protected",
            Self::Private => "private",
            Self::Static => "static",
            Self::Abstract => "abstract",
            Self::Final => "final",
            Self::Default => "default",
            Self::Synchronized => "synchronized",
            Self::Native => "native",
            Self::Strictfp => "strictfp",
            Self::Transient => "transient",
            Self::Volatile => "volatile",
        }
    }

    fn from_keyword(word: &str) -> Option<Self> {
        Some(match word {
            "public" => Self::Public,
            "protected" => Self::Protected,
            "private" => Self::Private,
            "static" => Self::Static,
            "abstract" => Self::Abstract,
            "final" => Self::Final,
            "default" => Self::Default,
            "synchronized" => Self::Synchronized,
            "native" => Self::Native,
            "strictfp" => Self::Strictfp,
            "transient" => Self::Transient,
            "volatile" => Self::Volatile,
            _ => return None,
        })
    }
}

/// One-based line and column of a construct in its source file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl Location {
    pub(crate) fn from_zero_based((line, column): java::Position) -> Self {
        Self { line: line + 1, column: column + 1 }
    }

    pub(crate) fn to_zero_based(self) -> java::Position {
        (self.line - 1, self.column - 1)
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDecl {
    pub name: String,
    pub declared_type: String,
    pub modifiers: BTreeSet<Modifier>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    /// Declared type as written, without annotations or `final`; varargs
    /// parameters end in `...`.
    pub declared_type: String,
}

/// A generic type parameter and the simple name it erases to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeParam {
    pub name: String,
    pub erasure: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InvocationRecord {
    pub callee_name: String,
    /// Receiver expression text; empty for an implicit `this` receiver.
    pub receiver_text: String,
    pub arg_count: usize,
    pub location: Location,
}

impl InvocationRecord {
    /// Name-and-arity match against a method.
    pub fn targets(&self, method: &MethodInfo) -> bool {
        self.callee_name == method.name && self.arg_count == method.params.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodInfo {
    pub name: String,
    pub modifiers: BTreeSet<Modifier>,
    pub params: Vec<Param>,
    /// Empty for constructors.
    pub return_type: String,
    /// Full declaration text, byte-identical to the source range.
    pub content: String,
    pub invocations: Vec<InvocationRecord>,
    pub signature: String,
    pub is_constructor: bool,
    pub type_params: Vec<TypeParam>,
    pub annotations: Vec<String>,
    pub start: Location,
    pub byte_range: (usize, usize),
}

impl MethodInfo {
    pub fn is_public(&self) -> bool {
        self.modifiers.contains(&Modifier::Public)
    }

    pub fn is_abstract(&self) -> bool {
        self.modifiers.contains(&Modifier::Abstract)
    }

    pub fn is_static(&self) -> bool {
        self.modifiers.contains(&Modifier::Static)
    }

    /// Declaration header up to (not including) the body, whitespace-collapsed.
    pub fn header(&self) -> String {
        let end = self.content.find('{').unwrap_or(self.content.len());
        self.content[..end].split_whitespace().collect::<Vec<_>>().join(" ").trim_end_matches(';').to_string()
    }

    pub fn has_annotation(&self, name: &str) -> bool {
        self.annotations.iter().any(|a| a == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceClass {
    pub name: String,
    pub kind: ClassKind,
    pub superclass: Option<String>,
    /// Full declaration text, byte-identical to the source range.
    pub content: String,
    pub fields: Vec<FieldDecl>,
    pub methods: Vec<MethodInfo>,
    pub package: Option<String>,
    /// `Outer$Inner` for member types, `name` for top-level ones.
    pub binary_name: String,
    pub modifiers: BTreeSet<Modifier>,
    pub is_top_level: bool,
    pub imports: Vec<String>,
    pub type_params: Vec<TypeParam>,
    pub path: PathBuf,
    pub start: Location,
    pub byte_range: (usize, usize),
}

impl SourceClass {
    pub fn is_public(&self) -> bool {
        self.modifiers.contains(&Modifier::Public)
    }

    /// `com.x.Outer$Inner`, or the binary name alone in the default package.
    pub fn qualified_name(&self) -> String {
        match &self.package {
            Some(pkg) => format!("{pkg}.{}", self.binary_name),
            None => self.binary_name.clone(),
        }
    }

    /// Whether this class can own focal methods at all.
    pub fn is_focal_class(&self) -> bool {
        self.is_top_level && self.is_public() && self.kind == ClassKind::Concrete
    }

    pub fn constructors(&self) -> impl Iterator<Item = &MethodInfo> {
        self.methods.iter().filter(|m| m.is_constructor)
    }

    pub fn method_by_signature(&self, signature: &str) -> Option<&MethodInfo> {
        self.methods.iter().find(|m| m.signature == signature)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{}:{location}: {message}", path.display())]
pub struct ParseError {
    pub path: PathBuf,
    pub location: Location,
    pub message: String,
}

/// Parses one compilation unit into its class declarations.
///
/// Any syntax error discards the whole file: a partial model would produce
/// signatures and invocation lists that silently disagree with the compiler.
pub fn parse_compilation_unit(source: &str, path: &Path) -> Result<Vec<SourceClass>, ParseError> {
    let tree = java::parse(source);
    let root = tree.root_node();
    if let Some(bad) = java::first_error(root) {
        let what = if bad.is_missing() { format!("missing `{}`", bad.kind()) } else { "syntax error".to_string() };
        return Err(ParseError {
            path: path.to_path_buf(),
            location: Location::from_zero_based((bad.start_position().row, bad.start_position().column)),
            message: what,
        });
    }

    let mut package = None;
    let mut imports = Vec::new();
    for child in java::named_children(root) {
        match child.kind() {
            "package_declaration" => {
                package = java::named_children(child)
                    .into_iter()
                    .find(|n| matches!(n.kind(), "scoped_identifier" | "identifier"))
                    .map(|n| java::text(n, source).to_string());
            }
            "import_declaration" => {
                let t = java::text(child, source);
                let t = t.trim_start_matches("import").trim_end_matches(';').trim();
                imports.push(t.split_whitespace().collect::<Vec<_>>().join(" "));
            }
            _ => {}
        }
    }

    let ctx = UnitContext { source, path, package, imports };
    let mut classes = Vec::new();
    for child in java::named_children(root) {
        if java::is_type_declaration(child.kind()) {
            collect_type(&ctx, child, None, &[], &mut classes);
        }
    }
    Ok(classes)
}

struct UnitContext<'a> {
    source: &'a str,
    path: &'a Path,
    package: Option<String>,
    imports: Vec<String>,
}

fn collect_type(
    ctx: &UnitContext<'_>,
    node: Node<'_>,
    outer_binary: Option<&str>,
    outer_type_params: &[TypeParam],
    out: &mut Vec<SourceClass>,
) {
    let src = ctx.source;
    let Some(name) = node.child_by_field_name("name").map(|n| java::text(n, src).to_string()) else {
        return;
    };
    let mut modifiers = modifiers_of(node, src);
    let in_interface = node.parent().is_some_and(|p| p.kind() == "interface_body");
    if in_interface {
        modifiers.insert(Modifier::Public);
        modifiers.insert(Modifier::Static);
    }
    let kind = match node.kind() {
        "interface_declaration" | "annotation_type_declaration" => ClassKind::Interface,
        "enum_declaration" => ClassKind::Enum,
        _ if modifiers.contains(&Modifier::Abstract) => ClassKind::Abstract,
        _ => ClassKind::Concrete,
    };
    let superclass = node
        .child_by_field_name("superclass")
        .and_then(|s| java::named_children(s).into_iter().next())
        .map(|t| java::text(t, src).to_string());
    let binary_name = match outer_binary {
        Some(outer) => format!("{outer}${name}"),
        None => name.clone(),
    };

    // Inner declarations shadow outer type variables of the same name.
    let own_type_params = type_params_of(node, src);
    let mut type_params: Vec<TypeParam> =
        outer_type_params.iter().filter(|tp| !own_type_params.iter().any(|o| o.name == tp.name)).cloned().collect();
    type_params.extend(own_type_params);

    let body = node.child_by_field_name("body");
    let members: Vec<Node<'_>> = match body {
        Some(b) => java::named_children(b)
            .into_iter()
            .flat_map(|m| if m.kind() == "enum_body_declarations" { java::named_children(m) } else { vec![m] })
            .collect(),
        None => Vec::new(),
    };

    let mut class = SourceClass {
        name,
        kind,
        superclass,
        content: java::text(node, src).to_string(),
        fields: Vec::new(),
        methods: Vec::new(),
        package: ctx.package.clone(),
        binary_name,
        modifiers,
        is_top_level: outer_binary.is_none(),
        imports: ctx.imports.clone(),
        type_params,
        path: ctx.path.to_path_buf(),
        start: Location::from_zero_based((node.start_position().row, node.start_position().column)),
        byte_range: (node.start_byte(), node.end_byte()),
    };

    let is_interface = kind == ClassKind::Interface;
    let mut nested = Vec::new();
    for member in members {
        match member.kind() {
            "field_declaration" | "constant_declaration" => {
                class.fields.extend(fields_of(member, src, is_interface));
            }
            "method_declaration" | "constructor_declaration" => {
                class.methods.push(method_of(member, src, is_interface));
            }
            k if java::is_type_declaration(k) => nested.push(member),
            _ => {}
        }
    }
    let signatures: Vec<String> = class.methods.iter().map(|m| build_signature(m, &class)).collect();
    for (m, sig) in class.methods.iter_mut().zip(signatures) {
        m.signature = sig;
    }
    let binary = class.binary_name.clone();
    let tps = class.type_params.clone();
    out.push(class);
    for n in nested {
        collect_type(ctx, n, Some(&binary), &tps, out);
    }
}

fn modifiers_of(node: Node<'_>, src: &str) -> BTreeSet<Modifier> {
    java::children(node)
        .into_iter()
        .find(|c| c.kind() == "modifiers")
        .map(|mods| {
            java::children(mods).into_iter().filter_map(|m| Modifier::from_keyword(java::text(m, src))).collect()
        })
        .unwrap_or_default()
}

fn annotations_of(node: Node<'_>, src: &str) -> Vec<String> {
    java::children(node)
        .into_iter()
        .find(|c| c.kind() == "modifiers")
        .map(|mods| {
            java::named_children(mods)
                .into_iter()
                .filter(|m| matches!(m.kind(), "marker_annotation" | "annotation"))
                .filter_map(|a| a.child_by_field_name("name"))
                .map(|n| {
                    let t = java::text(n, src);
                    t.rsplit('.').next().unwrap_or(t).to_string()
                })
                .collect()
        })
        .unwrap_or_default()
}

fn type_params_of(node: Node<'_>, src: &str) -> Vec<TypeParam> {
    let Some(tps) = node.child_by_field_name("type_parameters") else {
        return Vec::new();
    };
    java::named_children(tps)
        .into_iter()
        .filter(|n| n.kind() == "type_parameter")
        .filter_map(|tp| {
            let kids = java::named_children(tp);
            let name = kids.iter().find(|k| k.kind() == "type_identifier")?;
            let erasure = kids
                .iter()
                .find(|k| k.kind() == "type_bound")
                .and_then(|b| java::named_children(*b).into_iter().next())
                .map(|first| erase_type_text(java::text(first, src), &[]))
                .unwrap_or_else(|| "Object".to_string());
            Some(TypeParam { name: java::text(*name, src).to_string(), erasure })
        })
        .collect()
}

fn fields_of(node: Node<'_>, src: &str, in_interface: bool) -> Vec<FieldDecl> {
    let mut modifiers = modifiers_of(node, src);
    if in_interface {
        modifiers.extend([Modifier::Public, Modifier::Static, Modifier::Final]);
    }
    let declared_type = node.child_by_field_name("type").map(|t| java::text(t, src).to_string()).unwrap_or_default();
    let mut cursor = node.walk();
    node.children_by_field_name("declarator", &mut cursor)
        .filter_map(|d| d.child_by_field_name("name"))
        .map(|n| FieldDecl {
            name: java::text(n, src).to_string(),
            declared_type: declared_type.clone(),
            modifiers: modifiers.clone(),
        })
        .collect()
}

fn params_of(params: Node<'_>, src: &str) -> Vec<Param> {
    java::named_children(params)
        .into_iter()
        .filter_map(|p| match p.kind() {
            "formal_parameter" => {
                let ty = p.child_by_field_name("type")?;
                let dims = p.child_by_field_name("dimensions").map(|d| java::text(d, src)).unwrap_or("");
                Some(Param {
                    name: java::text(p.child_by_field_name("name")?, src).to_string(),
                    declared_type: format!("{}{dims}", java::text(ty, src)),
                })
            }
            "spread_parameter" => {
                let kids = java::named_children(p);
                let ty = kids.iter().find(|k| k.kind() != "modifiers" && k.kind() != "variable_declarator")?;
                let name = kids
                    .iter()
                    .find(|k| k.kind() == "variable_declarator")
                    .and_then(|d| d.child_by_field_name("name"))?;
                Some(Param {
                    name: java::text(name, src).to_string(),
                    declared_type: format!("{}...", java::text(*ty, src)),
                })
            }
            _ => None,
        })
        .collect()
}

fn method_of(node: Node<'_>, src: &str, in_interface: bool) -> MethodInfo {
    let is_constructor = node.kind() == "constructor_declaration";
    let mut modifiers = modifiers_of(node, src);
    let has_body = node.child_by_field_name("body").is_some();
    if in_interface {
        if !modifiers.contains(&Modifier::Private) {
            modifiers.insert(Modifier::Public);
        }
        if !has_body {
            modifiers.insert(Modifier::Abstract);
        }
    }
    let name = node.child_by_field_name("name").map(|n| java::text(n, src).to_string()).unwrap_or_default();
    let params = node.child_by_field_name("parameters").map(|p| params_of(p, src)).unwrap_or_default();
    let return_type = if is_constructor {
        String::new()
    } else {
        let dims = node.child_by_field_name("dimensions").map(|d| java::text(d, src)).unwrap_or("");
        node.child_by_field_name("type").map(|t| format!("{}{dims}", java::text(t, src))).unwrap_or_default()
    };
    let start = Location::from_zero_based((node.start_position().row, node.start_position().column));
    MethodInfo {
        name,
        modifiers,
        params,
        return_type,
        content: java::text(node, src).to_string(),
        invocations: invocations_in(node, src, |p| (p.row, p.column)),
        signature: String::new(),
        is_constructor,
        type_params: type_params_of(node, src),
        annotations: annotations_of(node, src),
        start,
        byte_range: (node.start_byte(), node.end_byte()),
    }
}

/// Call sites under `node` in evaluation order: receivers and arguments
/// complete before the call that consumes them.
fn invocations_in(
    node: Node<'_>,
    src: &str,
    map: impl Fn(tree_sitter::Point) -> java::Position + Copy,
) -> Vec<InvocationRecord> {
    fn visit(
        node: Node<'_>,
        src: &str,
        map: impl Fn(tree_sitter::Point) -> java::Position + Copy,
        out: &mut Vec<InvocationRecord>,
    ) {
        for child in java::children(node) {
            visit(child, src, map, out);
        }
        if node.kind() == "method_invocation" {
            let (Some(name), Some(args)) = (node.child_by_field_name("name"), node.child_by_field_name("arguments"))
            else {
                return;
            };
            out.push(InvocationRecord {
                callee_name: java::text(name, src).to_string(),
                receiver_text: node
                    .child_by_field_name("object")
                    .map(|o| java::text(o, src).to_string())
                    .unwrap_or_default(),
                arg_count: java::arg_count(args),
                location: Location::from_zero_based(map(name.start_position())),
            });
        }
    }
    let mut out = Vec::new();
    visit(node, src, map, &mut out);
    out
}

/// Re-derives the call sites of a method from its own text.
///
/// Produces the same records as the ones attached during
/// [`parse_compilation_unit`]. Unparseable content yields an empty list and a
/// logged diagnostic.
pub fn extract_invocations(m: &MethodInfo) -> Vec<InvocationRecord> {
    let frag = Fragment::member(&m.content, m.start.to_zero_based());
    if frag.has_error() {
        log::warn!("cannot parse body of `{}`; no invocations extracted", m.name);
        return Vec::new();
    }
    let Some(decl) =
        frag.content_nodes().into_iter().find(|n| matches!(n.kind(), "method_declaration" | "constructor_declaration"))
    else {
        return Vec::new();
    };
    invocations_in(decl, &frag.source, |p| frag.map_position(p))
}

/// Splits a class's methods into focal and other.
///
/// Focal: public, non-constructor, non-abstract methods of a top-level public
/// concrete class. Everything else is other, preserving declaration order.
pub fn partition_methods(cls: &SourceClass) -> (Vec<&MethodInfo>, Vec<&MethodInfo>) {
    let focal_class = cls.is_focal_class();
    cls.methods.iter().partition(|m| focal_class && m.is_public() && !m.is_constructor && !m.is_abstract())
}

/// `<package>.<BinaryClass>#<name>(<erased params>)`; constructors use `<init>`.
pub fn build_signature(m: &MethodInfo, owner: &SourceClass) -> String {
    let mut vars: Vec<TypeParam> = owner.type_params.clone();
    vars.extend(m.type_params.iter().cloned());
    let params: Vec<String> = m.params.iter().map(|p| erase_type_text(&p.declared_type, &vars)).collect();
    let name = if m.is_constructor { "<init>" } else { m.name.as_str() };
    format!("{}#{}({})", owner.qualified_name(), name, params.join(","))
}

/// Erases a declared type to the simple-name form used in signatures:
/// generic arguments dropped, qualifiers dropped, varargs as arrays, type
/// variables replaced by their bound.
pub fn erase_type_text(declared: &str, type_vars: &[TypeParam]) -> String {
    let mut base = String::new();
    let mut depth = 0usize;
    let mut chars = declared.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '<' => depth += 1,
            '>' => depth = depth.saturating_sub(1),
            '@' if depth == 0 => {
                // Skip an annotation (and its parenthesized arguments).
                while chars.peek().is_some_and(|c| c.is_alphanumeric() || *c == '.' || *c == '_') {
                    chars.next();
                }
                if chars.peek() == Some(&'(') {
                    let mut parens = 0;
                    for c in chars.by_ref() {
                        match c {
                            '(' => parens += 1,
                            ')' => {
                                parens -= 1;
                                if parens == 0 {
                                    break;
                                }
                            }
                            _ => {}
                        }
                    }
                }
            }
            _ if depth == 0 => base.push(c),
            _ => {}
        }
    }
    let base = base.replace("...", "[]");
    let compact: String = base.split_whitespace().filter(|w| *w != "final").collect();
    let dims_at = compact.find('[').unwrap_or(compact.len());
    let (ty, dims) = compact.split_at(dims_at);
    let simple = ty.rsplit('.').next().unwrap_or(ty);
    let simple = type_vars.iter().rev().find(|tv| tv.name == simple).map(|tv| tv.erasure.as_str()).unwrap_or(simple);
    format!("{simple}{dims}")
}

/// A parsed project: every class of every readable, parseable source file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Corpus {
    pub root: PathBuf,
    pub classes: Vec<SourceClass>,
    /// Files skipped because they did not parse.
    pub failures: Vec<ParseError>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScanError {
    #[error("invalid exclusion glob `{0}`: {1}")]
    BadGlob(String, globset::Error),
    #[error("cannot read {path}: {source}", path = .0.display(), source = .1)]
    Io(PathBuf, std::io::Error),
    #[error("walking {path}: {source}", path = .0.display(), source = .1)]
    Walk(PathBuf, walkdir::Error),
}

impl Corpus {
    /// Parses every `.java` file under `root` whose root-relative path does
    /// not match an exclusion glob. Files are visited in sorted path order.
    pub fn scan(root: &Path, exclude: &[String]) -> Result<Self, ScanError> {
        let excludes = build_globset(exclude)?;
        let mut paths = Vec::new();
        for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
            let entry = entry.map_err(|e| ScanError::Walk(root.to_path_buf(), e))?;
            let path = entry.path();
            if !entry.file_type().is_file() || path.extension().is_none_or(|e| e != "java") {
                continue;
            }
            let rel = path.strip_prefix(root).unwrap_or(path);
            if excludes.is_match(rel) {
                continue;
            }
            paths.push((path.to_path_buf(), rel.to_path_buf()));
        }
        let parsed: Vec<Result<Result<Vec<SourceClass>, ParseError>, ScanError>> = paths
            .par_iter()
            .map(|(abs, rel)| {
                let text = std::fs::read_to_string(abs).map_err(|e| ScanError::Io(abs.clone(), e))?;
                Ok(parse_compilation_unit(&text, rel))
            })
            .collect();
        let mut corpus = Corpus { root: root.to_path_buf(), ..Default::default() };
        for result in parsed {
            match result? {
                Ok(classes) => corpus.classes.extend(classes),
                Err(e) => {
                    log::warn!("skipping unparseable file {e}");
                    corpus.failures.push(e);
                }
            }
        }
        Ok(corpus)
    }

    pub fn from_classes(root: impl Into<PathBuf>, classes: Vec<SourceClass>) -> Self {
        Self { root: root.into(), classes, failures: Vec::new() }
    }

    /// Project label: the root directory's name.
    pub fn project_name(&self) -> String {
        self.root.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "project".to_string())
    }

    /// All focal methods, in class then declaration order.
    pub fn focal_methods(&self) -> Vec<(&SourceClass, &MethodInfo)> {
        self.classes.iter().flat_map(|c| partition_methods(c).0.into_iter().map(move |m| (c, m))).collect()
    }

    pub fn class_by_qualified_name(&self, qualified: &str) -> Option<&SourceClass> {
        self.classes.iter().find(|c| c.qualified_name() == qualified)
    }

    /// Simple name to fully-qualified names of every type declared in the
    /// project (member types as `Outer.Inner`).
    pub fn type_index(&self) -> BTreeMap<String, BTreeSet<String>> {
        let mut index: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for c in &self.classes {
            let dotted = c.binary_name.replace('$', ".");
            let fq = match &c.package {
                Some(p) => format!("{p}.{dotted}"),
                None => dotted,
            };
            index.entry(c.name.clone()).or_default().insert(fq);
        }
        index
    }
}

fn build_globset(patterns: &[String]) -> Result<GlobSet, ScanError> {
    let mut builder = GlobSetBuilder::new();
    for p in patterns {
        builder.add(Glob::new(p).map_err(|e| ScanError::BadGlob(p.clone(), e))?);
    }
    builder.build().map_err(|e| ScanError::BadGlob(patterns.join(","), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> Vec<SourceClass> {
        parse_compilation_unit(src, Path::new("T.java")).expect("fixture parses")
    }

    #[test]
    fn one_public_class_two_methods() {
        let classes = parse("package p;\npublic class A {\n  public int f() { return 1; }\n  void g() {}\n}\n");
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].methods.len(), 2);
        assert_eq!(classes[0].kind, ClassKind::Concrete);
        assert_eq!(classes[0].package.as_deref(), Some("p"));
    }

    #[test]
    fn interface_and_nested_static_class() {
        let classes = parse(
            "public interface Shape {\n  double area();\n  static class Unit { public int one() { return 1; } }\n}\n",
        );
        assert_eq!(classes.len(), 2);
        let kinds: BTreeSet<_> = classes.iter().map(|c| c.kind).collect();
        assert_eq!(kinds, BTreeSet::from([ClassKind::Interface, ClassKind::Concrete]));
        assert_eq!(classes[1].binary_name, "Shape$Unit");
        assert!(!classes[1].is_top_level);
    }

    #[test]
    fn kind_and_superclass_from_keywords() {
        let classes = parse("abstract class B extends java.util.AbstractList<String> {}\nenum E { X }\n");
        assert_eq!(classes[0].kind, ClassKind::Abstract);
        assert_eq!(classes[0].superclass.as_deref(), Some("java.util.AbstractList<String>"));
        assert_eq!(classes[1].kind, ClassKind::Enum);
    }

    #[test]
    fn syntax_error_reports_location() {
        let err = parse_compilation_unit("class A {\n  void f( {\n}\n", Path::new("Bad.java")).unwrap_err();
        assert_eq!(err.path, Path::new("Bad.java"));
        assert!(err.location.line >= 2, "{err}");
    }

    #[test]
    fn partition_follows_focal_definition() {
        let classes = parse(
            "public class A {\n  public A() {}\n  public void run() {}\n  private void helper() {}\n  protected void hook() {}\n  public static int util() { return 0; }\n}\n\
             abstract class Z { public void notFocal() {} }\n",
        );
        let (focal, other) = partition_methods(&classes[0]);
        let names: Vec<_> = focal.iter().map(|m| m.name.as_str()).collect();
        assert_eq!(names, ["run", "util"]);
        assert_eq!(other.len(), 3);
        let (focal, other) = partition_methods(&classes[1]);
        assert!(focal.is_empty());
        assert_eq!(other.len(), 1);
    }

    #[test]
    fn nested_public_class_is_never_focal() {
        let classes = parse("public class A { public static class B { public void f() {} } }");
        assert!(partition_methods(&classes[1]).0.is_empty());
    }

    #[test]
    fn invocations_in_evaluation_order() {
        let classes = parse("class A { int f() { return a.foo(b.bar()); } void g() {} }");
        let calls: Vec<_> = classes[0].methods[0].invocations.iter().map(|i| i.callee_name.as_str()).collect();
        assert_eq!(calls, ["bar", "foo"]);
        assert_eq!(classes[0].methods[0].invocations[1].receiver_text, "a");
        assert_eq!(classes[0].methods[0].invocations[1].arg_count, 1);
        assert!(classes[0].methods[1].invocations.is_empty());
    }

    #[test]
    fn extract_invocations_matches_parse_time_records() {
        let src =
            "package q;\nclass A {\n    void f(int x) {\n        helper(x, 2).go();\n        this.g();\n    }\n}\n";
        let classes = parse(src);
        let m = &classes[0].methods[0];
        assert_eq!(extract_invocations(m), m.invocations);
        assert_eq!(m.invocations[0].location, Location { line: 4, column: 9 });
        assert_eq!(m.invocations[2].receiver_text, "this");
    }

    #[test]
    fn signature_format_and_overloads() {
        let classes = parse(
            "package com.x;\npublic class Reader {\n  public int parse(String s) { return 0; }\n  void f(int a) {}\n  void f(long a) {}\n  public Reader(java.util.List<String> xs, int... more) {}\n}\n",
        );
        let sigs: Vec<_> = classes[0].methods.iter().map(|m| m.signature.as_str()).collect();
        assert_eq!(
            sigs,
            [
                "com.x.Reader#parse(String)",
                "com.x.Reader#f(int)",
                "com.x.Reader#f(long)",
                "com.x.Reader#<init>(List,int[])",
            ]
        );
    }

    #[test]
    fn generics_erase_to_bounds() {
        let classes = parse(
            "class Box<T extends Comparable<T>> {\n  <U> void put(T t, U u, Map.Entry<String, U>[] es, @Nullable final java.lang.String s) {}\n}\n",
        );
        assert_eq!(classes[0].methods[0].signature, "Box#put(Comparable,Object,Entry[],String)");
    }

    #[test]
    fn content_is_byte_identical_to_source_range() {
        let src = "package p;\n\n/** doc */\npublic class A {\n  @Override\n  public String toString() { return \"a\"; }\n}\n";
        let classes = parse(src);
        let c = &classes[0];
        assert_eq!(&src[c.byte_range.0..c.byte_range.1], c.content);
        let m = &c.methods[0];
        assert_eq!(&src[m.byte_range.0..m.byte_range.1], m.content);
        assert!(m.has_annotation("Override"));
    }

    #[test]
    fn interface_methods_are_implicitly_public_abstract() {
        let classes = parse("interface I { void f(); default int g() { return 1; } }");
        assert!(classes[0].methods[0].is_abstract());
        assert!(classes[0].methods[0].is_public());
        assert!(!classes[0].methods[1].is_abstract());
    }

    #[test]
    fn header_collapses_whitespace() {
        let classes = parse("class A {\n  public   int\n  f(int a)   { return a; }\n}");
        assert_eq!(classes[0].methods[0].header(), "public int f(int a)");
    }
}
