//! Deterministic repairs applied to model output before compiling it.

use std::collections::{BTreeMap, BTreeSet};

use tree_sitter::Node;

use crate::code_model::{Corpus, SourceClass};
use crate::java;

const JDK_TYPES: &[&str] = &[
    "java.io.BufferedReader",
    "java.io.ByteArrayInputStream",
    "java.io.ByteArrayOutputStream",
    "java.io.EOFException",
    "java.io.File",
    "java.io.FileNotFoundException",
    "java.io.IOException",
    "java.io.InputStream",
    "java.io.InputStreamReader",
    "java.io.OutputStream",
    "java.io.OutputStreamWriter",
    "java.io.PrintStream",
    "java.io.PrintWriter",
    "java.io.Reader",
    "java.io.Serializable",
    "java.io.StringReader",
    "java.io.StringWriter",
    "java.io.UncheckedIOException",
    "java.io.Writer",
    "java.lang.reflect.Field",
    "java.lang.reflect.InvocationTargetException",
    "java.lang.reflect.Method",
    "java.math.BigDecimal",
    "java.math.BigInteger",
    "java.math.RoundingMode",
    "java.net.URI",
    "java.net.URL",
    "java.nio.charset.Charset",
    "java.nio.charset.StandardCharsets",
    "java.sql.Timestamp",
    "java.text.DateFormat",
    "java.text.ParseException",
    "java.text.SimpleDateFormat",
    "java.util.AbstractMap",
    "java.util.ArrayDeque",
    "java.util.ArrayList",
    "java.util.Arrays",
    "java.util.BitSet",
    "java.util.Calendar",
    "java.util.Collection",
    "java.util.Collections",
    "java.util.Comparator",
    "java.util.ConcurrentModificationException",
    "java.util.Date",
    "java.util.Deque",
    "java.util.EnumMap",
    "java.util.EnumSet",
    "java.util.GregorianCalendar",
    "java.util.HashMap",
    "java.util.HashSet",
    "java.util.Hashtable",
    "java.util.IdentityHashMap",
    "java.util.Iterator",
    "java.util.LinkedHashMap",
    "java.util.LinkedHashSet",
    "java.util.LinkedList",
    "java.util.List",
    "java.util.ListIterator",
    "java.util.Locale",
    "java.util.Map",
    "java.util.NavigableMap",
    "java.util.NoSuchElementException",
    "java.util.Objects",
    "java.util.Optional",
    "java.util.PriorityQueue",
    "java.util.Properties",
    "java.util.Queue",
    "java.util.Random",
    "java.util.Scanner",
    "java.util.Set",
    "java.util.SortedMap",
    "java.util.SortedSet",
    "java.util.Stack",
    "java.util.StringJoiner",
    "java.util.TimeZone",
    "java.util.TreeMap",
    "java.util.TreeSet",
    "java.util.UUID",
    "java.util.Vector",
    "java.util.WeakHashMap",
    "java.util.concurrent.Callable",
    "java.util.concurrent.ConcurrentHashMap",
    "java.util.concurrent.CountDownLatch",
    "java.util.concurrent.ExecutorService",
    "java.util.concurrent.Executors",
    "java.util.concurrent.TimeUnit",
    "java.util.concurrent.atomic.AtomicBoolean",
    "java.util.concurrent.atomic.AtomicInteger",
    "java.util.concurrent.atomic.AtomicLong",
    "java.util.concurrent.atomic.AtomicReference",
    "java.util.function.BiFunction",
    "java.util.function.Consumer",
    "java.util.function.Function",
    "java.util.function.Predicate",
    "java.util.function.Supplier",
    "java.util.regex.Matcher",
    "java.util.regex.Pattern",
    "java.util.stream.Collectors",
    "java.util.stream.Stream",
];

const JUNIT_TYPES: &[&str] = &[
    "org.junit.After",
    "org.junit.AfterClass",
    "org.junit.Assert",
    "org.junit.Before",
    "org.junit.BeforeClass",
    "org.junit.ClassRule",
    "org.junit.FixMethodOrder",
    "org.junit.Ignore",
    "org.junit.Rule",
    "org.junit.Test",
    "org.junit.rules.ExpectedException",
    "org.junit.rules.TemporaryFolder",
    "org.junit.rules.Timeout",
    "org.junit.runner.RunWith",
    "org.junit.runners.MethodSorters",
];

const JAVA_LANG: &[&str] = &[
    "ArithmeticException",
    "ArrayIndexOutOfBoundsException",
    "AssertionError",
    "AutoCloseable",
    "Boolean",
    "Byte",
    "CharSequence",
    "Character",
    "Class",
    "ClassCastException",
    "ClassNotFoundException",
    "CloneNotSupportedException",
    "Cloneable",
    "Comparable",
    "Deprecated",
    "Double",
    "Enum",
    "Error",
    "Exception",
    "Float",
    "FunctionalInterface",
    "IllegalArgumentException",
    "IllegalStateException",
    "IndexOutOfBoundsException",
    "Integer",
    "InterruptedException",
    "Iterable",
    "Long",
    "Math",
    "NegativeArraySizeException",
    "NoSuchFieldException",
    "NoSuchMethodException",
    "NullPointerException",
    "Number",
    "NumberFormatException",
    "Object",
    "OutOfMemoryError",
    "Override",
    "Process",
    "ReflectiveOperationException",
    "Runnable",
    "Runtime",
    "RuntimeException",
    "SafeVarargs",
    "SecurityException",
    "Short",
    "StackOverflowError",
    "StrictMath",
    "String",
    "StringBuffer",
    "StringBuilder",
    "StringIndexOutOfBoundsException",
    "SuppressWarnings",
    "System",
    "Thread",
    "ThreadLocal",
    "Throwable",
    "UnsupportedOperationException",
    "Void",
];

const ASSERT_METHODS: &[&str] = &[
    "assertArrayEquals",
    "assertEquals",
    "assertFalse",
    "assertNotEquals",
    "assertNotNull",
    "assertNotSame",
    "assertNull",
    "assertSame",
    "assertThat",
    "assertThrows",
    "assertTrue",
    "fail",
];

const MATCHER_METHODS: &[&str] = &[
    "allOf",
    "anyOf",
    "anything",
    "both",
    "containsString",
    "either",
    "endsWith",
    "equalTo",
    "everyItem",
    "hasItem",
    "hasItems",
    "instanceOf",
    "is",
    "isA",
    "not",
    "notNullValue",
    "nullValue",
    "sameInstance",
    "startsWith",
    "theInstance",
];

const ASSERT_STATIC: &str = "org.junit.Assert";
const MATCHERS_STATIC: &str = "org.hamcrest.CoreMatchers";

/// Simple type name to candidate fully-qualified names.
#[derive(Debug, Clone, Default)]
pub struct ImportTable {
    project: BTreeMap<String, BTreeSet<String>>,
    builtin: BTreeMap<String, String>,
}

impl ImportTable {
    pub fn new(project: BTreeMap<String, BTreeSet<String>>) -> Self {
        let builtin = JDK_TYPES
            .iter()
            .chain(JUNIT_TYPES)
            .map(|fq| (fq.rsplit('.').next().expect("qualified").to_string(), fq.to_string()))
            .collect();
        Self { project, builtin }
    }

    pub fn from_corpus(corpus: &Corpus) -> Self {
        Self::new(corpus.type_index())
    }

    /// The import needed for `simple` in `package`: `Some(fq)` to import,
    /// `None` when nothing is needed or the name is unknown or ambiguous.
    fn resolve(&self, simple: &str, package: Option<&str>) -> Option<String> {
        if let Some(cands) = self.project.get(simple) {
            let same_pkg = |fq: &str| fq.rsplit_once('.').map(|(p, _)| p) == package.or(Some(""));
            if cands.iter().any(|fq| same_pkg(fq) || !fq.contains('.')) {
                return None;
            }
            if cands.len() == 1 {
                return cands.iter().next().cloned();
            }
            return None;
        }
        self.builtin.get(simple).cloned()
    }

    /// True when the project declares `simple` directly in `package`.
    fn in_package(&self, simple: &str, package: Option<&str>) -> bool {
        self.project.get(simple).is_some_and(|cands| {
            cands.iter().any(|fq| match (fq.rsplit_once('.'), package) {
                (Some((p, _)), Some(pkg)) => p == pkg,
                (None, None) => true,
                _ => false,
            })
        })
    }

    fn candidates(&self, simple: &str) -> impl Iterator<Item = &str> {
        self.project
            .get(simple)
            .into_iter()
            .flatten()
            .map(String::as_str)
            .chain(self.builtin.get(simple).map(String::as_str))
    }
}

/// Names of methods annotated `@Test`, in declaration order.
pub fn declared_test_methods(source: &str) -> Vec<String> {
    let tree = java::parse(source);
    java::descendants(tree.root_node())
        .into_iter()
        .filter(|n| n.kind() == "method_declaration")
        .filter(|m| {
            m.child_by_field_name("name").is_some()
                && java::children(*m)
                    .into_iter()
                    .filter(|c| c.kind() == "modifiers")
                    .flat_map(java::named_children)
                    .any(|a| annotation_name(a, source).is_some_and(|n| n == "Test" || n == "org.junit.Test"))
        })
        .map(|m| java::text(m.child_by_field_name("name").expect("checked"), source).to_string())
        .collect()
}

fn annotation_name<'s>(node: Node<'_>, src: &'s str) -> Option<&'s str> {
    match node.kind() {
        "marker_annotation" | "annotation" => node.child_by_field_name("name").map(|n| java::text(n, src)),
        _ => None,
    }
}

/// Applies, in order: code-fence removal, package normalization, renaming
/// of the declared test class to `test_class_name`, and missing imports.
/// Unfixable input passes through; the result is a fixed point.
pub fn apply_lightweight_fixes(code: &str, test_class_name: &str, cls: &SourceClass, table: &ImportTable) -> String {
    let code = strip_fences(code);
    let code = normalize_package(&code, cls.package.as_deref());
    let code = rename_test_class(&code, test_class_name, cls);
    add_missing_imports(&code, cls.package.as_deref(), table)
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

fn strip_fences(code: &str) -> String {
    if !code.lines().any(is_fence) {
        return code.to_string();
    }
    let mut blocks: Vec<Vec<&str>> = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in code.lines() {
        if is_fence(line) {
            match current.take() {
                Some(b) => blocks.push(b),
                None => current = Some(Vec::new()),
            }
        } else if let Some(b) = current.as_mut() {
            b.push(line);
        }
    }
    if let Some(b) = current {
        blocks.push(b);
    }
    let chosen = blocks.iter().find(|b| b.iter().any(|l| l.contains("class "))).or(blocks.first());
    match chosen {
        Some(b) => {
            let mut s = b.join("\n");
            s.push('\n');
            s
        }
        None => code.lines().filter(|l| !is_fence(l)).collect::<Vec<_>>().join("\n") + "\n",
    }
}

/// Byte ranges replaced back to front.
fn splice(src: &str, mut edits: Vec<(std::ops::Range<usize>, String)>) -> String {
    edits.sort_by_key(|(r, _)| std::cmp::Reverse(r.start));
    let mut out = src.to_string();
    for (r, text) in edits {
        out.replace_range(r, &text);
    }
    out
}

fn line_extent(src: &str, node: Node<'_>) -> std::ops::Range<usize> {
    let start = src[..node.start_byte()].rfind('\n').map(|i| i + 1).unwrap_or(0);
    let end = src[node.end_byte()..].find('\n').map(|i| node.end_byte() + i + 1).unwrap_or(src.len());
    start..end
}

fn normalize_package(code: &str, package: Option<&str>) -> String {
    let tree = java::parse(code);
    let decls: Vec<Node<'_>> =
        java::named_children(tree.root_node()).into_iter().filter(|n| n.kind() == "package_declaration").collect();
    let mut edits = Vec::new();
    for dup in decls.iter().skip(1) {
        edits.push((line_extent(code, *dup), String::new()));
    }
    let wanted = package.map(|p| format!("package {p};"));
    match (decls.first(), wanted) {
        (Some(first), Some(w)) if java::text(*first, code) != w => edits.push((first.byte_range(), w)),
        (Some(first), None) => edits.push((line_extent(code, *first), String::new())),
        (None, Some(w)) => edits.push((0..0, format!("{w}\n\n"))),
        _ => {}
    }
    if edits.is_empty() {
        code.to_string()
    } else {
        splice(code, edits)
    }
}

fn has_modifier(node: Node<'_>, src: &str, word: &str) -> bool {
    java::children(node)
        .into_iter()
        .filter(|c| c.kind() == "modifiers")
        .any(|m| java::children(m).into_iter().any(|t| java::text(t, src) == word))
}

fn rename_test_class(code: &str, target: &str, cls: &SourceClass) -> String {
    let tree = java::parse(code);
    let classes: Vec<Node<'_>> =
        java::named_children(tree.root_node()).into_iter().filter(|n| n.kind() == "class_declaration").collect();
    let Some(decl) = classes
        .iter()
        .find(|c| has_modifier(**c, code, "public"))
        .or_else(|| classes.iter().find(|c| !declared_test_methods(java::text(**c, code)).is_empty()))
        .or(classes.first())
        .copied()
    else {
        return code.to_string();
    };
    let Some(name_node) = decl.child_by_field_name("name") else { return code.to_string() };
    let old = java::text(name_node, code);
    let mut edits = Vec::new();
    if old != target {
        let clashes = old == cls.name
            || classes
                .iter()
                .filter(|c| c.id() != decl.id())
                .any(|c| c.child_by_field_name("name").is_some_and(|n| java::text(n, code) == target));
        if clashes {
            // Rename only the declaration and its constructors.
            edits.push((name_node.byte_range(), target.to_string()));
            if let Some(body) = decl.child_by_field_name("body") {
                for ctor in java::named_children(body).into_iter().filter(|n| n.kind() == "constructor_declaration") {
                    if let Some(n) = ctor.child_by_field_name("name") {
                        edits.push((n.byte_range(), target.to_string()));
                    }
                }
            }
        } else {
            for n in java::descendants(tree.root_node()) {
                if matches!(n.kind(), "identifier" | "type_identifier") && java::text(n, code) == old {
                    edits.push((n.byte_range(), target.to_string()));
                }
            }
        }
    }
    if !has_modifier(decl, code, "public") {
        let at = java::children(decl)
            .into_iter()
            .find(|c| c.kind() == "class")
            .map(|c| c.start_byte())
            .unwrap_or(decl.start_byte());
        edits.push((at..at, "public ".to_string()));
    }
    if edits.is_empty() {
        code.to_string()
    } else {
        splice(code, edits)
    }
}

struct ExistingImport {
    path: String,
    is_static: bool,
    wildcard: bool,
}

fn existing_imports(root: Node<'_>, src: &str) -> Vec<ExistingImport> {
    java::named_children(root)
        .into_iter()
        .filter(|n| n.kind() == "import_declaration")
        .map(|n| {
            let kids = java::children(n);
            let is_static = kids.iter().any(|k| k.kind() == "static");
            let wildcard = kids.iter().any(|k| k.kind() == "asterisk");
            let path = kids
                .iter()
                .find(|k| matches!(k.kind(), "scoped_identifier" | "identifier"))
                .map(|k| java::text(*k, src).to_string())
                .unwrap_or_default();
            ExistingImport { path, is_static, wildcard }
        })
        .collect()
}

/// Names a test file refers to, with the zero-based line of first use.
struct Usage<'s> {
    imports: Vec<ExistingImport>,
    types: BTreeMap<&'s str, usize>,
    assert_call: Option<(&'s str, usize)>,
    matcher_call: Option<(&'s str, usize)>,
}

fn scan_usage<'s>(root: Node<'_>, code: &'s str) -> Usage<'s> {
    let imports = existing_imports(root, code);
    let nodes = java::descendants(root);

    let mut declared: BTreeSet<&str> = BTreeSet::new();
    let mut declared_methods: BTreeSet<&str> = BTreeSet::new();
    for n in &nodes {
        let name = n.child_by_field_name("name").map(|x| java::text(x, code));
        match n.kind() {
            k if java::is_type_declaration(k) => declared.extend(name),
            "method_declaration" => declared_methods.extend(name),
            "variable_declarator" | "formal_parameter" | "catch_formal_parameter" => declared.extend(name),
            "type_parameter" => {
                if let Some(id) = java::named_children(*n).into_iter().find(|c| c.kind() == "type_identifier") {
                    declared.insert(java::text(id, code));
                }
            }
            _ => {}
        }
    }

    let mut types: BTreeMap<&str, usize> = BTreeMap::new();
    let mut assert_call = None;
    let mut matcher_call = None;
    for n in &nodes {
        if in_import_or_package(*n) {
            continue;
        }
        let mut use_name = |node: Node<'_>| {
            types.entry(java::text(node, code)).or_insert(node.start_position().row);
        };
        match n.kind() {
            "type_identifier" => {
                let trailing_scope =
                    n.parent().is_some_and(|p| p.kind() == "scoped_type_identifier" && p.named_child(0) != Some(*n));
                if !trailing_scope {
                    use_name(*n);
                }
            }
            "marker_annotation" | "annotation" => {
                if let Some(name) = n.child_by_field_name("name").filter(|x| x.kind() == "identifier") {
                    use_name(name);
                }
            }
            "method_invocation" => {
                let name = n.child_by_field_name("name").map(|x| java::text(x, code)).unwrap_or("");
                let row = n.start_position().row;
                match n.child_by_field_name("object") {
                    None if !declared_methods.contains(name) => {
                        if ASSERT_METHODS.contains(&name) {
                            assert_call.get_or_insert((name, row));
                        }
                        if MATCHER_METHODS.contains(&name) {
                            matcher_call.get_or_insert((name, row));
                        }
                    }
                    Some(obj) if obj.kind() == "identifier" => use_name(obj),
                    _ => {}
                }
            }
            "field_access" => {
                if let Some(obj) = n.child_by_field_name("object").filter(|o| o.kind() == "identifier") {
                    use_name(obj);
                }
            }
            _ => {}
        }
    }
    types.retain(|name, _| name.starts_with(|c: char| c.is_ascii_uppercase()) && !declared.contains(name));
    Usage { imports, types, assert_call, matcher_call }
}

impl Usage<'_> {
    fn imported(&self, simple: &str, table: &ImportTable) -> bool {
        self.imports.iter().filter(|i| !i.is_static).any(|i| {
            if i.wildcard {
                table.candidates(simple).any(|fq| fq.rsplit_once('.').is_some_and(|(p, _)| p == i.path))
            } else {
                i.path.rsplit('.').next() == Some(simple)
            }
        })
    }

    fn has_static(&self, class: &str, names: &[&str]) -> bool {
        self.imports.iter().filter(|i| i.is_static).any(|i| {
            (i.wildcard && i.path == class)
                || i.path.rsplit_once('.').is_some_and(|(c, n)| c == class && names.contains(&n))
        })
    }
}

/// A name the compiler would reject as `cannot find symbol`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Unresolved {
    pub name: String,
    pub is_method: bool,
    pub row: usize,
}

/// Types that are neither declared, imported, in `java.lang`, nor project
/// types of `package`; and assertion calls lacking a static import.
pub(crate) fn unresolved_symbols(code: &str, package: Option<&str>, table: &ImportTable) -> Vec<Unresolved> {
    let tree = java::parse(code);
    let usage = scan_usage(tree.root_node(), code);
    let mut out: Vec<Unresolved> = usage
        .types
        .iter()
        .filter(|(name, _)| !JAVA_LANG.contains(name) && !usage.imported(name, table))
        .filter(|(name, _)| !table.in_package(name, package))
        .map(|(name, row)| Unresolved { name: name.to_string(), is_method: false, row: *row })
        .collect();
    if let Some((name, row)) = usage.assert_call.filter(|_| !usage.has_static(ASSERT_STATIC, ASSERT_METHODS)) {
        out.push(Unresolved { name: name.to_string(), is_method: true, row });
    }
    if let Some((name, row)) = usage.matcher_call.filter(|_| !usage.has_static(MATCHERS_STATIC, MATCHER_METHODS)) {
        out.push(Unresolved { name: name.to_string(), is_method: true, row });
    }
    out.sort_by_key(|u| u.row);
    out
}

fn add_missing_imports(code: &str, package: Option<&str>, table: &ImportTable) -> String {
    let tree = java::parse(code);
    let root = tree.root_node();
    let usage = scan_usage(root, code);
    let mut new_imports: BTreeSet<String> = usage
        .types
        .keys()
        .filter(|s| !JAVA_LANG.contains(s) && !usage.imported(s, table))
        .filter_map(|s| table.resolve(s, package))
        .map(|fq| format!("import {fq};"))
        .collect();
    if usage.assert_call.is_some() && !usage.has_static(ASSERT_STATIC, ASSERT_METHODS) {
        new_imports.insert(format!("import static {ASSERT_STATIC}.*;"));
    }
    if usage.matcher_call.is_some() && !usage.has_static(MATCHERS_STATIC, MATCHER_METHODS) {
        new_imports.insert(format!("import static {MATCHERS_STATIC}.*;"));
    }
    if new_imports.is_empty() {
        return code.to_string();
    }
    let (plain, statics): (Vec<String>, Vec<String>) =
        new_imports.into_iter().partition(|i| !i.starts_with("import static"));
    let block = plain.into_iter().chain(statics).collect::<Vec<_>>().join("\n");

    let top = java::named_children(root);
    let anchor = top
        .iter()
        .rev()
        .find(|n| n.kind() == "import_declaration")
        .map(|n| (n, false))
        .or_else(|| top.iter().find(|n| n.kind() == "package_declaration").map(|n| (n, true)));
    match anchor {
        Some((node, after_package)) => {
            let at = line_extent(code, *node).end;
            let mut text = String::new();
            if at == code.len() && !code.ends_with('\n') {
                text.push('\n');
            }
            if after_package {
                text.push('\n');
            }
            text.push_str(&block);
            text.push('\n');
            splice(code, vec![(at..at, text)])
        }
        None => format!("{block}\n\n{code}"),
    }
}

fn in_import_or_package(node: Node<'_>) -> bool {
    let mut cur = node.parent();
    while let Some(p) = cur {
        if matches!(p.kind(), "import_declaration" | "package_declaration") {
            return true;
        }
        cur = p.parent();
    }
    false
}
