//! Thin layer over the tree-sitter Java grammar.
//!
//! Fragments that are not full compilation units (a lone method, a run of
//! statements) are parsed by wrapping them in a synthetic class so every
//! caller sees the same grammar. [`Fragment`] maps positions inside the
//! wrapper back to the coordinates of the original text.

use tree_sitter::{Node, Parser, Tree};

/// Zero-based line and column, as reported by tree-sitter.
pub type Position = (usize, usize);

pub fn parse(source: &str) -> Tree {
    let mut parser = Parser::new();
    parser.set_language(&tree_sitter_java::LANGUAGE.into()).expect("tree-sitter-java grammar is ABI compatible");
    parser.parse(source, None).expect("parse without a timeout or cancellation flag never yields None")
}

pub fn text<'s>(node: Node<'_>, source: &'s str) -> &'s str {
    &source[node.byte_range()]
}

/// First ERROR or MISSING node in document order, if any.
pub fn first_error(root: Node<'_>) -> Option<Node<'_>> {
    if !root.has_error() {
        return None;
    }
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if node.is_error() || node.is_missing() {
            return Some(node);
        }
        if node.has_error() {
            let mut cursor = node.walk();
            let children: Vec<_> = node.children(&mut cursor).collect();
            stack.extend(children.into_iter().rev());
        }
    }
    Some(root)
}

/// Pre-order traversal of `root` and all its descendants.
pub fn descendants(root: Node<'_>) -> Vec<Node<'_>> {
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        out.push(node);
        let mut cursor = node.walk();
        let children: Vec<_> = node.children(&mut cursor).collect();
        stack.extend(children.into_iter().rev());
    }
    out
}

/// Pre-order traversal that does not descend into nodes for which `skip`
/// returns true (the skipped node itself is still yielded).
pub fn descendants_pruned<'t>(root: Node<'t>, skip: impl Fn(Node<'t>) -> bool) -> Vec<Node<'t>> {
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        out.push(node);
        if node != root && skip(node) {
            continue;
        }
        let mut cursor = node.walk();
        let children: Vec<_> = node.children(&mut cursor).collect();
        stack.extend(children.into_iter().rev());
    }
    out
}

pub fn named_children(node: Node<'_>) -> Vec<Node<'_>> {
    let mut cursor = node.walk();
    node.named_children(&mut cursor).filter(|c| !is_comment(*c)).collect()
}

pub fn children(node: Node<'_>) -> Vec<Node<'_>> {
    let mut cursor = node.walk();
    node.children(&mut cursor).collect()
}

pub fn is_comment(node: Node<'_>) -> bool {
    matches!(node.kind(), "line_comment" | "block_comment")
}

/// Anonymous class bodies and local type declarations are separate scopes
/// for metrics and branch extraction.
pub fn is_nested_type_scope(node: Node<'_>) -> bool {
    match node.kind() {
        "class_body" => node.parent().is_some_and(|p| p.kind() == "object_creation_expression"),
        "class_declaration" | "interface_declaration" | "enum_declaration" | "record_declaration" => true,
        _ => false,
    }
}

pub fn is_type_declaration(kind: &str) -> bool {
    matches!(
        kind,
        "class_declaration"
            | "interface_declaration"
            | "enum_declaration"
            | "record_declaration"
            | "annotation_type_declaration"
    )
}

/// Number of argument expressions in an `argument_list` node.
pub fn arg_count(arguments: Node<'_>) -> usize {
    named_children(arguments).len()
}

/// How a fragment was wrapped before parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wrap {
    /// Parsed as-is.
    None,
    /// Placed inside `class __W { ... }` (member declarations).
    ClassBody,
    /// Placed inside `class __W { void __m() { ... } }` (statements).
    MethodBody,
}

const CLASS_OPEN: &str = "class __W {\n";
const METHOD_OPEN: &str = "class __W { void __m() {\n";

/// A parsed piece of Java text, possibly wrapped in synthetic scaffolding.
pub struct Fragment {
    pub source: String,
    pub tree: Tree,
    pub wrap: Wrap,
    /// Where the fragment's first byte sits in the file it came from.
    pub origin: Position,
}

impl Fragment {
    /// Parses a member declaration (method, constructor, field).
    pub fn member(text: &str, origin: Position) -> Self {
        Self::wrapped(text, Wrap::ClassBody, origin)
    }

    /// Parses a compilation unit, falling back to class-body and then
    /// method-body wrapping when the text does not parse on its own.
    pub fn best_effort(text: &str) -> Self {
        let mut fallback = None;
        for wrap in [Wrap::None, Wrap::ClassBody, Wrap::MethodBody] {
            let frag = Self::wrapped(text, wrap, (0, 0));
            if !frag.tree.root_node().has_error() {
                return frag;
            }
            fallback.get_or_insert(frag);
        }
        fallback.expect("at least one wrap was attempted")
    }

    pub fn wrapped(text: &str, wrap: Wrap, origin: Position) -> Self {
        let source = match wrap {
            Wrap::None => text.to_string(),
            Wrap::ClassBody => format!("{CLASS_OPEN}{text}\n}}\n"),
            Wrap::MethodBody => format!("{METHOD_OPEN}{text}\n}} }}\n"),
        };
        let tree = parse(&source);
        Self { source, tree, wrap, origin }
    }

    pub fn root(&self) -> Node<'_> {
        self.tree.root_node()
    }

    pub fn has_error(&self) -> bool {
        self.root().has_error()
    }

    fn prefix_len(&self) -> usize {
        match self.wrap {
            Wrap::None => 0,
            Wrap::ClassBody => CLASS_OPEN.len(),
            Wrap::MethodBody => METHOD_OPEN.len(),
        }
    }

    fn prefix_lines(&self) -> usize {
        usize::from(self.wrap != Wrap::None)
    }

    /// Byte range of the original text inside `source`.
    pub fn user_range(&self) -> std::ops::Range<usize> {
        let start = self.prefix_len();
        let len = self.source.len() - start - self.suffix_len();
        start..start + len
    }

    fn suffix_len(&self) -> usize {
        match self.wrap {
            Wrap::None => 0,
            Wrap::ClassBody => "\n}\n".len(),
            Wrap::MethodBody => "\n} }\n".len(),
        }
    }

    /// Maps a wrapper position to the original file's coordinates.
    pub fn map_position(&self, pos: tree_sitter::Point) -> Position {
        let row = pos.row.saturating_sub(self.prefix_lines());
        if row == 0 {
            (self.origin.0, self.origin.1 + pos.column)
        } else {
            (self.origin.0 + row, pos.column)
        }
    }

    pub fn text(&self, node: Node<'_>) -> &str {
        text(node, &self.source)
    }

    /// The nodes the caller actually wrote: the whole program, the wrapper
    /// class body, or the wrapper method's block.
    pub fn content_nodes(&self) -> Vec<Node<'_>> {
        let root = self.root();
        match self.wrap {
            Wrap::None => named_children(root),
            Wrap::ClassBody => self.wrapper_class_body().map(named_children).unwrap_or_default(),
            Wrap::MethodBody => self
                .wrapper_class_body()
                .and_then(|b| named_children(b).into_iter().find(|n| n.kind() == "method_declaration"))
                .and_then(|m| m.child_by_field_name("body"))
                .map(named_children)
                .unwrap_or_default(),
        }
    }

    fn wrapper_class_body(&self) -> Option<Node<'_>> {
        named_children(self.root())
            .into_iter()
            .find(|n| n.kind() == "class_declaration")
            .and_then(|c| c.child_by_field_name("body"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn member_fragment_maps_positions_back() {
        let frag = Fragment::member("void f() {\n  g();\n}", (10, 4));
        assert!(!frag.has_error());
        let call = descendants(frag.root()).into_iter().find(|n| n.kind() == "method_invocation").unwrap();
        assert_eq!(frag.map_position(call.start_position()), (11, 2));
        let method = frag.content_nodes()[0];
        assert_eq!(frag.map_position(method.start_position()), (10, 4));
        assert_eq!(&frag.source[frag.user_range()], "void f() {\n  g();\n}");
    }

    #[test]
    fn best_effort_accepts_bare_statements() {
        // The grammar admits top-level statements and methods, so no wrapping
        // is needed for either.
        let frag = Fragment::best_effort("Foo f = new Foo();\nf.run();");
        assert!(!frag.has_error());
        assert_eq!(frag.content_nodes().len(), 2);
        let member = Fragment::best_effort("@Test public void t() { f.run(); }");
        assert_eq!(member.content_nodes()[0].kind(), "method_declaration");
    }

    #[test]
    fn first_error_locates_broken_syntax() {
        let tree = parse("class A { void f( { }");
        assert!(first_error(tree.root_node()).is_some());
        let ok = parse("class A {}");
        assert!(first_error(ok.root_node()).is_none());
    }
}
