//! Typed syntax trees stored as preorder arenas.
//!
//! Nodes live in a flat vector in preorder with their subtree length, so
//! children, subtrees and postorder walks are index arithmetic and nothing
//! recurses on tree depth (minified bundles nest tens of thousands deep).

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::sync::OnceLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

const VOCABULARY_TSV: &str = include_str!("../../vocabulary.tsv");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("node kind `{0}` is not in the vocabulary")]
pub struct VocabularyError(pub String);

/// The frozen table of node-kind labels shipped as `vocabulary.tsv`.
#[derive(Debug)]
pub struct Vocabulary {
    kinds: Vec<&'static str>,
    index: HashMap<&'static str, u16>,
}

impl Vocabulary {
    fn parse(text: &'static str) -> Self {
        let kinds: Vec<&'static str> = text
            .lines()
            .map(str::trim)
            .filter(|line| !line.is_empty() && !line.starts_with('#'))
            .collect();
        let index = kinds
            .iter()
            .enumerate()
            .map(|(i, k)| (*k, u16::try_from(i).expect("vocabulary exceeds u16")))
            .collect();
        Self { kinds, index }
    }

    pub fn kinds(&self) -> &[&'static str] {
        &self.kinds
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn lookup(&self, name: &str) -> Result<NodeKind, VocabularyError> {
        self.index
            .get(name)
            .map(|&i| NodeKind(i))
            .ok_or_else(|| VocabularyError(name.to_string()))
    }
}

/// The process-wide node-kind vocabulary.
pub fn vocabulary() -> &'static Vocabulary {
    static VOCABULARY: OnceLock<Vocabulary> = OnceLock::new();
    VOCABULARY.get_or_init(|| Vocabulary::parse(VOCABULARY_TSV))
}

/// A node-kind label drawn from the vocabulary. Only constructible for
/// vocabulary members, so every tree is labelled from the frozen table.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeKind(u16);

impl NodeKind {
    pub fn from_name(name: &str) -> Result<Self, VocabularyError> {
        vocabulary().lookup(name)
    }

    pub fn from_index(index: u16) -> Result<Self, VocabularyError> {
        if usize::from(index) < vocabulary().len() {
            Ok(Self(index))
        } else {
            Err(VocabularyError(format!("#{index}")))
        }
    }

    pub fn name(self) -> &'static str {
        vocabulary().kinds[usize::from(self.0)]
    }

    pub fn index(self) -> u16 {
        self.0
    }
}

impl fmt::Debug for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Byte offsets `[start, end)` into the source file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: u32,
    pub end: u32,
}

impl Span {
    pub fn new(start: u32, end: u32) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl Serialize for Span {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.start, self.end].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Span {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [start, end] = <[u32; 2]>::deserialize(deserializer)?;
        Ok(Self { start, end })
    }
}

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AstNode {
    pub kind: NodeKind,
    pub span: Span,
    pub is_function_boundary: bool,
    subtree_len: u32,
}

impl AstNode {
    /// Number of nodes in the subtree rooted here, including this node.
    pub fn subtree_len(&self) -> usize {
        self.subtree_len as usize
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("tree has no root")]
    Empty,
    #[error("tree has more than one root")]
    MultipleRoots,
    #[error("unbalanced close")]
    Unbalanced,
    #[error("{0} node(s) left open")]
    Unclosed(usize),
    #[error("malformed tree expression at byte {0}")]
    Syntax(usize),
    #[error(transparent)]
    Vocabulary(#[from] VocabularyError),
}

/// An ordered, labelled tree in preorder layout. Always has a root at index 0.
#[derive(Clone, PartialEq, Eq)]
pub struct SyntaxTree {
    nodes: Vec<AstNode>,
}

impl SyntaxTree {
    pub fn leaf(kind: NodeKind, span: Span) -> Self {
        Self {
            nodes: vec![AstNode {
                kind,
                span,
                is_function_boundary: false,
                subtree_len: 1,
            }],
        }
    }

    /// Rebuilds a tree from its preorder kinds and subtree lengths.
    pub fn from_preorder(kinds: &[NodeKind], subtree_lens: &[u32]) -> Result<Self, TreeError> {
        if kinds.is_empty() {
            return Err(TreeError::Empty);
        }
        if kinds.len() != subtree_lens.len() || subtree_lens[0] as usize != kinds.len() {
            return Err(TreeError::MultipleRoots);
        }
        // Every subtree must end inside its parent's range.
        let mut open: Vec<usize> = Vec::new();
        for (i, &len) in subtree_lens.iter().enumerate() {
            while let Some(&end) = open.last() {
                if i >= end {
                    open.pop();
                } else {
                    break;
                }
            }
            let end = i + len as usize;
            if len == 0 || open.last().is_some_and(|&parent_end| end > parent_end) {
                return Err(TreeError::Unbalanced);
            }
            open.push(end);
        }
        let nodes = kinds
            .iter()
            .zip(subtree_lens)
            .map(|(&kind, &len)| AstNode {
                kind,
                span: Span::default(),
                is_function_boundary: false,
                subtree_len: len,
            })
            .collect();
        Ok(Self { nodes })
    }

    /// Parses the bracket notation produced by [`SyntaxTree::to_sexpr`],
    /// e.g. `(BinaryExpression (Identifier) (NumericLiteral))`.
    pub fn from_sexpr(text: &str) -> Result<Self, TreeError> {
        let mut builder = TreeBuilder::new();
        let bytes = text.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            match bytes[i] {
                b'(' => {
                    let start = i + 1;
                    let mut end = start;
                    while end < bytes.len() && !matches!(bytes[end], b'(' | b')' | b' ' | b'\n' | b'\t')
                    {
                        end += 1;
                    }
                    if end == start {
                        return Err(TreeError::Syntax(i));
                    }
                    let kind = NodeKind::from_name(&text[start..end])?;
                    builder.open(kind, Span::default(), false);
                    i = end;
                }
                b')' => {
                    builder.close()?;
                    i += 1;
                }
                b' ' | b'\n' | b'\t' | b'\r' => i += 1,
                _ => return Err(TreeError::Syntax(i)),
            }
        }
        builder.finish()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Always false; present for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub const fn root(&self) -> NodeId {
        0
    }

    pub fn node(&self, id: NodeId) -> &AstNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[AstNode] {
        &self.nodes
    }

    pub fn subtree_range(&self, id: NodeId) -> Range<NodeId> {
        id..id + self.nodes[id].subtree_len()
    }

    pub fn children(&self, id: NodeId) -> Children<'_> {
        Children {
            tree: self,
            next: id + 1,
            end: id + self.nodes[id].subtree_len(),
        }
    }

    /// Parent of every node; `None` for the root.
    pub fn parents(&self) -> Vec<Option<NodeId>> {
        let mut parents = vec![None; self.nodes.len()];
        for id in 0..self.nodes.len() {
            for child in self.children(id) {
                parents[child] = Some(id);
            }
        }
        parents
    }

    /// Node ids in postorder (children before parents, left to right).
    pub fn postorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        // (node, children already pushed)
        let mut stack = vec![(self.root(), false)];
        while let Some((id, expanded)) = stack.pop() {
            if expanded {
                out.push(id);
            } else {
                stack.push((id, true));
                let children: Vec<NodeId> = self.children(id).collect();
                stack.extend(children.into_iter().rev().map(|c| (c, false)));
            }
        }
        out
    }

    /// Copies the subtree rooted at `root`, dropping every descendant subtree
    /// whose root satisfies `skip`. `root` itself is never skipped.
    pub fn pruned_copy(&self, root: NodeId, mut skip: impl FnMut(NodeId) -> bool) -> SyntaxTree {
        let range = self.subtree_range(root);
        let mut out: Vec<AstNode> = Vec::new();
        // (end of the source subtree, index of the copied node)
        let mut open: Vec<(usize, usize)> = Vec::new();
        let mut id = range.start;
        while id < range.end {
            while let Some(&(end, out_idx)) = open.last() {
                if id >= end {
                    out[out_idx].subtree_len = (out.len() - out_idx) as u32;
                    open.pop();
                } else {
                    break;
                }
            }
            if id != root && skip(id) {
                id += self.nodes[id].subtree_len();
                continue;
            }
            let node = &self.nodes[id];
            open.push((id + node.subtree_len(), out.len()));
            out.push(node.clone());
            id += 1;
        }
        while let Some((_, out_idx)) = open.pop() {
            out[out_idx].subtree_len = (out.len() - out_idx) as u32;
        }
        SyntaxTree { nodes: out }
    }

    pub fn subtree(&self, root: NodeId) -> SyntaxTree {
        self.pruned_copy(root, |_| false)
    }

    pub fn set_root_kind(&mut self, kind: NodeKind) {
        self.nodes[0].kind = kind;
    }

    pub fn preorder_kinds(&self) -> Vec<NodeKind> {
        self.nodes.iter().map(|n| n.kind).collect()
    }

    pub fn subtree_lens(&self) -> Vec<u32> {
        self.nodes.iter().map(|n| n.subtree_len).collect()
    }

    /// Bracket notation: `(Kind child child ...)`.
    pub fn to_sexpr(&self) -> String {
        let mut out = String::new();
        let mut open_ends: Vec<usize> = Vec::new();
        for (id, node) in self.nodes.iter().enumerate() {
            while open_ends.last().is_some_and(|&end| id >= end) {
                out.push(')');
                open_ends.pop();
            }
            if id > 0 {
                out.push(' ');
            }
            out.push('(');
            out.push_str(node.kind.name());
            open_ends.push(id + node.subtree_len());
        }
        for _ in open_ends {
            out.push(')');
        }
        out
    }

    /// Checks the structural invariants: spans ordered and nested, children
    /// sorted by start offset.
    pub fn validate_spans(&self) -> Result<(), String> {
        for id in 0..self.nodes.len() {
            let span = self.nodes[id].span;
            if span.start > span.end {
                return Err(format!("node {id} has inverted span {span:?}"));
            }
            let mut last_start = 0;
            for child in self.children(id) {
                let child_span = self.nodes[child].span;
                if !span.contains(&child_span) {
                    return Err(format!("node {child} span {child_span:?} escapes parent {span:?}"));
                }
                if child_span.start < last_start {
                    return Err(format!("children of node {id} out of source order"));
                }
                last_start = child_span.start;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for SyntaxTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_sexpr())
    }
}

pub struct Children<'a> {
    tree: &'a SyntaxTree,
    next: NodeId,
    end: NodeId,
}

impl Iterator for Children<'_> {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        if self.next >= self.end {
            return None;
        }
        let id = self.next;
        self.next += self.tree.nodes[id].subtree_len();
        Some(id)
    }
}

/// Incremental tree construction from enter/leave events. Children are
/// ordered by span start when the tree is finished.
#[derive(Default)]
pub struct TreeBuilder {
    nodes: Vec<(AstNode, Vec<usize>)>,
    stack: Vec<usize>,
    roots: Vec<usize>,
}

impl TreeBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn open(&mut self, kind: NodeKind, span: Span, is_function_boundary: bool) {
        let id = self.nodes.len();
        self.nodes.push((
            AstNode {
                kind,
                span,
                is_function_boundary,
                subtree_len: 1,
            },
            Vec::new(),
        ));
        match self.stack.last() {
            Some(&parent) => self.nodes[parent].1.push(id),
            None => self.roots.push(id),
        }
        self.stack.push(id);
    }

    pub fn close(&mut self) -> Result<(), TreeError> {
        self.stack.pop().map(|_| ()).ok_or(TreeError::Unbalanced)
    }

    pub fn finish(mut self) -> Result<SyntaxTree, TreeError> {
        if !self.stack.is_empty() {
            return Err(TreeError::Unclosed(self.stack.len()));
        }
        let root = match self.roots.as_slice() {
            [] => return Err(TreeError::Empty),
            [root] => *root,
            _ => return Err(TreeError::MultipleRoots),
        };
        for i in 0..self.nodes.len() {
            let mut children = std::mem::take(&mut self.nodes[i].1);
            children.sort_by_key(|&c| self.nodes[c].0.span.start);
            self.nodes[i].1 = children;
        }
        // Subtree sizes: builder ids are already a preorder of the unsorted
        // tree, so a reverse sweep sees children before parents.
        let mut sizes = vec![1u32; self.nodes.len()];
        for i in (0..self.nodes.len()).rev() {
            let total: u32 = self.nodes[i].1.iter().map(|&c| sizes[c]).sum();
            sizes[i] += total;
        }
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            let (node, children) = &self.nodes[id];
            let mut node = node.clone();
            node.subtree_len = sizes[id];
            out.push(node);
            stack.extend(children.iter().rev());
        }
        Ok(SyntaxTree { nodes: out })
    }
}

/// A parsed source file.
#[derive(Clone, Debug)]
pub struct Ast {
    pub tree: SyntaxTree,
    pub source_ref: String,
}
