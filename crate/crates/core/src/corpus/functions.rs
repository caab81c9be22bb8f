use serde::{Deserialize, Serialize};

use super::tree::{Ast, AstNode, NodeId, NodeKind, Span, SyntaxTree};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionOrigin {
    DeclaredFunction,
    MemberFunction,
    GlobalScopeDummy,
}

/// One function of a source file with every nested function removed.
#[derive(Clone, Debug)]
pub struct FunctionUnit {
    pub package_id: String,
    pub source_ref: String,
    pub origin: FunctionOrigin,
    /// Span of the function in the source file (the whole file for the dummy).
    pub span: Span,
    pub tree: SyntaxTree,
}

impl FunctionUnit {
    pub fn root(&self) -> &AstNode {
        self.tree.node(self.tree.root())
    }

    pub fn node_count(&self) -> usize {
        self.tree.len()
    }
}

/// Parent kinds whose function children count as members of a class or
/// object literal.
const MEMBER_PARENTS: &[&str] = &[
    "MethodDefinition",
    "PropertyDefinition",
    "AccessorProperty",
    "ObjectProperty",
];

/// Splits a file into function units: one per function boundary node, plus
/// a global-scope dummy rooted at `Program` holding everything outside
/// functions. Units are ordered by span start, the dummy first on ties.
pub fn extract_functions(ast: &Ast, package_id: &str) -> Vec<FunctionUnit> {
    let tree = &ast.tree;
    let parents = tree.parents();
    let member_parents: Vec<NodeKind> = MEMBER_PARENTS
        .iter()
        .map(|k| NodeKind::from_name(k).expect("member parent kinds are in the vocabulary"))
        .collect();
    let is_boundary = |id: NodeId| tree.node(id).is_function_boundary;

    let mut dummy = tree.pruned_copy(tree.root(), is_boundary);
    dummy.set_root_kind(NodeKind::from_name("Program").expect("Program in vocabulary"));
    let mut units = vec![FunctionUnit {
        package_id: package_id.to_string(),
        source_ref: ast.source_ref.clone(),
        origin: FunctionOrigin::GlobalScopeDummy,
        span: tree.node(tree.root()).span,
        tree: dummy,
    }];

    for id in 0..tree.len() {
        if id == tree.root() || !is_boundary(id) {
            continue;
        }
        let origin = match parents[id] {
            Some(parent) if member_parents.contains(&tree.node(parent).kind) => {
                FunctionOrigin::MemberFunction
            }
            _ => FunctionOrigin::DeclaredFunction,
        };
        units.push(FunctionUnit {
            package_id: package_id.to_string(),
            source_ref: ast.source_ref.clone(),
            origin,
            span: tree.node(id).span,
            tree: tree.pruned_copy(id, is_boundary),
        });
    }
    units.sort_by_key(|u| (u.span.start, u.origin != FunctionOrigin::GlobalScopeDummy));
    units
}
