//! Synthetic JavaScript and tree generators shared by the integration tests.
#![allow(dead_code)]

use std::fs;
use std::path::Path;

use clonesig::clustering::Clustering;
use clonesig::corpus::{encode_package_id, extract_functions, FunctionOrigin, JavaScriptAdapter, NodeKind, SyntaxTree};
use clonesig::fingerprint::{fingerprint_function, Fingerprint, FingerprintRecord};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// A small JavaScript syntax tree that renders to source in many surface forms.

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Ident(usize),
    Num(usize),
    Str(usize),
    Bool(bool),
    Binary(usize, Box<Expr>, Box<Expr>),
    Call(Callee, Vec<Expr>),
    Member(Box<Expr>, usize),
    Array(Vec<Expr>),
    Object(Vec<(usize, Expr)>),
    Not(Box<Expr>),
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Callee {
    Func(usize),
    Method(usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    Var(usize, Expr),
    Assign(usize, Expr),
    Call(Callee, Vec<Expr>),
    If(Expr, Vec<Stmt>, Option<Vec<Stmt>>),
    While(Expr, Vec<Stmt>),
    For(usize, Expr, Vec<Stmt>),
    Return(Option<Expr>),
    Throw(Expr),
    Try(Vec<Stmt>, usize, Vec<Stmt>),
    Empty,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Function {
    pub name: usize,
    pub params: Vec<usize>,
    pub body: Vec<Stmt>,
}

const BINARY_OPS: [&str; 8] = ["+", "-", "*", "/", "%", "<", ">", "==="];

fn gen_expr(rng: &mut TestRng, depth: u32) -> Expr {
    let leaf = depth == 0 || rng.gen_bool(0.35);
    if leaf {
        return match rng.gen_range(0..4) {
            0 | 1 => Expr::Ident(rng.gen_range(0..12)),
            2 => Expr::Num(rng.gen_range(0..50)),
            _ => {
                if rng.gen_bool(0.8) {
                    Expr::Str(rng.gen_range(0..50))
                } else {
                    Expr::Bool(rng.gen())
                }
            }
        };
    }
    let d = depth - 1;
    match rng.gen_range(0..8) {
        0 | 1 => Expr::Binary(rng.gen_range(0..BINARY_OPS.len()), Box::new(gen_expr(rng, d)), Box::new(gen_expr(rng, d))),
        2 | 3 => {
            let n = rng.gen_range(0..3);
            Expr::Call(gen_callee(rng), (0..n).map(|_| gen_expr(rng, d)).collect())
        }
        4 => Expr::Member(Box::new(Expr::Ident(rng.gen_range(0..12))), rng.gen_range(0..20)),
        5 => {
            let n = rng.gen_range(0..4);
            Expr::Array((0..n).map(|_| gen_expr(rng, d)).collect())
        }
        6 => {
            let n = rng.gen_range(1..3);
            Expr::Object((0..n).map(|_| (rng.gen_range(0..20), gen_expr(rng, d))).collect())
        }
        _ => Expr::Cond(Box::new(gen_expr(rng, d)), Box::new(gen_expr(rng, d)), Box::new(gen_expr(rng, d))),
    }
}

fn gen_callee(rng: &mut TestRng) -> Callee {
    if rng.gen_bool(0.5) {
        Callee::Func(rng.gen_range(12..24))
    } else {
        Callee::Method(rng.gen_range(0..12), rng.gen_range(0..20))
    }
}

fn gen_block(rng: &mut TestRng, len: usize, depth: u32) -> Vec<Stmt> {
    (0..len).map(|_| gen_stmt(rng, depth)).collect()
}

fn gen_stmt(rng: &mut TestRng, depth: u32) -> Stmt {
    let nested = depth > 0;
    let choice = if nested { rng.gen_range(0..10) } else { rng.gen_range(0..5) };
    match choice {
        0 => Stmt::Var(rng.gen_range(0..12), gen_expr(rng, 2)),
        1 => Stmt::Assign(rng.gen_range(0..12), gen_expr(rng, 2)),
        2 | 3 => {
            let n = rng.gen_range(1..3);
            Stmt::Call(gen_callee(rng), (0..n).map(|_| gen_expr(rng, 1)).collect())
        }
        4 => Stmt::Return(rng.gen_bool(0.8).then(|| gen_expr(rng, 2))),
        5 | 6 => {
            let n = rng.gen_range(1..3);
            let else_ = rng.gen_bool(0.4).then(|| gen_block(rng, 1, depth - 1));
            Stmt::If(gen_expr(rng, 2), gen_block(rng, n, depth - 1), else_)
        }
        7 => {
            let n = rng.gen_range(1..3);
            Stmt::While(gen_expr(rng, 1), gen_block(rng, n, depth - 1))
        }
        8 => {
            let n = rng.gen_range(1..3);
            Stmt::For(rng.gen_range(0..12), gen_expr(rng, 1), gen_block(rng, n, depth - 1))
        }
        _ => {
            if rng.gen_bool(0.5) {
                Stmt::Throw(gen_expr(rng, 1))
            } else {
                Stmt::Try(gen_block(rng, 1, depth - 1), rng.gen_range(0..12), gen_block(rng, 1, depth - 1))
            }
        }
    }
}

/// A random function with `statements` top-level statements.
pub fn random_function(rng: &mut TestRng, statements: usize) -> Function {
    let params = rng.gen_range(0..4);
    let mut body = gen_block(rng, statements.saturating_sub(1), 2);
    body.push(Stmt::Return(Some(gen_expr(rng, 2))));
    Function {
        name: rng.gen_range(24..1000),
        params: (0..params).collect(),
        body,
    }
}

// ---------------------------------------------------------------------------
// Rendering.

/// Surface form: layout, comments and quoting. Never changes the tree.
#[derive(Clone, Debug)]
pub struct Style {
    pub indent: &'static str,
    pub newlines: bool,
    pub spaced: bool,
    pub double_quotes: bool,
    /// Probability of a comment before each statement.
    pub comments: f64,
    pub comment_seed: u64,
}

impl Style {
    pub fn plain() -> Self {
        Self {
            indent: "  ",
            newlines: true,
            spaced: true,
            double_quotes: false,
            comments: 0.0,
            comment_seed: 0,
        }
    }

    pub fn random(rng: &mut TestRng) -> Self {
        Self {
            indent: *["", " ", "  ", "    ", "\t"].choose(rng).unwrap(),
            newlines: rng.gen_bool(0.7),
            spaced: rng.gen(),
            double_quotes: rng.gen(),
            comments: rng.gen_range(0.0..0.6),
            comment_seed: rng.gen(),
        }
    }
}

/// Identifier and literal spelling. Two namings of one function give a
/// renamed clone with edited literal values.
#[derive(Clone, Debug)]
pub struct Naming {
    pub salt: u64,
}

const WORDS: [&str; 16] = [
    "data", "buf", "req", "opts", "cb", "node", "path", "host", "env", "key", "token", "list", "item", "ctx", "res", "val",
];

impl Naming {
    pub fn new(salt: u64) -> Self {
        Self { salt }
    }

    fn mix(&self, i: usize, k: u64) -> u64 {
        let mut x = self.salt ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ k;
        x ^= x >> 31;
        x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x ^ (x >> 29)
    }

    pub fn ident(&self, i: usize) -> String {
        format!("{}{}_{}", WORDS[(self.mix(i, 1) % 16) as usize], i, self.salt % 97)
    }

    pub fn prop(&self, i: usize) -> String {
        format!("{}{}", WORDS[(self.mix(i, 2) % 16) as usize], i)
    }

    pub fn num(&self, i: usize) -> String {
        (self.mix(i, 3) % 10_000).to_string()
    }

    pub fn string(&self, i: usize) -> String {
        format!("s{:x}", self.mix(i, 4) % 0xffff_ff)
    }
}

struct Renderer<'a> {
    style: &'a Style,
    naming: &'a Naming,
    out: String,
    comment_state: u64,
}

impl Renderer<'_> {
    fn sp(&self) -> &'static str {
        if self.style.spaced {
            " "
        } else {
            ""
        }
    }

    fn nl(&mut self, level: usize) {
        if self.style.newlines {
            self.out.push('\n');
            for _ in 0..level {
                self.out.push_str(self.style.indent);
            }
        } else {
            self.out.push(' ');
        }
    }

    fn maybe_comment(&mut self, level: usize) {
        if self.style.comments <= 0.0 {
            return;
        }
        self.comment_state = self.comment_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let roll = (self.comment_state >> 33) as f64 / (1u64 << 31) as f64;
        if roll < self.style.comments {
            if self.comment_state & 1 == 0 {
                self.out.push_str(&format!("/* note {} */", self.comment_state % 1000));
                self.nl(level);
            } else {
                self.out.push_str(&format!("// todo {}\n", self.comment_state % 1000));
                for _ in 0..level {
                    self.out.push_str(self.style.indent);
                }
            }
        }
    }

    fn expr(&mut self, e: &Expr) {
        let sp = self.sp();
        match e {
            Expr::Ident(i) => self.out.push_str(&self.naming.ident(*i)),
            Expr::Num(i) => self.out.push_str(&self.naming.num(*i)),
            Expr::Str(i) => {
                let q = if self.style.double_quotes { '"' } else { '\'' };
                self.out.push(q);
                self.out.push_str(&self.naming.string(*i));
                self.out.push(q);
            }
            Expr::Bool(b) => self.out.push_str(if *b { "true" } else { "false" }),
            Expr::Binary(op, a, b) => {
                self.sub(a);
                self.out.push_str(&format!("{sp}{}{sp}", BINARY_OPS[*op]));
                self.sub(b);
            }
            Expr::Call(callee, args) => {
                self.callee(callee);
                self.args(args);
            }
            Expr::Member(obj, p) => {
                self.sub(obj);
                self.out.push('.');
                self.out.push_str(&self.naming.prop(*p));
            }
            Expr::Array(items) => {
                self.out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        self.out.push_str(&format!(",{sp}"));
                    }
                    self.expr(item);
                }
                self.out.push(']');
            }
            Expr::Object(props) => {
                self.out.push('{');
                for (k, (p, v)) in props.iter().enumerate() {
                    if k > 0 {
                        self.out.push(',');
                    }
                    self.out.push_str(sp);
                    self.out.push_str(&self.naming.prop(*p));
                    self.out.push_str(&format!(":{sp}"));
                    self.expr(v);
                }
                self.out.push_str(sp);
                self.out.push('}');
            }
            Expr::Not(inner) => {
                self.out.push('!');
                self.sub(inner);
            }
            Expr::Cond(c, a, b) => {
                self.sub(c);
                self.out.push_str(&format!("{sp}?{sp}"));
                self.sub(a);
                self.out.push_str(&format!("{sp}:{sp}"));
                self.sub(b);
            }
        }
    }

    /// Operands are parenthesized unless primary; parentheses add no nodes.
    fn sub(&mut self, e: &Expr) {
        let primary = matches!(
            e,
            Expr::Ident(_) | Expr::Num(_) | Expr::Str(_) | Expr::Bool(_) | Expr::Call(..) | Expr::Member(..) | Expr::Array(_)
        );
        if primary {
            self.expr(e);
        } else {
            self.out.push('(');
            self.expr(e);
            self.out.push(')');
        }
    }

    fn callee(&mut self, c: &Callee) {
        match c {
            Callee::Func(i) => self.out.push_str(&self.naming.ident(*i)),
            Callee::Method(o, p) => {
                self.out.push_str(&self.naming.ident(*o));
                self.out.push('.');
                self.out.push_str(&self.naming.prop(*p));
            }
        }
    }

    fn args(&mut self, args: &[Expr]) {
        let sp = self.sp();
        self.out.push('(');
        for (k, a) in args.iter().enumerate() {
            if k > 0 {
                self.out.push_str(&format!(",{sp}"));
            }
            self.expr(a);
        }
        self.out.push(')');
    }

    fn block(&mut self, stmts: &[Stmt], level: usize) {
        self.out.push('{');
        for s in stmts {
            self.nl(level + 1);
            self.maybe_comment(level + 1);
            self.stmt(s, level + 1);
        }
        self.nl(level);
        self.out.push('}');
    }

    fn stmt(&mut self, s: &Stmt, level: usize) {
        let sp = self.sp();
        match s {
            Stmt::Var(n, e) => {
                self.out.push_str(&format!("var {}{sp}={sp}", self.naming.ident(*n)));
                self.expr(e);
                self.out.push(';');
            }
            Stmt::Assign(n, e) => {
                self.out.push_str(&format!("{}{sp}={sp}", self.naming.ident(*n)));
                self.expr(e);
                self.out.push(';');
            }
            Stmt::Call(c, args) => {
                self.callee(c);
                self.args(args);
                self.out.push(';');
            }
            Stmt::If(c, then, else_) => {
                self.out.push_str(&format!("if{sp}("));
                self.expr(c);
                self.out.push_str(&format!("){sp}"));
                self.block(then, level);
                if let Some(e) = else_ {
                    self.out.push_str(&format!("{sp}else{sp}"));
                    self.block(e, level);
                }
            }
            Stmt::While(c, body) => {
                self.out.push_str(&format!("while{sp}("));
                self.expr(c);
                self.out.push_str(&format!("){sp}"));
                self.block(body, level);
            }
            Stmt::For(v, bound, body) => {
                let v = self.naming.ident(*v);
                self.out.push_str(&format!("for{sp}(let {v}{sp}={sp}0;{sp}{v}{sp}<{sp}"));
                self.sub(bound);
                self.out.push_str(&format!(";{sp}{v}++){sp}"));
                self.block(body, level);
            }
            Stmt::Return(e) => {
                self.out.push_str("return");
                if let Some(e) = e {
                    self.out.push(' ');
                    self.expr(e);
                }
                self.out.push(';');
            }
            Stmt::Throw(e) => {
                self.out.push_str("throw ");
                self.expr(e);
                self.out.push(';');
            }
            Stmt::Try(body, v, handler) => {
                self.out.push_str(&format!("try{sp}"));
                self.block(body, level);
                self.out.push_str(&format!("{sp}catch{sp}({}){sp}", self.naming.ident(*v)));
                self.block(handler, level);
            }
            Stmt::Empty => self.out.push(';'),
        }
    }
}

pub fn render_function(f: &Function, style: &Style, naming: &Naming) -> String {
    let mut r = Renderer {
        style,
        naming,
        out: String::new(),
        comment_state: style.comment_seed,
    };
    r.maybe_comment(0);
    let sp = r.sp();
    let params: Vec<String> = f.params.iter().map(|p| naming.ident(*p)).collect();
    r.out.push_str(&format!(
        "function {}({}){sp}",
        naming.ident(f.name),
        params.join(&format!(",{sp}"))
    ));
    r.block(&f.body, 0);
    r.out.push('\n');
    r.out
}

pub fn render_file(functions: &[&Function], style: &Style, naming: &Naming) -> String {
    functions.iter().map(|f| render_function(f, style, naming)).collect::<Vec<_>>().join("\n")
}

// ---------------------------------------------------------------------------
// Single-node edits.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Edit {
    InsertArgument,
    DeleteArgument,
    InsertNot,
    DeleteNot,
    InsertEmptyStatement,
    DeleteEmptyStatement,
}

fn for_each_expr_mut(f: &mut Function, visit: &mut dyn FnMut(&mut Expr)) {
    fn expr(e: &mut Expr, visit: &mut dyn FnMut(&mut Expr)) {
        visit(e);
        match e {
            Expr::Binary(_, a, b) => {
                expr(a, visit);
                expr(b, visit);
            }
            Expr::Call(_, args) | Expr::Array(args) => args.iter_mut().for_each(|a| expr(a, visit)),
            Expr::Member(o, _) | Expr::Not(o) => expr(o, visit),
            Expr::Object(props) => props.iter_mut().for_each(|(_, v)| expr(v, visit)),
            Expr::Cond(a, b, c) => {
                expr(a, visit);
                expr(b, visit);
                expr(c, visit);
            }
            _ => {}
        }
    }
    fn stmts(ss: &mut [Stmt], visit: &mut dyn FnMut(&mut Expr)) {
        for s in ss {
            match s {
                Stmt::Var(_, e) | Stmt::Assign(_, e) | Stmt::Throw(e) | Stmt::Return(Some(e)) => expr(e, visit),
                Stmt::Call(_, args) => args.iter_mut().for_each(|a| expr(a, visit)),
                Stmt::If(c, t, e) => {
                    expr(c, visit);
                    stmts(t, visit);
                    if let Some(e) = e {
                        stmts(e, visit);
                    }
                }
                Stmt::While(c, b) | Stmt::For(_, c, b) => {
                    expr(c, visit);
                    stmts(b, visit);
                }
                Stmt::Try(a, _, b) => {
                    stmts(a, visit);
                    stmts(b, visit);
                }
                Stmt::Return(None) | Stmt::Empty => {}
            }
        }
    }
    stmts(&mut f.body, visit);
}

fn for_each_block_mut(f: &mut Function, visit: &mut dyn FnMut(&mut Vec<Stmt>)) {
    fn walk(b: &mut Vec<Stmt>, visit: &mut dyn FnMut(&mut Vec<Stmt>)) {
        visit(b);
        for s in b.iter_mut() {
            match s {
                Stmt::If(_, t, e) => {
                    walk(t, visit);
                    if let Some(e) = e {
                        walk(e, visit);
                    }
                }
                Stmt::While(_, b) | Stmt::For(_, _, b) => walk(b, visit),
                Stmt::Try(a, _, b) => {
                    walk(a, visit);
                    walk(b, visit);
                }
                _ => {}
            }
        }
    }
    walk(&mut f.body, visit);
}

fn is_leaf(e: &Expr) -> bool {
    matches!(e, Expr::Ident(_) | Expr::Num(_) | Expr::Str(_) | Expr::Bool(_))
}

/// Number of places `edit` can be applied.
fn sites(f: &Function, edit: Edit) -> usize {
    let mut g = f.clone();
    let mut n = 0;
    match edit {
        Edit::InsertArgument => for_each_expr_mut(&mut g, &mut |e| n += usize::from(matches!(e, Expr::Call(..)))),
        Edit::DeleteArgument => for_each_expr_mut(&mut g, &mut |e| {
            n += usize::from(matches!(e, Expr::Call(_, a) if a.last().is_some_and(is_leaf)))
        }),
        Edit::InsertNot => for_each_expr_mut(&mut g, &mut |_| n += 1),
        Edit::DeleteNot => for_each_expr_mut(&mut g, &mut |e| n += usize::from(matches!(e, Expr::Not(_)))),
        Edit::InsertEmptyStatement => for_each_block_mut(&mut g, &mut |_| n += 1),
        Edit::DeleteEmptyStatement => for_each_block_mut(&mut g, &mut |b| n += b.iter().filter(|s| **s == Stmt::Empty).count()),
    }
    n
}

/// Applies one edit that adds or removes exactly one syntax tree node.
pub fn single_node_edit(f: &Function, rng: &mut TestRng) -> (Function, Edit) {
    let edits = [
        Edit::InsertArgument,
        Edit::DeleteArgument,
        Edit::InsertNot,
        Edit::DeleteNot,
        Edit::InsertEmptyStatement,
        Edit::DeleteEmptyStatement,
    ];
    let applicable: Vec<(Edit, usize)> = edits.iter().map(|&e| (e, sites(f, e))).filter(|&(_, n)| n > 0).collect();
    let &(edit, count) = applicable.choose(rng).expect("InsertEmptyStatement always applies");
    let target = rng.gen_range(0..count);
    let fresh = rng.gen_range(0..12);
    let mut g = f.clone();
    let mut k = 0;
    match edit {
        Edit::InsertArgument => for_each_expr_mut(&mut g, &mut |e| {
            if let Expr::Call(_, args) = e {
                if k == target {
                    args.push(Expr::Ident(fresh));
                }
                k += 1;
            }
        }),
        Edit::DeleteArgument => for_each_expr_mut(&mut g, &mut |e| {
            if let Expr::Call(_, args) = e {
                if args.last().is_some_and(is_leaf) {
                    if k == target {
                        args.pop();
                    }
                    k += 1;
                }
            }
        }),
        Edit::InsertNot => {
            let mut done = false;
            for_each_expr_mut(&mut g, &mut |e| {
                if k == target && !done {
                    let inner = std::mem::replace(e, Expr::Bool(false));
                    *e = Expr::Not(Box::new(inner));
                    done = true;
                }
                k += 1;
            })
        }
        Edit::DeleteNot => for_each_expr_mut(&mut g, &mut |e| {
            if let Expr::Not(inner) = e {
                if k == target {
                    let inner = std::mem::replace(inner.as_mut(), Expr::Bool(false));
                    *e = inner;
                }
                k += 1;
            }
        }),
        Edit::InsertEmptyStatement => for_each_block_mut(&mut g, &mut |b| {
            if k == target {
                let at = fresh % (b.len() + 1);
                b.insert(at, Stmt::Empty);
            }
            k += 1;
        }),
        Edit::DeleteEmptyStatement => for_each_block_mut(&mut g, &mut |b| {
            for i in 0..b.len() {
                if b[i] == Stmt::Empty {
                    if k == target {
                        b.remove(i);
                        k += 1;
                        return;
                    }
                    k += 1;
                }
            }
        }),
    }
    (g, edit)
}

// ---------------------------------------------------------------------------
// Fingerprint helpers.

/// Fingerprint records of the declared functions in `src`, in source order.
pub fn function_records(src: &str) -> Vec<FingerprintRecord> {
    let ast = JavaScriptAdapter::default()
        .parse_text("gen.js", src)
        .unwrap_or_else(|e| panic!("generated source does not parse: {e}\n{src}"));
    extract_functions(&ast, "gen")
        .iter()
        .filter(|u| u.origin != FunctionOrigin::GlobalScopeDummy)
        .map(fingerprint_function)
        .collect()
}

pub fn function_fingerprints(src: &str) -> Vec<Fingerprint> {
    function_records(src).into_iter().map(|r| r.fingerprint).collect()
}

// ---------------------------------------------------------------------------
// Random labelled trees.

pub const TREE_KINDS: [&str; 3] = ["Identifier", "ThisExpression", "EmptyStatement"];

/// A random tree with `n` nodes over the first `alphabet` kinds of
/// [`TREE_KINDS`] (or the whole vocabulary when `alphabet` exceeds it).
pub fn random_tree(rng: &mut TestRng, n: usize, alphabet: usize) -> SyntaxTree {
    assert!(n >= 1);
    let kinds: Vec<NodeKind> = if alphabet <= TREE_KINDS.len() {
        TREE_KINDS[..alphabet].iter().map(|k| NodeKind::from_name(k).unwrap()).collect()
    } else {
        (0..alphabet as u16).map(|i| NodeKind::from_index(i).unwrap()).collect()
    };
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in 1..n {
        let parent = rng.gen_range(0..v);
        children[parent].push(v);
    }
    let labels: Vec<NodeKind> = (0..n).map(|_| *kinds.choose(rng).unwrap()).collect();
    let mut pre_kinds = Vec::with_capacity(n);
    let mut lens = Vec::with_capacity(n);
    fn size(v: usize, children: &[Vec<usize>]) -> u32 {
        1 + children[v].iter().map(|&c| size(c, children)).sum::<u32>()
    }
    let mut stack = vec![0usize];
    while let Some(v) = stack.pop() {
        pre_kinds.push(labels[v]);
        lens.push(size(v, &children));
        for &c in children[v].iter().rev() {
            stack.push(c);
        }
    }
    SyntaxTree::from_preorder(&pre_kinds, &lens).unwrap()
}

/// Exhaustive tree edit distance: the cheapest mapping that preserves
/// ancestry and sibling order, found by trying every such mapping.
pub fn brute_force_ted(a: &SyntaxTree, b: &SyntaxTree) -> u32 {
    let order = |t: &SyntaxTree| {
        let post = t.postorder();
        let mut rank = vec![0usize; t.len()];
        for (i, &v) in post.iter().enumerate() {
            rank[v] = i;
        }
        rank
    };
    let (pa, pb) = (order(a), order(b));
    let (n, m) = (a.len(), b.len());
    let mut best = (n + m) as u32;
    let mut mapping: Vec<(usize, usize)> = Vec::new();
    let mut used = vec![false; m];
    // Nodes of `a` are considered in preorder; preorder index is the node id.
    fn search(
        v: usize,
        a: &SyntaxTree,
        b: &SyntaxTree,
        pa: &[usize],
        pb: &[usize],
        mapping: &mut Vec<(usize, usize)>,
        used: &mut [bool],
        best: &mut u32,
    ) {
        let (n, m) = (a.len(), b.len());
        if v == n {
            let relabels = mapping.iter().filter(|&&(x, y)| a.node(x).kind != b.node(y).kind).count();
            let cost = (n - mapping.len()) + (m - mapping.len()) + relabels;
            *best = (*best).min(cost as u32);
            return;
        }
        search(v + 1, a, b, pa, pb, mapping, used, best);
        for w in 0..m {
            if used[w] {
                continue;
            }
            let ok = mapping
                .iter()
                .all(|&(x, y)| (x < v) == (y < w) && (pa[x] < pa[v]) == (pb[y] < pb[w]));
            if ok {
                used[w] = true;
                mapping.push((v, w));
                search(v + 1, a, b, pa, pb, mapping, used, best);
                mapping.pop();
                used[w] = false;
            }
        }
    }
    search(0, a, b, &pa, &pb, &mut mapping, &mut used, &mut best);
    best
}

// ---------------------------------------------------------------------------
// Planted corpora.

/// A small helper found in many popular packages.
pub const COMMON_IDIOM: &str = "function _interopRequireDefault(obj) { return obj && obj.__esModule ? obj : { default: obj }; }\n";

pub struct SyntheticPackage {
    pub id: String,
    pub files: Vec<(String, String)>,
}

impl SyntheticPackage {
    pub fn write(&self, corpus_root: &Path) {
        let dir = corpus_root.join(encode_package_id(&self.id));
        for (rel, content) in &self.files {
            let path = dir.join(rel);
            fs::create_dir_all(path.parent().unwrap()).unwrap();
            fs::write(path, content).unwrap();
        }
    }
}

pub struct PlantedCorpus {
    pub packages: Vec<SyntheticPackage>,
    /// Family payloads in their canonical form.
    pub payloads: Vec<Vec<Function>>,
    /// Planted families; filler packages are noise.
    pub truth: Clustering,
}

impl PlantedCorpus {
    pub fn write(&self, corpus_root: &Path) {
        for p in &self.packages {
            p.write(corpus_root);
        }
    }
}

/// Family sizes of the planted corpus.
pub const FAMILY_SIZES: [usize; 7] = [38, 36, 14, 3, 2, 2, 2];
pub const FILLER_PACKAGES: usize = 3;

fn filler_functions(rng: &mut TestRng, count: usize) -> Vec<Function> {
    (0..count).map(|_| {
        let n = rng.gen_range(4..8);
        random_function(rng, n)
    }).collect()
}

/// Seven clone families plus unrelated filler, 100 packages in total.
///
/// Each family shares a payload of two or three functions. Members carry the
/// payload renamed, with edited literals and in their own layout, next to
/// functions of their own. Roughly one member in five also has one payload
/// function altered by a single-node edit. Members of the first family
/// include [`COMMON_IDIOM`].
pub fn planted_corpus(seed: u64) -> PlantedCorpus {
    let mut rng = rng(seed);
    let payloads: Vec<Vec<Function>> = FAMILY_SIZES
        .iter()
        .map(|_| {
            let k = rng.gen_range(2..4);
            (0..k)
                .map(|_| {
                    let n = rng.gen_range(5..9);
                    random_function(&mut rng, n)
                })
                .collect()
        })
        .collect();
    let mut packages = Vec::new();
    let mut clusters = Vec::new();
    for (family, &size) in FAMILY_SIZES.iter().enumerate() {
        let mut members = Vec::new();
        for m in 0..size {
            let id = if m % 3 == 0 {
                format!("@fam{family}/pkg-{m}@1.0.{m}")
            } else {
                format!("fam{family}-pkg{m}@0.{m}.0")
            };
            let mut payload = payloads[family].clone();
            if m > 0 && rng.gen_bool(0.2) {
                let k = rng.gen_range(0..payload.len());
                payload[k] = single_node_edit(&payload[k], &mut rng).0;
            }
            let n = rng.gen_range(1..4);
            let own = filler_functions(&mut rng, n);
            let style = Style::random(&mut rng);
            let naming = Naming::new(rng.gen());
            let payload_refs: Vec<&Function> = payload.iter().collect();
            let own_refs: Vec<&Function> = own.iter().collect();
            let mut index = render_file(&own_refs, &style, &naming);
            if family == 0 {
                index.push('\n');
                index.push_str(COMMON_IDIOM);
            }
            let files = vec![
                ("index.js".to_string(), index),
                ("lib/payload.js".to_string(), render_file(&payload_refs, &style, &naming)),
            ];
            members.push(id.clone());
            packages.push(SyntheticPackage { id, files });
        }
        clusters.push(members);
    }
    let mut noise = Vec::new();
    for k in 0..FILLER_PACKAGES {
        let id = format!("filler-{k}@2.0.0");
        let own = filler_functions(&mut rng, 4);
        let refs: Vec<&Function> = own.iter().collect();
        let files = vec![("index.js".to_string(), render_file(&refs, &Style::random(&mut rng), &Naming::new(rng.gen())))];
        noise.push(id.clone());
        packages.push(SyntheticPackage { id, files });
    }
    packages.sort_by(|a, b| a.id.cmp(&b.id));
    PlantedCorpus {
        packages,
        payloads,
        truth: Clustering::new(clusters, noise).unwrap(),
    }
}

/// Unrelated packages; each includes [`COMMON_IDIOM`] with probability
/// `idiom_rate`.
pub fn benign_packages(seed: u64, count: usize, idiom_rate: f64) -> Vec<SyntheticPackage> {
    let mut rng = rng(seed);
    (0..count)
        .map(|k| {
            let n = rng.gen_range(1..4);
            let own = filler_functions(&mut rng, n);
            let refs: Vec<&Function> = own.iter().collect();
            let mut index = render_file(&refs, &Style::random(&mut rng), &Naming::new(rng.gen()));
            if rng.gen_bool(idiom_rate) {
                index.push_str(COMMON_IDIOM);
            }
            SyntheticPackage {
                id: format!("benign-{k:04}@1.0.0"),
                files: vec![("index.js".to_string(), index)],
            }
        })
        .collect()
}
