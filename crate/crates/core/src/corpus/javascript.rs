//! JavaScript parser adapter backed by the oxc parser.
//!
//! oxc's node kinds are mapped onto the frozen vocabulary: all identifier
//! flavours become `Identifier`, the three member-expression flavours become
//! `MemberExpression`, and functions split into `FunctionDeclaration` /
//! `FunctionExpression`. Everything else keeps its oxc name. Parentheses are
//! not preserved, matching ESTree parsers.

use std::sync::atomic::{AtomicU32, Ordering};

use oxc_allocator::Allocator;
use oxc_ast::ast::FunctionType;
use oxc_ast::{AstKind, AstType};
use oxc_ast_visit::Visit;
use oxc_parser::{ParseOptions, Parser};
use oxc_span::{GetSpan, SourceType};

use super::tree::{Ast, NodeKind, Span, TreeBuilder};
use super::{ParseError, ParserAdapter, SourceFile};

pub const DEFAULT_EXTENSIONS: &[&str] = &["js", "mjs", "cjs"];

/// Highest oxc kind that can appear in plain JavaScript / JSX sources;
/// everything above it is TypeScript-only.
const LAST_JS_KIND: u8 = AstType::JSXText as u8;

#[derive(Clone, Debug)]
pub struct JavaScriptAdapter {
    extensions: Vec<String>,
}

impl Default for JavaScriptAdapter {
    fn default() -> Self {
        Self::with_extensions(DEFAULT_EXTENSIONS.iter().copied())
    }
}

impl JavaScriptAdapter {
    pub fn with_extensions<I, S>(extensions: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            extensions: extensions
                .into_iter()
                .map(|e| e.as_ref().trim_start_matches('.').to_ascii_lowercase())
                .collect(),
        }
    }

    pub fn extensions(&self) -> &[String] {
        &self.extensions
    }

    /// Parses source text directly; `source_ref` only labels errors and the result.
    pub fn parse_text(&self, source_ref: &str, text: &str) -> Result<Ast, ParseError> {
        let primary = source_type_for(source_ref);
        match parse_with(source_ref, text, primary) {
            Ok(ast) => Ok(ast),
            // CommonJS files often use sloppy-mode syntax that module parsing rejects.
            Err(first) if primary.is_module() => {
                parse_with(source_ref, text, SourceType::cjs().with_jsx(true)).map_err(|_| first)
            }
            Err(err) => Err(err),
        }
    }
}

impl ParserAdapter for JavaScriptAdapter {
    fn name(&self) -> &'static str {
        "javascript"
    }

    fn accepts(&self, relative_path: &str) -> bool {
        let Some((_, ext)) = relative_path.rsplit_once('.') else {
            return false;
        };
        self.extensions.iter().any(|e| e.eq_ignore_ascii_case(ext))
    }

    fn parse(&self, file: &SourceFile) -> Result<Ast, ParseError> {
        self.parse_text(&file.relative_path, &file.content)
    }
}

fn source_type_for(path: &str) -> SourceType {
    if path.ends_with(".cjs") {
        SourceType::cjs()
    } else if path.ends_with(".mjs") {
        SourceType::mjs()
    } else {
        SourceType::mjs().with_jsx(true)
    }
}

fn parse_with(source_ref: &str, text: &str, source_type: SourceType) -> Result<Ast, ParseError> {
    let allocator = Allocator::default();
    let options = ParseOptions {
        preserve_parens: false,
        ..ParseOptions::default()
    };
    let ret = Parser::new(&allocator, text, source_type)
        .with_options(options)
        .parse();
    if let Some(diag) = ret.diagnostics.errors().next() {
        let offset = diag.labels.first().map_or(0, |l| l.offset());
        return Err(ParseError::at(source_ref, text, offset, diag.message.to_string()));
    }
    if ret.fatal_error {
        return Err(ParseError::at(source_ref, text, 0, "parser aborted".to_string()));
    }
    let mut collector = Collector {
        builder: TreeBuilder::new(),
        error: None,
        source_ref,
        text,
    };
    collector.visit_program(&ret.program);
    if let Some(err) = collector.error {
        return Err(err);
    }
    let tree = collector
        .builder
        .finish()
        .map_err(|e| ParseError::at(source_ref, text, 0, e.to_string()))?;
    Ok(Ast {
        tree,
        source_ref: source_ref.to_string(),
    })
}

struct Collector<'s> {
    builder: TreeBuilder,
    error: Option<ParseError>,
    source_ref: &'s str,
    text: &'s str,
}

impl<'a> Visit<'a> for Collector<'_> {
    fn enter_node(&mut self, kind: AstKind<'a>) {
        let span = kind.span();
        let label = match label_of(&kind) {
            Some(label) => label,
            None => {
                if self.error.is_none() {
                    self.error = Some(ParseError::at(
                        self.source_ref,
                        self.text,
                        span.start,
                        format!("unsupported node kind {:?}", kind.ty()),
                    ));
                }
                // Keep the event stream balanced; the tree is discarded.
                NodeKind::from_name("Program").expect("Program in vocabulary")
            }
        };
        let boundary = matches!(kind, AstKind::Function(_) | AstKind::ArrowFunctionExpression(_));
        self.builder.open(label, Span::new(span.start, span.end), boundary);
    }

    fn leave_node(&mut self, _kind: AstKind<'a>) {
        // Balanced by construction: every leave follows its enter.
        let _ = self.builder.close();
    }
}

/// Maps an oxc node onto the vocabulary.
fn label_of(kind: &AstKind<'_>) -> Option<NodeKind> {
    let name = match kind {
        AstKind::Function(f) => match f.r#type {
            FunctionType::FunctionDeclaration => "FunctionDeclaration",
            _ => "FunctionExpression",
        },
        AstKind::IdentifierName(_)
        | AstKind::IdentifierReference(_)
        | AstKind::BindingIdentifier(_)
        | AstKind::LabelIdentifier(_) => "Identifier",
        AstKind::ComputedMemberExpression(_)
        | AstKind::StaticMemberExpression(_)
        | AstKind::PrivateFieldExpression(_) => "MemberExpression",
        _ => return cached_kind(kind.ty()),
    };
    NodeKind::from_name(name).ok()
}

const UNSET: u32 = u32::MAX;
const ABSENT: u32 = u32::MAX - 1;

/// Lookup table from oxc kind discriminant to vocabulary index, filled lazily.
fn cached_kind(ty: AstType) -> Option<NodeKind> {
    static CACHE: [AtomicU32; 256] = [const { AtomicU32::new(UNSET) }; 256];
    let slot = &CACHE[ty as u8 as usize];
    match slot.load(Ordering::Relaxed) {
        ABSENT => None,
        UNSET => {
            let resolved = if ty as u8 <= LAST_JS_KIND {
                NodeKind::from_name(&format!("{ty:?}")).ok()
            } else {
                None
            };
            slot.store(resolved.map_or(ABSENT, |k| u32::from(k.index())), Ordering::Relaxed);
            resolved
        }
        index => NodeKind::from_index(index as u16).ok(),
    }
}
