//! Package ingestion, parsing and function extraction.
//!
//! A corpus on disk is a directory with one subdirectory per package:
//! `<corpus_root>/<package_id>/...`. Package ids containing path separators
//! (npm scopes such as `@scope/name`) are percent-encoded in the directory
//! name.

mod functions;
mod javascript;
mod tree;

use std::fs;
use std::path::{Path, PathBuf};

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};
use thiserror::Error;
use walkdir::WalkDir;

use crate::Diagnostic;

pub use functions::{extract_functions, FunctionOrigin, FunctionUnit};
pub use javascript::{JavaScriptAdapter, DEFAULT_EXTENSIONS};
pub use tree::{
    vocabulary, Ast, AstNode, Children, NodeId, NodeKind, Span, SyntaxTree, TreeBuilder, TreeError,
    Vocabulary, VocabularyError,
};

pub const DEFAULT_MAX_FILE_BYTES: u64 = 5 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} is not a directory")]
    NotADirectory(PathBuf),
    #[error("package {id} at {path} has no accepted source files")]
    EmptyPackage { id: String, path: PathBuf },
    #[error("package id must not be empty ({0})")]
    EmptyId(PathBuf),
}

/// A syntax error in one source file.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{path}:{line}:{column}: {message}")]
pub struct ParseError {
    pub path: String,
    pub offset: u32,
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl ParseError {
    pub fn at(path: &str, text: &str, offset: u32, message: String) -> Self {
        let prefix = &text.as_bytes()[..(offset as usize).min(text.len())];
        let line = prefix.iter().filter(|&&b| b == b'\n').count() as u32 + 1;
        let line_start = prefix.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
        Self {
            path: path.to_string(),
            offset,
            line,
            column: (prefix.len() - line_start) as u32 + 1,
            message,
        }
    }
}

/// Turns source files into typed syntax trees over the shared vocabulary.
pub trait ParserAdapter: Send + Sync {
    fn name(&self) -> &'static str;
    /// Extension filter applied at ingest.
    fn accepts(&self, relative_path: &str) -> bool;
    fn parse(&self, file: &SourceFile) -> Result<Ast, ParseError>;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceFile {
    /// Forward-slash path relative to the package root.
    pub relative_path: String,
    /// File content, lossily decoded as UTF-8.
    pub content: String,
}

#[derive(Clone, Debug)]
pub struct Package {
    pub id: String,
    pub root_path: PathBuf,
    /// Accepted source files sorted by relative path.
    pub files: Vec<SourceFile>,
    /// Files skipped for size or I/O problems.
    pub diagnostics: Vec<Diagnostic>,
}

/// Reads every accepted source file below `path`.
pub fn ingest_package(
    path: &Path,
    id: &str,
    adapter: &dyn ParserAdapter,
    max_file_bytes: u64,
) -> Result<Package, CorpusError> {
    if id.is_empty() {
        return Err(CorpusError::EmptyId(path.to_path_buf()));
    }
    let meta = fs::metadata(path).map_err(|source| CorpusError::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    if !meta.is_dir() {
        return Err(CorpusError::NotADirectory(path.to_path_buf()));
    }

    let mut files = Vec::new();
    let mut diagnostics = Vec::new();
    for entry in WalkDir::new(path).sort_by_file_name() {
        let entry = match entry {
            Ok(entry) => entry,
            Err(err) => {
                if err.depth() == 0 {
                    return Err(CorpusError::Unreadable {
                        path: path.to_path_buf(),
                        source: err.into(),
                    });
                }
                diagnostics.push(Diagnostic::new(id, err.to_string()));
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let Some(relative_path) = relative_forward_slash(path, entry.path()) else {
            continue;
        };
        if !adapter.accepts(&relative_path) {
            continue;
        }
        let size = entry.metadata().map(|m| m.len()).unwrap_or(0);
        if size > max_file_bytes {
            diagnostics.push(Diagnostic::new(
                format!("{id}/{relative_path}"),
                format!("skipped: {size} bytes exceeds the {max_file_bytes}-byte cap"),
            ));
            continue;
        }
        match fs::read(entry.path()) {
            Ok(bytes) => files.push(SourceFile {
                relative_path,
                content: String::from_utf8_lossy(&bytes).into_owned(),
            }),
            Err(err) => diagnostics.push(Diagnostic::new(format!("{id}/{relative_path}"), err.to_string())),
        }
    }
    if files.is_empty() {
        return Err(CorpusError::EmptyPackage {
            id: id.to_string(),
            path: path.to_path_buf(),
        });
    }
    files.sort_by(|a, b| a.relative_path.cmp(&b.relative_path));
    Ok(Package {
        id: id.to_string(),
        root_path: path.to_path_buf(),
        files,
        diagnostics,
    })
}

fn relative_forward_slash(root: &Path, path: &Path) -> Option<String> {
    let rel = path.strip_prefix(root).ok()?;
    let parts: Option<Vec<&str>> = rel
        .components()
        .map(|c| match c {
            std::path::Component::Normal(s) => s.to_str(),
            _ => None,
        })
        .collect();
    Some(parts?.join("/"))
}

const PACKAGE_DIR_ESCAPES: &AsciiSet = &CONTROLS.add(b'/').add(b'\\').add(b'%');

/// Directory name for a package id inside a corpus root.
pub fn encode_package_id(id: &str) -> String {
    utf8_percent_encode(id, PACKAGE_DIR_ESCAPES).to_string()
}

pub fn decode_package_dir(name: &str) -> String {
    percent_decode_str(name).decode_utf8_lossy().into_owned()
}

/// Package directories of a corpus as `(package_id, path)`, sorted by id.
pub fn list_packages(corpus_root: &Path) -> Result<Vec<(String, PathBuf)>, CorpusError> {
    let unreadable = |source| CorpusError::Unreadable {
        path: corpus_root.to_path_buf(),
        source,
    };
    let mut out = Vec::new();
    for entry in fs::read_dir(corpus_root).map_err(unreadable)? {
        let entry = entry.map_err(unreadable)?;
        if !entry.file_type().map_err(unreadable)?.is_dir() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') {
            continue;
        }
        out.push((decode_package_dir(&name), entry.path()));
    }
    out.sort();
    Ok(out)
}
