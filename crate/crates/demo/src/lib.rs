//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes plain strings and returns a JSON document, so the
//! page needs no generated type definitions. The same functions are
//! callable from Rust, which is how they are tested.

use clonesig::clustering::{ClusterSpec, MclParams, Weighting};
use clonesig::corpus::{extract_functions, FunctionOrigin, FunctionUnit, JavaScriptAdapter};
use clonesig::fingerprint::{fingerprint_function, DEFAULT_MIN_NODE_COUNT};
use clonesig::similarity::{distance_matrix, package_distance, unit_distance, DistanceOptions, PackageAsts, UnitTree};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

fn units(name: &str, source: &str) -> Result<Vec<FunctionUnit>, String> {
    let ast = JavaScriptAdapter::default()
        .parse_text(name, source)
        .map_err(|e| e.to_string())?;
    Ok(extract_functions(&ast, name))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct FunctionView {
    origin: FunctionOrigin,
    /// Source text of the function.
    text: String,
    start: u32,
    end: u32,
    node_count: usize,
    fingerprint: String,
    /// Node kinds as an s-expression; identifiers and literal values are
    /// not part of the tree.
    tree: String,
}

/// Function units of `source` with their fingerprints.
#[wasm_bindgen]
pub fn fingerprint(source: &str) -> Result<String, String> {
    let views: Vec<FunctionView> = units("input.js", source)?
        .iter()
        .map(|u| {
            let r = fingerprint_function(u);
            FunctionView {
                origin: u.origin,
                text: source.get(u.span.start as usize..u.span.end as usize).unwrap_or("").to_string(),
                start: u.span.start,
                end: u.span.end,
                node_count: r.node_count,
                fingerprint: r.fingerprint.to_hex(),
                tree: u.tree.to_sexpr(),
            }
        })
        .collect();
    to_json(&views)
}

#[derive(Serialize)]
struct Comparison {
    /// Smallest distance over all function pairs; `null` when either side
    /// has no function large enough.
    distance: Option<u32>,
    left: Vec<String>,
    right: Vec<String>,
    /// `pairs[i][j]`: edit distance between left function `i` and right
    /// function `j`.
    pairs: Vec<Vec<u32>>,
}

fn asts(name: &str, source: &str) -> Result<(PackageAsts, Vec<String>), String> {
    let all = units(name, source)?;
    let kept: Vec<&FunctionUnit> = all.iter().filter(|u| u.node_count() >= DEFAULT_MIN_NODE_COUNT).collect();
    let labels = kept
        .iter()
        .map(|u| {
            let text = source.get(u.span.start as usize..u.span.end as usize).unwrap_or("");
            let first = text.lines().next().unwrap_or("").trim();
            match u.origin {
                FunctionOrigin::GlobalScopeDummy => "(top level)".to_string(),
                _ => first.chars().take(48).collect(),
            }
        })
        .collect();
    Ok((PackageAsts::from_units(name, &all, DEFAULT_MIN_NODE_COUNT), labels))
}

/// Tree edit distances between the functions of two sources.
#[wasm_bindgen]
pub fn compare(left: &str, right: &str) -> Result<String, String> {
    let (a, left_labels) = asts("left.js", left)?;
    let (b, right_labels) = asts("right.js", right)?;
    let opts = DistanceOptions::default();
    let pairs = a
        .units
        .iter()
        .map(|ua: &UnitTree| b.units.iter().map(|ub| unit_distance(ua, ub, &opts)).collect())
        .collect();
    to_json(&Comparison {
        distance: package_distance(&a, &b, &opts),
        left: left_labels,
        right: right_labels,
        pairs,
    })
}

#[derive(Deserialize)]
struct PackageInput {
    name: String,
    source: String,
}

#[derive(Serialize)]
struct ClusterView {
    names: Vec<String>,
    distances: Vec<Vec<u32>>,
    converged: Option<bool>,
    clusters: Vec<Vec<String>>,
    noise: Vec<String>,
}

/// Clusters packages given as a JSON array of `{name, source}` with MCL
/// over the graph linking packages at distance at most `tau`.
#[wasm_bindgen]
pub fn cluster(packages_json: &str, tau: u32, inflation: f64) -> Result<String, String> {
    let inputs: Vec<PackageInput> = serde_json::from_str(packages_json).map_err(|e| e.to_string())?;
    let mut packages = Vec::with_capacity(inputs.len());
    for p in &inputs {
        packages.push(asts(&p.name, &p.source).map_err(|e| format!("{}: {e}", p.name))?.0);
    }
    let (matrix, diagnostics) = distance_matrix(&packages, &DistanceOptions::default());
    let spec = ClusterSpec::Mcl {
        tau,
        weighting: Weighting::Binary,
        params: MclParams {
            inflation,
            ..MclParams::default()
        },
    };
    let artifact = spec.run(&matrix).map_err(|e| e.to_string())?;
    let n = matrix.len();
    let mut noise = artifact.noise;
    noise.extend(diagnostics.into_iter().map(|d| d.subject));
    to_json(&ClusterView {
        names: matrix.package_ids().to_vec(),
        distances: (0..n).map(|i| (0..n).map(|j| matrix.get(i, j)).collect()).collect(),
        converged: artifact.converged,
        clusters: artifact.clusters,
        noise,
    })
}
