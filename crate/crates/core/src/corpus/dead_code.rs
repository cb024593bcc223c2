use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::clex::tokenize;
use super::toplevel::{is_keyword, scan};

pub const ENTRY_POINT: &str = "main";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StripOutcome {
    pub text: String,
    /// Names of the removed definitions, in source order.
    pub removed: Vec<String>,
    /// Set when the input could not be analysed and was returned unchanged.
    pub warning: Option<String>,
}

impl StripOutcome {
    fn unchanged(src: &str, warning: impl Into<String>) -> Self {
        StripOutcome {
            text: src.to_owned(),
            removed: Vec::new(),
            warning: Some(warning.into()),
        }
    }
}

/// Removes every function definition that cannot be reached from `main`
/// through the static call graph.
///
/// Any mention of a function name counts as an edge, so functions whose
/// address is taken are kept. Names referenced from initializers or macros
/// are treated as roots.
pub fn strip_dead_functions(src: &str) -> StripOutcome {
    let (tokens, lex_error) = tokenize(src);
    if let Some(err) = lex_error {
        return StripOutcome::unchanged(src, format!("not analysed: {err}"));
    }
    let top = scan(&tokens);
    if top.unbalanced {
        return StripOutcome::unchanged(src, "not analysed: unbalanced braces or parentheses");
    }
    if !top.functions.iter().any(|f| f.name == ENTRY_POINT) {
        return StripOutcome::unchanged(src, "not analysed: no entry point");
    }

    let defined: BTreeSet<&str> = top.functions.iter().map(|f| f.name.as_str()).collect();
    let mut edges: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for f in &top.functions {
        let callees = edges.entry(f.name.as_str()).or_default();
        callees.extend(
            tokens[f.body_open + 1..f.body_close]
                .iter()
                .filter(|t| t.is_ident() && !is_keyword(t.text) && defined.contains(t.text))
                .map(|t| t.text),
        );
    }

    let mut reachable: BTreeSet<&str> = BTreeSet::new();
    let mut queue: VecDeque<&str> = VecDeque::new();
    queue.push_back(ENTRY_POINT);
    for r in &top.global_refs {
        if let Some(name) = defined.get(r.as_str()) {
            queue.push_back(name);
        }
    }
    while let Some(name) = queue.pop_front() {
        if !reachable.insert(name) {
            continue;
        }
        if let Some(callees) = edges.get(name) {
            queue.extend(callees.iter().copied().filter(|c| !reachable.contains(c)));
        }
    }

    let bytes = src.as_bytes();
    let mut spans = Vec::new();
    let mut removed = Vec::new();
    for f in &top.functions {
        if reachable.contains(f.name.as_str()) {
            continue;
        }
        let mut start = tokens[f.first_token].start;
        let mut end = tokens[f.body_close].end;
        // take the indentation and the line break with the definition when it owns its lines
        let line_start = src[..start].rfind('\n').map_or(0, |p| p + 1);
        if src[line_start..start].bytes().all(|b| b == b' ' || b == b'\t') {
            start = line_start;
            while end < bytes.len() && matches!(bytes[end], b' ' | b'\t' | b'\r') {
                end += 1;
            }
            if end < bytes.len() && bytes[end] == b'\n' {
                end += 1;
            }
        }
        spans.push((start, end));
        removed.push(f.name.clone());
    }

    let mut text = String::with_capacity(src.len());
    let mut cursor = 0;
    for (start, end) in spans {
        text.push_str(&src[cursor..start]);
        cursor = end;
    }
    text.push_str(&src[cursor..]);
    StripOutcome {
        text,
        removed,
        warning: None,
    }
}
