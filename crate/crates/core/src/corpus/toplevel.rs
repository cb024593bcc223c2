//! Top-level item scanner over the token stream.

use std::collections::BTreeSet;

use super::clex::{Token, TokenKind};

const KEYWORDS: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
    "enum", "extern", "float", "for", "goto", "if", "inline", "int", "long", "register",
    "restrict", "return", "short", "signed", "sizeof", "static", "struct", "switch", "typedef",
    "union", "unsigned", "void", "volatile", "while", "_Bool", "_Alignof", "_Noreturn",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

#[derive(Debug, Clone)]
pub struct FunctionDef {
    pub name: String,
    /// Token index of the first token of the item (storage class / return type).
    pub first_token: usize,
    /// Token index of the opening brace of the body.
    pub body_open: usize,
    /// Token index of the closing brace of the body.
    pub body_close: usize,
}

#[derive(Debug, Default)]
pub struct TopLevel {
    pub functions: Vec<FunctionDef>,
    /// Identifiers referenced outside function bodies: initializers,
    /// preprocessor lines and anything else that is not a declared name.
    pub global_refs: BTreeSet<String>,
    /// True when braces or parentheses were unbalanced at end of input.
    pub unbalanced: bool,
}

fn matching_close(tokens: &[Token<'_>], open: usize, o: &str, c: &str) -> Option<usize> {
    let mut depth = 0usize;
    for (i, t) in tokens.iter().enumerate().skip(open) {
        if t.is_punct(o) {
            depth += 1;
        } else if t.is_punct(c) {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

fn matching_open(tokens: &[Token<'_>], close: usize, o: &str, c: &str) -> Option<usize> {
    let mut depth = 0usize;
    for i in (0..=close).rev() {
        let t = &tokens[i];
        if t.is_punct(c) {
            depth += 1;
        } else if t.is_punct(o) {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

/// Identifiers found inside a preprocessor line.
fn directive_idents(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !(c == '_' || c.is_ascii_alphanumeric()))
        .filter(|w| w.chars().next().is_some_and(|c| c == '_' || c.is_ascii_alphabetic()))
}

pub fn scan(tokens: &[Token<'_>]) -> TopLevel {
    let mut out = TopLevel::default();
    let mut i = 0;
    let mut item_start = 0;
    // set once a top-level `=` has been seen in the current item
    let mut in_initializer = false;

    while i < tokens.len() {
        let t = &tokens[i];
        match t.kind {
            TokenKind::Directive => {
                out.global_refs
                    .extend(directive_idents(t.text).skip(1).map(str::to_owned));
                i += 1;
                item_start = i;
                in_initializer = false;
                continue;
            }
            TokenKind::Punct if t.text == ";" => {
                i += 1;
                item_start = i;
                in_initializer = false;
                continue;
            }
            TokenKind::Punct if t.text == "=" => {
                in_initializer = true;
            }
            TokenKind::Punct if t.text == "(" => {
                // parameter lists and parenthesized declarators are skipped as a unit;
                // any identifiers inside are only relevant within initializers
                let Some(close) = matching_close(tokens, i, "(", ")") else {
                    out.unbalanced = true;
                    return out;
                };
                if in_initializer {
                    out.global_refs.extend(
                        tokens[i + 1..close]
                            .iter()
                            .filter(|t| t.is_ident() && !is_keyword(t.text))
                            .map(|t| t.text.to_owned()),
                    );
                }
                i = close + 1;
                continue;
            }
            TokenKind::Punct if t.text == "{" => {
                let Some(close) = matching_close(tokens, i, "{", "}") else {
                    out.unbalanced = true;
                    return out;
                };
                let is_function = !in_initializer && i > item_start && tokens[i - 1].is_punct(")");
                let name = if is_function {
                    matching_open(tokens, i - 1, "(", ")")
                        .filter(|&open| open > item_start)
                        .map(|open| &tokens[open - 1])
                        .filter(|n| n.is_ident() && !is_keyword(n.text))
                } else {
                    None
                };
                match name {
                    Some(name) => {
                        out.functions.push(FunctionDef {
                            name: name.text.to_owned(),
                            first_token: item_start,
                            body_open: i,
                            body_close: close,
                        });
                        i = close + 1;
                        item_start = i;
                        in_initializer = false;
                    }
                    None => {
                        // aggregate body or initializer list: everything inside is a reference
                        out.global_refs.extend(
                            tokens[i + 1..close]
                                .iter()
                                .filter(|t| t.is_ident() && !is_keyword(t.text))
                                .map(|t| t.text.to_owned()),
                        );
                        i = close + 1;
                    }
                }
                continue;
            }
            TokenKind::Punct if t.text == ")" || t.text == "}" => {
                out.unbalanced = true;
            }
            TokenKind::Ident if !is_keyword(t.text) => {
                let declares = tokens.get(i + 1).is_some_and(|n| n.is_punct("("));
                if in_initializer || !declares {
                    out.global_refs.insert(t.text.to_owned());
                }
            }
            _ => {}
        }
        i += 1;
    }
    out
}
