use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::clex::{strip_comments, tokenize, Token, TokenKind};
use super::toplevel::scan;

/// Structural counts for one C source.
///
/// These are token-scan approximations: `pointers` counts `*` tokens that
/// sit in a declarator (after a type name, a typedef name, a struct tag or
/// another declarator `*`), `memory_calls` counts call sites of the four
/// standard allocation functions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeMetrics {
    pub loc: u64,
    pub functions: u64,
    pub pointers: u64,
    pub structs: u64,
    pub memory_calls: u64,
}

const TYPE_WORDS: &[&str] = &[
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "_Bool",
    "bool", "const", "volatile", "restrict", "size_t", "ssize_t", "ptrdiff_t", "FILE", "int8_t",
    "int16_t", "int32_t", "int64_t", "uint8_t", "uint16_t", "uint32_t", "uint64_t", "intptr_t",
    "uintptr_t",
];

const MEMORY_FUNCTIONS: &[&str] = &["malloc", "calloc", "realloc", "free"];

pub fn extract_code_metrics(src: &str) -> CodeMetrics {
    let loc = strip_comments(src)
        .lines()
        .filter(|l| !l.trim().is_empty())
        .count() as u64;

    // degrade on lexical errors: count whatever was tokenized
    let (tokens, _) = tokenize(src);
    let top = scan(&tokens);
    let typedefs = typedef_names(&tokens);

    let mut pointers = 0;
    let mut structs = 0;
    let mut memory_calls = 0;
    // indices of `*` tokens already counted as declarators
    let mut counted_star: Option<usize> = None;
    for (i, t) in tokens.iter().enumerate() {
        match t.kind {
            TokenKind::Punct if t.text == "*" => {
                let is_decl = i > 0 && {
                    let prev = &tokens[i - 1];
                    is_type_name(&tokens, i - 1, &typedefs)
                        || counted_star == Some(i - 1)
                        || (prev.is_punct("(") && i > 1 && is_type_name(&tokens, i - 2, &typedefs))
                };
                if is_decl {
                    pointers += 1;
                    counted_star = Some(i);
                }
            }
            TokenKind::Ident if t.text == "struct" => {
                let mut j = i + 1;
                if tokens.get(j).is_some_and(Token::is_ident) {
                    j += 1;
                }
                if tokens.get(j).is_some_and(|n| n.is_punct("{")) {
                    structs += 1;
                }
            }
            TokenKind::Ident
                if MEMORY_FUNCTIONS.contains(&t.text)
                    && tokens.get(i + 1).is_some_and(|n| n.is_punct("(")) =>
            {
                memory_calls += 1;
            }
            _ => {}
        }
    }

    CodeMetrics {
        loc,
        functions: top.functions.len() as u64,
        pointers,
        structs,
        memory_calls,
    }
}

fn is_type_name(tokens: &[Token<'_>], i: usize, typedefs: &BTreeSet<&str>) -> bool {
    let t = &tokens[i];
    if !t.is_ident() {
        return false;
    }
    if TYPE_WORDS.contains(&t.text) || typedefs.contains(t.text) {
        return true;
    }
    // struct / union / enum tag
    i > 0 && matches!(tokens[i - 1].text, "struct" | "union" | "enum") && tokens[i - 1].is_ident()
}

/// Names introduced by `typedef` items: identifiers directly before a `,`
/// or the terminating `;` outside any brace or parenthesis.
fn typedef_names<'a>(tokens: &[Token<'a>]) -> BTreeSet<&'a str> {
    let mut names = BTreeSet::new();
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i].is_ident() && tokens[i].text == "typedef" {
            let mut depth = 0i32;
            let mut j = i + 1;
            while j < tokens.len() {
                let t = &tokens[j];
                if t.is_punct("{") || t.is_punct("(") {
                    depth += 1;
                } else if t.is_punct("}") || t.is_punct(")") {
                    depth -= 1;
                } else if depth == 0 && (t.is_punct(";") || t.is_punct(",")) {
                    if tokens[j - 1].is_ident() {
                        names.insert(tokens[j - 1].text);
                    }
                    if t.is_punct(";") {
                        break;
                    }
                }
                j += 1;
            }
            i = j;
        }
        i += 1;
    }
    names
}
