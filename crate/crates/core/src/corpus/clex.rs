//! A small C tokenizer.
//!
//! Good enough to find top-level definitions, call sites and declarators in
//! single-file programs. It does not expand macros: a preprocessor line is
//! kept as one `Directive` token.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    Char,
    Punct,
    Directive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
}

impl Token<'_> {
    pub fn is_punct(&self, p: &str) -> bool {
        self.kind == TokenKind::Punct && self.text == p
    }

    pub fn is_ident(&self) -> bool {
        self.kind == TokenKind::Ident
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LexError {
    UnterminatedComment { offset: usize },
    UnterminatedLiteral { offset: usize },
}

impl fmt::Display for LexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LexError::UnterminatedComment { offset } => {
                write!(f, "unterminated block comment at byte {offset}")
            }
            LexError::UnterminatedLiteral { offset } => {
                write!(f, "unterminated literal at byte {offset}")
            }
        }
    }
}

const TWO_CHAR_OPS: &[&str] = &[
    "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "*=", "/=",
    "%=", "&=", "|=", "^=",
];

/// Tokenizes `src`. On a lexical error the tokens read so far are returned
/// together with the error, so callers can degrade instead of failing.
pub fn tokenize(src: &str) -> (Vec<Token<'_>>, Option<LexError>) {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    // true while only whitespace has been seen since the last newline
    let mut at_line_start = true;

    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            at_line_start = true;
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            match find(bytes, i + 2, b"*/") {
                Some(end) => {
                    i = end + 2;
                    continue;
                }
                None => return (tokens, Some(LexError::UnterminatedComment { offset: i })),
            }
        }
        if c == b'#' && at_line_start {
            let start = i;
            while i < bytes.len() {
                if bytes[i] == b'\n' {
                    // backslash continuation (allowing a trailing \r)
                    let mut j = i;
                    if j > start && bytes[j - 1] == b'\r' {
                        j -= 1;
                    }
                    if j > start && bytes[j - 1] == b'\\' {
                        i += 1;
                        continue;
                    }
                    break;
                }
                i += 1;
            }
            let text = src[start..i].trim_end();
            tokens.push(Token {
                kind: TokenKind::Directive,
                text,
                start,
                end: start + text.len(),
            });
            continue;
        }
        at_line_start = false;

        let start = i;
        if c == b'"' || c == b'\'' {
            match skip_quoted(bytes, i) {
                Some(end) => {
                    i = end;
                    let kind = if c == b'"' {
                        TokenKind::Str
                    } else {
                        TokenKind::Char
                    };
                    tokens.push(Token {
                        kind,
                        text: &src[start..i],
                        start,
                        end: i,
                    });
                    continue;
                }
                None => return (tokens, Some(LexError::UnterminatedLiteral { offset: i })),
            }
        }
        if c == b'_' || c.is_ascii_alphabetic() {
            while i < bytes.len() && (bytes[i] == b'_' || bytes[i].is_ascii_alphanumeric()) {
                i += 1;
            }
            // wide / unicode string and char prefixes: L"..", u8"..", U'..'
            if i < bytes.len() && (bytes[i] == b'"' || bytes[i] == b'\'') {
                let prefix = &src[start..i];
                if matches!(prefix, "L" | "u" | "U" | "u8") {
                    let quote = bytes[i];
                    match skip_quoted(bytes, i) {
                        Some(end) => {
                            i = end;
                            let kind = if quote == b'"' {
                                TokenKind::Str
                            } else {
                                TokenKind::Char
                            };
                            tokens.push(Token {
                                kind,
                                text: &src[start..i],
                                start,
                                end: i,
                            });
                            continue;
                        }
                        None => {
                            return (tokens, Some(LexError::UnterminatedLiteral { offset: i }))
                        }
                    }
                }
            }
            tokens.push(Token {
                kind: TokenKind::Ident,
                text: &src[start..i],
                start,
                end: i,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len()
                && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'.' || bytes[i] == b'_')
            {
                // exponent sign: 1e-5, 0x1p+3
                if matches!(bytes[i], b'e' | b'E' | b'p' | b'P')
                    && matches!(bytes.get(i + 1), Some(b'+') | Some(b'-'))
                {
                    i += 1;
                }
                i += 1;
            }
            tokens.push(Token {
                kind: TokenKind::Number,
                text: &src[start..i],
                start,
                end: i,
            });
            continue;
        }
        if src[i..].starts_with("...") {
            i += 3;
        } else if i + 2 <= bytes.len() && TWO_CHAR_OPS.iter().any(|op| src[i..].starts_with(op)) {
            i += 2;
        } else {
            // advance one whole char so non-ASCII input never splits a code point
            i += src[i..].chars().next().map_or(1, char::len_utf8);
        }
        tokens.push(Token {
            kind: TokenKind::Punct,
            text: &src[start..i],
            start,
            end: i,
        });
    }
    (tokens, None)
}

fn find(haystack: &[u8], from: usize, needle: &[u8]) -> Option<usize> {
    if from > haystack.len() {
        return None;
    }
    haystack[from..]
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|p| p + from)
}

/// Returns the index one past the closing quote.
fn skip_quoted(bytes: &[u8], open: usize) -> Option<usize> {
    let quote = bytes[open];
    let mut i = open + 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'\n' => return None,
            b if b == quote => return Some(i + 1),
            _ => i += 1,
        }
    }
    None
}

/// Replaces comments with whitespace, keeping every newline so line numbers
/// are preserved. Literals are left untouched.
pub fn strip_comments(src: &str) -> String {
    let bytes = src.as_bytes();
    let mut out = String::with_capacity(src.len());
    let mut i = 0;
    let mut copied = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'"' | b'\'' => {
                i = skip_quoted(bytes, i).unwrap_or(bytes.len());
            }
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                out.push_str(&src[copied..i]);
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                out.push(' ');
                copied = i;
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                out.push_str(&src[copied..i]);
                let end = find(bytes, i + 2, b"*/").map_or(bytes.len(), |e| e + 2);
                out.push(' ');
                for _ in src[i..end].matches('\n') {
                    out.push('\n');
                }
                i = end;
                copied = i;
            }
            _ => i += 1,
        }
    }
    out.push_str(&src[copied.min(src.len())..]);
    out
}
