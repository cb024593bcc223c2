//! Token-level scan of Rust source for the `unsafe` keyword.

fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

/// Skips a string body starting just after the opening quote. Returns the
/// index after the closing quote.
fn skip_string(s: &[char], mut i: usize) -> usize {
    while i < s.len() {
        match s[i] {
            '\\' => i += 2,
            '"' => return i + 1,
            _ => i += 1,
        }
    }
    s.len()
}

/// Skips a raw string whose `r` (or `br`) prefix ends at `i`. Returns `None`
/// when this is not a raw string opener.
fn skip_raw_string(s: &[char], i: usize) -> Option<usize> {
    let mut j = i;
    let mut hashes = 0;
    while s.get(j) == Some(&'#') {
        hashes += 1;
        j += 1;
    }
    if s.get(j) != Some(&'"') {
        return None;
    }
    j += 1;
    while j < s.len() {
        if s[j] == '"' && (1..=hashes).all(|k| s.get(j + k) == Some(&'#')) {
            return Some(j + 1 + hashes);
        }
        j += 1;
    }
    Some(s.len())
}

fn skip_block_comment(s: &[char], mut i: usize) -> usize {
    let mut depth = 1;
    while i < s.len() && depth > 0 {
        if s[i] == '/' && s.get(i + 1) == Some(&'*') {
            depth += 1;
            i += 2;
        } else if s[i] == '*' && s.get(i + 1) == Some(&'/') {
            depth -= 1;
            i += 2;
        } else {
            i += 1;
        }
    }
    i
}

/// Counts `unsafe` keyword tokens outside comments, string and char
/// literals. Raw identifiers (`r#unsafe`) are not keywords.
pub fn count_unsafe_blocks(translation: &str) -> usize {
    let s: Vec<char> = translation.chars().collect();
    let mut count = 0;
    let mut i = 0;
    while i < s.len() {
        let c = s[i];
        match c {
            '/' if s.get(i + 1) == Some(&'/') => {
                while i < s.len() && s[i] != '\n' {
                    i += 1;
                }
            }
            '/' if s.get(i + 1) == Some(&'*') => i = skip_block_comment(&s, i + 2),
            '"' => i = skip_string(&s, i + 1),
            '\'' => {
                if s.get(i + 1) == Some(&'\\') {
                    // escaped char literal
                    i += 3;
                    while i < s.len() && s[i] != '\'' {
                        i += 1;
                    }
                    i += 1;
                } else if s.get(i + 2) == Some(&'\'') {
                    i += 3;
                } else {
                    // lifetime or label
                    i += 1;
                    while i < s.len() && is_ident_continue(s[i]) {
                        i += 1;
                    }
                }
            }
            _ if is_ident_start(c) => {
                let start = i;
                while i < s.len() && is_ident_continue(s[i]) {
                    i += 1;
                }
                let word: String = s[start..i].iter().collect();
                match word.as_str() {
                    "r" | "br" | "cr" if s.get(i) == Some(&'#') && s.get(i + 1).is_some_and(|&c| is_ident_start(c)) => {
                        // raw identifier
                        i += 1;
                        while i < s.len() && is_ident_continue(s[i]) {
                            i += 1;
                        }
                    }
                    "r" | "br" | "cr" => {
                        if let Some(end) = skip_raw_string(&s, i) {
                            i = end;
                        }
                    }
                    "b" | "c" if s.get(i) == Some(&'"') => i = skip_string(&s, i + 1),
                    "b" if s.get(i) == Some(&'\'') => {
                        i += 1;
                        if s.get(i) == Some(&'\\') {
                            i += 2;
                        }
                        while i < s.len() && s[i] != '\'' {
                            i += 1;
                        }
                        i += 1;
                    }
                    "unsafe" => count += 1,
                    _ => {}
                }
            }
            _ => i += 1,
        }
    }
    count
}
