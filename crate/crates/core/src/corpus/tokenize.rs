//! Word tokenizer used for posting keys.
//!
//! A token is a maximal run of alphanumeric characters, apostrophes and
//! hyphens, with leading and trailing apostrophes/hyphens stripped. So
//! `don't` and `well-known` are single tokens while `'quoted'` yields `quoted`.
//! Offsets are counted in Unicode scalar values, not bytes.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Character offset of the first character.
    pub start: usize,
    /// Length in characters.
    pub len: usize,
    pub byte_start: usize,
    pub byte_end: usize,
    /// Lowercased surface form.
    pub key: String,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_joiner(c)
}

fn is_joiner(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '-')
}

pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    // (char offset, byte offset, char) of the current run
    let mut run: Vec<(usize, usize, char)> = Vec::new();
    let mut flush = |run: &mut Vec<(usize, usize, char)>| {
        let lo = run.iter().position(|&(_, _, c)| !is_joiner(c));
        let hi = run.iter().rposition(|&(_, _, c)| !is_joiner(c));
        if let (Some(lo), Some(hi)) = (lo, hi) {
            let (start, byte_start, _) = run[lo];
            let (_, last_byte, last) = run[hi];
            let byte_end = last_byte + last.len_utf8();
            let surface: String = run[lo..=hi].iter().map(|&(_, _, c)| c).collect();
            out.push(Token { start, len: hi - lo + 1, byte_start, byte_end, key: surface.to_lowercase() });
        }
        run.clear();
    };
    for (ci, (bi, c)) in text.char_indices().enumerate() {
        if is_word_char(c) {
            run.push((ci, bi, c));
        } else if !run.is_empty() {
            flush(&mut run);
        }
    }
    if !run.is_empty() {
        flush(&mut run);
    }
    out
}

/// Byte range of the `len`-character span starting at character `start`.
pub fn char_span_to_bytes(text: &str, start: usize, len: usize) -> Option<(usize, usize)> {
    let mut it = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let b0 = it.nth(start)?;
    if len == 0 {
        return Some((b0, b0));
    }
    let b1 = it.nth(len - 1)?;
    Some((b0, b1))
}
