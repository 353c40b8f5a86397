use std::ops::Range;

/// Lexical class of a raw token, decided by its characters alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Word,
    Number,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawToken<'a> {
    pub text: &'a str,
    pub kind: TokenKind,
    /// Byte range within the tokenized string.
    pub span: Range<usize>,
}

pub(crate) fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}')
}

fn is_joiner(c: char) -> bool {
    is_apostrophe(c) || c == '-'
}

/// Split text into word, number and punctuation tokens.
///
/// A word is a maximal run of letters; an apostrophe or hyphen is kept inside
/// the word when it sits between two letters. Digit runs are numbers. Every
/// other non-space character is a single punctuation token.
pub fn tokenize(text: &str) -> Vec<RawToken<'_>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let end_of = |i: usize| chars.get(i).map_or(text.len(), |&(b, _)| b);
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let kind;
        let mut j = i + 1;
        if c.is_alphabetic() {
            kind = TokenKind::Word;
            while j < chars.len() {
                let cj = chars[j].1;
                if cj.is_alphabetic() {
                    j += 1;
                } else if is_joiner(cj) && chars.get(j + 1).is_some_and(|&(_, n)| n.is_alphabetic()) {
                    j += 2;
                } else {
                    break;
                }
            }
        } else if c.is_numeric() {
            kind = TokenKind::Number;
            while j < chars.len() && chars[j].1.is_numeric() {
                j += 1;
            }
        } else {
            kind = TokenKind::Punct;
        }
        let span = start..end_of(j);
        out.push(RawToken {
            text: &text[span.clone()],
            kind,
            span,
        });
        i = j;
    }
    out
}
