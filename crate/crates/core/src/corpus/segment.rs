use std::collections::HashSet;
use std::ops::Range;

use crate::resources::content_lines;

/// Rule-based sentence splitter.
///
/// A boundary is placed after a run of `.`, `!` or `?` (plus any closing
/// quotes or brackets) when it is followed by whitespace and then an
/// uppercase letter or an opening quote. A lone period that closes a word on
/// the abbreviation list never splits.
#[derive(Debug, Clone)]
pub struct Segmenter {
    abbreviations: HashSet<String>,
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | '\u{201D}' | '\u{2019}' | ')' | ']')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '\u{201C}' | '\u{2018}' | '(' | '[')
}

impl Segmenter {
    /// Build from a stop-list: one lowercase abbreviation per line, with its
    /// trailing period.
    pub fn from_list(text: &str) -> Self {
        let abbreviations = content_lines(text)
            .map(|l| l.to_lowercase())
            .map(|l| if l.ends_with('.') { l } else { format!("{l}.") })
            .collect();
        Segmenter { abbreviations }
    }

    pub fn bundled() -> Self {
        Self::from_list(crate::resources::ABBREVIATIONS)
    }

    fn is_abbreviation(&self, text: &str, period_at: usize) -> bool {
        let before = &text[..period_at];
        let word_start = before
            .char_indices()
            .rev()
            .find(|&(_, c)| c.is_whitespace())
            .map_or(0, |(i, c)| i + c.len_utf8());
        let word = before[word_start..].trim_start_matches(|c: char| !c.is_alphanumeric());
        if word.is_empty() {
            return false;
        }
        let key = format!("{}.", word.to_lowercase());
        self.abbreviations.contains(&key)
    }

    /// Byte spans of the sentences in `text`. Spans start and end on
    /// non-whitespace and together cover every non-whitespace byte once.
    pub fn spans(&self, text: &str) -> Vec<Range<usize>> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let byte_at = |i: usize| chars.get(i).map_or(text.len(), |&(b, _)| b);
        let mut spans = Vec::new();
        let mut start: Option<usize> = None;
        let mut last_non_ws_end = 0;
        let mut i = 0;
        while i < chars.len() {
            let (b, c) = chars[i];
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            start.get_or_insert(b);
            if !is_terminator(c) {
                last_non_ws_end = b + c.len_utf8();
                i += 1;
                continue;
            }
            let run_start = i;
            let mut j = i;
            while j < chars.len() && is_terminator(chars[j].1) {
                j += 1;
            }
            let single_period = j - run_start == 1 && c == '.';
            while j < chars.len() && is_closer(chars[j].1) {
                j += 1;
            }
            let end = byte_at(j);
            last_non_ws_end = end;
            let mut k = j;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            let followed_by_space = k > j;
            let next_opens = chars
                .get(k)
                .is_some_and(|&(_, n)| n.is_uppercase() || is_opener(n));
            let at_end = k == chars.len();
            let boundary = followed_by_space
                && (next_opens || at_end)
                && !(single_period && self.is_abbreviation(text, b));
            if boundary {
                if let Some(s) = start.take() {
                    spans.push(s..end);
                }
            }
            i = j;
        }
        if let Some(s) = start {
            spans.push(s..last_non_ws_end);
        }
        spans
    }
}

impl Default for Segmenter {
    fn default() -> Self {
        Self::bundled()
    }
}
