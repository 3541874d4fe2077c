//! Whitespace/punctuation tokenizer and a simple sentence splitter.

use std::ops::Range;

/// Tokens of a string plus the byte span each token occupies in it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq {
    text: String,
    tokens: Vec<String>,
    spans: Vec<Range<usize>>,
}

impl TokenSeq {
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.tokens
    }

    pub fn spans(&self) -> &[Range<usize>] {
        &self.spans
    }

    /// Token spans in `char` offsets.
    pub fn char_spans(&self) -> Vec<Range<usize>> {
        let mut out = Vec::with_capacity(self.spans.len());
        let mut chars = 0;
        let mut byte = 0;
        for span in &self.spans {
            chars += self.text[byte..span.start].chars().count();
            let len = self.text[span.clone()].chars().count();
            out.push(chars..chars + len);
            chars += len;
            byte = span.end;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Whitespace preceding token `i` (the text after the last token for `i == len`).
    pub fn gap_before(&self, i: usize) -> &str {
        let start = if i == 0 { 0 } else { self.spans[i - 1].end };
        let end = self.spans.get(i).map_or(self.text.len(), |s| s.start);
        &self.text[start..end]
    }

    /// Rebuilds the original string from tokens and recorded gaps.
    pub fn detokenize(&self) -> String {
        let mut out = String::with_capacity(self.text.len());
        for (i, tok) in self.tokens.iter().enumerate() {
            out.push_str(self.gap_before(i));
            out.push_str(tok);
        }
        out.push_str(self.gap_before(self.tokens.len()));
        out
    }
}

pub fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}'..='\u{201F}' | '\u{2010}'..='\u{2015}' | '\u{2026}' | '«' | '»' | '‹' | '›' | '¡' | '¿' | '·'
        )
}

/// Splits on whitespace, then peels leading and trailing punctuation off each
/// chunk one character at a time. Case is preserved.
pub fn tokenize(text: &str) -> TokenSeq {
    let mut tokens = Vec::new();
    let mut spans = Vec::new();
    let mut push = |range: Range<usize>| {
        tokens.push(text[range.clone()].to_string());
        spans.push(range);
    };

    let mut chunk_start = None;
    let mut chunks = Vec::new();
    for (b, c) in text.char_indices() {
        match (c.is_whitespace(), chunk_start) {
            (true, Some(s)) => {
                chunks.push(s..b);
                chunk_start = None;
            }
            (false, None) => chunk_start = Some(b),
            _ => {}
        }
    }
    if let Some(s) = chunk_start {
        chunks.push(s..text.len());
    }

    for chunk in chunks {
        let s = &text[chunk.clone()];
        let chars: Vec<(usize, char)> = s.char_indices().collect();
        let lead = chars.iter().take_while(|(_, c)| is_punct(*c)).count();
        if lead == chars.len() {
            for (b, c) in &chars {
                push(chunk.start + b..chunk.start + b + c.len_utf8());
            }
            continue;
        }
        let trail = chars.iter().rev().take_while(|(_, c)| is_punct(*c)).count();
        for (b, c) in &chars[..lead] {
            push(chunk.start + b..chunk.start + b + c.len_utf8());
        }
        let core_start = chars[lead].0;
        let core_end = chars.get(chars.len() - trail).map_or(s.len(), |(b, _)| *b);
        push(chunk.start + core_start..chunk.start + core_end);
        for (b, c) in &chars[chars.len() - trail..] {
            push(chunk.start + b..chunk.start + b + c.len_utf8());
        }
    }

    TokenSeq {
        text: text.to_string(),
        tokens,
        spans,
    }
}

fn closes_sentence(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201D}' | '\u{2019}')
}

/// Splits at `.`, `!` or `?` (plus any closing quotes or brackets) when
/// followed by whitespace and an uppercase letter. Sentences are trimmed.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        if matches!(chars[i].1, '.' | '!' | '?') {
            let mut j = i + 1;
            while j < chars.len() && closes_sentence(chars[j].1) {
                j += 1;
            }
            let mut k = j;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            let mut cap = k;
            while cap < chars.len() && matches!(chars[cap].1, '"' | '\'' | '(' | '[' | '\u{201C}' | '\u{2018}') {
                cap += 1;
            }
            if k > j && cap < chars.len() && chars[cap].1.is_uppercase() {
                let end = chars[j - 1].0 + chars[j - 1].1.len_utf8();
                let sentence = text[start..end].trim();
                if !sentence.is_empty() {
                    out.push(sentence.to_string());
                }
                start = chars[k].0;
                i = k;
                continue;
            }
        }
        i += 1;
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest.to_string());
    }
    out
}
