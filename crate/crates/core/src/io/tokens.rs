use crate::error::{Error, Result};

/// Whitespace tokenizer over ASCII headers that skips `#` comments and
/// remembers byte offsets for error reporting.
pub(crate) struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn rest(&self) -> &'a [u8] {
        &self.bytes[self.pos..]
    }

    pub fn advance(&mut self, n: usize) {
        self.pos = (self.pos + n).min(self.bytes.len());
    }

    /// Skips whitespace and comments; calls `on_comment` with each comment body.
    pub fn skip_space(&mut self, mut on_comment: impl FnMut(&str)) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                let start = self.pos + 1;
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                on_comment(&String::from_utf8_lossy(&self.bytes[start..self.pos]));
            } else {
                break;
            }
        }
    }

    /// Next token with its starting offset, or `None` at end of input.
    pub fn next_with(&mut self, on_comment: impl FnMut(&str)) -> Option<(usize, &'a str)> {
        self.skip_space(on_comment);
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return None;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .map(|s| (start, s))
            .or(Some((start, "\u{FFFD}")))
    }

    pub fn next(&mut self) -> Option<(usize, &'a str)> {
        self.next_with(|_| {})
    }

    pub fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let end = self.bytes.len();
        self.next()
            .ok_or_else(|| Error::parse(end, format!("unexpected end of input, expected {what}")))
    }

    pub fn expect_usize(&mut self, what: &str) -> Result<(usize, usize)> {
        let (offset, tok) = self.expect(what)?;
        tok.parse::<usize>()
            .map(|v| (offset, v))
            .map_err(|_| Error::parse(offset, format!("expected {what}, found {tok:?}")))
    }
}
