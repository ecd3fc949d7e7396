//! Token vocabularies.

use std::collections::HashMap;

use crate::error::{ModelError, Result};

pub const UNK: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;

pub const UNK_TOKEN: &str = "<unk>";
pub const BOS_TOKEN: &str = "<bos>";
pub const EOS_TOKEN: &str = "<eos>";

/// Index ↔ token mapping. The leading entries are the reserved specials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    specials: usize,
}

impl Vocab {
    /// Builds from token occurrences. Tokens seen fewer than `min_count`
    /// times are left out; the rest are ordered by descending count, then
    /// first appearance.
    pub fn build<'a>(specials: &[&str], tokens: impl IntoIterator<Item = &'a str>, min_count: usize) -> Self {
        let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
        for (pos, t) in tokens.into_iter().enumerate() {
            counts.entry(t).or_insert((0, pos)).0 += 1;
        }
        let mut kept: Vec<(&str, usize, usize)> = counts
            .into_iter()
            .filter(|(t, (c, _))| *c >= min_count && !specials.contains(t))
            .map(|(t, (c, p))| (t, c, p))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        let all = specials.iter().copied().chain(kept.into_iter().map(|k| k.0));
        Self::from_tokens(all.map(String::from).collect(), specials.len())
    }

    fn from_tokens(tokens: Vec<String>, specials: usize) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index, specials }
    }

    /// Sentence vocabulary: `<unk>`, `<bos>`, `<eos>` first.
    pub fn sentence<'a>(tokens: impl IntoIterator<Item = &'a str>, min_count: usize) -> Self {
        Self::build(&[UNK_TOKEN, BOS_TOKEN, EOS_TOKEN], tokens, min_count)
    }

    /// Linearized-graph vocabulary: `<unk>`, `<bos>` first.
    pub fn graph<'a>(tokens: impl IntoIterator<Item = &'a str>, min_count: usize) -> Self {
        Self::build(&[UNK_TOKEN, BOS_TOKEN], tokens, min_count)
    }

    /// Encoder node vocabulary: `<unk>` first.
    pub fn nodes<'a>(tokens: impl IntoIterator<Item = &'a str>, min_count: usize) -> Self {
        Self::build(&[UNK_TOKEN], tokens, min_count)
    }

    /// Arc-label vocabulary: every label seen, no specials.
    pub fn labels<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        Self::build(&[], tokens, 1)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Index of `token`, or `<unk>` when the vocabulary has specials.
    pub fn encode(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    /// Like [`encode`](Self::encode) but fails on unknown tokens; used for
    /// arc labels, which have no fallback.
    pub fn require(&self, token: &str) -> Result<usize> {
        self.get(token).ok_or_else(|| ModelError::UnknownLabel(token.to_string()))
    }

    pub fn token(&self, index: usize) -> &str {
        self.tokens.get(index).map_or(UNK_TOKEN, String::as_str)
    }

    pub fn specials(&self) -> usize {
        self.specials
    }

    /// One token per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    /// Reads [`to_text`](Self::to_text) output; `specials` leading entries
    /// are taken as reserved.
    pub fn from_text(text: &str, specials: usize) -> Result<Self> {
        let tokens: Vec<String> = text.lines().map(String::from).collect();
        let mut seen = HashMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.contains(char::is_whitespace) {
                return Err(ModelError::Parse {
                    line: i + 1,
                    message: format!("bad vocabulary entry {t:?}"),
                });
            }
            if seen.insert(t.as_str(), i).is_some() {
                return Err(ModelError::Parse {
                    line: i + 1,
                    message: format!("duplicate vocabulary entry {t:?}"),
                });
            }
        }
        if tokens.len() < specials {
            return Err(ModelError::Parse {
                line: tokens.len(),
                message: format!("vocabulary needs at least {specials} entries"),
            });
        }
        Ok(Self::from_tokens(tokens, specials))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_and_order() {
        let v = Vocab::sentence("b a b c a b".split(' '), 2);
        assert_eq!(v.tokens(), ["<unk>", "<bos>", "<eos>", "b", "a"]);
        assert_eq!(v.encode("c"), UNK);
        assert_eq!(v.encode("a"), 4);
        let back = Vocab::from_text(&v.to_text(), 3).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn labels_have_no_fallback() {
        let v = Vocab::labels([":ARG0", "compound"]);
        assert_eq!(v.require("compound").unwrap(), 1);
        assert!(matches!(v.require(":ARG9"), Err(ModelError::UnknownLabel(_))));
    }

    #[test]
    fn bad_files() {
        assert!(Vocab::from_text("a\na\n", 0).is_err());
        assert!(Vocab::from_text("a b\n", 0).is_err());
        assert!(Vocab::from_text("a\n", 3).is_err());
    }
}
