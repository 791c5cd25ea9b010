//! Tokenization, vocabulary and word-embedding tables.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::Tensor;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("io error reading embeddings: {0}")]
    Io(#[from] std::io::Error),
    #[error("embedding line {line}: {msg}")]
    BadEmbeddingLine { line: usize, msg: String },
    #[error("out-of-vocabulary token {0:?} with OOV policy disabled")]
    Vocabulary(String),
}

/// Reserved token for empty texts.
pub const EMPTY_TOKEN: &str = "<empty>";
/// Reserved token for out-of-vocabulary words.
pub const UNK_TOKEN: &str = "<unk>";
/// Replacement token for URLs.
pub const URL_TOKEN: &str = "<url>";
/// Replacement token for @-mentions.
pub const MENTION_TOKEN: &str = "<mention>";

/// Lowercase, split on whitespace and punctuation, with URLs and mentions
/// collapsed to reserved tokens. Empty texts yield the single empty token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for raw in text.split_whitespace() {
        let lower = raw.to_lowercase();
        if lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
        {
            tokens.push(URL_TOKEN.to_string());
            continue;
        }
        if lower.starts_with('@') && lower.len() > 1 {
            tokens.push(MENTION_TOKEN.to_string());
            continue;
        }
        let mut word = String::new();
        for ch in lower.chars() {
            if ch.is_alphanumeric() || ch == '\'' || ch == '_' || ch == '#' {
                word.push(ch);
            } else if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
        }
        if !word.is_empty() {
            tokens.push(word);
        }
    }
    if tokens.is_empty() {
        tokens.push(EMPTY_TOKEN.to_string());
    }
    tokens
}

/// Token-to-id table. Ids are dense and stable: reserved tokens first, then
/// corpus tokens in first-seen order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
    /// When false, unknown tokens are an error instead of mapping to UNK.
    pub oov_to_unk: bool,
}

impl Vocab {
    fn with_reserved() -> Vocab {
        let mut v = Vocab {
            tokens: Vec::new(),
            index: BTreeMap::new(),
            oov_to_unk: true,
        };
        for t in [EMPTY_TOKEN, UNK_TOKEN, URL_TOKEN, MENTION_TOKEN] {
            v.intern(t);
        }
        v
    }

    /// Build from an iterator of texts (typically the training split).
    pub fn build<'a>(texts: impl Iterator<Item = &'a str>) -> Vocab {
        let mut v = Vocab::with_reserved();
        for text in texts {
            for tok in tokenize(text) {
                v.intern(&tok);
            }
        }
        v
    }

    /// Rebuild the lookup index after deserialization.
    pub fn rebuild_index(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    fn intern(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        let id = self.tokens.len();
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Token ids for a text under the configured OOV policy.
    pub fn encode(&self, text: &str) -> Result<Vec<usize>, TextError> {
        tokenize(text)
            .into_iter()
            .map(|tok| match self.index.get(&tok) {
                Some(&id) => Ok(id),
                None if self.oov_to_unk => Ok(self.index[UNK_TOKEN]),
                None => Err(TextError::Vocabulary(tok)),
            })
            .collect()
    }
}

/// Seeded random embedding table, one row per vocab entry.
pub fn random_embeddings(vocab: &Vocab, dim: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let data = (0..vocab.len() * dim)
        .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * 0.5)
        .collect();
    Tensor::new(vec![vocab.len(), dim], data).expect("embedding shape")
}

/// Load a text-format embedding file (`token v1 v2 ... vD` per line) into a
/// table aligned with `vocab`. Tokens absent from the file keep their seeded
/// random rows.
pub fn load_embeddings(
    path: &Path,
    vocab: &Vocab,
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Tensor, TextError> {
    let mut table = random_embeddings(vocab, dim, rng);
    let file = std::fs::File::open(path)?;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().ok_or_else(|| TextError::BadEmbeddingLine {
            line: lineno + 1,
            msg: "missing token".into(),
        })?;
        let values: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>().map_err(|e| TextError::BadEmbeddingLine {
                    line: lineno + 1,
                    msg: e.to_string(),
                })
            })
            .collect::<Result<_, _>>()?;
        if values.len() != dim {
            return Err(TextError::BadEmbeddingLine {
                line: lineno + 1,
                msg: format!("expected {} values, got {}", dim, values.len()),
            });
        }
        if let Some(id) = vocab.id(token) {
            for (j, v) in values.into_iter().enumerate() {
                table.data_mut()[id * dim + j] = v;
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn tokenize_lowercases_and_splits_punctuation() {
        assert_eq!(
            tokenize("Don't Panic, people!"),
            vec!["don't", "panic", "people"]
        );
    }

    #[test]
    fn tokenize_replaces_urls_and_mentions() {
        assert_eq!(
            tokenize("@user see https://example.com/x now"),
            vec![MENTION_TOKEN, "see", URL_TOKEN, "now"]
        );
    }

    #[test]
    fn tokenize_empty_text_yields_empty_token() {
        assert_eq!(tokenize("   "), vec![EMPTY_TOKEN]);
        assert_eq!(tokenize("!!!"), vec![EMPTY_TOKEN]);
    }

    #[test]
    fn vocab_encodes_with_unk_fallback() {
        let texts = ["hello world", "hello again"];
        let vocab = Vocab::build(texts.iter().map(|s| *s));
        let ids = vocab.encode("hello mars").unwrap();
        assert_eq!(ids[0], vocab.id("hello").unwrap());
        assert_eq!(ids[1], vocab.id(UNK_TOKEN).unwrap());

        let mut strict = vocab.clone();
        strict.oov_to_unk = false;
        assert!(matches!(
            strict.encode("hello mars"),
            Err(TextError::Vocabulary(_))
        ));
    }

    #[test]
    fn embedding_file_overrides_matching_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        std::fs::write(&path, "hello 1.0 2.0 3.0\nunseen 9.0 9.0 9.0\n").unwrap();
        let vocab = Vocab::build(["hello world"].iter().map(|s| *s));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let table = load_embeddings(&path, &vocab, 3, &mut rng).unwrap();
        let id = vocab.id("hello").unwrap();
        assert_eq!(table.row(id), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn vocab_index_survives_serialization() {
        let vocab = Vocab::build(["a b c"].iter().map(|s| *s));
        let json = serde_json::to_string(&vocab).unwrap();
        let mut back: Vocab = serde_json::from_str(&json).unwrap();
        back.rebuild_index();
        assert_eq!(back.id("b"), vocab.id("b"));
    }
}
