//! Tokenizers and the fixed-length input encoding shared by both tasks.

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Special token ids, following the XLM-R vocabulary layout.
pub const CLS_ID: u32 = 0;
pub const PAD_ID: u32 = 1;
pub const SEP_ID: u32 = 2;
pub const UNK_ID: u32 = 3;
const FIRST_REGULAR_ID: u32 = 4;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TokenizerSpec {
    /// Hashes lowercased words and punctuation into a fixed vocabulary.
    Hash { vocab_size: usize },
    /// A `tokenizer.json` file, relative to the model directory.
    File { path: String },
}

#[derive(Clone)]
pub enum TextTokenizer {
    Hash(HashTokenizer),
    #[cfg(feature = "hf-tokenizer")]
    Hf(Box<tokenizers::Tokenizer>),
}

impl std::fmt::Debug for TextTokenizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TextTokenizer::Hash(h) => write!(f, "Hash({})", h.vocab_size),
            #[cfg(feature = "hf-tokenizer")]
            TextTokenizer::Hf(_) => f.write_str("Hf"),
        }
    }
}

impl TextTokenizer {
    pub fn from_spec(spec: &TokenizerSpec, base: &std::path::Path) -> Result<Self, ModelError> {
        match spec {
            TokenizerSpec::Hash { vocab_size } => {
                Ok(TextTokenizer::Hash(HashTokenizer::new(*vocab_size)?))
            }
            #[cfg(feature = "hf-tokenizer")]
            TokenizerSpec::File { path } => {
                let full = base.join(path);
                tokenizers::Tokenizer::from_file(&full)
                    .map(|t| TextTokenizer::Hf(Box::new(t)))
                    .map_err(|e| ModelError::EncoderNotFound(format!("{}: {e}", full.display())))
            }
            #[cfg(not(feature = "hf-tokenizer"))]
            TokenizerSpec::File { path } => Err(ModelError::EncoderNotFound(format!(
                "{} needs the `hf-tokenizer` feature",
                base.join(path).display()
            ))),
        }
    }

    /// Token ids without special tokens.
    pub fn tokenize(&self, text: &str) -> Result<Vec<u32>, ModelError> {
        if text.trim().is_empty() {
            return Err(ModelError::Tokenize("empty input".into()));
        }
        match self {
            TextTokenizer::Hash(h) => Ok(h.tokenize(text)),
            #[cfg(feature = "hf-tokenizer")]
            TextTokenizer::Hf(t) => t
                .encode(text, false)
                .map(|e| e.get_ids().to_vec())
                .map_err(|e| ModelError::Tokenize(e.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HashTokenizer {
    vocab_size: usize,
}

impl HashTokenizer {
    pub fn new(vocab_size: usize) -> Result<Self, ModelError> {
        if vocab_size <= FIRST_REGULAR_ID as usize {
            return Err(ModelError::ShapeMismatch(format!(
                "vocabulary of {vocab_size} is too small"
            )));
        }
        Ok(HashTokenizer { vocab_size })
    }

    fn id(&self, piece: &str) -> u32 {
        // FNV-1a, stable across platforms and runs.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in piece.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        let span = (self.vocab_size as u64) - u64::from(FIRST_REGULAR_ID);
        FIRST_REGULAR_ID + (h % span) as u32
    }

    /// Alphanumeric runs become one token each; every other visible
    /// character is its own token.
    pub fn tokenize(&self, text: &str) -> Vec<u32> {
        let mut ids = Vec::new();
        let mut word = String::new();
        for c in text.chars() {
            if c.is_alphanumeric() {
                word.extend(c.to_lowercase());
                continue;
            }
            if !word.is_empty() {
                ids.push(self.id(&word));
                word.clear();
            }
            if !c.is_whitespace() && !c.is_control() {
                ids.push(self.id(c.encode_utf8(&mut [0; 4])));
            }
        }
        if !word.is_empty() {
            ids.push(self.id(&word));
        }
        ids
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Encoded {
    pub ids: Vec<u32>,
    pub truncated: bool,
}

fn finish(mut ids: Vec<u32>, max_length: usize) -> Encoded {
    let truncated = ids.len() > max_length;
    if truncated {
        ids.truncate(max_length - 1);
        ids.push(SEP_ID);
    }
    Encoded { ids, truncated }
}

/// `<s> text </s>`, truncated to `max_length`.
pub fn encode_single(
    tok: &TextTokenizer,
    text: &str,
    max_length: usize,
) -> Result<Encoded, ModelError> {
    let mut ids = vec![CLS_ID];
    ids.extend(tok.tokenize(text)?);
    ids.push(SEP_ID);
    Ok(finish(ids, max_length))
}

/// `<s> a </s></s> b </s>`, the pair layout of XLM-R, truncated after
/// joining.
pub fn encode_pair(
    tok: &TextTokenizer,
    a: &str,
    b: &str,
    max_length: usize,
) -> Result<Encoded, ModelError> {
    let mut ids = vec![CLS_ID];
    ids.extend(tok.tokenize(a)?);
    ids.extend([SEP_ID, SEP_ID]);
    ids.extend(tok.tokenize(b)?);
    ids.push(SEP_ID);
    Ok(finish(ids, max_length))
}
