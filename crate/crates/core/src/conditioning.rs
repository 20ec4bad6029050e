//! Prompt tokenization and the trainable context embedding fed to the
//! network's cross-attention.
//!
//! Prompts follow the template `"<manipulation>, the <subject> is <subject>"`.
//! Each token maps to a learned row plus a learned position; rows past the
//! prompt length are zero and masked out of attention.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::degrade::DegradationKind;
use crate::error::{config_err, Result};
use crate::model::{Init, ParamId, ParameterStore};
use crate::tensor::{Scalar, Shape, Tape, Var};

pub const OOV_TOKEN: &str = "<oov>";
pub const DEFAULT_MANIPULATION: &str = "remove the degradation";
pub const MANIPULATION_VERBS: [&str; 4] = ["remove", "process", "enhance", "keep"];
const GLUE_WORDS: [&str; 12] = [
    "the", "is", "degradation", "degradations", "image", "a", "an", "and", "of", "with", "in", "this",
];

/// Token list with dense indices. Index 0 is the out-of-vocabulary token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct PromptVocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for PromptVocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let mut vocab = Self {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for t in tokens {
            vocab.push(&t);
        }
        vocab
    }
}

impl From<PromptVocabulary> for Vec<String> {
    fn from(v: PromptVocabulary) -> Self {
        v.tokens
    }
}

impl PromptVocabulary {
    /// OOV, glue words, verbs, every kind name and the words of every kind
    /// name and phrase.
    pub fn standard() -> Self {
        let mut words: Vec<String> = vec![OOV_TOKEN.to_string()];
        words.extend(GLUE_WORDS.iter().map(|s| s.to_string()));
        words.extend(MANIPULATION_VERBS.iter().map(|s| s.to_string()));
        for kind in DegradationKind::ALL {
            words.push(kind.name().to_string());
        }
        for kind in DegradationKind::ALL {
            words.extend(kind.name().split('_').map(str::to_string));
            words.extend(split_words(kind.phrase()));
        }
        Self::from(words)
    }

    fn push(&mut self, token: &str) {
        if !self.index.contains_key(token) {
            self.index.insert(token.to_string(), self.tokens.len());
            self.tokens.push(token.to_string());
        }
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

    /// Index of `token`, or of the OOV token.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(self.oov())
    }

    pub fn oov(&self) -> usize {
        self.index.get(OOV_TOKEN).copied().unwrap_or(0)
    }

    /// Lowercases, splits on whitespace and punctuation (underscores are
    /// kept inside words) and maps each word to its index.
    pub fn tokenize(&self, text: &str) -> Vec<usize> {
        split_words(text).iter().map(|w| self.id(w)).collect()
    }
}

fn split_words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

/// `"<manipulation>, the <subject> is <subject>"`, or just the subject
/// clause when the manipulation is blank.
pub fn build_prompt(manipulation: &str, subject: &str) -> String {
    let manipulation = manipulation.trim();
    let subject = subject.trim();
    if manipulation.is_empty() {
        format!("the {subject} is {subject}")
    } else {
        format!("{manipulation}, the {subject} is {subject}")
    }
}

/// Removal prompt naming `kind`, as used in training.
pub fn kind_prompt(kind: DegradationKind) -> String {
    build_prompt(DEFAULT_MANIPULATION, kind.name())
}

/// Context embedding on a tape: `(n, D, K, 1)` plus valid lengths per item.
#[derive(Debug, Clone)]
pub struct Context {
    pub embedding: Var,
    pub lens: Vec<usize>,
}

/// Learned token table `(V, D)` and position table `(K, D)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptEncoder {
    pub table: ParamId,
    pub positions: ParamId,
    pub max_tokens: usize,
    pub dim: usize,
}

impl PromptEncoder {
    pub fn register(store: &mut ParameterStore, vocab_size: usize, max_tokens: usize, dim: usize) -> Result<Self> {
        if max_tokens == 0 || dim == 0 || vocab_size == 0 {
            return Err(config_err!("prompt encoder needs positive vocabulary, length and width"));
        }
        let table = store.add("cond.token_table", Shape::new(vocab_size, dim, 1, 1), Init::TruncNormal(0.02))?;
        let positions = store.add("cond.pos_table", Shape::new(max_tokens, dim, 1, 1), Init::TruncNormal(0.02))?;
        Ok(Self {
            table,
            positions,
            max_tokens,
            dim,
        })
    }

    /// `E[i] = table[token_i] + pos[i]` for the first `K` tokens of each
    /// prompt, zero rows after.
    pub fn encode<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        params: &[Var],
        vocab: &PromptVocabulary,
        prompts: &[&str],
    ) -> Result<Context> {
        let ids: Vec<Vec<usize>> = prompts
            .iter()
            .map(|p| vocab.tokenize(p).into_iter().take(self.max_tokens).collect())
            .collect();
        let lens = ids.iter().map(Vec::len).collect();
        let embedding = tape.embed_tokens(params[self.table.index()], params[self.positions.index()], &ids)?;
        Ok(Context { embedding, lens })
    }
}
