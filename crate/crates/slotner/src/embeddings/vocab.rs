use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Bidirectional token <-> id map with reserved PAD (0) and UNK (1) slots.
///
/// Tokens are stored and looked up lowercased; the reserved specials are
/// never produced by real text, and UNK is the fallback for anything absent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    /// Build from a token stream: tokens seen at least `min_count` times are
    /// kept, ordered by descending frequency with lexicographic tie-breaks.
    pub fn build<'a>(
        tokens: impl IntoIterator<Item = &'a str>,
        min_count: usize,
    ) -> Result<Vocabulary> {
        let mut counts: HashMap<String, usize> = HashMap::new();
        let mut any = false;
        for tok in tokens {
            any = true;
            *counts.entry(tok.to_lowercase()).or_default() += 1;
        }
        if !any {
            return Err(Error::EmptyInput("cannot build a vocabulary from an empty corpus".into()));
        }
        let mut kept: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count.max(1))
            .collect();
        kept.sort_by(|(ta, ca), (tb, cb)| cb.cmp(ca).then_with(|| ta.cmp(tb)));
        let mut id_to_token = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        id_to_token.extend(kept.into_iter().map(|(t, _)| t));
        Vocabulary::from_tokens(id_to_token)
    }

    /// Rebuild from a stored token list (checkpoint load). The first two
    /// entries must be the reserved specials.
    pub fn from_tokens(id_to_token: Vec<String>) -> Result<Vocabulary> {
        if id_to_token.len() < 2
            || id_to_token[PAD_ID] != PAD_TOKEN
            || id_to_token[UNK_ID] != UNK_TOKEN
        {
            return Err(Error::Config(
                "vocabulary must start with the <pad> and <unk> specials".into(),
            ));
        }
        let mut token_to_id = HashMap::with_capacity(id_to_token.len());
        for (id, tok) in id_to_token.iter().enumerate() {
            if token_to_id.insert(tok.clone(), id).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary token {tok:?}")));
            }
        }
        Ok(Vocabulary {
            token_to_id,
            id_to_token,
        })
    }

    /// Lowercased lookup with UNK fallback.
    pub fn lookup(&self, token: &str) -> usize {
        self.token_to_id
            .get(&token.to_lowercase())
            .copied()
            .unwrap_or(UNK_ID)
    }

    /// Exact in-vocabulary check for an already-lowercased token.
    pub fn id_of(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.id_to_token[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    /// Content digest, used to pin vocabularies inside checkpoints.
    pub fn sha256_hex(&self) -> String {
        digest_lines(&self.id_to_token)
    }
}

pub(crate) fn digest_lines(lines: &[String]) -> String {
    let mut hasher = Sha256::new();
    for line in lines {
        hasher.update(line.as_bytes());
        hasher.update(b"\n");
    }
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Character-level analogue of [`Vocabulary`]. Casing is preserved: the
/// character channel is where capitalization signal survives.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharVocabulary {
    char_to_id: HashMap<char, usize>,
    id_to_entry: Vec<String>,
}

impl CharVocabulary {
    /// Build from the characters of a word stream, ordered by descending
    /// frequency with codepoint tie-breaks.
    pub fn build<'a>(words: impl IntoIterator<Item = &'a str>) -> Result<CharVocabulary> {
        let mut counts: HashMap<char, usize> = HashMap::new();
        let mut any = false;
        for word in words {
            for ch in word.chars() {
                any = true;
                *counts.entry(ch).or_default() += 1;
            }
        }
        if !any {
            return Err(Error::EmptyInput(
                "cannot build a character vocabulary from an empty corpus".into(),
            ));
        }
        let mut kept: Vec<(char, usize)> = counts.into_iter().collect();
        kept.sort_by(|(ca, na), (cb, nb)| nb.cmp(na).then_with(|| ca.cmp(cb)));
        let mut id_to_entry = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        id_to_entry.extend(kept.into_iter().map(|(c, _)| c.to_string()));
        CharVocabulary::from_entries(id_to_entry)
    }

    /// Rebuild from a stored entry list (specials first, then one-character
    /// strings).
    pub fn from_entries(id_to_entry: Vec<String>) -> Result<CharVocabulary> {
        if id_to_entry.len() < 2
            || id_to_entry[PAD_ID] != PAD_TOKEN
            || id_to_entry[UNK_ID] != UNK_TOKEN
        {
            return Err(Error::Config(
                "character vocabulary must start with the <pad> and <unk> specials".into(),
            ));
        }
        let mut char_to_id = HashMap::new();
        for (id, entry) in id_to_entry.iter().enumerate().skip(2) {
            let mut chars = entry.chars();
            let (ch, rest) = (chars.next(), chars.next());
            match (ch, rest) {
                (Some(c), None) => {
                    if char_to_id.insert(c, id).is_some() {
                        return Err(Error::Config(format!("duplicate character {c:?}")));
                    }
                }
                _ => {
                    return Err(Error::Config(format!(
                        "character vocabulary entry {entry:?} is not a single character"
                    )))
                }
            }
        }
        Ok(CharVocabulary {
            char_to_id,
            id_to_entry,
        })
    }

    pub fn lookup(&self, ch: char) -> usize {
        self.char_to_id.get(&ch).copied().unwrap_or(UNK_ID)
    }

    pub fn entries(&self) -> &[String] {
        &self.id_to_entry
    }

    pub fn len(&self) -> usize {
        self.id_to_entry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_entry.is_empty()
    }

    pub fn sha256_hex(&self) -> String {
        digest_lines(&self.id_to_entry)
    }
}
