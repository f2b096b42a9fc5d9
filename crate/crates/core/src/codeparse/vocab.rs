use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::lexer::TokenSequence;
use crate::error::{Error, Result};

pub const CLS: u32 = 0;
pub const SEP: u32 = 1;
pub const PAD: u32 = 2;
pub const UNK: u32 = 3;
pub const NUM_SPECIALS: usize = 4;

const SPECIAL_NAMES: [&str; NUM_SPECIALS] = ["[CLS]", "[SEP]", "[PAD]", "[UNK]"];

/// Token-text to id mapping. Ids `0..4` are reserved for the special tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabFile", into = "VocabFile")]
pub struct Vocabulary {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
    max_size: usize,
}

#[derive(Clone, Serialize, Deserialize)]
struct VocabFile {
    specials: BTreeMap<String, u32>,
    max_size: usize,
    tokens: BTreeMap<String, u32>,
}

impl Vocabulary {
    /// Specials first, then tokens by descending frequency with lexicographic
    /// tie-breaking, until `max_size` ids are assigned.
    pub fn build<'a, I>(streams: I, max_size: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a TokenSequence>,
    {
        if max_size <= NUM_SPECIALS {
            return Err(Error::Config(format!(
                "vocabulary max_size must exceed {NUM_SPECIALS}, got {max_size}"
            )));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for seq in streams {
            for t in seq.tokens() {
                *counts.entry(t.text.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut id_to_token: Vec<String> = SPECIAL_NAMES.iter().map(|s| s.to_string()).collect();
        id_to_token.extend(
            ranked
                .into_iter()
                .take(max_size - NUM_SPECIALS)
                .map(|(t, _)| t.to_owned()),
        );
        Ok(Self::from_id_list(id_to_token, max_size))
    }

    fn from_id_list(id_to_token: Vec<String>, max_size: usize) -> Self {
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .skip(NUM_SPECIALS)
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary {
            token_to_id,
            id_to_token,
            max_size,
        }
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn id(&self, token: &str) -> u32 {
        self.token_to_id.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

impl From<Vocabulary> for VocabFile {
    fn from(v: Vocabulary) -> Self {
        VocabFile {
            specials: SPECIAL_NAMES
                .iter()
                .enumerate()
                .map(|(i, s)| (s.to_string(), i as u32))
                .collect(),
            max_size: v.max_size,
            tokens: v.token_to_id.into_iter().collect(),
        }
    }
}

impl TryFrom<VocabFile> for Vocabulary {
    type Error = String;

    fn try_from(file: VocabFile) -> std::result::Result<Self, String> {
        for (i, name) in SPECIAL_NAMES.iter().enumerate() {
            if file.specials.get(*name) != Some(&(i as u32)) {
                return Err(format!("vocabulary specials block must map {name} to {i}"));
            }
        }
        let size = NUM_SPECIALS + file.tokens.len();
        let mut id_to_token: Vec<Option<String>> = vec![None; size];
        for (i, name) in SPECIAL_NAMES.iter().enumerate() {
            id_to_token[i] = Some(name.to_string());
        }
        for (tok, id) in file.tokens {
            let slot = id_to_token
                .get_mut(id as usize)
                .filter(|_| id as usize >= NUM_SPECIALS)
                .ok_or_else(|| format!("token id {id} out of range"))?;
            if slot.replace(tok).is_some() {
                return Err(format!("duplicate token id {id}"));
            }
        }
        let ids = id_to_token
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or("token ids are not dense")?;
        Ok(Vocabulary::from_id_list(ids, file.max_size))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> Vec<TokenSequence> {
        vec![
            TokenSequence::from_texts(["a", "b", "a"]),
            TokenSequence::from_texts(["a"]),
        ]
    }

    #[test]
    fn frequency_ordering() {
        let v = Vocabulary::build(&corpus(), 6).unwrap();
        assert_eq!(v.len(), 6);
        assert_eq!(v.id("a"), 4);
        assert_eq!(v.id("b"), 5);
        assert_eq!(v.token(CLS), Some("[CLS]"));
        assert_eq!(v.token(PAD), Some("[PAD]"));
    }

    #[test]
    fn truncated_vocab_maps_to_unk() {
        let v = Vocabulary::build(&corpus(), 5).unwrap();
        assert_eq!(v.len(), 5);
        assert_eq!(v.id("a"), 4);
        assert_eq!(v.id("b"), UNK);
        assert!(!v.contains("b"));
    }

    #[test]
    fn ties_break_lexicographically() {
        let seqs = vec![TokenSequence::from_texts(["z", "m", "a", "m"])];
        let v = Vocabulary::build(&seqs, 10).unwrap();
        assert_eq!(v.id("m"), 4);
        assert_eq!(v.id("a"), 5);
        assert_eq!(v.id("z"), 6);
    }

    #[test]
    fn too_small_max_size() {
        assert!(matches!(Vocabulary::build(&corpus(), 4), Err(Error::Config(_))));
    }

    #[test]
    fn json_round_trip() {
        let v = Vocabulary::build(&corpus(), 6).unwrap();
        let back = Vocabulary::from_json(&v.to_json().unwrap()).unwrap();
        assert_eq!(v, back);
    }
}
