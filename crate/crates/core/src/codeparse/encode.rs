use serde::{Deserialize, Serialize};

use super::dataflow::extract_dataflow;
use super::lexer::TokenSequence;
use super::vocab::{Vocabulary, CLS, PAD, SEP};
use crate::error::{Error, Result};

/// Model input for one code pair: `[CLS] a.. [SEP] b.. [SEP] [PAD]..`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedPair {
    pub input_ids: Vec<u32>,
    pub attention_mask: Vec<u8>,
    /// Def-use links as `(def_position, use_position)` in sequence coordinates.
    /// Only edges whose endpoints both survive truncation are kept.
    #[serde(default)]
    pub dataflow: Vec<(usize, usize)>,
}

impl EncodedPair {
    pub fn len(&self) -> usize {
        self.input_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input_ids.is_empty()
    }
}

/// Lengths kept from `a` and `b` when they must share `budget` slots.
///
/// Each side gets `floor(budget * len / total)`; leftover slots go one at a time
/// to the longer side first (ties to `a`), never beyond a side's own length.
pub fn truncated_lengths(len_a: usize, len_b: usize, budget: usize) -> (usize, usize) {
    let total = len_a + len_b;
    if total <= budget {
        return (len_a, len_b);
    }
    let mut keep_a = budget * len_a / total;
    let mut keep_b = budget * len_b / total;
    let mut left = budget - keep_a - keep_b;
    let a_first = len_a >= len_b;
    while left > 0 {
        let order = if a_first { [true, false] } else { [false, true] };
        let mut moved = false;
        for is_a in order {
            if left == 0 {
                break;
            }
            if is_a && keep_a < len_a {
                keep_a += 1;
                left -= 1;
                moved = true;
            } else if !is_a && keep_b < len_b {
                keep_b += 1;
                left -= 1;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    (keep_a, keep_b)
}

pub fn encode_pair(
    seq_a: &TokenSequence,
    seq_b: &TokenSequence,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<EncodedPair> {
    if max_len < 5 {
        return Err(Error::Config(format!("max_len must be at least 5, got {max_len}")));
    }
    let (keep_a, keep_b) = truncated_lengths(seq_a.len(), seq_b.len(), max_len - 3);

    let mut ids = Vec::with_capacity(max_len);
    ids.push(CLS);
    ids.extend(seq_a.texts().take(keep_a).map(|t| vocab.id(t)));
    ids.push(SEP);
    let offset_b = ids.len();
    ids.extend(seq_b.texts().take(keep_b).map(|t| vocab.id(t)));
    ids.push(SEP);
    let used = ids.len();
    ids.resize(max_len, PAD);

    let mut mask = vec![0u8; max_len];
    mask[..used].fill(1);

    let mut dataflow = Vec::new();
    for (seq, keep, offset) in [(seq_a, keep_a, 1), (seq_b, keep_b, offset_b)] {
        dataflow.extend(
            extract_dataflow(seq)
                .into_iter()
                .filter(|e| e.use_index < keep)
                .map(|e| (e.def_index + offset, e.use_index + offset)),
        );
    }

    Ok(EncodedPair {
        input_ids: ids,
        attention_mask: mask,
        dataflow,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        let seqs = vec![TokenSequence::from_texts(["a", "a", "a", "b"])];
        Vocabulary::build(&seqs, 6).unwrap()
    }

    #[test]
    fn layout_and_mask() {
        let enc = encode_pair(
            &TokenSequence::from_texts(["a"]),
            &TokenSequence::from_texts(["b"]),
            &vocab(),
            8,
        )
        .unwrap();
        assert_eq!(enc.input_ids, [0, 4, 1, 5, 1, 2, 2, 2]);
        assert_eq!(enc.attention_mask, [1, 1, 1, 1, 1, 0, 0, 0]);
    }

    #[test]
    fn empty_sequences() {
        let e = TokenSequence::default();
        let enc = encode_pair(&e, &e, &vocab(), 6).unwrap();
        assert_eq!(enc.input_ids, [0, 1, 1, 2, 2, 2]);
        assert_eq!(enc.attention_mask.iter().filter(|&&m| m == 1).count(), 3);
    }

    #[test]
    fn max_len_too_small() {
        let e = TokenSequence::default();
        assert!(encode_pair(&e, &e, &vocab(), 4).is_err());
    }

    #[test]
    fn proportional_truncation() {
        // budget 253: floor(253*300/400)=189, floor(253*100/400)=63, one leftover to a.
        assert_eq!(truncated_lengths(300, 100, 253), (190, 63));
        let a = TokenSequence::from_texts((0..300).map(|i| format!("t{i}")));
        let b = TokenSequence::from_texts((0..100).map(|i| format!("u{i}")));
        let enc = encode_pair(&a, &b, &vocab(), 256).unwrap();
        assert_eq!(enc.input_ids.len(), 256);
        assert!(enc.attention_mask.iter().all(|&m| m == 1));
        assert_eq!(enc.input_ids[0], CLS);
        assert_eq!(enc.input_ids[191], SEP);
        assert_eq!(enc.input_ids[255], SEP);
    }

    #[test]
    fn truncation_never_exceeds_side_length() {
        assert_eq!(truncated_lengths(1, 100, 10), (0, 10));
        assert_eq!(truncated_lengths(5, 5, 9), (5, 4));
        assert_eq!(truncated_lengths(3, 4, 100), (3, 4));
    }

    #[test]
    fn dataflow_is_shifted_into_sequence_positions() {
        let a = crate::codeparse::lex("x = 1; y = x;").unwrap();
        let b = crate::codeparse::lex("z = 2; z;").unwrap();
        let enc = encode_pair(&a, &b, &vocab(), 32).unwrap();
        // a: x(0)->x(6) => (1, 7); b starts at 1 + 8 + 1 = 10: z(0)->z(4) => (10, 14)
        assert_eq!(enc.dataflow, [(1, 7), (10, 14)]);
    }
}
