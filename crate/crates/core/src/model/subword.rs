//! Byte-fallback unigram subword vocabulary.
//!
//! Ids `0..256` are raw UTF-8 bytes, used for characters the vocabulary has
//! never seen. Pieces follow. A word is split by Viterbi search maximizing the
//! summed log-probability of its pieces; pieces never cross word boundaries.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub const BYTE_TOKENS: usize = 256;
/// Log-probability charged per fallback byte.
const BYTE_SCORE: f64 = -30.0;
const EM_ROUNDS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubwordVocab {
    pieces: Vec<String>,
    scores: Vec<f64>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    max_piece_chars: usize,
}

impl SubwordVocab {
    /// Trains on word strings; `max_pieces` caps the multi-character pieces kept.
    pub fn train<'a, I>(words: I, max_pieces: usize, max_piece_chars: usize) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
        for w in words {
            if !w.is_empty() {
                *freq.entry(w).or_default() += 1;
            }
        }
        // seed with every substring up to max_piece_chars
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for (w, &f) in &freq {
            let chars: Vec<char> = w.chars().collect();
            for i in 0..chars.len() {
                for j in i + 1..=(i + max_piece_chars).min(chars.len()) {
                    *counts.entry(chars[i..j].iter().collect()).or_default() += f;
                }
            }
        }
        counts.retain(|p, c| *c >= 2 || p.chars().count() == 1);
        let mut vocab = Self::from_counts(&counts, max_piece_chars);
        for _ in 0..EM_ROUNDS {
            let mut used: BTreeMap<String, usize> = BTreeMap::new();
            for (w, &f) in &freq {
                for id in vocab.encode_word(w) {
                    if id >= BYTE_TOKENS {
                        *used.entry(vocab.pieces[id - BYTE_TOKENS].clone()).or_default() += f;
                    }
                }
            }
            // single characters always stay so that seen text never falls back to bytes
            for p in counts.keys().filter(|p| p.chars().count() == 1) {
                used.entry(p.clone()).or_insert(1);
            }
            let mut multi: Vec<(&String, &usize)> = used.iter().filter(|(p, _)| p.chars().count() > 1).collect();
            multi.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
            let keep: Vec<String> = multi.iter().skip(max_pieces).map(|(p, _)| (*p).clone()).collect();
            for p in keep {
                used.remove(&p);
            }
            vocab = Self::from_counts(&used, max_piece_chars);
        }
        vocab
    }

    fn from_counts(counts: &BTreeMap<String, usize>, max_piece_chars: usize) -> Self {
        let total: f64 = counts.values().map(|&c| c as f64).sum::<f64>().max(1.0);
        let pieces: Vec<String> = counts.keys().cloned().collect();
        let scores = counts.values().map(|&c| (c as f64 / total).ln()).collect();
        let mut v = SubwordVocab {
            pieces,
            scores,
            index: HashMap::new(),
            max_piece_chars,
        };
        v.rebuild_index();
        v
    }

    pub(crate) fn rebuild_index(&mut self) {
        self.index = self
            .pieces
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i + BYTE_TOKENS))
            .collect();
    }

    /// Total id count including the byte range.
    pub fn size(&self) -> usize {
        BYTE_TOKENS + self.pieces.len()
    }

    pub fn id(&self, piece: &str) -> Option<usize> {
        self.index.get(piece).copied()
    }

    pub fn piece(&self, id: usize) -> Option<&str> {
        id.checked_sub(BYTE_TOKENS)
            .and_then(|i| self.pieces.get(i))
            .map(String::as_str)
    }

    /// Viterbi segmentation of one word. Empty input yields no ids.
    pub fn encode_word(&self, word: &str) -> Vec<usize> {
        let chars: Vec<char> = word.chars().collect();
        let n = chars.len();
        // best[j] = (score, start, piece id or None for byte fallback)
        let mut best: Vec<(f64, usize, Option<usize>)> = vec![(f64::NEG_INFINITY, 0, None); n + 1];
        best[0].0 = 0.0;
        for j in 1..=n {
            let lo = j.saturating_sub(self.max_piece_chars.max(1));
            for i in lo..j {
                if best[i].0 == f64::NEG_INFINITY {
                    continue;
                }
                let piece: String = chars[i..j].iter().collect();
                if let Some(id) = self.id(&piece) {
                    let s = best[i].0 + self.scores[id - BYTE_TOKENS];
                    if s > best[j].0 {
                        best[j] = (s, i, Some(id));
                    }
                }
            }
            if best[j - 1].0 > f64::NEG_INFINITY {
                let s = best[j - 1].0 + BYTE_SCORE * chars[j - 1].len_utf8() as f64;
                if s > best[j].0 {
                    best[j] = (s, j - 1, None);
                }
            }
        }
        let mut out = Vec::new();
        let mut j = n;
        while j > 0 {
            let (_, i, id) = best[j];
            match id {
                Some(id) => out.push(id),
                None => {
                    let mut buf = [0u8; 4];
                    let bytes = chars[i].encode_utf8(&mut buf).as_bytes();
                    out.extend(bytes.iter().rev().map(|&b| b as usize));
                }
            }
            j = i;
        }
        out.reverse();
        out
    }

    /// Reassembles ids into text (inverse of [`encode_word`](Self::encode_word)).
    pub fn decode(&self, ids: &[usize]) -> String {
        let mut bytes = Vec::new();
        for &id in ids {
            match self.piece(id) {
                Some(p) => bytes.extend_from_slice(p.as_bytes()),
                None => bytes.push(id as u8),
            }
        }
        String::from_utf8_lossy(&bytes).into_owned()
    }
}
