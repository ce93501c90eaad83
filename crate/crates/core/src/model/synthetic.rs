//! Synthetic parallel corpus for desk-scale experiments.
//!
//! Two languages express the same concept sequence. Their orthographic words
//! never overlap (Han characters vs Hangul syllables); a configurable share of
//! concepts has the same romanized form in both, the rest differ.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::objective::TaskLabel;
use super::subword::SubwordVocab;
use super::train::TrainExample;
use crate::augment::{BilingualDictionary, DictTarget};
use crate::corpus::{CharSpan, LanguageId, Utterance, Word};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub sentences: usize,
    pub concepts: usize,
    pub shared_roman_fraction: f64,
    pub min_words: usize,
    pub max_words: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            sentences: 200,
            concepts: 40,
            shared_roman_fraction: 0.5,
            min_words: 3,
            max_words: 6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Concept {
    pub source: String,
    pub source_roman: String,
    pub target: String,
    pub target_roman: String,
}

impl Concept {
    pub fn shares_roman(&self) -> bool {
        self.source_roman == self.target_roman
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub config: SyntheticConfig,
    pub source_lang: LanguageId,
    pub target_lang: LanguageId,
    pub concepts: Vec<Concept>,
    pub source: Vec<Utterance>,
    pub target: Vec<Utterance>,
    pub labels: Vec<usize>,
    /// Source-to-target word translations covering every concept.
    pub dictionary: BilingualDictionary,
}

const CONSONANTS: &[&str] = &["b", "d", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "w", "y", "ch", "sh"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];

fn roman_word<R: Rng + ?Sized>(rng: &mut R, taken: &mut HashSet<String>) -> String {
    loop {
        let syllables = rng.random_range(2..=3);
        let w: String = (0..syllables)
            .map(|_| format!("{}{}", CONSONANTS.choose(rng).unwrap(), VOWELS.choose(rng).unwrap()))
            .collect();
        if taken.insert(w.clone()) {
            return w;
        }
    }
}

fn ortho_word<R: Rng + ?Sized>(rng: &mut R, base: u32, span: u32, taken: &mut HashSet<String>) -> String {
    loop {
        let w: String = (0..2)
            .map(|_| char::from_u32(base + rng.random_range(0..span)).unwrap())
            .collect();
        if taken.insert(w.clone()) {
            return w;
        }
    }
}

/// Utterance with one word per (surface, roman) pair and no spaces.
fn utterance(lang: LanguageId, pairs: &[(&str, &str)]) -> Utterance {
    let mut text = String::new();
    let mut words = Vec::with_capacity(pairs.len());
    let mut pos = 0;
    for (surface, roman) in pairs {
        let n = surface.chars().count();
        text.push_str(surface);
        let mut w = Word::new(*surface, surface.chars().map(String::from).collect(), CharSpan::new(pos, pos + n));
        w.roman = roman.to_string();
        words.push(w);
        pos += n;
    }
    Utterance::new(lang, text, words)
}

impl SyntheticCorpus {
    pub fn generate(config: &SyntheticConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut romans = HashSet::new();
        let mut orthos = HashSet::new();
        let shared = (config.concepts as f64 * config.shared_roman_fraction).round() as usize;
        let concepts: Vec<Concept> = (0..config.concepts)
            .map(|i| {
                let source_roman = roman_word(&mut rng, &mut romans);
                let target_roman = if i < shared {
                    source_roman.clone()
                } else {
                    roman_word(&mut rng, &mut romans)
                };
                Concept {
                    source: ortho_word(&mut rng, 0x4E00, 0x0800, &mut orthos),
                    source_roman,
                    target: ortho_word(&mut rng, 0xAC00, 0x0800, &mut orthos),
                    target_roman,
                }
            })
            .collect();

        let mut dictionary = BilingualDictionary::new(LanguageId::Zh);
        for c in &concepts {
            dictionary.insert(
                &c.source,
                DictTarget {
                    lang: LanguageId::Ko,
                    surface: c.target.clone(),
                    roman: c.target_roman.clone(),
                },
            );
        }

        // the label is the parity of the first concept, which alternates
        let mut source = Vec::with_capacity(config.sentences);
        let mut target = Vec::with_capacity(config.sentences);
        let mut labels = Vec::with_capacity(config.sentences);
        for s in 0..config.sentences {
            let len = rng.random_range(config.min_words..=config.max_words);
            let mut ids: Vec<usize> = (0..len).map(|_| rng.random_range(0..concepts.len())).collect();
            let label = s % 2;
            while ids[0] % 2 != label {
                ids[0] = rng.random_range(0..concepts.len());
            }
            let src: Vec<(&str, &str)> = ids
                .iter()
                .map(|&i| (concepts[i].source.as_str(), concepts[i].source_roman.as_str()))
                .collect();
            let tgt: Vec<(&str, &str)> = ids
                .iter()
                .map(|&i| (concepts[i].target.as_str(), concepts[i].target_roman.as_str()))
                .collect();
            source.push(utterance(LanguageId::Zh, &src));
            target.push(utterance(LanguageId::Ko, &tgt));
            labels.push(label);
        }
        SyntheticCorpus {
            config: *config,
            source_lang: LanguageId::Zh,
            target_lang: LanguageId::Ko,
            concepts,
            source,
            target,
            labels,
            dictionary,
        }
    }

    /// Subword vocabulary over both languages and both streams.
    pub fn vocab(&self) -> SubwordVocab {
        let words = self
            .source
            .iter()
            .chain(&self.target)
            .flat_map(|u| u.words.iter().flat_map(|w| [w.surface.as_str(), w.roman.as_str()]));
        SubwordVocab::train(words, 256, 4)
    }

    fn examples(&self, utts: &[Utterance]) -> Vec<TrainExample> {
        utts.iter()
            .zip(&self.labels)
            .map(|(u, &l)| TrainExample {
                utterances: vec![u.clone()],
                label: TaskLabel::Class(l),
            })
            .collect()
    }

    pub fn source_examples(&self) -> Vec<TrainExample> {
        self.examples(&self.source)
    }

    pub fn target_examples(&self) -> Vec<TrainExample> {
        self.examples(&self.target)
    }
}
