//! Bilingual-dictionary code-switching on either the orthographic or the
//! romanized stream, and the two-view augmentation built from it.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{CharSpan, LanguageId, Utterance};
use crate::segment::tokenize;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("dictionary line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("code-switch ratio {0} outside [0, 1]")]
    InvalidRatio(f64),
}

/// One translation of a source word, with both its views.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DictTarget {
    pub lang: LanguageId,
    pub surface: String,
    pub roman: String,
}

#[derive(Debug, Clone)]
pub struct BilingualDictionary {
    src_lang: LanguageId,
    tgt_langs: BTreeSet<LanguageId>,
    entries: HashMap<String, Vec<DictTarget>>,
}

impl BilingualDictionary {
    pub fn new(src_lang: LanguageId) -> Self {
        BilingualDictionary {
            src_lang,
            tgt_langs: BTreeSet::new(),
            entries: HashMap::new(),
        }
    }

    /// Adds a translation. Empty strings are refused.
    pub fn insert(&mut self, src: &str, target: DictTarget) -> bool {
        if src.is_empty() || target.surface.is_empty() || target.roman.is_empty() {
            return false;
        }
        self.tgt_langs.insert(target.lang);
        let list = self.entries.entry(src.to_string()).or_default();
        if !list.contains(&target) {
            list.push(target);
        }
        true
    }

    pub fn src_lang(&self) -> LanguageId {
        self.src_lang
    }

    pub fn tgt_langs(&self) -> impl Iterator<Item = LanguageId> + '_ {
        self.tgt_langs.iter().copied()
    }

    pub fn lookup(&self, src: &str) -> Option<&[DictTarget]> {
        self.entries.get(src).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Parses `src_surface<TAB>tgt_lang<TAB>tgt_surface<TAB>tgt_roman` rows.
pub fn parse_dictionary(content: &str, src_lang: LanguageId) -> Result<BilingualDictionary, AugmentError> {
    let mut dict = BilingualDictionary::new(src_lang);
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = |message: String| AugmentError::Malformed { line: line_no, message };
        let cols: Vec<&str> = line.split('\t').collect();
        let [src, lang, surface, roman] = cols[..] else {
            return Err(malformed(format!("expected 4 columns, found {}", cols.len())));
        };
        let lang = LanguageId::from_str(lang).map_err(|e| malformed(e.to_string()))?;
        let target = DictTarget {
            lang,
            surface: surface.to_string(),
            roman: roman.to_string(),
        };
        if !dict.insert(src, target) {
            return Err(malformed("empty field".into()));
        }
    }
    Ok(dict)
}

pub fn load_dictionary(path: &Path, src_lang: LanguageId) -> Result<BilingualDictionary, AugmentError> {
    let content = fs::read_to_string(path).map_err(|source| AugmentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dictionary(&content, src_lang)
}

/// Which stream code-switching rewrites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum View {
    Ortho,
    Roman,
}

impl FromStr for View {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ortho" => Ok(View::Ortho),
            "roman" => Ok(View::Roman),
            _ => Err(format!("unknown view {s:?} (expected ortho or roman)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentationConfig {
    ratio: f64,
    pub seed: u64,
    pub view: View,
    /// Restrict each utterance to one randomly chosen target language.
    pub single_target: bool,
}

impl AugmentationConfig {
    pub fn new(ratio: f64, seed: u64, view: View) -> Result<Self, AugmentError> {
        if !(0.0..=1.0).contains(&ratio) {
            return Err(AugmentError::InvalidRatio(ratio));
        }
        Ok(AugmentationConfig {
            ratio,
            seed,
            view,
            single_target: false,
        })
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn with_single_target(mut self, single_target: bool) -> Self {
        self.single_target = single_target;
        self
    }
}

/// A code-switched utterance and which words were replaced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Switched {
    pub utterance: Utterance,
    pub replaced: Vec<bool>,
}

/// Code-switches with an explicit RNG; words are visited left to right.
pub fn code_switch_with_rng<R: Rng + ?Sized>(
    u: &Utterance,
    dict: &BilingualDictionary,
    cfg: &AugmentationConfig,
    rng: &mut R,
) -> Switched {
    let fixed_lang = if cfg.single_target {
        let langs: Vec<LanguageId> = dict.tgt_langs().collect();
        langs.choose(rng).copied()
    } else {
        None
    };
    let mut out = u.clone();
    let mut replaced = vec![false; u.len()];
    for (i, w) in out.words.iter_mut().enumerate() {
        let Some(targets) = dict.lookup(&u.words[i].surface) else {
            continue;
        };
        let mut langs: Vec<LanguageId> = targets
            .iter()
            .map(|t| t.lang)
            .filter(|l| fixed_lang.is_none_or(|f| f == *l))
            .collect();
        langs.sort();
        langs.dedup();
        if langs.is_empty() {
            continue;
        }
        if !rng.random_bool(cfg.ratio) {
            continue;
        }
        let lang = *langs.choose(rng).expect("non-empty");
        let choices: Vec<&DictTarget> = targets.iter().filter(|t| t.lang == lang).collect();
        let target = *choices.choose(rng).expect("non-empty");
        match cfg.view {
            View::Ortho => {
                w.surface = target.surface.clone();
                w.tokens = tokenize(&target.surface, lang, &[])
                    .into_iter()
                    .map(|t| t.text)
                    .collect();
                if w.tokens.is_empty() {
                    w.tokens = vec![target.surface.clone()];
                }
            }
            View::Roman => w.roman = target.roman.clone(),
        }
        replaced[i] = true;
    }
    if cfg.view == View::Ortho && replaced.iter().any(|r| *r) {
        retile(u, &mut out);
    }
    Switched { utterance: out, replaced }
}

/// Rebuilds text and spans after surfaces changed, keeping the original gaps.
fn retile(original: &Utterance, out: &mut Utterance) {
    let chars: Vec<char> = original.text.chars().collect();
    let mut text = String::new();
    let mut cursor = 0;
    let mut pos = 0;
    for (orig, w) in original.words.iter().zip(out.words.iter_mut()) {
        let gap = &chars[cursor.min(orig.span.start)..orig.span.start];
        text.extend(gap);
        pos += gap.len();
        let n = w.surface.chars().count();
        text.push_str(&w.surface);
        w.span = CharSpan::new(pos, pos + n);
        pos += n;
        cursor = orig.span.end;
    }
    text.extend(&chars[cursor.min(chars.len())..]);
    out.text = text;
}

/// Seeded code-switching of the configured view.
pub fn code_switch(u: &Utterance, dict: &BilingualDictionary, cfg: &AugmentationConfig) -> Utterance {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    code_switch_with_rng(u, dict, cfg, &mut rng).utterance
}

/// Two positive views: ortho switched (roman kept), and roman switched (ortho kept).
///
/// The view fields of `cfgs` are overridden; their seeds drive independent masks.
pub fn multi_view(
    u: &Utterance,
    dict: &BilingualDictionary,
    cfgs: (&AugmentationConfig, &AugmentationConfig),
) -> (Utterance, Utterance) {
    let ortho = AugmentationConfig { view: View::Ortho, ..*cfgs.0 };
    let roman = AugmentationConfig { view: View::Roman, ..*cfgs.1 };
    (code_switch(u, dict, &ortho), code_switch(u, dict, &roman))
}

/// [`multi_view`] drawing both masks in sequence from one RNG stream.
pub fn multi_view_with_rng<R: Rng + ?Sized>(
    u: &Utterance,
    dict: &BilingualDictionary,
    cfg: &AugmentationConfig,
    rng: &mut R,
) -> (Switched, Switched) {
    let ortho = AugmentationConfig { view: View::Ortho, ..*cfg };
    let roman = AugmentationConfig { view: View::Roman, ..*cfg };
    let a = code_switch_with_rng(u, dict, &ortho, rng);
    let b = code_switch_with_rng(u, dict, &roman, rng);
    (a, b)
}
