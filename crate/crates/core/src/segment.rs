//! Dictionary-driven word segmentation and token-to-word label projection.
//!
//! Tokens are characters for ZH/JA/KO and whitespace-separated terms for VI/EN.
//! Words are formed by greedy forward maximum matching against a [`Lexicon`].

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::bio::{self, BioViolation, Tag};
use crate::corpus::{CharSpan, LanguageId, Utterance, Word};

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon line {line}: expected 3 tab-separated columns, found {found}")]
    MalformedRow { line: usize, found: usize },
    #[error("lexicon line {line}: invalid surface {surface:?}")]
    InvalidSurface { line: usize, surface: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProjectionError {
    #[error("{got} token tags for {expected} tokens")]
    LengthMismatch { expected: usize, got: usize },
    #[error("token tags are not valid BIO: {0}")]
    InvalidBio(BioViolation),
    #[error("word {word}: its tokens carry inconsistent labels")]
    Inconsistent { word: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LexEntry {
    /// Kana reading (JA).
    pub reading: Option<String>,
    /// Tone-marked pinyin (ZH).
    pub pinyin: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    lang: LanguageId,
    entries: HashMap<String, LexEntry>,
    max_entry_len: usize,
}

impl Lexicon {
    pub fn empty(lang: LanguageId) -> Self {
        Lexicon {
            lang,
            entries: HashMap::new(),
            max_entry_len: 0,
        }
    }

    pub fn from_entries<I, S>(lang: LanguageId, entries: I) -> Self
    where
        I: IntoIterator<Item = (S, LexEntry)>,
        S: Into<String>,
    {
        let mut lex = Lexicon::empty(lang);
        for (surface, entry) in entries {
            lex.insert(surface.into(), entry);
        }
        lex
    }

    /// Inserts or replaces an entry, returning the previous one.
    pub fn insert(&mut self, surface: String, entry: LexEntry) -> Option<LexEntry> {
        let len = entry_token_len(self.lang, &surface);
        let prev = self.entries.insert(surface, entry);
        if prev.is_some() {
            self.max_entry_len = self
                .entries
                .keys()
                .map(|k| entry_token_len(self.lang, k))
                .max()
                .unwrap_or(0);
        } else {
            self.max_entry_len = self.max_entry_len.max(len);
        }
        prev
    }

    pub fn lang(&self) -> LanguageId {
        self.lang
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_entry_len(&self) -> usize {
        self.max_entry_len
    }

    pub fn get(&self, surface: &str) -> Option<&LexEntry> {
        self.entries.get(surface)
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.entries.contains_key(surface)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &LexEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }
}

fn entry_token_len(lang: LanguageId, surface: &str) -> usize {
    tokenize(surface, lang, &[]).len()
}

fn valid_surface(lang: LanguageId, surface: &str) -> bool {
    if surface.is_empty() {
        return false;
    }
    if lang.is_space_delimited() {
        // single internal spaces only
        surface.trim() == surface
            && !surface.contains("  ")
            && !surface.chars().any(|c| c.is_whitespace() && c != ' ')
    } else {
        !surface.chars().any(char::is_whitespace)
    }
}

/// Parses lexicon TSV: `surface<TAB>reading_or_empty<TAB>pinyin_or_empty`.
pub fn parse_lexicon(content: &str, lang: LanguageId) -> Result<Lexicon, SegmentError> {
    let mut lex = Lexicon::empty(lang);
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(SegmentError::MalformedRow {
                line: line_no,
                found: cols.len(),
            });
        }
        let surface = cols[0];
        if !valid_surface(lang, surface) {
            return Err(SegmentError::InvalidSurface {
                line: line_no,
                surface: surface.to_string(),
            });
        }
        let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
        let entry = LexEntry {
            reading: opt(cols[1]),
            pinyin: opt(cols[2]),
        };
        if lex.insert(surface.to_string(), entry).is_some() {
            log::warn!("lexicon line {line_no}: duplicate surface {surface:?}, keeping the later row");
        }
    }
    Ok(lex)
}

pub fn load_lexicon(path: &Path, lang: LanguageId) -> Result<Lexicon, SegmentError> {
    let content = fs::read_to_string(path).map_err(|source| SegmentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_lexicon(&content, lang)
}

/// A token with its char span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub span: CharSpan,
    pub punct: bool,
}

/// Punctuation and symbols: neither letters, digits nor whitespace.
pub fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Han, kana and Hangul characters, which are tokens on their own.
pub fn is_cjk_char(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF   // kana
        | 0x31F0..=0x31FF // katakana phonetic extensions
        | 0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xF900..=0xFAFF
        | 0x20000..=0x3134F
        | 0x1100..=0x11FF // jamo
        | 0x3130..=0x318F
        | 0xAC00..=0xD7A3)
}

/// Splits text into tokens, never letting a token cross a forced boundary offset.
pub fn tokenize(text: &str, lang: LanguageId, boundaries: &[usize]) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut run_start: Option<usize> = None;
    let flush = |out: &mut Vec<Token>, start: usize, end: usize| {
        out.push(Token {
            text: chars[start..end].iter().collect(),
            span: CharSpan::new(start, end),
            punct: false,
        });
    };
    for (i, &c) in chars.iter().enumerate() {
        if boundaries.contains(&i) {
            if let Some(s) = run_start.take() {
                flush(&mut out, s, i);
            }
        }
        let standalone = c.is_whitespace() || is_punct(c) || (!lang.is_space_delimited() && is_cjk_char(c));
        if standalone {
            if let Some(s) = run_start.take() {
                flush(&mut out, s, i);
            }
            if !c.is_whitespace() {
                out.push(Token {
                    text: c.to_string(),
                    span: CharSpan::new(i, i + 1),
                    punct: is_punct(c),
                });
            }
        } else if run_start.is_none() {
            run_start = Some(i);
        }
    }
    if let Some(s) = run_start {
        flush(&mut out, s, chars.len());
    }
    out
}

/// Whether `next` may extend a word ending in `prev` without crossing a boundary.
fn joinable(lang: LanguageId, chars: &[char], prev: &Token, next: &Token, boundaries: &[usize]) -> bool {
    if next.punct || boundaries.contains(&next.span.start) {
        return false;
    }
    let gap = &chars[prev.span.end..next.span.start];
    if lang.is_space_delimited() {
        gap == [' ']
    } else {
        gap.is_empty()
    }
}

fn word_from_tokens(lang: LanguageId, toks: &[Token]) -> Word {
    let tokens: Vec<String> = toks.iter().map(|t| t.text.clone()).collect();
    let surface = if lang.is_space_delimited() {
        tokens.join(" ")
    } else {
        tokens.concat()
    };
    let span = CharSpan::new(toks[0].span.start, toks[toks.len() - 1].span.end);
    Word::new(surface, tokens, span)
}

/// Greedy forward maximum matching over a token sequence.
pub fn segment_tokens(text: &str, tokens: &[Token], lex: &Lexicon, boundaries: &[usize]) -> Vec<Word> {
    let lang = lex.lang();
    let chars: Vec<char> = text.chars().collect();
    let mut words = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let mut take = 1;
        if !tokens[i].punct {
            // longest joinable run starting at i
            let mut reach = 1;
            while reach < lex.max_entry_len()
                && i + reach < tokens.len()
                && joinable(lang, &chars, &tokens[i + reach - 1], &tokens[i + reach], boundaries)
            {
                reach += 1;
            }
            for len in (2..=reach).rev() {
                let w = word_from_tokens(lang, &tokens[i..i + len]);
                if lex.contains(&w.surface) {
                    take = len;
                    break;
                }
            }
        }
        words.push(word_from_tokens(lang, &tokens[i..i + take]));
        i += take;
    }
    words
}

/// Segments `text` into words. Roman fields are left empty.
pub fn segment(text: &str, lex: &Lexicon) -> Vec<Word> {
    segment_with_boundaries(text, lex, &[])
}

/// Segments with char offsets that must fall on word boundaries.
pub fn segment_with_boundaries(text: &str, lex: &Lexicon, boundaries: &[usize]) -> Vec<Word> {
    let tokens = tokenize(text, lex.lang(), boundaries);
    segment_tokens(text, &tokens, lex, boundaries)
}

pub fn segment_utterance(text: &str, lex: &Lexicon) -> Utterance {
    Utterance::new(lex.lang(), text, segment(text, lex))
}

/// Collapses per-token BIO tags onto words.
///
/// A word takes its first token's tag. Every further token must be `I-X` of the
/// same type, or `O` when the word is `O`; anything else means the segmentation
/// splits or merges an annotated entity.
pub fn project_token_labels_to_words<S: AsRef<str>>(
    token_tags: &[S],
    words: &[Word],
) -> Result<Vec<String>, ProjectionError> {
    let expected: usize = words.iter().map(|w| w.tokens.len()).sum();
    if expected != token_tags.len() {
        return Err(ProjectionError::LengthMismatch {
            expected,
            got: token_tags.len(),
        });
    }
    bio::validate(token_tags).map_err(ProjectionError::InvalidBio)?;
    let mut out = Vec::with_capacity(words.len());
    let mut offset = 0;
    for (wi, w) in words.iter().enumerate() {
        let tags = &token_tags[offset..offset + w.tokens.len()];
        offset += w.tokens.len();
        let first = Tag::parse(tags[0].as_ref()).expect("validated");
        for t in &tags[1..] {
            let t = Tag::parse(t.as_ref()).expect("validated");
            let consistent = match (&first, &t) {
                (Tag::Outside, Tag::Outside) => true,
                (Tag::Begin(a) | Tag::Inside(a), Tag::Inside(b)) => a == b,
                _ => false,
            };
            if !consistent {
                return Err(ProjectionError::Inconsistent { word: wi });
            }
        }
        out.push(first.to_string());
    }
    Ok(out)
}
