//! Word-aligned utterances, labeled samples and their JSON-lines serialization.
//!
//! An [`Utterance`] carries two parallel streams over the same `M` words: the
//! orthographic surfaces and their romanizations. Everything downstream
//! (augmentation, fusion, labels) indexes words, never characters.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::bio;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unknown task tag {tag:?}")]
    UnknownTask { line: usize, tag: String },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("unknown language code {0:?}")]
    UnknownLanguage(String),
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// The five languages the toolkit handles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LanguageId {
    Zh,
    Ja,
    Ko,
    Vi,
    En,
}

impl LanguageId {
    pub const ALL: [LanguageId; 5] = [
        LanguageId::Zh,
        LanguageId::Ja,
        LanguageId::Ko,
        LanguageId::Vi,
        LanguageId::En,
    ];

    pub fn code(self) -> &'static str {
        match self {
            LanguageId::Zh => "ZH",
            LanguageId::Ja => "JA",
            LanguageId::Ko => "KO",
            LanguageId::Vi => "VI",
            LanguageId::En => "EN",
        }
    }

    /// Languages whose tokens are whitespace-separated terms rather than characters.
    pub fn is_space_delimited(self) -> bool {
        matches!(self, LanguageId::Vi | LanguageId::En)
    }
}

impl fmt::Display for LanguageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for LanguageId {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ZH" => Ok(LanguageId::Zh),
            "JA" => Ok(LanguageId::Ja),
            "KO" => Ok(LanguageId::Ko),
            "VI" => Ok(LanguageId::Vi),
            "EN" => Ok(LanguageId::En),
            _ => Err(CorpusError::UnknownLanguage(s.to_string())),
        }
    }
}

impl TryFrom<String> for LanguageId {
    type Error = CorpusError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<LanguageId> for String {
    fn from(value: LanguageId) -> Self {
        value.code().to_string()
    }
}

/// Character span `[start, end)` in Unicode scalar values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

impl CharSpan {
    pub fn new(start: usize, end: usize) -> Self {
        CharSpan { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

impl From<[usize; 2]> for CharSpan {
    fn from(v: [usize; 2]) -> Self {
        CharSpan::new(v[0], v[1])
    }
}

impl From<CharSpan> for [usize; 2] {
    fn from(s: CharSpan) -> Self {
        [s.start, s.end]
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// One segmented word carrying both its orthographic and romanized form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Word {
    pub surface: String,
    pub tokens: Vec<String>,
    pub roman: String,
    pub span: CharSpan,
    /// Set when romanization fell back to passing the surface through.
    #[serde(default, skip_serializing_if = "is_false")]
    pub oov: bool,
}

impl Word {
    pub fn new(surface: impl Into<String>, tokens: Vec<String>, span: CharSpan) -> Self {
        Word {
            surface: surface.into(),
            tokens,
            roman: String::new(),
            span,
            oov: false,
        }
    }

    pub fn has_letters(&self) -> bool {
        self.surface.chars().any(char::is_alphabetic)
    }

    /// Whether the tokens rebuild the surface, either concatenated or space-joined.
    pub fn tokens_match_surface(&self) -> bool {
        !self.tokens.is_empty()
            && (self.tokens.concat() == self.surface || self.tokens.join(" ") == self.surface)
    }
}

/// A sentence in one language with its word-aligned orthographic and romanized streams.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub lang: LanguageId,
    pub text: String,
    pub words: Vec<Word>,
}

impl Utterance {
    pub fn new(lang: LanguageId, text: impl Into<String>, words: Vec<Word>) -> Self {
        Utterance {
            lang,
            text: text.into(),
            words,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(|w| w.surface.as_str())
    }

    pub fn romans(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(|w| w.roman.as_str())
    }

    /// The romanized stream in `a // b // c` form.
    pub fn roman_line(&self) -> String {
        self.romans().collect::<Vec<_>>().join(" // ")
    }

    /// The text covered by a word range, taken from the original sentence.
    pub fn text_of_words(&self, start_word: usize, end_word: usize) -> Option<String> {
        let first = self.words.get(start_word)?;
        let last = self.words.get(end_word)?;
        if last.span.end < first.span.start {
            return None;
        }
        Some(
            self.text
                .chars()
                .skip(first.span.start)
                .take(last.span.end - first.span.start)
                .collect(),
        )
    }
}

/// A broken utterance invariant. Word indices are zero-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    TokensDoNotFormSurface { word: usize },
    EmptySpan { word: usize },
    SpanOutOfBounds { word: usize },
    SpanTextMismatch { word: usize },
    Overlap { word: usize },
    NonWhitespaceGap { word: usize },
    TrailingText,
    MissingRoman { word: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TokensDoNotFormSurface { word } => {
                write!(f, "word {word}: tokens do not form the surface")
            }
            Violation::EmptySpan { word } => write!(f, "word {word}: empty span"),
            Violation::SpanOutOfBounds { word } => write!(f, "word {word}: span past end of text"),
            Violation::SpanTextMismatch { word } => {
                write!(f, "word {word}: surface differs from the text at its span")
            }
            Violation::Overlap { word } => write!(f, "word {word}: overlaps the previous word"),
            Violation::NonWhitespaceGap { word } => {
                write!(f, "word {word}: non-whitespace text precedes it uncovered")
            }
            Violation::TrailingText => write!(f, "non-whitespace text after the last word"),
            Violation::MissingRoman { word } => {
                write!(f, "word {word}: letters present but roman is empty")
            }
        }
    }
}

/// Lists every violated utterance invariant; an empty list means valid.
pub fn validate_utterance(u: &Utterance) -> Vec<Violation> {
    let chars: Vec<char> = u.text.chars().collect();
    let mut out = Vec::new();
    let mut cursor = 0usize;
    for (i, w) in u.words.iter().enumerate() {
        if !w.tokens_match_surface() {
            out.push(Violation::TokensDoNotFormSurface { word: i });
        }
        if w.has_letters() && w.roman.is_empty() {
            out.push(Violation::MissingRoman { word: i });
        }
        if w.span.is_empty() {
            out.push(Violation::EmptySpan { word: i });
            continue;
        }
        if w.span.end > chars.len() {
            out.push(Violation::SpanOutOfBounds { word: i });
            continue;
        }
        if w.span.start < cursor {
            out.push(Violation::Overlap { word: i });
        } else if !chars[cursor..w.span.start].iter().all(|c| c.is_whitespace()) {
            out.push(Violation::NonWhitespaceGap { word: i });
        }
        let covered: String = chars[w.span.start..w.span.end].iter().collect();
        if covered != w.surface {
            out.push(Violation::SpanTextMismatch { word: i });
        }
        cursor = cursor.max(w.span.end);
    }
    if cursor <= chars.len() && !chars[cursor..].iter().all(|c| c.is_whitespace()) {
        out.push(Violation::TrailingText);
    }
    out
}

/// The six benchmark tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "PAWSX")]
    Pawsx,
    #[serde(rename = "XNLI")]
    Xnli,
    #[serde(rename = "UDPOS")]
    Udpos,
    #[serde(rename = "PANX")]
    Panx,
    #[serde(rename = "XQUAD")]
    Xquad,
    #[serde(rename = "MLQA")]
    Mlqa,
}

/// How a task shapes its inputs and labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskLevel {
    SentencePair,
    TokenTagging,
    QuestionAnswering,
}

impl Task {
    pub const ALL: [Task; 6] = [
        Task::Pawsx,
        Task::Xnli,
        Task::Udpos,
        Task::Panx,
        Task::Xquad,
        Task::Mlqa,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Task::Pawsx => "PAWSX",
            Task::Xnli => "XNLI",
            Task::Udpos => "UDPOS",
            Task::Panx => "PANX",
            Task::Xquad => "XQUAD",
            Task::Mlqa => "MLQA",
        }
    }

    pub fn level(self) -> TaskLevel {
        match self {
            Task::Pawsx | Task::Xnli => TaskLevel::SentencePair,
            Task::Udpos | Task::Panx => TaskLevel::TokenTagging,
            Task::Xquad | Task::Mlqa => TaskLevel::QuestionAnswering,
        }
    }

    /// Class count for sentence-pair tasks.
    pub fn num_classes(self) -> Option<usize> {
        match self {
            Task::Pawsx => Some(2),
            Task::Xnli => Some(3),
            _ => None,
        }
    }

    /// Whether inputs go through machine translation when building target-language data.
    pub fn uses_translation(self) -> bool {
        self.level() != TaskLevel::TokenTagging
    }

    /// Whether raw input is re-segmented. UDPOS arrives pre-segmented.
    pub fn uses_segmentation(self) -> bool {
        self != Task::Udpos
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        Task::ALL
            .into_iter()
            .find(|t| t.tag() == upper)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SampleInputs {
    Pair(Utterance, Utterance),
    Single(Utterance),
    Qa { context: Utterance, question: Utterance },
}

impl SampleInputs {
    /// Every utterance in the sample, in schema order.
    pub fn utterances(&self) -> Vec<&Utterance> {
        match self {
            SampleInputs::Pair(a, b) => vec![a, b],
            SampleInputs::Single(u) => vec![u],
            SampleInputs::Qa { context, question } => vec![context, question],
        }
    }

    pub fn utterances_mut(&mut self) -> Vec<&mut Utterance> {
        match self {
            SampleInputs::Pair(a, b) => vec![a, b],
            SampleInputs::Single(u) => vec![u],
            SampleInputs::Qa { context, question } => vec![context, question],
        }
    }

    pub fn lang(&self) -> LanguageId {
        self.utterances()[0].lang
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Label {
    Class(usize),
    Tags(Vec<String>),
    /// Inclusive word span in the context.
    AnswerSpan { start_word: usize, end_word: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSample {
    pub id: String,
    pub task: Task,
    pub inputs: SampleInputs,
    pub label: Label,
}

impl LabeledSample {
    /// Checks shape agreement between task, inputs and label.
    pub fn check(&self) -> Result<(), String> {
        match (self.task.level(), &self.inputs, &self.label) {
            (TaskLevel::SentencePair, SampleInputs::Pair(..), Label::Class(c)) => {
                let n = self.task.num_classes().unwrap_or(usize::MAX);
                if *c >= n {
                    return Err(format!("class label {c} out of range for {} ({n} classes)", self.task));
                }
            }
            (TaskLevel::TokenTagging, SampleInputs::Single(u), Label::Tags(tags)) => {
                if tags.len() != u.len() {
                    return Err(format!(
                        "tag list has {} entries, expected {} (one per word)",
                        tags.len(),
                        u.len()
                    ));
                }
                if self.task == Task::Panx {
                    bio::validate(tags).map_err(|v| format!("invalid BIO: {v}"))?;
                }
            }
            (
                TaskLevel::QuestionAnswering,
                SampleInputs::Qa { context, .. },
                Label::AnswerSpan { start_word, end_word },
            ) => {
                if start_word > end_word || *end_word >= context.len() {
                    return Err(format!(
                        "answer span [{start_word}, {end_word}] outside context of {} words",
                        context.len()
                    ));
                }
            }
            _ => return Err(format!("inputs/label shape does not fit task {}", self.task)),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            _ => Err(s.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub task: Task,
    pub split: Split,
    pub source_lang: LanguageId,
    pub samples: Vec<LabeledSample>,
}

/// What a dataset file is expected to contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetSchema {
    pub task: Task,
    pub split: Split,
}

impl DatasetSchema {
    pub fn new(task: Task, split: Split) -> Self {
        DatasetSchema { task, split }
    }
}

#[derive(Serialize, Deserialize)]
struct UtteranceBody {
    text: String,
    words: Vec<Word>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    task: String,
    lang: LanguageId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    words: Option<Vec<Word>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text2: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    words2: Option<Vec<Word>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    context: Option<UtteranceBody>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    question: Option<UtteranceBody>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    answer_span: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<Value>,
}

fn body(u: &Utterance) -> UtteranceBody {
    UtteranceBody {
        text: u.text.clone(),
        words: u.words.clone(),
    }
}

fn to_record(s: &LabeledSample) -> Record {
    let lang = s.inputs.lang();
    let mut r = Record {
        id: s.id.clone(),
        task: s.task.tag().to_string(),
        lang,
        text: None,
        words: None,
        text2: None,
        words2: None,
        context: None,
        question: None,
        answer_span: None,
        label: None,
    };
    match &s.inputs {
        SampleInputs::Pair(a, b) => {
            r.text = Some(a.text.clone());
            r.words = Some(a.words.clone());
            r.text2 = Some(b.text.clone());
            r.words2 = Some(b.words.clone());
        }
        SampleInputs::Single(u) => {
            r.text = Some(u.text.clone());
            r.words = Some(u.words.clone());
        }
        SampleInputs::Qa { context, question } => {
            r.context = Some(body(context));
            r.question = Some(body(question));
        }
    }
    match &s.label {
        Label::Class(c) => r.label = Some(Value::from(*c)),
        Label::Tags(t) => r.label = Some(Value::from(t.clone())),
        Label::AnswerSpan { start_word, end_word } => r.answer_span = Some([*start_word, *end_word]),
    }
    r
}

/// Serializes one sample as a single JSON line (no trailing newline).
pub fn sample_to_json(s: &LabeledSample) -> String {
    serde_json::to_string(&to_record(s)).expect("records always serialize")
}

/// Parses one JSON line into a sample, checking it against `expected` task.
pub fn sample_from_json(line: &str, line_no: usize, expected: Task) -> Result<LabeledSample, CorpusError> {
    let malformed = |message: String| CorpusError::Malformed { line: line_no, message };
    let schema = |message: String| CorpusError::Schema { line: line_no, message };
    let r: Record = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    let task: Task = r.task.parse().map_err(|tag| CorpusError::UnknownTask { line: line_no, tag })?;
    if task != expected {
        return Err(schema(format!("task {task} does not match expected {expected}")));
    }
    let lang = r.lang;
    let utt = |text: Option<String>, words: Option<Vec<Word>>, what: &str| {
        match (text, words) {
            (Some(text), Some(words)) => Ok(Utterance { lang, text, words }),
            _ => Err(schema(format!("missing {what}"))),
        }
    };
    let (inputs, label) = match task.level() {
        TaskLevel::SentencePair => {
            let a = utt(r.text, r.words, "text/words")?;
            let b = utt(r.text2, r.words2, "text2/words2")?;
            let c = r
                .label
                .as_ref()
                .and_then(Value::as_u64)
                .ok_or_else(|| schema("label must be a non-negative integer".into()))?;
            (SampleInputs::Pair(a, b), Label::Class(c as usize))
        }
        TaskLevel::TokenTagging => {
            let u = utt(r.text, r.words, "text/words")?;
            let tags: Vec<String> = r
                .label
                .and_then(|v| serde_json::from_value(v).ok())
                .ok_or_else(|| schema("label must be a list of tag strings".into()))?;
            (SampleInputs::Single(u), Label::Tags(tags))
        }
        TaskLevel::QuestionAnswering => {
            let c = r.context.ok_or_else(|| schema("missing context".into()))?;
            let q = r.question.ok_or_else(|| schema("missing question".into()))?;
            let [s, e] = r.answer_span.ok_or_else(|| schema("missing answer_span".into()))?;
            (
                SampleInputs::Qa {
                    context: Utterance { lang, text: c.text, words: c.words },
                    question: Utterance { lang, text: q.text, words: q.words },
                },
                Label::AnswerSpan { start_word: s, end_word: e },
            )
        }
    };
    let sample = LabeledSample { id: r.id, task, inputs, label };
    sample.check().map_err(schema)?;
    Ok(sample)
}

/// Loads a dataset file. Blank lines are skipped; line numbers are 1-based.
pub fn read_dataset(path: &Path, schema: DatasetSchema) -> Result<Dataset, CorpusError> {
    let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut samples = Vec::new();
    let mut ids = HashSet::new();
    let mut source_lang = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let sample = sample_from_json(&line, line_no, schema.task)?;
        if !ids.insert(sample.id.clone()) {
            return Err(CorpusError::Schema {
                line: line_no,
                message: format!("duplicate sample id {:?}", sample.id),
            });
        }
        let lang = sample.inputs.lang();
        match source_lang {
            None => source_lang = Some(lang),
            Some(l) if l != lang => {
                return Err(CorpusError::Schema {
                    line: line_no,
                    message: format!("language {lang} differs from the file's {l}"),
                })
            }
            _ => {}
        }
        samples.push(sample);
    }
    Ok(Dataset {
        task: schema.task,
        split: schema.split,
        // an empty file has no language of its own
        source_lang: source_lang.unwrap_or(LanguageId::En),
        samples,
    })
}

/// Writes one JSON object per line.
pub fn write_dataset(d: &Dataset, path: &Path) -> Result<(), CorpusError> {
    let mut out = Vec::new();
    write_samples(&d.samples, &mut out).map_err(|e| CorpusError::io(path, e))?;
    fs::write(path, out).map_err(|e| CorpusError::io(path, e))
}

pub fn write_samples<W: Write>(samples: &[LabeledSample], mut w: W) -> std::io::Result<()> {
    for s in samples {
        writeln!(w, "{}", sample_to_json(s))?;
    }
    Ok(())
}
