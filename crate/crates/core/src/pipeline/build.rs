//! Raw task files to schema-valid per-language datasets.
//!
//! Raw inputs are JSON lines:
//!
//! - PAWSX, XNLI: `{"id", "sentence1", "sentence2", "label"}`
//! - UDPOS, PANX: `{"id", "tokens": [...], "tags": [...]}`
//! - XQUAD, MLQA: `{"id", "context", "question", "answer", "answer_start"}`
//!
//! Sentence-pair and QA inputs are translated into each target language; tagged
//! inputs are already in the source language and are not translated.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use super::mt::{MtClient, MtError};
use super::qa::{mask_context, translate_qa_template, QaError, QaTemplate, DEFAULT_MASK};
use crate::corpus::{
    sample_to_json, validate_utterance, CharSpan, Label, LabeledSample, LanguageId, SampleInputs, Split, Task,
    TaskLevel, Utterance, Word,
};
use crate::romanize::{romanize_utterance, RomanizationTables, RomanizeOptions};
use crate::segment::{project_token_labels_to_words, segment, segment_tokens, Lexicon, ProjectionError, Token};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("{path} line {line}: {message}")]
    Raw { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Mt(#[from] MtError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BuildError + '_ {
    move |source| BuildError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPair {
    id: String,
    sentence1: String,
    sentence2: String,
    label: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTagged {
    id: String,
    tokens: Vec<String>,
    tags: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQa {
    id: String,
    context: String,
    question: String,
    answer: String,
    answer_start: usize,
}

#[derive(Debug)]
enum RawSample {
    Pair(RawPair),
    Tagged(RawTagged),
    Qa(RawQa),
}

impl RawSample {
    fn id(&self) -> &str {
        match self {
            RawSample::Pair(r) => &r.id,
            RawSample::Tagged(r) => &r.id,
            RawSample::Qa(r) => &r.id,
        }
    }
}

fn read_raw(path: &Path, task: Task) -> Result<Vec<RawSample>, BuildError> {
    let content = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |e: serde_json::Error| BuildError::Raw {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        };
        let s = match task.level() {
            TaskLevel::SentencePair => RawSample::Pair(serde_json::from_str(line).map_err(err)?),
            TaskLevel::TokenTagging => RawSample::Tagged(serde_json::from_str(line).map_err(err)?),
            TaskLevel::QuestionAnswering => RawSample::Qa(serde_json::from_str(line).map_err(err)?),
        };
        out.push(s);
    }
    Ok(out)
}

pub struct BuildConfig {
    pub task: Task,
    pub split: Split,
    pub source_lang: LanguageId,
    /// Languages to emit; ignored for tasks without translation.
    pub targets: Vec<LanguageId>,
    pub lexicons: HashMap<LanguageId, Lexicon>,
    pub tables: RomanizationTables,
    pub romanize: RomanizeOptions,
    pub mask: String,
    /// Worker threads for per-sample processing.
    pub jobs: usize,
}

impl BuildConfig {
    pub fn new(task: Task, split: Split, source_lang: LanguageId, targets: Vec<LanguageId>) -> Self {
        BuildConfig {
            task,
            split,
            source_lang,
            targets,
            lexicons: HashMap::new(),
            tables: RomanizationTables::standard(),
            romanize: RomanizeOptions::default(),
            mask: DEFAULT_MASK.to_string(),
            jobs: 1,
        }
    }

    fn lexicon(&self, lang: LanguageId) -> Lexicon {
        self.lexicons.get(&lang).cloned().unwrap_or_else(|| Lexicon::empty(lang))
    }

    /// Languages that get an output file.
    pub fn output_langs(&self) -> Vec<LanguageId> {
        if self.task.uses_translation() {
            let mut v = self.targets.clone();
            v.dedup();
            v
        } else {
            vec![self.source_lang]
        }
    }
}

/// Per-language outcome.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct LangReport {
    pub lang: LanguageId,
    pub path: PathBuf,
    pub written: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct BuildReport {
    pub task: Task,
    pub input: usize,
    pub languages: Vec<LangReport>,
}

pub fn output_path(dir: &Path, task: Task, split: Split, lang: LanguageId) -> PathBuf {
    let split = match split {
        Split::Train => "train",
        Split::Dev => "dev",
        Split::Test => "test",
    };
    dir.join(format!(
        "{}.{split}.{}.jsonl",
        task.tag().to_ascii_lowercase(),
        lang.code().to_ascii_lowercase()
    ))
}

/// Builds the word-aligned utterance for already-tokenized text.
fn utterance_from_tokens(lang: LanguageId, raw: &[String], lex: &Lexicon, boundaries: &[usize]) -> Utterance {
    let sep = if lang.is_space_delimited() { " " } else { "" };
    let text = raw.join(sep);
    let mut tokens = Vec::with_capacity(raw.len());
    let mut pos = 0;
    for t in raw {
        let n = t.chars().count();
        tokens.push(Token {
            text: t.clone(),
            span: CharSpan::new(pos, pos + n),
            punct: t.chars().all(crate::segment::is_punct),
        });
        pos += n + sep.len();
    }
    let words = segment_tokens(&text, &tokens, lex, boundaries);
    Utterance::new(lang, text, words)
}

/// Char offsets where a tagged entity starts or ends, for forced boundaries.
fn entity_boundaries(u: &Utterance, tags: &[String]) -> Vec<usize> {
    let starts: Vec<usize> = u.words.iter().flat_map(|w| {
        let mut s = Vec::new();
        let mut pos = w.span.start;
        for t in &w.tokens {
            s.push(pos);
            pos += t.chars().count() + usize::from(u.lang.is_space_delimited());
        }
        s
    }).collect();
    let mut out = Vec::new();
    for (i, t) in tags.iter().enumerate() {
        let next_inside = tags.get(i + 1).is_some_and(|n| n.starts_with("I-"));
        if t.starts_with("B-") {
            out.push(starts[i]);
        }
        if t != "O" && !next_inside && i + 1 < starts.len() {
            out.push(starts[i + 1]);
        }
        if t == "O" && next_inside {
            out.push(starts[i + 1]);
        }
    }
    out
}

type Outcome = Result<LabeledSample, String>;

struct Builder<'a> {
    cfg: &'a BuildConfig,
    client: &'a MtClient,
}

impl Builder<'_> {
    fn finish(&self, u: &Utterance, lang: LanguageId) -> Utterance {
        romanize_utterance(u, &self.cfg.lexicon(lang), &self.cfg.tables, self.cfg.romanize)
    }

    fn text(&self, text: &str, lang: LanguageId) -> Utterance {
        let lex = self.cfg.lexicon(lang);
        self.finish(&Utterance::new(lang, text, segment(text, &lex)), lang)
    }

    fn pair(&self, r: &RawPair, tgt: LanguageId) -> Outcome {
        let src = self.cfg.source_lang;
        let t1 = self.client.translate(&r.sentence1, src, tgt).map_err(|e| e.to_string())?;
        let t2 = self.client.translate(&r.sentence2, src, tgt).map_err(|e| e.to_string())?;
        Ok(LabeledSample {
            id: r.id.clone(),
            task: self.cfg.task,
            inputs: SampleInputs::Pair(self.text(&t1.text, tgt), self.text(&t2.text, tgt)),
            label: Label::Class(r.label),
        })
    }

    fn tagged(&self, r: &RawTagged) -> Outcome {
        let lang = self.cfg.source_lang;
        if r.tokens.len() != r.tags.len() {
            return Err(format!("{} tokens but {} tags", r.tokens.len(), r.tags.len()));
        }
        if r.tokens.iter().any(|t| t.is_empty() || t.chars().any(char::is_whitespace)) {
            return Err("tokens must be non-empty and contain no whitespace".into());
        }
        let (u, tags) = if self.cfg.task.uses_segmentation() {
            let lex = self.cfg.lexicon(lang);
            let u = utterance_from_tokens(lang, &r.tokens, &lex, &[]);
            match project_token_labels_to_words(&r.tags, &u.words) {
                Ok(tags) => (u, tags),
                Err(ProjectionError::Inconsistent { word }) => {
                    // segmentation merged tokens across an entity edge; split there
                    log::info!("sample {}: word {word} crosses an entity boundary, resegmenting", r.id);
                    let forced = entity_boundaries(&u, &r.tags);
                    let u = utterance_from_tokens(lang, &r.tokens, &lex, &forced);
                    let tags = project_token_labels_to_words(&r.tags, &u.words).map_err(|e| e.to_string())?;
                    (u, tags)
                }
                Err(e) => return Err(e.to_string()),
            }
        } else {
            // no segmentation: every raw token is a word
            let u = utterance_from_tokens(lang, &r.tokens, &Lexicon::empty(lang), &[]);
            let words: Vec<Word> = u
                .words
                .iter()
                .flat_map(|w| {
                    let mut pos = w.span.start;
                    w.tokens
                        .iter()
                        .map(|t| {
                            let n = t.chars().count();
                            let word = Word::new(t.clone(), vec![t.clone()], CharSpan::new(pos, pos + n));
                            pos += n + usize::from(lang.is_space_delimited());
                            word
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
            (Utterance::new(lang, u.text, words), r.tags.clone())
        };
        Ok(LabeledSample {
            id: r.id.clone(),
            task: self.cfg.task,
            inputs: SampleInputs::Single(self.finish(&u, lang)),
            label: Label::Tags(tags),
        })
    }

    fn qa(&self, r: &RawQa, tgt: LanguageId) -> Outcome {
        let t = QaTemplate {
            context: r.context.clone(),
            question: r.question.clone(),
            answer: r.answer.clone(),
            answer_start: r.answer_start,
        };
        let lex = self.cfg.lexicon(tgt);
        let out = translate_qa_template(self.client, &t, self.cfg.source_lang, tgt, &self.cfg.mask, &lex)
            .map_err(|e: QaError| e.to_string())?;
        Ok(LabeledSample {
            id: r.id.clone(),
            task: self.cfg.task,
            inputs: SampleInputs::Qa {
                context: self.finish(&out.context, tgt),
                question: self.text(&out.question, tgt),
            },
            label: Label::AnswerSpan {
                start_word: out.answer_words.0,
                end_word: out.answer_words.1,
            },
        })
    }

    fn one(&self, raw: &RawSample, lang: LanguageId) -> Outcome {
        let s = match raw {
            RawSample::Pair(r) => self.pair(r, lang)?,
            RawSample::Tagged(r) => self.tagged(r)?,
            RawSample::Qa(r) => self.qa(r, lang)?,
        };
        s.check()?;
        for u in s.inputs.utterances() {
            if let Some(v) = validate_utterance(u).first() {
                return Err(format!("invalid utterance: {v:?}"));
            }
        }
        Ok(s)
    }

    /// Sends every distinct MT request once, so per-sample work hits the cache.
    fn prefetch(&self, raws: &[RawSample], tgt: LanguageId) {
        let mut texts: Vec<String> = Vec::new();
        for r in raws {
            match r {
                RawSample::Pair(p) => texts.extend([p.sentence1.clone(), p.sentence2.clone()]),
                RawSample::Qa(q) => {
                    let t = QaTemplate {
                        context: q.context.clone(),
                        question: q.question.clone(),
                        answer: q.answer.clone(),
                        answer_start: q.answer_start,
                    };
                    if let Ok(m) = mask_context(&t, &self.cfg.mask) {
                        texts.push(m);
                    }
                    texts.extend([q.question.clone(), q.answer.clone()]);
                }
                RawSample::Tagged(_) => {}
            }
        }
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        // failures surface again, per sample, in the main pass
        let _ = self.client.translate_batch(&refs, self.cfg.source_lang, tgt);
    }
}

/// Builds one dataset file per output language in `out_dir`.
///
/// Files are first written as `*.partial` and renamed only after every
/// language succeeded. Samples that cannot be built are dropped with a log line.
pub fn build_dataset(input: &Path, cfg: &BuildConfig, client: &MtClient, out_dir: &Path) -> Result<BuildReport, BuildError> {
    if cfg.jobs == 0 {
        return Err(BuildError::Config("jobs must be positive".into()));
    }
    if cfg.mask.is_empty() {
        return Err(BuildError::Config("mask token must be non-empty".into()));
    }
    let raws = read_raw(input, cfg.task)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| BuildError::Config(e.to_string()))?;
    let builder = Builder { cfg, client };
    let mut staged = Vec::new();
    let mut languages = Vec::new();
    for lang in cfg.output_langs() {
        if cfg.task.uses_translation() && lang != cfg.source_lang {
            builder.prefetch(&raws, lang);
        }
        let outcomes: Vec<Outcome> = pool.install(|| raws.par_iter().map(|r| builder.one(r, lang)).collect());
        let mut body = String::new();
        let mut written = 0;
        let mut dropped = 0;
        for (raw, o) in raws.iter().zip(outcomes) {
            match o {
                Ok(s) => {
                    body.push_str(&sample_to_json(&s));
                    body.push('\n');
                    written += 1;
                }
                Err(reason) => {
                    log::warn!("{} {}: dropped sample {}: {reason}", cfg.task.tag(), lang, raw.id());
                    dropped += 1;
                }
            }
        }
        let path = output_path(out_dir, cfg.task, cfg.split, lang);
        let partial = path.with_extension("jsonl.partial");
        fs::write(&partial, body).map_err(io_err(&partial))?;
        log::info!("{} {}: {written} samples, {dropped} dropped", cfg.task.tag(), lang);
        staged.push((partial, path.clone()));
        languages.push(LangReport {
            lang,
            path,
            written,
            dropped,
        });
    }
    for (partial, path) in &staged {
        fs::rename(partial, path).map_err(io_err(path))?;
    }
    Ok(BuildReport {
        task: cfg.task,
        input: raws.len(),
        languages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{read_dataset, DatasetSchema};
    use crate::pipeline::mt::MockBackend;
    use crate::segment::LexEntry;

    fn lex(lang: LanguageId, words: &[(&str, Option<&str>, Option<&str>)]) -> Lexicon {
        Lexicon::from_entries(
            lang,
            words.iter().map(|(w, r, p)| {
                (
                    *w,
                    LexEntry {
                        reading: r.map(String::from),
                        pinyin: p.map(String::from),
                    },
                )
            }),
        )
    }

    #[test]
    fn pawsx_into_four_languages() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("raw.jsonl");
        fs::write(
            &input,
            concat!(
                r#"{"id":"p1","sentence1":"classic","sentence2":"science","label":1}"#,
                "\n",
                r#"{"id":"p2","sentence1":"scholar","sentence2":"classic","label":0}"#,
                "\n"
            ),
        )
        .unwrap();
        let mut mock = MockBackend::new(HashMap::new());
        for (tgt, words) in [
            (LanguageId::Zh, ["古典", "科学", "学者"]),
            (LanguageId::Ja, ["古典", "科学", "学者"]),
            (LanguageId::Ko, ["고전", "과학", "학자"]),
            (LanguageId::Vi, ["cổ điển", "khoa học", "học giả"]),
        ] {
            for (src, t) in ["classic", "science", "scholar"].iter().zip(words) {
                mock.insert(LanguageId::En, tgt, src, t);
            }
        }
        let client = MtClient::new(Box::new(mock));
        let targets = vec![LanguageId::Zh, LanguageId::Ja, LanguageId::Ko, LanguageId::Vi];
        let mut cfg = BuildConfig::new(Task::Pawsx, Split::Test, LanguageId::En, targets);
        cfg.lexicons.insert(
            LanguageId::Zh,
            lex(LanguageId::Zh, &[("古典", None, Some("gǔdiǎn")), ("科学", None, Some("kēxué")), ("学者", None, Some("xuézhě"))]),
        );
        cfg.lexicons.insert(
            LanguageId::Ja,
            lex(LanguageId::Ja, &[("古典", Some("こてん"), None), ("科学", Some("かがく"), None), ("学者", Some("がくしゃ"), None)]),
        );
        cfg.lexicons.insert(LanguageId::Ko, lex(LanguageId::Ko, &[("고전", None, None), ("과학", None, None), ("학자", None, None)]));
        cfg.lexicons.insert(LanguageId::Vi, lex(LanguageId::Vi, &[("cổ điển", None, None), ("khoa học", None, None), ("học giả", None, None)]));
        cfg.jobs = 2;
        let out = dir.path().join("out");
        let report = build_dataset(&input, &cfg, &client, &out).unwrap();
        assert_eq!(report.languages.len(), 4);
        for l in &report.languages {
            assert_eq!((l.written, l.dropped), (2, 0));
            let d = read_dataset(&l.path, DatasetSchema::new(Task::Pawsx, Split::Test)).unwrap();
            assert_eq!(d.samples.len(), 2);
            assert_eq!(d.source_lang, l.lang);
            assert_eq!(d.samples[0].label, Label::Class(1));
            assert_eq!(d.samples[1].label, Label::Class(0));
        }
        let ko = read_dataset(&report.languages[2].path, DatasetSchema::new(Task::Pawsx, Split::Test)).unwrap();
        let SampleInputs::Pair(a, _) = &ko.samples[0].inputs else { panic!() };
        assert_eq!(a.words[0].roman, "gojeon");
        let ja = read_dataset(&report.languages[1].path, DatasetSchema::new(Task::Pawsx, Split::Test)).unwrap();
        let SampleInputs::Pair(a, _) = &ja.samples[0].inputs else { panic!() };
        assert_eq!(a.words[0].roman, "koten");
        assert!(fs::read_dir(&out).unwrap().all(|e| !e.unwrap().path().to_string_lossy().ends_with(".partial")));
    }

    #[test]
    fn panx_projects_labels_without_translation() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("panx.jsonl");
        fs::write(
            &input,
            r#"{"id":"n1","tokens":["日","産","自","動","車","は"],"tags":["B-ORG","I-ORG","I-ORG","I-ORG","I-ORG","O"]}"#,
        )
        .unwrap();
        // the client must never be called
        let client = MtClient::new(Box::new(MockBackend::new(HashMap::new()).with_fallback(super::super::mt::Unfixtured::Error)));
        let mut cfg = BuildConfig::new(Task::Panx, Split::Test, LanguageId::Ja, vec![LanguageId::Zh]);
        cfg.lexicons.insert(
            LanguageId::Ja,
            lex(LanguageId::Ja, &[("日産", Some("にっさん"), None), ("自動", Some("じどう"), None), ("車", Some("しゃ"), None)]),
        );
        let report = build_dataset(&input, &cfg, &client, dir.path()).unwrap();
        assert_eq!(client.backend_calls(), 0);
        assert_eq!(report.languages.len(), 1);
        let d = read_dataset(&report.languages[0].path, DatasetSchema::new(Task::Panx, Split::Test)).unwrap();
        let s = &d.samples[0];
        assert_eq!(s.label, Label::Tags(vec!["B-ORG".into(), "I-ORG".into(), "I-ORG".into(), "O".into()]));
        let SampleInputs::Single(u) = &s.inputs else { panic!() };
        assert_eq!(u.surfaces().collect::<Vec<_>>(), ["日産", "自動", "車", "は"]);
        assert_eq!(u.romans().collect::<Vec<_>>(), ["nissan", "jidou", "sha", "ha"]);
    }

    #[test]
    fn segmentation_that_crosses_an_entity_is_split() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("panx.jsonl");
        fs::write(&input, r#"{"id":"n2","tokens":["东","京","都"],"tags":["B-LOC","I-LOC","O"]}"#).unwrap();
        let client = MtClient::new(Box::new(MockBackend::identity()));
        let mut cfg = BuildConfig::new(Task::Panx, Split::Dev, LanguageId::Zh, vec![]);
        cfg.lexicons.insert(LanguageId::Zh, lex(LanguageId::Zh, &[("东京都", None, None), ("东京", None, None)]));
        let report = build_dataset(&input, &cfg, &client, dir.path()).unwrap();
        let d = read_dataset(&report.languages[0].path, DatasetSchema::new(Task::Panx, Split::Dev)).unwrap();
        let SampleInputs::Single(u) = &d.samples[0].inputs else { panic!() };
        assert_eq!(u.surfaces().collect::<Vec<_>>(), ["东京", "都"]);
        assert_eq!(d.samples[0].label, Label::Tags(vec!["B-LOC".into(), "O".into()]));
    }

    #[test]
    fn udpos_keeps_tokens_as_words() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("udpos.jsonl");
        fs::write(&input, r#"{"id":"u1","tokens":["한국어","공부"],"tags":["NOUN","NOUN"]}"#).unwrap();
        let client = MtClient::new(Box::new(MockBackend::identity()));
        let cfg = BuildConfig::new(Task::Udpos, Split::Train, LanguageId::Ko, vec![]);
        let report = build_dataset(&input, &cfg, &client, dir.path()).unwrap();
        let d = read_dataset(&report.languages[0].path, DatasetSchema::new(Task::Udpos, Split::Train)).unwrap();
        let SampleInputs::Single(u) = &d.samples[0].inputs else { panic!() };
        assert_eq!(u.text, "한국어공부");
        assert_eq!(u.romans().collect::<Vec<_>>(), ["hangukeo", "gongbu"]);
    }

    #[test]
    fn qa_drops_samples_whose_mask_is_lost() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("qa.jsonl");
        fs::write(
            &input,
            concat!(
                r#"{"id":"q1","context":"The scholar reads.","question":"Who reads?","answer":"scholar","answer_start":4}"#,
                "\n",
                r#"{"id":"q2","context":"A classic text.","question":"What text?","answer":"classic","answer_start":2}"#,
                "\n"
            ),
        )
        .unwrap();
        let client = MtClient::new(Box::new(MockBackend::from_fn(|t, _, _| {
            Some(if t.starts_with("A ") { t.replace(DEFAULT_MASK, "") } else { t.to_string() })
        })));
        let cfg = BuildConfig::new(Task::Xquad, Split::Test, LanguageId::En, vec![LanguageId::Vi]);
        let report = build_dataset(&input, &cfg, &client, dir.path()).unwrap();
        assert_eq!((report.languages[0].written, report.languages[0].dropped), (1, 1));
        let d = read_dataset(&report.languages[0].path, DatasetSchema::new(Task::Xquad, Split::Test)).unwrap();
        let s = &d.samples[0];
        let SampleInputs::Qa { context, .. } = &s.inputs else { panic!() };
        let Label::AnswerSpan { start_word, end_word } = s.label else { panic!() };
        assert_eq!(context.text_of_words(start_word, end_word).unwrap(), "scholar");
    }

    #[test]
    fn empty_input_gives_empty_files_and_rerun_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("empty.jsonl");
        fs::write(&input, "").unwrap();
        let client = MtClient::new(Box::new(MockBackend::identity()));
        let cfg = BuildConfig::new(Task::Xnli, Split::Dev, LanguageId::En, vec![LanguageId::Ko, LanguageId::Ja]);
        let report = build_dataset(&input, &cfg, &client, dir.path()).unwrap();
        for l in &report.languages {
            assert_eq!(fs::read_to_string(&l.path).unwrap(), "");
        }
    }

    #[test]
    fn malformed_raw_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("bad.jsonl");
        fs::write(&input, "{\"id\":\"x\"}\n").unwrap();
        let client = MtClient::new(Box::new(MockBackend::identity()));
        let cfg = BuildConfig::new(Task::Pawsx, Split::Dev, LanguageId::En, vec![LanguageId::Ko]);
        let err = build_dataset(&input, &cfg, &client, dir.path()).unwrap_err();
        assert!(matches!(err, BuildError::Raw { line: 1, .. }));
        assert!(!output_path(dir.path(), Task::Pawsx, Split::Dev, LanguageId::Ko).exists());
    }
}
