use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use cori_core::augment::{code_switch, load_dictionary, AugmentationConfig, BilingualDictionary, View};
use cori_core::corpus::{sample_from_json, sample_to_json, TaskLevel, Violation};
use cori_core::metrics::{accuracy, cka, exact_match, pos_tags_as_bio, span_f1, EmbeddingMatrix};
use cori_core::model::checkpoint;
use cori_core::model::experiment::{ablation_configs, ablation_name, projected_matrix, train_toy, ToyConfig};
use cori_core::model::Mode;
use cori_core::pipeline::mt::{MtBackend, Unfixtured};
use cori_core::pipeline::{build_dataset, BuildConfig, HttpBackend, MockBackend, MtClient};
use cori_core::segment::segment_utterance;
use cori_core::{
    load_lexicon, read_dataset, romanize_utterance, validate_utterance, DatasetSchema, Label, LabeledSample,
    LanguageId, Lexicon, RomanizationTables, RomanizeOptions, SampleInputs, Split, Task, Utterance,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::args::{
    AugmentArgs, BuildArgs, CkaArgs, EvalArgs, MtArg, ModeArg, RomanizeArgs, SegmentArgs, Switch, TrainToyArgs, ViewArg,
};

/// Input that is present but does not fit the expected format.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct SchemaError(pub String);

fn schema(msg: impl Into<String>) -> anyhow::Error {
    SchemaError(msg.into()).into()
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(anyhow::Error::new(io::Error::new(io::ErrorKind::NotFound, "no such file")).context(path.display().to_string()))
    }
}

fn lang(s: &str) -> Result<LanguageId> {
    LanguageId::from_str(s).map_err(|e| schema(e.to_string()))
}

fn pool(jobs: u32) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs as usize).build()?)
}

fn lexicon(path: Option<&Path>, lang: LanguageId) -> Result<Lexicon> {
    match path {
        Some(p) => {
            require(p)?;
            Ok(load_lexicon(p, lang)?)
        }
        None => Ok(Lexicon::empty(lang)),
    }
}

fn tables(path: Option<&Path>) -> Result<RomanizationTables> {
    match path {
        Some(p) => {
            require(p)?;
            Ok(RomanizationTables::load(p)?)
        }
        None => Ok(RomanizationTables::standard()),
    }
}

/// One line of an utterance or dataset JSON-lines file.
enum Line {
    Utterance(Utterance),
    Sample(LabeledSample),
}

impl Line {
    fn utterances_mut(&mut self) -> Vec<&mut Utterance> {
        match self {
            Line::Utterance(u) => vec![u],
            Line::Sample(s) => s.inputs.utterances_mut(),
        }
    }

    fn to_json(&self) -> String {
        match self {
            Line::Utterance(u) => serde_json::to_string(u).expect("utterances serialize"),
            Line::Sample(s) => sample_to_json(s),
        }
    }
}

fn read_lines(path: &Path, expected: LanguageId) -> Result<Vec<Line>> {
    require(path)?;
    let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(raw).map_err(|e| schema(format!("line {no}: {e}")))?;
        let mut line = match v.get("task").and_then(Value::as_str) {
            Some(tag) => {
                let task = Task::from_str(tag).map_err(|t| schema(format!("line {no}: unknown task {t:?}")))?;
                Line::Sample(sample_from_json(raw, no, task)?)
            }
            None => Line::Utterance(serde_json::from_value(v).map_err(|e| schema(format!("line {no}: {e}")))?),
        };
        for u in line.utterances_mut() {
            if u.lang != expected {
                bail!(SchemaError(format!("line {no}: language {} but --lang is {expected}", u.lang)));
            }
            if let Some(v) = validate_utterance(u).into_iter().find(|v| !matches!(v, Violation::MissingRoman { .. })) {
                bail!(SchemaError(format!("line {no}: {v}")));
            }
        }
        out.push(line);
    }
    Ok(out)
}

fn write_lines(path: &Path, lines: &[Line]) -> Result<()> {
    let mut body = String::new();
    for l in lines {
        body.push_str(&l.to_json());
        body.push('\n');
    }
    fs::write(path, body).with_context(|| path.display().to_string())
}

pub fn segment(a: &SegmentArgs) -> Result<Value> {
    let lang = lang(&a.lang)?;
    let lex = lexicon(a.lexicon.as_deref(), lang)?;
    require(&a.input)?;
    let text = fs::read_to_string(&a.input).with_context(|| a.input.display().to_string())?;
    let inputs: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let tables = RomanizationTables::standard();
    let utts: Vec<Utterance> = pool(a.common.jobs)?.install(|| {
        inputs
            .par_iter()
            .map(|t| {
                let u = segment_utterance(t, &lex);
                if a.romanize {
                    romanize_utterance(&u, &lex, &tables, RomanizeOptions::default())
                } else {
                    u
                }
            })
            .collect()
    });
    let words: usize = utts.iter().map(Utterance::len).sum();
    let lines: Vec<Line> = utts.into_iter().map(Line::Utterance).collect();
    write_lines(&a.out, &lines)?;
    Ok(json!({ "utterances": lines.len(), "words": words }))
}

pub fn romanize(a: &RomanizeArgs) -> Result<Value> {
    let lang = lang(&a.lang)?;
    let lex = lexicon(a.lexicon.as_deref(), lang)?;
    let tables = tables(a.table.as_deref())?;
    let opts = RomanizeOptions {
        strip_tones: a.strip_tones,
    };
    let mut lines = read_lines(&a.input, lang)?;
    pool(a.common.jobs)?.install(|| {
        lines.par_iter_mut().for_each(|l| {
            for u in l.utterances_mut() {
                *u = romanize_utterance(u, &lex, &tables, opts);
            }
        })
    });
    let (mut words, mut oov) = (0, 0);
    for l in &mut lines {
        for u in l.utterances_mut() {
            words += u.len();
            oov += u.words.iter().filter(|w| w.oov).count();
        }
    }
    write_lines(&a.out, &lines)?;
    Ok(json!({ "lines": lines.len(), "words": words, "oov": oov }))
}

fn switch_count(before: &Utterance, after: &Utterance) -> usize {
    before
        .words
        .iter()
        .zip(&after.words)
        .filter(|(x, y)| x.surface != y.surface || x.roman != y.roman)
        .count()
}

pub fn augment(a: &AugmentArgs) -> Result<Value> {
    let lang = lang(&a.lang)?;
    require(&a.dict)?;
    let dict: BilingualDictionary = load_dictionary(&a.dict, lang)?;
    let view = match a.view {
        ViewArg::Ortho => View::Ortho,
        ViewArg::Roman => View::Roman,
    };
    let base = AugmentationConfig::new(a.ratio, a.seed, view)
        .map_err(|e| schema(e.to_string()))?
        .with_single_target(a.single_target);
    let mut lines = read_lines(&a.input, lang)?;
    // every utterance gets its own seed, fixed by file position
    let mut offsets = Vec::with_capacity(lines.len());
    let mut n = 0u64;
    for l in &mut lines {
        offsets.push(n);
        n += l.utterances_mut().len() as u64;
    }
    let counts: Vec<(usize, usize)> = pool(a.common.jobs)?.install(|| {
        lines
            .par_iter_mut()
            .zip(offsets.par_iter())
            .map(|(l, &off)| {
                let (mut words, mut switched) = (0, 0);
                for (k, u) in l.utterances_mut().into_iter().enumerate() {
                    let mut cfg = base;
                    cfg.seed = base.seed.wrapping_add(off + k as u64);
                    let out = code_switch(u, &dict, &cfg);
                    words += u.len();
                    switched += switch_count(u, &out);
                    *u = out;
                }
                (words, switched)
            })
            .collect()
    });
    write_lines(&a.out, &lines)?;
    let words: usize = counts.iter().map(|c| c.0).sum();
    let switched: usize = counts.iter().map(|c| c.1).sum();
    Ok(json!({ "lines": lines.len(), "words": words, "switched": switched }))
}

pub fn build(a: &BuildArgs) -> Result<Value> {
    let task = Task::from_str(&a.task).map_err(|t| schema(format!("unknown task {t:?}")))?;
    let split = Split::from_str(&a.split).map_err(|s| schema(format!("unknown split {s:?}")))?;
    let src = lang(&a.src)?;
    let targets = a
        .targets
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| lang(s.trim()))
        .collect::<Result<Vec<_>>>()?;
    require(&a.input)?;
    let mut cfg = BuildConfig::new(task, split, src, targets);
    for entry in &a.lexicon {
        let (l, p) = entry
            .split_once('=')
            .ok_or_else(|| schema(format!("--lexicon expects LANG=FILE, got {entry:?}")))?;
        let l = lang(l)?;
        cfg.lexicons.insert(l, lexicon(Some(Path::new(p)), l)?);
    }
    cfg.tables = tables(a.table.as_deref())?;
    cfg.romanize = RomanizeOptions {
        strip_tones: a.strip_tones,
    };
    cfg.mask = a.mask.clone();
    cfg.jobs = a.common.jobs as usize;
    let backend: Box<dyn MtBackend> = match a.mt {
        MtArg::Mock => {
            let mock = match &a.fixtures {
                Some(p) => {
                    require(p)?;
                    MockBackend::load_fixtures(p)?
                }
                None => MockBackend::new(HashMap::new()),
            };
            let fallback = if a.strict_mock {
                Unfixtured::Error
            } else {
                Unfixtured::TaggedPassthrough
            };
            Box::new(mock.with_fallback(fallback))
        }
        MtArg::Http => Box::new(HttpBackend::from_env(a.endpoint.clone(), Duration::from_secs(30))?),
    };
    let mut client = MtClient::new(backend).with_max_concurrent(a.max_concurrent as usize)?;
    if let Some(dir) = &a.cache_dir {
        client = client.with_cache_dir(dir)?;
    }
    let report = build_dataset(&a.input, &cfg, &client, &a.out)?;
    let mut v = serde_json::to_value(&report)?;
    v["backend_calls"] = json!(client.backend_calls());
    Ok(v)
}

fn toy_config(a: &TrainToyArgs) -> ToyConfig {
    ToyConfig {
        mode: match a.mode {
            ModeArg::Ortho => Mode::Ortho,
            ModeArg::Roman => Mode::Roman,
            ModeArg::Both => Mode::Both,
        },
        use_cl: matches!(a.cl, Switch::On),
        seed: a.seed,
        steps: a.steps,
        batch_size: a.batch_size,
        sentences: a.sentences,
        embed_dim: a.embed_dim,
        num_layers: a.layers,
        num_heads: a.heads,
        learning_rate: a.lr,
        ratio: a.ratio,
        temperature: a.tau,
        cl_weight: a.cl_weight,
    }
}

fn write_embeddings(dir: &Path, name: &str, m: cori_core::model::Matrix) -> Result<PathBuf> {
    let path = dir.join(format!("{name}.tsv"));
    fs::write(&path, EmbeddingMatrix::from_matrix(m)?.to_tsv()).with_context(|| path.display().to_string())?;
    Ok(path)
}

pub fn train_toy_cmd(a: &TrainToyArgs) -> Result<Value> {
    let base = toy_config(a);
    let configs: Vec<ToyConfig> = if a.ablation {
        ablation_configs(&base).to_vec()
    } else {
        vec![base]
    };
    if let Some(dir) = &a.embeddings {
        fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
    }
    let runs = pool(a.common.jobs)?.install(|| {
        configs
            .par_iter()
            .map(|c| -> Result<Value> {
                let (report, model, corpus) = train_toy(c)?;
                let name = ablation_name(c);
                if let Some(dir) = &a.embeddings {
                    write_embeddings(dir, &format!("{name}.source"), projected_matrix(&model, &corpus.source)?)?;
                    write_embeddings(dir, &format!("{name}.target"), projected_matrix(&model, &corpus.target)?)?;
                }
                if let Some(path) = &a.checkpoint {
                    checkpoint::save(&model, path)?;
                }
                let mut v = serde_json::to_value(&report)?;
                v["name"] = json!(name);
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(if a.ablation {
        json!({ "runs": runs })
    } else {
        runs.into_iter().next().expect("one run")
    })
}

fn class_of(l: &Label) -> Option<usize> {
    match l {
        Label::Class(c) => Some(*c),
        _ => None,
    }
}

fn answer_text(s: &LabeledSample) -> Option<String> {
    match (&s.inputs, &s.label) {
        (SampleInputs::Qa { context, .. }, Label::AnswerSpan { start_word, end_word }) => {
            context.text_of_words(*start_word, *end_word)
        }
        _ => None,
    }
}

pub fn eval(a: &EvalArgs) -> Result<Value> {
    let task = Task::from_str(&a.task).map_err(|t| schema(format!("unknown task {t:?}")))?;
    let split = Split::from_str(&a.split).map_err(|s| schema(format!("unknown split {s:?}")))?;
    require(&a.gold)?;
    require(&a.pred)?;
    let schema_of = DatasetSchema::new(task, split);
    let gold = read_dataset(&a.gold, schema_of)?;
    let pred = read_dataset(&a.pred, schema_of)?;
    let by_id: HashMap<&str, &LabeledSample> = pred.samples.iter().map(|s| (s.id.as_str(), s)).collect();
    let pairs: Vec<(&LabeledSample, &LabeledSample)> = gold
        .samples
        .iter()
        .map(|g| {
            by_id
                .get(g.id.as_str())
                .map(|p| (*p, g))
                .ok_or_else(|| schema(format!("no prediction for sample {:?}", g.id)))
        })
        .collect::<Result<_>>()?;
    let n = pairs.len();
    let metrics = match task.level() {
        TaskLevel::SentencePair => {
            let p: Vec<usize> = pairs.iter().filter_map(|(p, _)| class_of(&p.label)).collect();
            let g: Vec<usize> = pairs.iter().filter_map(|(_, g)| class_of(&g.label)).collect();
            json!({ "accuracy": accuracy(&p, &g)? })
        }
        TaskLevel::TokenTagging => {
            let tags = |s: &LabeledSample| match &s.label {
                Label::Tags(t) if task == Task::Udpos => pos_tags_as_bio(t),
                Label::Tags(t) => t.clone(),
                _ => Vec::new(),
            };
            let p: Vec<Vec<String>> = pairs.iter().map(|(p, _)| tags(p)).collect();
            let g: Vec<Vec<String>> = pairs.iter().map(|(_, g)| tags(g)).collect();
            let s = span_f1(&p, &g)?;
            json!({ "precision": s.precision, "recall": s.recall, "f1": s.f1 })
        }
        TaskLevel::QuestionAnswering => {
            let p: Vec<String> = pairs.iter().map(|(p, _)| answer_text(p).unwrap_or_default()).collect();
            let g: Vec<String> = pairs.iter().map(|(_, g)| answer_text(g).unwrap_or_default()).collect();
            let spans = pairs.iter().filter(|(p, g)| p.label == g.label).count();
            json!({
                "exact_match": exact_match(&p, &g)?,
                "span_match": if n == 0 { 0.0 } else { spans as f64 / n as f64 },
            })
        }
    };
    Ok(json!({ "samples": n, "metrics": metrics }))
}

pub fn cka_cmd(a: &CkaArgs) -> Result<Value> {
    require(&a.a)?;
    require(&a.b)?;
    let x = EmbeddingMatrix::read_tsv(&a.a)?;
    let y = EmbeddingMatrix::read_tsv(&a.b)?;
    Ok(json!({ "cka": cka(&x, &y)?, "rows": x.rows() }))
}
