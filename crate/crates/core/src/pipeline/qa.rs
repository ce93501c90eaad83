//! Masked-template translation of extractive QA samples.
//!
//! The answer is replaced by a mask token, context, question and answer are
//! translated separately, and the translated answer is put back where the
//! mask landed.

use thiserror::Error;

use super::mt::{MtClient, MtError};
use crate::corpus::{LanguageId, Utterance};
use crate::segment::{segment_with_boundaries, Lexicon};

pub const DEFAULT_MASK: &str = "[MASK_ANS]";

#[derive(Debug, Clone, Error)]
pub enum QaError {
    #[error("answer {answer:?} not found at char {start} of the context")]
    AnswerNotAtSpan { answer: String, start: usize },
    #[error("answer is empty")]
    EmptyAnswer,
    #[error("mask token {0:?} already occurs in the source text")]
    MaskInSource(String),
    #[error("mask token occurs {found} times in the translated context, expected 1")]
    Integrity { found: usize },
    #[error("translated answer is empty")]
    EmptyTranslation,
    #[error(transparent)]
    Mt(#[from] MtError),
}

/// A source QA sample; `answer_start` counts Unicode scalar values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaTemplate {
    pub context: String,
    pub question: String,
    pub answer: String,
    pub answer_start: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslatedQa {
    /// Segmented target context (roman fields empty).
    pub context: Utterance,
    pub question: String,
    pub answer: String,
    /// Inclusive word span of the answer in `context`.
    pub answer_words: (usize, usize),
}

/// Replaces the answer with `mask`; returns the masked context.
pub fn mask_context(t: &QaTemplate, mask: &str) -> Result<String, QaError> {
    if t.answer.is_empty() {
        return Err(QaError::EmptyAnswer);
    }
    if t.context.contains(mask) || t.question.contains(mask) || t.answer.contains(mask) {
        return Err(QaError::MaskInSource(mask.to_string()));
    }
    let chars: Vec<char> = t.context.chars().collect();
    let len = t.answer.chars().count();
    let end = t.answer_start + len;
    if end > chars.len() || chars[t.answer_start..end].iter().collect::<String>() != t.answer {
        return Err(QaError::AnswerNotAtSpan {
            answer: t.answer.clone(),
            start: t.answer_start,
        });
    }
    let mut out: String = chars[..t.answer_start].iter().collect();
    out.push_str(mask);
    out.extend(&chars[end..]);
    Ok(out)
}

/// Puts `answer` in place of the single `mask` in `translated`; returns the
/// new context and the answer's char span.
pub fn reinsert(translated: &str, mask: &str, answer: &str) -> Result<(String, usize, usize), QaError> {
    let found = translated.matches(mask).count();
    if found != 1 {
        return Err(QaError::Integrity { found });
    }
    let byte = translated.find(mask).expect("counted above");
    let start = translated[..byte].chars().count();
    let context = format!("{}{answer}{}", &translated[..byte], &translated[byte + mask.len()..]);
    Ok((context, start, start + answer.chars().count()))
}

pub fn translate_qa_template(
    client: &MtClient,
    t: &QaTemplate,
    src: LanguageId,
    tgt: LanguageId,
    mask: &str,
    lexicon: &Lexicon,
) -> Result<TranslatedQa, QaError> {
    let masked = mask_context(t, mask)?;
    let ctx = client.translate(&masked, src, tgt)?.text;
    let question = client.translate(&t.question, src, tgt)?.text;
    let answer = client.translate(&t.answer, src, tgt)?.text.trim().to_string();
    if answer.is_empty() {
        return Err(QaError::EmptyTranslation);
    }
    let (context, start, end) = reinsert(&ctx, mask, &answer)?;
    let words = segment_with_boundaries(&context, lexicon, &[start, end]);
    let first = words.iter().position(|w| w.span.start == start);
    let last = words.iter().position(|w| w.span.end == end);
    let (Some(first), Some(last)) = (first, last) else {
        // only possible when the answer is all whitespace, excluded above
        return Err(QaError::EmptyTranslation);
    };
    Ok(TranslatedQa {
        context: Utterance::new(tgt, context, words),
        question,
        answer,
        answer_words: (first, last),
    })
}
