//! Word-aligned orthographic and romanized CJKV corpora, and a desk-scale
//! phonemic-orthographic contrastive representation learner.

pub mod augment;
pub mod bio;
pub mod corpus;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod romanize;
pub mod segment;

pub use corpus::{
    read_dataset, validate_utterance, write_dataset, CharSpan, Dataset, DatasetSchema, Label, LabeledSample,
    LanguageId, SampleInputs, Split, Task, Utterance, Word,
};
pub use romanize::{romanize_utterance, romanize_word, RomanizationTables, RomanizeOptions};
pub use segment::{load_lexicon, project_token_labels_to_words, segment, LexEntry, Lexicon};
