//! Dataset construction: machine translation, QA template transfer, and the
//! raw-to-dataset builder.

pub mod build;
pub mod mt;
pub mod qa;

pub use build::{build_dataset, output_path, BuildConfig, BuildError, BuildReport, LangReport};
pub use mt::{HttpBackend, MockBackend, MtBackend, MtClient, MtError, RetryPolicy, Translation, Unfixtured};
pub use qa::{mask_context, reinsert, translate_qa_template, QaError, QaTemplate, TranslatedQa, DEFAULT_MASK};
