use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use super::hangul::{FINAL_COUNT, INITIAL_COUNT, MEDIAL_COUNT};

const DEFAULT_TABLES: &str = include_str!("../../data/romanization.tsv");

#[derive(Debug, Error)]
pub enum TableError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("table line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("incomplete table: {0}")]
    Incomplete(String),
}

/// Korean jamo and Japanese kana romanization tables.
#[derive(Debug, Clone)]
pub struct RomanizationTables {
    pub ko_initial: Vec<String>,
    pub ko_medial: Vec<String>,
    pub ko_final: Vec<String>,
    pub kana_map: HashMap<String, String>,
}

impl RomanizationTables {
    /// The checked-in tables.
    pub fn standard() -> Self {
        Self::parse(DEFAULT_TABLES).expect("bundled romanization tables are valid")
    }

    pub fn load(path: &Path) -> Result<Self, TableError> {
        let content = fs::read_to_string(path).map_err(|source| TableError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&content)
    }

    /// Parses `kind<TAB>index_or_kana<TAB>roman` rows and checks completeness.
    pub fn parse(content: &str) -> Result<Self, TableError> {
        let mut initial = vec![None; INITIAL_COUNT as usize];
        let mut medial = vec![None; MEDIAL_COUNT as usize];
        let mut final_ = vec![None; FINAL_COUNT as usize];
        let mut kana_map = HashMap::new();
        for (i, line) in content.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |message: String| TableError::Malformed { line: line_no, message };
            let cols: Vec<&str> = line.split('\t').collect();
            let [kind, key, roman] = cols[..] else {
                return Err(malformed(format!("expected 3 columns, found {}", cols.len())));
            };
            let slot = match kind {
                "ko_initial" => &mut initial,
                "ko_medial" => &mut medial,
                "ko_final" => &mut final_,
                "kana" => {
                    if key.is_empty() {
                        return Err(malformed("empty kana key".into()));
                    }
                    kana_map.insert(key.to_string(), roman.to_string());
                    continue;
                }
                other => return Err(malformed(format!("unknown kind {other:?}"))),
            };
            let idx: usize = key
                .parse()
                .map_err(|_| malformed(format!("bad index {key:?}")))?;
            let cell = slot
                .get_mut(idx)
                .ok_or_else(|| malformed(format!("index {idx} out of range for {kind}")))?;
            *cell = Some(roman.to_string());
        }
        let finish = |v: Vec<Option<String>>, kind: &str| {
            v.into_iter()
                .enumerate()
                .map(|(i, r)| r.ok_or_else(|| TableError::Incomplete(format!("{kind}[{i}] missing"))))
                .collect::<Result<Vec<_>, _>>()
        };
        let tables = RomanizationTables {
            ko_initial: finish(initial, "ko_initial")?,
            ko_medial: finish(medial, "ko_medial")?,
            ko_final: finish(final_, "ko_final")?,
            kana_map,
        };
        if !tables.ko_initial[11].is_empty() {
            return Err(TableError::Incomplete("ko_initial[11] (ㅇ) must be empty".into()));
        }
        if !tables.ko_final[0].is_empty() {
            return Err(TableError::Incomplete("ko_final[0] must be empty".into()));
        }
        if let Some(c) = standard_kana().find(|c| !tables.kana_map.contains_key(&c.to_string())) {
            return Err(TableError::Incomplete(format!("kana {c} has no mapping")));
        }
        Ok(tables)
    }
}

/// Every hiragana and katakana letter, including the prolonged sound mark.
pub fn standard_kana() -> impl Iterator<Item = char> {
    (0x3041..=0x3096u32)
        .chain(0x30A1..=0x30FA)
        .chain(std::iter::once(0x30FC))
        .filter_map(char::from_u32)
}
