//! Precomposed Hangul syllable arithmetic.

use thiserror::Error;

pub const SYLLABLE_BASE: u32 = 0xAC00;
pub const SYLLABLE_LAST: u32 = 0xD7A3;
pub const INITIAL_COUNT: u32 = 19;
pub const MEDIAL_COUNT: u32 = 21;
pub const FINAL_COUNT: u32 = 28;
/// Syllables per initial consonant (21 * 28).
const BLOCK: u32 = MEDIAL_COUNT * FINAL_COUNT;
pub const SYLLABLE_COUNT: u32 = INITIAL_COUNT * BLOCK;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HangulError {
    #[error("{0:?} is not a precomposed Hangul syllable")]
    NotHangul(char),
    #[error("jamo indices ({0}, {1}, {2}) out of range")]
    InvalidJamo(u8, u8, u8),
}

/// Initial, medial and final jamo indices of one syllable. `final_` 0 means no final.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct JamoTriple {
    pub initial: u8,
    pub medial: u8,
    pub final_: u8,
}

impl JamoTriple {
    pub fn new(initial: u8, medial: u8, final_: u8) -> Result<Self, HangulError> {
        if u32::from(initial) < INITIAL_COUNT
            && u32::from(medial) < MEDIAL_COUNT
            && u32::from(final_) < FINAL_COUNT
        {
            Ok(JamoTriple { initial, medial, final_ })
        } else {
            Err(HangulError::InvalidJamo(initial, medial, final_))
        }
    }
}

pub fn is_syllable(c: char) -> bool {
    (SYLLABLE_BASE..=SYLLABLE_LAST).contains(&(c as u32))
}

pub fn decompose_hangul(syllable: char) -> Result<JamoTriple, HangulError> {
    if !is_syllable(syllable) {
        return Err(HangulError::NotHangul(syllable));
    }
    let idx = syllable as u32 - SYLLABLE_BASE;
    Ok(JamoTriple {
        initial: (idx / BLOCK) as u8,
        medial: ((idx % BLOCK) / FINAL_COUNT) as u8,
        final_: (idx % FINAL_COUNT) as u8,
    })
}

pub fn compose_hangul(j: JamoTriple) -> char {
    let idx = u32::from(j.initial) * BLOCK + u32::from(j.medial) * FINAL_COUNT + u32::from(j.final_);
    char::from_u32(SYLLABLE_BASE + idx).expect("valid triple lies in the syllable block")
}
