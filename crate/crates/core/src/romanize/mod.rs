//! Romanization of segmented words.
//!
//! KO uses character-level Revised Romanization (no cross-syllable
//! assimilation). JA converts kana through a Hepburn table, with kanji words
//! going through their lexicon reading. ZH looks pinyin up in the lexicon. VI
//! and EN are already Latin and pass through unchanged.

pub mod hangul;
pub mod tables;

pub use hangul::{compose_hangul, decompose_hangul, HangulError, JamoTriple};
pub use tables::{RomanizationTables, TableError};

use crate::corpus::{LanguageId, Utterance};
use crate::segment::{is_cjk_char, Lexicon};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RomanizeOptions {
    /// Drop pinyin tone marks (`gǔdiǎn` becomes `gudian`).
    pub strip_tones: bool,
}

/// A romanized word. `oov` marks a surface that was passed through unconverted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Romanized {
    pub roman: String,
    pub oov: bool,
}

impl Romanized {
    fn ok(roman: String) -> Self {
        Romanized { roman, oov: false }
    }

    fn passthrough(surface: &str) -> Self {
        Romanized {
            roman: surface.to_string(),
            oov: true,
        }
    }
}

fn is_han(c: char) -> bool {
    is_cjk_char(c) && !is_kana(c) && !is_hangul(c)
}

fn is_kana(c: char) -> bool {
    matches!(c as u32, 0x3040..=0x30FF | 0x31F0..=0x31FF) && c != '・'
}

fn is_hangul(c: char) -> bool {
    matches!(c as u32, 0x1100..=0x11FF | 0x3130..=0x318F | 0xAC00..=0xD7A3)
}

/// Latin-script letters, including the Vietnamese extended block.
pub fn is_latin_letter(c: char) -> bool {
    c.is_alphabetic() && ((c as u32) < 0x0250 || (0x1E00..=0x1EFF).contains(&(c as u32)))
}

/// Revised Romanization of one syllable. Non-syllables come back as `None`.
pub fn romanize_syllable(c: char, tables: &RomanizationTables) -> Option<String> {
    let j = decompose_hangul(c).ok()?;
    let mut s = String::new();
    s.push_str(&tables.ko_initial[j.initial as usize]);
    s.push_str(&tables.ko_medial[j.medial as usize]);
    s.push_str(&tables.ko_final[j.final_ as usize]);
    Some(s)
}

fn romanize_korean(surface: &str, tables: &RomanizationTables) -> Romanized {
    let mut out = String::new();
    for c in surface.chars() {
        match romanize_syllable(c, tables) {
            Some(r) => out.push_str(&r),
            None if is_cjk_char(c) => return Romanized::passthrough(surface),
            None => out.push(c),
        }
    }
    Romanized::ok(out)
}

const VOWELS: [char; 5] = ['a', 'i', 'u', 'e', 'o'];

/// Hepburn romanization of a kana string. Characters without a mapping are
/// copied through and reported in the second field.
pub fn kana_to_roman(kana: &str, tables: &RomanizationTables) -> (String, bool) {
    let chars: Vec<char> = kana.chars().collect();
    let mut out = String::new();
    let mut unmapped = false;
    let mut pending_sokuon = false;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if matches!(c, 'っ' | 'ッ') && i + 1 < chars.len() && is_kana(chars[i + 1]) {
            pending_sokuon = true;
            i += 1;
            continue;
        }
        if c == 'ー' {
            match out.chars().last().filter(|v| VOWELS.contains(v)) {
                Some(v) => out.push(v),
                None => out.push_str(&tables.kana_map["ー"]),
            }
            i += 1;
            continue;
        }
        let digraph: Option<String> = chars.get(i..i + 2).map(|p| p.iter().collect());
        let (roman, width) = match digraph.as_ref().and_then(|d| tables.kana_map.get(d)) {
            Some(r) => (Some(r.as_str()), 2),
            None => (tables.kana_map.get(&c.to_string()).map(String::as_str), 1),
        };
        match roman {
            Some(r) => {
                if pending_sokuon {
                    if r.starts_with("ch") {
                        out.push('t');
                    } else if let Some(first) = r.chars().next().filter(|f| !VOWELS.contains(f)) {
                        out.push(first);
                    }
                }
                out.push_str(r);
            }
            None => {
                if pending_sokuon {
                    out.push_str(&tables.kana_map["っ"]);
                }
                unmapped |= is_kana(c);
                out.push(c);
            }
        }
        pending_sokuon = false;
        i += width;
    }
    (out, unmapped)
}

fn romanize_japanese(surface: &str, lex: &Lexicon, tables: &RomanizationTables) -> Romanized {
    if surface.chars().any(is_han) {
        return match lex.get(surface).and_then(|e| e.reading.as_deref()) {
            Some(reading) => {
                let (roman, unmapped) = kana_to_roman(reading, tables);
                Romanized { roman, oov: unmapped }
            }
            None => Romanized::passthrough(surface),
        };
    }
    let (roman, unmapped) = kana_to_roman(surface, tables);
    Romanized { roman, oov: unmapped }
}

fn romanize_chinese(surface: &str, lex: &Lexicon, opts: RomanizeOptions) -> Romanized {
    let finish = |s: String| Romanized::ok(if opts.strip_tones { strip_tones(&s) } else { s });
    if let Some(p) = lex.get(surface).and_then(|e| e.pinyin.as_deref()) {
        return finish(p.to_string());
    }
    let mut out = String::new();
    for c in surface.chars() {
        if is_cjk_char(c) {
            match lex.get(&c.to_string()).and_then(|e| e.pinyin.as_deref()) {
                Some(p) => out.push_str(p),
                None => return Romanized::passthrough(surface),
            }
        } else {
            out.push(c);
        }
    }
    finish(out)
}

/// Removes pinyin tone diacritics; `ü` becomes `v`.
pub fn strip_tones(pinyin: &str) -> String {
    pinyin
        .chars()
        .map(|c| match c {
            'ā' | 'á' | 'ǎ' | 'à' => 'a',
            'ē' | 'é' | 'ě' | 'è' => 'e',
            'ī' | 'í' | 'ǐ' | 'ì' => 'i',
            'ō' | 'ó' | 'ǒ' | 'ò' => 'o',
            'ū' | 'ú' | 'ǔ' | 'ù' => 'u',
            'ü' | 'ǖ' | 'ǘ' | 'ǚ' | 'ǜ' => 'v',
            'Ā' | 'Á' | 'Ǎ' | 'À' => 'A',
            'Ē' | 'É' | 'Ě' | 'È' => 'E',
            'Ī' | 'Í' | 'Ǐ' | 'Ì' => 'I',
            'Ō' | 'Ó' | 'Ǒ' | 'Ò' => 'O',
            'Ū' | 'Ú' | 'Ǔ' | 'Ù' => 'U',
            'Ü' | 'Ǖ' | 'Ǘ' | 'Ǚ' | 'Ǜ' => 'V',
            'ń' | 'ň' | 'ǹ' => 'n',
            'ḿ' => 'm',
            other => other,
        })
        .collect()
}

/// Romanizes one orthographic word.
pub fn romanize_word(
    surface: &str,
    lang: LanguageId,
    lex: &Lexicon,
    tables: &RomanizationTables,
    opts: RomanizeOptions,
) -> Romanized {
    let mut letters = surface.chars().filter(|c| c.is_alphabetic());
    // digits, punctuation and already-Latin words pass through as-is
    if letters.all(is_latin_letter) {
        return Romanized::ok(surface.to_string());
    }
    match lang {
        LanguageId::Ko => romanize_korean(surface, tables),
        LanguageId::Ja => romanize_japanese(surface, lex, tables),
        LanguageId::Zh => romanize_chinese(surface, lex, opts),
        LanguageId::Vi | LanguageId::En => Romanized::ok(surface.to_string()),
    }
}

/// Fills every word's roman field; the word count never changes.
pub fn romanize_utterance(
    u: &Utterance,
    lex: &Lexicon,
    tables: &RomanizationTables,
    opts: RomanizeOptions,
) -> Utterance {
    let mut out = u.clone();
    for w in &mut out.words {
        let r = romanize_word(&w.surface, u.lang, lex, tables, opts);
        w.roman = r.roman;
        w.oov = r.oov;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::{parse_lexicon, segment_utterance};

    fn tables() -> RomanizationTables {
        RomanizationTables::standard()
    }

    fn ko(s: &str) -> String {
        romanize_word(s, LanguageId::Ko, &Lexicon::empty(LanguageId::Ko), &tables(), Default::default()).roman
    }

    fn ja(s: &str) -> String {
        kana_to_roman(s, &tables()).0
    }

    #[test]
    fn korean_table1_words() {
        assert_eq!(ko("고전"), "gojeon");
        assert_eq!(ko("과학"), "gwahak");
        assert_eq!(ko("문학"), "munhak");
        assert_eq!(ko("신학"), "sinhak");
        assert_eq!(ko("한국어"), "hangukeo");
    }

    #[test]
    fn korean_non_syllables() {
        assert_eq!(ko("3"), "3");
        let r = romanize_word("古典", LanguageId::Ko, &Lexicon::empty(LanguageId::Ko), &tables(), Default::default());
        assert!(r.oov);
        assert_eq!(r.roman, "古典");
    }

    #[test]
    fn hepburn_basics() {
        assert_eq!(ja("コテン"), "koten");
        assert_eq!(ja("がくしゃ"), "gakusha");
        assert_eq!(ja("きって"), "kitte");
        assert_eq!(ja("まっちゃ"), "matcha");
        assert_eq!(ja("コーヒー"), "koohii");
        assert_eq!(ja("とうきょう"), "toukyou");
        assert_eq!(ja("は"), "ha");
        assert_eq!(ja("ファイル"), "fairu");
        assert_eq!(ja("あっ"), "atsu");
    }

    #[test]
    fn japanese_kanji_uses_reading() {
        let lex = parse_lexicon("古典\tコテン\t\n", LanguageId::Ja).unwrap();
        let r = romanize_word("古典", LanguageId::Ja, &lex, &tables(), Default::default());
        assert_eq!(r, Romanized { roman: "koten".into(), oov: false });
        let r = romanize_word("科学", LanguageId::Ja, &lex, &tables(), Default::default());
        assert_eq!(r, Romanized { roman: "科学".into(), oov: true });
    }

    #[test]
    fn chinese_word_then_character_lookup() {
        let lex = parse_lexicon("古典\t\tgǔdiǎn\n学\t\txué\n者\t\tzhě\n", LanguageId::Zh).unwrap();
        let opts = RomanizeOptions::default();
        assert_eq!(romanize_word("古典", LanguageId::Zh, &lex, &tables(), opts).roman, "gǔdiǎn");
        assert_eq!(romanize_word("学者", LanguageId::Zh, &lex, &tables(), opts).roman, "xuézhě");
        let r = romanize_word("学生", LanguageId::Zh, &lex, &tables(), opts);
        assert!(r.oov);
        assert_eq!(r.roman, "学生");
        let stripped = romanize_word("古典", LanguageId::Zh, &lex, &tables(), RomanizeOptions { strip_tones: true });
        assert_eq!(stripped.roman, "gudian");
    }

    #[test]
    fn strip_tones_handles_umlaut() {
        assert_eq!(strip_tones("lǜ nǚ"), "lv nv");
    }

    #[test]
    fn vietnamese_is_identity() {
        let lex = Lexicon::empty(LanguageId::Vi);
        assert_eq!(romanize_word("Cổ", LanguageId::Vi, &lex, &tables(), Default::default()).roman, "Cổ");
        assert_eq!(romanize_word("Cổ điển", LanguageId::Vi, &lex, &tables(), Default::default()).roman, "Cổ điển");
    }

    #[test]
    fn latin_and_punctuation_are_identity_everywhere() {
        for lang in LanguageId::ALL {
            let lex = Lexicon::empty(lang);
            for s in ["XLM", "、", "2024", "gǔdiǎn"] {
                let r = romanize_word(s, lang, &lex, &tables(), Default::default());
                assert_eq!(r, Romanized { roman: s.into(), oov: false });
            }
        }
    }

    #[test]
    fn table1_zh_sentence() {
        let lex = parse_lexicon(
            "他\t\ttā\n是\t\tshì\n形而上学\t\txíngéshàngxué\n文学\t\twénxué\n神学\t\tshénxué\n和\t\thé\n\
             古典\t\tgǔdiǎn\n科学\t\tkēxué\n方面\t\tfāngmiàn\n的\t\tde\n学者\t\txuézhě\n",
            LanguageId::Zh,
        )
        .unwrap();
        let u = segment_utterance("他是形而上学文学、神学和古典科学方面的学者。", &lex);
        let r = romanize_utterance(&u, &lex, &tables(), Default::default());
        assert_eq!(r.len(), u.len());
        assert_eq!(
            r.roman_line(),
            "tā // shì // xíngéshàngxué // wénxué // 、 // shénxué // hé // gǔdiǎn // kēxué // fāngmiàn // de // xuézhě // 。"
        );
        assert!(crate::corpus::validate_utterance(&r).is_empty());
    }

    #[test]
    fn oov_kanji_word_keeps_alignment() {
        let lex = parse_lexicon("彼\tカレ\t\n", LanguageId::Ja).unwrap();
        let u = segment_utterance("彼は學", &lex);
        let r = romanize_utterance(&u, &lex, &tables(), Default::default());
        assert_eq!(r.len(), 3);
        assert_eq!(r.roman_line(), "kare // ha // 學");
        assert_eq!(r.words.iter().map(|w| w.oov).collect::<Vec<_>>(), [false, false, true]);
    }

    #[test]
    fn empty_utterance() {
        let u = Utterance::new(LanguageId::Ko, "", vec![]);
        let r = romanize_utterance(&u, &Lexicon::empty(LanguageId::Ko), &tables(), Default::default());
        assert_eq!(r, u);
    }
}
