use cori_core::augment::{code_switch, AugmentationConfig, BilingualDictionary, DictTarget, View};
use cori_core::corpus::{sample_from_json, sample_to_json, Violation};
use cori_core::metrics::{cka_matrices, span_f1};
use cori_core::model::Matrix;
use cori_core::segment::{parse_lexicon, segment_utterance};
use cori_core::{
    romanize_utterance, validate_utterance, Label, LabeledSample, LanguageId, RomanizationTables, SampleInputs, Task,
};
use proptest::prelude::*;

const ZH_LEXICON: &str = "古典\t\tgǔdiǎn\n科学\t\tkēxué\n学者\t\txuézhě\n文学\t\twénxué\n古典文学\t\tgǔdiǎn wénxué\n";

fn zh_text() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        Just("古典".to_string()),
        Just("科学".to_string()),
        Just("学者".to_string()),
        Just("文学".to_string()),
        Just("的".to_string()),
        Just("，".to_string()),
        Just(" ".to_string()),
        Just("AI".to_string()),
        Just("2024".to_string()),
        "[\u{4e00}-\u{4e20}]",
    ];
    prop::collection::vec(piece, 1..16).prop_map(|v| v.concat())
}

fn ko_text() -> impl Strategy<Value = String> {
    prop::collection::vec(prop_oneof![Just(" ".to_string()), "[가-힣]{1,4}"], 1..10).prop_map(|v| v.concat())
}

proptest! {
    #[test]
    fn segmentation_tiles_the_text(text in zh_text()) {
        prop_assume!(!text.trim().is_empty());
        let lex = parse_lexicon(ZH_LEXICON, LanguageId::Zh).unwrap();
        let u = segment_utterance(&text, &lex);
        let chars: Vec<char> = text.chars().collect();
        let mut prev = 0;
        for w in &u.words {
            prop_assert!(w.span.start >= prev && w.span.end > w.span.start);
            let covered: String = chars[w.span.start..w.span.end].iter().collect();
            prop_assert_eq!(&covered, &w.surface);
            // anything skipped between words is whitespace
            prop_assert!(chars[prev..w.span.start].iter().all(|c| c.is_whitespace()));
            prev = w.span.end;
        }
        prop_assert!(chars[prev..].iter().all(|c| c.is_whitespace()));
        let violations: Vec<Violation> = validate_utterance(&u)
            .into_iter()
            .filter(|v| !matches!(v, Violation::MissingRoman { .. }))
            .collect();
        prop_assert!(violations.is_empty(), "{:?}", violations);
    }

    #[test]
    fn romanization_keeps_words_and_fills_roman(text in ko_text()) {
        prop_assume!(!text.trim().is_empty());
        let lex = parse_lexicon("", LanguageId::Ko).unwrap();
        let u = segment_utterance(&text, &lex);
        let r = romanize_utterance(&u, &lex, &RomanizationTables::standard(), Default::default());
        prop_assert_eq!(r.words.len(), u.words.len());
        for (a, b) in u.words.iter().zip(&r.words) {
            prop_assert_eq!(&a.surface, &b.surface);
            prop_assert!(!b.roman.is_empty() && b.roman.is_ascii());
        }
        prop_assert!(validate_utterance(&r).is_empty());
    }

    #[test]
    fn samples_survive_serialization(a in zh_text(), b in zh_text(), label in 0usize..3) {
        prop_assume!(!a.trim().is_empty() && !b.trim().is_empty());
        let lex = parse_lexicon(ZH_LEXICON, LanguageId::Zh).unwrap();
        let tables = RomanizationTables::standard();
        let u1 = romanize_utterance(&segment_utterance(&a, &lex), &lex, &tables, Default::default());
        let u2 = romanize_utterance(&segment_utterance(&b, &lex), &lex, &tables, Default::default());
        let tags = vec!["O".to_string(); u1.words.len()];
        let pair = LabeledSample {
            id: "p".into(),
            task: Task::Xnli,
            inputs: SampleInputs::Pair(u1.clone(), u2),
            label: Label::Class(label),
        };
        let tagged = LabeledSample {
            id: "t".into(),
            task: Task::Panx,
            inputs: SampleInputs::Single(u1),
            label: Label::Tags(tags),
        };
        for s in [pair, tagged] {
            let line = sample_to_json(&s);
            prop_assert!(!line.contains('\n'));
            let back = sample_from_json(&line, 1, s.task).unwrap();
            prop_assert_eq!(back, s);
        }
    }

    #[test]
    fn code_switching_keeps_word_count_and_validity(text in zh_text(), ratio in 0.0f64..=1.0, seed in any::<u64>()) {
        prop_assume!(!text.trim().is_empty());
        let lex = parse_lexicon(ZH_LEXICON, LanguageId::Zh).unwrap();
        let u = romanize_utterance(&segment_utterance(&text, &lex), &lex, &RomanizationTables::standard(), Default::default());
        let mut dict = BilingualDictionary::new(LanguageId::Zh);
        for (s, t, r) in [("古典", "고전", "gojeon"), ("科学", "과학", "gwahak"), ("学者", "학자", "hakja")] {
            dict.insert(s, DictTarget { lang: LanguageId::Ko, surface: t.into(), roman: r.into() });
        }
        dict.insert("学者", DictTarget { lang: LanguageId::Ja, surface: "学者".into(), roman: "gakusha".into() });
        for view in [View::Ortho, View::Roman] {
            let cfg = AugmentationConfig::new(ratio, seed, view).unwrap();
            let out = code_switch(&u, &dict, &cfg);
            prop_assert_eq!(out.words.len(), u.words.len());
            prop_assert!(validate_utterance(&out).is_empty(), "{:?}", validate_utterance(&out));
            if view == View::Roman {
                prop_assert_eq!(&out.text, &u.text);
            }
        }
    }

    #[test]
    fn cka_is_symmetric_and_bounded(
        x in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 6),
        y in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 6),
    ) {
        let (x, y) = (Matrix::from_rows(&x), Matrix::from_rows(&y));
        if let (Ok(a), Ok(b)) = (cka_matrices(&x, &y), cka_matrices(&y, &x)) {
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn span_f1_ignores_sample_order(
        seqs in prop::collection::vec(
            (prop::collection::vec(0u8..5, 1..8), prop::collection::vec(0u8..5, 1..8)),
            1..8,
        ),
        rot in 0usize..8,
    ) {
        // dangling inside tags become begin tags, so every sequence is valid BIO
        let render = |v: &[u8]| -> Vec<String> {
            let mut out: Vec<String> = Vec::new();
            for &t in v {
                let s = match t {
                    0 => "O".to_string(),
                    1 | 3 => "PER".to_string(),
                    _ => "LOC".to_string(),
                };
                let tag = if s == "O" {
                    s
                } else if t >= 3 && out.last().is_some_and(|p| p.ends_with(&s)) {
                    format!("I-{s}")
                } else {
                    format!("B-{s}")
                };
                out.push(tag);
            }
            out
        };
        let (mut pred, mut gold): (Vec<Vec<String>>, Vec<Vec<String>>) = seqs
            .iter()
            .map(|(p, g)| {
                let n = p.len().min(g.len());
                (render(&p[..n]), render(&g[..n]))
            })
            .unzip();
        let before = span_f1(&pred, &gold).unwrap();
        let k = rot % pred.len();
        pred.rotate_left(k);
        gold.rotate_left(k);
        let after = span_f1(&pred, &gold).unwrap();
        prop_assert_eq!(before, after);
        prop_assert!((0.0..=1.0).contains(&before.f1));
        let perfect = span_f1(&gold, &gold).unwrap();
        let any_entities = gold.iter().flatten().any(|t| t != "O");
        prop_assert!(!any_entities || perfect.f1 == 1.0);
    }
}
