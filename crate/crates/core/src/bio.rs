//! BIO tag handling shared by the corpus schema, label projection and span F1.

use std::fmt;

/// One parsed BIO tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Tag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

impl<'a> Tag<'a> {
    /// Parses `O`, `B-X` or `I-X`. Anything else is rejected.
    pub fn parse(raw: &'a str) -> Option<Tag<'a>> {
        if raw == "O" {
            return Some(Tag::Outside);
        }
        let (prefix, kind) = raw.split_once('-')?;
        if kind.is_empty() {
            return None;
        }
        match prefix {
            "B" => Some(Tag::Begin(kind)),
            "I" => Some(Tag::Inside(kind)),
            _ => None,
        }
    }

    pub fn kind(&self) -> Option<&'a str> {
        match self {
            Tag::Outside => None,
            Tag::Begin(k) | Tag::Inside(k) => Some(k),
        }
    }
}

impl fmt::Display for Tag<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Outside => write!(f, "O"),
            Tag::Begin(k) => write!(f, "B-{k}"),
            Tag::Inside(k) => write!(f, "I-{k}"),
        }
    }
}

/// Why a tag sequence is not valid BIO.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BioViolation {
    /// Tag at this position is not `O`, `B-X` or `I-X`.
    Unparseable(usize),
    /// `I-X` at this position does not continue an `X` entity.
    DanglingInside(usize),
}

impl fmt::Display for BioViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioViolation::Unparseable(i) => write!(f, "tag {i} is not a BIO tag"),
            BioViolation::DanglingInside(i) => {
                write!(f, "tag {i} is I-X without a preceding B-X/I-X of the same type")
            }
        }
    }
}

/// Checks that every `I-X` follows `B-X` or `I-X`. A leading `I-X` is invalid.
pub fn validate<S: AsRef<str>>(tags: &[S]) -> Result<(), BioViolation> {
    let mut prev: Option<Tag<'_>> = None;
    for (i, raw) in tags.iter().enumerate() {
        let tag = Tag::parse(raw.as_ref()).ok_or(BioViolation::Unparseable(i))?;
        if let Tag::Inside(kind) = tag {
            if prev.as_ref().and_then(Tag::kind) != Some(kind) {
                return Err(BioViolation::DanglingInside(i));
            }
        }
        prev = Some(tag);
    }
    Ok(())
}

/// An entity as `(start, end_exclusive, type)`.
pub type Entity = (usize, usize, String);

/// Extracts entities from a valid BIO sequence.
pub fn entities<S: AsRef<str>>(tags: &[S]) -> Result<Vec<Entity>, BioViolation> {
    validate(tags)?;
    let mut out = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, raw) in tags.iter().enumerate() {
        // validated above
        let tag = Tag::parse(raw.as_ref()).expect("validated");
        match tag {
            Tag::Inside(_) => {}
            Tag::Outside | Tag::Begin(_) => {
                if let Some((s, k)) = open.take() {
                    out.push((s, i, k.to_string()));
                }
                if let Tag::Begin(k) = tag {
                    open = Some((i, k));
                }
            }
        }
    }
    if let Some((s, k)) = open {
        out.push((s, tags.len(), k.to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tags() {
        assert_eq!(Tag::parse("O"), Some(Tag::Outside));
        assert_eq!(Tag::parse("B-ORG"), Some(Tag::Begin("ORG")));
        assert_eq!(Tag::parse("I-PER"), Some(Tag::Inside("PER")));
        assert_eq!(Tag::parse("X-ORG"), None);
        assert_eq!(Tag::parse("B-"), None);
        assert_eq!(Tag::parse("NOUN"), None);
    }

    #[test]
    fn rejects_dangling_inside() {
        assert_eq!(validate(&["O", "I-ORG"]), Err(BioViolation::DanglingInside(1)));
        assert_eq!(validate(&["B-PER", "I-ORG"]), Err(BioViolation::DanglingInside(1)));
        assert_eq!(validate(&["I-ORG"]), Err(BioViolation::DanglingInside(0)));
        assert!(validate(&["B-ORG", "I-ORG", "O", "B-PER"]).is_ok());
    }

    #[test]
    fn extracts_entities() {
        let e = entities(&["B-ORG", "I-ORG", "O", "B-PER", "B-PER", "I-PER"]).unwrap();
        assert_eq!(
            e,
            vec![
                (0, 2, "ORG".to_string()),
                (3, 4, "PER".to_string()),
                (4, 6, "PER".to_string())
            ]
        );
    }
}
