//! Pronunciation lexicon: `WORD<TAB>phone labels separated by spaces`.

use std::collections::BTreeMap;

use super::{content_lines, fields};
use crate::error::{Error, Result};
use crate::model::PhoneSet;

/// Uppercase word to phone indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    pub entries: BTreeMap<String, Vec<usize>>,
}

impl Lexicon {
    pub fn get(&self, word: &str) -> Option<&[usize]> {
        self.entries.get(&word.to_uppercase()).map(Vec::as_slice)
    }
}

pub fn parse_lexicon(text: &str, phones: &PhoneSet, source: &str) -> Result<Lexicon> {
    let mut entries = BTreeMap::new();
    for (lineno, line) in content_lines(text) {
        let f = fields(line, 2, source, lineno)?;
        let word = f[0].to_uppercase();
        if word.is_empty() || word.contains(char::is_whitespace) {
            return Err(Error::parse(source, lineno, format!("invalid word '{}'", f[0])));
        }
        let pron = f[1]
            .split_whitespace()
            .map(|label| {
                phones
                    .index_of(label)
                    .ok_or_else(|| Error::parse(source, lineno, format!("unknown phone '{label}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        if pron.is_empty() {
            return Err(Error::parse(source, lineno, format!("word '{word}' has no phones")));
        }
        if entries.insert(word.clone(), pron).is_some() {
            return Err(Error::parse(source, lineno, format!("duplicate word '{word}'")));
        }
    }
    Ok(Lexicon { entries })
}

pub fn render_lexicon(lexicon: &Lexicon, phones: &PhoneSet) -> Result<String> {
    let mut out = String::new();
    for (word, pron) in &lexicon.entries {
        let labels = pron
            .iter()
            .map(|&p| {
                phones.label(p).ok_or(Error::PhoneIndex {
                    index: p,
                    size: phones.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push_str(&format!("{word}\t{}\n", labels.join(" ")));
    }
    Ok(out)
}

/// Concatenated pronunciations of the whitespace-separated words of `text`.
pub fn text_to_phones(text: &str, lexicon: &Lexicon) -> Result<Vec<usize>> {
    let mut phones = Vec::new();
    for word in text.split_whitespace() {
        let pron = lexicon
            .get(word)
            .ok_or_else(|| Error::OutOfVocabulary(word.to_string()))?;
        phones.extend_from_slice(pron);
    }
    if phones.is_empty() {
        return Err(Error::Empty("reference text"));
    }
    Ok(phones)
}

/// Reference transcripts: `utt_id<TAB>word word ...`, in file order.
pub fn parse_transcripts(text: &str, source: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (lineno, line) in content_lines(text) {
        let f = fields(line, 2, source, lineno)?;
        if f[0].is_empty() || f[1].is_empty() {
            return Err(Error::parse(source, lineno, "empty utterance id or text"));
        }
        if out.iter().any(|(id, _)| id == f[0]) {
            return Err(Error::parse(source, lineno, format!("duplicate utterance '{}'", f[0])));
        }
        out.push((f[0].to_string(), f[1].to_string()));
    }
    Ok(out)
}

pub fn render_transcripts(transcripts: &[(String, String)]) -> String {
    transcripts
        .iter()
        .map(|(id, text)| format!("{id}\t{text}\n"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (PhoneSet, Lexicon) {
        let set = PhoneSet::from_labels(&["SIL", "G", "OW", "N"], Some("SIL")).unwrap();
        let lex = parse_lexicon("go\tG OW\nNO\tN OW\n", &set, "l").unwrap();
        (set, lex)
    }

    #[test]
    fn lookups() {
        let (_, lex) = setup();
        assert_eq!(text_to_phones("GO", &lex).unwrap(), vec![1, 2]);
        assert_eq!(text_to_phones("GO GO", &lex).unwrap(), vec![1, 2, 1, 2]);
        assert_eq!(text_to_phones("go no", &lex).unwrap(), vec![1, 2, 3, 2]);
        let err = text_to_phones("GO XYZZY", &lex).unwrap_err();
        assert!(matches!(err, Error::OutOfVocabulary(ref w) if w == "XYZZY"));
    }

    #[test]
    fn round_trip_and_errors() {
        let (set, lex) = setup();
        let text = render_lexicon(&lex, &set).unwrap();
        assert_eq!(text, "GO\tG OW\nNO\tN OW\n");
        assert_eq!(parse_lexicon(&text, &set, "l").unwrap(), lex);
        assert!(parse_lexicon("GO\tG XX\n", &set, "l").is_err());
        assert!(parse_lexicon("GO\tG\ngo\tOW\n", &set, "l").is_err());
        assert!(parse_lexicon("GO\t\n", &set, "l").is_err());
    }

    #[test]
    fn transcripts() {
        let t = vec![("u1".to_string(), "GO NO".to_string())];
        assert_eq!(parse_transcripts(&render_transcripts(&t), "t").unwrap(), t);
        assert!(parse_transcripts("u1\tGO\nu1\tNO\n", "t").is_err());
    }
}
