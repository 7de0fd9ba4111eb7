//! Phone inventory file: one label per line in index order; the silence phone
//! is marked by a second field `silence`.

use super::{content_lines, fields};
use crate::error::{Error, Result};
use crate::model::PhoneSet;

pub fn parse_phone_set(text: &str, source: &str) -> Result<PhoneSet> {
    let mut labels = Vec::new();
    let mut silence = None;
    for (lineno, line) in content_lines(text) {
        let n = line.split('\t').count();
        let parts = fields(line, n.clamp(1, 2), source, lineno)?;
        if parts[0].is_empty() || parts[0].contains(char::is_whitespace) {
            return Err(Error::parse(source, lineno, format!("invalid phone label '{}'", parts[0])));
        }
        if labels.iter().any(|l| l == parts[0]) {
            return Err(Error::parse(source, lineno, format!("duplicate phone label '{}'", parts[0])));
        }
        if let Some(marker) = parts.get(1) {
            if *marker != "silence" {
                return Err(Error::parse(source, lineno, format!("unknown marker '{marker}'")));
            }
            if silence.replace(labels.len()).is_some() {
                return Err(Error::parse(source, lineno, "second silence phone"));
            }
        }
        labels.push(parts[0].to_string());
    }
    if labels.is_empty() {
        return Err(Error::Format(format!("{source}: no phones")));
    }
    PhoneSet::new(labels, silence)
}

pub fn render_phone_set(set: &PhoneSet) -> String {
    let mut out = String::new();
    for (i, label) in set.labels().iter().enumerate() {
        out.push_str(label);
        if set.silence() == Some(i) {
            out.push_str("\tsilence");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_comments_and_silence() {
        let set = parse_phone_set("# inventory\nSIL\tsilence\nAA\n\nB\n", "p").unwrap();
        assert_eq!(set.labels(), ["SIL", "AA", "B"]);
        assert_eq!(set.silence(), Some(0));
        assert_eq!(parse_phone_set(&render_phone_set(&set), "p").unwrap(), set);
    }

    #[test]
    fn rejects_duplicates_and_markers() {
        assert!(parse_phone_set("A\nA\n", "p").is_err());
        assert!(parse_phone_set("A\tvowel\n", "p").is_err());
        assert!(parse_phone_set("A\tsilence\nB\tsilence\n", "p").is_err());
        assert!(parse_phone_set("", "p").is_err());
    }
}
