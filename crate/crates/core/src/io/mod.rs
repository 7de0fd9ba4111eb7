//! Readers and writers for every on-disk artifact.
//!
//! Text formats are line oriented and tab separated. Blank lines and lines
//! starting with `#` are ignored by all text readers. Parse errors carry the
//! source name and a 1-based line number.

mod alignments;
mod annotations;
mod lexicon;
mod phones;
mod posteriors;
mod reports;
mod tables;

use std::fs;
use std::path::Path;

pub use alignments::{parse_alignments, render_alignments, UtteranceAlignment};
pub use annotations::{parse_annotations, render_annotations, Annotations};
pub use lexicon::{
    parse_lexicon, parse_transcripts, render_lexicon, render_transcripts, text_to_phones, Lexicon,
};
pub use phones::{parse_phone_set, render_phone_set};
pub use posteriors::{
    read_posteriorgram, read_posteriorgram_binary, read_posteriorgram_text,
    write_posteriorgram_binary, write_posteriorgram_file, write_posteriorgram_text,
    POSTERIORGRAM_MAGIC,
};
pub use reports::{
    parse_entropy_csv, parse_reports, parse_training_log, render_entropy_csv, render_reports,
    render_training_log,
};
pub use tables::{parse_balance_table, parse_thresholds, render_balance_table, render_thresholds};

use crate::error::{Error, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Non-empty, non-comment lines with their 1-based line numbers.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
}

/// Splits a line into exactly `n` tab-separated fields.
pub(crate) fn fields<'a>(line: &'a str, n: usize, source: &str, lineno: usize) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = line.split('\t').map(str::trim).collect();
    if parts.len() != n {
        return Err(Error::parse(
            source,
            lineno,
            format!("expected {n} tab-separated fields, found {}", parts.len()),
        ));
    }
    Ok(parts)
}

pub(crate) fn parse_num<T: std::str::FromStr>(
    field: &str,
    what: &str,
    source: &str,
    lineno: usize,
) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::parse(source, lineno, format!("invalid {what} '{field}'")))
}
