//! CTM-like alignment file: `utt_id<TAB>phone_label<TAB>start_frame<TAB>num_frames`.
//!
//! Lines of one utterance must be consecutive; utterances keep file order.

use super::{content_lines, fields, parse_num};
use crate::error::{Error, Result};
use crate::model::{Alignment, PhoneSegment, PhoneSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceAlignment {
    pub utterance: String,
    pub alignment: Alignment,
}

pub fn parse_alignments(text: &str, phones: &PhoneSet, source: &str) -> Result<Vec<UtteranceAlignment>> {
    let mut out: Vec<UtteranceAlignment> = Vec::new();
    let mut cursor = 0usize;
    for (lineno, line) in content_lines(text) {
        let f = fields(line, 4, source, lineno)?;
        let phone = phones
            .index_of(f[1])
            .ok_or_else(|| Error::parse(source, lineno, format!("unknown phone '{}'", f[1])))?;
        let start: usize = parse_num(f[2], "start frame", source, lineno)?;
        let length: usize = parse_num(f[3], "frame count", source, lineno)?;
        if length == 0 {
            return Err(Error::parse(source, lineno, "segment has zero frames"));
        }
        let continuing = out.last().is_some_and(|u| u.utterance == f[0]);
        if !continuing {
            if out.iter().any(|u| u.utterance == f[0]) {
                return Err(Error::parse(
                    source,
                    lineno,
                    format!("lines of utterance '{}' are not consecutive", f[0]),
                ));
            }
            out.push(UtteranceAlignment {
                utterance: f[0].to_string(),
                alignment: Alignment::default(),
            });
            cursor = 0;
        }
        if start < cursor {
            return Err(Error::parse(
                source,
                lineno,
                format!("segment starts at {start}, before previous end {cursor}"),
            ));
        }
        cursor = start + length;
        out.last_mut()
            .expect("pushed above")
            .alignment
            .segments
            .push(PhoneSegment::new(phone, start, length));
    }
    Ok(out)
}

pub fn render_alignments(alignments: &[UtteranceAlignment], phones: &PhoneSet) -> Result<String> {
    let mut out = String::new();
    for u in alignments {
        for seg in &u.alignment.segments {
            let label = phones.label(seg.phone).ok_or(Error::PhoneIndex {
                index: seg.phone,
                size: phones.len(),
            })?;
            out.push_str(&format!("{}\t{label}\t{}\t{}\n", u.utterance, seg.start, seg.length));
        }
    }
    Ok(out)
}
