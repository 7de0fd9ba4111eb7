//! Score reports as JSON lines, per-frame entropy CSV and training-log TSV.

use super::{content_lines, fields, parse_num};
use crate::duration::EpochLog;
use crate::error::{Error, Result};
use crate::model::ScoreReport;

const ENTROPY_HEADER: &str = "frame,entropy";
const LOG_HEADER: &str = "epoch\ttrain_loss\tvalidation_mae";

/// One JSON object per line, in input order.
pub fn render_reports(reports: &[ScoreReport]) -> Result<String> {
    let mut out = String::new();
    for r in reports {
        out.push_str(&serde_json::to_string(r).map_err(|e| Error::Format(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_reports(text: &str, source: &str) -> Result<Vec<ScoreReport>> {
    content_lines(text)
        .map(|(lineno, line)| {
            serde_json::from_str(line).map_err(|e| Error::parse(source, lineno, e.to_string()))
        })
        .collect()
}

pub fn render_entropy_csv(entropies: &[f64]) -> String {
    let mut out = format!("{ENTROPY_HEADER}\n");
    for (t, e) in entropies.iter().enumerate() {
        out.push_str(&format!("{t},{e}\n"));
    }
    out
}

pub fn parse_entropy_csv(text: &str, source: &str) -> Result<Vec<f64>> {
    let mut lines = content_lines(text);
    match lines.next() {
        Some((_, ENTROPY_HEADER)) => {}
        Some((lineno, _)) => {
            return Err(Error::parse(source, lineno, format!("expected header '{ENTROPY_HEADER}'")))
        }
        None => return Err(Error::Format(format!("{source}: empty entropy file"))),
    }
    let mut out = Vec::new();
    for (lineno, line) in lines {
        let (frame, value) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(source, lineno, "expected 'frame,entropy'"))?;
        let frame: usize = parse_num(frame.trim(), "frame", source, lineno)?;
        if frame != out.len() {
            return Err(Error::parse(source, lineno, format!("expected frame {}", out.len())));
        }
        out.push(parse_num(value.trim(), "entropy", source, lineno)?);
    }
    Ok(out)
}

pub fn render_training_log(epochs: &[EpochLog]) -> String {
    let mut out = format!("{LOG_HEADER}\n");
    for e in epochs {
        out.push_str(&format!("{}\t{}\t{}\n", e.epoch, e.train_loss, e.validation_mae));
    }
    out
}

pub fn parse_training_log(text: &str, source: &str) -> Result<Vec<EpochLog>> {
    let mut lines = content_lines(text);
    match lines.next() {
        Some((_, LOG_HEADER)) => {}
        Some((lineno, _)) => {
            return Err(Error::parse(source, lineno, "expected training-log header"))
        }
        None => return Err(Error::Format(format!("{source}: empty training log"))),
    }
    lines
        .map(|(lineno, line)| {
            let f = fields(line, 3, source, lineno)?;
            Ok(EpochLog {
                epoch: parse_num(f[0], "epoch", source, lineno)?,
                train_loss: parse_num(f[1], "loss", source, lineno)?,
                validation_mae: parse_num(f[2], "MAE", source, lineno)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_csv_round_trip() {
        let e = vec![0.325083, 0.0, 1.0 / 3.0];
        let text = render_entropy_csv(&e);
        assert!(text.starts_with("frame,entropy\n0,0.325083\n"));
        assert_eq!(parse_entropy_csv(&text, "e").unwrap(), e);
        assert!(parse_entropy_csv("frame,entropy\n1,0.5\n", "e").is_err());
    }

    #[test]
    fn training_log_round_trip() {
        let epochs = vec![
            EpochLog { epoch: 1, train_loss: 1.25, validation_mae: 0.9 },
            EpochLog { epoch: 2, train_loss: 0.1 + 0.2, validation_mae: 0.7 },
        ];
        let text = render_training_log(&epochs);
        assert_eq!(parse_training_log(&text, "l").unwrap(), epochs);
    }
}
