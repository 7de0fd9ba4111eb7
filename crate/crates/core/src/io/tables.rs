//! Balance-table and threshold-table files.
//!
//! Balance table: a header line
//! `bucket_width=<w> bucket_min=<lo> bucket_max=<hi> min_count=<n>`, then
//! `phone_label<TAB>bucket<TAB>T` for cell entries,
//! `phone_label<TAB>PHONE<TAB>T` for per-phone back-offs and
//! `*<TAB>GLOBAL<TAB>T` for the global back-off.
//!
//! Threshold table: `phone_label<TAB>threshold` lines plus one
//! `GLOBAL<TAB>threshold` line.

use std::collections::BTreeMap;

use super::{content_lines, fields, parse_num};
use crate::balance::{BalanceConfig, BalanceTable};
use crate::detector::ThresholdTable;
use crate::error::{Error, Result};
use crate::model::PhoneSet;

const GLOBAL: &str = "GLOBAL";
const PHONE: &str = "PHONE";

fn label(phones: &PhoneSet, index: usize) -> Result<&str> {
    phones.label(index).ok_or(Error::PhoneIndex {
        index,
        size: phones.len(),
    })
}

fn lookup(phones: &PhoneSet, label: &str, source: &str, lineno: usize) -> Result<usize> {
    phones
        .index_of(label)
        .ok_or_else(|| Error::parse(source, lineno, format!("unknown phone '{label}'")))
}

fn finite(value: f64, source: &str, lineno: usize) -> Result<f64> {
    if !value.is_finite() {
        return Err(Error::parse(source, lineno, format!("non-finite value {value}")));
    }
    Ok(value)
}

pub fn render_balance_table(table: &BalanceTable, phones: &PhoneSet) -> Result<String> {
    let c = &table.config;
    let mut out = format!(
        "bucket_width={} bucket_min={} bucket_max={} min_count={}\n",
        c.bucket_width, c.bucket_min, c.bucket_max, c.min_count
    );
    for (&(phone, bucket), t) in &table.entries {
        out.push_str(&format!("{}\t{bucket}\t{t}\n", label(phones, phone)?));
    }
    for (&phone, t) in &table.phone_backoff {
        out.push_str(&format!("{}\t{PHONE}\t{t}\n", label(phones, phone)?));
    }
    out.push_str(&format!("*\t{GLOBAL}\t{}\n", table.global_backoff));
    Ok(out)
}

fn parse_header(line: &str, source: &str, lineno: usize) -> Result<BalanceConfig> {
    let mut values = BTreeMap::new();
    for token in line.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| Error::parse(source, lineno, format!("expected key=value, found '{token}'")))?;
        values.insert(key, value);
    }
    let get = |key: &str| {
        values
            .get(key)
            .copied()
            .ok_or_else(|| Error::parse(source, lineno, format!("header lacks {key}")))
    };
    if values.len() != 4 {
        return Err(Error::parse(source, lineno, "header needs exactly bucket_width, bucket_min, bucket_max, min_count"));
    }
    let config = BalanceConfig {
        bucket_width: parse_num(get("bucket_width")?, "bucket_width", source, lineno)?,
        bucket_min: parse_num(get("bucket_min")?, "bucket_min", source, lineno)?,
        bucket_max: parse_num(get("bucket_max")?, "bucket_max", source, lineno)?,
        min_count: parse_num(get("min_count")?, "min_count", source, lineno)?,
    };
    config
        .validate()
        .map_err(|e| Error::parse(source, lineno, e.to_string()))?;
    Ok(config)
}

pub fn parse_balance_table(text: &str, phones: &PhoneSet, source: &str) -> Result<BalanceTable> {
    let mut lines = content_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{source}: empty balance table")))?;
    let config = parse_header(header, source, hline)?;
    let mut entries = BTreeMap::new();
    let mut phone_backoff = BTreeMap::new();
    let mut global = None;
    for (lineno, line) in lines {
        let f = fields(line, 3, source, lineno)?;
        let t = finite(parse_num(f[2], "tolerance", source, lineno)?, source, lineno)?;
        let duplicate = match f[1] {
            GLOBAL => {
                if f[0] != "*" {
                    return Err(Error::parse(source, lineno, "global line must start with '*'"));
                }
                global.replace(t).is_some()
            }
            PHONE => phone_backoff
                .insert(lookup(phones, f[0], source, lineno)?, t)
                .is_some(),
            bucket => {
                let bucket: i64 = parse_num(bucket, "bucket", source, lineno)?;
                let phone = lookup(phones, f[0], source, lineno)?;
                entries.insert((phone, bucket), t).is_some()
            }
        };
        if duplicate {
            return Err(Error::parse(source, lineno, "duplicate entry"));
        }
    }
    let global_backoff =
        global.ok_or_else(|| Error::Format(format!("{source}: balance table lacks a GLOBAL line")))?;
    Ok(BalanceTable {
        config,
        entries,
        phone_backoff,
        global_backoff,
    })
}

pub fn render_thresholds(table: &ThresholdTable, phones: &PhoneSet) -> Result<String> {
    let mut out = String::new();
    for (&phone, t) in &table.per_phone {
        out.push_str(&format!("{}\t{t}\n", label(phones, phone)?));
    }
    out.push_str(&format!("{GLOBAL}\t{}\n", table.global));
    Ok(out)
}

/// Phone labels take precedence over the `GLOBAL` keyword only if the phone
/// set really contains a phone of that name, which it should not.
pub fn parse_thresholds(text: &str, phones: &PhoneSet, source: &str) -> Result<ThresholdTable> {
    let mut per_phone = BTreeMap::new();
    let mut global = None;
    for (lineno, line) in content_lines(text) {
        let f = fields(line, 2, source, lineno)?;
        let t = finite(parse_num(f[1], "threshold", source, lineno)?, source, lineno)?;
        let duplicate = if f[0] == GLOBAL && phones.index_of(GLOBAL).is_none() {
            global.replace(t).is_some()
        } else {
            per_phone
                .insert(lookup(phones, f[0], source, lineno)?, t)
                .is_some()
        };
        if duplicate {
            return Err(Error::parse(source, lineno, format!("duplicate entry '{}'", f[0])));
        }
    }
    let global =
        global.ok_or_else(|| Error::Format(format!("{source}: threshold table lacks a GLOBAL line")))?;
    Ok(ThresholdTable { per_phone, global })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set() -> PhoneSet {
        PhoneSet::from_labels(&["SIL", "AA", "B"], Some("SIL")).unwrap()
    }

    #[test]
    fn balance_round_trip() {
        let table = BalanceTable {
            config: BalanceConfig::default(),
            entries: [((1, 3), 1.25), ((2, 20), 0.1 + 0.2)].into_iter().collect(),
            phone_backoff: [(1, 1.5)].into_iter().collect(),
            global_backoff: 1.7,
        };
        let text = render_balance_table(&table, &set()).unwrap();
        assert!(text.starts_with("bucket_width=1 bucket_min=2 bucket_max=20 min_count=5\nAA\t3\t1.25\n"));
        assert!(text.ends_with("*\tGLOBAL\t1.7\n"));
        assert_eq!(parse_balance_table(&text, &set(), "b").unwrap(), table);
    }

    #[test]
    fn balance_errors() {
        let h = "bucket_width=1 bucket_min=2 bucket_max=20 min_count=5\n";
        assert!(parse_balance_table(h, &set(), "b").is_err());
        assert!(parse_balance_table(&format!("{h}XX\t3\t1\n*\tGLOBAL\t1\n"), &set(), "b").is_err());
        assert!(parse_balance_table(&format!("{h}AA\tx\t1\n*\tGLOBAL\t1\n"), &set(), "b").is_err());
        assert!(parse_balance_table("bucket_width=1\n*\tGLOBAL\t1\n", &set(), "b").is_err());
        assert!(parse_balance_table(&format!("{h}*\tGLOBAL\t1\n*\tGLOBAL\t2\n"), &set(), "b").is_err());
    }

    #[test]
    fn threshold_round_trip() {
        let table = ThresholdTable {
            per_phone: [(1, -0.55), (2, -1.0 / 3.0)].into_iter().collect(),
            global: -0.8,
        };
        let text = render_thresholds(&table, &set()).unwrap();
        assert_eq!(parse_thresholds(&text, &set(), "t").unwrap(), table);
        assert!(parse_thresholds("AA\t-0.5\n", &set(), "t").is_err());
        assert!(parse_thresholds("AA\tnan\nGLOBAL\t0\n", &set(), "t").is_err());
    }
}
