//! Posteriorgram files.
//!
//! Binary layout, little-endian:
//!
//! ```text
//! magic       6 bytes "CAGPG1"
//! frames      u32
//! phones      u32
//! shift_ms    f32
//! body        frames * phones f32, row-major
//! ```
//!
//! The text twin has a header line `frames=<F> phones=<A> shift_ms=<ms>`
//! followed by one whitespace-separated row per frame. Both formats store
//! 32-bit values; loading widens them to 64 bits and renormalizes rows.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::content_lines;
use crate::error::{Error, Result};
use crate::model::Posteriorgram;

pub const POSTERIORGRAM_MAGIC: &[u8; 6] = b"CAGPG1";

/// Upper bound on `frames * phones` accepted from a header.
const MAX_ENTRIES: u64 = 1 << 31;

pub fn write_posteriorgram_binary<W: Write>(w: &mut W, pg: &Posteriorgram) -> std::io::Result<()> {
    w.write_all(POSTERIORGRAM_MAGIC)?;
    w.write_all(&(pg.num_frames() as u32).to_le_bytes())?;
    w.write_all(&(pg.num_phones() as u32).to_le_bytes())?;
    w.write_all(&(pg.frame_shift_ms() as f32).to_le_bytes())?;
    for &p in pg.probs().iter() {
        w.write_all(&(p as f32).to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R, source: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("{source}: truncated posteriorgram: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

fn widen(values: Vec<f32>, frames: usize, phones: usize, shift: f32, source: &str) -> Result<Posteriorgram> {
    let probs = Array2::from_shape_vec((frames, phones), values.into_iter().map(f64::from).collect())
        .map_err(|e| Error::Format(format!("{source}: {e}")))?;
    Posteriorgram::new(probs, f64::from(shift)).map_err(|e| Error::Format(format!("{source}: {e}")))
}

fn check_dims(frames: u64, phones: u64, source: &str) -> Result<()> {
    if frames == 0 || phones == 0 || frames * phones > MAX_ENTRIES {
        return Err(Error::Format(format!(
            "{source}: implausible posteriorgram shape {frames}x{phones}"
        )));
    }
    Ok(())
}

/// Reads the binary format; `source` names the input in error messages.
pub fn read_posteriorgram_binary<R: Read>(r: &mut R, source: &str) -> Result<Posteriorgram> {
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)
        .map_err(|e| Error::Format(format!("{source}: truncated posteriorgram: {e}")))?;
    if &magic != POSTERIORGRAM_MAGIC {
        return Err(Error::Format(format!("{source}: bad posteriorgram magic")));
    }
    let frames = read_u32(r, source)? as usize;
    let phones = read_u32(r, source)? as usize;
    let shift = f32::from_le_bytes(read_u32(r, source)?.to_le_bytes());
    check_dims(frames as u64, phones as u64, source)?;
    let mut bytes = vec![0u8; frames * phones * 4];
    r.read_exact(&mut bytes).map_err(|_| {
        Error::Format(format!(
            "{source}: body shorter than {frames}x{phones} entries"
        ))
    })?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::io(source, e))? != 0 {
        return Err(Error::Format(format!("{source}: trailing bytes after body")));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    widen(values, frames, phones, shift, source)
}

pub fn write_posteriorgram_text<W: Write>(w: &mut W, pg: &Posteriorgram) -> std::io::Result<()> {
    writeln!(
        w,
        "frames={} phones={} shift_ms={}",
        pg.num_frames(),
        pg.num_phones(),
        pg.frame_shift_ms() as f32
    )?;
    for row in pg.probs().rows() {
        let line: Vec<String> = row.iter().map(|&p| (p as f32).to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

fn header_value<'a>(token: Option<&'a str>, key: &str, source: &str) -> Result<&'a str> {
    token
        .and_then(|t| t.strip_prefix(key))
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| Error::parse(source, 1, format!("header must be 'frames=F phones=A shift_ms=ms', missing {key}")))
}

pub fn read_posteriorgram_text(text: &str, source: &str) -> Result<Posteriorgram> {
    let mut lines = content_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{source}: empty posteriorgram")))?;
    let mut tokens = header.split_whitespace();
    let bad = |what: &str| Error::parse(source, hline, format!("invalid {what} in header"));
    let frames: u64 = header_value(tokens.next(), "frames", source)?
        .parse()
        .map_err(|_| bad("frames"))?;
    let phones: u64 = header_value(tokens.next(), "phones", source)?
        .parse()
        .map_err(|_| bad("phones"))?;
    let shift: f32 = header_value(tokens.next(), "shift_ms", source)?
        .parse()
        .map_err(|_| bad("shift_ms"))?;
    check_dims(frames, phones, source)?;
    let (frames, phones) = (frames as usize, phones as usize);
    let mut values = Vec::with_capacity(frames * phones);
    let mut rows = 0;
    for (lineno, line) in lines {
        if rows == frames {
            return Err(Error::parse(source, lineno, format!("more than {frames} rows")));
        }
        let start = values.len();
        for token in line.split_whitespace() {
            let v: f32 = token
                .parse()
                .map_err(|_| Error::parse(source, lineno, format!("invalid probability '{token}'")))?;
            values.push(v);
        }
        if values.len() - start != phones {
            return Err(Error::parse(
                source,
                lineno,
                format!("expected {phones} values, found {}", values.len() - start),
            ));
        }
        rows += 1;
    }
    if rows != frames {
        return Err(Error::Format(format!("{source}: expected {frames} rows, found {rows}")));
    }
    widen(values, frames, phones, shift, source)
}

/// Loads either format, recognizing the binary one by its magic.
pub fn read_posteriorgram(path: &Path) -> Result<Posteriorgram> {
    let source = path.display().to_string();
    let mut reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(POSTERIORGRAM_MAGIC) {
        read_posteriorgram_binary(&mut bytes.as_slice(), &source)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Format(format!("{source}: neither binary nor text posteriorgram")))?;
        read_posteriorgram_text(&text, &source)
    }
}

/// Writes the binary format to `path`.
pub fn write_posteriorgram_file(path: &Path, pg: &Posteriorgram) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_posteriorgram_binary(&mut w, pg)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Posteriorgram {
        Posteriorgram::from_rows(&[vec![0.7, 0.2, 0.1], vec![0.05, 0.05, 0.9]], 30.0).unwrap()
    }

    #[test]
    fn binary_header_layout() {
        let mut buf = Vec::new();
        write_posteriorgram_binary(&mut buf, &sample()).unwrap();
        assert_eq!(&buf[..6], b"CAGPG1");
        assert_eq!(u32::from_le_bytes(buf[6..10].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[10..14].try_into().unwrap()), 3);
        assert_eq!(f32::from_le_bytes(buf[14..18].try_into().unwrap()), 30.0);
        assert_eq!(buf.len(), 18 + 6 * 4);
    }

    #[test]
    fn binary_and_text_twins_agree() {
        let pg = sample();
        let mut bin = Vec::new();
        write_posteriorgram_binary(&mut bin, &pg).unwrap();
        let mut txt = Vec::new();
        write_posteriorgram_text(&mut txt, &pg).unwrap();
        let a = read_posteriorgram_binary(&mut bin.as_slice(), "b").unwrap();
        let b = read_posteriorgram_text(std::str::from_utf8(&txt).unwrap(), "t").unwrap();
        assert_eq!(a, b);
        for (x, y) in a.probs().iter().zip(pg.probs().iter()) {
            assert!((x - y).abs() <= 1e-7);
        }
    }

    #[test]
    fn rejects_malformed_input() {
        let mut bin = Vec::new();
        write_posteriorgram_binary(&mut bin, &sample()).unwrap();
        assert!(read_posteriorgram_binary(&mut &bin[..bin.len() - 1], "b").is_err());
        let mut extra = bin.clone();
        extra.push(0);
        assert!(read_posteriorgram_binary(&mut extra.as_slice(), "b").is_err());
        let mut magic = bin.clone();
        magic[0] = b'X';
        assert!(read_posteriorgram_binary(&mut magic.as_slice(), "b").is_err());

        assert!(read_posteriorgram_text("frames=1 phones=2 shift_ms=30\n0.5 0.5 0.0\n", "t").is_err());
        assert!(read_posteriorgram_text("frames=2 phones=2 shift_ms=30\n0.5 0.5\n", "t").is_err());
        assert!(read_posteriorgram_text("rows=1 phones=2 shift_ms=30\n0.5 0.5\n", "t").is_err());
        assert!(read_posteriorgram_text("frames=1 phones=2 shift_ms=30\n0.7 0.7\n", "t").is_err());
        let err = read_posteriorgram_text("frames=1 phones=2 shift_ms=30\n0.5 x\n", "t").unwrap_err();
        assert!(err.to_string().starts_with("t:2:"), "{err}");
    }
}
