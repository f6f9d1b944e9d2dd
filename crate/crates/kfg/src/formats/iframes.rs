//! I-frame index list: one 0-based frame index per line. Blank lines and
//! lines starting with `#` are ignored.

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub fn parse_iframes(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v = line.parse::<usize>().map_err(|_| Error::Parse {
            line: i + 1,
            message: format!("expected a frame index, got {line:?}"),
        })?;
        out.push(v);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

pub fn emit_iframes(frames: &[usize]) -> String {
    let mut s = String::new();
    for f in frames {
        let _ = writeln!(s, "{f}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_emit() {
        assert_eq!(parse_iframes("# ffprobe\n0\n\n50\r\n12\n50\n").unwrap(), vec![0, 12, 50]);
        assert_eq!(emit_iframes(&[0, 12]), "0\n12\n");
        assert!(matches!(parse_iframes("0\n-3\n"), Err(Error::Parse { line: 2, .. })));
    }
}
