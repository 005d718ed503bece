//! Small shared helpers: duration/grid parsing and atomic file writes.

use std::path::Path;

use anyhow::{bail, Context, Result};

/// Parse a duration like `10ms`, `2s`, `500us`, or a bare number of seconds.
pub fn parse_duration_s(text: &str) -> Result<f64> {
    let text = text.trim();
    let (digits, scale) = if let Some(v) = text.strip_suffix("us") {
        (v, 1e-6)
    } else if let Some(v) = text.strip_suffix("ms") {
        (v, 1e-3)
    } else if let Some(v) = text.strip_suffix('s') {
        (v, 1.0)
    } else {
        (text, 1.0)
    };
    let value: f64 = digits
        .trim()
        .parse()
        .with_context(|| format!("bad duration {text:?}"))?;
    if value < 0.0 {
        bail!("duration {text:?} is negative");
    }
    Ok(value * scale)
}

/// Parse a timeout grid: either a comma list (`1ms,2ms,5ms`) or a range
/// with step (`0.5ms..8ms:0.25ms`).
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    if let Some((range, step)) = text.split_once(':') {
        let (lo, hi) = range
            .split_once("..")
            .with_context(|| format!("range {text:?} needs lo..hi:step"))?;
        let lo = parse_duration_s(lo)?;
        let hi = parse_duration_s(hi)?;
        let step = parse_duration_s(step)?;
        if step <= 0.0 || hi < lo {
            bail!("bad grid {text:?}");
        }
        let mut out = Vec::new();
        let mut i = 0u32;
        loop {
            let v = lo + f64::from(i) * step;
            if v > hi + 1e-12 {
                break;
            }
            out.push(v);
            i += 1;
        }
        Ok(out)
    } else {
        text.split(',')
            .map(parse_duration_s)
            .collect::<Result<Vec<f64>>>()
    }
}

/// Write a file via a temporary sibling and rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn durations() {
        assert_eq!(parse_duration_s("10ms").unwrap(), 0.01);
        assert_eq!(parse_duration_s("2s").unwrap(), 2.0);
        assert_eq!(parse_duration_s("500us").unwrap(), 0.0005);
        assert_eq!(parse_duration_s("0.25").unwrap(), 0.25);
        assert!(parse_duration_s("abc").is_err());
    }

    #[test]
    fn grids() {
        let grid = parse_grid("1ms..2ms:0.5ms").unwrap();
        assert_eq!(grid.len(), 3);
        assert!((grid[2] - 0.002).abs() < 1e-12);
        let list = parse_grid("1ms,5ms,10ms").unwrap();
        assert_eq!(list, vec![0.001, 0.005, 0.01]);
        assert!(parse_grid("2ms..1ms:1ms").is_err());
    }
}
