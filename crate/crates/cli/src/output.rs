use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use fpisa::formats::FpFormat;

/// Shortest text that reads back to the same word (exact for 16-bit
/// formats).
pub fn value_text(bits: u32, fmt: FpFormat) -> String {
    if fmt == FpFormat::FP32 {
        format!("{:?}", f32::from_bits(bits))
    } else {
        format!("{:?}", fmt.to_f64(bits))
    }
}

pub fn hex(bits: u32, fmt: FpFormat) -> String {
    format!("0x{bits:0width$X}", width = (fmt.total_bits() / 4) as usize)
}

/// Writes to `path`, or stdout when none is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

pub fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        assert_eq!(value_text(0x4080_0000, FpFormat::FP32), "4.0");
        assert_eq!(value_text(0x3DCC_CCCD, FpFormat::FP32), "0.1");
        assert_eq!(value_text(0x3C00, FpFormat::FP16), "1.0");
        assert_eq!(hex(0x3C00, FpFormat::FP16), "0x3C00");
    }
}
