//! Byte-stable output: number formatting, CSV assembly and checksummed writes.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Shortest decimal that round-trips; scientific notation outside
/// `[1e-4, 1e15)`. Both zeros print as `0`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 {
        "0".to_string()
    } else if !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub struct Csv {
    text: String,
    width: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text, width: header.len() }
    }

    pub fn row(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.width);
        for (k, v) in values.iter().enumerate() {
            if k > 0 {
                self.text.push(',');
            }
            let _ = write!(self.text, "{}", num(*v));
        }
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WrittenFile {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> io::Result<WrittenFile> {
    fs::write(dir.join(name), bytes)?;
    Ok(WrittenFile {
        file: name.to_string(),
        sha256: sha256_hex(bytes),
        bytes: bytes.len(),
    })
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> io::Result<WrittenFile> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
    bytes.push(b'\n');
    write_file(dir, name, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for x in [1.0, -2.5, 1e-3, 0.1 + 0.2, 1e-4, 9.99e-5, 3e-17, 1e15, 123456.789, -7.25e-9] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(num(1e-3), "0.001");
        assert_eq!(num(3e-17), "3e-17");
        assert_eq!(num(-0.0), "0");
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::new(&["t", "p"]);
        c.row(&[0.0, 0.5]);
        c.row(&[2.0, 1e-9]);
        assert_eq!(String::from_utf8(c.into_bytes()).unwrap(), "t,p\n0,0.5\n2,1e-9\n");
    }

    #[test]
    fn checksum_known_value() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
