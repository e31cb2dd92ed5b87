//! Artifact writing: CSV tables, JSON documents and the run manifest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Formats a number with 9 significant digits, independent of locale.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s == "-0" { "0".into() } else { s }
    } else {
        let s = format!("{x:.8e}");
        let (mantissa, exponent) = s.split_once('e').expect("scientific notation");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{exponent}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// An output directory that remembers every file written into it.
pub struct OutDir {
    dir: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &Value) -> io::Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        fs::write(self.dir.join(name), text + "\n")?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn manifest(mut self, run: &RunInfo, extra: Value) -> io::Result<()> {
        let mut files = self.files.clone();
        files.push("manifest.json".into());
        let value = json!({
            "command": run.command,
            "config_path": run.config_path.display().to_string(),
            "config_sha256": run.config_sha256,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "started_unix": run.started,
            "finished_unix": unix_now(),
            "parameters": extra,
            "files": files,
        });
        self.json("manifest.json", &value)
    }
}

pub struct RunInfo {
    pub command: String,
    pub config_path: PathBuf,
    pub config_sha256: String,
    pub started: u64,
}

#[cfg(test)]
mod tests {
    use super::num;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(num(7.529411764705882), "7.52941176");
        assert_eq!(num(167.75), "167.75");
        assert_eq!(num(0.0), "0");
        assert_eq!(num(1.0), "1");
        assert_eq!(num(-2.5e-7), "-2.5e-7");
        assert_eq!(num(123456789012.0), "1.23456789e11");
        assert_eq!(num(9.999999999995), "10");
        assert_eq!(num(f64::NAN), "nan");
    }
}
