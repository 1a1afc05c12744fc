//! File formats shared by the pipeline stages.
//!
//! - Voltage traces: headerless binary, 64-bit little-endian IEEE floats.
//! - Code traces: headerless binary, unsigned 8-bit (n_bits <= 8) or 16-bit
//!   little-endian codes, with the digitizer parameters in a `<file>.meta`
//!   sidecar of `key = value` lines.
//! - Bitstreams: raw packed bytes, MSB first.
//! - Extractor seeds: a one-line text header declaring k and l, then the
//!   packed seed bits.

use crate::error::{Error, Result};
use crate::extract::{BitBlock, ToeplitzSeed};
use crate::signal::{AdcConfig, CodeTrace};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub fn write_voltage_trace(path: &Path, samples: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for &v in samples {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_voltage_trace(path: &Path) -> Result<Vec<f64>> {
    let raw = fs::read(path)?;
    if raw.len() % 8 != 0 {
        return Err(Error::Parse(format!(
            "{}: length {} is not a multiple of 8 bytes",
            path.display(),
            raw.len()
        )));
    }
    Ok(raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn write_code_trace(path: &Path, trace: &CodeTrace) -> Result<()> {
    trace.adc.validate()?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    if trace.adc.n_bits <= 8 {
        for &c in &trace.codes {
            w.write_all(&[c as u8])?;
        }
    } else {
        for &c in &trace.codes {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    w.flush()?;
    let meta = format!(
        "adc.n_bits = {}\nadc.r_half = {}\nadc.sample_rate = {}\nseed = {}\ncount = {}\n",
        trace.adc.n_bits,
        trace.adc.r_half,
        trace.adc.sample_rate,
        trace.seed,
        trace.codes.len()
    );
    fs::write(meta_path(path), meta)?;
    Ok(())
}

pub fn read_code_trace(path: &Path) -> Result<CodeTrace> {
    let meta_file = meta_path(path);
    let meta = fs::read_to_string(&meta_file).map_err(|e| {
        Error::Parse(format!("{}: sidecar missing ({e})", meta_file.display()))
    })?;
    let mut n_bits = None;
    let mut r_half = None;
    let mut sample_rate = None;
    let mut seed = 0u64;
    let mut count = None;
    for (lineno, line) in meta.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Parse(format!(
                "{}:{}: expected key = value",
                meta_file.display(),
                lineno + 1
            ))
        })?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |e: std::num::ParseFloatError| {
            Error::Parse(format!("{}: {key}: {e}", meta_file.display()))
        };
        match key {
            "adc.n_bits" => n_bits = Some(value.parse::<f64>().map_err(bad)? as u32),
            "adc.r_half" => r_half = Some(value.parse().map_err(bad)?),
            "adc.sample_rate" => sample_rate = Some(value.parse().map_err(bad)?),
            "seed" => {
                seed = value
                    .parse()
                    .map_err(|e| Error::Parse(format!("{}: seed: {e}", meta_file.display())))?
            }
            "count" => {
                count = Some(value.parse::<usize>().map_err(|e| {
                    Error::Parse(format!("{}: count: {e}", meta_file.display()))
                })?)
            }
            other => {
                return Err(Error::Parse(format!(
                    "{}: unknown key {other}",
                    meta_file.display()
                )))
            }
        }
    }
    let missing = |k: &str| Error::Parse(format!("{}: missing {k}", meta_file.display()));
    let adc = AdcConfig {
        n_bits: n_bits.ok_or_else(|| missing("adc.n_bits"))?,
        r_half: r_half.ok_or_else(|| missing("adc.r_half"))?,
        sample_rate: sample_rate.ok_or_else(|| missing("adc.sample_rate"))?,
    };
    adc.validate()?;
    let raw = fs::read(path)?;
    let codes: Vec<u16> = if adc.n_bits <= 8 {
        raw.iter().map(|&b| b as u16).collect()
    } else {
        if raw.len() % 2 != 0 {
            return Err(Error::Parse(format!(
                "{}: odd byte count for 16-bit codes",
                path.display()
            )));
        }
        raw.chunks_exact(2)
            .map(|c| u16::from_le_bytes(c.try_into().unwrap()))
            .collect()
    };
    if let Some(count) = count {
        if codes.len() != count {
            return Err(Error::LengthMismatch {
                expected: count,
                got: codes.len(),
            });
        }
    }
    let max = adc.max_code();
    if let Some(&c) = codes.iter().find(|&&c| c > max) {
        return Err(Error::Parse(format!(
            "{}: code {c} exceeds {}-bit range",
            path.display(),
            adc.n_bits
        )));
    }
    Ok(CodeTrace { codes, adc, seed })
}

pub fn write_bitstream(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_bitstream(path: &Path) -> Result<Vec<u8>> {
    Ok(fs::read(path)?)
}

pub fn write_seed(path: &Path, seed: &ToeplitzSeed) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "k = {} l = {}", seed.k, seed.l)?;
    w.write_all(seed.bits().as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn read_seed(path: &Path) -> Result<ToeplitzSeed> {
    let raw = fs::read(path)?;
    let nl = raw
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Parse(format!("{}: missing header line", path.display())))?;
    let header = std::str::from_utf8(&raw[..nl])
        .map_err(|_| Error::Parse(format!("{}: header is not UTF-8", path.display())))?;
    let mut k = None;
    let mut l = None;
    // header fields may be written "k=1024" or "k = 1024"
    let mut tokens = header.split_whitespace().peekable();
    while let Some(tok) = tokens.next() {
        let missing_value =
            |n: &str| Error::Parse(format!("{}: missing value for {n}", path.display()));
        let (name, value) = if let Some((n, v)) = tok.split_once('=') {
            if v.is_empty() {
                let v = tokens.next().ok_or_else(|| missing_value(n))?;
                (n, v)
            } else {
                (n, v)
            }
        } else if tokens.peek() == Some(&"=") {
            tokens.next();
            let v = tokens.next().ok_or_else(|| missing_value(tok))?;
            (tok, v)
        } else {
            return Err(Error::Parse(format!(
                "{}: unexpected header token {tok}",
                path.display()
            )));
        };
        let parsed: usize = value
            .parse()
            .map_err(|e| Error::Parse(format!("{}: {name}: {e}", path.display())))?;
        match name {
            "k" => k = Some(parsed),
            "l" => l = Some(parsed),
            other => {
                return Err(Error::Parse(format!(
                    "{}: unknown header field {other}",
                    path.display()
                )))
            }
        }
    }
    let k = k.ok_or_else(|| Error::Parse(format!("{}: header missing k", path.display())))?;
    let l = l.ok_or_else(|| Error::Parse(format!("{}: header missing l", path.display())))?;
    let body = &raw[nl + 1..];
    let bits = BitBlock::from_bytes(body.to_vec(), k + l - 1)?;
    ToeplitzSeed::from_bits(k, l, bits)
}
