//! WFDB header parsing and the format 16 signal codec.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{canonical_order, EcgRecord, RecordHeader, SignalSpec};
use crate::error::{Error, Result};
use crate::lead::N_LEADS;
use crate::num::Scalar;

/// WFDB default ADC gain when the header gives 0 or omits it.
const DEFAULT_GAIN: f64 = 200.0;

/// ADC-to-millivolt conversion for one signal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub gain: f64,
    pub baseline: i32,
}

impl From<&SignalSpec> for Calibration {
    fn from(s: &SignalSpec) -> Self {
        Calibration { gain: s.gain, baseline: s.baseline }
    }
}

fn header_err(line: usize, message: impl Into<String>) -> Error {
    Error::HeaderParse { line, message: message.into() }
}

/// Leading run of ASCII digits (format fields look like `16`, `16x2`, `16:3+40`).
fn leading_int(tok: &str) -> Option<u16> {
    let end = tok.find(|c: char| !c.is_ascii_digit()).unwrap_or(tok.len());
    tok[..end].parse().ok()
}

/// Parses `gain[(baseline)][/units]`; gain is returned in ADC units per millivolt.
fn parse_gain(tok: &str, line: usize) -> Result<(f64, Option<i32>)> {
    let (body, units) = match tok.split_once('/') {
        Some((b, u)) => (b, Some(u)),
        None => (tok, None),
    };
    let (gain_str, baseline) = match body.split_once('(') {
        Some((g, rest)) => {
            let inner = rest
                .strip_suffix(')')
                .ok_or_else(|| header_err(line, format!("unterminated baseline in {tok:?}")))?;
            let b = inner
                .trim()
                .parse::<i32>()
                .map_err(|_| header_err(line, format!("bad baseline in {tok:?}")))?;
            (g, Some(b))
        }
        None => (body, None),
    };
    let mut gain: f64 = gain_str
        .parse()
        .map_err(|_| header_err(line, format!("unparseable gain {tok:?}")))?;
    if !gain.is_finite() || gain < 0.0 {
        return Err(header_err(line, format!("gain must be positive in {tok:?}")));
    }
    if gain == 0.0 {
        gain = DEFAULT_GAIN;
    }
    match units {
        None | Some("mV") => {}
        Some("uV") => gain *= 1000.0,
        Some("V") => gain /= 1000.0,
        Some(u) => return Err(header_err(line, format!("unsupported units {u:?}"))),
    }
    Ok((gain, baseline))
}

/// Parses the text of a `.hea` file.
pub fn parse_wfdb_header(text: &str) -> Result<RecordHeader> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (rec_line, rec) = lines.next().ok_or_else(|| header_err(1, "empty header"))?;
    let toks: Vec<&str> = rec.split_whitespace().collect();
    if toks.len() < 4 {
        return Err(header_err(
            rec_line,
            "record line needs `name n_sig fs n_samples`",
        ));
    }
    let record_name = toks[0].split('/').next().unwrap_or(toks[0]).to_string();
    let n_signals: usize = toks[1]
        .parse()
        .map_err(|_| header_err(rec_line, format!("bad signal count {:?}", toks[1])))?;
    let fs_tok = toks[2].split(['/', '(']).next().unwrap_or("");
    let sampling_rate: f64 = fs_tok
        .parse()
        .map_err(|_| header_err(rec_line, format!("bad sampling rate {:?}", toks[2])))?;
    if !(sampling_rate > 0.0) || !sampling_rate.is_finite() {
        return Err(header_err(rec_line, format!("sampling rate must be positive, got {sampling_rate}")));
    }
    let n_samples: usize = toks[3]
        .parse()
        .map_err(|_| header_err(rec_line, format!("bad sample count {:?}", toks[3])))?;

    let mut signals = Vec::with_capacity(n_signals);
    for (line, l) in lines {
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() < 2 {
            return Err(header_err(line, "signal line needs at least `file format`"));
        }
        let storage_format = leading_int(t[1])
            .ok_or_else(|| header_err(line, format!("bad storage format {:?}", t[1])))?;
        let (gain, baseline) = match t.get(2) {
            Some(tok) => parse_gain(tok, line)?,
            None => (DEFAULT_GAIN, None),
        };
        let adc_zero = match t.get(4) {
            Some(z) => z
                .parse::<i32>()
                .map_err(|_| header_err(line, format!("bad ADC zero {z:?}")))?,
            None => 0,
        };
        let lead_name = if t.len() > 8 { t[t.len() - 1].to_string() } else { String::new() };
        signals.push(SignalSpec {
            file_name: t[0].to_string(),
            storage_format,
            gain,
            baseline: baseline.unwrap_or(adc_zero),
            lead_name,
        });
    }
    if signals.len() != n_signals {
        return Err(header_err(
            rec_line,
            format!("declares {n_signals} signals but {} signal lines follow", signals.len()),
        ));
    }
    Ok(RecordHeader { record_name, n_signals, sampling_rate, n_samples, signals })
}

/// Decodes little-endian 16-bit two's-complement frames multiplexed over
/// `cal.len()` signals, returning one millivolt vector per signal.
pub fn decode_format16<T: Scalar>(bytes: &[u8], cal: &[Calibration]) -> Result<Vec<Vec<T>>> {
    let n_sig = cal.len();
    if n_sig == 0 {
        return Err(Error::InvalidParam("no signals to decode".into()));
    }
    let frame = 2 * n_sig;
    let n_frames = bytes.len() / frame;
    if !bytes.len().is_multiple_of(frame) {
        return Err(Error::TruncatedFrame { offset: n_frames * frame });
    }
    let mut out: Vec<Vec<T>> = (0..n_sig).map(|_| Vec::with_capacity(n_frames)).collect();
    for chunk in bytes.chunks_exact(frame) {
        for (s, pair) in chunk.chunks_exact(2).enumerate() {
            let raw = i16::from_le_bytes([pair[0], pair[1]]) as f64;
            let c = cal[s];
            out[s].push(T::of((raw - c.baseline as f64) / c.gain));
        }
    }
    Ok(out)
}

/// Inverse of [`decode_format16`] on raw ADC values.
pub fn encode_format16(raw: &[Vec<i16>]) -> Result<Vec<u8>> {
    let n = raw.first().map_or(0, Vec::len);
    if raw.iter().any(|s| s.len() != n) {
        return Err(Error::InvalidParam("signals differ in length".into()));
    }
    let mut out = Vec::with_capacity(n * raw.len() * 2);
    for i in 0..n {
        for s in raw {
            out.extend_from_slice(&s[i].to_le_bytes());
        }
    }
    Ok(out)
}

fn sibling(header_path: &Path, file: &str) -> PathBuf {
    header_path.parent().map_or_else(|| PathBuf::from(file), |d| d.join(file))
}

/// Loads a `.hea`/`.dat` pair. `path` may name the header with or without extension.
pub fn load_wfdb_record<T: Scalar>(path: &Path) -> Result<EcgRecord<T>> {
    let hea = if path.extension().is_some_and(|e| e == "hea") {
        path.to_path_buf()
    } else {
        let mut p = path.as_os_str().to_owned();
        p.push(".hea");
        PathBuf::from(p)
    };
    let header = parse_wfdb_header(&fs::read_to_string(&hea)?)?;
    let rec_err = |message: String| Error::Record { record: header.record_name.clone(), message };
    if header.n_signals != N_LEADS {
        return Err(Error::LeadCount(header.n_signals));
    }
    if let Some(s) = header.signals.iter().find(|s| s.storage_format != 16) {
        return Err(Error::UnsupportedFormat(s.storage_format));
    }
    let file = &header.signals[0].file_name;
    if header.signals.iter().any(|s| &s.file_name != file) {
        return Err(rec_err("signals spread over several data files".into()));
    }
    let bytes = fs::read(sibling(&hea, file))?;
    let cal: Vec<Calibration> = header.signals.iter().map(Calibration::from).collect();
    let mut decoded = decode_format16::<T>(&bytes, &cal)?;
    let have = decoded[0].len();
    if have < header.n_samples {
        return Err(rec_err(format!("{have} frames on disk, header declares {}", header.n_samples)));
    }
    for s in &mut decoded {
        s.truncate(header.n_samples);
    }
    let named = header.signals.iter().map(|s| s.lead_name.clone()).zip(decoded).collect();
    let signals = canonical_order(&header.record_name, named)?;
    Ok(EcgRecord { header, signals, label: None, patient_id: None })
}

/// Writes `record` as `{dir}/{name}.hea` + `{dir}/{name}.dat` (format 16, 1000 ADC/mV).
pub fn write_wfdb_record<T: Scalar>(dir: &Path, name: &str, record: &EcgRecord<T>) -> Result<PathBuf> {
    let gain = 1000.0;
    let dat_name = format!("{name}.dat");
    let raw: Vec<Vec<i16>> = record
        .signals
        .iter()
        .map(|s| {
            s.iter()
                .map(|&v| (v.as_f64() * gain).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16)
                .collect()
        })
        .collect();
    fs::write(dir.join(&dat_name), encode_format16(&raw)?)?;

    let hea_path = dir.join(format!("{name}.hea"));
    let mut hea = fs::File::create(&hea_path)?;
    writeln!(hea, "{name} {} {} {}", N_LEADS, record.fs(), record.n_samples())?;
    for (lead, s) in crate::lead::Lead::ALL.iter().zip(&raw) {
        let first = s.first().copied().unwrap_or(0);
        let checksum = s.iter().fold(0i16, |acc, &v| acc.wrapping_add(v));
        writeln!(hea, "{dat_name} 16 {gain}(0)/mV 16 0 {first} {checksum} 0 {}", lead.name().to_uppercase())?;
    }
    Ok(hea_path)
}
