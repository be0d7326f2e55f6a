//! Ensemble file formats.
//!
//! The binary format is canonical:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "UQT1"
//! 4       2     version (u16, = 1)
//! 6       1     kind (0 = probabilities, 1 = logits)
//! 7       1     reserved (0)
//! 8       4     M (u32)
//! 12      4     N (u32)
//! 16      4     K (u32)
//! 20      8     temperature (f64)
//! 28      8MNK  values, [member][sample][class], row-major
//! ```
//!
//! All integers and floats are little-endian. A CSV form with header
//! `member,sample,class,value` converts into it.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::simplex::{EnsemblePredictions, ValueKind};

pub const MAGIC: &[u8; 4] = b"UQT1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 28;

fn kind_byte(kind: ValueKind) -> u8 {
    match kind {
        ValueKind::Probabilities => 0,
        ValueKind::Logits => 1,
    }
}

pub fn to_bytes(e: &EnsemblePredictions) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * e.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind_byte(e.kind()));
    out.push(0);
    for d in [e.members(), e.samples(), e.classes()] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&e.temperature().to_le_bytes());
    for v in e.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<EnsemblePredictions> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "file is {} bytes, shorter than the header",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format("bad magic, expected UQT1".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let kind = match bytes[6] {
        0 => ValueKind::Probabilities,
        1 => ValueKind::Logits,
        k => return Err(Error::Format(format!("unknown value kind {k}"))),
    };
    let (m, n, k) = (u32_at(8), u32_at(12), u32_at(16));
    let temperature = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
    let count = m
        .checked_mul(n)
        .and_then(|x| x.checked_mul(k))
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    let expected = count
        .checked_mul(8)
        .and_then(|x| x.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "expected {expected} bytes for M={m}, N={n}, K={k}, found {}",
            bytes.len()
        )));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    EnsemblePredictions::new(m, n, k, kind, temperature, values)
}

pub fn read_ensemble(path: impl AsRef<Path>) -> Result<EnsemblePredictions> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    from_bytes(&bytes)
}

pub fn write_ensemble(path: impl AsRef<Path>, e: &EnsemblePredictions) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(e)).map_err(|err| Error::Io(format!("{}: {err}", path.display())))
}

fn parse_float(s: &str, line: usize) -> Result<f64> {
    match s.trim() {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t
            .parse::<f64>()
            .map_err(|_| Error::Format(format!("line {line}: cannot parse value '{t}'"))),
    }
}

fn parse_index(s: &str, what: &str, line: usize) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| Error::Format(format!("line {line}: bad {what} index '{}'", s.trim())))
}

/// Parses `member,sample,class,value` rows in any order. Every cell of the
/// `M x N x K` grid implied by the largest indices must appear exactly once.
pub fn ensemble_from_csv(text: &str, kind: ValueKind, temperature: f64) -> Result<EnsemblePredictions> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Format("empty CSV".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["member", "sample", "class", "value"] {
        return Err(Error::Format(format!(
            "expected header 'member,sample,class,value', found '{}'",
            header.trim()
        )));
    }
    let mut cells: HashMap<(usize, usize, usize), f64> = HashMap::new();
    let (mut m, mut n, mut k) = (0, 0, 0);
    for (i, line) in lines {
        let no = i + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::Format(format!(
                "line {no}: expected 4 fields, found {}",
                f.len()
            )));
        }
        let key = (
            parse_index(f[0], "member", no)?,
            parse_index(f[1], "sample", no)?,
            parse_index(f[2], "class", no)?,
        );
        let v = parse_float(f[3], no)?;
        if v.is_nan() {
            return Err(Error::NaN(format!("CSV line {no}")));
        }
        if cells.insert(key, v).is_some() {
            return Err(Error::Format(format!("line {no}: duplicate cell {key:?}")));
        }
        m = m.max(key.0 + 1);
        n = n.max(key.1 + 1);
        k = k.max(key.2 + 1);
    }
    if cells.len() != m * n * k {
        return Err(Error::Format(format!(
            "incomplete grid: {} cells for M={m}, N={n}, K={k}",
            cells.len()
        )));
    }
    let mut values = Vec::with_capacity(m * n * k);
    for a in 0..m {
        for b in 0..n {
            for c in 0..k {
                values.push(cells[&(a, b, c)]);
            }
        }
    }
    EnsemblePredictions::new(m, n, k, kind, temperature, values)
}

/// Class labels, one per line or as `index,label` pairs. A first line that
/// does not parse as numbers is treated as a header.
pub fn labels_from_csv(text: &str) -> Result<Vec<usize>> {
    let rows: Vec<(usize, &str)> = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).collect();
    let numeric = |l: &str| l.split(',').all(|f| f.trim().parse::<i64>().is_ok());
    let skip = usize::from(rows.first().is_some_and(|(_, l)| !numeric(l)));
    let mut indexed: Vec<(usize, usize)> = Vec::new();
    let mut plain: Vec<usize> = Vec::new();
    for &(i, line) in &rows[skip..] {
        let f: Vec<&str> = line.split(',').collect();
        match f.as_slice() {
            [y] => plain.push(parse_index(y, "label", i + 1)?),
            [idx, y] => indexed.push((parse_index(idx, "sample", i + 1)?, parse_index(y, "label", i + 1)?)),
            _ => return Err(Error::Format(format!("line {}: expected 1 or 2 fields", i + 1))),
        }
    }
    if !plain.is_empty() && !indexed.is_empty() {
        return Err(Error::Format("labels mix one- and two-column rows".into()));
    }
    if plain.is_empty() {
        indexed.sort_unstable();
        for (want, &(got, _)) in indexed.iter().enumerate() {
            if got != want {
                return Err(Error::Format(format!(
                    "label indices must be 0..N without gaps or repeats; found {got} at position {want}"
                )));
            }
        }
        return Ok(indexed.into_iter().map(|(_, y)| y).collect());
    }
    Ok(plain)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EnsemblePredictions {
        EnsemblePredictions::new(2, 1, 3, ValueKind::Logits, 1.5, vec![0.1, -2.0, 3.0, 1e-300, 0.0, -0.0]).unwrap()
    }

    #[test]
    fn round_trip_bitwise() {
        let e = sample();
        let b = to_bytes(&e);
        assert_eq!(b.len(), HEADER_LEN + 8 * 6);
        let back = from_bytes(&b).unwrap();
        assert_eq!(back.temperature(), 1.5);
        let bits = |e: &EnsemblePredictions| e.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&e));
    }

    #[test]
    fn rejects_corruption() {
        let b = to_bytes(&sample());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(from_bytes(&bad), Err(Error::Format(_))));
        assert!(from_bytes(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[6] = 7;
        assert!(from_bytes(&bad).is_err());
        let mut bad = b.clone();
        bad[HEADER_LEN..HEADER_LEN + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(from_bytes(&bad), Err(Error::NaN(_))));
        assert!(from_bytes(b"UQ").is_err());
    }

    #[test]
    fn csv_any_order() {
        let text = "member,sample,class,value\n1,0,1,0.6\n0,0,0,0.5\n0,0,1,0.5\n1,0,0,0.4\n";
        let e = ensemble_from_csv(text, ValueKind::Probabilities, 1.0).unwrap();
        assert_eq!(e.values(), &[0.5, 0.5, 0.4, 0.6]);
        assert!(ensemble_from_csv("member,sample,class,value\n0,0,0,0.5\n", ValueKind::Probabilities, 1.0).is_err());
        let dup = "member,sample,class,value\n0,0,0,0.5\n0,0,0,0.5\n0,0,1,0.5\n";
        assert!(ensemble_from_csv(dup, ValueKind::Probabilities, 1.0).is_err());
        let gap = "member,sample,class,value\n0,0,0,0.5\n0,0,1,0.5\n1,0,0,1.0\n";
        assert!(ensemble_from_csv(gap, ValueKind::Probabilities, 1.0).is_err());
        assert!(ensemble_from_csv("a,b\n", ValueKind::Logits, 1.0).is_err());
        let nan = "member,sample,class,value\n0,0,0,NaN\n0,0,1,0\n";
        assert!(matches!(
            ensemble_from_csv(nan, ValueKind::Logits, 1.0),
            Err(Error::NaN(_))
        ));
    }

    #[test]
    fn labels_formats() {
        assert_eq!(labels_from_csv("0\n2\n1\n").unwrap(), vec![0, 2, 1]);
        assert_eq!(labels_from_csv("label\n0\n1\n").unwrap(), vec![0, 1]);
        assert_eq!(labels_from_csv("sample,label\n1,0\n0,2\n").unwrap(), vec![2, 0]);
        assert!(labels_from_csv("0,1\n0,1\n").is_err());
        assert!(labels_from_csv("0\n-1\n").is_err());
        assert!(labels_from_csv("0\n1,1\n").is_err());
    }
}
