//! FCIDUMP (Molpro convention) reader and writer.
//!
//! Body lines are `value i j k l` with 1-based orbital indices:
//! all four nonzero is `(ij|kl)`, `k = l = 0` is `h[i][j]`, and all zero is
//! the core energy. ORBSYM and ISYM are accepted and ignored.

use std::collections::HashMap;
use std::fmt::Write as _;

use log::warn;

use super::{eightfold, ActiveSpace, FermionHamiltonian};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ParsedFcidump {
    pub hamiltonian: FermionHamiltonian,
    /// `MS2` from the header, when present.
    pub ms2: Option<i64>,
    pub warnings: Vec<String>,
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Fcidump { line, msg: msg.into() }
}

fn parse_value(tok: &str, line: usize) -> Result<f64> {
    if tok.starts_with('(') {
        return Err(err(line, "complex integrals are not supported"));
    }
    let norm = tok.replace(['D', 'd'], "E");
    let v: f64 = norm.parse().map_err(|_| err(line, format!("non-numeric value `{tok}`")))?;
    if !v.is_finite() {
        return Err(err(line, format!("non-finite value `{tok}`")));
    }
    Ok(v)
}

/// Parses the namelist header. Returns the key/value map and the number of
/// lines it spans.
fn parse_header(lines: &[&str]) -> Result<(HashMap<String, String>, usize)> {
    let first = lines.iter().position(|l| !l.trim().is_empty()).ok_or_else(|| err(1, "empty file"))?;
    if !lines[first].trim_start().to_ascii_uppercase().starts_with("&FCI") {
        return Err(err(first + 1, "header must start with `&FCI`"));
    }
    let mut text = String::new();
    let mut end = None;
    for (i, raw) in lines.iter().enumerate().skip(first) {
        let upper = raw.to_ascii_uppercase();
        let (content, done) = match upper.find("&END").or_else(|| upper.trim_end().ends_with('/').then(|| upper.rfind('/').unwrap())) {
            Some(pos) => (&raw[..pos], true),
            None => (&raw[..], false),
        };
        text.push_str(content);
        text.push(' ');
        if done {
            end = Some(i + 1);
            break;
        }
    }
    let end = end.ok_or_else(|| err(lines.len(), "unterminated header (missing `&END` or `/`)"))?;
    let body = text.trim_start();
    let body = &body[4.min(body.len())..]; // drop "&FCI"

    // KEY=v1,v2,...  KEY2=...
    let mut map = HashMap::new();
    let mut key: Option<String> = None;
    let mut vals = String::new();
    for tok in body.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
        if let Some((k, v)) = tok.split_once('=') {
            if let Some(prev) = key.take() {
                map.insert(prev, vals.trim_end_matches(',').to_string());
            }
            key = Some(k.trim().to_ascii_uppercase());
            vals = v.to_string();
            if !vals.is_empty() {
                vals.push(',');
            }
        } else if key.is_some() {
            vals.push_str(tok);
            vals.push(',');
        } else {
            return Err(err(first + 1, format!("unexpected header token `{tok}`")));
        }
    }
    if let Some(prev) = key {
        map.insert(prev, vals.trim_end_matches(',').to_string());
    }
    Ok((map, end))
}

fn header_int(map: &HashMap<String, String>, key: &str, line: usize) -> Result<Option<i64>> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .trim()
            .parse::<i64>()
            .map(Some)
            .map_err(|_| err(line, format!("header key {key} has non-integer value `{v}`"))),
    }
}

pub fn parse_fcidump(text: &str) -> Result<ParsedFcidump> {
    let lines: Vec<&str> = text.lines().collect();
    let (map, body_start) = parse_header(&lines)?;
    let norb = header_int(&map, "NORB", 1)?.ok_or_else(|| err(1, "header is missing NORB"))?;
    let nelec = header_int(&map, "NELEC", 1)?.ok_or_else(|| err(1, "header is missing NELEC"))?;
    let ms2 = header_int(&map, "MS2", 1)?;
    if norb <= 0 || nelec < 0 {
        return Err(err(1, "NORB must be positive and NELEC non-negative"));
    }
    let space = ActiveSpace::new(norb as usize, nelec as usize).map_err(|e| err(1, e.to_string()))?;
    let n = space.n_spatial;
    let mut h = FermionHamiltonian::zeros(space);
    let mut warnings = Vec::new();
    let mut seen_h1: HashMap<(usize, usize), f64> = HashMap::new();
    let mut seen_h2: HashMap<(usize, usize, usize, usize), f64> = HashMap::new();
    let mut seen_core: Option<f64> = None;
    let mut n_entries = 0usize;

    for (offset, raw) in lines[body_start..].iter().enumerate() {
        let line_no = body_start + offset + 1;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 5 {
            return Err(err(line_no, format!("expected `value i j k l`, found {} fields", toks.len())));
        }
        let value = parse_value(toks[0], line_no)?;
        let mut idx = [0usize; 4];
        for (slot, tok) in idx.iter_mut().zip(&toks[1..]) {
            let v: i64 = tok.parse().map_err(|_| err(line_no, format!("non-integer index `{tok}`")))?;
            if v < 0 || v as usize > n {
                return Err(err(line_no, format!("index {v} out of range 0..={n}")));
            }
            *slot = v as usize;
        }
        n_entries += 1;
        match idx {
            [0, 0, 0, 0] => {
                if let Some(prev) = seen_core {
                    if prev != value {
                        warnings.push(format!("line {line_no}: core energy redefined ({prev} -> {value})"));
                    }
                }
                seen_core = Some(value);
                h.e_core = value;
            }
            [i, j, 0, 0] if i > 0 && j > 0 => {
                let key = (i.max(j) - 1, i.min(j) - 1);
                if let Some(prev) = seen_h1.insert(key, value) {
                    if prev != value {
                        warnings.push(format!("line {line_no}: h1({i},{j}) conflicts with earlier value {prev}; keeping {value}"));
                    }
                }
                h.set_h1(i - 1, j - 1, value);
            }
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => {
                let key = canonical(i - 1, j - 1, k - 1, l - 1);
                if let Some(prev) = seen_h2.insert(key, value) {
                    if prev != value {
                        warnings.push(format!(
                            "line {line_no}: ({i}{j}|{k}{l}) conflicts with earlier value {prev}; keeping {value}"
                        ));
                    }
                }
                h.set_h2(i - 1, j - 1, k - 1, l - 1, value);
            }
            _ => {
                warnings.push(format!("line {line_no}: ignoring entry with index pattern {idx:?}"));
            }
        }
    }
    if n_entries == 0 {
        warnings.push("FCIDUMP has no integral lines; Hamiltonian is zero".to_string());
    }
    for w in &warnings {
        warn!("{w}");
    }
    Ok(ParsedFcidump { hamiltonian: h, ms2, warnings })
}

fn canonical(p: usize, q: usize, r: usize, s: usize) -> (usize, usize, usize, usize) {
    eightfold(p, q, r, s).into_iter().max().unwrap()
}

/// Writes unique nonzero integrals (`i>=j`, `k>=l`, `ij>=kl`), then `h1`, then
/// the core energy, with 17 significant digits.
pub fn emit_fcidump(h: &FermionHamiltonian, ms2: i64) -> String {
    let n = h.n_spatial();
    let mut out = String::new();
    let orbsym = vec!["1"; n].join(",");
    let _ = writeln!(out, " &FCI NORB={n},NELEC={},MS2={ms2},", h.space.n_electrons);
    let _ = writeln!(out, "  ORBSYM={orbsym},");
    let _ = writeln!(out, "  ISYM=1,");
    let _ = writeln!(out, " &END");
    for i in 0..n {
        for j in 0..=i {
            for k in 0..n {
                for l in 0..=k {
                    if i * (i + 1) / 2 + j < k * (k + 1) / 2 + l {
                        continue;
                    }
                    let v = h.h2(i, j, k, l);
                    if v != 0.0 {
                        let _ = writeln!(out, "{v:.16e} {} {} {} {}", i + 1, j + 1, k + 1, l + 1);
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..=i {
            let v = h.h1(i, j);
            if v != 0.0 {
                let _ = writeln!(out, "{v:.16e} {} {} 0 0", i + 1, j + 1);
            }
        }
    }
    let _ = writeln!(out, "{:.16e} 0 0 0 0", h.e_core);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = " &FCI NORB=1,NELEC=2,MS2=0,\n  ORBSYM=1,\n  ISYM=1,\n &END\n -1.0 1 1 0 0\n 0.5 1 1 1 1\n 0.0 0 0 0 0\n";

    #[test]
    fn minimal_file() {
        let p = parse_fcidump(MINIMAL).unwrap();
        let h = &p.hamiltonian;
        assert_eq!(h.h1(0, 0), -1.0);
        assert_eq!(h.h2(0, 0, 0, 0), 0.5);
        assert_eq!(h.e_core, 0.0);
        assert_eq!(p.ms2, Some(0));
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn empty_body_warns() {
        let p = parse_fcidump("&FCI NORB=2,NELEC=2,MS2=0,\n&END\n").unwrap();
        assert_eq!(p.warnings.len(), 1);
        assert_eq!(p.hamiltonian, FermionHamiltonian::zeros(p.hamiltonian.space));
    }

    #[test]
    fn symmetry_completion() {
        let p = parse_fcidump("&FCI NORB=2,NELEC=2,\n/\n0.3 1 2 0 0\n").unwrap();
        assert_eq!(p.hamiltonian.h1(0, 1), 0.3);
        assert_eq!(p.hamiltonian.h1(1, 0), 0.3);
        assert_eq!(p.ms2, None);
    }

    #[test]
    fn fortran_exponent_and_conflict() {
        let text = "&FCI NORB=2,NELEC=2,MS2=0 &END\n1.5D-01 1 2 1 2\n0.2 2 1 2 1\n";
        let p = parse_fcidump(text).unwrap();
        assert_eq!(p.hamiltonian.h2(0, 1, 0, 1), 0.2);
        assert_eq!(p.hamiltonian.h2(1, 0, 1, 0), 0.2);
        assert_eq!(p.warnings.len(), 1);
    }

    #[test]
    fn errors_have_line_numbers() {
        let bad_index = "&FCI NORB=1,NELEC=2,\n&END\n0.1 1 1 0 0\n0.2 2 1 0 0\n";
        assert!(matches!(parse_fcidump(bad_index), Err(Error::Fcidump { line: 4, .. })));
        let bad_value = "&FCI NORB=1,NELEC=2,\n&END\nabc 1 1 0 0\n";
        assert!(matches!(parse_fcidump(bad_value), Err(Error::Fcidump { line: 3, .. })));
        let no_norb = "&FCI NELEC=2,\n&END\n";
        assert!(matches!(parse_fcidump(no_norb), Err(Error::Fcidump { line: 1, .. })));
        let complex = "&FCI NORB=1,NELEC=2,\n&END\n(0.1,0.2) 1 1 0 0\n";
        assert!(matches!(parse_fcidump(complex), Err(Error::Fcidump { line: 3, .. })));
        assert!(matches!(parse_fcidump("NORB=1\n"), Err(Error::Fcidump { .. })));
    }

    #[test]
    fn emit_round_trip() {
        let mut h = FermionHamiltonian::zeros(ActiveSpace::new(3, 4).unwrap());
        h.set_h1(0, 0, -2.0 / 3.0);
        h.set_h1(1, 2, 0.1);
        h.set_h2(0, 1, 2, 1, 0.123456789012345678);
        h.set_h2(2, 2, 2, 2, 1.0 / 7.0);
        h.e_core = -12.5;
        let text = emit_fcidump(&h, 0);
        let back = parse_fcidump(&text).unwrap();
        assert_eq!(back.hamiltonian, h);
        assert!(back.warnings.is_empty(), "{:?}", back.warnings);
    }
}
