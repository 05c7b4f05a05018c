//! Converters from native evocation distributions to canonical
//! `cue\tresponse\tcount` rows.
//!
//! * `swow`: either the SWOW-EN strength file (`cue`, `response`, `R123`
//!   columns) or the raw participant file (`cue`, `R1`, `R2`, `R3` columns).
//!   For the raw file each response slot counts once; the three slots are
//!   weighted equally.
//! * `fa`: University of South Florida norms appendix (`CUE`, `TARGET`, `#P`).
//!   Only normed targets are listed by the norms, so totals computed from the
//!   converted file cover listed responses only.
//! * `eat`: the EAT XML export (`<stimulus word=..>` / `<response word=.. n=..>`).

use std::collections::BTreeMap;
use std::io::{self, BufRead, Read, Write};
use std::str::FromStr;

use regex::Regex;
use thiserror::Error;

use crate::pair::normalize_word;

#[derive(Debug, Error)]
pub enum ConvertError {
    #[error("missing column {0:?} in header")]
    MissingColumn(&'static str),
    #[error("record {record}: {msg}")]
    Record { record: usize, msg: String },
    #[error("unknown evocation format {0:?} (expected canonical, swow, fa or eat)")]
    UnknownFormat(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NativeFormat {
    Canonical,
    Swow,
    Fa,
    Eat,
}

impl FromStr for NativeFormat {
    type Err = ConvertError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "canonical" | "tsv" => Ok(NativeFormat::Canonical),
            "swow" => Ok(NativeFormat::Swow),
            "fa" | "usf" => Ok(NativeFormat::Fa),
            "eat" => Ok(NativeFormat::Eat),
            _ => Err(ConvertError::UnknownFormat(s.to_string())),
        }
    }
}

/// Aggregated `(cue, response) -> count`, sorted.
pub type CountRows = BTreeMap<(String, String), u64>;

fn bump(rows: &mut CountRows, cue: &str, response: &str, n: u64) {
    let (Some(c), Some(r)) = (normalize_word(cue), normalize_word(response)) else {
        return;
    };
    if n > 0 {
        *rows.entry((c, r)).or_insert(0) += n;
    }
}

fn sniff_delimiter(text: &str) -> u8 {
    let first = text.lines().next().unwrap_or("");
    if first.matches('\t').count() >= first.matches(',').count() && first.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

fn column(headers: &csv::StringRecord, names: &[&str], label: &'static str) -> Result<usize, ConvertError> {
    headers
        .iter()
        .position(|h| names.iter().any(|n| h.trim().eq_ignore_ascii_case(n)))
        .ok_or(ConvertError::MissingColumn(label))
}

fn is_missing(s: &str) -> bool {
    let s = s.trim();
    s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("no more responses")
}

pub fn convert_swow<R: Read>(mut source: R) -> Result<CountRows, ConvertError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(sniff_delimiter(&text))
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let cue = column(&headers, &["cue"], "cue")?;
    let mut rows = CountRows::new();
    if let Ok(response) = column(&headers, &["response"], "response") {
        let count = column(&headers, &["R123", "count"], "R123")?;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let (Some(c), Some(r), Some(n)) = (rec.get(cue), rec.get(response), rec.get(count)) else {
                return Err(ConvertError::Record { record: i + 1, msg: "short record".into() });
            };
            if is_missing(r) {
                continue;
            }
            let n: u64 = n.trim().parse().map_err(|_| ConvertError::Record {
                record: i + 1,
                msg: format!("bad count {n:?}"),
            })?;
            bump(&mut rows, c, r, n);
        }
    } else {
        let slots = [
            column(&headers, &["R1"], "R1")?,
            column(&headers, &["R2"], "R2")?,
            column(&headers, &["R3"], "R3")?,
        ];
        for rec in rdr.records() {
            let rec = rec?;
            let Some(c) = rec.get(cue) else { continue };
            for &s in &slots {
                if let Some(r) = rec.get(s).filter(|r| !is_missing(r)) {
                    bump(&mut rows, c, r, 1);
                }
            }
        }
    }
    Ok(rows)
}

pub fn convert_fa<R: Read>(source: R) -> Result<CountRows, ConvertError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let headers = rdr.headers()?.clone();
    let cue = column(&headers, &["CUE"], "CUE")?;
    let target = column(&headers, &["TARGET"], "TARGET")?;
    let produced = column(&headers, &["#P"], "#P")?;
    let mut rows = CountRows::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let (Some(c), Some(t), Some(p)) = (rec.get(cue), rec.get(target), rec.get(produced)) else {
            return Err(ConvertError::Record { record: i + 1, msg: "short record".into() });
        };
        let n: u64 = p.parse().map_err(|_| ConvertError::Record {
            record: i + 1,
            msg: format!("bad #P {p:?}"),
        })?;
        bump(&mut rows, c, t, n);
    }
    Ok(rows)
}

pub fn convert_eat<R: BufRead>(source: R) -> Result<CountRows, ConvertError> {
    let stimulus = Regex::new(r#"<stimulus\b[^>]*\bword="([^"]*)""#).expect("static regex");
    let response = Regex::new(r#"<response\b[^>]*\bword="([^"]*)"[^>]*\bn="(\d+)""#).expect("static regex");
    let mut rows = CountRows::new();
    let mut current: Option<String> = None;
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if let Some(cap) = stimulus.captures(&line) {
            current = Some(cap[1].to_string());
        }
        for cap in response.captures_iter(&line) {
            let Some(cue) = current.as_deref() else {
                return Err(ConvertError::Record { record: i + 1, msg: "response before stimulus".into() });
            };
            let n: u64 = cap[2].parse().expect("regex guarantees digits");
            bump(&mut rows, cue, &cap[1], n);
        }
    }
    Ok(rows)
}

pub fn write_canonical<W: Write>(rows: &CountRows, mut w: W) -> io::Result<()> {
    for ((c, r), n) in rows {
        writeln!(w, "{c}\t{r}\t{n}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swow_strength_file() {
        let src = "cue\tresponse\tR123\tN\tR123.Strength\na\tb\t3\t10\t0.3\na\tc\t7\t10\t0.7\n";
        let rows = convert_swow(src.as_bytes()).unwrap();
        assert_eq!(rows[&("a".into(), "b".into())], 3);
        assert_eq!(rows.len(), 2);
    }

    #[test]
    fn swow_raw_sums_slots_uniformly() {
        let src = "\"\",\"id\",\"cue\",\"R1\",\"R2\",\"R3\"\n\
                   1,1,Dog,cat,bone,NA\n\
                   2,2,dog,Cat,ice cream,cat\n";
        let rows = convert_swow(src.as_bytes()).unwrap();
        assert_eq!(rows[&("dog".into(), "cat".into())], 3);
        assert_eq!(rows[&("dog".into(), "ice_cream".into())], 1);
        assert_eq!(rows[&("dog".into(), "bone".into())], 1);
        assert_eq!(rows.len(), 3);
    }

    #[test]
    fn fa_uses_producer_count() {
        let src = "CUE, TARGET, NORMED?, #G, #P, FSG\nABILITY, CAPABILITY, YES, 150, 8, 0.053\n";
        let rows = convert_fa(src.as_bytes()).unwrap();
        assert_eq!(rows[&("ability".into(), "capability".into())], 8);
    }

    #[test]
    fn eat_xml() {
        let src = "<stimulus word=\"ABLE\" all=\"100\" diff=\"2\">\n\
                   <response word=\"CAPABLE\" n=\"40\" r=\"0.4\"/>\n\
                   <response word=\"UNABLE\" n=\"60\" r=\"0.6\"/>\n</stimulus>\n";
        let rows = convert_eat(src.as_bytes()).unwrap();
        assert_eq!(rows[&("able".into(), "capable".into())], 40);
        assert_eq!(rows[&("able".into(), "unable".into())], 60);
    }

    #[test]
    fn canonical_output_reingests() {
        let src = "cue\tresponse\tR123\na\tb\t3\nb\ta\t1\n";
        let rows = convert_swow(src.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_canonical(&rows, &mut buf).unwrap();
        let d = crate::evocation::ingest_evocation(&buf[..], "swow").unwrap();
        assert_eq!(d.count("a", "b"), Some(3));
    }
}
