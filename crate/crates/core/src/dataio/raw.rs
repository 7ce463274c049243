use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{DataError, RawInteraction, Result};

/// Layout of a raw rating file. All three carry `user, item, rating,
/// timestamp` per line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawFormat {
    /// MovieLens 100K `u.data`: tab separated.
    Ml100k,
    /// MovieLens 1M `ratings.dat`: `::` separated.
    Ml1m,
    /// Tab separated, timestamps may be written as integral floats.
    GenericTsv,
}

impl RawFormat {
    fn separator(self) -> &'static str {
        match self {
            RawFormat::Ml100k | RawFormat::GenericTsv => "\t",
            RawFormat::Ml1m => "::",
        }
    }
}

impl FromStr for RawFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "ml100k" | "ml-100k" => Ok(RawFormat::Ml100k),
            "ml1m" | "ml-1m" => Ok(RawFormat::Ml1m),
            "generic_tsv" | "tsv" => Ok(RawFormat::GenericTsv),
            other => Err(format!(
                "unknown raw format {other:?} (expected ml100k, ml1m or generic_tsv)"
            )),
        }
    }
}

pub fn parse_raw(path: &Path, format: RawFormat) -> Result<Vec<RawInteraction>> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_raw_str(&text, format)
}

/// Parses rating lines, preserving order. Blank lines are skipped; line
/// numbers in errors are 1-based.
pub fn parse_raw_str(text: &str, format: RawFormat) -> Result<Vec<RawInteraction>> {
    let sep = format.separator();
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(sep).collect();
        if fields.len() != 4 {
            return Err(DataError::Parse {
                line: line_no,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let perr = |message: String| DataError::Parse {
            line: line_no,
            message,
        };
        let user_id = fields[0].trim();
        let item_id = fields[1].trim();
        if user_id.is_empty() || item_id.is_empty() {
            return Err(perr("empty user or item id".into()));
        }
        let rating: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|e| perr(format!("bad rating {:?}: {e}", fields[2])))?;
        if !rating.is_finite() {
            return Err(perr(format!("non-finite rating {rating}")));
        }
        let timestamp = parse_timestamp(fields[3].trim(), format).map_err(perr)?;
        out.push(RawInteraction {
            user_id: user_id.to_string(),
            item_id: item_id.to_string(),
            rating,
            timestamp,
        });
    }
    if out.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    Ok(out)
}

fn parse_timestamp(s: &str, format: RawFormat) -> std::result::Result<i64, String> {
    let ts = match s.parse::<i64>() {
        Ok(v) => v,
        Err(_) if format == RawFormat::GenericTsv => {
            let f: f64 = s.parse().map_err(|e| format!("bad timestamp {s:?}: {e}"))?;
            if !f.is_finite() || f.fract() != 0.0 {
                return Err(format!("timestamp {s:?} is not an integer"));
            }
            f as i64
        }
        Err(e) => return Err(format!("bad timestamp {s:?}: {e}")),
    };
    if ts < 0 {
        return Err(format!("negative timestamp {ts}"));
    }
    Ok(ts)
}
