//! Sample ingestion and evaluation-grid parsing.

use std::path::Path;

use serde::Deserialize;

use crate::cdf::CensoredSample;
use crate::error::{Error, Result};

/// Parse `time,event` CSV. The header row is optional, the event column may
/// be omitted (defaulting to 1) and accepts `0/1` or `true/false`.
pub fn read_csv_sample<R: std::io::Read>(reader: R) -> Result<CensoredSample> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut times = Vec::new();
    let mut events = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(idx + 1);
        let first = record.get(0).unwrap_or("");
        if idx == 0 && first.eq_ignore_ascii_case("time") {
            continue;
        }
        if record.len() == 1 && first.is_empty() {
            continue;
        }
        if record.len() > 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected `time[,event]`, found {} fields", record.len()),
            });
        }
        let t: f64 = first.parse().map_err(|_| Error::Parse {
            line,
            message: format!("cannot parse time `{first}`"),
        })?;
        if !t.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("time `{first}` is not finite"),
            });
        }
        let e = match record.get(1) {
            None | Some("") => true,
            Some(s) => parse_event(s).ok_or_else(|| Error::Parse {
                line,
                message: format!("event must be 0/1 or true/false, found `{s}`"),
            })?,
        };
        times.push(t);
        events.push(e);
    }
    CensoredSample::new(times, events)
}

fn parse_event(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonRow {
    Plain(f64),
    Pair(f64, serde_json::Value),
    Object { time: f64, event: Option<serde_json::Value> },
}

/// Parse a JSON array of numbers, `[time, event]` pairs or
/// `{"time": .., "event": ..}` objects.
pub fn read_json_sample<R: std::io::Read>(reader: R) -> Result<CensoredSample> {
    let rows: Vec<JsonRow> = serde_json::from_reader(reader)?;
    let mut times = Vec::with_capacity(rows.len());
    let mut events = Vec::with_capacity(rows.len());
    for (i, row) in rows.into_iter().enumerate() {
        let (t, e) = match row {
            JsonRow::Plain(t) => (t, None),
            JsonRow::Pair(t, e) => (t, Some(e)),
            JsonRow::Object { time, event } => (time, event),
        };
        let e = match e {
            None => true,
            Some(serde_json::Value::Bool(b)) => b,
            Some(serde_json::Value::Number(n)) if n.as_f64() == Some(1.0) => true,
            Some(serde_json::Value::Number(n)) if n.as_f64() == Some(0.0) => false,
            Some(other) => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("element {}: invalid event `{other}`", i + 1),
                })
            }
        };
        times.push(t);
        events.push(e);
    }
    CensoredSample::new(times, events)
}

/// Read a sample, choosing JSON for `.json` files and CSV otherwise.
pub fn read_sample(path: &Path) -> Result<CensoredSample> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        read_json_sample(reader)
    } else {
        read_csv_sample(reader)
    }
}

/// `min:max:count` or a comma-separated ascending list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |m: String| Error::param(format!("grid `{spec}`: {m}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
    let grid = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected min:max:count".into()));
        }
        let (lo, hi) = (num(parts[0])?, num(parts[1])?);
        let count: usize = parts[2].trim().parse().map_err(|e| bad(format!("count: {e}")))?;
        if count == 0 {
            Vec::new()
        } else if count == 1 {
            vec![lo]
        } else {
            if !(hi >= lo) {
                return Err(bad("max must not be below min".into()));
            }
            (0..count)
                .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
                .collect()
        }
    } else {
        spec.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(num)
            .collect::<Result<Vec<f64>>>()?
    };
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(bad("values must be finite".into()));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(bad("values must be ascending".into()));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_with_and_without_events() {
        let s = read_csv_sample("time,event\n1.5,1\n2.0,0\n3\n".as_bytes()).unwrap();
        assert_eq!(s.times(), &[1.5, 2.0, 3.0]);
        assert_eq!(s.events(), &[true, false, true]);
        let s = read_csv_sample("0.1\n-0.2\n".as_bytes()).unwrap();
        assert!(s.is_uncensored());
    }

    #[test]
    fn csv_errors_name_the_line() {
        let err = read_csv_sample("time,event\n1.0,1\nabc,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = read_csv_sample("1.0,1\n2.0,7\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn json_shapes() {
        let s = read_json_sample("[1.0, 2.5]".as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        let s = read_json_sample(r#"[[1.0, 0], {"time": 2.0, "event": true}, {"time": 3.0}]"#.as_bytes()).unwrap();
        assert_eq!(s.events(), &[false, true, true]);
        assert!(read_json_sample(r#"[[1.0, "x"]]"#.as_bytes()).is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("-3:3:7").unwrap(), vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
        assert_eq!(parse_grid("0.5,1,2").unwrap(), vec![0.5, 1.0, 2.0]);
        assert!(parse_grid("0:1:0").unwrap().is_empty());
        assert!(parse_grid("2,1").is_err());
        assert!(parse_grid("1:2").is_err());
    }
}
