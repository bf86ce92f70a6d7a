//! Reading lifetime samples from files, stdin or the bundled data sets.

use std::io::Read;

use ewlkit::datasets::{self, Dataset};

use crate::CliError;

/// Loads `spec`: `builtin:<name>`, `-` for stdin, or a file path.
pub fn load(spec: &str, column: Option<&str>) -> Result<Dataset, CliError> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        return datasets::builtin(name)
            .ok_or_else(|| CliError::Input(format!("unknown builtin data set '{name}' (try fatigue, carbon-fiber)")));
    }
    let text = if spec == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| CliError::Input(format!("cannot read stdin: {e}")))?;
        s
    } else {
        std::fs::read_to_string(spec).map_err(|e| CliError::Input(format!("cannot read {spec}: {e}")))?
    };
    let values = parse_table(&text, column).map_err(|m| CliError::Input(format!("{spec}: {m}")))?;
    let name = std::path::Path::new(spec)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| spec.to_string());
    Dataset::new(name, values, spec).map_err(|e| CliError::Input(e.to_string()))
}

/// Rows as (1-based line number, fields).
type Rows = Vec<(u64, Vec<String>)>;

fn csv_rows(text: &str) -> Result<Rows, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| match e.position() {
            Some(p) => format!("line {}: {e}", p.line()),
            None => e.to_string(),
        })?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(rows)
}

fn whitespace_rows(text: &str) -> Rows {
    text.lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let body = line.split('#').next().unwrap_or("");
            let fields: Vec<String> = body.split_whitespace().map(str::to_string).collect();
            (!fields.is_empty()).then_some((i as u64 + 1, fields))
        })
        .collect()
}

/// One-column text or delimited data with an optional header row.
pub fn parse_table(text: &str, column: Option<&str>) -> Result<Vec<f64>, String> {
    let mut rows = if text.contains(',') {
        csv_rows(text)?
    } else {
        whitespace_rows(text)
    };
    if rows.is_empty() {
        return Err("no data".into());
    }
    let header = if rows[0].1.iter().any(|f| f.parse::<f64>().is_err()) {
        Some(rows.remove(0).1)
    } else {
        None
    };
    let width = header.as_ref().map_or(rows.first().map_or(0, |r| r.1.len()), Vec::len);
    let col = match column {
        Some(c) => {
            let by_name = header
                .as_ref()
                .and_then(|h| h.iter().position(|name| name.eq_ignore_ascii_case(c.trim())));
            match by_name {
                Some(i) => i,
                None => match c.trim().parse::<usize>() {
                    Ok(i) if i >= 1 => i - 1,
                    _ => return Err(format!("no column named '{c}'")),
                },
            }
        }
        None if width == 1 => 0,
        None => return Err(format!("{width} columns found; pick one with --column")),
    };
    let mut values = Vec::with_capacity(rows.len());
    for (line, fields) in rows {
        let tok = fields
            .get(col)
            .ok_or_else(|| format!("line {line}: missing column {}", col + 1))?;
        let v: f64 = tok
            .parse()
            .map_err(|_| format!("line {line}: '{tok}' is not a number"))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(format!("line {line}: observations must be positive and finite, got {tok}"));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err("no data rows".into());
    }
    Ok(values)
}
