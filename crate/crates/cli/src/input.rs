//! Readers for the numeric CSV inputs.

use std::path::Path;

use mta_core::ddc::TransitionMatrix;
use mta_core::montecarlo::{PanelData, PanelRecord};
use mta_core::{CcpVector, MtaError};

use crate::error::CliError;

/// Header and numeric rows of a CSV file; `#` lines are skipped. Rows that fail to
/// parse are collected with their line numbers.
fn read_numeric(path: &Path) -> Result<(Vec<String>, Vec<(u64, Vec<f64>)>), CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::input("io", format!("cannot open {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(MtaError::from)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    let mut bad = Vec::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                bad.push((line, e.to_string()));
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        let parsed: Result<Vec<f64>, String> = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| format!("non-numeric field {f:?}"))
            })
            .collect();
        match parsed {
            Ok(values) => rows.push((line, values)),
            Err(reason) => bad.push((line, reason)),
        }
    }
    if !bad.is_empty() {
        return Err(MtaError::MalformedRows(bad).into());
    }
    if rows.is_empty() {
        return Err(MtaError::Empty(format!("{} has no data rows", path.display())).into());
    }
    Ok((header, rows))
}

fn require_columns(path: &Path, header: &[String], expected: &[&str]) -> Result<(), CliError> {
    if header.len() != expected.len() || header.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(CliError::input(
            "missing_columns",
            format!("{}: expected columns {}", path.display(), expected.join(",")),
        ));
    }
    Ok(())
}

fn as_index(line: u64, value: f64, what: &str) -> Result<usize, (u64, String)> {
    if value >= 0.0 && value.fract() == 0.0 && value < u32::MAX as f64 {
        Ok(value as usize)
    } else {
        Err((line, format!("{what} must be a nonnegative integer, got {value}")))
    }
}

/// One probability vector per row.
pub fn read_probabilities(path: &Path) -> Result<Vec<CcpVector>, CliError> {
    let (_, rows) = read_numeric(path)?;
    let mut out = Vec::with_capacity(rows.len());
    let mut bad = Vec::new();
    for (line, values) in rows {
        match CcpVector::new(values) {
            Ok(p) => out.push(p),
            Err(e) => bad.push((line, e.to_string())),
        }
    }
    if !bad.is_empty() {
        return Err(MtaError::MalformedRows(bad).into());
    }
    Ok(out)
}

/// CCPs by state from `x,p_0,..`; states without a row are unobserved.
pub fn read_ccps(path: &Path, n_states: Option<usize>) -> Result<Vec<Option<CcpVector>>, CliError> {
    let (header, rows) = read_numeric(path)?;
    if header.first().map(String::as_str) != Some("x") || header.len() < 2 {
        return Err(CliError::input(
            "missing_columns",
            format!("{}: expected columns x,p_0,..", path.display()),
        ));
    }
    let mut parsed = Vec::new();
    let mut bad = Vec::new();
    for (line, values) in rows {
        match as_index(line, values[0], "x") {
            Ok(x) => match CcpVector::new(values[1..].to_vec()) {
                Ok(p) => parsed.push((line, x, p)),
                Err(e) => bad.push((line, e.to_string())),
            },
            Err(b) => bad.push(b),
        }
    }
    let nx = n_states.unwrap_or_else(|| parsed.iter().map(|(_, x, _)| x + 1).max().unwrap_or(0));
    let mut out: Vec<Option<CcpVector>> = vec![None; nx];
    for (line, x, p) in parsed {
        if x >= nx {
            bad.push((line, format!("state {x} out of range")));
        } else if out[x].is_some() {
            bad.push((line, format!("duplicate state {x}")));
        } else {
            out[x] = Some(p);
        }
    }
    if !bad.is_empty() {
        return Err(MtaError::MalformedRows(bad).into());
    }
    Ok(out)
}

/// Per-action kernels from `y,x,next,prob`; unlisted entries are zero.
pub fn read_transitions(path: &Path, n_states: usize, n_actions: usize) -> Result<Vec<TransitionMatrix>, CliError> {
    let (header, rows) = read_numeric(path)?;
    require_columns(path, &header, &["y", "x", "next", "prob"])?;
    let mut data = vec![vec![0.0; n_states * n_states]; n_actions];
    let mut bad = Vec::new();
    for (line, v) in rows {
        let idx = (|| {
            let y = as_index(line, v[0], "y")?;
            let x = as_index(line, v[1], "x")?;
            let next = as_index(line, v[2], "next")?;
            if y >= n_actions || x >= n_states || next >= n_states {
                return Err((line, "index out of range".to_string()));
            }
            Ok((y, x, next))
        })();
        match idx {
            Ok((y, x, next)) => data[y][x * n_states + next] += v[3],
            Err(b) => bad.push(b),
        }
    }
    if !bad.is_empty() {
        return Err(MtaError::MalformedRows(bad).into());
    }
    Ok(data
        .into_iter()
        .map(|d| TransitionMatrix::new(n_states, d))
        .collect::<Result<_, _>>()?)
}

/// Panel from `agent,period,state,action`.
pub fn read_panel(path: &Path) -> Result<PanelData, CliError> {
    let (header, rows) = read_numeric(path)?;
    require_columns(path, &header, &["agent", "period", "state", "action"])?;
    let mut records = Vec::with_capacity(rows.len());
    let mut bad = Vec::new();
    for (line, v) in rows {
        let rec = (|| {
            Ok(PanelRecord {
                agent: as_index(line, v[0], "agent")?,
                period: as_index(line, v[1], "period")?,
                state: as_index(line, v[2], "state")?,
                action: as_index(line, v[3], "action")?,
            })
        })();
        match rec {
            Ok(r) => records.push(r),
            Err(b) => bad.push(b),
        }
    }
    if !bad.is_empty() {
        return Err(MtaError::MalformedRows(bad).into());
    }
    Ok(PanelData::new(records))
}
