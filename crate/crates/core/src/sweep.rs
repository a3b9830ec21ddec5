//! Parameter sweeps: sweep-spec parsing, dotted-path parameter injection into
//! a model spec, a worker pool that preserves input order, and byte-stable
//! CSV output with a metadata header.

use std::io::Write;

use rayon::prelude::*;
use serde_json::Value;

use crate::correlator::CorrelatorResult;
use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Environment variable controlling the sweep worker count.
pub const WORKERS_ENV: &str = "QCORR_WORKERS";

/// A linear sweep `param:start:stop:count` over one scalar model parameter.
///
/// `param` is a dotted path into the model description, e.g.
/// `drives.0.frequency`, `sites.1.frequency`, `couplings.0.amplitude.0`
/// (real part), or `options.epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: String,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::SweepSpec(msg);
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 4 {
            return Err(bad(format!(
                "expected `param:start:stop:count`, got `{text}` ({} fields)",
                parts.len()
            )));
        }
        let param = parts[0].trim();
        if param.is_empty() {
            return Err(bad("parameter path is empty".into()));
        }
        let num = |field: &str, what: &str| -> Result<f64> {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| bad(format!("{what} `{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(bad(format!("{what} must be finite, got {v}")));
            }
            Ok(v)
        };
        let start = num(parts[1], "start")?;
        let stop = num(parts[2], "stop")?;
        let count: usize = parts[3]
            .trim()
            .parse()
            .map_err(|_| bad(format!("count `{}` is not a positive integer", parts[3])))?;
        if count == 0 {
            return Err(bad("count must be at least 1".into()));
        }
        if start > stop {
            return Err(bad(format!("start {start} exceeds stop {stop}")));
        }
        if count == 1 && start != stop {
            return Err(bad("a single-point sweep requires start == stop".into()));
        }
        Ok(SweepSpec {
            param: param.to_string(),
            start,
            stop,
            count,
        })
    }

    /// The sample points, inclusive of both ends.
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| self.start + step * i as f64)
            .collect()
    }

    /// Whether the swept path only touches drive tones, leaving the
    /// Hamiltonian and channels (and therefore cached factorizations that
    /// don't involve the drive frequency) intact.
    pub fn drive_only(&self) -> bool {
        self.param.starts_with("drives.")
    }
}

/// Return a copy of `spec` with the scalar at the dotted `path` set to
/// `value`. Paths address spec fields by name and list entries by index;
/// complex numbers are two-element arrays, so `....amplitude.0` is the real
/// part. A `*` segment fans out over every entry of a list, so
/// `drives.*.frequency` moves all tones of a multi-tone drive in lockstep.
/// The addressed location must hold a number (or `null`, for optional
/// settings like `options.epsilon`).
pub fn apply_param(spec: &ModelSpec, path: &str, value: f64) -> Result<ModelSpec> {
    let bad = |msg: String| Error::SweepSpec(msg);
    let mut root: Value =
        serde_json::to_value(spec).map_err(|e| bad(format!("model serialization: {e}")))?;
    let segments: Vec<&str> = path.split('.').collect();
    assign(&mut root, &segments, value, path)?;
    serde_json::from_value(root).map_err(|e| bad(format!("`{path}` = {value}: {e}")))
}

fn assign(cursor: &mut Value, segments: &[&str], value: f64, path: &str) -> Result<()> {
    let bad = |msg: String| Error::SweepSpec(msg);
    let Some((&segment, rest)) = segments.split_first() else {
        return match cursor {
            Value::Number(_) | Value::Null => {
                *cursor = serde_json::json!(value);
                Ok(())
            }
            other => Err(bad(format!(
                "`{path}` addresses a {}, not a number",
                match other {
                    Value::String(_) => "string",
                    Value::Array(_) => "list",
                    Value::Object(_) => "structure",
                    Value::Bool(_) => "flag",
                    _ => "value",
                }
            ))),
        };
    };
    match cursor {
        Value::Object(map) => {
            let next = map
                .get_mut(segment)
                .ok_or_else(|| bad(format!("`{path}`: no field `{segment}`")))?;
            assign(next, rest, value, path)
        }
        Value::Array(items) => {
            if segment == "*" {
                if items.is_empty() {
                    return Err(bad(format!("`{path}`: `*` over an empty list")));
                }
                for item in items.iter_mut() {
                    assign(item, rest, value, path)?;
                }
                Ok(())
            } else {
                let idx: usize = segment
                    .parse()
                    .map_err(|_| bad(format!("`{path}`: `{segment}` is not a list index")))?;
                let len = items.len();
                let next = items.get_mut(idx).ok_or_else(|| {
                    bad(format!("`{path}`: index {idx} out of range (length {len})"))
                })?;
                assign(next, rest, value, path)
            }
        }
        _ => Err(bad(format!("`{path}`: `{segment}` descends into a scalar"))),
    }
}

/// Worker count from the environment, if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .filter(|&n| n > 0)
}

/// Evaluate `f` over the sweep points on a worker pool, returning results in
/// input order. `workers` limits the pool size (library default otherwise);
/// the first failing point aborts the sweep.
pub fn run_sweep<T, F>(points: &[f64], workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(f64) -> Result<T> + Sync,
{
    let evaluate = || points.par_iter().map(|&v| f(v)).collect::<Result<Vec<T>>>();
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?
            .install(evaluate),
        None => evaluate(),
    }
}

/// Fixed-precision float formatting shared by all CSV output, so files are
/// byte-stable across runs and platforms.
pub fn format_float(x: f64) -> String {
    format!("{x:.12e}")
}

/// One output row: the sweep parameter followed by the computed observables,
/// with a flag marking rows where any defining ratio degenerated to 0/0
/// (those observables render as `NaN`).
#[derive(Debug, Clone)]
pub struct CsvRow {
    pub values: Vec<f64>,
    pub undefined: bool,
}

impl CsvRow {
    /// Assemble a row from a parameter value and correlator results, OR-ing
    /// their undefined flags.
    pub fn from_results(param: f64, results: &[CorrelatorResult]) -> Self {
        let mut values = Vec::with_capacity(results.len() + 1);
        values.push(param);
        values.extend(results.iter().map(|r| r.value));
        CsvRow {
            values,
            undefined: results.iter().any(|r| r.undefined),
        }
    }
}

/// Write sweep results as CSV: `# key: value` metadata lines, a header row
/// naming the columns plus a trailing `undefined` flag column, then one row
/// per point.
pub fn write_csv<W: Write>(
    out: &mut W,
    metadata: &[(String, String)],
    columns: &[String],
    rows: &[CsvRow],
) -> Result<()> {
    for (key, value) in metadata {
        writeln!(out, "# {key}: {value}")?;
    }
    writeln!(out, "{},undefined", columns.join(","))?;
    for row in rows {
        if row.values.len() != columns.len() {
            return Err(Error::InvalidArgument(format!(
                "CSV row has {} values for {} columns",
                row.values.len(),
                columns.len()
            )));
        }
        let cells: Vec<String> = row.values.iter().map(|&v| format_float(v)).collect();
        writeln!(out, "{},{}", cells.join(","), u8::from(row.undefined))?;
    }
    Ok(())
}
