//! Cartesian grids over config fields.

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::harness::aggregate::{aggregate, Summary};
use crate::harness::config::RunConfig;
use crate::harness::episode::RegretReport;
use crate::harness::run_seeds;

/// A base config (as JSON) and the values each swept field takes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: Map<String, Value>,
    pub axes: Vec<(String, Vec<Value>)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub point: usize,
    /// Field values of this grid point.
    pub assignment: Map<String, Value>,
    pub config: RunConfig,
    pub summary: Summary,
    #[serde(skip)]
    pub reports: Vec<RegretReport>,
}

/// Splits on commas outside parentheses, so `scaled(constant(1),0.5),constant(0)`
/// yields two items.
pub fn split_top_level(text: &str) -> Vec<&str> {
    let mut items = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                items.push(text[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    items.push(text[start..].trim());
    items.retain(|s| !s.is_empty());
    items
}

/// Parses a command-line scalar: JSON if it is valid JSON, otherwise a string.
pub fn parse_scalar(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

/// Parses `FIELD=v1,v2,...`.
pub fn parse_axis(arg: &str) -> Result<(String, Vec<Value>)> {
    let (field, values) = arg
        .split_once('=')
        .ok_or_else(|| Error::InvalidParameter(format!("grid axis {arg:?} is not FIELD=v1,v2")))?;
    let values: Vec<Value> = split_top_level(values)
        .into_iter()
        .map(parse_scalar)
        .collect();
    if field.trim().is_empty() || values.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "grid axis {arg:?} is empty"
        )));
    }
    Ok((field.trim().to_string(), values))
}

impl SweepSpec {
    /// Reads a sweep file: RunConfig fields plus an optional `"grid"` object
    /// mapping field names to value lists.
    pub fn from_value(value: Value) -> Result<Self> {
        let Value::Object(mut base) = value else {
            return Err(Error::InvalidParameter(
                "sweep config must be a JSON object".into(),
            ));
        };
        let mut axes = Vec::new();
        match base.remove("grid") {
            None => {}
            Some(Value::Object(grid)) => {
                for (field, values) in grid {
                    let values = match values {
                        Value::Array(list) if !list.is_empty() => list,
                        Value::Array(_) => {
                            return Err(Error::InvalidParameter(format!(
                                "grid field {field} is empty"
                            )))
                        }
                        single => vec![single],
                    };
                    axes.push((field, values));
                }
            }
            Some(_) => return Err(Error::InvalidParameter("grid must be an object".into())),
        }
        Ok(Self { base, axes })
    }

    /// Adds or replaces an axis.
    pub fn set_axis(&mut self, field: String, values: Vec<Value>) {
        match self.axes.iter_mut().find(|(f, _)| *f == field) {
            Some(axis) => axis.1 = values,
            None => self.axes.push((field, values)),
        }
    }

    /// Grid assignments in row-major order (last axis varies fastest).
    pub fn assignments(&self) -> Vec<Map<String, Value>> {
        let mut out = vec![Map::new()];
        for (field, values) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|partial| {
                    values.iter().map(move |v| {
                        let mut next = partial.clone();
                        next.insert(field.clone(), v.clone());
                        next
                    })
                })
                .collect();
        }
        out
    }

    /// Validated configs for every grid point.
    pub fn configs(&self) -> Result<Vec<(Map<String, Value>, RunConfig)>> {
        self.assignments()
            .into_iter()
            .map(|assignment| {
                let mut merged = self.base.clone();
                merged.extend(assignment.clone());
                let config = RunConfig::from_value(Value::Object(merged))?;
                Ok((assignment, config))
            })
            .collect()
    }
}

/// Runs every grid point. All configs are validated before any run starts.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepPoint>> {
    let configs = spec.configs()?;
    configs
        .into_iter()
        .enumerate()
        .map(|(point, (assignment, config))| {
            let reports = run_seeds(&config)?;
            let summary = aggregate(&reports, config.delta)?;
            Ok(SweepPoint {
                point,
                assignment,
                config,
                summary,
                reports,
            })
        })
        .collect()
}
