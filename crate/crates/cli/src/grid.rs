//! Parsing of `a:b:n[:log]` grid specifications.

use crate::error::{CliError, CliResult};

fn number(text: &str, what: &str, spec: &str) -> CliResult<f64> {
    let v: f64 = text.trim().parse().map_err(|_| CliError::Config(format!("bad {what} `{text}` in grid `{spec}`")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("non-finite {what} in grid `{spec}`")))
    }
}

/// `n` points from `a` to `b` inclusive, evenly spaced or (with `log`) geometrically spaced.
pub fn parse_grid(spec: &str, allow_log: bool) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let log = match parts.len() {
        3 => false,
        4 if allow_log && parts[3] == "log" => true,
        _ => {
            let form = if allow_log { "a:b:n[:log]" } else { "a:b:n" };
            return Err(CliError::Config(format!("grid `{spec}` is not of the form {form}")));
        }
    };
    let (a, b) = (number(parts[0], "start", spec)?, number(parts[1], "end", spec)?);
    let n: usize = parts[2].trim().parse().map_err(|_| CliError::Config(format!("bad count `{}` in grid `{spec}`", parts[2])))?;
    if n == 0 {
        return Err(CliError::Config(format!("grid `{spec}` is empty")));
    }
    if n > 1 && b < a {
        return Err(CliError::Config(format!("grid `{spec}` runs backwards")));
    }
    if log && !(a > 0.0) {
        return Err(CliError::Config(format!("logarithmic grid `{spec}` needs a positive start")));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    let last = (n - 1) as f64;
    Ok((0..n)
        .map(|k| {
            let s = k as f64 / last;
            match (k, log) {
                (0, _) => a,
                (k, _) if k == n - 1 => b,
                (_, true) => a * (b / a).powf(s),
                (_, false) => a + (b - a) * s,
            }
        })
        .collect())
}

/// Comma-separated list of numbers.
pub fn parse_list(spec: &str) -> CliResult<Vec<f64>> {
    spec.split(',').map(|p| number(p, "value", spec)).collect()
}
