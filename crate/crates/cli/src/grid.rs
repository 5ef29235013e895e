//! Parsers for `--h-grid` and `--corr`.

use crate::CliError;

/// `start:stop:step` (inclusive of `stop` up to rounding) or a comma list.
pub fn parse_h_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Err(CliError::invalid("h-grid", "grid is empty"));
    }
    let number = |t: &str| -> Result<f64, CliError> {
        let x: f64 = t
            .trim()
            .parse()
            .map_err(|_| CliError::invalid("h-grid", format!("`{t}` is not a number")))?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(CliError::invalid("h-grid", format!("`{t}` is not finite")))
        }
    };
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(CliError::invalid(
                "h-grid",
                format!("expected start:stop:step, got `{spec}`"),
            ));
        };
        let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
        if !(step > 0.0) {
            return Err(CliError::invalid("h-grid", "step must be positive"));
        }
        if stop < start {
            return Err(CliError::invalid(
                "h-grid",
                "grid is empty: stop lies below start",
            ));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| round(start + i as f64 * step)).collect());
    }
    spec.split(',').map(number).collect()
}

/// Rounds away the accumulation error of `start + i * step`.
fn round(x: f64) -> f64 {
    let scaled = (x * 1e12).round() / 1e12;
    if scaled == 0.0 {
        0.0
    } else {
        scaled
    }
}

/// `a..b` / `a:b` (inclusive) or a comma list of positive separations.
pub fn parse_separations(spec: &str) -> Result<Vec<usize>, CliError> {
    let spec = spec.trim();
    let int = |t: &str| -> Result<usize, CliError> {
        t.trim()
            .parse()
            .map_err(|_| CliError::invalid("corr", format!("`{t}` is not a positive integer")))
    };
    let js: Vec<usize> =
        if let Some((a, b)) = spec.split_once("..").or_else(|| spec.split_once(':')) {
            (int(a)?..=int(b)?).collect()
        } else {
            spec.split(',').map(int).collect::<Result<_, _>>()?
        };
    if js.is_empty() || js.contains(&0) {
        return Err(CliError::invalid(
            "corr",
            format!("need positive separations, got `{spec}`"),
        ));
    }
    Ok(js)
}
