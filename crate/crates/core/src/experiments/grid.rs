use crate::error::{FvwError, Result};
use crate::experiments::config::linspace;

/// Largest grid accepted from text.
pub const MAX_GRID_POINTS: usize = 100_000;

/// Parse a grid given either as `start:stop:count` (inclusive, evenly spaced)
/// or as a comma-separated list of values.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let err = |reason: String| FvwError::format("grid", reason);
    let text = text.trim();
    if text.is_empty() {
        return Err(err("empty grid".into()));
    }
    let values = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(err(format!("expected start:stop:count, got {text:?}")));
        }
        let start: f64 = parts[0].parse().map_err(|_| err(format!("bad start {:?}", parts[0])))?;
        let stop: f64 = parts[1].parse().map_err(|_| err(format!("bad stop {:?}", parts[1])))?;
        let count: usize = parts[2].parse().map_err(|_| err(format!("bad count {:?}", parts[2])))?;
        if count == 0 || count > MAX_GRID_POINTS {
            return Err(err(format!("count must be in 1..={MAX_GRID_POINTS}")));
        }
        if !(start.is_finite() && stop.is_finite()) {
            return Err(err("grid bounds must be finite".into()));
        }
        if count > 1 && !(start < stop) {
            return Err(err("grid start must be below stop".into()));
        }
        linspace(start, stop, count)
    } else {
        let values = text
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| err(format!("bad value {p:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() > MAX_GRID_POINTS {
            return Err(err("too many grid points".into()));
        }
        values
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(err("grid values must be finite".into()));
    }
    if values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(err("grid values must be strictly increasing".into()));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_and_list_forms() {
        assert_eq!(parse_grid("0:0.5:3").unwrap(), vec![0.0, 0.25, 0.5]);
        assert_eq!(parse_grid(" -45 : 45 : 19 ").unwrap().len(), 19);
        assert_eq!(parse_grid("0.1, 0.2,0.33").unwrap(), vec![0.1, 0.2, 0.33]);
        assert_eq!(parse_grid("7").unwrap(), vec![7.0]);
        assert_eq!(parse_grid("2:2:1").unwrap(), vec![2.0]);
    }

    #[test]
    fn rejects_malformed_grids() {
        for bad in [
            "",
            "1:2",
            "1:2:0",
            "a,b",
            "0.3,0.1",
            "1:0:4",
            "nan",
            "0:1:1000000",
            "1,,2",
            "inf:1:2",
        ] {
            assert!(parse_grid(bad).is_err(), "{bad:?}");
        }
    }
}
