//! FMZ measure files.
//!
//! A measure is stored as a single JSON document
//!
//! ```json
//! {"format":"fmz1","d":1,"k":2,"cells":[[0,"2.5000000000000000e-1"]],"total":2.5e-1}
//! ```
//!
//! Cells are sorted lexicographically by coordinates and masses are printed
//! as decimal strings with 17 significant digits, so writing is byte
//! deterministic and reading loses nothing. Readers reject files whose cell
//! sum disagrees with the recorded total by more than 1e-9 relative.

use std::fmt::Write as _;
use std::path::Path;

use crate::dyadic::DyadicMeasure;
use crate::error::{Error, Result};

/// Serializes a measure to the FMZ JSON document (byte deterministic).
pub fn to_string(m: &DyadicMeasure) -> String {
    let mut out = String::new();
    write!(
        out,
        "{{\"format\":\"fmz1\",\"d\":{},\"k\":{},\"cells\":[",
        m.dim(),
        m.scale()
    )
    .unwrap();
    let mut first = true;
    for (coords, mass) in m.iter() {
        if !first {
            out.push(',');
        }
        first = false;
        out.push('[');
        for c in &coords {
            write!(out, "{c},").unwrap();
        }
        write!(out, "\"{mass:.16e}\"]").unwrap();
    }
    write!(out, "],\"total\":{:.16e}}}", m.total()).unwrap();
    out.push('\n');
    out
}

pub fn write_file(m: &DyadicMeasure, path: &Path) -> Result<()> {
    std::fs::write(path, to_string(m))?;
    Ok(())
}

/// Parses an FMZ document, validating the format tag, the cell shapes and
/// the recorded total.
pub fn from_str(text: &str) -> Result<DyadicMeasure> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::Format(format!("FMZ parse failure: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Format("FMZ document is not a JSON object".into()))?;
    if obj.get("format").and_then(|v| v.as_str()) != Some("fmz1") {
        return Err(Error::Format("missing or unknown FMZ format tag".into()));
    }
    let d = obj
        .get("d")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Format("FMZ field 'd' missing".into()))? as usize;
    let k = obj
        .get("k")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Format("FMZ field 'k' missing".into()))? as u32;
    let total = obj
        .get("total")
        .and_then(|v| v.as_f64())
        .ok_or_else(|| Error::Format("FMZ field 'total' missing".into()))?;
    let cells = obj
        .get("cells")
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::Format("FMZ field 'cells' missing".into()))?;

    let mut parsed = Vec::with_capacity(cells.len());
    let mut sum = 0.0;
    for cell in cells {
        let arr = cell
            .as_array()
            .filter(|a| a.len() == d + 1)
            .ok_or_else(|| Error::Format(format!("FMZ cell must be {} entries", d + 1)))?;
        let coords: Option<Vec<i64>> = arr[..d].iter().map(|v| v.as_i64()).collect();
        let coords =
            coords.ok_or_else(|| Error::Format("FMZ cell coordinates must be integers".into()))?;
        let mass_str = arr[d]
            .as_str()
            .ok_or_else(|| Error::Format("FMZ cell mass must be a decimal string".into()))?;
        let mass: f64 = mass_str
            .parse()
            .map_err(|_| Error::Format(format!("bad FMZ mass string {mass_str:?}")))?;
        sum += mass;
        parsed.push((coords, mass));
    }
    if (sum - total).abs() > 1e-9 * total.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Format(format!(
            "FMZ total {total} disagrees with cell sum {sum} beyond 1e-9 relative"
        )));
    }
    DyadicMeasure::from_cells(d, k, parsed)
}

pub fn read_file(path: &Path) -> Result<DyadicMeasure> {
    let text = std::fs::read_to_string(path)?;
    from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DyadicMeasure {
        DyadicMeasure::from_cells(
            2,
            3,
            vec![(vec![1, -2], 0.25), (vec![0, 5], 0.5), (vec![1, 3], 0.25)],
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact_and_sorted() {
        let m = sample();
        let text = to_string(&m);
        let back = from_str(&text).unwrap();
        assert_eq!(m, back);
        // cells appear in lexicographic coordinate order
        let cells_pos = [
            text.find("[0,5,").unwrap(),
            text.find("[1,-2,").unwrap(),
            text.find("[1,3,").unwrap(),
        ];
        assert!(cells_pos[0] < cells_pos[1] && cells_pos[1] < cells_pos[2]);
    }

    #[test]
    fn writing_is_deterministic() {
        let m = sample();
        assert_eq!(to_string(&m), to_string(&m.clone()));
    }

    #[test]
    fn mismatched_total_is_rejected() {
        let text = r#"{"format":"fmz1","d":1,"k":0,"cells":[[0,"5.0e-1"]],"total":1.0}"#;
        assert!(matches!(from_str(text), Err(Error::Format(_))));
    }

    #[test]
    fn unknown_format_tag_is_rejected() {
        let text = r#"{"format":"fmz9","d":1,"k":0,"cells":[[0,"1.0e0"]],"total":1.0}"#;
        assert!(matches!(from_str(text), Err(Error::Format(_))));
    }
}
