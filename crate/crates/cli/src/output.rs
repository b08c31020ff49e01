//! CSV and JSON writers. Floats carry 17 significant digits.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::Value;

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON number, or `null` for non-finite values.
pub fn json_float(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn json_matrix(rows: Vec<Vec<f64>>) -> Value {
    Value::Array(
        rows.into_iter()
            .map(|r| Value::Array(r.into_iter().map(json_float).collect()))
            .collect(),
    )
}

/// Writes through a buffered file, creating the directory first.
pub fn write_file(dir: &Path, name: &str, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut w = BufWriter::new(fs::File::create(&path)?);
    body(&mut w)?;
    w.flush()?;
    Ok(path)
}

pub fn write_json(dir: &Path, name: &str, value: &Value) -> io::Result<PathBuf> {
    write_file(dir, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

/// `t,s,value` rows, `t` outer.
pub fn write_grid_csv(w: &mut dyn Write, ts: &[f64], ss: &[f64], values: &[Vec<f64>]) -> io::Result<()> {
    writeln!(w, "t,s,value")?;
    for (i, &t) in ts.iter().enumerate() {
        for (j, &s) in ss.iter().enumerate() {
            writeln!(w, "{},{},{}", float(t), float(s), float(values[i][j]))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23] {
            let s = float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            assert_eq!(s.split('e').next().unwrap().trim_start_matches('-').len(), 18);
        }
    }

    #[test]
    fn non_finite_json_is_null() {
        assert_eq!(json_float(f64::NAN), Value::Null);
        assert_eq!(json_float(1.5), serde_json::json!(1.5));
    }
}
