//! Run directory writer: data files with fixed float formatting plus a
//! manifest listing every file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// Shortest representation that round-trips the value rounded to 12
/// significant digits.
pub fn fmt_float(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let r = round12(x);
    if r == 0.0 {
        return "0".into();
    }
    let a = r.abs();
    if (1e-4..1e15).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    let r: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    // Avoid emitting -0.
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if !n.is_i64() && !n.is_u64() => {
            if let Some(f) = n.as_f64() {
                if let Some(m) = serde_json::Number::from_f64(round12(f)) {
                    *n = m;
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    parameters: &'a BTreeMap<String, Value>,
    outputs: Vec<String>,
    toolkit_version: &'static str,
    timestamp: String,
}

pub struct RunDir {
    dir: PathBuf,
    command: String,
    parameters: BTreeMap<String, Value>,
    outputs: Vec<String>,
}

impl RunDir {
    pub fn create(dir: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), command: command.into(), parameters: BTreeMap::new(), outputs: Vec::new() })
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        let mut v = serde_json::to_value(value)?;
        round_value(&mut v);
        self.parameters.insert(key.into(), v);
        Ok(())
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        self.outputs.push(name.into());
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut v = serde_json::to_value(value)?;
        round_value(&mut v);
        let text = serde_json::to_string_pretty(&v)? + "\n";
        self.write(name, &text)
    }

    /// Rows of floats under a header.
    pub fn csv(&mut self, name: &str, header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
        let mut text = header.join(",") + "\n";
        for row in rows {
            text += &row.iter().map(|x| fmt_float(*x)).collect::<Vec<_>>().join(",");
            text.push('\n');
        }
        self.write(name, &text)
    }

    /// Rows with a leading text column.
    pub fn labeled_csv(&mut self, name: &str, header: &[String], rows: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<()> {
        let mut text = header.join(",") + "\n";
        for (label, row) in rows {
            text += &label;
            for x in row {
                text.push(',');
                text += &fmt_float(x);
            }
            text.push('\n');
        }
        self.write(name, &text)
    }

    pub fn finish(self) -> Result<PathBuf> {
        let manifest = RunManifest {
            command: &self.command,
            parameters: &self.parameters,
            outputs: self.outputs.iter().map(|o| self.dir.join(o).display().to_string()).collect(),
            toolkit_version: env!("CARGO_PKG_VERSION"),
            timestamp: chrono::Utc::now().to_rfc3339(),
        };
        let path = self.dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(self.dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting() {
        assert_eq!(fmt_float(0.1 + 0.2), "0.3");
        assert_eq!(fmt_float(-std::f64::consts::PI), "-3.14159265359");
        assert_eq!(fmt_float(2.5e-5), "2.5e-5");
        assert_eq!(fmt_float(1.0), "1");
        assert_eq!(fmt_float(-1e-20), "-1e-20");
        assert_eq!(fmt_float(0.0), "0");
        assert_eq!(fmt_float(f64::NAN), "NaN");
    }

    #[test]
    fn json_numbers_are_rounded() {
        let mut v = serde_json::json!({"a": [1.0000000000001, 3], "b": {"c": 0.30000000000000004}});
        round_value(&mut v);
        assert_eq!(v.to_string(), r#"{"a":[1.0,3],"b":{"c":0.3}}"#);
    }
}
