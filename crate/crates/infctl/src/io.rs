//! File formats: CSV tables with 17-significant-digit floats and flat
//! `key = value` metadata sidecars.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context};
use infctl_core::{BoundaryTable, ModelParams};

/// Scientific notation with 17 significant digits; parses back bit-exactly.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// A metadata value: numbers are written verbatim, text is quoted.
#[derive(Debug, Clone, PartialEq)]
pub enum Meta {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Meta {
    fn render(&self) -> String {
        match self {
            // `{:?}` is the shortest round-trip form and always TOML-valid
            // for finite values.
            Meta::Float(v) if v.is_finite() => format!("{v:?}"),
            Meta::Float(v) => format!("{:?}", v.to_string()),
            Meta::Int(v) => v.to_string(),
            Meta::Text(s) => format!("{s:?}"),
        }
    }
}

pub fn write_meta(path: &Path, entries: &[(&str, Meta)]) -> anyhow::Result<()> {
    let mut out = String::new();
    for (k, v) in entries {
        writeln!(out, "{k} = {}", v.render())?;
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn read_meta(path: &Path) -> anyhow::Result<BTreeMap<String, toml::Value>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut flat = BTreeMap::new();
    flatten("", &toml::Value::Table(table), &mut flat);
    Ok(flat)
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut BTreeMap<String, toml::Value>) {
    match v {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.clone());
        }
    }
}

/// Writes `rows` under `header`, formatting every float with [`fmt17`].
pub fn write_float_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.into_iter().map(fmt17))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_boundary(csv_path: &Path, meta_path: &Path, table: &BoundaryTable) -> anyhow::Result<()> {
    write_float_csv(
        csv_path,
        &["i", "b"],
        table.grid().iter().zip(table.values()).map(|(&i, &b)| vec![i, b]),
    )?;
    let p = table.params();
    write_meta(
        meta_path,
        &[
            ("mu", Meta::Float(p.mu)),
            ("eta", Meta::Float(p.eta)),
            ("rho", Meta::Float(p.rho)),
            ("q", Meta::Float(p.q)),
            ("step", Meta::Float(table.step())),
            ("i_max", Meta::Float(table.i_max())),
            ("nodes", Meta::Int(table.grid().len() as i64)),
            ("b_circ", Meta::Float(table.b_circ())),
            ("i_star", Meta::Float(table.i_star())),
            ("params_hash", Meta::Text(format!("{:016x}", table.params_hash()))),
        ],
    )
}

/// Reads a boundary written by [`write_boundary`]; the table invariants and
/// `i*` are re-derived and checked.
pub fn read_boundary(csv_path: &Path, meta_path: &Path) -> anyhow::Result<BoundaryTable> {
    let meta = read_meta(meta_path)?;
    let num = |k: &str| -> anyhow::Result<f64> {
        match meta.get(k) {
            Some(toml::Value::Float(v)) => Ok(*v),
            Some(toml::Value::Integer(v)) => Ok(*v as f64),
            _ => bail!("metadata key {k:?} missing or not a number"),
        }
    };
    let params = ModelParams::new(num("mu")?, num("eta")?, num("rho")?, num("q")?)?;
    let mut r = csv::Reader::from_path(csv_path).with_context(|| format!("reading {}", csv_path.display()))?;
    if r.headers()?.iter().collect::<Vec<_>>() != ["i", "b"] {
        bail!("boundary CSV must have header i,b");
    }
    let (mut grid, mut values) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        grid.push(rec[0].parse::<f64>()?);
        values.push(rec[1].parse::<f64>()?);
    }
    Ok(BoundaryTable::from_parts(params, grid, values, num("step")?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use infctl_core::solve_boundary;

    #[test]
    fn fmt17_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-300, -7.25e12, std::f64::consts::PI] {
            assert_eq!(fmt17(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn boundary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = ModelParams::new(1.0, 1.0, 1.0, 0.5).unwrap();
        let t = solve_boundary(&p, 3.8, 1e-2).unwrap();
        let (c, m) = (dir.path().join("b.csv"), dir.path().join("b.meta"));
        write_boundary(&c, &m, &t).unwrap();
        let back = read_boundary(&c, &m).unwrap();
        assert_eq!(back.grid(), t.grid());
        assert_eq!(back.values(), t.values());
        assert_eq!(back.i_star(), t.i_star());
        assert_eq!(back.params_hash(), t.params_hash());
    }
}
