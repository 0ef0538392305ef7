//! CSV tables of node values with a JSON sidecar describing the grid.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::{Extent, Grid2D, NodeKind, Shape};
use super::values::{Field, Masked, ScalarField};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub description: String,
    pub extent: Extent,
    pub shape: Shape,
    pub nx: usize,
    pub ny: usize,
    pub mask_rle: Vec<(NodeKind, usize)>,
    pub columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

impl GridHeader {
    pub fn for_grid(grid: &Grid2D, description: &str, columns: Vec<String>) -> Self {
        Self {
            description: description.to_string(),
            extent: grid.extent(),
            shape: grid.shape(),
            nx: grid.nx(),
            ny: grid.ny(),
            mask_rle: grid.mask_rle(),
            columns,
            p: None,
        }
    }

    /// Rebuild the grid and confirm the stored mask matches.
    pub fn grid(&self) -> Result<Grid2D> {
        let grid = Grid2D::new(self.extent, self.shape, self.nx, self.ny)?;
        if grid.mask_rle() != self.mask_rle {
            return Err(Error::Format("mask does not match the stored shape".into()));
        }
        Ok(grid)
    }
}

/// Columns of optional values over the masked-in nodes of one grid.
#[derive(Clone, Debug)]
pub struct FieldTable {
    pub grid: Arc<Grid2D>,
    pub columns: Vec<(String, Vec<Option<f64>>)>,
}

/// Shortest round-trip text for a float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

impl FieldTable {
    pub fn new(grid: &Arc<Grid2D>) -> Self {
        Self { grid: Arc::clone(grid), columns: Vec::new() }
    }

    pub fn with_scalar(mut self, name: &str, f: &ScalarField) -> Self {
        self.columns.push((name.into(), f.values().iter().map(|&v| Some(v)).collect()));
        self
    }

    pub fn with_masked(mut self, name: &str, f: &Masked<f64>) -> Self {
        self.columns.push((name.into(), f.values().to_vec()));
        self
    }

    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Column as a full field; undefined entries at masked-in nodes are an error.
    pub fn scalar(&self, name: &str) -> Result<ScalarField> {
        let col = self.column(name).ok_or_else(|| Error::Format(format!("missing column {name}")))?;
        let mut values = Vec::with_capacity(col.len());
        for (k, v) in col.iter().enumerate() {
            match (v, self.grid.is_in(k)) {
                (Some(v), _) => values.push(*v),
                (None, false) => values.push(0.0),
                (None, true) => return Err(Error::Format(format!("column {name} has gaps"))),
            }
        }
        Field::from_values(&self.grid, values)
    }

    /// Writes `<stem>.csv` and `<stem>.json`. The CSV opens with a `#` line
    /// carrying `description`.
    pub fn write(&self, dir: &Path, stem: &str, description: &str, p: Option<f64>) -> Result<()> {
        fs::create_dir_all(dir)?;
        let names: Vec<String> = self.columns.iter().map(|(n, _)| n.clone()).collect();
        let mut header = GridHeader::for_grid(&self.grid, description, names.clone());
        header.p = p;
        fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&header)? + "\n")?;

        let mut out = Vec::new();
        writeln!(out, "# {description}")?;
        {
            let mut w = csv::Writer::from_writer(&mut out);
            let mut row = vec!["x".to_string(), "y".to_string()];
            row.extend(names);
            w.write_record(&row)?;
            for k in 0..self.grid.len() {
                if !self.grid.is_in(k) {
                    continue;
                }
                let (x, y) = self.grid.xy(k);
                let mut row = vec![fmt_f64(x), fmt_f64(y)];
                row.extend(self.columns.iter().map(|(_, c)| c[k].map(fmt_f64).unwrap_or_default()));
                w.write_record(&row)?;
            }
            w.flush()?;
        }
        fs::write(dir.join(format!("{stem}.csv")), out)?;
        Ok(())
    }

    pub fn read(dir: &Path, stem: &str) -> Result<(Self, GridHeader)> {
        let header: GridHeader = serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
        let grid = Arc::new(header.grid()?);
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(dir.join(format!("{stem}.csv")))?;
        let heads: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        if heads.len() != header.columns.len() + 2 || heads[2..] != header.columns[..] {
            return Err(Error::Format("CSV columns disagree with header".into()));
        }
        let mut columns: Vec<(String, Vec<Option<f64>>)> =
            header.columns.iter().map(|n| (n.clone(), vec![None; grid.len()])).collect();
        let mut nodes = (0..grid.len()).filter(|&k| grid.is_in(k));
        for record in reader.records() {
            let record = record?;
            let k = nodes.next().ok_or_else(|| Error::Format("more rows than masked-in nodes".into()))?;
            for (c, cell) in record.iter().skip(2).enumerate() {
                if !cell.is_empty() {
                    let v: f64 = cell.parse().map_err(|_| Error::Format(format!("bad number {cell:?}")))?;
                    columns[c].1[k] = Some(v);
                }
            }
        }
        if nodes.next().is_some() {
            return Err(Error::Format("fewer rows than masked-in nodes".into()));
        }
        Ok((Self { grid, columns }, header))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let shape = Shape::Annulus { center: [0.0, 0.0], r_inner: 0.4, r_outer: 1.0 };
        let grid = Arc::new(Grid2D::new(Extent::square(-1.0, 1.0), shape, 21, 21).unwrap());
        let u = ScalarField::from_fn(&grid, |x, y| (x * 3.1).sin() / (1.0 + y * y) + 1e-17);
        let gaps = u.map(|k, v| (k % 3 != 0).then_some(*v));
        let dir = tempfile::tempdir().unwrap();
        FieldTable::new(&grid)
            .with_scalar("u", &u)
            .with_masked("v", &gaps)
            .write(dir.path(), "t", "test", Some(2.5))
            .unwrap();
        let (back, header) = FieldTable::read(dir.path(), "t").unwrap();
        assert_eq!(header.p, Some(2.5));
        let u2 = back.scalar("u").unwrap();
        for k in 0..grid.len() {
            if grid.is_in(k) {
                assert_eq!(u.at(k).to_bits(), u2.at(k).to_bits());
                assert_eq!(back.column("v").unwrap()[k], *gaps.at(k));
            }
        }
        assert!(back.scalar("v").is_err());
    }
}
