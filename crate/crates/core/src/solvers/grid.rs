//! Dense space-time solution grids and their file formats.
//!
//! # Binary container
//!
//! ```text
//! magic     8 bytes  "PINNGRID"
//! hdr_len   u64 LE   length of the JSON header in bytes
//! header    hdr_len  UTF-8 JSON (see `GridHeader`)
//! fields    f64 LE   one array per field, in header order
//! ```
//!
//! Every field array is row-major over `(t, y, x)` (or `(t, x)` for one
//! space dimension): the x index varies fastest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SolverError;
use crate::pde::PdeKind;

pub const GRID_MAGIC: &[u8; 8] = b"PINNGRID";
pub const STORAGE_ORDER: &str = "row-major (t, y, x), x fastest";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    /// `n` uniformly spaced values from `lo` to `hi` inclusive.
    pub fn linspace(name: &str, lo: f64, hi: f64, n: usize) -> Self {
        let values = match n {
            0 => vec![],
            1 => vec![lo],
            _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        };
        Axis { name: name.to_string(), values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub name: String,
    pub data: Vec<f64>,
}

/// A dense reference solution.
///
/// `axes` are listed in network input order: `x, [y,] t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionGrid {
    pub pde: PdeKind,
    pub axes: Vec<Axis>,
    pub fields: Vec<Field>,
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GridHeader {
    format_version: u32,
    pde: PdeKind,
    storage_order: String,
    axes: Vec<Axis>,
    fields: Vec<String>,
    params: BTreeMap<String, f64>,
}

impl SolutionGrid {
    pub fn new(pde: PdeKind, axes: Vec<Axis>, fields: Vec<Field>, params: BTreeMap<String, f64>) -> Result<Self, SolverError> {
        let grid = SolutionGrid { pde, axes, fields, params };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.n_points();
        for axis in &self.axes {
            if axis.values.windows(2).any(|w| w[1] <= w[0]) {
                return Err(SolverError::Grid(format!("axis {} is not strictly increasing", axis.name)));
            }
        }
        for f in &self.fields {
            if f.data.len() != n {
                return Err(SolverError::Grid(format!(
                    "field {} has {} values, grid has {n} points",
                    f.name,
                    f.data.len()
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Axis::len).collect()
    }

    pub fn n_points(&self) -> usize {
        self.axes.iter().map(Axis::len).product()
    }

    /// Flat storage index of per-axis indices given in axis order `x, [y,] t`.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        // storage is t-major; x is fastest
        let mut flat = 0;
        for a in (0..self.axes.len()).rev() {
            flat = flat * self.axes[a].len() + idx[a];
        }
        flat
    }

    /// Per-axis indices for a flat storage index.
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (a, axis) in self.axes.iter().enumerate() {
            idx[a] = flat % axis.len();
            flat /= axis.len();
        }
        idx
    }

    /// Coordinates `x, [y,] t` of a flat storage index.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat)
            .into_iter()
            .zip(&self.axes)
            .map(|(i, a)| a.values[i])
            .collect()
    }

    pub fn field(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// Labels for a flat index, one per field.
    pub fn labels(&self, flat: usize) -> Vec<f64> {
        self.fields.iter().map(|f| f.data[flat]).collect()
    }

    /// All points, point-major.
    pub fn all_points(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_points() * self.dim());
        for i in 0..self.n_points() {
            out.extend(self.point(i));
        }
        out
    }

    /// All labels, point-major.
    pub fn all_labels(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_points() * self.fields.len());
        for i in 0..self.n_points() {
            out.extend(self.fields.iter().map(|f| f.data[i]));
        }
        out
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), SolverError> {
        let header = GridHeader {
            format_version: 1,
            pde: self.pde,
            storage_order: STORAGE_ORDER.to_string(),
            axes: self.axes.clone(),
            fields: self.fields.iter().map(|f| f.name.clone()).collect(),
            params: self.params.clone(),
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(GRID_MAGIC)?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for f in &self.fields {
            for v in &f.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self, SolverError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != GRID_MAGIC {
            return Err(SolverError::Grid("bad magic".into()));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let len = u64::from_le_bytes(b8) as usize;
        let mut json = vec![0u8; len];
        r.read_exact(&mut json)?;
        let header: GridHeader = serde_json::from_slice(&json)?;
        let n: usize = header.axes.iter().map(Axis::len).product();
        let mut fields = Vec::with_capacity(header.fields.len());
        for name in header.fields {
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                r.read_exact(&mut b8)?;
                data.push(f64::from_le_bytes(b8));
            }
            fields.push(Field { name, data });
        }
        SolutionGrid::new(header.pde, header.axes, fields, header.params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SolverError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SolverError> {
        SolutionGrid::read(BufReader::new(File::open(path)?))
    }

    /// CSV with header `x[,y],t,<field>...`, one row per grid point in
    /// storage order.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SolverError> {
        let mut out = csv::Writer::from_writer(w);
        let header: Vec<&str> = self
            .axes
            .iter()
            .map(|a| a.name.as_str())
            .chain(self.fields.iter().map(|f| f.name.as_str()))
            .collect();
        out.write_record(&header)?;
        let mut row = Vec::with_capacity(header.len());
        for i in 0..self.n_points() {
            row.clear();
            row.extend(self.point(i).iter().map(|v| v.to_string()));
            row.extend(self.fields.iter().map(|f| f.data[i].to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), SolverError> {
        self.write_csv(BufWriter::new(File::create(path)?))
    }
}
