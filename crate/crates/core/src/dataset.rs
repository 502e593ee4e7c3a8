//! Training, collocation and validation point sets drawn from reference grids.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::index;
use rand::Rng as _;
use thiserror::Error;

use crate::pde::Domain;
use crate::rng::{stream, StreamTag};
use crate::solvers::SolutionGrid;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("requested {requested} samples but only {available} grid points exist")]
    TooMany { requested: usize, available: usize },
    #[error("sample count must be at least 1")]
    Empty,
    #[error("label channel {channel} has zero variance")]
    ZeroVariance { channel: usize },
    #[error("the sample set has no labels")]
    NoLabels,
    #[error("normalization has {got} channels, labels have {expected}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("malformed sample file: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-channel affine label map `(y - mean) / std`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub mean: f64,
    pub std: f64,
}

impl Normalization {
    pub fn apply(&self, y: f64) -> f64 {
        (y - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// A set of points, optionally labelled. Points and labels are stored
/// point-major in flat vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub input_names: Vec<String>,
    pub label_names: Vec<String>,
    pub inputs: Vec<f64>,
    pub labels: Option<Vec<f64>>,
    pub seed: u64,
    /// Present once labels have been normalized; one entry per channel.
    pub normalization: Option<Vec<Normalization>>,
    /// Flat grid index of each point, for sets drawn from grid nodes.
    pub grid_indices: Option<Vec<usize>>,
}

impl SampleSet {
    pub fn dim(&self) -> usize {
        self.input_names.len()
    }

    pub fn channels(&self) -> usize {
        self.label_names.len()
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.dim().max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.inputs[i * d..(i + 1) * d]
    }

    pub fn label(&self, i: usize) -> Option<&[f64]> {
        let c = self.channels();
        self.labels.as_ref().map(|l| &l[i * c..(i + 1) * c])
    }

    fn from_grid_indices(grid: &SolutionGrid, picks: Vec<usize>, seed: u64) -> Self {
        let dim = grid.dim();
        let mut inputs = Vec::with_capacity(picks.len() * dim);
        let mut labels = Vec::with_capacity(picks.len() * grid.fields.len());
        for &flat in &picks {
            inputs.extend(grid.point(flat));
            labels.extend(grid.labels(flat));
        }
        SampleSet {
            input_names: grid.axes.iter().map(|a| a.name.clone()).collect(),
            label_names: grid.fields.iter().map(|f| f.name.clone()).collect(),
            inputs,
            labels: Some(labels),
            seed,
            normalization: None,
            grid_indices: Some(picks),
        }
    }

    /// Every grid node in storage order.
    pub fn full_grid(grid: &SolutionGrid) -> Self {
        SampleSet::from_grid_indices(grid, (0..grid.n_points()).collect(), 0)
    }

    /// Per-channel mean and population standard deviation of the labels.
    pub fn label_stats(&self) -> Result<Vec<Normalization>, DatasetError> {
        let labels = self.labels.as_ref().ok_or(DatasetError::NoLabels)?;
        let (c, n) = (self.channels(), self.len());
        if n == 0 {
            return Err(DatasetError::Empty);
        }
        let mut out = Vec::with_capacity(c);
        for ch in 0..c {
            let mean = (0..n).map(|i| labels[i * c + ch]).sum::<f64>() / n as f64;
            let var = (0..n).map(|i| (labels[i * c + ch] - mean).powi(2)).sum::<f64>() / n as f64;
            if !(var > 0.0) {
                return Err(DatasetError::ZeroVariance { channel: ch });
            }
            out.push(Normalization { mean, std: var.sqrt() });
        }
        Ok(out)
    }

    /// Labels mapped through `norm`, which is recorded on the result.
    pub fn normalized_with(&self, norm: &[Normalization]) -> Result<SampleSet, DatasetError> {
        let labels = self.labels.as_ref().ok_or(DatasetError::NoLabels)?;
        let c = self.channels();
        if norm.len() != c {
            return Err(DatasetError::ChannelMismatch { expected: c, got: norm.len() });
        }
        let mapped = labels.iter().enumerate().map(|(k, &y)| norm[k % c].apply(y)).collect();
        Ok(SampleSet { labels: Some(mapped), normalization: Some(norm.to_vec()), ..self.clone() })
    }

    /// Labels in the original units.
    pub fn denormalized(&self) -> Result<SampleSet, DatasetError> {
        let labels = self.labels.as_ref().ok_or(DatasetError::NoLabels)?;
        let Some(norm) = &self.normalization else { return Ok(self.clone()) };
        let c = self.channels();
        let mapped = labels.iter().enumerate().map(|(k, &z)| norm[k % c].invert(z)).collect();
        Ok(SampleSet { labels: Some(mapped), normalization: None, ..self.clone() })
    }

    /// CSV with one column per input and label, named in the header row.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), DatasetError> {
        let mut out = csv::Writer::from_writer(w);
        let header: Vec<&str> = self.input_names.iter().chain(&self.label_names).map(String::as_str).collect();
        out.write_record(&header)?;
        let mut row = Vec::with_capacity(header.len());
        for i in 0..self.len() {
            row.clear();
            row.extend(self.point(i).iter().map(f64::to_string));
            if let Some(l) = self.label(i) {
                row.extend(l.iter().map(f64::to_string));
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`SampleSet::write_csv`]. The first `dim`
    /// columns are inputs, the remainder labels.
    pub fn read_csv<R: Read>(r: R, dim: usize) -> Result<SampleSet, DatasetError> {
        let mut reader = csv::Reader::from_reader(r);
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        if header.len() < dim || dim == 0 {
            return Err(DatasetError::Format(format!("expected at least {dim} columns, found {}", header.len())));
        }
        let (mut inputs, mut labels) = (Vec::new(), Vec::new());
        for rec in reader.records() {
            let rec = rec?;
            for (k, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| DatasetError::Format(format!("bad number {field:?}")))?;
                if k < dim {
                    inputs.push(v);
                } else {
                    labels.push(v);
                }
            }
        }
        let label_names = header[dim..].to_vec();
        Ok(SampleSet {
            input_names: header[..dim].to_vec(),
            labels: if label_names.is_empty() { None } else { Some(labels) },
            label_names,
            inputs,
            seed: 0,
            normalization: None,
            grid_indices: None,
        })
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        self.write_csv(BufWriter::new(File::create(path)?))
    }

    pub fn load_csv(path: impl AsRef<Path>, dim: usize) -> Result<SampleSet, DatasetError> {
        SampleSet::read_csv(BufReader::new(File::open(path)?), dim)
    }
}

/// `n_u` distinct grid nodes drawn uniformly, labels attached.
pub fn sample_training(grid: &SolutionGrid, n_u: usize, seed: u64) -> Result<SampleSet, DatasetError> {
    let available = grid.n_points();
    if n_u == 0 {
        return Err(DatasetError::Empty);
    }
    if n_u > available {
        return Err(DatasetError::TooMany { requested: n_u, available });
    }
    let mut rng = stream(seed, StreamTag::Training);
    let picks = index::sample(&mut rng, available, n_u).into_vec();
    Ok(SampleSet::from_grid_indices(grid, picks, seed))
}

/// `n_f` unlabelled points drawn uniformly from the closed domain.
pub fn sample_collocation(domain: &Domain, n_f: usize, seed: u64) -> Result<SampleSet, DatasetError> {
    if n_f == 0 {
        return Err(DatasetError::Empty);
    }
    let mut rng = stream(seed, StreamTag::Collocation);
    let dim = domain.dim();
    let mut inputs = Vec::with_capacity(n_f * dim);
    for _ in 0..n_f {
        for (&lo, &hi) in domain.lower.iter().zip(&domain.upper) {
            inputs.push(rng.gen_range(lo..=hi));
        }
    }
    let names: &[&str] = if dim == 2 { &["x", "t"] } else { &["x", "y", "t"] };
    Ok(SampleSet {
        input_names: names.iter().map(|s| s.to_string()).collect(),
        label_names: vec![],
        inputs,
        labels: None,
        seed,
        normalization: None,
        grid_indices: None,
    })
}

/// Normalizes labels with statistics of this set.
pub fn normalize_labels(set: &SampleSet) -> Result<SampleSet, DatasetError> {
    set.normalized_with(&set.label_stats()?)
}
