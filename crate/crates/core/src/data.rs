//! Synthetic regression data, partitioning across machines and per-round subsets.

use std::io::{Read, Write};

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// A borrowed sample `z = (x, y)`.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub x: &'a [f64],
    pub y: f64,
}

/// Examples stored row-major: `features[j * d .. (j + 1) * d]` is the feature vector of example `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d: usize,
    features: Vec<f64>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(d: usize, features: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::config("d", "dimension must be positive"));
        }
        if targets.is_empty() {
            return Err(Error::config("n_total", "dataset must be nonempty"));
        }
        if features.len() != d * targets.len() {
            return Err(Error::config(
                "features",
                format!("expected {} feature values, got {}", d * targets.len(), features.len()),
            ));
        }
        if let Some(p) = features.iter().chain(&targets).position(|v| !v.is_finite()) {
            return Err(Error::config("features", format!("non-finite value at flat position {p}")));
        }
        Ok(Dataset { d, features, targets })
    }

    /// Builds a dataset from `(x, y)` rows.
    pub fn from_rows(rows: &[(Vec<f64>, f64)]) -> Result<Self> {
        let d = rows.first().map(|r| r.0.len()).unwrap_or(0);
        if let Some(bad) = rows.iter().position(|r| r.0.len() != d) {
            return Err(Error::config("features", format!("row {bad} has a different dimension")));
        }
        let features = rows.iter().flat_map(|r| r.0.iter().copied()).collect();
        let targets = rows.iter().map(|r| r.1).collect();
        Dataset::new(d, features, targets)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn example(&self, j: usize) -> Example<'_> {
        Example {
            x: &self.features[j * self.d..(j + 1) * self.d],
            y: self.targets[j],
        }
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn view(&self) -> View<'_> {
        View { data: self, indices: None }
    }

    pub fn subset<'a>(&'a self, indices: &'a [usize]) -> View<'a> {
        View {
            data: self,
            indices: Some(indices),
        }
    }

    /// Writes `y,x1,...,xd` CSV. Values use shortest round-trip decimal text.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["y".to_string()];
        header.extend((1..=self.d).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(self.d + 1);
        for j in 0..self.len() {
            let z = self.example(j);
            record.clear();
            record.push(z.y.to_string());
            record.extend(z.x.iter().map(f64::to_string));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let d = header.len().saturating_sub(1);
        let header_ok = header.get(0) == Some("y")
            && (1..=d).all(|i| header.get(i) == Some(format!("x{i}").as_str()));
        if !header_ok {
            return Err(Error::config("header", "expected `y,x1,...,xd`"));
        }
        let mut features = Vec::new();
        let mut targets = Vec::new();
        for (row, record) in r.records().enumerate() {
            let record = record?;
            let parse = |col: usize| -> Result<f64> {
                record
                    .get(col)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::config(format!("row {row}"), format!("bad number in column {col}")))
            };
            targets.push(parse(0)?);
            for col in 1..=d {
                features.push(parse(col)?);
            }
        }
        Dataset::new(d, features, targets)
    }
}

/// A sequence of positions into a [`Dataset`], or the whole dataset.
#[derive(Debug, Clone, Copy)]
pub struct View<'a> {
    data: &'a Dataset,
    indices: Option<&'a [usize]>,
}

impl<'a> View<'a> {
    pub fn len(&self) -> usize {
        self.indices.map_or(self.data.len(), <[usize]>::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.d
    }

    /// The `k`-th example of the view.
    pub fn example(&self, k: usize) -> Example<'a> {
        match self.indices {
            Some(ix) => self.data.example(ix[k]),
            None => self.data.example(k),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Example<'a>> + '_ {
        (0..self.len()).map(move |k| self.example(k))
    }
}

/// The examples owned by one simulated machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shard {
    pub machine_id: usize,
    pub indices: Vec<usize>,
}

impl Shard {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn view<'a>(&'a self, data: &'a Dataset) -> View<'a> {
        data.subset(&self.indices)
    }
}

/// Parameters of the linear-Gaussian generating model.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub d: usize,
    pub n_total: usize,
    pub noise_std: f64,
    /// Coordinate `i` (1-based) of `x` has variance `i^(-cov_exponent)`.
    pub cov_exponent: f64,
    pub w_star: Vec<f64>,
    pub seed: u64,
}

impl SyntheticSpec {
    /// The all-ones ground truth with `Σ_ii = i^-1.2` and unit noise.
    pub fn standard(d: usize, n_total: usize, seed: u64) -> Self {
        SyntheticSpec {
            d,
            n_total,
            noise_std: 1.0,
            cov_exponent: 1.2,
            w_star: vec![1.0; d],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::config("d", "must be at least 1"));
        }
        if self.n_total == 0 {
            return Err(Error::config("n_total", "must be at least 1"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::config("noise_std", format!("must be finite and >= 0, got {}", self.noise_std)));
        }
        if !(self.cov_exponent >= 0.0 && self.cov_exponent.is_finite()) {
            return Err(Error::config(
                "cov_exponent",
                format!("must be finite and >= 0, got {}", self.cov_exponent),
            ));
        }
        if self.w_star.len() != self.d {
            return Err(Error::config(
                "w_star",
                format!("length {} does not match d = {}", self.w_star.len(), self.d),
            ));
        }
        if self.w_star.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("w_star", "entries must be finite"));
        }
        Ok(())
    }

    /// Standard deviation of each feature coordinate.
    pub fn feature_std(&self) -> Vec<f64> {
        (1..=self.d).map(|i| (i as f64).powf(-self.cov_exponent).sqrt()).collect()
    }

    /// Draws one example into `x` and returns its target.
    pub(crate) fn draw_into<R: Rng>(&self, rng: &mut R, std: &[f64], x: &mut [f64]) -> f64 {
        let mut signal = 0.0;
        for ((xi, s), w) in x.iter_mut().zip(std).zip(&self.w_star) {
            let g: f64 = rng.sample(StandardNormal);
            *xi = s * g;
            signal += *xi * w;
        }
        let noise: f64 = rng.sample(StandardNormal);
        signal + self.noise_std * noise
    }
}

/// Draws `n_total` examples from the model. Deterministic in `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, Purpose::Data, 0, 0);
    let std = spec.feature_std();
    let mut features = vec![0.0; spec.d * spec.n_total];
    let mut targets = Vec::with_capacity(spec.n_total);
    for row in features.chunks_exact_mut(spec.d) {
        targets.push(spec.draw_into(&mut rng, &std, row));
    }
    Dataset::new(spec.d, features, targets)
}

/// Randomly splits the dataset into `m` equal shards.
pub fn partition(dataset: &Dataset, m: usize, seed: u64) -> Result<Vec<Shard>> {
    let n_total = dataset.len();
    if m == 0 {
        return Err(Error::config("machines", "must be at least 1"));
    }
    if !n_total.is_multiple_of(m) {
        return Err(Error::config(
            "machines",
            format!("{m} machines do not divide {n_total} examples evenly"),
        ));
    }
    let mut perm: Vec<usize> = (0..n_total).collect();
    perm.shuffle(&mut rng::stream(seed, Purpose::Partition, 0, 0));
    let n = n_total / m;
    Ok(perm
        .chunks_exact(n)
        .enumerate()
        .map(|(machine_id, chunk)| Shard {
            machine_id,
            indices: chunk.to_vec(),
        })
        .collect())
}

/// Number of examples kept by a subset of the given fraction.
pub fn subset_size(n: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config("fraction", format!("must lie in (0, 1], got {fraction}")));
    }
    let k = (fraction * n as f64).floor() as usize;
    if k == 0 {
        return Err(Error::config(
            "fraction",
            format!("{fraction} of {n} examples rounds down to an empty subset"),
        ));
    }
    Ok(k)
}

/// Draws `floor(fraction * n)` distinct dataset positions from the shard for round `round`.
pub fn sample_subset(shard: &Shard, fraction: f64, seed: u64, round: usize) -> Result<Vec<usize>> {
    let k = subset_size(shard.len(), fraction)?;
    let mut rng = rng::stream(seed, Purpose::Subset, shard.machine_id as u64, round as u64);
    Ok(index::sample(&mut rng, shard.len(), k)
        .into_iter()
        .map(|p| shard.indices[p])
        .collect())
}
