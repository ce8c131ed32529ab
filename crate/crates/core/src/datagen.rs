//! Synthetic Gaussian-mixture federations, separation and assumption
//! checkers, client partitioning, and a plain matrix importer.
//!
//! Normal variates come from the Box–Muller transform over ChaCha20 uniforms
//! so generated datasets depend only on the seed.

use std::f64::consts::PI;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fed::ClientPartition;
use crate::points::{sq_dist, Points};
use crate::rng::SeedStream;

pub const DESK_POINTS: usize = 10_000;
/// Means stay inside `[0,1]^d`, the same region as the out-of-distribution
/// server points.
pub const DESK_MEAN_SCALE: f64 = 1.0;
pub const DESK_VARIANCE_FRACTION: f64 = 0.7;

/// Isotropic Gaussian mixture: component `r` is `N(mu_r, variance * I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub means: Points,
    /// Per-coordinate variance; also the largest directional variance.
    pub variance: f64,
    pub weights: Vec<f64>,
}

impl MixtureSpec {
    pub fn new(means: Points, variance: f64, weights: Vec<f64>) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::Empty("mixture means"));
        }
        if weights.len() != means.len() {
            return Err(Error::InvalidArgument(format!("{} means but {} weights", means.len(), weights.len())));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument("mixture weights must be nonnegative and sum to 1".into()));
        }
        if !(variance >= 0.0) || !variance.is_finite() || !means.is_finite() {
            return Err(Error::InvalidArgument("variance and means must be finite, variance >= 0".into()));
        }
        Ok(Self { means, variance, weights })
    }

    pub fn equal_weights(means: Points, variance: f64) -> Result<Self> {
        let k = means.len();
        Self::new(means, variance, vec![1.0 / k as f64; k])
    }

    /// Means drawn uniformly from `[0,1]^d`, then scaled by `scale` about the
    /// cube center `(0.5, ..., 0.5)`.
    pub fn uniform_means(k: usize, d: usize, scale: f64, seed: SeedStream) -> Result<Points> {
        let mut rng = seed.child("means").rng();
        let flat = (0..k * d).map(|_| 0.5 + scale * (rng.random::<f64>() - 0.5)).collect();
        Points::from_flat(flat, d)
    }

    /// Reference configuration: `k = 10`, `d = 100`, means in `[0,1]^d`,
    /// variance 0.5, equal weights.
    pub fn reference(seed: SeedStream) -> Result<Self> {
        Self::equal_weights(Self::uniform_means(10, 100, 1.0, seed)?, 0.5)
    }

    /// Desk-scale mixture: `k = 5`, `d = 20`, `n = 10^4`.
    pub fn desk(seed: SeedStream) -> Result<Self> {
        Self::separated(5, 20, DESK_POINTS, DESK_MEAN_SCALE, DESK_VARIANCE_FRACTION, seed)
    }

    /// Equal-weight mixture with means spread by `mean_scale` about the cube
    /// center and variance set to `fraction` of the largest value meeting the
    /// separation condition at `c = 1` for `n` points.
    pub fn separated(k: usize, d: usize, n: usize, mean_scale: f64, fraction: f64, seed: SeedStream) -> Result<Self> {
        if k < 2 || d == 0 || n < 2 || !(fraction > 0.0) {
            return Err(Error::InvalidArgument("separated mixture needs k >= 2, d >= 1, n >= 2, fraction > 0".into()));
        }
        let means = Self::uniform_means(k, d, mean_scale, seed)?;
        let w = 1.0 / k as f64;
        let variance = fraction * min_pairwise_distance(&means) / ((k as f64 / w).sqrt() * (n as f64).ln());
        Self::equal_weights(means, variance)
    }

    pub fn k(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means.dim()
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

pub fn min_pairwise_distance(points: &Points) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            best = best.min(sq_dist(points.row(i), points.row(j)).sqrt());
        }
    }
    best
}

/// One pair of independent standard normals.
pub fn box_muller<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    // u1 in (0, 1] keeps ln finite
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    (r * (2.0 * PI * u2).cos(), r * (2.0 * PI * u2).sin())
}

fn fill_normal<R: Rng + ?Sized>(out: &mut [f64], rng: &mut R) {
    let mut chunks = out.chunks_exact_mut(2);
    for pair in &mut chunks {
        let (a, b) = box_muller(rng);
        pair[0] = a;
        pair[1] = b;
    }
    if let [last] = chunks.into_remainder() {
        *last = box_muller(rng).0;
    }
}

fn sample_component(spec: &MixtureSpec, r: usize, count: usize, seed: SeedStream) -> Vec<f64> {
    let d = spec.dim();
    let sd = spec.variance.sqrt();
    let mut rng = seed.rng();
    let mut out = vec![0.0; count * d];
    if sd == 0.0 {
        for row in out.chunks_exact_mut(d) {
            row.copy_from_slice(spec.means.row(r));
        }
        return out;
    }
    fill_normal(&mut out, &mut rng);
    for row in out.chunks_exact_mut(d) {
        for (x, m) in row.iter_mut().zip(spec.means.row(r)) {
            *x = m + sd * *x;
        }
    }
    out
}

/// `n` i.i.d. samples with the index of their generating component.
/// Components are drawn first; each component's points then come from its
/// own substream, so components can be sampled in parallel.
pub fn generate_mixture(spec: &MixtureSpec, n: usize, seed: SeedStream) -> (Points, Vec<usize>) {
    let mut rng = seed.child("labels").rng();
    let cumulative: Vec<f64> = spec
        .weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let total = *cumulative.last().expect("non-empty");
    let labels: Vec<usize> = (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            cumulative.iter().position(|c| u < *c).unwrap_or(spec.k() - 1)
        })
        .collect();
    let mut counts = vec![0usize; spec.k()];
    for &l in &labels {
        counts[l] += 1;
    }
    let per_component: Vec<Vec<f64>> = (0..spec.k())
        .into_par_iter()
        .map(|r| sample_component(spec, r, counts[r], seed.child("component").index(r as u64)))
        .collect();
    let d = spec.dim();
    let mut cursor = vec![0usize; spec.k()];
    let mut flat = Vec::with_capacity(n * d);
    for &l in &labels {
        let i = cursor[l];
        flat.extend_from_slice(&per_component[l][i * d..(i + 1) * d]);
        cursor[l] += 1;
    }
    (Points::from_flat(flat, d).expect("d > 0"), labels)
}

/// Separation condition `|mu_i - mu_j| >= c sqrt(k / w_i) sigma_max ln(n)` over
/// all ordered pairs, with `sigma_max` the mixture variance. Returns whether it
/// holds and the worst margin (distance minus required distance).
pub fn check_separation(spec: &MixtureSpec, n: usize, c: f64) -> (bool, f64) {
    let k = spec.k() as f64;
    let ln_n = (n.max(1) as f64).ln();
    let mut worst = f64::INFINITY;
    let mut worst_required = 0.0;
    for i in 0..spec.k() {
        for j in 0..spec.k() {
            if i == j {
                continue;
            }
            let required = c * (k / spec.weights[i]).sqrt() * spec.variance * ln_n;
            let margin = sq_dist(spec.means.row(i), spec.means.row(j)).sqrt() - required;
            if margin < worst {
                worst = margin;
                worst_required = required;
            }
        }
    }
    if spec.k() < 2 {
        return (true, f64::INFINITY);
    }
    // equality counts as separated up to rounding in the required distance
    (worst >= -1e-12 * worst_required.abs() && worst_required.is_finite(), worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// Largest server-point norm, the clipping radius the pipeline uses.
    pub delta: f64,
    /// Largest client-point norm.
    pub data_radius: f64,
    /// `k ln(n)^2 sqrt(d) sigma_max / (eps w_min)`.
    pub diameter_bound: f64,
    pub diameter_ok: bool,
    pub server_size: usize,
    /// `eps n k ln(n) sigma_max^2 / delta^2`.
    pub server_bound: f64,
    pub server_ok: bool,
}

/// Evaluates the diameter and server-size conditions with constants set to 1.
pub fn check_assumptions(dataset: &Points, server: &Points, eps: f64, k: usize, sigma_max: f64, w_min: f64) -> AssumptionReport {
    let n = dataset.len() as f64;
    let d = dataset.dim() as f64;
    let ln_n = n.max(1.0).ln();
    let delta = server.max_norm();
    let data_radius = dataset.max_norm();
    let diameter_bound = k as f64 * ln_n * ln_n * d.sqrt() * sigma_max / (eps * w_min);
    let server_bound = if delta > 0.0 { eps * n * k as f64 * ln_n * sigma_max * sigma_max / (delta * delta) } else { f64::INFINITY };
    AssumptionReport {
        delta,
        data_radius,
        diameter_bound,
        diameter_ok: delta <= diameter_bound,
        server_size: server.len(),
        server_bound,
        server_ok: server.is_empty() || server.len() as f64 <= server_bound,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionScheme {
    /// Shuffle, then split into near-equal contiguous blocks.
    Iid,
    /// Shuffle, then split into blocks of the given sizes (must sum to n).
    BySize(Vec<usize>),
}

/// Client partition plus the ground-truth labels of every client's points.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPartition {
    pub partition: ClientPartition,
    pub labels: Vec<Vec<usize>>,
}

impl LabeledPartition {
    pub fn all_labels(&self) -> Vec<usize> {
        self.labels.concat()
    }
}

pub fn partition_clients(points: &Points, labels: &[usize], m: usize, scheme: &PartitionScheme, seed: SeedStream) -> Result<LabeledPartition> {
    let n = points.len();
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!("cannot split {n} points across {m} clients")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed.child("partition").rng());
    let sizes: Vec<usize> = match scheme {
        PartitionScheme::Iid => (0..m).map(|j| n / m + usize::from(j < n % m)).collect(),
        PartitionScheme::BySize(s) => {
            if s.len() != m || s.iter().sum::<usize>() != n {
                return Err(Error::InvalidArgument("client sizes must have length m and sum to n".into()));
            }
            s.clone()
        }
    };
    let mut clients = Vec::with_capacity(m);
    let mut client_labels = Vec::with_capacity(m);
    let mut start = 0;
    for s in sizes {
        let idx = &order[start..start + s];
        clients.push(points.select(idx));
        client_labels.push(idx.iter().map(|&i| labels[i]).collect());
        start += s;
    }
    Ok(LabeledPartition { partition: ClientPartition::new(clients)?, labels: client_labels })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub clients: usize,
    pub points_per_client: usize,
    /// Server samples drawn from each non-missing component.
    pub server_per_component: usize,
    /// Server samples drawn uniformly from `[0,1]^d`.
    pub server_ood: usize,
    /// Components absent from the server data (0-based).
    pub missing_components: Vec<usize>,
}

impl ScenarioSpec {
    pub fn reference() -> Self {
        Self { clients: 100, points_per_client: 1000, server_per_component: 20, server_ood: 100, missing_components: vec![] }
    }

    pub fn desk_scale() -> Self {
        Self { clients: 20, points_per_client: 500, server_per_component: 20, server_ood: 100, missing_components: vec![] }
    }

    /// Server data drawn only from the components not listed in `missing`,
    /// with no out-of-distribution filler.
    pub fn desk_scale_missing(missing: Vec<usize>) -> Self {
        Self { server_ood: 0, missing_components: missing, ..Self::desk_scale() }
    }

    pub fn num_points(&self) -> usize {
        self.clients * self.points_per_client
    }
}

pub fn make_server_data(spec: &MixtureSpec, scenario: &ScenarioSpec, seed: SeedStream) -> Result<Points> {
    if let Some(&bad) = scenario.missing_components.iter().find(|&&r| r >= spec.k()) {
        return Err(Error::InvalidArgument(format!("missing component {bad} out of range")));
    }
    let d = spec.dim();
    let mut out = Points::empty(d);
    for r in 0..spec.k() {
        if !scenario.missing_components.contains(&r) {
            let rows = sample_component(spec, r, scenario.server_per_component, seed.child("server").index(r as u64));
            out.extend(&Points::from_flat(rows, d)?)?;
        }
    }
    let mut rng = seed.child("server-ood").rng();
    let ood: Vec<f64> = (0..scenario.server_ood * d).map(|_| rng.random::<f64>()).collect();
    out.extend(&Points::from_flat(ood, d)?)?;
    Ok(out)
}

/// A generated federation with ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct FederatedDataset {
    pub spec: MixtureSpec,
    pub clients: LabeledPartition,
    pub server: Points,
}

pub fn build_federation(spec: &MixtureSpec, scenario: &ScenarioSpec, seed: SeedStream) -> Result<FederatedDataset> {
    let (points, labels) = generate_mixture(spec, scenario.num_points(), seed.child("clients"));
    let clients = partition_clients(&points, &labels, scenario.clients, &PartitionScheme::Iid, seed)?;
    let server = make_server_data(spec, scenario, seed)?;
    Ok(FederatedDataset { spec: spec.clone(), clients, server })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    /// Comma-separated, optional single header line, one point per row.
    Csv,
    /// `FDKM`, u32 n, u32 d, then `n * d` little-endian f64 values.
    BinaryF64,
}

const MAGIC: &[u8; 4] = b"FDKM";

pub fn import_matrix(path: &Path, format: MatrixFormat) -> Result<Points> {
    let file = std::fs::File::open(path)?;
    let points = match format {
        MatrixFormat::Csv => read_csv(std::io::BufReader::new(file))?,
        MatrixFormat::BinaryF64 => read_binary(std::io::BufReader::new(file))?,
    };
    if points.is_empty() {
        return Err(Error::Malformed("matrix file holds no points".into()));
    }
    if !points.is_finite() {
        return Err(Error::Malformed("non-finite value".into()));
    }
    Ok(points)
}

fn read_csv<R: BufRead>(reader: R) -> Result<Points> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut out: Option<Points> = None;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Malformed(e.to_string()))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(r) => r,
            Err(_) if line == 0 => continue,
            Err(e) => return Err(Error::Malformed(format!("row {}: {e}", line + 1))),
        };
        match out.as_mut() {
            None => out = Some(Points::from_rows(&[row])?),
            Some(p) => p.push(&row).map_err(|_| Error::Malformed(format!("row {} has {} fields, expected {}", line + 1, row.len(), p.dim())))?,
        }
    }
    out.ok_or_else(|| Error::Malformed("empty matrix file".into()))
}

fn read_binary<R: Read>(mut reader: R) -> Result<Points> {
    let mut head = [0u8; 12];
    reader.read_exact(&mut head).map_err(|_| Error::Malformed("truncated header".into()))?;
    if &head[..4] != MAGIC {
        return Err(Error::Malformed("bad magic".into()));
    }
    let n = u32::from_le_bytes(head[4..8].try_into().expect("4 bytes")) as usize;
    let d = u32::from_le_bytes(head[8..12].try_into().expect("4 bytes")) as usize;
    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    if body.len() != n * d * 8 {
        return Err(Error::Malformed(format!("expected {} bytes of data, found {}", n * d * 8, body.len())));
    }
    let flat = body.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
    Points::from_flat(flat, d).map_err(|e| Error::Malformed(e.to_string()))
}

pub fn export_matrix(points: &Points, path: &Path, format: MatrixFormat) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    match format {
        MatrixFormat::Csv => {
            let mut cw = csv::Writer::from_writer(w);
            for row in points.rows() {
                // `{:?}` prints the shortest string that parses back to the same f64
                cw.write_record(row.iter().map(|x| format!("{x:?}"))).map_err(|e| Error::Io(e.to_string()))?;
            }
            cw.flush()?;
        }
        MatrixFormat::BinaryF64 => {
            let n = u32::try_from(points.len()).map_err(|_| Error::InvalidArgument("too many rows".into()))?;
            let d = u32::try_from(points.dim()).map_err(|_| Error::InvalidArgument("too many columns".into()))?;
            w.write_all(MAGIC)?;
            w.write_all(&n.to_le_bytes())?;
            w.write_all(&d.to_le_bytes())?;
            for x in points.as_flat() {
                w.write_all(&x.to_le_bytes())?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_means(dist: f64) -> MixtureSpec {
        MixtureSpec::equal_weights(Points::from_rows(&[[0.0, 0.0], [dist, 0.0]]).unwrap(), 0.5).unwrap()
    }

    #[test]
    fn zero_variance_returns_means() {
        let spec = MixtureSpec::equal_weights(Points::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap(), 0.0).unwrap();
        let (p, l) = generate_mixture(&spec, 50, SeedStream::new(1));
        for (row, &lab) in p.rows().zip(&l) {
            assert_eq!(row, spec.means.row(lab));
        }
    }

    #[test]
    fn component_frequencies_and_means() {
        let spec = MixtureSpec::new(Points::from_rows(&[[0.0; 3], [5.0; 3], [-5.0; 3]]).unwrap(), 2.0, vec![0.5, 0.3, 0.2]).unwrap();
        let n = 100_000;
        let (p, l) = generate_mixture(&spec, n, SeedStream::new(2));
        for r in 0..3 {
            let idx: Vec<usize> = (0..n).filter(|&i| l[i] == r).collect();
            let w = spec.weights[r];
            let band = 3.0 * (w * (1.0 - w) / n as f64).sqrt();
            assert!((idx.len() as f64 / n as f64 - w).abs() < band);
            let sd = spec.variance.sqrt();
            for t in 0..3 {
                let mean = idx.iter().map(|&i| p.row(i)[t]).sum::<f64>() / idx.len() as f64;
                assert!((mean - spec.means.row(r)[t]).abs() < 4.0 * sd / (idx.len() as f64).sqrt());
            }
        }
    }

    #[test]
    fn generation_replays() {
        let spec = two_means(3.0);
        assert_eq!(generate_mixture(&spec, 100, SeedStream::new(4)), generate_mixture(&spec, 100, SeedStream::new(4)));
        assert_ne!(generate_mixture(&spec, 100, SeedStream::new(4)).0, generate_mixture(&spec, 100, SeedStream::new(5)).0);
    }

    #[test]
    fn separation_examples() {
        let same = MixtureSpec::equal_weights(Points::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap(), 0.5).unwrap();
        let (ok, margin) = check_separation(&same, 100, 1.0);
        assert!(!ok && margin <= 0.0);

        let n = 1000;
        // required = sqrt(2 / 0.5) * 0.5 * ln(1000)
        let boundary = 2.0 * 0.5 * (n as f64).ln();
        assert!(check_separation(&two_means(boundary), n, 1.0).0);
        assert!(!check_separation(&two_means(boundary * 0.999), n, 1.0).0);

        let (_, m1) = check_separation(&two_means(5.0), n, 1.0);
        let (_, m2) = check_separation(&two_means(10.0), n, 1.0);
        assert!(m2 > m1);
    }

    #[test]
    fn desk_scale_spec_is_separated() {
        for s in 0..5 {
            let spec = MixtureSpec::desk(SeedStream::new(s)).unwrap();
            assert_eq!((spec.k(), spec.dim()), (5, 20));
            let (ok, margin) = check_separation(&spec, DESK_POINTS, 1.0);
            assert!(ok && margin > 0.0);
            assert!(spec.means.as_flat().iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn reference_scenario_shapes_and_radius() {
        let spec = MixtureSpec::reference(SeedStream::new(0)).unwrap();
        let scenario = ScenarioSpec::reference();
        let server = make_server_data(&spec, &scenario, SeedStream::new(0)).unwrap();
        assert_eq!(server.len(), 300);
        let (points, labels) = generate_mixture(&spec, scenario.num_points(), SeedStream::new(1));
        let part = partition_clients(&points, &labels, 100, &PartitionScheme::Iid, SeedStream::new(2)).unwrap();
        assert!(part.partition.clients().iter().all(|c| c.len() == 1000));
        let report = check_assumptions(&points, &server, 1.0, 10, 0.5, 0.1);
        assert!((report.delta - 10.57).abs() < 0.05 * 10.57, "{}", report.delta);
        assert!(report.diameter_ok);
        assert!(report.server_bound > 20_000.0 && report.server_bound < 35_000.0, "{}", report.server_bound);
        assert!(report.server_ok);
    }

    #[test]
    fn empty_server_passes_size_condition() {
        let p = Points::from_rows(&[[1.0, 0.0]]).unwrap();
        assert!(check_assumptions(&p, &Points::empty(2), 1.0, 2, 0.5, 0.5).server_ok);
    }

    #[test]
    fn server_data_counts_and_missing() {
        let spec = MixtureSpec::equal_weights(Points::from_rows(&[[0.2, 0.2], [0.8, 0.8]]).unwrap(), 0.0).unwrap();
        let mut sc = ScenarioSpec { clients: 1, points_per_client: 1, server_per_component: 3, server_ood: 0, missing_components: vec![] };
        let s = make_server_data(&spec, &sc, SeedStream::new(0)).unwrap();
        assert_eq!(s.as_flat(), &[0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8]);
        sc.server_ood = 100;
        sc.missing_components = vec![0, 1];
        let s = make_server_data(&spec, &sc, SeedStream::new(0)).unwrap();
        assert_eq!(s.len(), 100);
        assert!(s.as_flat().iter().all(|x| (0.0..1.0).contains(x)));
        sc.missing_components = vec![2];
        assert!(make_server_data(&spec, &sc, SeedStream::new(0)).is_err());
    }

    #[test]
    fn partition_covers_points() {
        let spec = two_means(4.0);
        let (p, l) = generate_mixture(&spec, 103, SeedStream::new(3));
        let single = partition_clients(&p, &l, 1, &PartitionScheme::Iid, SeedStream::new(0)).unwrap();
        assert_eq!(single.partition.num_clients(), 1);
        let part = partition_clients(&p, &l, 10, &PartitionScheme::Iid, SeedStream::new(0)).unwrap();
        let mut union: Vec<Vec<u64>> = part.partition.union().rows().map(|r| r.iter().map(|x| x.to_bits()).collect()).collect();
        let mut orig: Vec<Vec<u64>> = p.rows().map(|r| r.iter().map(|x| x.to_bits()).collect()).collect();
        union.sort();
        orig.sort();
        assert_eq!(union, orig);
        // labels travel with their points
        for (c, labels) in part.partition.clients().iter().zip(&part.labels) {
            for (row, &lab) in c.rows().zip(labels) {
                let i = p.rows().position(|r| r == row).unwrap();
                assert_eq!(l[i], lab);
            }
        }
        assert!(partition_clients(&p, &l, 104, &PartitionScheme::Iid, SeedStream::new(0)).is_err());
        let sized = partition_clients(&p, &l, 2, &PartitionScheme::BySize(vec![3, 100]), SeedStream::new(0)).unwrap();
        assert_eq!(sized.partition.clients()[0].len(), 3);
    }

    #[test]
    fn csv_and_binary_io() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("m.csv");
        std::fs::write(&csv_path, "1,2\n3,4").unwrap();
        let p = import_matrix(&csv_path, MatrixFormat::Csv).unwrap();
        assert_eq!(p.as_flat(), &[1.0, 2.0, 3.0, 4.0]);
        std::fs::write(&csv_path, "x,y\n1,2\n").unwrap();
        assert_eq!(import_matrix(&csv_path, MatrixFormat::Csv).unwrap().len(), 1);
        std::fs::write(&csv_path, "").unwrap();
        assert!(import_matrix(&csv_path, MatrixFormat::Csv).is_err());
        std::fs::write(&csv_path, "1,2\n3\n").unwrap();
        assert!(import_matrix(&csv_path, MatrixFormat::Csv).is_err());
        std::fs::write(&csv_path, "1,2\nNaN,4\n").unwrap();
        assert!(import_matrix(&csv_path, MatrixFormat::Csv).is_err());

        let (pts, _) = generate_mixture(&two_means(2.0), 17, SeedStream::new(9));
        for (fmt, name) in [(MatrixFormat::BinaryF64, "m.bin"), (MatrixFormat::Csv, "r.csv")] {
            let path = dir.path().join(name);
            export_matrix(&pts, &path, fmt).unwrap();
            assert_eq!(import_matrix(&path, fmt).unwrap(), pts);
        }
        let bad = dir.path().join("bad.bin");
        std::fs::write(&bad, b"FDKM\x01\x00\x00\x00\x02\x00\x00\x00abc").unwrap();
        assert!(import_matrix(&bad, MatrixFormat::BinaryF64).is_err());
    }
}
