//! Non-private weighted k-means: cost, assignment, k-means++ seeding, Lloyd
//! iterations and an exhaustive optimum for small instances.

use rand::Rng;

use crate::error::{Error, Result};
use crate::points::{nearest, sq_dist, CenterSet, Points, WeightedPoints};
use crate::rng::SeedStream;

/// Nearest-center labels, lowest index on ties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment(pub Vec<usize>);

impl Assignment {
    pub fn labels(&self) -> &[usize] {
        &self.0
    }
}

pub fn assign(points: &Points, centers: &CenterSet) -> Result<Assignment> {
    points.ensure_dim(centers.dim())?;
    Ok(Assignment(points.rows().map(|p| nearest(p, centers.points()).0).collect()))
}

/// Unnormalized k-means cost `sum_i min_j |p_i - c_j|^2`.
pub fn kmeans_cost(points: &Points, centers: &CenterSet) -> Result<f64> {
    points.ensure_dim(centers.dim())?;
    Ok(points.rows().map(|p| nearest(p, centers.points()).1).sum())
}

/// Cost scaled by `1/n`, the value reported in benchmarks.
pub fn normalized_cost(points: &Points, centers: &CenterSet) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Empty("points"));
    }
    Ok(kmeans_cost(points, centers)? / points.len() as f64)
}

pub fn weighted_cost(data: &WeightedPoints, centers: &CenterSet) -> Result<f64> {
    data.points.ensure_dim(centers.dim())?;
    Ok(data
        .points
        .rows()
        .zip(&data.weights)
        .map(|(p, w)| w.max(0.0) * nearest(p, centers.points()).1)
        .sum())
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            acc += w;
            last_positive = Some(i);
            if target < acc {
                return Some(i);
            }
        }
    }
    last_positive
}

/// Weighted k-means++: the first center is drawn proportionally to weight, each
/// later one proportionally to `weight * D^2`. Negative weights count as zero.
/// Once every positive-weight point is chosen, remaining centers repeat
/// weight-proportional draws.
pub fn weighted_kmeans_pp_seed<R: Rng + ?Sized>(data: &WeightedPoints, k: usize, rng: &mut R) -> Result<CenterSet> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let w: Vec<f64> = data.weights.iter().map(|w| w.max(0.0)).collect();
    let first = sample_index(&w, rng).ok_or(Error::ZeroWeights)?;
    let mut centers = Points::with_capacity(data.dim(), k);
    centers.push(data.points.row(first))?;
    let mut d2: Vec<f64> = data.points.rows().map(|p| sq_dist(p, data.points.row(first))).collect();
    for _ in 1..k {
        let score: Vec<f64> = w.iter().zip(&d2).map(|(w, d)| w * d).collect();
        let next = match sample_index(&score, rng) {
            Some(i) => i,
            None => sample_index(&w, rng).ok_or(Error::ZeroWeights)?,
        };
        let c = data.points.row(next).to_vec();
        for (d, p) in d2.iter_mut().zip(data.points.rows()) {
            *d = d.min(sq_dist(p, &c));
        }
        centers.push(&c)?;
    }
    CenterSet::new(centers)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LloydParams {
    pub max_iters: usize,
    /// Stop once every center moves less than `tol * max(1, largest center norm)`.
    pub tol: f64,
}

impl Default for LloydParams {
    fn default() -> Self {
        Self { max_iters: 100, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    pub centers: CenterSet,
    pub iterations: usize,
    /// Weighted cost of the initial centers, then after every iteration.
    pub costs: Vec<f64>,
}

/// Weighted Lloyd iterations. Empty clusters keep their previous center; stops
/// when assignments stop changing, movement falls under tolerance, or after
/// `max_iters` iterations.
pub fn weighted_lloyd(data: &WeightedPoints, init: &CenterSet, params: LloydParams) -> Result<LloydRun> {
    data.points.ensure_dim(init.dim())?;
    let data = data.clamped();
    let (k, d) = (init.k(), init.dim());
    let mut centers = init.clone();
    let mut costs = vec![weighted_cost(&data, &centers)?];
    let mut prev_labels: Option<Vec<usize>> = None;
    let mut iterations = 0;
    while iterations < params.max_iters {
        let labels = assign(&data.points, &centers)?.0;
        if prev_labels.as_ref() == Some(&labels) {
            break;
        }
        let mut sums = vec![0.0; k * d];
        let mut mass = vec![0.0; k];
        for ((p, w), &l) in data.points.rows().zip(&data.weights).zip(&labels) {
            if *w > 0.0 {
                mass[l] += w;
                for (s, x) in sums[l * d..(l + 1) * d].iter_mut().zip(p) {
                    *s += w * x;
                }
            }
        }
        let scale = centers.iter().map(crate::points::norm).fold(1.0, f64::max);
        let mut moved = 0.0f64;
        for r in 0..k {
            if mass[r] > 0.0 {
                let c = centers.center_mut(r);
                let mut shift = 0.0;
                for (ci, s) in c.iter_mut().zip(&sums[r * d..(r + 1) * d]) {
                    let next = s / mass[r];
                    shift += (next - *ci) * (next - *ci);
                    *ci = next;
                }
                moved = moved.max(shift.sqrt());
            }
        }
        iterations += 1;
        costs.push(weighted_cost(&data, &centers)?);
        prev_labels = Some(labels);
        if moved < params.tol * scale {
            break;
        }
    }
    Ok(LloydRun { centers, iterations, costs })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub restarts: usize,
    pub lloyd: LloydParams,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self { restarts: 10, lloyd: LloydParams::default() }
    }
}

/// Weighted k-means++ followed by Lloyd, best weighted cost over restarts.
/// Restart `i` draws from `seed.index(i)`.
pub fn weighted_kmeans(data: &WeightedPoints, k: usize, params: KMeansParams, seed: SeedStream) -> Result<(CenterSet, f64)> {
    let mut best: Option<(CenterSet, f64)> = None;
    for i in 0..params.restarts.max(1) {
        let init = weighted_kmeans_pp_seed(data, k, &mut seed.index(i as u64).rng())?;
        let run = weighted_lloyd(data, &init, params.lloyd)?;
        let cost = *run.costs.last().expect("costs never empty");
        if best.as_ref().is_none_or(|(_, c)| cost < *c) {
            best = Some((run.centers, cost));
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Exact k-means optimum by enumerating every labeling (n <= 12, k <= 3).
pub fn brute_force_kmeans(points: &Points, k: usize) -> Result<(CenterSet, f64)> {
    let n = points.len();
    if n > 12 || k > 3 {
        return Err(Error::TooLargeForBruteForce { n, k });
    }
    if n == 0 || k == 0 {
        return Err(Error::Empty("points or k"));
    }
    let d = points.dim();
    let mut labels = vec![0usize; n];
    let mut best: Option<(Vec<f64>, f64)> = None;
    loop {
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.rows().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l * d..(l + 1) * d].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut centers = vec![0.0; k * d];
        for r in 0..k {
            let src = if counts[r] > 0 { None } else { Some(points.row(0)) };
            for t in 0..d {
                centers[r * d + t] = match src {
                    None => sums[r * d + t] / counts[r] as f64,
                    Some(p) => p[t],
                };
            }
        }
        let cost: f64 = points
            .rows()
            .zip(&labels)
            .map(|(p, &l)| sq_dist(p, &centers[l * d..(l + 1) * d]))
            .sum();
        if best.as_ref().is_none_or(|(_, c)| cost < *c) {
            best = Some((centers, cost));
        }
        // odometer over k^n labelings
        let mut i = 0;
        while i < n {
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    let (c, cost) = best.expect("non-empty enumeration");
    Ok((CenterSet::new(Points::from_flat(c, d)?)?, cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(rows: &[&[f64]]) -> Points {
        Points::from_rows(rows).unwrap()
    }

    fn centers(rows: &[&[f64]]) -> CenterSet {
        CenterSet::new(pts(rows)).unwrap()
    }

    #[test]
    fn cost_examples() {
        let p = pts(&[&[0.0], &[10.0]]);
        assert_eq!(kmeans_cost(&p, &centers(&[&[5.0]])).unwrap(), 50.0);
        assert_eq!(normalized_cost(&p, &centers(&[&[5.0]])).unwrap(), 25.0);
        assert_eq!(kmeans_cost(&p, &CenterSet::new(p.clone()).unwrap()).unwrap(), 0.0);
        assert!(CenterSet::new(Points::empty(1)).is_err());
    }

    #[test]
    fn cost_matches_pairwise_matrix_route() {
        let mut rng = SeedStream::new(4).rng();
        let p = Points::from_flat((0..60).map(|_| rng.random_range(-3.0..3.0)).collect(), 3).unwrap();
        let c = Points::from_flat((0..12).map(|_| rng.random_range(-3.0..3.0)).collect(), 3).unwrap();
        // distance matrix D[i][j] = |p|^2 - 2 p.c + |c|^2, row minima summed
        let mut oracle = 0.0;
        for i in 0..p.len() {
            let mut m = f64::INFINITY;
            for j in 0..c.len() {
                let pp: f64 = p.row(i).iter().map(|x| x * x).sum();
                let cc: f64 = c.row(j).iter().map(|x| x * x).sum();
                let pc: f64 = p.row(i).iter().zip(c.row(j)).map(|(a, b)| a * b).sum();
                m = m.min(pp - 2.0 * pc + cc);
            }
            oracle += m;
        }
        let got = kmeans_cost(&p, &CenterSet::new(c).unwrap()).unwrap();
        assert!((got - oracle).abs() < 1e-9);
    }

    #[test]
    fn assign_ties_and_coincidence() {
        let c = centers(&[&[-1.0, 0.0], &[1.0, 0.0], &[5.0, 5.0]]);
        let p = pts(&[&[0.0, 0.0], &[5.0, 5.0], &[1.0, 0.0]]);
        assert_eq!(assign(&p, &c).unwrap().0, vec![0, 2, 1]);
    }

    #[test]
    fn assign_matches_exhaustive_scan() {
        let mut rng = SeedStream::new(8).rng();
        for _ in 0..20 {
            let p = Points::from_flat((0..40).map(|_| rng.random_range(0.0..1.0)).collect(), 2).unwrap();
            let c = Points::from_flat((0..8).map(|_| rng.random_range(0.0..1.0)).collect(), 2).unwrap();
            let got = assign(&p, &CenterSet::new(c.clone()).unwrap()).unwrap();
            for (i, row) in p.rows().enumerate() {
                let ds: Vec<f64> = c.rows().map(|cr| sq_dist(row, cr)).collect();
                let min = ds.iter().cloned().fold(f64::INFINITY, f64::min);
                let first = ds.iter().position(|d| *d == min).unwrap();
                assert_eq!(got.0[i], first);
            }
        }
    }

    #[test]
    fn seeding_support_exhaustion() {
        let data = WeightedPoints::new(pts(&[&[0.0], &[1.0], &[5.0], &[9.0]]), vec![1.0, 0.0, 2.0, 3.0]).unwrap();
        let mut rng = SeedStream::new(1).rng();
        let c = weighted_kmeans_pp_seed(&data, 3, &mut rng).unwrap();
        let mut got: Vec<f64> = c.iter().map(|r| r[0]).collect();
        got.sort_by(f64::total_cmp);
        assert_eq!(got, vec![0.0, 5.0, 9.0]);
    }

    #[test]
    fn seeding_single_positive_weight() {
        let data = WeightedPoints::new(pts(&[&[0.0], &[7.0], &[3.0]]), vec![0.0, 1.0, -2.0]).unwrap();
        let c = weighted_kmeans_pp_seed(&data, 1, &mut SeedStream::new(2).rng()).unwrap();
        assert_eq!(c.center(0), &[7.0]);
        let zero = WeightedPoints::new(pts(&[&[0.0]]), vec![0.0]).unwrap();
        assert!(matches!(weighted_kmeans_pp_seed(&zero, 1, &mut SeedStream::new(2).rng()), Err(Error::ZeroWeights)));
    }

    #[test]
    fn seeding_law_matches_w_d2_proportions() {
        // points 0, 1, 4 with weights 1, 2, 1; k = 2
        // P(first = i) = w_i / 4; P(second = j | first = i) = w_j d_ij^2 / sum
        let data = WeightedPoints::new(pts(&[&[0.0], &[1.0], &[4.0]]), vec![1.0, 2.0, 1.0]).unwrap();
        let x = [0.0, 1.0, 4.0];
        let w = [1.0, 2.0, 1.0];
        let mut analytic = [[0.0; 3]; 3];
        for i in 0..3 {
            let tot: f64 = (0..3).map(|j| w[j] * (x[i] - x[j]) * (x[i] - x[j])).sum();
            for j in 0..3 {
                analytic[i][j] = w[i] / 4.0 * w[j] * (x[i] - x[j]).powi(2) / tot;
            }
        }
        let trials = 100_000;
        let mut counts = [[0usize; 3]; 3];
        let mut rng = SeedStream::new(77).rng();
        for _ in 0..trials {
            let c = weighted_kmeans_pp_seed(&data, 2, &mut rng).unwrap();
            let i = x.iter().position(|v| *v == c.center(0)[0]).unwrap();
            let j = x.iter().position(|v| *v == c.center(1)[0]).unwrap();
            counts[i][j] += 1;
        }
        for i in 0..3 {
            for j in 0..3 {
                let freq = counts[i][j] as f64 / trials as f64;
                assert!((freq - analytic[i][j]).abs() < 0.01, "({i},{j}) {freq} vs {}", analytic[i][j]);
            }
        }
    }

    #[test]
    fn lloyd_weighted_mean() {
        let data = WeightedPoints::new(pts(&[&[0.0], &[10.0]]), vec![3.0, 1.0]).unwrap();
        let run = weighted_lloyd(&data, &centers(&[&[7.0]]), LloydParams::default()).unwrap();
        assert_eq!(run.centers.center(0), &[2.5]);
    }

    #[test]
    fn lloyd_fixed_point() {
        let data = WeightedPoints::unit(pts(&[&[0.0], &[1.0], &[9.0], &[10.0]]));
        let opt = centers(&[&[0.5], &[9.5]]);
        let run = weighted_lloyd(&data, &opt, LloydParams::default()).unwrap();
        assert_eq!(run.centers, opt);
        assert_eq!(run.iterations, 1);
    }

    #[test]
    fn lloyd_keeps_empty_cluster_center() {
        let data = WeightedPoints::unit(pts(&[&[0.0], &[1.0]]));
        let run = weighted_lloyd(&data, &centers(&[&[0.2], &[100.0]]), LloydParams::default()).unwrap();
        assert_eq!(run.centers.center(1), &[100.0]);
        assert_eq!(run.centers.center(0), &[0.5]);
    }

    #[test]
    fn brute_force_examples() {
        let (_, c) = brute_force_kmeans(&pts(&[&[0.0], &[3.0]]), 2).unwrap();
        assert_eq!(c, 0.0);
        let (cs, c) = brute_force_kmeans(&pts(&[&[0.0], &[1.0], &[9.0], &[10.0]]), 2).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
        let mut v: Vec<f64> = cs.iter().map(|r| r[0]).collect();
        v.sort_by(f64::total_cmp);
        assert_eq!(v, vec![0.5, 9.5]);
        let big = Points::from_flat(vec![0.0; 13], 1).unwrap();
        assert!(brute_force_kmeans(&big, 2).is_err());
        assert!(brute_force_kmeans(&pts(&[&[0.0]]), 4).is_err());
    }

    #[test]
    fn oracle_dominates_lloyd() {
        let mut rng = SeedStream::new(21).rng();
        for t in 0..30 {
            let p = Points::from_flat((0..16).map(|_| rng.random_range(-5.0..5.0)).collect(), 2).unwrap();
            let (_, opt) = brute_force_kmeans(&p, 2).unwrap();
            let (_, got) = weighted_kmeans(&WeightedPoints::unit(p), 2, KMeansParams { restarts: 3, ..Default::default() }, SeedStream::new(t)).unwrap();
            assert!(opt <= got + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn lloyd_cost_is_monotone(
            xs in prop::collection::vec(-50.0f64..50.0, 6..60),
            ws in prop::collection::vec(-1.0f64..5.0, 30),
            k in 1usize..5,
            seed in 0u64..1000,
        ) {
            let p = Points::from_flat(xs.clone(), 2).unwrap_or_else(|_| Points::from_flat(xs[..xs.len() / 2 * 2].to_vec(), 2).unwrap());
            let n = p.len();
            let mut w: Vec<f64> = (0..n).map(|i| ws[i % ws.len()]).collect();
            w[0] = 1.0;
            let data = WeightedPoints::new(p, w).unwrap();
            let init = weighted_kmeans_pp_seed(&data, k, &mut SeedStream::new(seed).rng()).unwrap();
            let run = weighted_lloyd(&data, &init, LloydParams { max_iters: 50, tol: 0.0 }).unwrap();
            for pair in run.costs.windows(2) {
                prop_assert!(pair[1] <= pair[0] + 1e-12 * (1.0 + pair[0]));
            }
        }

        #[test]
        fn cost_scales_quadratically(xs in prop::collection::vec(-10.0f64..10.0, 8), c in 0.1f64..10.0) {
            let p = Points::from_flat(xs.clone(), 1).unwrap();
            let scaled = Points::from_flat(xs.iter().map(|x| x * c).collect(), 1).unwrap();
            let (_, a) = brute_force_kmeans(&p, 2).unwrap();
            let (_, b) = brute_force_kmeans(&scaled, 2).unwrap();
            prop_assert!((b - c * c * a).abs() <= 1e-9 * (1.0 + b));
        }
    }
}
