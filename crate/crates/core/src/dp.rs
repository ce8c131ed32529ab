//! Noise mechanisms, sensitivity clipping and budget composition.
//!
//! Gaussian noise uses `sigma = sqrt(2 ln(1.25/delta)) * S / epsilon` for an
//! L2 sensitivity `S`; Laplace noise uses scale `S / epsilon` for an L1
//! sensitivity. Normal draws come from the ziggurat sampler of `rand_distr`
//! and Laplace draws from the inverse CDF of a uniform, both fed by a
//! [`SeedStream`](crate::rng::SeedStream) generator.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0) || epsilon.is_nan() {
            return Err(Error::InvalidPrivacy(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidPrivacy(format!("delta must lie in [0, 1), got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivity {
    pub value: f64,
    pub norm: NormKind,
}

impl Sensitivity {
    pub fn l1(value: f64) -> Self {
        Self { value, norm: NormKind::L1 }
    }

    pub fn l2(value: f64) -> Self {
        Self { value, norm: NormKind::L2 }
    }
}

pub fn gaussian_sigma(params: PrivacyParams, s: Sensitivity) -> Result<f64> {
    if s.norm != NormKind::L2 {
        return Err(Error::InvalidArgument("Gaussian mechanism needs an L2 sensitivity".into()));
    }
    if params.delta <= 0.0 {
        return Err(Error::InvalidPrivacy("Gaussian mechanism is undefined for delta = 0".into()));
    }
    if !(params.epsilon > 0.0) {
        return Err(Error::InvalidPrivacy("epsilon must be positive".into()));
    }
    if !(s.value > 0.0) {
        return Err(Error::InvalidArgument("sensitivity must be positive".into()));
    }
    Ok((2.0 * (1.25 / params.delta).ln()).sqrt() * s.value / params.epsilon)
}

pub fn laplace_scale(epsilon: f64, s: Sensitivity) -> Result<f64> {
    if s.norm != NormKind::L1 {
        return Err(Error::InvalidArgument("Laplace mechanism needs an L1 sensitivity".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidPrivacy("epsilon must be positive".into()));
    }
    if !(s.value > 0.0) {
        return Err(Error::InvalidArgument("sensitivity must be positive".into()));
    }
    Ok(s.value / epsilon)
}

pub fn sample_laplace<R: Rng + ?Sized>(b: f64, rng: &mut R) -> f64 {
    // u uniform on (-1/2, 1/2); reject the single point where ln(0) would occur.
    loop {
        let r: f64 = rng.random();
        if r > 0.0 {
            let u = r - 0.5;
            return -b * u.signum() * (1.0 - 2.0 * u.abs()).ln();
        }
    }
}

pub fn add_gaussian_noise<R: Rng + ?Sized>(v: &[f64], sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    Ok(v.iter()
        .map(|x| {
            let z: f64 = rng.sample(StandardNormal);
            x + sigma * z
        })
        .collect())
}

pub fn add_laplace_noise<R: Rng + ?Sized>(x: f64, b: f64, rng: &mut R) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::InvalidArgument(format!("Laplace scale must be positive, got {b}")));
    }
    Ok(x + sample_laplace(b, rng))
}

/// `d x d` symmetric matrix (row-major) with iid `N(0, sigma^2)` on and above
/// the diagonal, mirrored below.
pub fn symmetric_gaussian_matrix<R: Rng + ?Sized>(d: usize, sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        for j in i..d {
            let z: f64 = rng.sample(StandardNormal);
            m[i * d + j] = sigma * z;
            m[j * d + i] = m[i * d + j];
        }
    }
    Ok(m)
}

pub fn clip_l2(v: &[f64], bound: f64) -> Vec<f64> {
    let n = crate::points::norm(v);
    if n <= bound {
        v.to_vec()
    } else {
        let s = bound / n;
        v.iter().map(|x| x * s).collect()
    }
}

/// L1 analogue of [`clip_l2`], used to bound per-client histogram contributions.
pub fn clip_l1(v: &[f64], bound: f64) -> Vec<f64> {
    let n: f64 = v.iter().map(|x| x.abs()).sum();
    if n <= bound {
        v.to_vec()
    } else {
        let s = bound / n;
        v.iter().map(|x| x * s).collect()
    }
}

/// A calibrated additive mechanism, or the non-private bypass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mechanism {
    Gaussian { sigma: f64 },
    Laplace { scale: f64 },
    /// Noise disabled (the epsilon = infinity limit); no sampling happens at all.
    Disabled,
}

impl Mechanism {
    pub fn perturb<R: Rng + ?Sized>(&self, v: &mut [f64], rng: &mut R) {
        match *self {
            Mechanism::Gaussian { sigma } => {
                for x in v.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *x += sigma * z;
                }
            }
            Mechanism::Laplace { scale } => {
                for x in v.iter_mut() {
                    *x += sample_laplace(scale, rng);
                }
            }
            Mechanism::Disabled => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry {
    pub label: String,
    pub params: PrivacyParams,
}

/// Append-only record of every budget charge made during a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BudgetLedger {
    entries: Vec<LedgerEntry>,
}

impl BudgetLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, label: impl Into<String>, params: PrivacyParams) -> Result<()> {
        let label = label.into();
        if self.contains(&label) {
            return Err(Error::DuplicateLabel(label));
        }
        self.entries.push(LedgerEntry { label, params });
        Ok(())
    }

    pub fn contains(&self, label: &str) -> bool {
        self.entries.iter().any(|e| e.label == label)
    }

    pub fn get(&self, label: &str) -> Option<&LedgerEntry> {
        self.entries.iter().find(|e| e.label == label)
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries appended after the first `from` ones.
    pub fn since(&self, from: usize) -> BudgetLedger {
        BudgetLedger { entries: self.entries[from.min(self.entries.len())..].to_vec() }
    }
}

pub fn compose_basic(ledger: &BudgetLedger) -> Result<PrivacyParams> {
    if ledger.is_empty() {
        return Err(Error::Empty("ledger"));
    }
    let (e, d) = ledger
        .entries()
        .iter()
        .fold((0.0, 0.0), |(e, d), x| (e + x.params.epsilon, d + x.params.delta));
    Ok(PrivacyParams { epsilon: e, delta: d })
}

/// Advanced composition for `s` identical `(epsilon, delta)` charges:
/// `eps' = sqrt(2 s ln(1/slack)) eps + s eps (e^eps - 1)`, `delta' = s delta + slack`.
pub fn compose_advanced(ledger: &BudgetLedger, delta_slack: f64) -> Result<PrivacyParams> {
    let first = ledger.entries().first().ok_or(Error::Empty("ledger"))?.params;
    if !(delta_slack > 0.0 && delta_slack < 1.0) {
        return Err(Error::InvalidPrivacy(format!("delta slack must lie in (0, 1), got {delta_slack}")));
    }
    if ledger.entries().iter().any(|e| e.params != first) {
        return Err(Error::HeterogeneousLedger);
    }
    let s = ledger.len() as f64;
    let eps = first.epsilon;
    Ok(PrivacyParams {
        epsilon: (2.0 * s * (1.0 / delta_slack).ln()).sqrt() * eps + s * eps * eps.exp_m1(),
        delta: s * first.delta + delta_slack,
    })
}

/// The reported run total: advanced composition when it applies and is
/// tighter in epsilon, basic composition otherwise.
pub fn reported_total(ledger: &BudgetLedger, delta_slack: f64) -> Result<PrivacyParams> {
    let basic = compose_basic(ledger)?;
    match compose_advanced(ledger, delta_slack) {
        Ok(adv) if adv.epsilon < basic.epsilon => Ok(adv),
        Ok(_) | Err(Error::HeterogeneousLedger) => Ok(basic),
        Err(e) => Err(e),
    }
}
