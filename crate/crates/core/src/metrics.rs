//! Finite-photon Monte Carlo, distortion and fault-tolerance figures, and
//! parameter sweeps.
//!
//! Each basis `l` receives a fixed allocation `n_l` and detects
//! `N_l ~ Binomial(n_l, P_l)`. Draws come from a ChaCha8 stream keyed by
//! `(seed, trial, l)`, so any trial can be regenerated alone and parallel runs
//! match sequential ones exactly.
//!
//! Per trial the deviation is `Δφ = φ̃ − χ_target·φ`, where `χ_target` is the
//! channel slope for an uncorrected decode and 1 for a flip-corrected one.
//! The total error `φ̃ − φ` drives `d_MSE`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::channels::{noise_params, FlipKind, KrausChannel};
use crate::codec::{
    decode, encode, estimate_chi_from_extended, flip_correction, probabilities, BasisSet, CountVector, DecodeResult,
    Ensemble, Observation,
};
use crate::epr::{
    coincidence_probabilities, decode_epr, encode_epr, estimate_chi_from_extended_epr, pair_quadratures, transmit,
    CoincidenceBasisSet,
};
use crate::error::{Error, Result};

/// Photon budget and trial count for shot-noise runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    total_photons: u64,
    allocation: Vec<f64>,
    trials: u64,
    seed: u64,
}

impl SamplingPlan {
    /// Equal share of `total_photons` per basis.
    pub fn uniform(total_photons: u64, bases: usize, trials: u64, seed: u64) -> Result<Self> {
        if bases == 0 {
            return Err(Error::Usage("at least one basis".into()));
        }
        Self::new(total_photons, vec![1.0 / bases as f64; bases], trials, seed)
    }

    /// `allocation` sums to 1 within `1e-12`; every `round(fraction·N) ≥ 1`.
    pub fn new(total_photons: u64, allocation: Vec<f64>, trials: u64, seed: u64) -> Result<Self> {
        if total_photons == 0 {
            return Err(Error::Usage("total photon number must be positive".into()));
        }
        if trials == 0 {
            return Err(Error::Usage("trial count must be positive".into()));
        }
        if allocation.is_empty() || allocation.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(Error::Usage("allocation fractions must be finite and nonnegative".into()));
        }
        let sum: f64 = allocation.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Usage(format!("allocation sums to {sum}")));
        }
        let plan = SamplingPlan {
            total_photons,
            allocation,
            trials,
            seed,
        };
        if let Some(l) = plan.allocations().iter().position(|&n| n == 0) {
            return Err(Error::Usage(format!("basis {l} rounds to zero photons")));
        }
        Ok(plan)
    }

    pub fn total_photons(&self) -> u64 {
        self.total_photons
    }

    pub fn allocation(&self) -> &[f64] {
        &self.allocation
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `n_l = round(fraction_l · N)`.
    pub fn allocations(&self) -> Vec<u64> {
        self.allocation
            .iter()
            .map(|f| (f * self.total_photons as f64).round() as u64)
            .collect()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Shot-noise sampling or exact probabilities.
#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    Shots(SamplingPlan),
    Exact,
}

impl Mode {
    pub fn trials(&self) -> u64 {
        match self {
            Mode::Shots(p) => p.trials(),
            Mode::Exact => 1,
        }
    }
}

/// Detector stream for basis `basis` of trial `trial`.
pub fn trial_rng(seed: u64, trial: u64, basis: usize) -> ChaCha8Rng {
    debug_assert!(basis < 8 && trial < 1 << 61);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((trial << 3) | basis as u64);
    rng
}

/// `N_l ~ Binomial(n_l, P_l)` for every basis of one trial.
pub fn sample_counts(probs: &[f64], plan: &SamplingPlan, trial: u64) -> Result<CountVector> {
    let alloc = plan.allocations();
    if probs.len() != alloc.len() {
        return Err(Error::InvalidCounts(format!(
            "{} probabilities for {} allocations",
            probs.len(),
            alloc.len()
        )));
    }
    let counts = probs
        .iter()
        .zip(&alloc)
        .enumerate()
        .map(|(l, (&p, &n))| {
            let dist = Binomial::new(n, p).map_err(|_| Error::InvalidCounts(format!("probability {p} at basis {l}")))?;
            Ok(dist.sample(&mut trial_rng(plan.seed(), trial, l)))
        })
        .collect::<Result<Vec<_>>>()?;
    CountVector::new(counts, alloc)
}

/// How the encoded state reaches the detectors.
#[derive(Debug, Clone, PartialEq)]
pub enum Link {
    /// One qubit per photon through one channel.
    Single(KrausChannel<f64>),
    /// Entangled pair; coincidence detection on both arms.
    Pair {
        signal: KrausChannel<f64>,
        reference: KrausChannel<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Detection {
    Single(BasisSet<f64>),
    Coincidence(CoincidenceBasisSet<f64>),
}

/// A fully specified transmission: source, link, detection and correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    link: Link,
    ensemble: Ensemble<f64>,
    detection: Detection,
    correction: Option<FlipKind>,
    chi: f64,
}

impl Experiment {
    /// Fails with [`Error::DegenerateChannel`] when the link carries no
    /// reference quadrature. A correction needs extended bases.
    pub fn new(link: Link, ensemble: Ensemble<f64>, bases: BasisSet<f64>, correction: Option<FlipKind>) -> Result<Self> {
        if correction.is_some() && !bases.has_extended() {
            return Err(Error::Usage("flip correction needs the extended bases".into()));
        }
        let (chi, detection) = match &link {
            Link::Single(ch) => (noise_params(ch)?.chi, Detection::Single(bases)),
            Link::Pair { signal, reference } => (
                pair_quadratures(signal, reference)?.chi,
                Detection::Coincidence(CoincidenceBasisSet::new(bases)?),
            ),
        };
        Ok(Experiment {
            link,
            ensemble,
            detection,
            correction,
            chi,
        })
    }

    pub fn link(&self) -> &Link {
        &self.link
    }

    pub fn ensemble(&self) -> &Ensemble<f64> {
        &self.ensemble
    }

    pub fn bases(&self) -> &BasisSet<f64> {
        match &self.detection {
            Detection::Single(b) => b,
            Detection::Coincidence(c) => c.signal(),
        }
    }

    pub fn correction(&self) -> Option<FlipKind> {
        self.correction
    }

    /// Channel slope `χ`.
    pub fn chi(&self) -> f64 {
        self.chi
    }

    /// Slope the decoder output is expected to follow.
    pub fn chi_target(&self) -> f64 {
        if self.correction.is_some() {
            1.0
        } else {
            self.chi
        }
    }

    pub fn n_bases(&self) -> usize {
        self.bases().len()
    }

    pub fn probabilities(&self, phi: f64) -> Result<Vec<f64>> {
        match (&self.link, &self.detection) {
            (Link::Single(ch), Detection::Single(b)) => {
                let rho = crate::channels::apply(ch, &encode(&self.ensemble, phi)?)?;
                probabilities(&rho, b)
            }
            (Link::Pair { signal, reference }, Detection::Coincidence(c)) => {
                let rho = transmit(&encode_epr(&self.ensemble, phi)?, signal, reference)?;
                coincidence_probabilities(&rho, c)
            }
            _ => unreachable!("detection is built from the link"),
        }
    }

    pub fn decode(&self, obs: &Observation<f64>) -> Result<DecodeResult<f64>> {
        let chi_hat = match self.correction {
            None => None,
            Some(kind) => {
                let q = match self.detection {
                    Detection::Single(_) => estimate_chi_from_extended(obs, &self.ensemble)?,
                    Detection::Coincidence(_) => estimate_chi_from_extended_epr(obs, &self.ensemble)?,
                };
                Some(flip_correction(q, kind))
            }
        };
        match &self.detection {
            Detection::Single(b) => decode(obs, b, chi_hat),
            Detection::Coincidence(c) => decode_epr(obs, c, chi_hat),
        }
    }
}

/// One decoded trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    /// Transmitted phase.
    pub phi: f64,
    /// `None` in exact mode.
    pub counts: Option<CountVector>,
    /// Decode output with `delta_phi` filled, or why the trial failed.
    pub outcome: Result<DecodeResult<f64>>,
}

impl TrialRecord {
    pub fn is_decodable(&self) -> bool {
        self.outcome.is_ok()
    }

    pub fn phi_tilde(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|r| r.phi_tilde)
    }

    /// `φ̃ − χ_target·φ`.
    pub fn delta_phi(&self) -> Option<f64> {
        self.outcome.as_ref().ok().and_then(|r| r.delta_phi)
    }

    /// `φ̃ − φ`.
    pub fn total_error(&self) -> Option<f64> {
        self.phi_tilde().map(|p| p - self.phi)
    }
}

fn decode_trial(exp: &Experiment, phi: f64, trial: u64, obs: Observation<f64>) -> TrialRecord {
    let outcome = exp.decode(&obs).map(|r| r.with_truth(phi, exp.chi_target()));
    let counts = match obs {
        Observation::Counts(c) => Some(c),
        Observation::Exact(_) => None,
    };
    TrialRecord {
        trial,
        phi,
        counts,
        outcome,
    }
}

/// Runs every trial of `mode` at a fixed phase. The records are ordered by
/// trial index and independent of the thread count.
pub fn run_trials(exp: &Experiment, phi: f64, mode: &Mode) -> Result<Vec<TrialRecord>> {
    let probs = exp.probabilities(phi)?;
    match mode {
        Mode::Exact => Ok(vec![decode_trial(exp, phi, 0, Observation::Exact(probs))]),
        Mode::Shots(plan) => {
            check_plan(exp, plan)?;
            (0..plan.trials())
                .into_par_iter()
                .map(|t| Ok(decode_trial(exp, phi, t, Observation::Counts(sample_counts(&probs, plan, t)?))))
                .collect()
        }
    }
}

fn check_plan(exp: &Experiment, plan: &SamplingPlan) -> Result<()> {
    if plan.allocation().len() != exp.n_bases() {
        return Err(Error::Usage(format!(
            "allocation has {} entries for {} bases",
            plan.allocation().len(),
            exp.n_bases()
        )));
    }
    Ok(())
}

/// Decodes one sample per waveform point; sample `i` uses experiment `i`
/// and trial stream `i`.
pub fn run_waveform(samples: &[(Experiment, f64)], mode: &Mode) -> Vec<Result<TrialRecord>> {
    samples
        .par_iter()
        .enumerate()
        .map(|(i, (exp, phi))| {
            let probs = exp.probabilities(*phi)?;
            let obs = match mode {
                Mode::Exact => Observation::Exact(probs),
                Mode::Shots(plan) => {
                    check_plan(exp, plan)?;
                    Observation::Counts(sample_counts(&probs, plan, i as u64)?)
                }
            };
            Ok(decode_trial(exp, *phi, i as u64, obs))
        })
        .collect()
}

/// `E[(φ̃ − φ)²]` over decodable trials.
pub fn mse(records: &[TrialRecord]) -> Result<f64> {
    mean(records.iter().filter_map(|r| r.total_error()).map(|e| e * e))
}

/// `E[(retrieved − truth)²]` over time samples.
pub fn mse_waveform(retrieved: &[f64], truth: &[f64]) -> Result<f64> {
    if retrieved.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            left: retrieved.len(),
            right: truth.len(),
        });
    }
    mean(retrieved.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)))
}

fn mean(values: impl Iterator<Item = f64>) -> Result<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        Err(Error::NoData)
    } else {
        Ok(sum / n as f64)
    }
}

/// Sample mean and unbiased variance; variance is 0 for one value.
fn moments(values: &[f64]) -> Result<(f64, f64)> {
    let m = mean(values.iter().copied())?;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
    } else {
        0.0
    };
    Ok((m, var))
}

/// Fraction of all trials with `Δφ² < gamma`; undecodable trials count as
/// failures and an empty set gives 0.
pub fn fault_tolerance(records: &[TrialRecord], gamma: f64) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let ok = records
        .iter()
        .filter_map(|r| r.delta_phi())
        .filter(|d| d * d < gamma)
        .count();
    ok as f64 / records.len() as f64
}

/// `(k·s)²` with `s` the empirical standard deviation of `Δφ`.
pub fn gamma_from_standard_error(records: &[TrialRecord], multiple: f64) -> Result<f64> {
    let d: Vec<f64> = records.iter().filter_map(|r| r.delta_phi()).collect();
    let (_, var) = moments(&d)?;
    Ok(multiple * multiple * var)
}

/// Aggregate figures of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub d_mse: f64,
    pub f_t: f64,
    pub gamma: f64,
    pub mean_phi_tilde: f64,
    pub var_phi_tilde: f64,
    pub mean_delta_phi: f64,
    pub trials: u64,
    pub decodable: u64,
}

pub fn summarize(records: &[TrialRecord], gamma: f64) -> Result<RunSummary> {
    let tilde: Vec<f64> = records.iter().filter_map(|r| r.phi_tilde()).collect();
    let (mean_phi_tilde, var_phi_tilde) = moments(&tilde)?;
    Ok(RunSummary {
        d_mse: mse(records)?,
        f_t: fault_tolerance(records, gamma),
        gamma,
        mean_phi_tilde,
        var_phi_tilde,
        mean_delta_phi: mean(records.iter().filter_map(|r| r.delta_phi()))?,
        trials: records.len() as u64,
        decodable: tilde.len() as u64,
    })
}

/// First-order variance of `φ̃` from binomial noise on the four signal bases.
/// This is a linearization, not an exact law; it ignores the ratio tails.
pub fn delta_method_variance(probs: &[f64], allocations: &[u64], epsilon: f64, chi_used: f64) -> Result<f64> {
    if probs.len() < 4 || allocations.len() < 4 {
        return Err(Error::InvalidCounts("need four signal bases".into()));
    }
    let d14 = probs[0] - probs[3];
    let d23 = probs[1] - probs[2];
    let (num, den) = (d14 + d23, d23 - d14);
    if den.abs() < 1e-12 {
        return Err(Error::Undecodable(den));
    }
    let k = epsilon.tan() / chi_used;
    let xi = num / den;
    let dphi = k / (1.0 + (k * xi).powi(2));
    let g14 = (den + num) / (den * den);
    let g23 = (den - num) / (den * den);
    let grad = [g14, g23, -g23, -g14];
    let var_xi: f64 = (0..4)
        .map(|l| grad[l] * grad[l] * probs[l] * (1.0 - probs[l]) / allocations[l] as f64)
        .sum();
    Ok(dphi * dphi * var_xi)
}

/// Axes of a parameter sweep. Every `(N, ε, parameter)` point is sampled
/// once and scored against each `Γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub photons: Vec<u64>,
    pub epsilons: Vec<f64>,
    pub params: Vec<f64>,
    pub gammas: Vec<f64>,
}

impl SweepGrid {
    pub fn len(&self) -> usize {
        self.photons.len() * self.epsilons.len() * self.params.len() * self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// What a sweep point needs besides its grid coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub phi: f64,
    pub axis: f64,
    pub extended: bool,
    pub trials: u64,
    pub seed: u64,
    pub exact: bool,
}

/// One grid point and its outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub photons: u64,
    pub epsilon: f64,
    pub param: f64,
    pub gamma: f64,
    pub outcome: Result<RunSummary>,
}

/// Evaluates the grid in row-major order `N → ε → parameter → Γ`. `build`
/// turns a channel parameter and basis set into an experiment; failures of
/// one point are recorded and the sweep continues.
pub fn sweep<F>(grid: &SweepGrid, settings: &SweepSettings, build: F) -> Result<Vec<SweepRow>>
where
    F: Fn(f64, BasisSet<f64>) -> Result<Experiment>,
{
    if grid.is_empty() {
        return Err(Error::Usage("sweep grid is empty".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &photons in &grid.photons {
        for &epsilon in &grid.epsilons {
            for &param in &grid.params {
                let records = sweep_point(settings, photons, epsilon, param, &build);
                for &gamma in &grid.gammas {
                    let outcome = records.as_ref().map_err(Clone::clone).and_then(|r| summarize(r, gamma));
                    rows.push(SweepRow {
                        photons,
                        epsilon,
                        param,
                        gamma,
                        outcome,
                    });
                }
            }
        }
    }
    Ok(rows)
}

fn sweep_point<F>(settings: &SweepSettings, photons: u64, epsilon: f64, param: f64, build: &F) -> Result<Vec<TrialRecord>>
where
    F: Fn(f64, BasisSet<f64>) -> Result<Experiment>,
{
    let mut bases = crate::codec::make_bases(epsilon, settings.axis)?;
    if settings.extended {
        bases = bases.with_extended();
    }
    let exp = build(param, bases)?;
    let mode = if settings.exact {
        Mode::Exact
    } else {
        Mode::Shots(SamplingPlan::uniform(photons, exp.n_bases(), settings.trials, settings.seed)?)
    };
    run_trials(&exp, settings.phi, &mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::make_bases;
    use crate::qmath::Dim;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

    type Ch = KrausChannel<f64>;

    fn single(ch: Ch, eps: f64) -> Experiment {
        Experiment::new(Link::Single(ch), Ensemble::pure(FRAC_PI_2).unwrap(), make_bases(eps, FRAC_PI_2).unwrap(), None).unwrap()
    }

    fn shots(n: u64, trials: u64, seed: u64) -> Mode {
        Mode::Shots(SamplingPlan::uniform(n, 4, trials, seed).unwrap())
    }

    #[test]
    fn plan_validation() {
        assert!(SamplingPlan::new(0, vec![1.0], 1, 0).is_err());
        assert!(SamplingPlan::new(10, vec![1.0], 0, 0).is_err());
        assert!(SamplingPlan::new(10, vec![0.5, 0.4], 1, 0).is_err());
        assert!(SamplingPlan::new(10, vec![0.99, 0.01], 1, 0).is_err());
        let p = SamplingPlan::new(1000, vec![0.1, 0.2, 0.3, 0.4], 5, 9).unwrap();
        assert_eq!(p.allocations(), vec![100, 200, 300, 400]);
    }

    #[test]
    fn degenerate_probabilities() {
        let plan = SamplingPlan::uniform(400, 2, 1, 3).unwrap();
        for t in 0..50 {
            let c = sample_counts(&[0.0, 1.0], &plan, t).unwrap();
            assert_eq!(c.counts(), &[0, 200]);
        }
        assert!(sample_counts(&[0.5], &plan, 0).is_err());
    }

    #[test]
    fn binomial_moments() {
        let plan = SamplingPlan::uniform(400, 4, 1, 11).unwrap();
        let probs = [0.3, 0.5, 0.05, 0.9];
        let trials = 100_000u64;
        let draws: Vec<CountVector> = (0..trials).into_par_iter().map(|t| sample_counts(&probs, &plan, t).unwrap()).collect();
        for (l, &p) in probs.iter().enumerate() {
            let v: Vec<f64> = draws.iter().map(|c| c.counts()[l] as f64).collect();
            let (m, var) = moments(&v).unwrap();
            let (mu, sigma2) = (100.0 * p, 100.0 * p * (1.0 - p));
            assert!((m - mu).abs() < 4.0 * (sigma2 / trials as f64).sqrt(), "basis {l}: mean {m}");
            assert!((var / sigma2 - 1.0).abs() < 0.1, "basis {l}: var {var}");
        }
    }

    #[test]
    fn streams_are_keyed_and_independent() {
        use rand::RngCore;
        let a = trial_rng(5, 10, 2).next_u64();
        assert_eq!(a, trial_rng(5, 10, 2).next_u64());
        assert_ne!(a, trial_rng(5, 10, 3).next_u64());
        assert_ne!(a, trial_rng(5, 11, 2).next_u64());
        assert_ne!(a, trial_rng(6, 10, 2).next_u64());
    }

    #[test]
    fn runs_are_deterministic() {
        let exp = single(Ch::phase_damping(0.5).unwrap(), 0.05);
        let a = run_trials(&exp, 0.01, &shots(10_000, 500, 42)).unwrap();
        let b = run_trials(&exp, 0.01, &shots(10_000, 500, 42)).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| run_trials(&exp, 0.01, &shots(10_000, 500, 42)).unwrap());
        assert_eq!(a, c);
        let d = run_trials(&exp, 0.01, &shots(10_000, 500, 43)).unwrap();
        assert_ne!(a, d);
        assert!(a.iter().enumerate().all(|(i, r)| r.trial == i as u64));
    }

    #[test]
    fn exact_mode_matches_codec() {
        let exp = single(Ch::bit_flip(0.2).unwrap(), 0.05);
        let rec = run_trials(&exp, 0.02, &Mode::Exact).unwrap();
        assert_eq!(rec.len(), 1);
        let b = make_bases(0.05, FRAC_PI_2).unwrap();
        let rho = crate::channels::apply(&Ch::bit_flip(0.2).unwrap(), &encode(&Ensemble::pure(FRAC_PI_2).unwrap(), 0.02).unwrap()).unwrap();
        let direct = decode(&Observation::Exact(probabilities(&rho, &b).unwrap()), &b, None).unwrap();
        assert_eq!(rec[0].phi_tilde().unwrap().to_bits(), direct.phi_tilde.to_bits());
        assert!((rec[0].delta_phi().unwrap() - (direct.phi_tilde - 0.6 * 0.02)).abs() < 1e-15);
    }

    #[test]
    fn exact_dephasing_has_vanishing_distortion() {
        for ch in [Ch::phase_damping(0.5).unwrap(), Ch::depolarizing(0.7).unwrap(), Ch::amplitude_damping(0.3).unwrap()] {
            let rec = run_trials(&single(ch, 0.05), 0.01, &Mode::Exact).unwrap();
            assert!(mse(&rec).unwrap() < 1e-20);
            assert!(rec[0].delta_phi().unwrap().abs() < 1e-12);
        }
    }

    fn fake(phi: f64, tilde: Option<f64>) -> TrialRecord {
        TrialRecord {
            trial: 0,
            phi,
            counts: None,
            outcome: match tilde {
                Some(t) => Ok(DecodeResult {
                    xi: 0.0,
                    phi_tilde: t,
                    chi_used: 1.0,
                    chi_exceeds_unity: false,
                    delta_phi: Some(t - phi),
                }),
                None => Err(Error::Undecodable(0.0)),
            },
        }
    }

    #[test]
    fn mse_definitions() {
        let b = 0.003;
        let rec: Vec<_> = [0.0, 0.01, -0.02].iter().map(|&p| fake(p, Some(p + b))).collect();
        assert!((mse(&rec).unwrap() - b * b).abs() < 1e-18);
        assert_eq!(mse(&[fake(0.0, None), fake(0.1, None)]), Err(Error::NoData));
        assert!((mse_waveform(&[0.1, 0.2], &[0.1, 0.0]).unwrap() - 0.02).abs() < 1e-17);
        assert!(mse_waveform(&[0.1], &[0.1, 0.0]).is_err());
        assert_eq!(mse_waveform(&[], &[]), Err(Error::NoData));
    }

    #[test]
    fn fault_tolerance_limits() {
        let rec = vec![fake(0.0, Some(0.01)), fake(0.0, Some(-0.02)), fake(0.0, None), fake(0.0, Some(0.001))];
        assert_eq!(fault_tolerance(&rec, f64::INFINITY), 0.75);
        assert_eq!(fault_tolerance(&rec, 1e-300), 0.0);
        assert_eq!(fault_tolerance(&rec, 1.5e-4), 0.5);
        assert_eq!(fault_tolerance(&[], 1.0), 0.0);
        let s = summarize(&rec, 1.5e-4).unwrap();
        assert_eq!((s.trials, s.decodable), (4, 3));
        assert_eq!(s.f_t, 0.5);
    }

    #[test]
    fn three_sigma_threshold_covers_gaussian_mass() {
        let exp = single(Ch::phase_damping(0.5).unwrap(), 0.05);
        let rec = run_trials(&exp, 0.01, &shots(1_000_000, 20_000, 7)).unwrap();
        let gamma = gamma_from_standard_error(&rec, 3.0).unwrap();
        let ft = fault_tolerance(&rec, gamma);
        assert!((ft - 0.997).abs() < 0.002, "F_t = {ft}");
    }

    #[test]
    fn fault_tolerance_is_monotone_in_gamma() {
        let exp = single(Ch::phase_damping(0.5).unwrap(), 0.05);
        let rec = run_trials(&exp, 0.01, &shots(10_000, 2_000, 1)).unwrap();
        let mut last = 0.0;
        for k in 0..200 {
            let ft = fault_tolerance(&rec, 1e-9 * 1.1f64.powi(k));
            assert!(ft >= last);
            last = ft;
        }
    }

    #[test]
    fn variance_scales_inversely_with_photons() {
        let exp = single(Ch::identity(Dim::Two), 0.2);
        let var = |n| summarize(&run_trials(&exp, 0.01, &shots(n, 10_000, 3)).unwrap(), 1.0).unwrap().var_phi_tilde;
        let ratio = var(10_000) / var(1_000_000);
        assert!((ratio / 100.0 - 1.0).abs() < 0.15, "ratio {ratio}");
    }

    #[test]
    fn delta_method_tracks_empirical_variance() {
        let exp = single(Ch::phase_damping(0.3).unwrap(), 0.1);
        let plan = SamplingPlan::uniform(1_000_000, 4, 20_000, 5).unwrap();
        let probs = exp.probabilities(0.01).unwrap();
        let predicted = delta_method_variance(&probs, &plan.allocations(), 0.1, 1.0).unwrap();
        let s = summarize(&run_trials(&exp, 0.01, &Mode::Shots(plan)).unwrap(), 1.0).unwrap();
        assert!((s.var_phi_tilde / predicted - 1.0).abs() < 0.05, "{} vs {predicted}", s.var_phi_tilde);
    }

    #[test]
    fn small_signal_estimates_are_unbiased() {
        let mut catalog = Vec::new();
        for p in [0.1, 0.5] {
            catalog.push(Ch::phase_damping(p).unwrap());
            catalog.push(Ch::phase_flip(p).unwrap());
            catalog.push(Ch::bit_flip(p).unwrap());
            catalog.push(Ch::bit_phase_flip(p).unwrap());
            catalog.push(Ch::amplitude_damping(p).unwrap());
            catalog.push(Ch::depolarizing(p).unwrap());
            catalog.push(Ch::rtn(1.0, 2.0, p).unwrap());
        }
        let phi = 0.01;
        for ch in catalog {
            let name = ch.name().to_string();
            let exp = match Experiment::new(Link::Single(ch), Ensemble::pure(FRAC_PI_2).unwrap(), make_bases(0.2, FRAC_PI_2).unwrap(), None) {
                Ok(e) => e,
                Err(e) => {
                    // Full phase flip and full bit-phase flip erase the reference quadrature.
                    assert_eq!(e, Error::DegenerateChannel, "{name}");
                    continue;
                }
            };
            let rec = run_trials(&exp, phi, &shots(1_000_000, 100_000, 17)).unwrap();
            let s = summarize(&rec, 1.0).unwrap();
            let se = (s.var_phi_tilde / s.decodable as f64).sqrt();
            let want = (exp.chi() * phi.tan()).atan();
            assert!((s.mean_phi_tilde - want).abs() < 4.0 * se, "{name}: {} vs {want} (se {se})", s.mean_phi_tilde);
            assert!((want - exp.chi() * phi).abs() < 1e-6);
        }
    }

    #[test]
    fn corrected_flip_runs_target_the_bare_signal() {
        let b = make_bases(0.05, FRAC_PI_2).unwrap().with_extended();
        let ens = Ensemble::pure(FRAC_PI_3).unwrap();
        let exp = Experiment::new(Link::Single(Ch::bit_flip(0.2).unwrap()), ens.clone(), b.clone(), Some(FlipKind::BitFlip)).unwrap();
        assert_eq!(exp.chi_target(), 1.0);
        let rec = run_trials(&exp, 0.02, &Mode::Exact).unwrap();
        assert!(rec[0].delta_phi().unwrap().abs() < 1e-10);
        let no_ext = make_bases(0.05, FRAC_PI_2).unwrap();
        assert!(Experiment::new(Link::Single(Ch::bit_flip(0.2).unwrap()), ens, no_ext, Some(FlipKind::BitFlip)).is_err());
    }

    #[test]
    fn pair_link_runs() {
        let b = make_bases(0.05, FRAC_PI_2).unwrap();
        let link = Link::Pair {
            signal: Ch::phase_damping(0.4).unwrap(),
            reference: Ch::bit_flip(0.1).unwrap(),
        };
        let exp = Experiment::new(link, Ensemble::pure(FRAC_PI_2).unwrap(), b, None).unwrap();
        assert!(run_trials(&exp, 0.01, &Mode::Exact).unwrap()[0].delta_phi().unwrap().abs() < 1e-12);
        let rec = run_trials(&exp, 0.01, &shots(100_000, 200, 2)).unwrap();
        assert!(mse(&rec).unwrap() < 1e-3);
    }

    #[test]
    fn waveform_runs_use_one_stream_per_sample() {
        let exp = single(Ch::phase_damping(0.2).unwrap(), 0.05);
        let samples: Vec<_> = (0..20).map(|i| (exp.clone(), 0.01 * (i as f64 * 0.3).sin())).collect();
        let exact: Vec<_> = run_waveform(&samples, &Mode::Exact).into_iter().map(|r| r.unwrap()).collect();
        for (r, (_, phi)) in exact.iter().zip(&samples) {
            assert!((r.phi_tilde().unwrap() - phi).abs() < 1e-12);
        }
        let mode = shots(100_000, 1, 8);
        let a = run_waveform(&samples, &mode);
        assert_eq!(a, run_waveform(&samples, &mode));
    }

    #[test]
    fn sweep_composes_run_and_summary() {
        let grid = SweepGrid {
            photons: vec![10_000],
            epsilons: vec![0.05],
            params: vec![0.5],
            gammas: vec![1e-4],
        };
        let settings = SweepSettings {
            phi: 0.01,
            axis: FRAC_PI_2,
            extended: false,
            trials: 300,
            seed: 4,
            exact: false,
        };
        let build = |p: f64, b: BasisSet<f64>| Experiment::new(Link::Single(Ch::phase_damping(p)?), Ensemble::pure(FRAC_PI_2)?, b, None);
        let rows = sweep(&grid, &settings, build).unwrap();
        assert_eq!(rows.len(), 1);
        let exp = single(Ch::phase_damping(0.5).unwrap(), 0.05);
        let direct = summarize(&run_trials(&exp, 0.01, &shots(10_000, 300, 4)).unwrap(), 1e-4).unwrap();
        assert_eq!(rows[0].outcome.as_ref().unwrap(), &direct);

        let bad = SweepGrid {
            params: vec![0.2, 1.5],
            ..grid.clone()
        };
        let rows = sweep(&bad, &settings, build).unwrap();
        assert!(rows[0].outcome.is_ok());
        assert!(matches!(rows[1].outcome, Err(Error::ParameterOutOfRange { .. })));
        let empty = SweepGrid { gammas: vec![], ..grid };
        assert!(sweep(&empty, &settings, build).is_err());
    }
}
