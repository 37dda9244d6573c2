//! Relative-phase encoding and postselected small-angle decoding.
//!
//! A phase `φ` is imprinted between `|0⟩` and `|1⟩` of a qubit ensemble, so the
//! encoded coherence is `ρ̃₀₁ = (Υ/2)·e^{−iφ}` with `Υ = Σ p_j sin θ_j`.
//! Detection uses four kets at relative phases `axis ± ε` and `axis ± ε + π`:
//!
//! ```text
//!     |φ1⟩ = (e^{−iε/2}|0⟩ + e^{i·axis} e^{iε/2}|1⟩)/√2
//!     |φ2⟩ = (e^{iε/2}|0⟩  + e^{i·axis} e^{−iε/2}|1⟩)/√2
//!     |φ3⟩ = (e^{iε/2}|0⟩  − e^{i·axis} e^{−iε/2}|1⟩)/√2
//!     |φ4⟩ = (e^{−iε/2}|0⟩ − e^{i·axis} e^{iε/2}|1⟩)/√2
//! ```
//!
//! `{φ1, φ4}` and `{φ2, φ3}` are orthogonal pairs. At the canonical axis `π/2`
//! the probabilities are
//!
//! ```text
//!     P1 = ½(1 − Υ sin(ε − φ))    P4 = ½(1 + Υ sin(ε − φ))
//!     P2 = ½(1 + Υ sin(ε + φ))    P3 = ½(1 − Υ sin(ε + φ))
//! ```
//!
//! and the composition
//!
//! ```text
//!     ξ = [(P1 − P4) + (P2 − P3)] / [(P4 − P1) + (P2 − P3)]
//! ```
//!
//! equals `χ·tan φ·cot ε` for any channel whose only noise sums are `B1, B2`,
//! so `Υ` and any pure attenuation cancel.

use num_complex::Complex;

use crate::channels::FlipKind;
use crate::error::{Error, Result};
use crate::qmath::{expectation, DensityState, Dim, Ket, Operator};
use crate::scalar::Real;

/// Largest phase accepted by the encoders.
pub const MAX_PHASE: f64 = 0.3;
/// Above this magnitude the small-signal approximation starts to degrade.
pub const WEAK_PHASE: f64 = 0.05;
/// Largest basis half-separation accepted by [`make_bases`].
pub const MAX_EPSILON: f64 = 0.2;

/// Whether `phi` is comfortably inside the small-signal regime.
pub fn is_weak_signal<T: Real>(phi: T) -> bool {
    phi.abs() <= T::lit(WEAK_PHASE)
}

pub(crate) fn check_phase<T: Real>(phi: T) -> Result<()> {
    if phi.is_finite() && phi.abs() <= T::lit(MAX_PHASE) {
        Ok(())
    } else {
        Err(Error::OutOfRegime(phi.as_f64()))
    }
}

/// Weighted mixture of `cos(θ/2)|0⟩ + sin(θ/2)|1⟩` states.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<T: Real> {
    components: Vec<(T, T)>,
    upsilon: T,
}

impl<T: Real> Ensemble<T> {
    /// `components` are `(weight, θ)` pairs; weights in `(0, 1]` summing to 1
    /// within `1e-12`, every `θ` strictly inside `(0, π)`.
    pub fn new(components: Vec<(T, T)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidEnsemble("no components".into()));
        }
        for &(w, theta) in &components {
            if !(w > T::zero() && w <= T::one()) {
                return Err(Error::InvalidEnsemble(format!("weight {w} outside (0, 1]")));
            }
            if !(theta > T::zero() && theta < T::PI()) {
                return Err(Error::InvalidEnsemble(format!("theta {theta} outside (0, pi)")));
            }
        }
        let total = components.iter().fold(T::zero(), |acc, c| acc + c.0);
        if (total - T::one()).abs() > T::tol(1e-12) {
            return Err(Error::InvalidEnsemble(format!("weights sum to {total}")));
        }
        let upsilon = components
            .iter()
            .fold(T::zero(), |acc, &(w, theta)| acc + w * theta.sin());
        Ok(Ensemble {
            components,
            upsilon,
        })
    }

    pub fn pure(theta: T) -> Result<Self> {
        Self::new(vec![(T::one(), theta)])
    }

    pub fn components(&self) -> &[(T, T)] {
        &self.components
    }

    /// `Σ p_j sin θ_j`, twice the encoded coherence magnitude.
    pub fn upsilon(&self) -> T {
        self.upsilon
    }

    /// `θ` of a single-component ensemble.
    pub fn pure_theta(&self) -> Option<T> {
        match self.components.as_slice() {
            [(_, theta)] => Some(*theta),
            _ => None,
        }
    }
}

/// `ρ̃ = Σ p_j |ψ̃_j⟩⟨ψ̃_j|`, `|ψ̃_j⟩ = cos(θ_j/2)|0⟩ + e^{iφ} sin(θ_j/2)|1⟩`.
pub fn encode<T: Real>(ens: &Ensemble<T>, phi: T) -> Result<DensityState<T>> {
    check_phase(phi)?;
    let half = T::lit(0.5);
    let mut m = Operator::zeros(Dim::Two);
    for &(w, theta) in ens.components() {
        let amps = [
            Complex::new((theta * half).cos(), T::zero()),
            Complex::from_polar((theta * half).sin(), phi),
        ];
        let ket = Ket::new(&amps)?;
        m = m.add(&Operator::outer(&ket).scale_real(w))?;
    }
    DensityState::new(m)
}

/// Four postselection kets, plus optional computational-basis extension.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet<T: Real> {
    epsilon: T,
    axis: T,
    kets: [Ket<T>; 4],
    extended: Option<[Ket<T>; 2]>,
}

/// Builds `|φ1..φ4⟩` for half-separation `epsilon ∈ (0, 0.2]` about `axis`.
/// `axis = π/2` gives the canonical kets with the factor `i` on `|1⟩`.
pub fn make_bases<T: Real>(epsilon: T, axis: T) -> Result<BasisSet<T>> {
    if !(epsilon > T::zero() && epsilon <= T::lit(MAX_EPSILON)) {
        return Err(Error::ParameterOutOfRange {
            name: "epsilon",
            value: epsilon.as_f64(),
            range: "(0, 0.2]",
        });
    }
    if !axis.is_finite() {
        return Err(Error::ParameterOutOfRange {
            name: "axis",
            value: axis.as_f64(),
            range: "finite",
        });
    }
    let half = T::lit(0.5);
    let s = T::FRAC_1_SQRT_2();
    let ket = |zero_phase: T, one_phase: T| {
        Ket::new(&[
            Complex::from_polar(s, zero_phase),
            Complex::from_polar(s, one_phase),
        ])
    };
    let e = epsilon * half;
    let pi = T::PI();
    let kets = [
        ket(-e, axis + e)?,
        ket(e, axis - e)?,
        ket(e, axis - e + pi)?,
        ket(-e, axis + e + pi)?,
    ];
    Ok(BasisSet {
        epsilon,
        axis,
        kets,
        extended: None,
    })
}

impl<T: Real> BasisSet<T> {
    /// Adds `|φ5⟩ = |0⟩` and `|φ6⟩ = |1⟩` for flip-noise estimation.
    pub fn with_extended(mut self) -> Self {
        self.extended = Some([
            Ket::basis(Dim::Two, 0).expect("dim 2"),
            Ket::basis(Dim::Two, 1).expect("dim 2"),
        ]);
        self
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn axis(&self) -> T {
        self.axis
    }

    pub fn kets(&self) -> &[Ket<T>; 4] {
        &self.kets
    }

    pub fn extended(&self) -> Option<&[Ket<T>; 2]> {
        self.extended.as_ref()
    }

    pub fn has_extended(&self) -> bool {
        self.extended.is_some()
    }

    /// All kets in detection order: four signal kets, then the extension.
    pub fn all_kets(&self) -> Vec<Ket<T>> {
        let mut v = self.kets.to_vec();
        if let Some(ext) = &self.extended {
            v.extend_from_slice(ext);
        }
        v
    }

    pub fn len(&self) -> usize {
        if self.extended.is_some() {
            6
        } else {
            4
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// `P_l = Tr[ρ|φ_l⟩⟨φ_l|]` for every ket in the set.
pub fn probabilities<T: Real>(rho: &DensityState<T>, bases: &BasisSet<T>) -> Result<Vec<T>> {
    bases.all_kets().iter().map(|k| expectation(rho, k)).collect()
}

/// Detected counts `N_l` out of allocations `n_l`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CountVector {
    counts: Vec<u64>,
    allocations: Vec<u64>,
}

impl CountVector {
    pub fn new(counts: Vec<u64>, allocations: Vec<u64>) -> Result<Self> {
        if counts.len() != allocations.len() {
            return Err(Error::InvalidCounts(format!(
                "{} counts for {} allocations",
                counts.len(),
                allocations.len()
            )));
        }
        for (l, (&got, &n)) in counts.iter().zip(&allocations).enumerate() {
            if n == 0 {
                return Err(Error::InvalidCounts(format!("basis {l} has no allocation")));
            }
            if got > n {
                return Err(Error::InvalidCounts(format!("basis {l}: {got} > {n}")));
            }
        }
        Ok(CountVector {
            counts,
            allocations,
        })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn allocations(&self) -> &[u64] {
        &self.allocations
    }

    /// `N = Σ n_l`.
    pub fn total(&self) -> u64 {
        self.allocations.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// `P̂_l = N_l / n_l`.
    pub fn frequencies<T: Real>(&self) -> Vec<T> {
        self.counts
            .iter()
            .zip(&self.allocations)
            .map(|(&k, &n)| T::lit(k as f64) / T::lit(n as f64))
            .collect()
    }
}

/// What the decoder sees: sampled counts, or exact probabilities standing in
/// for infinite photon number.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation<T> {
    Counts(CountVector),
    Exact(Vec<T>),
}

impl<T: Real> Observation<T> {
    pub fn frequencies(&self) -> Vec<T> {
        match self {
            Observation::Counts(c) => c.frequencies(),
            Observation::Exact(p) => p.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Observation::Counts(c) => c.len(),
            Observation::Exact(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn require_len(got: usize, want: usize) -> Result<()> {
    if got < want {
        Err(Error::InvalidCounts(format!("need {want} bases, got {got}")))
    } else {
        Ok(())
    }
}

/// The two orthogonal-pair contrasts `(P1 − P4 + P2 − P3, P4 − P1 + P2 − P3)`.
fn contrasts<T: Real>(f: &[T]) -> (T, T) {
    let d14 = f[0] - f[3];
    let d23 = f[1] - f[2];
    (d14 + d23, d23 - d14)
}

fn xi_from_frequencies<T: Real>(f: &[T]) -> Result<T> {
    require_len(f.len(), 4)?;
    let (num, den) = contrasts(f);
    if den.abs() < T::tol(1e-12) {
        return Err(Error::Undecodable(den.as_f64()));
    }
    Ok(num / den)
}

/// Composition ratio `ξ` over the first four bases.
pub fn compose_xi<T: Real>(obs: &Observation<T>) -> Result<T> {
    xi_from_frequencies(&obs.frequencies())
}

/// Slope estimate for flip-class noise from the extended populations,
/// `(P̂5 − P̂6)/cos θ`. Needs a single-component ensemble with `|cos θ| ≥ 0.1`.
pub fn estimate_chi_from_extended<T: Real>(obs: &Observation<T>, ens: &Ensemble<T>) -> Result<T> {
    let f = obs.frequencies();
    let cos_theta = extended_cos_theta(ens, f.len())?;
    Ok((f[4] - f[5]) / cos_theta)
}

pub(crate) fn extended_cos_theta<T: Real>(ens: &Ensemble<T>, observed: usize) -> Result<T> {
    let theta = ens.pure_theta().ok_or_else(|| {
        Error::Unsupported("population estimate needs a single-component ensemble".into())
    })?;
    if observed < 6 {
        return Err(Error::InvalidCounts(format!(
            "extended estimate needs 6 bases, got {observed}"
        )));
    }
    let c = theta.cos();
    if c.abs() < T::lit(0.1) {
        return Err(Error::IllConditioned(format!("|cos theta| = {} < 0.1", c.abs())));
    }
    Ok(c)
}

/// Decoder slope to divide out for a measured population contrast.
pub fn flip_correction<T: Real>(chi_hat: T, kind: FlipKind) -> T {
    kind.slope_from_population(chi_hat)
}

/// One decoded sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeResult<T> {
    pub xi: T,
    /// `arctan(ξ·tan ε / χ_used)`.
    pub phi_tilde: T,
    pub chi_used: T,
    /// Set when the divided slope exceeds one (bit-phase-flip correction).
    pub chi_exceeds_unity: bool,
    /// `φ̃ − χφ`; only filled when the transmitted phase is known.
    pub delta_phi: Option<T>,
}

impl<T: Real> DecodeResult<T> {
    /// Fills `delta_phi` against the transmitted phase scaled by `chi`.
    pub fn with_truth(mut self, phi: T, chi: T) -> Self {
        self.delta_phi = Some(self.phi_tilde - chi * phi);
        self
    }
}

pub(crate) fn decode_frequencies<T: Real>(f: &[T], epsilon: T, chi_hat: Option<T>) -> Result<DecodeResult<T>> {
    let xi = xi_from_frequencies(f)?;
    let chi_used = chi_hat.unwrap_or_else(T::one);
    if !chi_used.is_finite() || chi_used.abs() < T::tol(1e-12) {
        return Err(Error::IllConditioned(format!("correction factor {chi_used}")));
    }
    let phi_tilde = (xi * epsilon.tan() / chi_used).atan();
    Ok(DecodeResult {
        xi,
        phi_tilde,
        chi_used,
        chi_exceeds_unity: chi_used > T::one(),
        delta_phi: None,
    })
}

/// Retrieves `φ̃ = arctan(ξ / (cot ε · χ_used))`, `χ_used = chi_hat` or 1.
///
/// The arctangent undoes the `tan φ` of the exact ratio; dividing before it
/// keeps a corrected decode exact.
pub fn decode<T: Real>(obs: &Observation<T>, bases: &BasisSet<T>, chi_hat: Option<T>) -> Result<DecodeResult<T>> {
    decode_frequencies(&obs.frequencies(), bases.epsilon, chi_hat)
}

/// `ξ·tan ε`, the decoded slope-times-`tan φ` before any correction.
pub fn scaled_ratio<T: Real>(obs: &Observation<T>, bases: &BasisSet<T>) -> Result<T> {
    Ok(compose_xi(obs)? * bases.epsilon.tan())
}

/// One orthogonal pair, for decoding after the other pair has failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pair {
    /// `{φ1, φ4}`: `P1 − P4 = r·sin(φ − ε)`.
    OneFour,
    /// `{φ2, φ3}`: `P2 − P3 = r·sin(φ + ε)`.
    TwoThree,
}

impl Pair {
    fn contrast<T: Real>(self, f: &[T]) -> T {
        match self {
            Pair::OneFour => f[0] - f[3],
            Pair::TwoThree => f[1] - f[2],
        }
    }

    fn offset<T: Real>(self, epsilon: T) -> T {
        match self {
            Pair::OneFour => -epsilon,
            Pair::TwoThree => epsilon,
        }
    }
}

/// Received visibility `r` (encoded `Υ` times channel attenuation) from a
/// frame carrying the known phase `reference`.
pub fn calibrate_visibility<T: Real>(obs: &Observation<T>, bases: &BasisSet<T>, pair: Pair, reference: T) -> Result<T> {
    let f = obs.frequencies();
    require_len(f.len(), 4)?;
    let s = (reference + pair.offset(bases.epsilon)).sin();
    if s.abs() < T::tol(1e-12) {
        return Err(Error::IllConditioned("reference phase aligned with the pair".into()));
    }
    Ok(pair.contrast(&f) / s)
}

/// Single-pair decode `φ̂ = arcsin(contrast / r) − offset`.
pub fn decode_single_pair<T: Real>(obs: &Observation<T>, bases: &BasisSet<T>, pair: Pair, visibility: T) -> Result<T> {
    let f = obs.frequencies();
    require_len(f.len(), 4)?;
    if !(visibility.abs() > T::tol(1e-12)) {
        return Err(Error::IllConditioned(format!("visibility {visibility}")));
    }
    let x = pair.contrast(&f) / visibility;
    if x.abs() > T::one() + T::tol(1e-9) {
        return Err(Error::Undecodable(x.as_f64()));
    }
    Ok(x.max(-T::one()).min(T::one()).asin() - pair.offset(bases.epsilon))
}

/// Builds `(|0⟩ + e^{iα}|1⟩)/√2`.
pub fn phase_ket<T: Real>(alpha: T) -> Ket<T> {
    let s = T::FRAC_1_SQRT_2();
    Ket::new(&[Complex::new(s, T::zero()), Complex::from_polar(s, alpha)]).expect("normalized")
}

/// `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩` without the small-signal restriction.
pub fn phase_state<T: Real>(theta: T, phi: T) -> Result<DensityState<T>> {
    let half = T::lit(0.5);
    let k = Ket::new(&[
        Complex::new((theta * half).cos(), T::zero()),
        Complex::from_polar((theta * half).sin(), phi),
    ])?;
    Ok(DensityState::pure(&k))
}
