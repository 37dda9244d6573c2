//! Entangled-pair variant: the phase rides on `cos(θ/2)|00⟩ + e^{iφ} sin(θ/2)|11⟩`
//! and is read out in coincidence between a signal arm `s` and a reference arm `r`.
//!
//! Qubit `s` is the major tensor index throughout. Coincidence kets are
//! `|φ_l⟩_s ⊗ |+⟩_r`; for channels without population terms
//!
//! ```text
//!     P_l = ¼[1 + Υ·X_r·(X_s cos α_l cos φ + Y_s sin α_l sin φ)]
//! ```
//!
//! with `X = B1 + B2`, `Y = B1 − B2` per arm. The reference-arm factor is
//! common to every ket, so the decoded slope is `Y_s / X_s`. Equal channels on
//! both arms give the quadratures `B1² − B2²` and `(B1 + B2)²`.

use num_complex::Complex;

use crate::channels::{apply, noise_params, tensor_channel, KrausChannel};
use crate::codec::{check_phase, decode_frequencies, extended_cos_theta, phase_ket, BasisSet, DecodeResult, Ensemble, Observation};
use crate::error::{Error, Result};
use crate::qmath::{expectation, DensityState, Dim, Ket, Operator};
use crate::scalar::Real;

/// `Σ p_j |ψ_j⟩⟨ψ_j|`, `|ψ_j⟩ = cos(θ_j/2)|00⟩ + e^{iφ} sin(θ_j/2)|11⟩`.
pub fn encode_epr<T: Real>(ens: &Ensemble<T>, phi: T) -> Result<DensityState<T>> {
    check_phase(phi)?;
    let half = T::lit(0.5);
    let zero = Complex::new(T::zero(), T::zero());
    let mut m = Operator::zeros(Dim::Four);
    for &(w, theta) in ens.components() {
        let amps = [
            Complex::new((theta * half).cos(), T::zero()),
            zero,
            zero,
            Complex::from_polar((theta * half).sin(), phi),
        ];
        m = m.add(&Operator::outer(&Ket::new(&amps)?).scale_real(w))?;
    }
    DensityState::new(m)
}

/// Sends arm `s` through `signal` and arm `r` through `reference`.
pub fn transmit<T: Real>(rho: &DensityState<T>, signal: &KrausChannel<T>, reference: &KrausChannel<T>) -> Result<DensityState<T>> {
    apply(&tensor_channel(signal, reference)?, rho)
}

/// Coincidence kets `|φ_l⟩_s ⊗ |+⟩_r` built from a signal-arm basis set.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceBasisSet<T: Real> {
    signal: BasisSet<T>,
    kets: Vec<Ket<T>>,
}

impl<T: Real> CoincidenceBasisSet<T> {
    pub fn new(signal: BasisSet<T>) -> Result<Self> {
        let plus = phase_ket(T::zero());
        let kets = signal
            .all_kets()
            .iter()
            .map(|k| k.tensor(&plus))
            .collect::<Result<Vec<_>>>()?;
        Ok(CoincidenceBasisSet { signal, kets })
    }

    pub fn signal(&self) -> &BasisSet<T> {
        &self.signal
    }

    pub fn epsilon(&self) -> T {
        self.signal.epsilon()
    }

    pub fn kets(&self) -> &[Ket<T>] {
        &self.kets
    }

    pub fn len(&self) -> usize {
        self.kets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kets.is_empty()
    }
}

pub fn coincidence_probabilities<T: Real>(rho: &DensityState<T>, bases: &CoincidenceBasisSet<T>) -> Result<Vec<T>> {
    if rho.dim() != Dim::Four {
        return Err(Error::DimensionMismatch {
            left: rho.dim().size(),
            right: 4,
        });
    }
    bases.kets.iter().map(|k| expectation(rho, k)).collect()
}

/// Same composition and retrieval as the single-qubit decoder.
pub fn decode_epr<T: Real>(obs: &Observation<T>, bases: &CoincidenceBasisSet<T>, chi_hat: Option<T>) -> Result<DecodeResult<T>> {
    decode_frequencies(&obs.frequencies(), bases.epsilon(), chi_hat)
}

/// Signal-arm population contrast `(P5 − P6) / ((P5 + P6)·cos θ)`.
pub fn estimate_chi_from_extended_epr<T: Real>(obs: &Observation<T>, ens: &Ensemble<T>) -> Result<T> {
    let f = obs.frequencies();
    let cos_theta = extended_cos_theta(ens, f.len())?;
    let total = f[4] + f[5];
    if total.abs() < T::tol(1e-12) {
        return Err(Error::IllConditioned("no coincidences in the population bases".into()));
    }
    Ok((f[4] - f[5]) / (total * cos_theta))
}

/// Coincidence quadratures for a pair of arm channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairQuadratures<T> {
    /// `(B1s − B2s)(B1r + B2r)`.
    pub chi1: T,
    /// `(B1s + B2s)(B1r + B2r)`.
    pub chi2: T,
    pub chi: T,
}

pub fn pair_quadratures<T: Real>(signal: &KrausChannel<T>, reference: &KrausChannel<T>) -> Result<PairQuadratures<T>> {
    let s = noise_params(signal)?;
    let r = noise_params(reference)?;
    let chi1 = s.chi1 * r.chi2;
    let chi2 = s.chi2 * r.chi2;
    Ok(PairQuadratures {
        chi1,
        chi2,
        chi: chi1 / chi2,
    })
}
