//! Kraus-set noise channels and their eight-parameter characterization.
//!
//! Kraus elements of qubit channels are read in the fixed layout
//!
//! ```text
//!     E_k = [[a_k, b_k],
//!            [c_k, d_k]]
//! ```
//!
//! and the noise sums are taken over that layout:
//!
//! ```text
//!     A1 = Σ Re[a*c]   A2 = Σ Re[b*d]   A3 = Σ Im[a*c]   A4 = Σ Im[b*d]
//!     B1 = Σ Re[a*d]   B2 = Σ Re[b*c]   C1 = Σ Im[a*d]   C2 = Σ Im[b*c]
//! ```
//!
//! The catalog constructors (all parameters in `[0, 1]`):
//!
//! | constructor          | Kraus set                                                   |
//! |----------------------|-------------------------------------------------------------|
//! | `phase_damping(λ)`   | `diag(1, √(1−λ))`, `diag(0, √λ)`                            |
//! | `phase_flip(p)`      | `√(1−p)·I`, `√p·Z`                                          |
//! | `bit_flip(p)`        | `√(1−p)·I`, `√p·X`                                          |
//! | `bit_phase_flip(p)`  | `√(1−p)·I`, `√p·Y`                                          |
//! | `amplitude_damping(γ)` | `[[1,0],[0,√(1−γ)]]`, `[[0,√γ],[0,0]]`                    |
//! | `depolarizing(p)`    | `√(1−3p/4)·I`, `√(p/4)·X`, `√(p/4)·Y`, `√(p/4)·Z`           |
//! | `rtn(ν, a, t)`       | `√((1+g)/2)·I`, `√((1−g)/2)·Z`, `g` the telegraph coherence |
//!
//! Identically-zero Kraus elements are dropped on construction.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::qmath::{DensityState, Dim, Operator};
use crate::scalar::Real;

/// An ordered Kraus set satisfying `Σ E_k†E_k = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel<T: Real> {
    name: String,
    dim: Dim,
    operators: Vec<Operator<T>>,
}

fn check_unit<T: Real>(name: &'static str, value: T) -> Result<()> {
    if value >= T::zero() && value <= T::one() {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange {
            name,
            value: value.as_f64(),
            range: "[0, 1]",
        })
    }
}

fn re<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

impl<T: Real> KrausChannel<T> {
    /// Validates completeness within `1e-10` and the `dim²` length bound.
    pub fn new(name: impl Into<String>, operators: Vec<Operator<T>>) -> Result<Self> {
        let name = name.into();
        let invalid = |reason: String| Error::InvalidChannel {
            name: name.clone(),
            reason,
        };
        let dim = operators
            .first()
            .map(|op| op.dim())
            .ok_or_else(|| invalid("empty Kraus set".into()))?;
        if let Some(bad) = operators.iter().find(|op| op.dim() != dim) {
            return Err(invalid(format!(
                "mixed operator dimensions {} and {}",
                dim.size(),
                bad.dim().size()
            )));
        }
        let operators: Vec<_> = operators.into_iter().filter(|op| !op.is_zero()).collect();
        if operators.is_empty() {
            return Err(invalid("all Kraus elements vanish".into()));
        }
        if operators.len() > dim.size() * dim.size() {
            return Err(invalid(format!(
                "{} operators exceed the bound {}",
                operators.len(),
                dim.size() * dim.size()
            )));
        }
        let channel = KrausChannel {
            name,
            dim,
            operators,
        };
        let residual = channel.completeness_residual();
        if !(residual <= T::tol(1e-10)) {
            return Err(Error::InvalidChannel {
                name: channel.name,
                reason: format!("completeness residual {:e}", residual.as_f64()),
            });
        }
        Ok(channel)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn operators(&self) -> &[Operator<T>] {
        &self.operators
    }

    /// `max |Σ E_k†E_k − I|`.
    pub fn completeness_residual(&self) -> T {
        let sum = self
            .operators
            .iter()
            .map(|e| e.dagger().mat_mul(e).expect("uniform dim"))
            .fold(Operator::zeros(self.dim), |acc, m| acc.add(&m).expect("uniform dim"));
        sum.max_abs_diff(&Operator::identity(self.dim))
            .expect("uniform dim")
    }

    pub fn identity(dim: Dim) -> Self {
        KrausChannel {
            name: "identity".into(),
            dim,
            operators: vec![Operator::identity(dim)],
        }
    }

    pub fn phase_damping(lambda: T) -> Result<Self> {
        check_unit("lambda", lambda)?;
        let z = Complex::zero();
        let keep = Operator::qubit(Complex::one(), z, z, re((T::one() - lambda).sqrt()))?;
        let kick = Operator::qubit(z, z, z, re(lambda.sqrt()))?;
        Self::new("phase_damping", vec![keep, kick])
    }

    pub fn phase_flip(p: T) -> Result<Self> {
        Self::pauli_mix("phase_flip", p, Operator::pauli_z())
    }

    pub fn bit_flip(p: T) -> Result<Self> {
        Self::pauli_mix("bit_flip", p, Operator::pauli_x())
    }

    pub fn bit_phase_flip(p: T) -> Result<Self> {
        Self::pauli_mix("bit_phase_flip", p, Operator::pauli_y())
    }

    fn pauli_mix(name: &'static str, p: T, pauli: Operator<T>) -> Result<Self> {
        check_unit("p", p)?;
        let id = Operator::identity(Dim::Two).scale_real((T::one() - p).sqrt());
        Self::new(name, vec![id, pauli.scale_real(p.sqrt())])
    }

    pub fn amplitude_damping(gamma: T) -> Result<Self> {
        check_unit("gamma", gamma)?;
        let z = Complex::zero();
        let keep = Operator::qubit(Complex::one(), z, z, re((T::one() - gamma).sqrt()))?;
        let decay = Operator::qubit(z, re(gamma.sqrt()), z, z)?;
        Self::new("amplitude_damping", vec![keep, decay])
    }

    /// `ρ → (1 − p)ρ + p·I/2`.
    pub fn depolarizing(p: T) -> Result<Self> {
        check_unit("p", p)?;
        let quarter = T::lit(0.25);
        let id = Operator::identity(Dim::Two).scale_real((T::one() - T::lit(3.0) * p * quarter).sqrt());
        let w = (p * quarter).sqrt();
        Self::new(
            "depolarizing",
            vec![
                id,
                Operator::pauli_x().scale_real(w),
                Operator::pauli_y().scale_real(w),
                Operator::pauli_z().scale_real(w),
            ],
        )
    }

    /// Pure dephasing from symmetric random telegraph noise: switching rate
    /// `nu` per direction, phase rate `±coupling`, elapsed time `t`.
    ///
    /// Coherences are multiplied by [`rtn_coherence`], sign included.
    pub fn rtn(nu: T, coupling: T, t: T) -> Result<Self> {
        let g = rtn_coherence(nu, coupling, t)?;
        let half = T::lit(0.5);
        let id = Operator::identity(Dim::Two).scale_real(((T::one() + g) * half).sqrt());
        let z = Operator::pauli_z().scale_real(((T::one() - g) * half).sqrt());
        Self::new("rtn", vec![id, z])
    }

    /// Channel-equivalent Kraus set `F_i = Σ_k U[i][k]·E_k` for an isometry
    /// `U` with `m ≥ k` rows and `k` columns.
    pub fn remix(&self, isometry: &[Vec<Complex<T>>]) -> Result<Self> {
        let k = self.operators.len();
        if isometry.iter().any(|row| row.len() != k) {
            return Err(Error::Usage(format!("isometry rows must have {k} columns")));
        }
        for a in 0..k {
            for b in 0..k {
                let g = isometry
                    .iter()
                    .fold(Complex::<T>::zero(), |acc, row| acc + row[a].conj() * row[b]);
                let want = if a == b { T::one() } else { T::zero() };
                if (g - re(want)).norm() > T::tol(1e-10) {
                    return Err(Error::Usage("matrix is not an isometry".into()));
                }
            }
        }
        let ops = isometry
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&self.operators)
                    .fold(Operator::zeros(self.dim), |acc, (u, e)| {
                        acc.add(&e.scale(*u)).expect("uniform dim")
                    })
            })
            .collect();
        Self::new(self.name.clone(), ops)
    }

    /// `then ∘ self`: apply `self` first. The product Kraus set is
    /// re-compressed through the Choi matrix when it exceeds `dim²` elements.
    pub fn then(&self, then: &Self) -> Result<Self> {
        if self.dim != then.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim.size(),
                right: then.dim.size(),
            });
        }
        let mut ops = Vec::with_capacity(self.operators.len() * then.operators.len());
        for f in &then.operators {
            for e in &self.operators {
                ops.push(f.mat_mul(e)?);
            }
        }
        let ops: Vec<_> = ops.into_iter().filter(|op| !op.is_zero()).collect();
        let ops = if ops.len() > self.dim.size() * self.dim.size() {
            compress(self.dim, &ops)
        } else {
            ops
        };
        Self::new(format!("{}+{}", self.name, then.name), ops)
    }
}

/// Rebuilds a minimal Kraus set from the Choi matrix `J = Σ |E⟩⟩⟨⟨E|`
/// (row-major vectorization) by pivoted outer-product Cholesky: each pivot
/// column of the residual is one new Kraus element.
fn compress<T: Real>(dim: Dim, ops: &[Operator<T>]) -> Vec<Operator<T>> {
    let n = dim.size() * dim.size();
    let mut j = vec![vec![Complex::<T>::zero(); n]; n];
    for op in ops {
        let v = op.entries();
        for r in 0..n {
            for c in 0..n {
                j[r][c] = j[r][c] + v[r] * v[c].conj();
            }
        }
    }
    let scale = (0..n).fold(T::zero(), |acc, i| acc.max(j[i][i].re));
    let mut out = Vec::new();
    for _ in 0..n {
        let (p, pivot) = (0..n)
            .map(|i| (i, j[i][i].re))
            .fold((0, T::neg_infinity()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot <= scale * T::lit(1e-14) {
            break;
        }
        let root = pivot.sqrt();
        let v: Vec<_> = (0..n).map(|r| j[r][p] / root).collect();
        for r in 0..n {
            for c in 0..n {
                j[r][c] = j[r][c] - v[r] * v[c].conj();
            }
        }
        out.push(Operator::from_rows(dim, &v).expect("finite"));
    }
    out
}

/// `ρ → Σ_k E_k ρ E_k†`.
pub fn apply<T: Real>(channel: &KrausChannel<T>, rho: &DensityState<T>) -> Result<DensityState<T>> {
    if channel.dim != rho.dim() {
        return Err(Error::DimensionMismatch {
            left: channel.dim.size(),
            right: rho.dim().size(),
        });
    }
    let residual = channel.completeness_residual();
    if !(residual <= T::tol(1e-10)) {
        return Err(Error::InvalidChannel {
            name: channel.name.clone(),
            reason: format!("completeness residual {:e}", residual.as_f64()),
        });
    }
    let mut out = Operator::zeros(rho.dim());
    for e in &channel.operators {
        let term = e.mat_mul(rho.matrix())?.mat_mul(&e.dagger())?;
        out = out.add(&term)?;
    }
    DensityState::new(out)
}

/// Product channel `Σ (E_i ⊗ F_j) ρ (E_i ⊗ F_j)†`; `first` acts on the major
/// tensor factor.
pub fn tensor_channel<T: Real>(first: &KrausChannel<T>, second: &KrausChannel<T>) -> Result<KrausChannel<T>> {
    let mut ops = Vec::with_capacity(first.operators.len() * second.operators.len());
    for e in &first.operators {
        for f in &second.operators {
            ops.push(e.tensor(f)?);
        }
    }
    KrausChannel::new(format!("{}(x){}", first.name, second.name), ops)
}

/// The eight noise sums of a qubit channel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseSums<T> {
    pub a1: T,
    pub a2: T,
    pub a3: T,
    pub a4: T,
    pub b1: T,
    pub b2: T,
    pub c1: T,
    pub c2: T,
}

impl<T: Real> NoiseSums<T> {
    /// `B1 − B2`: scale of the signal quadrature.
    pub fn chi1(&self) -> T {
        self.b1 - self.b2
    }

    /// `B1 + B2`: scale of the reference quadrature.
    pub fn chi2(&self) -> T {
        self.b1 + self.b2
    }

    pub fn as_array(&self) -> [T; 8] {
        [self.a1, self.a2, self.a3, self.a4, self.b1, self.b2, self.c1, self.c2]
    }
}

/// Noise sums plus the suppression factor `χ = χ1/χ2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams<T> {
    pub sums: NoiseSums<T>,
    pub chi1: T,
    pub chi2: T,
    pub chi: T,
}

impl<T: Real> NoiseParams<T> {
    pub fn from_sums(sums: NoiseSums<T>) -> Result<Self> {
        let chi1 = sums.chi1();
        let chi2 = sums.chi2();
        if chi2.abs() < T::tol(1e-12) {
            return Err(Error::DegenerateChannel);
        }
        Ok(NoiseParams {
            sums,
            chi1,
            chi2,
            chi: chi1 / chi2,
        })
    }
}

/// Reads the eight sums off a qubit channel.
pub fn noise_sums<T: Real>(channel: &KrausChannel<T>) -> Result<NoiseSums<T>> {
    if channel.dim != Dim::Two {
        return Err(Error::UnsupportedDimension(channel.dim.size()));
    }
    let mut s = NoiseSums::<T>::default();
    for e in &channel.operators {
        let (a, b, c, d) = (e.get(0, 0), e.get(0, 1), e.get(1, 0), e.get(1, 1));
        let ac = a.conj() * c;
        let bd = b.conj() * d;
        let ad = a.conj() * d;
        let bc = b.conj() * c;
        s.a1 = s.a1 + ac.re;
        s.a2 = s.a2 + bd.re;
        s.a3 = s.a3 + ac.im;
        s.a4 = s.a4 + bd.im;
        s.b1 = s.b1 + ad.re;
        s.b2 = s.b2 + bc.re;
        s.c1 = s.c1 + ad.im;
        s.c2 = s.c2 + bc.im;
    }
    Ok(s)
}

/// Noise sums and `χ`; fails with [`Error::DegenerateChannel`] when `B1 + B2`
/// vanishes within `1e-12`.
pub fn noise_params<T: Real>(channel: &KrausChannel<T>) -> Result<NoiseParams<T>> {
    NoiseParams::from_sums(noise_sums(channel)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelClass {
    /// `A = C = 0` and `B2 = 0`: coherences only attenuate.
    Dephasing,
    /// `A = C = 0`, `B2 ≠ 0`.
    Flip,
    General,
}

/// Classifies the sums with tolerance `1e-10`.
pub fn classify<T: Real>(sums: &NoiseSums<T>) -> ChannelClass {
    let tol = T::tol(1e-10);
    let small = |x: T| x.abs() <= tol;
    let plain = [sums.a1, sums.a2, sums.a3, sums.a4, sums.c1, sums.c2]
        .into_iter()
        .all(small);
    match (plain, small(sums.b2)) {
        (true, true) => ChannelClass::Dephasing,
        (true, false) => ChannelClass::Flip,
        (false, _) => ChannelClass::General,
    }
}

/// Which flip a flip-class channel performs, as seen by its `B2` sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlipKind {
    /// `B2 > 0`: X-type; decoded slope is `1 − 2p`.
    BitFlip,
    /// `B2 < 0`: Y-type; decoded slope is `1/(1 − 2p)`.
    BitPhaseFlip,
}

impl FlipKind {
    pub fn from_sums<T: Real>(sums: &NoiseSums<T>) -> Option<Self> {
        match classify(sums) {
            ChannelClass::Flip if sums.b2 > T::zero() => Some(FlipKind::BitFlip),
            ChannelClass::Flip => Some(FlipKind::BitPhaseFlip),
            _ => None,
        }
    }

    /// Decoder slope implied by the population contrast `q = 1 − 2p`.
    pub fn slope_from_population<T: Real>(self, q: T) -> T {
        match self {
            FlipKind::BitFlip => q,
            FlipKind::BitPhaseFlip => T::one() / q,
        }
    }
}

/// Coherence factor `⟨exp(i∫ξ)⟩` of a qubit under symmetric telegraph noise
/// started in equilibrium:
///
/// ```text
///     g(t) = e^{−νt} [cosh(δt) + ν·sinh(δt)/δ],   δ = √(ν² − a²)
/// ```
///
/// with the oscillating branch `cos`/`sin` of `√(a² − ν²)` when `a > ν`.
pub fn rtn_coherence<T: Real>(nu: T, coupling: T, t: T) -> Result<T> {
    for (name, v) in [("nu", nu), ("coupling", coupling), ("t", t)] {
        if !(v >= T::zero()) || !v.is_finite() {
            return Err(Error::ParameterOutOfRange {
                name,
                value: v.as_f64(),
                range: "[0, inf)",
            });
        }
    }
    let disc = nu * nu - coupling * coupling;
    let half = T::lit(0.5);
    let g = if disc >= T::zero() {
        let delta = disc.sqrt();
        let x = delta * t;
        let grow = ((delta - nu) * t).exp();
        let decay = (-(delta + nu) * t).exp();
        let cosh_part = half * (grow + decay);
        // ν·sinh(δt)/δ·e^{−νt}, series near δt = 0.
        let sinh_part = if x < T::lit(1e-4) {
            nu * t * (T::one() + x * x / T::lit(6.0)) * (-nu * t).exp()
        } else {
            nu * half * (grow - decay) / delta
        };
        cosh_part + sinh_part
    } else {
        let omega = (-disc).sqrt();
        let x = omega * t;
        let sinc = if x.abs() < T::lit(1e-4) {
            T::one() - x * x / T::lit(6.0)
        } else {
            x.sin() / x
        };
        (-nu * t).exp() * (x.cos() + nu * t * sinc)
    };
    if !g.is_finite() || g.abs() > T::one() + T::tol(1e-12) {
        return Err(Error::NumericalIntegrity(format!(
            "telegraph coherence {} outside [-1, 1]",
            g
        )));
    }
    Ok(g.max(-T::one()).min(T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::Ket;
    use proptest::prelude::*;

    type Ch = KrausChannel<f64>;

    fn cx(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn catalog(p: f64) -> Vec<Ch> {
        vec![
            Ch::phase_damping(p).unwrap(),
            Ch::phase_flip(p).unwrap(),
            Ch::bit_flip(p).unwrap(),
            Ch::bit_phase_flip(p).unwrap(),
            Ch::amplitude_damping(p).unwrap(),
            Ch::depolarizing(p).unwrap(),
            Ch::rtn(1.0, 1.5, p).unwrap(),
        ]
    }

    fn random_state(v: &[f64]) -> DensityState<f64> {
        let a = Ket::normalized(&[cx(v[0] + 0.1, v[1]), cx(v[2], v[3])]).unwrap();
        let b = Ket::normalized(&[cx(v[4], v[5] + 0.1), cx(v[6], v[7])]).unwrap();
        DensityState::mix(v[8].abs().min(1.0), &DensityState::pure(&a), &DensityState::pure(&b)).unwrap()
    }

    /// Element-wise hand expansion of Σ E ρ E† for a 2×2 input.
    fn oracle_apply(ops: &[Operator<f64>], rho: &Operator<f64>) -> [[Complex<f64>; 2]; 2] {
        let mut out = [[cx(0., 0.); 2]; 2];
        for e in ops {
            for (i, row) in out.iter_mut().enumerate() {
                for (j, cell) in row.iter_mut().enumerate() {
                    for k in 0..2 {
                        for l in 0..2 {
                            *cell += e.get(i, k) * rho.get(k, l) * e.get(j, l).conj();
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn catalog_is_complete() {
        for p in [0.0, 0.1, 0.37, 0.5, 0.9, 1.0] {
            for ch in catalog(p) {
                assert!(ch.completeness_residual() < 1e-12, "{} at {p}", ch.name());
            }
        }
    }

    #[test]
    fn parameters_out_of_range() {
        assert!(matches!(Ch::bit_flip(1.2), Err(Error::ParameterOutOfRange { .. })));
        assert!(matches!(Ch::phase_damping(-0.1), Err(Error::ParameterOutOfRange { .. })));
        assert!(matches!(Ch::amplitude_damping(f64::NAN), Err(Error::ParameterOutOfRange { .. })));
        assert!(matches!(Ch::rtn(-1.0, 1.0, 1.0), Err(Error::ParameterOutOfRange { .. })));
    }

    #[test]
    fn incomplete_sets_are_rejected() {
        let half = Operator::identity(Dim::Two).scale_real(0.5);
        assert!(matches!(Ch::new("bad", vec![half]), Err(Error::InvalidChannel { .. })));
        assert!(matches!(Ch::new("empty", vec![]), Err(Error::InvalidChannel { .. })));
        let five = vec![Operator::identity(Dim::Two).scale_real(0.2f64.sqrt()); 5];
        assert!(matches!(Ch::new("long", five), Err(Error::InvalidChannel { .. })));
    }

    #[test]
    fn identity_channel_leaves_state_unchanged() {
        let rho = random_state(&[0.3, -0.2, 0.5, 0.1, 0.4, 0.2, -0.6, 0.3, 0.35]);
        let out = apply(&Ch::identity(Dim::Two), &rho).unwrap();
        assert!(out.matrix().max_abs_diff(rho.matrix()).unwrap() < 1e-15);
        assert_eq!(Ch::bit_flip(0.0).unwrap().operators().len(), 1);
    }

    #[test]
    fn full_phase_damping_kills_coherence() {
        let plus = Ket::normalized(&[cx(1., 0.), cx(1., 0.)]).unwrap();
        let out = apply(&Ch::phase_damping(1.0).unwrap(), &DensityState::pure(&plus)).unwrap();
        let want = DensityState::<f64>::maximally_mixed(Dim::Two);
        assert!(out.matrix().max_abs_diff(want.matrix()).unwrap() < 1e-15);
    }

    #[test]
    fn depolarizing_ground_state() {
        let zero = DensityState::pure(&Ket::<f64>::basis(Dim::Two, 0).unwrap());
        for p in [0.1, 0.4, 0.8] {
            let ch = Ch::depolarizing(p).unwrap();
            let out = apply(&ch, &zero).unwrap();
            let hand = oracle_apply(ch.operators(), zero.matrix());
            assert!((out.matrix().get(0, 0).re - (1.0 - p / 2.0)).abs() < 1e-15);
            assert!((out.matrix().get(1, 1).re - p / 2.0).abs() < 1e-15);
            assert!((hand[0][0].re - (1.0 - p / 2.0)).abs() < 1e-15);
            assert!(out.matrix().get(0, 1).norm() < 1e-15);
        }
    }

    #[test]
    fn closed_form_noise_params() {
        let bf = noise_params(&Ch::bit_flip(0.2).unwrap()).unwrap();
        assert!((bf.chi - 0.6).abs() < 1e-12);
        let ad = noise_params(&Ch::amplitude_damping(0.36).unwrap()).unwrap();
        assert!((ad.sums.b1 - 0.8).abs() < 1e-12);
        assert!((ad.chi - 1.0).abs() < 1e-12);
        let bpf = noise_params(&Ch::bit_phase_flip(0.2).unwrap()).unwrap();
        assert!((bpf.sums.b1 - 0.8).abs() < 1e-12 && (bpf.sums.b2 + 0.2).abs() < 1e-12);
        assert!((bpf.chi - 5.0 / 3.0).abs() < 1e-12);
        let pf = noise_params(&Ch::phase_flip(0.3).unwrap()).unwrap();
        assert!((pf.sums.b1 - 0.4).abs() < 1e-12 && pf.sums.b2.abs() < 1e-15);
        assert!((pf.chi - 1.0).abs() < 1e-12);
        let id = noise_params(&Ch::identity(Dim::Two)).unwrap();
        assert_eq!(id.sums.as_array(), [0., 0., 0., 0., 1., 0., 0., 0.]);
        assert_eq!(id.chi, 1.0);
    }

    #[test]
    fn degenerate_and_unsupported_noise_params() {
        assert_eq!(noise_params(&Ch::phase_flip(0.5).unwrap()), Err(Error::DegenerateChannel));
        assert_eq!(noise_params(&Ch::bit_phase_flip(0.5).unwrap()), Err(Error::DegenerateChannel));
        let four = Ch::identity(Dim::Four);
        assert_eq!(noise_params(&four), Err(Error::UnsupportedDimension(4)));
    }

    #[test]
    fn classification() {
        let sums = |c: Ch| noise_sums(&c).unwrap();
        assert_eq!(classify(&sums(Ch::phase_damping(0.4).unwrap())), ChannelClass::Dephasing);
        assert_eq!(classify(&sums(Ch::amplitude_damping(0.4).unwrap())), ChannelClass::Dephasing);
        assert_eq!(classify(&sums(Ch::bit_flip(0.1).unwrap())), ChannelClass::Flip);
        assert_eq!(FlipKind::from_sums(&sums(Ch::bit_flip(0.1).unwrap())), Some(FlipKind::BitFlip));
        assert_eq!(
            FlipKind::from_sums(&sums(Ch::bit_phase_flip(0.1).unwrap())),
            Some(FlipKind::BitPhaseFlip)
        );

        // Amplitude damping followed by a small Y rotation: A1 picks up
        // a cross term between the damping elements and the rotation.
        let th: f64 = 0.3;
        let (c, s) = ((th / 2.0).cos(), (th / 2.0).sin());
        let rot = Ch::new(
            "ry",
            vec![Operator::qubit(cx(c, 0.), cx(-s, 0.), cx(s, 0.), cx(c, 0.)).unwrap()],
        )
        .unwrap();
        let general = Ch::amplitude_damping(0.3).unwrap().then(&rot).unwrap();
        let g = sums(general);
        // Hand sums over F0 = R·diag(1, √0.7) and F1 = R·[[0, √0.3], [0, 0]].
        assert!((g.a1 - c * s).abs() < 1e-12, "{g:?}");
        assert!((g.a2 + 0.4 * c * s).abs() < 1e-12, "{g:?}");
        assert_eq!(classify(&g), ChannelClass::General);
    }

    #[test]
    fn tensor_channel_matches_sequential_local_actions() {
        let a = Ch::amplitude_damping(0.3).unwrap();
        let b = Ch::bit_flip(0.15).unwrap();
        let both = tensor_channel(&a, &b).unwrap();
        assert_eq!(both.dim(), Dim::Four);
        assert!(both.completeness_residual() < 1e-12);
        let id = Ch::identity(Dim::Two);
        let left = tensor_channel(&a, &id).unwrap();
        let right = tensor_channel(&id, &b).unwrap();
        let k = Ket::normalized(&[cx(0.6, 0.1), cx(0.2, -0.3), cx(-0.1, 0.4), cx(0.5, 0.2)]).unwrap();
        let rho = DensityState::pure(&k);
        let direct = apply(&both, &rho).unwrap();
        let seq = apply(&right, &apply(&left, &rho).unwrap()).unwrap();
        assert!(direct.matrix().max_abs_diff(seq.matrix()).unwrap() < 1e-12);
        let ii = tensor_channel(&id, &id).unwrap();
        assert_eq!(ii.operators(), Ch::identity(Dim::Four).operators());
    }

    #[test]
    fn composed_bit_flips_multiply_chi() {
        for (p, q) in [(0.1, 0.2), (0.3, 0.05), (0.45, 0.4)] {
            let ch = Ch::bit_flip(p).unwrap().then(&Ch::bit_flip(q).unwrap()).unwrap();
            let chi = noise_params(&ch).unwrap().chi;
            assert!((chi - (1.0 - 2.0 * p) * (1.0 - 2.0 * q)).abs() < 1e-10);
        }
    }

    #[test]
    fn composition_compresses_to_dim_squared() {
        let ch = Ch::depolarizing(0.3).unwrap().then(&Ch::amplitude_damping(0.4).unwrap()).unwrap();
        assert!(ch.operators().len() <= 4);
        assert!(ch.completeness_residual() < 1e-12);
        let rho = random_state(&[0.2, 0.4, -0.3, 0.1, 0.5, -0.2, 0.3, 0.3, 0.6]);
        let direct = apply(
            &Ch::amplitude_damping(0.4).unwrap(),
            &apply(&Ch::depolarizing(0.3).unwrap(), &rho).unwrap(),
        )
        .unwrap();
        let composed = apply(&ch, &rho).unwrap();
        assert!(direct.matrix().max_abs_diff(composed.matrix()).unwrap() < 1e-12);
    }

    #[test]
    fn rtn_limits() {
        assert_eq!(rtn_coherence(2.0, 3.0, 0.0).unwrap(), 1.0);
        let at_zero = Ch::rtn(2.0, 3.0, 0.0).unwrap();
        assert_eq!(at_zero.operators().len(), 1);
        // Critical damping: δ = 0 gives e^{−νt}(1 + νt).
        let g = rtn_coherence(1.0, 1.0, 0.7).unwrap();
        assert!((g - (-0.7f64).exp() * 1.7).abs() < 1e-12);
        // Continuity across the critical point.
        let below = rtn_coherence(1.0, 1.0 - 1e-7, 0.7).unwrap();
        let above = rtn_coherence(1.0, 1.0 + 1e-7, 0.7).unwrap();
        assert!((below - g).abs() < 1e-6 && (above - g).abs() < 1e-6);
        for (nu, a, t) in [(0.5, 2.0, 0.3), (3.0, 1.0, 2.0), (1.0, 4.0, 5.0)] {
            let ch = Ch::rtn(nu, a, t).unwrap();
            let p = noise_params(&ch).unwrap();
            assert!((p.chi - 1.0).abs() < 1e-12);
            assert_eq!(classify(&p.sums), ChannelClass::Dephasing);
        }
    }

    /// Exact telegraph simulation: exponential dwell times, equilibrium start.
    fn telegraph_average(nu: f64, a: f64, t: f64, samples: usize, seed: u64) -> f64 {
        use rand::{Rng, SeedableRng};
        use rand_distr::{Distribution, Exp};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let dwell = Exp::new(nu).unwrap();
        let mut acc = 0.0;
        for _ in 0..samples {
            let mut sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let (mut clock, mut phase) = (0.0, 0.0);
            loop {
                let step: f64 = dwell.sample(&mut rng);
                if clock + step >= t {
                    phase += sign * a * (t - clock);
                    break;
                }
                phase += sign * a * step;
                clock += step;
                sign = -sign;
            }
            acc += f64::cos(phase);
        }
        acc / samples as f64
    }

    #[test]
    fn rtn_matches_trajectory_average() {
        // Overdamped, critical and oscillating regimes; the last crosses zero.
        for (i, (nu, a, t)) in [
            (2.0, 1.0, 0.5),
            (2.0, 1.0, 2.0),
            (1.0, 1.0, 1.0),
            (0.5, 3.0, 0.4),
            (0.5, 3.0, 1.0),
            (0.3, 4.0, 0.9),
        ]
        .into_iter()
        .enumerate()
        {
            let closed = rtn_coherence(nu, a, t).unwrap();
            let sampled = telegraph_average(nu, a, t, 40_000, 17 + i as u64);
            assert!((closed - sampled).abs() < 0.01, "nu={nu} a={a} t={t}: {closed} vs {sampled}");
            let ch = Ch::rtn(nu, a, t).unwrap();
            let plus = Ket::normalized(&[cx(1., 0.), cx(1., 0.)]).unwrap();
            let out = apply(&ch, &DensityState::pure(&plus)).unwrap();
            assert!((2.0 * out.matrix().get(0, 1).re - closed).abs() < 1e-12);
        }
        // Oscillating regime goes negative.
        assert!(rtn_coherence(0.3, 4.0, 0.9).unwrap() < 0.0);
        // Overdamped regime decays monotonically.
        let ts = [0.0, 0.5, 1.0, 2.0, 4.0];
        let gs: Vec<_> = ts.iter().map(|&t| rtn_coherence(2.0, 1.0, t).unwrap()).collect();
        assert!(gs.windows(2).all(|w| w[1] < w[0]));
    }

    fn random_isometry(rows: usize, cols: usize, seed: u64) -> Vec<Vec<Complex<f64>>> {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut columns: Vec<Vec<Complex<f64>>> = Vec::new();
        for _ in 0..cols {
            let mut v: Vec<Complex<f64>> = (0..rows)
                .map(|_| cx(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                .collect();
            for u in &columns {
                let proj: Complex<f64> = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (x, y) in v.iter_mut().zip(u) {
                    *x -= proj * y;
                }
            }
            let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.iter_mut().for_each(|z| *z /= n);
            columns.push(v);
        }
        (0..rows).map(|r| (0..cols).map(|c| columns[c][r]).collect()).collect()
    }

    #[test]
    fn remix_preserves_noise_sums() {
        for ch in catalog(0.3) {
            let k = ch.operators().len();
            let base = noise_sums(&ch).unwrap();
            for seed in 0..3 {
                let iso = random_isometry(4.max(k), k, seed);
                let mixed = ch.remix(&iso).unwrap();
                let got = noise_sums(&mixed).unwrap();
                for (a, b) in base.as_array().iter().zip(got.as_array()) {
                    assert!((a - b).abs() < 1e-10, "{}", ch.name());
                }
            }
        }
        let not_iso = vec![vec![cx(1., 0.), cx(1., 0.)], vec![cx(0., 0.), cx(1., 0.)]];
        assert!(Ch::bit_flip(0.2).unwrap().remix(&not_iso).is_err());
    }

    #[test]
    fn dephasing_class_chi_is_exactly_one() {
        for p in [0.0, 0.1, 0.3, 0.7, 0.9] {
            for ch in [
                Ch::phase_damping(p).unwrap(),
                Ch::amplitude_damping(p).unwrap(),
                Ch::depolarizing(p).unwrap(),
                Ch::phase_flip(p).unwrap(),
            ] {
                let params = noise_params(&ch).unwrap();
                assert_eq!(classify(&params.sums), ChannelClass::Dephasing);
                assert!((params.chi - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_precision_catalog() {
        let ch = KrausChannel::<f32>::bit_flip(0.2).unwrap();
        assert!((noise_params(&ch).unwrap().chi - 0.6).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn catalog_outputs_stay_valid(
            p in 0.0..=1.0f64,
            v in prop::collection::vec(-1.0..1.0f64, 9),
        ) {
            let rho = random_state(&v);
            for ch in catalog(p) {
                let out = apply(&ch, &rho).unwrap();
                let r = out.report();
                prop_assert!(r.hermiticity < 1e-10 && r.trace < 1e-10 && r.min_eigenvalue > -1e-10);
            }
        }
    }
}
