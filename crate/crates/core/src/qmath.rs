//! Dense complex linear algebra for one- and two-qubit objects.
//!
//! Everything here is fixed-size: operators live in a 16-entry row-major
//! array and kets in a 4-entry array, with [`Dim`] recording how much of the
//! storage is in use. At these sizes dense storage beats any sparse layout.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Hilbert-space dimension: one qubit or a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dim {
    Two,
    Four,
}

impl Dim {
    pub fn size(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Four => 4,
        }
    }

    pub fn from_size(n: usize) -> Result<Self> {
        match n {
            2 => Ok(Dim::Two),
            4 => Ok(Dim::Four),
            _ => Err(Error::UnsupportedDimension(n)),
        }
    }

    fn check_same(self, other: Dim) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                left: self.size(),
                right: other.size(),
            })
        }
    }
}

fn c<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::lit(re), T::lit(im))
}

fn is_finite<T: Real>(z: &Complex<T>) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// A square complex matrix of dimension 2 or 4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Operator<T: Real> {
    dim: Dim,
    data: [Complex<T>; 16],
}

impl<T: Real> Operator<T> {
    pub fn zeros(dim: Dim) -> Self {
        Operator {
            dim,
            data: [Complex::zero(); 16],
        }
    }

    pub fn identity(dim: Dim) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim.size() {
            m.set(i, i, Complex::one());
        }
        m
    }

    /// Builds an operator from `dim * dim` row-major entries.
    pub fn from_rows(dim: Dim, entries: &[Complex<T>]) -> Result<Self> {
        let n = dim.size();
        if entries.len() != n * n {
            return Err(Error::EntryCount {
                expected: n * n,
                got: entries.len(),
            });
        }
        if !entries.iter().all(is_finite) {
            return Err(Error::NonFinite);
        }
        let mut m = Self::zeros(dim);
        for (k, z) in entries.iter().enumerate() {
            m.set(k / n, k % n, *z);
        }
        Ok(m)
    }

    /// Builds a 2×2 operator `[[a, b], [c, d]]`.
    pub fn qubit(a: Complex<T>, b: Complex<T>, c: Complex<T>, d: Complex<T>) -> Result<Self> {
        Self::from_rows(Dim::Two, &[a, b, c, d])
    }

    pub fn pauli_x() -> Self {
        Self::from_rows(Dim::Two, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]).unwrap()
    }

    pub fn pauli_y() -> Self {
        Self::from_rows(Dim::Two, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]).unwrap()
    }

    pub fn pauli_z() -> Self {
        Self::from_rows(Dim::Two, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]).unwrap()
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex<T> {
        self.data[row * self.dim.size() + col]
    }

    #[inline]
    fn set(&mut self, row: usize, col: usize, z: Complex<T>) {
        let n = self.dim.size();
        self.data[row * n + col] = z;
    }

    /// Row-major view of the populated entries.
    pub fn entries(&self) -> &[Complex<T>] {
        let n = self.dim.size();
        &self.data[..n * n]
    }

    pub fn is_zero(&self) -> bool {
        self.entries().iter().all(|z| z.is_zero())
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        let mut m = *self;
        m.data.iter_mut().for_each(|z| *z = *z * s);
        m
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.scale(Complex::new(s, T::zero()))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.dim.check_same(other.dim)?;
        let mut m = *self;
        for (a, b) in m.data.iter_mut().zip(other.data.iter()) {
            *a = *a + *b;
        }
        Ok(m)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale_real(-T::one()))
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.dim.size()).fold(Complex::zero(), |acc, i| acc + self.get(i, i))
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.dim.check_same(other.dim)?;
        Ok(self
            .entries()
            .iter()
            .zip(other.entries())
            .map(|(a, b)| (*a - *b).norm())
            .fold(T::zero(), T::max))
    }

    /// Standard matrix product `self · other`.
    pub fn mat_mul(&self, other: &Self) -> Result<Self> {
        self.dim.check_same(other.dim)?;
        let n = self.dim.size();
        let mut m = Self::zeros(self.dim);
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex::zero();
                for k in 0..n {
                    acc = acc + self.get(i, k) * other.get(k, j);
                }
                m.set(i, j, acc);
            }
        }
        Ok(m)
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let n = self.dim.size();
        let mut m = Self::zeros(self.dim);
        for i in 0..n {
            for j in 0..n {
                m.set(j, i, self.get(i, j).conj());
            }
        }
        m
    }

    /// Kronecker product `self ⊗ other` of two 2×2 operators; the row index of
    /// `self` is the major index of the result.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if self.dim != Dim::Two {
            return Err(Error::UnsupportedDimension(self.dim.size()));
        }
        if other.dim != Dim::Two {
            return Err(Error::UnsupportedDimension(other.dim.size()));
        }
        let mut m = Self::zeros(Dim::Four);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        m.set(2 * i + k, 2 * j + l, self.get(i, j) * other.get(k, l));
                    }
                }
            }
        }
        Ok(m)
    }

    /// Projector `|ψ⟩⟨ψ|`.
    pub fn outer(ket: &Ket<T>) -> Self {
        let n = ket.dim.size();
        let mut m = Self::zeros(ket.dim);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, ket.amps[i] * ket.amps[j].conj());
            }
        }
        m
    }

    /// `self |ψ⟩`, without renormalization.
    pub fn apply_to(&self, amps: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let n = self.dim.size();
        if amps.len() != n {
            return Err(Error::DimensionMismatch {
                left: n,
                right: amps.len(),
            });
        }
        Ok((0..n)
            .map(|i| (0..n).fold(Complex::zero(), |acc, j| acc + self.get(i, j) * amps[j]))
            .collect())
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_residual(&self) -> T {
        self.max_abs_diff(&self.dagger()).unwrap_or_else(|_| T::nan())
    }
}

/// A normalized state vector of dimension 2 or 4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ket<T: Real> {
    dim: Dim,
    amps: [Complex<T>; 4],
}

impl<T: Real> Ket<T> {
    pub fn new(amps: &[Complex<T>]) -> Result<Self> {
        let dim = Dim::from_size(amps.len())?;
        if !amps.iter().all(is_finite) {
            return Err(Error::NonFinite);
        }
        let norm2 = amps.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr());
        if (norm2 - T::one()).abs() > T::tol(1e-12) {
            return Err(Error::NotNormalized(norm2.as_f64()));
        }
        let mut store = [Complex::zero(); 4];
        store[..amps.len()].copy_from_slice(amps);
        Ok(Ket { dim, amps: store })
    }

    /// Normalizes `amps` first; fails only on a zero or non-finite vector.
    pub fn normalized(amps: &[Complex<T>]) -> Result<Self> {
        let norm = amps
            .iter()
            .fold(T::zero(), |acc, z| acc + z.norm_sqr())
            .sqrt();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::NotNormalized(norm.as_f64()));
        }
        let scaled: Vec<_> = amps.iter().map(|z| *z / norm).collect();
        Self::new(&scaled)
    }

    /// Computational basis vector `|index⟩`.
    pub fn basis(dim: Dim, index: usize) -> Result<Self> {
        let n = dim.size();
        if index >= n {
            return Err(Error::Usage(format!("basis index {index} out of range for dim {n}")));
        }
        let mut amps = vec![Complex::zero(); n];
        amps[index] = Complex::one();
        Self::new(&amps)
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps[..self.dim.size()]
    }

    /// Inner product `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<Complex<T>> {
        self.dim.check_same(other.dim)?;
        Ok(self
            .amplitudes()
            .iter()
            .zip(other.amplitudes())
            .fold(Complex::zero(), |acc, (a, b)| acc + a.conj() * *b))
    }

    /// `self ⊗ other` for two qubit kets.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if self.dim != Dim::Two || other.dim != Dim::Two {
            return Err(Error::UnsupportedDimension(
                self.dim.size().max(other.dim.size()) * 2,
            ));
        }
        let a = self.amplitudes();
        let b = other.amplitudes();
        Self::normalized(&[a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]])
    }
}

/// Residuals describing how far a matrix is from a valid density operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityReport<T> {
    pub hermiticity: T,
    pub trace: T,
    pub min_eigenvalue: T,
}

impl<T: Real> DensityReport<T> {
    /// Passes the density invariants: Hermitian and unit trace within
    /// `1e-12`, no eigenvalue below `-1e-10`.
    pub fn is_valid(&self) -> bool {
        self.hermiticity <= T::tol(1e-12)
            && self.trace <= T::tol(1e-12)
            && self.min_eigenvalue >= -T::tol(1e-10)
    }
}

/// A positive semidefinite, unit-trace operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityState<T: Real> {
    matrix: Operator<T>,
}

impl<T: Real> DensityState<T> {
    /// Validates `matrix` against the density invariants.
    pub fn new(matrix: Operator<T>) -> Result<Self> {
        let report = validate_density(&matrix);
        if report.is_valid() {
            Ok(DensityState { matrix })
        } else {
            Err(Error::InvalidDensity(format!(
                "hermiticity {:e}, trace residual {:e}, min eigenvalue {:e}",
                report.hermiticity.as_f64(),
                report.trace.as_f64(),
                report.min_eigenvalue.as_f64()
            )))
        }
    }

    pub fn pure(ket: &Ket<T>) -> Self {
        DensityState {
            matrix: Operator::outer(ket),
        }
    }

    pub fn maximally_mixed(dim: Dim) -> Self {
        let n = T::lit(dim.size() as f64);
        DensityState {
            matrix: Operator::identity(dim).scale_real(T::one() / n),
        }
    }

    /// Convex combination `alpha·a + (1 − alpha)·b`.
    pub fn mix(alpha: T, a: &Self, b: &Self) -> Result<Self> {
        if !(alpha >= T::zero() && alpha <= T::one()) {
            return Err(Error::ParameterOutOfRange {
                name: "alpha",
                value: alpha.as_f64(),
                range: "[0, 1]",
            });
        }
        let m = a
            .matrix
            .scale_real(alpha)
            .add(&b.matrix.scale_real(T::one() - alpha))?;
        Ok(DensityState { matrix: m })
    }

    pub fn dim(&self) -> Dim {
        self.matrix.dim
    }

    pub fn matrix(&self) -> &Operator<T> {
        &self.matrix
    }

    pub fn report(&self) -> DensityReport<T> {
        validate_density(&self.matrix)
    }

    /// Reduced state of the first qubit of a two-qubit state.
    pub fn trace_out_second(&self) -> Result<Self> {
        if self.dim() != Dim::Four {
            return Err(Error::UnsupportedDimension(self.dim().size()));
        }
        let mut m = Operator::zeros(Dim::Two);
        for i in 0..2 {
            for j in 0..2 {
                let z = self.matrix.get(2 * i, 2 * j) + self.matrix.get(2 * i + 1, 2 * j + 1);
                m.set(i, j, z);
            }
        }
        Self::new(m)
    }

    /// Reduced state of the second qubit of a two-qubit state.
    pub fn trace_out_first(&self) -> Result<Self> {
        if self.dim() != Dim::Four {
            return Err(Error::UnsupportedDimension(self.dim().size()));
        }
        let mut m = Operator::zeros(Dim::Two);
        for i in 0..2 {
            for j in 0..2 {
                let z = self.matrix.get(i, j) + self.matrix.get(2 + i, 2 + j);
                m.set(i, j, z);
            }
        }
        Self::new(m)
    }
}

/// `Tr[ρ |φ⟩⟨φ|] = ⟨φ|ρ|φ⟩`, clamped into `[0, 1]`.
///
/// Fails when the imaginary part exceeds `1e-9`, which only happens for a
/// corrupted state.
pub fn expectation<T: Real>(rho: &DensityState<T>, phi: &Ket<T>) -> Result<T> {
    rho.dim().check_same(phi.dim())?;
    let n = phi.dim().size();
    let a = phi.amplitudes();
    let mut acc: Complex<T> = Complex::zero();
    for i in 0..n {
        for j in 0..n {
            acc = acc + a[i].conj() * rho.matrix.get(i, j) * a[j];
        }
    }
    if acc.im.abs() > T::tol(1e-9) || !acc.re.is_finite() {
        return Err(Error::NumericalIntegrity(format!(
            "expectation {} + {}i is not real",
            acc.re, acc.im
        )));
    }
    let tol = T::tol(1e-9);
    if acc.re < -tol || acc.re > T::one() + tol {
        return Err(Error::NumericalIntegrity(format!(
            "expectation {} outside [0, 1]",
            acc.re
        )));
    }
    Ok(acc.re.max(T::zero()).min(T::one()))
}

/// Hermiticity residual, trace residual and minimum eigenvalue of `m`.
///
/// The eigenvalue is closed-form for 2×2. For 4×4 the Hermitian part is
/// embedded as the real symmetric 8×8 matrix `[[A, −B], [B, A]]`
/// (`H = A + iB`), whose spectrum is that of `H` with every eigenvalue
/// doubled, and diagonalized by cyclic Jacobi rotations.
pub fn validate_density<T: Real>(m: &Operator<T>) -> DensityReport<T> {
    let hermiticity = m.hermiticity_residual();
    let tr = m.trace();
    let trace = (tr - Complex::one()).norm();
    let min_eigenvalue = hermitian_eigenvalues(m)
        .into_iter()
        .fold(T::infinity(), T::min);
    DensityReport {
        hermiticity,
        trace,
        min_eigenvalue,
    }
}

/// Eigenvalues of the Hermitian part `(M + M†)/2`, in no particular order.
pub fn hermitian_eigenvalues<T: Real>(m: &Operator<T>) -> Vec<T> {
    let half = T::lit(0.5);
    let h = m.add(&m.dagger()).expect("same dim").scale_real(half);
    match h.dim {
        Dim::Two => {
            let a = h.get(0, 0).re;
            let d = h.get(1, 1).re;
            let b = h.get(0, 1).norm();
            let mean = (a + d) * half;
            let radius = (((a - d) * half).powi(2) + b * b).sqrt();
            vec![mean - radius, mean + radius]
        }
        Dim::Four => {
            let mut s = [[T::zero(); 8]; 8];
            for i in 0..4 {
                for j in 0..4 {
                    let z = h.get(i, j);
                    s[i][j] = z.re;
                    s[i + 4][j + 4] = z.re;
                    s[i][j + 4] = -z.im;
                    s[i + 4][j] = z.im;
                }
            }
            let ev = jacobi_symmetric(s);
            // Each eigenvalue of H appears twice in the embedding.
            let mut sorted = ev.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            sorted.iter().step_by(2).copied().collect()
        }
    }
}

fn jacobi_symmetric<T: Real, const N: usize>(mut a: [[T; N]; N]) -> [T; N] {
    let eps = T::epsilon();
    for _sweep in 0..64 {
        let off: T = (0..N)
            .flat_map(|i| (0..N).filter(move |&j| j != i).map(move |j| (i, j)))
            .fold(T::zero(), |acc, (i, j)| acc + a[i][j] * a[i][j]);
        let scale: T = (0..N).fold(T::zero(), |acc, i| acc + a[i][i] * a[i][i]);
        if off <= eps * eps * (scale + off) || off == T::zero() {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                let apq = a[p][q];
                if apq == T::zero() {
                    continue;
                }
                let two = T::lit(2.0);
                let tau = (a[q][q] - a[p][p]) / (two * apq);
                let t = tau.signum() / (tau.abs() + (T::one() + tau * tau).sqrt());
                let cs = T::one() / (T::one() + t * t).sqrt();
                let sn = t * cs;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = cs * akp - sn * akq;
                    a[k][q] = sn * akp + cs * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = cs * apk - sn * aqk;
                    a[q][k] = sn * apk + cs * aqk;
                }
            }
        }
    }
    let mut out = [T::zero(); N];
    for (i, v) in out.iter_mut().enumerate() {
        *v = a[i][i];
    }
    out
}
