//! Quadratic Lyapunov functions `V(x) = x^T P x` for linear and switching
//! systems, in binary64.
//!
//! Verdicts from this module are at best [`Verdict::Sampled`]: eigenvalues
//! and series sums are approximations.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::certificates::{verify_lyapunov, LyapunovCertificate};
use crate::comparison::{ComparisonFunction, PowerLaw};
use crate::monovariant::{validate_grid, LevelSetFamily, Observable};
use crate::scalar::Rational;
use crate::system::{EuclideanSystem, Point, RatMatrix, Scope};
use crate::{Error, Result, Verdict};

/// Series terms below this norm end the Lyapunov sum.
pub const SERIES_TOLERANCE: f64 = 1e-14;
/// Hard cap on the number of series terms.
pub const SERIES_MAX_TERMS: usize = 100_000;
/// Terms without a new smallest norm before the series is declared divergent.
pub const SERIES_STALL: usize = 100;
/// Relative symmetry tolerance.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
/// Relative margin applied to the sandwich bounds so that rounding in the
/// eigenvalues cannot put a sampled boundary point on the wrong side.
pub const SANDWICH_MARGIN: f64 = 1e-12;

/// Dense square matrix, row major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidMatrix("matrix must be at least 1x1".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: row.len() });
            }
            if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidMatrix(format!("entry {bad} is not finite")));
            }
            data.extend(row);
        }
        Ok(Matrix { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        Matrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        Matrix::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = s;
        }
        m
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Matrix::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m.data[i * values.len() + i] = *v;
        }
        m
    }

    pub fn from_rational(m: &RatMatrix) -> Self {
        Matrix { n: m.dim(), data: m.to_f64_rows().into_iter().flatten().collect() }
    }

    /// Exact rational copy.
    pub fn to_rational(&self) -> Result<RatMatrix> {
        RatMatrix::from_f64_rows(&self.rows())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        Matrix { n: self.n, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        Matrix { n: self.n, data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { n: self.n, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum()).collect()
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        x.iter().zip(self.apply(x)).map(|(a, b)| a * b).sum()
    }

    /// Induced infinity norm: largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.data.chunks(self.n).map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self, tolerance: f64) -> bool {
        let scale = self.max_abs().max(1.0);
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tolerance * scale))
    }

    fn check_same_dim(&self, other: &Matrix) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        Ok(())
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, row) in self.data.chunks(self.n).enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{row:?}")?;
        }
        f.write_str("]")
    }
}

/// Solves `A^T P A - P = -Q` by summing `Σ (A^T)^k Q A^k`.
pub fn solve_discrete_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    a.check_same_dim(q)?;
    if !q.is_symmetric(SYMMETRY_TOLERANCE) {
        return Err(Error::Asymmetric);
    }
    let at = a.transpose();
    let mut term = q.clone();
    let mut sum = q.clone();
    let mut best = term.norm_inf();
    let mut stalled = 0;
    for k in 1..=SERIES_MAX_TERMS {
        if best < SERIES_TOLERANCE {
            return Ok(sum);
        }
        term = at.mul(&term).mul(a);
        let norm = term.norm_inf();
        if !norm.is_finite() {
            return Err(Error::NonConvergent { terms: k });
        }
        sum = sum.add(&term);
        if norm < best {
            best = norm;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= SERIES_STALL {
                return Err(Error::NonConvergent { terms: k });
            }
        }
    }
    if best < SERIES_TOLERANCE {
        Ok(sum)
    } else {
        Err(Error::NonConvergent { terms: SERIES_MAX_TERMS })
    }
}

/// `‖A^T P A - P + Q‖_∞`.
pub fn lyapunov_residual(a: &Matrix, p: &Matrix, q: &Matrix) -> f64 {
    a.transpose().mul(p).mul(a).sub(p).add(q).norm_inf()
}

/// Eigenvalues in ascending order with unit eigenvectors (columns of
/// `vectors`, stored as rows for convenience).
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi rotations.
pub fn symmetric_eigen(p: &Matrix) -> Result<SymmetricEigen> {
    if !p.is_symmetric(SYMMETRY_TOLERANCE) {
        return Err(Error::Asymmetric);
    }
    let n = p.dim();
    let mut a = p.clone();
    let mut v = Matrix::identity(n);
    let scale = p.max_abs().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| { let v = a.get(i, j); v * v }).sum();
        if libm::sqrt(off) <= 1e-15 * scale {
            break;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let aij = a.get(i, j);
                if aij == 0.0 {
                    continue;
                }
                let theta = (a.get(j, j) - a.get(i, i)) / (2.0 * aij);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let (aki, akj) = (a.get(k, i), a.get(k, j));
                    a.set(k, i, c * aki - s * akj);
                    a.set(k, j, s * aki + c * akj);
                }
                for k in 0..n {
                    let (aik, ajk) = (a.get(i, k), a.get(j, k));
                    a.set(i, k, c * aik - s * ajk);
                    a.set(j, k, s * aik + c * ajk);
                }
                for k in 0..n {
                    let (vki, vkj) = (v.get(k, i), v.get(k, j));
                    v.set(k, i, c * vki - s * vkj);
                    v.set(k, j, s * vki + c * vkj);
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n).map(|i| (a.get(i, i), (0..n).map(|k| v.get(k, i)).collect())).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    for (lambda, vec) in &pairs {
        let pv = p.apply(vec);
        let residual = libm::sqrt(pv.iter().zip(vec).map(|(a, b)| { let r = a - lambda * b; r * r }).sum());
        if residual > 1e-9 * scale {
            return Err(Error::InvalidMatrix(format!("eigenpair residual {residual:e} too large")));
        }
    }
    let (values, vectors) = pairs.into_iter().unzip();
    Ok(SymmetricEigen { values, vectors })
}

/// `(λ_min, λ_max)` of a symmetric matrix.
pub fn extreme_eigs(p: &Matrix) -> Result<(f64, f64)> {
    let eig = symmetric_eigen(p)?;
    Ok((eig.values[0], *eig.values.last().expect("n >= 1")))
}

/// A symmetric positive-definite `P` with its extreme eigenvalues.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticCertificate {
    pub p: Matrix,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl QuadraticCertificate {
    pub fn new(p: Matrix) -> Result<Self> {
        let (lambda_min, lambda_max) = extreme_eigs(&p)?;
        if lambda_min <= 0.0 {
            return Err(Error::NotPositiveDefinite(format!("smallest eigenvalue is {lambda_min:e}")));
        }
        Ok(QuadraticCertificate { p, lambda_min, lambda_max })
    }

    /// `A(ε) = sqrt(ε / λ_max)`: the ball of this radius lies inside
    /// `{x^T P x <= ε}`.
    pub fn lower(&self) -> PowerLaw {
        PowerLaw { coefficient: (1.0 - SANDWICH_MARGIN) / libm::sqrt(self.lambda_max), exponent: 0.5 }
    }

    /// `B(ε) = sqrt(ε / λ_min)`: the ball of this radius contains
    /// `{x^T P x <= ε}`.
    pub fn upper(&self) -> PowerLaw {
        PowerLaw { coefficient: (1.0 + SANDWICH_MARGIN) / libm::sqrt(self.lambda_min), exponent: 0.5 }
    }
}

/// Wraps `V(x) = x^T P x` into a Lyapunov certificate centered at the
/// origin and checks it on `scope`.
pub fn quadratic_to_lyapunov(
    sys: &EuclideanSystem,
    p: &Matrix,
    grid: Vec<Rational>,
    scope: &Scope<Point>,
) -> Result<LyapunovCertificate<Point>> {
    if p.dim() != sys.dim() {
        return Err(Error::DimensionMismatch { expected: sys.dim(), found: p.dim() });
    }
    validate_grid(&grid)?;
    let cert = QuadraticCertificate::new(p.clone())?;
    let levels = LevelSetFamily::Sublevel { grid, observable: Observable::Quadratic(p.to_rational()?) };
    let origin = vec![Rational::from_integer(0.into()); sys.dim()];
    let lyap = LyapunovCertificate::new(
        origin,
        levels,
        ComparisonFunction::Power(cert.lower()),
        ComparisonFunction::Power(cert.upper()),
    )?;
    match verify_lyapunov(sys, &lyap, scope)? {
        Verdict::Fail(w) => Err(Error::CertificateRejected(format!("quadratic certificate fails: {w:?}"))),
        _ => Ok(lyap),
    }
}

/// The mode whose `A_i^T P A_i - P` has a positive direction.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeWitness {
    pub mode: usize,
    pub vector: Vec<f64>,
    pub growth: f64,
}

/// Passes when `A_i^T P A_i - P` is negative semidefinite for every mode,
/// which makes `x^T P x` non-increasing under every word.
pub fn check_common_quadratic(modes: &[Matrix], p: &Matrix) -> Result<Verdict<ModeWitness>> {
    QuadraticCertificate::new(p.clone())?;
    for (i, a) in modes.iter().enumerate() {
        a.check_same_dim(p)?;
        let m = a.transpose().mul(p).mul(a).sub(p);
        let sym = m.add(&m.transpose()).scale(0.5);
        let eig = symmetric_eigen(&sym)?;
        let top = *eig.values.last().expect("n >= 1");
        if top > 1e-12 * p.max_abs().max(1.0) {
            let vector = eig.vectors.last().cloned().expect("n >= 1");
            return Ok(Verdict::Fail(ModeWitness { mode: i, vector, growth: top }));
        }
    }
    Ok(Verdict::Sampled)
}

/// The matrices of a linear or switching system.
pub fn modes_of(sys: &EuclideanSystem) -> Option<Vec<Matrix>> {
    sys.linear_modes().map(|ms| ms.into_iter().map(Matrix::from_rational).collect())
}

/// A step where `x^T P x` grew along a sampled trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryWitness {
    pub trajectory: usize,
    pub step: usize,
    pub before: f64,
    pub after: f64,
}

/// Follows each `(start, word)` pair and checks `V` never grows by more
/// than `tolerance` relative to its current value.
pub fn check_trajectories(
    modes: &[Matrix],
    p: &Matrix,
    trajectories: &[(Vec<f64>, Vec<u8>)],
    tolerance: f64,
) -> Result<Verdict<TrajectoryWitness>> {
    for (index, (start, word)) in trajectories.iter().enumerate() {
        if start.len() != p.dim() {
            return Err(Error::DimensionMismatch { expected: p.dim(), found: start.len() });
        }
        let mut x = start.clone();
        let mut v = p.quadratic_form(&x);
        for (step, &letter) in word.iter().enumerate() {
            let a = modes
                .get(letter as usize)
                .ok_or_else(|| Error::InvalidTimePoint(format!("letter {letter} has no mode")))?;
            x = a.apply(&x);
            let next = p.quadratic_form(&x);
            if next > v + tolerance * v.abs().max(1.0) {
                return Ok(Verdict::Fail(TrajectoryWitness { trajectory: index, step, before: v, after: next }));
            }
            v = next;
        }
    }
    Ok(Verdict::Sampled)
}
