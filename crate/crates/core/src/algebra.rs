//! Finite-dimensional commutative algebras given by structure constants.
//!
//! A [`PointAlgebra`] models the tangent algebra at a single point:
//! `structure[a][b][c]` is the coefficient of basis vector `c` in the
//! product of basis vectors `a` and `b`. The same code serves exact
//! rational algebras and complex numeric ones through [`Scalar`].
//!
//! Block decomposition splits the algebra into local summands using the
//! generalized eigenspaces of multiplication by a random (seeded) element.
//! Rational algebras are split exactly when the characteristic polynomial of
//! that element has only rational roots; otherwise the numeric path is used
//! and the result says so.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::linalg::{self, Matrix, Scalar, Solution};
use crate::series::{format_rational, parse_rational, Rational};

/// Retries allowed after the first generic element collides.
pub const MAX_DECOMPOSITION_RETRIES: usize = 8;

/// Default tolerance for numeric axiom checks, relative to the entry scale.
pub const NUMERIC_TOLERANCE: f64 = 1e-10;

/// Eigenvalues of the generic element closer than this (relative) belong
/// to the same block.
pub const CLUSTER_RADIUS: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("algebra has no identity")]
    NoIdentity,
    #[error("element is not invertible")]
    NotInvertible,
    #[error("algebra is not commutative, associative and unital")]
    NotAnAlgebra,
    #[error("ill-conditioned decomposition: {0}")]
    IllConditioned(String),
    #[error("invalid algebra document: {0}")]
    InvalidDocument(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgebraReport {
    pub commutative: bool,
    pub associative: bool,
    pub unital: bool,
}

impl AlgebraReport {
    pub fn all(&self) -> bool {
        self.commutative && self.associative && self.unital
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecompositionMode {
    Exact,
    Numeric,
}

/// Orthogonal idempotents splitting an algebra into local blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct IdempotentDecomposition<S> {
    pub idempotents: Vec<Vec<S>>,
    pub block_dims: Vec<usize>,
    pub mode: DecompositionMode,
    /// Generic elements tried, including the successful one.
    pub attempts: usize,
}

/// Result of decomposing an algebra; rational algebras may fall back to
/// numeric idempotents.
#[derive(Clone, Debug, PartialEq)]
pub enum Decomposition {
    Exact(IdempotentDecomposition<Rational>),
    Numeric(IdempotentDecomposition<Complex64>),
}

impl Decomposition {
    pub fn block_dims(&self) -> &[usize] {
        match self {
            Decomposition::Exact(d) => &d.block_dims,
            Decomposition::Numeric(d) => &d.block_dims,
        }
    }

    pub fn mode(&self) -> DecompositionMode {
        match self {
            Decomposition::Exact(_) => DecompositionMode::Exact,
            Decomposition::Numeric(_) => DecompositionMode::Numeric,
        }
    }

    pub fn idempotents_complex(&self) -> Vec<Vec<Complex64>> {
        match self {
            Decomposition::Exact(d) => {
                d.idempotents.iter().map(|v| v.iter().map(Scalar::to_complex).collect()).collect()
            }
            Decomposition::Numeric(d) => d.idempotents.clone(),
        }
    }
}

/// Characters of the semisimple quotient, one per block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoints {
    /// `characters[i][a]` is the value of character `i` on basis element `a`.
    pub characters: Vec<Vec<Complex64>>,
    /// Set when some block is not one-dimensional.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointAlgebra<S> {
    dim: usize,
    structure: Vec<Vec<Vec<S>>>,
    identity: Option<Vec<S>>,
}

impl<S: Scalar> PointAlgebra<S> {
    pub fn new(structure: Vec<Vec<Vec<S>>>) -> Result<Self, AlgebraError> {
        let dim = structure.len();
        if dim == 0 {
            return Err(AlgebraError::Dimension("dimension must be positive".into()));
        }
        for (a, plane) in structure.iter().enumerate() {
            if plane.len() != dim || plane.iter().any(|row| row.len() != dim) {
                return Err(AlgebraError::Dimension(format!("slice {a} is not {dim}x{dim}")));
            }
        }
        Ok(Self { dim, structure, identity: None })
    }

    /// Attach a declared identity vector (not verified here).
    pub fn with_identity(mut self, identity: Vec<S>) -> Result<Self, AlgebraError> {
        if identity.len() != self.dim {
            return Err(AlgebraError::Dimension("identity has wrong length".into()));
        }
        self.identity = Some(identity);
        Ok(self)
    }

    /// `K^d` with componentwise product.
    pub fn diagonal(dim: usize) -> Self {
        let mut structure = vec![vec![vec![S::zero(); dim]; dim]; dim];
        for (a, plane) in structure.iter_mut().enumerate() {
            plane[a][a] = S::one();
        }
        Self { dim, structure, identity: Some(vec![S::one(); dim]) }
    }

    /// `K[t]/t^len` in the basis `1, t, ..., t^{len-1}`.
    pub fn truncated_polynomial(len: usize) -> Self {
        let mut structure = vec![vec![vec![S::zero(); len]; len]; len];
        for a in 0..len {
            for b in 0..len {
                if a + b < len {
                    structure[a][b][a + b] = S::one();
                }
            }
        }
        let mut identity = vec![S::zero(); len];
        identity[0] = S::one();
        Self { dim: len, structure, identity: Some(identity) }
    }

    /// Direct sum: basis of `self` followed by the basis of `other`.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let dim = self.dim + other.dim;
        let mut structure = vec![vec![vec![S::zero(); dim]; dim]; dim];
        for a in 0..self.dim {
            for b in 0..self.dim {
                for c in 0..self.dim {
                    structure[a][b][c] = self.structure[a][b][c].clone();
                }
            }
        }
        let k = self.dim;
        for a in 0..other.dim {
            for b in 0..other.dim {
                for c in 0..other.dim {
                    structure[k + a][k + b][k + c] = other.structure[a][b][c].clone();
                }
            }
        }
        let identity = match (&self.identity, &other.identity) {
            (Some(x), Some(y)) => Some(x.iter().chain(y).cloned().collect()),
            _ => None,
        };
        Self { dim, structure, identity }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn structure(&self) -> &[Vec<Vec<S>>] {
        &self.structure
    }

    pub fn declared_identity(&self) -> Option<&[S]> {
        self.identity.as_deref()
    }

    /// Declared identity, or the solved one.
    pub fn identity(&self) -> Option<Vec<S>> {
        self.identity.clone().or_else(|| self.find_identity())
    }

    fn scale(&self) -> f64 {
        self.structure.iter().flatten().flatten().map(Scalar::magnitude).fold(1.0, f64::max)
    }

    fn tol(&self) -> f64 {
        NUMERIC_TOLERANCE * self.scale()
    }

    pub fn basis(&self, a: usize) -> Vec<S> {
        (0..self.dim).map(|i| if i == a { S::one() } else { S::zero() }).collect()
    }

    pub fn product(&self, x: &[S], y: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.dim];
        for a in 0..self.dim {
            if x[a].is_zero() {
                continue;
            }
            for b in 0..self.dim {
                if y[b].is_zero() {
                    continue;
                }
                let w = x[a].clone() * y[b].clone();
                for (c, slot) in out.iter_mut().enumerate() {
                    let entry = &self.structure[a][b][c];
                    if !entry.is_zero() {
                        *slot = slot.clone() + w.clone() * entry.clone();
                    }
                }
            }
        }
        out
    }

    /// Matrix of `y -> v∘y`; column `b` holds `v∘basis_b`.
    pub fn multiplication_operator(&self, v: &[S]) -> Matrix<S> {
        let mut m = vec![vec![S::zero(); self.dim]; self.dim];
        for a in 0..self.dim {
            if v[a].is_zero() {
                continue;
            }
            for b in 0..self.dim {
                for c in 0..self.dim {
                    let entry = &self.structure[a][b][c];
                    if !entry.is_zero() {
                        m[c][b] = m[c][b].clone() + v[a].clone() * entry.clone();
                    }
                }
            }
        }
        m
    }

    fn vectors_close(&self, x: &[S], y: &[S], tol: f64) -> bool {
        x.iter().zip(y).all(|(a, b)| (a.clone() - b.clone()).is_negligible(tol))
    }

    /// Check the algebra axioms on basis elements (exact or to tolerance).
    pub fn verify(&self) -> AlgebraReport {
        let tol = self.tol();
        let d = self.dim;
        let commutative = (0..d).all(|a| {
            (0..d).all(|b| {
                (0..d).all(|c| (self.structure[a][b][c].clone() - self.structure[b][a][c].clone()).is_negligible(tol))
            })
        });
        let mut associative = true;
        'outer: for a in 0..d {
            for b in 0..d {
                let ab = self.structure[a][b].clone();
                for c in 0..d {
                    let bc = self.structure[b][c].clone();
                    let left = self.product(&ab, &self.basis(c));
                    let right = self.product(&self.basis(a), &bc);
                    if !self.vectors_close(&left, &right, tol * self.scale()) {
                        associative = false;
                        break 'outer;
                    }
                }
            }
        }
        let unital = match &self.identity {
            Some(e) => (0..d).all(|b| {
                let x = self.basis(b);
                self.vectors_close(&self.product(e, &x), &x, tol) && self.vectors_close(&self.product(&x, e), &x, tol)
            }),
            None => self.find_identity().is_some(),
        };
        AlgebraReport { commutative, associative, unital }
    }

    /// Solve `e∘basis_b = basis_b` for all `b`; `None` unless the solution
    /// exists and is unique.
    pub fn find_identity(&self) -> Option<Vec<S>> {
        let d = self.dim;
        let mut rows = Vec::with_capacity(d * d);
        let mut rhs = Vec::with_capacity(d * d);
        for b in 0..d {
            for c in 0..d {
                rows.push((0..d).map(|a| self.structure[a][b][c].clone()).collect());
                rhs.push(if b == c { S::one() } else { S::zero() });
            }
        }
        match linalg::solve(&rows, &rhs, self.tol()) {
            Solution::Unique(e) => Some(e),
            _ => None,
        }
    }

    /// `w` with `v∘w = e`.
    pub fn invert(&self, v: &[S]) -> Result<Vec<S>, AlgebraError> {
        if v.len() != self.dim {
            return Err(AlgebraError::Dimension("vector has wrong length".into()));
        }
        let e = self.identity().ok_or(AlgebraError::NoIdentity)?;
        let op = self.multiplication_operator(v);
        let tol = self.tol() * linalg::max_magnitude(&op).max(1.0);
        if !S::EXACT {
            let det = linalg::determinant(&op);
            let scale = linalg::max_magnitude(&op).max(1e-300).powi(self.dim as i32);
            if det.magnitude() <= 1e-12 * scale {
                return Err(AlgebraError::NotInvertible);
            }
        }
        match linalg::solve(&op, &e, tol) {
            Solution::Unique(w) => Ok(w),
            _ => Err(AlgebraError::NotInvertible),
        }
    }

    /// Twisted algebra `X*Y = ε^{-1}∘X∘Y` with identity `ε`.
    pub fn twist(&self, epsilon: &[S]) -> Result<Self, AlgebraError> {
        let inverse = self.invert(epsilon)?;
        let d = self.dim;
        let mut structure = vec![vec![vec![S::zero(); d]; d]; d];
        for a in 0..d {
            for b in a..d {
                let v = self.product(&inverse, &self.structure[a][b]);
                structure[a][b] = v.clone();
                structure[b][a] = v;
            }
        }
        Ok(Self { dim: d, structure, identity: Some(epsilon.to_vec()) })
    }

    /// Re-express the algebra in the basis whose `i`-th vector is column `i`
    /// of `change`.
    pub fn change_basis(&self, change: &Matrix<S>) -> Result<Self, AlgebraError> {
        let d = self.dim;
        let inv = linalg::inverse(change, self.tol())
            .ok_or_else(|| AlgebraError::Dimension("basis change is singular".into()))?;
        let columns: Vec<Vec<S>> = (0..d).map(|i| (0..d).map(|k| change[k][i].clone()).collect()).collect();
        let mut structure = vec![vec![vec![S::zero(); d]; d]; d];
        for i in 0..d {
            for j in 0..d {
                let prod = self.product(&columns[i], &columns[j]);
                structure[i][j] = linalg::mat_vec(&inv, &prod);
            }
        }
        let identity = self.identity.as_ref().map(|e| linalg::mat_vec(&inv, e));
        Ok(Self { dim: d, structure, identity })
    }

    pub fn map_scalars<T: Scalar>(&self, f: impl Fn(&S) -> T) -> PointAlgebra<T> {
        PointAlgebra {
            dim: self.dim,
            structure: self.structure.iter().map(|p| p.iter().map(|r| r.iter().map(&f).collect()).collect()).collect(),
            identity: self.identity.as_ref().map(|e| e.iter().map(&f).collect()),
        }
    }

    pub fn to_complex(&self) -> PointAlgebra<Complex64> {
        self.map_scalars(Scalar::to_complex)
    }

    fn require_algebra(&self) -> Result<Vec<S>, AlgebraError> {
        let report = self.verify();
        if !(report.commutative && report.associative) {
            return Err(AlgebraError::NotAnAlgebra);
        }
        self.identity().ok_or(AlgebraError::NotAnAlgebra)
    }

    /// Characters of the blocks: `chi_i(a) = tr(L_a L_{pi_i}) / dim_i`.
    fn block_characters(&self, idempotents: &[Vec<S>], dims: &[usize]) -> Vec<Vec<Complex64>> {
        idempotents
            .iter()
            .zip(dims)
            .map(|(pi, &dim)| {
                let lp = self.multiplication_operator(pi);
                (0..self.dim)
                    .map(|a| {
                        let la = self.multiplication_operator(&self.basis(a));
                        let t = linalg::trace(&linalg::mat_mul(&la, &lp));
                        t.to_complex() / dim as f64
                    })
                    .collect()
            })
            .collect()
    }
}

/// Block decomposition and the quantities derived from it.
pub trait Decompose {
    fn decompose(&self, seed: u64) -> Result<Decomposition, AlgebraError>;

    fn spectral_points(&self, seed: u64) -> Result<SpectralPoints, AlgebraError>;

    fn is_semisimple(&self, seed: u64) -> Result<bool, AlgebraError> {
        Ok(self.decompose(seed)?.block_dims().iter().all(|&k| k == 1))
    }
}

impl Decompose for PointAlgebra<Rational> {
    fn decompose(&self, seed: u64) -> Result<Decomposition, AlgebraError> {
        let identity = self.require_algebra()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for attempt in 0..=MAX_DECOMPOSITION_RETRIES {
            let g: Vec<Rational> = random_rational_vector(&mut rng, self.dim);
            match exact_split(self, &identity, &g) {
                ExactSplit::Done(idempotents, block_dims) => {
                    let (idempotents, block_dims) = sort_blocks(idempotents, block_dims);
                    return Ok(Decomposition::Exact(IdempotentDecomposition {
                        idempotents,
                        block_dims,
                        mode: DecompositionMode::Exact,
                        attempts: attempt + 1,
                    }));
                }
                ExactSplit::NeedsFactoring => {
                    return self.to_complex().decompose(seed);
                }
                ExactSplit::Collision => continue,
            }
        }
        Err(AlgebraError::IllConditioned(format!(
            "no generic element found in {} attempts",
            MAX_DECOMPOSITION_RETRIES + 1
        )))
    }

    fn spectral_points(&self, seed: u64) -> Result<SpectralPoints, AlgebraError> {
        match self.decompose(seed)? {
            Decomposition::Exact(d) => {
                let characters = self.block_characters(&d.idempotents, &d.block_dims);
                Ok(SpectralPoints { characters, degenerate: d.block_dims.iter().any(|&k| k != 1) })
            }
            Decomposition::Numeric(d) => {
                let complex = self.to_complex();
                let characters = complex.block_characters(&d.idempotents, &d.block_dims);
                Ok(SpectralPoints { characters, degenerate: d.block_dims.iter().any(|&k| k != 1) })
            }
        }
    }
}

impl Decompose for PointAlgebra<Complex64> {
    fn decompose(&self, seed: u64) -> Result<Decomposition, AlgebraError> {
        let identity = self.require_algebra()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut last_reason = String::new();
        for attempt in 0..=MAX_DECOMPOSITION_RETRIES {
            let g: Vec<Complex64> = (0..self.dim)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            match numeric_split(self, &identity, &g, &mut rng) {
                Ok((idempotents, block_dims)) => {
                    let (idempotents, block_dims) = sort_blocks(idempotents, block_dims);
                    return Ok(Decomposition::Numeric(IdempotentDecomposition {
                        idempotents,
                        block_dims,
                        mode: DecompositionMode::Numeric,
                        attempts: attempt + 1,
                    }));
                }
                Err(reason) => last_reason = reason,
            }
        }
        Err(AlgebraError::IllConditioned(last_reason))
    }

    fn spectral_points(&self, seed: u64) -> Result<SpectralPoints, AlgebraError> {
        let d = self.decompose(seed)?;
        let Decomposition::Numeric(d) = d else { unreachable!("complex algebras split numerically") };
        let characters = self.block_characters(&d.idempotents, &d.block_dims);
        Ok(SpectralPoints { characters, degenerate: d.block_dims.iter().any(|&k| k != 1) })
    }
}

fn random_rational_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Rational> {
    loop {
        let v: Vec<Rational> = (0..dim).map(|_| Rational::from_integer(rng.random_range(-9i64..=9).into())).collect();
        if v.iter().any(|x| !x.is_zero()) {
            return v;
        }
    }
}

trait SortKey {
    fn key(&self) -> (f64, f64);
}

impl SortKey for Rational {
    fn key(&self) -> (f64, f64) {
        (self.to_f64().unwrap_or(0.0), 0.0)
    }
}

impl SortKey for Complex64 {
    fn key(&self) -> (f64, f64) {
        (self.re, self.im)
    }
}

/// Order blocks by their idempotent vectors, largest leading coordinate first.
fn sort_blocks<S: SortKey + Clone>(idempotents: Vec<Vec<S>>, dims: Vec<usize>) -> (Vec<Vec<S>>, Vec<usize>) {
    let mut blocks: Vec<(Vec<S>, usize)> = idempotents.into_iter().zip(dims).collect();
    let cmp_scalar = |a: &S, b: &S| -> Ordering {
        let (ar, ai) = a.key();
        let (br, bi) = b.key();
        let r = (ar * 1e9).round().total_cmp(&(br * 1e9).round());
        if r != Ordering::Equal {
            return r;
        }
        (ai * 1e9).round().total_cmp(&(bi * 1e9).round())
    };
    blocks.sort_by(|(x, _), (y, _)| {
        for (a, b) in x.iter().zip(y) {
            let c = cmp_scalar(b, a);
            if c != Ordering::Equal {
                return c;
            }
        }
        Ordering::Equal
    });
    blocks.into_iter().unzip()
}

enum ExactSplit {
    Done(Vec<Vec<Rational>>, Vec<usize>),
    NeedsFactoring,
    Collision,
}

/// Characteristic polynomial coefficients, constant term first, monic.
pub(crate) fn characteristic_polynomial(m: &Matrix<Rational>) -> Vec<Rational> {
    // Faddeev-LeVerrier.
    let n = m.len();
    let mut coeffs = vec![Rational::zero(); n + 1];
    coeffs[n] = Rational::one();
    let mut aux: Matrix<Rational> = vec![vec![Rational::zero(); n]; n];
    for k in 1..=n {
        let mut next = linalg::mat_mul(m, &aux);
        for (i, row) in next.iter_mut().enumerate() {
            row[i] += coeffs[n - k + 1].clone();
        }
        aux = next;
        let am = linalg::mat_mul(m, &aux);
        coeffs[n - k] = -linalg::trace(&am) / Rational::from_integer((k as i64).into());
    }
    coeffs
}

fn poly_eval(coeffs: &[Rational], x: &Rational) -> Rational {
    coeffs.iter().rev().fold(Rational::zero(), |acc, c| acc * x + c)
}

/// Divide by `(t - root)`; the remainder is assumed zero.
fn deflate(coeffs: &[Rational], root: &Rational) -> Vec<Rational> {
    let n = coeffs.len() - 1;
    let mut out = vec![Rational::zero(); n];
    let mut carry = Rational::zero();
    for k in (0..n).rev() {
        carry = coeffs[k + 1].clone() + carry * root;
        out[k] = carry.clone();
    }
    out
}

/// Convergents of the continued fraction of `x`.
fn convergents(x: f64, limit: usize) -> Vec<Rational> {
    let mut out = Vec::new();
    let (mut h0, mut h1) = (num_bigint::BigInt::zero(), num_bigint::BigInt::one());
    let (mut k0, mut k1) = (num_bigint::BigInt::one(), num_bigint::BigInt::zero());
    let mut rest = x;
    for _ in 0..limit {
        if !rest.is_finite() || rest.abs() > 1e15 {
            break;
        }
        let a = rest.floor();
        let ai = num_bigint::BigInt::from(a as i64);
        let h2 = &ai * &h1 + &h0;
        let k2 = &ai * &k1 + &k0;
        out.push(Rational::new(h2.clone(), k2.clone()));
        h0 = std::mem::replace(&mut h1, h2);
        k0 = std::mem::replace(&mut k1, k2);
        let frac = rest - a;
        if frac.abs() < 1e-13 {
            break;
        }
        rest = 1.0 / frac;
    }
    out
}

/// Rational roots with multiplicity, or `None` if the polynomial does not
/// split over the rationals.
fn rational_roots(coeffs: &[Rational]) -> Option<Vec<(Rational, usize)>> {
    let n = coeffs.len() - 1;
    let companion = DMatrix::<f64>::from_fn(n, n, |i, j| {
        if j == n - 1 {
            -coeffs[i].to_f64().unwrap_or(f64::NAN)
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let approx = companion.complex_eigenvalues();
    let mut remaining = coeffs.to_vec();
    let mut roots: Vec<(Rational, usize)> = Vec::new();
    for z in approx.iter() {
        if remaining.len() == 1 {
            break;
        }
        let scale = 1.0 + z.norm();
        if z.im.abs() > 1e-4 * scale {
            return None;
        }
        // A coarse convergent may be a different root; take the nearest.
        let found =
            convergents(z.re, 40).into_iter().filter(|cand| poly_eval(&remaining, cand).is_zero()).min_by(|x, y| {
                let dx = (x.to_f64().unwrap_or(f64::INFINITY) - z.re).abs();
                let dy = (y.to_f64().unwrap_or(f64::INFINITY) - z.re).abs();
                dx.total_cmp(&dy)
            });
        let Some(root) = found else {
            continue;
        };
        let mut mult = 0;
        while remaining.len() > 1 && poly_eval(&remaining, &root).is_zero() {
            remaining = deflate(&remaining, &root);
            mult += 1;
        }
        roots.push((root, mult));
    }
    if remaining.len() == 1 {
        Some(roots)
    } else {
        None
    }
}

fn exact_split(alg: &PointAlgebra<Rational>, identity: &[Rational], g: &[Rational]) -> ExactSplit {
    let d = alg.dim();
    let lg = alg.multiplication_operator(g);
    let charpoly = characteristic_polynomial(&lg);
    let Some(roots) = rational_roots(&charpoly) else {
        return ExactSplit::NeedsFactoring;
    };
    // Generalized eigenspaces.
    let mut spaces: Vec<Vec<Vec<Rational>>> = Vec::new();
    for (root, mult) in &roots {
        let mut shifted = lg.clone();
        for (i, row) in shifted.iter_mut().enumerate() {
            row[i] -= root.clone();
        }
        let mut power = linalg::identity::<Rational>(d);
        for _ in 0..*mult {
            power = linalg::mat_mul(&power, &shifted);
        }
        let basis = linalg::kernel(&power, 0.0);
        if basis.len() != *mult {
            return ExactSplit::Collision;
        }
        spaces.push(basis);
    }
    // Split the identity along the direct sum of the eigenspaces.
    let columns: Vec<&Vec<Rational>> = spaces.iter().flatten().collect();
    let basis_matrix: Matrix<Rational> = (0..d).map(|i| columns.iter().map(|v| v[i].clone()).collect()).collect();
    let Solution::Unique(coords) = linalg::solve(&basis_matrix, identity, 0.0) else {
        return ExactSplit::Collision;
    };
    let mut idempotents = Vec::new();
    let mut dims = Vec::new();
    let mut offset = 0;
    for space in &spaces {
        let mut pi = vec![Rational::zero(); d];
        for (k, v) in space.iter().enumerate() {
            for i in 0..d {
                pi[i] += coords[offset + k].clone() * v[i].clone();
            }
        }
        // Each block must be local: every basis element of the block acts
        // with a single eigenvalue.
        for v in space {
            let op = alg.multiplication_operator(v);
            let restricted = restrict(&op, space);
            if !single_eigenvalue(&restricted) {
                return ExactSplit::Collision;
            }
        }
        offset += space.len();
        dims.push(space.len());
        idempotents.push(pi);
    }
    ExactSplit::Done(idempotents, dims)
}

/// Matrix of `op` restricted to the invariant subspace spanned by `space`.
fn restrict(op: &Matrix<Rational>, space: &[Vec<Rational>]) -> Matrix<Rational> {
    let d = op.len();
    let k = space.len();
    let basis: Matrix<Rational> = (0..d).map(|i| space.iter().map(|v| v[i].clone()).collect()).collect();
    let mut out = vec![vec![Rational::zero(); k]; k];
    for (j, v) in space.iter().enumerate() {
        let image = linalg::mat_vec(op, v);
        match linalg::solve(&basis, &image, 0.0) {
            Solution::Unique(c) => {
                for i in 0..k {
                    out[i][j] = c[i].clone();
                }
            }
            _ => return vec![vec![Rational::zero(); k]; k],
        }
    }
    out
}

fn single_eigenvalue(m: &Matrix<Rational>) -> bool {
    let k = m.len();
    let mu = linalg::trace(m) / Rational::from_integer((k as i64).into());
    let mut shifted = m.clone();
    for (i, row) in shifted.iter_mut().enumerate() {
        row[i] -= mu.clone();
    }
    let mut power = linalg::identity::<Rational>(k);
    for _ in 0..k {
        power = linalg::mat_mul(&power, &shifted);
    }
    power.iter().flatten().all(Zero::is_zero)
}

fn to_dmatrix(m: &Matrix<Complex64>) -> DMatrix<Complex64> {
    let n = m.len();
    DMatrix::from_fn(n, n, |i, j| m[i][j])
}

/// Single-linkage clustering of eigenvalues within `radius`.
fn cluster(values: &[Complex64], radius: f64) -> Vec<Vec<Complex64>> {
    let mut clusters: Vec<Vec<Complex64>> = Vec::new();
    for &z in values {
        let touching: Vec<usize> = clusters
            .iter()
            .enumerate()
            .filter(|(_, c)| c.iter().any(|w| (w - z).norm() <= radius))
            .map(|(i, _)| i)
            .collect();
        let mut merged = vec![z];
        for &i in touching.iter().rev() {
            merged.extend(clusters.remove(i));
        }
        clusters.push(merged);
    }
    clusters
}

/// Spectral projectors by contour integration of the resolvent, then the
/// idempotents as projections of the identity.
fn numeric_split(
    alg: &PointAlgebra<Complex64>,
    identity: &[Complex64],
    g: &[Complex64],
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Vec<Complex64>>, Vec<usize>), String> {
    let d = alg.dim();
    let lg = alg.multiplication_operator(g);
    let lgm = to_dmatrix(&lg);
    let eig = lgm.clone().schur().eigenvalues().ok_or_else(|| "eigenvalue computation failed".to_string())?;
    let values: Vec<Complex64> = eig.iter().copied().collect();
    let scale = values.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let clusters = cluster(&values, CLUSTER_RADIUS * scale);
    let centres: Vec<Complex64> = clusters.iter().map(|c| c.iter().sum::<Complex64>() / c.len() as f64).collect();
    let mut idempotents = Vec::new();
    let mut dims = Vec::new();
    const NODES: usize = 64;
    for (j, centre) in centres.iter().enumerate() {
        let projector = if centres.len() == 1 {
            DMatrix::<Complex64>::identity(d, d)
        } else {
            let gap = centres
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != j)
                .map(|(_, w)| (w - centre).norm())
                .fold(f64::INFINITY, f64::min);
            let radius = 0.5 * gap;
            let mut acc = DMatrix::<Complex64>::zeros(d, d);
            for k in 0..NODES {
                let omega = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / NODES as f64);
                let z = centre + omega * radius;
                let shifted = DMatrix::<Complex64>::identity(d, d) * z - &lgm;
                let inv = shifted.try_inverse().ok_or_else(|| "resolvent is singular".to_string())?;
                acc += inv * (omega * radius);
            }
            acc / Complex64::new(NODES as f64, 0.0)
        };
        let size = clusters[j].len();
        let tr = projector.trace();
        if (tr - Complex64::new(size as f64, 0.0)).norm() > 1e-6 {
            return Err(format!("projector trace {tr} does not match block size {size}"));
        }
        let e = nalgebra::DVector::from_column_slice(identity);
        let mut pi: Vec<Complex64> = (&projector * e).iter().copied().collect();
        // Newton polish towards an exact idempotent: pi <- pi^2 (3e - 2 pi).
        for _ in 0..3 {
            let sq = alg.product(&pi, &pi);
            let lin: Vec<Complex64> = identity.iter().zip(&pi).map(|(e, p)| e * 3.0 - p * 2.0).collect();
            pi = alg.product(&sq, &lin);
        }
        idempotents.push(pi);
        dims.push(size);
    }
    let tol = 1e-8 * alg.scale();
    // Orthogonality and completeness.
    for i in 0..idempotents.len() {
        for j in 0..idempotents.len() {
            let p = alg.product(&idempotents[i], &idempotents[j]);
            let target: Vec<Complex64> = if i == j { idempotents[i].clone() } else { vec![Complex64::zero(); d] };
            if p.iter().zip(&target).any(|(a, b)| (a - b).norm() > tol) {
                return Err("idempotents are not orthogonal".into());
            }
        }
    }
    let sum: Vec<Complex64> = (0..d).map(|c| idempotents.iter().map(|p| p[c]).sum()).collect();
    if sum.iter().zip(identity).any(|(a, b)| (a - b).norm() > tol) {
        return Err("idempotents do not sum to the identity".into());
    }
    // Locality: a random element acts on each block with one eigenvalue.
    for _ in 0..2 {
        let h: Vec<Complex64> =
            (0..d).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        for (pi, &size) in idempotents.iter().zip(&dims) {
            let block_h = alg.product(&h, pi);
            let op = to_dmatrix(&alg.multiplication_operator(&block_h));
            let lp = to_dmatrix(&alg.multiplication_operator(pi));
            let mu = op.trace() / size as f64;
            let shifted = &op - &lp * mu;
            let mut power = lp.clone();
            for _ in 0..size {
                power = &shifted * power;
            }
            let bound = 1e-6 * (op.norm() + 1.0).powi(size as i32);
            if power.norm() > bound {
                return Err("generic element merged two blocks".into());
            }
        }
    }
    Ok((idempotents, dims))
}

/// JSON document form of an algebra.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgebraDoc {
    pub dim: usize,
    pub mode: String,
    pub structure: Vec<Vec<Vec<Value>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity: Option<Vec<Value>>,
}

/// An algebra read from a document, in whichever mode it declared.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyAlgebra {
    Rational(PointAlgebra<Rational>),
    Complex(PointAlgebra<Complex64>),
}

pub fn rational_to_value(value: &Rational) -> Value {
    serde_json::json!({"num": value.numer().to_string(), "den": value.denom().to_string()})
}

pub fn complex_to_value(value: &Complex64) -> Value {
    serde_json::json!([value.re, value.im])
}

pub fn value_to_rational(value: &Value) -> Result<Rational, AlgebraError> {
    let bad = || AlgebraError::InvalidDocument(format!("bad rational entry {value}"));
    match value {
        Value::Object(map) => {
            let num = map.get("num").and_then(Value::as_str).ok_or_else(bad)?;
            let den = map.get("den").and_then(Value::as_str).ok_or_else(bad)?;
            let num: num_bigint::BigInt = num.parse().map_err(|_| bad())?;
            let den: num_bigint::BigInt = den.parse().map_err(|_| bad())?;
            if !den.is_positive() {
                return Err(bad());
            }
            Ok(Rational::new(num, den))
        }
        Value::String(s) => parse_rational(s).ok_or_else(bad),
        Value::Number(n) if n.is_i64() => Ok(Rational::from_integer(n.as_i64().unwrap_or(0).into())),
        _ => Err(bad()),
    }
}

pub fn value_to_complex(value: &Value) -> Result<Complex64, AlgebraError> {
    let bad = || AlgebraError::InvalidDocument(format!("bad complex entry {value}"));
    match value {
        Value::Array(parts) if parts.len() == 2 => {
            let re = parts[0].as_f64().ok_or_else(bad)?;
            let im = parts[1].as_f64().ok_or_else(bad)?;
            Ok(Complex64::new(re, im))
        }
        Value::Number(n) => Ok(Complex64::new(n.as_f64().ok_or_else(bad)?, 0.0)),
        _ => Err(bad()),
    }
}

fn structure_to_values<S>(structure: &[Vec<Vec<S>>], f: impl Fn(&S) -> Value) -> Vec<Vec<Vec<Value>>> {
    structure.iter().map(|p| p.iter().map(|r| r.iter().map(&f).collect()).collect()).collect()
}

impl AnyAlgebra {
    pub fn dim(&self) -> usize {
        match self {
            AnyAlgebra::Rational(a) => a.dim(),
            AnyAlgebra::Complex(a) => a.dim(),
        }
    }

    pub fn to_doc(&self) -> AlgebraDoc {
        match self {
            AnyAlgebra::Rational(a) => AlgebraDoc {
                dim: a.dim(),
                mode: "rational".into(),
                structure: structure_to_values(a.structure(), rational_to_value),
                identity: a.declared_identity().map(|e| e.iter().map(rational_to_value).collect()),
            },
            AnyAlgebra::Complex(a) => AlgebraDoc {
                dim: a.dim(),
                mode: "complex".into(),
                structure: structure_to_values(a.structure(), complex_to_value),
                identity: a.declared_identity().map(|e| e.iter().map(complex_to_value).collect()),
            },
        }
    }

    pub fn from_doc(doc: &AlgebraDoc) -> Result<Self, AlgebraError> {
        let d = doc.dim;
        if doc.structure.len() != d || doc.structure.iter().any(|p| p.len() != d || p.iter().any(|r| r.len() != d)) {
            return Err(AlgebraError::InvalidDocument(format!("structure is not {d}x{d}x{d}")));
        }
        if let Some(e) = &doc.identity {
            if e.len() != d {
                return Err(AlgebraError::InvalidDocument("identity has wrong length".into()));
            }
        }
        match doc.mode.as_str() {
            "rational" => {
                let structure = doc
                    .structure
                    .iter()
                    .map(|p| p.iter().map(|r| r.iter().map(value_to_rational).collect()).collect())
                    .collect::<Result<Vec<Vec<Vec<Rational>>>, _>>()?;
                let mut alg = PointAlgebra::new(structure)?;
                if let Some(e) = &doc.identity {
                    alg = alg.with_identity(e.iter().map(value_to_rational).collect::<Result<_, _>>()?)?;
                }
                Ok(AnyAlgebra::Rational(alg))
            }
            "complex" => {
                let structure = doc
                    .structure
                    .iter()
                    .map(|p| p.iter().map(|r| r.iter().map(value_to_complex).collect()).collect())
                    .collect::<Result<Vec<Vec<Vec<Complex64>>>, _>>()?;
                let mut alg = PointAlgebra::new(structure)?;
                if let Some(e) = &doc.identity {
                    alg = alg.with_identity(e.iter().map(value_to_complex).collect::<Result<_, _>>()?)?;
                }
                Ok(AnyAlgebra::Complex(alg))
            }
            other => Err(AlgebraError::InvalidDocument(format!("unknown mode {other:?}"))),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("algebra documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, AlgebraError> {
        let doc: AlgebraDoc = serde_json::from_str(text).map_err(|e| AlgebraError::InvalidDocument(e.to_string()))?;
        Self::from_doc(&doc)
    }
}

/// Pretty vector for reports.
pub fn format_rational_vector(v: &[Rational]) -> String {
    let parts: Vec<String> = v.iter().map(format_rational).collect();
    format!("({})", parts.join(", "))
}
