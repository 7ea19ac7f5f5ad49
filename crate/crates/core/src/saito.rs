//! Numeric charts on the unfolding space of the A_n singularity.
//!
//! A point is a polynomial `p(z) = z^{n+1} + a_1 z^{n-1} + ... + a_n`
//! together with an ordering of the critical points `rho_i`. Canonical
//! coordinates are the critical values `u^i = p(rho_i)`, the multiplication
//! is diagonal in `d/du^i`, and the flat metric is `sum (du^i)^2 / p''(rho_i)`.
//!
//! All derivatives with respect to `u` are taken in `u` itself: a shifted
//! point `u + h e_j` is located by Newton iteration on `a` through the
//! Jacobian `J_ij = d u^i / d a_j`, and the analytic `eta_i` are
//! differenced there.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AlgebraError, PointAlgebra};

type C = Complex64;

/// Critical points closer than this (times the coefficient scale) count as
/// a multiple root.
pub const MULTIPLE_ROOT_THRESHOLD: f64 = 1e-8;

/// Required `|p'(rho)|` after refinement, relative to the coefficient scale.
pub const ROOT_RESIDUAL: f64 = 1e-12;

/// Default finite-difference step, relative to the smallest gap between
/// canonical coordinates.
pub const DEFAULT_FD_STEP: f64 = 5e-4;

/// Random samples keep critical points at least this far apart.
pub const SAMPLE_SEPARATION: f64 = 0.2;

/// Random samples keep canonical coordinates at least this far apart.
pub const SAMPLE_U_SEPARATION: f64 = 0.2;

/// Random samples keep every `eta_i` at least this large.
pub const SAMPLE_MIN_ETA: f64 = 1e-2;

/// Random samples keep every `eta_i` this far from the negative real axis.
pub const BRANCH_CUT_MARGIN: f64 = 1e-4;

const MAX_NEWTON: usize = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SaitoError {
    #[error("n must be at least 2, got {0}")]
    InvalidN(usize),
    #[error("expected {expected} coefficients, got {got}")]
    CoefficientCount { expected: usize, got: usize },
    #[error("coefficients must be finite")]
    NonFinite,
    #[error("multiple root region: critical points {0} and {1} are {2:.3e} apart")]
    MultipleRoot(usize, usize, f64),
    #[error("critical point refinement did not converge (|p'| = {0:.3e})")]
    NotConverged(f64),
    #[error("degenerate metric: p''(rho_{0}) = {1:.3e}")]
    DegenerateMetric(usize, f64),
    #[error("eta_{0} is too close to zero ({1:.3e})")]
    EtaNearZero(usize, f64),
    #[error("finite-difference step {0:e} is too small")]
    StepUnderflow(f64),
    #[error("could not reach shifted canonical coordinates (residual {0:.3e})")]
    ShiftFailed(f64),
    #[error("no acceptable sample after {0} attempts")]
    SamplingExhausted(usize),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

pub type Result<T> = std::result::Result<T, SaitoError>;

/// A point of the unfolding space with a chosen ordering of critical points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaitoChart {
    pub n: usize,
    /// `a[j - 1]` is the coefficient `a_j` of `z^{n-j}`.
    pub a: Vec<C>,
    pub rho: Vec<C>,
    pub u: Vec<C>,
    /// `jacobian[i][j - 1] = rho_i^{n-j}`.
    pub jacobian: Vec<Vec<C>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaitoMetricData {
    pub g_diag: Vec<C>,
    pub eta: C,
    pub eta_grad_u: Vec<C>,
}

impl SaitoMetricData {
    /// Largest relative gap between `eta_i` and `1 / p''(rho_i)`.
    pub fn metric_identity_error(&self) -> f64 {
        self.g_diag.iter().zip(&self.eta_grad_u).map(|(g, e)| (g - e).norm() / g.norm()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DarbouxEgoroffReport {
    /// max |e_k gamma_ij - gamma_ik gamma_kj| over distinct i, j, k.
    pub rotation: f64,
    /// max |e gamma_ij| over i != j.
    pub identity_flow: f64,
    /// The measured value of `e eta`.
    pub e_eta: C,
    /// Absolute step used in `u`.
    pub step: f64,
}

impl DarbouxEgoroffReport {
    pub fn max_residual(&self) -> f64 {
        self.rotation.max(self.identity_flow)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerConsistencyReport {
    /// max_j |(sum u^i e_i) a_j - (j+1) a_j / (n+1)|.
    pub euler: f64,
    /// max_j |(sum e_i) a_j - delta_jn|.
    pub flat_identity: f64,
    /// `E eta` at this point.
    pub e_eta: C,
    /// Measured `c` and `k` in `E eta = c eta + k`, fitted along the Euler flow.
    pub eta_weight: C,
    pub eta_constant: C,
}

/// The tangent algebra at a chart in the idempotent frame, with its pairing.
#[derive(Clone, Debug)]
pub struct PointFrobenius {
    pub algebra: PointAlgebra<C>,
    /// `g(e_i, e_j) = delta_ij pairing[i]`.
    pub pairing: Vec<C>,
}

impl PointFrobenius {
    /// max |g(e_a e_b, e_c) - g(e_a, e_b e_c)| over basis triples.
    pub fn invariance_defect(&self) -> f64 {
        let n = self.algebra.dim();
        let g = |x: &[C], y: &[C]| -> C { (0..n).map(|i| x[i] * y[i] * self.pairing[i]).sum() };
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let (ea, eb, ec) = (self.algebra.basis(a), self.algebra.basis(b), self.algebra.basis(c));
                    let left = g(&self.algebra.product(&ea, &eb), &ec);
                    let right = g(&ea, &self.algebra.product(&eb, &ec));
                    worst = worst.max((left - right).norm());
                }
            }
        }
        worst
    }
}

fn coefficient_scale(a: &[C]) -> f64 {
    a.iter().map(|c| c.norm()).fold(1.0, f64::max)
}

fn p(n: usize, a: &[C], z: C) -> C {
    // Horner over z^{n+1}, 0 z^n, a_1 z^{n-1}, ..., a_n.
    let mut acc = C::new(1.0, 0.0);
    acc *= z;
    for coeff in a {
        acc = acc * z + coeff;
    }
    debug_assert_eq!(a.len(), n);
    acc
}

fn dp(n: usize, a: &[C], z: C) -> C {
    let mut acc = C::new((n + 1) as f64, 0.0) * z.powu(n as u32);
    for (idx, coeff) in a.iter().enumerate() {
        let power = n - (idx + 1);
        if power > 0 {
            acc += coeff * power as f64 * z.powu(power as u32 - 1);
        }
    }
    acc
}

fn d2p(n: usize, a: &[C], z: C) -> C {
    let mut acc = C::new(((n + 1) * n) as f64, 0.0) * z.powu(n as u32 - 1);
    for (idx, coeff) in a.iter().enumerate() {
        let power = n - (idx + 1);
        if power > 1 {
            acc += coeff * (power * (power - 1)) as f64 * z.powu(power as u32 - 2);
        }
    }
    acc
}

fn newton_refine(n: usize, a: &[C], start: &[C]) -> Result<Vec<C>> {
    let scale = coefficient_scale(a);
    let mut rho = start.to_vec();
    for r in rho.iter_mut() {
        for _ in 0..MAX_NEWTON {
            let second = d2p(n, a, *r);
            if second.norm() == 0.0 {
                break;
            }
            let step = dp(n, a, *r) / second;
            *r -= step;
            if step.norm() <= 1e-16 * r.norm().max(1.0) {
                break;
            }
        }
    }
    let worst = rho.iter().map(|r| dp(n, a, *r).norm()).fold(0.0, f64::max);
    if !worst.is_finite() || worst >= ROOT_RESIDUAL * scale {
        return Err(SaitoError::NotConverged(worst));
    }
    Ok(rho)
}

/// Roots of `p'/(n+1)` from its companion matrix.
fn companion_roots(n: usize, a: &[C]) -> Vec<C> {
    let lead = (n + 1) as f64;
    // p'/(n+1) = z^n + sum_j a_j (n-j)/(n+1) z^{n-j-1}; c[k] is the coefficient of z^k.
    let mut c = vec![C::new(0.0, 0.0); n];
    for (idx, coeff) in a.iter().enumerate() {
        let power = n - (idx + 1);
        if power > 0 {
            c[power - 1] = coeff * power as f64 / lead;
        }
    }
    let mut m = DMatrix::<C>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = C::new(1.0, 0.0);
    }
    for k in 0..n {
        m[(k, n - 1)] = -c[k];
    }
    m.schur().eigenvalues().map(|v| v.iter().copied().collect()).unwrap_or_default()
}

fn lex_order(x: &C, y: &C, tol: f64) -> std::cmp::Ordering {
    if (x.re - y.re).abs() > tol {
        x.re.total_cmp(&y.re)
    } else {
        x.im.total_cmp(&y.im)
    }
}

fn invert(m: &[Vec<C>]) -> Option<DMatrix<C>> {
    let n = m.len();
    DMatrix::from_fn(n, n, |i, j| m[i][j]).try_inverse()
}

impl SaitoChart {
    /// Build the chart at coefficients `a`. Critical points are sorted
    /// lexicographically by (re, im); a nonzero `ordering_seed` then applies
    /// a seeded permutation, selecting another sheet of the covering.
    pub fn build(n: usize, a: &[C], ordering_seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(SaitoError::InvalidN(n));
        }
        if a.len() != n {
            return Err(SaitoError::CoefficientCount { expected: n, got: a.len() });
        }
        if a.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(SaitoError::NonFinite);
        }
        let scale = coefficient_scale(a);
        let raw = companion_roots(n, a);
        if raw.len() != n {
            return Err(SaitoError::NotConverged(f64::INFINITY));
        }
        check_separation(&raw, scale)?;
        let mut rho = newton_refine(n, a, &raw)?;
        let tol = MULTIPLE_ROOT_THRESHOLD * scale;
        rho.sort_by(|x, y| lex_order(x, y, tol));
        if ordering_seed != 0 {
            rho.shuffle(&mut ChaCha8Rng::seed_from_u64(ordering_seed));
        }
        Self::from_roots(n, a.to_vec(), rho)
    }

    fn from_roots(n: usize, a: Vec<C>, rho: Vec<C>) -> Result<Self> {
        check_separation(&rho, coefficient_scale(&a))?;
        let u = rho.iter().map(|r| p(n, &a, *r)).collect();
        let jacobian = rho.iter().map(|r| (1..=n).map(|j| r.powu((n - j) as u32)).collect()).collect();
        Ok(Self { n, a, rho, u, jacobian })
    }

    /// The same point with critical points renumbered: `rho'_i = rho_{perm[i]}`.
    pub fn reordered(&self, perm: &[usize]) -> Result<Self> {
        let rho = perm.iter().map(|&i| self.rho[i]).collect();
        Self::from_roots(self.n, self.a.clone(), rho)
    }

    pub fn min_separation(&self) -> f64 {
        pairwise_min(&self.rho).map_or(f64::INFINITY, |(_, _, d)| d)
    }

    /// Smallest `|u^i - u^j|`; rotation coefficients grow like its inverse.
    pub fn min_u_separation(&self) -> f64 {
        pairwise_min(&self.u).map_or(f64::INFINITY, |(_, _, d)| d)
    }

    pub fn p(&self, z: C) -> C {
        p(self.n, &self.a, z)
    }

    pub fn p_prime(&self, z: C) -> C {
        dp(self.n, &self.a, z)
    }

    pub fn p_second(&self, z: C) -> C {
        d2p(self.n, &self.a, z)
    }

    /// Largest `|p'(rho_i)|`.
    pub fn root_residual(&self) -> f64 {
        self.rho.iter().map(|r| self.p_prime(*r).norm()).fold(0.0, f64::max)
    }

    pub fn coefficient_scale(&self) -> f64 {
        coefficient_scale(&self.a)
    }

    fn jacobian_inverse(&self) -> Result<DMatrix<C>> {
        invert(&self.jacobian).ok_or(SaitoError::MultipleRoot(0, 0, 0.0))
    }

    pub fn metric_data(&self) -> Result<SaitoMetricData> {
        let n = self.n;
        let second: Vec<C> = self.rho.iter().map(|r| self.p_second(*r)).collect();
        let floor = 1e-12 * self.coefficient_scale();
        for (i, s) in second.iter().enumerate() {
            if s.norm() < floor {
                return Err(SaitoError::DegenerateMetric(i, s.norm()));
            }
        }
        let g_diag: Vec<C> = second.iter().map(|s| s.inv()).collect();
        let factor = -1.0 / (2.0 * (n - 1) as f64);
        let eta = self.rho.iter().map(|r| r * r).sum::<C>() * factor;
        // d eta / d a_j = -(1/(n-1)) sum_i rho_i d rho_i / d a_j,
        // d rho_i / d a_j = -(n-j) rho_i^{n-j-1} / p''(rho_i).
        let grad_a: Vec<C> = (1..=n)
            .map(|j| {
                let power = n - j;
                if power == 0 {
                    return C::new(0.0, 0.0);
                }
                let sum: C = self
                    .rho
                    .iter()
                    .zip(&second)
                    .map(|(r, s)| r * (-(power as f64)) * r.powu(power as u32 - 1) / s)
                    .sum();
                sum * (-1.0 / (n - 1) as f64)
            })
            .collect();
        let inv = self.jacobian_inverse()?;
        let eta_grad_u = (0..n).map(|i| (0..n).map(|j| grad_a[j] * inv[(j, i)]).sum()).collect();
        Ok(SaitoMetricData { g_diag, eta, eta_grad_u })
    }

    /// The point with canonical coordinates `target`, on the sheet continuing
    /// this one.
    pub fn at_u(&self, target: &[C]) -> Result<Self> {
        let uscale = self.u.iter().chain(target).map(|c| c.norm()).fold(1.0, f64::max);
        let mut chart = self.clone();
        let mut best = f64::INFINITY;
        for _ in 0..MAX_NEWTON {
            let du: Vec<C> = target.iter().zip(&chart.u).map(|(t, u)| t - u).collect();
            let err = du.iter().map(|c| c.norm()).fold(0.0, f64::max);
            if err <= 4.0 * f64::EPSILON * uscale || err >= best {
                break;
            }
            best = err;
            let inv = chart.jacobian_inverse()?;
            let da = &inv * DVector::from_column_slice(&du);
            let a: Vec<C> = chart.a.iter().zip(da.iter()).map(|(x, d)| x + d).collect();
            let rho = newton_refine(self.n, &a, &chart.rho)?;
            chart = Self::from_roots(self.n, a, rho)?;
        }
        let err = target.iter().zip(&chart.u).map(|(t, u)| (t - u).norm()).fold(0.0, f64::max);
        if err > 1e-11 * uscale {
            return Err(SaitoError::ShiftFailed(err));
        }
        Ok(chart)
    }

    /// Move along the flat identity: `a_n -> a_n + t`, every `u^i -> u^i + t`.
    pub fn shifted_along_identity(&self, t: C) -> Result<Self> {
        let mut a = self.a.clone();
        a[self.n - 1] += t;
        Self::from_roots(self.n, a, self.rho.clone())
    }

    /// Move along the Euler flow: `a_j -> s^{j+1} a_j`, `rho_i -> s rho_i`.
    pub fn rescaled(&self, s: f64) -> Result<Self> {
        let a: Vec<C> = self.a.iter().enumerate().map(|(idx, c)| c * s.powi(idx as i32 + 2)).collect();
        let start: Vec<C> = self.rho.iter().map(|r| r * s).collect();
        let rho = newton_refine(self.n, &a, &start)?;
        Self::from_roots(self.n, a, rho)
    }

    fn eta_grad_at(&self, shift: &[(usize, f64)]) -> Result<Vec<C>> {
        let mut target = self.u.clone();
        for &(j, h) in shift {
            target[j] += h;
        }
        Ok(self.at_u(&target)?.metric_data()?.eta_grad_u)
    }

    /// Darboux–Egoroff residuals with second derivatives of `eta` from
    /// central differences of the analytic `eta_i`. `fd_step` is relative to
    /// the smallest gap between canonical coordinates.
    pub fn darboux_egoroff_residual(&self, fd_step: f64) -> Result<DarbouxEgoroffReport> {
        let n = self.n;
        let uscale = self.u.iter().map(|c| c.norm()).fold(1.0, f64::max);
        let h = fd_step * self.min_u_separation().min(uscale);
        if !(h.is_finite() && h > 1e3 * f64::EPSILON * uscale) {
            return Err(SaitoError::StepUnderflow(fd_step));
        }
        let base = self.metric_data()?;
        let eta = &base.eta_grad_u;
        for (i, e) in eta.iter().enumerate() {
            if e.norm() < 1e-8 {
                return Err(SaitoError::EtaNearZero(i, e.norm()));
            }
        }

        // eta2[i][j] = d_j eta_i.
        let mut eta2 = vec![vec![C::new(0.0, 0.0); n]; n];
        for j in 0..n {
            let plus = self.eta_grad_at(&[(j, h)])?;
            let minus = self.eta_grad_at(&[(j, -h)])?;
            for i in 0..n {
                eta2[i][j] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
        // eta3[j][k][i] = d_j d_k eta_i.
        let mut eta3 = vec![vec![vec![C::new(0.0, 0.0); n]; n]; n];
        for j in 0..n {
            for k in j..n {
                let pp = self.eta_grad_at(&[(j, h), (k, h)])?;
                let pm = self.eta_grad_at(&[(j, h), (k, -h)])?;
                let mp = self.eta_grad_at(&[(j, -h), (k, h)])?;
                let mm = self.eta_grad_at(&[(j, -h), (k, -h)])?;
                for i in 0..n {
                    let v = (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * h * h);
                    eta3[j][k][i] = v;
                    eta3[k][j][i] = v;
                }
            }
        }

        // Per-factor principal roots keep gamma_ik gamma_kj on the same branch
        // as e_k gamma_ij, because sqrt(eta_k)^2 = eta_k exactly.
        let roots: Vec<C> = eta.iter().map(|e| e.sqrt()).collect();
        let gamma = |i: usize, j: usize| eta2[i][j] / (2.0 * roots[i] * roots[j]);
        let d_gamma = |k: usize, i: usize, j: usize| {
            let correction = eta2[i][j] * 0.5 * (eta2[i][k] / eta[i] + eta2[j][k] / eta[j]);
            (eta3[j][k][i] - correction) / (2.0 * roots[i] * roots[j])
        };

        let mut rotation: f64 = 0.0;
        let mut identity_flow: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let mut flow = C::new(0.0, 0.0);
                for k in 0..n {
                    let dk = d_gamma(k, i, j);
                    flow += dk;
                    if k != i && k != j {
                        rotation = rotation.max((dk - gamma(i, k) * gamma(k, j)).norm());
                    }
                }
                identity_flow = identity_flow.max(flow.norm());
            }
        }
        Ok(DarbouxEgoroffReport { rotation, identity_flow, e_eta: eta.iter().sum(), step: h })
    }

    /// Compare the two expressions of the Euler field and of the flat identity
    /// on the coordinate functions `a_j`.
    pub fn euler_consistency(&self) -> Result<EulerConsistencyReport> {
        let n = self.n;
        let inv = self.jacobian_inverse()?;
        let mut euler: f64 = 0.0;
        let mut flat_identity: f64 = 0.0;
        for j in 0..n {
            let left: C = (0..n).map(|i| self.u[i] * inv[(j, i)]).sum();
            let right = self.a[j] * ((j + 2) as f64 / (n + 1) as f64);
            euler = euler.max((left - right).norm());
            let e_aj: C = (0..n).map(|i| inv[(j, i)]).sum();
            let expected = if j + 1 == n { 1.0 } else { 0.0 };
            flat_identity = flat_identity.max((e_aj - expected).norm());
        }

        let e_eta_at = |chart: &SaitoChart| -> Result<(C, C)> {
            let m = chart.metric_data()?;
            Ok((m.eta, chart.u.iter().zip(&m.eta_grad_u).map(|(u, e)| u * e).sum()))
        };
        let (eta0, e_eta) = e_eta_at(self)?;
        let (eta1, e_eta1) = e_eta_at(&self.rescaled(1.25)?)?;
        let eta_weight = (e_eta1 - e_eta) / (eta1 - eta0);
        let eta_constant = e_eta - eta_weight * eta0;
        Ok(EulerConsistencyReport { euler, flat_identity, e_eta, eta_weight, eta_constant })
    }

    /// Largest gap between `J` and central differences of `u` in `a`.
    pub fn jacobian_fd_discrepancy(&self, step: f64) -> Result<f64> {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for j in 0..n {
            let shifted = |sign: f64| -> Result<Vec<C>> {
                let mut a = self.a.clone();
                a[j] += step * sign;
                let rho = newton_refine(n, &a, &self.rho)?;
                Ok(rho.iter().map(|r| p(n, &a, *r)).collect())
            };
            let (plus, minus) = (shifted(1.0)?, shifted(-1.0)?);
            for i in 0..n {
                let fd = (plus[i] - minus[i]) / (2.0 * step);
                worst = worst.max((fd - self.jacobian[i][j]).norm());
            }
        }
        Ok(worst)
    }

    /// The diagonal algebra `e_i e_j = delta_ij e_i` with pairing `eta_i`.
    pub fn pointwise_frobenius(&self) -> Result<PointFrobenius> {
        let metric = self.metric_data()?;
        let frob = PointFrobenius { algebra: PointAlgebra::diagonal(self.n), pairing: metric.eta_grad_u };
        let defect = frob.invariance_defect();
        assert!(defect == 0.0, "diagonal pairing must be invariant, defect {defect}");
        Ok(frob)
    }
}

fn pairwise_min(points: &[C]) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = (points[i] - points[j]).norm();
            if best.is_none_or(|(_, _, b)| d < b) {
                best = Some((i, j, d));
            }
        }
    }
    best
}

fn check_separation(points: &[C], scale: f64) -> Result<()> {
    match pairwise_min(points) {
        Some((i, j, d)) if d <= MULTIPLE_ROOT_THRESHOLD * scale => Err(SaitoError::MultipleRoot(i, j, d)),
        _ => Ok(()),
    }
}

pub fn build_chart(n: usize, a: &[C], ordering_seed: u64) -> Result<SaitoChart> {
    SaitoChart::build(n, a, ordering_seed)
}

/// Coefficients with real and imaginary parts uniform in [-1, 1].
pub fn sample_coefficients(n: usize, rng: &mut impl Rng) -> Vec<C> {
    (0..n).map(|_| C::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))).collect()
}

/// Whether a chart is comfortably away from multiple roots, small `eta_i`
/// and the branch cut of the square root.
pub fn is_safe_sample(chart: &SaitoChart) -> bool {
    if chart.min_separation() < SAMPLE_SEPARATION || chart.min_u_separation() < SAMPLE_U_SEPARATION {
        return false;
    }
    match chart.metric_data() {
        Ok(m) => {
            m.eta_grad_u.iter().all(|e| e.norm() >= SAMPLE_MIN_ETA && !(e.re < 0.0 && e.im.abs() < BRANCH_CUT_MARGIN))
        }
        Err(_) => false,
    }
}

/// `count` seeded charts drawn by rejection sampling.
pub fn random_charts(n: usize, count: usize, seed: u64) -> Result<Vec<SaitoChart>> {
    if n < 2 {
        return Err(SaitoError::InvalidN(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = 100 * count.max(1);
    let mut charts = Vec::with_capacity(count);
    let mut attempts = 0;
    while charts.len() < count {
        if attempts == budget {
            return Err(SaitoError::SamplingExhausted(attempts));
        }
        attempts += 1;
        let a = sample_coefficients(n, &mut rng);
        if let Ok(chart) = SaitoChart::build(n, &a, 0) {
            if is_safe_sample(&chart) {
                charts.push(chart);
            }
        }
    }
    Ok(charts)
}

/// Ratio of Darboux–Egoroff residuals at `step` and `step / 2`.
pub fn convergence_ratio(chart: &SaitoChart, step: f64) -> Result<f64> {
    let coarse = chart.darboux_egoroff_residual(step)?.max_residual();
    let fine = chart.darboux_egoroff_residual(step / 2.0)?.max_residual();
    Ok(coarse / fine)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C {
        C::new(re, 0.0)
    }

    #[test]
    fn worked_a2_point() {
        let chart = build_chart(2, &[c(-3.0), c(0.0)], 0).unwrap();
        assert!((chart.rho[0] - c(-1.0)).norm() < 1e-12);
        assert!((chart.rho[1] - c(1.0)).norm() < 1e-12);
        assert!((chart.u[0] - c(2.0)).norm() < 1e-12);
        assert!((chart.u[1] - c(-2.0)).norm() < 1e-12);
        let m = chart.metric_data().unwrap();
        assert!((m.eta - c(-1.0)).norm() < 1e-12);
        assert!((m.g_diag[0] - c(-1.0 / 6.0)).norm() < 1e-12);
        assert!((m.g_diag[1] - c(1.0 / 6.0)).norm() < 1e-12);
        assert!(m.metric_identity_error() < 1e-9);
    }

    #[test]
    fn double_root_is_rejected() {
        assert!(matches!(build_chart(2, &[c(0.0), c(0.0)], 0), Err(SaitoError::MultipleRoot(..))));
        assert!(matches!(build_chart(1, &[c(0.0)], 0), Err(SaitoError::InvalidN(1))));
    }

    #[test]
    fn euler_on_worked_point() {
        let chart = build_chart(2, &[c(-3.0), c(0.0)], 0).unwrap();
        let report = chart.euler_consistency().unwrap();
        assert!(report.euler < 1e-12 && report.flat_identity < 1e-12);
    }

    #[test]
    fn seeded_ordering_permutes_everything_together() {
        let a = [C::new(0.3, -0.2), C::new(-0.5, 0.1), C::new(0.2, 0.4)];
        let sorted = build_chart(3, &a, 0).unwrap();
        let sheet = build_chart(3, &a, 7).unwrap();
        let perm: Vec<usize> =
            sheet.rho.iter().map(|r| sorted.rho.iter().position(|s| (s - r).norm() < 1e-12).unwrap()).collect();
        let m0 = sorted.metric_data().unwrap();
        let m1 = sheet.metric_data().unwrap();
        for (i, &k) in perm.iter().enumerate() {
            assert!((sheet.u[i] - sorted.u[k]).norm() < 1e-12);
            assert!((m1.g_diag[i] - m0.g_diag[k]).norm() < 1e-12);
        }
    }
}
