//! Dense linear algebra shared by the exact and the numeric code paths.
//!
//! Everything is generic over [`Scalar`]: exact rationals pivot on the first
//! nonzero entry and compare with zero exactly, complex doubles use partial
//! pivoting and a caller-supplied relative tolerance.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;
use num_traits::{One, ToPrimitive, Zero};

use crate::series::Rational;

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const EXACT: bool;

    fn magnitude(&self) -> f64;

    fn from_rational(value: &Rational) -> Self;

    fn to_complex(&self) -> Complex64;

    fn from_i64(value: i64) -> Self;

    /// Exact zero test for rationals, `|x| <= tol` otherwise.
    fn is_negligible(&self, tol: f64) -> bool {
        if Self::EXACT {
            self.is_zero()
        } else {
            self.magnitude() <= tol
        }
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn magnitude(&self) -> f64 {
        self.to_f64().map(f64::abs).unwrap_or(f64::INFINITY)
    }

    fn from_rational(value: &Rational) -> Self {
        value.clone()
    }

    fn to_complex(&self) -> Complex64 {
        Complex64::new(self.to_f64().unwrap_or(f64::NAN), 0.0)
    }

    fn from_i64(value: i64) -> Self {
        Rational::from_integer(value.into())
    }
}

impl Scalar for Complex64 {
    const EXACT: bool = false;

    fn magnitude(&self) -> f64 {
        self.norm()
    }

    fn from_rational(value: &Rational) -> Self {
        Complex64::new(value.to_f64().unwrap_or(f64::NAN), 0.0)
    }

    fn to_complex(&self) -> Complex64 {
        *self
    }

    fn from_i64(value: i64) -> Self {
        Complex64::new(value as f64, 0.0)
    }
}

pub type Matrix<S> = Vec<Vec<S>>;

pub fn identity<S: Scalar>(n: usize) -> Matrix<S> {
    (0..n).map(|i| (0..n).map(|j| if i == j { S::one() } else { S::zero() }).collect()).collect()
}

pub fn mat_mul<S: Scalar>(a: &Matrix<S>, b: &Matrix<S>) -> Matrix<S> {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols).map(|j| (0..inner).fold(S::zero(), |acc, k| acc + row[k].clone() * b[k][j].clone())).collect()
        })
        .collect()
}

pub fn mat_vec<S: Scalar>(a: &Matrix<S>, v: &[S]) -> Vec<S> {
    a.iter().map(|row| row.iter().zip(v).fold(S::zero(), |acc, (x, y)| acc + x.clone() * y.clone())).collect()
}

pub fn mat_sub<S: Scalar>(a: &Matrix<S>, b: &Matrix<S>) -> Matrix<S> {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x.clone() - y.clone()).collect()).collect()
}

pub fn trace<S: Scalar>(a: &Matrix<S>) -> S {
    (0..a.len()).fold(S::zero(), |acc, i| acc + a[i][i].clone())
}

pub fn max_magnitude<S: Scalar>(a: &Matrix<S>) -> f64 {
    a.iter().flatten().map(Scalar::magnitude).fold(0.0, f64::max)
}

/// Reduced row echelon form in place; returns the pivot columns.
/// `tol` is absolute and ignored for exact scalars.
pub fn rref<S: Scalar>(m: &mut Matrix<S>, tol: f64) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row == rows {
            break;
        }
        let candidate = if S::EXACT {
            (row..rows).find(|&r| !m[r][col].is_zero())
        } else {
            (row..rows)
                .max_by(|&a, &b| m[a][col].magnitude().total_cmp(&m[b][col].magnitude()))
                .filter(|&r| m[r][col].magnitude() > tol)
        };
        let Some(pivot_row) = candidate else {
            if !S::EXACT {
                for r in row..rows {
                    m[r][col] = S::zero();
                }
            }
            continue;
        };
        m.swap(row, pivot_row);
        let pivot = m[row][col].clone();
        for c in col..cols {
            m[row][c] = m[row][c].clone() / pivot.clone();
        }
        for r in 0..rows {
            if r == row || m[r][col].is_zero() {
                continue;
            }
            let factor = m[r][col].clone();
            for c in col..cols {
                let delta = factor.clone() * m[row][c].clone();
                m[r][c] = m[r][c].clone() - delta;
            }
        }
        pivots.push(col);
        row += 1;
    }
    pivots
}

pub fn rank<S: Scalar>(m: &Matrix<S>, tol: f64) -> usize {
    let mut work = m.clone();
    rref(&mut work, tol).len()
}

#[derive(Clone, Debug, PartialEq)]
pub enum Solution<S> {
    Unique(Vec<S>),
    Underdetermined,
    Inconsistent,
}

/// Solve `m x = rhs` for a possibly non-square system.
pub fn solve<S: Scalar>(m: &Matrix<S>, rhs: &[S], tol: f64) -> Solution<S> {
    let cols = m.first().map_or(0, Vec::len);
    let mut aug: Matrix<S> = m
        .iter()
        .zip(rhs)
        .map(|(row, b)| {
            let mut r = row.clone();
            r.push(b.clone());
            r
        })
        .collect();
    let pivots = rref(&mut aug, tol);
    if pivots.contains(&cols) {
        return Solution::Inconsistent;
    }
    if !S::EXACT {
        let last = pivots.len();
        if aug[last..].iter().any(|row| row[cols].magnitude() > tol) {
            return Solution::Inconsistent;
        }
    }
    if pivots.len() < cols {
        return Solution::Underdetermined;
    }
    Solution::Unique((0..cols).map(|i| aug[i][cols].clone()).collect())
}

/// Basis of the null space.
pub fn kernel<S: Scalar>(m: &Matrix<S>, tol: f64) -> Vec<Vec<S>> {
    let cols = m.first().map_or(0, Vec::len);
    let mut work = m.clone();
    let pivots = rref(&mut work, tol);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![S::zero(); cols];
            v[f] = S::one();
            for (row, &p) in pivots.iter().enumerate() {
                v[p] = -work[row][f].clone();
            }
            v
        })
        .collect()
}

pub fn inverse<S: Scalar>(m: &Matrix<S>, tol: f64) -> Option<Matrix<S>> {
    let n = m.len();
    let mut aug: Matrix<S> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { S::one() } else { S::zero() }));
            r
        })
        .collect();
    let pivots = rref(&mut aug, tol);
    if pivots.len() < n || pivots[n - 1] != n - 1 {
        return None;
    }
    Some(aug.into_iter().map(|row| row[n..].to_vec()).collect())
}

pub fn determinant<S: Scalar>(m: &Matrix<S>) -> S {
    let n = m.len();
    let mut a = m.clone();
    let mut det = S::one();
    for col in 0..n {
        let pivot = if S::EXACT {
            (col..n).find(|&r| !a[r][col].is_zero())
        } else {
            (col..n).max_by(|&x, &y| a[x][col].magnitude().total_cmp(&a[y][col].magnitude()))
        };
        let Some(p) = pivot else {
            return S::zero();
        };
        if a[p][col].is_zero() {
            return S::zero();
        }
        if p != col {
            a.swap(p, col);
            det = -det;
        }
        let pv = a[col][col].clone();
        det = det * pv.clone();
        for r in col + 1..n {
            let factor = a[r][col].clone() / pv.clone();
            for c in col..n {
                let delta = factor.clone() * a[col][c].clone();
                a[r][c] = a[r][c].clone() - delta;
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{int, rat};

    fn q(rows: &[&[i64]]) -> Matrix<Rational> {
        rows.iter().map(|r| r.iter().map(|&v| int(v)).collect()).collect()
    }

    #[test]
    fn exact_solve_and_inverse() {
        let m = q(&[&[2, 1], &[1, 3]]);
        match solve(&m, &[int(3), int(5)], 0.0) {
            Solution::Unique(x) => assert_eq!(x, vec![rat(4, 5), rat(7, 5)]),
            other => panic!("{other:?}"),
        }
        let inv = inverse(&m, 0.0).unwrap();
        assert_eq!(mat_mul(&m, &inv), identity(2));
        assert_eq!(determinant(&m), int(5));
    }

    #[test]
    fn singular_systems() {
        let m = q(&[&[1, 2], &[2, 4]]);
        assert!(inverse(&m, 0.0).is_none());
        assert_eq!(determinant(&m), int(0));
        assert_eq!(solve(&m, &[int(1), int(3)], 0.0), Solution::Inconsistent);
        assert_eq!(solve(&m, &[int(1), int(2)], 0.0), Solution::Underdetermined);
        let k = kernel(&m, 0.0);
        assert_eq!(k, vec![vec![int(-2), int(1)]]);
        assert_eq!(rank(&m, 0.0), 1);
    }

    #[test]
    fn numeric_solve() {
        let m: Matrix<Complex64> = vec![
            vec![Complex64::new(0.0, 1.0), Complex64::new(1.0, 0.0)],
            vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, -1.0)],
        ];
        let rhs = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let Solution::Unique(x) = solve(&m, &rhs, 1e-12) else { panic!() };
        let back = mat_vec(&m, &x);
        for (b, r) in back.iter().zip(&rhs) {
            assert!((b - r).norm() < 1e-12);
        }
    }
}
