//! Truncated multivariate power series over exact rationals.
//!
//! A [`TruncatedSeries`] stores the coefficients of every monomial of total
//! degree at most `order`; everything above is unknown and never stored.
//! Variables may be odd (supercommuting). Odd monomials are kept in
//! increasing variable order, and the Koszul sign is applied whenever a
//! product or a derivative has to reorder them.
//!
//! Invariants, checked by [`TruncatedSeries::audit`]:
//! - every stored index has total degree `<= order`
//! - no stored coefficient is zero
//! - odd exponents are 0 or 1

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact rational scalar, always kept in lowest terms with positive denominator.
pub type Rational = BigRational;

/// Double-precision complex scalar used by the numeric modules.
pub type ComplexScalar = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("variable specifications differ")]
    VarsMismatch,
    #[error("variable index {var} out of range for {count} variables")]
    VarOutOfRange { var: usize, count: usize },
    #[error("variable {var} is odd")]
    OddVariable { var: usize },
    #[error("point has {got} coordinates, expected {expected}")]
    PointLength { got: usize, expected: usize },
    #[error("evaluation produced a non-finite value")]
    NonFinite,
    #[error("invalid series document: {0}")]
    InvalidDocument(String),
}

/// Parse `"p/q"`, `"p"` or a finite decimal such as `"-1.25"` into a rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: BigInt = num.trim().parse().ok()?;
        let den: BigInt = den.trim().parse().ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(Rational::new(num, den));
    }
    if let Some((int, frac)) = text.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let negative = int.starts_with('-');
        let int: BigInt = if int.is_empty() || int == "-" || int == "+" { BigInt::zero() } else { int.parse().ok()? };
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let frac: BigInt = frac.parse().ok()?;
        let magnitude = int.abs() * &scale + frac;
        let num = if negative { -magnitude } else { magnitude };
        return Some(Rational::new(num, scale));
    }
    let num: BigInt = text.parse().ok()?;
    Some(Rational::from_integer(num))
}

/// Render a rational as `"p"` or `"p/q"`.
pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn rational_to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Parity {
    #[default]
    Even,
    Odd,
}

impl Parity {
    pub fn from_bit(bit: u8) -> Option<Parity> {
        match bit {
            0 => Some(Parity::Even),
            1 => Some(Parity::Odd),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }

    pub fn is_odd(self) -> bool {
        self == Parity::Odd
    }

    /// Parity of a product of homogeneous elements.
    pub fn plus(self, other: Parity) -> Parity {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// `(-1)^{p q}` as a sign flag: true when the sign is negative.
    pub fn koszul(self, other: Parity) -> bool {
        self.is_odd() && other.is_odd()
    }
}

/// Count and parity of the ambient coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VariableSpec {
    parities: Vec<Parity>,
}

impl VariableSpec {
    pub fn new(parities: Vec<Parity>) -> Result<Self, SeriesError> {
        if parities.is_empty() {
            return Err(SeriesError::InvalidDocument("at least one variable is required".into()));
        }
        Ok(Self { parities })
    }

    pub fn even(count: usize) -> Self {
        assert!(count > 0, "a variable specification needs at least one variable");
        Self { parities: vec![Parity::Even; count] }
    }

    pub fn count(&self) -> usize {
        self.parities.len()
    }

    pub fn parity(&self, var: usize) -> Parity {
        self.parities[var]
    }

    pub fn parities(&self) -> &[Parity] {
        &self.parities
    }

    pub fn all_even(&self) -> bool {
        self.parities.iter().all(|p| !p.is_odd())
    }

    fn check_var(&self, var: usize) -> Result<(), SeriesError> {
        if var < self.count() {
            Ok(())
        } else {
            Err(SeriesError::VarOutOfRange { var, count: self.count() })
        }
    }
}

/// Exponent vector of a monomial, ordered graded-lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    exponents: Vec<u32>,
    degree: u32,
}

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        let degree = exponents.iter().sum();
        Self { exponents, degree }
    }

    pub fn zero(count: usize) -> Self {
        Self::new(vec![0; count])
    }

    pub fn unit(count: usize, var: usize) -> Self {
        let mut exponents = vec![0; count];
        exponents[var] = 1;
        Self::new(exponents)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn get(&self, var: usize) -> u32 {
        self.exponents[var]
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree.cmp(&other.degree).then_with(|| other.exponents.cmp(&self.exponents))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sign and feasibility of the supercommutative product of two monomials.
/// Returns `None` when an odd variable would be squared.
fn product_sign(vars: &VariableSpec, left: &MultiIndex, right: &MultiIndex) -> Option<bool> {
    let mut negative = false;
    // Each odd variable of `left` moves past every odd variable of `right`
    // with a smaller index.
    let count = vars.count();
    let mut right_below = vec![0usize; count + 1];
    for var in 0..count {
        right_below[var + 1] = right_below[var] + usize::from(vars.parity(var).is_odd() && right.get(var) == 1);
    }
    for var in 0..count {
        if !vars.parity(var).is_odd() {
            continue;
        }
        let in_left = left.get(var) == 1;
        let in_right = right.get(var) == 1;
        if in_left && in_right {
            return None;
        }
        if in_left && right_below[var] % 2 == 1 {
            negative = !negative;
        }
    }
    Some(negative)
}

/// Truncated multivariate power series with exact rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedSeries {
    vars: VariableSpec,
    order: u32,
    terms: BTreeMap<MultiIndex, Rational>,
}

impl TruncatedSeries {
    pub fn zero(vars: VariableSpec, order: u32) -> Self {
        Self { vars, order, terms: BTreeMap::new() }
    }

    pub fn constant(vars: VariableSpec, order: u32, value: Rational) -> Self {
        let count = vars.count();
        let mut series = Self::zero(vars, order);
        series.insert(MultiIndex::zero(count), value);
        series
    }

    pub fn one(vars: VariableSpec, order: u32) -> Self {
        Self::constant(vars, order, Rational::one())
    }

    /// The coordinate function `x^var`.
    pub fn variable(vars: VariableSpec, order: u32, var: usize) -> Result<Self, SeriesError> {
        vars.check_var(var)?;
        let count = vars.count();
        let mut series = Self::zero(vars, order);
        series.insert(MultiIndex::unit(count, var), Rational::one());
        Ok(series)
    }

    /// `coeff * x^exponents`, dropped when above the truncation order.
    pub fn monomial(vars: VariableSpec, order: u32, exponents: Vec<u32>, coeff: Rational) -> Result<Self, SeriesError> {
        let mut series = Self::zero(vars, order);
        series.add_term(exponents, coeff)?;
        Ok(series)
    }

    /// Build from `(exponents, coefficient)` pairs; repeated indices accumulate.
    pub fn from_terms<I>(vars: VariableSpec, order: u32, terms: I) -> Result<Self, SeriesError>
    where
        I: IntoIterator<Item = (Vec<u32>, Rational)>,
    {
        let mut series = Self::zero(vars, order);
        for (exponents, coeff) in terms {
            series.add_term(exponents, coeff)?;
        }
        Ok(series)
    }

    /// Accumulate `coeff * x^exponents` in place.
    pub fn add_term(&mut self, exponents: Vec<u32>, coeff: Rational) -> Result<(), SeriesError> {
        if exponents.len() != self.vars.count() {
            return Err(SeriesError::InvalidDocument(format!(
                "exponent vector of length {} for {} variables",
                exponents.len(),
                self.vars.count()
            )));
        }
        for (var, &e) in exponents.iter().enumerate() {
            if self.vars.parity(var).is_odd() && e > 1 {
                return Ok(());
            }
        }
        let index = MultiIndex::new(exponents);
        self.accumulate(index, coeff);
        Ok(())
    }

    fn insert(&mut self, index: MultiIndex, coeff: Rational) {
        if index.degree() <= self.order && !coeff.is_zero() {
            self.terms.insert(index, coeff);
        }
    }

    fn accumulate(&mut self, index: MultiIndex, coeff: Rational) {
        if index.degree() > self.order || coeff.is_zero() {
            return;
        }
        match self.terms.entry(index) {
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut slot) => {
                *slot.get_mut() += coeff;
                if slot.get().is_zero() {
                    slot.remove();
                }
            }
        }
    }

    pub fn vars(&self) -> &VariableSpec {
        &self.vars
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Stored terms in graded-lexicographic order.
    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Rational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, exponents: &[u32]) -> Rational {
        self.terms.get(&MultiIndex::new(exponents.to_vec())).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn constant_term(&self) -> Rational {
        self.coeff(&vec![0; self.vars.count()])
    }

    /// Lowest total degree carrying a nonzero coefficient.
    pub fn valuation(&self) -> Option<u32> {
        self.terms.keys().next().map(MultiIndex::degree)
    }

    /// Highest total degree carrying a nonzero coefficient.
    pub fn max_degree(&self) -> Option<u32> {
        self.terms.keys().next_back().map(MultiIndex::degree)
    }

    /// Parity of the series when it is homogeneous, `None` for mixed series.
    /// The zero series counts as even.
    pub fn parity(&self) -> Option<Parity> {
        let mut result: Option<Parity> = None;
        for index in self.terms.keys() {
            let mut p = Parity::Even;
            for (var, &e) in index.exponents().iter().enumerate() {
                if e % 2 == 1 && self.vars.parity(var).is_odd() {
                    p = p.plus(Parity::Odd);
                }
            }
            match result {
                None => result = Some(p),
                Some(q) if q != p => return None,
                _ => {}
            }
        }
        Some(result.unwrap_or(Parity::Even))
    }

    /// Keep only terms of total degree `<= order`, lowering the order.
    pub fn truncate(&self, order: u32) -> Self {
        let order = order.min(self.order);
        let terms = self
            .terms
            .iter()
            .filter(|(index, _)| index.degree() <= order)
            .map(|(i, c)| (i.clone(), c.clone()))
            .collect();
        Self { vars: self.vars.clone(), order, terms }
    }

    /// Same coefficients, declared known up to a larger order. Only valid
    /// when the series is an exact polynomial.
    pub fn with_order(&self, order: u32) -> Self {
        let mut result = self.truncate(order);
        result.order = order;
        result
    }

    /// Drop every term of total degree `<= degree`.
    pub fn drop_through_degree(&self, degree: u32) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(index, _)| index.degree() > degree)
            .map(|(i, c)| (i.clone(), c.clone()))
            .collect();
        Self { vars: self.vars.clone(), order: self.order, terms }
    }

    fn check_vars(&self, other: &Self) -> Result<(), SeriesError> {
        if self.vars == other.vars {
            Ok(())
        } else {
            Err(SeriesError::VarsMismatch)
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_vars(other)?;
        let mut result = self.truncate(self.order.min(other.order));
        for (index, coeff) in &other.terms {
            result.accumulate(index.clone(), coeff.clone());
        }
        Ok(result)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_vars(other)?;
        let mut result = self.truncate(self.order.min(other.order));
        for (index, coeff) in &other.terms {
            result.accumulate(index.clone(), -coeff.clone());
        }
        Ok(result)
    }

    pub fn neg(&self) -> Self {
        self.scale(&-Rational::one())
    }

    pub fn scale(&self, factor: &Rational) -> Self {
        if factor.is_zero() {
            return Self::zero(self.vars.clone(), self.order);
        }
        let terms = self.terms.iter().map(|(i, c)| (i.clone(), c * factor)).collect();
        Self { vars: self.vars.clone(), order: self.order, terms }
    }

    /// Supercommutative product, truncated to the smaller order.
    pub fn mul(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_vars(other)?;
        let order = self.order.min(other.order);
        let mut result = Self::zero(self.vars.clone(), order);
        let count = self.vars.count();
        let all_even = self.vars.all_even();
        let mut accum: BTreeMap<MultiIndex, Rational> = BTreeMap::new();
        for (left, lc) in &self.terms {
            if left.degree() > order {
                break;
            }
            for (right, rc) in &other.terms {
                if left.degree() + right.degree() > order {
                    break;
                }
                let negative = if all_even {
                    false
                } else {
                    match product_sign(&self.vars, left, right) {
                        Some(neg) => neg,
                        None => continue,
                    }
                };
                let exponents: Vec<u32> = (0..count).map(|v| left.get(v) + right.get(v)).collect();
                let mut coeff = lc * rc;
                if negative {
                    coeff = -coeff;
                }
                let index = MultiIndex::new(exponents);
                match accum.entry(index) {
                    std::collections::btree_map::Entry::Vacant(slot) => {
                        slot.insert(coeff);
                    }
                    std::collections::btree_map::Entry::Occupied(mut slot) => {
                        *slot.get_mut() += coeff;
                    }
                }
            }
        }
        accum.retain(|_, c| !c.is_zero());
        result.terms = accum;
        Ok(result)
    }

    /// Left partial derivative; the order drops by one (saturating at 0).
    pub fn partial(&self, var: usize) -> Result<Self, SeriesError> {
        self.vars.check_var(var)?;
        let order = self.order.saturating_sub(1);
        let odd = self.vars.parity(var).is_odd();
        let mut result = Self::zero(self.vars.clone(), order);
        for (index, coeff) in &self.terms {
            let e = index.get(var);
            if e == 0 {
                continue;
            }
            let mut exponents = index.exponents().to_vec();
            exponents[var] -= 1;
            let mut c = coeff * Rational::from_integer(BigInt::from(e));
            if odd {
                let before = (0..var).filter(|&v| self.vars.parity(v).is_odd() && index.get(v) == 1).count();
                if before % 2 == 1 {
                    c = -c;
                }
            }
            result.accumulate(MultiIndex::new(exponents), c);
        }
        Ok(result)
    }

    /// Antiderivative in an even variable with zero integration constant; the
    /// order rises by one.
    pub fn antiderivative(&self, var: usize) -> Result<Self, SeriesError> {
        self.vars.check_var(var)?;
        if self.vars.parity(var).is_odd() {
            return Err(SeriesError::OddVariable { var });
        }
        let order = self.order + 1;
        let mut result = Self::zero(self.vars.clone(), order);
        for (index, coeff) in &self.terms {
            let mut exponents = index.exponents().to_vec();
            exponents[var] += 1;
            let c = coeff / Rational::from_integer(BigInt::from(exponents[var]));
            result.accumulate(MultiIndex::new(exponents), c);
        }
        Ok(result)
    }

    /// Evaluate the stored polynomial at a complex point.
    pub fn eval_complex(&self, point: &[ComplexScalar]) -> Result<ComplexScalar, SeriesError> {
        if point.len() != self.vars.count() {
            return Err(SeriesError::PointLength { got: point.len(), expected: self.vars.count() });
        }
        if let Some(var) = (0..self.vars.count()).find(|&v| self.vars.parity(v).is_odd()) {
            return Err(SeriesError::OddVariable { var });
        }
        let mut total = ComplexScalar::new(0.0, 0.0);
        for (index, coeff) in &self.terms {
            let mut term = ComplexScalar::new(rational_to_f64(coeff), 0.0);
            for (var, &e) in index.exponents().iter().enumerate() {
                if e > 0 {
                    term *= point[var].powu(e);
                }
            }
            total += term;
        }
        if total.re.is_finite() && total.im.is_finite() {
            Ok(total)
        } else {
            Err(SeriesError::NonFinite)
        }
    }

    /// Structural audit of the representation invariants.
    pub fn audit(&self) -> Result<(), String> {
        for (index, coeff) in &self.terms {
            if coeff.is_zero() {
                return Err(format!("zero coefficient stored at {:?}", index.exponents()));
            }
            if index.degree() > self.order {
                return Err(format!("index {:?} exceeds truncation order {}", index.exponents(), self.order));
            }
            if index.exponents().len() != self.vars.count() {
                return Err("exponent vector length mismatch".into());
            }
            for (var, &e) in index.exponents().iter().enumerate() {
                if self.vars.parity(var).is_odd() && e > 1 {
                    return Err(format!("odd variable {var} raised to power {e}"));
                }
            }
        }
        Ok(())
    }

    pub fn to_doc(&self) -> SeriesDoc {
        SeriesDoc {
            vars: self.vars.count(),
            parities: self.vars.parities().iter().map(|p| p.bit()).collect(),
            order: self.order,
            terms: self
                .terms
                .iter()
                .map(|(index, coeff)| TermDoc {
                    exp: index.exponents().to_vec(),
                    num: coeff.numer().to_string(),
                    den: coeff.denom().to_string(),
                })
                .collect(),
        }
    }

    pub fn from_doc(doc: &SeriesDoc) -> Result<Self, SeriesError> {
        let bad = |msg: String| SeriesError::InvalidDocument(msg);
        if doc.parities.len() != doc.vars {
            return Err(bad(format!("{} parities listed for {} variables", doc.parities.len(), doc.vars)));
        }
        let parities = doc
            .parities
            .iter()
            .map(|&b| Parity::from_bit(b).ok_or_else(|| bad(format!("parity {b} is not 0 or 1"))))
            .collect::<Result<Vec<_>, _>>()?;
        let vars = VariableSpec::new(parities)?;
        let mut series = Self::zero(vars, doc.order);
        for term in &doc.terms {
            if term.exp.len() != doc.vars {
                return Err(bad(format!("exponent vector {:?} has wrong length", term.exp)));
            }
            let index = MultiIndex::new(term.exp.clone());
            if index.degree() > doc.order {
                return Err(bad(format!("term {:?} exceeds order {}", term.exp, doc.order)));
            }
            for (var, &e) in term.exp.iter().enumerate() {
                if series.vars.parity(var).is_odd() && e > 1 {
                    return Err(bad(format!("odd variable {var} raised to power {e}")));
                }
            }
            let num: BigInt = term.num.parse().map_err(|_| bad(format!("bad numerator {:?}", term.num)))?;
            let den: BigInt = term.den.parse().map_err(|_| bad(format!("bad denominator {:?}", term.den)))?;
            if !den.is_positive() {
                return Err(bad(format!("denominator {den} is not positive")));
            }
            if series.terms.contains_key(&index) {
                return Err(bad(format!("duplicate term {:?}", term.exp)));
            }
            series.insert(index, Rational::new(num, den));
        }
        Ok(series)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("series documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, SeriesError> {
        let doc: SeriesDoc = serde_json::from_str(text).map_err(|e| SeriesError::InvalidDocument(e.to_string()))?;
        Self::from_doc(&doc)
    }
}

impl fmt::Display for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0 + O({})", self.order + 1);
        }
        let mut first = true;
        for (index, coeff) in &self.terms {
            let negative = coeff.is_negative();
            if first {
                if negative {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if negative { "-" } else { "+" })?;
            }
            first = false;
            let magnitude = coeff.abs();
            let mut factors = Vec::new();
            for (var, &e) in index.exponents().iter().enumerate() {
                match e {
                    0 => {}
                    1 => factors.push(format!("x{var}")),
                    _ => factors.push(format!("x{var}^{e}")),
                }
            }
            if factors.is_empty() || !magnitude.is_one() {
                write!(f, "{}", format_rational(&magnitude))?;
                if !factors.is_empty() {
                    write!(f, "*")?;
                }
            }
            write!(f, "{}", factors.join("*"))?;
        }
        write!(f, " + O({})", self.order + 1)
    }
}

/// JSON document form of a series.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesDoc {
    pub vars: usize,
    pub parities: Vec<u8>,
    pub order: u32,
    pub terms: Vec<TermDoc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermDoc {
    pub exp: Vec<u32>,
    pub num: String,
    pub den: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(order: u32) -> TruncatedSeries {
        TruncatedSeries::variable(VariableSpec::even(1), order, 0).unwrap()
    }

    fn poly1(order: u32, coeffs: &[Rational]) -> TruncatedSeries {
        TruncatedSeries::from_terms(
            VariableSpec::even(1),
            order,
            coeffs.iter().enumerate().map(|(k, c)| (vec![k as u32], c.clone())),
        )
        .unwrap()
    }

    #[test]
    fn add_cancels_constants() {
        let s = poly1(4, &[int(1), int(1)]);
        let t = poly1(4, &[int(-1), int(1)]);
        let sum = s.add(&t).unwrap();
        assert_eq!(sum, x(4).scale(&int(2)));
        assert!(sum.audit().is_ok());
    }

    #[test]
    fn add_zero_is_identity() {
        let s = poly1(3, &[int(2), rat(1, 3), int(-4)]);
        let zero = TruncatedSeries::zero(VariableSpec::even(1), 3);
        assert_eq!(s.add(&zero).unwrap(), s);
    }

    #[test]
    fn add_truncates_to_smaller_order() {
        let s = TruncatedSeries::monomial(VariableSpec::even(1), 2, vec![2], int(1)).unwrap();
        let t = TruncatedSeries::monomial(VariableSpec::even(1), 3, vec![3], int(1)).unwrap();
        let sum = s.add(&t).unwrap();
        assert_eq!(sum.order(), 2);
        assert_eq!(sum, s);
    }

    #[test]
    fn add_rejects_mismatched_vars() {
        let s = TruncatedSeries::zero(VariableSpec::even(1), 2);
        let t = TruncatedSeries::zero(VariableSpec::even(2), 2);
        assert_eq!(s.add(&t), Err(SeriesError::VarsMismatch));
        assert_eq!(s.mul(&t), Err(SeriesError::VarsMismatch));
    }

    #[test]
    fn mul_difference_of_squares() {
        let s = poly1(2, &[int(1), int(1)]);
        let t = poly1(2, &[int(1), int(-1)]);
        assert_eq!(s.mul(&t).unwrap(), poly1(2, &[int(1), int(0), int(-1)]));
    }

    #[test]
    fn odd_square_vanishes() {
        let vars = VariableSpec::new(vec![Parity::Odd]).unwrap();
        let theta = TruncatedSeries::variable(vars, 3, 0).unwrap();
        assert!(theta.mul(&theta).unwrap().is_zero());
    }

    #[test]
    fn odd_variables_anticommute() {
        let vars = VariableSpec::new(vec![Parity::Odd, Parity::Odd]).unwrap();
        let a = TruncatedSeries::variable(vars.clone(), 3, 0).unwrap();
        let b = TruncatedSeries::variable(vars, 3, 1).unwrap();
        let ab = a.mul(&b).unwrap();
        let ba = b.mul(&a).unwrap();
        assert_eq!(ab, ba.neg());
        assert_eq!(ab.coeff(&[1, 1]), int(1));
    }

    #[test]
    fn exponential_square() {
        // Oracle: e^{2x} has coefficients 2^k / k!.
        let exp = poly1(3, &[int(1), int(1), rat(1, 2), rat(1, 6)]);
        let square = exp.mul(&exp).unwrap();
        let mut expected = Vec::new();
        let mut factorial = 1i64;
        for k in 0..=3u32 {
            if k > 0 {
                factorial *= k as i64;
            }
            expected.push(rat(2i64.pow(k), factorial));
        }
        assert_eq!(square, poly1(3, &expected));
        assert_eq!(square.coeff(&[3]), rat(4, 3));
    }

    #[test]
    fn partial_examples() {
        let cube = TruncatedSeries::monomial(VariableSpec::even(1), 5, vec![3], int(1)).unwrap();
        assert_eq!(
            cube.partial(0).unwrap(),
            TruncatedSeries::monomial(VariableSpec::even(1), 4, vec![2], int(3)).unwrap()
        );
        let c = TruncatedSeries::constant(VariableSpec::even(1), 5, int(7));
        assert!(c.partial(0).unwrap().is_zero());
        let v2 = VariableSpec::even(2);
        let s = TruncatedSeries::from_terms(v2.clone(), 4, vec![(vec![2, 1], int(1)), (vec![1, 2], int(1))]).unwrap();
        let expected = TruncatedSeries::from_terms(v2, 3, vec![(vec![1, 1], int(2)), (vec![0, 2], int(1))]).unwrap();
        assert_eq!(s.partial(0).unwrap(), expected);
        assert_eq!(s.partial(2), Err(SeriesError::VarOutOfRange { var: 2, count: 2 }));
    }

    #[test]
    fn antiderivative_examples() {
        let sq = TruncatedSeries::monomial(VariableSpec::even(1), 3, vec![2], int(3)).unwrap();
        let cube = sq.antiderivative(0).unwrap();
        assert_eq!(cube.order(), 4);
        assert_eq!(cube.coeff(&[3]), int(1));
        assert!(TruncatedSeries::zero(VariableSpec::even(1), 2).antiderivative(0).unwrap().is_zero());
        let v2 = VariableSpec::even(2);
        let s = TruncatedSeries::monomial(v2.clone(), 3, vec![1, 1], int(2)).unwrap();
        assert_eq!(s.antiderivative(0).unwrap().coeff(&[2, 1]), int(1));
        let odd = VariableSpec::new(vec![Parity::Odd]).unwrap();
        assert_eq!(TruncatedSeries::zero(odd, 2).antiderivative(0), Err(SeriesError::OddVariable { var: 0 }));
    }

    #[test]
    fn eval_examples() {
        let z = |re: f64| ComplexScalar::new(re, 0.0);
        let s = poly1(3, &[int(1), int(0), int(1)]);
        assert_eq!(s.eval_complex(&[z(2.0)]).unwrap(), z(5.0));
        let zero = TruncatedSeries::zero(VariableSpec::even(1), 3);
        assert_eq!(zero.eval_complex(&[ComplexScalar::new(3.0, -1.0)]).unwrap(), z(0.0));
        let e = poly1(2, &[int(1), int(1), rat(1, 2)]);
        assert_eq!(e.eval_complex(&[z(1.0)]).unwrap(), z(2.5));
        let odd = VariableSpec::new(vec![Parity::Odd]).unwrap();
        assert!(matches!(TruncatedSeries::zero(odd, 2).eval_complex(&[z(1.0)]), Err(SeriesError::OddVariable { .. })));
        assert!(matches!(s.eval_complex(&[z(f64::INFINITY)]), Err(SeriesError::NonFinite)));
    }

    #[test]
    fn graded_lex_order() {
        let s = TruncatedSeries::from_terms(
            VariableSpec::even(2),
            3,
            vec![(vec![0, 1], int(1)), (vec![2, 0], int(1)), (vec![1, 0], int(1)), (vec![0, 0], int(1))],
        )
        .unwrap();
        let order: Vec<Vec<u32>> = s.terms().map(|(i, _)| i.exponents().to_vec()).collect();
        assert_eq!(order, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0]]);
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("3/6"), Some(rat(1, 2)));
        assert_eq!(parse_rational("-4"), Some(int(-4)));
        assert_eq!(parse_rational("-1.25"), Some(rat(-5, 4)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
        assert_eq!(format_rational(&rat(-2, 4)), "-1/2");
    }

    #[test]
    fn document_rejects_bad_input() {
        let text = r#"{"vars":1,"parities":[0],"order":1,"terms":[{"exp":[2],"num":"1","den":"1"}]}"#;
        assert!(TruncatedSeries::from_json(text).is_err());
        let text = r#"{"vars":1,"parities":[0],"order":2,"terms":[{"exp":[2],"num":"1","den":"0"}]}"#;
        assert!(TruncatedSeries::from_json(text).is_err());
        let text = r#"{"vars":2,"parities":[0],"order":2,"terms":[]}"#;
        assert!(TruncatedSeries::from_json(text).is_err());
    }

    #[test]
    fn display_is_readable() {
        let s = poly1(2, &[int(1), int(-2), rat(1, 2)]);
        assert_eq!(s.to_string(), "1 - 2*x0 + 1/2*x0^2 + O(3)");
    }
}
