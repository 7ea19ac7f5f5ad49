//! Quantum cohomology of projective space and its genus-zero
//! Gromov-Witten numbers.
//!
//! The potential of `P^r` in flat coordinates `x^0, ..., x^r` is the classical
//! cubic plus `Σ_d Σ_n N(d; n) x^n / n! · e^{d x^1}`, where `n = (n_2, ..., n_r)`
//! runs over exponent vectors of `x^2, ..., x^r`. The numbers are found degree
//! by degree from the WDVV equations: at curve degree `d` they enter linearly
//! (paired with the classical cubic) while products of lower degrees are
//! already known.
//!
//! Internally the solver works with `q = e^{x^1}` and divided powers
//! `x^m / m!`, so that derivatives along `x^1` multiply by `d` and derivatives
//! along `x^a`, `a >= 2`, shift exponents.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potentials::{EulerData, FlatMetric, PotentialError, VectorFieldJet, WdvvPotential};
use crate::series::{Parity, Rational, TruncatedSeries, VariableSpec};

/// Largest supported `r`.
pub const MAX_R: u32 = 4;
/// Largest supported curve degree.
pub const MAX_DEGREE: u32 = 6;
/// Environment variable overriding the default series order.
pub const ORDER_ENV: &str = "FFORGE_MAX_ORDER";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QcohError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degree {degree}: {unknowns} unknowns but rank {rank}")]
    Underdetermined { degree: u32, unknowns: usize, rank: usize },
    #[error("degree {degree}: inconsistent WDVV system at equation {equation}")]
    Inconsistent { degree: u32, equation: String },
    #[error("N({degree}; {exponents:?}) = {value} is not a non-negative integer")]
    NotANonNegativeInteger { degree: u32, exponents: Vec<u32>, value: String },
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

type Result<T> = std::result::Result<T, QcohError>;

/// Default series order for a manifold of the given dimension.
pub fn default_order(dim: usize) -> u32 {
    if let Some(order) = std::env::var(ORDER_ENV).ok().and_then(|v| v.trim().parse::<u32>().ok()) {
        return order;
    }
    if dim <= 3 {
        12
    } else {
        8
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QcohSetup {
    r: u32,
    max_degree: u32,
    order: u32,
    metric: FlatMetric,
}

impl QcohSetup {
    pub fn new(r: u32, max_degree: u32) -> Result<Self> {
        if r == 0 || r > MAX_R {
            return Err(QcohError::InvalidParameter(format!("r must be in 1..={MAX_R}, got {r}")));
        }
        if max_degree == 0 || max_degree > MAX_DEGREE {
            return Err(QcohError::InvalidParameter(format!(
                "max degree must be in 1..={MAX_DEGREE}, got {max_degree}"
            )));
        }
        let dim = r as usize + 1;
        Ok(Self { r, max_degree, order: default_order(dim), metric: FlatMetric::antidiagonal(dim) })
    }

    /// Override the series order used for the potential.
    pub fn with_order(mut self, order: u32) -> Self {
        self.order = order;
        self
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.r as usize + 1
    }

    pub fn vars(&self) -> VariableSpec {
        VariableSpec::even(self.dim())
    }

    pub fn metric(&self) -> &FlatMetric {
        &self.metric
    }

    /// `Σ_a (a−1) n_a` required of `N(d; n)`.
    pub fn weight(&self, degree: u32) -> i64 {
        (self.r as i64 + 1) * degree as i64 + self.r as i64 - 3
    }

    /// Total degree through which the truncated potential agrees with the
    /// full one: the series order, lowered below the first monomial that a
    /// curve degree above the cap could contribute.
    pub fn certified_order(&self) -> u32 {
        if self.r == 1 {
            return self.order;
        }
        let w = self.weight(self.max_degree + 1);
        let lowest = (w + self.r as i64 - 2) / (self.r as i64 - 1);
        self.order.min((lowest - 1).max(0) as u32)
    }

    /// Exponent vectors `(n_2, ..., n_r)` with `Σ (a−1) n_a = weight`.
    pub fn exponent_vectors(&self, weight: i64) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        if weight < 0 {
            return out;
        }
        let len = self.r.saturating_sub(1) as usize;
        let mut current = vec![0u32; len];
        fill_exponents(&mut current, 0, weight as u64, &mut out);
        out
    }

    /// The unknown `N(1; 0, ..., 0, 2)` fixed to one.
    pub fn seed(&self) -> Vec<u32> {
        let mut n = vec![0u32; self.r.saturating_sub(1) as usize];
        if let Some(last) = n.last_mut() {
            *last = 2;
        }
        n
    }
}

fn fill_exponents(current: &mut Vec<u32>, pos: usize, remaining: u64, out: &mut Vec<Vec<u32>>) {
    if pos == current.len() {
        if remaining == 0 {
            out.push(current.clone());
        }
        return;
    }
    let step = pos as u64 + 1;
    let mut k = 0u64;
    while k * step <= remaining {
        current[pos] = k as u32;
        fill_exponents(current, pos + 1, remaining - k * step, out);
        k += 1;
    }
    current[pos] = 0;
}

/// Gromov-Witten numbers `N(d; n_2, ..., n_r)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GwTable {
    r: u32,
    max_degree: u32,
    entries: BTreeMap<(u32, Vec<u32>), BigInt>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GwEntryDoc {
    pub d: u32,
    pub n: Vec<u32>,
    #[serde(rename = "N")]
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GwTableDoc {
    pub r: u32,
    pub max_degree: u32,
    pub entries: Vec<GwEntryDoc>,
}

impl GwTable {
    pub fn empty(r: u32, max_degree: u32) -> Self {
        Self { r, max_degree, entries: BTreeMap::new() }
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn get(&self, degree: u32, exponents: &[u32]) -> Option<&BigInt> {
        self.entries.get(&(degree, exponents.to_vec()))
    }

    pub fn insert(&mut self, degree: u32, exponents: Vec<u32>, value: BigInt) {
        self.entries.insert((degree, exponents), value);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries ordered by degree, then exponent vector.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &[u32], &BigInt)> {
        self.entries.iter().map(|((d, n), v)| (*d, n.as_slice(), v))
    }

    /// Lines `d n_2 ... n_r N`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (d, n, v) in self.iter() {
            let mut fields = vec![d.to_string()];
            fields.extend(n.iter().map(u32::to_string));
            fields.push(v.to_string());
            out.push_str(&fields.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn to_doc(&self) -> GwTableDoc {
        GwTableDoc {
            r: self.r,
            max_degree: self.max_degree,
            entries: self.iter().map(|(d, n, v)| GwEntryDoc { d, n: n.to_vec(), value: v.to_string() }).collect(),
        }
    }

    pub fn from_doc(doc: &GwTableDoc) -> Result<Self> {
        let mut table = Self::empty(doc.r, doc.max_degree);
        for e in &doc.entries {
            let v: BigInt =
                e.value.parse().map_err(|_| QcohError::InvalidParameter(format!("bad integer {:?}", e.value)))?;
            table.insert(e.d, e.n.clone(), v);
        }
        Ok(table)
    }
}

/// `(1/6) Σ_{a+b+c=r} x^a x^b x^c`: the cubic of the cup product paired by
/// the Poincaré metric.
pub fn classical_potential(setup: &QcohSetup) -> TruncatedSeries {
    let dim = setup.dim();
    let r = setup.r as usize;
    let mut exps: BTreeMap<Vec<u32>, u32> = BTreeMap::new();
    for a in 0..=r {
        for b in 0..=r - a {
            let c = r - a - b;
            let mut e = vec![0u32; dim];
            e[a] += 1;
            e[b] += 1;
            e[c] += 1;
            *exps.entry(e).or_insert(0) += 1;
        }
    }
    let sixth = Rational::new(1.into(), 6.into());
    let terms = exps.into_iter().map(|(e, count)| (e, &sixth * Rational::from_integer(count.into())));
    TruncatedSeries::from_terms(setup.vars(), setup.order.max(3), terms).expect("well-formed cubic")
}

fn multinomial(total: &[u32], part: &[u32]) -> BigInt {
    total.iter().zip(part).fold(BigInt::one(), |acc, (&n, &k)| acc * binomial(n, k))
}

fn binomial(n: u32, k: u32) -> BigInt {
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Known numbers, indexed by `(d, n)`, used as `Γ_ijk` coefficients.
struct Known<'a> {
    r: usize,
    setup: &'a QcohSetup,
    values: &'a HashMap<(u32, Vec<u32>), Rational>,
    by_weight: &'a HashMap<i64, Vec<Vec<u32>>>,
}

impl Known<'_> {
    fn weight(&self, degree: u32) -> i64 {
        self.setup.weight(degree)
    }

    fn vectors(&self, weight: i64) -> &[Vec<u32>] {
        self.by_weight.get(&weight).map_or(&[], Vec::as_slice)
    }

    /// Exponent vector of `N` reached from divided-power index `m` after
    /// differentiating along `indices`; `None` when a `∂_0` kills the term.
    fn target(&self, m: &[u32], indices: &[usize]) -> Option<(Vec<u32>, u32)> {
        let mut n = m.to_vec();
        let mut ones = 0;
        for &i in indices {
            match i {
                0 => return None,
                1 => ones += 1,
                _ => n[i - 2] += 1,
            }
        }
        Some((n, ones))
    }

    /// Coefficient of `q^d x^m/m!` in `Γ_ijk`.
    fn gamma(&self, degree: u32, m: &[u32], indices: &[usize]) -> Rational {
        let Some((n, ones)) = self.target(m, indices) else {
            return Rational::zero();
        };
        match self.values.get(&(degree, n)) {
            Some(v) => v * Rational::from_integer(BigInt::from(degree).pow(ones)),
            None => Rational::zero(),
        }
    }
}

/// Full reduced row echelon form grown one equation at a time.
struct IncrementalSystem {
    unknowns: usize,
    rows: Vec<(usize, Vec<Rational>, Rational)>,
    solved: Option<Vec<Rational>>,
}

impl IncrementalSystem {
    fn new(unknowns: usize) -> Self {
        Self { unknowns, rows: Vec::new(), solved: None }
    }

    fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Returns false when the equation contradicts the ones already added.
    fn add(&mut self, mut row: Vec<Rational>, mut rhs: Rational) -> bool {
        if let Some(x) = &self.solved {
            // Full rank: the equation is a consistency check.
            let lhs = row.iter().zip(x).filter(|(c, _)| !c.is_zero()).fold(Rational::zero(), |acc, (c, v)| acc + c * v);
            return lhs == rhs;
        }
        for (pivot, prow, prhs) in &self.rows {
            if row[*pivot].is_zero() {
                continue;
            }
            let factor = row[*pivot].clone();
            for (x, p) in row.iter_mut().zip(prow) {
                if !p.is_zero() {
                    *x -= &factor * p;
                }
            }
            rhs -= &factor * prhs;
        }
        let Some(pivot) = row.iter().position(|x| !x.is_zero()) else {
            return rhs.is_zero();
        };
        let inv = row[pivot].recip();
        for x in row.iter_mut() {
            *x *= &inv;
        }
        rhs *= &inv;
        for (_, prow, prhs) in self.rows.iter_mut() {
            if prow[pivot].is_zero() {
                continue;
            }
            let factor = prow[pivot].clone();
            for (x, p) in prow.iter_mut().zip(&row) {
                if !p.is_zero() {
                    *x -= &factor * p;
                }
            }
            *prhs -= &factor * &rhs;
        }
        self.rows.push((pivot, row, rhs));
        if self.rows.len() == self.unknowns {
            let mut x = vec![Rational::zero(); self.unknowns];
            for (p, _, v) in &self.rows {
                x[*p] = v.clone();
            }
            self.solved = Some(x);
        }
        true
    }

    fn solution(&self) -> Option<Vec<Rational>> {
        self.solved.clone()
    }
}

/// Solve for every `N(d; n)` with `d <= max_degree`.
pub fn solve_gw(setup: &QcohSetup) -> Result<GwTable> {
    let r = setup.r as usize;
    let mut values: HashMap<(u32, Vec<u32>), Rational> = HashMap::new();
    let by_weight: HashMap<i64, Vec<Vec<u32>>> =
        (0..=setup.weight(setup.max_degree) + 3).map(|w| (w, setup.exponent_vectors(w))).collect();
    let mut table = GwTable::empty(setup.r, setup.max_degree);
    for degree in 1..=setup.max_degree {
        let unknown_list = setup.exponent_vectors(setup.weight(degree));
        if unknown_list.is_empty() {
            continue;
        }
        let column: HashMap<Vec<u32>, usize> = unknown_list.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let mut system = IncrementalSystem::new(unknown_list.len());
        if degree == 1 {
            let seed = setup.seed();
            let mut row = vec![Rational::zero(); unknown_list.len()];
            row[column[&seed]] = Rational::one();
            system.add(row, Rational::one());
        }
        let known = Known { r, setup, values: &values, by_weight: &by_weight };
        let weight = setup.weight(degree);
        // The equation (a, b, c, dd) changes sign under a <-> c and under
        // b <-> dd, so a < c and b < dd cover everything.
        for a in 0..=r {
            for b in 0..=r {
                for c in a + 1..=r {
                    for dd in b + 1..=r {
                        let shift = (a + b + c + dd) as i64 - 3;
                        for m in setup.exponent_vectors(weight - shift) {
                            let (row, rhs) = equation(&known, degree, &m, [a, b, c, dd], &column);
                            if !system.add(row, rhs) {
                                return Err(QcohError::Inconsistent {
                                    degree,
                                    equation: format!("indices ({a},{b},{c},{dd}) monomial {m:?}"),
                                });
                            }
                        }
                    }
                }
            }
        }
        let solution = system.solution().ok_or(QcohError::Underdetermined {
            degree,
            unknowns: unknown_list.len(),
            rank: system.rank(),
        })?;
        for (n, v) in unknown_list.into_iter().zip(solution) {
            if !v.is_integer() || v.is_negative() {
                return Err(QcohError::NotANonNegativeInteger { degree, exponents: n, value: v.to_string() });
            }
            table.insert(degree, n.clone(), v.to_integer());
            values.insert((degree, n), v);
        }
    }
    Ok(table)
}

/// The WDVV equation `(a, b, c, dd)` at `q^d x^m/m!`, split into the part
/// linear in degree-`d` numbers and the known remainder: `row · N = rhs`.
fn equation(
    known: &Known<'_>,
    degree: u32,
    m: &[u32],
    [a, b, c, dd]: [usize; 4],
    column: &HashMap<Vec<u32>, usize>,
) -> (Vec<Rational>, Rational) {
    let r = known.r;
    let mut row = vec![Rational::zero(); column.len()];
    let dq = BigInt::from(degree);
    let mut linear = |indices: [usize; 3], sign: i64| {
        if let Some((n, ones)) = known.target(m, &indices) {
            if let Some(&col) = column.get(&n) {
                row[col] += Rational::from_integer(dq.pow(ones) * sign);
            }
        }
    };
    // Classical factor pinned by a + b + e = r etc.
    if a + b <= r {
        linear([a + b, c, dd], 1);
    }
    if c + dd <= r {
        linear([a, b, c + dd], 1);
    }
    if b + c <= r {
        linear([b + c, a, dd], -1);
    }
    if a + dd <= r {
        linear([b, c, a + dd], -1);
    }
    let mut quadratic = Rational::zero();
    for d1 in 1..degree {
        let d2 = degree - d1;
        for e in 1..r {
            let f = r - e;
            for (first, second, negative) in [([a, b, e], [f, c, dd], false), ([b, c, e], [f, a, dd], true)] {
                if first.contains(&0) || second.contains(&0) {
                    continue;
                }
                // Only m1 of the weight fixed by the grading can contribute.
                let w1 = known.weight(d1) + 3 - first.iter().sum::<usize>() as i64;
                for m1 in known.vectors(w1) {
                    if m1.iter().zip(m).any(|(x, y)| x > y) {
                        continue;
                    }
                    let left = known.gamma(d1, m1, &first);
                    if left.is_zero() {
                        continue;
                    }
                    let m2: Vec<u32> = m.iter().zip(m1).map(|(x, y)| x - y).collect();
                    let right = known.gamma(d2, &m2, &second);
                    if right.is_zero() {
                        continue;
                    }
                    let term = left * right * Rational::from_integer(multinomial(m, m1));
                    if negative {
                        quadratic -= term;
                    } else {
                        quadratic += term;
                    }
                }
            }
        }
    }
    (row, -quadratic)
}

fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// Classical cubic plus quantum corrections, truncated to the certified order.
pub fn quantum_potential(setup: &QcohSetup, table: &GwTable) -> Result<WdvvPotential> {
    let certified = setup.certified_order();
    let order = setup.order;
    let mut phi = classical_potential(setup).truncate(order);
    let dim = setup.dim();
    for (degree, n, value) in table.iter() {
        if degree > setup.max_degree {
            continue;
        }
        let base: u32 = n.iter().sum();
        if base > order {
            continue;
        }
        let denom = n.iter().fold(BigInt::one(), |acc, &k| acc * factorial(k));
        for k in 0..=(order - base) {
            let mut exps = vec![0u32; dim];
            exps[1] = k;
            for (i, &e) in n.iter().enumerate() {
                exps[i + 2] = e;
            }
            let coeff = Rational::new(value * BigInt::from(degree).pow(k), &denom * factorial(k));
            phi.add_term(exps, coeff).map_err(PotentialError::from)?;
        }
    }
    Ok(WdvvPotential::new(phi.truncate(certified), setup.metric.clone())?)
}

/// `E = Σ_a (1−a) x^a ∂_a + (r+1) ∂_1` with `d0 = 1`, `D = 2 − r`.
pub fn euler_field_p_r(setup: &QcohSetup) -> EulerData {
    let vars = setup.vars();
    let order = setup.order;
    let components = (0..setup.dim())
        .map(|a| {
            let mut s = TruncatedSeries::zero(vars.clone(), order);
            let weight = 1 - a as i64;
            if weight != 0 {
                let mut e = vec![0u32; setup.dim()];
                e[a] = 1;
                s.add_term(e, Rational::from_integer(weight.into())).expect("in range");
            }
            if a == 1 {
                s.add_term(vec![0; setup.dim()], Rational::from_integer((setup.r as i64 + 1).into()))
                    .expect("in range");
            }
            s
        })
        .collect();
    let field = VectorFieldJet::new(components, Parity::Even).expect("even affine field");
    EulerData::new(field, Rational::one(), Rational::from_integer((2 - setup.r as i64).into())).expect("even field")
}

/// Lowest total degree among monomials contributed by curve degree `d`.
pub fn lowest_degree(setup: &QcohSetup, degree: u32) -> Option<u32> {
    setup.exponent_vectors(setup.weight(degree)).iter().map(|n| n.iter().sum::<u32>()).min()
}
