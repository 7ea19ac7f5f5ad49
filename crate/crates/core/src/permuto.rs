//! Ordered set partitions, the permutohedral fan and its homology algebra.
//!
//! Ground sets are `{1, ..., n}`. Lattice vectors live in `Z^n / Z(1,...,1)`
//! and are represented with last coordinate zero. The cone of an ordered
//! partition is generated by the indicator vectors of its cumulative unions;
//! a vector lies in the relative interior of the cone labelled by its level
//! sets, ordered by decreasing value.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, Matrix, Solution};
use crate::residual::{ResidualCollector, ResidualReport};
use crate::series::{int, Parity, Rational, SeriesError, TruncatedSeries, VariableSpec};

/// Largest ground set for enumeration.
pub const MAX_PARTITION_N: usize = 7;

/// Largest ground set for building a fan.
pub const MAX_FAN_N: usize = 6;

/// Largest ground set for the exact pairwise intersection check.
pub const MAX_FACE_CHECK_N: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PermutoError {
    #[error("n = {n} is outside 1..={max}")]
    OutOfRange { n: usize, max: usize },
    #[error("invalid ordered partition: {0}")]
    InvalidPartition(String),
    #[error("cone {label} has rank {rank}, expected {expected}")]
    RankDefect { label: String, rank: usize, expected: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("no correlator supplied for labels {0:?}")]
    MissingEntry(Vec<usize>),
    #[error("correlator {labels:?} has an entry at ({row}, {col}) of the wrong parity")]
    ParityViolation { labels: Vec<usize>, row: usize, col: usize },
    #[error("correlator {0:?} repeats an odd label but is nonzero")]
    SymmetryViolation(Vec<usize>),
    #[error("constant term of entry ({0}, {1}) is nonzero")]
    NonzeroConstantTerm(usize, usize),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

pub type Result<T> = std::result::Result<T, PermutoError>;

/// An ordered partition of `{1, ..., n}` into nonempty parts, each sorted.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct OrderedPartition {
    parts: Vec<Vec<usize>>,
    n: usize,
}

impl TryFrom<Vec<Vec<usize>>> for OrderedPartition {
    type Error = PermutoError;

    fn try_from(parts: Vec<Vec<usize>>) -> Result<Self> {
        Self::new(parts)
    }
}

impl From<OrderedPartition> for Vec<Vec<usize>> {
    fn from(p: OrderedPartition) -> Self {
        p.parts
    }
}

impl std::fmt::Display for OrderedPartition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .parts
            .iter()
            .map(|p| format!("{{{}}}", p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")))
            .collect();
        write!(f, "({})", parts.join(","))
    }
}

impl OrderedPartition {
    pub fn new(mut parts: Vec<Vec<usize>>) -> Result<Self> {
        let n: usize = parts.iter().map(Vec::len).sum();
        let mut seen = vec![false; n + 1];
        for part in parts.iter_mut() {
            if part.is_empty() {
                return Err(PermutoError::InvalidPartition("empty part".into()));
            }
            part.sort_unstable();
            for &x in part.iter() {
                if x == 0 || x > n || seen[x] {
                    return Err(PermutoError::InvalidPartition(format!("element {x} out of range or repeated")));
                }
                seen[x] = true;
            }
        }
        if n == 0 {
            return Err(PermutoError::InvalidPartition("empty ground set".into()));
        }
        Ok(Self { parts, n })
    }

    /// The one-part partition of `{1, ..., n}`.
    pub fn trivial(n: usize) -> Self {
        Self { parts: vec![(1..=n).collect()], n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn parts(&self) -> &[Vec<usize>] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Whether every part is a single element.
    pub fn is_maximal(&self) -> bool {
        self.parts.len() == self.n
    }

    /// Concatenation with the parts of `other` shifted by `self.n()`.
    pub fn concat(&self, other: &OrderedPartition) -> OrderedPartition {
        let mut parts = self.parts.clone();
        parts.extend(other.parts.iter().map(|p| p.iter().map(|x| x + self.n).collect()));
        OrderedPartition { parts, n: self.n + other.n }
    }
}

/// All ordered partitions of `{1, ..., n}`, by number of parts, then
/// lexicographically.
pub fn enumerate_partitions(n: usize) -> Result<Vec<OrderedPartition>> {
    if !(1..=MAX_PARTITION_N).contains(&n) {
        return Err(PermutoError::OutOfRange { n, max: MAX_PARTITION_N });
    }
    let mut out = Vec::new();
    for k in 1..=n {
        let mut level = Vec::new();
        // Surjections {1..n} -> {0..k-1}, as base-k digit strings.
        let mut labels = vec![0usize; n];
        loop {
            let mut parts = vec![Vec::new(); k];
            for (i, &l) in labels.iter().enumerate() {
                parts[l].push(i + 1);
            }
            if parts.iter().all(|p| !p.is_empty()) {
                level.push(OrderedPartition { parts, n });
            }
            let mut pos = 0;
            while pos < n && labels[pos] == k - 1 {
                labels[pos] = 0;
                pos += 1;
            }
            if pos == n {
                break;
            }
            labels[pos] += 1;
        }
        level.sort();
        out.extend(level);
    }
    Ok(out)
}

/// Ordered Bell numbers by the recurrence `F(n) = sum_k C(n, k) F(n - k)`.
pub fn fubini(n: usize) -> u64 {
    let mut f = vec![1u64];
    for m in 1..=n {
        let mut total = 0u64;
        let mut binom = 1u64;
        for k in 1..=m {
            binom = binom * (m - k + 1) as u64 / k as u64;
            total += binom * f[m - k];
        }
        f.push(total);
    }
    f[n]
}

/// The cumulative two-part splits of an ordered partition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoPartitionFamily {
    pub n: usize,
    pub sigmas: Vec<OrderedPartition>,
}

impl TwoPartitionFamily {
    /// Recover the source partition from successive differences.
    pub fn source(&self) -> Result<OrderedPartition> {
        if self.sigmas.is_empty() {
            return Ok(OrderedPartition::trivial(self.n));
        }
        let mut parts = Vec::new();
        let mut previous: Vec<usize> = Vec::new();
        for sigma in &self.sigmas {
            if sigma.len() != 2 || sigma.n() != self.n {
                return Err(PermutoError::InvalidPartition(format!("{sigma} is not a 2-partition of {}", self.n)));
            }
            let first = &sigma.parts()[0];
            if !previous.iter().all(|x| first.contains(x)) {
                return Err(PermutoError::InvalidPartition("family is not nested".into()));
            }
            parts.push(first.iter().copied().filter(|x| !previous.contains(x)).collect());
            previous = first.clone();
        }
        parts.push(self.sigmas.last().map(|s| s.parts()[1].clone()).unwrap_or_default());
        OrderedPartition::new(parts)
    }
}

pub fn good_family(tau: &OrderedPartition) -> TwoPartitionFamily {
    let mut sigmas = Vec::new();
    for a in 1..tau.len() {
        let first: Vec<usize> = tau.parts[..a].iter().flatten().copied().collect();
        let second: Vec<usize> = tau.parts[a..].iter().flatten().copied().collect();
        sigmas.push(OrderedPartition::new(vec![first, second]).expect("split of a valid partition"));
    }
    TwoPartitionFamily { n: tau.n, sigmas }
}

/// Indicator vector of `set` with the last coordinate subtracted.
pub fn normalized_indicator(set: &[usize], n: usize) -> Vec<i64> {
    let mut v = vec![0i64; n];
    for &x in set {
        v[x - 1] = 1;
    }
    let last = v[n - 1];
    v.iter().map(|x| x - last).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cone {
    pub label: OrderedPartition,
    pub generators: Vec<Vec<i64>>,
}

impl Cone {
    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    /// Coefficients expressing `v` in the generators, if `v` lies in their
    /// span. Generators are independent, so the answer is unique.
    pub fn span_coefficients(&self, v: &[i64]) -> Option<Vec<Rational>> {
        let n = self.label.n();
        let k = self.generators.len();
        let target = normalize(v);
        if k == 0 {
            return target.iter().all(|x| *x == 0).then(Vec::new);
        }
        let m: Matrix<Rational> = (0..n).map(|i| (0..k).map(|j| int(self.generators[j][i])).collect()).collect();
        let rhs: Vec<Rational> = target.iter().map(|&x| int(x)).collect();
        match linalg::solve(&m, &rhs, 0.0) {
            Solution::Unique(c) => Some(c),
            _ => None,
        }
    }

    /// Non-negative coefficients certifying `v` lies in the cone.
    pub fn membership(&self, v: &[i64]) -> Option<Vec<Rational>> {
        self.span_coefficients(v).filter(|c| c.iter().all(|x| !x.is_negative()))
    }
}

/// Subtract the last coordinate from every coordinate.
pub fn normalize(v: &[i64]) -> Vec<i64> {
    let last = v.last().copied().unwrap_or(0);
    v.iter().map(|x| x - last).collect()
}

pub fn cone_of(tau: &OrderedPartition) -> Cone {
    let generators = good_family(tau).sigmas.iter().map(|s| normalized_indicator(&s.parts()[0], tau.n)).collect();
    Cone { label: tau.clone(), generators }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fan {
    pub n: usize,
    pub cones: Vec<Cone>,
}

impl Fan {
    pub fn cone_count(&self) -> usize {
        self.cones.len()
    }

    pub fn maximal_cones(&self) -> impl Iterator<Item = (usize, &Cone)> {
        self.cones.iter().enumerate().filter(|(_, c)| c.label.is_maximal())
    }

    pub fn maximal_count(&self) -> usize {
        self.maximal_cones().count()
    }

    pub fn index_of(&self, label: &OrderedPartition) -> Option<usize> {
        self.cones.iter().position(|c| &c.label == label)
    }
}

pub fn build_fan(n: usize) -> Result<Fan> {
    if !(1..=MAX_FAN_N).contains(&n) {
        return Err(PermutoError::OutOfRange { n, max: MAX_FAN_N });
    }
    let mut cones = Vec::new();
    for tau in enumerate_partitions(n)? {
        let cone = cone_of(&tau);
        let expected = tau.len() - 1;
        let m: Matrix<Rational> = cone.generators.iter().map(|g| g.iter().map(|&x| int(x)).collect()).collect();
        let rank = if m.is_empty() { 0 } else { linalg::rank(&m, 0.0) };
        if rank != expected {
            return Err(PermutoError::RankDefect { label: tau.to_string(), rank, expected });
        }
        cones.push(cone);
    }
    Ok(Fan { n, cones })
}

/// Level sets of `v` ordered by decreasing value.
pub fn level_set_partition(v: &[i64]) -> Result<OrderedPartition> {
    let mut values: Vec<i64> = v.to_vec();
    values.sort_unstable_by(|a, b| b.cmp(a));
    values.dedup();
    let parts = values.iter().map(|&val| (0..v.len()).filter(|&i| v[i] == val).map(|i| i + 1).collect()).collect();
    OrderedPartition::new(parts)
}

/// The cone containing a vector in its relative interior, with certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub partition: OrderedPartition,
    pub cone_index: usize,
    /// Strictly positive coefficients of the normalized vector in the
    /// cone's generators.
    #[serde(with = "rational_list")]
    pub coefficients: Vec<Rational>,
}

pub fn locate(v: &[i64], fan: &Fan) -> Result<Location> {
    if v.len() != fan.n {
        return Err(PermutoError::Dimension(format!("vector of length {} in a fan over {} elements", v.len(), fan.n)));
    }
    let partition = level_set_partition(v)?;
    let cone_index =
        fan.index_of(&partition).ok_or_else(|| PermutoError::InvalidPartition(format!("{partition} has no cone")))?;
    let coefficients = fan.cones[cone_index]
        .membership(v)
        .filter(|c| c.iter().all(Signed::is_positive))
        .ok_or_else(|| PermutoError::InvalidPartition(format!("{partition} fails its own certificate")))?;
    Ok(Location { partition, cone_index, coefficients })
}

/// Indices of maximal cones with a conic certificate for `v`.
pub fn containing_maximal_cones(v: &[i64], fan: &Fan) -> Vec<usize> {
    fan.maximal_cones().filter(|(_, c)| c.membership(v).is_some()).map(|(i, _)| i).collect()
}

mod rational_list {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::series::{format_rational, parse_rational, Rational};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(format_rational))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let raw: Vec<String> = Vec::deserialize(d)?;
        raw.iter()
            .map(|t| parse_rational(t).ok_or_else(|| serde::de::Error::custom(format!("bad rational {t}"))))
            .collect()
    }
}

enum Lp {
    Optimal(Rational),
    Infeasible,
    Unbounded,
}

/// Maximise `objective . x` subject to `a x = b`, `x >= 0`, exactly, by the
/// two-phase simplex method with Bland's rule.
fn lp_maximize(a: &Matrix<Rational>, b: &[Rational], objective: &[Rational]) -> Lp {
    let m = a.len();
    let nvars = objective.len();
    // Tableau columns: original variables, artificials, right-hand side.
    let width = nvars + m + 1;
    let mut t: Matrix<Rational> = Vec::with_capacity(m);
    for (i, row) in a.iter().enumerate() {
        let flip = b[i].is_negative();
        let mut r = vec![Rational::zero(); width];
        for j in 0..nvars {
            r[j] = if flip { -row[j].clone() } else { row[j].clone() };
        }
        r[nvars + i] = Rational::one();
        r[width - 1] = if flip { -b[i].clone() } else { b[i].clone() };
        t.push(r);
    }
    let mut basis: Vec<usize> = (nvars..nvars + m).collect();

    let mut phase1 = vec![Rational::zero(); width - 1];
    for c in phase1.iter_mut().skip(nvars) {
        *c = -Rational::one();
    }
    if !run_simplex(&mut t, &mut basis, &phase1, width - 1) {
        return Lp::Unbounded;
    }
    let infeasibility: Rational =
        basis.iter().zip(&t).filter(|(&j, _)| j >= nvars).map(|(_, row)| row[width - 1].clone()).sum();
    if !infeasibility.is_zero() {
        return Lp::Infeasible;
    }
    // Drive remaining artificials out of the basis; drop redundant rows.
    let mut i = 0;
    while i < t.len() {
        if basis[i] >= nvars {
            if let Some(j) = (0..nvars).find(|&j| !t[i][j].is_zero()) {
                pivot(&mut t, &mut basis, i, j);
            } else {
                t.remove(i);
                basis.remove(i);
                continue;
            }
        }
        i += 1;
    }
    let mut phase2 = objective.to_vec();
    phase2.resize(width - 1, Rational::zero());
    if !run_simplex(&mut t, &mut basis, &phase2, nvars) {
        return Lp::Unbounded;
    }
    let value = basis.iter().zip(&t).map(|(&j, row)| phase2[j].clone() * row[width - 1].clone()).sum();
    Lp::Optimal(value)
}

fn pivot(t: &mut Matrix<Rational>, basis: &mut [usize], row: usize, col: usize) {
    let p = t[row][col].clone();
    for x in t[row].iter_mut() {
        *x /= p.clone();
    }
    let pivot_row = t[row].clone();
    for (i, r) in t.iter_mut().enumerate() {
        if i == row || r[col].is_zero() {
            continue;
        }
        let factor = r[col].clone();
        for (x, y) in r.iter_mut().zip(&pivot_row) {
            *x -= factor.clone() * y;
        }
    }
    basis[row] = col;
}

/// Returns false when the objective is unbounded. Only the first `usable`
/// columns may enter the basis.
fn run_simplex(t: &mut Matrix<Rational>, basis: &mut [usize], cost: &[Rational], usable: usize) -> bool {
    let rhs = t.first().map_or(0, |r| r.len() - 1);
    loop {
        // Reduced cost c_j - c_B B^{-1} A_j; enter the first positive one.
        let entering = (0..usable).find(|&j| {
            if basis.contains(&j) {
                return false;
            }
            let mut reduced = cost[j].clone();
            for (row, &b) in t.iter().zip(basis.iter()) {
                reduced -= cost[b].clone() * row[j].clone();
            }
            reduced.is_positive()
        });
        let Some(col) = entering else { return true };
        let mut leave: Option<(usize, Rational)> = None;
        for (i, row) in t.iter().enumerate() {
            if !row[col].is_positive() {
                continue;
            }
            let ratio = row[rhs].clone() / row[col].clone();
            let better = match &leave {
                None => true,
                Some((k, r)) => ratio < *r || (ratio == *r && basis[i] < basis[*k]),
            };
            if better {
                leave = Some((i, ratio));
            }
        }
        let Some((row, _)) = leave else { return false };
        pivot(t, basis, row, col);
    }
}

/// Outcome of the pairwise intersection check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceCheckReport {
    pub pairs_checked: usize,
    /// Labels of the first pair whose intersection is not their common face.
    pub failure: Option<(OrderedPartition, OrderedPartition)>,
}

impl FaceCheckReport {
    pub fn passes(&self) -> bool {
        self.failure.is_none()
    }
}

/// For every pair of cones, maximise the weight on non-shared generators
/// over the normalised intersection; the optimum must be zero, so the
/// intersection is the face spanned by the shared generators.
pub fn verify_fan_faces(fan: &Fan) -> Result<FaceCheckReport> {
    if fan.n > MAX_FACE_CHECK_N {
        return Err(PermutoError::OutOfRange { n: fan.n, max: MAX_FACE_CHECK_N });
    }
    let rows = fan.n.saturating_sub(1);
    let mut pairs_checked = 0;
    for (i, ci) in fan.cones.iter().enumerate() {
        for cj in fan.cones.iter().skip(i + 1) {
            pairs_checked += 1;
            let (k, l) = (ci.dim(), cj.dim());
            let nvars = k + l + 1;
            let mut a: Matrix<Rational> = Vec::new();
            for r in 0..rows {
                let mut row = vec![Rational::zero(); nvars];
                for (s, g) in ci.generators.iter().enumerate() {
                    row[s] = int(g[r]);
                }
                for (s, g) in cj.generators.iter().enumerate() {
                    row[k + s] = int(-g[r]);
                }
                a.push(row);
            }
            a.push(vec![Rational::one(); nvars]);
            let mut b = vec![Rational::zero(); rows];
            b.push(Rational::one());
            let objective: Vec<Rational> = (0..nvars)
                .map(|s| {
                    let private = s < k && !cj.generators.contains(&ci.generators[s]);
                    if private {
                        Rational::one()
                    } else {
                        Rational::zero()
                    }
                })
                .collect();
            let ok = matches!(lp_maximize(&a, &b, &objective), Lp::Optimal(v) if v.is_zero());
            if !ok {
                return Ok(FaceCheckReport { pairs_checked, failure: Some((ci.label.clone(), cj.label.clone())) });
            }
        }
    }
    Ok(FaceCheckReport { pairs_checked, failure: None })
}

/// A finite rational combination of generators `mu(tau)` of one grade.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HClass {
    grade: usize,
    terms: BTreeMap<OrderedPartition, Rational>,
}

impl HClass {
    pub fn zero(grade: usize) -> Self {
        Self { grade, terms: BTreeMap::new() }
    }

    pub fn generator(tau: OrderedPartition) -> Self {
        let grade = tau.n();
        let mut terms = BTreeMap::new();
        terms.insert(tau, Rational::one());
        Self { grade, terms }
    }

    pub fn grade(&self) -> usize {
        self.grade
    }

    pub fn terms(&self) -> &BTreeMap<OrderedPartition, Rational> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, tau: &OrderedPartition) -> Rational {
        self.terms.get(tau).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn add(&self, other: &HClass) -> Result<HClass> {
        if self.grade != other.grade {
            return Err(PermutoError::Dimension(format!("grades {} and {}", self.grade, other.grade)));
        }
        let mut out = self.clone();
        for (tau, c) in &other.terms {
            out.accumulate(tau.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn scale(&self, factor: &Rational) -> HClass {
        let mut out = HClass::zero(self.grade);
        for (tau, c) in &self.terms {
            out.accumulate(tau.clone(), c * factor);
        }
        out
    }

    fn accumulate(&mut self, tau: OrderedPartition, c: Rational) {
        let slot = self.terms.entry(tau.clone()).or_insert_with(Rational::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&tau);
        }
    }
}

/// Bilinear concatenation product.
pub fn h_product(x: &HClass, y: &HClass) -> HClass {
    let mut out = HClass::zero(x.grade + y.grade);
    for (s, a) in &x.terms {
        for (t, b) in &y.terms {
            out.accumulate(s.concat(t), a * b);
        }
    }
    out
}

/// Top matrix correlators, keyed by sorted label tuples.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelatorFamily {
    parities: Vec<Parity>,
    entries: BTreeMap<Vec<usize>, Matrix<Rational>>,
}

impl CorrelatorFamily {
    /// Labels and basis vectors of `T` share the parities given.
    pub fn new(parities: Vec<Parity>) -> Self {
        Self { parities, entries: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.parities.len()
    }

    pub fn parities(&self) -> &[Parity] {
        &self.parities
    }

    fn label_parity(&self, labels: &[usize]) -> Parity {
        labels.iter().fold(Parity::Even, |p, &a| p.plus(self.parities[a]))
    }

    /// Sort labels, returning whether the Koszul sign of the sort is negative.
    fn canonical(&self, labels: &[usize]) -> (Vec<usize>, bool) {
        let mut v = labels.to_vec();
        let mut negative = false;
        for i in 1..v.len() {
            let mut j = i;
            while j > 0 && v[j - 1] > v[j] {
                if self.parities[v[j - 1]].koszul(self.parities[v[j]]) {
                    negative = !negative;
                }
                v.swap(j - 1, j);
                j -= 1;
            }
        }
        (v, negative)
    }

    pub fn insert(&mut self, labels: &[usize], matrix: Matrix<Rational>) -> Result<()> {
        let d = self.dim();
        if labels.is_empty() || labels.iter().any(|&a| a >= d) {
            return Err(PermutoError::Dimension(format!("labels {labels:?} for dimension {d}")));
        }
        if matrix.len() != d || matrix.iter().any(|r| r.len() != d) {
            return Err(PermutoError::Dimension(format!("correlator must be {d}x{d}")));
        }
        let parity = self.label_parity(labels);
        for (f, row) in matrix.iter().enumerate() {
            for (e, x) in row.iter().enumerate() {
                if !x.is_zero() && self.parities[f].plus(self.parities[e]) != parity {
                    return Err(PermutoError::ParityViolation { labels: labels.to_vec(), row: f, col: e });
                }
            }
        }
        let (key, negative) = self.canonical(labels);
        let repeats_odd = key.windows(2).any(|w| w[0] == w[1] && self.parities[w[0]].is_odd());
        if repeats_odd && matrix.iter().flatten().any(|x| !x.is_zero()) {
            return Err(PermutoError::SymmetryViolation(labels.to_vec()));
        }
        let matrix = if negative { matrix.iter().map(|r| r.iter().map(|x| -x).collect()).collect() } else { matrix };
        self.entries.insert(key, matrix);
        Ok(())
    }

    /// The correlator for labels in any order.
    pub fn get(&self, labels: &[usize]) -> Option<Matrix<Rational>> {
        let (key, negative) = self.canonical(labels);
        let m = self.entries.get(&key)?;
        Some(if negative { m.iter().map(|r| r.iter().map(|x| -x).collect()).collect() } else { m.clone() })
    }
}

/// Non-decreasing label tuples of length `len`, odd labels not repeated.
fn sorted_tuples(parities: &[Parity], len: usize) -> Vec<Vec<usize>> {
    fn extend(parities: &[Parity], len: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == len {
            out.push(current.clone());
            return;
        }
        for a in start..parities.len() {
            let next = if parities[a].is_odd() { a + 1 } else { a };
            current.push(a);
            extend(parities, len, next, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    extend(parities, len, 0, &mut Vec::new(), &mut out);
    out
}

/// `C = sum_n sum_{a_1..a_n} x^{a_n} ... x^{a_1} <Delta_{a_1} ... Delta_{a_n}> / n!`
/// truncated at total degree `order`. Permutations of a label tuple
/// contribute equally, so each multiset is weighted by `1 / alpha!`.
pub fn correlator_series(family: &CorrelatorFamily, order: u32) -> Result<Vec<Vec<TruncatedSeries>>> {
    let d = family.dim();
    let vars = VariableSpec::new(family.parities.clone())?;
    let mut c = vec![vec![TruncatedSeries::zero(vars.clone(), order); d]; d];
    for len in 1..=order as usize {
        for labels in sorted_tuples(&family.parities, len) {
            let matrix = family.get(&labels).ok_or_else(|| PermutoError::MissingEntry(labels.clone()))?;
            if matrix.iter().flatten().all(Zero::is_zero) {
                continue;
            }
            let mut monomial = TruncatedSeries::one(vars.clone(), order);
            for &a in labels.iter().rev() {
                monomial = monomial.mul(&TruncatedSeries::variable(vars.clone(), order, a)?)?;
            }
            let mut weight = Rational::one();
            let mut run = 1;
            for i in 1..=labels.len() {
                if i < labels.len() && labels[i] == labels[i - 1] {
                    run += 1;
                    weight /= int(run);
                } else {
                    run = 1;
                }
            }
            let monomial = monomial.scale(&weight);
            for f in 0..d {
                for e in 0..d {
                    if !matrix[f][e].is_zero() {
                        c[f][e] = c[f][e].add(&monomial.scale(&matrix[f][e]))?;
                    }
                }
            }
        }
    }
    Ok(c)
}

/// Residual of `dC ^ dC = 0`: for `a < b` (and `a = b` when `x^a` is odd),
/// `(d_a C)(d_b C) - (-1)^{p(a)p(b)} (d_b C)(d_a C)`, indices `(a, b, f, e)`.
pub fn flatness_check(c: &[Vec<TruncatedSeries>]) -> Result<ResidualReport> {
    let d = c.len();
    if d == 0 || c.iter().any(|r| r.len() != d) {
        return Err(PermutoError::Dimension("connection matrix must be square and nonempty".into()));
    }
    let vars = c[0][0].vars().clone();
    for (f, row) in c.iter().enumerate() {
        for (e, s) in row.iter().enumerate() {
            if !s.constant_term().is_zero() {
                return Err(PermutoError::NonzeroConstantTerm(f, e));
            }
        }
    }
    let m = vars.count();
    let partials: Vec<Vec<Vec<TruncatedSeries>>> = (0..m)
        .map(|a| c.iter().map(|r| r.iter().map(|s| s.partial(a)).collect::<std::result::Result<Vec<_>, _>>()).collect())
        .collect::<std::result::Result<_, _>>()?;
    let order = partials.iter().flatten().flatten().map(TruncatedSeries::order).min().unwrap_or(0);
    let mut collector = ResidualCollector::new();
    for a in 0..m {
        for b in a..m {
            let odd_a = vars.parity(a).is_odd();
            if a == b && !odd_a {
                continue;
            }
            let sign_negative = vars.parity(a).koszul(vars.parity(b));
            for f in 0..d {
                for e in 0..d {
                    let mut residual = TruncatedSeries::zero(vars.clone(), order);
                    for k in 0..d {
                        let ab = partials[a][f][k].mul(&partials[b][k][e])?;
                        let ba = partials[b][f][k].mul(&partials[a][k][e])?;
                        residual = residual.add(&ab)?;
                        residual = if sign_negative { residual.add(&ba)? } else { residual.sub(&ba)? };
                    }
                    collector.push(&[a, b, f, e], &residual);
                }
            }
        }
    }
    Ok(collector.finish(order))
}
