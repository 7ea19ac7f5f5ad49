//! Jet-level carriers for potentials, structure tensors and the identities
//! they must satisfy.
//!
//! Everything lives in flat coordinates `x^0, ..., x^{d-1}`: a vector field
//! jet is a list of component series, a structure tensor holds the series
//! `C_ab^c`, and every check returns a [`ResidualReport`] saying through which
//! total degree the identity was verified and where it first fails.
//!
//! Index parities follow the parities of the coordinates. Index tuples in
//! reports are in the order the identity is written in the method docs.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::PointAlgebra;
use crate::linalg;
use crate::residual::{ResidualCollector, ResidualReport};
use crate::series::{
    format_rational, parse_rational, Parity, Rational, SeriesDoc, SeriesError, TruncatedSeries, VariableSpec,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("vector field component {component} has the wrong parity")]
    Parity { component: usize },
    #[error("metric is not symmetric and invertible")]
    BadMetric,
    #[error("Euler field is not affine")]
    NotAffine,
    #[error("Higgs field is not integrable: {0}")]
    NotIntegrable(String),
    #[error("Higgs potential has not been computed")]
    MissingPotential,
    #[error("section must be nonzero")]
    ZeroSection,
    #[error("invalid document: {0}")]
    InvalidDocument(String),
}

type Result<T> = std::result::Result<T, PotentialError>;

fn odd(vars: &VariableSpec, index: usize) -> bool {
    vars.parity(index).is_odd()
}

fn sign_if(negative: bool, s: TruncatedSeries) -> TruncatedSeries {
    if negative {
        s.neg()
    } else {
        s
    }
}

fn sum_series(vars: &VariableSpec, order: u32, parts: impl IntoIterator<Item = TruncatedSeries>) -> TruncatedSeries {
    parts.into_iter().fold(TruncatedSeries::zero(vars.clone(), order), |acc, s| acc.add(&s).expect("shared variables"))
}

fn min_order<'a>(series: impl IntoIterator<Item = &'a TruncatedSeries>, default: u32) -> u32 {
    series.into_iter().map(TruncatedSeries::order).min().unwrap_or(default)
}

/// A vector field `Σ X^a ∂_a` with homogeneous parity.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorFieldJet {
    components: Vec<TruncatedSeries>,
    parity: Parity,
}

impl VectorFieldJet {
    pub fn new(components: Vec<TruncatedSeries>, parity: Parity) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(PotentialError::Dimension("vector field needs components".into()));
        };
        let vars = first.vars().clone();
        if vars.count() != components.len() {
            return Err(PotentialError::Dimension(format!(
                "{} components for {} coordinates",
                components.len(),
                vars.count()
            )));
        }
        for (c, comp) in components.iter().enumerate() {
            if comp.vars() != &vars {
                return Err(SeriesError::VarsMismatch.into());
            }
            if comp.is_zero() {
                continue;
            }
            if comp.parity() != Some(parity.plus(vars.parity(c))) {
                return Err(PotentialError::Parity { component: c });
            }
        }
        Ok(Self { components, parity })
    }

    /// The coordinate field `∂_a`.
    pub fn coordinate(vars: &VariableSpec, order: u32, a: usize) -> Self {
        let components = (0..vars.count())
            .map(|c| {
                if c == a {
                    TruncatedSeries::one(vars.clone(), order)
                } else {
                    TruncatedSeries::zero(vars.clone(), order)
                }
            })
            .collect();
        Self { components, parity: vars.parity(a) }
    }

    pub fn zero(vars: &VariableSpec, order: u32, parity: Parity) -> Self {
        let components = (0..vars.count()).map(|_| TruncatedSeries::zero(vars.clone(), order)).collect();
        Self { components, parity }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn vars(&self) -> &VariableSpec {
        self.components[0].vars()
    }

    pub fn components(&self) -> &[TruncatedSeries] {
        &self.components
    }

    pub fn component(&self, c: usize) -> &TruncatedSeries {
        &self.components[c]
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn order(&self) -> u32 {
        min_order(&self.components, 0)
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(TruncatedSeries::is_zero)
    }

    /// True when every component is a polynomial of degree at most one.
    pub fn is_affine(&self) -> bool {
        self.components.iter().all(|c| c.max_degree().is_none_or(|d| d <= 1))
    }

    fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(&TruncatedSeries, &TruncatedSeries) -> TruncatedSeries,
    ) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(PotentialError::Dimension("vector fields differ in dimension".into()));
        }
        if self.vars() != other.vars() {
            return Err(SeriesError::VarsMismatch.into());
        }
        let components = self.components.iter().zip(&other.components).map(|(a, b)| f(a, b)).collect();
        Ok(Self { components, parity: self.parity })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.add(b).expect("checked vars"))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.sub(b).expect("checked vars"))
    }

    pub fn scale(&self, factor: &Rational) -> Self {
        Self { components: self.components.iter().map(|c| c.scale(factor)).collect(), parity: self.parity }
    }

    pub fn truncate(&self, order: u32) -> Self {
        Self { components: self.components.iter().map(|c| c.truncate(order)).collect(), parity: self.parity }
    }

    /// Componentwise `∂_a`.
    pub fn partial(&self, a: usize) -> Result<Self> {
        let components = self.components.iter().map(|c| c.partial(a)).collect::<std::result::Result<_, _>>()?;
        Ok(Self { components, parity: self.parity.plus(self.vars().parity(a)) })
    }

    /// Derivative of a function along the field: `Σ_a X^a ∂_a f`.
    pub fn apply(&self, f: &TruncatedSeries) -> Result<TruncatedSeries> {
        let vars = self.vars().clone();
        let mut order = self.order().min(f.order().saturating_sub(1));
        let mut total: Option<TruncatedSeries> = None;
        for (a, xa) in self.components.iter().enumerate() {
            let df = f.partial(a)?;
            order = order.min(xa.order().min(df.order()));
            if xa.is_zero() || df.is_zero() {
                continue;
            }
            let term = xa.mul(&df)?;
            total = Some(match total {
                None => term,
                Some(t) => t.add(&term)?,
            });
        }
        Ok(total.map_or_else(|| TruncatedSeries::zero(vars, order), |t| t.truncate(order)))
    }

    /// Supercommutator `[X, Y]`.
    pub fn bracket(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(PotentialError::Dimension("vector fields differ in dimension".into()));
        }
        let negative = self.parity.koszul(other.parity);
        let components = (0..self.dim())
            .map(|c| {
                let xy = self.apply(&other.components[c])?;
                let yx = other.apply(&self.components[c])?;
                Ok(xy.sub(&sign_if(negative, yx))?)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { components, parity: self.parity.plus(other.parity) })
    }
}

/// Structure constants `C_ab^c` as series in flat coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureTensor {
    vars: VariableSpec,
    entries: Vec<Vec<Vec<TruncatedSeries>>>,
}

impl StructureTensor {
    pub fn new(entries: Vec<Vec<Vec<TruncatedSeries>>>) -> Result<Self> {
        let d = entries.len();
        let vars = entries
            .first()
            .and_then(|p| p.first())
            .and_then(|r| r.first())
            .map(|s| s.vars().clone())
            .ok_or_else(|| PotentialError::Dimension("empty tensor".into()))?;
        if vars.count() != d {
            return Err(PotentialError::Dimension(format!("tensor of size {d} over {} coordinates", vars.count())));
        }
        for plane in &entries {
            if plane.len() != d || plane.iter().any(|r| r.len() != d) {
                return Err(PotentialError::Dimension(format!("tensor is not {d}x{d}x{d}")));
            }
            if plane.iter().flatten().any(|s| s.vars() != &vars) {
                return Err(SeriesError::VarsMismatch.into());
            }
        }
        Ok(Self { vars, entries })
    }

    /// Constant tensor of a point algebra.
    pub fn constant(algebra: &PointAlgebra<Rational>, vars: VariableSpec, order: u32) -> Result<Self> {
        let entries = algebra
            .structure()
            .iter()
            .map(|p| {
                p.iter()
                    .map(|r| r.iter().map(|v| TruncatedSeries::constant(vars.clone(), order, v.clone())).collect())
                    .collect()
            })
            .collect();
        Self::new(entries)
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn vars(&self) -> &VariableSpec {
        &self.vars
    }

    pub fn entry(&self, a: usize, b: usize, c: usize) -> &TruncatedSeries {
        &self.entries[a][b][c]
    }

    pub fn entries(&self) -> &[Vec<Vec<TruncatedSeries>>] {
        &self.entries
    }

    pub fn order(&self) -> u32 {
        min_order(self.entries.iter().flatten().flatten(), 0)
    }

    pub fn truncate(&self, order: u32) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|p| p.iter().map(|r| r.iter().map(|s| s.truncate(order)).collect()).collect())
            .collect();
        Self { vars: self.vars.clone(), entries }
    }

    /// `C_ab^c = (-1)^{ab} C_ba^c`.
    pub fn is_supersymmetric(&self) -> bool {
        let d = self.dim();
        (0..d).all(|a| {
            (0..d).all(|b| {
                let negative = odd(&self.vars, a) && odd(&self.vars, b);
                (0..d).all(|c| self.entries[a][b][c] == sign_if(negative, self.entries[b][a][c].clone()))
            })
        })
    }

    /// `C_{eb}^c = δ_b^c` for the given index `e`.
    pub fn has_flat_identity(&self, e: usize) -> bool {
        let d = self.dim();
        (0..d).all(|b| {
            (0..d).all(|c| {
                let s = &self.entries[e][b][c];
                if b == c {
                    s.len() == 1 && s.constant_term().is_one()
                } else {
                    s.is_zero()
                }
            })
        })
    }

    /// The algebra of constant terms.
    pub fn at_origin(&self) -> PointAlgebra<Rational> {
        let structure = self
            .entries
            .iter()
            .map(|p| p.iter().map(|r| r.iter().map(TruncatedSeries::constant_term).collect()).collect())
            .collect();
        PointAlgebra::new(structure).expect("tensor is cubical")
    }

    /// The field `∂_a ∘ ∂_b`.
    pub fn basis_product(&self, a: usize, b: usize) -> VectorFieldJet {
        VectorFieldJet { components: self.entries[a][b].clone(), parity: self.vars.parity(a).plus(self.vars.parity(b)) }
    }

    /// `X ∘ Y`.
    pub fn product(&self, x: &VectorFieldJet, y: &VectorFieldJet) -> Result<VectorFieldJet> {
        let d = self.dim();
        if x.dim() != d || y.dim() != d {
            return Err(PotentialError::Dimension("field and tensor differ in dimension".into()));
        }
        let order = x.order().min(y.order()).min(self.order());
        let mut components: Vec<TruncatedSeries> =
            (0..d).map(|_| TruncatedSeries::zero(self.vars.clone(), order)).collect();
        for a in 0..d {
            let xa = &x.components[a];
            if xa.is_zero() {
                continue;
            }
            for b in 0..d {
                let yb = &y.components[b];
                if yb.is_zero() || self.entries[a][b].iter().all(TruncatedSeries::is_zero) {
                    continue;
                }
                let negative = odd(&self.vars, a) && y.parity.plus(self.vars.parity(b)).is_odd();
                let coeff = sign_if(negative, xa.mul(yb)?);
                if coeff.is_zero() {
                    continue;
                }
                for (c, slot) in components.iter_mut().enumerate() {
                    let entry = &self.entries[a][b][c];
                    if !entry.is_zero() {
                        *slot = slot.add(&coeff.mul(entry)?)?;
                    }
                }
            }
        }
        Ok(VectorFieldJet { components, parity: x.parity.plus(y.parity) })
    }

    /// `P_X(Y, Z) = [X, Y∘Z] − [X, Y]∘Z − (−1)^{XY} Y∘[X, Z]`.
    pub fn poisson_tensor(&self, x: &VectorFieldJet, y: &VectorFieldJet, z: &VectorFieldJet) -> Result<VectorFieldJet> {
        let yz = self.product(y, z)?;
        let first = x.bracket(&yz)?;
        let second = self.product(&x.bracket(y)?, z)?;
        let third = self.product(y, &x.bracket(z)?)?;
        let third = if x.parity.koszul(y.parity) { third.scale(&-Rational::one()) } else { third };
        first.sub(&second)?.sub(&third)
    }

    /// `P_{X∘Y}(Z,U) − X∘P_Y(Z,U) − (−1)^{XY} Y∘P_X(Z,U)` on coordinate
    /// fields; indices reported as `(x, y, z, u)`.
    pub fn structure_identity_residual(&self) -> Result<ResidualReport> {
        let d = self.dim();
        let order = self.order();
        let basis: Vec<VectorFieldJet> = (0..d).map(|a| VectorFieldJet::coordinate(&self.vars, order, a)).collect();
        // P_{∂_y}(∂_z, ∂_u) for z <= u.
        let mut p_basis = vec![vec![vec![None; d]; d]; d];
        for y in 0..d {
            for z in 0..d {
                for u in z..d {
                    p_basis[y][z][u] = Some(self.poisson_tensor(&basis[y], &basis[z], &basis[u])?);
                }
            }
        }
        let mut collector = ResidualCollector::new();
        for x in 0..d {
            for y in x..d {
                let xy = self.basis_product(x, y);
                let sign_xy = odd(&self.vars, x) && odd(&self.vars, y);
                for z in 0..d {
                    for u in z..d {
                        let lhs = self.poisson_tensor(&xy, &basis[z], &basis[u])?;
                        let py = p_basis[y][z][u].as_ref().expect("filled above");
                        let px = p_basis[x][z][u].as_ref().expect("filled above");
                        let t1 = self.product(&basis[x], py)?;
                        let t2 = self.product(&basis[y], px)?;
                        let t2 = if sign_xy { t2.scale(&-Rational::one()) } else { t2 };
                        let residual = lhs.sub(&t1)?.sub(&t2)?;
                        for comp in residual.components() {
                            collector.push(&[x, y, z, u], comp);
                        }
                    }
                }
            }
        }
        Ok(collector.finish(order))
    }

    /// The Higgs field matrices `(A_a)^c_b = C_ab^c`, rows indexed by `c`.
    pub fn higgs_matrix(&self, a: usize) -> Vec<Vec<TruncatedSeries>> {
        let d = self.dim();
        (0..d).map(|c| (0..d).map(|b| self.entries[a][b][c].clone()).collect()).collect()
    }

    pub fn to_doc(&self) -> TensorDoc {
        let mut entries = Vec::new();
        for (a, plane) in self.entries.iter().enumerate() {
            for (b, row) in plane.iter().enumerate() {
                for (c, s) in row.iter().enumerate() {
                    if !s.is_zero() {
                        entries.push(TensorEntryDoc { a, b, c, series: s.to_doc() });
                    }
                }
            }
        }
        TensorDoc {
            dim: self.dim(),
            parities: Some(self.vars.parities().iter().map(|p| p.bit()).collect()),
            order: Some(self.order()),
            entries,
        }
    }

    pub fn from_doc(doc: &TensorDoc) -> Result<Self> {
        let d = doc.dim;
        if d == 0 {
            return Err(PotentialError::InvalidDocument("dimension must be positive".into()));
        }
        let parities = match &doc.parities {
            Some(p) => p
                .iter()
                .map(|&b| Parity::from_bit(b).ok_or_else(|| PotentialError::InvalidDocument(format!("bad parity {b}"))))
                .collect::<Result<Vec<_>>>()?,
            None => match doc.entries.first() {
                Some(e) => e.series.parities.iter().map(|&b| Parity::from_bit(b).unwrap_or(Parity::Even)).collect(),
                None => vec![Parity::Even; d],
            },
        };
        let vars = VariableSpec::new(parities)?;
        let order = doc.order.or_else(|| doc.entries.iter().map(|e| e.series.order).min()).unwrap_or(0);
        let mut entries = vec![vec![vec![TruncatedSeries::zero(vars.clone(), order); d]; d]; d];
        for e in &doc.entries {
            if e.a >= d || e.b >= d || e.c >= d {
                return Err(PotentialError::InvalidDocument(format!("index ({}, {}, {}) out of range", e.a, e.b, e.c)));
            }
            let s = TruncatedSeries::from_doc(&e.series)?;
            if s.vars() != &vars {
                return Err(SeriesError::VarsMismatch.into());
            }
            entries[e.a][e.b][e.c] = s.truncate(order);
        }
        Self::new(entries)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntryDoc {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub series: SeriesDoc,
}

/// Tensor document; entries not listed are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorDoc {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parities: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    pub entries: Vec<TensorEntryDoc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VectorPotentialDoc {
    pub components: Vec<SeriesDoc>,
}

/// A vector potential `C = Σ C^c ∂_c` with `∂_a∘∂_b = [∂_a, [∂_b, C]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorPotential {
    components: Vec<TruncatedSeries>,
}

impl VectorPotential {
    pub fn new(components: Vec<TruncatedSeries>) -> Result<Self> {
        let first = components.first().ok_or_else(|| PotentialError::Dimension("no components".into()))?;
        if first.vars().count() != components.len() {
            return Err(PotentialError::Dimension(format!(
                "{} components for {} coordinates",
                components.len(),
                first.vars().count()
            )));
        }
        if components.iter().any(|c| c.vars() != first.vars()) {
            return Err(SeriesError::VarsMismatch.into());
        }
        Ok(Self { components })
    }

    /// `C^c = ½ Σ_{a,b} c_ab^c x^a x^b` for a constant algebra (even
    /// coordinates).
    pub fn cubic_from_algebra(algebra: &PointAlgebra<Rational>, order: u32) -> Result<Self> {
        let d = algebra.dim();
        let vars = VariableSpec::even(d);
        let half = Rational::new(1.into(), 2.into());
        let mut components = Vec::with_capacity(d);
        for c in 0..d {
            let mut s = TruncatedSeries::zero(vars.clone(), order);
            for a in 0..d {
                for b in 0..d {
                    let v = &algebra.structure()[a][b][c];
                    if v.is_zero() {
                        continue;
                    }
                    let mut exp = vec![0u32; d];
                    exp[a] += 1;
                    exp[b] += 1;
                    s.add_term(exp, v * &half)?;
                }
            }
            components.push(s);
        }
        Self::new(components)
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn vars(&self) -> &VariableSpec {
        self.components[0].vars()
    }

    pub fn components(&self) -> &[TruncatedSeries] {
        &self.components
    }

    pub fn order(&self) -> u32 {
        min_order(&self.components, 0)
    }

    pub fn to_doc(&self) -> VectorPotentialDoc {
        VectorPotentialDoc { components: self.components.iter().map(TruncatedSeries::to_doc).collect() }
    }

    pub fn from_doc(doc: &VectorPotentialDoc) -> Result<Self> {
        let components =
            doc.components.iter().map(TruncatedSeries::from_doc).collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(components)
    }

    pub fn as_field(&self) -> Result<VectorFieldJet> {
        let vars = self.vars();
        // The potential is even when every component has the parity of its index.
        VectorFieldJet::new(self.components.clone(), Parity::Even).or_else(|_| {
            if vars.all_even() {
                Err(PotentialError::Parity { component: 0 })
            } else {
                VectorFieldJet::new(self.components.clone(), Parity::Odd)
            }
        })
    }

    /// `C_ab^c = ∂_a ∂_b C^c`.
    pub fn structure_tensor(&self) -> Result<StructureTensor> {
        let d = self.dim();
        let first: Vec<Vec<TruncatedSeries>> = (0..d)
            .map(|b| self.components.iter().map(|c| c.partial(b)).collect::<std::result::Result<_, _>>())
            .collect::<std::result::Result<_, _>>()?;
        let entries = (0..d)
            .map(|a| {
                (0..d)
                    .map(|b| first[b].iter().map(|s| s.partial(a)).collect::<std::result::Result<Vec<_>, _>>())
                    .collect::<std::result::Result<Vec<_>, _>>()
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        StructureTensor::new(entries)
    }

    /// `[∂_a, [∂_b, C]]` computed with the bracket of vector fields.
    pub fn double_bracket(&self, a: usize, b: usize) -> Result<VectorFieldJet> {
        let field = self.as_field()?;
        let order = self.order();
        let xa = VectorFieldJet::coordinate(self.vars(), order, a);
        let xb = VectorFieldJet::coordinate(self.vars(), order, b);
        xa.bracket(&xb.bracket(&field)?)
    }

    /// `Σ_e C_ab^e C_ec^f − (−1)^{a(b+c)} Σ_e C_bc^e C_ea^f`, indices
    /// `(a, b, c, f)`.
    pub fn oriented_associativity_residual(&self) -> Result<ResidualReport> {
        let t = self.structure_tensor()?;
        oriented_associativity_of_tensor(&t)
    }

    /// The matrix `M^f_e = ∂_e C^f` without its constant term, rows indexed
    /// by `f`; its partials are the Higgs matrices of the tensor.
    pub fn connection_matrix(&self) -> Result<Vec<Vec<TruncatedSeries>>> {
        let d = self.dim();
        let mut m = Vec::with_capacity(d);
        for f in 0..d {
            let mut row = Vec::with_capacity(d);
            for e in 0..d {
                let s = self.components[f].partial(e)?;
                let constant = TruncatedSeries::constant(s.vars().clone(), s.order(), s.constant_term());
                row.push(s.sub(&constant)?);
            }
            m.push(row);
        }
        Ok(m)
    }
}

/// Oriented associativity of an arbitrary tensor.
pub fn oriented_associativity_of_tensor(t: &StructureTensor) -> Result<ResidualReport> {
    let d = t.dim();
    let vars = t.vars().clone();
    let order = t.order();
    let mut collector = ResidualCollector::new();
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                let negative = odd(&vars, a) && (odd(&vars, b) ^ odd(&vars, c));
                for f in 0..d {
                    let mut lhs = Vec::new();
                    let mut rhs = Vec::new();
                    for e in 0..d {
                        let (x, y) = (t.entry(a, b, e), t.entry(e, c, f));
                        if !x.is_zero() && !y.is_zero() {
                            lhs.push(x.mul(y)?);
                        }
                        let (x, y) = (t.entry(b, c, e), t.entry(e, a, f));
                        if !x.is_zero() && !y.is_zero() {
                            rhs.push(x.mul(y)?);
                        }
                    }
                    let residual =
                        sum_series(&vars, order, lhs).sub(&sign_if(negative, sum_series(&vars, order, rhs)))?;
                    collector.push(&[a, b, c, f], &residual);
                }
            }
        }
    }
    Ok(collector.finish(order))
}

/// Constant symmetric invertible pairing with its inverse.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatMetric {
    g: Vec<Vec<Rational>>,
    g_inv: Vec<Vec<Rational>>,
}

impl FlatMetric {
    pub fn new(g: Vec<Vec<Rational>>) -> Result<Self> {
        let d = g.len();
        if d == 0 || g.iter().any(|r| r.len() != d) {
            return Err(PotentialError::BadMetric);
        }
        if (0..d).any(|i| (0..d).any(|j| g[i][j] != g[j][i])) {
            return Err(PotentialError::BadMetric);
        }
        let g_inv = linalg::inverse(&g, 0.0).ok_or(PotentialError::BadMetric)?;
        Ok(Self { g, g_inv })
    }

    /// `g_ab = δ_{a+b, d-1}`.
    pub fn antidiagonal(d: usize) -> Self {
        let g: Vec<Vec<Rational>> = (0..d)
            .map(|a| (0..d).map(|b| if a + b + 1 == d { Rational::one() } else { Rational::zero() }).collect())
            .collect();
        Self { g_inv: g.clone(), g }
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn g(&self) -> &[Vec<Rational>] {
        &self.g
    }

    pub fn g_inv(&self) -> &[Vec<Rational>] {
        &self.g_inv
    }

    pub fn to_doc(&self) -> MetricDoc {
        MetricDoc { dim: self.dim(), g: self.g.iter().map(|r| r.iter().map(format_rational).collect()).collect() }
    }

    pub fn from_doc(doc: &MetricDoc) -> Result<Self> {
        if doc.g.len() != doc.dim {
            return Err(PotentialError::InvalidDocument("metric row count differs from dim".into()));
        }
        let g = doc
            .g
            .iter()
            .map(|r| {
                if r.len() != doc.dim {
                    return Err(PotentialError::InvalidDocument("metric row has wrong length".into()));
                }
                r.iter()
                    .map(|s| {
                        parse_rational(s).ok_or_else(|| PotentialError::InvalidDocument(format!("bad rational {s:?}")))
                    })
                    .collect()
            })
            .collect::<Result<Vec<Vec<Rational>>>>()?;
        Self::new(g)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricDoc {
    pub dim: usize,
    pub g: Vec<Vec<String>>,
}

/// Third partials `Φ_abc` in application order `∂_a ∂_b ∂_c Φ`.
fn third_partials(phi: &TruncatedSeries) -> Result<Vec<Vec<Vec<TruncatedSeries>>>> {
    let d = phi.vars().count();
    let first: Vec<TruncatedSeries> = (0..d).map(|c| phi.partial(c)).collect::<std::result::Result<_, _>>()?;
    let second: Vec<Vec<TruncatedSeries>> = (0..d)
        .map(|b| first.iter().map(|s| s.partial(b)).collect::<std::result::Result<_, _>>())
        .collect::<std::result::Result<_, _>>()?;
    let third = (0..d)
        .map(|a| {
            (0..d)
                .map(|b| second[b].iter().map(|s| s.partial(a)).collect::<std::result::Result<Vec<_>, _>>())
                .collect::<std::result::Result<Vec<_>, _>>()
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(third)
}

/// A scalar potential `Φ` with its flat metric.
#[derive(Clone, Debug, PartialEq)]
pub struct WdvvPotential {
    phi: TruncatedSeries,
    metric: FlatMetric,
}

impl WdvvPotential {
    pub fn new(phi: TruncatedSeries, metric: FlatMetric) -> Result<Self> {
        if phi.vars().count() != metric.dim() {
            return Err(PotentialError::Dimension(format!(
                "potential in {} variables, metric of size {}",
                phi.vars().count(),
                metric.dim()
            )));
        }
        Ok(Self { phi, metric })
    }

    pub fn phi(&self) -> &TruncatedSeries {
        &self.phi
    }

    pub fn metric(&self) -> &FlatMetric {
        &self.metric
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// `Σ_{ef} Φ_abe g^{ef} Φ_fcd − (−1)^{a(b+c)} Σ_{ef} Φ_bce g^{ef} Φ_fad`,
    /// indices `(a, b, c, d)`.
    pub fn wdvv_residual(&self) -> Result<ResidualReport> {
        let n = self.dim();
        let vars = self.phi.vars().clone();
        let third = third_partials(&self.phi)?;
        let order = self.phi.order().saturating_sub(3);
        // raised[a][b][f] = Σ_e Φ_abe g^{ef}
        let g_inv = self.metric.g_inv();
        let raised: Vec<Vec<Vec<TruncatedSeries>>> = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        (0..n)
                            .map(|f| {
                                sum_series(
                                    &vars,
                                    order,
                                    (0..n)
                                        .filter(|&e| !g_inv[e][f].is_zero())
                                        .map(|e| third[a][b][e].scale(&g_inv[e][f])),
                                )
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let mut collector = ResidualCollector::new();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let negative = odd(&vars, a) && (odd(&vars, b) ^ odd(&vars, c));
                    for dd in 0..n {
                        let mut lhs = Vec::new();
                        let mut rhs = Vec::new();
                        for f in 0..n {
                            let (x, y) = (&raised[a][b][f], &third[f][c][dd]);
                            if !x.is_zero() && !y.is_zero() {
                                lhs.push(x.mul(y)?);
                            }
                            let (x, y) = (&raised[b][c][f], &third[f][a][dd]);
                            if !x.is_zero() && !y.is_zero() {
                                rhs.push(x.mul(y)?);
                            }
                        }
                        let residual =
                            sum_series(&vars, order, lhs).sub(&sign_if(negative, sum_series(&vars, order, rhs)))?;
                        collector.push(&[a, b, c, dd], &residual);
                    }
                }
            }
        }
        Ok(collector.finish(order))
    }

    /// `Φ_{eab} − g_ab` for the flat identity index `e`.
    pub fn flat_identity_residual(&self, e_index: usize) -> Result<ResidualReport> {
        let n = self.dim();
        if e_index >= n {
            return Err(PotentialError::Dimension(format!("identity index {e_index} out of range")));
        }
        let vars = self.phi.vars().clone();
        let pe = self.phi.partial(e_index)?;
        let order = self.phi.order().saturating_sub(3);
        let mut collector = ResidualCollector::new();
        for a in 0..n {
            let pa = pe.partial(a)?;
            for b in 0..n {
                let pab = pa.partial(b)?;
                let g = TruncatedSeries::constant(vars.clone(), pab.order(), self.metric.g()[a][b].clone());
                collector.push(&[a, b], &pab.sub(&g)?);
            }
        }
        Ok(collector.finish(order))
    }

    /// `EΦ − (d0 + D)Φ` with terms of total degree at most two discarded.
    pub fn euler_residual(&self, euler: &EulerData) -> Result<ResidualReport> {
        if euler.field.dim() != self.dim() {
            return Err(PotentialError::Dimension("Euler field and potential differ in dimension".into()));
        }
        if !euler.field.is_affine() {
            return Err(PotentialError::NotAffine);
        }
        let weight = &euler.d0 + &euler.metric_weight;
        let e_phi = euler.field.apply(&self.phi)?;
        let residual = e_phi.sub(&self.phi.scale(&weight))?.drop_through_degree(2);
        let mut collector = ResidualCollector::new();
        collector.push(&[], &residual);
        Ok(collector.finish(residual.order()))
    }

    /// `C^a = Σ_b ∂_b Φ g^{ba}`.
    pub fn vector_potential(&self) -> Result<VectorPotential> {
        let n = self.dim();
        let vars = self.phi.vars().clone();
        let grads: Vec<TruncatedSeries> = (0..n).map(|b| self.phi.partial(b)).collect::<std::result::Result<_, _>>()?;
        let order = grads[0].order();
        let g_inv = self.metric.g_inv();
        let components = (0..n)
            .map(|a| {
                sum_series(
                    &vars,
                    order,
                    (0..n).filter(|&b| !g_inv[b][a].is_zero()).map(|b| grads[b].scale(&g_inv[b][a])),
                )
            })
            .collect();
        VectorPotential::new(components)
    }
}

/// An Euler field with weight `d0` and metric weight `D`.
#[derive(Clone, Debug, PartialEq)]
pub struct EulerData {
    pub field: VectorFieldJet,
    pub d0: Rational,
    pub metric_weight: Rational,
}

impl EulerData {
    pub fn new(field: VectorFieldJet, d0: Rational, metric_weight: Rational) -> Result<Self> {
        if field.parity() != Parity::Even {
            return Err(PotentialError::Parity { component: 0 });
        }
        Ok(Self { field, d0, metric_weight })
    }

    pub fn to_doc(&self) -> EulerDoc {
        EulerDoc {
            components: self.field.components().iter().map(TruncatedSeries::to_doc).collect(),
            d0: format_rational(&self.d0),
            metric_weight: format_rational(&self.metric_weight),
        }
    }

    pub fn from_doc(doc: &EulerDoc) -> Result<Self> {
        let components =
            doc.components.iter().map(TruncatedSeries::from_doc).collect::<std::result::Result<Vec<_>, _>>()?;
        let parse =
            |s: &str| parse_rational(s).ok_or_else(|| PotentialError::InvalidDocument(format!("bad rational {s:?}")));
        Self::new(VectorFieldJet::new(components, Parity::Even)?, parse(&doc.d0)?, parse(&doc.metric_weight)?)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EulerDoc {
    pub components: Vec<SeriesDoc>,
    pub d0: String,
    #[serde(rename = "D")]
    pub metric_weight: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerConditionsReport {
    /// `P_E(∂_a, ∂_b) − d0 ∂_a∘∂_b`, indices `(a, b)`.
    pub poisson: ResidualReport,
    /// `[E, ∂_a]` has constant coefficients for every `a`.
    pub preserves_flat_fields: bool,
    /// Flat-field preservation is automatic for affine fields.
    pub affine: bool,
}

impl EulerConditionsReport {
    pub fn passes(&self) -> bool {
        self.poisson.is_zero() && self.preserves_flat_fields
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerExtensionReport {
    pub weight_one: bool,
    /// Curvature coefficient of `λ`: `(∂_a∘∂_b)∘E − ∂_a∘(∂_b∘E)`.
    pub associativity: ResidualReport,
    /// Curvature coefficient of `λ^0`.
    pub poisson: ResidualReport,
    /// Curvature coefficient of `λ^{-1}`: `∂_a∂_b E`.
    pub flat_fields: ResidualReport,
    /// The `λ^0` coefficient equals `P_E(∂_a,∂_b) − ∂_a∘∂_b` term by term.
    pub matches_poisson_form: bool,
}

impl EulerExtensionReport {
    pub fn passes(&self) -> bool {
        self.weight_one && self.associativity.is_zero() && self.poisson.is_zero() && self.flat_fields.is_zero()
    }
}

impl StructureTensor {
    /// Check `P_E = d0 ∘` on coordinate fields and flat-field preservation.
    pub fn euler_field_conditions(&self, euler: &EulerData) -> Result<EulerConditionsReport> {
        let d = self.dim();
        let order = self.order();
        let e = &euler.field;
        let basis: Vec<VectorFieldJet> = (0..d).map(|a| VectorFieldJet::coordinate(&self.vars, order, a)).collect();
        let mut collector = ResidualCollector::new();
        for a in 0..d {
            for b in a..d {
                let p = self.poisson_tensor(e, &basis[a], &basis[b])?;
                let expected = self.basis_product(a, b).scale(&euler.d0);
                let residual = p.sub(&expected)?;
                for comp in residual.components() {
                    collector.push(&[a, b], comp);
                }
            }
        }
        let mut preserves = true;
        for field in &basis {
            let commutator = e.bracket(field)?;
            preserves &= commutator.components().iter().all(|c| c.max_degree().is_none_or(|deg| deg == 0));
        }
        Ok(EulerConditionsReport {
            poisson: collector.finish(order),
            preserves_flat_fields: preserves,
            affine: e.is_affine(),
        })
    }

    /// Curvature of the connection extended in the `λ` direction by
    /// `∇_{∂_λ} X = X∘E + λ^{-1}(∇_X E − X)`, expanded in powers of `λ`.
    pub fn euler_extension_check(&self, euler: &EulerData) -> Result<EulerExtensionReport> {
        let d = self.dim();
        let order = self.order();
        let e = &euler.field;
        let basis: Vec<VectorFieldJet> = (0..d).map(|a| VectorFieldJet::coordinate(&self.vars, order, a)).collect();
        let mut assoc = ResidualCollector::new();
        let mut poisson = ResidualCollector::new();
        let mut flat = ResidualCollector::new();
        let mut matches = true;
        for a in 0..d {
            for b in 0..d {
                let cab = self.basis_product(a, b);
                let b_e = self.product(&basis[b], e)?;
                // λ^1
                let l1 = self.product(&cab, e)?.sub(&self.product(&basis[a], &b_e)?)?;
                // λ^0
                let de_b = e.partial(b)?;
                let nabla = VectorFieldJet {
                    components: e.components().iter().map(|c| cab.apply(c)).collect::<Result<_>>()?,
                    parity: cab.parity.plus(e.parity),
                };
                let l0 = b_e.partial(a)?.add(&self.product(&basis[a], &de_b)?)?.sub(&cab)?.sub(&nabla)?;
                // λ^{-1}
                let lm1 = de_b.partial(a)?;
                let pe = self.poisson_tensor(e, &basis[a], &basis[b])?.sub(&cab)?;
                let common = l0.order().min(pe.order());
                matches &= l0.truncate(common) == pe.truncate(common);
                for comp in l1.components() {
                    assoc.push(&[a, b], comp);
                }
                for comp in l0.components() {
                    poisson.push(&[a, b], comp);
                }
                for comp in lm1.components() {
                    flat.push(&[a, b], comp);
                }
            }
        }
        Ok(EulerExtensionReport {
            weight_one: euler.d0.is_one(),
            associativity: assoc.finish(order),
            poisson: poisson.finish(order),
            flat_fields: flat.finish(order),
            matches_poisson_form: matches,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PencilReport {
    /// `∂_a A_b − ∂_b A_a`, indices `(a, b, row, column)`.
    pub closedness: ResidualReport,
    /// `A_a A_b − A_b A_a`, indices `(a, b, row, column)`.
    pub wedge_square: ResidualReport,
}

impl PencilReport {
    pub fn is_flat(&self) -> bool {
        self.closedness.is_zero() && self.wedge_square.is_zero()
    }
}

/// The pencil `∇_λ = ∇_0 + λA` with `A` the multiplication tensor and,
/// once computed, a potential `B` with `∂_a B = A_a`.
#[derive(Clone, Debug, PartialEq)]
pub struct HiggsPencil {
    a: StructureTensor,
    /// `A = scale · (∇ − ∇_0)`; fixed to 1.
    scale: Rational,
    b: Option<Vec<Vec<TruncatedSeries>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveSectionCandidate {
    pub u: Vec<String>,
    /// `jacobian[c][a] = ∂_a (B u)^c` at the origin.
    pub jacobian: Vec<Vec<String>>,
    pub primitive: bool,
    pub jacobian_is_identity: bool,
}

fn matrix_product(
    vars: &VariableSpec,
    order: u32,
    x: &[Vec<TruncatedSeries>],
    y: &[Vec<TruncatedSeries>],
) -> Result<Vec<Vec<TruncatedSeries>>> {
    let d = x.len();
    let mut out = Vec::with_capacity(d);
    for row in x {
        let mut r = Vec::with_capacity(d);
        for j in 0..d {
            let mut parts = Vec::new();
            for (k, xik) in row.iter().enumerate() {
                let ykj = &y[k][j];
                if !xik.is_zero() && !ykj.is_zero() {
                    parts.push(xik.mul(ykj)?);
                }
            }
            r.push(sum_series(vars, order, parts));
        }
        out.push(r);
    }
    Ok(out)
}

/// `[X, Y]` for matrices of series, rows first.
pub fn matrix_commutator(
    vars: &VariableSpec,
    order: u32,
    x: &[Vec<TruncatedSeries>],
    y: &[Vec<TruncatedSeries>],
) -> Result<Vec<Vec<TruncatedSeries>>> {
    let xy = matrix_product(vars, order, x, y)?;
    let yx = matrix_product(vars, order, y, x)?;
    xy.iter().zip(&yx).map(|(r, s)| r.iter().zip(s).map(|(p, q)| Ok(p.sub(q)?)).collect()).collect()
}

impl HiggsPencil {
    pub fn new(a: StructureTensor) -> Self {
        Self { a, scale: Rational::one(), b: None }
    }

    pub fn tensor(&self) -> &StructureTensor {
        &self.a
    }

    pub fn scale(&self) -> &Rational {
        &self.scale
    }

    pub fn potential(&self) -> Option<&[Vec<TruncatedSeries>]> {
        self.b.as_deref()
    }

    pub fn pencil_flatness_residual(&self) -> Result<PencilReport> {
        let d = self.a.dim();
        let vars = self.a.vars().clone();
        let order = self.a.order();
        let mats: Vec<_> = (0..d).map(|a| self.a.higgs_matrix(a)).collect();
        let mut closed = ResidualCollector::new();
        let mut wedge = ResidualCollector::new();
        for a in 0..d {
            for b in a + 1..d {
                for (i, (ra, rb)) in mats[b].iter().zip(&mats[a]).enumerate() {
                    for (j, (x, y)) in ra.iter().zip(rb).enumerate() {
                        closed.push(&[a, b, i, j], &x.partial(a)?.sub(&y.partial(b)?)?);
                    }
                }
                let comm = matrix_commutator(&vars, order, &mats[a], &mats[b])?;
                for (i, row) in comm.iter().enumerate() {
                    for (j, s) in row.iter().enumerate() {
                        wedge.push(&[a, b, i, j], s);
                    }
                }
            }
        }
        Ok(PencilReport { closedness: closed.finish(order.saturating_sub(1)), wedge_square: wedge.finish(order) })
    }

    /// `B` with `∂_a B = A_a` and zero constant term.
    pub fn higgs_potential(&self) -> Result<Vec<Vec<TruncatedSeries>>> {
        let d = self.a.dim();
        let vars = self.a.vars().clone();
        if !vars.all_even() {
            return Err(PotentialError::NotIntegrable("odd coordinates".into()));
        }
        let report = self.pencil_flatness_residual()?;
        if !report.closedness.is_zero() {
            return Err(PotentialError::NotIntegrable(report.closedness.summary()));
        }
        let order = self.a.order();
        let mut b: Vec<Vec<TruncatedSeries>> = vec![vec![TruncatedSeries::zero(vars.clone(), order + 1); d]; d];
        for a in 0..d {
            let target = self.a.higgs_matrix(a);
            for (i, row) in b.iter_mut().enumerate() {
                for (j, slot) in row.iter_mut().enumerate() {
                    let rest = target[i][j].sub(&slot.partial(a)?)?;
                    *slot = slot.add(&rest.antiderivative(a)?)?;
                }
            }
        }
        for a in 0..d {
            let target = self.a.higgs_matrix(a);
            for i in 0..d {
                for j in 0..d {
                    let diff = b[i][j].partial(a)?.sub(&target[i][j])?;
                    if !diff.is_zero() {
                        return Err(PotentialError::NotIntegrable(format!(
                            "∂_{a} B differs from A_{a} at entry ({i}, {j})"
                        )));
                    }
                }
            }
        }
        Ok(b)
    }

    pub fn with_potential(mut self) -> Result<Self> {
        self.b = Some(self.higgs_potential()?);
        Ok(self)
    }

    /// Jacobian of `x ↦ B(x)u` at the origin; primitive when invertible.
    pub fn primitive_section_check(&self, u: &[Rational]) -> Result<PrimitiveSectionCandidate> {
        let b = self.b.as_ref().ok_or(PotentialError::MissingPotential)?;
        let d = self.a.dim();
        if u.len() != d {
            return Err(PotentialError::Dimension("section has wrong length".into()));
        }
        if u.iter().all(Zero::is_zero) {
            return Err(PotentialError::ZeroSection);
        }
        let mut jac = vec![vec![Rational::zero(); d]; d];
        for (c, row) in jac.iter_mut().enumerate() {
            for (a, slot) in row.iter_mut().enumerate() {
                for (e, ue) in u.iter().enumerate() {
                    if ue.is_zero() {
                        continue;
                    }
                    *slot += b[c][e].partial(a)?.constant_term() * ue;
                }
            }
        }
        let primitive = !linalg::determinant(&jac).is_zero();
        let jacobian_is_identity = jac == linalg::identity::<Rational>(d);
        Ok(PrimitiveSectionCandidate {
            u: u.iter().map(format_rational).collect(),
            jacobian: jac.iter().map(|r| r.iter().map(format_rational).collect()).collect(),
            primitive,
            jacobian_is_identity,
        })
    }
}
