//! Reports for identities that must vanish as truncated series.

use serde::{Deserialize, Serialize};

use crate::series::{format_rational, rational_to_f64, TruncatedSeries};

/// The lowest nonzero residual term found.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Defect {
    pub degree: u32,
    /// Index tuple of the identity that failed.
    pub indices: Vec<usize>,
    pub monomial: Vec<u32>,
    pub coeff: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Residuals are exact through this total degree.
    pub checked_through: u32,
    pub first_defect: Option<Defect>,
    pub max_abs: f64,
    pub nonzero_terms: usize,
}

impl ResidualReport {
    pub fn zero(checked_through: u32) -> Self {
        Self { checked_through, first_defect: None, max_abs: 0.0, nonzero_terms: 0 }
    }

    pub fn is_zero(&self) -> bool {
        self.first_defect.is_none()
    }

    pub fn first_defect_degree(&self) -> Option<u32> {
        self.first_defect.as_ref().map(|d| d.degree)
    }

    /// Combine reports of independent identities.
    pub fn merge(mut self, other: ResidualReport) -> Self {
        self.checked_through = self.checked_through.min(other.checked_through);
        self.max_abs = self.max_abs.max(other.max_abs);
        self.nonzero_terms += other.nonzero_terms;
        self.first_defect = match (self.first_defect.take(), other.first_defect) {
            (Some(a), Some(b)) => Some(if defect_key(&b) < defect_key(&a) { b } else { a }),
            (a, b) => a.or(b),
        };
        self
    }

    pub fn summary(&self) -> String {
        match &self.first_defect {
            None => format!("zero to order {}", self.checked_through),
            Some(d) => format!(
                "nonzero: {} terms, max |coeff| {:.3e}, first at degree {} (indices {:?}, monomial {:?}, coeff {})",
                self.nonzero_terms, self.max_abs, d.degree, d.indices, d.monomial, d.coeff
            ),
        }
    }
}

fn defect_key(d: &Defect) -> (u32, &[usize], &[u32]) {
    (d.degree, &d.indices, &d.monomial)
}

/// Accumulates residual series for many index tuples.
#[derive(Clone, Debug)]
pub struct ResidualCollector {
    report: Option<ResidualReport>,
    cap: Option<u32>,
}

impl Default for ResidualCollector {
    fn default() -> Self {
        Self::new()
    }
}

impl ResidualCollector {
    pub fn new() -> Self {
        Self { report: None, cap: None }
    }

    /// Ignore anything above `order` even if the series know more.
    pub fn capped(order: u32) -> Self {
        Self { report: None, cap: Some(order) }
    }

    pub fn push(&mut self, indices: &[usize], residual: &TruncatedSeries) {
        let report = series_report(indices, residual, self.cap);
        self.push_report(report);
    }

    pub fn push_report(&mut self, report: ResidualReport) {
        self.report = Some(match self.report.take() {
            None => report,
            Some(r) => r.merge(report),
        });
    }

    /// `default_order` is used when nothing was pushed.
    pub fn finish(self, default_order: u32) -> ResidualReport {
        self.report.unwrap_or_else(|| ResidualReport::zero(default_order))
    }
}

pub fn series_report(indices: &[usize], residual: &TruncatedSeries, cap: Option<u32>) -> ResidualReport {
    let order = cap.map_or(residual.order(), |c| c.min(residual.order()));
    let mut report = ResidualReport::zero(order);
    for (index, coeff) in residual.terms() {
        if index.degree() > order {
            break;
        }
        report.nonzero_terms += 1;
        report.max_abs = report.max_abs.max(rational_to_f64(coeff).abs());
        if report.first_defect.is_none() {
            report.first_defect = Some(Defect {
                degree: index.degree(),
                indices: indices.to_vec(),
                monomial: index.exponents().to_vec(),
                coeff: format_rational(coeff),
            });
        }
    }
    report
}
