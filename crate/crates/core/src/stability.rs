//! Observer companion matrices, the exact Hurwitz test on the gain-perturbed
//! matrix, and the maximal tolerable interval of the gain ratio `b_δ / b̄`.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::matpoly::{
    parse_rational, rational_from_f64, rational_from_i64, rational_to_f64, routh_hurwitz, DenseMatrix, HurwitzFailure,
    Polynomial, Rational,
};

pub const MAX_BANDWIDTH_ORDER: usize = 8;

/// Largest geometric probe is `2^40 ≈ 1.1e12`.
const PROBE_DOUBLINGS: u32 = 40;

/// Observer characteristic coefficients `φ_1 .. φ_{n+1}`, all positive, with
/// `s^{n+1} + φ_1 s^n + ... + φ_{n+1}` Hurwitz.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhiVector {
    phi: Vec<Rational>,
}

impl PhiVector {
    pub fn new(phi: Vec<Rational>) -> Result<Self> {
        if phi.len() < 2 {
            return Err(Error::invalid(format!("phi needs n+1 >= 2 entries, got {}", phi.len())));
        }
        if let Some(i) = phi.iter().position(|p| !p.is_positive()) {
            return Err(Error::invalid(format!("phi_{} = {} must be positive", i + 1, phi[i])));
        }
        let base = base_polynomial(&phi);
        let verdict = routh_hurwitz(&base)?;
        if let Some(reason) = verdict.failure_reason() {
            return Err(Error::invalid(format!(
                "observer polynomial {base} is not Hurwitz: {reason}"
            )));
        }
        Ok(Self { phi })
    }

    pub fn from_f64(phi: &[f64]) -> Result<Self> {
        Self::new(phi.iter().map(|&p| rational_from_f64(p)).collect::<Result<_>>()?)
    }

    /// Comma-separated decimals or fractions, e.g. `"3,3,0.5"`.
    pub fn parse(s: &str) -> Result<Self> {
        Self::new(s.split(',').map(parse_rational).collect::<Result<_>>()?)
    }

    /// Plant order `n` (the vector holds `n + 1` entries).
    pub fn order(&self) -> usize {
        self.phi.len() - 1
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.phi
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.phi.iter().map(rational_to_f64).collect()
    }

    pub fn base_polynomial(&self) -> Polynomial {
        base_polynomial(&self.phi)
    }
}

impl fmt::Display for PhiVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.phi.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

fn base_polynomial(phi: &[Rational]) -> Polynomial {
    let mut c = Vec::with_capacity(phi.len() + 1);
    c.push(Rational::one());
    c.extend(phi.iter().cloned());
    Polynomial::new(c)
}

/// Binomial coefficients `φ_i = C(n+1, i)`, placing every observer eigenvalue
/// at `-ω_o`: the base polynomial is `(s + 1)^{n+1}`.
pub fn bandwidth_phi(n: usize) -> Result<PhiVector> {
    if !(1..=MAX_BANDWIDTH_ORDER).contains(&n) {
        return Err(Error::invalid(format!(
            "bandwidth order must lie in 1..={MAX_BANDWIDTH_ORDER}, got {n}"
        )));
    }
    let mut phi = Vec::with_capacity(n + 1);
    let mut binom = BigInt::one();
    for i in 1..=n + 1 {
        // C(n+1, i) = C(n+1, i-1) * (n + 2 - i) / i
        binom = binom * BigInt::from(n + 2 - i) / BigInt::from(i);
        phi.push(Rational::from_integer(binom.clone()));
    }
    PhiVector::new(phi)
}

fn companion(phi: &[f64], last: f64) -> DenseMatrix {
    let m = phi.len();
    let mut a = DenseMatrix::zeros(m, m);
    for i in 0..m {
        a[(i, 0)] = -phi[i];
        if i + 1 < m {
            a[(i, i + 1)] = 1.0;
        }
    }
    a[(m - 1, 0)] = -last;
    a
}

/// `A₁`: first column `-φ`, ones on the superdiagonal.
pub fn build_a1(phi: &PhiVector) -> DenseMatrix {
    let p = phi.to_f64();
    let last = p[p.len() - 1];
    companion(&p, last)
}

/// `A₂`: as `A₁` with the bottom-left entry scaled to `-φ_{n+1}(1 + ratio)`.
pub fn build_a2(phi: &PhiVector, ratio: f64) -> DenseMatrix {
    let p = phi.to_f64();
    let last = p[p.len() - 1] * (1.0 + ratio);
    companion(&p, last)
}

/// Exact characteristic polynomial of `A₂`:
/// `s^{n+1} + φ_1 s^n + ... + φ_n s + φ_{n+1}(1 + ratio)`.
pub fn char_poly_a2(phi: &PhiVector, ratio: &Rational) -> Polynomial {
    let mut c = Vec::with_capacity(phi.phi.len() + 1);
    c.push(Rational::one());
    c.extend(phi.phi.iter().cloned());
    let last = c.len() - 1;
    c[last] = &c[last] * (Rational::one() + ratio);
    Polynomial::new(c)
}

fn a2_failure(phi: &PhiVector, ratio: &Rational) -> Option<HurwitzFailure> {
    let p = char_poly_a2(phi, ratio);
    if p.degree().unwrap_or(0) < 1 {
        return None;
    }
    routh_hurwitz(&p)
        .expect("A2 characteristic polynomial has degree >= 2")
        .failure_reason()
        .cloned()
}

/// Exact decision of whether `A₂(φ, ratio)` is Hurwitz.
pub fn is_well_performed(phi: &PhiVector, ratio: &Rational) -> bool {
    a2_failure(phi, ratio).is_none()
}

/// How the upper end of a gain interval is known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UpperBound {
    /// No ratio is admissible (the base observer polynomial is not Hurwitz).
    Empty,
    /// The boundary is this rational, certified by a marginal Routh verdict.
    Exact(Rational),
    /// The boundary lies in `(stable, unstable]`.
    Bracket { stable: Rational, unstable: Rational },
    /// Every probe up to ~1e12 was stable. `proven` when the characteristic
    /// polynomial has degree 2, where positive coefficients suffice.
    Unbounded { proven: bool },
}

/// Open interval `(lower, upper)` of tolerable gain ratios `b_δ / b̄`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GainInterval {
    pub lower: Rational,
    pub upper: UpperBound,
    /// Routh failure at the upper endpoint (at `unstable` for a bracket).
    pub certificate: Option<HurwitzFailure>,
}

impl GainInterval {
    pub fn is_empty(&self) -> bool {
        matches!(self.upper, UpperBound::Empty)
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self.upper, UpperBound::Unbounded { .. })
    }

    /// Best floating estimate of the upper end (`inf` when unbounded, `NaN` when empty).
    pub fn upper_f64(&self) -> f64 {
        match &self.upper {
            UpperBound::Empty => f64::NAN,
            UpperBound::Exact(r) => rational_to_f64(r),
            UpperBound::Bracket { stable, .. } => rational_to_f64(stable),
            UpperBound::Unbounded { .. } => f64::INFINITY,
        }
    }

    pub fn lower_f64(&self) -> f64 {
        rational_to_f64(&self.lower)
    }

    /// Width of the bracket around the upper end; zero when exact.
    pub fn upper_tolerance(&self) -> Option<Rational> {
        match &self.upper {
            UpperBound::Exact(_) => Some(Rational::zero()),
            UpperBound::Bracket { stable, unstable } => Some(unstable - stable),
            _ => None,
        }
    }

    /// `lower < ratio < upper`; for a bracket the stable end is used.
    pub fn contains(&self, ratio: &Rational) -> bool {
        if self.is_empty() || ratio <= &self.lower {
            return false;
        }
        match &self.upper {
            UpperBound::Empty => false,
            UpperBound::Exact(u) => ratio < u,
            UpperBound::Bracket { stable, .. } => ratio <= stable,
            UpperBound::Unbounded { .. } => true,
        }
    }

    /// Upper end rendered as an exact rational, a 6-decimal bracket value or `inf`.
    pub fn upper_label(&self) -> String {
        match &self.upper {
            UpperBound::Empty => "empty".into(),
            UpperBound::Exact(r) => r.to_string(),
            UpperBound::Bracket { stable, .. } => format!("{:.6}", rational_to_f64(stable)),
            UpperBound::Unbounded { .. } => "inf".into(),
        }
    }
}

impl fmt::Display for GainInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "empty");
        }
        write!(f, "({}, {})", self.lower, self.upper_label())
    }
}

/// Simplest rational (smallest denominator) in `[lo, hi]`, for `0 <= lo <= hi`.
fn simplest_between(lo: &Rational, hi: &Rational) -> Rational {
    let floor = lo.floor();
    if &floor == lo {
        return floor;
    }
    let next = &floor + Rational::one();
    if &next <= hi {
        return next;
    }
    let inner = simplest_between(&(Rational::one() / (hi - &floor)), &(Rational::one() / (lo - &floor)));
    floor + Rational::one() / inner
}

/// Maximal interval of gain ratios for which `A₂` stays Hurwitz.
///
/// The lower end is always `-1` (the constant coefficient must stay positive).
/// The upper end is searched by doubling probes `1, 2, 4, ...` up to ~1e12 and
/// then by exact-rational bisection down to a width of `1e-6`. The bracket is
/// finally snapped to its simplest rational when that rational is itself a
/// marginal (zero-pivot) point.
pub fn gain_margin(phi: &PhiVector) -> GainInterval {
    let lower = rational_from_i64(-1);
    if !is_well_performed(phi, &Rational::zero()) {
        return GainInterval {
            lower,
            upper: UpperBound::Empty,
            certificate: a2_failure(phi, &Rational::zero()),
        };
    }
    if phi.order() == 1 {
        return GainInterval {
            lower,
            upper: UpperBound::Unbounded { proven: true },
            certificate: None,
        };
    }

    let mut stable = Rational::zero();
    let mut unstable = None;
    for k in 0..=PROBE_DOUBLINGS {
        let probe = Rational::from_integer(BigInt::one() << k);
        if is_well_performed(phi, &probe) {
            stable = probe;
        } else {
            unstable = Some(probe);
            break;
        }
    }
    let Some(mut unstable) = unstable else {
        return GainInterval {
            lower,
            upper: UpperBound::Unbounded { proven: false },
            certificate: None,
        };
    };

    let width = Rational::new(BigInt::one(), BigInt::from(1_000_000));
    let two = rational_from_i64(2);
    while &unstable - &stable > width {
        let mid = (&stable + &unstable) / &two;
        if is_well_performed(phi, &mid) {
            stable = mid;
        } else {
            unstable = mid;
        }
    }

    let candidate = simplest_between(&stable, &unstable);
    if let Some(reason @ HurwitzFailure::ZeroPivot { .. }) = a2_failure(phi, &candidate) {
        return GainInterval {
            lower,
            upper: UpperBound::Exact(candidate),
            certificate: Some(reason),
        };
    }
    let certificate = a2_failure(phi, &unstable);
    GainInterval {
        lower,
        upper: UpperBound::Bracket { stable, unstable },
        certificate,
    }
}

/// Prior-work sufficient range `(-1, 1 + 2/n)` under the bandwidth design.
pub fn lemma_range(n: usize) -> Result<GainInterval> {
    if n == 0 {
        return Err(Error::invalid("order must be at least 1"));
    }
    let n = Rational::from_integer(BigInt::from(n));
    Ok(GainInterval {
        lower: rational_from_i64(-1),
        upper: UpperBound::Exact(Rational::one() + rational_from_i64(2) / n),
        certificate: None,
    })
}

/// Upper ends of the theorem row as commonly tabulated for `n = 1..5`, with
/// `n = 5` printed to two decimals.
pub const TABULATED_THEOREM_UPPER: [f64; 5] = [f64::INFINITY, 8.0, 4.0, 4.0, 2.37];

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub n: usize,
    pub theorem: GainInterval,
    pub lemma: GainInterval,
}

impl TableRow {
    /// The tabulated value this row disagrees with, if any (beyond two-decimal rounding).
    pub fn tabulated_discrepancy(&self) -> Option<f64> {
        let published = *TABULATED_THEOREM_UPPER.get(self.n.checked_sub(1)?)?;
        let computed = self.theorem.upper_f64();
        let agrees = if published.is_infinite() {
            computed.is_infinite()
        } else {
            (computed - published).abs() <= 0.005
        };
        (!agrees).then_some(published)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableReport {
    pub rows: Vec<TableRow>,
}

pub const TABLE_CSV_HEADER: &str = "n,theorem_lower,theorem_upper,lemma_lower,lemma_upper";

fn csv_endpoint(interval: &GainInterval) -> String {
    match &interval.upper {
        UpperBound::Empty => "nan".into(),
        UpperBound::Exact(r) => r.to_string(),
        UpperBound::Bracket { stable, .. } => format!("{}", rational_to_f64(stable)),
        UpperBound::Unbounded { .. } => "inf".into(),
    }
}

impl TableReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TABLE_CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.n,
                row.theorem.lower,
                csv_endpoint(&row.theorem),
                row.lemma.lower,
                csv_endpoint(&row.lemma)
            ));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut theorem_cells = Vec::new();
        let mut notes = Vec::new();
        for row in &self.rows {
            let mut cell = row.theorem.to_string();
            match &row.theorem.upper {
                UpperBound::Bracket { stable, unstable } => {
                    cell.push('*');
                    notes.push(format!(
                        "* n={}: Routh boundary is irrational; upper end bracketed in ({:.9}, {:.9}]",
                        row.n,
                        rational_to_f64(stable),
                        rational_to_f64(unstable)
                    ));
                }
                UpperBound::Unbounded { proven: false } => {
                    cell.push('?');
                    notes.push(format!(
                        "? n={}: every probe up to 1e12 stable; unboundedness not proven",
                        row.n
                    ));
                }
                _ => {}
            }
            if let Some(published) = row.tabulated_discrepancy() {
                cell.push('!');
                notes.push(format!(
                    "! n={}: exact Routh analysis gives upper end {:.6}; the commonly tabulated value is {}",
                    row.n,
                    row.theorem.upper_f64(),
                    published
                ));
            }
            theorem_cells.push(cell);
        }
        let lemma_cells: Vec<String> = self.rows.iter().map(|r| r.lemma.to_string()).collect();
        let n_cells: Vec<String> = self.rows.iter().map(|r| r.n.to_string()).collect();

        let width = theorem_cells
            .iter()
            .chain(&lemma_cells)
            .map(|c| c.chars().count())
            .max()
            .unwrap_or(1);
        let label_width = "b_delta/b_bar (theorem)".len();
        let line = |label: &str, cells: &[String]| {
            let body: Vec<String> = cells.iter().map(|c| format!("{c:>width$}")).collect();
            format!("{label:<label_width$} | {}\n", body.join(" | "))
        };
        let mut out = String::new();
        out.push_str(&line("n", &n_cells));
        out.push_str(&line("b_delta/b_bar (theorem)", &theorem_cells));
        out.push_str(&line("b_delta/b_bar (lemma)", &lemma_cells));
        for note in notes {
            out.push_str(&note);
            out.push('\n');
        }
        out
    }
}

/// Theorem and lemma ranges for the bandwidth design, `n = 1..=max_n`.
pub fn table_report(max_n: usize) -> Result<TableReport> {
    if !(1..=MAX_BANDWIDTH_ORDER).contains(&max_n) {
        return Err(Error::invalid(format!(
            "max_n must lie in 1..={MAX_BANDWIDTH_ORDER}, got {max_n}"
        )));
    }
    let rows = (1..=max_n)
        .map(|n| {
            Ok(TableRow {
                n,
                theorem: gain_margin(&bandwidth_phi(n)?),
                lemma: lemma_range(n)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(TableReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn bandwidth_coefficients() {
        assert_eq!(bandwidth_phi(1).unwrap().to_f64(), vec![2.0, 1.0]);
        assert_eq!(bandwidth_phi(2).unwrap().to_f64(), vec![3.0, 3.0, 1.0]);
        assert_eq!(bandwidth_phi(4).unwrap().to_f64(), vec![5.0, 10.0, 10.0, 5.0, 1.0]);
        assert!(bandwidth_phi(0).is_err());
        assert!(bandwidth_phi(9).is_err());
    }

    #[test]
    fn phi_validation() {
        assert!(PhiVector::from_f64(&[3.0, 3.0, 0.5]).is_ok());
        assert!(PhiVector::from_f64(&[1.0]).is_err());
        assert!(PhiVector::from_f64(&[3.0, -3.0, 1.0]).is_err());
        // s^3 + s^2 + s + 3 is not Hurwitz
        assert!(PhiVector::from_f64(&[1.0, 1.0, 3.0]).is_err());
        assert_eq!(
            PhiVector::parse("3,3,1/2").unwrap(),
            PhiVector::from_f64(&[3.0, 3.0, 0.5]).unwrap()
        );
    }

    #[test]
    fn a1_direct_form() {
        let a = build_a1(&bandwidth_phi(1).unwrap());
        assert_eq!(a.entries(), &[-2.0, 1.0, -1.0, 0.0]);
        let a = build_a1(&bandwidth_phi(2).unwrap());
        assert_eq!(a.entries(), &[-3.0, 1.0, 0.0, -3.0, 0.0, 1.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn a2_constant_term() {
        let phi = bandwidth_phi(2).unwrap();
        assert_eq!(build_a2(&phi, 0.0), build_a1(&phi));
        assert_eq!(char_poly_a2(&phi, &q(8, 1)), Polynomial::from_i64(&[1, 3, 3, 9]));
        let tuned = PhiVector::from_f64(&[3.0, 3.0, 0.5]).unwrap();
        assert_eq!(char_poly_a2(&tuned, &q(17, 1)), Polynomial::from_i64(&[1, 3, 3, 9]));
        assert_eq!(build_a2(&tuned, 17.0)[(2, 0)], -9.0);
    }

    #[test]
    fn well_performed_examples() {
        let phi = bandwidth_phi(2).unwrap();
        assert!(is_well_performed(&phi, &q(15, 2)));
        assert!(!is_well_performed(&phi, &q(8, 1)));
        assert!(!is_well_performed(&phi, &q(-1, 1)));
    }

    #[test]
    fn simplest_rational() {
        assert_eq!(simplest_between(&q(7999, 1000), &q(8, 1)), q(8, 1));
        assert_eq!(simplest_between(&q(2370, 1000), &q(2371, 1000)), q(64, 27));
        assert_eq!(simplest_between(&q(1, 3), &q(1, 2)), q(1, 2));
        assert_eq!(simplest_between(&q(3, 10), &q(4, 10)), q(1, 3));
    }

    #[test]
    fn margins_for_bandwidth_design() {
        let m = |n| gain_margin(&bandwidth_phi(n).unwrap());
        assert_eq!(m(1).upper, UpperBound::Unbounded { proven: true });
        assert_eq!(m(2).upper, UpperBound::Exact(q(8, 1)));
        assert_eq!(m(3).upper, UpperBound::Exact(q(4, 1)));
        assert_eq!(m(5).upper, UpperBound::Exact(q(64, 27)));
        let four = m(4);
        assert!(matches!(four.upper, UpperBound::Bracket { .. }));
        assert!(four.upper_tolerance().unwrap() <= q(1, 1_000_000));
        assert_eq!(m(2).certificate, Some(HurwitzFailure::ZeroPivot { power: 1 }));
    }

    #[test]
    fn tuned_phi_margin() {
        let tuned = PhiVector::from_f64(&[3.0, 3.0, 0.5]).unwrap();
        let g = gain_margin(&tuned);
        assert_eq!(g.upper, UpperBound::Exact(q(17, 1)));
        assert_eq!(g.to_string(), "(-1, 17)");
    }

    #[test]
    fn lemma_ranges() {
        assert_eq!(lemma_range(1).unwrap().upper, UpperBound::Exact(q(3, 1)));
        assert_eq!(lemma_range(2).unwrap().upper, UpperBound::Exact(q(2, 1)));
        assert_eq!(lemma_range(5).unwrap().upper, UpperBound::Exact(q(7, 5)));
        assert!(lemma_range(0).is_err());
    }

    #[test]
    fn interval_membership() {
        let g = gain_margin(&bandwidth_phi(2).unwrap());
        assert!(g.contains(&q(0, 1)));
        assert!(g.contains(&q(79_999, 10_000)));
        assert!(!g.contains(&q(8, 1)));
        assert!(!g.contains(&q(-1, 1)));
    }

    #[test]
    fn table_rendering() {
        let report = table_report(2).unwrap();
        assert_eq!(
            report.to_csv(),
            format!("{TABLE_CSV_HEADER}\n1,-1,inf,-1,3\n2,-1,8,-1,2\n")
        );
        let text = table_report(5).unwrap().to_text();
        assert!(text.contains("(-1, 5/3)"));
        assert!(text.contains("! n=4"));
        assert!(!text.contains("! n=5"));
        assert_eq!(table_report(1).unwrap().rows.len(), 1);
        assert!(table_report(0).is_err());
    }
}
