use std::fmt;

use num_traits::{Signed, Zero};

use super::polynomial::{Polynomial, Rational};
use crate::error::{Error, Result};

/// Why a polynomial failed the Routh test. `power` names the Routh row
/// (`s^power`) or, for coefficient failures, the power of `s` whose coefficient
/// is not positive; `value` is the offending entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HurwitzFailure {
    NonpositiveCoefficient { power: usize, value: Rational },
    ZeroPivot { power: usize },
    SignChange { power: usize, value: Rational },
}

impl HurwitzFailure {
    pub fn kind(&self) -> &'static str {
        match self {
            HurwitzFailure::NonpositiveCoefficient { .. } => "nonpositive_coefficient",
            HurwitzFailure::ZeroPivot { .. } => "zero_pivot",
            HurwitzFailure::SignChange { .. } => "sign_change",
        }
    }
}

impl fmt::Display for HurwitzFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HurwitzFailure::NonpositiveCoefficient { power, value } => {
                write!(f, "coefficient of s^{power} is {value} (not positive)")
            }
            HurwitzFailure::ZeroPivot { power } => {
                write!(f, "Routh row s^{power} has a zero first-column entry")
            }
            HurwitzFailure::SignChange { power, value } => {
                write!(f, "Routh row s^{power} has first-column entry {value} < 0")
            }
        }
    }
}

/// Outcome of a Hurwitz test; stable exactly when there is no failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HurwitzVerdict {
    failure: Option<HurwitzFailure>,
}

impl HurwitzVerdict {
    pub fn stable() -> Self {
        Self { failure: None }
    }

    pub fn unstable(reason: HurwitzFailure) -> Self {
        Self { failure: Some(reason) }
    }

    pub fn is_stable(&self) -> bool {
        self.failure.is_none()
    }

    pub fn failure_reason(&self) -> Option<&HurwitzFailure> {
        self.failure.as_ref()
    }
}

/// The first column of the Routh array, or the first failure met while
/// building it.
pub fn routh_first_column(p: &Polynomial) -> Result<std::result::Result<Vec<Rational>, HurwitzFailure>> {
    let degree = match p.degree() {
        None => return Err(Error::invalid("Routh test on the zero polynomial")),
        Some(0) => return Err(Error::invalid("Routh test on a constant polynomial")),
        Some(d) => d,
    };
    // Hurwitzness is invariant under scaling, so normalise to a positive leading coefficient.
    let coeffs: Vec<Rational> = if p.coeffs()[0].is_negative() {
        p.coeffs().iter().map(|c| -c).collect()
    } else {
        p.coeffs().to_vec()
    };

    for (i, c) in coeffs.iter().enumerate() {
        if !c.is_positive() {
            return Ok(Err(HurwitzFailure::NonpositiveCoefficient {
                power: degree - i,
                value: c.clone(),
            }));
        }
    }

    let width = degree / 2 + 1;
    let row_from = |start: usize| -> Vec<Rational> {
        let mut row: Vec<Rational> = coeffs.iter().skip(start).step_by(2).cloned().collect();
        row.resize(width, Rational::zero());
        row
    };
    let mut upper = row_from(0);
    let mut lower = row_from(1);
    let mut column = vec![upper[0].clone(), lower[0].clone()];

    for k in 2..=degree {
        let pivot = lower[0].clone();
        let mut next = vec![Rational::zero(); width];
        for j in 0..width - 1 {
            next[j] = (&pivot * &upper[j + 1] - &upper[0] * &lower[j + 1]) / &pivot;
        }
        let power = degree - k;
        if next[0].is_zero() {
            return Ok(Err(HurwitzFailure::ZeroPivot { power }));
        }
        if next[0].is_negative() {
            return Ok(Err(HurwitzFailure::SignChange {
                power,
                value: next[0].clone(),
            }));
        }
        column.push(next[0].clone());
        upper = std::mem::replace(&mut lower, next);
    }
    Ok(Ok(column))
}

/// Exact Routh–Hurwitz test: stable iff every root has strictly negative real
/// part. Marginal cases (a zero pivot anywhere) are not Hurwitz.
pub fn routh_hurwitz(p: &Polynomial) -> Result<HurwitzVerdict> {
    Ok(match routh_first_column(p)? {
        Ok(_) => HurwitzVerdict::stable(),
        Err(reason) => HurwitzVerdict::unstable(reason),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matpoly::polynomial::rational_from_i64;

    fn verdict(c: &[i64]) -> HurwitzVerdict {
        routh_hurwitz(&Polynomial::from_i64(c)).unwrap()
    }

    #[test]
    fn first_order() {
        assert!(verdict(&[1, 1]).is_stable());
        assert!(!verdict(&[1, -1]).is_stable());
    }

    #[test]
    fn triple_root() {
        assert!(verdict(&[1, 3, 3, 1]).is_stable());
    }

    #[test]
    fn imaginary_axis_pair_is_a_zero_pivot() {
        // s^3 + 3s^2 + 3s + 9 = (s + 3)(s^2 + 3)
        let v = verdict(&[1, 3, 3, 9]);
        assert_eq!(v.failure_reason(), Some(&HurwitzFailure::ZeroPivot { power: 1 }));
    }

    #[test]
    fn right_half_plane_root() {
        let v = verdict(&[1, 0, -1]);
        assert_eq!(v.failure_reason().unwrap().kind(), "nonpositive_coefficient");
    }

    #[test]
    fn sign_change_detected() {
        // s^3 + s^2 + s + 3 : row s^1 = (1 - 3)/1 = -2
        let v = verdict(&[1, 1, 1, 3]);
        assert_eq!(
            v.failure_reason(),
            Some(&HurwitzFailure::SignChange {
                power: 1,
                value: rational_from_i64(-2)
            })
        );
    }

    #[test]
    fn negative_leading_coefficient_is_normalised() {
        assert!(verdict(&[-1, -3, -3, -1]).is_stable());
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(routh_hurwitz(&Polynomial::zero()).is_err());
        assert!(routh_hurwitz(&Polynomial::from_i64(&[5])).is_err());
    }

    #[test]
    fn first_column_of_quartic() {
        // s^4 + 4s^3 + 6s^2 + 4s + 1 : column 1, 4, 5, 16/5, 1
        let col = routh_first_column(&Polynomial::from_i64(&[1, 4, 6, 4, 1]))
            .unwrap()
            .unwrap();
        let expected: Vec<Rational> = vec![
            rational_from_i64(1),
            rational_from_i64(4),
            rational_from_i64(5),
            rational_from_i64(16) / rational_from_i64(5),
            rational_from_i64(1),
        ];
        assert_eq!(col, expected);
    }
}
