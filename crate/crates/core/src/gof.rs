//! Chi-square goodness of fit with pooling of rare classes, plus small
//! summary helpers.

use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{LabError, Result};

/// Classes whose expected count falls below this are pooled.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Clone, Debug, PartialEq)]
pub struct GofResult {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    /// Bins after pooling.
    pub bins: usize,
    /// Observations that fell outside the supplied law's support.
    pub unexpected: u64,
}

impl GofResult {
    pub fn passes(&self, significance: f64) -> bool {
        self.unexpected == 0 && self.p_value >= significance
    }
}

/// Tests observed class counts against class probabilities.
///
/// Classes are sorted by expected count; every class expected below
/// [`MIN_EXPECTED`] goes into one pooled bin, and if that bin is itself too
/// small it absorbs the next smallest classes until it is not. Observations
/// of classes missing from `law` are counted in `unexpected` and force a
/// zero p-value.
pub fn chi_square_gof(observed: &BTreeMap<u64, u64>, law: &BTreeMap<u64, f64>) -> Result<GofResult> {
    let total: u64 = observed.values().sum();
    if total == 0 {
        return Err(LabError::param("no observations"));
    }
    let mass: f64 = law.values().sum();
    if (mass - 1.0).abs() > 1e-9 || law.values().any(|&p| p < 0.0) {
        return Err(LabError::param(format!("class probabilities sum to {mass}")));
    }
    let unexpected: u64 = observed
        .iter()
        .filter(|(c, _)| !law.contains_key(c))
        .map(|(_, &n)| n)
        .sum();

    let n = total as f64;
    let mut classes: Vec<(f64, f64)> = law
        .iter()
        .filter(|(_, &p)| p > 0.0)
        .map(|(c, &p)| (p * n, observed.get(c).copied().unwrap_or(0) as f64))
        .collect();
    classes.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    let mut rest = classes.into_iter().peekable();
    while let Some(&(e, _)) = rest.peek() {
        if e >= MIN_EXPECTED && pooled.0 == 0.0 {
            break;
        }
        if pooled.0 >= MIN_EXPECTED {
            break;
        }
        let (e, o) = rest.next().expect("peeked");
        pooled.0 += e;
        pooled.1 += o;
    }
    if pooled.0 > 0.0 {
        bins.push(pooled);
    }
    bins.extend(rest);
    // a lone undersized pool joins the smallest regular bin
    if bins.len() >= 2 && bins[0].0 < MIN_EXPECTED {
        let first = bins.remove(0);
        bins[0].0 += first.0;
        bins[0].1 += first.1;
    }

    let statistic: f64 = bins.iter().map(|(e, o)| (o - e) * (o - e) / e).sum();
    let degrees_of_freedom = bins.len().saturating_sub(1);
    let p_value = if unexpected > 0 {
        0.0
    } else if degrees_of_freedom == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(degrees_of_freedom as f64)
            .map_err(|e| LabError::Invariant(format!("chi-square law: {e}")))?;
        (1.0 - dist.cdf(statistic)).clamp(0.0, 1.0)
    };
    Ok(GofResult {
        statistic,
        degrees_of_freedom,
        p_value,
        bins: bins.len(),
        unexpected,
    })
}

/// Median of a nonempty slice; the mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_has_p_value_one() {
        let law: BTreeMap<u64, f64> = [(0, 0.25), (1, 0.75)].into();
        let obs: BTreeMap<u64, u64> = [(0, 25), (1, 75)].into();
        let r = chi_square_gof(&obs, &law).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.degrees_of_freedom, 1);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn known_statistic() {
        // (30-25)^2/25 + (70-75)^2/75 = 4/3
        let law: BTreeMap<u64, f64> = [(0, 0.25), (1, 0.75)].into();
        let obs: BTreeMap<u64, u64> = [(0, 30), (1, 70)].into();
        let r = chi_square_gof(&obs, &law).unwrap();
        assert!((r.statistic - 4.0 / 3.0).abs() < 1e-12);
        // P(chi2_1 > 4/3) = erfc(sqrt(2/3))
        assert!((r.p_value - 0.248213).abs() < 1e-5);
    }

    #[test]
    fn rare_classes_are_pooled() {
        let law: BTreeMap<u64, f64> = [(0, 0.97), (1, 0.01), (2, 0.01), (3, 0.01)].into();
        let obs: BTreeMap<u64, u64> = [(0, 97), (1, 1), (2, 1), (3, 1)].into();
        let r = chi_square_gof(&obs, &law).unwrap();
        // pooled bin has expected 3 < 5, so it merges into the last class
        assert_eq!(r.bins, 1);
        assert_eq!(r.degrees_of_freedom, 0);
        let obs: BTreeMap<u64, u64> = [(0, 9700), (1, 100), (2, 100), (3, 100)].into();
        assert_eq!(chi_square_gof(&obs, &law).unwrap().bins, 4);
    }

    #[test]
    fn impossible_class_fails() {
        let law: BTreeMap<u64, f64> = [(0, 1.0)].into();
        let obs: BTreeMap<u64, u64> = [(0, 10), (5, 1)].into();
        let r = chi_square_gof(&obs, &law).unwrap();
        assert_eq!(r.unexpected, 1);
        assert!(!r.passes(0.01));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }
}
