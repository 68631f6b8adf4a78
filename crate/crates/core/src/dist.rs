//! Finite discrete distributions.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub const SUM_TOLERANCE: f64 = 1e-12;

/// A finite distribution with distinct support entries in a fixed order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution<T> {
    items: Vec<(T, f64)>,
}

impl<T: PartialEq + Clone> Distribution<T> {
    pub fn new(items: Vec<(T, f64)>) -> Result<Self> {
        Self::with_tolerance(items, SUM_TOLERANCE)
    }

    pub fn with_tolerance(items: Vec<(T, f64)>, tol: f64) -> Result<Self> {
        let mut total = 0.0;
        for (k, (x, p)) in items.iter().enumerate() {
            if !(p.is_finite() && *p >= 0.0) {
                return Err(CoreError::Distribution(format!("bad probability {p}")));
            }
            if items[..k].iter().any(|(y, _)| y == x) {
                return Err(CoreError::Distribution("duplicate support entry".into()));
            }
            total += p;
        }
        if (total - 1.0).abs() > tol {
            return Err(CoreError::Distribution(format!("probabilities sum to {total}")));
        }
        Ok(Distribution { items })
    }

    /// Builds a distribution, merging duplicate outcomes and dropping zeros.
    pub fn from_weights(weights: impl IntoIterator<Item = (T, f64)>) -> Result<Self> {
        let mut items: Vec<(T, f64)> = Vec::new();
        for (x, p) in weights {
            if p == 0.0 {
                continue;
            }
            match items.iter_mut().find(|(y, _)| *y == x) {
                Some(entry) => entry.1 += p,
                None => items.push((x, p)),
            }
        }
        Self::new(items)
    }

    pub fn point(x: T) -> Self {
        Distribution { items: vec![(x, 1.0)] }
    }

    pub fn uniform(xs: Vec<T>) -> Result<Self> {
        let p = 1.0 / xs.len() as f64;
        Self::new(xs.into_iter().map(|x| (x, p)).collect())
    }

    pub fn prob(&self, x: &T) -> f64 {
        self.items.iter().find(|(y, _)| y == x).map_or(0.0, |(_, p)| *p)
    }

    pub fn items(&self) -> &[(T, f64)] {
        &self.items
    }

    pub fn iter(&self) -> impl Iterator<Item = &(T, f64)> {
        self.items.iter()
    }

    /// Entries with strictly positive probability.
    pub fn support(&self) -> impl Iterator<Item = &(T, f64)> {
        self.items.iter().filter(|(_, p)| *p > 0.0)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.items.iter().map(|(_, p)| p).sum()
    }

    /// Samples by inverse CDF given `u ∈ [0, 1)`.
    pub fn sample_with(&self, u: f64) -> &T {
        let mut acc = 0.0;
        let mut last = None;
        for (x, p) in &self.items {
            if *p <= 0.0 {
                continue;
            }
            acc += p;
            last = Some(x);
            if u < acc {
                return x;
            }
        }
        last.expect("distribution has positive mass")
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> &T {
        let u: f64 = rng.random();
        self.sample_with(u)
    }

    /// Total variation distance `½ Σ |p − q|` over the union of supports.
    pub fn tv_distance(&self, other: &Self) -> f64 {
        let mut d = 0.0;
        for (x, p) in &self.items {
            d += (p - other.prob(x)).abs();
        }
        for (x, q) in &other.items {
            if !self.items.iter().any(|(y, _)| y == x) {
                d += q;
            }
        }
        0.5 * d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sums() {
        assert!(Distribution::new(vec![(0, 0.5), (1, 0.4)]).is_err());
        assert!(Distribution::new(vec![(0, 0.5), (0, 0.5)]).is_err());
        assert!(Distribution::new(vec![(0, -0.1), (1, 1.1)]).is_err());
        assert!(Distribution::new(vec![(0, 0.25), (1, 0.75)]).is_ok());
    }

    #[test]
    fn merge_weights() {
        let d = Distribution::from_weights(vec![(1, 0.25), (2, 0.0), (1, 0.25), (3, 0.5)]).unwrap();
        assert_eq!(d.items(), &[(1, 0.5), (3, 0.5)]);
    }

    #[test]
    fn inverse_cdf() {
        let d = Distribution::new(vec![('a', 0.25), ('b', 0.0), ('c', 0.75)]).unwrap();
        assert_eq!(*d.sample_with(0.0), 'a');
        assert_eq!(*d.sample_with(0.2499), 'a');
        assert_eq!(*d.sample_with(0.25), 'c');
        assert_eq!(*d.sample_with(0.999_999), 'c');
    }

    #[test]
    fn tv() {
        let p = Distribution::new(vec![(0, 1.0)]).unwrap();
        let q = Distribution::new(vec![(1, 1.0)]).unwrap();
        assert_eq!(p.tv_distance(&q), 1.0);
        assert_eq!(p.tv_distance(&p), 0.0);
    }
}
