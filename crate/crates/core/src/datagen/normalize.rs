use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column-wise min-max scaling fitted on training rows.
///
/// Degenerate columns (`max == min`) map to 0 and back to `min`. Values outside
/// the fitted range are not clipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalizer {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut iter = rows.into_iter();
        let first = iter.next().ok_or_else(|| Error::domain("cannot fit a normalizer on zero rows"))?;
        let mut min = first.to_vec();
        let mut max = first.to_vec();
        for row in iter {
            if row.len() != min.len() {
                return Err(Error::shape(format!("row of {} columns, expected {}", row.len(), min.len())));
            }
            for (j, &x) in row.iter().enumerate() {
                min[j] = min[j].min(x);
                max[j] = max[j].max(x);
            }
        }
        Ok(Normalizer { min, max })
    }

    pub fn arity(&self) -> usize {
        self.min.len()
    }

    /// `max - min` per column; 0 for degenerate columns.
    pub fn scale(&self, j: usize) -> f64 {
        self.max[j] - self.min[j]
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.arity() {
            return Err(Error::domain(format!(
                "vector of arity {} for a {}-column normalizer",
                x.len(),
                self.arity()
            )));
        }
        Ok(())
    }

    pub fn normalize(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(x.iter()
            .enumerate()
            .map(|(j, &v)| {
                let s = self.scale(j);
                if s > 0.0 {
                    (v - self.min[j]) / s
                } else {
                    0.0
                }
            })
            .collect())
    }

    pub fn denormalize(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(x.iter()
            .enumerate()
            .map(|(j, &v)| self.min[j] + v * self.scale(j))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints_and_midpoint() {
        let rows = [[0.0], [5.0], [10.0]];
        let n = Normalizer::fit(rows.iter().map(|r| &r[..])).unwrap();
        let out: Vec<f64> = rows.iter().map(|r| n.normalize(r).unwrap()[0]).collect();
        assert_eq!(out, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn minimum_maps_to_zero_and_degenerate_round_trips_to_min() {
        let rows = [[1.0, 3.0, 7.0], [2.0, 3.0, 9.0]];
        let n = Normalizer::fit(rows.iter().map(|r| &r[..])).unwrap();
        assert_eq!(n.normalize(&[1.0, 3.0, 7.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(n.normalize(&[1.5, 100.0, 7.0]).unwrap()[1], 0.0);
        assert_eq!(n.denormalize(&[0.3, 0.7, 0.0]).unwrap()[1], 3.0);
    }

    #[test]
    fn arity_mismatch() {
        let n = Normalizer::fit([&[0.0, 1.0][..], &[1.0, 2.0][..]]).unwrap();
        assert!(matches!(n.normalize(&[1.0]), Err(Error::Domain(_))));
        assert!(matches!(n.denormalize(&[1.0, 2.0, 3.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn out_of_range_is_not_clipped() {
        let n = Normalizer::fit([&[0.0][..], &[10.0][..]]).unwrap();
        assert_eq!(n.normalize(&[15.0]).unwrap(), vec![1.5]);
        assert_eq!(n.normalize(&[-5.0]).unwrap(), vec![-0.5]);
    }

    proptest! {
        #[test]
        fn round_trip(lo in -1e3f64..1e3, width in 1e-3f64..1e3, t in -0.5f64..1.5) {
            let n = Normalizer::fit([&[lo][..], &[lo + width][..]]).unwrap();
            let x = lo + t * width;
            let back = n.denormalize(&n.normalize(&[x]).unwrap()).unwrap()[0];
            prop_assert!((back - x).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }
}
