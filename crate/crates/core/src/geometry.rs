//! Axis-aligned feasible boxes and the weighted projection onto them.
//!
//! For a diagonal metric `M = diag(w)` with `w > 0`, minimizing
//! `sum_i w_i (x_i - y_i)^2` over a box separates per coordinate, and each
//! one-dimensional problem is solved by clamping `y_i` into `[lo_i, hi_i]`
//! regardless of `w_i`. [`project_box`] therefore clamps, and the metric is
//! only validated for shape.

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl FeasibleBox {
    /// Per-coordinate bounds. Infinite bounds are allowed; NaN and `lo > hi` are not.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() {
            return Err(Error::invalid("box", "must have at least one coordinate"));
        }
        for (i, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if l.is_nan() || h.is_nan() || l > h || l == f64::INFINITY || h == f64::NEG_INFINITY {
                return Err(Error::invalid(
                    "box",
                    format!("coordinate {i} has invalid interval [{l}, {h}]"),
                ));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The same interval on every coordinate.
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn unbounded(dim: usize) -> Self {
        Self {
            lo: vec![f64::NEG_INFINITY; dim],
            hi: vec![f64::INFINITY; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.iter().chain(&self.hi).all(|b| b.is_finite())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    /// First coordinate of `x` outside the box, as an error.
    pub fn check_contains(&self, x: &[f64]) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        for (coord, (&value, (&lo, &hi))) in x.iter().zip(self.lo.iter().zip(&self.hi)).enumerate() {
            if !(lo <= value && value <= hi) {
                return Err(Error::OutsideBox { coord, value, lo, hi });
            }
        }
        Ok(())
    }

    /// Plain Euclidean clamp.
    pub fn clamp(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (l, h))| v.clamp(*l, *h))
            .collect()
    }

    /// In-place clamp.
    pub fn clamp_in_place(&self, y: &mut [f64]) {
        for (v, (l, h)) in y.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*l, *h);
        }
    }
}

/// Diagonal of a positive-definite metric.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalMetric {
    weights: Vec<f64>,
}

impl DiagonalMetric {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::invalid(
                "metric",
                format!("weight {i} must be positive and finite, got {w}"),
            ));
        }
        Ok(Self { weights })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            weights: vec![1.0; dim],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

/// `argmin_{x in box} ||M^{1/2}(x - y)||` for diagonal `M`.
pub fn project_box(y: &[f64], feasible: &FeasibleBox, metric: &DiagonalMetric) -> Result<Vec<f64>> {
    check_dim(feasible.dim(), y.len())?;
    check_dim(feasible.dim(), metric.dim())?;
    Ok(feasible.clamp(y))
}

/// `sqrt(sum_i w_i v_i^2)`.
pub fn weighted_norm(metric: &DiagonalMetric, v: &[f64]) -> Result<f64> {
    check_dim(metric.dim(), v.len())?;
    Ok(metric.weights.iter().zip(v).map(|(w, x)| w * x * x).sum::<f64>().sqrt())
}

/// `max_i (hi_i - lo_i)`, infinite when any coordinate is unbounded.
pub fn box_diameter_inf(feasible: &FeasibleBox) -> f64 {
    feasible
        .lo
        .iter()
        .zip(&feasible.hi)
        .map(|(l, h)| h - l)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metric(w: &[f64]) -> DiagonalMetric {
        DiagonalMetric::new(w.to_vec()).unwrap()
    }

    #[test]
    fn projection_examples() {
        let b = FeasibleBox::uniform(1, -2.0, 2.0).unwrap();
        assert_eq!(project_box(&[3.0], &b, &metric(&[5.0])).unwrap(), vec![2.0]);
        assert_eq!(project_box(&[0.5], &b, &metric(&[1.0])).unwrap(), vec![0.5]);
        let b = FeasibleBox::uniform(2, 0.0, 1.0).unwrap();
        assert_eq!(
            project_box(&[-1.0, 4.0], &b, &metric(&[2.0, 7.0])).unwrap(),
            vec![0.0, 1.0]
        );
    }

    #[test]
    fn projection_dimension_mismatch() {
        let b = FeasibleBox::uniform(2, 0.0, 1.0).unwrap();
        assert!(matches!(
            project_box(&[0.0], &b, &metric(&[1.0, 1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            project_box(&[0.0, 0.0], &b, &metric(&[1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(weighted_norm(&metric(&[1.0, 1.0]), &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(weighted_norm(&metric(&[4.0]), &[3.0]).unwrap(), 6.0);
        assert_eq!(weighted_norm(&metric(&[2.0, 2.0]), &[0.0, 0.0]).unwrap(), 0.0);
        assert!(weighted_norm(&metric(&[2.0]), &[0.0, 0.0]).is_err());
    }

    #[test]
    fn diameter_examples() {
        assert_eq!(box_diameter_inf(&FeasibleBox::uniform(1, -2.0, 2.0).unwrap()), 4.0);
        let b = FeasibleBox::new(vec![-1.0, 0.0], vec![1.0, 10.0]).unwrap();
        assert_eq!(box_diameter_inf(&b), 10.0);
        assert_eq!(box_diameter_inf(&FeasibleBox::uniform(1, 0.0, 0.0).unwrap()), 0.0);
        assert_eq!(box_diameter_inf(&FeasibleBox::unbounded(3)), f64::INFINITY);
        let half = FeasibleBox::new(vec![0.0, f64::NEG_INFINITY], vec![1.0, 0.0]).unwrap();
        assert_eq!(box_diameter_inf(&half), f64::INFINITY);
    }

    #[test]
    fn invalid_boxes_and_metrics() {
        assert!(FeasibleBox::new(vec![1.0], vec![0.0]).is_err());
        assert!(FeasibleBox::new(vec![f64::NAN], vec![0.0]).is_err());
        assert!(FeasibleBox::new(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(FeasibleBox::new(vec![], vec![]).is_err());
        assert!(DiagonalMetric::new(vec![1.0, 0.0]).is_err());
        assert!(DiagonalMetric::new(vec![f64::INFINITY]).is_err());
        assert!(DiagonalMetric::new(vec![-1.0]).is_err());
    }

    #[test]
    fn contains_reports_coordinate() {
        let b = FeasibleBox::uniform(2, -1.0, 1.0).unwrap();
        assert!(b.contains(&[0.0, 1.0]));
        assert_eq!(
            b.check_contains(&[0.0, 1.5]),
            Err(Error::OutsideBox {
                coord: 1,
                value: 1.5,
                lo: -1.0,
                hi: 1.0
            })
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn box_metric_points(
        ) -> impl Strategy<Value = (FeasibleBox, DiagonalMetric, DiagonalMetric, Vec<f64>, Vec<f64>)> {
            (1usize..8).prop_flat_map(|d| {
                (
                    prop::collection::vec((-10.0f64..10.0, 0.0f64..10.0), d),
                    prop::collection::vec(1e-3f64..1e3, d),
                    prop::collection::vec(1e-3f64..1e3, d),
                    prop::collection::vec(-30.0f64..30.0, d),
                    prop::collection::vec(-30.0f64..30.0, d),
                )
                    .prop_map(|(iv, q, q2, z1, z2)| {
                        let lo = iv.iter().map(|(l, _)| *l).collect();
                        let hi = iv.iter().map(|(l, w)| l + w).collect();
                        (
                            FeasibleBox::new(lo, hi).unwrap(),
                            DiagonalMetric::new(q).unwrap(),
                            DiagonalMetric::new(q2).unwrap(),
                            z1,
                            z2,
                        )
                    })
            })
        }

        proptest! {
            #[test]
            fn projection_is_non_expansive((b, q, _q2, z1, z2) in box_metric_points()) {
                let u1 = project_box(&z1, &b, &q).unwrap();
                let u2 = project_box(&z2, &b, &q).unwrap();
                let du: Vec<f64> = u1.iter().zip(&u2).map(|(a, c)| a - c).collect();
                let dz: Vec<f64> = z1.iter().zip(&z2).map(|(a, c)| a - c).collect();
                prop_assert!(weighted_norm(&q, &du).unwrap() <= weighted_norm(&q, &dz).unwrap() + 1e-12);
            }

            #[test]
            fn projection_ignores_metric_and_is_idempotent((b, q, q2, z1, _z2) in box_metric_points()) {
                let u = project_box(&z1, &b, &q).unwrap();
                prop_assert_eq!(&u, &project_box(&z1, &b, &q2).unwrap());
                prop_assert_eq!(&u, &project_box(&u, &b, &q).unwrap());
                prop_assert!(b.contains(&u));
            }
        }
    }
}
