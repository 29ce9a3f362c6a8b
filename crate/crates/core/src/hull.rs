//! Extreme points of the convex hull of mean-variance pairs.
//!
//! Andrew's monotone chain over `(mean, variance)`. Collinear boundary points
//! are dropped and duplicated points are reported once, under their lowest
//! index. The orientation predicate is pluggable: floats use a scale-relative
//! tolerance, exact rationals use the exact sign.

use std::cmp::Ordering;

use num_rational::BigRational;
use num_traits::{Signed, Zero};

/// Relative tolerance on the float cross product.
pub const CROSS_TOL: f64 = 1e-12;

/// Coordinates the hull can be computed over.
pub trait HullScalar: Clone {
    fn cmp_coord(&self, other: &Self) -> Ordering;

    /// Sign of the cross product `(a - o) x (b - o)`; zero for collinear.
    fn orientation(o: (&Self, &Self), a: (&Self, &Self), b: (&Self, &Self)) -> Ordering;
}

impl HullScalar for f64 {
    fn cmp_coord(&self, other: &Self) -> Ordering {
        self.total_cmp(other)
    }

    fn orientation(o: (&f64, &f64), a: (&f64, &f64), b: (&f64, &f64)) -> Ordering {
        let (ax, ay) = (a.0 - o.0, a.1 - o.1);
        let (bx, by) = (b.0 - o.0, b.1 - o.1);
        let cross = ax * by - ay * bx;
        let scale = ax.hypot(ay) * bx.hypot(by);
        if cross.abs() <= CROSS_TOL * scale {
            Ordering::Equal
        } else {
            cross.partial_cmp(&0.0).unwrap_or(Ordering::Equal)
        }
    }
}

impl HullScalar for BigRational {
    fn cmp_coord(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }

    fn orientation(
        o: (&BigRational, &BigRational),
        a: (&BigRational, &BigRational),
        b: (&BigRational, &BigRational),
    ) -> Ordering {
        let cross = (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
        if cross.is_zero() {
            Ordering::Equal
        } else if cross.is_positive() {
            Ordering::Greater
        } else {
            Ordering::Less
        }
    }
}

/// Indices of the extreme points, ascending. Empty input yields an empty set.
pub fn extreme_points<T: HullScalar>(points: &[(T, T)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[i]
            .0
            .cmp_coord(&points[j].0)
            .then_with(|| points[i].1.cmp_coord(&points[j].1))
            .then(i.cmp(&j))
    });
    // duplicates are adjacent after sorting; the first carries the lowest index
    order.dedup_by(|later, first| {
        points[*later].0.cmp_coord(&points[*first].0) == Ordering::Equal
            && points[*later].1.cmp_coord(&points[*first].1) == Ordering::Equal
    });
    if order.len() <= 2 {
        let mut out = order;
        out.sort_unstable();
        return out;
    }

    let turns_left = |chain: &[usize], next: usize| {
        let (o, a) = (&points[chain[chain.len() - 2]], &points[chain[chain.len() - 1]]);
        let b = &points[next];
        T::orientation((&o.0, &o.1), (&a.0, &a.1), (&b.0, &b.1)) == Ordering::Greater
    };

    let mut lower: Vec<usize> = Vec::with_capacity(order.len());
    for &i in &order {
        while lower.len() >= 2 && !turns_left(&lower, i) {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::with_capacity(order.len());
    for &i in order.iter().rev() {
        while upper.len() >= 2 && !turns_left(&upper, i) {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    let mut out: Vec<usize> = lower.into_iter().chain(upper).collect();
    out.sort_unstable();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn midpoint_is_not_extreme() {
        assert_eq!(extreme_points(&[(1.0, 4.0), (0.0, 1.0), (0.5, 2.5)]), vec![0, 1]);
        let exact = [(rat(1, 1), rat(4, 1)), (rat(0, 1), rat(1, 1)), (rat(1, 2), rat(5, 2))];
        assert_eq!(extreme_points(&exact), vec![0, 1]);
    }

    #[test]
    fn singleton_and_empty() {
        assert_eq!(extreme_points(&[(1.0, 4.0)]), vec![0]);
        assert!(extreme_points::<f64>(&[]).is_empty());
    }

    #[test]
    fn triangle_with_interior_point() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.25, 0.25)];
        assert_eq!(extreme_points(&pts), vec![0, 1, 2]);
    }

    #[test]
    fn duplicates_keep_lowest_index() {
        let pts = [(0.0, 1.0), (1.0, 4.0), (0.0, 1.0), (1.0, 4.0)];
        assert_eq!(extreme_points(&pts), vec![0, 1]);
        assert_eq!(extreme_points(&[(2.0, 0.0), (2.0, 0.0)]), vec![0]);
    }

    #[test]
    fn collinear_run_keeps_endpoints() {
        let pts = [(0.5, 2.5), (0.0, 1.0), (0.25, 1.75), (1.0, 4.0), (0.75, 3.25)];
        assert_eq!(extreme_points(&pts), vec![1, 3]);
    }

    #[test]
    fn decimal_collinearity_within_tolerance() {
        // 0.1/0.3 are not exactly representable; the relative tolerance absorbs it
        let pts = [(0.1, 0.3), (0.2, 0.6), (0.3, 0.9)];
        assert_eq!(extreme_points(&pts), vec![0, 2]);
    }
}
