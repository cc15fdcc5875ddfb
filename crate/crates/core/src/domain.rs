use serde::{Deserialize, Serialize};

use crate::field::Vector;

/// Region of the chart where a scenario's data is trusted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Domain {
    Unbounded,
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Disc { radius: f64 },
    Annulus { inner: f64, outer: f64 },
    /// Stereographic polar cap: the chart disc whose boundary is the parallel at `min_height`.
    SphereChart { min_height: f64 },
}

impl Domain {
    pub fn contains(&self, x: &Vector) -> bool {
        if x.iter().any(|c| !c.is_finite()) {
            return false;
        }
        match self {
            Domain::Unbounded => true,
            Domain::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(c, (lo, hi))| *c >= *lo && *c <= *hi),
            Domain::Disc { radius } => x.norm() <= *radius,
            Domain::Annulus { inner, outer } => {
                let r = x.norm();
                r >= *inner && r <= *outer
            }
            Domain::SphereChart { min_height } => x.norm() <= sphere_chart_radius(*min_height),
        }
    }

    /// Euclidean radius of a ball around the origin containing the domain, if bounded.
    pub fn extent(&self) -> Option<f64> {
        match self {
            Domain::Unbounded => None,
            Domain::Box { lower, upper } => Some(
                lower
                    .iter()
                    .zip(upper)
                    .map(|(l, u)| l.abs().max(u.abs()).powi(2))
                    .sum::<f64>()
                    .sqrt(),
            ),
            Domain::Disc { radius } => Some(*radius),
            Domain::Annulus { outer, .. } => Some(*outer),
            Domain::SphereChart { min_height } => Some(sphere_chart_radius(*min_height)),
        }
    }
}

/// Stereographic radius of the parallel at height `z` (projection from the opposite pole).
pub fn sphere_chart_radius(z: f64) -> f64 {
    ((1.0 - z) / (1.0 + z)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership() {
        let p = Vector::from_vec(vec![0.6, 0.6]);
        assert!(Domain::Disc { radius: 0.9 }.contains(&p));
        assert!(!Domain::Disc { radius: 0.8 }.contains(&p));
        assert!(!Domain::Annulus { inner: 0.9, outer: 2.0 }.contains(&p));
        let b = Domain::Box { lower: vec![-1.0, 0.0], upper: vec![1.0, 0.5] };
        assert!(!b.contains(&p));
        assert!(Domain::SphereChart { min_height: 0.0 }.contains(&p));
        assert!((sphere_chart_radius(0.0) - 1.0).abs() < 1e-15);
        assert!(!Domain::Unbounded.contains(&Vector::from_vec(vec![f64::NAN])));
    }
}
