//! Tangent-space projection, cosine similarity and the projection trigger.

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `|a.b| / (|a| |b|)`, clamped to [0, 1]. Zero vectors give 0.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "cosine_similarity: dimension mismatch");
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(a, b).abs() / (na * nb)).min(1.0)
}

/// `x - <theta_hat, x> theta_hat` with `theta_hat = theta / |theta|`.
pub fn project_tangent(theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if theta.len() != x.len() {
        return Err(Error::ShapeMismatch(format!(
            "project_tangent: theta dim {} != x dim {}",
            theta.len(),
            x.len()
        )));
    }
    let n = norm(theta);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroTheta);
    }
    let unit: Vec<f64> = theta.iter().map(|t| t / n).collect();
    let radial = dot(&unit, x);
    Ok(x.iter().zip(&unit).map(|(xi, ui)| xi - radial * ui).collect())
}

/// Which threshold the trigger compares the cosine against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriggerRule {
    /// `delta * eta_t / sqrt(dim)`
    LrScaled,
    /// `delta / sqrt(dim)`, the fixed AdamP rule.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionDecision {
    pub trigger_value: f64,
    pub threshold: f64,
    pub projected: bool,
}

fn decide(theta: &[f64], grad: &[f64], threshold: f64) -> ProjectionDecision {
    let trigger_value = cosine_similarity(theta, grad);
    // a zero group has no radial direction to remove
    let projected = norm(theta) > 0.0 && trigger_value < threshold;
    ProjectionDecision { trigger_value, threshold, projected }
}

/// Learning-rate-scaled trigger: project iff `cos(theta, g) < delta * eta_t / sqrt(dim)`.
pub fn projection_condition(
    theta: &[f64],
    grad: &[f64],
    delta: f64,
    eta_t: f64,
) -> ProjectionDecision {
    let threshold = delta * eta_t / (theta.len() as f64).sqrt();
    decide(theta, grad, threshold)
}

pub fn projection_condition_with(
    rule: TriggerRule,
    theta: &[f64],
    grad: &[f64],
    delta: f64,
    eta_t: f64,
) -> ProjectionDecision {
    match rule {
        TriggerRule::LrScaled => projection_condition(theta, grad, delta, eta_t),
        TriggerRule::Fixed => decide(theta, grad, delta / (theta.len() as f64).sqrt()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert!((cosine_similarity(&[1.0, 1.0], &[-2.0, -2.0]) - 1.0).abs() < 1e-15);
        assert!((cosine_similarity(&[3.0, 4.0], &[4.0, 3.0]) - 0.96).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 2.0]), 0.0);
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_tangent(&[0.0, 2.0], &[3.0, 4.0]).unwrap(), vec![3.0, 0.0]);
        assert_eq!(project_tangent(&[1.0, 0.0], &[5.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let r = project_tangent(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((r[0] - 0.5).abs() < 1e-15 && (r[1] + 0.5).abs() < 1e-15);
        assert!(matches!(project_tangent(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroTheta)));
    }

    #[test]
    fn trigger_examples() {
        let d = projection_condition(&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0], 0.1, 1e-3);
        assert_eq!(d.trigger_value, 0.0);
        assert!((d.threshold - 5e-5).abs() < 1e-18);
        assert!(d.projected);

        let d = projection_condition(&[1.0, 1.0], &[1.0, 1.0], 0.1, 1e-3);
        assert!(!d.projected);

        let d = projection_condition(&[1.0, 0.0], &[1e-5, 1.0], 0.1, 1.0);
        assert!((d.trigger_value - 1e-5).abs() < 1e-12);
        assert!((d.threshold - 0.1 / 2f64.sqrt()).abs() < 1e-15);
        assert!(d.projected);

        // zero theta never projects
        assert!(!projection_condition(&[0.0, 0.0], &[1.0, 0.0], 0.1, 1.0).projected);
    }

    #[test]
    fn trigger_tie_is_not_projected() {
        // cos = 1 and threshold = 1 exactly
        let d = decide(&[1.0], &[2.0], 1.0);
        assert_eq!(d.trigger_value, d.threshold);
        assert!(!d.projected);
    }

    #[test]
    fn fixed_rule_ignores_lr() {
        let a = projection_condition_with(TriggerRule::Fixed, &[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0], 0.1, 1e-3);
        let b = projection_condition_with(TriggerRule::Fixed, &[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0], 0.1, 0.5);
        assert_eq!(a.threshold, 0.05);
        assert_eq!(a.threshold, b.threshold);
    }

    #[test]
    fn threshold_tightens_with_lr() {
        let theta = [0.3, -0.2, 0.9];
        let g = [0.1, 0.4, 0.0];
        let mut prev = f64::INFINITY;
        for t in 1..2000u32 {
            let eta = 1e-3 / (t as f64).powf(0.75);
            let d = projection_condition(&theta, &g, 0.1, eta);
            assert!(d.threshold <= prev && d.threshold > 0.0);
            prev = d.threshold;
        }
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..64).prop_flat_map(|n| {
            (
                prop::collection::vec(-10.0f64..10.0, n),
                prop::collection::vec(-10.0f64..10.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn cosine_in_unit_interval((a, b) in vec_pair()) {
            let c = cosine_similarity(&a, &b);
            prop_assert!((0.0..=1.0).contains(&c));
        }

        #[test]
        fn projection_is_orthogonal_and_contracts((theta, x) in vec_pair()) {
            prop_assume!(norm(&theta) > 1e-3 && norm(&x) > 1e-3);
            let r = project_tangent(&theta, &x).unwrap();
            prop_assert!(dot(&theta, &r).abs() / (norm(&theta) * norm(&x)) < 1e-12);
            prop_assert!(norm(&r) <= norm(&x) * (1.0 + 1e-15));
        }
    }
}
