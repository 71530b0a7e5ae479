//! Differentiable test problems with analytic gradients.

mod analytic;
mod data;
mod logistic;
mod mlp;

pub use analytic::{Quadratic, Rosenbrock, ScaleInvariant};
pub use data::{gaussian_blobs, BatchSampler, SyntheticDataset};
pub use logistic::LogisticRegression;
pub use mlp::TinyMlp;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::norm;
use crate::types::{GradientSet, ParamGroup, Rng};

/// Name, size, and whether the group is expected to be scale-invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSpec {
    pub name: String,
    pub dim: usize,
    pub scale_invariant: bool,
}

impl GroupSpec {
    pub fn new(name: &str, dim: usize, scale_invariant: bool) -> Self {
        Self { name: name.to_owned(), dim, scale_invariant }
    }
}

/// A (possibly stochastic) loss over named parameter groups.
///
/// `batch` selects sample indices for dataset objectives; `None` means the
/// whole dataset. Analytic objectives ignore it.
pub trait Objective: Send + Sync {
    fn name(&self) -> &str;

    fn layout(&self) -> &[GroupSpec];

    /// Number of data samples, `None` for analytic objectives.
    fn num_samples(&self) -> Option<usize> {
        None
    }

    fn eval(&self, params: &[ParamGroup], batch: Option<&[usize]>) -> Result<f64>;

    fn eval_grad(&self, params: &[ParamGroup], batch: Option<&[usize]>)
        -> Result<(f64, GradientSet)>;

    fn grad(&self, params: &[ParamGroup], batch: Option<&[usize]>) -> Result<GradientSet> {
        self.eval_grad(params, batch).map(|(_, g)| g)
    }

    /// Gradient of the expected loss over all data.
    fn full_grad(&self, params: &[ParamGroup]) -> Result<GradientSet> {
        self.grad(params, None)
    }

    fn init_params(&self, rng: &mut Rng) -> Vec<ParamGroup>;

    /// Classification accuracy on the full data, where defined.
    fn accuracy(&self, _params: &[ParamGroup]) -> Option<f64> {
        None
    }

    /// Smoothness constant, where known analytically.
    fn smoothness(&self) -> Option<f64> {
        None
    }
}

pub(crate) fn check_layout(layout: &[GroupSpec], params: &[ParamGroup]) -> Result<()> {
    if layout.len() != params.len() {
        return Err(Error::ShapeMismatch(format!(
            "objective expects {} groups, got {}",
            layout.len(),
            params.len()
        )));
    }
    for (s, p) in layout.iter().zip(params) {
        if s.dim != p.dim() {
            return Err(Error::ShapeMismatch(format!(
                "group `{}` expects dim {}, got {}",
                s.name,
                s.dim,
                p.dim()
            )));
        }
    }
    Ok(())
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn finite_difference_grad(
    obj: &dyn Objective,
    params: &[ParamGroup],
    batch: Option<&[usize]>,
    h: f64,
) -> Result<GradientSet> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step h must be positive, got {h}")));
    }
    let mut work = params.to_vec();
    let mut out = GradientSet::zeros_like(params);
    for gi in 0..params.len() {
        for j in 0..params[gi].dim() {
            let x = params[gi].values[j];
            work[gi].values[j] = x + h;
            let fp = obj.eval(&work, batch)?;
            work[gi].values[j] = x - h;
            let fm = obj.eval(&work, batch)?;
            work[gi].values[j] = x;
            if !(fp.is_finite() && fm.is_finite()) {
                return Err(Error::NonFiniteGradient { group: params[gi].name.clone() });
            }
            out.0[gi][j] = (fp - fm) / (2.0 * h);
        }
    }
    Ok(out)
}

/// `|a - b| / max(|a|, |b|)` over the flattened gradient sets, 0 when both vanish.
pub fn relative_error(a: &GradientSet, b: &GradientSet) -> f64 {
    let fa: Vec<f64> = a.0.iter().flatten().copied().collect();
    let fb: Vec<f64> = b.0.iter().flatten().copied().collect();
    let diff: Vec<f64> = fa.iter().zip(&fb).map(|(x, y)| x - y).collect();
    let scale = norm(&fa).max(norm(&fb));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// A point with independent standard normal coordinates in the objective's layout.
pub fn random_point(obj: &dyn Objective, rng: &mut Rng) -> Vec<ParamGroup> {
    obj.layout()
        .iter()
        .map(|s| ParamGroup {
            name: s.name.clone(),
            values: (0..s.dim).map(|_| StandardNormal.sample(rng)).collect(),
        })
        .collect()
}

/// Relative error between the analytic and central-difference gradients
/// at `points` random points, on the full data.
pub fn gradient_check(
    obj: &dyn Objective,
    points: usize,
    h: f64,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    (0..points)
        .map(|_| {
            let p = random_point(obj, rng);
            let fd = finite_difference_grad(obj, &p, None, h)?;
            Ok(relative_error(&obj.grad(&p, None)?, &fd))
        })
        .collect()
}
