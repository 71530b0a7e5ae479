use rand_distr::{Distribution, StandardNormal, Uniform};

use super::{check_layout, GroupSpec, Objective};
use crate::error::{Error, Result};
use crate::geometry::{dot, norm};
use crate::types::{GradientSet, ParamGroup, Rng};

/// `f(x) = 1/2 x^T A x - b^T x` with diagonal positive `A`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    diag: Vec<f64>,
    b: Vec<f64>,
    init_offset: f64,
    layout: Vec<GroupSpec>,
}

impl Quadratic {
    pub fn new(diag: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || diag.len() != b.len() {
            return Err(Error::InvalidArgument("quadratic: diag and b must be non-empty and equal length".into()));
        }
        if let Some(d) = diag.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "quadratic: diagonal entries must be positive, got {d}"
            )));
        }
        let layout = vec![GroupSpec::new("x", diag.len(), false)];
        Ok(Self { diag, b, init_offset: 1.0, layout })
    }

    /// Log-spaced curvatures from 1 to `condition` and a random linear term.
    pub fn conditioned(dim: usize, condition: f64, rng: &mut Rng) -> Result<Self> {
        if dim == 0 || !(condition >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "quadratic: need dim >= 1 and condition >= 1, got {dim}, {condition}"
            )));
        }
        let diag = (0..dim)
            .map(|i| {
                let frac = if dim == 1 { 0.0 } else { i as f64 / (dim - 1) as f64 };
                condition.powf(frac)
            })
            .collect();
        let b = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        Self::new(diag, b)
    }

    /// Initial points are drawn as `x* + offset * z` with standard normal `z`.
    pub fn with_init_offset(mut self, offset: f64) -> Self {
        self.init_offset = offset;
        self
    }

    pub fn minimizer(&self) -> Vec<f64> {
        self.b.iter().zip(&self.diag).map(|(b, a)| b / a).collect()
    }
}

impl Objective for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn layout(&self) -> &[GroupSpec] {
        &self.layout
    }

    fn eval(&self, params: &[ParamGroup], _batch: Option<&[usize]>) -> Result<f64> {
        check_layout(&self.layout, params)?;
        let x = &params[0].values;
        Ok(x.iter()
            .zip(&self.diag)
            .zip(&self.b)
            .map(|((x, a), b)| 0.5 * a * x * x - b * x)
            .sum())
    }

    fn eval_grad(
        &self,
        params: &[ParamGroup],
        batch: Option<&[usize]>,
    ) -> Result<(f64, GradientSet)> {
        let f = self.eval(params, batch)?;
        let x = &params[0].values;
        let g = x.iter().zip(&self.diag).zip(&self.b).map(|((x, a), b)| a * x - b).collect();
        Ok((f, GradientSet(vec![g])))
    }

    fn init_params(&self, rng: &mut Rng) -> Vec<ParamGroup> {
        let x = self
            .minimizer()
            .into_iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(rng);
                m + self.init_offset * z
            })
            .collect();
        vec![ParamGroup { name: "x".into(), values: x }]
    }

    fn smoothness(&self) -> Option<f64> {
        self.diag.iter().copied().reduce(f64::max)
    }
}

/// Two-dimensional Rosenbrock valley `(1-x)^2 + 100 (y - x^2)^2`.
#[derive(Debug, Clone)]
pub struct Rosenbrock {
    layout: Vec<GroupSpec>,
}

impl Rosenbrock {
    pub fn new() -> Self {
        Self { layout: vec![GroupSpec::new("xy", 2, false)] }
    }
}

impl Default for Rosenbrock {
    fn default() -> Self {
        Self::new()
    }
}

impl Objective for Rosenbrock {
    fn name(&self) -> &str {
        "rosenbrock"
    }

    fn layout(&self) -> &[GroupSpec] {
        &self.layout
    }

    fn eval(&self, params: &[ParamGroup], _batch: Option<&[usize]>) -> Result<f64> {
        check_layout(&self.layout, params)?;
        let (x, y) = (params[0].values[0], params[0].values[1]);
        Ok((1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2))
    }

    fn eval_grad(
        &self,
        params: &[ParamGroup],
        batch: Option<&[usize]>,
    ) -> Result<(f64, GradientSet)> {
        let f = self.eval(params, batch)?;
        let (x, y) = (params[0].values[0], params[0].values[1]);
        let dx = -2.0 * (1.0 - x) - 400.0 * x * (y - x * x);
        let dy = 200.0 * (y - x * x);
        Ok((f, GradientSet(vec![vec![dx, dy]])))
    }

    fn init_params(&self, _rng: &mut Rng) -> Vec<ParamGroup> {
        vec![ParamGroup { name: "xy".into(), values: vec![-1.2, 1.0] }]
    }
}

/// `f(w) = -<u, w_hat> + kappa/2 * sum_i c_i w_hat_i^2` with `w_hat = w / |w|`.
///
/// Depends on `w` only through its direction, so `f(c w) = f(w)` for `c > 0`
/// and the gradient is orthogonal to `w`.
#[derive(Debug, Clone)]
pub struct ScaleInvariant {
    target: Vec<f64>,
    curvature: Vec<f64>,
    kappa: f64,
    layout: Vec<GroupSpec>,
}

impl ScaleInvariant {
    pub fn new(dim: usize, rng: &mut Rng) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "scale-invariant objective needs dim >= 2, got {dim}"
            )));
        }
        let mut target: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&target);
        target.iter_mut().for_each(|t| *t /= n);
        let spread = Uniform::new(0.5, 2.0).expect("valid range");
        let curvature = (0..dim).map(|_| spread.sample(rng)).collect();
        Ok(Self {
            target,
            curvature,
            kappa: 1.0,
            layout: vec![GroupSpec::new("w", dim, true)],
        })
    }

    fn unit(&self, params: &[ParamGroup]) -> Result<(Vec<f64>, f64)> {
        check_layout(&self.layout, params)?;
        let w = &params[0].values;
        let n = norm(w);
        if n == 0.0 {
            return Err(Error::ZeroTheta);
        }
        Ok((w.iter().map(|x| x / n).collect(), n))
    }

    fn on_sphere(&self, u: &[f64]) -> f64 {
        let quad: f64 = u.iter().zip(&self.curvature).map(|(x, c)| c * x * x).sum();
        -dot(&self.target, u) + 0.5 * self.kappa * quad
    }
}

impl Objective for ScaleInvariant {
    fn name(&self) -> &str {
        "scale_invariant"
    }

    fn layout(&self) -> &[GroupSpec] {
        &self.layout
    }

    fn eval(&self, params: &[ParamGroup], _batch: Option<&[usize]>) -> Result<f64> {
        let (u, _) = self.unit(params)?;
        Ok(self.on_sphere(&u))
    }

    fn eval_grad(
        &self,
        params: &[ParamGroup],
        _batch: Option<&[usize]>,
    ) -> Result<(f64, GradientSet)> {
        let (u, n) = self.unit(params)?;
        let f = self.on_sphere(&u);
        // chain rule through w_hat: (I - u u^T) grad_g(u) / |w|
        let outer: Vec<f64> = (0..u.len())
            .map(|i| -self.target[i] + self.kappa * self.curvature[i] * u[i])
            .collect();
        let radial = dot(&u, &outer);
        let g = outer.iter().zip(&u).map(|(o, ui)| (o - radial * ui) / n).collect();
        Ok((f, GradientSet(vec![g])))
    }

    fn init_params(&self, rng: &mut Rng) -> Vec<ParamGroup> {
        let w = (0..self.target.len()).map(|_| StandardNormal.sample(rng)).collect();
        vec![ParamGroup { name: "w".into(), values: w }]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{finite_difference_grad, relative_error};
    use crate::types::seeded_rng;

    fn group(name: &str, v: Vec<f64>) -> Vec<ParamGroup> {
        vec![ParamGroup::new(name, v).unwrap()]
    }

    #[test]
    fn quadratic_examples() {
        let q = Quadratic::new(vec![1.0], vec![0.0]).unwrap();
        let (f, g) = q.eval_grad(&group("x", vec![3.0]), None).unwrap();
        assert_eq!(f, 4.5);
        assert_eq!(g.0[0], vec![3.0]);

        let q = Quadratic::new(vec![1.0, 10.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(q.grad(&group("x", vec![1.0, 1.0]), None).unwrap().0[0], vec![1.0, 10.0]);
        assert_eq!(q.smoothness(), Some(10.0));

        let q = Quadratic::new(vec![2.0, 4.0], vec![1.0, -2.0]).unwrap();
        let star = group("x", q.minimizer());
        assert!(q.grad(&star, None).unwrap().norm_sq() == 0.0);

        assert!(Quadratic::new(vec![1.0, 0.0], vec![0.0, 0.0]).is_err());
        assert!(Quadratic::new(vec![-1.0], vec![0.0]).is_err());
    }

    #[test]
    fn conditioned_quadratic_has_requested_spread() {
        let q = Quadratic::conditioned(20, 100.0, &mut seeded_rng(0)).unwrap();
        let lo = q.diag.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = q.diag.iter().copied().fold(0.0, f64::max);
        assert!((hi / lo - 100.0).abs() < 1e-9);
    }

    #[test]
    fn rosenbrock_examples() {
        let r = Rosenbrock::new();
        let (f, g) = r.eval_grad(&group("xy", vec![1.0, 1.0]), None).unwrap();
        assert_eq!((f, g.0[0].clone()), (0.0, vec![0.0, 0.0]));
        let (f, g) = r.eval_grad(&group("xy", vec![0.0, 0.0]), None).unwrap();
        assert_eq!((f, g.0[0].clone()), (1.0, vec![-2.0, 0.0]));
        assert_eq!(r.eval(&group("xy", vec![-1.0, 1.0]), None).unwrap(), 4.0);
    }

    #[test]
    fn scale_invariant_examples() {
        let mut rng = seeded_rng(4);
        let s = ScaleInvariant::new(16, &mut rng).unwrap();
        let p = s.init_params(&mut rng);
        let doubled = group("w", p[0].values.iter().map(|x| 2.0 * x).collect());
        assert_eq!(s.eval(&p, None).unwrap(), s.eval(&doubled, None).unwrap());

        let g = s.grad(&p, None).unwrap();
        let rel = dot(&p[0].values, &g.0[0]).abs() / (norm(&p[0].values) * norm(&g.0[0]));
        assert!(rel < 1e-12, "{rel}");

        for _ in 0..100 {
            let p = s.init_params(&mut rng);
            let fd = finite_difference_grad(&s, &p, None, 1e-5).unwrap();
            let an = s.grad(&p, None).unwrap();
            assert!(relative_error(&an, &fd) < 1e-5);
        }

        assert!(matches!(s.eval(&group("w", vec![0.0; 16]), None), Err(Error::ZeroTheta)));
        assert!(ScaleInvariant::new(1, &mut rng).is_err());
    }
}
