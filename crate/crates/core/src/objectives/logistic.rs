use super::{check_layout, gaussian_blobs, GroupSpec, Objective, SyntheticDataset};
use crate::error::{Error, Result};
use crate::geometry::dot;
use crate::types::{GradientSet, ParamGroup, Rng};

/// Binary logistic regression, `mean log(1 + exp(-y w.x))` with `y = +-1`.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    data: SyntheticDataset,
    layout: Vec<GroupSpec>,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticRegression {
    /// Two unit-variance blobs whose centres are `separation` apart.
    pub fn synthetic(d: usize, n: usize, separation: f64, rng: &mut Rng) -> Result<Self> {
        if d == 0 || n < 2 {
            return Err(Error::InvalidArgument(format!(
                "logistic regression needs d >= 1 and N >= 2, got {d}, {n}"
            )));
        }
        Self::from_dataset(gaussian_blobs(n, d, 2, separation, rng)?)
    }

    /// Labels 0 and 1 map to +1 and -1.
    pub fn from_dataset(data: SyntheticDataset) -> Result<Self> {
        if data.len() < 2 {
            return Err(Error::InvalidArgument("logistic regression needs N >= 2".into()));
        }
        if data.labels.iter().any(|l| *l != 0 && *l != 1) {
            return Err(Error::InvalidArgument("logistic labels must be 0 or 1".into()));
        }
        let layout = vec![GroupSpec::new("w", data.dim, false)];
        Ok(Self { data, layout })
    }

    pub fn dataset(&self) -> &SyntheticDataset {
        &self.data
    }

    fn sign(&self, i: usize) -> f64 {
        if self.data.labels[i] == 0 {
            1.0
        } else {
            -1.0
        }
    }

    fn indices<'a>(&self, batch: Option<&'a [usize]>) -> Box<dyn Iterator<Item = usize> + 'a> {
        match batch {
            Some(b) => Box::new(b.iter().copied()),
            None => Box::new(0..self.data.len()),
        }
    }

    fn batch_len(&self, batch: Option<&[usize]>) -> Result<usize> {
        let n = batch.map_or(self.data.len(), <[usize]>::len);
        if n == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        Ok(n)
    }
}

impl Objective for LogisticRegression {
    fn name(&self) -> &str {
        "logistic"
    }

    fn layout(&self) -> &[GroupSpec] {
        &self.layout
    }

    fn num_samples(&self) -> Option<usize> {
        Some(self.data.len())
    }

    fn eval(&self, params: &[ParamGroup], batch: Option<&[usize]>) -> Result<f64> {
        check_layout(&self.layout, params)?;
        let n = self.batch_len(batch)?;
        let w = &params[0].values;
        let total: f64 = self
            .indices(batch)
            .map(|i| softplus(-self.sign(i) * dot(w, self.data.row(i))))
            .sum();
        Ok(total / n as f64)
    }

    fn eval_grad(
        &self,
        params: &[ParamGroup],
        batch: Option<&[usize]>,
    ) -> Result<(f64, GradientSet)> {
        check_layout(&self.layout, params)?;
        let n = self.batch_len(batch)? as f64;
        let w = &params[0].values;
        let mut g = vec![0.0; w.len()];
        let mut loss = 0.0;
        for i in self.indices(batch) {
            let x = self.data.row(i);
            let y = self.sign(i);
            let margin = y * dot(w, x);
            loss += softplus(-margin);
            let coef = -y * sigmoid(-margin) / n;
            g.iter_mut().zip(x).for_each(|(gj, xj)| *gj += coef * xj);
        }
        Ok((loss / n, GradientSet(vec![g])))
    }

    fn init_params(&self, _rng: &mut Rng) -> Vec<ParamGroup> {
        vec![ParamGroup { name: "w".into(), values: vec![0.0; self.data.dim] }]
    }

    fn accuracy(&self, params: &[ParamGroup]) -> Option<f64> {
        let w = &params.first()?.values;
        let correct = (0..self.data.len())
            .filter(|&i| self.sign(i) * dot(w, self.data.row(i)) > 0.0)
            .count();
        Some(correct as f64 / self.data.len() as f64)
    }
}
