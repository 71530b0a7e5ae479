use rand_distr::{Distribution, Normal};

use super::{check_layout, gaussian_blobs, GroupSpec, Objective, SyntheticDataset};
use crate::error::{Error, Result};
use crate::types::{GradientSet, ParamGroup, Rng};

/// Variance floor for the batch normalization denominator.
pub const VAR_FLOOR: f64 = 1e-5;

/// `x -> W1 x -> batch norm (no affine) -> ReLU -> W2 -> softmax cross-entropy`.
///
/// Each row of `W1` feeds a normalization, so the loss is invariant to
/// rescaling any row of `W1` by a positive constant.
#[derive(Debug, Clone)]
pub struct TinyMlp {
    data: SyntheticDataset,
    hidden: usize,
    classes: usize,
    layout: Vec<GroupSpec>,
}

struct Forward {
    n: usize,
    /// n x hidden, normalized pre-activations
    xhat: Vec<f64>,
    /// per hidden unit: std used, and whether the floor was hit
    std: Vec<(f64, bool)>,
    /// n x hidden
    act: Vec<f64>,
    /// n x classes, softmax probabilities
    probs: Vec<f64>,
    loss: f64,
}

impl TinyMlp {
    pub fn synthetic(
        d_in: usize,
        hidden: usize,
        classes: usize,
        n: usize,
        separation: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        if d_in < 2 || hidden < 2 || classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "tiny mlp needs d_in, hidden, classes >= 2; got {d_in}, {hidden}, {classes}"
            )));
        }
        let data = gaussian_blobs(n, d_in, classes, separation, rng)?;
        Self::from_dataset(data, hidden, classes)
    }

    pub fn from_dataset(data: SyntheticDataset, hidden: usize, classes: usize) -> Result<Self> {
        if data.labels.iter().any(|l| *l < 0 || *l as usize >= classes) {
            return Err(Error::InvalidArgument("label outside 0..classes".into()));
        }
        let layout = vec![
            GroupSpec::new("W1", hidden * data.dim, true),
            GroupSpec::new("W2", classes * hidden, false),
        ];
        Ok(Self { data, hidden, classes, layout })
    }

    pub fn dataset(&self) -> &SyntheticDataset {
        &self.data
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn input_dim(&self) -> usize {
        self.data.dim
    }

    fn rows(&self, batch: Option<&[usize]>) -> Result<Vec<usize>> {
        let rows: Vec<usize> = match batch {
            Some(b) => b.to_vec(),
            None => (0..self.data.len()).collect(),
        };
        if rows.len() < 2 {
            return Err(Error::InvalidArgument(
                "batch normalization needs a batch of at least 2 samples".into(),
            ));
        }
        Ok(rows)
    }

    fn forward(&self, params: &[ParamGroup], rows: &[usize]) -> Result<Forward> {
        check_layout(&self.layout, params)?;
        let (d, h, k) = (self.data.dim, self.hidden, self.classes);
        let w1 = &params[0].values;
        let w2 = &params[1].values;
        let n = rows.len();

        let mut z = vec![0.0; n * h];
        for (b, &i) in rows.iter().enumerate() {
            let x = self.data.row(i);
            for u in 0..h {
                z[b * h + u] = (0..d).map(|j| w1[u * d + j] * x[j]).sum();
            }
        }
        let mut std = Vec::with_capacity(h);
        let mut xhat = vec![0.0; n * h];
        for u in 0..h {
            let mean = (0..n).map(|b| z[b * h + u]).sum::<f64>() / n as f64;
            let var = (0..n).map(|b| (z[b * h + u] - mean).powi(2)).sum::<f64>() / n as f64;
            let floored = var < VAR_FLOOR;
            let s = var.max(VAR_FLOOR).sqrt();
            for b in 0..n {
                xhat[b * h + u] = (z[b * h + u] - mean) / s;
            }
            std.push((s, floored));
        }
        let act: Vec<f64> = xhat.iter().map(|v| v.max(0.0)).collect();

        let mut probs = vec![0.0; n * k];
        let mut loss = 0.0;
        for (b, &i) in rows.iter().enumerate() {
            let logits: Vec<f64> = (0..k)
                .map(|c| (0..h).map(|u| w2[c * h + u] * act[b * h + u]).sum())
                .collect();
            let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum_exp: f64 = logits.iter().map(|l| (l - top).exp()).sum();
            let lse = top + sum_exp.ln();
            loss += lse - logits[self.data.labels[i] as usize];
            for c in 0..k {
                probs[b * k + c] = (logits[c] - lse).exp();
            }
        }
        Ok(Forward { n, xhat, std, act, probs, loss: loss / n as f64 })
    }
}

impl Objective for TinyMlp {
    fn name(&self) -> &str {
        "mlp"
    }

    fn layout(&self) -> &[GroupSpec] {
        &self.layout
    }

    fn num_samples(&self) -> Option<usize> {
        Some(self.data.len())
    }

    fn eval(&self, params: &[ParamGroup], batch: Option<&[usize]>) -> Result<f64> {
        let rows = self.rows(batch)?;
        Ok(self.forward(params, &rows)?.loss)
    }

    fn eval_grad(
        &self,
        params: &[ParamGroup],
        batch: Option<&[usize]>,
    ) -> Result<(f64, GradientSet)> {
        let rows = self.rows(batch)?;
        let fw = self.forward(params, &rows)?;
        let (d, h, k, n) = (self.data.dim, self.hidden, self.classes, fw.n);
        let w2 = &params[1].values;
        let inv_n = 1.0 / n as f64;

        let mut dlogits = fw.probs.clone();
        for (b, &i) in rows.iter().enumerate() {
            dlogits[b * k + self.data.labels[i] as usize] -= 1.0;
        }
        dlogits.iter_mut().for_each(|v| *v *= inv_n);

        let mut gw2 = vec![0.0; k * h];
        let mut dxhat = vec![0.0; n * h];
        for b in 0..n {
            for c in 0..k {
                let dl = dlogits[b * k + c];
                for u in 0..h {
                    gw2[c * h + u] += dl * fw.act[b * h + u];
                    dxhat[b * h + u] += dl * w2[c * h + u];
                }
            }
        }
        for (dx, xh) in dxhat.iter_mut().zip(&fw.xhat) {
            if *xh <= 0.0 {
                *dx = 0.0;
            }
        }

        let mut gw1 = vec![0.0; h * d];
        for u in 0..h {
            let (s, floored) = fw.std[u];
            let mean_dx = (0..n).map(|b| dxhat[b * h + u]).sum::<f64>() * inv_n;
            let mean_dx_xh = if floored {
                0.0
            } else {
                (0..n).map(|b| dxhat[b * h + u] * fw.xhat[b * h + u]).sum::<f64>() * inv_n
            };
            for (b, &i) in rows.iter().enumerate() {
                let dz = (dxhat[b * h + u] - mean_dx - fw.xhat[b * h + u] * mean_dx_xh) / s;
                let x = self.data.row(i);
                for j in 0..d {
                    gw1[u * d + j] += dz * x[j];
                }
            }
        }
        Ok((fw.loss, GradientSet(vec![gw1, gw2])))
    }

    fn init_params(&self, rng: &mut Rng) -> Vec<ParamGroup> {
        let (d, h, k) = (self.data.dim, self.hidden, self.classes);
        let n1 = Normal::new(0.0, (1.0 / d as f64).sqrt()).expect("valid std");
        let n2 = Normal::new(0.0, (1.0 / h as f64).sqrt()).expect("valid std");
        vec![
            ParamGroup { name: "W1".into(), values: (0..h * d).map(|_| n1.sample(rng)).collect() },
            ParamGroup { name: "W2".into(), values: (0..k * h).map(|_| n2.sample(rng)).collect() },
        ]
    }

    fn accuracy(&self, params: &[ParamGroup]) -> Option<f64> {
        let rows: Vec<usize> = (0..self.data.len()).collect();
        let fw = self.forward(params, &rows).ok()?;
        let k = self.classes;
        let correct = rows
            .iter()
            .enumerate()
            .filter(|(b, &i)| {
                let p = &fw.probs[b * k..(b + 1) * k];
                let best = (0..k).max_by(|&a, &c| p[a].total_cmp(&p[c])).unwrap_or(0);
                best as i64 == self.data.labels[i]
            })
            .count();
        Some(correct as f64 / rows.len() as f64)
    }
}
