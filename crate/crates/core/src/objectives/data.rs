use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::norm;
use crate::types::Rng;

/// Row-major feature matrix with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub dim: usize,
    pub features: Vec<f64>,
    pub labels: Vec<i64>,
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Feature columns `f0..f{d-1}` followed by `label`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..self.dim).map(|j| format!("f{j}")).collect();
        header.push("label".into());
        out.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.row(i).iter().map(|x| format!("{x:e}")).collect();
            rec.push(self.labels[i].to_string());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let dim = rdr
            .headers()?
            .len()
            .checked_sub(1)
            .filter(|d| *d > 0)
            .ok_or_else(|| Error::InvalidArgument("dataset csv needs feature and label columns".into()))?;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            for j in 0..dim {
                features.push(parse_field(&rec[j])?);
            }
            labels.push(
                rec[dim]
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad label `{}`", &rec[dim])))?,
            );
        }
        Ok(Self { dim, features, labels })
    }
}

fn parse_field(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad number `{s}`")))
}

/// `n` points in `classes` isotropic unit-variance clusters. Cluster centres
/// sit at `separation / 2` from the origin along random unit directions
/// (antipodal for two classes). Labels cycle `0..classes`.
pub fn gaussian_blobs(
    n: usize,
    dim: usize,
    classes: usize,
    separation: f64,
    rng: &mut Rng,
) -> Result<SyntheticDataset> {
    if n < 2 || dim == 0 || classes < 2 {
        return Err(Error::InvalidArgument(format!(
            "blobs need n >= 2, dim >= 1, classes >= 2; got {n}, {dim}, {classes}"
        )));
    }
    let random_unit = |rng: &mut Rng| {
        let mut u: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let l = norm(&u);
        u.iter_mut().for_each(|x| *x /= l);
        u
    };
    let centres: Vec<Vec<f64>> = if classes == 2 {
        let u = random_unit(rng);
        vec![u.clone(), u.iter().map(|x| -x).collect()]
    } else {
        (0..classes).map(|_| random_unit(rng)).collect()
    };
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        for &mu in &centres[c] {
            let z: f64 = StandardNormal.sample(rng);
            features.push(0.5 * separation * mu + z);
        }
        labels.push(c as i64);
    }
    Ok(SyntheticDataset { dim, features, labels })
}

/// Uniform sampling without replacement within an epoch; the last batch of
/// an epoch may be short.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl BatchSampler {
    pub fn new(n: usize, batch_size: usize) -> Result<Self> {
        if n == 0 || batch_size == 0 {
            return Err(Error::InvalidArgument("sampler needs n >= 1 and batch_size >= 1".into()));
        }
        Ok(Self { order: (0..n).collect(), batch_size: batch_size.min(n), pos: n })
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }

    pub fn next_batch(&mut self, rng: &mut Rng) -> Vec<usize> {
        if self.pos >= self.order.len() {
            self.order.shuffle(rng);
            self.pos = 0;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let batch = self.order[self.pos..end].to_vec();
        self.pos = end;
        batch
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::seeded_rng;

    #[test]
    fn sampler_covers_each_index_once_per_epoch() {
        let mut rng = seeded_rng(0);
        let mut s = BatchSampler::new(10, 3).unwrap();
        assert_eq!(s.batches_per_epoch(), 4);
        let mut seen: Vec<usize> = (0..4).flat_map(|_| s.next_batch(&mut rng)).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn csv_round_trip() {
        let ds = gaussian_blobs(12, 3, 2, 4.0, &mut seeded_rng(2)).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = SyntheticDataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn blobs_reject_degenerate_sizes() {
        assert!(gaussian_blobs(1, 3, 2, 4.0, &mut seeded_rng(0)).is_err());
        assert!(gaussian_blobs(10, 3, 1, 4.0, &mut seeded_rng(0)).is_err());
    }
}
