use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::config::{ConfigMap, KNOWN_KEYS};
use super::run::{run, RunResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub value: String,
    pub result: RunResult,
}

/// Runs in the order the values were given.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: String,
    pub runs: Vec<SweepRun>,
}

fn file_safe(value: &str) -> String {
    value
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

/// One run per value of `axis`, dispatched to at most `workers` threads
/// (all cores when `None`). With `out_dir`, each run writes
/// `<axis>-<value>.csv` there and the summary goes to `summary.csv`.
pub fn sweep(
    base: &ConfigMap,
    axis: &str,
    values: &[String],
    workers: Option<usize>,
    out_dir: Option<&Path>,
) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    if !KNOWN_KEYS.contains(&axis) {
        return Err(Error::Config(format!("unknown sweep axis `{axis}`")));
    }
    // every config is validated before any run starts
    let configs = values
        .iter()
        .map(|v| {
            let mut m = base.with_override(axis, v)?;
            match out_dir {
                Some(dir) => {
                    let p = dir.join(format!("{}-{}.csv", file_safe(axis), file_safe(v)));
                    m.set("output.path", &p.to_string_lossy())?;
                }
                None => m.remove("output.path"),
            }
            m.resolve()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<RunResult>> = pool.install(|| configs.par_iter().map(run).collect());

    let runs = values
        .iter()
        .zip(results)
        .map(|(v, r)| r.map(|result| SweepRun { value: v.clone(), result }))
        .collect::<Result<Vec<_>>>()?;
    let out = SweepResult { axis: axis.to_owned(), runs };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        out.write_summary(std::io::BufWriter::new(std::fs::File::create(dir.join("summary.csv"))?))?;
    }
    Ok(out)
}

impl SweepResult {
    /// Indices of runs ordered by final loss; ties keep configuration order.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.runs.len()).collect();
        idx.sort_by(|&a, &b| {
            self.runs[a]
                .result
                .summary
                .final_loss
                .total_cmp(&self.runs[b].result.summary.final_loss)
        });
        idx
    }

    pub fn all_pass(&self) -> bool {
        self.runs.iter().all(|r| r.result.report.all_pass())
    }

    /// One row per run sorted by final loss. Wall time is left out so the
    /// file is reproducible.
    pub fn write_summary<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            self.axis.as_str(),
            "final_loss",
            "final_accuracy",
            "min_grad_norm_sq",
            "diagnostics_pass",
        ])?;
        for i in self.ranking() {
            let r = &self.runs[i];
            let s = &r.result.summary;
            out.write_record([
                r.value.clone(),
                format!("{:e}", s.final_loss),
                s.final_accuracy.map(|a| format!("{a:e}")).unwrap_or_default(),
                format!("{:e}", s.min_grad_norm_sq),
                r.result.report.all_pass().to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value_matches_plain_run() {
        let base = ConfigMap::parse("budget.steps = 40").unwrap();
        let s = sweep(&base, "hp.p", &["0.125".into()], Some(1), None).unwrap();
        let direct = run(&base.with_override("hp.p", "0.125").unwrap().resolve().unwrap()).unwrap();
        assert_eq!(s.runs[0].result.records, direct.records);
    }

    #[test]
    fn results_follow_value_order_regardless_of_workers() {
        let base = ConfigMap::parse("budget.steps = 30").unwrap();
        let values: Vec<String> = ["0.5", "0.1", "0.25", "0.2"].map(String::from).to_vec();
        let a = sweep(&base, "hp.p", &values, Some(4), None).unwrap();
        let b = sweep(&base, "hp.p", &values, Some(1), None).unwrap();
        for (x, y) in a.runs.iter().zip(&b.runs) {
            assert_eq!(x.value, y.value);
            assert_eq!(x.result.records, y.result.records);
        }
        let order: Vec<&str> = a.runs.iter().map(|r| r.value.as_str()).collect();
        assert_eq!(order, ["0.5", "0.1", "0.25", "0.2"]);
    }

    #[test]
    fn rejects_empty_values_and_unknown_axis() {
        let base = ConfigMap::default();
        assert!(sweep(&base, "hp.p", &[], None, None).is_err());
        assert!(sweep(&base, "hp.gamma", &["1".into()], None, None).is_err());
        assert!(sweep(&base, "hp.p", &["0.9".into()], None, None).is_err());
    }
}
