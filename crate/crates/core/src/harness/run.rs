use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::index::sample;
use rand_distr::{Distribution, Normal};

use super::config::ExperimentConfig;
use super::schedule::{schedule_lr, schedule_p};
use super::telemetry::{write_convergence, write_telemetry, IDENTITY_TOLERANCE};
use crate::diagnostics::{
    validate_schedule, ConvergenceTrace, DiagnosticsReport, LemmaMargins, LemmaTracker,
    MomentSnapshot, ROUNDING_SLACK,
};
use crate::error::{Error, Result};
use crate::objectives::{BatchSampler, Objective};
use crate::optimizers::{Optimizer, OptimizerKind};
use crate::types::{seeded_rng, Beta1Mode, GradientSet, ParamGroup, Rng, StepRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Full-data loss at the final parameters.
    pub final_loss: f64,
    pub final_accuracy: Option<f64>,
    /// Running minimum of the gradient-norm estimate.
    pub min_grad_norm_sq: f64,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub records: Vec<StepRecord>,
    pub convergence: ConvergenceTrace,
    /// Moment-bound slacks; `None` when the optimizer keeps no second moment
    /// or the checks are disabled.
    pub lemmas: Option<LemmaMargins>,
    pub report: DiagnosticsReport,
    pub summary: RunSummary,
    pub final_params: Vec<ParamGroup>,
}

/// Independent random streams derived from the run seed.
struct Streams {
    init: Rng,
    batches: Rng,
    eval: Rng,
    noise: Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let stream = |s: u64| {
            let mut r = seeded_rng(seed);
            r.set_stream(s);
            r
        };
        Self { init: stream(1), batches: stream(2), eval: stream(3), noise: stream(4) }
    }
}

fn add_noise(g: &mut GradientSet, noise: Option<&Normal<f64>>, rng: &mut Rng) {
    if let Some(n) = noise {
        g.0.iter_mut().flatten().for_each(|x| *x += n.sample(rng));
    }
}

/// Mean of `|g|^2` over `window` fresh minibatches (or noisy gradient draws),
/// the exact squared norm for a noiseless analytic objective.
fn estimate_grad_norm_sq(
    obj: &dyn Objective,
    params: &[ParamGroup],
    cfg: &ExperimentConfig,
    noise: Option<&Normal<f64>>,
    rng: &mut Rng,
) -> Result<f64> {
    match (obj.num_samples(), noise) {
        (Some(n), _) => {
            let b = cfg.batch_size.min(n);
            let mut total = 0.0;
            for _ in 0..cfg.eval_window {
                let batch = sample(rng, n, b).into_vec();
                total += obj.grad(params, Some(&batch))?.norm_sq();
            }
            Ok(total / cfg.eval_window as f64)
        }
        (None, Some(_)) => {
            let exact = obj.full_grad(params)?;
            let mut total = 0.0;
            for _ in 0..cfg.eval_window {
                let mut g = exact.clone();
                add_noise(&mut g, noise, rng);
                total += g.norm_sq();
            }
            Ok(total / cfg.eval_window as f64)
        }
        (None, None) => Ok(obj.full_grad(params)?.norm_sq()),
    }
}

/// Power the second-moment denominator is raised to for this optimizer.
fn denominator_power(kind: OptimizerKind, p_now: f64) -> f64 {
    match kind {
        OptimizerKind::PadamP | OptimizerKind::Padam => p_now,
        _ => 0.5,
    }
}

/// Runs one experiment to completion. The trajectory depends only on the
/// config, so reruns are bit-identical.
pub fn run(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let started = Instant::now();
    let obj = cfg.objective.build()?;
    let mut rng = Streams::new(cfg.seed);
    let mut params = obj.init_params(&mut rng.init);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.hp, cfg.opts, &params)?;
    let noise = (cfg.objective.noise > 0.0)
        .then(|| Normal::new(0.0, cfg.objective.noise).expect("noise std is validated"));
    let mut sampler = obj
        .num_samples()
        .map(|n| BatchSampler::new(n, cfg.batch_size))
        .transpose()?;
    let spe = cfg.steps_per_epoch();
    let total = cfg.total_steps();
    let dims: Vec<usize> = params.iter().map(ParamGroup::dim).collect();
    let mut tracker = (cfg.lemma_checks && cfg.optimizer.is_adaptive())
        .then(|| LemmaTracker::new(&dims, cfg.hp.beta2, cfg.hp.epsilon));

    let mut records = Vec::with_capacity(total as usize);
    let mut convergence = ConvergenceTrace::default();
    for t in 1..=total {
        let epoch = (t - 1) / spe;
        let eta_t = schedule_lr(t, epoch, &cfg.schedule);
        let p_now = schedule_p(epoch, cfg.hp.p, cfg.p_schedule.as_ref());

        if t == 1 || t % cfg.eval_every == 0 || t == total {
            let e = estimate_grad_norm_sq(obj.as_ref(), &params, cfg, noise.as_ref(), &mut rng.eval)?;
            convergence.push(t, e);
        }

        let batch = sampler.as_mut().map(|s| s.next_batch(&mut rng.batches));
        let (loss, mut grads) = obj.eval_grad(&params, batch.as_deref())?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step: t });
        }
        add_noise(&mut grads, noise.as_ref(), &mut rng.noise);

        let m_prev = tracker.as_ref().map(|_| opt.state.m.clone());
        let out = opt.step(&params, &grads, eta_t, p_now)?;
        if let (Some(tr), Some(m_prev)) = (tracker.as_mut(), m_prev.as_ref()) {
            let p = denominator_power(cfg.optimizer, p_now);
            for (i, group) in params.iter().enumerate() {
                let snap = MomentSnapshot {
                    theta: Some(&group.values),
                    grad: &grads.0[i],
                    m: &opt.state.m[i],
                    m_prev: &m_prev[i],
                    v: &opt.state.v[i],
                };
                tr.observe(i, snap, p);
            }
        }
        let mut record = out.record;
        record.epoch = epoch;
        record.loss = loss;
        records.push(record);
        params = out.new_params;
    }

    let lemmas = tracker.map(|t| t.margins());
    let report = build_report(cfg, &records, &convergence, lemmas.as_ref())?;
    let summary = RunSummary {
        final_loss: obj.eval(&params, None)?,
        final_accuracy: obj.accuracy(&params),
        min_grad_norm_sq: convergence.final_min().unwrap_or(f64::NAN),
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    let result = RunResult { records, convergence, lemmas, report, summary, final_params: params };
    if let Some(path) = &cfg.output_path {
        write_outputs(&result, path)?;
    }
    Ok(result)
}

fn build_report(
    cfg: &ExperimentConfig,
    records: &[StepRecord],
    convergence: &ConvergenceTrace,
    lemmas: Option<&LemmaMargins>,
) -> Result<DiagnosticsReport> {
    let mut report = DiagnosticsReport::default();
    let c1 = records.iter().map(|r| r.grad_norm_sq.sqrt()).fold(0.0, f64::max);
    report.push("gradient_bound_c1", c1, c1.is_finite());
    let ok = convergence.is_non_increasing();
    report.push("running_min_non_increasing", f64::from(u8::from(ok)), ok);

    let residuals: Vec<f64> = records.iter().filter_map(|r| r.lemma2_residual).collect();
    if !residuals.is_empty() {
        let worst = residuals.iter().copied().fold(0.0, f64::max);
        report.push("first_moment_identity_residual", worst, worst < IDENTITY_TOLERANCE);
    }
    if let Some(m) = lemmas {
        for (name, slack) in m.named() {
            report.push(name, slack, slack >= -ROUNDING_SLACK);
        }
    }

    let verdict = validate_schedule(&cfg.schedule.family())?;
    report.push_info("schedule_satisfies_assumptions", f64::from(u8::from(verdict.satisfies_assumptions())));
    let geometric = cfg.hp.beta1t_mode == Beta1Mode::Geometric && cfg.hp.lambda < 1.0;
    report.push_info("beta1_decays_geometrically", f64::from(u8::from(geometric)));
    if let Some(m) = convergence.final_min() {
        report.push_info("final_running_min_grad_norm_sq", m);
    }
    Ok(report)
}

/// `path` gets the telemetry; the diagnostics report and gradient-norm
/// checkpoints go next to it as `<stem>.diagnostics.csv` and
/// `<stem>.convergence.csv`.
pub fn write_outputs(result: &RunResult, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_telemetry(&result.records, BufWriter::new(File::create(path)?))?;
    result
        .report
        .write_csv(BufWriter::new(File::create(sibling(path, "diagnostics"))?))?;
    write_convergence(&result.convergence, BufWriter::new(File::create(sibling(path, "convergence"))?))?;
    Ok(())
}

/// `dir/run.csv` -> `dir/run.<tag>.csv`
pub fn sibling(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{tag}.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ConfigMap;

    fn cfg(text: &str) -> ExperimentConfig {
        ConfigMap::parse(text).unwrap().resolve().unwrap()
    }

    #[test]
    fn record_count_equals_budget() {
        let r = run(&cfg("budget.steps = 37\neval.every = 10")).unwrap();
        assert_eq!(r.records.len(), 37);
        let ts: Vec<u64> = r.convergence.points.iter().map(|p| p.t).collect();
        assert_eq!(ts, vec![1, 10, 20, 30, 37]);
        assert!(r.report.all_pass(), "{:?}", r.report);
    }

    #[test]
    fn epochs_advance_with_dataset_passes() {
        let r = run(&cfg("objective.name = logistic\nobjective.n = 64\nbatch_size = 16\nbudget.epochs = 2"))
            .unwrap();
        assert_eq!(r.records.len(), 8);
        assert_eq!(r.records[3].epoch, 0);
        assert_eq!(r.records[4].epoch, 1);
    }

    #[test]
    fn sgdm_records_carry_no_moment_checks() {
        let r = run(&cfg("optimizer.kind = sgdm\nhp.eta0 = 0.01\nbudget.steps = 20")).unwrap();
        assert!(r.lemmas.is_none());
        assert!(r.records.iter().all(|x| x.lemma2_residual.is_none()));
    }

    #[test]
    fn divergence_reports_the_step() {
        let c = cfg("objective.name = rosenbrock\noptimizer.kind = sgdm\nhp.eta0 = 0.5\nbudget.steps = 200\nhp.weight_decay = 0");
        match run(&c) {
            Err(Error::NonFiniteLoss { step }) | Err(Error::NonFiniteParams { step, .. }) => {
                assert!(step > 1 && step <= 200)
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn noise_changes_estimates_but_stays_deterministic() {
        let c = cfg("objective.noise = 0.1\nbudget.steps = 60");
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.convergence, b.convergence);
    }
}
