use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::schedule::{LrSchedule, PSchedule};
use crate::error::{Error, Result};
use crate::objectives::{LogisticRegression, Objective, Quadratic, Rosenbrock, ScaleInvariant, TinyMlp};
use crate::optimizers::{EpsMode, OptimizerKind, StepOptions, TriggerLr};
use crate::types::{seeded_rng, Beta1Mode, HyperParams};

/// Every key a config file may set.
pub const KNOWN_KEYS: &[&str] = &[
    "optimizer.kind",
    "hp.eta0",
    "hp.beta1",
    "hp.beta2",
    "hp.lambda",
    "hp.delta",
    "hp.epsilon",
    "hp.p",
    "hp.weight_decay",
    "hp.momentum",
    "hp.beta1t_mode",
    "opt.eps_mode",
    "opt.projection",
    "opt.trigger_lr",
    "opt.wd_skip_projected",
    "objective.name",
    "objective.dim",
    "objective.condition",
    "objective.n",
    "objective.hidden",
    "objective.classes",
    "objective.separation",
    "objective.noise",
    "objective.init_offset",
    "objective.steps_per_epoch",
    "objective.data_seed",
    "schedule.family",
    "schedule.a",
    "schedule.factor",
    "schedule.epochs",
    "schedule.every",
    "p_schedule.epoch",
    "p_schedule.p",
    "budget.steps",
    "budget.epochs",
    "batch_size",
    "seed",
    "eval.window",
    "eval.every",
    "diagnostics.lemmas",
    "output.path",
];

/// Flat `key = value` settings with dotted keys. Later assignments win.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
            })?;
            map.set(k.trim(), v.trim())?;
        }
        Ok(map)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown config key `{key}`")));
        }
        self.entries.insert(key.to_owned(), value.to_owned());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{pair}` is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn remove(&mut self, key: &str) {
        self.entries.remove(key);
    }

    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        let mut out = self.clone();
        out.set(key, value)?;
        Ok(out)
    }

    fn parse_value<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
            })
            .transpose()
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parse_value(key)?.unwrap_or(default))
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true" | "1" | "on" | "yes") => Ok(true),
            Some("false" | "0" | "off" | "no") => Ok(false),
            Some(v) => Err(Error::Config(format!("`{key}`: expected a boolean, got `{v}`"))),
        }
    }

    /// Validates every field and fills defaults. No computation happens here
    /// beyond parsing.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let optimizer: OptimizerKind = self.or("optimizer.kind", OptimizerKind::PadamP)?;
        let base = optimizer.default_hyperparams();
        let beta1t_mode = match self.get("hp.beta1t_mode") {
            None | Some("constant") => Beta1Mode::Constant,
            Some("geometric") => Beta1Mode::Geometric,
            Some(v) => return Err(Error::Config(format!("unknown beta1t mode `{v}`"))),
        };
        let hp = HyperParams {
            eta0: self.or("hp.eta0", base.eta0)?,
            beta1: self.or("hp.beta1", base.beta1)?,
            beta2: self.or("hp.beta2", base.beta2)?,
            lambda: self.or("hp.lambda", base.lambda)?,
            delta: self.or("hp.delta", base.delta)?,
            epsilon: self.or("hp.epsilon", base.epsilon)?,
            p: self.or("hp.p", base.p)?,
            weight_decay: self.or("hp.weight_decay", base.weight_decay)?,
            momentum: self.or("hp.momentum", base.momentum)?,
            beta1t_mode,
        };

        let defaults = StepOptions::default();
        let opts = StepOptions {
            eps_mode: match self.get("opt.eps_mode") {
                None | Some("inside") => EpsMode::Inside,
                Some("outside") => EpsMode::Outside,
                Some(v) => return Err(Error::Config(format!("unknown eps mode `{v}`"))),
            },
            trigger_lr: match self.get("opt.trigger_lr") {
                None | Some("scheduled") => TriggerLr::Scheduled,
                Some("base") => TriggerLr::Base,
                Some(v) => return Err(Error::Config(format!("unknown trigger lr `{v}`"))),
            },
            projection: self.flag("opt.projection", defaults.projection)?,
            wd_skip_projected: self.flag("opt.wd_skip_projected", defaults.wd_skip_projected)?,
        };

        let seed: u64 = self.or("seed", 0)?;
        let objective = self.resolve_objective(seed)?;

        let epochs = match self.get("schedule.epochs") {
            None => vec![50, 100, 150],
            Some(s) => parse_list(s).map_err(|_| {
                Error::Config(format!("`schedule.epochs`: expected comma-separated epochs, got `{s}`"))
            })?,
        };
        let schedule = LrSchedule::parse_family(
            self.get("schedule.family").unwrap_or("piecewise"),
            hp.eta0,
            self.or("schedule.a", 0.75)?,
            self.or("schedule.factor", 0.1)?,
            epochs,
            self.or("schedule.every", 50)?,
        )?;

        let p_schedule = match (
            self.parse_value::<u64>("p_schedule.epoch")?,
            self.parse_value::<f64>("p_schedule.p")?,
        ) {
            (None, None) => None,
            (Some(e), Some(p)) => Some(PSchedule::new(e, p)?),
            _ => {
                return Err(Error::Config(
                    "p_schedule.epoch and p_schedule.p must be set together".into(),
                ))
            }
        };

        let budget = match (
            self.parse_value::<u64>("budget.steps")?,
            self.parse_value::<u64>("budget.epochs")?,
        ) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("set budget.steps or budget.epochs, not both".into()))
            }
            (Some(s), None) => Budget::Steps(s),
            (None, Some(e)) => Budget::Epochs(e),
            (None, None) => Budget::Steps(1000),
        };

        let cfg = ExperimentConfig {
            optimizer,
            hp,
            opts,
            objective,
            schedule,
            p_schedule,
            budget,
            batch_size: self.or("batch_size", 128)?,
            seed,
            eval_window: self.or("eval.window", 32)?,
            eval_every: self.or("eval.every", 50)?,
            lemma_checks: self.flag("diagnostics.lemmas", true)?,
            output_path: self.get("output.path").map(PathBuf::from),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_objective(&self, seed: u64) -> Result<ObjectiveConfig> {
        let kind: ObjectiveKind = self.or("objective.name", ObjectiveKind::Quadratic)?;
        Ok(ObjectiveConfig {
            kind,
            dim: self.or("objective.dim", kind.default_dim())?,
            condition: self.or("objective.condition", 100.0)?,
            n: self.or("objective.n", 512)?,
            hidden: self.or("objective.hidden", 16)?,
            classes: self.or("objective.classes", 2)?,
            separation: self.or("objective.separation", 4.0)?,
            noise: self.or("objective.noise", 0.0)?,
            init_offset: self.or("objective.init_offset", 1.0)?,
            steps_per_epoch: self.or("objective.steps_per_epoch", 100)?,
            data_seed: self.or("objective.data_seed", seed)?,
        })
    }
}

impl fmt::Display for ConfigMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

fn parse_list(s: &str) -> std::result::Result<Vec<u64>, std::num::ParseIntError> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    Quadratic,
    Rosenbrock,
    ScaleInvariant,
    Logistic,
    Mlp,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 5] = [
        ObjectiveKind::Quadratic,
        ObjectiveKind::Rosenbrock,
        ObjectiveKind::ScaleInvariant,
        ObjectiveKind::Logistic,
        ObjectiveKind::Mlp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveKind::Quadratic => "quadratic",
            ObjectiveKind::Rosenbrock => "rosenbrock",
            ObjectiveKind::ScaleInvariant => "scale_invariant",
            ObjectiveKind::Logistic => "logistic",
            ObjectiveKind::Mlp => "mlp",
        }
    }

    fn default_dim(self) -> usize {
        match self {
            ObjectiveKind::Quadratic => 20,
            ObjectiveKind::Rosenbrock => 2,
            ObjectiveKind::ScaleInvariant => 64,
            ObjectiveKind::Logistic | ObjectiveKind::Mlp => 10,
        }
    }

    /// Accepted relative error of the analytic gradient against central
    /// differences. The MLP's ReLU kinks make differences less exact.
    pub fn gradient_tolerance(self) -> f64 {
        match self {
            ObjectiveKind::Mlp => 1e-4,
            _ => 1e-6,
        }
    }

    pub fn uses_data(self) -> bool {
        matches!(self, ObjectiveKind::Logistic | ObjectiveKind::Mlp)
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ObjectiveKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown objective `{s}`")))
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Objective name plus the parameters each family reads. `dim` is the input
/// dimension for dataset objectives.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveConfig {
    pub kind: ObjectiveKind,
    pub dim: usize,
    pub condition: f64,
    pub n: usize,
    pub hidden: usize,
    pub classes: usize,
    pub separation: f64,
    /// Std of additive Gaussian gradient noise on analytic objectives.
    pub noise: f64,
    pub init_offset: f64,
    /// Epoch length for analytic objectives.
    pub steps_per_epoch: u64,
    pub data_seed: u64,
}

impl ObjectiveConfig {
    pub fn build(&self) -> Result<Box<dyn Objective>> {
        let mut rng = seeded_rng(self.data_seed);
        Ok(match self.kind {
            ObjectiveKind::Quadratic => Box::new(
                Quadratic::conditioned(self.dim, self.condition, &mut rng)?
                    .with_init_offset(self.init_offset),
            ),
            ObjectiveKind::Rosenbrock => Box::new(Rosenbrock::new()),
            ObjectiveKind::ScaleInvariant => Box::new(ScaleInvariant::new(self.dim, &mut rng)?),
            ObjectiveKind::Logistic => {
                Box::new(LogisticRegression::synthetic(self.dim, self.n, self.separation, &mut rng)?)
            }
            ObjectiveKind::Mlp => Box::new(TinyMlp::synthetic(
                self.dim,
                self.hidden,
                self.classes,
                self.n,
                self.separation,
                &mut rng,
            )?),
        })
    }

    /// Steps per epoch: `ceil(N / batch)` on data, the configured count otherwise.
    pub fn steps_per_epoch(&self, batch_size: usize) -> u64 {
        if self.kind.uses_data() {
            self.n.div_ceil(batch_size.min(self.n)) as u64
        } else {
            self.steps_per_epoch
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    Steps(u64),
    Epochs(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub optimizer: OptimizerKind,
    pub hp: HyperParams,
    pub opts: StepOptions,
    pub objective: ObjectiveConfig,
    pub schedule: LrSchedule,
    pub p_schedule: Option<PSchedule>,
    pub budget: Budget,
    pub batch_size: usize,
    pub seed: u64,
    /// Fresh minibatches per gradient-norm estimate.
    pub eval_window: usize,
    /// Steps between gradient-norm estimates.
    pub eval_every: u64,
    pub lemma_checks: bool,
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.hp
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.schedule.validate()?;
        if self.schedule.eta0() != self.hp.eta0 {
            return Err(Error::Config("schedule and hp.eta0 disagree".into()));
        }
        if self.total_steps() == 0 {
            return Err(Error::Config("budget must be at least one step".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.eval_window == 0 || self.eval_every == 0 {
            return Err(Error::Config("eval.window and eval.every must be positive".into()));
        }
        let o = &self.objective;
        if o.kind == ObjectiveKind::Mlp && self.batch_size.min(o.n) < 2 {
            return Err(Error::Config("mlp needs batch_size >= 2".into()));
        }
        if o.steps_per_epoch == 0 {
            return Err(Error::Config("objective.steps_per_epoch must be positive".into()));
        }
        if !(o.noise >= 0.0 && o.noise.is_finite()) {
            return Err(Error::Config(format!("objective.noise must be >= 0, got {}", o.noise)));
        }
        if o.noise > 0.0 && o.kind.uses_data() {
            return Err(Error::Config("objective.noise applies to analytic objectives only".into()));
        }
        Ok(())
    }

    pub fn steps_per_epoch(&self) -> u64 {
        self.objective.steps_per_epoch(self.batch_size)
    }

    pub fn total_steps(&self) -> u64 {
        match self.budget {
            Budget::Steps(s) => s,
            Budget::Epochs(e) => e * self.steps_per_epoch(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_optimizer_kind() {
        let cfg = ConfigMap::parse("optimizer.kind = adam\n").unwrap().resolve().unwrap();
        assert_eq!(cfg.hp.beta2, 0.99);
        assert_eq!(cfg.hp.weight_decay, 1e-4);
        assert_eq!(cfg.batch_size, 128);
        let sgdm = ConfigMap::parse("optimizer.kind = sgdm").unwrap().resolve().unwrap();
        assert_eq!(sgdm.hp.eta0, 0.1);
        assert_eq!(sgdm.schedule.eta0(), 0.1);
    }

    #[test]
    fn comments_and_overrides() {
        let mut m = ConfigMap::parse("# header\nhp.p = 0.125 # inline\n\nseed=7\n").unwrap();
        m.set_pair("seed=9").unwrap();
        let cfg = m.resolve().unwrap();
        assert_eq!(cfg.hp.p, 0.125);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.objective.data_seed, 9);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for text in [
            "budget.steps = 0",
            "optimizer.kind = lion",
            "objective.name = resnet",
            "hp.p = 0.75",
            "hp.momentum = 1.5",
            "unknown.key = 1",
            "p_schedule.epoch = 10",
            "budget.steps = 10\nbudget.epochs = 1",
            "schedule.family = cosine",
            "objective.name = mlp\nbatch_size = 1",
            "objective.name = logistic\nobjective.noise = 0.1",
            "opt.projection = maybe",
            "no equals sign",
        ] {
            let r = ConfigMap::parse(text).and_then(|m| m.resolve());
            assert!(matches!(r, Err(Error::Config(_))), "{text} gave {r:?}");
        }
    }

    #[test]
    fn epoch_length_follows_dataset_size() {
        let cfg = ConfigMap::parse("objective.name = logistic\nbatch_size = 32\nbudget.epochs = 3")
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(cfg.steps_per_epoch(), 16);
        assert_eq!(cfg.total_steps(), 48);
        let q = ConfigMap::parse("budget.epochs = 2").unwrap().resolve().unwrap();
        assert_eq!(q.total_steps(), 200);
    }

    #[test]
    fn display_round_trips() {
        let m = ConfigMap::parse("seed = 3\nhp.eta0 = 0.01\nobjective.name = mlp").unwrap();
        assert_eq!(ConfigMap::parse(&m.to_string()).unwrap(), m);
    }
}
