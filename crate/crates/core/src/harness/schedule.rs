use crate::diagnostics::ScheduleFamily;
use crate::error::{Error, Result};
use crate::types::validate_power;

/// Learning-rate schedule. Power-law decay is indexed by step, the decay
/// presets by epoch.
#[derive(Debug, Clone, PartialEq)]
pub enum LrSchedule {
    Constant { eta0: f64 },
    /// `eta0 / t^a`
    PowerLaw { eta0: f64, a: f64 },
    /// Multiply by `factor` once each listed epoch is reached.
    Piecewise { eta0: f64, factor: f64, epochs: Vec<u64> },
    /// Multiply by `factor` every `every` epochs.
    StepEvery { eta0: f64, factor: f64, every: u64 },
}

impl LrSchedule {
    pub fn parse_family(
        family: &str,
        eta0: f64,
        a: f64,
        factor: f64,
        epochs: Vec<u64>,
        every: u64,
    ) -> Result<Self> {
        let s = match family {
            "constant" => LrSchedule::Constant { eta0 },
            "power_law" => LrSchedule::PowerLaw { eta0, a },
            "piecewise" => LrSchedule::Piecewise { eta0, factor, epochs },
            "step_every" => LrSchedule::StepEvery { eta0, factor, every },
            other => return Err(Error::Config(format!("unknown schedule family `{other}`"))),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            LrSchedule::Constant { .. } => "constant",
            LrSchedule::PowerLaw { .. } => "power_law",
            LrSchedule::Piecewise { .. } => "piecewise",
            LrSchedule::StepEvery { .. } => "step_every",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let eta0 = self.eta0();
        if !(eta0 > 0.0 && eta0.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {eta0}")));
        }
        match self {
            LrSchedule::PowerLaw { a, .. } if !(*a >= 0.0) => {
                Err(Error::Config(format!("power-law exponent must be >= 0, got {a}")))
            }
            LrSchedule::Piecewise { factor, .. } | LrSchedule::StepEvery { factor, .. }
                if !(*factor > 0.0 && *factor <= 1.0) =>
            {
                Err(Error::Config(format!("decay factor must lie in (0,1], got {factor}")))
            }
            LrSchedule::StepEvery { every: 0, .. } => {
                Err(Error::Config("decay interval must be >= 1 epoch".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn eta0(&self) -> f64 {
        match self {
            LrSchedule::Constant { eta0 }
            | LrSchedule::PowerLaw { eta0, .. }
            | LrSchedule::Piecewise { eta0, .. }
            | LrSchedule::StepEvery { eta0, .. } => *eta0,
        }
    }

    /// Symbolic family for the admissibility check.
    pub fn family(&self) -> ScheduleFamily {
        match self {
            LrSchedule::Constant { eta0 } => ScheduleFamily::Constant { c: *eta0 },
            LrSchedule::PowerLaw { eta0, a } => ScheduleFamily::PowerLaw { c: *eta0, a: *a },
            LrSchedule::Piecewise { eta0, factor, epochs } => ScheduleFamily::Piecewise {
                c: *eta0,
                factor: *factor,
                points: epochs.clone(),
            },
            LrSchedule::StepEvery { eta0, factor, every } => {
                ScheduleFamily::Geometric { c: *eta0, factor: *factor, every: *every }
            }
        }
    }
}

/// Learning rate at step `t >= 1` during the 0-based `epoch`.
pub fn schedule_lr(t: u64, epoch: u64, schedule: &LrSchedule) -> f64 {
    let t = t.max(1);
    match schedule {
        LrSchedule::Constant { eta0 } => *eta0,
        LrSchedule::PowerLaw { eta0, a } => eta0 / (t as f64).powf(*a),
        LrSchedule::Piecewise { eta0, factor, epochs } => {
            let hits = epochs.iter().filter(|&&e| epoch >= e).count();
            eta0 * factor.powi(hits as i32)
        }
        LrSchedule::StepEvery { eta0, factor, every } => {
            eta0 * factor.powi((epoch / every) as i32)
        }
    }
}

/// Switch the partial-adaptivity power to `p` from `epoch` on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PSchedule {
    pub epoch: u64,
    pub p: f64,
}

impl PSchedule {
    pub fn new(epoch: u64, p: f64) -> Result<Self> {
        validate_power(p).map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self { epoch, p })
    }
}

pub fn schedule_p(epoch: u64, p0: f64, schedule: Option<&PSchedule>) -> f64 {
    match schedule {
        Some(s) if epoch >= s.epoch => s.p,
        _ => p0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piecewise_decays_twice_by_epoch_120() {
        let s = LrSchedule::Piecewise { eta0: 1e-3, factor: 0.1, epochs: vec![50, 100, 150] };
        assert!((schedule_lr(1, 120, &s) - 1e-5).abs() < 1e-18);
        assert_eq!(schedule_lr(1, 49, &s), 1e-3);
    }

    #[test]
    fn constant_and_power_law() {
        let c = LrSchedule::Constant { eta0: 1e-3 };
        assert_eq!(schedule_lr(1, 0, &c), 1e-3);
        assert_eq!(schedule_lr(99_999, 999, &c), 1e-3);
        let p = LrSchedule::PowerLaw { eta0: 1e-3, a: 0.75 };
        assert!((schedule_lr(16, 0, &p) - 1.25e-4).abs() < 1e-18);
    }

    #[test]
    fn every_family_is_non_increasing() {
        let schedules = [
            LrSchedule::Constant { eta0: 0.1 },
            LrSchedule::PowerLaw { eta0: 0.1, a: 0.75 },
            LrSchedule::Piecewise { eta0: 0.1, factor: 0.1, epochs: vec![50, 100, 150] },
            LrSchedule::StepEvery { eta0: 0.1, factor: 0.1, every: 50 },
        ];
        for s in &schedules {
            let mut prev = f64::INFINITY;
            for t in 1..=100_000u64 {
                let eta = schedule_lr(t, (t - 1) / 391, s);
                assert!(eta <= prev, "{s:?} increased at t={t}");
                prev = eta;
            }
        }
    }

    #[test]
    fn p_schedule_switches_at_epoch() {
        let s = PSchedule::new(100, 0.125).unwrap();
        assert_eq!(schedule_p(99, 0.25, Some(&s)), 0.25);
        assert_eq!(schedule_p(100, 0.25, Some(&s)), 0.125);
        assert_eq!(schedule_p(500, 0.25, None), 0.25);
        assert!(PSchedule::new(10, 0.75).is_err());
        assert!(PSchedule::new(10, 0.0).is_err());
    }

    #[test]
    fn unknown_family_is_rejected() {
        assert!(LrSchedule::parse_family("cosine", 1e-3, 0.75, 0.1, vec![], 50).is_err());
        assert!(LrSchedule::parse_family("constant", -1.0, 0.75, 0.1, vec![], 50).is_err());
    }
}
