//! Shared data types: parameter groups, gradients, hyperparameters,
//! optimizer state, per-step telemetry, and the deterministic RNG.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One named flat weight vector. Projection decisions are made per group.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGroup {
    pub name: String,
    pub values: Vec<f64>,
}

impl ParamGroup {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if values.is_empty() {
            return Err(Error::ZeroDim(name));
        }
        Ok(Self { name, values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }
}

/// Per-group gradient vectors, in the same order as the parameter groups.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradientSet(pub Vec<Vec<f64>>);

impl GradientSet {
    pub fn zeros_like(groups: &[ParamGroup]) -> Self {
        Self(groups.iter().map(|g| vec![0.0; g.dim()]).collect())
    }

    pub fn groups(&self) -> &[Vec<f64>] {
        &self.0
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().flatten().map(|x| x * x).sum()
    }

    pub fn check_shape(&self, params: &[ParamGroup]) -> Result<()> {
        if self.0.len() != params.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} gradient groups for {} parameter groups",
                self.0.len(),
                params.len()
            )));
        }
        for (g, p) in self.0.iter().zip(params) {
            if g.len() != p.dim() {
                return Err(Error::ShapeMismatch(format!(
                    "group `{}`: gradient dim {} != parameter dim {}",
                    p.name,
                    g.len(),
                    p.dim()
                )));
            }
        }
        Ok(())
    }

    pub fn check_finite(&self, params: &[ParamGroup]) -> Result<()> {
        for (g, p) in self.0.iter().zip(params) {
            if !g.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFiniteGradient { group: p.name.clone() });
            }
        }
        Ok(())
    }
}

/// How the first-moment coefficient evolves with the step counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Beta1Mode {
    #[default]
    Constant,
    /// `beta1 * lambda^(t-1)`
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub eta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub lambda: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub p: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub beta1t_mode: Beta1Mode,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            eta0: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            lambda: 1.0,
            delta: 0.1,
            epsilon: 1e-8,
            p: 0.25,
            weight_decay: 1e-2,
            momentum: 0.9,
            beta1t_mode: Beta1Mode::Constant,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        fn bad(name: &'static str, reason: String) -> Result<()> {
            Err(Error::InvalidHyperParam { name, reason })
        }
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return bad("eta0", format!("must be positive, got {}", self.eta0));
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0) {
            return bad("beta1", format!("must lie in (0,1), got {}", self.beta1));
        }
        if !(self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad("beta2", format!("must lie in (0,1), got {}", self.beta2));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad("lambda", format!("must lie in (0,1], got {}", self.lambda));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad("delta", format!("must be positive, got {}", self.delta));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon", format!("must be positive, got {}", self.epsilon));
        }
        validate_power(self.p)?;
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(
                "weight_decay",
                format!("must be non-negative, got {}", self.weight_decay),
            );
        }
        if !(self.momentum >= 0.0 && self.momentum < 1.0) {
            return bad("momentum", format!("must lie in [0,1), got {}", self.momentum));
        }
        Ok(())
    }
}

/// The partial-adaptivity power must lie in (0, 1/2].
pub fn validate_power(p: f64) -> Result<()> {
    if p > 0.0 && p <= 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidHyperParam {
            name: "p",
            reason: format!("must lie in (0, 1/2], got {p}"),
        })
    }
}

/// First-moment coefficient applied at step `t` (t >= 1).
pub fn beta1_at(t: u64, hp: &HyperParams) -> f64 {
    debug_assert!(t >= 1);
    match hp.beta1t_mode {
        Beta1Mode::Constant => hp.beta1,
        Beta1Mode::Geometric => hp.beta1 * hp.lambda.powf((t.max(1) - 1) as f64),
    }
}

/// Moment buffers and step counter for one optimizer instance.
///
/// `m` doubles as the momentum buffer for SGDM. `grad_sq_max` is the
/// elementwise running max of squared gradients, kept for the
/// second-moment bound checks.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub max_v: Vec<Vec<f64>>,
    pub grad_sq_max: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn shape_matches(&self, params: &[ParamGroup]) -> bool {
        self.m.len() == params.len()
            && params
                .iter()
                .enumerate()
                .all(|(i, p)| self.m[i].len() == p.dim() && self.v[i].len() == p.dim())
    }
}

pub fn new_state(groups: &[ParamGroup], hp: &HyperParams) -> Result<OptimizerState> {
    if groups.is_empty() {
        return Err(Error::EmptyGroups);
    }
    if let Some(g) = groups.iter().find(|g| g.dim() == 0) {
        return Err(Error::ZeroDim(g.name.clone()));
    }
    hp.validate()?;
    let zeros: Vec<Vec<f64>> = groups.iter().map(|g| vec![0.0; g.dim()]).collect();
    Ok(OptimizerState {
        t: 0,
        m: zeros.clone(),
        v: zeros.clone(),
        max_v: zeros.clone(),
        grad_sq_max: zeros,
    })
}

/// Telemetry for one parameter group at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupRecord {
    pub name: String,
    /// Norm of the group after the update.
    pub param_norm: f64,
    /// cos(theta_t, g_t), in [0, 1].
    pub cos_sim: f64,
    pub projected: bool,
    /// ||theta_{t+1} - theta_t||
    pub effective_step_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: u64,
    pub epoch: u64,
    pub eta_t: f64,
    pub p_now: f64,
    pub loss: f64,
    pub grad_norm_sq: f64,
    pub groups: Vec<GroupRecord>,
    /// First-moment identity residual divided by (1 + ||m_t||).
    /// `None` for optimizers without an EMA first moment.
    pub lemma2_residual: Option<f64>,
    /// Smallest slack of `0 <= v <= running_max(g^2)` over all entries,
    /// relative to the bound.
    pub lemma3_margin: Option<f64>,
}

pub type Rng = ChaCha8Rng;

/// Deterministic, platform-independent random stream.
pub fn seeded_rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn new_state_is_zeroed() {
        let g = vec![ParamGroup::new("w", vec![1.0, 2.0, 3.0]).unwrap()];
        let s = new_state(&g, &HyperParams::default()).unwrap();
        assert_eq!(s.t, 0);
        assert_eq!(s.m, vec![vec![0.0; 3]]);
        assert_eq!(s.v, vec![vec![0.0; 3]]);
        assert_eq!(s.max_v, vec![vec![0.0; 3]]);
    }

    #[test]
    fn new_state_matches_group_shapes() {
        let g = vec![
            ParamGroup::new("a", vec![0.0; 2]).unwrap(),
            ParamGroup::new("b", vec![0.0; 5]).unwrap(),
        ];
        let s = new_state(&g, &HyperParams::default()).unwrap();
        let dims: Vec<usize> = s.m.iter().map(Vec::len).collect();
        assert_eq!(dims, vec![2, 5]);
        assert!(s.shape_matches(&g));
    }

    #[test]
    fn new_state_rejects_bad_inputs() {
        assert!(matches!(
            new_state(&[], &HyperParams::default()),
            Err(Error::EmptyGroups)
        ));
        let g = vec![ParamGroup::new("w", vec![0.0]).unwrap()];
        let hp = HyperParams { p: 0.7, ..Default::default() };
        let err = new_state(&g, &hp).unwrap_err();
        assert!(matches!(err, Error::InvalidHyperParam { name: "p", .. }), "{err}");
        assert!(ParamGroup::new("e", vec![]).is_err());
    }

    #[test]
    fn beta1_schedule() {
        let mut hp = HyperParams { beta1: 0.9, lambda: 0.5, ..Default::default() };
        hp.beta1t_mode = Beta1Mode::Geometric;
        assert_eq!(beta1_at(1, &hp), 0.9);
        assert!((beta1_at(3, &hp) - 0.225).abs() < 1e-15);
        hp.beta1t_mode = Beta1Mode::Constant;
        assert_eq!(beta1_at(1000, &hp), 0.9);
    }

    #[test]
    fn rng_determinism() {
        let a: Vec<u64> = (0..100).scan(seeded_rng(42), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..100).scan(seeded_rng(42), |r, _| Some(r.random())).collect();
        let c: Vec<u64> = (0..100).scan(seeded_rng(1), |r, _| Some(r.random())).collect();
        let d: Vec<u64> = (0..100).scan(seeded_rng(2), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
        assert_ne!(c, d);
    }
}
