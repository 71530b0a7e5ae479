//! Step rules for PadamP and its comparison family.
//!
//! Every adaptive rule shares one code path: EMA first and second moments,
//! bias correction, a denominator raised to a power, and an optional
//! tangent-space projection of the raw step. SGDM uses the undamped
//! momentum form `buf = mu * buf + g`.

use std::fmt;
use std::str::FromStr;

use crate::diagnostics::{check_lemma2, slack_between};
use crate::error::{Error, Result};
use crate::geometry::{self, projection_condition_with, TriggerRule};
use crate::types::{
    beta1_at, new_state, validate_power, GradientSet, GroupRecord, HyperParams, OptimizerState,
    ParamGroup, StepRecord,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    PadamP,
    AdamP,
    Padam,
    Adam,
    AMSGrad,
    Sgdm,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 6] = [
        OptimizerKind::PadamP,
        OptimizerKind::AdamP,
        OptimizerKind::Padam,
        OptimizerKind::Adam,
        OptimizerKind::AMSGrad,
        OptimizerKind::Sgdm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::PadamP => "padamp",
            OptimizerKind::AdamP => "adamp",
            OptimizerKind::Padam => "padam",
            OptimizerKind::Adam => "adam",
            OptimizerKind::AMSGrad => "amsgrad",
            OptimizerKind::Sgdm => "sgdm",
        }
    }

    /// Whether the rule keeps an EMA second moment (everything but SGDM).
    pub fn is_adaptive(self) -> bool {
        self != OptimizerKind::Sgdm
    }

    /// Default hyperparameters for each optimizer in the benchmark protocol.
    pub fn default_hyperparams(self) -> HyperParams {
        let base = HyperParams::default();
        match self {
            OptimizerKind::PadamP | OptimizerKind::AdamP => base,
            OptimizerKind::Padam => HyperParams { beta2: 0.999, ..base },
            OptimizerKind::Adam | OptimizerKind::AMSGrad => {
                HyperParams { beta2: 0.99, weight_decay: 1e-4, p: 0.5, ..base }
            }
            OptimizerKind::Sgdm => HyperParams {
                eta0: 0.1,
                weight_decay: 5e-4,
                momentum: 0.9,
                ..base
            },
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OptimizerKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown optimizer `{s}`")))
    }
}

/// Where epsilon enters the denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EpsMode {
    /// `(v + eps)^p`
    #[default]
    Inside,
    /// `v^p + eps`
    Outside,
}

/// Which learning rate scales the PadamP trigger threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TriggerLr {
    #[default]
    Scheduled,
    Base,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOptions {
    pub eps_mode: EpsMode,
    pub trigger_lr: TriggerLr,
    /// When false the projection never triggers.
    pub projection: bool,
    /// Skip weight decay on groups whose step was projected.
    pub wd_skip_projected: bool,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            eps_mode: EpsMode::Inside,
            trigger_lr: TriggerLr::Scheduled,
            projection: true,
            wd_skip_projected: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub new_params: Vec<ParamGroup>,
    pub record: StepRecord,
}

#[derive(Debug, Clone, Copy)]
enum SecondMoment {
    BiasCorrected,
    RunningMax,
}

#[derive(Debug, Clone, Copy)]
struct AdaptiveRule {
    power: f64,
    second_moment: SecondMoment,
    trigger: Option<TriggerRule>,
}

/// Decoupled decay `theta <- (1 - eta * wd) * theta`, optionally leaving
/// projected groups untouched.
pub fn apply_weight_decay(
    params: &mut [ParamGroup],
    eta_t: f64,
    wd: f64,
    projected: &[bool],
    skip_projected: bool,
) {
    if wd == 0.0 {
        return;
    }
    let factor = 1.0 - eta_t * wd;
    for (i, g) in params.iter_mut().enumerate() {
        if skip_projected && projected.get(i).copied().unwrap_or(false) {
            continue;
        }
        g.values.iter_mut().for_each(|x| *x *= factor);
    }
}

fn check_inputs(
    state: &OptimizerState,
    params: &[ParamGroup],
    grads: &GradientSet,
    eta_t: f64,
) -> Result<()> {
    if params.is_empty() {
        return Err(Error::EmptyGroups);
    }
    if !state.shape_matches(params) {
        return Err(Error::ShapeMismatch("optimizer state does not match parameters".into()));
    }
    grads.check_shape(params)?;
    grads.check_finite(params)?;
    if !(eta_t > 0.0 && eta_t.is_finite()) {
        return Err(Error::InvalidArgument(format!("eta_t must be positive, got {eta_t}")));
    }
    Ok(())
}

fn blank_record(t: u64, eta_t: f64, p_now: f64, grads: &GradientSet) -> StepRecord {
    StepRecord {
        t,
        epoch: 0,
        eta_t,
        p_now,
        loss: f64::NAN,
        grad_norm_sq: grads.norm_sq(),
        groups: Vec::new(),
        lemma2_residual: None,
        lemma3_margin: None,
    }
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step(
    rule: AdaptiveRule,
    state: &mut OptimizerState,
    params: &[ParamGroup],
    grads: &GradientSet,
    eta_t: f64,
    p_now: f64,
    hp: &HyperParams,
    opts: &StepOptions,
) -> Result<StepOutput> {
    check_inputs(state, params, grads, eta_t)?;
    let t = state.t + 1;
    let beta1t = beta1_at(t, hp);
    let bc1 = 1.0 - hp.beta1.powf(t as f64);
    let bc2 = 1.0 - hp.beta2.powf(t as f64);
    let trigger_eta = match opts.trigger_lr {
        TriggerLr::Scheduled => eta_t,
        TriggerLr::Base => hp.eta0,
    };

    let mut next = state.clone();
    let mut record = blank_record(t, eta_t, p_now, grads);
    let mut decisions = Vec::with_capacity(params.len());
    let mut steps = Vec::with_capacity(params.len());
    let mut identity_sq = 0.0;
    let mut m_norm_sq = 0.0;
    let mut v_slack = f64::INFINITY;

    for (i, (group, g)) in params.iter().zip(grads.groups()).enumerate() {
        let theta = &group.values;
        let decision = rule
            .trigger
            .filter(|_| opts.projection)
            .map(|r| projection_condition_with(r, theta, g, hp.delta, trigger_eta));
        let cos = geometry::cosine_similarity(theta, g);

        let m_prev = &state.m[i];
        let m = &mut next.m[i];
        let v = &mut next.v[i];
        for j in 0..g.len() {
            m[j] = beta1t * m[j] + (1.0 - beta1t) * g[j];
            v[j] = hp.beta2 * v[j] + (1.0 - hp.beta2) * g[j] * g[j];
            next.max_v[i][j] = next.max_v[i][j].max(v[j]);
            next.grad_sq_max[i][j] = next.grad_sq_max[i][j].max(g[j] * g[j]);
            v_slack = v_slack.min(slack_between(0.0, v[j], next.grad_sq_max[i][j]));
        }
        let r = check_lemma2(m, m_prev, g, beta1t)?;
        identity_sq += r * r;
        m_norm_sq += geometry::dot(m, m);

        let raw_step: Vec<f64> = (0..g.len())
            .map(|j| {
                let s = match rule.second_moment {
                    SecondMoment::BiasCorrected => v[j] / bc2,
                    SecondMoment::RunningMax => next.max_v[i][j],
                };
                let den = match opts.eps_mode {
                    EpsMode::Inside => (s + hp.epsilon).powf(rule.power),
                    EpsMode::Outside => s.powf(rule.power) + hp.epsilon,
                };
                (m[j] / bc1) / den
            })
            .collect();

        let projected = decision.is_some_and(|d| d.projected);
        let step = if projected {
            geometry::project_tangent(theta, &raw_step)?
        } else {
            raw_step
        };
        decisions.push((projected, cos));
        steps.push(step);
    }

    let projected: Vec<bool> = decisions.iter().map(|d| d.0).collect();
    let mut new_params = params.to_vec();
    apply_weight_decay(&mut new_params, eta_t, hp.weight_decay, &projected, opts.wd_skip_projected);
    for (group, step) in new_params.iter_mut().zip(&steps) {
        for (x, s) in group.values.iter_mut().zip(step) {
            *x -= eta_t * s;
        }
    }
    let new_params = finish(params, new_params, &decisions, t, &mut record)?;
    record.lemma2_residual = Some(identity_sq.sqrt() / (1.0 + m_norm_sq.sqrt()));
    record.lemma3_margin = Some(v_slack);
    next.t = t;
    *state = next;
    Ok(StepOutput { new_params, record })
}

fn finish(
    old: &[ParamGroup],
    new: Vec<ParamGroup>,
    decisions: &[(bool, f64)],
    t: u64,
    record: &mut StepRecord,
) -> Result<Vec<ParamGroup>> {
    for (o, n) in old.iter().zip(&new) {
        if !n.is_finite() {
            return Err(Error::NonFiniteParams { group: n.name.clone(), step: t });
        }
        let step_sq: f64 = o.values.iter().zip(&n.values).map(|(a, b)| (b - a) * (b - a)).sum();
        let (projected, cos_sim) = decisions[record.groups.len()];
        record.groups.push(GroupRecord {
            name: n.name.clone(),
            param_norm: geometry::norm(&n.values),
            cos_sim,
            projected,
            effective_step_norm: step_sq.sqrt(),
        });
    }
    Ok(new)
}

/// PadamP: bias-corrected moments, `m_hat / (v_hat + eps)^p`, and the
/// learning-rate-scaled projection trigger.
pub fn padamp_step(
    state: &mut OptimizerState,
    params: &[ParamGroup],
    grads: &GradientSet,
    eta_t: f64,
    p_now: f64,
    hp: &HyperParams,
    opts: &StepOptions,
) -> Result<StepOutput> {
    validate_power(p_now)?;
    let rule = AdaptiveRule {
        power: p_now,
        second_moment: SecondMoment::BiasCorrected,
        trigger: Some(TriggerRule::LrScaled),
    };
    adaptive_step(rule, state, params, grads, eta_t, p_now, hp, opts)
}

/// AdamP: PadamP with p = 1/2 and the fixed `delta / sqrt(dim)` trigger.
pub fn adamp_step(
    state: &mut OptimizerState,
    params: &[ParamGroup],
    grads: &GradientSet,
    eta_t: f64,
    hp: &HyperParams,
    opts: &StepOptions,
) -> Result<StepOutput> {
    let rule = AdaptiveRule {
        power: 0.5,
        second_moment: SecondMoment::BiasCorrected,
        trigger: Some(TriggerRule::Fixed),
    };
    adaptive_step(rule, state, params, grads, eta_t, 0.5, hp, opts)
}

pub fn adam_step(
    state: &mut OptimizerState,
    params: &[ParamGroup],
    grads: &GradientSet,
    eta_t: f64,
    hp: &HyperParams,
    opts: &StepOptions,
) -> Result<StepOutput> {
    let rule = AdaptiveRule {
        power: 0.5,
        second_moment: SecondMoment::BiasCorrected,
        trigger: None,
    };
    adaptive_step(rule, state, params, grads, eta_t, 0.5, hp, opts)
}

/// AMSGrad: the running max of the (uncorrected) second moment replaces `v_hat`.
pub fn amsgrad_step(
    state: &mut OptimizerState,
    params: &[ParamGroup],
    grads: &GradientSet,
    eta_t: f64,
    hp: &HyperParams,
    opts: &StepOptions,
) -> Result<StepOutput> {
    let rule = AdaptiveRule {
        power: 0.5,
        second_moment: SecondMoment::RunningMax,
        trigger: None,
    };
    adaptive_step(rule, state, params, grads, eta_t, 0.5, hp, opts)
}

/// Padam: `m_hat / (max_v + eps)^p`.
pub fn padam_step(
    state: &mut OptimizerState,
    params: &[ParamGroup],
    grads: &GradientSet,
    eta_t: f64,
    p_now: f64,
    hp: &HyperParams,
    opts: &StepOptions,
) -> Result<StepOutput> {
    validate_power(p_now)?;
    let rule = AdaptiveRule {
        power: p_now,
        second_moment: SecondMoment::RunningMax,
        trigger: None,
    };
    adaptive_step(rule, state, params, grads, eta_t, p_now, hp, opts)
}

/// Heavy-ball momentum: `buf = mu * buf + g`, `theta -= eta * buf`.
pub fn sgdm_step(
    state: &mut OptimizerState,
    params: &[ParamGroup],
    grads: &GradientSet,
    eta_t: f64,
    hp: &HyperParams,
) -> Result<StepOutput> {
    check_inputs(state, params, grads, eta_t)?;
    let t = state.t + 1;
    let mut next = state.clone();
    let mut record = blank_record(t, eta_t, 0.0, grads);
    let mut decisions = Vec::with_capacity(params.len());
    for (i, (group, g)) in params.iter().zip(grads.groups()).enumerate() {
        for j in 0..g.len() {
            next.m[i][j] = hp.momentum * next.m[i][j] + g[j];
            next.grad_sq_max[i][j] = next.grad_sq_max[i][j].max(g[j] * g[j]);
        }
        decisions.push((false, geometry::cosine_similarity(&group.values, g)));
    }
    let mut new_params = params.to_vec();
    apply_weight_decay(&mut new_params, eta_t, hp.weight_decay, &[], false);
    for (i, group) in new_params.iter_mut().enumerate() {
        for (x, b) in group.values.iter_mut().zip(&next.m[i]) {
            *x -= eta_t * b;
        }
    }
    let new_params = finish(params, new_params, &decisions, t, &mut record)?;
    next.t = t;
    *state = next;
    Ok(StepOutput { new_params, record })
}

/// One optimizer instance: kind, hyperparameters, options and state.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub hp: HyperParams,
    pub opts: StepOptions,
    pub state: OptimizerState,
}

impl Optimizer {
    pub fn new(
        kind: OptimizerKind,
        hp: HyperParams,
        opts: StepOptions,
        groups: &[ParamGroup],
    ) -> Result<Self> {
        let state = new_state(groups, &hp)?;
        Ok(Self { kind, hp, opts, state })
    }

    /// Advances the state and returns the updated parameters. On error the
    /// state is left unchanged.
    pub fn step(
        &mut self,
        params: &[ParamGroup],
        grads: &GradientSet,
        eta_t: f64,
        p_now: f64,
    ) -> Result<StepOutput> {
        let (hp, opts, state) = (&self.hp, &self.opts, &mut self.state);
        match self.kind {
            OptimizerKind::PadamP => padamp_step(state, params, grads, eta_t, p_now, hp, opts),
            OptimizerKind::AdamP => adamp_step(state, params, grads, eta_t, hp, opts),
            OptimizerKind::Padam => padam_step(state, params, grads, eta_t, p_now, hp, opts),
            OptimizerKind::Adam => adam_step(state, params, grads, eta_t, hp, opts),
            OptimizerKind::AMSGrad => amsgrad_step(state, params, grads, eta_t, hp, opts),
            OptimizerKind::Sgdm => sgdm_step(state, params, grads, eta_t, hp),
        }
    }

    /// Steps and writes the new values back into `params`.
    pub fn step_in_place(
        &mut self,
        params: &mut Vec<ParamGroup>,
        grads: &GradientSet,
        eta_t: f64,
        p_now: f64,
    ) -> Result<StepRecord> {
        let out = self.step(params, grads, eta_t, p_now)?;
        *params = out.new_params;
        Ok(out.record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{seeded_rng, Beta1Mode};
    use rand::Rng;

    fn scalar(theta: f64) -> Vec<ParamGroup> {
        vec![ParamGroup::new("w", vec![theta]).unwrap()]
    }

    fn no_wd(kind: OptimizerKind) -> HyperParams {
        HyperParams { weight_decay: 0.0, ..kind.default_hyperparams() }
    }

    #[test]
    fn padamp_first_step_on_scalar_quadratic() {
        let hp = HyperParams { p: 0.5, ..no_wd(OptimizerKind::PadamP) };
        let params = scalar(1.0);
        let mut state = new_state(&params, &hp).unwrap();
        let grads = GradientSet(vec![vec![1.0]]);
        let out = padamp_step(&mut state, &params, &grads, 1e-3, 0.5, &hp, &StepOptions::default())
            .unwrap();
        assert!((state.m[0][0] - 0.1).abs() < 1e-15);
        assert!((state.v[0][0] - 0.001).abs() < 1e-15);
        // independent scalar evaluation: 1 - 1e-3 / sqrt(1 + 1e-8)
        let expected = 1.0 - 1e-3 / (1.0f64 + 1e-8).sqrt();
        assert!((out.new_params[0].values[0] - expected).abs() < 1e-15);
        assert!((out.new_params[0].values[0] - 0.999).abs() < 1e-10);
        assert!(!out.record.groups[0].projected);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn adamp_matches_first_step_and_uses_fixed_threshold() {
        let hp = no_wd(OptimizerKind::AdamP);
        let params = scalar(1.0);
        let mut state = new_state(&params, &hp).unwrap();
        let grads = GradientSet(vec![vec![1.0]]);
        let out = adamp_step(&mut state, &params, &grads, 1e-3, &hp, &StepOptions::default()).unwrap();
        assert!((out.new_params[0].values[0] - 0.999).abs() < 1e-10);

        let d = projection_condition_with(
            TriggerRule::Fixed,
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            0.1,
            123.0,
        );
        assert_eq!(d.threshold, 0.05);
    }

    #[test]
    fn adam_first_step() {
        let hp = no_wd(OptimizerKind::Adam);
        let params = scalar(1.0);
        let grads = GradientSet(vec![vec![1.0]]);
        let mut state = new_state(&params, &hp).unwrap();
        let outside = StepOptions { eps_mode: EpsMode::Outside, ..Default::default() };
        let out = adam_step(&mut state, &params, &grads, 1e-3, &hp, &outside).unwrap();
        let expected = 1.0 - 1e-3 * (1.0 / (1.0 + 1e-8));
        assert!((out.new_params[0].values[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn amsgrad_tracks_running_max() {
        // drive v through 0.4, 0.3, 0.5 by choosing g^2 from the EMA recursion
        let hp = HyperParams { beta2: 0.5, ..no_wd(OptimizerKind::AMSGrad) };
        let params = scalar(1.0);
        let mut state = new_state(&params, &hp).unwrap();
        let targets = [0.4, 0.3, 0.5];
        let mut v_prev = 0.0;
        let mut seen = Vec::new();
        for target in targets {
            let g_sq: f64 = (target - hp.beta2 * v_prev) / (1.0 - hp.beta2);
            let grads = GradientSet(vec![vec![g_sq.sqrt()]]);
            amsgrad_step(&mut state, &params, &grads, 1e-3, &hp, &StepOptions::default()).unwrap();
            v_prev = state.v[0][0];
            seen.push(state.max_v[0][0]);
        }
        let expected = [0.4, 0.4, 0.5];
        for (s, e) in seen.iter().zip(expected) {
            assert!((s - e).abs() < 1e-12, "{seen:?}");
        }
    }

    #[test]
    fn sgdm_buffer_approaches_geometric_limit() {
        let hp = HyperParams { weight_decay: 0.0, ..OptimizerKind::Sgdm.default_hyperparams() };
        let params = vec![ParamGroup::new("w", vec![0.0; 4]).unwrap()];
        let mut state = new_state(&params, &hp).unwrap();
        let grads = GradientSet(vec![vec![1.0; 4]]);
        for _ in 0..500 {
            sgdm_step(&mut state, &params, &grads, 0.1, &hp).unwrap();
        }
        for b in &state.m[0] {
            assert!((b - 10.0).abs() < 1e-9);
        }
    }

    #[test]
    fn weight_decay_examples() {
        let mut p = scalar(2.0);
        apply_weight_decay(&mut p, 0.1, 0.0, &[false], true);
        assert_eq!(p[0].values, vec![2.0]);
        apply_weight_decay(&mut p, 0.1, 0.5, &[false], true);
        assert!((p[0].values[0] - 1.9).abs() < 1e-15);
        apply_weight_decay(&mut p, 0.1, 0.5, &[true], true);
        assert!((p[0].values[0] - 1.9).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_gradient_projects_in_dim16() {
        let hp = no_wd(OptimizerKind::PadamP);
        let mut theta = vec![0.0; 16];
        theta[0] = 1.0;
        let params = vec![ParamGroup::new("w", theta.clone()).unwrap()];
        let mut g = vec![0.3; 16];
        g[0] = 0.0;
        let mut state = new_state(&params, &hp).unwrap();
        let out = padamp_step(
            &mut state,
            &params,
            &GradientSet(vec![g]),
            1e-3,
            0.25,
            &hp,
            &StepOptions::default(),
        )
        .unwrap();
        assert!(out.record.groups[0].projected);
        let delta: Vec<f64> =
            out.new_params[0].values.iter().zip(&theta).map(|(a, b)| a - b).collect();
        assert!(geometry::dot(&theta, &delta).abs() < 1e-12);
    }

    #[test]
    fn errors_leave_state_untouched() {
        let hp = HyperParams::default();
        let params = scalar(1.0);
        let mut state = new_state(&params, &hp).unwrap();
        let before = state.clone();
        let bad = GradientSet(vec![vec![f64::NAN]]);
        let err = padamp_step(&mut state, &params, &bad, 1e-3, 0.25, &hp, &StepOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { ref group } if group == "w"));
        let mismatch = GradientSet(vec![vec![1.0, 2.0]]);
        assert!(matches!(
            padamp_step(&mut state, &params, &mismatch, 1e-3, 0.25, &hp, &StepOptions::default()),
            Err(Error::ShapeMismatch(_))
        ));
        assert_eq!(state, before);
    }

    #[test]
    fn near_zero_power_gives_momentum_direction() {
        let hp = no_wd(OptimizerKind::PadamP);
        let opts = StepOptions { projection: false, ..Default::default() };
        let mut rng = seeded_rng(3);
        let theta: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let params = vec![ParamGroup::new("w", theta.clone()).unwrap()];
        let mut state = new_state(&params, &hp).unwrap();
        for t in 1..=20u64 {
            let g: Vec<f64> = (0..8).map(|_| rng.random_range(-5.0..5.0)).collect();
            let out =
                padamp_step(&mut state, &params, &GradientSet(vec![g]), 1.0, 1e-8, &hp, &opts).unwrap();
            let bc1 = 1.0 - hp.beta1.powi(t as i32);
            for j in 0..8 {
                let dir = theta[j] - out.new_params[0].values[j];
                let m_hat = state.m[0][j] / bc1;
                assert!((dir - m_hat).abs() <= 1e-6 * m_hat.abs().max(1e-12));
            }
        }
    }

    #[test]
    fn geometric_beta1_keeps_lemma2_residual_small() {
        let hp = HyperParams {
            lambda: 0.99,
            beta1t_mode: Beta1Mode::Geometric,
            ..HyperParams::default()
        };
        let mut params = vec![ParamGroup::new("w", vec![0.5; 10]).unwrap()];
        let mut opt = Optimizer::new(OptimizerKind::PadamP, hp, StepOptions::default(), &params).unwrap();
        let mut rng = seeded_rng(9);
        for _ in 0..200 {
            let g: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
            let rec = opt.step_in_place(&mut params, &GradientSet(vec![g]), 1e-2, 0.25).unwrap();
            assert!(rec.lemma2_residual.unwrap() < 1e-10);
            assert!(rec.lemma3_margin.unwrap() >= -1e-15);
        }
    }

    #[test]
    fn kind_round_trips_through_str() {
        for k in OptimizerKind::ALL {
            assert_eq!(k.as_str().parse::<OptimizerKind>().unwrap(), k);
        }
        assert!("nadam".parse::<OptimizerKind>().is_err());
    }
}
