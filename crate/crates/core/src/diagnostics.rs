//! Executable checks: weight-norm growth under momentum, the moment
//! identities and bounds used by the convergence analysis, learning-rate
//! schedule admissibility, and the running-minimum gradient criterion.

use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{dot, norm};

/// Relative slack below which a bound counts as violated. Bounds that hold
/// with equality in exact arithmetic can miss by a few ulps in floating point.
pub const ROUNDING_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormGrowthTrace {
    pub t: usize,
    pub norm_sq_gd: f64,
    pub norm_sq_gdm: f64,
    /// `(gdm - |theta_0|^2) / (gd - |theta_0|^2)`, NaN until the first update.
    pub ratio: f64,
}

/// Iterates the squared-norm recursions for plain and momentum descent,
///
/// ```text
/// gd:  n_{t+1} = n_t + eta^2 |p_t|^2
/// gdm: n_{t+1} = n_t + eta^2 |p_t|^2 + 2 eta^2 sum_{k<t} beta^(t-k) |p_k|^2
/// ```
///
/// given the same update norms for both. Trace entry `t` holds the norms
/// after `t + 1` updates.
pub fn simulate_norm_growth(
    update_norms_sq: &[f64],
    beta: f64,
    eta: f64,
    theta0_norm_sq: f64,
) -> Result<Vec<NormGrowthTrace>> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidArgument(format!("beta must lie in [0,1), got {beta}")));
    }
    if update_norms_sq.iter().any(|u| !(*u >= 0.0 && u.is_finite())) {
        return Err(Error::InvalidArgument("update norms must be finite and non-negative".into()));
    }
    if update_norms_sq.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidArgument(
            "total update norm is zero; the growth ratio is undefined".into(),
        ));
    }
    let eta_sq = eta * eta;
    let mut gd = theta0_norm_sq;
    let mut gdm = theta0_norm_sq;
    // sum_{k<t} beta^(t-k) |p_k|^2
    let mut carry = 0.0;
    let mut out = Vec::with_capacity(update_norms_sq.len());
    for (t, &u) in update_norms_sq.iter().enumerate() {
        gd += eta_sq * u;
        gdm += eta_sq * u + 2.0 * eta_sq * carry;
        carry = beta * (carry + u);
        let denom = gd - theta0_norm_sq;
        let ratio = if denom > 0.0 { (gdm - theta0_norm_sq) / denom } else { f64::NAN };
        out.push(NormGrowthTrace { t, norm_sq_gd: gd, norm_sq_gdm: gdm, ratio });
    }
    Ok(out)
}

/// Asymptotic growth ratio `1 + 2 beta / (1 - beta)`.
pub fn norm_growth_limit(beta: f64) -> f64 {
    1.0 + 2.0 * beta / (1.0 - beta)
}

/// `| -m_t - ( -g_t + beta1t / (1 - beta1t) (m_t - m_prev) ) |`
pub fn check_lemma2(m_t: &[f64], m_prev: &[f64], g_t: &[f64], beta1t: f64) -> Result<f64> {
    if beta1t >= 1.0 {
        return Err(Error::InvalidArgument("beta1t must be < 1".into()));
    }
    if m_t.len() != m_prev.len() || m_t.len() != g_t.len() {
        return Err(Error::ShapeMismatch("check_lemma2: vector lengths differ".into()));
    }
    let c = beta1t / (1.0 - beta1t);
    let sq: f64 = (0..m_t.len())
        .map(|i| {
            let rhs = -g_t[i] + c * (m_t[i] - m_prev[i]);
            let r = -m_t[i] - rhs;
            r * r
        })
        .sum();
    Ok(sq.sqrt())
}

/// Minimum relative slack of each moment bound seen so far. A value of
/// `+inf` means the bound was never evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaMargins {
    /// `0 <= v_i <= max_s g_{s,i}^2` (elementwise)
    pub v_elementwise: f64,
    /// `0 <= v <= C1^2` for the scalar recursion on `|g_t|^2`
    pub v_scalar: f64,
    /// `1/(C1^2+eps)^p <= 1/(v_i+eps)^p`
    pub denom_lower: f64,
    /// `1/(v_i+eps)^p <= 1/eps^p`
    pub denom_upper: f64,
    /// `|<theta_hat, m/(v+eps)^p>| <= C1/eps^p`
    pub radial: f64,
    /// `|g/(v+eps)^p|^2 <= C1^2/eps^(2p)`
    pub scaled_grad: f64,
    /// `|<g, (m_t - m_{t-1})/(v+eps)^p>| <= 2 C1^2/eps^p`
    pub momentum_change: f64,
}

impl Default for LemmaMargins {
    fn default() -> Self {
        Self {
            v_elementwise: f64::INFINITY,
            v_scalar: f64::INFINITY,
            denom_lower: f64::INFINITY,
            denom_upper: f64::INFINITY,
            radial: f64::INFINITY,
            scaled_grad: f64::INFINITY,
            momentum_change: f64::INFINITY,
        }
    }
}

impl LemmaMargins {
    pub fn named(&self) -> [(&'static str, f64); 7] {
        [
            ("second_moment_elementwise", self.v_elementwise),
            ("second_moment_scalar", self.v_scalar),
            ("denominator_lower", self.denom_lower),
            ("denominator_upper", self.denom_upper),
            ("radial_component", self.radial),
            ("scaled_gradient", self.scaled_grad),
            ("momentum_change", self.momentum_change),
        ]
    }

    pub fn all_hold(&self) -> bool {
        self.named().iter().all(|(_, s)| *s >= -ROUNDING_SLACK)
    }
}

/// Slack of `lo <= x <= hi` relative to the bound magnitude.
pub(crate) fn slack_between(lo: f64, x: f64, hi: f64) -> f64 {
    let scale = hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE);
    ((x - lo) / scale).min((hi - x) / scale)
}

fn slack_below(x: f64, bound: f64) -> f64 {
    if bound == 0.0 {
        if x <= 0.0 { 0.0 } else { -f64::INFINITY }
    } else {
        (bound - x) / bound
    }
}

/// The moment buffers of one parameter group at one step.
#[derive(Debug, Clone, Copy)]
pub struct MomentSnapshot<'a> {
    /// Parameters the step was taken from; `None` skips the radial bound.
    pub theta: Option<&'a [f64]>,
    pub grad: &'a [f64],
    pub m: &'a [f64],
    pub m_prev: &'a [f64],
    /// Uncorrected EMA second moment.
    pub v: &'a [f64],
}

#[derive(Debug, Clone, Default)]
struct GroupBounds {
    c1: f64,
    grad_sq_max: Vec<f64>,
    v_scalar: f64,
}

/// Feeds per-step moment snapshots through the second-moment, denominator
/// and scaled-update bounds, using the running max gradient norm as C1.
#[derive(Debug, Clone)]
pub struct LemmaTracker {
    beta2: f64,
    epsilon: f64,
    groups: Vec<GroupBounds>,
    margins: LemmaMargins,
    steps: u64,
}

impl LemmaTracker {
    pub fn new(dims: &[usize], beta2: f64, epsilon: f64) -> Self {
        Self {
            beta2,
            epsilon,
            groups: dims
                .iter()
                .map(|&d| GroupBounds { grad_sq_max: vec![0.0; d], ..Default::default() })
                .collect(),
            margins: LemmaMargins::default(),
            steps: 0,
        }
    }

    pub fn margins(&self) -> LemmaMargins {
        self.margins
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Returns the margins of this snapshot alone.
    pub fn observe(&mut self, group: usize, snap: MomentSnapshot<'_>, p: f64) -> LemmaMargins {
        let eps = self.epsilon;
        let beta2 = self.beta2;
        let gb = &mut self.groups[group];
        let g_norm_sq = dot(snap.grad, snap.grad);
        gb.c1 = gb.c1.max(g_norm_sq.sqrt());
        gb.v_scalar = beta2 * gb.v_scalar + (1.0 - beta2) * g_norm_sq;
        let c1 = gb.c1;
        let c1_sq = c1 * c1;

        let mut m = LemmaMargins {
            v_scalar: slack_between(0.0, gb.v_scalar, c1_sq),
            ..LemmaMargins::default()
        };

        let upper = eps.powf(-p);
        let lower = (c1_sq + eps).powf(-p);
        let mut scaled_m = Vec::with_capacity(snap.v.len());
        let mut scaled_g_sq = 0.0;
        let mut scaled_dm = 0.0;
        for i in 0..snap.v.len() {
            let g = snap.grad[i];
            gb.grad_sq_max[i] = gb.grad_sq_max[i].max(g * g);
            let v = snap.v[i];
            m.v_elementwise = m.v_elementwise.min(slack_between(0.0, v, gb.grad_sq_max[i]));
            let b = (v + eps).powf(-p);
            m.denom_lower = m.denom_lower.min((b - lower) / lower);
            m.denom_upper = m.denom_upper.min((upper - b) / upper);
            scaled_m.push(snap.m[i] * b);
            scaled_g_sq += (g * b) * (g * b);
            scaled_dm += g * (snap.m[i] - snap.m_prev[i]) * b;
        }
        if let Some(theta) = snap.theta {
            let n = norm(theta);
            if n > 0.0 {
                let radial = dot(theta, &scaled_m).abs() / n;
                m.radial = slack_below(radial, c1 * upper);
            }
        }
        m.scaled_grad = slack_below(scaled_g_sq, c1_sq * upper * upper);
        m.momentum_change = slack_below(scaled_dm.abs(), 2.0 * c1_sq * upper);

        let acc = &mut self.margins;
        acc.v_elementwise = acc.v_elementwise.min(m.v_elementwise);
        acc.v_scalar = acc.v_scalar.min(m.v_scalar);
        acc.denom_lower = acc.denom_lower.min(m.denom_lower);
        acc.denom_upper = acc.denom_upper.min(m.denom_upper);
        acc.radial = acc.radial.min(m.radial);
        acc.scaled_grad = acc.scaled_grad.min(m.scaled_grad);
        acc.momentum_change = acc.momentum_change.min(m.momentum_change);
        self.steps += 1;
        m
    }
}

/// Replays a single-group gradient stream through fresh EMA moments and
/// returns the minimum slack of every bound over the stream.
pub fn check_lemma3_4_5(
    grads_history: &[Vec<f64>],
    beta1: f64,
    beta2: f64,
    p: f64,
    epsilon: f64,
) -> Result<LemmaMargins> {
    let Some(first) = grads_history.first() else {
        return Ok(LemmaMargins::default());
    };
    let d = first.len();
    if grads_history.iter().any(|g| g.len() != d) {
        return Err(Error::ShapeMismatch("gradient history has ragged dimensions".into()));
    }
    let mut tracker = LemmaTracker::new(&[d], beta2, epsilon);
    let mut m = vec![0.0; d];
    let mut v = vec![0.0; d];
    for g in grads_history {
        let m_prev = m.clone();
        for i in 0..d {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        }
        tracker.observe(0, MomentSnapshot { theta: None, grad: g, m: &m, m_prev: &m_prev, v: &v }, p);
    }
    Ok(tracker.margins())
}

/// Learning-rate families the schedule validator understands.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleFamily {
    Constant { c: f64 },
    /// `c / t^a`
    PowerLaw { c: f64, a: f64 },
    /// Constant `c`, multiplied by `factor` at each decay point.
    Piecewise { c: f64, factor: f64, points: Vec<u64> },
    /// Multiplied by `factor` every `every` epochs, without end.
    Geometric { c: f64, factor: f64, every: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleVerdict {
    pub positive: bool,
    pub non_increasing: bool,
    pub sum_diverges: bool,
    pub sum_sq_converges: bool,
}

impl ScheduleVerdict {
    /// Positive, non-increasing, with divergent sum and convergent sum of squares.
    pub fn satisfies_assumptions(&self) -> bool {
        self.positive && self.non_increasing && self.sum_diverges && self.sum_sq_converges
    }
}

pub fn validate_schedule(family: &ScheduleFamily) -> Result<ScheduleVerdict> {
    let c = match family {
        ScheduleFamily::Constant { c }
        | ScheduleFamily::PowerLaw { c, .. }
        | ScheduleFamily::Piecewise { c, .. }
        | ScheduleFamily::Geometric { c, .. } => *c,
    };
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("schedule scale must be positive, got {c}")));
    }
    Ok(match family {
        ScheduleFamily::Constant { .. } => ScheduleVerdict {
            positive: true,
            non_increasing: true,
            sum_diverges: true,
            sum_sq_converges: false,
        },
        ScheduleFamily::PowerLaw { a, .. } => ScheduleVerdict {
            positive: true,
            non_increasing: *a >= 0.0,
            sum_diverges: *a <= 1.0,
            sum_sq_converges: 2.0 * a > 1.0,
        },
        ScheduleFamily::Piecewise { factor, .. } => {
            let shrinking = *factor > 0.0 && *factor <= 1.0;
            ScheduleVerdict {
                positive: *factor > 0.0,
                non_increasing: shrinking,
                // finitely many decay points leave a positive constant tail
                sum_diverges: *factor > 0.0,
                sum_sq_converges: false,
            }
        }
        ScheduleFamily::Geometric { factor, .. } => {
            let decays = *factor > 0.0 && *factor < 1.0;
            ScheduleVerdict {
                positive: *factor > 0.0,
                non_increasing: *factor > 0.0 && *factor <= 1.0,
                sum_diverges: !decays,
                sum_sq_converges: decays,
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergencePoint {
    pub t: u64,
    pub estimate: f64,
    pub running_min: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub points: Vec<ConvergencePoint>,
}

impl ConvergenceTrace {
    pub fn push(&mut self, t: u64, estimate: f64) {
        let prev = self.points.last().map_or(f64::INFINITY, |p| p.running_min);
        self.points.push(ConvergencePoint { t, estimate, running_min: prev.min(estimate) });
    }

    pub fn final_min(&self) -> Option<f64> {
        self.points.last().map(|p| p.running_min)
    }

    pub fn is_non_increasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].running_min <= w[0].running_min)
    }
}

/// Running minimum over a sequence of `(t, E|g|^2 estimate)` checkpoints.
pub fn track_convergence(estimates: &[(u64, f64)]) -> ConvergenceTrace {
    let mut trace = ConvergenceTrace::default();
    for &(t, e) in estimates {
        trace.push(t, e);
    }
    trace
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub value: f64,
    pub pass: bool,
    /// Reported but never counted as a failure.
    pub info: bool,
}

/// One row per check: name, slack or residual, pass/fail.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticsReport {
    pub rows: Vec<CheckRow>,
}

impl DiagnosticsReport {
    pub fn push(&mut self, name: impl Into<String>, value: f64, pass: bool) {
        self.rows.push(CheckRow { name: name.into(), value, pass, info: false });
    }

    pub fn push_info(&mut self, name: impl Into<String>, value: f64) {
        self.rows.push(CheckRow { name: name.into(), value, pass: true, info: true });
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn get(&self, name: &str) -> Option<&CheckRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Header `check,value,pass`; the pass column holds `true`, `false` or `info`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["check", "value", "pass"])?;
        for r in &self.rows {
            let verdict = match (r.info, r.pass) {
                (true, _) => "info",
                (false, true) => "true",
                (false, false) => "false",
            };
            out.write_record([r.name.as_str(), &format!("{:e}", r.value), verdict])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::seeded_rng;
    use rand::Rng;

    /// Direct evaluation of the momentum norm recursion with the explicit
    /// inner sum, O(T^2).
    fn brute_force_gdm(u: &[f64], beta: f64, eta: f64, n0: f64) -> Vec<f64> {
        let mut n = n0;
        let mut out = Vec::new();
        for t in 0..u.len() {
            let mut extra = 0.0;
            for k in 0..t {
                extra += beta.powi((t - k) as i32) * u[k];
            }
            n += eta * eta * u[t] + 2.0 * eta * eta * extra;
            out.push(n);
        }
        out
    }

    #[test]
    fn recursion_matches_brute_force() {
        let mut rng = seeded_rng(5);
        let u: Vec<f64> = (0..400).map(|_| rng.random_range(0.0..2.0)).collect();
        let trace = simulate_norm_growth(&u, 0.7, 0.3, 2.0).unwrap();
        let brute = brute_force_gdm(&u, 0.7, 0.3, 2.0);
        for (tr, b) in trace.iter().zip(&brute) {
            assert!((tr.norm_sq_gdm - b).abs() <= 1e-12 * b.abs());
            assert!(tr.norm_sq_gdm >= tr.norm_sq_gd);
        }
    }

    fn pulse(active: usize, total: usize) -> Vec<f64> {
        (0..total).map(|t| if t < active { 1.0 } else { 0.0 }).collect()
    }

    #[test]
    fn growth_ratio_examples() {
        for (beta, target) in [(0.5, 3.0), (0.9, 19.0)] {
            let trace = simulate_norm_growth(&pulse(200, 10_000), beta, 0.1, 1.0).unwrap();
            let r = trace.last().unwrap().ratio;
            assert!((r - target).abs() / target < 0.01, "beta {beta}: {r}");
        }
        let trace = simulate_norm_growth(&pulse(200, 1000), 0.0, 0.1, 1.0).unwrap();
        assert_eq!(trace.last().unwrap().ratio, 1.0);
        assert!(simulate_norm_growth(&[0.0; 10], 0.5, 0.1, 1.0).is_err());
    }

    #[test]
    fn first_moment_identity_examples() {
        assert!(check_lemma2(&[0.2], &[0.0], &[2.0], 0.9).unwrap() < 1e-15);
        assert_eq!(check_lemma2(&[0.0], &[0.0], &[0.0], 0.9).unwrap(), 0.0);
        assert!(check_lemma2(&[0.0], &[0.0], &[0.0], 1.0).is_err());

        let mut rng = seeded_rng(1);
        let m_prev: Vec<f64> = (0..1000).map(|_| rng.random_range(-3.0..3.0)).collect();
        let g: Vec<f64> = (0..1000).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b = 0.9;
        let m: Vec<f64> = m_prev.iter().zip(&g).map(|(mp, gi)| b * mp + (1.0 - b) * gi).collect();
        let r = check_lemma2(&m, &m_prev, &g, b).unwrap();
        assert!(r < 1e-10 * (1.0 + norm(&m)), "{r}");
    }

    #[test]
    fn zero_gradient_stream_has_tight_lower_bounds() {
        let hist = vec![vec![0.0; 3]; 20];
        let m = check_lemma3_4_5(&hist, 0.9, 0.999, 0.25, 1e-8).unwrap();
        assert_eq!(m.v_elementwise, 0.0);
        assert_eq!(m.denom_lower, 0.0);
        assert!(m.all_hold());
    }

    #[test]
    fn constant_unit_gradient_follows_closed_form() {
        let hist = vec![vec![1.0]; 3000];
        let margins = check_lemma3_4_5(&hist, 0.9, 0.999, 0.5, 1e-8).unwrap();
        assert!(margins.all_hold(), "{margins:?}");
        // v_t = 1 - beta2^t, compared against the recursion
        let mut v = 0.0;
        for t in 1..=3000 {
            v = 0.999 * v + 0.001;
            let closed = 1.0 - 0.999f64.powi(t);
            assert!((v - closed).abs() < 1e-12);
            assert!(v <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn random_stream_keeps_all_slacks_non_negative() {
        let mut rng = seeded_rng(77);
        let hist: Vec<Vec<f64>> = (0..10_000)
            .map(|_| (0..8).map(|_| rng.random_range(-4.0..4.0)).collect())
            .collect();
        for p in [0.125, 0.25, 0.5] {
            let m = check_lemma3_4_5(&hist, 0.9, 0.999, p, 1e-8).unwrap();
            assert!(m.all_hold(), "p={p}: {m:?}");
        }
    }

    #[test]
    fn schedule_verdicts() {
        assert!(validate_schedule(&ScheduleFamily::PowerLaw { c: 1e-3, a: 0.75 })
            .unwrap()
            .satisfies_assumptions());
        assert!(!validate_schedule(&ScheduleFamily::Constant { c: 1e-3 })
            .unwrap()
            .satisfies_assumptions());
        assert!(validate_schedule(&ScheduleFamily::PowerLaw { c: 0.5, a: 1.0 })
            .unwrap()
            .satisfies_assumptions());
        assert!(!validate_schedule(&ScheduleFamily::PowerLaw { c: 0.5, a: 0.5 })
            .unwrap()
            .satisfies_assumptions());
        assert!(!validate_schedule(&ScheduleFamily::PowerLaw { c: 0.5, a: 1.5 })
            .unwrap()
            .satisfies_assumptions());
        let pw = ScheduleFamily::Piecewise { c: 1e-3, factor: 0.1, points: vec![50, 100, 150] };
        let v = validate_schedule(&pw).unwrap();
        assert!(v.non_increasing && !v.satisfies_assumptions());
        assert!(validate_schedule(&ScheduleFamily::Constant { c: 0.0 }).is_err());
    }

    #[test]
    fn running_min_examples() {
        let trace = track_convergence(&[(1, 4.0), (2, 1.0), (3, 2.0), (4, 0.5)]);
        let mins: Vec<f64> = trace.points.iter().map(|p| p.running_min).collect();
        assert_eq!(mins, vec![4.0, 1.0, 1.0, 0.5]);
        assert!(trace.is_non_increasing());
        assert_eq!(trace.final_min(), Some(0.5));
    }

    #[test]
    fn report_csv() {
        let mut r = DiagnosticsReport::default();
        r.push("a", 0.5, true);
        r.push("b", -1.0, false);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "check,value,pass\na,5e-1,true\nb,-1e0,false\n");
        assert!(!r.all_pass());
    }
}
