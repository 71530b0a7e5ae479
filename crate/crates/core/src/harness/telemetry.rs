//! Per-step telemetry CSV: writing, reading back, and replay checks.

use std::io::{Read, Write};

use crate::diagnostics::{ConvergenceTrace, DiagnosticsReport, ROUNDING_SLACK};
use crate::error::{Error, Result};
use crate::types::StepRecord;

/// Largest first-moment identity residual accepted, relative to `1 + |m_t|`.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;

const LEADING: [&str; 6] = ["t", "epoch", "eta_t", "p_now", "loss", "grad_norm_sq"];
const PER_GROUP: [&str; 4] = ["param_norm", "cos_sim", "projected", "effective_step_norm"];
const TRAILING: [&str; 2] = ["lemma2_residual", "lemma3_margin"];

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn telemetry_header(group_names: &[String]) -> Vec<String> {
    let mut h: Vec<String> = LEADING.iter().map(|s| s.to_string()).collect();
    for g in group_names {
        h.extend(PER_GROUP.iter().map(|c| format!("{g}.{c}")));
    }
    h.extend(TRAILING.iter().map(|s| s.to_string()));
    h
}

/// Header row, then one row per step. Floats use shortest round-trip
/// notation; optional columns are left empty.
pub fn write_telemetry<W: Write>(records: &[StepRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let names: Vec<String> = records
        .first()
        .map(|r| r.groups.iter().map(|g| g.name.clone()).collect())
        .unwrap_or_default();
    out.write_record(telemetry_header(&names))?;
    for r in records {
        let mut row = vec![
            r.t.to_string(),
            r.epoch.to_string(),
            num(r.eta_t),
            num(r.p_now),
            num(r.loss),
            num(r.grad_norm_sq),
        ];
        for g in &r.groups {
            row.push(num(g.param_norm));
            row.push(num(g.cos_sim));
            row.push(u8::from(g.projected).to_string());
            row.push(num(g.effective_step_norm));
        }
        row.push(opt(r.lemma2_residual));
        row.push(opt(r.lemma3_margin));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Checkpoints of the gradient-norm estimate: `t,estimate,running_min`.
pub fn write_convergence<W: Write>(trace: &ConvergenceTrace, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "estimate", "running_min"])?;
    for p in &trace.points {
        out.write_record([p.t.to_string(), num(p.estimate), num(p.running_min)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_convergence<R: Read>(r: R) -> Result<ConvergenceTrace> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut trace = ConvergenceTrace::default();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(Error::InvalidArgument("convergence csv needs 3 columns".into()));
        }
        let t = parse_u64(&rec[0])?;
        let estimate = parse_f64(&rec[1])?;
        trace.push(t, estimate);
    }
    Ok(trace)
}

/// One telemetry row with the group columns kept in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRow {
    pub t: u64,
    pub epoch: u64,
    pub eta_t: f64,
    pub p_now: f64,
    pub loss: f64,
    pub grad_norm_sq: f64,
    /// `(param_norm, cos_sim, projected, effective_step_norm)` per group.
    pub groups: Vec<(f64, f64, bool, f64)>,
    pub lemma2_residual: Option<f64>,
    pub lemma3_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Telemetry {
    pub group_names: Vec<String>,
    pub rows: Vec<TelemetryRow>,
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad number `{s}` in telemetry")))
}

fn parse_u64(s: &str) -> Result<u64> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad integer `{s}` in telemetry")))
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        parse_f64(s).map(Some)
    }
}

pub fn read_telemetry<R: Read>(r: R) -> Result<Telemetry> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let bad_header = || Error::InvalidArgument("telemetry header does not match the schema".into());
    let per_group_cols = header
        .len()
        .checked_sub(LEADING.len() + TRAILING.len())
        .filter(|n| n % PER_GROUP.len() == 0)
        .ok_or_else(bad_header)?;
    let group_names: Vec<String> = header[LEADING.len()..LEADING.len() + per_group_cols]
        .chunks(PER_GROUP.len())
        .map(|c| c[0].strip_suffix(".param_norm").map(str::to_owned).ok_or_else(bad_header))
        .collect::<Result<_>>()?;
    if header != telemetry_header(&group_names) {
        return Err(bad_header());
    }

    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let k = LEADING.len();
        let groups = (0..group_names.len())
            .map(|g| {
                let b = k + g * PER_GROUP.len();
                let projected = match rec[b + 2].trim() {
                    "1" => true,
                    "0" => false,
                    other => {
                        return Err(Error::InvalidArgument(format!("bad projected flag `{other}`")))
                    }
                };
                Ok((parse_f64(&rec[b])?, parse_f64(&rec[b + 1])?, projected, parse_f64(&rec[b + 3])?))
            })
            .collect::<Result<_>>()?;
        let tail = k + per_group_cols;
        rows.push(TelemetryRow {
            t: parse_u64(&rec[0])?,
            epoch: parse_u64(&rec[1])?,
            eta_t: parse_f64(&rec[2])?,
            p_now: parse_f64(&rec[3])?,
            loss: parse_f64(&rec[4])?,
            grad_norm_sq: parse_f64(&rec[5])?,
            groups,
            lemma2_residual: parse_opt(&rec[tail])?,
            lemma3_margin: parse_opt(&rec[tail + 1])?,
        });
    }
    Ok(Telemetry { group_names, rows })
}

/// Checks that can be decided from the telemetry alone.
pub fn check_telemetry(tel: &Telemetry, convergence: Option<&ConvergenceTrace>) -> DiagnosticsReport {
    let mut report = DiagnosticsReport::default();
    let rows = &tel.rows;
    report.push("telemetry_nonempty", rows.len() as f64, !rows.is_empty());

    let consecutive = rows.iter().enumerate().all(|(i, r)| r.t == i as u64 + 1);
    report.push("steps_consecutive", f64::from(u8::from(consecutive)), consecutive);

    let finite = rows.iter().all(|r| {
        r.loss.is_finite()
            && r.grad_norm_sq.is_finite()
            && r.groups.iter().all(|g| g.0.is_finite() && g.3.is_finite())
    });
    report.push("values_finite", f64::from(u8::from(finite)), finite);

    let lr_ok = rows.windows(2).all(|w| w[1].eta_t <= w[0].eta_t);
    report.push("learning_rate_non_increasing", f64::from(u8::from(lr_ok)), lr_ok);

    let c1 = rows.iter().map(|r| r.grad_norm_sq.sqrt()).fold(0.0, f64::max);
    report.push("gradient_bound_c1", c1, c1.is_finite());

    let residuals: Vec<f64> = rows.iter().filter_map(|r| r.lemma2_residual).collect();
    if !residuals.is_empty() {
        let worst = residuals.iter().copied().fold(0.0, f64::max);
        report.push("first_moment_identity_residual", worst, worst < IDENTITY_TOLERANCE);
    }
    let margins: Vec<f64> = rows.iter().filter_map(|r| r.lemma3_margin).collect();
    if !margins.is_empty() {
        let worst = margins.iter().copied().fold(f64::INFINITY, f64::min);
        report.push("second_moment_bound_slack", worst, worst >= -ROUNDING_SLACK);
    }
    if let Some(trace) = convergence {
        let ok = trace.is_non_increasing();
        report.push("running_min_non_increasing", f64::from(u8::from(ok)), ok);
        if let Some(m) = trace.final_min() {
            report.push_info("final_running_min_grad_norm_sq", m);
        }
    }
    report
}
