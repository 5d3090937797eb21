//! CSV writers for traces, feedforward tables and the condition summary.

use std::io::Write;

use super::run::TraceRow;
use super::{ConditionMatrix, FeedforwardRow, HarnessError};

pub const TRACE_HEADER: [&str; 24] = [
    "t", "px", "py", "pz", "prx", "pry", "prz", "vx", "vy", "vz", "qw", "qx", "qy", "qz", "qdw", "qdx", "qdy", "qdz",
    "fz", "wx", "wy", "wz", "alpha", "singular",
];

pub const FEEDFORWARD_HEADER: [&str; 20] = [
    "t", "px", "py", "pz", "vx", "vy", "vz", "ax", "ay", "az", "qw", "qx", "qy", "qz", "fz", "wx", "wy", "wz",
    "alpha", "singular",
];

/// 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_trace<W: Write>(out: W, rows: &[TraceRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in rows {
        let mut rec: Vec<String> = Vec::with_capacity(24);
        rec.push(num(r.t));
        rec.extend(r.p.iter().chain(r.p_ref.iter()).chain(r.v.iter()).map(|x| num(*x)));
        rec.extend([r.q.w, r.q.x, r.q.y, r.q.z, r.q_d.w, r.q_d.x, r.q_d.y, r.q_d.z].map(num));
        rec.push(num(r.thrust));
        rec.extend(r.body_rate.iter().map(|x| num(*x)));
        rec.push(num(r.alpha));
        rec.push(r.singular.code().to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_feedforward<W: Write>(out: W, rows: &[FeedforwardRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FEEDFORWARD_HEADER)?;
    for r in rows {
        let s = &r.sample;
        let o = &r.output;
        let q = &r.q;
        let mut rec: Vec<String> = vec![num(r.t)];
        rec.extend(s.p.iter().chain(s.v.iter()).chain(s.a.iter()).map(|x| num(*x)));
        rec.extend([q.w, q.x, q.y, q.z, o.thrust].map(num));
        rec.extend(o.body_rate.iter().map(|x| num(*x)));
        rec.push(num(o.alpha));
        rec.push(o.singular_case.code().to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `condition,rmse,peak_error,status` rows followed by the ablation rows.
pub fn write_summary<W: Write>(out: W, matrix: &ConditionMatrix) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["condition", "rmse", "peak_error", "status"])?;
    for cell in &matrix.cells {
        match &cell.result {
            Ok(run) => w.write_record([cell.condition.name().to_string(), num(run.rmse), num(run.peak_error()), "ok".into()])?,
            Err(e) => w.write_record([cell.condition.name().to_string(), String::new(), String::new(), e.to_string()])?,
        }
    }
    match &matrix.ablation {
        Ok(a) => {
            let status = match a.deviation_speed {
                Some(v) if a.diverged => format!("diverged at {v:.3} m/s"),
                Some(v) => format!("deviated at {v:.3} m/s"),
                None => "no deviation".into(),
            };
            w.write_record(["rate-ff-on".to_string(), String::new(), num(a.baseline_peak), "ok".into()])?;
            w.write_record(["rate-ff-off".to_string(), String::new(), num(a.ablated_peak), status])?;
        }
        Err(e) => {
            w.write_record(["rate-ff-on".to_string(), String::new(), String::new(), e.to_string()])?;
            w.write_record(["rate-ff-off".to_string(), String::new(), String::new(), e.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
