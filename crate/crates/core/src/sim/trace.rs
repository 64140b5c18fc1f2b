//! CSV export of a trace: one header row, then one row per control step.
//! Floats carry 17 significant digits so the text round-trips exactly.

use std::io::Write;

use crate::error::Result;

use super::TraceRecord;

fn axes(prefix: &str) -> [String; 3] {
    ["x", "y", "z"].map(|a| format!("{prefix}_{a}"))
}

/// Column names for a trace with `joints` joints and `obstacles` obstacles.
pub fn trace_header(joints: usize, obstacles: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend((0..joints).map(|i| format!("q{i}")));
    cols.extend((0..joints).map(|i| format!("qd{i}")));
    cols.extend(["px", "py", "pz", "vx", "vy", "vz"].map(String::from));
    cols.extend(axes("xdes"));
    cols.extend(axes("unom"));
    cols.extend(axes("usafe"));
    cols.extend((0..joints).map(|i| format!("tau{i}")));
    for k in 0..obstacles {
        cols.extend(
            ["px", "py", "pz", "dist", "h", "active"].map(|f| format!("obs{k}_{f}")),
        );
    }
    cols.push("infeasible".into());
    cols
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn write_trace_csv<W: Write>(mut out: W, trace: &[TraceRecord]) -> Result<()> {
    let (joints, obstacles) = trace
        .first()
        .map_or((0, 0), |r| (r.q.len(), r.obstacles.len()));
    writeln!(out, "{}", trace_header(joints, obstacles).join(","))?;
    let mut row: Vec<String> = Vec::new();
    for r in trace {
        row.clear();
        row.push(num(r.t));
        row.extend(r.q.iter().chain(r.qdot.iter()).map(|&v| num(v)));
        row.extend(
            r.p_ee
                .iter()
                .chain(r.v_ee.iter())
                .chain(r.x_des.iter())
                .chain(r.u_nom.iter())
                .chain(r.u_safe.iter())
                .chain(r.tau.iter())
                .map(|&v| num(v)),
        );
        for o in &r.obstacles {
            row.extend(o.center.iter().map(|&v| num(v)));
            row.push(num(o.distance));
            row.push(num(o.h));
            row.push(flag(o.active).into());
        }
        row.push(flag(r.infeasible).into());
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let h = trace_header(2, 1);
        assert_eq!(
            h.join(","),
            "t,q0,q1,qd0,qd1,px,py,pz,vx,vy,vz,xdes_x,xdes_y,xdes_z,unom_x,unom_y,unom_z,\
             usafe_x,usafe_y,usafe_z,tau0,tau1,obs0_px,obs0_py,obs0_pz,obs0_dist,obs0_h,\
             obs0_active,infeasible"
        );
    }

    #[test]
    fn numbers_round_trip_through_text() {
        for v in [0.1, 1.0 / 3.0, -2.5e-7, 123456.789, f64::MIN_POSITIVE] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(0.5), "5.0000000000000000e-1");
    }
}
