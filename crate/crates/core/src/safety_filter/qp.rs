//! Minimum-deviation QP in ℝ³:
//!
//! ```text
//! min ‖u − u_nom‖²  s.t.  aᵢ·u ≥ bᵢ
//! ```
//!
//! With the identity Hessian the optimum is the Euclidean projection of
//! `u_nom` onto a polyhedron. Some optimal KKT point has a linearly
//! independent active set, so at most three rows are active and it suffices
//! to enumerate active subsets of size one to three, keeping the dual- and
//! primal-feasible candidate of least cost.

use nalgebra::{DMatrix, DVector};

use crate::Vec3;

use super::{ConstraintDiagnostics, FilterDiagnostics, SafetyConstraint};

/// Rows with a normal shorter than this carry no information about `u`.
const DEGENERATE_NORM: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;

fn tolerance(row: &SafetyConstraint, u: &Vec3) -> f64 {
    1e-11 * (1.0 + row.b.abs() + row.a.norm() * u.norm())
}

fn satisfied(row: &SafetyConstraint, u: &Vec3, relax: f64) -> bool {
    row.a.dot(u) >= row.b - relax - tolerance(row, u)
}

/// Equality-constrained projection onto the rows in `subset` made tight
/// (relaxed by `relax`). `None` when the rows are numerically dependent or a
/// multiplier is negative.
fn project_onto_subset(
    u_nom: &Vec3,
    rows: &[SafetyConstraint],
    subset: &[usize],
    relax: f64,
) -> Option<Vec3> {
    if let [i] = subset {
        let row = &rows[*i];
        let norm2 = row.a.norm_squared();
        let step = (row.b - relax - row.a.dot(u_nom)) / norm2;
        if step < 0.0 {
            return None;
        }
        return Some(u_nom + row.a * step);
    }
    let k = subset.len();
    let gram = DMatrix::from_fn(k, k, |i, j| rows[subset[i]].a.dot(&rows[subset[j]].a));
    let rhs = DVector::from_fn(k, |i, _| {
        let row = &rows[subset[i]];
        row.b - relax - row.a.dot(u_nom)
    });
    let scale = gram.diagonal().max();
    let chol = gram.cholesky()?;
    // reject near-dependent subsets; a smaller subset covers them
    if chol.l_dirty().diagonal().iter().any(|&l| l * l < 1e-12 * scale) {
        return None;
    }
    let multipliers = chol.solve(&rhs);
    let mult_scale = multipliers.amax().max(1.0);
    if multipliers.iter().any(|&m| m < -1e-12 * mult_scale) {
        return None;
    }
    let mut u = *u_nom;
    for (m, &i) in multipliers.iter().zip(subset) {
        u += rows[i].a * *m;
    }
    Some(u)
}

fn for_each_subset(m: usize, mut visit: impl FnMut(&[usize])) {
    for i in 0..m {
        visit(&[i]);
        for j in i + 1..m {
            visit(&[i, j]);
            for k in j + 1..m {
                visit(&[i, j, k]);
            }
        }
    }
}

/// Optimal point of the problem with every bound relaxed by `relax`, or
/// `None` when that problem is infeasible.
fn solve_relaxed(u_nom: &Vec3, rows: &[SafetyConstraint], relax: f64) -> Option<Vec3> {
    if rows.iter().all(|row| satisfied(row, u_nom, relax)) {
        return Some(*u_nom);
    }
    let usable: Vec<usize> = (0..rows.len())
        .filter(|&i| rows[i].a.norm() >= DEGENERATE_NORM)
        .collect();
    let mut best: Option<(f64, Vec3)> = None;
    for_each_subset(usable.len(), |local| {
        let subset: Vec<usize> = local.iter().map(|&i| usable[i]).collect();
        let Some(u) = project_onto_subset(u_nom, rows, &subset, relax) else {
            return;
        };
        if !rows.iter().all(|row| satisfied(row, &u, relax)) {
            return;
        }
        let cost = (u - u_nom).norm_squared();
        if best.is_none_or(|(c, _)| cost < c) {
            best = Some((cost, u));
        }
    });
    best.map(|(_, u)| u)
}

/// Smallest uniform relaxation making the rows jointly feasible, located by
/// bisection, together with the projection of `u_nom` at that relaxation.
fn least_violation(u_nom: &Vec3, rows: &[SafetyConstraint]) -> Vec3 {
    let mut hi = rows
        .iter()
        .map(|row| row.b - row.a.dot(u_nom))
        .fold(0.0, f64::max);
    let mut lo = 0.0;
    let mut u_hi = solve_relaxed(u_nom, rows, hi).unwrap_or(*u_nom);
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= 1e-14 * (1.0 + hi) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match solve_relaxed(u_nom, rows, mid) {
            Some(u) => {
                hi = mid;
                u_hi = u;
            }
            None => lo = mid,
        }
    }
    u_hi
}

/// Solves the filter QP. Rows already satisfied by `u_nom` leave it
/// untouched bit-for-bit. An infeasible row set yields the point closest to
/// `u_nom` among the minimizers of the largest violation, with the
/// `infeasible` flag raised.
pub fn solve_safety_qp(u_nom: &Vec3, constraints: &[SafetyConstraint]) -> (Vec3, FilterDiagnostics) {
    let mut infeasible = false;
    let u_safe = if constraints.iter().all(|c| c.a.dot(u_nom) >= c.b) {
        *u_nom
    } else {
        match solve_relaxed(u_nom, constraints, 0.0) {
            Some(u) => u,
            None => {
                infeasible = true;
                least_violation(u_nom, constraints)
            }
        }
    };
    let modified = u_safe != *u_nom;
    let rows = constraints
        .iter()
        .map(|c| {
            let margin = c.a.dot(&u_safe) - c.b;
            ConstraintDiagnostics {
                source: c.source,
                barrier_value: c.barrier_value,
                margin,
                active: modified && margin.abs() <= tolerance(c, &u_safe).max(1e-9),
                emergency: false,
            }
        })
        .collect();
    let diagnostics = FilterDiagnostics {
        constraints: rows,
        deviation: (u_safe - u_nom).norm(),
        modified,
        infeasible,
    };
    (u_safe, diagnostics)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(a: [f64; 3], b: f64) -> SafetyConstraint {
        SafetyConstraint {
            a: Vec3::from(a),
            b,
            source: 0,
            barrier_value: 0.0,
        }
    }

    #[test]
    fn satisfied_constraint_is_inactive() {
        let (u, d) = solve_safety_qp(&Vec3::zeros(), &[row([1.0, 0.0, 0.0], -1.0)]);
        assert_eq!(u, Vec3::zeros());
        assert!(!d.modified && !d.constraints[0].active);
        assert_eq!(d.deviation, 0.0);
    }

    #[test]
    fn single_violated_row_projects() {
        let (u, d) = solve_safety_qp(&Vec3::zeros(), &[row([1.0, 0.0, 0.0], 1.0)]);
        assert_eq!(u, Vec3::new(1.0, 0.0, 0.0));
        assert!(d.constraints[0].active && !d.infeasible);
    }

    #[test]
    fn two_orthogonal_rows() {
        let rows = [row([1.0, 0.0, 0.0], 1.0), row([0.0, 1.0, 0.0], 1.0)];
        let (u, d) = solve_safety_qp(&Vec3::zeros(), &rows);
        assert!((u - Vec3::new(1.0, 1.0, 0.0)).norm() < 1e-15);
        assert!(d.constraints.iter().all(|c| c.active));
    }

    #[test]
    fn empty_constraint_set_returns_nominal() {
        let u_nom = Vec3::new(0.1, -2.0, 3.5);
        let (u, d) = solve_safety_qp(&u_nom, &[]);
        assert_eq!(u, u_nom);
        assert!(!d.modified);
    }

    #[test]
    fn redundant_parallel_rows() {
        let rows = [
            row([1.0, 0.0, 0.0], 1.0),
            row([2.0, 0.0, 0.0], 2.0),
            row([1.0, 0.0, 0.0], 0.5),
        ];
        let (u, d) = solve_safety_qp(&Vec3::new(0.0, 0.3, 0.0), &rows);
        assert!((u - Vec3::new(1.0, 0.3, 0.0)).norm() < 1e-15);
        assert!(!d.infeasible);
    }

    #[test]
    fn four_rows_three_active() {
        let rows = [
            row([1.0, 0.0, 0.0], 1.0),
            row([0.0, 1.0, 0.0], 1.0),
            row([0.0, 0.0, 1.0], 1.0),
            row([1.0, 1.0, 1.0], 0.0),
        ];
        let (u, _) = solve_safety_qp(&Vec3::zeros(), &rows);
        assert!((u - Vec3::new(1.0, 1.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn opposing_rows_are_infeasible() {
        // x ≥ 1 and x ≤ -1: least violation at x = 0 with violation 1
        let rows = [row([1.0, 0.0, 0.0], 1.0), row([-1.0, 0.0, 0.0], 1.0)];
        let u_nom = Vec3::new(3.0, 0.5, -0.2);
        let (u, d) = solve_safety_qp(&u_nom, &rows);
        assert!(d.infeasible);
        assert!(u.x.abs() < 1e-9);
        assert!((u.y - 0.5).abs() < 1e-9 && (u.z + 0.2).abs() < 1e-9);
    }

    #[test]
    fn degenerate_row_with_positive_bound_is_infeasible() {
        let rows = [row([0.0, 0.0, 0.0], 0.5), row([1.0, 0.0, 0.0], 1.0)];
        let (u, d) = solve_safety_qp(&Vec3::zeros(), &rows);
        assert!(d.infeasible);
        assert!(u.iter().all(|v| v.is_finite()));
        assert!(u.x >= 1.0 - 0.5 - 1e-9);
    }
}
