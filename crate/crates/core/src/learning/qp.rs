//! The small master QP of the cutting-plane loop, solved in the dual.
//!
//! Primal: min 1/2 ||w||^2 + C xi  s.t.  <w, delta_r> >= loss_r - xi,
//! xi >= 0. The dual is a box-constrained quadratic over multipliers
//! alpha_r >= 0 with sum alpha <= C, small enough for coordinate
//! ascent:
//! single-coordinate steps against the budget slack plus pairwise
//! exchanges once the budget is tight.

use crate::potentials::BlockVector;

/// One aggregated cutting plane: the feature difference between the
/// ground truth and a violating labeling, with its loss.
#[derive(Debug, Clone)]
pub struct ConstraintRow {
    pub delta_psi: BlockVector,
    pub loss: f64,
}

const KKT_TOL: f64 = 1e-6;
const MAX_SWEEPS: usize = 20_000;

/// Solves the master QP, returning (w, xi). With no rows the answer is
/// (0, 0); otherwise coordinate ascent runs until the KKT violation
/// drops below 1e-6.
pub fn solve_master_qp(rows: &[ConstraintRow], c: f64, layout_of: &BlockVector) -> (BlockVector, f64) {
    let layout = layout_of.layout;
    let mut w = BlockVector::zeros(layout);
    if rows.is_empty() || c <= 0.0 {
        return (w, 0.0);
    }

    let r = rows.len();
    let mut alpha = vec![0.0; r];
    let norms: Vec<f64> = rows.iter().map(|row| row.delta_psi.norm_sq()).collect();

    let grad = |w: &BlockVector, i: usize| rows[i].loss - w.dot(&rows[i].delta_psi);

    for _sweep in 0..MAX_SWEEPS {
        let mut slack = c - alpha.iter().sum::<f64>();
        let mut moved = 0.0f64;

        for i in 0..r {
            let g = grad(&w, i);
            let t = if norms[i] > 1e-12 {
                (g / norms[i]).clamp(-alpha[i], slack)
            } else if g > 0.0 {
                slack
            } else {
                -alpha[i]
            };
            if t.abs() > 1e-15 {
                alpha[i] += t;
                slack -= t;
                w.add_scaled(&rows[i].delta_psi, t);
                moved = moved.max(t.abs());
            }
        }

        // Pairwise exchanges matter once the budget is exhausted: mass
        // moves between rows without changing the total.
        if slack < 1e-12 * c.max(1.0) {
            for i in 0..r {
                for j in 0..r {
                    if i == j || alpha[j] <= 0.0 {
                        continue;
                    }
                    let g = grad(&w, i) - grad(&w, j);
                    let mut denom = norms[i] + norms[j]
                        - 2.0 * rows[i].delta_psi.dot(&rows[j].delta_psi);
                    if denom < 1e-12 {
                        denom = 1e-12;
                    }
                    let t = (g / denom).clamp(-alpha[i], alpha[j]);
                    if t.abs() > 1e-15 {
                        alpha[i] += t;
                        alpha[j] -= t;
                        w.add_scaled(&rows[i].delta_psi, t);
                        w.add_scaled(&rows[j].delta_psi, -t);
                        moved = moved.max(t.abs());
                    }
                }
            }
        }

        // KKT check: xi is the largest violation; every positive
        // multiplier must sit on it, and leftover budget forces xi = 0.
        let xi = (0..r).fold(0.0f64, |m, i| m.max(grad(&w, i)));
        let slack = c - alpha.iter().sum::<f64>();
        let mut viol = 0.0f64;
        for i in 0..r {
            if alpha[i] > 1e-9 {
                viol = viol.max(xi - grad(&w, i));
            }
        }
        if slack > 1e-9 * c.max(1.0) {
            viol = viol.max(xi);
        }
        if viol < KKT_TOL {
            break;
        }
        if moved < 1e-15 {
            break; // fully stalled; the KKT report below is best effort
        }
    }

    let xi = (0..r).fold(0.0f64, |m, i| m.max(grad(&w, i)));
    (w, xi)
}

/// Primal master objective at (w, xi).
pub fn master_objective(w: &BlockVector, xi: f64, c: f64) -> f64 {
    0.5 * w.norm_sq() + c * xi
}

/// Largest violation of the stored rows beyond xi; nonpositive when
/// every constraint is satisfied.
pub fn max_constraint_violation(rows: &[ConstraintRow], w: &BlockVector, xi: f64) -> f64 {
    rows.iter()
        .map(|r| r.loss - w.dot(&r.delta_psi) - xi)
        .fold(f64::NEG_INFINITY, f64::max)
}
