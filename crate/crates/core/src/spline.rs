//! Trajectory smoothing with least-squares cubic B-splines.

use crate::geometry::BBox;

/// Frames between interior knots.
const KNOT_SPACING: f64 = 5.0;
/// Tracks shorter than this pass through unchanged.
const MIN_POINTS: usize = 5;

/// Clamped cubic B-spline basis values at `t` for the given knot
/// vector, via Cox-de Boor recursion. `knots` includes the 4-fold end
/// repetitions; the number of basis functions is knots.len() - 4.
fn basis_at(knots: &[f64], t: f64) -> Vec<f64> {
    let n = knots.len() - 4;
    let mut b = vec![0.0; knots.len() - 1];
    // Degree 0: indicator of the half-open knot span, closed at the end.
    let last = knots[knots.len() - 1];
    for (i, w) in b.iter_mut().enumerate() {
        let hi = knots[i + 1];
        *w = if (knots[i] <= t && t < hi) || (t == last && hi == last && knots[i] < hi) {
            1.0
        } else {
            0.0
        };
    }
    for degree in 1..=3usize {
        for i in 0..knots.len() - 1 - degree {
            let left_den = knots[i + degree] - knots[i];
            let right_den = knots[i + degree + 1] - knots[i + 1];
            let left = if left_den > 0.0 {
                (t - knots[i]) / left_den * b[i]
            } else {
                0.0
            };
            let right = if right_den > 0.0 {
                (knots[i + degree + 1] - t) / right_den * b[i + 1]
            } else {
                0.0
            };
            b[i] = left + right;
        }
    }
    b.truncate(n);
    b
}

/// Gaussian elimination with partial pivoting; None when singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let (piv, piv_val) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if piv_val < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut v = rhs[r];
        for c in r + 1..n {
            v -= a[r][c] * x[c];
        }
        x[r] = v / a[r][r];
    }
    Some(x)
}

/// Least-squares fit of one series at the given sample positions;
/// returns the smoothed series, or None when the system is too thin to
/// solve (the caller then keeps the raw series).
fn fit_series(ts: &[f64], ys: &[f64]) -> Option<Vec<f64>> {
    let t0 = ts[0];
    let t1 = *ts.last().unwrap();
    if t1 <= t0 {
        return None;
    }
    let mut knots = vec![t0; 4];
    let mut k = t0 + KNOT_SPACING;
    while k < t1 {
        knots.push(k);
        k += KNOT_SPACING;
    }
    knots.extend_from_slice(&[t1; 4]);
    let n_ctrl = knots.len() - 4;
    if n_ctrl > ts.len() {
        return None;
    }

    let design: Vec<Vec<f64>> = ts.iter().map(|&t| basis_at(&knots, t)).collect();
    // Normal equations with a whisper of ridge for empty knot spans.
    let mut ata = vec![vec![0.0; n_ctrl]; n_ctrl];
    let mut aty = vec![0.0; n_ctrl];
    for (row, &y) in design.iter().zip(ys) {
        for i in 0..n_ctrl {
            if row[i] == 0.0 {
                continue;
            }
            aty[i] += row[i] * y;
            for j in 0..n_ctrl {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    for (i, r) in ata.iter_mut().enumerate() {
        r[i] += 1e-12;
    }
    let coef = solve_dense(ata, aty)?;
    Some(
        design
            .iter()
            .map(|row| row.iter().zip(&coef).map(|(b, c)| b * c).sum())
            .collect(),
    )
}

/// Smooths one track by fitting independent cubic B-splines (interior
/// knots every five frames, clamped ends) to center-x, center-y, width
/// and height. The frame set is unchanged; short tracks pass through.
pub fn smooth_track(track: &[(u32, BBox)]) -> Vec<(u32, BBox)> {
    if track.len() < MIN_POINTS {
        return track.to_vec();
    }
    let ts: Vec<f64> = track.iter().map(|(f, _)| *f as f64).collect();
    let series: [Vec<f64>; 4] = [
        track.iter().map(|(_, b)| b.center().0).collect(),
        track.iter().map(|(_, b)| b.center().1).collect(),
        track.iter().map(|(_, b)| b.width()).collect(),
        track.iter().map(|(_, b)| b.height()).collect(),
    ];
    let mut fitted = Vec::with_capacity(4);
    for s in &series {
        match fit_series(&ts, s) {
            Some(f) => fitted.push(f),
            None => return track.to_vec(),
        }
    }
    track
        .iter()
        .enumerate()
        .map(|(i, (frame, _))| {
            let (cx, cy) = (fitted[0][i], fitted[1][i]);
            let w = fitted[2][i].max(1.0);
            let h = fitted[3][i].max(1.0);
            (
                *frame,
                BBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0),
            )
        })
        .collect()
}
