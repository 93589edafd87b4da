//! Derivative-free maximization and finite-difference helpers shared by
//! the fitting and profiling code. Internal to the crate.

/// Outcome of a simplex search.
#[derive(Debug, Clone)]
pub(crate) struct SimplexResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    // diagnostic; production callers re-certify via polish and gradient
    #[allow(dead_code)]
    pub converged: bool,
}

/// Nelder-Mead maximization with the standard coefficients (reflection 1,
/// expansion 2, contraction 1/2, shrink 1/2). Objective values of NaN or
/// -inf are treated as arbitrarily bad, so the simplex backs away from
/// invalid regions on its own. Converges when the best-to-worst objective
/// spread falls below `tol`.
pub(crate) fn nelder_mead_max<F: Fn(&[f64]) -> f64>(
    f: F,
    start: &[f64],
    step: &[f64],
    tol: f64,
    max_iter: usize,
) -> SimplexResult {
    let n = start.len();
    assert!(n >= 1 && step.len() == n);
    let bad = f64::NEG_INFINITY;
    let eval = |x: &[f64]| -> f64 {
        let v = f(x);
        if v.is_nan() {
            bad
        } else {
            v
        }
    };
    // Vertices of the initial simplex: start plus one offset per axis.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = start.to_vec();
    let f0 = eval(&v0);
    simplex.push((v0, f0));
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += step[i];
        let fv = eval(&v);
        simplex.push((v, fv));
    }
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        // Descending by objective: best first.
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if best.is_finite() && (best - worst).abs() < tol {
            converged = true;
            break;
        }
        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; n];
        for (v, _) in simplex.iter().take(n) {
            for (c, &vi) in centroid.iter_mut().zip(v) {
                *c += vi;
            }
        }
        for c in &mut centroid {
            *c /= n as f64;
        }
        let worst_x = simplex[n].0.clone();
        let second_worst = simplex[n - 1].1;
        let point_along = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst_x)
                .map(|(&c, &w)| c + coef * (c - w))
                .collect()
        };
        let reflected = point_along(1.0);
        let f_r = eval(&reflected);
        if f_r > best {
            let expanded = point_along(2.0);
            let f_e = eval(&expanded);
            if f_e > f_r {
                simplex[n] = (expanded, f_e);
            } else {
                simplex[n] = (reflected, f_r);
            }
        } else if f_r > second_worst {
            simplex[n] = (reflected, f_r);
        } else {
            // Contract toward the centroid, outside or inside.
            let (contracted, f_c) = if f_r > worst {
                let c = point_along(0.5);
                let fc = eval(&c);
                (c, fc)
            } else {
                let c = point_along(-0.5);
                let fc = eval(&c);
                (c, fc)
            };
            if f_c > worst.max(f_r) {
                simplex[n] = (contracted, f_c);
            } else {
                // Shrink everything toward the best vertex.
                let best_x = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    for (xi, &bi) in entry.0.iter_mut().zip(&best_x) {
                        *xi = bi + 0.5 * (*xi - bi);
                    }
                    entry.1 = eval(&entry.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
    SimplexResult {
        x: simplex[0].0.clone(),
        iterations,
        converged,
    }
}

/// Central-difference gradient with per-coordinate steps scaled to the
/// argument magnitude.
pub(crate) fn gradient_central<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h_rel: f64) -> Vec<f64> {
    let mut g = Vec::with_capacity(x.len());
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = h_rel * (1.0 + x[i].abs());
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        g.push((fp - fm) / (2.0 * h));
    }
    g
}

/// Central-difference Hessian (symmetric by construction).
pub(crate) fn hessian_central<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h_rel: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let f0 = f(x);
    let h: Vec<f64> = x.iter().map(|&xi| h_rel * (1.0 + xi.abs())).collect();
    let mut hess = vec![vec![0.0; n]; n];
    let mut xp = x.to_vec();
    for i in 0..n {
        xp[i] = x[i] + h[i];
        let fp = f(&xp);
        xp[i] = x[i] - h[i];
        let fm = f(&xp);
        xp[i] = x[i];
        hess[i][i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in (i + 1)..n {
            xp[i] = x[i] + h[i];
            xp[j] = x[j] + h[j];
            let fpp = f(&xp);
            xp[j] = x[j] - h[j];
            let fpm = f(&xp);
            xp[i] = x[i] - h[i];
            let fmm = f(&xp);
            xp[j] = x[j] + h[j];
            let fmp = f(&xp);
            xp[i] = x[i];
            xp[j] = x[j];
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    hess
}

/// Inverse of a symmetric 2x2 matrix, or `None` when it is not positive
/// definite (leading minor or determinant nonpositive, or any entry not
/// finite).
pub(crate) fn invert_spd_2x2(m: &[[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let (a, b, d) = (m[0][0], m[0][1], m[1][1]);
    if !a.is_finite() || !b.is_finite() || !d.is_finite() {
        return None;
    }
    let det = a * d - b * b;
    if a <= 0.0 || det <= 0.0 {
        return None;
    }
    Some([[d / det, -b / det], [-b / det, a / det]])
}

/// A few damped Newton ascent steps on central differences. Each step is
/// kept only if it improves the objective; used to polish a simplex
/// solution. Returns the improved point, its value, and steps taken.
pub(crate) fn newton_polish_max<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    max_steps: usize,
) -> (Vec<f64>, f64, usize) {
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut taken = 0;
    for _ in 0..max_steps {
        let g = gradient_central(&f, &x, 1e-6);
        let h = hessian_central(&f, &x, 1e-4);
        let step = match x.len() {
            1 => {
                if h[0][0] >= 0.0 || !h[0][0].is_finite() {
                    break;
                }
                vec![-g[0] / h[0][0]]
            }
            2 => {
                // Newton direction solves H s = -g; for a maximum -H must
                // be positive definite.
                let neg_h = [[-h[0][0], -h[0][1]], [-h[1][0], -h[1][1]]];
                let Some(inv) = invert_spd_2x2(&neg_h) else { break };
                vec![
                    inv[0][0] * g[0] + inv[0][1] * g[1],
                    inv[1][0] * g[0] + inv[1][1] * g[1],
                ]
            }
            _ => break,
        };
        // Backtracking line search on the Newton direction.
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let cand: Vec<f64> = x.iter().zip(&step).map(|(&xi, &si)| xi + scale * si).collect();
            let fc = f(&cand);
            if fc > fx {
                x = cand;
                fx = fc;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        taken += 1;
        if !improved {
            break;
        }
        let step_norm: f64 = step.iter().map(|s| (scale * s) * (scale * s)).sum::<f64>().sqrt();
        if step_norm < 1e-12 {
            break;
        }
    }
    (x, fx, taken)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_finds_quadratic_maximum() {
        let f = |x: &[f64]| -((x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2));
        let r = nelder_mead_max(f, &[0.0, 0.0], &[0.5, 0.5], 1e-12, 500);
        assert!(r.converged);
        assert!((r.x[0] - 3.0).abs() < 1e-5, "{:?}", r.x);
        assert!((r.x[1] + 1.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn simplex_backs_away_from_invalid_region() {
        // Objective undefined (NaN) for x < 0; maximum at x = 0.5.
        let f = |x: &[f64]| {
            if x[0] < 0.0 {
                f64::NAN
            } else {
                -(x[0] - 0.5).powi(2)
            }
        };
        let r = nelder_mead_max(f, &[2.0], &[0.7], 1e-13, 500);
        assert!((r.x[0] - 0.5).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn newton_polish_tightens_a_rough_solution() {
        let f = |x: &[f64]| -((x[0] - 3.0).powi(2) + 0.5 * (x[1] + 1.0).powi(2));
        let (x, fx, steps) = newton_polish_max(f, &[2.9, -1.1], 10);
        assert!(steps >= 1);
        assert!(fx > -1e-14);
        assert!((x[0] - 3.0).abs() < 1e-7);
        assert!((x[1] + 1.0).abs() < 1e-7);
    }

    #[test]
    fn gradient_and_hessian_match_closed_forms() {
        let f = |x: &[f64]| x[0] * x[0] * x[1] + (x[1] * 0.5).sin();
        let x = [1.3, -0.4];
        let g = gradient_central(f, &x, 1e-6);
        assert!((g[0] - 2.0 * 1.3 * -0.4).abs() < 1e-8);
        assert!((g[1] - (1.3f64 * 1.3 + 0.5 * (0.5f64 * -0.4).cos())).abs() < 1e-8);
        let h = hessian_central(f, &x, 1e-4);
        assert!((h[0][0] - 2.0 * -0.4).abs() < 1e-5);
        assert!((h[0][1] - 2.0 * 1.3).abs() < 1e-6);
        assert!((h[1][1] + 0.25 * (0.5f64 * -0.4).sin()).abs() < 1e-5);
    }

    #[test]
    fn spd_inverse_rejects_indefinite_matrices() {
        assert!(invert_spd_2x2(&[[1.0, 2.0], [2.0, 1.0]]).is_none());
        assert!(invert_spd_2x2(&[[-1.0, 0.0], [0.0, 2.0]]).is_none());
        let inv = invert_spd_2x2(&[[4.0, 1.0], [1.0, 2.0]]).unwrap();
        // Check m * inv = I.
        assert!((4.0 * inv[0][0] + 1.0 * inv[1][0] - 1.0).abs() < 1e-14);
        assert!((4.0 * inv[0][1] + 1.0 * inv[1][1]).abs() < 1e-14);
        assert!((1.0 * inv[0][1] + 2.0 * inv[1][1] - 1.0).abs() < 1e-14);
    }
}
