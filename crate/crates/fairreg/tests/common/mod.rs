//! Shared independent oracles for the integration suites: quadrature for
//! the synthetic generator's group means, a Newton reference fit for
//! logistic regression, brute-force split search, and finite-difference
//! helpers. These deliberately avoid the library's own code paths they
//! are used to check.

#![allow(dead_code)]

use fairreg::linalg::{sigmoid, Matrix};

/// E[Y|Z=1] and E[Y|Z=0] of the synthetic generator, by Gauss-Hermite
/// quadrature over the distribution of the label log-odds: conditional
/// on Z, the sum of the 14 contributing Gaussian columns makes the
/// log-odds N(2.25·Z, 0.875).
pub fn synthetic_group_means_quadrature() -> (f64, f64) {
    let (nodes, weights) = hermite_nodes_64();
    let integrate = |mu: f64, sd: f64| -> f64 {
        let mut acc = 0.0;
        for (&x, &w) in nodes.iter().zip(&weights) {
            acc += w * sigmoid(mu + sd * std::f64::consts::SQRT_2 * x);
        }
        acc / std::f64::consts::PI.sqrt()
    };
    let sd = 0.875f64.sqrt();
    (integrate(2.25, sd), integrate(0.0, sd))
}

/// 64-point Gauss-Hermite rule computed by Newton iteration on the
/// Hermite recurrence (physicists' convention, ∫ e^{-x²} f(x) dx).
fn hermite_nodes_64() -> (Vec<f64>, Vec<f64>) {
    let n = 64usize;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let sqrt_pi = std::f64::consts::PI.sqrt();
    // initial guesses per Numerical Recipes
    let mut z = 0.0f64;
    for i in 0..(n + 1) / 2 {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0 / sqrt_pi.sqrt();
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2
                    - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    (nodes, weights)
}

/// Reference logistic fit: full Newton (iteratively reweighted least
/// squares) with a dense solve, independent of the gradient-descent
/// trainer it is used to check.
pub fn irls_logistic(x: &Matrix, y: &[u8], iters: usize) -> (Vec<f64>, f64) {
    let n = x.n_rows();
    let p = x.n_cols();
    let mut w = vec![0.0; p + 1]; // last entry is the intercept
    for _ in 0..iters {
        let mut grad = vec![0.0; p + 1];
        let mut hess = vec![vec![0.0; p + 1]; p + 1];
        for i in 0..n {
            let row = x.row(i);
            let mut s = w[p];
            for j in 0..p {
                s += w[j] * row[j];
            }
            let pr = sigmoid(s);
            let r = pr - y[i] as f64;
            let d = (pr * (1.0 - pr)).max(1e-12);
            for j in 0..p {
                grad[j] += r * row[j];
                for k in j..p {
                    hess[j][k] += d * row[j] * row[k];
                }
                hess[j][p] += d * row[j];
            }
            grad[p] += r;
            hess[p][p] += d;
        }
        for j in 0..p + 1 {
            for k in 0..j {
                hess[j][k] = hess[k][j];
            }
        }
        let step = gauss_solve(hess, grad);
        let mut max_step = 0.0f64;
        for j in 0..p + 1 {
            w[j] -= step[j];
            max_step = max_step.max(step[j].abs());
        }
        if max_step < 1e-12 {
            break;
        }
    }
    let intercept = w[p];
    w.truncate(p);
    (w, intercept)
}

fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let diag = a[col][col];
        for row in col + 1..n {
            let factor = a[row][col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x
}

/// Exhaustive split search by direct summation over every (feature,
/// midpoint) pair; same gain formula and tie-breaking contract as the
/// booster, implemented independently.
pub fn brute_force_best_split(
    x: &Matrix,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    reg_lambda: f64,
) -> Option<(usize, f64, f64)> {
    let g_sum: f64 = rows.iter().map(|&i| grad[i]).sum();
    let h_sum: f64 = rows.iter().map(|&i| hess[i]).sum();
    let parent = g_sum * g_sum / (h_sum + reg_lambda);
    let mut best: Option<(usize, f64, f64)> = None;
    for feature in 0..x.n_cols() {
        let mut values: Vec<f64> = rows.iter().map(|&i| x.get(i, feature)).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        for pair in values.windows(2) {
            let threshold = 0.5 * (pair[0] + pair[1]);
            let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
            for &i in rows {
                if x.get(i, feature) < threshold {
                    gl += grad[i];
                    hl += hess[i];
                } else {
                    gr += grad[i];
                    hr += hess[i];
                }
            }
            let gain = 0.5 * (gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent);
            if gain > 0.0 && best.map_or(true, |(_, _, g)| gain > g) {
                best = Some((feature, threshold, gain));
            }
        }
    }
    best
}

/// Central finite-difference gradient.
pub fn fd_grad(f: &mut dyn FnMut(&[f64]) -> f64, point: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(point.len());
    let mut p = point.to_vec();
    for i in 0..point.len() {
        p[i] = point[i] + h;
        let up = f(&p);
        p[i] = point[i] - h;
        let down = f(&p);
        p[i] = point[i];
        out.push((up - down) / (2.0 * h));
    }
    out
}

/// Second central difference for the Hessian diagonal.
pub fn fd_hess_diag(f: &mut dyn FnMut(&[f64]) -> f64, point: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(point.len());
    let mut p = point.to_vec();
    let mid = f(&p);
    for i in 0..point.len() {
        p[i] = point[i] + h;
        let up = f(&p);
        p[i] = point[i] - h;
        let down = f(&p);
        p[i] = point[i];
        out.push((up - 2.0 * mid + down) / (h * h));
    }
    out
}

pub fn max_rel_err(analytic: &[f64], reference: &[f64], scale_floor: f64) -> f64 {
    analytic
        .iter()
        .zip(reference)
        .map(|(a, r)| (a - r).abs() / a.abs().max(r.abs()).max(scale_floor))
        .fold(0.0, f64::max)
}
