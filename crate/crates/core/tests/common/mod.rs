//! Independent reference computations shared by the integration tests.
//! Nothing here calls into the library's numerical code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| StandardNormal.sample(&mut *rng)).collect())
        .collect()
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(&mut *rng)).collect()
}

/// `t × d` design with `(1/t)AᵀA = I` (requires `t ≥ d`), by modified
/// Gram-Schmidt on the columns of a Gaussian matrix.
pub fn orthonormalized_design(rng: &mut ChaCha8Rng, t: usize, d: usize) -> Vec<Vec<f64>> {
    assert!(t >= d);
    let raw = gaussian_matrix(rng, t, d);
    let mut cols: Vec<Vec<f64>> = (0..d).map(|j| raw.iter().map(|r| r[j]).collect()).collect();
    for j in 0..d {
        for k in 0..j {
            let proj: f64 = (0..t).map(|i| cols[j][i] * cols[k][i]).sum::<f64>() / t as f64;
            for i in 0..t {
                cols[j][i] -= proj * cols[k][i];
            }
        }
        let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in cols[j].iter_mut() {
            *v *= (t as f64).sqrt() / norm;
        }
    }
    (0..t).map(|i| (0..d).map(|j| cols[j][i]).collect()).collect()
}

pub fn soft(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

pub fn lasso_objective(a: &[Vec<f64>], r: &[f64], theta: &[f64], lambda: f64) -> f64 {
    let t = a.len() as f64;
    let rss: f64 = a
        .iter()
        .zip(r)
        .map(|(row, y)| {
            let e = y - row.iter().zip(theta).map(|(x, b)| x * b).sum::<f64>();
            e * e
        })
        .sum();
    rss / t + lambda * theta.iter().map(|v| v.abs()).sum::<f64>()
}

/// Brute-force LASSO minimizer: exhaustive search over the full lattice
/// `center + step·{−1,0,1}^d`, recentering on the best point and halving the
/// step whenever the center wins, down to `resolution`. Starts from a step
/// covering the ball `‖θ‖₁ ≤ f(0)/λ` that must contain the minimizer.
pub fn lattice_lasso(a: &[Vec<f64>], r: &[f64], lambda: f64, resolution: f64) -> (Vec<f64>, f64) {
    let d = a[0].len();
    let mut center = vec![0.0; d];
    let mut best = lasso_objective(a, r, &center, lambda);
    let mut step = (best / lambda).max(1.0);
    let points = 3usize.pow(d as u32);
    let mut cand = vec![0.0; d];
    while step > resolution {
        let mut improved = false;
        let mut best_point = center.clone();
        for code in 0..points {
            let mut c = code;
            for j in 0..d {
                let digit = (c % 3) as f64 - 1.0;
                c /= 3;
                cand[j] = center[j] + digit * step;
            }
            let f = lasso_objective(a, r, &cand, lambda);
            if f < best {
                best = f;
                best_point.copy_from_slice(&cand);
                improved = true;
            }
        }
        if improved {
            center = best_point;
        } else {
            step /= 2.0;
        }
    }
    (center, best)
}

/// Solves `Mx = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(m: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut aug: Vec<Vec<f64>> = m.iter().zip(b).map(|(row, &bi)| {
        let mut r = row.clone();
        r.push(bi);
        r
    }).collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
            .expect("nonempty");
        aug.swap(col, piv);
        for i in col + 1..n {
            let f = aug[i][col] / aug[col][col];
            for k in col..=n {
                aug[i][k] -= f * aug[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| aug[i][k] * x[k]).sum();
        x[i] = (aug[i][n] - s) / aug[i][i];
    }
    x
}

/// Minimum-norm least squares through the Tikhonov limit
/// `(AᵀA + εI)⁻¹Aᵀr`, which converges to the pseudoinverse solution as
/// `ε → 0`.
pub fn tikhonov_min_norm(a: &[Vec<f64>], r: &[f64], eps: f64) -> Vec<f64> {
    let d = a[0].len();
    let mut g = vec![vec![0.0; d]; d];
    let mut b = vec![0.0; d];
    for (row, y) in a.iter().zip(r) {
        for i in 0..d {
            b[i] += row[i] * y;
            for j in 0..d {
                g[i][j] += row[i] * row[j];
            }
        }
    }
    for (i, gi) in g.iter_mut().enumerate() {
        gi[i] += eps;
    }
    gauss_solve(&g, &b)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}
