//! Small dense matrices: the wall Hessians and Newton systems have one row
//! per domain wall, so plain row-major `Vec<Vec<f64>>` is enough.

use crate::error::{Error, Result};

pub type Matrix = Vec<Vec<f64>>;

pub fn zeros(n: usize) -> Matrix {
    vec![vec![0.0; n]; n]
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut m: Matrix = a.clone();
    let mut x = b.to_vec();
    let scale = a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[piv][col].abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Precondition("singular linear system".into()));
        }
        m.swap(col, piv);
        x.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..n {
                    m[r][c] -= f * m[col][c];
                }
                x[r] -= f * x[col];
            }
        }
    }
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (x[r] - s) / m[r][r];
    }
    Ok(x)
}

/// Cholesky test: every pivot must exceed `rel_tol · max|H|`.
pub fn positive_definite(h: &Matrix, rel_tol: f64) -> bool {
    let n = h.len();
    if n == 0 {
        return true;
    }
    let scale = h.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return false;
    }
    let mut l = zeros(n);
    for j in 0..n {
        let d = h[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d <= rel_tol * scale {
            return false;
        }
        l[j][j] = d.sqrt();
        for i in j + 1..n {
            let s = h[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            l[i][j] = s / l[j][j];
        }
    }
    true
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(h: &Matrix) -> Vec<f64> {
    let n = h.len();
    let mut a = h.clone();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = vec![vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]];
        let x = solve(&a, &[5.0, 3.0, 4.0]).unwrap();
        for (xi, e) in x.iter().zip([1.0, 2.0, 1.0]) {
            assert!((xi - e).abs() < 1e-14, "{x:?}");
        }
        assert!(solve(&vec![vec![1.0, 2.0], vec![2.0, 4.0]], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn definiteness_examples() {
        assert!(positive_definite(&vec![vec![1.0, 0.0], vec![0.0, 2.0]], 1e-12));
        assert!(!positive_definite(&vec![vec![1.0, 0.0], vec![0.0, -0.5]], 1e-12));
        assert!(positive_definite(&vec![vec![2.0, -1.0], vec![-1.0, 2.0]], 1e-12));
        assert!(!positive_definite(&vec![vec![1.0, 1.0], vec![1.0, 1.0]], 1e-12));
    }

    #[test]
    fn jacobi_eigenvalues() {
        let ev = symmetric_eigenvalues(&vec![vec![2.0, -1.0], vec![-1.0, 2.0]]);
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }
}
