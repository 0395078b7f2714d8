//! Symmetric tridiagonal eigensolver (implicit QL with Wilkinson shifts,
//! after EISPACK `tql2`).

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 60;

/// Eigenpairs of a real symmetric tridiagonal matrix, ascending.
#[derive(Debug, Clone)]
pub struct TridiagonalEigen {
    pub values: Vec<f64>,
    /// `vectors[i]` is the unit eigenvector of `values[i]`.
    pub vectors: Vec<Vec<f64>>,
}

/// `diag` has length n, `off` length n − 1 with `off[i]` coupling i and i+1.
pub fn symmetric_tridiagonal_eigen(diag: &[f64], off: &[f64]) -> Result<TridiagonalEigen> {
    let n = diag.len();
    assert!(n >= 1, "empty matrix");
    assert_eq!(off.len() + 1, n, "off-diagonal must have length n - 1");

    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    let mut z: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut col = vec![0.0; n];
            col[i] = 1.0;
            col
        })
        .collect();

    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > MAX_ITERATIONS {
                return Err(Error::NoConvergence {
                    index: l,
                    iterations: MAX_ITERATIONS,
                });
            }

            // Wilkinson shift from the leading 2×2 block.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));

            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // Underflow: the block splits, restart at this l.
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;

                let (lo, hi) = z.split_at_mut(i + 1);
                let (zi, zi1) = (&mut lo[i], &mut hi[0]);
                for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                    let f = *b;
                    *b = s * *a + c * f;
                    *a = c * *a - s * f;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut slots: Vec<Option<Vec<f64>>> = z.into_iter().map(Some).collect();
    let vectors = order
        .iter()
        .map(|&i| slots[i].take().expect("each column is used once"))
        .collect();
    Ok(TridiagonalEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn residual(diag: &[f64], off: &[f64], value: f64, v: &[f64]) -> f64 {
        let n = diag.len();
        (0..n)
            .map(|i| {
                let mut acc = (diag[i] - value) * v[i];
                if i > 0 {
                    acc += off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    acc += off[i] * v[i + 1];
                }
                acc * acc
            })
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn one_by_one() {
        let eig = symmetric_tridiagonal_eigen(&[3.5], &[]).unwrap();
        assert_eq!(eig.values, vec![3.5]);
        assert_eq!(eig.vectors, vec![vec![1.0]]);
    }

    #[test]
    fn uniform_chain_closed_form() {
        let n = 41;
        let diag = vec![0.0; n];
        let off = vec![-1.0; n - 1];
        let eig = symmetric_tridiagonal_eigen(&diag, &off).unwrap();
        let mut expected: Vec<f64> = (1..=n)
            .map(|m| -2.0 * (m as f64 * PI / (n as f64 + 1.0)).cos())
            .collect();
        expected.sort_by(f64::total_cmp);
        for (a, b) in eig.values.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn eigenpairs_are_orthonormal_with_small_residual() {
        let n = 60;
        let diag: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64 * 0.3 - 1.0).collect();
        let off: Vec<f64> = (0..n - 1).map(|i| 0.5 + ((i * 31) % 5) as f64 * 0.1).collect();
        let eig = symmetric_tridiagonal_eigen(&diag, &off).unwrap();
        for w in eig.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
        for (i, vi) in eig.vectors.iter().enumerate() {
            assert!(residual(&diag, &off, eig.values[i], vi) < 1e-13);
            for (j, vj) in eig.vectors.iter().enumerate() {
                let dot: f64 = vi.iter().zip(vj).map(|(a, b)| a * b).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((dot - target).abs() < 1e-13, "({i},{j}) {dot}");
            }
        }
    }

    #[test]
    fn decoupled_blocks() {
        // Zero couplings split the matrix; each block must still resolve.
        let diag = [2.0, 1.0, 5.0, 4.0];
        let off = [0.0, 0.0, 1.0];
        let eig = symmetric_tridiagonal_eigen(&diag, &off).unwrap();
        let mut expected = vec![2.0, 1.0, 4.5 - 0.5 * 5f64.sqrt(), 4.5 + 0.5 * 5f64.sqrt()];
        expected.sort_by(f64::total_cmp);
        for (a, b) in eig.values.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
