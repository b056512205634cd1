//! Independent oracles shared by the integration tests. They use nalgebra for every
//! factorisation so they do not share code paths with the crate under test.
#![allow(dead_code)]

use hrom_core::linalg::DenseMatrix;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn to_na(a: &DenseMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(a.rows(), a.cols(), a.data())
}

pub fn random(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
}

/// Random matrix with orthonormal columns.
pub fn orthonormal(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DenseMatrix<f64> {
    let q = to_na(&random(rng, m, n)).qr().q();
    DenseMatrix::from_fn(m, n, |i, j| q[(i, j)])
}

pub fn rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den
}

pub fn rel_frob(a: &DenseMatrix<f64>, b: &DenseMatrix<f64>) -> f64 {
    a.sub(b).frobenius_norm() / b.frobenius_norm()
}

/// Exhaustive active-set NNLS: the best feasible unconstrained solve over all column
/// subsets (including the empty one).
pub fn nnls_oracle(a: &DenseMatrix<f64>, b: &[f64]) -> (Vec<f64>, f64) {
    let a = to_na(a);
    let n = a.ncols();
    let rhs = DVector::from_column_slice(b);
    let mut best = (vec![0.0; n], rhs.norm());
    for mask in 1u32..(1 << n) {
        let cols: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        let sub = a.select_columns(&cols);
        let Ok(x) = sub.clone().svd(true, true).solve(&rhs, 1e-13) else {
            continue;
        };
        if x.iter().any(|&v| v < 0.0) {
            continue;
        }
        let res = (&sub * &x - &rhs).norm();
        if res < best.1 - 1e-14 {
            let mut w = vec![0.0; n];
            for (k, &j) in cols.iter().enumerate() {
                w[j] = x[k];
            }
            best = (w, res);
        }
    }
    best
}

fn dofs(cells: &[usize], c: usize, m: usize) -> Vec<usize> {
    (0..c).flat_map(|f| cells.iter().map(move |&k| f * m + k)).collect()
}

fn cell_sums(r: &DMatrix<f64>, c: usize) -> Vec<f64> {
    let m = r.nrows() / c;
    (0..m)
        .map(|k| (0..c).map(|f| r.row(f * m + k).norm_squared()).sum())
        .collect()
}

fn argmax_free(s: &[f64], taken: &[usize]) -> usize {
    let mut best = usize::MAX;
    for k in 0..s.len() {
        if !taken.contains(&k) && (best == usize::MAX || s[k] > s[best]) {
            best = k;
        }
    }
    best
}

/// Per-cell squared gappy residual `A − U(PU)†PA` with `A = U`.
pub fn gappy_scores(u: &DMatrix<f64>, cells: &[usize], c: usize) -> Vec<f64> {
    if cells.is_empty() {
        return cell_sums(u, c);
    }
    let m = u.nrows() / c;
    let pu = u.select_rows(&dofs(cells, c, m));
    let pinv = pu.clone().pseudo_inverse(1e-13).expect("pseudo-inverse");
    cell_sums(&(u - u * (pinv * pu)), c)
}

/// Replays the DEIM greedy by brute force over all free cells at each step.
pub fn deim_oracle(u: &DenseMatrix<f64>, r_h: usize, forced: &[usize], c: usize) -> Vec<usize> {
    let u = to_na(u);
    let mut cells = forced.to_vec();
    for _ in 0..r_h {
        let s = gappy_scores(&u, &cells, c);
        cells.push(argmax_free(&s, &cells));
    }
    cells[forced.len()..].to_vec()
}

/// S-optimality from the determinant formula.
pub fn sopt_det(pu: &DMatrix<f64>) -> f64 {
    let (rows, cols) = pu.shape();
    if rows < cols {
        return 0.0;
    }
    let det = (pu.transpose() * pu).determinant().max(0.0);
    let prod: f64 = (0..cols).map(|j| pu.column(j).norm()).product();
    ((det.sqrt() / prod).powf(1.0 / cols as f64)).clamp(0.0, 1.0)
}

/// Replays the S-OPT greedy: per-step argmax of the score, DEIM rule when all vanish.
pub fn sopt_oracle(u: &DenseMatrix<f64>, r_h: usize, forced: &[usize], c: usize) -> Vec<usize> {
    let u = to_na(u);
    let m = u.nrows() / c;
    let mut cells = forced.to_vec();
    for _ in 0..r_h {
        let s: Vec<f64> = (0..m)
            .map(|k| {
                if cells.contains(&k) {
                    return 0.0;
                }
                let mut trial = cells.clone();
                trial.push(k);
                sopt_det(&u.select_rows(&dofs(&trial, c, m)))
            })
            .collect();
        let best = s[argmax_free(&s, &cells)];
        let k = (0..m).find(|j| !cells.contains(j) && s[*j] >= best - 1e-12 * best).unwrap();
        if s[k] == 0.0 {
            let g = gappy_scores(&u, &cells, c);
            cells.push(argmax_free(&g, &cells));
        } else {
            cells.push(k);
        }
    }
    cells[forced.len()..].to_vec()
}

/// Index of the steepest downward jump `u[i-1] − u[i]` (the shock cell).
pub fn shock_cell(u: &[f64]) -> usize {
    (1..u.len())
        .max_by(|&a, &b| (u[a - 1] - u[a]).total_cmp(&(u[b - 1] - u[b])))
        .unwrap_or(0)
}
