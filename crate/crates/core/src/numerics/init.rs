use super::rng::Rng;
use super::tensor::Matrix;

/// Entries i.i.d. uniform in `±√6 / √(rows + cols)`.
pub fn init_glorot_uniform(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    if rows == 0 || cols == 0 {
        return Matrix::zeros(rows, cols);
    }
    let bound = glorot_bound(rows, cols);
    let data = (0..rows * cols)
        .map(|_| rng.uniform_range(-bound, bound))
        .collect();
    Matrix::new(rows, cols, data).expect("finite by construction")
}

pub fn glorot_bound(rows: usize, cols: usize) -> f64 {
    6f64.sqrt() / ((rows + cols) as f64).sqrt()
}

/// Random orthogonal `n × n` matrix: modified Gram–Schmidt (two passes) on
/// the columns of a Gaussian matrix.
pub fn init_orthogonal(rng: &mut Rng, n: usize) -> Matrix {
    loop {
        let mut cols: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.normal()).collect())
            .collect();
        if orthonormalize(&mut cols) {
            let mut m = Matrix::zeros(n, n);
            for (j, col) in cols.iter().enumerate() {
                for (i, &v) in col.iter().enumerate() {
                    m.set(i, j, v);
                }
            }
            return m;
        }
    }
}

fn orthonormalize(cols: &mut [Vec<f64>]) -> bool {
    for j in 0..cols.len() {
        for _ in 0..2 {
            for k in 0..j {
                let proj: f64 = cols[j].iter().zip(&cols[k]).map(|(a, b)| a * b).sum();
                let (done, rest) = cols.split_at_mut(j);
                for (a, b) in rest[0].iter_mut().zip(&done[k]) {
                    *a -= proj * b;
                }
            }
        }
        let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-8 {
            return false;
        }
        for v in cols[j].iter_mut() {
            *v /= norm;
        }
    }
    true
}
