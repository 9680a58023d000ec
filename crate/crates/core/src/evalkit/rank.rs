use crate::linalg::Matrix;
use crate::series::VechHistory;

/// Average ranks (1-based), ties share the mean rank.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            r[k] = avg;
        }
        i = j;
    }
    r
}

/// Spearman correlation of every column pair; NaN where a column is
/// constant.
pub fn spearman_matrix(data: &Matrix<f64>) -> Matrix<f64> {
    let d = data.cols();
    let n = data.rows() as f64;
    let centered: Vec<Option<Vec<f64>>> = (0..d)
        .map(|c| {
            let r = ranks(&data.column(c));
            let mean = (n + 1.0) / 2.0;
            let v: Vec<f64> = r.iter().map(|x| x - mean).collect();
            let ss: f64 = v.iter().map(|x| x * x).sum();
            (ss > 0.0).then(|| v.iter().map(|x| x / ss.sqrt()).collect())
        })
        .collect();
    Matrix::from_fn(d, d, |i, j| match (&centered[i], &centered[j]) {
        (Some(a), Some(b)) => {
            if i == j {
                1.0
            } else {
                a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().clamp(-1.0, 1.0)
            }
        }
        _ => f64::NAN,
    })
}

/// `2m × 2m` Spearman matrix of the stacked `(X_{t-1}, X_t)` panel.
pub fn rank_corr_matrix(h: &VechHistory<f64>) -> Matrix<f64> {
    let (t, m) = (h.len(), h.width());
    let stacked = Matrix::from_fn(t.saturating_sub(1), 2 * m, |r, c| {
        if c < m {
            h.values()[(r, c)]
        } else {
            h.values()[(r + 1, c - m)]
        }
    });
    spearman_matrix(&stacked)
}
