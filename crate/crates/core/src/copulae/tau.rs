use crate::linalg::Matrix;

/// Kendall's tau-b by Knight's merge-sort algorithm, `O(N log N)`.
/// `None` when either column is constant.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "kendall_tau needs equal lengths");
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    tau_sorted(x, y, &order)
}

/// `order` sorts the rows by `x`, then by `y` within ties of `x`.
fn tau_sorted(x: &[f64], y: &[f64], order: &[usize]) -> Option<f64> {
    let n = order.len();
    if n < 2 {
        return None;
    }
    let n0 = (n * (n - 1) / 2) as f64;
    let (mut tx, mut txy) = (0u64, 0u64);
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && x[order[j]] == x[order[i]] {
            j += 1;
        }
        tx += pairs(j - i);
        // joint ties inside the x-tie group (already sorted by y)
        let mut k = i;
        while k < j {
            let mut l = k + 1;
            while l < j && y[order[l]] == y[order[k]] {
                l += 1;
            }
            txy += pairs(l - k);
            k = l;
        }
        i = j;
    }
    let mut ys: Vec<f64> = order.iter().map(|&r| y[r]).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);
    let mut ty = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && ys[j] == ys[i] {
            j += 1;
        }
        ty += pairs(j - i);
        i = j;
    }
    let (tx, ty, txy) = (tx as f64, ty as f64, txy as f64);
    let denom = ((n0 - tx) * (n0 - ty)).sqrt();
    if denom == 0.0 {
        return None;
    }
    Some((n0 - tx - ty + txy - 2.0 * swaps as f64) / denom)
}

fn pairs(t: usize) -> u64 {
    (t * t.saturating_sub(1) / 2) as u64
}

// sorts `v` ascending, returns the number of strict inversions
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (lo_buf, hi_buf) = buf.split_at_mut(mid);
    let mut swaps = {
        let (lo, hi) = v.split_at_mut(mid);
        merge_count(lo, lo_buf) + merge_count(hi, hi_buf)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Pairwise Kendall tau of the columns of `data`. Entries involving a
/// constant column are NaN.
pub fn kendall_tau_matrix(data: &Matrix<f64>) -> Matrix<f64> {
    let d = data.cols();
    let cols: Vec<Vec<f64>> = (0..d).map(|j| data.column(j)).collect();
    let mut out = Matrix::identity(d);
    for a in 0..d {
        let mut order: Vec<usize> = (0..data.rows()).collect();
        order.sort_by(|&p, &q| cols[a][p].total_cmp(&cols[a][q]));
        let ties = has_ties(&cols[a], &order);
        for b in a + 1..d {
            let t = if ties {
                let mut ord = order.clone();
                ord.sort_by(|&p, &q| {
                    cols[a][p]
                        .total_cmp(&cols[a][q])
                        .then(cols[b][p].total_cmp(&cols[b][q]))
                });
                tau_sorted(&cols[a], &cols[b], &ord)
            } else {
                tau_sorted(&cols[a], &cols[b], &order)
            };
            let t = t.unwrap_or(f64::NAN);
            out[(a, b)] = t;
            out[(b, a)] = t;
        }
    }
    out
}

fn has_ties(x: &[f64], order: &[usize]) -> bool {
    order.windows(2).any(|w| x[w[0]] == x[w[1]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive(x: &[f64], y: &[f64]) -> Option<f64> {
        let n = x.len();
        let (mut s, mut nx, mut ny) = (0.0, 0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                let a = (x[i] - x[j]).signum() * f64::from(x[i] != x[j]);
                let b = (y[i] - y[j]).signum() * f64::from(y[i] != y[j]);
                s += a * b;
                nx += a.abs();
                ny += b.abs();
            }
        }
        let denom = (nx * ny).sqrt();
        (denom > 0.0).then(|| s / denom)
    }

    #[test]
    fn simple_cases() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(kendall_tau(&x, &x), Some(1.0));
        assert_eq!(kendall_tau(&x, &[4.0, 3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(kendall_tau(&x, &[1.0; 4]), None);
    }

    proptest! {
        #[test]
        fn matches_naive_with_ties(
            pts in proptest::collection::vec((0u8..6, 0u8..6), 2..80)
        ) {
            let x: Vec<f64> = pts.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1 as f64).collect();
            match (kendall_tau(&x, &y), naive(&x, &y)) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                (a, b) => prop_assert_eq!(a, b),
            }
            let m = Matrix::from_fn(x.len(), 2, |r, c| if c == 0 { x[r] } else { y[r] });
            let tm = kendall_tau_matrix(&m);
            match naive(&x, &y) {
                Some(b) => prop_assert!((tm[(0, 1)] - b).abs() < 1e-12),
                None => prop_assert!(tm[(0, 1)].is_nan()),
            }
        }
    }
}
