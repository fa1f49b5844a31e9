//! Dense kernels over row-major `f64` buffers.

/// `c = a·b (+ c)` where `a` is `m×k` (stored `k×m` when `trans_a`) and `b`
/// is `k×n` (stored `n×k` when `trans_b`). `c` is row-major `m×n`.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    trans_a: bool,
    trans_b: bool,
    m: usize,
    n: usize,
    k: usize,
    a: &[f64],
    b: &[f64],
    c: &mut [f64],
    accumulate: bool,
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the bounds asserted above cover every element addressed by the strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `y = x·w + bias` for `x: rows×d_in`, `w: d_in×d_out`.
pub fn linear(x: &[f64], w: &[f64], bias: &[f64], rows: usize, d_in: usize, d_out: usize) -> Vec<f64> {
    let mut y = Vec::with_capacity(rows * d_out);
    for _ in 0..rows {
        y.extend_from_slice(bias);
    }
    gemm(false, false, rows, d_out, d_in, x, w, &mut y, true);
    y
}

/// Accumulates `dw += xᵀ·dy`, `db += Σ dy` and returns `dx = dy·wᵀ`.
#[allow(clippy::too_many_arguments)]
pub fn linear_backward(
    x: &[f64],
    w: &[f64],
    dy: &[f64],
    rows: usize,
    d_in: usize,
    d_out: usize,
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    gemm(true, false, d_in, d_out, rows, x, dy, dw, true);
    for r in 0..rows {
        for (acc, g) in db.iter_mut().zip(&dy[r * d_out..(r + 1) * d_out]) {
            *acc += g;
        }
    }
    let mut dx = vec![0.0; rows * d_in];
    gemm(false, true, rows, d_in, d_out, dy, w, &mut dx, false);
    dx
}

pub struct LayerNormCache {
    pub xhat: Vec<f64>,
    pub rstd: Vec<f64>,
}

pub fn layer_norm(
    x: &[f64],
    gamma: &[f64],
    beta: &[f64],
    width: usize,
    eps: f64,
) -> (Vec<f64>, LayerNormCache) {
    let rows = x.len() / width;
    let mut y = vec![0.0; x.len()];
    let mut xhat = vec![0.0; x.len()];
    let mut rstd = vec![0.0; rows];
    for r in 0..rows {
        let row = &x[r * width..(r + 1) * width];
        let mean = row.iter().sum::<f64>() / width as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / width as f64;
        let s = 1.0 / (var + eps).sqrt();
        rstd[r] = s;
        for j in 0..width {
            let h = (row[j] - mean) * s;
            xhat[r * width + j] = h;
            y[r * width + j] = gamma[j] * h + beta[j];
        }
    }
    (y, LayerNormCache { xhat, rstd })
}

pub fn layer_norm_backward(
    dy: &[f64],
    cache: &LayerNormCache,
    gamma: &[f64],
    width: usize,
    dgamma: &mut [f64],
    dbeta: &mut [f64],
) -> Vec<f64> {
    let rows = dy.len() / width;
    let mut dx = vec![0.0; dy.len()];
    let mut dxhat = vec![0.0; width];
    for r in 0..rows {
        let dyr = &dy[r * width..(r + 1) * width];
        let xh = &cache.xhat[r * width..(r + 1) * width];
        let mut mean_d = 0.0;
        let mut mean_dx = 0.0;
        for j in 0..width {
            dgamma[j] += dyr[j] * xh[j];
            dbeta[j] += dyr[j];
            dxhat[j] = dyr[j] * gamma[j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * xh[j];
        }
        mean_d /= width as f64;
        mean_dx /= width as f64;
        let s = cache.rstd[r];
        for j in 0..width {
            dx[r * width + j] = s * (dxhat[j] - mean_d - xh[j] * mean_dx);
        }
    }
    dx
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Exact (erf-based) GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / SQRT_2))
}

pub fn gelu_grad(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / SQRT_2)) + x * INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// In-place numerically stable softmax of one row.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

/// Indices of the `k` largest entries among those with `eligible[i]`,
/// ordered by value descending then index ascending.
pub fn top_k(values: &[f64], eligible: &[bool], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| eligible[i]).collect();
    let cmp = |a: &usize, b: &usize| values[*b].total_cmp(&values[*a]).then(a.cmp(b));
    if k < idx.len() {
        idx.select_nth_unstable_by(k, cmp);
        idx.truncate(k);
    }
    idx.sort_by(cmp);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_all_transposes() {
        // a = [[1,2,3],[4,5,6]] (2x3), b = [[1,0],[0,1],[1,1]] (3x2)
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let at = [1.0, 4.0, 2.0, 5.0, 3.0, 6.0];
        let b = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let bt = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let expect = [4.0, 5.0, 10.0, 11.0];
        for (ta, tb) in [(false, false), (true, false), (false, true), (true, true)] {
            let mut c = [0.0; 4];
            gemm(ta, tb, 2, 2, 3, if ta { &at } else { &a }, if tb { &bt } else { &b }, &mut c, false);
            assert_eq!(c, expect, "ta={ta} tb={tb}");
        }
    }

    #[test]
    fn gelu_derivative_matches_differences() {
        for &x in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn top_k_ties_break_by_index() {
        let v = [0.1, 0.5, 0.5, 0.9, 0.2];
        assert_eq!(top_k(&v, &[true; 5], 3), vec![3, 1, 2]);
        assert_eq!(top_k(&v, &[true, true, false, false, true], 5), vec![1, 4, 0]);
    }
}
