//! Interpolation and differentiation weights on arbitrary 1-D node sets.

/// Weights `w` such that `Σ w_k f(nodes[k])` equals the `order`-th derivative
/// at `x0` of the polynomial interpolating `f` on `nodes` (Fornberg's recursion).
/// `order = 0` gives Lagrange interpolation weights.
pub fn lagrange_weights(nodes: &[f64], x0: f64, order: usize) -> Vec<f64> {
    let n = nodes.len();
    assert!(n > order, "need more than {order} nodes");
    // c[k][m]: weight of node k for derivative m
    let mut c = vec![vec![0.0; order + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}
