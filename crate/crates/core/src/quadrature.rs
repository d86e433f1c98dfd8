//! Gauss–Legendre rules and the Duffy-style map onto the standard simplex.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Shared rule cache: building an `n`-point rule costs O(n²), so panel
/// integrators must not recompute one per call.
pub fn gauss_legendre_cached(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&n) {
        return rule.clone();
    }
    let fresh = Arc::new(gauss_legendre(n));
    cache.lock().unwrap().entry(n).or_insert(fresh).clone()
}

/// Smallest cached bucket size ≥ n (so rule reuse stays high for
/// oscillation-adaptive node counts).
pub fn bucket_size(n: usize) -> usize {
    let mut size = 16;
    while size < n {
        size += size / 2;
    }
    size
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// by Newton iteration on the Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P'_n(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            pp = if n == 1 {
                1.0
            } else {
                (n as f64) * (x * p1 - p0) / (x * x - 1.0)
            };
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// The same rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        xs.iter().map(|x| mid + half * x).collect(),
        ws.iter().map(|w| w * half).collect(),
    )
}

/// Tensor quadrature on the corner simplex `{x ∈ R^n_{≥0} : Σ x_i ≤ 1}` with
/// respect to Lebesgue measure, via the map
/// `x_1 = u_1, x_2 = (1-u_1) u_2, …, x_n = (1-u_1)⋯(1-u_{n-1}) u_n`
/// from the unit cube, whose Jacobian is `Π_j (1-u_j)^{n-j}`.
///
/// Returns `(nodes, weights)`; each node is the full barycentric tuple
/// `(s_0, …, s_n)` with `s_0 = 1 - Σ x_i`. Total weight is `1/n!`.
pub fn simplex_rule(n: usize, points_per_dim: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    if n == 0 {
        return (vec![vec![1.0]], vec![1.0]);
    }
    let (u_nodes, u_weights) = gauss_legendre_on(points_per_dim, 0.0, 1.0);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut index = vec![0usize; n];
    loop {
        let mut x = vec![0.0; n];
        let mut w = 1.0;
        let mut remaining = 1.0;
        for j in 0..n {
            let u = u_nodes[index[j]];
            x[j] = remaining * u;
            w *= u_weights[index[j]] * remaining;
            remaining *= 1.0 - u;
        }
        let s0 = 1.0 - x.iter().sum::<f64>();
        let mut node = Vec::with_capacity(n + 1);
        node.push(s0.max(0.0));
        node.extend_from_slice(&x);
        nodes.push(node);
        weights.push(w);

        // Odometer over the tensor grid.
        let mut j = 0;
        loop {
            index[j] += 1;
            if index[j] < points_per_dim {
                break;
            }
            index[j] = 0;
            j += 1;
            if j == n {
                return (nodes, weights);
            }
        }
    }
}
