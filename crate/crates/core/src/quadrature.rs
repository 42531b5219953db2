//! Gauss–Legendre rules and panel bookkeeping for the oscillatory integrals.

use std::sync::OnceLock;

/// Nodes and weights of the `n`-point rule on `[−1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "a quadrature rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // P_n(x) and P_n'(x) by the three-term recurrence
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// The 32-point rule, computed once.
pub fn gl32() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(32))
}

/// Nodes and weights of the 32-point rule mapped onto each panel `[b_k, b_{k+1}]`.
pub fn panel_rule(breaks: &[f64]) -> Vec<(f64, f64)> {
    let (x, w) = gl32();
    let mut out = Vec::with_capacity(32 * breaks.len().saturating_sub(1));
    for p in breaks.windows(2) {
        let (mid, half) = (0.5 * (p[0] + p[1]), 0.5 * (p[1] - p[0]));
        out.extend(x.iter().zip(w).map(|(&xi, &wi)| (mid + half * xi, half * wi)));
    }
    out
}

/// Panel breaks from `a` to `b` whose width never exceeds `width(λ)` at the panel's left end,
/// with the given interior points forced to be breaks.
pub fn adaptive_breaks(a: f64, b: f64, forced: &[f64], width: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut stops: Vec<f64> = forced.iter().copied().filter(|&p| p > a && p < b).collect();
    stops.push(b);
    stops.sort_by(f64::total_cmp);
    let mut breaks = vec![a];
    let mut cur = a;
    for stop in stops {
        while cur < stop {
            let w = width(cur).max(1e-12);
            let remaining = stop - cur;
            // split what is left evenly once it fits in fewer than two panels
            let next = if remaining <= w { stop } else if remaining <= 2.0 * w { cur + 0.5 * remaining } else { cur + w };
            breaks.push(next);
            cur = next;
        }
    }
    breaks
}
