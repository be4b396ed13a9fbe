//! Composite Gauss–Legendre rules: the deterministic oracle for averages
//! along one-parameter families.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "rule needs at least one node");
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `∫_a^b g` with `panels` equal panels of an `order`-point rule.
pub fn integrate<F: Fn(f64) -> f64>(g: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let rule = gauss_legendre(order);
    let h = (b - a) / panels.max(1) as f64;
    let mut total = 0.0;
    for p in 0..panels.max(1) {
        let mid = a + (p as f64 + 0.5) * h;
        let part: f64 = rule.iter().map(|(x, w)| w * g(mid + 0.5 * h * x)).sum();
        total += 0.5 * h * part;
    }
    total
}

/// Average of `g` over `[0, length]`, with panels fine enough for an
/// integrand oscillating at most `max_frequency` times per unit length.
pub fn line_average<F: Fn(f64) -> f64>(g: F, length: f64, max_frequency: f64) -> f64 {
    let panels = ((length * max_frequency.max(1.0)).ceil() as usize * 2).max(16);
    integrate(g, 0.0, length, panels, 10) / length
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_polynomials() {
        let v = integrate(|x| x.powi(9) - 3.0 * x * x, 0.0, 2.0, 1, 5);
        assert!((v - (1024.0 / 10.0 - 8.0)).abs() < 1e-11, "{v}");
    }

    #[test]
    fn oscillatory_line() {
        let w = 0.7;
        let t = 300.0;
        let exact = ((2.0 * PI * w * t).sin()) / (2.0 * PI * w * t);
        assert!((line_average(|s| (2.0 * PI * w * s).cos(), t, w) - exact).abs() < 1e-12);
    }
}
