//! Hermite interpolation and fixed-order Gauss–Legendre quadrature.

/// Quintic Hermite interpolant on a step of length `h`, evaluated at the
/// fraction `theta` in `[0, 1]`, from values, first and second derivatives at
/// both ends.
#[allow(clippy::too_many_arguments)]
pub fn quintic_hermite(
    h: f64,
    theta: f64,
    y0: f64,
    d0: f64,
    dd0: f64,
    y1: f64,
    d1: f64,
    dd1: f64,
) -> f64 {
    let t = theta;
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let h3 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h5 = 0.5 * (t3 - 2.0 * t4 + t5);
    y0 * h0 + h * d0 * h1 + h * h * dd0 * h2 + y1 * h3 + h * d1 * h4 + h * h * dd1 * h5
}

/// Cubic Hermite interpolant; returns the value and its derivative.
pub fn cubic_hermite(h: f64, theta: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> (f64, f64) {
    let t = theta;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
    let dh00 = 6.0 * t2 - 6.0 * t;
    let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
    let dh01 = -6.0 * t2 + 6.0 * t;
    let dh11 = 3.0 * t2 - 2.0 * t;
    let deriv = (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1;
    (value, deriv)
}

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Five-point Gauss–Legendre rule on `[a, b]` (exact for degree 9).
pub fn gauss_legendre5<F: FnMut(f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GL5_NODES
        .iter()
        .zip(GL5_WEIGHTS)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Index `i` with `xs[i] <= x <= xs[i + 1]` for sorted `xs`.
pub fn bracket(xs: &[f64], x: f64) -> Option<usize> {
    let n = xs.len();
    if n < 2 || !(x >= xs[0] && x <= xs[n - 1]) {
        return None;
    }
    let i = xs.partition_point(|&v| v <= x);
    Some(i.saturating_sub(1).min(n - 2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quintic_reproduces_quintics() {
        let p = |x: f64| 1.0 - 2.0 * x + 0.5 * x.powi(3) + 0.25 * x.powi(5);
        let dp = |x: f64| -2.0 + 1.5 * x * x + 1.25 * x.powi(4);
        let ddp = |x: f64| 3.0 * x + 5.0 * x.powi(3);
        let (a, b) = (0.3, 1.7);
        for k in 0..=10 {
            let th = k as f64 / 10.0;
            let x = a + th * (b - a);
            let v = quintic_hermite(b - a, th, p(a), dp(a), ddp(a), p(b), dp(b), ddp(b));
            assert_abs_diff_eq!(v, p(x), epsilon = 1e-13);
        }
    }

    #[test]
    fn cubic_reproduces_cubics() {
        let p = |x: f64| 2.0 + x - 3.0 * x * x + x.powi(3);
        let dp = |x: f64| 1.0 - 6.0 * x + 3.0 * x * x;
        let (a, b) = (-1.0, 0.5);
        for k in 0..=8 {
            let th = k as f64 / 8.0;
            let x = a + th * (b - a);
            let (v, d) = cubic_hermite(b - a, th, p(a), dp(a), p(b), dp(b));
            assert_abs_diff_eq!(v, p(x), epsilon = 1e-13);
            assert_abs_diff_eq!(d, dp(x), epsilon = 1e-12);
        }
    }

    #[test]
    fn gauss_legendre_is_exact_to_degree_nine() {
        let v = gauss_legendre5(0.0, 2.0, |x| x.powi(9));
        assert_abs_diff_eq!(v, 2f64.powi(10) / 10.0, epsilon = 1e-10);
        let v = gauss_legendre5(0.0, 1.0, f64::exp);
        assert_abs_diff_eq!(v, 1f64.exp() - 1.0, epsilon = 1e-12);
    }

    #[test]
    fn bracket_finds_interval() {
        let xs = [0.0, 1.0, 2.0, 4.0];
        assert_eq!(bracket(&xs, 0.0), Some(0));
        assert_eq!(bracket(&xs, 1.0), Some(1));
        assert_eq!(bracket(&xs, 3.0), Some(2));
        assert_eq!(bracket(&xs, 4.0), Some(2));
        assert_eq!(bracket(&xs, 4.5), None);
        assert_eq!(bracket(&xs, f64::NAN), None);
    }
}
