//! One-dimensional Gauss–Legendre panels.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Number of nodes per panel.
pub const ORDER: usize = 20;

/// Nodes and weights on `[-1, 1]`, computed once by Newton iteration on `P_n`.
pub fn rule() -> &'static ([f64; ORDER], [f64; ORDER]) {
    static RULE: OnceLock<([f64; ORDER], [f64; ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = ORDER;
        let mut x = [0.0; ORDER];
        let mut w = [0.0; ORDER];
        for i in 0..n {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            x[i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
        (x, w)
    })
}

/// `∫_a^b f` with one Gauss–Legendre panel.
pub fn panel(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = rule();
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter()
        .zip(w)
        .map(|(xi, wi)| wi * f(mid + half * xi))
        .sum::<f64>()
        * half
}

/// `∫_a^b f` for `0 < a < b`, with panels whose endpoints grow geometrically
/// by at most `ratio` and which also break at every point of `breaks`.
pub fn geometric(a: f64, b: f64, ratio: f64, breaks: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    debug_assert!(a > 0.0 && b > a && ratio > 1.0);
    let mut cuts = vec![a];
    let mut t = a;
    while t * ratio < b {
        t *= ratio;
        cuts.push(t);
    }
    cuts.extend(breaks.iter().copied().filter(|&c| c > a && c < b));
    cuts.push(b);
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup();
    cuts.windows(2).map(|w| panel(w[0], w[1], &f)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        let (_, w) = rule();
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn integrates_polynomials_exactly() {
        // degree 2n-1 = 39 is exact; check degree 10
        let v = panel(0.0, 2.0, |x| x.powi(10));
        assert!((v - 2f64.powi(11) / 11.0).abs() < 1e-10);
    }

    #[test]
    fn geometric_handles_power_singularity_off_origin() {
        let v = geometric(1e-3, 1.0, 2.0, &[], |x| x.powf(-0.5));
        assert!((v - 2.0 * (1.0 - 1e-3f64.sqrt())).abs() < 1e-12);
    }
}
