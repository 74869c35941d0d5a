//! Riemann zeta function and its derivative on the real line, by
//! Euler–Maclaurin summation.

use crate::arith::CompensatedSum;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const HEAD: u32 = 20;

/// `B_{2k} / (2k)!` for `k = 1..=14`.
const BERNOULLI_OVER_FACTORIAL: [f64; 14] = [
    1.0 / 6.0 / 2.0,
    -1.0 / 30.0 / 24.0,
    1.0 / 42.0 / 720.0,
    -1.0 / 30.0 / 40_320.0,
    5.0 / 66.0 / 3_628_800.0,
    -691.0 / 2730.0 / 479_001_600.0,
    7.0 / 6.0 / 87_178_291_200.0,
    -3617.0 / 510.0 / 20_922_789_888_000.0,
    43_867.0 / 798.0 / 6_402_373_705_728_000.0,
    -174_611.0 / 330.0 / 2_432_902_008_176_640_000.0,
    854_513.0 / 138.0 / 1.124_000_727_777_607_7e21,
    -236_364_091.0 / 2730.0 / 6.204_484_017_332_394e23,
    8_553_103.0 / 6.0 / 4.032_914_611_266_056_4e26,
    -23_749_461_029.0 / 870.0 / 3.048_883_446_117_138_5e29,
];

/// `(zeta(s), zeta'(s))` for real `s != 1`.
///
/// Accurate to about 1e-15 relative for `s` in `[-10, 200]` away from the pole.
pub fn zeta_with_derivative(s: f64) -> (f64, f64) {
    assert!(s != 1.0, "zeta has a pole at s = 1");
    let n = HEAD as f64;
    let ln_n = n.ln();
    let mut value = CompensatedSum::new();
    let mut deriv = CompensatedSum::new();
    for k in (1..HEAD).rev() {
        let kf = k as f64;
        let t = kf.powf(-s);
        value += t;
        deriv += -kf.ln() * t;
    }
    let n_pow = n.powf(-s);
    let tail = n * n_pow / (s - 1.0);
    value += tail;
    deriv += -ln_n * tail - tail / (s - 1.0);
    value += 0.5 * n_pow;
    deriv += -0.5 * ln_n * n_pow;

    // rising product s (s+1) ... (s+2k-2) and its derivative
    let mut p = s;
    let mut dp = 1.0;
    let mut n_pow_k = n_pow / n;
    for (k, &c) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        if k > 0 {
            for j in [2 * k - 1, 2 * k] {
                let a = s + j as f64;
                dp = dp * a + p;
                p *= a;
            }
            n_pow_k /= n * n;
        }
        value += c * p * n_pow_k;
        deriv += c * (dp - ln_n * p) * n_pow_k;
    }
    (value.value(), deriv.value())
}

pub fn zeta(s: f64) -> f64 {
    zeta_with_derivative(s).0
}

pub fn zeta_derivative(s: f64) -> f64 {
    zeta_with_derivative(s).1
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn even_values() {
        assert!(close(zeta(2.0), PI * PI / 6.0, 1e-14));
        assert!(close(zeta(4.0), PI.powi(4) / 90.0, 1e-14));
        assert!(close(zeta(6.0), PI.powi(6) / 945.0, 1e-14));
    }

    #[test]
    fn known_values() {
        assert!(close(zeta(3.0), 1.202_056_903_159_594_2, 1e-14));
        assert!(close(zeta(0.0), -0.5, 1e-14));
        assert!(close(zeta(-1.0), -1.0 / 12.0, 1e-13));
        assert!(close(zeta(0.5), -1.460_354_508_809_586_8, 1e-13));
        assert!(close(zeta_derivative(2.0), -0.937_548_254_315_843_8, 1e-13));
        assert!(close(zeta_derivative(0.0), -0.5 * (2.0 * PI).ln(), 1e-13));
        assert!(close(zeta(60.0), 1.0 + 2f64.powi(-60), 1e-16));
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        for s in [1.2, 1.7, 2.5, 3.5, 7.0, -0.3] {
            let h = 1e-5;
            let fd = (zeta(s + h) - zeta(s - h)) / (2.0 * h);
            assert!(close(zeta_derivative(s), fd, 1e-8), "s = {s}");
        }
    }
}
