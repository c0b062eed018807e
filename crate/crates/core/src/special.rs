//! Special functions needed by the parametric families.

pub use statrs::function::gamma::ln_gamma;

/// B_{2i} / (2i)! for i = 1..=8.
const EM_COEFFS: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30_240.0,
    -1.0 / 1_209_600.0,
    1.0 / 47_900_160.0,
    -691.0 / 1_307_674_368_000.0,
    1.0 / 74_724_249_600.0,
    -3617.0 / 10_670_622_842_880_000.0,
];

/// Hurwitz zeta function `sum_{j>=0} (a + j)^{-s}` for `s > 1`, `a > 0`.
///
/// Euler-Maclaurin summation after shifting the argument past 12, which keeps
/// the truncated Bernoulli series below double-precision round-off for the
/// exponents used here.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    debug_assert!(s > 1.0 && a > 0.0);
    if s > 40.0 {
        return hurwitz_direct(s, a);
    }
    let shift = if a >= 12.0 {
        0
    } else {
        (12.0 - a).ceil() as u32
    };
    let mut head = 0.0;
    for j in 0..shift {
        head += (a + j as f64).powf(-s);
    }
    let x = a + shift as f64;
    let x_pow = x.powf(-s);
    let mut acc = x * x_pow / (s - 1.0) + 0.5 * x_pow;
    // rising factorial s (s+1) ... (s+2i-2), times x^{-s-2i+1}
    let mut rising = s;
    let mut power = x_pow / x;
    let inv_x2 = 1.0 / (x * x);
    for (i, c) in EM_COEFFS.iter().enumerate() {
        let term = c * rising * power;
        acc += term;
        if term.abs() < 1e-18 * acc.abs() {
            break;
        }
        let m = (2 * i + 1) as f64;
        rising *= (s + m) * (s + m + 1.0);
        power *= inv_x2;
    }
    head + acc
}

fn hurwitz_direct(s: f64, a: f64) -> f64 {
    let mut acc = 0.0;
    let mut j = 0.0;
    loop {
        let term = (a + j).powf(-s);
        acc += term;
        if term <= 1e-18 * acc {
            // integral tail is smaller still
            return acc + (a + j) * term / (s - 1.0);
        }
        j += 1.0;
    }
}

/// Riemann zeta function for `s > 1`.
pub fn zeta(s: f64) -> f64 {
    hurwitz_zeta(s, 1.0)
}
