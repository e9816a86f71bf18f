//! Independent oracles shared by unit tests. Everything here is computed
//! from ascending series or closed forms, never through the quadrature or
//! asymptotic paths under test.

/// K0 by its ascending series:
/// K0(x) = -(ln(x/2) + gamma) I0(x) + sum_{k>=1} (x/2)^{2k}/(k!)^2 H_k.
pub fn k0_series(x: f64) -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    let q = 0.25 * x * x;
    let mut i0 = 1.0;
    let mut term = 1.0;
    let mut sum = 0.0;
    let mut harmonic = 0.0;
    for k in 1..60 {
        term *= q / ((k * k) as f64);
        i0 += term;
        harmonic += 1.0 / k as f64;
        sum += term * harmonic;
    }
    -((0.5 * x).ln() + EULER_GAMMA) * i0 + sum
}

/// I0 by its ascending series.
pub fn i0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / ((k * k) as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

/// K0(e) and friends are used by the sister-identity tests; keep a
/// general-x K0 plus I0 so those assertions stay independent.
pub fn sister_lhs_zero_order(x: f64, y: f64) -> f64 {
    if x <= y {
        i0_series(x.exp()) * k0_series(y.exp())
    } else {
        i0_series(y.exp()) * k0_series(x.exp())
    }
}
