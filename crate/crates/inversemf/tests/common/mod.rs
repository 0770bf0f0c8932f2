//! Shared oracles for the integration and acceptance suites.
//!
//! The Moran-equation solvers here are deliberately independent of the
//! pressure pipeline: plain scalar bisection on the closed-form equations
//! that 1-state equal-structure models satisfy.

#![allow(dead_code)]

/// Bisects a strictly monotone scalar function to width `tol`.
pub fn bisect(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut flo = f(lo);
    let fhi = f(hi);
    assert!(
        flo.signum() != fhi.signum(),
        "oracle bracket does not straddle zero: f({lo}) = {flo}, f({hi}) = {fhi}"
    );
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Bowen root: sum of r_s^t over branches = 1.
pub fn moran_bowen(rs: &[f64]) -> f64 {
    bisect(0.0, 1.0, 1e-12, |t| rs.iter().map(|r| r.powf(t)).sum::<f64>() - 1.0)
}

/// Inverse-measure exponent: sum r_s^q p_s^(-t) = 1, solved for t
/// (increasing in t since p_s < 1).
pub fn moran_cal_t(ps: &[f64], rs: &[f64], q: f64) -> f64 {
    bisect(-60.0, 60.0, 1e-12, |t| {
        ps.iter().zip(rs).map(|(p, r)| r.powf(q) * p.powf(-t)).sum::<f64>() - 1.0
    })
}

/// Direct-measure exponent: sum p_s^q r_s^(-t) = 1, solved for t.
pub fn moran_big_t(ps: &[f64], rs: &[f64], q: f64) -> f64 {
    bisect(-60.0, 60.0, 1e-12, |t| {
        ps.iter().zip(rs).map(|(p, r)| p.powf(q) * r.powf(-t)).sum::<f64>() - 1.0
    })
}

/// Branch data (masses, ratios) of the closed-form preset models.
pub fn moran_data(name: &str) -> (Vec<f64>, Vec<f64>) {
    match name {
        "bernoulli2" => (vec![2.0 / 3.0, 1.0 / 3.0], vec![0.25, 0.25]),
        "symmetric_quarter" => (vec![0.5, 0.5], vec![0.25, 0.25]),
        "cantor_third" => (vec![0.5, 0.5], vec![1.0 / 3.0, 1.0 / 3.0]),
        "moran_a" => (vec![0.6, 0.4], vec![1.0 / 3.0, 0.25]),
        "moran_b" => (vec![0.7, 0.3], vec![0.2, 0.45]),
        other => panic!("no closed form for {other}"),
    }
}
