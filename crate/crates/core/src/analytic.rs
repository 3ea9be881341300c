//! Closed-form references used to validate the discrete solvers:
//! Neumann spectra of the interval and square, and the transcendental
//! secular equation of the interval with one Robin endpoint.

use std::f64::consts::PI;

/// k-th Neumann eigenvalue (0-based) of −u'' on [0, L]: (kπ/L)².
pub fn neumann_interval_eigenvalue(k: usize, length: f64) -> f64 {
    (k as f64 * PI / length).powi(2)
}

/// First `count` distinct Neumann eigenvalues π²(m²+n²) of the unit square,
/// each with its multiplicity.
pub fn square_neumann_distinct(count: usize) -> Vec<(f64, usize)> {
    let mut sums = std::collections::BTreeMap::<usize, usize>::new();
    let cap = 4 * count + 16;
    for m in 0..cap {
        for n in 0..cap {
            if m * m + n * n <= cap * cap {
                *sums.entry(m * m + n * n).or_insert(0) += 1;
            }
        }
    }
    sums.into_iter()
        .take(count)
        .map(|(s, mult)| (PI * PI * s as f64, mult))
        .collect()
}

/// Ground state of −u'' on [0,1] with u'(0) = −h·u(0), u'(1) = 0.
///
/// Eigenvalues solve √λ·tan√λ = −h. For h > 0 the ground state is negative
/// and solves √μ·tanh√μ = h with λ = −μ; for h < 0 it is the lowest root of
/// √λ·tan√λ = |h| in (0, (π/2)²). Solved by bisection to near machine
/// precision — an oracle independent of the grid discretization.
pub fn robin_interval_ground_state(h: f64) -> f64 {
    if h == 0.0 {
        return 0.0;
    }
    if h > 0.0 {
        // g(μ) = √μ·tanh(√μ) − h, increasing in μ
        let g = |mu: f64| mu.sqrt() * mu.sqrt().tanh() - h;
        let mut lo = 0.0f64;
        let mut hi = 1.0f64.max(4.0 * h * h).max(2.0 * h);
        while g(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        -0.5 * (lo + hi)
    } else {
        // f(λ) = √λ·tan(√λ) − |h|, increasing on (0, (π/2)²)
        let target = -h;
        let f = |lam: f64| lam.sqrt() * lam.sqrt().tan() - target;
        let mut lo = 0.0f64;
        let mut hi = (0.5 * PI).powi(2) * (1.0 - 1e-12);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Central-difference derivative of the secular ground state at impedance h.
pub fn robin_interval_ground_state_derivative(h: f64, step: f64) -> f64 {
    (robin_interval_ground_state(h + step) - robin_interval_ground_state(h - step)) / (2.0 * step)
}
