//! Test-side references, written without the crate's own quadrature.
#![allow(dead_code)]

pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

/// Composite Simpson rule with `n` (even) intervals.
pub fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

pub fn bump_mass() -> f64 {
    simpson(-1.0, 1.0, 1 << 16, bump)
}

/// Unit-mass bump of radius `r` centred at `c`.
pub fn unit_bump(c: f64, r: f64) -> impl Fn(f64) -> f64 {
    let m = bump_mass();
    move |x| bump((x - c) / r) / (r * m)
}
