//! Float helpers for `no_std`.

pub(crate) use libm::{exp, fabs as abs, hypot, log as ln, log1p, sqrt};

/// Above this length sums switch to Neumaier compensation.
const COMPENSATE_ABOVE: usize = 1024;

pub(crate) fn sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut plain = 0.0;
    let mut total = 0.0;
    let mut comp = 0.0;
    let mut n = 0usize;
    for t in terms {
        plain += t;
        let next = total + t;
        if abs(total) >= abs(t) {
            comp += (total - next) + t;
        } else {
            comp += (t - next) + total;
        }
        total = next;
        n += 1;
    }
    if n > COMPENSATE_ABOVE {
        total + comp
    } else {
        plain
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    sum(a.iter().zip(b).map(|(x, y)| x * y))
}
