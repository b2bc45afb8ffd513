//! Small dense helpers used throughout the crate.

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `out += c * a`
pub(crate) fn axpy(out: &mut [f64], c: f64, a: &[f64]) {
    debug_assert_eq!(out.len(), a.len());
    for (o, x) in out.iter_mut().zip(a) {
        *o += c * x;
    }
}

/// Scales `a` to unit Euclidean norm in place. Returns the former norm.
pub(crate) fn normalize(a: &mut [f64]) -> f64 {
    let n = norm2(a);
    if n > 0.0 {
        for x in a.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// Flips the sign so the first nonzero coordinate is positive. Rank-1
/// outer products are unchanged by this; it only pins a representative.
pub(crate) fn canonicalize_sign(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| **x != 0.0) {
        if *first < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }
}
