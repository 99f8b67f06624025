use crate::error::{Error, Result};

/// Empirical 1-D Wasserstein-1 distance.
///
/// Integrates `|Qa(u) - Qb(u)|` over `u in (0, 1)`, where `Qa`, `Qb` are the
/// empirical quantile functions. Both are step functions with jumps at `i/n`
/// and `j/m`; the walk visits every merged breakpoint once. Breakpoints are
/// compared as exact integer fractions, so unequal sample sizes need no
/// subsampling.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSample);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(wasserstein_sorted(&a, &b))
}

/// [`wasserstein_1d`] on inputs already sorted ascending and validated.
pub(crate) fn wasserstein_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len() as u128, b.len() as u128);
    let denom = (n * m) as f64;
    // positions are measured in units of 1/(n*m)
    let (mut i, mut j) = (0usize, 0usize);
    let mut pos: u128 = 0;
    let mut total = 0.0;
    while i < a.len() && j < b.len() {
        let next_a = (i as u128 + 1) * m;
        let next_b = (j as u128 + 1) * n;
        let next = next_a.min(next_b);
        total += (next - pos) as f64 * (a[i] - b[j]).abs();
        pos = next;
        if next_a == next {
            i += 1;
        }
        if next_b == next {
            j += 1;
        }
    }
    total / denom
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(wasserstein_1d(&[0.3, 0.1], &[0.1, 0.3]).unwrap(), 0.0);
        assert_eq!(wasserstein_1d(&[0., 0., 0.], &[1., 1., 1.]).unwrap(), 1.0);
        assert_eq!(wasserstein_1d(&[0., 1.], &[0.5, 1.5]).unwrap(), 0.5);
        // unequal sizes: {0} vs {0, 1} moves half the mass by 1
        assert_eq!(wasserstein_1d(&[0.], &[0., 1.]).unwrap(), 0.5);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            wasserstein_1d(&[], &[1.0]),
            Err(Error::EmptySample)
        ));
        assert!(matches!(
            wasserstein_1d(&[f64::NAN], &[1.0]),
            Err(Error::NonFiniteSample)
        ));
    }
}
