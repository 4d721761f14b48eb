//! Bracketing solvers shared by the threshold computations.

/// Stopping rule for [`bisect`]. The defaults run to (almost) full double
/// precision: roots in this crate span from ~1e-12 (huge `w`) to ~1e6, so a
/// fixed absolute width would be meaningless at one end or the other.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisection {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for Bisection {
    fn default() -> Self {
        Self {
            abs_tol: 0.0,
            rel_tol: 4.0 * f64::EPSILON,
            max_iter: 2_000,
        }
    }
}

impl Bisection {
    /// Root of `f` on `[lo, hi]`, assuming `f(lo)` and `f(hi)` have opposite
    /// signs (zero counts as either). Returns the bracket midpoint when the
    /// stopping rule fires or the bracket cannot shrink further.
    pub fn solve(&self, mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        let flo = f(lo);
        if flo == 0.0 {
            return lo;
        }
        let lo_negative = flo < 0.0;
        for _ in 0..self.max_iter {
            let mid = 0.5 * (lo + hi);
            if mid <= lo.min(hi) || mid >= lo.max(hi) {
                break;
            }
            if (hi - lo).abs() <= self.abs_tol + self.rel_tol * mid.abs() {
                return mid;
            }
            let fm = f(mid);
            if fm == 0.0 {
                return mid;
            }
            if (fm < 0.0) == lo_negative {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// [`Bisection::solve`] with the default stopping rule.
pub fn bisect(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    Bisection::default().solve(lo, hi, f)
}

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`,
/// stopping once the bracket is narrower than `tol`.
pub fn golden_max(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..500 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_sqrt2() {
        let r = bisect(0.0, 2.0, |x| x * x - 2.0);
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
        let r = bisect(2.0, 0.0, |x| 2.0 - x * x);
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bisect_tiny_root() {
        let r = bisect(0.0, 1.0, |x| x - 3e-13);
        assert!((r / 3e-13 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn golden_parabola() {
        let (x, fx) = golden_max(0.0, 3.0, 1e-12, |x| -(x - 1.25) * (x - 1.25) + 2.0);
        assert!((x - 1.25).abs() < 1e-6);
        assert!((fx - 2.0).abs() < 1e-12);
    }
}
