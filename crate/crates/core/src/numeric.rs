//! Small numerical helpers shared by the accountant and the pmf tooling.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Bisection for the boundary of a monotone predicate on `[lo, hi]`, carried
/// out on `ln x` so the relative tolerance is uniform across decades.
///
/// Requires `pred(lo) == false` and `pred(hi) == true`; returns a point `x`
/// with `pred(x) == true` whose distance to the boundary is within `rel_tol`
/// relative.
pub fn log_bisect<F: FnMut(f64) -> bool>(mut lo: f64, mut hi: f64, rel_tol: f64, mut pred: F) -> f64 {
    debug_assert!(lo > 0.0 && hi > lo);
    while hi / lo - 1.0 > rel_tol {
        let mid = (0.5 * (lo.ln() + hi.ln())).exp();
        // guard against a midpoint that rounds onto an endpoint
        let mid = if mid <= lo || mid >= hi { (lo + hi) / 2.0 } else { mid };
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Golden-section search for the minimum of a unimodal `f` on `[a, b]`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut a: f64, mut b: f64, iters: usize, mut f: F) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
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
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
