//! Closed real intervals with the handful of operations the reachability code needs.
//!
//! Endpoints are computed in round-to-nearest; callers that need a validated
//! enclosure inflate the result (see `frs`).

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Smallest absolute value in the interval.
    pub fn mig(&self) -> f64 {
        if self.contains(0.0) {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn hull(&self, o: Interval) -> Interval {
        Interval::new(self.lo.min(o.lo), self.hi.max(o.hi))
    }

    pub fn inflate(&self, r: f64) -> Interval {
        Interval::new(self.lo - r, self.hi + r)
    }

    pub fn max0(&self) -> Interval {
        Interval::new(self.lo.max(0.0), self.hi.max(0.0))
    }

    pub fn abs(&self) -> Interval {
        Interval::new(self.mig(), self.mag())
    }

    pub fn sqr(&self) -> Interval {
        let a = self.lo * self.lo;
        let b = self.hi * self.hi;
        if self.contains(0.0) {
            Interval::new(0.0, a.max(b))
        } else {
            Interval::new(a.min(b), a.max(b))
        }
    }

    /// Integer power with exact handling of even powers across zero.
    pub fn powi(&self, n: u32) -> Interval {
        if n == 0 {
            return Interval::point(1.0);
        }
        let a = self.lo.powi(n as i32);
        let b = self.hi.powi(n as i32);
        if n % 2 == 1 {
            Interval::new(a, b)
        } else if self.contains(0.0) {
            Interval::new(0.0, a.max(b))
        } else {
            Interval::new(a.min(b), a.max(b))
        }
    }

    pub fn scale(&self, s: f64) -> Interval {
        if s >= 0.0 {
            Interval::new(self.lo * s, self.hi * s)
        } else {
            Interval::new(self.hi * s, self.lo * s)
        }
    }

    /// Image under a smooth function whose critical points in the interval are listed.
    pub fn image_with_critical(&self, f: impl Fn(f64) -> f64, critical: &[f64]) -> Interval {
        let mut lo = f(self.lo).min(f(self.hi));
        let mut hi = f(self.lo).max(f(self.hi));
        for &c in critical {
            if self.contains(c) {
                let v = f(c);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        Interval::new(lo, hi)
    }

    pub fn sin(&self) -> Interval {
        use std::f64::consts::{FRAC_PI_2, PI};
        if self.width() >= 2.0 * PI {
            return Interval::new(-1.0, 1.0);
        }
        let first = ((self.lo - FRAC_PI_2) / PI).ceil() as i64;
        let last = ((self.hi - FRAC_PI_2) / PI).floor() as i64;
        let crit: Vec<f64> = (first..=last).map(|n| FRAC_PI_2 + n as f64 * PI).collect();
        self.image_with_critical(f64::sin, &crit)
    }

    pub fn cos(&self) -> Interval {
        (*self + Interval::point(std::f64::consts::FRAC_PI_2)).sin()
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, o: Interval) -> Interval {
        Interval::new(self.lo + o.lo, self.hi + o.hi)
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, o: Interval) -> Interval {
        Interval::new(self.lo - o.hi, self.hi - o.lo)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, o: Interval) -> Interval {
        let c = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        Interval::new(
            c.iter().copied().fold(f64::INFINITY, f64::min),
            c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    }
}

/// sin(x)/x with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// (1 - cos x)/x with the removable singularity filled in.
pub fn cosc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        x / 2.0
    } else {
        (1.0 - x.cos()) / x
    }
}

/// First positive stationary point of `cosc`.
fn cosc_peak() -> f64 {
    // d/dx cosc = (x sin x - (1 - cos x)) / x^2; Newton on h(x) = x sin x + cos x - 1.
    let mut x = 2.33f64;
    for _ in 0..30 {
        let h = x * x.sin() + x.cos() - 1.0;
        let dh = x * x.cos();
        x -= h / dh;
    }
    x
}

/// Interval extension of `sinc`; exact for arguments with |x| below the first minimum (~4.49).
pub fn sinc_interval(x: Interval) -> Interval {
    const FIRST_MIN: f64 = 4.493_409_457_909_064;
    if x.mag() <= FIRST_MIN {
        let hi = sinc(x.mig());
        let lo = sinc(x.mag());
        Interval::new(lo, hi)
    } else {
        Interval::new(-0.2173, 1.0).hull(Interval::point(sinc(x.lo))).hull(Interval::point(sinc(x.hi)))
    }
}

/// Interval extension of `cosc`; exact for |x| <= 2 pi.
pub fn cosc_interval(x: Interval) -> Interval {
    let p = cosc_peak();
    if x.mag() <= 2.0 * std::f64::consts::PI {
        x.image_with_critical(cosc, &[-p, p])
    } else {
        Interval::new(-0.7246, 0.7246)
    }
}
