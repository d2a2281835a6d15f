//! Sparse real polynomials in (t, x1, x2, k1, k2).

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::interval::Interval;

pub const NVARS: usize = 5;
pub const T: usize = 0;
pub const X1: usize = 1;
pub const X2: usize = 2;
pub const K1: usize = 3;
pub const K2: usize = 4;
pub const VAR_NAMES: [&str; NVARS] = ["t", "x1", "x2", "k1", "k2"];

pub type Exponents = [u32; NVARS];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Polynomial {
    terms: BTreeMap<Exponents, f64>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(c, [0; NVARS])
    }

    pub fn var(i: usize) -> Self {
        let mut e = [0; NVARS];
        e[i] = 1;
        Self::monomial(1.0, e)
    }

    pub fn monomial(c: f64, e: Exponents) -> Self {
        let mut p = Self::zero();
        p.add_term(c, e);
        p
    }

    pub fn add_term(&mut self, c: f64, e: Exponents) {
        if c == 0.0 {
            return;
        }
        let slot = self.terms.entry(e).or_insert(0.0);
        *slot += c;
        if *slot == 0.0 {
            self.terms.remove(&e);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, f64)> {
        self.terms.iter().map(|(e, c)| (e, *c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut p = Self::zero();
        for (e, c) in self.terms() {
            p.add_term(c * s, *e);
        }
        p
    }

    pub fn deriv(&self, var: usize) -> Self {
        let mut p = Self::zero();
        for (e, c) in self.terms() {
            if e[var] > 0 {
                let mut d = *e;
                d[var] -= 1;
                p.add_term(c * e[var] as f64, d);
            }
        }
        p
    }

    pub fn pow(&self, n: u32) -> Self {
        (0..n).fold(Self::constant(1.0), |acc, _| &acc * self)
    }

    /// Replaces variable `var` by the polynomial `by`.
    pub fn substitute(&self, var: usize, by: &Polynomial) -> Self {
        let mut out = Self::zero();
        let mut powers: Vec<Polynomial> = vec![Self::constant(1.0)];
        for (e, c) in self.terms() {
            while powers.len() <= e[var] as usize {
                let next = powers.last().unwrap() * by;
                powers.push(next);
            }
            let mut rest = *e;
            rest[var] = 0;
            out = &out + &(&powers[e[var] as usize] * &Self::monomial(c, rest));
        }
        out
    }

    pub fn eval(&self, p: &[f64; NVARS]) -> f64 {
        self.terms().map(|(e, c)| c * e.iter().zip(p).map(|(&k, &x)| x.powi(k as i32)).product::<f64>()).sum()
    }

    pub fn eval_interval(&self, b: &[Interval; NVARS]) -> Interval {
        self.terms().fold(Interval::point(0.0), |acc, (e, c)| {
            let m = e.iter().zip(b).fold(Interval::point(1.0), |m, (&k, x)| if k == 0 { m } else { m * x.powi(k) });
            acc + m.scale(c)
        })
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, o: &Polynomial) -> Polynomial {
        let mut p = self.clone();
        for (e, c) in o.terms() {
            p.add_term(c, *e);
        }
        p
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, o: &Polynomial) -> Polynomial {
        self + &o.scale(-1.0)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, o: &Polynomial) -> Polynomial {
        let mut p = Polynomial::zero();
        for (a, ca) in self.terms() {
            for (b, cb) in o.terms() {
                let mut e = *a;
                for i in 0..NVARS {
                    e[i] += b[i];
                }
                p.add_term(ca * cb, e);
            }
        }
        p
    }
}

/// (L_f phi, L_g phi) = (d phi/dt + grad_x phi . f, grad_x phi . g).
pub fn lie_derivatives(phi: &Polynomial, f: &[Polynomial; 2], g: &[Polynomial; 2]) -> (Polynomial, Polynomial) {
    let dx1 = phi.deriv(X1);
    let dx2 = phi.deriv(X2);
    let lf = &(&phi.deriv(T) + &(&dx1 * &f[0])) + &(&dx2 * &f[1]);
    let lg = &(&dx1 * &g[0]) + &(&dx2 * &g[1]);
    (lf, lg)
}
