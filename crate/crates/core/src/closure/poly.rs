//! Sparse multivariate polynomials in up to three variables.
//!
//! The closure functions of the Chapman-Enskog machinery are polynomials in
//! `w = v - u` times a Maxwellian, so the linearized collision operator and
//! its pseudo-inverse act on them in closed form. This type carries the
//! polynomial part exactly (coefficient arithmetic only), which is what makes
//! the pseudo-inverse and collision-invariant checks free of discretization
//! error.

use std::collections::BTreeMap;

type Expo = [u8; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct MultiPoly {
    dim: usize,
    terms: BTreeMap<Expo, f64>,
}

impl MultiPoly {
    pub fn zero(dim: usize) -> Self {
        assert!((1..=3).contains(&dim));
        Self { dim, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Self::zero(dim);
        p.add_term([0, 0, 0], c);
        p
    }

    /// The coordinate monomial `w_i`.
    pub fn var(dim: usize, i: usize) -> Self {
        assert!(i < dim);
        let mut e = [0u8; 3];
        e[i] = 1;
        let mut p = Self::zero(dim);
        p.add_term(e, 1.0);
        p
    }

    /// `|w|^2 = w_1^2 + ... + w_d^2`.
    pub fn norm_sq(dim: usize) -> Self {
        let mut p = Self::zero(dim);
        for i in 0..dim {
            let mut e = [0u8; 3];
            e[i] = 2;
            p.add_term(e, 1.0);
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn add_term(&mut self, expo: Expo, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let entry = self.terms.entry(expo).or_insert(0.0);
        *entry += coeff;
        if *entry == 0.0 {
            self.terms.remove(&expo);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for (&e, &c) in &other.terms {
            out.add_term(e, c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::zero(self.dim);
        for (&e, &c) in &self.terms {
            out.add_term(e, c * s);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = Self::zero(self.dim);
        for (&ea, &ca) in &self.terms {
            for (&eb, &cb) in &other.terms {
                let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]];
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn partial(&self, i: usize) -> Self {
        assert!(i < self.dim);
        let mut out = Self::zero(self.dim);
        for (&e, &c) in &self.terms {
            if e[i] > 0 {
                let mut d = e;
                d[i] -= 1;
                out.add_term(d, c * e[i] as f64);
            }
        }
        out
    }

    pub fn laplacian(&self) -> Self {
        let mut out = Self::zero(self.dim);
        for i in 0..self.dim {
            out = out.add(&self.partial(i).partial(i));
        }
        out
    }

    pub fn eval(&self, w: &[f64]) -> f64 {
        debug_assert!(w.len() >= self.dim);
        let mut sum = 0.0;
        for (&e, &c) in &self.terms {
            let mut t = c;
            for (i, &p) in e.iter().enumerate().take(self.dim) {
                for _ in 0..p {
                    t *= w[i];
                }
            }
            sum += t;
        }
        sum
    }

    pub fn total_degree(&self) -> usize {
        self.terms
            .keys()
            .map(|e| e[0] as usize + e[1] as usize + e[2] as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest coefficient magnitude; a cheap norm for cancellation checks.
    pub fn max_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }
}
