//! Minimal quaternion arithmetic for the scoring backbone.

use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quaternion {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Quaternion { a, b, c, d }
    }

    /// Hamilton product.
    pub fn hamilton(self, q: Quaternion) -> Quaternion {
        Quaternion {
            a: self.a * q.a - self.b * q.b - self.c * q.c - self.d * q.d,
            b: self.a * q.b + self.b * q.a + self.c * q.d - self.d * q.c,
            c: self.a * q.c - self.b * q.d + self.c * q.a + self.d * q.b,
            d: self.a * q.d + self.b * q.c - self.c * q.b + self.d * q.a,
        }
    }

    pub fn conjugate(self) -> Quaternion {
        Quaternion {
            a: self.a,
            b: -self.b,
            c: -self.c,
            d: -self.d,
        }
    }

    pub fn norm_sq(self) -> f64 {
        self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Unit-normalized quaternion. Components with norm below the epsilon
    /// floor map to the identity quaternion instead of dividing by zero.
    pub fn normalized(self) -> Quaternion {
        let n = self.norm();
        if n < 1e-12 {
            Quaternion::IDENTITY
        } else {
            self.scale(1.0 / n)
        }
    }

    pub fn scale(self, s: f64) -> Quaternion {
        Quaternion {
            a: self.a * s,
            b: self.b * s,
            c: self.c * s,
            d: self.d * s,
        }
    }

    /// 4-real Euclidean inner product.
    pub fn dot(self, q: Quaternion) -> f64 {
        self.a * q.a + self.b * q.b + self.c * q.c + self.d * q.d
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, q: Quaternion) -> Quaternion {
        Quaternion::new(self.a + q.a, self.b + q.b, self.c + q.c, self.d + q.d)
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, q: Quaternion) -> Quaternion {
        Quaternion::new(self.a - q.a, self.b - q.b, self.c - q.c, self.d - q.d)
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, q: Quaternion) -> Quaternion {
        self.hamilton(q)
    }
}
