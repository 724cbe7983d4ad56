//! First-order spatial derivatives.
//!
//! [`Dual3`] is plain forward mode over `f64`: a value plus its partials with
//! respect to the three input coordinates. [`DualVar`] is the same idea
//! recorded on a [`Tape`]: the value and each partial are separate tape nodes,
//! so any expression built from the partials can be differentiated again with
//! respect to parameters by the reverse sweep (forward-over-reverse).

use std::ops::{Add, Div, Mul, Neg, Sub};

use super::tape::{Tape, Var};
use super::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual3 {
    pub value: f64,
    pub dx: [f64; 3],
}

impl Dual3 {
    pub fn constant(value: f64) -> Self {
        Self { value, dx: [0.0; 3] }
    }

    /// The `axis`-th input coordinate itself.
    pub fn variable(value: f64, axis: usize) -> Self {
        let mut dx = [0.0; 3];
        dx[axis] = 1.0;
        Self { value, dx }
    }

    pub fn seed(x: [f64; 3]) -> [Self; 3] {
        [Self::variable(x[0], 0), Self::variable(x[1], 1), Self::variable(x[2], 2)]
    }

    fn chain(self, value: f64, slope: f64) -> Self {
        Self {
            value,
            dx: self.dx.map(|d| slope * d),
        }
    }

    pub fn sin(self) -> Self {
        self.chain(self.value.sin(), self.value.cos())
    }

    pub fn cos(self) -> Self {
        self.chain(self.value.cos(), -self.value.sin())
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }

    /// Subgradient at 0 is 0.
    pub fn abs(self) -> Self {
        let s = if self.value > 0.0 {
            1.0
        } else if self.value < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.chain(self.value.abs(), s)
    }

    pub fn sqrt(self) -> Self {
        let r = self.value.sqrt();
        let slope = if r > 0.0 { 0.5 / r } else { 0.0 };
        self.chain(r, slope)
    }

    pub fn relu(self) -> Self {
        if self.value > 0.0 {
            self
        } else {
            Self::constant(0.0)
        }
    }

    /// Ties go to `self`.
    pub fn max(self, other: Self) -> Self {
        if self.value >= other.value {
            self
        } else {
            other
        }
    }

    pub fn square(self) -> Self {
        self * self
    }

    pub fn scale(self, c: f64) -> Self {
        self.chain(self.value * c, c)
    }

    pub fn gradient(&self) -> [f64; 3] {
        self.dx
    }
}

impl Add for Dual3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            value: self.value + o.value,
            dx: [self.dx[0] + o.dx[0], self.dx[1] + o.dx[1], self.dx[2] + o.dx[2]],
        }
    }
}

impl Sub for Dual3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            value: self.value - o.value,
            dx: [self.dx[0] - o.dx[0], self.dx[1] - o.dx[1], self.dx[2] - o.dx[2]],
        }
    }
}

impl Mul for Dual3 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (a, b) = (self.value, o.value);
        Self {
            value: a * b,
            dx: [
                self.dx[0] * b + a * o.dx[0],
                self.dx[1] * b + a * o.dx[1],
                self.dx[2] * b + a * o.dx[2],
            ],
        }
    }
}

impl Div for Dual3 {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let (a, b) = (self.value, o.value);
        let inv = 1.0 / (b * b);
        Self {
            value: a / b,
            dx: [
                (self.dx[0] * b - a * o.dx[0]) * inv,
                (self.dx[1] * b - a * o.dx[1]) * inv,
                (self.dx[2] * b - a * o.dx[2]) * inv,
            ],
        }
    }
}

impl Neg for Dual3 {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Add<f64> for Dual3 {
    type Output = Self;
    fn add(self, c: f64) -> Self {
        Self {
            value: self.value + c,
            dx: self.dx,
        }
    }
}

impl Mul<f64> for Dual3 {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        self.scale(c)
    }
}

/// Batched dual value on a tape: `value` is n×m and `tangents[j]` holds the
/// partial of every entry with respect to input coordinate `j`.
#[derive(Clone, Copy, Debug)]
pub struct DualVar {
    pub value: Var,
    pub tangents: [Var; 3],
}

/// Unit tangent seeds: an n×m constant that is 1 in column `axis` (for the
/// first three columns) and 0 elsewhere.
pub fn unit_seed(n: usize, m: usize, axis: usize) -> Tensor {
    let mut t = Tensor::zeros(n, m);
    if axis < m {
        for r in 0..n {
            t.set(r, axis, 1.0);
        }
    }
    t
}

impl DualVar {
    /// Treat the n×3 node `x` as the independent coordinates.
    pub fn seed(tape: &mut Tape, x: Var) -> Self {
        let (n, m) = tape.value(x).shape();
        assert_eq!(m, 3, "seed expects n×3 coordinates");
        let tangents = [0, 1, 2].map(|j| tape.constant(unit_seed(n, 3, j)));
        Self { value: x, tangents }
    }

    /// A node with zero spatial derivative.
    pub fn constant(tape: &mut Tape, v: Var) -> Self {
        let (n, m) = tape.value(v).shape();
        let z = tape.constant(Tensor::zeros(n, m));
        Self {
            value: v,
            tangents: [z, z, z],
        }
    }

    pub fn add(self, tape: &mut Tape, o: Self) -> Self {
        let value = tape.add(self.value, o.value);
        let tangents = [0, 1, 2].map(|j| tape.add(self.tangents[j], o.tangents[j]));
        Self { value, tangents }
    }

    pub fn sub(self, tape: &mut Tape, o: Self) -> Self {
        let value = tape.sub(self.value, o.value);
        let tangents = [0, 1, 2].map(|j| tape.sub(self.tangents[j], o.tangents[j]));
        Self { value, tangents }
    }

    pub fn mul(self, tape: &mut Tape, o: Self) -> Self {
        let value = tape.mul(self.value, o.value);
        let tangents = [0, 1, 2].map(|j| {
            let a = tape.mul(self.tangents[j], o.value);
            let b = tape.mul(self.value, o.tangents[j]);
            tape.add(a, b)
        });
        Self { value, tangents }
    }

    /// Elementwise `sin(omega · v)`.
    pub fn sin(self, tape: &mut Tape, omega: f64) -> Self {
        let arg = tape.scale(self.value, omega);
        let value = tape.sin(arg);
        let c = tape.cos(arg);
        let slope = tape.scale(c, omega);
        let tangents = [0, 1, 2].map(|j| tape.mul(slope, self.tangents[j]));
        Self { value, tangents }
    }

    /// `v · Wᵀ + b` for weight `w` (out×in) and optional bias row (1×out).
    pub fn linear(self, tape: &mut Tape, w: Var, b: Option<Var>) -> Self {
        let mut value = tape.matmul_t(self.value, false, w, true);
        if let Some(b) = b {
            value = tape.add_row(value, b);
        }
        let tangents = [0, 1, 2].map(|j| tape.matmul_t(self.tangents[j], false, w, true));
        Self { value, tangents }
    }

    pub fn slice_cols(self, tape: &mut Tape, start: usize, len: usize) -> Self {
        let value = tape.slice_cols(self.value, start, len);
        let tangents = [0, 1, 2].map(|j| tape.slice_cols(self.tangents[j], start, len));
        Self { value, tangents }
    }

    pub fn slice_rows(self, tape: &mut Tape, start: usize, len: usize) -> Self {
        let value = tape.slice_rows(self.value, start, len);
        let tangents = [0, 1, 2].map(|j| tape.slice_rows(self.tangents[j], start, len));
        Self { value, tangents }
    }

    /// For an n×1 dual, the n×3 spatial gradient node.
    pub fn gradient(self, tape: &mut Tape) -> Var {
        tape.concat_cols(&self.tangents)
    }
}
