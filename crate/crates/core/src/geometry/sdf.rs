//! Exact signed distance primitives and their unions.

use rand::Rng;

pub type Vec3 = [f64; 3];

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Vec3, c: f64) -> Vec3 {
    [a[0] * c, a[1] * c, a[2] * c]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Primitive {
    /// Axis-aligned box.
    Box { center: Vec3, half: Vec3 },
    /// Segment `a`–`b` inflated by `radius`; a sphere when `a == b`.
    Capsule { a: Vec3, b: Vec3, radius: f64 },
}

impl Primitive {
    pub fn sphere(center: Vec3, radius: f64) -> Self {
        Self::Capsule {
            a: center,
            b: center,
            radius,
        }
    }

    pub fn sdf(&self, p: Vec3) -> f64 {
        match *self {
            Self::Box { center, half } => {
                let d = sub(p, center);
                let q = [0, 1, 2].map(|i| d[i].abs() - half[i]);
                let outside = norm(q.map(|v| v.max(0.0)));
                outside + q[0].max(q[1]).max(q[2]).min(0.0)
            }
            Self::Capsule { a, b, radius } => norm(sub(p, closest_on_segment(p, a, b))) - radius,
        }
    }

    /// Analytic gradient of [`sdf`](Self::sdf), unit length away from the
    /// medial axis.
    pub fn gradient(&self, p: Vec3) -> Vec3 {
        match *self {
            Self::Box { center, half } => {
                let d = sub(p, center);
                let q = [0, 1, 2].map(|i| d[i].abs() - half[i]);
                let sign = d.map(|v| if v < 0.0 { -1.0 } else { 1.0 });
                if q.iter().any(|&v| v > 0.0) {
                    let m = q.map(|v| v.max(0.0));
                    let n = norm(m);
                    [0, 1, 2].map(|i| sign[i] * m[i] / n)
                } else {
                    let mut axis = 0;
                    for i in 1..3 {
                        if q[i] > q[axis] {
                            axis = i;
                        }
                    }
                    let mut g = [0.0; 3];
                    g[axis] = sign[axis];
                    g
                }
            }
            Self::Capsule { a, b, .. } => {
                let v = sub(p, closest_on_segment(p, a, b));
                let n = norm(v);
                if n == 0.0 {
                    [0.0, 1.0, 0.0]
                } else {
                    scale(v, 1.0 / n)
                }
            }
        }
    }

    /// Distance from `p` to the set where the SDF is not differentiable
    /// (edges and corners of boxes, the interior medial set), as a lower
    /// bound good enough to filter Eikonal checks.
    pub fn feature_distance(&self, p: Vec3) -> f64 {
        match *self {
            Self::Box { center, half } => {
                let d = sub(p, center);
                let q = [0, 1, 2].map(|i| d[i].abs() - half[i]);
                let mut s = q;
                s.sort_by(|a, b| b.total_cmp(a));
                if s[0] > 0.0 {
                    // outside the SDF is smooth; only the edges of the box itself matter
                    (s[0] * s[0] + s[1] * s[1]).sqrt()
                } else {
                    // inside: distance to the set where two faces tie
                    (s[0] - s[1]) / std::f64::consts::SQRT_2
                }
            }
            Self::Capsule { a, b, .. } => norm(sub(p, closest_on_segment(p, a, b))),
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Self::Box { half, .. } => 8.0 * (half[0] * half[1] + half[1] * half[2] + half[0] * half[2]),
            Self::Capsule { a, b, radius } => {
                let l = norm(sub(b, a));
                4.0 * std::f64::consts::PI * radius * radius + 2.0 * std::f64::consts::PI * radius * l
            }
        }
    }

    /// A uniformly distributed point on the primitive's surface and its
    /// outward normal.
    pub fn sample_surface<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec3, Vec3) {
        match *self {
            Self::Box { center, half } => {
                let areas = [half[1] * half[2], half[0] * half[2], half[0] * half[1]];
                let total: f64 = areas.iter().sum();
                let mut t = rng.random::<f64>() * total;
                let mut axis = 2;
                for (i, a) in areas.iter().enumerate() {
                    if t < *a {
                        axis = i;
                        break;
                    }
                    t -= a;
                }
                let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let mut p = [0.0; 3];
                for i in 0..3 {
                    p[i] = if i == axis {
                        side * half[i]
                    } else {
                        rng.random_range(-half[i]..=half[i])
                    };
                }
                let mut n = [0.0; 3];
                n[axis] = side;
                (add(center, p), n)
            }
            Self::Capsule { a, b, radius } => {
                let axis = sub(b, a);
                let l = norm(axis);
                let n = random_unit(rng);
                let cyl = 2.0 * std::f64::consts::PI * radius * l;
                let total = cyl + 4.0 * std::f64::consts::PI * radius * radius;
                if l > 0.0 && rng.random::<f64>() * total < cyl {
                    let u = scale(axis, 1.0 / l);
                    // project a random direction onto the plane orthogonal to the axis
                    let mut r = sub(n, scale(u, dot(n, u)));
                    let rn = norm(r);
                    if rn < 1e-9 {
                        r = orthogonal(u);
                    } else {
                        r = scale(r, 1.0 / rn);
                    }
                    let c = add(a, scale(axis, rng.random::<f64>()));
                    (add(c, scale(r, radius)), r)
                } else {
                    // a hemisphere cap: the end nearer to the direction
                    let end = if dot(n, axis) > 0.0 { b } else { a };
                    (add(end, scale(n, radius)), n)
                }
            }
        }
    }
}

fn closest_on_segment(p: Vec3, a: Vec3, b: Vec3) -> Vec3 {
    let ab = sub(b, a);
    let l2 = dot(ab, ab);
    if l2 == 0.0 {
        return a;
    }
    let t = (dot(sub(p, a), ab) / l2).clamp(0.0, 1.0);
    add(a, scale(ab, t))
}

fn orthogonal(u: Vec3) -> Vec3 {
    let helper = if u[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let v = sub(helper, scale(u, dot(helper, u)));
    scale(v, 1.0 / norm(v))
}

pub fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = [0; 3].map(|_| rng.random_range(-1.0..1.0));
        let n2 = dot(v, v);
        if n2 > 1e-6 && n2 <= 1.0 {
            return scale(v, 1.0 / n2.sqrt());
        }
    }
}

/// A primitive tagged with its semantic part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Part {
    pub primitive: Primitive,
    pub label: usize,
}

/// Union of labeled primitives; the SDF is the minimum over primitives.
#[derive(Clone, Debug, PartialEq)]
pub struct Union {
    pub parts: Vec<Part>,
}

impl Union {
    pub fn sdf(&self, p: Vec3) -> f64 {
        self.parts.iter().map(|q| q.primitive.sdf(p)).fold(f64::INFINITY, f64::min)
    }

    /// Index of the primitive attaining the minimum, lowest index on ties.
    pub fn closest(&self, p: Vec3) -> usize {
        let mut best = 0;
        let mut bd = f64::INFINITY;
        for (i, q) in self.parts.iter().enumerate() {
            let d = q.primitive.sdf(p);
            if d < bd {
                best = i;
                bd = d;
            }
        }
        best
    }

    pub fn label(&self, p: Vec3) -> usize {
        self.parts[self.closest(p)].label
    }

    pub fn gradient(&self, p: Vec3) -> Vec3 {
        self.parts[self.closest(p)].primitive.gradient(p)
    }

    /// Value and gradient.
    pub fn eval(&self, p: Vec3) -> (f64, Vec3) {
        let i = self.closest(p);
        let prim = self.parts[i].primitive;
        (prim.sdf(p), prim.gradient(p))
    }

    /// Lower bound on the distance to points where the union SDF fails to be
    /// differentiable: primitive features and switches between primitives.
    pub fn feature_distance(&self, p: Vec3) -> f64 {
        let i = self.closest(p);
        let di = self.parts[i].primitive.sdf(p);
        let mut best = self.parts[i].primitive.feature_distance(p);
        for (j, q) in self.parts.iter().enumerate() {
            if j != i {
                // both SDFs are 1-Lipschitz, so they cannot meet closer than half the gap
                best = best.min((q.primitive.sdf(p) - di) / 2.0);
            }
        }
        best
    }
}
