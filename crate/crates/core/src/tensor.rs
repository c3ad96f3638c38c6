//! Small fixed-size linear algebra: 2D vectors and symmetric 2x2 tensors.

use std::ops::{Add, Mul, Sub};

pub type Point = [f64; 2];

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Rotate by +90 degrees (counterclockwise).
#[inline]
pub fn rot90(a: Point) -> Point {
    [-a[1], a[0]]
}

/// Distance from `p` to the segment `a`-`b`.
pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 {
        (dot(ap, ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

/// Symmetric 2x2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

/// Orthonormal eigen-decomposition of a [`Sym2`]: `values[i]` belongs to `vectors[i]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen2 {
    pub values: [f64; 2],
    pub vectors: [Point; 2],
}

impl Sym2 {
    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 1.0)
    }

    pub const fn diag(a: f64, b: f64) -> Self {
        Self::new(a, 0.0, b)
    }

    pub fn scaled_identity(k: f64) -> Self {
        Self::new(k, 0.0, k)
    }

    /// `v ⊗ v`.
    pub fn outer(v: Point) -> Self {
        Self::new(v[0] * v[0], v[0] * v[1], v[1] * v[1])
    }

    /// `a·e1⊗e1 + b·e2⊗e2`.
    pub fn from_frame(e1: Point, a: f64, e2: Point, b: f64) -> Self {
        Sym2::outer(e1) * a + Sym2::outer(e2) * b
    }

    pub fn apply(&self, v: Point) -> Point {
        [self.xx * v[0] + self.xy * v[1], self.xy * v[0] + self.yy * v[1]]
    }

    /// `a · (self b)`.
    pub fn bilinear(&self, a: Point, b: Point) -> f64 {
        dot(a, self.apply(b))
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn max_abs(&self) -> f64 {
        self.xx.abs().max(self.xy.abs()).max(self.yy.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.xx.is_finite() && self.xy.is_finite() && self.yy.is_finite()
    }

    /// General (non-symmetric) product as a row-major 2x2 array.
    pub fn matmul(&self, other: &Sym2) -> [[f64; 2]; 2] {
        [
            [
                self.xx * other.xx + self.xy * other.xy,
                self.xx * other.xy + self.xy * other.yy,
            ],
            [
                self.xy * other.xx + self.yy * other.xy,
                self.xy * other.xy + self.yy * other.yy,
            ],
        ]
    }

    /// Max-norm of `self·other − other·self`.
    pub fn commutator_norm(&self, other: &Sym2) -> f64 {
        let ab = self.matmul(other);
        let ba = other.matmul(self);
        let mut m: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                m = m.max((ab[i][j] - ba[i][j]).abs());
            }
        }
        m
    }

    /// Eigenvalues in descending order with unit eigenvectors. For a multiple of
    /// the identity the canonical axes are returned.
    pub fn eigen(&self) -> Eigen2 {
        let mean = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        let radius = half_diff.hypot(self.xy);
        let values = [mean + radius, mean - radius];
        if radius <= f64::EPSILON * mean.abs().max(f64::MIN_POSITIVE) {
            return Eigen2 {
                values,
                vectors: [[1.0, 0.0], [0.0, 1.0]],
            };
        }
        // Angle of the principal axis.
        let theta = 0.5 * self.xy.atan2(half_diff);
        let (s, c) = theta.sin_cos();
        Eigen2 {
            values,
            vectors: [[c, s], [-s, c]],
        }
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    fn add(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }
}

impl Sub for Sym2 {
    type Output = Sym2;
    fn sub(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx - o.xx, self.xy - o.xy, self.yy - o.yy)
    }
}

impl Mul<f64> for Sym2 {
    type Output = Sym2;
    fn mul(self, k: f64) -> Sym2 {
        Sym2::new(self.xx * k, self.xy * k, self.yy * k)
    }
}
