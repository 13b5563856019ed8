use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point of the integer lattice Z².
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: i32,
    pub y: i32,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0, y: 0 };

    pub const fn new(x: i32, y: i32) -> Self {
        Point { x, y }
    }

    pub fn norm_sq(self) -> i64 {
        let (x, y) = (self.x as i64, self.y as i64);
        x * x + y * y
    }

    pub fn dot(self, u: [f64; 2]) -> f64 {
        self.x as f64 * u[0] + self.y as f64 * u[1]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point {
    fn add_assign(&mut self, o: Point) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

impl From<(i32, i32)> for Point {
    fn from((x, y): (i32, i32)) -> Self {
        Point::new(x, y)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Index of the sublattice of Z² generated by `vectors` (0 when they do not
/// span the plane). The index is the gcd of all 2×2 minors.
pub fn lattice_index(vectors: &[Point]) -> u64 {
    let mut g: i64 = 0;
    for (i, a) in vectors.iter().enumerate() {
        for b in &vectors[i + 1..] {
            let det = a.x as i64 * b.y as i64 - a.y as i64 * b.x as i64;
            g = gcd(g, det.abs());
        }
    }
    g as u64
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_of_unit_vectors() {
        assert_eq!(lattice_index(&[Point::new(1, 0), Point::new(0, 1)]), 1);
        assert_eq!(lattice_index(&[Point::new(1, 1), Point::new(1, -1)]), 2);
        assert_eq!(lattice_index(&[Point::new(10, 0), Point::new(0, 10)]), 100);
        assert_eq!(lattice_index(&[Point::new(1, 0), Point::new(-1, 0)]), 0);
    }
}
