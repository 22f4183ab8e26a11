//! Axis-aligned boxes and points in pixel space.
//!
//! Origin is the top-left corner of the page, x grows right and y grows down.
//! Boxes are closed: points on the boundary are inside.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[T; 4]", into = "[T; 4]")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Rect<T> {
    pub x0: T,
    pub y0: T,
    pub x1: T,
    pub y1: T,
}

impl<T: Scalar> From<[T; 4]> for Rect<T> {
    fn from([x0, y0, x1, y1]: [T; 4]) -> Self {
        Rect { x0, y0, x1, y1 }
    }
}

impl<T: Scalar> From<Rect<T>> for [T; 4] {
    fn from(r: Rect<T>) -> Self {
        [r.x0, r.y0, r.x1, r.y1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> From<[T; 2]> for Point<T> {
    fn from([x, y]: [T; 2]) -> Self {
        Point { x, y }
    }
}

impl<T: Scalar> From<Point<T>> for [T; 2] {
    fn from(p: Point<T>) -> Self {
        [p.x, p.y]
    }
}

impl<T: Scalar> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Point { x, y }
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.x >= T::zero() && self.y >= T::zero()
    }

    pub fn distance(&self, other: &Point<T>) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl<T: Scalar> Rect<T> {
    pub fn new(x0: T, y0: T, x1: T, y1: T) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    /// Finite, non-negative coordinates and strictly positive area.
    pub fn is_valid(&self) -> bool {
        let coords = [self.x0, self.y0, self.x1, self.y1];
        coords.iter().all(|c| c.is_finite() && *c >= T::zero()) && self.x0 < self.x1 && self.y0 < self.y1
    }

    pub fn width(&self) -> T {
        self.x1 - self.x0
    }

    pub fn height(&self) -> T {
        self.y1 - self.y0
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn intersection_area(&self, other: &Rect<T>) -> T {
        let w = self.x1.min(other.x1) - self.x0.max(other.x0);
        let h = self.y1.min(other.y1) - self.y0.max(other.y0);
        if w <= T::zero() || h <= T::zero() {
            T::zero()
        } else {
            w * h
        }
    }

    pub fn centroid(&self) -> Point<T> {
        let two = T::one() + T::one();
        Point::new((self.x0 + self.x1) / two, (self.y0 + self.y1) / two)
    }

    pub fn contains_point(&self, p: &Point<T>) -> bool {
        self.x0 <= p.x && p.x <= self.x1 && self.y0 <= p.y && p.y <= self.y1
    }

    /// Grows the box by `slack` on every side.
    pub fn expand(&self, slack: T) -> Rect<T> {
        Rect::new(self.x0 - slack, self.y0 - slack, self.x1 + slack, self.y1 + slack)
    }

    pub fn contains_rect(&self, inner: &Rect<T>) -> bool {
        self.x0 <= inner.x0 && self.y0 <= inner.y0 && inner.x1 <= self.x1 && inner.y1 <= self.y1
    }

    /// Largest distance by which `inner` sticks out of `self` on any side (0 when contained).
    pub fn overhang(&self, inner: &Rect<T>) -> T {
        let z = T::zero();
        (self.x0 - inner.x0)
            .max(self.y0 - inner.y0)
            .max(inner.x1 - self.x1)
            .max(inner.y1 - self.y1)
            .max(z)
    }

    pub fn union(&self, other: &Rect<T>) -> Rect<T> {
        Rect::new(
            self.x0.min(other.x0),
            self.y0.min(other.y0),
            self.x1.max(other.x1),
            self.y1.max(other.y1),
        )
    }

    pub fn scale(&self, k: T) -> Rect<T> {
        Rect::new(self.x0 * k, self.y0 * k, self.x1 * k, self.y1 * k)
    }
}

/// Intersection over union; 0 for disjoint or touching boxes.
pub fn iou<T: Scalar>(a: &Rect<T>, b: &Rect<T>) -> T {
    let inter = a.intersection_area(b);
    if inter <= T::zero() {
        return T::zero();
    }
    let union = a.area() + b.area() - inter;
    (inter / union).min(T::one())
}

/// Smallest box containing all inputs, `None` for an empty slice.
pub fn union_bbox<T: Scalar>(boxes: &[Rect<T>]) -> Option<Rect<T>> {
    let (first, rest) = boxes.split_first()?;
    Some(rest.iter().fold(*first, |acc, b| acc.union(b)))
}

pub fn centroid<T: Scalar>(b: &Rect<T>) -> Point<T> {
    b.centroid()
}

pub fn contains_point<T: Scalar>(b: &Rect<T>, p: &Point<T>) -> bool {
    b.contains_point(p)
}
