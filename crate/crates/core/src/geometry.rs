//! Rotated-rectangle geometry.
//!
//! Coordinates are image pixels with `x` to the right and `y` downward.
//! `theta` is in degrees and measures the clockwise rotation (as seen on
//! screen) of the box's height axis away from the image's vertical axis.
//! Equivalently, the box-local frame is the image frame rotated by the
//! matrix `[[cos, -sin], [sin, cos]]` applied in image coordinates.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::wrap_half_turn;

/// Relative slack used by [`contains`] so that points constructed on the
/// boundary are not rejected by rounding.
const CONTAINS_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("box dimensions must be finite and positive (w={w}, h={h})")]
    NonPositiveSize { w: f64, h: f64 },
    #[error("box parameters must be finite")]
    NonFinite,
}

/// A 2-D point in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }
}

/// Rotates `(x, y)` by `deg` degrees in image coordinates.
#[inline]
pub fn rotate_vec(x: f64, y: f64, deg: f64) -> (f64, f64) {
    let (s, c) = deg.to_radians().sin_cos();
    (c * x - s * y, s * x + c * y)
}

/// Five-parameter oriented box `(x_c, y_c, w, h, theta)`.
///
/// The serialized field names follow the annotation wire format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatedBox {
    #[serde(rename = "xc")]
    pub x_c: f64,
    #[serde(rename = "yc")]
    pub y_c: f64,
    pub w: f64,
    pub h: f64,
    #[serde(rename = "theta_deg")]
    pub theta: f64,
}

impl RotatedBox {
    /// Builds a box, checking `w > 0`, `h > 0` and finiteness. The angle is
    /// kept as given; see [`RotatedBox::canonical`].
    pub fn new(x_c: f64, y_c: f64, w: f64, h: f64, theta: f64) -> Result<Self, GeometryError> {
        let b = Self { x_c, y_c, w, h, theta };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if ![self.x_c, self.y_c, self.w, self.h, self.theta]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(GeometryError::NonFinite);
        }
        if self.w <= 0.0 || self.h <= 0.0 {
            return Err(GeometryError::NonPositiveSize { w: self.w, h: self.h });
        }
        Ok(())
    }

    pub fn center(&self) -> Point {
        Point::new(self.x_c, self.y_c)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Same rectangle with `theta` wrapped into `[-90, 90)`.
    ///
    /// A rectangle is unchanged by a half turn, so wrapping by multiples of
    /// 180 degrees never needs to exchange `w` and `h`.
    pub fn canonical(&self) -> Self {
        Self { theta: wrap_half_turn(self.theta), ..*self }
    }

    pub fn is_canonical(&self) -> bool {
        (-90.0..90.0).contains(&self.theta)
    }

    /// Applies the rigid motion "rotate by `deg` about `pivot`, then translate
    /// by `(dx, dy)`". The angle is *not* re-canonicalized so the box-local
    /// side labelling follows the motion.
    pub fn rigid_motion(&self, pivot: Point, deg: f64, dx: f64, dy: f64) -> Self {
        let (rx, ry) = rotate_vec(self.x_c - pivot.x, self.y_c - pivot.y, deg);
        Self {
            x_c: pivot.x + rx + dx,
            y_c: pivot.y + ry + dy,
            theta: self.theta + deg,
            ..*self
        }
    }

    /// Half-length of the diagonal; the radius of the circumscribed circle.
    pub fn circumradius(&self) -> f64 {
        0.5 * self.w.hypot(self.h)
    }

    /// Maps a box-local offset to image coordinates.
    pub fn local_to_image(&self, lx: f64, ly: f64) -> Point {
        let (x, y) = rotate_vec(lx, ly, self.theta);
        Point::new(self.x_c + x, self.y_c + y)
    }

    /// Maps an image point into the box-local frame (origin at the center).
    pub fn image_to_local(&self, p: Point) -> (f64, f64) {
        rotate_vec(p.x - self.x_c, p.y - self.y_c, -self.theta)
    }
}

/// Corner form of a [`RotatedBox`].
///
/// Vertices are ordered top-left, top-right, bottom-right, bottom-left in the
/// box-local frame, which gives a positive shoelace area (counter-clockwise
/// in the usual y-up mathematical orientation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub vertices: [Point; 4],
}

impl Quad {
    pub fn area(&self) -> f64 {
        shoelace_area(&self.vertices)
    }

    /// Recovers the rotated box from a rectangle in [`to_quad`] vertex order.
    pub fn to_rotated_box(&self) -> RotatedBox {
        let [tl, tr, _br, bl] = self.vertices;
        let cx = self.vertices.iter().map(|p| p.x).sum::<f64>() / 4.0;
        let cy = self.vertices.iter().map(|p| p.y).sum::<f64>() / 4.0;
        let top = tr.sub(tl);
        let side = bl.sub(tl);
        RotatedBox {
            x_c: cx,
            y_c: cy,
            w: top.x.hypot(top.y),
            h: side.x.hypot(side.y),
            theta: wrap_half_turn(top.y.atan2(top.x).to_degrees()),
        }
    }
}

/// Corners of `b`, first vertex at the box-local top-left.
pub fn to_quad(b: &RotatedBox) -> Quad {
    let (hw, hh) = (0.5 * b.w, 0.5 * b.h);
    Quad {
        vertices: [
            b.local_to_image(-hw, -hh),
            b.local_to_image(hw, -hh),
            b.local_to_image(hw, hh),
            b.local_to_image(-hw, hh),
        ],
    }
}

/// Signed shoelace area; positive for the vertex order produced by [`to_quad`].
pub fn shoelace_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        acc += poly[i].cross(poly[(i + 1) % n]);
    }
    0.5 * acc
}

/// Clips `subject` against the half-plane on the inner side of the directed
/// edge `a -> b`.
fn clip_half_plane(subject: &[Point], a: Point, b: Point, out: &mut Vec<Point>) {
    out.clear();
    let n = subject.len();
    if n == 0 {
        return;
    }
    let edge = b.sub(a);
    let side = |p: Point| edge.cross(p.sub(a));
    let mut prev = subject[n - 1];
    let mut prev_d = side(prev);
    for &cur in subject {
        let cur_d = side(cur);
        let cur_in = cur_d >= 0.0;
        let prev_in = prev_d >= 0.0;
        if cur_in != prev_in {
            let t = prev_d / (prev_d - cur_d);
            out.push(Point::new(
                prev.x + (cur.x - prev.x) * t,
                prev.y + (cur.y - prev.y) * t,
            ));
        }
        if cur_in {
            out.push(cur);
        }
        prev = cur;
        prev_d = cur_d;
    }
}

/// Sutherland–Hodgman intersection of two convex polygons given with
/// positive orientation.
pub fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut poly = subject.to_vec();
    let mut scratch = Vec::with_capacity(subject.len() + clip.len());
    let m = clip.len();
    for i in 0..m {
        clip_half_plane(&poly, clip[i], clip[(i + 1) % m], &mut scratch);
        std::mem::swap(&mut poly, &mut scratch);
        if poly.len() < 3 {
            return Vec::new();
        }
    }
    poly
}

fn lex_cmp(a: &RotatedBox, b: &RotatedBox) -> Ordering {
    [a.x_c, a.y_c, a.w, a.h, a.theta]
        .iter()
        .zip([b.x_c, b.y_c, b.w, b.h, b.theta].iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Area of the intersection of two rotated boxes.
pub fn intersection_area(a: &RotatedBox, b: &RotatedBox) -> f64 {
    // Order the operands so the floating-point path is identical for (a, b)
    // and (b, a).
    let (a, b) = if lex_cmp(a, b).is_gt() { (b, a) } else { (a, b) };
    let dx = a.x_c - b.x_c;
    let dy = a.y_c - b.y_c;
    let reach = a.circumradius() + b.circumradius();
    if dx * dx + dy * dy >= reach * reach {
        return 0.0;
    }
    let qa = to_quad(a);
    let qb = to_quad(b);
    let poly = clip_convex(&qa.vertices, &qb.vertices);
    let area = shoelace_area(&poly);
    // Shared edges or vertices produce slivers of rounding noise only.
    if area <= 1e-12 * a.area().min(b.area()) {
        0.0
    } else {
        area
    }
}

/// Intersection over union of two rotated boxes, in `[0, 1]`.
pub fn rotated_iou(a: &RotatedBox, b: &RotatedBox) -> f64 {
    let inter = intersection_area(a, b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// `true` iff `p` lies inside `b` or on its boundary.
pub fn contains(b: &RotatedBox, p: Point) -> bool {
    let (lx, ly) = b.image_to_local(p);
    let tol = CONTAINS_EPS * (1.0 + b.w.max(b.h));
    lx.abs() <= 0.5 * b.w + tol && ly.abs() <= 0.5 * b.h + tol
}
