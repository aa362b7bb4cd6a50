use super::Point2;

/// Relative tolerance applied to the in-circle determinant.
pub const INCIRCLE_EPS: f64 = 1e-9;
/// Relative tolerance applied to orientation tests.
pub const ORIENT_EPS: f64 = 1e-12;

/// Twice the signed area of (a, b, c); positive when counter-clockwise.
#[inline]
pub fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Orientation with a magnitude bound: returns (det, bound) where `bound`
/// is the sum of absolute values of the two products.
#[inline]
pub fn orient_with_bound(a: Point2, b: Point2, c: Point2) -> (f64, f64) {
    let l = (b.x - a.x) * (c.y - a.y);
    let r = (b.y - a.y) * (c.x - a.x);
    (l - r, l.abs() + r.abs())
}

/// `true` when (a, b, c) turns left beyond rounding noise.
#[inline]
pub fn is_ccw(a: Point2, b: Point2, c: Point2) -> bool {
    let (det, bound) = orient_with_bound(a, b, c);
    det > ORIENT_EPS * bound
}

/// In-circle determinant for a counter-clockwise triangle (a, b, c) and a
/// query point d, together with its permanent (the same expansion with
/// absolute values). `det > 0` means d lies inside the circumcircle.
pub fn incircle(a: Point2, b: Point2, c: Point2, d: Point2) -> (f64, f64) {
    let (adx, ady) = (a.x - d.x, a.y - d.y);
    let (bdx, bdy) = (b.x - d.x, b.y - d.y);
    let (cdx, cdy) = (c.x - d.x, c.y - d.y);
    let alift = adx * adx + ady * ady;
    let blift = bdx * bdx + bdy * bdy;
    let clift = cdx * cdx + cdy * cdy;
    let det = alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) + clift * (adx * bdy - bdx * ady);
    let perm = alift * ((bdx * cdy).abs() + (cdx * bdy).abs())
        + blift * ((cdx * ady).abs() + (adx * cdy).abs())
        + clift * ((adx * bdy).abs() + (bdx * ady).abs());
    (det, perm)
}

/// Strict in-circle test with the scaled tolerance.
#[inline]
pub fn in_circumcircle(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let (det, perm) = incircle(a, b, c, d);
    det > INCIRCLE_EPS * perm
}

/// Barycentric coordinates of `p` in triangle (a, b, c).
pub fn barycentric(a: Point2, b: Point2, c: Point2, p: Point2) -> [f64; 3] {
    let area = orient(a, b, c);
    let l1 = orient(p, b, c) / area;
    let l2 = orient(a, p, c) / area;
    [l1, l2, 1.0 - l1 - l2]
}
