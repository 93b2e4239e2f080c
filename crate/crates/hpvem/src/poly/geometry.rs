use super::{Point, Scalar};
use crate::error::{Error, Result};

pub fn triangle_area<T: Scalar>(a: Point<T>, b: Point<T>, c: Point<T>) -> T {
    ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs() * T::of(0.5)
}

fn cross<T: Scalar>(o: Point<T>, a: Point<T>, b: Point<T>) -> T {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

pub fn dist<T: Scalar>(a: Point<T>, b: Point<T>) -> T {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Shoelace area, positive for counterclockwise loops.
pub fn signed_area<T: Scalar>(v: &[Point<T>]) -> T {
    let n = v.len();
    let mut s = T::zero();
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        s += a[0] * b[1] - b[0] * a[1];
    }
    s * T::of(0.5)
}

pub fn centroid<T: Scalar>(v: &[Point<T>]) -> Point<T> {
    let n = v.len();
    let mut cx = T::zero();
    let mut cy = T::zero();
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        let w = a[0] * b[1] - b[0] * a[1];
        cx += (a[0] + b[0]) * w;
        cy += (a[1] + b[1]) * w;
    }
    let a6 = signed_area(v) * T::of(6.0);
    [cx / a6, cy / a6]
}

pub fn diameter<T: Scalar>(v: &[Point<T>]) -> T {
    let mut d = T::zero();
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            d = d.max(dist(v[i], v[j]));
        }
    }
    d
}

fn segments_intersect<T: Scalar>(p1: Point<T>, p2: Point<T>, q1: Point<T>, q2: Point<T>, tol: T) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > tol && d2 < -tol) || (d1 < -tol && d2 > tol)) && ((d3 > tol && d4 < -tol) || (d3 < -tol && d4 > tol)) {
        return true;
    }
    let on = |a: Point<T>, b: Point<T>, x: Point<T>, d: T| {
        d.abs() <= tol && x[0] >= a[0].min(b[0]) - tol && x[0] <= a[0].max(b[0]) + tol && x[1] >= a[1].min(b[1]) - tol && x[1] <= a[1].max(b[1]) + tol
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

/// True when no two non-adjacent sides touch and no side is degenerate.
pub fn is_simple<T: Scalar>(v: &[Point<T>]) -> bool {
    let n = v.len();
    if n < 3 {
        return false;
    }
    let scale = diameter(v);
    if scale <= T::zero() {
        return false;
    }
    let tol = scale * scale * T::of(1e-14);
    for i in 0..n {
        if dist(v[i], v[(i + 1) % n]) <= scale * T::of(1e-14) {
            return false;
        }
    }
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                // adjacent sides must not fold back onto each other
                let (c, d) = if j == i + 1 { (a, v[(j + 1) % n]) } else { (v[j], b) };
                let shared = if j == i + 1 { b } else { a };
                let cr = cross(shared, c, d);
                let dot = (c[0] - shared[0]) * (d[0] - shared[0]) + (c[1] - shared[1]) * (d[1] - shared[1]);
                if cr.abs() <= tol && dot > T::zero() {
                    return false;
                }
                continue;
            }
            if segments_intersect(a, b, v[j], v[(j + 1) % n], tol) {
                return false;
            }
        }
    }
    true
}

/// Inward unit normals and offsets of the supporting lines of the sides,
/// with repeated (collinear) lines removed: interior satisfies n·x ≥ c.
fn side_lines<T: Scalar>(v: &[Point<T>]) -> Vec<(Point<T>, T)> {
    let n = v.len();
    let scale = diameter(v);
    let mut lines: Vec<(Point<T>, T)> = Vec::new();
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        let len = dist(a, b);
        let nrm = [-(b[1] - a[1]) / len, (b[0] - a[0]) / len];
        let c = nrm[0] * a[0] + nrm[1] * a[1];
        let dup = lines
            .iter()
            .any(|(m, d)| (m[0] - nrm[0]).abs() < T::of(1e-12) && (m[1] - nrm[1]).abs() < T::of(1e-12) && (*d - c).abs() < T::of(1e-12) * scale);
        if !dup {
            lines.push((nrm, c));
        }
    }
    lines
}

/// Largest ball contained in the kernel of the polygon (the set of points
/// from which the whole polygon is visible). Returns (center, radius); the
/// radius is 0 when the polygon is not star-shaped with respect to any ball.
pub fn kernel_ball<T: Scalar>(v: &[Point<T>]) -> (Point<T>, T) {
    let lines = side_lines(v);
    let m = lines.len();
    let scale = diameter(v);
    let tol = scale * T::of(1e-12);
    let mut best: Option<(Point<T>, T)> = None;
    for i in 0..m {
        for j in i + 1..m {
            for k in j + 1..m {
                let (ni, ci) = lines[i];
                let (nj, cj) = lines[j];
                let (nk, ck) = lines[k];
                // n·x - r = c for the three lines
                let a = nalgebra::Matrix3::new(ni[0], ni[1], -T::one(), nj[0], nj[1], -T::one(), nk[0], nk[1], -T::one());
                let Some(inv) = a.try_inverse() else { continue };
                let sol = inv * nalgebra::Vector3::new(ci, cj, ck);
                let (x, r) = ([sol[0], sol[1]], sol[2]);
                if r <= T::zero() || !r.is_finite() {
                    continue;
                }
                if lines.iter().all(|(n, c)| n[0] * x[0] + n[1] * x[1] - *c >= r - tol) && best.is_none_or(|(_, rb)| r > rb) {
                    best = Some((x, r));
                }
            }
        }
    }
    best.unwrap_or((centroid(v), T::zero()))
}

/// Is `x` strictly inside the kernel, at distance at least `margin` from every side line.
pub fn in_kernel<T: Scalar>(v: &[Point<T>], x: Point<T>, margin: T) -> bool {
    side_lines(v).iter().all(|(n, c)| n[0] * x[0] + n[1] * x[1] - *c > margin)
}

/// Split a simple counterclockwise polygon into triangles: a fan from the
/// centroid (or from the kernel center) when the polygon is star-shaped,
/// ear clipping otherwise.
pub fn triangulate<T: Scalar>(v: &[Point<T>]) -> Result<Vec<[Point<T>; 3]>> {
    let n = v.len();
    if signed_area(v) <= T::zero() {
        return Err(Error::Geometry("polygon must be counterclockwise with positive area".into()));
    }
    if n == 3 {
        return Ok(vec![[v[0], v[1], v[2]]]);
    }
    let scale = diameter(v);
    let c = centroid(v);
    let apex = if in_kernel(v, c, scale * T::of(1e-10)) {
        Some(c)
    } else {
        let (k, r) = kernel_ball(v);
        (r > scale * T::of(1e-10)).then_some(k)
    };
    if let Some(apex) = apex {
        return Ok((0..n).map(|i| [apex, v[i], v[(i + 1) % n]]).collect());
    }
    ear_clip(v)
}

fn ear_clip<T: Scalar>(v: &[Point<T>]) -> Result<Vec<[Point<T>; 3]>> {
    let scale = diameter(v);
    let tol = scale * scale * T::of(1e-14);
    let mut idx: Vec<usize> = (0..v.len()).collect();
    let mut out = Vec::new();
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for allow_flat in [false, true] {
            for i in 0..m {
                let (ia, ib, ic) = (idx[(i + m - 1) % m], idx[i], idx[(i + 1) % m]);
                let (a, b, c) = (v[ia], v[ib], v[ic]);
                let cr = cross(a, b, c);
                if cr < -tol || (!allow_flat && cr <= tol) {
                    continue;
                }
                let blocked = idx.iter().any(|&j| {
                    if j == ia || j == ib || j == ic {
                        return false;
                    }
                    let p = v[j];
                    cross(a, b, p) >= -tol && cross(b, c, p) >= -tol && cross(c, a, p) >= -tol
                });
                if blocked {
                    continue;
                }
                if cr > tol {
                    out.push([a, b, c]);
                }
                idx.remove(i);
                clipped = true;
                break;
            }
            if clipped {
                break;
            }
        }
        if !clipped {
            return Err(Error::NonSimplePolygon);
        }
    }
    out.push([v[idx[0]], v[idx[1]], v[idx[2]]]);
    Ok(out)
}

/// Distance from x to the segment a-b.
pub fn point_segment_distance<T: Scalar>(x: Point<T>, a: Point<T>, b: Point<T>) -> T {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let t = (((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / l2).max(T::zero()).min(T::one());
    dist(x, [a[0] + t * d[0], a[1] + t * d[1]])
}
