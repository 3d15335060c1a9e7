//! Analytic ray intersections. Rays are `o + t * d` with `d` not necessarily
//! unit length; every function returns the smallest positive `t`.

use nalgebra::Vector3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    Sphere {
        center: Vector3<f64>,
        radius: f64,
    },
    Capsule {
        a: Vector3<f64>,
        b: Vector3<f64>,
        radius: f64,
    },
    /// Horizontal plane `z = height` in world coordinates.
    Plane { height: f64 },
    /// Axis-aligned box.
    Box { min: Vector3<f64>, max: Vector3<f64> },
}

impl Primitive {
    pub fn intersect(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<f64> {
        match *self {
            Primitive::Sphere { center, radius } => ray_sphere(o, d, &center, radius),
            Primitive::Capsule { a, b, radius } => ray_capsule(o, d, &a, &b, radius),
            Primitive::Plane { height } => ray_plane_z(o, d, height),
            Primitive::Box { min, max } => ray_aabb(o, d, &min, &max),
        }
    }

    /// Unsigned distance from `p` to the primitive surface.
    pub fn surface_distance(&self, p: &Vector3<f64>) -> f64 {
        match *self {
            Primitive::Sphere { center, radius } => ((p - center).norm() - radius).abs(),
            Primitive::Capsule { a, b, radius } => (point_segment_distance(p, &a, &b) - radius).abs(),
            Primitive::Plane { height } => (p.z - height).abs(),
            Primitive::Box { min, max } => {
                let inside = (0..3).all(|i| p[i] >= min[i] && p[i] <= max[i]);
                if inside {
                    (0..3)
                        .map(|i| (p[i] - min[i]).min(max[i] - p[i]))
                        .fold(f64::INFINITY, f64::min)
                } else {
                    let q = Vector3::from_fn(|i, _| (min[i] - p[i]).max(0.0).max(p[i] - max[i]));
                    q.norm()
                }
            }
        }
    }
}

pub fn ray_sphere(o: &Vector3<f64>, d: &Vector3<f64>, c: &Vector3<f64>, r: f64) -> Option<f64> {
    let oc = o - c;
    let a = d.dot(d);
    let b = d.dot(&oc);
    let cc = oc.dot(&oc) - r * r;
    let disc = b * b - a * cc;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = (-b - sq) / a;
    if t0 > 0.0 {
        return Some(t0);
    }
    let t1 = (-b + sq) / a;
    (t1 > 0.0).then_some(t1)
}

/// Capsule as the union of a finite cylinder and two end spheres.
pub fn ray_capsule(
    o: &Vector3<f64>,
    d: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    r: f64,
) -> Option<f64> {
    let mut best = min_opt(ray_sphere(o, d, a, r), ray_sphere(o, d, b, r));
    let ba = b - a;
    let len2 = ba.dot(&ba);
    if len2 > 0.0 {
        let oa = o - a;
        let d_ax = d.dot(&ba) / len2;
        let o_ax = oa.dot(&ba) / len2;
        let dp = d - ba * d_ax;
        let op = oa - ba * o_ax;
        let qa = dp.dot(&dp);
        let qb = dp.dot(&op);
        let qc = op.dot(&op) - r * r;
        let disc = qb * qb - qa * qc;
        if qa > 0.0 && disc >= 0.0 {
            let t = (-qb - disc.sqrt()) / qa;
            let s = o_ax + t * d_ax;
            if t > 0.0 && (0.0..=1.0).contains(&s) {
                best = min_opt(best, Some(t));
            }
        }
    }
    best
}

pub fn ray_plane_z(o: &Vector3<f64>, d: &Vector3<f64>, height: f64) -> Option<f64> {
    if d.z == 0.0 {
        return None;
    }
    let t = (height - o.z) / d.z;
    (t > 0.0).then_some(t)
}

pub fn ray_aabb(
    o: &Vector3<f64>,
    d: &Vector3<f64>,
    min: &Vector3<f64>,
    max: &Vector3<f64>,
) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for i in 0..3 {
        if d[i] == 0.0 {
            if o[i] < min[i] || o[i] > max[i] {
                return None;
            }
            continue;
        }
        let t1 = (min[i] - o[i]) / d[i];
        let t2 = (max[i] - o[i]) / d[i];
        t_near = t_near.max(t1.min(t2));
        t_far = t_far.min(t1.max(t2));
    }
    if t_near > t_far || t_far <= 0.0 {
        return None;
    }
    Some(if t_near > 0.0 { t_near } else { t_far })
}

pub fn point_segment_distance(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let ba = b - a;
    let len2 = ba.dot(&ba);
    let s = if len2 > 0.0 {
        ((p - a).dot(&ba) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ba * s)).norm()
}

fn min_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}
