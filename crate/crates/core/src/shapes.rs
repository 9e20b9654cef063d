//! Area-uniform surface sampling of simple closed solids resting on z = 0.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::geom::Point3;

/// Closed solids with their base face on the plane z = 0.
#[derive(Debug, Clone, PartialEq)]
pub enum Solid {
    /// A simple polygon (counter-clockwise, x–y) extruded upward by `height`.
    Prism { outline: Vec<[f64; 2]>, height: f64 },
    Cylinder { radius: f64, height: f64 },
    Cone { radius: f64, height: f64 },
    /// Square base of side `side` centered on the origin, apex above it.
    Pyramid { side: f64, height: f64 },
}

pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn sample_polygon<R: Rng>(poly: &[[f64; 2]], rng: &mut R) -> [f64; 2] {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for v in poly {
        for a in 0..2 {
            lo[a] = lo[a].min(v[a]);
            hi[a] = hi[a].max(v[a]);
        }
    }
    loop {
        let p = [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1])];
        if point_in_polygon(p, poly) {
            return p;
        }
    }
}

fn sample_disk<R: Rng>(radius: f64, rng: &mut R) -> (f64, f64) {
    let r = radius * rng.random::<f64>().sqrt();
    let t = rng.random_range(0.0..2.0 * PI);
    (r * t.cos(), r * t.sin())
}

fn sample_triangle<R: Rng>(a: Point3, b: Point3, c: Point3, rng: &mut R) -> Point3 {
    let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
    if u + v > 1.0 {
        u = 1.0 - u;
        v = 1.0 - v;
    }
    a + (b - a) * u + (c - a) * v
}

enum Face<'a> {
    Polygon { outline: &'a [[f64; 2]], z: f64 },
    Wall { a: [f64; 2], b: [f64; 2], height: f64 },
    Disk { radius: f64, z: f64 },
    Mantle { radius: f64, height: f64 },
    ConeMantle { radius: f64, height: f64 },
    Triangle(Point3, Point3, Point3),
}

impl Face<'_> {
    fn area(&self) -> f64 {
        match *self {
            Face::Polygon { outline, .. } => polygon_area(outline).abs(),
            Face::Wall { a, b, height } => ((b[0] - a[0]).hypot(b[1] - a[1])) * height,
            Face::Disk { radius, .. } => PI * radius * radius,
            Face::Mantle { radius, height } => 2.0 * PI * radius * height,
            Face::ConeMantle { radius, height } => PI * radius * radius.hypot(height),
            Face::Triangle(a, b, c) => 0.5 * (b - a).cross(&(c - a)).norm(),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Point3 {
        match *self {
            Face::Polygon { outline, z } => {
                let [x, y] = sample_polygon(outline, rng);
                Point3::new(x, y, z)
            }
            Face::Wall { a, b, height } => {
                let t: f64 = rng.random();
                Point3::new(
                    a[0] + t * (b[0] - a[0]),
                    a[1] + t * (b[1] - a[1]),
                    rng.random_range(0.0..=height),
                )
            }
            Face::Disk { radius, z } => {
                let (x, y) = sample_disk(radius, rng);
                Point3::new(x, y, z)
            }
            Face::Mantle { radius, height } => {
                let t = rng.random_range(0.0..2.0 * PI);
                Point3::new(radius * t.cos(), radius * t.sin(), rng.random_range(0.0..=height))
            }
            Face::ConeMantle { radius, height } => {
                // Area grows linearly with distance from the apex.
                let s = rng.random::<f64>().sqrt();
                let t = rng.random_range(0.0..2.0 * PI);
                Point3::new(radius * s * t.cos(), radius * s * t.sin(), height * (1.0 - s))
            }
            Face::Triangle(a, b, c) => sample_triangle(a, b, c, rng),
        }
    }
}

impl Solid {
    fn faces(&self) -> Vec<Face<'_>> {
        match self {
            Solid::Prism { outline, height } => {
                let mut f = alloc::vec![
                    Face::Polygon { outline, z: 0.0 },
                    Face::Polygon { outline, z: *height },
                ];
                for i in 0..outline.len() {
                    f.push(Face::Wall {
                        a: outline[i],
                        b: outline[(i + 1) % outline.len()],
                        height: *height,
                    });
                }
                f
            }
            &Solid::Cylinder { radius, height } => alloc::vec![
                Face::Disk { radius, z: 0.0 },
                Face::Disk { radius, z: height },
                Face::Mantle { radius, height },
            ],
            &Solid::Cone { radius, height } => alloc::vec![
                Face::Disk { radius, z: 0.0 },
                Face::ConeMantle { radius, height },
            ],
            &Solid::Pyramid { side, height } => {
                let h = side / 2.0;
                let c = [
                    Point3::new(-h, -h, 0.0),
                    Point3::new(h, -h, 0.0),
                    Point3::new(h, h, 0.0),
                    Point3::new(-h, h, 0.0),
                ];
                let apex = Point3::new(0.0, 0.0, height);
                alloc::vec![
                    Face::Triangle(c[0], c[1], c[2]),
                    Face::Triangle(c[0], c[2], c[3]),
                    Face::Triangle(c[0], c[1], apex),
                    Face::Triangle(c[1], c[2], apex),
                    Face::Triangle(c[2], c[3], apex),
                    Face::Triangle(c[3], c[0], apex),
                ]
            }
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Solid::Prism { outline, height } => polygon_area(outline).abs() * height,
            Solid::Cylinder { radius, height } => PI * radius * radius * height,
            Solid::Cone { radius, height } => PI * radius * radius * height / 3.0,
            Solid::Pyramid { side, height } => side * side * height / 3.0,
        }
    }

    pub fn surface_area(&self) -> f64 {
        self.faces().iter().map(Face::area).sum()
    }

    /// `n` points distributed uniformly by area over the closed surface.
    pub fn sample_surface<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<Point3> {
        let faces = self.faces();
        let weights: Vec<f64> = faces.iter().map(Face::area).collect();
        let pick = WeightedIndex::new(&weights).expect("solid faces have positive area");
        (0..n).map(|_| faces[pick.sample(rng)].sample(rng)).collect()
    }
}

/// Counter-clockwise rectangle centered on `(cx, cy)`.
pub fn rectangle(cx: f64, cy: f64, sx: f64, sy: f64) -> Vec<[f64; 2]> {
    let (hx, hy) = (sx / 2.0, sy / 2.0);
    alloc::vec![
        [cx - hx, cy - hy],
        [cx + hx, cy - hy],
        [cx + hx, cy + hy],
        [cx - hx, cy + hy],
    ]
}
