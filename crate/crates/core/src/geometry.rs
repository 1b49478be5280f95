//! Planar predicate energies.
//!
//! Each predicate has a polynomial residual `r` in the point coordinates that
//! vanishes exactly when the predicate holds; the energy is `r²`. Residuals
//! and their gradients are exposed separately so that algebraic lifting can
//! reuse the same forms.

pub type Point = [f64; 2];

/// Polynomial residual and its gradient with respect to each operand point.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub r: f64,
    pub dr: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoTerm {
    pub value: f64,
    pub grads: Vec<Point>,
    /// A zero-length direction made the predicate hold vacuously.
    pub degenerate: bool,
}

const DEGENERATE_LEN_SQ: f64 = 1e-24;

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn neg(a: Point) -> Point {
    [-a[0], -a[1]]
}

fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s]
}

fn cross(u: Point, v: Point) -> f64 {
    u[0] * v[1] - u[1] * v[0]
}

fn dot(u: Point, v: Point) -> f64 {
    u[0] * v[0] + u[1] * v[1]
}

pub fn d_sq(p: Point, q: Point) -> f64 {
    let u = sub(p, q);
    dot(u, u)
}

impl Residual {
    pub fn squared(self, degenerate: bool) -> GeoTerm {
        GeoTerm {
            value: self.r * self.r,
            grads: self.dr.iter().map(|&g| scale(g, 2.0 * self.r)).collect(),
            degenerate,
        }
    }
}

/// Coordinate difference; zero when the points coincide.
pub fn point_eq_residuals(p: Point, q: Point) -> [Residual; 2] {
    let u = sub(p, q);
    [
        Residual {
            r: u[0],
            dr: vec![[1.0, 0.0], [-1.0, 0.0]],
        },
        Residual {
            r: u[1],
            dr: vec![[0.0, 1.0], [0.0, -1.0]],
        },
    ]
}

/// (B − A) × (C − A)
pub fn coll_residual(a: Point, b: Point, c: Point) -> Residual {
    let u = sub(b, a);
    let v = sub(c, a);
    let db = [v[1], -v[0]];
    let dc = [-u[1], u[0]];
    Residual {
        r: cross(u, v),
        dr: vec![neg([db[0] + dc[0], db[1] + dc[1]]), db, dc],
    }
}

/// (B − A) × (D − C)
pub fn para_residual(a: Point, b: Point, c: Point, d: Point) -> Residual {
    let u = sub(b, a);
    let v = sub(d, c);
    let db = [v[1], -v[0]];
    let dd = [-u[1], u[0]];
    Residual {
        r: cross(u, v),
        dr: vec![neg(db), db, neg(dd), dd],
    }
}

/// (B − A) · (D − C)
pub fn perp_residual(a: Point, b: Point, c: Point, d: Point) -> Residual {
    let u = sub(b, a);
    let v = sub(d, c);
    Residual {
        r: dot(u, v),
        dr: vec![neg(v), v, neg(u), u],
    }
}

/// D²(A, B) − D²(C, D)
pub fn cong_residual(a: Point, b: Point, c: Point, d: Point) -> Residual {
    let u = sub(b, a);
    let v = sub(d, c);
    Residual {
        r: dot(u, u) - dot(v, v),
        dr: vec![scale(u, -2.0), scale(u, 2.0), scale(v, 2.0), scale(v, -2.0)],
    }
}

/// D²(A,B)·D²(G,H) − D²(E,F)·D²(C,D) for AB:CD = EF:GH.
pub fn ratio_residual(p: &[Point; 8]) -> Residual {
    let u: Vec<Point> = (0..4).map(|k| sub(p[2 * k + 1], p[2 * k])).collect();
    let s: Vec<f64> = u.iter().map(|&x| dot(x, x)).collect();
    let r = s[0] * s[3] - s[2] * s[1];
    // ∂r/∂s_k
    let ds = [s[3], -s[2], -s[1], s[0]];
    let mut dr = Vec::with_capacity(8);
    for k in 0..4 {
        dr.push(scale(u[k], -2.0 * ds[k]));
        dr.push(scale(u[k], 2.0 * ds[k]));
    }
    Residual { r, dr }
}

fn degenerate(a: Point, b: Point, c: Point, d: Point) -> bool {
    d_sq(a, b) < DEGENERATE_LEN_SQ || d_sq(c, d) < DEGENERATE_LEN_SQ
}

pub fn e_point_eq(p: Point, q: Point) -> GeoTerm {
    let u = sub(p, q);
    GeoTerm {
        value: dot(u, u),
        grads: vec![scale(u, 2.0), scale(u, -2.0)],
        degenerate: false,
    }
}

pub fn e_coll(a: Point, b: Point, c: Point) -> GeoTerm {
    coll_residual(a, b, c).squared(false)
}

pub fn e_para(a: Point, b: Point, c: Point, d: Point) -> GeoTerm {
    para_residual(a, b, c, d).squared(degenerate(a, b, c, d))
}

pub fn e_perp(a: Point, b: Point, c: Point, d: Point) -> GeoTerm {
    perp_residual(a, b, c, d).squared(degenerate(a, b, c, d))
}

pub fn e_cong(a: Point, b: Point, c: Point, d: Point) -> GeoTerm {
    cong_residual(a, b, c, d).squared(false)
}

pub fn e_ratio(p: &[Point; 8]) -> GeoTerm {
    ratio_residual(p).squared(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn term(kind: usize, p: &[Point]) -> GeoTerm {
        match kind {
            0 => e_coll(p[0], p[1], p[2]),
            1 => e_para(p[0], p[1], p[2], p[3]),
            2 => e_perp(p[0], p[1], p[2], p[3]),
            3 => e_cong(p[0], p[1], p[2], p[3]),
            4 => e_ratio(&p[..8].try_into().unwrap()),
            _ => e_point_eq(p[0], p[1]),
        }
    }

    const ARITY: [usize; 6] = [3, 4, 4, 4, 8, 2];

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point> {
        (0..n).map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(d_sq([0.0, 0.0], [0.0, 0.0]), 0.0);
        assert_eq!(d_sq([0.0, 0.0], [3.0, 4.0]), 25.0);
        assert_eq!(d_sq([1.0, 2.0], [3.0, -4.0]), d_sq([3.0, -4.0], [1.0, 2.0]));
    }

    #[test]
    fn predicate_examples() {
        let o = [0.0, 0.0];
        assert_eq!(e_coll(o, [1.0, 1.0], [2.0, 2.0]).value, 0.0);
        assert_eq!(e_coll(o, [1.0, 0.0], [0.0, 1.0]).value, 1.0);
        assert_eq!(e_para(o, [1.0, 2.0], o, [1.0, 2.0]).value, 0.0);
        assert_eq!(e_perp(o, [1.0, 0.0], o, [0.0, 1.0]).value, 0.0);
        assert_eq!(e_perp(o, [1.0, 0.0], o, [1.0, 1.0]).value, 1.0);
        let t = e_perp(o, o, o, [1.0, 1.0]);
        assert_eq!(t.value, 0.0);
        assert!(t.degenerate);
        assert_eq!(e_cong(o, [1.0, 0.0], o, [0.0, 1.0]).value, 0.0);
        assert_eq!(e_cong(o, [2.0, 0.0], o, [0.0, 1.0]).value, 9.0);
    }

    #[test]
    fn congruence_scaling() {
        let pts = [[0.0, 0.0], [2.0, 0.0], [0.0, 0.0], [0.0, 1.0]];
        let base = e_cong(pts[0], pts[1], pts[2], pts[3]).value;
        let s: Vec<Point> = pts.iter().map(|&p| scale(p, 2.0)).collect();
        let scaled = e_cong(s[0], s[1], s[2], s[3]).value;
        assert_eq!(base, 9.0);
        assert_eq!(scaled, 144.0);
        assert_eq!(scaled / base, 16.0);
    }

    #[test]
    fn ratio_examples() {
        let o = [0.0, 0.0];
        let seg = |len_sq: f64| [o, [len_sq.sqrt(), 0.0]];
        let build = |l: [f64; 4]| -> [Point; 8] {
            let s: Vec<Point> = l.iter().flat_map(|&x| seg(x)).collect();
            s.try_into().unwrap()
        };
        assert!(e_ratio(&build([1.0, 1.0, 1.0, 1.0])).value < 1e-24);
        assert!(e_ratio(&build([1.0, 2.0, 2.0, 4.0])).value < 1e-24);
        assert!((e_ratio(&build([1.0, 1.0, 2.0, 1.0])).value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-4;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for kind in 0..6 {
                let mut pts = random_points(&mut rng, ARITY[kind]);
                if seed % 10 == 0 {
                    // near-degenerate first segment
                    pts[1] = [pts[0][0] + 1e-7, pts[0][1] - 1e-7];
                }
                let analytic = term(kind, &pts);
                for i in 0..pts.len() {
                    for c in 0..2 {
                        let mut plus = pts.clone();
                        plus[i][c] += h;
                        let mut minus = pts.clone();
                        minus[i][c] -= h;
                        let numeric = (term(kind, &plus).value - term(kind, &minus).value) / (2.0 * h);
                        let a = analytic.grads[i][c];
                        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
                        assert!(err < 1e-5, "kind {kind} seed {seed}: {a} vs {numeric}");
                    }
                }
            }
        }
    }

    #[test]
    fn translation_and_rotation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let t = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let (s, c) = th.sin_cos();
            for kind in 0..5 {
                let pts = random_points(&mut rng, ARITY[kind]);
                let base = term(kind, &pts).value;
                let moved: Vec<Point> = pts.iter().map(|p| [p[0] + t[0], p[1] + t[1]]).collect();
                let tol = 1e-9 * base.max(1.0);
                assert!((term(kind, &moved).value - base).abs() < tol);
                let rotated: Vec<Point> =
                    pts.iter().map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]]).collect();
                assert!((term(kind, &rotated).value - base).abs() < tol);
            }
        }
    }
}
