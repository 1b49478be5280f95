//! Built-in verification suites: energy faithfulness on constructed states
//! and analytic gradients against central finite differences.
//!
//! States are assembled from predicate gadgets. Each gadget owns fresh
//! symbols, so making one gadget false leaves every other one true.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::stream;
use crate::energy::{total_energy, Binding, DomainWeights};
use crate::expr_io::load_problem;
use crate::hypergraph::{EntityRef, MathState};

/// Predicate gadget kinds; three matrix, two scalar and seven planar.
pub const GADGETS: [&str; 12] = [
    "matrix-product",
    "symmetric",
    "orthogonal",
    "inverse",
    "scalar-sum",
    "scalar-product",
    "collinear",
    "parallel",
    "perpendicular",
    "congruent",
    "ratio",
    "midpoint",
];

/// Index of the first gadget of each engine.
const MATRIX: std::ops::Range<usize> = 0..4;
const SCALAR: std::ops::Range<usize> = 4..6;
const PLANAR: std::ops::Range<usize> = 6..12;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub failures: Vec<String>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Problem text pieces for one predicate.
#[derive(Debug, Clone, Default)]
pub struct Gadget {
    pub decls: Vec<String>,
    pub binds: Vec<String>,
    pub premise: String,
    /// A symbol unique to this gadget, used to find its edge again.
    pub tag: String,
}

type P = [f64; 2];

fn pt(rng: &mut ChaCha8Rng) -> P {
    [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]
}

/// Direction with length in [0.5, 2].
fn dir(rng: &mut ChaCha8Rng) -> P {
    let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let l = rng.gen_range(0.5..2.0);
    [l * a.cos(), l * a.sin()]
}

fn add(a: P, b: P) -> P {
    [a[0] + b[0], a[1] + b[1]]
}

fn scale(a: P, s: f64) -> P {
    [a[0] * s, a[1] * s]
}

fn rot90(a: P) -> P {
    [-a[1], a[0]]
}

fn unit(a: P) -> P {
    let n = (a[0] * a[0] + a[1] * a[1]).sqrt();
    scale(a, 1.0 / n)
}

fn mat(rng: &mut ChaCha8Rng) -> [f64; 4] {
    [
        2.0 + rng.gen_range(-0.5..0.5),
        rng.gen_range(-0.5..0.5),
        rng.gen_range(-0.5..0.5),
        2.0 + rng.gen_range(-0.5..0.5),
    ]
}

fn mul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

fn inv(a: [f64; 4]) -> [f64; 4] {
    let det = a[0] * a[3] - a[1] * a[2];
    [a[3] / det, -a[1] / det, -a[2] / det, a[0] / det]
}

struct Builder<'a> {
    g: Gadget,
    k: usize,
    rng: &'a mut ChaCha8Rng,
}

impl Builder<'_> {
    fn name(&self, base: &str) -> String {
        format!("{base}{}", self.k)
    }

    fn decl(&mut self, base: &str, kind: &str) -> String {
        let n = self.name(base);
        self.g.decls.push(format!("(decl {n} {kind})"));
        if self.g.tag.is_empty() {
            self.g.tag = n.clone();
        }
        n
    }

    fn bind(&mut self, name: &str, values: &[f64]) {
        let mut s = format!("(bind {name}");
        for v in values {
            write!(s, " {v}").expect("string write");
        }
        s.push(')');
        self.g.binds.push(s);
    }

    fn point(&mut self, base: &str, p: P) -> String {
        let n = self.decl(base, "point");
        self.bind(&n, &p);
        n
    }

    fn matrix(&mut self, base: &str, m: [f64; 4]) -> String {
        let n = self.decl(base, "matrix 2 2");
        self.bind(&n, &m);
        n
    }

    fn scalar(&mut self, base: &str, v: f64) -> String {
        let n = self.decl(base, "var");
        self.bind(&n, &[v]);
        n
    }
}

/// Builds gadget `kind` with symbol suffix `k`. When `falsify` is set the
/// predicate is made false by a perturbation of size at least 0.5.
pub fn gadget(kind: usize, k: usize, rng: &mut ChaCha8Rng, falsify: bool) -> Gadget {
    let off = if falsify { 0.5 } else { 0.0 };
    let mut b = Builder {
        g: Gadget::default(),
        k,
        rng,
    };
    let premise = match kind {
        0 => {
            let (ma, mb) = (mat(b.rng), mat(b.rng));
            let mut c = mul(ma, mb);
            c[1] += off;
            let (a, bb, cc) = (b.matrix("A", ma), b.matrix("B", mb), b.matrix("C", c));
            format!("(Equals (Product {a} {bb}) {cc})")
        }
        1 => {
            let m = mat(b.rng);
            let mut n = m;
            n[1] += off;
            let (a, bb) = (b.matrix("M", m), b.matrix("N", n));
            format!("(Symmetric (Sum {a} (Transpose {bb})))")
        }
        2 => {
            let t: f64 = b.rng.gen_range(0.0..std::f64::consts::TAU);
            let s = 1.0 + off * 0.6;
            let q = b.matrix("Q", [s * t.cos(), -s * t.sin(), s * t.sin(), s * t.cos()]);
            format!("(Orthogonal {q})")
        }
        3 => {
            let x = mat(b.rng);
            let mut y = inv(x);
            y[0] += off;
            let (a, bb) = (b.matrix("X", x), b.matrix("Y", y));
            format!("(InverseOf {a} {bb})")
        }
        4 => {
            let (x, y) = (b.rng.gen_range(-2.0..2.0), b.rng.gen_range(-2.0..2.0));
            let (xs, ys, zs) = (b.scalar("x", x), b.scalar("y", y), b.scalar("z", x + y + off));
            format!("(Equals (Sum {xs} {ys}) {zs})")
        }
        5 => {
            let (x, y) = (b.rng.gen_range(-2.0..2.0), b.rng.gen_range(-2.0..2.0));
            let (xs, ys, ws) = (b.scalar("u", x), b.scalar("v", y), b.scalar("w", x * y + off));
            format!("(Equals (Product {xs} {ys}) {ws})")
        }
        6 => {
            let a = pt(b.rng);
            let d = dir(b.rng);
            let t = b.rng.gen_range(-1.5..1.5);
            let c = add(add(a, scale(d, t)), scale(unit(rot90(d)), off));
            let (pa, pb, pc) = (b.point("P", a), b.point("Q", add(a, d)), b.point("R", c));
            format!("(Collinear {pa} {pb} {pc})")
        }
        7 => {
            let (a, c) = (pt(b.rng), pt(b.rng));
            let d = dir(b.rng);
            let s = b.rng.gen_range(0.5..1.5);
            let dd = add(add(c, scale(d, s)), scale(unit(rot90(d)), off));
            let (pa, pb, pc, pd) = (b.point("A", a), b.point("B", add(a, d)), b.point("C", c), b.point("D", dd));
            format!("(Parallel (Line {pa} {pb}) (Line {pc} {pd}))")
        }
        8 => {
            let (a, c) = (pt(b.rng), pt(b.rng));
            let d = dir(b.rng);
            let s = b.rng.gen_range(0.5..1.5);
            let dd = add(add(c, scale(rot90(d), s)), scale(unit(d), off));
            let (pa, pb, pc, pd) = (b.point("E", a), b.point("F", add(a, d)), b.point("G", c), b.point("H", dd));
            format!("(Perpendicular {pa} {pb} {pc} {pd})")
        }
        9 => {
            let (a, c) = (pt(b.rng), pt(b.rng));
            let d = dir(b.rng);
            let phi: f64 = b.rng.gen_range(0.0..std::f64::consts::TAU);
            let r = [d[0] * phi.cos() - d[1] * phi.sin(), d[0] * phi.sin() + d[1] * phi.cos()];
            let dd = add(add(c, r), scale(unit(r), off));
            let (pa, pb, pc, pd) = (b.point("I", a), b.point("J", add(a, d)), b.point("K", c), b.point("L", dd));
            format!("(Congruent (Line {pa} {pb}) (Line {pc} {pd}))")
        }
        10 => {
            let (a, c, e, g) = (pt(b.rng), pt(b.rng), pt(b.rng), pt(b.rng));
            let (dab, dcd, def) = (dir(b.rng), dir(b.rng), dir(b.rng));
            let sq = |p: P| p[0] * p[0] + p[1] * p[1];
            let gh_len = (sq(def) * sq(dcd) / sq(dab)).sqrt() + off;
            let h = add(g, scale(unit(dir(b.rng)), gh_len));
            let names = [
                b.point("Pa", a),
                b.point("Pb", add(a, dab)),
                b.point("Pc", c),
                b.point("Pd", add(c, dcd)),
                b.point("Pe", e),
                b.point("Pf", add(e, def)),
                b.point("Pg", g),
                b.point("Ph", h),
            ];
            format!(
                "(Ratio (Line {} {}) (Line {} {}) (Line {} {}) (Line {} {}))",
                names[0], names[1], names[2], names[3], names[4], names[5], names[6], names[7]
            )
        }
        _ => {
            let (a, bb) = (pt(b.rng), pt(b.rng));
            let m = add(scale(add(a, bb), 0.5), [off, 0.6 * off]);
            let (pa, pb, pm) = (b.point("S", a), b.point("T", bb), b.point("O", m));
            format!("(Equals (Midpoint {pa} {pb}) {pm})")
        }
    };
    b.g.premise = premise;
    b.g
}

/// Compiles gadgets into one problem; the goal is a fresh, unasserted
/// scalar equality.
pub fn assemble(gadgets: &[Gadget]) -> (MathState, Binding) {
    let mut text = String::from("(problem (decl goal_l var) (decl goal_r var)");
    for g in gadgets {
        for d in &g.decls {
            text.push(' ');
            text.push_str(d);
        }
    }
    for g in gadgets {
        write!(text, " (premise {})", g.premise).expect("string write");
    }
    text.push_str(" (goal (Equals goal_l goal_r))");
    for g in gadgets {
        for b in &g.binds {
            text.push(' ');
            text.push_str(b);
        }
    }
    text.push(')');
    let built = load_problem(&text, 2).expect("generated problems parse");
    let mut binding = built.binding;
    binding.fill_defaults(&built.state);
    (built.state, binding)
}

/// Picks one gadget per engine plus up to two more.
fn mixed_kinds(rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut kinds = vec![
        rng.gen_range(MATRIX),
        rng.gen_range(SCALAR),
        rng.gen_range(PLANAR),
    ];
    for _ in 0..rng.gen_range(0..=2) {
        kinds.push(rng.gen_range(0..GADGETS.len()));
    }
    kinds
}

/// `cases` true states must have total energy below 1e-8; `cases` states
/// with one falsified predicate must exceed 1e-4 with that predicate the
/// only edge above 1e-8.
pub fn faithfulness_suite(seed: u64, cases: usize) -> SuiteReport {
    let start = Instant::now();
    let w = DomainWeights::default();
    let mut failures = Vec::new();
    for i in 0..cases {
        let mut rng = stream(seed, "faithfulness", i as u64);
        let kinds = mixed_kinds(&mut rng);
        let gadgets: Vec<Gadget> = kinds.iter().enumerate().map(|(k, &kind)| gadget(kind, k, &mut rng, false)).collect();
        let (s, b) = assemble(&gadgets);
        match total_energy(&s, &b, &w) {
            Ok(r) if r.total < 1e-8 => {}
            Ok(r) => failures.push(format!("true state {i} ({kinds:?}) has energy {:e}", r.total)),
            Err(e) => failures.push(format!("true state {i}: {e}")),
        }

        let bad = rng.gen_range(0..kinds.len());
        let gadgets: Vec<Gadget> = kinds
            .iter()
            .enumerate()
            .map(|(k, &kind)| gadget(kind, k, &mut rng, k == bad))
            .collect();
        let (s, b) = assemble(&gadgets);
        let r = match total_energy(&s, &b, &w) {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("falsified state {i}: {e}"));
                continue;
            }
        };
        let hot: Vec<_> = r.per_edge.iter().filter(|(_, e)| e.value > 1e-8).map(|(id, _)| *id).collect();
        let located = hot.len() == 1 && s.render(EntityRef::Edge(hot[0])).contains(&gadgets[bad].tag);
        if r.total <= 1e-4 || !located {
            failures.push(format!(
                "falsified state {i}: {} false, total {:e}, {} edges above 1e-8",
                GADGETS[kinds[bad]],
                r.total,
                hot.len()
            ));
        }
    }
    SuiteReport {
        name: "faithfulness".into(),
        cases: 2 * cases,
        failures,
        elapsed: start.elapsed(),
    }
}

/// Largest mixed relative error `|a − fd| / max(|a|, |fd|, 1)` between the
/// analytic gradient and central differences with step `h`.
pub fn gradient_error(s: &MathState, b: &Binding, w: &DomainWeights, h: f64) -> f64 {
    let r = total_energy(s, b, w).expect("suite states evaluate");
    let x = b.free_vector();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let at = |d: f64| {
            let mut xs = x.clone();
            xs[i] += d;
            let mut t = b.clone();
            t.set_free_vector(&xs);
            total_energy(s, &t, w).expect("suite states evaluate").total
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        let a = r.gradient[i];
        worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1.0));
    }
    worst
}

/// For every gadget kind and for a state holding all of them, compares
/// gradients at `seeds` random (generally false) configurations.
pub fn smoothness_suite(seed: u64, seeds: usize, tol: f64) -> SuiteReport {
    let start = Instant::now();
    let w = DomainWeights {
        matrix: 0.7,
        ideal: 1.3,
        geometry: 0.9,
    };
    let mut failures = Vec::new();
    let mut cases = 0;
    for term in 0..=GADGETS.len() {
        let label = GADGETS.get(term).copied().unwrap_or("total");
        for i in 0..seeds {
            let mut rng = stream(seed, label, i as u64);
            let gadgets: Vec<Gadget> = if term < GADGETS.len() {
                vec![gadget(term, 0, &mut rng, true)]
            } else {
                (0..GADGETS.len()).map(|k| gadget(k, k, &mut rng, i.is_multiple_of(2))).collect()
            };
            let (s, b) = assemble(&gadgets);
            let err = gradient_error(&s, &b, &w, 1e-5);
            cases += 1;
            if err.is_nan() || err >= tol {
                failures.push(format!("{label} seed {i}: relative error {err:e}"));
            }
        }
    }
    SuiteReport {
        name: "smoothness".into(),
        cases,
        failures,
        elapsed: start.elapsed(),
    }
}

/// Renders suite results as an aligned pass/fail table.
pub fn table(reports: &[SuiteReport]) -> String {
    let mut out = String::from("suite          cases  result  time\n");
    for r in reports {
        writeln!(
            out,
            "{:<14} {:>5}  {:<6}  {:.2?}",
            r.name,
            r.cases,
            if r.passed() { "pass" } else { "FAIL" },
            r.elapsed
        )
        .expect("string write");
        for f in r.failures.iter().take(5) {
            writeln!(out, "  {f}").expect("string write");
        }
    }
    out
}
