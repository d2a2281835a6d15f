//! Sound checking of polynomial (v, w, q) certificates for the per-phase reachability programs.
//!
//! Text format, one record per line (`#` starts a comment):
//!
//! ```text
//! rtdd-certificate 1
//! degree <phase> <name> <d>
//! <phase> <name> <coef> <et> <ex1> <ex2> <ek1> <ek2>
//! ```
//!
//! `phase` is `move`, `brake` or `stop`; `name` is `v`, `w`, `q`, `g1` or `g2`. Polynomials
//! with no terms are zero. A `degree` line bounds the total degree of that polynomial.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RobotConfig;
use crate::error::{Error, Result};
use crate::geometry::Aabb;
use crate::interval::Interval;
use crate::models::{BrakeLaw, Phase, TrajectoryFamily, YawLaw};
use crate::poly::{lie_derivatives, Polynomial, K1, K2, NVARS, T, X1, X2};

pub const HEADER: &str = "rtdd-certificate 1";
pub const POLY_NAMES: [&str; 5] = ["v", "w", "q", "g1", "g2"];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseCertificate {
    pub v: Polynomial,
    pub w: Polynomial,
    pub q: Polynomial,
    /// Tracking-error polynomials (g1, g2) used in the L_g constraints.
    pub g: [Polynomial; 2],
    pub degrees: BTreeMap<String, u32>,
}

impl PhaseCertificate {
    fn poly_mut(&mut self, name: &str) -> Option<&mut Polynomial> {
        match name {
            "v" => Some(&mut self.v),
            "w" => Some(&mut self.w),
            "q" => Some(&mut self.q),
            "g1" => Some(&mut self.g[0]),
            "g2" => Some(&mut self.g[1]),
            _ => None,
        }
    }

    fn poly(&self, name: &str) -> &Polynomial {
        match name {
            "v" => &self.v,
            "w" => &self.w,
            "q" => &self.q,
            "g1" => &self.g[0],
            _ => &self.g[1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PolynomialCertificate {
    pub phases: [PhaseCertificate; 3],
}

fn phase_by_name(s: &str) -> Option<Phase> {
    Phase::ALL.into_iter().find(|p| p.name() == s)
}

impl PolynomialCertificate {
    /// Same (v, w, q) in every phase with zero g.
    pub fn uniform(v: Polynomial, w: Polynomial, q: Polynomial) -> Self {
        let pc = PhaseCertificate { v, w, q, ..Default::default() };
        Self { phases: [pc.clone(), pc.clone(), pc] }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cert = Self::default();
        let mut seen_header = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: line_no, msg };
            if !seen_header {
                if line != HEADER {
                    return Err(err(format!("expected header `{HEADER}`")));
                }
                seen_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields[0] == "degree" {
                if fields.len() != 4 {
                    return Err(err("degree lines are `degree <phase> <name> <d>`".into()));
                }
                let phase = phase_by_name(fields[1]).ok_or_else(|| err(format!("unknown phase `{}`", fields[1])))?;
                if !POLY_NAMES.contains(&fields[2]) {
                    return Err(err(format!("unknown polynomial `{}`", fields[2])));
                }
                let d: u32 = fields[3].parse().map_err(|_| err(format!("bad degree `{}`", fields[3])))?;
                cert.phases[phase.index()].degrees.insert(fields[2].to_string(), d);
                continue;
            }
            if fields.len() != 3 + NVARS {
                return Err(err(format!("expected {} fields, found {}", 3 + NVARS, fields.len())));
            }
            let phase = phase_by_name(fields[0]).ok_or_else(|| err(format!("unknown phase `{}`", fields[0])))?;
            let coef: f64 = fields[2].parse().map_err(|_| err(format!("bad coefficient `{}`", fields[2])))?;
            if !coef.is_finite() {
                return Err(err("coefficient is not finite".into()));
            }
            let mut e = [0u32; NVARS];
            for (i, f) in fields[3..].iter().enumerate() {
                e[i] = f.parse().map_err(|_| err(format!("bad exponent `{f}`")))?;
            }
            let poly = cert.phases[phase.index()].poly_mut(fields[1]).ok_or_else(|| err(format!("unknown polynomial `{}`", fields[1])))?;
            poly.add_term(coef, e);
        }
        if !seen_header {
            return Err(Error::Parse { line: 0, msg: "empty certificate".into() });
        }
        for phase in Phase::ALL {
            let pc = &cert.phases[phase.index()];
            for (name, &d) in &pc.degrees {
                let actual = pc.poly(name).degree();
                if actual > d {
                    return Err(Error::Parse {
                        line: 0,
                        msg: format!("{} {name} has degree {actual} above its declared degree {d}", phase.name()),
                    });
                }
            }
        }
        Ok(cert)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER}\n");
        for phase in Phase::ALL {
            let pc = &self.phases[phase.index()];
            for (name, d) in &pc.degrees {
                out.push_str(&format!("degree {} {name} {d}\n", phase.name()));
            }
            for name in POLY_NAMES {
                for (e, c) in pc.poly(name).terms() {
                    out.push_str(&format!("{} {name} {c:e} {} {} {} {} {}\n", phase.name(), e[0], e[1], e[2], e[3], e[4]));
                }
            }
        }
        out
    }
}

/// Robot data needed to state the constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct CertContext {
    pub family: TrajectoryFamily,
    /// Bounding box of the footprint at t = 0.
    pub footprint_box: Aabb,
    /// Workspace X.
    pub workspace: Aabb,
    /// Optional supersets of the brake and stop initial sets; the workspace otherwise.
    pub initial_boxes: [Option<Aabb>; 2],
}

impl CertContext {
    pub fn for_robot(cfg: &RobotConfig) -> Result<Self> {
        if matches!((cfg.family.brake, cfg.family.yaw), (BrakeLaw::SpeedOver { .. }, YawLaw::Direct)) {
            return Err(Error::Config("speed-proportional braking needs bicycle yaw for a polynomial brake field".into()));
        }
        let half = cfg.workspace_half;
        Ok(Self {
            family: cfg.family,
            footprint_box: cfg.footprint.local_polygon().bounding_box(),
            workspace: Aabb::new(crate::geometry::Vec2::new(-half, -half), crate::geometry::Vec2::new(half, half)),
            initial_boxes: [None, None],
        })
    }

    fn omega(&self) -> Polynomial {
        match self.family.yaw {
            YawLaw::Direct => Polynomial::var(K1),
            YawLaw::Bicycle { wheelbase } => (&Polynomial::var(K1) * &Polynomial::var(K2)).scale(1.0 / wheelbase),
        }
    }

    /// Trajectory-producing vector field of a phase as polynomials.
    pub fn field(&self, phase: Phase) -> [Polynomial; 2] {
        let w = self.omega();
        let mv = [&Polynomial::var(K2) - &(&w * &Polynomial::var(X2)), &w * &Polynomial::var(X1)];
        let tp = self.family.tau_plan;
        let since = &Polynomial::var(T) - &Polynomial::constant(tp);
        match phase {
            Phase::Move => mv,
            Phase::Stop => [Polynomial::zero(), Polynomial::zero()],
            Phase::Brake => match (self.family.brake, self.family.yaw) {
                (BrakeLaw::Constant { seconds }, _) => {
                    let s = &Polynomial::constant(1.0) - &since.scale(1.0 / seconds);
                    [&s * &mv[0], &s * &mv[1]]
                }
                (BrakeLaw::SpeedOver { decel }, yaw) => {
                    // s * f with s = 1 - decel (t - tp) / k2; omega / k2 is polynomial.
                    let w_over_k2 = match yaw {
                        YawLaw::Direct => unreachable!("rejected by CertContext::for_robot"),
                        YawLaw::Bicycle { wheelbase } => Polynomial::var(K1).scale(1.0 / wheelbase),
                    };
                    let r = since.scale(decel);
                    let a = &Polynomial::constant(1.0) - &(&w_over_k2 * &Polynomial::var(X2));
                    let b = &w_over_k2 * &Polynomial::var(X1);
                    [&mv[0] - &(&r * &a), &mv[1] - &(&r * &b)]
                }
            },
        }
    }

    /// Hull of T_i over K.
    pub fn time_domain(&self, phase: Phase) -> Interval {
        let tp = self.family.tau_plan;
        match phase {
            Phase::Move => Interval::new(0.0, tp),
            Phase::Brake => Interval::new(tp, tp + self.family.max_brake()),
            Phase::Stop => Interval::new(tp + self.family.min_brake(), self.family.t_f),
        }
    }

    /// t_{0,i} as a polynomial in k.
    fn start_time(&self, phase: Phase) -> Polynomial {
        let tp = self.family.tau_plan;
        match phase {
            Phase::Move => Polynomial::zero(),
            Phase::Brake => Polynomial::constant(tp),
            Phase::Stop => match self.family.brake {
                BrakeLaw::Constant { seconds } => Polynomial::constant(tp + seconds),
                BrakeLaw::SpeedOver { decel } => &Polynomial::constant(tp) + &Polynomial::var(K2).scale(1.0 / decel),
            },
        }
    }

    fn initial_box(&self, phase: Phase) -> Aabb {
        match phase {
            Phase::Move => self.footprint_box,
            Phase::Brake => self.initial_boxes[0].unwrap_or(self.workspace),
            Phase::Stop => self.initial_boxes[1].unwrap_or(self.workspace),
        }
    }

    fn k_box(&self) -> [Interval; 2] {
        let p = &self.family.params;
        [Interval::new(p.lo[0], p.hi[0]), Interval::new(p.lo[1], p.hi[1])]
    }
}

pub type Box5 = [Interval; NVARS];

/// One inequality `poly >= 0` on `domain`.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub phase: Phase,
    pub name: &'static str,
    pub poly: Polynomial,
    pub domain: Box5,
}

pub fn constraints(cert: &PolynomialCertificate, ctx: &CertContext) -> Vec<Constraint> {
    let mut out = Vec::new();
    let [k1, k2] = ctx.k_box();
    let ws = ctx.workspace;
    for phase in Phase::ALL {
        let pc = &cert.phases[phase.index()];
        let f = ctx.field(phase);
        let (lf, lg) = lie_derivatives(&pc.v, &f, &pc.g);
        let full: Box5 = [ctx.time_domain(phase), Interval::new(ws.lo.x, ws.hi.x), Interval::new(ws.lo.y, ws.hi.y), k1, k2];
        let x0 = ctx.initial_box(phase);
        let init_dom: Box5 = [Interval::point(0.0), Interval::new(x0.lo.x, x0.hi.x), Interval::new(x0.lo.y, x0.hi.y), k1, k2];
        let v0 = pc.v.substitute(T, &ctx.start_time(phase));
        let list: [(&'static str, Polynomial, Box5); 7] = [
            ("-(L_f v + q) >= 0", -&(&lf + &pc.q), full),
            ("L_g v + q >= 0", &lg + &pc.q, full),
            ("-L_g v + q >= 0", &pc.q - &lg, full),
            ("q >= 0", pc.q.clone(), full),
            ("-v(t0) >= 0", -&v0, init_dom),
            ("w >= 0", pc.w.clone(), full),
            ("w + v - 1 >= 0", &(&pc.w + &pc.v) - &Polynomial::constant(1.0), full),
        ];
        for (name, poly, domain) in list {
            out.push(Constraint { phase, name, poly, domain });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Accept { leaves: usize },
    Reject { phase: Phase, constraint: String, witness: Vec<[f64; 2]>, value: f64 },
    Undecided { phase: Phase, constraint: String, region: Vec<[f64; 2]> },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Accept { .. } => "ACCEPT",
            Verdict::Reject { .. } => "REJECT",
            Verdict::Undecided { .. } => "UNDECIDED",
        }
    }
}

fn center(b: &Box5) -> [f64; NVARS] {
    std::array::from_fn(|i| b[i].mid())
}

fn split(b: &Box5, domain: &Box5) -> (Box5, Box5) {
    let axis = (0..NVARS)
        .filter(|&i| b[i].width() > 0.0)
        .max_by(|&i, &j| {
            let ri = b[i].width() / domain[i].width().max(1e-300);
            let rj = b[j].width() / domain[j].width().max(1e-300);
            ri.total_cmp(&rj)
        })
        .unwrap_or(0);
    let m = b[axis].mid();
    let mut lo = *b;
    let mut hi = *b;
    lo[axis] = Interval::new(b[axis].lo, m);
    hi[axis] = Interval::new(m, b[axis].hi);
    (lo, hi)
}

fn as_pairs(b: &Box5) -> Vec<[f64; 2]> {
    b.iter().map(|i| [i.lo, i.hi]).collect()
}

struct Node {
    lower: f64,
    depth: usize,
    bx: Box5,
}

impl PartialEq for Node {
    fn eq(&self, o: &Self) -> bool {
        self.lower == o.lower
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Node {
    // Max-heap on the negated lower bound: most doubtful box first.
    fn cmp(&self, o: &Self) -> Ordering {
        o.lower.total_cmp(&self.lower)
    }
}

/// Shrinks a violating box towards a point of minimal value, keeping a violating center.
fn refine_witness(c: &Constraint, mut b: Box5, steps: usize) -> (Box5, f64) {
    let mut val = c.poly.eval(&center(&b));
    for _ in 0..steps {
        let (l, h) = split(&b, &c.domain);
        let (vl, vh) = (c.poly.eval(&center(&l)), c.poly.eval(&center(&h)));
        let (nb, nv) = if vl <= vh { (l, vl) } else { (h, vh) };
        if nv > val && val < 0.0 {
            break;
        }
        b = nb;
        val = nv;
    }
    (b, val)
}

enum Outcome {
    Certified(usize),
    Violated(Box5),
    Exhausted(Box5),
}

fn check_one(c: &Constraint, max_depth: usize) -> Outcome {
    let mut heap = BinaryHeap::new();
    heap.push(Node { lower: c.poly.eval_interval(&c.domain).lo, depth: 0, bx: c.domain });
    let mut leaves = 0;
    while let Some(node) = heap.pop() {
        if node.lower >= 0.0 {
            leaves += 1 + heap.len();
            return Outcome::Certified(leaves);
        }
        let range = c.poly.eval_interval(&node.bx);
        let mid = c.poly.eval(&center(&node.bx));
        if range.hi < 0.0 || mid < 0.0 {
            return Outcome::Violated(node.bx);
        }
        if node.depth >= max_depth {
            return Outcome::Exhausted(node.bx);
        }
        let (a, b) = split(&node.bx, &c.domain);
        for child in [a, b] {
            heap.push(Node { lower: c.poly.eval_interval(&child).lo, depth: node.depth + 1, bx: child });
        }
    }
    Outcome::Certified(leaves)
}

/// Checks every constraint by interval bounding over boxes subdivided up to `box_depth` times.
pub fn check_certificate(cert: &PolynomialCertificate, ctx: &CertContext, box_depth: usize) -> Verdict {
    let mut leaves = 0;
    for c in constraints(cert, ctx) {
        match check_one(&c, box_depth) {
            Outcome::Certified(n) => leaves += n,
            Outcome::Violated(b) => {
                let (w, value) = refine_witness(&c, b, 8 * NVARS);
                return Verdict::Reject { phase: c.phase, constraint: c.name.into(), witness: as_pairs(&w), value };
            }
            Outcome::Exhausted(b) => {
                return Verdict::Undecided { phase: c.phase, constraint: c.name.into(), region: as_pairs(&b) };
            }
        }
    }
    Verdict::Accept { leaves }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub points: usize,
    pub failures: usize,
    pub min_value: f64,
}

/// Evaluates every constraint at `points` random points of its domain.
pub fn spot_check(cert: &PolynomialCertificate, ctx: &CertContext, points: usize, seed: u64) -> SpotCheck {
    let cs = constraints(cert, ctx);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SpotCheck { points, failures: 0, min_value: f64::INFINITY };
    for _ in 0..points {
        let c = &cs[rng.gen_range(0..cs.len())];
        let p: [f64; NVARS] = std::array::from_fn(|i| c.domain[i].lo + c.domain[i].width() * rng.gen::<f64>());
        let v = c.poly.eval(&p);
        if v < -1e-9 {
            report.failures += 1;
        }
        report.min_value = report.min_value.min(v);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> CertContext {
        CertContext::for_robot(&RobotConfig::segway()).unwrap()
    }

    #[test]
    fn trivial_certificate_accepted() {
        let cert = PolynomialCertificate::uniform(Polynomial::zero(), Polynomial::constant(1.0), Polynomial::zero());
        assert!(matches!(check_certificate(&cert, &ctx(), 10), Verdict::Accept { .. }));
        assert_eq!(spot_check(&cert, &ctx(), 10_000, 1).failures, 0);
    }

    #[test]
    fn zero_certificate_rejected_on_w_plus_v() {
        let cert = PolynomialCertificate::uniform(Polynomial::zero(), Polynomial::zero(), Polynomial::zero());
        match check_certificate(&cert, &ctx(), 10) {
            Verdict::Reject { constraint, value, .. } => {
                assert_eq!(constraint, "w + v - 1 >= 0");
                assert!(value < 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dip_in_w_is_located() {
        // Stop-phase w is negative only within 0.316 of (x1, x2) = (0, 1).
        let x1 = Polynomial::var(X1);
        let x2m = &Polynomial::var(X2) - &Polynomial::constant(1.0);
        let w = &(&(&x1 * &x1) + &(&x2m * &x2m)) - &Polynomial::constant(0.1);
        let mut cert = PolynomialCertificate::uniform(Polynomial::zero(), Polynomial::constant(1.0), Polynomial::zero());
        cert.phases[Phase::Stop.index()].w = w.clone();
        match check_certificate(&cert, &ctx(), 40) {
            Verdict::Reject { phase, constraint, witness, value } => {
                assert_eq!((phase, constraint.as_str()), (Phase::Stop, "w >= 0"));
                assert!(value < 0.0);
                let b: Box5 = std::array::from_fn(|i| Interval::new(witness[i][0], witness[i][1]));
                assert!(w.eval(&center(&b)) < 0.0);
                assert!(b[X1].lo <= 0.32 && b[X1].hi >= -0.32 && b[X2].lo <= 1.32 && b[X2].hi >= 0.68);
            }
            other => panic!("expected a rejection, got {other:?}"),
        }
    }

    #[test]
    fn text_round_trip_and_errors() {
        let text = "rtdd-certificate 1\n# trivial\ndegree move w 0\nmove w 1 0 0 0 0 0\nbrake w 1 0 0 0 0 0\nstop w 1 0 0 0 0 0\n";
        let cert = PolynomialCertificate::parse(text).unwrap();
        assert_eq!(PolynomialCertificate::parse(&cert.to_text()).unwrap(), cert);
        assert!(matches!(PolynomialCertificate::parse("nope"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(PolynomialCertificate::parse("rtdd-certificate 1\nmove z 1 0 0 0 0 0"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(PolynomialCertificate::parse("rtdd-certificate 1\nmove w inf 0 0 0 0 0"), Err(Error::Parse { .. })));
        assert!(matches!(PolynomialCertificate::parse("rtdd-certificate 1\ndegree move w 1\nmove w 1 2 0 0 0 0"), Err(Error::Parse { .. })));
    }

    #[test]
    fn brake_fields_match_scaled_move_field() {
        for cfg in [RobotConfig::segway(), RobotConfig::ev()] {
            let c = CertContext::for_robot(&cfg).unwrap();
            let mv = c.field(Phase::Move);
            let br = c.field(Phase::Brake);
            let k = crate::models::TrajParam::new(0.3, 1.7);
            let sched = cfg.family.schedule(k);
            let t = cfg.family.tau_plan + 0.4 * sched.tau_brake;
            let p = [t, 0.7, -0.4, k.k1, k.k2];
            let s = sched.speed_scale(t);
            for j in 0..2 {
                assert!((br[j].eval(&p) - s * mv[j].eval(&p)).abs() < 1e-12);
            }
            let rhs = crate::models::traj_producing_rhs(t, crate::geometry::Vec2::new(0.7, -0.4), k, &cfg.family).unwrap();
            assert!((br[0].eval(&p) - rhs.x).abs() < 1e-12 && (br[1].eval(&p) - rhs.y).abs() < 1e-12);
        }
    }
}
