//! Radical solution branches, discontinuity contours Gamma and Upsilon+,
//! branch-point ordering and labeling, the continuous base path, and the
//! sheet atlas (sign / permutation sequences) defining the Riemann surface.
//!
//! Labels are 0-based indices into the principal solution list: hyperelliptic
//! 0 <-> +1, 1 <-> -1; trigonal 0, 1, 2 <-> the three Cardano branches 1, 2, 3.

use crate::algebra::CurveSpec;
use crate::error::{Error, Result};
use crate::scalar::{c64, C64};
use serde::Serialize;
use std::f64::consts::PI;

/// Square root with arg(result) in [0, pi): the branch jump sits over the
/// contour arg(z) = 0 instead of the negative real axis.
pub fn principal_sqrt(z: C64) -> C64 {
    let a = z.im.atan2(z.re);
    let r = z.norm().sqrt();
    let half = if a >= 0.0 { a / 2.0 } else { a / 2.0 + PI };
    C64::from_polar(r, half)
}

/// Cube root branches q_a, a in {0,1,2}; for a = 0 the argument lies in
/// [0, 2 pi / 3), with the branch jump over arg(z) = 0.
pub fn principal_cbrt(z: C64, a: usize) -> C64 {
    debug_assert!(a < 3);
    let t = z.im.atan2(z.re);
    let r = z.norm().cbrt();
    let base = if t >= 0.0 { t / 3.0 } else { t / 3.0 + 2.0 * PI / 3.0 };
    C64::from_polar(r, base + a as f64 * 2.0 * PI / 3.0)
}

/// y_s(x) = Q(x)/2 + s sqrt(Delta(x)), s = +1 (label 0) or -1 (label 1).
pub fn hyperelliptic_y(curve: &CurveSpec, x: C64, label: usize) -> C64 {
    let s = if label == 0 { 1.0 } else { -1.0 };
    let half_q = 0.5 * curve.q.eval(x);
    half_q + c64(s, 0.0) * principal_sqrt(curve.discriminant.eval(x))
}

/// Cardano branch y_a(x) = q_a + Q(x) / (3 q_a) with
/// q_a = upsilon_+^{1/3} e^{2 a i pi / 3}.
pub fn trigonal_y(curve: &CurveSpec, x: C64, a: usize) -> Result<C64> {
    let p = curve.p.eval(x);
    let q = curve.q.eval(x);
    let delta = curve.discriminant.eval(x);
    let upsilon = 0.5 * (p + principal_sqrt(delta));
    let qa = principal_cbrt(upsilon, a);
    let scale = curve.p.coeff_scale().max(1.0);
    if qa.norm() < 1e-100 * scale {
        return Err(Error::DegenerateCurve(format!(
            "cube-root magnitude underflow at x = {x}; P and Q nearly share a root"
        )));
    }
    Ok(qa + q / (3.0 * qa))
}

/// upsilon_+(x) = (P(x) + sqrt(Delta(x))) / 2, whose arg-zero contour is
/// Upsilon_+.
pub fn upsilon_plus(curve: &CurveSpec, x: C64) -> C64 {
    0.5 * (curve.p.eval(x) + principal_sqrt(curve.discriminant.eval(x)))
}

/// All principal solution branches at x, in label order.
pub fn solutions(curve: &CurveSpec, x: C64) -> Result<Vec<C64>> {
    if curve.family.is_hyperelliptic() {
        Ok(vec![
            hyperelliptic_y(curve, x, 0),
            hyperelliptic_y(curve, x, 1),
        ])
    } else {
        (0..3).map(|a| trigonal_y(curve, x, a)).collect()
    }
}

/// Which contour a label change happened on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CrossingKind {
    Gamma,
    UpsilonPlus,
}

/// A point where the tracked branch switched principal labels.
#[derive(Clone, Debug, Serialize)]
pub struct Crossing {
    /// Parameter along the (full) segment, in [0, 1].
    pub t: f64,
    pub x: C64,
    pub from_label: usize,
    pub to_label: usize,
    pub kind: CrossingKind,
}

/// Labels along one path segment: `labels[k]` holds on the interval between
/// `crossings[k-1]` and `crossings[k]`.
#[derive(Clone, Debug, Serialize)]
pub struct Run {
    pub labels: Vec<usize>,
    pub crossings: Vec<Crossing>,
}

impl Run {
    pub fn constant(label: usize) -> Self {
        Run {
            labels: vec![label],
            crossings: Vec::new(),
        }
    }

    pub fn entry(&self) -> usize {
        self.labels[0]
    }

    pub fn exit(&self) -> usize {
        *self.labels.last().unwrap()
    }

    /// Reverses orientation: labels reversed, parameters mirrored.
    pub fn reversed(&self) -> Run {
        let mut labels: Vec<usize> = self.labels.clone();
        labels.reverse();
        let crossings: Vec<Crossing> = self
            .crossings
            .iter()
            .rev()
            .map(|c| Crossing {
                t: 1.0 - c.t,
                x: c.x,
                from_label: c.to_label,
                to_label: c.from_label,
                kind: c.kind,
            })
            .collect();
        Run { labels, crossings }
    }

    /// Paper-style annotation, e.g. `+1` / `-1` for two sheets and
    /// `1-2-3` for three.
    pub fn annotation(&self, sheet_count: usize) -> String {
        let one = |l: &usize| {
            if sheet_count == 2 {
                if *l == 0 {
                    "+1".to_string()
                } else {
                    "-1".to_string()
                }
            } else {
                format!("{}", l + 1)
            }
        };
        self.labels.iter().map(one).collect::<Vec<_>>().join("-")
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchPoint {
    /// 1-based position in sorted order.
    pub index: usize,
    pub e: C64,
    /// Common y-value of the colliding pair.
    pub h: C64,
    /// Colliding pair of solution labels (0-based); (0, 1) for hyperelliptic
    /// curves where the whole fiber collides.
    pub pair: (usize, usize),
}

/// Endpoint of a base-path leg.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Endpoint {
    /// -infinity along the real direction from the first branch point.
    RayMinus,
    /// Branch point by 0-based index into the sorted list.
    Branch(usize),
    /// +infinity along the real direction from the last branch point.
    RayPlus,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PathSegment {
    pub from: Endpoint,
    pub to: Endpoint,
}

/// Which side the path detours around a branch point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DetourSide {
    Below,
    Above,
}

/// One sheet's lift of the base path.
#[derive(Clone, Debug, Serialize)]
pub struct SheetTrack {
    /// One run per leg: ray-, [e1,e2], ..., [e_{N-1},e_N], ray+.
    pub runs: Vec<Run>,
    /// Tracked branch value arriving at each vertex (before its detour).
    pub v_arrive: Vec<C64>,
    /// Tracked branch value leaving each vertex (after its detour).
    pub v_depart: Vec<C64>,
}

/// The analytically constructed Riemann surface: ordered branch points, the
/// polygonal base path and per-sheet label sequences.
#[derive(Clone, Debug)]
pub struct SheetAtlas {
    pub curve: CurveSpec,
    pub points: Vec<BranchPoint>,
    pub base_path: Vec<PathSegment>,
    pub sheets: Vec<SheetTrack>,
    /// Per-vertex detour radius actually used.
    pub detour: Vec<f64>,
    pub min_pair_dist: f64,
    pub ray_reach: f64,
    /// Sheet index Abel-map paths start from.
    pub base_sheet: usize,
}

impl SheetAtlas {
    pub fn sheet_count(&self) -> usize {
        self.curve.family.sheet_count()
    }

    /// Paper-style sequence strings for one sheet, ray to ray.
    pub fn sequence_annotation(&self, sheet: usize) -> Vec<String> {
        let k = self.sheet_count();
        self.sheets[sheet]
            .runs
            .iter()
            .map(|r| r.annotation(k))
            .collect()
    }

    pub fn x_of(&self, ep: Endpoint) -> C64 {
        match ep {
            Endpoint::Branch(i) => self.points[i].e,
            Endpoint::RayMinus => self.points[0].e - c64(self.ray_reach, 0.0),
            Endpoint::RayPlus => self.points.last().unwrap().e + c64(self.ray_reach, 0.0),
        }
    }

    /// Direction of base-path travel into vertex i.
    pub fn d_in(&self, i: usize) -> C64 {
        if i == 0 {
            c64(1.0, 0.0)
        } else {
            let d = self.points[i].e - self.points[i - 1].e;
            d / d.norm()
        }
    }

    /// Direction of base-path travel out of vertex i.
    pub fn d_out(&self, i: usize) -> C64 {
        if i + 1 == self.points.len() {
            c64(1.0, 0.0)
        } else {
            let d = self.points[i + 1].e - self.points[i].e;
            d / d.norm()
        }
    }
}

/// Value-continuation engine: follows one solution branch along lines and
/// arcs by nearest-neighbour matching with adaptive step halving.
pub struct Tracker<'a> {
    pub curve: &'a CurveSpec,
    scale: f64,
}

const STEP_MARGIN: f64 = 3.0;

impl<'a> Tracker<'a> {
    pub fn new(curve: &'a CurveSpec) -> Self {
        let scale = curve.p.coeff_scale().max(curve.q.coeff_scale()).max(1.0);
        Tracker { curve, scale }
    }

    pub fn sols(&self, x: C64) -> Result<Vec<C64>> {
        solutions(self.curve, x)
    }

    /// Principal label whose branch value at x is nearest to v.
    pub fn label_of(&self, x: C64, v: C64) -> Result<usize> {
        let sols = self.sols(x)?;
        let mut best = (f64::INFINITY, 0usize);
        for (k, &s) in sols.iter().enumerate() {
            let d = (s - v).norm();
            if d < best.0 {
                best = (d, k);
            }
        }
        Ok(best.1)
    }

    /// Matches (x, y) against the solution set; errors when y is not close
    /// to any branch.
    pub fn label_of_strict(&self, x: C64, y: C64, rel_tol: f64) -> Result<usize> {
        let sols = self.sols(x)?;
        let vscale = sols
            .iter()
            .map(|s| s.norm())
            .fold(1e-12 * self.scale, f64::max)
            .max(1.0);
        let k = self.label_of(x, y)?;
        if (sols[k] - y).norm() > rel_tol * vscale {
            return Err(Error::InvalidInput(format!(
                "y = {y} matches no solution branch at x = {x}"
            )));
        }
        Ok(k)
    }

    /// Single continuation step to x_new; None when the matching margin
    /// fails and the step must shrink.
    fn step(&self, x_new: C64, v: C64) -> Result<Option<(C64, usize)>> {
        let sols = self.sols(x_new)?;
        let mut best = (f64::INFINITY, 0usize);
        let mut second = f64::INFINITY;
        for (k, &s) in sols.iter().enumerate() {
            let d = (s - v).norm();
            if d < best.0 {
                second = best.0;
                best = (d, k);
            } else if d < second {
                second = d;
            }
        }
        if best.0 * STEP_MARGIN > second {
            return Ok(None);
        }
        Ok(Some((sols[best.1], best.1)))
    }

    /// Tracks from `v` along the parametrized path `map` over [0, 1].
    /// Returns the final value and label changes (t, from, to).
    pub fn track<F: Fn(f64) -> C64>(
        &self,
        map: F,
        v: C64,
        context: &str,
    ) -> Result<(C64, Vec<(f64, usize, usize)>)> {
        let x0 = map(0.0);
        let mut val = {
            // snap the starting value onto the exact branch at t = 0
            let sols = self.sols(x0)?;
            let mut best = (f64::INFINITY, v);
            for &s in &sols {
                let d = (s - v).norm();
                if d < best.0 {
                    best = (d, s);
                }
            }
            best.1
        };
        let mut label = self.label_of(x0, val)?;
        let mut changes: Vec<(f64, usize, usize)> = Vec::new();
        let mut t = 0.0f64;
        let mut dt = 1.0 / 64.0;
        let dt_min = 1e-12;
        while t < 1.0 {
            let t_new = (t + dt).min(1.0);
            match self.step(map(t_new), val)? {
                None => {
                    dt *= 0.5;
                    if dt < dt_min {
                        return Err(Error::Continuation(format!(
                            "step underflow at t = {t:.6} ({context})"
                        )));
                    }
                }
                Some((v_new, l_new)) => {
                    if l_new != label {
                        let t_star = self.refine_change(&map, t, t_new, val, label)?;
                        changes.push((t_star, label, l_new));
                        label = l_new;
                    }
                    val = v_new;
                    t = t_new;
                    dt = (dt * 1.6).min(1.0 / 32.0);
                }
            }
        }
        Ok((val, changes))
    }

    /// Bisects the label-change parameter inside [t0, t1].
    fn refine_change<F: Fn(f64) -> C64>(
        &self,
        map: &F,
        mut t0: f64,
        mut t1: f64,
        v0: C64,
        label0: usize,
    ) -> Result<f64> {
        let mut v_lo = v0;
        for _ in 0..60 {
            if (t1 - t0) < 1e-14 {
                break;
            }
            let tm = 0.5 * (t0 + t1);
            match self.step(map(tm), v_lo)? {
                None => break,
                Some((vm, lm)) => {
                    if lm == label0 {
                        t0 = tm;
                        v_lo = vm;
                    } else {
                        t1 = tm;
                    }
                }
            }
        }
        Ok(0.5 * (t0 + t1))
    }

    /// Tracks across a circular arc around `center`, from angle th0 to th1.
    pub fn track_arc(
        &self,
        center: C64,
        radius: f64,
        th0: f64,
        th1: f64,
        v: C64,
        context: &str,
    ) -> Result<C64> {
        let map = |t: f64| {
            let th = th0 + (th1 - th0) * t;
            center + C64::from_polar(radius, th)
        };
        let (v_end, _) = self.track(map, v, context)?;
        Ok(v_end)
    }
}

/// Angles for a counter-clockwise (Below) or clockwise (Above) detour from
/// incoming direction d_in to outgoing direction d_out around a vertex.
pub fn detour_angles(d_in: C64, d_out: C64, side: DetourSide) -> (f64, f64) {
    let th_in = (-d_in).im.atan2((-d_in).re);
    let th_out = d_out.im.atan2(d_out.re);
    match side {
        DetourSide::Below => {
            // counter-clockwise: increase angle into (th_in, th_in + 2 pi)
            let mut t1 = th_out;
            while t1 <= th_in + 1e-12 {
                t1 += 2.0 * PI;
            }
            (th_in, t1)
        }
        DetourSide::Above => {
            let mut t1 = th_out;
            while t1 >= th_in - 1e-12 {
                t1 -= 2.0 * PI;
            }
            (th_in, t1)
        }
    }
}

/// Sorts branch x-coordinates by real part, then imaginary part.
pub fn sort_branch_x(mut xs: Vec<C64>) -> Vec<C64> {
    xs.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    xs
}

pub(crate) fn branch_points(curve: &CurveSpec) -> Result<Vec<BranchPoint>> {
    let roots = crate::algebra::poly_roots(&curve.discriminant, 1e-10)?;
    if roots.has_clusters() {
        return Err(Error::DegenerateCurve(
            "discriminant roots cluster; distinct branch points required".into(),
        ));
    }
    let es = sort_branch_x(roots.roots);
    let mut out = Vec::with_capacity(es.len());
    for (k, &e) in es.iter().enumerate() {
        let sols = solutions(curve, e)?;
        let (mut pi, mut pj) = (0usize, 1usize);
        if sols.len() > 2 {
            let mut dist = f64::INFINITY;
            for i in 0..sols.len() {
                for j in (i + 1)..sols.len() {
                    let d = (sols[i] - sols[j]).norm();
                    if d < dist {
                        dist = d;
                        pi = i;
                        pj = j;
                    }
                }
            }
        }
        let h = 0.5 * (sols[pi] + sols[pj]);
        out.push(BranchPoint {
            index: k + 1,
            e,
            h,
            pair: (pi, pj),
        });
    }
    Ok(out)
}

/// Locations (t-parameters) where Im F crosses zero with Re F > 0 along a
/// straight line from a to b; `None` when the line runs along the contour.
fn arg_crossings_line<F: Fn(C64) -> C64>(
    f: &F,
    a: C64,
    b: C64,
    samples: usize,
) -> Option<Vec<f64>> {
    let eval = |t: f64| f(a + (b - a) * t);
    let vals: Vec<C64> = (0..=samples)
        .map(|k| eval(k as f64 / samples as f64))
        .collect();
    let on_contour = vals
        .iter()
        .filter(|v| v.im.abs() < 1e-11 * v.norm().max(1e-300))
        .count();
    if on_contour * 2 > samples {
        return None;
    }
    let mut out = Vec::new();
    for k in 0..samples {
        let (v0, v1) = (vals[k], vals[k + 1]);
        if v0.im == 0.0 {
            continue;
        }
        if v0.im.signum() != v1.im.signum() {
            let (mut t0, mut t1) = (k as f64 / samples as f64, (k + 1) as f64 / samples as f64);
            let s0 = v0.im.signum();
            for _ in 0..80 {
                let tm = 0.5 * (t0 + t1);
                if eval(tm).im.signum() == s0 {
                    t0 = tm;
                } else {
                    t1 = tm;
                }
            }
            let t_star = 0.5 * (t0 + t1);
            if eval(t_star).re > 0.0 {
                out.push(t_star);
            }
        }
    }
    Some(out)
}

/// All arg-detected contour crossings (Gamma, and Upsilon+ for trigonal
/// curves) strictly inside the straight line [a, b]; `None` when on-contour.
pub fn arg_crossings(curve: &CurveSpec, a: C64, b: C64) -> Option<Vec<(f64, CrossingKind)>> {
    let samples = 1024;
    let gamma = arg_crossings_line(&|x| curve.discriminant.eval(x), a, b, samples)?;
    let mut out: Vec<(f64, CrossingKind)> =
        gamma.into_iter().map(|t| (t, CrossingKind::Gamma)).collect();
    if curve.family.is_trigonal() {
        let ups = arg_crossings_line(&|x| upsilon_plus(curve, x), a, b, samples)?;
        out.extend(ups.into_iter().map(|t| (t, CrossingKind::UpsilonPlus)));
    }
    out.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    Some(out)
}

/// Classifies a tracked label change by the nearer contour.
fn classify_crossing(curve: &CurveSpec, x: C64) -> CrossingKind {
    if curve.family.is_hyperelliptic() {
        return CrossingKind::Gamma;
    }
    let d = curve.discriminant.eval(x);
    let u = upsilon_plus(curve, x);
    let rd = d.im.abs() / d.norm().max(1e-300);
    let ru = u.im.abs() / u.norm().max(1e-300);
    if rd <= ru {
        CrossingKind::Gamma
    } else {
        CrossingKind::UpsilonPlus
    }
}

/// Builder for sheet atlases; holds the path geometry shared by all sheets.
struct AtlasBuilder<'a> {
    curve: &'a CurveSpec,
    tracker: Tracker<'a>,
    points: Vec<BranchPoint>,
    min_pair: f64,
    detour: Vec<f64>,
    ray_reach: f64,
}

impl<'a> AtlasBuilder<'a> {
    fn new(curve: &'a CurveSpec) -> Result<Self> {
        let points = branch_points(curve)?;
        if points.len() < 2 {
            return Err(Error::InvalidInput(
                "need at least two finite branch points".into(),
            ));
        }
        let mut min_pair = f64::INFINITY;
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                min_pair = min_pair.min((points[i].e - points[j].e).norm());
            }
        }
        let e_scale = points
            .iter()
            .map(|b| b.e.norm())
            .fold(0.0f64, f64::max)
            .max(1.0);
        let detour = vec![1e-3 * min_pair; points.len()];
        Ok(AtlasBuilder {
            curve,
            tracker: Tracker::new(curve),
            points,
            min_pair,
            detour,
            ray_reach: 1e3 * e_scale,
        })
    }

    fn n(&self) -> usize {
        self.points.len()
    }

    fn d_in(&self, i: usize) -> C64 {
        if i == 0 {
            c64(1.0, 0.0)
        } else {
            let d = self.points[i].e - self.points[i - 1].e;
            d / d.norm()
        }
    }

    fn d_out(&self, i: usize) -> C64 {
        if i + 1 == self.n() {
            c64(1.0, 0.0)
        } else {
            let d = self.points[i + 1].e - self.points[i].e;
            d / d.norm()
        }
    }

    /// Shrinks vertex detour radii below any contour crossing hiding in the
    /// sliver between the vertex and the standoff point, so that segment
    /// entry labels are the true limits toward the vertex.
    fn stabilize_detours(&mut self) -> Result<()> {
        let floor = 1e-9 * self.min_pair;
        for i in 0..self.n() {
            for dir in [-self.d_in(i), self.d_out(i)] {
                for _ in 0..4 {
                    let r = self.detour[i];
                    match self.sliver_crossing(self.points[i].e, dir, floor, r) {
                        None => break,
                        Some(s) => {
                            self.detour[i] = (s / 4.0).max(floor);
                            if self.detour[i] <= floor * 1.001 {
                                return Err(Error::Continuation(format!(
                                    "contour crossings accumulate at branch point {}",
                                    i + 1
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Smallest offset s in (s_lo, s_hi] where a contour crosses the ray
    /// e + s * dir transversally.
    fn sliver_crossing(&self, e: C64, dir: C64, s_lo: f64, s_hi: f64) -> Option<f64> {
        let grid = 32usize;
        let mut found: Option<f64> = None;
        let n_f = if self.curve.family.is_trigonal() { 2 } else { 1 };
        for which in 0..n_f {
            let f = |x: C64| -> C64 {
                if which == 0 {
                    self.curve.discriminant.eval(x)
                } else {
                    upsilon_plus(self.curve, x)
                }
            };
            let sval = |k: usize| s_lo * (s_hi / s_lo).powf(k as f64 / grid as f64);
            let mut prev = f(e + dir * sval(0));
            let mut on_contour = 0usize;
            for k in 1..=grid {
                let cur = f(e + dir * sval(k));
                if cur.im.abs() < 1e-11 * cur.norm().max(1e-300) {
                    on_contour += 1;
                    prev = cur;
                    continue;
                }
                if prev.im != 0.0 && prev.im.signum() != cur.im.signum() {
                    let (mut a, mut b) = (sval(k - 1), sval(k));
                    let s0 = prev.im.signum();
                    for _ in 0..60 {
                        let m = 0.5 * (a + b);
                        if f(e + dir * m).im.signum() == s0 {
                            a = m;
                        } else {
                            b = m;
                        }
                    }
                    let s_star = 0.5 * (a + b);
                    if f(e + dir * s_star).re > 0.0 && (on_contour * 2) <= grid {
                        found = Some(found.map_or(s_star, |x: f64| x.min(s_star)));
                    }
                }
                prev = cur;
            }
        }
        found
    }

    /// Log-spaced parametrization of a ray from the standoff at `vertex`
    /// outward to the reach; t = 0 at the standoff.
    fn ray_map(&self, vertex: usize, outward: C64) -> impl Fn(f64) -> C64 + '_ {
        let e = self.points[vertex].e;
        let r0 = self.detour[vertex];
        let r1 = self.ray_reach;
        move |t: f64| e + outward * (r0 * (r1 / r0).powf(t))
    }

    /// Tracks one sheet along the full base path.
    fn track_sheet(&self, sheet: usize) -> Result<SheetTrack> {
        let n = self.n();
        let t = &self.tracker;
        let far_left = self.points[0].e - c64(self.ray_reach, 0.0);
        let start_sols = t.sols(far_left)?;
        if sheet >= start_sols.len() {
            return Err(Error::InvalidInput("sheet index out of range".into()));
        }
        let mut runs: Vec<Run> = Vec::with_capacity(n + 1);
        let mut v_arrive = vec![c64(0.0, 0.0); n];
        let mut v_depart = vec![c64(0.0, 0.0); n];

        // leg 0: ray tracked inward, far left -> first standoff
        let map0 = self.ray_map(0, c64(-1.0, 0.0));
        let inward = |tt: f64| map0(1.0 - tt);
        let (v_at_standoff, changes) = t.track(&inward, start_sols[sheet], "ray- tracking")?;
        runs.push(self.run_from_changes(
            far_left,
            self.points[0].e,
            start_sols[sheet],
            &changes,
            &inward,
        )?);
        v_arrive[0] = v_at_standoff;

        let mut v = v_at_standoff;
        for i in 0..n {
            let (th0, th1) = detour_angles(self.d_in(i), self.d_out(i), DetourSide::Below);
            v = t.track_arc(
                self.points[i].e,
                self.detour[i],
                th0,
                th1,
                v,
                &format!("detour at branch point {}", i + 1),
            )?;
            v_depart[i] = v;
            if i + 1 < n {
                let a = self.points[i].e + self.d_out(i) * self.detour[i];
                let b = self.points[i + 1].e - self.d_in(i + 1) * self.detour[i + 1];
                let leg = |tt: f64| a + (b - a) * tt;
                let (v_end, changes) =
                    t.track(&leg, v, &format!("segment {} -> {}", i + 1, i + 2))?;
                runs.push(self.run_from_changes(
                    self.points[i].e,
                    self.points[i + 1].e,
                    v,
                    &changes,
                    &leg,
                )?);
                v = v_end;
                v_arrive[i + 1] = v;
            } else {
                let map = self.ray_map(i, c64(1.0, 0.0));
                let (_, changes) = t.track(&map, v, "ray+ tracking")?;
                runs.push(self.run_from_changes(
                    self.points[i].e,
                    self.points[i].e + c64(self.ray_reach, 0.0),
                    v,
                    &changes,
                    &map,
                )?);
            }
        }
        Ok(SheetTrack {
            runs,
            v_arrive,
            v_depart,
        })
    }

    /// Builds a Run from tracked changes on a leg; the leg parametrization
    /// `map` is re-expressed as the fractional position between `seg_a` and
    /// `seg_b` (the untrimmed segment endpoints).
    fn run_from_changes<F: Fn(f64) -> C64>(
        &self,
        seg_a: C64,
        seg_b: C64,
        v_start: C64,
        changes: &[(f64, usize, usize)],
        map: &F,
    ) -> Result<Run> {
        let t = &self.tracker;
        let start_label = t.label_of(map(0.0), v_start)?;
        let mut labels = vec![start_label];
        let mut crossings = Vec::new();
        let len = (seg_b - seg_a).norm();
        for &(tt, from, to) in changes {
            let x = map(tt);
            let t_seg = ((x - seg_a).norm() / len).clamp(0.0, 1.0);
            crossings.push(Crossing {
                t: t_seg,
                x,
                from_label: from,
                to_label: to,
                kind: classify_crossing(self.curve, x),
            });
            labels.push(to);
        }
        Ok(Run { labels, crossings })
    }
}

/// Cross-checks tracked crossings against the analytic arg-crossing rule on
/// every interior segment, and validates per-segment label partitions.
fn cross_check(atlas: &SheetAtlas) -> Result<()> {
    let n = atlas.points.len();
    for seg in 1..n {
        let a = atlas.points[seg - 1].e;
        let b = atlas.points[seg].e;
        let Some(detected) = arg_crossings(&atlas.curve, a, b) else {
            continue; // segment runs along a contour
        };
        let mut tracked: Vec<f64> = Vec::new();
        for sh in &atlas.sheets {
            for c in &sh.runs[seg].crossings {
                tracked.push(c.t);
            }
        }
        tracked.sort_by(|x, y| x.partial_cmp(y).unwrap());
        tracked.dedup_by(|x, y| (*x - *y).abs() < 1e-5);
        let len = (b - a).norm();
        let standoff_lo = 2.0 * atlas.detour[seg - 1] / len;
        let standoff_hi = 1.0 - 2.0 * atlas.detour[seg] / len;
        let relevant: Vec<f64> = detected
            .iter()
            .map(|&(t, _)| t)
            .filter(|&t| t > standoff_lo && t < standoff_hi)
            .collect();
        for &t in &tracked {
            if t <= standoff_lo || t >= standoff_hi {
                continue;
            }
            if !relevant.iter().any(|&d| (d - t).abs() < 1e-4) {
                return Err(Error::Continuation(format!(
                    "segment {seg}: tracked label change at t = {t:.6} has no arg-rule crossing"
                )));
            }
        }
        for &d in &relevant {
            if !tracked.iter().any(|&t| (d - t).abs() < 1e-4) {
                return Err(Error::Continuation(format!(
                    "segment {seg}: arg-rule crossing at t = {d:.6} not seen by the tracker"
                )));
            }
        }
    }
    let k = atlas.sheet_count();
    for seg in 0..atlas.sheets[0].runs.len() {
        let entry: Vec<usize> = (0..k).map(|m| atlas.sheets[m].runs[seg].entry()).collect();
        let mut sorted = entry.clone();
        sorted.sort_unstable();
        if sorted != (0..k).collect::<Vec<_>>() {
            return Err(Error::Continuation(format!(
                "segment {seg}: sheet labels {entry:?} do not partition the fiber"
            )));
        }
    }
    Ok(())
}

/// Constructs the sheet atlas of a canonical curve: sorted branch points,
/// base polygonal path, and the per-sheet label sequences.
pub fn build_atlas(curve: &CurveSpec) -> Result<SheetAtlas> {
    let mut builder = AtlasBuilder::new(curve)?;
    builder.stabilize_detours()?;
    let k = curve.family.sheet_count();
    let sheets: Vec<SheetTrack> = (0..k)
        .map(|m| builder.track_sheet(m))
        .collect::<Result<_>>()?;
    let n = builder.n();
    let mut base_path = vec![PathSegment {
        from: Endpoint::RayMinus,
        to: Endpoint::Branch(0),
    }];
    for i in 0..n - 1 {
        base_path.push(PathSegment {
            from: Endpoint::Branch(i),
            to: Endpoint::Branch(i + 1),
        });
    }
    base_path.push(PathSegment {
        from: Endpoint::Branch(n - 1),
        to: Endpoint::RayPlus,
    });
    let atlas = SheetAtlas {
        curve: curve.clone(),
        points: builder.points,
        base_path,
        sheets,
        detour: builder.detour,
        min_pair_dist: builder.min_pair,
        ray_reach: builder.ray_reach,
        base_sheet: 0,
    };
    cross_check(&atlas)?;
    Ok(atlas)
}

/// Continues a branch value arriving at vertex `i` around a detour onto a
/// new outgoing direction; used for chords leaving the base path.
pub fn depart_vertex(
    atlas: &SheetAtlas,
    value_at_arrival: C64,
    vertex: usize,
    d_out_new: C64,
    side: DetourSide,
) -> Result<C64> {
    let tracker = Tracker::new(&atlas.curve);
    let (th0, th1) = detour_angles(atlas.d_in(vertex), d_out_new, side);
    tracker.track_arc(
        atlas.points[vertex].e,
        atlas.detour[vertex],
        th0,
        th1,
        value_at_arrival,
        "chord departure",
    )
}

/// Tracks a straight chord from the standoff at `vertex` toward `target`,
/// starting with branch value `v` (already placed just off the vertex in the
/// chord direction). Returns the run over the full chord [e_vertex, target]
/// and the final branch value at `target`.
pub fn track_chord(atlas: &SheetAtlas, vertex: usize, v: C64, target: C64) -> Result<(Run, C64)> {
    let tracker = Tracker::new(&atlas.curve);
    let e = atlas.points[vertex].e;
    let dir = target - e;
    let len = dir.norm();
    if len < 10.0 * atlas.detour[vertex] {
        return Err(Error::InvalidInput(
            "chord target too close to the anchor branch point".into(),
        ));
    }
    let d = dir / len;
    let a = e + d * atlas.detour[vertex];
    let leg = |t: f64| a + (target - a) * t;
    let (v_end, changes) = tracker.track(&leg, v, "chord")?;
    let mut labels = vec![tracker.label_of(a, v)?];
    let mut crossings = Vec::new();
    for &(tt, from, to) in &changes {
        let x = leg(tt);
        crossings.push(Crossing {
            t: ((x - e).norm() / len).clamp(0.0, 1.0),
            x,
            from_label: from,
            to_label: to,
            kind: classify_crossing(&atlas.curve, x),
        });
        labels.push(to);
    }
    Ok((Run { labels, crossings }, v_end))
}

/// Identification result: which sheet a point lies on.
#[derive(Clone, Debug, Serialize)]
pub struct SheetId {
    pub sheet: usize,
    pub label_at_point: usize,
    /// 0-based index of the anchor branch point used.
    pub anchor: usize,
}

/// Identifies the sheet carrying the point (x, y): finds a nearby anchor
/// whose chord keeps the tracked label constant, then matches each sheet's
/// continuation onto the chord.
pub fn identify_sheet(atlas: &SheetAtlas, x: C64, y: C64) -> Result<SheetId> {
    let tracker = Tracker::new(&atlas.curve);
    let label_at_point = tracker.label_of_strict(x, y, 1e-6)?;
    let sols = tracker.sols(x)?;
    let vscale = sols.iter().map(|s| s.norm()).fold(1.0, f64::max);
    let mut order: Vec<usize> = (0..atlas.points.len()).collect();
    order.sort_by(|&i, &j| {
        (atlas.points[i].e - x)
            .norm()
            .partial_cmp(&(atlas.points[j].e - x).norm())
            .unwrap()
    });
    for &anchor in order.iter().take(3) {
        if (atlas.points[anchor].e - x).norm() < 10.0 * atlas.detour[anchor] {
            continue;
        }
        let d = (x - atlas.points[anchor].e) / (x - atlas.points[anchor].e).norm();
        let mut chord_ok = true;
        for sheet in 0..atlas.sheet_count() {
            let arrive = atlas.sheets[sheet].v_arrive[anchor];
            let v0 = depart_vertex(atlas, arrive, anchor, d, DetourSide::Below)?;
            let (run, v_end) = track_chord(atlas, anchor, v0, x)?;
            if run.labels.len() != 1 {
                chord_ok = false;
                break;
            }
            if (v_end - y).norm() < 1e-6 * vscale {
                return Ok(SheetId {
                    sheet,
                    label_at_point,
                    anchor,
                });
            }
        }
        if !chord_ok {
            continue;
        }
    }
    Err(Error::Continuation(format!(
        "no anchor among the nearest branch points reaches ({x}, {y}) with a label-constant chord"
    )))
}

/// Sampled polyline of a contour inside a rectangular window.
#[derive(Clone, Debug, Serialize)]
pub struct Polyline {
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ContourKind {
    Gamma,
    UpsilonPlus,
}

/// Marching-squares extraction of {x : arg F(x) = 0} on the window
/// [re0, re1] x [im0, im1] with `resolution` cells per axis.
pub fn contour_samples(
    curve: &CurveSpec,
    which: ContourKind,
    window: (f64, f64, f64, f64),
    resolution: usize,
) -> Vec<Polyline> {
    let f = |x: C64| -> C64 {
        match which {
            ContourKind::Gamma => curve.discriminant.eval(x),
            ContourKind::UpsilonPlus => upsilon_plus(curve, x),
        }
    };
    let (re0, re1, im0, im1) = window;
    let n = resolution.max(8);
    let dx = (re1 - re0) / n as f64;
    let dy = (im1 - im0) / n as f64;
    let grid: Vec<Vec<C64>> = (0..=n)
        .map(|i| {
            (0..=n)
                .map(|j| f(c64(re0 + dx * i as f64, im0 + dy * j as f64)))
                .collect()
        })
        .collect();
    let mut segments: Vec<((f64, f64), (f64, f64))> = Vec::new();
    let interp = |va: C64, vb: C64, pa: (f64, f64), pb: (f64, f64)| -> Option<(f64, f64)> {
        let (ia, ib) = (va.im, vb.im);
        if ia == 0.0 || ia.signum() == ib.signum() {
            return None;
        }
        let t = ia / (ia - ib);
        Some((pa.0 + t * (pb.0 - pa.0), pa.1 + t * (pb.1 - pa.1)))
    };
    for i in 0..n {
        for j in 0..n {
            let p00 = (re0 + dx * i as f64, im0 + dy * j as f64);
            let p10 = (p00.0 + dx, p00.1);
            let p01 = (p00.0, p00.1 + dy);
            let p11 = (p00.0 + dx, p00.1 + dy);
            let (v00, v10, v01, v11) =
                (grid[i][j], grid[i + 1][j], grid[i][j + 1], grid[i + 1][j + 1]);
            let mut hits: Vec<(f64, f64)> = Vec::new();
            for (va, vb, pa, pb) in [
                (v00, v10, p00, p10),
                (v10, v11, p10, p11),
                (v11, v01, p11, p01),
                (v01, v00, p01, p00),
            ] {
                if let Some(pt) = interp(va, vb, pa, pb) {
                    hits.push(pt);
                }
            }
            if hits.len() == 2 {
                let mid = f(c64(
                    0.5 * (hits[0].0 + hits[1].0),
                    0.5 * (hits[0].1 + hits[1].1),
                ));
                if mid.re > 0.0 {
                    segments.push((hits[0], hits[1]));
                }
            } else if hits.len() == 4 {
                for pair in [(0usize, 1usize), (2, 3)] {
                    let (h0, h1) = (hits[pair.0], hits[pair.1]);
                    let mid = f(c64(0.5 * (h0.0 + h1.0), 0.5 * (h0.1 + h1.1)));
                    if mid.re > 0.0 {
                        segments.push((h0, h1));
                    }
                }
            }
        }
    }
    chain_segments(segments, dx.hypot(dy))
}

/// Chains a segment soup into polylines by snapping endpoints.
fn chain_segments(segments: Vec<((f64, f64), (f64, f64))>, cell: f64) -> Vec<Polyline> {
    use std::collections::HashMap;
    let snap = cell * 1e-6;
    let key = |p: (f64, f64)| -> (i64, i64) { ((p.0 / snap).round() as i64, (p.1 / snap).round() as i64) };
    let mut adj: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (idx, seg) in segments.iter().enumerate() {
        adj.entry(key(seg.0)).or_default().push(idx);
        adj.entry(key(seg.1)).or_default().push(idx);
    }
    let mut used = vec![false; segments.len()];
    let mut out: Vec<Polyline> = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let mut line = vec![segments[start].0, segments[start].1];
        for end in 0..2 {
            loop {
                let tip = if end == 0 {
                    *line.last().unwrap()
                } else {
                    line[0]
                };
                let mut found = None;
                if let Some(cands) = adj.get(&key(tip)) {
                    for &c in cands {
                        if !used[c] {
                            found = Some(c);
                            break;
                        }
                    }
                }
                let Some(c) = found else { break };
                used[c] = true;
                let (a, b) = segments[c];
                let next = if dist2(a, tip) < dist2(b, tip) { b } else { a };
                if end == 0 {
                    line.push(next);
                } else {
                    line.insert(0, next);
                }
            }
        }
        out.push(Polyline { points: line });
    }
    out.sort_by(|a, b| {
        a.points[0]
            .partial_cmp(&b.points[0])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    out
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{CurveFamily, Poly};

    #[test]
    fn sqrt_branch_examples() {
        assert!((principal_sqrt(c64(4.0, 0.0)) - c64(2.0, 0.0)).norm() < 1e-15);
        // arg(-1) = pi >= 0 -> i
        assert!((principal_sqrt(c64(-1.0, 0.0)) - c64(0.0, 1.0)).norm() < 1e-15);
        // arg(-i) = -pi/2 < 0 -> e^{3 i pi / 4}
        let expect = C64::from_polar(1.0, 3.0 * PI / 4.0);
        assert!((principal_sqrt(c64(0.0, -1.0)) - expect).norm() < 1e-15);
        for k in 0..100 {
            let z = C64::from_polar(2.0, -PI + 2.0 * PI * (k as f64 + 0.5) / 100.0);
            let w = principal_sqrt(z);
            let a = w.im.atan2(w.re);
            assert!((0.0..PI).contains(&a), "arg {a} out of range");
            assert!((w * w - z).norm() < 1e-12);
        }
    }

    #[test]
    fn cbrt_branch_examples() {
        assert!((principal_cbrt(c64(8.0, 0.0), 0) - c64(2.0, 0.0)).norm() < 1e-14);
        let expect = C64::from_polar(2.0, PI / 3.0);
        assert!((principal_cbrt(c64(-8.0, 0.0), 0) - expect).norm() < 1e-14);
        // arg(-8i) = -pi/2 < 0 -> 2 e^{-i pi/6 + 2 i pi/3} = 2i
        assert!((principal_cbrt(c64(0.0, -8.0), 0) - c64(0.0, 2.0)).norm() < 1e-14);
        for k in 0..60 {
            let z = C64::from_polar(5.0, -PI + 2.0 * PI * (k as f64 + 0.5) / 60.0);
            for a in 0..3 {
                let w = principal_cbrt(z, a);
                assert!((w * w * w - z).norm() < 1e-12);
            }
            let w0 = principal_cbrt(z, 0);
            let arg = w0.im.atan2(w0.re);
            assert!((0.0..2.0 * PI / 3.0).contains(&arg));
        }
    }

    fn example2_curve() -> CurveSpec {
        let es: Vec<C64> = [-18.0, -15.0, -11.0, -5.0, 1.0, 2.0, 7.0, 12.0, 16.0]
            .iter()
            .map(|&r| c64(r, 0.0))
            .collect();
        CurveSpec::hyperelliptic_from_branch_points(&es, None).unwrap()
    }

    fn example3_curve() -> CurveSpec {
        let p = Poly::from_real(&[9.0, 16.0, 7.0, 3.0, 1.0]);
        let q = Poly::from_real(&[11.0, 5.0, 4.0]);
        CurveSpec::new(CurveFamily::Trigonal33m1, p, q, None).unwrap()
    }

    #[test]
    fn residuals_on_random_points_hyperelliptic() {
        let curve = example2_curve();
        let scale = curve.p.coeff_scale();
        for k in 0..1000 {
            let x = c64(
                ((k as f64) * 0.137).sin() * 25.0,
                ((k as f64) * 0.291).cos() * 10.0,
            );
            for label in 0..2 {
                let y = hyperelliptic_y(&curve, x, label);
                let local = scale.max(y.norm() * y.norm());
                assert!(curve.f(x, y).norm() < 1e-9 * local.max(1.0));
            }
        }
    }

    #[test]
    fn residuals_on_random_points_trigonal() {
        let curve = example3_curve();
        for k in 0..1000 {
            let x = c64(
                ((k as f64) * 0.113).sin() * 6.0,
                ((k as f64) * 0.377).cos() * 6.0,
            );
            let sols = solutions(&curve, x).unwrap();
            let mut sum = c64(0.0, 0.0);
            for &y in &sols {
                let local = (1.0 + y.norm().powi(3)).max(curve.p.coeff_scale());
                assert!(curve.f(x, y).norm() < 1e-9 * local);
                sum += y;
            }
            // canonical trigonal: the y^2 coefficient vanishes
            assert!(sum.norm() < 1e-9 * (1.0 + sols[0].norm()));
        }
    }

    #[test]
    fn example3_branch_table() {
        let curve = example3_curve();
        let pts = branch_points(&curve).unwrap();
        assert_eq!(pts.len(), 8);
        let expect: [(f64, f64, f64, f64, (usize, usize)); 8] = [
            (-4.58931, 0.0, -4.9092, 0.0, (1, 2)),
            (-1.17922, -0.934455, 1.60505, 0.430221, (0, 2)),
            (-1.17922, 0.934455, 1.60505, -0.430221, (0, 2)),
            (-0.431732, -2.20256, 0.309255, -1.83532, (1, 2)),
            (-0.431732, 2.20256, 0.309255, 1.83532, (0, 1)),
            (0.499118, -1.57527, -1.80047, 1.31135, (0, 1)),
            (0.499118, 1.57527, -1.80047, -1.31135, (1, 2)),
            (0.812986, 0.0, -2.42959, 0.0, (1, 2)),
        ];
        for (bp, ex) in pts.iter().zip(expect.iter()) {
            assert!((bp.e - c64(ex.0, ex.1)).norm() < 1e-4, "e{}", bp.index);
            assert!((bp.h - c64(ex.2, ex.3)).norm() < 1e-4, "h{}", bp.index);
            assert_eq!(bp.pair, ex.4, "pair at {}", bp.index);
        }
    }

    #[test]
    fn example2_sign_sequence() {
        let curve = example2_curve();
        let atlas = build_atlas(&curve).unwrap();
        let seq = atlas.sequence_annotation(0);
        let expect = ["+1", "-1", "-1", "+1", "+1", "-1", "-1", "+1", "+1", "-1"];
        assert_eq!(seq, expect);
        let seq_b = atlas.sequence_annotation(1);
        let expect_b = ["-1", "+1", "+1", "-1", "-1", "+1", "+1", "-1", "-1", "+1"];
        assert_eq!(seq_b, expect_b);
    }

    #[test]
    fn example1_sign_sequence() {
        let es = [
            c64(-18.0, -2.0),
            c64(-16.0, 5.0),
            c64(-11.0, 3.0),
            c64(-10.0, -1.0),
            c64(-4.0, 2.0),
            c64(-3.0, 3.0),
            c64(3.0, 3.0),
            c64(7.0, -2.0),
            c64(13.0, -1.0),
        ];
        let curve = CurveSpec::hyperelliptic_from_branch_points(&es, None).unwrap();
        let atlas = build_atlas(&curve).unwrap();
        let seq = atlas.sequence_annotation(0);
        let expect = ["+1", "-1", "-1", "-1", "+1", "-1", "-1", "-1", "+1", "+1"];
        assert_eq!(seq, expect);
    }

    #[test]
    fn example3_sheet_sequences() {
        let curve = example3_curve();
        let atlas = build_atlas(&curve).unwrap();
        let a = atlas.sequence_annotation(0);
        let b = atlas.sequence_annotation(1);
        let c = atlas.sequence_annotation(2);
        assert_eq!(a, ["1", "1", "3", "3-1", "1-2-3", "3-2", "1-2", "2", "3"]);
        assert_eq!(b, ["2", "2", "2", "2-3", "2-3-1", "1-3", "3-1", "1", "1"]);
        assert_eq!(c, ["3", "3", "1", "1-2", "3-1-2", "2-1", "2-3", "3", "2"]);
    }

    #[test]
    fn contours_empty_window() {
        let curve = example2_curve();
        let lines = contour_samples(&curve, ContourKind::Gamma, (100.0, 101.0, 5.0, 6.0), 32);
        assert!(lines.is_empty());
    }
}
