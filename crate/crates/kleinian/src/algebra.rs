//! Complex polynomial arithmetic, root finding, curve-form normalization,
//! discriminants, Sato-weight monomial orders and gap sequences.

use crate::error::{Error, Result};
use crate::scalar::{c64, C64};
use serde::{Deserialize, Serialize};

/// Dense univariate polynomial over C, coefficients ascending by degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    pub coeffs: Vec<C64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<C64>) -> Self {
        while coeffs.len() > 1 && coeffs.last().map_or(false, |c| c.norm() == 0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(c64(0.0, 0.0));
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self::new(vec![])
    }

    pub fn constant(c: C64) -> Self {
        Self::new(vec![c])
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&r| c64(r, 0.0)).collect())
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[C64]) -> Self {
        let mut p = Self::constant(c64(1.0, 0.0));
        for &r in roots {
            p = p.mul(&Self::new(vec![-r, c64(1.0, 0.0)]));
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.norm() == 0.0)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> C64 {
        *self.coeffs.last().unwrap()
    }

    /// Coefficient of x^k (zero beyond the stored degree).
    pub fn coeff(&self, k: usize) -> C64 {
        self.coeffs.get(k).copied().unwrap_or_else(|| c64(0.0, 0.0))
    }

    pub fn eval(&self, x: C64) -> C64 {
        let mut acc = c64(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// Evaluates p and p' in one Horner pass.
    pub fn eval_with_derivative(&self, x: C64) -> (C64, C64) {
        let mut p = c64(0.0, 0.0);
        let mut dp = c64(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dp = dp * x + p;
            p = p * x + c;
        }
        (p, dp)
    }

    pub fn derivative(&self) -> Poly {
        if self.degree() == 0 {
            return Poly::zero();
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * c64(k as f64, 0.0))
                .collect(),
        )
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) - other.coeff(k)).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![c64(0.0, 0.0); self.degree() + other.degree() + 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn scale(&self, s: C64) -> Poly {
        Poly::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// Largest coefficient magnitude; used to scale residual tolerances.
    pub fn coeff_scale(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Cluster radius factor under which two roots are declared coincident.
pub const ROOT_CLUSTER_FACTOR: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct RootSet {
    pub roots: Vec<C64>,
    /// True at index i when root i lies within the cluster radius of another.
    pub clustered: Vec<bool>,
}

impl RootSet {
    pub fn has_clusters(&self) -> bool {
        self.clustered.iter().any(|&b| b)
    }
}

/// All complex roots by simultaneous Aberth--Ehrlich iteration with Newton
/// polishing. Initial guesses sit on a scaled circle.
pub fn poly_roots(p: &Poly, tol: f64) -> Result<RootSet> {
    if p.degree() < 1 {
        return Err(Error::InvalidInput("root finding needs degree >= 1".into()));
    }
    let n = p.degree();
    let lead = p.leading();
    let monic = Poly::new(p.coeffs.iter().map(|&c| c / lead).collect());

    // root radius estimate (Fujiwara bound mixed with a geometric mean)
    let fuji = monic
        .coeffs
        .iter()
        .take(n)
        .enumerate()
        .map(|(k, c)| 2.0 * c.norm().powf(1.0 / (n - k) as f64))
        .fold(0.0, f64::max)
        .max(1e-12);
    let tail = monic.coeffs[0].norm().powf(1.0 / n as f64);
    let radius = 0.5 * (fuji + tail.max(1e-12));

    let mut z: Vec<C64> = (0..n)
        .map(|k| {
            let ang = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64 + 0.4;
            c64(radius * ang.cos(), radius * ang.sin())
        })
        .collect();

    let max_iter = 300;
    let mut converged = false;
    for _ in 0..max_iter {
        let mut shift = 0.0f64;
        let snapshot = z.clone();
        for i in 0..n {
            let (pv, dv) = monic.eval_with_derivative(snapshot[i]);
            if pv.norm() == 0.0 {
                continue;
            }
            let newton = if dv.norm() > 0.0 { pv / dv } else { pv };
            let mut rep = c64(0.0, 0.0);
            for (j, &zj) in snapshot.iter().enumerate() {
                if j != i {
                    let d = snapshot[i] - zj;
                    if d.norm() > 1e-300 {
                        rep += c64(1.0, 0.0) / d;
                    }
                }
            }
            let denom = c64(1.0, 0.0) - newton * rep;
            let step = if denom.norm() > 1e-14 {
                newton / denom
            } else {
                newton
            };
            z[i] -= step;
            shift = shift.max(step.norm() / (1.0 + z[i].norm()));
        }
        if shift < 1e-15 {
            converged = true;
            break;
        }
    }
    // Newton polish on the original polynomial
    for zi in z.iter_mut() {
        for _ in 0..4 {
            let (pv, dv) = p.eval_with_derivative(*zi);
            if dv.norm() == 0.0 {
                break;
            }
            *zi -= pv / dv;
        }
    }

    let scale = p.coeff_scale().max(1e-300);
    let residual_ok = z.iter().all(|&r| {
        let local = (0..=n).map(|k| p.coeff(k).norm() * r.norm().powi(k as i32)).sum::<f64>();
        p.eval(r).norm() <= tol * local.max(scale)
    });
    if !converged && !residual_ok {
        return Err(Error::Numerics(format!(
            "root finding did not converge for degree {n} polynomial"
        )));
    }

    let cluster_radius = ROOT_CLUSTER_FACTOR * (1.0 + radius);
    let mut clustered = vec![false; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if (z[i] - z[j]).norm() < cluster_radius {
                clustered[i] = true;
                clustered[j] = true;
            }
        }
    }
    Ok(RootSet { roots: z, clustered })
}

/// Curve families supported by the pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveFamily {
    HyperellipticCanonical,
    HyperellipticGeneric,
    /// (3, 3m+1)-curve, canonical form
    Trigonal33m1,
    /// (3, 3m+2)-curve, canonical form
    Trigonal33m2,
    TrigonalGeneric,
}

impl CurveFamily {
    pub fn is_hyperelliptic(self) -> bool {
        matches!(
            self,
            CurveFamily::HyperellipticCanonical | CurveFamily::HyperellipticGeneric
        )
    }

    pub fn is_trigonal(self) -> bool {
        !self.is_hyperelliptic()
    }

    pub fn sheet_count(self) -> usize {
        if self.is_hyperelliptic() {
            2
        } else {
            3
        }
    }
}

/// A validated plane-curve model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveSpec {
    pub family: CurveFamily,
    pub p: Poly,
    pub q: Poly,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Poly>,
    pub genus: usize,
    pub gaps: Vec<usize>,
    pub discriminant: Poly,
}

impl CurveSpec {
    /// Builds and validates a curve from defining polynomials.
    pub fn new(family: CurveFamily, p: Poly, q: Poly, t: Option<Poly>) -> Result<CurveSpec> {
        match family {
            CurveFamily::HyperellipticCanonical | CurveFamily::HyperellipticGeneric => {
                Self::new_hyperelliptic(family, p, q)
            }
            CurveFamily::Trigonal33m1 | CurveFamily::Trigonal33m2 | CurveFamily::TrigonalGeneric => {
                Self::new_trigonal(family, p, q, t)
            }
        }
    }

    fn new_hyperelliptic(family: CurveFamily, p: Poly, q: Poly) -> Result<CurveSpec> {
        if family == CurveFamily::HyperellipticCanonical && !q.is_zero() {
            return Err(Error::InvalidInput(
                "canonical hyperelliptic curve must have Q = 0".into(),
            ));
        }
        let dp = p.degree();
        if dp < 3 {
            return Err(Error::InvalidInput(format!(
                "deg P = {dp} too small for a positive-genus hyperelliptic curve"
            )));
        }
        let genus = if dp % 2 == 1 { (dp - 1) / 2 } else { (dp - 2) / 2 };
        if !q.is_zero() && q.degree() > genus {
            return Err(Error::InvalidInput(format!(
                "deg Q = {} exceeds the genus bound {genus}",
                q.degree()
            )));
        }
        let disc = hyperelliptic_delta(&p, &q);
        let roots = poly_roots(&disc, 1e-10)?;
        if roots.has_clusters() {
            return Err(Error::DegenerateCurve(
                "discriminant has (nearly) repeated roots".into(),
            ));
        }
        Ok(CurveSpec {
            family,
            p,
            q,
            t: None,
            genus,
            gaps: gap_sequence_hyperelliptic(genus),
            discriminant: disc,
        })
    }

    fn new_trigonal(family: CurveFamily, p: Poly, q: Poly, t: Option<Poly>) -> Result<CurveSpec> {
        let t_poly = t.unwrap_or_else(Poly::zero);
        if family != CurveFamily::TrigonalGeneric && !t_poly.is_zero() {
            return Err(Error::InvalidInput(
                "canonical trigonal curve must have T = 0".into(),
            ));
        }
        let dp = p.degree();
        let (m, genus) = match dp % 3 {
            1 => {
                let m = (dp - 1) / 3;
                (m, 3 * m)
            }
            2 => {
                let m = (dp - 2) / 3;
                (m, 3 * m + 1)
            }
            _ => {
                return Err(Error::InvalidInput(format!(
                    "deg P = {dp} is not of the form 3m+1 or 3m+2"
                )))
            }
        };
        if m == 0 {
            return Err(Error::InvalidInput(
                "trigonal curve needs deg P >= 4".into(),
            ));
        }
        match family {
            CurveFamily::Trigonal33m1 if dp % 3 != 1 => {
                return Err(Error::InvalidInput("(3,3m+1) curve needs deg P = 3m+1".into()))
            }
            CurveFamily::Trigonal33m2 if dp % 3 != 2 => {
                return Err(Error::InvalidInput("(3,3m+2) curve needs deg P = 3m+2".into()))
            }
            _ => {}
        }
        let q_bound = if dp % 3 == 1 { 2 * m } else { 2 * m + 1 };
        if !q.is_zero() && q.degree() > q_bound {
            return Err(Error::InvalidInput(format!(
                "deg Q = {} exceeds the family bound {q_bound}",
                q.degree()
            )));
        }
        let disc = trigonal_delta(&p, &q);
        let roots = poly_roots(&disc, 1e-10)?;
        if roots.has_clusters() {
            return Err(Error::DegenerateCurve(
                "discriminant has (nearly) repeated roots".into(),
            ));
        }
        // P and Q must share no root, else a finite point has ramification 3
        if !q.is_zero() {
            let qroots = poly_roots(&q, 1e-10)?;
            let scale = p.coeff_scale();
            for &r in &qroots.roots {
                if p.eval(r).norm() < 1e-8 * scale.max(1.0) {
                    return Err(Error::DegenerateCurve(
                        "P and Q share a common root".into(),
                    ));
                }
            }
        }
        let s = if dp % 3 == 1 { 3 * m + 1 } else { 3 * m + 2 };
        Ok(CurveSpec {
            family,
            p,
            q,
            t: if t_poly.is_zero() { None } else { Some(t_poly) },
            genus,
            gaps: gap_sequence(3, s)?,
            discriminant: disc,
        })
    }

    /// Canonical hyperelliptic curve from its finite branch points,
    /// optionally with a generic-form Q.
    pub fn hyperelliptic_from_branch_points(es: &[C64], q: Option<Poly>) -> Result<CurveSpec> {
        let p = Poly::from_roots(es);
        match q {
            Some(q) if !q.is_zero() => {
                Self::new(CurveFamily::HyperellipticGeneric, p, q, None)
            }
            _ => Self::new(CurveFamily::HyperellipticCanonical, p, Poly::zero(), None),
        }
    }

    /// f(x, y) for points-on-curve residual checks.
    pub fn f(&self, x: C64, y: C64) -> C64 {
        if self.family.is_hyperelliptic() {
            -y * y + y * self.q.eval(x) + self.p.eval(x)
        } else {
            let t = self.t.as_ref().map_or(c64(0.0, 0.0), |t| t.eval(x));
            -y * y * y + y * y * t + y * self.q.eval(x) + self.p.eval(x)
        }
    }

    /// dtf/dy at (x, y).
    pub fn df_dy(&self, x: C64, y: C64) -> C64 {
        if self.family.is_hyperelliptic() {
            -c64(2.0, 0.0) * y + self.q.eval(x)
        } else {
            let t = self.t.as_ref().map_or(c64(0.0, 0.0), |t| t.eval(x));
            -c64(3.0, 0.0) * y * y + c64(2.0, 0.0) * y * t + self.q.eval(x)
        }
    }

    /// Sato-weight-indexed coefficient lambda_w of the canonical equation.
    /// Weight 0 returns 1; absent or negative weights return 0.
    pub fn lambda(&self, w: i64) -> C64 {
        if w == 0 {
            return c64(1.0, 0.0);
        }
        if w < 0 {
            return c64(0.0, 0.0);
        }
        let w = w as usize;
        if self.family.is_hyperelliptic() {
            // P(x) = x^{2g+1} + sum_j lambda_{4g+2-2j} x^j, weight-2 term allowed
            let top = 2 * self.genus + 1;
            let wtot = 2 * top;
            if w % 2 != 0 || w > wtot {
                return c64(0.0, 0.0);
            }
            let j = (wtot - w) / 2;
            self.p.coeff(j)
        } else {
            let (_, s) = self.ns();
            // P: coefficient of x^i carries weight 3(s - i)
            if w % 3 == 0 && w <= 3 * s {
                let i = s - w / 3;
                if i < self.p.degree() {
                    return self.p.coeff(i);
                }
                return c64(0.0, 0.0);
            }
            // Q (multiplies y): coefficient of x^i carries weight 2s - 3i
            if 2 * s >= w && (2 * s - w) % 3 == 0 {
                let i = (2 * s - w) / 3;
                if !self.q.is_zero() && i <= self.q.degree() {
                    return self.q.coeff(i);
                }
            }
            c64(0.0, 0.0)
        }
    }

    /// (n, s) of the canonical model.
    pub fn ns(&self) -> (usize, usize) {
        if self.family.is_hyperelliptic() {
            (2, 2 * self.genus + 1)
        } else {
            let dp = self.p.degree();
            let m = if dp % 3 == 1 { (dp - 1) / 3 } else { (dp - 2) / 3 };
            (3, if dp % 3 == 1 { 3 * m + 1 } else { 3 * m + 2 })
        }
    }
}

/// Discriminant of the generic hyperelliptic equation: P + Q^2/4.
pub fn hyperelliptic_delta(p: &Poly, q: &Poly) -> Poly {
    p.add(&q.mul(q).scale(c64(0.25, 0.0)))
}

/// Discriminant of the canonical trigonal equation: P^2 - (4/27) Q^3.
pub fn trigonal_delta(p: &Poly, q: &Poly) -> Poly {
    let q3 = q.mul(q).mul(q);
    p.mul(p).sub(&q3.scale(c64(4.0 / 27.0, 0.0)))
}

/// Removes the middle term of the defining equation: y Q(x) for
/// hyperelliptic curves, y^2 T(x) for trigonal ones. Branch x-coordinates
/// are preserved.
pub fn canonicalize(curve: &CurveSpec) -> Result<CurveSpec> {
    match curve.family {
        CurveFamily::HyperellipticCanonical
        | CurveFamily::Trigonal33m1
        | CurveFamily::Trigonal33m2 => Ok(curve.clone()),
        CurveFamily::HyperellipticGeneric => {
            let p_tilde = hyperelliptic_delta(&curve.p, &curve.q);
            CurveSpec::new(
                CurveFamily::HyperellipticCanonical,
                p_tilde,
                Poly::zero(),
                None,
            )
        }
        CurveFamily::TrigonalGeneric => {
            let t = curve.t.clone().unwrap_or_else(Poly::zero);
            let third = c64(1.0 / 3.0, 0.0);
            let q_tilde = curve.q.add(&t.mul(&t).scale(third));
            let p_tilde = curve
                .p
                .add(&curve.q.mul(&t).scale(third))
                .add(&t.mul(&t).mul(&t).scale(c64(2.0 / 27.0, 0.0)));
            let family = if p_tilde.degree() % 3 == 1 {
                CurveFamily::Trigonal33m1
            } else {
                CurveFamily::Trigonal33m2
            };
            CurveSpec::new(family, p_tilde, q_tilde, None)
        }
    }
}

/// Weierstrass gap sequence of the canonical hyperelliptic curve: 2i - 1.
pub fn gap_sequence_hyperelliptic(genus: usize) -> Vec<usize> {
    (1..=genus).map(|i| 2 * i - 1).collect()
}

/// Gap sequence for the supported (n, s) families.
pub fn gap_sequence(n: usize, s: usize) -> Result<Vec<usize>> {
    match (n, s % 3) {
        (2, _) if s % 2 == 1 && s >= 3 => Ok(gap_sequence_hyperelliptic((s - 1) / 2)),
        (3, 1) if s > 1 => {
            let m = (s - 1) / 3;
            let mut w: Vec<usize> = (1..=m).map(|i| 3 * i - 2).collect();
            w.extend((1..=2 * m).map(|i| 3 * i - 1));
            w.sort_unstable();
            Ok(w)
        }
        (3, 2) => {
            let m = (s - 2) / 3;
            let mut w: Vec<usize> = (1..=m).map(|i| 3 * i - 1).collect();
            w.extend((1..=2 * m + 1).map(|i| 3 * i - 2));
            w.sort_unstable();
            Ok(w)
        }
        _ => Err(Error::InvalidInput(format!(
            "unsupported (n, s) = ({n}, {s})"
        ))),
    }
}

/// Monomial y^j x^i with its Sato weight n i + s j.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Monomial {
    pub i: usize,
    pub j: usize,
    pub weight: usize,
}

impl Monomial {
    pub fn eval(&self, x: C64, y: C64) -> C64 {
        x.powu(self.i as u32) * y.powu(self.j as u32)
    }
}

impl std::fmt::Display for Monomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let pow = |f: &mut std::fmt::Formatter<'_>, base: &str, p: usize| {
            if p == 1 {
                write!(f, "{base}")
            } else {
                write!(f, "{base}^{p}")
            }
        };
        match (self.i, self.j) {
            (0, 0) => write!(f, "1"),
            (i, 0) => pow(f, "x", i),
            (0, j) => pow(f, "y", j),
            (i, j) => {
                pow(f, "y", j)?;
                pow(f, "x", i)
            }
        }
    }
}

/// First `count` monomials y^j x^i (j < n) in ascending Sato-weight order.
pub fn monomial_list(n: usize, s: usize, count: usize) -> Result<Vec<Monomial>> {
    if !(n == 2 || n == 3) || gcd(n, s) != 1 || s <= n {
        return Err(Error::InvalidInput(format!(
            "unsupported (n, s) = ({n}, {s})"
        )));
    }
    // Weights are pairwise distinct for co-prime (n, s); everything up to
    // max_w comfortably covers the first `count` entries.
    let max_w = n * count + n * s;
    let mut out: Vec<Monomial> = Vec::new();
    for j in 0..n {
        for i in 0..=(max_w / n) {
            let w = n * i + s * j;
            if w <= max_w {
                out.push(Monomial { i, j, weight: w });
            }
        }
    }
    out.sort_by_key(|m| m.weight);
    for pair in out.windows(2) {
        debug_assert!(pair[0].weight < pair[1].weight, "weight tie");
    }
    out.truncate(count);
    if out.len() < count {
        return Err(Error::Numerics("monomial enumeration exhausted".into()));
    }
    Ok(out)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn roots_of_x2_plus_1() {
        let p = Poly::from_real(&[1.0, 0.0, 1.0]);
        let rs = poly_roots(&p, 1e-12).unwrap();
        let mut roots = rs.roots.clone();
        roots.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!(close(roots[0], c64(0.0, -1.0), 1e-12));
        assert!(close(roots[1], c64(0.0, 1.0), 1e-12));
    }

    #[test]
    fn roots_multiply_back() {
        // random-ish fixed polynomials up to degree 12
        let coeffs: Vec<C64> = (0..13)
            .map(|k| c64((k as f64 * 0.7).sin() * 3.0 + 0.2, (k as f64 * 1.3).cos() * 2.0))
            .collect();
        let p = Poly::new(coeffs);
        let rs = poly_roots(&p, 1e-9).unwrap();
        let re = Poly::from_roots(&rs.roots).scale(p.leading());
        for k in 0..=p.degree() {
            assert!(
                (re.coeff(k) - p.coeff(k)).norm() < 1e-7 * p.coeff_scale(),
                "coefficient {k} mismatch"
            );
        }
    }

    #[test]
    fn repeated_roots_flagged() {
        let p = Poly::from_roots(&[c64(1.0, 0.0), c64(1.0, 0.0), c64(-2.0, 0.0)]);
        let rs = poly_roots(&p, 1e-9).unwrap();
        assert!(rs.has_clusters());
    }

    #[test]
    fn delta_formulas() {
        let p = Poly::from_real(&[0.0, 1.0]);
        let q = Poly::from_real(&[2.0]);
        let d = hyperelliptic_delta(&p, &q);
        assert_eq!(d, Poly::from_real(&[1.0, 1.0]));

        let q0 = Poly::zero();
        assert_eq!(hyperelliptic_delta(&p, &q0), p);

        let tp = Poly::from_real(&[1.0, 2.0, 0.0, 1.0]);
        let tq = Poly::zero();
        assert_eq!(trigonal_delta(&tp, &tq), tp.mul(&tp));
    }

    #[test]
    fn trigonal_delta_pointwise() {
        let p = Poly::new(vec![c64(1.0, 0.5), c64(-2.0, 0.0), c64(0.0, 1.0), c64(3.0, 0.0)]);
        let q = Poly::new(vec![c64(0.5, -1.0), c64(2.0, 2.0)]);
        let d = trigonal_delta(&p, &q);
        for k in 0..100 {
            let x = c64((k as f64 * 0.17).sin() * 4.0, (k as f64 * 0.31).cos() * 4.0);
            let expect = p.eval(x) * p.eval(x) - c64(4.0 / 27.0, 0.0) * q.eval(x).powu(3);
            let rel = (d.eval(x) - expect).norm() / expect.norm().max(1.0);
            assert!(rel < 1e-12);
        }
    }

    #[test]
    fn canonicalize_hyperelliptic_example() {
        // P = x^3, Q = 2x gives P~ = x^3 + x^2 (the resulting curve itself is
        // degenerate, so only the substitution formula is checked here)
        let p = Poly::from_real(&[0.0, 0.0, 0.0, 1.0]);
        let q = Poly::from_real(&[0.0, 2.0]);
        assert_eq!(
            hyperelliptic_delta(&p, &q),
            Poly::from_real(&[0.0, 0.0, 1.0, 1.0])
        );
    }

    #[test]
    fn canonicalize_identity_on_canonical() {
        let p = Poly::from_real(&[1.0, 2.0, 0.0, 0.0, 0.0, 1.0]);
        let curve =
            CurveSpec::new(CurveFamily::HyperellipticCanonical, p, Poly::zero(), None).unwrap();
        let canon = canonicalize(&curve).unwrap();
        assert_eq!(canon.p, curve.p);
    }

    #[test]
    fn canonicalize_preserves_solution_set() {
        let p = Poly::new(vec![c64(2.0, 1.0), c64(0.0, -1.0), c64(1.0, 0.0), c64(1.0, 0.0)]);
        let q = Poly::new(vec![c64(1.0, 1.0), c64(0.5, 0.0)]);
        let curve = CurveSpec::new(CurveFamily::HyperellipticGeneric, p, q, None).unwrap();
        let canon = canonicalize(&curve).unwrap();
        for k in 0..100 {
            let x = c64((k as f64 * 0.7).sin() * 2.0, (k as f64 * 0.3).cos() * 2.0);
            let y_shift = 0.5 * curve.q.eval(x);
            // pick y on the generic curve, map to the canonical one
            let delta = curve.discriminant.eval(x);
            let y = y_shift + delta.sqrt();
            assert!(curve.f(x, y).norm() < 1e-10 * curve.p.coeff_scale().max(1.0));
            assert!(canon.f(x, y - y_shift).norm() < 1e-10 * canon.p.coeff_scale().max(1.0));
        }
    }

    #[test]
    fn gap_sequences() {
        assert_eq!(gap_sequence(2, 9).unwrap(), vec![1, 3, 5, 7]);
        assert_eq!(gap_sequence(3, 4).unwrap(), vec![1, 2, 5]);
        assert_eq!(gap_sequence(2, 3).unwrap(), vec![1]);
        assert_eq!(gap_sequence(3, 5).unwrap(), vec![1, 2, 4, 7]);
        assert!(gap_sequence(4, 5).is_err());
        let g4 = gap_sequence(2, 9).unwrap();
        assert_eq!(g4.len(), 4);
        assert_eq!(*g4.last().unwrap(), 7);
    }

    #[test]
    fn monomial_lists() {
        let m34 = monomial_list(3, 4, 3).unwrap();
        let shown: Vec<String> = m34.iter().map(|m| m.to_string()).collect();
        assert_eq!(shown, vec!["1", "x", "y"]);

        let m29 = monomial_list(2, 9, 4).unwrap();
        let shown: Vec<String> = m29.iter().map(|m| m.to_string()).collect();
        assert_eq!(shown, vec!["1", "x", "x^2", "x^3"]);

        let m35 = monomial_list(3, 5, 4).unwrap();
        let shown: Vec<String> = m35.iter().map(|m| m.to_string()).collect();
        assert_eq!(shown, vec!["1", "x", "y", "x^2"]);

        let longer = monomial_list(3, 4, 8).unwrap();
        for pair in longer.windows(2) {
            assert!(pair[0].weight < pair[1].weight);
        }
    }

    #[test]
    fn lambda_extraction_hyperelliptic() {
        // genus-1: P = x^3 + a x + b => lambda_4 = a, lambda_6 = b
        let p = Poly::from_real(&[5.0, -1.0, 0.0, 1.0]);
        let curve =
            CurveSpec::new(CurveFamily::HyperellipticCanonical, p, Poly::zero(), None).unwrap();
        assert_eq!(curve.lambda(4), c64(-1.0, 0.0));
        assert_eq!(curve.lambda(6), c64(5.0, 0.0));
        assert_eq!(curve.lambda(0), c64(1.0, 0.0));
        assert_eq!(curve.lambda(-2), c64(0.0, 0.0));
        assert_eq!(curve.lambda(3), c64(0.0, 0.0));
    }

    #[test]
    fn lambda_extraction_trigonal34() {
        // -y^3 + x^4 + y(4x^2 + 5x + 11) + 3x^3 + 7x^2 + 16x + 9
        let p = Poly::from_real(&[9.0, 16.0, 7.0, 3.0, 1.0]);
        let q = Poly::from_real(&[11.0, 5.0, 4.0]);
        let curve = CurveSpec::new(CurveFamily::Trigonal33m1, p, q, None).unwrap();
        assert_eq!(curve.genus, 3);
        assert_eq!(curve.gaps, vec![1, 2, 5]);
        assert_eq!(curve.lambda(2), c64(4.0, 0.0));
        assert_eq!(curve.lambda(5), c64(5.0, 0.0));
        assert_eq!(curve.lambda(8), c64(11.0, 0.0));
        assert_eq!(curve.lambda(3), c64(3.0, 0.0));
        assert_eq!(curve.lambda(6), c64(7.0, 0.0));
        assert_eq!(curve.lambda(9), c64(16.0, 0.0));
        assert_eq!(curve.lambda(12), c64(9.0, 0.0));
    }

    #[test]
    fn degenerate_curve_rejected() {
        let p = Poly::from_roots(&[c64(1.0, 0.0), c64(1.0, 0.0), c64(-1.0, 0.0)]);
        let err = CurveSpec::new(CurveFamily::HyperellipticCanonical, p, Poly::zero(), None);
        assert!(matches!(err, Err(Error::DegenerateCurve(_))));
    }
}
