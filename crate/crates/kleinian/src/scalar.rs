//! Numeric scalar layer: complex binary64, compensated accumulation, and the
//! small dense linear algebra needed for period matrices (LU, Cholesky, Jacobi
//! eigenvalues). Everything here is sized for g <= 8 matrices.

use num_complex::Complex;

/// Working scalar. A double-double backend can be slotted in behind this
/// alias later; all tolerances in the crate are expressed for binary64.
pub type C64 = Complex<f64>;

pub const I: C64 = Complex { re: 0.0, im: 1.0 };

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    Complex { re, im }
}

/// Kahan--Neumaier compensated accumulator over complex values.
///
/// Quadrature and theta sums accumulate thousands of terms spanning many
/// orders of magnitude; plain summation costs several digits there.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum_re: f64,
    sum_im: f64,
    c_re: f64,
    c_im: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: C64) {
        self.sum_re = neumaier(self.sum_re, z.re, &mut self.c_re);
        self.sum_im = neumaier(self.sum_im, z.im, &mut self.c_im);
    }

    #[inline]
    pub fn value(&self) -> C64 {
        c64(self.sum_re + self.c_re, self.sum_im + self.c_im)
    }
}

#[inline]
fn neumaier(sum: f64, x: f64, comp: &mut f64) -> f64 {
    let t = sum + x;
    if sum.abs() >= x.abs() {
        *comp += (sum - t) + x;
    } else {
        *comp += (x - t) + sum;
    }
    t
}

/// Dense column-major-free complex matrix, row index first. Only what the
/// period pipeline needs; not a general linear algebra library.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    pub n_rows: usize,
    pub n_cols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![C64::new(0.0, 0.0); n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(n_rows, n_cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n_cols);
            for (j, &v) in r.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Builds a square matrix whose k-th column is `cols[k]`.
    pub fn from_cols(cols: &[Vec<C64>]) -> Self {
        let n_cols = cols.len();
        let n_rows = cols.first().map_or(0, Vec::len);
        let mut m = Self::zeros(n_rows, n_cols);
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), n_rows);
            for (i, &v) in c.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn col(&self, j: usize) -> Vec<C64> {
        (0..self.n_rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> CMat {
        let mut t = CMat::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.n_cols, other.n_rows);
        let mut out = CMat::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for j in 0..other.n_cols {
                let mut acc = KahanSum::new();
                for k in 0..self.n_cols {
                    acc.add(self[(i, k)] * other[(k, j)]);
                }
                out[(i, j)] = acc.value();
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.n_cols, v.len());
        (0..self.n_rows)
            .map(|i| {
                let mut acc = KahanSum::new();
                for k in 0..self.n_cols {
                    acc.add(self[(i, k)] * v[k]);
                }
                acc.value()
            })
            .collect()
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        assert_eq!((self.n_rows, self.n_cols), (other.n_rows, other.n_cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, s: C64) -> CMat {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= s;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max-norm of the asymmetry `M - M^t`.
    pub fn asymmetry(&self) -> f64 {
        assert_eq!(self.n_rows, self.n_cols);
        let mut worst = 0.0f64;
        for i in 0..self.n_rows {
            for j in (i + 1)..self.n_cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).norm());
            }
        }
        worst
    }

    pub fn re(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows)
            .map(|i| (0..self.n_cols).map(|j| self[(i, j)].re).collect())
            .collect()
    }

    pub fn im(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows)
            .map(|i| (0..self.n_cols).map(|j| self[(i, j)].im).collect())
            .collect()
    }

    /// Inf-norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n_rows)
            .map(|i| (0..self.n_cols).map(|j| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n_cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n_cols + j]
    }
}

/// LU factorization with partial pivoting of a square complex matrix.
pub struct Lu {
    lu: CMat,
    perm: Vec<usize>,
    pub singular: bool,
}

impl Lu {
    pub fn new(m: &CMat) -> Self {
        assert_eq!(m.n_rows, m.n_cols);
        let n = m.n_rows;
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut singular = false;
        for k in 0..n {
            let (mut p, mut best) = (k, lu[(k, k)].norm());
            for i in (k + 1)..n {
                let v = lu[(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                perm.swap(k, p);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
            }
            let piv = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / piv;
                lu[(i, k)] = f;
                for j in (k + 1)..n {
                    let v = lu[(k, j)];
                    lu[(i, j)] -= f * v;
                }
            }
        }
        Self { lu, perm, singular }
    }

    pub fn solve_vec(&self, b: &[C64]) -> Vec<C64> {
        let n = self.lu.n_rows;
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            for j in 0..i {
                let f = self.lu[(i, j)] * x[j];
                x[i] -= f;
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let f = self.lu[(i, j)] * x[j];
                x[i] -= f;
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    pub fn solve_mat(&self, b: &CMat) -> CMat {
        let mut out = CMat::zeros(b.n_rows, b.n_cols);
        for j in 0..b.n_cols {
            let col = self.solve_vec(&b.col(j));
            for i in 0..b.n_rows {
                out[(i, j)] = col[i];
            }
        }
        out
    }

    pub fn inverse(&self) -> CMat {
        self.solve_mat(&CMat::identity(self.lu.n_rows))
    }
}

/// Inverts `m`, also returning an inf-norm condition estimate.
pub fn invert(m: &CMat) -> Option<(CMat, f64)> {
    let lu = Lu::new(m);
    if lu.singular {
        return None;
    }
    let inv = lu.inverse();
    let cond = m.norm_inf() * inv.norm_inf();
    if !cond.is_finite() {
        return None;
    }
    Some((inv, cond))
}

/// Cholesky factor (lower-triangular L with L L^t = A) of a symmetric
/// positive definite real matrix. Returns None when A is not PD.
pub fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Eigenvalues of a symmetric real matrix by cyclic Jacobi rotations.
pub fn sym_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    // symmetrize defensively; callers pass numerically symmetric input
    for i in 0..n {
        for j in 0..n {
            let avg = 0.5 * (m[i][j] + m[j][i]);
            m[i][j] = avg;
            m[j][i] = avg;
        }
    }
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i][j] * m[i][j];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + frobenius(&m)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

fn frobenius(m: &[Vec<f64>]) -> f64 {
    m.iter()
        .flat_map(|r| r.iter().map(|x| x * x))
        .sum::<f64>()
        .sqrt()
}

/// Solves a real square system `A x = b` by LU with partial pivoting.
pub fn real_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut x: Vec<f64> = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (mut p, mut best) = (k, m[k][k].abs());
        for i in (k + 1)..n {
            if m[i][k].abs() > best {
                best = m[i][k].abs();
                p = i;
            }
        }
        if best == 0.0 {
            return None;
        }
        m.swap(k, p);
        perm.swap(k, p);
        x.swap(k, p);
        for i in (k + 1)..n {
            let f = m[i][k] / m[k][k];
            m[i][k] = f;
            for j in (k + 1)..n {
                m[i][j] -= f * m[k][j];
            }
            x[i] -= f * x[k];
        }
    }
    for i in (0..n).rev() {
        for j in (i + 1)..n {
            x[i] -= m[i][j] * x[j];
        }
        x[i] /= m[i][i];
    }
    Some(x)
}

/// Parses a complex literal like `1.5`, `-2i`, `3+4i`, `-1.2e3-0.5i`.
pub fn parse_complex(s: &str) -> Result<C64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return Err("empty complex literal".into());
    }
    if let Ok(re) = t.parse::<f64>() {
        return Ok(c64(re, 0.0));
    }
    // pure imaginary
    if let Some(body) = t.strip_suffix(['i', 'j']) {
        if body.is_empty() || body == "+" {
            return Ok(c64(0.0, 1.0));
        }
        if body == "-" {
            return Ok(c64(0.0, -1.0));
        }
        if let Ok(im) = body.parse::<f64>() {
            return Ok(c64(0.0, im));
        }
    }
    // split at the last +/- that is not an exponent sign and not leading
    let bytes = t.as_bytes();
    let mut split = None;
    for k in (1..bytes.len()).rev() {
        let c = bytes[k] as char;
        if (c == '+' || c == '-') && !matches!(bytes[k - 1] as char, 'e' | 'E') {
            split = Some(k);
            break;
        }
    }
    let k = split.ok_or_else(|| format!("cannot parse complex literal `{s}`"))?;
    let (re_s, im_s) = t.split_at(k);
    let im_body = im_s
        .strip_suffix(['i', 'j'])
        .ok_or_else(|| format!("missing imaginary unit in `{s}`"))?;
    let re = re_s
        .parse::<f64>()
        .map_err(|_| format!("bad real part in `{s}`"))?;
    let im = match im_body {
        "+" => 1.0,
        "-" => -1.0,
        _ => im_body
            .parse::<f64>()
            .map_err(|_| format!("bad imaginary part in `{s}`"))?,
    };
    Ok(c64(re, im))
}

pub fn format_complex(z: C64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im < 0.0 {
        format!("{}{}i", z.re, z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_cancellation() {
        let mut acc = KahanSum::new();
        acc.add(c64(1e16, 0.0));
        acc.add(c64(1.0, 0.0));
        acc.add(c64(-1e16, 0.0));
        assert_eq!(acc.value().re, 1.0);
    }

    #[test]
    fn lu_solves_and_inverts() {
        let m = CMat::from_rows(&[
            vec![c64(2.0, 1.0), c64(0.0, -1.0)],
            vec![c64(1.0, 0.0), c64(3.0, 2.0)],
        ]);
        let (inv, cond) = invert(&m).unwrap();
        let id = m.mul(&inv);
        assert!(id.sub(&CMat::identity(2)).max_abs() < 1e-14);
        assert!(cond > 0.0);
    }

    #[test]
    fn jacobi_eigenvalues_on_known_matrix() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let ev = sym_eigenvalues(&a);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn parse_complex_forms() {
        assert_eq!(parse_complex("-18-2i").unwrap(), c64(-18.0, -2.0));
        assert_eq!(parse_complex("3").unwrap(), c64(3.0, 0.0));
        assert_eq!(parse_complex("i").unwrap(), c64(0.0, 1.0));
        assert_eq!(parse_complex("-1.5e2+0.25i").unwrap(), c64(-150.0, 0.25));
        assert!(parse_complex("xyz").is_err());
    }
}
