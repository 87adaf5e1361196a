//! Small dense real matrices with a symmetric eigensolver.
//!
//! Everything in this crate lives in dimension d ≤ 32 (five qubits), so a
//! plain row-major `Vec<f64>` with closed-form 2×2 eigenvalues and cyclic
//! Jacobi sweeps for larger d beats pulling in an external solver: it is
//! deterministic, allocation-light and accurate to machine precision.

use std::fmt;

#[derive(Clone, PartialEq)]
pub struct SquareMat {
    dim: usize,
    a: Vec<f64>,
}

impl fmt::Debug for SquareMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SquareMat({}x{})", self.dim, self.dim)?;
        for r in 0..self.dim {
            writeln!(f, "  {:?}", &self.a[r * self.dim..(r + 1) * self.dim])?;
        }
        Ok(())
    }
}

impl SquareMat {
    pub fn zeros(dim: usize) -> Self {
        SquareMat { dim, a: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.a[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        let mut a = Vec::with_capacity(dim * dim);
        for r in rows {
            assert_eq!(r.len(), dim, "rows must form a square matrix");
            a.extend_from_slice(r);
        }
        SquareMat { dim, a }
    }

    pub fn two_by_two(a00: f64, a01: f64, a10: f64, a11: f64) -> Self {
        SquareMat { dim: 2, a: vec![a00, a01, a10, a11] }
    }

    /// Rank-1 projector v vᵀ (v need not be normalized; it is normalized here).
    pub fn projector(v: &[f64]) -> Self {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm > 0.0, "projector direction must be nonzero");
        let dim = v.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.a[i * dim + j] = v[i] * v[j] / (norm * norm);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.dim + j] = v;
    }

    pub fn entries(&self) -> &[f64] {
        &self.a
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.a[i * self.dim + i]).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t.a[j * self.dim + i] = self.a[i * self.dim + j];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        SquareMat { dim: self.dim, a: self.a.iter().map(|x| x * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let a = self.a.iter().zip(&other.a).map(|(x, y)| x + y).collect();
        SquareMat { dim: self.dim, a }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let a = self.a.iter().zip(&other.a).map(|(x, y)| x - y).collect();
        SquareMat { dim: self.dim, a }
    }

    pub fn add_scaled(&mut self, other: &Self, s: f64) {
        assert_eq!(self.dim, other.dim);
        for (x, y) in self.a.iter_mut().zip(&other.a) {
            *x += s * y;
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let aik = self.a[i * d + k];
                if aik == 0.0 {
                    continue;
                }
                let row = &other.a[k * d..(k + 1) * d];
                let dst = &mut out.a[i * d..(i + 1) * d];
                for (o, b) in dst.iter_mut().zip(row) {
                    *o += aik * b;
                }
            }
        }
        out
    }

    /// Tr[A B] for symmetric B: the Frobenius inner product.
    pub fn frob_dot(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.a.iter().zip(&other.a).map(|(x, y)| x * y).sum()
    }

    /// (A + Aᵀ)/2
    pub fn symmetrize(&self) -> Self {
        let mut s = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                s.a[i * self.dim + j] =
                    0.5 * (self.a[i * self.dim + j] + self.a[j * self.dim + i]);
            }
        }
        s
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.a.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                if (self.a[i * self.dim + j] - self.a[j * self.dim + i]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (da, db) = (self.dim, other.dim);
        let d = da * db;
        let mut out = Self::zeros(d);
        for i in 0..da {
            for j in 0..da {
                let aij = self.a[i * da + j];
                if aij == 0.0 {
                    continue;
                }
                for k in 0..db {
                    for l in 0..db {
                        out.a[(i * db + k) * d + (j * db + l)] = aij * other.a[k * db + l];
                    }
                }
            }
        }
        out
    }

    /// Eigendecomposition of a symmetric matrix: eigenvalues ascending with
    /// matching eigenvector columns. Closed form at d=2, cyclic Jacobi above.
    pub fn sym_eig(&self) -> (Vec<f64>, SquareMat) {
        debug_assert!(self.is_symmetric(1e-9 * (1.0 + self.max_abs_entry())));
        if self.dim == 1 {
            return (vec![self.a[0]], SquareMat::identity(1));
        }
        if self.dim == 2 {
            return self.sym_eig_2x2();
        }
        self.sym_eig_jacobi()
    }

    fn sym_eig_2x2(&self) -> (Vec<f64>, SquareMat) {
        let (a, b, c) = (self.a[0], 0.5 * (self.a[1] + self.a[2]), self.a[3]);
        let half_diff = 0.5 * (a - c);
        let r = half_diff.hypot(b);
        let mean = 0.5 * (a + c);
        let (lo, hi) = (mean - r, mean + r);
        // Eigenvector for the larger eigenvalue, rotated copy for the smaller.
        let (vx, vy) = if r == 0.0 {
            (1.0, 0.0)
        } else if half_diff >= 0.0 {
            let t = half_diff + r;
            let n = t.hypot(b);
            (t / n, b / n)
        } else {
            let t = r - half_diff;
            let n = t.hypot(b);
            (b / n, t / n)
        };
        let vecs = SquareMat::two_by_two(-vy, vx, vx, vy);
        (vec![lo, hi], vecs)
    }

    fn sym_eig_jacobi(&self) -> (Vec<f64>, SquareMat) {
        let d = self.dim;
        let mut a = self.symmetrize();
        let mut v = SquareMat::identity(d);
        let scale = a.max_abs_entry().max(1.0);
        for _sweep in 0..60 {
            let mut off = 0.0f64;
            for i in 0..d {
                for j in (i + 1)..d {
                    off = off.max(a.get(i, j).abs());
                }
            }
            if off <= 1e-15 * scale {
                break;
            }
            for p in 0..d {
                for q in (p + 1)..d {
                    let apq = a.get(p, q);
                    if apq.abs() <= 1e-18 * scale {
                        continue;
                    }
                    let (app, aqq) = (a.get(p, p), a.get(q, q));
                    let tau = (aqq - app) / (2.0 * apq);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    for k in 0..d {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..d {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                    for k in 0..d {
                        let vkp = v.get(k, p);
                        let vkq = v.get(k, q);
                        v.set(k, p, c * vkp - s * vkq);
                        v.set(k, q, s * vkp + c * vkq);
                    }
                }
            }
        }
        let mut idx: Vec<usize> = (0..d).collect();
        idx.sort_by(|&i, &j| a.get(i, i).partial_cmp(&a.get(j, j)).unwrap());
        let vals: Vec<f64> = idx.iter().map(|&i| a.get(i, i)).collect();
        let mut vecs = SquareMat::zeros(d);
        for (col, &src) in idx.iter().enumerate() {
            for row in 0..d {
                vecs.set(row, col, v.get(row, src));
            }
        }
        (vals, vecs)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.sym_eig().0[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.sym_eig().0.last().unwrap()
    }

    /// Clip negative eigenvalues to zero (projection onto the PSD cone).
    pub fn psd_clip(&self) -> Self {
        let (vals, vecs) = self.sym_eig();
        if vals[0] >= 0.0 {
            return self.symmetrize();
        }
        reassemble(&vals.iter().map(|&l| l.max(0.0)).collect::<Vec<_>>(), &vecs)
    }
}

/// V diag(vals) Vᵀ.
pub fn reassemble(vals: &[f64], vecs: &SquareMat) -> SquareMat {
    let d = vecs.dim();
    let mut out = SquareMat::zeros(d);
    for (k, &l) in vals.iter().enumerate() {
        if l == 0.0 {
            continue;
        }
        for i in 0..d {
            let w = l * vecs.get(i, k);
            if w == 0.0 {
                continue;
            }
            for j in 0..d {
                let x = out.get(i, j) + w * vecs.get(j, k);
                out.set(i, j, x);
            }
        }
    }
    out.symmetrize()
}
