//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the crate's transform or decomposition code:
//! DFTs are direct sums and decompositions go through nalgebra.

#![allow(dead_code)]

use std::f64::consts::PI;

use csipca::{CMatrix, C64};
use nalgebra::DMatrix;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    Array2::from_shape_simple_fn((rows, cols), || {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

pub fn frob(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn rel_err(a: &CMatrix, b: &CMatrix) -> f64 {
    frob(&(a - b)) / frob(b).max(f64::MIN_POSITIVE)
}

pub fn to_na(m: &CMatrix) -> DMatrix<C64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

pub fn from_na(m: &DMatrix<C64>) -> CMatrix {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// `F_d H F_a^H` as a quadruple sum with unitary scaling.
pub fn naive_dft2(h: &CMatrix) -> CMatrix {
    let (n, nt) = h.dim();
    let scale = 1.0 / ((n * nt) as f64).sqrt();
    Array2::from_shape_fn((n, nt), |(l, a)| {
        let mut acc = C64::new(0.0, 0.0);
        for s in 0..n {
            for t in 0..nt {
                let ph = -2.0 * PI * (l * s) as f64 / n as f64 + 2.0 * PI * (a * t) as f64 / nt as f64;
                acc += h[[s, t]] * C64::from_polar(1.0, ph);
            }
        }
        acc * scale
    })
}

/// Truncated SVD `U_k S_k V_k^H` and the full singular value list, via nalgebra.
pub fn truncated_svd(m: &CMatrix, k: usize) -> (CMatrix, Vec<f64>) {
    let svd = to_na(m).svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let mut out = DMatrix::<C64>::zeros(m.nrows(), m.ncols());
    for &i in order.iter().take(k) {
        let s = svd.singular_values[i];
        out += u.column(i) * vt.row(i) * C64::new(s, 0.0);
    }
    let sv = order.iter().map(|&i| svd.singular_values[i]).collect();
    (from_na(&out), sv)
}

/// Eigenpairs of the Hermitian Gram matrix `m^H m`, largest first.
pub fn gram_evd(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let a = to_na(m);
    let g = a.adjoint() * &a;
    let d = g.nrows();
    let eig = g.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = Array2::from_shape_fn((d, d), |(r, c)| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// `|<a, b>|` for two vectors given as iterators.
pub fn abs_inner<'a>(a: impl Iterator<Item = &'a C64>, b: impl Iterator<Item = &'a C64>) -> f64 {
    a.zip(b).map(|(x, y)| x.conj() * y).sum::<C64>().norm()
}

/// Random `d x k` matrix with orthonormal columns (Gram-Schmidt on Gaussians).
pub fn random_orthonormal<R: Rng>(rng: &mut R, d: usize, k: usize) -> CMatrix {
    let mut q = random_matrix(rng, d, k);
    for j in 0..k {
        for i in 0..j {
            let proj: C64 = (0..d).map(|r| q[[r, i]].conj() * q[[r, j]]).sum();
            for r in 0..d {
                let v = q[[r, i]];
                q[[r, j]] -= proj * v;
            }
        }
        let n = (0..d).map(|r| q[[r, j]].norm_sqr()).sum::<f64>().sqrt();
        for r in 0..d {
            q[[r, j]] /= n;
        }
    }
    q
}

pub fn hermitian(m: &CMatrix) -> CMatrix {
    m.t().mapv(|z| z.conj())
}
