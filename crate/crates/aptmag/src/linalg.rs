//! Small dense complex linear algebra: 3x3 solves and 2x2/3x3 eigenproblems.
//!
//! The system matrices in this crate are fixed at 3x3 (two magnons, one cavity)
//! and 2x2 (effective Hamiltonians), so everything here is closed-form:
//! Gaussian elimination with partial pivoting for solves, the quadratic formula
//! for 2x2 eigenvalues, and Cardano's formula with a Newton polish for the 3x3
//! characteristic cubic. Eigenvectors come from cross products of rows of
//! (M - lambda I), which span the null space of a rank-2 matrix.

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

/// Relative pivot threshold below which a system is treated as singular.
const SINGULAR_TOL: f64 = 1e-300;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("linear system is singular (pivot magnitude {pivot:.3e})")]
    Singular { pivot: f64 },
}

/// Solve a 3x3 complex linear system `a * x = b` by Gaussian elimination with
/// partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn solve3(a: &[[C64; 3]; 3], b: &[C64; 3]) -> Result<[C64; 3], LinalgError> {
    let mut m = *a;
    let mut rhs = *b;
    for col in 0..3 {
        let mut pivot_row = col;
        let mut pivot_mag = m[col][col].norm();
        for row in col + 1..3 {
            let mag = m[row][col].norm();
            if mag > pivot_mag {
                pivot_row = row;
                pivot_mag = mag;
            }
        }
        if pivot_mag < SINGULAR_TOL {
            return Err(LinalgError::Singular { pivot: pivot_mag });
        }
        if pivot_row != col {
            m.swap(col, pivot_row);
            rhs.swap(col, pivot_row);
        }
        for row in col + 1..3 {
            let factor = m[row][col] / m[col][col];
            for k in col..3 {
                let sub = factor * m[col][k];
                m[row][k] -= sub;
            }
            let sub = factor * rhs[col];
            rhs[row] -= sub;
        }
    }
    let mut x = [C64::new(0.0, 0.0); 3];
    for row in (0..3).rev() {
        let mut acc = rhs[row];
        for k in row + 1..3 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Ok(x)
}

/// Eigenvalues of a complex 2x2 matrix, ordered so the first has the larger
/// real part; ties are broken by the larger imaginary part. The principal
/// square root (Re >= 0, and Im >= 0 on the branch cut) realizes exactly that
/// ordering.
pub fn eig2(m: &[[C64; 2]; 2]) -> (C64, C64) {
    let mean = (m[0][0] + m[1][1]) * 0.5;
    let half_diff = (m[0][0] - m[1][1]) * 0.5;
    let split = (half_diff * half_diff + m[0][1] * m[1][0]).sqrt();
    (mean + split, mean - split)
}

/// One eigenvalue/eigenvector pair of a 3x3 matrix.
#[derive(Debug, Clone, Copy)]
pub struct Eigenpair {
    pub value: C64,
    /// Unit-norm eigenvector.
    pub vector: [C64; 3],
}

/// Full eigendecomposition of a complex 3x3 matrix.
///
/// Roots of the characteristic cubic via Cardano, each polished by two Newton
/// steps on the characteristic polynomial. Returned in no particular order.
pub fn eig3(m: &[[C64; 3]; 3]) -> [Eigenpair; 3] {
    // lambda^3 + a2 lambda^2 + a1 lambda + a0
    let tr = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0]
        + m[0][0] * m[2][2] - m[0][2] * m[2][0]
        + m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let a2 = -tr;
    let a1 = minors;
    let a0 = -det;

    // depressed cubic t^3 + p t + q with lambda = t - a2/3
    let shift = a2 / 3.0;
    let p = a1 - a2 * a2 / 3.0;
    let q = a2 * a2 * a2 * (2.0 / 27.0) - a2 * a1 / 3.0 + a0;

    let disc_sqrt = (q * q * 0.25 + p * p * p / 27.0).sqrt();
    // pick the cube-root argument with the larger magnitude to avoid cancellation
    let c1 = -q * 0.5 + disc_sqrt;
    let c2 = -q * 0.5 - disc_sqrt;
    let u3 = if c1.norm() >= c2.norm() { c1 } else { c2 };

    let scale = m.iter().flatten().map(|z| z.norm()).fold(0.0_f64, f64::max);
    let roots: [C64; 3] = if u3.norm() < 1e-280 {
        // triple root of the depressed cubic
        [-shift, -shift, -shift]
    } else {
        let u = u3.powf(1.0 / 3.0);
        let v = -p / (u * 3.0);
        let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        [
            u + v - shift,
            u * w + v * w.conj() - shift,
            u * w.conj() + v * w - shift,
        ]
    };

    let mut out = [Eigenpair {
        value: C64::new(0.0, 0.0),
        vector: [C64::new(0.0, 0.0); 3],
    }; 3];
    for (slot, root) in out.iter_mut().zip(roots) {
        let mut lam = root;
        for _ in 0..2 {
            let f = ((lam + a2) * lam + a1) * lam + a0;
            let df = (lam * 3.0 + a2 * 2.0) * lam + a1;
            if df.norm() > 1e-12 * scale.max(1.0) {
                lam -= f / df;
            }
        }
        slot.value = lam;
        slot.vector = null_vector(m, lam, scale);
    }
    out
}

/// Null vector of (m - lambda I) for an eigenvalue lambda, via the largest
/// cross product among row pairs (bilinear cross product, no conjugation).
fn null_vector(m: &[[C64; 3]; 3], lam: C64, scale: f64) -> [C64; 3] {
    let mut b = *m;
    for (k, row) in b.iter_mut().enumerate() {
        row[k] -= lam;
    }
    let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
    let mut best: Option<[C64; 3]> = None;
    let mut best_norm = 0.0_f64;
    for (i, j) in pairs {
        let v = cross(&b[i], &b[j]);
        let n = vec_norm(&v);
        if n > best_norm {
            best_norm = n;
            best = Some(v);
        }
    }
    if best_norm > 1e-14 * scale.max(1.0) * scale.max(1.0) {
        let v = best.unwrap();
        return normalize(&v);
    }
    // degenerate eigenvalue: inverse iteration with a slightly shifted matrix
    let mut shifted = b;
    let eps = 1e-10 * scale.max(1.0);
    for (k, row) in shifted.iter_mut().enumerate() {
        row[k] += C64::new(eps, eps);
    }
    let mut v = [C64::new(1.0, 0.0), C64::new(0.8, 0.1), C64::new(0.6, -0.2)];
    for _ in 0..3 {
        if let Ok(next) = solve3(&shifted, &v) {
            v = normalize(&next);
        }
    }
    v
}

fn cross(a: &[C64; 3], b: &[C64; 3]) -> [C64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn vec_norm(v: &[C64; 3]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(v: &[C64; 3]) -> [C64; 3] {
    let n = vec_norm(v);
    if n == 0.0 {
        return *v;
    }
    [v[0] / n, v[1] / n, v[2] / n]
}
