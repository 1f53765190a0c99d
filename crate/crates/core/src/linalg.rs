//! Dense numerical kernels shared by the oracle and the solvers.
//!
//! Everything here is deliberately boring and well-conditioned:
//!
//! * [`expm`] — scaling-and-squaring matrix exponential with a degree-13 Padé
//!   approximant (the standard Higham algorithm, absolute backward error at
//!   the level of machine precision for any finite input).
//! * [`lyapunov`] — direct solution of the continuous Lyapunov equation
//!   `M X + X Mᵀ + Q = 0` by Kronecker vectorisation, with a fast path for
//!   the block-diagonal (quadrature-decoupled) case.
//! * [`solve_complex`] — LU solve of a complex linear system, used for
//!   resolvent inversions.
//!
//! The quadrature dynamical matrices of this crate are strongly non-normal
//! (that is the whole point of the physics), so all routines avoid
//! eigendecompositions and work with factorizations that are exact for any
//! diagonalizable or defective input.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

/// Padé-13 numerator/denominator coefficients (Higham 2005).
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Scaling threshold θ₁₃ for the degree-13 approximant.
const THETA13: f64 = 5.371_920_351_148_152;

/// Largest coupled system accepted by the vectorised Lyapunov solver
/// (the Kronecker LU costs O(n⁶); n = 64 is ~20 s, the practical ceiling).
const LYAPUNOV_MAX_DIM: usize = 64;

/// Maximum absolute column sum (induced 1-norm).
fn one_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential `e^A` by Padé-13 scaling and squaring.
///
/// # Panics
///
/// Panics if `a` is not square or contains non-finite entries.
pub(crate) fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm: matrix must be square");
    assert!(
        a.iter().all(|x| x.is_finite()),
        "expm: matrix entries must be finite"
    );

    let norm = one_norm(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a1 = a / 2f64.powi(s);

    let b = &PADE13;
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a1 * &a1;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let u_poly = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = &a1 * u_poly;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];

    let mut x = (&v - &u)
        .lu()
        .solve(&(&v + &u))
        .expect("expm: Padé denominator is singular (non-finite input?)");
    for _ in 0..s {
        x = &x * &x;
    }
    x
}

/// Solves the continuous Lyapunov equation `M X + X Mᵀ + Q = 0`.
///
/// Uses the Kronecker identity `vec(M X) = (I ⊗ M) vec X`,
/// `vec(X Mᵀ) = (M ⊗ I) vec X` (column-major `vec`), so the equation becomes
/// a single dense linear solve in n² unknowns. When `M` and `Q` are both
/// block-diagonal over the two n/2-dimensional quadrature sectors the two
/// blocks are solved independently (n⁶ → n⁶/32 cost), which covers every
/// unperturbed chain.
pub(crate) fn lyapunov(m: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "lyapunov: M must be square");
    assert_eq!((q.nrows(), q.ncols()), (n, n), "lyapunov: Q must match M");

    if n.is_multiple_of(2) {
        let h = n / 2;
        let off_blocks_zero = |a: &DMatrix<f64>| {
            a.view((0, h), (h, h)).iter().all(|x| *x == 0.0)
                && a.view((h, 0), (h, h)).iter().all(|x| *x == 0.0)
        };
        if off_blocks_zero(m) && off_blocks_zero(q) {
            let mut x = DMatrix::<f64>::zeros(n, n);
            for (r0, c0) in [(0usize, 0usize), (h, h)] {
                let mb = m.view((r0, c0), (h, h)).into_owned();
                let qb = q.view((r0, c0), (h, h)).into_owned();
                let xb = lyapunov_dense(&mb, &qb)?;
                x.view_mut((r0, c0), (h, h)).copy_from(&xb);
            }
            return Ok(x);
        }
    }
    lyapunov_dense(m, q)
}

fn lyapunov_dense(m: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if n > LYAPUNOV_MAX_DIM {
        return Err(Error::Numerical(format!(
            "coupled Lyapunov solve of dimension {n} exceeds the dense cap {LYAPUNOV_MAX_DIM}"
        )));
    }
    let id = DMatrix::<f64>::identity(n, n);
    let k = id.kronecker(m) + m.kronecker(&id);
    let rhs = -DVector::<f64>::from_column_slice(q.as_slice());
    let sol = k.lu().solve(&rhs).ok_or_else(|| {
        Error::Numerical("singular Lyapunov operator (marginally stable dynamics?)".into())
    })?;
    Ok(DMatrix::from_column_slice(n, n, sol.as_slice()))
}

/// Solves `A X = B` for complex `A`, `B` via LU with partial pivoting.
pub(crate) fn solve_complex(
    a: DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>> {
    a.lu()
        .solve(b)
        .ok_or_else(|| Error::Numerical("singular complex linear system".into()))
}

/// Solves `A x = b` for real `A`, `b` via LU with partial pivoting.
pub(crate) fn solve_real(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Numerical("singular real linear system".into()))
}
