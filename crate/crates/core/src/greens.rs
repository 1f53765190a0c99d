//! Closed-form frequency-domain susceptibilities of the chain.
//!
//! In the imaginary-gauge ("tilde") frame the chain is a Hermitian
//! tight-binding problem, so every susceptibility is a ratio of Chebyshev
//! polynomials of the second kind evaluated at `ν = ω/2J`. This module
//! evaluates them through one two-solution product formula,
//!
//! ```text
//! χ̃_{ε₀}[n,m;ω] = i^{1+n−m} · φ_min(ν) ψ_max(ν) / (J · W(ν)),
//!
//! φ_k = J U_{k−1} + (iκ/2) U_{k−2}                (left, waveguide-dressed)
//! ψ_k = U_{N−k} − (ε₀/J) U_{N−1−k}               (right, ε₀-dressed)
//! W   = J U_N + (iκ/2 − ε₀) U_{N−1} − i (ε₀/J)(κ/2) U_{N−2},
//! ```
//!
//! with `min/max` of the site pair `(n, m)`. The bare (`κ = ε₀ = 0`),
//! waveguide-dressed (`ε₀ = 0`) and fully dressed forms are special cases;
//! the published Dyson-combination formulas agree with this product form and
//! are kept as test invariants. The product form is manifestly pole-free for
//! `κ > 0`: `J U_N` and `(κ/2) U_{N−1}` never vanish simultaneously because
//! consecutive Chebyshev polynomials interlace.
//!
//! Physical quadrature susceptibilities attach imaginary-gauge factors:
//! at `ε = 0` (gauge anchored at site 1)
//!
//! ```text
//! χ^{xx}[n,m;ω] = e^{+A(n−m)} χ̃[n,m;ω],   χ^{pp} = e^{−A(n−m)} χ̃,
//! χ^{xp} = χ^{px} = 0,
//! ```
//!
//! and for the ε₀-perturbed chain (gauge anchored at site N)
//!
//! ```text
//! χ^{xx}_{ε₀} = e^{+A(n−m)} ½(χ̃_{ε₀}[ω] + χ̃_{ε₀}[−ω]*)
//! χ^{pp}_{ε₀} = e^{−A(n−m)} ½(χ̃_{ε₀}[ω] + χ̃_{ε₀}[−ω]*)
//! χ^{px}_{ε₀} = +e^{+A(2N−n−m)} (1/2i)(χ̃_{ε₀}[ω] − χ̃_{ε₀}[−ω]*)
//! χ^{xp}_{ε₀} = −e^{−A(2N−n−m)} (1/2i)(χ̃_{ε₀}[ω] − χ̃_{ε₀}[−ω]*).
//! ```
//!
//! All of these are matrix elements of the full `2N × 2N` quadrature
//! resolvent `(−iω I − M)⁻¹` (see [`crate::oracle::resolvent_susceptibility`]),
//! which is how they are validated.

use num_complex::Complex64;

use crate::chain::ChainParams;
use crate::{Error, Result};

/// Denominator magnitudes below this threshold raise [`Error::Pole`].
pub const POLE_THRESHOLD: f64 = 1e-300;

/// Gauge exponents beyond this would overflow `f64`; the `_log` variants
/// have no such limit.
const LN_OVERFLOW: f64 = 709.0;

/// Quadrature label for susceptibility elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    /// Amplified quadrature `x̂` (gain left→right).
    X,
    /// De-amplified quadrature `p̂` (gain right→left).
    P,
}

/// A complex number stored as `ln|z|` and `arg z`, for susceptibilities whose
/// magnitude exceeds the `f64` range at large `A·N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogComplex {
    /// Natural log of the magnitude.
    pub ln_abs: f64,
    /// Phase in radians.
    pub phase: f64,
}

impl LogComplex {
    /// Wraps an ordinary complex number.
    pub fn from_complex(z: Complex64) -> Self {
        Self {
            ln_abs: z.norm().ln(),
            phase: z.arg(),
        }
    }

    /// Converts back to a complex number; infinite if `ln_abs` overflows.
    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(self.ln_abs.exp(), self.phase)
    }

    /// Multiplies by `e^{dl}` in the log domain.
    fn shift_ln(mut self, dl: f64) -> Self {
        self.ln_abs += dl;
        self
    }
}

/// Chebyshev polynomial of the second kind `U_n(x)` by the three-term
/// recurrence `U_{n+1} = 2x U_n − U_{n−1}`, `U_{−1} = 0`, `U_0 = 1`.
///
/// Negative orders use the reflection `U_{−n−2} = −U_n`, so the function is
/// total on integer `n`. The recurrence is numerically benign here: inside
/// the band it accumulates error only linearly in `n`, outside it tracks the
/// dominant growing solution.
pub fn chebyshev_u(n: i64, x: f64) -> f64 {
    if n < -1 {
        return -chebyshev_u(-n - 2, x);
    }
    if n == -1 {
        return 0.0;
    }
    let mut prev = 0.0; // U_{-1}
    let mut cur = 1.0; // U_0
    for _ in 0..n {
        (prev, cur) = (cur, 2.0 * x * cur - prev);
    }
    cur
}

/// Table of `U_{−1}..U_N` at a fixed argument, for the product formula.
struct UTable {
    values: Vec<f64>, // values[k] = U_{k-1}, k = 0..=N+1
}

impl UTable {
    fn build(n_sites: usize, x: f64) -> Self {
        let mut values = Vec::with_capacity(n_sites + 2);
        values.push(0.0); // U_{-1}
        values.push(1.0); // U_0
        for _ in 1..=n_sites {
            let len = values.len();
            values.push(2.0 * x * values[len - 1] - values[len - 2]);
        }
        Self { values }
    }

    /// `U_k` for `k ≥ −1`.
    fn u(&self, k: i64) -> f64 {
        debug_assert!(k >= -1);
        self.values[(k + 1) as usize]
    }
}

/// `i^k` for any integer `k`.
fn i_pow(k: i64) -> Complex64 {
    match k.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn check_sites(params: &ChainParams, sites: &[usize]) -> Result<()> {
    for &s in sites {
        if s < 1 || s > params.n_sites {
            return Err(Error::InvalidParameter(format!(
                "site index {s} outside 1..={}",
                params.n_sites
            )));
        }
    }
    Ok(())
}

/// Bare (undamped, unperturbed) susceptibility
/// `χ̃₀[n,m;ω] = i^{1+n−m} U_{min−1} U_{N−max} / (J U_N)` at `ν = ω/2J`.
///
/// # Errors
///
/// [`Error::Pole`] when `ω/2J` sits on a root of `U_N` (an undamped chain
/// resonance): the bare function genuinely diverges there.
pub fn chi0_bare(n: usize, m: usize, omega: f64, params: &ChainParams) -> Result<Complex64> {
    check_sites(params, &[n, m])?;
    let (j, _) = params.hopping();
    let nu = omega / (2.0 * j);
    let table = UTable::build(params.n_sites, nu);
    let den = j * table.u(params.n_sites as i64);
    if den.abs() < POLE_THRESHOLD {
        return Err(Error::Pole {
            omega,
            context: format!("U_N(ω/2J) vanishes for N = {}", params.n_sites),
        });
    }
    let (lo, hi) = (n.min(m) as i64, n.max(m) as i64);
    let num = table.u(lo - 1) * table.u(params.n_sites as i64 - hi);
    let val = i_pow(1 + n as i64 - m as i64) * (num / den);
    if !val.is_finite() {
        return Err(Error::Numerical(format!(
            "chi0_bare overflow at N = {}, ω = {omega}",
            params.n_sites
        )));
    }
    Ok(val)
}

/// Full product-form engine: waveguide-dressed and `ε₀`-dressed element
/// `χ̃_{ε₀}[n,m;ω]`.
fn dressed_element(
    n: usize,
    m: usize,
    omega: f64,
    params: &ChainParams,
    eps0: f64,
) -> Result<Complex64> {
    check_sites(params, &[n, m])?;
    let n_sites = params.n_sites as i64;
    let (j, _) = params.hopping();
    let kappa = params.kappa;
    let nu = omega / (2.0 * j);
    let t = UTable::build(params.n_sites, nu);

    let (lo, hi) = (n.min(m) as i64, n.max(m) as i64);
    let phi_lo = Complex64::new(j * t.u(lo - 1), 0.5 * kappa * t.u(lo - 2));
    let psi_hi = Complex64::new(t.u(n_sites - hi) - (eps0 / j) * t.u(n_sites - 1 - hi), 0.0);
    let w = Complex64::new(
        j * t.u(n_sites) - eps0 * t.u(n_sites - 1),
        0.5 * kappa * t.u(n_sites - 1) - (eps0 / j) * 0.5 * kappa * t.u(n_sites - 2),
    );

    let den = j * w;
    if den.norm() < POLE_THRESHOLD {
        return Err(Error::Pole {
            omega,
            context: format!("dressed denominator vanishes for N = {}", params.n_sites),
        });
    }
    let val = i_pow(1 + n as i64 - m as i64) * phi_lo * psi_hi / den;
    if !val.is_finite() {
        return Err(Error::Numerical(format!(
            "dressed susceptibility overflow at N = {}, ω = {omega}",
            params.n_sites
        )));
    }
    Ok(val)
}

/// Waveguide-dressed susceptibility `χ̃[n,m;ω]` (no perturbation).
///
/// Specializes to the published boundary forms
/// `χ̃[n,1] = i^n U_{N−n} / (J U_N + i(κ/2) U_{N−1})` and
/// `χ̃[1,m] = −i^{−m} U_{N−m} / (J U_N + i(κ/2) U_{N−1})`.
pub fn chi_dressed(n: usize, m: usize, omega: f64, params: &ChainParams) -> Result<Complex64> {
    dressed_element(n, m, omega, params, 0.0)
}

/// Fully dressed susceptibility `χ̃_{ε₀}[n,1;ω]` with a dispersive shift
/// `ε₀` on the last site (signal column of the perturbed chain).
pub fn chi_perturbed(n: usize, omega: f64, params: &ChainParams, eps0: f64) -> Result<Complex64> {
    dressed_element(n, 1, omega, params, eps0)
}

/// General element `χ̃_{ε₀}[n,m;ω]` of the perturbed chain.
pub fn chi_perturbed_element(
    n: usize,
    m: usize,
    omega: f64,
    params: &ChainParams,
    eps0: f64,
) -> Result<Complex64> {
    dressed_element(n, m, omega, params, eps0)
}

/// Gauge exponent multiplying the tilde susceptibility for a quadrature pair.
///
/// `site_anchor` is the gauge site `n₀` (1 for the unperturbed convention,
/// `N` for the perturbed one); diagonal pairs are anchor-independent.
fn gauge_exponent(
    alpha: Quadrature,
    beta: Quadrature,
    n: usize,
    m: usize,
    a: f64,
    anchor: usize,
) -> f64 {
    let (n, m, n0) = (n as f64, m as f64, anchor as f64);
    match (alpha, beta) {
        (Quadrature::X, Quadrature::X) => a * (n - m),
        (Quadrature::P, Quadrature::P) => -a * (n - m),
        (Quadrature::P, Quadrature::X) => a * (2.0 * n0 - n - m),
        (Quadrature::X, Quadrature::P) => -a * (2.0 * n0 - n - m),
    }
}

/// Unperturbed quadrature susceptibility `χ^{αβ}[n,m;ω]` in the site-1 gauge.
///
/// `χ^{xx} = e^{A(n−m)} χ̃`, `χ^{pp} = e^{−A(n−m)} χ̃`, cross elements vanish
/// identically. Errors with [`Error::Numerical`] when the gauge factor
/// overflows `f64`; use [`chi_quadrature_log`] in that regime.
pub fn chi_quadrature(
    alpha: Quadrature,
    beta: Quadrature,
    n: usize,
    m: usize,
    omega: f64,
    params: &ChainParams,
) -> Result<Complex64> {
    let log = chi_quadrature_log(alpha, beta, n, m, omega, params)?;
    if log.ln_abs > LN_OVERFLOW {
        return Err(Error::Numerical(format!(
            "|χ| ≈ exp({:.1}) overflows f64; use chi_quadrature_log",
            log.ln_abs
        )));
    }
    Ok(log.to_complex())
}

/// Log-domain variant of [`chi_quadrature`] for gauge factors beyond the
/// `f64` range (`A(N−1)` up to ~700 ln 10).
pub fn chi_quadrature_log(
    alpha: Quadrature,
    beta: Quadrature,
    n: usize,
    m: usize,
    omega: f64,
    params: &ChainParams,
) -> Result<LogComplex> {
    check_sites(params, &[n, m])?;
    if alpha != beta {
        return Ok(LogComplex {
            ln_abs: f64::NEG_INFINITY,
            phase: 0.0,
        });
    }
    let (_, a) = params.hopping();
    let tilde = chi_dressed(n, m, omega, params)?;
    let dl = gauge_exponent(alpha, beta, n, m, a, 1);
    Ok(LogComplex::from_complex(tilde).shift_ln(dl))
}

/// Perturbed quadrature susceptibility `χ^{αβ}_{ε₀}[n,m;ω]` in the site-N
/// gauge: the `±ω` combinations of `χ̃_{ε₀}` dressed by the gauge factors
/// listed in the module docs. Reduces to the unperturbed elements (in the
/// site-N gauge, which is identical for the diagonal pairs) at `ε₀ = 0`.
pub fn chi_perturbed_quadrature(
    alpha: Quadrature,
    beta: Quadrature,
    n: usize,
    m: usize,
    omega: f64,
    params: &ChainParams,
    eps0: f64,
) -> Result<Complex64> {
    let log = chi_perturbed_quadrature_log(alpha, beta, n, m, omega, params, eps0)?;
    if log.ln_abs > LN_OVERFLOW {
        return Err(Error::Numerical(format!(
            "|χ_ε₀| ≈ exp({:.1}) overflows f64; use chi_perturbed_quadrature_log",
            log.ln_abs
        )));
    }
    Ok(log.to_complex())
}

/// Log-domain variant of [`chi_perturbed_quadrature`].
pub fn chi_perturbed_quadrature_log(
    alpha: Quadrature,
    beta: Quadrature,
    n: usize,
    m: usize,
    omega: f64,
    params: &ChainParams,
    eps0: f64,
) -> Result<LogComplex> {
    check_sites(params, &[n, m])?;
    let (_, a) = params.hopping();
    let plus = dressed_element(n, m, omega, params, eps0)?;
    let minus = dressed_element(n, m, -omega, params, eps0)?.conj();
    let combo = match (alpha, beta) {
        (Quadrature::X, Quadrature::X) | (Quadrature::P, Quadrature::P) => 0.5 * (plus + minus),
        (Quadrature::P, Quadrature::X) => (plus - minus) / Complex64::new(0.0, 2.0),
        (Quadrature::X, Quadrature::P) => -(plus - minus) / Complex64::new(0.0, 2.0),
    };
    let dl = gauge_exponent(alpha, beta, n, m, a, params.n_sites);
    Ok(LogComplex::from_complex(combo).shift_ln(dl))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ChainParams;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn chebyshev_u_base_cases() {
        assert_eq!(chebyshev_u(0, 0.3), 1.0);
        assert_eq!(chebyshev_u(0, -5.0), 1.0);
        assert_eq!(chebyshev_u(3, 0.0), 0.0);
        assert_eq!(chebyshev_u(5, 1.0), 6.0);
        assert_eq!(chebyshev_u(-1, 0.7), 0.0);
        // reflection U_{-n-2} = -U_n
        assert_eq!(chebyshev_u(-2, 0.7), -1.0);
        assert_relative_eq!(chebyshev_u(-5, 0.4), -chebyshev_u(3, 0.4));
    }

    #[test]
    fn chebyshev_u_matches_trigonometric_form_inside_band() {
        for n in 0..=40_i64 {
            for &theta in &[0.1, 0.5, 1.0, 2.0, 3.0] {
                let x: f64 = f64::cos(theta);
                let expected = (((n + 1) as f64) * theta).sin() / theta.sin();
                assert_relative_eq!(
                    chebyshev_u(n, x),
                    expected,
                    max_relative = 1e-12,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn chebyshev_u_matches_hyperbolic_form_outside_band() {
        for n in 0..=30_i64 {
            for &t in &[0.2_f64, 1.0, 2.5] {
                let x = t.cosh();
                let expected = (((n + 1) as f64) * t).sinh() / t.sinh();
                assert_relative_eq!(chebyshev_u(n, x), expected, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn chebyshev_u_band_edge_limit() {
        // U_n(±1) = (±1)^n (n+1): the recurrence hits this exactly.
        for n in 0..20_i64 {
            assert_eq!(chebyshev_u(n, 1.0), (n + 1) as f64);
            assert_eq!(
                chebyshev_u(n, -1.0),
                (-1.0_f64).powi(n as i32) * (n + 1) as f64
            );
        }
    }

    #[test]
    fn chi0_single_mode_resolvent() {
        let params = ChainParams::new(1, 1.0, 0.0, 1.0).unwrap();
        let omega = 0.37;
        let chi = chi0_bare(1, 1, omega, &params).unwrap();
        assert_relative_eq!((chi - c(0.0, 1.0 / omega)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn chi0_pole_detected_at_resonance() {
        // N=1 has its only resonance at ω = 0.
        let params = ChainParams::new(1, 1.0, 0.0, 1.0).unwrap();
        assert!(matches!(
            chi0_bare(1, 1, 0.0, &params),
            Err(Error::Pole { .. })
        ));
    }

    #[test]
    fn chi0_reciprocity_phase() {
        // χ̃₀[n,m] = i^{2(n−m)} χ̃₀[m,n]
        let params = ChainParams::new(7, 1.0, 0.4, 1.0).unwrap();
        for &(n, m) in &[(1usize, 4usize), (2, 7), (3, 5)] {
            for &omega in &[0.17, 0.93, 2.4] {
                let a = chi0_bare(n, m, omega, &params).unwrap();
                let b = chi0_bare(m, n, omega, &params).unwrap();
                let phase = i_pow(2 * (n as i64 - m as i64));
                assert!((a - phase * b).norm() < 1e-12 * a.norm().max(1.0));
            }
        }
    }

    #[test]
    fn chi_dressed_matches_published_boundary_forms() {
        let params = ChainParams::new(5, 1.0, 0.6, 0.8).unwrap();
        let (j, _) = params.hopping();
        let n_sites = params.n_sites as i64;
        for &omega in &[0.0, 0.31, 1.7, -0.9] {
            let nu = omega / (2.0 * j);
            let den = Complex64::new(
                j * chebyshev_u(n_sites, nu),
                0.5 * params.kappa * chebyshev_u(n_sites - 1, nu),
            );
            for n in 1..=5_usize {
                let expected = i_pow(n as i64) * chebyshev_u(n_sites - n as i64, nu) / den;
                let got = chi_dressed(n, 1, omega, &params).unwrap();
                assert!((got - expected).norm() <= 1e-13 * expected.norm().max(1e-3));

                let expected_row = -i_pow(-(n as i64)) * chebyshev_u(n_sites - n as i64, nu) / den;
                let got_row = chi_dressed(1, n, omega, &params).unwrap();
                assert!((got_row - expected_row).norm() <= 1e-13 * expected_row.norm().max(1e-3));
            }
        }
    }

    #[test]
    fn chi_dressed_exact_dc_values_odd_chain() {
        // χ̃[1,1;0] = 2/κ and χ̃[N,1;0] = 2/κ for every odd N.
        for n_sites in [1usize, 3, 5, 7, 9, 21] {
            let params = ChainParams::new(n_sites, 1.0, 0.3, 0.7).unwrap();
            let c11 = chi_dressed(1, 1, 0.0, &params).unwrap();
            assert_relative_eq!(c11.re, 2.0 / params.kappa, max_relative = 1e-13);
            assert!(c11.im.abs() < 1e-13 / params.kappa);
            let cn1 = chi_dressed(n_sites, 1, 0.0, &params).unwrap();
            assert_relative_eq!(cn1.re, 2.0 / params.kappa, max_relative = 1e-13);
            assert!(cn1.im.abs() < 1e-13 / params.kappa);
        }
    }

    #[test]
    fn chi_dressed_even_chain_dc_suppression() {
        // Even N: χ̃[1,1;0] = 0 and |χ̃[N,1;0]| = 1/J (κ/2J suppression
        // relative to the odd-chain 2/κ).
        let params = ChainParams::new(6, 1.0, 0.45, 0.9).unwrap();
        let (j, _) = params.hopping();
        let c11 = chi_dressed(1, 1, 0.0, &params).unwrap();
        assert!(c11.norm() < 1e-14);
        let cn1 = chi_dressed(6, 1, 0.0, &params).unwrap();
        assert_relative_eq!(cn1.norm(), 1.0 / j, max_relative = 1e-13);
    }

    #[test]
    fn chi_dressed_agrees_with_dyson_combination() {
        // General (n,m) product form vs. the explicit Dyson formula
        // χ̃ = χ̃₀ − (κ/2) χ̃₀[n,1] χ̃₀[1,m] / (1 + (κ/2) χ̃₀[1,1]).
        let params = ChainParams::new(7, 1.0, 0.52, 1.3).unwrap();
        for &(n, m) in &[(2usize, 5usize), (4, 4), (7, 2), (1, 6)] {
            for &omega in &[0.21, 1.03, -1.77] {
                let bare_nm = chi0_bare(n, m, omega, &params).unwrap();
                let bare_n1 = chi0_bare(n, 1, omega, &params).unwrap();
                let bare_1m = chi0_bare(1, m, omega, &params).unwrap();
                let bare_11 = chi0_bare(1, 1, omega, &params).unwrap();
                let half_kappa = 0.5 * params.kappa;
                let dyson = bare_nm - half_kappa * bare_n1 * bare_1m / (1.0 + half_kappa * bare_11);
                let product = chi_dressed(n, m, omega, &params).unwrap();
                assert!(
                    (dyson - product).norm() <= 1e-11 * product.norm().max(1e-6),
                    "Dyson vs product mismatch at (n,m,ω)=({n},{m},{omega})"
                );
            }
        }
    }

    #[test]
    fn chi_perturbed_single_mode_detuned() {
        let params = ChainParams::new(1, 1.0, 0.0, 0.8).unwrap();
        let (omega, eps0) = (0.4, 0.15);
        let got = chi_perturbed(1, omega, &params, eps0).unwrap();
        let expected = c(0.0, 1.0) / c(omega - eps0, 0.5 * params.kappa);
        assert!((got - expected).norm() < 1e-15);
    }

    #[test]
    fn chi_perturbed_reduces_to_dressed_at_zero_eps() {
        let params = ChainParams::new(9, 1.0, 0.33, 1.1).unwrap();
        for n in [1usize, 4, 9] {
            for &omega in &[0.0, 0.6, -1.9] {
                let a = chi_perturbed(n, omega, &params, 0.0).unwrap();
                let b = chi_dressed(n, 1, omega, &params).unwrap();
                assert!((a - b).norm() <= 1e-14 * b.norm().max(1e-9));
            }
        }
    }

    #[test]
    fn chi_perturbed_matches_general_dyson_insertion() {
        // χ̃_{ε₀}[n,m] = χ̃[n,m] − i ε₀ χ̃[n,N] χ̃[N,m] / (1 + i ε₀ χ̃[N,N])
        let params = ChainParams::new(5, 1.0, 0.41, 0.9).unwrap();
        let eps0 = 0.23;
        for &(n, m) in &[(1usize, 1usize), (3, 2), (5, 5), (2, 4)] {
            for &omega in &[0.0, 0.77, -1.2] {
                let full = chi_perturbed_element(n, m, omega, &params, eps0).unwrap();
                let nn = params.n_sites;
                let base = chi_dressed(n, m, omega, &params).unwrap();
                let n_n = chi_dressed(n, nn, omega, &params).unwrap();
                let n_m = chi_dressed(nn, m, omega, &params).unwrap();
                let nnd = chi_dressed(nn, nn, omega, &params).unwrap();
                let ie = c(0.0, eps0);
                let dyson = base - ie * n_n * n_m / (1.0 + ie * nnd);
                assert!(
                    (full - dyson).norm() <= 1e-12 * full.norm().max(1e-9),
                    "perturbed Dyson mismatch at (n,m,ω)=({n},{m},{omega})"
                );
            }
        }
    }

    #[test]
    fn quadrature_cross_elements_vanish_unperturbed() {
        let params = ChainParams::new(5, 1.0, 0.3, 1.0).unwrap();
        let chi = chi_quadrature(Quadrature::X, Quadrature::P, 2, 4, 0.5, &params).unwrap();
        assert_eq!(chi, c(0.0, 0.0));
        let chi = chi_quadrature(Quadrature::P, Quadrature::X, 1, 1, 0.0, &params).unwrap();
        assert_eq!(chi, c(0.0, 0.0));
    }

    #[test]
    fn quadrature_hermitian_limit_is_tilde() {
        let params = ChainParams::new(5, 1.0, 0.0, 1.0).unwrap();
        for &omega in &[0.0, 0.8] {
            let xx = chi_quadrature(Quadrature::X, Quadrature::X, 4, 2, omega, &params).unwrap();
            let pp = chi_quadrature(Quadrature::P, Quadrature::P, 4, 2, omega, &params).unwrap();
            let tilde = chi_dressed(4, 2, omega, &params).unwrap();
            assert!((xx - tilde).norm() < 1e-15);
            assert!((pp - tilde).norm() < 1e-15);
        }
    }

    #[test]
    fn quadrature_dc_amplification_odd_chain() {
        // |χ^{xx}[N,1;0]| = (2/κ) e^{A(N−1)}
        for n_sites in [3usize, 7, 11] {
            let params = ChainParams::new(n_sites, 1.0, 0.5, 0.8).unwrap();
            let (_, a) = params.hopping();
            let xx =
                chi_quadrature(Quadrature::X, Quadrature::X, n_sites, 1, 0.0, &params).unwrap();
            let expected = (2.0 / params.kappa) * (a * (n_sites as f64 - 1.0)).exp();
            assert_relative_eq!(xx.norm(), expected, max_relative = 1e-12);
            // and the pp element is deamplified by the same factor
            let pp =
                chi_quadrature(Quadrature::P, Quadrature::P, n_sites, 1, 0.0, &params).unwrap();
            assert_relative_eq!(
                xx.norm() / pp.norm(),
                (2.0 * a * (n_sites as f64 - 1.0)).exp(),
                max_relative = 1e-11
            );
        }
    }

    #[test]
    fn quadrature_log_variant_handles_huge_gauge() {
        // A(N−1) ≈ 1729 ln ≫ 709: the plain variant must refuse, the log
        // variant must return the right log-magnitude.
        let params = ChainParams::from_amplification(1001, 1.0, 2.0, 1.0).unwrap();
        let plain = chi_quadrature(Quadrature::X, Quadrature::X, 1001, 1, 0.0, &params);
        assert!(matches!(plain, Err(Error::Numerical(_))));
        let log = chi_quadrature_log(Quadrature::X, Quadrature::X, 1001, 1, 0.0, &params).unwrap();
        let expected_ln = (2.0_f64 / params.kappa).ln() + 2.0 * 1000.0;
        assert_relative_eq!(log.ln_abs, expected_ln, max_relative = 1e-12);
    }

    #[test]
    fn perturbed_quadrature_first_order_composition() {
        // ∂χ^{px}_{ε₀}[1,1;0]/∂ε₀ at 0 = −χ^{pp}[1,N;0]·χ^{xx}[N,1;0]
        let params = ChainParams::new(7, 1.0, 0.35, 1.0).unwrap();
        let h = 1e-6 * params.kappa;
        let plus =
            chi_perturbed_quadrature(Quadrature::P, Quadrature::X, 1, 1, 0.0, &params, h).unwrap();
        let minus =
            chi_perturbed_quadrature(Quadrature::P, Quadrature::X, 1, 1, 0.0, &params, -h).unwrap();
        let fd = (plus - minus) / (2.0 * h);
        let pp = chi_quadrature(Quadrature::P, Quadrature::P, 1, 7, 0.0, &params).unwrap();
        let xx = chi_quadrature(Quadrature::X, Quadrature::X, 7, 1, 0.0, &params).unwrap();
        let expected = -pp * xx;
        assert!(
            (fd - expected).norm() <= 1e-7 * expected.norm(),
            "finite-difference px response {fd} vs composition {expected}"
        );
    }

    #[test]
    fn perturbed_quadrature_reduces_at_zero_eps() {
        let params = ChainParams::new(5, 1.0, 0.42, 1.2).unwrap();
        for &omega in &[0.0, 0.9] {
            let full =
                chi_perturbed_quadrature(Quadrature::X, Quadrature::X, 4, 2, omega, &params, 0.0)
                    .unwrap();
            let base = chi_quadrature(Quadrature::X, Quadrature::X, 4, 2, omega, &params).unwrap();
            assert!((full - base).norm() <= 1e-12 * base.norm());
            let cross =
                chi_perturbed_quadrature(Quadrature::P, Quadrature::X, 3, 3, omega, &params, 0.0)
                    .unwrap();
            assert!(cross.norm() < 1e-14);
        }
    }
}
