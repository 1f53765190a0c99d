//! Finite-bandwidth (non-Markovian) corrections to the sensing protocol.
//!
//! The linear-response results hold when the integration window `τ` is long
//! compared with every internal timescale of the chain. This module carries
//! the three relevant scales,
//!
//! ```text
//! t_rt  = N / J            ballistic round-trip (signal arrival) time,
//! t_esc = (N + 1) / κ       escape time of the zero-frequency chain mode,
//! τ*    = (κ/ε₀)² e^{−2A(N−1)} / (16 Z n̄_tot κ)   critical window with SNR = 1,
//! ```
//!
//! and the window-dependence of the SNR. Treating the chain's dc response as
//! a single pole of linewidth `1/t_esc` gives the exact window factor
//!
//! ```text
//! SNR(τ) = √(τ/τ*) · g(τ/t_esc),    g(u) = 1 + e^{−u} − (2/u)(1 − e^{−u}),
//! ```
//!
//! (for a single mode, `N = 1`, this is exact: the cascaded x→p response
//! integrates to precisely `g`). A finite hopping `J` additionally delays
//! the signal by the ballistic arrival time, modeled as a sharp gate
//! `Θ(τ − t_rt)` with `Θ(0) = 0`.
//!
//! The measurement time `τ_M` — the window needed to resolve the
//! perturbation, `SNR(τ_M) = 1` — is computed either from the analytic
//! envelope above or by brute-force transient integration of the full
//! `2N × 2N` dynamics ([`snr_transient_numeric`]).

use crate::chain::{build_dynamical_matrix, ChainParams, Perturbation};
use crate::oracle;
use crate::sensing;
use crate::{Error, Result};

/// The timescales governing the non-Markovian corrections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timescales {
    /// Ballistic round-trip time `t_rt = N/J`: no signal before one pass.
    pub t_roundtrip: f64,
    /// Escape time `t_esc = (N+1)/κ` of the dc chain mode into the
    /// waveguide (its Lorentzian linewidth is `1/t_esc`).
    pub t_escape: f64,
    /// Critical window `τ*` at which the Markovian SNR reaches 1.
    pub tau_star: f64,
}

/// Computes the [`Timescales`] for a dispersive-shift measurement of
/// strength `eps0` with a total photon budget `n_tot` (odd `N`; the photon
/// budget uses the closed-form end-site fraction `Z`).
pub fn timescales(params: &ChainParams, eps0: f64, n_tot: f64) -> Result<Timescales> {
    if eps0 == 0.0 || !eps0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "eps0 must be finite and nonzero, got {eps0}"
        )));
    }
    if !n_tot.is_finite() || n_tot <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "n_tot must be finite and > 0, got {n_tot}"
        )));
    }
    let (j, a) = params.hopping();
    let z = sensing::end_site_fraction(params.n_sites, a)?;
    let nn = params.n_sites as f64;
    let kappa = params.kappa;
    let tau_star =
        (kappa / eps0).powi(2) * (-2.0 * a * (nn - 1.0)).exp() / (16.0 * z * n_tot * kappa);
    Ok(Timescales {
        t_roundtrip: nn / j,
        t_escape: (nn + 1.0) / kappa,
        tau_star,
    })
}

/// Window factor `g(u) = 1 + e^{−u} − (2/u)(1 − e^{−u})`, evaluated by its
/// Taylor series `u²/6 − u³/12 + u⁴/40` for `u < 10⁻³` where the direct
/// expression loses accuracy to cancellation. `g(0) = 0`, `g(∞) = 1`.
fn window_factor(u: f64) -> f64 {
    debug_assert!(u >= 0.0);
    if u == 0.0 {
        0.0
    } else if u < 1e-3 {
        u * u * (1.0 / 6.0 - u / 12.0 + u * u / 40.0)
    } else {
        1.0 + (-u).exp() + (2.0 / u) * (-u).exp_m1()
    }
}

/// Single-pole SNR envelope `√(τ/τ*) g(τ/t_esc)`: the infinite-`J` model in
/// which the chain's dc mode is one Lorentzian of linewidth `1/t_esc`.
pub fn snr_single_pole(tau: f64, ts: &Timescales) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    (tau / ts.tau_star).sqrt() * window_factor(tau / ts.t_escape)
}

/// Finite-`J` SNR envelope: the single-pole result gated by the ballistic
/// arrival, `Θ(τ − t_rt) √(τ/τ*) g(τ/t_esc)` with the sharp-window
/// convention `Θ(0) = 0`.
pub fn snr_finite_j(tau: f64, ts: &Timescales) -> f64 {
    if tau <= ts.t_roundtrip {
        return 0.0;
    }
    snr_single_pole(tau, ts)
}

/// How [`measurement_time`] locates the `SNR(τ_M) = 1` crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementTimeMode {
    /// Invert the analytic single-pole envelope, then clamp from below by
    /// the round-trip time: `τ_M = max(root of √(τ/τ*) g(τ/t_esc) = 1, t_rt)`.
    Analytic,
    /// Bisect the brute-force transient SNR ([`snr_transient_numeric`]) in
    /// `ln τ` to relative width 10⁻⁶.
    Numeric,
}

/// SNR of the integrated homodyne record after a finite window `τ`, by
/// exact transient integration of the full dynamics:
///
/// ```text
/// SNR(τ) = √(κ/τ) |δW_p(τ)| / √(n̄_th + ½),
/// δW_p(τ) = ∂/∂ε [∫₀^τ ⟨p̂₁(t)⟩ dt] · ε₀   (central difference, h = 10⁻⁶ κ),
/// ```
///
/// starting from an empty chain at `t = 0` with the drive (from
/// `params.beta`) and the dispersive shift `ε₀` both on. The central
/// difference is clean here because `⟨p̂₁⟩` is exactly odd in `ε` for the
/// dispersive perturbation.
pub fn snr_transient_numeric(params: &ChainParams, eps0: f64, tau: f64) -> Result<f64> {
    if !tau.is_finite() || tau <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tau must be finite and > 0, got {tau}"
        )));
    }
    let h = 1e-6 * params.kappa;
    let dm_plus = build_dynamical_matrix(params, &Perturbation::DispersiveLast { epsilon: h });
    let dm_minus = build_dynamical_matrix(params, &Perturbation::DispersiveLast { epsilon: -h });
    let w_plus = oracle::integrated_transient_means(&dm_plus, params, tau)?;
    let w_minus = oracle::integrated_transient_means(&dm_minus, params, tau)?;
    let p_row = dm_plus.p_index(1);
    let dw_p = (w_plus[p_row] - w_minus[p_row]) / (2.0 * h) * eps0;
    Ok((params.kappa / tau).sqrt() * dw_p.abs() / (params.n_th + 0.5).sqrt())
}

/// Measurement time `τ_M`: the window length at which the SNR of a
/// dispersive measurement with strength `eps0` and photon budget `n_tot`
/// reaches 1.
///
/// The drive amplitude is chosen as `β = ½√(n_tot Z κ) e^{−A(N−1)}` so the
/// steady chain holds `n_tot` coherent photons. The numeric mode bisects in
/// `ln τ` to relative tolerance 10⁻⁶ on the bracket
/// `[max(t_rt, 10⁻³/κ), 10³ max(τ*, t_esc)]`; the analytic mode inverts the
/// envelope to relative tolerance 10⁻¹². Either bracket is widened
/// decade-by-decade if the crossing sits outside it.
pub fn measurement_time(
    params: &ChainParams,
    eps0: f64,
    n_tot: f64,
    mode: MeasurementTimeMode,
) -> Result<f64> {
    let ts = timescales(params, eps0, n_tot)?;
    match mode {
        MeasurementTimeMode::Analytic => {
            let root = bisect_unit_crossing(
                |tau| Ok(snr_single_pole(tau, &ts)),
                1e-3 * ts.tau_star.min(ts.t_escape),
                1e3 * ts.tau_star.max(ts.t_escape),
                1e-12,
            )?;
            Ok(root.max(ts.t_roundtrip))
        }
        MeasurementTimeMode::Numeric => {
            let beta = sensing::beta_for_total_photons(params, n_tot)?;
            let driven = params.clone().with_beta(beta)?;
            bisect_unit_crossing(
                |tau| snr_transient_numeric(&driven, eps0, tau),
                ts.t_roundtrip.max(1e-3 / params.kappa),
                1e3 * ts.tau_star.max(ts.t_escape),
                1e-6,
            )
        }
    }
}

/// Finds `τ` with `f(τ) = 1` by bisection in `ln τ`, expanding the initial
/// bracket by decades when needed (`f` must be below 1 at the lower end and
/// above 1 at the upper end of some expanded bracket).
fn bisect_unit_crossing(
    f: impl Fn(f64) -> Result<f64>,
    lo0: f64,
    hi0: f64,
    rel_tol: f64,
) -> Result<f64> {
    let (mut lo, mut hi) = (lo0, hi0);
    let mut f_lo = f(lo)?;
    let mut expansions = 0;
    while f_lo >= 1.0 {
        hi = lo;
        lo /= 10.0;
        f_lo = f(lo)?;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Numerical(
                "SNR already above 1 at arbitrarily small windows".into(),
            ));
        }
    }
    let mut f_hi = f(hi)?;
    while f_hi < 1.0 {
        hi *= 10.0;
        f_hi = f(hi)?;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Numerical(
                "SNR never reaches 1 within the search range".into(),
            ));
        }
    }
    while hi / lo - 1.0 > rel_tol {
        let mid = (lo * hi).sqrt();
        if f(mid)? < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}
