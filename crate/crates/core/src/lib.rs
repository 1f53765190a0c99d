//! Simulator for quantum sensing with driven non-Hermitian bosonic lattices.
//!
//! The physical system is a one-dimensional chain of `N` bosonic modes with
//! nearest-neighbour beam-splitter hopping `w` and two-mode-squeezing pairing
//! `Δ` (both purely imaginary in the site basis),
//!
//! ```text
//! Ĥ_B = Σ_{n=1}^{N-1} ( i w â†_{n+1} â_n + i Δ â†_{n+1} â†_n + h.c. ),
//! ```
//!
//! with the first site coupled at rate `κ` to a one-dimensional waveguide that
//! carries a coherent measurement tone of amplitude `β`. In the quadrature
//! basis `x̂ = (â + â†)/√2`, `p̂ = -i(â - â†)/√2` the dynamics decouple into two
//! copies of a Hatano–Nelson chain with asymmetric hopping rates `J e^{±A}`,
//!
//! ```text
//! J = √(w² - Δ²),       A = ½ ln[(w + Δ)/(w - Δ)],
//! ```
//!
//! where the `x` quadratures amplify left→right and the `p` quadratures
//! right→left. A weak perturbation coupled to the far end of the chain imprints
//! itself on the waveguide output with gain `e^{A(N-1)}`, while the reflected
//! noise stays at the vacuum level — the basis of the exponentially enhanced
//! signal-to-noise ratios computed by this crate.
//!
//! # Units and conventions
//!
//! * `ħ = 1`; every rate is expressed in units of the waveguide coupling `κ`
//!   (so `kappa = 1.0` is the conventional choice, but nothing assumes it).
//! * State vectors are ordered `(x₁ … x_N, p₁ … p_N)`; sites are 1-based in
//!   formulas and function arguments, 0-based only inside matrix storage.
//! * Susceptibilities follow `χ[ω] = ∫₀^∞ dt e^{iωt} e^{Mt} = (-iω I - M)⁻¹`,
//!   fixed by the single-site anchor `χ̃[1,1;ω] = i/(ω + iκ/2)`.
//! * Input noise operators satisfy `⟨X̂_in(t) X̂_in(t')⟩ = (n_th + ½) δ(t-t')`;
//!   homodyne measurement noise is quadrature-independent.
//!
//! # Module map
//!
//! * [`chain`] — chain parameters, hopping/amplification conversions, the
//!   `2N × 2N` quadrature dynamical matrix, stability, ℤ₂ symmetry check.
//! * [`greens`] — closed-form lattice Green's functions (Chebyshev form),
//!   waveguide-dressed and perturbation-dressed variants.
//! * [`oracle`] — brute-force numerical ground truth: resolvent inversion,
//!   steady states, Lyapunov covariances, transient propagation.
//! * [`sensing`] — photon budgets, homodyne signal/noise, linear-response
//!   SNR/QFI for dispersive and boundary-hop (skin-effect) perturbations.
//! * [`nonmarkov`] — finite-bandwidth corrections: chain timescales,
//!   single-pole and finite-`J` SNR envelopes, measurement-time solvers.
//! * [`nonpert`] — exact scattering matrix at finite perturbation strength,
//!   output series coefficients, non-perturbative SNR and the optimal
//!   amplification/site-number trade-off.
//! * [`cli`] — config parsing, parameter sweeps and CSV emission for the
//!   `hnsense` binary.
//! * [`verify`] — cross-checks of every closed form against the oracle,
//!   exposed both to tests and to the `hnsense verify` subcommand.

pub mod chain;
pub mod cli;
pub mod greens;
mod linalg;
pub mod nonmarkov;
pub mod nonpert;
pub mod oracle;
pub mod sensing;
pub mod verify;

/// Crate-wide error type.
///
/// Variants distinguish caller mistakes (bad parameters, unstable chains,
/// malformed configs) from genuine numerical failures so the CLI can map them
/// to distinct exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter violated a documented precondition (domain error).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The requested chain is dynamically unstable (`w ≤ |Δ|`, or a
    /// perturbation pushed an eigenvalue into the right half-plane).
    #[error("unstable dynamics: {0}")]
    Unstable(String),

    /// Evaluation hit a pole of a Green's function (denominator below the
    /// pole threshold `1e-300`).
    #[error("Green's function pole at ω = {omega}: {context}")]
    Pole { omega: f64, context: String },

    /// A numerical routine failed to converge or produced a non-finite
    /// result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A requested expansion order is not implemented.
    #[error("unsupported order {0} (implemented orders: 0..=4)")]
    UnsupportedOrder(usize),

    /// Configuration file problems (missing keys, bad types, unknown task).
    #[error("config error: {0}")]
    Config(String),

    /// I/O failure while reading configs or writing results.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenient result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
