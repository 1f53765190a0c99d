//! Python bindings for the `hnsense` simulator.
//!
//! The module mirrors the Rust API: a validated [`ChainParams`] parameter
//! object, a [`Perturbation`] tag, closed-form susceptibilities, the exact
//! scattering matrix, the linear-response sensing figures, the photon
//! budget, the non-Markovian timescales and the non-perturbative SNR.
//! Frequencies are angular, `ħ = 1`, and `κ = 1` is the conventional unit.
//!
//! Domain errors (`invalid parameter`, `config`) raise `ValueError`; all
//! other failures (instability, poles, numerical breakdown) raise
//! `RuntimeError` with the library's message.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use hnsense::chain::{
    build_dynamical_matrix, stability_margin, z2_symmetry_check, ChainParams, Perturbation,
};
use hnsense::greens::{self, Quadrature};
use hnsense::nonmarkov::{self, MeasurementTimeMode};
use hnsense::nonpert;
use hnsense::oracle::{self, NoiseModel};
use hnsense::sensing;

fn to_py(err: hnsense::Error) -> PyErr {
    match err {
        hnsense::Error::InvalidParameter(_) | hnsense::Error::Config(_) => {
            PyValueError::new_err(err.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse_quadrature(label: &str) -> PyResult<Quadrature> {
    match label.to_ascii_lowercase().as_str() {
        "x" => Ok(Quadrature::X),
        "p" => Ok(Quadrature::P),
        other => Err(PyValueError::new_err(format!(
            "quadrature must be 'x' or 'p', got '{other}'"
        ))),
    }
}

/// Validated chain parameters (immutable; the `with_*` methods return an
/// updated copy).
#[pyclass(name = "ChainParams", frozen)]
#[derive(Clone)]
struct PyChainParams {
    inner: ChainParams,
}

#[pymethods]
impl PyChainParams {
    /// Builds from the microscopic couplings: hopping `w` and two-photon
    /// drive `delta` (stability requires `w > |delta|`).
    #[new]
    #[pyo3(signature = (n_sites, w, delta, kappa = 1.0))]
    fn new(n_sites: usize, w: f64, delta: f64, kappa: f64) -> PyResult<Self> {
        Ok(Self {
            inner: ChainParams::new(n_sites, w, delta, kappa).map_err(to_py)?,
        })
    }

    /// Builds from the effective picture: Hatano–Nelson hopping `j` and
    /// amplification factor `a` per site (`w = j cosh a`, `delta = j sinh a`).
    #[staticmethod]
    #[pyo3(signature = (n_sites, j, a, kappa = 1.0))]
    fn from_amplification(n_sites: usize, j: f64, a: f64, kappa: f64) -> PyResult<Self> {
        Ok(Self {
            inner: ChainParams::from_amplification(n_sites, j, a, kappa).map_err(to_py)?,
        })
    }

    /// Copy with the coherent measurement-tone amplitude `beta` set.
    fn with_beta(&self, beta: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.clone().with_beta(beta).map_err(to_py)?,
        })
    }

    /// Copy with the thermal occupation of the input field set.
    fn with_n_th(&self, n_th: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.clone().with_n_th(n_th).map_err(to_py)?,
        })
    }

    /// Copy with the homodyne quadrature angle set (radians).
    fn with_homodyne_phi(&self, phi: f64) -> Self {
        Self {
            inner: self.inner.clone().with_homodyne_phi(phi),
        }
    }

    /// Effective `(J, A)` hopping pair.
    fn hopping(&self) -> (f64, f64) {
        self.inner.hopping()
    }

    #[getter]
    fn n_sites(&self) -> usize {
        self.inner.n_sites
    }

    #[getter]
    fn w(&self) -> f64 {
        self.inner.w
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    #[getter]
    fn n_th(&self) -> f64 {
        self.inner.n_th
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn homodyne_phi(&self) -> f64 {
        self.inner.homodyne_phi
    }

    #[getter]
    fn is_odd(&self) -> bool {
        self.inner.is_odd()
    }

    fn __repr__(&self) -> String {
        let (j, a) = self.inner.hopping();
        format!(
            "ChainParams(n_sites={}, w={}, delta={}, kappa={}, J={j:.6}, A={a:.6}, beta={}, n_th={})",
            self.inner.n_sites, self.inner.w, self.inner.delta, self.inner.kappa,
            self.inner.beta, self.inner.n_th
        )
    }
}

/// Perturbation applied to the chain end.
#[pyclass(name = "Perturbation", frozen)]
#[derive(Clone)]
struct PyPerturbation {
    inner: Perturbation,
}

#[pymethods]
impl PyPerturbation {
    /// No perturbation.
    #[staticmethod]
    fn none() -> Self {
        Self {
            inner: Perturbation::None,
        }
    }

    /// Dispersive frequency shift `epsilon` on the last site.
    #[staticmethod]
    fn dispersive_last(epsilon: f64) -> Self {
        Self {
            inner: Perturbation::DispersiveLast { epsilon },
        }
    }

    /// Tunneling of amplitude `epsilon` and phase `hop_phase` between the
    /// last and first sites (closes the chain into a ring).
    #[staticmethod]
    #[pyo3(signature = (epsilon, hop_phase = std::f64::consts::FRAC_PI_2))]
    fn boundary_hop(epsilon: f64, hop_phase: f64) -> Self {
        Self {
            inner: Perturbation::BoundaryHop { epsilon, hop_phase },
        }
    }

    fn __repr__(&self) -> String {
        format!("Perturbation({:?})", self.inner)
    }
}

/// Linear-response sensing figures for one measurement window.
#[pyclass(name = "SensingResult", frozen, get_all)]
struct PySensingResult {
    /// Integrated homodyne signal.
    signal: f64,
    /// Homodyne noise (input level).
    noise: f64,
    /// Signal-to-noise ratio.
    snr: f64,
    /// Quadrature-optimized Fisher information of the record.
    qfi: f64,
}

#[pymethods]
impl PySensingResult {
    fn __repr__(&self) -> String {
        format!(
            "SensingResult(signal={:.6e}, noise={:.6e}, snr={:.6e}, qfi={:.6e})",
            self.signal, self.noise, self.snr, self.qfi
        )
    }
}

/// Steady-state photon budget of the driven chain.
#[pyclass(name = "PhotonBudget", frozen, get_all)]
struct PyPhotonBudget {
    /// Coherent photons per site.
    coherent_per_site: Vec<f64>,
    /// Fluctuation photons per site (vacuum input).
    vacuum_per_site: Vec<f64>,
    /// Total coherent photons.
    coherent_total: f64,
    /// Total fluctuation photons.
    vacuum_total: f64,
    /// Coherent photons on the last site.
    n_last: f64,
    /// End-site fraction `Z`.
    z: f64,
}

#[pymethods]
impl PyPhotonBudget {
    fn __repr__(&self) -> String {
        format!(
            "PhotonBudget(coherent_total={:.6e}, n_last={:.6e}, z={:.6})",
            self.coherent_total, self.n_last, self.z
        )
    }
}

/// Timescales governing the non-Markovian corrections.
#[pyclass(name = "Timescales", frozen, get_all)]
struct PyTimescales {
    /// Ballistic round-trip time `N/J`.
    t_roundtrip: f64,
    /// Escape time `(N+1)/kappa` of the dc chain mode.
    t_escape: f64,
    /// Critical window at which the Markovian SNR reaches 1.
    tau_star: f64,
}

#[pymethods]
impl PyTimescales {
    fn __repr__(&self) -> String {
        format!(
            "Timescales(t_roundtrip={:.6e}, t_escape={:.6e}, tau_star={:.6e})",
            self.t_roundtrip, self.t_escape, self.tau_star
        )
    }
}

/// Exact scattering data at one frequency.
#[pyclass(name = "ScatteringMatrix", frozen)]
struct PyScatteringMatrix {
    inner: nonpert::ScatteringMatrix,
}

#[pymethods]
impl PyScatteringMatrix {
    #[getter]
    fn omega(&self) -> f64 {
        self.inner.omega
    }

    /// Unimodular amplitude `s`.
    #[getter]
    fn s(&self) -> Complex64 {
        self.inner.s
    }

    /// Same-quadrature element `R`.
    #[getter]
    fn r(&self) -> Complex64 {
        self.inner.r
    }

    /// Cross-quadrature element `T` (before the gauge weights).
    #[getter]
    fn t(&self) -> Complex64 {
        self.inner.t
    }

    /// Gauge weight carried by the `X -> P` conversion.
    #[getter]
    fn a_factor(&self) -> f64 {
        self.inner.a_factor
    }

    /// Full 2x2 quadrature map `[[R, -T/a], [T*a, R]]` as nested lists.
    fn quadrature_map(&self) -> Vec<Vec<Complex64>> {
        self.inner
            .quadrature_map()
            .iter()
            .map(|row| row.to_vec())
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "ScatteringMatrix(omega={}, s={:.6}, r={:.6}, t={:.6}, a_factor={:.6e})",
            self.inner.omega, self.inner.s, self.inner.r, self.inner.t, self.inner.a_factor
        )
    }
}

/// Bare-lattice susceptibility element (gauge-flat form, no waveguide).
#[pyfunction]
fn chi0_bare(n: usize, m: usize, omega: f64, params: &PyChainParams) -> PyResult<Complex64> {
    greens::chi0_bare(n, m, omega, &params.inner).map_err(to_py)
}

/// Waveguide-dressed susceptibility element `chi~[n, m; omega]`.
#[pyfunction]
fn chi_dressed(n: usize, m: usize, omega: f64, params: &PyChainParams) -> PyResult<Complex64> {
    greens::chi_dressed(n, m, omega, &params.inner).map_err(to_py)
}

/// Dressed element with a dispersive shift `eps0` on the last site.
#[pyfunction]
fn chi_perturbed_element(
    n: usize,
    m: usize,
    omega: f64,
    params: &PyChainParams,
    eps0: f64,
) -> PyResult<Complex64> {
    greens::chi_perturbed_element(n, m, omega, &params.inner, eps0).map_err(to_py)
}

/// Quadrature-resolved susceptibility; `alpha`/`beta` are `'x'` or `'p'`.
#[pyfunction]
fn chi_quadrature(
    alpha: &str,
    beta: &str,
    n: usize,
    m: usize,
    omega: f64,
    params: &PyChainParams,
) -> PyResult<Complex64> {
    greens::chi_quadrature(
        parse_quadrature(alpha)?,
        parse_quadrature(beta)?,
        n,
        m,
        omega,
        &params.inner,
    )
    .map_err(to_py)
}

/// Spectral abscissa of the dynamical matrix (stable iff negative).
#[pyfunction(name = "stability_margin")]
fn stability_margin_py(params: &PyChainParams, pert: &PyPerturbation) -> f64 {
    let dm = build_dynamical_matrix(&params.inner, &pert.inner);
    stability_margin(&dm)
}

/// Whether the perturbed chain retains the quadrature-flip symmetry that
/// protects the noise floor.
#[pyfunction(name = "z2_symmetry_check")]
fn z2_symmetry_check_py(params: &PyChainParams, pert: &PyPerturbation) -> bool {
    z2_symmetry_check(&params.inner, &pert.inner)
}

/// End-site fraction `Z(N, A)` of the coherent photon budget (odd `N`).
#[pyfunction]
fn end_site_fraction(n_sites: usize, a: f64) -> PyResult<f64> {
    sensing::end_site_fraction(n_sites, a).map_err(to_py)
}

/// Steady-state photon budget of the driven unperturbed chain.
#[pyfunction]
fn photon_budget(params: &PyChainParams) -> PyResult<PyPhotonBudget> {
    let b = sensing::photon_budget(&params.inner).map_err(to_py)?;
    Ok(PyPhotonBudget {
        coherent_per_site: b.coherent_per_site,
        vacuum_per_site: b.vacuum_per_site,
        coherent_total: b.coherent_total,
        vacuum_total: b.vacuum_total,
        n_last: b.n_last,
        z: b.z,
    })
}

/// Drive amplitude that places `n_tot` coherent photons in the chain.
#[pyfunction]
fn beta_for_total_photons(params: &PyChainParams, n_tot: f64) -> PyResult<f64> {
    sensing::beta_for_total_photons(&params.inner, n_tot).map_err(to_py)
}

/// First-order output-quadrature response `(dX, dP)` per unit strength.
#[pyfunction]
fn first_order_response(params: &PyChainParams, pert: &PyPerturbation) -> PyResult<(f64, f64)> {
    sensing::first_order_response(&params.inner, &pert.inner).map_err(to_py)
}

/// Linear-response homodyne signal, noise, SNR and QFI for a dispersive
/// shift `epsilon` measured over a window `tau`.
#[pyfunction]
fn snr_qfi_linear(params: &PyChainParams, epsilon: f64, tau: f64) -> PyResult<PySensingResult> {
    let r = sensing::snr_qfi_linear(&params.inner, epsilon, tau).map_err(to_py)?;
    Ok(PySensingResult {
        signal: r.signal,
        noise: r.noise,
        snr: r.snr,
        qfi: r.qfi,
    })
}

/// Sensing figures for an arbitrary perturbation (numeric response).
#[pyfunction]
fn snr_nhse(params: &PyChainParams, pert: &PyPerturbation, tau: f64) -> PyResult<PySensingResult> {
    let r = sensing::snr_nhse(&params.inner, &pert.inner, tau).map_err(to_py)?;
    Ok(PySensingResult {
        signal: r.signal,
        noise: r.noise,
        snr: r.snr,
        qfi: r.qfi,
    })
}

/// Zero-frequency output noise `(S_xx, S_pp)` from the exact Lyapunov solve.
#[pyfunction]
fn output_noise_zero_frequency(
    params: &PyChainParams,
    pert: &PyPerturbation,
) -> PyResult<(f64, f64)> {
    let dm = build_dynamical_matrix(&params.inner, &pert.inner);
    let noise = NoiseModel::new(params.inner.n_th).map_err(to_py)?;
    oracle::output_noise_zero_frequency(&dm, &noise, &params.inner).map_err(to_py)
}

/// Non-Markovian timescales for a dispersive measurement.
#[pyfunction]
fn timescales(params: &PyChainParams, eps0: f64, n_tot: f64) -> PyResult<PyTimescales> {
    let ts = nonmarkov::timescales(&params.inner, eps0, n_tot).map_err(to_py)?;
    Ok(PyTimescales {
        t_roundtrip: ts.t_roundtrip,
        t_escape: ts.t_escape,
        tau_star: ts.tau_star,
    })
}

/// Measurement time `tau_M` (window with SNR = 1); `mode` is `'analytic'`
/// (single-pole envelope clamped by the round-trip time) or `'numeric'`
/// (brute-force transient bisection).
#[pyfunction]
#[pyo3(signature = (params, eps0, n_tot, mode = "analytic"))]
fn measurement_time(params: &PyChainParams, eps0: f64, n_tot: f64, mode: &str) -> PyResult<f64> {
    let mode = match mode.to_ascii_lowercase().as_str() {
        "analytic" => MeasurementTimeMode::Analytic,
        "numeric" => MeasurementTimeMode::Numeric,
        other => {
            return Err(PyValueError::new_err(format!(
                "mode must be 'analytic' or 'numeric', got '{other}'"
            )))
        }
    };
    nonmarkov::measurement_time(&params.inner, eps0, n_tot, mode).map_err(to_py)
}

/// SNR of the integrated record after a finite window, by exact transient
/// integration of the full dynamics.
#[pyfunction]
fn snr_transient_numeric(params: &PyChainParams, eps0: f64, tau: f64) -> PyResult<f64> {
    nonmarkov::snr_transient_numeric(&params.inner, eps0, tau).map_err(to_py)
}

/// Exact scattering matrix at frequency `omega` with a dispersive shift
/// `eps0` on the last site.
#[pyfunction]
fn scattering_matrix(
    omega: f64,
    params: &PyChainParams,
    eps0: f64,
) -> PyResult<PyScatteringMatrix> {
    Ok(PyScatteringMatrix {
        inner: nonpert::scattering_matrix(omega, &params.inner, eps0).map_err(to_py)?,
    })
}

/// Non-perturbative SNR at finite `eps0` under a total photon budget.
#[pyfunction]
fn snr_nonpert(params: &PyChainParams, eps0: f64, tau: f64, n_tot: f64) -> PyResult<f64> {
    nonpert::snr_nonpert(&params.inner, eps0, tau, n_tot).map_err(to_py)
}

/// End-site quality factor `Q` (requires the drive amplitude to be set).
#[pyfunction]
fn q_factor(params: &PyChainParams, eps0: f64) -> PyResult<f64> {
    nonpert::q_factor(&params.inner, eps0).map_err(to_py)
}

/// Continuous optimizer `N*` of the fixed-budget SNR over the chain length.
#[pyfunction]
fn optimal_site_number(a: f64, eps0: f64, kappa: f64) -> PyResult<f64> {
    nonpert::optimal_site_number(a, eps0, kappa).map_err(to_py)
}

#[pymodule]
fn hnsense_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChainParams>()?;
    m.add_class::<PyPerturbation>()?;
    m.add_class::<PySensingResult>()?;
    m.add_class::<PyPhotonBudget>()?;
    m.add_class::<PyTimescales>()?;
    m.add_class::<PyScatteringMatrix>()?;
    m.add_function(wrap_pyfunction!(chi0_bare, m)?)?;
    m.add_function(wrap_pyfunction!(chi_dressed, m)?)?;
    m.add_function(wrap_pyfunction!(chi_perturbed_element, m)?)?;
    m.add_function(wrap_pyfunction!(chi_quadrature, m)?)?;
    m.add_function(wrap_pyfunction!(stability_margin_py, m)?)?;
    m.add_function(wrap_pyfunction!(z2_symmetry_check_py, m)?)?;
    m.add_function(wrap_pyfunction!(end_site_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(photon_budget, m)?)?;
    m.add_function(wrap_pyfunction!(beta_for_total_photons, m)?)?;
    m.add_function(wrap_pyfunction!(first_order_response, m)?)?;
    m.add_function(wrap_pyfunction!(snr_qfi_linear, m)?)?;
    m.add_function(wrap_pyfunction!(snr_nhse, m)?)?;
    m.add_function(wrap_pyfunction!(output_noise_zero_frequency, m)?)?;
    m.add_function(wrap_pyfunction!(timescales, m)?)?;
    m.add_function(wrap_pyfunction!(measurement_time, m)?)?;
    m.add_function(wrap_pyfunction!(snr_transient_numeric, m)?)?;
    m.add_function(wrap_pyfunction!(scattering_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(snr_nonpert, m)?)?;
    m.add_function(wrap_pyfunction!(q_factor, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_site_number, m)?)?;
    Ok(())
}
