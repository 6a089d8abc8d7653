//! Monodromy matrices and Floquet multipliers of the variational system
//! along a periodic orbit, for a complex per-species stability parameter.
//!
//! The variational coefficient matrix is A(t) = J(y0(t)) + diag(Omega),
//! where J is the model Jacobian evaluated on the orbit. Integrating the
//! matrix system over one period from the identity gives the monodromy;
//! its eigenvalues are the multipliers. A multiplier modulus above 1 means
//! the synchronized/uniform oscillation is unstable for that parameter.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::cubic;
use crate::models::{self, LVParams};
use crate::ode::{self, IntegratorConfig, OdeError};
use crate::orbit::{OrbitError, PeriodicOrbit};

/// Verdict margin: unstable iff the leading modulus exceeds 1 by more than
/// this, absorbing closure and integration error around the neutral
/// time-shift multiplier.
pub const INSTABILITY_MARGIN: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum FloquetError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error("eigenvalue solve failed (non-finite monodromy or roots)")]
    EigenFailure,
    #[error("onset not bracketed in alpha range [{lo}, {hi}]")]
    NoOnset { lo: f64, hi: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Per-species additive diagonal shifts of the variational system.
///
/// The diffusive case is omega_i = -d_i k^2; the network case is
/// omega_i = D_i lambda for a coupling eigenvalue lambda.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityParameter {
    pub omega: [Complex64; 3],
}

impl StabilityParameter {
    pub fn zero() -> Self {
        Self {
            omega: [Complex64::new(0.0, 0.0); 3],
        }
    }

    pub fn per_species(omega: [Complex64; 3]) -> Self {
        Self { omega }
    }

    /// Diffusive shift -d_i k^2 for squared wavenumber `k2`.
    pub fn from_wavenumber(d: [f64; 3], k2: f64) -> Self {
        Self {
            omega: [
                Complex64::new(-d[0] * k2, 0.0),
                Complex64::new(-d[1] * k2, 0.0),
                Complex64::new(-d[2] * k2, 0.0),
            ],
        }
    }

    /// Network shift D_i * lambda for a coupling eigenvalue.
    pub fn from_coupling_eigenvalue(coupling: [f64; 3], lambda: Complex64) -> Self {
        Self {
            omega: [coupling[0] * lambda, coupling[1] * lambda, coupling[2] * lambda],
        }
    }

    /// A single complex parameter distributed by per-species ratios.
    pub fn from_ratios(omega: Complex64, ratios: [f64; 3]) -> Self {
        Self {
            omega: [omega * ratios[0], omega * ratios[1], omega * ratios[2]],
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            omega: [self.omega[0].conj(), self.omega[1].conj(), self.omega[2].conj()],
        }
    }

    pub fn sum(&self) -> Complex64 {
        self.omega[0] + self.omega[1] + self.omega[2]
    }
}

/// Ordered Floquet multipliers at one stability parameter.
#[derive(Clone, Copy, Debug)]
pub struct FloquetSpectrum {
    /// Multipliers by descending modulus (ties: descending real part, then
    /// descending imaginary part).
    pub multipliers: [Complex64; 3],
    pub parameter: StabilityParameter,
    pub leading_modulus: f64,
}

impl FloquetSpectrum {
    pub fn is_unstable(&self, margin: f64) -> bool {
        self.leading_modulus > 1.0 + margin
    }
}

type Matrix3c = [[Complex64; 3]; 3];

fn pack(m: &Matrix3c, out: &mut [f64; 18]) {
    for i in 0..3 {
        for j in 0..3 {
            let idx = 2 * (3 * i + j);
            out[idx] = m[i][j].re;
            out[idx + 1] = m[i][j].im;
        }
    }
}

fn unpack(y: &[f64]) -> Matrix3c {
    let mut m = [[Complex64::new(0.0, 0.0); 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            let idx = 2 * (3 * i + j);
            *entry = Complex64::new(y[idx], y[idx + 1]);
        }
    }
    m
}

/// Integrate the variational matrix system d(Phi)/dt = (J(y0(t)) + diag
/// omega) Phi over `t_span` from the initial matrix `phi0`, with base-state
/// coefficients supplied by `coeffs`. Componentwise real/imaginary packing,
/// 18 real states.
fn integrate_variational<F: FnMut(f64) -> [f64; 3]>(
    mut coeffs: F,
    params: &LVParams,
    omega: [Complex64; 3],
    t_span: [f64; 2],
    phi0: &Matrix3c,
    cfg: &IntegratorConfig,
) -> Result<Matrix3c, OdeError> {
    let model = models::lv3_specific(params);
    let mut jac = [0.0f64; 9];
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let base = coeffs(t);
        model.jacobian(&base, &mut jac);
        // Unpack Phi, apply A = J + diag(omega), repack.
        for col in 0..3 {
            for row in 0..3 {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..3 {
                    let idx = 2 * (3 * k + col);
                    let phi = Complex64::new(y[idx], y[idx + 1]);
                    let mut a = Complex64::new(jac[3 * row + k], 0.0);
                    if row == k {
                        a += omega[row];
                    }
                    acc += a * phi;
                }
                let idx = 2 * (3 * row + col);
                dy[idx] = acc.re;
                dy[idx + 1] = acc.im;
            }
        }
    };
    let mut y0 = [0.0f64; 18];
    pack(phi0, &mut y0);
    let yt = ode::integrate_final(rhs, &y0, t_span, cfg)?;
    Ok(unpack(&yt))
}

const IDENTITY3: Matrix3c = {
    let zero = Complex64 { re: 0.0, im: 0.0 };
    let one = Complex64 { re: 1.0, im: 0.0 };
    [
        [one, zero, zero],
        [zero, one, zero],
        [zero, zero, one],
    ]
};

/// Monodromy over one period from identity columns.
pub(crate) fn variational_monodromy<F: FnMut(f64) -> [f64; 3]>(
    coeffs: F,
    params: &LVParams,
    period: f64,
    omega: [Complex64; 3],
    cfg: &IntegratorConfig,
) -> Result<Matrix3c, OdeError> {
    integrate_variational(coeffs, params, omega, [0.0, period], &IDENTITY3, cfg)
}

/// Monodromy matrix of the orbit's variational system at `param`.
pub fn monodromy(
    orbit: &PeriodicOrbit,
    param: &StabilityParameter,
    cfg: &IntegratorConfig,
) -> Result<[[Complex64; 3]; 3], FloquetError> {
    let mut cursor = orbit.cursor();
    Ok(variational_monodromy(
        |t| cursor.eval3(t),
        orbit.params(),
        orbit.period(),
        param.omega,
        cfg,
    )?)
}

fn spectrum_of_matrix(
    m: &[[Complex64; 3]; 3],
    param: StabilityParameter,
) -> Result<FloquetSpectrum, FloquetError> {
    if m.iter()
        .flatten()
        .any(|e| !e.re.is_finite() || !e.im.is_finite())
    {
        return Err(FloquetError::EigenFailure);
    }
    let multipliers = cubic::eigenvalues_3x3(m);
    if multipliers
        .iter()
        .any(|e| !e.re.is_finite() || !e.im.is_finite())
    {
        return Err(FloquetError::EigenFailure);
    }
    Ok(FloquetSpectrum {
        multipliers,
        parameter: param,
        leading_modulus: multipliers[0].norm(),
    })
}

/// Floquet multipliers at one stability parameter, ordered by modulus.
pub fn floquet_spectrum(
    orbit: &PeriodicOrbit,
    param: &StabilityParameter,
    cfg: &IntegratorConfig,
) -> Result<FloquetSpectrum, FloquetError> {
    let m = monodromy(orbit, param, cfg)?;
    spectrum_of_matrix(&m, *param)
}

/// One point of a branch-matched multiplier curve.
#[derive(Clone, Copy, Debug)]
pub struct CurvePoint {
    pub k2: f64,
    /// Multipliers in branch order (continuity-matched to the previous
    /// grid point, not modulus-sorted).
    pub branches: [Complex64; 3],
    pub leading_modulus: f64,
}

/// Multiplier branches along a squared-wavenumber grid.
#[derive(Clone, Debug, Default)]
pub struct SpectrumCurve {
    pub points: Vec<CurvePoint>,
    /// Grid values where two branch assignments were closer than the
    /// ambiguity threshold (branch collision points).
    pub ambiguous_at: Vec<f64>,
}

impl SpectrumCurve {
    pub fn max_leading_modulus_excluding_origin(&self) -> f64 {
        self.points
            .iter()
            .filter(|p| p.k2 > 0.0)
            .map(|p| p.leading_modulus)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

const PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Assignment of `next` to `prev` minimizing total complex distance.
/// Returns (permuted next, ambiguity flag).
fn match_branches(prev: &[Complex64; 3], next: &[Complex64; 3]) -> ([Complex64; 3], bool) {
    let mut best = f64::INFINITY;
    let mut second = f64::INFINITY;
    let mut best_perm = &PERMS[0];
    for perm in &PERMS {
        let d: f64 = (0..3).map(|i| (prev[i] - next[perm[i]]).norm()).sum();
        if d < best {
            second = best;
            best = d;
            best_perm = perm;
        } else if d < second {
            second = d;
        }
    }
    (
        [next[best_perm[0]], next[best_perm[1]], next[best_perm[2]]],
        (second - best) < 1e-8,
    )
}

/// Multiplier branches versus squared wavenumber for diffusivities `d`,
/// with branches matched between neighboring grid points by the
/// minimal-distance permutation.
pub fn dispersion_curve(
    orbit: &PeriodicOrbit,
    d: [f64; 3],
    k2_grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<SpectrumCurve, FloquetError> {
    if k2_grid.is_empty() || k2_grid[0] != 0.0 {
        return Err(FloquetError::InvalidInput(
            "k2 grid must start at 0".into(),
        ));
    }
    if k2_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FloquetError::InvalidInput(
            "k2 grid must be strictly increasing".into(),
        ));
    }
    let spectra: Vec<FloquetSpectrum> = k2_grid
        .par_iter()
        .map(|&k2| {
            let param = StabilityParameter::from_wavenumber(d, k2);
            floquet_spectrum(orbit, &param, cfg)
        })
        .collect::<Result<_, _>>()?;

    let mut points = Vec::with_capacity(spectra.len());
    let mut ambiguous_at = Vec::new();
    let mut prev = spectra[0].multipliers;
    for (i, s) in spectra.iter().enumerate() {
        let (matched, ambiguous) = if i == 0 {
            (s.multipliers, false)
        } else {
            match_branches(&prev, &s.multipliers)
        };
        if ambiguous {
            ambiguous_at.push(k2_grid[i]);
        }
        prev = matched;
        points.push(CurvePoint {
            k2: k2_grid[i],
            branches: matched,
            leading_modulus: s.leading_modulus,
        });
    }
    Ok(SpectrumCurve {
        points,
        ambiguous_at,
    })
}

/// Uniform grid helper: n+1 points covering [0, k2_max].
pub fn k2_grid(k2_max: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| k2_max * i as f64 / n as f64).collect()
}

/// Golden-section maximization of `f` on [lo, hi].
fn golden_max(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Location and leading multiplier of the most unstable wavenumber.
struct BandPeak {
    k2: f64,
    multiplier: Complex64,
    excess: f64,
}

fn band_peak(
    orbit: &PeriodicOrbit,
    d: [f64; 3],
    k2_max: f64,
    cfg: &IntegratorConfig,
) -> Result<BandPeak, FloquetError> {
    let grid = k2_grid(k2_max, 96);
    let curve = dispersion_curve(orbit, d, &grid, cfg)?;
    let (i_max, _) = curve
        .points
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| {
            a.1.leading_modulus
                .partial_cmp(&b.1.leading_modulus)
                .unwrap()
        })
        .unwrap();
    let lo = curve.points[i_max.saturating_sub(1)].k2;
    let hi = curve.points[(i_max + 1).min(curve.points.len() - 1)].k2;
    let modulus_at = |k2: f64| -> f64 {
        let param = StabilityParameter::from_wavenumber(d, k2);
        floquet_spectrum(orbit, &param, cfg)
            .map(|s| s.leading_modulus)
            .unwrap_or(f64::NEG_INFINITY)
    };
    let (k2_star, peak) = golden_max(modulus_at, lo, hi, 24);
    let spectrum = floquet_spectrum(
        orbit,
        &StabilityParameter::from_wavenumber(d, k2_star),
        cfg,
    )?;
    Ok(BandPeak {
        k2: k2_star,
        multiplier: spectrum.multipliers[0],
        excess: peak - 1.0,
    })
}

/// Critical onset of the finite-wavenumber instability.
#[derive(Clone, Copy, Debug)]
pub struct CriticalOnset {
    pub alpha_star: f64,
    pub k_star: f64,
    pub k2_star: f64,
    /// Leading multiplier at the onset peak (real, near -1 for the
    /// period-doubling route).
    pub multiplier: Complex64,
}

/// Bisection in alpha on the condition max_k |leading multiplier| = 1.
///
/// Builds the orbit family internally at fixed `gamma`. Errors with
/// `NoOnset` when the condition does not change sign across the range.
pub fn critical_alpha(
    gamma: f64,
    d: [f64; 3],
    alpha_range: [f64; 2],
    cfg: &IntegratorConfig,
) -> Result<CriticalOnset, FloquetError> {
    let [mut lo, mut hi] = alpha_range;
    if !(lo < hi) {
        return Err(FloquetError::InvalidInput("empty alpha range".into()));
    }
    let k2_max = if d[0] > 0.0 { 1.2 / d[0] } else { 1.2 };
    let peak_at = |alpha: f64| -> Result<BandPeak, FloquetError> {
        let orbit = crate::orbit::find_orbit(&LVParams::new(alpha, gamma), None, None, cfg)?;
        band_peak(&orbit, d, k2_max, cfg)
    };

    let peak_lo = peak_at(lo)?;
    let mut onset_peak = peak_at(hi)?;
    if !(peak_lo.excess < 0.0 && onset_peak.excess > 0.0) {
        return Err(FloquetError::NoOnset { lo, hi });
    }

    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        let peak_mid = peak_at(mid)?;
        if peak_mid.excess >= 0.0 {
            hi = mid;
            onset_peak = peak_mid;
        } else {
            lo = mid;
        }
    }

    Ok(CriticalOnset {
        alpha_star: 0.5 * (lo + hi),
        k_star: onset_peak.k2.sqrt(),
        k2_star: onset_peak.k2,
        multiplier: onset_peak.multiplier,
    })
}

/// Modified Gram-Schmidt QR of a 3x3 complex matrix (columns). Returns the
/// unitary factor and the sum of logs of the (real, positive) R diagonal.
fn qr3(m: &Matrix3c) -> (Matrix3c, f64) {
    // Work on columns: v[j][i] = m[i][j].
    let mut v = [[Complex64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            v[j][i] = m[i][j];
        }
    }
    let mut log_r = 0.0;
    for j in 0..3 {
        for i in 0..j {
            let mut proj = Complex64::new(0.0, 0.0);
            for k in 0..3 {
                proj += v[i][k].conj() * v[j][k];
            }
            for k in 0..3 {
                let correction = proj * v[i][k];
                v[j][k] -= correction;
            }
        }
        let norm: f64 = v[j].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        log_r += norm.ln();
        for k in 0..3 {
            v[j][k] /= norm;
        }
    }
    let mut q = [[Complex64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            q[i][j] = v[j][i];
        }
    }
    (q, log_r)
}

/// Complex log of det M computed stably: the variational system is
/// integrated in sub-intervals with a QR re-orthonormalization after each,
/// accumulating log R diagonals. Forming det M directly from the monodromy
/// entries is cancellation-limited once the contracting direction drops
/// below the entry scale times machine epsilon.
fn stabilized_log_det(
    orbit: &PeriodicOrbit,
    param: &StabilityParameter,
    cfg: &IntegratorConfig,
    chunks: usize,
) -> Result<Complex64, FloquetError> {
    let period = orbit.period();
    let mut basis = IDENTITY3;
    let mut log_det = Complex64::new(0.0, 0.0);
    let mut cursor = orbit.cursor();
    for k in 0..chunks {
        let t0 = period * k as f64 / chunks as f64;
        let t1 = period * (k + 1) as f64 / chunks as f64;
        let y = integrate_variational(
            |t| cursor.eval3(t),
            orbit.params(),
            param.omega,
            [t0, t1],
            &basis,
            cfg,
        )?;
        let (q, log_r) = qr3(&y);
        log_det += log_r;
        basis = q;
    }
    // det of the final unitary factor contributes only a phase.
    log_det += cubic::det_3x3(&basis).ln();
    Ok(log_det)
}

/// Deviation from the Abel-Liouville identity: the complex log distance
/// between det M and exp(T sum(omega) + integral of trace J dt).
/// Near zero for a correctly integrated monodromy.
pub fn abel_liouville_gap(
    orbit: &PeriodicOrbit,
    param: &StabilityParameter,
    cfg: &IntegratorConfig,
) -> Result<f64, FloquetError> {
    let model = models::lv3_specific(orbit.params());
    let mut jac = [0.0f64; 9];
    let trace_integral = orbit.integral_of(|_t, y| {
        model.jacobian(y, &mut jac);
        jac[0] + jac[4] + jac[8]
    });
    let z = param.sum() * orbit.period() + trace_integral;
    let log_det = stabilized_log_det(orbit, param, cfg, 64)?;
    let diff = log_det - z;
    let two_pi = 2.0 * std::f64::consts::PI;
    let im = diff.im - two_pi * (diff.im / two_pi).round();
    Ok((diff.re * diff.re + im * im).sqrt())
}

/// Eigenvector of a 3x3 complex matrix for the (simple) eigenvalue `mu`:
/// the largest cross product of two rows of M - mu I.
pub fn eigenvector_3x3(m: &[[Complex64; 3]; 3], mu: Complex64) -> [Complex64; 3] {
    let mut s = *m;
    for i in 0..3 {
        s[i][i] -= mu;
    }
    let cross = |a: &[Complex64; 3], b: &[Complex64; 3]| -> [Complex64; 3] {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let candidates = [
        cross(&s[0], &s[1]),
        cross(&s[0], &s[2]),
        cross(&s[1], &s[2]),
    ];
    let best = candidates
        .into_iter()
        .max_by(|a, b| {
            let na: f64 = a.iter().map(|c| c.norm_sqr()).sum();
            let nb: f64 = b.iter().map(|c| c.norm_sqr()).sum();
            na.partial_cmp(&nb).unwrap()
        })
        .unwrap();
    let norm: f64 = best.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    [best[0] / norm, best[1] / norm, best[2] / norm]
}

/// Sample the variational solution started from `v0` over a number of
/// periods (the coefficients repeat with the orbit period). Returns
/// uniformly spaced times and the complex perturbation components.
pub fn mode_series(
    orbit: &PeriodicOrbit,
    param: &StabilityParameter,
    v0: [Complex64; 3],
    periods: f64,
    dt: f64,
    cfg: &IntegratorConfig,
) -> Result<(Vec<f64>, Vec<[Complex64; 3]>), FloquetError> {
    let model = models::lv3_specific(orbit.params());
    let mut cursor = orbit.cursor();
    let mut jac = [0.0f64; 9];
    let omega = param.omega;
    let rhs = move |t: f64, y: &[f64], dy: &mut [f64]| {
        let base = cursor.eval3(t);
        model.jacobian(&base, &mut jac);
        for row in 0..3 {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..3 {
                let phi = Complex64::new(y[2 * k], y[2 * k + 1]);
                let mut a = Complex64::new(jac[3 * row + k], 0.0);
                if row == k {
                    a += omega[row];
                }
                acc += a * phi;
            }
            dy[2 * row] = acc.re;
            dy[2 * row + 1] = acc.im;
        }
    };
    let y0 = [
        v0[0].re, v0[0].im, v0[1].re, v0[1].im, v0[2].re, v0[2].im,
    ];
    let t_end = periods * orbit.period();
    let sampled = ode::integrate_sampled(rhs, &y0, [0.0, t_end], dt, cfg)?;
    let series = sampled
        .states
        .iter()
        .map(|s| {
            [
                Complex64::new(s[0], s[1]),
                Complex64::new(s[2], s[3]),
                Complex64::new(s[4], s[5]),
            ]
        })
        .collect();
    Ok((sampled.times, series))
}

/// CSV export of a dispersion curve: k2 plus Re/Im/modulus per branch.
pub fn write_dispersion_csv<W: std::io::Write>(
    curve: &SpectrumCurve,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(
        w,
        "k2,re_mu_1,im_mu_1,abs_mu_1,re_mu_2,im_mu_2,abs_mu_2,re_mu_3,im_mu_3,abs_mu_3"
    )?;
    for p in &curve.points {
        write!(w, "{}", p.k2)?;
        for b in &p.branches {
            write!(w, ",{},{},{}", b.re, b.im, b.norm())?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::models::LVParams;
    use crate::orbit::find_orbit;
    use std::sync::OnceLock;

    /// Shared reference orbit; building it is the expensive part of these
    /// tests.
    pub(crate) fn reference_orbit() -> &'static PeriodicOrbit {
        static ORBIT: OnceLock<PeriodicOrbit> = OnceLock::new();
        ORBIT.get_or_init(|| {
            find_orbit(
                &LVParams::new(2.3427, 0.5),
                None,
                None,
                &IntegratorConfig::default(),
            )
            .unwrap()
        })
    }

    #[test]
    fn time_shift_multiplier_at_zero_parameter() {
        let orbit = reference_orbit();
        let cfg = IntegratorConfig::default();
        let param = StabilityParameter::zero();
        let m = monodromy(orbit, &param, &cfg).unwrap();
        let s = spectrum_of_matrix(&m, param).unwrap();
        let neutral = s
            .multipliers
            .iter()
            .map(|mu| (mu - Complex64::new(1.0, 0.0)).norm())
            .fold(f64::INFINITY, f64::min);
        assert!(neutral < 1e-6, "neutral multiplier distance {neutral:e}");
        // Second multiplier positive below 1, third near zero.
        assert!(s.multipliers[1].re > 0.0 && s.multipliers[1].norm() < 1.0);
        assert!(s.multipliers[2].norm() < 1e-3);

        // The orbit tangent is the eigenvector of the neutral multiplier.
        let model = models::lv3_specific(orbit.params());
        let f0 = model.rhs_vec(&orbit.initial_state());
        let scale = f0.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut worst = 0.0f64;
        for i in 0..3 {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..3 {
                acc += m[i][k] * Complex64::new(f0[k], 0.0);
            }
            worst = worst.max((acc - Complex64::new(f0[i], 0.0)).norm());
        }
        assert!(worst / scale < 1e-6, "tangent not invariant: {worst:e}");
    }

    #[test]
    fn conjugation_symmetry() {
        let orbit = reference_orbit();
        let cfg = IntegratorConfig::default();
        let param = StabilityParameter::from_ratios(Complex64::new(-0.2, -0.15), [1.0, 0.0, 0.0]);
        let m = monodromy(orbit, &param, &cfg).unwrap();
        let mc = monodromy(orbit, &param.conj(), &cfg).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (m[i][j].conj() - mc[i][j]).norm() < 1e-10,
                    "entry ({i},{j}) not conjugate"
                );
            }
        }
        let s = spectrum_of_matrix(&m, param).unwrap();
        let sc = spectrum_of_matrix(&mc, param.conj()).unwrap();
        for mu in s.multipliers {
            let d = sc
                .multipliers
                .iter()
                .map(|x| (x - mu.conj()).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(d < 1e-8, "conjugate multiplier missing: {mu}");
        }
    }

    #[test]
    fn determinant_identity_holds() {
        let orbit = reference_orbit();
        let cfg = IntegratorConfig::default();
        for omega in [
            StabilityParameter::zero(),
            StabilityParameter::from_wavenumber([1.0, 0.0, 0.0], 0.3),
            StabilityParameter::from_ratios(Complex64::new(-0.1, -0.08), [1.0, 0.5, 0.2]),
        ] {
            let gap = abel_liouville_gap(orbit, &omega, &cfg).unwrap();
            let z_scale = (omega.sum() * orbit.period()).norm().max(1.0);
            assert!(gap < 1e-6 * z_scale, "abel gap {gap:e}");
        }
    }

    #[test]
    fn strong_damping_kills_all_multipliers() {
        let orbit = reference_orbit();
        let cfg = IntegratorConfig::default();
        let param = StabilityParameter::per_species([Complex64::new(-100.0, 0.0); 3]);
        let s = floquet_spectrum(orbit, &param, &cfg).unwrap();
        assert!(
            s.leading_modulus < 1e-3,
            "leading modulus {}",
            s.leading_modulus
        );
    }

    #[test]
    fn period_doubling_multiplier_near_minus_one() {
        let orbit = reference_orbit();
        let cfg = IntegratorConfig::default();
        // Reported critical wavenumber k ~ 0.62, k^2 ~ 0.3844.
        let param = StabilityParameter::from_wavenumber([1.0, 0.0, 0.0], 0.3844);
        let s = floquet_spectrum(orbit, &param, &cfg).unwrap();
        let mu = s.multipliers[0];
        assert!((mu.re + 1.0).abs() < 2e-2, "Re mu = {}", mu.re);
        assert!(mu.im.abs() < 1e-2, "Im mu = {}", mu.im);
    }

    #[test]
    fn dispersion_curve_shape_at_reference_alpha() {
        let orbit = reference_orbit();
        let cfg = IntegratorConfig::default();
        // The band is razor thin this close to onset; refine around it.
        let mut grid = vec![0.0];
        grid.extend((0..=40).map(|i| 0.05 + 0.25 * i as f64 / 40.0));
        grid.extend((1..=80).map(|i| 0.30 + 0.20 * i as f64 / 80.0));
        grid.extend((1..=20).map(|i| 0.50 + 0.70 * i as f64 / 20.0));
        let curve = dispersion_curve(orbit, [1.0, 0.0, 0.0], &grid, &cfg).unwrap();
        // k2 = 0 carries the neutral multiplier.
        let has_one = curve.points[0]
            .branches
            .iter()
            .any(|b| (b - Complex64::new(1.0, 0.0)).norm() < 1e-6);
        assert!(has_one);
        // A band with a negative-real multiplier beyond -1 exists.
        let band: Vec<&CurvePoint> = curve
            .points
            .iter()
            .filter(|p| p.k2 > 0.0 && p.leading_modulus > 1.0 + INSTABILITY_MARGIN)
            .collect();
        assert!(!band.is_empty(), "no instability band found");
        for p in &band {
            let lead = p
                .branches
                .iter()
                .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
                .unwrap();
            assert!(lead.re < -1.0 + 1e-3, "band multiplier {lead}");
            assert!(lead.im.abs() < 1e-2);
        }
        // The band brackets k*^2 ~ 0.3844 and the curve is stable well
        // before and after it.
        let k2_lo = band.first().unwrap().k2;
        let k2_hi = band.last().unwrap().k2;
        assert!(
            k2_lo < 0.3844 && 0.3844 < k2_hi,
            "band [{k2_lo}, {k2_hi}] misses the critical wavenumber"
        );
        for p in &curve.points {
            if p.k2 > 0.0 && (p.k2 < 0.25 || p.k2 > 0.55) {
                assert!(p.leading_modulus < 1.0, "unexpected instability at {}", p.k2);
            }
        }
    }

    #[test]
    fn below_onset_alpha_is_stable_for_all_wavenumbers() {
        let cfg = IntegratorConfig::default();
        let orbit = find_orbit(&LVParams::new(2.30, 0.5), None, None, &cfg).unwrap();
        let grid = k2_grid(1.2, 60);
        let curve = dispersion_curve(&orbit, [1.0, 0.0, 0.0], &grid, &cfg).unwrap();
        let max = curve.max_leading_modulus_excluding_origin();
        assert!(max < 1.0, "max modulus {max} at alpha below onset");
    }

    #[test]
    fn no_onset_below_critical_range() {
        let cfg = IntegratorConfig::default();
        let err = critical_alpha(0.5, [1.0, 0.0, 0.0], [2.26, 2.30], &cfg).unwrap_err();
        assert!(matches!(err, FloquetError::NoOnset { .. }), "got {err:?}");
    }
}
