//! Master-stability sweeps over the complex coupling-eigenvalue plane:
//! per-node leading-multiplier moduli and verdicts on polar or cartesian
//! grids, instability intervals along fixed-angle rays, and the small
//! parameter expansion of the leading multiplier around the neutral point.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::floquet::{self, FloquetError, StabilityParameter};
use crate::ode::IntegratorConfig;
use crate::orbit::PeriodicOrbit;

#[derive(Debug, Error)]
pub enum MsfError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("expansion fit is ill-conditioned")]
    FitIllConditioned,
    #[error(transparent)]
    Floquet(#[from] FloquetError),
}

/// Grid geometry over the stability parameter.
#[derive(Clone, Copy, Debug)]
pub enum GridSpec {
    /// Omega = -R exp(i theta), R in (0, r_max], theta in [0, theta_max)
    /// with theta_max < pi/2 (third-quadrant convention).
    Polar {
        r_max: f64,
        n_r: usize,
        n_theta: usize,
        theta_max: f64,
    },
    /// Rectangle in (Re Omega, Im Omega).
    Cartesian {
        re: [f64; 2],
        im: [f64; 2],
        n_re: usize,
        n_im: usize,
    },
}

impl GridSpec {
    pub fn node_count(&self) -> usize {
        match self {
            GridSpec::Polar { n_r, n_theta, .. } => n_r * n_theta,
            GridSpec::Cartesian { n_re, n_im, .. } => n_re * n_im,
        }
    }

    /// Node parameter values in deterministic row-major order
    /// (theta-major for polar grids, Im-major for cartesian ones).
    pub fn nodes(&self) -> Vec<Complex64> {
        match *self {
            GridSpec::Polar {
                r_max,
                n_r,
                n_theta,
                theta_max,
            } => {
                let mut out = Vec::with_capacity(n_r * n_theta);
                for jt in 0..n_theta {
                    let theta = theta_max * jt as f64 / n_theta as f64;
                    for jr in 0..n_r {
                        let r = r_max * (jr + 1) as f64 / n_r as f64;
                        out.push(-r * Complex64::new(theta.cos(), theta.sin()));
                    }
                }
                out
            }
            GridSpec::Cartesian { re, im, n_re, n_im } => {
                let mut out = Vec::with_capacity(n_re * n_im);
                for ji in 0..n_im {
                    let imag = if n_im == 1 {
                        im[0]
                    } else {
                        im[0] + (im[1] - im[0]) * ji as f64 / (n_im - 1) as f64
                    };
                    for jr in 0..n_re {
                        let real = if n_re == 1 {
                            re[0]
                        } else {
                            re[0] + (re[1] - re[0]) * jr as f64 / (n_re - 1) as f64
                        };
                        out.push(Complex64::new(real, imag));
                    }
                }
                out
            }
        }
    }

    fn validate(&self) -> Result<(), MsfError> {
        match *self {
            GridSpec::Polar {
                r_max,
                n_r,
                n_theta,
                theta_max,
            } => {
                if !(r_max > 0.0) || n_r == 0 || n_theta == 0 {
                    return Err(MsfError::InvalidInput("empty polar grid".into()));
                }
                if !(0.0 < theta_max && theta_max <= std::f64::consts::FRAC_PI_2) {
                    return Err(MsfError::InvalidInput(
                        "polar theta range must lie within (0, pi/2]".into(),
                    ));
                }
            }
            GridSpec::Cartesian { re, im, n_re, n_im } => {
                if n_re == 0 || n_im == 0 || !(re[1] >= re[0]) || !(im[1] >= im[0]) {
                    return Err(MsfError::InvalidInput("empty cartesian grid".into()));
                }
            }
        }
        Ok(())
    }
}

/// One evaluated grid node.
#[derive(Clone, Copy, Debug)]
pub struct MsfNode {
    pub omega: Complex64,
    pub leading_modulus: f64,
    pub unstable: bool,
}

/// Master-stability function on a grid.
#[derive(Clone, Debug)]
pub struct MSFGrid {
    pub spec: GridSpec,
    pub d_ratios: [f64; 3],
    pub nodes: Vec<MsfNode>,
    /// Leading modulus at Omega = 0 (the neutral reference, evaluated
    /// separately since polar grids are open at R = 0).
    pub origin_modulus: f64,
    pub margin: f64,
}

/// Leading-multiplier modulus at one stability parameter; conjugate
/// parameters share moduli exactly, so the upper half plane is evaluated
/// through its mirror image.
fn leading_modulus_at(
    orbit: &PeriodicOrbit,
    omega: Complex64,
    d_ratios: [f64; 3],
    cfg: &IntegratorConfig,
) -> Result<f64, FloquetError> {
    let om = if omega.im > 0.0 { omega.conj() } else { omega };
    let param = StabilityParameter::from_ratios(om, d_ratios);
    floquet::floquet_spectrum(orbit, &param, cfg).map(|s| s.leading_modulus)
}

/// Evaluate the master stability function on `spec`. Node evaluations are
/// independent and run in parallel; the output order is the deterministic
/// grid order regardless of the worker count.
pub fn msf_sweep(
    orbit: &PeriodicOrbit,
    spec: &GridSpec,
    d_ratios: [f64; 3],
    cfg: &IntegratorConfig,
    margin: f64,
) -> Result<MSFGrid, MsfError> {
    spec.validate()?;
    let omegas = spec.nodes();
    let nodes: Vec<MsfNode> = omegas
        .par_iter()
        .map(|&omega| {
            leading_modulus_at(orbit, omega, d_ratios, cfg).map(|leading_modulus| MsfNode {
                omega,
                leading_modulus,
                unstable: leading_modulus > 1.0 + margin,
            })
        })
        .collect::<Result<_, _>>()?;
    let origin_modulus = floquet::floquet_spectrum(orbit, &StabilityParameter::zero(), cfg)?
        .leading_modulus;
    Ok(MSFGrid {
        spec: *spec,
        d_ratios,
        nodes,
        origin_modulus,
        margin,
    })
}

/// Maximal disjoint instability intervals in R along the ray
/// Omega = -R exp(i theta), refined by bisection to |dR| < 1e-4.
pub fn ray_intervals(
    orbit: &PeriodicOrbit,
    theta: f64,
    r_max: f64,
    d_ratios: [f64; 3],
    cfg: &IntegratorConfig,
    resolution: usize,
    margin: f64,
) -> Result<Vec<(f64, f64)>, MsfError> {
    if resolution < 200 {
        return Err(MsfError::InvalidInput(
            "ray resolution must be at least 200".into(),
        ));
    }
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&theta) {
        return Err(MsfError::InvalidInput(
            "theta must lie in [0, pi/2)".into(),
        ));
    }
    let dir = Complex64::new(theta.cos(), theta.sin());
    let rs: Vec<f64> = (1..=resolution)
        .map(|i| r_max * i as f64 / resolution as f64)
        .collect();
    let moduli: Vec<f64> = rs
        .par_iter()
        .map(|r| leading_modulus_at(orbit, -r * dir, d_ratios, cfg))
        .collect::<Result<_, _>>()?;

    let unstable_at = |r: f64| -> Result<bool, MsfError> {
        Ok(leading_modulus_at(orbit, -r * dir, d_ratios, cfg)? > 1.0 + margin)
    };
    let refine = |mut lo: f64, mut hi: f64| -> Result<f64, MsfError> {
        // lo and hi carry opposite verdicts; returns the crossing point.
        let lo_unstable = if lo > 0.0 { unstable_at(lo)? } else { false };
        while hi - lo > 1e-4 {
            let mid = 0.5 * (lo + hi);
            if unstable_at(mid)? == lo_unstable {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    };

    let mut intervals = Vec::new();
    let mut open: Option<f64> = None;
    let mut prev_r = 0.0; // Omega -> 0 is neutrally stable.
    let mut prev_unstable = false;
    for (r, modulus) in rs.iter().zip(&moduli) {
        let unstable = *modulus > 1.0 + margin;
        if unstable != prev_unstable {
            let boundary = refine(prev_r, *r)?;
            if unstable {
                open = Some(boundary);
            } else if let Some(start) = open.take() {
                intervals.push((start, boundary));
            }
        }
        prev_r = *r;
        prev_unstable = unstable;
    }
    if let Some(start) = open {
        intervals.push((start, r_max));
    }
    Ok(intervals)
}

/// Small-parameter expansion of the leading multiplier
/// mu_1(Omega) = 1 + mu1_1 Omega + mu1_2 Omega^2 + o(Omega^2).
#[derive(Clone, Debug)]
pub struct ExpansionCoefficients {
    pub mu1_1: Complex64,
    pub mu1_2: Complex64,
    /// RMS residual of the least-squares fit over the stencil.
    pub fit_residual: f64,
    /// Table theta -> R*(theta): the predicted tiny stable interval end for
    /// rays steeper than pi/4.
    pub r_star_of_theta: Vec<(f64, f64)>,
}

/// Predicted small-R stability boundary
/// R* = 2 a cos(theta) / (2 b cos(2 theta) + a^2) with a = Re mu1_1,
/// b = Re mu1_2; meaningful for theta > pi/4 where the denominator is
/// positive.
pub fn r_star(mu1_1: f64, mu1_2: f64, theta: f64) -> Option<f64> {
    let denom = 2.0 * mu1_2 * (2.0 * theta).cos() + mu1_1 * mu1_1;
    let value = 2.0 * mu1_1 * theta.cos() / denom;
    (denom > 0.0 && value.is_finite() && value > 0.0).then_some(value)
}

/// Fit the expansion coefficients on a small-Omega stencil (three radii
/// times eight angles), tracking the leading branch by continuity from
/// mu_1(0) = 1.
pub fn expansion_fit(
    orbit: &PeriodicOrbit,
    d_ratios: [f64; 3],
    cfg: &IntegratorConfig,
) -> Result<ExpansionCoefficients, MsfError> {
    let radii = [1e-5, 2e-5, 5e-5];
    let angles = 8usize;
    let mut stencil = Vec::with_capacity(radii.len() * angles);
    for rho in radii {
        for k in 0..angles {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / angles as f64;
            stencil.push(rho * Complex64::new(phi.cos(), phi.sin()));
        }
    }
    let branch: Vec<(Complex64, Complex64)> = stencil
        .par_iter()
        .map(|&omega| {
            let param = StabilityParameter::from_ratios(omega, d_ratios);
            floquet::floquet_spectrum(orbit, &param, cfg).map(|s| {
                // Near Omega = 0 the branches are far apart; the leading one
                // is the multiplier nearest the neutral value 1.
                let mu = s
                    .multipliers
                    .iter()
                    .min_by(|a, b| {
                        (*a - Complex64::new(1.0, 0.0))
                            .norm()
                            .partial_cmp(&(*b - Complex64::new(1.0, 0.0)).norm())
                            .unwrap()
                    })
                    .copied()
                    .unwrap();
                (omega, mu)
            })
        })
        .collect::<Result<_, _>>()?;

    // Complex least squares for (mu - 1) ~ c1 Omega + c2 Omega^2 via the
    // 2x2 normal equations.
    let zero = Complex64::new(0.0, 0.0);
    let (mut n11, mut n12, mut n22, mut b1, mut b2) = (zero, zero, zero, zero, zero);
    for (omega, mu) in &branch {
        let o1 = *omega;
        let o2 = omega * omega;
        let rhs = mu - Complex64::new(1.0, 0.0);
        n11 += o1.conj() * o1;
        n12 += o1.conj() * o2;
        n22 += o2.conj() * o2;
        b1 += o1.conj() * rhs;
        b2 += o2.conj() * rhs;
    }
    let det = n11 * n22 - n12 * n12.conj();
    if det.norm() < 1e-12 * (n11.norm() * n22.norm()).max(f64::MIN_POSITIVE) {
        return Err(MsfError::FitIllConditioned);
    }
    let mu1_1 = (b1 * n22 - n12 * b2) / det;
    let mu1_2 = (n11 * b2 - n12.conj() * b1) / det;

    let mut ss = 0.0;
    for (omega, mu) in &branch {
        let pred = Complex64::new(1.0, 0.0) + mu1_1 * omega + mu1_2 * omega * omega;
        ss += (mu - pred).norm_sqr();
    }
    let fit_residual = (ss / branch.len() as f64).sqrt();

    let r_star_of_theta = (0..33)
        .filter_map(|i| {
            let theta = std::f64::consts::PI * (0.26 + 0.23 * i as f64 / 32.0);
            r_star(mu1_1.re, mu1_2.re, theta).map(|r| (theta, r))
        })
        .collect();

    Ok(ExpansionCoefficients {
        mu1_1,
        mu1_2,
        fit_residual,
        r_star_of_theta,
    })
}

/// CSV export: re_omega, im_omega, leading_modulus, verdict.
pub fn write_msf_csv<W: std::io::Write>(grid: &MSFGrid, mut w: W) -> std::io::Result<()> {
    writeln!(w, "re_omega,im_omega,leading_modulus,verdict")?;
    for node in &grid.nodes {
        writeln!(
            w,
            "{},{},{},{}",
            node.omega.re,
            node.omega.im,
            node.leading_modulus,
            if node.unstable { "unstable" } else { "stable" }
        )?;
    }
    Ok(())
}

/// Binary PPM raster (P6): red for unstable nodes, blue for stable ones.
/// Polar grids map rows to theta (top row = largest theta) and columns to
/// R; cartesian grids map rows to Im (top row = largest Im) and columns
/// to Re.
pub fn write_msf_ppm<W: std::io::Write>(grid: &MSFGrid, mut w: W) -> std::io::Result<()> {
    let (cols, rows) = match grid.spec {
        GridSpec::Polar { n_r, n_theta, .. } => (n_r, n_theta),
        GridSpec::Cartesian { n_re, n_im, .. } => (n_re, n_im),
    };
    write!(w, "P6\n{cols} {rows}\n255\n")?;
    let mut body = Vec::with_capacity(3 * cols * rows);
    for row in (0..rows).rev() {
        for col in 0..cols {
            let node = &grid.nodes[row * cols + col];
            if node.unstable {
                body.extend_from_slice(&[220, 40, 40]);
            } else {
                body.extend_from_slice(&[40, 60, 220]);
            }
        }
    }
    w.write_all(&body)
}

/// CSV export of ray intervals: theta, r_lo, r_hi.
pub fn write_rays_csv<W: std::io::Write>(
    rows: &[(f64, f64, f64)],
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "theta,r_lo,r_hi")?;
    for (theta, lo, hi) in rows {
        writeln!(w, "{theta},{lo},{hi}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::tests::reference_orbit;
    use crate::floquet::INSTABILITY_MARGIN as MARGIN;

    #[test]
    fn polar_grid_invariants() {
        let orbit = reference_orbit();
        let cfg = IntegratorConfig::with_tols(1e-8, 1e-10);
        let spec = GridSpec::Polar {
            r_max: 1.5,
            n_r: 10,
            n_theta: 8,
            theta_max: std::f64::consts::FRAC_PI_2,
        };
        let grid = msf_sweep(orbit, &spec, [1.0, 0.0, 0.0], &cfg, MARGIN).unwrap();
        assert_eq!(grid.nodes.len(), 80);
        assert!((grid.origin_modulus - 1.0).abs() < 1e-6);
        for node in &grid.nodes {
            assert_eq!(node.unstable, node.leading_modulus > 1.0 + MARGIN);
            assert!(node.omega.re < 0.0 && node.omega.im <= 0.0);
        }
    }

    #[test]
    fn cartesian_mirror_is_exact() {
        let orbit = reference_orbit();
        let cfg = IntegratorConfig::with_tols(1e-8, 1e-10);
        let spec = GridSpec::Cartesian {
            re: [-0.45, -0.35],
            im: [-0.04, 0.04],
            n_re: 3,
            n_im: 3,
        };
        let grid = msf_sweep(orbit, &spec, [1.0, 0.0, 0.0], &cfg, MARGIN).unwrap();
        // Rows at -im and +im carry identical moduli.
        for col in 0..3 {
            let low = &grid.nodes[col];
            let high = &grid.nodes[2 * 3 + col];
            assert!(
                (low.leading_modulus - high.leading_modulus).abs() < 1e-8,
                "mirror mismatch: {} vs {}",
                low.leading_modulus,
                high.leading_modulus
            );
        }
    }

    #[test]
    fn theta_zero_ray_matches_wavenumber_band() {
        let orbit = reference_orbit();
        let cfg = IntegratorConfig::default();
        let intervals =
            ray_intervals(orbit, 0.0, 0.7, [1.0, 0.0, 0.0], &cfg, 200, MARGIN).unwrap();
        assert_eq!(intervals.len(), 1, "got {intervals:?}");
        let (lo, hi) = intervals[0];
        // The ray at theta = 0 is the diffusive axis: R = k^2 for d_u = 1,
        // so the interval must bracket the critical squared wavenumber.
        assert!(lo < 0.3844 && 0.3844 < hi, "band [{lo}, {hi}]");
        assert!(hi - lo < 0.2, "band unexpectedly wide: [{lo}, {hi}]");
    }

    #[test]
    fn ray_requires_resolution() {
        let orbit = reference_orbit();
        let cfg = IntegratorConfig::default();
        assert!(matches!(
            ray_intervals(orbit, 0.0, 1.0, [1.0, 0.0, 0.0], &cfg, 50, MARGIN),
            Err(MsfError::InvalidInput(_))
        ));
    }

    #[test]
    fn expansion_signs_and_local_prediction() {
        let orbit = reference_orbit();
        let cfg = IntegratorConfig::with_tols(1e-11, 1e-13);
        let fit = expansion_fit(orbit, [1.0, 0.0, 0.0], &cfg).unwrap();
        assert!(fit.mu1_1.re > 0.0, "mu1_1 = {}", fit.mu1_1);
        assert!(fit.mu1_2.re < 0.0, "mu1_2 = {}", fit.mu1_2);

        // The quadratic model reproduces direct evaluations outside the
        // stencil. The neglected cubic term is ~2e6 |Omega|^3, so the
        // 1e-6 agreement holds up to |Omega| ~ 7e-5 and degrades cubically
        // beyond that.
        let gap_at = |omega: Complex64| -> f64 {
            let param = StabilityParameter::from_ratios(omega, [1.0, 0.0, 0.0]);
            let spectrum = floquet::floquet_spectrum(orbit, &param, &cfg).unwrap();
            let mu = spectrum
                .multipliers
                .iter()
                .min_by(|a, b| {
                    (*a - Complex64::new(1.0, 0.0))
                        .norm()
                        .partial_cmp(&(*b - Complex64::new(1.0, 0.0)).norm())
                        .unwrap()
                })
                .unwrap();
            let pred = Complex64::new(1.0, 0.0) + fit.mu1_1 * omega + fit.mu1_2 * omega * omega;
            (mu - pred).norm()
        };
        let near = gap_at(Complex64::new(-7e-5, 0.0));
        assert!(near < 1e-6, "prediction gap {near:e} at -7e-5");
        let far = gap_at(Complex64::new(-1e-4, 0.0));
        assert!(far < 5e-6, "prediction gap {far:e} at -1e-4");
    }

    #[test]
    fn predicted_small_r_boundary_matches_measurement() {
        let orbit = reference_orbit();
        let fit_cfg = IntegratorConfig::with_tols(1e-11, 1e-13);
        let fit = expansion_fit(orbit, [1.0, 0.0, 0.0], &fit_cfg).unwrap();
        let cfg = IntegratorConfig::default();
        for theta in [0.3 * std::f64::consts::PI, 0.45 * std::f64::consts::PI] {
            let predicted = r_star(fit.mu1_1.re, fit.mu1_2.re, theta).unwrap();
            // Bisection on the measured verdict from near zero.
            let dir = Complex64::new(theta.cos(), theta.sin());
            let unstable = |r: f64| {
                leading_modulus_at(orbit, -r * dir, [1.0, 0.0, 0.0], &cfg).unwrap()
                    > 1.0 + MARGIN
            };
            let mut lo = 1e-5;
            let mut hi = 0.05;
            assert!(!unstable(lo), "already unstable at {lo}");
            assert!(unstable(hi), "still stable at {hi}");
            for _ in 0..18 {
                let mid = 0.5 * (lo + hi);
                if unstable(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let measured = 0.5 * (lo + hi);
            assert!(
                measured < 2.0 * predicted && predicted < 2.0 * measured,
                "theta {theta}: predicted {predicted:e}, measured {measured:e}"
            );
        }
    }
}
