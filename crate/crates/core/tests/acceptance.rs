//! Acceptance suite: one test per acceptance criterion, each printing a
//! `criterion N: PASS` line (run with `--nocapture` to see them).
//!
//! Tolerances and thresholds are pinned in the assertions; run with
//! `cargo test --test acceptance` (release or the default opt-enabled test
//! profile).

use std::sync::OnceLock;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use floquet_msf::floquet::{self, StabilityParameter, INSTABILITY_MARGIN};
use floquet_msf::models::{self, LVParams, Region};
use floquet_msf::msf;
use floquet_msf::netsim::{self, SyncVerdict};
use floquet_msf::ode::IntegratorConfig;
use floquet_msf::orbit::{find_orbit, PeriodicOrbit};
use floquet_msf::spectral::{self, CouplingMatrix};

fn cfg() -> IntegratorConfig {
    IntegratorConfig::default()
}

fn reference_orbit() -> &'static PeriodicOrbit {
    static ORBIT: OnceLock<PeriodicOrbit> = OnceLock::new();
    ORBIT.get_or_init(|| find_orbit(&LVParams::new(2.3427, 0.5), None, None, &cfg()).unwrap())
}

/// Instability band [k2_min, k2_max] of the leading-multiplier modulus
/// along the diffusive axis, by bisection against the margin threshold.
fn wavenumber_band(orbit: &PeriodicOrbit, margin: f64) -> (f64, f64) {
    let unstable = |k2: f64| -> bool {
        let param = StabilityParameter::from_wavenumber([1.0, 0.0, 0.0], k2);
        floquet::floquet_spectrum(orbit, &param, &cfg())
            .unwrap()
            .leading_modulus
            > 1.0 + margin
    };
    assert!(unstable(0.3844), "no instability at the critical wavenumber");
    let bisect = |mut lo: f64, mut hi: f64| -> f64 {
        // lo stable, hi unstable or vice versa; returns the crossing.
        let lo_unstable = unstable(lo);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if unstable(mid) == lo_unstable {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    (bisect(0.25, 0.3844), bisect(0.5, 0.3844))
}

#[test]
fn criterion_1_critical_onset() {
    let onset = floquet::critical_alpha(0.5, [1.0, 0.0, 0.0], [2.30, 2.37], &cfg()).unwrap();
    assert!(
        (2.33..=2.35).contains(&onset.alpha_star),
        "alpha* = {}",
        onset.alpha_star
    );
    assert!(
        (0.57..=0.67).contains(&onset.k_star),
        "k* = {}",
        onset.k_star
    );
    println!(
        "criterion 1: PASS — alpha* = {:.4} in [2.33, 2.35], k* = {:.4} in [0.57, 0.67]",
        onset.alpha_star, onset.k_star
    );
}

#[test]
fn criterion_2_region_bounds() {
    let region = |alpha: f64| models::classify_region(&LVParams::new(alpha, 0.5)).unwrap().region;
    assert_eq!(region(2.23), Region::A);
    assert_eq!(region(2.25), Region::B);
    assert_eq!(region(2.37), Region::B);
    assert_eq!(region(2.39), Region::C);

    // Transition points refined inside the brackets.
    let mut lo = 2.23;
    let mut hi = 2.25;
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if region(mid) == Region::A {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a_to_b = 0.5 * (lo + hi);
    assert!((2.23..=2.25).contains(&a_to_b), "A->B at {a_to_b}");

    let mut lo = 2.37;
    let mut hi = 2.39;
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if region(mid) == Region::B {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b_to_c = 0.5 * (lo + hi);
    assert!((2.37..=2.39).contains(&b_to_c), "B->C at {b_to_c}");
    println!(
        "criterion 2: PASS — A->B at alpha = {a_to_b:.4} in [2.23, 2.25], B->C at alpha = {b_to_c:.4} in [2.37, 2.39]"
    );
}

#[test]
fn criterion_3_neutral_mode() {
    for alpha in [2.30, 2.33, 2.3427, 2.36] {
        let orbit = find_orbit(&LVParams::new(alpha, 0.5), None, None, &cfg()).unwrap();
        let spectrum =
            floquet::floquet_spectrum(&orbit, &StabilityParameter::zero(), &cfg()).unwrap();
        let neutral_gap = spectrum
            .multipliers
            .iter()
            .map(|mu| (mu - Complex64::new(1.0, 0.0)).norm())
            .fold(f64::INFINITY, f64::min);
        assert!(
            neutral_gap < 1e-6,
            "alpha {alpha}: neutral multiplier off by {neutral_gap:e}"
        );
        let third = spectrum.multipliers[2].norm();
        assert!(third < 1e-3, "alpha {alpha}: third multiplier {third:e}");
    }
    println!(
        "criterion 3: PASS — neutral multiplier within 1e-6 and |mu_3| < 1e-3 at alpha in {{2.30, 2.33, 2.3427, 2.36}}"
    );
}

#[test]
fn criterion_4_two_node_period_doubling_and_restabilization() {
    let orbit = reference_orbit();
    let params = LVParams::new(2.3427, 0.5);
    let two = CouplingMatrix::two_node(1.0);
    let t_end = 200.0 * orbit.period();

    // Period doubling at D = k*^2 / 2.
    let initial = netsim::perturbed_initial(orbit, 2, 1e-3, 42);
    let out = netsim::simulate_with_orbit(
        &two,
        &params,
        [0.1922, 0.0, 0.0],
        &initial,
        t_end,
        &cfg(),
        orbit,
    )
    .unwrap();
    assert_eq!(
        out.diagnostics.verdict,
        SyncVerdict::PeriodDoubled,
        "diagnostics: {:?}",
        out.diagnostics.dominant_frequencies
    );
    let half = std::f64::consts::PI / orbit.period();
    let dominant = out.diagnostics.dominant_frequencies[0].omega;
    assert!(
        (dominant - half).abs() < 0.05 * half,
        "dominant {dominant} vs pi/T {half}"
    );

    // Synchronization below the band, from distinct initial states.
    let initial_sync =
        netsim::NetworkState::from_nodes(&[[0.1, 0.15, 0.05], [0.3, 0.15, 0.05]]);
    let out = netsim::simulate_with_orbit(
        &two,
        &params,
        [0.15, 0.0, 0.0],
        &initial_sync,
        t_end,
        &cfg(),
        orbit,
    )
    .unwrap();
    assert_eq!(out.diagnostics.verdict, SyncVerdict::Synchronized);

    // Re-stabilization above the band at D = 1.2 D_plus.
    let (_, k2_max) = wavenumber_band(orbit, INSTABILITY_MARGIN);
    let d_plus = k2_max / 2.0;
    let initial = netsim::perturbed_initial(orbit, 2, 1e-3, 42);
    let out = netsim::simulate_with_orbit(
        &two,
        &params,
        [1.2 * d_plus, 0.0, 0.0],
        &initial,
        t_end,
        &cfg(),
        orbit,
    )
    .unwrap();
    assert_eq!(
        out.diagnostics.verdict,
        SyncVerdict::Synchronized,
        "terminal sync error {:e}",
        out.diagnostics.terminal_sync_error
    );

    println!(
        "criterion 4: PASS — period doubling at D = 0.1922 (dominant {dominant:.4} ~ pi/T = {half:.4}), synchronized at D = 0.15 and at 1.2 D+ = {:.4}",
        1.2 * d_plus
    );
}

#[test]
fn criterion_5_interval_mapping() {
    // Fig-6 structure: coupling spectrum {-5, -3, 0}; the direct full-system
    // route must flag instability exactly on the union of the per-eigenvalue
    // images of the diffusive band.
    let params = LVParams::new(2.3435, 0.5);
    let orbit = find_orbit(&params, None, None, &cfg()).unwrap();
    let c = CouplingMatrix::from_rows(&[
        vec![-3.0, 1.0, 2.0],
        vec![1.0, -2.0, 1.0],
        vec![2.0, 1.0, -3.0],
    ])
    .unwrap();

    let (k2_min, k2_max) = wavenumber_band(&orbit, INSTABILITY_MARGIN);
    // Per-eigenvalue images of the band: lambda in {-5, -3}.
    let mut expected: Vec<(f64, f64)> = vec![
        (k2_min / 5.0, k2_max / 5.0),
        (k2_min / 3.0, k2_max / 3.0),
    ];
    expected.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    assert!(
        expected[0].1 < expected[1].0,
        "two separate intervals expected, got {expected:?}"
    );

    // Independent route: full 9x9 monodromy of the coupled linearization.
    let unstable = |d_u: f64| -> bool {
        let direct =
            spectral::direct_network_monodromy(&c, &orbit, [d_u, 0.0, 0.0], &cfg()).unwrap();
        // Skip the neutral time-shift multiplier carried by lambda = 0.
        direct
            .iter()
            .filter(|mu| (*mu - Complex64::new(1.0, 0.0)).norm() > 1e-4)
            .any(|mu| mu.norm() > 1.0 + INSTABILITY_MARGIN)
    };
    let bisect = |mut lo: f64, mut hi: f64| -> f64 {
        let lo_unstable = unstable(lo);
        for _ in 0..20 {
            let mid = 0.5 * (lo + hi);
            if unstable(mid) == lo_unstable {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let mut measured = Vec::new();
    for (lo, hi) in &expected {
        let mid = 0.5 * (lo + hi);
        assert!(unstable(mid), "expected instability inside [{lo}, {hi}]");
        let width = hi - lo;
        measured.push((
            bisect((lo - width).max(1e-3), mid),
            bisect(hi + width, mid),
        ));
    }
    // Between the intervals the network is stable.
    assert!(!unstable(0.5 * (expected[0].1 + expected[1].0)));
    for ((elo, ehi), (mlo, mhi)) in expected.iter().zip(&measured) {
        assert!(
            (elo - mlo).abs() <= 0.02 * elo.max(*mlo),
            "lower endpoint {mlo} vs mapped {elo}"
        );
        assert!(
            (ehi - mhi).abs() <= 0.02 * ehi.max(*mhi),
            "upper endpoint {mhi} vs mapped {ehi}"
        );
    }
    println!(
        "criterion 5: PASS — direct-route instability intervals {measured:?} match the mapped band images {expected:?} within 2%"
    );
}

#[test]
fn criterion_6_msf_global_bounds() {
    let orbit = reference_orbit();
    // Polar grid: everything beyond R = 1.2 is stable.
    let spec = msf::GridSpec::Polar {
        r_max: 1.5,
        n_r: 45,
        n_theta: 40,
        theta_max: std::f64::consts::FRAC_PI_2,
    };
    let grid = msf::msf_sweep(orbit, &spec, [1.0, 0.0, 0.0], &cfg(), INSTABILITY_MARGIN).unwrap();
    for node in &grid.nodes {
        if node.omega.norm() > 1.2 {
            assert!(
                !node.unstable,
                "unstable node at |Omega| = {} (modulus {})",
                node.omega.norm(),
                node.leading_modulus
            );
        }
    }

    // Ray structure at the two reference angles.
    let theta_a = 33.0 * std::f64::consts::PI / 80.0;
    let a = msf::ray_intervals(orbit, theta_a, 1.5, [1.0, 0.0, 0.0], &cfg(), 220, INSTABILITY_MARGIN)
        .unwrap();
    assert_eq!(a.len(), 1, "theta = 33pi/80 intervals: {a:?}");
    assert!(
        (a[0].1 - 0.92).abs() <= 0.02,
        "upper endpoint {} vs 0.92 +- 0.02",
        a[0].1
    );

    let theta_b = 37.0 * std::f64::consts::PI / 80.0;
    let b = msf::ray_intervals(orbit, theta_b, 1.5, [1.0, 0.0, 0.0], &cfg(), 220, INSTABILITY_MARGIN)
        .unwrap();
    assert_eq!(b.len(), 2, "theta = 37pi/80 intervals: {b:?}");
    assert!(
        (b[0].1 - 0.49).abs() <= 0.02,
        "first interval end {} vs 0.49",
        b[0].1
    );
    assert!(
        (b[1].0 - 0.61).abs() <= 0.02,
        "second interval start {} vs 0.61",
        b[1].0
    );
    assert!(
        (b[1].1 - 1.04).abs() <= 0.02,
        "second interval end {} vs 1.04",
        b[1].1
    );
    println!(
        "criterion 6: PASS — all {} grid nodes with R > 1.2 stable; ray 33pi/80 ends at {:.3}; ray 37pi/80 intervals ({:.3}, {:.3}) and ({:.3}, {:.3})",
        grid.nodes.len(),
        a[0].1,
        b[0].0,
        b[0].1,
        b[1].0,
        b[1].1
    );
}

#[test]
fn criterion_7_expansion_coefficients() {
    let orbit = reference_orbit();
    let tight = IntegratorConfig::with_tols(1e-11, 1e-13);
    let fit = msf::expansion_fit(orbit, [1.0, 0.0, 0.0], &tight).unwrap();
    assert!(fit.mu1_1.re > 0.0 && fit.mu1_2.re < 0.0);
    assert!(
        (fit.mu1_1.re - 35.7).abs() <= 0.10 * 35.7,
        "mu1_1 = {} vs 35.7 +- 10%",
        fit.mu1_1.re
    );
    assert!(
        (fit.mu1_2.re - (-5.8e3)).abs() <= 0.15 * 5.8e3,
        "mu1_2 = {} vs -5.8e3 +- 15%",
        fit.mu1_2.re
    );
    // The coefficient hierarchy: the linear term is three orders below the
    // quadratic one (consistent with 35.7 / 5.8e3 ~ 6e-3).
    let ratio = fit.mu1_1.re / fit.mu1_2.re.abs();
    assert!(
        (1e-3..1e-1).contains(&ratio),
        "coefficient ratio {ratio:e} out of scale"
    );
    println!(
        "criterion 7: PASS — mu1_1 = {:.2} (35.7 +- 10%), mu1_2 = {:.0} (-5800 +- 15%), ratio {ratio:.2e}",
        fit.mu1_1.re, fit.mu1_2.re
    );
}

#[test]
fn criterion_8_quasi_periodic_bifurcation() {
    let orbit = reference_orbit();
    let params = LVParams::new(2.3427, 0.5);
    let w = 1.0 / 2f64.sqrt();
    let cycle = CouplingMatrix::directed_cycle(4, w);
    let coupling = [0.04, 0.0, 0.0];

    let initial = netsim::perturbed_initial(orbit, 4, 1e-3, 42);
    let t_end = 200.0 * orbit.period();
    let out = netsim::simulate_with_orbit(
        &cycle,
        &params,
        coupling,
        &initial,
        t_end,
        &cfg(),
        orbit,
    )
    .unwrap();
    assert_eq!(
        out.diagnostics.verdict,
        SyncVerdict::QuasiPeriodic,
        "peaks: {:?}",
        out.diagnostics.dominant_frequencies
    );

    let peaks = &out.diagnostics.dominant_frequencies;
    let (pa, pb) = (peaks[0].omega, peaks[1].omega);
    let omega1_dft = 0.5 * (pa + pb);
    let omega2_dft = 0.5 * (pa - pb).abs();
    assert!(
        (omega1_dft - 0.16).abs() <= 0.01,
        "omega1 from DFT = {omega1_dft}"
    );
    assert!(
        (omega2_dft - 0.019).abs() <= 0.004,
        "omega2 from DFT = {omega2_dft}"
    );

    // Linear prediction from the complex coupling eigenvalue in the lower
    // half plane.
    let reduced =
        spectral::reduce_network(&cycle, orbit, coupling, &cfg(), INSTABILITY_MARGIN).unwrap();
    let complex_block = reduced
        .per_eigenvalue
        .iter()
        .find(|b| b.lambda.im < -1e-6)
        .expect("complex eigenvalue block");
    assert!(complex_block.spectrum.leading_modulus >= 1.0);
    let (omega1_pred, omega2_pred) =
        netsim::predicted_frequencies(orbit, complex_block.spectrum.multipliers[0]);
    assert!(
        (omega1_dft - omega1_pred).abs() <= 0.01,
        "omega1: DFT {omega1_dft} vs predicted {omega1_pred}"
    );
    assert!(
        (omega2_dft - omega2_pred.abs()).abs() <= 0.004,
        "omega2: DFT {omega2_dft} vs predicted {}",
        omega2_pred.abs()
    );
    println!(
        "criterion 8: PASS — quasi-periodic at D = 0.04: omega1 {omega1_dft:.4} (pred {omega1_pred:.4}), omega2 {omega2_dft:.4} (pred {:.4})",
        omega2_pred.abs()
    );
}

#[test]
fn criterion_9_reduction_oracle() {
    let orbit = reference_orbit();
    let two = CouplingMatrix::two_node(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..10 {
        let coupling = [
            rng.gen_range(0.02..0.5),
            rng.gen_range(0.0..0.2),
            rng.gen_range(0.0..0.2),
        ];
        let reduced =
            spectral::reduce_network(&two, orbit, coupling, &cfg(), INSTABILITY_MARGIN).unwrap();
        let mut expected: Vec<Complex64> = reduced
            .per_eigenvalue
            .iter()
            .flat_map(|b| b.spectrum.multipliers.into_iter())
            .collect();
        let direct = spectral::direct_network_monodromy(&two, orbit, coupling, &cfg()).unwrap();
        assert_eq!(direct.len(), 6);
        for mu in &direct {
            let (idx, dist) = expected
                .iter()
                .enumerate()
                .map(|(i, e)| (i, (mu - e).norm()))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            assert!(
                dist < 1e-6,
                "trial {trial} D = {coupling:?}: multiplier {mu} unmatched ({dist:e})"
            );
            expected.swap_remove(idx);
        }
    }
    println!(
        "criterion 9: PASS — eigenbasis reduction matches the direct 6x6 monodromy multiset within 1e-6 on 10 random couplings"
    );
}

#[test]
fn criterion_10_structural_spectral_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let mut checked = 0;
    for trial in 0..50 {
        let m = rng.gen_range(2..=10);
        // Irreducible Metzler with zero row sums: a directed Hamiltonian
        // cycle plus random extra arcs.
        let mut rows = vec![vec![0.0f64; m]; m];
        for i in 0..m {
            rows[i][(i + 1) % m] = rng.gen_range(0.2..1.0);
            for j in 0..m {
                if j != i && rng.gen_bool(0.4) {
                    rows[i][j] += rng.gen_range(0.0..1.0);
                }
            }
            let off: f64 = (0..m).filter(|j| *j != i).map(|j| rows[i][j]).sum();
            rows[i][i] = -off;
        }
        let c = CouplingMatrix::from_rows(&rows).unwrap();
        let spec = spectral::analyze(&c).unwrap();
        assert!(spec.is_metzler && spec.is_irreducible, "trial {trial}");
        let norm = rows
            .iter()
            .flatten()
            .fold(0.0f64, |mx, v| mx.max(v.abs()));

        // Gershgorin containment.
        let center = Complex64::new(-spec.gershgorin_radius, 0.0);
        for ev in &spec.eigenvalues {
            assert!(
                (ev - center).norm() <= spec.gershgorin_radius + 1e-8,
                "trial {trial}: {ev} outside the enclosing disc"
            );
        }
        // Conjugation closure.
        for ev in &spec.eigenvalues {
            assert!(
                spec.eigenvalues
                    .iter()
                    .any(|z| (z - ev.conj()).norm() < 1e-9 * norm.max(1.0)),
                "trial {trial}: conjugate of {ev} missing"
            );
        }
        // Zero eigenvalue, and its Perron simplicity.
        let mut moduli: Vec<f64> = spec.eigenvalues.iter().map(|z| z.norm()).collect();
        moduli.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(moduli[0] < 1e-9 * norm.max(1.0), "trial {trial}: no zero");
        assert!(
            moduli[1] > 1e-6 * norm,
            "trial {trial}: zero eigenvalue not simple"
        );
        // Standardized-Laplacian argument bound.
        let lap = spectral::standardized_laplacian(&c).unwrap();
        assert!(lap.arg_bound_holds, "trial {trial}: argument bound");
        checked += 1;
    }
    assert_eq!(checked, 50);
    println!(
        "criterion 10: PASS — Gershgorin, conjugation, zero mode, Perron simplicity, and the argument bound hold on 50 random Metzler couplings (m = 2..10)"
    );
}

#[test]
fn criterion_11_determinant_identity() {
    let orbit = reference_orbit();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let omega = StabilityParameter::per_species([
            Complex64::new(rng.gen_range(-0.25..0.02), rng.gen_range(-0.25..0.0)),
            Complex64::new(rng.gen_range(-0.1..0.02), rng.gen_range(-0.1..0.0)),
            Complex64::new(rng.gen_range(-0.1..0.02), rng.gen_range(-0.1..0.0)),
        ]);
        let gap = floquet::abel_liouville_gap(orbit, &omega, &cfg()).unwrap();
        let scale = (omega.sum() * orbit.period()).norm().max(1.0);
        assert!(gap < 1e-6 * scale, "abel gap {gap:e} at {omega:?}");
        worst = worst.max(gap / scale);
    }
    println!(
        "criterion 11: PASS — Abel-Liouville identity within relative 1e-6 at 20 random parameters (worst {worst:.2e})"
    );
}
