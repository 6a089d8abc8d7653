//! Structural and spectral analysis of coupling matrices: zero row sums,
//! the Metzler property, irreducibility, Gershgorin enclosure, eigen and
//! Jordan structure, the standardized Laplacian argument bound, and the
//! eigenbasis reduction of a coupled network to per-eigenvalue variational
//! problems. Also maps constant-coefficient spatial operators to their
//! per-species symbols.

use nalgebra::{Complex, DMatrix};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::floquet::{self, FloquetSpectrum, StabilityParameter};
use crate::ode::{IntegratorConfig, OdeError};
use crate::orbit::PeriodicOrbit;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("row {row} sums to {sum:e}; coupling rows must sum to zero")]
    RowSumViolation { row: usize, sum: f64 },
    #[error("matrix is not Metzler (nonnegative off-diagonal entries required)")]
    NotMetzler,
    #[error("coupling matrix is not diagonalizable; use the Jordan-aware verdict")]
    NotDiagonalizable,
    #[error("eigenvalue solve failed")]
    EigenFailure,
    #[error("empty operator descriptor")]
    EmptyDescriptor,
    #[error("invalid matrix: {0}")]
    Invalid(String),
    #[error(transparent)]
    Floquet(#[from] floquet::FloquetError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Zero-row-sum coupling matrix over network nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrix {
    entries: DMatrix<f64>,
}

impl CouplingMatrix {
    /// Validates the zero-row-sum condition (scaled 1e-12 tolerance).
    pub fn new(entries: DMatrix<f64>) -> Result<Self, SpectralError> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(SpectralError::Invalid(format!(
                "expected a nonempty square matrix, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(SpectralError::Invalid("non-finite entry".into()));
        }
        let scale = entries.iter().fold(1.0f64, |m, e| m.max(e.abs()));
        for row in 0..entries.nrows() {
            let sum: f64 = entries.row(row).iter().sum();
            if sum.abs() > 1e-12 * scale {
                return Err(SpectralError::RowSumViolation { row, sum });
            }
        }
        Ok(Self { entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SpectralError> {
        let m = rows.len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(SpectralError::Invalid("ragged rows".into()));
        }
        Self::new(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// All-to-all coupling with uniform weight.
    pub fn complete_graph(m: usize, weight: f64) -> Self {
        let a = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                -weight * (m as f64 - 1.0)
            } else {
                weight
            }
        });
        Self { entries: a }
    }

    /// Undirected cycle; each node exchanges with both neighbors.
    pub fn ring(m: usize, weight: f64) -> Self {
        let a = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                -2.0 * weight
            } else if (i + 1) % m == j || (j + 1) % m == i {
                weight
            } else {
                0.0
            }
        });
        Self { entries: a }
    }

    /// Directed cycle; each node receives from its predecessor only.
    pub fn directed_cycle(m: usize, weight: f64) -> Self {
        let a = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                -weight
            } else if (i + 1) % m == j {
                weight
            } else {
                0.0
            }
        });
        Self { entries: a }
    }

    /// Symmetric two-node exchange with strength d.
    pub fn two_node(d: f64) -> Self {
        Self {
            entries: DMatrix::from_row_slice(2, 2, &[-d, d, d, -d]),
        }
    }

    /// Parse a dense CSV body: m rows of m comma-separated reals.
    pub fn from_csv_str(body: &str) -> Result<Self, SpectralError> {
        let mut rows = Vec::new();
        for line in body.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row: Result<Vec<f64>, _> =
                line.split(',').map(|tok| tok.trim().parse::<f64>()).collect();
            rows.push(row.map_err(|e| SpectralError::Invalid(format!("bad entry: {e}")))?);
        }
        Self::from_rows(&rows)
    }

    pub fn from_csv_path<P: AsRef<std::path::Path>>(path: P) -> Result<Self, SpectralError> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }

    /// Parse an edge list: lines `src,dst,weight` with 0-based node ids.
    /// With `complete_diagonal`, diagonal entries are derived so each row
    /// sums to zero (any diagonal entries in the list are replaced).
    pub fn from_edge_list_str(body: &str, complete_diagonal: bool) -> Result<Self, SpectralError> {
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        let mut max_node = 0usize;
        for line in body.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(SpectralError::Invalid(format!("bad edge line: {line:?}")));
            }
            let src: usize = cols[0]
                .trim()
                .parse()
                .map_err(|_| SpectralError::Invalid(format!("bad src: {line:?}")))?;
            let dst: usize = cols[1]
                .trim()
                .parse()
                .map_err(|_| SpectralError::Invalid(format!("bad dst: {line:?}")))?;
            let w: f64 = cols[2]
                .trim()
                .parse()
                .map_err(|_| SpectralError::Invalid(format!("bad weight: {line:?}")))?;
            max_node = max_node.max(src).max(dst);
            edges.push((src, dst, w));
        }
        if edges.is_empty() {
            return Err(SpectralError::Invalid("empty edge list".into()));
        }
        let m = max_node + 1;
        let mut a = DMatrix::zeros(m, m);
        for (src, dst, w) in edges {
            a[(src, dst)] += w;
        }
        if complete_diagonal {
            for i in 0..m {
                let off: f64 = (0..m).filter(|j| *j != i).map(|j| a[(i, j)]).sum();
                a[(i, i)] = -off;
            }
        }
        Self::new(a)
    }

    pub fn from_edge_list_path<P: AsRef<std::path::Path>>(
        path: P,
        complete_diagonal: bool,
    ) -> Result<Self, SpectralError> {
        Self::from_edge_list_str(&std::fs::read_to_string(path)?, complete_diagonal)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for i in 0..self.size() {
            let row: Vec<String> = (0..self.size())
                .map(|j| format!("{}", self.entries[(i, j)]))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Eigenvalue with its multiplicities and Jordan block sizes.
#[derive(Clone, Debug)]
pub struct EigStructure {
    pub value: Complex64,
    pub algebraic: usize,
    pub geometric: usize,
    /// Jordan block sizes, descending; all 1 for a semisimple eigenvalue.
    pub block_sizes: Vec<usize>,
}

/// Full structural and spectral report of a coupling matrix.
#[derive(Clone, Debug)]
pub struct CouplingSpectrum {
    /// All m eigenvalues, sorted by (Re, Im).
    pub eigenvalues: Vec<Complex64>,
    /// Per distinct eigenvalue, sorted by (Re, Im).
    pub structure: Vec<EigStructure>,
    pub is_metzler: bool,
    pub is_irreducible: bool,
    /// Radius -c of the enclosing Gershgorin disc |z - c| <= -c,
    /// c = min_j C_jj.
    pub gershgorin_radius: f64,
    /// h*m with h the largest off-diagonal entry.
    pub standardized_scale: f64,
}

impl CouplingSpectrum {
    pub fn is_diagonalizable(&self) -> bool {
        self.structure.iter().all(|s| s.geometric == s.algebraic)
    }
}

fn sort_complex(vals: &mut [Complex64]) {
    vals.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

fn to_complex_matrix(a: &DMatrix<f64>) -> DMatrix<Complex<f64>> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| Complex::new(a[(i, j)], 0.0))
}

fn rank_with_tol(a: &DMatrix<Complex<f64>>, tol: f64) -> usize {
    let svd = a.clone().svd(false, false);
    svd.singular_values.iter().filter(|s| **s > tol).count()
}

/// Strong connectivity of the off-diagonal support digraph.
fn strongly_connected(a: &DMatrix<f64>, scale: f64) -> bool {
    let m = a.nrows();
    let tol = 1e-12 * scale;
    let reach = |transpose: bool| -> usize {
        let mut seen = vec![false; m];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for j in 0..m {
                let w = if transpose { a[(j, i)] } else { a[(i, j)] };
                if i != j && !seen[j] && w.abs() > tol {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count
    };
    reach(false) == m && reach(true) == m
}

/// Full spectrum with multiplicities, Jordan structure from rank sequences
/// of (C - lambda I)^p, and the structural flags.
pub fn analyze(c: &CouplingMatrix) -> Result<CouplingSpectrum, SpectralError> {
    let a = &c.entries;
    let m = c.size();
    let scale = a.iter().fold(1.0f64, |mx, e| mx.max(e.abs()));

    let mut eigenvalues: Vec<Complex64> = a
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect();
    if eigenvalues.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(SpectralError::EigenFailure);
    }
    sort_complex(&mut eigenvalues);

    // Cluster into distinct eigenvalues.
    let cluster_tol = 1e-6 * scale;
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for ev in &eigenvalues {
        match clusters.iter_mut().find(|(rep, _)| (ev - *rep).norm() < cluster_tol) {
            Some((rep, count)) => {
                // Running mean keeps the representative centered.
                *rep = (*rep * (*count as f64) + ev) / (*count as f64 + 1.0);
                *count += 1;
            }
            None => clusters.push((*ev, 1)),
        }
    }

    let ac = to_complex_matrix(a);
    let frob = a.iter().map(|e| e * e).sum::<f64>().sqrt().max(1.0);
    let mut structure = Vec::with_capacity(clusters.len());
    for (value, algebraic) in clusters {
        let shifted = {
            let mut s = ac.clone();
            for i in 0..m {
                s[(i, i)] -= Complex::new(value.re, value.im);
            }
            s
        };
        // Rank sequence of powers gives the number of blocks of each size:
        // blocks of size >= p equal rank(S^(p-1)) - rank(S^p).
        let mut ranks = vec![m];
        let mut power = DMatrix::identity(m, m);
        for _ in 0..algebraic {
            power = &power * &shifted;
            let sigma_max = power
                .clone()
                .svd(false, false)
                .singular_values
                .iter()
                .fold(0.0f64, |mx, s| mx.max(*s));
            let tol = 1e-8 * frob.max(sigma_max);
            ranks.push(rank_with_tol(&power, tol));
        }
        let geometric = m - ranks[1];
        let mut block_sizes = Vec::new();
        for p in 1..=algebraic {
            let ge_p = ranks[p - 1] - ranks[p];
            let ge_p1 = if p < algebraic {
                ranks[p] - ranks[p + 1]
            } else {
                0
            };
            for _ in 0..ge_p.saturating_sub(ge_p1) {
                block_sizes.push(p);
            }
        }
        block_sizes.sort_unstable_by(|x, y| y.cmp(x));
        structure.push(EigStructure {
            value,
            algebraic,
            geometric,
            block_sizes,
        });
    }

    let is_metzler = (0..m).all(|i| {
        a[(i, i)] <= 1e-12 * scale
            && (0..m).all(|j| i == j || a[(i, j)] >= -1e-12 * scale)
    });
    let diag_min = (0..m).map(|i| a[(i, i)]).fold(f64::INFINITY, f64::min);
    let h = (0..m)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .map(|(i, j)| a[(i, j)])
        .fold(f64::NEG_INFINITY, f64::max);

    Ok(CouplingSpectrum {
        eigenvalues,
        structure,
        is_metzler,
        is_irreducible: strongly_connected(a, scale),
        gershgorin_radius: -diag_min,
        standardized_scale: h * m as f64,
    })
}

/// Standardized Laplacian -C/(h m) and its eigenvalue-argument check:
/// every eigenvalue mu with Im mu >= 0 must satisfy
/// 0 <= Arg(mu) <= pi/2 - pi/m (up to 1e-8 slack).
#[derive(Clone, Debug)]
pub struct StandardizedLaplacian {
    pub scale: f64,
    pub matrix: DMatrix<f64>,
    pub arg_bound_holds: bool,
}

pub fn standardized_laplacian(c: &CouplingMatrix) -> Result<StandardizedLaplacian, SpectralError> {
    let spec = analyze(c)?;
    if !spec.is_metzler {
        return Err(SpectralError::NotMetzler);
    }
    let m = c.size();
    let scale = spec.standardized_scale;
    if !(scale > 0.0) {
        return Err(SpectralError::Invalid(
            "largest off-diagonal entry must be positive".into(),
        ));
    }
    let matrix = -(&c.entries) / scale;
    let bound = std::f64::consts::FRAC_PI_2 - std::f64::consts::PI / m as f64 + 1e-8;
    // The zero eigenvalue sits at the disc's corner; its numerical argument
    // is rounding noise, so only the nonzero spectrum is tested.
    let arg_bound_holds = spec
        .eigenvalues
        .iter()
        .map(|lambda| -lambda / scale)
        .filter(|mu| mu.im >= 0.0 && mu.norm() > 1e-9)
        .all(|mu| {
            let arg = mu.im.atan2(mu.re);
            (-1e-8..=bound).contains(&arg)
        });
    Ok(StandardizedLaplacian {
        scale,
        matrix,
        arg_bound_holds,
    })
}

/// Floquet spectrum of one coupling-eigenvalue block.
#[derive(Clone, Debug)]
pub struct NodeSpectrum {
    pub lambda: Complex64,
    pub spectrum: FloquetSpectrum,
}

/// Outcome of the eigenbasis reduction.
#[derive(Clone, Debug)]
pub struct NetworkStability {
    /// One entry per distinct eigenvalue with Im <= 0 (conjugates carry the
    /// same moduli), sorted by (Re, Im).
    pub per_eigenvalue: Vec<NodeSpectrum>,
    pub unstable: bool,
}

fn block_spectra(
    values: &[Complex64],
    orbit: &PeriodicOrbit,
    coupling: [f64; 3],
    cfg: &IntegratorConfig,
) -> Result<Vec<NodeSpectrum>, SpectralError> {
    let spectra: Vec<NodeSpectrum> = values
        .par_iter()
        .map(|lambda| {
            let param = StabilityParameter::from_coupling_eigenvalue(coupling, *lambda);
            floquet::floquet_spectrum(orbit, &param, cfg).map(|spectrum| NodeSpectrum {
                lambda: *lambda,
                spectrum,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(spectra)
}

fn instability_from_blocks(blocks: &[NodeSpectrum], lambda_scale: f64, margin: f64) -> bool {
    blocks.iter().any(|b| {
        b.lambda.norm() > 1e-9 * lambda_scale && b.spectrum.is_unstable(margin)
    })
}

/// Reduce the coupled network to per-eigenvalue variational problems
/// (requires a diagonalizable coupling matrix). The synchronized solution
/// is unstable iff any nonzero-eigenvalue block has a multiplier beyond
/// the margin; the zero block carries the neutral time-shift mode.
/// Conjugation symmetry restricts evaluation to eigenvalues with Im <= 0.
pub fn reduce_network(
    c: &CouplingMatrix,
    orbit: &PeriodicOrbit,
    coupling: [f64; 3],
    cfg: &IntegratorConfig,
    margin: f64,
) -> Result<NetworkStability, SpectralError> {
    let spec = analyze(c)?;
    if !spec.is_diagonalizable() {
        return Err(SpectralError::NotDiagonalizable);
    }
    let scale = spec
        .eigenvalues
        .iter()
        .fold(1.0f64, |m, z| m.max(z.norm()));
    let lower: Vec<Complex64> = spec
        .structure
        .iter()
        .map(|s| s.value)
        .filter(|z| z.im <= 1e-12 * scale)
        .collect();
    let per_eigenvalue = block_spectra(&lower, orbit, coupling, cfg)?;
    let unstable = instability_from_blocks(&per_eigenvalue, scale, margin);
    Ok(NetworkStability {
        per_eigenvalue,
        unstable,
    })
}

/// Stability verdict in the presence of nontrivial Jordan blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JordanVerdict {
    /// All blocks stable and the matrix is semisimple.
    Stable,
    /// Some diagonal block is unstable; the network is unstable.
    Unstable,
    /// All diagonal blocks are stable but a nontrivial Jordan block exists;
    /// block coupling precludes a full stability claim.
    StableDiagonalBlocks,
}

#[derive(Clone, Debug)]
pub struct JordanReport {
    pub verdict: JordanVerdict,
    pub per_eigenvalue: Vec<NodeSpectrum>,
    pub structure: Vec<EigStructure>,
}

/// Per-eigenvalue verdict that remains valid for non-diagonalizable
/// coupling: the first vector of each Jordan block obeys the same
/// decoupled equation, so an unstable diagonal block implies network
/// instability. With nontrivial blocks and all diagonal blocks stable,
/// only `StableDiagonalBlocks` is claimed.
pub fn jordan_verdict(
    c: &CouplingMatrix,
    orbit: &PeriodicOrbit,
    coupling: [f64; 3],
    cfg: &IntegratorConfig,
    margin: f64,
) -> Result<JordanReport, SpectralError> {
    let spec = analyze(c)?;
    let scale = spec
        .eigenvalues
        .iter()
        .fold(1.0f64, |m, z| m.max(z.norm()));
    let lower: Vec<Complex64> = spec
        .structure
        .iter()
        .map(|s| s.value)
        .filter(|z| z.im <= 1e-12 * scale)
        .collect();
    let per_eigenvalue = block_spectra(&lower, orbit, coupling, cfg)?;
    let unstable = instability_from_blocks(&per_eigenvalue, scale, margin);
    let semisimple = spec.is_diagonalizable();
    let verdict = if unstable {
        JordanVerdict::Unstable
    } else if semisimple {
        JordanVerdict::Stable
    } else {
        JordanVerdict::StableDiagonalBlocks
    };
    Ok(JordanReport {
        verdict,
        per_eigenvalue,
        structure: spec.structure,
    })
}

/// Multipliers of the full 3m-dimensional linearized network, integrated
/// wholesale (no eigenbasis reduction); the independent oracle for
/// `reduce_network`. Returned sorted by descending modulus.
pub fn direct_network_monodromy(
    c: &CouplingMatrix,
    orbit: &PeriodicOrbit,
    coupling: [f64; 3],
    cfg: &IntegratorConfig,
) -> Result<Vec<Complex64>, SpectralError> {
    let m = c.size();
    let n = 3 * m;
    let model = crate::models::lv3_specific(orbit.params());
    let mut cursor = orbit.cursor();
    let mut jac = [0.0f64; 9];
    let a = c.entries.clone();
    let rhs = move |t: f64, x: &[f64], dx: &mut [f64]| {
        let base = cursor.eval3(t);
        model.jacobian(&base, &mut jac);
        // State layout: columns of the fundamental matrix, each column a
        // species-major network perturbation [U_1..U_m, V_1..V_m, W_1..W_m].
        for col in 0..n {
            let x_col = &x[col * n..(col + 1) * n];
            let dx_col = &mut dx[col * n..(col + 1) * n];
            for i in 0..3 {
                for j in 0..m {
                    let mut acc = 0.0;
                    for p in 0..3 {
                        acc += jac[3 * i + p] * x_col[p * m + j];
                    }
                    if coupling[i] != 0.0 {
                        let mut diff = 0.0;
                        for l in 0..m {
                            diff += a[(j, l)] * x_col[i * m + l];
                        }
                        acc += coupling[i] * diff;
                    }
                    dx_col[i * m + j] = acc;
                }
            }
        }
    };
    let mut x0 = vec![0.0; n * n];
    for i in 0..n {
        x0[i * n + i] = 1.0;
    }
    let xt = crate::ode::integrate_final(rhs, &x0, [0.0, orbit.period()], cfg)?;
    // Columns were propagated independently; reassemble the monodromy.
    let mono = DMatrix::from_fn(n, n, |i, j| xt[j * n + i]);
    let mut multipliers: Vec<Complex64> = mono
        .complex_eigenvalues()
        .iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect();
    multipliers.sort_by(|x, y| {
        y.norm()
            .partial_cmp(&x.norm())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(multipliers)
}

/// Constant-coefficient spatial operator, described either by per-species
/// derivative coefficients a_j (j >= 1) or by a tabulated per-species
/// Fourier transform.
#[derive(Clone, Debug)]
pub enum OperatorSymbol {
    /// coeffs[s][j-1] multiplies the j-th spatial derivative of species s.
    Polynomial { coeffs: [Vec<f64>; 3] },
    /// Transform values sampled on `k_grid` (linear interpolation,
    /// clamped at the ends).
    Kernel {
        k_grid: Vec<f64>,
        values: [Vec<Complex64>; 3],
    },
}

/// Per-species stability shifts of a spatial operator at wavenumber k:
/// sum_j a_j (ik)^j for the derivative form, or the tabulated transform.
/// Feeding the result into the Floquet spectrum extends the stability map
/// to general spatial operators.
pub fn operator_symbol(op: &OperatorSymbol, k: f64) -> Result<[Complex64; 3], SpectralError> {
    match op {
        OperatorSymbol::Polynomial { coeffs } => {
            if coeffs.iter().all(|c| c.is_empty()) {
                return Err(SpectralError::EmptyDescriptor);
            }
            let ik = Complex64::new(0.0, k);
            let mut omega = [Complex64::new(0.0, 0.0); 3];
            for (s, species) in coeffs.iter().enumerate() {
                let mut power = Complex64::new(1.0, 0.0);
                for a in species {
                    power *= ik;
                    omega[s] += a * power;
                }
            }
            Ok(omega)
        }
        OperatorSymbol::Kernel { k_grid, values } => {
            if k_grid.is_empty() || values.iter().any(|v| v.len() != k_grid.len()) {
                return Err(SpectralError::EmptyDescriptor);
            }
            let idx = k_grid.partition_point(|x| *x < k);
            let mut omega = [Complex64::new(0.0, 0.0); 3];
            for (s, table) in values.iter().enumerate() {
                omega[s] = if idx == 0 {
                    table[0]
                } else if idx >= k_grid.len() {
                    table[k_grid.len() - 1]
                } else {
                    let (k0, k1) = (k_grid[idx - 1], k_grid[idx]);
                    let w = (k - k0) / (k1 - k0);
                    table[idx - 1] * (1.0 - w) + table[idx] * w
                };
            }
            Ok(omega)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::tests::reference_orbit;
    use crate::floquet::INSTABILITY_MARGIN;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn three_node_example_spectrum() {
        let c = CouplingMatrix::from_rows(&[
            vec![-3.0, 1.0, 2.0],
            vec![1.0, -2.0, 1.0],
            vec![2.0, 1.0, -3.0],
        ])
        .unwrap();
        let spec = analyze(&c).unwrap();
        let want = [-5.0, -3.0, 0.0];
        for (ev, w) in spec.eigenvalues.iter().zip(&want) {
            assert!(close(*ev, Complex64::new(*w, 0.0), 1e-9), "{ev} vs {w}");
        }
        assert!(spec.is_metzler);
        assert!(spec.is_irreducible);
        assert!((spec.gershgorin_radius - 3.0).abs() < 1e-12);
        // Symmetric matrix: all eigenvalues real.
        assert!(spec.eigenvalues.iter().all(|z| z.im.abs() < 1e-9));
    }

    #[test]
    fn directed_cycle_circulant_spectrum() {
        // Eigenvalues of the scaled 4-cycle are w(-1 + i^j), j = 0..3.
        let w = 1.0 / 2.0f64.sqrt();
        let c = CouplingMatrix::directed_cycle(4, w);
        let spec = analyze(&c).unwrap();
        let mut want = vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(-2.0 * w, 0.0),
            Complex64::new(-w, w),
            Complex64::new(-w, -w),
        ];
        sort_complex(&mut want);
        for (ev, expect) in spec.eigenvalues.iter().zip(&want) {
            assert!(close(*ev, *expect, 1e-9), "{ev} vs {expect}");
        }
        // Conjugation closure.
        for ev in &spec.eigenvalues {
            assert!(
                spec.eigenvalues.iter().any(|z| close(*z, ev.conj(), 1e-9)),
                "conjugate of {ev} missing"
            );
        }
    }

    #[test]
    fn two_node_mode_split() {
        let spec = analyze(&CouplingMatrix::two_node(1.0)).unwrap();
        assert!(close(spec.eigenvalues[0], Complex64::new(-2.0, 0.0), 1e-12));
        assert!(close(spec.eigenvalues[1], Complex64::new(0.0, 0.0), 1e-12));
    }

    #[test]
    fn row_sum_violation_detected() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 1.0, -1.0]);
        assert!(matches!(
            CouplingMatrix::new(a),
            Err(SpectralError::RowSumViolation { row: 0, .. })
        ));
    }

    #[test]
    fn standardized_laplacian_two_node_and_cycle() {
        let two = standardized_laplacian(&CouplingMatrix::two_node(1.0)).unwrap();
        assert!((two.scale - 2.0).abs() < 1e-12);
        assert!((two.matrix[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((two.matrix[(0, 1)] + 0.5).abs() < 1e-12);
        assert!(two.arg_bound_holds);

        // The 4-cycle's upper-half-plane eigenvalue sits exactly on the
        // bound pi/2 - pi/4.
        let w = 1.0 / 2.0f64.sqrt();
        let cyc = standardized_laplacian(&CouplingMatrix::directed_cycle(4, w)).unwrap();
        assert!(cyc.arg_bound_holds);

        let not_metzler = CouplingMatrix::from_rows(&[
            vec![1.0, -1.0],
            vec![-1.0, 1.0],
        ])
        .unwrap();
        assert!(matches!(
            standardized_laplacian(&not_metzler),
            Err(SpectralError::NotMetzler)
        ));
    }

    /// Random irreducible Metzler matrix with zero row sums.
    pub(crate) fn random_metzler(rng: &mut ChaCha8Rng, m: usize) -> CouplingMatrix {
        let mut a = DMatrix::zeros(m, m);
        for i in 0..m {
            // A directed Hamiltonian cycle guarantees irreducibility.
            a[(i, (i + 1) % m)] = rng.gen_range(0.2..1.0);
            for j in 0..m {
                if j != i && rng.gen_bool(0.4) {
                    a[(i, j)] += rng.gen_range(0.0..1.0);
                }
            }
            let off: f64 = (0..m).filter(|j| *j != i).map(|j| a[(i, j)]).sum();
            a[(i, i)] = -off;
        }
        CouplingMatrix::new(a).unwrap()
    }

    #[test]
    fn random_metzler_structural_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for trial in 0..50 {
            let m = rng.gen_range(2..=10);
            let c = random_metzler(&mut rng, m);
            let spec = analyze(&c).unwrap();
            assert!(spec.is_metzler, "trial {trial}");
            assert!(spec.is_irreducible, "trial {trial}");
            let norm = c.entries.iter().fold(0.0f64, |mx, e| mx.max(e.abs()));

            // Zero eigenvalue present.
            let zero_dist = spec
                .eigenvalues
                .iter()
                .map(|z| z.norm())
                .fold(f64::INFINITY, f64::min);
            assert!(zero_dist < 1e-9 * norm.max(1.0), "trial {trial}");

            // Gershgorin enclosure.
            let center = Complex64::new(-spec.gershgorin_radius, 0.0);
            for ev in &spec.eigenvalues {
                assert!(
                    (ev - center).norm() <= spec.gershgorin_radius + 1e-8,
                    "trial {trial}: {ev} outside disc"
                );
            }

            // Conjugation closure.
            for ev in &spec.eigenvalues {
                assert!(
                    spec.eigenvalues.iter().any(|z| close(*z, ev.conj(), 1e-9 * norm.max(1.0))),
                    "trial {trial}: conjugate of {ev} missing"
                );
            }

            // Perron simplicity of the zero eigenvalue for irreducible
            // Metzler couplings: the second-smallest modulus is separated.
            let mut moduli: Vec<f64> = spec.eigenvalues.iter().map(|z| z.norm()).collect();
            moduli.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert!(
                moduli[1] > 1e-6 * norm,
                "trial {trial}: zero eigenvalue not simple ({moduli:?})"
            );

            // Standardized-Laplacian argument bound.
            let lap = standardized_laplacian(&c).unwrap();
            assert!(lap.arg_bound_holds, "trial {trial}");
        }
    }

    #[test]
    fn analyze_is_permutation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let c = random_metzler(&mut rng, 6);
        let spec = analyze(&c).unwrap();
        // Relabel nodes by a fixed permutation.
        let perm = [3usize, 0, 4, 1, 5, 2];
        let a = c.entries();
        let permuted = DMatrix::from_fn(6, 6, |i, j| a[(perm[i], perm[j])]);
        let spec_p = analyze(&CouplingMatrix::new(permuted).unwrap()).unwrap();
        for (x, y) in spec.eigenvalues.iter().zip(&spec_p.eigenvalues) {
            assert!(close(*x, *y, 1e-9), "{x} vs {y}");
        }
    }

    #[test]
    fn jordan_structure_detected() {
        let c = CouplingMatrix::from_rows(&[
            vec![-2.0, 1.0, 1.0],
            vec![0.0, -2.0, 2.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let spec = analyze(&c).unwrap();
        assert!(!spec.is_diagonalizable());
        let minus_two = spec
            .structure
            .iter()
            .find(|s| close(s.value, Complex64::new(-2.0, 0.0), 1e-8))
            .expect("eigenvalue -2 present");
        assert_eq!(minus_two.algebraic, 2);
        assert_eq!(minus_two.geometric, 1);
        assert_eq!(minus_two.block_sizes, vec![2]);

        // Semisimple case reports all-trivial blocks.
        let diag = analyze(&CouplingMatrix::two_node(0.7)).unwrap();
        assert!(diag.is_diagonalizable());
        assert!(diag.structure.iter().all(|s| s.block_sizes.iter().all(|b| *b == 1)));
    }

    #[test]
    fn edge_list_and_csv_round_trip() {
        let c = CouplingMatrix::from_edge_list_str("0,1,1.5\n1,0,1.5\n", true).unwrap();
        assert_eq!(c.size(), 2);
        assert!((c.entries()[(0, 0)] + 1.5).abs() < 1e-12);
        let csv = c.to_csv_string();
        let c2 = CouplingMatrix::from_csv_str(&csv).unwrap();
        assert_eq!(c, c2);
    }

    #[test]
    fn operator_symbols() {
        let diffusion = OperatorSymbol::Polynomial {
            coeffs: [vec![0.0, 1.0], vec![], vec![]],
        };
        let omega = operator_symbol(&diffusion, 0.7).unwrap();
        assert!(close(omega[0], Complex64::new(-0.49, 0.0), 1e-14));
        assert!(close(omega[1], Complex64::new(0.0, 0.0), 1e-14));

        let advection = OperatorSymbol::Polynomial {
            coeffs: [vec![2.0], vec![], vec![]],
        };
        let omega = operator_symbol(&advection, 0.5).unwrap();
        assert!(close(omega[0], Complex64::new(0.0, 1.0), 1e-14));

        let fourth = OperatorSymbol::Polynomial {
            coeffs: [vec![0.0, 0.0, 0.0, -3.0], vec![], vec![]],
        };
        let omega = operator_symbol(&fourth, 2.0).unwrap();
        assert!(close(omega[0], Complex64::new(-48.0, 0.0), 1e-12));

        let empty = OperatorSymbol::Polynomial {
            coeffs: [vec![], vec![], vec![]],
        };
        assert!(matches!(
            operator_symbol(&empty, 1.0),
            Err(SpectralError::EmptyDescriptor)
        ));

        let kernel = OperatorSymbol::Kernel {
            k_grid: vec![0.0, 1.0, 2.0],
            values: [
                vec![
                    Complex64::new(0.0, 0.0),
                    Complex64::new(-1.0, 0.0),
                    Complex64::new(-4.0, 0.0),
                ],
                vec![Complex64::new(0.0, 0.0); 3],
                vec![Complex64::new(0.0, 0.0); 3],
            ],
        };
        let omega = operator_symbol(&kernel, 1.5).unwrap();
        assert!(close(omega[0], Complex64::new(-2.5, 0.0), 1e-14));
    }

    #[test]
    fn two_node_reduction_flags_period_doubling() {
        let orbit = reference_orbit();
        let cfg = IntegratorConfig::default();
        let c = CouplingMatrix::two_node(1.0);
        // Coupling at half the critical squared wavenumber: unstable with a
        // near-real multiplier at -1.
        let res = reduce_network(&c, orbit, [0.1922, 0.0, 0.0], &cfg, INSTABILITY_MARGIN).unwrap();
        assert!(res.unstable);
        let worst = res
            .per_eigenvalue
            .iter()
            .max_by(|a, b| {
                a.spectrum
                    .leading_modulus
                    .partial_cmp(&b.spectrum.leading_modulus)
                    .unwrap()
            })
            .unwrap();
        assert!(worst.spectrum.multipliers[0].re < -1.0);
        assert!(worst.spectrum.multipliers[0].im.abs() < 1e-2);

        // Uncoupled network reduces to the neutral spectrum: stable.
        let res0 = reduce_network(&c, orbit, [0.0, 0.0, 0.0], &cfg, INSTABILITY_MARGIN).unwrap();
        assert!(!res0.unstable);
    }

    #[test]
    fn reduction_matches_direct_monodromy() {
        let orbit = reference_orbit();
        let cfg = IntegratorConfig::default();
        let c = CouplingMatrix::two_node(1.0);
        let coupling = [0.13, 0.02, 0.05];
        let reduced = reduce_network(&c, orbit, coupling, &cfg, INSTABILITY_MARGIN).unwrap();
        let mut expected: Vec<Complex64> = reduced
            .per_eigenvalue
            .iter()
            .flat_map(|b| b.spectrum.multipliers.into_iter())
            .collect();
        let direct = direct_network_monodromy(&c, orbit, coupling, &cfg).unwrap();
        assert_eq!(direct.len(), 6);
        // Multiset match within 1e-6.
        for d in &direct {
            let (idx, dist) = expected
                .iter()
                .enumerate()
                .map(|(i, e)| (i, (d - e).norm()))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            assert!(dist < 1e-6, "multiplier {d} unmatched (nearest {dist:e})");
            expected.swap_remove(idx);
        }
    }

    #[test]
    fn jordan_verdict_consistency_and_instability_transfer() {
        let orbit = reference_orbit();
        let cfg = IntegratorConfig::default();

        // Diagonalizable coupling: verdict agrees with the reduction.
        let c = CouplingMatrix::two_node(1.0);
        let report = jordan_verdict(&c, orbit, [0.1922, 0.0, 0.0], &cfg, INSTABILITY_MARGIN)
            .unwrap();
        assert_eq!(report.verdict, JordanVerdict::Unstable);
        let stable = jordan_verdict(&c, orbit, [0.01, 0.0, 0.0], &cfg, INSTABILITY_MARGIN)
            .unwrap();
        assert_eq!(stable.verdict, JordanVerdict::Stable);

        // Nondiagonalizable with a 2-block at lambda = -2: choosing the
        // coupling so that -2 D_u lands in the unstable band transfers the
        // instability to the network.
        let cj = CouplingMatrix::from_rows(&[
            vec![-2.0, 1.0, 1.0],
            vec![0.0, -2.0, 2.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        assert!(matches!(
            reduce_network(&cj, orbit, [0.1922, 0.0, 0.0], &cfg, INSTABILITY_MARGIN),
            Err(SpectralError::NotDiagonalizable)
        ));
        let unstable = jordan_verdict(&cj, orbit, [0.1922, 0.0, 0.0], &cfg, INSTABILITY_MARGIN)
            .unwrap();
        assert_eq!(unstable.verdict, JordanVerdict::Unstable);
        let partial = jordan_verdict(&cj, orbit, [0.01, 0.0, 0.0], &cfg, INSTABILITY_MARGIN)
            .unwrap();
        assert_eq!(partial.verdict, JordanVerdict::StableDiagonalBlocks);
    }
}
