//! Vector fields with analytic Jacobians: the cyclic two-parameter
//! Lotka-Volterra system, its general three-species form, and the
//! fixed-point / Hopf-curve / parameter-region analysis built on them.

use num_complex::Complex64;
use thiserror::Error;

use crate::cubic;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("coexistence point has a non-positive component: ({0}, {1}, {2})")]
    NonPositiveComponent(f64, f64, f64),
    #[error("parameters violate the admissibility conditions: alpha = {alpha}, gamma = {gamma}")]
    ConditionViolation { alpha: f64, gamma: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Parameters of the cyclic two-parameter system
/// u' = r1 u (gamma - u - alpha v), v' = r2 v (1 - v - alpha w),
/// w' = r3 w (1 - w - alpha u).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LVParams {
    pub alpha: f64,
    pub gamma: f64,
    pub r: [f64; 3],
}

impl LVParams {
    pub fn new(alpha: f64, gamma: f64) -> Self {
        Self {
            alpha,
            gamma,
            r: [1.0, 1.0, 1.0],
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.alpha > 0.0) || !(self.gamma > 0.0) {
            return Err(ModelError::InvalidParams(format!(
                "alpha and gamma must be positive, got alpha = {}, gamma = {}",
                self.alpha, self.gamma
            )));
        }
        if self.r.iter().any(|r| !r.is_finite()) {
            return Err(ModelError::InvalidParams("non-finite rate".into()));
        }
        Ok(())
    }

    /// Admissibility of the coexistence point:
    /// alpha > 1 and (alpha - 1)/alpha^2 < gamma < (alpha^2 + 1)/alpha.
    pub fn conditions_hold(&self) -> bool {
        let a = self.alpha;
        a > 1.0 && (a - 1.0) / (a * a) < self.gamma && self.gamma < (a * a + 1.0) / a
    }
}

/// Parameters of the general three-species competitive system
/// u_i' = r_i u_i (1 - u_i - alpha_i u_{i+1} - beta_i u_{i+2}) (indices cyclic).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneralLV3Params {
    pub r: [f64; 3],
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
}

/// A vector field together with its analytic Jacobian.
pub struct ModelSpec {
    dim: usize,
    rhs: Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
    jacobian: Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
    name: &'static str,
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn rhs(&self, state: &[f64], out: &mut [f64]) {
        (self.rhs)(state, out)
    }

    pub fn rhs_vec(&self, state: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.rhs(state, &mut out);
        out
    }

    /// Analytic Jacobian, written row-major into `out` (dim * dim entries).
    pub fn jacobian(&self, state: &[f64], out: &mut [f64]) {
        (self.jacobian)(state, out)
    }

    /// Maximum relative mismatch between the analytic Jacobian and a central
    /// finite difference of the vector field at `state`.
    pub fn jacobian_fd_error(&self, state: &[f64]) -> f64 {
        let n = self.dim;
        let mut jac = vec![0.0; n * n];
        self.jacobian(state, &mut jac);
        let mut fd = vec![0.0; n * n];
        let mut plus = vec![0.0; n];
        let mut minus = vec![0.0; n];
        let mut x = state.to_vec();
        for j in 0..n {
            let h = 1e-6 * (1.0 + state[j].abs());
            let orig = x[j];
            x[j] = orig + h;
            self.rhs(&x, &mut plus);
            x[j] = orig - h;
            self.rhs(&x, &mut minus);
            x[j] = orig;
            for i in 0..n {
                fd[i * n + j] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
        let scale = jac
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-12);
        jac.iter()
            .zip(&fd)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            / scale
    }
}

/// The cyclic two-parameter system of three competing species.
pub fn lv3_specific(params: &LVParams) -> ModelSpec {
    let LVParams { alpha, gamma, r } = *params;
    let rhs = move |y: &[f64], out: &mut [f64]| {
        let (u, v, w) = (y[0], y[1], y[2]);
        out[0] = r[0] * u * (gamma - u - alpha * v);
        out[1] = r[1] * v * (1.0 - v - alpha * w);
        out[2] = r[2] * w * (1.0 - w - alpha * u);
    };
    let jac = move |y: &[f64], out: &mut [f64]| {
        let (u, v, w) = (y[0], y[1], y[2]);
        out[0] = r[0] * (gamma - 2.0 * u - alpha * v);
        out[1] = -r[0] * alpha * u;
        out[2] = 0.0;
        out[3] = 0.0;
        out[4] = r[1] * (1.0 - 2.0 * v - alpha * w);
        out[5] = -r[1] * alpha * v;
        out[6] = -r[2] * alpha * w;
        out[7] = 0.0;
        out[8] = r[2] * (1.0 - 2.0 * w - alpha * u);
    };
    ModelSpec {
        dim: 3,
        rhs: Box::new(rhs),
        jacobian: Box::new(jac),
        name: "lv3-specific",
    }
}

/// The general three-species competitive system with cyclic interaction
/// structure; reduces to the two-parameter system for equal alphas, zero
/// betas and unit carrying capacity in the first component.
pub fn lv3_general(params: &GeneralLV3Params) -> ModelSpec {
    let GeneralLV3Params { r, alpha, beta } = *params;
    let rhs = move |y: &[f64], out: &mut [f64]| {
        let (u1, u2, u3) = (y[0], y[1], y[2]);
        out[0] = r[0] * u1 * (1.0 - u1 - alpha[0] * u2 - beta[0] * u3);
        out[1] = r[1] * u2 * (1.0 - u2 - alpha[1] * u3 - beta[1] * u1);
        out[2] = r[2] * u3 * (1.0 - u3 - alpha[2] * u1 - beta[2] * u2);
    };
    let jac = move |y: &[f64], out: &mut [f64]| {
        let (u1, u2, u3) = (y[0], y[1], y[2]);
        out[0] = r[0] * (1.0 - 2.0 * u1 - alpha[0] * u2 - beta[0] * u3);
        out[1] = -r[0] * alpha[0] * u1;
        out[2] = -r[0] * beta[0] * u1;
        out[3] = -r[1] * beta[1] * u2;
        out[4] = r[1] * (1.0 - 2.0 * u2 - alpha[1] * u3 - beta[1] * u1);
        out[5] = -r[1] * alpha[1] * u2;
        out[6] = -r[2] * alpha[2] * u3;
        out[7] = -r[2] * beta[2] * u3;
        out[8] = r[2] * (1.0 - 2.0 * u3 - alpha[2] * u1 - beta[2] * u2);
    };
    ModelSpec {
        dim: 3,
        rhs: Box::new(rhs),
        jacobian: Box::new(jac),
        name: "lv3-general",
    }
}

/// Interior equilibrium where all three species coexist. Fails with
/// `NonPositiveComponent` when the admissibility conditions are violated
/// and a component drops to zero or below.
pub fn coexistence_point(params: &LVParams) -> Result<[f64; 3], ModelError> {
    let a = params.alpha;
    let g = params.gamma;
    let denom = 1.0 + a * a * a;
    if denom == 0.0 {
        return Err(ModelError::InvalidParams("1 + alpha^3 = 0".into()));
    }
    let u = (g - a + a * a) / denom;
    let v = (1.0 - a + a * a * g) / denom;
    let w = (1.0 - a * g + a * a) / denom;
    if u <= 0.0 || v <= 0.0 || w <= 0.0 {
        return Err(ModelError::NonPositiveComponent(u, v, w));
    }
    Ok([u, v, w])
}

/// Residual of the Hopf-bifurcation curve separating the coexistence
/// region from the limit-cycle region; zero on the curve. Evaluated in
/// Horner form in gamma with coefficients polynomial in alpha.
pub fn hopf_residual(params: &LVParams) -> f64 {
    let a = params.alpha;
    let g = params.gamma;
    let a2 = a * a;
    let a3 = a2 * a;
    let a4 = a3 * a;
    let a5 = a4 * a;
    let a6 = a5 * a;
    let a7 = a6 * a;
    let c3 = a * (1.0 - a - a3);
    let c2 = -2.0 + 3.0 * a - 5.0 * a2 + 6.0 * a3 + a5 - a6;
    let c1 = -4.0 + 7.0 * a - 11.0 * a2 + 5.0 * a3 - 7.0 * a4 + a5 + a7;
    let c0 = (1.0 - a) * (1.0 - a) * (-2.0 + a - 3.0 * a2 - a3 - a4);
    ((c3 * g + c2) * g + c1) * g + c0
}

/// gamma^0 coefficient of the Hopf residual, exposed for direct checks of
/// the polynomial structure.
pub fn hopf_residual_gamma0(alpha: f64) -> f64 {
    let a = alpha;
    let a2 = a * a;
    (1.0 - a) * (1.0 - a) * (-2.0 + a - 3.0 * a2 - a2 * a - a2 * a2)
}

/// Constant governing trajectories near the heteroclinic cycle:
/// c = (alpha - 1)(alpha - gamma)(alpha gamma - 1) / gamma.
/// The cycle attracts when c > 1.
pub fn heteroclinic_constant(params: &LVParams) -> f64 {
    let a = params.alpha;
    let g = params.gamma;
    (a - 1.0) * (a - g) * (a * g - 1.0) / g
}

/// Attractor classification of the (alpha, gamma) plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    /// Coexistence point is the attractor.
    A,
    /// The attractor is a limit cycle.
    B,
    /// The attractor is a heteroclinic cycle.
    C,
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Region::A => write!(f, "A"),
            Region::B => write!(f, "B"),
            Region::C => write!(f, "C"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RegionVerdict {
    pub region: Region,
    pub hopf_residual: f64,
    pub heteroclinic_c: f64,
}

/// Eigenvalues of the Jacobian at the coexistence point.
pub fn coexistence_eigenvalues(params: &LVParams) -> Result<[Complex64; 3], ModelError> {
    let point = coexistence_point(params)?;
    let model = lv3_specific(params);
    let mut jac = [0.0; 9];
    model.jacobian(&point, &mut jac);
    let m = [
        [
            Complex64::new(jac[0], 0.0),
            Complex64::new(jac[1], 0.0),
            Complex64::new(jac[2], 0.0),
        ],
        [
            Complex64::new(jac[3], 0.0),
            Complex64::new(jac[4], 0.0),
            Complex64::new(jac[5], 0.0),
        ],
        [
            Complex64::new(jac[6], 0.0),
            Complex64::new(jac[7], 0.0),
            Complex64::new(jac[8], 0.0),
        ],
    ];
    Ok(cubic::eigenvalues_3x3(&m))
}

/// Classify the attractor: region A when the coexistence point is linearly
/// stable, otherwise C when the heteroclinic constant exceeds 1, else B.
pub fn classify_region(params: &LVParams) -> Result<RegionVerdict, ModelError> {
    params.validate()?;
    if !params.conditions_hold() {
        return Err(ModelError::ConditionViolation {
            alpha: params.alpha,
            gamma: params.gamma,
        });
    }
    let eigs = coexistence_eigenvalues(params)?;
    let c = heteroclinic_constant(params);
    let region = if eigs.iter().all(|e| e.re < 0.0) {
        Region::A
    } else if c > 1.0 {
        Region::C
    } else {
        Region::B
    };
    Ok(RegionVerdict {
        region,
        hopf_residual: hopf_residual(params),
        heteroclinic_c: c,
    })
}
