//! Roots of monic complex cubics, used as the eigensolver for 3x3 matrices.
//!
//! Closed-form (Cardano) seeds polished by Newton iterations, with a
//! Durand-Kerner simultaneous iteration as fallback when the residuals do
//! not converge. The smallest root is additionally refined through the
//! product identity r0*r1*r2 = -c, which is better conditioned when one
//! root is orders of magnitude below the others.

use num_complex::Complex64;

type C = Complex64;

fn eval(a: C, b: C, c: C, z: C) -> C {
    ((z + a) * z + b) * z + c
}

fn eval_deriv(a: C, b: C, z: C) -> C {
    (3.0 * z + 2.0 * a) * z + b
}

fn newton_polish(a: C, b: C, c: C, mut z: C) -> C {
    for _ in 0..8 {
        let p = eval(a, b, c, z);
        let dp = eval_deriv(a, b, z);
        if dp.norm() == 0.0 {
            break;
        }
        let dz = p / dp;
        let z_next = z - dz;
        if !z_next.re.is_finite() || !z_next.im.is_finite() {
            break;
        }
        z = z_next;
        if dz.norm() <= 1e-16 * z.norm().max(1e-300) {
            break;
        }
    }
    z
}

fn residual_scale(a: C, b: C, c: C, z: C) -> f64 {
    let zn = z.norm();
    zn * zn * zn + a.norm() * zn * zn + b.norm() * zn + c.norm()
}

fn cardano(a: C, b: C, c: C) -> [C; 3] {
    let third = 1.0 / 3.0;
    let shift = a * third;
    // Depressed cubic x^3 + p x + q with z = x - a/3.
    let p = b - a * a * third;
    let q = a * (2.0 * a * a / 27.0) - a * b * third + c;

    let omega = C::new(-0.5, 0.75f64.sqrt());

    if p.norm() == 0.0 {
        let r = (-q).powf(third);
        return [r - shift, r * omega - shift, r * omega.conj() - shift];
    }

    let disc = (q * q * 0.25 + p * p * p / 27.0).sqrt();
    // Pick the branch that avoids cancellation in -q/2 +- disc.
    let s1 = -q * 0.5 + disc;
    let s2 = -q * 0.5 - disc;
    let s = if s1.norm() >= s2.norm() { s1 } else { s2 };
    let u = s.powf(third);
    let mut roots = [C::new(0.0, 0.0); 3];
    for (i, root) in roots.iter_mut().enumerate() {
        let uk = match i {
            0 => u,
            1 => u * omega,
            _ => u * omega.conj(),
        };
        let x = if uk.norm() == 0.0 { uk } else { uk - p / (3.0 * uk) };
        *root = x - shift;
    }
    roots
}

fn durand_kerner(a: C, b: C, c: C) -> [C; 3] {
    let radius = 1.0 + a.norm().max(b.norm()).max(c.norm());
    let seed = C::new(0.4, 0.9);
    let mut r = [
        seed * radius,
        seed * seed * radius,
        seed * seed * seed * radius,
    ];
    for _ in 0..200 {
        let mut max_move = 0.0f64;
        for i in 0..3 {
            let mut denom = C::new(1.0, 0.0);
            for j in 0..3 {
                if j != i {
                    denom *= r[i] - r[j];
                }
            }
            if denom.norm() == 0.0 {
                continue;
            }
            let step = eval(a, b, c, r[i]) / denom;
            r[i] -= step;
            max_move = max_move.max(step.norm());
        }
        if max_move <= 1e-15 * radius {
            break;
        }
    }
    r
}

/// Roots of z^3 + a z^2 + b z + c, ordered by descending modulus with
/// deterministic tie-break (descending real part, then imaginary part).
pub(crate) fn cubic_roots(a: C, b: C, c: C) -> [C; 3] {
    let mut roots = cardano(a, b, c);
    for r in roots.iter_mut() {
        *r = newton_polish(a, b, c, *r);
    }

    // Refine the smallest-modulus root via the product of roots.
    sort_desc(&mut roots);
    if c.norm() > 0.0 {
        let prod = roots[0] * roots[1];
        if prod.norm() > 0.0 {
            let candidate = newton_polish(a, b, c, -c / prod);
            if eval(a, b, c, candidate).norm() <= eval(a, b, c, roots[2]).norm() {
                roots[2] = candidate;
            }
        }
    }

    let ok = roots.iter().all(|r| {
        r.re.is_finite()
            && r.im.is_finite()
            && eval(a, b, c, *r).norm() <= 1e-9 * residual_scale(a, b, c, *r).max(1e-300)
    });
    if !ok {
        roots = durand_kerner(a, b, c);
        for r in roots.iter_mut() {
            *r = newton_polish(a, b, c, *r);
        }
        sort_desc(&mut roots);
    }
    sort_desc(&mut roots);
    roots
}

fn sort_desc(roots: &mut [C; 3]) {
    roots.sort_by(|x, y| {
        y.norm()
            .partial_cmp(&x.norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(y.re.partial_cmp(&x.re).unwrap_or(std::cmp::Ordering::Equal))
            .then(y.im.partial_cmp(&x.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// Eigenvalues of a 3x3 complex matrix via its characteristic cubic.
pub(crate) fn eigenvalues_3x3(m: &[[C; 3]; 3]) -> [C; 3] {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2]
        - m[0][2] * m[2][0]
        + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    let det = det_3x3(m);
    cubic_roots(-tr, minors, -det)
}

pub(crate) fn det_3x3(m: &[[C; 3]; 3]) -> C {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}
