//! Kernels on `[-1, 1]` and the one-sided moment constants that enter the
//! bias and variance of boundary local linear fits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    #[default]
    Uniform,
    Triangular,
}

impl KernelKind {
    pub fn eval(self, u: f64) -> f64 {
        let a = u.abs();
        match self {
            KernelKind::Uniform => {
                if a <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            KernelKind::Triangular => {
                if a <= 1.0 {
                    1.0 - a
                } else {
                    0.0
                }
            }
        }
    }

    /// Closed-form moments.
    pub fn moments(self) -> KernelMoments {
        match self {
            // K = 1 on [0, 1]: both moment families are 1 / (j + 1).
            KernelKind::Uniform => KernelMoments::from_parts(
                [1.0, 1.0 / 2.0, 1.0 / 3.0, 1.0 / 4.0],
                [1.0, 1.0 / 2.0, 1.0 / 3.0],
            ),
            // int u^j (1-u) = 1/((j+1)(j+2)), int u^j (1-u)^2 = 2/((j+1)(j+2)(j+3))
            KernelKind::Triangular => KernelMoments::from_parts(
                [1.0 / 2.0, 1.0 / 6.0, 1.0 / 12.0, 1.0 / 20.0],
                [1.0 / 3.0, 1.0 / 12.0, 1.0 / 30.0],
            ),
        }
    }

    /// Constant of the Imbens–Kalyanaraman plug-in rule for this kernel.
    pub fn ik_constant(self) -> f64 {
        match self {
            KernelKind::Uniform => 5.40,
            KernelKind::Triangular => 3.4375,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Uniform => "uniform",
            KernelKind::Triangular => "triangular",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(KernelKind::Uniform),
            "triangular" => Ok(KernelKind::Triangular),
            _ => Err(format!(
                "unknown kernel `{s}` (expected uniform or triangular)"
            )),
        }
    }
}

/// `kappa[j] = int_0^1 u^j K(u) du`, `rho[j] = int_0^1 u^j K(u)^2 du`, and the
/// derived bias (`xi1`) and variance (`xi2`) constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelMoments {
    pub kappa: [f64; 4],
    pub rho: [f64; 3],
    pub xi1: f64,
    pub xi2: f64,
}

impl KernelMoments {
    pub fn from_parts(kappa: [f64; 4], rho: [f64; 3]) -> Self {
        let [k0, k1, k2, k3] = kappa;
        let [r0, r1, r2] = rho;
        let det = k0 * k2 - k1 * k1;
        Self {
            kappa,
            rho,
            xi1: (k2 * k2 - k1 * k3) / det,
            xi2: (k2 * k2 * r0 - 2.0 * k1 * k2 * r1 + k0 * k0 * r2) / (det * det),
        }
    }

    /// Moments of an arbitrary kernel by adaptive quadrature on `[0, 1]`.
    pub fn from_kernel_fn(k: impl Fn(f64) -> f64) -> Self {
        let kappa = std::array::from_fn(|j| integrate(|u| u.powi(j as i32) * k(u), 0.0, 1.0));
        let rho = std::array::from_fn(|j| integrate(|u| u.powi(j as i32) * k(u) * k(u), 0.0, 1.0));
        Self::from_parts(kappa, rho)
    }

    /// `kappa0 kappa2 - kappa1^2`; must be strictly positive.
    pub fn determinant(&self) -> f64 {
        self.kappa[0] * self.kappa[2] - self.kappa[1] * self.kappa[1]
    }
}

/// Adaptive Simpson quadrature to absolute tolerance 1e-15.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(&f, a, b, fa, fm, fb, whole, 1e-15, 40)
}
