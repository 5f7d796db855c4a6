//! Kernel functions on `R^d` and their constants.
//!
//! Every family is normalised to integrate to one. The constants used by the
//! privacy and variance formulas are computed in closed form at construction:
//!
//! | family        | `K(t)`                              | `c_K`          | `b_K`                       |
//! |---------------|-------------------------------------|----------------|-----------------------------|
//! | triangular    | `∏ (1 − |t_i|)_+`                   | `1`            | `(1 − 1/(2√d))^d`           |
//! | epanechnikov  | `∏ (3/4)(1 − t_i²)_+`               | `(3/4)^d`      | `(3/4)^(d+1)`               |
//! | gaussian      | `(2π)^(−d/2) exp(−‖t‖²/2)`          | `(2π)^(−d/2)`  | `(2π)^(−d/2) e^(−1/8)`      |
//!
//! `b_K` is the minimum of `K` over the Euclidean ball of radius 1/2. For the
//! triangular product the minimiser spreads the radius evenly over all
//! coordinates; for the Epanechnikov product it puts it on a single coordinate.
//!
//! The Gaussian kernel is not compactly supported. It is accepted because the
//! one-datum RKHS sensitivity bound only needs `K(0) ≤ c_K`. The Epanechnikov
//! product is *not* positive definite, so it cannot serve as the covariance of
//! the privacy noise; see [`KernelSpec::is_positive_definite`].

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Triangular,
    Epanechnikov,
    Gaussian,
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelFamily::Triangular => "triangular",
            KernelFamily::Epanechnikov => "epanechnikov",
            KernelFamily::Gaussian => "gaussian",
        })
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "triangular" => Ok(KernelFamily::Triangular),
            "epanechnikov" | "epanechnikov-product" => Ok(KernelFamily::Epanechnikov),
            "gaussian" => Ok(KernelFamily::Gaussian),
            other => Err(Error::Config(format!("unknown kernel family '{other}'"))),
        }
    }
}

/// A kernel family in a fixed dimension together with its constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    dim: usize,
    c_k: f64,
    b_k: f64,
    l_k: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("kernel dimension must be positive".into()));
        }
        let d = dim as f64;
        let (c_k, b_k, l_k) = match family {
            KernelFamily::Triangular => (1.0, (1.0 - 0.5 / d.sqrt()).powi(dim as i32), d.sqrt()),
            KernelFamily::Epanechnikov => {
                let c = 0.75_f64.powi(dim as i32);
                // Upper bound on ‖∇K‖: each partial derivative is at most 2|t_i| c_K.
                (c, c * 0.75, 2.0 * d.sqrt() * c)
            }
            KernelFamily::Gaussian => {
                let c = (2.0 * PI).powf(-d / 2.0);
                (c, c * (-0.125_f64).exp(), c * (-0.5_f64).exp())
            }
        };
        Ok(Self { family, dim, c_k, b_k, l_k })
    }

    pub fn triangular(dim: usize) -> Result<Self> {
        Self::new(KernelFamily::Triangular, dim)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `sup_t K(t)`, attained at the origin.
    pub fn c_k(&self) -> f64 {
        self.c_k
    }

    /// `min { K(t) : ‖t‖₂ ≤ 1/2 }`.
    pub fn b_k(&self) -> f64 {
        self.b_k
    }

    /// Lipschitz constant with respect to the Euclidean norm.
    pub fn l_k(&self) -> f64 {
        self.l_k
    }

    /// Half-width of the support in the sup-norm, `None` for unbounded support.
    pub fn support_radius(&self) -> Option<f64> {
        match self.family {
            KernelFamily::Triangular | KernelFamily::Epanechnikov => Some(1.0),
            KernelFamily::Gaussian => None,
        }
    }

    /// Whether Gram matrices of this kernel are positive semidefinite for every
    /// point configuration.
    pub fn is_positive_definite(&self) -> bool {
        !matches!(self.family, KernelFamily::Epanechnikov)
    }

    /// `K(t)`.
    pub fn eval(&self, t: &[f64]) -> Result<f64> {
        if t.len() != self.dim {
            return Err(Error::Input(format!(
                "kernel of dimension {} evaluated at a point of dimension {}",
                self.dim,
                t.len()
            )));
        }
        Ok(self.value(t.iter().copied()))
    }

    /// `K((a − b) / h)` without allocating. Both slices must have length `dim`.
    #[inline]
    pub fn eval_scaled(&self, a: &[f64], b: &[f64], h: f64) -> f64 {
        debug_assert_eq!(a.len(), self.dim);
        debug_assert_eq!(b.len(), self.dim);
        self.value(a.iter().zip(b).map(|(x, y)| (x - y) / h))
    }

    #[inline]
    fn value(&self, t: impl Iterator<Item = f64>) -> f64 {
        match self.family {
            KernelFamily::Triangular => {
                let mut acc = 1.0;
                for ti in t {
                    let f = 1.0 - ti.abs();
                    if f <= 0.0 {
                        return 0.0;
                    }
                    acc *= f;
                }
                acc
            }
            KernelFamily::Epanechnikov => {
                let mut acc = self.c_k;
                for ti in t {
                    let f = 1.0 - ti * ti;
                    if f <= 0.0 {
                        return 0.0;
                    }
                    acc *= f;
                }
                acc
            }
            KernelFamily::Gaussian => {
                let sq: f64 = t.map(|ti| ti * ti).sum();
                self.c_k * (-0.5 * sq).exp()
            }
        }
    }

    fn check_points(&self, points: &[Vec<f64>]) -> Result<()> {
        match points.iter().position(|p| p.len() != self.dim) {
            Some(i) => Err(Error::Input(format!(
                "point {i} has dimension {}, expected {}",
                points[i].len(),
                self.dim
            ))),
            None => Ok(()),
        }
    }
}

/// The `q × q` matrix with entries `K((x_a − x_b) / h)`.
pub fn gram_matrix(spec: &KernelSpec, points: &[Vec<f64>], h: f64) -> Result<DMatrix<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Input(format!("bandwidth must be positive, got {h}")));
    }
    spec.check_points(points)?;
    let q = points.len();
    let mut g = DMatrix::zeros(q, q);
    for a in 0..q {
        g[(a, a)] = spec.c_k();
        for b in 0..a {
            let v = spec.eval_scaled(&points[a], &points[b], h);
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    Ok(g)
}
