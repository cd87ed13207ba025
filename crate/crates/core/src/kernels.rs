//! The ten kernel functions and Gram-matrix assembly.
//!
//! Each kind has fixed default parameters (see [`KernelSpec::default_for`]).
//! Three kinds differ from their textbook forms:
//!
//! * `Exponential` uses the unsquared distance, `exp(-|x-y| / (2 sigma^2))`.
//! * `RationalQuadratic` is `exp(1 - d^2 / (d^2 + c))` including the outer
//!   exponential, so `k(x, x) = e` rather than 1.
//! * `Circular` uses the standard form
//!   `(2/pi) (acos(u) - u sqrt(1 - u^2))`, `u = |x-y| / sigma`, zero for
//!   `u >= 1`.
//!
//! With pixels in `[0, 1]`, distances between 8x8 patches usually exceed
//! `sigma = 0.2`, so `Circular` and `Spherical` Gram matrices are close to
//! the identity under their default parameters.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::patches::PatchMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Linear,
    Gaussian,
    Polynomial,
    Exponential,
    Laplacian,
    Sigmoid,
    RationalQuadratic,
    InverseMultiquadric,
    Circular,
    Spherical,
}

impl KernelKind {
    pub const ALL: [KernelKind; 10] = [
        KernelKind::Linear,
        KernelKind::Gaussian,
        KernelKind::Polynomial,
        KernelKind::Exponential,
        KernelKind::Laplacian,
        KernelKind::Sigmoid,
        KernelKind::RationalQuadratic,
        KernelKind::InverseMultiquadric,
        KernelKind::Circular,
        KernelKind::Spherical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Gaussian => "gaussian",
            KernelKind::Polynomial => "polynomial",
            KernelKind::Exponential => "exponential",
            KernelKind::Laplacian => "laplacian",
            KernelKind::Sigmoid => "sigmoid",
            KernelKind::RationalQuadratic => "rational_quadratic",
            KernelKind::InverseMultiquadric => "inverse_multiquadric",
            KernelKind::Circular => "circular",
            KernelKind::Spherical => "spherical",
        }
    }

    pub fn from_name(name: &str) -> Option<KernelKind> {
        let norm = name.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        KernelKind::ALL.into_iter().find(|k| k.name() == norm)
    }

    /// Stable numeric tag used by the model file format.
    pub fn code(self) -> u8 {
        KernelKind::ALL.iter().position(|&k| k == self).unwrap() as u8
    }

    pub fn from_code(code: u8) -> Option<KernelKind> {
        KernelKind::ALL.get(code as usize).copied()
    }

    /// Parameter names in canonical order.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            KernelKind::Linear => &["c"],
            KernelKind::Gaussian
            | KernelKind::Exponential
            | KernelKind::Laplacian
            | KernelKind::Circular
            | KernelKind::Spherical => &["sigma"],
            KernelKind::Polynomial => &["d"],
            KernelKind::Sigmoid => &["alpha", "c"],
            KernelKind::RationalQuadratic | KernelKind::InverseMultiquadric => &["c"],
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A kernel function together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear { c: f64 },
    Gaussian { sigma: f64 },
    Polynomial { degree: u32 },
    Exponential { sigma: f64 },
    Laplacian { sigma: f64 },
    Sigmoid { alpha: f64, c: f64 },
    RationalQuadratic { c: f64 },
    InverseMultiquadric { c: f64 },
    Circular { sigma: f64 },
    Spherical { sigma: f64 },
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::default_for(KernelKind::Linear)
    }
}

impl KernelSpec {
    /// The kernel with its default parameters.
    pub fn default_for(kind: KernelKind) -> KernelSpec {
        match kind {
            KernelKind::Linear => KernelSpec::Linear { c: 0.0 },
            KernelKind::Gaussian => KernelSpec::Gaussian { sigma: 1.0 },
            KernelKind::Polynomial => KernelSpec::Polynomial { degree: 3 },
            KernelKind::Exponential => KernelSpec::Exponential { sigma: 1.0 },
            KernelKind::Laplacian => KernelSpec::Laplacian { sigma: 1.0 },
            KernelKind::Sigmoid => KernelSpec::Sigmoid { alpha: 0.5, c: -1.0 },
            KernelKind::RationalQuadratic => KernelSpec::RationalQuadratic { c: 1.0 },
            KernelKind::InverseMultiquadric => KernelSpec::InverseMultiquadric { c: 1.0 },
            KernelKind::Circular => KernelSpec::Circular { sigma: 0.2 },
            KernelKind::Spherical => KernelSpec::Spherical { sigma: 0.2 },
        }
    }

    pub fn kind(&self) -> KernelKind {
        match self {
            KernelSpec::Linear { .. } => KernelKind::Linear,
            KernelSpec::Gaussian { .. } => KernelKind::Gaussian,
            KernelSpec::Polynomial { .. } => KernelKind::Polynomial,
            KernelSpec::Exponential { .. } => KernelKind::Exponential,
            KernelSpec::Laplacian { .. } => KernelKind::Laplacian,
            KernelSpec::Sigmoid { .. } => KernelKind::Sigmoid,
            KernelSpec::RationalQuadratic { .. } => KernelKind::RationalQuadratic,
            KernelSpec::InverseMultiquadric { .. } => KernelKind::InverseMultiquadric,
            KernelSpec::Circular { .. } => KernelKind::Circular,
            KernelSpec::Spherical { .. } => KernelKind::Spherical,
        }
    }

    /// Parameter values in the order of [`KernelKind::param_names`].
    pub fn params(&self) -> Vec<f64> {
        match *self {
            KernelSpec::Linear { c } => vec![c],
            KernelSpec::Gaussian { sigma }
            | KernelSpec::Exponential { sigma }
            | KernelSpec::Laplacian { sigma }
            | KernelSpec::Circular { sigma }
            | KernelSpec::Spherical { sigma } => vec![sigma],
            KernelSpec::Polynomial { degree } => vec![degree as f64],
            KernelSpec::Sigmoid { alpha, c } => vec![alpha, c],
            KernelSpec::RationalQuadratic { c } | KernelSpec::InverseMultiquadric { c } => vec![c],
        }
    }

    /// Builds a spec from a kind and `(name, value)` overrides of the
    /// default parameters.
    pub fn with_params(kind: KernelKind, overrides: &[(&str, f64)]) -> Result<KernelSpec> {
        let names = kind.param_names();
        let mut values = KernelSpec::default_for(kind).params();
        for &(name, value) in overrides {
            let slot = names.iter().position(|n| *n == name).ok_or_else(|| {
                Error::Config(format!("kernel {kind} has no parameter '{name}'"))
            })?;
            values[slot] = value;
        }
        let spec = KernelSpec::from_params(kind, &values)?;
        spec.validate()?;
        Ok(spec)
    }

    pub(crate) fn from_params(kind: KernelKind, p: &[f64]) -> Result<KernelSpec> {
        let want = kind.param_names().len();
        if p.len() != want {
            return Err(Error::Format(format!(
                "kernel {kind} expects {want} parameters, found {}",
                p.len()
            )));
        }
        Ok(match kind {
            KernelKind::Linear => KernelSpec::Linear { c: p[0] },
            KernelKind::Gaussian => KernelSpec::Gaussian { sigma: p[0] },
            KernelKind::Polynomial => {
                if p[0] < 1.0 || p[0].fract() != 0.0 || p[0] > u32::MAX as f64 {
                    return Err(Error::Config(format!(
                        "polynomial degree must be a positive integer, got {}",
                        p[0]
                    )));
                }
                KernelSpec::Polynomial { degree: p[0] as u32 }
            }
            KernelKind::Exponential => KernelSpec::Exponential { sigma: p[0] },
            KernelKind::Laplacian => KernelSpec::Laplacian { sigma: p[0] },
            KernelKind::Sigmoid => KernelSpec::Sigmoid { alpha: p[0], c: p[1] },
            KernelKind::RationalQuadratic => KernelSpec::RationalQuadratic { c: p[0] },
            KernelKind::InverseMultiquadric => KernelSpec::InverseMultiquadric { c: p[0] },
            KernelKind::Circular => KernelSpec::Circular { sigma: p[0] },
            KernelKind::Spherical => KernelSpec::Spherical { sigma: p[0] },
        })
    }

    pub fn validate(&self) -> Result<()> {
        let params = self.params();
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("kernel {} has non-finite parameters", self.kind())));
        }
        match *self {
            KernelSpec::Gaussian { sigma }
            | KernelSpec::Exponential { sigma }
            | KernelSpec::Laplacian { sigma }
            | KernelSpec::Circular { sigma }
            | KernelSpec::Spherical { sigma }
                if sigma <= 0.0 =>
            {
                Err(Error::Config(format!("kernel {}: sigma must be positive", self.kind())))
            }
            KernelSpec::Polynomial { degree: 0 } => {
                Err(Error::Config("polynomial degree must be positive".into()))
            }
            KernelSpec::RationalQuadratic { c } if c <= 0.0 => {
                Err(Error::Config("rational_quadratic: c must be positive".into()))
            }
            KernelSpec::InverseMultiquadric { c: 0.0 } => {
                Err(Error::Config("inverse_multiquadric: c must be nonzero".into()))
            }
            _ => Ok(()),
        }
    }

    /// Whether Gram matrices of this kernel are positive semidefinite for
    /// every point set. Only the sigmoid kernel is exempt.
    pub fn psd_guaranteed(&self) -> bool {
        !matches!(self, KernelSpec::Sigmoid { .. })
    }

    /// `k(x, y)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
                context: "kernel argument length",
            });
        }
        Ok(self.eval_unchecked(x, y))
    }

    /// `k(x, y)` without the length check. Every kind is computed from a
    /// symmetric reduction, so swapping the arguments gives the same bits.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear { c } => dot(x, y) + c,
            KernelSpec::Polynomial { degree } => powu(dot(x, y) + 1.0, degree),
            KernelSpec::Sigmoid { alpha, c } => (alpha * dot(x, y) + c).tanh(),
            KernelSpec::Gaussian { sigma } => (-sq_dist(x, y) / (2.0 * sigma * sigma)).exp(),
            KernelSpec::Exponential { sigma } => {
                (-sq_dist(x, y).sqrt() / (2.0 * sigma * sigma)).exp()
            }
            KernelSpec::Laplacian { sigma } => (-sq_dist(x, y).sqrt() / sigma).exp(),
            KernelSpec::RationalQuadratic { c } => {
                let d2 = sq_dist(x, y);
                (1.0 - d2 / (d2 + c)).exp()
            }
            KernelSpec::InverseMultiquadric { c } => 1.0 / (sq_dist(x, y) + c * c).sqrt(),
            KernelSpec::Circular { sigma } => {
                let u = sq_dist(x, y).sqrt() / sigma;
                if u >= 1.0 {
                    0.0
                } else {
                    (2.0 / PI) * (u.acos() - u * (1.0 - u * u).sqrt())
                }
            }
            KernelSpec::Spherical { sigma } => {
                let u = sq_dist(x, y).sqrt() / sigma;
                if u >= 1.0 {
                    0.0
                } else {
                    1.0 - 1.5 * u + 0.5 * u * u * u
                }
            }
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.kind())?;
        for (i, (name, value)) in self.kind().param_names().iter().zip(self.params()).enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{name}={value}")?;
        }
        f.write_str(")")
    }
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    // (a-b)^2 == (b-a)^2 bit for bit, so this is symmetric.
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

fn powu(base: f64, exp: u32) -> f64 {
    base.powi(exp.min(i32::MAX as u32) as i32)
}

/// Symmetric `count x count` matrix of kernel values over the columns of
/// `points`. Each unordered pair is evaluated once and mirrored.
pub fn gram(spec: &KernelSpec, points: &PatchMatrix) -> Matrix {
    let n = points.count();
    let mut k = Matrix::zeros(n, n);
    for p in 0..n {
        let xp = points.column(p);
        for q in p..n {
            let v = spec.eval_unchecked(xp, points.column(q));
            k.set(p, q, v);
            k.set(q, p, v);
        }
    }
    k
}

/// `basis.count x queries.count` matrix of kernel values.
pub fn cross_gram(spec: &KernelSpec, basis: &PatchMatrix, queries: &PatchMatrix) -> Result<Matrix> {
    if basis.patch_dim() != queries.patch_dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.patch_dim(),
            found: queries.patch_dim(),
            context: "query patch dimension",
        });
    }
    let mut k = Matrix::zeros(basis.count(), queries.count());
    for p in 0..basis.count() {
        let xp = basis.column(p);
        for q in 0..queries.count() {
            k.set(p, q, spec.eval_unchecked(xp, queries.column(q)));
        }
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn spec(kind: KernelKind) -> KernelSpec {
        KernelSpec::default_for(kind)
    }

    #[test]
    fn worked_examples() {
        let g = spec(KernelKind::Gaussian);
        assert_eq!(g.eval(&[0.3, 0.9], &[0.3, 0.9]).unwrap(), 1.0);
        assert_eq!(spec(KernelKind::Linear).eval(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        assert_eq!(spec(KernelKind::Polynomial).eval(&[1.0, 0.0], &[1.0, 5.0]).unwrap(), 8.0);
        let circ = spec(KernelKind::Circular);
        assert_eq!(circ.eval(&[0.0, 0.0], &[0.2, 0.0]).unwrap(), 0.0);
        assert_eq!(circ.eval(&[0.0, 0.0], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(spec(KernelKind::Spherical).eval(&[0.4, 0.1], &[0.4, 0.1]).unwrap(), 1.0);
        assert!(g.eval(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn self_similarity() {
        let x = [0.2, 0.7, 0.1];
        for kind in [
            KernelKind::Gaussian,
            KernelKind::Exponential,
            KernelKind::Laplacian,
            KernelKind::Circular,
            KernelKind::Spherical,
        ] {
            assert_eq!(spec(kind).eval(&x, &x).unwrap(), 1.0, "{kind}");
        }
        let rq = spec(KernelKind::RationalQuadratic).eval(&x, &x).unwrap();
        assert_eq!(rq, std::f64::consts::E);
        let imq = KernelSpec::InverseMultiquadric { c: 4.0 };
        assert_eq!(imq.eval(&x, &x).unwrap(), 0.25);
    }

    #[test]
    fn printed_forms() {
        // unsquared distance in the exponential kernel
        let e = spec(KernelKind::Exponential).eval(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((e - (-5.0f64 / 2.0).exp()).abs() < 1e-15);
        let l = spec(KernelKind::Laplacian).eval(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((l - (-5.0f64).exp()).abs() < 1e-15);
        let s = spec(KernelKind::Sigmoid).eval(&[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!((s - 0.0f64.tanh()).abs() < 1e-15);
        let rq = spec(KernelKind::RationalQuadratic).eval(&[0.0], &[1.0]).unwrap();
        assert!((rq - 0.5f64.exp()).abs() < 1e-15);
        let imq = spec(KernelKind::InverseMultiquadric).eval(&[0.0], &[3.0]).unwrap();
        assert!((imq - 1.0 / 10f64.sqrt()).abs() < 1e-15);
        // spherical at half support: 1 - 0.75 + 0.0625
        let sph = spec(KernelKind::Spherical).eval(&[0.0], &[0.1]).unwrap();
        assert!((sph - 0.3125).abs() < 1e-12);
        // circular at half support
        let circ = spec(KernelKind::Circular).eval(&[0.0], &[0.1]).unwrap();
        let u: f64 = 0.5;
        let want = 2.0 / PI * (u.acos() - u * (1.0 - u * u).sqrt());
        assert!((circ - want).abs() < 1e-12);
    }

    #[test]
    fn symmetric_bitwise_for_all_kinds() {
        let mut rng = Rng::from_seed(11);
        for kind in KernelKind::ALL {
            let s = match kind {
                KernelKind::Circular | KernelKind::Spherical => {
                    KernelSpec::with_params(kind, &[("sigma", 3.0)]).unwrap()
                }
                _ => spec(kind),
            };
            for _ in 0..20 {
                let x: Vec<f64> = (0..9).map(|_| rng.uniform()).collect();
                let y: Vec<f64> = (0..9).map(|_| rng.uniform()).collect();
                let a = s.eval(&x, &y).unwrap();
                let b = s.eval(&y, &x).unwrap();
                assert_eq!(a.to_bits(), b.to_bits(), "{kind}");
            }
        }
    }

    #[test]
    fn names_and_codes_round_trip() {
        for kind in KernelKind::ALL {
            assert_eq!(KernelKind::from_name(kind.name()), Some(kind));
            assert_eq!(KernelKind::from_code(kind.code()), Some(kind));
        }
        assert_eq!(KernelKind::from_name("Rational-Quadratic"), Some(KernelKind::RationalQuadratic));
        assert!(KernelKind::from_name("cosine").is_none());
        assert!(KernelSpec::with_params(KernelKind::Gaussian, &[("sigma", -1.0)]).is_err());
        assert!(KernelSpec::with_params(KernelKind::Gaussian, &[("d", 2.0)]).is_err());
        assert!(KernelSpec::with_params(KernelKind::Polynomial, &[("d", 2.5)]).is_err());
        assert_eq!(
            KernelSpec::with_params(KernelKind::Polynomial, &[("d", 2.0)]).unwrap(),
            KernelSpec::Polynomial { degree: 2 }
        );
        assert!(!spec(KernelKind::Sigmoid).psd_guaranteed());
        assert!(spec(KernelKind::Circular).psd_guaranteed());
    }

    #[test]
    fn gram_small_cases() {
        let one = PatchMatrix::from_columns(2, &[vec![0.5, 0.5]]).unwrap();
        let g = gram(&spec(KernelKind::Gaussian), &one);
        assert_eq!(g.shape(), (1, 1));
        assert_eq!(g.get(0, 0), 1.0);
        let two = PatchMatrix::from_columns(2, &[vec![0.5, 0.1], vec![0.5, 0.1]]).unwrap();
        let g = gram(&spec(KernelKind::Gaussian), &two);
        assert_eq!(g.data(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn cross_gram_matches_gram_and_dot_products() {
        let mut rng = Rng::from_seed(5);
        let cols: Vec<Vec<f64>> = (0..7).map(|_| (0..4).map(|_| rng.uniform()).collect()).collect();
        let basis = PatchMatrix::from_columns(4, &cols).unwrap();
        for kind in KernelKind::ALL {
            let s = spec(kind);
            assert_eq!(cross_gram(&s, &basis, &basis).unwrap(), gram(&s, &basis), "{kind}");
        }
        let q = PatchMatrix::from_columns(4, &cols[2..3]).unwrap();
        let g = gram(&spec(KernelKind::Gaussian), &basis);
        let c = cross_gram(&spec(KernelKind::Gaussian), &basis, &q).unwrap();
        for p in 0..7 {
            assert_eq!(c.get(p, 0), g.get(p, 2));
        }
        // linear kernel == plain basis^T queries
        let qcols: Vec<Vec<f64>> = (0..3).map(|_| (0..4).map(|_| rng.uniform()).collect()).collect();
        let queries = PatchMatrix::from_columns(4, &qcols).unwrap();
        let c = cross_gram(&spec(KernelKind::Linear), &basis, &queries).unwrap();
        for p in 0..7 {
            for j in 0..3 {
                let mut acc = 0.0;
                for i in 0..4 {
                    acc += cols[p][i] * qcols[j][i];
                }
                assert!((c.get(p, j) - acc).abs() < 1e-14);
            }
        }
        let bad = PatchMatrix::from_columns(3, &[vec![0.0; 3]]).unwrap();
        assert!(cross_gram(&spec(KernelKind::Linear), &basis, &bad).is_err());
    }

    #[test]
    fn compact_support_in_low_dimension_is_psd() {
        // Circular is PSD in R^2 and spherical in R^3; check a clustered set
        // where the supports actually overlap.
        let mut rng = Rng::from_seed(9);
        for (kind, dim) in [(KernelKind::Circular, 2), (KernelKind::Spherical, 3)] {
            let cols: Vec<Vec<f64>> = (0..40)
                .map(|_| (0..dim).map(|_| 0.3 * rng.uniform()).collect())
                .collect();
            let pts = PatchMatrix::from_columns(dim, &cols).unwrap();
            let g = gram(&spec(kind), &pts);
            let vals = crate::eigen::symmetric_eigenvalues(&g).unwrap();
            let max = vals.iter().cloned().fold(f64::MIN, f64::max);
            let min = vals.iter().cloned().fold(f64::MAX, f64::min);
            assert!(min >= -1e-8 * max, "{kind}: {min} vs {max}");
            // the supports overlap, so the Gram is not the identity
            assert!(g.data().iter().filter(|v| **v > 0.0 && **v < 1.0).count() > 100);
        }
    }
}
