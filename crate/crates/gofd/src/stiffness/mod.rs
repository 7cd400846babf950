//! Stiffness kernels: the coefficient tensor `T_p` of the uniform-grid
//! finite-difference fractional Laplacian, and the spectral replacements.
//!
//! Every kernel is stored on the nonnegative orthant `0 <= p_j <= 2 n_fd`;
//! values at negative offsets follow from evenness in each coordinate.

mod decay;
mod nufft;
mod spectral;
mod trapezoid;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

pub use decay::{decay_profile, DecayProfile};
pub use nufft::nufft_type1_cos;
pub use spectral::{ball_radius, spectral_origin_value};
pub use trapezoid::{NonUniformPath, NONUNIFORM_DIRECT_LIMIT};

use crate::error::{Error, Result};
use crate::grid::{check_dim, FractionalOrder};
use crate::quadrature::gauss_legendre;
use crate::special::gamma;

/// Which approximation produced a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Analytic1D,
    FftUniform,
    NonUniform,
    Spectral,
    ModifiedSpectral,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Analytic1D => "analytic",
            Scheme::FftUniform => "fft",
            Scheme::NonUniform => "nufft",
            Scheme::Spectral => "spectral",
            Scheme::ModifiedSpectral => "modspec",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Scheme::Analytic1D),
            "fft" => Ok(Scheme::FftUniform),
            "nufft" => Ok(Scheme::NonUniform),
            "spectral" => Ok(Scheme::Spectral),
            "modspec" => Ok(Scheme::ModifiedSpectral),
            other => Err(Error::invalid(
                "scheme",
                format!("unknown scheme `{other}` (analytic|fft|nufft|spectral|modspec)"),
            )),
        }
    }
}

/// Scheme plus its resolution parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub scheme: Scheme,
    /// Trapezoidal sample count per axis (fft, nufft, modspec).
    pub m: usize,
    /// Gauss–Legendre order (spectral, modspec).
    pub n_g: usize,
}

impl KernelSpec {
    pub fn new(scheme: Scheme, m: usize, n_g: usize) -> Self {
        Self { scheme, m, n_g }
    }

    pub fn build(&self, s: FractionalOrder, dim: usize, n_fd: usize) -> Result<StiffnessKernel> {
        match self.scheme {
            Scheme::Analytic1D => {
                if dim != 1 {
                    return Err(Error::invalid("scheme", "the analytic kernel exists only in 1D"));
                }
                analytic_1d(s, n_fd)
            }
            Scheme::FftUniform => fft_uniform(s, dim, n_fd, self.m),
            Scheme::NonUniform => nonuniform(s, dim, n_fd, self.m),
            Scheme::Spectral => spectral(s, dim, n_fd, self.n_g),
            Scheme::ModifiedSpectral => modified_spectral(s, dim, n_fd, self.m, self.n_g),
        }
    }
}

/// Dense coefficient tensor over offsets `p in [0, 2 n_fd]^dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessKernel {
    dim: usize,
    s: FractionalOrder,
    n_fd: usize,
    scheme: Scheme,
    coeffs: Vec<f64>,
}

impl StiffnessKernel {
    /// Wraps an externally computed tensor. `coeffs` must have
    /// `(2 n_fd + 1)^dim` finite entries with a positive first entry.
    pub fn from_coeffs(
        dim: usize,
        s: FractionalOrder,
        n_fd: usize,
        scheme: Scheme,
        coeffs: Vec<f64>,
    ) -> Result<Self> {
        check_dim(dim)?;
        let expected = (2 * n_fd + 1).pow(dim as u32);
        if coeffs.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: coeffs.len(),
            });
        }
        if let Some(bad) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid("coeffs", format!("entry {bad} is not finite")));
        }
        if !(coeffs[0] > 0.0) {
            return Err(Error::invalid(
                "coeffs",
                format!("diagonal entry must be positive, got {}", coeffs[0]),
            ));
        }
        Ok(Self {
            dim,
            s,
            n_fd,
            scheme,
            coeffs,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> FractionalOrder {
        self.s
    }

    pub fn n_fd(&self) -> usize {
        self.n_fd
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Entries per axis, `2 n_fd + 1`.
    pub fn side(&self) -> usize {
        2 * self.n_fd + 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient at a nonnegative offset.
    pub fn coeff(&self, p: &[usize]) -> f64 {
        let n = self.side();
        self.coeffs[p.iter().fold(0, |acc, &i| acc * n + i)]
    }

    /// Coefficient at a signed offset, using `T_{-p} = T_p` per coordinate.
    pub fn at_offset(&self, p: &[i64]) -> f64 {
        let n = self.side();
        let flat = p
            .iter()
            .fold(0, |acc, &i| acc * n + i.unsigned_abs() as usize);
        self.coeffs[flat]
    }

    /// Restriction to a smaller grid. The kernel values themselves do not
    /// depend on `n_fd` (only which offsets are kept) except for the
    /// interval partition of the spectral quadrature.
    pub fn truncate(&self, n_fd: usize) -> Result<Self> {
        if n_fd > self.n_fd || n_fd == 0 {
            return Err(Error::invalid(
                "n_fd",
                format!("truncation to {n_fd} from {} not possible", self.n_fd),
            ));
        }
        let old = self.side();
        let new = 2 * n_fd + 1;
        let total = new.pow(self.dim as u32);
        let mut coeffs = Vec::with_capacity(total);
        let mut idx = [0usize; 3];
        for flat in 0..total {
            let mut f = flat;
            for k in (0..self.dim).rev() {
                idx[k] = f % new;
                f /= new;
            }
            let src = idx[..self.dim].iter().fold(0, |acc, &i| acc * old + i);
            coeffs.push(self.coeffs[src]);
        }
        Ok(Self {
            coeffs,
            n_fd,
            ..self.clone()
        })
    }

    /// Writes `p1[,p2[,p3]],T` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|k| format!("p{k}")).collect();
        writeln!(out, "{},T", header.join(","))?;
        let n = self.side();
        let mut idx = [0usize; 3];
        for (flat, c) in self.coeffs.iter().enumerate() {
            let mut f = flat;
            for k in (0..self.dim).rev() {
                idx[k] = f % n;
                f /= n;
            }
            for i in &idx[..self.dim] {
                write!(out, "{i},")?;
            }
            writeln!(out, "{c:.16e}")?;
        }
        Ok(())
    }

    /// Max-norm difference against another kernel of the same shape.
    pub fn max_abs_diff(&self, other: &StiffnessKernel) -> Result<f64> {
        if self.coeffs.len() != other.coeffs.len() {
            return Err(Error::ShapeMismatch {
                expected: self.coeffs.len(),
                got: other.coeffs.len(),
            });
        }
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

fn check_samples(m: usize, n_fd: usize) -> Result<()> {
    if n_fd == 0 {
        return Err(Error::invalid("n_fd", "must be positive"));
    }
    if m < 2 * n_fd + 1 {
        return Err(Error::invalid(
            "m",
            format!("need M >= 2 n_fd + 1 = {}, got {m}", 2 * n_fd + 1),
        ));
    }
    Ok(())
}

/// Closed-form 1D kernel `(-1)^p Γ(2s+1) / (Γ(p+s+1) Γ(s-p+1))`.
///
/// Evaluated by the ratio `T_{p+1} / T_p = (p - s) / (p + s + 1)`, which
/// avoids gamma overflow for large offsets.
pub fn analytic_1d(s: FractionalOrder, n_fd: usize) -> Result<StiffnessKernel> {
    if n_fd == 0 {
        return Err(Error::invalid("n_fd", "must be positive"));
    }
    let sv = s.value();
    let mut coeffs = Vec::with_capacity(2 * n_fd + 1);
    let mut t = gamma(2.0 * sv + 1.0) / (gamma(sv + 1.0) * gamma(sv + 1.0));
    for p in 0..=2 * n_fd {
        coeffs.push(t);
        let p = p as f64;
        t *= (p - sv) / (p + sv + 1.0);
    }
    StiffnessKernel::from_coeffs(1, s, n_fd, Scheme::Analytic1D, coeffs)
}

/// Composite trapezoidal rule on `M` uniform samples per axis, evaluated by
/// FFT.
pub fn fft_uniform(s: FractionalOrder, dim: usize, n_fd: usize, m: usize) -> Result<StiffnessKernel> {
    check_dim(dim)?;
    check_samples(m, n_fd)?;
    let sv = s.value();
    let coeffs = trapezoid::uniform_sum(dim, m, 2 * n_fd + 1, |_, sin2| pow_or_zero(sin2, sv))?;
    StiffnessKernel::from_coeffs(dim, s, n_fd, Scheme::FftUniform, coeffs)
}

/// Trapezoidal rule on nodes clustered quadratically at the origin.
pub fn nonuniform(s: FractionalOrder, dim: usize, n_fd: usize, m: usize) -> Result<StiffnessKernel> {
    nonuniform_with(s, dim, n_fd, m, NonUniformPath::Auto)
}

/// [`nonuniform`] with an explicit choice between direct summation and the
/// Gaussian-gridding transform.
pub fn nonuniform_with(
    s: FractionalOrder,
    dim: usize,
    n_fd: usize,
    m: usize,
    path: NonUniformPath,
) -> Result<StiffnessKernel> {
    check_dim(dim)?;
    check_samples(m, n_fd)?;
    let sv = s.value();
    let coeffs = trapezoid::nonuniform_sum(dim, m, 2 * n_fd + 1, path, |sin2| pow_or_zero(sin2, sv));
    StiffnessKernel::from_coeffs(dim, s, n_fd, Scheme::NonUniform, coeffs)
}

/// Spectral approximation: `|xi|^{2s}` integrated over the ball with the
/// volume of `(-π, π)^d`.
pub fn spectral(s: FractionalOrder, dim: usize, n_fd: usize, n_g: usize) -> Result<StiffnessKernel> {
    check_dim(dim)?;
    if n_fd == 0 {
        return Err(Error::invalid("n_fd", "must be positive"));
    }
    if n_g < 4 {
        return Err(Error::invalid("n_G", format!("need at least 4 points, got {n_g}")));
    }
    let rule = gauss_legendre(n_g)?;
    let coeffs = spectral::ball_coefficients(s.value(), dim, 2 * n_fd + 1, &rule)?;
    StiffnessKernel::from_coeffs(dim, s, n_fd, Scheme::Spectral, coeffs)
}

/// Trapezoidal FFT treatment of `ψ(ξ) - |ξ|^{2s}` on the cube plus the
/// spectral ball integral of `|ξ|^{2s}`.
pub fn modified_spectral(
    s: FractionalOrder,
    dim: usize,
    n_fd: usize,
    m: usize,
    n_g: usize,
) -> Result<StiffnessKernel> {
    let ball = spectral(s, dim, n_fd, n_g)?;
    let mut coeffs = regularized_fft_part(s, dim, n_fd, m)?;
    for (c, b) in coeffs.iter_mut().zip(ball.coeffs()) {
        *c += b;
    }
    StiffnessKernel::from_coeffs(dim, s, n_fd, Scheme::ModifiedSpectral, coeffs)
}

/// First term of the modified spectral kernel on its own: the trapezoidal
/// approximation of the Fourier coefficients of `ψ(ξ) - |ξ|^{2s}`.
pub fn regularized_fft_part(
    s: FractionalOrder,
    dim: usize,
    n_fd: usize,
    m: usize,
) -> Result<Vec<f64>> {
    check_dim(dim)?;
    check_samples(m, n_fd)?;
    let sv = s.value();
    trapezoid::uniform_sum(dim, m, 2 * n_fd + 1, |xi2, sin2| {
        pow_or_zero(sin2, sv) - pow_or_zero(xi2, sv)
    })
}

#[inline]
fn pow_or_zero(x: f64, s: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.powf(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn order(s: f64) -> FractionalOrder {
        FractionalOrder::new(s).unwrap()
    }

    #[test]
    fn analytic_values_at_half() {
        let k = analytic_1d(order(0.5), 4).unwrap();
        assert!((k.coeff(&[0]) - 4.0 / PI).abs() < 1e-14);
        assert!((k.coeff(&[1]) + 4.0 / (3.0 * PI)).abs() < 1e-14);
        // closed form for s = 1/2: -4 / (π (4p² - 1))
        for p in 1..=8 {
            let exact = -4.0 / (PI * (4.0 * (p * p) as f64 - 1.0));
            assert!((k.coeff(&[p]) - exact).abs() < 1e-14, "p = {p}");
        }
    }

    #[test]
    fn analytic_matches_gamma_formula_and_signs() {
        for &sv in &[0.1, 0.25, 0.5, 0.75, 0.9] {
            let k = analytic_1d(order(sv), 10).unwrap();
            assert!(k.coeff(&[0]) > 0.0);
            for p in 0..=20usize {
                let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
                let direct = sign * gamma(2.0 * sv + 1.0)
                    / (gamma(p as f64 + sv + 1.0) * gamma(sv - p as f64 + 1.0));
                let v = k.coeff(&[p]);
                assert!((v - direct).abs() < 1e-12 * direct.abs().max(1e-3), "s={sv} p={p}");
                if p > 0 {
                    assert!(v < 0.0);
                }
            }
        }
    }

    #[test]
    fn rejects_too_few_samples() {
        assert!(fft_uniform(order(0.5), 1, 8, 16).is_err());
        assert!(fft_uniform(order(0.5), 1, 8, 17).is_ok());
        assert!(nonuniform(order(0.5), 1, 8, 10).is_err());
        assert!(spectral(order(0.5), 2, 8, 3).is_err());
    }

    #[test]
    fn spectral_equals_modspec_without_fft_term() {
        let s = order(0.4);
        for dim in 1..=3 {
            let n = 3;
            let spec = spectral(s, dim, n, 16).unwrap();
            let fft_part = regularized_fft_part(s, dim, n, 16).unwrap();
            let mods = modified_spectral(s, dim, n, 16, 16).unwrap();
            for i in 0..spec.coeffs().len() {
                assert_eq!(mods.coeffs()[i], fft_part[i] + spec.coeffs()[i]);
            }
        }
    }

    #[test]
    fn builds_are_deterministic() {
        let s = order(0.3);
        for spec in [
            KernelSpec::new(Scheme::FftUniform, 40, 16),
            KernelSpec::new(Scheme::NonUniform, 40, 16),
            KernelSpec::new(Scheme::Spectral, 40, 16),
            KernelSpec::new(Scheme::ModifiedSpectral, 40, 16),
        ] {
            for dim in 1..=3 {
                let a = spec.build(s, dim, 4).unwrap();
                let b = spec.build(s, dim, 4).unwrap();
                assert_eq!(a, b);
                assert!(a.coeffs()[0] > 0.0);
            }
        }
    }

    #[test]
    fn truncate_keeps_leading_block() {
        let k = fft_uniform(order(0.5), 2, 6, 64).unwrap();
        let t = k.truncate(3).unwrap();
        for p in 0..7 {
            for q in 0..7 {
                assert_eq!(t.coeff(&[p, q]), k.coeff(&[p, q]));
            }
        }
        assert_eq!(t.at_offset(&[-2, 3]), k.coeff(&[2, 3]));
        assert!(k.truncate(7).is_err());
    }

    #[test]
    fn csv_dump_format() {
        let k = analytic_1d(order(0.5), 1).unwrap();
        let mut buf = Vec::new();
        k.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "p1,T");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,1.27323954473516"));
        assert!(lines[1].ends_with("e0"));
        let v: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, k.coeff(&[1]));
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in [
            Scheme::Analytic1D,
            Scheme::FftUniform,
            Scheme::NonUniform,
            Scheme::Spectral,
            Scheme::ModifiedSpectral,
        ] {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("bogus".parse::<Scheme>().is_err());
    }
}
