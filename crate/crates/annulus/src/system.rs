//! Per-momentum, per-parity truncated characteristic system of the
//! mode-matching formulation, and the closed-form spectral coefficients of
//! its small-gap asymptotics.
//!
//! For angular momentum `m` the unknowns are the amplitude `d₀` of the
//! resonant mode (the near-`|m|` TE mode for `m ≠ 0`, the TEM mode for
//! `m = 0`) and the rescaled amplitudes `x` of `N` further TE and `N` TM
//! modes. Matching tangential fields on the aperture gives
//!
//! ```text
//! (D − A) d₀ − R x = a,        (I − B) x − C d₀ = b,
//! ```
//!
//! whose Schur reduction `Λ(k) = D − A − R(I − B)⁻¹C` vanishes at the
//! resonances.
//!
//! Matrix elements are built from the exterior operator pairing
//! `Q[row][col] = −⟨S_k Div M_col, Div M̄_row⟩ + k²⟨S_k M_col, M̄_row⟩`,
//! where TE modes contribute gradient fields `M = ∇ψ` (`Div M = −λψ`) and
//! TM/TEM modes contribute rotated gradients `M = ẑ × ∇ψ` (`Div M = 0`).
//! Vector pairings reduce to scalar pairings at momenta `m ± 1` through the
//! ladder operators `∂₁ ± i∂₂`.
//!
//! Each mode `X` carries the interior factor `ζ_X` (so that the interior
//! tangential magnetic field paired with `M̄_X` is `ζ_X σ_X d_X`), a balancing
//! power `τ_X` of its eigenvalue, and the aperture weights `σ_X = q(l/2)`,
//! `c_X = p(l/2)`:
//!
//! * TE: `ζ = −sλ/2`, `τ = λ^{3/4}`; TM: `ζ = −k²λ/(2s)`, `τ = λ^{1/4}`;
//! * TEM: `ζ = −πk·log(1+h)`.
//!
//! The non-resonant unknowns are `x_X = σ_X τ_X d_X`, so only the
//! overflow-free ratio `c_X/σ_X` enters. The resonant row is normalized by
//! `ρ₀ = −λ₀/2` (TE) or `ζ_TEM`, giving `D = s₀ sin(s₀l/2)` (`m ≠ 0`) and
//! `D = sin(kl/2)` (`m = 0`) for even parity. For odd parity with `m ≠ 0` the
//! resonant column is divided by `s₀`, which makes `Λ` even in `s₀` and hence
//! analytic in `k` across the cutoff: `D = cos(s₀l/2)`.
//!
//! Λ is invariant under any fixed diagonal rescaling of the non-resonant
//! unknowns, so the balancing moduli of the original weighting are replaced
//! by analytic factors.

use crate::kernel::{singlelayer_gram, KernelError, RadialGrid, SingleLayerGram};
use crate::modes::{
    aperture_weights, roots_up_to_order, s_value, weight_ratio, Eigenfunction, Family, Geometry, ModeFamily, ModesError, Parity,
};
use crate::quad::adaptive_gk;
use crate::specfun::{digamma, integral_j2m, EULER_GAMMA};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt::Write as _;
use thiserror::Error;

/// Maximum truncation order accepted by the assembler.
pub const MAX_ORDER: usize = 64;

/// Errors raised by system assembly and evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    /// Eigenpair construction failed (including missing roots).
    #[error(transparent)]
    Modes(#[from] ModesError),
    /// Kernel or Gram construction failed.
    #[error(transparent)]
    Kernel(#[from] KernelError),
    /// `I − B` is singular or too ill-conditioned to trust.
    #[error("I - B is singular or ill-conditioned (condition number {condition:e})")]
    Singular {
        /// Estimated 2-norm condition number.
        condition: f64,
    },
    /// Invalid arguments.
    #[error("domain error: {0}")]
    Domain(String),
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Spectral coefficients `α_m, β_m` and their momentum averages
/// `α̃_m = (α_{m+1} + α_{m−1})/2`, `β̃_m = (β_{m+1} + β_{m−1})/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralCoeffs {
    /// `α_m(k)`.
    pub alpha: Complex64,
    /// `β_m(k)`.
    pub beta: Complex64,
    /// `α̃_m(k)`.
    pub alpha_tilde: Complex64,
    /// `β̃_m(k)`.
    pub beta_tilde: Complex64,
}

/// `α_m(k) = 3/(8π) + (1/π)∫₀^{π/2}(cos(k sin θ) − 1)cos(2mθ)/sin θ dθ
/// + [log 2 − γ − ψ(|m| + ½)]/(4π)`, analytic in `k`.
pub fn alpha(m: i32, k: Complex64) -> Complex64 {
    let mf = m.unsigned_abs() as f64;
    let integral = adaptive_gk(
        |t| {
            let st = t.sin();
            if st == 0.0 {
                return c(0.0);
            }
            ((k * st).cos() - 1.0) * (2.0 * mf * t).cos() / st
        },
        0.0,
        PI / 2.0,
        1e-14,
    );
    let psi = digamma(mf + 0.5).expect("positive argument");
    c(3.0 / (8.0 * PI) + ((2f64).ln() - EULER_GAMMA - psi) / (4.0 * PI)) + integral / PI
}

/// `β_m(k) = (1/π)∫₀^{π/2} sin(k sin θ)cos(2mθ)/sin θ dθ`, analytic in `k`;
/// for real `k` it equals `½∫₀^k J_{2m}(t) dt` ([`beta_bessel_form`]).
pub fn beta(m: i32, k: Complex64) -> Complex64 {
    let mf = m.unsigned_abs() as f64;
    adaptive_gk(
        |t| {
            let st = t.sin();
            if st == 0.0 {
                return k * (2.0 * mf * t).cos();
            }
            (k * st).sin() * (2.0 * mf * t).cos() / st
        },
        0.0,
        PI / 2.0,
        1e-14,
    ) / PI
}

/// `½∫₀^k J_{2m}(t) dt` for real `k ∈ [0, 50]`.
pub fn beta_bessel_form(m: i32, k: f64) -> f64 {
    0.5 * integral_j2m(m.unsigned_abs(), k).expect("k within the supported range")
}

/// Spectral coefficients at momentum `m` and (possibly complex) `k`.
pub fn spectral_coeffs(m: i32, k: Complex64) -> SpectralCoeffs {
    SpectralCoeffs {
        alpha: alpha(m, k),
        beta: beta(m, k),
        alpha_tilde: 0.5 * (alpha(m + 1, k) + alpha(m - 1, k)),
        beta_tilde: 0.5 * (beta(m + 1, k) + beta(m - 1, k)),
    }
}

/// Coefficients `(𝔞_m, 𝔟_m)` of the small-gap expansion
/// `⟨S_kψ_{m0}, ψ̄_{m0}⟩ = 2[−h log h/(4π) + 𝔞_m h + i𝔟_m h] + O(h² log h)`
/// of the normalized constant-profile pairing. The angular average of the
/// kernel at coincident radii involves `e^{2ik sin(θ/2)}`, so the
/// coefficients sample `α, β` at the doubled argument:
/// `𝔞_m(k) = [α_m(2k) + 3α_m(0)]/4`, `𝔟_m(k) = β_m(2k)/4`.
pub fn corrected_coeffs(m: i32, k: Complex64) -> (Complex64, Complex64) {
    ((alpha(m, 2.0 * k) + 3.0 * alpha(m, c(0.0))) / 4.0, beta(m, 2.0 * k) / 4.0)
}

/// A value of the resonance-shift function `Π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiValue {
    /// `Π`.
    pub value: Complex64,
    /// Angular momentum.
    pub m: i32,
    /// Wavenumber argument.
    pub k: Complex64,
    /// Relative gap width.
    pub h: f64,
}

/// `Π_m(k, h) = (m² − k²)h log h/(2π) + 2k²h(α̃_m + iβ̃_m) − 2m²h(α_m + iβ_m)
/// + (m² − k²)h·κ`, with `κ = pᵀ(I + 2P)⁻¹p`.
pub fn pi_m(m: i32, k: Complex64, h: f64, gram: &SingleLayerGram) -> PiValue {
    let sc = spectral_coeffs(m, k);
    let i = Complex64::i();
    let m2 = (m * m) as f64;
    let value = (m2 - k * k) * h * h.ln() / (2.0 * PI) + 2.0 * k * k * h * (sc.alpha_tilde + i * sc.beta_tilde)
        - 2.0 * m2 * h * (sc.alpha + i * sc.beta)
        + (m2 - k * k) * h * gram.kappa;
    PiValue { value, m, k, h }
}

/// `Π⁰(k, h) = −h log h/(4π) + α₁(k)h + iβ₁(k)h − h·κ`.
pub fn pi_0(k: Complex64, h: f64, gram: &SingleLayerGram) -> PiValue {
    let value = -h * h.ln() / (4.0 * PI) + alpha(1, k) * h + Complex64::i() * beta(1, k) * h - h * gram.kappa;
    PiValue { value, m: 0, k, h }
}

/// Shift function consistent with the assembled system (doubled-argument
/// coefficients, off-resonant blocks converging to `−4P`):
/// `Πᶜ_m = 2[(m² − k²)h log h/(2π) + 2k²h(𝔞̃ + i𝔟̃) − 2m²h(𝔞 + i𝔟)] + (m² − k²)h·κ₄`.
pub fn pi_m_corrected(m: i32, k: Complex64, h: f64, gram: &SingleLayerGram) -> PiValue {
    let i = Complex64::i();
    let (a, b) = corrected_coeffs(m, k);
    let (ap, bp) = corrected_coeffs(m + 1, k);
    let (am, bm) = corrected_coeffs(m - 1, k);
    let (at, bt) = (0.5 * (ap + am), 0.5 * (bp + bm));
    let m2 = (m * m) as f64;
    let value = 2.0
        * ((m2 - k * k) * h * h.ln() / (2.0 * PI) + 2.0 * k * k * h * (at + i * bt) - 2.0 * m2 * h * (a + i * b))
        + (m2 - k * k) * h * gram.kappa4;
    PiValue { value, m, k, h }
}

/// `Πᶜ₀ = −h log h/(4π) + 𝔞₁h + i𝔟₁h − h·κ₄/4`.
pub fn pi_0_corrected(k: Complex64, h: f64, gram: &SingleLayerGram) -> PiValue {
    let (a, b) = corrected_coeffs(1, k);
    let value = -h * h.ln() / (4.0 * PI) + a * h + Complex64::i() * b * h - h * gram.kappa4 / 4.0;
    PiValue { value, m: 0, k, h }
}

/// Role of a basis function in the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    /// Gradient field `∇ψ` (TE).
    Gradient,
    /// Rotated gradient `ẑ × ∇ψ` (TM, TEM).
    Rotated,
}

/// One waveguide mode of the truncated basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMode {
    /// Mode family.
    pub family: ModeFamily,
    /// Radial index.
    pub n: u32,
    /// Eigenfunction (`None` for TEM).
    pub eig: Option<Eigenfunction>,
    /// Eigenvalue (`0` for TEM).
    pub lambda: f64,
}

impl BasisMode {
    fn kind(&self) -> Kind {
        match self.family {
            ModeFamily::TE => Kind::Gradient,
            _ => Kind::Rotated,
        }
    }

    /// Longitudinal wavenumber: `√(k² − λ)`, or `k` itself for TEM.
    pub fn s(&self, k: Complex64) -> Complex64 {
        match self.family {
            ModeFamily::TEM => k,
            _ => s_value(k, self.lambda),
        }
    }

    /// Balancing factor `τ`.
    fn tau(&self) -> f64 {
        match self.family {
            ModeFamily::TE => self.lambda.powf(0.75),
            ModeFamily::TM => self.lambda.powf(0.25),
            ModeFamily::TEM => 1.0,
        }
    }

    /// Interior factor `ζ`.
    fn zeta(&self, k: Complex64, h: f64) -> Complex64 {
        let s = self.s(k);
        match self.family {
            ModeFamily::TE => -s * self.lambda / 2.0,
            ModeFamily::TM => -k * k * self.lambda / (2.0 * s),
            ModeFamily::TEM => -PI * k * (1.0 + h).ln(),
        }
    }
}

/// The truncated characteristic system at one `(m, parity, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicSystem {
    /// Angular momentum.
    pub m: i32,
    /// Parity.
    pub parity: Parity,
    /// Wavenumber (unit-radius units).
    pub k: Complex64,
    /// Relative gap width.
    pub h: f64,
    /// Slab thickness (unit-radius units).
    pub l: f64,
    /// Truncation order `N`.
    pub order: usize,
    /// `D_m`.
    pub d: Complex64,
    /// `A_mm`.
    pub a: Complex64,
    /// `R_m` (length `2N`: TE block then TM block).
    pub r: DVector<Complex64>,
    /// `C_m` (length `2N`).
    pub c: DVector<Complex64>,
    /// `B_m` (`2N × 2N`).
    pub b: DMatrix<Complex64>,
    /// Row normalization `ρ₀` of the resonant equation.
    pub rho0: Complex64,
    /// Scale dividing the resonant column (`s₀` for odd parity, `m ≠ 0`).
    pub column_scale: Complex64,
    /// `τ_X/ζ_X` for the non-resonant modes.
    pub row_scale: DVector<Complex64>,
}

/// Precomputed eigenpairs and nodal samples for one momentum; evaluates the
/// characteristic system at any `k` and parity.
#[derive(Debug)]
pub struct Assembler {
    /// Angular momentum.
    pub m: i32,
    /// Unit-radius geometry.
    pub geom: Geometry,
    /// Inner radius of the physical geometry (wavenumbers scale by it).
    pub scale: f64,
    /// Truncation order.
    pub order: usize,
    /// Basis: resonant mode, then `N` TE, then `N` TM modes.
    pub basis: Vec<BasisMode>,
    /// Radial product-quadrature grid.
    pub grid: RadialGrid,
    values: DMatrix<f64>,
    ladder_plus: DMatrix<f64>,
    ladder_minus: DMatrix<f64>,
}

impl Assembler {
    /// Builds the basis for momentum `m` with truncation order `n ≤ 64`.
    pub fn new(m: i32, geom: &Geometry, order: usize, quad_radial: usize, quad_angular: usize) -> Result<Self, SystemError> {
        geom.validate()?;
        if order == 0 || order > MAX_ORDER {
            return Err(SystemError::Domain(format!("truncation order must be in 1..={MAX_ORDER}, got {order}")));
        }
        let unit = geom.normalized();
        let h = unit.h;
        let am = m.unsigned_abs();
        let neumann = roots_up_to_order(Family::N, am, h, order as u32)?;
        let dirichlet = roots_up_to_order(Family::D, am, h, order as u32)?;
        let mut basis = Vec::with_capacity(2 * order + 1);
        let te_start = if m == 0 {
            basis.push(BasisMode { family: ModeFamily::TEM, n: 0, eig: None, lambda: 0.0 });
            0
        } else {
            let e = Eigenfunction::from_root(&neumann[0], m, h)?;
            basis.push(BasisMode { family: ModeFamily::TE, n: 0, eig: Some(e), lambda: e.lambda });
            1
        };
        for root in neumann.iter().skip(te_start) {
            let e = Eigenfunction::from_root(root, m, h)?;
            basis.push(BasisMode { family: ModeFamily::TE, n: root.n, eig: Some(e), lambda: e.lambda });
        }
        for root in &dirichlet {
            let e = Eigenfunction::from_root(root, m, h)?;
            basis.push(BasisMode { family: ModeFamily::TM, n: root.n, eig: Some(e), lambda: e.lambda });
        }
        if basis.len() != 2 * order + 1 {
            return Err(SystemError::Domain("eigen tables do not cover the truncation order".into()));
        }
        let grid = RadialGrid::new(h, quad_radial, quad_angular)?;
        let nb = basis.len();
        let ng = grid.len();
        let mut values = DMatrix::zeros(ng, nb);
        let mut ladder_plus = DMatrix::zeros(ng, nb);
        let mut ladder_minus = DMatrix::zeros(ng, nb);
        let mf = m as f64;
        for (j, mode) in basis.iter().enumerate() {
            for (i, &r) in grid.r.iter().enumerate() {
                let (f, fp) = match &mode.eig {
                    Some(e) => e.value_and_derivative(r),
                    None => (r.ln(), 1.0 / r),
                };
                values[(i, j)] = f;
                ladder_plus[(i, j)] = fp - mf * f / r;
                ladder_minus[(i, j)] = fp + mf * f / r;
            }
        }
        Ok(Assembler { m, geom: unit, scale: geom.a, order, basis, grid, values, ladder_plus, ladder_minus })
    }

    /// Assembler with the default quadrature orders.
    pub fn with_defaults(m: i32, geom: &Geometry, order: usize) -> Result<Self, SystemError> {
        Self::new(m, geom, order, crate::kernel::DEFAULT_QUAD_RADIAL, crate::kernel::DEFAULT_QUAD_ANGULAR)
    }

    /// The exterior pairing matrix `Q` over the basis at unit-radius `k`.
    pub fn pairing_matrix(&self, k: Complex64) -> DMatrix<Complex64> {
        let m = self.m;
        let mu0 = m.unsigned_abs();
        let (mup, mun) = ((m + 1).unsigned_abs(), (m - 1).unsigned_abs());
        let mut mus = vec![mu0, mup, mun];
        mus.sort_unstable();
        mus.dedup();
        let mats = self.grid.kernel_matrices(&mus, k);
        let kmat = |mu: u32| &mats[mus.iter().position(|&v| v == mu).expect("requested order")];
        let project = |kk: &DMatrix<Complex64>, f: &DMatrix<f64>| -> DMatrix<Complex64> {
            let fc = f.map(c);
            fc.transpose() * kk * &fc
        };
        let p0 = project(kmat(mu0), &self.values);
        let pp = project(kmat(mup), &self.ladder_plus);
        let pn = project(kmat(mun), &self.ladder_minus);
        let nb = self.basis.len();
        let i = Complex64::i();
        let k2 = k * k;
        DMatrix::from_fn(nb, nb, |row, col| {
            let (kr, kc) = (self.basis[row].kind(), self.basis[col].kind());
            let sum = 0.5 * k2 * (pp[(row, col)] + pn[(row, col)]);
            let diff = 0.5 * k2 * i * (pp[(row, col)] - pn[(row, col)]);
            match (kr, kc) {
                (Kind::Gradient, Kind::Gradient) => -self.basis[row].lambda * self.basis[col].lambda * p0[(row, col)] + sum,
                (Kind::Rotated, Kind::Rotated) => sum,
                (Kind::Gradient, Kind::Rotated) => diff,
                (Kind::Rotated, Kind::Gradient) => -diff,
            }
        })
    }

    /// Row normalization `ρ₀` of the resonant equation.
    fn rho0(&self, k: Complex64) -> Complex64 {
        let mode = &self.basis[0];
        match mode.family {
            ModeFamily::TEM => mode.zeta(k, self.geom.h),
            _ => c(-mode.lambda / 2.0),
        }
    }

    /// Assembles the system at a physical wavenumber `k`.
    pub fn system(&self, k_phys: Complex64, parity: Parity) -> CharacteristicSystem {
        let k = k_phys * self.scale;
        let q = self.pairing_matrix(k);
        self.system_from_pairings(k, parity, &q)
    }

    /// Assembles the system from a precomputed pairing matrix at unit-radius `k`.
    pub fn system_from_pairings(&self, k: Complex64, parity: Parity, q: &DMatrix<Complex64>) -> CharacteristicSystem {
        let half_l = 0.5 * self.geom.l;
        let h = self.geom.h;
        let res = &self.basis[0];
        let s0 = res.s(k);
        let (sigma0, c0) = aperture_weights(parity, s0, half_l);
        let rho0 = self.rho0(k);
        let zeta0 = res.zeta(k, h);
        let column_scale = if parity == Parity::Odd && self.m != 0 { s0 } else { c(1.0) };
        // D = ζ₀σ₀/(ρ₀·scale), evaluated without dividing by a vanishing s₀.
        let (d, c0_scaled) = if parity == Parity::Odd && self.m != 0 {
            (sigma0, -sin_over(s0, half_l))
        } else {
            (zeta0 * sigma0 / rho0, c0)
        };
        let n2 = self.basis.len() - 1;
        let mut cot = DVector::zeros(n2);
        let mut tau = DVector::zeros(n2);
        let mut row_scale = DVector::zeros(n2);
        for j in 0..n2 {
            let mode = &self.basis[j + 1];
            cot[j] = weight_ratio(parity, mode.s(k), half_l);
            tau[j] = mode.tau();
            row_scale[j] = mode.tau() / mode.zeta(k, h);
        }
        let a = c0_scaled * q[(0, 0)] / rho0;
        let r = DVector::from_fn(n2, |j, _| cot[j] * q[(0, j + 1)] / (tau[j] * rho0));
        let cvec = DVector::from_fn(n2, |j, _| row_scale[j] * q[(j + 1, 0)] * c0_scaled);
        let b = DMatrix::from_fn(n2, n2, |i, j| row_scale[i] * q[(i + 1, j + 1)] * cot[j] / tau[j]);
        CharacteristicSystem {
            m: self.m,
            parity,
            k,
            h,
            l: self.geom.l,
            order: self.order,
            d,
            a,
            r,
            c: cvec,
            b,
            rho0,
            column_scale,
            row_scale,
        }
    }

    /// `Λ_m(k)` at a physical wavenumber.
    pub fn lambda(&self, k_phys: Complex64, parity: Parity) -> Result<Complex64, SystemError> {
        characteristic_value(&self.system(k_phys, parity))
    }
}

/// `sin(s·L)/s`, with a Taylor series near `s = 0`.
fn sin_over(s: Complex64, half_l: f64) -> Complex64 {
    if s.norm() < 1e-6 {
        let z2 = (s * half_l) * (s * half_l);
        half_l * (1.0 - z2 / 6.0 + z2 * z2 / 120.0 - z2 * z2 * z2 / 5040.0)
    } else {
        (s * half_l).sin() / s
    }
}

/// Assembles the system for momentum `m` with default quadrature orders.
pub fn assemble(m: i32, parity: Parity, k: Complex64, geom: &Geometry, order: usize) -> Result<CharacteristicSystem, SystemError> {
    Ok(Assembler::with_defaults(m, geom, order)?.system(k, parity))
}

/// LU-solves `(I − B) X = rhs` after checking that the condition number of
/// `I − B` stays below `1e12`.
pub fn solve_i_minus_b(b: &DMatrix<Complex64>, rhs: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>, SystemError> {
    let n = b.nrows();
    let m = DMatrix::<Complex64>::identity(n, n) - b;
    let sv = m.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition < 1e12) {
        return Err(SystemError::Singular { condition });
    }
    m.lu().solve(rhs).ok_or(SystemError::Singular { condition })
}

/// `Λ_m(k) = D_m − A_mm − R_m(I − B_m)⁻¹C_m`.
pub fn characteristic_value(sys: &CharacteristicSystem) -> Result<Complex64, SystemError> {
    let n = sys.c.len();
    let rhs = DMatrix::from_column_slice(n, 1, sys.c.as_slice());
    let y = solve_i_minus_b(&sys.b, &rhs)?;
    let corr: Complex64 = (0..n).map(|i| sys.r[i] * y[(i, 0)]).sum();
    Ok(sys.d - sys.a - corr)
}

/// Leading-order value of `A_mm` as stated in closed form:
/// `2cos(s₀l/2)λ₀[−h log h/(4π) + (α + iβ)h] − 2k²m²cos(s₀l/2)/λ₀[−h log h/(4π) + (α̃ + iβ̃)h]`
/// for `m ≠ 0`, and `−cos(kl/2)k[−h log h/(4π) + (α₁ + iβ₁)h]` for `m = 0`
/// (even parity).
pub fn amm_closed_form(m: i32, k: Complex64, h: f64, l: f64, lambda0: f64) -> Complex64 {
    let i = Complex64::i();
    let lg = c(-h * h.ln() / (4.0 * PI));
    if m == 0 {
        return -(k * l / 2.0).cos() * k * (lg + (alpha(1, k) + i * beta(1, k)) * h);
    }
    let sc = spectral_coeffs(m, k);
    let cs = (s_value(k, lambda0) * l / 2.0).cos();
    let m2 = (m * m) as f64;
    2.0 * cs * lambda0 * (lg + (sc.alpha + i * sc.beta) * h)
        - 2.0 * k * k * m2 * cs / lambda0 * (lg + (sc.alpha_tilde + i * sc.beta_tilde) * h)
}

/// Leading-order value of `A_mm` consistent with the assembled system:
/// `4cos(s₀l/2)[λ₀X_m − k²m²X̃_m/λ₀]` (`m ≠ 0`) and `−4k cos(kl/2)X₁`
/// (`m = 0`), with `X_μ = −h log h/(4π) + (𝔞_μ + i𝔟_μ)h` (even parity).
pub fn amm_corrected(m: i32, k: Complex64, h: f64, l: f64, lambda0: f64) -> Complex64 {
    let i = Complex64::i();
    let lg = c(-h * h.ln() / (4.0 * PI));
    let x = |mu: i32| {
        let (a, b) = corrected_coeffs(mu, k);
        lg + (a + i * b) * h
    };
    if m == 0 {
        return -4.0 * k * (k * l / 2.0).cos() * x(1);
    }
    let cs = (s_value(k, lambda0) * l / 2.0).cos();
    let m2 = (m * m) as f64;
    let xt = 0.5 * (x(m + 1) + x(m - 1));
    4.0 * cs * (lambda0 * x(m) - k * k * m2 * xt / lambda0)
}

/// `diag(P, P)` from the Gram data of order `n`.
pub fn doubled_gram(gram: &SingleLayerGram) -> DMatrix<f64> {
    let n = gram.order;
    let mut p2 = DMatrix::zeros(2 * n, 2 * n);
    p2.view_mut((0, 0), (n, n)).copy_from(&gram.p_matrix);
    p2.view_mut((n, n), (n, n)).copy_from(&gram.p_matrix);
    p2
}

/// Spectral norm of `B + factor·diag(P, P)`.
pub fn b_offset_norm(sys: &CharacteristicSystem, factor: f64) -> Result<f64, SystemError> {
    let gram = singlelayer_gram(sys.order)?;
    let p2 = doubled_gram(&gram).map(|v| c(factor * v));
    Ok((&sys.b + p2).singular_values().max())
}

/// Debug dump of a system as CSV rows `block,row,col,re,im`.
pub fn system_csv(sys: &CharacteristicSystem) -> String {
    let mut s = String::from("block,row,col,re,im\n");
    let mut push = |block: &str, i: usize, j: usize, z: Complex64| {
        let _ = writeln!(s, "{block},{i},{j},{},{}", crate::csv_number(z.re), crate::csv_number(z.im));
    };
    push("D", 0, 0, sys.d);
    push("A", 0, 0, sys.a);
    for i in 0..sys.r.len() {
        push("R", 0, i, sys.r[i]);
    }
    for i in 0..sys.c.len() {
        push("C", i, 0, sys.c[i]);
    }
    for i in 0..sys.b.nrows() {
        for j in 0..sys.b.ncols() {
            push("B", i, j, sys.b[(i, j)]);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spectral_coefficients_at_zero() {
        for m in 0..5 {
            let sc = spectral_coeffs(m, c(0.0));
            assert_eq!(sc.beta, c(0.0));
            let psi = digamma(m as f64 + 0.5).unwrap();
            let expect = 3.0 / (8.0 * PI) + ((2f64).ln() - EULER_GAMMA - psi) / (4.0 * PI);
            assert!((sc.alpha - c(expect)).norm() < 1e-15);
        }
    }

    #[test]
    fn beta_forms_agree() {
        for m in 0..=4 {
            for k in [0.5, 1.0, 2.0, 5.0] {
                let a = beta(m, c(k));
                let b = beta_bessel_form(m, k);
                assert!((a.re - b).abs() < 1e-9 && a.im == 0.0, "{m} {k}: {a} {b}");
            }
        }
    }

    #[test]
    fn tilde_coefficients_average_neighbors() {
        let k = Complex64::new(1.7, -0.05);
        let sc = spectral_coeffs(2, k);
        assert!((sc.alpha_tilde - 0.5 * (alpha(3, k) + alpha(1, k))).norm() < 1e-12);
        assert!((sc.beta_tilde - 0.5 * (beta(3, k) + beta(1, k))).norm() < 1e-12);
        // α̃₀ pairs momenta ±1, which coincide.
        let s0 = spectral_coeffs(0, k);
        assert!((s0.alpha_tilde - alpha(1, k)).norm() < 1e-12);
    }

    #[test]
    fn pi_m_at_cutoff_and_pi_0_structure() {
        let gram = singlelayer_gram(16).unwrap();
        let h = 0.01;
        let m = 2;
        let p = pi_m(m, c(2.0), h, &gram);
        let sc = spectral_coeffs(m, c(2.0));
        let expect = 2.0 * 4.0 * h * ((sc.alpha_tilde - sc.alpha) + Complex64::i() * (sc.beta_tilde - sc.beta));
        assert!((p.value - expect).norm() < 1e-14);
        let p0 = pi_0(c(1.3), h, &gram);
        assert!((p0.value.im - beta(1, c(1.3)).re * h).abs() < 1e-15);
        assert!(p0.value.re < 0.0 || -h * h.ln() / (4.0 * PI) > 0.0);
        for k in [1.3, 3.0] {
            let ratios: Vec<f64> = [0.02, 0.01, 0.005]
                .iter()
                .map(|&h| pi_0(c(k), h, &gram).value.norm() / (h * h.ln().abs()))
                .collect();
            for w in ratios.windows(2) {
                assert!(w[1] / w[0] > 0.5 && w[1] / w[0] < 2.0);
            }
        }
        let ratios: Vec<f64> = [0.02, 0.01, 0.005]
            .iter()
            .map(|&h| pi_m(1, c(3.3), h, &gram).value.norm() / (h * h.ln().abs()))
            .collect();
        for w in ratios.windows(2) {
            assert!(w[1] / w[0] > 0.5 && w[1] / w[0] < 2.0, "{ratios:?}");
        }
    }

    #[test]
    fn m0_te_blocks_of_c_and_r_vanish() {
        let geom = Geometry::new(0.01, 2.0);
        let asm = Assembler::new(0, &geom, 4, 16, 64).unwrap();
        for parity in [Parity::Even, Parity::Odd] {
            let sys = asm.system(c(2.3), parity);
            for j in 0..4 {
                assert_eq!(sys.c[j], c(0.0));
                assert_eq!(sys.r[j], c(0.0));
            }
            assert!(sys.c[4].norm() > 0.0 && sys.r[4].norm() > 0.0);
        }
    }

    #[test]
    fn b_converges_to_gram_limit() {
        let k = c(2.3);
        for m in [0, 1, 2] {
            let norms: Vec<f64> = [0.02, 0.01]
                .iter()
                .map(|&h| {
                    let asm = Assembler::new(m, &Geometry::new(h, 2.0), 8, 32, 128).unwrap();
                    b_offset_norm(&asm.system(k, Parity::Even), 4.0).unwrap()
                })
                .collect();
            assert!(norms[0] / norms[1] >= 1.6, "m={m}: {norms:?}");
        }
    }

    #[test]
    fn amm_matches_consistent_closed_form() {
        let (h, l, k) = (0.01, 2.0, c(2.3));
        for m in [0, 1, 2] {
            let asm = Assembler::with_defaults(m, &Geometry::new(h, l), 8).unwrap();
            let sys = asm.system(k, Parity::Even);
            let approx = amm_corrected(m, k, h, l, asm.basis[0].lambda);
            assert!((sys.a - approx).norm() < 0.15 * approx.norm(), "m={m}: {} {approx}", sys.a);
        }
    }

    #[test]
    fn lambda_is_analytic() {
        let geom = Geometry::new(0.02, 2.0);
        for (m, parity) in [(1, Parity::Even), (1, Parity::Odd), (0, Parity::Even)] {
            let asm = Assembler::new(m, &geom, 4, 24, 128).unwrap();
            let k0 = Complex64::new(2.1, -0.03);
            let dk = 1e-5;
            let f = |k: Complex64| asm.lambda(k, parity).unwrap();
            let dx = (f(k0 + dk) - f(k0 - dk)) / (2.0 * dk);
            let dy = (f(k0 + Complex64::i() * dk) - f(k0 - Complex64::i() * dk)) / (2.0 * dk);
            // Cauchy–Riemann: ∂Λ/∂y = i ∂Λ/∂x.
            assert!((dy - Complex64::i() * dx).norm() < 1e-6 * dx.norm().max(1.0), "{m} {parity:?}: {dx} {dy}");
        }
    }

    #[test]
    fn lambda_has_a_floor_away_from_resonances() {
        let asm = Assembler::with_defaults(1, &Geometry::new(0.01, 2.0), 8).unwrap();
        assert!(asm.lambda(c(0.4), Parity::Even).unwrap().norm() >= 0.1);
    }

    #[test]
    fn schur_term_is_linear_in_c() {
        let asm = Assembler::new(2, &Geometry::new(0.01, 2.0), 4, 16, 64).unwrap();
        let mut sys = asm.system(c(2.5), Parity::Even);
        let base = sys.d - sys.a - characteristic_value(&sys).unwrap();
        sys.c *= c(2.0);
        let doubled = sys.d - sys.a - characteristic_value(&sys).unwrap();
        assert!((doubled - 2.0 * base).norm() <= 1e-14 * doubled.norm());
    }

    #[test]
    fn b_becomes_real_in_the_static_limit() {
        // As k → 0 the kernel tends to the real static kernel: the same-family
        // blocks of B become real and the TE/TM cross blocks purely imaginary,
        // i.e. B is real after the phase similarity diag(I, iI), which leaves
        // Λ unchanged. The deviation vanishes proportionally to k.
        let n = 4;
        let asm = Assembler::new(1, &Geometry::new(0.01, 2.0), n, 16, 64).unwrap();
        let deviation = |k: f64| {
            let b = asm.system(c(k), Parity::Even).b;
            let mut worst: f64 = 0.0;
            for i in 0..2 * n {
                for j in 0..2 * n {
                    let z = b[(i, j)];
                    let off = if (i < n) == (j < n) { z.im } else { z.re };
                    worst = worst.max(off.abs());
                }
            }
            worst
        };
        let scale = asm.system(c(1e-4), Parity::Even).b.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let (d3, d4) = (deviation(1e-3), deviation(1e-4));
        assert!(d4 < d3 / 5.0, "{d3} {d4}");
        assert!(d4 < 1e-4 * scale);
    }

    #[test]
    fn momentum_decoupling() {
        // Full four-dimensional quadrature of ∬Φ_k(x, y) ψ(y) φ̄(x) for
        // ψ = f e^{imθ′}, φ = f e^{im′θ}: because the kernel depends on θ − θ′
        // only, pairings of distinct momenta vanish.
        let h = 0.01;
        let k = c(1.9);
        let f = |r: f64| 1.0 + (r - 1.0) / h;
        let (rs, ws) = crate::quad::gauss_legendre_on(8, 1.0, 1.0 + h);
        let (rps, wps) = crate::quad::gauss_legendre_on(9, 1.0, 1.0 + h);
        let nt = 32;
        let pairing = |m: i32, mp: i32| -> Complex64 {
            let mut total = c(0.0);
            for (r, wr) in rs.iter().zip(&ws) {
                for (rp, wrp) in rps.iter().zip(&wps) {
                    for a in 0..nt {
                        let t = 2.0 * PI * a as f64 / nt as f64;
                        for b in 0..nt {
                            let tp = 2.0 * PI * b as f64 / nt as f64;
                            let d = (r * r + rp * rp - 2.0 * r * rp * (t - tp).cos()).sqrt();
                            let phase = Complex64::from_polar(1.0, m as f64 * tp - mp as f64 * t);
                            total += (Complex64::i() * k * d).exp() / (4.0 * PI * d) * phase * f(*r) * f(*rp) * (wr * wrp * r * rp);
                        }
                    }
                }
            }
            total * (2.0 * PI / nt as f64).powi(2)
        };
        let diag = pairing(1, 1).norm();
        for (m, mp) in [(0, 1), (1, 2), (2, 0)] {
            assert!(pairing(m, mp).norm() < 1e-10 * diag);
        }
    }

    #[test]
    fn system_csv_has_all_entries() {
        let asm = Assembler::new(1, &Geometry::new(0.02, 2.0), 2, 12, 32).unwrap();
        let csv = system_csv(&asm.system(c(1.5), Parity::Odd));
        assert_eq!(csv.lines().count(), 1 + 2 + 4 + 4 + 16);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn parity_duality(kr in 0.5f64..3.0) {
            // Swapping parity only swaps the aperture weights.
            let asm = Assembler::new(0, &Geometry::new(0.02, 2.0), 3, 12, 32).unwrap();
            let k = c(kr);
            let q = asm.pairing_matrix(k);
            let even = asm.system_from_pairings(k, Parity::Even, &q);
            let odd = asm.system_from_pairings(k, Parity::Odd, &q);
            let (se, ce) = aperture_weights(Parity::Even, k, 1.0);
            let (so, co) = aperture_weights(Parity::Odd, k, 1.0);
            prop_assert!((even.d / se - odd.d / so).norm() < 1e-12);
            prop_assert!((even.a / ce - odd.a / co).norm() < 1e-12 * (even.a / ce).norm());
        }
    }
}
