//! Forced scattering inside the annular gap: source vectors for plane-wave
//! and dipole excitation, solution of the inhomogeneous truncated system,
//! reconstruction of the gap field and field-enhancement scans.
//!
//! The slab problem splits into an even and an odd problem, each driven by
//! half the short-circuit magnetic field `H^{sc}` (incident plus reflected
//! field of the closed screen) on the upper aperture. For a mode `X` with
//! aperture current `M_X` (`∇ψ` for TE, `ẑ × ∇ψ` for TM, `ẑ × ∇log r` for
//! TEM) the source entry is `src_X = (ik/4)∫ (H^{sc}/2)·M̄_X dS`; the
//! normalized right-hand sides are `a = src₀/ρ₀` and `b_X = (τ_X/ζ_X)src_X`.
//! The total field in the gap is the sum of the even and odd solutions.
//!
//! All lengths are in units of the inner radius.

use crate::modes::{mode_field_from_profiles, profiles, profiles_over_weight, Geometry, ModeFamily, ModeField, Parity};
use crate::quad::gauss_legendre_on;
use crate::resonance::{asymptotic_resonance, refine_with, AsymptoticVariant, Classification, ResonanceError};
use crate::system::{characteristic_value, solve_i_minus_b, Assembler, BasisMode, CharacteristicSystem, SystemError};
use crate::kernel::SingleLayerGram;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt::Write as _;
use thiserror::Error;

/// Number of Gauss–Legendre nodes for the radial source integrals.
const SOURCE_NODES: usize = 48;

/// Distance kept from the gap walls when sampling fields.
pub const WALL_EXCLUSION: f64 = 1e-6;

/// Errors raised by forced-scattering computations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnhancementError {
    /// System assembly or evaluation failed.
    #[error(transparent)]
    System(#[from] SystemError),
    /// Resonance search failed.
    #[error(transparent)]
    Resonance(#[from] ResonanceError),
    /// `Λ_m(k)` vanishes to working precision.
    #[error("characteristic function vanishes at the drive frequency (|Λ| = {0:e})")]
    SingularLambda(f64),
    /// Invalid excitation or scan parameters.
    #[error("invalid input: {0}")]
    Domain(String),
}

/// Incident field driving the slab.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Excitation {
    /// Plane wave travelling in `−x₃` with `E⁰ = (0,1,0)`, `H⁰ = (1,0,0)`.
    NormalPlane,
    /// Plane wave with direction `(d₁, 0, −d₃)`, `d₁² + d₃² = 1`, `E⁰ = (0,1,0)`.
    ObliquePlane {
        /// In-plane direction cosine.
        d1: f64,
        /// Normal direction cosine.
        d3: f64,
    },
    /// Vertical electric dipole on the axis at height `y₃ > 0` above the
    /// upper face: `E = ẑG + k⁻²∂₃∇G`, `G = e^{ik|x−y|}/(4π|x−y|)`.
    Dipole {
        /// Height above the upper face.
        y3: f64,
    },
}

impl Excitation {
    /// Oblique plane wave at angle `ϑ` from the normal.
    pub fn oblique(angle: f64) -> Self {
        Excitation::ObliquePlane { d1: angle.sin(), d3: angle.cos() }
    }

    /// Checks the invariants of the excitation.
    pub fn validate(&self) -> Result<(), EnhancementError> {
        match *self {
            Excitation::NormalPlane => Ok(()),
            Excitation::ObliquePlane { d1, d3 } => {
                if (d1 * d1 + d3 * d3 - 1.0).abs() > 1e-12 || d3 <= 0.0 {
                    Err(EnhancementError::Domain(format!("direction ({d1}, {d3}) must be a unit vector with d₃ > 0")))
                } else {
                    Ok(())
                }
            }
            Excitation::Dipole { y3 } => {
                if y3 > 0.0 && y3.is_finite() {
                    Ok(())
                } else {
                    Err(EnhancementError::Domain(format!("dipole height must be positive, got {y3}")))
                }
            }
        }
    }

    /// Short label used in tables.
    pub fn label(&self) -> &'static str {
        match self {
            Excitation::NormalPlane => "normal_plane",
            Excitation::ObliquePlane { .. } => "oblique_plane",
            Excitation::Dipole { .. } => "dipole",
        }
    }

    /// Momenta carrying a nonzero source: `±1` for normal incidence, `0`
    /// for the dipole, `|m| ≤ ⌈k d₁(1+h)⌉ + 8` for oblique incidence.
    pub fn momenta(&self, k: f64, h: f64) -> Vec<i32> {
        match *self {
            Excitation::NormalPlane => vec![-1, 1],
            Excitation::Dipole { .. } => vec![0],
            Excitation::ObliquePlane { d1, .. } => {
                let mt = jacobi_anger_truncation(k * d1, h);
                (-mt..=mt).collect()
            }
        }
    }
}

/// Jacobi–Anger truncation `⌈x(1+h)⌉ + 8` for argument `x = k d₁`.
pub fn jacobi_anger_truncation(x: f64, h: f64) -> i32 {
    (x.abs() * (1.0 + h)).ceil() as i32 + 8
}

/// Source entries of one momentum and parity.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceVector {
    /// Angular momentum.
    pub m: i32,
    /// Parity.
    pub parity: Parity,
    /// Parity factor multiplying the odd problem (always `1` here: the odd
    /// profiles are real multiples of `sin`).
    pub parity_factor: Complex64,
    /// Unnormalized entries `src_X` over the basis (resonant mode first).
    pub raw: DVector<Complex64>,
    /// `a_m = src₀/ρ₀`.
    pub a: Complex64,
    /// `b_m` (length `2N`).
    pub b: DVector<Complex64>,
}

/// `i^n J_n(x)` for integer `n`, using `J_{−n} = (−1)^n J_n`.
fn i_pow_bessel(n: i32, x: f64) -> Complex64 {
    let an = n.unsigned_abs();
    let phase = match an % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    };
    phase * libm::jn(an as i32, x)
}

/// Radial value and derivative of a basis mode (`log r` for TEM).
fn radial(mode: &BasisMode, r: f64) -> (f64, f64) {
    match &mode.eig {
        Some(e) => e.value_and_derivative(r),
        None => (r.ln(), 1.0 / r),
    }
}

/// `∫ (H^{sc}/2)·M̄_X dS` for one basis mode of momentum `m` (unit radius).
fn aperture_pairing(exc: &Excitation, k: Complex64, m: i32, h: f64, l: f64, mode: &BasisMode) -> Complex64 {
    let (nodes, weights) = gauss_legendre_on(SOURCE_NODES, 1.0, 1.0 + h);
    let i = Complex64::i();
    let mf = m as f64;
    match *exc {
        Excitation::NormalPlane | Excitation::ObliquePlane { .. } => {
            let (d1, d3) = match *exc {
                Excitation::ObliquePlane { d1, d3 } => (d1, d3),
                _ => (0.0, 1.0),
            };
            // H^{sc}/2 = d₃ e^{−ik d₃ l/2} e^{ik d₁ x₁} x̂ on the aperture.
            let amp = d3 * (-i * k * d3 * l / 2.0).exp();
            let kr = k.re * d1;
            let mut acc = Complex64::new(0.0, 0.0);
            for (&r, &w) in nodes.iter().zip(&weights) {
                let (f, fp) = radial(mode, r);
                let (gp, gm) = match mode.family {
                    ModeFamily::TEM => (1.0 / r, 1.0 / r),
                    _ => (fp - mf * f / r, fp + mf * f / r),
                };
                let jp = i_pow_bessel(m + 1, kr * r);
                let jm = i_pow_bessel(m - 1, kr * r);
                let term = match mode.family {
                    ModeFamily::TE => PI * (gp * jp + gm * jm),
                    _ => -i * PI * (gp * jp - gm * jm),
                };
                acc += term * w * r;
            }
            amp * acc
        }
        Excitation::Dipole { y3 } => {
            if m != 0 || mode.family == ModeFamily::TE {
                return Complex64::new(0.0, 0.0);
            }
            // H^{sc}/2 = −e^{ikR}(kR + i) r/(4πkR³) θ̂ with R = √(r² + y₃²).
            let mut acc = Complex64::new(0.0, 0.0);
            for (&r, &w) in nodes.iter().zip(&weights) {
                let big_r = (r * r + y3 * y3).sqrt();
                let h_theta = -(i * k * big_r).exp() * (k * big_r + i) * r / (4.0 * PI * k * big_r.powi(3));
                let (_, up) = radial(mode, r);
                acc += 2.0 * PI * h_theta * up * w * r;
            }
            acc
        }
    }
}

/// Source vector of momentum `m` at the wavenumber of `sys`, normalized
/// consistently with the blocks of `sys`.
pub fn build_source_with(asm: &Assembler, sys: &CharacteristicSystem, exc: &Excitation) -> Result<SourceVector, EnhancementError> {
    exc.validate()?;
    let k = sys.k;
    let pref = Complex64::i() * k / 4.0;
    let raw = DVector::from_iterator(
        asm.basis.len(),
        asm.basis.iter().map(|mode| pref * aperture_pairing(exc, k, asm.m, asm.geom.h, asm.geom.l, mode)),
    );
    let a = raw[0] / sys.rho0;
    let b = DVector::from_fn(raw.len() - 1, |j, _| sys.row_scale[j] * raw[j + 1]);
    Ok(SourceVector { m: asm.m, parity: sys.parity, parity_factor: Complex64::new(1.0, 0.0), raw, a, b })
}

/// Source vector of momentum `m` for a physical wavenumber `k`.
pub fn build_source(exc: &Excitation, k: Complex64, m: i32, parity: Parity, geom: &Geometry, order: usize) -> Result<SourceVector, EnhancementError> {
    let asm = Assembler::with_defaults(m, geom, order)?;
    let sys = asm.system(k, parity);
    build_source_with(&asm, &sys, exc)
}

/// Solves the forced system: `d = [a + R(I−B)⁻¹b]/Λ`, `c = (I−B)⁻¹(b + C d)`.
/// `d` is the resonant unknown in the (possibly column-scaled) system.
pub fn solve_forced(sys: &CharacteristicSystem, src: &SourceVector) -> Result<(Complex64, DVector<Complex64>), EnhancementError> {
    let lambda = characteristic_value(sys)?;
    if lambda.norm() < 1e-14 {
        return Err(EnhancementError::SingularLambda(lambda.norm()));
    }
    let column = |v: &DVector<Complex64>| DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    let xb = solve_i_minus_b(&sys.b, &column(&src.b))?;
    let d = (src.a + (sys.r.transpose() * &xb)[(0, 0)]) / lambda;
    let rhs = &src.b + &sys.c * d;
    let c = solve_i_minus_b(&sys.b, &column(&rhs))?;
    Ok((d, DVector::from_column_slice(c.as_slice())))
}

/// Solution of one momentum and parity, ready for field evaluation.
#[derive(Debug, Clone)]
pub struct MomentumSolution {
    /// Angular momentum.
    pub m: i32,
    /// Parity.
    pub parity: Parity,
    /// Basis of the momentum.
    pub basis: Vec<BasisMode>,
    /// Resonant unknown of the solved system.
    pub d: Complex64,
    /// Scaled non-resonant unknowns.
    pub c: DVector<Complex64>,
    /// Column scale of the resonant unknown (`s₀` for odd, `m ≠ 0`).
    pub column_scale: Complex64,
}

/// Field sample in the gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    /// `(r, θ, x₃)`.
    pub position: (f64, f64, f64),
    /// Electric field (Cartesian).
    pub e: [Complex64; 3],
    /// Magnetic field (Cartesian).
    pub h: [Complex64; 3],
}

impl FieldSample {
    /// Euclidean norm of `E`.
    pub fn abs_e(&self) -> f64 {
        self.e.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Euclidean norm of `H`.
    pub fn abs_h(&self) -> f64 {
        self.h.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Radial electric component.
    pub fn e_r(&self) -> Complex64 {
        let (_, t, _) = self.position;
        self.e[0] * t.cos() + self.e[1] * t.sin()
    }
}

/// Forced solution summed over momenta and both parities.
#[derive(Debug, Clone)]
pub struct ForcedField {
    /// Drive wavenumber (unit radius).
    pub k: Complex64,
    /// Unit-radius geometry.
    pub geom: Geometry,
    /// Per-momentum, per-parity solutions.
    pub parts: Vec<MomentumSolution>,
}

/// Solves the forced problem for one momentum and parity.
pub fn solve_momentum(asm: &Assembler, exc: &Excitation, k_phys: Complex64, parity: Parity) -> Result<MomentumSolution, EnhancementError> {
    let sys = asm.system(k_phys, parity);
    let src = build_source_with(asm, &sys, exc)?;
    let (d, c) = solve_forced(&sys, &src)?;
    Ok(MomentumSolution { m: asm.m, parity, basis: asm.basis.clone(), d, c, column_scale: sys.column_scale })
}

/// Solves the forced problem for every excited momentum and both parities.
pub fn solve_excitation(
    exc: &Excitation,
    k_phys: f64,
    geom: &Geometry,
    order: usize,
    quad_radial: usize,
    quad_angular: usize,
) -> Result<ForcedField, EnhancementError> {
    exc.validate()?;
    let unit = geom.normalized();
    let k = Complex64::new(k_phys * geom.a, 0.0);
    let mut parts = Vec::new();
    for m in exc.momenta(k.re, unit.h) {
        let asm = Assembler::new(m, geom, order, quad_radial, quad_angular)?;
        for parity in [Parity::Even, Parity::Odd] {
            parts.push(solve_momentum(&asm, exc, Complex64::new(k_phys, 0.0), parity)?);
        }
    }
    Ok(ForcedField { k, geom: unit, parts })
}

impl ForcedField {
    /// Field of one momentum/parity part at `(r, θ, x₃)`.
    pub fn part_field(&self, part: &MomentumSolution, point: (f64, f64, f64)) -> ModeField {
        let (r, theta, x3) = point;
        let half_l = 0.5 * self.geom.l;
        let k = self.k;
        let mut total = ModeField::zero();
        for (j, mode) in part.basis.iter().enumerate() {
            let s = mode.s(k);
            let (coef, p, q) = if j == 0 {
                let (p, q) = profiles(part.parity, s, x3);
                (part.d / part.column_scale, p, q)
            } else {
                let (p, q) = profiles_over_weight(part.parity, s, x3, half_l);
                let tau = match mode.family {
                    ModeFamily::TE => mode.lambda.powf(0.75),
                    ModeFamily::TM => mode.lambda.powf(0.25),
                    ModeFamily::TEM => 1.0,
                };
                (part.c[j - 1] / tau, p, q)
            };
            let field = mode_field_from_profiles(mode.family, mode.eig.as_ref(), k, s, r, theta, p, q);
            total.add_scaled(coef, &field);
        }
        total
    }

    /// Total field (all momenta, both parities) at `(r, θ, x₃)` in the gap.
    pub fn sample(&self, point: (f64, f64, f64)) -> FieldSample {
        let mut total = ModeField::zero();
        for part in &self.parts {
            total.add_scaled(Complex64::new(1.0, 0.0), &self.part_field(part, point));
        }
        FieldSample { position: point, e: total.e, h: total.h }
    }

    /// Field of one parity only.
    pub fn sample_parity(&self, parity: Parity, point: (f64, f64, f64)) -> FieldSample {
        let mut total = ModeField::zero();
        for part in self.parts.iter().filter(|p| p.parity == parity) {
            total.add_scaled(Complex64::new(1.0, 0.0), &self.part_field(part, point));
        }
        FieldSample { position: point, e: total.e, h: total.h }
    }
}

/// Gap field at `(r, θ, x₃)` (unit-radius coordinates) for a solved excitation.
pub fn field_in_gap(field: &ForcedField, point: (f64, f64, f64)) -> Result<FieldSample, EnhancementError> {
    let (r, _, x3) = point;
    let g = &field.geom;
    if r < 1.0 || r > 1.0 + g.h || x3.abs() > 0.5 * g.l {
        return Err(EnhancementError::Domain(format!("point {point:?} is outside the gap")));
    }
    Ok(field.sample(point))
}

/// Maxima over the sampling grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldMaxima {
    /// `max |E|`.
    pub abs_e: f64,
    /// `max |H|`.
    pub abs_h: f64,
    /// `max |H₃|`.
    pub abs_h3: f64,
    /// `max |E_r|`.
    pub abs_e_r: f64,
}

/// Samples the field on an `n_r × n_θ × n_3` grid in `(r, θ, x₃)` that keeps
/// [`WALL_EXCLUSION`] away from the walls, and returns the maxima.
pub fn field_maxima(field: &ForcedField, n_r: usize, n_theta: usize, n_3: usize) -> FieldMaxima {
    let g = &field.geom;
    let lin = |a: f64, b: f64, n: usize, j: usize| if n == 1 { 0.5 * (a + b) } else { a + (b - a) * j as f64 / (n - 1) as f64 };
    let (r0, r1) = (1.0 + WALL_EXCLUSION, 1.0 + g.h - WALL_EXCLUSION);
    let (z0, z1) = (-0.5 * g.l + WALL_EXCLUSION, 0.5 * g.l - WALL_EXCLUSION);
    let mut out = FieldMaxima { abs_e: 0.0, abs_h: 0.0, abs_h3: 0.0, abs_e_r: 0.0 };
    for ir in 0..n_r {
        let r = lin(r0, r1, n_r, ir);
        for it in 0..n_theta {
            let theta = 2.0 * PI * it as f64 / n_theta as f64;
            for iz in 0..n_3 {
                let s = field.sample((r, theta, lin(z0, z1, n_3, iz)));
                out.abs_e = out.abs_e.max(s.abs_e());
                out.abs_h = out.abs_h.max(s.abs_h());
                out.abs_h3 = out.abs_h3.max(s.h[2].norm());
                out.abs_e_r = out.abs_e_r.max(s.e_r().norm());
            }
        }
    }
    out
}

/// How the drive frequency of a scan is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriveSelector {
    /// `Re k*` of a refined resonance, recomputed for every `h`.
    Resonance {
        /// Kind of resonance.
        class: Classification,
        /// Parity of the resonance.
        parity: Parity,
    },
    /// A fixed physical wavenumber.
    Fixed(f64),
}

/// One row of an enhancement scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    /// Relative gap width.
    pub h: f64,
    /// Drive wavenumber.
    pub k_drive: f64,
    /// Excitation.
    pub excitation: Excitation,
    /// Field maxima on the sampling grid.
    pub maxima: FieldMaxima,
}

/// Drive wavenumber for one geometry.
pub fn drive_frequency(selector: &DriveSelector, geom: &Geometry, order: usize, gram: &SingleLayerGram) -> Result<f64, EnhancementError> {
    match *selector {
        DriveSelector::Fixed(k) => Ok(k),
        DriveSelector::Resonance { class, parity } => {
            let asm = Assembler::with_defaults(class.m(), geom, order)?;
            let seed = asymptotic_resonance(class, parity, geom, gram, AsymptoticVariant::Consistent);
            Ok(refine_with(&asm, &seed, 1e-10)?.k.re)
        }
    }
}

/// For each `h` (descending, at least three values): recompute the drive
/// frequency, solve the forced problem and record field maxima on a
/// `16 × 8 × 16` grid in `(r, θ, x₃)`.
pub fn enhancement_scan(
    exc: &Excitation,
    selector: &DriveSelector,
    h_list: &[f64],
    template: &Geometry,
    order: usize,
    gram: &SingleLayerGram,
) -> Result<Vec<ScanRow>, EnhancementError> {
    if h_list.len() < 3 || h_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(EnhancementError::Domain("h list must be strictly descending with at least three values".into()));
    }
    let mut rows = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let geom = Geometry { h, ..*template };
        let k_drive = drive_frequency(selector, &geom, order, gram)?;
        let field = solve_excitation(exc, k_drive, &geom, order, crate::kernel::DEFAULT_QUAD_RADIAL, crate::kernel::DEFAULT_QUAD_ANGULAR)?;
        rows.push(ScanRow { h, k_drive, excitation: *exc, maxima: field_maxima(&field, 16, 8, 16) });
    }
    Ok(rows)
}

/// CSV table with columns `h,k_drive,excitation,max_abs_E,max_abs_H,max_E_times_h,max_H_times_h`.
pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut s = String::from("h,k_drive,excitation,max_abs_E,max_abs_H,max_E_times_h,max_H_times_h\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            crate::csv_number(r.h),
            crate::csv_number(r.k_drive),
            r.excitation.label(),
            crate::csv_number(r.maxima.abs_e),
            crate::csv_number(r.maxima.abs_h),
            crate::csv_number(r.maxima.abs_e * r.h),
            crate::csv_number(r.maxima.abs_h * r.h)
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Geometry {
        Geometry::new(0.01, 2.0)
    }

    #[test]
    fn normal_plane_wave_does_not_drive_m0() {
        for parity in [Parity::Even, Parity::Odd] {
            let src = build_source(&Excitation::NormalPlane, Complex64::new(3.0, 0.0), 0, parity, &small(), 4).unwrap();
            assert!(src.a == Complex64::new(0.0, 0.0));
            assert!(src.raw.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
        }
    }

    #[test]
    fn dipole_drives_only_m0() {
        for m in [-2, -1, 1, 2] {
            let src = build_source(&Excitation::Dipole { y3: 1.0 }, Complex64::new(3.0, 0.0), m, Parity::Even, &small(), 4).unwrap();
            assert!(src.raw.iter().all(|v| v.norm() == 0.0));
        }
        let src = build_source(&Excitation::Dipole { y3: 1.0 }, Complex64::new(3.0, 0.0), 0, Parity::Even, &small(), 4).unwrap();
        assert!(src.a.norm() > 0.0);
    }

    #[test]
    fn normal_plane_source_matches_leading_order() {
        let h = 0.01;
        let k = 3.0;
        for m in [-1, 1] {
            let src = build_source(&Excitation::NormalPlane, Complex64::new(k, 0.0), m, Parity::Even, &Geometry::new(h, 2.0), 4).unwrap();
            let expected = k / 2.0 * (PI * h / 2.0).sqrt();
            let rel = (src.a.norm() - expected).abs() / expected;
            assert!(rel < 5.0 * h, "m = {m}: relative deviation {rel}");
        }
    }

    #[test]
    fn zero_source_gives_zero_coefficients() {
        let asm = Assembler::with_defaults(1, &small(), 4).unwrap();
        let sys = asm.system(Complex64::new(2.0, 0.0), Parity::Even);
        let n = sys.b.nrows();
        let src = SourceVector {
            m: 1,
            parity: Parity::Even,
            parity_factor: Complex64::new(1.0, 0.0),
            raw: DVector::zeros(n + 1),
            a: Complex64::new(0.0, 0.0),
            b: DVector::zeros(n),
        };
        let (d, c) = solve_forced(&sys, &src).unwrap();
        assert_eq!(d.norm(), 0.0);
        assert_eq!(c.norm(), 0.0);
    }

    #[test]
    fn forced_solution_satisfies_the_block_equations() {
        let asm = Assembler::with_defaults(1, &small(), 4).unwrap();
        let sys = asm.system(Complex64::new(2.3, 0.0), Parity::Odd);
        let src = build_source_with(&asm, &sys, &Excitation::oblique(0.4)).unwrap();
        let (d, c) = solve_forced(&sys, &src).unwrap();
        let row0 = (sys.d - sys.a) * d - sys.r.dot(&c) - src.a;
        let rest = &c - &sys.b * &c - &sys.c * d - &src.b;
        assert!(row0.norm() < 1e-10 * (1.0 + src.a.norm()));
        assert!(rest.norm() < 1e-10 * (1.0 + src.b.norm()));
    }

    #[test]
    fn doubling_the_source_doubles_the_field() {
        let geom = small();
        let field = solve_excitation(&Excitation::NormalPlane, 2.0, &geom, 4, 16, 128).unwrap();
        let mut doubled = field.clone();
        for part in &mut doubled.parts {
            part.d *= 2.0;
            part.c *= Complex64::new(2.0, 0.0);
        }
        let p = (1.004, 0.3, 0.2);
        let (a, b) = (field.sample(p), doubled.sample(p));
        for i in 0..3 {
            assert!((b.e[i] - 2.0 * a.e[i]).norm() <= 1e-12 * (1.0 + a.e[i].norm()));
        }
    }

    #[test]
    fn parity_parts_obey_the_mirror_rule() {
        let field = solve_excitation(&Excitation::NormalPlane, 2.0, &small(), 4, 16, 128).unwrap();
        let (up, down) = ((1.005, 0.7, 0.4), (1.005, 0.7, -0.4));
        let (eu, ed) = (field.sample_parity(Parity::Even, up), field.sample_parity(Parity::Even, down));
        let (ou, od) = (field.sample_parity(Parity::Odd, up), field.sample_parity(Parity::Odd, down));
        let tol = 1e-10 * (1.0 + eu.abs_e() + ou.abs_e());
        for i in 0..2 {
            assert!((eu.e[i] - ed.e[i]).norm() < tol);
            assert!((ou.e[i] + od.e[i]).norm() < tol);
        }
        assert!((eu.e[2] + ed.e[2]).norm() < tol);
        assert!((ou.e[2] - od.e[2]).norm() < tol);
        let full = field.sample(down);
        for i in 0..3 {
            assert!((full.e[i] - ed.e[i] - od.e[i]).norm() < tol);
        }
    }

    #[test]
    fn oblique_sources_decay_beyond_the_truncation() {
        let (k, h) = (3.0, 0.01);
        let exc = Excitation::oblique(0.6);
        let mt = jacobi_anger_truncation(k * 0.6f64.sin(), h);
        let mag = |m: i32| build_source(&exc, Complex64::new(k, 0.0), m, Parity::Even, &small(), 2).unwrap().raw.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let peak = (0..3).map(mag).fold(0.0, f64::max);
        let tail = mag(mt);
        let x = k * 0.6f64.sin() * (1.0 + h);
        let bound = 4.0 * (x / 2.0).powi(mt - 1) / (1..mt).map(|j| j as f64).product::<f64>();
        assert!(tail < bound * peak.max(1.0), "tail {tail} bound {bound}");
        assert!(tail < 1e-6 * peak);
    }

    #[test]
    fn scan_csv_has_fixed_columns() {
        let rows = [ScanRow {
            h: 0.01,
            k_drive: 3.0,
            excitation: Excitation::NormalPlane,
            maxima: FieldMaxima { abs_e: 1.0, abs_h: 2.0, abs_h3: 0.5, abs_e_r: 0.5 },
        }];
        let csv = scan_csv(&rows);
        assert!(csv.starts_with("h,k_drive,excitation,max_abs_E,max_abs_H,max_E_times_h,max_H_times_h\n"));
        assert!(csv.contains(",normal_plane,"));
    }
}
