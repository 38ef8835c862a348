//! Annulus eigenpairs and waveguide modes.
//!
//! The annulus `1 < r < 1+h` carries Dirichlet eigenfunctions (TM modes) and
//! Neumann eigenfunctions (TE modes); the eigenvalues are squares of the
//! zeros of Bessel cross products. Each eigenfunction is `f(r)·e^{imθ}` with
//! the radial profile `f` normalized numerically in `L²(r dr dθ)`.
//!
//! Waveguide fields use the parity profiles `p(x₃), q(x₃)` with
//! `p = cos(s x₃), q = sin(s x₃)` for even parity and
//! `p = −sin(s x₃), q = cos(s x₃)` for odd parity (so that `p′ = −s q` in
//! both cases). The tangential electric field is proportional to `2p`, the
//! tangential magnetic field to `q`.

use crate::quad::gauss_legendre_on;
use crate::specfun::{bessel_quad, cross_product_d, cross_product_n, SpecfunError};
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

/// Errors raised while building eigenpairs or mode fields.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModesError {
    /// Special-function evaluation failed.
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
    /// A predicted root could not be bracketed.
    #[error("could not bracket root {family:?} m={m} n={n} near β={seed}")]
    BracketFailure {
        /// Eigenvalue family.
        family: Family,
        /// Angular momentum.
        m: u32,
        /// Radial index.
        n: u32,
        /// Asymptotic seed.
        seed: f64,
    },
    /// Invalid geometry, mode index or evaluation point.
    #[error("domain error: {0}")]
    Domain(String),
}

/// Geometry of the annular aperture: inner radius `a`, relative gap width
/// `h` (outer radius `a(1+h)`), slab thickness `l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    /// Inner radius.
    pub a: f64,
    /// Relative gap width.
    pub h: f64,
    /// Slab thickness.
    pub l: f64,
}

impl Geometry {
    /// Geometry with unit inner radius.
    pub fn new(h: f64, l: f64) -> Self {
        Self { a: 1.0, h, l }
    }

    /// Checks `a > 0`, `0 < h ≤ 0.2`, `l > 0`.
    pub fn validate(&self) -> Result<(), ModesError> {
        if !(self.a > 0.0 && self.h > 0.0 && self.h <= 0.2 && self.l > 0.0) {
            return Err(ModesError::Domain(format!(
                "geometry needs a > 0, 0 < h ≤ 0.2, l > 0 (got a={}, h={}, l={})",
                self.a, self.h, self.l
            )));
        }
        Ok(())
    }

    /// The equivalent unit-radius geometry; wavenumbers scale as `k → k·a`.
    pub fn normalized(&self) -> Geometry {
        Geometry { a: 1.0, h: self.h, l: self.l / self.a }
    }
}

/// Eigenvalue family of the cross-product equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Dirichlet problem (TM modes).
    D,
    /// Neumann problem (TE modes).
    N,
}

/// A certified root `β` of a cross-product Bessel equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselRoot {
    /// Family of the cross product.
    pub family: Family,
    /// Angular momentum `|m|`.
    pub m: u32,
    /// Radial index (`n ≥ 1`; `n = 0` is the near-`m` Neumann root).
    pub n: u32,
    /// The root.
    pub beta: f64,
    /// Final sign-change bracket.
    pub bracket: (f64, f64),
    /// Largest `|F|` at the endpoints of the initial sign-change bracket,
    /// the scale against which the root residual is judged.
    pub scale: f64,
    /// Eigenvalue `β²`.
    pub lambda: f64,
}

/// Cross product of the given family.
pub fn cross_product(family: Family, m: u32, beta: f64, h: f64) -> Result<f64, SpecfunError> {
    match family {
        Family::D => cross_product_d(m, beta, h),
        Family::N => cross_product_n(m, beta, h),
    }
}

/// Derivative of the cross product with respect to `β`.
fn cross_product_slope(family: Family, m: u32, beta: f64, h: f64) -> Result<f64, SpecfunError> {
    let a = bessel_quad(m, beta)?;
    let b = bessel_quad(m, beta * (1.0 + h))?;
    let s = 1.0 + h;
    Ok(match family {
        Family::D => a.yp * b.j + s * a.y * b.jp - a.jp * b.y - s * a.j * b.yp,
        Family::N => {
            let mf = (m * m) as f64;
            let second = |z: f64, v: f64, vp: f64| -vp / z - (1.0 - mf / (z * z)) * v;
            let (x, xs) = (beta, beta * s);
            let jpp_a = second(x, a.j, a.jp);
            let ypp_a = second(x, a.y, a.yp);
            let jpp_b = second(xs, b.j, b.jp);
            let ypp_b = second(xs, b.y, b.yp);
            ypp_a * b.jp + s * a.yp * jpp_b - jpp_a * b.yp - s * a.jp * ypp_b
        }
    })
}

/// Two-term large-`h⁻¹` expansion of the `n`-th root.
///
/// Dirichlet: `nπ/h + (4m²−1)h/(8nπ)`; Neumann (`n ≥ 1`):
/// `nπ/h + (4m²+3)h/(8nπ(1+h))`; Neumann near-`m` root (`n = 0`, `m ≠ 0`):
/// `m − mh/2`.
pub fn asymptotic_root(family: Family, m: u32, n: u32, h: f64) -> f64 {
    let mf = m as f64;
    let nf = n as f64;
    match (family, n) {
        (Family::N, 0) => mf - mf * h / 2.0,
        (Family::D, _) => nf * PI / h + (4.0 * mf * mf - 1.0) * h / (8.0 * nf * PI),
        (Family::N, _) => nf * PI / h + (4.0 * mf * mf + 3.0) * h / (8.0 * nf * PI * (1.0 + h)),
    }
}

/// Root search seed: the McMahon-type expansion with the `1/(1+h)` factor.
fn seed(family: Family, m: u32, n: u32, h: f64) -> f64 {
    let mf = m as f64;
    let nf = n as f64;
    match (family, n) {
        (Family::N, 0) => mf - mf * h / 2.0,
        (Family::D, _) => nf * PI / h + (4.0 * mf * mf - 1.0) * h / (8.0 * nf * PI * (1.0 + h)),
        (Family::N, _) => asymptotic_root(family, m, n, h),
    }
}

/// Brackets, bisects and polishes one root from its asymptotic seed.
pub fn certified_root(family: Family, m: u32, n: u32, h: f64) -> Result<BesselRoot, ModesError> {
    if family == Family::D && n == 0 {
        return Err(ModesError::Domain("Dirichlet roots start at n = 1".into()));
    }
    if family == Family::N && n == 0 && m == 0 {
        return Err(ModesError::Domain("the constant Neumann mode has no root".into()));
    }
    let f = |b: f64| cross_product(family, m, b, h);
    let x0 = seed(family, m, n, h);
    let spacing = if n == 0 { (m as f64).min(PI / h) } else { PI / h };
    let cap = 0.45 * spacing;
    let mut w = 0.25 * spacing;
    let (mut lo, mut hi);
    let (mut flo, mut fhi);
    loop {
        lo = x0 - w;
        hi = x0 + w;
        flo = f(lo)?;
        fhi = f(hi)?;
        if flo * fhi < 0.0 {
            break;
        }
        if w >= cap {
            return Err(ModesError::BracketFailure { family, m, n, seed: x0 });
        }
        w = (w * 1.5).min(cap);
    }
    let scale = flo.abs().max(fhi.abs());
    for _ in 0..300 {
        if hi - lo <= 1e-12 * x0 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if fm * flo < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    // Guarded Newton polish inside the final bracket.
    let mut beta = 0.5 * (lo + hi);
    for _ in 0..3 {
        let fv = f(beta)?;
        let d = cross_product_slope(family, m, beta, h)?;
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next = beta - fv / d;
        if next < lo || next > hi {
            break;
        }
        beta = next;
    }
    // Report a bracket of relative width 1e-9 around the polished root.
    let half = 0.45e-9 * beta;
    let (blo, bhi) = (beta - half, beta + half);
    let bracket = if f(blo)? * f(bhi)? < 0.0 { (blo, bhi) } else { (lo.min(beta), hi.max(beta)) };
    Ok(BesselRoot { family, m, n, beta, bracket, scale, lambda: beta * beta })
}

/// All roots with `β ≤ beta_max`, ascending.
///
/// Requires `beta_max ≤ 5π/h`; larger tables for the truncated system are
/// produced by [`roots_up_to_order`].
pub fn find_roots(family: Family, m: u32, h: f64, beta_max: f64) -> Result<Vec<BesselRoot>, ModesError> {
    if !(h > 0.0 && h <= 0.2) {
        return Err(ModesError::Domain(format!("h must lie in (0, 0.2], got {h}")));
    }
    if beta_max > 5.0 * PI / h * (1.0 + 1e-12) {
        return Err(ModesError::Domain(format!("beta_max {beta_max} exceeds 5π/h")));
    }
    let mut out = Vec::new();
    if family == Family::N && m != 0 && seed(family, m, 0, h) <= beta_max {
        let r = certified_root(family, m, 0, h)?;
        if r.beta <= beta_max {
            out.push(r);
        }
    }
    let mut n = 1;
    while seed(family, m, n, h) <= beta_max + PI / h {
        let r = certified_root(family, m, n, h)?;
        if r.beta <= beta_max {
            out.push(r);
        } else {
            break;
        }
        n += 1;
    }
    Ok(out)
}

/// Roots with radial index `1..=n_max` (Neumann tables additionally start
/// with the near-`m` root when `m ≠ 0`).
pub fn roots_up_to_order(family: Family, m: u32, h: f64, n_max: u32) -> Result<Vec<BesselRoot>, ModesError> {
    let mut out = Vec::new();
    if family == Family::N && m != 0 {
        out.push(certified_root(family, m, 0, h)?);
    }
    for n in 1..=n_max {
        out.push(certified_root(family, m, n, h)?);
    }
    Ok(out)
}

/// Normalized radial profile `f(r)` of an annulus eigenfunction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenfunction {
    /// Signed angular momentum of the scalar `f(r)e^{imθ}`.
    pub m: i32,
    /// Family.
    pub family: Family,
    /// Radial index.
    pub n: u32,
    /// Eigenvalue.
    pub lambda: f64,
    /// Relative gap width.
    pub h: f64,
    beta: f64,
    // f(r) = ca·J_m(βr) − cb·Y_m(βr), or the constant `ca` when β = 0.
    ca: f64,
    cb: f64,
}

impl Eigenfunction {
    /// Builds the normalized eigenfunction for a certified root, with sign
    /// fixed by `f′(1) > 0` (Dirichlet) or `f(1) > 0` (Neumann).
    pub fn from_root(root: &BesselRoot, m: i32, h: f64) -> Result<Self, ModesError> {
        let am = root.m;
        let bq = bessel_quad(am, root.beta)?;
        let (ca, cb) = match root.family {
            Family::D => (bq.y, bq.j),
            Family::N => (bq.yp, bq.jp),
        };
        let mut e = Eigenfunction { m, family: root.family, n: root.n, lambda: root.lambda, h, beta: root.beta, ca, cb };
        let nodes = 48 + 4 * root.n as usize;
        let (r, w) = gauss_legendre_on(nodes, 1.0, 1.0 + h);
        let mut norm2 = 0.0;
        for (ri, wi) in r.iter().zip(&w) {
            let v = e.value_raw(*ri)?;
            norm2 += wi * v * v * ri;
        }
        norm2 *= 2.0 * PI;
        let mut c = 1.0 / norm2.sqrt();
        let reference = match root.family {
            Family::D => e.derivative_raw(1.0)?,
            Family::N => e.value_raw(1.0)?,
        };
        if reference < 0.0 {
            c = -c;
        }
        e.ca *= c;
        e.cb *= c;
        Ok(e)
    }

    /// The constant Neumann mode `1/√(πh(2+h))` (momentum 0, `λ = 0`).
    pub fn constant(h: f64) -> Self {
        Eigenfunction {
            m: 0,
            family: Family::N,
            n: 0,
            lambda: 0.0,
            h,
            beta: 0.0,
            ca: 1.0 / (PI * h * (2.0 + h)).sqrt(),
            cb: 0.0,
        }
    }

    fn value_raw(&self, r: f64) -> Result<f64, SpecfunError> {
        if self.beta == 0.0 {
            return Ok(self.ca);
        }
        let b = bessel_quad(self.m.unsigned_abs(), self.beta * r)?;
        Ok(self.ca * b.j - self.cb * b.y)
    }

    fn derivative_raw(&self, r: f64) -> Result<f64, SpecfunError> {
        if self.beta == 0.0 {
            return Ok(0.0);
        }
        let b = bessel_quad(self.m.unsigned_abs(), self.beta * r)?;
        Ok(self.beta * (self.ca * b.jp - self.cb * b.yp))
    }

    /// `f(r)`.
    pub fn value(&self, r: f64) -> f64 {
        self.value_raw(r).expect("eigenfunction evaluated inside its certified range")
    }

    /// `f′(r)`.
    pub fn derivative(&self, r: f64) -> f64 {
        self.derivative_raw(r).expect("eigenfunction evaluated inside its certified range")
    }

    /// Value and derivative together.
    pub fn value_and_derivative(&self, r: f64) -> (f64, f64) {
        if self.beta == 0.0 {
            return (self.ca, 0.0);
        }
        let b = bessel_quad(self.m.unsigned_abs(), self.beta * r).expect("valid radial argument");
        (self.ca * b.j - self.cb * b.y, self.beta * (self.ca * b.jp - self.cb * b.yp))
    }
}

/// Radial value of the normalized eigenfunction of `root` at `r`.
pub fn eigenfunction(root: &BesselRoot, r: f64, h: f64) -> Result<f64, ModesError> {
    if r < 1.0 - 1e-12 || r > 1.0 + h + 1e-12 {
        return Err(ModesError::Domain(format!("r = {r} outside [1, 1+h]")));
    }
    Ok(Eigenfunction::from_root(root, root.m as i32, h)?.value(r))
}

/// `s = √(k² − λ)` on the branch `Im s ≥ 0` (positive for real `k² > λ`).
pub fn s_value(k: Complex64, lambda: f64) -> Complex64 {
    let s = (k * k - lambda).sqrt();
    if s.im < 0.0 || (s.im == 0.0 && s.re < 0.0) {
        -s
    } else {
        s
    }
}

/// Waveguide mode families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeFamily {
    /// Transverse electric (Neumann eigenfunctions).
    TE,
    /// Transverse magnetic (Dirichlet eigenfunctions).
    TM,
    /// Transverse electromagnetic (`log r` potential, `m = 0`).
    TEM,
}

/// Parity of the field with respect to the slab midplane `x₃ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    /// Tangential E even in `x₃`.
    Even,
    /// Tangential E odd in `x₃`.
    Odd,
}

/// Identifies one waveguide mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeIndex {
    /// Mode family.
    pub family: ModeFamily,
    /// Parity.
    pub parity: Parity,
    /// Angular momentum.
    pub m: i32,
    /// Radial index.
    pub n: u32,
}

impl ModeIndex {
    /// Checks the family/index constraints.
    pub fn validate(&self) -> Result<(), ModesError> {
        match self.family {
            ModeFamily::TEM if self.m != 0 => Err(ModesError::Domain("TEM mode requires m = 0".into())),
            ModeFamily::TE if self.m == 0 && self.n == 0 => Err(ModesError::Domain("TE(0,0) is not a mode".into())),
            ModeFamily::TM if self.n == 0 => Err(ModesError::Domain("TM modes need n ≥ 1".into())),
            _ => Ok(()),
        }
    }
}

/// Electric and magnetic field of a mode (Cartesian components).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeField {
    /// Electric field.
    pub e: [Complex64; 3],
    /// Magnetic field.
    pub h: [Complex64; 3],
}

impl ModeField {
    /// Zero field.
    pub fn zero() -> Self {
        let z = Complex64::new(0.0, 0.0);
        ModeField { e: [z; 3], h: [z; 3] }
    }

    /// Adds `c·other` in place.
    pub fn add_scaled(&mut self, c: Complex64, other: &ModeField) {
        for i in 0..3 {
            self.e[i] += c * other.e[i];
            self.h[i] += c * other.h[i];
        }
    }
}

/// Raw parity profiles `(p(x₃), q(x₃))`.
pub fn profiles(parity: Parity, s: Complex64, x3: f64) -> (Complex64, Complex64) {
    let z = s * x3;
    match parity {
        Parity::Even => (z.cos(), z.sin()),
        Parity::Odd => (-z.sin(), z.cos()),
    }
}

/// Profiles divided by the aperture weight `σ = q(l/2)`, evaluated with
/// scaled exponentials so that evanescent modes (`Im s ≫ 1`) never
/// overflow: with `E± = e^{is(L±x)}`, `D = e^{2isL}`, `L = l/2`,
/// even: `p/σ = i(E₊+E₋)/(D−1)`, `q/σ = (E₊−E₋)/(D−1)`;
/// odd: `p/σ = i(E₊−E₋)/(D+1)`, `q/σ = (E₊+E₋)/(D+1)`.
pub fn profiles_over_weight(parity: Parity, s: Complex64, x3: f64, half_l: f64) -> (Complex64, Complex64) {
    let i = Complex64::i();
    let ep = (i * s * (half_l + x3)).exp();
    let em = (i * s * (half_l - x3)).exp();
    let d = (i * s * 2.0 * half_l).exp();
    match parity {
        Parity::Even => (i * (ep + em) / (d - 1.0), (ep - em) / (d - 1.0)),
        Parity::Odd => (i * (ep - em) / (d + 1.0), (ep + em) / (d + 1.0)),
    }
}

/// Aperture weights `σ = q(l/2)` and `c = p(l/2)` for a parity.
pub fn aperture_weights(parity: Parity, s: Complex64, half_l: f64) -> (Complex64, Complex64) {
    let (p, q) = profiles(parity, s, half_l);
    (q, p)
}

/// `c/σ = p(l/2)/q(l/2)` in overflow-safe form:
/// even `cot(sL) = i(D+1)/(D−1)`, odd `−tan(sL) = i(D−1)/(D+1)`.
pub fn weight_ratio(parity: Parity, s: Complex64, half_l: f64) -> Complex64 {
    let i = Complex64::i();
    let d = (i * s * 2.0 * half_l).exp();
    match parity {
        Parity::Even => i * (d + 1.0) / (d - 1.0),
        Parity::Odd => i * (d - 1.0) / (d + 1.0),
    }
}

/// Field of a mode given its eigenfunction and already-evaluated profile
/// values `p, q` (raw or divided by the aperture weight).
pub fn mode_field_from_profiles(
    family: ModeFamily,
    eig: Option<&Eigenfunction>,
    k: Complex64,
    s: Complex64,
    r: f64,
    theta: f64,
    p: Complex64,
    q: Complex64,
) -> ModeField {
    let i = Complex64::i();
    let (ct, st) = (theta.cos(), theta.sin());
    // Scalar potential value and Cartesian gradient.
    let (psi, gx, gy, lambda) = match family {
        ModeFamily::TEM => {
            let g = 1.0 / r;
            (Complex64::new(r.ln(), 0.0), Complex64::new(g * ct, 0.0), Complex64::new(g * st, 0.0), 0.0)
        }
        _ => {
            let e = eig.expect("TE/TM modes need an eigenfunction");
            let (f, fp) = e.value_and_derivative(r);
            let phase = Complex64::from_polar(1.0, e.m as f64 * theta);
            let dr = phase * fp;
            let dt = phase * i * (e.m as f64) * f / r;
            (phase * f, dr * ct - dt * st, dr * st + dt * ct, e.lambda)
        }
    };
    let z = Complex64::new(0.0, 0.0);
    match family {
        ModeFamily::TE => ModeField {
            e: [2.0 * p * gy, -2.0 * p * gx, z],
            h: [2.0 * i * s * q / k * gx, 2.0 * i * s * q / k * gy, -2.0 * i * lambda * p / k * psi],
        },
        ModeFamily::TM => {
            let hq = 2.0 * i * k * q / s;
            ModeField { e: [2.0 * p * gx, 2.0 * p * gy, 2.0 * lambda * q / s * psi], h: [-hq * gy, hq * gx, z] }
        }
        ModeFamily::TEM => {
            let hq = 2.0 * i * q;
            ModeField { e: [2.0 * p * gx, 2.0 * p * gy, z], h: [-hq * gy, hq * gx, z] }
        }
    }
}

/// Eigenfunction of the mode `idx` on a unit-radius geometry.
pub fn mode_eigenfunction(idx: &ModeIndex, h: f64) -> Result<Option<Eigenfunction>, ModesError> {
    idx.validate()?;
    let am = idx.m.unsigned_abs();
    Ok(match idx.family {
        ModeFamily::TEM => None,
        ModeFamily::TE => Some(Eigenfunction::from_root(&certified_root(Family::N, am, idx.n, h)?, idx.m, h)?),
        ModeFamily::TM => Some(Eigenfunction::from_root(&certified_root(Family::D, am, idx.n, h)?, idx.m, h)?),
    })
}

/// Field of one waveguide mode at `(r, θ, x₃)` in the gap, for the
/// unit-radius geometry (`geom.a` must be 1; rescale via
/// [`Geometry::normalized`]).
pub fn waveguide_mode(idx: &ModeIndex, geom: &Geometry, k: Complex64, point: (f64, f64, f64)) -> Result<ModeField, ModesError> {
    geom.validate()?;
    if (geom.a - 1.0).abs() > 1e-14 {
        return Err(ModesError::Domain("mode fields are evaluated on the unit-radius geometry".into()));
    }
    let (r, theta, x3) = point;
    if r < 1.0 - 1e-12 || r > 1.0 + geom.h + 1e-12 || x3.abs() > 0.5 * geom.l + 1e-12 {
        return Err(ModesError::Domain(format!("point ({r}, {theta}, {x3}) is outside the gap")));
    }
    let eig = mode_eigenfunction(idx, geom.h)?;
    // The TEM profile is written in terms of k itself (not a branch of √k²).
    let s = match eig.as_ref() {
        Some(e) => s_value(k, e.lambda),
        None => k,
    };
    let (p, q) = profiles(idx.parity, s, x3);
    let field = mode_field_from_profiles(idx.family, eig.as_ref(), k, s, r, theta, p, q);
    if field.e.iter().chain(field.h.iter()).any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(ModesError::Domain("mode field not representable; use weight-normalized profiles".into()));
    }
    Ok(field)
}

/// Relative residual `‖curl E − ikH‖/‖ikH‖` of one mode, with the curl
/// of `E` from fourth-order central differences of step `step` in Cartesian coordinates
/// around `point = (r, θ, x₃)`.
pub fn maxwell_residual(idx: &ModeIndex, geom: &Geometry, k: Complex64, point: (f64, f64, f64), step: f64) -> Result<f64, ModesError> {
    let (r, theta, x3) = point;
    let x = [r * theta.cos(), r * theta.sin(), x3];
    let eval = |y: [f64; 3]| -> Result<ModeField, ModesError> {
        let rr = (y[0] * y[0] + y[1] * y[1]).sqrt();
        waveguide_mode(idx, geom, k, (rr, y[1].atan2(y[0]), y[2]))
    };
    // d[j][c] = ∂_j E_c from the fourth-order central stencil; evanescent
    // TM modes have curl components that cancel to relative size k²/λ, so a
    // second-order stencil would be truncation-limited.
    let mut de = [[Complex64::new(0.0, 0.0); 3]; 3];
    for j in 0..3 {
        let shifted = |t: f64| {
            let mut y = x;
            y[j] += t * step;
            eval(y)
        };
        let (p1, m1, p2, m2) = (shifted(1.0)?, shifted(-1.0)?, shifted(2.0)?, shifted(-2.0)?);
        for c in 0..3 {
            de[j][c] = (8.0 * (p1.e[c] - m1.e[c]) - (p2.e[c] - m2.e[c])) / (12.0 * step);
        }
    }
    let curl = |d: &[[Complex64; 3]; 3]| [d[1][2] - d[2][1], d[2][0] - d[0][2], d[0][1] - d[1][0]];
    let f0 = eval(x)?;
    let ce = curl(&de);
    let i = Complex64::i();
    let mut num = 0.0;
    let mut den = 0.0;
    for c in 0..3 {
        num += (ce[c] - i * k * f0.h[c]).norm_sqr();
        den += (k * f0.h[c]).norm_sqr();
    }
    Ok((num / den).sqrt())
}

/// Relative size of the tangential electric field `|E_θ| + |E₃|` on the
/// side walls `r = 1` and `r = 1+h` at angle `θ` and height `x₃`.
pub fn wall_residual(idx: &ModeIndex, geom: &Geometry, k: Complex64, theta: f64, x3: f64) -> Result<f64, ModesError> {
    let mut worst: f64 = 0.0;
    for &r in &[1.0, 1.0 + geom.h] {
        let f = waveguide_mode(idx, geom, k, (r, theta, x3))?;
        let e_theta = -f.e[0] * theta.sin() + f.e[1] * theta.cos();
        let norm = (f.e.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt();
        // Judge against the mode's interior amplitude when the wall value is tiny.
        let mid = waveguide_mode(idx, geom, k, (1.0 + 0.5 * geom.h, theta, x3))?;
        let scale = norm.max((mid.e.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt());
        worst = worst.max((e_theta.norm() + f.e[2].norm()) / scale);
    }
    Ok(worst)
}
