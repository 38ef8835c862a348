//! Scattering resonances: closed-form small-gap expansions, Newton
//! refinement of the roots of the characteristic function `Λ_m(k)` and
//! certification by the argument principle.
//!
//! Resonances are labelled by their leading-order frequency. Fabry–Pérot
//! resonances sit near `k_{m,n} = √(m² + n²π²/l²)` with the longitudinal
//! order `n = 2m′` (even parity) or `n = 2m′ + 1` (odd parity); for `m ≠ 0`
//! they are TE resonances built on the near-`|m|` Neumann mode, for `m = 0`
//! TEM resonances. Even parity with `m ≠ 0` additionally has a resonance
//! near `k = |m|` whose leading order does not depend on the thickness.
//!
//! Two families of closed-form expansions are provided: the expansions as
//! stated in closed form ([`AsymptoticVariant::AsStated`]) and expansions
//! re-derived for the system assembled here
//! ([`AsymptoticVariant::Consistent`]), which differ in the normalization of
//! the logarithmic single layer, the doubled argument of the spectral
//! coefficients, the `−4P` block limit and the thickness factor of the TEM
//! shift.

use crate::kernel::SingleLayerGram;
use crate::modes::{certified_root, Family, Geometry, ModesError, Parity};
use crate::system::{
    corrected_coeffs, pi_0, pi_0_corrected, pi_m, pi_m_corrected, spectral_coeffs, Assembler, SystemError,
};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt::Write as _;
use thiserror::Error;

/// Errors raised while locating or certifying resonances.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResonanceError {
    /// System assembly or evaluation failed.
    #[error(transparent)]
    System(#[from] SystemError),
    /// Eigenpair construction failed.
    #[error(transparent)]
    Modes(#[from] ModesError),
    /// Newton's method did not reach the tolerance.
    #[error("Newton iteration did not converge after {iterations} steps (|Λ| = {residual:e})")]
    NoConvergence {
        /// Iterations performed.
        iterations: usize,
        /// Final residual.
        residual: f64,
    },
    /// The contour passes (numerically) through a zero of `Λ`.
    #[error("characteristic function nearly vanishes on the contour (min |Λ| = {min_abs:e})")]
    BoundaryZero {
        /// Smallest sampled `|Λ|` on the contour.
        min_abs: f64,
    },
    /// The winding count around a refined root is not one.
    #[error("certification failed: winding count {count}")]
    CertificationFailure {
        /// The count obtained.
        count: i64,
    },
}

/// Kind of resonance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    /// TE Fabry–Pérot resonance near `k_{m,order}`.
    TeFabryPerot {
        /// Angular momentum (`≠ 0`).
        m: i32,
        /// Formula index `m′` (`order = 2m′` even, `2m′ + 1` odd).
        mprime: u32,
    },
    /// Even-parity TE resonance near `k = |m|`.
    TeNearM {
        /// Angular momentum (`≠ 0`).
        m: i32,
    },
    /// TEM Fabry–Pérot resonance (`m = 0`).
    Tem {
        /// Formula index `m′`.
        mprime: u32,
    },
}

impl Classification {
    /// Short label used in tables.
    pub fn label(&self) -> &'static str {
        match self {
            Classification::TeFabryPerot { .. } => "TE_FabryPerot",
            Classification::TeNearM { .. } => "TE_near_m",
            Classification::Tem { .. } => "TEM",
        }
    }

    /// Angular momentum.
    pub fn m(&self) -> i32 {
        match *self {
            Classification::TeFabryPerot { m, .. } | Classification::TeNearM { m } => m,
            Classification::Tem { .. } => 0,
        }
    }

    /// Formula index `m′` (`0` for the near-`|m|` resonance).
    pub fn mprime(&self) -> u32 {
        match *self {
            Classification::TeFabryPerot { mprime, .. } | Classification::Tem { mprime } => mprime,
            Classification::TeNearM { .. } => 0,
        }
    }
}

/// How a resonance value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Closed-form expansion as stated.
    AsymptoticStated,
    /// Closed-form expansion consistent with the assembled system.
    AsymptoticConsistent,
    /// Newton-refined root of `Λ`.
    Refined,
}

impl Method {
    /// Label used in tables.
    pub fn label(&self) -> &'static str {
        match self {
            Method::AsymptoticStated => "asymptotic_stated",
            Method::AsymptoticConsistent => "asymptotic_consistent",
            Method::Refined => "refined",
        }
    }
}

/// Which closed-form expansion to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AsymptoticVariant {
    /// Expansions as stated in closed form.
    AsStated,
    /// Expansions re-derived for the assembled system.
    Consistent,
}

/// A resonance with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceResult {
    /// Complex resonance (physical units).
    pub k: Complex64,
    /// Kind of resonance.
    pub classification: Classification,
    /// Parity.
    pub parity: Parity,
    /// How the value was obtained.
    pub method: Method,
    /// `|Λ(k)|`, or NaN when not evaluated.
    pub residual: f64,
    /// True when the argument-principle count around the root is one.
    pub certified: bool,
    /// Relative gap width.
    pub h: f64,
    /// Slab thickness.
    pub l: f64,
}

/// Longitudinal order `n = 2m′` (even) or `2m′ + 1` (odd).
pub fn longitudinal_order(parity: Parity, mprime: u32) -> u32 {
    match parity {
        Parity::Even => 2 * mprime,
        Parity::Odd => 2 * mprime + 1,
    }
}

/// Leading-order Fabry–Pérot frequency `k_{m,n} = √(m² + n²π²/l²)`.
pub fn fabry_perot(m: i32, order: u32, l: f64) -> f64 {
    ((m * m) as f64 + (order as f64 * PI / l).powi(2)).sqrt()
}

/// Closed-form expansion of one resonance (unit-radius units).
fn expansion(class: Classification, parity: Parity, h: f64, l: f64, gram: &SingleLayerGram, variant: AsymptoticVariant) -> Complex64 {
    let i = Complex64::i();
    match class {
        Classification::TeNearM { m } => {
            let mf = m.unsigned_abs() as f64;
            let km = Complex64::new(mf, 0.0);
            match variant {
                AsymptoticVariant::AsStated => {
                    let sc = spectral_coeffs(m, km);
                    km - mf * h / 2.0
                        - (mf * h / l) * ((sc.alpha_tilde - sc.alpha) + i * (sc.beta_tilde - sc.beta))
                }
                AsymptoticVariant::Consistent => {
                    let (a, b) = corrected_coeffs(m, km);
                    let (ap, bp) = corrected_coeffs(m + 1, km);
                    let (am, bm) = corrected_coeffs(m - 1, km);
                    let (at, bt) = (0.5 * (ap + am), 0.5 * (bp + bm));
                    km - mf * h / 2.0 - (4.0 * mf * h / l) * ((at - a) + i * (bt - b))
                }
            }
        }
        Classification::TeFabryPerot { m, mprime } => {
            let k0 = Complex64::new(fabry_perot(m, longitudinal_order(parity, mprime), l), 0.0);
            let pi = match variant {
                AsymptoticVariant::AsStated => pi_m(m, k0, h, gram).value,
                AsymptoticVariant::Consistent => pi_m_corrected(m, k0, h, gram).value,
            };
            k0 - (m * m) as f64 * h / (2.0 * k0) - 2.0 * pi / (k0 * l)
        }
        Classification::Tem { mprime } => {
            let k0 = Complex64::new(fabry_perot(0, longitudinal_order(parity, mprime), l), 0.0);
            match variant {
                AsymptoticVariant::AsStated => k0 - 2.0 * k0 * pi_0(k0, h, gram).value,
                AsymptoticVariant::Consistent => k0 - 8.0 * k0 / l * pi_0_corrected(k0, h, gram).value,
            }
        }
    }
}

/// Closed-form resonance of a given classification (physical units).
pub fn asymptotic_resonance(
    class: Classification,
    parity: Parity,
    geom: &Geometry,
    gram: &SingleLayerGram,
    variant: AsymptoticVariant,
) -> ResonanceResult {
    let unit = geom.normalized();
    let k = expansion(class, parity, unit.h, unit.l, gram, variant) / geom.a;
    ResonanceResult {
        k,
        classification: class,
        parity,
        method: match variant {
            AsymptoticVariant::AsStated => Method::AsymptoticStated,
            AsymptoticVariant::Consistent => Method::AsymptoticConsistent,
        },
        residual: f64::NAN,
        certified: false,
        h: geom.h,
        l: geom.l,
    }
}

/// All closed-form resonances of momentum `m` and the given parity with
/// leading-order frequency at most `k_max`, using the expansions as stated.
pub fn asymptotic_resonances(m: i32, parity: Parity, geom: &Geometry, k_max: f64, gram: &SingleLayerGram) -> Vec<ResonanceResult> {
    asymptotic_resonances_variant(m, parity, geom, k_max, gram, AsymptoticVariant::AsStated)
}

/// [`asymptotic_resonances`] with a choice of expansion.
pub fn asymptotic_resonances_variant(
    m: i32,
    parity: Parity,
    geom: &Geometry,
    k_max: f64,
    gram: &SingleLayerGram,
    variant: AsymptoticVariant,
) -> Vec<ResonanceResult> {
    let unit = geom.normalized();
    let kmax_unit = k_max * geom.a;
    let mut out = Vec::new();
    if m != 0 && parity == Parity::Even && (m.unsigned_abs() as f64) <= kmax_unit {
        out.push(asymptotic_resonance(Classification::TeNearM { m }, parity, geom, gram, variant));
    }
    let first = if parity == Parity::Even { 1 } else { 0 };
    let mut mprime = first;
    while fabry_perot(m, longitudinal_order(parity, mprime), unit.l) <= kmax_unit {
        let class = if m == 0 { Classification::Tem { mprime } } else { Classification::TeFabryPerot { m, mprime } };
        out.push(asymptotic_resonance(class, parity, geom, gram, variant));
        mprime += 1;
    }
    out
}

/// A closed contour in the complex `k` plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Contour {
    /// Axis-aligned rectangle.
    Rectangle {
        /// Center.
        center: Complex64,
        /// Half extent along the real axis.
        half_width: f64,
        /// Half extent along the imaginary axis.
        half_height: f64,
    },
    /// Circle.
    Circle {
        /// Center.
        center: Complex64,
        /// Radius.
        radius: f64,
    },
}

impl Contour {
    /// Square of half-width `half` around `center`.
    pub fn square(center: Complex64, half: f64) -> Self {
        Contour::Rectangle { center, half_width: half, half_height: half }
    }

    /// Point at parameter `t ∈ [0, 1]`, traversed counter-clockwise.
    pub fn point(&self, t: f64) -> Complex64 {
        match *self {
            Contour::Circle { center, radius } => center + Complex64::from_polar(radius, 2.0 * PI * t),
            Contour::Rectangle { center, half_width: a, half_height: b } => {
                let corners = [
                    Complex64::new(-a, -b),
                    Complex64::new(a, -b),
                    Complex64::new(a, b),
                    Complex64::new(-a, b),
                    Complex64::new(-a, -b),
                ];
                let s = (t.clamp(0.0, 1.0) * 4.0).min(4.0 - 1e-15);
                let side = s.floor() as usize;
                let frac = s - side as f64;
                center + corners[side] + (corners[side + 1] - corners[side]) * frac
            }
        }
    }

    /// Parameters of the corners (where sampling must include a node).
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Contour::Circle { .. } => vec![0.0, 0.25, 0.5, 0.75, 1.0],
            Contour::Rectangle { .. } => vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

/// Winding number of `f` around the contour by adaptive sampling: each
/// segment is bisected until the phase change between consecutive samples
/// is below `π/4`. Fails with [`ResonanceError::BoundaryZero`] when
/// `min |f| ≤ 1e-8` on the samples.
pub fn winding_number<F>(mut f: F, contour: &Contour) -> Result<i64, ResonanceError>
where
    F: FnMut(Complex64) -> Result<Complex64, ResonanceError>,
{
    let base = contour.breakpoints();
    let mut params: Vec<f64> = Vec::new();
    for w in base.windows(2) {
        for j in 0..8 {
            params.push(w[0] + (w[1] - w[0]) * j as f64 / 8.0);
        }
    }
    params.push(1.0);
    let mut values = Vec::with_capacity(params.len());
    for &t in &params {
        values.push(f(contour.point(t))?);
    }
    let mut total = 0.0;
    let mut min_abs = f64::INFINITY;
    let mut stack: Vec<(f64, Complex64, f64, Complex64, u32)> = Vec::new();
    for idx in (0..params.len() - 1).rev() {
        stack.push((params[idx], values[idx], params[idx + 1], values[idx + 1], 0));
    }
    for v in &values {
        min_abs = min_abs.min(v.norm());
    }
    while let Some((ta, fa, tb, fb, depth)) = stack.pop() {
        let dphi = (fb / fa).arg();
        if dphi.abs() > PI / 4.0 && depth < 24 {
            let tm = 0.5 * (ta + tb);
            let fm = f(contour.point(tm))?;
            min_abs = min_abs.min(fm.norm());
            stack.push((tm, fm, tb, fb, depth + 1));
            stack.push((ta, fa, tm, fm, depth + 1));
        } else {
            total += dphi;
        }
        if min_abs <= 1e-8 {
            return Err(ResonanceError::BoundaryZero { min_abs });
        }
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

/// Number of zeros of `Λ_m` inside `contour` for one parity.
pub fn count_roots_with(asm: &Assembler, parity: Parity, contour: &Contour) -> Result<i64, ResonanceError> {
    winding_number(|k| Ok(asm.lambda(k, parity)?), contour)
}

/// Number of zeros of `Λ_m` inside `contour`, building the system from scratch.
pub fn count_roots(m: i32, parity: Parity, contour: &Contour, geom: &Geometry, order: usize) -> Result<i64, ResonanceError> {
    let asm = Assembler::with_defaults(m, geom, order)?;
    count_roots_with(&asm, parity, contour)
}

/// Damped Newton iteration on `Λ_m` from a seed, followed by certification
/// on a square of half-width `max(10|k − k_seed|, 1e-3)`.
pub fn refine_with(asm: &Assembler, seed: &ResonanceResult, tol: f64) -> Result<ResonanceResult, ResonanceError> {
    let parity = seed.parity;
    let f = |k: Complex64| -> Result<Complex64, ResonanceError> { Ok(asm.lambda(k, parity)?) };
    let mut k = seed.k;
    let mut fk = f(k)?;
    let mut iterations = 0;
    while fk.norm() >= tol {
        if iterations >= 50 {
            return Err(ResonanceError::NoConvergence { iterations, residual: fk.norm() });
        }
        iterations += 1;
        let dk = 1e-7 * k.norm();
        let deriv = (f(k + dk)? - f(k - dk)?) / (2.0 * dk);
        let step = fk / deriv;
        let mut damping = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial = k - step * damping;
            let ft = f(trial)?;
            if ft.norm() < fk.norm() {
                k = trial;
                fk = ft;
                accepted = true;
                break;
            }
            damping *= 0.5;
        }
        if !accepted {
            break;
        }
        if (step * damping).norm() < 1e-14 * k.norm() {
            break;
        }
    }
    if fk.norm() >= tol {
        return Err(ResonanceError::NoConvergence { iterations, residual: fk.norm() });
    }
    let half = (10.0 * (k - seed.k).norm()).max(1e-3);
    let count = count_roots_with(asm, parity, &Contour::square(k, half))?;
    Ok(ResonanceResult { k, method: Method::Refined, residual: fk.norm(), certified: count == 1, ..*seed })
}

/// Refines independent seeds concurrently on up to `threads` worker
/// threads; results keep the order of `seeds`.
pub fn refine_all(asm: &Assembler, seeds: &[ResonanceResult], tol: f64, threads: usize) -> Vec<Result<ResonanceResult, ResonanceError>> {
    let threads = threads.max(1).min(seeds.len().max(1));
    let chunk = seeds.len().div_ceil(threads).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|s| refine_with(asm, s, tol)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("refinement worker panicked")).collect()
    })
}

/// [`refine_with`] building the system for the seed's momentum.
pub fn refine(seed: &ResonanceResult, geom: &Geometry, order: usize, tol: f64) -> Result<ResonanceResult, ResonanceError> {
    let asm = Assembler::with_defaults(seed.classification.m(), geom, order)?;
    refine_with(&asm, seed, tol)
}

/// `√λ^N_{m0}`, the cutoff of the near-`|m|` TE mode (unit radius).
pub fn near_m_cutoff(m: i32, h: f64) -> Result<f64, ResonanceError> {
    Ok(certified_root(Family::N, m.unsigned_abs(), 0, h)?.beta)
}

/// CSV table with columns `m,parity,class,mprime,h,l,re_k,im_k,residual,certified,method`.
pub fn resonances_csv(rows: &[ResonanceResult]) -> String {
    let mut s = String::from("m,parity,class,mprime,h,l,re_k,im_k,residual,certified,method\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.classification.m(),
            match r.parity {
                Parity::Even => "even",
                Parity::Odd => "odd",
            },
            r.classification.label(),
            r.classification.mprime(),
            crate::csv_number(r.h),
            crate::csv_number(r.l),
            crate::csv_number(r.k.re),
            crate::csv_number(r.k.im),
            crate::csv_number(r.residual),
            r.certified,
            r.method.label()
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::singlelayer_gram;

    #[test]
    fn leading_order_tem_frequencies() {
        let gram = singlelayer_gram(16).unwrap();
        let geom = Geometry::new(0.01, 2.0);
        let list = asymptotic_resonances(0, Parity::Even, &geom, 10.0, &gram);
        assert_eq!(list.len(), 3);
        for (j, r) in list.iter().enumerate() {
            assert_eq!(fabry_perot(0, longitudinal_order(Parity::Even, j as u32 + 1), 2.0), (j + 1) as f64 * PI);
            assert!((r.k.re - (j + 1) as f64 * PI).abs() < 0.2);
        }
    }

    #[test]
    fn near_m_expansion_and_parity_exclusion() {
        let gram = singlelayer_gram(16).unwrap();
        let geom = Geometry::new(0.01, 2.0);
        let even = asymptotic_resonances(1, Parity::Even, &geom, 5.0, &gram);
        let near = even.iter().find(|r| matches!(r.classification, Classification::TeNearM { .. })).unwrap();
        let sc = spectral_coeffs(1, Complex64::new(1.0, 0.0));
        let h = 0.01;
        assert!((near.k.re - (1.0 - h / 2.0 - (h / 2.0) * (sc.alpha_tilde - sc.alpha).re)).abs() < 1e-14);
        assert!((near.k.im + (h / 2.0) * (sc.beta_tilde - sc.beta).re).abs() < 1e-14);
        let odd = asymptotic_resonances(1, Parity::Odd, &geom, 5.0, &gram);
        assert!(odd.iter().all(|r| !matches!(r.classification, Classification::TeNearM { .. })));
    }

    #[test]
    fn winding_counts_simple_functions() {
        let c = Contour::square(Complex64::new(0.0, 0.0), 1.0);
        let n = winding_number(|z| Ok(z * z * (z - 3.0)), &c).unwrap();
        assert_eq!(n, 2);
        let circle = Contour::Circle { center: Complex64::new(0.5, 0.0), radius: 0.2 };
        assert_eq!(winding_number(|z| Ok(z - 0.55), &circle).unwrap(), 1);
        assert_eq!(winding_number(|z| Ok(1.0 / (z - 0.55)), &circle).unwrap(), -1);
        assert!(matches!(
            winding_number(|z| Ok(z - Complex64::new(1.0, 0.0)), &c),
            Err(ResonanceError::BoundaryZero { .. })
        ));
    }

    #[test]
    fn tem_resonance_refines_and_certifies() {
        let gram = singlelayer_gram(16).unwrap();
        let geom = Geometry::new(0.01, 2.0);
        let asm = Assembler::with_defaults(0, &geom, 8).unwrap();
        let seed = asymptotic_resonance(Classification::Tem { mprime: 1 }, Parity::Even, &geom, &gram, AsymptoticVariant::Consistent);
        let refined = refine_with(&asm, &seed, 1e-10).unwrap();
        assert!(refined.certified);
        assert!(refined.k.im < 0.0);
        assert!((refined.k - seed.k).norm() < 0.01);
        // Fixed point: refining again moves k by less than the tolerance.
        let again = refine_with(&asm, &refined, 1e-10).unwrap();
        assert!((again.k - refined.k).norm() < 1e-9);
        // Additivity: two disjoint single-root squares add up.
        let seed2 = asymptotic_resonance(Classification::Tem { mprime: 2 }, Parity::Even, &geom, &gram, AsymptoticVariant::Consistent);
        let r2 = refine_with(&asm, &seed2, 1e-10).unwrap();
        let a = count_roots_with(&asm, Parity::Even, &Contour::square(refined.k, 0.05)).unwrap();
        let b = count_roots_with(&asm, Parity::Even, &Contour::square(r2.k, 0.05)).unwrap();
        assert_eq!(a + b, 2);
        // A resonance-free zone.
        let empty = count_roots_with(&asm, Parity::Even, &Contour::square(Complex64::new(1.5, -0.05), 0.3)).unwrap();
        assert_eq!(empty, 0);
    }

    #[test]
    fn concurrent_refinement_matches_sequential() {
        let gram = singlelayer_gram(16).unwrap();
        let geom = Geometry::new(0.02, 2.0);
        let asm = Assembler::new(1, &geom, 4, 24, 128).unwrap();
        let seeds = asymptotic_resonances_variant(1, Parity::Even, &geom, 5.0, &gram, AsymptoticVariant::Consistent);
        let par = refine_all(&asm, &seeds, 1e-10, 3);
        for (s, p) in seeds.iter().zip(&par) {
            let q = refine_with(&asm, s, 1e-10).unwrap();
            assert_eq!(p.as_ref().unwrap().k, q.k);
        }
    }

    #[test]
    fn asymptotic_residual_decays_like_h_squared() {
        // |Λ(k*_asymptotic)| should fall with an empirical order in [1.5, 2.5].
        let gram = singlelayer_gram(64).unwrap();
        let hs = [0.02, 0.01, 0.005];
        let class = Classification::TeFabryPerot { m: 1, mprime: 1 };
        let res: Vec<f64> = hs
            .iter()
            .map(|&h| {
                let geom = Geometry::new(h, 2.0);
                let asm = Assembler::with_defaults(1, &geom, 8).unwrap();
                let seed = asymptotic_resonance(class, Parity::Even, &geom, &gram, AsymptoticVariant::Consistent);
                asm.lambda(seed.k, Parity::Even).unwrap().norm()
            })
            .collect();
        let order = crate::validation::loglog_slope(&hs, &res);
        assert!((1.5..=2.5).contains(&order), "order {order}: {res:?}");
    }

    #[test]
    fn csv_header_and_rows() {
        let gram = singlelayer_gram(16).unwrap();
        let rows = asymptotic_resonances(0, Parity::Even, &Geometry::new(0.01, 2.0), 4.0, &gram);
        let csv = resonances_csv(&rows);
        assert!(csv.starts_with("m,parity,class,mprime,h,l,re_k,im_k,residual,certified,method\n"));
        assert_eq!(csv.lines().count(), 2);
    }
}
