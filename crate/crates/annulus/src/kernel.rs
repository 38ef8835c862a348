//! The angular-averaged Helmholtz kernel of the annular aperture, the flat
//! logarithmic single-layer Gram data on the unit interval, and the scalar
//! single-layer pairings that every matrix element of the mode-matching
//! system is built from.
//!
//! The kernel
//! `F_μ(r, r′) = (1/2π)∫₀^{2π} e^{ik d}/d · e^{iμθ} dθ`,
//! `d² = r² + r′² − 2rr′cos θ`, is split as `F_μ = T_μ + X_μ` with the static
//! part `T_μ = Q_{μ−1/2}(w)/(π√(rr′))`, `w = (r² + r′²)/(2rr′)`, evaluated from
//! toroidal Legendre functions, and the smooth dynamic part
//! `X_μ = (1/π)∫₀^π (e^{ik d} − 1)/d · cos(μθ) dθ` evaluated by graded
//! Gauss panels. The static part carries the logarithmic singularity
//! `F_μ ≈ −log|r − r′|/(π√(rr′))`, which is integrated exactly with
//! product-integration weights.
//!
//! All pairings are the full operator pairings of the single layer with
//! kernel `e^{ik|x−y|}/(4π|x−y|)` over the aperture, restricted to momentum
//! `μ` scalars: `P_μ(f, g) = ⟨S_k[f e^{iμθ}], g e^{−iμθ}⟩ = π∬F_μ f g r r′ dr dr′`.

use crate::quad::{gauss_legendre, gauss_legendre_on, log_product_matrix};
use crate::specfun::{digamma, toroidal_q, EULER_GAMMA};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};
use thiserror::Error;

/// Default number of radial Gauss nodes for product quadratures.
pub const DEFAULT_QUAD_RADIAL: usize = 32;
/// Default number of angular nodes for the dynamic kernel part.
pub const DEFAULT_QUAD_ANGULAR: usize = 256;
/// Gauss nodes per graded angular panel.
const PANEL_NODES: usize = 16;

/// Errors raised by kernel evaluation and Gram construction.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    /// The kernel was evaluated on the diagonal, where it is singular.
    #[error("kernel evaluated at coincident radii r = {r}, r' = {rp}")]
    Coincidence {
        /// First radius.
        r: f64,
        /// Second radius.
        rp: f64,
    },
    /// Argument outside the supported domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// A linear solve failed.
    #[error("linear solve failed: {0}")]
    Solver(String),
}

/// Value of `F_μ(r, r′)` with the weight of its logarithmic singularity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    /// `F_μ(r, r′)`.
    pub value: Complex64,
    /// `c` such that `F_μ − c·log|r − r′|` stays bounded as `r′ → r`;
    /// equals `−1/(π√(rr′))`.
    pub log_coefficient: f64,
}

/// Graded Gauss rule on `[0, π]` refined geometrically toward `θ = 0`,
/// where the distance `d` becomes small for nearby radii.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularRule {
    /// Nodes.
    pub theta: Vec<f64>,
    /// Weights.
    pub weight: Vec<f64>,
}

impl AngularRule {
    /// Builds a rule with `n` nodes (`n` a multiple of 16, at least 32):
    /// panels `[π/2^{j+1}, π/2^j]` plus a final panel touching zero.
    pub fn graded(n: usize) -> Result<Self, KernelError> {
        if n < 2 * PANEL_NODES || n % PANEL_NODES != 0 {
            return Err(KernelError::Domain(format!(
                "angular node count must be a multiple of {PANEL_NODES} and at least {}, got {n}",
                2 * PANEL_NODES
            )));
        }
        let panels = n / PANEL_NODES;
        let (x, w) = gauss_legendre(PANEL_NODES);
        let mut theta = Vec::with_capacity(n);
        let mut weight = Vec::with_capacity(n);
        for j in 0..panels {
            let hi = PI / 2f64.powi(j as i32);
            let lo = if j + 1 == panels { 0.0 } else { hi / 2.0 };
            let (mid, half) = (0.5 * (hi + lo), 0.5 * (hi - lo));
            for (xi, wi) in x.iter().zip(&w) {
                theta.push(mid + half * xi);
                weight.push(half * wi);
            }
        }
        Ok(AngularRule { theta, weight })
    }
}

/// `e^{ix} − 1` without cancellation for small `|x|`.
fn exp_i_minus_one(x: Complex64) -> Complex64 {
    let i = Complex64::i();
    2.0 * i * (0.5 * x).sin() * (0.5 * i * x).exp()
}

/// Dynamic parts `X_μ(r, r′)` for several orders at once.
fn dynamic_parts(mus: &[u32], k: Complex64, r: f64, rp: f64, rule: &AngularRule, cos_table: &[Vec<f64>]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); mus.len()];
    if k == Complex64::new(0.0, 0.0) {
        return out;
    }
    let dr2 = (r - rp) * (r - rp);
    let rr4 = 4.0 * r * rp;
    for (a, (th, w)) in rule.theta.iter().zip(&rule.weight).enumerate() {
        let s = (0.5 * th).sin();
        let d = (dr2 + rr4 * s * s).sqrt();
        let v = if d == 0.0 { Complex64::i() * k } else { exp_i_minus_one(k * d) / d } * *w;
        for (slot, table) in out.iter_mut().zip(cos_table) {
            *slot += v * table[a];
        }
    }
    for v in &mut out {
        *v /= PI;
    }
    out
}

fn cos_tables(mus: &[u32], rule: &AngularRule) -> Vec<Vec<f64>> {
    mus.iter().map(|&mu| rule.theta.iter().map(|t| (mu as f64 * t).cos()).collect()).collect()
}

/// Static part `T_μ(r, r′) = Q_{μ−1/2}(w)/(π√(rr′))` for `μ = 0..=mu_max`.
fn static_parts(mu_max: u32, r: f64, rp: f64) -> Vec<f64> {
    let wm1 = (r - rp) * (r - rp) / (2.0 * r * rp);
    let scale = 1.0 / (PI * (r * rp).sqrt());
    toroidal_q(mu_max as usize, wm1).into_iter().map(|q| q * scale).collect()
}

/// Bounded remainder of the static part on the diagonal:
/// `lim_{r′→r} [T_μ + log|r − r′|/(π√(rr′))] = [log(2r) − γ − ψ(μ+½)]/(πr)`.
fn static_diagonal(mu: u32, r: f64) -> f64 {
    let psi = digamma(mu as f64 + 0.5).expect("positive digamma argument");
    ((2.0 * r).ln() - EULER_GAMMA - psi) / (PI * r)
}

/// Evaluates `F_m(r, r′)` (`F_{−m} = F_m`) with the default angular rule.
pub fn f_kernel(m: i32, k: Complex64, r: f64, rp: f64) -> Result<KernelValue, KernelError> {
    f_kernel_with(m, k, r, rp, &AngularRule::graded(DEFAULT_QUAD_ANGULAR)?)
}

/// Evaluates `F_m(r, r′)` with a caller-supplied angular rule.
pub fn f_kernel_with(m: i32, k: Complex64, r: f64, rp: f64, rule: &AngularRule) -> Result<KernelValue, KernelError> {
    if !(r > 0.0 && rp > 0.0) {
        return Err(KernelError::Domain(format!("radii must be positive, got {r}, {rp}")));
    }
    if (r - rp).abs() < 1e-14 {
        return Err(KernelError::Coincidence { r, rp });
    }
    let mu = m.unsigned_abs();
    let t = static_parts(mu, r, rp)[mu as usize];
    let x = dynamic_parts(&[mu], k, r, rp, rule, &cos_tables(&[mu], rule))[0];
    Ok(KernelValue { value: x + t, log_coefficient: -1.0 / (PI * (r * rp).sqrt()) })
}

/// Tensor radial grid on `[1, 1+h]` carrying the product-integration data
/// for the pairings `P_μ(f, g) = fᵀ K^μ g`, where `f`, `g` are nodal values.
///
/// Static kernel matrices are cached per order; the grid is safe to share
/// between threads.
#[derive(Debug)]
pub struct RadialGrid {
    /// Relative gap width.
    pub h: f64,
    /// Radial nodes `r_i = 1 + hρ_i`.
    pub r: Vec<f64>,
    /// Gauss weights on `[0, 1]`.
    pub omega: Vec<f64>,
    log_weights: Vec<Vec<f64>>,
    rule: AngularRule,
    cache: Mutex<HashMap<u32, Arc<DMatrix<f64>>>>,
}

impl RadialGrid {
    /// Builds a grid with `n_radial` Gauss nodes and `n_angular` angular nodes.
    pub fn new(h: f64, n_radial: usize, n_angular: usize) -> Result<Self, KernelError> {
        if !(h > 0.0 && h <= 0.2) {
            return Err(KernelError::Domain(format!("gap ratio h must lie in (0, 0.2], got {h}")));
        }
        if n_radial < 4 {
            return Err(KernelError::Domain(format!("need at least 4 radial nodes, got {n_radial}")));
        }
        let (rho, omega) = gauss_legendre_on(n_radial, 0.0, 1.0);
        Ok(RadialGrid {
            h,
            r: rho.iter().map(|x| 1.0 + h * x).collect(),
            omega,
            log_weights: log_product_matrix(n_radial),
            rule: AngularRule::graded(n_angular)?,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Grid with the default quadrature orders.
    pub fn with_defaults(h: f64) -> Result<Self, KernelError> {
        Self::new(h, DEFAULT_QUAD_RADIAL, DEFAULT_QUAD_ANGULAR)
    }

    /// Number of radial nodes.
    pub fn len(&self) -> usize {
        self.r.len()
    }

    /// Always false: a grid has at least four nodes.
    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Nodal values of a radial function.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.r.iter().map(|&r| f(r)))
    }

    /// Static (`k`-independent) kernel matrix of order `μ`.
    pub fn static_matrix(&self, mu: u32) -> Arc<DMatrix<f64>> {
        if let Some(m) = self.cache.lock().expect("cache lock").get(&mu) {
            return Arc::clone(m);
        }
        let n = self.len();
        let h = self.h;
        let log_h = h.ln();
        let mut k = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let (ri, rj) = (self.r[i], self.r[j]);
                let wij = self.omega[i] * self.omega[j];
                // −(1/π)∬log|r − r′| u v with r − r′ = h(ρ − ρ′).
                let singular = -(h * h / PI) * (log_h * wij + self.log_weights[i][j]) * (ri * rj).sqrt();
                let remainder = if i == j {
                    static_diagonal(mu, ri)
                } else {
                    static_parts(mu, ri, rj)[mu as usize] + (ri - rj).abs().ln() / (PI * (ri * rj).sqrt())
                };
                let v = PI * (singular + h * h * wij * ri * rj * remainder);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        let k = Arc::new(k);
        self.cache.lock().expect("cache lock").insert(mu, Arc::clone(&k));
        k
    }

    /// Full kernel matrices `K^μ(k)` for each requested order.
    pub fn kernel_matrices(&self, mus: &[u32], k: Complex64) -> Vec<DMatrix<Complex64>> {
        let n = self.len();
        let mut out: Vec<DMatrix<Complex64>> =
            mus.iter().map(|&mu| self.static_matrix(mu).map(|v| Complex64::new(v, 0.0))).collect();
        if k == Complex64::new(0.0, 0.0) {
            return out;
        }
        let table = cos_tables(mus, &self.rule);
        let h2 = self.h * self.h;
        for i in 0..n {
            for j in 0..=i {
                let (ri, rj) = (self.r[i], self.r[j]);
                let x = dynamic_parts(mus, k, ri, rj, &self.rule, &table);
                let scale = PI * h2 * self.omega[i] * self.omega[j] * ri * rj;
                for (mat, xv) in out.iter_mut().zip(&x) {
                    mat[(i, j)] += xv * scale;
                    if i != j {
                        mat[(j, i)] += xv * scale;
                    }
                }
            }
        }
        out
    }

    /// Kernel matrix of a single order.
    pub fn kernel_matrix(&self, mu: u32, k: Complex64) -> DMatrix<Complex64> {
        self.kernel_matrices(&[mu], k).pop().expect("one matrix")
    }
}

/// Bilinear form `fᵀ K g` on nodal values.
pub fn pair(kmat: &DMatrix<Complex64>, f: &DVector<f64>, g: &DVector<f64>) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for j in 0..kmat.ncols() {
        if g[j] == 0.0 {
            continue;
        }
        let mut col = Complex64::new(0.0, 0.0);
        for i in 0..kmat.nrows() {
            col += kmat[(i, j)] * f[i];
        }
        s += col * g[j];
    }
    s
}

/// Radial parts `(f′ − m f/r, f′ + m f/r)` of `(∂₁ + i∂₂)` and `(∂₁ − i∂₂)`
/// applied to `f(r)e^{imθ}`; they carry momenta `m+1` and `m−1`.
pub fn ladder_parts(grid: &RadialGrid, m: i32, f: &dyn Fn(f64) -> (f64, f64)) -> (DVector<f64>, DVector<f64>) {
    let mf = m as f64;
    let plus = grid.sample(|r| {
        let (v, d) = f(r);
        d - mf * v / r
    });
    let minus = grid.sample(|r| {
        let (v, d) = f(r);
        d + mf * v / r
    });
    (plus, minus)
}

/// `⟨S_k[f e^{imθ}], g e^{−imθ}⟩ = π∬F_m(r, r′) f(r) g(r′) r r′ dr dr′` on
/// `[1, 1+h]²`, with the logarithmic singularity integrated exactly.
pub fn pairing_scalar(m: i32, k: Complex64, f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64, h: f64) -> Result<Complex64, KernelError> {
    let grid = RadialGrid::with_defaults(h)?;
    Ok(pair(&grid.kernel_matrix(m.unsigned_abs(), k), &grid.sample(f), &grid.sample(g)))
}

/// `⟨S_k ∇(f e^{imθ}), ∇(g e^{−imθ})⟩` through the ladder decomposition
/// `½[P_{m+1}(f′ − mf/r, g′ − mg/r) + P_{m−1}(f′ + mf/r, g′ + mg/r)]`.
/// The profiles return `(value, derivative)`.
pub fn pairing_gradient(
    m: i32,
    k: Complex64,
    f: &dyn Fn(f64) -> (f64, f64),
    g: &dyn Fn(f64) -> (f64, f64),
    h: f64,
) -> Result<Complex64, KernelError> {
    let grid = RadialGrid::with_defaults(h)?;
    Ok(pairing_gradient_on(&grid, m, k, f, g))
}

/// [`pairing_gradient`] on an existing grid.
pub fn pairing_gradient_on(
    grid: &RadialGrid,
    m: i32,
    k: Complex64,
    f: &dyn Fn(f64) -> (f64, f64),
    g: &dyn Fn(f64) -> (f64, f64),
) -> Complex64 {
    let (fp, fm) = ladder_parts(grid, m, f);
    let (gp, gm) = ladder_parts(grid, m, g);
    let mats = grid.kernel_matrices(&[(m + 1).unsigned_abs(), (m - 1).unsigned_abs()], k);
    0.5 * (pair(&mats[0], &fp, &gp) + pair(&mats[1], &fm, &gm))
}

/// Gram data of the flat logarithmic single layer
/// `S₀[φ](x) = −(1/π)∫₀¹ log|x − y| φ(y) dy` in the basis
/// `φ₀ = 1`, `φ_n = cos(nπx)/√2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleLayerGram {
    /// Truncation order.
    pub order: usize,
    /// `P[n′−1][n−1] = (S₀[(n′π)^{1/2}φ_{n′}], (nπ)^{1/2}φ_n)`, `n, n′ = 1..N`.
    pub p_matrix: DMatrix<f64>,
    /// `p[n′−1] = (S₀[(n′π)^{1/2}φ_{n′}], φ₀)`.
    pub p: DVector<f64>,
    /// `pᵀ(I + 2P)⁻¹p`.
    pub kappa: f64,
    /// `4pᵀ(I + 4P)⁻¹p`, the constant that governs the resonance shifts
    /// when the off-resonant blocks converge to `−4P`.
    pub kappa4: f64,
}

/// Closed-form limit `1/(2π²) − log(π/2)/π²` of [`SingleLayerGram::kappa`].
pub fn kappa_limit() -> f64 {
    1.0 / (2.0 * PI * PI) - (PI / 2.0).ln() / (PI * PI)
}

/// Builds the Gram data for truncation order `n ≤ 256` by exact product
/// integration of the logarithm against a Gauss grid resolving `cos(Nπx)`.
pub fn singlelayer_gram(n: usize) -> Result<SingleLayerGram, KernelError> {
    if n == 0 || n > 256 {
        return Err(KernelError::Domain(format!("Gram order must be in 1..=256, got {n}")));
    }
    let nq = (PI * n as f64 / 2.0).ceil() as usize + 48;
    let (x, _) = gauss_legendre_on(nq, 0.0, 1.0);
    let w = log_product_matrix(nq);
    let basis: Vec<Vec<f64>> = (0..=n)
        .map(|b| {
            let scale = if b == 0 { 1.0 } else { (b as f64 * PI).sqrt() / 2f64.sqrt() };
            x.iter().map(|t| if b == 0 { 1.0 } else { scale * (b as f64 * PI * t).cos() }).collect()
        })
        .collect();
    // Wb[b][i] = Σ_j W[i][j] basis[b][j]
    let wb: Vec<Vec<f64>> = basis
        .iter()
        .map(|v| (0..nq).map(|i| w[i].iter().zip(v).map(|(a, b)| a * b).sum()).collect())
        .collect();
    let gram = |a: usize, b: usize| -> f64 { -basis[a].iter().zip(&wb[b]).map(|(u, v)| u * v).sum::<f64>() / PI };
    let mut pm = DMatrix::<f64>::zeros(n, n);
    for a in 1..=n {
        for b in 1..=a {
            let v = gram(a, b);
            pm[(a - 1, b - 1)] = v;
            pm[(b - 1, a - 1)] = v;
        }
    }
    let p = DVector::from_iterator(n, (1..=n).map(|a| gram(a, 0)));
    let solve = |factor: f64| -> Result<f64, KernelError> {
        let m = DMatrix::<f64>::identity(n, n) + &pm * factor;
        let chol = m.cholesky().ok_or_else(|| KernelError::Solver("I + cP is not positive definite".into()))?;
        Ok(p.dot(&chol.solve(&p)))
    };
    let kappa = solve(2.0)?;
    let kappa4 = 4.0 * solve(4.0)?;
    Ok(SingleLayerGram { order: n, p_matrix: pm, p, kappa, kappa4 })
}

/// CSV export of the Gram data with header `n',n,value`: all `P` entries
/// (`n, n′ ≥ 1`, row-major) followed by the `p` entries (`n = 0`).
pub fn gram_csv(gram: &SingleLayerGram) -> String {
    let mut s = String::from("n',n,value\n");
    for a in 0..gram.order {
        for b in 0..gram.order {
            let _ = writeln!(s, "{},{},{}", a + 1, b + 1, crate::csv_number(gram.p_matrix[(a, b)]));
        }
    }
    for a in 0..gram.order {
        let _ = writeln!(s, "{},0,{}", a + 1, crate::csv_number(gram.p[a]));
    }
    s
}

/// Parses Gram data written by [`gram_csv`] and recomputes `κ`.
pub fn gram_from_csv(text: &str) -> Result<SingleLayerGram, KernelError> {
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        let parse_err = || KernelError::Domain(format!("malformed Gram CSV line {}", lineno + 1));
        if parts.len() != 3 {
            return Err(parse_err());
        }
        let a: usize = parts[0].trim().parse().map_err(|_| parse_err())?;
        let b: usize = parts[1].trim().parse().map_err(|_| parse_err())?;
        let v: f64 = parts[2].trim().parse().map_err(|_| parse_err())?;
        entries.push((a, b, v));
    }
    let n = entries.iter().map(|e| e.0).max().unwrap_or(0);
    if n == 0 {
        return Err(KernelError::Domain("empty Gram CSV".into()));
    }
    let mut pm = DMatrix::<f64>::zeros(n, n);
    let mut p = DVector::<f64>::zeros(n);
    for (a, b, v) in entries {
        if a == 0 || a > n || b > n {
            return Err(KernelError::Domain(format!("Gram index ({a}, {b}) out of range")));
        }
        if b == 0 {
            p[a - 1] = v;
        } else {
            pm[(a - 1, b - 1)] = v;
        }
    }
    let solve = |factor: f64| -> Result<f64, KernelError> {
        let m = DMatrix::<f64>::identity(n, n) + &pm * factor;
        let chol = m.cholesky().ok_or_else(|| KernelError::Solver("I + cP is not positive definite".into()))?;
        Ok(p.dot(&chol.solve(&p)))
    };
    Ok(SingleLayerGram { order: n, kappa: solve(2.0)?, kappa4: 4.0 * solve(4.0)?, p_matrix: pm, p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive_gk_real;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn kernel_is_symmetric_and_even_in_momentum() {
        for &(m, r, rp) in &[(0, 1.001, 1.007), (2, 1.0003, 1.0095), (5, 1.004, 1.0041)] {
            let k = c(2.3, -0.05);
            let a = f_kernel(m, k, r, rp).unwrap().value;
            let b = f_kernel(m, k, rp, r).unwrap().value;
            let neg = f_kernel(-m, k, r, rp).unwrap().value;
            assert!((a - b).norm() < 1e-11 * a.norm(), "{a} {b}");
            assert!((a - neg).norm() < 1e-11 * a.norm());
        }
    }

    #[test]
    fn static_kernel_matches_trapezoid_oracle() {
        // m = 0, k = 0: (1/2π)∫ dθ/d by a 10⁴-node periodic trapezoid rule
        // (spectrally accurate for the analytic periodic integrand when r ≠ r′).
        for &(r, rp) in &[(1.0, 1.05), (1.02, 1.1), (1.0, 1.2)] {
            let n = 10_000;
            let mut s = 0.0;
            for j in 0..n {
                let th = 2.0 * PI * j as f64 / n as f64;
                s += 1.0 / (r * r + rp * rp - 2.0 * r * rp * th.cos()).sqrt();
            }
            let oracle = s / n as f64;
            let v = f_kernel(0, c(0.0, 0.0), r, rp).unwrap().value;
            assert!((v.re - oracle).abs() < 1e-9 * oracle, "{} {oracle}", v.re);
            assert_eq!(v.im, 0.0);
        }
    }

    #[test]
    fn dynamic_kernel_matches_adaptive_angular_integral() {
        let (r, rp, k) = (1.003, 1.008, c(2.7, -0.1));
        for m in [0, 1, 3] {
            let v = f_kernel(m, k, r, rp).unwrap().value;
            let oracle = crate::quad::adaptive_gk(
                |th| {
                    let d = (r * r + rp * rp - 2.0 * r * rp * th.cos()).sqrt();
                    (Complex64::i() * k * d).exp() / d * (m as f64 * th).cos() / PI
                },
                0.0,
                PI,
                1e-12,
            );
            assert!((v - oracle).norm() < 1e-9 * oracle.norm(), "{m}: {v} {oracle}");
        }
    }

    #[test]
    fn coincident_radii_are_rejected() {
        assert!(matches!(f_kernel(0, c(1.0, 0.0), 1.0, 1.0), Err(KernelError::Coincidence { .. })));
    }

    #[test]
    fn regular_part_stays_bounded_near_diagonal() {
        let (h, r, k, m) = (0.01, 1.005, c(2.0, 0.0), 2);
        let mut vals = Vec::new();
        for e in [1e-3, 1e-5, 1e-7, 1e-9] {
            let kv = f_kernel(m, k, r, r + e * h).unwrap();
            vals.push((kv.value.re - kv.log_coefficient * (h * e).ln(), kv.value.im));
        }
        let rule = AngularRule::graded(DEFAULT_QUAD_ANGULAR).unwrap();
        let dynamic = dynamic_parts(&[m as u32], k, r, r, &rule, &cos_tables(&[m as u32], &rule))[0];
        let limit = static_diagonal(m as u32, r) + dynamic.re;
        for (re, _) in &vals[1..] {
            assert!((re - limit).abs() < 1e-4 * limit.abs(), "{re} {limit}");
        }
        let spread = vals.iter().map(|v| v.0).fold(f64::MIN, f64::max) - vals.iter().map(|v| v.0).fold(f64::MAX, f64::min);
        assert!(spread < 0.5 * limit.abs());
    }

    #[test]
    fn gram_is_symmetric_positive_definite() {
        let g = singlelayer_gram(32).unwrap();
        assert!((&g.p_matrix - g.p_matrix.transpose()).amax() == 0.0);
        let eig = g.p_matrix.clone().symmetric_eigen();
        assert!(eig.eigenvalues.min() > 0.0);
    }

    #[test]
    fn kappa_converges_to_closed_form() {
        let target = kappa_limit();
        assert!((target - 0.004_905_697_608_832).abs() < 1e-12);
        let ks: Vec<f64> = [8, 16, 32, 64, 128].iter().map(|&n| singlelayer_gram(n).unwrap().kappa).collect();
        assert!((ks[3] - target).abs() < 1e-3);
        for w in ks.windows(2) {
            assert!(w[1] >= w[0] - 1e-15, "{ks:?}");
        }
        let diffs: Vec<f64> = ks.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        for d in diffs.windows(2) {
            assert!(d[1] < d[0], "{diffs:?}");
        }
    }

    #[test]
    fn gram_csv_round_trip() {
        let g = singlelayer_gram(6).unwrap();
        let text = gram_csv(&g);
        assert!(text.starts_with("n',n,value\n"));
        let back = gram_from_csv(&text).unwrap();
        assert!((back.kappa - g.kappa).abs() < 1e-15);
    }

    #[test]
    fn scalar_pairing_log_term_dominates_constant_profile() {
        // For the normalized constant profile the pairing equals
        // 2[−h log h/(4π) + 𝔞_m h + i𝔟_m h] + O(h² log h) with the
        // doubled-argument spectral coefficients.
        let h = 0.01;
        for (m, k) in [(0, 1.0), (2, 2.3)] {
            let c0 = 1.0 / (PI * h * (2.0 + h)).sqrt();
            let v = pairing_scalar(m, c(k, 0.0), &|_| c0, &|_| c0, h).unwrap();
            let sc = crate::system::corrected_coeffs(m, c(k, 0.0));
            let approx = 2.0 * (Complex64::new(-h * h.ln() / (4.0 * PI), 0.0) + sc.0 * h + Complex64::i() * sc.1 * h);
            assert!((v - approx).norm() < 0.1 * approx.norm(), "{m}: {v} {approx}");
        }
    }

    #[test]
    fn gradient_pairing_of_constant_profile() {
        let h = 0.01;
        let c0 = 1.0 / (PI * h * (2.0 + h)).sqrt();
        let zero = pairing_gradient(0, c(1.5, 0.0), &|_| (c0, 0.0), &|_| (c0, 0.0), h).unwrap();
        assert_eq!(zero, Complex64::new(0.0, 0.0));
        for (m, k) in [(1, 1.0), (2, 2.3)] {
            let v = pairing_gradient(m, c(k, 0.0), &|_| (c0, 0.0), &|_| (c0, 0.0), h).unwrap();
            let (ap, bp) = crate::system::corrected_coeffs(m + 1, c(k, 0.0));
            let (am, bm) = crate::system::corrected_coeffs(m - 1, c(k, 0.0));
            let (at, bt) = (0.5 * (ap + am), 0.5 * (bp + bm));
            let mf = (m * m) as f64;
            let approx = 2.0 * mf * (Complex64::new(-h * h.ln() / (4.0 * PI), 0.0) + at * h + Complex64::i() * bt * h);
            assert!((v - approx).norm() < 0.15 * approx.norm(), "{m}: {v} {approx}");
        }
    }

    #[test]
    fn tem_gradient_pairing_matches_direct_quadrature() {
        // ∇log r = r̂/r, so ⟨S∇log r, ∇log r⟩ = π∬F₁(r, r′) dr dr′.
        let (h, k) = (0.02, c(1.7, 0.0));
        let ladder = pairing_gradient(0, k, &|r| (r.ln(), 1.0 / r), &|r| (r.ln(), 1.0 / r), h).unwrap();
        let rule = AngularRule::graded(DEFAULT_QUAD_ANGULAR).unwrap();
        let direct = |part: fn(Complex64) -> f64| -> f64 {
            adaptive_gk_real(
                |r| {
                    let inner = |a: f64, b: f64| {
                        adaptive_gk_real(|rp| part(f_kernel_with(1, k, r, rp, &rule).unwrap().value), a, b, 1e-12)
                    };
                    inner(1.0, r) + inner(r, 1.0 + h)
                },
                1.0,
                1.0 + h,
                1e-11,
            ) * PI
        };
        let re = direct(|z| z.re);
        let im = direct(|z| z.im);
        assert!((ladder - c(re, im)).norm() < 1e-8, "{ladder} {re} {im}");
    }

    #[test]
    fn static_pairing_real_symmetric_positive() {
        let h = 0.01;
        let f = |r: f64| 1.0 + 30.0 * (r - 1.0);
        let g = |r: f64| (200.0 * (r - 1.0)).cos();
        let fg = pairing_scalar(1, c(0.0, 0.0), &f, &g, h).unwrap();
        let gf = pairing_scalar(1, c(0.0, 0.0), &g, &f, h).unwrap();
        assert!((fg - gf).norm() < 1e-11 * fg.norm());
        assert_eq!(fg.im, 0.0);
        for m in [0, 1, 4] {
            assert!(pairing_scalar(m, c(0.0, 0.0), &g, &g, h).unwrap().re > 0.0);
        }
    }

    #[test]
    fn log_split_is_converged() {
        let h = 0.01;
        let f = |r: f64| ((r - 1.0) / h * PI).cos();
        let k = c(2.0, -0.05);
        let value = |n: usize| {
            let g = RadialGrid::new(h, n, DEFAULT_QUAD_ANGULAR).unwrap();
            pair(&g.kernel_matrix(1, k), &g.sample(f), &g.sample(f))
        };
        let (a, b) = (value(32), value(64));
        assert!((a - b).norm() < 1e-10, "{a} {b}");
    }

    proptest! {
        #[test]
        fn pairing_is_linear(scale in 0.5f64..4.0) {
            let h = 0.01;
            let grid = RadialGrid::new(h, 16, 64).unwrap();
            let k = grid.kernel_matrix(2, c(1.3, -0.02));
            let f = grid.sample(|r| r * r);
            let g = grid.sample(|r| (r - 1.0).sin());
            let base = pair(&k, &f, &g);
            let scaled = pair(&k, &(&f * scale), &g);
            prop_assert!((scaled - base * scale).norm() <= 1e-14 * scaled.norm());
            let doubled = pair(&k, &(&f * 2.0), &g);
            prop_assert_eq!(doubled, base * 2.0);
        }

        #[test]
        fn kernel_symmetry_random(m in 0i32..6, r in 1.0f64..1.02, rp in 1.0f64..1.02, kr in 0.1f64..4.0) {
            prop_assume!((r - rp).abs() > 1e-9);
            let k = c(kr, -0.03);
            let a = f_kernel(m, k, r, rp).unwrap().value;
            let b = f_kernel(-m, k, rp, r).unwrap().value;
            prop_assert!((a - b).norm() < 1e-11 * a.norm());
        }
    }
}
