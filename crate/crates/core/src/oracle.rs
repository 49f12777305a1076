//! Reference solutions for the goodput optimization: ergodic capacity, the
//! single-rate optimum, the threshold recursion and an exhaustive grid search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{capacity, RicianSpec};
use crate::error::{Error, Result};
use crate::feedback::{analytic_goodput, FeedbackScheme};
use crate::numeric::{golden_section_max, quad};
use crate::scalar::Scalar;

pub const MAX_BRUTE_FORCE_REGIONS: usize = 5;
pub const MAX_BRUTE_FORCE_GRID: usize = 512;

/// Upper probability level of the integration range for ergodic capacity.
const ERGODIC_TAIL: f64 = 1e-10;
/// Shooting tolerance on the terminal mass `|P(λ_Λ) - 1|`.
const SHOOT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Recursion,
    BruteForce,
    Integration,
    ScalarSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct OracleSolution<T> {
    pub scheme: FeedbackScheme<T>,
    pub goodput: T,
    pub method: Method,
    /// Magnitudes `γ_l^r` whose capacities are the region rates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstruction_points: Option<Vec<T>>,
}

impl<T: Scalar> OracleSolution<T> {
    fn evaluate(scheme: FeedbackScheme<T>, spec: &RicianSpec<T>, method: Method, recon: Option<Vec<T>>) -> Self {
        let goodput = analytic_goodput(&scheme, spec).goodput;
        Self { scheme, goodput, method, reconstruction_points: recon }
    }
}

/// Which form of the stationarity recursion to shoot with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecursionVariant {
    /// Thresholds in magnitude, base-2 log, `λ_0 = 0` fixed and rate-matched
    /// regions throughout. Iterates `l = 1..Λ-1` from a guessed `λ_1`.
    #[default]
    Printed,
    /// Thresholds in power `g = γ²` with the power density, natural log, and a
    /// free rate for the first region (previous level taken as 0). Iterates
    /// `l = 0..Λ-1` from a guessed first reconstruction point. This is the
    /// exact first-order condition of the grid-search objective.
    PowerDomain,
}

/// `E[C(γ)]`, the perfect-CSI goodput ceiling.
pub fn ergodic_capacity<T: Scalar>(spec: &RicianSpec<T>) -> Result<T> {
    spec.validate()?;
    let levels = [0.001, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999, 0.9999, 1.0 - 1e-6, 1.0 - 1e-8];
    let tail_level = T::tol(ERGODIC_TAIL).max(T::epsilon() * T::lit(16.0));
    let mut points = vec![T::zero()];
    for p in levels.into_iter().map(T::lit).filter(|&p| p < T::one() - tail_level) {
        points.push(spec.quantile(p)?);
    }
    let top = spec.quantile(T::one() - tail_level)?;
    points.push(top);
    points.dedup();
    let snr = spec.snr;
    let body = quad::integrate_pieces(
        |g: T| spec.pdf_unchecked(g) * capacity(g, snr),
        &points,
        T::tol(1e-14),
        T::tol(1e-11),
    )?;
    // C grows only logarithmically, so the tail beyond `top` is C(top)·sf(top)
    // to leading order.
    let tail = capacity(top, snr) * spec.cdf_sf(top).1;
    Ok(body + tail)
}

/// Best single rate without CSI: maximize `C(z)·(1 - P(z))` over `z`.
pub fn no_csi_optimum<T: Scalar>(spec: &RicianSpec<T>) -> Result<OracleSolution<T>> {
    spec.validate()?;
    let objective = |z: T| capacity(z, spec.snr) * spec.cdf_sf(z).1;
    let scan = spec.quantile_grid(400)?;
    let mut best = 0;
    let mut best_val = T::neg_infinity();
    for (i, &z) in scan.iter().enumerate() {
        let v = objective(z);
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    let lo = if best == 0 { T::zero() } else { scan[best - 1] };
    let hi = if best + 1 < scan.len() { scan[best + 1] } else { spec.quantile(T::one() - T::tol(1e-12).max(T::epsilon() * T::lit(16.0)))? };
    let (z, _) = golden_section_max(objective, lo, hi, T::tol(1e-12) * hi);
    let scheme = FeedbackScheme::new(vec![T::zero(), T::infinity()], vec![capacity(z, spec.snr)], spec.snr)?;
    Ok(OracleSolution::evaluate(scheme, spec, Method::ScalarSearch, Some(vec![z])))
}

pub fn threshold_recursion<T: Scalar>(spec: &RicianSpec<T>, num_regions: usize) -> Result<OracleSolution<T>> {
    threshold_recursion_with(spec, num_regions, RecursionVariant::Printed)
}

/// Solve the threshold recursion by shooting on the probability level of the
/// first free variable until the last step lands on total mass 1.
pub fn threshold_recursion_with<T: Scalar>(
    spec: &RicianSpec<T>,
    num_regions: usize,
    variant: RecursionVariant,
) -> Result<OracleSolution<T>> {
    spec.validate()?;
    if num_regions < 2 {
        return Err(Error::Parameter(format!("threshold recursion needs at least 2 regions, got {num_regions}")));
    }
    let shooter = Shooter { spec, variant, steps: steps_for(variant, num_regions) };
    let lo = T::lit(1e-9);
    let hi = T::one() - T::lit(1e-9);
    let (f_lo, _) = shooter.run(lo)?;
    let (f_hi, _) = shooter.run(hi)?;
    if !(f_lo < T::zero() && f_hi > T::zero()) {
        return Err(Error::InfeasibleShoot(format!(
            "terminal mass does not change sign over the first level ({f_lo} .. {f_hi})"
        )));
    }
    let (mut a, mut b) = (lo, hi);
    let tol = T::tol(SHOOT_TOL);
    for _ in 0..300 {
        let m = T::lit(0.5) * (a + b);
        if m <= a || m >= b {
            break;
        }
        let (f, xs) = shooter.run(m)?;
        if f.abs() < tol {
            return shooter.finish(xs);
        }
        if f < T::zero() {
            a = m;
        } else {
            b = m;
        }
    }
    Err(Error::Convergence(format!(
        "shooting stalled at first level {a} without reaching |P - 1| < {SHOOT_TOL}"
    )))
}

fn steps_for(variant: RecursionVariant, num_regions: usize) -> usize {
    match variant {
        RecursionVariant::Printed => num_regions - 1,
        RecursionVariant::PowerDomain => num_regions,
    }
}

struct Shooter<'a, T> {
    spec: &'a RicianSpec<T>,
    variant: RecursionVariant,
    steps: usize,
}

impl<T: Scalar> Shooter<'_, T> {
    /// Terminal mass minus one, plus the visited levels (in magnitude units).
    /// Leaving the probability range early counts as overshoot.
    fn run(&self, u: T) -> Result<(T, Vec<T>)> {
        let spec = self.spec;
        let snr = spec.snr;
        let mut prev = T::zero();
        let mut cur = spec.quantile(u)?;
        let mut mass = u;
        let mut xs = vec![cur];
        for step in 0..self.steps {
            let inc = match self.variant {
                RecursionVariant::Printed => {
                    (T::one() / snr + cur) * spec.pdf_unchecked(cur) * ((T::one() + cur * snr) / (T::one() + prev * snr)).log2()
                }
                RecursionVariant::PowerDomain => {
                    let (g, gp) = (cur * cur, prev * prev);
                    (T::one() / snr + g) * spec.power_pdf(g) * ((T::one() + g * snr) / (T::one() + gp * snr)).ln()
                }
            };
            let next = mass + inc;
            let last = step + 1 == self.steps;
            if last || next >= T::one() {
                let remaining = T::from_usize_lossy(self.steps - step - 1);
                return Ok((next - T::one() + remaining, xs));
            }
            prev = cur;
            cur = spec.quantile(next)?;
            mass = next;
            xs.push(cur);
        }
        unreachable!("loop returns on the last step")
    }

    fn finish(&self, xs: Vec<T>) -> Result<OracleSolution<T>> {
        let spec = self.spec;
        match self.variant {
            RecursionVariant::Printed => {
                let scheme = FeedbackScheme::from_interior(&xs, spec.snr)?;
                let mut recon = vec![T::zero()];
                recon.extend_from_slice(&xs);
                Ok(OracleSolution::evaluate(scheme, spec, Method::Recursion, Some(recon)))
            }
            RecursionVariant::PowerDomain => {
                let scheme = free_first_level_scheme(&xs, spec.snr)?;
                Ok(OracleSolution::evaluate(scheme, spec, Method::Recursion, Some(xs)))
            }
        }
    }
}

/// Scheme whose first region transmits at `C(levels[0])` and whose later
/// regions start at, and are rate-matched to, `levels[1..]`.
fn free_first_level_scheme<T: Scalar>(levels: &[T], snr: T) -> Result<FeedbackScheme<T>> {
    let mut lambdas = Vec::with_capacity(levels.len() + 1);
    lambdas.push(T::zero());
    lambdas.extend_from_slice(&levels[1..]);
    lambdas.push(T::infinity());
    let rates = levels.iter().map(|&z| capacity(z, snr)).collect();
    FeedbackScheme::new(lambdas, rates, snr)
}

fn check_brute_force_limits(num_regions: usize, grid: usize) -> Result<()> {
    if !(1..=MAX_BRUTE_FORCE_REGIONS).contains(&num_regions) {
        return Err(Error::Usage(format!(
            "brute force supports 1..={MAX_BRUTE_FORCE_REGIONS} regions, got {num_regions}"
        )));
    }
    if grid > MAX_BRUTE_FORCE_GRID || grid < num_regions {
        return Err(Error::Usage(format!(
            "brute force grid must lie in {num_regions}..={MAX_BRUTE_FORCE_GRID}, got {grid}"
        )));
    }
    Ok(())
}

/// Grid values with both tails of the distribution function, so mass
/// differences are formed from whichever tail is small.
struct Tabulated<T> {
    z: Vec<T>,
    cap: Vec<T>,
    cdf: Vec<T>,
    sf: Vec<T>,
}

impl<T: Scalar> Tabulated<T> {
    fn new(spec: &RicianSpec<T>, grid: usize) -> Result<Self> {
        let z = spec.quantile_grid(grid)?;
        let cap = z.iter().map(|&g| capacity(g, spec.snr)).collect();
        let (cdf, sf) = z.iter().map(|&g| spec.cdf_sf(g)).unzip();
        Ok(Self { z, cap, cdf, sf })
    }

    /// `P(z_j) - P(z_i)` for `i <= j`.
    fn mass(&self, i: usize, j: usize) -> T {
        if self.cdf[i] < self.sf[i] {
            self.cdf[j] - self.cdf[i]
        } else {
            self.sf[i] - self.sf[j]
        }
    }

    fn len(&self) -> usize {
        self.z.len()
    }
}

/// First index attaining the maximum.
fn argmax_first<T: Scalar>(values: impl Iterator<Item = (usize, T)>) -> Option<(usize, T)> {
    let mut best: Option<(usize, T)> = None;
    for (i, v) in values {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best
}

/// Exhaustive search over increasing level chains `z_0 < … < z_{Λ-1}` on a
/// quantile-spaced grid, maximizing `Σ C(z_l)·(P(z_{l+1}) - P(z_l))`.
///
/// Region 0 transmits at `C(z_0)` (the single-rate problem when `Λ = 1`);
/// every later region is rate-matched. Solved exactly by dynamic programming.
/// Ties resolve to the lexicographically smallest chain.
pub fn brute_force<T: Scalar>(spec: &RicianSpec<T>, num_regions: usize, grid: usize) -> Result<OracleSolution<T>> {
    spec.validate()?;
    check_brute_force_limits(num_regions, grid)?;
    let tab = Tabulated::new(spec, grid)?;
    let n = tab.len();
    // value[k][i]: best tail of k+1 levels whose lowest level is z_i;
    // next[k][i]: successor index achieving it.
    let mut value: Vec<Vec<T>> = vec![(0..n).map(|i| tab.cap[i] * tab.sf[i]).collect()];
    let mut next: Vec<Vec<usize>> = vec![vec![usize::MAX; n]];
    for k in 1..num_regions {
        let prev = &value[k - 1];
        let (v, nx): (Vec<T>, Vec<usize>) = (0..n)
            .into_par_iter()
            .map(|i| {
                argmax_first((i + 1..n).map(|j| (j, tab.cap[i] * tab.mass(i, j) + prev[j])))
                    .map(|(j, v)| (v, j))
                    .unwrap_or((T::neg_infinity(), usize::MAX))
            })
            .unzip();
        value.push(v);
        next.push(nx);
    }
    let top = num_regions - 1;
    let (mut i, _) = argmax_first(value[top].iter().copied().enumerate())
        .ok_or_else(|| Error::Usage("empty grid".into()))?;
    let mut chain = vec![tab.z[i]];
    for k in (1..=top).rev() {
        i = next[k][i];
        chain.push(tab.z[i]);
    }
    let scheme = free_first_level_scheme(&chain, spec.snr)?;
    Ok(OracleSolution::evaluate(scheme, spec, Method::BruteForce, Some(chain)))
}

/// Grid search over boundaries and reconstruction points separately, without
/// assuming `γ_l^r = λ_l`. Variables alternate as
/// `γ_0^r < λ_1 <= γ_1^r < λ_2 <= … <= γ_{Λ-1}^r`; region `l` earns
/// `C(γ_l^r)·(P(λ_{l+1}) - P(γ_l^r))`.
pub fn brute_force_joint<T: Scalar>(spec: &RicianSpec<T>, num_regions: usize, grid: usize) -> Result<OracleSolution<T>> {
    spec.validate()?;
    check_brute_force_limits(num_regions, grid)?;
    let tab = Tabulated::new(spec, grid)?;
    let n = tab.len();
    // recon[l][i]: best value from region l onwards with γ_l^r = z_i,
    // bound[l][j]: best value from region l onwards with λ_l = z_j.
    let mut recon: Vec<Vec<T>> = vec![Vec::new(); num_regions];
    let mut recon_next = vec![vec![usize::MAX; n]; num_regions];
    let mut bound: Vec<Vec<T>> = vec![Vec::new(); num_regions];
    let mut bound_pick = vec![vec![usize::MAX; n]; num_regions];
    for l in (0..num_regions).rev() {
        recon[l] = if l + 1 == num_regions {
            (0..n).map(|i| tab.cap[i] * tab.sf[i]).collect()
        } else {
            let after = &bound[l + 1];
            let (v, nx): (Vec<T>, Vec<usize>) = (0..n)
                .into_par_iter()
                .map(|i| {
                    argmax_first((i + 1..n).map(|j| (j, tab.cap[i] * tab.mass(i, j) + after[j])))
                        .map(|(j, v)| (v, j))
                        .unwrap_or((T::neg_infinity(), usize::MAX))
                })
                .unzip();
            recon_next[l] = nx;
            v
        };
        if l > 0 {
            // suffix argmax: best γ_l^r at or above λ_l
            let mut v = vec![T::neg_infinity(); n];
            let mut pick = vec![usize::MAX; n];
            for j in (0..n).rev() {
                let (bv, bp) = if j + 1 < n { (v[j + 1], pick[j + 1]) } else { (T::neg_infinity(), usize::MAX) };
                if recon[l][j] >= bv {
                    v[j] = recon[l][j];
                    pick[j] = j;
                } else {
                    v[j] = bv;
                    pick[j] = bp;
                }
            }
            bound[l] = v;
            bound_pick[l] = pick;
        }
    }
    let (mut i, _) = argmax_first(recon[0].iter().copied().enumerate())
        .ok_or_else(|| Error::Usage("empty grid".into()))?;
    let mut points = vec![tab.z[i]];
    let mut lambdas = vec![T::zero()];
    for l in 1..num_regions {
        let j = recon_next[l - 1][i];
        lambdas.push(tab.z[j]);
        i = bound_pick[l][j];
        points.push(tab.z[i]);
    }
    lambdas.push(T::infinity());
    let rates = points.iter().map(|&z| capacity(z, spec.snr)).collect();
    let scheme = FeedbackScheme::new(lambdas, rates, spec.snr)?;
    Ok(OracleSolution::evaluate(scheme, spec, Method::BruteForce, Some(points)))
}
