//! Shift sequences, the rational min-max objective and shift/pole selection.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::banded::factor_sparse;
use crate::error::{Error, Result};
use crate::ilrsi::LowRankSolution;
use crate::krylov::arnoldi_ritz;
use crate::linalg::{self, cr, CMat, CVec, C64};
use crate::problem::CareProblem;

const CONJ_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftOrigin {
    PenzlA,
    PenzlH,
    AdaptiveRitz,
    AdaptiveStabilized,
    User,
}

impl ShiftOrigin {
    pub fn as_str(&self) -> &'static str {
        match self {
            ShiftOrigin::PenzlA => "penzl_A",
            ShiftOrigin::PenzlH => "penzl_H",
            ShiftOrigin::AdaptiveRitz => "adaptive_ritz",
            ShiftOrigin::AdaptiveStabilized => "adaptive_stabilized",
            ShiftOrigin::User => "user",
        }
    }
}

/// Ordered shifts `alpha_k` with positive real parts, closed under conjugation.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSequence {
    shifts: Vec<C64>,
    origin: ShiftOrigin,
    truncated: bool,
}

fn is_real(z: C64) -> bool {
    z.im.abs() <= CONJ_TOL * z.norm()
}

fn close(a: C64, b: C64) -> bool {
    (a - b).norm() <= CONJ_TOL * a.norm().max(b.norm()).max(1e-300)
}

impl ShiftSequence {
    /// Validates positivity of the real parts and conjugation closure.
    pub fn new(shifts: Vec<C64>, origin: ShiftOrigin) -> Result<Self> {
        if shifts.is_empty() {
            return Err(Error::InvalidArgument { what: "shifts", reason: "empty shift sequence".into() });
        }
        for (i, s) in shifts.iter().enumerate() {
            if !(s.re > 0.0) || !s.im.is_finite() {
                return Err(Error::InvalidArgument {
                    what: "shifts",
                    reason: format!("shift {i} = {s} does not have a positive real part"),
                });
            }
        }
        for (i, s) in shifts.iter().enumerate() {
            if !is_real(*s) && !shifts.iter().any(|t| close(*t, s.conj())) {
                return Err(Error::InvalidArgument {
                    what: "shifts",
                    reason: format!("shift {i} = {s} has no conjugate partner"),
                });
            }
        }
        Ok(Self { shifts, origin, truncated: false })
    }

    /// Like [`ShiftSequence::new`], appending any missing conjugates at the end.
    pub fn closing(shifts: Vec<C64>, origin: ShiftOrigin) -> Result<Self> {
        let mut all = shifts.clone();
        for s in shifts {
            if !is_real(s) && !all.iter().any(|t| close(*t, s.conj())) {
                all.push(s.conj());
            }
        }
        Self::new(all, origin)
    }

    pub fn from_real(shifts: &[f64]) -> Result<Self> {
        Self::new(shifts.iter().map(|&s| cr(s)).collect(), ShiftOrigin::User)
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.shifts
    }

    /// Shift for the zero-based step `k`; the list is cycled.
    pub fn cyclic(&self, k: usize) -> C64 {
        self.shifts[k % self.shifts.len()]
    }

    /// `a_k = Re(alpha_k)`.
    pub fn real_parts(&self) -> Vec<f64> {
        self.shifts.iter().map(|s| s.re).collect()
    }

    pub fn origin(&self) -> ShiftOrigin {
        self.origin
    }

    /// Fewer shifts than requested were available.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn with_origin(mut self, origin: ShiftOrigin) -> Self {
        self.origin = origin;
        self
    }
}

/// `max_{lambda} prod_i |lambda - conj(alpha_i)| / |lambda + alpha_i|`.
pub fn rational_objective(shifts: &[C64], spectrum: &[C64]) -> Result<f64> {
    if shifts.is_empty() || spectrum.is_empty() {
        return Err(Error::InvalidArgument {
            what: "rational_objective",
            reason: "shifts and spectrum must be nonempty".into(),
        });
    }
    let mut best = 0.0f64;
    for &l in spectrum {
        let mut prod = 1.0;
        for &a in shifts {
            let den = (l + a).norm();
            if den <= 1e-14 * l.norm().max(a.norm()).max(1.0) {
                return Err(Error::PoleCollision { point: l, shift: a });
            }
            prod *= (l - a.conj()).norm() / den;
        }
        best = best.max(prod);
    }
    Ok(best)
}

fn product_at(shifts: &[C64], z: C64) -> f64 {
    shifts.iter().map(|&a| (z - a.conj()).norm() / (z + a).norm()).product()
}

/// Deduplicated candidates; complex entries are replaced by an exact conjugate pair.
fn canonical_candidates(raw: &[C64]) -> Vec<C64> {
    let mut out: Vec<C64> = Vec::new();
    for &z in raw {
        if !(z.re > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
            continue;
        }
        let zs = if is_real(z) { vec![cr(z.re)] } else { [C64::new(z.re, z.im.abs()), C64::new(z.re, -z.im.abs())].to_vec() };
        for w in zs {
            if !out.iter().any(|t| close(*t, w)) {
                out.push(w);
            }
        }
    }
    out
}

/// Greedy min-max selection of `m` shifts from `candidates` against `spectrum`.
///
/// The seed is the candidate with the smallest single-shift objective; each
/// further shift is the candidate where the current product is largest.
/// Conjugate pairs are added together, so `m + 1` shifts may be returned.
pub fn select_shifts(candidates: &[C64], spectrum: &[C64], m: usize) -> Result<Vec<C64>> {
    let cands = canonical_candidates(candidates);
    if cands.is_empty() {
        return Err(Error::NoCandidates("no candidate with positive real part".into()));
    }
    if spectrum.is_empty() || m == 0 {
        return Err(Error::InvalidArgument { what: "select_shifts", reason: "need m >= 1 and a nonempty spectrum".into() });
    }
    let mut seed = cands[0];
    let mut seed_val = f64::INFINITY;
    for &c in &cands {
        let v = rational_objective(&[c], spectrum)?;
        if v < seed_val {
            seed_val = v;
            seed = c;
        }
    }
    let mut chosen = Vec::with_capacity(m + 1);
    push_with_conjugate(&mut chosen, seed);
    while chosen.len() < m {
        let mut best: Option<(f64, C64)> = None;
        for &c in &cands {
            if chosen.iter().any(|t| close(*t, c)) {
                continue;
            }
            let v = product_at(&chosen, c);
            if best.map_or(true, |(bv, _)| v > bv) {
                best = Some((v, c));
            }
        }
        match best {
            Some((_, c)) => push_with_conjugate(&mut chosen, c),
            None => break,
        }
    }
    Ok(chosen)
}

fn push_with_conjugate(chosen: &mut Vec<C64>, c: C64) {
    chosen.push(c);
    if !is_real(c) {
        chosen.push(c.conj());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenzlMode {
    /// Ritz values of `E^{-1} A`, mirrored into the right half-plane.
    OnA,
    /// Ritz values of the Hamiltonian matrix with positive real part.
    OnH,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenzlOptions {
    pub m: usize,
    pub m1: usize,
    pub m2: usize,
    pub mode: PenzlMode,
}

impl Default for PenzlOptions {
    fn default() -> Self {
        Self { m: 10, m1: 20, m2: 10, mode: PenzlMode::OnA }
    }
}

/// Ritz estimates of the operator and of its inverse, each from its own Krylov space.
fn two_sided_ritz<F, G>(n: usize, op: F, inv: G, m1: usize, m2: usize) -> Result<(Vec<C64>, bool)>
where
    F: FnMut(&CVec) -> Result<CVec>,
    G: FnMut(&CVec) -> Result<CVec>,
{
    let start = CVec::from_element(n, cr(1.0));
    let fwd = arnoldi_ritz(op, &start, m1)?;
    let bwd = arnoldi_ritz(inv, &start, m2)?;
    let mut vals = fwd.values;
    vals.extend(bwd.values.iter().filter(|z| z.norm() > 0.0).map(|z| cr(1.0) / z));
    Ok((vals, fwd.breakdown || bwd.breakdown))
}

fn col(v: &CVec) -> CMat {
    CMat::from_column_slice(v.len(), 1, v.as_slice())
}

fn vecof(m: CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

/// Penzl-style heuristic shifts.
pub fn penzl_shifts(problem: &CareProblem, opts: &PenzlOptions) -> Result<ShiftSequence> {
    if opts.m == 0 || opts.m > opts.m1 + opts.m2 {
        return Err(Error::InvalidArgument {
            what: "m",
            reason: format!("need 1 <= m <= m1 + m2 (m={}, m1={}, m2={})", opts.m, opts.m1, opts.m2),
        });
    }
    let n = problem.n();
    let a = problem.a();
    let a_lu = factor_sparse(a, false).map_err(|_| Error::Singular { what: "A" })?;
    let (candidates, breakdown, origin) = match opts.mode {
        PenzlMode::OnA => {
            let e_lu = match problem.e() {
                Some(e) => Some(factor_sparse(e, false).map_err(|_| Error::Singular { what: "E" })?),
                None => None,
            };
            let op = |x: &CVec| {
                let ax = a.mul_mat(&col(x));
                Ok(vecof(match &e_lu {
                    Some(lu) => lu.solve(&ax),
                    None => ax,
                }))
            };
            let inv = |x: &CVec| {
                let ex = match problem.e() {
                    Some(e) => e.mul_mat(&col(x)),
                    None => col(x),
                };
                Ok(vecof(a_lu.solve(&ex)))
            };
            let (ritz, bd) = two_sided_ritz(n, op, inv, opts.m1, opts.m2)?;
            (ritz.iter().map(|z| -z.conj()).collect::<Vec<_>>(), bd, ShiftOrigin::PenzlA)
        }
        PenzlMode::OnH => {
            if problem.e().is_some() {
                return Err(Error::Unsupported("Hamiltonian-based shifts require E = I".into()));
            }
            let at_lu = factor_sparse(a, true).map_err(|_| Error::Singular { what: "A" })?;
            let ham = HamiltonianOperator::new(problem, &a_lu, &at_lu);
            let (ritz, bd) = two_sided_ritz(2 * n, |x| Ok(ham.apply(x)), |x| Ok(ham.solve(x)), opts.m1, opts.m2)?;
            (ritz, bd, ShiftOrigin::PenzlH)
        }
    };
    let positive: Vec<C64> = candidates.into_iter().filter(|z| z.re > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::NoCandidates("no Ritz value yields a shift with positive real part".into()));
    }
    let spectrum = canonical_candidates(&positive);
    let chosen = select_shifts(&spectrum, &spectrum, opts.m)?;
    let mut seq = ShiftSequence::new(chosen, origin)?;
    if seq.len() < opts.m {
        log::warn!("only {} distinct shift candidates available, {} requested", seq.len(), opts.m);
        seq.truncated = true;
    } else if breakdown {
        log::debug!("Arnoldi breakdown while estimating shifts");
    }
    Ok(seq)
}

/// `H = [A, -B B^*; -C^* C, -A^*]` applied matrix-free, with an inverse through
/// block elimination and the Sherman-Morrison-Woodbury formula.
struct HamiltonianOperator<'a> {
    problem: &'a CareProblem,
    a_lu: &'a crate::banded::BandLu,
    at_lu: &'a crate::banded::BandLu,
    /// `A^{-T} C^T W` with `W = C A^{-1} B`.
    u: CMat,
    /// `(I + W^T W)` factor for the low-rank correction.
    cap: CMat,
}

impl<'a> HamiltonianOperator<'a> {
    fn new(problem: &'a CareProblem, a_lu: &'a crate::banded::BandLu, at_lu: &'a crate::banded::BandLu) -> Self {
        let b = problem.b_complex();
        let c = linalg::to_complex(problem.c());
        let w = &c * a_lu.solve(&b);
        let u = at_lu.solve(&(problem.c_adj() * &w));
        let cap = linalg::identity(problem.q()) + w.transpose() * &w;
        Self { problem, a_lu, at_lu, u, cap }
    }

    fn apply(&self, z: &CVec) -> CVec {
        let n = self.problem.n();
        let x = CMat::from_column_slice(n, 1, &z.as_slice()[..n]);
        let y = CMat::from_column_slice(n, 1, &z.as_slice()[n..]);
        let b = self.problem.b_complex();
        let c = linalg::to_complex(self.problem.c());
        let top = self.problem.apply_a(&x) - &b * (b.transpose() * &y);
        let bot = -(self.problem.c_adj() * (&c * &x)) - self.problem.apply_a_adj(&y);
        stack(&top, &bot)
    }

    /// Solves `A x - F y = r`, `-G x - A^T y = s`.
    fn solve(&self, z: &CVec) -> CVec {
        let n = self.problem.n();
        let r = CMat::from_column_slice(n, 1, &z.as_slice()[..n]);
        let s = CMat::from_column_slice(n, 1, &z.as_slice()[n..]);
        let b = self.problem.b_complex();
        let c = linalg::to_complex(self.problem.c());
        let air = self.a_lu.solve(&r);
        let rhs = -(s + self.problem.c_adj() * (&c * &air));
        // (A^T + U B^T)^{-1} rhs with U = C^T W.
        let y0 = self.at_lu.solve(&rhs);
        let corr = linalg::lu_solve(&self.cap, &(b.transpose() * &y0), "I + W^T W").unwrap_or_else(|_| CMat::zeros(self.problem.q(), 1));
        let y = y0 - &self.u * corr;
        let x = self.a_lu.solve(&(r + &b * (b.transpose() * &y)));
        stack(&x, &y)
    }
}

fn stack(top: &CMat, bot: &CMat) -> CVec {
    let mut v = CVec::zeros(top.nrows() + bot.nrows());
    v.as_mut_slice()[..top.nrows()].copy_from_slice(top.as_slice());
    v.as_mut_slice()[top.nrows()..].copy_from_slice(bot.as_slice());
    v
}

/// Selection of Ritz values for adaptive poles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaptiveMode {
    /// Ritz values of `A`.
    Plain,
    /// Ritz values of the closed-loop matrix `A - B B^* X`.
    Stabilized,
}

/// Real interval `[s_min, s_max]` that the candidate region always contains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveRegion {
    pub s_min: f64,
    pub s_max: f64,
}

impl AdaptiveRegion {
    /// Extreme magnitudes of the spectrum of `E^{-1}A` from short Arnoldi runs.
    pub fn estimate(problem: &CareProblem, steps: usize) -> Result<Self> {
        let opts = PenzlOptions { m: 1, m1: steps, m2: steps, mode: PenzlMode::OnA };
        let n = problem.n();
        let a = problem.a();
        let a_lu = factor_sparse(a, false).map_err(|_| Error::Singular { what: "A" })?;
        let e_lu = match problem.e() {
            Some(e) => Some(factor_sparse(e, false).map_err(|_| Error::Singular { what: "E" })?),
            None => None,
        };
        let start = CVec::from_element(n, cr(1.0));
        let fwd = arnoldi_ritz(
            |x| {
                let ax = a.mul_mat(&col(x));
                Ok(vecof(match &e_lu {
                    Some(lu) => lu.solve(&ax),
                    None => ax,
                }))
            },
            &start,
            opts.m1,
        )?;
        let bwd = arnoldi_ritz(
            |x| {
                let ex = match problem.e() {
                    Some(e) => e.mul_mat(&col(x)),
                    None => col(x),
                };
                Ok(vecof(a_lu.solve(&ex)))
            },
            &start,
            opts.m2,
        )?;
        let s_max = fwd.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let s_min = bwd.values.iter().map(|z| 1.0 / z.norm()).fold(f64::INFINITY, f64::min);
        if !(s_min.is_finite() && s_min > 0.0 && s_max >= s_min) {
            return Err(Error::NoCandidates("could not estimate the spectral region".into()));
        }
        Ok(Self { s_min, s_max })
    }
}

/// A pole chosen by the adaptive rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptivePole {
    pub pole: C64,
    /// No admissible Ritz value existed and the previous pole was reused.
    pub fallback: bool,
}

/// Ritz values of `A` (plain) or `A - B B^* X` (with `xhat`) on the span of `basis`,
/// i.e. the eigenvalues of `(V^*V)^{-1} V^* M V`.
pub fn projected_ritz_values(problem: &CareProblem, basis: &CMat, xhat: Option<&LowRankSolution>) -> Result<Vec<C64>> {
    if problem.e().is_some() {
        return Err(Error::Unsupported("adaptive poles require E = I".into()));
    }
    let q = linalg::orth(basis);
    let mut mq = problem.apply_a(&q);
    if let Some(x) = xhat {
        let b = problem.b_complex();
        mq -= &b * (b.transpose() * x.apply(&q)?);
    }
    linalg::eigenvalues(&(q.adjoint() * mq))
}

/// Next pole maximizing `prod |s - alpha_j| / prod |s - theta_i|` over the boundary
/// of the convex hull of the mirrored Ritz values (and of the region, if given).
///
/// Without existing poles the smallest candidate magnitude is returned.
pub fn next_adaptive_pole(ritz: &[C64], existing: &[C64], region: Option<&AdaptiveRegion>) -> Result<AdaptivePole> {
    let zeros: Vec<C64> = ritz.iter().copied().filter(|t| t.re < 0.0).collect();
    if zeros.is_empty() {
        return match existing.last() {
            Some(&p) => {
                log::warn!("no Ritz value in the open left half-plane; reusing pole {p}");
                Ok(AdaptivePole { pole: p, fallback: true })
            }
            None => Err(Error::NoCandidates("no admissible Ritz value and no previous pole".into())),
        };
    }
    let mut pts: Vec<C64> = zeros.iter().flat_map(|t| [-t.conj(), -*t]).collect();
    if let Some(r) = region {
        pts.push(cr(r.s_min));
        pts.push(cr(r.s_max));
    }
    let cands = boundary_candidates(&pts);
    if existing.is_empty() {
        let first = match region {
            Some(r) => cr(r.s_min),
            None => *cands.iter().min_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap()).unwrap(),
        };
        return Ok(AdaptivePole { pole: snap_real(first), fallback: false });
    }
    let mut best = (f64::NEG_INFINITY, cands[0]);
    for &s in &cands {
        let mut v = 0.0;
        for &a in existing {
            v += libm::log((s - a).norm());
        }
        for &t in &zeros {
            v -= libm::log((s - t).norm());
        }
        if v > best.0 {
            best = (v, s);
        }
    }
    Ok(AdaptivePole { pole: snap_real(best.1), fallback: false })
}

fn snap_real(z: C64) -> C64 {
    if is_real(z) {
        cr(z.re)
    } else {
        z
    }
}

const EDGE_SAMPLES: usize = 32;
const SEGMENT_SAMPLES: usize = 200;

/// Points on the boundary of the convex hull of `pts` (all in the right half-plane).
fn boundary_candidates(pts: &[C64]) -> Vec<C64> {
    let scale = pts.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let all_real = pts.iter().all(|z| z.im.abs() <= 1e-10 * scale);
    if all_real {
        let lo = pts.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo * (1.0 + 1e-14) {
            return vec![cr(lo)];
        }
        let (l0, l1) = (libm::log(lo), libm::log(hi));
        return (0..SEGMENT_SAMPLES)
            .map(|i| cr(libm::exp(l0 + (l1 - l0) * i as f64 / (SEGMENT_SAMPLES - 1) as f64)))
            .collect();
    }
    let hull = convex_hull(pts);
    let mut out = Vec::with_capacity(hull.len() * EDGE_SAMPLES);
    for i in 0..hull.len() {
        let (p, q) = (hull[i], hull[(i + 1) % hull.len()]);
        for s in 0..EDGE_SAMPLES {
            out.push(p + (q - p) * cr(s as f64 / EDGE_SAMPLES as f64));
        }
    }
    out
}

/// Andrew's monotone chain; counter-clockwise, collinear points dropped.
fn convex_hull(pts: &[C64]) -> Vec<C64> {
    let mut p: Vec<C64> = pts.to_vec();
    p.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
    p.dedup_by(|a, b| (*a - *b).norm() == 0.0);
    if p.len() < 3 {
        return p;
    }
    let cross = |o: C64, a: C64, b: C64| (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re);
    let mut lower: Vec<C64> = Vec::new();
    for &z in &p {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], z) <= 0.0 {
            lower.pop();
        }
        lower.push(z);
    }
    let mut upper: Vec<C64> = Vec::new();
    for &z in p.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], z) <= 0.0 {
            upper.pop();
        }
        upper.push(z);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Adaptive pole from the span of `basis`; `current` is used in stabilized mode.
pub fn adaptive_pole(
    problem: &CareProblem,
    basis: &CMat,
    current: Option<&LowRankSolution>,
    existing: &[C64],
    mode: AdaptiveMode,
    region: Option<&AdaptiveRegion>,
) -> Result<AdaptivePole> {
    let xhat = match mode {
        AdaptiveMode::Plain => None,
        AdaptiveMode::Stabilized => current,
    };
    let ritz = projected_ritz_values(problem, basis, xhat)?;
    next_adaptive_pole(&ritz, existing, region)
}

impl core::fmt::Display for ShiftOrigin {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for ShiftOrigin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "penzl_A" => ShiftOrigin::PenzlA,
            "penzl_H" => ShiftOrigin::PenzlH,
            "adaptive_ritz" => ShiftOrigin::AdaptiveRitz,
            "adaptive_stabilized" => ShiftOrigin::AdaptiveStabilized,
            "user" => ShiftOrigin::User,
            other => {
                return Err(Error::InvalidArgument { what: "origin", reason: other.to_string() });
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseMatrix;
    use crate::RMat;

    fn diag_problem(d: &[f64]) -> CareProblem {
        let n = d.len();
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
        CareProblem::new(a, RMat::from_element(n, 1, 1.0), RMat::from_element(1, n, 1.0), None).unwrap()
    }

    #[test]
    fn sequence_invariants() {
        assert!(ShiftSequence::new(vec![C64::new(1.0, 2.0)], ShiftOrigin::User).is_err());
        assert!(ShiftSequence::new(vec![cr(-1.0)], ShiftOrigin::User).is_err());
        let s = ShiftSequence::closing(vec![C64::new(1.0, 2.0), cr(3.0)], ShiftOrigin::User).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.cyclic(4), cr(3.0));
        assert_eq!(s.real_parts(), vec![1.0, 3.0, 1.0]);
    }

    #[test]
    fn objective_direct_values() {
        assert_eq!(rational_objective(&[cr(2.0)], &[cr(2.0)]).unwrap(), 0.0);
        assert!((rational_objective(&[cr(2.0)], &[cr(1.0)]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let err = rational_objective(&[cr(2.0)], &[cr(-2.0)]).unwrap_err();
        assert!(matches!(err, Error::PoleCollision { .. }));
    }

    #[test]
    fn scalar_penzl_mirrors_the_eigenvalue() {
        let p = diag_problem(&[-3.0]);
        let s = penzl_shifts(&p, &PenzlOptions { m: 1, m1: 1, m2: 1, mode: PenzlMode::OnA }).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s.as_slice()[0] - cr(3.0)).norm() < 1e-12);
        assert!(rational_objective(s.as_slice(), &[cr(3.0)]).unwrap() < 1e-12);
    }

    #[test]
    fn complex_candidate_brings_its_conjugate() {
        let chosen = select_shifts(&[C64::new(1.0, 2.0)], &[C64::new(1.0, 2.0), C64::new(1.0, -2.0)], 1).unwrap();
        assert_eq!(chosen.len(), 2);
        assert_eq!(chosen[1], chosen[0].conj());
    }

    #[test]
    fn hamiltonian_inverse_is_consistent() {
        let p = crate::problem::random_stable_problem(12, 2, 3, 5).unwrap();
        let a_lu = factor_sparse(p.a(), false).unwrap();
        let at_lu = factor_sparse(p.a(), true).unwrap();
        let h = HamiltonianOperator::new(&p, &a_lu, &at_lu);
        let z = CVec::from_fn(24, |i, _| C64::new((i as f64).sin(), (i as f64 * 0.3).cos()));
        let back = h.apply(&h.solve(&z));
        assert!((back - &z).norm() < 1e-10 * z.norm());
    }

    #[test]
    fn on_h_shifts_are_positive() {
        let p = crate::problem::random_stable_problem(20, 1, 1, 3).unwrap();
        let s = penzl_shifts(&p, &PenzlOptions { m: 4, m1: 8, m2: 6, mode: PenzlMode::OnH }).unwrap();
        assert!(s.as_slice().iter().all(|z| z.re > 0.0));
        assert_eq!(s.origin(), ShiftOrigin::PenzlH);
    }

    #[test]
    fn scalar_adaptive_pole_is_the_mirror() {
        let p = diag_problem(&[-3.0]);
        let u = CMat::from_element(1, 1, cr(1.0));
        let r = adaptive_pole(&p, &u, None, &[], AdaptiveMode::Plain, None).unwrap();
        assert_eq!(r.pole, cr(3.0));
        assert!(!r.fallback);
    }

    #[test]
    fn unstable_projection_falls_back() {
        let r = next_adaptive_pole(&[cr(1.0)], &[cr(5.0)], None).unwrap();
        assert!(r.fallback);
        assert_eq!(r.pole, cr(5.0));
        assert!(next_adaptive_pole(&[cr(1.0)], &[], None).is_err());
    }

    #[test]
    fn hull_of_square() {
        let pts = [C64::new(1.0, 1.0), C64::new(2.0, 1.0), C64::new(2.0, -1.0), C64::new(1.0, -1.0), C64::new(1.5, 0.0)];
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
    }
}
