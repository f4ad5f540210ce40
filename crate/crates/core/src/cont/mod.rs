//! Pseudo-arclength continuation with test-function events.

mod codim1;
mod equilibria;

pub use codim1::{continue_codim1, continue_codim1_field, Codim1Problem, CurvePoint};
pub use equilibria::{
    continue_equilibria, eq_test_functions, is_hopf_pair, EqOptions, EqPoint, EquilibriumProblem,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    SN,
    HB,
    PD,
    TR,
    BP,
    /// Cusp on a saddle-node curve: the curve reverses direction in the parameter plane.
    CP,
    /// Branch endpoint at a window boundary.
    EP,
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::SN => "SN",
            EventKind::HB => "HB",
            EventKind::PD => "PD",
            EventKind::TR => "TR",
            EventKind::BP => "BP",
            EventKind::CP => "CP",
            EventKind::EP => "EP",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBound {
    /// Index of the bounded unknown.
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationSettings {
    pub h0: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub corrector_tol: f64,
    pub max_corrector_iter: usize,
    pub event_tol: f64,
    pub max_points: usize,
    pub window: Vec<ParamBound>,
    /// Reject steps whose tangent turns by more than this angle (radians).
    pub max_turn: f64,
    pub detect_bp: bool,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        Self {
            h0: 0.01,
            h_min: 1e-8,
            h_max: 0.05,
            corrector_tol: 1e-9,
            max_corrector_iter: 12,
            event_tol: 1e-10,
            max_points: 5000,
            window: Vec::new(),
            max_turn: 0.3,
            detect_bp: true,
        }
    }
}

impl ContinuationSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_min > 0.0 && self.h_min <= self.h0 && self.h0 <= self.h_max) {
            return Err(Error::InvalidInput(format!(
                "step sizes must satisfy 0 < min <= initial <= max, got {} {} {}",
                self.h_min, self.h0, self.h_max
            )));
        }
        Ok(())
    }
}

/// `n` equations in `n + 1` unknowns.
pub trait ZeroProblem: Sync {
    fn n_unknowns(&self) -> usize;
    fn residual(&self, u: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64>;

    fn weights(&self) -> DVector<f64> {
        DVector::from_element(self.n_unknowns(), 1.0)
    }

    fn event_kinds(&self) -> Vec<EventKind> {
        Vec::new()
    }

    /// One value per entry of `event_kinds`; NaN disables detection at that point.
    fn test_functions(&self, _u: &DVector<f64>, _tangent: &DVector<f64>) -> Vec<f64> {
        Vec::new()
    }

    /// Reject spurious sign changes (e.g. neutral saddles for Hopf tests).
    fn confirm_event(&self, _kind: EventKind, _u: &DVector<f64>) -> bool {
        true
    }

    /// Stop the branch at this point (e.g. a cycle shrinking to an equilibrium).
    fn terminate(&self, _u: &DVector<f64>) -> bool {
        false
    }

    /// Called with every accepted point; lets problems move their phase references.
    fn accept(&self, _u: &DVector<f64>) {}

    /// End the branch at this localized event.
    fn stop_at_event(&self, _kind: EventKind, _u: &DVector<f64>) -> bool {
        false
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchStatus {
    WindowExit,
    PointBudget,
    StepUnderflow,
    ClosedLoop,
    Terminated,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContPoint {
    pub u: DVector<f64>,
    pub tangent: DVector<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContEvent {
    pub kind: EventKind,
    /// The event lies between points `index - 1` and `index`.
    pub index: usize,
    pub point: ContPoint,
    /// |test function| at the localized point.
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RawBranch {
    pub points: Vec<ContPoint>,
    pub events: Vec<ContEvent>,
    pub status: BranchStatus,
}

struct Engine<'a, P: ZeroProblem> {
    prob: &'a P,
    s: &'a ContinuationSettings,
    w: DVector<f64>,
    kinds: Vec<EventKind>,
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Sign-preserving n-th root of the determinant, finite for large systems.
fn scaled_det(a: DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let lu = a.lu();
    let mut sign = lu.p().determinant::<f64>();
    let u = lu.u();
    let mut logsum = 0.0;
    for i in 0..n {
        let d = u[(i, i)];
        if d == 0.0 {
            return 0.0;
        }
        if d < 0.0 {
            sign = -sign;
        }
        logsum += d.abs().ln();
    }
    sign * (logsum / n as f64).exp()
}

impl<'a, P: ZeroProblem> Engine<'a, P> {
    fn wdot(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.iter().zip(b.iter()).zip(self.w.iter()).map(|((x, y), w)| w * x * y).sum()
    }

    fn wnormalize(&self, t: DVector<f64>) -> DVector<f64> {
        let n = self.wdot(&t, &t).sqrt();
        t / n
    }

    fn bordered(&self, u: &DVector<f64>, row: &DVector<f64>) -> DMatrix<f64> {
        let j = self.prob.jacobian(u);
        let n = self.prob.n_unknowns();
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (n - 1, n)).copy_from(&j);
        for k in 0..n {
            a[(n - 1, k)] = row[k];
        }
        a
    }

    /// Tangent at `u` oriented along `dir`.
    fn tangent(&self, u: &DVector<f64>, dir: &DVector<f64>) -> Option<DVector<f64>> {
        let row = dir.component_mul(&self.w);
        let a = self.bordered(u, &row);
        let n = a.nrows();
        let mut rhs = DVector::zeros(n);
        rhs[n - 1] = 1.0;
        let t = a.lu().solve(&rhs)?;
        if !t.iter().all(|x| x.is_finite()) {
            return None;
        }
        Some(self.wnormalize(t))
    }

    /// Newton on `F(u) = 0`, `<dir, W (u - anchor)> = sigma`.
    fn correct(&self, guess: DVector<f64>, anchor: &DVector<f64>, dir: &DVector<f64>, sigma: f64) -> Option<(DVector<f64>, usize)> {
        let row = dir.component_mul(&self.w);
        let n = self.prob.n_unknowns();
        let mut u = guess;
        for it in 0..self.s.max_corrector_iter {
            let r = self.prob.residual(&u);
            let g = row.dot(&(&u - anchor)) - sigma;
            if !r.iter().all(|x| x.is_finite()) {
                return None;
            }
            let a = self.bordered(&u, &row);
            let mut rhs = DVector::zeros(n);
            rhs.rows_mut(0, n - 1).copy_from(&(-&r));
            rhs[n - 1] = -g;
            let du = a.lu().solve(&rhs)?;
            if !du.iter().all(|x| x.is_finite()) {
                return None;
            }
            u += &du;
            if max_abs(&du) <= 1e-7 * (1.0 + max_abs(&u)) {
                let r = self.prob.residual(&u);
                if max_abs(&r) <= self.s.corrector_tol {
                    return Some((u, it + 1));
                }
            }
        }
        None
    }

    fn psi(&self, u: &DVector<f64>, t: &DVector<f64>) -> Vec<f64> {
        let mut v = self.prob.test_functions(u, t);
        if self.s.detect_bp {
            v.push(scaled_det(self.bordered(u, &t.component_mul(&self.w))));
        }
        for b in &self.s.window {
            v.push((u[b.index] - b.lo).min(b.hi - u[b.index]));
        }
        v
    }

    fn kind_of(&self, idx: usize) -> EventKind {
        if idx < self.kinds.len() {
            self.kinds[idx]
        } else if self.s.detect_bp && idx == self.kinds.len() {
            EventKind::BP
        } else {
            EventKind::EP
        }
    }

    /// Illinois iteration on the arclength offset from `p0`.
    fn locate(&self, p0: &ContPoint, h: f64, idx: usize, f0: f64, f1: f64) -> Option<(ContPoint, f64)> {
        let (mut a, mut b, mut fa, mut fb) = (0.0, h, f0, f1);
        let mut side = 0;
        let mut best: Option<(ContPoint, f64)> = None;
        for _ in 0..80 {
            let sig = b - fb * (b - a) / (fb - fa);
            let guess = &p0.u + &p0.tangent * sig;
            let (u, _) = self.correct(guess, &p0.u, &p0.tangent, sig)?;
            let t = self.tangent(&u, &p0.tangent)?;
            let f = self.psi(&u, &t)[idx];
            if !f.is_finite() {
                return best;
            }
            best = Some((ContPoint { u, tangent: t }, f.abs()));
            if f.abs() <= self.s.event_tol || (b - a).abs() <= 1e-13 * h {
                return best;
            }
            if f * fb < 0.0 {
                a = b;
                fa = fb;
                b = sig;
                fb = f;
                side = 0;
            } else {
                b = sig;
                fb = f;
                if side == 1 {
                    fa *= 0.5;
                }
                side = 1;
            }
        }
        best
    }
}

/// Trace a branch from `seed`, initially moving along `direction` (weighted).
pub fn continue_branch<P: ZeroProblem>(
    prob: &P,
    seed: DVector<f64>,
    direction: DVector<f64>,
    settings: &ContinuationSettings,
) -> Result<RawBranch> {
    settings.validate()?;
    let eng = Engine { prob, s: settings, w: prob.weights(), kinds: prob.event_kinds() };
    trace(&eng, seed, direction)
}

fn trace<P: ZeroProblem>(eng: &Engine<'_, P>, seed: DVector<f64>, direction: DVector<f64>) -> Result<RawBranch> {
    let s = eng.s;
    let n = eng.prob.n_unknowns();
    if seed.len() != n || direction.len() != n {
        return Err(Error::Dimension(format!("seed and direction must have {n} entries")));
    }
    let dir = eng.wnormalize(direction);
    // Seed correction keeps the weighted projection onto `dir` fixed.
    let anchor_proj = dir.component_mul(&eng.w).dot(&seed);
    let (u, _) = eng
        .correct(seed, &DVector::zeros(n), &dir, anchor_proj)
        .ok_or_else(|| Error::NoConvergence("corrector diverged at the seed".into()))?;
    eng.prob.accept(&u);
    let t = eng.tangent(&u, &dir).ok_or_else(|| Error::Singular("no tangent at the seed".into()))?;
    let mut points = vec![ContPoint { u, tangent: t }];
    let mut events: Vec<ContEvent> = Vec::new();
    let mut psi_prev = eng.psi(&points[0].u, &points[0].tangent);
    let mut h = s.h0;
    let cos_max = s.max_turn.cos();
    let status = loop {
        if points.len() >= s.max_points {
            break BranchStatus::PointBudget;
        }
        let p0 = points.last().unwrap().clone();
        let guess = &p0.u + &p0.tangent * h;
        let step = eng.correct(guess, &p0.u, &p0.tangent, h).and_then(|(u, it)| {
            let t = eng.tangent(&u, &p0.tangent)?;
            (eng.wdot(&t, &p0.tangent) >= cos_max).then_some((u, t, it))
        });
        let Some((u1, t1, iters)) = step else {
            h *= 0.5;
            if h < s.h_min {
                break BranchStatus::StepUnderflow;
            }
            continue;
        };
        let psi1 = eng.psi(&u1, &t1);
        // Events in order of arclength within the step.
        let mut found: Vec<(f64, usize, ContPoint, f64)> = Vec::new();
        for (k, (&f0, &f1)) in psi_prev.iter().zip(&psi1).enumerate() {
            if f0.is_finite() && f1.is_finite() && f0 * f1 < 0.0 {
                if let Some((pt, res)) = eng.locate(&p0, h, k, f0, f1) {
                    let sig = eng.wdot(&(&pt.u - &p0.u), &p0.tangent);
                    let kind = eng.kind_of(k);
                    if kind == EventKind::EP || kind == EventKind::BP || eng.prob.confirm_event(kind, &pt.u) {
                        found.push((sig, k, pt, res));
                    }
                }
            }
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0));
        let idx = points.len();
        let mut stop = None;
        for (_, k, pt, res) in found {
            let kind = eng.kind_of(k);
            if kind == EventKind::EP {
                events.push(ContEvent { kind, index: idx, point: pt.clone(), residual: res });
                points.push(pt);
                stop = Some(BranchStatus::WindowExit);
                break;
            }
            if eng.prob.stop_at_event(kind, &pt.u) {
                events.push(ContEvent { kind, index: idx, point: pt.clone(), residual: res });
                points.push(pt);
                stop = Some(BranchStatus::Terminated);
                break;
            }
            events.push(ContEvent { kind, index: idx, point: pt, residual: res });
        }
        if let Some(st) = stop {
            break st;
        }
        let closed = points.len() > 8 && {
            let d = &u1 - &points[0].u;
            eng.wdot(&d, &d).sqrt() < 0.5 * h && eng.wdot(&t1, &points[0].tangent) > 0.0
        };
        let terminate = eng.prob.terminate(&u1);
        eng.prob.accept(&u1);
        points.push(ContPoint { u: u1, tangent: t1 });
        psi_prev = psi1;
        if closed {
            break BranchStatus::ClosedLoop;
        }
        if terminate {
            break BranchStatus::Terminated;
        }
        if iters <= 3 {
            h = (h * 1.5).min(s.h_max);
        }
    };
    Ok(RawBranch { points, events, status })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchKind {
    Equilibrium,
    PeriodicOrbit,
    Torus2,
    EventCurve,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Event<P> {
    pub kind: EventKind,
    pub index: usize,
    pub point: P,
    pub residual: f64,
}

/// A traced solution family with typed point records.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Branch<P> {
    pub kind: BranchKind,
    pub points: Vec<P>,
    pub events: Vec<Event<P>>,
    pub status: BranchStatus,
    pub settings: ContinuationSettings,
}

impl<P> Branch<P> {
    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event<P>> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events_of(kind).count()
    }
}

/// Convert a raw branch with a point map that may fail.
pub fn map_branch<P>(
    raw: RawBranch,
    kind: BranchKind,
    settings: &ContinuationSettings,
    f: impl Fn(&ContPoint) -> Result<P>,
) -> Result<Branch<P>> {
    let points = raw.points.iter().map(&f).collect::<Result<Vec<_>>>()?;
    let events = raw
        .events
        .iter()
        .map(|e| Ok(Event { kind: e.kind, index: e.index, point: f(&e.point)?, residual: e.residual }))
        .collect::<Result<Vec<_>>>()?;
    Ok(Branch { kind, points, events, status: raw.status, settings: settings.clone() })
}

/// Run in both directions from the seed and join the halves, seed in the middle.
pub fn continue_both_ways<P: ZeroProblem>(
    prob: &P,
    seed: DVector<f64>,
    direction: DVector<f64>,
    settings: &ContinuationSettings,
) -> Result<RawBranch> {
    let fwd = continue_branch(prob, seed.clone(), direction.clone(), settings)?;
    let bwd = continue_branch(prob, seed, -direction, settings)?;
    let nb = bwd.points.len();
    let mut points: Vec<ContPoint> = bwd.points.into_iter().rev().map(|p| ContPoint { u: p.u, tangent: -p.tangent }).collect();
    let mut events: Vec<ContEvent> = bwd
        .events
        .into_iter()
        .rev()
        .map(|e| ContEvent { index: nb - e.index, point: ContPoint { u: e.point.u, tangent: -e.point.tangent }, ..e })
        .collect();
    let offset = points.len() - 1;
    points.extend(fwd.points.into_iter().skip(1));
    events.extend(fwd.events.into_iter().map(|e| ContEvent { index: e.index + offset, ..e }));
    Ok(RawBranch { points, events, status: fwd.status })
}
