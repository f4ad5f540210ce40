use std::f64::consts::PI;
use std::time::Instant;

use serde::Serialize;

use super::config::{Config, Stage};
use super::dataset::{BranchInfo, FrcDataset, Metadata, Row, SeedRef, Stability, Timings, Tolerances};
use crate::cont::{continue_equilibria, Branch, EqPoint, EventKind};
use crate::lift::{amplitude_inf, classify_rotation, eq_to_po, po_to_torus2, torus2_to_torus3, PhysicalTorus};
use crate::model::{assemble_first_order, FirstOrderSystem, MechSystem};
use crate::po::{collocate_po, continue_po, hb_switch, PoSeed, PoSolution};
use crate::rom::Rom;
use crate::spectral::{eig_pair, Spectrum};
use crate::ssm::{reduce, ReducedModel};
use crate::tor2::{continue_torus, tr_switch, TorusSolution};
use crate::verify::{mle, verify_torus, SimReport, Verdict};
use crate::{Error, Result};

/// Denominator cap when classifying rotation numbers as rational.
const ROTATION_CAP: u64 = 1000;

struct Seeded<P> {
    seed: Option<SeedRef>,
    warning: Option<String>,
    branch: Branch<P>,
}

/// Pipeline state for one config. Results of each stage are kept so later
/// stages (and repeated requests) reuse them.
pub struct Session {
    pub cfg: Config,
    pub mech: MechSystem,
    pub sys: FirstOrderSystem,
    rm: Option<ReducedModel>,
    rom: Option<Rom>,
    eq: Option<Seeded<EqPoint>>,
    po: Option<Vec<Seeded<PoSolution>>>,
    tori: Option<Vec<Seeded<TorusSolution>>>,
    timings: Timings,
    started: Instant,
}

fn timed<T>(acc: &mut f64, f: impl FnOnce() -> T) -> T {
    let t0 = Instant::now();
    let out = f();
    *acc += t0.elapsed().as_secs_f64();
    out
}

/// Summary of one verification run.
#[derive(Clone, Debug, Serialize)]
pub struct VerifyRecord {
    pub omega: f64,
    pub eps: f64,
    pub period: f64,
    pub stable: bool,
    pub mle: f64,
    pub verdict: Verdict,
    pub cycles: usize,
    pub m: u64,
    pub distance_max: f64,
    pub distance_max_all: f64,
    pub tube: f64,
    pub steady_amplitude: f64,
}

impl VerifyRecord {
    fn new(po: &PoSolution, rep: &SimReport) -> Result<Self> {
        Ok(Self {
            omega: po.params[0],
            eps: po.params[1],
            period: po.period,
            stable: po.stable,
            mle: mle(&po.multipliers, po.period)?,
            verdict: rep.verdict,
            cycles: rep.cycles,
            m: rep.m,
            distance_max: rep.distance_max,
            distance_max_all: rep.distance_max_all,
            tube: rep.tube,
            steady_amplitude: rep.steady_amplitude,
        })
    }
}

impl Session {
    pub fn new(cfg: Config) -> Result<Self> {
        let started = Instant::now();
        cfg.validate()?;
        let mut setup = 0.0;
        let (mech, sys) = timed(&mut setup, || -> Result<_> {
            let mech = cfg.build_system()?;
            let sys = assemble_first_order(&mech)?;
            Ok((mech, sys))
        })?;
        if let Some(&k) = cfg.modes.iter().find(|&&k| 2 * (k + 1) > sys.dim()) {
            return Err(Error::Config(format!("master mode {k} out of range for {} DOFs", mech.m.nrows())));
        }
        let timings = Timings { setup, ..Default::default() };
        Ok(Self { cfg, mech, sys, rm: None, rom: None, eq: None, po: None, tori: None, timings, started })
    }

    /// Timing block so far; `other` absorbs time outside the named parts.
    pub fn timings(&self) -> Timings {
        let mut t = self.timings.clone();
        t.total = self.started.elapsed().as_secs_f64();
        t.other = 0.0;
        t.other = (t.total - t.parts_sum()).max(0.0);
        t
    }

    /// Eigenpairs up to the highest master mode.
    pub fn spectrum(&mut self) -> Result<Spectrum> {
        let top = self.cfg.modes.iter().max().copied().unwrap_or(0);
        let k = (2 * (top + 1)).min(self.sys.dim());
        let sys = &self.sys;
        timed(&mut self.timings.autonomous_ssm, || eig_pair(sys, k))
    }

    pub fn reduced(&mut self) -> Result<&ReducedModel> {
        if self.rm.is_none() {
            let (sys, cfg) = (&self.sys, &self.cfg);
            let rm = timed(&mut self.timings.autonomous_ssm, || reduce(sys, &cfg.modes, cfg.order, cfg.resonance, cfg.omega_ref))?;
            self.rom = Some(Rom::new(&rm));
            self.rm = Some(rm);
        }
        Ok(self.rm.as_ref().unwrap())
    }

    fn rom(&mut self) -> Result<&Rom> {
        self.reduced()?;
        Ok(self.rom.as_ref().unwrap())
    }

    fn ensure_nonauto(&mut self, omegas: &[f64]) -> Result<()> {
        self.reduced()?;
        let (sys, rm) = (&self.sys, self.rm.as_mut().unwrap());
        timed(&mut self.timings.nonautonomous_ssm, || rm.solve_nonauto(sys, omegas))
    }

    fn equilibria(&mut self) -> Result<&Branch<EqPoint>> {
        if self.eq.is_none() {
            self.rom()?;
            let (rom, cfg) = (self.rom.as_ref().unwrap(), &self.cfg);
            let br = timed(&mut self.timings.reduced_dynamics, || continue_equilibria(rom, cfg.omega_range, cfg.eps, &cfg.continuation))?;
            self.eq = Some(Seeded { seed: None, warning: None, branch: br });
        }
        Ok(&self.eq.as_ref().unwrap().branch)
    }

    /// One cycle branch per HB event, skipping HB points an earlier branch already ended at.
    fn cycles(&mut self) -> Result<&[Seeded<PoSolution>]> {
        if self.po.is_none() {
            let hbs: Vec<(usize, EqPoint)> = self
                .equilibria()?
                .events
                .iter()
                .enumerate()
                .filter(|(_, e)| e.kind == EventKind::HB)
                .map(|(i, e)| (i, e.point.clone()))
                .collect();
            if hbs.is_empty() {
                return Err(Error::Missing("periodic-orbit stage needs an HB event on the equilibrium branch".into()));
            }
            let (rom, cfg) = (self.rom.as_ref().unwrap(), &self.cfg);
            let mut out: Vec<Seeded<PoSolution>> = Vec::new();
            for (idx, hb) in hbs {
                let tol = 1e-3 * (cfg.omega_range.1 - cfg.omega_range.0);
                let covered = out.iter().any(|s| s.branch.points.last().is_some_and(|p| (p.params[0] - hb.omega).abs() < tol && p.size < 0.1 * branch_size(&s.branch)));
                if covered {
                    continue;
                }
                let br = timed(&mut self.timings.reduced_dynamics, || -> Result<_> {
                    let seed = hb_switch(rom, &hb.x, &[hb.omega, cfg.eps], cfg.po.hopf_delta, cfg.mesh)?;
                    continue_po(rom, &seed, 0, cfg.omega_range, &cfg.po)
                })?;
                let seed = SeedRef { stage: Stage::Equilibrium, branch: 0, event: idx, kind: EventKind::HB, omega: hb.omega };
                out.push(Seeded { seed: Some(seed), warning: None, branch: br });
            }
            self.po = Some(out);
        }
        Ok(self.po.as_deref().unwrap())
    }

    fn tori(&mut self) -> Result<&[Seeded<TorusSolution>]> {
        if self.tori.is_none() {
            let trs: Vec<(usize, usize, PoSolution)> = self
                .cycles()?
                .iter()
                .enumerate()
                .flat_map(|(b, s)| {
                    s.branch.events.iter().enumerate().filter(|(_, e)| e.kind == EventKind::TR).map(move |(i, e)| (b, i, e.point.clone()))
                })
                .collect();
            if trs.is_empty() {
                return Err(Error::Missing("torus stage needs a TR event on a periodic-orbit branch".into()));
            }
            let (rom, cfg) = (self.rom.as_ref().unwrap(), &self.cfg);
            let mut out = Vec::new();
            for (b, idx, po) in trs {
                let ts = &cfg.torus;
                let (warning, br) = timed(&mut self.timings.reduced_dynamics, || -> Result<_> {
                    let seed = tr_switch(rom, &po, ts.n_h, ts.delta, ts.options.steps)?;
                    Ok((seed.warning.clone(), continue_torus(rom, &seed, 0, cfg.omega_range, &ts.options)?))
                })?;
                let seed = SeedRef { stage: Stage::Po, branch: b, event: idx, kind: EventKind::TR, omega: po.params[0] };
                out.push(Seeded { seed: Some(seed), warning, branch: br });
            }
            self.tori = Some(out);
        }
        Ok(self.tori.as_deref().unwrap())
    }

    /// Run one stage (and whatever it depends on) and tabulate it.
    pub fn dataset(&mut self, stage: Stage) -> Result<FrcDataset> {
        self.reduced()?;
        let (rows, branches) = match stage {
            Stage::Equilibrium => {
                self.equilibria()?;
                let eq = self.eq.take().unwrap();
                let res = self.tabulate(std::slice::from_ref(&eq), |p| p.omega, Self::eq_row);
                self.eq = Some(eq);
                res?
            }
            Stage::Po => {
                self.cycles()?;
                let po = self.po.take().unwrap();
                let res = self.tabulate(&po, |p| p.params[0], Self::po_row);
                self.po = Some(po);
                res?
            }
            Stage::Torus2 => {
                self.tori()?;
                let tori = self.tori.take().unwrap();
                let res = self.tabulate(&tori, |p| p.params[0], Self::torus_row);
                self.tori = Some(tori);
                res?
            }
        };
        Ok(FrcDataset { stage, rows, metadata: self.metadata(branches) })
    }

    fn tabulate<P>(
        &mut self,
        seeded: &[Seeded<P>],
        omega: impl Fn(&P) -> f64,
        row: impl Fn(&Self, &P) -> Result<Row>,
    ) -> Result<(Vec<Row>, Vec<BranchInfo>)> {
        let omegas: Vec<f64> = seeded
            .iter()
            .flat_map(|s| s.branch.points.iter().chain(s.branch.events.iter().map(|e| &e.point)))
            .map(&omega)
            .collect();
        self.ensure_nonauto(&omegas)?;
        let mut lift_time = 0.0;
        let mut rows = Vec::new();
        let mut info = Vec::new();
        for s in seeded {
            let start = rows.len();
            // Events sit between points `index - 1` and `index`.
            let mut events = s.branch.events.iter().filter(|e| e.kind != EventKind::EP).peekable();
            for (i, p) in s.branch.points.iter().enumerate() {
                while let Some(e) = events.next_if(|e| e.index <= i) {
                    let mut r = timed(&mut lift_time, || row(self, &e.point))?;
                    r.event = Some(e.kind);
                    rows.push(r);
                }
                rows.push(timed(&mut lift_time, || row(self, p))?);
            }
            for e in events {
                let mut r = timed(&mut lift_time, || row(self, &e.point))?;
                r.event = Some(e.kind);
                rows.push(r);
            }
            info.push(BranchInfo { rows: (start, rows.len()), seed: s.seed.clone(), status: format!("{:?}", s.branch.status), warning: s.warning.clone() });
        }
        self.timings.lift += lift_time;
        Ok((rows, info))
    }

    fn eq_row(&self, p: &EqPoint) -> Result<Row> {
        let orb = eq_to_po(&self.sys, self.rm.as_ref().unwrap(), &p.x, p.omega, p.eps, self.cfg.n_pt)?;
        Ok(Row {
            omega: p.omega,
            eps: p.eps,
            ts: None,
            om_s: None,
            om1s: None,
            om2s: None,
            rho_rot: None,
            amps: self.cfg.outputs.iter().map(|&d| orb.traj.amplitude(d)).collect(),
            stability: Stability::of(Some(p.stable)),
            event: None,
        })
    }

    fn po_row(&self, po: &PoSolution) -> Result<Row> {
        let rm = self.rm.as_ref().unwrap();
        let tor = po_to_torus2(&self.sys, rm, po, self.cfg.n_pt)?;
        let (rho, _) = classify_rotation(po.period, po.params[0], rm.master.r_d_f64(), ROTATION_CAP);
        Ok(Row {
            omega: po.params[0],
            eps: po.params[1],
            ts: Some(po.period),
            om_s: Some(2.0 * PI / po.period),
            om1s: None,
            om2s: None,
            rho_rot: Some(rho),
            amps: self.amps(&tor),
            stability: Stability::of(Some(po.stable)),
            event: None,
        })
    }

    fn torus_row(&self, tor: &TorusSolution) -> Result<Row> {
        let phys = torus2_to_torus3(&self.sys, self.rm.as_ref().unwrap(), tor, self.cfg.torus.n_t)?;
        Ok(Row {
            omega: tor.params[0],
            eps: tor.params[1],
            ts: None,
            om_s: None,
            om1s: Some(tor.omega1()),
            om2s: Some(tor.omega2()),
            rho_rot: Some(tor.rho),
            amps: self.amps(&phys),
            stability: Stability::Unknown,
            event: None,
        })
    }

    fn amps(&self, tor: &PhysicalTorus) -> Vec<f64> {
        self.cfg.outputs.iter().map(|&d| amplitude_inf(&tor.trajectories, d)).collect()
    }

    fn metadata(&self, branches: Vec<BranchInfo>) -> Metadata {
        let rm = self.rm.as_ref().unwrap();
        let cfg = &self.cfg;
        Metadata {
            version: super::config::CONFIG_VERSION,
            order: cfg.order,
            modes: cfg.modes.clone(),
            outputs: cfg.outputs.clone(),
            omega_range: cfg.omega_range,
            eps: cfg.eps,
            r: rm.master.r_f64(),
            r_d: rm.master.r_d_f64(),
            conventions: vec![
                "load eps (f_ext e^{i Omega t} + c.c.) plus the polynomial force".into(),
                "amp_<dof>: max |x_dof| over the lifted response".into(),
                "om_s = 2 pi / Ts of the reduced cycle; rho_rot = om_s / (r_d Omega) on cycles, om1s / om2s on tori".into(),
                "rows follow branch arclength; event rows sit between the points they separate".into(),
                "timings in seconds".into(),
            ],
            tolerances: Tolerances {
                continuation: cfg.continuation.clone(),
                po: cfg.po.clone(),
                mesh: cfg.mesh,
                torus: cfg.torus.clone(),
                resonance: cfg.resonance,
                n_pt: cfg.n_pt,
            },
            branches,
            timings: self.timings(),
        }
    }

    /// Lifted physical invariant sets of the periodic-orbit stage at the given frequencies.
    pub fn lift_cycles(&mut self, omegas: &[f64]) -> Result<Vec<(PoSolution, PhysicalTorus)>> {
        let cycles = self.cycles_at(omegas)?;
        self.ensure_nonauto(omegas)?;
        let (sys, rm, n_pt) = (&self.sys, self.rm.as_ref().unwrap(), self.cfg.n_pt);
        let mut out = Vec::new();
        for po in cycles {
            let tor = timed(&mut self.timings.lift, || po_to_torus2(sys, rm, &po, n_pt))?;
            out.push((po, tor));
        }
        Ok(out)
    }

    /// Corrected cycles at each frequency: the first crossing of each branch.
    fn cycles_at(&mut self, omegas: &[f64]) -> Result<Vec<PoSolution>> {
        self.cycles()?;
        let (rom, po) = (self.rom.as_ref().unwrap(), self.po.as_ref().unwrap());
        let mut out = Vec::new();
        for &om in omegas {
            let near = po
                .iter()
                .flat_map(|s| s.branch.points.windows(2))
                .find(|w| (w[0].params[0] - om) * (w[1].params[0] - om) <= 0.0)
                .ok_or_else(|| Error::Missing(format!("no cycle at Omega = {om}")))?;
            let mut seed = PoSeed::from_solution(&near[0]);
            seed.params[0] = om;
            out.push(timed(&mut self.timings.reduced_dynamics, || collocate_po(rom, &seed))?);
        }
        Ok(out)
    }

    /// Integrate the full system next to each lifted torus listed in the config.
    pub fn verify(&mut self) -> Result<Vec<VerifyRecord>> {
        let omegas = self.cfg.verify.omegas.clone();
        if omegas.is_empty() {
            return Err(Error::Config("verify.omegas is empty".into()));
        }
        let lifted = self.lift_cycles(&omegas)?;
        let mut out = Vec::new();
        for (po, tor) in &lifted {
            let (mech, settings) = (&self.mech, &self.cfg.verify.settings);
            let rep = timed(&mut self.timings.verify, || verify_torus(tor, mech, settings))?;
            out.push(VerifyRecord::new(po, &rep)?);
        }
        Ok(out)
    }
}

fn branch_size(br: &Branch<PoSolution>) -> f64 {
    br.points.iter().map(|p| p.size).fold(0.0, f64::max)
}

/// Run every stage in the config, in order, sharing one reduced model.
pub fn run_frc(cfg: &Config) -> Result<Vec<FrcDataset>> {
    let mut stages = cfg.stages.clone();
    stages.sort();
    let mut s = Session::new(cfg.clone())?;
    let mut out = Vec::new();
    for st in stages {
        out.push(s.dataset(st)?);
    }
    // Every dataset carries the timing block of the whole run.
    let t = s.timings();
    for d in &mut out {
        d.metadata.timings = t.clone();
    }
    Ok(out)
}
