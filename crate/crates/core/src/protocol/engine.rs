//! Recursive evaluator for the protocol loss and its adjoint.
//!
//! `node` applies `U₁` to a full-register input, branches on the ancilla
//! outcome, applies the policy's feedback to the system part and either
//! scores the result (last round) or recurses with the ancillas reset. The
//! return value is the loss contribution together with the costate
//! `∂L/∂input*`, so gradients come out of a single reverse sweep per branch.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::protocol::loss::{ghz_apply, ghz_quadratic, EvalMode, Objective, Problem};
use crate::protocol::regularization::{ancilla_regularization, regularization_derivative};
use crate::protocol::spec::ProtocolSpec;
use crate::qsim::{ProbTable, StateVector};
use crate::feedback::Policy;
use crate::{Error, Result, C64, P_FLOOR};

/// Which gradient blocks to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Request {
    pub theta1: bool,
    pub policy: bool,
}

impl Request {
    pub const VALUE: Request = Request { theta1: false, policy: false };
    pub const FULL: Request = Request { theta1: true, policy: true };
    pub const POLICY: Request = Request { theta1: false, policy: true };

    fn any(self) -> bool {
        self.theta1 || self.policy
    }
}

/// Result of one loss evaluation.
#[derive(Clone, Debug)]
pub struct LossEval {
    /// `objective + weight · regularization`.
    pub loss: f64,
    pub objective: f64,
    /// Unweighted `l_R` of the first-round outcome table (0 when disabled).
    pub regularization: f64,
    /// Infidelity against the problem's target, whatever the objective.
    pub infidelity: f64,
    /// First-round outcome distribution.
    pub table: ProbTable,
    /// First-round `U₁|0⟩`.
    pub psi1: StateVector,
    pub d_theta1: Option<Vec<f64>>,
    /// Policy gradients, concatenated over rounds.
    pub d_policy: Option<Vec<f64>>,
}

struct Acc {
    value: f64,
    infid: f64,
    slot_grad: Vec<f64>,
    policy_grad: Vec<Vec<f64>>,
}

impl Acc {
    fn new(n_slots: usize, policies: &[Policy], req: Request) -> Self {
        Self {
            value: 0.0,
            infid: 0.0,
            slot_grad: if req.theta1 { vec![0.0; n_slots] } else { Vec::new() },
            policy_grad: if req.policy {
                policies.iter().map(|p| vec![0.0; p.n_weights()]).collect()
            } else {
                Vec::new()
            },
        }
    }

    fn merge(&mut self, o: Acc) {
        self.value += o.value;
        self.infid += o.infid;
        for (a, b) in self.slot_grad.iter_mut().zip(o.slot_grad) {
            *a += b;
        }
        for (pa, pb) in self.policy_grad.iter_mut().zip(o.policy_grad) {
            for (a, b) in pa.iter_mut().zip(pb) {
                *a += b;
            }
        }
    }
}

struct Engine<'a> {
    problem: &'a Problem,
    spec: &'a ProtocolSpec,
    policies: &'a [Policy],
    slots1: Vec<f64>,
    req: Request,
    /// `Some(B)` in sampled mode.
    batch: Option<usize>,
    n_sys: f64,
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

fn zeros(n: usize) -> Vec<C64> {
    vec![C64::new(0.0, 0.0); n]
}

impl Engine<'_> {
    /// Loss contribution, reported infidelity and costate of one final
    /// branch. `weight` is `count / B` in sampled mode.
    fn leaf(&self, chi: &[C64], weight: Option<f64>) -> (f64, f64, Vec<C64>) {
        let target = &self.problem.target;
        let p = norm_sqr(chi);
        let a = target.weight(chi);
        let need_mu = self.req.any();
        let mut pi_chi = Vec::new();
        let needs_pi = need_mu
            && matches!(self.problem.loss.objective, Objective::Fidelity | Objective::PerSite);
        if needs_pi {
            pi_chi = zeros(chi.len());
            target.project_into(chi, &mut pi_chi);
        }
        match weight {
            None => {
                let infid = p - a;
                let (v, mu) = match &self.problem.loss.objective {
                    Objective::Fidelity => {
                        let mu = if need_mu {
                            chi.iter().zip(&pi_chi).map(|(c, q)| c - q).collect()
                        } else {
                            Vec::new()
                        };
                        (p - a, mu)
                    }
                    Objective::PerSite => {
                        let n = self.n_sys;
                        let f = a / p;
                        let v = p - p * f.powf(1.0 / n);
                        let mu = if need_mu {
                            let fc = f.max(P_FLOOR);
                            let c1 = 1.0 - (1.0 - 1.0 / n) * fc.powf(1.0 / n);
                            let c2 = fc.powf(1.0 / n - 1.0) / n;
                            chi.iter().zip(&pi_chi).map(|(c, q)| c * c1 - q * c2).collect()
                        } else {
                            Vec::new()
                        };
                        (v, mu)
                    }
                    Objective::GhzLambda(l) => {
                        let mu = if need_mu { ghz_apply(chi, *l) } else { Vec::new() };
                        (ghz_quadratic(chi, *l), mu)
                    }
                    Objective::Energy(h) => {
                        let hchi = h.apply(chi);
                        let v = hchi.iter().zip(chi).map(|(x, c)| (c.conj() * x).re).sum();
                        (v, if need_mu { hchi } else { Vec::new() })
                    }
                };
                (v, infid, mu)
            }
            Some(w) => {
                let f = a / p;
                let infid = w * (1.0 - f);
                let (l, mu) = match &self.problem.loss.objective {
                    Objective::Fidelity => {
                        let mu = if need_mu {
                            chi.iter()
                                .zip(&pi_chi)
                                .map(|(c, q)| -(q - c * f) / p)
                                .collect()
                        } else {
                            Vec::new()
                        };
                        (1.0 - f, mu)
                    }
                    Objective::PerSite => {
                        let n = self.n_sys;
                        let mu = if need_mu {
                            let fc = f.max(P_FLOOR);
                            let c = fc.powf(1.0 / n - 1.0) / n / p;
                            chi.iter().zip(&pi_chi).map(|(x, q)| -(q - x * f) * c).collect()
                        } else {
                            Vec::new()
                        };
                        (1.0 - f.powf(1.0 / n), mu)
                    }
                    Objective::GhzLambda(lam) => {
                        let l = ghz_quadratic(chi, *lam) / p;
                        let mu = if need_mu {
                            ghz_apply(chi, *lam)
                                .iter()
                                .zip(chi)
                                .map(|(k, c)| (k - c * l) / p)
                                .collect()
                        } else {
                            Vec::new()
                        };
                        (l, mu)
                    }
                    Objective::Energy(h) => {
                        let hchi = h.apply(chi);
                        let l = hchi.iter().zip(chi).map(|(x, c)| (c.conj() * x).re).sum::<f64>() / p;
                        let mu = if need_mu {
                            hchi.iter().zip(chi).map(|(k, c)| (k - c * l) / p).collect()
                        } else {
                            Vec::new()
                        };
                        (l, mu)
                    }
                };
                let mu = mu.into_iter().map(|z: C64| z * w).collect();
                (w * l, infid, mu)
            }
        }
    }

    /// Branch `m` of `psi` (post-`U₁` register) at `round`: feedback, then
    /// leaf or recursion. Returns the system costate of the branch.
    fn branch(
        &self,
        psi: &[C64],
        m: usize,
        round: usize,
        count: Option<usize>,
        rng: &mut Option<ChaCha8Rng>,
        acc: &mut Acc,
    ) -> Result<Vec<C64>> {
        let mut chi = self.spec.extract(psi, m);
        let (rec, slots2) = self.spec.feedback(&self.policies[round], m, &mut chi)?;
        let last = round + 1 == self.spec.rounds();
        let mut mu = if last {
            let w = count.map(|c| c as f64 / self.batch.expect("sampled") as f64);
            let (v, infid, mu) = self.leaf(&chi, w);
            acc.value += v;
            acc.infid += infid;
            mu
        } else {
            let lam_in = self.node(self.spec.embed(&chi), round + 1, count, rng, acc)?;
            match lam_in {
                Some(l) => self.spec.extract(&l, 0),
                None => Vec::new(),
            }
        };
        if !self.req.any() {
            return Ok(Vec::new());
        }
        let mut d2 = vec![0.0; slots2.len()];
        self.spec.prog2().backward(&mut chi, &mut mu, &slots2, &mut d2);
        if self.req.policy {
            self.policies[round].backprop(self.spec.context(), &rec, &d2, &mut acc.policy_grad[round])?;
        }
        Ok(mu)
    }

    /// Visits to make from `psi` at `round`: every outcome above the floor in
    /// exact mode, a multinomial split of `count` draws in sampled mode.
    fn visits<R: Rng>(
        &self,
        probs: &[f64],
        count: Option<usize>,
        rng: Option<&mut R>,
    ) -> Result<Vec<(usize, Option<usize>)>> {
        match count {
            None => Ok(probs
                .iter()
                .enumerate()
                .filter(|(_, &p)| p >= P_FLOOR)
                .map(|(m, _)| (m, None))
                .collect()),
            Some(c) => {
                let rng = rng.ok_or_else(|| {
                    Error::InvalidSpec("sampled evaluation needs a random generator".into())
                })?;
                let w: Vec<f64> = probs.iter().map(|&p| if p < P_FLOOR { 0.0 } else { p }).collect();
                let dist = WeightedIndex::new(&w)
                    .map_err(|e| Error::NumericAbort(format!("outcome distribution: {e}")))?;
                let mut counts = vec![0usize; probs.len()];
                for _ in 0..c {
                    counts[dist.sample(rng)] += 1;
                }
                Ok(counts
                    .into_iter()
                    .enumerate()
                    .filter(|&(_, k)| k > 0)
                    .map(|(m, k)| (m, Some(k)))
                    .collect())
            }
        }
    }

    fn outcome_probs(&self, psi: &[C64]) -> Vec<f64> {
        (0..1usize << self.spec.layout().n_ancilla())
            .map(|m| norm_sqr(&self.spec.extract(psi, m)))
            .collect()
    }

    /// Later rounds, run sequentially. Returns the costate of `input`.
    fn node(
        &self,
        input: Vec<C64>,
        round: usize,
        count: Option<usize>,
        rng: &mut Option<ChaCha8Rng>,
        acc: &mut Acc,
    ) -> Result<Option<Vec<C64>>> {
        let mut psi = input;
        self.spec.prog1().apply(&mut psi, &self.slots1);
        let probs = self.outcome_probs(&psi);
        let mut lam = zeros(psi.len());
        for (m, c) in self.visits(&probs, count, rng.as_mut())? {
            let mu = self.branch(&psi, m, round, c, rng, acc)?;
            if self.req.any() {
                self.spec.scatter_add(&mut lam, m, &mu);
            }
        }
        if !self.req.any() {
            return Ok(None);
        }
        let mut g = vec![0.0; self.slots1.len()];
        self.spec.prog1().backward(&mut psi, &mut lam, &self.slots1, &mut g);
        if self.req.theta1 {
            for (a, b) in acc.slot_grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        Ok(Some(lam))
    }
}

/// Evaluates a problem. `psi1`, when given, replaces `U₁(θ₁)|0⟩` for the
/// first round (the caller guarantees it matches `theta1`).
pub(crate) fn evaluate_with<R: Rng>(
    problem: &Problem,
    theta1: &[f64],
    policies: &[Policy],
    rng: Option<&mut R>,
    req: Request,
    psi1: Option<&StateVector>,
) -> Result<LossEval> {
    let spec = &problem.spec;
    spec.check_policies(policies)?;
    let slots1 = spec.u1().expand(theta1)?;
    let batch = match problem.loss.mode {
        EvalMode::Exact => None,
        EvalMode::Sampled { batch } => Some(batch),
    };
    let engine = Engine {
        problem,
        spec,
        policies,
        slots1,
        req,
        batch,
        n_sys: spec.layout().n_system() as f64,
    };
    let psi: Vec<C64> = match psi1 {
        Some(s) => s.amplitudes().to_vec(),
        None => spec.prepare(theta1)?.into_amplitudes(),
    };
    let probs = engine.outcome_probs(&psi);
    let n_anc = spec.layout().n_ancilla();
    let table = ProbTable::new(probs.clone(), n_anc);
    // Each first-round visit gets its own stream for later rounds, drawn in
    // order so the result does not depend on thread scheduling.
    let (visits, seeds) = match rng {
        Some(r) => {
            let v = engine.visits(&probs, batch, Some(&mut *r))?;
            let seeds: Vec<Option<u64>> = v.iter().map(|_| Some(r.random())).collect();
            (v, seeds)
        }
        None => {
            let v = engine.visits::<ChaCha8Rng>(&probs, batch, None)?;
            let n = v.len();
            (v, vec![None; n])
        }
    };

    let n_slots = engine.slots1.len();
    let results: Vec<Result<(Acc, usize, Vec<C64>)>> = visits
        .par_iter()
        .zip(seeds.par_iter())
        .map(|(&(m, c), seed)| {
            let mut acc = Acc::new(n_slots, policies, req);
            let mut sub = seed.map(ChaCha8Rng::seed_from_u64);
            let mu = engine.branch(&psi, m, 0, c, &mut sub, &mut acc)?;
            Ok((acc, m, mu))
        })
        .collect();

    let mut total = Acc::new(n_slots, policies, req);
    let mut lam = if req.theta1 { zeros(psi.len()) } else { Vec::new() };
    for r in results {
        let (acc, m, mu) = r?;
        total.merge(acc);
        if req.theta1 {
            spec.scatter_add(&mut lam, m, &mu);
        }
    }

    let objective = total.value;
    let infidelity = total.infid;
    let (reg, weight) = match problem.loss.regularization {
        Some(r) if n_anc > 0 => (ancilla_regularization(&table, r.ratio), r.weight),
        _ => (0.0, 0.0),
    };
    let loss = objective + weight * reg;
    if !loss.is_finite() {
        return Err(Error::NumericAbort(format!("loss evaluated to {loss}")));
    }

    let d_theta1 = if req.theta1 {
        if weight > 0.0 {
            let r = problem.loss.regularization.expect("weight implies regularization");
            let dr = regularization_derivative(&table, r.ratio);
            for (m, d) in dr.into_iter().enumerate() {
                if d != 0.0 {
                    let part: Vec<C64> = spec.extract(&psi, m).iter().map(|a| a * (weight * d)).collect();
                    spec.scatter_add(&mut lam, m, &part);
                }
            }
        }
        let mut back = psi.clone();
        spec.prog1().backward(&mut back, &mut lam, &engine.slots1, &mut total.slot_grad);
        Some(spec.u1().collapse(&total.slot_grad))
    } else {
        None
    };
    let d_policy = req.policy.then(|| total.policy_grad.concat());

    let psi1 = StateVector::from_amplitudes(spec.layout(), psi)?;
    Ok(LossEval {
        loss,
        objective,
        regularization: reg,
        infidelity,
        table,
        psi1,
        d_theta1,
        d_policy,
    })
}

pub(crate) fn evaluate<R: Rng>(
    problem: &Problem,
    theta1: &[f64],
    policies: &[Policy],
    rng: Option<&mut R>,
    req: Request,
) -> Result<LossEval> {
    evaluate_with(problem, theta1, policies, rng, req, None)
}
