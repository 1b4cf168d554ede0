//! Greedy mode reduction.
//!
//! Every region starts at the top cognitive mode. While the primary rate is
//! short and power is over budget, the change with the largest power saving
//! per unit of rate among those that help the primary is taken (part 1).
//! With only the rate short, the change with the best primary gain per unit
//! of cognitive rate is taken (part 2). With only power over budget,
//! single-step reductions with the largest power saving per unit rate are
//! taken (part 3). Running averages are updated incrementally and audited
//! against a full recomputation after every step.

use super::{
    decision_variables, policy_averages, Averages, Feasibility, Instance, PolicyAssignment,
    ProblemSpec,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Part {
    /// Both constraints violated; maximize `d3`.
    Both,
    /// Only the rate constraint violated; maximize `d1`.
    Rate,
    /// Only the power constraint violated; maximize `d2(., 1)`.
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub part: Part,
    pub region: usize,
    pub from: usize,
    pub to: usize,
    /// Value of the decision variable that selected this change.
    pub score: f64,
    /// Running averages after the change.
    pub averages: Averages,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
    /// Power-effective changes in a region whose `d2` exceeded that of an
    /// earlier power-effective change in the same region.
    pub ordering_violations: usize,
    /// Largest relative gap between running and recomputed averages.
    pub max_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyRun {
    pub outcome: Feasibility<PolicyAssignment>,
    pub trace: Trace,
}

const DRIFT_TOL: f64 = 1e-9;

struct State<'a> {
    inst: &'a Instance,
    spec: &'a ProblemSpec,
    modes: Vec<usize>,
    avg: Averages,
    trace: Trace,
    last_power_score: Vec<Option<f64>>,
}

impl<'a> State<'a> {
    fn rate_ok(&self) -> bool {
        self.spec.rate_ok(self.avg.k1)
    }

    fn power_ok(&self) -> bool {
        self.spec.power_ok(self.avg.p2)
    }

    /// Move region `i` to mode `to`, updating the running averages.
    fn apply(&mut self, part: Part, i: usize, to: usize, score: f64) -> Result<()> {
        let inst = self.inst;
        let from = self.modes[i];
        let pr = inst.regions[i].mass;
        let p = inst.regions[i].norm_power.finite().ok_or_else(|| {
            Error::ContractViolation(format!("greedy touched divergent region {i}"))
        })?;
        self.avg.k1 -= (inst.primary_rate(i, from) - inst.primary_rate(i, to)) * pr;
        self.avg.p2 -=
            self.spec.primary_power * (inst.cognitive[from] - inst.cognitive[to]) * pr * p;
        self.avg.k2 -= (inst.rates[from] - inst.rates[to]) * pr;
        self.modes[i] = to;

        if part == Part::Power {
            if let Some(prev) = self.last_power_score[i] {
                if score > prev * (1.0 + 1e-12) {
                    self.trace.ordering_violations += 1;
                }
            }
            self.last_power_score[i] = Some(score);
        }
        self.trace.steps.push(TraceStep {
            part,
            region: i,
            from,
            to,
            score,
            averages: self.avg,
        });
        self.audit()
    }

    fn audit(&mut self) -> Result<()> {
        let fresh = policy_averages(self.inst, &self.modes, self.spec.primary_power)?;
        for (name, run, exact) in [
            ("k1avg", self.avg.k1, fresh.k1),
            ("k2avg", self.avg.k2, fresh.k2),
            ("p2avg", self.avg.p2, fresh.p2),
        ] {
            let drift = (run - exact).abs() / exact.abs().max(1.0);
            self.trace.max_drift = self.trace.max_drift.max(drift);
            if drift > DRIFT_TOL {
                return Err(Error::ConsistencyFault(format!(
                    "{name} running {run} vs recomputed {exact} after {} steps",
                    self.trace.steps.len()
                )));
            }
        }
        Ok(())
    }

    fn score(&self, part: Part, i: usize) -> Result<f64> {
        if !self.inst.eligible(i) {
            return Ok(0.0);
        }
        let dv = decision_variables(self.inst, i, self.modes[i])?;
        Ok(match part {
            Part::Both => dv.d3,
            Part::Rate => dv.d1,
            Part::Power => dv.d2,
        })
    }

    /// Run one part until its entry condition no longer holds. Returns
    /// `false` when no admissible change is left.
    fn run_part(&mut self, part: Part) -> Result<bool> {
        let mut scores = (0..self.inst.len())
            .map(|i| self.score(part, i))
            .collect::<Result<Vec<_>>>()?;
        loop {
            // Lowest index wins ties.
            let (best, top) = scores
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
            if !(top > 0.0) {
                return Ok(false);
            }
            let n = self.modes[best];
            let to = match part {
                Part::Power => n - 1,
                Part::Both | Part::Rate => {
                    let t = decision_variables(self.inst, best, n)?.t.ok_or_else(|| {
                        Error::ContractViolation(format!("positive score without t in region {best}"))
                    })?;
                    n - t
                }
            };
            self.apply(part, best, to, top)?;
            scores[best] = self.score(part, best)?;
            let stay = match part {
                Part::Both => !self.rate_ok() && !self.power_ok(),
                Part::Rate => !self.rate_ok(),
                Part::Power => !self.power_ok(),
            };
            if !stay {
                return Ok(true);
            }
        }
    }
}

/// Greedy solution of the variable-power problem.
pub fn greedy_optimize(instance: &Instance, spec: &ProblemSpec) -> Result<GreedyRun> {
    let n = instance.modes();
    let modes: Vec<usize> = (0..instance.len())
        .map(|i| if instance.eligible(i) { n } else { 0 })
        .collect();
    let avg = policy_averages(instance, &modes, spec.primary_power)?;
    let mut st = State {
        inst: instance,
        spec,
        modes,
        avg,
        trace: Trace::default(),
        last_power_score: vec![None; instance.len()],
    };

    let infeasible = |st: State, why: &str| GreedyRun {
        outcome: Feasibility::Infeasible {
            reason: format!(
                "{why}; k1avg {:.6} vs E1 {:.6}, p2avg {:.6} vs P2max {:.6}",
                st.avg.k1, st.spec.required_primary_rate, st.avg.p2, st.spec.power_budget
            ),
        },
        trace: st.trace,
    };

    loop {
        let part = match (st.rate_ok(), st.power_ok()) {
            (true, true) => break,
            (false, false) => Part::Both,
            (false, true) => Part::Rate,
            (true, false) => Part::Power,
        };
        if !st.run_part(part)? {
            let why = match part {
                Part::Both | Part::Rate => "no reduction raises the primary rate",
                Part::Power => "no reduction lowers the cognitive power",
            };
            return Ok(infeasible(st, why));
        }
        // After part 3 a drop to silence can lower the primary rate back
        // below E1, so every part returns to the classification step.
    }

    let iterations = st.trace.steps.len();
    let policy = PolicyAssignment::from_modes(instance, st.modes, spec.primary_power, iterations)?;
    Ok(GreedyRun {
        outcome: Feasibility::Feasible(policy),
        trace: st.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;
    use crate::regions::NormPower;

    fn two_region() -> Instance {
        let th = thresholds(&[0.0, 1.0, 2.0], &[0.0, 1.0, 3.0]);
        Instance::new(
            vec![
                region(0, 0.5, 1.0, 2.0, vec![0, 1, 0]),
                region(1, 0.5, 2.0, 2.0, vec![0, 2, 1]),
            ],
            &th,
        )
        .unwrap()
    }

    #[test]
    fn unconstrained_takes_top_mode() {
        let inst = two_region();
        let run = greedy_optimize(&inst, &spec(0.0, 1e12)).unwrap();
        let p = run.outcome.feasible().unwrap();
        assert_eq!(p.cognitive_modes, vec![2, 2]);
        assert_eq!(p.iterations, 0);
        assert!(run.trace.steps.is_empty());
    }

    #[test]
    fn divergent_region_stays_silent() {
        let mut inst = two_region();
        inst.regions[0].norm_power = NormPower::Divergent;
        let run = greedy_optimize(&inst, &spec(0.0, 1e12)).unwrap();
        assert_eq!(run.outcome.feasible().unwrap().cognitive_modes, vec![0, 2]);
    }

    #[test]
    fn e1_above_top_rate_is_infeasible() {
        let inst = two_region();
        let run = greedy_optimize(&inst, &spec(2.5, 1e12)).unwrap();
        assert!(!run.outcome.is_feasible());
    }

    #[test]
    fn power_only_part_reduces_power_region_first() {
        let inst = two_region();
        // All-top power = 3*1*0.5 + 3*2*0.5 = 4.5; budget 3.5 needs one step.
        let run = greedy_optimize(&inst, &spec(0.0, 3.5)).unwrap();
        let p = run.outcome.feasible().unwrap();
        assert_eq!(p.cognitive_modes, vec![2, 1]);
        assert!(p.averages.p2 <= 3.5 + 1e-12);
        assert!(run.trace.steps.iter().all(|s| s.part == Part::Power));
    }

    #[test]
    fn rate_part_raises_primary() {
        let inst = two_region();
        // All-top k1 = 0 + 0.5*1 = 0.5; E1 = 1 needs both regions lowered.
        let run = greedy_optimize(&inst, &spec(1.0, 1e12)).unwrap();
        let p = run.outcome.feasible().unwrap();
        assert!(p.averages.k1 >= 1.0 - 1e-12);
        assert!(run.trace.steps.iter().all(|s| s.part == Part::Rate));
        assert!(run.trace.max_drift <= 1e-12);
    }
}
