//! Gradient and communication accounting.

/// Work done on one machine.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MachineCost {
    /// Per-sample gradient evaluations.
    pub grads: u64,
    /// Direct solves of a local subproblem.
    pub exact_solves: u64,
}

/// Cumulative cost of a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CostLedger {
    pub grads_per_machine: Vec<u64>,
    pub comm_rounds: u64,
    pub floats_communicated: u64,
    pub exact_solve_events: u64,
}

impl CostLedger {
    pub fn new(machines: usize) -> Self {
        CostLedger {
            grads_per_machine: vec![0; machines],
            ..Default::default()
        }
    }

    pub fn charge(&mut self, machine: usize, cost: MachineCost) {
        self.grads_per_machine[machine] += cost.grads;
        self.exact_solve_events += cost.exact_solves;
    }

    /// One synchronization: every machine uploads a `d`-vector and receives one back.
    pub fn synchronize(&mut self, d: usize) {
        self.comm_rounds += 1;
        self.floats_communicated += 2 * (self.grads_per_machine.len() * d) as u64;
    }

    pub fn max_grads_per_machine(&self) -> u64 {
        self.grads_per_machine.iter().copied().max().unwrap_or(0)
    }
}
