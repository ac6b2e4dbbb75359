//! Privacy budget series: the dilogarithm, learning-rate schedules, the cost
//! of a learning rate, and random allocation of per-slot budgets.

mod li2;
mod rba;
mod schedule;

pub use li2::{li2, li2_inv, LI2_ONE};
pub use rba::{
    rba_range_sample, rba_sample, BudgetDraw, BudgetState, RangeQueues, DEFAULT_HORIZON, DEFAULT_LAMBDA_RATE,
};
pub use schedule::{alpha, eta_from_slot_budget, optimal_eta, slot_cost, DecaySeriesConfig, EtaPair, OptimalSchedule};
