use crate::model::{CostFunction, Passenger, Scenario};

/// Offload that maximizes `p q - C(q)` over `[0, capacity]`.
///
/// A linear passenger indifferent at `p = c` contributes full capacity.
/// Passengers not local to `s` at `t` contribute nothing.
pub fn best_response(passenger: &Passenger, s: usize, t: usize, price: f64) -> f64 {
    match passenger.cost_for(s, t) {
        Some(c) => response_for(c, passenger.capacity, price),
        None => 0.0,
    }
}

pub(crate) fn response_for(cost: &CostFunction, capacity: f64, price: f64) -> f64 {
    match *cost {
        CostFunction::Quadratic { a, b } => ((price - b) / (2.0 * a)).clamp(0.0, capacity),
        CostFunction::Linear { .. } => {
            let c = cost.linear_slope().unwrap_or(0.0);
            if price >= c {
                capacity
            } else {
                0.0
            }
        }
    }
}

/// Right derivative of the best response with respect to price.
///
/// Zero on the clamped pieces and for linear costs (a step function).
pub fn response_slope(passenger: &Passenger, s: usize, t: usize, price: f64) -> f64 {
    match passenger.cost_for(s, t) {
        Some(c) => slope_for(c, passenger.capacity, price),
        None => 0.0,
    }
}

pub(crate) fn slope_for(cost: &CostFunction, capacity: f64, price: f64) -> f64 {
    match *cost {
        CostFunction::Quadratic { a, b } => {
            let q = (price - b) / (2.0 * a);
            if q >= 0.0 && q < capacity {
                1.0 / (2.0 * a)
            } else {
                0.0
            }
        }
        CostFunction::Linear { .. } => 0.0,
    }
}

/// Feedback of a set of `(cost, capacity)` passengers without building
/// per-passenger records.
pub(crate) fn feedback_for<'a>(
    members: impl Iterator<Item = (&'a CostFunction, f64)>,
    demand: f64,
    price: f64,
) -> Feedback {
    let mut fb = Feedback::default();
    let mut offload = 0.0;
    for (cost, cap) in members {
        let q = response_for(cost, cap, price);
        offload += q;
        if q > 0.0 {
            let h = slope_for(cost, cap, price);
            let g = cost.gradient(q).unwrap_or(0.0);
            fb.gradient_sum += g;
            fb.gradient_dot_slope += g * h;
            fb.slope_sum += h;
        }
    }
    fb.deficit = demand - offload > 0.0;
    fb
}

/// One passenger's reaction to a posted price.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseRecord {
    pub i: usize,
    pub s: usize,
    pub t: usize,
    pub q: f64,
    /// Marginal cost at the chosen offload.
    pub gradient: f64,
    /// Derivative of the response with respect to price.
    pub slope: f64,
    pub cost: f64,
    pub participating: bool,
}

impl ResponseRecord {
    pub fn utility(&self, price: f64) -> f64 {
        price * self.q - self.cost
    }
}

/// All local responses at one (s, t).
#[derive(Debug, Clone, PartialEq)]
pub struct StepResponse {
    pub s: usize,
    pub t: usize,
    pub price: f64,
    pub demand: f64,
    pub records: Vec<ResponseRecord>,
}

impl StepResponse {
    pub fn total_offload(&self) -> f64 {
        self.records.iter().map(|r| r.q).sum()
    }

    pub fn deficit(&self) -> f64 {
        (self.demand - self.total_offload()).max(0.0)
    }

    pub fn total_cost(&self) -> f64 {
        self.records.iter().map(|r| r.cost).sum()
    }

    fn participants(&self) -> impl Iterator<Item = &ResponseRecord> {
        self.records.iter().filter(|r| r.participating)
    }

    /// Sum of participants' marginal costs.
    pub fn participant_gradient_sum(&self) -> f64 {
        self.participants().map(|r| r.gradient).sum()
    }

    /// `g·1` over every local passenger.
    pub fn gradient_sum(&self) -> f64 {
        self.records.iter().map(|r| r.gradient).sum()
    }

    pub fn gradient_max(&self) -> f64 {
        self.records.iter().map(|r| r.gradient).fold(0.0, f64::max)
    }

    /// `g·h` over every local passenger.
    pub fn gradient_dot_slope(&self) -> f64 {
        self.records.iter().map(|r| r.gradient * r.slope).sum()
    }

    /// `h·1` over every local passenger.
    pub fn slope_sum(&self) -> f64 {
        self.records.iter().map(|r| r.slope).sum()
    }

    /// Smallest passenger utility at this step (0 when nobody is local).
    pub fn min_utility(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.utility(self.price))
            .fold(0.0, f64::min)
    }

    /// What the government learns from this step.
    pub fn feedback(&self) -> Feedback {
        let (mut gradient_sum, mut g_dot_h, mut h_sum) = (0.0, 0.0, 0.0);
        for r in self.participants() {
            gradient_sum += r.gradient;
            g_dot_h += r.gradient * r.slope;
            h_sum += r.slope;
        }
        Feedback {
            gradient_sum,
            gradient_dot_slope: g_dot_h,
            slope_sum: h_sum,
            deficit: self.deficit() > 0.0,
        }
    }
}

/// Aggregate feedback from participating passengers only.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Feedback {
    pub gradient_sum: f64,
    pub gradient_dot_slope: f64,
    pub slope_sum: f64,
    pub deficit: bool,
}

/// Best responses of every passenger local to `s` at time `t`.
pub fn aggregate_response(sc: &Scenario, s: usize, t: usize, price: f64) -> StepResponse {
    let records = sc
        .local_passengers(s, t)
        .map(|i| {
            let p = &sc.population()[i];
            let cost = &p.cost;
            let q = response_for(cost, p.capacity, price);
            ResponseRecord {
                i,
                s,
                t,
                q,
                gradient: cost.gradient(q).unwrap_or(0.0),
                slope: response_slope(p, s, t, price),
                cost: cost.eval(q).unwrap_or(0.0),
                participating: q > 0.0,
            }
        })
        .collect();
    StepResponse {
        s,
        t,
        price,
        demand: sc.demand(s, t),
        records,
    }
}

/// Social cost of one (s, t) at a posted price: passenger costs plus the
/// deficit penalty.
pub fn step_cost(sc: &Scenario, s: usize, t: usize, price: f64) -> f64 {
    let r = aggregate_response(sc, s, t, price);
    r.total_cost() + sc.penalty(s) * r.deficit()
}
