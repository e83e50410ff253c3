use std::collections::BTreeMap;

use super::{
    euclidean_weights, fedavg_weights, qrail_weights, server_round, wpqfl_update, FedError, QrailParams, WpqflVariant,
};
use crate::train::LocalResult;

/// What the server sees at the end of a round.
pub struct RoundContext<'a> {
    pub theta_global: &'a [f64],
    pub locals: &'a [LocalResult],
    /// Per-client effective noise budgets `E_k`.
    pub budgets: &'a [f64],
}

impl RoundContext<'_> {
    fn deltas(&self) -> Vec<&[f64]> {
        self.locals.iter().map(|l| &l.delta[..]).collect()
    }

    fn thetas(&self) -> Vec<&[f64]> {
        self.locals.iter().map(|l| &l.theta_local[..]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub theta: Vec<f64>,
    pub weights: Vec<f64>,
    /// Next-round starting points when the rule personalizes; otherwise every
    /// client restarts from `theta`.
    pub client_starts: Option<Vec<Vec<f64>>>,
}

/// A server-side aggregation rule.
pub trait AggregationStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn aggregate(&self, ctx: &RoundContext<'_>) -> Result<Aggregate, FedError>;
}

pub struct FedAvg;

impl AggregationStrategy for FedAvg {
    fn name(&self) -> &'static str {
        "fedavg"
    }

    fn aggregate(&self, ctx: &RoundContext<'_>) -> Result<Aggregate, FedError> {
        let w = fedavg_weights(ctx.locals.len()).w;
        let theta = server_round(ctx.theta_global, &ctx.deltas(), &w)?;
        Ok(Aggregate { theta, weights: w, client_starts: None })
    }
}

pub struct Qrail(pub QrailParams);

impl AggregationStrategy for Qrail {
    fn name(&self) -> &'static str {
        "qrail"
    }

    fn aggregate(&self, ctx: &RoundContext<'_>) -> Result<Aggregate, FedError> {
        if ctx.budgets.len() != ctx.locals.len() {
            return Err(FedError::Dimension { expected: ctx.locals.len(), got: ctx.budgets.len() });
        }
        let w = qrail_weights(ctx.budgets, &self.0).w;
        let theta = server_round(ctx.theta_global, &ctx.deltas(), &w)?;
        Ok(Aggregate { theta, weights: w, client_starts: None })
    }
}

pub struct WpqflEuclidean;

impl AggregationStrategy for WpqflEuclidean {
    fn name(&self) -> &'static str {
        "wpqfl-euclidean"
    }

    fn aggregate(&self, ctx: &RoundContext<'_>) -> Result<Aggregate, FedError> {
        let thetas = ctx.thetas();
        let (theta, _) = wpqfl_update(ctx.theta_global, &thetas, WpqflVariant::Euclidean)?;
        Ok(Aggregate { theta, weights: euclidean_weights(ctx.theta_global, &thetas), client_starts: None })
    }
}

pub struct WpqflWeighted;

impl AggregationStrategy for WpqflWeighted {
    fn name(&self) -> &'static str {
        "wpqfl-weighted"
    }

    fn aggregate(&self, ctx: &RoundContext<'_>) -> Result<Aggregate, FedError> {
        let (theta, starts) = wpqfl_update(ctx.theta_global, &ctx.thetas(), WpqflVariant::Weighted90g10l)?;
        Ok(Aggregate { theta, weights: fedavg_weights(ctx.locals.len()).w, client_starts: Some(starts) })
    }
}

pub type StrategyFactory = fn(&QrailParams) -> Box<dyn AggregationStrategy>;

/// Aggregation rules selectable by name.
pub struct StrategyRegistry {
    factories: BTreeMap<&'static str, StrategyFactory>,
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register("fedavg", |_| Box::new(FedAvg));
        r.register("qrail", |p| Box::new(Qrail(*p)));
        r.register("wpqfl-euclidean", |_| Box::new(WpqflEuclidean));
        r.register("wpqfl-weighted", |_| Box::new(WpqflWeighted));
        r
    }
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self { factories: BTreeMap::new() }
    }

    pub fn register(&mut self, name: &'static str, factory: StrategyFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn create(&self, name: &str, params: &QrailParams) -> Result<Box<dyn AggregationStrategy>, FedError> {
        self.factories
            .get(name)
            .map(|f| f(params))
            .ok_or_else(|| FedError::UnknownMethod(name.to_string(), self.names().join(", ")))
    }
}
