use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{noise_budgets, FedError, NoiseBudget, QrailParams, RoundContext, StrategyRegistry};
use crate::calib::{
    assign_clients, composite_score, filter_by_qubits, rank_and_pool, BackendProfile, BackendRanking, ClientAssignment,
    CompositeWeights,
};
use crate::data::{partition, Dataset, PartitionMode};
use crate::exec::BackendRunner;
use crate::metrics::{evaluate_metrics, Metrics};
use crate::seed::{self, tag};
use crate::train::{init_params, local_train, LocalResult, SpsaConfig};
use crate::transpile::TranspiledStats;
use crate::vqc::CircuitSpec;

/// Everything that shapes a federation apart from data, profiles and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct FederationSettings {
    pub spec: CircuitSpec,
    pub clients: usize,
    pub rho: f64,
    pub rounds: usize,
    pub method: String,
    pub qrail: QrailParams,
    pub idle_noise: bool,
    pub lambda: CompositeWeights,
    pub pool_size: Option<usize>,
    pub spsa: SpsaConfig,
    pub partition: PartitionMode,
    /// Initial parameters are uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
}

pub struct ClientSetup {
    pub assignment: ClientAssignment,
    pub shard: Dataset,
    pub runner: Arc<BackendRunner>,
    pub stats: TranspiledStats,
}

/// A fully resolved federation ready to run.
pub struct FederationPlan {
    pub settings: FederationSettings,
    pub seed: u64,
    pub ranking: BackendRanking,
    pub clients: Vec<ClientSetup>,
    pub budgets: Vec<NoiseBudget>,
    pub eval: Arc<BackendRunner>,
    pub train: Dataset,
    pub test: Dataset,
    pub theta0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based round index.
    pub round: usize,
    pub train: Metrics,
    pub test: Metrics,
    pub local: Vec<Metrics>,
    pub weights: Vec<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederationHistory {
    pub records: Vec<RoundRecord>,
    pub theta: Vec<f64>,
}

/// Rank backends, assign clients, partition data and compile every client's
/// circuit. `train` and `test` must already be encoded to `spec.num_qubits`
/// features.
pub fn prepare(
    settings: &FederationSettings,
    profiles: &[BackendProfile],
    train: Dataset,
    test: Dataset,
    seed: u64,
) -> Result<FederationPlan, FedError> {
    let q = settings.spec.num_qubits;
    settings.spec.validate().map_err(|e| FedError::Invalid(e.to_string()))?;
    settings.spsa.validate().map_err(|e| FedError::Invalid(e.to_string()))?;
    settings.qrail.validate(settings.clients)?;
    if train.cols != q || test.cols != q {
        return Err(FedError::Invalid(format!("data has {} features, circuit has {q} qubits", train.cols)));
    }
    if train.is_empty() || test.is_empty() {
        return Err(FedError::Invalid("train and test splits must be non-empty".into()));
    }
    StrategyRegistry::default().create(&settings.method, &settings.qrail)?;

    let eligible = filter_by_qubits(profiles, q);
    let scores = composite_score(&eligible, &settings.lambda)?;
    let ranking = rank_and_pool(&scores, settings.pool_size)?;
    let assignments = assign_clients(&ranking, settings.clients, settings.rho, seed::derive(seed, &[tag::ASSIGN]))?;
    let shards = partition(&train.labels, settings.clients, settings.partition, seed::derive(seed, &[tag::PARTITION]))?;

    let by_name: BTreeMap<&str, &BackendProfile> = eligible.iter().map(|p| (p.name.as_str(), p)).collect();
    let mut runners: BTreeMap<String, Arc<BackendRunner>> = BTreeMap::new();
    let mut runner_for = |name: &str| -> Result<Arc<BackendRunner>, FedError> {
        if let Some(r) = runners.get(name) {
            return Ok(Arc::clone(r));
        }
        let runner = BackendRunner::new(&settings.spec, by_name[name], settings.idle_noise)
            .map_err(|source| FedError::Backend { backend: name.to_string(), source })?;
        let runner = Arc::new(runner);
        runners.insert(name.to_string(), Arc::clone(&runner));
        Ok(runner)
    };

    let mut clients = Vec::with_capacity(settings.clients);
    for (assignment, idx) in assignments.into_iter().zip(&shards.clients) {
        let runner = runner_for(&assignment.backend)?;
        let stats = runner.model.stats();
        clients.push(ClientSetup { shard: train.select(idx), runner, stats, assignment });
    }
    let eval = runner_for(&ranking.best)?;

    let stats: Vec<TranspiledStats> = clients.iter().map(|c| c.stats).collect();
    let client_profiles: Vec<&BackendProfile> = clients.iter().map(|c| by_name[c.assignment.backend.as_str()]).collect();
    let budgets = noise_budgets(&stats, &client_profiles, &settings.lambda)?;

    let theta0 = init_params(settings.spec.num_params(), settings.init_scale, seed::derive(seed, &[tag::INIT])).0;
    Ok(FederationPlan { settings: settings.clone(), seed, ranking, clients, budgets, eval, train, test, theta0 })
}

/// Run all rounds of a prepared plan with the rule selected by
/// `settings.method`. Output depends only on the plan, not on thread count.
pub fn run_federation(plan: &FederationPlan, registry: &StrategyRegistry) -> Result<FederationHistory, FedError> {
    let s = &plan.settings;
    let strategy = registry.create(&s.method, &s.qrail)?;
    let budgets: Vec<f64> = plan.budgets.iter().map(|b| b.total).collect();
    let mut theta = plan.theta0.clone();
    let mut starts = vec![theta.clone(); plan.clients.len()];
    let mut records = Vec::with_capacity(s.rounds);

    for t in 0..s.rounds {
        let clock = Instant::now();
        let round = t + 1;
        let locals: Vec<LocalResult> = plan
            .clients
            .par_iter()
            .enumerate()
            .map(|(k, c)| {
                let client_seed = seed::derive(plan.seed, &[tag::TRAIN, t as u64, k as u64]);
                local_train(c.runner.as_ref(), &c.shard, &theta, &starts[k], &s.spsa, client_seed)
                    .map_err(|source| FedError::Client { round, client: k, source })
            })
            .collect::<Result<_, _>>()?;

        let agg = strategy.aggregate(&RoundContext { theta_global: &theta, locals: &locals, budgets: &budgets })?;
        theta = agg.theta;
        starts = agg.client_starts.unwrap_or_else(|| vec![theta.clone(); plan.clients.len()]);

        let eval = |ds: &Dataset, split: u64| {
            let eval_seed = seed::derive(plan.seed, &[tag::EVAL, t as u64, split]);
            evaluate_metrics(plan.eval.as_ref(), &theta, ds, s.spsa.eval_shots, eval_seed)
                .map_err(|source| FedError::Eval { round, source })
        };
        let train = eval(&plan.train, 0)?;
        let test = eval(&plan.test, 1)?;
        log::info!(
            "{} seed {} round {round}: test acc {:.4}, test loss {:.4}",
            s.method,
            plan.seed,
            test.accuracy,
            test.loss
        );
        records.push(RoundRecord {
            round,
            train,
            test,
            local: locals.iter().map(|l| l.metrics).collect(),
            weights: agg.weights,
            wall_time_s: clock.elapsed().as_secs_f64(),
        });
    }
    Ok(FederationHistory { records, theta })
}
