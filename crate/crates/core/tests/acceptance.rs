//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails. Pass a substring to run a subset.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng as _;

use qrail::calib::{load_profile_dir, BackendProfile, CompositeWeights, EdgeError, ProfileFile};
use qrail::exec::CompiledModel;
use qrail::fed::{noise_budgets, qrail_weights, QrailParams};
use qrail::harness::{self, FederationConfig};
use qrail::qsim::{run_shots, NoiseModel};
use qrail::seed;
use qrail::train::{spsa_step, SpsaConfig};
use qrail::transpile::{transpile, verify_equivalence};
use qrail::vqc::{build_circuit, CircuitSpec, Gate, GateList, Topology};

type Outcome = Result<String, String>;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn shipped_profiles() -> Vec<BackendProfile> {
    load_profile_dir(root().join("profiles")).expect("shipped profiles load")
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// Direct evaluation of the weight rule, kept separate from the library code.
fn oracle_weights(e: &[f64], tau: f64, beta: f64, w_min: f64) -> Vec<f64> {
    let k = e.len() as f64;
    let lo = e.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let num: Vec<f64> = e.iter().map(|v| (-tau * (v - lo) / (hi - lo + 1e-12)).exp()).collect();
    let den: f64 = num.iter().sum();
    let w: Vec<f64> = num.iter().map(|n| ((1.0 - beta) * n / den + beta / k).max(w_min)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

fn golden_weights() -> Outcome {
    let params = QrailParams::default();
    let w = qrail_weights(&[2.0, 8.0], &params).w;
    let oracle = oracle_weights(&[2.0, 8.0], params.tau, params.beta, params.w_min);
    for (i, expected) in [0.894646, 0.105354].into_iter().enumerate() {
        check((w[i] - expected).abs() <= 1e-6, || format!("w[{i}] = {} expected {expected}", w[i]))?;
        check((w[i] - oracle[i]).abs() <= 1e-12, || format!("w[{i}] = {} oracle {}", w[i], oracle[i]))?;
    }
    let floor = QrailParams { tau: 10.0, beta: 0.05, w_min: 0.05 };
    let w2 = qrail_weights(&[0.0, 1.0, 1.0], &floor).w;
    let oracle2 = oracle_weights(&[0.0, 1.0, 1.0], 10.0, 0.05, 0.05);
    for (i, expected) in [0.906240, 0.046880, 0.046880].into_iter().enumerate() {
        check((w2[i] - expected).abs() <= 1e-5, || format!("floor case w[{i}] = {} expected {expected}", w2[i]))?;
        check((w2[i] - oracle2[i]).abs() <= 1e-12, || format!("floor case w[{i}] differs from oracle"))?;
    }
    Ok(format!("w = ({:.6}, {:.6}); floor case w = ({:.6}, {:.6}, {:.6})", w[0], w[1], w2[0], w2[1], w2[2]))
}

fn parameter_count() -> Outcome {
    for (q, l, expected) in [(4, 4, 32), (8, 16, 256)] {
        let spec = CircuitSpec::new(q, l, Topology::Linear, 1).map_err(|e| e.to_string())?;
        check(spec.num_params() == expected, || format!("P({q},{l}) = {}", spec.num_params()))?;
        let g = build_circuit(&spec, &vec![0.5; q], &vec![0.1; expected]).map_err(|e| e.to_string())?;
        let rotations = g.gates.iter().filter(|g| g.is_rotation()).count();
        check(rotations == expected + 2 * q, || format!("circuit ({q},{l}) has {rotations} rotations"))?;
    }
    Ok("P = 32 for (4,4) and 256 for (8,16)".into())
}

fn budgets_for(specs: &[CircuitSpec], profile: &BackendProfile, lambda: &CompositeWeights) -> Result<Vec<f64>, String> {
    let stats = specs
        .iter()
        .map(|s| CompiledModel::compile(s, profile).map(|m| m.stats()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let profiles = vec![profile; specs.len()];
    Ok(noise_budgets(&stats, &profiles, lambda).map_err(|e| e.to_string())?.iter().map(|b| b.total).collect())
}

fn budget_monotonicity() -> Outcome {
    let profiles = shipped_profiles();
    let mut rng = seed::rng(303);
    let mut lambdas = vec![CompositeWeights::from_array([1.0, 5.0, 2.0, 1.0, 1.0]).unwrap()];
    for _ in 0..8 {
        let v: [f64; 5] = std::array::from_fn(|_| rng.random_range(0.05..5.0));
        lambdas.push(CompositeWeights::from_array(v).unwrap());
    }
    let folds = [1, 3, 5, 9];
    let mut checks = 0;
    for lambda in &lambdas {
        for p in profiles.iter().filter(|p| p.num_qubits >= 4) {
            for topo in Topology::ALL {
                let specs: Vec<_> = folds.iter().map(|&f| CircuitSpec::new(4, 4, topo, f).unwrap()).collect();
                let e = budgets_for(&specs, p, lambda)?;
                check(e.windows(2).all(|w| w[0] < w[1]), || format!("{} {topo}: E over folds {e:?}", p.name))?;
                checks += 1;
            }
            for fold in folds {
                let specs: Vec<_> = Topology::ALL.iter().map(|&t| CircuitSpec::new(4, 4, t, fold).unwrap()).collect();
                let e = budgets_for(&specs, p, lambda)?;
                check(e[0] <= e[1] && e[1] <= e[2], || format!("{} fold {fold}: E by topology {e:?}", p.name))?;
                checks += 1;
            }
        }
    }
    Ok(format!("{checks} orderings hold across {} profiles and {} weightings", profiles.len(), lambdas.len()))
}

fn random_circuit(q: usize, rng: &mut seed::Rng) -> GateList {
    let topo = Topology::ALL[rng.random_range(0..3)];
    let fold = [1, 3, 5][rng.random_range(0..3)];
    let layers = rng.random_range(1..=4);
    let a = rng.random_range(0..q);
    let b = (a + rng.random_range(1..q)) % q;
    let spec = CircuitSpec::new(q, layers, topo, fold).unwrap().with_measured(a, b).unwrap();
    let x: Vec<f64> = (0..q).map(|_| rng.random_range(0.0..std::f64::consts::PI)).collect();
    let theta: Vec<f64> = (0..spec.num_params()).map(|_| rng.random_range(-3.2..3.2)).collect();
    build_circuit(&spec, &x, &theta).unwrap()
}

fn routing_correctness() -> Outcome {
    let profiles = shipped_profiles();
    let mut rng = seed::rng(404);
    let mut worst = 1.0f64;
    for i in 0..200 {
        let g = random_circuit(4, &mut rng);
        for p in &profiles {
            let t = transpile(&g, p).map_err(|e| format!("circuit {i} on {}: {e}", p.name))?;
            let f = verify_equivalence(&g, &t).map_err(|e| e.to_string())?;
            check(f >= 1.0 - 1e-9, || format!("circuit {i} on {}: fidelity {f}", p.name))?;
            worst = worst.min(f);
        }
    }
    Ok(format!("2000 routed circuits, worst fidelity {worst:.12}"))
}

// Dense reference: full 2^n x 2^n unitaries, qubit 0 is the least significant bit.
fn dense_unitary(g: &GateList) -> DMatrix<Complex64> {
    let n = g.num_qubits;
    let dim = 1 << n;
    let one_qubit = |q: usize, m: [[Complex64; 2]; 2]| {
        let mut u = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        for k in (0..n).rev() {
            let f = if k == q {
                DMatrix::from_fn(2, 2, |r, c| m[r][c])
            } else {
                DMatrix::<Complex64>::identity(2, 2)
            };
            u = u.kronecker(&f);
        }
        u
    };
    let mut total = DMatrix::<Complex64>::identity(dim, dim);
    for gate in &g.gates {
        let u = match *gate {
            Gate::Ry { qubit, angle } => {
                let (s, c) = (angle / 2.0).sin_cos();
                let r = |v: f64| Complex64::new(v, 0.0);
                one_qubit(qubit, [[r(c), r(-s)], [r(s), r(c)]])
            }
            Gate::Rz { qubit, angle } => {
                let z = Complex64::new(0.0, 0.0);
                one_qubit(qubit, [[Complex64::from_polar(1.0, -angle / 2.0), z], [z, Complex64::from_polar(1.0, angle / 2.0)]])
            }
            Gate::Cx { control, target } => DMatrix::from_fn(dim, dim, |r, c| {
                let mapped = if c >> control & 1 == 1 { c ^ (1 << target) } else { c };
                Complex64::new(if r == mapped { 1.0 } else { 0.0 }, 0.0)
            }),
            Gate::Barrier | Gate::Measure { .. } => continue,
        };
        total = u * total;
    }
    total
}

fn dense_distribution(g: &GateList) -> [f64; 4] {
    let u = dense_unitary(g);
    let mut meas = [0usize; 2];
    for (q, c) in g.measurements() {
        meas[c] = q;
    }
    let mut dist = [0.0; 4];
    for basis in 0..u.nrows() {
        let p = u[(basis, 0)].norm_sqr();
        dist[2 * (basis >> meas[0] & 1) + (basis >> meas[1] & 1)] += p;
    }
    dist
}

fn two_qubit_profile(p1: f64) -> BackendProfile {
    BackendProfile::from_file_repr(ProfileFile {
        name: "pair".into(),
        num_qubits: 2,
        coupling: vec![[0, 1]],
        t1_us: vec![100.0; 2],
        t2_us: vec![80.0; 2],
        readout_error: vec![0.0; 2],
        err_1q: vec![p1, 0.0],
        err_2q: vec![EdgeError { edge: [0, 1], value: 0.0 }],
        gate_time_us: 0.05,
    })
    .unwrap()
}

fn simulator_statistics() -> Outcome {
    let profiles = shipped_profiles();
    let mut rng = seed::rng(505);
    let mut worst_tv = 0.0f64;
    for i in 0..20 {
        let g = random_circuit(3, &mut rng);
        let p = &profiles[i % profiles.len()];
        let t = transpile(&g, p).map_err(|e| e.to_string())?;
        let counts = run_shots(&t, &NoiseModel::noiseless(p.num_qubits), 50_000, 9000 + i as u64)
            .map_err(|e| e.to_string())?;
        let exact = dense_distribution(&g);
        let tv: f64 =
            0.5 * (0..4).map(|o| (counts.counts[o] as f64 / 50_000.0 - exact[o]).abs()).sum::<f64>();
        check(tv < 0.02, || format!("circuit {i} on {}: TV {tv}", p.name))?;
        worst_tv = worst_tv.max(tv);
    }

    let shots = 40_000u64;
    let mut worst_z = 0.0f64;
    for (case, (p, k)) in [(0.01, 1), (0.01, 20), (0.05, 5), (0.05, 20), (0.2, 3), (0.3, 8)].into_iter().enumerate() {
        let mut g = GateList::new(2);
        for _ in 0..k {
            g.push(Gate::Rz { qubit: 0, angle: 0.0 });
        }
        g.push(Gate::Measure { qubit: 0, clbit: 0 });
        g.push(Gate::Measure { qubit: 1, clbit: 1 });
        let profile = two_qubit_profile(p);
        let t = transpile(&g, &profile).map_err(|e| e.to_string())?;
        let c = run_shots(&t, &NoiseModel::from_profile(&profile), shots, 77 + case as u64).map_err(|e| e.to_string())?;
        let ones = (c.counts[2] + c.counts[3]) as f64 / shots as f64;
        let z = 1.0 - 2.0 * ones;
        let expected = (1.0 - 4.0 * p / 3.0).powi(k);
        let q = (1.0 - expected) / 2.0;
        let se = 2.0 * (q * (1.0 - q) / shots as f64).sqrt();
        let dev = (z - expected).abs() / se;
        check(dev <= 3.0, || format!("p={p} k={k}: <Z> {z:.5} expected {expected:.5} ({dev:.2} SE)"))?;
        worst_z = worst_z.max(dev);
    }
    Ok(format!("worst TV {worst_tv:.4}; worst depolarizing deviation {worst_z:.2} SE"))
}

fn spsa_sanity() -> Outcome {
    let cfg = SpsaConfig::default();
    let mut finals = Vec::new();
    for s in 0..5u64 {
        let mut rng = seed::rng(600 + s);
        let target: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let loss = |t: &[f64]| -> Result<f64, ()> { Ok(t.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum()) };
        let mut theta = vec![0.0; 8];
        for step in 0..200 {
            theta = spsa_step(&theta, step, &cfg, seed::derive(600 + s, &[step as u64]), loss).unwrap();
        }
        finals.push(loss(&theta).unwrap());
    }
    let good = finals.iter().filter(|&&l| l <= 0.1).count();
    let text = format!("{good}/5 seeds within 0.1 of the optimum, final losses {finals:.4?}");
    check(good >= 4, || text.clone())?;
    Ok(text)
}

fn directional_reproduction() -> Outcome {
    let mut cfg = FederationConfig::load(root().join("configs/main_comparison.toml")).map_err(|e| e.to_string())?;
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    cfg.output_dir = out.path().display().to_string();
    check(
        cfg.federation.clients == 10
            && cfg.federation.rho == 0.8
            && cfg.federation.rounds == 10
            && cfg.seeds.len() == 3
            && cfg.model.qubits == 4
            && cfg.model.layers == 4
            && cfg.dataset.train_size == 600
            && cfg.dataset.test_size == 300,
        || "main comparison config drifted from the acceptance setting".into(),
    )?;
    let outcome = harness::run_config(&cfg).map_err(|e| e.to_string())?;
    let acc = |m: &str| outcome.report.methods[m].final_round["test_acc"].mean;
    let (q, f) = (acc("qrail"), acc("fedavg"));
    let text = format!("final test accuracy qrail {q:.4} vs fedavg {f:.4} (gap {:+.1} points)", 100.0 * (q - f));
    check(q > f && q - f >= 0.02, || text.clone())?;
    Ok(text)
}

fn write_blob_config(dir: &Path, profiles: &Path, extra: &str) -> PathBuf {
    let text = format!(
        r#"
seeds = [1, 2]
output_dir = "out"
[dataset]
name = "blobs"
train_size = 120
test_size = 60
[model]
qubits = 4
layers = 2
[federation]
clients = 4
rho = 0.5
rounds = 5
method = ["qrail", "fedavg"]
[calibration]
profiles = "{}"
[optimizer]
local_steps = 2
batch_size = 8
train_shots = 64
eval_shots = 64
{extra}
"#,
        profiles.display()
    );
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn degenerate_equality() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let twins = dir.path().join("twins");
    fs::create_dir(&twins).unwrap();
    let base = shipped_profiles().into_iter().find(|p| p.name == "ember_5").ok_or("ember_5 missing")?;
    for i in 0..4 {
        let mut raw = base.to_file_repr();
        raw.name = format!("twin_{i}");
        fs::write(twins.join(format!("twin_{i}.json")), serde_json::to_string(&raw).unwrap()).unwrap();
    }
    let cfg = FederationConfig::load(write_blob_config(dir.path(), &twins, "")).map_err(|e| e.to_string())?;
    let profiles = load_profile_dir(&twins).map_err(|e| e.to_string())?;
    let data = harness::prepare_data(&cfg).map_err(|e| e.to_string())?;
    let mut rounds = 0;
    for seed in [1u64, 2] {
        let q = harness::run_single(&cfg, "qrail", seed, &profiles, &data).map_err(|e| e.to_string())?;
        let f = harness::run_single(&cfg, "fedavg", seed, &profiles, &data).map_err(|e| e.to_string())?;
        check(q.records.len() == 5, || format!("{} rounds recorded", q.records.len()))?;
        for (a, b) in q.records.iter().zip(&f.records) {
            let bits = |r: &qrail::fed::RoundRecord| {
                let mut v = vec![r.train.loss, r.train.accuracy, r.train.auc, r.test.loss, r.test.accuracy, r.test.auc];
                v.extend(r.weights.iter().copied());
                v.extend(r.local.iter().flat_map(|m| [m.loss, m.accuracy, m.auc]));
                v.into_iter().map(f64::to_bits).collect::<Vec<u64>>()
            };
            check(bits(a) == bits(b), || format!("seed {seed} round {} differs", a.round))?;
            rounds += 1;
        }
        check(q.theta.iter().map(|v| v.to_bits()).eq(f.theta.iter().map(|v| v.to_bits())), || {
            format!("seed {seed}: final parameters differ")
        })?;
    }
    Ok(format!("{rounds} rounds bit-identical across 2 seeds"))
}

fn aggregation_invariants() -> Outcome {
    let mut rng = seed::rng(909);
    let mut max_affine = 0.0f64;
    for trial in 0..1000 {
        let k = rng.random_range(2..=50);
        let scale = 10f64.powi(rng.random_range(-2..=2));
        let e: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..10.0) * scale).collect();
        let params = QrailParams {
            tau: rng.random_range(0.5..15.0),
            beta: rng.random_range(0.0..0.5),
            w_min: rng.random_range(0.0..1.0 / k as f64),
        };
        let w = qrail_weights(&e, &params).w;
        let sum: f64 = w.iter().sum();
        check((sum - 1.0).abs() <= 1e-12, || format!("trial {trial}: sum {sum}"))?;
        for i in 0..k {
            for j in 0..k {
                if e[i] < e[j] {
                    check(w[i] >= w[j], || format!("trial {trial}: E{i} < E{j} but w {} < {}", w[i], w[j]))?;
                }
            }
        }
        let a = 10f64.powf(rng.random_range(-2.0..2.0));
        let b = rng.random_range(-50.0..50.0);
        let shifted: Vec<f64> = e.iter().map(|v| a * v + b).collect();
        let w2 = qrail_weights(&shifted, &params).w;
        let diff = w.iter().zip(&w2).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        check(diff <= 1e-9, || format!("trial {trial}: affine change moved weights by {diff}"))?;
        max_affine = max_affine.max(diff);
        let uniform = qrail_weights(&e, &QrailParams { beta: 1.0, ..params }).w;
        let off = uniform.iter().map(|u| (u - 1.0 / k as f64).abs()).fold(0.0, f64::max);
        check(off <= 1e-12, || format!("trial {trial}: beta=1 deviates from uniform by {off}"))?;
    }
    Ok(format!("1000 vectors; largest affine drift {max_affine:.2e}"))
}

fn read_csvs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = write_blob_config(dir.path(), &root().join("profiles"), "");
    let mut runs = Vec::new();
    for _ in 0..2 {
        let status = Command::new(env!("CARGO_BIN_EXE_qrail"))
            .args(["run", "--config"])
            .arg(&config)
            .output()
            .map_err(|e| e.to_string())?;
        check(status.status.success(), || String::from_utf8_lossy(&status.stderr).into_owned())?;
        runs.push(read_csvs(&dir.path().join("out")));
    }
    check(runs[0].len() == 4, || format!("expected 4 CSV files, found {}", runs[0].len()))?;
    check(runs[0] == runs[1], || "CSV bytes differ between runs".into())?;
    let bytes: usize = runs[0].values().map(Vec::len).sum();
    Ok(format!("{} CSV files ({bytes} bytes) byte-identical across two runs", runs[0].len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("weight-rule golden values", golden_weights),
        ("parameter-count identity", parameter_count),
        ("budget monotonicity", budget_monotonicity),
        ("routing correctness", routing_correctness),
        ("simulator statistics", simulator_statistics),
        ("spsa sanity", spsa_sanity),
        ("directional reproduction", directional_reproduction),
        ("degenerate equality", degenerate_equality),
        ("aggregation invariants", aggregation_invariants),
        ("determinism", determinism),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  {:>2} {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:>2} {name} ({secs:.1}s): {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
