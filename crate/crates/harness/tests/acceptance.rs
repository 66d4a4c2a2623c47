//! Acceptance suite. Every criterion prints one PASS/FAIL line with its
//! measured values and runtime; the test fails if any gating criterion does.
//!
//! Criteria run one after another in a single test so that wall-clock limits
//! are measured without other tests competing for the CPU.

use std::io::Write;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfr_core::data::Dataset;
use rfr_core::losses::{
    clf_loss, dp_loss, dual_norm_epsilon, group_mean_gradient, train, ClassificationObjective,
    DemographicParityObjective, LossVariant, PNorm, PerturbationConfig, TrainConfig,
};
use rfr_core::nn::{backward_scalar, ModelParams, OptimizerState};
use rfr_harness::config::Overrides;
use rfr_harness::{check_bound, run_experiment, summarize, ExperimentConfig, Method, Outcome, RunRecord};
use rfr_theory::{lemma_d_sweep, verify_theory, SuiteConfig};

struct Verdict {
    passed: bool,
    detail: String,
}

fn report(id: &str, name: &str, limit: Option<Duration>, run: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = run();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed < l);
    let passed = v.passed && in_time;
    let limit = limit.map_or(String::new(), |l| format!(" (limit {}s)", l.as_secs()));
    // written past the test harness capture so the lines always show
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "{} [{id}] {name}: {}; {:.1}s{limit}",
        if passed { "PASS" } else { "FAIL" },
        v.detail,
        elapsed.as_secs_f64()
    )
    .unwrap();
    passed
}

fn dataset(rng: &mut impl Rng, n: usize, d: usize, spread: f64) -> Dataset {
    let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-spread..spread));
    let y = (0..n).map(|_| rng.random_range(0..2u8)).collect();
    let mut a: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
    a[0] = 0;
    a[1] = 1;
    Dataset::new(x, y, a, (0..d).map(|j| format!("x{j}")).collect(), "random").unwrap()
}

/// `<g, r>`, `||e2 + s r||_2^2` and `||einf + s r||_inf`, in four independent
/// lanes so the loop vectorizes.
fn noise_terms(g: &[f64], e2: &[f64], einf: &[f64], r: &[f64], s: f64) -> (f64, f64, f64) {
    let (mut gr, mut sq, mut mx) = ([0.0; 4], [0.0; 4], [0.0f64; 4]);
    let lanes = g.len() / 4 * 4;
    for j in (0..lanes).step_by(4) {
        for l in 0..4 {
            let k = j + l;
            gr[l] += g[k] * r[k];
            let c = e2[k] + s * r[k];
            sq[l] += c * c;
            mx[l] = mx[l].max((einf[k] + s * r[k]).abs());
        }
    }
    for k in lanes..g.len() {
        gr[0] += g[k] * r[k];
        let c = e2[k] + s * r[k];
        sq[0] += c * c;
        mx[0] = mx[0].max((einf[k] + s * r[k]).abs());
    }
    (gr.iter().sum(), sq.iter().sum(), mx.iter().copied().fold(0.0, f64::max))
}

fn dual_norm_optimality() -> Verdict {
    const VECTORS: usize = 100;
    const SAMPLES: usize = 100_000;
    let rho = 0.37;
    let mut rng = SmallRng::seed_from_u64(11);
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_norm = 0.0f64;
    let mut over_bound = 0;
    for _ in 0..VECTORS {
        let d = rng.random_range(3..=500);
        let g: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0) * 10f64.powf(rng.random_range(-2.0..2.0))).collect();
        let cases = [PNorm::Finite(2.0), PNorm::Infinity].map(|p| {
            let eps = dual_norm_epsilon(&g, &PerturbationConfig::new(rho, p).unwrap()).eps;
            let value: f64 = g.iter().zip(&eps).map(|(a, b)| a * b).sum();
            (p, eps, value)
        });
        for (p, eps, value) in &cases {
            worst_norm = worst_norm.max((p.norm(eps) - rho).abs());
            // the supremum is rho times the dual norm
            if *value > rho * p.dual_norm(&g) * (1.0 + 1e-12) {
                over_bound += 1;
            }
        }
        // feasible samples: eps* plus noise at scales from 1e-4 rho (local) to
        // 100 rho (effectively random directions), rescaled onto the sphere.
        // One noise draw serves both norms and <g, eps* + s r> is updated
        // from <g, r>.
        let [(_, e2, v2), (_, einf, vinf)] = &cases;
        let mut best = [f64::NEG_INFINITY; 2];
        let mut bits = vec![0u32; d];
        let mut r = vec![0.0; d];
        for _ in 0..SAMPLES {
            let sigma = rho * 10f64.powf(rng.random_range(-4.0..2.0));
            rng.fill(bits.as_mut_slice());
            r.iter_mut()
                .zip(&bits)
                .for_each(|(r, &b)| *r = f64::from(b) * (2.0 / 4_294_967_296.0) - 1.0);
            let (gr, sq, mx) = noise_terms(&g, e2, einf, &r, sigma);
            best[0] = best[0].max((v2 + sigma * gr) * rho / sq.sqrt());
            best[1] = best[1].max((vinf + sigma * gr) * rho / mx);
        }
        for (k, (_, _, value)) in cases.iter().enumerate() {
            worst_gap = worst_gap.max((best[k] - value) / value.abs());
        }
    }
    Verdict {
        passed: worst_gap <= 1e-3 && worst_norm <= 1e-9 && over_bound == 0,
        detail: format!(
            "{VECTORS} vectors x {SAMPLES} samples, p in {{2, inf}}: worst relative shortfall vs best sample {worst_gap:.2e} \
             (tol 1e-3), worst | ||eps*||_p - rho | {worst_norm:.1e} (tol 1e-9)"
        ),
    }
}

fn central_fd(p: &ModelParams, f: impl Fn(&ModelParams) -> f64) -> Vec<f64> {
    let h = 1e-5;
    let base = p.flatten();
    (0..base.len())
        .map(|k| {
            let mut plus = base.clone();
            plus[k] += h;
            let mut minus = base.clone();
            minus[k] -= h;
            (f(&p.unflatten(&plus).unwrap()) - f(&p.unflatten(&minus).unwrap())) / (2.0 * h)
        })
        .collect()
}

fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    diff / numeric.iter().map(|b| b * b).sum::<f64>().sqrt().max(1e-12)
}

fn gradient_exactness() -> Verdict {
    let archs: [&[usize]; 4] = [&[2, 5, 1], &[3, 8, 6, 1], &[5, 20, 1], &[4, 12, 8, 1]];
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst = 0.0f64;
    let mut checks = 0;
    let mut largest = 0;
    for arch in archs {
        for _ in 0..5 {
            let init = ModelParams::init(arch, rng.random()).unwrap();
            // nonzero biases keep samples off the ReLU kinks
            let flat: Vec<f64> = init
                .flatten()
                .into_iter()
                .zip(init.weight_mask())
                .map(|(v, w)| if w { v } else { rng.random_range(-0.5..0.5) })
                .collect();
            let p = init.unflatten(&flat).unwrap();
            largest = largest.max(p.num_params());
            let data = dataset(&mut rng, 12, arch[0], 2.0);
            let mut record = |e: f64| {
                worst = worst.max(e);
                checks += 1;
            };
            for variant in [LossVariant::LinearPaper, LossVariant::CrossEntropy] {
                let obj = ClassificationObjective { labels: &data.y, variant };
                let (_, g) = backward_scalar(&p, &obj, data.features()).unwrap();
                record(relative_error(&g.values, &central_fd(&p, |q| clf_loss(q, &data, variant).unwrap())));
            }
            let obj = DemographicParityObjective { groups: &data.a };
            let (_, g) = backward_scalar(&p, &obj, data.features()).unwrap();
            record(relative_error(&g.values, &central_fd(&p, |q| dp_loss(q, &data).unwrap())));
            for a in 0..2u8 {
                let g = group_mean_gradient(&p, &data, a).unwrap();
                let view = data.group(a);
                let fd = central_fd(&p, |q| q.forward(view.features()).unwrap().mean().unwrap());
                record(relative_error(&g.values, &fd));
            }
        }
    }
    Verdict {
        passed: worst <= 1e-4 && largest <= 200,
        detail: format!("{checks} gradients on nets up to {largest} parameters: worst relative error {worst:.2e} (tol 1e-4)"),
    }
}

fn theory_suite() -> Verdict {
    let cfg = SuiteConfig {
        lemma_tuples: 0,
        ..SuiteConfig::default()
    };
    let report = verify_theory(&cfg).unwrap();
    let checks = report.checks.iter().filter(|c| c.instances > 0);
    let detail = checks
        .clone()
        .map(|c| format!("{} {} ({})", if c.passed { "ok" } else { "FAILED" }, c.name, c.detail))
        .collect::<Vec<_>>()
        .join("; ");
    let enough = report.corollary.len() >= 20 && report.theorem2.len() >= 10 && !report.minimal_power.is_empty();
    let halvings = report.theorem2.iter().all(|r| r.scales.len() >= 4);
    Verdict {
        passed: enough && halvings && checks.clone().all(|c| c.passed),
        detail: format!(
            "{} corollary, {} first-order, {} minimal-power instances: {detail}",
            report.corollary.len(),
            report.theorem2.len(),
            report.minimal_power.len()
        ),
    }
}

fn bound_and_lemma() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut violations = 0;
    let mut min_slack = f64::INFINITY;
    for _ in 0..1000 {
        let d = rng.random_range(1..=4);
        let arch = [d, rng.random_range(1..=8), rng.random_range(1..=8), 1];
        let net = ModelParams::init(&arch, rng.random()).unwrap();
        let ns = rng.random_range(4..=60);
        let nt = rng.random_range(4..=60);
        let source = dataset(&mut rng, ns, d, 3.0);
        let target = dataset(&mut rng, nt, d, 3.0);
        let r = check_bound(&net, &source, &target).unwrap();
        min_slack = min_slack.min(r.bound - r.dp_target);
        if !(r.dp_target <= r.bound + 1e-12) {
            violations += 1;
        }
    }
    let lemma = lemma_d_sweep(1_000_000, 10.0, &mut ChaCha8Rng::seed_from_u64(32));
    Verdict {
        passed: violations == 0 && lemma.violations == 0,
        detail: format!(
            "1000 model/dataset pairs: {violations} bound violations (tol 1e-12, min slack {min_slack:.1e}); \
             {} lemma tuples: {} violations",
            lemma.tuples, lemma.violations
        ),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn target_medians(records: &[RunRecord], method: Method, lambda: f64) -> Option<(f64, f64, usize)> {
    let cell: Vec<_> = records
        .iter()
        .filter(|r| r.method == method && r.lambda == lambda)
        .map(|r| r.target())
        .collect::<Option<Vec<_>>>()?;
    Some((
        median(cell.iter().map(|m| m.delta_dp).collect()),
        median(cell.iter().map(|m| m.accuracy).collect()),
        cell.len(),
    ))
}

fn toy_config() -> ExperimentConfig {
    ExperimentConfig::from_toml_str(include_str!("../../../configs/toy.toml"), &Overrides::default()).unwrap()
}

fn end_to_end() -> Verdict {
    let cfg = toy_config();
    let records = run_experiment(&cfg).unwrap();
    let (Some(mlp), Some(reg), Some(rfr)) = (
        target_medians(&records, Method::Mlp, 0.0),
        target_medians(&records, Method::Reg, 1.0),
        target_medians(&records, Method::Rfr, 1.0),
    ) else {
        return Verdict {
            passed: false,
            detail: "a training run failed".into(),
        };
    };
    let reduction = 1.0 - rfr.0 / reg.0;
    let acc_gap = (rfr.1 - mlp.1).abs();
    Verdict {
        passed: rfr.0 <= reg.0 && reg.0 <= mlp.0 && reduction >= 0.30 && acc_gap <= 0.05 && rfr.2 == 5,
        detail: format!(
            "median target dDP over {} seeds: RFR {:.4} <= REG {:.4} <= MLP {:.4}; RFR {:.1}% below REG (need >= 30%); \
             accuracy RFR {:.4} vs MLP {:.4} (gap {:.2} points, max 5); rho {} ({:?}) p {}",
            rfr.2,
            rfr.0,
            reg.0,
            mlp.0,
            100.0 * reduction,
            rfr.1,
            mlp.1,
            100.0 * acc_gap,
            cfg.train.rho,
            cfg.train.rho_scale,
            cfg.train.p_norm
        ),
    }
}

fn collapse_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let data = dataset(&mut rng, 120, 3, 2.0);
    let cfg = TrainConfig {
        lambda: 0.0,
        epochs: 60,
        rho: 0.2,
        ..TrainConfig::default()
    };
    let trained = train(&data, &[8, 6], &cfg).unwrap().params;
    let mut p = ModelParams::init(&[3, 8, 6, 1], cfg.seed).unwrap();
    let mut opt = OptimizerState::new(&p, cfg.optimizer);
    let obj = ClassificationObjective {
        labels: &data.y,
        variant: cfg.loss,
    };
    for _ in 0..cfg.epochs {
        let (_, g) = backward_scalar(&p, &obj, data.features()).unwrap();
        p = opt.adam_step(&p, &g).unwrap();
    }
    let bits = |q: &ModelParams| q.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let erm_equal = bits(&trained) == bits(&p);

    let small = r#"
name = "collapse"
methods = ["REG", "RFR"]
lambdas = [1.0]
seeds = [0, 1, 2, 3, 4]
hidden = [16]
[dataset]
kind = "toy"
n = 600
[shift]
kind = "synthetic"
alpha = 1.0
beta = 2.0
[train]
rho = 0.0
p_norm = 2
epochs = 80
optimizer = { lr = 0.005 }
"#;
    let cfg = ExperimentConfig::from_toml_str(small, &Overrides::default()).unwrap();
    let records = run_experiment(&cfg).unwrap();
    let metrics = |m: Method, s: u64| {
        records.iter().find(|r| r.method == m && r.seed == s).map(|r| match &r.outcome {
            Outcome::Ok { source, target, .. } => Some((source.clone(), target.clone())),
            Outcome::Failed { .. } => None,
        })
    };
    let equal_seeds = (0..5u64)
        .filter(|&s| {
            let (a, b) = (metrics(Method::Reg, s), metrics(Method::Rfr, s));
            a.is_some() && a == b && a.as_ref().is_some_and(Option::is_some)
        })
        .count();
    let cells = summarize(&records).len();
    Verdict {
        passed: erm_equal && equal_seeds == 5,
        detail: format!(
            "lambda = 0 training {} the plain ERM loop bit for bit; rho = 0 RFR equals REG on {equal_seeds}/5 seeds ({cells} cells)",
            if erm_equal { "equals" } else { "DIFFERS from" }
        ),
    }
}

fn optional_csv() -> Option<Verdict> {
    let csv = std::env::var("RFR_ACCEPTANCE_CSV").ok()?;
    let schema = std::env::var("RFR_ACCEPTANCE_SCHEMA").ok()?;
    let text = format!(
        r#"
name = "csv"
methods = ["MLP", "REG", "RFR"]
lambdas = [1.0]
seeds = [0, 1, 2, 3, 4]
hidden = [50, 50]
[dataset]
kind = "csv"
path = {csv:?}
schema = {schema:?}
[shift]
kind = "synthetic"
alpha = 1.0
beta = 2.0
[train]
rho = 0.04
p_norm = 2
epochs = 400
optimizer = {{ lr = 2e-3 }}
"#
    );
    let records = match ExperimentConfig::from_toml_str(&text, &Overrides::default()).and_then(|c| run_experiment(&c)) {
        Ok(r) => r,
        Err(e) => {
            return Some(Verdict {
                passed: false,
                detail: format!("could not run: {e}"),
            })
        }
    };
    let get = |m, l| target_medians(&records, m, l).map(|t| t.0);
    Some(match (get(Method::Mlp, 0.0), get(Method::Reg, 1.0), get(Method::Rfr, 1.0)) {
        (Some(mlp), Some(reg), Some(rfr)) => Verdict {
            passed: rfr < reg && reg < mlp,
            detail: format!("median target dDP RFR {rfr:.4} < REG {reg:.4} < MLP {mlp:.4}"),
        },
        _ => Verdict {
            passed: false,
            detail: "a training run failed".into(),
        },
    })
}

#[test]
fn acceptance() {
    let secs = Duration::from_secs;
    let results = [
        report("1", "dual-norm optimality", Some(secs(10)), dual_norm_optimality),
        report("2", "gradient exactness", Some(secs(30)), gradient_exactness),
        report("3", "transport and perturbation theory", Some(secs(60)), theory_suite),
        report("4", "parity shift bound and triangle lemma", None, bound_and_lemma),
        report("5", "end-to-end efficacy on the toy shift", Some(secs(180)), end_to_end),
        report("6", "collapse identities", None, collapse_identities),
    ];
    // best effort only: reported, never gating
    match optional_csv() {
        Some(v) => {
            report("7", "tabular CSV ordering (best effort)", None, || v);
        }
        None => {
            writeln!(
                std::io::stdout().lock(),
                "SKIP [7] tabular CSV ordering (best effort): set RFR_ACCEPTANCE_CSV and RFR_ACCEPTANCE_SCHEMA to run"
            )
            .unwrap();
        }
    }
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, &ok)| !ok).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
