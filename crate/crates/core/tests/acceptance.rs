//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Pass criterion numbers to run a subset:
//! `cargo test -p dsq-core --test acceptance -- 1 4`.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use dsq_core::codec::{build_codebooks, encode_sequence, Codebook, CodebookHeader, QuantizerSpec};
use dsq_core::decoder::{brute_force_decode, fuse_outputs, ml_decode, BRUTE_FORCE_MAX_CELLS};
use dsq_core::harness::{random_topology, run_trial_detailed, sweep_rate, sweep_resolution, Scheme, TrialStatus};
use dsq_core::harness::{ExperimentConfig, TopologyChoice};
use dsq_core::model::{generate_signals, mse};
use dsq_core::network::{connectivity_report, simulate_network, LinkFailureProcess, NetworkTopology, NodeId};
use dsq_core::ratebound::{estimate_distortion, resolution_for_rate};
use dsq_core::seed;
use dsq_core::{Codeword, SparsityModel, SystemParams};
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict { pass, detail: detail.into() }
    }
}

/// Collects named sub-checks; the criterion passes only if all do.
#[derive(Default)]
struct Checks(Vec<(bool, String)>);

impl Checks {
    fn add(&mut self, pass: bool, what: impl Into<String>) {
        self.0.push((pass, what.into()));
    }

    fn verdict(self) -> Verdict {
        let pass = self.0.iter().all(|(p, _)| *p);
        let detail = self
            .0
            .iter()
            .map(|(p, w)| format!("{}{w}", if *p { "" } else { "FAILED " }))
            .collect::<Vec<_>>()
            .join("; ");
        Verdict::new(pass, detail)
    }
}

fn data(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

fn gaussian_oracle() -> BTreeMap<(String, usize), f64> {
    data("gaussian_distortion.csv")
        .lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            ((f[0].to_string(), f[1].parse().unwrap()), f[3].parse().unwrap())
        })
        .collect()
}

fn threshold_curves() -> Verdict {
    let start = Instant::now();
    let (n, t, eps) = (10, 90, 1.0);
    let models: Vec<SparsityModel> = [6, 12, 24, 36]
        .iter()
        .map(|&k| SparsityModel::Overall { k })
        .chain([2, 4, 8, 12].iter().map(|&k_t| SparsityModel::Structured { k_s: 3, k_t }))
        .collect();
    let grid: Vec<usize> = (1..=64).collect();
    let rows = sweep_resolution(n, t, &models, eps, &grid).unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    let mut oracle = BTreeMap::new();
    for line in data("threshold_curves.csv").lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let key = (f[0].to_string(), f[1].parse::<usize>().unwrap(), f[4].parse::<usize>().unwrap());
        oracle.insert(key, (f[5].parse::<f64>().unwrap(), f[6].parse::<usize>().unwrap()));
    }

    let mut checks = Checks::default();
    let mut worst = 0.0f64;
    let mut u_mismatch = 0;
    for r in &rows {
        let (want, u) = oracle[&(r.model.to_string(), r.k, r.l)];
        worst = worst.max(((r.rate - want) / want).abs());
        u_mismatch += usize::from(r.u != u);
    }
    checks.add(rows.len() == oracle.len() && worst <= 1e-9, format!("{} points, max rel err {worst:.2e}", rows.len()));
    checks.add(u_mismatch == 0, format!("{u_mismatch} argmax mismatches"));

    let curve = |model: &str, k: usize| -> Vec<f64> {
        rows.iter().filter(|r| r.model == model && r.k == k).map(|r| r.rate).collect()
    };
    let mut below = true;
    let mut monotone = true;
    for k in [6, 12, 24, 36] {
        let (ov, st) = (curve("overall", k), curve("structured", k));
        below &= ov.iter().zip(&st).all(|(o, s)| s < o);
        monotone &= ov.windows(2).all(|w| w[1] >= w[0]) && st.windows(2).all(|w| w[1] >= w[0]);
    }
    checks.add(below, "structured below overall at every l");
    checks.add(monotone, "curves non-decreasing in l");
    checks.add(elapsed < 5.0, format!("{elapsed:.3} s"));
    checks.verdict()
}

fn rate_sweep_ordering() -> Verdict {
    let start = Instant::now();
    let rates = [0.4, 0.6, 0.8, 1.0, 1.2];
    let cfg = ExperimentConfig::default();
    let sweep = sweep_rate(&cfg, &rates, 200).unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    let point = |scheme: Scheme, r: f64| {
        let row = sweep.row(scheme, r).unwrap();
        (row.mean_mse, row.std_err.unwrap_or(0.0))
    };
    let mut checks = Checks::default();

    let proposed: Vec<(f64, f64)> =
        rates.iter().map(|&r| point(Scheme::Proposed, r)).map(|(m, s)| (m.unwrap(), s)).collect();
    let monotone = proposed.windows(2).all(|w| w[1].0 <= w[0].0 + 2.0 * (w[0].1.powi(2) + w[1].1.powi(2)).sqrt());
    let curve = proposed.iter().map(|(m, _)| format!("{m:.2e}")).collect::<Vec<_>>().join(" ");
    checks.add(monotone, format!("proposed [{curve}] non-increasing within 2 SE"));

    let at1 = |s| point(s, 1.0).0.unwrap();
    let (p1, qiht1, fista1) = (at1(Scheme::Proposed), at1(Scheme::CsQiht), at1(Scheme::CsFista));
    checks.add(p1 < qiht1 && p1 < fista1, format!("R=1 proposed {p1:.2e} < qiht {qiht1:.2e}, fista {fista1:.2e}"));

    let qiht_floor = point(Scheme::CsQiht, 1.2).0.unwrap();
    let fista_floor = point(Scheme::CsFista, 1.2).0.unwrap();
    let within3 = |x: f64, target: f64| x >= target / 3.0 && x <= target * 3.0;
    checks.add(within3(qiht_floor, 9e-3), format!("qiht floor {qiht_floor:.2e} vs 9e-3 (x3)"));
    checks.add(within3(fista_floor, 4e-2), format!("fista floor {fista_floor:.2e} vs 4e-2 (x3)"));

    for r in [1.0, 1.2] {
        let uni = point(Scheme::Uniform, r).0.unwrap();
        let others = [Scheme::Proposed, Scheme::CsQiht, Scheme::CsFista].map(|s| point(s, r).0.unwrap());
        checks.add(others.iter().all(|&o| uni > o), format!("uniform worst at R={r} ({uni:.3})"));
    }
    checks.add(elapsed < 1200.0, format!("{elapsed:.0} s"));
    checks.verdict()
}

fn decode_reliability() -> Verdict {
    let cfg = ExperimentConfig::default();
    let l = resolution_for_rate(cfg.rate, cfg.n, cfg.t, cfg.model.k(), cfg.epsilon).unwrap();
    let q = QuantizerSpec::new(l, cfg.gamma).unwrap();
    let trials = 500u64;
    let (mut failures, mut inexact, mut mse_off) = (0, 0, 0);
    for i in 0..trials {
        let out = run_trial_detailed(&cfg, seed::trial_seed(cfg.master_seed, i, "proposed")).unwrap();
        if out.record.status.is_failure() {
            failures += 1;
            continue;
        }
        let quantized = out.signals.values().mapv(|v| q.value(v));
        inexact += usize::from(out.estimate != quantized);
        let oracle = mse(out.signals.view(), quantized.view()).unwrap();
        mse_off += usize::from(out.record.mse != oracle);
    }
    let frac = failures as f64 / trials as f64;
    let mut checks = Checks::default();
    checks.add(l == 1040, format!("l={l}"));
    checks.add(frac <= 0.10, format!("failure fraction {frac:.3} over {trials} trials"));
    checks.add(
        inexact == 0 && mse_off == 0,
        format!("{inexact} inexact reconstructions, {mse_off} per-trial MSE mismatches"),
    );
    checks.verdict()
}

fn agrees(y: &Codeword, books: &[Codebook], model: &SparsityModel, q: &QuantizerSpec) -> bool {
    let ml = ml_decode(y, books, model, q).unwrap();
    let bf = brute_force_decode(y, books, model, q).unwrap();
    ml.status == bf.status && ml.hypothesis == bf.hypothesis
}

fn oracle_equivalence() -> Verdict {
    let mut compared = 0usize;
    let mut mismatches = Vec::new();
    let mut compare = |label: String, agrees: bool| {
        compared += 1;
        if !agrees {
            mismatches.push(label);
        }
        compared
    };

    let mut exhaustive = 0;
    // Every possible register for small codebooks at n=2, T=3, k=1, l=2.
    let model = SparsityModel::Overall { k: 1 };
    let q = QuantizerSpec::new(2, 2.0).unwrap();
    for b in [3usize, 4, 5, 6, 8] {
        let params = SystemParams::new(2, 3, b, 2, 2.0, 1.0).unwrap();
        for s in 0..24u64 {
            let books = build_codebooks(&params, 1, s).unwrap();
            for word in 0u64..(1 << b) {
                let bits: Vec<bool> = (0..b).map(|i| word >> i & 1 == 1).collect();
                exhaustive = compare(
                    format!("b={b} seed={s} y={word:b}"),
                    agrees(&Codeword::from_bits(&bits), &books, &model, &q),
                );
            }
        }
    }

    let mut rng = seed::rng(0xacce);
    for case in 0..200 {
        let n = rng.random_range(1..=3usize);
        let t = rng.random_range(1..=BRUTE_FORCE_MAX_CELLS / n);
        let l = rng.random_range(1..=3usize);
        let model = if rng.random_bool(0.5) || n * t < 2 {
            SparsityModel::Overall { k: rng.random_range(1..=2usize.min(n * t)) }
        } else {
            SparsityModel::Structured { k_s: rng.random_range(1..=n.min(2)), k_t: 1 }
        };
        let b = rng.random_range(4..=24usize);
        let seed = rng.random::<u64>();
        let params = SystemParams::new(n, t, b, l, 2.0, 1.0).unwrap();
        let q = QuantizerSpec::new(l, 2.0).unwrap();
        let books = build_codebooks(&params, model.k(), seed).unwrap();
        let y = if rng.random_bool(0.75) {
            let signals = generate_signals(&params, &model, seed).unwrap();
            let regs: Vec<Codeword> =
                (0..n).map(|m| encode_sequence(&books[m], &q, &signals.values().row(m).to_vec()).unwrap()).collect();
            fuse_outputs(b, &regs).unwrap()
        } else {
            let bits: Vec<bool> = (0..b).map(|_| rng.random_bool(0.3)).collect();
            Codeword::from_bits(&bits)
        };
        compare(format!("random case {case}"), agrees(&y, &books, &model, &q));
    }

    Verdict::new(
        mismatches.is_empty(),
        format!(
            "{exhaustive} exhaustive + {} random instances, {} mismatches{}",
            compared - exhaustive,
            mismatches.len(),
            mismatches.first().map(|m| format!(" (first: {m})")).unwrap_or_default()
        ),
    )
}

fn fusion_invariance() -> Verdict {
    let mut rng = seed::rng(0xf0510);
    let (mut agree, mut attempts, mut partial, mut partial_ok) = (0, 0, 0, 0);
    while agree < 1000 && attempts < 20_000 {
        attempts += 1;
        let n = rng.random_range(1..=6usize);
        let relays = rng.random_range(0..=6usize);
        let ports = rng.random_range(1..=3usize);
        let topo = random_topology(n, relays, ports, 0.35, rng.random()).unwrap();
        let state = LinkFailureProcess::Iid { p_fail: 0.15, seed: rng.random() }.realize(&topo).unwrap();
        let b = rng.random_range(1..=160usize);
        let inputs: Vec<Codeword> =
            (0..n).map(|_| Codeword::from_bits(&(0..b).map(|_| rng.random_bool(0.2)).collect::<Vec<_>>())).collect();
        let out = simulate_network(&topo, &state, &inputs).unwrap();
        let y = fuse_outputs(b, &out.outputs).unwrap();
        let reach = connectivity_report(&topo, &state).unwrap().reachable;
        assert_eq!(reach, out.reachable);
        if out.reachable.iter().all(|r| *r) {
            let hop = NetworkTopology::single_hop(n).unwrap();
            let single = simulate_network(&hop, &hop.all_alive(), &inputs).unwrap();
            agree += usize::from(y == fuse_outputs(b, &single.outputs).unwrap());
        } else {
            partial += 1;
            let live: Vec<Codeword> =
                inputs.iter().zip(&out.reachable).filter(|(_, r)| **r).map(|(c, _)| c.clone()).collect();
            partial_ok += usize::from(y == fuse_outputs(b, &live).unwrap());
        }
    }
    let all_reachable = attempts - partial;

    // Cutting every out-link of one encoder in a random DAG.
    let (mut both_unique, mut rows_ok, mut zeroed) = (0, 0, 0);
    let instances = 50;
    for s in 0..instances as u64 {
        let cfg = ExperimentConfig::default();
        let topo = random_topology(cfg.n, 3, 2, 0.35, seed::mix(0xd15c, s)).unwrap();
        let m = (s as usize) % cfg.n;
        let cut: Vec<(NodeId, NodeId)> = topo.links().filter(|(src, _)| *src == NodeId::Encoder(m)).collect();
        let connected =
            ExperimentConfig { topology: TopologyChoice::Graph { source: "random".into(), topology: topo }, ..cfg };
        let severed = ExperimentConfig { failures: LinkFailureProcess::Explicit(cut), ..connected.clone() };
        let a = run_trial_detailed(&connected, s).unwrap();
        let b = run_trial_detailed(&severed, s).unwrap();
        if a.record.status != TrialStatus::Unique || b.record.status != TrialStatus::Unique || b.reachable[m] {
            continue;
        }
        both_unique += 1;
        rows_ok += usize::from((0..cfg.n).filter(|&r| r != m).all(|r| a.estimate.row(r) == b.estimate.row(r)));
        zeroed += usize::from(b.estimate.row(m).iter().all(|v| *v == 0.0));
    }

    let mut checks = Checks::default();
    checks.add(
        agree == 1000 && all_reachable == 1000,
        format!("{agree}/{all_reachable} all-reachable draws match single-hop"),
    );
    checks.add(partial_ok == partial, format!("{partial_ok}/{partial} partial draws equal OR of reachable inputs"));
    checks.add(
        both_unique >= instances * 9 / 10 && rows_ok == both_unique && zeroed == both_unique,
        format!("disconnected encoder: {both_unique}/{instances} unique pairs, {rows_ok} rows match, {zeroed} zeroed"),
    );
    checks.verdict()
}

fn codebook_statistics() -> Verdict {
    let mut checks = Checks::default();
    for k in [1usize, 3, 8] {
        let params = SystemParams::new(5, 20, 100, 64, 2.0, 1.0).unwrap();
        let books = build_codebooks(&params, k, 1000 + k as u64).unwrap();
        let ones: u64 = books.iter().map(Codebook::count_ones).sum();
        let bits: u64 = books.iter().map(Codebook::bit_count).sum();
        let p = std::f64::consts::LN_2 / k as f64;
        let sd = (bits as f64 * p * (1.0 - p)).sqrt();
        let z = (ones as f64 - bits as f64 * p) / sd;
        checks.add(z.abs() <= 3.0, format!("k={k}: density {:.5} vs {p:.5} (z={z:+.2})", ones as f64 / bits as f64));
    }

    let header = CodebookHeader::new(4, 9, 17, 83, 3, 0x5eed);
    let first = header.regenerate().unwrap();
    let second = CodebookHeader::from_toml(&header.to_toml()).unwrap().regenerate().unwrap();
    let single: Vec<Codebook> = (0..4).map(|m| Codebook::generate(83, 9, 17, 3, m, 0x5eed).unwrap()).collect();
    checks.add(first == second && first == single, "regeneration bit-exact");
    checks.verdict()
}

fn quantizer_properties() -> Verdict {
    let mut checks = Checks::default();
    let (mut zero_ok, mut fixed_ok, mut fixed_total) = (true, true, 0);
    for l in 1..=300 {
        for gamma in [0.1, 1.0, 2.0, 7.5] {
            let q = QuantizerSpec::new(l, gamma).unwrap();
            zero_ok &= q.quantize(0.0) == (0, 0.0);
            for j in 1..=l {
                let lv = q.level(j);
                fixed_total += 1;
                let (idx, v) = q.quantize(lv);
                fixed_ok &= v == lv && (idx == j || (lv == 0.0 && idx == 0));
            }
        }
    }
    checks.add(zero_ok, "Q(0) = 0 for l in 1..=300");
    checks.add(fixed_ok, format!("{fixed_total} fixed points"));

    let oracle = gaussian_oracle();
    let (n, t, k) = (5, 20, 3);
    let model = SparsityModel::Overall { k };
    let mut prev = f64::INFINITY;
    let mut decreasing = true;
    for l in [2usize, 4, 8, 16] {
        let q = QuantizerSpec::new(l, 2.0).unwrap();
        let est = estimate_distortion(&q, &model, n, t, 20_000, 0xd157).unwrap();
        let want = k as f64 / (n * t) as f64 * oracle[&("dead-zone".to_string(), l)];
        let z = (est.d_hat - want) / est.std_err;
        decreasing &= est.d_hat < prev;
        prev = est.d_hat;
        checks.add(z.abs() <= 3.0, format!("l={l}: {:.5} vs {want:.5} (z={z:+.2})", est.d_hat));
    }
    checks.add(decreasing, "strictly decreasing over l in {2,4,8,16}");
    checks.verdict()
}

fn main() {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 7] = [
        ("threshold curves match arbitrary-precision oracle", threshold_curves),
        ("rate sweep ordering and floors", rate_sweep_ordering),
        ("decode reliability at guaranteed rate", decode_reliability),
        ("ML decoder equals brute force", oracle_equivalence),
        ("multi-hop fusion invariance", fusion_invariance),
        ("codebook statistics", codebook_statistics),
        ("quantizer properties", quantizer_properties),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        failed += usize::from(!v.pass);
        println!(
            "{} criterion {id} ({name}) [{:.1} s]: {}",
            if v.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
