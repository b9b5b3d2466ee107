//! Acceptance criteria. Each test prints one PASS/FAIL line to stderr and
//! then asserts. The Maze experiments (six seeds, one million steps each)
//! are trained once per variant and shared between criteria; artifacts land
//! under the cargo target tmp dir.

mod common;

use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use mppo::controller::{min_max_normalize, score, theorem1_bound, Mode};
use mppo::harness::run::write_artifacts;
use mppo::harness::{run, train, Algorithm, EnvKind, RunConfig, RunOutput};
use mppo::parallel;
use mppo::policy::{kl, Policy};
use mppo::ppo::clipped_term;

const SEEDS: [u64; 6] = [0, 1, 2, 3, 4, 5];
const TOTAL_STEPS: usize = 1_000_000;

fn report(criterion: u32, title: &str, pass: bool, detail: &str) {
    let line = format!("criterion {criterion} [{}] {title}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn artifact_root() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
enum Variant {
    Single,
    Mppo,
    ReplaceWorst,
    Alpha0,
    Alpha03,
    Alpha05,
}

impl Variant {
    fn config(self, seed: u64) -> RunConfig {
        let (mode, alpha) = match self {
            Variant::Single => (Mode::SinglePath, 0.1),
            Variant::Mppo => (Mode::Mppo, 0.1),
            Variant::ReplaceWorst => (Mode::MppoReplaceWorst, 0.1),
            Variant::Alpha0 => (Mode::Mppo, 0.0),
            Variant::Alpha03 => (Mode::Mppo, 0.3),
            Variant::Alpha05 => (Mode::Mppo, 0.5),
        };
        let mut c = RunConfig::new(EnvKind::Maze, Algorithm::Trpo, mode, 8, alpha, seed);
        c.total_steps = TOTAL_STEPS;
        c.output_dir = Some(artifact_root().join(c.variant_label()).join(format!("seed{seed}")));
        c
    }

    fn slot(self) -> &'static OnceLock<Vec<RunOutput>> {
        static SLOTS: [OnceLock<Vec<RunOutput>>; 6] =
            [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
        &SLOTS[self as usize]
    }
}

/// Six seeds of `variant`, trained on first use.
fn runs(variant: Variant) -> &'static [RunOutput] {
    variant.slot().get_or_init(|| {
        let configs: Vec<RunConfig> = SEEDS.iter().map(|&s| variant.config(s)).collect();
        parallel::map(configs.len(), |i| {
            let out = train(&configs[i]).expect("training run");
            write_artifacts(configs[i].output_dir.as_ref().unwrap(), &configs[i], &out).expect("artifacts");
            out
        })
    })
}

fn final_return(r: &RunOutput) -> f64 {
    r.evals.last().unwrap().mean_return
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Step count where the final unbroken run of 1.0 evaluations begins, if
/// training ends inside one.
fn solved_and_held(r: &RunOutput) -> Option<usize> {
    let tail = r.evals.iter().rev().take_while(|e| e.mean_return == 1.0).count();
    let onset = &r.evals[r.evals.len().checked_sub(tail).filter(|_| tail > 0)?];
    (onset.env_steps <= TOTAL_STEPS).then_some(onset.env_steps)
}

/// Evaluations below 1.0 after the first 1.0.
fn relapses(r: &RunOutput) -> usize {
    match r.evals.iter().position(|e| e.mean_return == 1.0) {
        Some(first) => r.evals[first..].iter().filter(|e| e.mean_return < 1.0).count(),
        None => 0,
    }
}

fn picked_entropy(r: &RunOutput, eval: usize) -> f64 {
    let e = &r.evals[eval];
    e.entropy[e.picked]
}

fn distinct_picks(r: &RunOutput) -> usize {
    r.iterations.iter().map(|i| i.picked).collect::<BTreeSet<_>>().len()
}

#[test]
fn criterion_1_maze_headline() {
    let mp = runs(Variant::Mppo);
    let single = runs(Variant::Single);
    let solved: Vec<Option<usize>> = mp.iter().map(solved_and_held).collect();
    let n_solved = solved.iter().filter(|s| s.is_some()).count();
    let single_mean = mean(single.iter().map(final_return));
    let pass = n_solved >= 4 && single_mean <= 0.5;
    report(
        1,
        "maze headline",
        pass,
        &format!(
            "MP-TRPO solved and held on {n_solved}/6 seeds (final 1.0 streak starts at {:?}, relapsed evals after first 1.0 {:?}); single-path TRPO mean final return {single_mean:.3} (finals {:?})",
            solved,
            mp.iter().map(relapses).collect::<Vec<_>>(),
            single.iter().map(final_return).collect::<Vec<_>>()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_entropy_decay() {
    let mp = runs(Variant::Mppo);
    let single = runs(Variant::Single);
    let mut ok = 0;
    let mut rows = Vec::new();
    for (s, m) in single.iter().zip(mp) {
        let h0 = picked_entropy(s, 0);
        let h_single = picked_entropy(s, s.evals.len() - 1);
        let h_mp = picked_entropy(m, m.evals.len() - 1);
        let good = h_single < 0.5 * h0 && h_mp > h_single;
        ok += usize::from(good);
        rows.push(format!("{h0:.3}->{h_single:.3} vs MP {h_mp:.3}"));
    }
    let pass = ok >= 4;
    report(2, "entropy decay", pass, &format!("{ok}/6 seeds satisfy both conditions; per seed single H0->H(1M) vs MP H(1M): {rows:?}"));
    assert!(pass);
}

#[test]
fn criterion_3_pick_convergence() {
    let mp = runs(Variant::Mppo);
    let mut ok = 0;
    let mut tails = Vec::new();
    for r in mp {
        let n = r.iterations.len();
        let start = n - (n as f64 * 0.2).ceil() as usize;
        let set: BTreeSet<usize> = r.iterations[start..].iter().map(|i| i.picked).collect();
        ok += usize::from(set.len() == 1);
        tails.push(set);
    }
    let pass = ok >= 4;
    report(3, "pick convergence", pass, &format!("constant pick over the final 20% on {ok}/6 seeds; tail pick sets {tails:?}"));
    assert!(pass);
}

#[test]
fn criterion_4_theorem1() {
    let examples = [
        theorem1_bound(0.0, &[1.0, 5.0], 0.25) == 0.25,
        (theorem1_bound(0.1, &[0.0, 9.0], 0.0) - -1.0).abs() < 1e-15,
        theorem1_bound(0.5, &[1.0, 5.0], 0.5) == -3.5,
    ];
    let examples_ok = examples.iter().all(|&b| b);
    let mut total = 0;
    let mut violations = Vec::new();
    for v in [Variant::Mppo, Variant::Alpha0, Variant::Alpha03, Variant::Alpha05] {
        for (seed, r) in runs(v).iter().enumerate() {
            for sw in r.iterations.iter().filter_map(|i| i.switch.as_ref()) {
                total += 1;
                if !sw.holds() {
                    violations.push(format!(
                        "{v:?} seed {seed} iter {}: {} -> {} short by {:.4}",
                        sw.iteration,
                        sw.from,
                        sw.to,
                        sw.bound - sw.eps_est - sw.measured_delta
                    ));
                }
            }
        }
    }
    for v in &violations {
        let _ = std::io::stderr().write_all(format!("  theorem-1 violation: {v}\n").as_bytes());
    }
    let frac = if total == 0 { 1.0 } else { 1.0 - violations.len() as f64 / total as f64 };
    let pass = examples_ok && frac >= 0.95;
    report(
        4,
        "theorem-1 arithmetic",
        pass,
        &format!("unit examples {}; {}/{} switches within bound - eps_est ({:.1}%)", if examples_ok { "exact" } else { "WRONG" }, total - violations.len(), total, 100.0 * frac),
    );
    assert!(pass);
}

#[test]
fn criterion_5_k1_equivalence() {
    let mut results = Vec::new();
    for env in [EnvKind::Maze, EnvKind::Swingup] {
        for algo in [Algorithm::Trpo, Algorithm::Ppo] {
            let dir = artifact_root().join("k1").join(format!("{}_{}", env.name(), algo.name()));
            let cfg = |mode: Mode, sub: &str| {
                let mut c = RunConfig::new(env, algo, mode, 1, 0.1, 0);
                c.total_steps = 30_000;
                c.output_dir = Some(dir.join(sub));
                c
            };
            let a = run(&cfg(Mode::SinglePath, "single_path")).unwrap();
            let b = run(&cfg(Mode::Mppo, "mppo_k1")).unwrap();
            let same = std::fs::read(a.join("eval.csv")).unwrap() == std::fs::read(b.join("eval.csv")).unwrap();
            results.push((format!("{}/{}", env.name(), algo.name()), same));
        }
    }
    let pass = results.iter().all(|r| r.1);
    report(5, "K=1 equivalence", pass, &format!("eval.csv byte-identical: {results:?}"));
    assert!(pass);
}

#[test]
fn criterion_6_numerical_suite() {
    let start = Instant::now();
    let checks: Vec<(&str, fn())> = vec![
        ("network gradient FD, 100 nets", common::network_gradient_matches_finite_differences),
        ("log-prob gradient FD", common::log_prob_gradient_matches_finite_differences),
        ("surrogate gradient FD", common::surrogate_gradient_matches_finite_differences),
        ("CG vs direct 8x8", common::cg_matches_direct_solve),
        ("FVP two-eps", common::fisher_vector_product_is_consistent_and_damped),
        ("GAE brute force", || common::gae_random_instances(2000)),
        ("KL >= 0, KL(p||p) = 0", common::kl_is_nonnegative_and_zero_on_itself),
        ("Gaussian entropy", common::gaussian_entropy_closed_form_and_monte_carlo),
        ("TRPO post-step KL", common::trpo_steps_respect_trust_region),
        ("clip and pick examples", closed_form_examples),
    ];
    let mut failed = Vec::new();
    for (name, f) in checks {
        if std::panic::catch_unwind(f).is_err() {
            failed.push(name);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failed.is_empty() && secs < 300.0;
    report(6, "numerical property suite", pass, &format!("{} failed {failed:?}; {secs:.1}s", failed.len()));
    assert!(pass);
}

fn closed_form_examples() {
    assert_eq!(clipped_term(1.5, 2.0, 0.2), 1.2 * 2.0);
    assert_eq!(clipped_term(0.5, -1.0, 0.2), 0.8 * -1.0);
    assert_eq!(min_max_normalize(&[1.0, 3.0, 5.0]).unwrap(), vec![0.0, 0.5, 1.0]);
    assert_eq!(min_max_normalize(&[2.0, 2.0, 2.0]).unwrap(), vec![0.5; 3]);
    let s = score(&[1.0, 0.0], &[0.0, 1.0], 0.1).unwrap();
    assert!((s[0] - 0.9).abs() < 1e-15 && (s[1] - 0.1).abs() < 1e-15);
    assert_eq!(mppo::controller::argmax_lowest(&[0.2, 0.9, 0.9]), 1);
    let unit = Policy::gaussian_entropy(&[0.0]);
    assert!((unit - 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln()).abs() < 1e-12);
    let mut r = common::rng(7);
    let p = common::perturbed(&Policy::gaussian(3, 2, &mut r).unwrap(), &mut r, 0.3);
    assert!(kl(&p, &p, &[vec![0.1, 0.2, 0.3]]).unwrap().abs() <= 1e-12);
}

#[test]
fn criterion_7_replace_worst_degrades() {
    let self_rep = runs(Variant::Mppo);
    let worst = runs(Variant::ReplaceWorst);
    let m_self = mean(self_rep.iter().map(final_return));
    let m_worst = mean(worst.iter().map(final_return));
    let ratio = |rs: &[RunOutput]| {
        mean(rs.iter().map(|r| {
            let first = r.iterations.first().unwrap().diversity;
            let last = r.iterations.last().unwrap().diversity;
            last / first
        }))
    };
    let (d_self, d_worst) = (ratio(self_rep), ratio(worst));
    let pass = m_worst < m_self && d_worst <= 0.1 && d_self >= 0.5;
    report(
        7,
        "replace-worst degradation",
        pass,
        &format!(
            "mean final return replace_worst {m_worst:.3} vs self {m_self:.3}; buffer distance final/initial replace_worst {d_worst:.3} (need <= 0.1) vs self {d_self:.3} (need >= 0.5)"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_alpha_sweep() {
    let sweep = [(0.0, Variant::Alpha0), (0.1, Variant::Mppo), (0.3, Variant::Alpha03), (0.5, Variant::Alpha05)];
    let finals: Vec<(f64, f64)> = sweep.iter().map(|(a, v)| (*a, mean(runs(*v).iter().map(final_return)))).collect();
    let best = finals[1].1;
    let shape_ok = finals.iter().all(|(_, m)| best >= *m);
    let distinct = |v: Variant| mean(runs(v).iter().map(|r| distinct_picks(r) as f64));
    let (d0, d01) = (distinct(Variant::Alpha0), distinct(Variant::Mppo));
    let pass = shape_ok && d0 < d01;
    report(
        8,
        "alpha sweep shape",
        pass,
        &format!("mean final return by alpha {finals:?}; mean distinct picked indices alpha=0 {d0:.2} vs alpha=0.1 {d01:.2}"),
    );
    assert!(pass);
}
