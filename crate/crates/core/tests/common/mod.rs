//! Numerical checks shared by the property tests and the acceptance suite.
#![allow(dead_code)]

use mppo::advantage::{compute_gae, TrajectoryBatch};
use mppo::neuralnet::FlatParamNet;
use mppo::policy::{kl, Policy};
use mppo::ppo::{clipped_loss, ppo_step, PpoConfig};
use mppo::trpo::{conjugate_gradient, surrogate_and_grad, trpo_step, StepContext, TrpoConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

pub fn random_vec(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-scale..scale)).collect()
}

pub fn perturbed(p: &Policy, r: &mut ChaCha8Rng, scale: f64) -> Policy {
    let v: Vec<f64> = p.get_flat().iter().map(|x| x + r.random_range(-scale..scale)).collect();
    p.with_flat(&v).unwrap()
}

pub fn network_gradient_matches_finite_differences() {
    let mut r = rng(100);
    let h = 1e-5;
    for trial in 0..100 {
        let input = r.random_range(1..6);
        let output = r.random_range(1..4);
        let sizes = [input, r.random_range(2..10), r.random_range(2..10), output];
        let net = FlatParamNet::init(&sizes, 1.0, &mut r).unwrap();
        let x = random_vec(&mut r, input, 1.0);
        let cot = random_vec(&mut r, output, 1.0);
        let grad = net.backward(&x, &cot).unwrap();
        let f = |p: &[f64]| {
            let mut n = net.clone();
            n.set_flat(p).unwrap();
            n.forward(&x).unwrap().iter().zip(&cot).map(|(o, c)| o * c).sum::<f64>()
        };
        let theta = net.get_flat().to_vec();
        for i in 0..theta.len() {
            let (mut up, mut dn) = (theta.clone(), theta.clone());
            up[i] += h;
            dn[i] -= h;
            let fd = (f(&up) - f(&dn)) / (2.0 * h);
            let err = rel_err(grad[i], fd);
            assert!(err <= 1e-4 || (grad[i] - fd).abs() < 1e-9, "trial {trial} param {i}: {} vs {fd}", grad[i]);
        }
    }
}

pub fn log_prob_gradient_matches_finite_differences() {
    let mut r = rng(101);
    let h = 1e-5;
    for trial in 0..20 {
        let gaussian = trial % 2 == 0;
        let base = if gaussian {
            Policy::gaussian(3, 2, &mut r).unwrap()
        } else {
            Policy::categorical(3, 4, &mut r).unwrap()
        };
        let p = perturbed(&base, &mut r, 0.3);
        let s = random_vec(&mut r, 3, 1.0);
        let a = p.sample(&s, &mut r).unwrap();
        let out = p.output(&s).unwrap();
        let mut d_out = vec![0.0; p.out_dim()];
        let mut d_ls = vec![0.0; p.log_std().len()];
        p.log_prob_grad_from_output(&out, &a, 1.0, &mut d_out, &mut d_ls);
        let mut grad = p.net().backward(&s, &d_out).unwrap();
        grad.extend(d_ls);
        let theta = p.get_flat();
        for i in 0..theta.len() {
            let (mut up, mut dn) = (theta.clone(), theta.clone());
            up[i] += h;
            dn[i] -= h;
            let fd = (p.with_flat(&up).unwrap().log_prob(&s, &a).unwrap()
                - p.with_flat(&dn).unwrap().log_prob(&s, &a).unwrap())
                / (2.0 * h);
            assert!(rel_err(grad[i], fd) <= 1e-4 || (grad[i] - fd).abs() < 1e-9, "param {i}: {} vs {fd}", grad[i]);
        }
    }
}

pub fn gaussian_entropy_closed_form_and_monte_carlo() {
    let unit = Policy::gaussian_entropy(&[0.0]);
    assert!((unit - 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln()).abs() < 1e-12);
    assert!((Policy::gaussian_entropy(&[0.0; 3]) - 3.0 * unit).abs() < 1e-12);

    let mut r = rng(102);
    let mut p = Policy::gaussian(2, 2, &mut r).unwrap();
    let mut flat = p.get_flat();
    let n = flat.len();
    flat[n - 2] = 0.3;
    flat[n - 1] = -0.7;
    p.set_flat(&flat).unwrap();
    let s = [0.1, -0.2];
    let samples = 200_000;
    let mc = (0..samples)
        .map(|_| {
            let a = p.sample(&s, &mut r).unwrap();
            -p.log_prob(&s, &a).unwrap()
        })
        .sum::<f64>()
        / samples as f64;
    let exact = p.entropy(&[s.to_vec()]).unwrap();
    assert!((mc - exact).abs() < 0.01, "{mc} vs {exact}");
}

pub fn kl_is_nonnegative_and_zero_on_itself() {
    let mut r = rng(103);
    for trial in 0..1000 {
        let base = if trial % 2 == 0 {
            Policy::gaussian(3, 2, &mut r).unwrap()
        } else {
            Policy::categorical(3, 5, &mut r).unwrap()
        };
        let p = perturbed(&base, &mut r, 0.5);
        let q = perturbed(&p, &mut r, 0.5);
        let states: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut r, 3, 1.0)).collect();
        assert!(kl(&p, &q, &states).unwrap() >= 0.0);
        assert!(kl(&p, &p, &states).unwrap().abs() <= 1e-12);
    }
}

pub fn brute_force_gae(rewards: &[f64], values: &[f64], ends: &[(bool, bool)], tv: &[f64], boot: f64, g: f64, l: f64) -> Vec<f64> {
    let n = rewards.len();
    let next_value = |t: usize| -> (f64, bool) {
        let (term, tout) = ends[t];
        if term {
            (0.0, true)
        } else if tout {
            (tv[t], true)
        } else if t + 1 == n {
            (boot, true)
        } else {
            (values[t + 1], false)
        }
    };
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            let mut w = 1.0;
            let mut k = t;
            loop {
                let (nv, stop) = next_value(k);
                sum += w * (rewards[k] + g * nv - values[k]);
                if stop {
                    break;
                }
                w *= g * l;
                k += 1;
            }
            sum
        })
        .collect()
}

/// `instances` random batches with `N <= 20`, random episode boundaries,
/// gamma and lambda, each compared against the brute-force sum.
pub fn gae_random_instances(instances: usize) {
    let mut r = rng(109);
    for _ in 0..instances {
        let n = r.random_range(1..=20);
        let gamma = r.random_range(0.0..0.999);
        let lam = r.random_range(0.0..=1.0);
        let mut b = TrajectoryBatch::default();
        let mut ends = Vec::new();
        for _ in 0..n {
            b.rewards.push(r.random_range(-1.0..1.0));
            b.values.push(r.random_range(-2.0..2.0));
            b.timeout_values.push(r.random_range(-2.0..2.0));
            let end: f64 = r.random();
            let e = (end < 0.15, (0.15..0.3).contains(&end));
            ends.push(e);
            b.terminals.push(e.0);
            b.timeouts.push(e.1);
        }
        let boot = r.random_range(-2.0..2.0);
        let oracle = brute_force_gae(&b.rewards, &b.values, &ends, &b.timeout_values, boot, gamma, lam);
        compute_gae(&mut b, boot, gamma, lam).unwrap();
        for t in 0..n {
            assert!((b.advantages[t] - oracle[t]).abs() <= 1e-12, "advantage {t}: {} vs {}", b.advantages[t], oracle[t]);
        }
    }
}

/// Random batch of `n` samples from `policy` over a few repeated states.
pub fn synthetic_batch(r: &mut ChaCha8Rng, policy: &Policy, n: usize, distinct_states: usize) -> TrajectoryBatch {
    let pool: Vec<Vec<f64>> = (0..distinct_states).map(|_| random_vec(r, policy.obs_dim(), 1.0)).collect();
    let mut b = TrajectoryBatch::default();
    for _ in 0..n {
        let s = pool[r.random_range(0..distinct_states)].clone();
        let a = policy.sample(&s, r).unwrap();
        b.old_log_probs.push(policy.log_prob(&s, &a).unwrap());
        b.states.push(s);
        b.actions.push(a);
        b.advantages.push(r.random_range(-1.0..1.0));
    }
    b.rewards = vec![0.0; n];
    b
}

pub fn cg_matches_direct_solve() {
    let mut r = rng(104);
    for _ in 0..50 {
        let n = 8;
        let m: Vec<Vec<f64>> = (0..n).map(|_| random_vec(&mut r, n, 1.0)).collect();
        // A = M M^T + I is symmetric positive definite
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| m[i][k] * m[j][k]).sum::<f64>() + if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let b = random_vec(&mut r, n, 1.0);
        let op = |v: &[f64]| Ok(a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect());
        let x = conjugate_gradient(op, &b, 50).unwrap();
        let direct = solve(a.clone(), b.clone());
        for (xi, di) in x.iter().zip(&direct) {
            assert!((xi - di).abs() <= 1e-8, "{xi} vs {di}");
        }
    }
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (b[i] - (i + 1..n).map(|k| a[i][k] * x[k]).sum::<f64>()) / a[i][i];
    }
    x
}

pub fn fisher_vector_product_is_consistent_and_damped() {
    let mut r = rng(105);
    for trial in 0..10 {
        let base = if trial % 2 == 0 {
            Policy::gaussian(3, 2, &mut r).unwrap()
        } else {
            Policy::categorical(3, 4, &mut r).unwrap()
        };
        let p = perturbed(&base, &mut r, 0.3);
        let batch = synthetic_batch(&mut r, &p, 64, 8);
        let ctx = StepContext::new(&p, &batch).unwrap();
        let v = random_vec(&mut r, p.num_params(), 1.0);
        let a = ctx.fisher_vector_product(&v, 0.0, 1e-4).unwrap();
        let b = ctx.fisher_vector_product(&v, 0.0, 1e-3).unwrap();
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        assert!(diff <= 1e-3 * norm.max(1e-12), "trial {trial}: {diff} vs {norm}");

        let damping = 0.1;
        let hv = ctx.fisher_vector_product(&v, damping, 1e-4).unwrap();
        let vhv: f64 = v.iter().zip(&hv).map(|(x, y)| x * y).sum();
        let vv: f64 = v.iter().map(|x| x * x).sum();
        assert!(vhv >= damping * vv * (1.0 - 1e-6), "{vhv} < {}", damping * vv);
    }
}

pub fn surrogate_gradient_matches_finite_differences() {
    let mut r = rng(106);
    let h = 1e-5;
    for trial in 0..50 {
        let base = if trial % 2 == 0 {
            Policy::gaussian(2, 2, &mut r).unwrap()
        } else {
            Policy::categorical(2, 3, &mut r).unwrap()
        };
        let old = perturbed(&base, &mut r, 0.3);
        let batch = synthetic_batch(&mut r, &old, 40, 6);
        let cur = perturbed(&old, &mut r, 0.05);
        let (_, g) = surrogate_and_grad(&cur, &old, &batch).unwrap();
        let dir = random_vec(&mut r, g.len(), 1.0);
        let theta = cur.get_flat();
        let at = |s: f64| {
            let p: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + s * d).collect();
            surrogate_and_grad(&cur.with_flat(&p).unwrap(), &old, &batch).unwrap().0
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        let analytic: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        assert!(rel_err(analytic, fd) <= 1e-4 || (analytic - fd).abs() < 1e-9, "{analytic} vs {fd}");
    }
}

/// Two states, two actions, advantages favouring action 0 in state 0 and
/// action 1 in state 1.
pub fn two_state_batch(r: &mut ChaCha8Rng, policy: &Policy) -> TrajectoryBatch {
    let states = [vec![0.0, 1.0], vec![1.0, 0.0]];
    let mut b = TrajectoryBatch::default();
    for t in 0..200 {
        let s = states[t % 2].clone();
        let a = policy.sample(&s, r).unwrap();
        let good = (a[0] as usize) == t % 2;
        b.old_log_probs.push(policy.log_prob(&s, &a).unwrap());
        b.states.push(s);
        b.actions.push(a);
        b.advantages.push(if good { 1.0 } else { -1.0 } + r.random_range(-0.1..0.1));
    }
    b.rewards = vec![0.0; 200];
    b
}

pub fn trpo_steps_respect_trust_region() {
    let mut r = rng(107);
    let cfg = TrpoConfig::default();
    let mut accepted = 0;
    for _ in 0..100 {
        let p = perturbed(&Policy::categorical(2, 2, &mut r).unwrap(), &mut r, 0.2);
        let batch = two_state_batch(&mut r, &p);
        let before = StepContext::new(&p, &batch).unwrap().surrogate(&p).unwrap();
        let out = trpo_step(&p, &batch, &cfg).unwrap();
        let states = batch.states.clone();
        let achieved = kl(&p, &out.policy, &states).unwrap();
        assert!(achieved <= 1.5 * cfg.max_kl, "kl {achieved}");
        if out.accepted {
            accepted += 1;
            assert!(out.gain > before, "gain {} not above {before}", out.gain);
        }
    }
    assert!(accepted >= 95, "only {accepted} accepted");
}

pub fn ppo_increases_probability_of_favoured_action() {
    let cfg = PpoConfig::default();
    let mut ascended = 0;
    for seed in 0..100 {
        let mut r = rng(1000 + seed);
        let p = Policy::categorical(2, 2, &mut r).unwrap();
        let batch = two_state_batch(&mut r, &p);
        let before = clipped_loss(&p, &batch, cfg.clip_eps).unwrap().0;
        let out = ppo_step(&p, &batch, &cfg, &mut r).unwrap();
        let after = clipped_loss(&out.policy, &batch, cfg.clip_eps).unwrap().0;
        if after > before {
            ascended += 1;
        }
        if seed == 0 {
            let lp = |q: &Policy| q.log_prob(&[0.0, 1.0], &[0.0]).unwrap();
            assert!(lp(&out.policy) > lp(&p));
        }
    }
    assert!(ascended >= 95, "objective rose in only {ascended} of 100 runs");
}

pub fn clipped_gradient_matches_finite_differences_away_from_kinks() {
    let mut r = rng(108);
    let eps = 0.2;
    let h = 1e-6;
    let mut checked = 0;
    while checked < 30 {
        let old = perturbed(&Policy::gaussian(2, 1, &mut r).unwrap(), &mut r, 0.2);
        let batch = synthetic_batch(&mut r, &old, 30, 30);
        let cur = perturbed(&old, &mut r, 0.1);
        let ctx = StepContext::new(&old, &batch).unwrap();
        let out = cur.outputs(&ctx.table);
        let near_kink = (0..batch.len()).any(|t| {
            let lp = cur.log_prob_from_output(&out[ctx.table.index[t]], &batch.actions[t]);
            let ratio = (lp - batch.old_log_probs[t]).exp();
            ((ratio - (1.0 - eps)).abs() < 1e-3) || ((ratio - (1.0 + eps)).abs() < 1e-3)
        });
        if near_kink {
            continue;
        }
        let (_, g) = clipped_loss(&cur, &batch, eps).unwrap();
        let dir = random_vec(&mut r, g.len(), 1.0);
        let theta = cur.get_flat();
        let at = |s: f64| {
            let p: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + s * d).collect();
            clipped_loss(&cur.with_flat(&p).unwrap(), &batch, eps).unwrap().0
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        let analytic: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        assert!(rel_err(analytic, fd) <= 1e-4 || (analytic - fd).abs() < 1e-8, "{analytic} vs {fd}");
        checked += 1;
    }
}
