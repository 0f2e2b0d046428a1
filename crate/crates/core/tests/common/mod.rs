//! Oracles shared by integration tests and the acceptance suite. They are
//! written against the benchmark rules directly, not the library's code.
#![allow(dead_code)]

/// Independent RockSample rule set: N = y+1, S = y-1, E = x+1 (exit at the
/// east edge), W = x-1, Sample, Check_i. Checks never change the state.
#[derive(Debug, Clone)]
pub struct RefRockSample {
    pub n: usize,
    pub rocks: Vec<(usize, usize)>,
    pub good: Vec<bool>,
    pub pos: (usize, usize),
}

impl RefRockSample {
    /// Returns (reward, terminal).
    pub fn step(&mut self, a: usize) -> (f64, bool) {
        let (x, y) = self.pos;
        match a {
            0 => {
                if y + 1 < self.n {
                    self.pos.1 += 1
                }
            }
            1 => {
                if y > 0 {
                    self.pos.1 -= 1
                }
            }
            2 => {
                if x + 1 == self.n {
                    return (10.0, true);
                }
                self.pos.0 += 1;
            }
            3 => {
                if x > 0 {
                    self.pos.0 -= 1
                }
            }
            4 => {
                for (i, &r) in self.rocks.iter().enumerate() {
                    if r == self.pos {
                        return if self.good[i] {
                            self.good[i] = false;
                            (10.0, false)
                        } else {
                            (-10.0, false)
                        };
                    }
                }
            }
            _ => {}
        }
        (0.0, false)
    }
}

/// Enumerates every (position, rock-values) state of a RockSample instance.
fn states(n: usize, k: usize) -> Vec<((usize, usize), Vec<bool>)> {
    let mut out = Vec::new();
    for mask in 0..(1usize << k) {
        for y in 0..n {
            for x in 0..n {
                out.push(((x, y), (0..k).map(|i| mask >> i & 1 == 1).collect()));
            }
        }
    }
    out
}

fn state_index(n: usize, pos: (usize, usize), good: &[bool]) -> usize {
    let mask: usize = good.iter().enumerate().map(|(i, &g)| (g as usize) << i).sum();
    mask * n * n + pos.1 * n + pos.0
}

/// Optimal discounted value of the fully observed RockSample MDP from the
/// start cell, averaged over the initial rock values (each good w.p. 1/2).
/// Value iteration to a 1e-12 fixed point.
pub fn rocksample_optimal_value(n: usize, rocks: &[(usize, usize)], gamma: f64) -> f64 {
    let k = rocks.len();
    let all = states(n, k);
    let n_actions = 5 + k;
    let mut v = vec![0.0; all.len()];
    loop {
        let mut delta: f64 = 0.0;
        let mut next = v.clone();
        for (s, (pos, good)) in all.iter().enumerate() {
            let mut best = f64::NEG_INFINITY;
            for a in 0..n_actions {
                let mut env = RefRockSample {
                    n,
                    rocks: rocks.to_vec(),
                    good: good.clone(),
                    pos: *pos,
                };
                let (r, term) = env.step(a);
                let q = if term { r } else { r + gamma * v[state_index(n, env.pos, &env.good)] };
                best = best.max(q);
            }
            delta = delta.max((best - v[s]).abs());
            next[s] = best;
        }
        v = next;
        if delta < 1e-12 {
            break;
        }
    }
    let start = (0, n / 2);
    let masks = 1usize << k;
    (0..masks)
        .map(|m| {
            let good: Vec<bool> = (0..k).map(|i| m >> i & 1 == 1).collect();
            v[state_index(n, start, &good)]
        })
        .sum::<f64>()
        / masks as f64
}

/// Expected discounted return of the uniformly random policy over at most
/// `max_steps` steps, by backward induction over (steps left, state).
pub fn rocksample_random_policy_value(n: usize, rocks: &[(usize, usize)], gamma: f64, max_steps: usize) -> f64 {
    let k = rocks.len();
    let all = states(n, k);
    let n_actions = 5 + k;
    let mut v = vec![0.0; all.len()];
    for _ in 0..max_steps {
        let mut next = vec![0.0; all.len()];
        for (s, (pos, good)) in all.iter().enumerate() {
            let mut total = 0.0;
            for a in 0..n_actions {
                let mut env = RefRockSample {
                    n,
                    rocks: rocks.to_vec(),
                    good: good.clone(),
                    pos: *pos,
                };
                let (r, term) = env.step(a);
                total += if term { r } else { r + gamma * v[state_index(n, env.pos, &env.good)] };
            }
            next[s] = total / n_actions as f64;
        }
        v = next;
    }
    let start = (0, n / 2);
    let masks = 1usize << k;
    (0..masks)
        .map(|m| {
            let good: Vec<bool> = (0..k).map(|i| m >> i & 1 == 1).collect();
            v[state_index(n, start, &good)]
        })
        .sum::<f64>()
        / masks as f64
}

/// Two-state deterministic chain: action 0 stays, action 1 switches; staying
/// in state 1 pays 1. Returns Q[s][a] by value iteration.
pub fn chain_q_values(gamma: f64) -> [[f64; 2]; 2] {
    let next = |s: usize, a: usize| if a == 0 { s } else { 1 - s };
    let reward = |s: usize, a: usize| if s == 1 && a == 0 { 1.0 } else { 0.0 };
    let mut q = [[0.0f64; 2]; 2];
    for _ in 0..100_000 {
        let mut nq = [[0.0; 2]; 2];
        for s in 0..2 {
            for a in 0..2 {
                let s2 = next(s, a);
                nq[s][a] = reward(s, a) + gamma * q[s2][0].max(q[s2][1]);
            }
        }
        let d = (0..2).flat_map(|s| (0..2).map(move |a| (s, a))).map(|(s, a)| (nq[s][a] - q[s][a]).abs()).fold(0.0, f64::max);
        q = nq;
        if d < 1e-13 {
            break;
        }
    }
    q
}

/// Builds the chain's four transitions as replay entries over one-hot states.
pub fn chain_transitions() -> Vec<guided_rl::agents::Transition> {
    use guided_rl::obs::Action;
    let one_hot = |s: usize| if s == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] };
    let mut out = Vec::new();
    for s in 0..2 {
        for a in 0..2 {
            let s2 = if a == 0 { s } else { 1 - s };
            out.push(guided_rl::agents::Transition {
                history: one_hot(s),
                action: Action::Discrete(a),
                reward: if s == 1 && a == 0 { 1.0 } else { 0.0 },
                next_history: one_hot(s2),
                terminal: false,
            });
        }
    }
    out
}

/// Central finite-difference check of `Mlp::backward` on a random net and a
/// random linear loss; returns the worst relative error.
pub fn gradient_check(seed: u64) -> f64 {
    use guided_rl::nn::{Activation, Mlp};
    use guided_rl::rng::RngStream;
    let mut rng = RngStream::new(seed, "gradcheck");
    let depth = 1 + rng.below(3);
    let mut sizes = vec![1 + rng.below(6)];
    for _ in 0..depth {
        sizes.push(1 + rng.below(7));
    }
    let act = if rng.bernoulli(0.5) { Activation::Tanh } else { Activation::Relu };
    let mut net = Mlp::new(&sizes, act, Activation::Identity, &mut rng).unwrap();
    for p in net.params_mut() {
        *p += rng.normal(0.0, 0.1);
    }
    let x: Vec<f64> = (0..sizes[0]).map(|_| rng.normal(0.0, 1.0)).collect();
    let w: Vec<f64> = (0..*sizes.last().unwrap()).map(|_| rng.normal(0.0, 1.0)).collect();
    let loss = |net: &Mlp| -> f64 {
        net.forward(&x).unwrap().iter().zip(&w).map(|(o, w)| o * w).sum::<f64>()
            + 0.5 * net.forward(&x).unwrap().iter().map(|o| o * o).sum::<f64>()
    };
    let cache = net.forward_cached(&x).unwrap();
    let out_grad: Vec<f64> = cache.output().iter().zip(&w).map(|(o, w)| w + o).collect();
    let mut g = net.zero_grads();
    net.backward(&cache, &out_grad, &mut g).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..net.num_params() {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + h;
        let up = loss(&net);
        net.params_mut()[i] = orig - h;
        let dn = loss(&net);
        net.params_mut()[i] = orig;
        let fd = (up - dn) / (2.0 * h);
        // Kinks of relu make finite differences meaningless within h of zero.
        let rel = (fd - g[i]).abs() / (fd.abs().max(g[i].abs()).max(1e-6));
        let abs = (fd - g[i]).abs();
        worst = worst.max(if abs < 1e-9 { 0.0 } else { rel });
    }
    worst
}
