//! Checks shared by the integration tests and the acceptance target.
#![allow(dead_code)]

use mvap::agents::{ddqn_target, dqn_target};
use mvap::env::{split_bits, ActionIndex, EnvConfig, OffloadEnv, FEATURES};
use mvap::nn::{Dense, QNetwork, Sample};
use mvap::physical::{self, ChannelParams, ComputeParams, MvdParams};
use mvap::rng::EnvRng;
use mvap::sinr::{self, SinrChain};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest error seen by a check, with the case that produced it.
#[derive(Debug, Clone, Default)]
pub struct Worst {
    pub value: f64,
    pub what: String,
    pub count: usize,
}

impl Worst {
    pub fn record(&mut self, value: f64, what: impl FnOnce() -> String) {
        self.count += 1;
        if value > self.value || value.is_nan() {
            self.value = if value.is_nan() { f64::INFINITY } else { value };
            self.what = what();
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

/// Compares every physical-model operation with straight-line arithmetic
/// over `draws` random parameter sets; returns the worst relative error.
pub fn physical_oracles(draws: usize, seed: u64) -> Worst {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst::default();
    for draw in 0..draws {
        let t_s = rng.random_range(0.05..2.0);
        let lambda = rng.random_range(1.0..30.0);
        let n_q = rng.random_range(1e4..1e7);
        let d: f64 = rng.random_range(10.0..500.0);
        let p: f64 = rng.random_range(0.01..2.0);
        let w = rng.random_range(1e6..1e9);
        let ch = ChannelParams {
            pathloss_ref: 10f64.powf(rng.random_range(-8.0..-4.0)),
            pathloss_exponent: rng.random_range(1.5..4.0),
            noise_variance_w: 10f64.powf(rng.random_range(-13.0..-9.0)),
            capacity_gap: rng.random_range(1.0..3.0),
            rice_k_factor: rng.random_range(0.0..20.0),
        };
        let cp = ComputeParams {
            f_mvap_hz: rng.random_range(1e9..3e10),
            f_ecs_hz: rng.random_range(1e9..5e10),
            complexity_cycles_per_bit: rng.random_range(10.0..2000.0),
            w_mvap_hz: rng.random_range(1e6..1e9),
            delivery_time_s: rng.random_range(0.0..0.5),
        };
        let mut h2 = rng.random_range(0.01..5.0);
        // Keep the link SNR >= 0.01: below that `log2(1 + x)` itself loses
        // digits and stops being a usable reference.
        let snr = |h2: f64| p * ch.pathloss_ref / d.powf(ch.pathloss_exponent) * h2 / (ch.noise_variance_w * ch.capacity_gap);
        if snr(h2) < 0.01 {
            h2 *= 0.01 / snr(h2) * rng.random_range(1.0..100.0);
        }
        let sinr_db = rng.random_range(-10.0..10.0);
        let f_loc = rng.random_range(1e9..3e10);
        let f_ecs = rng.random_range(1e9..5e10);
        let mvd = MvdParams::new(t_s, lambda, n_q, d, p, w).unwrap();

        let tag = |op: &'static str| move || format!("{op}, draw {draw}");

        let bits = n_q * t_s * lambda;
        worst.record(rel(physical::sensed_bits(&mvd), bits), tag("sensed_bits"));

        let gain = ch.pathloss_ref / d.powf(ch.pathloss_exponent) * h2;
        let g = physical::channel_gain(&mvd, &ch, h2);
        worst.record(rel(g, gain), tag("channel_gain"));

        let rate = w * (1.0 + p * gain / (ch.noise_variance_w * ch.capacity_gap)).log2();
        let r = physical::mvd_rate(&mvd, gain, &ch);
        worst.record(rel(r, rate), tag("mvd_rate"));

        let t_comm = bits / rate;
        worst.record(rel(physical::comm_delay(bits, rate).unwrap(), t_comm), tag("comm_delay"));

        let frac: f64 = rng.random_range(0.0..1.0);
        let b_total = 3.0 * bits;
        let b_off = (frac * b_total).ceil().min(b_total);
        let b_loc = b_total - b_off;
        let t_loc = cp.complexity_cycles_per_bit * b_loc / f_loc;
        worst.record(rel(physical::local_latency(b_loc, &cp, f_loc), t_loc), tag("local_latency"));

        let r_ecs = cp.w_mvap_hz * (1.0 + 10f64.powf(sinr_db / 10.0)).log2();
        worst.record(rel(physical::ecs_rate(sinr_db, &cp), r_ecs), tag("ecs_rate"));

        let t_off = b_off / r_ecs;
        let t_off_ecs = t_off + cp.complexity_cycles_per_bit * b_off / f_ecs;
        let (a, b) = physical::offload_latency(b_off, sinr_db, &cp, f_ecs).unwrap();
        worst.record(rel(a, t_off), tag("offload_latency.t_off"));
        worst.record(rel(b, t_off_ecs), tag("offload_latency.t_off_ecs"));

        let comms = [t_comm, t_comm * rng.random_range(0.5..1.5), t_comm * rng.random_range(0.5..1.5)];
        let mut slowest = comms[0] + t_s;
        if comms[1] + t_s > slowest {
            slowest = comms[1] + t_s;
        }
        if comms[2] + t_s > slowest {
            slowest = comms[2] + t_s;
        }
        let proc = if t_loc > t_off_ecs { t_loc } else { t_off_ecs };
        let total = slowest + cp.delivery_time_s + proc;
        let per: Vec<(f64, f64)> = comms.iter().map(|c| (*c, t_s)).collect();
        let br = physical::total_latency(&per, t_loc, t_off, t_off_ecs, &cp).unwrap();
        worst.record(rel(br.t_total_s, total), tag("total_latency"));
        worst.record(rel(br.t_sensing_comm_s, slowest), tag("total_latency.sensing_comm"));

        let reqs = [rng.random_range(1.0..3.0), rng.random_range(1.0..3.0), rng.random_range(1.0..3.0)];
        let mut m = reqs[0];
        if reqs[1] < m {
            m = reqs[1];
        }
        if reqs[2] < m {
            m = reqs[2];
        }
        worst.record(rel(physical::requirement(&reqs).unwrap(), m), tag("requirement"));

        let k = rng.random_range(0..=1000usize);
        let (off, loc) = split_bits(b_total.round(), k, 1000);
        let expect = (k as f64 * b_total.round() / 1000.0).ceil().min(b_total.round());
        worst.record(rel(off, expect), tag("split_bits.off"));
        worst.record((off + loc - b_total.round()).abs(), tag("split_bits.conservation"));
    }
    worst
}

/// Analytic gradients of a small network against central differences.
pub fn gradient_check(sizes: &[usize], batch: usize, h: f64, seed: u64) -> Worst {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = QNetwork::new(sizes, &mut rng).unwrap();
    let inputs: Vec<Vec<f64>> = (0..batch)
        .map(|_| (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let outputs = *sizes.last().unwrap();
    let meta: Vec<(usize, f64)> = (0..batch)
        .map(|_| (rng.random_range(0..outputs), rng.random_range(-2.0..2.0)))
        .collect();
    let samples = |_: ()| -> Vec<Sample<'_>> {
        inputs
            .iter()
            .zip(&meta)
            .map(|(x, (a, y))| Sample { state: x, action: *a, target: *y })
            .collect()
    };
    let grads = net.backward(&samples(())).unwrap();
    let mut worst = Worst::default();
    for l in 0..net.layers().len() {
        let (i_dim, o_dim) = (net.layers()[l].in_dim(), net.layers()[l].out_dim());
        for idx in 0..i_dim * o_dim + o_dim {
            let numeric = {
                let probe = |delta: f64| {
                    let mut n = net.clone();
                    let layer: &mut Dense = &mut n.layers_mut()[l];
                    if idx < i_dim * o_dim {
                        layer.weights_mut()[idx] += delta;
                    } else {
                        layer.bias_mut()[idx - i_dim * o_dim] += delta;
                    }
                    n.loss(&samples(())).unwrap()
                };
                (probe(h) - probe(-h)) / (2.0 * h)
            };
            let analytic = if idx < i_dim * o_dim {
                grads.layers[l].weights()[idx]
            } else {
                grads.layers[l].bias()[idx - i_dim * o_dim]
            };
            let scale = analytic.abs().max(numeric.abs());
            let err = if scale < 1e-8 { (analytic - numeric).abs() } else { (analytic - numeric).abs() / scale };
            worst.record(err, || format!("layer {l} param {idx}: analytic {analytic:e} numeric {numeric:e}"));
        }
    }
    worst
}

/// Counts DDQN/DQN target disagreements with a shared network over `pairs`
/// random `(r, s')`, plus the hand-built case where the two nets disagree on
/// the argmax. Returns `(mismatches, decoupled_ok)`.
pub fn target_decoupling(pairs: usize, seed: u64) -> (usize, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = QNetwork::new(&[FEATURES, 32, 32, 11], &mut rng).unwrap();
    let mut mismatches = 0;
    for _ in 0..pairs {
        let r = if rng.random_bool(0.5) { 20.0 } else { -1.0 } * rng.random_range(0.0..2.0);
        let s: Vec<f64> = (0..FEATURES).map(|_| rng.random_range(-2.0..2.0)).collect();
        let terminal = rng.random_bool(0.1);
        let a = dqn_target(r, &s, &net, 0.9985, terminal).unwrap();
        let b = ddqn_target(r, &s, &net, &net, 0.9985, terminal).unwrap();
        if a.to_bits() != b.to_bits() {
            mismatches += 1;
        }
    }
    let constant = |values: &[f64]| {
        let layer = Dense::from_parts(FEATURES, values.len(), vec![0.0; FEATURES * values.len()], values.to_vec()).unwrap();
        QNetwork::from_layers(vec![layer]).unwrap()
    };
    let primary = constant(&[0.0, 3.0, 1.0, 2.0]);
    let target = constant(&[10.0, 4.0, 7.0, 9.0]);
    let s = [0.0; FEATURES];
    let ddqn = ddqn_target(-1.0, &s, &primary, &target, 0.5, false).unwrap();
    let dqn = dqn_target(-1.0, &s, &target, 0.5, false).unwrap();
    let decoupled = ddqn == -1.0 + 0.5 * 4.0 && dqn == -1.0 + 0.5 * 10.0;
    (mismatches, decoupled)
}

/// Empirical one- and two-step transition frequencies of the default chain
/// over `steps` steps; returns the worst absolute deviations `(one, two)`.
pub fn markov_fidelity(steps: usize, seed: u64) -> (f64, f64) {
    let p = sinr::default_transition();
    let n = p.len();
    let mut chain = SinrChain::new(sinr::DEFAULT_STATES_DB.to_vec(), p.clone(), 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut path = Vec::with_capacity(steps + 1);
    path.push(chain.current_index());
    for _ in 0..steps {
        chain.step(&mut rng);
        path.push(chain.current_index());
    }
    let freq = |lag: usize| {
        let mut counts = vec![vec![0usize; n]; n];
        for w in path.windows(lag + 1) {
            counts[w[0]][w[lag]] += 1;
        }
        counts
            .iter()
            .map(|row| {
                let total: usize = row.iter().sum();
                row.iter().map(|c| *c as f64 / total.max(1) as f64).collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    };
    let p2: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| p[i][k] * p[k][j]).sum()).collect())
        .collect();
    let dev = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        a.iter()
            .zip(b)
            .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()))
            .fold(0.0f64, f64::max)
    };
    (dev(&freq(1), &p), dev(&freq(2), &p2))
}

/// Outcome of a long random-action rollout.
#[derive(Debug, Default)]
pub struct ContractReport {
    pub steps: usize,
    pub bad_reward: usize,
    pub bad_conservation: usize,
    pub bad_state: usize,
    pub bad_violation_flag: usize,
    pub bad_terminal: usize,
}

impl ContractReport {
    pub fn failures(&self) -> usize {
        self.bad_reward + self.bad_conservation + self.bad_state + self.bad_violation_flag + self.bad_terminal
    }
}

/// Drives the default environment with uniformly random actions.
pub fn mdp_contract(steps: usize, seed: u64) -> ContractReport {
    let cfg = EnvConfig::default();
    let states_db = cfg.sinr_states_db.clone();
    let (pos, neg) = (cfg.reward_positive, cfg.reward_negative);
    let t_steps = cfg.steps_per_episode;
    let mut env = OffloadEnv::new(cfg).unwrap();
    let mut env_rng = EnvRng::from_seed(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut rep = ContractReport::default();
    let mut state = env.reset(&mut env_rng);
    let mut in_episode = 0;
    while rep.steps < steps {
        let a = rng.random_range(0..env.action_count());
        let t_req = env.t_require().unwrap();
        let out = env.step(ActionIndex(a), &mut env_rng).unwrap();
        rep.steps += 1;
        in_episode += 1;
        if out.reward != pos && out.reward != neg {
            rep.bad_reward += 1;
        }
        if out.b_offload + out.b_local != state.b_total_bits || out.b_offload < 0.0 || out.b_local < 0.0 {
            rep.bad_conservation += 1;
        }
        if out.violated != (out.breakdown.t_total_s > t_req) || out.violated != (out.reward == neg) {
            rep.bad_violation_flag += 1;
        }
        if out.next_state.check(&states_db).is_err() || !out.breakdown.t_total_s.is_finite() {
            rep.bad_state += 1;
        }
        if out.terminal != (in_episode == t_steps) {
            rep.bad_terminal += 1;
        }
        state = if out.terminal {
            in_episode = 0;
            env.reset(&mut env_rng)
        } else {
            out.next_state
        };
    }
    rep
}
