//! Offloading decision process seen by the access point agent.
//!
//! One episode fixes the packet size, device distances and the users'
//! latency requirement. Each step the agent picks how many of the collected
//! bits go to the edge server; the SINR chain, CPU frequencies and device
//! fading then move on to the next round.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physical::{self, ChannelParams, ComputeParams, LatencyBreakdown, MvdParams};
use crate::rng::EnvRng;
use crate::sinr::{self, SinrChain};

/// Number of features in [`EnvState::features`].
pub const FEATURES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub n_mvds: usize,
    pub n_users: usize,
    pub sensing_time_s: f64,
    pub sensing_rate_pps: f64,
    pub tx_power_w: f64,
    pub mvd_bandwidth_hz: f64,
    pub packet_bits_choices: Vec<f64>,
    pub distance_min_m: f64,
    pub distance_max_m: f64,
    pub channel: ChannelParams,
    /// `f_mvap_hz` and `f_ecs_hz` are the means of the per-round CPU draws.
    pub compute: ComputeParams,
    /// Standard deviation of each CPU draw as a fraction of its mean.
    pub cpu_rel_std: f64,
    pub sinr_states_db: Vec<f64>,
    pub sinr_transition: Vec<Vec<f64>>,
    pub t_require_min_s: f64,
    pub t_require_max_s: f64,
    /// Replaces the per-user draw with a constant requirement.
    pub t_require_fixed_s: Option<f64>,
    pub reward_positive: f64,
    pub reward_negative: f64,
    pub split_factor: usize,
    pub steps_per_episode: usize,
    pub feature_bits_scale: f64,
    pub feature_time_scale_s: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            n_mvds: 3,
            n_users: 3,
            sensing_time_s: 0.5,
            sensing_rate_pps: 5.0,
            tx_power_w: 0.52,
            mvd_bandwidth_hz: 120e6,
            packet_bits_choices: vec![
                960.0 * 540.0,
                1280.0 * 720.0,
                1920.0 * 1080.0,
                2560.0 * 1440.0,
            ],
            distance_min_m: 160.0,
            distance_max_m: 210.0,
            channel: ChannelParams {
                pathloss_ref: 1e-6,
                pathloss_exponent: 2.2,
                noise_variance_w: 1e-11,
                capacity_gap: 1.2,
                rice_k_factor: 10.0,
            },
            compute: ComputeParams {
                f_mvap_hz: 10.5e9,
                f_ecs_hz: 20.5e9,
                complexity_cycles_per_bit: 650.0,
                w_mvap_hz: 120e6,
                delivery_time_s: 0.05,
            },
            cpu_rel_std: 0.1,
            sinr_states_db: sinr::DEFAULT_STATES_DB.to_vec(),
            sinr_transition: sinr::default_transition(),
            t_require_min_s: 1.5,
            t_require_max_s: 2.3,
            t_require_fixed_s: None,
            reward_positive: 20.0,
            reward_negative: -1.0,
            split_factor: 1000,
            steps_per_episode: 100,
            feature_bits_scale: 1e7,
            feature_time_scale_s: 2.3,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_mvds == 0 {
            return Err(Error::EmptyMvdSet);
        }
        if self.n_users == 0 && self.t_require_fixed_s.is_none() {
            return Err(Error::EmptyUserSet);
        }
        let probe = MvdParams::new(
            self.sensing_time_s,
            self.sensing_rate_pps,
            1.0,
            self.distance_min_m,
            self.tx_power_w,
            self.mvd_bandwidth_hz,
        )?;
        probe.validate()?;
        if self.packet_bits_choices.is_empty() {
            return Err(Error::invalid("packet_bits_choices", "must not be empty"));
        }
        if self.packet_bits_choices.iter().any(|b| !(*b > 0.0)) {
            return Err(Error::invalid("packet_bits_choices", "all entries must be > 0"));
        }
        if !(self.distance_max_m >= self.distance_min_m) {
            return Err(Error::invalid("distance_max_m", "must be >= distance_min_m"));
        }
        self.channel.validate()?;
        self.compute.validate()?;
        if !(0.0..1.0).contains(&self.cpu_rel_std) {
            return Err(Error::invalid("cpu_rel_std", "must be in [0, 1)"));
        }
        sinr::validate(&self.sinr_states_db, &self.sinr_transition)?;
        match self.t_require_fixed_s {
            Some(t) if !(t > 0.0) => {
                return Err(Error::invalid("t_require_fixed_s", "must be > 0"));
            }
            Some(_) => {}
            None => {
                if !(self.t_require_min_s > 0.0 && self.t_require_max_s >= self.t_require_min_s) {
                    return Err(Error::invalid(
                        "t_require_min_s",
                        "need 0 < t_require_min_s <= t_require_max_s",
                    ));
                }
            }
        }
        if self.split_factor == 0 {
            return Err(Error::invalid("split_factor", "must be >= 1"));
        }
        if self.steps_per_episode == 0 {
            return Err(Error::invalid("steps_per_episode", "must be >= 1"));
        }
        if !(self.feature_bits_scale > 0.0 && self.feature_time_scale_s > 0.0) {
            return Err(Error::invalid("feature_bits_scale", "feature scales must be > 0"));
        }
        Ok(())
    }

    /// Smallest and largest possible per-episode total bit count.
    pub fn b_total_range(&self) -> (f64, f64) {
        let per_packet = self.n_mvds as f64 * self.sensing_time_s * self.sensing_rate_pps;
        let lo = self.packet_bits_choices.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.packet_bits_choices.iter().copied().fold(0.0, f64::max);
        (lo * per_packet, hi * per_packet)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub b_total_bits: f64,
    pub sinr_db: f64,
    /// Realized total latency of the previous round, 0 right after reset.
    pub t_total_prev_s: f64,
    pub f_mvap_hz: f64,
    pub f_ecs_hz: f64,
}

impl EnvState {
    pub fn check(&self, states_db: &[f64]) -> Result<()> {
        if !(self.b_total_bits > 0.0) {
            return Err(Error::invalid("b_total_bits", "must be > 0"));
        }
        if !states_db.contains(&self.sinr_db) {
            return Err(Error::invalid("sinr_db", format!("{} not a chain state", self.sinr_db)));
        }
        if !(self.f_mvap_hz > 0.0 && self.f_ecs_hz > 0.0) {
            return Err(Error::invalid("f_mvap_hz", "CPU frequencies must be > 0"));
        }
        if !(self.t_total_prev_s >= 0.0) {
            return Err(Error::invalid("t_total_prev_s", "must be >= 0"));
        }
        Ok(())
    }
}

/// Offload choice `k`, sending `ceil(k * B_total / F)` bits to the edge server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionIndex(pub usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: EnvState,
    pub reward: f64,
    pub breakdown: LatencyBreakdown,
    pub b_offload: f64,
    pub b_local: f64,
    pub violated: bool,
    pub terminal: bool,
}

#[derive(Debug, Clone)]
struct Episode {
    mvds: Vec<MvdParams>,
    t_require: f64,
    fading: Vec<f64>,
    state: EnvState,
    step: usize,
}

#[derive(Debug, Clone)]
pub struct OffloadEnv {
    cfg: EnvConfig,
    chain: SinrChain,
    episode: Option<Episode>,
}

impl OffloadEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let chain = SinrChain::new(cfg.sinr_states_db.clone(), cfg.sinr_transition.clone(), 0)?;
        Ok(Self {
            cfg,
            chain,
            episode: None,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn action_count(&self) -> usize {
        self.cfg.split_factor + 1
    }

    pub fn state(&self) -> Option<&EnvState> {
        self.episode.as_ref().map(|e| &e.state)
    }

    pub fn t_require(&self) -> Option<f64> {
        self.episode.as_ref().map(|e| e.t_require)
    }

    /// Device parameters of the running episode.
    pub fn mvds(&self) -> Option<&[MvdParams]> {
        self.episode.as_ref().map(|e| e.mvds.as_slice())
    }

    pub fn step_index(&self) -> usize {
        self.episode.as_ref().map_or(0, |e| e.step)
    }

    pub fn reset(&mut self, rng: &mut EnvRng) -> EnvState {
        let cfg = &self.cfg;
        let packet_bits = cfg.packet_bits_choices[rng.episode.random_range(0..cfg.packet_bits_choices.len())];
        let t_require = match cfg.t_require_fixed_s {
            Some(t) => t,
            None => {
                let draws: Vec<f64> = (0..cfg.n_users)
                    .map(|_| sample_uniform(&mut rng.episode, cfg.t_require_min_s, cfg.t_require_max_s))
                    .collect();
                physical::requirement(&draws).expect("validated user set")
            }
        };
        let mvds: Vec<MvdParams> = (0..cfg.n_mvds)
            .map(|_| MvdParams {
                sensing_time_s: cfg.sensing_time_s,
                sensing_rate_pps: cfg.sensing_rate_pps,
                packet_bits,
                distance_m: sample_uniform(&mut rng.channel, cfg.distance_min_m, cfg.distance_max_m),
                tx_power_w: cfg.tx_power_w,
                bandwidth_hz: cfg.mvd_bandwidth_hz,
            })
            .collect();
        let b_total_bits = mvds.iter().map(physical::sensed_bits).sum();
        let sinr_db = self.chain.reset(&mut rng.sinr);
        let (f_mvap_hz, f_ecs_hz) = self.sample_cpu(&mut rng.cpu);
        let fading = self.sample_fading(&mut rng.channel);
        let state = EnvState {
            b_total_bits,
            sinr_db,
            t_total_prev_s: 0.0,
            f_mvap_hz,
            f_ecs_hz,
        };
        self.episode = Some(Episode {
            mvds,
            t_require,
            fading,
            state,
            step: 0,
        });
        state
    }

    /// Latency of offload choice `action` in the current round, without
    /// advancing anything.
    pub fn evaluate(&self, action: ActionIndex) -> Result<(LatencyBreakdown, f64, f64)> {
        let ep = self.episode.as_ref().ok_or(Error::NotReset)?;
        self.evaluate_in(ep, action)
    }

    fn evaluate_in(&self, ep: &Episode, action: ActionIndex) -> Result<(LatencyBreakdown, f64, f64)> {
        let f = self.cfg.split_factor;
        if action.0 > f {
            return Err(Error::InvalidAction {
                action: action.0,
                max: f,
            });
        }
        let s = &ep.state;
        let (b_off, b_local) = split_bits(s.b_total_bits, action.0, f);

        let per_mvd: Vec<(f64, f64)> = ep
            .mvds
            .iter()
            .zip(&ep.fading)
            .map(|(m, h)| {
                let gain = physical::channel_gain(m, &self.cfg.channel, *h);
                let rate = physical::mvd_rate(m, gain, &self.cfg.channel);
                // an unreachable device can never meet the requirement
                let t_comm = physical::comm_delay(physical::sensed_bits(m), rate).unwrap_or(f64::INFINITY);
                (t_comm, m.sensing_time_s)
            })
            .collect();
        let cp = &self.cfg.compute;
        let t_local = physical::local_latency(b_local, cp, s.f_mvap_hz);
        let (t_off, t_off_ecs) = physical::offload_latency(b_off, s.sinr_db, cp, s.f_ecs_hz)
            .unwrap_or((f64::INFINITY, f64::INFINITY));
        let breakdown = physical::total_latency(&per_mvd, t_local, t_off, t_off_ecs, cp)?;
        Ok((breakdown, b_off, b_local))
    }

    pub fn step(&mut self, action: ActionIndex, rng: &mut EnvRng) -> Result<StepOutcome> {
        let ep = self.episode.as_ref().ok_or(Error::NotReset)?;
        if ep.step >= self.cfg.steps_per_episode {
            return Err(Error::NotReset);
        }
        let (breakdown, b_offload, b_local) = self.evaluate_in(ep, action)?;
        let t_require = ep.t_require;
        let violated = breakdown.t_total_s > t_require;
        let reward = if violated {
            self.cfg.reward_negative
        } else {
            self.cfg.reward_positive
        };

        let sinr_db = self.chain.step(&mut rng.sinr);
        let (f_mvap_hz, f_ecs_hz) = self.sample_cpu(&mut rng.cpu);
        let fading = self.sample_fading(&mut rng.channel);

        let ep = self.episode.as_mut().expect("checked above");
        ep.step += 1;
        ep.fading = fading;
        ep.state = EnvState {
            b_total_bits: ep.state.b_total_bits,
            sinr_db,
            t_total_prev_s: breakdown.t_total_s,
            f_mvap_hz,
            f_ecs_hz,
        };
        Ok(StepOutcome {
            next_state: ep.state,
            reward,
            breakdown,
            b_offload,
            b_local,
            violated,
            terminal: ep.step == self.cfg.steps_per_episode,
        })
    }

    /// Normalized network input for `state`.
    pub fn features(&self, state: &EnvState) -> [f64; FEATURES] {
        let cfg = &self.cfg;
        let lo = cfg.sinr_states_db.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = cfg.sinr_states_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sinr = if hi > lo {
            2.0 * (state.sinr_db - lo) / (hi - lo) - 1.0
        } else {
            0.0
        };
        [
            state.b_total_bits / cfg.feature_bits_scale,
            sinr,
            // unreachable rounds report an infinite latency, cap the feature
            (state.t_total_prev_s / cfg.feature_time_scale_s).min(10.0),
            state.f_mvap_hz / cfg.compute.f_mvap_hz,
            state.f_ecs_hz / cfg.compute.f_ecs_hz,
        ]
    }

    fn sample_cpu<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let cp = &self.cfg.compute;
        (
            truncated_normal(rng, cp.f_mvap_hz, self.cfg.cpu_rel_std),
            truncated_normal(rng, cp.f_ecs_hz, self.cfg.cpu_rel_std),
        )
    }

    fn sample_fading<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.cfg.n_mvds)
            .map(|_| physical::rice_power_sample(self.cfg.channel.rice_k_factor, rng))
            .collect()
    }
}

/// `(b_off, b_local)` for offload choice `k` out of `f`. `b_off` is rounded up
/// to whole bits and capped at `b_total`; `b_local` is the remainder.
pub fn split_bits(b_total: f64, k: usize, f: usize) -> (f64, f64) {
    let b_off = (k as f64 * b_total / f as f64).ceil().min(b_total);
    (b_off, b_total - b_off)
}

fn sample_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Normal draw with relative deviation `rel_std`, redrawn while below half the mean.
fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, rel_std: f64) -> f64 {
    if rel_std == 0.0 {
        return mean;
    }
    let normal = Normal::new(mean, rel_std * mean).expect("finite std");
    loop {
        let x = normal.sample(rng);
        if x >= 0.5 * mean {
            return x;
        }
    }
}
