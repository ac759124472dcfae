//! Closed-form latency and rate model for the sensing, local processing and
//! edge offloading stages of one service round.
//!
//! Every function here is pure. Randomness (Rician fading, CPU draws) is
//! sampled by the caller and passed in as plain numbers.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One Metaverse virtualisation device (sensor) feeding the access point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MvdParams {
    pub sensing_time_s: f64,
    pub sensing_rate_pps: f64,
    pub packet_bits: f64,
    pub distance_m: f64,
    pub tx_power_w: f64,
    pub bandwidth_hz: f64,
}

impl MvdParams {
    pub fn new(
        sensing_time_s: f64,
        sensing_rate_pps: f64,
        packet_bits: f64,
        distance_m: f64,
        tx_power_w: f64,
        bandwidth_hz: f64,
    ) -> Result<Self> {
        let mvd = Self {
            sensing_time_s,
            sensing_rate_pps,
            packet_bits,
            distance_m,
            tx_power_w,
            bandwidth_hz,
        };
        mvd.validate()?;
        Ok(mvd)
    }

    pub fn validate(&self) -> Result<()> {
        positive("sensing_time_s", self.sensing_time_s)?;
        positive("sensing_rate_pps", self.sensing_rate_pps)?;
        positive("packet_bits", self.packet_bits)?;
        positive("distance_m", self.distance_m)?;
        positive("tx_power_w", self.tx_power_w)?;
        positive("bandwidth_hz", self.bandwidth_hz)
    }

    /// Same as [`MvdParams::new`] but also enforces the configured distance range.
    pub fn within_range(self, d_min: f64, d_max: f64) -> Result<Self> {
        self.validate()?;
        if self.distance_m < d_min || self.distance_m > d_max {
            return Err(Error::invalid(
                "distance_m",
                format!("{} outside [{d_min}, {d_max}]", self.distance_m),
            ));
        }
        Ok(self)
    }
}

/// Line-of-sight channel between a device and the access point.
///
/// `pathloss_ref` collapses the carrier-frequency free-space term and the LoS
/// attenuation into a single gain at 1 m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub pathloss_ref: f64,
    pub pathloss_exponent: f64,
    pub noise_variance_w: f64,
    pub capacity_gap: f64,
    pub rice_k_factor: f64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        positive("pathloss_ref", self.pathloss_ref)?;
        positive("pathloss_exponent", self.pathloss_exponent)?;
        positive("noise_variance_w", self.noise_variance_w)?;
        if !(self.capacity_gap > 1.0) {
            return Err(Error::invalid("capacity_gap", "must be > 1"));
        }
        if !(self.rice_k_factor >= 0.0) || !self.rice_k_factor.is_finite() {
            return Err(Error::invalid("rice_k_factor", "must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputeParams {
    pub f_mvap_hz: f64,
    pub f_ecs_hz: f64,
    pub complexity_cycles_per_bit: f64,
    pub w_mvap_hz: f64,
    pub delivery_time_s: f64,
}

impl ComputeParams {
    pub fn validate(&self) -> Result<()> {
        positive("f_mvap_hz", self.f_mvap_hz)?;
        positive("f_ecs_hz", self.f_ecs_hz)?;
        positive("complexity_cycles_per_bit", self.complexity_cycles_per_bit)?;
        positive("w_mvap_hz", self.w_mvap_hz)?;
        positive("delivery_time_s", self.delivery_time_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub t_sensing_comm_s: f64,
    pub t_local_s: f64,
    pub t_offloading_s: f64,
    pub t_offloading_ecs_s: f64,
    pub t_delivery_s: f64,
    pub t_total_s: f64,
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite and > 0, got {v}")))
    }
}

/// Bits a device collects during its sensing window.
pub fn sensed_bits(mvd: &MvdParams) -> f64 {
    mvd.packet_bits * mvd.sensing_time_s * mvd.sensing_rate_pps
}

/// LoS power gain at the device's distance, scaled by a fading power sample.
pub fn channel_gain(mvd: &MvdParams, ch: &ChannelParams, rice_sample: f64) -> f64 {
    ch.pathloss_ref * mvd.distance_m.powf(-ch.pathloss_exponent) * rice_sample
}

/// Achievable uplink rate from a device, bits/s.
pub fn mvd_rate(mvd: &MvdParams, gain: f64, ch: &ChannelParams) -> f64 {
    let snr = mvd.tx_power_w * gain / (ch.noise_variance_w * ch.capacity_gap);
    mvd.bandwidth_hz * snr.ln_1p() / std::f64::consts::LN_2
}

pub fn comm_delay(bits: f64, rate: f64) -> Result<f64> {
    if rate <= 0.0 {
        return Err(Error::ZeroRate);
    }
    Ok(bits / rate)
}

pub fn local_latency(b_local: f64, cp: &ComputeParams, f_mvap_sample: f64) -> f64 {
    cp.complexity_cycles_per_bit * b_local / f_mvap_sample
}

/// Rate of the access point to edge server link at the given SINR.
pub fn ecs_rate(sinr_db: f64, cp: &ComputeParams) -> f64 {
    let linear = 10f64.powf(sinr_db / 10.0);
    cp.w_mvap_hz * linear.ln_1p() / std::f64::consts::LN_2
}

/// Returns `(t_offloading, t_offloading_ecs)`: transfer time alone, and
/// transfer plus edge compute.
pub fn offload_latency(
    b_off: f64,
    sinr_db: f64,
    cp: &ComputeParams,
    f_ecs_sample: f64,
) -> Result<(f64, f64)> {
    if b_off == 0.0 {
        return Ok((0.0, 0.0));
    }
    let t_off = comm_delay(b_off, ecs_rate(sinr_db, cp))?;
    Ok((t_off, t_off + cp.complexity_cycles_per_bit * b_off / f_ecs_sample))
}

/// Combines the stage latencies of one round. `per_mvd` holds
/// `(t_comm, t_sensing)` for each device; processing waits for the slowest.
pub fn total_latency(
    per_mvd: &[(f64, f64)],
    t_local: f64,
    t_offloading: f64,
    t_off_ecs: f64,
    cp: &ComputeParams,
) -> Result<LatencyBreakdown> {
    let t_sensing_comm = per_mvd
        .iter()
        .map(|(c, s)| c + s)
        .reduce(f64::max)
        .ok_or(Error::EmptyMvdSet)?;
    let t_total = t_sensing_comm + cp.delivery_time_s + t_local.max(t_off_ecs);
    Ok(LatencyBreakdown {
        t_sensing_comm_s: t_sensing_comm,
        t_local_s: t_local,
        t_offloading_s: t_offloading,
        t_offloading_ecs_s: t_off_ecs,
        t_delivery_s: cp.delivery_time_s,
        t_total_s: t_total,
    })
}

/// Strictest (smallest) latency requirement among the users.
pub fn requirement(t_req: &[f64]) -> Result<f64> {
    if let Some(bad) = t_req.iter().find(|t| !(**t > 0.0)) {
        return Err(Error::invalid("t_require", format!("must be > 0, got {bad}")));
    }
    t_req.iter().copied().reduce(f64::min).ok_or(Error::EmptyUserSet)
}

/// Draws `|h|^2` for a unit-mean Rician channel with factor `k`.
///
/// `k = 0` degenerates to Rayleigh fading.
pub fn rice_power_sample<R: Rng + ?Sized>(k: f64, rng: &mut R) -> f64 {
    let los = (k / (k + 1.0)).sqrt();
    let sigma = (0.5 / (k + 1.0)).sqrt();
    let x: f64 = StandardNormal.sample(rng);
    let y: f64 = StandardNormal.sample(rng);
    let re = los + sigma * x;
    let im = sigma * y;
    re * re + im * im
}
