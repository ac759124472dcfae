use mvap::env::{split_bits, ActionIndex, EnvConfig, OffloadEnv};
use mvap::physical::{self, ChannelParams, MvdParams};
use mvap::rng::EnvRng;
use proptest::prelude::*;

fn channel() -> ChannelParams {
    EnvConfig::default().channel
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn split_conserves_bits(b_total in 1u64..2_000_000_000, f in 1usize..3000, pick in 0.0f64..=1.0) {
        let b = b_total as f64;
        let k = ((f as f64) * pick).round() as usize;
        let (off, local) = split_bits(b, k, f);
        prop_assert_eq!(off + local, b);
        prop_assert!(off >= 0.0 && local >= 0.0 && off <= b);
        prop_assert_eq!(off.fract(), 0.0);
        if k < f {
            let (next, _) = split_bits(b, k + 1, f);
            prop_assert!(next >= off);
        }
        prop_assert_eq!(split_bits(b, 0, f).0, 0.0);
        prop_assert_eq!(split_bits(b, f, f).0, b);
    }

    #[test]
    fn rate_monotone(d in 50.0f64..400.0, p in 0.05f64..2.0, w in 1e6f64..5e8, h2 in 0.05f64..4.0) {
        let ch = channel();
        let rate = |d: f64, p: f64, w: f64| {
            let m = MvdParams::new(0.5, 5.0, 1e6, d, p, w).unwrap();
            physical::mvd_rate(&m, physical::channel_gain(&m, &ch, h2), &ch)
        };
        let base = rate(d, p, w);
        prop_assert!(base > 0.0);
        prop_assert!(rate(d * 1.1, p, w) < base);
        prop_assert!(rate(d, p * 1.1, w) > base);
        prop_assert!(rate(d, p, w * 1.1) > base);
    }

    #[test]
    fn requirement_is_the_strictest(ts in proptest::collection::vec(0.1f64..5.0, 1..8)) {
        let r = physical::requirement(&ts).unwrap();
        prop_assert!(ts.iter().all(|t| r <= *t));
        prop_assert!(ts.contains(&r));
    }

    #[test]
    fn latency_stages_move_opposite_ways(seed in 0u64..10_000, k in 0usize..1000) {
        let mut env = OffloadEnv::new(EnvConfig::default()).unwrap();
        env.reset(&mut EnvRng::from_seed(seed));
        let (a, ..) = env.evaluate(ActionIndex(k)).unwrap();
        let (b, ..) = env.evaluate(ActionIndex(k + 1)).unwrap();
        prop_assert!(b.t_local_s <= a.t_local_s);
        prop_assert!(b.t_offloading_ecs_s >= a.t_offloading_ecs_s);
        prop_assert_eq!(a.t_sensing_comm_s, b.t_sensing_comm_s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Total latency over the offload grid falls, then rises (V shape).
    #[test]
    fn total_latency_is_v_shaped(seed in 0u64..100_000) {
        let mut env = OffloadEnv::new(EnvConfig::default()).unwrap();
        env.reset(&mut EnvRng::from_seed(seed));
        let t: Vec<f64> = (0..env.action_count())
            .map(|k| env.evaluate(ActionIndex(k)).unwrap().0.t_total_s)
            .collect();
        let min_at = t.iter().enumerate().fold(0, |best, (i, v)| if *v < t[best] { i } else { best });
        prop_assert!(t[..=min_at].windows(2).all(|w| w[1] <= w[0] + 1e-12));
        prop_assert!(t[min_at..].windows(2).all(|w| w[1] + 1e-12 >= w[0]));
    }

    /// Rewards take only the two configured values, whatever the actions.
    #[test]
    fn reward_dichotomy(seed in 0u64..100_000, actions in proptest::collection::vec(0usize..=1000, 100)) {
        let cfg = EnvConfig::default();
        let (pos, neg) = (cfg.reward_positive, cfg.reward_negative);
        let mut env = OffloadEnv::new(cfg).unwrap();
        let mut rng = EnvRng::from_seed(seed);
        env.reset(&mut rng);
        for (i, a) in actions.iter().enumerate() {
            let out = env.step(ActionIndex(*a), &mut rng).unwrap();
            prop_assert!(out.reward == pos || out.reward == neg);
            prop_assert_eq!(out.violated, out.breakdown.t_total_s > env.t_require().unwrap());
            prop_assert_eq!(out.terminal, i == 99);
        }
    }
}

#[test]
fn replaying_a_seed_reproduces_the_trajectory() {
    let run = || {
        let mut env = OffloadEnv::new(EnvConfig::default()).unwrap();
        let mut rng = EnvRng::from_seed(99);
        env.reset(&mut rng);
        (0..100)
            .map(|i| {
                let out = env.step(ActionIndex((i * 37) % 1001), &mut rng).unwrap();
                (out.reward.to_bits(), out.breakdown.t_total_s.to_bits(), out.next_state.sinr_db.to_bits())
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}
