use std::fs;

use cbtc_core::channel::Medium;
use cbtc_core::passengers::waiting_at;
use cbtc_core::sim::{compare_runs, run_with_baseline, RunOptions};
use cbtc_core::{run_scenario, ScenarioConfig};
use proptest::prelude::*;

fn short_line() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.signaling.num_stations = 8;
    cfg.sim.sim_duration = 1800.0;
    cfg
}

#[test]
fn config_file_resolves_demand_next_to_it() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("riders.csv"),
        "passenger_id,origin_station,destination_station,tap_in_time_s\n1,1,3,5\n2,2,8,40\n",
    )
    .unwrap();
    let path = dir.path().join("line.toml");
    fs::write(
        &path,
        "[signaling]\nnum_stations = 8\n[sim]\nsim_duration = 900.0\n\
         [demand]\nsource = \"file\"\npath = \"riders.csv\"\n",
    )
    .unwrap();
    let cfg = ScenarioConfig::load(&path).unwrap();
    let r = run_scenario(&cfg).unwrap();
    assert_eq!(r.summary.passengers_total, 2);
    assert_eq!(r.passengers.len(), 2);
    let first = &r.passengers[0];
    assert_eq!(first.board_time, r.trains[1].departure_time);
}

#[test]
fn attack_never_shortens_the_mean_journey() {
    let mut cfg = short_line();
    cfg.jammer.active = true;
    let (att, base) = run_with_baseline(&cfg, &RunOptions::default()).unwrap();
    let cmp = compare_runs(&att, &base).unwrap();
    assert!(cmp.mean_train_pct_increase >= 0.0);
    assert_eq!(att.safety.crossovers, 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn attacked_lines_stay_safe_and_conserve_riders(
        seed in any::<u64>(),
        position in 0.0f64..20.0,
        d_j_wg in 0.0001f64..0.01,
        free in any::<bool>(),
        fading in any::<bool>(),
        capacity in 5u32..60,
    ) {
        let mut cfg = short_line();
        cfg.sim.master_seed = seed;
        cfg.sim.train_capacity = capacity;
        cfg.jammer.active = true;
        cfg.jammer.position = position;
        cfg.jammer.d_j_wg = d_j_wg;
        cfg.channel.fading_enabled = fading;
        if free {
            cfg.channel.medium = Medium::Free;
        }
        let r = run_scenario(&cfg).unwrap();
        prop_assert_eq!(r.safety.crossovers, 0);
        prop_assert!(r.safety.min_gap_m > 0.0);
        prop_assert_eq!(r.summary.trains_completed, r.trains.len());
        prop_assert!(r.trains.iter().all(|t| t.max_onboard <= capacity as usize));
        let waiting: u64 = (1..=cfg.signaling.num_stations)
            .map(|s| waiting_at(&r.congestion, s, f64::INFINITY))
            .sum();
        prop_assert_eq!(r.passengers.len() as u64 + waiting, r.summary.passengers_total as u64);
    }
}
