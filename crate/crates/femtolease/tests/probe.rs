// Temporary exploration probe; deleted before finalization.

use femtolease::channel::LinkGains;
use femtolease::coalition::{
    evaluate_partition, form_coalitions, is_stable, EvalContext, GameParams, Partition,
};
use femtolease::config::ScenarioConfig;
use femtolease::rng::{stream_rng, Stream};
use femtolease::topology::{generate_topology, Position};
use femtolease::PlayerId;

#[test]
#[ignore]
fn probe_pair_dynamics() {
    let mut cfg = ScenarioConfig::minimal(1, 1);
    cfg.scenario.n_subchannels = 4;
    cfg.channel.shadow_sigma_db = 0.0;
    cfg.game.beta_grid_step = 0.05;
    cfg.game.power_split_points = 16;
    let mut t = generate_topology(&cfg, 1).unwrap();
    t.faps[0].position = Position { x: 500.0, y: 0.0 };
    t.fues[0].position = Position { x: 498.0, y: 0.0 };
    t.mues[0].position = Position { x: 508.0, y: 0.0 };
    t.fues[0].subchannel = 0;
    t.faps[0].subchannels = vec![0];
    t.mues[0].subchannel = 0;
    let params = GameParams::from_config(&cfg);
    let gains = LinkGains::build(&t, &params.channel, &mut stream_rng(1, Stream::Shadowing));
    let ctx = EvalContext::new(&t, &gains, &params);

    let singles = evaluate_partition(&ctx, &Partition::all_singletons(&t)).unwrap();
    println!("== all-singleton ==");
    for (p, x) in &singles.payoffs {
        println!(
            "{p}: value {:.4e} rate {:.1} delay {:.3e} (d MBS {:.0} m)",
            x.value,
            x.rate_bps,
            x.delay,
            match p {
                PlayerId::Mue(m) => t.mue(*m).position.norm(),
                PlayerId::Fue(l) => t.fue(*l).position.norm(),
            }
        );
    }

    let result = form_coalitions(&ctx).unwrap();
    println!("== formed in {} sweeps ==", result.iterations);
    for c in &result.partition.coalitions {
        println!(
            "coalition: fue {:?} mues {:?} lease {:?}",
            c.relay_fue, c.mue_ids, c.lease
        );
    }
    for (p, x) in &result.outcome.payoffs {
        println!("{p}: value {:.4e} rate {:.1} delay {:.3e}", x.value, x.rate_bps, x.delay);
    }
    let rep = is_stable(&ctx, &result.outcome, &result.baseline).unwrap();
    println!("stable: {} cert {:?}", rep.stable, rep.certificate);
}

#[test]
#[ignore]
fn probe_random_round() {
    let mut cfg = ScenarioConfig::minimal(50, 50);
    cfg.game.beta_grid_step = 0.05;
    cfg.game.power_split_points = 16;
    cfg.game.alpha_grid_step = 0.1;
    for seed in 0..3u64 {
        let t = generate_topology(&cfg, seed).unwrap();
        let params = GameParams::from_config(&cfg);
        let gains =
            LinkGains::build(&t, &params.channel, &mut stream_rng(seed, Stream::Shadowing));
        let ctx = EvalContext::new(&t, &gains, &params);
        let start = std::time::Instant::now();
        let result = form_coalitions(&ctx).unwrap();
        let coop = result.partition.cooperative_count();
        let members: usize = result
            .partition
            .coalitions
            .iter()
            .filter(|c| c.is_cooperative())
            .map(|c| c.mue_ids.len())
            .sum();
        let base_mue: f64 = t
            .mues
            .iter()
            .map(|m| result.baseline[&PlayerId::Mue(m.id)])
            .sum();
        let coop_mue: f64 = t
            .mues
            .iter()
            .map(|m| result.outcome.value(PlayerId::Mue(m.id)))
            .sum();
        println!(
            "seed {seed}: {} coalitions ({coop} coop, {members} serviced mues), {} sweeps, {:.2?}, mue gain {:.1}%",
            result.partition.coalitions.len(),
            result.iterations,
            start.elapsed(),
            100.0 * (coop_mue / base_mue - 1.0)
        );
    }
}
