//! Scratch diagnostic: distillation fidelity vs imitation budget, with two
//! distinct pretrained parents crossed on the full navigation task.

use gpo_core::config::GpoConfig;
use gpo_core::crossover::crossover;
use gpo_core::env::make_env;
use gpo_core::mutate::mutate_population_with;
use gpo_core::population::{Individual, Population};
use gpo_core::rng::{self, Stream};
use gpo_core::rollout::collect_episodes;

fn pretrain(cfg: &GpoConfig, which: usize, iters: usize) -> Individual {
    let env = make_env(&cfg.env, cfg.horizon).unwrap();
    let (obs, act) = (env.spec().obs_dim, env.spec().act_dim);
    let mut pop = Population {
        members: vec![Individual::fresh(obs, act, cfg, 0, which)],
    };
    mutate_population_with(&mut pop, cfg, which, (iters * cfg.batch) as u64).unwrap();
    pop.members.into_iter().next().unwrap()
}

fn eval_return(policy: &gpo_core::nn::GaussianPolicy, cfg: &GpoConfig, slot: usize) -> f64 {
    let mut env = make_env(&cfg.env, cfg.horizon).unwrap();
    let mut rng = rng::derive(999, 0, slot, Stream::Eval);
    collect_episodes(policy, env.as_mut(), 40, slot, &mut rng)
        .unwrap()
        .mean_return()
}

fn main() {
    let mut cfg = GpoConfig::default();
    cfg.env = "pointnav".into();
    cfg.bootstrap = true;
    let a = pretrain(&cfg, 0, 10);
    let b = pretrain(&cfg, 1, 10);
    let ra = eval_return(&a.policy, &cfg, 0);
    let rb = eval_return(&b.policy, &cfg, 1);
    println!("parent a eval {ra}, parent b eval {rb}");

    for (expert, student, epochs) in [
        (1000, 100, 10),
        (1000, 100, 30),
        (1000, 100, 60),
        (2000, 200, 30),
        (5000, 500, 10),
    ] {
        let mut c = cfg.clone();
        c.dagger_expert = expert;
        c.dagger_student = student;
        c.dagger_epochs = epochs;
        let mut env = make_env(&c.env, c.horizon).unwrap();
        let mut r = rng::derive(7, 0, 0, Stream::Crossover);
        let out = crossover(
            &a.policy,
            &b.policy,
            a.cached.as_deref().unwrap(),
            b.cached.as_deref().unwrap(),
            env.as_mut(),
            &c,
            &mut r,
        )
        .unwrap();
        let rc = eval_return(&out.child, &c, 2);
        println!("expert {expert} student {student} epochs {epochs}: child eval {rc} (best parent {})", ra.max(rb));
    }
}
