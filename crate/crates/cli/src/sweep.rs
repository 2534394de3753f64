//! Population-size scaling sweep.
//!
//! Variant "fixed-batch" keeps the per-policy batch size constant, so total
//! simulation grows with the population. Variant "fixed-total" shrinks the
//! batch in proportion to population growth, holding the mutation budget
//! constant (the configured pop/batch pair is the reference point).

use gpo_core::config::GpoConfig;
use gpo_core::driver::gpo_run;
use gpo_core::error::Result;
use gpo_core::report::write_lines;

const POPULATIONS: [usize; 3] = [2, 4, 8];

pub fn scale_sweep(cfg: &GpoConfig) -> Result<()> {
    let mut rows = Vec::new();
    for variant in ["fixed-batch", "fixed-total"] {
        for &m in &POPULATIONS {
            let mut c = cfg.clone();
            c.pop = m;
            if variant == "fixed-total" {
                c.batch = (cfg.batch * cfg.pop / m).max(1);
            }
            let art = gpo_run(&c)?;
            println!(
                "scale-sweep: {variant} pop {m} batch {} -> best {} ({} transitions)",
                c.batch,
                art.runlog.best_final_return(),
                art.runlog.total_transitions
            );
            rows.push(format!(
                "{variant},{m},{},{},{}",
                c.batch,
                art.runlog.best_final_return(),
                art.runlog.total_transitions
            ));
        }
    }
    std::fs::create_dir_all(&cfg.out)?;
    std::fs::write(cfg.out.join("config.echo"), cfg.echo())?;
    write_lines(
        &cfg.out.join("scale.csv"),
        "variant,pop,batch,best_final_return,total_transitions",
        rows,
    )?;
    Ok(())
}
