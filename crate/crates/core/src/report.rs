//! CSV emission. Files have a fixed header row and column order; identical
//! runs reproduce them byte-for-byte.

use std::io::Write;
use std::path::Path;

use crate::driver::{CrossoverRow, RunRow, SelectionRow};
use crate::error::Result;
use crate::mutate::MutationRow;

pub fn write_lines<I>(path: &Path, header: &str, rows: I) -> Result<()>
where
    I: IntoIterator<Item = String>,
{
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

pub fn write_runlog_csv(path: &Path, rows: &[RunRow]) -> Result<()> {
    write_lines(
        path,
        "round,policy_id,mean_return,std_error,transitions",
        rows.iter().map(|r| {
            format!(
                "{},{},{},{},{}",
                r.round, r.policy_id, r.mean_return, r.std_error, r.cum_transitions
            )
        }),
    )
}

pub fn write_mutation_csv(path: &Path, rows: &[MutationRow]) -> Result<()> {
    write_lines(
        path,
        "round,policy_id,mean_return,mean_kl,beta,shared_with_count",
        rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{}",
                r.round, r.policy_id, r.mean_return, r.mean_kl, r.beta, r.shared_with
            )
        }),
    )
}

pub fn write_selection_csv(path: &Path, rows: &[SelectionRow]) -> Result<()> {
    write_lines(
        path,
        "round,rank,i,j,f_perf,f_div,score",
        rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{},{}",
                r.round, r.rank, r.i, r.j, r.f_perf, r.f_div, r.score
            )
        }),
    )
}

pub fn write_crossover_csv(path: &Path, rows: &[CrossoverRow]) -> Result<()> {
    write_lines(
        path,
        "round,parent_x_id,parent_y_id,parent_x_return,parent_y_return,child_return,transitions_used",
        rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{},{}",
                r.round,
                r.parent_x_id,
                r.parent_y_id,
                r.parent_x_return,
                r.parent_y_return,
                r.child_return,
                r.transitions_used
            )
        }),
    )
}
