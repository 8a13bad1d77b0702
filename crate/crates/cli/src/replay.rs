//! Textual step-through of a trajectory log.

use std::io::Write;

use anyhow::bail;
use mrca_core::eval::EpisodeLog;

pub const COLUMNS: &str = "tick\tagent\tx\ty\theading\tv\tw\treward\tkind\tstatus";

/// Prints every record with `from <= tick <= to`, then each agent's return over
/// the printed rows. Returns the number of ticks shown.
pub fn replay(log: &EpisodeLog, from: Option<usize>, to: Option<usize>, out: &mut impl Write) -> anyhow::Result<usize> {
    let last = log.ticks();
    let from = from.unwrap_or(0);
    let to = to.unwrap_or(last);
    if to > last {
        bail!("--to {to} is past the last tick {last}");
    }
    if from > to {
        bail!("--from {from} is after --to {to}");
    }
    writeln!(
        out,
        "# {} controller, {} agents, dt {} s, ticks {from}..={to} of {last}",
        log.controller,
        log.agents.len(),
        log.dt
    )?;
    writeln!(out, "{COLUMNS}")?;
    let mut returns = vec![0.0; log.agents.len()];
    for t in from..=to {
        for (i, a) in log.agents.iter().enumerate() {
            let Some(s) = a.steps.get(t) else { continue };
            returns[i] += s.reward.total;
            writeln!(
                out,
                "{t}\t{i}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{}",
                s.pose.position.x,
                s.pose.position.y,
                s.pose.heading,
                s.action.v,
                s.action.w,
                s.reward.total,
                s.kind.map_or("-", |k| k.as_str()),
                s.status.as_str()
            )?;
        }
    }
    for (i, r) in returns.iter().enumerate() {
        writeln!(out, "# return {i} {r}")?;
    }
    Ok(to - from + 1)
}
