use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::record::{RunFacts, Termination, TimeseriesRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classification {
    Vanishing,
    SingleSoliton,
    MultiSoliton {
        #[serde(rename = "K")]
        k: usize,
    },
    Blowup,
    Undecided,
}

/// Decision rules, in order:
/// blow-up; small decaying terminal energy norm; solitons tracked to the end
/// with `𝒩` not growing past `thresholds.tracked_n` and no gap shrinking.
pub fn classify_run(rows: &[TimeseriesRow], run: &RunFacts, config: &RunConfig) -> Classification {
    if let Termination::BlowUp { .. } = run.termination {
        return Classification::Blowup;
    }
    let th = &config.thresholds;
    if let Some(e) = run.terminal_energy_norm {
        if e < th.vanish && run.energy_norm_decaying {
            return Classification::Vanishing;
        }
    }
    let k = config.k;
    if k == 0 || run.termination != Termination::Completed || rows.is_empty() {
        return Classification::Undecided;
    }
    if !rows.iter().all(TimeseriesRow::is_tracked) {
        return Classification::Undecided;
    }
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let n_ok = if last.n.is_nan() {
        true
    } else {
        last.n <= first.n.max(th.tracked_n)
    };
    let gaps_ok = (0..k.saturating_sub(1)).all(|i| last.z[i + 1] - last.z[i] >= first.z[i + 1] - first.z[i]);
    match (n_ok && gaps_ok, k) {
        (true, 1) => Classification::SingleSoliton,
        (true, k) => Classification::MultiSoliton { k },
        _ => Classification::Undecided,
    }
}
