use serde::Serialize;

use super::config::FusionConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum BudgetVerdict {
    Ok { fused_len: usize, cap: usize },
    /// The fused sequence exceeds the cap. `suggested_drop` is the smallest
    /// random drop that restores it, capped at the number of vision tokens;
    /// `restorable` is false when even dropping every vision token is not
    /// enough.
    OverBudget {
        fused_len: usize,
        cap: usize,
        overflow: usize,
        suggested_drop: usize,
        restorable: bool,
    },
}

impl BudgetVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, BudgetVerdict::Ok { .. })
    }
}

/// Checks `fused_len` against the sequence cap (inclusive).
pub fn budget_check(config: &FusionConfig, fused_len: usize) -> BudgetVerdict {
    let cap = config.seq_cap;
    if fused_len <= cap {
        return BudgetVerdict::Ok { fused_len, cap };
    }
    let overflow = fused_len - cap;
    let vision = fused_len.saturating_sub(config.text_len);
    BudgetVerdict::OverBudget {
        fused_len,
        cap,
        overflow,
        suggested_drop: overflow.min(vision),
        restorable: overflow <= vision,
    }
}
