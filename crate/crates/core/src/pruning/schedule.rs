use super::{ImportanceReport, PruneConfig};

/// Target sparsity at episode `t`: a cubic ramp from `p_initial` at `t_start` to `p_final`
/// at `t_start + N·Δ`, constant outside that window. Both endpoints are returned exactly.
pub fn sparsity_schedule(t: usize, cfg: &PruneConfig) -> f64 {
    if t <= cfg.t_start {
        return cfg.p_initial;
    }
    let end = cfg.schedule_end();
    if t >= end {
        return cfg.p_final;
    }
    let span = (cfg.total_prune_steps * cfg.prune_frequency) as f64;
    let remaining = 1.0 - (t - cfg.t_start) as f64 / span;
    cfg.p_final + (cfg.p_initial - cfg.p_final) * remaining.powi(3)
}

/// `ψ_t = p_t · ΣΩ`.
pub fn dynamic_threshold(report: &ImportanceReport, p_t: f64) -> f64 {
    report.total * p_t
}

/// Prune events fall on `t_start + kΔ` for `k = 0..=N`.
pub fn is_prune_event(t: usize, cfg: &PruneConfig) -> bool {
    t >= cfg.t_start
        && (t - cfg.t_start).is_multiple_of(cfg.prune_frequency)
        && (t - cfg.t_start) / cfg.prune_frequency <= cfg.total_prune_steps
}
