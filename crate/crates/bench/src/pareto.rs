use crate::error::{BenchError, Result};
use crate::record::RunRecord;

/// Records not dominated in (eps_total, cost), both lower-is-better, ordered
/// by eps_total ascending. Records tied in both coordinates are all kept.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoFront {
    pub records: Vec<RunRecord>,
}

/// `a` dominates `b`: no worse in both coordinates, strictly better in one.
pub fn dominates(a: &RunRecord, b: &RunRecord) -> bool {
    a.eps_total <= b.eps_total && a.cost <= b.cost && (a.eps_total < b.eps_total || a.cost < b.cost)
}

pub fn pareto_front(records: &[RunRecord]) -> Result<ParetoFront> {
    if records.is_empty() {
        return Err(BenchError::Format("pareto front of an empty record set".into()));
    }
    if records.iter().any(|r| r.eps_total.is_nan() || r.cost.is_nan()) {
        return Err(BenchError::Format("NaN in eps_total or cost".into()));
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&i, &j| records[i].eps_total.total_cmp(&records[j].eps_total).then(records[i].cost.total_cmp(&records[j].cost)).then(i.cmp(&j)));
    let mut front = Vec::new();
    // lowest cost among records with strictly smaller epsilon
    let mut best_before = f64::INFINITY;
    let mut g = 0;
    while g < order.len() {
        let eps = records[order[g]].eps_total;
        let end = order[g..].iter().position(|&i| records[i].eps_total != eps).map_or(order.len(), |p| g + p);
        let group_min = records[order[g]].cost;
        if group_min < best_before {
            front.extend(order[g..end].iter().filter(|&&i| records[i].cost == group_min).map(|&i| records[i].clone()));
            best_before = group_min;
        }
        g = end;
    }
    Ok(ParetoFront { records: front })
}
