//! Grouping per-detuning solution sets into continuous branches.

use crate::model::{DimerParams, Method, SpectrumPoint};

const COINCIDENT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPoint {
    pub branch_id: usize,
    pub point: SpectrumPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchEventKind {
    /// First grid point of a branch that starts inside the sweep.
    Born,
    /// Last grid point of a branch that ends inside the sweep.
    Died,
}

/// A branch appearing or disappearing between grid points (a fold edge).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchEvent {
    pub index: usize,
    pub delta: f64,
    pub branch_id: usize,
    pub kind: BranchEventKind,
}

/// Solutions across a detuning grid with branch labels.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchSweep {
    /// Parameter template; `delta` is replaced by the grid values.
    pub params: DimerParams,
    pub deltas: Vec<f64>,
    /// Per grid point, sorted by branch id.
    pub points: Vec<Vec<BranchPoint>>,
    pub events: Vec<BranchEvent>,
}

impl BranchSweep {
    /// Label solutions by nearest-neighbour matching in (s, Re μ, Im μ)
    /// between consecutive grid points.
    ///
    /// When fewer solutions than branches survive a step and a leftover
    /// branch lands on a point already claimed by a neighbour at comparable
    /// distance, both branches share that point: two branches meeting at a
    /// coalescence rather than one ending at a fold. Branches that already
    /// coincide do not share again, so a coalesced group thins out to the
    /// surviving solutions on the next step.
    pub fn track(params: DimerParams, deltas: Vec<f64>, solutions: Vec<Vec<SpectrumPoint>>) -> Self {
        assert_eq!(deltas.len(), solutions.len(), "one solution set per grid point");
        let mut points: Vec<Vec<BranchPoint>> = Vec::with_capacity(deltas.len());
        let mut events = Vec::new();
        let mut next_id = 0;

        for (index, mut current) in solutions.into_iter().enumerate() {
            // ids are handed out in (s, Re μ, Im μ) order so that methods
            // producing the same set get the same labels
            current.sort_by(|a, b| {
                a.imbalance_s
                    .total_cmp(&b.imbalance_s)
                    .then(a.mu.re.total_cmp(&b.mu.re))
                    .then(a.mu.im.total_cmp(&b.mu.im))
            });
            let Some(prev) = points.last() else {
                let first: Vec<BranchPoint> = current
                    .into_iter()
                    .map(|point| {
                        next_id += 1;
                        BranchPoint {
                            branch_id: next_id - 1,
                            point,
                        }
                    })
                    .collect();
                points.push(first);
                continue;
            };

            let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(prev.len() * current.len());
            for (i, p) in prev.iter().enumerate() {
                for (k, q) in current.iter().enumerate() {
                    pairs.push((p.point.distance(q), i, k));
                }
            }
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

            let mut prev_match: Vec<Option<usize>> = vec![None; prev.len()];
            let mut cur_match: Vec<Option<usize>> = vec![None; current.len()];
            for &(_, i, k) in &pairs {
                if prev_match[i].is_none() && cur_match[k].is_none() {
                    prev_match[i] = Some(k);
                    cur_match[k] = Some(i);
                }
            }

            let mut labelled: Vec<BranchPoint> = Vec::with_capacity(prev.len().max(current.len()));
            for (k, q) in current.iter().enumerate() {
                let branch_id = match cur_match[k] {
                    Some(i) => prev[i].branch_id,
                    None => {
                        next_id += 1;
                        events.push(BranchEvent {
                            index,
                            delta: deltas[index],
                            branch_id: next_id - 1,
                            kind: BranchEventKind::Born,
                        });
                        next_id - 1
                    }
                };
                labelled.push(BranchPoint { branch_id, point: *q });
            }

            for (i, p) in prev.iter().enumerate() {
                if prev_match[i].is_some() {
                    continue;
                }
                let coincident = prev
                    .iter()
                    .enumerate()
                    .any(|(m, o)| m != i && p.point.distance(&o.point) <= COINCIDENT);
                let shared = current
                    .iter()
                    .enumerate()
                    .min_by(|a, b| p.point.distance(a.1).total_cmp(&p.point.distance(b.1)))
                    .and_then(|(k, q)| {
                        let owner = cur_match[k]?;
                        let d_self = p.point.distance(q);
                        let d_owner = prev[owner].point.distance(q);
                        (!coincident && current.len() < prev.len() && d_self <= 2.0 * d_owner + 1e-9).then_some(*q)
                    });
                match shared {
                    Some(q) => labelled.push(BranchPoint {
                        branch_id: p.branch_id,
                        point: q,
                    }),
                    None => events.push(BranchEvent {
                        index: index - 1,
                        delta: deltas[index - 1],
                        branch_id: p.branch_id,
                        kind: BranchEventKind::Died,
                    }),
                }
            }
            labelled.sort_by_key(|bp| bp.branch_id);
            points.push(labelled);
        }

        Self {
            params,
            deltas,
            points,
            events,
        }
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn count_at(&self, index: usize) -> usize {
        self.points[index].len()
    }

    pub fn params_at(&self, index: usize) -> DimerParams {
        self.params.with_delta(self.deltas[index])
    }

    pub fn branch_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .points
            .iter()
            .flat_map(|row| row.iter().map(|bp| bp.branch_id))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn point(&self, index: usize, branch_id: usize) -> Option<&SpectrumPoint> {
        self.points[index]
            .iter()
            .find(|bp| bp.branch_id == branch_id)
            .map(|bp| &bp.point)
    }

    /// (grid index, point) along one branch.
    pub fn branch(&self, branch_id: usize) -> Vec<(usize, &SpectrumPoint)> {
        (0..self.len())
            .filter_map(|i| self.point(i, branch_id).map(|p| (i, p)))
            .collect()
    }

    /// Keep only the listed branches.
    pub fn restrict(&self, branch_ids: &[usize]) -> BranchSweep {
        BranchSweep {
            params: self.params,
            deltas: self.deltas.clone(),
            points: self
                .points
                .iter()
                .map(|row| {
                    row.iter()
                        .filter(|bp| branch_ids.contains(&bp.branch_id))
                        .copied()
                        .collect()
                })
                .collect(),
            events: self
                .events
                .iter()
                .filter(|e| branch_ids.contains(&e.branch_id))
                .copied()
                .collect(),
        }
    }

    pub fn method(&self) -> Option<Method> {
        self.points
            .iter()
            .flat_map(|row| row.iter())
            .map(|bp| bp.point.method)
            .next()
    }

    pub fn total_points(&self) -> usize {
        self.points.iter().map(Vec::len).sum()
    }
}

/// Evenly spaced grid with exact endpoints.
pub fn uniform_grid(min: f64, max: f64, steps: usize) -> Vec<f64> {
    assert!(steps >= 2, "grid needs at least two points");
    let n = (steps - 1) as f64;
    (0..steps)
        .map(|k| {
            let t = k as f64;
            (min * (n - t) + max * t) / n
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModeState;
    use num_complex::Complex64;

    fn pt(s: f64, re: f64, im: f64) -> SpectrumPoint {
        SpectrumPoint {
            imbalance_s: s,
            mu: Complex64::new(re, im),
            state: ModeState::from_real(1.0, 0.0),
            residual: 0.0,
            method: Method::Polynomial,
        }
    }

    fn params() -> DimerParams {
        DimerParams::linear(0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn keeps_identity_when_order_swaps() {
        let sweep = BranchSweep::track(
            params(),
            vec![0.0, 0.1, 0.2],
            vec![
                vec![pt(0.0, 0.0, 0.0), pt(1.0, 1.0, 1.0)],
                vec![pt(1.01, 1.0, 1.0), pt(0.01, 0.0, 0.0)],
                vec![pt(0.02, 0.0, 0.0), pt(1.02, 1.0, 1.0)],
            ],
        );
        assert_eq!(sweep.branch_ids(), vec![0, 1]);
        for (_, p) in sweep.branch(0) {
            assert!(p.imbalance_s < 0.5);
        }
        assert!(sweep.events.is_empty());
    }

    #[test]
    fn fold_pair_is_born_and_dies() {
        let sweep = BranchSweep::track(
            params(),
            vec![0.0, 0.1, 0.2, 0.3],
            vec![
                vec![pt(0.0, 0.0, 0.0)],
                vec![pt(0.0, 0.0, 0.0), pt(0.5, 2.0, 0.0), pt(0.6, 2.1, 0.0)],
                vec![pt(0.0, 0.0, 0.0), pt(0.45, 2.0, 0.0), pt(0.65, 2.1, 0.0)],
                vec![pt(0.0, 0.0, 0.0)],
            ],
        );
        let born: Vec<_> = sweep.events.iter().filter(|e| e.kind == BranchEventKind::Born).collect();
        let died: Vec<_> = sweep.events.iter().filter(|e| e.kind == BranchEventKind::Died).collect();
        assert_eq!(born.len(), 2);
        assert_eq!(died.len(), 2);
        assert!(born.iter().all(|e| e.index == 1));
        assert!(died.iter().all(|e| e.index == 2));
        assert_eq!(sweep.count_at(3), 1);
    }

    #[test]
    fn coalescing_branches_share_a_point() {
        let sweep = BranchSweep::track(
            params(),
            vec![-0.1, 0.0, 0.1],
            vec![
                vec![pt(-1.0, -1.0, 0.0), pt(0.0, 0.1, 0.0), pt(0.0, -0.1, 0.0)],
                vec![pt(-1.0, -1.0, 0.0), pt(0.0, 0.0, 0.0)],
                vec![pt(-1.0, -1.0, 0.0), pt(0.0, 0.1, 0.0), pt(0.0, -0.1, 0.0)],
            ],
        );
        assert_eq!(sweep.count_at(1), 3);
        assert!(sweep.events.is_empty());
        assert_eq!(sweep.branch_ids().len(), 3);
    }

    #[test]
    fn coalesced_group_does_not_keep_sharing() {
        let ep = pt(0.0, 0.0, -1.0);
        let sweep = BranchSweep::track(
            params(),
            vec![-0.1, 0.0, 0.1, 0.2],
            vec![
                vec![pt(-0.4, 0.5, -0.6), pt(0.4, -0.5, -1.4)],
                vec![ep, ep, ep, ep],
                vec![pt(-0.4, -0.5, -0.6), pt(0.4, 0.5, -1.4)],
                vec![pt(-0.5, -0.6, -0.5), pt(0.5, 0.6, -1.5)],
            ],
        );
        assert_eq!(sweep.count_at(1), 4);
        assert_eq!(sweep.count_at(2), 2);
        assert_eq!(sweep.count_at(3), 2);
    }

    #[test]
    fn grid_endpoints_exact() {
        let g = uniform_grid(-0.1, 0.1, 201);
        assert_eq!(g.len(), 201);
        assert_eq!(g[0], -0.1);
        assert_eq!(g[200], 0.1);
        assert_eq!(g[100], 0.0);
    }
}
