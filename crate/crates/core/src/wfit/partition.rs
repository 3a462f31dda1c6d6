//! Candidate selection and loss-minimizing partition search.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::config::{Configuration, IndexId};
use crate::cost::TransitionCostTable;
use crate::error::{Result, TuneError};
use crate::primitives::PartitionPlan;
use crate::wfa::MAX_PART_SIZE;

/// Symmetric pair weights, typically `doi*` values.
pub trait PairWeights {
    fn weight(&self, a: IndexId, b: IndexId) -> f64;
}

impl<F: Fn(IndexId, IndexId) -> f64> PairWeights for F {
    fn weight(&self, a: IndexId, b: IndexId) -> f64 {
        self(a, b)
    }
}

/// Sparse positive pair weights over a set of indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InteractionGraph {
    edges: BTreeMap<(IndexId, IndexId), f64>,
}

impl InteractionGraph {
    pub fn from_edges(edges: impl IntoIterator<Item = (IndexId, IndexId, f64)>) -> Self {
        let mut g = InteractionGraph::default();
        for (a, b, w) in edges {
            if a != b && w > 0.0 {
                *g.edges.entry((a.min(b), a.max(b))).or_insert(0.0) += w;
            }
        }
        g
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (IndexId, IndexId, f64)> + '_ {
        self.edges.iter().map(|(&(a, b), &w)| (a, b, w))
    }

    /// Sum of the weights of edges crossing parts of `plan`.
    pub fn loss(&self, plan: &PartitionPlan) -> f64 {
        self.edges
            .iter()
            .filter(|((a, b), _)| plan.part_of(*a) != plan.part_of(*b))
            .map(|(_, w)| w)
            .sum()
    }
}

impl PairWeights for InteractionGraph {
    fn weight(&self, a: IndexId, b: IndexId) -> f64 {
        self.edges.get(&(a.min(b), a.max(b))).copied().unwrap_or(0.0)
    }
}

/// `Σ_{i<j} Σ_{a∈P_i, b∈P_j} weight(a, b)` by direct enumeration.
pub fn loss_of_partition(plan: &PartitionPlan, weights: &impl PairWeights) -> f64 {
    let parts = plan.parts();
    let mut loss = 0.0;
    for i in 0..parts.len() {
        for j in i + 1..parts.len() {
            for a in parts[i].iter() {
                for b in parts[j].iter() {
                    loss += weights.weight(a, b);
                }
            }
        }
    }
    loss
}

/// The `u` members of `x` with the highest score, ties to the lower id.
///
/// Indices already monitored (in `monitored`) score their current benefit;
/// others additionally pay their creation cost.
pub fn top_indices(
    x: &Configuration,
    u: usize,
    monitored: &Configuration,
    current_benefit: impl Fn(IndexId) -> f64,
    table: &TransitionCostTable,
) -> Result<Configuration> {
    if u >= x.len() {
        return Ok(x.clone());
    }
    let mut scored = x
        .iter()
        .map(|a| {
            let b = current_benefit(a);
            let s = if monitored.contains(a) { b } else { b - table.create(a)? };
            Ok((s, a))
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|p, q| q.0.total_cmp(&p.0).then(p.1.cmp(&q.1)));
    Ok(scored.into_iter().take(u).map(|(_, a)| a).collect())
}

fn feasible(plan: &PartitionPlan, state_cnt: usize) -> bool {
    plan.state_count() <= state_cnt && plan.max_part_size() <= MAX_PART_SIZE
}

/// Picks a feasible partition of `d` with small cross-part interaction.
///
/// The baseline keeps the current parts (restricted to `d`) and adds
/// singletons for new indices; `rand_cnt` randomized greedy merge runs then
/// compete with it, and the first strictly smaller loss wins.
pub fn choose_partition<R: Rng>(
    d: &Configuration,
    state_cnt: usize,
    current: &PartitionPlan,
    graph: &InteractionGraph,
    rand_cnt: usize,
    rng: &mut R,
) -> Result<PartitionPlan> {
    if 2 * d.len() > state_cnt {
        return Err(TuneError::Config(format!(
            "stateCnt {state_cnt} cannot hold {} candidates as singletons; need at least {}",
            d.len(),
            2 * d.len()
        )));
    }
    let graph = InteractionGraph::from_edges(
        graph
            .edges()
            .filter(|&(a, b, _)| d.contains(a) && d.contains(b)),
    );
    let c = current.union();
    let mut parts: Vec<Configuration> = current.restrict(d).parts().to_vec();
    parts.extend(d.difference(&c).iter().map(Configuration::singleton));
    let baseline = PartitionPlan::new(parts).expect("restriction keeps parts disjoint");

    let mut best: Option<(PartitionPlan, f64)> = None;
    if feasible(&baseline, state_cnt) {
        let l = graph.loss(&baseline);
        best = Some((baseline, l));
    }
    // Without positive interactions the random runs all end at the singleton
    // partition with loss 0, which cannot beat a feasible baseline.
    if graph.is_empty() {
        return Ok(match best {
            Some((p, _)) => p,
            None => PartitionPlan::singletons(d),
        });
    }
    if best.as_ref().is_some_and(|(_, l)| *l == 0.0) {
        return Ok(best.unwrap().0);
    }
    for _ in 0..rand_cnt {
        let (plan, l) = random_merge(d, state_cnt, &graph, rng);
        if best.as_ref().is_none_or(|(_, bl)| l < *bl) {
            best = Some((plan, l));
        }
    }
    Ok(best.expect("at least one randomized run").0)
}

/// One randomized greedy merge run starting from singletons.
fn random_merge<R: Rng>(
    d: &Configuration,
    state_cnt: usize,
    graph: &InteractionGraph,
    rng: &mut R,
) -> (PartitionPlan, f64) {
    let members = d.to_vec();
    let mut parts: Vec<Option<Configuration>> =
        members.iter().map(|&a| Some(Configuration::singleton(a))).collect();
    let slot: BTreeMap<IndexId, usize> = members.iter().enumerate().map(|(i, &a)| (a, i)).collect();
    // loss between live parts i < j
    let mut between: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (a, b, w) in graph.edges() {
        let (i, j) = (slot[&a], slot[&b]);
        *between.entry((i.min(j), i.max(j))).or_insert(0.0) += w;
    }
    let mut states: usize = 2 * members.len();
    loop {
        let size = |i: usize| parts[i].as_ref().map_or(0, |p| p.len());
        let mergeable: Vec<((usize, usize), f64)> = between
            .iter()
            .filter(|(&(i, j), &l)| {
                let (si, sj) = (size(i), size(j));
                let grown = states - (1 << si) - (1 << sj) + (1 << (si + sj));
                l > 0.0 && si + sj <= MAX_PART_SIZE && grown <= state_cnt
            })
            .map(|(&k, &l)| (k, l))
            .collect();
        if mergeable.is_empty() {
            break;
        }
        let singles: Vec<&((usize, usize), f64)> = mergeable
            .iter()
            .filter(|((i, j), _)| size(*i) == 1 && size(*j) == 1)
            .collect();
        let (i, j) = if !singles.is_empty() {
            let dist = WeightedIndex::new(singles.iter().map(|(_, l)| *l)).expect("positive weights");
            singles[dist.sample(rng)].0
        } else {
            let weights = mergeable.iter().map(|&((i, j), l)| {
                let (si, sj) = (size(i), size(j));
                l / ((1usize << (si + sj)) - (1 << si) - (1 << sj)) as f64
            });
            let dist = WeightedIndex::new(weights).expect("positive weights");
            mergeable[dist.sample(rng)].0
        };
        let (si, sj) = (size(i), size(j));
        states = states - (1 << si) - (1 << sj) + (1 << (si + sj));
        let pj = parts[j].take().expect("live part");
        parts[i] = Some(parts[i].take().expect("live part").union(&pj));
        // fold j's pair losses into i
        let touching_j: Vec<((usize, usize), f64)> = between
            .iter()
            .filter(|(&(x, y), _)| x == j || y == j)
            .map(|(&k, &l)| (k, l))
            .collect();
        for (k, l) in touching_j {
            between.remove(&k);
            let other = if k.0 == j { k.1 } else { k.0 };
            if other != i {
                *between.entry((i.min(other), i.max(other))).or_insert(0.0) += l;
            }
        }
    }
    let plan = PartitionPlan::new(parts.into_iter().flatten().collect()).expect("merges keep parts disjoint");
    let loss = between.values().sum();
    (plan, loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::config_of;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn id(i: u32) -> IndexId {
        IndexId(i)
    }

    #[test]
    fn loss_examples() {
        let g = InteractionGraph::from_edges([(id(0), id(1), 4.0)]);
        let d = config_of(&[0, 1, 2]);
        assert_eq!(g.loss(&PartitionPlan::new(vec![d.clone()]).unwrap()), 0.0);
        assert_eq!(g.loss(&PartitionPlan::singletons(&d)), 4.0);
        assert_eq!(loss_of_partition(&PartitionPlan::singletons(&d), &g), 4.0);
        let none = InteractionGraph::default();
        assert_eq!(none.loss(&PartitionPlan::singletons(&d)), 0.0);
    }

    #[test]
    fn top_indices_rules() {
        let t = TransitionCostTable::from_pairs(&[(5.0, 0.0), (5.0, 0.0), (1.0, 0.0)]).unwrap();
        let x = config_of(&[0, 1, 2]);
        let ben = |a: IndexId| [3.0, 3.0, 0.0][a.index()];
        assert_eq!(top_indices(&x, 0, &config_of(&[]), ben, &t).unwrap(), config_of(&[]));
        assert_eq!(top_indices(&x, 5, &config_of(&[]), ben, &t).unwrap(), x);
        // monitored twin wins over the unmonitored one
        assert_eq!(top_indices(&x, 1, &config_of(&[1]), ben, &t).unwrap(), config_of(&[1]));
        // 2 scores -1, unmonitored 0 scores -2
        assert_eq!(top_indices(&x, 2, &config_of(&[1]), ben, &t).unwrap(), config_of(&[1, 2]));
    }

    #[test]
    fn independent_indices_stay_singletons() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = config_of(&[0, 1, 2, 3]);
        let p = choose_partition(&d, 8, &PartitionPlan::default(), &InteractionGraph::default(), 100, &mut rng)
            .unwrap();
        assert_eq!(p, PartitionPlan::singletons(&d));
    }

    #[test]
    fn strong_pair_is_merged() {
        let d = config_of(&[0, 1, 2]);
        let g = InteractionGraph::from_edges([(id(0), id(1), 9.0)]);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = choose_partition(&d, 4 + 2, &PartitionPlan::singletons(&d), &g, 1, &mut rng).unwrap();
            assert_eq!(p.part_of(id(0)), p.part_of(id(1)));
            assert_eq!(g.loss(&p), 0.0);
        }
    }

    #[test]
    fn tight_budget_ignores_interaction() {
        // a chain of three needs 8 states together, only 6 are available
        let d = config_of(&[0, 1, 2]);
        let g = InteractionGraph::from_edges([(id(0), id(1), 9.0), (id(1), id(2), 9.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = choose_partition(&d, 6, &PartitionPlan::default(), &g, 10, &mut rng).unwrap();
        assert_eq!(p.max_part_size(), 2);
        assert_eq!(g.loss(&p), 9.0);
    }

    #[test]
    fn infeasible_state_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = config_of(&[0, 1, 2]);
        let err = choose_partition(&d, 5, &PartitionPlan::default(), &InteractionGraph::default(), 1, &mut rng);
        assert!(matches!(err, Err(TuneError::Config(_))));
    }

    #[test]
    fn baseline_drops_departed_indices() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let current = PartitionPlan::new(vec![config_of(&[0, 1]), config_of(&[2])]).unwrap();
        let d = config_of(&[1, 2, 3]);
        let p = choose_partition(&d, 100, &current, &InteractionGraph::default(), 10, &mut rng).unwrap();
        assert_eq!(p, PartitionPlan::singletons(&d));
    }

    #[test]
    fn randomized_runs_respect_budget() {
        let d: Configuration = (0..10).map(IndexId).collect();
        let edges: Vec<_> = (0..10u32)
            .flat_map(|a| (a + 1..10).map(move |b| (id(a), id(b), ((a * 7 + b * 3) % 5) as f64)))
            .collect();
        let g = InteractionGraph::from_edges(edges);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for budget in [20, 24, 40, 100] {
            let p = choose_partition(&d, budget, &PartitionPlan::default(), &g, 20, &mut rng).unwrap();
            assert!(p.state_count() <= budget);
            assert_eq!(p.union(), d);
        }
    }
}
