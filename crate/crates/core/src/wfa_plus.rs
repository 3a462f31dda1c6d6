//! One work-function instance per part of a stable partition.

use crate::config::{Configuration, LocalSpace};
use crate::cost::{CostOracle, Statement, StatementCosts, TransitionCostTable};
use crate::error::{Result, TuneError};
use crate::primitives::PartitionPlan;
use crate::wfa::WorkFunction;

#[derive(Debug, Clone, PartialEq)]
pub struct WfaPlus {
    plan: PartitionPlan,
    instances: Vec<WorkFunction>,
    /// `Σ_i cost(q_i, ∅)` over processed statements.
    empty_cost_sum: f64,
    processed: usize,
}

impl WfaPlus {
    pub fn new(plan: PartitionPlan, s0: &Configuration, table: &TransitionCostTable) -> Result<Self> {
        if !s0.is_subset(&plan.union()) {
            return Err(TuneError::Coverage(s0.difference(&plan.union()).to_vec()));
        }
        let instances = plan
            .parts()
            .iter()
            .map(|p| WorkFunction::new(p, &s0.intersection(p), table))
            .collect::<Result<Vec<_>>>()?;
        Ok(WfaPlus {
            plan,
            instances,
            empty_cost_sum: 0.0,
            processed: 0,
        })
    }

    pub fn plan(&self) -> &PartitionPlan {
        &self.plan
    }

    pub fn instances(&self) -> &[WorkFunction] {
        &self.instances
    }

    pub fn instances_mut(&mut self) -> &mut [WorkFunction] {
        &mut self.instances
    }

    pub fn candidates(&self) -> Configuration {
        self.plan.union()
    }

    pub fn processed(&self) -> usize {
        self.processed
    }

    pub fn empty_cost_sum(&self) -> f64 {
        self.empty_cost_sum
    }

    /// Advances every instance on `q`; costs are memoized across parts.
    pub fn analyze_statement(&mut self, costs: &StatementCosts<'_>) -> Result<()> {
        for wf in &mut self.instances {
            wf.analyze_statement(costs)?;
        }
        self.empty_cost_sum += costs.cost(&Configuration::new())?;
        self.processed += 1;
        Ok(())
    }

    pub fn analyze_query(&mut self, q: &Statement, oracle: &dyn CostOracle) -> Result<Configuration> {
        self.analyze_statement(&StatementCosts::new(q, oracle))?;
        Ok(self.recommend())
    }

    pub fn recommend(&self) -> Configuration {
        self.instances
            .iter()
            .fold(Configuration::new(), |acc, wf| acc.union(&wf.recommend()))
    }

    /// Reconstructs the joint work function from the parts:
    /// `Σ_k w^(k)[S ∩ C_k] − (K−1)·Σ_i cost(q_i, ∅)`. Exact for a stable
    /// partition that has not been through feedback or repartitioning.
    pub fn joint_value(&self, s: &Configuration) -> f64 {
        let k = self.instances.len().max(1) as f64;
        self.instances.iter().map(|wf| wf.value(s)).sum::<f64>() - (k - 1.0) * self.empty_cost_sum
    }

    /// Replaces the partition, carrying the work-function values over.
    ///
    /// For each new part `D` and `X ⊆ D` the new value is
    /// `Σ_k w^(k)[C_k ∩ X] + δ(S0 ∩ D − C, X − C)` where `C` is the old
    /// candidate set, shifted so that the smallest value of the part is 0;
    /// the new recommendation is `D ∩ recommend()`.
    ///
    /// The shift is the same for every `X` and changes no decision. Without
    /// it every value carries the sum of all old parts, so magnitudes grow by
    /// a factor of about `K` per repartition and soon lose integer precision.
    pub fn repartition(
        &mut self,
        new_plan: PartitionPlan,
        s0: &Configuration,
        table: &TransitionCostTable,
    ) -> Result<()> {
        let old_c = self.candidates();
        let new_c = new_plan.union();
        let rec = self.recommend();
        let uncovered = rec.difference(&new_c);
        if !uncovered.is_empty() {
            return Err(TuneError::Coverage(uncovered.to_vec()));
        }
        let mut instances = Vec::with_capacity(new_plan.len());
        for d in new_plan.parts() {
            if d.len() > crate::wfa::MAX_PART_SIZE {
                return Err(TuneError::Capacity {
                    size: d.len(),
                    cap: crate::wfa::MAX_PART_SIZE,
                });
            }
            let space = LocalSpace::new(d);
            let fresh = d.difference(&old_c);
            let fresh_start = s0.intersection(&fresh);
            let mut x = Vec::with_capacity(space.size());
            for mask in 0..space.size() as u32 {
                let xs = space.config_of(mask);
                let carried: f64 = self.instances.iter().map(|wf| wf.value(&xs)).sum();
                x.push(carried + table.transition(&fresh_start, &xs.difference(&old_c))?);
            }
            let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
            x.iter_mut().for_each(|v| *v -= lo);
            instances.push(WorkFunction::from_values(d, table, x, &d.intersection(&rec))?);
        }
        self.plan = new_plan;
        self.instances = instances;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::config_of;

    fn table() -> TransitionCostTable {
        TransitionCostTable::from_pairs(&[(10.0, 1.0), (12.0, 2.0), (7.0, 0.0)]).unwrap()
    }

    #[test]
    fn merge_sums_part_values() {
        let t = table();
        let plan = PartitionPlan::singletons(&config_of(&[0, 1]));
        let mut wp = WfaPlus::new(plan, &Configuration::new(), &t).unwrap();
        let w1 = wp.instances()[0].values().to_vec();
        let w2 = wp.instances()[1].values().to_vec();
        let merged = PartitionPlan::new(vec![config_of(&[0, 1])]).unwrap();
        wp.repartition(merged, &Configuration::new(), &t).unwrap();
        let x = wp.instances()[0].values();
        assert_eq!(x[0b11], w1[1] + w2[1]);
        assert_eq!(x[0b00], w1[0] + w2[0]);
        assert_eq!(x[0b01], w1[1] + w2[0]);
    }

    #[test]
    fn repartitioned_values_start_at_zero() {
        let t = table();
        let c = config_of(&[0, 1]);
        let o = crate::cost::TableOracle::new(LocalSpace::new(&c), vec![vec![30.0, 20.0, 25.0, 9.0]]).unwrap();
        let mut wp = WfaPlus::new(PartitionPlan::singletons(&c), &Configuration::new(), &t).unwrap();
        wp.analyze_query(&o.statement(1, 0), &o).unwrap();
        let w1 = wp.instances()[0].values().to_vec();
        let w2 = wp.instances()[1].values().to_vec();
        wp.repartition(PartitionPlan::new(vec![c]).unwrap(), &Configuration::new(), &t)
            .unwrap();
        let x = wp.instances()[0].values();
        let raw = [w1[0] + w2[0], w1[1] + w2[0], w1[0] + w2[1], w1[1] + w2[1]];
        let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(lo > 0.0);
        for m in 0..4 {
            assert_eq!(x[m], raw[m] - lo);
        }
    }

    #[test]
    fn split_reads_back_single_entries() {
        let t = table();
        let plan = PartitionPlan::new(vec![config_of(&[0, 1])]).unwrap();
        let mut wp = WfaPlus::new(plan, &Configuration::new(), &t).unwrap();
        let x = wp.instances()[0].values().to_vec();
        wp.repartition(PartitionPlan::singletons(&config_of(&[0, 1])), &Configuration::new(), &t)
            .unwrap();
        // each new part also carries the other old part values at ∅
        assert_eq!(wp.instances()[0].values()[1], x[0b01]);
        assert_eq!(wp.instances()[1].values()[1], x[0b10]);
    }

    #[test]
    fn new_index_enters_with_creation_cost() {
        let t = table();
        let plan = PartitionPlan::singletons(&config_of(&[0, 1]));
        let mut wp = WfaPlus::new(plan, &Configuration::new(), &t).unwrap();
        let base: f64 = wp.instances().iter().map(|wf| wf.values()[0]).sum();
        wp.repartition(
            PartitionPlan::singletons(&config_of(&[0, 1, 2])),
            &Configuration::new(),
            &t,
        )
        .unwrap();
        assert_eq!(wp.instances()[2].values()[1], base + 7.0);
    }

    #[test]
    fn coverage_of_recommendation() {
        let t = table();
        let s0 = config_of(&[1]);
        let plan = PartitionPlan::singletons(&config_of(&[0, 1]));
        let mut wp = WfaPlus::new(plan, &s0, &t).unwrap();
        assert_eq!(wp.recommend(), s0);
        let err = wp
            .repartition(PartitionPlan::singletons(&config_of(&[0])), &s0, &t)
            .unwrap_err();
        assert_eq!(err, TuneError::Coverage(vec![crate::config::IndexId(1)]));
    }

    #[test]
    fn union_of_part_recommendations() {
        let t = table();
        let s0 = config_of(&[0, 2]);
        let wp = WfaPlus::new(PartitionPlan::singletons(&config_of(&[0, 1, 2])), &s0, &t).unwrap();
        assert_eq!(wp.recommend(), s0);
    }
}
