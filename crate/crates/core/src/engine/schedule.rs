use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::task::TaskSpec;

/// Largest random per-sender delay drawn for seeded schedules.
pub const MAX_RANDOM_DELAY: u64 = 2;

/// Agents in `blocked` can neither send nor receive during
/// `[from_tick, until_tick)`; affected messages wait for the interval to end.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Partition {
    pub from_tick: u64,
    pub until_tick: u64,
    pub blocked: BTreeSet<String>,
}

impl Partition {
    pub fn blocks(&self, agent: &str, tick: u64) -> bool {
        tick >= self.from_tick && tick < self.until_tick && self.blocked.contains(agent)
    }
}

/// Partition-plan file contents.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionPlan {
    #[serde(default)]
    pub partitions: Vec<Partition>,
}

/// One concrete interleaving: the order in which agents fire their output
/// events, per-sender delivery delays, and partitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub order: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub delays: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub partitions: Vec<Partition>,
}

impl Schedule {
    pub fn in_order<I, S>(order: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Schedule {
            order: order.into_iter().map(Into::into).collect(),
            delays: BTreeMap::new(),
            partitions: Vec::new(),
        }
    }

    /// Declaration order with no delays.
    pub fn declared(spec: &TaskSpec) -> Self {
        Self::in_order(spec.subtasks.iter().map(|s| s.id.as_str()))
    }

    /// Uniformly shuffled order plus random delays in `0..=MAX_RANDOM_DELAY`.
    pub fn from_seed(spec: &TaskSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<String> = spec.subtasks.iter().map(|s| s.id.clone()).collect();
        order.shuffle(&mut rng);
        let delays = spec
            .subtasks
            .iter()
            .map(|s| (s.id.clone(), rng.gen_range(0..=MAX_RANDOM_DELAY)))
            .collect();
        Schedule {
            order,
            delays,
            partitions: Vec::new(),
        }
    }

    pub fn with_partitions(mut self, plan: &PartitionPlan) -> Self {
        self.partitions = plan.partitions.clone();
        self
    }

    pub fn delay(&self, sender: &str) -> u64 {
        self.delays.get(sender).copied().unwrap_or(0)
    }

    /// Tick of the agent's firing slot (its position in the order).
    pub fn slot(&self, agent: &str) -> Option<u64> {
        self.order.iter().position(|a| a == agent).map(|p| p as u64)
    }

    pub(crate) fn blocked(&self, agent: &str, tick: u64) -> Option<u64> {
        self.partitions
            .iter()
            .filter(|p| p.blocks(agent, tick))
            .map(|p| p.until_tick)
            .max()
    }

    /// Earliest tick at which a message sent at `sent` between the given
    /// endpoints is delivered. `None` endpoints (merger, orchestrator) are
    /// never partitioned.
    pub(crate) fn delivery_tick(
        &self,
        sender: Option<&str>,
        recipient: Option<&str>,
        sent: u64,
        delay: u64,
    ) -> u64 {
        let mut depart = sent;
        if let Some(s) = sender {
            while let Some(end) = self.blocked(s, depart) {
                depart = end;
            }
        }
        let mut arrive = depart + 1 + delay;
        loop {
            let held = [sender, recipient]
                .into_iter()
                .flatten()
                .filter_map(|a| self.blocked(a, arrive))
                .max();
            match held {
                Some(end) => arrive = end,
                None => return arrive,
            }
        }
    }
}

impl PartitionPlan {
    /// Random plan over the spec's agents: up to three intervals starting
    /// within the first `horizon` ticks, each lasting 1..=horizon ticks.
    pub fn random(spec: &TaskSpec, seed: u64, horizon: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<&str> = spec.subtasks.iter().map(|s| s.id.as_str()).collect();
        let count = if ids.is_empty() { 0 } else { rng.gen_range(1..=3) };
        let partitions = (0..count)
            .map(|_| {
                let from_tick = rng.gen_range(0..horizon.max(1));
                let until_tick = from_tick + rng.gen_range(1..=horizon.max(1));
                let blocked = ids
                    .iter()
                    .filter(|_| rng.gen_bool(0.4))
                    .map(|s| s.to_string())
                    .collect();
                Partition {
                    from_tick,
                    until_tick,
                    blocked,
                }
            })
            .collect();
        PartitionPlan { partitions }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(from: u64, until: u64, who: &[&str]) -> Vec<Partition> {
        vec![Partition {
            from_tick: from,
            until_tick: until,
            blocked: who.iter().map(|s| s.to_string()).collect(),
        }]
    }

    #[test]
    fn delivery_waits_for_partition_to_heal() {
        let mut s = Schedule::in_order(["a", "b"]);
        assert_eq!(s.delivery_tick(Some("a"), Some("b"), 0, 0), 1);
        s.partitions = plan(0, 5, &["b"]);
        assert_eq!(s.delivery_tick(Some("a"), Some("b"), 0, 0), 5);
        assert_eq!(s.delivery_tick(Some("a"), None, 0, 0), 1);
        s.partitions = plan(0, 5, &["a"]);
        assert_eq!(s.delivery_tick(Some("a"), None, 2, 1), 7);
    }

    #[test]
    fn seeded_schedules_are_reproducible() {
        let spec: TaskSpec = serde_json::from_str(
            r#"{"id":"x","name":"x","subtasks":[{"id":"a"},{"id":"b"},{"id":"c"},{"id":"d"}]}"#,
        )
        .unwrap();
        assert_eq!(Schedule::from_seed(&spec, 7), Schedule::from_seed(&spec, 7));
        let orders: BTreeSet<Vec<String>> =
            (0..40).map(|s| Schedule::from_seed(&spec, s).order).collect();
        assert!(orders.len() > 5);
        assert_eq!(PartitionPlan::random(&spec, 3, 5), PartitionPlan::random(&spec, 3, 5));
    }
}
