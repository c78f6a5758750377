//! Deterministic synthetic bill-sponsorship data for demos and tests.
//!
//! Senators live in a latent topic space:
//! - a weak party axis (background polarization),
//! - within-party faction blocks in two tiers: a few bill-rich cores whose
//!   pairs carry the strongest alignments, and many overlapping broad
//!   factions that stitch each party into one transitive cluster,
//! - cross-party clash blocks (a few members of each side polarized on a
//!   topic), again in a strong and a weak tier, yielding graded
//!   oppositions plus allied pairs that share enemies.
//!
//! Bills activate one topic; senators join according to their loading on
//! it. Cosine similarity of the sponsorship rows then recovers this
//! geometry, so magnitude thresholding produces nested layers with
//! party-balanced clustering, spread degrees, and a positive fraction
//! rising with depth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::network::NodeAttributes;

/// One tier of within-party faction blocks.
#[derive(Debug, Clone)]
pub struct FactionTier {
    pub per_party: usize,
    pub size: usize,
    pub bill_share: f64,
    pub loading: (f64, f64),
}

/// One tier of cross-party clash blocks (`side` members per party).
#[derive(Debug, Clone)]
pub struct ClashTier {
    pub blocks: usize,
    pub side: usize,
    pub bill_share: f64,
    pub loading: (f64, f64),
}

/// Bipartisan working groups: `side` members from each party who all pull
/// the same way on the topic, so their cross-party pairs align positively.
#[derive(Debug, Clone)]
pub struct BridgeTier {
    pub blocks: usize,
    pub side: usize,
    pub bill_share: f64,
    pub loading: (f64, f64),
}

/// Intra-party rivalries: two poles drawn from the same party who pull
/// against each other, giving same-party oppositions.
#[derive(Debug, Clone)]
pub struct RivalryTier {
    /// Blocks per party.
    pub per_party: usize,
    pub side: usize,
    pub bill_share: f64,
    pub loading: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub n_actors: usize,
    pub n_items: usize,
    pub seed: u64,
    /// Actors labelled with the first party (the rest take the second).
    pub n_first_party: usize,
    pub faction_tiers: Vec<FactionTier>,
    pub clash_tiers: Vec<ClashTier>,
    pub bridge_tiers: Vec<BridgeTier>,
    pub rivalry_tiers: Vec<RivalryTier>,
    /// Bill-share of the party axis; leftovers after all tiers are generic.
    pub party_bill_share: f64,
    pub party_loading: (f64, f64),
    /// Baseline probability of joining any bill.
    pub bill_base_rate: f64,
    /// Response scale per unit loading on the bill's topic.
    pub response_scale: f64,
    /// Spread of actor-level sponsorship activity (probability scale).
    pub activity_spread: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_actors: 100,
            n_items: 3035,
            seed: 63,
            n_first_party: 51,
            faction_tiers: vec![
                FactionTier { per_party: 2, size: 9, bill_share: 0.24, loading: (1.0, 1.2) },
                FactionTier { per_party: 12, size: 6, bill_share: 0.21, loading: (0.85, 1.05) },
            ],
            clash_tiers: vec![
                ClashTier { blocks: 10, side: 3, bill_share: 0.21, loading: (1.15, 1.35) },
                ClashTier { blocks: 12, side: 3, bill_share: 0.12, loading: (0.8, 1.0) },
            ],
            bridge_tiers: vec![
                BridgeTier { blocks: 8, side: 3, bill_share: 0.12, loading: (0.8, 1.0) },
            ],
            rivalry_tiers: vec![
                RivalryTier { per_party: 3, side: 3, bill_share: 0.07, loading: (0.8, 1.0) },
            ],
            party_bill_share: 0.03,
            party_loading: (0.5, 0.7),
            bill_base_rate: 0.45,
            response_scale: 0.36,
            activity_spread: 0.04,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub attrs: NodeAttributes,
    /// (actor label, item id) sponsorship pairs.
    pub pairs: Vec<(String, String)>,
}

impl SyntheticData {
    pub fn actors_csv(&self) -> String {
        let mut out = Vec::new();
        crate::network::write_attributes(&self.attrs, &mut out).expect("in-memory write");
        String::from_utf8(out).expect("utf8")
    }

    pub fn sponsorship_csv(&self) -> String {
        let mut out = String::from("senator_id,bill_id\n");
        for (actor, item) in &self.pairs {
            out.push_str(actor);
            out.push(',');
            out.push_str(item);
            out.push('\n');
        }
        out
    }
}

struct Block {
    /// Per-actor loading; zero for non-members. Opposed sides carry
    /// opposite signs; at bill time every response is flipped by the sign
    /// of the seed's own loading, so a seed's opponents avoid their bills.
    loads: Vec<f64>,
    members: Vec<usize>,
}

// Deals block memberships by rotating through a shuffled pool so that
// every actor lands in about the same number of blocks per tier; even
// memberships keep layer degrees spread instead of piling onto hubs.
struct Dealer {
    order: Vec<usize>,
    pos: usize,
}

impl Dealer {
    fn new<R: Rng>(pool: &[usize], rng: &mut R) -> Self {
        let mut order = pool.to_vec();
        shuffle(&mut order, rng);
        Dealer { order, pos: 0 }
    }

    fn deal<R: Rng>(&mut self, k: usize, rng: &mut R) -> Vec<usize> {
        let mut members = Vec::with_capacity(k);
        let mut guard = 0;
        while members.len() < k.min(self.order.len()) {
            if self.pos >= self.order.len() {
                shuffle(&mut self.order, rng);
                self.pos = 0;
            }
            let pick = self.order[self.pos];
            self.pos += 1;
            if !members.contains(&pick) {
                members.push(pick);
            }
            guard += 1;
            if guard > 10 * self.order.len() {
                break;
            }
        }
        members
    }
}

fn shuffle<R: Rng>(values: &mut [usize], rng: &mut R) {
    for i in (1..values.len()).rev() {
        values.swap(i, rng.gen_range(0..=i));
    }
}

/// Generates the full synthetic dataset.
pub fn synthetic_sponsorship(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    let n = cfg.n_actors;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let party: Vec<bool> = (0..n).map(|i| i < cfg.n_first_party).collect();
    let labels: Vec<String> = (0..n)
        .map(|i| format!("Sen{:03}({})", i + 1, if party[i] { "R" } else { "D" }))
        .collect();
    let states: Vec<String> = (0..n).map(|i| format!("S{:02}", i % 50)).collect();
    let attrs = NodeAttributes::new(labels.clone())
        .with_column("party", party.iter().map(|p| if *p { "GOP" } else { "Dem" }.to_string()).collect())
        .with_column("state", states);

    let first_pool: Vec<usize> = (0..n).filter(|&i| party[i]).collect();
    let second_pool: Vec<usize> = (0..n).filter(|&i| !party[i]).collect();

    // assemble all topic blocks with their bill shares
    let mut blocks: Vec<Block> = Vec::new();
    let mut shares: Vec<f64> = Vec::new();

    for tier in &cfg.faction_tiers {
        let per_block_share = tier.bill_share / (2 * tier.per_party).max(1) as f64;
        for pool in [&first_pool, &second_pool] {
            let mut dealer = Dealer::new(pool, &mut rng);
            for _ in 0..tier.per_party {
                let members = dealer.deal(tier.size, &mut rng);
                let mut loads = vec![0.0; n];
                for &m in &members {
                    loads[m] = rng.gen_range(tier.loading.0..=tier.loading.1);
                }
                blocks.push(Block { loads, members });
                shares.push(per_block_share);
            }
        }
    }
    for tier in &cfg.clash_tiers {
        let per_block_share = tier.bill_share / tier.blocks.max(1) as f64;
        let mut first_dealer = Dealer::new(&first_pool, &mut rng);
        let mut second_dealer = Dealer::new(&second_pool, &mut rng);
        for _ in 0..tier.blocks {
            let mut members = Vec::new();
            let mut loads = vec![0.0; n];
            for (dealer, sign) in [(&mut first_dealer, 1.0), (&mut second_dealer, -1.0)] {
                let side = dealer.deal(tier.side, &mut rng);
                for &m in &side {
                    loads[m] = sign * rng.gen_range(tier.loading.0..=tier.loading.1);
                }
                members.extend(side);
            }
            blocks.push(Block { loads, members });
            shares.push(per_block_share);
        }
    }
    for tier in &cfg.bridge_tiers {
        let per_block_share = tier.bill_share / tier.blocks.max(1) as f64;
        let mut first_dealer = Dealer::new(&first_pool, &mut rng);
        let mut second_dealer = Dealer::new(&second_pool, &mut rng);
        for _ in 0..tier.blocks {
            let mut members = Vec::new();
            let mut loads = vec![0.0; n];
            for dealer in [&mut first_dealer, &mut second_dealer] {
                let side = dealer.deal(tier.side, &mut rng);
                for &m in &side {
                    loads[m] = rng.gen_range(tier.loading.0..=tier.loading.1);
                }
                members.extend(side);
            }
            blocks.push(Block { loads, members });
            shares.push(per_block_share);
        }
    }
    for tier in &cfg.rivalry_tiers {
        let per_block_share = tier.bill_share / (2 * tier.per_party).max(1) as f64;
        for pool in [&first_pool, &second_pool] {
            let mut dealer = Dealer::new(pool, &mut rng);
            for _ in 0..tier.per_party {
                let mut members = Vec::new();
                let mut loads = vec![0.0; n];
                for sign in [1.0, -1.0] {
                    let side = dealer.deal(tier.side, &mut rng);
                    for &m in &side {
                        loads[m] = sign * rng.gen_range(tier.loading.0..=tier.loading.1);
                    }
                    members.extend(side);
                }
                blocks.push(Block { loads, members });
                shares.push(per_block_share);
            }
        }
    }
    // party axis as one more "block" spanning everyone
    {
        let mut loads = vec![0.0; n];
        for i in 0..n {
            let sign = if party[i] { 1.0 } else { -1.0 };
            loads[i] = sign * rng.gen_range(cfg.party_loading.0..=cfg.party_loading.1);
        }
        blocks.push(Block { loads, members: (0..n).collect() });
        shares.push(cfg.party_bill_share);
    }

    let total_share: f64 = shares.iter().sum();
    assert!(total_share <= 1.0 + 1e-9, "topic bill shares exceed the budget");
    let activity: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            cfg.activity_spread * z
        })
        .collect();

    // bills: pick a topic block by share (or generic), seed from its
    // members, then Bernoulli joins by loading
    let mut pairs: Vec<(String, String)> = Vec::new();
    for b in 0..cfg.n_items {
        let item = format!("bill{:04}", b + 1);
        let mut roll: f64 = rng.gen();
        let mut topic: Option<usize> = None;
        for (idx, share) in shares.iter().enumerate() {
            if roll < *share {
                topic = Some(idx);
                break;
            }
            roll -= share;
        }
        let seed = match topic {
            Some(idx) => blocks[idx].members[rng.gen_range(0..blocks[idx].members.len())],
            None => rng.gen_range(0..n),
        };
        pairs.push((labels[seed].clone(), item.clone()));
        for j in 0..n {
            if j == seed {
                continue;
            }
            let response = match topic {
                Some(idx) => {
                    let block = &blocks[idx];
                    let polarity = if block.loads[seed] < 0.0 { -1.0 } else { 1.0 };
                    polarity * block.loads[j]
                }
                None => 0.0,
            };
            let p = (cfg.bill_base_rate + activity[j] + cfg.response_scale * response).clamp(0.0, 0.97);
            if rng.gen::<f64>() < p {
                pairs.push((labels[j].clone(), item.clone()));
            }
        }
    }

    Ok(SyntheticData { attrs, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> SyntheticConfig {
        SyntheticConfig {
            n_actors: 24,
            n_items: 300,
            n_first_party: 12,
            faction_tiers: vec![FactionTier { per_party: 2, size: 4, bill_share: 0.4, loading: (0.9, 1.1) }],
            clash_tiers: vec![ClashTier { blocks: 4, side: 2, bill_share: 0.35, loading: (0.9, 1.1) }],
            party_bill_share: 0.05,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let cfg = small_cfg();
        let a = synthetic_sponsorship(&cfg).unwrap();
        let b = synthetic_sponsorship(&cfg).unwrap();
        assert_eq!(a.pairs, b.pairs);
    }

    #[test]
    fn generated_csvs_ingest_cleanly() {
        let data = synthetic_sponsorship(&small_cfg()).unwrap();
        let out = crate::ingest::ingest(
            data.sponsorship_csv().as_bytes(),
            data.actors_csv().as_bytes(),
            &[0.3, 0.15],
        )
        .unwrap();
        assert!(crate::network::validate(&out.stack).is_empty());
        assert!(out.summary.achieved_densities[0] <= 0.3);
    }

    #[test]
    fn share_budget_enforced() {
        let mut cfg = small_cfg();
        cfg.faction_tiers[0].bill_share = 0.9;
        cfg.clash_tiers[0].bill_share = 0.3;
        let result = std::panic::catch_unwind(|| synthetic_sponsorship(&cfg));
        assert!(result.is_err());
    }
}
