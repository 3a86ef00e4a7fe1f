//! Deterministic synthetic corpora shaped like the PDTB relation taxonomy.
//!
//! Every third-level sense owns a pool of connectives (some multi-word) and a
//! small set of marker tokens. Multi-word connectives share a word with every
//! connective of the same top-level relation and, when longer, one with the
//! same second-level sense, the way "as a result" and "as a consequence" do; its top-level relation owns a further shared
//! marker set. Arguments are random content words interleaved with noisy
//! markers, so the relation is learnable from the arguments alone and more
//! reliably once the connective is visible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedIndex, Distribution};
use serde::{Deserialize, Serialize};

use super::{Corpus, Instance, SenseHierarchy, Split};

/// Connective words shared by each top-level relation, in `TopLevel` order.
const TOP_WORDS: [&str; 4] = ["yet", "thus", "also", "then"];

/// Relative third-level frequencies of the PDTB-3.0 implicit training set.
const PDTB_WEIGHTS: [(&str, f64); 31] = [
    ("Comparison.Similarity", 24.0),
    ("Comparison.Contrast", 742.0),
    (
        "Comparison.Concession+SpeechAct.Arg2-as-denier+SpeechAct",
        6.0,
    ),
    ("Comparison.Concession.Arg2-as-denier", 1125.0),
    ("Comparison.Concession.Arg1-as-denier", 40.0),
    ("Contingency.Purpose.Arg2-as-goal", 1102.0),
    ("Contingency.Purpose.Arg1-as-goal", 3.0),
    ("Contingency.Condition+SpeechAct", 2.0),
    ("Contingency.Condition.Arg2-as-cond", 149.0),
    ("Contingency.Condition.Arg1-as-cond", 3.0),
    ("Contingency.Cause+SpeechAct.Result+SpeechAct", 5.0),
    ("Contingency.Cause+Belief.Result+Belief", 48.0),
    ("Contingency.Cause.Result", 2176.0),
    ("Contingency.Cause+SpeechAct.Reason+SpeechAct", 9.0),
    ("Contingency.Cause+Belief.Reason+Belief", 111.0),
    ("Contingency.Cause.Reason", 2308.0),
    ("Expansion.Substitution.Arg2-as-subst", 342.0),
    ("Expansion.Manner.Arg2-as-manner", 138.0),
    ("Expansion.Manner.Arg1-as-manner", 535.0),
    ("Expansion.Level-of-detail.Arg2-as-detail", 2396.0),
    ("Expansion.Level-of-detail.Arg1-as-detail", 205.0),
    ("Expansion.Instantiation.Arg2-as-instance", 1162.0),
    ("Expansion.Instantiation.Arg1-as-instance", 1.0),
    ("Expansion.Exception.Arg2-as-excpt", 2.0),
    ("Expansion.Exception.Arg1-as-excpt", 2.0),
    ("Expansion.Equivalence", 254.0),
    ("Expansion.Disjunction", 22.0),
    ("Expansion.Conjunction", 3586.0),
    ("Temporal.Synchronous", 436.0),
    ("Temporal.Asynchronous.Succession", 164.0),
    ("Temporal.Asynchronous.Precedence", 847.0),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensePrior {
    /// Every third-level sense equally likely.
    Uniform,
    /// Third-level senses drawn with PDTB-3.0 training frequencies.
    Pdtb,
    /// Top-level relations equally likely, thirds uniform within their top.
    BalancedTop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub content_vocab_size: usize,
    pub connectives_per_third_sense: usize,
    /// Probability that an instance's connective comes from a different sense.
    pub noise_rate: f64,
    pub arg_len_range: (usize, usize),
    pub markers_per_sense: usize,
    /// Probability that a given argument token is a marker.
    pub marker_rate: f64,
    /// Probability that a marker belongs to the instance's own sense.
    pub marker_fidelity: f64,
    /// Share of faithful markers drawn from the top-level pool rather than the
    /// third-level pool.
    pub top_marker_share: f64,
    pub sense_prior: SensePrior,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 7,
            n_train: 2000,
            n_dev: 500,
            n_test: 1000,
            content_vocab_size: 300,
            connectives_per_third_sense: 2,
            noise_rate: 0.0,
            arg_len_range: (6, 12),
            markers_per_sense: 3,
            marker_rate: 0.2,
            marker_fidelity: 0.5,
            top_marker_share: 0.5,
            sense_prior: SensePrior::BalancedTop,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> crate::Result<()> {
        let bad = |m: &str| {
            Err(crate::Error::InvalidArgument(format!(
                "synthetic spec: {m}"
            )))
        };
        if self.connectives_per_third_sense == 0 {
            return bad("connectives_per_third_sense must be >= 1");
        }
        for (name, p) in [
            ("noise_rate", self.noise_rate),
            ("marker_rate", self.marker_rate),
            ("marker_fidelity", self.marker_fidelity),
            ("top_marker_share", self.top_marker_share),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(&format!("{name} must be in [0,1]"));
            }
        }
        let (lo, hi) = self.arg_len_range;
        if lo == 0 || lo > hi {
            return bad("arg_len_range must satisfy 1 <= min <= max");
        }
        if self.content_vocab_size == 0 || self.markers_per_sense == 0 {
            return bad("content_vocab_size and markers_per_sense must be positive");
        }
        Ok(())
    }
}

/// The connective pool of the third-level sense at table position `sense`.
pub fn connective_pool(hierarchy: &SenseHierarchy, sense: usize, per_sense: usize) -> Vec<String> {
    let row = &hierarchy.rows()[sense];
    let second = hierarchy
        .seconds()
        .iter()
        .position(|s| *s == row.second)
        .expect("row second-level is listed");
    (0..per_sense)
        .map(|k| {
            let head = format!("k{sense:02}{}", letter(k));
            let top = TOP_WORDS[row.top.index()];
            match (sense + k) % 3 {
                0 => head,
                1 => format!("{top} {head}"),
                _ => format!("{top} r{second:02} {head}"),
            }
        })
        .collect()
}

fn letter(k: usize) -> String {
    let mut s = String::new();
    let mut k = k;
    loop {
        s.insert(0, (b'a' + (k % 26) as u8) as char);
        if k < 26 {
            return s;
        }
        k = k / 26 - 1;
    }
}

struct Generator<'a> {
    spec: &'a SyntheticSpec,
    hierarchy: &'a SenseHierarchy,
    pools: Vec<Vec<String>>,
    sense_dist: WeightedIndex<f64>,
    rng: ChaCha8Rng,
}

impl Generator<'_> {
    fn marker_of(&mut self, sense: usize) -> String {
        let j = self.rng.random_range(0..self.spec.markers_per_sense);
        if self.rng.random_bool(self.spec.top_marker_share) {
            let top = self.hierarchy.rows()[sense].top.index();
            format!("t{top}{}", letter(j))
        } else {
            format!("m{sense:02}{}", letter(j))
        }
    }

    fn argument(&mut self, sense: usize) -> String {
        let (lo, hi) = self.spec.arg_len_range;
        let len = self.rng.random_range(lo..=hi);
        let n_senses = self.hierarchy.len();
        (0..len)
            .map(|_| {
                if self.rng.random_bool(self.spec.marker_rate) {
                    let src = if self.rng.random_bool(self.spec.marker_fidelity) {
                        sense
                    } else {
                        self.rng.random_range(0..n_senses)
                    };
                    self.marker_of(src)
                } else {
                    format!(
                        "w{}",
                        self.rng.random_range(0..self.spec.content_vocab_size)
                    )
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn instance(&mut self, id: String, split: Split) -> Instance {
        let n_senses = self.hierarchy.len();
        let sense = self.sense_dist.sample(&mut self.rng);
        let conn_sense = if n_senses > 1 && self.rng.random_bool(self.spec.noise_rate) {
            let other = self.rng.random_range(0..n_senses - 1);
            if other >= sense {
                other + 1
            } else {
                other
            }
        } else {
            sense
        };
        let pool = &self.pools[conn_sense];
        let connective = pool[self.rng.random_range(0..pool.len())].clone();
        let arg1 = self.argument(sense);
        let arg2 = self.argument(sense);
        Instance {
            id,
            arg1,
            arg2,
            connective,
            senses: vec![self.hierarchy.rows()[sense].clone()],
            split,
        }
    }
}

fn sense_weights(prior: SensePrior, hierarchy: &SenseHierarchy) -> Vec<f64> {
    match prior {
        SensePrior::Uniform => vec![1.0; hierarchy.len()],
        SensePrior::Pdtb => hierarchy
            .thirds()
            .map(|t| {
                PDTB_WEIGHTS
                    .iter()
                    .find(|(name, _)| *name == t)
                    .map_or(1.0, |(_, w)| *w)
            })
            .collect(),
        SensePrior::BalancedTop => {
            let rows = hierarchy.rows();
            rows.iter()
                .map(|r| 1.0 / rows.iter().filter(|o| o.top == r.top).count() as f64)
                .collect()
        }
    }
}

/// Generates a corpus as a pure function of `spec` and `hierarchy`.
pub fn generate_synthetic(spec: &SyntheticSpec, hierarchy: &SenseHierarchy) -> Corpus {
    let pools = (0..hierarchy.len())
        .map(|s| connective_pool(hierarchy, s, spec.connectives_per_third_sense))
        .collect();
    let sense_dist = WeightedIndex::new(sense_weights(spec.sense_prior, hierarchy))
        .expect("sense weights are positive");
    let mut g = Generator {
        spec,
        hierarchy,
        pools,
        sense_dist,
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
    };
    let mut instances = Vec::with_capacity(spec.n_train + spec.n_dev + spec.n_test);
    for (split, n) in [
        (Split::Train, spec.n_train),
        (Split::Dev, spec.n_dev),
        (Split::Test, spec.n_test),
    ] {
        for i in 0..n {
            let id = format!("{}-{i:05}", split.name());
            instances.push(g.instance(id, split));
        }
    }
    Corpus::new(instances).expect("generated instances are valid")
}
