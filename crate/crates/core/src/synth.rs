//! Planted-truth fixtures. Targets come in sibling pairs that share a core
//! scaffold and differ in the substituents allowed at the first position, so
//! screening a held-out active surfaces both its own target and a plausible
//! decoy.

use std::collections::{BTreeSet, HashSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::EvalCase;
use crate::hash::stream_seed;

/// Core templates with three substitution sites `{a}`, `{b}`, `{c}`.
const CORES: [&str; 5] = [
    "c1cc({a})ccc1C(=O)N({b})C{c}",
    "C1CCN(CC1{a})c1ncc({b})c({c})n1",
    "O=C1c2cc({a})ccc2N({b})C(=O)C1{c}",
    "c1cc2c(cc1{a})[nH]c({b})c2CC{c}",
    "C(=O)(c1ccc({a})s1)N1CC({b})OC1C{c}",
];

const SUBSTITUENTS: [&str; 12] = ["C", "CC", "O", "OC", "N", "F", "Cl", "Br", "C#N", "C(F)(F)F", "CCO", "NC(C)=O"];

/// Substituents allowed at `{a}` for the first and second sibling.
const SIBLING_SPLIT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlantedConfig {
    /// Multiple of two; at most `2 × CORES.len()`.
    pub n_targets: usize,
    pub actives_per_target: usize,
    pub heldout_per_target: usize,
    pub training_per_target: usize,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> PlantedConfig {
        PlantedConfig { n_targets: 10, actives_per_target: 50, heldout_per_target: 2, training_per_target: 20, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedActive {
    pub compound_id: String,
    pub smiles: String,
    pub target_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSet {
    pub actives: Vec<PlantedActive>,
    pub heldout: Vec<EvalCase>,
    pub training: Vec<EvalCase>,
}

pub fn target_id(t: usize) -> String {
    format!("TGT{:02}", t + 1)
}

fn render(core: &str, a: &str, b: &str, c: &str) -> String {
    core.replace("{a}", a).replace("{b}", b).replace("{c}", c)
}

pub fn planted(config: &PlantedConfig) -> PlantedSet {
    assert!(config.n_targets % 2 == 0 && config.n_targets <= 2 * CORES.len(), "unsupported target count");
    let per_target = config.actives_per_target + config.heldout_per_target + config.training_per_target;
    let mut actives = Vec::new();
    let mut heldout = Vec::new();
    let mut training = Vec::new();
    for t in 0..config.n_targets {
        let core = CORES[t / 2];
        let a_choices = if t % 2 == 0 { &SUBSTITUENTS[..SIBLING_SPLIT] } else { &SUBSTITUENTS[SIBLING_SPLIT..] };
        let mut combos: Vec<(usize, usize, usize)> = (0..a_choices.len())
            .flat_map(|a| (0..SUBSTITUENTS.len()).flat_map(move |b| (0..SUBSTITUENTS.len()).map(move |c| (a, b, c))))
            .collect();
        assert!(combos.len() >= per_target, "not enough distinct compounds per target");
        combos.shuffle(&mut ChaCha8Rng::seed_from_u64(stream_seed(config.seed, &[t as u64])));
        let smiles: Vec<String> = combos[..per_target]
            .iter()
            .map(|&(a, b, c)| render(core, a_choices[a], SUBSTITUENTS[b], SUBSTITUENTS[c]))
            .collect();
        let tid = target_id(t);
        for (k, s) in smiles[..config.actives_per_target].iter().enumerate() {
            actives.push(PlantedActive { compound_id: format!("{tid}-C{:03}", k + 1), smiles: s.clone(), target_id: tid.clone() });
        }
        let truth: BTreeSet<String> = [tid.clone()].into();
        let (held, train) = smiles[config.actives_per_target..].split_at(config.heldout_per_target);
        heldout.extend(held.iter().map(|s| EvalCase { compound: s.clone(), true_targets: truth.clone() }));
        training.extend(train.iter().map(|s| EvalCase { compound: s.clone(), true_targets: truth.clone() }));
    }
    PlantedSet { actives, heldout, training }
}

/// Interactions TSV for `set`: every active as an accepted measurement plus
/// a few rows each ingest rule rejects.
pub fn interactions_tsv(set: &PlantedSet, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, &[0x746576]));
    let types = ["Kd", "Ki", "IC50", "EC50"];
    let mut out = String::from("compound_id\tsmiles\ttarget_id\tactivity_type\trelation\tvalue_nM\torganism\n");
    for a in &set.actives {
        let kind = types.choose(&mut rng).expect("nonempty");
        let relation = if rng.random_bool(0.8) { "=" } else { "<" };
        let value = (rng.random_range(1.0f64..19_000.0) * 10.0).round() / 10.0;
        out.push_str(&format!("{}\t{}\t{}\t{kind}\t{relation}\t{value}\tHomo sapiens\n", a.compound_id, a.smiles, a.target_id));
    }
    if let Some(a) = set.actives.first() {
        let t = &a.target_id;
        let rows = [
            format!("X1\t{}\t{t}\tKd\t>\t50\tHomo sapiens", a.smiles),
            format!("X2\t{}\t{t}\tKi\t=\t20000\tHomo sapiens", a.smiles),
            format!("X3\t{}\t{t}\tpotency\t=\t10\tHomo sapiens", a.smiles),
            format!("X4\tC1CC(\t{t}\tKd\t=\t10\tHomo sapiens"),
            format!("X5\t[Pt](Cl)(Cl)(N)N\t{t}\tKd\t=\t10\tHomo sapiens"),
            format!("X6\t{}\t{t}\tIC50\t<\t5\tHomo sapiens", a.smiles),
        ];
        for r in rows {
            out.push_str(&r);
            out.push('\n');
        }
    }
    out
}

const DIVERSITY_RINGS: [&str; 10] = [
    "c1ccccc1",
    "c1ccncc1",
    "C1CCCCC1",
    "c1ccoc1",
    "c1ccsc1",
    "C1CCNCC1",
    "C1COCCN1",
    "c1cn[nH]c1",
    "c1ccc2ccccc2c1",
    "C1CC1",
];

const DIVERSITY_LINKERS: [&str; 6] = ["", "C", "CC", "C(=O)N", "O", "S(=O)(=O)"];

/// `n` distinct ring-linker-ring compounds with a side chain; stands in for
/// a structurally diverse background set.
pub fn diversity_set(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, &[0x646976]));
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    let side = ["", "C", "O", "N", "F", "Cl", "CCC", "C(=O)O"];
    assert!(n <= DIVERSITY_RINGS.len() * DIVERSITY_RINGS.len() * DIVERSITY_LINKERS.len() * side.len() / 4);
    while out.len() < n {
        let r1 = *DIVERSITY_RINGS.choose(&mut rng).expect("nonempty");
        let r2 = *DIVERSITY_RINGS.choose(&mut rng).expect("nonempty");
        let linker = *DIVERSITY_LINKERS.choose(&mut rng).expect("nonempty");
        let tail = *side.choose(&mut rng).expect("nonempty");
        // Ring-closure digits may be reused once the first ring has closed.
        let smiles = format!("{tail}{r1}{linker}{r2}");
        if seen.insert(smiles.clone()) {
            out.push(smiles);
        }
    }
    out
}
