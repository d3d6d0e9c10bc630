#![allow(dead_code)]

use std::path::Path;

use targetscope::affinity::SyntheticProvider;
use targetscope::datastore::{build, ingest, train_ranker, BuildConfig, IngestConfig};
use targetscope::ranking::ForestParams;
use targetscope::synth::{diversity_set, interactions_tsv, planted, PlantedConfig, PlantedSet};

/// Drug-like and edge-case SMILES; every entry parses.
pub const ROUND_TRIP: [&str; 100] = [
    "C",
    "CC",
    "CCO",
    "CC(C)C",
    "CC(C)(C)C",
    "C=C",
    "C#N",
    "C=CC=C",
    "CC(=O)O",
    "CC(=O)OC",
    "OC(=O)C(N)C",
    "NCC(=O)O",
    "C1CC1",
    "C1CCC1",
    "C1CCCC1",
    "C1CCCCC1",
    "C1CCCCCC1",
    "c1ccccc1",
    "Cc1ccccc1",
    "CCc1ccccc1",
    "Oc1ccccc1",
    "Nc1ccccc1",
    "Clc1ccccc1",
    "Brc1ccccc1",
    "Fc1ccc(F)cc1",
    "Ic1ccccc1",
    "c1ccncc1",
    "c1cnccn1",
    "c1ncncn1",
    "c1ccoc1",
    "c1ccsc1",
    "c1cc[nH]c1",
    "c1cn[nH]c1",
    "c1c[nH]cn1",
    "c1cocn1",
    "c1cscn1",
    "c1ccc2ccccc2c1",
    "c1ccc2c(c1)ccc1ccccc12",
    "c1ccc2[nH]ccc2c1",
    "c1ccc2ncccc2c1",
    "c1ccc2occc2c1",
    "c1ccc2sccc2c1",
    "c1nc2ccccc2[nH]1",
    "c1ccc2c(c1)[nH]c1ccccc12",
    "O=C1CCCCC1",
    "O=C1CCCN1",
    "C1CCNCC1",
    "C1COCCN1",
    "C1CNCCN1",
    "C1CCOC1",
    "C1CC2CCC1C2",
    "C1CC2CCCC2C1",
    "C12C3C4C1C5C2C3C45",
    "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
    "CC(=O)Oc1ccccc1C(=O)O",
    "CC(=O)Nc1ccc(O)cc1",
    "CN1C=NC2=C1C(=O)N(C(=O)N2C)C",
    "Cn1cnc2c1c(=O)n(C)c(=O)n2C",
    "CN1CCC[C@H]1c1cccnc1",
    "COc1ccc2[nH]cc(CCN)c2c1",
    "NCCc1ccc(O)c(O)c1",
    "CNC[C@H](O)c1ccc(O)c(O)c1",
    "OC[C@H]1OC(O)[C@H](O)[C@@H](O)[C@@H]1O",
    "CC(C)NCC(O)COc1cccc2ccccc12",
    "Clc1ccc(cc1)C(c1ccccc1)N1CCN(CC1)CCOCC(=O)O",
    "CN(C)CCCN1c2ccccc2CCc2ccccc21",
    "CCN(CC)CC(=O)Nc1c(C)cccc1C",
    "O=C(O)c1ccccc1O",
    "NS(=O)(=O)c1ccc(N)cc1",
    "CS(=O)(=O)Nc1ccccc1",
    "O=[N+]([O-])c1ccccc1",
    "C[N+](C)(C)C",
    "[NH4+]",
    "[O-]C(=O)C",
    "OP(=O)(O)O",
    "COP(=O)(OC)OC",
    "FC(F)(F)c1ccccc1",
    "N#Cc1ccccc1",
    "C=CC(=O)OC",
    "CC/C=C/C",
    "CC/C=C\\C",
    "C(=O)Cl",
    "ClC(Cl)(Cl)Cl",
    "OCCO",
    "OCC(O)CO",
    "CCCCCCCCCCCCCCCC(=O)O",
    "CC1=CC(=O)C=CC1=O",
    "O=C1NC(=O)C(=O)N1",
    "Cc1ccc(cc1)S(=O)(=O)N",
    "CC(C)(C)OC(=O)N1CCCC1",
    "c1ccc(cc1)-c1ccccc1",
    "c1ccc(cc1)Cc1ccccc1",
    "c1ccc(cc1)C(=O)c1ccccc1",
    "c1ccc(cc1)Oc1ccccc1",
    "c1ccc(cc1)N=Nc1ccccc1",
    "O=C(Nc1ccccc1)c1ccccn1",
    "CC12CCC3C(CCC4=CC(=O)CCC34C)C1CCC2O",
    "CC(C)C1CCC(C)CC1O",
    "[2H]C([2H])([2H])O",
    "[Na+].[Cl-]",
];

/// Molecules with at least one ring, for scaffold checks.
pub const MURCKO: [&str; 50] = [
    "c1ccccc1",
    "Cc1ccccc1",
    "CCc1ccccc1",
    "CCCc1ccccc1O",
    "OC(=O)c1ccccc1",
    "c1ccc(cc1)Cc1ccccc1",
    "c1ccc(cc1)CCc1ccccc1",
    "c1ccc(cc1)-c1ccccc1",
    "c1ccc(cc1)C(=O)c1ccccc1",
    "c1ccc(cc1)Oc1ccccc1",
    "c1ccc2ccccc2c1",
    "Cc1ccc2ccccc2c1",
    "c1ccc2[nH]ccc2c1",
    "COc1ccc2[nH]cc(CCN)c2c1",
    "CN1CCC[C@H]1c1cccnc1",
    "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
    "CC(=O)Oc1ccccc1C(=O)O",
    "CC(=O)Nc1ccc(O)cc1",
    "Cn1cnc2c1c(=O)n(C)c(=O)n2C",
    "NCCc1ccc(O)c(O)c1",
    "CC(C)NCC(O)COc1cccc2ccccc12",
    "Clc1ccc(cc1)C(c1ccccc1)N1CCN(CC1)CCOCC(=O)O",
    "CN(C)CCCN1c2ccccc2CCc2ccccc21",
    "CCN(CC)CC(=O)Nc1c(C)cccc1C",
    "NS(=O)(=O)c1ccc(N)cc1",
    "O=C(Nc1ccccc1)c1ccccn1",
    "CC12CCC3C(CCC4=CC(=O)CCC34C)C1CCC2O",
    "CC(C)C1CCC(C)CC1O",
    "C1CCCCC1",
    "CC1CCCCC1",
    "C1CC1CC1CC1",
    "C1CC2CCC1C2",
    "CCC1CC2CCC1C2",
    "OC1CCNCC1",
    "CC(=O)N1CCOCC1",
    "O=C1CCCN1C",
    "CC(C)(C)OC(=O)N1CCCC1",
    "c1ccc(cc1)N1CCN(CC1)c1ccccn1",
    "Fc1ccc(cc1)C(=O)CCCN1CCC(O)(CC1)c1ccc(Cl)cc1",
    "COc1ccc(cc1)CCN(C)C",
    "c1csc(c1)C(=O)NCc1ccco1",
    "Cc1nc2ccccc2[nH]1",
    "CC(=O)c1ccc(cc1)S(=O)(=O)N",
    "c1ccc(cc1)C1=NCCN1",
    "CC1=C(C(=O)OC)C(c2ccccc2)C(C(=O)OC)=C(C)N1",
    "OC(c1ccccc1)(c1ccccc1)C1CCNCC1",
    "CCOC(=O)C1=CC=CC=C1",
    "c1cc2ccc3cccc4ccc(c1)c2c34",
    "C1CCC2(CC1)CCCC2",
    "CCN1C(=O)C(c2ccccc2)(CC)C(=O)NC1=O",
];

pub const SCALE: f64 = 0.05;
pub const BUILD_SEED: u64 = 11;
pub const AFFINITY_SEED: u64 = 3;
pub const RANKER_SEED: u64 = 5;

/// Ingests and builds the default planted database in `dir`, then trains a
/// ranker on the planted training cases.
pub fn planted_database(dir: &Path) -> PlantedSet {
    let set = planted(&PlantedConfig::default());
    let tsv = interactions_tsv(&set, 7);
    ingest(tsv.as_bytes(), dir, &IngestConfig::default()).expect("ingest");
    let provider = SyntheticProvider { seed: AFFINITY_SEED };
    let cfg = BuildConfig::new(BUILD_SEED, SCALE, diversity_set(100, 1), "synthetic:3");
    build(dir, &cfg, &provider).expect("build");
    train_ranker(dir, &set.training, &provider, &ForestParams::default(), RANKER_SEED, 0.2).expect("train");
    set
}
