//! Generator for a two-hop task: `country_of(person, X)` holds when the
//! person was born in a city located in `X`.
//!
//! Each relation comes in several textual paraphrases whose pretrained
//! vectors are noisy copies of one prototype per relation. A distractor
//! relation (where the person lives) leads to a different country, which
//! is always among the candidates. Held-out examples use people, cities
//! and countries that never occur in training examples, so they can only
//! be answered by chaining facts.

use std::io;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{write_dataset, ExampleRecord};
use crate::embed::{stream_rng, write_vectors, KeyedVectors};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub dim: usize,
    pub train_examples: usize,
    pub heldout_examples: usize,
    pub candidates: usize,
    pub train_countries: usize,
    pub heldout_countries: usize,
    pub cities_per_country: usize,
    /// Standard deviation of the per-paraphrase perturbation, relative to
    /// the unit-norm prototype.
    pub noise: f64,
    pub distractor: bool,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 0,
            dim: 32,
            train_examples: 200,
            heldout_examples: 50,
            candidates: 5,
            train_countries: 20,
            heldout_countries: 10,
            cities_per_country: 3,
            noise: 0.3,
            distractor: true,
        }
    }
}

pub const QUERY_PREDICATE: &str = "country_of";

pub const BORN: [&str; 3] = ["ENT1 was born in ENT2", "ENT1 , a native of ENT2 ,", "ENT1 grew up in ENT2"];
pub const LOCATED: [&str; 3] = ["ENT1 is a city in ENT2", "ENT1 , located in ENT2", "ENT1 lies in the north of ENT2"];
pub const LIVES: [&str; 3] = ["ENT1 lives in ENT2", "ENT1 moved to ENT2", "ENT1 resides in ENT2"];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub triples: Vec<[String; 3]>,
    pub vectors: KeyedVectors,
    pub train: Vec<ExampleRecord>,
    pub heldout: Vec<ExampleRecord>,
}

fn gaussian<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

struct World {
    countries: Vec<String>,
    /// City name and index of its country.
    cities: Vec<(String, usize)>,
}

impl World {
    fn new(prefix: &str, countries: usize, cities_per_country: usize) -> Self {
        let countries: Vec<String> = (0..countries).map(|i| format!("{prefix}country_{i}")).collect();
        let cities = (0..countries.len() * cities_per_country)
            .map(|i| (format!("{prefix}city_{i}"), i / cities_per_country))
            .collect();
        World { countries, cities }
    }
}

fn pick<'a, R: Rng>(patterns: &'a [&'a str], rng: &mut R) -> String {
    patterns.choose(rng).expect("patterns").to_string()
}

fn populate<R: Rng>(
    world: &World,
    prefix: &str,
    n: usize,
    cfg: &SyntheticConfig,
    triples: &mut Vec<[String; 3]>,
    rng: &mut R,
) -> Vec<ExampleRecord> {
    for (city, country) in &world.cities {
        triples.push([city.clone(), pick(&LOCATED, rng), world.countries[*country].clone()]);
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let person = format!("{prefix}person_{i}");
        let born = rng.random_range(0..world.cities.len());
        let home = world.cities[born].1;
        let lives = loop {
            let c = rng.random_range(0..world.cities.len());
            if world.cities[c].1 != home {
                break c;
            }
        };
        let away = world.cities[lives].1;
        triples.push([person.clone(), pick(&BORN, rng), world.cities[born].0.clone()]);
        triples.push([person.clone(), pick(&LIVES, rng), world.cities[lives].0.clone()]);

        let mut others: Vec<usize> = (0..world.countries.len()).filter(|&c| c != home && (c != away || !cfg.distractor)).collect();
        others.shuffle(rng);
        let mut cands = if cfg.distractor { vec![home, away] } else { vec![home] };
        cands.extend(others.into_iter().take(cfg.candidates.saturating_sub(cands.len())));
        cands.shuffle(rng);
        out.push(ExampleRecord {
            query_pred: QUERY_PREDICATE.into(),
            subject: person,
            candidates: cands.iter().map(|&c| world.countries[c].clone()).collect(),
            answer: world.countries[home].clone(),
        });
    }
    out
}

pub fn generate(cfg: &SyntheticConfig) -> SyntheticTask {
    let mut rng = stream_rng(cfg.seed, 0);
    let mut vectors = KeyedVectors::new(cfg.dim);
    for family in [&BORN, &LOCATED, &LIVES] {
        let proto = unit(gaussian(cfg.dim, &mut rng));
        for p in family.iter() {
            let noise = gaussian(cfg.dim, &mut rng);
            let scale = cfg.noise / (cfg.dim as f64).sqrt();
            let v: Vec<f64> = proto.iter().zip(&noise).map(|(a, b)| a + scale * b).collect();
            vectors.insert(p, &v);
        }
    }
    let mut triples = Vec::new();
    let train_world = World::new("", cfg.train_countries, cfg.cities_per_country);
    let train = populate(&train_world, "", cfg.train_examples, cfg, &mut triples, &mut rng);
    let heldout_world = World::new("new_", cfg.heldout_countries, cfg.cities_per_country);
    let heldout = populate(&heldout_world, "new_", cfg.heldout_examples, cfg, &mut triples, &mut rng);
    SyntheticTask { triples, vectors, train, heldout }
}

impl SyntheticTask {
    pub fn triples_tsv(&self) -> String {
        self.triples.iter().map(|t| format!("{}\t{}\t{}\n", t[0], t[1], t[2])).collect()
    }

    /// Writes `triples.tsv`, `vectors.vec`, `train.jsonl` and
    /// `heldout.jsonl` into `dir`.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("triples.tsv"), self.triples_tsv())?;
        let mut v = Vec::new();
        write_vectors(&mut v, self.vectors.dim(), self.vectors.iter())?;
        std::fs::write(dir.join("vectors.vec"), v)?;
        let mut t = Vec::new();
        write_dataset(&mut t, &self.train)?;
        std::fs::write(dir.join("train.jsonl"), t)?;
        let mut h = Vec::new();
        write_dataset(&mut h, &self.heldout)?;
        std::fs::write(dir.join("heldout.jsonl"), h)
    }
}
