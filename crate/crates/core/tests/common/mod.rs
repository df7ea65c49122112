#![allow(dead_code)]

pub mod oracle;
pub mod planted;

use lifecap::alignment::{AlignmentModel, OovPolicy, RegionSet};
use lifecap::joint::{energy, EnergyInstance};
use lifecap::retrieval::SensitivityLabel;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `k × c` instance with costs uniform in `[0, 1)`.
pub fn random_instance(rng: &mut impl Rng, k: usize, c: usize) -> EnergyInstance {
    let rows = (0..k).map(|_| (0..c).map(|_| rng.gen::<f64>()).collect()).collect();
    EnergyInstance::new(rows).unwrap()
}

/// Every labeling of `k` images with `n` labels, in lexicographic order.
pub fn all_labelings(k: usize, n: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = n.pow(k as u32);
    (0..total).map(move |mut code| {
        let mut labeling = vec![0; k];
        for slot in labeling.iter_mut().rev() {
            *slot = code % n;
            code /= n;
        }
        labeling
    })
}

/// Lexicographically first labeling of minimum energy, by enumeration.
pub fn brute_force(instance: &EnergyInstance, beta: f64) -> (Vec<usize>, f64) {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for labeling in all_labelings(instance.num_images(), instance.num_labels()) {
        let e = energy(instance, &labeling, beta).unwrap();
        if best.as_ref().is_none_or(|(_, b)| e < *b) {
            best = Some((labeling, e));
        }
    }
    best.unwrap()
}

/// Lowest-index minimum of each row.
pub fn per_image_argmin(instance: &EnergyInstance) -> Vec<usize> {
    (0..instance.num_images())
        .map(|i| {
            let row = instance.row(i);
            (0..row.len()).fold(0, |best, c| if row[c] < row[best] { c } else { best })
        })
        .collect()
}

/// Random word-vector table over `w0..w{n}` and a random region set, all
/// in dimension `dim` with entries in `[-1, 1]`.
pub fn random_alignment(rng: &mut impl Rng, dim: usize, words: usize, regions: usize) -> (AlignmentModel, RegionSet) {
    let mut model = AlignmentModel::new(dim, OovPolicy::Drop);
    for i in 0..words {
        model.insert(format!("w{i}"), random_vector(rng, dim)).unwrap();
    }
    let regions = (0..regions).map(|_| random_vector(rng, dim)).collect();
    (model, RegionSet::new("img", regions).unwrap())
}

pub fn random_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

/// Random sentence of `len` words drawn from `w0..w{words}`.
pub fn random_sentence(rng: &mut impl Rng, words: usize, len: usize) -> Vec<String> {
    (0..len).map(|_| format!("w{}", rng.gen_range(0..words))).collect()
}

/// Thirty images, ten per class, each with five captions. Place images
/// mention a place keyword in some captions, display images a display
/// keyword, and the rest mention neither.
pub fn keyword_corpus() -> Vec<(SensitivityLabel, Vec<String>)> {
    const PLACE: [&str; 5] = ["toilet", "bathroom", "locker", "lavatory", "washroom"];
    const DISPLAY: [&str; 5] = ["computer", "laptop", "iphone", "smartphone", "screen"];
    const PLAIN: [&str; 5] = [
        "a man walking down a street",
        "a plate of food on a table",
        "a group of people standing outside",
        "a car parked on the road",
        "a cup of coffee on a desk",
    ];
    let mut out = Vec::new();
    for i in 0..10 {
        let hits = 1 + i % 5;
        let with = |kw: &[&str; 5]| -> Vec<String> {
            (0..5)
                .map(|j| {
                    if j < hits {
                        format!("a view of the {} in a room", kw[(i + j) % 5])
                    } else {
                        PLAIN[(i + j) % 5].to_string()
                    }
                })
                .collect()
        };
        out.push((SensitivityLabel::Place, with(&PLACE)));
        out.push((SensitivityLabel::Display, with(&DISPLAY)));
        out.push((
            SensitivityLabel::NotSensitive,
            (0..5).map(|j| PLAIN[(i + j) % 5].to_string()).collect(),
        ));
    }
    out
}
