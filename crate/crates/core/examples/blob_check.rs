// scratch: desk-scale training sanity check (removed before ship)
use hchc_core::gldc::{train, Dataset, TrainingConfig};
use hchc_core::metrics::{acc, nmi};
use hchc_core::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::time::Instant;

// c spherical blobs with per-dim std `sigma`, centers at dist*e_k:
// pairwise center distance dist*sqrt(2)
fn blobs(n: usize, d: usize, c: usize, sigma: f64, dist: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).unwrap();
    let mut features = DenseMatrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let k = rng.random_range(0..c);
        labels.push(k);
        for j in 0..d {
            let center = if j == k { dist } else { 0.0 };
            features.set(i, j, center + normal.sample(&mut rng));
        }
    }
    Dataset::new(features, Some(labels)).unwrap()
}

fn main() {
    env_logger::init();
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args[1].parse().unwrap();
    let d: usize = args[2].parse().unwrap();
    let c: usize = args[3].parse().unwrap();
    let sigma: f64 = args[4].parse().unwrap();
    let dist: f64 = args[5].parse().unwrap();
    let pre: usize = args[6].parse().unwrap();
    let ep: usize = args[7].parse().unwrap();
    let small: bool = args.get(8).map(|s| s == "small").unwrap_or(false);
    let k: usize = args.get(9).map(|s| s.parse().unwrap()).unwrap_or(5);
    let beta2: f64 = args.get(10).map(|s| s.parse().unwrap()).unwrap_or(10.0);
    let beta1: f64 = args.get(11).map(|s| s.parse().unwrap()).unwrap_or(5.0);

    let data = blobs(n, d, c, sigma, dist, 42);
    let config = TrainingConfig {
        clusters: Some(c),
        pretrain_epochs: pre,
        train_epochs: ep,
        seed: 7,
        k_neighbors: k,
        beta1,
        beta2,
        encoder_dims: if small { Some(vec![d, 64, 5]) } else { None },
        ..TrainingConfig::default()
    };
    let t = Instant::now();
    let (_, p) = train(&data, &config).unwrap();
    let labels = hchc_core::gldc::assign_labels(&p);
    let truth = data.true_labels.as_ref().unwrap();
    let a = acc(&labels, truth).unwrap();
    let m = nmi(&labels, truth).unwrap();
    let conf = (0..p.n())
        .filter(|&i| p.values().row(i).iter().cloned().fold(0.0, f64::max) > 0.5)
        .count() as f64
        / p.n() as f64;
    let mut hist = vec![0usize; c];
    for &l in &labels {
        hist[l] += 1;
    }
    println!(
        "n={n} d={d} c={c} sigma={sigma} dist={dist} pre={pre} ep={ep} small={small} k={k} b2={beta2} b1={beta1}: ACC={a:.4} NMI={m:.4} conf={conf:.3} hist={hist:?} time={:.0}s",
        t.elapsed().as_secs_f64()
    );
}
