use crowdfuse::metrics::score;
use crowdfuse::model::GroundTruth;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn worked_example() {
    let truth = GroundTruth::complete(vec![0, 0, 1, 1], 2).unwrap();
    let s = score::<f64>(&[0, 1, 1, 1], &truth, 2).unwrap();
    assert!((s.macro_f1 - 0.7333).abs() < 1e-4);
    assert!((s.micro_f1 - 0.75).abs() < 1e-15);
}

#[test]
fn micro_f1_equals_accuracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100 {
        let k = rng.gen_range(2..6);
        let n = rng.gen_range(1..60);
        let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let s = score::<f64>(&pred, &GroundTruth::complete(truth, k).unwrap(), k).unwrap();
        assert!((s.micro_f1 - s.accuracy).abs() < 1e-12);
    }
}
