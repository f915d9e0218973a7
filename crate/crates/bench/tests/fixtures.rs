use tinynet::{InitScheme, RngState};
use tinynet_bench::{cyclic_targets, random_cols, random_rows, tiny_network, TINY_ARCH};

#[test]
fn fixtures_have_benchmark_shapes() {
    let mut rng = RngState::new(1, 1);
    let x = random_rows(&mut rng, 10, TINY_ARCH[0]);
    assert_eq!(random_cols(&mut rng, 5, 3).shape(), (5, 3));
    let net = tiny_network(&mut rng, InitScheme::sparse3());
    assert_eq!((net.n_inputs(), net.n_outputs()), (100, 10));
    assert_eq!(net.predict(&x).unwrap().shape(), (10, 10));
    let t = cyclic_targets(10, 10);
    assert!(t.vectors().all(|r| r.iter().sum::<f64>() == 1.0));
}
