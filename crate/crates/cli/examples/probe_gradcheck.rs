//! Inspect the failing grad-check element: kink crossing or real bug?
use ppgmorph_core::learn::{Labels, Mat, ModelConfig, ModelKind, Network, Task};
use rand_chacha::ChaCha12Rng;
use rand::SeedableRng;

fn main() {
    let x = Mat::from_rows(
        &(0..4)
            .map(|i| (0..8).map(|j| (1.1 * (i * 8 + j) as f64 + 0.41).sin() * 0.8).collect())
            .collect::<Vec<Vec<f64>>>(),
    );
    let labels = Labels::Classes(vec![0, 1, 1, 0]);
    let mut cfg = ModelConfig::new(ModelKind::Ffnn, Task::Binary);
    cfg.input_dim = 8;

    let mut net = Network::build(&cfg).unwrap();
    net.zero_grads();
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed ^ 0xabcd);
    let targets = match &labels { Labels::Classes(c) => ppgmorph_core::learn::Targets::Classes(c), _ => unreachable!() };
    net.loss_backward(&x, targets, &mut rng);

    // tensor 2 = dense1.w (dense0.w, dense0.b, bn0.gamma, bn0.beta, dense1.w ...)
    let params = net.params_mut();
    for (k, p) in params.iter().enumerate() {
        println!("tensor {k}: {} ({} values)", p.name, p.value.len());
    }
    let t_idx = 4; // dense1.w
    let e_idx = 344;
    let ga = {
        let mut net2 = net.clone();
        let params = net2.params_mut();
        params[t_idx].grad[e_idx]
    };
    let mut probe = |delta: f64| -> f64 {
        let mut clone = net.clone();
        {
            let mut params = clone.params_mut();
            params[t_idx].value[e_idx] += delta;
        }
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed ^ 0xabcd);
        clone.loss_only(&x, ppgmorph_core::learn::Targets::Classes(&[0, 1, 1, 0]), &mut rng)
    };
    for h in [1e-4, 1e-5, 1e-6, 1e-7] {
        let gn = (probe(h) - probe(-h)) / (2.0 * h);
        println!("h={h:.0e}: analytic {ga:.12e} numeric {gn:.12e} rel {:.3e}", (ga - gn).abs() / (ga.abs() + gn.abs()).max(1e-8));
    }
}
