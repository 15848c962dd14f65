use umse_core::corpus::NUM_SPECIAL;
use umse_core::model::ModelConfig;
use umse_core::training::{grad_check, grad_check_linear_head};

fn tiny() -> ModelConfig {
    ModelConfig::tiny(NUM_SPECIAL as usize + 40)
}

#[test]
fn tiny_model_gradients_over_many_seeds() {
    let c = tiny();
    assert_eq!((c.hidden_dim, c.n_layers, c.prefix_len), (16, 1, 4));
    for seed in 0..6 {
        let err = grad_check(&c, 200, seed).unwrap();
        println!("seed {seed}: max relative error {err:.3e}");
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn linear_head_is_exact() {
    for seed in 0..4 {
        let err = grad_check_linear_head(&tiny(), seed).unwrap();
        assert!(err < 1e-9, "seed {seed}: {err}");
    }
}

#[test]
fn dropout_configuration_still_checks_in_inference_mode() {
    let mut c = tiny();
    c.dropout = 0.1;
    assert!(grad_check(&c, 50, 3).unwrap() < 1e-4);
}
