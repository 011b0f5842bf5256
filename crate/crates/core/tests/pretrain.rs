use inrlab::net::{build_network, ActivationKind, ArchSpec};
use inrlab::optim::{rank_pretrain, UniformSampler};

#[test]
fn pretraining_raises_last_hidden_stable_rank() {
    let net = build_network(&ArchSpec::uniform(2, 3, 3, 64, ActivationKind::Relu), 17).unwrap();
    let mut sampler = UniformSampler::new(2, -1.0, 1.0, 18);
    let r = rank_pretrain(&net, &mut sampler, 500, 0.05).unwrap();
    println!(
        "loss {:.4e} -> {:.4e}, stable rank {:.3} -> {:.3}",
        r.probe_loss_before, r.probe_loss_after, r.stable_rank_before, r.stable_rank_after
    );
    assert!(r.probe_loss_after < r.probe_loss_before);
    assert!(r.stable_rank_after >= r.stable_rank_before);
}
