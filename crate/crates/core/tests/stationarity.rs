use hadamard_langevin::diagnostics::{cdf, ks_statistic};
use hadamard_langevin::samplers::{run_chain, GroupHadamard, HadamardUla, Myula};
use hadamard_langevin::{DataTerm, GroupStructure, RngStream, SamplerState, StepConfig, TargetModel};

// With G = 0 the block norms of x follow Gamma(m, βλ): the density of
// r = ‖x_g‖ is proportional to r^{m−1} exp(−βλ r).
#[test]
fn group_norms_follow_gamma_at_zero_data_term() {
    let (lambda, beta) = (1.5, 2.0);
    let model = TargetModel::new(lambda, beta, DataTerm::zero(6)).unwrap();
    let groups = GroupStructure::new(vec![vec![0], vec![1, 2], vec![3, 4, 5]], 6).unwrap();
    let mut kernel = GroupHadamard::new(&model, &groups, StepConfig::new(1e-3)).unwrap();
    let mut rng = RngStream::new(21, 0);
    let init = SamplerState::default_init(3, 6);
    let (rec, _) = run_chain(&mut kernel, init, 10_000, 20_000, 200, &mut rng).unwrap();
    assert!(rec.min_u_seen.unwrap() > 0.0);
    for block in groups.blocks() {
        let norms: Vec<f64> = rec
            .samples
            .rows()
            .into_iter()
            .map(|row| block.iter().map(|&i| row[i] * row[i]).sum::<f64>().sqrt())
            .collect();
        let m = block.len() as f64;
        let ks = ks_statistic(&norms, |r| cdf::gamma(r, m, beta * lambda));
        assert!(ks < 0.03, "block of size {m}: KS {ks}");
    }
}

#[test]
fn myula_and_hadamard_agree_on_a_scalar_posterior_mean() {
    let op = hadamard_langevin::LinearOperator::dense(1, 1, vec![1.0]).unwrap();
    let model = TargetModel::new(2.7, 1.0, DataTerm::quadratic(op, vec![3.0]).unwrap()).unwrap();
    let mut rng = RngStream::new(22, 0);
    let mut ula = HadamardUla::new(&model, StepConfig::new(2e-3)).unwrap();
    let (a, _) = run_chain(&mut ula, SamplerState::default_init(1, 1), 5_000, 40_000, 50, &mut rng).unwrap();
    let mut myula = Myula::new(&model, StepConfig::with_gamma(2e-3, 2e-3)).unwrap();
    let (b, _) = run_chain(&mut myula, vec![0.0], 5_000, 40_000, 50, &mut rng).unwrap();
    let mean = |r: &hadamard_langevin::ChainRecord| r.samples.column(0).mean().unwrap();
    // both near E[x] ≈ 0.814 with O(Δt) bias; stderr ≈ 0.005 each
    assert!((mean(&a) - mean(&b)).abs() < 0.04, "{} vs {}", mean(&a), mean(&b));
}
