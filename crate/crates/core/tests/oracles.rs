//! Analytic results checked against the Monte-Carlo burst simulator, plus a
//! few end-to-end claims on the figure grids.

use repeaterscope::cascade::{run_cascade, CascadeConfig};
use repeaterscope::channel::{LinkBudget, MediumProfile};
use repeaterscope::metrics::{ops_per_burst, CostModel};
use repeaterscope::oracle::{mc_cascade, mc_skr, MonteCarloConfig};
use repeaterscope::protocol::{evaluate_chain, evaluate_chain_detailed, LevelStep, LevelTrace, ProtocolConfig};
use repeaterscope::states::{BellDiagonal, NoiseParams};
use repeaterscope::sweep::{optimize_depth, DEFAULT_MAX_DEPTH};

fn flags_trace(flags: &[bool]) -> LevelTrace {
    LevelTrace {
        levels: flags
            .iter()
            .enumerate()
            .map(|(level, &distill)| LevelStep {
                level,
                wait_time: 0.0,
                pre_state: BellDiagonal::PERFECT,
                distill,
                d: 1.0,
                post_state: BellDiagonal::PERFECT,
                fidelity: 1.0,
                capacity: 0,
            })
            .collect(),
    }
}

#[test]
fn operation_counts_match_simulation() {
    let cfg = CascadeConfig::with_distillation(2, 8, 0.4, vec![true, false, false], vec![0.8, 1.0, 1.0]);
    let rep = run_cascade(&cfg).unwrap();
    let ops = ops_per_burst(&rep, &flags_trace(&cfg.distill), cfg.n_links(), &CostModel::default());
    let mc = mc_cascade(&cfg, &MonteCarloConfig::new(400_000, 11)).unwrap();
    assert!(mc.swaps.z_score(ops.swaps) < 4.0, "swaps {} vs {:?}", ops.swaps, mc.swaps);
    assert!(mc.distillations.z_score(ops.distillations) < 4.0, "{} vs {:?}", ops.distillations, mc.distillations);
    assert!(mc.end_pairs.z_score(rep.expected_end_pairs) < 4.0);
}

#[test]
fn plain_chain_matches_simulation() {
    for pi0 in [0.05, 0.25] {
        let cfg = CascadeConfig::plain(3, 12, pi0);
        let rep = run_cascade(&cfg).unwrap();
        let mc = mc_cascade(&cfg, &MonteCarloConfig::new(300_000, 5)).unwrap();
        assert!(mc.total_variation(rep.end_distribution().probs()) < 0.01);
        assert!(mc.completion_prob.z_score(rep.completion_prob) < 4.0);
        assert!(mc.end_pairs.z_score(rep.expected_end_pairs) < 4.0);
    }
}

fn hcf_chain(n: usize, m: usize, eps_g: f64, conv: f64, l0: f64) -> ProtocolConfig {
    ProtocolConfig::new(
        MediumProfile::hcf(),
        LinkBudget::new(1.0, conv, l0).unwrap(),
        NoiseParams::new(eps_g, 1.0).unwrap(),
        n,
        m,
    )
}

#[test]
fn key_rate_matches_simulation() {
    let cfg = hcf_chain(2, 16, 1e-3, 0.5, 20.0);
    let point = evaluate_chain(&cfg).unwrap();
    let (skr, _) = mc_skr(&cfg, &MonteCarloConfig::new(200_000, 3)).unwrap();
    assert!(skr.z_score(point.skr_pcu) < 4.0, "{} vs {skr:?}", point.skr_pcu);
}

#[test]
fn distilling_chain_matches_simulation() {
    let cfg = hcf_chain(3, 1024, 1e-2, 1.0, 5.0);
    let (point, trace, _) = evaluate_chain_detailed(&cfg).unwrap();
    assert!(trace.distill_flags().iter().any(|&d| d), "schedule should distill");
    let (skr, mc) = mc_skr(&cfg, &MonteCarloConfig::new(50_000, 9)).unwrap();
    assert!(skr.z_score(point.skr_pcu) < 4.0, "{} vs {skr:?}", point.skr_pcu);
    assert!(mc.distillations.z_score(point.ops.distillations) < 4.0);
    assert!(mc.swaps.z_score(point.ops.swaps) < 4.0);
}

#[test]
fn hcf_spacing_at_500_km() {
    let depths: Vec<usize> = (0..=DEFAULT_MAX_DEPTH).collect();
    for conv in [1.0, 0.5] {
        for eps_g in [1e-4, 1e-3] {
            let base = |medium: MediumProfile| {
                ProtocolConfig::new(
                    medium,
                    LinkBudget::new(1.0, conv, 1.0).unwrap(),
                    NoiseParams::new(eps_g, 1.0).unwrap(),
                    0,
                    1024,
                )
            };
            let hcf = optimize_depth(500.0, &base(MediumProfile::hcf()), &depths).unwrap();
            let smf = optimize_depth(500.0, &base(MediumProfile::smf()), &depths).unwrap();
            assert!(hcf.point.skr_pcu > smf.point.skr_pcu * 0.99);
            assert!(hcf.best_l0 >= smf.best_l0, "conv {conv}, eps {eps_g}: {} < {}", hcf.best_l0, smf.best_l0);
        }
    }
}
