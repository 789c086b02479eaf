//! Fault statistics against analytic expectations (3σ at 10^5 weavings).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qvl_core::circuit::{BlockTag, CircuitBuilder, CircuitProgram, Gate, Pauli};
use qvl_core::code422::LogicalLabel;
use qvl_core::noise::{
    sample_faults, sample_pauli, weave_environmental_noise, weave_gate_noise, NoiseConfig, NoiseModel,
};
use qvl_core::rng::stream;
use qvl_core::statevector::Register;
use qvl_core::vqc::{build_bare_vqc, build_logical_vqc, SyndromePlacement, MAX_ROUNDS};

const WEAVINGS: usize = 100_000;

/// Mean fault count over `WEAVINGS` draws, and its standard error.
fn fault_count_stats(program: &CircuitProgram, config: &NoiseConfig, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts: Vec<f64> =
        (0..WEAVINGS).map(|_| sample_faults(program, config, &mut rng).unwrap().len() as f64).collect();
    let mean = counts.iter().sum::<f64>() / WEAVINGS as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (WEAVINGS - 1) as f64;
    (mean, (var / WEAVINGS as f64).sqrt())
}

#[test]
fn pauli_frequencies() {
    let draws = 1_000_000;
    let rate = 0.3;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut counts = [0usize; 4];
    for _ in 0..draws {
        let k = match sample_pauli(rate, &mut rng).unwrap() {
            None => 0,
            Some(Pauli::X) => 1,
            Some(Pauli::Y) => 2,
            Some(Pauli::Z) => 3,
        };
        counts[k] += 1;
    }
    for (k, expect) in [0.7, 0.1, 0.1, 0.1].into_iter().enumerate() {
        let sigma = (expect * (1.0 - expect) / draws as f64).sqrt();
        let got = counts[k] as f64 / draws as f64;
        assert!((got - expect).abs() < 3.0 * sigma, "outcome {k}: {got} vs {expect}");
    }
}

#[test]
fn bare_gate_noise_mean() {
    // 6 single-qubit gates at p plus one CNOT with two operands at 2p.
    let program = build_bare_vqc((0, 0), 0.4);
    let config = NoiseConfig::gate(0.01, 1.0);
    let (mean, se) = fault_count_stats(&program, &config, 1);
    let expect = 6.0 * 0.01 + 2.0 * 0.02;
    let sigma = ((6.0 * 0.01 * 0.99 + 2.0 * 0.02 * 0.98) / WEAVINGS as f64).sqrt();
    assert!((mean - expect).abs() < 3.0 * sigma, "{mean} vs {expect} (se {se})");
}

#[test]
fn environmental_mean() {
    // 60 counted gates over 10 qubits, period 4: 15 sites × 10 qubits.
    let mut b = CircuitBuilder::new();
    b.set_block(BlockTag::Lrx);
    let q: Vec<_> = (0..10).map(|_| b.allocate(Register::Physical).unwrap()).collect();
    for i in 0..60 {
        b.push(Gate::Rx(q[i % 10], 0.1 * i as f64));
    }
    let program = b.finish().unwrap();
    let config = NoiseConfig::environmental(0.01, 1.0);
    let (mean, _) = fault_count_stats(&program, &config, 2);
    let sigma = (150.0 * 0.01 * 0.99 / WEAVINGS as f64).sqrt();
    assert!((mean - 1.5).abs() < 3.0 * sigma, "{mean}");
}

#[test]
fn ancilla_rate_scales_with_fraction() {
    let v = build_logical_vqc(LogicalLabel::new(3), 1.2, &SyndromePlacement::rounds(0)).unwrap();
    let config = NoiseConfig::gate(0.01, 0.5);
    let mut expect_phys = 0.0;
    let mut expect_anc = 0.0;
    for op in &v.program.ops {
        if !config.exposes(op) {
            continue;
        }
        let qs = op.gate.qubits();
        let scale = if qs.as_slice().len() == 2 { 2.0 } else { 1.0 };
        for q in qs.as_slice() {
            match q.register {
                Register::Physical => expect_phys += scale * 0.01,
                Register::RotationAncilla => expect_anc += scale * 0.005,
                Register::Syndrome => unreachable!(),
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut phys, mut anc) = (0usize, 0usize);
    for _ in 0..WEAVINGS {
        for f in sample_faults(&v.program, &config, &mut rng).unwrap() {
            match f.qubit.register {
                Register::Physical => phys += 1,
                _ => anc += 1,
            }
        }
    }
    for (got, expect) in [(phys, expect_phys), (anc, expect_anc)] {
        let got = got as f64 / WEAVINGS as f64;
        let sigma = (expect / WEAVINGS as f64).sqrt();
        assert!((got - expect).abs() < 3.0 * sigma, "{got} vs {expect}");
    }
}

#[test]
fn syndrome_qubits_stay_clean() {
    let v = build_logical_vqc(LogicalLabel::new(2), 0.9, &SyndromePlacement::rounds(MAX_ROUNDS)).unwrap();
    let configs = [
        NoiseConfig::gate(0.05, 1.0).with_noisy_extraction(true).with_noisy_preparation(true),
        NoiseConfig::environmental(0.05, 1.0).with_noisy_extraction(true).with_noisy_preparation(true),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for config in &configs {
        let mut seen_extraction_fault = false;
        for _ in 0..WEAVINGS {
            for f in sample_faults(&v.program, config, &mut rng).unwrap() {
                assert_ne!(f.qubit.register, Register::Syndrome);
                seen_extraction_fault |= v.program.ops[f.position].block == BlockTag::Syndrome;
            }
        }
        assert!(seen_extraction_fault);
    }
}

#[test]
fn exempt_blocks_draw_no_faults_by_default() {
    let v = build_logical_vqc(LogicalLabel::new(1), 0.9, &SyndromePlacement::rounds(3)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut env_in_extraction = false;
    for config in [NoiseConfig::gate(0.2, 1.0), NoiseConfig::environmental(0.2, 1.0)] {
        for _ in 0..2000 {
            for f in sample_faults(&v.program, &config, &mut rng).unwrap() {
                let block = v.program.ops[f.position].block;
                assert_ne!(block, BlockTag::Prepare);
                match config.model {
                    NoiseModel::GateNoise => assert_ne!(block, BlockTag::Syndrome),
                    _ => env_in_extraction |= block == BlockTag::Syndrome,
                }
            }
        }
    }
    // Extraction gates still run the environmental clock.
    assert!(env_in_extraction);
}

#[test]
fn weaving_is_deterministic() {
    let v = build_logical_vqc(LogicalLabel::new(0), 2.1, &SyndromePlacement::rounds(2)).unwrap();
    for config in [NoiseConfig::gate(0.03, 0.7), NoiseConfig::environmental(0.03, 0.7)] {
        for seed in 0..50u64 {
            let weave = |s| {
                let mut rng = stream(s, &[1, 2]);
                match config.model {
                    NoiseModel::GateNoise => weave_gate_noise(&v.program, &config, &mut rng),
                    _ => weave_environmental_noise(&v.program, &config, &mut rng),
                }
                .unwrap()
            };
            let (pa, fa) = weave(seed);
            let (pb, fb) = weave(seed);
            assert_eq!(fa, fb);
            assert_eq!(pa, pb);
            assert_eq!(pa.ops.len(), v.program.ops.len() + fa.len());
        }
    }
}

#[test]
fn fault_count_grows_with_rate() {
    let v = build_logical_vqc(LogicalLabel::new(3), 0.3, &SyndromePlacement::rounds(1)).unwrap();
    for make in [NoiseConfig::gate as fn(f64, f64) -> NoiseConfig, NoiseConfig::environmental] {
        let means: Vec<f64> =
            [0.001, 0.005, 0.01].iter().map(|&p| fault_count_stats(&v.program, &make(p, 1.0), 9).0).collect();
        assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
    }
}
