use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use esrn::dimensional::CandidateSet;
use esrn::evolution::{
    crossover, init_population, mutate_activation_counted, rank_and_select, redraw_candidate, run, Candidate,
    CandidateTarget, EsrnConfig, RankMetric,
};
use esrn::models::{synthesize, ModelId, SynthSpec};
use esrn::network::{Activation, Edge, Neuron, SymbolicNetwork, TrainConfig};

fn neuron(sources: &[usize], weight: f64) -> Neuron {
    Neuron::new(
        Activation::Identity,
        sources.iter().map(|&source| Edge { source, weight }).collect(),
        0.0,
    )
}

/// A tree whose output neuron has one cone per entry of `cone_leaves`, each
/// cone being a hidden neuron over that many input neurons.
fn tree(cone_leaves: &[usize], weight: f64) -> SymbolicNetwork {
    let c = CandidateSet::ldc();
    let mut leaves = Vec::new();
    let mut hidden = Vec::new();
    for &k in cone_leaves {
        let first = leaves.len();
        for j in 0..k {
            leaves.push(neuron(&[j % 3], 1.0));
        }
        hidden.push(neuron(&(first..first + k).collect::<Vec<_>>(), 1.0));
    }
    let output = neuron(&(0..hidden.len()).collect::<Vec<_>>(), weight);
    SymbolicNetwork {
        inputs: c.inputs.clone(),
        output: c.outputs[0].clone(),
        layers: vec![leaves, hidden, vec![output]],
    }
}

#[test]
fn activation_mutation_count_is_binomial() {
    let net = tree(&[2, 2, 1], 1.0);
    assert_eq!(net.neuron_count(), 9);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let trials = 1000;
    let total: usize = (0..trials).map(|_| mutate_activation_counted(&net, &mut rng, 0.1).1).sum();
    let mean = total as f64 / trials as f64;
    assert!((mean - 0.9).abs() <= 0.1, "mean mutated neurons {mean}");
}

#[test]
fn mutated_activation_always_differs() {
    let net = tree(&[1], 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        let (m, k) = mutate_activation_counted(&net, &mut rng, 1.0);
        assert_eq!(k, 3);
        assert!(m.neurons().all(|n| n.activation != Activation::Identity));
    }
}

#[test]
fn output_replacement_is_uniform() {
    let c = CandidateSet::ldc();
    let net = tree(&[1, 1], 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut counts = vec![0usize; c.outputs.len()];
    let draws = 10_000;
    for _ in 0..draws {
        let m = redraw_candidate(&net, &c, CandidateTarget::Output, &mut rng);
        let k = c.outputs.iter().position(|g| *g == m.output).unwrap();
        counts[k] += 1;
    }
    assert_eq!(counts[0], 0, "the current output group is never redrawn");
    let expected = draws as f64 / 3.0;
    let chi2: f64 = counts[1..].iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new(2.0).unwrap().inverse_cdf(0.999);
    assert!(chi2 < critical, "chi-square {chi2} ≥ {critical} with counts {counts:?}");
}

#[test]
fn crossover_keeps_cone_counts_within_bounds() {
    let a = tree(&[1, 1, 1], 1.0);
    let b = tree(&[1, 1], 0.5);
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = crossover(&a, &b, &[5, 3, 1], &mut rng);
        assert_eq!(x.output_neuron().inputs.len(), 3);
        assert_eq!(y.output_neuron().inputs.len(), 2);
        x.validate(Some(&[5, 3, 1])).unwrap();
        y.validate(Some(&[5, 3, 1])).unwrap();
    }
}

#[test]
fn crossover_drops_weakest_cone_when_a_layer_overflows() {
    // Cones of width 2 swapped into a parent already holding 4 leaves push
    // the leaf layer past 5; the lowest-|weight| cone must go.
    let mut a = tree(&[2, 2, 1], 1.0);
    a.layers[2][0].inputs[2].weight = 0.01;
    let b = tree(&[2, 2, 2], 1.0);
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = crossover(&a, &b, &[5, 3, 1], &mut rng);
        for net in [&x, &y] {
            net.validate(Some(&[5, 3, 1])).unwrap();
        }
    }
}

fn scored(net: SymbolicNetwork, score: f64) -> Candidate {
    Candidate {
        net,
        score: Some(score),
        train_metric: score,
        dead: !score.is_finite(),
    }
}

#[test]
fn ties_prefer_fewer_active_edges_and_dead_candidates_drop_out() {
    let big = tree(&[2, 2, 1], 1.0);
    let small = tree(&[1], 1.0);
    let pool = vec![
        scored(big.clone(), 0.9),
        scored(small.clone(), f64::NEG_INFINITY),
        scored(small.clone(), 0.9),
        scored(big.clone(), 0.5),
    ];
    let kept = rank_and_select(pool, RankMetric::R2, &[], 3, &TrainConfig::default());
    assert_eq!(kept.len(), 3);
    assert_eq!(kept[0].net, small);
    assert_eq!(kept[1].net, big);
    assert_eq!(kept[2].score, Some(0.5));
    assert!(kept.iter().all(|c| !c.dead));
}

fn quick_config(population: usize, generations: usize, seed: u64) -> EsrnConfig {
    EsrnConfig {
        population,
        generations,
        seed,
        train: TrainConfig {
            epochs: 50,
            ..TrainConfig::default()
        },
        ..EsrnConfig::default()
    }
}

fn data(seed: u64) -> Vec<esrn::dataset::Sample> {
    synthesize(&SynthSpec {
        model: ModelId::EsrnFinal,
        n: 40,
        noise: 0.05,
        seed,
        ..SynthSpec::default()
    })
}

#[test]
fn single_generation_logs_one_record() {
    let c = CandidateSet::ldc();
    let result = run(&quick_config(2, 1, 3), &c, &data(1), &data(2)).unwrap();
    assert_eq!(result.log.len(), 1);
    assert_eq!(result.best_generation, 1);
    assert_eq!(result.log.to_csv().lines().count(), 2);
}

#[test]
fn seeded_runs_are_bit_identical() {
    let c = CandidateSet::ldc();
    let cfg = quick_config(6, 3, 9);
    let (train, test) = (data(1), data(2));
    let a = run(&cfg, &c, &train, &test).unwrap();
    let b = run(&cfg, &c, &train, &test).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.log.to_csv(), b.log.to_csv());
    assert_eq!(a.network, b.network);
}

#[test]
fn minimal_topology_population() {
    let c = CandidateSet::ldc();
    let cfg = EsrnConfig {
        population: 2,
        topology: vec![1, 1],
        ..EsrnConfig::default()
    };
    for net in init_population(&cfg, &c).unwrap() {
        assert_eq!(net.layer_sizes(), vec![1, 1]);
        assert_eq!(net.edge_count(), 2);
        assert_eq!(net.inputs.len(), 1);
    }
}
