//! The evolutionary loop over network topologies.
//!
//! Networks produced here are trees: every non-output neuron feeds exactly
//! one neuron of the next layer. The sub-network ("cone") hanging off each
//! input of the output neuron is then a self-contained formula fragment that
//! crossover can exchange between parents.

use std::cmp::Ordering;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Sample;
use crate::dimensional::{CandidateSet, PiGroup};
use crate::metrics;
use crate::network::{self, decode, Activation, Edge, Expression, Neuron, SymbolicNetwork, TrainConfig, TrainingData};

#[derive(Debug, Error, PartialEq)]
pub enum EvolutionError {
    #[error("population size must be at least 2, got {0}")]
    Population(usize),
    #[error("at least one generation is required")]
    Generations,
    #[error("topology must be non-empty, all entries ≥ 1 and end in 1: {0:?}")]
    Topology(Vec<usize>),
    #[error("rate `{name}` = {value} is outside [0, 1]")]
    Rate { name: &'static str, value: f64 },
    #[error("candidate set has no input or no output groups")]
    EmptyCandidates,
    #[error("training set is empty")]
    NoTrainingData,
    #[error("every candidate in generation {0} is dead (non-finite loss or metric)")]
    AllDead(usize),
}

/// Metric used to rank candidates. Scores are oriented so larger is better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RankMetric {
    #[default]
    R2,
    Rmse,
    Wmape,
}

impl RankMetric {
    pub fn name(self) -> &'static str {
        match self {
            RankMetric::R2 => "r2",
            RankMetric::Rmse => "rmse",
            RankMetric::Wmape => "wmape",
        }
    }

    pub fn higher_is_better(self) -> bool {
        self == RankMetric::R2
    }

    /// Raw metric value; NaN when undefined.
    pub fn value(self, obs: &[f64], pred: &[f64]) -> f64 {
        if pred.iter().any(|p| !p.is_finite()) {
            return f64::NAN;
        }
        let r = match self {
            RankMetric::R2 => metrics::r2(obs, pred),
            RankMetric::Rmse => metrics::rmse(obs, pred),
            RankMetric::Wmape => metrics::wmape(obs, pred),
        };
        r.unwrap_or(f64::NAN)
    }

    /// Orientation-corrected value; non-finite values map to −∞.
    pub fn score_of(self, value: f64) -> f64 {
        if !value.is_finite() {
            f64::NEG_INFINITY
        } else if self.higher_is_better() {
            value
        } else {
            -value
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EsrnConfig {
    pub population: usize,
    pub generations: usize,
    pub topology: Vec<usize>,
    pub metric: RankMetric,
    pub crossover_rate: f64,
    pub activation_mutation_rate: f64,
    pub candidate_mutation_rate: f64,
    pub seed: u64,
    pub train: TrainConfig,
}

impl Default for EsrnConfig {
    fn default() -> Self {
        EsrnConfig {
            population: 100,
            generations: 200,
            topology: vec![5, 3, 1],
            metric: RankMetric::R2,
            crossover_rate: 0.5,
            activation_mutation_rate: 0.1,
            candidate_mutation_rate: 0.2,
            seed: 0,
            train: TrainConfig::default(),
        }
    }
}

impl EsrnConfig {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        if self.population < 2 {
            return Err(EvolutionError::Population(self.population));
        }
        if self.generations == 0 {
            return Err(EvolutionError::Generations);
        }
        check_topology(&self.topology)?;
        for (name, value) in [
            ("crossover_rate", self.crossover_rate),
            ("activation_mutation_rate", self.activation_mutation_rate),
            ("candidate_mutation_rate", self.candidate_mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(EvolutionError::Rate { name, value });
            }
        }
        Ok(())
    }
}

fn check_topology(topology: &[usize]) -> Result<(), EvolutionError> {
    if topology.is_empty() || topology.contains(&0) || topology.last() != Some(&1) {
        return Err(EvolutionError::Topology(topology.to_vec()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Tree view of a network

#[derive(Debug, Clone, PartialEq)]
enum Child {
    Slot(PiGroup),
    Node(Node),
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    activation: Activation,
    bias: f64,
    inputs: Vec<(f64, Child)>,
}

fn to_tree(net: &SymbolicNetwork) -> Node {
    fn build(net: &SymbolicNetwork, layer: usize, index: usize) -> Node {
        let n = &net.layers[layer][index];
        Node {
            activation: n.activation,
            bias: n.bias,
            inputs: n
                .inputs
                .iter()
                .map(|e| {
                    let child = if layer == 0 {
                        Child::Slot(net.inputs[e.source].clone())
                    } else {
                        Child::Node(build(net, layer - 1, e.source))
                    };
                    (e.weight, child)
                })
                .collect(),
        }
    }
    build(net, net.layers.len() - 1, 0)
}

/// Lays a tree out in depth-first order; input slots are numbered by first
/// appearance, so equal trees give equal networks.
fn from_tree(root: &Node, depth: usize, output: PiGroup) -> SymbolicNetwork {
    fn place(node: &Node, layer: usize, layers: &mut [Vec<Neuron>], inputs: &mut Vec<PiGroup>) -> usize {
        let mut edges = Vec::with_capacity(node.inputs.len());
        for (w, child) in &node.inputs {
            let source = match child {
                Child::Slot(g) => {
                    debug_assert_eq!(layer, 0);
                    match inputs.iter().position(|h| h == g) {
                        Some(i) => i,
                        None => {
                            inputs.push(g.clone());
                            inputs.len() - 1
                        }
                    }
                }
                Child::Node(n) => place(n, layer - 1, layers, inputs),
            };
            edges.push(Edge { source, weight: *w });
        }
        layers[layer].push(Neuron::new(node.activation, edges, node.bias));
        layers[layer].len() - 1
    }
    let mut layers = vec![Vec::new(); depth];
    let mut inputs = Vec::new();
    place(root, depth - 1, &mut layers, &mut inputs);
    SymbolicNetwork { inputs, output, layers }
}

fn tree_layer_sizes(root: &Node, depth: usize) -> Vec<usize> {
    fn walk(n: &Node, layer: usize, sizes: &mut [usize]) {
        sizes[layer] += 1;
        for (_, c) in &n.inputs {
            if let Child::Node(m) = c {
                walk(m, layer - 1, sizes);
            }
        }
    }
    let mut sizes = vec![0; depth];
    walk(root, depth - 1, &mut sizes);
    sizes
}

/// Re-lays a tree-shaped network out canonically.
pub fn canonicalize(net: &SymbolicNetwork) -> SymbolicNetwork {
    from_tree(&to_tree(net), net.layers.len(), net.output.clone())
}

// ---------------------------------------------------------------------------
// Initialization

fn random_activation<R: Rng + ?Sized>(rng: &mut R) -> Activation {
    *Activation::ALL.choose(rng).expect("non-empty table")
}

fn random_weight<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(-1.0..=1.0)
}

/// One random tree-shaped network within `topology`.
pub fn random_network<R: Rng + ?Sized>(topology: &[usize], candidates: &CandidateSet, rng: &mut R) -> SymbolicNetwork {
    let depth = topology.len();
    let sizes: Vec<usize> = (0..depth)
        .map(|l| if l + 1 == depth { 1 } else { rng.random_range(1..=topology[l]) })
        .collect();
    let mut layers: Vec<Vec<Node>> = sizes
        .iter()
        .map(|&s| {
            (0..s)
                .map(|_| Node {
                    activation: random_activation(rng),
                    bias: 0.0,
                    inputs: Vec::new(),
                })
                .collect()
        })
        .collect();

    let k = rng.random_range(1..=sizes[0].min(candidates.inputs.len()));
    let slots: Vec<PiGroup> = rand::seq::index::sample(rng, candidates.inputs.len(), k)
        .into_iter()
        .map(|i| candidates.inputs[i].clone())
        .collect();
    let mut order: Vec<usize> = (0..sizes[0]).collect();
    order.shuffle(rng);
    for (rank, &i) in order.iter().enumerate() {
        let slot = if rank < k { rank } else { rng.random_range(0..k) };
        let w = random_weight(rng);
        layers[0][i].inputs.push((w, Child::Slot(slots[slot].clone())));
    }

    for l in 0..depth - 1 {
        let parents = sizes[l + 1];
        let mut parent_order: Vec<usize> = (0..parents).collect();
        parent_order.shuffle(rng);
        let mut child_order: Vec<usize> = (0..sizes[l]).collect();
        child_order.shuffle(rng);
        let mut parent_of = vec![0; sizes[l]];
        for (rank, &c) in child_order.iter().enumerate() {
            parent_of[c] = if rank < parents { parent_order[rank] } else { rng.random_range(0..parents) };
        }
        let children = std::mem::take(&mut layers[l]);
        for (c, node) in children.into_iter().enumerate() {
            let w = random_weight(rng);
            layers[l + 1][parent_of[c]].inputs.push((w, Child::Node(node)));
        }
    }
    let root = layers[depth - 1].pop().expect("output neuron");
    let output = candidates.outputs.choose(rng).expect("non-empty outputs").clone();
    from_tree(&root, depth, output)
}

/// Candidate `i` of generation zero is drawn from its own stream of the
/// master seed, so the population does not depend on evaluation order.
pub fn init_population(config: &EsrnConfig, candidates: &CandidateSet) -> Result<Vec<SymbolicNetwork>, EvolutionError> {
    config.validate()?;
    if candidates.inputs.is_empty() || candidates.outputs.is_empty() {
        return Err(EvolutionError::EmptyCandidates);
    }
    Ok((0..config.population)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64 + 1);
            random_network(&config.topology, candidates, &mut rng)
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Operators

/// Swaps a random subset of the output neuron's incoming cones position by
/// position, then drops the lowest-|weight| cones until both offspring fit
/// `topology` again. Each offspring keeps its own output neuron and group.
pub fn crossover<R: Rng + ?Sized>(
    a: &SymbolicNetwork,
    b: &SymbolicNetwork,
    topology: &[usize],
    rng: &mut R,
) -> (SymbolicNetwork, SymbolicNetwork) {
    let depth = a.layers.len();
    if depth != b.layers.len() {
        return (a.clone(), b.clone());
    }
    let (mut ta, mut tb) = (to_tree(a), to_tree(b));
    let m = ta.inputs.len().min(tb.inputs.len());
    if m == 0 {
        return (a.clone(), b.clone());
    }
    let k = rng.random_range(1..=m);
    for pos in rand::seq::index::sample(rng, m, k) {
        std::mem::swap(&mut ta.inputs[pos], &mut tb.inputs[pos]);
    }
    enforce_bounds(&mut ta, depth, topology);
    enforce_bounds(&mut tb, depth, topology);
    // A swap can leave a layer with no neurons (all cones hanging off
    // childless neurons); such an offspring is replaced by its parent.
    let rebuild = |t: &Node, parent: &SymbolicNetwork| {
        if tree_layer_sizes(t, depth).contains(&0) {
            parent.clone()
        } else {
            from_tree(t, depth, parent.output.clone())
        }
    };
    (rebuild(&ta, a), rebuild(&tb, b))
}

fn enforce_bounds(root: &mut Node, depth: usize, topology: &[usize]) {
    while root.inputs.len() > 1 {
        let sizes = tree_layer_sizes(root, depth);
        if sizes.iter().zip(topology).all(|(s, b)| s <= b) {
            return;
        }
        let weakest = root
            .inputs
            .iter()
            .enumerate()
            .min_by(|(i, x), (j, y)| x.0.abs().total_cmp(&y.0.abs()).then(j.cmp(i)))
            .map(|(i, _)| i)
            .expect("non-empty");
        root.inputs.remove(weakest);
    }
}

/// Each neuron independently, with probability `p`, switches to one of the
/// other four activations. Returns the mutant and the number of neurons
/// changed.
pub fn mutate_activation_counted<R: Rng + ?Sized>(net: &SymbolicNetwork, rng: &mut R, p: f64) -> (SymbolicNetwork, usize) {
    let mut out = net.clone();
    let mut changed = 0;
    for n in out.layers.iter_mut().flatten() {
        if rng.random_bool(p) {
            let others: Vec<Activation> = Activation::ALL.iter().copied().filter(|&a| a != n.activation).collect();
            n.activation = *others.choose(rng).expect("four alternatives");
            changed += 1;
        }
    }
    (out, changed)
}

pub fn mutate_activation<R: Rng + ?Sized>(net: &SymbolicNetwork, rng: &mut R, p: f64) -> SymbolicNetwork {
    mutate_activation_counted(net, rng, p).0
}

/// Which candidate of a network a candidate mutation re-draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateTarget {
    Output,
    Input(usize),
}

/// Targets with at least one alternative in `candidates`.
pub fn mutation_targets(net: &SymbolicNetwork, candidates: &CandidateSet) -> Vec<CandidateTarget> {
    let mut t = Vec::new();
    if candidates.outputs.iter().any(|g| *g != net.output) {
        t.push(CandidateTarget::Output);
    }
    if candidates.inputs.iter().any(|g| !net.inputs.contains(g)) {
        t.extend((0..net.inputs.len()).map(CandidateTarget::Input));
    }
    t
}

/// Replaces the target group by a uniformly drawn alternative: another
/// output group, or an input group not already used by the network.
pub fn redraw_candidate<R: Rng + ?Sized>(
    net: &SymbolicNetwork,
    candidates: &CandidateSet,
    target: CandidateTarget,
    rng: &mut R,
) -> SymbolicNetwork {
    let mut out = net.clone();
    match target {
        CandidateTarget::Output => {
            let alts: Vec<&PiGroup> = candidates.outputs.iter().filter(|g| **g != net.output).collect();
            if let Some(g) = alts.choose(rng) {
                out.output = (*g).clone();
            }
        }
        CandidateTarget::Input(i) => {
            let alts: Vec<&PiGroup> = candidates.inputs.iter().filter(|g| !net.inputs.contains(g)).collect();
            if let Some(g) = alts.choose(rng) {
                out.inputs[i] = (*g).clone();
            }
        }
    }
    out
}

/// With probability `p`, re-draws one uniformly chosen input slot or the
/// output group. Weights are untouched.
pub fn mutate_candidate<R: Rng + ?Sized>(
    net: &SymbolicNetwork,
    candidates: &CandidateSet,
    rng: &mut R,
    p: f64,
) -> SymbolicNetwork {
    if !rng.random_bool(p) {
        return net.clone();
    }
    let targets = mutation_targets(net, candidates);
    match targets.choose(rng) {
        Some(&t) => redraw_candidate(net, candidates, t, rng),
        None => net.clone(),
    }
}

// ---------------------------------------------------------------------------
// Ranking

/// A population member. `score` is `None` until the network has been
/// trained and scored; scored members are never retrained.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub net: SymbolicNetwork,
    pub score: Option<f64>,
    pub train_metric: f64,
    pub dead: bool,
}

impl Candidate {
    pub fn new(net: SymbolicNetwork) -> Self {
        Candidate {
            net,
            score: None,
            train_metric: f64::NAN,
            dead: false,
        }
    }
}

/// Predicted dependent variable for every sample.
pub fn predict_all(net: &SymbolicNetwork, samples: &[Sample]) -> Vec<f64> {
    samples.iter().map(|s| net.predict(s)).collect()
}

fn train_and_score(c: &mut Candidate, metric: RankMetric, train: &[Sample], obs: &[f64], cfg: &TrainConfig) {
    let data = TrainingData::for_network(&c.net, train);
    let outcome = network::train(&mut c.net, &data, cfg);
    let value = if outcome.dead {
        f64::NAN
    } else {
        metric.value(obs, &predict_all(&c.net, train))
    };
    c.dead = outcome.dead || !value.is_finite();
    c.train_metric = value;
    c.score = Some(metric.score_of(value));
}

/// Trains unscored members (in parallel), sorts by score descending with
/// ties broken by fewer active edges then pool position, and keeps the first
/// `n`. Dead members rank last.
pub fn rank_and_select(
    mut pool: Vec<Candidate>,
    metric: RankMetric,
    train: &[Sample],
    n: usize,
    cfg: &TrainConfig,
) -> Vec<Candidate> {
    let obs: Vec<f64> = train.iter().map(|s| s.dl).collect();
    pool.par_iter_mut()
        .filter(|c| c.score.is_none())
        .for_each(|c| train_and_score(c, metric, train, &obs, cfg));
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&i, &j| compare(&pool[i], i, &pool[j], j));
    let mut slots: Vec<Option<Candidate>> = pool.into_iter().map(Some).collect();
    order.into_iter().take(n).map(|i| slots[i].take().expect("each index once")).collect()
}

fn compare(a: &Candidate, ia: usize, b: &Candidate, ib: usize) -> Ordering {
    let sa = a.score.unwrap_or(f64::NEG_INFINITY);
    let sb = b.score.unwrap_or(f64::NEG_INFINITY);
    sb.total_cmp(&sa)
        .then(a.net.active_edge_count().cmp(&b.net.active_edge_count()))
        .then(ia.cmp(&ib))
}

// ---------------------------------------------------------------------------
// The loop

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub train_metric: f64,
    pub test_metric: f64,
    pub network: SymbolicNetwork,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct GenerationLog {
    pub metric: RankMetric,
    pub records: Vec<GenerationRecord>,
}

impl GenerationLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, generation: usize) -> Option<&GenerationRecord> {
        self.records.iter().find(|r| r.generation == generation)
    }

    /// CSV with columns `generation,<metric>_train,<metric>_test`.
    pub fn to_csv(&self) -> String {
        let m = self.metric.name();
        let mut s = format!("generation,{m}_train,{m}_test\n");
        for r in &self.records {
            s.push_str(&format!("{},{},{}\n", r.generation, r.train_metric, r.test_metric));
        }
        s
    }

    /// Contiguous generations around the best one whose test score is within
    /// `tolerance` of the best score.
    pub fn plateau(&self, tolerance: f64) -> Option<(usize, usize)> {
        let best = select_best_generation(self)?;
        let scores: Vec<f64> = self.records.iter().map(|r| self.metric.score_of(r.test_metric)).collect();
        let pos = self.records.iter().position(|r| r.generation == best)?;
        let floor = scores[pos] - tolerance;
        let mut lo = pos;
        while lo > 0 && scores[lo - 1] >= floor {
            lo -= 1;
        }
        let mut hi = pos;
        while hi + 1 < scores.len() && scores[hi + 1] >= floor {
            hi += 1;
        }
        Some((self.records[lo].generation, self.records[hi].generation))
    }
}

/// Generation whose top candidate has the best test metric; ties go to the
/// earliest.
pub fn select_best_generation(log: &GenerationLog) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for r in &log.records {
        let s = log.metric.score_of(r.test_metric);
        if best.is_none_or(|(b, _)| s > b) {
            best = Some((s, r.generation));
        }
    }
    best.map(|(_, g)| g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsrnResult {
    pub best_generation: usize,
    pub network: SymbolicNetwork,
    pub expression: Expression,
    pub log: GenerationLog,
}

fn offspring<R: Rng + ?Sized>(
    parents: &[Candidate],
    config: &EsrnConfig,
    candidates: &CandidateSet,
    rng: &mut R,
) -> Vec<Candidate> {
    let mut order: Vec<usize> = (0..parents.len()).collect();
    order.shuffle(rng);
    let mut children = Vec::with_capacity(parents.len());
    for pair in order.chunks(2) {
        let a = &parents[pair[0]].net;
        if pair.len() == 1 {
            children.push(a.clone());
            continue;
        }
        let b = &parents[pair[1]].net;
        if rng.random_bool(config.crossover_rate) {
            let (x, y) = crossover(a, b, &config.topology, rng);
            children.push(x);
            children.push(y);
        } else {
            children.push(a.clone());
            children.push(b.clone());
        }
    }
    children
        .into_iter()
        .map(|c| {
            let c = mutate_activation(&c, rng, config.activation_mutation_rate);
            let c = mutate_candidate(&c, candidates, rng, config.candidate_mutation_rate);
            Candidate::new(c)
        })
        .collect()
}

/// Runs the evolutionary loop. `progress` is called after every generation.
pub fn run_with_progress<F: FnMut(&GenerationRecord)>(
    config: &EsrnConfig,
    candidates: &CandidateSet,
    train: &[Sample],
    test: &[Sample],
    mut progress: F,
) -> Result<EsrnResult, EvolutionError> {
    config.validate()?;
    if train.is_empty() {
        return Err(EvolutionError::NoTrainingData);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let test_obs: Vec<f64> = test.iter().map(|s| s.dl).collect();
    let mut log = GenerationLog {
        metric: config.metric,
        records: Vec::with_capacity(config.generations),
    };

    let mut population: Vec<Candidate> = init_population(config, candidates)?.into_iter().map(Candidate::new).collect();
    for generation in 1..=config.generations {
        if generation > 1 {
            let children = offspring(&population, config, candidates, &mut rng);
            population.extend(children);
        }
        population = rank_and_select(population, config.metric, train, config.population, &config.train);
        let top = &population[0];
        if top.dead {
            return Err(EvolutionError::AllDead(generation));
        }
        let test_metric = if test.is_empty() {
            f64::NAN
        } else {
            config.metric.value(&test_obs, &predict_all(&top.net, test))
        };
        log.records.push(GenerationRecord {
            generation,
            train_metric: top.train_metric,
            test_metric,
            network: top.net.clone(),
        });
        progress(log.records.last().expect("just pushed"));
    }

    let best_generation = select_best_generation(&log).expect("at least one generation");
    finish(log, best_generation)
}

pub fn run(
    config: &EsrnConfig,
    candidates: &CandidateSet,
    train: &[Sample],
    test: &[Sample],
) -> Result<EsrnResult, EvolutionError> {
    run_with_progress(config, candidates, train, test, |_| {})
}

/// Result for a chosen generation of a finished log (used to override the
/// automatic choice).
pub fn finish(log: GenerationLog, generation: usize) -> Result<EsrnResult, EvolutionError> {
    let record = log.get(generation).ok_or(EvolutionError::Generations)?;
    let network = record.network.clone();
    Ok(EsrnResult {
        best_generation: generation,
        expression: decode(&network),
        network,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ldc() -> CandidateSet {
        CandidateSet::ldc()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn minimal_topology() {
        let cfg = EsrnConfig {
            population: 2,
            topology: vec![1, 1],
            ..Default::default()
        };
        let pop = init_population(&cfg, &ldc()).unwrap();
        assert_eq!(pop[0].layer_sizes(), vec![1, 1]);
        assert_eq!(pop[0].edge_count(), 2);
    }

    #[test]
    fn population_respects_bounds_and_candidates() {
        let c = ldc();
        let cfg = EsrnConfig::default();
        let pop = init_population(&cfg, &c).unwrap();
        assert_eq!(pop.len(), 100);
        for net in &pop {
            net.validate(Some(&cfg.topology)).unwrap();
            assert!(net.is_tree());
            assert!(c.outputs.contains(&net.output));
            assert!(net.inputs.iter().all(|g| c.inputs.contains(g)));
            let mut seen = net.inputs.clone();
            seen.dedup();
            assert_eq!(seen.len(), net.inputs.len());
        }
        assert_eq!(pop, init_population(&cfg, &c).unwrap());
    }

    #[test]
    fn canonical_layout_is_stable() {
        let c = ldc();
        let mut r = rng(3);
        for _ in 0..50 {
            let net = random_network(&[5, 3, 1], &c, &mut r);
            assert_eq!(canonicalize(&net), net);
        }
    }

    #[test]
    fn crossover_of_identical_parents() {
        let c = ldc();
        let mut r = rng(5);
        for _ in 0..30 {
            let a = random_network(&[5, 3, 1], &c, &mut r);
            let (x, y) = crossover(&a, &a, &[5, 3, 1], &mut r);
            assert_eq!(x, a);
            assert_eq!(y, a);
        }
    }

    #[test]
    fn crossover_stays_within_bounds() {
        let c = ldc();
        let mut r = rng(9);
        for _ in 0..300 {
            let a = random_network(&[5, 3, 1], &c, &mut r);
            let b = random_network(&[5, 3, 1], &c, &mut r);
            let (x, y) = crossover(&a, &b, &[5, 3, 1], &mut r);
            for n in [x, y] {
                n.validate(Some(&[5, 3, 1])).unwrap();
                assert!(n.is_tree());
            }
        }
    }

    #[test]
    fn dropping_excess_prefers_small_weights() {
        let c = ldc();
        let leaf = |w: f64| {
            (
                w,
                Child::Node(Node {
                    activation: Activation::Identity,
                    bias: 0.0,
                    inputs: vec![(1.0, Child::Slot(c.inputs[0].clone()))],
                }),
            )
        };
        let mut root = Node {
            activation: Activation::Identity,
            bias: 0.0,
            inputs: vec![leaf(0.9), leaf(-0.1), leaf(0.5)],
        };
        enforce_bounds(&mut root, 2, &[2, 1]);
        let kept: Vec<f64> = root.inputs.iter().map(|x| x.0).collect();
        assert_eq!(kept, vec![0.9, 0.5]);
    }

    #[test]
    fn activation_mutation_changes_activation() {
        let c = ldc();
        let mut r = rng(1);
        let net = random_network(&[1], &c, &mut r);
        assert_eq!(mutate_activation(&net, &mut r, 0.0), net);
        let m = mutate_activation(&net, &mut r, 1.0);
        assert_ne!(m.layers[0][0].activation, net.layers[0][0].activation);
    }

    #[test]
    fn candidate_mutation_of_output() {
        let c = ldc();
        let mut r = rng(2);
        let mut net = random_network(&[2, 1], &c, &mut r);
        net.output = c.outputs[3].clone();
        assert_eq!(mutate_candidate(&net, &c, &mut r, 0.0), net);
        for _ in 0..50 {
            let m = redraw_candidate(&net, &c, CandidateTarget::Output, &mut r);
            assert_ne!(m.output, net.output);
            assert!(c.outputs.contains(&m.output));
            assert_eq!(m.params(), net.params());
        }
    }

    #[test]
    fn select_best_generation_examples() {
        let net = random_network(&[1], &ldc(), &mut rng(0));
        let log = |xs: &[f64]| GenerationLog {
            metric: RankMetric::R2,
            records: xs
                .iter()
                .enumerate()
                .map(|(i, &t)| GenerationRecord {
                    generation: i + 1,
                    train_metric: 0.0,
                    test_metric: t,
                    network: net.clone(),
                })
                .collect(),
        };
        assert_eq!(select_best_generation(&log(&[0.1, 0.5, 0.3])), Some(2));
        assert_eq!(select_best_generation(&log(&[0.1, 0.2, 0.3])), Some(3));
        assert_eq!(select_best_generation(&log(&[0.1, 0.6, 0.6, 0.2])), Some(2));
        assert_eq!(log(&[0.1, 0.6, 0.595, 0.2]).plateau(0.01), Some((2, 3)));
        assert_eq!(select_best_generation(&log(&[])), None);
    }

    #[test]
    fn config_validation() {
        assert!(EsrnConfig::default().validate().is_ok());
        let bad = |f: fn(&mut EsrnConfig)| {
            let mut c = EsrnConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.population = 1));
        assert!(bad(|c| c.generations = 0));
        assert!(bad(|c| c.topology = vec![5, 3]));
        assert!(bad(|c| c.topology = vec![0, 1]));
        assert!(bad(|c| c.crossover_rate = 1.5));
    }

    #[test]
    fn rank_metric_orientation() {
        assert_eq!(RankMetric::Rmse.score_of(2.0), -2.0);
        assert_eq!(RankMetric::R2.score_of(f64::NAN), f64::NEG_INFINITY);
    }
}
