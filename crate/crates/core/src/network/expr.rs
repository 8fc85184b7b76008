//! Closed-form expressions recovered from trained networks.

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{guarded_exp, guarded_ln_abs, sigmoid, Activation, SymbolicNetwork};
use crate::dataset::Sample;
use crate::dimensional::{evaluate_group, PiGroup};

/// Expression tree over dimensionless groups. `Power` raises the magnitude
/// of its base, and `Exp`/`Log` share the guards used by the network, so a
/// decoded network evaluates to exactly the network's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Expression {
    Const { value: f64 },
    Var { group: PiGroup },
    Sum { terms: Vec<Expression> },
    Product { factors: Vec<Expression> },
    Power { base: Box<Expression>, exponent: f64 },
    Exp { arg: Box<Expression> },
    Log { arg: Box<Expression> },
    Sigmoid { arg: Box<Expression> },
}

use Expression as E;

fn cnst(value: f64) -> Expression {
    E::Const { value }
}

fn pow(base: Expression, exponent: f64) -> Expression {
    E::Power {
        base: Box::new(base),
        exponent,
    }
}

impl Expression {
    pub fn constant(value: f64) -> Self {
        cnst(value)
    }

    pub fn var(group: PiGroup) -> Self {
        E::Var { group }
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            E::Const { value } => Some(*value),
            _ => None,
        }
    }

    /// Evaluates with group values supplied by `value_of`.
    pub fn eval_with<F: Fn(&PiGroup) -> f64>(&self, value_of: &F) -> f64 {
        match self {
            E::Const { value } => *value,
            E::Var { group } => value_of(group),
            E::Sum { terms } => {
                let mut it = terms.iter();
                let first = it.next().map_or(0.0, |t| t.eval_with(value_of));
                it.fold(first, |acc, t| acc + t.eval_with(value_of))
            }
            E::Product { factors } => {
                let mut it = factors.iter();
                let first = it.next().map_or(1.0, |t| t.eval_with(value_of));
                it.fold(first, |acc, t| acc * t.eval_with(value_of))
            }
            E::Power { base, exponent } => base.eval_with(value_of).abs().powf(*exponent),
            E::Exp { arg } => guarded_exp(arg.eval_with(value_of)),
            E::Log { arg } => guarded_ln_abs(arg.eval_with(value_of)),
            E::Sigmoid { arg } => sigmoid(arg.eval_with(value_of)),
        }
    }

    pub fn eval(&self, sample: &Sample) -> f64 {
        self.eval_with(&|g: &PiGroup| evaluate_group(g, sample))
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + match self {
            E::Const { .. } | E::Var { .. } => 0,
            E::Sum { terms: xs } | E::Product { factors: xs } => xs.iter().map(Expression::size).sum(),
            E::Power { base: a, .. } | E::Exp { arg: a } | E::Log { arg: a } | E::Sigmoid { arg: a } => {
                a.size()
            }
        }
    }

    /// Distinct groups referenced, in first-appearance order.
    pub fn groups(&self) -> Vec<PiGroup> {
        fn walk(e: &Expression, out: &mut Vec<PiGroup>) {
            match e {
                E::Const { .. } => {}
                E::Var { group } => {
                    if !out.contains(group) {
                        out.push(group.clone());
                    }
                }
                E::Sum { terms: xs } | E::Product { factors: xs } => xs.iter().for_each(|x| walk(x, out)),
                E::Power { base: a, .. } | E::Exp { arg: a } | E::Log { arg: a } | E::Sigmoid { arg: a } => {
                    walk(a, out)
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    /// `C · ∏ groupᵏ` if the expression is a pure power law.
    pub fn power_law_terms(&self) -> Option<(f64, Vec<(PiGroup, f64)>)> {
        match self {
            E::Const { value } => Some((*value, Vec::new())),
            E::Var { group } => Some((1.0, vec![(group.clone(), 1.0)])),
            E::Power { base, exponent } => match base.as_ref() {
                E::Var { group } => Some((1.0, vec![(group.clone(), *exponent)])),
                E::Const { value } => Some((value.abs().powf(*exponent), Vec::new())),
                _ => None,
            },
            E::Product { factors } => {
                let mut c = 1.0;
                let mut terms: Vec<(PiGroup, f64)> = Vec::new();
                for f in factors {
                    let (k, ts) = f.power_law_terms()?;
                    c *= k;
                    for (g, e) in ts {
                        match terms.iter_mut().find(|(h, _)| *h == g) {
                            Some(slot) => slot.1 += e,
                            None => terms.push((g, e)),
                        }
                    }
                }
                Some((c, terms))
            }
            _ => None,
        }
    }

    fn is_positive_valued(&self) -> bool {
        match self {
            E::Var { .. } | E::Power { .. } | E::Exp { .. } | E::Sigmoid { .. } => true,
            E::Const { value } => *value > 0.0,
            _ => false,
        }
    }
}

/// Translates a network into an expression that evaluates to the same
/// value. Only exact rewrites are applied: zero-weight edges and zero biases
/// are dropped, unit weights are elided and all-constant subtrees are folded.
pub fn decode(net: &SymbolicNetwork) -> Expression {
    let last = net.layers.len() - 1;
    decode_neuron(net, last, 0)
}

fn decode_neuron(net: &SymbolicNetwork, layer: usize, index: usize) -> Expression {
    let n = &net.layers[layer][index];
    if n.activation == Activation::Const {
        return cnst(1.0);
    }
    let mut terms = Vec::new();
    if n.bias != 0.0 {
        terms.push(cnst(n.bias));
    }
    for e in n.inputs.iter().filter(|e| e.weight != 0.0) {
        let child = if layer == 0 {
            E::Var {
                group: net.inputs[e.source].clone(),
            }
        } else {
            decode_neuron(net, layer - 1, e.source)
        };
        terms.push(match (e.weight, child) {
            (w, E::Const { value }) => cnst(w * value),
            (1.0, child) => child,
            (w, child) => E::Product {
                factors: vec![cnst(w), child],
            },
        });
    }
    let affine = match terms.len() {
        0 => cnst(n.bias),
        1 => terms.pop().expect("one term"),
        _ if terms.iter().all(|t| t.as_const().is_some()) => {
            let mut it = terms.iter().filter_map(Expression::as_const);
            let first = it.next().expect("non-empty");
            cnst(it.fold(first, |a, b| a + b))
        }
        _ => E::Sum { terms },
    };
    let arg = Box::new(affine);
    let out = match n.activation {
        Activation::Const => unreachable!(),
        Activation::Identity => return *arg,
        Activation::Exp => E::Exp { arg },
        Activation::LogAbs => E::Log { arg },
        Activation::Sigmoid => E::Sigmoid { arg },
    };
    match out {
        E::Exp { ref arg } | E::Log { ref arg } | E::Sigmoid { ref arg } if arg.as_const().is_some() => {
            cnst(out.eval_with(&|_: &PiGroup| f64::NAN))
        }
        other => other,
    }
}

/// Data used to refit the leading constant of a simplified expression:
/// samples and the output group the expression predicts.
#[derive(Debug, Clone, Copy)]
pub struct FitData<'a> {
    pub samples: &'a [Sample],
    pub output: &'a PiGroup,
}

/// Algebraic simplification followed by snapping of exponents and term
/// weights that lie within `snap_tol` of an integer. With `fit`, the leading
/// multiplicative constant is refitted by least squares in log space; a snap
/// that degrades the fit by more than 5% is discarded.
pub fn simplify(expr: &Expression, snap_tol: f64, fit: Option<FitData<'_>>) -> Expression {
    let base = normalize(expr.clone());
    let snapped = normalize(snap(base.clone(), snap_tol));
    let Some(fit) = fit else {
        return snapped;
    };
    let before = fit_error(&base, fit);
    let candidate = refit(snapped, fit);
    let after = fit_error(&candidate, fit);
    if after <= 1.05 * before || !before.is_finite() {
        candidate
    } else {
        refit(base, fit)
    }
}

/// Mean squared error in log space when every prediction is positive,
/// otherwise in linear space.
fn fit_error(expr: &Expression, fit: FitData<'_>) -> f64 {
    let pairs: Vec<(f64, f64)> = fit
        .samples
        .iter()
        .map(|s| (expr.eval(s), evaluate_group(fit.output, s)))
        .collect();
    let n = pairs.len() as f64;
    if pairs.iter().all(|&(p, t)| p > 0.0 && t > 0.0) {
        pairs.iter().map(|&(p, t)| (p.ln() - t.ln()).powi(2)).sum::<f64>() / n
    } else {
        pairs.iter().map(|&(p, t)| (p - t).powi(2)).sum::<f64>() / n
    }
}

fn refit(expr: Expression, fit: FitData<'_>) -> Expression {
    if matches!(expr, E::Sum { .. }) {
        return expr;
    }
    let (_, rest) = split_coefficient(expr.clone());
    let logs: Vec<f64> = fit
        .samples
        .iter()
        .filter_map(|s| {
            let r = rest.eval(s);
            let t = evaluate_group(fit.output, s);
            (r > 0.0 && t > 0.0 && r.is_finite() && t.is_finite()).then(|| t.ln() - r.ln())
        })
        .collect();
    if logs.is_empty() {
        return expr;
    }
    let c = (logs.iter().sum::<f64>() / logs.len() as f64).exp();
    normalize(E::Product {
        factors: vec![cnst(c), rest],
    })
}

fn snap_value(x: f64, tol: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= tol {
        r
    } else {
        x
    }
}

fn snap(expr: Expression, tol: f64) -> Expression {
    match expr {
        E::Power { base, exponent } => pow(snap(*base, tol), snap_value(exponent, tol)),
        E::Sum { terms } => E::Sum {
            terms: terms
                .into_iter()
                .map(|t| match t {
                    E::Const { .. } => t,
                    other => {
                        let (k, rest) = split_coefficient(other);
                        scale(snap_value(k, tol), snap(rest, tol))
                    }
                })
                .collect(),
        },
        E::Product { factors } => E::Product {
            factors: factors.into_iter().map(|f| snap(f, tol)).collect(),
        },
        E::Exp { arg } => E::Exp {
            arg: Box::new(snap(*arg, tol)),
        },
        E::Log { arg } => E::Log {
            arg: Box::new(snap(*arg, tol)),
        },
        E::Sigmoid { arg } => E::Sigmoid {
            arg: Box::new(snap(*arg, tol)),
        },
        leaf => leaf,
    }
}

/// Splits `k · rest`; expressions without a leading constant have k = 1.
fn split_coefficient(expr: Expression) -> (f64, Expression) {
    match expr {
        E::Const { value } => (value, cnst(1.0)),
        E::Product { mut factors } if factors.first().and_then(Expression::as_const).is_some() => {
            let k = factors.remove(0).as_const().expect("checked");
            let rest = match factors.len() {
                0 => cnst(1.0),
                1 => factors.pop().expect("one factor"),
                _ => E::Product { factors },
            };
            (k, rest)
        }
        other => (1.0, other),
    }
}

fn scale(k: f64, expr: Expression) -> Expression {
    if k == 0.0 {
        return cnst(0.0);
    }
    if k == 1.0 {
        return expr;
    }
    match expr {
        E::Const { value } => cnst(k * value),
        E::Product { mut factors } => {
            factors.insert(0, cnst(k));
            E::Product { factors }
        }
        other => E::Product {
            factors: vec![cnst(k), other],
        },
    }
}

/// Bottom-up rewriting to a canonical form: flattened sums and products,
/// folded constants, merged like terms and exp/log/power identities.
fn normalize(expr: Expression) -> Expression {
    match expr {
        E::Var { group } if group.is_constant() => cnst(1.0),
        E::Const { .. } | E::Var { .. } => expr,
        E::Sum { terms } => normalize_sum(terms.into_iter().map(normalize).collect()),
        E::Product { factors } => normalize_product(factors.into_iter().map(normalize).collect()),
        E::Power { base, exponent } => normalize_power(normalize(*base), exponent),
        E::Exp { arg } => normalize_exp(normalize(*arg)),
        E::Log { arg } => normalize_log(normalize(*arg)),
        E::Sigmoid { arg } => match normalize(*arg) {
            E::Const { value } => cnst(sigmoid(value)),
            a => E::Sigmoid { arg: Box::new(a) },
        },
    }
}

fn normalize_sum(terms: Vec<Expression>) -> Expression {
    let mut flat = Vec::new();
    for t in terms {
        match t {
            E::Sum { terms } => flat.extend(terms),
            other => flat.push(other),
        }
    }
    let mut constant = 0.0;
    let mut like: Vec<(f64, Expression)> = Vec::new();
    for t in flat {
        if let E::Const { value } = t {
            constant += value;
            continue;
        }
        let (k, base) = split_coefficient(t);
        match like.iter_mut().find(|(_, b)| *b == base) {
            Some(slot) => slot.0 += k,
            None => like.push((k, base)),
        }
    }
    let mut out = Vec::new();
    if constant != 0.0 {
        out.push(cnst(constant));
    }
    out.extend(like.into_iter().filter(|(k, _)| *k != 0.0).map(|(k, b)| scale(k, b)));
    match out.len() {
        0 => cnst(0.0),
        1 => out.pop().expect("one term"),
        _ => E::Sum { terms: out },
    }
}

fn normalize_product(factors: Vec<Expression>) -> Expression {
    let mut flat = Vec::new();
    for f in factors {
        match f {
            E::Product { factors } => flat.extend(factors),
            other => flat.push(other),
        }
    }
    let mut constant = 1.0;
    let mut powers: Vec<(Expression, f64)> = Vec::new();
    let mut others: Vec<Expression> = Vec::new();
    for f in flat {
        match f {
            E::Const { value } => constant *= value,
            E::Power { base, exponent } => {
                let base = *base;
                match powers.iter_mut().find(|(b, _)| *b == base) {
                    Some(slot) => slot.1 += exponent,
                    None => powers.push((base, exponent)),
                }
            }
            f if f.is_positive_valued() => match powers.iter_mut().find(|(b, _)| *b == f) {
                Some(slot) => slot.1 += 1.0,
                None => powers.push((f, 1.0)),
            },
            f => others.push(f),
        }
    }
    if constant == 0.0 {
        return cnst(0.0);
    }
    let mut rest: Vec<Expression> = powers
        .into_iter()
        .filter(|(_, k)| *k != 0.0)
        .map(|(b, k)| normalize_power(b, k))
        .collect();
    rest.extend(others);
    if rest.len() == 1 && constant != 1.0 {
        if let E::Sum { terms } = &rest[0] {
            let scaled = terms.iter().cloned().map(|t| normalize_product(vec![cnst(constant), t])).collect();
            return normalize_sum(scaled);
        }
    }
    let mut out = Vec::new();
    if constant != 1.0 || rest.is_empty() {
        out.push(cnst(constant));
    }
    out.extend(rest);
    match out.len() {
        1 => out.pop().expect("one factor"),
        _ => E::Product { factors: out },
    }
}

fn normalize_power(base: Expression, k: f64) -> Expression {
    if k == 0.0 {
        return cnst(1.0);
    }
    match base {
        E::Const { value } => cnst(value.abs().powf(k)),
        E::Power { base, exponent } => normalize_power(*base, exponent * k),
        E::Product { factors } => normalize_product(factors.into_iter().map(|f| normalize_power(f, k)).collect()),
        E::Exp { arg } => normalize_exp(normalize_product(vec![cnst(k), *arg])),
        b if k == 1.0 && b.is_positive_valued() => b,
        b => pow(b, k),
    }
}

fn normalize_exp(arg: Expression) -> Expression {
    match arg {
        E::Const { value } => cnst(guarded_exp(value)),
        E::Log { arg } => normalize_power(*arg, 1.0),
        E::Sum { terms } => {
            let mut factors = Vec::new();
            let mut rest = Vec::new();
            for t in terms {
                match exp_of_term(t) {
                    Ok(f) => factors.push(f),
                    Err(t) => rest.push(t),
                }
            }
            if factors.is_empty() {
                return E::Exp {
                    arg: Box::new(E::Sum { terms: rest }),
                };
            }
            if !rest.is_empty() {
                factors.push(normalize_exp(normalize_sum(rest)));
            }
            normalize_product(factors)
        }
        other => match exp_of_term(other) {
            Ok(f) => normalize(f),
            Err(a) => E::Exp { arg: Box::new(a) },
        },
    }
}

/// exp(c) → constant, exp(k·ln|x|) → |x|^k.
fn exp_of_term(term: Expression) -> Result<Expression, Expression> {
    match term {
        E::Const { value } => Ok(cnst(guarded_exp(value))),
        E::Log { arg } => Ok(normalize_power(*arg, 1.0)),
        E::Product { factors } if factors.len() == 2 => match (&factors[0], &factors[1]) {
            (E::Const { value }, E::Log { arg }) => Ok(normalize_power((**arg).clone(), *value)),
            _ => Err(E::Product { factors }),
        },
        other => Err(other),
    }
}

fn normalize_log(arg: Expression) -> Expression {
    match arg {
        E::Const { value } => cnst(guarded_ln_abs(value)),
        E::Power { base, exponent } => normalize_product(vec![cnst(exponent), normalize_log(*base)]),
        E::Product { factors } => normalize_sum(factors.into_iter().map(normalize_log).collect()),
        E::Exp { arg } => *arg,
        other => E::Log { arg: Box::new(other) },
    }
}

fn fmt_number(f: &mut fmt::Formatter<'_>, x: f64) -> fmt::Result {
    match f.precision() {
        Some(p) => {
            let s = format!("{x:.p$}");
            let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
            f.write_str(&s)
        }
        None => write!(f, "{x}"),
    }
}

fn fmt_group(f: &mut fmt::Formatter<'_>, g: &PiGroup, bracket: bool) -> fmt::Result {
    let s = g.to_string();
    if bracket && (s.contains('/') || s.contains('*')) {
        write!(f, "({s})")
    } else {
        f.write_str(&s)
    }
}

impl Expression {
    fn fmt_atom(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            E::Var { group } => fmt_group(f, group, true),
            E::Const { value } if *value < 0.0 => {
                f.write_str("(")?;
                fmt::Display::fmt(self, f)?;
                f.write_str(")")
            }
            E::Const { .. } | E::Exp { .. } | E::Log { .. } | E::Sigmoid { .. } => fmt::Display::fmt(self, f),
            _ => {
                f.write_str("(")?;
                fmt::Display::fmt(self, f)?;
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            E::Const { value } => fmt_number(f, *value),
            E::Var { group } => fmt_group(f, group, false),
            E::Sum { terms } => {
                for (i, t) in terms.iter().enumerate() {
                    let (k, rest) = split_coefficient(t.clone());
                    if i > 0 {
                        f.write_str(if k < 0.0 { " - " } else { " + " })?;
                    } else if k < 0.0 {
                        f.write_str("-")?;
                    }
                    match (t, k.abs() == 1.0) {
                        (E::Const { value }, _) => fmt_number(f, value.abs())?,
                        (_, true) => rest.fmt_atom_in_sum(f)?,
                        (_, false) => {
                            fmt_number(f, k.abs())?;
                            f.write_str("*")?;
                            rest.fmt_factor(f)?;
                        }
                    }
                }
                Ok(())
            }
            E::Product { factors } => {
                for (i, x) in factors.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    x.fmt_factor(f)?;
                }
                Ok(())
            }
            E::Power { base, exponent } => {
                match base.as_ref() {
                    E::Var { group } => fmt_group(f, group, true)?,
                    E::Exp { .. } | E::Log { .. } | E::Sigmoid { .. } => base.fmt(f)?,
                    b => {
                        f.write_str("|")?;
                        b.fmt(f)?;
                        f.write_str("|")?;
                    }
                }
                f.write_str("^")?;
                if *exponent < 0.0 {
                    f.write_str("(")?;
                    fmt_number(f, *exponent)?;
                    f.write_str(")")
                } else {
                    fmt_number(f, *exponent)
                }
            }
            E::Exp { arg } => {
                f.write_str("exp(")?;
                arg.fmt(f)?;
                f.write_str(")")
            }
            E::Log { arg } => {
                f.write_str("ln|")?;
                arg.fmt(f)?;
                f.write_str("|")
            }
            E::Sigmoid { arg } => {
                f.write_str("sigmoid(")?;
                arg.fmt(f)?;
                f.write_str(")")
            }
        }
    }
}

impl Expression {
    fn fmt_factor(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            E::Sum { .. } => {
                f.write_str("(")?;
                fmt::Display::fmt(self, f)?;
                f.write_str(")")
            }
            E::Product { .. } | E::Power { .. } => fmt::Display::fmt(self, f),
            _ => self.fmt_atom(f),
        }
    }

    fn fmt_atom_in_sum(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            E::Sum { .. } => {
                f.write_str("(")?;
                fmt::Display::fmt(self, f)?;
                f.write_str(")")
            }
            _ => fmt::Display::fmt(self, f),
        }
    }
}

/// `Dl = coefficient · ∏ variableᵏ` in terms of the raw variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub coefficient: f64,
    pub exponents: IndexMap<String, f64>,
}

impl PowerLaw {
    /// Combines a power-law expression for an output group with the group's
    /// normalizer.
    pub fn from_expression(expr: &Expression, output: &PiGroup) -> Option<PowerLaw> {
        let (coefficient, terms) = expr.power_law_terms()?;
        let mut exponents: IndexMap<String, f64> =
            output.normalizer().into_iter().map(|(n, e)| (n, e as f64)).collect();
        for (g, k) in terms {
            for (name, &e) in &g.exponents {
                *exponents.entry(name.clone()).or_insert(0.0) += k * e as f64;
            }
        }
        exponents.retain(|_, e| *e != 0.0);
        Some(PowerLaw {
            coefficient,
            exponents,
        })
    }

    pub fn exponent(&self, name: &str) -> f64 {
        self.exponents.get(name).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, sample: &Sample) -> f64 {
        self.exponents.iter().fold(self.coefficient, |acc, (name, &k)| {
            let x = sample
                .value_of(name)
                .unwrap_or_else(|| panic!("sample has no variable `{name}`"));
            acc * x.powf(k)
        })
    }
}

impl fmt::Display for PowerLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_number(f, self.coefficient)?;
        for (name, &k) in &self.exponents {
            if k == 0.0 {
                continue;
            }
            write!(f, "*{name}")?;
            if k != 1.0 {
                f.write_str("^(")?;
                fmt_number(f, k)?;
                f.write_str(")")?;
            }
        }
        Ok(())
    }
}

/// How a power law was obtained from an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerLawSource {
    /// The expression is itself a product of powers.
    Structural,
    /// Log-log least squares of the expression over the samples.
    Fitted,
}

/// Power law `Dl = C·∏ xᵏ` for an expression predicting `output`.
///
/// Pure power-law expressions are read off directly. Otherwise the
/// expression's `Dl` predictions are fitted in log space over `variables`;
/// fitted exponents within `snap_tol` of an integer are snapped and the
/// coefficient is refitted to the observed `Dl`.
pub fn extract_power_law(
    expr: &Expression,
    output: &PiGroup,
    samples: &[Sample],
    variables: &[&str],
    snap_tol: f64,
) -> Option<(PowerLaw, PowerLawSource)> {
    if let Some(law) = PowerLaw::from_expression(expr, output) {
        return Some((law, PowerLawSource::Structural));
    }
    let values: Vec<f64> = samples.iter().map(|s| expr.eval(s) * output.normalizer_value(s)).collect();
    let (mut law, _) = fit_power_law(samples, &values, variables)?;
    for k in law.exponents.values_mut() {
        *k = snap_value(*k, snap_tol);
    }
    law.exponents.retain(|_, k| *k != 0.0);
    let output_name = output.output.as_deref()?;
    let logs: Vec<f64> = samples
        .iter()
        .filter_map(|s| {
            let y = s.value_of(output_name)?;
            let unit = PowerLaw {
                coefficient: 1.0,
                exponents: law.exponents.clone(),
            }
            .eval(s);
            (y > 0.0 && unit > 0.0).then(|| y.ln() - unit.ln())
        })
        .collect();
    if !logs.is_empty() {
        law.coefficient = (logs.iter().sum::<f64>() / logs.len() as f64).exp();
    }
    Some((law, PowerLawSource::Fitted))
}

/// Least-squares power law through positive `(sample, value)` pairs in log
/// space over the named variables. Returns the law and the R² of the log fit.
pub fn fit_power_law(samples: &[Sample], values: &[f64], variables: &[&str]) -> Option<(PowerLaw, f64)> {
    let p = variables.len() + 1;
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (s, &y) in samples.iter().zip(values) {
        if !(y > 0.0 && y.is_finite()) {
            continue;
        }
        let mut x = vec![1.0];
        for v in variables {
            let xv = s.value_of(v)?;
            if xv <= 0.0 {
                return None;
            }
            x.push(xv.ln());
        }
        rows.push((x, y.ln()));
    }
    if rows.len() < p {
        return None;
    }
    let mut ata = vec![vec![0.0; p]; p];
    let mut atb = vec![0.0; p];
    for (x, y) in &rows {
        for i in 0..p {
            atb[i] += x[i] * y;
            for j in 0..p {
                ata[i][j] += x[i] * x[j];
            }
        }
    }
    let beta = solve(ata, atb)?;
    let mean = rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (x, y) in &rows {
        let fit: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
        ss_res += (y - fit).powi(2);
        ss_tot += (y - mean).powi(2);
    }
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 };
    let law = PowerLaw {
        coefficient: beta[0].exp(),
        exponents: variables.iter().zip(&beta[1..]).map(|(v, &k)| (v.to_string(), k)).collect(),
    };
    Some((law, r2))
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-12 * scale.max(1.0) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}
