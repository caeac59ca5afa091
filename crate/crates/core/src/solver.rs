//! Search over a [`CopModel`].
//!
//! [`solve_exact`] is a depth-first branch and bound with a trail. Every
//! constraint keeps counters of its assigned variables so propagation is
//! incremental; undoing a trail entry reverts the counters. The lower bound
//! is the constant offset plus the reconstruction errors already decided.
//!
//! [`lns_minimize`] repeatedly freezes part of the incumbent and re-solves
//! the rest with a fail budget.

use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{check_assignment, Assignment, Constraint, CopModel, VarId, VarKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("the model has no feasible assignment")]
    Infeasible,
    #[error("no feasible starting point found within {0} failures")]
    NoSeed(u64),
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct SearchConfig {
    /// Percentage of active decoder variables kept at 1 per iteration.
    pub alpha: u32,
    /// Percentage of inactive encoder variables kept at 0 per iteration.
    pub beta: u32,
    pub iterations: u32,
    /// Failures allowed per subproblem.
    pub fail_limit: u64,
    #[serde(serialize_with = "secs")]
    pub time_limit: Duration,
    pub seed: u64,
}

fn secs<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            alpha: 70,
            beta: 90,
            iterations: 500,
            fail_limit: 10_000,
            time_limit: Duration::from_secs(600),
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if self.alpha > 100 || self.beta > 100 {
            return Err(SolveError::InvalidConfig("alpha and beta are percentages in 0..=100".into()));
        }
        if self.iterations == 0 || self.fail_limit == 0 {
            return Err(SolveError::InvalidConfig("iterations and fail_limit must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    /// The subproblem was explored exhaustively.
    Complete,
    FailLimit,
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub assignment: Assignment,
    pub objective: usize,
    pub iteration_found: u32,
    pub proven_optimal: bool,
}

/// Result of one exact search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactOutcome {
    /// Best completion strictly below the bound, if any.
    pub best: Option<(Assignment, usize)>,
    pub status: SearchStatus,
    pub fails: u64,
    pub nodes: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct ExactLimits {
    pub fail_limit: u64,
    pub deadline: Option<Instant>,
}

impl ExactLimits {
    pub fn unlimited() -> Self {
        Self {
            fail_limit: u64::MAX,
            deadline: None,
        }
    }
}

// ---------------------------------------------------------------------------
// Compiled form
// ---------------------------------------------------------------------------

const UNSET: i8 = -1;

struct Iff {
    target: u32,
    sources: Vec<u32>,
}

struct Linear {
    /// Positive-coefficient variables, largest coefficient first.
    pos: Vec<(i64, u32)>,
    /// Negative-coefficient variables, most negative first.
    neg: Vec<(i64, u32)>,
}

struct Compiled {
    n: usize,
    iffs: Vec<Iff>,
    alos: Vec<Vec<u32>>,
    lins: Vec<Linear>,
    iff_as_target: Vec<Vec<u32>>,
    iff_as_source: Vec<Vec<u32>>,
    partners: Vec<Vec<u32>>,
    alo_of: Vec<Vec<u32>>,
    lin_of: Vec<Vec<(u32, i64)>>,
    /// For reconstruction variables, the value that costs nothing.
    free_value: Vec<Option<bool>>,
    offset: usize,
    order: Vec<u32>,
}

impl Compiled {
    fn new(model: &CopModel) -> Self {
        let n = model.num_vars();
        let f = |v: VarId| model.flat(v) as u32;
        let mut c = Compiled {
            n,
            iffs: Vec::new(),
            alos: Vec::new(),
            lins: Vec::new(),
            iff_as_target: vec![Vec::new(); n],
            iff_as_source: vec![Vec::new(); n],
            partners: vec![Vec::new(); n],
            alo_of: vec![Vec::new(); n],
            lin_of: vec![Vec::new(); n],
            free_value: vec![None; n],
            offset: model.constant_offset,
            order: Vec::new(),
        };
        for con in &model.constraints {
            match con {
                Constraint::IffOr { target, sources } => {
                    let id = c.iffs.len() as u32;
                    let t = f(*target);
                    let sources: Vec<u32> = sources.iter().map(|s| f(*s)).collect();
                    c.iff_as_target[t as usize].push(id);
                    for &s in &sources {
                        c.iff_as_source[s as usize].push(id);
                    }
                    c.iffs.push(Iff { target: t, sources });
                }
                Constraint::AtMostOnePair(a, b) => {
                    let (a, b) = (f(*a), f(*b));
                    c.partners[a as usize].push(b);
                    c.partners[b as usize].push(a);
                }
                Constraint::AtLeastOne(xs) => {
                    let id = c.alos.len() as u32;
                    let xs: Vec<u32> = xs.iter().map(|x| f(*x)).collect();
                    for &x in &xs {
                        c.alo_of[x as usize].push(id);
                    }
                    c.alos.push(xs);
                }
                Constraint::LinearLe { terms } => {
                    let id = c.lins.len() as u32;
                    let mut pos = Vec::new();
                    let mut neg = Vec::new();
                    for &(k, v) in terms {
                        let v = f(v);
                        if k != 0 {
                            c.lin_of[v as usize].push((id, k));
                        }
                        if k > 0 {
                            pos.push((k, v));
                        } else if k < 0 {
                            neg.push((k, v));
                        }
                    }
                    pos.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
                    neg.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
                    c.lins.push(Linear { pos, neg });
                }
            }
        }
        for (i, r) in model.rf.iter().enumerate() {
            c.free_value[f(VarId::rf(i)) as usize] = Some(r.in_kb);
        }
        let degrees = model.degrees();
        let rank = |v: usize| match model.var(v).kind {
            VarKind::Dc => 0,
            VarKind::Ec => 1,
            VarKind::Rf => 2,
        };
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_by(|&a, &b| {
            let (a, b) = (a as usize, b as usize);
            rank(a)
                .cmp(&rank(b))
                .then(degrees[b].cmp(&degrees[a]))
                .then(a.cmp(&b))
        });
        c.order = order;
        c
    }
}

struct State<'a> {
    c: &'a Compiled,
    val: Vec<i8>,
    iff_true: Vec<u32>,
    iff_false: Vec<u32>,
    alo_true: Vec<u32>,
    alo_false: Vec<u32>,
    lin_true_sum: Vec<i64>,
    lin_neg_open: Vec<i64>,
    cost: usize,
    trail: Vec<u32>,
    head: usize,
}

impl<'a> State<'a> {
    fn new(c: &'a Compiled) -> Self {
        Self {
            c,
            val: vec![UNSET; c.n],
            iff_true: vec![0; c.iffs.len()],
            iff_false: vec![0; c.iffs.len()],
            alo_true: vec![0; c.alos.len()],
            alo_false: vec![0; c.alos.len()],
            lin_true_sum: vec![0; c.lins.len()],
            lin_neg_open: c.lins.iter().map(|l| l.neg.iter().map(|(k, _)| k).sum()).collect(),
            cost: c.offset,
            trail: Vec::new(),
            head: 0,
        }
    }

    fn lin_min(&self, l: usize) -> i64 {
        self.lin_true_sum[l] + self.lin_neg_open[l]
    }

    /// Records `v = x`. False on a clash with an existing value.
    fn assign(&mut self, v: u32, x: bool) -> bool {
        let cur = self.val[v as usize];
        if cur != UNSET {
            return (cur == 1) == x;
        }
        let c = self.c;
        self.val[v as usize] = x as i8;
        self.trail.push(v);
        for &i in &c.iff_as_source[v as usize] {
            if x {
                self.iff_true[i as usize] += 1;
            } else {
                self.iff_false[i as usize] += 1;
            }
        }
        for &i in &c.alo_of[v as usize] {
            if x {
                self.alo_true[i as usize] += 1;
            } else {
                self.alo_false[i as usize] += 1;
            }
        }
        for &(l, k) in &c.lin_of[v as usize] {
            if k < 0 {
                self.lin_neg_open[l as usize] -= k;
            }
            if x {
                self.lin_true_sum[l as usize] += k;
            }
        }
        if c.free_value[v as usize].is_some_and(|free| free != x) {
            self.cost += 1;
        }
        true
    }

    fn undo_to(&mut self, mark: usize) {
        let c = self.c;
        while self.trail.len() > mark {
            let v = self.trail.pop().expect("nonempty trail");
            let x = self.val[v as usize] == 1;
            self.val[v as usize] = UNSET;
            for &i in &c.iff_as_source[v as usize] {
                if x {
                    self.iff_true[i as usize] -= 1;
                } else {
                    self.iff_false[i as usize] -= 1;
                }
            }
            for &i in &c.alo_of[v as usize] {
                if x {
                    self.alo_true[i as usize] -= 1;
                } else {
                    self.alo_false[i as usize] -= 1;
                }
            }
            for &(l, k) in &c.lin_of[v as usize] {
                if k < 0 {
                    self.lin_neg_open[l as usize] += k;
                }
                if x {
                    self.lin_true_sum[l as usize] -= k;
                }
            }
            if c.free_value[v as usize].is_some_and(|free| free != x) {
                self.cost -= 1;
            }
        }
        self.head = self.head.min(mark);
    }

    fn check_iff(&mut self, i: usize) -> bool {
        let c = self.c;
        let iff = &c.iffs[i];
        let len = iff.sources.len() as u32;
        if self.iff_true[i] > 0 {
            return self.assign(iff.target, true);
        }
        if self.iff_false[i] == len {
            return self.assign(iff.target, false);
        }
        match self.val[iff.target as usize] {
            0 => {
                for &s in &iff.sources {
                    if !self.assign(s, false) {
                        return false;
                    }
                }
                true
            }
            1 if self.iff_false[i] + 1 == len => {
                let s = *iff
                    .sources
                    .iter()
                    .find(|&&s| self.val[s as usize] == UNSET)
                    .expect("one open source");
                self.assign(s, true)
            }
            _ => true,
        }
    }

    fn check_alo(&mut self, i: usize) -> bool {
        let c = self.c;
        let xs = &c.alos[i];
        let len = xs.len() as u32;
        if self.alo_true[i] > 0 {
            return true;
        }
        if self.alo_false[i] == len {
            return false;
        }
        if self.alo_false[i] + 1 == len {
            let x = *xs.iter().find(|&&x| self.val[x as usize] == UNSET).expect("one open");
            return self.assign(x, true);
        }
        true
    }

    fn check_lin(&mut self, l: usize) -> bool {
        let c = self.c;
        let min = self.lin_min(l);
        if min > 0 {
            return false;
        }
        for &(k, v) in &c.lins[l].pos {
            if min + k <= 0 {
                break;
            }
            if self.val[v as usize] == UNSET && !self.assign(v, false) {
                return false;
            }
        }
        for &(k, v) in &c.lins[l].neg {
            if min - k <= 0 {
                break;
            }
            if self.val[v as usize] == UNSET && !self.assign(v, true) {
                return false;
            }
        }
        true
    }

    /// Runs every constraint once; used at the root.
    fn propagate_all(&mut self) -> bool {
        for i in 0..self.c.iffs.len() {
            if !self.check_iff(i) {
                return false;
            }
        }
        for i in 0..self.c.alos.len() {
            if !self.check_alo(i) {
                return false;
            }
        }
        for l in 0..self.c.lins.len() {
            if !self.check_lin(l) {
                return false;
            }
        }
        self.propagate()
    }

    /// Processes trail entries not yet propagated.
    fn propagate(&mut self) -> bool {
        let c = self.c;
        while self.head < self.trail.len() {
            let v = self.trail[self.head] as usize;
            self.head += 1;
            let x = self.val[v] == 1;
            for &i in &c.iff_as_target[v] {
                if !self.check_iff(i as usize) {
                    return false;
                }
            }
            for &i in &c.iff_as_source[v] {
                if !self.check_iff(i as usize) {
                    return false;
                }
            }
            if x {
                for &p in &c.partners[v] {
                    if !self.assign(p, false) {
                        return false;
                    }
                }
            } else {
                for &i in &c.alo_of[v] {
                    if !self.check_alo(i as usize) {
                        return false;
                    }
                }
            }
            for &(l, k) in &c.lin_of[v] {
                // only a larger minimum can force anything new
                if ((x && k > 0) || (!x && k < 0)) && !self.check_lin(l as usize) {
                    return false;
                }
            }
        }
        true
    }

    fn snapshot(&self) -> Assignment {
        Assignment {
            values: self.val.iter().map(|&v| v == 1).collect(),
        }
    }
}

struct Frame {
    var: u32,
    values: [bool; 2],
    next: usize,
    mark: usize,
    scan: usize,
}

/// Exhaustive branch and bound below `bound` with `fixed` values imposed
/// (given by flat index). `hint` supplies preferred values per variable.
pub fn solve_exact(
    model: &CopModel,
    fixed: &[(usize, bool)],
    bound: usize,
    hint: Option<&Assignment>,
    limits: ExactLimits,
) -> ExactOutcome {
    let compiled = Compiled::new(model);
    solve_compiled(&compiled, fixed, bound, hint, limits)
}

fn solve_compiled(
    c: &Compiled,
    fixed: &[(usize, bool)],
    bound: usize,
    hint: Option<&Assignment>,
    limits: ExactLimits,
) -> ExactOutcome {
    let mut st = State::new(c);
    let mut out = ExactOutcome {
        best: None,
        status: SearchStatus::Complete,
        fails: 0,
        nodes: 0,
    };
    let mut bound = bound;
    for &(v, x) in fixed {
        if !st.assign(v as u32, x) {
            return out;
        }
    }
    if !st.propagate_all() || st.cost >= bound {
        out.fails = 1;
        return out;
    }
    let preferred = |v: u32| hint.map(|h| h.values[v as usize]).unwrap_or(false);
    let mut stack: Vec<Frame> = Vec::new();
    let mut last_conflict: Option<u32> = None;
    let mut scan = 0usize;
    'search: loop {
        out.nodes += 1;
        if out.nodes.is_multiple_of(1024) && limits.deadline.is_some_and(|d| Instant::now() >= d) {
            out.status = SearchStatus::TimeLimit;
            break;
        }
        let next = last_conflict
            .filter(|&v| st.val[v as usize] == UNSET)
            .or_else(|| {
                while scan < c.order.len() && st.val[c.order[scan] as usize] != UNSET {
                    scan += 1;
                }
                c.order.get(scan).copied()
            });
        match next {
            None => {
                debug_assert!(st.cost < bound);
                bound = st.cost;
                out.best = Some((st.snapshot(), st.cost));
                if bound <= c.offset {
                    // nothing below the constant part exists
                    break 'search;
                }
            }
            Some(v) => {
                let first = preferred(v);
                stack.push(Frame {
                    var: v,
                    values: [first, !first],
                    next: 0,
                    mark: st.trail.len(),
                    scan,
                });
            }
        }
        loop {
            let Some(top) = stack.last_mut() else {
                break 'search;
            };
            st.undo_to(top.mark);
            scan = top.scan;
            if top.next == 2 {
                stack.pop();
                continue;
            }
            let x = top.values[top.next];
            top.next += 1;
            let var = top.var;
            if st.assign(var, x) && st.propagate() && st.cost < bound {
                continue 'search;
            }
            out.fails += 1;
            last_conflict = Some(var);
            if out.fails >= limits.fail_limit {
                out.status = SearchStatus::FailLimit;
                break 'search;
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Seeding
// ---------------------------------------------------------------------------

/// A feasible starting assignment: per input predicate, the least corrupt
/// decoder that keeps the selection feasible, then an exact search with a
/// small budget if the greedy pass fails.
pub fn initial_solution(model: &CopModel, fail_limit: u64, deadline: Option<Instant>) -> Result<Assignment, SolveError> {
    if let Some(a) = greedy_seed(model) {
        return Ok(a);
    }
    log::debug!("greedy seed infeasible, falling back to exact search");
    let out = solve_exact(
        model,
        &[],
        usize::MAX,
        None,
        ExactLimits {
            fail_limit,
            deadline,
        },
    );
    match out.best {
        Some((a, _)) => Ok(a),
        None if out.status == SearchStatus::Complete => Err(SolveError::Infeasible),
        None => Err(SolveError::NoSeed(out.fails)),
    }
}

fn greedy_seed(model: &CopModel) -> Option<Assignment> {
    let mut by_head: std::collections::BTreeMap<&str, Vec<usize>> = Default::default();
    for (j, d) in model.dc.iter().enumerate() {
        by_head.entry(&d.head).or_default().push(j);
    }
    let mut chosen: Vec<usize> = Vec::new();
    for members in by_head.values_mut() {
        members.sort_by(|&a, &b| {
            let (da, db) = (&model.dc[a], &model.dc[b]);
            da.corruption
                .cmp(&db.corruption)
                .then(db.true_count.cmp(&da.true_count))
                .then(a.cmp(&b))
        });
        let pick = members.iter().copied().find(|&j| {
            let mut trial = chosen.clone();
            trial.push(j);
            partially_feasible(model, &trial)
        });
        if let Some(j) = pick {
            chosen.push(j);
        }
    }
    let a = Assignment::from_decoders(model, &chosen);
    check_assignment(model, &a).is_empty().then_some(a)
}

/// Feasibility of a decoder selection ignoring coverage.
fn partially_feasible(model: &CopModel, decoders: &[usize]) -> bool {
    let a = Assignment::from_decoders(model, decoders);
    model
        .constraints
        .iter()
        .filter(|c| !matches!(c, Constraint::AtLeastOne(_)))
        .all(|c| c.holds(|v| a.get(model, v)))
}

// ---------------------------------------------------------------------------
// Large neighbourhood search
// ---------------------------------------------------------------------------

/// One improving step.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct TraceEntry {
    pub iteration: u32,
    pub objective: usize,
    pub elapsed_ms: u128,
    pub selected_ec: usize,
    pub selected_dc: usize,
}

impl TraceEntry {
    pub fn tsv(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.iteration, self.objective, self.elapsed_ms, self.selected_ec, self.selected_dc
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LnsOutcome {
    pub solution: Solution,
    pub trace: Vec<TraceEntry>,
    pub iterations_run: u32,
    pub fails: u64,
}

const STAGNATION: u32 = 25;

fn percent_of(p: u32, n: usize) -> usize {
    (p as usize * n + 50) / 100
}

/// LNS from the greedy seed. `observer` sees every improving step,
/// including the seed as iteration 0.
pub fn lns_minimize(
    model: &CopModel,
    config: &SearchConfig,
    observer: &mut dyn FnMut(&TraceEntry),
) -> Result<LnsOutcome, SolveError> {
    config.validate()?;
    let start = Instant::now();
    let deadline = start.checked_add(config.time_limit);
    let compiled = Compiled::new(model);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let seed = initial_solution(model, config.fail_limit, deadline)?;
    let objective = crate::model::raw_objective(model, &seed);
    let entry = |it: u32, a: &Assignment, objective: usize| TraceEntry {
        iteration: it,
        objective,
        elapsed_ms: start.elapsed().as_millis(),
        selected_ec: a.selected(model, VarKind::Ec).len(),
        selected_dc: a.selected(model, VarKind::Dc).len(),
    };
    let mut trace = vec![entry(0, &seed, objective)];
    observer(&trace[0]);
    let mut best = Solution {
        assignment: seed,
        objective,
        iteration_found: 0,
        proven_optimal: false,
    };
    let mut since_improvement = 0u32;
    let mut iterations_run = 0;
    let mut fails = 0;
    let dc_flat: Vec<usize> = (0..model.dc.len()).map(|j| model.flat(VarId::dc(j))).collect();
    let ec_flat: Vec<usize> = (0..model.ec.len()).map(|i| model.flat(VarId::ec(i))).collect();
    while best.objective > 0 && iterations_run < config.iterations {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
        iterations_run += 1;
        let alpha = if since_improvement >= STAGNATION {
            since_improvement = 0;
            config.alpha / 2
        } else {
            config.alpha
        };
        let active: Vec<usize> = dc_flat.iter().copied().filter(|&v| best.assignment.values[v]).collect();
        let inactive: Vec<usize> = ec_flat.iter().copied().filter(|&v| !best.assignment.values[v]).collect();
        let mut fixed: Vec<(usize, bool)> = Vec::new();
        let k = percent_of(alpha, active.len());
        fixed.extend(sample(&mut rng, active.len(), k).iter().map(|i| (active[i], true)));
        let k = percent_of(config.beta, inactive.len());
        fixed.extend(sample(&mut rng, inactive.len(), k).iter().map(|i| (inactive[i], false)));
        fixed.sort_unstable();
        let out = solve_compiled(
            &compiled,
            &fixed,
            best.objective,
            Some(&best.assignment),
            ExactLimits {
                fail_limit: config.fail_limit,
                deadline,
            },
        );
        fails += out.fails;
        if let Some((a, objective)) = out.best {
            debug_assert!(check_assignment(model, &a).is_empty());
            best = Solution {
                assignment: a,
                objective,
                iteration_found: iterations_run,
                proven_optimal: false,
            };
            since_improvement = 0;
            let e = entry(iterations_run, &best.assignment, objective);
            observer(&e);
            trace.push(e);
        } else {
            since_improvement += 1;
        }
        if fixed.is_empty() && out.status == SearchStatus::Complete {
            best.proven_optimal = true;
            break;
        }
    }
    if best.objective == model.constant_offset {
        best.proven_optimal = true;
    }
    Ok(LnsOutcome {
        solution: best,
        trace,
        iterations_run,
        fails,
    })
}

/// Runs `workers` independent searches with seeds `seed, seed+1, ...` and
/// keeps the best (lowest objective, then lowest worker index).
pub fn lns_portfolio(model: &CopModel, config: &SearchConfig, workers: usize) -> Result<LnsOutcome, SolveError> {
    let workers = workers.max(1);
    let results: Vec<Result<LnsOutcome, SolveError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let cfg = SearchConfig {
                    seed: config.seed.wrapping_add(w as u64),
                    ..config.clone()
                };
                s.spawn(move || lns_minimize(model, &cfg, &mut |_| {}))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("search worker panicked")).collect()
    });
    let mut best: Option<LnsOutcome> = None;
    let mut first_err = None;
    for r in results {
        match r {
            Ok(o) => {
                if best.as_ref().is_none_or(|b| o.solution.objective < b.solution.objective) {
                    best = Some(o);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one worker"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::{generate_pool, CandidateClause, CandidateKind, CandidatePool, GenerationConfig};
    use crate::kb::{Fact, KnowledgeBase};
    use crate::logic::{self, Alp, FactIndex};
    use crate::model::{build_model, loss_consistency, objective_value, raw_objective};
    use crate::pruning::{prune, PruneOptions};
    use crate::Ratio;
    use proptest::prelude::*;

    fn cand(text: &str, kind: CandidateKind, facts: &[Fact]) -> CandidateClause {
        let clause = Alp::parse(&format!("#encoder\n{text}.")).unwrap().encoder.clauses[0].clone();
        let consequences = logic::ground_consequences(&clause, &FactIndex::new(facts));
        CandidateClause {
            weight: consequences.len(),
            clause,
            kind,
            consequences,
        }
    }

    fn tiny() -> (CopModel, CandidatePool, KnowledgeBase) {
        let kb = KnowledgeBase::parse("p(a,b).").unwrap();
        let facts: Vec<Fact> = kb.facts().iter().cloned().collect();
        let enc = cand("l(X,Y) :- p(X,Y)", CandidateKind::Encoder, &facts);
        let latent: Vec<Fact> = enc.consequences.iter().cloned().collect();
        let dec = cand("p(X,Y) :- l(X,Y)", CandidateKind::Decoder, &latent);
        let pool = CandidatePool {
            encoders: vec![enc],
            decoders: vec![dec],
        };
        let model = build_model(&pool, &kb, Ratio::from_integer(1)).unwrap();
        (model, pool, kb)
    }

    /// Best objective over all decoder subsets, scored by evaluating the
    /// induced ALP and checking constraints directly.
    fn brute_force(model: &CopModel, pool: &CandidatePool, kb: &KnowledgeBase) -> Option<usize> {
        let n = model.dc.len();
        assert!(n <= 16);
        (0u32..1 << n)
            .filter_map(|mask| {
                let sel: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
                let a = Assignment::from_decoders(model, &sel);
                if !check_assignment(model, &a).is_empty() {
                    return None;
                }
                let alp = crate::model::selected_alp(model, &a, pool, kb).unwrap();
                Some(logic::reconstruction_loss(&alp, kb))
            })
            .min()
    }

    #[test]
    fn all_fixed() {
        let (model, _, _) = tiny();
        let a = Assignment::from_decoders(&model, &[0]);
        let fixed: Vec<(usize, bool)> = a.values.iter().copied().enumerate().collect();
        let out = solve_exact(&model, &fixed, usize::MAX, None, ExactLimits::unlimited());
        assert_eq!(out.best, Some((a, 0)));
        assert_eq!(out.status, SearchStatus::Complete);
    }

    #[test]
    fn single_decoder_optimum() {
        let (model, _, _) = tiny();
        assert_eq!(model.num_vars(), 3);
        let out = solve_exact(&model, &[], usize::MAX, None, ExactLimits::unlimited());
        let (a, obj) = out.best.unwrap();
        assert_eq!(obj, 0);
        assert_eq!(a.values, vec![true, true, true]);
        // nothing beats zero
        let out = solve_exact(&model, &[], 0, None, ExactLimits::unlimited());
        assert!(out.best.is_none());
        assert_eq!(out.status, SearchStatus::Complete);
    }

    #[test]
    fn infeasible_fix() {
        let (model, _, _) = tiny();
        // dc0 is forced by coverage
        let out = solve_exact(&model, &[(1, false)], usize::MAX, None, ExactLimits::unlimited());
        assert!(out.best.is_none());
    }

    #[test]
    fn seeds() {
        let (model, _, _) = tiny();
        let a = initial_solution(&model, 100, None).unwrap();
        assert!(check_assignment(&model, &a).is_empty());
        assert_eq!(a.selected(&model, VarKind::Dc), [0]);

        let kb = KnowledgeBase::parse("p(a,b). p(b,c). p(c,d).").unwrap();
        let facts: Vec<Fact> = kb.facts().iter().cloned().collect();
        let enc = cand("l(X,Y) :- p(X,Y)", CandidateKind::Encoder, &facts);
        let latent = vec![
            Fact::new("l", &["a", "b"]).unwrap(),
            Fact::new("l", &["b", "c"]).unwrap(),
            Fact::new("l", &["c", "d"]).unwrap(),
            Fact::new("m", &["a", "b"]).unwrap(),
            Fact::new("m", &["b", "c"]).unwrap(),
            Fact::new("m", &["c", "d"]).unwrap(),
            Fact::new("m", &["d", "a"]).unwrap(),
            Fact::new("m", &["a", "a"]).unwrap(),
        ];
        let enc2 = CandidateClause {
            clause: Alp::parse("#encoder\nm(X,Y) :- p(Y,X).").unwrap().encoder.clauses[0].clone(),
            consequences: latent[3..].iter().cloned().collect(),
            weight: 5,
            kind: CandidateKind::Encoder,
        };
        let clean = cand("p(X,Y) :- l(X,Y)", CandidateKind::Decoder, &latent);
        let noisy = cand("p(X,Y) :- m(X,Y)", CandidateKind::Decoder, &latent);
        let pool = CandidatePool {
            encoders: vec![enc, enc2],
            decoders: vec![noisy, clean],
        };
        let model = build_model(&pool, &kb, Ratio::from_integer(3)).unwrap();
        let a = initial_solution(&model, 100, None).unwrap();
        assert_eq!(a.selected(&model, VarKind::Dc), [1]);
    }

    #[test]
    fn stops_at_zero() {
        let (model, _, _) = tiny();
        let out = lns_minimize(&model, &SearchConfig::default(), &mut |_| {}).unwrap();
        assert_eq!(out.solution.objective, 0);
        assert_eq!(out.solution.iteration_found, 0);
        assert_eq!(out.iterations_run, 0);
        assert!(out.solution.proven_optimal);
    }

    #[test]
    fn rejects_bad_config() {
        let (model, _, _) = tiny();
        let bad = SearchConfig {
            alpha: 101,
            ..Default::default()
        };
        assert!(matches!(lns_minimize(&model, &bad, &mut |_| {}), Err(SolveError::InvalidConfig(_))));
    }

    fn arb_kb() -> impl Strategy<Value = KnowledgeBase> {
        let c = prop::sample::select(vec!["a", "b", "c", "d", "e"]);
        let atom = (
            prop::sample::select(vec![("p", 2usize), ("q", 1), ("r", 2), ("s", 1)]),
            prop::collection::vec(c, 2),
        )
            .prop_map(|((n, k), args)| Fact::new(n, &args[..k]).unwrap());
        prop::collection::vec(atom, 3..10).prop_map(|f| KnowledgeBase::from_facts(f).unwrap())
    }

    fn small(kb: &KnowledgeBase, gamma: Ratio, options: PruneOptions) -> Option<(CopModel, CandidatePool)> {
        let config = GenerationConfig {
            max_encoder_body_len: 1,
            max_decoder_body_len: 1,
            max_head_vars: kb.predicates().map(|p| p.arity).max()?,
            ..Default::default()
        };
        let pool = generate_pool(kb, &config).ok()?;
        let (pool, _) = prune(&pool, kb, options);
        if pool.decoders.len() > 12 {
            return None;
        }
        let model = build_model(&pool, kb, gamma).ok()?;
        Some((model, pool))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn exact_matches_brute_force(kb in arb_kb(), g in 1i64..8) {
            let Some((model, pool)) = small(&kb, Ratio::new(g, 4), PruneOptions::default()) else { return Ok(()) };
            let oracle = brute_force(&model, &pool, &kb);
            let out = solve_exact(&model, &[], usize::MAX, None, ExactLimits::unlimited());
            prop_assert_eq!(out.status, SearchStatus::Complete);
            prop_assert_eq!(out.best.as_ref().map(|b| b.1), oracle);
            if let Some((a, obj)) = out.best {
                prop_assert!(check_assignment(&model, &a).is_empty());
                prop_assert_eq!(objective_value(&model, &a), Ok(obj));
                prop_assert!(loss_consistency(&model, &a, &pool, &kb));
            }
        }

        #[test]
        fn lns_is_exact_with_empty_neighbourhood_fix(kb in arb_kb(), g in 1i64..8, seed in any::<u64>()) {
            let Some((model, pool)) = small(&kb, Ratio::new(g, 4), PruneOptions::default()) else { return Ok(()) };
            let oracle = brute_force(&model, &pool, &kb);
            let config = SearchConfig { alpha: 0, beta: 0, fail_limit: u64::MAX, seed, ..Default::default() };
            match lns_minimize(&model, &config, &mut |_| {}) {
                Ok(out) => {
                    prop_assert_eq!(Some(out.solution.objective), oracle);
                    prop_assert!(out.solution.proven_optimal);
                    prop_assert!(loss_consistency(&model, &out.solution.assignment, &pool, &kb));
                }
                Err(e) => {
                    prop_assert_eq!(e, SolveError::Infeasible);
                    prop_assert_eq!(oracle, None);
                }
            }
        }

        #[test]
        fn lns_trace_is_monotone_and_deterministic(kb in arb_kb(), g in 1i64..8, seed in any::<u64>()) {
            let config = GenerationConfig { max_head_vars: kb.predicates().map(|p| p.arity).max().unwrap(), ..Default::default() };
            let Ok(pool) = generate_pool(&kb, &config) else { return Ok(()) };
            let (pool, _) = prune(&pool, &kb, PruneOptions::default());
            let model = build_model(&pool, &kb, Ratio::new(g, 4)).unwrap();
            let search = SearchConfig { iterations: 30, fail_limit: 200, seed, ..Default::default() };
            let (Ok(a), Ok(b)) = (lns_minimize(&model, &search, &mut |_| {}), lns_minimize(&model, &search, &mut |_| {})) else { return Ok(()) };
            prop_assert_eq!(&a.solution, &b.solution);
            for w in a.trace.windows(2) {
                prop_assert!(w[1].objective < w[0].objective);
            }
            prop_assert!(check_assignment(&model, &a.solution.assignment).is_empty());
            prop_assert_eq!(raw_objective(&model, &a.solution.assignment), a.solution.objective);
            prop_assert!(loss_consistency(&model, &a.solution.assignment, &pool, &kb));
        }

        #[test]
        fn lower_bound_never_exceeds_completions(kb in arb_kb(), g in 1i64..8, mask in any::<u16>()) {
            // fixing a prefix of decoders and searching must agree with
            // enumerating every completion of that prefix
            let Some((model, pool)) = small(&kb, Ratio::new(g, 4), PruneOptions::default()) else { return Ok(()) };
            let n = model.dc.len();
            let k = n / 2;
            let fixed: Vec<(usize, bool)> = (0..k).map(|j| (model.flat(VarId::dc(j)), mask >> j & 1 == 1)).collect();
            let oracle = (0u32..1 << (n - k))
                .filter_map(|rest| {
                    let sel: Vec<usize> = (0..n)
                        .filter(|&j| if j < k { mask >> j & 1 == 1 } else { rest >> (j - k) & 1 == 1 })
                        .collect();
                    let a = Assignment::from_decoders(&model, &sel);
                    check_assignment(&model, &a).is_empty().then(|| raw_objective(&model, &a))
                })
                .min();
            let _ = pool;
            let out = solve_exact(&model, &fixed, usize::MAX, None, ExactLimits::unlimited());
            prop_assert_eq!(out.best.map(|b| b.1), oracle);
        }
    }
}
