use super::{env_steps, future_step, Configuration, ExecError, FutureState, Prepared, TraceStep, Transition};
use rayon::prelude::*;
use std::collections::HashMap;

#[derive(Clone, Debug)]
pub struct SpaceOptions {
    pub budget: usize,
    pub jobs: usize,
    /// Maximum number of environment writes along a path.
    pub env_writes: usize,
    pub keep_edges: bool,
}

#[derive(Clone, Debug)]
pub struct Node<F> {
    pub config: Configuration<F>,
    /// First-discovered predecessor; following these gives a shortest trace.
    pub parent: Option<(usize, TraceStep)>,
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub step: TraceStep,
    pub target: usize,
    pub env: bool,
}

/// Reachable configurations, deduplicated up to tag renaming.
pub struct StateSpace<F> {
    pub nodes: Vec<Node<F>>,
    /// Outgoing edges per node; empty unless requested.
    pub edges: Vec<Vec<Edge>>,
    /// Nodes whose futures are exhausted.
    pub terminal: Vec<usize>,
    /// Nodes with remaining commands but no program step.
    pub stuck: Vec<usize>,
}

impl<F> StateSpace<F> {
    pub fn trace_to(&self, mut i: usize) -> Vec<TraceStep> {
        let mut out = Vec::new();
        while let Some((p, s)) = &self.nodes[i].parent {
            out.push(s.clone());
            i = *p;
        }
        out.reverse();
        out
    }
}

type Successors<F> = Result<(Vec<Transition<F>>, Vec<Transition<F>>), ExecError>;

fn successors<F: FutureState>(prepared: &Prepared, c: &Configuration<F>, env_budget: usize) -> Successors<F> {
    let prog = future_step(prepared, c)?;
    let env = if c.env_writes < env_budget {
        env_steps(prepared, c)
    } else {
        Vec::new()
    };
    Ok((prog, env))
}

/// Breadth-first construction of the reachable state space. With `jobs > 1`
/// each level's successors are computed in parallel; merging stays sequential,
/// so node numbering and witnesses do not depend on `jobs`.
pub fn build_space<F: FutureState>(
    prepared: &Prepared,
    init: Configuration<F>,
    opts: &SpaceOptions,
) -> Result<StateSpace<F>, ExecError> {
    let pool = if opts.jobs > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(opts.jobs)
                .build()
                .map_err(|e| ExecError::Futures(e.to_string()))?,
        )
    } else {
        None
    };
    let mut index = HashMap::new();
    index.insert(init.key(), 0usize);
    let mut space = StateSpace {
        nodes: vec![Node {
            config: init,
            parent: None,
        }],
        edges: vec![Vec::new()],
        terminal: Vec::new(),
        stuck: Vec::new(),
    };
    let mut frontier = vec![0usize];
    while !frontier.is_empty() {
        let expand = |i: &usize| successors(prepared, &space.nodes[*i].config, opts.env_writes);
        let results: Vec<Successors<F>> = match &pool {
            Some(p) => p.install(|| frontier.par_iter().map(expand).collect()),
            None => frontier.iter().map(expand).collect(),
        };
        let mut next = Vec::new();
        for (&i, res) in frontier.iter().zip(results) {
            let (prog, env) = res?;
            if space.nodes[i].config.is_terminal() {
                space.terminal.push(i);
            } else if prog.is_empty() {
                space.stuck.push(i);
            }
            let tagged = prog
                .into_iter()
                .map(|t| (t, false))
                .chain(env.into_iter().map(|t| (t, true)));
            for (tr, is_env) in tagged {
                let key = tr.target.key();
                let target = match index.get(&key) {
                    Some(&j) => j,
                    None => {
                        let j = space.nodes.len();
                        if j >= opts.budget {
                            return Err(ExecError::Budget { limit: opts.budget });
                        }
                        index.insert(key, j);
                        space.nodes.push(Node {
                            config: tr.target,
                            parent: Some((i, tr.step.clone())),
                        });
                        space.edges.push(Vec::new());
                        next.push(j);
                        j
                    }
                };
                if opts.keep_edges {
                    space.edges[i].push(Edge {
                        step: tr.step,
                        target,
                        env: is_env,
                    });
                }
            }
        }
        frontier = next;
    }
    space.terminal.sort_unstable();
    space.stuck.sort_unstable();
    Ok(space)
}
