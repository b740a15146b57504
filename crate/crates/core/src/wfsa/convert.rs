use super::{Arc, ArcLabel, TropicalWeight, Wfsa};
use crate::dag::{prune_dag, Dag, PruneConfig};

/// Prunes `dag` and converts it to an acceptor.
pub fn dag_to_wfsa(dag: &Dag, cfg: &PruneConfig) -> Wfsa {
    pruned_dag_to_wfsa(&prune_dag(dag, cfg))
}

/// Moves emissions from vertices onto arcs: state `u` is vertex `u`, and
/// each kept (token, successor) pair of `u` becomes an arc labelled with the
/// token whose cost is `-(log P[u,t] + log E[u,v])`. The lattice is taken as
/// already pruned.
pub fn pruned_dag_to_wfsa(dag: &Dag) -> Wfsa {
    let n = dag.num_vertices();
    let mut w = Wfsa::with_states(n, dag.start_vertex());
    for u in 0..n {
        for &(t, lp_e) in dag.emissions(u) {
            for &(v, lp_t) in dag.transitions(u) {
                // 0.0 - x rather than -x so a zero cost is +0.0
                let cost = 0.0 - (lp_e + lp_t);
                w.add_arc(u, Arc::new(ArcLabel::Token(t), cost, v));
            }
        }
    }
    w.set_final(dag.final_vertex(), TropicalWeight::ONE);
    w
}
