//! Hierarchical Leiden community detection with the modularity objective.
//!
//! The flat pass is the standard three-phase Leiden loop: queue-based local
//! moving, refinement of the partition (only nodes that are alone in a
//! refined community may merge, and only within their parent community),
//! then aggregation on the refined partition with the non-refined partition
//! seeding the aggregate assignment. The hierarchy re-partitions any
//! community exceeding `max_community_size` on its induced subgraph;
//! communities that fit are carried to the next level unchanged, so every
//! level is a full partition of the node set.
//!
//! Everything is single-threaded and driven by one seeded RNG, so results
//! are identical for identical inputs.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Undirected adjacency: each cross edge appears in both endpoint lists;
/// self-loops (from aggregation) appear once with their weight pre-doubled.
pub type Adjacency = Vec<Vec<(usize, f64)>>;

const GAIN_EPS: f64 = 1e-12;
const MAX_LEVELS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct LeidenParams {
    pub resolution: f64,
    pub max_community_size: usize,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for LeidenParams {
    fn default() -> Self {
        LeidenParams {
            resolution: 1.0,
            max_community_size: 50,
            max_sweeps: 10,
            seed: 0,
        }
    }
}

/// One community at one hierarchy level. `parent` indexes the previous level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelCommunity {
    pub members: Vec<usize>,
    pub parent: Option<usize>,
}

/// Modularity of a membership assignment at the given resolution. Returns 0
/// for edgeless graphs.
pub fn modularity(adj: &Adjacency, membership: &[usize], resolution: f64) -> f64 {
    let degrees: Vec<f64> = adj
        .iter()
        .map(|nbrs| nbrs.iter().map(|&(_, w)| w).sum())
        .collect();
    let total: f64 = degrees.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let n_comms = membership.iter().copied().max().map_or(0, |m| m + 1);
    let mut comm_degree = vec![0.0f64; n_comms];
    for (v, &c) in membership.iter().enumerate() {
        comm_degree[c] += degrees[v];
    }
    let mut intra = 0.0;
    for (u, nbrs) in adj.iter().enumerate() {
        for &(v, w) in nbrs {
            if membership[u] == membership[v] {
                intra += w;
            }
        }
    }
    intra / total
        - resolution
            * comm_degree
                .iter()
                .map(|&d| (d / total) * (d / total))
                .sum::<f64>()
}

struct WorkGraph {
    adj: Adjacency,
    degree: Vec<f64>,
    /// Sum of all degrees (2m).
    total: f64,
    /// Original node ids folded into each work node.
    members: Vec<Vec<usize>>,
}

impl WorkGraph {
    fn from_adjacency(adj: &Adjacency) -> Self {
        let degree: Vec<f64> = adj
            .iter()
            .map(|nbrs| nbrs.iter().map(|&(_, w)| w).sum())
            .collect();
        let total = degree.iter().sum();
        let members = (0..adj.len()).map(|v| vec![v]).collect();
        WorkGraph {
            adj: adj.clone(),
            degree,
            total,
            members,
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    /// Collapse refined communities into one node each. Community ids are
    /// renumbered by ascending id, keeping everything deterministic.
    fn aggregate(&self, refined: &[usize]) -> (WorkGraph, Vec<usize>) {
        let mut ids: Vec<usize> = refined.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let mut to_new = vec![usize::MAX; refined.iter().copied().max().unwrap_or(0) + 1];
        for (new, &old) in ids.iter().enumerate() {
            to_new[old] = new;
        }
        let k = ids.len();

        let mut weight = vec![std::collections::BTreeMap::<usize, f64>::new(); k];
        let mut members = vec![Vec::new(); k];
        for v in 0..self.len() {
            let rv = to_new[refined[v]];
            members[rv].extend(self.members[v].iter().copied());
            for &(u, w) in &self.adj[v] {
                let ru = to_new[refined[u]];
                if u == v {
                    // self-loop weight already doubled
                    *weight[rv].entry(rv).or_insert(0.0) += w;
                } else if ru == rv {
                    // intra edge seen from both sides; each sighting adds w,
                    // giving the doubled self-loop convention
                    *weight[rv].entry(rv).or_insert(0.0) += w;
                } else {
                    *weight[rv].entry(ru).or_insert(0.0) += w;
                }
            }
        }
        for m in &mut members {
            m.sort_unstable();
        }
        let adj: Adjacency = weight
            .into_iter()
            .map(|row| row.into_iter().collect())
            .collect();
        let degree: Vec<f64> = adj
            .iter()
            .map(|nbrs| nbrs.iter().map(|&(_, w)| w).sum())
            .collect();
        let total = degree.iter().sum();
        (
            WorkGraph {
                adj,
                degree,
                total,
                members,
            },
            to_new,
        )
    }
}

/// Community bookkeeping for the moving phases.
struct CommunityState {
    degree_sum: Vec<f64>,
    size: Vec<usize>,
    free: BTreeSet<usize>,
}

impl CommunityState {
    fn new(n: usize, membership: &[usize], node_degree: &[f64]) -> Self {
        let mut degree_sum = vec![0.0; n];
        let mut size = vec![0usize; n];
        for (v, &c) in membership.iter().enumerate() {
            degree_sum[c] += node_degree[v];
            size[c] += 1;
        }
        let free = (0..n).filter(|&c| size[c] == 0).collect();
        CommunityState {
            degree_sum,
            size,
            free,
        }
    }

    fn remove(&mut self, c: usize, degree: f64) {
        self.degree_sum[c] -= degree;
        self.size[c] -= 1;
        if self.size[c] == 0 {
            self.free.insert(c);
        }
    }

    fn insert(&mut self, c: usize, degree: f64) {
        if self.size[c] == 0 {
            self.free.remove(&c);
        }
        self.degree_sum[c] += degree;
        self.size[c] += 1;
    }
}

/// How improving moves are chosen during local moving.
#[derive(Clone, Copy, PartialEq)]
enum MoveSelection {
    /// Highest-gain candidate (classic Leiden).
    Greedy,
    /// Random improving candidate, gain-weighted. Still never accepts a
    /// worsening move; restarts use this to explore basins the greedy
    /// ordering cannot reach.
    Randomized,
}

/// Queue-based local moving. Returns the number of accepted moves.
fn local_move(
    work: &WorkGraph,
    membership: &mut [usize],
    resolution: f64,
    rng: &mut ChaCha8Rng,
    selection: MoveSelection,
) -> usize {
    let n = work.len();
    if n == 0 || work.total == 0.0 {
        return 0;
    }
    let mut state = CommunityState::new(n, membership, &work.degree);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut queue: VecDeque<usize> = order.into();
    let mut queued = vec![true; n];

    let mut neighbor_weight = vec![0.0f64; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut improving: Vec<(usize, f64)> = Vec::new();
    let mut moves = 0;

    while let Some(v) = queue.pop_front() {
        queued[v] = false;
        let current = membership[v];
        let k_v = work.degree[v];

        touched.clear();
        for &(u, w) in &work.adj[v] {
            if u == v {
                continue;
            }
            let c = membership[u];
            if neighbor_weight[c] == 0.0 {
                touched.push(c);
            }
            neighbor_weight[c] += w;
        }
        touched.sort_unstable();

        state.remove(current, k_v);

        // score(C) = k_{v,C} - resolution * degree_sum(C) * k_v / 2m; the
        // empty community scores 0
        let score = |c: usize, state: &CommunityState| {
            neighbor_weight[c] - resolution * state.degree_sum[c] * k_v / work.total
        };
        // candidates scan in ascending id order, so the smallest
        // strictly-better community wins; on an exact tie with the current
        // community, move only toward a smaller id; community ids then act
        // as a decreasing potential, so plateau walks terminate
        let current_score = score(current, &state);
        let mut best_comm = current;
        let mut best_score = current_score;
        improving.clear();
        for &c in &touched {
            if c == current {
                continue;
            }
            let s = score(c, &state);
            if s > current_score + GAIN_EPS {
                improving.push((c, s));
            }
            if s > best_score + GAIN_EPS
                || (c < best_comm && (s - best_score).abs() <= GAIN_EPS)
            {
                best_comm = c;
                best_score = s;
            }
        }
        if selection == MoveSelection::Randomized && improving.len() > 1 {
            let (c, s) = improving[rng.gen_range(0..improving.len())];
            best_comm = c;
            best_score = s;
        }
        if best_score < -GAIN_EPS {
            // better off alone; the free set is nonempty whenever v is not
            // already a singleton
            if let Some(&empty) = state.free.iter().next() {
                best_comm = empty;
            }
        }

        state.insert(best_comm, k_v);
        for &c in &touched {
            neighbor_weight[c] = 0.0;
        }

        if best_comm != current {
            membership[v] = best_comm;
            moves += 1;
            for &(u, _) in &work.adj[v] {
                if u != v && membership[u] != best_comm && !queued[u] {
                    queue.push_back(u);
                    queued[u] = true;
                }
            }
        }
    }
    moves
}

/// Randomness of the refinement phase: merge probability is proportional
/// to exp(delta_q / THETA) over non-worsening candidates.
const THETA: f64 = 0.01;

/// Leiden refinement: starting from singletons, nodes that are still alone
/// join an adjacent refined community inside their parent community, drawn
/// among non-worsening candidates with probability weighted by modularity
/// gain. The randomness is what lets restarts explore different
/// aggregations.
fn refine(
    work: &WorkGraph,
    membership: &[usize],
    resolution: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let n = work.len();
    let mut refined: Vec<usize> = (0..n).collect();
    if work.total == 0.0 {
        return refined;
    }
    let m = work.total / 2.0;
    let mut ref_degree: Vec<f64> = work.degree.clone();
    let mut ref_size = vec![1usize; n];
    let mut neighbor_weight = vec![0.0f64; n];
    let mut touched: Vec<usize> = Vec::new();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for &v in &order {
        if ref_size[refined[v]] > 1 {
            continue;
        }
        touched.clear();
        for &(u, w) in &work.adj[v] {
            if u == v || membership[u] != membership[v] {
                continue;
            }
            let r = refined[u];
            if r == refined[v] {
                continue;
            }
            if neighbor_weight[r] == 0.0 {
                touched.push(r);
            }
            neighbor_weight[r] += w;
        }
        touched.sort_unstable();

        let k_v = work.degree[v];
        let old = refined[v];
        let mut candidates: Vec<(usize, f64)> = Vec::with_capacity(touched.len());
        let mut weight_sum = 0.0;
        for &r in &touched {
            let score = neighbor_weight[r] - resolution * ref_degree[r] * k_v / work.total;
            if score > -GAIN_EPS {
                let weight = ((score / m) / THETA).min(50.0).exp();
                weight_sum += weight;
                candidates.push((r, weight));
            }
        }
        for &r in &touched {
            neighbor_weight[r] = 0.0;
        }
        if candidates.is_empty() {
            continue;
        }
        let mut draw = rng.gen_range(0.0..weight_sum);
        let mut chosen = candidates[candidates.len() - 1].0;
        for (r, weight) in candidates {
            if draw < weight {
                chosen = r;
                break;
            }
            draw -= weight;
        }
        ref_degree[old] -= k_v;
        ref_size[old] -= 1;
        ref_degree[chosen] += k_v;
        ref_size[chosen] += 1;
        refined[v] = chosen;
    }
    refined
}

/// Renumber membership so community ids are 0-based in order of first
/// appearance by node index.
fn renumber(membership: &mut [usize]) -> usize {
    let max = membership.iter().copied().max().map_or(0, |m| m + 1);
    let mut map = vec![usize::MAX; max];
    let mut next = 0;
    for m in membership.iter_mut() {
        if map[*m] == usize::MAX {
            map[*m] = next;
            next += 1;
        }
        *m = map[*m];
    }
    next
}


const MAX_AGGREGATE_ROUNDS: usize = 32;

/// Leiden to local convergence, best of a few seeded restarts (greedy local
/// moving can settle in order-dependent optima on small graphs; restarts
/// with distinct move orders recover them). Deterministic for a fixed RNG
/// state. Returns the membership of the original nodes, canonically
/// renumbered.
pub fn leiden_flat(
    adj: &Adjacency,
    resolution: f64,
    max_sweeps: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    use rand_chacha::rand_core::RngCore;
    // weak community structure on tiny graphs leaves greedy moving prone to
    // order-dependent basins; restarts are cheap there
    let restarts = if adj.len() <= 64 { 16 } else { 4 };
    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..restarts {
        let selection = if restart == 0 {
            MoveSelection::Greedy
        } else {
            MoveSelection::Randomized
        };
        let mut restart_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());
        let membership = leiden_single(adj, resolution, max_sweeps, &mut restart_rng, selection);
        let q = modularity(adj, &membership, resolution);
        if best.as_ref().is_none_or(|(best_q, _)| q > best_q + GAIN_EPS) {
            best = Some((q, membership));
        }
    }
    best.map(|(_, m)| m).unwrap_or_default()
}

/// One Leiden run: improvement sweeps over the full graph, each sweep being
/// the local-move / refine / aggregate cycle seeded with the previous
/// sweep's partition, until modularity stops improving.
fn leiden_single(
    adj: &Adjacency,
    resolution: f64,
    max_sweeps: usize,
    rng: &mut ChaCha8Rng,
    selection: MoveSelection,
) -> Vec<usize> {
    let n = adj.len();
    if n == 0 {
        return Vec::new();
    }
    let mut membership: Vec<usize> = (0..n).collect();
    let mut best_q = f64::NEG_INFINITY;
    for _ in 0..max_sweeps.max(1) {
        membership = leiden_pass(adj, membership, resolution, rng, selection);
        let q = modularity(adj, &membership, resolution);
        if q <= best_q + GAIN_EPS {
            break;
        }
        best_q = q;
    }
    membership
}

/// Local moving, refinement, and aggregation from an initial partition of
/// the original graph down to a stable aggregate; returns the partition
/// projected back onto the original nodes.
fn leiden_pass(
    adj: &Adjacency,
    initial: Vec<usize>,
    resolution: f64,
    rng: &mut ChaCha8Rng,
    selection: MoveSelection,
) -> Vec<usize> {
    let n = adj.len();
    let mut work = WorkGraph::from_adjacency(adj);
    let mut membership = initial;
    renumber(&mut membership);

    for _ in 0..MAX_AGGREGATE_ROUNDS {
        let moves = local_move(&work, &mut membership, resolution, rng, selection);
        renumber(&mut membership);
        let comm_count = membership.iter().copied().max().map_or(0, |m| m + 1);
        if comm_count == work.len() {
            // every community is a single work node; nothing left to fold
            break;
        }
        let mut refined = refine(&work, &membership, resolution, rng);
        renumber(&mut refined);
        let (new_work, refined_to_new) = work.aggregate(&refined);
        let mut new_membership = vec![0usize; new_work.len()];
        for v in 0..work.len() {
            new_membership[refined_to_new[refined[v]]] = membership[v];
        }
        work = new_work;
        membership = new_membership;
        renumber(&mut membership);
        if moves == 0 {
            break;
        }
    }

    let mut result = vec![0usize; n];
    for (super_node, members) in work.members.iter().enumerate() {
        for &orig in members {
            result[orig] = membership[super_node];
        }
    }
    renumber(&mut result);
    result
}

fn communities_from(membership: &[usize], parent_of_node: impl Fn(usize) -> Option<usize>) -> Vec<LevelCommunity> {
    let count = membership.iter().copied().max().map_or(0, |m| m + 1);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); count];
    for (v, &c) in membership.iter().enumerate() {
        groups[c].push(v);
    }
    groups.sort_by_key(|g| g[0]);
    groups
        .into_iter()
        .map(|members| {
            let parent = parent_of_node(members[0]);
            LevelCommunity { members, parent }
        })
        .collect()
}

/// Hierarchical Leiden: level 0 is a full Leiden partition; any community
/// larger than `max_community_size` is re-partitioned on its induced
/// subgraph at the next level, and communities that already fit are carried
/// down unchanged. Every level partitions the node set; level k+1 communities
/// nest inside level k.
pub fn hierarchical_leiden(adj: &Adjacency, params: &LeidenParams) -> Vec<Vec<LevelCommunity>> {
    let n = adj.len();
    if n == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let membership = leiden_flat(adj, params.resolution, params.max_sweeps, &mut rng);
    let mut levels = vec![communities_from(&membership, |_| None)];

    while levels.len() < MAX_LEVELS {
        let current = levels.last().unwrap();
        let mut next: Vec<LevelCommunity> = Vec::new();
        let mut any_split = false;

        for (ci, comm) in current.iter().enumerate() {
            if comm.members.len() <= params.max_community_size {
                next.push(LevelCommunity {
                    members: comm.members.clone(),
                    parent: Some(ci),
                });
                continue;
            }
            // induced subgraph on comm.members (already sorted)
            let mut local_index = std::collections::BTreeMap::new();
            for (i, &v) in comm.members.iter().enumerate() {
                local_index.insert(v, i);
            }
            let sub_adj: Adjacency = comm
                .members
                .iter()
                .map(|&v| {
                    adj[v]
                        .iter()
                        .filter_map(|&(u, w)| local_index.get(&u).map(|&lu| (lu, w)))
                        .collect()
                })
                .collect();
            let sub_membership =
                leiden_flat(&sub_adj, params.resolution, params.max_sweeps, &mut rng);
            let sub_count = sub_membership.iter().copied().max().map_or(0, |m| m + 1);
            if sub_count <= 1 {
                // could not split; carry unchanged
                next.push(LevelCommunity {
                    members: comm.members.clone(),
                    parent: Some(ci),
                });
                continue;
            }
            any_split = true;
            let mut groups: Vec<Vec<usize>> = vec![Vec::new(); sub_count];
            for (local, &c) in sub_membership.iter().enumerate() {
                groups[c].push(comm.members[local]);
            }
            groups.sort_by_key(|g| g[0]);
            for members in groups {
                next.push(LevelCommunity {
                    members,
                    parent: Some(ci),
                });
            }
        }

        if !any_split {
            break;
        }
        levels.push(next);
    }
    levels
}

/// Build the undirected adjacency used by community detection from a list of
/// edges; parallel edges accumulate weight.
pub fn adjacency_from_edges(n: usize, edges: &[(usize, usize)]) -> Adjacency {
    let mut weight = vec![std::collections::BTreeMap::<usize, f64>::new(); n];
    for &(u, v) in edges {
        if u == v {
            continue;
        }
        *weight[u].entry(v).or_insert(0.0) += 1.0;
        *weight[v].entry(u).or_insert(0.0) += 1.0;
    }
    weight
        .into_iter()
        .map(|row| row.into_iter().collect())
        .collect()
}
