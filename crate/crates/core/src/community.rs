//! Louvain communities on the Mapper graph and point-level assignment.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mapper::MapperGraph;

/// Communities of a Mapper graph pushed down to data points.
///
/// Community indices are contiguous and ordered by decreasing point count
/// (ties by pre-relabel index), so index 0 is always a largest community.
/// Communities whose vertices hold no plurality points keep their slot
/// with size 0. Points contained in no vertex are unassigned.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommunityResult {
    pub vertex_community: Vec<usize>,
    pub point_community: Vec<Option<usize>>,
    pub n_communities: usize,
    pub sizes: Vec<usize>,
    /// `None` when the graph has no edges, where the score is undefined.
    pub modularity: Option<f64>,
    pub singleton_flags: Vec<bool>,
}

/// Newman-Girvan modularity of a vertex partition over unweighted edges.
pub fn modularity(graph: &MapperGraph, partition: &[usize]) -> Result<f64> {
    if partition.len() != graph.n_vertices() {
        return Err(Error::InvalidParameter(format!(
            "partition covers {} vertices, graph has {}",
            partition.len(),
            graph.n_vertices()
        )));
    }
    let m = graph.n_edges();
    if m == 0 {
        return Err(Error::EdgelessGraph);
    }
    let n_comm = partition.iter().copied().max().unwrap_or(0) + 1;
    let mut internal = vec![0usize; n_comm];
    let mut degree = vec![0usize; n_comm];
    for &(u, v) in &graph.edges {
        if partition[u] == partition[v] {
            internal[partition[u]] += 1;
        }
        degree[partition[u]] += 1;
        degree[partition[v]] += 1;
    }
    let m = m as f64;
    Ok((0..n_comm)
        .map(|c| internal[c] as f64 / m - (degree[c] as f64 / (2.0 * m)).powi(2))
        .sum())
}

struct LevelGraph {
    adj: Vec<Vec<(usize, f64)>>,
    /// Weight of collapsed internal edges, both endpoints counted.
    self_w: Vec<f64>,
    two_m: f64,
}

impl LevelGraph {
    fn from_mapper(graph: &MapperGraph) -> Self {
        let n = graph.n_vertices();
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &graph.edges {
            adj[u].push((v, 1.0));
            adj[v].push((u, 1.0));
        }
        Self {
            adj,
            self_w: vec![0.0; n],
            two_m: 2.0 * graph.n_edges() as f64,
        }
    }

    fn n(&self) -> usize {
        self.adj.len()
    }

    fn degree(&self, u: usize) -> f64 {
        self.adj[u].iter().map(|&(_, w)| w).sum::<f64>() + self.self_w[u]
    }
}

/// One sweep phase: vertices greedily switch to the neighbor community
/// with the best modularity gain. Returns the community of each level
/// vertex and whether any vertex moved.
fn local_move<R: Rng>(level: &LevelGraph, rng: &mut R) -> (Vec<usize>, bool) {
    let n = level.n();
    let mut comm: Vec<usize> = (0..n).collect();
    let degrees: Vec<f64> = (0..n).map(|u| level.degree(u)).collect();
    let mut sigma_tot = degrees.clone();
    let m = level.two_m / 2.0;
    if m == 0.0 {
        return (comm, false);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut w_to = vec![0.0f64; n];
    let mut improved = false;
    loop {
        let mut moved_in_pass = false;
        for &u in &order {
            let cur = comm[u];
            sigma_tot[cur] -= degrees[u];

            let mut touched: Vec<usize> = vec![cur];
            for &(v, w) in &level.adj[u] {
                let c = comm[v];
                if w_to[c] == 0.0 && c != cur {
                    touched.push(c);
                }
                w_to[c] += w;
            }
            touched.sort_unstable();
            touched.dedup();

            let gain = |c: usize, w_to: &[f64]| {
                w_to[c] / m - sigma_tot[c] * degrees[u] / (level.two_m * m)
            };
            let mut best_comm = cur;
            let mut best_gain = gain(cur, &w_to);
            for &c in &touched {
                if c == cur {
                    continue;
                }
                let g = gain(c, &w_to);
                if g > best_gain + 1e-12 {
                    best_gain = g;
                    best_comm = c;
                }
            }

            for &c in &touched {
                w_to[c] = 0.0;
            }
            sigma_tot[best_comm] += degrees[u];
            if best_comm != cur {
                comm[u] = best_comm;
                moved_in_pass = true;
                improved = true;
            }
        }
        if !moved_in_pass {
            break;
        }
    }
    (comm, improved)
}

/// Collapse communities into vertices; returns the old-label -> new-vertex
/// map (labels renumbered in ascending order) and the aggregated graph.
fn aggregate(level: &LevelGraph, comm: &[usize]) -> (Vec<usize>, LevelGraph) {
    let mut labels: Vec<usize> = comm.to_vec();
    labels.sort_unstable();
    labels.dedup();
    let mut renumber = vec![usize::MAX; comm.iter().copied().max().unwrap_or(0) + 1];
    for (new, &old) in labels.iter().enumerate() {
        renumber[old] = new;
    }

    let k = labels.len();
    let mut weight = vec![vec![0.0f64; k]; k];
    let mut self_w = vec![0.0f64; k];
    for u in 0..level.n() {
        let cu = renumber[comm[u]];
        self_w[cu] += level.self_w[u];
        for &(v, w) in &level.adj[u] {
            let cv = renumber[comm[v]];
            if cu == cv {
                // Each internal edge appears in both adjacency lists, so
                // summing one direction counts both endpoints once each.
                self_w[cu] += w;
            } else {
                weight[cu][cv] += w;
            }
        }
    }
    let adj = (0..k)
        .map(|a| {
            (0..k)
                .filter(|&b| b != a && weight[a][b] > 0.0)
                .map(|b| (b, weight[a][b]))
                .collect()
        })
        .collect();
    (
        renumber,
        LevelGraph {
            adj,
            self_w,
            two_m: level.two_m,
        },
    )
}

/// Greedy two-phase Louvain partition of the graph's vertices.
///
/// Sweep order is shuffled once per level from `rng`; gain ties go to the
/// lowest community index; levels repeat until no single move improves
/// modularity by more than 1e-12. Labels are contiguous, numbered by first
/// occurrence over vertex ids, so equal seeds give identical output.
pub fn louvain<R: Rng>(graph: &MapperGraph, rng: &mut R) -> Vec<usize> {
    let n = graph.n_vertices();
    let mut assignment: Vec<usize> = (0..n).collect();
    let mut level = LevelGraph::from_mapper(graph);
    loop {
        let (comm, improved) = local_move(&level, rng);
        if !improved {
            break;
        }
        let (renumber, next) = aggregate(&level, &comm);
        for a in assignment.iter_mut() {
            *a = renumber[comm[*a]];
        }
        level = next;
    }

    let mut relabel = vec![usize::MAX; level.n().max(1)];
    let mut next_label = 0;
    for a in assignment.iter_mut() {
        if relabel[*a] == usize::MAX {
            relabel[*a] = next_label;
            next_label += 1;
        }
        *a = relabel[*a];
    }
    assignment
}

/// Pushes a vertex partition down to data points by plurality vote over
/// the vertices containing each point (ties to the lowest community
/// index), then relabels communities by decreasing point count.
pub fn assign_points(graph: &MapperGraph, partition: &[usize]) -> Result<CommunityResult> {
    if partition.len() != graph.n_vertices() {
        return Err(Error::InvalidParameter(format!(
            "partition covers {} vertices, graph has {}",
            partition.len(),
            graph.n_vertices()
        )));
    }

    // Dense-rank the input labels so vote indices are contiguous.
    let mut labels: Vec<usize> = partition.to_vec();
    labels.sort_unstable();
    labels.dedup();
    let rank = |label: usize| labels.binary_search(&label).expect("label seen above");
    let k = labels.len();

    let mut votes = vec![0usize; k];
    let mut point_community: Vec<Option<usize>> = vec![None; graph.n_points];
    let mut containing: Vec<Vec<usize>> = vec![Vec::new(); graph.n_points];
    for v in &graph.vertices {
        for &p in &v.points {
            containing[p].push(v.id);
        }
    }
    let mut sizes = vec![0usize; k];
    for (p, vs) in containing.iter().enumerate() {
        if vs.is_empty() {
            continue;
        }
        let mut seen: Vec<usize> = Vec::new();
        for &v in vs {
            let c = rank(partition[v]);
            if votes[c] == 0 {
                seen.push(c);
            }
            votes[c] += 1;
        }
        seen.sort_unstable();
        let best = *seen
            .iter()
            .max_by(|&&a, &&b| votes[a].cmp(&votes[b]).then(b.cmp(&a)))
            .expect("point has a containing vertex");
        point_community[p] = Some(best);
        sizes[best] += 1;
        for &c in &seen {
            votes[c] = 0;
        }
    }

    // Relabel by decreasing size, ties by pre-relabel index.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
    let mut final_label = vec![0usize; k];
    for (new, &old) in order.iter().enumerate() {
        final_label[old] = new;
    }

    let vertex_community: Vec<usize> = partition.iter().map(|&l| final_label[rank(l)]).collect();
    let point_community: Vec<Option<usize>> = point_community
        .into_iter()
        .map(|pc| pc.map(|c| final_label[c]))
        .collect();
    let sizes: Vec<usize> = order.iter().map(|&old| sizes[old]).collect();
    let singleton_flags: Vec<bool> = sizes.iter().map(|&s| s == 1).collect();
    let q = if graph.n_edges() == 0 {
        None
    } else {
        Some(modularity(graph, partition)?)
    };

    Ok(CommunityResult {
        vertex_community,
        point_community,
        n_communities: k,
        sizes,
        modularity: q,
        singleton_flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapper::MapperVertex;
    use crate::rng::stream_rng;
    use approx::assert_abs_diff_eq;

    fn graph(n: usize, edges: &[(usize, usize)]) -> MapperGraph {
        MapperGraph {
            vertices: (0..n)
                .map(|id| MapperVertex {
                    id,
                    cell: vec![0],
                    points: vec![id],
                })
                .collect(),
            edges: edges.to_vec(),
            n_points: n,
        }
    }

    fn two_triangles_bridged() -> MapperGraph {
        graph(
            6,
            &[(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (3, 5), (4, 5)],
        )
    }

    fn two_triangles_disjoint() -> MapperGraph {
        graph(6, &[(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)])
    }

    #[test]
    fn single_community_has_zero_modularity() {
        let g = two_triangles_bridged();
        let q = modularity(&g, &[0; 6]).unwrap();
        assert_abs_diff_eq!(q, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn disjoint_triangles_score_one_half() {
        let g = two_triangles_disjoint();
        let q = modularity(&g, &[0, 0, 0, 1, 1, 1]).unwrap();
        assert_abs_diff_eq!(q, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn bridged_triangles_score_five_fourteenths() {
        let g = two_triangles_bridged();
        let q = modularity(&g, &[0, 0, 0, 1, 1, 1]).unwrap();
        assert_abs_diff_eq!(q, 5.0 / 14.0, epsilon = 1e-12);
    }

    #[test]
    fn modularity_rejects_edgeless_graphs() {
        let g = graph(4, &[]);
        assert!(modularity(&g, &[0, 1, 2, 3]).is_err());
    }

    #[test]
    fn louvain_splits_bridged_triangles() {
        let g = two_triangles_bridged();
        for seed in 0..10 {
            let part = louvain(&g, &mut stream_rng(seed, 0));
            assert_eq!(part[0], part[1]);
            assert_eq!(part[0], part[2]);
            assert_eq!(part[3], part[4]);
            assert_eq!(part[3], part[5]);
            assert_ne!(part[0], part[3]);
        }
    }

    #[test]
    fn louvain_leaves_edgeless_vertices_as_singletons() {
        let g = graph(4, &[]);
        let part = louvain(&g, &mut stream_rng(1, 0));
        assert_eq!(part, vec![0, 1, 2, 3]);
    }

    #[test]
    fn louvain_keeps_isolated_vertices_alone() {
        let g = graph(5, &[(0, 1), (0, 2), (1, 2)]);
        let part = louvain(&g, &mut stream_rng(3, 0));
        assert_eq!(part[0], part[1]);
        assert_eq!(part[0], part[2]);
        assert_ne!(part[3], part[0]);
        assert_ne!(part[4], part[0]);
        assert_ne!(part[3], part[4]);
    }

    #[test]
    fn identical_seeds_give_identical_partitions() {
        let g = two_triangles_bridged();
        let a = louvain(&g, &mut stream_rng(7, 3));
        let b = louvain(&g, &mut stream_rng(7, 3));
        assert_eq!(a, b);
        let labels: Vec<usize> = {
            let mut l = a.clone();
            l.sort_unstable();
            l.dedup();
            l
        };
        assert_eq!(labels, (0..labels.len()).collect::<Vec<_>>());
    }

    /// Every partition of n items as restricted growth strings.
    fn all_partitions(n: usize) -> Vec<Vec<usize>> {
        fn rec(i: usize, n: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if i == n {
                out.push(cur.clone());
                return;
            }
            for label in 0..=max {
                cur.push(label);
                let next_max = if label == max { max + 1 } else { max };
                rec(i + 1, n, next_max, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(0, n, 0, &mut Vec::new(), &mut out);
        out
    }

    #[test]
    fn louvain_matches_exhaustive_search_on_small_corpus() {
        let corpus: Vec<MapperGraph> = vec![
            two_triangles_bridged(),
            two_triangles_disjoint(),
            graph(4, &[(0, 1), (1, 2), (2, 3)]),
            graph(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]),
            graph(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]),
            graph(
                8,
                &[
                    (0, 1),
                    (0, 2),
                    (1, 2),
                    (1, 3),
                    (2, 3),
                    (3, 4),
                    (4, 5),
                    (4, 6),
                    (5, 6),
                    (5, 7),
                    (6, 7),
                ],
            ),
        ];
        for (gi, g) in corpus.iter().enumerate() {
            let best = all_partitions(g.n_vertices())
                .iter()
                .map(|p| modularity(g, p).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            for seed in 0..5 {
                let part = louvain(g, &mut stream_rng(seed, 0));
                let q = modularity(g, &part).unwrap();
                assert_abs_diff_eq!(q, best, epsilon = 1e-9);
                let _ = gi;
            }
        }
    }

    #[test]
    fn louvain_never_scores_below_singletons() {
        for seed in 0..20u64 {
            let mut rng = stream_rng(seed, 0);
            let n = 12;
            let mut edges = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.random::<f64>() < 0.25 {
                        edges.push((u, v));
                    }
                }
            }
            if edges.is_empty() {
                continue;
            }
            let g = graph(n, &edges);
            let singletons: Vec<usize> = (0..n).collect();
            let q0 = modularity(&g, &singletons).unwrap();
            let part = louvain(&g, &mut stream_rng(seed, 1));
            let q = modularity(&g, &part).unwrap();
            assert!(q >= q0 - 1e-12, "seed {seed}: {q} < {q0}");
        }
    }

    fn assign_graph(point_sets: &[&[usize]], n_points: usize) -> MapperGraph {
        MapperGraph {
            vertices: point_sets
                .iter()
                .enumerate()
                .map(|(id, pts)| MapperVertex {
                    id,
                    cell: vec![id],
                    points: pts.to_vec(),
                })
                .collect(),
            edges: Vec::new(),
            n_points,
        }
    }

    #[test]
    fn plurality_vote_assigns_points() {
        // Point 0 sits in three vertices with communities [1, 1, 2].
        let g = assign_graph(&[&[0], &[0], &[0, 1]], 2);
        let res = assign_points(&g, &[1, 1, 2]).unwrap();
        // Input community 1 wins point 0; community 2 gets point 1; after
        // size relabeling both have one point, tie broken by input rank.
        assert_eq!(res.point_community[0], res.vertex_community[0].into());
        assert_eq!(res.point_community[1], Some(res.vertex_community[2]));
        assert_ne!(res.point_community[0], res.point_community[1]);
        assert_eq!(res.sizes, vec![1, 1]);
    }

    #[test]
    fn vote_ties_go_to_the_lowest_input_community() {
        // Point 0 in two vertices with communities [2, 1]: tie, lower wins.
        let g = assign_graph(&[&[0, 1], &[0, 2]], 3);
        let res = assign_points(&g, &[2, 1]).unwrap();
        // Input 1 holds points {0, 2}; input 2 holds {1}. After relabeling
        // by size, input 1 -> 0, input 2 -> 1.
        assert_eq!(res.point_community, vec![Some(0), Some(1), Some(0)]);
        assert_eq!(res.sizes, vec![2, 1]);
        assert_eq!(res.vertex_community, vec![1, 0]);
    }

    #[test]
    fn points_in_no_vertex_stay_unassigned() {
        let g = assign_graph(&[&[0], &[1]], 3);
        let res = assign_points(&g, &[0, 1]).unwrap();
        assert_eq!(res.point_community[2], None);
        assert_eq!(res.sizes.iter().sum::<usize>(), 2);
        assert_eq!(res.n_communities, 2);
    }

    #[test]
    fn communities_relabel_by_decreasing_size() {
        // Input community 0 covers one point, input 1 covers three.
        let g = assign_graph(&[&[0], &[1, 2, 3]], 4);
        let res = assign_points(&g, &[0, 1]).unwrap();
        assert_eq!(res.sizes, vec![3, 1]);
        assert_eq!(res.vertex_community, vec![1, 0]);
        assert_eq!(res.point_community[0], Some(1));
        assert_eq!(res.point_community[1], Some(0));
        assert_eq!(res.singleton_flags, vec![false, true]);
    }

    #[test]
    fn zero_point_communities_keep_a_slot() {
        // Vertex 1's community never wins a plurality: point 0 is in both
        // vertices, tie goes to input community 0.
        let g = assign_graph(&[&[0], &[0]], 1);
        let res = assign_points(&g, &[0, 1]).unwrap();
        assert_eq!(res.n_communities, 2);
        assert_eq!(res.sizes, vec![1, 0]);
        assert_eq!(res.point_community[0], Some(0));
    }

    #[test]
    fn output_is_invariant_to_input_label_permutation_without_ties() {
        // Tie-free instance: every point is in exactly one vertex.
        let g = assign_graph(&[&[0, 1, 2], &[3, 4], &[5]], 6);
        let a = assign_points(&g, &[0, 1, 2]).unwrap();
        let b = assign_points(&g, &[5, 9, 7]).unwrap();
        assert_eq!(a.point_community, b.point_community);
        assert_eq!(a.sizes, b.sizes);
        assert_eq!(a.n_communities, b.n_communities);
        assert_eq!(a.singleton_flags, b.singleton_flags);
    }

    #[test]
    fn modularity_field_tracks_the_partition() {
        let g = two_triangles_disjoint();
        let res = assign_points(&g, &[0, 0, 0, 1, 1, 1]).unwrap();
        assert_abs_diff_eq!(res.modularity.unwrap(), 0.5, epsilon = 1e-15);
        let edgeless = graph(3, &[]);
        let res = assign_points(&edgeless, &[0, 1, 2]).unwrap();
        assert_eq!(res.modularity, None);
    }
}
