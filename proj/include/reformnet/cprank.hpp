#pragma once

#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "reformnet/network.hpp"

namespace reformnet {

// Simple undirected graph; vertex indices 0-based.
struct GraphSpec {
    int num_vertices = 0;
    std::vector<std::pair<int, int>> edges;

    int num_edges() const { return static_cast<int>(edges.size()); }
    void validate() const; // throws ShapeError on bad indices / duplicates / loops
};

// k x N edge-vertex incidence matrix: row e has ones at the two endpoints.
Matrix incidence_matrix(const GraphSpec& g);

// True iff no three vertices are mutually adjacent (any clique of size >= 3
// contains a triangle, so this settles clique-freeness).
bool is_triangle_free(const GraphSpec& g);

// Lower bound on the CP-rank of a completely positive matrix. With a graph
// whose incidence Gram E^T E equals `a` and which is triangle-free, the bound
// is exact and equals the edge count; otherwise falls back to the numerical
// rank (rank <= CP-rank always). Throws InvalidInputError if a graph is
// supplied but a != E^T E.
int cp_rank_lower_bound(const Matrix& a, const std::optional<GraphSpec>& g = std::nullopt,
                        double tol = kDefaultTol);

// Complete bipartite graph K_{m,n}: two groups, every cross pair an edge.
GraphSpec complete_bipartite(int m, int n);

// B_N = ((N/2) I, 1; 1, (N/2) I), the incidence Gram of K_{N/2,N/2}.
// Requires N even and >= 2.
Matrix bipartite_matrix(int n);

// Depth-2 relu network (beta = 0) with W_1 = sqrt(N/2) I, W_2 = sqrt(2/N) E^T E:
// maps I_N to B_N with squared parameter norm N^2 + N, N neurons instead of
// the N^2/4 an exact optimum needs.
NetworkParams near_optimal_network(int n);

// Edge-list text format: first line "N k", then k lines "v w".
GraphSpec read_edge_list(std::istream& in);
void write_edge_list(const GraphSpec& g, std::ostream& out);

} // namespace reformnet
