#include "reformnet/cprank.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <string>

namespace reformnet {

void GraphSpec::validate() const {
    if (num_vertices <= 0)
        throw ShapeError("graph needs at least one vertex");
    std::set<std::pair<int, int>> seen;
    for (auto [v, w] : edges) {
        if (v == w)
            throw ShapeError("self-loop at vertex " + std::to_string(v));
        if (v < 0 || w < 0 || v >= num_vertices || w >= num_vertices)
            throw ShapeError("edge endpoint out of range");
        if (!seen.insert(std::minmax(v, w)).second)
            throw ShapeError("duplicate edge");
    }
}

Matrix incidence_matrix(const GraphSpec& g) {
    g.validate();
    Matrix e = Matrix::Zero(g.num_edges(), g.num_vertices);
    for (int row = 0; row < g.num_edges(); ++row) {
        e(row, g.edges[row].first) = 1.0;
        e(row, g.edges[row].second) = 1.0;
    }
    return e;
}

bool is_triangle_free(const GraphSpec& g) {
    g.validate();
    std::vector<std::vector<bool>> adj(g.num_vertices,
                                       std::vector<bool>(g.num_vertices, false));
    for (auto [v, w] : g.edges) adj[v][w] = adj[w][v] = true;
    for (auto [v, w] : g.edges)
        for (int u = 0; u < g.num_vertices; ++u)
            if (adj[v][u] && adj[w][u]) return false;
    return true;
}

int cp_rank_lower_bound(const Matrix& a, const std::optional<GraphSpec>& g, double tol) {
    if (!all_finite(a))
        throw InvalidInputError("non-finite entries in matrix");
    if (g) {
        const Matrix gram = incidence_matrix(*g).transpose() * incidence_matrix(*g);
        if (a.rows() != gram.rows() || a.cols() != gram.cols() ||
            (a - gram).lpNorm<Eigen::Infinity>() > 1e-9)
            throw InvalidInputError("matrix does not equal E^T E of the supplied graph");
        if (is_triangle_free(*g)) return g->num_edges();
    }
    return static_cast<int>(numerical_rank(a, tol));
}

GraphSpec complete_bipartite(int m, int n) {
    GraphSpec g;
    g.num_vertices = m + n;
    for (int v = 0; v < m; ++v)
        for (int w = 0; w < n; ++w) g.edges.emplace_back(v, m + w);
    return g;
}

Matrix bipartite_matrix(int n) {
    if (n < 2 || n % 2 != 0)
        throw ShapeError("bipartite_matrix requires even N >= 2");
    const int h = n / 2;
    Matrix b = Matrix::Zero(n, n);
    b.topLeftCorner(h, h) = (static_cast<double>(h)) * Matrix::Identity(h, h);
    b.bottomRightCorner(h, h) = b.topLeftCorner(h, h);
    b.topRightCorner(h, h).setOnes();
    b.bottomLeftCorner(h, h).setOnes();
    return b;
}

NetworkParams near_optimal_network(int n) {
    if (n < 2 || n % 2 != 0)
        throw ShapeError("near_optimal_network requires even N >= 2");
    const double nd = static_cast<double>(n);
    NetworkParams params;
    params.beta = 0.0;
    params.activation = Activation::relu();
    Matrix w1 = Matrix::Zero(n, n + 1);
    w1.leftCols(n) = std::sqrt(nd / 2.0) * Matrix::Identity(n, n);
    Matrix w2 = Matrix::Zero(n, n + 1);
    w2.leftCols(n) = std::sqrt(2.0 / nd) * bipartite_matrix(n);
    params.weights = {std::move(w1), std::move(w2)};
    return params;
}

GraphSpec read_edge_list(std::istream& in) {
    GraphSpec g;
    int k = 0;
    if (!(in >> g.num_vertices >> k))
        throw ShapeError("edge list must start with 'N k'");
    for (int i = 0; i < k; ++i) {
        int v = 0, w = 0;
        if (!(in >> v >> w))
            throw ShapeError("expected " + std::to_string(k) + " edges");
        g.edges.emplace_back(v, w);
    }
    g.validate();
    return g;
}

void write_edge_list(const GraphSpec& g, std::ostream& out) {
    out << g.num_vertices << ' ' << g.num_edges() << '\n';
    for (auto [v, w] : g.edges) out << v << ' ' << w << '\n';
}

} // namespace reformnet
