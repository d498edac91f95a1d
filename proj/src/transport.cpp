#include "annolens/metrics.hpp"

#include <cmath>
#include <limits>

namespace annolens {

// Exact transportation problem via successive shortest paths with node
// potentials. Supplies and demands must balance; the bipartite graph is
// complete, so Dijkstra runs as a dense O(V^2) scan. Sizes here are word
// supports of phrase lists, at most a few dozen nodes.
double solve_transport(const Eigen::VectorXd& supply, const Eigen::VectorXd& demand,
                       const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(supply.size());
    const int m = static_cast<int>(demand.size());
    if (n == 0 || m == 0) throw ValidationError("transport problem with empty support");
    if (cost.rows() != n || cost.cols() != m)
        throw ValidationError("transport cost matrix shape mismatch");
    for (int i = 0; i < n; ++i)
        if (!(supply[i] >= 0) || !std::isfinite(supply[i]))
            throw ValidationError("transport supply must be finite and non-negative");
    for (int j = 0; j < m; ++j)
        if (!(demand[j] >= 0) || !std::isfinite(demand[j]))
            throw ValidationError("transport demand must be finite and non-negative");
    if (std::abs(supply.sum() - demand.sum()) > 1e-9)
        throw ValidationError("transport supply and demand masses differ");

    constexpr double kEps = 1e-12;
    constexpr double kInf = std::numeric_limits<double>::infinity();
    const int total = n + m;  // nodes: [0,n) supplies, [n,n+m) demands

    Eigen::VectorXd rem_supply = supply;
    Eigen::VectorXd rem_demand = demand;
    Eigen::MatrixXd flow = Eigen::MatrixXd::Zero(n, m);
    Eigen::VectorXd potential = Eigen::VectorXd::Zero(total);

    std::vector<double> dist(total);
    std::vector<int> parent(total);
    std::vector<bool> done(total);

    // Each augmentation saturates a supply, a demand, or a residual arc;
    // the cap only guards against numerical stalls.
    const long max_iterations = 4L * total * total + 64;
    for (long iteration = 0;; ++iteration) {
        double remaining = std::min(rem_supply.sum(), rem_demand.sum());
        if (remaining <= kEps) break;
        if (iteration > max_iterations)
            throw std::runtime_error("transport solver failed to converge");

        for (int v = 0; v < total; ++v) {
            dist[v] = kInf;
            parent[v] = -1;
            done[v] = false;
        }
        for (int i = 0; i < n; ++i)
            if (rem_supply[i] > kEps) dist[i] = 0.0;

        for (int step = 0; step < total; ++step) {
            int u = -1;
            double best = kInf;
            for (int v = 0; v < total; ++v)
                if (!done[v] && dist[v] < best) {
                    best = dist[v];
                    u = v;
                }
            if (u < 0) break;
            done[u] = true;
            if (u < n) {
                for (int j = 0; j < m; ++j) {
                    double reduced = cost(u, j) + potential[u] - potential[n + j];
                    if (reduced < 0) reduced = 0;  // clamp rounding noise
                    if (dist[u] + reduced < dist[n + j]) {
                        dist[n + j] = dist[u] + reduced;
                        parent[n + j] = u;
                    }
                }
            } else {
                int j = u - n;
                for (int i = 0; i < n; ++i) {
                    if (flow(i, j) <= kEps) continue;
                    double reduced = -cost(i, j) + potential[u] - potential[i];
                    if (reduced < 0) reduced = 0;
                    if (dist[u] + reduced < dist[i]) {
                        dist[i] = dist[u] + reduced;
                        parent[i] = u;
                    }
                }
            }
        }

        int sink = -1;
        double best = kInf;
        for (int j = 0; j < m; ++j)
            if (rem_demand[j] > kEps && dist[n + j] < best) {
                best = dist[n + j];
                sink = n + j;
            }
        if (sink < 0) throw std::runtime_error("transport solver found no augmenting path");

        // bottleneck along the path
        double amount = rem_demand[sink - n];
        int v = sink;
        while (parent[v] >= 0) {
            int u = parent[v];
            if (v >= n)
                amount = std::min(amount, kInf);  // forward arcs are uncapacitated
            else
                amount = std::min(amount, flow(v, u - n));  // backward arc u(j) -> v(i)
            v = u;
        }
        amount = std::min(amount, rem_supply[v]);

        int w = sink;
        while (parent[w] >= 0) {
            int u = parent[w];
            if (w >= n)
                flow(u, w - n) += amount;
            else
                flow(w, u - n) -= amount;
            w = u;
        }
        rem_supply[v] -= amount;
        rem_demand[sink - n] -= amount;

        for (int node = 0; node < total; ++node)
            if (std::isfinite(dist[node])) potential[node] += dist[node];
    }

    double total_cost = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) total_cost += flow(i, j) * cost(i, j);
    return total_cost;
}

}  // namespace annolens
