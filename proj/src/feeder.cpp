#include "feeder.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <unordered_map>

namespace vvo {

namespace {

// Lines on the path from bus (1-based) to the substation, as 0-based line indices.
std::vector<int> path_lines(const FeederTopology& t, int bus) {
    std::vector<int> lines;
    int cur = bus;
    int hops = 0;
    while (cur != 0) {
        if (cur < 0 || cur > t.bus_count)
            fail(ErrorCode::DisconnectedBus,
                 "bus " + std::to_string(cur) + " referenced but not defined");
        lines.push_back(cur - 1);
        cur = t.parent[static_cast<size_t>(cur - 1)];
        if (++hops > t.bus_count)
            fail(ErrorCode::CycleDetected, "parent pointers do not reach the substation");
    }
    return lines;
}

} // namespace

FeederModel FeederModel::build(const FeederTopology& topology) {
    const int n = topology.bus_count;
    if (n <= 0)
        fail(ErrorCode::InvalidArgument, "feeder needs at least one bus");
    if (static_cast<int>(topology.parent.size()) != n ||
        static_cast<int>(topology.line_r.size()) != n ||
        static_cast<int>(topology.line_x.size()) != n)
        fail(ErrorCode::DimensionMismatch, "parent/line arrays must have bus_count entries");

    for (int k = 0; k < n; ++k) {
        if (topology.line_x[static_cast<size_t>(k)] <= 0.0)
            fail(ErrorCode::NonPositiveReactance,
                 "line to bus " + std::to_string(k + 1) + " has non-positive reactance");
        if (topology.line_r[static_cast<size_t>(k)] < 0.0)
            fail(ErrorCode::NonPositiveReactance,
                 "line to bus " + std::to_string(k + 1) + " has negative resistance");
        if (topology.parent[static_cast<size_t>(k)] == k + 1)
            fail(ErrorCode::CycleDetected, "bus " + std::to_string(k + 1) + " is its own parent");
    }

    // Path from every bus to the root; detects cycles and dangling parents.
    std::vector<std::vector<int>> paths(static_cast<size_t>(n));
    for (int bus = 1; bus <= n; ++bus)
        paths[static_cast<size_t>(bus - 1)] = path_lines(topology, bus);

    FeederModel m;
    m.n_ = n;
    m.v0_ = topology.v0;
    m.topo_ = topology;
    m.r_mat_.setZero(n, n);
    m.x_mat_.setZero(n, n);

    // X_{nm} = sum of reactances over path(n) ∩ path(m); same for R.
    std::vector<char> on_path(static_cast<size_t>(n), 0);
    for (int a = 0; a < n; ++a) {
        for (int l : paths[static_cast<size_t>(a)]) on_path[static_cast<size_t>(l)] = 1;
        for (int b = a; b < n; ++b) {
            double xs = 0.0, rs = 0.0;
            for (int l : paths[static_cast<size_t>(b)]) {
                if (on_path[static_cast<size_t>(l)]) {
                    xs += topology.line_x[static_cast<size_t>(l)];
                    rs += topology.line_r[static_cast<size_t>(l)];
                }
            }
            m.x_mat_(a, b) = m.x_mat_(b, a) = xs;
            m.r_mat_(a, b) = m.r_mat_(b, a) = rs;
        }
        for (int l : paths[static_cast<size_t>(a)]) on_path[static_cast<size_t>(l)] = 0;
    }

    Eigen::LLT<Mat> llt(m.x_mat_);
    if (llt.info() != Eigen::Success)
        fail(ErrorCode::NonPositiveReactance, "sensitivity matrix X is not positive definite");

    if (topology.inverter_buses.size() != topology.q_hat.size() ||
        (!topology.p_bar.empty() && topology.p_bar.size() != topology.inverter_buses.size()))
        fail(ErrorCode::DimensionMismatch, "inverter arrays must have matching lengths");

    std::vector<int> g = topology.inverter_buses;
    std::vector<size_t> order(g.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t i, size_t j) { return g[i] < g[j]; });

    const int ng = static_cast<int>(g.size());
    m.q_hat_.resize(ng);
    m.p_bar_.resize(ng);
    for (int i = 0; i < ng; ++i) {
        const size_t src = order[static_cast<size_t>(i)];
        const int bus = g[src];
        if (bus < 1 || bus > n)
            fail(ErrorCode::DisconnectedBus, "inverter bus " + std::to_string(bus) + " not in feeder");
        if (i > 0 && m.inverters_.back() == bus - 1)
            fail(ErrorCode::InvalidArgument, "duplicate inverter bus " + std::to_string(bus));
        m.inverters_.push_back(bus - 1);
        m.q_hat_(i) = topology.q_hat[src];
        m.p_bar_(i) = topology.p_bar.empty() ? 0.0 : topology.p_bar[src];
    }

    m.x_gg_.resize(ng, ng);
    m.x_ng_.resize(n, ng);
    for (int j = 0; j < ng; ++j) {
        m.x_ng_.col(j) = m.x_mat_.col(m.inverters_[static_cast<size_t>(j)]);
        for (int i = 0; i < ng; ++i)
            m.x_gg_(i, j) = m.x_mat_(m.inverters_[static_cast<size_t>(i)],
                                     m.inverters_[static_cast<size_t>(j)]);
    }
    return m;
}

int FeederModel::external_id(int bus) const {
    if (bus < 0 || bus >= n_)
        fail(ErrorCode::DimensionMismatch, "bus index out of range");
    if (topo_.external_ids.empty()) return bus + 1;
    return topo_.external_ids[static_cast<size_t>(bus)];
}

int FeederModel::internal_bus(int ext) const {
    if (topo_.external_ids.empty()) {
        if (ext < 1 || ext > n_)
            fail(ErrorCode::DisconnectedBus, "unknown bus id " + std::to_string(ext));
        return ext - 1;
    }
    for (size_t k = 0; k < topo_.external_ids.size(); ++k)
        if (topo_.external_ids[k] == ext) return static_cast<int>(k);
    fail(ErrorCode::DisconnectedBus, "unknown bus id " + std::to_string(ext));
}

Vec FeederModel::embed(const Vec& q_g) const {
    if (q_g.size() != inverter_count())
        fail(ErrorCode::DimensionMismatch, "expected |G| entries");
    Vec full = Vec::Zero(n_);
    for (int i = 0; i < inverter_count(); ++i) full(inverters_[static_cast<size_t>(i)]) = q_g(i);
    return full;
}

Vec FeederModel::restrict_g(const Vec& full) const {
    if (full.size() != n_)
        fail(ErrorCode::DimensionMismatch, "expected N entries");
    Vec out(inverter_count());
    for (int i = 0; i < inverter_count(); ++i) out(i) = full(inverters_[static_cast<size_t>(i)]);
    return out;
}

Scenario grid_conditions(const FeederModel& model, const Vec& p_g, const Vec& p_l, const Vec& q_l,
                         long id) {
    const int n = model.bus_count();
    if (p_g.size() != n || p_l.size() != n || q_l.size() != n)
        fail(ErrorCode::DimensionMismatch, "injection vectors must have bus_count entries");
    Scenario s;
    s.id = id;
    s.p_g = p_g;
    s.p_l = p_l;
    s.q_l = q_l;
    s.v_tilde = model.R() * (p_g - p_l) - model.X() * q_l + Vec::Constant(n, model.v0());
    return s;
}

Vec voltages(const FeederModel& model, const Scenario& scenario, const Vec& q) {
    if (q.size() != model.bus_count())
        fail(ErrorCode::DimensionMismatch, "q must have bus_count entries");
    if (scenario.v_tilde.size() != model.bus_count())
        fail(ErrorCode::DimensionMismatch, "scenario does not match feeder");
    return model.X() * q + scenario.v_tilde;
}

} // namespace vvo
