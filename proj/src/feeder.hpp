#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "errors.hpp"

namespace vvo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Raw description of a radial feeder. Buses are indexed 1..N with the
/// substation as bus 0; `parent[k]` is the upstream bus of bus k+1 and
/// `line_r[k]`, `line_x[k]` the impedance of the line connecting them.
struct FeederTopology {
    int bus_count = 0;
    std::vector<int> parent;
    std::vector<double> line_r;
    std::vector<double> line_x;
    double v0 = 1.0;
    std::vector<int> inverter_buses;   // 1-based bus indices hosting Volt/VAR DERs
    std::vector<double> q_hat;         // reactive capability per inverter, pu
    std::vector<double> p_bar;         // kW rating per inverter, pu
    std::vector<int> external_ids;     // original file ids, external_ids[k] <-> bus k+1
};

/// Immutable feeder model with the voltage sensitivity matrices.
/// v = X q + vtilde, with X_{nm} the summed reactance of the common path
/// from buses n and m to the substation (R analogously from resistances).
class FeederModel {
public:
    static FeederModel build(const FeederTopology& topology);

    int bus_count() const { return n_; }
    double v0() const { return v0_; }
    const Mat& R() const { return r_mat_; }
    const Mat& X() const { return x_mat_; }

    const std::vector<int>& inverters() const { return inverters_; }   // 0-based bus indices
    int inverter_count() const { return static_cast<int>(inverters_.size()); }
    const Vec& q_hat() const { return q_hat_; }
    const Vec& p_bar() const { return p_bar_; }

    /// Submatrix of X over the inverter set and the N x |G| column block.
    const Mat& X_gg() const { return x_gg_; }
    const Mat& X_ng() const { return x_ng_; }

    const FeederTopology& topology() const { return topo_; }
    int external_id(int bus) const;               // 0-based internal -> file id
    int internal_bus(int external_id) const;      // file id -> 0-based internal

    /// Embed a |G|-vector into a full N-vector (zeros off the inverter set).
    Vec embed(const Vec& q_g) const;
    /// Restrict a full N-vector to the inverter set.
    Vec restrict_g(const Vec& full) const;

private:
    FeederModel() = default;

    int n_ = 0;
    double v0_ = 1.0;
    Mat r_mat_, x_mat_, x_gg_, x_ng_;
    std::vector<int> inverters_;
    Vec q_hat_, p_bar_;
    FeederTopology topo_;
};

/// Per-bus injections and the derived grid-conditions vector
/// vtilde = R (p_g - p_l) - X q_l + v0 * 1.
struct Scenario {
    long id = 0;
    Vec p_g, p_l, q_l;
    Vec v_tilde;
};

struct ScenarioSet {
    std::vector<Scenario> scenarios;

    int count() const { return static_cast<int>(scenarios.size()); }
    const Scenario& operator[](int s) const { return scenarios[static_cast<size_t>(s)]; }
};

/// Derive the grid-conditions vector for one injection tuple.
Scenario grid_conditions(const FeederModel& model, const Vec& p_g, const Vec& p_l, const Vec& q_l,
                         long id = 0);

/// Voltage profile under reactive injections q (full-length, zeros outside G).
Vec voltages(const FeederModel& model, const Scenario& scenario, const Vec& q);

} // namespace vvo
