#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "wigner2e/core.hpp"

namespace wigner2e {

struct PurityReport {
    double raw = 0.0;
    // raw, or 1 when raw exceeds 1 + 1e-3 (a discretization warning).
    double value = 0.0;
    bool clipped = false;
};

// Tr(rho^2) = (2 pi hbar)^d int f^2 of a one-electron state. Throws
// ValidationError when |int f - 1| > 1e-4.
PurityReport purity_report(const WignerState& f);
double purity(const WignerState& f);
// Purity of the marginal of electron 1 or 2 of a two-electron state.
double reduced_purity(const WignerState& f, int electron);

// ||f - m1 (x) m2||_2 / ||f||_2 with m_j the marginals of f.
double separability_metric(const WignerState& f);

// Wigner function of a Gaussian packet obtained by numerically transforming
// its density matrix rho(r + s/2, r - s/2) over s (trapezoid rule with
// `nodes_per_sigma` nodes per sigma on |s| <= 24 sigma), then renormalized
// on the grid.
WignerState weyl_oracle_gaussian(const GaussianPacket& packet, const WignerGrid& grid, int nodes_per_sigma = 8);

// Samples a d = 1 one-electron state at the cell centres of another grid by
// trigonometric interpolation along both axes (exact where nodes coincide).
// Throws ValidationError when a target cell lies outside the source cells.
WignerState restrict_to_grid(const WignerState& f, const WignerGrid& target);

enum class Norm { L1, L2 };
const char* to_string(Norm n);
double model_distance(const WignerState& a, const WignerState& b, Norm norm = Norm::L2);

// Time series with the fixed leading columns t, norm, purity1, purity2,
// separability followed by model-specific extra columns.
class ObservableSeries {
public:
    ObservableSeries() = default;
    explicit ObservableSeries(std::vector<std::string> extra_columns);

    static const std::vector<std::string>& base_columns();
    std::vector<std::string> columns() const;
    const std::vector<std::string>& extra_columns() const { return extra_; }

    struct Row {
        double t = 0.0;
        double norm = 0.0;
        double purity1 = 0.0;
        double purity2 = 0.0;
        double separability = 0.0;
        std::vector<double> extra;
    };

    void add(Row row);
    const std::vector<Row>& rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }
    const Row& back() const { return rows_.back(); }
    // Column by name; throws ValidationError for an unknown name.
    std::vector<double> column(const std::string& name) const;

    void write_csv(std::ostream& os) const;

private:
    std::vector<std::string> extra_;
    std::vector<Row> rows_;
};

// Long-format CSV of the (r1, r2) position density, or of the (P1, P2)
// momentum density when `momentum` is set, of a d = 1 two-electron state.
void write_pair_density_csv(const WignerState& f, bool momentum, std::ostream& os);
// CSV of a one-electron state as x[,y],Px[,Py],f rows.
void write_state_csv(const WignerState& f, std::ostream& os);

}  // namespace wigner2e
