#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "core.hpp"

namespace ehwsn {

// Weight of log D_n in the subset-sum bound. The Gaussian entropy carries a
// 1/2 and the (2 pi e) factors cancel, so the bound is
// sum_X R >= 1/2 log(det O / det O_{X^c}) - 1/2 sum_X log D.
inline constexpr double kDistortionLogWeight = 0.5;
inline constexpr double kSingularDet = 1e-12;

using Mask = std::uint32_t;

inline int popcount(Mask m) { return __builtin_popcount(m); }

inline Mask full_mask(int n) { return n >= 32 ? ~Mask{0} : ((Mask{1} << n) - 1); }

inline double det_sub(const Matrix& O, Mask m) {
    std::vector<int> idx;
    for (int i = 0; i < static_cast<int>(O.size()); ++i)
        if (m & (Mask{1} << i)) idx.push_back(i);
    if (idx.empty()) return 1.0;
    Eigen::MatrixXd A(idx.size(), idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = 0; b < idx.size(); ++b)
            A(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                O[static_cast<std::size_t>(idx[a])][static_cast<std::size_t>(idx[b])];
    return A.determinant();
}

inline void check_correlation(const Matrix& O) {
    const std::size_t n = O.size();
    for (const auto& row : O)
        if (row.size() != n) throw std::invalid_argument("correlation matrix not square");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (std::abs(O[i][j] - O[j][i]) > 1e-12)
                throw std::invalid_argument("correlation matrix not symmetric");
    if (det_sub(O, full_mask(static_cast<int>(n))) <= kSingularDet)
        throw std::invalid_argument("correlation matrix singular");
}

inline double conditional_entropy_gauss(Mask X, const Matrix& O) {
    const int n = static_cast<int>(O.size());
    if (X == 0 || (X & ~full_mask(n))) throw std::invalid_argument("subset out of range");
    double full = det_sub(O, full_mask(n));
    double rest = det_sub(O, full_mask(n) & ~X);
    if (full <= kSingularDet || rest <= kSingularDet)
        throw std::domain_error("singular correlation submatrix");
    return 0.5 * log_b(full / rest);
}

inline double region_rate_bound(Mask X, const Matrix& O, const std::vector<double>& D) {
    double s = conditional_entropy_gauss(X, O);
    for (int i = 0; i < static_cast<int>(O.size()); ++i) {
        if (!(X & (Mask{1} << i))) continue;
        double d = D[static_cast<std::size_t>(i)];
        if (!(d > 0)) throw std::invalid_argument("distortion must be positive");
        s -= kDistortionLogWeight * log_b(d);
    }
    return std::max(0.0, s);
}

// Precomputed entropy terms g(X, O) for every nonempty subset.
struct Region {
    int n = 0;
    std::vector<double> g;  // indexed by mask, g[0] unused

    static Region build(const Matrix& O) {
        check_correlation(O);
        Region r;
        r.n = static_cast<int>(O.size());
        r.g.assign(static_cast<std::size_t>(full_mask(r.n)) + 1, 0.0);
        for (Mask m = 1; m <= full_mask(r.n); ++m) r.g[m] = conditional_entropy_gauss(m, O);
        return r;
    }

    std::size_t num_constraints() const { return g.size() - 1; }

    // Unclipped requirement on sum_X R for distortions D.
    double requirement(Mask X, const std::vector<double>& D) const {
        double s = g[X];
        for (int i = 0; i < n; ++i)
            if (X & (Mask{1} << i)) s -= kDistortionLogWeight * log_b(D[static_cast<std::size_t>(i)]);
        return s;
    }

    // Positive value means the subset constraint is violated by that much.
    double violation(Mask X, const std::vector<double>& R, const std::vector<double>& D) const {
        double s = requirement(X, D);
        for (int i = 0; i < n; ++i)
            if (X & (Mask{1} << i)) s -= R[static_cast<std::size_t>(i)];
        return s;
    }
};

struct Feasibility {
    bool feasible = true;
    std::vector<Mask> violated;
    double worst = 0.0;
};

inline Feasibility region_feasible(const std::vector<double>& R, const std::vector<double>& D,
                                   const Matrix& O, double tol = 0.0) {
    Region reg = Region::build(O);
    Feasibility f;
    for (Mask m = 1; m <= full_mask(reg.n); ++m) {
        double v = reg.violation(m, R, D);
        f.worst = std::max(f.worst, v);
        if (v > tol) {
            f.feasible = false;
            f.violated.push_back(m);
        }
    }
    return f;
}

inline Matrix exchangeable_O(double omega, int n) {
    Matrix O(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), omega));
    for (int i = 0; i < n; ++i) O[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0;
    return O;
}

inline Matrix conditional_O_with_side_info(double omega, double R_d, int n = 3) {
    if (omega < 0 || omega >= 1) throw std::invalid_argument("omega must lie in [0,1)");
    if (R_d < 0) throw std::invalid_argument("side-info rate must be >= 0");
    double wd = 1.0 - std::exp2(-R_d);
    Matrix O(static_cast<std::size_t>(n),
             std::vector<double>(static_cast<std::size_t>(n), omega * (1.0 - wd)));
    for (int i = 0; i < n; ++i)
        O[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0 - omega * wd;
    return O;
}

}  // namespace ehwsn
