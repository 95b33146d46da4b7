#pragma once

/**
 * @file conic.hpp
 * @brief Standard-form semidefinite feasibility problems over svec space.
 *
 * Each cone block i asks that smat(c_i + sum_j y_j a_ij) - mu I be positive
 * semidefinite (the mu shift only on "shifted" blocks); the objective is to
 * maximize mu. svec stacks the lower triangle column by column with
 * off-diagonal entries scaled by sqrt(2), so <svec X, svec Y> = trace(X Y).
 */

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ltvcert {

/// d (d + 1) / 2
[[nodiscard]] constexpr int svec_dim(int d) { return d * (d + 1) / 2; }

[[nodiscard]] inline Eigen::VectorXd svec(const Eigen::MatrixXd& x) {
    if (x.rows() != x.cols())
        throw std::invalid_argument("svec of non-square matrix");
    const int d = static_cast<int>(x.rows());
    const double r2 = std::sqrt(2.0);
    Eigen::VectorXd out(svec_dim(d));
    int idx = 0;
    for (int j = 0; j < d; ++j)
        for (int i = j; i < d; ++i)
            out[idx++] = (i == j) ? x(i, j) : r2 * x(i, j);
    return out;
}

[[nodiscard]] inline int smat_dim(Eigen::Index len) {
    const int d = static_cast<int>(std::lround((std::sqrt(8.0 * static_cast<double>(len) + 1.0) - 1.0) / 2.0));
    if (svec_dim(d) != len)
        throw std::invalid_argument("svec length " + std::to_string(len) + " is not triangular");
    return d;
}

namespace detail {

inline int trailing_zero_bits(double x) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &x, sizeof bits);
    bits &= (std::uint64_t{1} << 52) - 1;
    return bits == 0 ? 52 : std::countr_zero(bits);
}

// Undoes the sqrt(2) scaling of an off-diagonal entry. Among the doubles next
// to v / sqrt(2) whose scaled image is exactly v, the one with the shortest
// mantissa is chosen, so short (e.g. dyadic) entries survive svec/smat exactly.
inline double unscale_off_diagonal(double v) {
    const double r2 = std::sqrt(2.0);
    const double c = v / r2;
    double best = c;
    int best_bits = -1;
    for (double cand : {c, std::nextafter(c, -INFINITY), std::nextafter(c, INFINITY)}) {
        if (cand * r2 != v)
            continue;
        const int bits = trailing_zero_bits(cand);
        if (bits > best_bits) {
            best = cand;
            best_bits = bits;
        }
    }
    return best;
}

}  // namespace detail

[[nodiscard]] inline Eigen::MatrixXd smat(const Eigen::VectorXd& v) {
    const int d = smat_dim(v.size());
    Eigen::MatrixXd out(d, d);
    int idx = 0;
    for (int j = 0; j < d; ++j)
        for (int i = j; i < d; ++i) {
            const double val = (i == j) ? v[idx] : detail::unscale_off_diagonal(v[idx]);
            out(i, j) = val;
            out(j, i) = val;
            ++idx;
        }
    return out;
}

/// One PSD cone constraint of the standard form.
struct ConeBlock {
    int dim = 0;
    Eigen::VectorXd constant;                                 // svec, length svec_dim(dim)
    std::vector<std::pair<int, Eigen::VectorXd>> coefficients;  // (scalar index, svec), sorted by index
    bool shifted = true;                                      // subtract mu I
    std::string label;
};

/// Blocks are pre-divided by max(1, ||constant||_F) before solving; margins are reported in these units.
[[nodiscard]] inline double block_scale(const ConeBlock& b) {
    return std::max(1.0, smat(b.constant).norm());
}

struct StandardConicForm {
    int num_scalars = 0;  // stacked decision vector length, excluding mu
    bool has_margin = true;
    std::vector<ConeBlock> blocks;

    /// Matrix of block i at (y, mu), including the mu shift.
    [[nodiscard]] Eigen::MatrixXd block_value(std::size_t i, const Eigen::VectorXd& y, double mu) const {
        const auto& b = blocks.at(i);
        Eigen::VectorXd v = b.constant;
        for (const auto& [j, c] : b.coefficients)
            v += y[j] * c;
        Eigen::MatrixXd m = smat(v);
        if (has_margin && b.shifted)
            m.diagonal().array() -= mu;
        return m;
    }

    /// Throws std::invalid_argument on inconsistent dimensions.
    void check() const {
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            const auto& b = blocks[i];
            const auto len = svec_dim(b.dim);
            if (b.dim < 1 || b.constant.size() != len)
                throw std::invalid_argument("block " + std::to_string(i) + ": bad constant length");
            for (const auto& [j, c] : b.coefficients)
                if (j < 0 || j >= num_scalars || c.size() != len)
                    throw std::invalid_argument("block " + std::to_string(i) + ": bad coefficient for scalar " +
                                                std::to_string(j));
        }
    }
};

namespace detail {

inline void write_vector(std::ostream& os, const Eigen::VectorXd& v) {
    char buf[32];
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", v[i]);
        os << ' ' << buf;
    }
}

}  // namespace detail

/**
 * @brief Text dump of a standard form, one constraint per block.
 *
 *     ltvcert-conic 1
 *     scalars <m> margin <0|1> blocks <count>
 *     block <i> dim <d> shifted <0|1> label <rest of line>
 *     const <svec...>
 *     coef <j> <svec...>
 *     end
 */
inline void dump(std::ostream& os, const StandardConicForm& form) {
    os << "ltvcert-conic 1\n";
    os << "scalars " << form.num_scalars << " margin " << (form.has_margin ? 1 : 0) << " blocks "
       << form.blocks.size() << '\n';
    for (std::size_t i = 0; i < form.blocks.size(); ++i) {
        const auto& b = form.blocks[i];
        os << "block " << i << " dim " << b.dim << " shifted " << (b.shifted ? 1 : 0) << " label " << b.label
           << '\n';
        os << "const";
        detail::write_vector(os, b.constant);
        os << '\n';
        for (const auto& [j, c] : b.coefficients) {
            os << "coef " << j;
            detail::write_vector(os, c);
            os << '\n';
        }
        os << "end\n";
    }
}

[[nodiscard]] inline StandardConicForm load(std::istream& is) {
    auto fail = [](const std::string& what) { throw std::runtime_error("conic dump: " + what); };
    std::string line, word;
    if (!std::getline(is, line) || line != "ltvcert-conic 1")
        fail("missing header");
    StandardConicForm form;
    std::size_t count = 0;
    {
        if (!std::getline(is, line))
            fail("missing sizes");
        std::istringstream ss(line);
        int margin = 0;
        std::string w1, w2, w3;
        if (!(ss >> w1 >> form.num_scalars >> w2 >> margin >> w3 >> count) || w1 != "scalars" ||
            w2 != "margin" || w3 != "blocks")
            fail("bad size line");
        form.has_margin = margin != 0;
    }
    auto read_values = [&](std::istringstream& ss, int len) {
        Eigen::VectorXd v(len);
        for (int k = 0; k < len; ++k)
            if (!(ss >> v[k]))
                fail("short vector");
        return v;
    };
    for (std::size_t i = 0; i < count; ++i) {
        ConeBlock b;
        if (!std::getline(is, line))
            fail("missing block header");
        std::istringstream hs(line);
        std::size_t idx = 0;
        int shifted = 0;
        std::string w1, w2, w3, w4;
        if (!(hs >> w1 >> idx >> w2 >> b.dim >> w3 >> shifted >> w4) || w1 != "block" || w2 != "dim" ||
            w3 != "shifted" || w4 != "label" || idx != i)
            fail("bad block header");
        b.shifted = shifted != 0;
        std::getline(hs >> std::ws, b.label);
        const int len = svec_dim(b.dim);
        if (!std::getline(is, line))
            fail("missing const");
        std::istringstream cs(line);
        if (!(cs >> word) || word != "const")
            fail("bad const line");
        b.constant = read_values(cs, len);
        while (std::getline(is, line) && line != "end") {
            std::istringstream ks(line);
            int j = 0;
            if (!(ks >> word >> j) || word != "coef")
                fail("bad coef line");
            b.coefficients.emplace_back(j, read_values(ks, len));
        }
        form.blocks.push_back(std::move(b));
    }
    form.check();
    return form;
}

}  // namespace ltvcert
