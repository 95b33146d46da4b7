#pragma once

/**
 * @file lmi.hpp
 * @brief Affine matrix expressions over symmetric / skew matrix variables.
 *
 * An expression is a constant plus terms of the form L X R or <L X R>_S
 * (= L X R + (L X R)^T) where X is a decision variable. Keeping the
 * coefficient maps in this operator form means block assembly is just
 * re-embedding L and R, and the lowered standard form is produced by applying
 * each term to the scalar basis of its variable.
 */

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "conic.hpp"

namespace ltvcert::lmi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class VariableKind { symmetric, skew };

struct MatrixVariable {
    int id = -1;
    VariableKind kind = VariableKind::symmetric;
    int dim = 0;
    std::string name;

    /// Free scalars: d(d+1)/2 for symmetric, d(d-1)/2 for skew.
    [[nodiscard]] int scalar_count() const {
        return kind == VariableKind::symmetric ? dim * (dim + 1) / 2 : dim * (dim - 1) / 2;
    }

    /// Basis matrix for scalar s; the scalar's value is entry (i, j) with i >= j.
    [[nodiscard]] std::pair<int, int> scalar_position(int s) const {
        const int first_row_offset = kind == VariableKind::symmetric ? 0 : 1;
        for (int j = 0; j < dim; ++j) {
            const int len = dim - j - first_row_offset;
            if (s < len)
                return {j + first_row_offset + s, j};
            s -= len;
        }
        throw std::out_of_range("scalar index out of range for " + name);
    }
};

/// Value of a variable from its scalars.
[[nodiscard]] inline Matrix realize(const MatrixVariable& var, const Eigen::Ref<const Vector>& scalars) {
    Matrix x = Matrix::Zero(var.dim, var.dim);
    for (int s = 0; s < var.scalar_count(); ++s) {
        auto [i, j] = var.scalar_position(s);
        x(i, j) = scalars[s];
        x(j, i) = var.kind == VariableKind::symmetric ? scalars[s] : -scalars[s];
    }
    return x;
}

/// Inverse of realize (reads the lower triangle).
[[nodiscard]] inline Vector scalars_of(const MatrixVariable& var, const Matrix& value) {
    Vector out(var.scalar_count());
    for (int s = 0; s < var.scalar_count(); ++s) {
        auto [i, j] = var.scalar_position(s);
        out[s] = value(i, j);
    }
    return out;
}

/// Variable assignment keyed by variable id.
using Assignment = std::map<int, Matrix>;

struct Term {
    MatrixVariable var;
    Matrix left;   // rows x dim
    Matrix right;  // dim x cols
    bool symmetrize = false;

    [[nodiscard]] Matrix apply(const Matrix& x) const {
        Matrix v = left * x * right;
        if (symmetrize)
            return v + v.transpose();
        return v;
    }
};

class AffineMatrixExpr {
  public:
    AffineMatrixExpr() = default;

    explicit AffineMatrixExpr(Matrix constant) : constant_(std::move(constant)) {}

    static AffineMatrixExpr zero(Eigen::Index rows, Eigen::Index cols) {
        return AffineMatrixExpr(Matrix::Zero(rows, cols));
    }

    static AffineMatrixExpr of(const MatrixVariable& var) {
        AffineMatrixExpr e(Matrix::Zero(var.dim, var.dim));
        e.terms_.push_back(Term{var, Matrix::Identity(var.dim, var.dim), Matrix::Identity(var.dim, var.dim), false});
        return e;
    }

    [[nodiscard]] Eigen::Index rows() const { return constant_.rows(); }
    [[nodiscard]] Eigen::Index cols() const { return constant_.cols(); }
    [[nodiscard]] const Matrix& constant() const { return constant_; }
    [[nodiscard]] const std::vector<Term>& terms() const { return terms_; }

    [[nodiscard]] Matrix evaluate(const Assignment& values) const {
        Matrix out = constant_;
        for (const auto& t : terms_) {
            auto it = values.find(t.var.id);
            if (it == values.end())
                throw std::invalid_argument("no value for variable " + t.var.name);
            out += t.apply(it->second);
        }
        return out;
    }

    /// Constant symmetric and every term symmetric-producing.
    [[nodiscard]] bool is_structurally_symmetric() const {
        if (rows() != cols())
            return false;
        const double tol = 1e-12 * (1.0 + constant_.cwiseAbs().maxCoeff());
        if ((constant_ - constant_.transpose()).cwiseAbs().maxCoeff() > tol)
            return false;
        for (const auto& t : terms_) {
            if (t.symmetrize)
                continue;
            // a plain term must map every basis element of its variable to a symmetric matrix
            for (int s = 0; s < t.var.scalar_count(); ++s) {
                auto [i, j] = t.var.scalar_position(s);
                Matrix e = Matrix::Zero(t.var.dim, t.var.dim);
                e(i, j) = 1.0;
                e(j, i) = t.var.kind == VariableKind::symmetric ? 1.0 : -1.0;
                const Matrix v = t.left * e * t.right;
                if ((v - v.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + v.cwiseAbs().maxCoeff()))
                    return false;
            }
        }
        return true;
    }

    AffineMatrixExpr& operator+=(const AffineMatrixExpr& o) {
        check_same_shape(o);
        constant_ += o.constant_;
        terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
        return *this;
    }

    AffineMatrixExpr& operator-=(const AffineMatrixExpr& o) { return *this += -o; }

    AffineMatrixExpr& operator*=(double s) {
        constant_ *= s;
        for (auto& t : terms_)
            t.left *= s;
        return *this;
    }

    friend AffineMatrixExpr operator+(AffineMatrixExpr a, const AffineMatrixExpr& b) { return a += b; }
    friend AffineMatrixExpr operator-(AffineMatrixExpr a, const AffineMatrixExpr& b) { return a -= b; }
    friend AffineMatrixExpr operator-(AffineMatrixExpr a) { return a *= -1.0; }
    friend AffineMatrixExpr operator*(double s, AffineMatrixExpr a) { return a *= s; }
    friend AffineMatrixExpr operator*(AffineMatrixExpr a, double s) { return a *= s; }

    /// L * expr
    friend AffineMatrixExpr operator*(const Matrix& l, const AffineMatrixExpr& e) {
        if (l.cols() != e.rows())
            throw std::invalid_argument("left multiplication: dimension mismatch");
        AffineMatrixExpr out(l * e.constant_);
        for (const auto& t : e.terms_) {
            if (t.symmetrize) {
                // L (A + A^T) = L A + L A^T, split into two plain terms
                out.terms_.push_back(Term{t.var, l * t.left, t.right, false});
                const double sign = t.var.kind == VariableKind::symmetric ? 1.0 : -1.0;
                out.terms_.push_back(Term{t.var, sign * l * t.right.transpose(), t.left.transpose(), false});
            } else {
                out.terms_.push_back(Term{t.var, l * t.left, t.right, false});
            }
        }
        return out;
    }

    /// expr * R
    friend AffineMatrixExpr operator*(const AffineMatrixExpr& e, const Matrix& r) {
        return (r.transpose() * e.transpose()).transpose();
    }

    [[nodiscard]] AffineMatrixExpr transpose() const {
        AffineMatrixExpr out(constant_.transpose());
        for (const auto& t : terms_) {
            if (t.symmetrize) {
                out.terms_.push_back(t);
                continue;
            }
            // (L X R)^T = R^T X^T L^T, X^T = -X for skew variables
            const double sign = t.var.kind == VariableKind::symmetric ? 1.0 : -1.0;
            out.terms_.push_back(Term{t.var, sign * t.right.transpose(), t.left.transpose(), false});
        }
        return out;
    }

    /// expr + expr^T, with every term kept in symmetrized form
    [[nodiscard]] AffineMatrixExpr symmetrized() const {
        if (rows() != cols())
            throw std::invalid_argument("sym of non-square expression");
        AffineMatrixExpr out(constant_ + constant_.transpose());
        for (const auto& t : terms_) {
            Term u = t;
            if (u.symmetrize)
                u.left *= 2.0;
            u.symmetrize = true;
            out.terms_.push_back(std::move(u));
        }
        return out;
    }

    /// Places this expression at (row, col) of a zero rows x cols matrix.
    [[nodiscard]] AffineMatrixExpr embed(Eigen::Index row, Eigen::Index col, Eigen::Index total_rows,
                                         Eigen::Index total_cols) const {
        const Matrix er = Matrix::Identity(total_rows, total_rows).middleCols(row, rows());
        const Matrix ec = Matrix::Identity(total_cols, total_cols).middleRows(col, cols());
        AffineMatrixExpr out(er * constant_ * ec);
        for (const auto& t : terms_) {
            if (t.symmetrize && (row != col || total_rows != total_cols))
                throw std::logic_error("embed: symmetrized terms only on diagonal positions");
            out.terms_.push_back(Term{t.var, er * t.left, t.right * ec, t.symmetrize});
        }
        return out;
    }

    /// <E_r B E_c>_S for an off-diagonal placement; B need not be symmetric.
    [[nodiscard]] AffineMatrixExpr embed_symmetric_pair(Eigen::Index row, Eigen::Index col,
                                                        Eigen::Index total) const {
        const Matrix er = Matrix::Identity(total, total).middleCols(row, rows());
        const Matrix ec = Matrix::Identity(total, total).middleRows(col, cols());
        Matrix c = er * constant_ * ec;
        AffineMatrixExpr out(c + c.transpose());
        for (const auto& t : terms_) {
            out.terms_.push_back(Term{t.var, er * t.left, t.right * ec, true});
            if (t.symmetrize) {
                const double sign = t.var.kind == VariableKind::symmetric ? 1.0 : -1.0;
                out.terms_.push_back(Term{t.var, sign * er * t.right.transpose(), t.left.transpose() * ec, true});
            }
        }
        return out;
    }

  private:
    void check_same_shape(const AffineMatrixExpr& o) const {
        if (rows() != o.rows() || cols() != o.cols())
            throw std::invalid_argument("expression shape mismatch: " + std::to_string(rows()) + "x" +
                                        std::to_string(cols()) + " vs " + std::to_string(o.rows()) + "x" +
                                        std::to_string(o.cols()));
    }

    Matrix constant_{Matrix::Zero(0, 0)};
    std::vector<Term> terms_;
};

/// <X>_S = X + X^T
[[nodiscard]] inline AffineMatrixExpr sym(const AffineMatrixExpr& x) { return x.symmetrized(); }

[[nodiscard]] inline Matrix sym(const Matrix& x) {
    if (x.rows() != x.cols())
        throw std::invalid_argument("sym of non-square matrix");
    return x + x.transpose();
}

/// Upper-triangular block grid; std::nullopt below the diagonal is the transpose fill.
using BlockGrid = std::vector<std::vector<std::optional<AffineMatrixExpr>>>;

/**
 * @brief Assembles a symmetric expression from its upper block triangle.
 *
 * Diagonal blocks fix the partition sizes and must be square; block (i, j),
 * j > i, must be size_i x size_j. Entries below the diagonal are ignored and
 * filled with the transpose of their mirror.
 */
[[nodiscard]] inline AffineMatrixExpr block(const BlockGrid& grid) {
    const std::size_t nb = grid.size();
    std::vector<Eigen::Index> size(nb), offset(nb + 1, 0);
    for (std::size_t i = 0; i < nb; ++i) {
        if (grid[i].size() != nb)
            throw std::invalid_argument("block grid is not square");
        if (!grid[i][i])
            throw std::invalid_argument("missing diagonal block " + std::to_string(i));
        if (grid[i][i]->rows() != grid[i][i]->cols())
            throw std::invalid_argument("non-square diagonal block " + std::to_string(i));
        size[i] = grid[i][i]->rows();
        offset[i + 1] = offset[i] + size[i];
    }
    const Eigen::Index total = offset[nb];
    AffineMatrixExpr out = AffineMatrixExpr::zero(total, total);
    for (std::size_t i = 0; i < nb; ++i) {
        out += grid[i][i]->embed(offset[i], offset[i], total, total);
        for (std::size_t j = i + 1; j < nb; ++j) {
            if (!grid[i][j])
                continue;
            const auto& b = *grid[i][j];
            if (b.rows() != size[i] || b.cols() != size[j])
                throw std::invalid_argument("block (" + std::to_string(i) + "," + std::to_string(j) +
                                            ") has inconsistent size");
            out += b.embed_symmetric_pair(offset[i], offset[j], total);
        }
    }
    return out;
}

enum class Sense {
    negative_definite,  // expr < 0, lowered as -expr >= mu I
    positive_definite,  // expr > 0, lowered as expr >= mu I
    bound,              // expr >= 0, normalization only, not shifted by mu
};

struct DefinitenessConstraint {
    AffineMatrixExpr expr;
    Sense sense = Sense::negative_definite;
    std::string label;
    int segment = -1;  // segment index k, -1 when not segment-specific
};

/// Sign-normalized value: the matrix that must be positive (semi)definite.
[[nodiscard]] inline Matrix normalized_value(const DefinitenessConstraint& c, const Assignment& values) {
    Matrix v = c.expr.evaluate(values);
    return c.sense == Sense::negative_definite ? Matrix(-v) : v;
}

class LmiProblem {
  public:
    MatrixVariable add_variable(VariableKind kind, int dim, std::string name) {
        MatrixVariable v{static_cast<int>(variables_.size()), kind, dim, std::move(name)};
        offsets_.push_back(num_scalars_);
        num_scalars_ += v.scalar_count();
        variables_.push_back(v);
        return v;
    }

    void add_constraint(AffineMatrixExpr expr, Sense sense, std::string label, int segment = -1) {
        if (!expr.is_structurally_symmetric())
            throw std::invalid_argument("constraint '" + label + "' is not structurally symmetric");
        for (const auto& t : expr.terms())
            if (t.var.id < 0 || t.var.id >= static_cast<int>(variables_.size()))
                throw std::invalid_argument("constraint '" + label + "' references undeclared variable");
        constraints_.push_back(DefinitenessConstraint{std::move(expr), sense, std::move(label), segment});
    }

    [[nodiscard]] const std::vector<MatrixVariable>& variables() const { return variables_; }
    [[nodiscard]] const std::vector<DefinitenessConstraint>& constraints() const { return constraints_; }
    [[nodiscard]] int num_scalars() const { return num_scalars_; }
    [[nodiscard]] int offset(int var_id) const { return offsets_.at(static_cast<std::size_t>(var_id)); }

    [[nodiscard]] Assignment unstack(const Vector& y) const {
        Assignment out;
        for (const auto& v : variables_)
            out[v.id] = realize(v, y.segment(offset(v.id), v.scalar_count()));
        return out;
    }

    [[nodiscard]] Vector stack(const Assignment& values) const {
        Vector y = Vector::Zero(num_scalars_);
        for (const auto& v : variables_)
            y.segment(offset(v.id), v.scalar_count()) = scalars_of(v, values.at(v.id));
        return y;
    }

  private:
    std::vector<MatrixVariable> variables_;
    std::vector<int> offsets_;
    std::vector<DefinitenessConstraint> constraints_;
    int num_scalars_ = 0;
};

/**
 * @brief Lowers the problem to standard conic form.
 *
 * One cone block per constraint, in declaration order. Negative-definite
 * constraints are negated. With the margin on, every non-bound block is
 * shifted by mu I and mu is the objective.
 */
[[nodiscard]] inline StandardConicForm lower(const LmiProblem& problem, bool margin = true) {
    StandardConicForm form;
    form.num_scalars = problem.num_scalars();
    form.has_margin = margin;
    for (const auto& c : problem.constraints()) {
        const double sign = c.sense == Sense::negative_definite ? -1.0 : 1.0;
        const auto d = c.expr.rows();
        ConeBlock blk;
        blk.dim = static_cast<int>(d);
        blk.constant = svec(sign * c.expr.constant());
        blk.shifted = c.sense != Sense::bound;
        blk.label = c.label;

        std::map<int, Matrix> per_scalar;  // scalar index -> coefficient matrix
        for (const auto& t : c.expr.terms()) {
            const int base = problem.offset(t.var.id);
            for (int s = 0; s < t.var.scalar_count(); ++s) {
                auto [i, j] = t.var.scalar_position(s);
                // L E R with E = e_i e_j^T +/- e_j e_i^T
                const double other = t.var.kind == VariableKind::symmetric ? 1.0 : -1.0;
                Matrix v = t.left.col(i) * t.right.row(j);
                if (i != j)
                    v += other * t.left.col(j) * t.right.row(i);
                else if (t.var.kind == VariableKind::skew)
                    continue;
                if (t.symmetrize)
                    v = v + v.transpose().eval();
                auto [it, inserted] = per_scalar.try_emplace(base + s, Matrix::Zero(d, d));
                it->second += sign * v;
            }
        }
        for (auto& [idx, m] : per_scalar) {
            if (m.isZero(0.0))
                continue;
            if (!m.isApprox(m.transpose(), 1e-12) && (m - m.transpose()).norm() > 1e-12 * (1.0 + m.norm()))
                throw std::invalid_argument("constraint '" + c.label + "' lowers to a non-symmetric coefficient");
            blk.coefficients.emplace_back(idx, svec(0.5 * (m + m.transpose())));
        }
        form.blocks.push_back(std::move(blk));
    }
    return form;
}

}  // namespace ltvcert::lmi
