#pragma once

#include "koopeq/error.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace koopeq {

enum class DictionaryKind { identity, polynomial };

inline const char* to_string(DictionaryKind k) { return k == DictionaryKind::identity ? "identity" : "polynomial"; }

inline DictionaryKind dictionary_kind_from_string(const std::string& s) {
    if (s == "identity") return DictionaryKind::identity;
    if (s == "polynomial") return DictionaryKind::polynomial;
    throw Error(ErrorKind::config, "unknown dictionary kind '" + s + "'");
}

/// Lifting Psi: identity, or all monomials of total degree <= s in graded
/// lexicographic order, constant first: 1, z1..zq, z1^2, z1 z2, ..., zq^s.
class Dictionary {
public:
    Dictionary() = default;
    Dictionary(DictionaryKind kind, std::size_t input_dim, int max_degree = 1)
        : kind_(kind), input_dim_(input_dim), degree_(kind == DictionaryKind::identity ? 1 : max_degree) {
        require(input_dim >= 1, ErrorKind::invalid_input, "dictionary input dimension must be >= 1");
        require(degree_ >= 1, ErrorKind::invalid_input, "polynomial degree must be >= 1");
        if (kind_ == DictionaryKind::polynomial) build_monomials();
    }

    static Dictionary identity(std::size_t q) { return {DictionaryKind::identity, q}; }
    static Dictionary polynomial(std::size_t q, int degree) { return {DictionaryKind::polynomial, q, degree}; }

    /// Same kind and degree on a different input dimension.
    Dictionary with_input_dim(std::size_t q) const { return {kind_, q, degree_}; }

    DictionaryKind kind() const noexcept { return kind_; }
    std::size_t input_dim() const noexcept { return input_dim_; }
    int degree() const noexcept { return degree_; }

    std::size_t lifted_dim() const noexcept {
        return kind_ == DictionaryKind::identity ? input_dim_ : monomials_.size();
    }

    /// Offset of z_1 inside a lifted vector.
    std::size_t linear_offset() const noexcept { return kind_ == DictionaryKind::identity ? 0 : 1; }

    Eigen::VectorXd lift(const Eigen::Ref<const Eigen::VectorXd>& z) const {
        require(static_cast<std::size_t>(z.size()) == input_dim_, ErrorKind::dimension_mismatch,
                "lift expects " + std::to_string(input_dim_) + " entries, got " + std::to_string(z.size()));
        if (kind_ == DictionaryKind::identity) return z;
        Eigen::VectorXd psi(static_cast<Eigen::Index>(monomials_.size()));
        for (std::size_t r = 0; r < monomials_.size(); ++r) {
            double v = 1.0;
            for (std::size_t var : monomials_[r]) v *= z(static_cast<Eigen::Index>(var));
            psi(static_cast<Eigen::Index>(r)) = v;
        }
        return psi;
    }

    /// Column-wise lift of a q x m matrix.
    Eigen::MatrixXd lift_columns(const Eigen::MatrixXd& z) const {
        require(static_cast<std::size_t>(z.rows()) == input_dim_, ErrorKind::dimension_mismatch,
                "lift expects " + std::to_string(input_dim_) + " rows, got " + std::to_string(z.rows()));
        if (kind_ == DictionaryKind::identity) return z;
        Eigen::MatrixXd psi(static_cast<Eigen::Index>(monomials_.size()), z.cols());
        for (std::size_t r = 0; r < monomials_.size(); ++r) {
            Eigen::RowVectorXd row = Eigen::RowVectorXd::Ones(z.cols());
            for (std::size_t var : monomials_[r]) row.array() *= z.row(static_cast<Eigen::Index>(var)).array();
            psi.row(static_cast<Eigen::Index>(r)) = row;
        }
        return psi;
    }

    /// Extracts the degree-1 coordinates.
    Eigen::VectorXd project(const Eigen::Ref<const Eigen::VectorXd>& psi) const {
        require(static_cast<std::size_t>(psi.size()) == lifted_dim(), ErrorKind::dimension_mismatch,
                "project expects " + std::to_string(lifted_dim()) + " entries, got " + std::to_string(psi.size()));
        return psi.segment(static_cast<Eigen::Index>(linear_offset()), static_cast<Eigen::Index>(input_dim_));
    }

    Eigen::MatrixXd project_columns(const Eigen::MatrixXd& psi) const {
        require(static_cast<std::size_t>(psi.rows()) == lifted_dim(), ErrorKind::dimension_mismatch,
                "project expects " + std::to_string(lifted_dim()) + " rows");
        return psi.middleRows(static_cast<Eigen::Index>(linear_offset()), static_cast<Eigen::Index>(input_dim_));
    }

    /// Variable indices (with repetition) of each monomial, in lifted order.
    const std::vector<std::vector<std::size_t>>& monomials() const noexcept { return monomials_; }

    friend bool operator==(const Dictionary& a, const Dictionary& b) {
        return a.kind_ == b.kind_ && a.input_dim_ == b.input_dim_ && a.degree_ == b.degree_;
    }

private:
    void build_monomials() {
        monomials_.clear();
        monomials_.push_back({});
        std::vector<std::size_t> combo;
        for (int d = 1; d <= degree_; ++d) {
            combo.assign(static_cast<std::size_t>(d), 0);
            // non-decreasing index tuples in lexicographic order
            while (true) {
                monomials_.push_back(combo);
                int pos = d - 1;
                while (pos >= 0 && combo[static_cast<std::size_t>(pos)] == input_dim_ - 1) --pos;
                if (pos < 0) break;
                const std::size_t next = combo[static_cast<std::size_t>(pos)] + 1;
                for (auto p = static_cast<std::size_t>(pos); p < combo.size(); ++p) combo[p] = next;
            }
        }
    }

    DictionaryKind kind_ = DictionaryKind::identity;
    std::size_t input_dim_ = 1;
    int degree_ = 1;
    std::vector<std::vector<std::size_t>> monomials_;
};

}  // namespace koopeq
