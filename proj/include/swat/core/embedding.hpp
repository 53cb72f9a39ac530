#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "swat/core/errors.hpp"
#include "swat/core/matrix.hpp"
#include "swat/core/token_window.hpp"

namespace swat {

/// Fixed positional encoding i -> p_i in R^D, total on all integers.
///
/// Kinds:
///  - zero:        p_i = 0
///  - constant:    p_i = c for every i
///  - sinusoidal:  p_i = [0, ..., 0, cos(i phi), sin(i phi)]
///  - sinusoidal_memory:
///                 p_i = [0, ..., 0, 1, cos(i phi), sin(i phi), u_{i mod l}, 0_trailing]
///                 where u_0..u_{l-1} is a bank of unit vectors (0-based,
///                 non-negative residue) and `trailing` zeros close the vector.
class PositionalEncoding {
 public:
  enum class Kind { zero, constant, sinusoidal, sinusoidal_memory };

  static PositionalEncoding zero(Eigen::Index dim) {
    PositionalEncoding pe;
    pe.kind_ = Kind::zero;
    pe.dim_ = dim;
    return pe;
  }

  static PositionalEncoding constant(Eigen::VectorXd value) {
    PositionalEncoding pe;
    pe.kind_ = Kind::constant;
    pe.dim_ = value.size();
    pe.constant_ = std::move(value);
    return pe;
  }

  static PositionalEncoding sinusoidal(Eigen::Index dim, double phi) {
    if (dim < 2) throw UsageError("sinusoidal encoding needs D >= 2");
    PositionalEncoding pe;
    pe.kind_ = Kind::sinusoidal;
    pe.dim_ = dim;
    pe.phi_ = phi;
    return pe;
  }

  static PositionalEncoding sinusoidal_memory(Eigen::Index dim, double phi, std::vector<Eigen::VectorXd> bank,
                                              Eigen::Index trailing = 0) {
    if (bank.empty()) throw UsageError("memory encoding needs a non-empty bank");
    const Eigen::Index width = bank.front().size();
    for (const auto& u : bank)
      if (u.size() != width) throw UsageError("memory bank vectors differ in length");
    if (trailing < 0 || dim < width + 3 + trailing) throw UsageError("memory encoding does not fit in D");
    PositionalEncoding pe;
    pe.kind_ = Kind::sinusoidal_memory;
    pe.dim_ = dim;
    pe.phi_ = phi;
    pe.bank_ = std::move(bank);
    pe.trailing_ = trailing;
    return pe;
  }

  Kind kind() const noexcept { return kind_; }
  Eigen::Index dim() const noexcept { return dim_; }
  double phi() const noexcept { return phi_; }
  Eigen::Index trailing() const noexcept { return trailing_; }
  /// Index of the constant-1 channel of a memory encoding.
  Eigen::Index memory_base() const noexcept {
    return bank_.empty() ? dim_ : dim_ - trailing_ - bank_.front().size() - 3;
  }
  const Eigen::VectorXd& constant_value() const noexcept { return constant_; }
  const std::vector<Eigen::VectorXd>& bank() const noexcept { return bank_; }

  const Eigen::VectorXd& bank_vector(long i) const {
    const long l = static_cast<long>(bank_.size());
    return bank_[static_cast<std::size_t>(((i % l) + l) % l)];
  }

  Eigen::VectorXd operator()(long i) const {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(dim_);
    add_to(p, i);
    return p;
  }

  /// p += p_i without allocating.
  template <typename Derived>
  void add_to(Eigen::MatrixBase<Derived>& p, long i) const {
    switch (kind_) {
      case Kind::zero:
        break;
      case Kind::constant:
        p += constant_;
        break;
      case Kind::sinusoidal:
        p(dim_ - 2) += std::cos(static_cast<double>(i) * phi_);
        p(dim_ - 1) += std::sin(static_cast<double>(i) * phi_);
        break;
      case Kind::sinusoidal_memory: {
        const Eigen::Index w = bank_.front().size();
        const Eigen::Index base = memory_base();
        p(base) += 1.0;
        p(base + 1) += std::cos(static_cast<double>(i) * phi_);
        p(base + 2) += std::sin(static_cast<double>(i) * phi_);
        p.segment(base + 3, w) += bank_vector(i);
        break;
      }
    }
  }

  /// sup_i ||p_i||_inf (exact for every kind).
  double sup_norm() const {
    switch (kind_) {
      case Kind::zero:
        return 0.0;
      case Kind::constant:
        return max_abs(constant_);
      case Kind::sinusoidal:
        return 1.0;
      case Kind::sinusoidal_memory: {
        double best = 1.0;
        for (const auto& u : bank_) best = std::max(best, max_abs(u));
        return best;
      }
    }
    return 0.0;
  }

  bool translation_invariant() const noexcept { return kind_ == Kind::zero || kind_ == Kind::constant; }

 private:
  Kind kind_ = Kind::zero;
  Eigen::Index dim_ = 0;
  double phi_ = 0.0;
  Eigen::VectorXd constant_;
  std::vector<Eigen::VectorXd> bank_;
  Eigen::Index trailing_ = 0;
};

/// Enc_P(X) = E X + P.
struct EmbeddingParams {
  SparseMatrix matrix;  // D x d
  PositionalEncoding pe;

  Eigen::Index token_dim() const noexcept { return matrix.cols(); }
  Eigen::Index embed_dim() const noexcept { return matrix.rows(); }
  double pe_bound() const { return pe.sup_norm(); }

  void validate() const {
    if (pe.dim() != matrix.rows()) throw UsageError("positional encoding dimension differs from D");
    if (!all_finite(matrix)) throw UsageError("embedding matrix has non-finite entries");
  }
};

inline TokenWindow embed(const EmbeddingParams& e, const TokenWindow& x) {
  if (x.dim() != e.token_dim())
    throw UsageError("embed: token dimension " + std::to_string(x.dim()) + ", expected " +
                     std::to_string(e.token_dim()));
  Eigen::MatrixXd z = e.matrix * x.data();
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    auto col = z.col(c);
    e.pe.add_to(col, x.offset() + static_cast<long>(c));
  }
  return TokenWindow(x.offset(), std::move(z));
}

}  // namespace swat
