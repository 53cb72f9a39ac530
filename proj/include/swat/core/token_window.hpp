#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>

#include "swat/core/errors.hpp"

namespace swat {

/// Closed integer index range [first, last]. Empty when last < first.
struct IndexRange {
  long first = 0;
  long last = -1;

  long size() const noexcept { return last < first ? 0 : last - first + 1; }
  bool empty() const noexcept { return last < first; }
  bool contains(long i) const noexcept { return first <= i && i <= last; }
  bool contains(const IndexRange& other) const noexcept {
    return other.empty() || (first <= other.first && other.last <= last);
  }
  IndexRange widened(long left, long right) const noexcept { return {first - left, last + right}; }
  IndexRange shifted(long j) const noexcept { return {first + j, last + j}; }

  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Finite slice X[l:r] of a d x infinity token sequence. Column c of `data`
/// holds token x_{offset + c}.
class TokenWindow {
 public:
  TokenWindow() = default;
  TokenWindow(long offset, Eigen::MatrixXd data) : offset_(offset), data_(std::move(data)) {}

  static TokenWindow zeros(Eigen::Index dim, IndexRange range) {
    return TokenWindow(range.first, Eigen::MatrixXd::Zero(dim, range.size()));
  }

  long offset() const noexcept { return offset_; }
  long first() const noexcept { return offset_; }
  long last() const noexcept { return offset_ + static_cast<long>(data_.cols()) - 1; }
  IndexRange range() const noexcept { return {first(), last()}; }
  Eigen::Index dim() const noexcept { return data_.rows(); }
  Eigen::Index length() const noexcept { return data_.cols(); }

  const Eigen::MatrixXd& data() const noexcept { return data_; }
  Eigen::MatrixXd& data() noexcept { return data_; }

  /// Column index into data() for absolute position i.
  Eigen::Index local(long i) const {
    if (!range().contains(i)) {
      throw BoundaryError("token " + std::to_string(i) + " outside window [" +
                              std::to_string(first()) + ", " + std::to_string(last()) + "]",
                          i < first() ? first() - i : 0, i > last() ? i - last() : 0);
    }
    return static_cast<Eigen::Index>(i - offset_);
  }

  auto token(long i) const { return data_.col(local(i)); }
  auto token(long i) { return data_.col(local(i)); }

  /// Entry (row, position) with a 0-based row.
  double at(Eigen::Index row, long i) const { return data_(row, local(i)); }

  /// The sub-window X[l:r].
  TokenWindow slice(long l, long r) const {
    IndexRange want{l, r};
    if (!range().contains(want)) {
      throw BoundaryError("slice outside window", l < first() ? first() - l : 0,
                          r > last() ? r - last() : 0);
    }
    return TokenWindow(l, data_.middleCols(local(l), want.size()));
  }

  /// The shift operator: (shifted(j))_i = x_{i+j}.
  TokenWindow shifted(long j) const { return TokenWindow(offset_ - j, data_); }

  bool in_unit_cube() const {
    return (data_.array() >= 0.0).all() && (data_.array() <= 1.0).all();
  }

 private:
  long offset_ = 0;
  Eigen::MatrixXd data_;
};

}  // namespace swat
