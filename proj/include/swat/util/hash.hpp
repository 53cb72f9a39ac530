#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace swat {

/// 64-bit FNV-1a, used for config digests and input fingerprints.
class Fnv1a {
 public:
  void update(const void* bytes, std::size_t n) noexcept {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) noexcept { update(s.data(), s.size()); }
  void update(const Eigen::MatrixXd& m) noexcept {
    const Eigen::Index shape[2] = {m.rows(), m.cols()};
    update(shape, sizeof shape);
    update(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
  }

  std::uint64_t value() const noexcept { return h_; }

  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
    return buf;
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::string digest(std::string_view s) {
  Fnv1a h;
  h.update(s);
  return h.hex();
}

inline std::string digest(const Eigen::MatrixXd& m) {
  Fnv1a h;
  h.update(m);
  return h.hex();
}

}  // namespace swat
