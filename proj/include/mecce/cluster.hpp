#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mecce {

/// Sorted, duplicate-free set of bath-spin indices. Ordering is by size
/// first, then lexicographic, which is the canonical enumeration order.
class Cluster {
 public:
  Cluster() = default;

  explicit Cluster(std::vector<int> spins) : spins_(std::move(spins)) {
    if (spins_.empty()) throw std::invalid_argument("cluster: empty");
    for (std::size_t k = 0; k < spins_.size(); ++k) {
      if (spins_[k] < 0) throw std::invalid_argument("cluster: negative spin index");
      if (k > 0 && spins_[k] <= spins_[k - 1]) throw std::invalid_argument("cluster: indices not strictly increasing");
    }
  }

  static Cluster whole(std::size_t n) {
    std::vector<int> all(n);
    for (std::size_t k = 0; k < n; ++k) all[k] = static_cast<int>(k);
    return Cluster(std::move(all));
  }

  const std::vector<int>& spins() const { return spins_; }
  std::size_t order() const { return spins_.size(); }
  int operator[](std::size_t k) const { return spins_[k]; }

  bool contains(int spin) const { return std::binary_search(spins_.begin(), spins_.end(), spin); }

  /// Position of `spin` inside the cluster, or -1.
  int local_index(int spin) const {
    auto it = std::lower_bound(spins_.begin(), spins_.end(), spin);
    if (it == spins_.end() || *it != spin) return -1;
    return static_cast<int>(it - spins_.begin());
  }

  std::string id() const {
    std::string out = "{";
    for (std::size_t k = 0; k < spins_.size(); ++k) {
      if (k) out += ",";
      out += std::to_string(spins_[k]);
    }
    return out + "}";
  }

  friend bool operator==(const Cluster&, const Cluster&) = default;
  friend std::strong_ordering operator<=>(const Cluster& a, const Cluster& b) {
    if (auto c = a.spins_.size() <=> b.spins_.size(); c != 0) return c;
    return a.spins_ <=> b.spins_;
  }

 private:
  std::vector<int> spins_;
};

}  // namespace mecce
