#pragma once

// Set partitions of [L] = {0, ..., L-1} ordered by coarsening, the triangular
// coefficient array that converts power sums into sums over a partition class,
// and the class-sum evaluators built on it.
//
// Ordering convention: nu "coarsens" pi (nu <= pi) when every block of nu is a
// union of blocks of pi. The finest partition is the top element.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ouwalk {

inline constexpr int kMaxGroundSize = 12;

/// A partition of {0, ..., L-1} stored as a restricted growth string: the
/// label of element l is the index of its block when blocks are sorted by
/// smallest element. Two partitions are equal iff their labels are equal.
class SetPartition {
 public:
  SetPartition() = default;

  /// Canonicalizes an arbitrary labelling (equal labels = same block).
  template <typename Int>
  static SetPartition from_labels(std::span<const Int> raw) {
    if (raw.empty() || raw.size() > static_cast<std::size_t>(kMaxGroundSize)) {
      throw std::length_error("SetPartition: ground size must be in [1, 12]");
    }
    SetPartition out;
    out.size_ = static_cast<std::uint8_t>(raw.size());
    std::array<long long, kMaxGroundSize> seen{};
    int blocks = 0;
    for (std::size_t l = 0; l < raw.size(); ++l) {
      int found = -1;
      for (int b = 0; b < blocks; ++b) {
        if (seen[b] == static_cast<long long>(raw[l])) {
          found = b;
          break;
        }
      }
      if (found < 0) {
        seen[blocks] = static_cast<long long>(raw[l]);
        found = blocks++;
      }
      out.labels_[l] = static_cast<std::uint8_t>(found);
    }
    out.blocks_ = static_cast<std::uint8_t>(blocks);
    return out;
  }

  template <typename Int>
  static SetPartition from_labels(const std::vector<Int>& raw) {
    return from_labels(std::span<const Int>(raw));
  }

  /// Builds from explicit blocks over {0, ..., ground_size-1}; validates that
  /// the blocks are non-empty, disjoint and cover the ground set.
  static SetPartition from_blocks(const std::vector<std::vector<int>>& blocks,
                                  int ground_size) {
    if (ground_size < 1 || ground_size > kMaxGroundSize) {
      throw std::length_error("SetPartition: ground size must be in [1, 12]");
    }
    std::vector<int> labels(static_cast<std::size_t>(ground_size), -1);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      if (blocks[b].empty()) {
        throw std::invalid_argument("SetPartition: empty block");
      }
      for (int l : blocks[b]) {
        if (l < 0 || l >= ground_size) {
          throw std::invalid_argument("SetPartition: element out of range");
        }
        if (labels[static_cast<std::size_t>(l)] != -1) {
          throw std::invalid_argument("SetPartition: blocks overlap");
        }
        labels[static_cast<std::size_t>(l)] = static_cast<int>(b);
      }
    }
    if (std::find(labels.begin(), labels.end(), -1) != labels.end()) {
      throw std::invalid_argument("SetPartition: blocks do not cover ground set");
    }
    return from_labels(labels);
  }

  static SetPartition finest(int L) {
    std::vector<int> labels(static_cast<std::size_t>(L));
    for (int l = 0; l < L; ++l) labels[static_cast<std::size_t>(l)] = l;
    return from_labels(labels);
  }

  static SetPartition coarsest(int L) {
    return from_labels(std::vector<int>(static_cast<std::size_t>(L), 0));
  }

  int ground_size() const { return size_; }
  int block_count() const { return blocks_; }
  int label(int l) const { return labels_[static_cast<std::size_t>(l)]; }
  std::span<const std::uint8_t> labels() const { return {labels_.data(), size_}; }

  std::vector<std::vector<int>> blocks() const {
    std::vector<std::vector<int>> out(blocks_);
    for (int l = 0; l < size_; ++l) out[labels_[static_cast<std::size_t>(l)]].push_back(l);
    return out;
  }

  /// Block sizes in canonical block order.
  std::vector<int> block_sizes() const {
    std::vector<int> out(blocks_, 0);
    for (int l = 0; l < size_; ++l) ++out[labels_[static_cast<std::size_t>(l)]];
    return out;
  }

  /// 1-based rendering, e.g. {{1,3},{2}}.
  std::string to_string() const {
    std::string s = "{";
    auto bs = blocks();
    for (std::size_t b = 0; b < bs.size(); ++b) {
      if (b) s += ',';
      s += '{';
      for (std::size_t k = 0; k < bs[b].size(); ++k) {
        if (k) s += ',';
        s += std::to_string(bs[b][k] + 1);
      }
      s += '}';
    }
    return s + "}";
  }

  friend bool operator==(const SetPartition&, const SetPartition&) = default;
  friend auto operator<=>(const SetPartition&, const SetPartition&) = default;

 private:
  std::uint8_t size_ = 0;
  std::uint8_t blocks_ = 0;
  std::array<std::uint8_t, kMaxGroundSize> labels_{};
};

namespace detail {

inline void check_ground_size(int L) {
  if (L < 1 || L > kMaxGroundSize) {
    throw std::length_error("partition ground size must be in [1, 12], got " +
                            std::to_string(L));
  }
}

/// Visits every restricted growth string of length n in lexicographic order.
template <typename Visit>
void for_each_rgs(int n, Visit&& visit) {
  std::vector<int> a(static_cast<std::size_t>(n), 0);
  std::vector<int> max_prefix(static_cast<std::size_t>(n), 0);
  while (true) {
    visit(std::span<const int>(a));
    int i = n - 1;
    while (i > 0 && a[i] == max_prefix[i - 1] + 1) --i;
    if (i == 0) return;
    ++a[i];
    max_prefix[i] = std::max(max_prefix[i - 1], a[i]);
    for (int j = i + 1; j < n; ++j) {
      a[j] = 0;
      max_prefix[j] = max_prefix[i];
    }
  }
}

}  // namespace detail

/// All partitions of [L] in canonical form (lexicographic order of labels).
inline std::vector<SetPartition> enumerate_partitions(int L) {
  detail::check_ground_size(L);
  std::vector<SetPartition> out;
  detail::for_each_rgs(L, [&](std::span<const int> rgs) {
    out.push_back(SetPartition::from_labels(rgs));
  });
  return out;
}

/// True iff every block of `nu` is a union of blocks of `pi`.
inline bool coarsens(const SetPartition& nu, const SetPartition& pi) {
  if (nu.ground_size() != pi.ground_size()) {
    throw std::invalid_argument("coarsens: partitions of different ground sets");
  }
  std::array<int, kMaxGroundSize> nu_label_of_pi_block;
  nu_label_of_pi_block.fill(-1);
  for (int l = 0; l < pi.ground_size(); ++l) {
    int& slot = nu_label_of_pi_block[static_cast<std::size_t>(pi.label(l))];
    if (slot == -1) {
      slot = nu.label(l);
    } else if (slot != nu.label(l)) {
      return false;
    }
  }
  return true;
}

inline bool strictly_coarsens(const SetPartition& nu, const SetPartition& pi) {
  return nu.block_count() < pi.block_count() && coarsens(nu, pi);
}

/// nu_i: the partition of positions induced by equal entries of a multi-index.
inline SetPartition partition_class(std::span<const int> index) {
  return SetPartition::from_labels(index);
}

inline SetPartition partition_class(const std::vector<int>& index) {
  return partition_class(std::span<const int>(index));
}

/// Triangular coefficients c(pi, nu), nu <= pi, defined by c(pi, pi) = 1 and
/// c(pi, nu) = -sum_{nu <= mu < pi} c(mu, nu).
///
/// The interval [nu, pi] only depends on how many blocks of pi each block of
/// nu absorbs, so the recursion is run once per multiset of those counts and
/// memoized. Entries are exact integers.
class CoeffTable {
 public:
  struct Term {
    SetPartition coarser;  // nu
    std::int64_t coefficient;
  };

  explicit CoeffTable(int L) : ground_size_(L) {
    detail::check_ground_size(L);
    stirling_.assign(static_cast<std::size_t>(L + 1),
                     std::vector<std::int64_t>(static_cast<std::size_t>(L + 1), 0));
    stirling_[0][0] = 1;
    for (int n = 1; n <= L; ++n) {
      for (int k = 1; k <= n; ++k) {
        stirling_[n][k] = k * stirling_[n - 1][k] + stirling_[n - 1][k - 1];
      }
    }
  }

  int ground_size() const { return ground_size_; }

  /// c(pi, nu); throws if nu does not coarsen pi.
  std::int64_t coefficient(const SetPartition& pi, const SetPartition& nu) const {
    check(pi);
    check(nu);
    if (!coarsens(nu, pi)) {
      throw std::invalid_argument("CoeffTable: " + nu.to_string() +
                                  " does not coarsen " + pi.to_string());
    }
    // For each block of nu, count the blocks of pi inside it.
    std::vector<int> absorbed(static_cast<std::size_t>(nu.block_count()), 0);
    std::array<bool, kMaxGroundSize> counted{};
    for (int l = 0; l < pi.ground_size(); ++l) {
      auto b = static_cast<std::size_t>(pi.label(l));
      if (!counted[b]) {
        counted[b] = true;
        ++absorbed[static_cast<std::size_t>(nu.label(l))];
      }
    }
    return by_type(std::move(absorbed));
  }

  /// Every nu <= pi with its coefficient. Cost Bell(|pi|).
  std::vector<Term> expansion(const SetPartition& pi) const {
    check(pi);
    std::vector<Term> out;
    const int m = pi.block_count();
    detail::for_each_rgs(m, [&](std::span<const int> merge) {
      std::array<int, kMaxGroundSize> labels{};
      std::vector<int> absorbed(
          static_cast<std::size_t>(*std::max_element(merge.begin(), merge.end()) + 1), 0);
      for (int b = 0; b < m; ++b) ++absorbed[static_cast<std::size_t>(merge[b])];
      for (int l = 0; l < pi.ground_size(); ++l) labels[l] = merge[pi.label(l)];
      out.push_back({SetPartition::from_labels(
                         std::span<const int>(labels.data(),
                                              static_cast<std::size_t>(pi.ground_size()))),
                     by_type(std::move(absorbed))});
    });
    return out;
  }

  /// Full map over comparable pairs; intended for small L (Bell(L)^2 pairs).
  std::map<std::pair<SetPartition, SetPartition>, std::int64_t> materialize() const {
    std::map<std::pair<SetPartition, SetPartition>, std::int64_t> out;
    for (const auto& pi : enumerate_partitions(ground_size_)) {
      for (auto& term : expansion(pi)) out.emplace(std::pair{pi, term.coarser}, term.coefficient);
    }
    return out;
  }

 private:
  void check(const SetPartition& p) const {
    if (p.ground_size() != ground_size_) {
      throw std::invalid_argument("CoeffTable: partition ground size mismatch");
    }
  }

  // Type = multiset of per-block absorbed counts (k_1, ..., k_r). Moving from
  // the bottom of [nu, pi] upward, an intermediate mu splits the k_b blocks
  // under each nu-block into j_b groups in S(k_b, j_b) ways, and c(mu, nu) has
  // type (j_1, ..., j_r). mu = pi is the single choice j_b = k_b for all b.
  std::int64_t by_type(std::vector<int> type) const {
    std::sort(type.begin(), type.end());
    if (std::all_of(type.begin(), type.end(), [](int k) { return k == 1; })) return 1;
    {
      std::lock_guard lock(mutex_);
      if (auto it = memo_.find(type); it != memo_.end()) return it->second;
    }
    std::int64_t sum = 0;
    std::vector<int> choice(type.size(), 1);
    while (true) {
      if (choice != type) {
        std::int64_t ways = 1;
        for (std::size_t b = 0; b < type.size(); ++b) ways *= stirling_[type[b]][choice[b]];
        sum += ways * by_type(choice);
      }
      std::size_t b = 0;
      while (b < type.size() && choice[b] == type[b]) {
        choice[b] = 1;
        ++b;
      }
      if (b == type.size()) break;
      ++choice[b];
    }
    std::lock_guard lock(mutex_);
    memo_.emplace(type, -sum);
    return -sum;
  }

  int ground_size_;
  std::vector<std::vector<std::int64_t>> stirling_;
  mutable std::mutex mutex_;
  mutable std::map<std::vector<int>, std::int64_t> memo_;
};

/// Dense d x L real array a(j, l), row-major.
struct RealArray2D {
  int rows = 0;  // d
  int cols = 0;  // L
  std::vector<double> data;

  RealArray2D() = default;
  RealArray2D(int d, int L, double fill = 0.0)
      : rows(d), cols(L), data(static_cast<std::size_t>(d) * static_cast<std::size_t>(L), fill) {}

  /// a(j, l) = theta_j for every column.
  static RealArray2D constant_columns(std::span<const double> theta, int L) {
    RealArray2D a(static_cast<int>(theta.size()), L);
    for (int j = 0; j < a.rows; ++j)
      for (int l = 0; l < L; ++l) a(j, l) = theta[static_cast<std::size_t>(j)];
    return a;
  }

  double& operator()(int j, int l) { return data[static_cast<std::size_t>(j) * cols + l]; }
  double operator()(int j, int l) const { return data[static_cast<std::size_t>(j) * cols + l]; }
};

inline constexpr double kBruteForceTermLimit = 5e7;

/// Direct sum over I_pi of prod_l a(i_l, l): all multi-indices whose entries
/// agree exactly within blocks of pi and differ across blocks.
inline double class_sum_bruteforce(const RealArray2D& a, const SetPartition& pi) {
  if (a.cols != pi.ground_size()) {
    throw std::invalid_argument("class_sum_bruteforce: column count != ground size");
  }
  if (a.rows < 1) throw std::invalid_argument("class_sum_bruteforce: d must be >= 1");
  const int L = a.cols;
  if (std::pow(static_cast<double>(a.rows), L) > kBruteForceTermLimit) {
    throw std::length_error("class_sum_bruteforce: d^L exceeds term limit");
  }
  std::vector<int> index(static_cast<std::size_t>(L), 0);
  double total = 0.0;
  while (true) {
    if (partition_class(index) == pi) {
      double term = 1.0;
      for (int l = 0; l < L; ++l) term *= a(index[l], l);
      total += term;
    }
    int l = L - 1;
    while (l >= 0 && index[l] == a.rows - 1) index[l--] = 0;
    if (l < 0) break;
    ++index[l];
  }
  return total;
}

/// Every class sum in one pass over [d]^L.
inline std::map<SetPartition, double> class_sums_bruteforce_all(const RealArray2D& a) {
  if (a.rows < 1 || a.cols < 1 || a.cols > kMaxGroundSize) {
    throw std::invalid_argument("class_sums_bruteforce_all: bad array shape");
  }
  const int L = a.cols;
  if (std::pow(static_cast<double>(a.rows), L) > kBruteForceTermLimit) {
    throw std::length_error("class_sums_bruteforce_all: d^L exceeds term limit");
  }
  std::map<SetPartition, double> out;
  std::vector<int> index(static_cast<std::size_t>(L), 0);
  while (true) {
    double term = 1.0;
    for (int l = 0; l < L; ++l) term *= a(index[l], l);
    out[partition_class(index)] += term;
    int l = L - 1;
    while (l >= 0 && index[l] == a.rows - 1) index[l--] = 0;
    if (l < 0) break;
    ++index[l];
  }
  return out;
}

namespace detail {

inline bool has_constant_columns(const RealArray2D& a) {
  for (int j = 0; j < a.rows; ++j)
    for (int l = 1; l < a.cols; ++l)
      if (a(j, l) != a(j, 0)) return false;
  return true;
}

}  // namespace detail

/// Class sum from power sums: power_sums[r] = sum_j theta_j^r for r = 1..L
/// (index 0 unused). Valid when every column of the array equals theta.
inline double class_sum_constant(std::span<const double> power_sums, const SetPartition& pi,
                                 const CoeffTable& table) {
  if (static_cast<int>(power_sums.size()) <= pi.ground_size()) {
    throw std::invalid_argument("class_sum_constant: need power sums up to order L");
  }
  double total = 0.0;
  for (const auto& term : table.expansion(pi)) {
    double prod = 1.0;
    for (int size : term.coarser.block_sizes()) prod *= power_sums[static_cast<std::size_t>(size)];
    total += static_cast<double>(term.coefficient) * prod;
  }
  return total;
}

/// sum_{nu <= pi} c(pi, nu) prod_{s in nu} A_s with A_s = sum_j prod_{l in s} a(j, l).
/// Constant-column arrays go through cached power sums.
inline double class_sum_fast(const RealArray2D& a, const SetPartition& pi, const CoeffTable& table) {
  if (table.ground_size() != pi.ground_size() || a.cols != pi.ground_size()) {
    throw std::invalid_argument("class_sum_fast: table / array / partition size mismatch");
  }
  if (detail::has_constant_columns(a)) {
    std::vector<double> power_sums(static_cast<std::size_t>(a.cols + 1), 0.0);
    for (int j = 0; j < a.rows; ++j) {
      double x = 1.0;
      for (int r = 1; r <= a.cols; ++r) {
        x *= a(j, 0);
        power_sums[static_cast<std::size_t>(r)] += x;
      }
    }
    return class_sum_constant(power_sums, pi, table);
  }
  double total = 0.0;
  for (const auto& term : table.expansion(pi)) {
    double prod = 1.0;
    for (const auto& block : term.coarser.blocks()) {
      double A = 0.0;
      for (int j = 0; j < a.rows; ++j) {
        double x = 1.0;
        for (int l : block) x *= a(j, l);
        A += x;
      }
      prod *= A;
    }
    total += static_cast<double>(term.coefficient) * prod;
  }
  return total;
}

}  // namespace ouwalk
