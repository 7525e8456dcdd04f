#include "minpo/diffkit/jet_layout.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace minpo::diffkit {

namespace {

struct LayoutKey {
  std::vector<int> maxes;
  int total;
  bool operator<(const LayoutKey& o) const {
    return std::tie(maxes, total) < std::tie(o.maxes, o.total);
  }
};

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

std::map<LayoutKey, std::unique_ptr<JetLayout>>& registry() {
  static std::map<LayoutKey, std::unique_ptr<JetLayout>> r;
  return r;
}

double factorial_of(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace

JetLayout::JetLayout(int dims, std::vector<int> maxes, int max_total) : dims_(dims) {
  // Enumerate the box in odometer order, keep entries within the total bound.
  MultiIndex gamma(static_cast<std::size_t>(dims), 0);
  std::vector<MultiIndex> all;
  while (true) {
    int total = std::accumulate(gamma.begin(), gamma.end(), 0);
    if (total <= max_total) all.push_back(gamma);
    int d = 0;
    while (d < dims) {
      if (gamma[static_cast<std::size_t>(d)] < maxes[static_cast<std::size_t>(d)]) {
        ++gamma[static_cast<std::size_t>(d)];
        break;
      }
      gamma[static_cast<std::size_t>(d)] = 0;
      ++d;
    }
    if (d == dims) break;
  }
  std::stable_sort(all.begin(), all.end(), [](const MultiIndex& a, const MultiIndex& b) {
    int sa = std::accumulate(a.begin(), a.end(), 0);
    int sb = std::accumulate(b.begin(), b.end(), 0);
    if (sa != sb) return sa < sb;
    return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
  });
  indices_ = std::move(all);
  for (const auto& g : indices_) {
    double f = 1.0;
    int total = 0;
    for (int v : g) {
      f *= factorial_of(v);
      total += v;
    }
    factorials_.push_back(f);
    max_order_ = std::max(max_order_, total);
  }
  const int k = size();
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      MultiIndex sum(static_cast<std::size_t>(dims));
      for (int d = 0; d < dims; ++d) {
        sum[static_cast<std::size_t>(d)] =
            indices_[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)] +
            indices_[static_cast<std::size_t>(j)][static_cast<std::size_t>(d)];
      }
      int c = find(sum);
      if (c >= 0) products_.push_back({i, j, c});
    }
  }
}

const JetLayout* JetLayout::plain() {
  static const JetLayout* p = box(std::span<const int>{}, 0);
  return p;
}

const JetLayout* JetLayout::box(std::span<const int> max_per_dim, int max_total) {
  for (int m : max_per_dim) {
    if (m < 0) throw std::invalid_argument("JetLayout: negative order");
  }
  if (max_total < 0) throw std::invalid_argument("JetLayout: negative total order");
  LayoutKey key{std::vector<int>(max_per_dim.begin(), max_per_dim.end()), max_total};
  // Collapse equivalent requests so pointer identity means layout identity.
  int reachable = 0;
  for (auto& m : key.maxes) {
    m = std::min(m, max_total);
    reachable += m;
  }
  key.total = std::min(max_total, reachable);
  if (key.total == 0) key.maxes.clear();

  std::lock_guard lock(registry_mutex());
  auto& reg = registry();
  auto it = reg.find(key);
  if (it != reg.end()) return it->second.get();
  auto layout = std::unique_ptr<JetLayout>(
      new JetLayout(static_cast<int>(key.maxes.size()), key.maxes, key.total));
  const JetLayout* raw = layout.get();
  reg.emplace(key, std::move(layout));
  return raw;
}

const JetLayout* JetLayout::covering(std::span<const MultiIndex> needed) {
  std::size_t dims = 0;
  for (const auto& g : needed) dims = std::max(dims, g.size());
  std::vector<int> maxes(dims, 0);
  int total = 0;
  for (const auto& g : needed) {
    int s = 0;
    for (std::size_t d = 0; d < g.size(); ++d) {
      maxes[d] = std::max(maxes[d], g[d]);
      s += g[d];
    }
    total = std::max(total, s);
  }
  return box(maxes, total);
}

int JetLayout::find(const MultiIndex& gamma) const {
  // Trailing zeros beyond dims are tolerated so plain layouts accept any zero index.
  for (std::size_t d = static_cast<std::size_t>(dims_); d < gamma.size(); ++d) {
    if (gamma[d] != 0) return -1;
  }
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    bool match = true;
    for (std::size_t d = 0; d < static_cast<std::size_t>(dims_); ++d) {
      int g = d < gamma.size() ? gamma[d] : 0;
      if (indices_[k][d] != g) {
        match = false;
        break;
      }
    }
    if (match) return static_cast<int>(k);
  }
  return -1;
}

int JetLayout::unit(int dim) const {
  if (dim < 0 || dim >= dims_) return -1;
  MultiIndex e(static_cast<std::size_t>(dims_), 0);
  e[static_cast<std::size_t>(dim)] = 1;
  return find(e);
}

void JetLayout::multiply(const double* a, const double* b, double* out) const {
  std::fill(out, out + size(), 0.0);
  multiply_add(a, b, out);
}

void JetLayout::multiply_add(const double* a, const double* b, double* out) const {
  for (const Term& t : products_) out[t.c] += a[t.a] * b[t.b];
}

void JetLayout::multiply_adjoint(const double* g, const double* b, double* grad_q) const {
  for (const Term& t : products_) grad_q[t.a] += g[t.c] * b[t.b];
}

}  // namespace minpo::diffkit
