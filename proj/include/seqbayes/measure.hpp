#pragma once

// Finite probability spaces and Markov kernels between them.
//
// Index convention: a product space A1 x ... x Ak is flattened row-major in
// factor order, so the last factor varies fastest:
//   flat(i1, ..., ik) = ((i1 * |A2| + i2) * |A3| + i3) ...
// JointDist, product spaces and product kernels all share this layout.

#include "seqbayes/scalar.hpp"

#include <algorithm>
#include <cstddef>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace seqbayes {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidDistribution : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnknownLabel : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Ordered set of distinct labels, or a product of such sets.
class FiniteSpace {
 public:
  explicit FiniteSpace(std::vector<std::string> labels) {
    if (labels.empty()) throw ShapeError("finite space needs at least one label");
    auto impl = std::make_shared<Impl>();
    impl->size = labels.size();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (!impl->index.emplace(labels[i], i).second)
        throw ShapeError("duplicate label '" + labels[i] + "'");
    }
    impl->labels = std::move(labels);
    impl_ = std::move(impl);
  }

  /// Space with labels "prefix0", "prefix1", ...
  static FiniteSpace enumerated(std::size_t n, std::string_view prefix) {
    std::vector<std::string> labels;
    labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) labels.push_back(std::string(prefix) + std::to_string(i));
    return FiniteSpace(std::move(labels));
  }

  /// Product space; a single factor is returned unchanged.
  static FiniteSpace product(std::vector<FiniteSpace> factors) {
    if (factors.empty()) throw ShapeError("product of zero spaces");
    if (factors.size() == 1) return factors.front();
    auto impl = std::make_shared<Impl>();
    impl->size = 1;
    for (const auto& f : factors) impl->size *= f.size();
    impl->factors = std::move(factors);
    return FiniteSpace(std::move(impl));
  }

  std::size_t size() const { return impl_->size; }
  bool is_product() const { return !impl_->factors.empty(); }
  const std::vector<FiniteSpace>& factors() const { return impl_->factors; }

  std::string label(std::size_t i) const {
    if (i >= size()) throw ShapeError("label index out of range");
    if (!is_product()) return impl_->labels[i];
    std::string out = "(";
    auto coords = unflatten(i);
    for (std::size_t k = 0; k < coords.size(); ++k) {
      if (k) out += ',';
      out += impl_->factors[k].label(coords[k]);
    }
    return out + ")";
  }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(label(i));
    return out;
  }

  std::size_t index_of(std::string_view label) const {
    if (!is_product()) {
      auto it = impl_->index.find(std::string(label));
      if (it == impl_->index.end()) throw UnknownLabel("unknown label '" + std::string(label) + "'");
      return it->second;
    }
    if (label.size() < 2 || label.front() != '(' || label.back() != ')')
      throw UnknownLabel("malformed product label '" + std::string(label) + "'");
    std::vector<std::string_view> parts;
    int depth = 0;
    std::size_t start = 1;
    for (std::size_t i = 1; i + 1 < label.size(); ++i) {
      if (label[i] == '(') ++depth;
      if (label[i] == ')') --depth;
      if (label[i] == ',' && depth == 0) {
        parts.push_back(label.substr(start, i - start));
        start = i + 1;
      }
    }
    parts.push_back(label.substr(start, label.size() - 1 - start));
    if (parts.size() != impl_->factors.size())
      throw UnknownLabel("product label '" + std::string(label) + "' has wrong arity");
    std::vector<std::size_t> coords;
    for (std::size_t k = 0; k < parts.size(); ++k) coords.push_back(impl_->factors[k].index_of(parts[k]));
    return flatten(coords);
  }

  bool contains(std::string_view label) const {
    try {
      index_of(label);
      return true;
    } catch (const UnknownLabel&) {
      return false;
    }
  }

  /// Factor coordinates of a flat index (product spaces only).
  std::vector<std::size_t> unflatten(std::size_t flat) const {
    const auto& fs = impl_->factors;
    std::vector<std::size_t> coords(fs.size());
    for (std::size_t k = fs.size(); k-- > 0;) {
      coords[k] = flat % fs[k].size();
      flat /= fs[k].size();
    }
    return coords;
  }

  std::size_t flatten(std::span<const std::size_t> coords) const {
    const auto& fs = impl_->factors;
    if (coords.size() != fs.size()) throw ShapeError("coordinate arity mismatch");
    std::size_t flat = 0;
    for (std::size_t k = 0; k < fs.size(); ++k) {
      if (coords[k] >= fs[k].size()) throw ShapeError("coordinate out of range");
      flat = flat * fs[k].size() + coords[k];
    }
    return flat;
  }

  friend bool operator==(const FiniteSpace& a, const FiniteSpace& b) {
    if (a.impl_ == b.impl_) return true;
    if (a.size() != b.size() || a.is_product() != b.is_product()) return false;
    if (a.is_product()) return a.impl_->factors == b.impl_->factors;
    return a.impl_->labels == b.impl_->labels;
  }

 private:
  struct Impl {
    std::size_t size = 0;
    std::vector<std::string> labels;
    std::unordered_map<std::string, std::size_t> index;
    std::vector<FiniteSpace> factors;
  };
  explicit FiniteSpace(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

  std::shared_ptr<const Impl> impl_;
};

namespace detail {

template <ProbabilityScalar S>
S total(std::span<const S> w) {
  if constexpr (ScalarTraits<S>::exact) {
    S sum(0);
    for (const auto& v : w) sum += v;
    return sum;
  } else {
    // Neumaier compensated sum
    double sum = 0.0, comp = 0.0;
    for (double v : w) {
      double t = sum + v;
      comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
      sum = t;
    }
    return sum + comp;
  }
}

template <ProbabilityScalar S>
void check_probability_vector(std::span<const S> w, std::string_view what) {
  for (const auto& v : w) {
    if constexpr (!ScalarTraits<S>::exact) {
      if (!std::isfinite(v)) throw InvalidDistribution(std::string(what) + ": non-finite weight");
    }
    if (v < S(0)) throw InvalidDistribution(std::string(what) + ": negative weight");
  }
  S dev = abs_value<S>(S(total<S>(w) - S(1)));
  if (dev > ScalarTraits<S>::tolerance())
    throw InvalidDistribution(std::string(what) + ": weights sum to " + format_scalar(S(total<S>(w))) +
                              ", expected 1");
}

struct Trusted {};

}  // namespace detail

/// Probability distribution on a finite space.
template <ProbabilityScalar S>
class Dist {
 public:
  Dist(FiniteSpace space, std::vector<S> weights) : space_(std::move(space)), weights_(std::move(weights)) {
    if (weights_.size() != space_.size()) throw ShapeError("distribution size does not match its space");
    detail::check_probability_vector<S>(weights_, "distribution");
  }
  Dist(detail::Trusted, FiniteSpace space, std::vector<S> weights)
      : space_(std::move(space)), weights_(std::move(weights)) {}

  static Dist dirac(FiniteSpace space, std::size_t at) {
    if (at >= space.size()) throw ShapeError("dirac location out of range");
    std::vector<S> w(space.size(), S(0));
    w[at] = S(1);
    return Dist(detail::Trusted{}, std::move(space), std::move(w));
  }

  static Dist uniform(FiniteSpace space) {
    std::vector<S> w(space.size(), from_ratio<S>(1, static_cast<long>(space.size())));
    return Dist(detail::Trusted{}, std::move(space), std::move(w));
  }

  const FiniteSpace& space() const { return space_; }
  std::span<const S> weights() const { return weights_; }
  std::size_t size() const { return weights_.size(); }
  const S& operator[](std::size_t i) const { return weights_[i]; }
  const S& at(std::string_view label) const { return weights_[space_.index_of(label)]; }
  S mass() const { return detail::total<S>(weights_); }

  friend bool operator==(const Dist& a, const Dist& b) {
    return a.space_ == b.space_ && a.weights_ == b.weights_;
  }

 private:
  FiniteSpace space_;
  std::vector<S> weights_;
};

/// Markov kernel between finite spaces: a row-stochastic |source| x |target| matrix.
template <ProbabilityScalar S>
class FiniteKernel {
 public:
  FiniteKernel(FiniteSpace source, FiniteSpace target, std::vector<S> flat_rows)
      : source_(std::move(source)), target_(std::move(target)), rows_(std::move(flat_rows)) {
    if (rows_.size() != source_.size() * target_.size()) throw ShapeError("kernel matrix has wrong size");
    for (std::size_t i = 0; i < source_.size(); ++i)
      detail::check_probability_vector<S>(row(i), "kernel row " + source_.label(i));
  }
  static FiniteKernel from_rows(FiniteSpace source, FiniteSpace target, const std::vector<std::vector<S>>& rows) {
    return FiniteKernel(std::move(source), std::move(target), flatten_rows(rows));
  }
  FiniteKernel(detail::Trusted, FiniteSpace source, FiniteSpace target, std::vector<S> flat_rows)
      : source_(std::move(source)), target_(std::move(target)), rows_(std::move(flat_rows)) {}

  const FiniteSpace& source() const { return source_; }
  const FiniteSpace& target() const { return target_; }
  std::span<const S> row(std::size_t i) const {
    return std::span<const S>(rows_).subspan(i * target_.size(), target_.size());
  }
  Dist<S> row_dist(std::size_t i) const {
    auto r = row(i);
    return Dist<S>(detail::Trusted{}, target_, std::vector<S>(r.begin(), r.end()));
  }
  const S& operator()(std::size_t src, std::size_t tgt) const { return rows_[src * target_.size() + tgt]; }
  std::span<const S> flat() const { return rows_; }

  friend bool operator==(const FiniteKernel& a, const FiniteKernel& b) {
    return a.source_ == b.source_ && a.target_ == b.target_ && a.rows_ == b.rows_;
  }

 private:
  static std::vector<S> flatten_rows(const std::vector<std::vector<S>>& rows) {
    std::vector<S> flat;
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    return flat;
  }

  FiniteSpace source_;
  FiniteSpace target_;
  std::vector<S> rows_;
};

/// Distribution on a product of finite spaces, stored flat (row-major, factor order).
template <ProbabilityScalar S>
class JointDist {
 public:
  JointDist(std::vector<FiniteSpace> factors, std::vector<S> weights)
      : factors_(std::move(factors)), weights_(std::move(weights)) {
    validate_shape();
    detail::check_probability_vector<S>(weights_, "joint distribution");
  }
  JointDist(detail::Trusted, std::vector<FiniteSpace> factors, std::vector<S> weights)
      : factors_(std::move(factors)), weights_(std::move(weights)) {}

  /// Reads a distribution on a product space as a joint over its factors.
  static JointDist from_dist(const Dist<S>& d) {
    std::vector<FiniteSpace> fs =
        d.space().is_product() ? d.space().factors() : std::vector<FiniteSpace>{d.space()};
    return JointDist(detail::Trusted{}, std::move(fs), std::vector<S>(d.weights().begin(), d.weights().end()));
  }

  const std::vector<FiniteSpace>& factors() const { return factors_; }
  std::size_t arity() const { return factors_.size(); }
  std::span<const S> weights() const { return weights_; }
  FiniteSpace space() const { return FiniteSpace::product(factors_); }
  Dist<S> as_dist() const { return Dist<S>(detail::Trusted{}, space(), weights_); }
  S mass() const { return detail::total<S>(weights_); }

  const S& at(std::span<const std::size_t> coords) const { return weights_[flat_index(coords)]; }
  const S& at(std::initializer_list<std::size_t> coords) const {
    return at(std::span<const std::size_t>(coords.begin(), coords.size()));
  }

  std::size_t flat_index(std::span<const std::size_t> coords) const {
    if (coords.size() != factors_.size()) throw ShapeError("coordinate arity mismatch");
    std::size_t flat = 0;
    for (std::size_t k = 0; k < coords.size(); ++k) {
      if (coords[k] >= factors_[k].size()) throw ShapeError("coordinate out of range");
      flat = flat * factors_[k].size() + coords[k];
    }
    return flat;
  }

  friend bool operator==(const JointDist& a, const JointDist& b) {
    return a.factors_ == b.factors_ && a.weights_ == b.weights_;
  }

 private:
  void validate_shape() const {
    if (factors_.empty()) throw ShapeError("joint distribution needs at least one factor");
    std::size_t n = 1;
    for (const auto& f : factors_) n *= f.size();
    if (n != weights_.size()) throw ShapeError("joint weights do not match factor sizes");
  }

  std::vector<FiniteSpace> factors_;
  std::vector<S> weights_;
};

// ---------------------------------------------------------------------------
// Kernel constructors

template <ProbabilityScalar S>
FiniteKernel<S> identity_kernel(const FiniteSpace& space) {
  std::vector<S> rows(space.size() * space.size(), S(0));
  for (std::size_t i = 0; i < space.size(); ++i) rows[i * space.size() + i] = S(1);
  return FiniteKernel<S>(detail::Trusted{}, space, space, std::move(rows));
}

/// Kernel of a map f: source -> target, given as target indices.
template <ProbabilityScalar S>
FiniteKernel<S> deterministic_kernel(const FiniteSpace& source, const FiniteSpace& target,
                                     std::span<const std::size_t> map) {
  if (map.size() != source.size()) throw ShapeError("map size does not match source");
  std::vector<S> rows(source.size() * target.size(), S(0));
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map[i] >= target.size()) throw ShapeError("map value out of range");
    rows[i * target.size() + map[i]] = S(1);
  }
  return FiniteKernel<S>(detail::Trusted{}, source, target, std::move(rows));
}

template <ProbabilityScalar S>
FiniteKernel<S> constant_kernel(const FiniteSpace& source, const Dist<S>& value) {
  std::vector<S> rows;
  rows.reserve(source.size() * value.size());
  for (std::size_t i = 0; i < source.size(); ++i) rows.insert(rows.end(), value.weights().begin(), value.weights().end());
  return FiniteKernel<S>(detail::Trusted{}, source, value.space(), std::move(rows));
}

// ---------------------------------------------------------------------------
// Kernel algebra

/// k2 after k1: (k2 . k1)(z|x) = sum_y k2(z|y) k1(y|x).
template <ProbabilityScalar S>
FiniteKernel<S> compose(const FiniteKernel<S>& k2, const FiniteKernel<S>& k1) {
  if (!(k1.target() == k2.source())) throw ShapeError("compose: k1 target does not match k2 source");
  const std::size_t nx = k1.source().size(), ny = k1.target().size(), nz = k2.target().size();
  std::vector<S> out(nx * nz, S(0));
  for (std::size_t x = 0; x < nx; ++x) {
    for (std::size_t y = 0; y < ny; ++y) {
      const S& a = k1(x, y);
      if (a == S(0)) continue;
      for (std::size_t z = 0; z < nz; ++z) out[x * nz + z] += a * k2(y, z);
    }
  }
  return FiniteKernel<S>(detail::Trusted{}, k1.source(), k2.target(), std::move(out));
}

/// Image measure: result(y) = sum_x k(y|x) mu(x).
template <ProbabilityScalar S>
Dist<S> pushforward(const FiniteKernel<S>& k, const Dist<S>& mu) {
  if (!(mu.space() == k.source())) throw ShapeError("pushforward: measure space does not match kernel source");
  const std::size_t nx = k.source().size(), ny = k.target().size();
  std::vector<S> out(ny, S(0));
  for (std::size_t x = 0; x < nx; ++x) {
    if (mu[x] == S(0)) continue;
    for (std::size_t y = 0; y < ny; ++y) out[y] += mu[x] * k(x, y);
  }
  return Dist<S>(detail::Trusted{}, k.target(), std::move(out));
}

/// Row-wise tensor product of kernels sharing a source.
template <ProbabilityScalar S>
FiniteKernel<S> product_kernel(std::span<const FiniteKernel<S>> kernels) {
  if (kernels.empty()) throw ShapeError("product_kernel: empty kernel list");
  const FiniteSpace& src = kernels.front().source();
  std::vector<FiniteSpace> targets;
  for (const auto& k : kernels) {
    if (!(k.source() == src)) throw ShapeError("product_kernel: kernels have different sources");
    targets.push_back(k.target());
  }
  if (kernels.size() == 1) return kernels.front();
  FiniteSpace tgt = FiniteSpace::product(targets);
  std::vector<S> out;
  out.reserve(src.size() * tgt.size());
  std::vector<S> acc, next;
  for (std::size_t t = 0; t < src.size(); ++t) {
    auto r0 = kernels.front().row(t);
    acc.assign(r0.begin(), r0.end());
    for (std::size_t k = 1; k < kernels.size(); ++k) {
      auto r = kernels[k].row(t);
      next.assign(acc.size() * r.size(), S(0));
      for (std::size_t i = 0; i < acc.size(); ++i) {
        if (acc[i] == S(0)) continue;
        for (std::size_t j = 0; j < r.size(); ++j) next[i * r.size() + j] = acc[i] * r[j];
      }
      acc.swap(next);
    }
    out.insert(out.end(), acc.begin(), acc.end());
  }
  return FiniteKernel<S>(detail::Trusted{}, src, std::move(tgt), std::move(out));
}

template <ProbabilityScalar S>
FiniteKernel<S> product_kernel(std::initializer_list<FiniteKernel<S>> kernels) {
  return product_kernel<S>(std::span<const FiniteKernel<S>>(kernels.begin(), kernels.size()));
}

/// Graph kernel x -> delta_x (x) k(x), as a kernel into source x target.
template <ProbabilityScalar S>
FiniteKernel<S> graph_kernel(const FiniteKernel<S>& k) {
  const std::size_t nx = k.source().size(), ny = k.target().size();
  std::vector<S> out(nx * nx * ny, S(0));
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y) out[x * nx * ny + x * ny + y] = k(x, y);
  return FiniteKernel<S>(detail::Trusted{}, k.source(), FiniteSpace::product({k.source(), k.target()}),
                         std::move(out));
}

/// Joint law of (x, y) with x ~ mu and y ~ k(.|x).
template <ProbabilityScalar S>
JointDist<S> graph_joint(const FiniteKernel<S>& k, const Dist<S>& mu) {
  if (!(mu.space() == k.source())) throw ShapeError("graph_joint: measure space does not match kernel source");
  const std::size_t nx = k.source().size(), ny = k.target().size();
  std::vector<S> out(nx * ny, S(0));
  for (std::size_t x = 0; x < nx; ++x) {
    if (mu[x] == S(0)) continue;
    for (std::size_t y = 0; y < ny; ++y) out[x * ny + y] = mu[x] * k(x, y);
  }
  return JointDist<S>(detail::Trusted{}, {k.source(), k.target()}, std::move(out));
}

template <ProbabilityScalar S>
JointDist<S> swap_joint(const JointDist<S>& j) {
  if (j.arity() != 2) throw ShapeError("swap_joint: expected exactly two factors");
  const std::size_t na = j.factors()[0].size(), nb = j.factors()[1].size();
  std::vector<S> out(na * nb);
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t b = 0; b < nb; ++b) out[b * na + a] = j.weights()[a * nb + b];
  return JointDist<S>(detail::Trusted{}, {j.factors()[1], j.factors()[0]}, std::move(out));
}

/// Sums out every factor not listed in `keep`. Kept factors stay in ascending index order.
template <ProbabilityScalar S>
JointDist<S> marginalize(const JointDist<S>& j, std::vector<std::size_t> keep) {
  if (keep.empty()) throw ShapeError("marginalize: empty keep set");
  std::sort(keep.begin(), keep.end());
  if (std::adjacent_find(keep.begin(), keep.end()) != keep.end()) throw ShapeError("marginalize: duplicate axis");
  if (keep.back() >= j.arity()) throw ShapeError("marginalize: axis out of range");

  const auto& fs = j.factors();
  const std::size_t k = fs.size();
  std::vector<FiniteSpace> kept;
  std::vector<std::size_t> out_stride(k, 0);
  std::size_t out_size = 1;
  for (std::size_t r = keep.size(); r-- > 0;) {
    out_stride[keep[r]] = out_size;
    out_size *= fs[keep[r]].size();
  }
  for (auto a : keep) kept.push_back(fs[a]);

  std::vector<S> out(out_size, S(0));
  std::vector<std::size_t> coords(k, 0);
  auto w = j.weights();
  for (std::size_t flat = 0; flat < w.size(); ++flat) {
    if (!(w[flat] == S(0))) {
      std::size_t o = 0;
      for (std::size_t a = 0; a < k; ++a) o += coords[a] * out_stride[a];
      out[o] += w[flat];
    }
    for (std::size_t a = k; a-- > 0;) {
      if (++coords[a] < fs[a].size()) break;
      coords[a] = 0;
    }
  }
  return JointDist<S>(detail::Trusted{}, std::move(kept), std::move(out));
}

/// One-axis marginal as a plain distribution.
template <ProbabilityScalar S>
Dist<S> marginal(const JointDist<S>& j, std::size_t axis) {
  auto m = marginalize(j, {axis});
  return Dist<S>(detail::Trusted{}, j.factors()[axis], std::vector<S>(m.weights().begin(), m.weights().end()));
}

/// Appends a factor C drawn from k given the factor at `axis`:
/// out(a_1..a_r, c) = j(a_1..a_r) k(c | a_axis).
template <ProbabilityScalar S>
JointDist<S> extend_joint(const JointDist<S>& j, std::size_t axis, const FiniteKernel<S>& k) {
  if (axis >= j.arity()) throw ShapeError("extend_joint: axis out of range");
  if (!(j.factors()[axis] == k.source())) throw ShapeError("extend_joint: kernel source does not match factor");
  std::size_t stride = 1;
  for (std::size_t a = axis + 1; a < j.arity(); ++a) stride *= j.factors()[a].size();
  const std::size_t na = k.source().size(), nc = k.target().size();
  auto w = j.weights();
  std::vector<S> out(w.size() * nc, S(0));
  for (std::size_t flat = 0; flat < w.size(); ++flat) {
    if (w[flat] == S(0)) continue;
    std::size_t a = (flat / stride) % na;
    for (std::size_t c = 0; c < nc; ++c) out[flat * nc + c] = w[flat] * k(a, c);
  }
  auto fs = j.factors();
  fs.push_back(k.target());
  return JointDist<S>(detail::Trusted{}, std::move(fs), std::move(out));
}

/// Largest elementwise |a_i - b_i|.
template <ProbabilityScalar S>
S max_abs_deviation(std::span<const S> a, std::span<const S> b) {
  if (a.size() != b.size()) throw ShapeError("max_abs_deviation: size mismatch");
  S best(0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    S d = abs_value<S>(S(a[i] - b[i]));
    if (d > best) best = d;
  }
  return best;
}

/// Total-variation distance between two distributions on the same space.
template <ProbabilityScalar S>
double total_variation(const Dist<S>& a, const Dist<S>& b) {
  if (!(a.space() == b.space())) throw ShapeError("total_variation: space mismatch");
  S sum(0);
  for (std::size_t i = 0; i < a.size(); ++i) sum += abs_value<S>(S(a[i] - b[i]));
  return to_double(sum) / 2.0;
}

template <ProbabilityScalar S>
Dist<double> to_float(const Dist<S>& d) {
  std::vector<double> w;
  for (const auto& v : d.weights()) w.push_back(to_double(v));
  return Dist<double>(detail::Trusted{}, d.space(), std::move(w));
}

}  // namespace seqbayes
