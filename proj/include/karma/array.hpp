#pragma once

#include <array>
#include <cassert>
#include <cstddef>
#include <numeric>
#include <vector>

namespace karma {

// Small dense row-major array of doubles with a fixed rank.
template <int Rank>
class Array {
 public:
  Array() { dims_.fill(0); }

  template <class... D>
  explicit Array(D... dims) : dims_{static_cast<std::size_t>(dims)...} {
    static_assert(sizeof...(D) == Rank, "dimension count must match rank");
    data_.assign(total(), 0.0);
  }

  template <class... I>
  double& operator()(I... idx) {
    return data_[flat(static_cast<std::size_t>(idx)...)];
  }
  template <class... I>
  double operator()(I... idx) const {
    return data_[flat(static_cast<std::size_t>(idx)...)];
  }

  std::size_t dim(int i) const { return dims_[i]; }
  std::size_t size() const { return data_.size(); }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }
  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  bool empty() const { return data_.empty(); }

  double sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

 private:
  std::size_t total() const {
    std::size_t n = 1;
    for (auto d : dims_) n *= d;
    return n;
  }
  template <class... I>
  std::size_t flat(I... idx) const {
    static_assert(sizeof...(I) == Rank, "index count must match rank");
    std::array<std::size_t, Rank> ix{idx...};
    std::size_t off = 0;
    for (int i = 0; i < Rank; ++i) {
      assert(ix[i] < dims_[i]);
      off = off * dims_[i] + ix[i];
    }
    return off;
  }

  std::array<std::size_t, Rank> dims_;
  std::vector<double> data_;
};

using Array1 = Array<1>;
using Array2 = Array<2>;
using Array3 = Array<3>;
using Array4 = Array<4>;
using Array5 = Array<5>;
using Array6 = Array<6>;

}  // namespace karma
