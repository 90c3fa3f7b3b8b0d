#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace ilab {

// Dense row-major rows x cols array.
class Table {
 public:
  Table() = default;
  Table(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  std::span<double> row(int r) { return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)}; }
  std::span<const double> row(int r) const {
    return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const Table& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// Q over joint (s,a).
struct QTable : Table {
  using Table::Table;
};
// Q^i over (s^i,a^i).
struct LocalQTable : Table {
  using Table::Table;
};
// pi(a|s) over joint states and actions.
struct JointPolicy : Table {
  using Table::Table;
};
// pi^i(a^i|s^i).
struct LocalPolicy : Table {
  using Table::Table;
};

struct FactoredPolicy {
  std::vector<LocalPolicy> agents;
};

// max |a - b| over all entries; shapes must agree.
double sup_norm_diff(const Table& a, const Table& b);
double sup_norm(const Table& a);
// Lowest index among maximal entries.
int argmax_lowest(std::span<const double> v);

}  // namespace ilab
