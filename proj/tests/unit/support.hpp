#pragma once
#include <doctest.h>

#include <string>

#include "ilab/io.hpp"
#include "ilab/table.hpp"

namespace ilab::test {

inline std::string data_path(const std::string& name) { return std::string(ILAB_TEST_DATA) + "/" + name; }

inline const Json& oracles() {
  static const Json j = read_json_file(data_path("oracles.json"));
  return j;
}

inline FactoredMdp fixture() { return load_mdp(data_path("fixture_mdp.json")); }

inline double max_abs_diff(const Table& t, const Json& rows) {
  double worst = 0.0;
  REQUIRE(static_cast<int>(rows.size()) == t.rows());
  for (int r = 0; r < t.rows(); ++r) {
    REQUIRE(static_cast<int>(rows[r].size()) == t.cols());
    for (int c = 0; c < t.cols(); ++c) worst = std::max(worst, std::abs(t(r, c) - rows[r][c].get<double>()));
  }
  return worst;
}

}  // namespace ilab::test
