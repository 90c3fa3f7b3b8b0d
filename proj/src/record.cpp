#include "ilab/record.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

namespace ilab {

std::vector<std::pair<long, double>> RunRecord::series(const std::string& metric, int agent) const {
  std::vector<std::pair<long, double>> out;
  for (const auto& e : events)
    if (e.metric == metric && e.agent == agent) out.push_back({e.step, e.value});
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_run_csv(std::ostream& os, std::span<const RunRecord> runs) {
  os << "step,seed,agent,metric,value\n";
  for (const auto& run : runs)
    for (const auto& e : run.events)
      os << e.step << ',' << e.seed << ',' << e.agent << ',' << e.metric << ',' << format_double(e.value) << '\n';
}

void write_outer_csv(std::ostream& os, std::span<const RunRecord> runs) {
  os << "t,seed,metric,value\n";
  for (const auto& run : runs)
    for (const auto& e : run.events)
      if (e.agent < 0) os << e.step << ',' << e.seed << ',' << e.metric << ',' << format_double(e.value) << '\n';
}

std::vector<AggregateRow> aggregate(std::span<const RunRecord> runs) {
  std::map<std::pair<std::string, long>, std::vector<double>> groups;
  for (const auto& run : runs)
    for (const auto& e : run.events) {
      std::string name = e.agent < 0 ? e.metric : e.metric + ".agent" + std::to_string(e.agent);
      groups[{std::move(name), e.step}].push_back(e.value);
    }
  std::vector<AggregateRow> out;
  for (auto& [key, values] : groups) {
    std::sort(values.begin(), values.end());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double sd = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
    out.push_back({key.second, key.first, mean, sd});
  }
  return out;
}

void write_aggregate_csv(std::ostream& os, std::span<const AggregateRow> rows) {
  os << "step,metric,mean,std\n";
  for (const auto& r : rows) os << r.step << ',' << r.metric << ',' << format_double(r.mean) << ',' << format_double(r.std) << '\n';
}

}  // namespace ilab
