#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace ilab {

struct RunEvent {
  std::uint64_t seed = 0;
  std::string phase;
  long step = 0;
  int agent = -1;  // -1 for joint metrics
  std::string metric;
  double value = 0.0;
};

struct RunRecord {
  std::vector<RunEvent> events;

  void add(std::uint64_t seed, std::string phase, long step, int agent, std::string metric, double value) {
    events.push_back({seed, std::move(phase), step, agent, std::move(metric), value});
  }
  // Values of one metric in step order.
  std::vector<std::pair<long, double>> series(const std::string& metric, int agent = -1) const;
};

// Shortest decimal that round-trips.
std::string format_double(double v);

// step,seed,agent,metric,value
void write_run_csv(std::ostream& os, std::span<const RunRecord> runs);
// t,seed,metric,value (joint metrics only)
void write_outer_csv(std::ostream& os, std::span<const RunRecord> runs);

struct AggregateRow {
  long step = 0;
  std::string metric;
  double mean = 0.0;
  double std = 0.0;
};

// Mean and sample standard deviation across runs per (metric, step); per-agent
// metrics are named "metric.agentN". Independent of run order.
std::vector<AggregateRow> aggregate(std::span<const RunRecord> runs);
// step,metric,mean,std
void write_aggregate_csv(std::ostream& os, std::span<const AggregateRow> rows);

}  // namespace ilab
