#pragma once

#include <vector>

namespace ilab::detail {

using Adjacency = std::vector<std::vector<int>>;

// Tarjan. comp[v] is the component id; ids are in reverse topological order
// (a component only reaches components with smaller or equal id).
struct Components {
  std::vector<int> comp;
  int count = 0;
};

Components strongly_connected(const Adjacency& g);

// Nodes reachable from `roots` (inclusive).
std::vector<char> reachable(const Adjacency& g, const std::vector<int>& roots);

// Period of the strongly connected subgraph containing `root`, restricted to
// nodes with in_set[v] != 0.
int period(const Adjacency& g, const std::vector<char>& in_set, int root);

}  // namespace ilab::detail
