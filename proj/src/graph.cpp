#include "graph.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

namespace ilab::detail {

Components strongly_connected(const Adjacency& g) {
  const int n = static_cast<int>(g.size());
  Components out;
  out.comp.assign(n, -1);
  std::vector<int> index(n, -1), low(n, 0), stack;
  std::vector<char> on_stack(n, 0);
  int counter = 0;
  // Iterative Tarjan: frames of (node, next edge position).
  std::vector<std::pair<int, std::size_t>> frames;
  for (int root = 0; root < n; ++root) {
    if (index[root] >= 0) continue;
    frames.push_back({root, 0});
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!frames.empty()) {
      auto& [v, pos] = frames.back();
      if (pos < g[v].size()) {
        const int w = g[v][pos++];
        if (index[w] < 0) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = 1;
          frames.push_back({w, 0});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        int w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          out.comp[w] = out.count;
        } while (w != v);
        ++out.count;
      }
      const int done = v;
      frames.pop_back();
      if (!frames.empty()) {
        const int parent = frames.back().first;
        low[parent] = std::min(low[parent], low[done]);
      }
    }
  }
  return out;
}

std::vector<char> reachable(const Adjacency& g, const std::vector<int>& roots) {
  std::vector<char> seen(g.size(), 0);
  std::vector<int> todo;
  for (int r : roots)
    if (!seen[r]) {
      seen[r] = 1;
      todo.push_back(r);
    }
  while (!todo.empty()) {
    const int v = todo.back();
    todo.pop_back();
    for (int w : g[v])
      if (!seen[w]) {
        seen[w] = 1;
        todo.push_back(w);
      }
  }
  return seen;
}

int period(const Adjacency& g, const std::vector<char>& in_set, int root) {
  std::vector<int> level(g.size(), -1);
  std::queue<int> q;
  level[root] = 0;
  q.push(root);
  int p = 0;
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (int w : g[v]) {
      if (!in_set[w]) continue;
      if (level[w] < 0) {
        level[w] = level[v] + 1;
        q.push(w);
      } else {
        p = std::gcd(p, std::abs(level[v] + 1 - level[w]));
      }
    }
  }
  return p;
}

}  // namespace ilab::detail
